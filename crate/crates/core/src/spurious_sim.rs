//! Two-feature analog of the colored-digit benchmark.
//!
//! Each example has a latent digit class `z ~ Bern(1/2)`, a shape signal
//! `(2z − 1) + shape_noise·N(0, 1)`, an observed label `Y` equal to `z`
//! flipped with probability `label_noise`, and a color bit equal to `Y`
//! flipped with probability `e`. Small `e` makes color a strong but
//! spurious predictor; with the default 25% label noise, a predictor that
//! reads the digit exactly tops out at 75% accuracy on every domain.
//!
//! All draws come from uniforms in a fixed order, so domains generated with
//! the same seed but different `e` share digits, shapes and labels and differ
//! only in which colors are flipped.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::rng::{derive_seed, rng};
use crate::{format_f64, Error, Result};

/// Label flip rate of the observed label.
pub const LABEL_NOISE: f64 = 0.25;
/// Standard deviation of the shape-signal noise (unit class separation).
pub const SHAPE_NOISE: f64 = 1.0;
/// Largest counterfactual gap still counted as color-robust.
pub const CF_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColoredParams {
    pub label_noise: f64,
    pub shape_noise: f64,
}

impl Default for ColoredParams {
    fn default() -> Self {
        Self { label_noise: LABEL_NOISE, shape_noise: SHAPE_NOISE }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColoredDomain {
    /// Probability that the color disagrees with the observed label.
    pub e: f64,
    pub shape: Vec<f64>,
    pub color: Vec<bool>,
    /// Observed (noisy) label.
    pub y: Vec<bool>,
    /// Latent digit class.
    pub digit: Vec<bool>,
}

impl ColoredDomain {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Copy with every color bit flipped.
    pub fn recolored(&self) -> Self {
        Self { color: self.color.iter().map(|c| !c).collect(), ..self.clone() }
    }
}

pub fn gen_colored_domain(e: f64, n: usize, seed: u64) -> Result<ColoredDomain> {
    gen_colored_domain_with(e, n, seed, &ColoredParams::default())
}

pub fn gen_colored_domain_with(e: f64, n: usize, seed: u64, params: &ColoredParams) -> Result<ColoredDomain> {
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::InvalidArgument(format!("e must lie in [0, 1], got {e}")));
    }
    if !(0.0..=1.0).contains(&params.label_noise) || !(params.shape_noise >= 0.0) {
        return Err(Error::InvalidArgument("invalid noise parameters".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let mut r = rng(seed);
    let mut dom = ColoredDomain {
        e,
        shape: Vec::with_capacity(n),
        color: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        digit: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let u_digit: f64 = r.random();
        let g: f64 = r.sample(StandardNormal);
        let u_label: f64 = r.random();
        let u_color: f64 = r.random();
        let z = u_digit < 0.5;
        let y = z ^ (u_label < params.label_noise);
        let color = y ^ (u_color < e);
        dom.digit.push(z);
        dom.shape.push(if z { 1.0 } else { -1.0 } + params.shape_noise * g);
        dom.y.push(y);
        dom.color.push(color);
    }
    Ok(dom)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticModel {
    pub w_shape: f64,
    pub w_color: f64,
    pub bias: f64,
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LogisticModel {
    /// Predicts `Y = color`.
    pub const COLOR_ONLY: LogisticModel = LogisticModel { w_shape: 0.0, w_color: 2.0, bias: -1.0 };

    pub fn logit(&self, shape: f64, color: bool) -> f64 {
        self.w_shape * shape + self.w_color * f64::from(u8::from(color)) + self.bias
    }

    pub fn predict(&self, shape: f64, color: bool) -> bool {
        self.logit(shape, color) > 0.0
    }

    pub fn accuracy(&self, dom: &ColoredDomain) -> f64 {
        let hits = (0..dom.len())
            .filter(|&i| self.predict(dom.shape[i], dom.color[i]) == dom.y[i])
            .count();
        hits as f64 / dom.len() as f64
    }

    /// The same model with the color weight zeroed.
    pub fn without_color(&self) -> Self {
        Self { w_color: 0.0, ..*self }
    }
}

/// Accuracy of reading the latent digit exactly: the label-noise ceiling.
pub fn oracle_accuracy(dom: &ColoredDomain) -> f64 {
    let hits = dom.digit.iter().zip(&dom.y).filter(|(z, y)| z == y).count();
    hits as f64 / dom.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { steps: 2000, lr: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trained {
    pub model: LogisticModel,
    /// Mean log-loss at the final weights.
    pub loss: f64,
    /// Euclidean norm of the final gradient.
    pub grad_norm: f64,
}

fn gradient(m: &LogisticModel, domains: &[ColoredDomain], total: f64) -> [f64; 3] {
    let mut g = [0.0; 3];
    for dom in domains {
        for i in 0..dom.len() {
            let r = sigmoid(m.logit(dom.shape[i], dom.color[i])) - f64::from(u8::from(dom.y[i]));
            g[0] += r * dom.shape[i];
            if dom.color[i] {
                g[1] += r;
            }
            g[2] += r;
        }
    }
    g.map(|v| v / total)
}

fn mean_log_loss(m: &LogisticModel, domains: &[ColoredDomain], total: f64) -> f64 {
    let mut loss = 0.0;
    for dom in domains {
        for i in 0..dom.len() {
            let t = m.logit(dom.shape[i], dom.color[i]);
            let y = f64::from(u8::from(dom.y[i]));
            // log(1 + e^t) − y t, computed stably.
            loss += t.max(0.0) + (-t.abs()).exp().ln_1p() - y * t;
        }
    }
    loss / total
}

/// Full-batch gradient descent on the pooled mean log-loss from zero weights.
pub fn train(domains: &[ColoredDomain], cfg: &TrainConfig) -> Result<Trained> {
    if domains.is_empty() {
        return Err(Error::Empty("no training domains"));
    }
    let total = domains.iter().map(ColoredDomain::len).sum::<usize>() as f64;
    if total == 0.0 {
        return Err(Error::Empty("no training examples"));
    }
    let mut m = LogisticModel { w_shape: 0.0, w_color: 0.0, bias: 0.0 };
    for step in 1..=cfg.steps {
        let g = gradient(&m, domains, total);
        m.w_shape -= cfg.lr * g[0];
        m.w_color -= cfg.lr * g[1];
        m.bias -= cfg.lr * g[2];
        if !(m.w_shape.is_finite() && m.w_color.is_finite() && m.bias.is_finite()) {
            return Err(Error::Divergence { step });
        }
    }
    let loss = mean_log_loss(&m, domains, total);
    let g = gradient(&m, domains, total);
    if !loss.is_finite() {
        return Err(Error::Divergence { step: cfg.steps });
    }
    let grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(Trained { model: m, loss, grad_norm })
}

pub fn eval_factual(model: &LogisticModel, dom: &ColoredDomain) -> f64 {
    model.accuracy(dom)
}

/// Accuracy after flipping every color bit.
pub fn eval_counterfactual(model: &LogisticModel, dom: &ColoredDomain) -> f64 {
    model.accuracy(&dom.recolored())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterfactualReport {
    pub factual: f64,
    pub counterfactual: f64,
    /// `|counterfactual − factual|`.
    pub gap: f64,
    pub within_tolerance: bool,
}

impl CounterfactualReport {
    pub fn evaluate(model: &LogisticModel, dom: &ColoredDomain) -> Self {
        let factual = eval_factual(model, dom);
        let counterfactual = eval_counterfactual(model, dom);
        let gap = (counterfactual - factual).abs();
        Self { factual, counterfactual, gap, within_tolerance: gap <= CF_TOLERANCE }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub e1: f64,
    pub grid: Vec<f64>,
    pub e_test: f64,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            e1: 0.1,
            grid: default_grid(),
            e_test: 0.9,
            n: 5000,
            trials: 10,
            seed: 0,
            train: TrainConfig::default(),
        }
    }
}

/// `0.2, 0.25, ..., 0.55`.
pub fn default_grid() -> Vec<f64> {
    (0..8).map(|i| (20 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub trial: usize,
    pub e1: f64,
    pub e2: f64,
    /// `|e2 − e1|`.
    pub dv: f64,
    /// Accuracy on the unseen test domain.
    pub y_un: f64,
    /// Accuracy on held-out data from the `e1` domain.
    pub y_e1: f64,
    pub cf_gap_un: f64,
    pub cf_gap_e1: f64,
}

impl SweepRow {
    pub const HEADER: &'static str = "trial,e1,e2,dv,y_un,y_e1,cf_gap_un,cf_gap_e1";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.trial,
            format_f64(self.e1),
            format_f64(self.e2),
            format_f64(self.dv),
            format_f64(self.y_un),
            format_f64(self.y_e1),
            format_f64(self.cf_gap_un),
            format_f64(self.cf_gap_e1)
        )
    }
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{}\n", SweepRow::HEADER);
    for r in rows {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Trains on `{e1, e2}` for every grid point and trial and evaluates on an
/// unseen domain and on held-out `e1` data. Seeds depend only on the trial,
/// so grid points within a trial are paired.
pub fn shift_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if cfg.grid.is_empty() {
        return Err(Error::Empty("sweep grid"));
    }
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let jobs: Vec<(usize, f64)> = (0..cfg.trials)
        .flat_map(|t| cfg.grid.iter().map(move |&e2| (t, e2)))
        .collect();
    jobs.par_iter()
        .map(|&(trial, e2)| {
            let s = |role: u64| derive_seed(cfg.seed, &[trial as u64, role]);
            let train_e1 = gen_colored_domain(cfg.e1, cfg.n, s(0))?;
            let train_e2 = gen_colored_domain(e2, cfg.n, s(1))?;
            let test_un = gen_colored_domain(cfg.e_test, cfg.n, s(2))?;
            let test_e1 = gen_colored_domain(cfg.e1, cfg.n, s(3))?;
            let model = train(&[train_e1, train_e2], &cfg.train)?.model;
            let un = CounterfactualReport::evaluate(&model, &test_un);
            let e1 = CounterfactualReport::evaluate(&model, &test_e1);
            Ok(SweepRow {
                trial,
                e1: cfg.e1,
                e2,
                dv: (e2 - cfg.e1).abs(),
                y_un: un.factual,
                y_e1: e1.factual,
                cf_gap_un: un.gap,
                cf_gap_e1: e1.gap,
            })
        })
        .collect()
}
