//! Least-squares fits for the two-block linear model.
//!
//! For one feature pair `x = [z1, z2]` with `z1 ~ (0, a)`, `y = γ z1 + ε1`,
//! `z2 = y + ε2`, the population least-squares weights are
//!
//! ```text
//! κ  = a(b + c + 2q) − p²
//! w1 = (γ a (c + q) − b p − γ p² − q p) / κ
//! w2 = a (b + q) / κ
//! ```
//!
//! with `p = Cov(z1, ε2)` and `q = Cov(ε1, ε2)`. Dropping `p` and `q` leaves
//! `(γ c/(b+c), b/(b+c))`; pooling several domains averages the two ratios.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::rng::rng;
use crate::sem_data::{read_column, write_column, GammaVector, MultiDomainDataset};
use crate::{format_f64, Error, Result};

/// Condition estimate above which a ridge term is added to the normal equations.
pub const RIDGE_CONDITION: f64 = 1e12;
/// Ridge size relative to `trace(XᵀX) / p`.
pub const RIDGE_SCALE: f64 = 1e-10;
/// Default μ-sample size for [`l1_distance`] on continuous inputs.
pub const DEFAULT_MU_SAMPLES: usize = 100_000;
pub const DEFAULT_MU_SEED: u64 = 0x005e_ed0f_4d15;

/// Linear predictor over `[causal | spurious]` features.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(Vec<f64>);

impl Weights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() || !w.len().is_multiple_of(2) {
            return Err(Error::InvalidDimension(format!(
                "weight length must be even and positive, got {}",
                w.len()
            )));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite weight".into()));
        }
        Ok(Self(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn causal_block(&self) -> &[f64] {
        &self.0[..self.0.len() / 2]
    }

    pub fn spurious_block(&self) -> &[f64] {
        &self.0[self.0.len() / 2..]
    }

    pub fn mean_abs_spurious(&self) -> f64 {
        let s = self.spurious_block();
        s.iter().map(|v| v.abs()).sum::<f64>() / s.len() as f64
    }

    /// Euclidean distance to `γ*` padded with zeros on the spurious block.
    pub fn distance_to(&self, gamma: &GammaVector) -> Result<f64> {
        let target = gamma.padded();
        if target.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                got: target.len(),
            });
        }
        Ok(self
            .0
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                got: x.ncols(),
            });
        }
        Ok(x * DVector::from_column_slice(&self.0))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_column(&self.0, path)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::new(read_column(path)?)
    }
}

/// Population moments of the single-pair model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormParams {
    /// `Var(z1)`
    pub a: f64,
    /// `Var(ε1)`
    pub b: f64,
    /// `Var(ε2)`
    pub c: f64,
    pub gamma: f64,
    /// `Cov(z1, ε2)`
    pub p: f64,
    /// `Cov(ε1, ε2)`
    pub q: f64,
}

impl ClosedFormParams {
    pub fn kappa(&self) -> f64 {
        self.a * (self.b + self.c + 2.0 * self.q) - self.p * self.p
    }
}

/// Exact population weights `(w1, w2)`.
pub fn closed_form_omega(params: &ClosedFormParams) -> Result<(f64, f64)> {
    let ClosedFormParams { a, b, c, gamma, p, q } = *params;
    let kappa = params.kappa();
    if kappa == 0.0 || !kappa.is_finite() {
        return Err(Error::Singular { condition: f64::INFINITY });
    }
    let w1 = (gamma * a * (c + q) - b * p - gamma * p * p - q * p) / kappa;
    let w2 = a * (b + q) / kappa;
    Ok((w1, w2))
}

/// `(γ c/(b+c), b/(b+c))`.
pub fn approx_omega(b: f64, c: f64, gamma: f64) -> Result<(f64, f64)> {
    let s = b + c;
    if s == 0.0 || !s.is_finite() {
        return Err(Error::Degenerate(format!("b + c = {s}")));
    }
    Ok((gamma * c / s, b / s))
}

/// Domain-averaged version of [`approx_omega`] over `(b_e, c_e)` pairs.
pub fn approx_omega_multi(envs: &[(f64, f64)], gamma: f64) -> Result<(f64, f64)> {
    if envs.is_empty() {
        return Err(Error::Empty("environment list"));
    }
    let mut causal = 0.0;
    let mut spurious = 0.0;
    for &(b, c) in envs {
        let (w1, w2) = approx_omega(b, c, 1.0)?;
        causal += w1;
        spurious += w2;
    }
    let e = envs.len() as f64;
    Ok((gamma * causal / e, spurious / e))
}

/// Accumulated `XᵀX`, `XᵀY`, `YᵀY` over any number of row blocks.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    pub gram: DMatrix<f64>,
    pub xty: DVector<f64>,
    pub yty: f64,
    pub rows: usize,
}

impl NormalEquations {
    pub fn new(p: usize) -> Self {
        Self {
            gram: DMatrix::zeros(p, p),
            xty: DVector::zeros(p),
            yty: 0.0,
            rows: 0,
        }
    }

    pub fn from_data(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Self> {
        let mut ne = Self::new(x.ncols());
        ne.add(x, y)?;
        Ok(ne)
    }

    pub fn add(&mut self, x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
        if x.ncols() != self.gram.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.gram.ncols(),
                got: x.ncols(),
            });
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        self.gram += x.tr_mul(x);
        self.xty += x.tr_mul(y);
        self.yty += y.dot(y);
        self.rows += x.nrows();
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.gram.ncols()
    }

    /// Mean squared residual of `w` over the accumulated rows.
    pub fn mse(&self, w: &DVector<f64>) -> f64 {
        let quad = w.dot(&(&self.gram * w));
        ((quad - 2.0 * w.dot(&self.xty) + self.yty) / self.rows as f64).max(0.0)
    }

    pub fn solve(&self) -> Result<OlsFit> {
        let p = self.p();
        if self.rows < p {
            return Err(Error::InvalidDimension(format!(
                "{} rows for {p} columns",
                self.rows
            )));
        }
        let condition = condition_estimate(&self.gram);
        let trace = self.gram.trace();
        let mut gram = self.gram.clone();
        let mut ridge = None;
        if !(condition <= RIDGE_CONDITION) {
            if !(trace > 0.0) {
                return Err(Error::Singular { condition });
            }
            let lambda = RIDGE_SCALE * trace / p as f64;
            for i in 0..p {
                gram[(i, i)] += lambda;
            }
            ridge = Some(lambda);
        }
        let chol = gram
            .cholesky()
            .ok_or(Error::Singular { condition })?;
        let w = chol.solve(&self.xty);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular { condition });
        }
        Ok(OlsFit {
            weights: w.iter().copied().collect(),
            condition,
            ridge,
        })
    }
}

/// Ratio of extreme eigenvalues of a symmetric PSD matrix (∞ when singular).
pub fn condition_estimate(gram: &DMatrix<f64>) -> f64 {
    let eig = gram.clone().symmetric_eigenvalues();
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || !max.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Raw least-squares solution; the weight vector may have odd length.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub weights: Vec<f64>,
    pub condition: f64,
    /// Ridge added to the diagonal when the design was ill-conditioned.
    pub ridge: Option<f64>,
}

pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    NormalEquations::from_data(x, y)?.solve()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitMethod {
    NormalEq,
    Gd,
}

impl FitMethod {
    pub fn name(self) -> &'static str {
        match self {
            FitMethod::NormalEq => "normal-eq",
            FitMethod::Gd => "gd",
        }
    }
}

impl std::str::FromStr for FitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal-eq" => Ok(FitMethod::NormalEq),
            "gd" => Ok(FitMethod::Gd),
            _ => Err(Error::InvalidArgument(format!(
                "unknown fit method `{s}` (expected normal-eq or gd)"
            ))),
        }
    }
}

/// Full-batch Adam settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            epochs: 5000,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Minimises the mean squared error from `w = 0` with full-batch Adam.
/// Returns the weights and final loss.
pub fn adam_fit(ne: &NormalEquations, cfg: &AdamConfig) -> Result<(Vec<f64>, f64)> {
    if ne.rows == 0 {
        return Err(Error::Empty("no rows"));
    }
    let p = ne.p();
    let scale = 2.0 / ne.rows as f64;
    let mut w = DVector::<f64>::zeros(p);
    let mut m = DVector::<f64>::zeros(p);
    let mut v = DVector::<f64>::zeros(p);
    let (mut b1t, mut b2t) = (1.0, 1.0);
    for step in 1..=cfg.epochs {
        let grad = (&ne.gram * &w - &ne.xty) * scale;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { step });
        }
        b1t *= cfg.beta1;
        b2t *= cfg.beta2;
        for i in 0..p {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            let mh = m[i] / (1.0 - b1t);
            let vh = v[i] / (1.0 - b2t);
            w[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
        }
    }
    let loss = ne.mse(&w);
    if !loss.is_finite() {
        return Err(Error::Divergence { step: cfg.epochs });
    }
    Ok((w.iter().copied().collect(), loss))
}

/// A pooled fit over every domain of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub weights: Weights,
    pub method: FitMethod,
    pub condition: f64,
    pub ridge: Option<f64>,
    /// Pooled mean squared error.
    pub loss: f64,
}

pub fn pooled_normal_equations(ds: &MultiDomainDataset) -> Result<NormalEquations> {
    let first = ds.domains.first().ok_or(Error::Empty("dataset has no domains"))?;
    let mut ne = NormalEquations::new(first.x.ncols());
    for dom in &ds.domains {
        ne.add(&dom.x, &dom.y)?;
    }
    Ok(ne)
}

/// Minimises `Σ_e ‖X_e w − Y_e‖²` over all domains.
pub fn pooled_fit(ds: &MultiDomainDataset, method: FitMethod) -> Result<Fit> {
    pooled_fit_with(ds, method, &AdamConfig::default())
}

pub fn pooled_fit_with(
    ds: &MultiDomainDataset,
    method: FitMethod,
    adam: &AdamConfig,
) -> Result<Fit> {
    let ne = pooled_normal_equations(ds)?;
    match method {
        FitMethod::NormalEq => {
            let fit = ne.solve()?;
            let loss = ne.mse(&DVector::from_column_slice(&fit.weights));
            Ok(Fit {
                weights: Weights::new(fit.weights)?,
                method,
                condition: fit.condition,
                ridge: fit.ridge,
                loss,
            })
        }
        FitMethod::Gd => {
            let (w, loss) = adam_fit(&ne, adam)?;
            Ok(Fit {
                weights: Weights::new(w)?,
                method,
                condition: condition_estimate(&ne.gram),
                ridge: None,
                loss,
            })
        }
    }
}

/// One row of a fit report.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub method: FitMethod,
    pub env_ids: Vec<u32>,
    pub causal_norm: f64,
    pub spurious_norm: f64,
    pub spurious_mean_abs: f64,
    pub dist_to_gamma: f64,
}

impl FitReport {
    pub const HEADER: &'static str =
        "method,envs,causal_norm,spurious_norm,spurious_mean_abs,dist_to_gamma";

    pub fn new(fit: &Fit, ds: &MultiDomainDataset) -> Result<Self> {
        let l2 = |s: &[f64]| s.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(Self {
            method: fit.method,
            env_ids: ds.env_ids(),
            causal_norm: l2(fit.weights.causal_block()),
            spurious_norm: l2(fit.weights.spurious_block()),
            spurious_mean_abs: fit.weights.mean_abs_spurious(),
            dist_to_gamma: fit.weights.distance_to(&ds.gamma)?,
        })
    }

    pub fn csv_row(&self) -> String {
        let envs: Vec<String> = self.env_ids.iter().map(|e| e.to_string()).collect();
        format!(
            "{},{},{},{},{},{}",
            self.method.name(),
            envs.join(";"),
            format_f64(self.causal_norm),
            format_f64(self.spurious_norm),
            format_f64(self.spurious_mean_abs),
            format_f64(self.dist_to_gamma)
        )
    }
}

/// `n × p` standard-normal sample used as the default μ.
pub fn gaussian_mu_sample(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let data: Vec<f64> = (0..n * p).map(|_| r.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(n, p, &data)
}

/// Empirical `E_μ |hᵀx − h'ᵀx|` over the rows of `mu_samples`.
pub fn l1_distance(h: &Weights, other: &Weights, mu_samples: &DMatrix<f64>) -> Result<f64> {
    if h.len() != other.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            got: other.len(),
        });
    }
    if mu_samples.ncols() != h.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            got: mu_samples.ncols(),
        });
    }
    if mu_samples.nrows() == 0 {
        return Err(Error::Empty("mu sample"));
    }
    let diff: Vec<f64> = h.0.iter().zip(&other.0).map(|(a, b)| a - b).collect();
    let total = neumaier_sum(
        mu_samples
            .row_iter()
            .map(|row| row.iter().zip(&diff).map(|(x, d)| x * d).sum::<f64>().abs()),
    );
    Ok(total / mu_samples.nrows() as f64)
}

/// `Σ_x μ(x) |h(x) − h'(x)|` for predictors tabulated on a finite input set.
pub fn l1_distance_exact(h: &[f64], other: &[f64], mu: &[f64]) -> Result<f64> {
    if h.len() != other.len() || h.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: h.len().max(other.len()),
        });
    }
    Ok(neumaier_sum(
        h.iter()
            .zip(other)
            .zip(mu)
            .map(|((a, b), w)| w * (a - b).abs()),
    ))
}

pub(crate) fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
