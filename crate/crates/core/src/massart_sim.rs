//! Monte-Carlo check of the multi-domain bounds on a finite input space.
//!
//! Inputs are `K` atoms with weights `μ`. A domain is a Bayes labeling `t`
//! plus a margin `m`: on the noisy part of the space
//! `η(x) = (1 + (2t(x) − 1)m)/2`, elsewhere `η(x) = t(x) = 0`. With a finite
//! space, distances, KL divergences and the pooled 0-1 ERM are all exact, so
//! the only randomness in a trial is the label sampling.
//!
//! Massart families are built along a path: domain `e` flips the first
//! `ℓ_e` atoms of a seeded ordering of a base labeling, with `ℓ_e` evenly
//! spaced from `0` to the prefix whose mass matches the target `β`.
//! Clean families share one labeling and shift only the input weights.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::bounds::{rhs_t1, rhs_t2, BoundReport};
use crate::divergence::{kl_discrete, kl_massart};
use crate::regression::l1_distance_exact;
use crate::rng::{derive_seed, rng};
use crate::{format_f64, Error, Result};

const FAMILY_STREAM: u64 = u64::MAX;
const MU_TOL: f64 = 1e-9;

/// Binary labeling of the atoms together with the input measure.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteClassifier {
    pub labels: Vec<bool>,
    pub mu: Vec<f64>,
}

impl DiscreteClassifier {
    pub fn new(labels: Vec<bool>, mu: Vec<f64>) -> Result<Self> {
        if labels.len() != mu.len() {
            return Err(Error::DimensionMismatch { expected: mu.len(), got: labels.len() });
        }
        if labels.is_empty() {
            return Err(Error::Empty("classifier over zero atoms"));
        }
        if mu.iter().any(|w| !(*w >= 0.0)) || (mu.iter().sum::<f64>() - 1.0).abs() > MU_TOL {
            return Err(Error::InvalidArgument("mu must be a probability vector".into()));
        }
        Ok(Self { labels, mu })
    }

    pub fn uniform(labels: Vec<bool>) -> Result<Self> {
        let k = labels.len().max(1);
        Self::new(labels, vec![1.0 / k as f64; k])
    }

    pub fn k(&self) -> usize {
        self.labels.len()
    }

    /// Exact `L1(μ)` distance, using this classifier's `μ`.
    pub fn distance(&self, other: &DiscreteClassifier) -> Result<f64> {
        let a: Vec<f64> = self.labels.iter().map(|&b| f64::from(u8::from(b))).collect();
        let b: Vec<f64> = other.labels.iter().map(|&b| f64::from(u8::from(b))).collect();
        l1_distance_exact(&a, &b, &self.mu)
    }
}

/// Distribution of one domain: Bayes labeling, margin and noisy partition.
#[derive(Debug, Clone, PartialEq)]
pub struct MassartSpec {
    pub bayes: DiscreteClassifier,
    /// Margin in `[0, 1]`; `1` is noise-free.
    pub m: f64,
    /// Atoms in the noisy partition; the rest carry `η = t = 0`.
    pub noisy: Vec<bool>,
}

impl MassartSpec {
    pub fn new(bayes: DiscreteClassifier, m: f64, noisy: Vec<bool>) -> Result<Self> {
        if !(0.0..=1.0).contains(&m) {
            return Err(Error::InvalidArgument(format!("margin m must lie in [0, 1], got {m}")));
        }
        if noisy.len() != bayes.k() {
            return Err(Error::DimensionMismatch { expected: bayes.k(), got: noisy.len() });
        }
        if bayes.labels.iter().zip(&noisy).any(|(&t, &n)| !n && t) {
            return Err(Error::InvalidArgument("atoms outside the noisy partition must be labeled 0".into()));
        }
        Ok(Self { bayes, m, noisy })
    }

    pub fn eta(&self, x: usize) -> f64 {
        let t = self.bayes.labels[x];
        if self.noisy[x] {
            let sign = if t { 1.0 } else { -1.0 };
            (1.0 + sign * self.m) / 2.0
        } else {
            0.0
        }
    }

    /// `min_x |2η(x) − 1|`.
    pub fn margin(&self) -> f64 {
        (0..self.bayes.k())
            .map(|x| (2.0 * self.eta(x) - 1.0).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Joint law over `(atom, label)`, laid out `[P(x,0), P(x,1)]` per atom.
    pub fn joint(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.bayes.k());
        for x in 0..self.bayes.k() {
            let w = self.bayes.mu[x];
            let eta = self.eta(x);
            out.push(w * (1.0 - eta));
            out.push(w * eta);
        }
        out
    }
}

/// A domain together with its drawn sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MassartDomain {
    pub spec: MassartSpec,
    pub samples: Vec<(usize, bool)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Noisy labels with margin `m`; shift through differing Bayes labelings.
    Massart,
    /// Noise-free labels shared by all domains; shift through the input weights.
    Clean,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "massart" => Ok(Mode::Massart),
            "clean" => Ok(Mode::Clean),
            _ => Err(Error::InvalidArgument(format!("unknown mode `{s}` (expected massart or clean)"))),
        }
    }
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Massart => "massart",
            Mode::Clean => "clean",
        }
    }
}

/// Domains of one experiment and their shift constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Family {
    pub mode: Mode,
    pub domains: Vec<MassartSpec>,
    /// Largest pairwise `L1(μ)` distance between Bayes labelings.
    pub beta: f64,
    /// Largest pairwise KL over ordered pairs (may be `+∞` for clean families).
    pub alpha: f64,
}

/// Knobs for building a Massart family.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyConfig {
    pub k: usize,
    pub e: usize,
    pub m: f64,
    pub target_beta: f64,
    /// Fraction of atoms placed in the noise-free `η = 0` partition.
    pub x2_fraction: f64,
    /// Input weights; uniform when `None`.
    pub mu: Option<Vec<f64>>,
}

impl FamilyConfig {
    pub fn new(k: usize, e: usize, m: f64, target_beta: f64) -> Self {
        Self { k, e, m, target_beta, x2_fraction: 0.0, mu: None }
    }
}

/// Index of the prefix mass in `cum` nearest to `target`, ties going to the
/// longer prefix.
fn nearest_prefix(cum: &[f64], target: f64, max_len: usize) -> usize {
    let mut best = 0;
    let mut best_gap = f64::INFINITY;
    for (len, &c) in cum.iter().enumerate().take(max_len + 1) {
        let gap = (c - target).abs();
        if gap <= best_gap + 1e-12 {
            best = len;
            best_gap = gap.min(best_gap);
        }
    }
    best
}

fn pairwise_max(items: &[DiscreteClassifier]) -> Result<f64> {
    let mut beta: f64 = 0.0;
    for a in items {
        for b in items {
            beta = beta.max(a.distance(b)?);
        }
    }
    Ok(beta)
}

/// `E` Massart domains over uniform `μ` on `K` atoms whose largest pairwise
/// Bayes distance is within `1/K` of `target_beta`.
pub fn make_domains(k: usize, e: usize, m: f64, target_beta: f64, seed: u64) -> Result<Family> {
    make_domains_with(&FamilyConfig::new(k, e, m, target_beta), seed)
}

pub fn make_domains_with(cfg: &FamilyConfig, seed: u64) -> Result<Family> {
    let FamilyConfig { k, e, m, target_beta, x2_fraction, .. } = *cfg;
    if k < 2 {
        return Err(Error::InvalidArgument(format!("need K >= 2 atoms, got {k}")));
    }
    if e < 3 {
        return Err(Error::InvalidArgument(format!("need E >= 3 domains, got {e}")));
    }
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidArgument(format!("margin m must lie in (0, 1), got {m}")));
    }
    if !(0.0..1.0).contains(&x2_fraction) {
        return Err(Error::InvalidArgument(format!("x2_fraction must lie in [0, 1), got {x2_fraction}")));
    }
    let mu = match &cfg.mu {
        Some(mu) => mu.clone(),
        None => vec![1.0 / k as f64; k],
    };
    DiscreteClassifier::new(vec![false; k], mu.clone())?;

    let mut r = rng(derive_seed(seed, &[FAMILY_STREAM]));
    let mut atoms: Vec<usize> = (0..k).collect();
    atoms.shuffle(&mut r);
    let n_quiet = ((x2_fraction * k as f64).floor() as usize).min(k - 1);
    let mut noisy = vec![true; k];
    for &x in &atoms[..n_quiet] {
        noisy[x] = false;
    }
    let path: Vec<usize> = atoms[n_quiet..].to_vec();
    let mut base = vec![false; k];
    for &x in &path {
        base[x] = r.random_bool(0.5);
    }

    let mut cum = vec![0.0];
    for &x in &path {
        cum.push(cum.last().unwrap() + mu[x]);
    }
    let reachable = *cum.last().unwrap();
    let step = 1.0 / k as f64;
    if !(target_beta >= 0.0) || target_beta > reachable + step / 2.0 {
        return Err(Error::InvalidArgument(format!(
            "target beta {target_beta} is not achievable (at most {reachable})"
        )));
    }
    let k_star = nearest_prefix(&cum, target_beta, path.len());
    let total = cum[k_star];

    let mut domains = Vec::with_capacity(e);
    for i in 0..e {
        let goal = total * i as f64 / (e - 1) as f64;
        let len = nearest_prefix(&cum, goal, k_star);
        let mut labels = base.clone();
        for &x in &path[..len] {
            labels[x] = !labels[x];
        }
        let bayes = DiscreteClassifier::new(labels, mu.clone())?;
        domains.push(MassartSpec::new(bayes, m, noisy.clone())?);
    }
    let bayes: Vec<DiscreteClassifier> = domains.iter().map(|d| d.bayes.clone()).collect();
    let beta = pairwise_max(&bayes)?;
    Ok(Family { mode: Mode::Massart, domains, beta, alpha: kl_massart(m, beta)? })
}

/// Sup over ordered pairs of the exact KL between joint `(atom, label)` laws.
pub fn joint_alpha(domains: &[MassartSpec]) -> Result<f64> {
    let joints: Vec<Vec<f64>> = domains.iter().map(MassartSpec::joint).collect();
    let mut alpha: f64 = 0.0;
    for (i, p) in joints.iter().enumerate() {
        for (j, q) in joints.iter().enumerate() {
            if i != j {
                alpha = alpha.max(kl_discrete(p, q)?);
            }
        }
    }
    Ok(alpha)
}

/// `E` noise-free domains sharing one labeling, with input weights
/// `μ_e(x) ∝ exp(tilt · cos(2π(x/K − e/E)))`.
pub fn make_clean_domains(k: usize, e: usize, tilt: f64, seed: u64) -> Result<Family> {
    if k < 2 || e < 3 {
        return Err(Error::InvalidArgument(format!("need K >= 2 and E >= 3, got K={k}, E={e}")));
    }
    if !tilt.is_finite() {
        return Err(Error::InvalidArgument("tilt must be finite".into()));
    }
    let mut r = rng(derive_seed(seed, &[FAMILY_STREAM]));
    let labels: Vec<bool> = (0..k).map(|_| r.random_bool(0.5)).collect();
    let mut domains = Vec::with_capacity(e);
    for i in 0..e {
        let raw: Vec<f64> = (0..k)
            .map(|x| {
                let phase = x as f64 / k as f64 - i as f64 / e as f64;
                (tilt * (std::f64::consts::TAU * phase).cos()).exp()
            })
            .collect();
        let z: f64 = raw.iter().sum();
        let mu: Vec<f64> = raw.iter().map(|w| w / z).collect();
        let bayes = DiscreteClassifier::new(labels.clone(), mu)?;
        domains.push(MassartSpec::new(bayes, 1.0, vec![true; k])?);
    }
    let alpha = joint_alpha(&domains)?;
    Ok(Family { mode: Mode::Clean, domains, beta: 0.0, alpha })
}

/// Draws `n` labeled atoms from one domain.
pub fn sample_labels(spec: &MassartSpec, n: usize, seed: u64) -> Result<MassartDomain> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let index = WeightedIndex::new(&spec.bayes.mu)
        .map_err(|e| Error::InvalidArgument(format!("bad input weights: {e}")))?;
    let mut r = rng(seed);
    let samples = (0..n)
        .map(|_| {
            let x = index.sample(&mut r);
            let u: f64 = r.random();
            (x, u < spec.eta(x))
        })
        .collect();
    Ok(MassartDomain { spec: spec.clone(), samples })
}

/// Per-atom majority vote over the pooled sample. Ties and unseen atoms get
/// label 0. The input measure is the average of the domains' measures.
pub fn erm_pooled(domains: &[MassartDomain]) -> Result<DiscreteClassifier> {
    let first = domains.first().ok_or(Error::Empty("no domains"))?;
    let k = first.spec.bayes.k();
    let mut ones = vec![0i64; k];
    let mut zeros = vec![0i64; k];
    let mut mu = vec![0.0; k];
    let mut total = 0usize;
    for dom in domains {
        if dom.spec.bayes.k() != k {
            return Err(Error::DimensionMismatch { expected: k, got: dom.spec.bayes.k() });
        }
        for (acc, w) in mu.iter_mut().zip(&dom.spec.bayes.mu) {
            *acc += w / domains.len() as f64;
        }
        for &(x, y) in &dom.samples {
            if y {
                ones[x] += 1;
            } else {
                zeros[x] += 1;
            }
        }
        total += dom.samples.len();
    }
    if total == 0 {
        return Err(Error::Empty("pooled sample"));
    }
    let labels = ones.iter().zip(&zeros).map(|(o, z)| o > z).collect();
    DiscreteClassifier::new(labels, mu)
}

/// Fraction of `bayes_set` at `L1(μ)` distance at least `eps` from `hat`,
/// with `μ` taken from `hat`.
pub fn empirical_lhs(hat: &DiscreteClassifier, bayes_set: &[DiscreteClassifier], eps: f64) -> Result<f64> {
    if bayes_set.is_empty() {
        return Err(Error::Empty("bayes set"));
    }
    let mut far = 0usize;
    for h in bayes_set {
        if hat.distance(h)? >= eps {
            far += 1;
        }
    }
    Ok(far as f64 / bayes_set.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub k: usize,
    pub e: usize,
    /// Margin (Massart mode only).
    pub m: f64,
    /// Target largest Bayes distance (Massart mode only).
    pub beta: f64,
    /// Input-weight tilt (clean mode only).
    pub tilt: f64,
    pub x2_fraction: f64,
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k: 8,
            e: 9,
            m: 0.5,
            beta: 0.5,
            tilt: 0.0,
            x2_fraction: 0.0,
            n: 10_000,
            eps: 0.1,
            delta: 0.05,
            trials: 200,
            seed: 0,
            mode: Mode::Massart,
        }
    }
}

impl ExperimentConfig {
    pub fn family(&self) -> Result<Family> {
        match self.mode {
            Mode::Massart => make_domains_with(
                &FamilyConfig {
                    k: self.k,
                    e: self.e,
                    m: self.m,
                    target_beta: self.beta,
                    x2_fraction: self.x2_fraction,
                    mu: None,
                },
                self.seed,
            ),
            Mode::Clean => make_clean_domains(self.k, self.e, self.tilt, self.seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub mode: Mode,
    pub alpha: f64,
    pub beta: f64,
    pub report: BoundReport,
    pub trials: Vec<TrialRow>,
    pub mean_lhs: f64,
    pub violation_rate: f64,
}

impl ExperimentResult {
    pub const TRIALS_HEADER: &'static str = "trial,lhs,rhs,violated";
    pub const SUMMARY_HEADER: &'static str =
        "mode,alpha,beta,sigma,rhs,feasible,min_E,trials,mean_lhs,violation_rate";

    pub fn trials_csv(&self) -> String {
        let mut out = format!("{}\n", Self::TRIALS_HEADER);
        for t in &self.trials {
            out.push_str(&format!(
                "{},{},{},{}\n",
                t.trial,
                format_f64(t.lhs),
                format_f64(t.rhs),
                u8::from(t.violated)
            ));
        }
        out
    }

    pub fn summary_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.mode.name(),
            format_f64(self.alpha),
            format_f64(self.beta),
            format_f64(self.report.sigma),
            format_f64(self.report.rhs),
            self.report.feasible,
            self.report.min_e,
            self.trials.len(),
            format_f64(self.mean_lhs),
            format_f64(self.violation_rate)
        )
    }
}

fn run_trial(family: &Family, cfg: &ExperimentConfig, trial: usize) -> Result<f64> {
    let domains = family
        .domains
        .iter()
        .enumerate()
        .map(|(i, spec)| sample_labels(spec, cfg.n, derive_seed(cfg.seed, &[trial as u64, i as u64])))
        .collect::<Result<Vec<_>>>()?;
    let hat = erm_pooled(&domains)?;
    let bayes: Vec<DiscreteClassifier> = family.domains.iter().map(|d| d.bayes.clone()).collect();
    empirical_lhs(&hat, &bayes, cfg.eps)
}

/// Runs `trials` independent trials and compares each LHS with the bound.
/// Infeasible configurations still run; the report carries the flag.
pub fn run_bound_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let family = cfg.family()?;
    let report = match cfg.mode {
        Mode::Massart => rhs_t2(family.beta, cfg.m, cfg.e, cfg.delta)?,
        Mode::Clean => rhs_t1(family.alpha, cfg.e, cfg.delta)?,
    };
    let lhs = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(&family, cfg, t))
        .collect::<Result<Vec<f64>>>()?;
    let trials: Vec<TrialRow> = lhs
        .iter()
        .enumerate()
        .map(|(trial, &lhs)| TrialRow { trial, lhs, rhs: report.rhs, violated: lhs > report.rhs })
        .collect();
    let t = trials.len() as f64;
    let mean_lhs = lhs.iter().sum::<f64>() / t;
    let violation_rate = trials.iter().filter(|r| r.violated).count() as f64 / t;
    Ok(ExperimentResult {
        mode: cfg.mode,
        alpha: family.alpha,
        beta: family.beta,
        report,
        trials,
        mean_lhs,
        violation_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub target_beta: f64,
    pub beta: f64,
    pub alpha: f64,
    pub feasible: bool,
    pub rhs: f64,
    pub mean_lhs: f64,
    pub violation_rate: f64,
}

impl SweepPoint {
    pub const HEADER: &'static str = "target_beta,beta,alpha,feasible,rhs,mean_lhs,violation_rate";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            format_f64(self.target_beta),
            format_f64(self.beta),
            format_f64(self.alpha),
            self.feasible,
            format_f64(self.rhs),
            format_f64(self.mean_lhs),
            format_f64(self.violation_rate)
        )
    }
}

/// Massart experiments over a grid of target `β`, reusing the same seeds
/// (and therefore the same base labeling and trial samples) at every point.
pub fn beta_sweep(cfg: &ExperimentConfig, grid: &[f64]) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::Empty("beta grid"));
    }
    grid.iter()
        .map(|&b| {
            let point = ExperimentConfig { beta: b, mode: Mode::Massart, ..cfg.clone() };
            let res = run_bound_experiment(&point)?;
            Ok(SweepPoint {
                target_beta: b,
                beta: res.beta,
                alpha: res.alpha,
                feasible: res.report.feasible,
                rhs: res.report.rhs,
                mean_lhs: res.mean_lhs,
                violation_rate: res.violation_rate,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::max_beta;

    #[test]
    fn identical_family_has_no_shift() {
        let f = make_domains(8, 5, 0.5, 0.0, 3).unwrap();
        assert_eq!(f.beta, 0.0);
        assert_eq!(f.alpha, 0.0);
        assert!(f.domains.windows(2).all(|w| w[0].bayes == w[1].bayes));
    }

    #[test]
    fn two_atom_difference_is_quarter() {
        let t = DiscreteClassifier::uniform(vec![true, false, true, true, false, false, true, false]).unwrap();
        let mut labels = t.labels.clone();
        labels[3] = !labels[3];
        labels[6] = !labels[6];
        let s = DiscreteClassifier::uniform(labels).unwrap();
        assert_eq!(t.distance(&s).unwrap(), 0.25);
    }

    #[test]
    fn reference_family() {
        let f = make_domains(8, 9, 0.5, 0.5, 11).unwrap();
        assert_eq!(f.beta, 0.5);
        assert!((f.alpha - 0.25 * 3f64.ln()).abs() < 1e-12);
        assert!(f.beta <= max_beta(0.5, 9).unwrap());
        assert!((max_beta(0.5, 9).unwrap() - 2.0794).abs() < 1e-4);
    }

    #[test]
    fn realized_beta_tracks_target() {
        for k in [4usize, 8, 13] {
            for i in 0..=20 {
                let target = i as f64 / 20.0;
                let f = make_domains(k, 9, 0.3, target, 5).unwrap();
                assert!((f.beta - target).abs() <= 1.0 / k as f64 + 1e-12, "K={k} target={target} beta={}", f.beta);
            }
        }
        assert!(make_domains(8, 9, 0.5, 1.2, 1).is_err());
    }

    #[test]
    fn margin_is_exact() {
        let cfg = FamilyConfig { x2_fraction: 0.25, ..FamilyConfig::new(8, 5, 0.6, 0.5) };
        let f = make_domains_with(&cfg, 2).unwrap();
        for d in &f.domains {
            assert!((d.margin() - 0.6).abs() < 1e-15);
            assert_eq!(d.noisy.iter().filter(|n| !**n).count(), 2);
        }
        // The quiet partition caps the reachable distance.
        let cfg = FamilyConfig { x2_fraction: 0.5, ..FamilyConfig::new(8, 5, 0.6, 0.9) };
        assert!(make_domains_with(&cfg, 2).is_err());
    }

    #[test]
    fn joint_kl_matches_closed_form() {
        for (m, beta, frac) in [(0.5, 0.5, 0.0), (0.2, 1.0, 0.0), (0.9, 0.375, 0.25), (0.7, 0.25, 0.5)] {
            let cfg = FamilyConfig { x2_fraction: frac, ..FamilyConfig::new(8, 5, m, beta) };
            let f = make_domains_with(&cfg, 7).unwrap();
            for a in &f.domains {
                for b in &f.domains {
                    let exact = kl_discrete(&a.joint(), &b.joint()).unwrap();
                    let l1 = a.bayes.distance(&b.bayes).unwrap();
                    assert!((exact - kl_massart(m, l1).unwrap()).abs() < 1e-12);
                }
            }
            assert!((joint_alpha(&f.domains).unwrap() - f.alpha).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_free_labels_match_bayes() {
        let bayes = DiscreteClassifier::uniform(vec![true, false, true, false]).unwrap();
        let spec = MassartSpec::new(bayes.clone(), 1.0, vec![true; 4]).unwrap();
        let dom = sample_labels(&spec, 1000, 4).unwrap();
        assert!(dom.samples.iter().all(|&(x, y)| y == bayes.labels[x]));
        let one = sample_labels(&spec, 1, 4).unwrap();
        assert_eq!(one.samples.len(), 1);
        assert!(one.samples[0].0 < 4);
        assert!(sample_labels(&spec, 0, 4).is_err());
    }

    #[test]
    fn label_frequencies_follow_eta() {
        let f = make_domains(8, 3, 0.5, 0.5, 1).unwrap();
        let spec = &f.domains[1];
        let mut worst = 0.0f64;
        for seed in 0..20 {
            let dom = sample_labels(spec, 100_000, seed).unwrap();
            let mut hits = [0usize; 8];
            let mut ones = [0usize; 8];
            for &(x, y) in &dom.samples {
                hits[x] += 1;
                ones[x] += usize::from(y);
            }
            for x in 0..8 {
                let eta = spec.eta(x);
                let freq = ones[x] as f64 / hits[x] as f64;
                let sd = (eta * (1.0 - eta) / hits[x] as f64).sqrt();
                if sd > 0.0 {
                    worst = worst.max((freq - eta).abs() / sd);
                } else {
                    assert_eq!(freq, eta);
                }
            }
        }
        // 160 binomial cells: a 4.5 sd excursion has probability ~1e-3.
        assert!(worst < 4.5, "worst z-score {worst}");
    }

    #[test]
    fn erm_recovers_noise_free_labels() {
        let bayes = DiscreteClassifier::uniform(vec![true, false, true, true]).unwrap();
        let spec = MassartSpec::new(bayes.clone(), 1.0, vec![true; 4]).unwrap();
        let dom = sample_labels(&spec, 500, 1).unwrap();
        assert_eq!(erm_pooled(&[dom]).unwrap().labels, bayes.labels);
    }

    #[test]
    fn erm_unseen_atoms_get_zero() {
        let bayes = DiscreteClassifier::uniform(vec![true; 3]).unwrap();
        let spec = MassartSpec::new(bayes, 1.0, vec![true; 3]).unwrap();
        let dom = MassartDomain { spec, samples: vec![(0, true), (1, true), (1, false)] };
        assert_eq!(erm_pooled(&[dom]).unwrap().labels, vec![true, false, false]);
        assert!(erm_pooled(&[]).is_err());
    }

    #[test]
    fn erm_shared_classifier_under_noise() {
        // Each atom gets ~2.5e3 pooled draws with P(correct) = 0.9; the
        // chance of a wrong majority is below 1e-300 per atom.
        let f = make_domains(8, 3, 0.8, 0.0, 6).unwrap();
        for trial in 0..20u64 {
            let doms: Vec<MassartDomain> = f.domains[..2]
                .iter()
                .enumerate()
                .map(|(i, s)| sample_labels(s, 10_000, derive_seed(trial, &[i as u64])).unwrap())
                .collect();
            assert_eq!(erm_pooled(&doms).unwrap().labels, f.domains[0].bayes.labels);
        }
    }

    /// 0-1 loss of `labels` on a pooled sample.
    fn zero_one_loss(labels: &[bool], samples: &[(usize, bool)]) -> usize {
        samples.iter().filter(|&&(x, y)| labels[x] != y).count()
    }

    #[test]
    fn erm_equals_exhaustive_search() {
        for (k, seed) in [(3usize, 1u64), (6, 2), (9, 3), (12, 4)] {
            let f = make_domains(k, 3, 0.2, 0.5, seed).unwrap();
            let doms: Vec<MassartDomain> = f
                .domains
                .iter()
                .enumerate()
                .map(|(i, s)| sample_labels(s, 3 * k, seed * 10 + i as u64).unwrap())
                .collect();
            let pooled: Vec<(usize, bool)> = doms.iter().flat_map(|d| d.samples.iter().copied()).collect();
            let hat = erm_pooled(&doms).unwrap();
            let mut best = usize::MAX;
            let mut best_labels = Vec::new();
            for mask in 0u32..(1 << k) {
                let labels: Vec<bool> = (0..k).map(|x| mask >> x & 1 == 1).collect();
                let loss = zero_one_loss(&labels, &pooled);
                // Among minimisers keep the one with the fewest ones.
                let ones = mask.count_ones();
                if loss < best
                    || (loss == best && ones < best_labels.iter().filter(|b| **b).count() as u32)
                {
                    best = loss;
                    best_labels = labels;
                }
            }
            assert_eq!(zero_one_loss(&hat.labels, &pooled), best);
            assert_eq!(hat.labels, best_labels, "K={k}");
        }
    }

    #[test]
    fn lhs_examples() {
        let t = DiscreteClassifier::uniform(vec![true, false, true, false, true, false, true, false]).unwrap();
        let set = vec![t.clone(); 4];
        assert_eq!(empirical_lhs(&t, &set, 0.1).unwrap(), 0.0);
        assert_eq!(empirical_lhs(&t, &set, 0.0).unwrap(), 1.0);
        let mut far = t.labels.clone();
        far[0] = !far[0];
        far[1] = !far[1];
        let hat = DiscreteClassifier::uniform(far).unwrap();
        assert_eq!(empirical_lhs(&hat, &set, 0.2).unwrap(), 1.0);
    }

    #[test]
    fn clean_family_properties() {
        let flat = make_clean_domains(8, 5, 0.0, 1).unwrap();
        assert_eq!(flat.alpha, 0.0);
        let tilted = make_clean_domains(8, 5, 0.8, 1).unwrap();
        assert!(tilted.alpha > 0.0 && tilted.alpha.is_finite());
        assert!(tilted.domains.windows(2).all(|w| w[0].bayes.labels == w[1].bayes.labels));
        // Different deterministic labels on a shared atom: infinite KL.
        let mut doms = tilted.domains.clone();
        doms[1].bayes.labels[0] = !doms[1].bayes.labels[0];
        assert_eq!(joint_alpha(&doms).unwrap(), f64::INFINITY);
    }

    #[test]
    fn clean_mode_identical_domains_never_violate() {
        let cfg = ExperimentConfig { mode: Mode::Clean, tilt: 0.0, n: 2000, trials: 20, ..Default::default() };
        let res = run_bound_experiment(&cfg).unwrap();
        assert!(res.trials.iter().all(|t| t.lhs == 0.0 && !t.violated));
    }

    #[test]
    fn clean_mode_rejects_infinite_alpha() {
        let fam = make_clean_domains(8, 5, 0.5, 1).unwrap();
        let mut doms = fam.domains;
        doms[0].bayes.labels[2] = !doms[0].bayes.labels[2];
        let alpha = joint_alpha(&doms).unwrap();
        assert!(matches!(rhs_t1(alpha, 5, 0.05), Err(Error::InfiniteShift(_))));
    }

    #[test]
    fn parallel_matches_serial() {
        let cfg = ExperimentConfig { n: 500, trials: 16, seed: 3, ..Default::default() };
        let res = run_bound_experiment(&cfg).unwrap();
        let family = cfg.family().unwrap();
        for row in &res.trials {
            assert_eq!(row.lhs, run_trial(&family, &cfg, row.trial).unwrap());
        }
        assert_eq!(res, run_bound_experiment(&cfg).unwrap());
    }

    #[test]
    fn infeasible_configuration_still_runs() {
        let cfg = ExperimentConfig { e: 3, m: 0.95, beta: 1.0, n: 200, trials: 4, ..Default::default() };
        let res = run_bound_experiment(&cfg).unwrap();
        assert!(!res.report.feasible);
        assert_eq!(res.trials.len(), 4);
    }
}
