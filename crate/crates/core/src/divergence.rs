//! Exact KL divergences (natural log, nats) and pairwise shift matrices.

use crate::{format_f64, Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

/// `KL(N(mu1, var1) ‖ N(mu2, var2))`.
pub fn kl_gaussian(mu1: f64, var1: f64, mu2: f64, var2: f64) -> Result<f64> {
    if !(var1 > 0.0 && var2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "variances must be positive, got {var1} and {var2}"
        )));
    }
    let d = mu1 - mu2;
    Ok(0.5 * (var2 / var1).ln() + (var1 + d * d) / (2.0 * var2) - 0.5)
}

/// KL between product Gaussians with diagonal covariances.
pub fn kl_gaussian_diag(mu1: &[f64], var1: &[f64], mu2: &[f64], var2: &[f64]) -> Result<f64> {
    let n = mu1.len();
    for len in [var1.len(), mu2.len(), var2.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    (0..n).try_fold(0.0, |acc, j| Ok(acc + kl_gaussian(mu1[j], var1[j], mu2[j], var2[j])?))
}

fn check_prob(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidArgument(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidArgument(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

/// `Σ p_i ln(p_i/q_i)`; `+∞` when `p` is not absolutely continuous w.r.t. `q`.
pub fn kl_discrete(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    check_prob(p, "p")?;
    check_prob(q, "q")?;
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        total += pi * (pi / qi).ln();
    }
    Ok(total.max(0.0))
}

/// KL between two Massart-noise distributions with margin `m` whose Bayes
/// classifiers are `l1` apart in `L1(μ)`: `m · ln((1+m)/(1−m)) · l1`.
pub fn kl_massart(m: f64, l1: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&m) {
        return Err(Error::InvalidArgument(format!("margin m must lie in [0, 1), got {m}")));
    }
    if !(l1 >= 0.0) {
        return Err(Error::InvalidArgument(format!("l1 must be >= 0, got {l1}")));
    }
    if m == 0.0 {
        return Ok(0.0);
    }
    Ok(m * ((1.0 + m) / (1.0 - m)).ln() * l1)
}

/// Parametric description of one domain's distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum ShiftDescriptor {
    GaussianDiag { mean: Vec<f64>, var: Vec<f64> },
    Discrete { p: Vec<f64> },
    /// Bayes labels on a finite input set with weights `mu` and margin `m`.
    Massart { m: f64, labels: Vec<bool>, mu: Vec<f64> },
}

impl ShiftDescriptor {
    fn kind(&self) -> &'static str {
        match self {
            ShiftDescriptor::GaussianDiag { .. } => "gaussian-diag",
            ShiftDescriptor::Discrete { .. } => "discrete",
            ShiftDescriptor::Massart { .. } => "massart",
        }
    }
}

/// `L1(μ)` distance between two label vectors.
fn label_l1(a: &[bool], b: &[bool], mu: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(mu)
        .filter(|((x, y), _)| x != y)
        .map(|(_, w)| w)
        .sum()
}

fn pair_kl(p: &ShiftDescriptor, q: &ShiftDescriptor) -> Result<(f64, Option<f64>)> {
    use ShiftDescriptor::*;
    match (p, q) {
        (GaussianDiag { mean: m1, var: v1 }, GaussianDiag { mean: m2, var: v2 }) => {
            Ok((kl_gaussian_diag(m1, v1, m2, v2)?, None))
        }
        (Discrete { p: a }, Discrete { p: b }) => Ok((kl_discrete(a, b)?, None)),
        (
            Massart { m: m1, labels: t, mu: mu1 },
            Massart { m: m2, labels: s, mu: mu2 },
        ) => {
            if m1 != m2 || mu1 != mu2 {
                return Err(Error::InvalidArgument(
                    "massart descriptors must share the margin and the input measure".into(),
                ));
            }
            if t.len() != s.len() || t.len() != mu1.len() {
                return Err(Error::DimensionMismatch { expected: mu1.len(), got: t.len().max(s.len()) });
            }
            let l1 = label_l1(t, s, mu1);
            Ok((kl_massart(*m1, l1)?, Some(l1)))
        }
        _ => Err(Error::InvalidArgument(format!(
            "mixed descriptor kinds: {} and {}",
            p.kind(),
            q.kind()
        ))),
    }
}

/// Pairwise KL over ordered domain pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftReport {
    pub env_ids: Vec<u32>,
    /// `kl[i][j] = KL(P_i ‖ P_j)`.
    pub kl: Vec<Vec<f64>>,
    /// Largest off-diagonal entry; may be `+∞`.
    pub alpha: f64,
    /// Largest pairwise `L1(μ)` distance between Bayes classifiers (Massart only).
    pub beta: Option<f64>,
}

impl ShiftReport {
    /// Matrix with an `env` header row and column, then `alpha,<v>` (and
    /// `beta,<v>` for Massart families).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("env");
        for id in &self.env_ids {
            out.push_str(&format!(",{id}"));
        }
        out.push('\n');
        for (id, row) in self.env_ids.iter().zip(&self.kl) {
            out.push_str(&id.to_string());
            for v in row {
                out.push(',');
                out.push_str(&format_f64(*v));
            }
            out.push('\n');
        }
        out.push_str(&format!("alpha,{}\n", format_f64(self.alpha)));
        if let Some(b) = self.beta {
            out.push_str(&format!("beta,{}\n", format_f64(b)));
        }
        out
    }
}

pub fn shift_matrix(env_ids: &[u32], domains: &[ShiftDescriptor]) -> Result<ShiftReport> {
    if domains.len() < 2 {
        return Err(Error::InvalidArgument("need at least two domains".into()));
    }
    if env_ids.len() != domains.len() {
        return Err(Error::DimensionMismatch { expected: domains.len(), got: env_ids.len() });
    }
    let e = domains.len();
    let mut kl = vec![vec![0.0; e]; e];
    let mut alpha: f64 = 0.0;
    let mut beta: Option<f64> = None;
    for i in 0..e {
        for j in 0..e {
            if i == j {
                continue;
            }
            let (v, l1) = pair_kl(&domains[i], &domains[j])?;
            kl[i][j] = v;
            alpha = alpha.max(v);
            if let Some(l1) = l1 {
                beta = Some(beta.map_or(l1, |b: f64| b.max(l1)));
            }
        }
    }
    Ok(ShiftReport { env_ids: env_ids.to_vec(), kl, alpha, beta })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    /// Simpson's rule for ∫ p ln(p/q) over [lo, hi].
    fn kl_quadrature(mu1: f64, var1: f64, mu2: f64, var2: f64) -> f64 {
        let pdf = |x: f64, m: f64, v: f64| (-(x - m).powi(2) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt();
        let sd = var1.sqrt().max(var2.sqrt());
        let (lo, hi) = (mu1.min(mu2) - 20.0 * sd, mu1.max(mu2) + 20.0 * sd);
        let n = 20_000;
        let h = (hi - lo) / n as f64;
        let f = |x: f64| {
            let p = pdf(x, mu1, var1);
            if p == 0.0 {
                0.0
            } else {
                p * (p / pdf(x, mu2, var2)).ln()
            }
        };
        let mut s = f(lo) + f(hi);
        for k in 1..n {
            let x = lo + k as f64 * h;
            s += if k % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn gaussian_examples() {
        assert_eq!(kl_gaussian(0.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
        let v = kl_gaussian(1.0, 1.0, 0.0, 1.0).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert!((v - kl_quadrature(1.0, 1.0, 0.0, 1.0)).abs() < 1e-6);
        let v = kl_gaussian(0.0, 1.0, 0.0, 4.0).unwrap();
        assert!((v - (LN_2 - 0.375)).abs() < 1e-15);
        assert!((v - kl_quadrature(0.0, 1.0, 0.0, 4.0)).abs() < 1e-6);
        assert!(kl_gaussian(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn gaussian_diag_examples() {
        let z = [0.0, 0.0];
        let o = [1.0, 1.0];
        assert_eq!(kl_gaussian_diag(&z, &o, &z, &o).unwrap(), 0.0);
        let uni = kl_gaussian(0.3, 1.2, -0.4, 2.5).unwrap();
        let dup = kl_gaussian_diag(&[0.3, 0.3], &[1.2, 1.2], &[-0.4, -0.4], &[2.5, 2.5]).unwrap();
        assert!((dup - 2.0 * uni).abs() < 1e-15);
        let m1 = [0.1, -0.5, 1.2, 0.0, 2.0];
        let v1 = [1.0, 0.5, 2.0, 3.0, 0.7];
        let m2 = [0.0, 0.3, 1.0, -1.0, 1.5];
        let v2 = [1.5, 0.6, 1.0, 2.0, 1.1];
        let oracle: f64 = (0..5).map(|j| kl_quadrature(m1[j], v1[j], m2[j], v2[j])).sum();
        assert!((kl_gaussian_diag(&m1, &v1, &m2, &v2).unwrap() - oracle).abs() < 1e-5);
        assert!(kl_gaussian_diag(&m1, &v1, &m2[..4], &v2).is_err());
    }

    #[test]
    fn discrete_examples() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(kl_discrete(&p, &p).unwrap(), 0.0);
        assert!((kl_discrete(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - LN_2).abs() < 1e-15);
        assert_eq!(kl_discrete(&[0.5, 0.5], &[0.0, 1.0]).unwrap(), f64::INFINITY);
        assert!(kl_discrete(&[0.5, 0.6], &[0.5, 0.5]).is_err());
    }

    /// Σ over disagreement atoms of μ(x)·KL(Bern(η_t) ‖ Bern(η_s)).
    fn bernoulli_kl_sum(m: f64, l1: f64) -> f64 {
        let (hi, lo) = ((1.0 + m) / 2.0, (1.0 - m) / 2.0);
        let bern = hi * (hi / lo).ln() + lo * (lo / hi).ln();
        l1 * bern
    }

    #[test]
    fn massart_examples() {
        assert_eq!(kl_massart(0.0, 3.0).unwrap(), 0.0);
        let v = kl_massart(0.5, 1.0).unwrap();
        assert!((v - 0.5 * 3f64.ln()).abs() < 1e-15);
        assert!((v - bernoulli_kl_sum(0.5, 1.0)).abs() < 1e-12);
        let v = kl_massart(0.9, 0.5).unwrap();
        assert!((v - 0.45 * 19f64.ln()).abs() < 1e-12);
        assert!((v - bernoulli_kl_sum(0.9, 0.5)).abs() < 1e-12);
        assert!(kl_massart(1.0, 1.0).is_err());
    }

    #[test]
    fn atanh_sandwich() {
        // m ≤ atanh(m) ≤ m/(1−m²), hence kl_massart(m, β) ≤ 2βm²/(1−m²).
        for i in 0..1000 {
            let m = i as f64 / 1000.0;
            let at = m.atanh();
            assert!(m <= at + 1e-15);
            assert!(at <= m / (1.0 - m * m) + 1e-15);
            let beta = 0.37;
            assert!(kl_massart(m, beta).unwrap() <= 2.0 * beta * m * m / (1.0 - m * m) + 1e-12);
        }
    }

    #[test]
    fn shift_identical_domains() {
        let d = ShiftDescriptor::GaussianDiag { mean: vec![0.0], var: vec![2.0] };
        let r = shift_matrix(&[1, 2], &[d.clone(), d]).unwrap();
        assert_eq!(r.alpha, 0.0);
    }

    #[test]
    fn shift_d1_marginals() {
        let ds: Vec<ShiftDescriptor> = [1.0, 4.0, 9.0]
            .iter()
            .map(|&v| ShiftDescriptor::GaussianDiag { mean: vec![0.0], var: vec![v] })
            .collect();
        let r = shift_matrix(&[1, 2, 3], &ds).unwrap();
        assert!((r.alpha - (4.0 - 3f64.ln())).abs() < 1e-12);
        assert_ne!(r.kl[0][2], r.kl[2][0]);
        for i in 0..3 {
            assert_eq!(r.kl[i][i], 0.0);
        }
        let csv = r.to_csv();
        assert!(csv.starts_with("env,1,2,3\n1,0.0,"));
        assert!(csv.ends_with(&format!("alpha,{}\n", format_f64(r.alpha))));
    }

    #[test]
    fn shift_massart_pair() {
        let mu = vec![0.125; 8];
        let t = vec![true, false, true, true, false, false, true, false];
        let mut s = t.clone();
        s[0] = !s[0];
        s[1] = !s[1];
        let ds = [
            ShiftDescriptor::Massart { m: 0.5, labels: t, mu: mu.clone() },
            ShiftDescriptor::Massart { m: 0.5, labels: s, mu },
        ];
        let r = shift_matrix(&[1, 2], &ds).unwrap();
        assert!((r.alpha - 0.25 * 0.5 * 3f64.ln()).abs() < 1e-15);
        assert_eq!(r.beta, Some(0.25));
    }

    #[test]
    fn shift_rejects_bad_input() {
        let g = ShiftDescriptor::GaussianDiag { mean: vec![0.0], var: vec![1.0] };
        let p = ShiftDescriptor::Discrete { p: vec![1.0] };
        assert!(shift_matrix(&[1], std::slice::from_ref(&g)).is_err());
        assert!(shift_matrix(&[1, 2], &[g, p]).is_err());
    }

    #[test]
    fn shift_infinite_is_reported() {
        let a = ShiftDescriptor::Discrete { p: vec![1.0, 0.0] };
        let b = ShiftDescriptor::Discrete { p: vec![0.0, 1.0] };
        let r = shift_matrix(&[1, 2], &[a, b]).unwrap();
        assert_eq!(r.alpha, f64::INFINITY);
        assert!(r.to_csv().contains("alpha,inf"));
    }
}
