//! Bound arithmetic for multi-domain families.
//!
//! For `E` domains whose pairwise KL is at most `α`, any estimator satisfies,
//! with probability at least `1 − δ`,
//!
//! ```text
//! (1/E) Σ_e 1{d(ĥ, h_e) ≥ ε} ≤ (1 − σ) + sqrt(ln(1/δ) / (2E)),
//! σ = (α + ln 2) / ln(E − 1),
//! ```
//!
//! provided `α ≤ ln((E − 1)/2)`. Massart families with margin `m` and Bayes
//! classifiers at most `β` apart substitute `α = 2βm²/(1 − m²)`. Every
//! logarithm is natural.

use std::f64::consts::LN_2;

use crate::{format_f64, Error, Result};

fn check_domains(e: usize) -> Result<()> {
    if e < 3 {
        return Err(Error::InvalidArgument(format!("need E >= 3 domains, got {e}")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_infinite() {
        return Err(Error::InfiniteShift("alpha is infinite; the family is not KL-bounded".into()));
    }
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("alpha must be >= 0, got {alpha}")));
    }
    Ok(())
}

fn check_margin(m: f64) -> Result<()> {
    if !(m > 0.0 && m < 1.0) {
        return Err(Error::InvalidArgument(format!("margin m must lie in (0, 1), got {m}")));
    }
    Ok(())
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Hoeffding slack `sqrt(ln(1/δ) / (2E))`.
pub fn hoeffding_term(e: usize, delta: f64) -> f64 {
    ((1.0 / delta).ln() / (2.0 * e as f64)).sqrt()
}

/// Evaluated bound and its feasibility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub sigma: f64,
    pub rhs: f64,
    /// Whether the shift premise (`σ ≤ 1` condition) holds.
    pub feasible: bool,
    /// Distance to the feasibility boundary, positive when feasible.
    /// In units of `α` for clean families and of `β` for Massart families.
    pub condition_slack: f64,
    /// Smallest domain count for which the given shift is feasible.
    pub min_e: u64,
}

impl BoundReport {
    pub const HEADER: &'static str = "sigma,rhs,feasible,condition_slack,min_E";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            format_f64(self.sigma),
            format_f64(self.rhs),
            self.feasible,
            format_f64(self.condition_slack),
            self.min_e
        )
    }
}

/// `(α + ln 2) / ln(E − 1)`.
pub fn sigma_t1(alpha: f64, e: usize) -> Result<f64> {
    check_domains(e)?;
    check_alpha(alpha)?;
    Ok((alpha + LN_2) / ((e - 1) as f64).ln())
}

/// Largest `α` satisfying the clean-family premise: `ln((E − 1)/2)`.
pub fn max_alpha(e: usize) -> Result<f64> {
    check_domains(e)?;
    Ok(((e - 1) as f64 / 2.0).ln())
}

pub fn rhs_t1(alpha: f64, e: usize, delta: f64) -> Result<BoundReport> {
    check_delta(delta)?;
    let sigma = sigma_t1(alpha, e)?;
    let limit = max_alpha(e)?;
    Ok(BoundReport {
        sigma,
        rhs: (1.0 - sigma) + hoeffding_term(e, delta),
        feasible: alpha <= limit,
        condition_slack: limit - alpha,
        min_e: min_domains(alpha),
    })
}

/// `α`-equivalent of a Massart family: `2βm²/(1 − m²)`.
pub fn massart_alpha(beta: f64, m: f64) -> Result<f64> {
    check_margin(m)?;
    if !(beta >= 0.0) || beta.is_infinite() {
        return Err(Error::InvalidArgument(format!("beta must be finite and >= 0, got {beta}")));
    }
    Ok(2.0 * beta * m * m / (1.0 - m * m))
}

/// `(2βm² + (1 − m²) ln 2) / ((1 − m²) ln(E − 1))`.
pub fn sigma_t2(beta: f64, m: f64, e: usize) -> Result<f64> {
    check_domains(e)?;
    massart_alpha(beta, m)?;
    let s = 1.0 - m * m;
    Ok((2.0 * beta * m * m + s * LN_2) / (s * ((e - 1) as f64).ln()))
}

/// Largest `β` satisfying the Massart premise: `((1 − m²)/(2m²)) ln((E − 1)/2)`.
pub fn max_beta(m: f64, e: usize) -> Result<f64> {
    check_margin(m)?;
    Ok((1.0 - m * m) / (2.0 * m * m) * max_alpha(e)?)
}

pub fn rhs_t2(beta: f64, m: f64, e: usize, delta: f64) -> Result<BoundReport> {
    check_delta(delta)?;
    let sigma = sigma_t2(beta, m, e)?;
    let limit = max_beta(m, e)?;
    Ok(BoundReport {
        sigma,
        rhs: (1.0 - sigma) + hoeffding_term(e, delta),
        feasible: beta <= limit,
        condition_slack: limit - beta,
        min_e: min_domains(massart_alpha(beta, m)?),
    })
}

/// Smallest integer `E` with `α ≤ ln((E − 1)/2)`, i.e. `⌈2e^α + 1⌉`.
/// Saturates at `u64::MAX` for huge `α`.
pub fn min_domains(alpha: f64) -> u64 {
    let alpha = alpha.max(0.0);
    let approx = (2.0 * alpha.exp() + 1.0).ceil();
    if !(approx < 9.0e15) {
        return u64::MAX;
    }
    let ok = |e: u64| alpha <= ((e - 1) as f64 / 2.0).ln();
    let mut e = (approx as u64).max(3);
    while e > 3 && ok(e - 1) {
        e -= 1;
    }
    while !ok(e) {
        e += 1;
    }
    e
}

/// `L1` gap implied by a KL value under margin `m`:
/// `kl / (m ln((1 + m)/(1 − m)))`.
pub fn corollary_k(m: f64, kl: f64) -> Result<f64> {
    check_margin(m)?;
    if !(kl >= 0.0) {
        return Err(Error::InvalidArgument(format!("kl must be >= 0, got {kl}")));
    }
    Ok(kl / (m * ((1.0 + m) / (1.0 - m)).ln()))
}

/// Fano precondition `K + ln 2 ≤ (1 − γ) ln(r − 1)`.
pub fn fano_check(k: f64, r: usize, gamma: f64) -> Result<bool> {
    if r < 3 {
        return Err(Error::InvalidArgument(format!("need r >= 3 hypotheses, got {r}")));
    }
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    Ok(k + LN_2 <= (1.0 - gamma) * ((r - 1) as f64).ln())
}

/// Shift premise of a bound evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftBound {
    /// Sup pairwise KL of a clean (realizable) family.
    Clean { alpha: f64 },
    /// Sup pairwise `L1` distance between Bayes classifiers, and the margin.
    Massart { beta: f64, m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub e: usize,
    pub shift: ShiftBound,
    pub delta: f64,
    /// Tolerance of the indicator; the right-hand side does not depend on it.
    pub eps: f64,
}

impl BoundInputs {
    pub fn evaluate(&self) -> Result<BoundReport> {
        if !(self.eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("eps must be >= 0, got {}", self.eps)));
        }
        match self.shift {
            ShiftBound::Clean { alpha } => rhs_t1(alpha, self.e, self.delta),
            ShiftBound::Massart { beta, m } => rhs_t2(beta, m, self.e, self.delta),
        }
    }
}
