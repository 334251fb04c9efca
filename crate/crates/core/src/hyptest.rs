//! Ordinary least squares with classical t-tests.

use nalgebra::{DMatrix, DVector};

use crate::{format_f64, Error, Result};

/// Coefficients whose normal-equation condition number exceeds this are
/// treated as collinear.
pub const COLLINEARITY_CONDITION: f64 = 1e12;

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut s = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        s += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + s.ln()
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn betainc(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn check_dof(dof: f64) -> Result<()> {
    if dof >= 1.0 && dof.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("dof must be >= 1, got {dof}")))
    }
}

/// Student-t distribution function.
pub fn t_cdf(x: f64, dof: f64) -> Result<f64> {
    check_dof(dof)?;
    if x.is_nan() {
        return Ok(f64::NAN);
    }
    if x == 0.0 {
        return Ok(0.5);
    }
    // Mass beyond |x|; betainc picks the continued-fraction side itself.
    let tail = 0.5 * betainc(0.5 * dof, 0.5, dof / (dof + x * x));
    Ok(if x < 0.0 { tail } else { 1.0 - tail })
}

/// Inverse of [`t_cdf`] by bisection.
pub fn t_quantile(p: f64, dof: f64) -> Result<f64> {
    check_dof(dof)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("p must lie in (0, 1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while t_cdf(hi, dof)? < p.max(1.0 - p) {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    let (mut lo, mut hi) = if p > 0.5 { (0.0, hi) } else { (-hi, 0.0) };
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if t_cdf(mid, dof)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefRow {
    pub name: String,
    pub coef: f64,
    pub std_err: f64,
    pub t: f64,
    pub p: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TTestReport {
    pub rows: Vec<CoefRow>,
    pub n: usize,
    pub k: usize,
    pub dof: usize,
    pub residual_variance: f64,
    /// Zero residual variance; p-values are reported as 0.
    pub degenerate: bool,
}

impl TTestReport {
    pub const HEADER: &'static str = "name,coef,std_err,t,p,ci_low,ci_high";

    pub fn row(&self, name: &str) -> Option<&CoefRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::HEADER);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.name,
                format_f64(r.coef),
                format_f64(r.std_err),
                format_f64(r.t),
                format_f64(r.p),
                format_f64(r.ci_low),
                format_f64(r.ci_high)
            ));
        }
        out
    }
}

/// Fits `y = Xβ (+ β₀)` and tests each coefficient against zero.
///
/// `names` labels the columns of `x`; the intercept, when requested, comes
/// first and is named `const`.
pub fn ols_ttest(x: &DMatrix<f64>, y: &DVector<f64>, names: &[String], intercept: bool) -> Result<TTestReport> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: y.len() });
    }
    if names.len() != x.ncols() {
        return Err(Error::DimensionMismatch { expected: x.ncols(), got: names.len() });
    }
    let mut labels = Vec::with_capacity(x.ncols() + 1);
    let design = if intercept {
        labels.push("const".to_string());
        x.clone().insert_column(0, 1.0)
    } else {
        x.clone()
    };
    labels.extend(names.iter().cloned());
    let k = design.ncols();
    if k == 0 {
        return Err(Error::Empty("no regressors"));
    }
    if n <= k {
        return Err(Error::InvalidDimension(format!("need n > k, got n = {n}, k = {k}")));
    }
    let gram = design.transpose() * &design;
    let eig = gram.clone().symmetric_eigenvalues();
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= COLLINEARITY_CONDITION) {
        return Err(Error::Singular { condition });
    }
    let chol = gram.cholesky().ok_or(Error::Singular { condition })?;
    let inv = chol.inverse();
    let beta = &inv * (design.transpose() * y);
    let resid = y - &design * &beta;
    let dof = n - k;
    let rss = resid.norm_squared();
    let s2 = rss / dof as f64;
    let scale = y.norm_squared().max(1.0);
    let degenerate = rss <= 1e-24 * scale;
    let q = t_quantile(0.975, dof as f64)?;
    let mut rows = Vec::with_capacity(k);
    for (j, name) in labels.into_iter().enumerate() {
        let coef = beta[j];
        let (std_err, t, p) = if degenerate {
            (0.0, f64::INFINITY.copysign(coef), 0.0)
        } else {
            let se = (s2 * inv[(j, j)]).sqrt();
            let t = coef / se;
            let p = (2.0 * (1.0 - t_cdf(t.abs(), dof as f64)?)).clamp(0.0, 1.0);
            (se, t, p)
        };
        rows.push(CoefRow { name, coef, std_err, t, p, ci_low: coef - q * std_err, ci_high: coef + q * std_err });
    }
    Ok(TTestReport { rows, n, k, dof, residual_variance: s2, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn ln_gamma_values() {
        assert!(ln_gamma(1.0).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn betainc_closed_forms() {
        // I_x(1, b) = 1 − (1 − x)^b, I_x(a, 1) = x^a.
        for &x in &[0.1, 0.4, 0.8] {
            assert!((betainc(1.0, 3.0, x) - (1.0 - (1.0 - x).powi(3))).abs() < 1e-13);
            assert!((betainc(2.5, 1.0, x) - x.powf(2.5)).abs() < 1e-13);
        }
    }

    #[test]
    fn cauchy_and_center() {
        assert_eq!(t_cdf(0.0, 7.0).unwrap(), 0.5);
        assert!((t_cdf(1.0, 1.0).unwrap() - 0.75).abs() < 1e-13);
        assert!((t_cdf(-3.0, 1.0).unwrap() - (0.5 + (-3f64).atan() / std::f64::consts::PI)).abs() < 1e-13);
    }

    #[test]
    fn t_cdf_known_value() {
        assert!((t_cdf(2.0, 10.0).unwrap() - 0.9633).abs() < 1e-4);
    }

    #[test]
    fn rejects_small_dof() {
        assert!(t_cdf(1.0, 0.5).is_err());
        assert!(t_quantile(0.5, 0.0).is_err());
    }

    #[test]
    fn large_dof_approaches_normal() {
        let phi = |x: f64| {
            let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
            0.5 + simpson(f, 0.0, x, 2000)
        };
        for i in -40..=40 {
            let x = i as f64 / 10.0;
            assert!((t_cdf(x, 1000.0).unwrap() - phi(x)).abs() < 1e-3);
        }
    }

    #[test]
    fn quantile_known() {
        assert!((t_quantile(0.975, 10.0).unwrap() - 2.228_138_851_986_273_5).abs() < 1e-9);
        assert!((t_quantile(0.975, 1.0).unwrap() - 12.706_204_736_174_7).abs() < 1e-8);
    }

    #[test]
    fn exact_line_is_degenerate() {
        let x = DMatrix::from_fn(10, 1, |i, _| i as f64 + 1.0);
        let y = x.column(0) * 2.0;
        let r = ols_ttest(&x, &y, &["x".into()], false).unwrap();
        assert!(r.degenerate);
        assert!((r.rows[0].coef - 2.0).abs() < 1e-12);
        assert_eq!(r.rows[0].p, 0.0);
    }

    #[test]
    fn noisy_line_with_intercept() {
        let mut rng = crate::rng::rng(11);
        let n = 200;
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y = DVector::from_iterator(
            n,
            xs.iter().map(|x| 3.0 + 2.0 * x + 0.1 * rng.sample::<f64, _>(StandardNormal)),
        );
        let x = DMatrix::from_column_slice(n, 1, &xs);
        let r = ols_ttest(&x, &y, &["x".into()], true).unwrap();
        assert_eq!(r.dof, n - 2);
        let c = r.row("const").unwrap();
        let s = r.row("x").unwrap();
        assert!(c.ci_low <= 3.0 && 3.0 <= c.ci_high);
        assert!(s.ci_low <= 2.0 && 2.0 <= s.ci_high);
        assert!(c.p < 1e-6 && s.p < 1e-6);
    }

    #[test]
    fn constant_column_with_intercept_is_collinear() {
        let x = DMatrix::from_fn(20, 2, |i, j| if j == 0 { 0.1 } else { i as f64 });
        let y = DVector::from_fn(20, |i, _| i as f64 * 0.5 + 1.0);
        let err = ols_ttest(&x, &y, &["a".into(), "b".into()], true).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn too_few_rows() {
        let x = DMatrix::from_element(2, 2, 1.0);
        let y = DVector::from_element(2, 1.0);
        assert!(ols_ttest(&x, &y, &["a".into(), "b".into()], false).is_err());
    }

    #[test]
    fn csv_layout() {
        let x = DMatrix::from_fn(6, 1, |i, _| i as f64);
        let y = DVector::from_vec(vec![0.1, 1.2, 1.9, 3.1, 4.0, 5.2]);
        let csv = ols_ttest(&x, &y, &["x".into()], true).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], TTestReport::HEADER);
        assert!(lines[1].starts_with("const,"));
        assert!(lines[2].starts_with("x,"));
    }

    proptest::proptest! {
        #[test]
        fn cdf_is_symmetric(x in -50.0f64..50.0, dof in 1.0f64..500.0) {
            let s = t_cdf(x, dof).unwrap() + t_cdf(-x, dof).unwrap();
            proptest::prop_assert!((s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn cdf_is_monotone(x in -20.0f64..20.0, h in 1e-3f64..5.0, dof in 1.0f64..200.0) {
            proptest::prop_assert!(t_cdf(x, dof).unwrap() <= t_cdf(x + h, dof).unwrap());
        }

        #[test]
        fn quantile_round_trip(p in 1e-6f64..(1.0 - 1e-6), dof in 1.0f64..300.0) {
            let q = t_quantile(p, dof).unwrap();
            proptest::prop_assert!((t_cdf(q, dof).unwrap() - p).abs() <= 1e-9);
        }

        #[test]
        fn noiseless_fit_is_exact(
            b in proptest::collection::vec(-5.0f64..5.0, 3),
            seed in 0u64..1000,
        ) {
            let mut r = crate::rng::rng(seed);
            let x = DMatrix::from_fn(30, 3, |_, _| r.random_range(-2.0..2.0));
            let y = &x * DVector::from_column_slice(&b);
            let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
            let rep = ols_ttest(&x, &y, &names, false).unwrap();
            for (row, want) in rep.rows.iter().zip(&b) {
                proptest::prop_assert!((row.coef - want).abs() <= 1e-10);
            }
        }

        #[test]
        fn report_invariants(seed in 0u64..1000) {
            let mut r = crate::rng::rng(seed);
            let n = 25;
            let x = DMatrix::from_fn(n, 2, |_, _| r.random_range(-1.0..1.0));
            let y = DVector::from_fn(n, |i, _| 0.3 * x[(i, 0)] + r.sample::<f64, _>(StandardNormal));
            let rep = ols_ttest(&x, &y, &["u".into(), "v".into()], true).unwrap();
            proptest::prop_assert_eq!(rep.dof, n - 3);
            for row in &rep.rows {
                proptest::prop_assert!((0.0..=1.0).contains(&row.p));
                proptest::prop_assert!(row.ci_low <= row.coef && row.coef <= row.ci_high);
            }
        }
    }
}
