//! Multi-domain data from the linear structural-equation model
//!
//! ```text
//! zc ~ sa·N(0, I)            causal block
//! ε  = orth(sb·N(0, I), zc)  label noise, projected off zc
//! ye = γ ⊙ zc + ε
//! ze = ye + sc·N(0, I)       spurious block
//! Y  = Σ_j ye_j
//! ```
//!
//! One domain is an `n × 2d` design `[zc | ze]` plus the response `Y`. The
//! projection uses the scalar inner product over the flattened matrices, so
//! only the total `Σ ε ⊙ zc` is zeroed, not each column.
//!
//! On disk a dataset is a directory of `env{id}.csv` files (header `0..2d`,
//! feature columns then `Y`) and a `true_gamma.csv` holding `γ` padded with
//! `d` zeros.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::rng::{rng, substream_seed};
use crate::{format_f64, Error, Result};

const GAMMA_FILE: &str = "true_gamma.csv";

/// Ground-truth invariant coefficients `γ*`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaVector(Vec<f64>);

impl GammaVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDimension("gamma must have d >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("gamma has non-finite entries".into()));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `γ` followed by `d` zeros: the invariant predictor over `[zc | ze]`.
    pub fn padded(&self) -> Vec<f64> {
        let mut out = self.0.clone();
        out.resize(2 * self.0.len(), 0.0);
        out
    }
}

/// `d` standard-normal draws from the seeded generator.
pub fn make_gamma(d: usize, seed: u64) -> Result<GammaVector> {
    if d == 0 {
        return Err(Error::InvalidDimension("d must be >= 1".into()));
    }
    let mut r = rng(seed);
    GammaVector::new((0..d).map(|_| r.sample(StandardNormal)).collect())
}

/// Per-domain standard-deviation multipliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvSpec {
    pub env_id: u32,
    /// Scale of the causal block `zc`.
    pub sa: f64,
    /// Scale of the label noise.
    pub sb: f64,
    /// Scale of the noise added to form `ze`.
    pub sc: f64,
}

impl EnvSpec {
    pub fn new(env_id: u32, sa: f64, sb: f64, sc: f64) -> Result<Self> {
        for (name, v) in [("sa", sa), ("sb", sb), ("sc", sc)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be a finite nonnegative scale, got {v}"
                )));
            }
        }
        Ok(Self { env_id, sa, sb, sc })
    }

    /// Variances `(a, b, c)` of the causal block, label noise and spurious noise.
    pub fn variances(&self) -> (f64, f64, f64) {
        (self.sa * self.sa, self.sb * self.sb, self.sc * self.sc)
    }
}

/// How an environment value `e` maps onto the three scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    /// Variances `a = c = e`, label-noise variance fixed at 1.
    PaperText,
    /// All three standard deviations equal to `e`, as in the reference
    /// generator script.
    Listing1,
}

impl Scaling {
    pub fn env_spec(self, env_id: u32, e: f64) -> Result<EnvSpec> {
        if !(e.is_finite() && e >= 0.0) {
            return Err(Error::InvalidArgument(format!("environment value {e} must be >= 0")));
        }
        match self {
            Scaling::PaperText => EnvSpec::new(env_id, e.sqrt(), 1.0, e.sqrt()),
            Scaling::Listing1 => EnvSpec::new(env_id, e, e, e),
        }
    }

    pub fn specs(self, env_values: &[f64]) -> Result<Vec<EnvSpec>> {
        env_values
            .iter()
            .enumerate()
            .map(|(i, &e)| self.env_spec(i as u32 + 1, e))
            .collect()
    }
}

impl std::str::FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-text" => Ok(Scaling::PaperText),
            "listing1" => Ok(Scaling::Listing1),
            _ => Err(Error::InvalidArgument(format!(
                "unknown scaling `{s}` (expected paper-text or listing1)"
            ))),
        }
    }
}

/// Named environment sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Three domains, `e ∈ {1, 2, 3}`.
    D1,
    /// Thirty domains, `e ∈ {1, ..., 30}`.
    D2,
}

impl Preset {
    pub fn env_values(self) -> Vec<f64> {
        let count = match self {
            Preset::D1 => 3,
            Preset::D2 => 30,
        };
        (1..=count).map(f64::from).collect()
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "D1" | "d1" => Ok(Preset::D1),
            "D2" | "d2" => Ok(Preset::D2),
            _ => Err(Error::InvalidArgument(format!("unknown preset `{s}` (expected D1 or D2)"))),
        }
    }
}

/// Per-domain sample count used by both presets.
pub const PRESET_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub env_id: u32,
    /// `n × 2d`, columns `[zc | ze]`.
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl DomainDataset {
    pub fn new(env_id: u32, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 {
            return Err(Error::Empty("domain has no rows"));
        }
        if x.ncols() == 0 || !x.ncols().is_multiple_of(2) {
            return Err(Error::InvalidDimension(format!(
                "feature count must be even and positive, got {}",
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Generation { env_id });
        }
        Ok(Self { env_id, x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Half the feature count.
    pub fn d(&self) -> usize {
        self.x.ncols() / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiDomainDataset {
    pub gamma: GammaVector,
    pub domains: Vec<DomainDataset>,
}

impl MultiDomainDataset {
    pub fn new(gamma: GammaVector, domains: Vec<DomainDataset>) -> Result<Self> {
        let d = gamma.dim();
        for dom in &domains {
            if dom.d() != d {
                return Err(Error::DimensionMismatch {
                    expected: 2 * d,
                    got: dom.x.ncols(),
                });
            }
        }
        let mut ids: Vec<u32> = domains.iter().map(|dom| dom.env_id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate env_id".into()));
        }
        Ok(Self { gamma, domains })
    }

    pub fn env_ids(&self) -> Vec<u32> {
        self.domains.iter().map(|d| d.env_id).collect()
    }
}

/// Removes from `noise` its component along `zc`, using the inner product
/// over all entries.
pub fn orthogonalize(noise: &DMatrix<f64>, zc: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if noise.shape() != zc.shape() {
        return Err(Error::DimensionMismatch {
            expected: zc.len(),
            got: noise.len(),
        });
    }
    let zz = zc.dot(zc);
    if zz == 0.0 {
        return Err(Error::DegenerateProjection);
    }
    let coef = zc.dot(noise) / zz;
    Ok(noise - zc * coef)
}

/// The intermediate pieces of one generated domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainParts {
    pub env_id: u32,
    pub zc: DMatrix<f64>,
    pub eps: DMatrix<f64>,
    pub ye: DMatrix<f64>,
    pub ze: DMatrix<f64>,
}

impl DomainParts {
    pub fn into_dataset(self) -> Result<DomainDataset> {
        let (n, d) = self.zc.shape();
        let mut x = DMatrix::zeros(n, 2 * d);
        x.columns_mut(0, d).copy_from(&self.zc);
        x.columns_mut(d, d).copy_from(&self.ze);
        let y = row_sums(&self.ye);
        DomainDataset::new(self.env_id, x, y)
    }
}

fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()))
}

fn normal_matrix(n: usize, d: usize, scale: f64, seed: u64) -> DMatrix<f64> {
    let mut r = rng(seed);
    let data: Vec<f64> = (0..n * d)
        .map(|_| scale * r.sample::<f64, _>(StandardNormal))
        .collect();
    DMatrix::from_row_slice(n, d, &data)
}

/// Generates one domain and keeps the intermediate matrices.
///
/// When `sa = 0` the causal block is identically zero and there is nothing
/// to project off; the noise is used as drawn.
pub fn sample_domain_parts(
    gamma: &GammaVector,
    n: usize,
    spec: &EnvSpec,
    seed: u64,
) -> Result<DomainParts> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let d = gamma.dim();
    let id = u64::from(spec.env_id);
    let zc = normal_matrix(n, d, spec.sa, substream_seed(seed, id, 0));
    let raw = normal_matrix(n, d, spec.sb, substream_seed(seed, id, 1));
    let eps = if zc.iter().all(|&v| v == 0.0) {
        raw
    } else {
        orthogonalize(&raw, &zc)?
    };
    let g = DMatrix::from_fn(n, d, |_, j| gamma.values()[j]);
    let ye = zc.component_mul(&g) + &eps;
    let ze = &ye + normal_matrix(n, d, spec.sc, substream_seed(seed, id, 2));
    Ok(DomainParts {
        env_id: spec.env_id,
        zc,
        eps,
        ye,
        ze,
    })
}

pub fn sample_domain(
    gamma: &GammaVector,
    n: usize,
    spec: &EnvSpec,
    seed: u64,
) -> Result<DomainDataset> {
    sample_domain_parts(gamma, n, spec, seed)?.into_dataset()
}

/// Generates every domain in `specs` (in parallel) under one master seed.
pub fn generate(
    gamma: &GammaVector,
    n: usize,
    specs: &[EnvSpec],
    seed: u64,
) -> Result<MultiDomainDataset> {
    let domains = specs
        .par_iter()
        .map(|spec| sample_domain(gamma, n, spec, seed))
        .collect::<Result<Vec<_>>>()?;
    MultiDomainDataset::new(gamma.clone(), domains)
}

/// Single-feature-pair data with correlated noise:
/// `(z1, ε1, ε2)` jointly Gaussian with `Var = (a, b, c)`,
/// `Cov(z1, ε2) = p`, `Cov(ε1, ε2) = q`, and
/// `y = γ·z1 + ε1`, `z2 = y + ε2`, `x = [z1, z2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatedSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub gamma: f64,
    pub p: f64,
    pub q: f64,
}

pub fn sample_correlated(spec: &CorrelatedSpec, n: usize, seed: u64) -> Result<DomainDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    let cov = Matrix3::new(
        spec.a, 0.0, spec.p, //
        0.0, spec.b, spec.q, //
        spec.p, spec.q, spec.c,
    );
    let chol = cov.cholesky().ok_or_else(|| {
        Error::InvalidArgument("noise covariance is not positive definite".into())
    })?;
    let l = chol.l();
    let mut r = rng(seed);
    let mut x = DMatrix::zeros(n, 2);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let g = nalgebra::Vector3::from_fn(|_, _| r.sample::<f64, _>(StandardNormal));
        let v = l * g;
        let (z1, e1, e2) = (v[0], v[1], v[2]);
        let yi = spec.gamma * z1 + e1;
        x[(i, 0)] = z1;
        x[(i, 1)] = yi + e2;
        y[i] = yi;
    }
    DomainDataset::new(1, x, y)
}

fn write_rows<'a>(
    path: &Path,
    ncols: usize,
    rows: impl Iterator<Item = Vec<f64>> + 'a,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header: Vec<String> = (0..ncols).map(|i| i.to_string()).collect();
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(format_f64).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    w.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `env{id}.csv` for every domain and `true_gamma.csv`.
pub fn write_dataset(ds: &MultiDomainDataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for dom in &ds.domains {
        let path = dir.join(format!("env{}.csv", dom.env_id));
        let cols = dom.x.ncols() + 1;
        let rows = (0..dom.n()).map(|i| {
            let mut row: Vec<f64> = dom.x.row(i).iter().copied().collect();
            row.push(dom.y[i]);
            row
        });
        write_rows(&path, cols, rows)?;
    }
    write_gamma(&ds.gamma, &dir.join(GAMMA_FILE))
}

pub fn write_gamma(gamma: &GammaVector, path: &Path) -> Result<()> {
    write_column(&gamma.padded(), path)
}

/// Single-column CSV with header `0`.
pub fn write_column(values: &[f64], path: &Path) -> Result<()> {
    write_rows(path, 1, values.iter().map(|&v| vec![v]))
}

/// Reads a header-checked numeric table, returning its rows.
fn read_table(path: &Path, expected_cols: Option<usize>) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, 0, format!("{other:?}")),
        })?;
    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| Error::parse(path, 1, e.to_string()))?,
        None => return Err(Error::parse(path, 1, "missing header row")),
    };
    let width = header.len();
    for (i, cell) in header.iter().enumerate() {
        if cell.trim() != i.to_string() {
            return Err(Error::parse(
                path,
                1,
                format!("malformed header: column {i} is `{cell}`"),
            ));
        }
    }
    if let Some(cols) = expected_cols {
        if width != cols {
            return Err(Error::parse(
                path,
                1,
                format!("expected {cols} columns, header has {width}"),
            ));
        }
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::parse(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != width {
            return Err(Error::parse(
                path,
                line,
                format!("ragged row: {} fields, expected {width}", rec.len()),
            ));
        }
        let row = rec
            .iter()
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, line, format!("not a number: `{cell}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Reads a single-column CSV with header `0`.
pub fn read_column(path: &Path) -> Result<Vec<f64>> {
    Ok(read_table(path, Some(1))?.into_iter().map(|r| r[0]).collect())
}

pub fn read_gamma(path: &Path) -> Result<GammaVector> {
    let col = read_column(path)?;
    if col.is_empty() || col.len() % 2 != 0 {
        return Err(Error::parse(
            path,
            1,
            format!("expected 2d rows, found {}", col.len()),
        ));
    }
    let d = col.len() / 2;
    GammaVector::new(col[..d].to_vec())
}

fn env_files(dir: &Path) -> Result<Vec<(u32, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        let Some(id) = name
            .strip_prefix("env")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<u32>().ok())
        else {
            continue;
        };
        out.push((id, entry.path()));
    }
    out.sort_by_key(|(id, _)| *id);
    Ok(out)
}

pub fn read_dataset(dir: &Path) -> Result<MultiDomainDataset> {
    let gamma_path = dir.join(GAMMA_FILE);
    if !gamma_path.exists() {
        return Err(Error::io(
            &gamma_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "missing true_gamma.csv"),
        ));
    }
    let gamma = read_gamma(&gamma_path)?;
    let d = gamma.dim();
    let files = env_files(dir)?;
    if files.is_empty() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no env*.csv files"),
        ));
    }
    let mut domains = Vec::with_capacity(files.len());
    for (id, path) in files {
        let rows = read_table(&path, Some(2 * d + 1))?;
        if rows.is_empty() {
            return Err(Error::parse(&path, 2, "no data rows"));
        }
        let n = rows.len();
        let mut x = DMatrix::zeros(n, 2 * d);
        let mut y = DVector::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            for j in 0..2 * d {
                x[(i, j)] = row[j];
            }
            y[i] = row[2 * d];
        }
        domains.push(
            DomainDataset::new(id, x, y).map_err(|e| Error::parse(&path, 0, e.to_string()))?,
        );
    }
    MultiDomainDataset::new(gamma, domains)
}
