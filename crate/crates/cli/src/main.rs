#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};

use shiftlab::bounds::{BoundInputs, BoundReport, ShiftBound};
use shiftlab::divergence::{shift_matrix, ShiftDescriptor, ShiftReport};
use shiftlab::hyptest::ols_ttest;
use shiftlab::massart_sim::{beta_sweep, run_bound_experiment, ExperimentConfig, Mode, SweepPoint, ExperimentResult};
use shiftlab::regression::{pooled_fit_with, AdamConfig, FitMethod, FitReport};
use shiftlab::sem_data::{generate, make_gamma, read_dataset, write_dataset, Preset, Scaling, PRESET_SAMPLES};
use shiftlab::spurious_sim::{
    gen_colored_domain, oracle_accuracy, shift_sweep, sweep_csv, train, CounterfactualReport, SweepConfig, TrainConfig,
};
use shiftlab::{format_f64, ErrorKind};

use config::{Config, ConfigError};

const MANIFEST: &str = "run_manifest.csv";
const MANIFEST_HEADER: &str = "command,config_hash,seed,version,timestamp";

#[derive(Parser, Debug)]
#[command(name = "shiftlab", version, about = "Distribution-shift experiments: data, fits, bounds and simulations")]
struct Cli {
    /// TOML config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a multi-domain structural-equation dataset.
    Gen(GenArgs),
    /// Pooled least-squares fit on a dataset directory.
    Fit(FitArgs),
    /// Pairwise KL matrix and its supremum.
    Shift(ShiftArgs),
    /// Evaluate the shift bounds.
    Bounds(BoundsArgs),
    /// Finite-domain Massart bound experiment.
    Massart(MassartArgs),
    /// Train on colored-analog domains and report counterfactual accuracy.
    Colored(ColoredArgs),
    /// Colored-analog shift sweep.
    Sweep(SweepArgs),
    /// OLS t-tests on columns of a CSV file.
    Hyptest(HyptestArgs),
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    #[arg(long)]
    preset: Option<String>,
    /// Comma-separated environment values; overrides the preset.
    #[arg(long, value_delimiter = ',')]
    envs: Option<Vec<f64>>,
    #[arg(long)]
    scaling: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Directory for `weights.csv`, `fit_report.csv` and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    Causal,
    Spurious,
    All,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum ShiftKind {
    Gaussian,
    Massart,
}

#[derive(Args, Debug)]
struct ShiftArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    kind: ShiftKind,
    /// Fit diagonal Gaussians to the columns of a dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "causal")]
    block: Block,
    #[command(flatten)]
    spec: DataArgs,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "E")]
    e: Option<usize>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Display base for the printed divergences. Natural log is used internally.
    #[arg(long)]
    log_base: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BoundsArgs {
    #[command(subcommand)]
    which: BoundsKind,
}

#[derive(Subcommand, Debug)]
enum BoundsKind {
    /// Clean family with shift `alpha`.
    T1(BoundFlags),
    /// Massart family with distance `beta` and margin `m`.
    T2(BoundFlags),
}

#[derive(Args, Debug)]
struct BoundFlags {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long = "E")]
    e: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args, Debug)]
struct MassartArgs {
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long = "E")]
    e: Option<usize>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    tilt: Option<f64>,
    #[arg(long)]
    x2_fraction: Option<f64>,
    /// Run a sweep over these target distances instead of a single experiment.
    #[arg(long, value_delimiter = ',')]
    beta_grid: Option<Vec<f64>>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ColoredArgs {
    #[arg(long, value_delimiter = ',')]
    train_e: Option<Vec<f64>>,
    #[arg(long)]
    test_e: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long)]
    e1: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    e_test: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct HyptestArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    y_col: String,
    #[arg(long, value_delimiter = ',', required = true)]
    x_cols: Vec<String>,
    #[arg(long)]
    no_intercept: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn validation(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(ConfigError(msg.into()))
}

fn parse<T: std::str::FromStr<Err = shiftlab::Error>>(s: &str) -> anyhow::Result<T> {
    Ok(s.parse::<T>()?)
}

/// Flag, then config file, then `SHIFTLAB_SEED`, then 0.
fn resolve_seed(flag: Option<u64>, cfg: &Config) -> anyhow::Result<u64> {
    if let Some(s) = flag.or(cfg.seed) {
        return Ok(s);
    }
    match std::env::var("SHIFTLAB_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| validation(format!("SHIFTLAB_SEED is not a u64: {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn config_hash(resolved: &str) -> String {
    Sha256::digest(resolved.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

fn manifest_line(command: &str, resolved: &str, seed: u64) -> String {
    let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("{command},{},{seed},{},{ts}", config_hash(resolved), env!("CARGO_PKG_VERSION"))
}

fn io_err(path: &Path, e: std::io::Error) -> anyhow::Error {
    anyhow::Error::new(e).context(format!("writing {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

/// Appends the manifest line to `<out>/run_manifest.csv`, or prints it to
/// stderr when there is no output directory.
fn record(out: Option<&Path>, command: &str, resolved: &str, seed: u64) -> anyhow::Result<()> {
    let line = manifest_line(command, resolved, seed);
    let Some(dir) = out else {
        eprintln!("{MANIFEST_HEADER}\n{line}");
        return Ok(());
    };
    let path = dir.join(MANIFEST);
    let fresh = !path.exists();
    let mut f = fs::OpenOptions::new().create(true).append(true).open(&path).map_err(|e| io_err(&path, e))?;
    if fresh {
        writeln!(f, "{MANIFEST_HEADER}").map_err(|e| io_err(&path, e))?;
    }
    writeln!(f, "{line}").map_err(|e| io_err(&path, e))
}

fn ensure_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Writes `name` under `out`, or to stdout without an output directory.
fn emit(out: Option<&Path>, name: &str, contents: &str) -> anyhow::Result<()> {
    match out {
        Some(dir) => {
            ensure_dir(dir)?;
            write_file(&dir.join(name), contents)
        }
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

struct DataPlan {
    envs: Vec<f64>,
    scaling: Scaling,
    n: usize,
    d: usize,
}

fn data_plan(args: &DataArgs, cfg: &Config) -> anyhow::Result<DataPlan> {
    let sec = &cfg.data;
    let envs = match (&args.envs, &args.preset, &sec.envs, &sec.preset) {
        (Some(e), _, _, _) => e.clone(),
        (None, Some(p), _, _) => parse::<Preset>(p)?.env_values(),
        (None, None, Some(e), _) => e.clone(),
        (None, None, None, Some(p)) => parse::<Preset>(p)?.env_values(),
        (None, None, None, None) => Preset::D1.env_values(),
    };
    let scaling = match args.scaling.as_ref().or(sec.scaling.as_ref()) {
        Some(s) => parse::<Scaling>(s)?,
        None => Scaling::Listing1,
    };
    Ok(DataPlan {
        envs,
        scaling,
        n: args.n.or(sec.n).unwrap_or(PRESET_SAMPLES),
        d: args.d.or(sec.d).unwrap_or(20),
    })
}

fn cmd_gen(a: &GenArgs, cfg: &Config) -> anyhow::Result<()> {
    let plan = data_plan(&a.data, cfg)?;
    let seed = resolve_seed(a.seed, cfg)?;
    let specs = plan.scaling.specs(&plan.envs)?;
    let gamma = make_gamma(plan.d, seed)?;
    let ds = generate(&gamma, plan.n, &specs, seed)?;
    ensure_dir(&a.out)?;
    write_dataset(&ds, &a.out)?;
    let resolved = format!("gen {specs:?} n={} d={} seed={seed}", plan.n, plan.d);
    record(Some(&a.out), "gen", &resolved, seed)
}

fn cmd_fit(a: &FitArgs, cfg: &Config) -> anyhow::Result<()> {
    let method = match a.method.as_ref().or(cfg.fit.method.as_ref()) {
        Some(m) => parse::<FitMethod>(m)?,
        None => FitMethod::NormalEq,
    };
    let mut adam = AdamConfig::default();
    adam.epochs = a.epochs.or(cfg.fit.epochs).unwrap_or(adam.epochs);
    adam.lr = a.lr.or(cfg.fit.lr).unwrap_or(adam.lr);
    let ds = read_dataset(&a.data)?;
    let fit = pooled_fit_with(&ds, method, &adam)?;
    let report = FitReport::new(&fit, &ds)?;
    let csv = format!("{}\n{}\n", FitReport::HEADER, report.csv_row());
    if let Some(dir) = &a.out {
        ensure_dir(dir)?;
        fit.weights.write_csv(&dir.join("weights.csv"))?;
    }
    emit(a.out.as_deref(), "fit_report.csv", &csv)?;
    let resolved = format!("fit data={} method={} adam={adam:?}", a.data.display(), method.name());
    record(a.out.as_deref(), "fit", &resolved, 0)
}

fn column_descriptor(x: &DMatrix<f64>, cols: std::ops::Range<usize>) -> ShiftDescriptor {
    let n = x.nrows() as f64;
    let mut mean = Vec::new();
    let mut var = Vec::new();
    for j in cols {
        let col = x.column(j);
        let m = col.sum() / n;
        mean.push(m);
        var.push(col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n);
    }
    ShiftDescriptor::GaussianDiag { mean, var }
}

fn scaled(report: &ShiftReport, base: f64) -> anyhow::Result<ShiftReport> {
    if !(base > 0.0 && base != 1.0 && base.is_finite()) {
        return Err(validation(format!("log base must be positive and not 1, got {base}")));
    }
    let ln_b = base.ln();
    let mut r = report.clone();
    for row in &mut r.kl {
        for v in row {
            *v /= ln_b;
        }
    }
    r.alpha /= ln_b;
    Ok(r)
}

fn cmd_shift(a: &ShiftArgs, cfg: &Config) -> anyhow::Result<()> {
    let seed = resolve_seed(a.seed, cfg)?;
    let (env_ids, descriptors, resolved): (Vec<u32>, Vec<ShiftDescriptor>, String) = match a.kind {
        ShiftKind::Gaussian => {
            if let Some(dir) = &a.data {
                let ds = read_dataset(dir)?;
                let descriptors = ds
                    .domains
                    .iter()
                    .map(|dom| {
                        let d = dom.d();
                        let cols = match a.block {
                            Block::Causal => 0..d,
                            Block::Spurious => d..2 * d,
                            Block::All => 0..2 * d,
                        };
                        column_descriptor(&dom.x, cols)
                    })
                    .collect();
                (ds.env_ids(), descriptors, format!("shift data={} block={:?}", dir.display(), a.block))
            } else {
                let plan = data_plan(&a.spec, cfg)?;
                let specs = plan.scaling.specs(&plan.envs)?;
                let descriptors = specs
                    .iter()
                    .map(|s| ShiftDescriptor::GaussianDiag {
                        mean: vec![0.0; plan.d],
                        var: vec![s.sa * s.sa; plan.d],
                    })
                    .collect();
                let ids = specs.iter().map(|s| s.env_id).collect();
                (ids, descriptors, format!("shift marginal {specs:?} d={}", plan.d))
            }
        }
        ShiftKind::Massart => {
            let sec = &cfg.massart;
            let exp = ExperimentConfig {
                k: a.k.or(sec.k).unwrap_or(8),
                e: a.e.or(sec.e).unwrap_or(9),
                m: a.m.or(sec.m).unwrap_or(0.5),
                beta: a.beta.or(sec.beta).unwrap_or(0.5),
                x2_fraction: sec.x2_fraction.unwrap_or(0.0),
                seed,
                mode: Mode::Massart,
                ..Default::default()
            };
            let family = exp.family()?;
            let descriptors = family
                .domains
                .iter()
                .map(|d| ShiftDescriptor::Massart { m: exp.m, labels: d.bayes.labels.clone(), mu: d.bayes.mu.clone() })
                .collect();
            let ids = (1..=exp.e as u32).collect();
            (ids, descriptors, format!("shift massart {exp:?}"))
        }
    };
    let mut report = shift_matrix(&env_ids, &descriptors)?;
    if let Some(base) = a.log_base {
        report = scaled(&report, base)?;
    }
    emit(a.out.as_deref(), "shift.csv", &report.to_csv())?;
    record(a.out.as_deref(), "shift", &format!("{resolved} log_base={:?}", a.log_base), seed)
}

fn cmd_bounds(a: &BoundsArgs, cfg: &Config) -> anyhow::Result<()> {
    let sec = &cfg.bounds;
    let (name, flags) = match &a.which {
        BoundsKind::T1(f) => ("t1", f),
        BoundsKind::T2(f) => ("t2", f),
    };
    let shift = match &a.which {
        BoundsKind::T1(_) => {
            let alpha = flags.alpha.or(sec.alpha).ok_or_else(|| validation("t1 needs --alpha"))?;
            ShiftBound::Clean { alpha }
        }
        BoundsKind::T2(_) => {
            let beta = flags.beta.or(sec.beta).ok_or_else(|| validation("t2 needs --beta"))?;
            let m = flags.m.or(sec.m).ok_or_else(|| validation("t2 needs --m"))?;
            ShiftBound::Massart { beta, m }
        }
    };
    let inputs = BoundInputs {
        e: flags.e.or(sec.e).ok_or_else(|| validation("bounds need --E"))?,
        shift,
        delta: flags.delta.or(sec.delta).unwrap_or(0.05),
        eps: flags.eps.or(sec.eps).unwrap_or(0.1),
    };
    let report = inputs.evaluate()?;
    print!("{}\n{}\n", BoundReport::HEADER, report.csv_row());
    record(None, &format!("bounds {name}"), &format!("{inputs:?}"), 0)
}

fn cmd_massart(a: &MassartArgs, cfg: &Config) -> anyhow::Result<()> {
    let sec = &cfg.massart;
    let base = ExperimentConfig::default();
    let mode = match a.mode.as_ref().or(sec.mode.as_ref()) {
        Some(m) => parse::<Mode>(m)?,
        None => Mode::Massart,
    };
    let exp = ExperimentConfig {
        k: a.k.or(sec.k).unwrap_or(base.k),
        e: a.e.or(sec.e).unwrap_or(base.e),
        m: a.m.or(sec.m).unwrap_or(base.m),
        beta: a.beta.or(sec.beta).unwrap_or(base.beta),
        tilt: a.tilt.or(sec.tilt).unwrap_or(base.tilt),
        x2_fraction: a.x2_fraction.or(sec.x2_fraction).unwrap_or(base.x2_fraction),
        n: a.n.or(sec.n).unwrap_or(base.n),
        eps: a.eps.or(sec.eps).unwrap_or(base.eps),
        delta: a.delta.or(sec.delta).unwrap_or(base.delta),
        trials: a.trials.or(sec.trials).unwrap_or(base.trials),
        seed: resolve_seed(a.seed, cfg)?,
        mode,
    };
    let out = a.out.as_deref();
    if let Some(grid) = a.beta_grid.as_ref().or(sec.beta_grid.as_ref()) {
        let points = beta_sweep(&exp, grid)?;
        let mut csv = format!("{}\n", SweepPoint::HEADER);
        for p in &points {
            csv.push_str(&p.csv_row());
            csv.push('\n');
        }
        emit(out, "beta_sweep.csv", &csv)?;
        return record(out, "massart", &format!("{exp:?} grid={grid:?}"), exp.seed);
    }
    let res = run_bound_experiment(&exp)?;
    let summary = format!("{}\n{}\n", ExperimentResult::SUMMARY_HEADER, res.summary_row());
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_file(&dir.join("trials.csv"), &res.trials_csv())?;
    }
    emit(out, "summary.csv", &summary)?;
    record(out, "massart", &format!("{exp:?}"), exp.seed)
}

fn cmd_colored(a: &ColoredArgs, cfg: &Config) -> anyhow::Result<()> {
    let sec = &cfg.colored;
    let train_e = a.train_e.clone().or_else(|| sec.train_e.clone()).unwrap_or_else(|| vec![0.1, 0.2]);
    let test_e = a.test_e.or(sec.test_e).unwrap_or(0.9);
    let n = a.n.or(sec.n).unwrap_or(10_000);
    let mut tc = TrainConfig::default();
    tc.steps = a.steps.or(sec.steps).unwrap_or(tc.steps);
    tc.lr = a.lr.or(sec.lr).unwrap_or(tc.lr);
    let seed = resolve_seed(a.seed, cfg)?;
    if train_e.is_empty() {
        return Err(validation("need at least one training domain"));
    }
    let domains = train_e
        .iter()
        .enumerate()
        .map(|(i, &e)| gen_colored_domain(e, n, shiftlab::rng::derive_seed(seed, &[i as u64])))
        .collect::<shiftlab::Result<Vec<_>>>()?;
    let test = gen_colored_domain(test_e, n, shiftlab::rng::derive_seed(seed, &[u64::MAX]))?;
    let trained = train(&domains, &tc)?;
    let m = trained.model;
    let train_acc = domains.iter().map(|d| m.accuracy(d)).sum::<f64>() / domains.len() as f64;
    let cf = CounterfactualReport::evaluate(&m, &test);
    let csv = format!(
        "w_shape,w_color,bias,loss,grad_norm,train_acc,test_acc,cf_acc,cf_gap,within_tolerance,oracle_acc\n\
         {},{},{},{},{},{},{},{},{},{},{}\n",
        format_f64(m.w_shape),
        format_f64(m.w_color),
        format_f64(m.bias),
        format_f64(trained.loss),
        format_f64(trained.grad_norm),
        format_f64(train_acc),
        format_f64(cf.factual),
        format_f64(cf.counterfactual),
        format_f64(cf.gap),
        cf.within_tolerance,
        format_f64(oracle_accuracy(&test))
    );
    emit(a.out.as_deref(), "colored.csv", &csv)?;
    let resolved = format!("colored train={train_e:?} test={test_e} n={n} {tc:?}");
    record(a.out.as_deref(), "colored", &resolved, seed)
}

fn cmd_sweep(a: &SweepArgs, cfg: &Config) -> anyhow::Result<()> {
    let sec = &cfg.sweep;
    let base = SweepConfig::default();
    let sc = SweepConfig {
        e1: a.e1.or(sec.e1).unwrap_or(base.e1),
        grid: a.grid.clone().or_else(|| sec.grid.clone()).unwrap_or(base.grid),
        e_test: a.e_test.or(sec.e_test).unwrap_or(base.e_test),
        n: a.n.or(sec.n).unwrap_or(base.n),
        trials: a.trials.or(sec.trials).unwrap_or(base.trials),
        seed: resolve_seed(a.seed, cfg)?,
        train: TrainConfig {
            steps: a.steps.or(sec.steps).unwrap_or(base.train.steps),
            lr: a.lr.or(sec.lr).unwrap_or(base.train.lr),
        },
    };
    let rows = shift_sweep(&sc)?;
    emit(a.out.as_deref(), "sweep.csv", &sweep_csv(&rows))?;
    record(a.out.as_deref(), "sweep", &format!("{sc:?}"), sc.seed)
}

fn cmd_hyptest(a: &HyptestArgs) -> anyhow::Result<()> {
    let mut reader = csv::Reader::from_path(&a.csv).with_context(|| format!("reading {}", a.csv.display()))?;
    let headers = reader.headers()?.clone();
    let index = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| validation(format!("column {name:?} not found in {}", a.csv.display())))
    };
    let y_idx = index(&a.y_col)?;
    let x_idx = a.x_cols.iter().map(|c| index(c)).collect::<anyhow::Result<Vec<_>>>()?;
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> anyhow::Result<f64> {
            let v = rec.get(i).unwrap_or("");
            v.trim().parse().map_err(|_| validation(format!("line {}: not a number: {v:?}", line + 2)))
        };
        ys.push(num(y_idx)?);
        for &i in &x_idx {
            xs.push(num(i)?);
        }
    }
    if ys.is_empty() {
        bail!(validation("no data rows"));
    }
    let x = DMatrix::from_row_slice(ys.len(), x_idx.len(), &xs);
    let y = DVector::from_vec(ys);
    let report = ols_ttest(&x, &y, &a.x_cols, !a.no_intercept)?;
    emit(a.out.as_deref(), "hyptest.csv", &report.to_csv())?;
    if report.degenerate {
        eprintln!("warning: zero residual variance; p-values reported as 0");
    }
    let resolved = format!("hyptest csv={} y={} x={:?} intercept={}", a.csv.display(), a.y_col, a.x_cols, !a.no_intercept);
    record(a.out.as_deref(), "hyptest", &resolved, 0)
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Gen(a) => cmd_gen(a, &cfg),
        Command::Fit(a) => cmd_fit(a, &cfg),
        Command::Shift(a) => cmd_shift(a, &cfg),
        Command::Bounds(a) => cmd_bounds(a, &cfg),
        Command::Massart(a) => cmd_massart(a, &cfg),
        Command::Colored(a) => cmd_colored(a, &cfg),
        Command::Sweep(a) => cmd_sweep(a, &cfg),
        Command::Hyptest(a) => cmd_hyptest(a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<shiftlab::Error>() {
            return match e.kind() {
                ErrorKind::Validation => 2,
                ErrorKind::Numerical => 3,
                ErrorKind::Io => 4,
            };
        }
        if cause.is::<ConfigError>() {
            return 2;
        }
        if cause.is::<std::io::Error>() {
            return 4;
        }
        if let Some(e) = cause.downcast_ref::<csv::Error>() {
            return if e.is_io_error() { 4 } else { 2 };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
