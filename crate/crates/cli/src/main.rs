//! `softpulse`: verify shapes, design pulses, classify and search sequences,
//! run sweeps and regenerate the order table.
//!
//! Exit status: 0 success, 1 usage or parse error, 2 certification or
//! classification failure.

mod config;
mod output;

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use softpulse::bathframe::{self, FieldAxis};
use softpulse::optimize::{self, AnnealOptions, DesignGoal};
use softpulse::sequences::{
    self, bb1_sweep, classify_order, geomspace, loglog_slope, parse_sequence, scaling_sweep, search_sequences, Bb1Pulses,
    ClassifyOptions, IntervalCache, IntervalSpec, SearchOptions,
};
use softpulse::spinmodel::{ModelKind, Parity};
use softpulse::tables::{self, Table1Options};
use softpulse::{pulseshape, ChainModel, ClusterSpec, PulseError, PulseShape};

use config::RunConfig;
use output::{csv_text, emit, Failure};

pub const THREADS_ENV: &str = "SOFTPULSE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "softpulse", version, about = "Self-refocusing soft pulses for qubit chains")]
struct Cli {
    /// JSON file with default values for the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write the main artifact here instead of stdout (atomically).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Default)]
struct ModelArgs {
    /// Preset: ising, xxz, bath or none.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    jz_tau: Option<f64>,
    #[arg(long)]
    jperp_tau: Option<f64>,
    #[arg(long)]
    bath_b_tau: Option<f64>,
    #[arg(long)]
    bath_seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Certify a shape: smoothness, rotation angle and residuals R_1..R_K.
    Verify {
        #[arg(long)]
        shape: Option<String>,
        #[command(flatten)]
        model: ModelArgs,
        /// Order to certify; defaults to the claimed order, at least 1.
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Refocusing order of a sequence.
    Classify {
        #[arg(long)]
        sequence: Option<String>,
        #[arg(long)]
        shape: Option<String>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        /// Also report per-coupling residual shares.
        #[arg(long)]
        attribution: bool,
    },
    /// The 3 shape × 4 sequence × 3 model order grid.
    Table1 {
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        /// Bath seeds that must agree, comma separated.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Gaussian widths in units of τ, comma separated; the first fills the grid.
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        /// Exit 2 when a cell differs from the bundled published grid.
        #[arg(long)]
        check: bool,
    },
    /// Design a pulse by annealing plus steepest descent.
    Design {
        /// Target angle: pi, 2pi, pi/2 or radians.
        #[arg(long, default_value = "pi")]
        angle: String,
        #[arg(long = "K")]
        k: usize,
        #[arg(long = "L", default_value_t = 1)]
        l: usize,
        #[arg(long = "M")]
        m: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Convergence log (CSV: iteration, temperature, objective).
        #[arg(long)]
        log: Option<PathBuf>,
        #[arg(long)]
        sweeps: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Plot data: error scaling with the coupling, or BB1 amplitude errors.
    Sweep {
        #[arg(long, value_enum)]
        experiment: Experiment,
        #[arg(long)]
        sequence: Option<String>,
        #[arg(long)]
        shape: Option<String>,
        /// lo:hi:n (geometric) or a single value.
        #[arg(long)]
        jz_tau: Option<String>,
        /// Truncation order; defaults to the classified order of the sequence.
        #[arg(long = "K")]
        k: Option<usize>,
        /// Chain length (1 = single spin for bb1).
        #[arg(long)]
        sites: Option<usize>,
        /// Amplitude mismatches lo:hi:n for bb1.
        #[arg(long)]
        eps: Option<String>,
        /// Pulse family for bb1.
        #[arg(long, value_enum, default_value = "second-order")]
        family: Family,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Exhaustive search for the best sequences of a given length.
    Search {
        #[arg(long)]
        length: usize,
        /// Comma separated intervals, e.g. "X1,~X1,Y2,I".
        #[arg(long, default_value = "X1,Y1,X2,Y2,~X1,~Y1,~X2,~Y2")]
        alphabet: String,
        #[arg(long)]
        shape: Option<String>,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        budget: Option<u128>,
    },
    /// Rotating-frame harmonics of a sequence on one sublattice (CSV of |C_m|).
    Harmonics {
        #[arg(long)]
        sequence: Option<String>,
        #[arg(long)]
        shape: Option<String>,
        #[arg(long, value_enum, default_value = "odd")]
        parity: ParityArg,
        #[arg(long, default_value_t = bathframe::DEFAULT_M_MAX)]
        m_max: usize,
        /// Samples per interval.
        #[arg(long, default_value_t = 256)]
        samples: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Experiment {
    Scaling,
    Bb1,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Family {
    /// Q1 with the bundled second-order 2π pulse.
    SecondOrder,
    Gauss,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ParityArg {
    Odd,
    Even,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = value.trim().parse().map_err(|_| format!("{THREADS_ENV} must be a positive integer, got `{value}`"))?;
    if n == 0 {
        return Err(format!("{THREADS_ENV} must be positive"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

struct Ctx {
    cfg: RunConfig,
    out: Option<PathBuf>,
    format: Option<Format>,
}

impl Ctx {
    fn format(&self, default: Format) -> Format {
        self.format.or(self.cfg.format).unwrap_or(default)
    }

    fn out(&self) -> Option<&Path> {
        self.out.as_deref().or(self.cfg.out.as_deref())
    }

    fn shape(&self, flag: &Option<String>, default: &str) -> Result<PulseShape, Failure> {
        let name = flag.clone().or_else(|| self.cfg.shape.clone()).unwrap_or_else(|| default.to_string());
        resolve_shape(&name)
    }

    fn sequence(&self, flag: &Option<String>) -> Result<sequences::Sequence, Failure> {
        let text = flag.clone().or_else(|| self.cfg.sequence.clone()).ok_or_else(|| Failure::Usage("--sequence is required".into()))?;
        Ok(parse_sequence(&text)?)
    }

    fn steps(&self, flag: Option<usize>) -> usize {
        flag.or(self.cfg.steps).unwrap_or(softpulse::propagate::DEFAULT_STEPS)
    }

    fn k_max(&self, flag: Option<usize>, default: usize) -> usize {
        flag.or(self.cfg.k_max).unwrap_or(default)
    }

    fn model(&self, args: &ModelArgs, default: &str) -> Result<ChainModel, Failure> {
        let name = args.model.clone().or_else(|| self.cfg.model.clone()).unwrap_or_else(|| default.to_string());
        let mut m = ChainModel::preset(&name)?;
        let jz = args.jz_tau.or(self.cfg.jz_tau);
        let jperp = args.jperp_tau.or(self.cfg.jperp_tau);
        let b = args.bath_b_tau.or(self.cfg.bath_b_tau);
        let seed = args.bath_seed.or(self.cfg.bath_seed);
        if let Some(jz) = jz {
            if m.name == ModelKind::Xxz && jperp.is_none() {
                m.jperp = jz * softpulse::spinmodel::XXZ_RATIO;
            }
            m.jz = jz;
        }
        if let Some(j) = jperp {
            m.jperp = j;
        }
        if b.is_some() || seed.is_some() {
            let bath = m.bath.get_or_insert_with(|| softpulse::spinmodel::BathFields::z(1.0, 1));
            if let Some(b) = b {
                bath.b = b;
            }
            if let Some(s) = seed {
                bath.seed = s;
            }
        }
        if m.validate().is_err() {
            m.name = ModelKind::Custom;
        }
        Ok(m)
    }
}

pub fn resolve_shape(name: &str) -> Result<PulseShape, Failure> {
    let path = Path::new(name);
    if name.ends_with(".json") || path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read shape file {name}: {e}")))?;
        return Ok(PulseShape::from_json(&text)?);
    }
    Ok(pulseshape::builtin(name)?)
}

pub fn parse_angle(text: &str) -> Result<f64, Failure> {
    let t = text.trim().to_ascii_lowercase();
    let value = match t.as_str() {
        "pi" => Some(PI),
        "2pi" => Some(2.0 * PI),
        "pi/2" => Some(PI / 2.0),
        _ => t.parse().ok(),
    };
    value.ok_or_else(|| Failure::Usage(format!("cannot parse angle `{text}`")))
}

/// `lo:hi:n` as n geometric points, or one value.
pub fn parse_range(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = || Failure::Usage(format!("expected lo:hi:n or a number, got `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        [v] => Ok(vec![v.trim().parse().map_err(|_| bad())?]),
        [lo, hi, n] => {
            let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
            let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
            let n: usize = n.trim().parse().map_err(|_| bad())?;
            if !(lo > 0.0 && hi > lo && n >= 2) {
                return Err(bad());
            }
            Ok(geomspace(lo, hi, n))
        }
        _ => Err(bad()),
    }
}

fn parse_alphabet(text: &str) -> Result<Vec<IntervalSpec>, Failure> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let seq = parse_sequence(part)?;
        if seq.len() != 1 {
            return Err(Failure::Usage(format!("alphabet entry `{part}` must be one interval")));
        }
        out.push(seq.intervals[0].clone());
    }
    if out.is_empty() {
        return Err(Failure::Usage("empty alphabet".into()));
    }
    Ok(out)
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report serialisation");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(k) = cfg.k_max {
        if k > sequences::MAX_K {
            return Err(Failure::Usage(format!("k_max {k} exceeds {}", sequences::MAX_K)));
        }
    }
    let ctx = Ctx { cfg, out: cli.out, format: cli.format };
    match cli.command {
        Command::Verify { shape, model, order, steps } => cmd_verify(&ctx, &shape, &model, order, steps),
        Command::Classify { sequence, shape, model, k_max, steps, attribution } => {
            cmd_classify(&ctx, &sequence, &shape, &model, k_max, steps, attribution)
        }
        Command::Table1 { k_max, steps, seeds, sigmas, check } => cmd_table1(&ctx, k_max, steps, seeds, sigmas, check),
        Command::Design { angle, k, l, m, seed, log, sweeps, steps } => cmd_design(&ctx, &angle, k, l, m, seed, log, sweeps, steps),
        Command::Sweep { experiment, sequence, shape, jz_tau, k, sites, eps, family, steps } => match experiment {
            Experiment::Scaling => cmd_scaling(&ctx, &sequence, &shape, jz_tau, k, sites, steps),
            Experiment::Bb1 => cmd_bb1(&ctx, eps, jz_tau, sites, family, steps),
        },
        Command::Search { length, alphabet, shape, model, k_max, budget } => {
            cmd_search(&ctx, length, &alphabet, &shape, &model, k_max, budget)
        }
        Command::Harmonics { sequence, shape, parity, m_max, samples } => cmd_harmonics(&ctx, &sequence, &shape, parity, m_max, samples),
    }
}

fn cmd_verify(ctx: &Ctx, shape: &Option<String>, model: &ModelArgs, order: Option<usize>, steps: Option<usize>) -> Result<(), Failure> {
    let shape = ctx.shape(shape, "S1")?;
    let model = ctx.model(model, "ising")?;
    let k = order.unwrap_or(shape.claimed_k.max(1));
    let cert = optimize::certify(&shape, &model, k, ctx.steps(steps))?;
    let text = match ctx.format(Format::Json) {
        Format::Json => json(&cert),
        Format::Csv => {
            let mut rows = Vec::new();
            for (cluster, row) in cert.clusters.iter().zip(&cert.residuals) {
                for (j, r) in row.iter().enumerate() {
                    rows.push(vec![cluster.clone(), (j + 1).to_string(), r.map(softpulse::numfmt::fmt_sig).unwrap_or_default()]);
                }
            }
            csv_text(&["cluster", "k", "residual"], &rows)
        }
    };
    emit(ctx.out(), &text)?;
    if cert.passes {
        Ok(())
    } else {
        Err(Failure::Check(format!("`{}` does not certify order {k}", cert.shape)))
    }
}

fn cmd_classify(
    ctx: &Ctx,
    sequence: &Option<String>,
    shape: &Option<String>,
    model: &ModelArgs,
    k_max: Option<usize>,
    steps: Option<usize>,
    attribution: bool,
) -> Result<(), Failure> {
    let seq = ctx.sequence(sequence)?;
    let shape = ctx.shape(shape, "S1")?;
    let model = ctx.model(model, "ising")?;
    let opts = ClassifyOptions { k_max: ctx.k_max(k_max, 6), steps: ctx.steps(steps), attribution, ..Default::default() };
    let report = classify_order(&seq, &shape, &model, &opts, &IntervalCache::new())?;
    let text = match ctx.format(Format::Json) {
        Format::Json => json(&report),
        Format::Csv => {
            let mut rows = Vec::new();
            for (k, row) in report.residuals.iter().enumerate() {
                for (c, r) in report.clusters.iter().zip(row) {
                    if let Some(r) = r {
                        rows.push(vec![(k + 1).to_string(), c.clone(), softpulse::numfmt::fmt_sig(*r)]);
                    }
                }
            }
            csv_text(&["k", "cluster", "residual"], &rows)
        }
    };
    emit(ctx.out(), &text)?;
    eprintln!("order {}", report.cell());
    Ok(())
}

fn cmd_table1(
    ctx: &Ctx,
    k_max: Option<usize>,
    steps: Option<usize>,
    seeds: Option<Vec<u64>>,
    sigmas: Option<Vec<f64>>,
    check: bool,
) -> Result<(), Failure> {
    let mut opts = Table1Options { k_max: ctx.k_max(k_max, 6), steps: ctx.steps(steps), ..Default::default() };
    if let Some(s) = seeds {
        opts.bath_seeds = s;
    }
    if let Some(s) = sigmas {
        opts.gauss_sigmas = s;
    }
    let table = tables::table1(&opts)?;
    let text = match ctx.format(Format::Csv) {
        Format::Csv => table.to_csv(),
        Format::Json => json(&table.rows),
    };
    emit(ctx.out(), &text)?;
    for f in &table.findings {
        eprintln!("finding: {} under {} gives {} (reference {})", f.cell, f.variant, f.observed, f.reference);
    }
    let mismatches = table.mismatches(&tables::expected_table1());
    for (want, got) in &mismatches {
        let got = got.as_ref().map(|g| g.cell()).unwrap_or_else(|| "missing".into());
        eprintln!("differs from published: {}/{}/{} published {} computed {}", want.shape, want.sequence, want.model, want.cell(), got);
    }
    if !table.failures.is_empty() {
        let cells: Vec<String> = table.failures.iter().map(|(c, e)| format!("{c}: {e}")).collect();
        return Err(Failure::Check(format!("unclassifiable cells:\n  {}", cells.join("\n  "))));
    }
    if check && !mismatches.is_empty() {
        return Err(Failure::Check(format!("{} cells differ from the published grid", mismatches.len())));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_design(
    ctx: &Ctx,
    angle: &str,
    k: usize,
    l: usize,
    m: usize,
    seed: Option<u64>,
    log: Option<PathBuf>,
    sweeps: Option<usize>,
    steps: Option<usize>,
) -> Result<(), Failure> {
    let mut goal = DesignGoal::new(parse_angle(angle)?, k, l, m);
    goal.steps = ctx.steps(steps);
    goal.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let mut opts = AnnealOptions::default();
    if let Some(s) = sweeps {
        opts.sweeps = s;
    }
    let seed = seed.or(ctx.cfg.seed).unwrap_or(1);
    let (design, failure) = match optimize::design_pulse(&goal, seed, &opts) {
        Ok(d) => (d, None),
        Err(PulseError::NoConvergence { objective, best }) => {
            (*best, Some(Failure::Check(format!("no convergence: best objective {objective:e} (best-so-far written)"))))
        }
        Err(e) => return Err(e.into()),
    };
    let mut text = design.shape.to_json();
    text.push('\n');
    emit(ctx.out(), &text)?;
    if let Some(path) = log {
        output::write_atomic(&path, &design.log_csv())?;
    }
    eprintln!("objective {:e}", design.objective);
    failure.map_or(Ok(()), Err)
}

#[derive(Serialize)]
struct SweepReport<T: Serialize> {
    experiment: &'static str,
    points: Vec<T>,
    #[serde(serialize_with = "softpulse::numfmt::serialize_sig")]
    slope: f64,
}

fn cmd_scaling(
    ctx: &Ctx,
    sequence: &Option<String>,
    shape: &Option<String>,
    jz_tau: Option<String>,
    k: Option<usize>,
    sites: Option<usize>,
    steps: Option<usize>,
) -> Result<(), Failure> {
    let seq = ctx.sequence(sequence)?;
    let shape = ctx.shape(shape, "Q1")?;
    let couplings = parse_range(jz_tau.as_deref().unwrap_or("0.05:0.4:8"))?;
    let steps = ctx.steps(steps);
    let base = ChainModel::ising(1.0);
    let k = match k {
        Some(k) => k,
        None => {
            let opts = ClassifyOptions { steps, ..Default::default() };
            let report = classify_order(&seq, &shape, &base, &opts, &IntervalCache::new())?;
            report.order.max(1)
        }
    };
    let cluster = ClusterSpec::chain(sites.unwrap_or(3), Parity::Odd);
    cluster.check_capacity()?;
    let points = scaling_sweep(&seq.bind(&shape), &base, k, &couplings, &cluster, steps)?;
    let slope = fit(points.iter().map(|p| (p.coupling, p.error)))?;
    eprintln!("K = {k}, log-log slope {slope:.4}");
    let text = match ctx.format(Format::Csv) {
        Format::Csv => {
            let rows = points.iter().map(|p| vec![softpulse::numfmt::fmt_sig(p.coupling), softpulse::numfmt::fmt_sig(p.error)]).collect::<Vec<_>>();
            csv_text(&["jz_tau", "error"], &rows)
        }
        Format::Json => json(&SweepReport { experiment: "scaling", points, slope }),
    };
    emit(ctx.out(), &text)
}

fn fit(points: impl Iterator<Item = (f64, f64)>) -> Result<f64, Failure> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.unzip();
    if xs.len() < 2 {
        return Ok(f64::NAN);
    }
    Ok(loglog_slope(&xs, &ys)?)
}

fn cmd_bb1(ctx: &Ctx, eps: Option<String>, jz_tau: Option<String>, sites: Option<usize>, family: Family, steps: Option<usize>) -> Result<(), Failure> {
    let epsilons = parse_range(eps.as_deref().unwrap_or("0.01:0.1:10"))?;
    let jz = match jz_tau.as_deref() {
        Some(t) => match parse_range(t)?.as_slice() {
            [v] => *v,
            _ => return Err(Failure::Usage("bb1 takes a single --jz-tau value".into())),
        },
        None => 0.0,
    };
    let sites = sites.unwrap_or(1);
    let model = if jz == 0.0 { ChainModel::none() } else { ChainModel::ising(jz) };
    let pulses = match family {
        Family::SecondOrder => Bb1Pulses::second_order(),
        Family::Gauss => Bb1Pulses::gaussian(pulseshape::REFERENCE_SIGMA),
    };
    let points = bb1_sweep(&pulses, &epsilons, &model, sites, ctx.steps(steps) * softpulse::propagate::EXACT_STEP_FACTOR)?;
    let slope = fit(points.iter().filter(|p| p.epsilon > 0.0).map(|p| (p.epsilon, p.error)))?;
    eprintln!("log-log slope {slope:.4}");
    let text = match ctx.format(Format::Csv) {
        Format::Csv => {
            let rows = points.iter().map(|p| vec![softpulse::numfmt::fmt_sig(p.epsilon), softpulse::numfmt::fmt_sig(p.error)]).collect::<Vec<_>>();
            csv_text(&["epsilon", "error"], &rows)
        }
        Format::Json => json(&SweepReport { experiment: "bb1", points, slope }),
    };
    emit(ctx.out(), &text)
}

#[derive(Serialize)]
struct SearchReport {
    length: usize,
    candidates: String,
    classes: usize,
    best_order: Option<usize>,
    hits: Vec<HitReport>,
    ambiguous: Vec<String>,
}

#[derive(Serialize)]
struct HitReport {
    sequence: String,
    order: usize,
    cell: String,
}

fn cmd_search(
    ctx: &Ctx,
    length: usize,
    alphabet: &str,
    shape: &Option<String>,
    model: &ModelArgs,
    k_max: Option<usize>,
    budget: Option<u128>,
) -> Result<(), Failure> {
    let alphabet = parse_alphabet(alphabet)?;
    let shape = ctx.shape(shape, "Q1")?;
    let model = ctx.model(model, "ising")?;
    let mut opts = SearchOptions { classify: ClassifyOptions::with_k_max(ctx.k_max(k_max, 6)), ..Default::default() };
    opts.classify.steps = ctx.steps(None);
    if let Some(b) = budget {
        opts.budget = b;
    }
    let result = search_sequences(length, &alphabet, &shape, &model, &opts)?;
    let report = SearchReport {
        length,
        candidates: result.candidates.to_string(),
        classes: result.classes,
        best_order: result.best_order,
        hits: result
            .hits
            .iter()
            .map(|h| HitReport { sequence: h.sequence.to_string(), order: h.report.order, cell: h.report.cell() })
            .collect(),
        ambiguous: result.ambiguous.iter().map(|(s, e)| format!("{s}: {e}")).collect(),
    };
    let text = match ctx.format(Format::Json) {
        Format::Json => json(&report),
        Format::Csv => {
            let rows = report.hits.iter().map(|h| vec![h.sequence.clone(), h.order.to_string(), h.cell.clone()]).collect::<Vec<_>>();
            csv_text(&["sequence", "order", "cell"], &rows)
        }
    };
    emit(ctx.out(), &text)
}

fn cmd_harmonics(ctx: &Ctx, sequence: &Option<String>, shape: &Option<String>, parity: ParityArg, m_max: usize, samples: usize) -> Result<(), Failure> {
    let seq = ctx.sequence(sequence)?;
    let shape = ctx.shape(shape, "S1")?;
    let parity = match parity {
        ParityArg::Odd => Parity::Odd,
        ParityArg::Even => Parity::Even,
    };
    let traj = bathframe::rotation_trajectory(&seq.bind(&shape), parity, samples)?;
    let table = bathframe::harmonics(&traj, m_max)?;
    let z = bathframe::refocusing_check(&table, FieldAxis::Z);
    eprintln!(
        "max |C_0^(z·)| = {:e}, reconstruction residual {:e}",
        z.iter().copied().fold(0.0, f64::max),
        table.reconstruction_residual
    );
    emit(ctx.out(), &table.to_csv())
}
