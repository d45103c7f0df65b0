use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use randbc_core::bounds::{bound_sup_constant, kappa_excess_coefficient, DEFAULT_HYPOTHESIS_THRESHOLD};
use randbc_core::experiments::{self, repeat_seed, write_csv, ExperimentConfig, FormulaChoice, Workload};
use randbc_core::randomize::draw_recursive_plan;
use randbc_core::{
    apply_bc, bound_deterministic, bound_numerical, bound_randomized, draw_plan, enumerate_expectation, fl, generate,
    randomized_apply, rng, Algorithm, BilinearFormula, BoundReport, Experiment, MatrixKind, MatrixSpec, NumericalBound,
    ScalarMode,
};

mod config;

use config::{parse_kinds, parse_recursions, FileConfig};

#[derive(Parser)]
#[command(name = "randbc", version, about = "Randomized bilinear matrix multiplication experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its records as CSV.
    Experiment(Box<ExperimentArgs>),
    /// Run every experiment for every matrix family at full scale.
    Replicate(ReplicateArgs),
    /// Evaluate the error bounds on random inputs and print them as CSV.
    Bounds(BoundsArgs),
    /// Export or inspect a formula file.
    #[command(subcommand)]
    Formula(FormulaCommand),
    /// Multiply one random pair and print the relative error.
    Multiply(MultiplyArgs),
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Matrix family: gaussian, uniform, adv1, adv2, adv3, hilbert, or `all`. Repeatable or comma separated.
    #[arg(long = "matrix-type", value_delimiter = ',')]
    matrix_type: Vec<String>,
    /// Matrix size.
    #[arg(long)]
    size: Option<usize>,
    /// Recursion depths: `N` for 1..=N, `A-B`, or a comma list such as `1,3`.
    #[arg(long)]
    recursions: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// f64, f32, or dec<t>[:even|:away][:all|:products].
    #[arg(long)]
    precision: Option<String>,
    #[arg(long = "perturb-sigma")]
    perturb_sigma: Option<f64>,
    #[arg(long = "perturb-extra")]
    perturb_extra: Option<usize>,
    /// Randomization used by the averaging and distribution experiments: full, sign, perm, none.
    #[arg(long)]
    variant: Option<String>,
    /// Restrict to these algorithms. Repeatable or comma separated.
    #[arg(long, value_delimiter = ',')]
    algorithm: Vec<String>,
    /// Rescaling schedule, e.g. OIOI.
    #[arg(long)]
    schedule: Option<String>,
    /// Formula file (JSON) replacing the built-in formula.
    #[arg(long)]
    formula: Option<PathBuf>,
    /// Running-average checkpoints, comma separated.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<usize>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// s1-avg, s1-dist, s2-avg or s2-variants.
    kind: String,
    #[command(flatten)]
    overrides: Overrides,
    /// Number of independent repetitions; each goes to `<stem>.run-<r>.csv`.
    #[arg(long)]
    repeats: Option<usize>,
    /// Output CSV path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// TOML file with the same keys as the flags. Flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ReplicateArgs {
    /// Directory receiving one CSV per experiment.
    #[arg(long = "out-dir")]
    out_dir: PathBuf,
    /// Comma-separated subset of experiments.
    #[arg(long, value_delimiter = ',')]
    experiments: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
}

#[derive(Args)]
struct BoundsArgs {
    /// Block size m; inputs are 2m x 2m.
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long, default_value = "f32")]
    precision: String,
    #[arg(long, default_value_t = 1e-3)]
    perturb_sigma: f64,
    #[arg(long, default_value_t = 5)]
    perturb_extra: usize,
    /// Use exact Strassen instead of a perturbed copy.
    #[arg(long)]
    exact: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of random input pairs.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = DEFAULT_HYPOTHESIS_THRESHOLD)]
    threshold: f64,
}

#[derive(Subcommand)]
enum FormulaCommand {
    /// Write Strassen (optionally perturbed) or the standard formula as JSON.
    Export {
        /// strassen or standard<n>.
        #[arg(long, default_value = "strassen")]
        base: String,
        #[arg(long = "perturb-sigma")]
        perturb_sigma: Option<f64>,
        #[arg(long = "perturb-extra", default_value_t = 5)]
        perturb_extra: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the diagnostics of a formula file.
    Inspect {
        path: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        tol: f64,
    },
}

#[derive(Args)]
struct MultiplyArgs {
    #[arg(long, default_value = "deterministic")]
    algorithm: String,
    #[arg(long = "matrix-type", default_value = "gaussian")]
    matrix_type: String,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 1)]
    recursions: usize,
    #[arg(long, default_value = "f64")]
    precision: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Perturb Strassen with this standard deviation.
    #[arg(long = "perturb-sigma")]
    perturb_sigma: Option<f64>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Experiment(args) => run_experiment(*args),
        Command::Replicate(args) => replicate(args),
        Command::Bounds(args) => bounds(args),
        Command::Formula(cmd) => formula(cmd),
        Command::Multiply(args) => multiply(args),
    }
}

fn build_config(experiment: Experiment, file: &FileConfig, flags: &Overrides) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::defaults(experiment);
    let kinds = if flags.matrix_type.is_empty() { file.matrix_type.clone() } else { flags.matrix_type.clone() };
    if !kinds.is_empty() {
        c.matrix_kinds = parse_kinds(&kinds)?;
    }
    if let Some(size) = flags.size.or(file.size) {
        c.size = size;
    }
    if let Some(r) = flags.recursions.as_ref().or(file.recursions.as_ref()) {
        c.recursions = parse_recursions(r)?;
    }
    if let Some(t) = flags.trials.or(file.trials) {
        c.trials = t;
    }
    if let Some(s) = flags.seed.or(file.seed) {
        c.seed = s;
    }
    if let Some(p) = flags.precision.as_ref().or(file.precision.as_ref()) {
        c.precision = p.parse()?;
    }
    let sigma = flags.perturb_sigma.or(file.perturb_sigma);
    let extra = flags.perturb_extra.or(file.perturb_extra);
    if sigma.is_some() || extra.is_some() {
        let (s0, e0) = match c.formula {
            FormulaChoice::Perturbed { sigma, extra_zeros } => (sigma, extra_zeros),
            _ => (1e-3, 5),
        };
        c.formula = FormulaChoice::Perturbed { sigma: sigma.unwrap_or(s0), extra_zeros: extra.unwrap_or(e0) };
    }
    if let Some(path) = flags.formula.as_ref().or(file.formula.as_ref()) {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        c.formula = FormulaChoice::Given(BilinearFormula::from_json(&text)?);
    }
    if let Some(v) = flags.variant.as_ref().or(file.variant.as_ref()) {
        c.variant = v.parse()?;
    }
    let algs = if flags.algorithm.is_empty() { file.algorithm.clone() } else { flags.algorithm.clone() };
    if !algs.is_empty() {
        c.algorithms = algs.iter().map(|a| a.parse::<Algorithm>()).collect::<Result<_, _>>()?;
    }
    if let Some(s) = flags.schedule.as_ref().or(file.schedule.as_ref()) {
        c.schedule = randbc_core::rescale::parse_schedule(s)?;
    }
    let cps = if flags.checkpoints.is_empty() { file.checkpoints.clone() } else { flags.checkpoints.clone() };
    if !cps.is_empty() {
        c.checkpoints = Some(cps);
    }
    Ok(c)
}

fn run_path(out: &Path, r: usize) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "records".into());
    out.with_file_name(format!("{stem}.run-{r}.csv"))
}

fn write_records(records: &[experiments::TrialRecord], out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(records, BufWriter::new(f))?;
        }
        None => write_csv(records, io::stdout().lock())?,
    }
    Ok(())
}

fn run_experiment(args: ExperimentArgs) -> Result<()> {
    let experiment: Experiment = args.kind.parse()?;
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let config = build_config(experiment, &file, &args.overrides)?;
    let repeats = args.repeats.or(file.repeats).unwrap_or(1);
    let out = args.out.or(file.out.clone());
    if repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    if repeats == 1 {
        let records = experiments::run(&config)?;
        return write_records(&records, out.as_deref());
    }
    let Some(out) = out else {
        bail!("--repeats above 1 needs --out");
    };
    for r in 0..repeats {
        let cfg = ExperimentConfig { seed: repeat_seed(config.seed, r), ..config.clone() };
        write_records(&experiments::run(&cfg)?, Some(&run_path(&out, r + 1)))?;
    }
    Ok(())
}

fn replicate(args: ReplicateArgs) -> Result<()> {
    let list: Vec<Experiment> = if args.experiments.is_empty() {
        Experiment::ALL.to_vec()
    } else {
        args.experiments.iter().map(|e| e.parse()).collect::<Result<_, _>>()?
    };
    std::fs::create_dir_all(&args.out_dir)?;
    for experiment in list {
        let mut config = ExperimentConfig::defaults(experiment);
        config.matrix_kinds = MatrixKind::ALL.to_vec();
        config.seed = args.seed;
        let start = Instant::now();
        for r in 0..args.repeats {
            let cfg = ExperimentConfig { seed: repeat_seed(config.seed, r), ..config.clone() };
            let name = if args.repeats == 1 {
                format!("{}.csv", experiment.name())
            } else {
                format!("{}.run-{}.csv", experiment.name(), r + 1)
            };
            write_records(&experiments::run(&cfg)?, Some(&args.out_dir.join(name)))?;
        }
        eprintln!("{experiment}: {:.1}s", start.elapsed().as_secs_f64());
    }
    Ok(())
}

fn bounds(args: BoundsArgs) -> Result<()> {
    let mode: ScalarMode = args.precision.parse()?;
    let f = if args.exact {
        BilinearFormula::strassen()
    } else {
        BilinearFormula::strassen().perturb(args.perturb_sigma, args.perturb_extra, &mut rng::substream(args.seed, &[rng::role::FORMULA]))?
    };
    let size = 2 * args.m;
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["trial", "bound_name", "hypothesis_ok", "threshold", "bound_value", "empirical_value", "mu"])?;
    let mut emit = |trial: usize, r: &BoundReport| -> Result<()> {
        w.write_record([
            trial.to_string(),
            r.bound_name.clone(),
            r.hypothesis_ok.to_string(),
            r.threshold.map(|t| t.to_string()).unwrap_or_default(),
            format!("{:e}", r.bound_value),
            r.empirical_value.map(|e| format!("{e:e}")).unwrap_or_default(),
            r.mu.map(|m| m.to_string()).unwrap_or_default(),
        ])?;
        Ok(())
    };
    let sup = bound_sup_constant(&f, args.mu);
    emit(0, &BoundReport {
        bound_name: "sup_constant".into(),
        hypothesis_ok: sup.hypothesis_ok,
        threshold: Some(0.5),
        bound_value: sup.cap,
        empirical_value: Some(sup.constant),
        mu: Some(args.mu),
    })?;
    let d = f.diagnostics(0.0);
    emit(0, &BoundReport {
        bound_name: "kappa_excess_coefficient".into(),
        hypothesis_ok: true,
        threshold: None,
        bound_value: kappa_excess_coefficient(2, args.m, 7, mode.epsilon_machine(), d.weight_norm_product),
        empirical_value: None,
        mu: None,
    })?;
    for t in 0..args.trials {
        let spec = MatrixSpec { kind: MatrixKind::Gaussian, size, seed: rng::derive_seed(args.seed, &[rng::role::TRIAL, t as u64]) };
        let (a, b) = generate(&spec)?;
        let (a, b) = (a.map(|x| fl(x, mode).unwrap_or(0.0)), b.map(|x| fl(x, mode).unwrap_or(0.0)));
        let mut r = rng::substream(spec.seed, &[rng::role::LEVEL]);
        let plan = draw_plan(2, &mut r);
        let exact = a.naive_product(&b);
        let det = apply_bc(&f, &a, &b, ScalarMode::F64)?;
        let rnd = randomized_apply(&f, &plan, &a, &b, ScalarMode::F64)?;
        emit(t, &BoundReport {
            bound_name: "deterministic".into(),
            hypothesis_ok: true,
            threshold: None,
            bound_value: bound_deterministic(&f, &a, &b),
            empirical_value: Some(det.distance(&exact)),
            mu: None,
        })?;
        emit(t, &BoundReport {
            bound_name: "randomized".into(),
            hypothesis_ok: true,
            threshold: None,
            bound_value: bound_randomized(&f, &a, &b)?,
            empirical_value: Some(rnd.distance(&exact)),
            mu: None,
        })?;
        let det_fl = apply_bc(&f, &a, &b, mode)?;
        let rnd_fl = randomized_apply(&f, &plan, &a, &b, mode)?;
        for which in NumericalBound::ALL {
            if which == NumericalBound::Scalar && args.m != 1 {
                continue;
            }
            let empirical = match which {
                NumericalBound::Scalar | NumericalBound::Block => det_fl.distance(&det),
                NumericalBound::RandomizedBlock => rnd_fl.distance(&rnd),
                NumericalBound::TotalDeterministic => det_fl.distance(&exact),
                NumericalBound::TotalRandomized => enumerate_expectation(&f, &a, &b, mode)?.distance(&exact),
            };
            emit(t, &bound_numerical(&f, &a, &b, mode, which, args.threshold)?.with_empirical(empirical))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn formula(cmd: FormulaCommand) -> Result<()> {
    match cmd {
        FormulaCommand::Export { base, perturb_sigma, perturb_extra, seed, out } => {
            let mut f = match base.as_str() {
                "strassen" => BilinearFormula::strassen(),
                other => match other.strip_prefix("standard").and_then(|n| n.parse().ok()) {
                    Some(n) => BilinearFormula::standard(n)?,
                    None => bail!("unknown base formula '{other}'"),
                },
            };
            if let Some(sigma) = perturb_sigma {
                f = f.perturb(sigma, perturb_extra, &mut rng::substream(seed, &[rng::role::FORMULA]))?;
            }
            let text = f.to_json()?;
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => println!("{text}"),
            }
        }
        FormulaCommand::Inspect { path, tol } => {
            let f = BilinearFormula::from_json(&std::fs::read_to_string(&path)?)?;
            let d = f.diagnostics(tol);
            println!("n = {}, R = {}", f.n(), f.rank());
            println!("kappa = {:e}", d.kappa);
            println!("eta = {:e}", d.eta);
            println!("residual_norm = {:e}", d.residual_norm);
            println!("weight_norm_product = {}", d.weight_norm_product);
            println!("is_exact = {}", d.is_exact);
        }
    }
    Ok(())
}

fn multiply(args: MultiplyArgs) -> Result<()> {
    let algorithm: Algorithm = args.algorithm.parse()?;
    let mut config = ExperimentConfig::defaults(Experiment::S2Variants);
    config.size = args.size;
    config.seed = args.seed;
    config.precision = args.precision.parse()?;
    config.matrix_kinds = vec![args.matrix_type.parse()?];
    config.formula = match args.perturb_sigma {
        Some(sigma) => FormulaChoice::Perturbed { sigma, extra_zeros: 5 },
        None => FormulaChoice::Strassen,
    };
    let w = Workload::new(&config, config.matrix_kinds[0])?;
    let plan = draw_recursive_plan(2, args.recursions, &mut rng::substream(args.seed, &[rng::role::TRIAL]));
    let start = Instant::now();
    let c = w.run(algorithm, args.recursions, &config.schedule, Some(&plan))?;
    let elapsed = start.elapsed();
    let mut out = io::stdout().lock();
    writeln!(out, "algorithm = {algorithm}")?;
    writeln!(out, "precision = {}", config.precision)?;
    writeln!(out, "rel_error = {:e}", w.rel_error(&c))?;
    writeln!(out, "seconds = {:.4}", elapsed.as_secs_f64())?;
    Ok(())
}
