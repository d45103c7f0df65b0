//! Seeded experiment runners and CSV records.
//!
//! Four experiments are provided:
//!
//! * `s1_avg`: error of the running average of randomized products of an
//!   approximate formula, double precision.
//! * `s1_dist`: per-trial errors of the randomized approximate formula next to
//!   the deterministic recursion.
//! * `s2_avg`: as `s1_avg` with the exact formula in a low-precision environment,
//!   plus the classical product as reference line.
//! * `s2_variants`: per-trial errors of the sign/permutation variants, the
//!   deterministic recursion, the rescaled baseline and the classical product.
//!
//! Errors are relative Frobenius errors against the double-precision product of
//! the inputs as stored in the measured environment.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::formula::BilinearFormula;
use crate::matgen::{generate, MatrixKind, MatrixSpec};
use crate::matrix::Matrix;
use crate::multiply::{check_recursive_size, recursive_apply, standard_multiply};
use crate::precision::{fl, ScalarMode};
use crate::randomize::{draw_recursive_plan, recursive_randomized_apply, variant_recursive_plan, RecursivePlan, Variant};
use crate::rescale::{rescaled_multiply, ScalingStep, TWICE_OUTSIDE_INSIDE};
use crate::rng::{self, role};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Experiment {
    S1Avg,
    S1Dist,
    S2Avg,
    S2Variants,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [Experiment::S1Avg, Experiment::S1Dist, Experiment::S2Avg, Experiment::S2Variants];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::S1Avg => "s1_avg",
            Experiment::S1Dist => "s1_dist",
            Experiment::S2Avg => "s2_avg",
            Experiment::S2Variants => "s2_variants",
        }
    }

    pub fn is_averaging(self) -> bool {
        matches!(self, Experiment::S1Avg | Experiment::S2Avg)
    }

    /// Whether the approximate (perturbed) formula is used by default.
    pub fn uses_approximate_formula(self) -> bool {
        matches!(self, Experiment::S1Avg | Experiment::S1Dist)
    }

    pub fn default_algorithms(self) -> &'static [Algorithm] {
        match self {
            Experiment::S1Avg | Experiment::S1Dist => &[Algorithm::Deterministic, Algorithm::FullRandom],
            Experiment::S2Avg => &[Algorithm::Standard, Algorithm::Deterministic, Algorithm::FullRandom],
            Experiment::S2Variants => &Algorithm::ALL,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == norm)
            .ok_or_else(|| Error::Parse(format!("unknown experiment '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    Standard,
    Deterministic,
    FullRandom,
    SignOnly,
    PermOnly,
    Rescaled2xOI,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Standard,
        Algorithm::Deterministic,
        Algorithm::FullRandom,
        Algorithm::SignOnly,
        Algorithm::PermOnly,
        Algorithm::Rescaled2xOI,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Standard => "standard",
            Algorithm::Deterministic => "deterministic",
            Algorithm::FullRandom => "full_random",
            Algorithm::SignOnly => "sign_only",
            Algorithm::PermOnly => "perm_only",
            Algorithm::Rescaled2xOI => "rescaled_2xoi",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Algorithm::FullRandom => Some(Variant::Full),
            Algorithm::SignOnly => Some(Variant::SignOnly),
            Algorithm::PermOnly => Some(Variant::PermOnly),
            _ => None,
        }
    }

    pub fn from_variant(v: Variant) -> Algorithm {
        match v {
            Variant::Full => Algorithm::FullRandom,
            Variant::SignOnly => Algorithm::SignOnly,
            Variant::PermOnly => Algorithm::PermOnly,
            Variant::None => Algorithm::Deterministic,
        }
    }

    pub fn is_randomized(self) -> bool {
        self.variant().is_some()
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        let alias = match norm.as_str() {
            "full" | "random" => "full_random",
            "sign" => "sign_only",
            "perm" => "perm_only",
            "rescaled" => "rescaled_2xoi",
            other => other,
        };
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == alias)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm '{s}'")))
    }
}

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub experiment: Experiment,
    pub algorithm: Algorithm,
    pub matrix_type: MatrixKind,
    pub n: usize,
    pub q: usize,
    pub trial: usize,
    pub seed: u64,
    pub rel_error: f64,
    pub running_n: usize,
}

pub const CSV_HEADER: [&str; 9] = ["experiment", "algorithm", "matrix_type", "n", "Q", "trial", "seed", "rel_error", "running_n"];

impl TrialRecord {
    fn sort_key(&self) -> (Experiment, MatrixKind, usize, Algorithm, usize, usize) {
        (self.experiment, self.matrix_type, self.q, self.algorithm, self.trial, self.running_n)
    }

    fn to_fields(&self) -> [String; 9] {
        [
            self.experiment.name().to_string(),
            self.algorithm.name().to_string(),
            self.matrix_type.name().to_string(),
            self.n.to_string(),
            self.q.to_string(),
            self.trial.to_string(),
            self.seed.to_string(),
            format!("{:e}", self.rel_error),
            self.running_n.to_string(),
        ]
    }

    fn from_fields(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != CSV_HEADER.len() {
            return Err(Error::Parse(format!("expected {} fields, got {}", CSV_HEADER.len(), rec.len())));
        }
        let num = |i: usize| -> Result<usize> {
            rec[i].parse().map_err(|_| Error::Parse(format!("bad {} '{}'", CSV_HEADER[i], &rec[i])))
        };
        Ok(TrialRecord {
            experiment: rec[0].parse()?,
            algorithm: rec[1].parse()?,
            matrix_type: rec[2].parse()?,
            n: num(3)?,
            q: num(4)?,
            trial: num(5)?,
            seed: rec[6].parse().map_err(|_| Error::Parse(format!("bad seed '{}'", &rec[6])))?,
            rel_error: rec[7].parse().map_err(|_| Error::Parse(format!("bad rel_error '{}'", &rec[7])))?,
            running_n: num(8)?,
        })
    }
}

pub fn write_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(r.to_fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<TrialRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected CSV header {:?}", header)));
    }
    rd.records().map(|r| TrialRecord::from_fields(&r?)).collect()
}

/// Which formula the Strassen-based algorithms use.
#[derive(Clone, Debug, PartialEq)]
pub enum FormulaChoice {
    Strassen,
    /// Strassen perturbed with the given standard deviation and extra zero entries,
    /// drawn from the experiment's formula stream.
    Perturbed { sigma: f64, extra_zeros: usize },
    Given(BilinearFormula),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub matrix_kinds: Vec<MatrixKind>,
    pub size: usize,
    pub recursions: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub precision: ScalarMode,
    pub formula: FormulaChoice,
    /// Variant used by the averaging and distribution experiments.
    pub variant: Variant,
    pub algorithms: Vec<Algorithm>,
    /// Running-average checkpoints; `None` uses [`checkpoint_grid`].
    pub checkpoints: Option<Vec<usize>>,
    pub schedule: Vec<ScalingStep>,
}

impl ExperimentConfig {
    /// Full-scale defaults for each experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let (size, qmax, trials, precision) = match experiment {
            Experiment::S1Avg => (80, 3, 10_000, ScalarMode::F64),
            Experiment::S1Dist => (320, 5, 100, ScalarMode::F64),
            Experiment::S2Avg => (80, 3, 10_000, ScalarMode::F32),
            Experiment::S2Variants => (320, 5, 100, ScalarMode::F32),
        };
        let formula = if experiment.uses_approximate_formula() {
            FormulaChoice::Perturbed { sigma: 1e-3, extra_zeros: 5 }
        } else {
            FormulaChoice::Strassen
        };
        ExperimentConfig {
            experiment,
            matrix_kinds: vec![MatrixKind::Gaussian],
            size,
            recursions: (1..=qmax).collect(),
            trials,
            seed: 0,
            precision,
            formula,
            variant: Variant::Full,
            algorithms: experiment.default_algorithms().to_vec(),
            checkpoints: None,
            schedule: TWICE_OUTSIDE_INSIDE.to_vec(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trials must be positive".into()));
        }
        if self.matrix_kinds.is_empty() || self.recursions.is_empty() {
            return Err(Error::InvalidArgument("need at least one matrix type and one recursion depth".into()));
        }
        for &q in &self.recursions {
            check_recursive_size(self.size, 2, q)?;
        }
        if let Some(cp) = &self.checkpoints {
            if cp.iter().any(|&c| c == 0 || c > self.trials) {
                return Err(Error::InvalidArgument("checkpoints must lie in 1..=trials".into()));
            }
        }
        Ok(())
    }

    fn checkpoint_list(&self) -> Vec<usize> {
        let mut cp = self.checkpoints.clone().unwrap_or_else(|| checkpoint_grid(self.trials));
        cp.sort_unstable();
        cp.dedup();
        cp
    }

    fn wants(&self, a: Algorithm) -> bool {
        self.algorithms.contains(&a)
    }
}

/// Seed of repeat `r` of an experiment with master seed `master`; repeat 0 is the master itself.
pub fn repeat_seed(master: u64, r: usize) -> u64 {
    if r == 0 {
        master
    } else {
        rng::derive_seed(master, &[role::REPEAT, r as u64])
    }
}

/// Seed of the matrix pair of family `kind`.
pub fn matrix_seed(master: u64, kind: MatrixKind) -> u64 {
    rng::derive_seed(master, &[role::MATRIX_A, kind as u64])
}

/// Seed of randomized trial `trial` at depth `q`. Its stream draws the plan.
pub fn trial_seed(master: u64, kind: MatrixKind, q: usize, trial: usize) -> u64 {
    rng::derive_seed(master, &[role::TRIAL, kind as u64, q as u64, trial as u64])
}

/// `1, 2, ..., 10, 20, ..., 100, 200, ...` up to and including `total`.
pub fn checkpoint_grid(total: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut decade = 1usize;
    'outer: loop {
        for k in 1..10 {
            let c = k * decade;
            if c > total {
                break 'outer;
            }
            out.push(c);
        }
        match decade.checked_mul(10) {
            Some(d) => decade = d,
            None => break,
        }
    }
    if out.last() != Some(&total) {
        out.push(total);
    }
    out
}

/// The formula a configuration resolves to.
pub fn resolve_formula(config: &ExperimentConfig) -> Result<BilinearFormula> {
    match &config.formula {
        FormulaChoice::Strassen => Ok(BilinearFormula::strassen()),
        FormulaChoice::Perturbed { sigma, extra_zeros } => {
            let mut r = rng::substream(config.seed, &[role::FORMULA]);
            BilinearFormula::strassen().perturb(*sigma, *extra_zeros, &mut r)
        }
        FormulaChoice::Given(f) => Ok(f.clone()),
    }
}

/// Inputs, reference product and formula shared by every trial of one family.
#[derive(Clone, Debug)]
pub struct Workload {
    pub formula: BilinearFormula,
    pub kind: MatrixKind,
    pub matrix_seed: u64,
    /// Inputs as stored in the measured environment, carried as doubles.
    pub a: Matrix,
    pub b: Matrix,
    /// Double-precision product of `a` and `b`.
    pub reference: Matrix,
    pub mode: ScalarMode,
}

impl Workload {
    pub fn new(config: &ExperimentConfig, kind: MatrixKind) -> Result<Self> {
        let formula = resolve_formula(config)?;
        let seed = matrix_seed(config.seed, kind);
        let (a, b) = generate(&MatrixSpec { kind, size: config.size, seed })?;
        let mode = config.precision;
        let round = |m: &Matrix| -> Result<Matrix> {
            Matrix::from_vec(m.rows(), m.cols(), m.data().iter().map(|&x| fl(x, mode)).collect::<Result<_>>()?)
        };
        let (a, b) = (round(&a)?, round(&b)?);
        let reference = standard_multiply(&a, &b, ScalarMode::F64)?;
        if reference.frobenius_norm() == 0.0 {
            return Err(Error::DegenerateInput("reference product is zero".into()));
        }
        Ok(Workload { formula, kind, matrix_seed: seed, a, b, reference, mode })
    }

    /// Run one algorithm. Randomized algorithms need the base plan of the trial.
    pub fn run(&self, algorithm: Algorithm, q: usize, schedule: &[ScalingStep], plan: Option<&RecursivePlan>) -> Result<Matrix> {
        match algorithm {
            Algorithm::Standard => standard_multiply(&self.a, &self.b, self.mode),
            Algorithm::Deterministic => recursive_apply(&self.formula, &self.a, &self.b, q, self.mode),
            Algorithm::Rescaled2xOI => rescaled_multiply(&self.formula, &self.a, &self.b, q, schedule, self.mode),
            randomized => {
                let plan = plan.ok_or_else(|| Error::InvalidArgument(format!("{randomized} needs a plan")))?;
                let plan = variant_recursive_plan(plan, randomized.variant().unwrap_or(Variant::Full));
                recursive_randomized_apply(&self.formula, &plan, &self.a, &self.b, self.mode)
            }
        }
    }

    pub fn rel_error(&self, c: &Matrix) -> f64 {
        c.relative_error(&self.reference)
    }

    /// The base plan of a trial, drawn from its own stream.
    pub fn plan(&self, trial_seed: u64, q: usize) -> RecursivePlan {
        draw_recursive_plan(self.formula.n(), q, &mut rng::stream(trial_seed))
    }
}

#[allow(clippy::too_many_arguments)]
fn record(config: &ExperimentConfig, algorithm: Algorithm, kind: MatrixKind, q: usize, trial: usize, seed: u64, rel_error: f64, running_n: usize) -> TrialRecord {
    TrialRecord {
        experiment: config.experiment,
        algorithm,
        matrix_type: kind,
        n: config.size,
        q,
        trial,
        seed,
        rel_error,
        running_n,
    }
}

/// Deterministic records (standard, deterministic, rescaled) of one family.
fn fixed_records(config: &ExperimentConfig, w: &Workload) -> Result<Vec<TrialRecord>> {
    let mut jobs: Vec<(Algorithm, usize)> = Vec::new();
    if config.wants(Algorithm::Standard) {
        jobs.push((Algorithm::Standard, 0));
    }
    for &q in &config.recursions {
        for alg in [Algorithm::Deterministic, Algorithm::Rescaled2xOI] {
            if config.wants(alg) {
                jobs.push((alg, q));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(alg, q)| {
            let c = w.run(alg, q, &config.schedule, None)?;
            Ok(record(config, alg, w.kind, q, 0, w.matrix_seed, w.rel_error(&c), 1))
        })
        .collect()
}

/// Per-trial records for every randomized algorithm of the configuration.
fn distribution_records(config: &ExperimentConfig, w: &Workload, algorithms: &[Algorithm]) -> Result<Vec<TrialRecord>> {
    let jobs: Vec<(usize, usize)> = config
        .recursions
        .iter()
        .flat_map(|&q| (0..config.trials).map(move |t| (q, t)))
        .collect();
    let nested: Vec<Vec<TrialRecord>> = jobs
        .into_par_iter()
        .map(|(q, t)| {
            let seed = trial_seed(config.seed, w.kind, q, t);
            let plan = w.plan(seed, q);
            algorithms
                .iter()
                .map(|&alg| {
                    let c = w.run(alg, q, &config.schedule, Some(&plan))?;
                    Ok(record(config, alg, w.kind, q, t, seed, w.rel_error(&c), 1))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

const AVERAGE_CHUNK: usize = 64;

/// Running-average records for one randomized algorithm.
fn average_records(config: &ExperimentConfig, w: &Workload, algorithm: Algorithm) -> Result<Vec<TrialRecord>> {
    let checkpoints = config.checkpoint_list();
    let last = *checkpoints.last().unwrap_or(&config.trials);
    let mut out = Vec::new();
    for &q in &config.recursions {
        let size = config.size;
        let mut sum = vec![0.0f64; size * size];
        let mut next = checkpoints.iter().peekable();
        let mut start = 0;
        while start < last {
            let end = (start + AVERAGE_CHUNK).min(last);
            let products: Vec<(u64, Matrix)> = (start..end)
                .into_par_iter()
                .map(|t| {
                    let seed = trial_seed(config.seed, w.kind, q, t);
                    let plan = w.plan(seed, q);
                    Ok((seed, w.run(algorithm, q, &config.schedule, Some(&plan))?))
                })
                .collect::<Result<_>>()?;
            for (offset, (seed, c)) in products.into_iter().enumerate() {
                for (s, x) in sum.iter_mut().zip(c.data()) {
                    *s += x;
                }
                let count = start + offset + 1;
                if next.peek() == Some(&&count) {
                    next.next();
                    let avg = Matrix::from_vec(size, size, sum.iter().map(|s| s / count as f64).collect())?;
                    out.push(record(config, algorithm, w.kind, q, count - 1, seed, w.rel_error(&avg), count));
                }
            }
            start = end;
        }
    }
    Ok(out)
}

/// Run an experiment and return its records in deterministic order.
pub fn run(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let mut records = Vec::new();
    for &kind in &config.matrix_kinds {
        let w = Workload::new(config, kind)?;
        records.extend(fixed_records(config, &w)?);
        match config.experiment {
            Experiment::S1Avg | Experiment::S2Avg => {
                let alg = Algorithm::from_variant(config.variant);
                if alg.is_randomized() && config.algorithms.iter().any(|a| a.is_randomized()) {
                    records.extend(average_records(config, &w, alg)?);
                }
            }
            Experiment::S1Dist => {
                let alg = Algorithm::from_variant(config.variant);
                if alg.is_randomized() && config.algorithms.iter().any(|a| a.is_randomized()) {
                    records.extend(distribution_records(config, &w, &[alg])?);
                }
            }
            Experiment::S2Variants => {
                let algs: Vec<Algorithm> = Algorithm::ALL.into_iter().filter(|a| a.is_randomized() && config.wants(*a)).collect();
                if !algs.is_empty() {
                    records.extend(distribution_records(config, &w, &algs)?);
                }
            }
        }
    }
    records.sort_by_key(|r| r.sort_key());
    Ok(records)
}

/// Recompute a record's error from the configuration and its seed alone.
pub fn recompute(config: &ExperimentConfig, rec: &TrialRecord) -> Result<f64> {
    let w = Workload::new(config, rec.matrix_type)?;
    if !rec.algorithm.is_randomized() {
        return Ok(w.rel_error(&w.run(rec.algorithm, rec.q, &config.schedule, None)?));
    }
    if rec.running_n <= 1 {
        let plan = w.plan(rec.seed, rec.q);
        return Ok(w.rel_error(&w.run(rec.algorithm, rec.q, &config.schedule, Some(&plan))?));
    }
    let size = config.size;
    let mut sum = vec![0.0f64; size * size];
    for t in 0..rec.running_n {
        let plan = w.plan(trial_seed(config.seed, rec.matrix_type, rec.q, t), rec.q);
        let c = w.run(rec.algorithm, rec.q, &config.schedule, Some(&plan))?;
        for (s, x) in sum.iter_mut().zip(c.data()) {
            *s += x;
        }
    }
    let avg = Matrix::from_vec(size, size, sum.iter().map(|s| s / rec.running_n as f64).collect())?;
    Ok(w.rel_error(&avg))
}

/// Median of a non-empty sample (mean of the two middle values for even sizes).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[mid] } else { 0.5 * (v[mid - 1] + v[mid]) })
}

/// Least-squares slope of `log10 y` against `log10 x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(experiment: Experiment) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(experiment);
        c.size = 16;
        c.recursions = vec![1, 2];
        c.trials = 12;
        c.seed = 7;
        c
    }

    #[test]
    fn grid() {
        assert_eq!(checkpoint_grid(1), vec![1]);
        assert_eq!(checkpoint_grid(25), vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20, 25]);
        let g = checkpoint_grid(10_000);
        assert_eq!(g.len(), 37);
        assert_eq!(*g.last().unwrap(), 10_000);
    }

    #[test]
    fn names_parse() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert_eq!("s2-variants".parse::<Experiment>().unwrap(), Experiment::S2Variants);
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert_eq!("rescaled-2xoi".parse::<Algorithm>().unwrap(), Algorithm::Rescaled2xOI);
    }

    #[test]
    fn averaging_first_checkpoint_is_single_trial_error() {
        let c = small(Experiment::S1Avg);
        let recs = run(&c).unwrap();
        let first = recs.iter().find(|r| r.algorithm == Algorithm::FullRandom && r.q == 1 && r.running_n == 1).unwrap();
        assert_eq!(recompute(&c, first).unwrap(), first.rel_error);
        let w = Workload::new(&c, MatrixKind::Gaussian).unwrap();
        let plan = w.plan(first.seed, 1);
        let single = w.rel_error(&w.run(Algorithm::FullRandom, 1, &c.schedule, Some(&plan)).unwrap());
        assert_eq!(single, first.rel_error);
        let last = recs.iter().rfind(|r| r.q == 2 && r.algorithm == Algorithm::FullRandom).unwrap();
        assert_eq!(last.running_n, 12);
        assert_eq!(recompute(&c, last).unwrap(), last.rel_error);
    }

    #[test]
    fn reproducible_csv() {
        let mut c = small(Experiment::S2Variants);
        c.trials = 3;
        c.matrix_kinds = vec![MatrixKind::Uniform, MatrixKind::Adversarial1];
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_csv(&run(&c).unwrap(), &mut x).unwrap();
        write_csv(&run(&c).unwrap(), &mut y).unwrap();
        assert_eq!(x, y);
        let back = read_csv(x.as_slice()).unwrap();
        assert_eq!(back.len(), 2 * (1 + 2 * 2 + 2 * 3 * 3));
        assert!(String::from_utf8(x).unwrap().starts_with("experiment,algorithm,matrix_type,n,Q,trial,seed,rel_error,running_n\n"));
        for r in back.iter().filter(|r| r.trial == 1) {
            assert_eq!(recompute(&c, r).unwrap(), r.rel_error);
        }
    }

    #[test]
    fn bad_sizes_are_rejected() {
        let mut c = small(Experiment::S1Dist);
        c.size = 18;
        c.recursions = vec![2];
        assert!(run(&c).is_err());
    }

    #[test]
    fn stats_helpers() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&[]), None);
        let pts: Vec<(f64, f64)> = (1..50).map(|i| (i as f64, 3.0 / (i as f64).sqrt())).collect();
        assert!((loglog_slope(&pts).unwrap() + 0.5).abs() < 1e-12);
    }
}
