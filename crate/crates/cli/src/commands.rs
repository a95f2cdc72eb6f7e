use std::path::{Path, PathBuf};

use serde::Serialize;
use spade_core::chernoff::{
    chernoff_exponent, direct_imaging_chernoff_asymptotic, quantum_bound,
    spade_chernoff_asymptotic, AsymptoticBranch,
};
use spade_core::hypothesis::{
    error_probs_exact, error_probs_gaussian, gamma_coefficient, plan_experiment, ErrorMethod,
    TestSpec,
};
use spade_core::montecarlo::{
    random_crosstalk, random_ensemble, simulate_decisions, summarize, DecisionTally, EnsembleRow,
};
use spade_core::optics::{mode_probabilities, CrosstalkMatrix, Priors};

use crate::args::{Cli, Command, ConfigFile, CurveArgs, PlanArgs, SimArgs, SweepArgs};
use crate::error::CliError;
use crate::grid::Grid;

const CHERNOFF_TOL: f64 = 1e-10;
const DEFAULT_X_GRID: &str = "3e-3:0.5:60:log";
const DEFAULT_N_GRID: &str = "1e2:1e7:60:log";
const DEFAULT_X_LIST: &str = "0.02,0.03,0.05,0.1";

/// Settings shared by every command after merging flags and config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelChoice,
    pub epsilon2: f64,
    pub d_modes: Option<usize>,
    pub seed: u64,
    pub priors: Priors,
    pub x_grid: Grid,
    pub n_grid: Grid,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelChoice {
    Identity,
    Uniform,
    UnitaryRandom,
    File(PathBuf),
}

impl std::str::FromStr for ModelChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "identity" => Ok(ModelChoice::Identity),
            "uniform" => Ok(ModelChoice::Uniform),
            "unitary_random" | "unitary-random" => Ok(ModelChoice::UnitaryRandom),
            _ => match s.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(ModelChoice::File(PathBuf::from(path))),
                _ => Err(CliError::Usage(format!(
                    "unknown model '{s}' (identity, uniform, unitary_random or file:PATH)"
                ))),
            },
        }
    }
}

impl RunConfig {
    pub fn d(&self) -> usize {
        self.d_modes.unwrap_or(2)
    }

    /// The crosstalk matrix for single-matrix commands; random models use
    /// the configured seed.
    pub fn crosstalk(&self) -> Result<CrosstalkMatrix, CliError> {
        self.crosstalk_with_seed(self.seed)
    }

    fn crosstalk_with_seed(&self, seed: u64) -> Result<CrosstalkMatrix, CliError> {
        let d = self.d();
        let c = match &self.model {
            ModelChoice::Identity => CrosstalkMatrix::identity(d)?,
            ModelChoice::Uniform => CrosstalkMatrix::uniform(d, self.epsilon2)?,
            ModelChoice::UnitaryRandom => random_crosstalk(d, self.epsilon2, seed)?,
            ModelChoice::File(path) => load_matrix(path)?,
        };
        if let Some(want) = self.d_modes {
            if c.d() != want {
                return Err(CliError::Usage(format!(
                    "matrix has D = {}, but --dmax is {want}",
                    c.d()
                )));
            }
        }
        Ok(c)
    }
}

fn load_matrix(path: &Path) -> Result<CrosstalkMatrix, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Usage(format!(
            "cannot read crosstalk file {}: {e}",
            path.display()
        ))
    })?;
    Ok(CrosstalkMatrix::from_json(&text)?)
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required")))
}

fn parse_test(text: &str) -> Result<TestSpec, CliError> {
    text.parse()
        .map_err(|e: spade_core::Error| CliError::Usage(e.to_string()))
}

/// CSV float: 17 significant digits, round-trip exact.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>, CliError> {
    w.into_inner().map_err(|e| CliError::Io(e.into_error()))
}

/// Command output: where it goes and its bytes.
pub struct Output {
    pub path: Option<PathBuf>,
    pub bytes: Vec<u8>,
}

pub fn run(cli: Cli) -> Result<Output, CliError> {
    let cfg = match &cli.common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let c = &cli.common;
    let model: ModelChoice = cfg
        .pick(c.model.clone(), "model")?
        .as_deref()
        .unwrap_or("uniform")
        .parse()?;
    let epsilon2 = cfg.pick(c.epsilon2, "epsilon2")?.unwrap_or(0.01);
    let prior_h0 = cfg.pick(c.prior_h0, "prior-h0")?.unwrap_or(0.5);
    let run = RunConfig {
        model,
        epsilon2,
        d_modes: cfg.pick(c.dmax, "dmax")?,
        seed: cfg.pick(c.seed, "seed")?.unwrap_or(0),
        priors: Priors::new(prior_h0).map_err(|e| CliError::Usage(e.to_string()))?,
        x_grid: cfg
            .pick(c.x_grid.clone(), "x-grid")?
            .as_deref()
            .unwrap_or(DEFAULT_X_GRID)
            .parse()?,
        n_grid: cfg
            .pick(c.n_grid.clone(), "n-grid")?
            .as_deref()
            .unwrap_or(DEFAULT_N_GRID)
            .parse()?,
        out: cfg.pick(c.out.clone(), "out")?,
    };
    if !(epsilon2 >= 0.0 && epsilon2.is_finite()) {
        return Err(CliError::Usage(format!(
            "epsilon2 = {epsilon2} must be a non-negative number"
        )));
    }
    if run.d_modes.is_some_and(|d| d < 2) {
        return Err(CliError::Usage("dmax must be at least 2".into()));
    }
    let bytes = match &cli.command {
        Command::ChernoffSweep(a) => chernoff_sweep(&run, a, &cfg)?,
        Command::ErrorCurves(a) => error_curves(&run, a, &cfg)?,
        Command::Plan(a) => plan(&run, a, &cfg)?,
        Command::Simulate(a) => simulate(&run, a, &cfg)?,
    };
    Ok(Output {
        path: run.out,
        bytes,
    })
}

pub const SWEEP_HEADER: [&str; 8] = [
    "x",
    "xi_median",
    "xi_q25",
    "xi_q75",
    "xi_quantum",
    "xi_di_asymptotic",
    "xi_small_branch",
    "xi_large_branch",
];

fn chernoff_sweep(
    run: &RunConfig,
    args: &SweepArgs,
    cfg: &ConfigFile,
) -> Result<Vec<u8>, CliError> {
    let samples = cfg.pick(args.samples, "samples")?.unwrap_or(500);
    let ensemble_out: Option<PathBuf> = cfg.pick(args.ensemble_out.clone(), "ensemble-out")?;
    if samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let ensemble = match run.model {
        ModelChoice::UnitaryRandom => random_ensemble(run.d(), run.epsilon2, samples, run.seed)?,
        _ => vec![run.crosstalk()?],
    };
    let h0: Vec<_> = ensemble
        .iter()
        .map(|c| mode_probabilities(c, 0.0))
        .collect::<Result<_, _>>()?;
    let p0_median = summarize(&h0.iter().map(|d| d.p10()).collect::<Vec<_>>())?.median;

    let mut w = csv_writer();
    w.write_record(SWEEP_HEADER)?;
    let mut members = Vec::new();
    for x in run.x_grid.points() {
        let mut xis = Vec::with_capacity(ensemble.len());
        for (i, (c, d0)) in ensemble.iter().zip(&h0).enumerate() {
            let d1 = mode_probabilities(c, x)?;
            let xi = chernoff_exponent(d0.as_slice(), d1.as_slice(), CHERNOFF_TOL)?.xi;
            xis.push(xi);
            members.push(EnsembleRow {
                sample_index: i,
                seed: c.seed().unwrap_or(run.seed),
                realized_epsilon2: c.realized_epsilon2(),
                p0: d0.p10(),
                x,
                xi,
            });
        }
        let stats = summarize(&xis)?;
        // The expansions are undefined outside their regime; those cells are NaN.
        let branch = |b| {
            spade_chernoff_asymptotic(x, p0_median, b)
                .map(|r| r.xi)
                .unwrap_or(f64::NAN)
        };
        w.write_record([
            num(x),
            num(stats.median),
            num(stats.q25),
            num(stats.q75),
            num(quantum_bound(x)?.xi),
            num(direct_imaging_chernoff_asymptotic(x)?.xi),
            num(branch(AsymptoticBranch::XMuchLess)),
            num(branch(AsymptoticBranch::XMuchGreater)),
        ])?;
    }
    if let Some(path) = ensemble_out {
        let mut e = csv_writer();
        e.write_record(EnsembleRow::CSV_HEADER.split(','))?;
        for row in &members {
            e.write_record(row.csv_row().split(','))?;
        }
        std::fs::write(&path, finish(e)?)
            .map_err(|err| CliError::Usage(format!("cannot write {}: {err}", path.display())))?;
    }
    finish(w)
}

pub const CURVE_HEADER: [&str; 6] = ["N", "x", "test", "alpha", "beta", "pe"];

fn error_curves(run: &RunConfig, args: &CurveArgs, cfg: &ConfigFile) -> Result<Vec<u8>, CliError> {
    let spec = parse_test(&required(cfg.pick(args.test.clone(), "test")?, "test")?)?;
    if matches!(spec, TestSpec::FullLrt { .. }) {
        return Err(CliError::Usage(
            "full-lrt has no closed-form error curve; use simulate".into(),
        ));
    }
    let x_list = cfg
        .pick(args.x_list.clone(), "x-list")?
        .unwrap_or_else(|| DEFAULT_X_LIST.into());
    let xs = x_list
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| *x > 0.0 && x.is_finite())
        })
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| {
            CliError::Usage(format!(
                "--x-list '{x_list}' must be positive numbers separated by commas"
            ))
        })?;
    let method: ErrorMethod = cfg
        .pick::<String>(args.method.clone(), "method")?
        .as_deref()
        .unwrap_or("gaussian")
        .parse()
        .map_err(|e: spade_core::Error| CliError::Usage(e.to_string()))?;
    if method == ErrorMethod::MonteCarlo {
        return Err(CliError::Usage(
            "error-curves supports exact_binomial and gaussian; use simulate".into(),
        ));
    }
    let c = run.crosstalk()?;
    let p0 = mode_probabilities(&c, 0.0)?.p10();
    let gamma = gamma_coefficient(&c);
    let ns = run.n_grid.integer_points()?;

    let mut w = csv_writer();
    w.write_record(CURVE_HEADER)?;
    let label = spec.to_string();
    for &x in &xs {
        let px = mode_probabilities(&c, x)?.p10();
        for &n in &ns {
            let r = match method {
                ErrorMethod::ExactBinomial => {
                    error_probs_exact(&spec, n, p0, px, gamma, run.priors)?
                }
                _ => error_probs_gaussian(&spec, n, p0, px, gamma, run.priors)?,
            };
            w.write_record([
                n.to_string(),
                num(x),
                label.clone(),
                num(r.alpha),
                num(r.beta),
                num(r.pe),
            ])?;
        }
    }
    finish(w)
}

#[derive(Debug, Serialize)]
struct PlanOutput {
    n_required: u64,
    threshold: f64,
    p0: f64,
    gamma: f64,
    pe_at_n: f64,
    method: &'static str,
}

fn plan(run: &RunConfig, args: &PlanArgs, cfg: &ConfigFile) -> Result<Vec<u8>, CliError> {
    let x_min = required(cfg.pick(args.xmin, "xmin")?, "xmin")?;
    let pe_max = required(cfg.pick(args.pe_max, "pe-max")?, "pe-max")?;
    let c = run.crosstalk()?;
    let p0 = mode_probabilities(&c, 0.0)?.p10();
    let plan = plan_experiment(x_min, p0, gamma_coefficient(&c), pe_max)?;
    let out = PlanOutput {
        n_required: plan.n_required,
        threshold: plan.threshold,
        p0: plan.p0,
        gamma: plan.gamma,
        pe_at_n: plan.pe_at_n,
        method: "gaussian+exact-verify",
    };
    let mut bytes = serde_json::to_vec(&out).map_err(|e| CliError::Io(e.into()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub const SIM_HEADER: [&str; 4] = ["trial_block", "alpha_hat", "beta_hat", "pe_hat"];

fn simulate(run: &RunConfig, args: &SimArgs, cfg: &ConfigFile) -> Result<Vec<u8>, CliError> {
    let spec = parse_test(&required(cfg.pick(args.test.clone(), "test")?, "test")?)?;
    let x = required(cfg.pick(args.x, "x")?, "x")?;
    let n = required(cfg.pick(args.n, "n")?, "n")?;
    let trials = cfg.pick(args.trials, "trials")?.unwrap_or(10_000);
    let blocks = cfg.pick(args.blocks, "blocks")?.unwrap_or(10);
    if n == 0 {
        return Err(CliError::Usage("--n must be positive".into()));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(CliError::Usage(format!("--x = {x} must be non-negative")));
    }
    if trials == 0 || blocks == 0 || blocks > trials {
        return Err(CliError::Usage("need trials >= blocks >= 1".into()));
    }
    let c = run.crosstalk()?;

    let mut w = csv_writer();
    w.write_record(SIM_HEADER)?;
    let mut all = DecisionTally::default();
    for b in 0..blocks {
        let range = (b * trials / blocks)..((b + 1) * trials / blocks);
        let tally = simulate_decisions(&spec, &c, x, n, run.seed, range)?;
        all.trials += tally.trials;
        all.false_alarms += tally.false_alarms;
        all.misses += tally.misses;
        let r = tally.report(n, run.priors);
        w.write_record([b.to_string(), num(r.alpha), num(r.beta), num(r.pe)])?;
    }
    let r = all.report(n, run.priors);
    w.write_record(["all".to_string(), num(r.alpha), num(r.beta), num(r.pe)])?;
    let analytic = match spec {
        TestSpec::FullLrt { .. } => [f64::NAN; 3],
        _ => {
            let p0 = mode_probabilities(&c, 0.0)?.p10();
            let px = mode_probabilities(&c, x)?.p10();
            let a = error_probs_exact(&spec, n, p0, px, gamma_coefficient(&c), run.priors)?;
            [a.alpha, a.beta, a.pe]
        }
    };
    w.write_record([
        "analytic".to_string(),
        num(analytic[0]),
        num(analytic[1]),
        num(analytic[2]),
    ])?;
    finish(w)
}
