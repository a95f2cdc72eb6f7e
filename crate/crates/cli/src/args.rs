use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::error::CliError;

/// Figure data for crosstalk-limited SPADE source discrimination.
///
/// Every option can also be set in a config file of `key = value` lines,
/// keyed by the long flag name without its leading dashes (for example
/// `epsilon2 = 0.0033` or `x-grid = 3e-3:0.5:60:log`). Flags override the
/// file. Exit status: 0 on success, 1 on usage or validation errors, 2 on
/// numerical failures.
#[derive(Debug, Parser)]
#[command(name = "spade", version)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Config file with `key = value` lines; `#` starts a comment.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Crosstalk model: identity, uniform, unitary_random or file:PATH (JSON). [default: uniform]
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Crosstalk strength epsilon^2. [default: 0.01]
    #[arg(long, global = true)]
    pub epsilon2: Option<f64>,
    /// Modes per axis D (D^2 outputs). [default: 2]
    #[arg(long, global = true)]
    pub dmax: Option<usize>,
    /// Seed for random crosstalk and Monte Carlo streams. [default: 0]
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Prior probability of the single-source hypothesis. [default: 0.5]
    #[arg(long, global = true)]
    pub prior_h0: Option<f64>,
    /// Half-separation grid start:stop:count:lin|log. [default: 3e-3:0.5:60:log]
    #[arg(long, global = true)]
    pub x_grid: Option<String>,
    /// Photon-number grid start:stop:count:lin|log, rounded to integers. [default: 1e2:1e7:60:log]
    #[arg(long, global = true)]
    pub n_grid: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Chernoff exponents against x: ensemble median and quartiles, quantum
    /// bound, direct-imaging asymptote and the two SPADE expansions.
    ChernoffSweep(SweepArgs),
    /// alpha, beta and probability of error against N for one test.
    ErrorCurves(CurveArgs),
    /// Photons needed for a target worst-case probability of error (JSON).
    Plan(PlanArgs),
    /// Monte Carlo error rates in trial blocks, with the analytic values.
    Simulate(SimArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Ensemble size for unitary_random. [default: 500]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Also write per-member exponents (sample_index,seed,realized_epsilon2,p0,x,xi).
    #[arg(long, value_name = "PATH")]
    pub ensemble_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Test: original, naive, zeta(c,a), semi(x_min), binary-lrt(x).
    #[arg(long)]
    pub test: Option<String>,
    /// Comma-separated true half-separations. [default: 0.02,0.03,0.05,0.1]
    #[arg(long)]
    pub x_list: Option<String>,
    /// exact_binomial or gaussian. [default: gaussian]
    #[arg(long)]
    pub method: Option<String>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Smallest half-separation the test must resolve.
    #[arg(long)]
    pub xmin: Option<f64>,
    /// Target probability of error, below 1/2.
    #[arg(long)]
    pub pe_max: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Test: original, naive, zeta(c,a), semi(x_min), binary-lrt(x), full-lrt(x).
    #[arg(long)]
    pub test: Option<String>,
    /// True half-separation under the two-source hypothesis.
    #[arg(long)]
    pub x: Option<f64>,
    /// Photons per record.
    #[arg(long)]
    pub n: Option<u64>,
    /// Trials per hypothesis. [default: 10000]
    #[arg(long)]
    pub trials: Option<u64>,
    /// Number of trial blocks reported separately. [default: 10]
    #[arg(long)]
    pub blocks: Option<u64>,
}

const KNOWN_KEYS: &[&str] = &[
    "model",
    "epsilon2",
    "dmax",
    "seed",
    "prior-h0",
    "x-grid",
    "n-grid",
    "out",
    "samples",
    "ensemble-out",
    "test",
    "x-list",
    "method",
    "xmin",
    "pe-max",
    "x",
    "n",
    "trials",
    "blocks",
];

/// Flat `key = value` settings.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("config line {}: expected key = value", i + 1))
            })?;
            let key = key.trim().trim_start_matches("--").replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Usage(format!(
                    "config line {}: unknown key '{key}'",
                    i + 1
                )));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(Self { values })
    }

    /// Flag value if given, else the config value, parsed the same way.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config value '{v}' for '{key}' is invalid"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let cfg = ConfigFile::parse(
            "# figure 2\nepsilon2 = 0.0033\nx_grid = 1e-3:1:5:log  # trailing\n\n",
        )
        .unwrap();
        assert_eq!(cfg.pick::<f64>(None, "epsilon2").unwrap(), Some(0.0033));
        assert_eq!(cfg.pick(Some(0.5), "epsilon2").unwrap(), Some(0.5));
        assert_eq!(
            cfg.pick::<String>(None, "x-grid").unwrap().as_deref(),
            Some("1e-3:1:5:log")
        );
        assert_eq!(cfg.pick::<u64>(None, "seed").unwrap(), None);
        assert!(ConfigFile::parse("bogus = 1").is_err());
        assert!(ConfigFile::parse("epsilon2").is_err());
        assert!(cfg.pick::<u64>(None, "epsilon2").is_err());
    }
}
