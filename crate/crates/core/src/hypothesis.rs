//! Decision rules on SPADE photon counts and their error probabilities.
//!
//! All thresholded rules compare the count `N10` in the antisymmetric output
//! against a threshold `tau(N)` and accept H1 only when `N10 > tau(N)`; ties
//! go to H0.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::binomial::binomial_tails_at;
use crate::error::{Error, Result};
use crate::optics::{mode_probabilities, CrosstalkMatrix, ModeIndex, Priors};

/// A decision rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestSpec {
    /// Accept H1 on any click in `v_10`.
    Original,
    /// Threshold at the H0 mean, `N p0`.
    NaiveMean,
    /// Threshold `N p0 + c N^a`.
    ZetaFamily { c: f64, a: f64 },
    /// Threshold `N (p0 + gamma x_min^2 / 2)`.
    SemiSeparation { x_min: f64 },
    /// Exact likelihood-ratio threshold for the two outcomes "click in `v_10`"
    /// and "click elsewhere", at an assumed separation.
    BinaryLrt { x: f64 },
    /// Likelihood-ratio test over all `D^2` outputs.
    FullLrt { x: f64 },
}

impl TestSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TestSpec::Original => "original",
            TestSpec::NaiveMean => "naive",
            TestSpec::ZetaFamily { .. } => "zeta",
            TestSpec::SemiSeparation { .. } => "semi",
            TestSpec::BinaryLrt { .. } => "binary-lrt",
            TestSpec::FullLrt { .. } => "full-lrt",
        }
    }

    /// Parameters as `key=value` pairs separated by `;`.
    pub fn params(&self) -> String {
        match self {
            TestSpec::Original | TestSpec::NaiveMean => String::new(),
            TestSpec::ZetaFamily { c, a } => format!("c={c};a={a}"),
            TestSpec::SemiSeparation { x_min } => format!("x_min={x_min}"),
            TestSpec::BinaryLrt { x } | TestSpec::FullLrt { x } => format!("x={x}"),
        }
    }

    /// True for the separation-independent rules with vanishing error:
    /// `c > 0` and `1/2 < a < 1`.
    pub fn is_separation_independent_convergent(&self) -> bool {
        matches!(self, TestSpec::ZetaFamily { c, a } if *c > 0.0 && *a > 0.5 && *a < 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Domain(format!("{what} = {v} must be positive")))
            }
        };
        match *self {
            TestSpec::Original | TestSpec::NaiveMean => Ok(()),
            TestSpec::ZetaFamily { c, a } => {
                if c.is_finite() && a.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Domain("zeta parameters must be finite".into()))
                }
            }
            TestSpec::SemiSeparation { x_min } => positive(x_min, "x_min"),
            TestSpec::BinaryLrt { x } | TestSpec::FullLrt { x } => positive(x, "x"),
        }
    }
}

impl fmt::Display for TestSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TestSpec::Original | TestSpec::NaiveMean => f.write_str(self.name()),
            TestSpec::ZetaFamily { c, a } => write!(f, "zeta({c},{a})"),
            TestSpec::SemiSeparation { x_min } => write!(f, "semi({x_min})"),
            TestSpec::BinaryLrt { x } => write!(f, "binary-lrt({x})"),
            TestSpec::FullLrt { x } => write!(f, "full-lrt({x})"),
        }
    }
}

impl FromStr for TestSpec {
    type Err = Error;

    /// Parses `original`, `naive`, `zeta(c,a)`, `semi(x_min)`,
    /// `binary-lrt(x)` and `full-lrt(x)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, args) = match s.find('(') {
            Some(open) => {
                let close = s.strip_suffix(')').ok_or_else(|| {
                    Error::Domain(format!("unbalanced parentheses in test '{s}'"))
                })?;
                (
                    &s[..open],
                    close[open + 1..]
                        .split(',')
                        .map(str::trim)
                        .collect::<Vec<_>>(),
                )
            }
            None => (s, Vec::new()),
        };
        let nums = args
            .iter()
            .filter(|a| !a.is_empty())
            .map(|a| {
                a.parse::<f64>()
                    .map_err(|_| Error::Domain(format!("bad number '{a}' in test '{s}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        let want = |k: usize| {
            if nums.len() == k {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "test '{name}' takes {k} parameter(s), got {}",
                    nums.len()
                )))
            }
        };
        let spec = match name.to_ascii_lowercase().replace('_', "-").as_str() {
            "original" => want(0).map(|_| TestSpec::Original),
            "naive" | "naive-mean" => want(0).map(|_| TestSpec::NaiveMean),
            "zeta" => want(2).map(|_| TestSpec::ZetaFamily {
                c: nums[0],
                a: nums[1],
            }),
            "semi" | "semi-separation" => {
                want(1).map(|_| TestSpec::SemiSeparation { x_min: nums[0] })
            }
            "binary-lrt" => want(1).map(|_| TestSpec::BinaryLrt { x: nums[0] }),
            "full-lrt" => want(1).map(|_| TestSpec::FullLrt { x: nums[0] }),
            other => Err(Error::Domain(format!("unknown test '{other}'"))),
        }?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Outcome of a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hypothesis {
    /// One source.
    H0,
    /// Two sources.
    H1,
}

/// Photon counts per output mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsRecord {
    d: usize,
    counts: Vec<u64>,
    total: u64,
}

impl CountsRecord {
    pub fn new(d: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != d * d {
            return Err(Error::Domain(format!(
                "expected {} counts for D = {d}, got {}",
                d * d,
                counts.len()
            )));
        }
        let total = counts.iter().sum();
        Ok(Self { d, counts, total })
    }

    /// A record with `n10` clicks in `v_10` and the rest in `v_00`.
    pub fn two_outcome(d: usize, n: u64, n10: u64) -> Result<Self> {
        if n10 > n {
            return Err(Error::Domain(format!("N10 = {n10} exceeds N = {n}")));
        }
        let mut counts = vec![0; d * d];
        counts[0] = n - n10;
        counts[ModeIndex::ANTISYMMETRIC.flat(d)] = n10;
        Self::new(d, counts)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn n10(&self) -> u64 {
        self.counts[ModeIndex::ANTISYMMETRIC.flat(self.d)]
    }
}

/// How an error report was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorMethod {
    ExactBinomial,
    Gaussian,
    MonteCarlo,
}

impl ErrorMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorMethod::ExactBinomial => "exact_binomial",
            ErrorMethod::Gaussian => "gaussian",
            ErrorMethod::MonteCarlo => "monte_carlo",
        }
    }
}

impl FromStr for ErrorMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact_binomial" | "exact" => Ok(ErrorMethod::ExactBinomial),
            "gaussian" => Ok(ErrorMethod::Gaussian),
            "monte_carlo" => Ok(ErrorMethod::MonteCarlo),
            other => Err(Error::Domain(format!("unknown method '{other}'"))),
        }
    }
}

/// Errors of the first and second kind and their prior-weighted mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    pub alpha: f64,
    pub beta: f64,
    pub pe: f64,
    pub n: u64,
    pub method: ErrorMethod,
}

impl ErrorReport {
    pub fn new(alpha: f64, beta: f64, n: u64, method: ErrorMethod, priors: Priors) -> Self {
        Self {
            alpha,
            beta,
            pe: priors.weigh(alpha, beta),
            n,
            method,
        }
    }

    pub const CSV_HEADER: &'static str = "N,alpha,beta,pe,method,test,params";

    /// `N,alpha,beta,pe,method,test,params`.
    pub fn csv_row(&self, test: &TestSpec) -> String {
        format!(
            "{},{:.16e},{:.16e},{:.16e},{},{},{}",
            self.n,
            self.alpha,
            self.beta,
            self.pe,
            self.method.as_str(),
            test.name(),
            test.params()
        )
    }
}

/// Curvature of `p(10 | x)` at the origin:
/// `|C[10,10]|^2 - p0 + sqrt(2) Re(C[10,00] conj(C[10,20]))`.
/// The last term only exists for `D > 2`.
pub fn gamma_coefficient(c: &CrosstalkMatrix) -> f64 {
    let m00 = ModeIndex::new(0, 0);
    let m10 = ModeIndex::ANTISYMMETRIC;
    let p0 = c.p0();
    let mut gamma = c.entry(m10, m10).norm_sqr() - p0;
    if c.d() > 2 {
        let cross = c.entry(m10, m00) * c.entry(m10, ModeIndex::new(2, 0)).conj();
        gamma += std::f64::consts::SQRT_2 * cross.re;
    }
    gamma
}

/// Small-separation approximation `p_x ~ p0 + gamma x^2`.
pub fn small_sep_prob(p0: f64, gamma: f64, x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!(
            "separation x = {x} must be non-negative"
        )));
    }
    let px = p0 + gamma * x * x;
    if !(0.0..=1.0).contains(&px) {
        return Err(Error::Domain(format!(
            "p0 + gamma x^2 = {px} is not a probability"
        )));
    }
    Ok(px)
}

/// Decision threshold `tau(N)` for `N10`.
pub fn threshold(spec: &TestSpec, n: u64, p0: f64, gamma: f64) -> Result<f64> {
    spec.validate()?;
    let nf = n as f64;
    match *spec {
        TestSpec::Original => Ok(0.0),
        TestSpec::NaiveMean => Ok(nf * p0),
        TestSpec::ZetaFamily { c, a } => Ok(nf * p0 + c * nf.powf(a)),
        TestSpec::SemiSeparation { x_min } => Ok(nf * (p0 + gamma * x_min * x_min / 2.0)),
        TestSpec::BinaryLrt { x } => {
            if p0 == 0.0 {
                return Err(Error::Degenerate(
                    "binary likelihood-ratio threshold needs p0 > 0; use the original rule".into(),
                ));
            }
            let px = small_sep_prob(p0, gamma, x)?;
            binary_lrt_threshold(n, p0, px)
        }
        TestSpec::FullLrt { .. } => Err(Error::Domain(
            "the full likelihood-ratio test has no scalar threshold; use full_lrt_decide".into(),
        )),
    }
}

/// `N ln[(1 - p0)/(1 - px)] / ln[px (1 - p0) / (p0 (1 - px))]`.
pub fn binary_lrt_threshold(n: u64, p0: f64, px: f64) -> Result<f64> {
    if !(p0 > 0.0 && px > 0.0 && p0 < 1.0 && px < 1.0) || px == p0 {
        return Err(Error::Degenerate(format!(
            "likelihood-ratio threshold undefined for p0 = {p0}, p_x = {px}"
        )));
    }
    let numer = ((-p0).ln_1p() - (-px).ln_1p()) * n as f64;
    let denom = (px / p0).ln() + (-p0).ln_1p() - (-px).ln_1p();
    Ok(numer / denom)
}

/// Threshold with the degenerate `p0 = 0` cases mapped onto the original rule.
fn effective_threshold(spec: &TestSpec, n: u64, p0: f64, gamma: f64) -> Result<f64> {
    match spec {
        TestSpec::BinaryLrt { .. } | TestSpec::NaiveMean if p0 == 0.0 => Ok(0.0),
        _ => threshold(spec, n, p0, gamma),
    }
}

/// Thresholded decision: H1 iff `N10 > tau(N)`.
pub fn decide(spec: &TestSpec, record: &CountsRecord, p0: f64, gamma: f64) -> Result<Hypothesis> {
    let tau = effective_threshold(spec, record.total(), p0, gamma)?;
    Ok(if record.n10() as f64 > tau {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    })
}

/// Multimode likelihood-ratio test at an assumed separation, in log domain.
pub fn full_lrt_decide(
    record: &CountsRecord,
    x_assumed: f64,
    c: &CrosstalkMatrix,
) -> Result<Hypothesis> {
    if !(x_assumed > 0.0) {
        return Err(Error::Domain(format!(
            "assumed separation {x_assumed} must be positive"
        )));
    }
    if record.d() != c.d() {
        return Err(Error::Domain(format!(
            "record has D = {}, crosstalk has D = {}",
            record.d(),
            c.d()
        )));
    }
    let h0 = mode_probabilities(c, 0.0)?;
    let h1 = mode_probabilities(c, x_assumed)?;
    full_lrt_decide_with(record, h0.as_slice(), h1.as_slice())
}

/// Likelihood-ratio decision for precomputed outcome distributions.
pub fn full_lrt_decide_with(
    record: &CountsRecord,
    p_h0: &[f64],
    p_h1: &[f64],
) -> Result<Hypothesis> {
    let mut log_ratio = 0.0;
    for (k, &count) in record.counts().iter().enumerate() {
        if count == 0 {
            continue;
        }
        match (p_h0[k] > 0.0, p_h1[k] > 0.0) {
            (true, true) => log_ratio += count as f64 * (p_h1[k].ln() - p_h0[k].ln()),
            (false, true) => return Ok(Hypothesis::H1),
            (true, false) => return Ok(Hypothesis::H0),
            (false, false) => {
                return Err(Error::ModelInconsistency(format!(
                    "{count} photons observed in a mode with zero probability under both hypotheses"
                )))
            }
        }
    }
    Ok(if log_ratio > 0.0 {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    })
}

fn check_prob(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} = {p} is not a probability")))
    }
}

/// Exact error probabilities from the binomial law of `N10`:
/// `alpha = P(N10 > c | p0)`, `beta = P(N10 <= c | p_x)` with `c = floor(tau)`.
pub fn error_probs_exact(
    spec: &TestSpec,
    n: u64,
    p0: f64,
    p_x: f64,
    gamma: f64,
    priors: Priors,
) -> Result<ErrorReport> {
    check_prob(p0, "p0")?;
    check_prob(p_x, "p_x")?;
    let tau = effective_threshold(spec, n, p0, gamma)?;
    let (_, alpha) = binomial_tails_at(tau, n, p0)?;
    let (beta, _) = binomial_tails_at(tau, n, p_x)?;
    Ok(ErrorReport::new(
        alpha,
        beta,
        n,
        ErrorMethod::ExactBinomial,
        priors,
    ))
}

/// Standard normal CDF.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Normal approximation to the binomial error probabilities with the
/// un-floored threshold.
pub fn error_probs_gaussian(
    spec: &TestSpec,
    n: u64,
    p0: f64,
    p_x: f64,
    gamma: f64,
    priors: Priors,
) -> Result<ErrorReport> {
    if n == 0 {
        return Err(Error::Domain(
            "the normal approximation needs N >= 1".into(),
        ));
    }
    for (p, what) in [(p0, "p0"), (p_x, "p_x")] {
        check_prob(p, what)?;
        if p == 0.0 || p == 1.0 {
            return Err(Error::Degenerate(format!(
                "{what} = {p} gives zero variance"
            )));
        }
    }
    let tau = threshold(spec, n, p0, gamma)?;
    let nf = n as f64;
    let z0 = (tau - nf * p0) / (nf * p0 * (1.0 - p0)).sqrt();
    let zx = (tau - nf * p_x) / (nf * p_x * (1.0 - p_x)).sqrt();
    let alpha = std_normal_cdf(-z0);
    let beta = std_normal_cdf(zx);
    Ok(ErrorReport::new(
        alpha,
        beta,
        n,
        ErrorMethod::Gaussian,
        priors,
    ))
}

/// Large-`N` limit of the probability of error at equal priors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum LimitClass {
    Zero,
    Quarter,
    Half,
    /// Depends on the true separation, which was not supplied.
    XDependent,
    /// A limit strictly between the named values.
    Intermediate(f64),
}

/// Limits of `alpha` and `beta` as `N -> infinity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorLimits {
    pub alpha: f64,
    pub beta: Option<f64>,
}

/// Asymptotic error limits for a threshold of the form `N p0 + c N^a` against
/// a true click probability `p0 + drift`, `drift > 0`. Without the drift only
/// limits that do not depend on it are resolved.
fn growth_limits(c: f64, a: f64, p0: f64, drift: Option<f64>) -> ErrorLimits {
    let alpha = if p0 == 0.0 {
        if c < 0.0 {
            1.0
        } else {
            0.0
        }
    } else if c == 0.0 || a < 0.5 {
        0.5
    } else if a == 0.5 {
        1.0 - std_normal_cdf(c / (p0 * (1.0 - p0)).sqrt())
    } else if c > 0.0 {
        0.0
    } else {
        1.0
    };
    let beta = if c == 0.0 || a < 1.0 {
        Some(0.0)
    } else if a > 1.0 {
        Some(if c > 0.0 { 1.0 } else { 0.0 })
    } else {
        drift.map(|eta| {
            if c < eta {
                0.0
            } else if c > eta {
                1.0
            } else {
                0.5
            }
        })
    };
    ErrorLimits { alpha, beta }
}

/// Limits of `alpha` and `beta`. `x` is the true separation; without it,
/// limits that depend on it are reported as `None`.
pub fn asymptotic_error_limits(
    spec: &TestSpec,
    p0: f64,
    gamma: f64,
    x: Option<f64>,
) -> Result<ErrorLimits> {
    spec.validate()?;
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!("gamma = {gamma} must be positive")));
    }
    if let Some(x) = x {
        if !(x > 0.0) {
            return Err(Error::Domain(format!(
                "true separation x = {x} must be positive"
            )));
        }
    }
    let drift = x.map(|x| gamma * x * x);
    let limits = match *spec {
        TestSpec::Original => {
            if p0 == 0.0 {
                ErrorLimits {
                    alpha: 0.0,
                    beta: Some(0.0),
                }
            } else {
                ErrorLimits {
                    alpha: 1.0,
                    beta: Some(0.0),
                }
            }
        }
        TestSpec::NaiveMean if p0 == 0.0 => ErrorLimits {
            alpha: 0.0,
            beta: Some(0.0),
        },
        TestSpec::NaiveMean => growth_limits(0.0, 1.0, p0, drift),
        TestSpec::ZetaFamily { c, a } => growth_limits(c, a, p0, drift),
        TestSpec::SemiSeparation { x_min } => {
            growth_limits(gamma * x_min * x_min / 2.0, 1.0, p0, drift)
        }
        TestSpec::BinaryLrt { .. } if p0 == 0.0 => ErrorLimits {
            alpha: 0.0,
            beta: Some(0.0),
        },
        TestSpec::BinaryLrt { x: assumed } => {
            let px = small_sep_prob(p0, gamma, assumed)?;
            let slope = binary_lrt_threshold(1, p0, px)?;
            growth_limits(slope - p0, 1.0, p0, drift)
        }
        TestSpec::FullLrt { .. } => {
            return Err(Error::Domain(
                "asymptotic classification applies to thresholded rules only".into(),
            ))
        }
    };
    Ok(limits)
}

/// Large-`N` class of the probability of error at equal priors.
pub fn asymptotic_classification(
    spec: &TestSpec,
    p0: f64,
    gamma: f64,
    x: Option<f64>,
) -> Result<LimitClass> {
    let limits = asymptotic_error_limits(spec, p0, gamma, x)?;
    let Some(beta) = limits.beta else {
        return Ok(LimitClass::XDependent);
    };
    let pe = 0.5 * (limits.alpha + beta);
    Ok(if pe == 0.0 {
        LimitClass::Zero
    } else if pe == 0.25 {
        LimitClass::Quarter
    } else if pe == 0.5 {
        LimitClass::Half
    } else {
        LimitClass::Intermediate(pe)
    })
}

/// Sample size returned by [`plan_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentPlan {
    pub n_required: u64,
    pub threshold: f64,
    pub p0: f64,
    pub gamma: f64,
    /// Exact probability of error at `n_required` and separation `x_min`.
    pub pe_at_n: f64,
}

const PLAN_MAX_N: u64 = 1 << 50;

/// Number of detected photons after which the semi-separation-independent
/// test with parameter `x_min` has probability of error at most `pe_target`
/// for every true separation `x >= x_min`.
///
/// The Gaussian approximation brackets the answer by doubling and bisection;
/// the exact binomial error then moves it up to the first `N` that meets the
/// target and down past any smaller `N` that also does.
pub fn plan_experiment(x_min: f64, p0: f64, gamma: f64, pe_target: f64) -> Result<ExperimentPlan> {
    if !(pe_target > 0.0) {
        return Err(Error::Domain(format!(
            "target probability of error {pe_target} must be positive"
        )));
    }
    if pe_target >= 0.5 {
        return Err(Error::TrivialTarget(format!(
            "target {pe_target} >= 1/2 is met by guessing"
        )));
    }
    if !(gamma > 0.0) {
        return Err(Error::Domain(format!(
            "gamma = {gamma} must be positive to plan an experiment"
        )));
    }
    if !(x_min > 0.0) {
        return Err(Error::Domain(format!("x_min = {x_min} must be positive")));
    }
    check_prob(p0, "p0")?;
    let spec = TestSpec::SemiSeparation { x_min };
    let p_x = small_sep_prob(p0, gamma, x_min)?;
    let priors = Priors::default();
    let exact = |n: u64| error_probs_exact(&spec, n, p0, p_x, gamma, priors).map(|r| r.pe);
    let approx = |n: u64| -> Result<f64> {
        if p0 == 0.0 || p_x == 1.0 {
            exact(n)
        } else {
            error_probs_gaussian(&spec, n, p0, p_x, gamma, priors).map(|r| r.pe)
        }
    };

    // Doubling until the approximate error meets the target.
    let mut hi = 1u64;
    let mut prev = approx(hi)?;
    while prev > pe_target {
        if hi >= PLAN_MAX_N {
            return Err(Error::Numerical(format!(
                "probability of error still {prev:e} at N = {hi}; target {pe_target:e} unreachable"
            )));
        }
        hi *= 2;
        let next = approx(hi)?;
        if hi > 64 && next > prev + 1e-12 {
            return Err(Error::Numerical(format!(
                "probability of error increased from {prev:e} to {next:e} at N = {hi}"
            )));
        }
        prev = next;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if approx(mid)? <= pe_target {
            hi = mid;
        } else {
            lo = mid;
        }
    }

    let mut n = hi.max(1);
    let budget = 10 * n + 10_000;
    let mut steps = 0;
    while exact(n)? > pe_target {
        n += 1;
        steps += 1;
        if steps > budget {
            return Err(Error::Numerical(format!(
                "exact error did not meet the target near N = {hi}"
            )));
        }
    }
    while n > 1 && exact(n - 1)? <= pe_target {
        n -= 1;
    }
    Ok(ExperimentPlan {
        n_required: n,
        threshold: threshold(&spec, n, p0, gamma)?,
        p0,
        gamma,
        pe_at_n: exact(n)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const P0: f64 = 0.01;
    const GAMMA: f64 = 0.96;

    #[test]
    fn parse_and_display_round_trip() {
        for text in [
            "original",
            "naive",
            "zeta(0.01,0.8)",
            "semi(0.02)",
            "binary-lrt(0.05)",
            "full-lrt(0.05)",
        ] {
            let spec: TestSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
        assert!("zeta(1)".parse::<TestSpec>().is_err());
        assert!("semi(-0.1)".parse::<TestSpec>().is_err());
        assert!("bogus".parse::<TestSpec>().is_err());
    }

    #[test]
    fn thresholds() {
        assert_eq!(
            threshold(&TestSpec::Original, 12345, P0, GAMMA).unwrap(),
            0.0
        );
        let semi = threshold(&TestSpec::SemiSeparation { x_min: 0.02 }, 10_000, P0, GAMMA).unwrap();
        assert_relative_eq!(semi, 101.92, max_relative = 1e-12);
        let lrt = threshold(&TestSpec::BinaryLrt { x: 0.02 }, 10_000, P0, GAMMA).unwrap();
        assert!((lrt - 101.90).abs() < 1e-2, "{lrt}");
        assert!((lrt / 1e4 - (P0 + GAMMA * 0.0004 / 2.0)).abs() <= 1e-5);
        assert!(matches!(
            threshold(&TestSpec::BinaryLrt { x: 0.02 }, 10, 0.0, GAMMA),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn small_separation_probability() {
        assert_eq!(small_sep_prob(P0, GAMMA, 0.0).unwrap(), P0);
        assert_relative_eq!(
            small_sep_prob(P0, GAMMA, 0.02).unwrap(),
            0.010384,
            max_relative = 1e-12
        );
        assert!(small_sep_prob(0.9, 1.0, 1.0).is_err());
    }

    #[test]
    fn gamma_for_uniform_crosstalk() {
        let c = CrosstalkMatrix::uniform(2, 0.01).unwrap();
        assert_relative_eq!(gamma_coefficient(&c), 0.96, max_relative = 1e-12);
    }

    #[test]
    fn decisions() {
        let semi = TestSpec::SemiSeparation { x_min: 0.02 };
        let zero = CountsRecord::two_outcome(2, 10_000, 0).unwrap();
        assert_eq!(decide(&semi, &zero, P0, GAMMA).unwrap(), Hypothesis::H0);
        let one = CountsRecord::two_outcome(2, 10, 1).unwrap();
        assert_eq!(
            decide(&TestSpec::Original, &one, P0, GAMMA).unwrap(),
            Hypothesis::H1
        );
        let near = CountsRecord::two_outcome(2, 10_000, 101).unwrap();
        assert_eq!(decide(&semi, &near, P0, GAMMA).unwrap(), Hypothesis::H0);
        let above = CountsRecord::two_outcome(2, 10_000, 102).unwrap();
        assert_eq!(decide(&semi, &above, P0, GAMMA).unwrap(), Hypothesis::H1);
        // p0 = 0 reduces the naive rule to the original one.
        assert_eq!(
            decide(&TestSpec::NaiveMean, &one, 0.0, GAMMA).unwrap(),
            Hypothesis::H1
        );
    }

    #[test]
    fn full_lrt_edge_cases() {
        let id = CrosstalkMatrix::identity(2).unwrap();
        let empty = CountsRecord::new(2, vec![0; 4]).unwrap();
        assert_eq!(full_lrt_decide(&empty, 0.05, &id).unwrap(), Hypothesis::H0);
        let click = CountsRecord::new(2, vec![50, 0, 1, 0]).unwrap();
        assert_eq!(full_lrt_decide(&click, 0.05, &id).unwrap(), Hypothesis::H1);
        // Mode 11 never fires without crosstalk.
        let stray = CountsRecord::new(2, vec![5, 0, 0, 1]).unwrap();
        assert!(matches!(
            full_lrt_decide(&stray, 0.05, &id),
            Err(Error::ModelInconsistency(_))
        ));
        assert!(full_lrt_decide(&empty, 0.0, &id).is_err());
    }

    #[test]
    fn exact_errors() {
        let r = error_probs_exact(&TestSpec::Original, 100, P0, 0.02, GAMMA, Priors::default())
            .unwrap();
        assert_relative_eq!(r.alpha, 1.0 - 0.99f64.powi(100), max_relative = 1e-13);
        assert_relative_eq!(r.alpha, 0.6339677, epsilon = 1e-7);
        for spec in [
            TestSpec::Original,
            TestSpec::NaiveMean,
            TestSpec::SemiSeparation { x_min: 0.02 },
        ] {
            let r = error_probs_exact(&spec, 777, 0.03, 0.03, GAMMA, Priors::default()).unwrap();
            assert_relative_eq!(r.pe, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn gaussian_errors() {
        for n in [10, 1_000, 100_000_000] {
            let r =
                error_probs_gaussian(&TestSpec::NaiveMean, n, P0, 0.02, GAMMA, Priors::default())
                    .unwrap();
            assert_eq!(r.alpha, 0.5);
        }
        let r = error_probs_gaussian(
            &TestSpec::NaiveMean,
            100_000_000,
            P0,
            0.0124,
            GAMMA,
            Priors::default(),
        )
        .unwrap();
        assert!((r.pe - 0.25).abs() < 1e-3);
        assert!(matches!(
            error_probs_gaussian(&TestSpec::Original, 10, 0.0, 0.1, GAMMA, Priors::default()),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn classification() {
        let class = |spec: TestSpec, x: Option<f64>| {
            asymptotic_classification(&spec, P0, GAMMA, x).unwrap()
        };
        assert_eq!(class(TestSpec::Original, None), LimitClass::Half);
        assert_eq!(class(TestSpec::NaiveMean, None), LimitClass::Quarter);
        assert_eq!(
            class(TestSpec::ZetaFamily { c: 0.01, a: 0.8 }, None),
            LimitClass::Zero
        );
        assert_eq!(
            class(TestSpec::ZetaFamily { c: 0.01, a: 0.3 }, None),
            LimitClass::Quarter
        );
        assert_eq!(
            class(TestSpec::ZetaFamily { c: -0.01, a: 0.8 }, None),
            LimitClass::Half
        );
        let linear = TestSpec::ZetaFamily { c: 0.001, a: 1.0 };
        assert_eq!(class(linear, None), LimitClass::XDependent);
        assert_eq!(class(linear, Some(0.05)), LimitClass::Zero);
        assert_eq!(class(linear, Some(0.02)), LimitClass::Half);
        assert!(matches!(
            class(TestSpec::ZetaFamily { c: 0.01, a: 0.5 }, None),
            LimitClass::Intermediate(_)
        ));
        assert!(asymptotic_classification(&TestSpec::FullLrt { x: 0.1 }, P0, GAMMA, None).is_err());
    }

    #[test]
    fn planner_single_photon() {
        let (x_min, gamma) = (0.3, 0.96);
        let single = 0.5 * (1.0 - gamma * x_min * x_min);
        let plan = plan_experiment(x_min, P0, gamma, single + 1e-9).unwrap();
        assert_eq!(plan.n_required, 1);
        assert!(plan.pe_at_n <= single + 1e-9);
    }

    #[test]
    fn planner_errors() {
        assert!(matches!(
            plan_experiment(0.02, P0, GAMMA, 0.5),
            Err(Error::TrivialTarget(_))
        ));
        assert!(matches!(
            plan_experiment(0.02, P0, -0.1, 0.05),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn csv_row_format() {
        let r = ErrorReport::new(0.25, 0.5, 10, ErrorMethod::Gaussian, Priors::default());
        let row = r.csv_row(&TestSpec::ZetaFamily { c: 0.01, a: 0.8 });
        assert!(row.starts_with(
            "10,2.5000000000000000e-1,5.0000000000000000e-1,3.7500000000000000e-1,gaussian,zeta,"
        ));
    }
}
