//! Random unitary crosstalk, photon-count sampling and ensemble statistics.
//!
//! All randomness comes from `ChaCha8Rng` seeded with `seed_from_u64`, so a
//! seed reproduces the same matrices and counts on every platform.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::Serialize;

use crate::chernoff::{chernoff_exponent, ChernoffResult};
use crate::error::{Error, Result};
use crate::hypothesis::{
    decide, full_lrt_decide_with, gamma_coefficient, CountsRecord, ErrorMethod, ErrorReport,
    Hypothesis, TestSpec,
};
use crate::optics::{
    mode_probabilities, CrosstalkMatrix, CrosstalkModel, ModeDistribution, Priors,
};

/// Name of the generator behind every seeded stream.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng (rand_chacha 0.3, seed_from_u64)";

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generalized Gell-Mann matrices of size `dim`: all symmetric off-diagonal
/// generators, then the antisymmetric ones (both in lexicographic `(j, k)`
/// order), then the diagonal ones. Normalized to `Tr(G_i G_j) = 2 delta_ij`.
pub fn gell_mann_basis(dim: usize) -> Result<Vec<DMatrix<Complex64>>> {
    if dim < 2 {
        return Err(Error::Domain(format!(
            "Gell-Mann basis needs dim >= 2, got {dim}"
        )));
    }
    let zero = || DMatrix::<Complex64>::zeros(dim, dim);
    let mut basis = Vec::with_capacity(dim * dim - 1);
    let pairs: Vec<(usize, usize)> = (0..dim)
        .flat_map(|j| (j + 1..dim).map(move |k| (j, k)))
        .collect();
    for &(j, k) in &pairs {
        let mut g = zero();
        g[(j, k)] = Complex64::new(1.0, 0.0);
        g[(k, j)] = Complex64::new(1.0, 0.0);
        basis.push(g);
    }
    for &(j, k) in &pairs {
        let mut g = zero();
        g[(j, k)] = Complex64::new(0.0, -1.0);
        g[(k, j)] = Complex64::new(0.0, 1.0);
        basis.push(g);
    }
    for l in 1..dim {
        let mut g = zero();
        let scale = (2.0 / (l * (l + 1)) as f64).sqrt();
        for j in 0..l {
            g[(j, j)] = Complex64::new(scale, 0.0);
        }
        g[(l, l)] = Complex64::new(-(l as f64) * scale, 0.0);
        basis.push(g);
    }
    Ok(basis)
}

/// Generator amplitude that gives an average crosstalk strength `epsilon2`
/// for weak crosstalk, from `eps^2 ~ 2 mu^2 / (D^4 - 1)`.
pub fn mu_for_strength(d: usize, epsilon2: f64) -> f64 {
    let dim = (d * d) as f64;
    (epsilon2 * (dim * dim - 1.0) / 2.0).sqrt()
}

/// Random unitary crosstalk `C = exp(-i mu lambda.G)` with `lambda` uniform
/// on the unit sphere and `mu` fixed by the target strength.
pub fn random_crosstalk(d: usize, epsilon2_target: f64, seed: u64) -> Result<CrosstalkMatrix> {
    if d < 2 {
        return Err(Error::Domain(format!(
            "mode cutoff D = {d} must be at least 2"
        )));
    }
    if !(epsilon2_target >= 0.0 && epsilon2_target.is_finite()) {
        return Err(Error::InvalidStrength(format!(
            "target strength {epsilon2_target} must be non-negative"
        )));
    }
    let dim = d * d;
    let mu = mu_for_strength(d, epsilon2_target);
    if mu == 0.0 {
        return CrosstalkMatrix::from_parts(
            d,
            DMatrix::identity(dim, dim),
            CrosstalkModel::UnitaryRandom,
            Some(0.0),
            Some(epsilon2_target),
            Some(seed),
        );
    }
    let basis = gell_mann_basis(dim)?;
    let mut rng = rng_from_seed(seed);
    let mut lambda: Vec<f64> = (0..basis.len())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let norm = lambda.iter().map(|v| v * v).sum::<f64>().sqrt();
    lambda.iter_mut().for_each(|v| *v /= norm);

    let mut generator = DMatrix::<Complex64>::zeros(dim, dim);
    for (weight, g) in lambda.iter().zip(&basis) {
        generator += g * Complex64::new(*weight, 0.0);
    }
    // Exact Hermitian symmetry before the eigensolver.
    let generator = (&generator + generator.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(generator);
    let phases =
        DMatrix::from_diagonal(&eig.eigenvalues.map(|w| Complex64::from_polar(1.0, -mu * w)));
    let entries = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
    CrosstalkMatrix::from_parts(
        d,
        entries,
        CrosstalkModel::UnitaryRandom,
        Some(mu),
        Some(epsilon2_target),
        Some(seed),
    )
}

/// Multinomial draw of `n` photons over the outputs of `dist`.
pub fn sample_counts(dist: &ModeDistribution, n: u64, seed: u64) -> CountsRecord {
    sample_counts_with(dist, n, &mut rng_from_seed(seed))
}

/// Multinomial draw as a chain of conditional binomials, in mode order.
pub fn sample_counts_with<R: Rng + ?Sized>(
    dist: &ModeDistribution,
    n: u64,
    rng: &mut R,
) -> CountsRecord {
    let probs = dist.as_slice();
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass_left = 1.0;
    for (k, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if k == probs.len() - 1 {
            counts[k] = remaining;
            break;
        }
        let share = if mass_left > 0.0 {
            (p / mass_left).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let draw = Binomial::new(remaining, share)
            .expect("share lies in [0, 1]")
            .sample(rng);
        counts[k] = draw;
        remaining -= draw;
        mass_left -= p;
    }
    CountsRecord::new(dist.d(), counts).expect("counts sized to the distribution")
}

/// Monte Carlo estimate of `alpha`, `beta` and `Pe`. Trial `t` draws one
/// record under each hypothesis from the stream seeded with `seed + t`.
pub fn empirical_error_rates(
    spec: &TestSpec,
    c: &CrosstalkMatrix,
    x: f64,
    n: u64,
    trials: u64,
    seed: u64,
) -> Result<ErrorReport> {
    empirical_error_rates_with_priors(spec, c, x, n, trials, seed, Priors::default())
}

pub fn empirical_error_rates_with_priors(
    spec: &TestSpec,
    c: &CrosstalkMatrix,
    x: f64,
    n: u64,
    trials: u64,
    seed: u64,
    priors: Priors,
) -> Result<ErrorReport> {
    let counts = simulate_decisions(spec, c, x, n, seed, 0..trials)?;
    Ok(counts.report(n, priors))
}

/// Tally of wrong decisions over a block of trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DecisionTally {
    pub trials: u64,
    pub false_alarms: u64,
    pub misses: u64,
}

impl DecisionTally {
    pub fn report(&self, n: u64, priors: Priors) -> ErrorReport {
        let t = self.trials as f64;
        ErrorReport::new(
            self.false_alarms as f64 / t,
            self.misses as f64 / t,
            n,
            ErrorMethod::MonteCarlo,
            priors,
        )
    }
}

/// Runs the trials with indices in `range`, each on its own seeded stream.
pub fn simulate_decisions(
    spec: &TestSpec,
    c: &CrosstalkMatrix,
    x: f64,
    n: u64,
    seed: u64,
    range: std::ops::Range<u64>,
) -> Result<DecisionTally> {
    if range.is_empty() {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    spec.validate()?;
    let h0 = mode_probabilities(c, 0.0)?;
    let h1 = mode_probabilities(c, x)?;
    let p0 = h0.p10();
    let gamma = gamma_coefficient(c);
    let lrt = match spec {
        TestSpec::FullLrt { x: assumed } => Some(mode_probabilities(c, *assumed)?),
        _ => None,
    };
    let decide_record = |record: &CountsRecord| -> Result<Hypothesis> {
        match &lrt {
            Some(alt) => full_lrt_decide_with(record, h0.as_slice(), alt.as_slice()),
            None => decide(spec, record, p0, gamma),
        }
    };
    let mut tally = DecisionTally::default();
    for trial in range {
        let mut rng = rng_from_seed(seed.wrapping_add(trial));
        let under_h0 = sample_counts_with(&h0, n, &mut rng);
        let under_h1 = sample_counts_with(&h1, n, &mut rng);
        tally.trials += 1;
        if decide_record(&under_h0)? == Hypothesis::H1 {
            tally.false_alarms += 1;
        }
        if decide_record(&under_h1)? == Hypothesis::H0 {
            tally.misses += 1;
        }
    }
    Ok(tally)
}

/// Median and quartiles of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleStats {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub n_samples: usize,
}

/// Linear-interpolation quantile of sorted data (position `q (n - 1)`).
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Median (midpoint of the two central values for even counts) and
/// linearly interpolated quartiles.
pub fn summarize(values: &[f64]) -> Result<SampleStats> {
    if values.is_empty() {
        return Err(Error::Domain("cannot summarize an empty sample".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("sample contains NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SampleStats {
        median: quantile_sorted(&sorted, 0.5),
        q25: quantile_sorted(&sorted, 0.25),
        q75: quantile_sorted(&sorted, 0.75),
        n_samples: sorted.len(),
    })
}

/// One row of the ensemble output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleRow {
    pub sample_index: usize,
    pub seed: u64,
    pub realized_epsilon2: f64,
    pub p0: f64,
    pub x: f64,
    pub xi: f64,
}

impl EnsembleRow {
    pub const CSV_HEADER: &'static str = "sample_index,seed,realized_epsilon2,p0,x,xi";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            self.sample_index, self.seed, self.realized_epsilon2, self.p0, self.x, self.xi
        )
    }
}

/// Ensemble of random unitary crosstalks; member `i` uses seed `seed + i`.
pub fn random_ensemble(
    d: usize,
    epsilon2: f64,
    samples: usize,
    seed: u64,
) -> Result<Vec<CrosstalkMatrix>> {
    (0..samples)
        .map(|i| random_crosstalk(d, epsilon2, seed.wrapping_add(i as u64)))
        .collect()
}

/// Exact SPADE Chernoff exponent for one crosstalk matrix and separation.
pub fn spade_chernoff(c: &CrosstalkMatrix, x: f64, tol: f64) -> Result<ChernoffResult> {
    let h0 = mode_probabilities(c, 0.0)?;
    let h1 = mode_probabilities(c, x)?;
    chernoff_exponent(h0.as_slice(), h1.as_slice(), tol)
}

/// Per-member Chernoff exponents over a grid of separations, in
/// `(x, member)` order.
pub fn chernoff_ensemble(
    ensemble: &[CrosstalkMatrix],
    xs: &[f64],
    tol: f64,
) -> Result<Vec<EnsembleRow>> {
    let mut rows = Vec::with_capacity(ensemble.len() * xs.len());
    for &x in xs {
        for (i, c) in ensemble.iter().enumerate() {
            rows.push(EnsembleRow {
                sample_index: i,
                seed: c.seed().unwrap_or(0),
                realized_epsilon2: c.realized_epsilon2(),
                p0: mode_probabilities(c, 0.0)?.p10(),
                x,
                xi: spade_chernoff(c, x, tol)?.xi,
            });
        }
    }
    Ok(rows)
}
