//! Hermite-Gauss overlap amplitudes, crosstalk matrices and the renormalized
//! mode-detection distribution.
//!
//! Lengths are in units of the PSF width `w`, so the only geometric input is
//! the dimensionless half-separation `x = d / 2w`. Modes `nm` with `n, m < D`
//! are flattened row-major, `nm -> n * D + m`.

use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const UNITARITY_TOL: f64 = 1e-12;
const ROW_NORM_TOL: f64 = 1e-12;

/// Label of a Hermite-Gauss mode `u_nm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub n: usize,
    pub m: usize,
}

impl ModeIndex {
    /// The antisymmetric mode `10` that carries most of the separation signal.
    pub const ANTISYMMETRIC: ModeIndex = ModeIndex { n: 1, m: 0 };

    pub const fn new(n: usize, m: usize) -> Self {
        Self { n, m }
    }

    pub fn flat(self, d: usize) -> usize {
        debug_assert!(self.n < d && self.m < d);
        self.n * d + self.m
    }

    pub fn from_flat(index: usize, d: usize) -> Self {
        Self {
            n: index / d,
            m: index % d,
        }
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.n, self.m)
    }
}

/// Prior probabilities of the two hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub h0: f64,
    pub h1: f64,
}

impl Priors {
    pub fn new(h0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&h0) {
            return Err(Error::Domain(format!("prior {h0} outside [0, 1]")));
        }
        Ok(Self { h0, h1: 1.0 - h0 })
    }

    /// Prior-weighted mean of the two error kinds.
    pub fn weigh(&self, alpha: f64, beta: f64) -> f64 {
        self.h0 * alpha + self.h1 * beta
    }
}

impl Default for Priors {
    fn default() -> Self {
        Self { h0: 0.5, h1: 0.5 }
    }
}

/// Mode cutoff, separation and priors of one imaging configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImagingConfig {
    pub d: usize,
    pub x: f64,
    pub priors: Priors,
}

impl ImagingConfig {
    pub fn new(d: usize, x: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!(
                "mode cutoff D = {d} must be at least 2"
            )));
        }
        if !(x >= 0.0 && x.is_finite()) {
            return Err(Error::Domain(format!(
                "separation x = {x} must be finite and non-negative"
            )));
        }
        Ok(Self {
            d,
            x,
            priors: Priors::default(),
        })
    }

    pub fn with_priors(mut self, priors: Priors) -> Self {
        self.priors = priors;
        self
    }
}

impl Default for ImagingConfig {
    fn default() -> Self {
        Self {
            d: 2,
            x: 0.0,
            priors: Priors::default(),
        }
    }
}

/// How a crosstalk matrix was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrosstalkModel {
    Identity,
    Uniform,
    UnitaryRandom,
    UserSupplied,
}

impl CrosstalkModel {
    pub fn as_str(self) -> &'static str {
        match self {
            CrosstalkModel::Identity => "identity",
            CrosstalkModel::Uniform => "uniform",
            CrosstalkModel::UnitaryRandom => "unitary_random",
            CrosstalkModel::UserSupplied => "user_supplied",
        }
    }
}

impl fmt::Display for CrosstalkModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CrosstalkModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(CrosstalkModel::Identity),
            "uniform" => Ok(CrosstalkModel::Uniform),
            "unitary_random" => Ok(CrosstalkModel::UnitaryRandom),
            "user_supplied" => Ok(CrosstalkModel::UserSupplied),
            other => Err(Error::MalformedMatrix(format!(
                "unknown crosstalk model '{other}'"
            ))),
        }
    }
}

/// Crosstalk matrix `C` relating the measured modes `v_nm` to the ideal
/// Hermite-Gauss modes: `v_nm = sum_kl C[nm, kl] u_kl`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosstalkMatrix {
    d: usize,
    entries: DMatrix<Complex64>,
    model: CrosstalkModel,
    mu: Option<f64>,
    target_epsilon2: Option<f64>,
    realized_epsilon2: f64,
    seed: Option<u64>,
}

impl CrosstalkMatrix {
    /// Ideal demultiplexer.
    pub fn identity(d: usize) -> Result<Self> {
        check_cutoff(d)?;
        let size = d * d;
        Ok(Self {
            d,
            entries: DMatrix::identity(size, size),
            model: CrosstalkModel::Identity,
            mu: None,
            target_epsilon2: Some(0.0),
            realized_epsilon2: 0.0,
            seed: None,
        })
    }

    /// Uniform crosstalk: every off-diagonal entry equals `epsilon`, the
    /// diagonal makes each row unit-norm. Not unitary in general.
    pub fn uniform(d: usize, epsilon2: f64) -> Result<Self> {
        check_cutoff(d)?;
        let size = d * d;
        let leak = (size - 1) as f64 * epsilon2;
        if !(epsilon2 >= 0.0 && leak <= 1.0 + 1e-15) {
            return Err(Error::InvalidStrength(format!(
                "uniform model needs 0 <= (D^2 - 1) eps^2 <= 1, got {leak} (eps^2 = {epsilon2}, D = {d})"
            )));
        }
        let diag = (1.0 - leak).max(0.0).sqrt();
        let off = epsilon2.sqrt();
        let entries = DMatrix::from_fn(size, size, |i, j| {
            Complex64::new(if i == j { diag } else { off }, 0.0)
        });
        let realized = strength_of(&entries);
        Ok(Self {
            d,
            entries,
            model: CrosstalkModel::Uniform,
            mu: None,
            target_epsilon2: Some(epsilon2),
            realized_epsilon2: realized,
            seed: None,
        })
    }

    /// Wraps an arbitrary `D^2 x D^2` matrix supplied by the caller.
    pub fn user_supplied(d: usize, entries: DMatrix<Complex64>) -> Result<Self> {
        Self::from_parts(d, entries, CrosstalkModel::UserSupplied, None, None, None)
    }

    /// Builds a matrix with full metadata and validates it against the
    /// invariants of its model.
    pub fn from_parts(
        d: usize,
        entries: DMatrix<Complex64>,
        model: CrosstalkModel,
        mu: Option<f64>,
        target_epsilon2: Option<f64>,
        seed: Option<u64>,
    ) -> Result<Self> {
        check_cutoff(d)?;
        let size = d * d;
        if entries.nrows() != size || entries.ncols() != size {
            return Err(Error::MalformedMatrix(format!(
                "expected {size}x{size} entries for D = {d}, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::MalformedMatrix("non-finite entry".into()));
        }
        match model {
            CrosstalkModel::Identity | CrosstalkModel::UnitaryRandom => {
                let dev = unitarity_defect(&entries);
                if dev > UNITARITY_TOL {
                    return Err(Error::MalformedMatrix(format!(
                        "{model} matrix is not unitary: max |C^dag C - I| = {dev:e}"
                    )));
                }
            }
            CrosstalkModel::Uniform => {
                for (i, row) in entries.row_iter().enumerate() {
                    let norm2: f64 = row.iter().map(|z| z.norm_sqr()).sum();
                    if (norm2 - 1.0).abs() > ROW_NORM_TOL {
                        return Err(Error::MalformedMatrix(format!(
                            "uniform matrix row {i} has squared norm {norm2}"
                        )));
                    }
                }
            }
            CrosstalkModel::UserSupplied => {}
        }
        if let Some(mu) = mu {
            if !(mu >= 0.0) {
                return Err(Error::MalformedMatrix(format!(
                    "mu = {mu} must be non-negative"
                )));
            }
        }
        let realized_epsilon2 = strength_of(&entries);
        Ok(Self {
            d,
            entries,
            model,
            mu,
            target_epsilon2,
            realized_epsilon2,
            seed,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of modes, `D^2`.
    pub fn size(&self) -> usize {
        self.d * self.d
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn entry(&self, row: ModeIndex, col: ModeIndex) -> Complex64 {
        self.entries[(row.flat(self.d), col.flat(self.d))]
    }

    pub fn model(&self) -> CrosstalkModel {
        self.model
    }

    pub fn mu(&self) -> Option<f64> {
        self.mu
    }

    pub fn target_epsilon2(&self) -> Option<f64> {
        self.target_epsilon2
    }

    pub fn realized_epsilon2(&self) -> f64 {
        self.realized_epsilon2
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// `max |C^dag C - I|` over all entries.
    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.entries)
    }

    /// Crosstalk probability from `u_00` into `v_10`, `|C[10, 00]|^2`.
    pub fn p0(&self) -> f64 {
        self.entry(ModeIndex::ANTISYMMETRIC, ModeIndex::new(0, 0))
            .norm_sqr()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&CrosstalkWire::from(self))
            .expect("crosstalk wire format is serializable")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&CrosstalkWire::from(self))
            .expect("crosstalk wire format is serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: CrosstalkWire =
            serde_json::from_str(text).map_err(|e| Error::MalformedMatrix(e.to_string()))?;
        wire.try_into()
    }
}

fn check_cutoff(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::Domain(format!(
            "mode cutoff D = {d} must be at least 2"
        )));
    }
    Ok(())
}

fn unitarity_defect(c: &DMatrix<Complex64>) -> f64 {
    let gram = c.adjoint() * c;
    gram.iter()
        .enumerate()
        .map(|(k, z)| {
            let (i, j) = (k % gram.nrows(), k / gram.nrows());
            let target = if i == j { 1.0 } else { 0.0 };
            (z - Complex64::new(target, 0.0)).norm()
        })
        .fold(0.0, f64::max)
}

fn strength_of(c: &DMatrix<Complex64>) -> f64 {
    let size = c.nrows();
    let mut off = 0.0;
    for i in 0..size {
        for j in 0..size {
            if i != j {
                off += c[(i, j)].norm_sqr();
            }
        }
    }
    off / (size * (size - 1)) as f64
}

/// JSON wire format of a crosstalk matrix; rows follow the flattened mode order.
#[derive(Debug, Serialize, Deserialize)]
struct CrosstalkWire {
    d: usize,
    model: CrosstalkModel,
    seed: Option<u64>,
    mu: Option<f64>,
    target_epsilon2: Option<f64>,
    realized_epsilon2: f64,
    entries: Vec<Vec<[f64; 2]>>,
}

impl From<&CrosstalkMatrix> for CrosstalkWire {
    fn from(c: &CrosstalkMatrix) -> Self {
        let entries = c
            .entries
            .row_iter()
            .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
            .collect();
        Self {
            d: c.d,
            model: c.model,
            seed: c.seed,
            mu: c.mu,
            target_epsilon2: c.target_epsilon2,
            realized_epsilon2: c.realized_epsilon2,
            entries,
        }
    }
}

impl TryFrom<CrosstalkWire> for CrosstalkMatrix {
    type Error = Error;

    fn try_from(wire: CrosstalkWire) -> Result<Self> {
        let size = wire.d * wire.d;
        if wire.entries.len() != size || wire.entries.iter().any(|r| r.len() != size) {
            return Err(Error::MalformedMatrix(format!(
                "entries must be {size} rows of {size} [re, im] pairs"
            )));
        }
        let entries = DMatrix::from_fn(size, size, |i, j| {
            let [re, im] = wire.entries[i][j];
            Complex64::new(re, im)
        });
        let c = CrosstalkMatrix::from_parts(
            wire.d,
            entries,
            wire.model,
            wire.mu,
            wire.target_epsilon2,
            wire.seed,
        )?;
        if (c.realized_epsilon2 - wire.realized_epsilon2).abs() > 1e-14 {
            return Err(Error::MalformedMatrix(format!(
                "realized_epsilon2 {} does not match entries ({})",
                wire.realized_epsilon2, c.realized_epsilon2
            )));
        }
        Ok(c)
    }
}

/// Which of the two point sources an overlap refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Overlap of the ideal mode `u_nm` with the PSF of the source at `sign * x`:
/// `(sign x)^n exp(-x^2 / 2) / sqrt(n!)` for `m = 0`, zero otherwise.
pub fn hg_overlap_ideal(n: usize, m: usize, x: f64, sign: Sign) -> f64 {
    if m != 0 {
        return 0.0;
    }
    let shift = sign.value() * x;
    if n == 0 {
        return (-0.5 * x * x).exp();
    }
    if shift == 0.0 {
        return 0.0;
    }
    let log_mag = n as f64 * shift.abs().ln() - 0.5 * x * x - 0.5 * ln_factorial(n);
    let mag = log_mag.exp();
    if shift < 0.0 && n % 2 == 1 {
        -mag
    } else {
        mag
    }
}

fn ln_factorial(n: usize) -> f64 {
    statrs::function::gamma::ln_gamma(n as f64 + 1.0)
}

/// Overlaps `f_{+nm}` and `f_{-nm}` of the measured modes with the two PSFs.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapAmplitudes {
    pub d: usize,
    pub plus: Vec<Complex64>,
    pub minus: Vec<Complex64>,
}

impl OverlapAmplitudes {
    pub fn plus_at(&self, mode: ModeIndex) -> Complex64 {
        self.plus[mode.flat(self.d)]
    }

    pub fn minus_at(&self, mode: ModeIndex) -> Complex64 {
        self.minus[mode.flat(self.d)]
    }
}

fn ideal_overlaps(d: usize, x: f64, sign: Sign) -> Vec<Complex64> {
    (0..d * d)
        .map(|k| {
            let mode = ModeIndex::from_flat(k, d);
            Complex64::new(hg_overlap_ideal(mode.n, mode.m, x, sign), 0.0)
        })
        .collect()
}

/// `f_{±nm} = sum_kl C[nm, kl] beta_{±kl}(x)`.
pub fn crosstalk_overlaps(c: &CrosstalkMatrix, x: f64) -> OverlapAmplitudes {
    let d = c.d();
    let apply = |beta: Vec<Complex64>| -> Vec<Complex64> {
        c.entries()
            .row_iter()
            .map(|row| row.iter().zip(&beta).map(|(a, b)| a * b).sum())
            .collect()
    };
    OverlapAmplitudes {
        d,
        plus: apply(ideal_overlaps(d, x, Sign::Plus)),
        minus: apply(ideal_overlaps(d, x, Sign::Minus)),
    }
}

/// Renormalized detection probabilities `p(nm | x, D)` over the `D^2` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDistribution {
    d: usize,
    x: f64,
    probs: Vec<f64>,
}

impl ModeDistribution {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn p(&self, mode: ModeIndex) -> f64 {
        self.probs[mode.flat(self.d)]
    }

    /// Probability of a click in the antisymmetric output `v_10`.
    pub fn p10(&self) -> f64 {
        self.p(ModeIndex::ANTISYMMETRIC)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }
}

impl AsRef<[f64]> for ModeDistribution {
    fn as_ref(&self) -> &[f64] {
        &self.probs
    }
}

/// Detection probabilities of the crosstalk-affected demultiplexer.
pub fn mode_probabilities(c: &CrosstalkMatrix, x: f64) -> Result<ModeDistribution> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("separation x = {x} is not finite")));
    }
    let f = crosstalk_overlaps(c, x);
    let raw: Vec<f64> = f
        .plus
        .iter()
        .zip(&f.minus)
        .map(|(p, m)| 0.5 * (p.norm_sqr() + m.norm_sqr()))
        .collect();
    let total: f64 = raw.iter().sum();
    if !(total >= 1e-300) {
        return Err(Error::Degenerate(format!(
            "total detection probability {total:e} vanishes at x = {x}"
        )));
    }
    Ok(ModeDistribution {
        d: c.d(),
        x,
        probs: raw.into_iter().map(|p| p / total).collect(),
    })
}

/// Unnormalized detection probabilities, before truncation renormalization.
pub fn raw_mode_probabilities(c: &CrosstalkMatrix, x: f64) -> Vec<f64> {
    let f = crosstalk_overlaps(c, x);
    f.plus
        .iter()
        .zip(&f.minus)
        .map(|(p, m)| 0.5 * (p.norm_sqr() + m.norm_sqr()))
        .collect()
}

/// Mean squared magnitude of the off-diagonal entries.
pub fn crosstalk_strength(c: &CrosstalkMatrix) -> f64 {
    strength_of(c.entries())
}

pub fn uniform_crosstalk(d: usize, epsilon2: f64) -> Result<CrosstalkMatrix> {
    CrosstalkMatrix::uniform(d, epsilon2)
}

/// `|u_00(r)|^2` for the Gaussian PSF with unit width.
fn psf_intensity(rx: f64, ry: f64) -> f64 {
    FRAC_2_PI * (-2.0 * (rx * rx + ry * ry)).exp()
}

/// Image-plane detection density for two sources at `(±x, 0)`.
pub fn direct_imaging_intensity(x: f64, r: [f64; 2]) -> f64 {
    0.5 * (psf_intensity(r[0] - x, r[1]) + psf_intensity(r[0] + x, r[1]))
}

/// Peak value of the single-source density, `|u_00(0)|^2`.
pub const PSF_PEAK: f64 = 2.0 / PI;
