//! Binomial probabilities for sample sizes up to ~1e9.
//!
//! The CDF is the regularized incomplete beta function
//! `F(k; n, p) = I_{1-p}(n - k, k + 1)`, evaluated with a continued fraction
//! whose prefactor is a binomial point probability. Point probabilities use
//! Loader's saddle-point expansion, which avoids the cancellation between
//! large log-gamma terms.

use std::f64::consts::PI;

use crate::error::{Error, Result};

// stirlerr(n) = ln n! - (n + 1/2) ln n + n - ln sqrt(2 pi), n = 1..=15
const STIRLERR: [f64; 15] = [
    0.081_061_466_795_327_258_22,
    0.041_340_695_955_409_294_09,
    0.027_677_925_684_998_339_15,
    0.020_790_672_103_765_093_11,
    0.016_644_691_189_821_192_16,
    0.013_876_128_823_070_747_99,
    0.011_896_709_945_891_770_10,
    0.010_411_265_261_972_096_50,
    0.009_255_462_182_712_732_918,
    0.008_330_563_433_362_871_256,
    0.007_573_675_487_951_840_795,
    0.006_942_840_107_209_529_866,
    0.006_408_994_188_004_207_068,
    0.005_951_370_112_758_847_736,
    0.005_554_733_551_962_801_371,
];

fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return STIRLERR[n as usize - 1];
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / m) + m - x`, computed without cancellation.
fn bd0(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        let mut j = 1.0;
        loop {
            ej *= v;
            let next = s + ej / (2.0 * j + 1.0);
            if next == s {
                return next;
            }
            s = next;
            j += 1.0;
        }
    }
    x * (x / m).ln() + m - x
}

fn check_args(k: u64, n: u64, p: f64) -> Result<()> {
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds n = {n}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!(
            "success probability {p} outside [0, 1]"
        )));
    }
    Ok(())
}

/// `ln P(X = k)` for `X ~ Binomial(n, p)`.
pub fn ln_binomial_pmf(k: u64, n: u64, p: f64) -> Result<f64> {
    check_args(k, n, p)?;
    Ok(ln_pmf_unchecked(k, n, p))
}

fn ln_pmf_unchecked(k: u64, n: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let (kf, nf) = (k as f64, n as f64);
    if k == 0 {
        return nf * (-p).ln_1p();
    }
    if k == n {
        return nf * p.ln();
    }
    let lc =
        stirlerr(nf) - stirlerr(kf) - stirlerr(nf - kf) - bd0(kf, nf * p) - bd0(nf - kf, nf * q);
    let lf = (2.0 * PI).ln() + kf.ln() + (-kf / nf).ln_1p();
    lc - 0.5 * lf
}

/// `P(X = k)` for `X ~ Binomial(n, p)`.
pub fn binomial_pmf(k: u64, n: u64, p: f64) -> Result<f64> {
    Ok(ln_binomial_pmf(k, n, p)?.exp())
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let max_iter = 1000 + (10.0 * a.max(b).sqrt()) as usize;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= EPS {
            return Ok(h);
        }
    }
    Err(Error::Numerical(format!(
        "incomplete beta continued fraction did not converge (a = {a}, b = {b}, x = {x})"
    )))
}

/// Lower and upper tails `(P(X <= k), P(X > k))`; whichever tail is smaller
/// is computed directly and the other as its complement.
pub fn binomial_tails(k: u64, n: u64, p: f64) -> Result<(f64, f64)> {
    check_args(k, n, p)?;
    if k == n || p == 0.0 {
        return Ok((1.0, 0.0));
    }
    if p == 1.0 {
        return Ok((0.0, 1.0));
    }
    // I_x(a, b) with a = n - k, b = k + 1, x = 1 - p.
    let (a, b) = ((n - k) as f64, (k + 1) as f64);
    let x = 1.0 - p;
    if x < (a + 1.0) / (a + b + 2.0) {
        let lower = (p.ln() + ln_pmf_unchecked(k, n, p)).exp() * beta_cf(a, b, x)?;
        let lower = lower.clamp(0.0, 1.0);
        Ok((lower, 1.0 - lower))
    } else {
        let upper = ((-p).ln_1p() + ln_pmf_unchecked(k + 1, n, p)).exp() * beta_cf(b, a, p)?;
        let upper = upper.clamp(0.0, 1.0);
        Ok((1.0 - upper, upper))
    }
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
pub fn binomial_cdf(k: u64, n: u64, p: f64) -> Result<f64> {
    Ok(binomial_tails(k, n, p)?.0)
}

/// `P(X > k)` for `X ~ Binomial(n, p)`.
pub fn binomial_sf(k: u64, n: u64, p: f64) -> Result<f64> {
    Ok(binomial_tails(k, n, p)?.1)
}

/// Tails at a real-valued threshold `t`: `(P(X <= floor t), P(X > floor t))`,
/// saturating for `t < 0` and `t >= n`.
pub fn binomial_tails_at(threshold: f64, n: u64, p: f64) -> Result<(f64, f64)> {
    if threshold.is_nan() {
        return Err(Error::Domain("threshold is NaN".into()));
    }
    if threshold < 0.0 {
        return Ok((0.0, 1.0));
    }
    let c = threshold.floor();
    if c >= n as f64 {
        return Ok((1.0, 0.0));
    }
    binomial_tails(c as u64, n, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn cdf_examples() {
        assert_eq!(binomial_cdf(10, 10, 0.3).unwrap(), 1.0);
        assert_relative_eq!(
            binomial_cdf(0, 10, 0.1).unwrap(),
            0.9f64.powi(10),
            epsilon = 1e-15
        );
        assert_relative_eq!(binomial_cdf(0, 10, 0.1).unwrap(), 0.3486784, epsilon = 1e-7);
    }

    #[test]
    fn degenerate_probabilities() {
        assert_eq!(binomial_cdf(0, 50, 0.0).unwrap(), 1.0);
        assert_eq!(binomial_cdf(49, 50, 1.0).unwrap(), 0.0);
        assert_eq!(binomial_pmf(50, 50, 1.0).unwrap(), 1.0);
        assert_eq!(binomial_pmf(0, 0, 0.4).unwrap(), 1.0);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(binomial_cdf(11, 10, 0.5), Err(Error::Domain(_))));
        assert!(matches!(binomial_cdf(1, 10, 1.5), Err(Error::Domain(_))));
        assert!(matches!(
            binomial_cdf(1, 10, f64::NAN),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn pmf_matches_small_n_products() {
        // C(12, 5) 0.3^5 0.7^7
        let direct = 792.0 * 0.3f64.powi(5) * 0.7f64.powi(7);
        assert_relative_eq!(
            binomial_pmf(5, 12, 0.3).unwrap(),
            direct,
            max_relative = 1e-14
        );
    }

    #[test]
    fn large_n_is_stable() {
        let n = 1_000_000_000u64;
        let p = 0.01;
        let mean = 10_000_000u64;
        let (lo, hi) = binomial_tails(mean, n, p).unwrap();
        assert!((lo + hi - 1.0).abs() < 1e-15);
        assert!(lo > 0.5 && lo < 0.51, "{lo}");
        let far = binomial_cdf(mean - 20_000, n, p).unwrap();
        assert!(far > 0.0 && far < 1e-9, "{far}");
    }

    #[test]
    fn threshold_saturation() {
        assert_eq!(binomial_tails_at(-0.5, 10, 0.2).unwrap(), (0.0, 1.0));
        assert_eq!(binomial_tails_at(10.0, 10, 0.2).unwrap(), (1.0, 0.0));
        assert_eq!(
            binomial_tails_at(2.7, 10, 0.2).unwrap(),
            binomial_tails(2, 10, 0.2).unwrap()
        );
    }
}
