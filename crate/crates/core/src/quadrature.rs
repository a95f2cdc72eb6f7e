//! Adaptive Gauss-Kronrod quadrature on intervals and on a centered disk.

use crate::error::{Error, Result};

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Limits for the adaptive subdivision.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

/// Integral estimate with its error bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Estimate {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Estimate {
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

#[derive(Debug)]
struct Segment {
    a: f64,
    b: f64,
    est: Estimate,
}

/// Globally adaptive integration of `f` over `[a, b]`: the segment with the
/// largest error estimate is bisected until the summed error is below
/// `abs_tol`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    opts: QuadratureOptions,
) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let mut segments = vec![Segment {
        a,
        b,
        est: kronrod15(&mut f, a, b),
    }];
    loop {
        let (value, error) = segments
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.est.value, e + s.est.error));
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite integrand on [{a}, {b}]"
            )));
        }
        if error <= opts.abs_tol {
            return Ok(Estimate { value, error });
        }
        if segments.len() >= opts.max_intervals {
            return Err(Error::Numerical(format!(
                "quadrature did not reach tolerance {:e} on [{a}, {b}] (error {error:e})",
                opts.abs_tol
            )));
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.est.error.total_cmp(&y.1.est.error))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            return Err(Error::Numerical("quadrature interval collapsed".into()));
        }
        segments.push(Segment {
            a: seg.a,
            b: mid,
            est: kronrod15(&mut f, seg.a, mid),
        });
        segments.push(Segment {
            a: mid,
            b: seg.b,
            est: kronrod15(&mut f, mid, seg.b),
        });
    }
}

/// Integral of `f(x, y)` over the disk of the given radius centered at the
/// origin, as iterated adaptive quadrature (outer `x`, inner `y`).
///
/// The inner integrals get a share of the tolerance proportional to their
/// interval so that the total error stays below `abs_tol`.
pub fn integrate_disk<F: Fn(f64, f64) -> f64>(
    f: F,
    radius: f64,
    opts: QuadratureOptions,
) -> Result<Estimate> {
    let inner_tol = opts.abs_tol / (4.0 * radius);
    let mut failure: Option<Error> = None;
    let mut inner_error = 0.0_f64;
    let outer = integrate(
        |x| {
            if failure.is_some() {
                return 0.0;
            }
            let half_chord = (radius * radius - x * x).max(0.0).sqrt();
            let inner_opts = QuadratureOptions {
                abs_tol: inner_tol,
                ..opts
            };
            match integrate(|y| f(x, y), -half_chord, half_chord, inner_opts) {
                Ok(est) => {
                    inner_error = inner_error.max(est.error);
                    est.value
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        -radius,
        radius,
        QuadratureOptions {
            abs_tol: 0.5 * opts.abs_tol,
            ..opts
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let est = outer?;
    Ok(Estimate {
        value: est.value,
        error: est.error + 2.0 * radius * inner_error,
    })
}
