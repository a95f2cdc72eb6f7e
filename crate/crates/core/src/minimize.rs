//! Bracketed scalar minimization: a coarse grid locates the basin, golden-section
//! search refines it.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Location and value of a minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimum {
    pub arg: f64,
    pub value: f64,
}

/// Golden-section search for the minimum of a unimodal `f` on `[lo, hi]`,
/// stopping once the bracket is narrower than `tol`.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Minimum {
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    if fc <= fd {
        Minimum { arg: c, value: fc }
    } else {
        Minimum { arg: d, value: fd }
    }
}

/// Minimizes `f` on `[0, 1]`. The grid includes both endpoints; the best grid
/// point's neighbours bracket the golden-section refinement. The returned
/// minimum is never worse than the best grid point.
pub fn minimize_unit_interval<F: FnMut(f64) -> f64>(
    mut f: F,
    grid_points: usize,
    tol: f64,
) -> Minimum {
    let n = grid_points.max(3);
    let step = 1.0 / (n - 1) as f64;
    let mut best = Minimum {
        arg: 0.0,
        value: f(0.0),
    };
    let mut best_i = 0;
    for i in 1..n {
        let s = if i == n - 1 { 1.0 } else { i as f64 * step };
        let v = f(s);
        if v < best.value {
            best = Minimum { arg: s, value: v };
            best_i = i;
        }
    }
    let lo = best_i.saturating_sub(1) as f64 * step;
    let hi = ((best_i + 1).min(n - 1) as f64 * step).min(1.0);
    let refined = golden_section(&mut f, lo, hi, tol);
    if refined.value < best.value {
        refined
    } else {
        best
    }
}
