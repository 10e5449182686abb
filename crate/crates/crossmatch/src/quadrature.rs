//! Adaptive numerical integration: Gauss-Kronrod 7/15 panels with bisection
//! in 1D, nested over the dimensions for boxes in up to three dimensions.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Nodes of the 15-point Kronrod rule on [-1, 1] (positive half; the rule is
// symmetric). Odd indices are the embedded 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One Gauss-Kronrod 7/15 panel: returns the Kronrod estimate and a
/// conservative error estimate in the QUADPACK style.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut result_gauss = f_center * WG[3];
    let mut result_kronrod = f_center * WGK[7];
    let mut fv = [0.0f64; 15];
    fv[7] = f_center;
    for k in 0..7 {
        let dx = half * XGK[k];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[k] = f1;
        fv[14 - k] = f2;
        result_kronrod += WGK[k] * (f1 + f2);
        if k % 2 == 1 {
            result_gauss += WG[k / 2] * (f1 + f2);
        }
    }
    let mean = result_kronrod * 0.5;
    let mut resasc = WGK[7] * (f_center - mean).abs();
    for k in 0..7 {
        resasc += WGK[k] * ((fv[k] - mean).abs() + (fv[14 - k] - mean).abs());
    }
    resasc *= half.abs();
    let value = result_kronrod * half;
    let raw = ((result_kronrod - result_gauss) * half).abs();
    let err = if resasc != 0.0 && raw != 0.0 {
        resasc * (200.0 * raw / resasc).powf(1.5).min(1.0)
    } else {
        raw
    };
    (value, err)
}

struct Interval {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err && self.a == other.a
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err).then(self.a.total_cmp(&other.a))
    }
}

/// Adaptively integrate `f` over `[a, b]`, optionally pre-splitting at the
/// given breakpoints (useful when the integrand has known kinks, e.g. the
/// edges of uniform densities). Returns `(value, error_estimate)`.
pub fn integrate_1d(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    abs_tol: f64,
    max_panels: usize,
) -> Result<(f64, f64)> {
    if !(b > a) {
        return Err(Error::InvalidParameter(format!("bad interval [{a}, {b}]")));
    }
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.push(a);
    cuts.push(b);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut heap = BinaryHeap::new();
    let mut err_sum = 0.0;
    for w in cuts.windows(2) {
        let (value, err) = gk15(f, w[0], w[1]);
        err_sum += err;
        heap.push(Interval { a: w[0], b: w[1], value, err });
    }
    let mut panels = heap.len();
    while err_sum > abs_tol && panels < max_panels {
        let worst = heap.pop().expect("heap nonempty");
        if worst.err <= 0.0 || worst.b - worst.a < 1e-300 {
            heap.push(worst);
            break;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le) = gk15(f, worst.a, mid);
        let (rv, re) = gk15(f, mid, worst.b);
        err_sum += le + re - worst.err;
        heap.push(Interval { a: worst.a, b: mid, value: lv, err: le });
        heap.push(Interval { a: mid, b: worst.b, value: rv, err: re });
        panels += 1;
    }
    // Sum the final partition in positional order so the result does not
    // depend on heap pop history.
    let mut intervals: Vec<Interval> = heap.into_vec();
    intervals.sort_by(|x, y| x.a.total_cmp(&y.a));
    let total: f64 = intervals.iter().map(|i| i.value).sum();
    let total_err: f64 = intervals.iter().map(|i| i.err).sum();
    if !total.is_finite() {
        return Err(Error::NumericalFailure("non-finite quadrature result".into()));
    }
    Ok((total, total_err))
}

/// Adaptive integration of `f` over the box `[lo, hi]` in 1 to 3 dimensions,
/// by nesting 1D rules (last dimension innermost). `breaks[k]` holds
/// pre-split points for dimension `k`. The returned error estimate combines
/// the outer estimate with the worst inner estimate scaled by the outer
/// width.
pub fn integrate_box(
    f: &dyn Fn(&[f64]) -> f64,
    lo: &[f64],
    hi: &[f64],
    breaks: &[Vec<f64>],
    abs_tol: f64,
) -> Result<(f64, f64)> {
    let d = lo.len();
    if d == 0 || d > 3 || hi.len() != d || breaks.len() != d {
        return Err(Error::InvalidParameter(format!(
            "box quadrature supports dimensions 1..=3, got {d}"
        )));
    }
    const MAX_PANELS: usize = 4000;
    match d {
        1 => integrate_1d(&|x| f(&[x]), lo[0], hi[0], &breaks[0], abs_tol, MAX_PANELS),
        2 => {
            let inner_tol = abs_tol / (10.0 * (hi[0] - lo[0]).max(1.0));
            let inner_err = std::cell::Cell::new(0.0f64);
            let outer = |x: f64| {
                let (v, e) =
                    integrate_1d(&|y| f(&[x, y]), lo[1], hi[1], &breaks[1], inner_tol, MAX_PANELS)
                        .unwrap_or((f64::NAN, f64::INFINITY));
                inner_err.set(inner_err.get().max(e));
                v
            };
            let (v, e) = integrate_1d(&outer, lo[0], hi[0], &breaks[0], abs_tol, MAX_PANELS)?;
            Ok((v, e + inner_err.get() * (hi[0] - lo[0])))
        }
        _ => {
            let inner_tol = abs_tol / (10.0 * (hi[0] - lo[0]).max(1.0));
            let inner_err = std::cell::Cell::new(0.0f64);
            let outer = |x: f64| {
                let (v, e) = integrate_box(
                    &|yz: &[f64]| f(&[x, yz[0], yz[1]]),
                    &lo[1..],
                    &hi[1..],
                    &breaks[1..],
                    inner_tol,
                )
                .unwrap_or((f64::NAN, f64::INFINITY));
                inner_err.set(inner_err.get().max(e));
                v
            };
            let (v, e) = integrate_1d(&outer, lo[0], hi[0], &breaks[0], abs_tol, MAX_PANELS)?;
            Ok((v, e + inner_err.get() * (hi[0] - lo[0])))
        }
    }
}
