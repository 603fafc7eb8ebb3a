//! Small numerical kernels shared by the solvers: composite quadrature,
//! fourth-order finite differences on uniform grids, cubic Hermite
//! interpolation.

/// Composite Simpson rule for samples on a uniform grid with step `h`.
///
/// An odd number of intervals is handled with Simpson's 3/8 rule on the
/// last three intervals. Two samples fall back to the trapezoid rule.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    match n {
        0 | 1 => 0.0,
        2 => 0.5 * h * (values[0] + values[1]),
        3 => h / 3.0 * (values[0] + 4.0 * values[1] + values[2]),
        _ => {
            let intervals = n - 1;
            let (even_end, tail) = if intervals.is_multiple_of(2) { (n - 1, false) } else { (n - 4, true) };
            let mut acc = values[0] + values[even_end];
            for (k, v) in values.iter().enumerate().take(even_end).skip(1) {
                acc += if k % 2 == 1 { 4.0 * v } else { 2.0 * v };
            }
            let mut total = h / 3.0 * acc;
            if tail {
                let v = &values[n - 4..];
                total += 3.0 * h / 8.0 * (v[0] + 3.0 * v[1] + 3.0 * v[2] + v[3]);
            }
            total
        }
    }
}

const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Composite five-point Gauss–Legendre quadrature of `f` over `[a, b]`.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * width;
        let half = 0.5 * width;
        let mut acc = 0.0;
        for (x, w) in GL5_NODES.iter().zip(GL5_WEIGHTS.iter()) {
            acc += w * f(mid + half * x);
        }
        total += half * acc;
    }
    total
}

/// Fourth-order derivative of uniformly spaced samples: central stencil in
/// the interior, one-sided stencils at the two points nearest each end.
///
/// Requires at least five samples.
pub fn derivative4(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "fourth-order differences need at least five samples");
    let f = values;
    let inv = 1.0 / (12.0 * h);
    let mut d = vec![0.0; n];
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * inv;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * inv;
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * inv;
    }
    d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) * inv;
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) * inv;
    d
}

/// Cubic Hermite interpolant on a cell of width `h` at fraction `u ∈ [0, 1]`,
/// given endpoint values and endpoint derivatives.
#[inline]
pub fn hermite(f0: f64, f1: f64, d0: f64, d1: f64, h: f64, u: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    let h11 = u3 - u2;
    h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1
}

/// Derivative (with respect to the cell coordinate, not `u`) of [`hermite`].
#[inline]
pub fn hermite_slope(f0: f64, f1: f64, d0: f64, d1: f64, h: f64, u: f64) -> f64 {
    let u2 = u * u;
    let dh00 = 6.0 * u2 - 6.0 * u;
    let dh10 = 3.0 * u2 - 4.0 * u + 1.0;
    let dh01 = -6.0 * u2 + 6.0 * u;
    let dh11 = 3.0 * u2 - 2.0 * u;
    (dh00 * f0 + dh01 * f1) / h + dh10 * d0 + dh11 * d1
}

/// Observed convergence order of `errors` measured at grid sizes `sizes`:
/// the least-squares slope of `−log e` against `log n`. Errors at or below
/// `floor` carry no information about the order and are dropped; `None`
/// when fewer than two points remain.
pub fn observed_order(sizes: &[f64], errors: &[f64], floor: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        sizes.iter().zip(errors).filter(|(_, &e)| e > floor).map(|(&n, &e)| (n.ln(), -e.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
