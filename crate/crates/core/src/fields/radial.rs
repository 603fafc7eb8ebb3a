//! Discrete energy of radial maps `H(s)e^{iθ}` and a projected descent
//! minimizer over nondecreasing profiles, independent of the ODE.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::descent::{isotonic_regression, minimize, DescentOptions, Problem};
use crate::fields::EnergyReport;
use crate::ode::log_grid;
use crate::radial::AnnulusPair;
use crate::weights::Weight;

/// Profile samples `H_i` on a log-uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialVector {
    pub grid: Vec<f64>,
    pub log_step: f64,
    pub values: Vec<f64>,
}

impl RadialVector {
    pub fn from_fn(r: f64, big_r: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let (grid, log_step) = log_grid(r, big_r, n);
        let values = grid.iter().map(|&s| f(s)).collect();
        RadialVector { grid, log_step, values }
    }

    pub fn n(&self) -> usize {
        self.grid.len() - 1
    }

    /// Largest radius at which `H` still equals the inner target radius.
    pub fn plateau_end(&self, r_star: f64) -> f64 {
        let k = self.values.iter().take_while(|&&v| v <= r_star).count();
        self.grid[k.saturating_sub(1)]
    }
}

/// Edge weights `λ(s_{k+½})` of the discrete radial energy.
fn midpoint_weights(w: &Weight, v: &RadialVector) -> Vec<f64> {
    let t0 = v.grid[0].ln();
    (0..v.n()).map(|k| w.value((t0 + (k as f64 + 0.5) * v.log_step).exp())).collect()
}

fn split_energy(lam: &[f64], h: f64, values: &[f64]) -> (f64, f64) {
    let mut radial = 0.0;
    let mut angular = 0.0;
    for (k, &l) in lam.iter().enumerate() {
        let (a, b) = (values[k], values[k + 1]);
        angular += l * 0.5 * (a * a + b * b);
        radial += l * (b - a) * (b - a) / (h * h);
    }
    (2.0 * PI * h * radial, 2.0 * PI * h * angular)
}

/// `2π ∫ λ(H²/s + sḢ²) ds`, written in `t = ln s` as `2π ∫ λ(H² + H_t²) dt`
/// with midpoint differences and trapezoidal mass terms on each cell.
pub fn radial_energy(w: &Weight, v: &RadialVector) -> Result<f64> {
    radial_energy_report(w, v).map(|r| r.total)
}

pub fn radial_energy_report(w: &Weight, v: &RadialVector) -> Result<EnergyReport> {
    let scale = v.values.iter().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);
    if let Some(k) = v.values.windows(2).position(|p| p[1] < p[0] - 1e-12 * scale) {
        return Err(Error::Admissibility(format!("profile decreases between s = {} and {}", v.grid[k], v.grid[k + 1])));
    }
    let lam = midpoint_weights(w, v);
    let (radial, angular) = split_energy(&lam, v.log_step, &v.values);
    Ok(EnergyReport::new(radial, angular, v.grid.len(), 1, "radial-midpoint"))
}

struct RadialProblem {
    lam: Vec<f64>,
    h: f64,
    r_star: f64,
    big_r_star: f64,
}

impl Problem for RadialProblem {
    type T = f64;

    fn gradient(&self, x: &[f64], g: &mut [f64]) -> f64 {
        let c = 2.0 * PI * self.h;
        let inv = 2.0 / (self.h * self.h);
        g.iter_mut().for_each(|v| *v = 0.0);
        let mut e = 0.0;
        for (k, &l) in self.lam.iter().enumerate() {
            let (a, b) = (x[k], x[k + 1]);
            let d = b - a;
            e += l * (0.5 * (a * a + b * b) + d * d / (self.h * self.h));
            g[k] += c * l * (a - inv * d);
            g[k + 1] += c * l * (b + inv * d);
        }
        c * e
    }

    fn energy(&self, x: &[f64]) -> f64 {
        let (r, a) = split_energy(&self.lam, self.h, x);
        r + a
    }

    fn project(&self, x: &mut [f64]) {
        let n = x.len() - 1;
        x[0] = self.r_star;
        x[n] = self.big_r_star;
        isotonic_regression(&mut x[1..n]);
        for v in &mut x[1..n] {
            *v = v.clamp(self.r_star, self.big_r_star);
        }
    }

    fn lipschitz(&self) -> f64 {
        let c = 2.0 * PI * self.h * (1.0 + 4.0 / (self.h * self.h));
        let mut best: f64 = 0.0;
        for k in 0..=self.lam.len() {
            let left = if k > 0 { self.lam[k - 1] } else { 0.0 };
            let right = self.lam.get(k).copied().unwrap_or(0.0);
            best = best.max(c * (left + right));
        }
        best
    }
}

impl RadialProblem {
    /// Exact minimizer with the active set of `x` frozen: nodes on a target
    /// radius stay fixed and the others are solved for directly from the
    /// tridiagonal optimality system. Nodes that land outside the bounds are
    /// added to the active set and the solve repeated. Returns `None` when
    /// no feasible profile results.
    fn polish(&self, x: &[f64]) -> Option<Vec<f64>> {
        let n = x.len() - 1;
        let c = 2.0 * PI * self.h;
        let stiff = 2.0 / (self.h * self.h);
        // node Hessian of E = ½ xᵀ A x: diagonal and first off-diagonal
        let mut diag = vec![0.0; n + 1];
        let mut off = vec![0.0; n];
        for (k, &l) in self.lam.iter().enumerate() {
            diag[k] += c * l * (1.0 + stiff);
            diag[k + 1] += c * l * (1.0 + stiff);
            off[k] = -c * l * stiff;
        }
        let mut fixed: Vec<Option<f64>> = (0..=n)
            .map(|k| {
                if k == n || x[k] >= self.big_r_star {
                    Some(self.big_r_star)
                } else if k == 0 || x[k] <= self.r_star {
                    Some(self.r_star)
                } else {
                    None
                }
            })
            .collect();
        for _ in 0..32 {
            let free: Vec<usize> = (0..=n).filter(|&k| fixed[k].is_none()).collect();
            let mut out: Vec<f64> = fixed.iter().map(|v| v.unwrap_or(0.0)).collect();
            if !free.is_empty() {
                let m = free.len();
                let (mut sub, mut sup, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m]);
                let dia: Vec<f64> = free.iter().map(|&k| diag[k]).collect();
                for (q, &k) in free.iter().enumerate() {
                    match fixed[k - 1] {
                        Some(v) => rhs[q] -= off[k - 1] * v,
                        None => sub[q] = off[k - 1],
                    }
                    match fixed[k + 1] {
                        Some(v) => rhs[q] -= off[k] * v,
                        None => sup[q] = off[k],
                    }
                }
                let solved = thomas(&sub, &dia, &sup, &rhs)?;
                for (q, &k) in free.iter().enumerate() {
                    out[k] = solved[q];
                }
            }
            let mut grew = false;
            for &k in &free {
                if out[k] < self.r_star {
                    fixed[k] = Some(self.r_star);
                    grew = true;
                } else if out[k] > self.big_r_star {
                    fixed[k] = Some(self.big_r_star);
                    grew = true;
                }
            }
            if !grew {
                return out.windows(2).all(|p| p[1] >= p[0]).then_some(out);
            }
        }
        None
    }
}

/// Tridiagonal solve; `sub[0]` and `sup[m-1]` are ignored.
fn thomas(sub: &[f64], dia: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let m = dia.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut denom = dia[0];
    if denom == 0.0 {
        return None;
    }
    c[0] = sup[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..m {
        denom = dia[i] - sub[i] * c[i - 1];
        if denom == 0.0 {
            return None;
        }
        c[i] = sup[i] / denom;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    for i in (0..m - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

#[derive(Debug, Clone)]
pub struct RadialMinimum {
    pub profile: RadialVector,
    pub report: EnergyReport,
    pub iterations: usize,
    pub converged: bool,
    /// Set when the iteration cap stopped the finest level.
    pub warning: Option<String>,
}

/// Coarsest level of the coarse-to-fine schedule.
const COARSEST: usize = 32;

fn prolong(coarse: &[f64]) -> Vec<f64> {
    let mut fine = Vec::with_capacity(2 * coarse.len() - 1);
    for k in 0..coarse.len() - 1 {
        fine.push(coarse[k]);
        fine.push(0.5 * (coarse[k] + coarse[k + 1]));
    }
    fine.push(coarse[coarse.len() - 1]);
    fine
}

/// Minimizes the discrete radial energy over nondecreasing profiles with
/// `H(r) = r_*`, `H(R) = R_*`. Starts from the profile linear in `s` on a
/// coarse grid and refines by factors of two up to `n` cells. On every
/// level the projected descent is followed by an exact solve on its active
/// set, kept only when it is feasible and lowers the energy.
pub fn minimize_radial(w: &Weight, pair: &AnnulusPair, n: usize) -> Result<RadialMinimum> {
    minimize_radial_with(w, pair, n, &DescentOptions { step_tol: 1e-12, max_iter: 20_000, ..Default::default() })
}

pub fn minimize_radial_with(w: &Weight, pair: &AnnulusPair, n: usize, opts: &DescentOptions) -> Result<RadialMinimum> {
    w.validate()?;
    if n < 4 {
        return Err(Error::InvalidArgument(format!("radial grid needs at least 4 cells, got {n}")));
    }
    let (lo, hi) = w.domain();
    if !(w.contains(pair.r) && w.contains(pair.big_r)) {
        return Err(Error::Domain { s: if w.contains(pair.r) { pair.big_r } else { pair.r }, lo, hi });
    }
    let mut levels = vec![n];
    while levels[levels.len() - 1] % 2 == 0 && levels[levels.len() - 1] / 2 >= COARSEST {
        let next = levels[levels.len() - 1] / 2;
        levels.push(next);
    }
    levels.reverse();

    let slope = (pair.big_r_star - pair.r_star) / (pair.big_r - pair.r);
    let mut x: Vec<f64> = Vec::new();
    let mut outcome = None;
    for (level, &m) in levels.iter().enumerate() {
        let v = RadialVector::from_fn(pair.r, pair.big_r, m, |s| pair.r_star + slope * (s - pair.r));
        if level == 0 {
            x = v.values.clone();
        } else {
            x = prolong(&x);
        }
        let problem = RadialProblem {
            lam: midpoint_weights(w, &v),
            h: v.log_step,
            r_star: pair.r_star,
            big_r_star: pair.big_r_star,
        };
        let mut out = minimize(&problem, x, opts);
        if let Some(polished) = problem.polish(&out.x) {
            let e = problem.energy(&polished);
            if e <= out.energy * (1.0 + 1e-13) {
                out.x = polished;
                out.energy = e;
                out.converged = true;
            }
        }
        x = out.x.clone();
        outcome = Some((v, out));
    }
    let (mut v, out) = outcome.expect("at least one level");
    v.values = out.x;
    let report = radial_energy_report(w, &v)?;
    let warning = (!out.converged).then(|| {
        format!("iteration cap {} reached before the relative energy change fell below {:e}", opts.max_iter, opts.rel_energy_tol)
    });
    Ok(RadialMinimum { profile: v, report, iterations: out.iterations, converged: out.converged, warning })
}
