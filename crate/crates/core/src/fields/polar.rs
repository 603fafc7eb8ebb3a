//! Complex maps sampled on a polar grid of the domain annulus, their
//! discrete weighted Dirichlet energy, its exact gradient, and a projected
//! descent search for competitors below the radial minimum.
//!
//! Rows are radii `s_i = r e^{iΔt}` (both boundary circles included),
//! columns are angles `θ_j = 2πj/N_θ`. In `t = ln s` the energy reads
//! `∫∫ λ(|h_t|² + |h_θ|²) dt dθ`; it is discretized edge by edge, which
//! keeps it an exact positive quadratic form in the node values.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::descent::{minimize, DescentOptions, Problem};
use crate::fields::perturb::{angles, Perturbation};
use crate::fields::EnergyReport;
use crate::radial::{build, AnnulusPair, RadialSolution};
use crate::weights::Weight;

/// Default grid for acceptance-scale runs.
pub const DEFAULT_POLAR_GRID: usize = 256;

const MODULUS_SLACK: f64 = 1e-9;
/// Minimum number of grid rows handed to one worker task.
const ROWS_PER_TASK: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Boundary circles map onto the target circles; points slide freely.
    Free,
    /// Outer circle pinned to `R_* e^{iθ}`.
    FixedOuter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarGridMap {
    pub pair: AnnulusPair,
    pub mode: BoundaryMode,
    pub n_s: usize,
    pub n_theta: usize,
    /// Row-major: `values[i * n_theta + j] = h(s_i e^{iθ_j})`.
    pub values: Vec<Complex64>,
}

impl PolarGridMap {
    pub fn from_fn(
        pair: AnnulusPair,
        mode: BoundaryMode,
        n_s: usize,
        n_theta: usize,
        f: impl Fn(f64, f64) -> Complex64,
    ) -> Result<Self> {
        if n_s < 3 || n_theta < 4 {
            return Err(Error::InvalidArgument(format!("polar grid {n_s}×{n_theta} too small")));
        }
        let mut m = PolarGridMap { pair, mode, n_s, n_theta, values: Vec::with_capacity(n_s * n_theta) };
        let th = angles(n_theta);
        for i in 0..n_s {
            let s = m.radius(i);
            for &t in &th {
                m.values.push(f(s, t));
            }
        }
        Ok(m)
    }

    /// The radial map `H(s) e^{iθ}` for a given profile.
    pub fn radial(
        pair: AnnulusPair,
        mode: BoundaryMode,
        n_s: usize,
        n_theta: usize,
        profile: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        Self::from_fn(pair, mode, n_s, n_theta, |s, t| Complex64::from_polar(profile(s), t))
    }

    pub fn log_step(&self) -> f64 {
        self.pair.domain_modulus() / (self.n_s - 1) as f64
    }

    pub fn angle_step(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn radius(&self, i: usize) -> f64 {
        if i == self.n_s - 1 {
            self.pair.big_r
        } else {
            self.pair.r * (i as f64 * self.log_step()).exp()
        }
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.angle_step()
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[i * self.n_theta + j]
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.values[i * self.n_theta..(i + 1) * self.n_theta]
    }

    /// Checks the modulus bounds, the boundary circles, the pinned outer
    /// row in fixed mode, and unit winding of every row.
    pub fn check_admissible(&self) -> Result<()> {
        let (lo, hi) = (self.pair.r_star, self.pair.big_r_star);
        let last = self.n_s - 1;
        for i in 0..self.n_s {
            for j in 0..self.n_theta {
                let h = self.at(i, j);
                let m = h.norm();
                if !(m >= lo * (1.0 - MODULUS_SLACK) && m <= hi * (1.0 + MODULUS_SLACK)) {
                    return Err(Error::Admissibility(format!("|h| = {m} outside [{lo}, {hi}] at node ({i}, {j})")));
                }
                if i == 0 && (m - lo).abs() > MODULUS_SLACK * lo {
                    return Err(Error::Admissibility(format!("inner circle not mapped to |h| = {lo} at column {j}")));
                }
                if i == last && (m - hi).abs() > MODULUS_SLACK * hi {
                    return Err(Error::Admissibility(format!("outer circle not mapped to |h| = {hi} at column {j}")));
                }
                if i == last && self.mode == BoundaryMode::FixedOuter {
                    let pinned = Complex64::from_polar(hi, self.theta(j));
                    if (h - pinned).norm() > MODULUS_SLACK * hi {
                        return Err(Error::Admissibility(format!("outer boundary moved at column {j}")));
                    }
                }
            }
        }
        for i in 0..self.n_s {
            let w = winding_number(self, i)?;
            if w != 1 {
                return Err(Error::Admissibility(format!("row {i} winds {w} times around the origin")));
            }
        }
        Ok(())
    }

    /// Writes the columns `i, j, s, theta, re_h, im_h`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "i,j,s,theta,re_h,im_h")?;
        for i in 0..self.n_s {
            let s = self.radius(i);
            for j in 0..self.n_theta {
                let h = self.at(i, j);
                writeln!(out, "{},{},{},{},{},{}", i, j, s, self.theta(j), h.re, h.im)?;
            }
        }
        Ok(())
    }
}

/// Degree of row `i` about the origin from principal-branch increments.
pub fn winding_number(m: &PolarGridMap, row: usize) -> Result<i64> {
    row_winding(m.row(row)).ok_or_else(|| Error::DegenerateRow { row, reason: "a node maps to the origin".into() })
}

pub(crate) fn row_winding(row: &[Complex64]) -> Option<i64> {
    if row.iter().any(|h| !(h.norm_sqr() > 0.0)) {
        return None;
    }
    let total: f64 = (0..row.len()).map(|j| (row[(j + 1) % row.len()] / row[j]).arg()).sum();
    Some((total / (2.0 * PI)).round() as i64)
}

/// Edge weights of the discrete energy on a fixed grid.
#[derive(Debug, Clone)]
pub(crate) struct PolarOperator {
    n_s: usize,
    n_theta: usize,
    /// `λ(s_{i+½}) Δθ/Δt` on the radial edge between rows `i` and `i+1`.
    radial: Vec<f64>,
    /// `λ(s_i) w_i Δt/Δθ` on angular edges in row `i`; `w = ½` on the
    /// boundary rows.
    angular: Vec<f64>,
}

impl PolarOperator {
    pub(crate) fn new(w: &Weight, m: &PolarGridMap) -> Self {
        let dt = m.log_step();
        let dth = m.angle_step();
        let t0 = m.pair.r.ln();
        let radial = (0..m.n_s - 1).map(|i| w.value((t0 + (i as f64 + 0.5) * dt).exp()) * dth / dt).collect();
        let angular = (0..m.n_s)
            .map(|i| {
                let half = if i == 0 || i == m.n_s - 1 { 0.5 } else { 1.0 };
                w.value(m.radius(i)) * half * dt / dth
            })
            .collect();
        PolarOperator { n_s: m.n_s, n_theta: m.n_theta, radial, angular }
    }

    /// `(radial, angular)` parts with a fixed, row-ordered reduction.
    pub(crate) fn energy_parts(&self, x: &[Complex64]) -> (f64, f64) {
        let nt = self.n_theta;
        let parts: Vec<(f64, f64)> = (0..self.n_s)
            .into_par_iter()
            .with_min_len(ROWS_PER_TASK)
            .map(|i| {
                let row = &x[i * nt..(i + 1) * nt];
                let mut ang = (row[0] - row[nt - 1]).norm_sqr();
                for j in 1..nt {
                    ang += (row[j] - row[j - 1]).norm_sqr();
                }
                let mut rad = 0.0;
                if i + 1 < self.n_s {
                    let next = &x[(i + 1) * nt..(i + 2) * nt];
                    for j in 0..nt {
                        rad += (next[j] - row[j]).norm_sqr();
                    }
                }
                let a = if i + 1 < self.n_s { self.radial[i] } else { 0.0 };
                (a * rad, self.angular[i] * ang)
            })
            .collect();
        parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1))
    }

    /// Full gradient `∂E/∂Re + i ∂E/∂Im`; returns the energy.
    pub(crate) fn gradient(&self, x: &[Complex64], g: &mut [Complex64]) -> f64 {
        let nt = self.n_theta;
        let ns = self.n_s;
        g.par_chunks_mut(nt).with_min_len(ROWS_PER_TASK).enumerate().for_each(|(i, gi)| {
            let row = &x[i * nt..(i + 1) * nt];
            let b = 2.0 * self.angular[i];
            gi[0] = (row[0] * 2.0 - row[nt - 1] - row[1]) * b;
            for j in 1..nt - 1 {
                gi[j] = (row[j] * 2.0 - row[j - 1] - row[j + 1]) * b;
            }
            gi[nt - 1] = (row[nt - 1] * 2.0 - row[nt - 2] - row[0]) * b;
            if i > 0 {
                let a = 2.0 * self.radial[i - 1];
                let below = &x[(i - 1) * nt..i * nt];
                for ((gj, &h), &l) in gi.iter_mut().zip(row).zip(below) {
                    *gj += (h - l) * a;
                }
            }
            if i + 1 < ns {
                let a = 2.0 * self.radial[i];
                let above = &x[(i + 1) * nt..(i + 2) * nt];
                for ((gj, &h), &u) in gi.iter_mut().zip(row).zip(above) {
                    *gj += (h - u) * a;
                }
            }
        });
        let partial: Vec<f64> = x
            .par_chunks(nt)
            .zip(g.par_chunks(nt))
            .with_min_len(ROWS_PER_TASK)
            .map(|(xr, gr)| xr.iter().zip(gr).map(|(a, b)| a.re * b.re + a.im * b.im).sum::<f64>())
            .collect();
        0.5 * partial.iter().sum::<f64>()
    }

    /// Gershgorin bound for the Hessian `2L` of the weighted graph
    /// Laplacian.
    pub(crate) fn lipschitz(&self) -> f64 {
        (0..self.n_s)
            .map(|i| {
                let below = if i > 0 { self.radial[i - 1] } else { 0.0 };
                let above = if i + 1 < self.n_s { self.radial[i] } else { 0.0 };
                4.0 * (below + above + 2.0 * self.angular[i])
            })
            .fold(0.0, f64::max)
    }
}

/// Fraction of grid cells whose bilinear Jacobian `Im(conj(h_t) h_θ)` is
/// negative at the cell centre.
pub fn negative_jacobian_fraction(m: &PolarGridMap) -> f64 {
    let nt = m.n_theta;
    let mut negative = 0usize;
    for i in 0..m.n_s - 1 {
        for j in 0..nt {
            let jn = (j + 1) % nt;
            let (a, b, c, d) = (m.at(i, j), m.at(i + 1, j), m.at(i, jn), m.at(i + 1, jn));
            let ht = (b - a) + (d - c);
            let hth = (c - a) + (d - b);
            if (ht.conj() * hth).im < 0.0 {
                negative += 1;
            }
        }
    }
    negative as f64 / ((m.n_s - 1) * nt) as f64
}

pub fn polar_energy(w: &Weight, m: &PolarGridMap) -> Result<EnergyReport> {
    m.check_admissible()?;
    Ok(polar_energy_unchecked(w, m))
}

pub(crate) fn polar_energy_unchecked(w: &Weight, m: &PolarGridMap) -> EnergyReport {
    let op = PolarOperator::new(w, m);
    let (radial, angular) = op.energy_parts(&m.values);
    let mut report = EnergyReport::new(radial, angular, m.n_s, m.n_theta, "polar-edge");
    report.negative_jacobian_fraction = negative_jacobian_fraction(m);
    report
}

/// Gradient of [`polar_energy`]; entries of the pinned outer row are zero
/// in fixed mode.
pub fn polar_gradient(w: &Weight, m: &PolarGridMap) -> Result<Vec<Complex64>> {
    m.check_admissible()?;
    let op = PolarOperator::new(w, m);
    let mut g = vec![Complex64::new(0.0, 0.0); m.values.len()];
    op.gradient(&m.values, &mut g);
    if m.mode == BoundaryMode::FixedOuter {
        let nt = m.n_theta;
        for v in &mut g[(m.n_s - 1) * nt..] {
            *v = Complex64::new(0.0, 0.0);
        }
    }
    Ok(g)
}

struct PolarProblem {
    op: PolarOperator,
    mode: BoundaryMode,
    r_star: f64,
    big_r_star: f64,
    circle: Vec<Complex64>,
}

impl PolarProblem {
    fn direction(&self, h: Complex64, j: usize) -> Complex64 {
        let m = h.norm_sqr().sqrt();
        if m > 0.0 {
            h / m
        } else {
            self.circle[j]
        }
    }
}

impl Problem for PolarProblem {
    type T = Complex64;

    fn gradient(&self, x: &[Complex64], g: &mut [Complex64]) -> f64 {
        self.op.gradient(x, g)
    }

    fn energy(&self, x: &[Complex64]) -> f64 {
        let (a, b) = self.op.energy_parts(x);
        a + b
    }

    fn project(&self, x: &mut [Complex64]) {
        let nt = self.op.n_theta;
        let last = self.op.n_s - 1;
        x.par_chunks_mut(nt).with_min_len(ROWS_PER_TASK).enumerate().for_each(|(i, row)| {
            for (j, h) in row.iter_mut().enumerate() {
                *h = if i == 0 {
                    self.direction(*h, j) * self.r_star
                } else if i == last {
                    match self.mode {
                        BoundaryMode::Free => self.direction(*h, j) * self.big_r_star,
                        BoundaryMode::FixedOuter => self.circle[j] * self.big_r_star,
                    }
                } else {
                    let m2 = h.norm_sqr();
                    if m2 < self.r_star * self.r_star {
                        self.direction(*h, j) * self.r_star
                    } else if m2 > self.big_r_star * self.big_r_star {
                        *h * (self.big_r_star / m2.sqrt())
                    } else {
                        *h
                    }
                };
            }
        });
    }

    fn lipschitz(&self) -> f64 {
        self.op.lipschitz()
    }

    fn admissible(&self, x: &[Complex64]) -> bool {
        x.par_chunks(self.op.n_theta).with_min_len(ROWS_PER_TASK).all(|row| row_winding(row) == Some(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolarInit {
    /// The radial minimizer from the ODE.
    Radial,
    /// `H` linear in `s` between the target radii.
    Linear,
    /// Radial minimizer composed with a seeded smooth perturbation.
    Perturbed { amplitude: f64 },
    Map(PolarGridMap),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarOptions {
    pub n_s: usize,
    pub n_theta: usize,
    pub mode: BoundaryMode,
    pub init: PolarInit,
    pub seed: u64,
    pub descent: DescentOptions,
}

impl Default for PolarOptions {
    fn default() -> Self {
        PolarOptions {
            n_s: DEFAULT_POLAR_GRID,
            n_theta: DEFAULT_POLAR_GRID,
            mode: BoundaryMode::Free,
            init: PolarInit::Perturbed { amplitude: 0.05 },
            seed: 0,
            descent: DescentOptions { max_iter: 20_000, rel_energy_tol: 1e-8, step_tol: 1e-5, ..Default::default() },
        }
    }
}

#[derive(Debug, Clone)]
pub struct PolarMinimum {
    pub map: PolarGridMap,
    pub report: EnergyReport,
    pub initial_energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub step_halvings: usize,
    pub warning: Option<String>,
}

/// Radial minimizer composed with a seeded perturbation, sampled on the grid.
pub fn perturbed_radial_map(
    sol: &RadialSolution,
    mode: BoundaryMode,
    n_s: usize,
    n_theta: usize,
    seed: u64,
    amplitude: f64,
) -> Result<PolarGridMap> {
    let pair = sol.pair;
    let p = Perturbation::new(seed, amplitude, pair.r, pair.big_r, mode == BoundaryMode::Free);
    PolarGridMap::from_fn(pair, mode, n_s, n_theta, |s, t| {
        let h = sol.sample(p.radius(s, t)).h.clamp(pair.r_star, pair.big_r_star);
        Complex64::from_polar(h, t + p.angle(s, t))
    })
}

pub fn minimize_polar(w: &Weight, pair: &AnnulusPair, opts: &PolarOptions) -> Result<PolarMinimum> {
    w.validate()?;
    let (n_s, n_t, mode) = (opts.n_s, opts.n_theta, opts.mode);
    let init = match &opts.init {
        PolarInit::Radial => {
            let sol = build(w, pair)?;
            PolarGridMap::radial(*pair, mode, n_s, n_t, |s| sol.sample(s).h)?
        }
        PolarInit::Linear => {
            let slope = (pair.big_r_star - pair.r_star) / (pair.big_r - pair.r);
            PolarGridMap::radial(*pair, mode, n_s, n_t, |s| pair.r_star + slope * (s - pair.r))?
        }
        PolarInit::Perturbed { amplitude } => {
            let sol = build(w, pair)?;
            perturbed_radial_map(&sol, mode, n_s, n_t, opts.seed, *amplitude)?
        }
        PolarInit::Map(m) => {
            if m.n_s != n_s || m.n_theta != n_t || m.pair != *pair || m.mode != mode {
                return Err(Error::InvalidArgument("initial map does not match the requested grid".into()));
            }
            m.clone()
        }
    };
    let op = PolarOperator::new(w, &init);
    let problem = PolarProblem {
        op,
        mode,
        r_star: pair.r_star,
        big_r_star: pair.big_r_star,
        circle: angles(n_t).into_iter().map(|t| Complex64::from_polar(1.0, t)).collect(),
    };
    let mut start = init.values.clone();
    problem.project(&mut start);
    if !problem.admissible(&start) {
        return Err(Error::Feasibility("initial map does not wind once around the origin on every row".into()));
    }
    let initial_energy = problem.energy(&start);
    let out = minimize(&problem, start, &opts.descent);
    if out.infeasible {
        return Err(Error::Feasibility(format!(
            "row winding changed after {} step halvings",
            out.step_halvings
        )));
    }
    let map = PolarGridMap { values: out.x, ..init };
    map.check_admissible().map_err(|e| Error::Feasibility(e.to_string()))?;
    let report = polar_energy_unchecked(w, &map);
    let warning = (!out.converged).then(|| format!("iteration cap {} reached", opts.descent.max_iter));
    Ok(PolarMinimum {
        map,
        report,
        initial_energy,
        iterations: out.iterations,
        converged: out.converged,
        step_halvings: out.step_halvings,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Weight {
        Weight::constant(1.0, 1.0, 2.0).unwrap()
    }

    fn pair(big_r_star: f64) -> AnnulusPair {
        AnnulusPair::new(1.0, 2.0, 1.0, big_r_star).unwrap()
    }

    #[test]
    fn energy_examples() {
        let w = unit();
        let id = PolarGridMap::radial(pair(2.0), BoundaryMode::Free, 256, 256, |s| s).unwrap();
        let e = polar_energy(&w, &id).unwrap();
        assert!((e.total / (6.0 * PI) - 1.0).abs() < 2e-3);
        assert_eq!(e.total, e.radial + e.angular);
        assert_eq!(e.negative_jacobian_fraction, 0.0);

        let nitsche = PolarGridMap::radial(pair(1.25), BoundaryMode::Free, 256, 256, |s| 0.5 * (s + 1.0 / s)).unwrap();
        let e = polar_energy(&w, &nitsche).unwrap().total;
        assert!((e / (15.0 * PI / 8.0) - 1.0).abs() < 2e-3);

        let twist = PolarGridMap::from_fn(pair(2.0), BoundaryMode::Free, 256, 256, |s, t| {
            Complex64::from_polar(s, t + s.ln())
        })
        .unwrap();
        let e = polar_energy(&w, &twist).unwrap().total;
        assert!((e / (9.0 * PI) - 1.0).abs() < 5e-3);
    }

    #[test]
    fn winding_examples() {
        let id = PolarGridMap::radial(pair(2.0), BoundaryMode::Free, 8, 16, |s| s).unwrap();
        assert_eq!(winding_number(&id, 3).unwrap(), 1);
        let mut conj = id.clone();
        conj.values.iter_mut().for_each(|h| *h = h.conj());
        assert_eq!(winding_number(&conj, 3).unwrap(), -1);
        let mut collapsed = id.clone();
        collapsed.values[2 * 16..3 * 16].iter_mut().for_each(|h| *h = Complex64::new(0.0, 0.0));
        assert!(matches!(winding_number(&collapsed, 2), Err(Error::DegenerateRow { row: 2, .. })));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let w = Weight::exponential(1.0, 1.0, 1.0, 2.0).unwrap();
        let sol = build(&w, &pair(1.4)).unwrap();
        let m = perturbed_radial_map(&sol, BoundaryMode::Free, 24, 20, 3, 0.05).unwrap();
        let g = polar_gradient(&w, &m).unwrap();
        let op = PolarOperator::new(&w, &m);
        let dir: Vec<Complex64> =
            (0..m.values.len()).map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos())).collect();
        let eps = 1e-5;
        let shifted = |sign: f64| {
            let v: Vec<Complex64> = m.values.iter().zip(&dir).map(|(h, d)| h + d * (sign * eps)).collect();
            let (a, b) = op.energy_parts(&v);
            a + b
        };
        let fd = (shifted(1.0) - shifted(-1.0)) / (2.0 * eps);
        let exact: f64 = g.iter().zip(&dir).map(|(a, b)| a.re * b.re + a.im * b.im).sum();
        assert!((fd - exact).abs() <= 1e-6 * exact.abs(), "fd {fd} exact {exact}");
    }

    #[test]
    fn gradient_is_linear_in_the_map() {
        let w = unit();
        let m = PolarGridMap::radial(pair(2.0), BoundaryMode::Free, 16, 16, |s| s).unwrap();
        let op = PolarOperator::new(&w, &m);
        let mut g1 = vec![Complex64::new(0.0, 0.0); m.values.len()];
        let mut g2 = g1.clone();
        op.gradient(&m.values, &mut g1);
        let scaled: Vec<Complex64> = m.values.iter().map(|h| h * 1.3).collect();
        op.gradient(&scaled, &mut g2);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a * 1.3 - b).norm() < 1e-12 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn fixed_mode_zeroes_the_outer_gradient() {
        let w = unit();
        let m = PolarGridMap::radial(pair(1.25), BoundaryMode::FixedOuter, 16, 16, |s| 0.5 * (s + 1.0 / s)).unwrap();
        let g = polar_gradient(&w, &m).unwrap();
        assert!(g[15 * 16..].iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn identity_is_a_fixed_point() {
        let w = unit();
        let opts = PolarOptions { n_s: 64, n_theta: 64, init: PolarInit::Linear, ..Default::default() };
        let out = minimize_polar(&w, &pair(2.0), &opts).unwrap();
        assert!((out.report.total / out.initial_energy - 1.0).abs() < 2e-3);
    }

    #[test]
    fn perturbed_nitsche_descends_back() {
        let w = unit();
        let opts = PolarOptions { n_s: 64, n_theta: 64, seed: 11, ..Default::default() };
        let out = minimize_polar(&w, &pair(1.25), &opts).unwrap();
        let exact = 15.0 * PI / 8.0;
        assert!(out.initial_energy > out.report.total);
        assert!((out.report.total / exact - 1.0).abs() < 5e-3, "{}", out.report.total);
    }
}
