//! Accelerated projected gradient descent (FISTA with adaptive restart) for
//! homogeneous quadratic energies over simple feasible sets.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

/// Scalars the engine can move along: reals and complex numbers.
pub trait Elem: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync {
    /// Real inner product `Re(a · conj(b))`.
    fn dot(self, other: Self) -> f64;
    fn norm_sqr(self) -> f64 {
        self.dot(self)
    }
}

impl Elem for f64 {
    #[inline]
    fn dot(self, other: Self) -> f64 {
        self * other
    }
}

impl Elem for Complex64 {
    #[inline]
    fn dot(self, other: Self) -> f64 {
        self.re * other.re + self.im * other.im
    }
}

/// A quadratic energy with a projection onto its feasible set.
pub trait Problem {
    type T: Elem;
    /// Writes the gradient into `grad` and returns the energy at `x`.
    fn gradient(&self, x: &[Self::T], grad: &mut [Self::T]) -> f64;
    fn energy(&self, x: &[Self::T]) -> f64;
    fn project(&self, x: &mut [Self::T]);
    /// Upper bound on the Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;
    /// Extra feasibility check run at every energy checkpoint.
    fn admissible(&self, _x: &[Self::T]) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub max_iter: usize,
    /// Stop when the relative energy change between checkpoints drops
    /// below this value...
    pub rel_energy_tol: f64,
    /// ...and the max-norm change of the iterate is below this one.
    pub step_tol: f64,
    /// Iterations between energy and feasibility checkpoints.
    pub check_every: usize,
    /// Number of step halvings allowed after feasibility failures.
    pub max_step_halvings: usize,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            max_iter: 50_000,
            rel_energy_tol: 1e-12,
            step_tol: 1e-10,
            check_every: 50,
            max_step_halvings: 30,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DescentOutcome<T> {
    pub x: Vec<T>,
    pub energy: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Step halvings triggered by feasibility failures.
    pub step_halvings: usize,
    /// Set when feasibility could not be restored.
    pub infeasible: bool,
}

fn max_diff<T: Elem>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(&p, &q)| (p - q).norm_sqr()).fold(0.0, f64::max).sqrt()
}

pub fn minimize<P: Problem>(problem: &P, x0: Vec<P::T>, opts: &DescentOptions) -> DescentOutcome<P::T> {
    let mut x = x0;
    problem.project(&mut x);
    let mut step = 1.0 / problem.lipschitz();
    let mut y = x.clone();
    let mut x_new = x.clone();
    let mut grad = x.clone();
    let mut t: f64 = 1.0;

    let mut checkpoint = x.clone();
    let mut checkpoint_energy = problem.energy(&x);
    let mut best = (x.clone(), checkpoint_energy);
    let mut halvings = 0;
    let mut converged = false;
    let mut infeasible = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        problem.gradient(&y, &mut grad);
        for ((xn, &yy), &g) in x_new.iter_mut().zip(&y).zip(&grad) {
            *xn = yy - g * step;
        }
        problem.project(&mut x_new);

        // gradient-based restart: drop momentum when it points uphill
        let uphill: f64 = grad
            .iter()
            .zip(x_new.iter().zip(&x))
            .map(|(&g, (&a, &b))| g.dot(a - b))
            .sum();
        let t_next = if uphill > 0.0 { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        let beta = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        for ((yy, &xn), &xo) in y.iter_mut().zip(&x_new).zip(&x) {
            *yy = xn + (xn - xo) * beta;
        }
        t = t_next;
        std::mem::swap(&mut x, &mut x_new);

        if iterations % opts.check_every == 0 || iterations == opts.max_iter {
            if !problem.admissible(&x) {
                halvings += 1;
                if halvings > opts.max_step_halvings {
                    infeasible = true;
                    break;
                }
                step *= 0.5;
                x.clone_from(&checkpoint);
                y.clone_from(&checkpoint);
                t = 1.0;
                continue;
            }
            let energy = problem.energy(&x);
            if energy > checkpoint_energy {
                y.clone_from(&x);
                t = 1.0;
            }
            let change = (checkpoint_energy - energy).abs() / energy.abs().max(1e-300);
            let moved = max_diff(&x, &checkpoint);
            checkpoint.clone_from(&x);
            checkpoint_energy = energy;
            if energy < best.1 {
                best = (x.clone(), energy);
            }
            if change < opts.rel_energy_tol && moved < opts.step_tol {
                converged = true;
                break;
            }
        }
    }
    let (x, energy) = if infeasible || best.1 < checkpoint_energy { best } else { (checkpoint, checkpoint_energy) };
    DescentOutcome { x, energy, iterations, converged, step_halvings: halvings, infeasible }
}

/// Pool-adjacent-violators: the nondecreasing sequence closest to `y` in
/// the Euclidean norm.
pub fn isotonic_regression(y: &mut [f64]) {
    let mut means: Vec<f64> = Vec::with_capacity(y.len());
    let mut sizes: Vec<usize> = Vec::with_capacity(y.len());
    for &v in y.iter() {
        let mut mean = v;
        let mut size = 1usize;
        while let Some(&last) = means.last() {
            if last <= mean {
                break;
            }
            let last_size = sizes.pop().unwrap();
            means.pop();
            mean = (last * last_size as f64 + mean * size as f64) / (last_size + size) as f64;
            size += last_size;
        }
        means.push(mean);
        sizes.push(size);
    }
    let mut k = 0;
    for (m, s) in means.iter().zip(sizes) {
        for v in &mut y[k..k + s] {
            *v = *m;
        }
        k += s;
    }
}
