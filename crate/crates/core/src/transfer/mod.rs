//! Transfer matrices of `-y'' + V(t, θ + tω) y = E y` over a finite interval.
//!
//! The fundamental system is integrated in blocks. Each block starts from the
//! identity and ends after `renorm_interval` of time or once its entries grow
//! past a fixed cap, whichever comes first. The block's end value is folded
//! into a [`ScaledMatrix2`], so the running product never overflows and its
//! determinant is the product of the well-conditioned block determinants.

mod dopri;
mod matrix;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Result};
use crate::potential::{AnalyticPotential, LineCoupling};
use crate::scalar::Scalar;

use dopri::{run_block, DenseStep, StepperConfig};
pub use matrix::{compose, log_norm, relative_distance, ScaledMatrix2};

/// Entry growth inside a block before it is closed and renormalized.
const GROWTH_CAP: f64 = 2.0;
const MIN_STEP: f64 = 1e-11;

/// A closed interval `[a, b]` with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        precondition(a.is_finite() && b.is_finite(), "interval endpoints must be finite")?;
        precondition(a < b, format!("interval [{a}, {b}] is empty or degenerate"))?;
        Ok(Self { a, b })
    }

    /// `[0, len]`
    pub fn from_len(len: f64) -> Result<Self> {
        Self::new(0.0, len)
    }

    pub fn len(&self) -> f64 {
        self.b - self.a
    }

    /// Always `false`: degenerate intervals are rejected at construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, t: f64) -> bool {
        self.a <= t && t <= self.b
    }

    /// `n + I`
    pub fn shifted(&self, n: f64) -> Self {
        Self { a: self.a + n, b: self.b + n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Longest stretch of time integrated before the running product is
    /// renormalized.
    pub renorm_interval: f64,
    pub max_step: f64,
    /// Hard cap on the number of attempted steps.
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, renorm_interval: 1.0, max_step: 0.5, max_steps: 50_000_000 }
    }
}

impl IntegratorConfig {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        precondition(pos(self.rel_tol), "rel_tol must be positive")?;
        precondition(pos(self.abs_tol), "abs_tol must be positive")?;
        precondition(pos(self.renorm_interval), "renorm_interval must be positive")?;
        precondition(pos(self.max_step), "max_step must be positive")?;
        precondition(self.max_steps > 0, "max_steps must be positive")
    }

    fn stepper(&self) -> StepperConfig {
        StepperConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            max_step: self.max_step,
            min_step: MIN_STEP,
        }
    }
}

/// Phase, frequency and energy of one integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferParams<T> {
    pub theta: Vec<T>,
    pub omega: Vec<T>,
    pub energy: T,
}

impl<T: Scalar> TransferParams<T> {
    pub fn new(theta: Vec<T>, omega: Vec<T>, energy: T) -> Self {
        Self { theta, omega, energy }
    }
}

#[derive(Debug, Clone)]
struct Block<T> {
    /// Distance from the origin to the block end, in integration direction.
    s1: f64,
    /// Fundamental matrix at the block start.
    entry: ScaledMatrix2<T>,
    steps: Vec<DenseStep<T>>,
}

/// The fundamental system of one integration, with dense output.
///
/// `origin` is `a` for the usual forward solutions `u_a, v_a` and `b` for the
/// backward solutions `u_b, v_b`. Column 0 of [`TransferSolution::at`] is the
/// solution with `(y, y') = (1, 0)` at the origin, column 1 the one with
/// `(0, 1)`.
#[derive(Debug, Clone)]
pub struct TransferSolution<T> {
    interval: Interval,
    origin: f64,
    params: TransferParams<T>,
    blocks: Vec<Block<T>>,
    terminal: ScaledMatrix2<T>,
    sup_q: f64,
    steps: usize,
}

impl<T: Scalar> TransferSolution<T> {
    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn params(&self) -> &TransferParams<T> {
        &self.params
    }

    fn dir(&self) -> f64 {
        if self.origin == self.interval.a {
            1.0
        } else {
            -1.0
        }
    }

    /// The far endpoint.
    pub fn terminus(&self) -> f64 {
        if self.dir() > 0.0 {
            self.interval.b
        } else {
            self.interval.a
        }
    }

    /// Fundamental matrix from the origin to the terminus.
    pub fn matrix(&self) -> &ScaledMatrix2<T> {
        &self.terminal
    }

    /// Largest `|q(t)| = |V − E|` seen at the evaluation nodes.
    pub fn sup_q(&self) -> f64 {
        self.sup_q
    }

    /// Numerical stand-in for the Grönwall constant: `sup ‖A(t)‖` with
    /// `A = [[0, 1], [q, 0]]`, i.e. `max(1, sup |q|)`.
    pub fn gronwall_constant(&self) -> f64 {
        self.sup_q.max(1.0)
    }

    pub fn steps_taken(&self) -> usize {
        self.steps
    }

    /// Accepted step endpoints in ascending order, endpoints included.
    pub fn grid(&self) -> Vec<f64> {
        let mut g: Vec<f64> = vec![self.origin];
        for b in &self.blocks {
            for st in &b.steps {
                g.push(st.t0 + st.h);
            }
        }
        if self.dir() < 0.0 {
            g.reverse();
        }
        g
    }

    /// `(t, Φ(t))` at every grid point, ascending in `t`.
    pub fn samples(&self) -> Vec<(f64, ScaledMatrix2<T>)> {
        let mut out = vec![(self.origin, ScaledMatrix2::identity())];
        for b in &self.blocks {
            for st in &b.steps {
                let t = st.t0 + st.h;
                out.push((t, block_point(&b.entry, &st.eval(t))));
            }
        }
        if self.dir() < 0.0 {
            out.reverse();
        }
        out
    }

    /// Fundamental matrix `[[u, v], [u', v']]` at `t ∈ I`. Exact at the
    /// origin; equal to [`TransferSolution::matrix`] at the terminus.
    pub fn at(&self, t: f64) -> Result<ScaledMatrix2<T>> {
        let span = self.interval.len();
        let slack = 1e-12 * span.max(1.0);
        precondition(
            t >= self.interval.a - slack && t <= self.interval.b + slack,
            format!("t = {t} outside [{}, {}]", self.interval.a, self.interval.b),
        )?;
        if t == self.origin {
            return Ok(ScaledMatrix2::identity());
        }
        if t == self.terminus() {
            return Ok(self.terminal);
        }
        let dir = self.dir();
        let s = ((t - self.origin) * dir).clamp(0.0, span);
        let bi = self.blocks.partition_point(|b| b.s1 < s).min(self.blocks.len() - 1);
        let block = &self.blocks[bi];
        let si = block
            .steps
            .partition_point(|st| (st.t0 + st.h - self.origin) * dir < s)
            .min(block.steps.len() - 1);
        Ok(block_point(&block.entry, &block.steps[si].eval(t)))
    }

    /// `(y(t), y'(t))` of column `col` in scaled form: unit pair and log scale.
    pub fn column_at(&self, t: f64, col: usize) -> Result<([T; 2], f64)> {
        let m = self.at(t)?;
        let u = m.unit();
        Ok(([u[0][col], u[1][col]], m.log_scale()))
    }

    /// Largest `|det Φ(t) − 1|`, in log form, over the grid.
    pub fn max_wronskian_drift(&self) -> f64 {
        self.samples().iter().map(|(_, m)| m.det_drift()).fold(0.0, f64::max)
    }
}

fn block_point<T: Scalar>(entry: &ScaledMatrix2<T>, y: &[T; 4]) -> ScaledMatrix2<T> {
    let local = ScaledMatrix2::from_entries([[y[0], y[2]], [y[1], y[3]]]);
    compose(&local, entry)
}

/// Integrates the fundamental system from `origin` to `target` (either
/// direction) along the line `θ + tω`.
pub fn propagate<T: Scalar>(
    coupling: &LineCoupling<T>,
    params: TransferParams<T>,
    origin: f64,
    target: f64,
    cfg: &IntegratorConfig,
    dense: bool,
) -> Result<TransferSolution<T>> {
    cfg.validate()?;
    let interval = Interval::new(origin.min(target), origin.max(target))?;
    coupling.check_strip(interval.a, interval.b)?;
    let dir = if target > origin { 1.0 } else { -1.0 };
    let stepper = cfg.stepper();
    let mut budget = cfg.max_steps;
    let mut t = origin;
    let mut running = ScaledMatrix2::identity();
    let mut blocks = Vec::new();
    let mut sup_q = 0.0f64;
    let mut steps = 0usize;
    let mut h = dopri::initial_step(coupling, origin, &stepper);
    while (target - t) * dir > 0.0 {
        let mut stop = t + dir * cfg.renorm_interval;
        if (stop - target) * dir >= 0.0 || (target - stop) * dir < 1e-9 * cfg.renorm_interval {
            stop = target;
        }
        let run = run_block(coupling, t, stop, h, GROWTH_CAP, dense, &stepper, &mut budget)?;
        let y = run.state;
        let local = ScaledMatrix2::from_entries([[y[0], y[2]], [y[1], y[3]]]);
        let next = compose(&local, &running);
        if dense {
            blocks.push(Block {
                s1: (run.end - origin) * dir,
                entry: running,
                steps: run.steps,
            });
        }
        running = next;
        sup_q = sup_q.max(run.sup_q);
        steps += run.steps_taken;
        h = run.next_h;
        t = run.end;
    }
    Ok(TransferSolution { interval, origin, params, blocks, terminal: running, sup_q, steps })
}

/// `u_a, v_a` on `I` for real phase, frequency and energy, with dense output.
pub fn integrate_transfer(
    p: &AnalyticPotential,
    interval: Interval,
    theta: &[f64],
    omega: &[f64],
    energy: f64,
    cfg: &IntegratorConfig,
) -> Result<TransferSolution<f64>> {
    let coupling = p.along_line(theta, omega, energy)?;
    let params = TransferParams::new(theta.to_vec(), omega.to_vec(), energy);
    propagate(&coupling, params, interval.a, interval.b, cfg, true)
}

/// `u_b, v_b` on `I`: the solutions normalized at the right endpoint.
pub fn integrate_backward(
    p: &AnalyticPotential,
    interval: Interval,
    theta: &[f64],
    omega: &[f64],
    energy: f64,
    cfg: &IntegratorConfig,
) -> Result<TransferSolution<f64>> {
    let coupling = p.along_line(theta, omega, energy)?;
    let params = TransferParams::new(theta.to_vec(), omega.to_vec(), energy);
    propagate(&coupling, params, interval.b, interval.a, cfg, true)
}

/// Complex phase, frequency or energy. The line must stay inside the
/// potential's strip of analyticity.
pub fn integrate_transfer_complex(
    p: &AnalyticPotential,
    interval: Interval,
    theta: &[Complex64],
    omega: &[Complex64],
    energy: Complex64,
    cfg: &IntegratorConfig,
) -> Result<TransferSolution<Complex64>> {
    let coupling = p.along_line(theta, omega, energy)?;
    let params = TransferParams::new(theta.to_vec(), omega.to_vec(), energy);
    propagate(&coupling, params, interval.a, interval.b, cfg, true)
}

/// `M_I(θ, ω, E)` without keeping dense output.
pub fn transfer_matrix_at(
    p: &AnalyticPotential,
    interval: Interval,
    theta: &[f64],
    omega: &[f64],
    energy: f64,
    cfg: &IntegratorConfig,
) -> Result<ScaledMatrix2<f64>> {
    let coupling = p.along_line(theta, omega, energy)?;
    let params = TransferParams::new(Vec::new(), Vec::new(), energy);
    Ok(propagate(&coupling, params, interval.a, interval.b, cfg, false)?.terminal)
}

/// Complex counterpart of [`transfer_matrix_at`].
pub fn transfer_matrix_complex(
    p: &AnalyticPotential,
    interval: Interval,
    theta: &[Complex64],
    omega: &[Complex64],
    energy: Complex64,
    cfg: &IntegratorConfig,
) -> Result<ScaledMatrix2<Complex64>> {
    let coupling = p.along_line(theta, omega, energy)?;
    let params = TransferParams::new(Vec::new(), Vec::new(), energy);
    Ok(propagate(&coupling, params, interval.a, interval.b, cfg, false)?.terminal)
}

/// `M_{[a,b]} = [[u_a(b), v_a(b)], [u_a'(b), v_a'(b)]]`
pub fn transfer_matrix<T: Scalar>(sol: &TransferSolution<T>) -> ScaledMatrix2<T> {
    sol.terminal
}

/// `θ + nω mod 1`, componentwise.
pub fn shift_phase(theta: &[f64], omega: &[f64], n: f64) -> Vec<f64> {
    theta
        .iter()
        .zip(omega)
        .map(|(th, om)| {
            let x = om.mul_add(n, *th);
            x - x.floor()
        })
        .collect()
}

/// Relative discrepancy between `M_{n+I}(θ)` and `M_I(θ + nω)`.
pub fn shift_covariance_check(
    p: &AnalyticPotential,
    interval: Interval,
    theta: &[f64],
    omega: &[f64],
    energy: f64,
    n: f64,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    precondition(n.is_finite() && n.fract() == 0.0, format!("shift n = {n} is not an integer"))?;
    if n == 0.0 {
        return Ok(0.0);
    }
    let left = transfer_matrix_at(p, interval.shifted(n), theta, omega, energy, cfg)?;
    let right = transfer_matrix_at(p, interval, &shift_phase(theta, omega, n), omega, energy, cfg)?;
    Ok(relative_distance(&left, &right))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn golden() -> f64 {
        (5f64.sqrt() - 1.0) / 2.0
    }

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn free_particle_rotation() {
        let p = AnalyticPotential::zero(1);
        let sol = integrate_transfer(&p, Interval::new(0.0, FRAC_PI_2).unwrap(), &[0.0], &[0.3], 1.0, &cfg()).unwrap();
        let m = transfer_matrix(&sol).to_matrix();
        let want = [[0.0, 1.0], [-1.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(m[i][j], want[i][j], epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn free_particle_hyperbolic() {
        let p = AnalyticPotential::zero(1);
        let m = transfer_matrix_at(&p, Interval::new(0.0, 1.0).unwrap(), &[0.0], &[0.3], -1.0, &cfg())
            .unwrap()
            .to_matrix();
        let (c, s) = (1f64.cosh(), 1f64.sinh());
        assert_abs_diff_eq!(m[0][0], c, epsilon = 1e-8);
        assert_abs_diff_eq!(m[0][1], s, epsilon = 1e-8);
        assert_abs_diff_eq!(m[1][0], s, epsilon = 1e-8);
        assert_abs_diff_eq!(m[1][1], c, epsilon = 1e-8);
    }

    #[test]
    fn free_particle_growth_rate() {
        // M = [[cosh 2t, sinh(2t)/2], [2 sinh 2t, cosh 2t]] ≈ e^{2t} [[1/2, 1/4], [1, 1/2]]
        let p = AnalyticPotential::zero(1);
        let m = transfer_matrix_at(&p, Interval::new(0.0, 20.0).unwrap(), &[0.0], &[0.3], -4.0, &cfg()).unwrap();
        let limit = ScaledMatrix2::from_entries([[0.5, 0.25], [1.0, 0.5]]);
        assert_abs_diff_eq!(m.log_norm(), 40.0 + limit.log_norm(), epsilon = 1e-8);
        assert_abs_diff_eq!(m.log_norm(), 40.0, epsilon = 0.23);
        assert!(m.det_drift() < 1e-8);
    }

    #[test]
    fn degenerate_interval_rejected() {
        assert!(Interval::new(1.0, 1.0).is_err());
        assert!(Interval::new(2.0, 1.0).is_err());
    }

    #[test]
    fn initial_conditions_exact() {
        let p = AnalyticPotential::cosine_model(2.0).unwrap();
        let sol = integrate_transfer(&p, Interval::new(0.0, 3.0).unwrap(), &[0.1], &[golden()], 0.5, &cfg()).unwrap();
        assert_eq!(sol.at(0.0).unwrap().to_matrix(), [[1.0, 0.0], [0.0, 1.0]]);
        let grid = sol.grid();
        assert_eq!(grid[0], 0.0);
        assert_eq!(*grid.last().unwrap(), 3.0);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn wronskian_on_grid() {
        let p = AnalyticPotential::cosine_model(2.0).unwrap();
        let sol = integrate_transfer(&p, Interval::new(0.0, 40.0).unwrap(), &[0.2], &[golden()], -1.0, &cfg()).unwrap();
        assert!(sol.max_wronskian_drift() < 1e-8, "{}", sol.max_wronskian_drift());
    }

    #[test]
    fn dense_output_matches_restart() {
        let p = AnalyticPotential::cosine_model(2.0).unwrap();
        let sol = integrate_transfer(&p, Interval::new(0.0, 6.0).unwrap(), &[0.2], &[golden()], 1.0, &cfg()).unwrap();
        for &t in &[0.37, 1.91, 3.5, 5.123] {
            let direct =
                transfer_matrix_at(&p, Interval::new(0.0, t).unwrap(), &[0.2], &[golden()], 1.0, &cfg()).unwrap();
            assert!(relative_distance(&sol.at(t).unwrap(), &direct) < 1e-7);
        }
    }

    #[test]
    fn backward_solution_is_inverse() {
        let p = AnalyticPotential::cosine_model(2.0).unwrap();
        let i = Interval::new(0.0, 4.0).unwrap();
        let fwd = integrate_transfer(&p, i, &[0.2], &[golden()], 0.5, &cfg()).unwrap();
        let bwd = integrate_backward(&p, i, &[0.2], &[golden()], 0.5, &cfg()).unwrap();
        assert_eq!(bwd.origin(), 4.0);
        let prod = compose(bwd.matrix(), fwd.matrix());
        assert!(relative_distance(&prod, &ScaledMatrix2::identity()) < 1e-8);
        assert!(relative_distance(&bwd.at(1.5).unwrap(), &compose(&fwd.at(1.5).unwrap(), &fwd.matrix().inverse())) < 1e-7);
    }

    #[test]
    fn semigroup() {
        let p = AnalyticPotential::cosine_model(2.0).unwrap();
        let m = |a, b| transfer_matrix_at(&p, Interval::new(a, b).unwrap(), &[0.0], &[golden()], 0.0, &cfg()).unwrap();
        let whole = m(0.0, 2.0);
        let split = compose(&m(1.0, 2.0), &m(0.0, 1.0));
        assert!(relative_distance(&whole, &split) < 1e-7);
    }

    #[test]
    fn shift_covariance() {
        let p = AnalyticPotential::cosine_model(2.0).unwrap();
        let i = Interval::new(0.0, 5.0).unwrap();
        let d0 = shift_covariance_check(&p, i, &[0.3], &[golden()], 0.0, 0.0, &cfg()).unwrap();
        assert_eq!(d0, 0.0);
        let d3 = shift_covariance_check(&p, i, &[0.3], &[golden()], 0.0, 3.0, &cfg()).unwrap();
        assert!(d3 <= 1e-7, "{d3}");
        assert!(shift_covariance_check(&p, i, &[0.3], &[golden()], 0.0, 1.5, &cfg()).is_err());
    }

    #[test]
    fn gronwall_ceiling() {
        let p = AnalyticPotential::cosine_model(2.0).unwrap();
        let i = Interval::new(0.0, 30.0).unwrap();
        let sol = integrate_transfer(&p, i, &[0.4], &[golden()], -3.0, &cfg()).unwrap();
        assert!(sol.matrix().log_norm() <= 1.05 * i.len() * sol.gronwall_constant());
        assert!(sol.sup_q() <= 8.0 + 3.0 + 1e-9);
    }

    #[test]
    fn complex_energy_path() {
        let p = AnalyticPotential::cosine_model(1.5).unwrap();
        let i = Interval::new(0.0, 5.0).unwrap();
        let theta = [Complex64::new(0.2, 0.0)];
        let omega = [Complex64::new(golden(), 0.0)];
        let real = transfer_matrix_at(&p, i, &[0.2], &[golden()], 0.7, &cfg()).unwrap();
        let cplx = transfer_matrix_complex(&p, i, &theta, &omega, Complex64::new(0.7, 0.0), &cfg()).unwrap();
        let a = real.to_matrix();
        let b = cplx.to_matrix();
        for r in 0..2 {
            for c in 0..2 {
                assert!((b[r][c] - Complex64::new(a[r][c], 0.0)).norm() < 1e-8 * (1.0 + a[r][c].abs()));
            }
        }
        let shifted = transfer_matrix_complex(&p, i, &theta, &omega, Complex64::new(0.7, 0.2), &cfg()).unwrap();
        assert!((shifted.det() - Complex64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn strip_enforced_for_complex_phase() {
        let p = AnalyticPotential::cosine_model(1.0).unwrap();
        let i = Interval::new(0.0, 1.0).unwrap();
        let theta = [Complex64::new(0.0, 1.0)];
        let omega = [Complex64::new(golden(), 0.0)];
        assert!(transfer_matrix_complex(&p, i, &theta, &omega, Complex64::new(0.0, 0.0), &cfg()).is_err());
    }

    #[test]
    fn invalid_config_rejected() {
        let p = AnalyticPotential::zero(1);
        let bad = IntegratorConfig { rel_tol: 0.0, ..cfg() };
        assert!(transfer_matrix_at(&p, Interval::new(0.0, 1.0).unwrap(), &[0.0], &[0.1], 1.0, &bad).is_err());
    }
}
