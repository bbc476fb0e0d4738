//! Dormand–Prince 5(4) with its 4th-order continuous extension, specialised to
//! the fundamental system of `y'' = q(t) y`.
//!
//! The state is `[u, u', v, v']`: the two columns of the fundamental matrix.

use crate::error::{Error, Result};
use crate::potential::LineCoupling;
use crate::scalar::Scalar;

pub(crate) type State<T> = [T; 4];

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its dense-output coefficients.
#[derive(Debug, Clone)]
pub(crate) struct DenseStep<T> {
    pub t0: f64,
    /// Signed step.
    pub h: f64,
    pub r: [State<T>; 5],
}

impl<T: Scalar> DenseStep<T> {
    pub fn eval(&self, t: f64) -> State<T> {
        let s = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let s1 = 1.0 - s;
        let mut out = [T::zero(); 4];
        for (i, o) in out.iter_mut().enumerate() {
            let r = &self.r;
            *o = r[0][i] + (r[1][i] + (r[2][i] + (r[3][i] + r[4][i].scale(s1)).scale(s)).scale(s1)).scale(s);
        }
        out
    }
}

#[inline]
fn rhs<T: Scalar>(q: T, y: &State<T>) -> State<T> {
    [y[1], q * y[0], y[3], q * y[2]]
}

#[inline]
fn axpy<T: Scalar>(y: &State<T>, terms: &[(f64, &State<T>)], h: f64) -> State<T> {
    let mut out = *y;
    for (c, k) in terms {
        let f = c * h;
        for i in 0..4 {
            out[i] += k[i].scale(f);
        }
    }
    out
}

pub(crate) struct StepperConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_step: f64,
}

/// Outcome of integrating one block from the identity.
pub(crate) struct BlockRun<T> {
    pub end: f64,
    pub state: State<T>,
    pub steps: Vec<DenseStep<T>>,
    pub sup_q: f64,
    pub steps_taken: usize,
    pub next_h: f64,
}

/// Integrates `Φ' = A Φ`, `Φ(start) = I`, from `start` toward `stop` (either
/// direction). Stops early at the first accepted step after which some entry of
/// `Φ` exceeds `growth_cap` in modulus.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_block<T: Scalar>(
    coupling: &LineCoupling<T>,
    start: f64,
    stop: f64,
    h_init: f64,
    growth_cap: f64,
    keep_dense: bool,
    cfg: &StepperConfig,
    budget: &mut usize,
) -> Result<BlockRun<T>> {
    let dir = if stop >= start { 1.0 } else { -1.0 };
    let mut t = start;
    let mut y: State<T> = [T::one(), T::zero(), T::zero(), T::one()];
    let mut q = coupling.q(t);
    let mut k1 = rhs(q, &y);
    let mut sup_q = q.modulus();
    let mut h = h_init.min(cfg.max_step).max(cfg.min_step);
    let mut steps = Vec::new();
    let mut taken = 0usize;
    let mut last_was_reject = false;

    loop {
        let remaining = (stop - t) * dir;
        if remaining <= 0.0 {
            break;
        }
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if *budget == 0 {
            return Err(Error::StepFailure { t, min_step: cfg.min_step });
        }
        *budget -= 1;

        let hs = h * dir;
        let y2 = axpy(&y, &[(A21, &k1)], hs);
        let k2 = rhs(coupling.q(t + C2 * hs), &y2);
        let y3 = axpy(&y, &[(A31, &k1), (A32, &k2)], hs);
        let k3 = rhs(coupling.q(t + C3 * hs), &y3);
        let y4 = axpy(&y, &[(A41, &k1), (A42, &k2), (A43, &k3)], hs);
        let k4 = rhs(coupling.q(t + C4 * hs), &y4);
        let y5 = axpy(&y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], hs);
        let q5 = coupling.q(t + C5 * hs);
        let k5 = rhs(q5, &y5);
        let y6 = axpy(&y, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], hs);
        let t_new = if last { stop } else { t + hs };
        let q6 = coupling.q(t_new);
        let k6 = rhs(q6, &y6);
        let y_new = axpy(&y, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], hs);
        let k7 = rhs(q6, &y_new);

        // tolerance per column: the entries of one solution share a scale
        let col = |c: usize| {
            [y[c], y[c + 1], y_new[c], y_new[c + 1]].iter().map(|x| x.modulus()).fold(0.0, f64::max)
        };
        let col_scale = [col(0), col(2)];
        let mut err = 0.0;
        for i in 0..4 {
            let e = (k1[i].scale(E1)
                + k3[i].scale(E3)
                + k4[i].scale(E4)
                + k5[i].scale(E5)
                + k6[i].scale(E6)
                + k7[i].scale(E7))
            .scale(hs);
            // error per unit step: local error ≤ tol · |h|
            let sc = (cfg.abs_tol + cfg.rel_tol * col_scale[i / 2]) * h.min(1.0);
            err = f64::max(err, e.modulus() / sc);
        }

        if !err.is_finite() {
            h *= 0.2;
            if h < cfg.min_step {
                return Err(Error::StepFailure { t, min_step: cfg.min_step });
            }
            last_was_reject = true;
            continue;
        }

        if err <= 1.0 {
            if keep_dense {
                let mut r = [[T::zero(); 4]; 5];
                for i in 0..4 {
                    let ydiff = y_new[i] - y[i];
                    let bspl = k1[i].scale(hs) - ydiff;
                    r[0][i] = y[i];
                    r[1][i] = ydiff;
                    r[2][i] = bspl;
                    r[3][i] = ydiff - k7[i].scale(hs) - bspl;
                    r[4][i] = (k1[i].scale(D1)
                        + k3[i].scale(D3)
                        + k4[i].scale(D4)
                        + k5[i].scale(D5)
                        + k6[i].scale(D6)
                        + k7[i].scale(D7))
                    .scale(hs);
                }
                steps.push(DenseStep { t0: t, h: t_new - t, r });
            }
            sup_q = sup_q.max(q5.modulus()).max(q6.modulus());
            t = t_new;
            y = y_new;
            k1 = k7;
            q = q6;
            taken += 1;
            let mut fac = 0.9 * err.max(1e-10).powf(-0.25);
            fac = fac.clamp(0.2, if last_was_reject { 1.0 } else { 5.0 });
            h = (h * fac).min(cfg.max_step);
            last_was_reject = false;
            let grown = y.iter().map(|x| x.modulus()).fold(0.0, f64::max);
            if last || grown > growth_cap {
                break;
            }
        } else {
            let fac = (0.9 * err.powf(-0.25)).max(0.2);
            h *= fac;
            last_was_reject = true;
            if h < cfg.min_step {
                return Err(Error::StepFailure { t, min_step: cfg.min_step });
            }
        }
    }
    let _ = q;
    Ok(BlockRun { end: t, state: y, steps, sup_q, steps_taken: taken, next_h: h })
}

/// Initial step heuristic from the local frequency `√|q|`.
pub(crate) fn initial_step<T: Scalar>(coupling: &LineCoupling<T>, t0: f64, cfg: &StepperConfig) -> f64 {
    let omega = coupling.q(t0).modulus().sqrt().max(1.0);
    (0.05 * cfg.rel_tol.powf(0.2) * 10.0 / omega).clamp(cfg.min_step, cfg.max_step)
}
