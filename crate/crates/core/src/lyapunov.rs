//! Finite-scale Lyapunov exponents
//! `L_I(η, ω, E) = |I|⁻¹ ∫ log‖M_I(θ + iη, ω, E)‖ dθ` and the diagnostics built
//! on them: subadditivity, the Avalanche Principle, large deviations and
//! uniform upper bounds.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::par::{map_indexed, pairwise_mean, pairwise_sum};
use crate::potential::AnalyticPotential;
use crate::transfer::{compose, propagate, Interval, IntegratorConfig, ScaledMatrix2, TransferParams};

/// Uniform lattice `(j + offset)/n` in each coordinate, enumerated
/// lexicographically with the last coordinate fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub points_per_dim: usize,
    pub dim: usize,
    pub offset: Vec<f64>,
}

impl PhaseGrid {
    pub fn new(points_per_dim: usize, dim: usize) -> Result<Self> {
        Self::with_offset(points_per_dim, vec![0.0; dim])
    }

    /// `offset` is in lattice units: coordinate `j` sits at `(j + offset)/n`.
    pub fn with_offset(points_per_dim: usize, offset: Vec<f64>) -> Result<Self> {
        precondition(points_per_dim >= 1, "phase grid needs at least one point per dimension")?;
        precondition(!offset.is_empty(), "phase grid dimension must be positive")?;
        let total = (points_per_dim as f64).powi(offset.len() as i32);
        precondition(total <= 1e8, format!("phase grid of {total} points is too large"))?;
        Ok(Self { points_per_dim, dim: offset.len(), offset })
    }

    pub fn total(&self) -> usize {
        self.points_per_dim.pow(self.dim as u32)
    }

    fn digits(&self, mut index: usize) -> Vec<usize> {
        let n = self.points_per_dim;
        let mut d = vec![0; self.dim];
        for slot in d.iter_mut().rev() {
            *slot = index % n;
            index /= n;
        }
        d
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        let n = self.points_per_dim as f64;
        self.digits(index)
            .iter()
            .zip(&self.offset)
            .map(|(&j, off)| {
                let x = (j as f64 + off) / n;
                x - x.floor()
            })
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.total()).map(|i| self.point(i)).collect()
    }

    /// Indices of the sub-lattice with `points_per_dim / 2` points, when the
    /// count is even: every other point in every coordinate.
    fn half_indices(&self) -> Option<Vec<usize>> {
        if self.points_per_dim < 2 || self.points_per_dim % 2 != 0 {
            return None;
        }
        Some((0..self.total()).filter(|&i| self.digits(i).iter().all(|j| j % 2 == 0)).collect())
    }

    fn halved(&self) -> Self {
        let n = (self.points_per_dim / 2).max(1);
        let scale = n as f64 / self.points_per_dim as f64;
        Self { points_per_dim: n, dim: self.dim, offset: self.offset.iter().map(|o| o * scale).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub value: f64,
    pub interval: Interval,
    pub grid: PhaseGrid,
    pub eta: Vec<f64>,
    /// Half the difference between the estimates on the grid and on its
    /// half-resolution sub-lattice.
    pub spread: f64,
    pub gamma_floor: f64,
    /// Largest Grönwall stand-in `max(1, sup|V − E|)` over the phases.
    pub gronwall: f64,
}

/// `log‖M_I(θ + iη, ω, E)‖` with the Grönwall stand-in of that integration.
pub fn phase_log_norm(
    p: &AnalyticPotential,
    interval: Interval,
    theta: &[f64],
    eta: &[f64],
    omega: &[f64],
    energy: Complex64,
    cfg: &IntegratorConfig,
) -> Result<(f64, f64)> {
    let m = phase_matrix(p, interval, theta, eta, omega, energy, cfg)?;
    Ok((m.0.log_norm(), m.1))
}

/// `M_I(θ + iη, ω, E)` as a complex matrix, and the Grönwall stand-in. The
/// real path is used whenever `η = 0` and `E` is real.
pub fn phase_matrix(
    p: &AnalyticPotential,
    interval: Interval,
    theta: &[f64],
    eta: &[f64],
    omega: &[f64],
    energy: Complex64,
    cfg: &IntegratorConfig,
) -> Result<(ScaledMatrix2<Complex64>, f64)> {
    let real = energy.im == 0.0 && eta.iter().all(|&e| e == 0.0);
    if real {
        let c = p.along_line(theta, omega, energy.re)?;
        let sol = propagate(&c, TransferParams::new(vec![], vec![], energy.re), interval.a, interval.b, cfg, false)?;
        let m = sol.matrix();
        let u = m.unit();
        let unit = u.map(|row| row.map(|x| Complex64::new(x, 0.0)));
        return Ok((
            ScaledMatrix2::from_parts(unit, m.log_scale(), Complex64::new(m.det(), 0.0)),
            sol.gronwall_constant(),
        ));
    }
    precondition(eta.len() == theta.len(), "eta has wrong dimension")?;
    let th: Vec<Complex64> = theta.iter().zip(eta).map(|(&t, &e)| Complex64::new(t, e)).collect();
    let om: Vec<Complex64> = omega.iter().map(|&w| Complex64::new(w, 0.0)).collect();
    let c = p.along_line(&th, &om, energy)?;
    let sol = propagate(&c, TransferParams::new(vec![], vec![], energy), interval.a, interval.b, cfg, false)?;
    Ok((*sol.matrix(), sol.gronwall_constant()))
}

fn check_eta(p: &AnalyticPotential, eta: &[f64]) -> Result<()> {
    precondition(eta.len() == p.dim(), "eta has wrong dimension")?;
    let norm = eta.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if norm > p.strip_rho() / 2.0 {
        return Err(Error::Domain(format!("‖η‖ = {norm} exceeds ρ/2 = {}", p.strip_rho() / 2.0)));
    }
    Ok(())
}

/// Log-norms over an explicit list of phases, in order.
pub fn log_norms_at(
    p: &AnalyticPotential,
    interval: Interval,
    thetas: &[Vec<f64>],
    eta: &[f64],
    omega: &[f64],
    energy: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<(f64, f64)>> {
    let e = Complex64::new(energy, 0.0);
    map_indexed(thetas.len(), |i| phase_log_norm(p, interval, &thetas[i], eta, omega, e, cfg))
}

/// Phase average of `log‖M_I‖ / |I|` over `grid`.
pub fn finite_lyapunov(
    p: &AnalyticPotential,
    interval: Interval,
    omega: &[f64],
    energy: f64,
    grid: &PhaseGrid,
    eta: &[f64],
    cfg: &IntegratorConfig,
) -> Result<LyapunovEstimate> {
    check_eta(p, eta)?;
    precondition(grid.dim == p.dim(), "phase grid dimension differs from the potential's")?;
    precondition(omega.len() == p.dim(), "omega has wrong dimension")?;
    let len = interval.len();
    let full = log_norms_at(p, interval, &grid.points(), eta, omega, energy, cfg)?;
    let logs: Vec<f64> = full.iter().map(|x| x.0).collect();
    let gronwall = full.iter().map(|x| x.1).fold(1.0, f64::max);
    let value = pairwise_mean(&logs) / len;
    let half_value = match grid.half_indices() {
        Some(idx) => pairwise_mean(&idx.iter().map(|&i| logs[i]).collect::<Vec<_>>()) / len,
        None if grid.points_per_dim >= 2 => {
            let half = grid.halved();
            let h = log_norms_at(p, interval, &half.points(), eta, omega, energy, cfg)?;
            pairwise_mean(&h.iter().map(|x| x.0).collect::<Vec<_>>()) / len
        }
        None => value,
    };
    Ok(LyapunovEstimate {
        value,
        interval,
        grid: grid.clone(),
        eta: eta.to_vec(),
        spread: (value - half_value).abs() / 2.0,
        gamma_floor: 0.0,
        gronwall,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityRow {
    pub n: usize,
    pub value: f64,
    pub spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityViolation {
    pub m: usize,
    pub n: usize,
    /// `(m+n)L_{m+n} − mL_m − nL_n − slack`, positive.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityTable {
    pub rows: Vec<SubadditivityRow>,
    pub violations: Vec<SubadditivityViolation>,
}

/// `L_n` on `[0, n]` for `n = 1..=n_max`, with every split `m + n ≤ n_max`
/// checked against `(m+n)L_{m+n} ≤ mL_m + nL_n + 2(m+n)·spread`.
///
/// Each phase is integrated once over unit blocks; `M_{[0,n]}` is the running
/// product.
pub fn subadditivity_table(
    p: &AnalyticPotential,
    omega: &[f64],
    energy: f64,
    n_max: usize,
    grid: &PhaseGrid,
    cfg: &IntegratorConfig,
) -> Result<SubadditivityTable> {
    precondition(n_max >= 2, "subadditivity needs n_max ≥ 2")?;
    precondition(grid.dim == p.dim(), "phase grid dimension differs from the potential's")?;
    let points = grid.points();
    let per_phase: Vec<Vec<f64>> = map_indexed(points.len(), |i| {
        let mut running = ScaledMatrix2::<f64>::identity();
        let mut out = Vec::with_capacity(n_max);
        for k in 0..n_max {
            let block = Interval::new(k as f64, k as f64 + 1.0)?;
            let c = p.along_line(&points[i], omega, energy)?;
            let sol = propagate(&c, TransferParams::new(vec![], vec![], energy), block.a, block.b, cfg, false)?;
            running = compose(sol.matrix(), &running);
            out.push(running.log_norm());
        }
        Ok(out)
    })?;
    let half = grid.half_indices();
    let mut rows = Vec::with_capacity(n_max);
    for k in 0..n_max {
        let n = (k + 1) as f64;
        let logs: Vec<f64> = per_phase.iter().map(|v| v[k]).collect();
        let value = pairwise_mean(&logs) / n;
        let spread = match &half {
            Some(idx) => (value - pairwise_mean(&idx.iter().map(|&i| logs[i]).collect::<Vec<_>>()) / n).abs() / 2.0,
            None => 0.0,
        };
        rows.push(SubadditivityRow { n: k + 1, value, spread });
    }
    let mut violations = Vec::new();
    for m in 1..n_max {
        for n in 1..=(n_max - m) {
            let (rm, rn, rs) = (&rows[m - 1], &rows[n - 1], &rows[m + n - 1]);
            let spread = rm.spread.max(rn.spread).max(rs.spread);
            let slack = 2.0 * (m + n) as f64 * spread;
            let excess = (m + n) as f64 * rs.value - m as f64 * rm.value - n as f64 * rn.value - slack;
            if excess > 1e-9 * (m + n) as f64 {
                violations.push(SubadditivityViolation { m, n, excess });
            }
        }
    }
    Ok(SubadditivityTable { rows, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeReport {
    pub n: usize,
    pub difference: f64,
    pub bound: f64,
}

/// `|L_I − L_{[0,n]}|` with `n = round(|I|)`, against
/// `C_num (|n − |I|| + 2)/|I|`.
pub fn continuous_discrete_bridge(
    p: &AnalyticPotential,
    interval: Interval,
    omega: &[f64],
    energy: f64,
    grid: &PhaseGrid,
    cfg: &IntegratorConfig,
) -> Result<BridgeReport> {
    let len = interval.len();
    precondition(len >= 2.0, "the bridge needs |I| ≥ 2")?;
    let n = len.round() as usize;
    let eta = vec![0.0; p.dim()];
    let li = finite_lyapunov(p, interval, omega, energy, grid, &eta, cfg)?;
    let discrete = Interval::new(0.0, n as f64)?;
    let ln = if discrete == interval { li.clone() } else { finite_lyapunov(p, discrete, omega, energy, grid, &eta, cfg)? };
    let c_num = li.gronwall.max(ln.gronwall);
    Ok(BridgeReport {
        n,
        difference: (li.value - ln.value).abs(),
        bound: c_num * ((n as f64 - len).abs() + 2.0) / len,
    })
}

/// Outcome of one Avalanche Principle evaluation. Hypothesis failures are
/// data: the residual is always reported.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub n: usize,
    pub log_mu: f64,
    pub hypothesis_min_ok: bool,
    pub hypothesis_gap_ok: bool,
    pub residual: f64,
    /// `n / μ`
    pub bound: f64,
}

impl ApReport {
    pub fn hypotheses_hold(&self) -> bool {
        self.hypothesis_min_ok && self.hypothesis_gap_ok
    }

    /// `residual · μ / n`, the constant this instance needs.
    pub fn implied_constant(&self) -> f64 {
        self.residual / self.bound
    }
}

/// Evaluates the AP hypotheses and residual for `A_1, …, A_n` with
/// `μ = e^{log_mu}`.
pub fn avalanche_check<T: crate::Scalar>(mats: &[ScaledMatrix2<T>], log_mu: f64) -> Result<ApReport> {
    let n = mats.len();
    precondition(n >= 2, "the Avalanche Principle needs at least two matrices")?;
    let logs: Vec<f64> = mats.iter().map(|m| m.log_norm()).collect();
    let pairs: Vec<ScaledMatrix2<T>> = mats.windows(2).map(|w| compose(&w[1], &w[0])).collect();
    let pair_logs: Vec<f64> = pairs.iter().map(|m| m.log_norm()).collect();
    let mut product = pairs[0];
    for m in &mats[2..] {
        product = compose(m, &product);
    }
    let min_log = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hypothesis_min_ok = min_log >= log_mu && log_mu > (n as f64).ln();
    let gap = (0..n - 1).map(|j| logs[j + 1] + logs[j] - pair_logs[j]).fold(f64::NEG_INFINITY, f64::max);
    let hypothesis_gap_ok = gap < 0.5 * log_mu;
    let residual = (product.log_norm() + pairwise_sum(&logs[1..n - 1]) - pairwise_sum(&pair_logs)).abs();
    Ok(ApReport {
        n,
        log_mu,
        hypothesis_min_ok,
        hypothesis_gap_ok,
        residual,
        bound: n as f64 * (-log_mu).exp(),
    })
}

/// Residual constants across random unimodular sequences that satisfy both
/// hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApSurvey {
    pub reports: Vec<ApReport>,
    /// Largest `residual · μ / n` over all instances.
    pub measured_c: f64,
    /// Largest implied constant over the first and second half of the
    /// instances.
    pub half_maxima: (f64, f64),
    /// Whether the two half maxima agree within a factor of 10.
    pub stable: bool,
    /// Sequences drawn and discarded because a hypothesis failed.
    pub rejected: usize,
}

fn rotation(a: f64) -> [[f64; 2]; 2] {
    let (s, c) = a.sin_cos();
    [[c, -s], [s, c]]
}

fn mul(a: [[f64; 2]; 2], b: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut o = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            o[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    o
}

/// `count` random sequences `A_j = R(α_j) diag(s_j, 1/s_j) R(β_j)` with
/// `log s_j ∈ [log μ, log μ + 1]`, `log μ ∈ [3.5, 4.5]` and lengths
/// `3..=12`, kept only when both hypotheses hold.
pub fn ap_random_survey(count: usize, seed: u64) -> Result<ApSurvey> {
    precondition(count >= 2, "the survey needs at least two instances")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(count);
    let mut rejected = 0usize;
    while reports.len() < count {
        let log_mu: f64 = rng.gen_range(3.5..4.5);
        let n: usize = rng.gen_range(3..=12);
        let mats: Vec<ScaledMatrix2<f64>> = (0..n)
            .map(|_| {
                let s = (log_mu + rng.gen_range(0.0..1.0)).exp();
                let d = [[s, 0.0], [0.0, 1.0 / s]];
                let a = rng.gen_range(0.0..std::f64::consts::PI);
                let b = rng.gen_range(0.0..std::f64::consts::PI);
                let m = mul(mul(rotation(a), d), rotation(b));
                ScaledMatrix2::from_parts(m, 0.0, 1.0)
            })
            .collect();
        let rep = avalanche_check(&mats, log_mu)?;
        if rep.hypotheses_hold() {
            reports.push(rep);
        } else {
            rejected += 1;
        }
        if rejected > 1000 * count {
            return Err(Error::ApHypothesisFailure { failed: rejected, total: rejected + reports.len() });
        }
    }
    let c: Vec<f64> = reports.iter().map(|r| r.implied_constant()).collect();
    let half = count / 2;
    let m1 = c[..half].iter().copied().fold(0.0, f64::max);
    let m2 = c[half..].iter().copied().fold(0.0, f64::max);
    let stable = m1 > 0.0 && m2 > 0.0 && (m1 / m2).max(m2 / m1) <= 10.0;
    Ok(ApSurvey { measured_c: m1.max(m2), half_maxima: (m1, m2), stable, rejected, reports })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApMultiscale {
    /// AP estimate of `L_I`.
    pub value: f64,
    pub blocks: usize,
    pub block_len: f64,
    /// Fraction of phases where a hypothesis failed, with `μ` the smallest
    /// block norm.
    pub failed_fraction: f64,
    /// Phase average of the AP residual against the directly composed
    /// product, divided by `|I|`.
    pub mean_residual: f64,
}

/// `|I| L_I ≈ ⟨Σ log‖M_{J_{i+1}} M_{J_i}‖ − Σ_{i=2}^{n−1} log‖M_{J_i}‖⟩` over
/// a partition of `I` into `n = round(|I|/ℓ)` equal blocks.
pub fn ap_multiscale_lyapunov(
    p: &AnalyticPotential,
    interval: Interval,
    omega: &[f64],
    energy: f64,
    block_len: f64,
    grid: &PhaseGrid,
    cfg: &IntegratorConfig,
) -> Result<ApMultiscale> {
    let len = interval.len();
    precondition(block_len >= 1.0, "block length ℓ must be at least 1")?;
    precondition(len / block_len >= 3.0, "need |I|/ℓ ≥ 3")?;
    precondition(grid.dim == p.dim(), "phase grid dimension differs from the potential's")?;
    let n = (len / block_len).round() as usize;
    let h = len / n as f64;
    let points = grid.points();
    let per_phase: Vec<(f64, bool, f64)> = map_indexed(points.len(), |i| {
        let c = p.along_line(&points[i], omega, energy)?;
        let mut mats = Vec::with_capacity(n);
        for k in 0..n {
            let a = interval.a + k as f64 * h;
            let b = if k + 1 == n { interval.b } else { a + h };
            let sol = propagate(&c, TransferParams::new(vec![], vec![], energy), a, b, cfg, false)?;
            mats.push(*sol.matrix());
        }
        let logs: Vec<f64> = mats.iter().map(|m| m.log_norm()).collect();
        let pair_logs: Vec<f64> = mats.windows(2).map(|w| compose(&w[1], &w[0]).log_norm()).collect();
        let estimate = pairwise_sum(&pair_logs) - pairwise_sum(&logs[1..n - 1]);
        let log_mu = logs.iter().copied().fold(f64::INFINITY, f64::min);
        let rep = avalanche_check(&mats, log_mu)?;
        Ok((estimate, rep.hypotheses_hold(), rep.residual))
    })?;
    let failed = per_phase.iter().filter(|x| !x.1).count();
    let failed_fraction = failed as f64 / points.len() as f64;
    if failed_fraction > 0.1 {
        return Err(Error::ApHypothesisFailure { failed, total: points.len() });
    }
    let est: Vec<f64> = per_phase.iter().map(|x| x.0).collect();
    let res: Vec<f64> = per_phase.iter().map(|x| x.2).collect();
    Ok(ApMultiscale {
        value: pairwise_mean(&est) / len,
        blocks: n,
        block_len: h,
        failed_fraction,
        mean_residual: pairwise_mean(&res) / len,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdtParams {
    pub epsilon: f64,
    pub sigma: f64,
    pub sample_count: usize,
    /// Seed of the random shift applied to the low-discrepancy sequence.
    #[serde(default)]
    pub seed: u64,
}

impl LdtParams {
    pub fn validate(&self) -> Result<()> {
        precondition(self.epsilon > 0.0, "ε must be positive")?;
        precondition(self.sigma > 0.0 && self.sigma < 1.0, "σ must lie in (0, 1)")?;
        precondition(self.sample_count >= 100, "large-deviation sampling needs at least 100 phases")
    }
}

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut x = 0.0;
    while i > 0 {
        x += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    x
}

/// Halton points `1..=count` in dimension `dim`, each coordinate shifted by a
/// seed-determined offset mod 1.
pub fn halton_phases(count: usize, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    precondition(dim >= 1 && dim <= PRIMES.len(), format!("Halton sampling supports 1..={} dimensions", PRIMES.len()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..dim).map(|_| if seed == 0 { 0.0 } else { rng.gen_range(0.0..1.0) }).collect();
    Ok((1..=count as u64)
        .map(|i| {
            (0..dim)
                .map(|k| {
                    let x = radical_inverse(i, PRIMES[k]) + shift[k];
                    x - x.floor()
                })
                .collect()
        })
        .collect())
}

/// Phases, log-norms and the deviation threshold of one large-deviation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdtSample {
    pub interval: Interval,
    pub params: LdtParams,
    pub phases: Vec<Vec<f64>>,
    pub log_norms: Vec<f64>,
    /// `L_I` from the same samples.
    pub lyapunov: f64,
    /// `ε |I|^{1−σ}`
    pub threshold: f64,
}

impl LdtSample {
    /// Whether sample `i` deviates from `|I| L_I` by at least the threshold.
    pub fn deviates(&self, i: usize) -> bool {
        (self.log_norms[i] - self.interval.len() * self.lyapunov).abs() >= self.threshold
    }

    /// Fraction of deviating samples.
    pub fn measure(&self) -> f64 {
        let hits = (0..self.log_norms.len()).filter(|&i| self.deviates(i)).count();
        hits as f64 / self.log_norms.len() as f64
    }

    /// The deviating phases.
    pub fn deviation_set(&self) -> Vec<Vec<f64>> {
        (0..self.phases.len()).filter(|&i| self.deviates(i)).map(|i| self.phases[i].clone()).collect()
    }
}

pub fn ldt_sample(
    p: &AnalyticPotential,
    interval: Interval,
    omega: &[f64],
    energy: f64,
    params: &LdtParams,
    cfg: &IntegratorConfig,
) -> Result<LdtSample> {
    params.validate()?;
    let phases = halton_phases(params.sample_count, p.dim(), params.seed)?;
    let eta = vec![0.0; p.dim()];
    let log_norms: Vec<f64> =
        log_norms_at(p, interval, &phases, &eta, omega, energy, cfg)?.into_iter().map(|x| x.0).collect();
    let len = interval.len();
    let lyapunov = pairwise_mean(&log_norms) / len;
    let phase_independent = log_norms.iter().all(|&x| x == log_norms[0]);
    let lyapunov = if phase_independent { log_norms[0] / len } else { lyapunov };
    Ok(LdtSample {
        interval,
        params: *params,
        phases,
        log_norms,
        lyapunov,
        threshold: params.epsilon * len.powf(1.0 - params.sigma),
    })
}

/// Fraction of low-discrepancy phases with
/// `|log‖M_I(θ)‖ − |I| L_I| ≥ ε |I|^{1−σ}`.
pub fn ldt_deviation_measure(
    p: &AnalyticPotential,
    interval: Interval,
    omega: &[f64],
    energy: f64,
    params: &LdtParams,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    Ok(ldt_sample(p, interval, omega, energy, params, cfg)?.measure())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformOptions {
    pub gamma_floor: f64,
    pub sigma: f64,
    /// Constant of the `C |I|^{1−σ}` allowance. `None` reports the deviation
    /// without a verdict.
    pub c_fit: Option<f64>,
}

impl Default for UniformOptions {
    fn default() -> Self {
        Self { gamma_floor: 0.1, sigma: 0.25, c_fit: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformUpperReport {
    pub lyapunov: LyapunovEstimate,
    /// `sup_θ log‖M_I(θ)‖ − |I| L_I` over the grid.
    pub sup_dev: f64,
    /// `sup_θ log‖M_I(θ)⁻¹‖_HS − |I| L_I`.
    pub sup_dev_inverse_hs: f64,
    pub bound: Option<f64>,
    pub ok: bool,
}

pub fn uniform_upper_check(
    p: &AnalyticPotential,
    interval: Interval,
    omega: &[f64],
    energy: f64,
    grid: &PhaseGrid,
    opts: &UniformOptions,
    cfg: &IntegratorConfig,
) -> Result<UniformUpperReport> {
    precondition(opts.sigma > 0.0 && opts.sigma < 1.0, "σ must lie in (0, 1)")?;
    let eta = vec![0.0; p.dim()];
    let points = grid.points();
    let mats = map_indexed(points.len(), |i| {
        let c = p.along_line(&points[i], omega, energy)?;
        let sol = propagate(&c, TransferParams::new(vec![], vec![], energy), interval.a, interval.b, cfg, false)?;
        Ok((*sol.matrix(), sol.gronwall_constant()))
    })?;
    let len = interval.len();
    let logs: Vec<f64> = mats.iter().map(|m| m.0.log_norm()).collect();
    let mut est = finite_lyapunov_from_logs(&logs, grid, interval, &eta);
    est.gronwall = mats.iter().map(|m| m.1).fold(1.0, f64::max);
    est.gamma_floor = opts.gamma_floor;
    if est.value < opts.gamma_floor {
        return Err(Error::Positivity { value: est.value, floor: opts.gamma_floor });
    }
    let center = len * est.value;
    let sup_dev = logs.iter().map(|l| l - center).fold(f64::NEG_INFINITY, f64::max);
    let sup_dev_inverse_hs =
        mats.iter().map(|m| 0.5 * m.0.inverse().log_hs_norm_sq() - center).fold(f64::NEG_INFINITY, f64::max);
    let bound = opts.c_fit.map(|c| c * len.powf(1.0 - opts.sigma));
    let ok = bound.map_or(true, |b| sup_dev <= b);
    Ok(UniformUpperReport { lyapunov: est, sup_dev, sup_dev_inverse_hs, bound, ok })
}

/// `C_fit = sup_dev / |I|^{1−σ}` at a calibration scale.
pub fn calibrate_uniform_constant(report: &UniformUpperReport, sigma: f64) -> f64 {
    report.sup_dev.max(0.0) / report.lyapunov.interval.len().powf(1.0 - sigma)
}

fn finite_lyapunov_from_logs(logs: &[f64], grid: &PhaseGrid, interval: Interval, eta: &[f64]) -> LyapunovEstimate {
    let len = interval.len();
    let value = pairwise_mean(logs) / len;
    let spread = grid
        .half_indices()
        .map(|idx| (value - pairwise_mean(&idx.iter().map(|&i| logs[i]).collect::<Vec<_>>()) / len).abs() / 2.0)
        .unwrap_or(0.0);
    LyapunovEstimate {
        value,
        interval,
        grid: grid.clone(),
        eta: eta.to_vec(),
        spread,
        gamma_floor: 0.0,
        gronwall: 1.0,
    }
}

/// Largest `|L_I(η) − L_I(η′)| / ‖η − η′‖` over consecutive entries of
/// `etas`.
pub fn eta_lipschitz_check(
    p: &AnalyticPotential,
    interval: Interval,
    omega: &[f64],
    energy: f64,
    etas: &[Vec<f64>],
    grid: &PhaseGrid,
    cfg: &IntegratorConfig,
) -> Result<f64> {
    precondition(etas.len() >= 2, "need at least two values of η")?;
    for w in etas.windows(2) {
        precondition(w[0] != w[1], "consecutive η values must differ")?;
    }
    let values = etas
        .iter()
        .map(|eta| finite_lyapunov(p, interval, omega, energy, grid, eta, cfg).map(|e| e.value))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    for (i, w) in etas.windows(2).enumerate() {
        let dist = w[0].iter().zip(&w[1]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max((values[i] - values[i + 1]).abs() / dist);
    }
    Ok(worst)
}

/// A parameter point `(θ, ω, E)` with real phase and frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub energy: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityVerdict {
    Holds,
    Violated,
    /// The right-hand side is not small, so the estimate makes no claim.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub verdict: StabilityVerdict,
}

/// `|log‖M_I(base)‖ − log‖M_I(pert)‖|` against
/// `e^{C_num|I|}(‖Δθ‖ + max(|a|,|b|)‖Δω‖ + |ΔE|) / max‖M_I‖`.
pub fn stability_rough_check(
    p: &AnalyticPotential,
    interval: Interval,
    base: &ParamPoint,
    pert: &ParamPoint,
    cfg: &IntegratorConfig,
) -> Result<StabilityReport> {
    let eta = vec![0.0; p.dim()];
    let (m1, c1) = phase_matrix(p, interval, &base.theta, &eta, &base.omega, base.energy, cfg)?;
    let (m2, c2) = phase_matrix(p, interval, &pert.theta, &eta, &pert.omega, pert.energy, cfg)?;
    let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let dtheta = base.theta.iter().zip(&pert.theta).fold(0.0f64, |m, (x, y)| {
        let d = (x - y).rem_euclid(1.0);
        m.max(d.min(1.0 - d))
    });
    let delta = dtheta
        + interval.a.abs().max(interval.b.abs()) * sup(&base.omega, &pert.omega)
        + (base.energy - pert.energy).norm();
    let lhs = (m1.log_norm() - m2.log_norm()).abs();
    let rhs = if delta == 0.0 {
        0.0
    } else {
        (c1.max(c2) * interval.len() + delta.ln() - m1.log_norm().max(m2.log_norm())).exp()
    };
    let verdict = if rhs >= 0.1 {
        StabilityVerdict::Inconclusive
    } else if lhs <= rhs {
        StabilityVerdict::Holds
    } else {
        StabilityVerdict::Violated
    };
    Ok(StabilityReport { lhs, rhs, verdict })
}

/// `|L_{[0,n]} − L_{[0,2n]}| · n / (log(1+n))^{1/σ}` for each `n`.
pub fn convergence_rate_diagnostic(
    p: &AnalyticPotential,
    omega: &[f64],
    energy: f64,
    ns: &[usize],
    sigma: f64,
    grid: &PhaseGrid,
    cfg: &IntegratorConfig,
) -> Result<Vec<(usize, f64)>> {
    precondition(sigma > 0.0 && sigma < 1.0, "σ must lie in (0, 1)")?;
    let eta = vec![0.0; p.dim()];
    ns.iter()
        .map(|&n| {
            precondition(n >= 1, "scales must be positive")?;
            let l1 = finite_lyapunov(p, Interval::from_len(n as f64)?, omega, energy, grid, &eta, cfg)?.value;
            let l2 = finite_lyapunov(p, Interval::from_len(2.0 * n as f64)?, omega, energy, grid, &eta, cfg)?.value;
            let nf = n as f64;
            Ok((n, (l1 - l2).abs() * nf / (1.0 + nf).ln().powf(1.0 / sigma)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleMonotonicity {
    pub l_small: f64,
    pub l_large: f64,
    /// `L_I − C_num((|J|+1)/(|I|−|J|) + 1/|J|)`
    pub lower_bound: f64,
    pub ok: bool,
}

/// Checks `L_J ≥ L_I − C_num((|J|+1)/(|I|−|J|) + 1/|J|)` for `|J| < |I|`.
pub fn scale_monotonicity_check(
    p: &AnalyticPotential,
    large: Interval,
    small: Interval,
    omega: &[f64],
    energy: f64,
    grid: &PhaseGrid,
    cfg: &IntegratorConfig,
) -> Result<ScaleMonotonicity> {
    precondition(small.len() < large.len(), "need |J| < |I|")?;
    let eta = vec![0.0; p.dim()];
    let li = finite_lyapunov(p, large, omega, energy, grid, &eta, cfg)?;
    let lj = finite_lyapunov(p, small, omega, energy, grid, &eta, cfg)?;
    let c = li.gronwall.max(lj.gronwall);
    let (i, j) = (large.len(), small.len());
    let lower_bound = li.value - c * ((j + 1.0) / (i - j) + 1.0 / j);
    Ok(ScaleMonotonicity { l_small: lj.value, l_large: li.value, lower_bound, ok: lj.value >= lower_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn golden() -> Vec<f64> {
        vec![(5f64.sqrt() - 1.0) / 2.0]
    }

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::default()
    }

    #[test]
    fn grid_enumeration_is_lexicographic() {
        let g = PhaseGrid::with_offset(3, vec![0.0, 0.5]).unwrap();
        assert_eq!(g.total(), 9);
        assert_eq!(g.point(0), vec![0.0, 0.5 / 3.0]);
        assert_eq!(g.point(1), vec![0.0, 1.5 / 3.0]);
        assert_eq!(g.point(3), vec![1.0 / 3.0, 0.5 / 3.0]);
        let h = PhaseGrid::new(4, 2).unwrap().half_indices().unwrap();
        assert_eq!(h, vec![0, 2, 8, 10]);
    }

    #[test]
    fn free_particle_hyperbolic_exponent() {
        // L = 2 + log(5/4)/|I| up to e^{-4|I|}
        let p = AnalyticPotential::zero(1);
        let g = PhaseGrid::new(4, 1).unwrap();
        let e = finite_lyapunov(&p, Interval::from_len(25.0).unwrap(), &golden(), -4.0, &g, &[0.0], &cfg()).unwrap();
        assert_abs_diff_eq!(e.value, 2.0 + 1.25f64.ln() / 25.0, epsilon = 1e-9);
        assert_abs_diff_eq!(e.value, 2.0, epsilon = 1e-2);
        assert_eq!(e.spread, 0.0);
    }

    #[test]
    fn free_particle_elliptic_exponent() {
        let p = AnalyticPotential::zero(1);
        let g = PhaseGrid::new(4, 1).unwrap();
        let e = finite_lyapunov(&p, Interval::from_len(25.0).unwrap(), &golden(), 1.0, &g, &[0.0], &cfg()).unwrap();
        assert!(e.value.abs() < 2e-2);
        assert!(e.value >= -e.spread - 1e-12);
    }

    #[test]
    fn cosine_grid_refinement() {
        let p = AnalyticPotential::cosine_model(3.0).unwrap();
        let i = Interval::from_len(30.0).unwrap();
        let a = finite_lyapunov(&p, i, &golden(), 0.0, &PhaseGrid::new(64, 1).unwrap(), &[0.0], &cfg()).unwrap();
        let b = finite_lyapunov(&p, i, &golden(), 0.0, &PhaseGrid::new(128, 1).unwrap(), &[0.0], &cfg()).unwrap();
        assert!(a.value > 0.5 && b.value > 0.5);
        assert!((a.value - b.value).abs() <= a.spread.max(b.spread) + 1e-12, "{a:?} {b:?}");
        // offset invariance up to twice the spread
        let shifted = PhaseGrid::with_offset(64, vec![0.5]).unwrap();
        let c = finite_lyapunov(&p, i, &golden(), 0.0, &shifted, &[0.0], &cfg()).unwrap();
        assert!((a.value - c.value).abs() <= 2.0 * a.spread.max(c.spread) + 1e-12);
    }

    #[test]
    fn eta_outside_strip_rejected() {
        let p = AnalyticPotential::cosine_model(2.0).unwrap();
        let g = PhaseGrid::new(4, 1).unwrap();
        let r = finite_lyapunov(&p, Interval::from_len(5.0).unwrap(), &golden(), 0.0, &g, &[0.2], &cfg());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn subadditivity_free_and_cosine() {
        let free = subadditivity_table(&AnalyticPotential::zero(1), &golden(), -1.0, 6, &PhaseGrid::new(4, 1).unwrap(), &cfg())
            .unwrap();
        assert!(free.rows.iter().all(|r| (r.value - 1.0).abs() < 1e-6));
        assert!(free.violations.is_empty());
        let p = AnalyticPotential::cosine_model(3.0).unwrap();
        let t = subadditivity_table(&p, &golden(), 0.0, 8, &PhaseGrid::new(32, 1).unwrap(), &cfg()).unwrap();
        assert!(t.violations.is_empty(), "{:?}", t.violations);
        assert!(subadditivity_table(&p, &golden(), 0.0, 1, &PhaseGrid::new(4, 1).unwrap(), &cfg()).is_err());
    }

    #[test]
    fn bridge_cases() {
        let g = PhaseGrid::new(8, 1).unwrap();
        let p = AnalyticPotential::cosine_model(2.0).unwrap();
        let same = continuous_discrete_bridge(&p, Interval::from_len(10.0).unwrap(), &golden(), 0.0, &g, &cfg()).unwrap();
        assert_eq!(same.difference, 0.0);
        let off = continuous_discrete_bridge(&p, Interval::new(0.3, 25.8).unwrap(), &golden(), 0.0, &g, &cfg()).unwrap();
        assert!(off.difference <= off.bound);
        let free = continuous_discrete_bridge(
            &AnalyticPotential::zero(1),
            Interval::new(0.0, 10.5).unwrap(),
            &golden(),
            -1.0,
            &g,
            &cfg(),
        )
        .unwrap();
        assert!(free.difference <= 1e-6);
    }

    #[test]
    fn avalanche_two_matrices_exact() {
        let a = ScaledMatrix2::from_entries([[3.0, 1.0], [2.0, 1.0]]);
        let b = ScaledMatrix2::from_entries([[0.5, -4.0], [0.25, 0.0]]);
        assert_eq!(avalanche_check(&[a, b], 0.5).unwrap().residual, 0.0);
    }

    #[test]
    fn avalanche_diagonal() {
        let d = ScaledMatrix2::from_parts([[1.0, 0.0], [0.0, (-20f64).exp()]], 10.0, 1.0);
        let r = avalanche_check(&[d; 5], 10.0).unwrap();
        assert!(r.hypotheses_hold());
        assert!(r.residual <= 5.0 * r.bound);
    }

    #[test]
    fn avalanche_on_transfer_blocks() {
        let p = AnalyticPotential::cosine_model(3.0).unwrap();
        let gamma = 0.1;
        let ell = 1.0;
        let mats: Vec<_> = (0..40)
            .map(|k| {
                crate::transfer::transfer_matrix_at(
                    &p,
                    Interval::new(k as f64, k as f64 + ell).unwrap(),
                    &[0.2],
                    &golden(),
                    0.0,
                    &cfg(),
                )
                .unwrap()
            })
            .collect();
        let r = avalanche_check(&mats, gamma * ell / 2.0).unwrap();
        assert!(r.residual <= 100.0 * r.bound, "{r:?}");
        let whole = crate::transfer::transfer_matrix_at(&p, Interval::new(0.0, 40.0).unwrap(), &[0.2], &golden(), 0.0, &cfg())
            .unwrap();
        let logs: f64 = mats[1..39].iter().map(|m| m.log_norm()).sum();
        let pairs: f64 = mats.windows(2).map(|w| compose(&w[1], &w[0]).log_norm()).sum();
        assert_abs_diff_eq!(r.residual, (whole.log_norm() + logs - pairs).abs(), epsilon = 1e-6);
    }

    #[test]
    fn ap_survey_constant_is_stable() {
        let s = ap_random_survey(100, 7).unwrap();
        assert!(s.reports.iter().all(|r| r.residual <= s.measured_c * r.bound));
        assert!(s.stable, "{:?}", s.half_maxima);
    }

    #[test]
    fn multiscale_free_particle() {
        let r = ap_multiscale_lyapunov(
            &AnalyticPotential::zero(1),
            Interval::from_len(50.0).unwrap(),
            &golden(),
            -1.0,
            5.0,
            &PhaseGrid::new(2, 1).unwrap(),
            &cfg(),
        )
        .unwrap();
        assert_abs_diff_eq!(r.value, 1.0, epsilon = 1e-4);
        let bad = ap_multiscale_lyapunov(
            &AnalyticPotential::zero(1),
            Interval::from_len(50.0).unwrap(),
            &golden(),
            -1.0,
            50.0,
            &PhaseGrid::new(2, 1).unwrap(),
            &cfg(),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn ldt_trivial_cases() {
        let params = LdtParams { epsilon: 0.5, sigma: 0.25, sample_count: 100, seed: 0 };
        let free = ldt_deviation_measure(&AnalyticPotential::zero(1), Interval::from_len(10.0).unwrap(), &golden(), -1.0, &params, &cfg())
            .unwrap();
        assert_eq!(free, 0.0);
        let huge = LdtParams { epsilon: 1e3, ..params };
        let p = AnalyticPotential::cosine_model(3.0).unwrap();
        assert_eq!(ldt_deviation_measure(&p, Interval::from_len(10.0).unwrap(), &golden(), 0.0, &huge, &cfg()).unwrap(), 0.0);
        assert!(ldt_deviation_measure(&p, Interval::from_len(10.0).unwrap(), &golden(), 0.0, &LdtParams { sample_count: 10, ..params }, &cfg()).is_err());
    }

    #[test]
    fn halton_is_deterministic_and_in_range() {
        let a = halton_phases(50, 2, 3).unwrap();
        assert_eq!(a, halton_phases(50, 2, 3).unwrap());
        assert!(a.iter().flatten().all(|x| (0.0..1.0).contains(x)));
        assert_eq!(halton_phases(3, 1, 0).unwrap(), vec![vec![0.5], vec![0.25], vec![0.75]]);
    }

    #[test]
    fn uniform_upper_cases() {
        let g = PhaseGrid::new(8, 1).unwrap();
        let opts = UniformOptions::default();
        let free = uniform_upper_check(&AnalyticPotential::zero(1), Interval::from_len(10.0).unwrap(), &golden(), -1.0, &g, &opts, &cfg())
            .unwrap();
        assert!(free.sup_dev.abs() < 1e-8);
        // ‖M‖ ≤ 3 for E = 9, so L_I ≤ log 3 / 40 < γ
        let r = uniform_upper_check(&AnalyticPotential::zero(1), Interval::from_len(40.0).unwrap(), &golden(), 9.0, &g, &opts, &cfg());
        assert!(matches!(r, Err(Error::Positivity { .. })));
    }

    #[test]
    fn eta_lipschitz_free_is_zero() {
        let g = PhaseGrid::new(4, 1).unwrap();
        let etas = vec![vec![0.0], vec![0.01], vec![0.02]];
        let r = eta_lipschitz_check(&AnalyticPotential::zero(1), Interval::from_len(10.0).unwrap(), &golden(), -1.0, &etas, &g, &cfg())
            .unwrap();
        assert!(r < 1e-6);
        assert!(eta_lipschitz_check(&AnalyticPotential::zero(1), Interval::from_len(10.0).unwrap(), &golden(), -1.0, &[vec![0.0], vec![0.0]], &g, &cfg()).is_err());
    }

    #[test]
    fn rough_stability() {
        let p = AnalyticPotential::cosine_model(2.0).unwrap();
        let i = Interval::from_len(5.0).unwrap();
        let base = ParamPoint { theta: vec![0.3], omega: golden(), energy: Complex64::new(0.5, 0.0) };
        let same = stability_rough_check(&p, i, &base, &base, &cfg()).unwrap();
        assert_eq!(same.lhs, 0.0);
        let pert = ParamPoint { energy: Complex64::new(0.5 + 1e-12, 0.0), ..base.clone() };
        let r = stability_rough_check(&p, i, &base, &pert, &cfg()).unwrap();
        assert!(r.lhs <= r.rhs);
        let far = ParamPoint { energy: Complex64::new(1.5, 0.0), ..base.clone() };
        assert_eq!(stability_rough_check(&p, i, &base, &far, &cfg()).unwrap().verdict, StabilityVerdict::Inconclusive);
    }

    #[test]
    fn scale_monotonicity() {
        let p = AnalyticPotential::cosine_model(3.0).unwrap();
        let g = PhaseGrid::new(16, 1).unwrap();
        let r = scale_monotonicity_check(&p, Interval::from_len(40.0).unwrap(), Interval::from_len(8.0).unwrap(), &golden(), 0.0, &g, &cfg())
            .unwrap();
        assert!(r.ok);
    }
}
