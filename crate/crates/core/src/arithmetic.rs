//! Diophantine conditions, discrepancy of rotation orbits, orbit-hit counting
//! and the double-resonance scan.

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::lyapunov::{finite_lyapunov, PhaseGrid};
use crate::par::map_indexed;
use crate::potential::AnalyticPotential;
use crate::transfer::{compose, propagate, transfer_matrix_at, IntegratorConfig, Interval, ScaledMatrix2, TransferParams};

const LATTICE_BUDGET: f64 = 1e8;

/// `‖k·ω‖ ≥ c |k|^{−A}` for `0 < |k|`, `|k|` the sup norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiophantineSpec {
    pub c: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub d: usize,
}

impl DiophantineSpec {
    pub fn new(c: f64, a: f64, d: usize) -> Result<Self> {
        let s = Self { c, a, d };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        precondition(self.d >= 1, "dimension must be at least 1")?;
        precondition(self.c > 0.0, "c must be positive")?;
        precondition(self.a > self.d as f64, "A must exceed d")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcResult {
    pub ok: bool,
    /// Minimizer of `‖k·ω‖ |k|^A / c`.
    pub worst_k: Vec<i64>,
    /// The minimum of `‖k·ω‖ |k|^A / c`; membership means `margin ≥ 1`.
    pub margin: f64,
}

/// Distance to the nearest integer of `Σ kᵢωᵢ`, with the products and sum
/// carried in double-double so that integer `k` do not lose the fractional part.
pub fn dist_to_int(k: &[i64], omega: &[f64]) -> f64 {
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for (&ki, &wi) in k.iter().zip(omega) {
        let kf = ki as f64;
        let p = kf * wi;
        let pe = kf.mul_add(wi, -p);
        let s = hi + p;
        let bp = s - hi;
        let se = (hi - (s - bp)) + (p - bp);
        hi = s;
        lo += se + pe;
    }
    let n = hi.round();
    let r = (hi - n) + lo;
    let r = r - r.round();
    r.abs()
}

/// Fractional part of `θ + nω`, computed from the exact product `nω`.
pub fn orbit_point(theta0: f64, omega: f64, n: u64) -> f64 {
    let nf = n as f64;
    let p = nf * omega;
    let pe = nf.mul_add(omega, -p);
    let ip = p.floor();
    let x = (p - ip) + pe + theta0;
    let x = x - x.floor();
    if x >= 1.0 {
        0.0
    } else {
        x
    }
}

/// Exhaustive scan of `0 < |k|_∞ ≤ t`. Only one of `±k` is visited.
pub fn dc_membership(omega: &[f64], spec: &DiophantineSpec, t: f64) -> Result<DcResult> {
    spec.validate()?;
    precondition(omega.len() == spec.d, "ω has the wrong dimension")?;
    precondition(t >= 1.0, "t must be at least 1")?;
    let r = t.floor() as i64;
    let points = (2.0 * r as f64 + 1.0).powi(spec.d as i32);
    if points > LATTICE_BUDGET {
        return Err(Error::BudgetExceeded { points, budget: LATTICE_BUDGET });
    }
    let d = spec.d;
    let mut k = vec![-r; d];
    let mut best = (f64::INFINITY, vec![0i64; d]);
    loop {
        // first nonzero coordinate positive
        if let Some(first) = k.iter().find(|&&x| x != 0) {
            if *first > 0 {
                let norm = k.iter().map(|x| x.abs()).max().unwrap() as f64;
                let ratio = dist_to_int(&k, omega) * norm.powf(spec.a) / spec.c;
                if ratio < best.0 {
                    best = (ratio, k.clone());
                }
            }
        }
        let mut i = d;
        loop {
            if i == 0 {
                return Ok(DcResult { ok: best.0 >= 1.0, worst_k: best.1, margin: best.0 });
            }
            i -= 1;
            if k[i] < r {
                k[i] += 1;
                break;
            }
            k[i] = -r;
        }
    }
}

/// A half-open box `Π [loᵢ, hiᵢ)` in `[0, 1]^d`; `hiᵢ = 1` closes the side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl UnitBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        precondition(lo.len() == hi.len() && !lo.is_empty(), "box bounds have mismatched dimensions")?;
        precondition(
            lo.iter().zip(&hi).all(|(a, b)| 0.0 <= *a && a <= b && *b <= 1.0),
            "box must lie in the unit cube",
        )?;
        Ok(Self { lo, hi })
    }

    pub fn unit(d: usize) -> Self {
        Self { lo: vec![0.0; d], hi: vec![1.0; d] }
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&xi, (&a, &b))| xi >= a && (xi < b || b >= 1.0))
    }
}

/// `#{1 ≤ n ≤ N : nω mod 1 ∈ R}` and `|count − N·Vol(R)|`.
pub fn discrepancy_count(omega: &[f64], n: u64, region: &UnitBox) -> Result<(u64, f64)> {
    precondition(region.lo.len() == omega.len(), "box and ω dimensions differ")?;
    let mut x = vec![0.0; omega.len()];
    let mut count = 0u64;
    for k in 1..=n {
        for (xi, &w) in x.iter_mut().zip(omega) {
            *xi = orbit_point(0.0, w, k);
        }
        if region.contains(&x) {
            count += 1;
        }
    }
    Ok((count, (count as f64 - n as f64 * region.volume()).abs()))
}

/// Running errors `|#{n ≤ N : nω ∈ [0, x)} − N x|` for every `N ≤ n_max` and
/// each `x` in `anchors`; returns the largest error divided by `log N`
/// together with the `N` where it occurs (`N ≥ 2`).
pub fn discrepancy_log_ratio(omega: f64, n_max: u64, anchors: &[f64]) -> (f64, u64) {
    let mut counts = vec![0u64; anchors.len()];
    let mut worst = (0.0, 2u64);
    for n in 1..=n_max {
        let x = orbit_point(0.0, omega, n);
        for (c, &a) in counts.iter_mut().zip(anchors) {
            if x < a {
                *c += 1;
            }
        }
        if n >= 2 {
            let ln = (n as f64).ln();
            for (c, &a) in counts.iter().zip(anchors) {
                let r = (*c as f64 - n as f64 * a).abs() / ln;
                if r > worst.0 {
                    worst = (r, n);
                }
            }
        }
    }
    worst
}

/// Star discrepancy `N · sup_x |#{n ≤ N : nω < x}/N − x|` of a 1-d orbit.
pub fn star_discrepancy(omega: f64, n: u64) -> f64 {
    let mut xs: Vec<f64> = (1..=n).map(|k| orbit_point(0.0, omega, k)).collect();
    xs.sort_by(f64::total_cmp);
    let nf = n as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| f64::max((i + 1) as f64 - nf * x, nf * x - i as f64))
        .fold(0.0, f64::max)
}

/// `C_fit = max_{2 ≤ N ≤ n_max} error(N) / (N^{1−1/A} log² N)`.
pub fn calibrate_discrepancy_constant(omega: &[f64], a: f64, n_max: u64, region: &UnitBox) -> Result<f64> {
    precondition(n_max >= 2, "calibration needs N ≥ 2")?;
    let mut x = vec![0.0; omega.len()];
    let mut count = 0u64;
    let mut c_fit = 0.0f64;
    for k in 1..=n_max {
        for (xi, &w) in x.iter_mut().zip(omega) {
            *xi = orbit_point(0.0, w, k);
        }
        if region.contains(&x) {
            count += 1;
        }
        if k >= 2 {
            let kf = k as f64;
            let err = (count as f64 - kf * region.volume()).abs();
            c_fit = c_fit.max(err / (kf.powf(1.0 - 1.0 / a) * kf.ln().powi(2)));
        }
    }
    Ok(c_fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitCountReport {
    pub n: u64,
    pub hits: u64,
    pub delta: f64,
    /// `hits < N^{1−δ}`
    pub passes: bool,
}

/// Counts `1 ≤ n ≤ N` with `θ₀ + nω mod 1 ∈ S`. The predicate receives the
/// orbit index along with the reduced point, so that precomputed memberships
/// can be looked up.
pub fn orbit_hit_count<F>(omega: &[f64], theta0: &[f64], n: u64, membership: F, delta: f64) -> Result<OrbitCountReport>
where
    F: Fn(u64, &[f64]) -> bool,
{
    precondition(omega.len() == theta0.len(), "θ₀ and ω dimensions differ")?;
    precondition(delta >= 0.0 && delta < 1.0, "δ must lie in [0, 1)")?;
    let mut x = vec![0.0; omega.len()];
    let mut hits = 0u64;
    for k in 1..=n {
        for ((xi, &w), &t0) in x.iter_mut().zip(omega).zip(theta0) {
            *xi = orbit_point(t0, w, k);
        }
        if membership(k, &x) {
            hits += 1;
        }
    }
    Ok(OrbitCountReport { n, hits, delta, passes: (hits as f64) < (n as f64).powf(1.0 - delta) })
}

/// `log‖M_I(θ + nω)‖` for `n = n_lo..=n_hi`, read as `log‖M_{I+n}(θ)‖`. When
/// `|I|` is an integer the matrices are products of unit blocks along the
/// single line through `θ`; otherwise each shift is integrated directly.
#[allow(clippy::too_many_arguments)]
pub fn shifted_log_norms(
    p: &AnalyticPotential,
    interval: Interval,
    theta: &[f64],
    omega: &[f64],
    energy: f64,
    n_lo: u64,
    n_hi: u64,
    cfg: &IntegratorConfig,
) -> Result<Vec<f64>> {
    precondition(n_lo <= n_hi, "empty shift range")?;
    let count = (n_hi - n_lo + 1) as usize;
    let len = interval.len();
    let units = len.round();
    if (len - units).abs() > 1e-12 || units < 1.0 {
        return map_indexed(count, |i| {
            let shifted = interval.shifted((n_lo + i as u64) as f64);
            Ok(transfer_matrix_at(p, shifted, theta, omega, energy, cfg)?.log_norm())
        });
    }
    let units = units as usize;
    let coupling = p.along_line(theta, omega, energy)?;
    let start = interval.a + n_lo as f64;
    let blocks: Vec<ScaledMatrix2<f64>> = map_indexed(count + units - 1, |k| {
        let a = start + k as f64;
        let params = TransferParams::new(Vec::new(), Vec::new(), energy);
        Ok(*propagate(&coupling, params, a, a + 1.0, cfg, false)?.matrix())
    })?;
    Ok((0..count)
        .map(|i| {
            blocks[i..i + units].iter().fold(ScaledMatrix2::identity(), |acc, b| compose(b, &acc)).log_norm()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceOptions {
    pub sigma: f64,
    /// Phase lattice size per dimension for the reference exponents.
    pub grid_points: usize,
}

impl Default for ResonanceOptions {
    fn default() -> Self {
        Self { sigma: 0.25, grid_points: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceHit {
    pub energy: f64,
    pub n: u64,
    /// `log‖M_J(θ)‖ − |J| L_J`
    pub excess_j: f64,
    /// `log‖M_I(θ + nω)‖ − |I| L_I`
    pub excess_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub energies: Vec<f64>,
    pub hits: Vec<ResonanceHit>,
    /// Energies where `L_I` or `L_J` fell below `γ`; these are not scanned.
    pub below_floor: Vec<f64>,
    /// Fraction of scanned energies with at least one double resonance.
    pub fraction: f64,
    pub note: String,
}

/// For each `E`, reports every `n` in `n_range` with both
/// `log‖M_J(θ)‖ ≤ |J|L_J − |J|^{1−σ/2}` and `log‖M_I(θ+nω)‖ ≤ |I|L_I − |I|^{1−σ}`.
#[allow(clippy::too_many_arguments)]
pub fn resonance_scan(
    p: &AnalyticPotential,
    i_interval: Interval,
    j_interval: Interval,
    theta: &[f64],
    omega: &[f64],
    energies: &[f64],
    n_range: (u64, u64),
    gamma: f64,
    opts: &ResonanceOptions,
    cfg: &IntegratorConfig,
) -> Result<ResonanceReport> {
    precondition(opts.sigma > 0.0 && opts.sigma < 1.0, "σ must lie in (0, 1)")?;
    precondition(n_range.0 >= 1 && n_range.0 <= n_range.1, "shift range must be a nonempty subset of n ≥ 1")?;
    let grid = PhaseGrid::new(opts.grid_points, p.dim())?;
    let eta = vec![0.0; p.dim()];
    let (li, lj) = (i_interval.len(), j_interval.len());
    let mut hits = Vec::new();
    let mut below_floor = Vec::new();
    let mut resonant = 0usize;
    for &e in energies {
        let l_i = finite_lyapunov(p, i_interval, omega, e, &grid, &eta, cfg)?.value;
        let l_j = finite_lyapunov(p, j_interval, omega, e, &grid, &eta, cfg)?.value;
        if l_i < gamma || l_j < gamma {
            below_floor.push(e);
            continue;
        }
        let excess_j = transfer_matrix_at(p, j_interval, theta, omega, e, cfg)?.log_norm() - lj * l_j;
        if excess_j > -lj.powf(1.0 - opts.sigma / 2.0) {
            continue;
        }
        let norms = shifted_log_norms(p, i_interval, theta, omega, e, n_range.0, n_range.1, cfg)?;
        let before = hits.len();
        for (k, ln) in norms.into_iter().enumerate() {
            let excess_i = ln - li * l_i;
            if excess_i <= -li.powf(1.0 - opts.sigma) {
                hits.push(ResonanceHit { energy: e, n: n_range.0 + k as u64, excess_j, excess_i });
            }
        }
        if hits.len() > before {
            resonant += 1;
        }
    }
    let scanned = energies.len() - below_floor.len();
    Ok(ResonanceReport {
        energies: energies.to_vec(),
        hits,
        below_floor,
        fraction: if scanned == 0 { 0.0 } else { resonant as f64 / scanned as f64 },
        note: "single-ω demonstration; exceptional-set measure over ω is not assessed".into(),
    })
}
