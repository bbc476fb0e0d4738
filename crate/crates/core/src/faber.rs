//! Faber polynomials of intervals `[−L, L]`, multivariate Faber series on
//! products of intervals, and polynomial surrogates for transfer matrices.
//!
//! For `K = [−L, L]` the exterior map is `φ(z) = z/L + √((z/L)² − 1)` with
//! inverse `φ⁻¹(w) = (L/2)(w + 1/w)`, so `Φ_{K,n}(z) = 2 T_n(z/L)` for `n ≥ 1`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::arithmetic::{dc_membership, shifted_log_norms, DiophantineSpec};
use crate::error::{precondition, Error, Result};
use crate::lyapunov::{finite_lyapunov, halton_phases, PhaseGrid};
use crate::par::{map_indexed, pairwise_mean};
use crate::potential::AnalyticPotential;
use crate::scalar::Scalar;
use crate::transfer::{transfer_matrix_at, transfer_matrix_complex, IntegratorConfig, Interval};

/// Largest number of multi-indices a surrogate may carry.
pub const MAX_COEFFICIENTS: usize = 10_000_000;
/// Largest number of quadrature nodes in one coefficient computation.
pub const MAX_NODES: usize = 1 << 24;
const QUAD_RESOLUTION: f64 = 1e-8;

/// Monomial coefficients (ascending powers) of `Φ_{[−L,L],n}`.
pub fn faber_polynomial(l: f64, n: usize) -> Result<Vec<f64>> {
    precondition(l > 0.0 && l.is_finite(), "half-length L must be positive")?;
    if n == 0 {
        return Ok(vec![1.0]);
    }
    let s = 2.0 / l;
    let mut prev = vec![2.0];
    let mut cur = vec![0.0, s];
    for _ in 1..n {
        let mut next = vec![0.0; cur.len() + 1];
        for (k, c) in cur.iter().enumerate() {
            next[k + 1] += s * c;
        }
        for (k, c) in prev.iter().enumerate() {
            next[k] -= c;
        }
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// `Φ_0(z), …, Φ_{n_max}(z)` on `[−L, L]` by the three-term recurrence.
pub fn faber_values<T: Scalar>(l: f64, z: T, n_max: usize) -> Vec<T> {
    let x = z.scale(2.0 / l);
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(T::one());
    if n_max >= 1 {
        out.push(x);
    }
    for n in 2..=n_max {
        let prev2 = if n == 2 { T::from_re(2.0) } else { out[n - 2] };
        let v = x * out[n - 1] - prev2;
        out.push(v);
    }
    out
}

/// Product of intervals `K_i = [−L_i, L_i]` with the level `R` of the
/// analyticity ellipses and the intermediate level `R′`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaberDomain {
    pub half_lengths: Vec<f64>,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "R_prime")]
    pub r_prime: f64,
}

impl FaberDomain {
    /// `R′ = (1 + R)/2`.
    pub fn new(half_lengths: Vec<f64>, r: f64) -> Result<Self> {
        Self::with_r_prime(half_lengths, r, (1.0 + r) / 2.0)
    }

    pub fn with_r_prime(half_lengths: Vec<f64>, r: f64, r_prime: f64) -> Result<Self> {
        let d = Self { half_lengths, r, r_prime };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        precondition(!self.half_lengths.is_empty(), "domain needs at least one variable")?;
        precondition(
            self.half_lengths.iter().all(|l| *l > 0.0 && l.is_finite()),
            "half-lengths must be positive",
        )?;
        precondition(1.0 < self.r_prime && self.r_prime < self.r && self.r.is_finite(), "need 1 < R′ < R")
    }

    pub fn dim(&self) -> usize {
        self.half_lengths.len()
    }

    /// Contour radius of the coefficient quadrature.
    pub fn quad_radius(&self) -> f64 {
        (1.0 + self.r) / 2.0
    }

    pub fn inverse_map(&self, i: usize, w: Complex64) -> Complex64 {
        (w + w.inv()) * (self.half_lengths[i] / 2.0)
    }

    /// Semi-axes `(L/2)(R′ ± 1/R′)` of `Γ_{K_i,R′}`.
    pub fn semi_axes(&self, i: usize) -> (f64, f64) {
        let (l, r) = (self.half_lengths[i], self.r_prime);
        (l / 2.0 * (r + 1.0 / r), l / 2.0 * (r - 1.0 / r))
    }

    /// Length bound `π L (R′ + 1/R′)` of `Γ_{K_i,R′}`.
    pub fn ellipse_length(&self, i: usize) -> f64 {
        PI * self.half_lengths[i] * (self.r_prime + 1.0 / self.r_prime)
    }

    /// `d(K_i, Γ_{K_i,R′}) = (L/2)(R′ + 1/R′ − 2)`.
    pub fn ellipse_distance(&self, i: usize) -> f64 {
        self.half_lengths[i] / 2.0 * (self.r_prime + 1.0 / self.r_prime - 2.0)
    }

    /// `(R′/R)^N Π ℓ(Γ_i)/d(K_i, Γ_i)`; multiply by `sup |f|` for the bound.
    pub fn cert_factor(&self, degree: usize) -> f64 {
        let quot: f64 = (0..self.dim()).map(|i| self.ellipse_length(i) / self.ellipse_distance(i)).product();
        (self.r_prime / self.r).powi(degree as i32) * quot
    }
}

/// Multi-indices with `|n| ≤ N` in lexicographic order.
pub fn multi_indices(m: usize, degree: usize) -> Vec<Vec<u32>> {
    fn rec(m: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur.push(k as u32);
            rec(m, left - k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, degree, &mut Vec::with_capacity(m), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// One coefficient set per output of `f`.
pub type Coefficients = Vec<(Vec<u32>, f64)>;

fn fft_nd(data: &mut [Complex64], q: usize, m: usize, planner: &mut FftPlanner<f64>) {
    let fft = planner.plan_fft_forward(q);
    let mut line = vec![Complex64::new(0.0, 0.0); q];
    for axis in 0..m {
        let stride = q.pow((m - 1 - axis) as u32);
        let outer = data.len() / (q * stride);
        for o in 0..outer {
            for s in 0..stride {
                let base = o * q * stride + s;
                for (k, x) in line.iter_mut().enumerate() {
                    *x = data[base + k * stride];
                }
                fft.process(&mut line);
                for (k, x) in line.iter().enumerate() {
                    data[base + k * stride] = *x;
                }
            }
        }
    }
}

fn extract(data: &[Complex64], q: usize, rho: f64, indices: &[Vec<u32>]) -> Vec<f64> {
    let total = data.len() as f64;
    indices
        .iter()
        .map(|n| {
            let flat = n.iter().fold(0usize, |acc, &k| acc * q + k as usize);
            let order: u32 = n.iter().sum();
            data[flat].re / total * rho.powi(-(order as i32))
        })
        .collect()
}

/// Faber coefficients `a_n`, `|n| ≤ N`, of each output of `f` by the
/// iterated trapezoid rule on `|t_i| = (1 + R)/2`. `f` receives the point
/// `(φ⁻¹(t_1), …, φ⁻¹(t_m))`. The rule is run with `quad_points` and with
/// twice as many nodes; the finer result is returned.
pub fn faber_coefficients_multi<F>(
    f: F,
    outputs: usize,
    dom: &FaberDomain,
    degree: usize,
    quad_points: usize,
) -> Result<Vec<Coefficients>>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>> + Sync + Send,
{
    dom.validate()?;
    let m = dom.dim();
    precondition(quad_points.is_power_of_two() && quad_points >= 4 * degree.max(1), "quad_points must be a power of two ≥ 4N")?;
    let count = binomial(degree + m, m);
    precondition(count <= MAX_COEFFICIENTS as f64, format!("{count} coefficients exceed the budget of {MAX_COEFFICIENTS}"))?;
    let fine = 2 * quad_points;
    let nodes = (fine as f64).powi(m as i32);
    precondition(nodes <= MAX_NODES as f64, format!("{nodes} quadrature nodes exceed the budget of {MAX_NODES}"))?;
    let nodes = nodes as usize;
    let rho = dom.quad_radius();
    let axis: Vec<Vec<Complex64>> = (0..m)
        .map(|i| (0..fine).map(|j| dom.inverse_map(i, Complex64::from_polar(rho, 2.0 * PI * j as f64 / fine as f64))).collect())
        .collect();
    let values = map_indexed(nodes, |flat| {
        let mut rest = flat;
        let mut z = vec![Complex64::new(0.0, 0.0); m];
        for i in (0..m).rev() {
            z[i] = axis[i][rest % fine];
            rest /= fine;
        }
        let v = f(&z)?;
        precondition(v.len() == outputs, "function returned the wrong number of outputs")?;
        Ok(v)
    })?;
    let indices = multi_indices(m, degree);
    let mut planner = FftPlanner::new();
    let mut out = Vec::with_capacity(outputs);
    for o in 0..outputs {
        let mut full: Vec<Complex64> = values.iter().map(|v| v[o]).collect();
        let mut coarse: Vec<Complex64> = (0..quad_points.pow(m as u32))
            .map(|flat| {
                let mut rest = flat;
                let mut idx = 0usize;
                let mut mul = 1usize;
                for _ in 0..m {
                    idx += 2 * (rest % quad_points) * mul;
                    rest /= quad_points;
                    mul *= fine;
                }
                full[idx]
            })
            .collect();
        fft_nd(&mut full, fine, m, &mut planner);
        fft_nd(&mut coarse, quad_points, m, &mut planner);
        let a_fine = extract(&full, fine, rho, &indices);
        let a_coarse = extract(&coarse, quad_points, rho, &indices);
        let scale = a_fine.iter().fold(0.0f64, |acc, a| acc.max(a.abs()));
        let change = a_fine.iter().zip(&a_coarse).fold(0.0f64, |acc, (x, y)| acc.max((x.abs() - y.abs()).abs()));
        let allowed = QUAD_RESOLUTION * scale;
        if change > allowed || !change.is_finite() {
            return Err(Error::QuadratureUnresolved { change, allowed });
        }
        out.push(indices.iter().cloned().zip(a_fine).collect());
    }
    Ok(out)
}

/// Single-output form of [`faber_coefficients_multi`].
pub fn faber_coefficients<F>(f: F, dom: &FaberDomain, degree: usize, quad_points: usize) -> Result<Coefficients>
where
    F: Fn(&[Complex64]) -> Result<Complex64> + Sync + Send,
{
    let mut v = faber_coefficients_multi(|z| Ok(vec![f(z)?]), 1, dom, degree, quad_points)?;
    Ok(v.pop().expect("one output"))
}

/// Default node count: the least power of two ≥ max(4N, 8).
pub fn default_quad_points(degree: usize) -> usize {
    (4 * degree).max(8).next_power_of_two()
}

/// Coefficients with the node count doubled from [`default_quad_points`]
/// until the doubling check passes; the bandwidth of `f`, not `N`, decides
/// how many nodes are needed.
pub fn resolved_coefficients<F>(f: &F, outputs: usize, dom: &FaberDomain, degree: usize) -> Result<(Vec<Coefficients>, usize)>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>> + Sync + Send,
{
    let mut q = default_quad_points(degree);
    loop {
        match faber_coefficients_multi(f, outputs, dom, degree, q) {
            Ok(c) => return Ok((c, q)),
            Err(Error::QuadratureUnresolved { .. }) if ((4 * q) as f64).powi(dom.dim() as i32) <= MAX_NODES as f64 => {
                q *= 2
            }
            Err(e) => return Err(e),
        }
    }
}

/// Truncated multivariate Faber series with its a-priori error bound.
/// Model coordinates map to the domain by `z_i = (x_i − c_i)/s_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSurrogate", into = "RawSurrogate")]
pub struct FaberSurrogate {
    pub domain: FaberDomain,
    pub degree: usize,
    pub coeffs: Coefficients,
    pub error_cert: f64,
    pub centers: Vec<f64>,
    pub scales: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSurrogate {
    domain: FaberDomain,
    #[serde(rename = "N")]
    degree: usize,
    /// `[n_1, …, n_m, value]`
    coeffs: Vec<Vec<f64>>,
    error_cert: f64,
    #[serde(default)]
    centers: Vec<f64>,
    #[serde(default)]
    scales: Vec<f64>,
}

impl From<FaberSurrogate> for RawSurrogate {
    fn from(s: FaberSurrogate) -> Self {
        let coeffs = s
            .coeffs
            .into_iter()
            .map(|(n, a)| n.into_iter().map(f64::from).chain(std::iter::once(a)).collect())
            .collect();
        Self { domain: s.domain, degree: s.degree, coeffs, error_cert: s.error_cert, centers: s.centers, scales: s.scales }
    }
}

impl TryFrom<RawSurrogate> for FaberSurrogate {
    type Error = Error;

    fn try_from(raw: RawSurrogate) -> Result<Self> {
        raw.domain.validate()?;
        let m = raw.domain.dim();
        let mut coeffs = Vec::with_capacity(raw.coeffs.len());
        for row in raw.coeffs {
            if row.len() != m + 1 {
                return Err(Error::Parse(format!("coefficient row has {} entries, expected {}", row.len(), m + 1)));
            }
            let n: Vec<u32> = row[..m].iter().map(|&k| k as u32).collect();
            if row[..m].iter().any(|&k| k < 0.0 || k.fract() != 0.0) {
                return Err(Error::Parse("multi-index entries must be nonnegative integers".into()));
            }
            if n.iter().sum::<u32>() as usize > raw.degree {
                return Err(Error::Parse(format!("multi-index {n:?} exceeds total degree {}", raw.degree)));
            }
            coeffs.push((n, row[m]));
        }
        let centers = if raw.centers.is_empty() { vec![0.0; m] } else { raw.centers };
        let scales = if raw.scales.is_empty() { vec![1.0; m] } else { raw.scales };
        if centers.len() != m || scales.len() != m || scales.iter().any(|s| *s == 0.0) {
            return Err(Error::Parse("centers/scales do not match the domain".into()));
        }
        Ok(Self { domain: raw.domain, degree: raw.degree, coeffs, error_cert: raw.error_cert, centers, scales })
    }
}

impl FaberSurrogate {
    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Value at a point `z` of the domain coordinates.
    pub fn eval_z<T: Scalar>(&self, z: &[T]) -> T {
        let tables: Vec<Vec<T>> =
            z.iter().enumerate().map(|(i, &zi)| faber_values(self.domain.half_lengths[i], zi, self.degree)).collect();
        let mut acc = T::zero();
        for (n, a) in &self.coeffs {
            let mut term = T::from_re(*a);
            for (i, &k) in n.iter().enumerate() {
                term = term * tables[i][k as usize];
            }
            acc += term;
        }
        acc
    }

    pub fn to_domain(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.centers.iter().zip(&self.scales)).map(|(x, (c, s))| (x - c) / s).collect()
    }

    /// Value at model coordinates.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_z(&self.to_domain(x))
    }

    /// Dense monomial coefficients `c[k_1, …, k_m]`, `k_i ≤ N`, last index fastest.
    pub fn monomial_tensor(&self) -> Result<Vec<f64>> {
        let m = self.dim();
        let side = self.degree + 1;
        let size = (side as f64).powi(m as i32);
        precondition(size <= MAX_COEFFICIENTS as f64, "monomial tensor too large")?;
        let polys: Vec<Vec<Vec<f64>>> = (0..m)
            .map(|i| (0..=self.degree).map(|n| faber_polynomial(self.domain.half_lengths[i], n)).collect())
            .collect::<Result<_>>()?;
        let mut tensor = vec![0.0; size as usize];
        for (n, a) in &self.coeffs {
            // expand a · Π_i Φ_{n_i} into the tensor
            let mut partial: Vec<(usize, f64)> = vec![(0, *a)];
            for (i, &k) in n.iter().enumerate() {
                let p = &polys[i][k as usize];
                let mut next = Vec::with_capacity(partial.len() * p.len());
                for &(idx, c) in &partial {
                    for (pow, pc) in p.iter().enumerate() {
                        if *pc != 0.0 {
                            next.push((idx * side + pow, c * pc));
                        }
                    }
                }
                partial = next;
            }
            for (idx, c) in partial {
                tensor[idx] += c;
            }
        }
        Ok(tensor)
    }

    /// Nested Horner evaluation of the monomial form; a second evaluation
    /// path, practical only for small degree.
    pub fn eval_horner(&self, z: &[f64]) -> Result<f64> {
        fn horner(t: &[f64], side: usize, z: &[f64]) -> f64 {
            if z.is_empty() {
                return t[0];
            }
            let block = t.len() / side;
            let mut acc = 0.0;
            for k in (0..side).rev() {
                acc = acc * z[0] + horner(&t[k * block..(k + 1) * block], side, &z[1..]);
            }
            acc
        }
        precondition(z.len() == self.dim(), "point has the wrong dimension")?;
        Ok(horner(&self.monomial_tensor()?, self.degree + 1, z))
    }

    /// `Σ |a_n| Π sup_{K_i} |Φ_{n_i}|`; an a-priori bound on the surrogate on the box.
    pub fn coefficient_mass(&self) -> f64 {
        self.coeffs.iter().map(|(n, a)| a.abs() * 2f64.powi(n.iter().filter(|&&k| k > 0).count() as i32)).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("surrogate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Largest `|f|` over the nodes of a `per_dim^m` grid on the torus `|t_i| = R`.
pub fn torus_sup<F>(f: &F, dom: &FaberDomain, per_dim: usize) -> Result<f64>
where
    F: Fn(&[Complex64]) -> Result<Complex64> + Sync + Send,
{
    let m = dom.dim();
    let total = per_dim.pow(m as u32);
    let vals = map_indexed(total, |flat| {
        let mut rest = flat;
        let mut z = vec![Complex64::new(0.0, 0.0); m];
        for i in (0..m).rev() {
            let w = Complex64::from_polar(dom.r, 2.0 * PI * (rest % per_dim) as f64 / per_dim as f64);
            z[i] = dom.inverse_map(i, w);
            rest /= per_dim;
        }
        Ok(f(&z)?.norm())
    })?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Truncated Faber series of total degree `N` with
/// `error_cert = (R′/R)^N Π ℓ(Γ_i)/d(K_i, Γ_i) · sup|f|`. The supremum over
/// the polydisc image is taken on a node grid of the distinguished boundary.
pub fn approximate_on_product<F>(f: F, dom: &FaberDomain, degree: usize) -> Result<FaberSurrogate>
where
    F: Fn(&[Complex64]) -> Result<Complex64> + Sync + Send,
{
    let (mut coeffs, q) = resolved_coefficients(&|z: &[Complex64]| Ok(vec![f(z)?]), 1, dom, degree)?;
    let coeffs = coeffs.pop().expect("one output");
    let sup = torus_sup(&f, dom, q.min(64))?;
    let m = dom.dim();
    Ok(FaberSurrogate {
        domain: dom.clone(),
        degree,
        coeffs,
        error_cert: dom.cert_factor(degree) * sup,
        centers: vec![0.0; m],
        scales: vec![1.0; m],
    })
}

/// Points of a uniform `per_dim^m` grid on `Π [lo_i, hi_i]`, endpoints included.
pub fn box_grid(lo: &[f64], hi: &[f64], per_dim: usize) -> Vec<Vec<f64>> {
    let m = lo.len();
    let per_dim = per_dim.max(2);
    (0..per_dim.pow(m as u32))
        .map(|flat| {
            let mut rest = flat;
            let mut x = vec![0.0; m];
            for i in (0..m).rev() {
                let k = rest % per_dim;
                rest /= per_dim;
                x[i] = if k + 1 == per_dim { hi[i] } else { lo[i] + (hi[i] - lo[i]) * k as f64 / (per_dim - 1) as f64 };
            }
            x
        })
        .collect()
}

/// `sup |f − s|` over a uniform grid on `Π K_i`, in domain coordinates.
pub fn sampled_sup_error<F>(f: F, s: &FaberSurrogate, per_dim: usize) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let hi = s.domain.half_lengths.clone();
    let lo: Vec<f64> = hi.iter().map(|l| -l).collect();
    box_grid(&lo, &hi, per_dim).iter().map(|z| (f(z) - s.eval_z(z)).abs()).fold(0.0, f64::max)
}

/// `C [(1 + max(|a|, |b|))(1 + |I|)(1 + T)]²`, rounded up.
pub fn degree_bound(interval: Interval, t_range: f64, c: f64) -> usize {
    let x = (1.0 + interval.a.abs().max(interval.b.abs())) * (1.0 + interval.len()) * (1.0 + t_range);
    (c * x * x).ceil() as usize
}

/// Which of `(θ, ω, E)` a transfer surrogate resolves; the others are frozen
/// at the given values. `omega` is also the centre of the ω window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateOptions {
    pub vary_theta: bool,
    pub vary_omega: bool,
    pub vary_energy: bool,
    pub theta: Vec<f64>,
    pub omega: Vec<f64>,
    pub energy: f64,
    /// Half-width of the ω window, mapped onto `[−1, 1]`.
    pub omega_halfwidth: f64,
    /// Ellipse level; by default the largest keeping `θ + tω` within 0.9ρ.
    pub r: Option<f64>,
    /// Nodes per variable; by default doubled from `max(4N, 8)` until the
    /// coefficients are resolved.
    pub quad_points: Option<usize>,
    pub samples_per_dim: usize,
    /// Allowed `sup |log‖M_I‖ − ½ log|P_I||`.
    pub budget: f64,
}

impl Default for SurrogateOptions {
    fn default() -> Self {
        Self {
            vary_theta: true,
            vary_omega: false,
            vary_energy: false,
            theta: vec![0.0],
            omega: vec![(5f64.sqrt() - 1.0) / 2.0],
            energy: 0.0,
            omega_halfwidth: 0.01,
            r: None,
            quad_points: None,
            samples_per_dim: 201,
            budget: 1.0,
        }
    }
}

/// Which model coordinate a surrogate variable stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variable {
    Theta(usize),
    Omega(usize),
    Energy,
}

/// Polynomial surrogates of the four entries of `M_I` and the combined
/// `P_I = Σ (entry surrogates)²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSurrogate {
    /// JSON description of the potential.
    pub potential: String,
    pub interval: Interval,
    pub t_range: f64,
    pub energy_window: (f64, f64),
    pub options: SurrogateOptions,
    pub variables: Vec<Variable>,
    /// Entries `M_00, M_01, M_10, M_11`.
    pub entries: Vec<FaberSurrogate>,
    /// Sampled `sup |log‖M_I‖ − ½ log|P_I||`; serves as `C₀`.
    pub deviation: f64,
    pub quad_points: usize,
}

impl TransferSurrogate {
    /// Model point `(θ, ω, E)` restricted to the active variables.
    fn active_point(&self, theta: &[f64], omega: &[f64], energy: f64) -> Vec<f64> {
        self.variables
            .iter()
            .map(|v| match *v {
                Variable::Theta(i) => theta[i],
                Variable::Omega(i) => omega[i],
                Variable::Energy => energy,
            })
            .collect()
    }

    /// `P_I(θ, ω, E)`.
    pub fn p_value(&self, theta: &[f64], omega: &[f64], energy: f64) -> f64 {
        let x = self.active_point(theta, omega, energy);
        self.entries.iter().map(|s| s.eval(&x).powi(2)).sum()
    }

    /// `½ log |P_I|`
    pub fn half_log_p(&self, theta: &[f64], omega: &[f64], energy: f64) -> f64 {
        0.5 * self.p_value(theta, omega, energy).abs().ln()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("surrogate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

struct VarMap {
    var: Variable,
    center: f64,
    scale: f64,
    half_length: f64,
    /// Real range sampled during certification, in model coordinates.
    sample: (f64, f64),
}

/// Builds entry surrogates of `M_I` of total degree `N` in the active
/// variables, with `L = 1 + T` for phases, `1` for frequencies (a window of
/// half-width `omega_halfwidth` about `omega`) and `max(|E′|, |E″|)` for the
/// energy, then certifies `|log‖M_I‖ − ½ log|P_I||` on a real sample grid.
#[allow(clippy::too_many_arguments)]
pub fn transfer_surrogate(
    p: &AnalyticPotential,
    interval: Interval,
    t_range: f64,
    energy_window: (f64, f64),
    degree: usize,
    opts: &SurrogateOptions,
    cfg: &IntegratorConfig,
) -> Result<TransferSurrogate> {
    let d = p.dim();
    precondition(opts.theta.len() == d && opts.omega.len() == d, "frozen θ/ω have the wrong dimension")?;
    precondition(t_range >= 0.0, "T must be nonnegative")?;
    precondition(energy_window.0 <= energy_window.1, "energy window is reversed")?;
    precondition(opts.vary_theta || opts.vary_omega || opts.vary_energy, "no variable is active")?;
    let mut maps = Vec::new();
    if opts.vary_theta {
        for i in 0..d {
            let l = 1.0 + t_range;
            maps.push(VarMap { var: Variable::Theta(i), center: 0.0, scale: 1.0, half_length: l, sample: (-l, l) });
        }
    }
    if opts.vary_omega {
        precondition(opts.omega_halfwidth > 0.0 && opts.omega_halfwidth <= 1.0, "ω half-width must lie in (0, 1]")?;
        for i in 0..d {
            let (c, h) = (opts.omega[i], opts.omega_halfwidth);
            maps.push(VarMap { var: Variable::Omega(i), center: c, scale: h, half_length: 1.0, sample: (c - h, c + h) });
        }
    }
    if opts.vary_energy {
        let l = energy_window.0.abs().max(energy_window.1.abs());
        precondition(l > 0.0, "energy window must not be {0}")?;
        maps.push(VarMap { var: Variable::Energy, center: 0.0, scale: 1.0, half_length: l, sample: energy_window });
    }
    // imaginary reach of θ + tω per unit of (R − 1/R)/2
    let reach: f64 = maps
        .iter()
        .map(|v| match v.var {
            Variable::Theta(_) => v.half_length,
            Variable::Omega(_) => v.half_length * v.scale * interval.a.abs().max(interval.b.abs()),
            Variable::Energy => 0.0,
        })
        .fold(0.0, f64::max)
        * if opts.vary_theta && opts.vary_omega { 2.0 } else { 1.0 };
    let r = match opts.r {
        Some(r) => r,
        None if reach > 0.0 => {
            let s = 2.0 * 0.9 * p.strip_rho() / reach;
            (s + (s * s + 4.0).sqrt()) / 2.0
        }
        None => 1.5,
    };
    let dom = FaberDomain::new(maps.iter().map(|v| v.half_length).collect(), r)?;

    let model = |z: &[Complex64]| {
        let mut theta: Vec<Complex64> = opts.theta.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut omega: Vec<Complex64> = opts.omega.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let mut energy = Complex64::new(opts.energy, 0.0);
        for (v, zi) in maps.iter().zip(z) {
            let x = zi * v.scale + v.center;
            match v.var {
                Variable::Theta(i) => theta[i] = x,
                Variable::Omega(i) => omega[i] = x,
                Variable::Energy => energy = x,
            }
        }
        (theta, omega, energy)
    };
    let f = |z: &[Complex64]| {
        let (theta, omega, energy) = model(z);
        let m = transfer_matrix_complex(p, interval, &theta, &omega, energy, cfg)?.to_matrix();
        Ok(vec![m[0][0], m[0][1], m[1][0], m[1][1]])
    };
    let (coeffs, q) = match opts.quad_points {
        Some(q) => (faber_coefficients_multi(&f, 4, &dom, degree, q)?, q),
        None => resolved_coefficients(&f, 4, &dom, degree)?,
    };
    let sups: Vec<f64> = (0..4)
        .map(|k| torus_sup(&|z: &[Complex64]| Ok(f(z)?[k]), &dom, q.min(64)))
        .collect::<Result<_>>()?;
    let entries: Vec<FaberSurrogate> = coeffs
        .into_iter()
        .zip(sups)
        .map(|(c, sup)| FaberSurrogate {
            domain: dom.clone(),
            degree,
            coeffs: c,
            error_cert: dom.cert_factor(degree) * sup,
            centers: maps.iter().map(|v| v.center).collect(),
            scales: maps.iter().map(|v| v.scale).collect(),
        })
        .collect();
    let mut sur = TransferSurrogate {
        potential: p.to_json(),
        interval,
        t_range,
        energy_window,
        options: opts.clone(),
        variables: maps.iter().map(|v| v.var).collect(),
        entries,
        deviation: 0.0,
        quad_points: q,
    };
    let lo: Vec<f64> = maps.iter().map(|v| v.sample.0).collect();
    let hi: Vec<f64> = maps.iter().map(|v| v.sample.1).collect();
    let points = box_grid(&lo, &hi, opts.samples_per_dim);
    let devs = map_indexed(points.len(), |k| {
        let x = &points[k];
        let mut theta = opts.theta.clone();
        let mut omega = opts.omega.clone();
        let mut energy = opts.energy;
        for (v, &xi) in maps.iter().zip(x) {
            match v.var {
                Variable::Theta(i) => theta[i] = xi,
                Variable::Omega(i) => omega[i] = xi,
                Variable::Energy => energy = xi,
            }
        }
        let direct = transfer_matrix_at(p, interval, &theta, &omega, energy, cfg)?.log_norm();
        Ok((direct - sur.half_log_p(&theta, &omega, energy)).abs())
    })?;
    let deviation = devs.into_iter().fold(0.0, |m: f64, x| if x.is_nan() { f64::INFINITY } else { m.max(x) });
    if deviation > opts.budget {
        return Err(Error::SurrogateInaccurate { deviation, budget: opts.budget });
    }
    sur.deviation = deviation;
    Ok(sur)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SublevelReport {
    /// Sampled measure of `S_I(H) = {θ : ½ log|P_I| ≤ |I| L − H + C₀}`.
    pub measure: f64,
    /// Sampled measure of `B_I(H) = {θ : log‖M_I‖ ≤ |I| L − H}`.
    pub measure_b: f64,
    pub c0: f64,
    /// Samples in `B_I(H)` but not in `S_I(H)`.
    pub lower_violations: usize,
    /// Samples in `S_I(H)` but not in `B_I(H/2)`.
    pub upper_violations: usize,
    pub samples: usize,
}

impl SublevelReport {
    pub fn sandwich_holds(&self) -> bool {
        self.lower_violations == 0 && self.upper_violations == 0
    }
}

/// Sampled measure of the θ-sublevel set of a phase-only surrogate at its
/// frozen `(ω, E)`, with the inclusions `B_I(H) ⊂ S_I(H) ⊂ B_I(H/2)` checked
/// against direct integration on every sample.
pub fn surrogate_sublevel_measure(
    s: &TransferSurrogate,
    h: f64,
    l_ref: f64,
    samples: usize,
    cfg: &IntegratorConfig,
) -> Result<SublevelReport> {
    precondition(
        s.variables.iter().all(|v| matches!(v, Variable::Theta(_))),
        "sublevel measurement needs a surrogate in the phase variables only",
    )?;
    precondition(samples > 0, "need at least one sample")?;
    let p = AnalyticPotential::from_json(&s.potential)?;
    let d = p.dim();
    let phases = halton_phases(samples, d, 0)?;
    let len = s.interval.len();
    let c0 = s.deviation;
    let flags = map_indexed(samples, |k| {
        let th = &phases[k];
        let direct = transfer_matrix_at(&p, s.interval, th, &s.options.omega, s.options.energy, cfg)?.log_norm();
        let sur = s.half_log_p(th, &s.options.omega, s.options.energy);
        let in_s = sur <= len * l_ref - h + c0;
        let in_b = direct <= len * l_ref - h;
        let in_b_half = direct <= len * l_ref - h / 2.0;
        Ok((in_s, in_b, in_b_half))
    })?;
    let n = samples as f64;
    Ok(SublevelReport {
        measure: flags.iter().filter(|f| f.0).count() as f64 / n,
        measure_b: flags.iter().filter(|f| f.1).count() as f64 / n,
        c0,
        lower_violations: flags.iter().filter(|f| f.1 && !f.0).count(),
        upper_violations: flags.iter().filter(|f| f.0 && !f.2).count(),
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitAverage {
    /// `(1/N) Σ_{n=1}^N log‖M_I(θ + nω)‖`
    pub average: f64,
    /// `L_I` from the phase lattice.
    pub lyapunov: f64,
    /// `|average − |I| L_I|`
    pub difference: f64,
}

/// Compares the orbit average of `log‖M_I‖` with `|I| L_I`. Fails with a
/// precondition error unless `ω ∈ DC_{|I|}` for `dc`.
#[allow(clippy::too_many_arguments)]
pub fn orbit_average_check(
    p: &AnalyticPotential,
    interval: Interval,
    theta: &[f64],
    omega: &[f64],
    energy: f64,
    n_shifts: u64,
    grid: &PhaseGrid,
    dc: &DiophantineSpec,
    cfg: &IntegratorConfig,
) -> Result<OrbitAverage> {
    precondition(n_shifts >= 1, "need at least one shift")?;
    let member = dc_membership(omega, dc, interval.len().max(1.0))?;
    precondition(member.ok, format!("ω fails the Diophantine condition at k = {:?}", member.worst_k))?;
    let norms = shifted_log_norms(p, interval, theta, omega, energy, 1, n_shifts, cfg)?;
    let average = pairwise_mean(&norms);
    let lyapunov = finite_lyapunov(p, interval, omega, energy, grid, &vec![0.0; p.dim()], cfg)?.value;
    Ok(OrbitAverage { average, lyapunov, difference: (average - interval.len() * lyapunov).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn low_order_polynomials() {
        assert_eq!(faber_polynomial(2.0, 0).unwrap(), vec![1.0]);
        assert_eq!(faber_polynomial(1.0, 2).unwrap(), vec![-2.0, 0.0, 4.0]);
        let p = faber_polynomial(3.0, 1).unwrap();
        assert_abs_diff_eq!(p[1], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(p[0], 0.0);
    }

    #[test]
    fn degree_and_leading_coefficient() {
        for l in [0.5, 1.0, 2.5] {
            for n in 1..=30 {
                let p = faber_polynomial(l, n).unwrap();
                assert_eq!(p.len(), n + 1);
                let lead = (2.0 / l).powi(n as i32);
                assert!(p[n] > 0.0);
                assert!((p[n] - lead).abs() <= 1e-12 * lead);
            }
        }
    }

    #[test]
    fn values_match_chebyshev() {
        let l = 2.0;
        for &z in &[-2.0, -0.7, 0.3, 1.9] {
            let v = faber_values(l, z, 12);
            let th = (z / l).acos();
            for (n, x) in v.iter().enumerate().skip(1) {
                assert_abs_diff_eq!(*x, 2.0 * (n as f64 * th).cos(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn identity_has_one_coefficient() {
        let l = 3.0;
        let dom = FaberDomain::new(vec![l], 2.0).unwrap();
        let a = faber_coefficients(|z| Ok(z[0]), &dom, 6, 32).unwrap();
        for (n, c) in a {
            let want = if n[0] == 1 { l / 2.0 } else { 0.0 };
            assert_abs_diff_eq!(c, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn biorthogonality() {
        let l = 1.5;
        let dom = FaberDomain::new(vec![l], 1.8).unwrap();
        for m in 0..=10 {
            let a = faber_coefficients(|z| Ok(faber_values(l, z[0], m)[m]), &dom, 12, 64).unwrap();
            for (n, c) in a {
                let want = if n[0] as usize == m { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(c, want, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn quad_points_must_cover_degree() {
        let dom = FaberDomain::new(vec![1.0], 2.0).unwrap();
        assert!(faber_coefficients(|z| Ok(z[0]), &dom, 10, 16).is_err());
        assert!(faber_coefficients(|z| Ok(z[0]), &dom, 4, 24).is_err());
    }

    #[test]
    fn unresolved_quadrature_detected() {
        // a pole just outside the contour makes the coarse rule inaccurate
        let dom = FaberDomain::new(vec![1.0], 1.02).unwrap();
        let r = faber_coefficients(|z| Ok((z[0] - Complex64::new(0.0, 0.0105)).inv()), &dom, 2, 8);
        assert!(matches!(r, Err(Error::QuadratureUnresolved { .. })));
    }

    #[test]
    fn constant_and_product_reproduced() {
        let dom = FaberDomain::new(vec![1.0, 2.0], 1.5).unwrap();
        let c = approximate_on_product(|_| Ok(Complex64::new(3.5, 0.0)), &dom, 4).unwrap();
        assert_eq!(sampled_sup_error(|_| 3.5, &c, 9), 0.0);
        let s = approximate_on_product(|z| Ok(z[0] * z[1]), &dom, 2).unwrap();
        assert!(sampled_sup_error(|z| z[0] * z[1], &s, 21) <= 1e-10);
    }

    #[test]
    fn horner_path_agrees() {
        let dom = FaberDomain::new(vec![1.0, 0.5], 1.6).unwrap();
        let s = approximate_on_product(|z| Ok((z[0] * 0.7 - z[1]).exp()), &dom, 8).unwrap();
        let mass = s.coefficient_mass();
        for z in box_grid(&[-1.0, -0.5], &[1.0, 0.5], 7) {
            let a = s.eval_z(&z);
            let b = s.eval_horner(&z).unwrap();
            assert!((a - b).abs() <= 1e-12 * mass, "{a} vs {b}");
        }
    }

    #[test]
    fn surrogate_json_round_trip() {
        let dom = FaberDomain::new(vec![1.0, 2.0], 1.5).unwrap();
        let s = approximate_on_product(|z| Ok((z[0] + z[1]).exp()), &dom, 5).unwrap();
        let back = FaberSurrogate::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        assert!(FaberSurrogate::from_json(r#"{"domain":{"half_lengths":[1.0],"R":2.0,"R_prime":1.5},"N":1,"coeffs":[[3,1.0]],"error_cert":0.0}"#).is_err());
    }

    #[test]
    fn ellipse_geometry() {
        let dom = FaberDomain::new(vec![2.0], 1.5).unwrap();
        let (a, b) = dom.semi_axes(0);
        let rp = 1.25;
        assert_abs_diff_eq!(a, rp + 1.0 / rp, epsilon = 1e-15);
        assert_abs_diff_eq!(b, rp - 1.0 / rp, epsilon = 1e-15);
        // distance from K to the ellipse is attained at the ends of the major axis
        assert_abs_diff_eq!(dom.ellipse_distance(0), a - 2.0, epsilon = 1e-14);
        assert!(FaberDomain::with_r_prime(vec![1.0], 1.5, 1.6).is_err());
    }

    #[test]
    fn multi_index_count() {
        assert_eq!(multi_indices(3, 4).len(), 35);
        assert_eq!(binomial(7, 3), 35.0);
        assert!(multi_indices(2, 3).iter().all(|n| n.iter().sum::<u32>() <= 3));
    }
}
