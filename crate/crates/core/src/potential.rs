//! Analytic quasiperiodic potentials `V(t, x)` on `T × T^d`, stored as finite
//! trigonometric polynomials.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::scalar::Scalar;

/// Fourier index `(m, k)` of the mode `e^{2πi(mt + k·x)}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mode {
    pub m: i64,
    pub k: Vec<i64>,
}

impl Mode {
    pub fn new(m: i64, k: Vec<i64>) -> Self {
        Self { m, k }
    }

    fn conjugate(&self) -> Self {
        Self { m: -self.m, k: self.k.iter().map(|k| -k).collect() }
    }

    fn is_zero(&self) -> bool {
        self.m == 0 && self.k.iter().all(|&k| k == 0)
    }

    /// `|m| + |k|_1`
    pub fn weight(&self) -> i64 {
        self.m.abs() + self.k.iter().map(|k| k.abs()).sum::<i64>()
    }
}

/// Real trigonometric polynomial `V(t, x) = Σ v̂(m,k) e^{2πi(mt + k·x)}`.
///
/// Coefficients are kept in lexicographic order of `(m, k)`; every summation
/// walks them in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticPotential {
    dim: usize,
    strip_rho: f64,
    coeffs: BTreeMap<Mode, Complex64>,
}

const SYMMETRY_TOL: f64 = 1e-12;

impl AnalyticPotential {
    /// Builds a potential, checking conjugate symmetry `v̂(-m,-k) = conj v̂(m,k)`.
    pub fn new(dim: usize, strip_rho: f64, coeffs: BTreeMap<Mode, Complex64>) -> Result<Self> {
        precondition(dim >= 1, "phase dimension d must be positive")?;
        precondition(strip_rho > 0.0 && strip_rho.is_finite(), "strip width rho must be positive")?;
        let mass: f64 = coeffs.values().map(|c| c.norm()).sum();
        for (mode, amp) in &coeffs {
            if mode.k.len() != dim {
                return Err(Error::Parse(format!(
                    "mode ({}, {:?}) has {} phase indices, expected {dim}",
                    mode.m,
                    mode.k,
                    mode.k.len()
                )));
            }
            if !amp.re.is_finite() || !amp.im.is_finite() {
                return Err(Error::Parse(format!("non-finite amplitude at ({}, {:?})", mode.m, mode.k)));
            }
            let partner = coeffs.get(&mode.conjugate()).copied().unwrap_or_default();
            if (partner - amp.conj()).norm() > SYMMETRY_TOL * mass.max(1.0) {
                return Err(Error::Parse(format!(
                    "coefficients are not conjugate symmetric at ({}, {:?})",
                    mode.m, mode.k
                )));
            }
        }
        Ok(Self { dim, strip_rho, coeffs })
    }

    /// `V ≡ 0` on `T × T^d`.
    pub fn zero(dim: usize) -> Self {
        Self { dim: dim.max(1), strip_rho: 1.0 / TAU, coeffs: BTreeMap::new() }
    }

    /// `K²(cos 2πt + cos 2πx)` with `d = 1` and strip width `1/(2π)`.
    pub fn cosine_model(coupling: f64) -> Result<Self> {
        Self::cosine_model_with_strip(coupling, 1.0 / TAU)
    }

    pub fn cosine_model_with_strip(coupling: f64, strip_rho: f64) -> Result<Self> {
        precondition(coupling > 0.0 && coupling.is_finite(), "cosine coupling K must be positive")?;
        let half = Complex64::new(coupling * coupling / 2.0, 0.0);
        let coeffs = [(1, 0), (-1, 0), (0, 1), (0, -1)]
            .into_iter()
            .map(|(m, k)| (Mode::new(m, vec![k]), half))
            .collect();
        Self::new(1, strip_rho, coeffs)
    }

    /// Parses either a named preset (`cosine:K`, `zero`, `zero:d`) or a JSON
    /// description `{"d": .., "rho": .., "coeffs": [[m, [k..], re, im], ..]}`.
    pub fn from_preset(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if let Some(k) = spec.strip_prefix("cosine:") {
            let k: f64 = k.parse().map_err(|_| Error::Parse(format!("bad coupling in `{spec}`")))?;
            return Self::cosine_model(k);
        }
        if spec == "zero" {
            return Ok(Self::zero(1));
        }
        if let Some(d) = spec.strip_prefix("zero:") {
            let d: usize = d.parse().map_err(|_| Error::Parse(format!("bad dimension in `{spec}`")))?;
            return Ok(Self::zero(d));
        }
        Self::from_json(spec)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let desc: PotentialDescription =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        desc.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&PotentialDescription::from(self)).expect("potential serializes")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn strip_rho(&self) -> f64 {
        self.strip_rho
    }

    pub fn with_strip(mut self, strip_rho: f64) -> Result<Self> {
        precondition(strip_rho > 0.0, "strip width rho must be positive")?;
        self.strip_rho = strip_rho;
        Ok(self)
    }

    pub fn coeffs(&self) -> &BTreeMap<Mode, Complex64> {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.values().all(|c| *c == Complex64::default())
    }

    /// `Σ |v̂|`
    pub fn coefficient_mass(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// `sup_{H_ρ^{d+1}} |V| ≤ Σ |v̂(m,k)| e^{2πρ(|m|+|k|_1)}`.
    pub fn strip_sup_bound(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|(mode, c)| c.norm() * (TAU * self.strip_rho * mode.weight() as f64).exp())
            .sum()
    }

    /// Sup of `|V|` over real arguments is bounded by the coefficient mass.
    pub fn real_sup_bound(&self) -> f64 {
        self.coefficient_mass()
    }

    /// `V(t, x)` for real arguments.
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "phase vector has wrong dimension");
        let xc: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.sum_modes(Complex64::new(t, 0.0), &xc).re
    }

    /// Analytic continuation of `V` to `|Im t|, |Im x_j| ≤ ρ`.
    pub fn eval_complex(&self, t: Complex64, x: &[Complex64]) -> Result<Complex64> {
        precondition(x.len() == self.dim, "phase vector has wrong dimension")?;
        let worst = x.iter().map(|z| z.im.abs()).fold(t.im.abs(), f64::max);
        if worst > self.strip_rho {
            return Err(Error::Domain(format!(
                "imaginary part {worst} exceeds strip width {}",
                self.strip_rho
            )));
        }
        Ok(self.sum_modes(t, x))
    }

    fn sum_modes(&self, t: Complex64, x: &[Complex64]) -> Complex64 {
        let reduce = |z: Complex64| Complex64::new(z.re - z.re.floor(), z.im);
        let t = reduce(t);
        let x: Vec<Complex64> = x.iter().map(|&z| reduce(z)).collect();
        let mut acc = Complex64::default();
        for (mode, amp) in &self.coeffs {
            let mut phase = t * mode.m as f64;
            for (k, xj) in mode.k.iter().zip(&x) {
                phase += *xj * *k as f64;
            }
            let phase = reduce(phase);
            let damp = (-TAU * phase.im).exp();
            let (s, c) = (TAU * phase.re).sin_cos();
            acc += amp * Complex64::new(c * damp, s * damp);
        }
        acc
    }

    /// The scalar coefficient `q(t) = V(t, θ + tω) − E` of `y'' = q y`.
    pub fn along_line<T: Scalar>(&self, theta: &[T], omega: &[T], energy: T) -> Result<LineCoupling<T>> {
        precondition(theta.len() == self.dim, "theta has wrong dimension")?;
        precondition(omega.len() == self.dim, "omega has wrong dimension")?;
        let mut modes = Vec::with_capacity(self.coeffs.len());
        for (mode, amp) in &self.coeffs {
            let mut c0 = T::zero();
            let mut c1 = T::from_re(mode.m as f64);
            for ((k, th), om) in mode.k.iter().zip(theta).zip(omega) {
                let k = *k as f64;
                c0 += th.scale(k);
                c1 += om.scale(k);
            }
            if T::IS_REAL {
                // fold each conjugate pair into twice the real part of one member
                let partner = mode.conjugate();
                if mode.is_zero() {
                    modes.push(LineMode { amp: *amp, c0, c1 });
                } else if *mode > partner {
                    modes.push(LineMode { amp: amp * 2.0, c0, c1 });
                } else if !self.coeffs.contains_key(&partner) {
                    modes.push(LineMode { amp: *amp, c0, c1 });
                }
            } else {
                modes.push(LineMode { amp: *amp, c0, c1 });
            }
        }
        let imag_theta = theta.iter().map(|z| z.im().abs()).fold(0.0, f64::max);
        let imag_omega = omega.iter().map(|z| z.im().abs()).fold(0.0, f64::max);
        Ok(LineCoupling {
            modes,
            energy,
            imag_theta,
            imag_omega,
            strip_rho: self.strip_rho,
            mass: self.coefficient_mass(),
            strip_bound: self.strip_sup_bound(),
        })
    }
}

#[derive(Debug, Clone, Copy)]
struct LineMode<T> {
    amp: Complex64,
    c0: T,
    c1: T,
}

/// `q(t) = V(t, θ + tω) − E` restricted to a line through the torus.
#[derive(Debug, Clone)]
pub struct LineCoupling<T> {
    modes: Vec<LineMode<T>>,
    energy: T,
    imag_theta: f64,
    imag_omega: f64,
    strip_rho: f64,
    mass: f64,
    strip_bound: f64,
}

impl<T: Scalar> LineCoupling<T> {
    #[inline]
    pub fn q(&self, t: f64) -> T {
        let mut v = T::zero();
        for m in &self.modes {
            v += T::fourier_mode(m.amp, m.c0, m.c1, t);
        }
        v - self.energy
    }

    pub fn energy(&self) -> T {
        self.energy
    }

    /// Fails if `θ + tω` leaves the strip for some `t` in `[a, b]`.
    pub fn check_strip(&self, a: f64, b: f64) -> Result<()> {
        let reach = self.imag_theta + a.abs().max(b.abs()) * self.imag_omega;
        if reach > self.strip_rho * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "|Im(θ + tω)| reaches {reach} on [{a}, {b}], strip width is {}",
                self.strip_rho
            )));
        }
        Ok(())
    }

    /// A-priori bound on `|V|` along the line: the coefficient mass for real
    /// parameters, the strip bound otherwise.
    pub fn potential_bound(&self) -> f64 {
        if self.imag_theta == 0.0 && self.imag_omega == 0.0 {
            self.mass
        } else {
            self.strip_bound
        }
    }
}

/// On-disk description of a potential.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialDescription {
    pub d: usize,
    pub rho: f64,
    pub coeffs: Vec<(i64, Vec<i64>, f64, f64)>,
}

impl From<&AnalyticPotential> for PotentialDescription {
    fn from(p: &AnalyticPotential) -> Self {
        Self {
            d: p.dim,
            rho: p.strip_rho,
            coeffs: p.coeffs.iter().map(|(m, c)| (m.m, m.k.clone(), c.re, c.im)).collect(),
        }
    }
}

impl TryFrom<PotentialDescription> for AnalyticPotential {
    type Error = Error;

    fn try_from(desc: PotentialDescription) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (m, k, re, im) in desc.coeffs {
            *coeffs.entry(Mode::new(m, k)).or_insert_with(Complex64::default) += Complex64::new(re, im);
        }
        AnalyticPotential::new(desc.d, desc.rho, coeffs)
    }
}

/// `ρ = 1/(2π)`: the strip width used when none is given.
pub const DEFAULT_STRIP: f64 = 0.5 / PI;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn zero_potential_vanishes() {
        let p = AnalyticPotential::zero(1);
        assert_eq!(p.eval(0.3, &[0.7]), 0.0);
        let z = p.eval_complex(Complex64::new(0.1, 0.05), &[Complex64::new(0.4, -0.1)]).unwrap();
        assert_eq!(z, Complex64::default());
    }

    #[test]
    fn cosine_values() {
        let p = AnalyticPotential::cosine_model(1.0).unwrap();
        assert_abs_diff_eq!(p.eval(0.0, &[0.0]), 2.0, epsilon = 1e-15);
        let p = AnalyticPotential::cosine_model(2.0).unwrap();
        assert_abs_diff_eq!(p.eval(0.25, &[0.5]), -4.0, epsilon = 1e-14);
    }

    #[test]
    fn cosine_coefficients() {
        let p = AnalyticPotential::cosine_model(1.0).unwrap();
        assert_eq!(p.coeffs().len(), 4);
        for (m, k) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            assert_eq!(p.coeffs()[&Mode::new(m, vec![k])], Complex64::new(0.5, 0.0));
        }
        let p = AnalyticPotential::cosine_model(4.0).unwrap();
        assert!(p.coeffs().values().all(|c| *c == Complex64::new(8.0, 0.0)));
        assert!(AnalyticPotential::cosine_model(0.0).is_err());
    }

    #[test]
    fn complex_extension_and_strip() {
        let p = AnalyticPotential::cosine_model(1.0).unwrap();
        let eta = 0.1;
        let z = p.eval_complex(Complex64::new(0.0, 0.0), &[Complex64::new(0.0, eta)]).unwrap();
        assert_abs_diff_eq!(z.re, 1.0 + (TAU * eta).cosh(), epsilon = 1e-14);
        assert_abs_diff_eq!(z.im, 0.0, epsilon = 1e-14);
        let outside = p.eval_complex(Complex64::new(0.0, 0.0), &[Complex64::new(0.0, p.strip_rho() * 1.01)]);
        assert!(matches!(outside, Err(Error::Domain(_))));
    }

    #[test]
    fn strip_bound_matches_formula() {
        let p = AnalyticPotential::cosine_model(2.0).unwrap();
        let rho = p.strip_rho();
        assert_abs_diff_eq!(p.strip_sup_bound(), 4.0 * 2.0 * (TAU * rho).exp(), epsilon = 1e-12);
    }

    #[test]
    fn asymmetric_coefficients_rejected() {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(Mode::new(1, vec![0]), Complex64::new(1.0, 0.0));
        assert!(matches!(AnalyticPotential::new(1, 0.1, coeffs), Err(Error::Parse(_))));
    }

    #[test]
    fn json_round_trip_and_presets() {
        let p = AnalyticPotential::cosine_model(3.0).unwrap();
        let q = AnalyticPotential::from_preset(&p.to_json()).unwrap();
        assert_eq!(p, q);
        assert_eq!(AnalyticPotential::from_preset("cosine:3").unwrap(), p);
        let text = r#"{"d": 2, "rho": 0.2, "coeffs": [[0, [1, 0], 0.5, 0.0], [0, [-1, 0], 0.5, 0.0]]}"#;
        let p2 = AnalyticPotential::from_json(text).unwrap();
        assert_eq!(p2.dim(), 2);
        assert_abs_diff_eq!(p2.eval(0.0, &[0.0, 0.3]), 1.0, epsilon = 1e-15);
        assert!(AnalyticPotential::from_preset("cosine:x").is_err());
    }

    #[test]
    fn line_coupling_matches_direct_evaluation() {
        let p = AnalyticPotential::cosine_model(2.0).unwrap();
        let omega = (5f64.sqrt() - 1.0) / 2.0;
        let theta = 0.3;
        let line = p.along_line(&[theta], &[omega], 0.7).unwrap();
        for i in 0..50 {
            let t = i as f64 * 0.37 - 5.0;
            let direct = p.eval(t, &[theta + t * omega]) - 0.7;
            assert_abs_diff_eq!(line.q(t), direct, epsilon = 1e-12);
            let lc = p
                .along_line(&[Complex64::new(theta, 0.0)], &[Complex64::new(omega, 0.0)], Complex64::new(0.7, 0.0))
                .unwrap();
            assert_abs_diff_eq!(lc.q(t).re, direct, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn real_arguments_give_real_values(t in -10.0..10.0f64, x in -10.0..10.0f64, k in 0.1..5.0f64) {
            let p = AnalyticPotential::cosine_model(k).unwrap();
            let z = p.eval_complex(Complex64::new(t, 0.0), &[Complex64::new(x, 0.0)]).unwrap();
            prop_assert!(z.im.abs() < 1e-12 * p.coefficient_mass());
            prop_assert_eq!(z.re, p.eval(t, &[x]));
        }

        #[test]
        fn periodicity_is_bitwise(ti in -64i32..64, xi in -64i32..64, k in 0.1..5.0f64) {
            // dyadic arguments keep t + 1 exactly representable
            let t = ti as f64 / 64.0;
            let x = xi as f64 / 64.0;
            let p = AnalyticPotential::cosine_model(k).unwrap();
            prop_assert_eq!(p.eval(t + 1.0, &[x]).to_bits(), p.eval(t, &[x]).to_bits());
            prop_assert_eq!(p.eval(t, &[x + 1.0]).to_bits(), p.eval(t, &[x]).to_bits());
        }
    }
}
