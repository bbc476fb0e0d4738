use num_complex::Complex64;
use proptest::prelude::*;
use quasiloc::arithmetic::DiophantineSpec;
use quasiloc::faber::*;
use quasiloc::lyapunov::PhaseGrid;
use quasiloc::transfer::{Interval, IntegratorConfig};
use quasiloc::{AnalyticPotential, Error};
use std::f64::consts::PI;

fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Monomial coefficients of `Φ_n` from the contour integral over `Γ_{K,R}`:
/// `c_k = (1/2πi) ∮ w^n ζ(w)^{−k−1} ζ'(w) dw`, `ζ(w) = (L/2)(w + 1/w)`.
fn contour_faber(l: f64, n: usize, r: f64, nodes: usize) -> Vec<f64> {
    (0..=n + 2)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..nodes {
                let w = Complex64::from_polar(r, 2.0 * PI * j as f64 / nodes as f64);
                let zeta = (w + w.inv()) * (l / 2.0);
                let dzeta = (Complex64::new(1.0, 0.0) - (w * w).inv()) * (l / 2.0);
                // dw = i w dφ, and 1/(2πi) · i · 2π/nodes = 1/nodes
                acc += w.powu(n as u32) * zeta.powi(-(k as i32) - 1) * dzeta * w;
            }
            (acc / nodes as f64).re
        })
        .collect()
}

#[test]
fn recurrence_matches_contour_oracle() {
    for (l, n) in [(1.0, 2usize), (3.0, 1), (2.0, 5), (0.5, 7)] {
        let rec = faber_polynomial(l, n).unwrap();
        let oracle = contour_faber(l, n, 2.0, 4096);
        for k in 0..oracle.len() {
            let r = rec.get(k).copied().unwrap_or(0.0);
            let scale = rec.iter().fold(1.0f64, |m, c| m.max(c.abs()));
            assert!((r - oracle[k]).abs() <= 1e-10 * scale, "L={l} n={n} k={k}: {r} vs {}", oracle[k]);
        }
    }
}

#[test]
fn exp_partial_sums_converge() {
    let dom = FaberDomain::new(vec![1.0], 2.0).unwrap();
    let a = faber_coefficients(|z| Ok(z[0].exp()), &dom, 20, 128).unwrap();
    let grid: Vec<f64> = (0..=200).map(|k| -1.0 + k as f64 / 100.0).collect();
    let mut errs = Vec::new();
    for n in 0..=12 {
        let s = FaberSurrogate {
            domain: dom.clone(),
            degree: n,
            coeffs: a.iter().filter(|(m, _)| m[0] as usize <= n).cloned().collect(),
            error_cert: 0.0,
            centers: vec![0.0],
            scales: vec![1.0],
        };
        errs.push(grid.iter().map(|&z| (z.exp() - s.eval_z(&[z])).abs()).fold(0.0, f64::max));
    }
    // each term shrinks the error at least as fast as the 1/R geometric rate
    for w in errs.windows(2) {
        assert!(w[1] <= w[0] / dom.r, "{errs:?}");
    }
    assert!(errs[12] < 1e-12);
}

#[test]
fn product_error_within_certificate() {
    let dom = FaberDomain::new(vec![1.0, 1.0], 1.5).unwrap();
    let s = approximate_on_product(|z| Ok((z[0] + z[1]).exp()), &dom, 24).unwrap();
    let observed = sampled_sup_error(|z| (z[0] + z[1]).exp(), &s, 61);
    assert!(observed <= s.error_cert, "{observed} > {}", s.error_cert);
}

/// The certificate is the Bernstein–Walsh bound with C(m) = 1. For an entire
/// function the true truncation error decays factorially, so at N = 24 the
/// observed error sits at round-off while the bound is of order 10³.
#[test]
#[ignore = "unattainable: certificate exceeds the round-off level error by ~10^19"]
fn product_certificate_is_tight() {
    let dom = FaberDomain::new(vec![1.0, 1.0], 1.5).unwrap();
    let s = approximate_on_product(|z| Ok((z[0] + z[1]).exp()), &dom, 24).unwrap();
    let observed = sampled_sup_error(|z| (z[0] + z[1]).exp(), &s, 61);
    assert!(s.error_cert <= 1e4 * observed);
}

#[test]
fn free_particle_energy_surrogate() {
    let p = AnalyticPotential::zero(1);
    let opts = SurrogateOptions { vary_theta: false, vary_energy: true, ..Default::default() };
    let s = transfer_surrogate(&p, Interval::new(0.0, 2.0).unwrap(), 0.0, (-4.0, -1.0), 16, &opts, &IntegratorConfig::default())
        .unwrap();
    assert!(s.deviation <= 0.05, "{}", s.deviation);
}

#[test]
fn cosine_surrogate_at_scaled_degree() {
    let p = AnalyticPotential::cosine_model(2.0).unwrap();
    let i = Interval::new(0.0, 6.0).unwrap();
    let n = degree_bound(i, 1.0, 1.0 / 128.0);
    let s = transfer_surrogate(&p, i, 1.0, (0.0, 0.0), n, &SurrogateOptions::default(), &IntegratorConfig::default())
        .unwrap();
    assert!(s.deviation <= 1.0);
    let back = TransferSurrogate::from_json(&s.to_json()).unwrap();
    assert_eq!(back, s);
    let r = transfer_surrogate(&p, i, 1.0, (0.0, 0.0), 0, &SurrogateOptions::default(), &IntegratorConfig::default());
    assert!(matches!(r, Err(Error::SurrogateInaccurate { .. })));
}

#[test]
fn sublevel_sandwich_cosine_k3() {
    let p = AnalyticPotential::cosine_model(3.0).unwrap();
    let i = Interval::new(0.0, 4.0).unwrap();
    let cfg = IntegratorConfig::default();
    let n = degree_bound(i, 1.0, 1.0 / 64.0);
    let s = transfer_surrogate(&p, i, 1.0, (0.0, 0.0), n, &SurrogateOptions::default(), &cfg).unwrap();
    let l = quasiloc::lyapunov::finite_lyapunov(&p, i, &[golden()], 0.0, &PhaseGrid::new(64, 1).unwrap(), &[0.0], &cfg)
        .unwrap()
        .value;
    let h = i.len().powf(0.75);
    let r = surrogate_sublevel_measure(&s, h, l, 10_000, &cfg).unwrap();
    assert!(r.sandwich_holds(), "{r:?}");
    assert!(r.measure >= r.measure_b);
    let empty = surrogate_sublevel_measure(&s, 1e3, l, 200, &cfg).unwrap();
    assert_eq!(empty.measure, 0.0);
    let full = surrogate_sublevel_measure(&s, -1e3, l, 200, &cfg).unwrap();
    assert_eq!(full.measure, 1.0);
}

#[test]
fn orbit_average_free_particle_exact() {
    let p = AnalyticPotential::zero(1);
    let dc = DiophantineSpec::new(0.2, 2.0, 1).unwrap();
    let r = orbit_average_check(&p, Interval::new(0.0, 10.0).unwrap(), &[0.3], &[golden()], -1.0, 50, &PhaseGrid::new(4, 1).unwrap(), &dc, &IntegratorConfig::default())
        .unwrap();
    assert!(r.difference <= 1e-6);
}

#[test]
fn orbit_average_two_scale_calibration() {
    let p = AnalyticPotential::cosine_model(3.0).unwrap();
    let dc = DiophantineSpec::new(0.2, 2.0, 1).unwrap();
    let cfg = IntegratorConfig::default();
    let grid = PhaseGrid::new(128, 1).unwrap();
    let at = |len: f64| {
        orbit_average_check(&p, Interval::new(0.0, len).unwrap(), &[0.1], &[golden()], 0.0, 200, &grid, &dc, &cfg).unwrap()
    };
    let sigma = 0.25;
    let c_fit = at(10.0).difference / 10f64.powf(1.0 - sigma);
    let r20 = at(20.0);
    assert!(r20.difference <= c_fit * 20f64.powf(1.0 - sigma), "{} vs C_fit {c_fit}", r20.difference);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn observed_error_never_exceeds_certificate(a in -1.5f64..1.5, b in -1.5f64..1.5, n in 2usize..14) {
        let dom = FaberDomain::new(vec![1.0, 0.8], 1.6).unwrap();
        let s = approximate_on_product(|z| Ok((z[0] * a + z[1] * b).exp()), &dom, n).unwrap();
        let observed = sampled_sup_error(|z| (z[0] * a + z[1] * b).exp(), &s, 25);
        prop_assert!(observed <= s.error_cert);
    }

    #[test]
    fn two_evaluation_paths_agree(a in -1.0f64..1.0, b in -1.0f64..1.0, x in -1.0f64..1.0, y in -2.0f64..2.0) {
        let dom = FaberDomain::new(vec![1.0, 2.0], 1.7).unwrap();
        let s = approximate_on_product(|z| Ok((z[0] * a).sin() + (z[1] * b).cos() * z[0]), &dom, 7).unwrap();
        let v = s.eval_z(&[x, y]);
        let h = s.eval_horner(&[x, y]).unwrap();
        prop_assert!((v - h).abs() <= 1e-12 * s.coefficient_mass().max(1.0));
    }
}
