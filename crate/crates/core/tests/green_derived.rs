use quasiloc::green::{decay_window_search, localize_eigenfunction, GreenFunction};
use quasiloc::lyapunov::{finite_lyapunov, PhaseGrid};
use quasiloc::transfer::{transfer_matrix_at, Interval, IntegratorConfig};
use quasiloc::AnalyticPotential;

fn golden() -> Vec<f64> {
    vec![(5f64.sqrt() - 1.0) / 2.0]
}

fn lyap(p: &AnalyticPotential, len: f64, e: f64) -> f64 {
    let grid = PhaseGrid::new(64, 1).unwrap();
    finite_lyapunov(p, Interval::new(0.0, len).unwrap(), &golden(), e, &grid, &[0.0], &IntegratorConfig::default())
        .unwrap()
        .value
}

fn va_b(p: &AnalyticPotential, i: Interval, theta: f64, e: f64) -> f64 {
    transfer_matrix_at(p, i, &[theta], &golden(), e, &IntegratorConfig::default()).unwrap().unit()[0][1]
}

#[test]
fn cosine_decay_window_typical_phases() {
    let p = AnalyticPotential::cosine_model(3.0).unwrap();
    let i = Interval::new(0.0, 40.0).unwrap();
    let l = lyap(&p, 40.0, 0.0);
    let (k, gamma) = (8.0, 0.1);
    for theta in [0.1, 0.5] {
        let w = decay_window_search(&p, i, &[theta], &golden(), 0.0, l, k, gamma, &IntegratorConfig::default()).unwrap();
        assert!(i.len() - w.j.len() <= 4.0 * k / gamma + 1e-9);
        assert!(w.worst_margin <= 0.0);
        assert!((1..=4).contains(&w.case_id));
    }
}

#[test]
fn near_dirichlet_eigenvalue_shrinks_window() {
    let p = AnalyticPotential::cosine_model(3.0).unwrap();
    let i = Interval::new(0.0, 40.0).unwrap();
    // locate a sign change of v_a(b) in θ at E = 0, then bisect onto it
    let thetas: Vec<f64> = (0..=50).map(|k| k as f64 / 50.0).collect();
    let signs: Vec<f64> = thetas.iter().map(|&t| va_b(&p, i, t, 0.0).signum()).collect();
    let k = (0..50).find(|&k| signs[k] != signs[k + 1]).expect("no sign change in θ");
    let (mut lo, mut hi) = (thetas[k], thetas[k + 1]);
    let s_lo = signs[k];
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if va_b(&p, i, mid, 0.0).signum() == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l = lyap(&p, 40.0, 0.0);
    let (kb, gamma) = (8.0, 0.1);
    let w = decay_window_search(&p, i, &[lo], &golden(), 0.0, l, kb, gamma, &IntegratorConfig::default()).unwrap();
    assert_ne!(w.case_id, 1);
    assert!(w.j.len() < i.len());
    assert!(i.len() - w.j.len() <= 4.0 * kb / gamma + 1e-9);
    assert!(w.worst_margin <= 0.0);
}

#[test]
fn green_symmetric_and_vanishes_on_boundary() {
    let p = AnalyticPotential::cosine_model(2.0).unwrap();
    let i = Interval::new(0.0, 7.0).unwrap();
    let g = GreenFunction::new(&p, i, &[0.2], &golden(), 0.5, &IntegratorConfig::default()).unwrap();
    for &(s, t) in &[(0.3, 0.7), (1.1, 5.9), (2.5, 2.6)] {
        assert_eq!(g.eval(s, t).unwrap(), g.eval(t, s).unwrap());
    }
    assert_eq!(g.eval(0.0, 3.0).unwrap().value(), 0.0);
    assert_eq!(g.eval(3.0, 7.0).unwrap().value(), 0.0);
    assert!(g.wronskian_triple_residual().unwrap() <= 1e-7);
}

#[test]
fn localized_eigenfunction_decays_at_lyapunov_rate() {
    let p = AnalyticPotential::cosine_model(4.0).unwrap();
    let bx = Interval::new(-60.0, 60.0).unwrap();
    let loc = localize_eigenfunction(&p, bx, &[0.3], &golden(), (-3.9, -3.8), &IntegratorConfig::default()).unwrap();
    let l = lyap(&p, 120.0, loc.energy);
    assert!((loc.decay_rate - l).abs() <= 0.25 * l, "rate {} vs L {}", loc.decay_rate, l);
    assert!(loc.energy > -3.9 && loc.energy < -3.8);
}
