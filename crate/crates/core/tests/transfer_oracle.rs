use quasiloc::transfer::{integrate_transfer, transfer_matrix_at, Interval, IntegratorConfig};
use quasiloc::AnalyticPotential;

fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Classical fixed-step RK4 on `y'' = (V − E) y`, evaluating V directly.
fn rk4_oracle(p: &AnalyticPotential, a: f64, b: f64, theta: f64, omega: f64, e: f64, dt: f64) -> [[f64; 2]; 2] {
    let q = |t: f64| p.eval(t, &[theta + t * omega]) - e;
    let n = ((b - a) / dt).round() as usize;
    let h = (b - a) / n as f64;
    let f = |t: f64, y: [f64; 4]| {
        let qt = q(t);
        [y[1], qt * y[0], y[3], qt * y[2]]
    };
    let mut y = [1.0, 0.0, 0.0, 1.0];
    for i in 0..n {
        let t = a + i as f64 * h;
        let k1 = f(t, y);
        let y2: Vec<f64> = (0..4).map(|j| y[j] + 0.5 * h * k1[j]).collect();
        let k2 = f(t + 0.5 * h, [y2[0], y2[1], y2[2], y2[3]]);
        let y3: Vec<f64> = (0..4).map(|j| y[j] + 0.5 * h * k2[j]).collect();
        let k3 = f(t + 0.5 * h, [y3[0], y3[1], y3[2], y3[3]]);
        let y4: Vec<f64> = (0..4).map(|j| y[j] + h * k3[j]).collect();
        let k4 = f(t + h, [y4[0], y4[1], y4[2], y4[3]]);
        for j in 0..4 {
            y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
        }
    }
    [[y[0], y[2]], [y[1], y[3]]]
}

#[test]
fn cosine_model_matches_rk4() {
    let p = AnalyticPotential::cosine_model(2.0).unwrap();
    let cfg = IntegratorConfig::default();
    let sol = integrate_transfer(&p, Interval::new(0.0, 10.0).unwrap(), &[0.0], &[golden()], 0.0, &cfg).unwrap();
    let m = sol.matrix().to_matrix();
    let oracle = rk4_oracle(&p, 0.0, 10.0, 0.0, golden(), 0.0, 1e-4);
    let scale = oracle.iter().flatten().fold(0.0f64, |s, x| s.max(x.abs()));
    for i in 0..2 {
        for j in 0..2 {
            let rel = (m[i][j] - oracle[i][j]).abs() / scale;
            assert!(rel < 1e-6, "entry ({i},{j}): {} vs {} (rel {rel:e})", m[i][j], oracle[i][j]);
        }
    }
    assert!(sol.matrix().det_drift() <= 1e-8);
}

#[test]
fn determinant_stays_unimodular_over_long_intervals() {
    let p = AnalyticPotential::cosine_model(2.0).unwrap();
    let cfg = IntegratorConfig::default();
    let i = Interval::new(0.0, 200.0).unwrap();
    for &(theta, e) in &[(0.1, -4.0), (0.37, 0.0), (0.8, 3.0), (0.55, 12.0)] {
        let m = transfer_matrix_at(&p, i, &[theta], &[golden()], e, &cfg).unwrap();
        assert!(m.det_drift() <= 1e-8, "θ={theta} E={e}: drift {:e}", m.det_drift());
    }
    let free = transfer_matrix_at(&AnalyticPotential::zero(1), i, &[0.0], &[golden()], -4.0, &cfg).unwrap();
    assert!(free.det_drift() <= 1e-8, "free drift {:e}", free.det_drift());
    assert!((free.log_norm() - 400.0 - 1.25f64.ln()).abs() < 1e-7);
}

#[test]
fn almost_invariance_under_phase_shift() {
    let p = AnalyticPotential::cosine_model(2.0).unwrap();
    let cfg = IntegratorConfig::default();
    let i = Interval::new(0.0, 30.0).unwrap();
    for k in 0..8 {
        let theta = (k as f64 * 0.754877666).fract();
        let sol = integrate_transfer(&p, i, &[theta], &[golden()], -1.0, &cfg).unwrap();
        let shifted =
            transfer_matrix_at(&p, i, &[(theta + golden()).fract()], &[golden()], -1.0, &cfg).unwrap();
        let gap = (sol.matrix().log_norm() - shifted.log_norm()).abs();
        assert!(gap <= sol.gronwall_constant(), "gap {gap} vs C_num {}", sol.gronwall_constant());
    }
}

#[test]
fn unit_block_far_from_origin() {
    // a solution component crosses zero inside this block
    let p = AnalyticPotential::cosine_model(3.0).unwrap();
    let cfg = IntegratorConfig::default();
    let i = Interval::new(4134.0, 4135.0).unwrap();
    let m = transfer_matrix_at(&p, i, &[0.0], &[golden()], 0.0, &cfg).unwrap();
    let direct = rk4_oracle(&p, 4134.0, 4135.0, 0.0, golden(), 0.0, 1e-4);
    let got = m.to_matrix();
    for r in 0..2 {
        for c in 0..2 {
            assert!((got[r][c] - direct[r][c]).abs() < 1e-7);
        }
    }
    assert!(m.det_drift() < 1e-10);
}
