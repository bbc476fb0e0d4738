use proptest::prelude::*;
use quasiloc::arithmetic::*;
use quasiloc::lyapunov::{ldt_sample, LdtParams};
use quasiloc::transfer::{transfer_matrix_at, Interval, IntegratorConfig};
use quasiloc::AnalyticPotential;

fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

#[test]
fn golden_discrepancy_is_logarithmic() {
    let anchors: Vec<f64> = (1..64).map(|k| k as f64 / 64.0).collect();
    let (ratio, at) = discrepancy_log_ratio(golden(), 100_000, &anchors);
    assert!(ratio <= 3.0, "error/log N = {ratio} at N = {at}");
    for n in [10u64, 100, 1000, 10_000, 100_000] {
        assert!(star_discrepancy(golden(), n) <= 3.0 * (n as f64).ln());
    }
}

#[test]
fn half_box_count_within_calibrated_bound() {
    let half = UnitBox::new(vec![0.0], vec![0.5]).unwrap();
    let c_fit = calibrate_discrepancy_constant(&[golden()], 2.0, 200, &half).unwrap();
    let (count, err) = discrepancy_count(&[golden()], 1000, &half).unwrap();
    let direct = (1..=1000u64).filter(|&n| (n as f64 * golden()).fract() < 0.5).count() as u64;
    assert_eq!(count, direct);
    assert!(err <= c_fit * 1000f64.sqrt() * 1000f64.ln().powi(2));
}

#[test]
fn shifted_norms_match_direct_integration() {
    let p = AnalyticPotential::cosine_model(3.0).unwrap();
    let i = Interval::new(0.0, 8.0).unwrap();
    let cfg = IntegratorConfig::default();
    let via_blocks = shifted_log_norms(&p, i, &[0.2], &[golden()], 0.0, 1, 12, &cfg).unwrap();
    for (k, v) in via_blocks.iter().enumerate() {
        let n = 1 + k as u64;
        let th = orbit_point(0.2, golden(), n);
        let direct = transfer_matrix_at(&p, i, &[th], &[golden()], 0.0, &cfg).unwrap().log_norm();
        assert!((v - direct).abs() < 1e-6, "n={n}: {v} vs {direct}");
    }
    let frac = Interval::new(0.0, 7.5).unwrap();
    let direct = shifted_log_norms(&p, frac, &[0.2], &[golden()], 0.0, 3, 4, &cfg).unwrap();
    assert_eq!(direct.len(), 2);
}

#[test]
fn ldt_deviation_set_is_rarely_visited() {
    let p = AnalyticPotential::cosine_model(3.0).unwrap();
    let i = Interval::new(0.0, 20.0).unwrap();
    let cfg = IntegratorConfig::default();
    let params = LdtParams { epsilon: 0.5, sigma: 0.25, sample_count: 1000, seed: 7 };
    let s = ldt_sample(&p, i, &[golden()], 0.0, &params, &cfg).unwrap();
    let n = 10_000u64;
    let norms = shifted_log_norms(&p, i, &[0.0], &[golden()], 0.0, 1, n, &cfg).unwrap();
    let centre = i.len() * s.lyapunov;
    let r = orbit_hit_count(&[golden()], &[0.0], n, |k, _| (norms[(k - 1) as usize] - centre).abs() >= s.threshold, 0.1)
        .unwrap();
    assert!(r.passes, "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dc_monotone_in_t(w in 0.0f64..1.0, t1 in 1.0f64..60.0, dt in 0.0f64..60.0) {
        let spec = DiophantineSpec::new(0.05, 2.0, 1).unwrap();
        let hi = dc_membership(&[w], &spec, t1 + dt).unwrap();
        let lo = dc_membership(&[w], &spec, t1).unwrap();
        prop_assert!(!hi.ok || lo.ok);
        prop_assert!(lo.margin >= hi.margin);
    }

    #[test]
    fn hits_subadditive_over_unions(a1 in 0.0f64..1.0, l1 in 0.0f64..0.5, a2 in 0.0f64..1.0, l2 in 0.0f64..0.5, th in 0.0f64..1.0) {
        let inside = |x: f64, a: f64, l: f64| (x - a).rem_euclid(1.0) < l;
        let h = |f: &dyn Fn(f64) -> bool| orbit_hit_count(&[golden()], &[th], 2000, |_, x| f(x[0]), 0.1).unwrap().hits;
        let both = h(&|x| inside(x, a1, l1) || inside(x, a2, l2));
        prop_assert!(both <= h(&|x| inside(x, a1, l1)) + h(&|x| inside(x, a2, l2)));
    }
}
