//! The eight acceptance criteria. Each returns its verdict, a one-line
//! detail and its wall time; exceeding the time limit fails the criterion.

use std::f64::consts::PI;
use std::time::Instant;

use quasiloc::arithmetic::{
    dc_membership, discrepancy_log_ratio, orbit_hit_count, resonance_scan, shifted_log_norms, star_discrepancy,
    DiophantineSpec, ResonanceOptions,
};
use quasiloc::faber::{
    approximate_on_product, degree_bound, faber_polynomial, faber_values, sampled_sup_error, transfer_surrogate,
    FaberDomain, SurrogateOptions,
};
use quasiloc::green::{decay_window_search, poisson_identity_check, GreenFunction};
use quasiloc::lyapunov::{
    ap_multiscale_lyapunov, ap_random_survey, avalanche_check, finite_lyapunov, ldt_sample, phase_log_norm, LdtParams,
    PhaseGrid,
};
use quasiloc::transfer::{
    compose, integrate_transfer, relative_distance, shift_covariance_check, transfer_matrix_at, Interval,
    IntegratorConfig, ScaledMatrix2,
};
use quasiloc::{AnalyticPotential, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{golden, Experiment, ExperimentConfig, PotentialSpec};
use crate::experiments::dispatch;

#[derive(Debug, Clone)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub limit_seconds: f64,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "[{}] {} {} ({:.1} s of {:.0} s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.seconds,
            self.limit_seconds,
            self.detail
        )
    }
}

/// Accumulates named checks into a verdict and a detail string.
struct Checks {
    ok: bool,
    parts: Vec<String>,
}

impl Checks {
    fn new() -> Self {
        Self { ok: true, parts: Vec::new() }
    }

    fn add(&mut self, ok: bool, text: String) {
        self.ok &= ok;
        self.parts.push(if ok { text } else { format!("FAILED {text}") });
    }

    fn error(&mut self, what: &str, e: impl std::fmt::Display) {
        self.add(false, format!("{what}: {e}"));
    }
}

pub const TITLES: [&str; 8] = [
    "free-particle closed forms",
    "structural identities",
    "avalanche principle",
    "large-deviation trend",
    "Green's function and Poisson formula",
    "localization",
    "Faber suite",
    "arithmetic suite",
];

const LIMITS: [f64; 8] = [5.0, 120.0, 120.0, 600.0, 180.0, 300.0, 300.0, 300.0];

pub fn run_criterion(id: u8) -> CriterionReport {
    assert!((1..=8).contains(&id), "criteria are numbered 1 to 8");
    let start = Instant::now();
    let checks = match id {
        1 => free_particle(),
        2 => structural(),
        3 => avalanche(),
        4 => ldt_trend(),
        5 => green_poisson(),
        6 => localization(),
        7 => faber_suite(),
        _ => arithmetic_suite(),
    };
    let seconds = start.elapsed().as_secs_f64();
    let limit = LIMITS[id as usize - 1];
    let mut detail = checks.parts.join("; ");
    if seconds >= limit {
        detail.push_str("; FAILED time limit");
    }
    CriterionReport { id, title: TITLES[id as usize - 1], passed: checks.ok && seconds < limit, detail, seconds, limit_seconds: limit }
}

pub fn run_suite(ids: &[u8]) -> Vec<CriterionReport> {
    ids.iter().map(|&id| run_criterion(id)).collect()
}

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

fn free_particle() -> Checks {
    let mut c = Checks::new();
    let p = AnalyticPotential::zero(1);
    let w = [golden()];
    let mut worst = 0.0f64;
    for (a, b) in [(0.0, PI / 2.0), (0.0, 10.0), (0.0, 50.0), (-20.0, 30.0), (3.5, 4.25)] {
        let t = b - a;
        for e in [1.0, -1.0] {
            let exact = if e > 0.0 {
                [[t.cos(), t.sin()], [-t.sin(), t.cos()]]
            } else {
                [[t.cosh(), t.sinh()], [t.sinh(), t.cosh()]]
            };
            match transfer_matrix_at(&p, Interval { a, b }, &[0.3], &w, e, &cfg()) {
                Ok(m) => worst = worst.max(relative_distance(&m, &ScaledMatrix2::from_entries(exact))),
                Err(err) => c.error("closed form", err),
            }
        }
    }
    c.add(worst <= 1e-8, format!("closed-form residual {worst:.1e} ≤ 1e-8"));
    match finite_lyapunov(&p, Interval { a: 0.0, b: 300.0 }, &w, -4.0, &PhaseGrid::new(4, 1).unwrap(), &[0.0], &cfg()) {
        Ok(l) => c.add((l.value - 2.0).abs() <= 1e-3, format!("L(E=−4, |I|=300) = {:.6}", l.value)),
        Err(e) => c.error("L(E=−4)", e),
    }
    c
}

struct Structural {
    det: f64,
    semigroup: f64,
    shift: f64,
    invariance_ratio: f64,
    triple: f64,
    triple_skipped: usize,
}

fn structural_one(rng: &mut ChaCha8Rng, s: &mut Structural) -> quasiloc::Result<()> {
    let k: f64 = rng.gen_range(0.05..=4.0);
    let p = AnalyticPotential::cosine_model(k)?;
    let len: f64 = rng.gen_range(1.0..=40.0);
    let a: f64 = rng.gen_range(-20.0..20.0);
    let iv = Interval::new(a, a + len)?;
    let theta: f64 = rng.gen_range(0.0..1.0);
    let e: f64 = rng.gen_range(-2.0 * k * k - 2.0..2.0 * k * k + 10.0);
    let n = rng.gen_range(1..=5) as f64;
    let split = a + len * rng.gen_range(0.2..0.8);
    let w = [golden()];
    let th = [theta];
    let cfg = cfg();

    let m = transfer_matrix_at(&p, iv, &th, &w, e, &cfg)?;
    s.det = s.det.max(m.det_drift());
    let m1 = transfer_matrix_at(&p, Interval::new(a, split)?, &th, &w, e, &cfg)?;
    let m2 = transfer_matrix_at(&p, Interval::new(split, a + len)?, &th, &w, e, &cfg)?;
    s.semigroup = s.semigroup.max(relative_distance(&compose(&m2, &m1), &m));
    s.shift = s.shift.max(shift_covariance_check(&p, iv, &th, &w, e, n, &cfg)?);

    let z = num_complex::Complex64::new(e, 0.0);
    let (l0, c0) = phase_log_norm(&p, iv, &th, &[0.0], &w, z, &cfg)?;
    let (l1, c1) = phase_log_norm(&p, iv, &[(theta + w[0]).fract()], &[0.0], &w, z, &cfg)?;
    s.invariance_ratio = s.invariance_ratio.max((l0 - l1).abs() / c0.max(c1));

    match GreenFunction::new(&p, iv, &th, &w, e, &cfg) {
        Ok(g) => s.triple = s.triple.max(g.wronskian_triple_residual()?),
        Err(Error::WronskianNearZero { .. }) => s.triple_skipped += 1,
        Err(err) => return Err(err),
    }
    Ok(())
}

fn structural() -> Checks {
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut s = Structural { det: 0.0, semigroup: 0.0, shift: 0.0, invariance_ratio: 0.0, triple: 0.0, triple_skipped: 0 };
    for i in 0..200 {
        if let Err(e) = structural_one(&mut rng, &mut s) {
            c.error(&format!("config {i}"), e);
        }
    }
    c.add(s.det <= 1e-8, format!("det drift {:.1e}", s.det));
    c.add(s.semigroup <= 1e-7, format!("semigroup {:.1e}", s.semigroup));
    c.add(s.shift <= 1e-7, format!("shift covariance {:.1e}", s.shift));
    c.add(s.invariance_ratio <= 1.0, format!("almost invariance gap/C_num {:.3}", s.invariance_ratio));
    c.add(s.triple <= 1e-7, format!("Wronskian triple {:.1e} ({} near-eigenvalue skips)", s.triple, s.triple_skipped));
    c
}

fn avalanche() -> Checks {
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut exact = true;
    for _ in 0..100 {
        let mats: Vec<ScaledMatrix2<f64>> = (0..2)
            .map(|_| {
                let (x, y, z): (f64, f64, f64) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(0.5..5.0));
                // [[z, x], [y, (1 + xy)/z]] is unimodular
                ScaledMatrix2::from_entries([[z, x], [y, (1.0 + x * y) / z]])
            })
            .collect();
        match avalanche_check(&mats, 1.0) {
            Ok(r) => exact &= r.residual == 0.0,
            Err(e) => c.error("n = 2", e),
        }
    }
    c.add(exact, "n = 2 residual exactly 0".into());
    match ap_random_survey(100, 3) {
        Ok(s) => {
            let bounded = s.reports.iter().all(|r| r.residual <= s.measured_c * r.bound);
            c.add(bounded && s.stable, format!("measured C {:.3} (halves {:.3}, {:.3})", s.measured_c, s.half_maxima.0, s.half_maxima.1));
        }
        Err(e) => c.error("survey", e),
    }
    let p = AnalyticPotential::cosine_model(3.0).unwrap();
    let iv = Interval { a: 0.0, b: 64.0 };
    let grid = PhaseGrid::new(64, 1).unwrap();
    let w = [golden()];
    match (
        ap_multiscale_lyapunov(&p, iv, &w, 0.0, 8.0, &grid, &cfg()),
        finite_lyapunov(&p, iv, &w, 0.0, &grid, &[0.0], &cfg()),
    ) {
        (Ok(ms), Ok(l)) => {
            let tol = 3.0 * 64f64.ln() / 64.0;
            let d = (ms.value - l.value).abs();
            c.add(d <= tol, format!("multiscale {:.4} vs direct {:.4}, |Δ| {d:.4} ≤ {tol:.4}", ms.value, l.value));
        }
        (Err(e), _) | (_, Err(e)) => c.error("multiscale", e),
    }
    c
}

fn ldt_trend() -> Checks {
    let mut c = Checks::new();
    let p = AnalyticPotential::cosine_model(3.0).unwrap();
    let params = LdtParams { epsilon: 0.5, sigma: 0.25, sample_count: 1000, seed: 0 };
    let mut measures = Vec::new();
    for len in [20.0, 40.0, 80.0] {
        match ldt_sample(&p, Interval { a: 0.0, b: len }, &[golden()], 0.0, &params, &cfg()) {
            Ok(s) => measures.push(s.measure()),
            Err(e) => {
                c.error(&format!("|I| = {len}"), e);
                return c;
            }
        }
    }
    let monotone = measures.windows(2).all(|w| w[1] <= w[0]);
    c.add(monotone, format!("measures {measures:?} non-increasing"));
    c.add(measures[2] <= 0.2, format!("{:.3} ≤ 0.2 at |I| = 80", measures[2]));
    c
}

fn green_poisson() -> Checks {
    let mut c = Checks::new();
    let free = AnalyticPotential::zero(1);
    let w = [golden()];
    match GreenFunction::new(&free, Interval { a: 0.0, b: 1.0 }, &[0.0], &w, -1.0, &cfg()).and_then(|g| g.eval(0.5, 0.5)) {
        Ok(v) => {
            let exact = -(0.5f64.sinh().powi(2)) / 1f64.sinh();
            let d = (v.value() - exact).abs();
            c.add(d <= 1e-9, format!("G(½,½) error {d:.1e}"));
        }
        Err(e) => c.error("closed form", e),
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst, mut done, mut skipped) = (0.0f64, 0usize, 0usize);
    while done < 50 && skipped < 50 {
        let k: f64 = rng.gen_range(0.05..=4.0);
        let p = AnalyticPotential::cosine_model(k).unwrap();
        let len: f64 = rng.gen_range(1.0..=20.0);
        let a: f64 = rng.gen_range(-10.0..10.0);
        let iv = Interval { a, b: a + len };
        let th = [rng.gen_range(0.0..1.0)];
        let e: f64 = rng.gen_range(-2.0 * k * k - 2.0..2.0 * k * k + 5.0);
        let r = integrate_transfer(&p, Interval { a: a - 1.0, b: a + len }, &th, &w, e, &cfg()).and_then(|sol| {
            let samples = (0..=40)
                .map(|j| {
                    let t = if j == 40 { iv.b } else { a + len * j as f64 / 40.0 };
                    sol.column_at(t, 0).map(|(v, l)| (t, v[0] * l.exp()))
                })
                .collect::<quasiloc::Result<Vec<_>>>()?;
            poisson_identity_check(&p, iv, &th, &w, e, &samples, &cfg())
        });
        match r {
            Ok(x) => {
                worst = worst.max(x);
                done += 1;
            }
            Err(Error::WronskianNearZero { .. }) => skipped += 1,
            Err(e) => {
                c.error("Poisson", e);
                done += 1;
            }
        }
    }
    c.add(done == 50 && worst <= 1e-6, format!("Poisson residual {worst:.1e} over {done} configs ({skipped} redrawn)"));
    let p = AnalyticPotential::cosine_model(3.0).unwrap();
    let grid = PhaseGrid::new(32, 1).unwrap();
    let (mut returned, mut verified, mut declined) = (0usize, 0usize, 0usize);
    for (len, e) in [(30.0, 0.0), (40.0, -3.0), (30.0, 5.0)] {
        let iv = Interval { a: 0.0, b: len };
        let l = match finite_lyapunov(&p, iv, &w, e, &grid, &[0.0], &cfg()) {
            Ok(l) => l.value,
            Err(err) => {
                c.error("decay L", err);
                continue;
            }
        };
        for j in 0..6 {
            let th = [j as f64 / 6.0 + 0.05];
            match decay_window_search(&p, iv, &th, &w, e, l, 8.0, 0.1, &cfg()) {
                Ok(win) => {
                    returned += 1;
                    if win.worst_margin <= 0.0 {
                        verified += 1;
                    }
                }
                Err(Error::HypothesisFailure { .. }) => declined += 1,
                Err(err) => c.error("decay window", err),
            }
        }
    }
    c.add(returned > 0 && verified == returned, format!("decay windows verified {verified}/{returned} ({declined} declined)"));
    c
}

fn localization() -> Checks {
    let mut c = Checks::new();
    let cfg = ExperimentConfig {
        experiment: Some(Experiment::Localize),
        potential: PotentialSpec::Preset("cosine:4".into()),
        theta: vec![0.3],
        energy: 0.0,
        energy_window: [-30.0, 10.0],
        intervals: vec![[-60.0, 60.0]],
        ..Default::default()
    };
    match dispatch(Experiment::Localize, &cfg, None) {
        Ok(o) => {
            let r = |k: &str| o.results.get(k).copied().unwrap_or(f64::NAN);
            c.add(
                o.passed,
                format!("E* = {:.6}, decay {:.4} vs L {:.4} (ratio {:.3})", r("energy"), r("decay_rate"), r("lyapunov"), r("ratio")),
            );
        }
        Err(e) => c.error("localize", e),
    }
    c
}

/// `Φ_n` coefficients by the contour integral `(1/2πi)∮ w^n / (ζ − z) dζ`
/// expanded in powers of `z`, on `|w| = r`.
fn contour_faber(l: f64, n: usize, r: f64, nodes: usize) -> Vec<f64> {
    use num_complex::Complex64;
    (0..=n + 2)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..nodes {
                let w = Complex64::from_polar(r, 2.0 * PI * j as f64 / nodes as f64);
                let zeta = (w + w.inv()) * (l / 2.0);
                let dzeta = (Complex64::new(1.0, 0.0) - (w * w).inv()) * (l / 2.0);
                acc += w.powu(n as u32) * zeta.powi(-(k as i32) - 1) * dzeta * w;
            }
            (acc / nodes as f64).re
        })
        .collect()
}

fn faber_suite() -> Checks {
    use num_complex::Complex64;
    let mut c = Checks::new();
    let rec = faber_polynomial(1.0, 2).unwrap();
    let oracle = contour_faber(1.0, 2, 2.0, 4096);
    let expect = [-2.0, 0.0, 4.0, 0.0, 0.0];
    let d = (0..oracle.len())
        .map(|k| (rec.get(k).copied().unwrap_or(0.0) - oracle[k]).abs().max((expect[k] - oracle[k]).abs()))
        .fold(0.0, f64::max);
    c.add(d <= 1e-10, format!("Φ₂ vs contour {d:.1e}"));
    // (1/2πi)∮ Φ_n(ψ(w)) w^{−m−1} dw = δ_nm on |w| = 1.3
    let mut bi = 0.0f64;
    for l in [1.0, 2.5] {
        let nodes = 64;
        let vals: Vec<Vec<Complex64>> = (0..nodes)
            .map(|j| {
                let w = Complex64::from_polar(1.3, 2.0 * PI * j as f64 / nodes as f64);
                faber_values(l, (w + w.inv()) * (l / 2.0), 10)
            })
            .collect();
        for n in 0..=10 {
            for m in 0..=10 {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, v) in vals.iter().enumerate() {
                    let w = Complex64::from_polar(1.3, 2.0 * PI * j as f64 / nodes as f64);
                    acc += v[n] * w.powi(-(m as i32));
                }
                let got = acc / nodes as f64;
                let want = if n == m { 1.0 } else { 0.0 };
                bi = bi.max((got - want).norm());
            }
        }
    }
    c.add(bi <= 1e-10, format!("biorthogonality {bi:.1e}"));
    let dom = FaberDomain::new(vec![1.0, 1.0], 1.5).unwrap();
    match approximate_on_product(|z: &[Complex64]| Ok((z[0] + z[1]).exp()), &dom, 24) {
        Ok(s) => {
            let obs = sampled_sup_error(|z: &[f64]| (z[0] + z[1]).exp(), &s, 61);
            c.add(obs <= s.error_cert, format!("exp(z₁+z₂) error {obs:.1e} ≤ cert {:.1e}", s.error_cert));
        }
        Err(e) => c.error("product", e),
    }
    let p = AnalyticPotential::cosine_model(2.0).unwrap();
    let iv = Interval { a: 0.0, b: 6.0 };
    let n = degree_bound(iv, 1.0, 1.0 / 128.0);
    match transfer_surrogate(&p, iv, 1.0, (0.0, 0.0), n, &SurrogateOptions::default(), &cfg()) {
        Ok(s) => c.add(s.deviation <= 1.0, format!("surrogate N = {n} deviation {:.3}", s.deviation)),
        Err(e) => c.error("surrogate", e),
    }
    c
}

fn arithmetic_suite() -> Checks {
    let mut c = Checks::new();
    let g = golden();
    let spec = DiophantineSpec::new(0.2, 2.0, 1).unwrap();
    match dc_membership(&[g], &spec, 100.0) {
        Ok(r) => c.add(r.ok, format!("golden DC margin {:.3}", r.margin)),
        Err(e) => c.error("DC", e),
    }
    let anchors: Vec<f64> = (1..64).map(|k| k as f64 / 64.0).collect();
    let (ratio, at) = discrepancy_log_ratio(g, 100_000, &anchors);
    let star_ok = [10u64, 100, 1000, 10_000, 100_000].iter().all(|&n| star_discrepancy(g, n) <= 3.0 * (n as f64).ln());
    c.add(ratio <= 3.0 && star_ok, format!("discrepancy/log N ≤ {ratio:.3} (at N = {at})"));
    let p = AnalyticPotential::cosine_model(3.0).unwrap();
    let iv = Interval { a: 0.0, b: 20.0 };
    let params = LdtParams { epsilon: 0.5, sigma: 0.25, sample_count: 1000, seed: 0 };
    let n = 10_000u64;
    let r = ldt_sample(&p, iv, &[g], 0.0, &params, &cfg()).and_then(|s| {
        let norms = shifted_log_norms(&p, iv, &[0.0], &[g], 0.0, 1, n, &cfg())?;
        let centre = iv.len() * s.lyapunov;
        orbit_hit_count(&[g], &[0.0], n, |k, _| (norms[(k - 1) as usize] - centre).abs() >= s.threshold, 0.1)
    });
    match r {
        Ok(r) => c.add(r.passes, format!("orbit hits {} < N^0.9 = {:.0}", r.hits, (n as f64).powf(0.9))),
        Err(e) => c.error("orbit count", e),
    }
    let energies: Vec<f64> = (0..=16).map(|k| -4.0 + 0.5 * k as f64).collect();
    match resonance_scan(
        &AnalyticPotential::zero(1),
        Interval { a: 0.0, b: 10.0 },
        Interval { a: 0.0, b: 5.0 },
        &[0.0],
        &[g],
        &energies,
        (1, 200),
        0.1,
        &ResonanceOptions::default(),
        &cfg(),
    ) {
        Ok(r) => c.add(r.hits.is_empty(), format!("free-particle double resonances {}", r.hits.len())),
        Err(e) => c.error("resonance scan", e),
    }
    c
}
