//! One function per experiment. Each returns its scalar results, pass/fail
//! checks and artifact contents; `run` does the writing and caching.

use std::collections::BTreeMap;

use quasiloc::arithmetic::{
    dc_membership, discrepancy_count, orbit_hit_count, resonance_scan, shifted_log_norms, star_discrepancy,
    DiophantineSpec, ResonanceOptions, UnitBox,
};
use quasiloc::faber::{degree_bound, transfer_surrogate, TransferSurrogate, Variable};
use quasiloc::green::{decay_window_search, localize_eigenfunction, poisson_identity_check, GreenFunction};
use quasiloc::lyapunov::{
    ap_multiscale_lyapunov, ap_random_survey, finite_lyapunov, ldt_sample, log_norms_at, LyapunovEstimate, PhaseGrid,
};
use quasiloc::transfer::{integrate_transfer, transfer_matrix_at, Interval, IntegratorConfig};
use quasiloc::{AnalyticPotential, Error};

use crate::config::{Experiment, ExperimentConfig};
use crate::error::{LabError, LabResult};
use crate::plot::PlotKind;
use crate::report::{Artifact, Cache};

#[derive(Debug, Default)]
pub struct Outcome {
    pub passed: bool,
    pub results: BTreeMap<String, f64>,
    pub notes: BTreeMap<String, String>,
    pub artifacts: Vec<Artifact>,
    /// CSV artifacts to render, by name.
    pub plots: Vec<(String, PlotKind)>,
}

impl Outcome {
    fn new() -> Self {
        Self { passed: true, ..Default::default() }
    }

    pub fn scalar(&mut self, key: &str, v: f64) {
        if v.is_finite() {
            self.results.insert(key.into(), v);
        } else {
            self.notes.insert(key.into(), v.to_string());
        }
    }

    pub fn note(&mut self, key: &str, v: impl ToString) {
        self.notes.insert(key.into(), v.to_string());
    }

    /// Records a named check; any failing check fails the run.
    pub fn check(&mut self, key: &str, ok: bool) {
        self.passed &= ok;
        self.notes.insert(format!("check.{key}"), if ok { "pass" } else { "fail" }.into());
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).expect("in-memory CSV");
        for r in rows {
            w.write_record(r).expect("in-memory CSV");
        }
        self.artifacts.push((name.into(), w.into_inner().expect("in-memory CSV")));
    }

    fn json(&mut self, name: &str, text: String) {
        self.artifacts.push((name.into(), text.into_bytes()));
    }
}

fn f(v: f64) -> String {
    v.to_string()
}

fn joined(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub struct Ctx<'a> {
    pub cfg: &'a ExperimentConfig,
    pub p: AnalyticPotential,
    pub tol: IntegratorConfig,
    pub cache: Option<&'a Cache>,
    pub name: &'static str,
}

impl Ctx<'_> {
    fn err(&self, e: Error) -> LabError {
        LabError::module(self.name, e)
    }

    fn interval(&self) -> Interval {
        self.cfg.intervals()[0]
    }

    /// `finite_lyapunov`, memoized in the cache under the potential, ω, E,
    /// interval, grid, η and tolerances.
    fn lyapunov(&self, interval: Interval, energy: f64, grid_points: usize, eta: &[f64]) -> LabResult<LyapunovEstimate> {
        let key = serde_json::json!({
            "potential": self.p.to_json(),
            "omega": self.cfg.omega,
            "energy": energy,
            "interval": [interval.a, interval.b],
            "grid": grid_points,
            "eta": eta,
            "tolerances": self.tol,
        })
        .to_string();
        if let Some(hit) = self.cache.and_then(|c| c.get::<LyapunovEstimate>("lyapunov", &key)) {
            return Ok(hit);
        }
        let grid = PhaseGrid::new(grid_points, self.p.dim()).map_err(|e| self.err(e))?;
        let est = finite_lyapunov(&self.p, interval, &self.cfg.omega, energy, &grid, eta, &self.tol)
            .map_err(|e| self.err(e))?;
        if let Some(c) = self.cache {
            c.put("lyapunov", &key, &est)?;
        }
        Ok(est)
    }
}

pub fn dispatch(exp: Experiment, cfg: &ExperimentConfig, cache: Option<&Cache>) -> LabResult<Outcome> {
    let ctx = Ctx { cfg, p: cfg.potential.resolve()?, tol: cfg.tolerances, cache, name: exp.name() };
    match exp {
        Experiment::Transfer => transfer(&ctx),
        Experiment::Lyapunov => lyapunov(&ctx),
        Experiment::Ldt => ldt(&ctx),
        Experiment::Ap => ap(&ctx),
        Experiment::Green => green(&ctx),
        Experiment::Localize => localize(&ctx),
        Experiment::Faber => faber(&ctx),
        Experiment::Dc => dc(&ctx),
        Experiment::Discrepancy => discrepancy(&ctx),
        Experiment::Orbitcount => orbitcount(&ctx),
        Experiment::ResonanceScan => resonance(&ctx),
    }
}

fn transfer(ctx: &Ctx) -> LabResult<Outcome> {
    let cfg = ctx.cfg;
    let iv = ctx.interval();
    let sol = integrate_transfer(&ctx.p, iv, &cfg.theta, &cfg.omega, cfg.energy, &ctx.tol).map_err(|e| ctx.err(e))?;
    let m = *sol.matrix();
    let mut o = Outcome::new();
    o.scalar("log_scale", m.log_scale());
    o.scalar("log_norm", m.log_norm());
    o.scalar("det_drift", m.det_drift());
    o.scalar("gronwall_constant", sol.gronwall_constant());
    o.scalar("steps", sol.steps_taken() as f64);
    o.check("det_drift", m.det_drift() <= 1e-8);
    let json = serde_json::json!({
        "matrix": m.unit(),
        "log_scale": m.log_scale(),
        "log_norm": m.log_norm(),
        "det_drift": m.det_drift(),
    });
    o.json("transfer.json", serde_json::to_string_pretty(&json).expect("json"));
    let step = cfg.params.sample_step;
    if step > 0.0 {
        let n = (iv.len() / step).ceil() as usize;
        let mut rows = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let t = if k == n { iv.b } else { iv.a + k as f64 * step };
            let mt = sol.at(t).map_err(|e| ctx.err(e))?;
            let u = mt.unit();
            rows.push(vec![f(t), f(u[0][0]), f(u[0][1]), f(u[1][0]), f(u[1][1]), f(mt.log_scale())]);
        }
        o.csv("transfer_samples.csv", &["t", "m00", "m01", "m10", "m11", "log_scale"], &rows);
    }
    Ok(o)
}

fn lyapunov(ctx: &Ctx) -> LabResult<Outcome> {
    let cfg = ctx.cfg;
    let energies = if cfg.params.scan_energy { cfg.energies() } else { vec![cfg.energy] };
    let ldt = cfg.ldt_params();
    let mut rows = Vec::new();
    let mut o = Outcome::new();
    let grid = PhaseGrid::new(cfg.grid_points, ctx.p.dim()).map_err(|e| ctx.err(e))?;
    for &e in &energies {
        for iv in cfg.intervals() {
            let est = ctx.lyapunov(iv, e, cfg.grid_points, &cfg.eta)?;
            let logs = log_norms_at(&ctx.p, iv, &grid.points(), &cfg.eta, &cfg.omega, e, &ctx.tol)
                .map_err(|err| ctx.err(err))?;
            let centre = iv.len() * est.value;
            let devs: Vec<f64> = logs.iter().map(|x| (x.0 - centre).abs()).collect();
            let sup_dev = devs.iter().copied().fold(0.0, f64::max);
            let threshold = ldt.epsilon * iv.len().powf(1.0 - ldt.sigma);
            let measure = devs.iter().filter(|&&d| d >= threshold).count() as f64 / devs.len() as f64;
            rows.push(vec![
                f(e),
                f(iv.len()),
                cfg.grid_points.to_string(),
                joined(&cfg.eta),
                f(est.value),
                f(est.spread),
                f(sup_dev),
                f(measure),
            ]);
            o.scalar(&format!("value[E={e},len={}]", iv.len()), est.value);
            o.check(&format!("nonnegative[E={e},len={}]", iv.len()), est.value >= -1e-12);
        }
    }
    if let (Some(first), true) = (rows.first(), rows.len() == 1) {
        o.scalar("value", first[4].parse().unwrap_or(f64::NAN));
    }
    o.csv(
        "lyapunov.csv",
        &["energy", "interval_len", "grid_points", "eta", "value", "spread", "sup_dev", "ldt_measure"],
        &rows,
    );
    let kind = if energies.len() > 1 { PlotKind::LyapunovEnergy } else { PlotKind::LyapunovScale };
    o.plots.push(("lyapunov.csv".into(), kind));
    Ok(o)
}

fn ldt(ctx: &Ctx) -> LabResult<Outcome> {
    let cfg = ctx.cfg;
    let params = cfg.ldt_params();
    let mut o = Outcome::new();
    let mut rows = Vec::new();
    let mut sample_rows = Vec::new();
    let mut last = f64::INFINITY;
    let mut monotone = true;
    for iv in cfg.intervals() {
        let s = ldt_sample(&ctx.p, iv, &cfg.omega, cfg.energy, &params, &ctx.tol).map_err(|e| ctx.err(e))?;
        let m = s.measure();
        monotone &= m <= last;
        last = m;
        rows.push(vec![f(iv.len()), f(s.lyapunov), f(s.threshold), s.phases.len().to_string(), f(m)]);
        o.scalar(&format!("ldt_measure[len={}]", iv.len()), m);
        for (i, ph) in s.phases.iter().enumerate() {
            sample_rows.push(vec![
                f(iv.len()),
                joined(ph),
                f(s.log_norms[i]),
                f(s.log_norms[i] - iv.len() * s.lyapunov),
                u8::from(s.deviates(i)).to_string(),
            ]);
        }
    }
    o.check("non_increasing", monotone);
    o.csv("ldt.csv", &["interval_len", "lyapunov", "threshold", "samples", "ldt_measure"], &rows);
    o.csv("ldt_samples.csv", &["interval_len", "theta", "log_norm", "excess", "deviates"], &sample_rows);
    o.plots.push(("ldt.csv".into(), PlotKind::LdtTrend));
    Ok(o)
}

fn ap(ctx: &Ctx) -> LabResult<Outcome> {
    let cfg = ctx.cfg;
    let mut o = Outcome::new();
    let survey = ap_random_survey(cfg.params.survey_count, cfg.seed).map_err(|e| ctx.err(e))?;
    let rows: Vec<Vec<String>> = survey
        .reports
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i.to_string(), r.n.to_string(), f(r.log_mu), f(r.residual), f(r.bound), f(r.implied_constant())])
        .collect();
    o.csv("ap_survey.csv", &["index", "n", "log_mu", "residual", "n_over_mu", "implied_constant"], &rows);
    o.scalar("measured_c", survey.measured_c);
    o.scalar("rejected", survey.rejected as f64);
    o.check("constant_stable", survey.stable);
    o.check(
        "residual_bound",
        survey.reports.iter().all(|r| r.residual <= survey.measured_c * r.bound * (1.0 + 1e-12)),
    );
    let grid = PhaseGrid::new(cfg.grid_points, ctx.p.dim()).map_err(|e| ctx.err(e))?;
    let mut rows = Vec::new();
    for iv in cfg.intervals() {
        if iv.len() / cfg.params.block_len < 3.0 {
            continue;
        }
        let ms = ap_multiscale_lyapunov(&ctx.p, iv, &cfg.omega, cfg.energy, cfg.params.block_len, &grid, &ctx.tol)
            .map_err(|e| ctx.err(e))?;
        let direct = ctx.lyapunov(iv, cfg.energy, cfg.grid_points, &vec![0.0; ctx.p.dim()])?;
        let tol = 3.0 * iv.len().ln() / iv.len();
        let diff = (ms.value - direct.value).abs();
        rows.push(vec![
            f(iv.len()),
            f(ms.block_len),
            ms.blocks.to_string(),
            f(ms.value),
            f(direct.value),
            f(diff),
            f(tol),
            f(ms.failed_fraction),
        ]);
        o.check(&format!("multiscale[len={}]", iv.len()), diff <= tol);
    }
    o.csv(
        "ap_multiscale.csv",
        &["interval_len", "block_len", "blocks", "ap_value", "direct_value", "difference", "tolerance", "failed_fraction"],
        &rows,
    );
    Ok(o)
}

/// `y = u_{a−1}` sampled at `n + 1` points of `I`, endpoints exact.
fn poisson_samples(ctx: &Ctx, iv: Interval, n: usize) -> LabResult<Vec<(f64, f64)>> {
    let cfg = ctx.cfg;
    let wide = Interval { a: iv.a - 1.0, b: iv.b };
    let sol = integrate_transfer(&ctx.p, wide, &cfg.theta, &cfg.omega, cfg.energy, &ctx.tol).map_err(|e| ctx.err(e))?;
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = if k == n { iv.b } else { iv.a + iv.len() * k as f64 / n as f64 };
        let (v, l) = sol.column_at(t, 0).map_err(|e| ctx.err(e))?;
        out.push((t, v[0] * l.exp()));
    }
    Ok(out)
}

fn green(ctx: &Ctx) -> LabResult<Outcome> {
    let cfg = ctx.cfg;
    let iv = ctx.interval();
    let mut o = Outcome::new();
    let g = GreenFunction::new(&ctx.p, iv, &cfg.theta, &cfg.omega, cfg.energy, &ctx.tol).map_err(|e| ctx.err(e))?;
    let n = cfg.params.green_points.max(2);
    let mut rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let s = iv.a + iv.len() * i as f64 / (n - 1) as f64;
            let t = iv.a + iv.len() * j as f64 / (n - 1) as f64;
            let v = g.eval(s, t).map_err(|e| ctx.err(e))?;
            rows.push(vec![f(s), f(t), f(v.sign), f(v.log_abs)]);
        }
    }
    o.csv("green.csv", &["s", "t", "sign", "log_abs"], &rows);
    let triple = g.wronskian_triple_residual().map_err(|e| ctx.err(e))?;
    o.scalar("wronskian_triple_residual", triple);
    o.check("wronskian_triple", triple <= 1e-7);
    let samples = poisson_samples(ctx, iv, 64)?;
    let poisson = poisson_identity_check(&ctx.p, iv, &cfg.theta, &cfg.omega, cfg.energy, &samples, &ctx.tol)
        .map_err(|e| ctx.err(e))?;
    o.scalar("poisson_residual", poisson);
    o.check("poisson", poisson <= 1e-6);
    let l_ref = ctx.lyapunov(iv, cfg.energy, cfg.grid_points, &vec![0.0; ctx.p.dim()])?.value;
    o.scalar("lyapunov", l_ref);
    match decay_window_search(&ctx.p, iv, &cfg.theta, &cfg.omega, cfg.energy, l_ref, cfg.params.k_budget, cfg.params.gamma, &ctx.tol) {
        Ok(w) => {
            o.scalar("window_a", w.j.a);
            o.scalar("window_b", w.j.b);
            o.scalar("window_case", w.case_id as f64);
            o.scalar("window_worst_margin", w.worst_margin);
            o.scalar("window_pairs", w.pairs_checked as f64);
            o.check("decay_window", w.worst_margin <= 0.0);
            o.json("decay_window.json", serde_json::to_string_pretty(&w).expect("json"));
        }
        Err(Error::HypothesisFailure { log_norm, required }) => {
            o.note("decay_window", format!("not attempted: log‖M‖ = {log_norm} below required {required}"));
        }
        Err(e) => return Err(ctx.err(e)),
    }
    Ok(o)
}

/// Sign of `v_a(b; E)`.
fn va_sign(ctx: &Ctx, bx: Interval, e: f64) -> LabResult<f64> {
    let m = transfer_matrix_at(&ctx.p, bx, &ctx.cfg.theta, &ctx.cfg.omega, e, &ctx.tol).map_err(|err| ctx.err(err))?;
    Ok(m.unit()[0][1].signum())
}

/// The sign change of `v_a(b; E)` on the `step` lattice through `centre`
/// nearest to `centre`, within `window`.
pub fn nearest_bracket(ctx: &Ctx, bx: Interval, centre: f64, window: [f64; 2], step: f64) -> LabResult<Option<(f64, f64)>> {
    let mut cache: BTreeMap<i64, f64> = BTreeMap::new();
    let mut sign = |k: i64| -> LabResult<f64> {
        if let Some(&s) = cache.get(&k) {
            return Ok(s);
        }
        let s = va_sign(ctx, bx, centre + k as f64 * step)?;
        cache.insert(k, s);
        Ok(s)
    };
    let kmax = (((window[1] - centre).max(centre - window[0])) / step).ceil() as i64;
    for r in 0..kmax {
        for (lo, hi) in [(r, r + 1), (-r - 1, -r)] {
            let (el, eh) = (centre + lo as f64 * step, centre + hi as f64 * step);
            if el < window[0] || eh > window[1] {
                continue;
            }
            if sign(lo)? != sign(hi)? {
                return Ok(Some((el, eh)));
            }
        }
    }
    Ok(None)
}

fn localize(ctx: &Ctx) -> LabResult<Outcome> {
    let cfg = ctx.cfg;
    let bx = ctx.interval();
    let mut o = Outcome::new();
    let bracket = match cfg.params.bracket {
        Some([lo, hi]) => (lo, hi),
        None => nearest_bracket(ctx, bx, cfg.energy, cfg.energy_window, cfg.params.bracket_step)?.ok_or_else(|| {
            ctx.err(Error::NoSignChange { lo: cfg.energy_window[0], hi: cfg.energy_window[1] })
        })?,
    };
    let loc = localize_eigenfunction(&ctx.p, bx, &cfg.theta, &cfg.omega, bracket, &ctx.tol).map_err(|e| ctx.err(e))?;
    let l = ctx.lyapunov(bx, loc.energy, cfg.grid_points, &vec![0.0; ctx.p.dim()])?.value;
    let ratio = loc.decay_rate / l;
    o.scalar("energy", loc.energy);
    o.scalar("decay_rate", loc.decay_rate);
    o.scalar("lyapunov", l);
    o.scalar("ratio", ratio);
    o.scalar("peak", loc.peak);
    o.check("rate_within_25pct", (ratio - 1.0).abs() <= 0.25);
    o.check("rate_above_half", ratio > 0.5);
    let rows: Vec<Vec<String>> =
        loc.profile.iter().map(|s| vec![f(s.t), f(s.log_abs_y), f(s.log_envelope)]).collect();
    o.csv("profile.csv", &["t", "log_abs_y", "log_envelope"], &rows);
    let summary = serde_json::json!({
        "energy": loc.energy,
        "bracket": [loc.bracket.0, loc.bracket.1],
        "bisection_steps": loc.bisection_steps,
        "peak": loc.peak,
        "decay_rate": loc.decay_rate,
        "fitted_slope": -loc.decay_rate,
        "fit_points": loc.fit_points,
        "lyapunov": l,
        "ratio": ratio,
    });
    o.json("localize.json", serde_json::to_string_pretty(&summary).expect("json"));
    o.plots.push(("profile.csv".into(), PlotKind::Profile));
    Ok(o)
}

fn faber(ctx: &Ctx) -> LabResult<Outcome> {
    let cfg = ctx.cfg;
    let mut o = Outcome::new();
    let surrogate = match &cfg.params.surrogate_file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
            TransferSurrogate::from_json(&text).map_err(|e| ctx.err(e))?
        }
        None => {
            let iv = ctx.interval();
            let n = cfg.params.degree.unwrap_or_else(|| degree_bound(iv, cfg.params.t_range, cfg.params.degree_constant));
            let mut opts = cfg.params.surrogate.clone();
            opts.theta = cfg.theta.clone();
            opts.omega = cfg.omega.clone();
            opts.energy = cfg.energy;
            let window = (cfg.energy_window[0], cfg.energy_window[1]);
            transfer_surrogate(&ctx.p, iv, cfg.params.t_range, window, n, &opts, &ctx.tol).map_err(|e| ctx.err(e))?
        }
    };
    o.scalar("degree", surrogate.entries[0].degree as f64);
    o.scalar("deviation", surrogate.deviation);
    o.scalar("budget", surrogate.options.budget);
    o.scalar("quad_points", surrogate.quad_points as f64);
    o.scalar("error_cert_max", surrogate.entries.iter().map(|e| e.error_cert).fold(0.0, f64::max));
    o.check("deviation_within_budget", surrogate.deviation <= surrogate.options.budget);
    o.json("surrogate.json", surrogate.to_json());
    for (k, e) in surrogate.entries.iter().enumerate() {
        o.json(&format!("entry_{}{}.json", k / 2, k % 2), e.to_json());
    }
    // evaluate along the first active variable, others at their frozen values
    let sp = AnalyticPotential::from_json(&surrogate.potential).map_err(|e| ctx.err(e))?;
    let opts = &surrogate.options;
    let var = surrogate.variables[0];
    let (lo, hi) = match var {
        Variable::Theta(_) => (0.0, 1.0),
        Variable::Omega(i) => (opts.omega[i] - opts.omega_halfwidth, opts.omega[i] + opts.omega_halfwidth),
        Variable::Energy => surrogate.energy_window,
    };
    let m = cfg.params.eval_points.max(2);
    let mut rows = Vec::with_capacity(m);
    let mut worst = 0.0f64;
    for k in 0..m {
        let x = lo + (hi - lo) * k as f64 / (m - 1) as f64;
        let (mut th, mut om, mut en) = (opts.theta.clone(), opts.omega.clone(), opts.energy);
        match var {
            Variable::Theta(i) => th[i] = x,
            Variable::Omega(i) => om[i] = x,
            Variable::Energy => en = x,
        }
        let direct = transfer_matrix_at(&sp, surrogate.interval, &th, &om, en, &ctx.tol).map_err(|e| ctx.err(e))?.log_norm();
        let sur = surrogate.half_log_p(&th, &om, en);
        worst = worst.max((direct - sur).abs());
        rows.push(vec![f(x), f(direct), f(sur), f(direct - sur)]);
    }
    o.scalar("eval_deviation", worst);
    o.check("eval_within_budget", worst <= opts.budget);
    o.csv("surrogate_eval.csv", &["x", "log_norm", "half_log_p", "difference"], &rows);
    Ok(o)
}

fn dc(ctx: &Ctx) -> LabResult<Outcome> {
    let cfg = ctx.cfg;
    let mut o = Outcome::new();
    let spec = DiophantineSpec::new(cfg.params.dc_c, cfg.params.dc_a, cfg.omega.len()).map_err(|e| ctx.err(e))?;
    let r = dc_membership(&cfg.omega, &spec, cfg.params.dc_t).map_err(|e| ctx.err(e))?;
    o.scalar("margin", r.margin);
    o.note("worst_k", format!("{:?}", r.worst_k));
    o.check("member", r.ok);
    o.json("dc.json", serde_json::to_string_pretty(&r).expect("json"));
    Ok(o)
}

/// Log-spaced checkpoints `2, …, n_max`.
fn checkpoints(n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut n = 2u64;
    while n < n_max {
        out.push(n);
        n = ((n as f64) * 10f64.powf(0.25)).ceil() as u64;
    }
    out.push(n_max);
    out
}

fn discrepancy(ctx: &Ctx) -> LabResult<Outcome> {
    let cfg = ctx.cfg;
    let mut o = Outcome::new();
    let c = cfg.params.log_constant;
    let mut rows = Vec::new();
    let mut ok = true;
    let region = UnitBox::new(vec![0.0; cfg.omega.len()], vec![0.5; cfg.omega.len()]).map_err(|e| ctx.err(e))?;
    for n in checkpoints(cfg.params.n_max.max(2)) {
        let err = if cfg.omega.len() == 1 {
            star_discrepancy(cfg.omega[0], n)
        } else {
            discrepancy_count(&cfg.omega, n, &region).map_err(|e| ctx.err(e))?.1
        };
        let bound = c * (n as f64).ln().powi(cfg.omega.len() as i32);
        ok &= err <= bound;
        rows.push(vec![n.to_string(), f(err), f(bound)]);
    }
    o.scalar("log_constant", c);
    o.check("within_bound", ok);
    o.csv("discrepancy.csv", &["n", "error", "bound"], &rows);
    Ok(o)
}

fn orbitcount(ctx: &Ctx) -> LabResult<Outcome> {
    let cfg = ctx.cfg;
    let iv = ctx.interval();
    let mut o = Outcome::new();
    let params = cfg.ldt_params();
    let s = ldt_sample(&ctx.p, iv, &cfg.omega, cfg.energy, &params, &ctx.tol).map_err(|e| ctx.err(e))?;
    let n = cfg.params.n_max;
    let norms = shifted_log_norms(&ctx.p, iv, &cfg.theta, &cfg.omega, cfg.energy, 1, n, &ctx.tol).map_err(|e| ctx.err(e))?;
    let centre = iv.len() * s.lyapunov;
    let hit = |k: u64| (norms[(k - 1) as usize] - centre).abs() >= s.threshold;
    let r = orbit_hit_count(&cfg.omega, &cfg.theta, n, |k, _| hit(k), cfg.params.delta).map_err(|e| ctx.err(e))?;
    o.scalar("hits", r.hits as f64);
    o.scalar("allowance", (n as f64).powf(1.0 - r.delta));
    o.scalar("ldt_measure", s.measure());
    o.check("sublinear", r.passes);
    let rows: Vec<Vec<String>> = (1..=n)
        .filter(|&k| hit(k))
        .map(|k| vec![k.to_string(), f(norms[(k - 1) as usize]), f(norms[(k - 1) as usize] - centre)])
        .collect();
    o.csv("orbit_hits.csv", &["n", "log_norm", "excess"], &rows);
    Ok(o)
}

fn resonance(ctx: &Ctx) -> LabResult<Outcome> {
    let cfg = ctx.cfg;
    let ivs = cfg.intervals();
    let i_iv = ivs[0];
    let j_iv = match (cfg.params.j_interval, ivs.get(1)) {
        (Some([a, b]), _) => Interval::new(a, b).map_err(|e| ctx.err(e))?,
        (None, Some(j)) => *j,
        (None, None) => i_iv,
    };
    let opts = ResonanceOptions { sigma: cfg.params.sigma, grid_points: cfg.grid_points };
    let energies = cfg.energies();
    let [n_lo, n_hi] = cfg.params.n_range;
    let rep = resonance_scan(&ctx.p, i_iv, j_iv, &cfg.theta, &cfg.omega, &energies, (n_lo, n_hi), cfg.params.gamma, &opts, &ctx.tol)
        .map_err(|e| ctx.err(e))?;
    let mut o = Outcome::new();
    o.scalar("hits", rep.hits.len() as f64);
    o.scalar("fraction", rep.fraction);
    o.scalar("below_floor", rep.below_floor.len() as f64);
    o.note("label", "demonstration at a single frequency; not a measure statement over ω");
    o.note("scan_note", &rep.note);
    let rows: Vec<Vec<String>> =
        rep.hits.iter().map(|h| vec![f(h.energy), h.n.to_string(), f(h.excess_j), f(h.excess_i)]).collect();
    o.csv("resonance.csv", &["energy", "n", "excess_j", "excess_i"], &rows);
    Ok(o)
}
