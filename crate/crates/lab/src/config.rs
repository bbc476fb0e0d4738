//! Experiment configuration, loaded from TOML or JSON.

use std::path::{Path, PathBuf};

use quasiloc::faber::SurrogateOptions;
use quasiloc::lyapunov::LdtParams;
use quasiloc::potential::PotentialDescription;
use quasiloc::transfer::{Interval, IntegratorConfig};
use quasiloc::AnalyticPotential;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, LabResult};

pub fn golden() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Transfer,
    Lyapunov,
    Ldt,
    Ap,
    Green,
    Localize,
    Faber,
    Dc,
    Discrepancy,
    Orbitcount,
    ResonanceScan,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Transfer => "transfer",
            Experiment::Lyapunov => "lyapunov",
            Experiment::Ldt => "ldt",
            Experiment::Ap => "ap",
            Experiment::Green => "green",
            Experiment::Localize => "localize",
            Experiment::Faber => "faber",
            Experiment::Dc => "dc",
            Experiment::Discrepancy => "discrepancy",
            Experiment::Orbitcount => "orbitcount",
            Experiment::ResonanceScan => "resonance-scan",
        }
    }
}

/// A preset name (`cosine:K`, `zero`, `zero:d`), a JSON file, or an inline
/// description.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Preset(String),
    File { file: PathBuf },
    Inline(PotentialDescription),
}

impl Default for PotentialSpec {
    fn default() -> Self {
        PotentialSpec::Preset("cosine:2".into())
    }
}

impl PotentialSpec {
    pub fn resolve(&self) -> LabResult<AnalyticPotential> {
        let module = |e| LabError::module("potential", e);
        match self {
            PotentialSpec::Preset(s) => AnalyticPotential::from_preset(s).map_err(module),
            PotentialSpec::File { file } => {
                let text = std::fs::read_to_string(file).map_err(|e| LabError::io(file, e))?;
                AnalyticPotential::from_json(&text).map_err(module)
            }
            PotentialSpec::Inline(desc) => AnalyticPotential::try_from(desc.clone()).map_err(module),
        }
    }
}

/// Knobs used by one or two experiments each.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// transfer: spacing of the sampled `M_[a,t]` table; 0 disables it.
    pub sample_step: f64,
    /// lyapunov: scan `energy_window` with `energy_count` points instead of
    /// using `energy`.
    pub scan_energy: bool,
    /// ap
    pub survey_count: usize,
    pub block_len: f64,
    /// green, decay windows and resonance floor
    pub k_budget: f64,
    pub gamma: f64,
    pub green_points: usize,
    /// localize: explicit bracket; otherwise the sign change of `v_a(b)`
    /// nearest to `energy` inside `energy_window`
    pub bracket: Option<[f64; 2]>,
    pub bracket_step: f64,
    /// faber
    pub degree: Option<usize>,
    pub degree_constant: f64,
    pub t_range: f64,
    pub surrogate: SurrogateOptions,
    pub surrogate_file: Option<PathBuf>,
    pub eval_points: usize,
    /// dc
    pub dc_c: f64,
    pub dc_a: f64,
    pub dc_t: f64,
    /// discrepancy and orbitcount
    pub n_max: u64,
    pub log_constant: f64,
    pub delta: f64,
    /// resonance-scan
    pub j_interval: Option<[f64; 2]>,
    pub n_range: [u64; 2],
    pub sigma: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            sample_step: 0.0,
            scan_energy: false,
            survey_count: 100,
            block_len: 8.0,
            k_budget: 8.0,
            gamma: 0.1,
            green_points: 21,
            bracket: None,
            bracket_step: 0.1,
            degree: None,
            degree_constant: 1.0 / 128.0,
            t_range: 1.0,
            surrogate: SurrogateOptions::default(),
            surrogate_file: None,
            eval_points: 101,
            dc_c: 0.2,
            dc_a: 2.0,
            dc_t: 100.0,
            n_max: 100_000,
            log_constant: 3.0,
            delta: 0.1,
            j_interval: None,
            n_range: [1, 200],
            sigma: 0.25,
        }
    }
}

fn default_ldt() -> LdtParams {
    LdtParams { epsilon: 0.5, sigma: 0.25, sample_count: 1000, seed: 0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<Experiment>,
    pub potential: PotentialSpec,
    pub omega: Vec<f64>,
    pub theta: Vec<f64>,
    pub eta: Vec<f64>,
    pub energy: f64,
    pub energy_window: [f64; 2],
    pub energy_count: usize,
    pub intervals: Vec<[f64; 2]>,
    pub grid_points: usize,
    #[serde(default = "default_ldt")]
    pub ldt: LdtParams,
    pub tolerances: IntegratorConfig,
    pub output_dir: PathBuf,
    /// Scrambling seed for low-discrepancy samples; overrides `ldt.seed`
    /// when nonzero.
    pub seed: u64,
    pub params: Params,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            potential: PotentialSpec::default(),
            omega: vec![golden()],
            theta: vec![0.0],
            eta: vec![0.0],
            energy: 0.0,
            energy_window: [-4.0, 4.0],
            energy_count: 41,
            intervals: vec![[0.0, 20.0]],
            grid_points: 64,
            ldt: default_ldt(),
            tolerances: IntegratorConfig::default(),
            output_dir: PathBuf::from("quasiloc-out"),
            seed: 0,
            params: Params::default(),
        }
    }
}

fn schema(field: String, message: impl ToString) -> LabError {
    LabError::Schema { field: if field.is_empty() || field == "." { "(root)".into() } else { field }, message: message.to_string() }
}

impl ExperimentConfig {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> LabResult<Self> {
        if text.trim_start().starts_with('{') {
            let de = &mut serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(de).map_err(|e| schema(e.path().to_string(), e.inner()))
        } else {
            let de = toml::Deserializer::new(text);
            serde_path_to_error::deserialize(de).map_err(|e| schema(e.path().to_string(), e.inner().message()))
        }
    }

    /// Reads and validates a config file. Relative file references resolve
    /// against the file's directory.
    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let PotentialSpec::File { file } = &mut cfg.potential {
            rebase(file);
        }
        if let Some(f) = &mut cfg.params.surrogate_file {
            rebase(f);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> LabResult<()> {
        let p = self.potential.resolve()?;
        let d = p.dim();
        let dim = |field: &str, v: &[f64]| {
            if v.len() != d {
                Err(schema(field.into(), format!("expected {d} entries, found {}", v.len())))
            } else {
                Ok(())
            }
        };
        dim("omega", &self.omega)?;
        dim("theta", &self.theta)?;
        dim("eta", &self.eta)?;
        if self.intervals.is_empty() {
            return Err(schema("intervals".into(), "the interval schedule is empty"));
        }
        for (i, iv) in self.intervals.iter().enumerate() {
            Interval::new(iv[0], iv[1]).map_err(|e| schema(format!("intervals[{i}]"), e))?;
        }
        if self.energy_window[0] > self.energy_window[1] {
            return Err(schema("energy_window".into(), "E′ exceeds E″"));
        }
        if self.grid_points == 0 {
            return Err(schema("grid_points".into(), "must be positive"));
        }
        self.tolerances.validate().map_err(|e| schema("tolerances".into(), e))?;
        self.ldt_params().validate().map_err(|e| schema("ldt".into(), e))?;
        if let Some(f) = &self.params.surrogate_file {
            if !f.exists() {
                return Err(schema("params.surrogate_file".into(), format!("{} does not exist", f.display())));
            }
        }
        Ok(())
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.intervals.iter().map(|iv| Interval { a: iv[0], b: iv[1] }).collect()
    }

    pub fn ldt_params(&self) -> LdtParams {
        let mut p = self.ldt;
        if self.seed != 0 {
            p.seed = self.seed;
        }
        p
    }

    /// `energy_count` evenly spaced energies across the window.
    pub fn energies(&self) -> Vec<f64> {
        let [lo, hi] = self.energy_window;
        let n = self.energy_count.max(1);
        if n == 1 {
            return vec![lo];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    /// The config as JSON with the potential replaced by its resolved
    /// description and the output directory dropped. Object keys are sorted.
    pub fn canonical_json(&self) -> LabResult<String> {
        let p = self.potential.resolve()?;
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("config is an object");
        obj.remove("output_dir");
        obj.insert("potential".into(), serde_json::from_str(&p.to_json()).expect("potential JSON"));
        if let Some(path) = &self.params.surrogate_file {
            let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
            obj["params"]["surrogate_file"] = serde_json::Value::String(text);
        }
        Ok(v.to_string())
    }
}
