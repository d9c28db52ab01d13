use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::{ProbeOp, ProbeSpec, MAX_SQUEEZING};
use crate::state::{BathModel, ChannelParams, NoiseModel, DEFAULT_DIMENSION_CAP};

/// Experiment kinds a sweep can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    CbVsN,
    DeltaVsN,
    CbVsKappaSet,
    DeltaVsKappa,
    RobustnessP,
    DeltaVsPNoisyLine,
    FaultySqueezer,
    ImperfectSubtraction,
    MinEfficiency,
    CorrelationsVsP,
    EntanglementLimit,
}

impl Experiment {
    pub fn id(self) -> &'static str {
        match self {
            Experiment::CbVsN => "cb_vs_n",
            Experiment::DeltaVsN => "delta_vs_n",
            Experiment::CbVsKappaSet => "cb_vs_kappa_set",
            Experiment::DeltaVsKappa => "delta_vs_kappa",
            Experiment::RobustnessP => "robustness_p",
            Experiment::DeltaVsPNoisyLine => "delta_vs_p_noisy_line",
            Experiment::FaultySqueezer => "faulty_squeezer",
            Experiment::ImperfectSubtraction => "imperfect_subtraction",
            Experiment::MinEfficiency => "min_efficiency",
            Experiment::CorrelationsVsP => "correlations_vs_p",
            Experiment::EntanglementLimit => "entanglement_limit",
        }
    }
}

/// One probe family at a given squeezing. Explicit `k`/`l` pin the photon
/// counts; otherwise they follow the sweep's `n_range`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeEntry {
    pub op: ProbeOp,
    pub x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<u32>,
}

impl ProbeEntry {
    pub fn new(op: ProbeOp, x: f64) -> Self {
        ProbeEntry {
            op,
            x,
            k: None,
            l: None,
        }
    }

    pub fn is_pinned(&self) -> bool {
        self.k.is_some() || self.l.is_some()
    }

    /// Spec for ladder photon number `n`; zero photons yields the squeezed vacuum.
    pub fn spec(&self, n: u32) -> ProbeSpec<f64> {
        let mut spec = self.op.with_photons(n, self.x);
        if let Some(k) = self.k {
            spec.k = k;
        }
        if let Some(l) = self.l {
            spec.l = l;
        }
        if spec.k == 0 && spec.l == 0 {
            ProbeSpec::tmsv(self.x)
        } else {
            spec
        }
    }

    /// Row label: the family name with the photon counts actually applied.
    pub fn descriptor(&self, n: u32) -> String {
        let spec = self.spec(n);
        format!("{}(k={},l={})", self.op, spec.k, spec.l)
    }
}

/// Local Gaussian noise parameters; `p` applies when the experiment does not
/// sweep the mixing weight itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub p: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            p: 0.0,
            sigma1: 1.0,
            sigma2: 1.0,
        }
    }
}

impl NoiseConfig {
    /// Model at mixing weight `p`; `None` when `p == 0`.
    pub fn at(&self, p: f64) -> NoiseModel<f64> {
        if p == 0.0 {
            NoiseModel::None
        } else {
            NoiseModel::LocalGaussian {
                p,
                sigma1: self.sigma1,
                sigma2: self.sigma2,
            }
        }
    }
}

/// Declarative sweep read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub experiment: Experiment,
    pub probes: Vec<ProbeEntry>,
    pub kappa: Vec<f64>,
    pub n_bath: f64,
    pub bath: BathModel,
    pub noise: NoiseConfig,
    /// Inclusive `[lo, hi]` photon-number range.
    pub n_range: [u32; 2],
    /// Mixing weights swept by the noise experiments.
    pub p_values: Vec<f64>,
    /// Grid step of the threshold search.
    pub p_step: f64,
    /// Delivered squeezing values of the faulty-generator experiment.
    pub x_actual: Vec<f64>,
    /// Weights of the unmodified squeezed vacuum in the imperfect-operation mixture.
    pub p_double_prime: Vec<f64>,
    /// Signal strengths of the entanglement-limit table.
    pub n_s_grid: Vec<f64>,
    pub output_path: Option<PathBuf>,
    pub parallelism: usize,
    pub dimension_cap: usize,
    pub refine_p_star: bool,
    /// Adds per-row wall time to the output; off for byte-stable files.
    pub timings: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            experiment: Experiment::CbVsN,
            probes: Vec::new(),
            kappa: vec![0.01],
            n_bath: 1.0,
            bath: BathModel::default(),
            noise: NoiseConfig::default(),
            n_range: [1, 5],
            p_values: grid(0.0, 1.0, 0.1),
            p_step: 0.1,
            x_actual: Vec::new(),
            p_double_prime: Vec::new(),
            n_s_grid: Vec::new(),
            output_path: None,
            parallelism: 1,
            dimension_cap: DEFAULT_DIMENSION_CAP,
            refine_p_star: false,
            timings: false,
        }
    }
}

/// `lo, lo + step, ..., hi` with each point rounded to 12 decimals.
pub fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=count)
        .map(|i| ((lo + i as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SweepConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn n_values(&self) -> Vec<u32> {
        (self.n_range[0]..=self.n_range[1]).collect()
    }

    pub fn channel(&self, kappa: f64) -> Result<ChannelParams<f64>> {
        ChannelParams::with_bath(kappa, self.n_bath, self.bath)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_range[0] > self.n_range[1] {
            return bad(format!("n_range {:?} is empty", self.n_range));
        }
        if self.n_range[1] > 10 {
            return bad(format!("n_range upper end {} exceeds 10", self.n_range[1]));
        }
        for probe in &self.probes {
            if !(0.0..=MAX_SQUEEZING).contains(&probe.x) {
                return bad(format!(
                    "probe squeezing {} outside [0, {MAX_SQUEEZING}]",
                    probe.x
                ));
            }
            for n in self.n_values() {
                probe
                    .spec(n)
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        if self.kappa.is_empty() && self.experiment != Experiment::EntanglementLimit {
            return bad("kappa list is empty".into());
        }
        for &kappa in &self.kappa {
            self.channel(kappa)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(p) = self.p_values.iter().find(|p| !in_unit(**p)) {
            return bad(format!("mixing weight {p} outside [0, 1]"));
        }
        if !in_unit(self.noise.p) {
            return bad(format!("noise.p = {} outside [0, 1]", self.noise.p));
        }
        if !(self.noise.sigma1 > 0.0 && self.noise.sigma2 > 0.0) {
            return bad("noise widths must be positive".into());
        }
        let steps = 1.0 / self.p_step;
        if !(self.p_step > 0.0 && self.p_step <= 1.0 && (steps - steps.round()).abs() < 1e-9) {
            return bad(format!("p_step = {} must divide [0, 1]", self.p_step));
        }
        if let Some(x) = self.x_actual.iter().find(|x| !(**x >= 0.0)) {
            return bad(format!("delivered squeezing {x} must be >= 0"));
        }
        if let Some(p) = self.p_double_prime.iter().find(|p| !in_unit(**p)) {
            return bad(format!("p'' = {p} outside [0, 1]"));
        }
        if self.n_s_grid.windows(2).any(|w| w[1] <= w[0])
            || self.n_s_grid.iter().any(|v| !(*v > 0.0))
        {
            return bad("n_s_grid must be positive and strictly increasing".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism must be >= 1".into());
        }
        if self.dimension_cap == 0 {
            return bad("dimension_cap must be >= 1".into());
        }
        Ok(())
    }
}
