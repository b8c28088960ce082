use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channels::{make_channel, ChannelFamily, DiscriminationInstance};
use crate::error::{Error, Result};
use crate::metrology::{GridKind, DEFAULT_PATH_POINTS};
use crate::seesaw::SeesawOptions;
use crate::tensor::KrausChannel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Seesaw,
    QfiBound,
    UnitaryBound,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Seesaw => "seesaw",
            Method::QfiBound => "qfi_bound",
            Method::UnitaryBound => "unitary_bound",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Method::Exact, Method::Seesaw, Method::QfiBound, Method::UnitaryBound].into_iter().find(|m| m.name() == s)
    }

    pub fn is_bound(&self) -> bool {
        matches!(self, Method::QfiBound | Method::UnitaryBound)
    }
}

/// A channel from a family evaluated at a fixed parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedChannel {
    pub model: ChannelFamily,
    #[serde(default)]
    pub theta: f64,
}

/// Which channels are discriminated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    /// `C_{θ0}` against `C_{θ0 + Δθ}` for every listed `Δθ`.
    Phase {
        model: ChannelFamily,
        delta_theta: Vec<f64>,
        #[serde(default)]
        theta0: f64,
    },
    /// An explicit list of channels.
    Fixed { list: Vec<FixedChannel> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeesawConfig {
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    #[serde(default = "defaults::stall_cycles")]
    pub stall_cycles: usize,
    #[serde(default = "defaults::max_cycles")]
    pub max_cycles: usize,
    #[serde(default = "defaults::restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SeesawConfig {
    fn default() -> Self {
        let d = SeesawOptions::default();
        Self { epsilon: d.epsilon, stall_cycles: d.stall_cycles, max_cycles: d.max_cycles, restarts: d.restarts, seed: d.seed }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSetting {
    Uniform,
    #[default]
    Cosine,
}

impl From<GridSetting> for GridKind {
    fn from(g: GridSetting) -> Self {
        match g {
            GridSetting::Uniform => GridKind::Uniform,
            GridSetting::Cosine => GridKind::Cosine,
        }
    }
}

/// Settings for the path-integrated bound between fixed channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    #[serde(default = "defaults::grid_points")]
    pub grid_points: usize,
    #[serde(default)]
    pub grid: GridSetting,
    #[serde(default = "defaults::fd_step")]
    pub fd_step: f64,
    #[serde(default = "defaults::rank_tol")]
    pub rank_tol: f64,
    #[serde(default)]
    pub exclude_flagged: bool,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            grid_points: defaults::grid_points(),
            grid: GridSetting::default(),
            fd_step: defaults::fd_step(),
            rank_tol: defaults::rank_tol(),
            exclude_flagged: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default = "defaults::yes")]
    pub plot_data: bool,
    /// Wall-clock times make the output differ between runs, so they are
    /// only written on request.
    #[serde(default)]
    pub timings: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { format: OutputFormat::Csv, plot_data: true, timings: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub channels: ChannelSpec,
    /// Equal priors when absent.
    #[serde(default)]
    pub priors: Option<Vec<f64>>,
    /// Inclusive `[first, last]`; empty when `first > last`.
    #[serde(default)]
    pub n_range: Option<[usize; 2]>,
    #[serde(default)]
    pub n_values: Option<Vec<usize>>,
    #[serde(default = "defaults::d_anc")]
    pub d_anc: Vec<usize>,
    pub methods: Vec<Method>,
    /// Exact cells with more uses are reported as skipped. The dense size
    /// cap applies regardless.
    #[serde(default)]
    pub exact_max_n: Option<usize>,
    #[serde(default)]
    pub seesaw: SeesawConfig,
    #[serde(default)]
    pub bound: BoundConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

mod defaults {
    use crate::seesaw::SeesawOptions;

    pub fn epsilon() -> f64 {
        SeesawOptions::default().epsilon
    }
    pub fn stall_cycles() -> usize {
        SeesawOptions::default().stall_cycles
    }
    pub fn max_cycles() -> usize {
        SeesawOptions::default().max_cycles
    }
    pub fn restarts() -> usize {
        SeesawOptions::default().restarts
    }
    pub fn grid_points() -> usize {
        super::DEFAULT_PATH_POINTS
    }
    pub fn fd_step() -> f64 {
        1e-7
    }
    pub fn rank_tol() -> f64 {
        1e-12
    }
    pub fn yes() -> bool {
        true
    }
    pub fn d_anc() -> Vec<usize> {
        vec![1]
    }
}

/// One pair (or list) of channels to discriminate, labelled by its `Δθ`
/// for phase-encoded scenarios.
#[derive(Debug, Clone)]
pub struct Instance {
    pub delta_theta: Option<f64>,
    pub inst: DiscriminationInstance,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn channel_count(&self) -> usize {
        match &self.channels {
            ChannelSpec::Phase { .. } => 2,
            ChannelSpec::Fixed { list } => list.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.name.trim().is_empty() {
            return bad("scenario name is empty".into());
        }
        if self.methods.is_empty() {
            return bad("no methods requested".into());
        }
        match &self.channels {
            ChannelSpec::Phase { model, delta_theta, theta0 } => {
                make_channel(*model)?;
                if !model.is_phase_encoded() {
                    return bad(format!("{} does not depend on the rotation angle", model.name()));
                }
                if delta_theta.is_empty() {
                    return bad("delta_theta is empty".into());
                }
                if delta_theta.iter().chain([theta0]).any(|v| !v.is_finite()) {
                    return bad("angles must be finite".into());
                }
                if delta_theta.iter().any(|&v| v == 0.0) {
                    return bad("delta_theta = 0 gives identical channels".into());
                }
            }
            ChannelSpec::Fixed { list } => {
                if list.len() < 2 {
                    return bad("need at least two channels".into());
                }
                for ch in list {
                    make_channel(ch.model)?;
                }
                if self.methods.contains(&Method::UnitaryBound) {
                    return bad("unitary_bound needs a phase-encoded scenario".into());
                }
                if self.methods.contains(&Method::QfiBound) && list.len() != 2 {
                    return bad("qfi_bound between fixed channels needs exactly two".into());
                }
            }
        }
        if let Some(p) = &self.priors {
            if p.len() != self.channel_count() {
                return bad(format!("{} priors for {} channels", p.len(), self.channel_count()));
            }
            if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return bad("priors must be nonnegative and sum to 1".into());
            }
        }
        if self.methods.iter().any(Method::is_bound) && !self.equal_priors() {
            return bad("the bounds assume equal priors".into());
        }
        match (&self.n_range, &self.n_values) {
            (Some(_), Some(_)) => return bad("give either n_range or n_values".into()),
            (None, None) => return bad("missing n_range or n_values".into()),
            _ => {}
        }
        if self.n_list().contains(&0) {
            return bad("number of uses must be at least 1".into());
        }
        if self.methods.contains(&Method::Seesaw) && (self.d_anc.is_empty() || self.d_anc.contains(&0)) {
            return bad("d_anc must list dimensions ≥ 1".into());
        }
        let s = &self.seesaw;
        if !(s.epsilon > 0.0) || s.stall_cycles == 0 || s.max_cycles == 0 || s.restarts == 0 {
            return bad("seesaw settings must be positive".into());
        }
        let b = &self.bound;
        if b.grid_points == 0 || !(b.fd_step > 0.0) || !(b.rank_tol > 0.0) {
            return bad("bound settings must be positive".into());
        }
        Ok(())
    }

    fn equal_priors(&self) -> bool {
        match &self.priors {
            None => true,
            Some(p) => p.iter().all(|&v| (v - p[0]).abs() < 1e-12),
        }
    }

    /// Numbers of uses, sorted and deduplicated.
    pub fn n_list(&self) -> Vec<usize> {
        let mut ns: Vec<usize> = match (&self.n_range, &self.n_values) {
            (Some([a, b]), _) => (*a..=*b).collect(),
            (None, Some(v)) => v.clone(),
            (None, None) => Vec::new(),
        };
        ns.sort_unstable();
        ns.dedup();
        ns
    }

    pub fn priors_or_equal(&self) -> Vec<f64> {
        let k = self.channel_count();
        self.priors.clone().unwrap_or_else(|| vec![1.0 / k as f64; k])
    }

    pub fn instances(&self) -> Result<Vec<Instance>> {
        let priors = self.priors_or_equal();
        match &self.channels {
            ChannelSpec::Phase { model, delta_theta, theta0 } => {
                let m = make_channel(*model)?;
                delta_theta
                    .iter()
                    .map(|&dt| {
                        let chans = vec![m.kraus_at(*theta0), m.kraus_at(theta0 + dt)];
                        Ok(Instance { delta_theta: Some(dt), inst: DiscriminationInstance::new(chans, priors.clone())? })
                    })
                    .collect()
            }
            ChannelSpec::Fixed { list } => {
                let chans = list
                    .iter()
                    .map(|ch| Ok(make_channel(ch.model)?.kraus_at(ch.theta)))
                    .collect::<Result<Vec<KrausChannel>>>()?;
                Ok(vec![Instance { delta_theta: None, inst: DiscriminationInstance::new(chans, priors)? }])
            }
        }
    }

    pub fn seesaw_options(&self) -> SeesawOptions {
        SeesawOptions {
            epsilon: self.seesaw.epsilon,
            stall_cycles: self.seesaw.stall_cycles,
            max_cycles: self.seesaw.max_cycles,
            restarts: self.seesaw.restarts,
            seed: self.seesaw.seed,
            solver: crate::sdp::SolverOptions::from_env(),
            initial: None,
        }
    }
}
