//! JSON experiment configuration.
//!
//! Every object rejects unknown keys; everything except `schema_version`
//! has a default, so `{"schema_version": 1}` is a complete config (an OU
//! problem with unit rate and noise).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use spde_lab::{
    make_degenerate_plaplacian, make_ou, make_porous_media, make_zero_b, sine_mode_noise, Grid1D, Mat, NoiseModel,
    NonlinearOperator, Problem, Scheme, SolverConfig,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Checkpoints for `ito-check`; empty means the horizon only.
    #[serde(default)]
    pub t_checks: Vec<f64>,
    /// CSV destination used when `--out` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub options: Options,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            problem: ProblemSpec::default(),
            solver: SolverSpec::default(),
            n_paths: default_n_paths(),
            master_seed: 0,
            t_checks: Vec::new(),
            output: None,
            options: Options::default(),
        }
    }
}

fn default_n_paths() -> usize {
    1000
}

/// Profile of the degenerate weight `b(x)` on `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightProfile {
    /// `b ≡ 1` (nondegenerate).
    Ones,
    /// `b = 0` on `x < 1/2`, `1` otherwise.
    Half,
    /// `b(x) = x`.
    Linear,
}

impl WeightProfile {
    fn weight(self, x: f64) -> f64 {
        match self {
            Self::Ones => 1.0,
            Self::Half => {
                if x < 0.5 {
                    0.0
                } else {
                    1.0
                }
            }
            Self::Linear => x,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// `du = −λu dt + σ dW` in `ℝᵈ`.
    Ou {
        #[serde(default = "one_usize")]
        dim: usize,
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "one")]
        sigma: f64,
        /// Defaults to all ones.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u0: Option<Vec<f64>>,
        #[serde(default = "one")]
        horizon: f64,
    },
    /// Porous media in inverse-Laplacian form on `n` interior nodes.
    PorousMedia {
        #[serde(default = "default_nodes")]
        n: usize,
        #[serde(default = "default_p")]
        p: f64,
        /// Noise `Q = diag(k^{−decay})`, columns `amplitude·sin(kπx)`, `k = 1..modes`.
        #[serde(default = "default_modes")]
        modes: usize,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "two")]
        decay: f64,
        /// `u₀ = initial_amplitude·sin(initial_mode·πx)`.
        #[serde(default = "one_usize")]
        initial_mode: usize,
        #[serde(default = "one")]
        initial_amplitude: f64,
        #[serde(default = "one")]
        horizon: f64,
    },
    /// p-Laplacian with a possibly vanishing weight `b`.
    DegeneratePlaplacian {
        #[serde(default = "default_nodes")]
        n: usize,
        #[serde(default = "default_p")]
        p: f64,
        #[serde(default = "default_profile")]
        b_profile: WeightProfile,
        /// Noise `Q = diag(k^{−decay})`, columns `amplitude·sin(kπx)`, `k = 1..modes`.
        #[serde(default = "default_modes")]
        modes: usize,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "two")]
        decay: f64,
        /// `u₀ = initial_amplitude·sin(initial_mode·πx)`.
        #[serde(default = "one_usize")]
        initial_mode: usize,
        #[serde(default = "one")]
        initial_amplitude: f64,
        #[serde(default = "one")]
        horizon: f64,
    },
    /// `B = 0`, `A(u) = rate·u`, `Φ` all ones.
    ZeroB {
        #[serde(default = "default_zero_b_dim")]
        dim: usize,
        #[serde(default = "one")]
        rate: f64,
        #[serde(default = "one_usize")]
        modes: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u0: Option<Vec<f64>>,
        #[serde(default = "one")]
        horizon: f64,
    },
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self::Ou { dim: 1, lambda: 1.0, sigma: 1.0, u0: None, horizon: 1.0 }
    }
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn one_usize() -> usize {
    1
}
fn default_nodes() -> usize {
    32
}
fn default_p() -> f64 {
    3.0
}
fn default_modes() -> usize {
    8
}
fn default_zero_b_dim() -> usize {
    3
}
fn default_profile() -> WeightProfile {
    WeightProfile::Half
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSpec {
    Explicit,
    ImplicitResolvent,
    PicardBall,
}

impl From<SchemeSpec> for Scheme {
    fn from(s: SchemeSpec) -> Self {
        match s {
            SchemeSpec::Explicit => Scheme::Explicit,
            SchemeSpec::ImplicitResolvent => Scheme::ImplicitResolvent,
            SchemeSpec::PicardBall => Scheme::PicardBall,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub scheme: SchemeSpec,
    pub epsilon: f64,
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    pub radius_base: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub picard_start_level: Option<u32>,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_grid_steps: Option<usize>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let c = SolverConfig::<f64>::default();
        Self {
            scheme: SchemeSpec::ImplicitResolvent,
            epsilon: c.epsilon,
            dt: c.dt,
            newton_tol: c.newton_tol,
            newton_max_iter: c.newton_max_iter,
            picard_tol: c.picard_tol,
            picard_max_iter: c.picard_max_iter,
            radius_base: [c.radius_base.0, c.radius_base.1],
            picard_start_level: c.picard_start_level,
            seed: c.seed,
            noise_grid_steps: c.noise_grid_steps,
        }
    }
}

impl SolverSpec {
    pub fn build(&self) -> SolverConfig<f64> {
        SolverConfig {
            scheme: self.scheme.into(),
            epsilon: self.epsilon,
            dt: self.dt,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
            picard_tol: self.picard_tol,
            picard_max_iter: self.picard_max_iter,
            radius_base: (self.radius_base[0], self.radius_base[1]),
            picard_start_level: self.picard_start_level,
            seed: self.seed,
            noise_grid_steps: self.noise_grid_steps,
        }
    }
}

/// Subcommand-specific knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// Bias allowance `κ·dt` of the expectation identity.
    pub kappa: f64,
    /// Slack `C·dt` of the energy inequality.
    pub slack: f64,
    pub qv_min_level: u32,
    pub qv_max_level: u32,
    pub qv_seeds: usize,
    /// Relative tolerance on `QV(T)` at the finest level.
    pub qv_tolerance: f64,
    pub isometry_level: u32,
    pub isometry_paths: usize,
    pub convergence_dts: Vec<f64>,
    pub convergence_seeds: Vec<u64>,
    pub convergence_band: [f64; 2],
    /// Shared fine noise grid for the convergence sweep.
    pub convergence_noise_steps: usize,
    /// Use the residual with the zero-mean noise fluctuation removed.
    pub convergence_reduced: bool,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            slack: 1.0,
            qv_min_level: 6,
            qv_max_level: 14,
            qv_seeds: 100,
            qv_tolerance: 0.05,
            isometry_level: 10,
            isometry_paths: 100_000,
            convergence_dts: vec![1.0 / 256.0, 1.0 / 512.0],
            convergence_seeds: (0..5).collect(),
            convergence_band: [1.3, 3.5],
            convergence_noise_steps: 4096,
            convergence_reduced: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            anyhow::anyhow!("invalid config at `{path}`: {}", e.into_inner())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            bail!("invalid config at `schema_version`: expected {SCHEMA_VERSION}, found {}", self.schema_version);
        }
        if !(self.solver.dt > 0.0) {
            bail!("invalid config at `solver.dt`: must be positive");
        }
        if self.solver.epsilon < 0.0 {
            bail!("invalid config at `solver.epsilon`: must be nonnegative");
        }
        if self.n_paths == 0 {
            bail!("invalid config at `n_paths`: must be at least 1");
        }
        let o = &self.options;
        if o.qv_min_level > o.qv_max_level {
            bail!("invalid config at `options.qv_min_level`: exceeds qv_max_level");
        }
        if o.convergence_dts.len() < 2 {
            bail!("invalid config at `options.convergence_dts`: need at least two step sizes");
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        match &self.problem {
            ProblemSpec::Ou { horizon, .. }
            | ProblemSpec::PorousMedia { horizon, .. }
            | ProblemSpec::DegeneratePlaplacian { horizon, .. }
            | ProblemSpec::ZeroB { horizon, .. } => *horizon,
        }
    }

    pub fn checkpoints(&self) -> Vec<f64> {
        if self.t_checks.is_empty() {
            vec![self.horizon()]
        } else {
            self.t_checks.clone()
        }
    }

    pub fn build_problem(&self) -> anyhow::Result<Problem<f64>> {
        Ok(match &self.problem {
            ProblemSpec::Ou { dim, lambda, sigma, u0, horizon } => {
                make_ou(*dim, *lambda, *sigma, u0.clone().unwrap_or_else(|| vec![1.0; *dim]), *horizon)?
            }
            ProblemSpec::PorousMedia { n, p, modes, amplitude, decay, initial_mode, initial_amplitude, horizon } => {
                let g = Grid1D::new(*n, 1.0)?;
                let noise = sine_mode_noise(&g, *modes, *amplitude, *decay)?;
                make_porous_media(&g, *p, noise, sine_initial(&g, *initial_mode, *initial_amplitude), *horizon)?
            }
            ProblemSpec::DegeneratePlaplacian {
                n,
                p,
                b_profile,
                modes,
                amplitude,
                decay,
                initial_mode,
                initial_amplitude,
                horizon,
            } => {
                let g = Grid1D::new(*n, 1.0)?;
                let profile = *b_profile;
                let noise = sine_mode_noise(&g, *modes, *amplitude, *decay)?;
                let u0 = sine_initial(&g, *initial_mode, *initial_amplitude);
                make_degenerate_plaplacian(&g, *p, move |x| profile.weight(x), noise, u0, *horizon)?
            }
            ProblemSpec::ZeroB { dim, rate, modes, u0, horizon } => {
                let noise = NoiseModel::constant(Mat::identity(*modes), Mat::from_fn(*dim, *modes, |_, _| 1.0))?;
                let a = NonlinearOperator::linear(Mat::identity(*dim).scale(*rate));
                make_zero_b(*dim, a, None, noise, u0.clone().unwrap_or_else(|| vec![1.0; *dim]), *horizon)?
            }
        })
    }
}

fn sine_initial(g: &Grid1D<f64>, mode: usize, amplitude: f64) -> Vec<f64> {
    g.sine_mode(mode).into_iter().map(|v| v * amplitude).collect()
}
