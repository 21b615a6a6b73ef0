//! TOML run configuration: a `[problem]` block shared by every
//! subcommand, a `[grid]`/`[output]` block, and one optional block per
//! task. Unknown keys are rejected with the offending name so typos
//! surface as validation errors rather than silently applied defaults.

use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use degen_rd::climate::{
    ClimateCoupling, CoalbedoModel, EmissionModel, InsolationProfile, ScenarioConfig,
};
use degen_rd::{
    BoundaryCondition, DiffusionProfile, Nonlinearity, PiecewiseStaticControl, Scheme,
    SpatialGrid, StateVector,
};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub output: OutputSection,
    pub spectrum: Option<SpectrumSection>,
    pub simulate: Option<SimulateSection>,
    pub synthesize: Option<SynthesizeSection>,
    pub verify: Option<VerifySection>,
    pub climate: Option<ClimateSection>,
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    /// "legendre" (1 - x^2), "sqrt" ((1 - x^2)^(1/2)), or "power".
    pub profile: String,
    /// Exponent for the "power" profile (1 - x^2)^exponent.
    pub exponent: Option<f64>,
    /// "weighted-neumann" or "robin".
    pub bc: String,
    /// Robin coefficients [b0, b1, g0, g1] for
    /// b0 u(-1) + b1 (a u_x)(-1) = 0, g0 u(1) + g1 (a u_x)(1) = 0.
    pub robin: Option<[f64; 4]>,
    /// "zero", "power-decay" (params [delta, theta]), or
    /// "sellers-ramp" (params [c, lo, hi, switch, width]).
    pub reaction: String,
    pub reaction_params: Option<Vec<f64>>,
}

impl Default for ProblemSection {
    fn default() -> Self {
        Self {
            profile: "legendre".into(),
            exponent: None,
            bc: "weighted-neumann".into(),
            robin: None,
            reaction: "zero".into(),
            reaction_params: None,
        }
    }
}

impl ProblemSection {
    pub fn diffusion(&self) -> Result<DiffusionProfile> {
        match self.profile.as_str() {
            "legendre" => {
                require_absent(self.exponent.is_none(), "problem.exponent", "legendre")?;
                Ok(DiffusionProfile::legendre())
            }
            "sqrt" => {
                require_absent(self.exponent.is_none(), "problem.exponent", "sqrt")?;
                Ok(DiffusionProfile::sqrt_profile())
            }
            "power" => {
                let eta = self
                    .exponent
                    .ok_or_else(|| anyhow!("problem.profile = \"power\" needs problem.exponent"))?;
                Ok(DiffusionProfile::power(eta)?)
            }
            other => bail!("unknown problem.profile {other:?} (legendre, sqrt, power)"),
        }
    }

    pub fn boundary(&self) -> Result<BoundaryCondition> {
        match self.bc.as_str() {
            "weighted-neumann" => {
                require_absent(self.robin.is_none(), "problem.robin", "weighted-neumann")?;
                Ok(BoundaryCondition::WeightedNeumann)
            }
            "robin" => {
                let [b0, b1, g0, g1] = self
                    .robin
                    .ok_or_else(|| anyhow!("problem.bc = \"robin\" needs problem.robin"))?;
                Ok(BoundaryCondition::robin(b0, b1, g0, g1)?)
            }
            other => bail!("unknown problem.bc {other:?} (weighted-neumann, robin)"),
        }
    }

    pub fn reaction(&self) -> Result<Nonlinearity> {
        let params = self.reaction_params.as_deref().unwrap_or(&[]);
        match self.reaction.as_str() {
            "zero" => {
                require_absent(params.is_empty(), "problem.reaction_params", "zero")?;
                Ok(Nonlinearity::zero())
            }
            "power-decay" => match params {
                [delta, theta] => Ok(Nonlinearity::power_decay(*delta, *theta)?),
                _ => bail!("power-decay reaction needs reaction_params = [delta, theta]"),
            },
            "sellers-ramp" => match params {
                [c, lo, hi, us, eta] => {
                    Ok(Nonlinearity::sellers_ramp_term(*c, *lo, *hi, *us, *eta)?)
                }
                _ => bail!(
                    "sellers-ramp reaction needs reaction_params = [c, lo, hi, switch, width]"
                ),
            },
            other => bail!("unknown problem.reaction {other:?} (zero, power-decay, sellers-ramp)"),
        }
    }
}

fn require_absent(ok: bool, key: &str, chosen: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        bail!("{key} is not used with {chosen:?}; remove it")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_cells: usize,
    pub dt: f64,
    pub t_final: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_cells: 200, dt: 1e-3, t_final: 1.0 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    /// Keep every k-th time step in trajectory files (0 = endpoints only).
    pub state_stride: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: "out".into(), state_stride: 10 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub n_modes: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub initial: StateSpec,
    #[serde(default)]
    pub control: ControlSpec,
    /// "implicit-euler" (default) or "crank-nicolson".
    pub scheme: Option<String>,
}

impl SimulateSection {
    pub fn scheme(&self) -> Result<Scheme> {
        match self.scheme.as_deref() {
            None | Some("implicit-euler") => Ok(Scheme::ImplicitEulerImex),
            Some("crank-nicolson") => Ok(Scheme::CrankNicolsonImex),
            Some(other) => {
                bail!("unknown simulate.scheme {other:?} (implicit-euler, crank-nicolson)")
            }
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesizeSection {
    pub initial: StateSpec,
    pub target: StateSpec,
    pub epsilon: f64,
    /// When true, epsilon is a fraction of the target's weighted L2 norm.
    #[serde(default)]
    pub epsilon_relative: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Path of the stored plan, relative to the working directory.
    pub plan: String,
    /// Re-verify on a different resolution (default: the plan's own).
    pub n_cells: Option<usize>,
    /// Multiply the replay steps by this factor (default 1.0).
    pub dt_scale: Option<f64>,
}

/// Nodal data families for initial states and targets.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    /// "constant", "cosine", "raised-cosine", "gaussian", or "nodes".
    pub kind: String,
    pub value: Option<f64>,
    pub mean: Option<f64>,
    pub amplitude: Option<f64>,
    pub frequency: Option<f64>,
    pub width: Option<f64>,
    pub values: Option<Vec<f64>>,
}

impl StateSpec {
    pub fn build(&self, grid: &Arc<SpatialGrid>) -> Result<StateVector> {
        let fields: &[(&str, bool)] = &[
            ("value", self.value.is_some()),
            ("mean", self.mean.is_some()),
            ("amplitude", self.amplitude.is_some()),
            ("frequency", self.frequency.is_some()),
            ("width", self.width.is_some()),
            ("values", self.values.is_some()),
        ];
        let allowed: &[&str] = match self.kind.as_str() {
            "constant" => &["value"],
            "cosine" => &["mean", "amplitude", "frequency"],
            "raised-cosine" => &["amplitude"],
            "gaussian" => &["amplitude", "width"],
            "nodes" => &["values"],
            other => bail!(
                "unknown state kind {other:?} (constant, cosine, raised-cosine, gaussian, nodes)"
            ),
        };
        for (name, present) in fields {
            if *present && !allowed.contains(name) {
                bail!("state kind {:?} does not take {name}", self.kind);
            }
        }
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| anyhow!("state kind {:?} needs {name}", self.kind))
        };
        Ok(match self.kind.as_str() {
            "constant" => StateVector::constant(grid, need(self.value, "value")?),
            "cosine" => {
                let mean = need(self.mean, "mean")?;
                let amp = need(self.amplitude, "amplitude")?;
                let freq = need(self.frequency, "frequency")?;
                StateVector::from_fn(grid, |x| mean + amp * (freq * x).cos())
            }
            "raised-cosine" => {
                let amp = need(self.amplitude, "amplitude")?;
                StateVector::from_fn(grid, |x| amp * (1.0 + (std::f64::consts::PI * x).cos()))
            }
            "gaussian" => {
                let amp = need(self.amplitude, "amplitude")?;
                let width = need(self.width, "width")?;
                StateVector::from_fn(grid, |x| amp * (-width * x * x).exp())
            }
            "nodes" => {
                let values = self
                    .values
                    .clone()
                    .ok_or_else(|| anyhow!("state kind \"nodes\" needs values"))?;
                StateVector::new(Arc::clone(grid), values)?
            }
            _ => unreachable!("kind validated above"),
        })
    }
}

/// Control families for plain simulation runs.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    /// "zero", "constant", "linear", or "slabs".
    pub kind: String,
    pub value: Option<f64>,
    pub slope: Option<f64>,
    /// Slab end times (strictly increasing; the horizon is the last).
    pub breakpoints: Option<Vec<f64>>,
    /// One spatially constant value per slab.
    pub values: Option<Vec<f64>>,
}

impl Default for ControlSpec {
    fn default() -> Self {
        Self { kind: "zero".into(), value: None, slope: None, breakpoints: None, values: None }
    }
}

impl ControlSpec {
    pub fn build(&self, grid: &Arc<SpatialGrid>, t_final: f64) -> Result<PiecewiseStaticControl> {
        match self.kind.as_str() {
            "zero" => Ok(PiecewiseStaticControl::zero(grid, t_final)?),
            "constant" => {
                let v = self.value.ok_or_else(|| anyhow!("control kind constant needs value"))?;
                Ok(PiecewiseStaticControl::constant(grid, v, t_final)?)
            }
            "linear" => {
                let s = self.slope.ok_or_else(|| anyhow!("control kind linear needs slope"))?;
                let profile: Vec<f64> = grid.nodes().iter().map(|&x| s * x).collect();
                Ok(PiecewiseStaticControl::new(
                    Arc::clone(grid),
                    vec![0.0, t_final],
                    vec![profile],
                )?)
            }
            "slabs" => {
                let ends = self
                    .breakpoints
                    .clone()
                    .ok_or_else(|| anyhow!("control kind slabs needs breakpoints"))?;
                let values = self
                    .values
                    .clone()
                    .ok_or_else(|| anyhow!("control kind slabs needs values"))?;
                if ends.len() != values.len() {
                    bail!(
                        "control.breakpoints ({}) and control.values ({}) must pair up",
                        ends.len(),
                        values.len()
                    );
                }
                if let Some(&last) = ends.last() {
                    if (last - t_final).abs() > 1e-12 * t_final.max(1.0) {
                        bail!("last control breakpoint {last} must equal grid.t_final {t_final}");
                    }
                }
                let mut breakpoints = vec![0.0];
                breakpoints.extend(&ends);
                let n_nodes = grid.n_nodes();
                let profiles = values.iter().map(|&v| vec![v; n_nodes]).collect();
                Ok(PiecewiseStaticControl::new(Arc::clone(grid), breakpoints, profiles)?)
            }
            other => bail!("unknown control kind {other:?} (zero, constant, linear, slabs)"),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClimateSection {
    #[serde(default)]
    pub coalbedo: Option<CoalbedoSpec>,
    #[serde(default)]
    pub emission: Option<EmissionSpec>,
    #[serde(default)]
    pub insolation: Option<InsolationSpec>,
    /// "state-control" (default) or "coalbedo-control".
    pub coupling: Option<String>,
    #[serde(default)]
    pub acknowledge_discontinuous: bool,
    pub n_cells: Option<usize>,
    pub t_final: Option<f64>,
    pub dt: Option<f64>,
    pub n_slabs: Option<usize>,
    pub initial_kelvin: Option<f64>,
}

impl ClimateSection {
    pub fn scenario(&self, state_stride: usize) -> Result<ScenarioConfig> {
        let defaults = ScenarioConfig::default();
        let coupling = match self.coupling.as_deref() {
            None | Some("state-control") => ClimateCoupling::StateControl,
            Some("coalbedo-control") => ClimateCoupling::CoalbedoControl,
            Some(other) => {
                bail!("unknown climate.coupling {other:?} (state-control, coalbedo-control)")
            }
        };
        Ok(ScenarioConfig {
            coalbedo: match &self.coalbedo {
                Some(spec) => spec.build()?,
                None => defaults.coalbedo,
            },
            emission: match &self.emission {
                Some(spec) => spec.build()?,
                None => defaults.emission,
            },
            insolation: match &self.insolation {
                Some(spec) => spec.build()?,
                None => defaults.insolation,
            },
            coupling,
            acknowledge_discontinuous: self.acknowledge_discontinuous,
            n_cells: self.n_cells.unwrap_or(defaults.n_cells),
            t_final: self.t_final.unwrap_or(defaults.t_final),
            dt: self.dt.unwrap_or(defaults.dt),
            n_slabs: self.n_slabs.unwrap_or(defaults.n_slabs),
            initial_kelvin: self.initial_kelvin.unwrap_or(defaults.initial_kelvin),
            store_stride: state_stride,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoalbedoSpec {
    /// "sellers-ramp", "budyko-step", or "budyko-regularized".
    pub kind: String,
    pub ice: f64,
    pub warm: f64,
    pub threshold: f64,
    pub halfwidth: Option<f64>,
    pub width: Option<f64>,
}

impl CoalbedoSpec {
    pub fn build(&self) -> Result<CoalbedoModel> {
        let model = match self.kind.as_str() {
            "sellers-ramp" => CoalbedoModel::SellersRamp {
                ice: self.ice,
                warm: self.warm,
                threshold: self.threshold,
                halfwidth: self
                    .halfwidth
                    .ok_or_else(|| anyhow!("sellers-ramp coalbedo needs halfwidth"))?,
            },
            "budyko-step" => {
                require_absent(self.halfwidth.is_none(), "climate.coalbedo.halfwidth", self.kind.as_str())?;
                CoalbedoModel::BudykoStep {
                    ice: self.ice,
                    warm: self.warm,
                    threshold: self.threshold,
                }
            }
            "budyko-regularized" => CoalbedoModel::BudykoRegularized {
                ice: self.ice,
                warm: self.warm,
                threshold: self.threshold,
                width: self
                    .width
                    .ok_or_else(|| anyhow!("budyko-regularized coalbedo needs width"))?,
            },
            other => bail!(
                "unknown coalbedo kind {other:?} (sellers-ramp, budyko-step, budyko-regularized)"
            ),
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmissionSpec {
    /// "budyko-linear" or "gray-body".
    pub kind: String,
    pub intercept: Option<f64>,
    pub slope: Option<f64>,
    pub sigma: Option<f64>,
    pub opacity: Option<f64>,
}

impl EmissionSpec {
    pub fn build(&self) -> Result<EmissionModel> {
        let model = match self.kind.as_str() {
            "budyko-linear" => EmissionModel::BudykoLinear {
                intercept: self
                    .intercept
                    .ok_or_else(|| anyhow!("budyko-linear emission needs intercept"))?,
                slope: self.slope.ok_or_else(|| anyhow!("budyko-linear emission needs slope"))?,
            },
            "gray-body" => EmissionModel::SellersStefanBoltzmann {
                sigma: self.sigma.ok_or_else(|| anyhow!("gray-body emission needs sigma"))?,
                opacity: self.opacity.ok_or_else(|| anyhow!("gray-body emission needs opacity"))?,
            },
            other => bail!("unknown emission kind {other:?} (budyko-linear, gray-body)"),
        };
        model.validate()?;
        Ok(model)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsolationSpec {
    /// "annual", "uniform", or "seasonal".
    pub kind: String,
    pub q: f64,
    pub p2_coefficient: Option<f64>,
    pub amplitude: Option<f64>,
    pub period: Option<f64>,
}

impl InsolationSpec {
    pub fn build(&self) -> Result<InsolationProfile> {
        let model = match self.kind.as_str() {
            "annual" => InsolationProfile::Annual {
                q: self.q,
                p2_coefficient: self
                    .p2_coefficient
                    .ok_or_else(|| anyhow!("annual insolation needs p2_coefficient"))?,
            },
            "uniform" => {
                require_absent(
                    self.p2_coefficient.is_none(),
                    "climate.insolation.p2_coefficient",
                    "uniform",
                )?;
                InsolationProfile::Uniform { q: self.q }
            }
            "seasonal" => InsolationProfile::Seasonal {
                q: self.q,
                p2_coefficient: self
                    .p2_coefficient
                    .ok_or_else(|| anyhow!("seasonal insolation needs p2_coefficient"))?,
                amplitude: self
                    .amplitude
                    .ok_or_else(|| anyhow!("seasonal insolation needs amplitude"))?,
                period: self.period.ok_or_else(|| anyhow!("seasonal insolation needs period"))?,
            },
            other => bail!("unknown insolation kind {other:?} (annual, uniform, seasonal)"),
        };
        model.validate()?;
        Ok(model)
    }
}
