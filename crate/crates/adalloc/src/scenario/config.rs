//! Scenario configuration, loadable from a TOML document whose keys mirror
//! the struct fields.

use serde::{Deserialize, Serialize};

use crate::numerics::Scheme;
use crate::plants::{Fidelity, QuadplaneParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    Quadplane,
    Quadrotor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Closed loop through the dynamic allocator (the real architecture).
    #[default]
    Allocated,
    /// Force the plant's tau to the high-level commands directly; diagnostic
    /// mode for the exact-allocation tracking checks.
    IdealTau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FidelityConfig {
    #[default]
    Full,
    ParametricOnly,
}

impl From<FidelityConfig> for Fidelity {
    fn from(f: FidelityConfig) -> Self {
        match f {
            FidelityConfig::Full => Fidelity::Full,
            FidelityConfig::ParametricOnly => Fidelity::ParametricOnly,
        }
    }
}

/// Controller and adaptation gains. Matrix gains are scaled identities or
/// diagonals, which is the shape every shipped scenario uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GainsConfig {
    /// Slow reference row gains (length d).
    pub k_rx: Vec<f64>,
    /// Slow predictor row gains (length d).
    pub k_sx: Vec<f64>,
    /// Fast predictor row gains (length d).
    pub k_sz: Vec<f64>,
    /// Parameter adaptation gain (times identity).
    pub gamma_w: f64,
    /// Prediction-error adaptation gain (times identity).
    pub gamma_e: f64,
    /// Allocation flow gain on the input block (times identity).
    pub gamma_u: f64,
    /// Allocation flow gain on the multiplier block (times identity).
    pub gamma_lambda: f64,
    /// Input cost diagonal (length m).
    pub q: Vec<f64>,
    /// Fast-command preference weight.
    pub alpha: f64,
    /// Barrier weight.
    pub beta: f64,
}

impl Default for GainsConfig {
    fn default() -> Self {
        Self {
            k_rx: vec![0.5, 0.707],
            k_sx: vec![5.0, 5.0],
            k_sz: vec![5.0, 5.0],
            gamma_w: 0.1,
            gamma_e: 100.0,
            gamma_u: 50.0,
            gamma_lambda: 50.0,
            q: vec![10.0, 10.0, 1.0, 0.1],
            alpha: 25.0,
            beta: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    #[default]
    None,
    Constant,
    Sine,
}

/// Bounded disturbance injected into the plant-side tau.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DisturbanceConfig {
    pub kind: DisturbanceKind,
    pub magnitude: f64,
    /// Direction in tau space (length n_x + n_z); normalized before use.
    pub direction: Vec<f64>,
    /// For the sinusoidal kind [Hz].
    pub frequency: f64,
}

impl Default for DisturbanceConfig {
    fn default() -> Self {
        Self {
            kind: DisturbanceKind::None,
            magnitude: 0.0,
            direction: vec![0.0, 1.0, 0.0],
            frequency: 0.5,
        }
    }
}

impl DisturbanceConfig {
    /// The injected tau offset at time `t` (zero-padded/truncated to n_tau).
    pub fn eval(&self, t: f64, n_tau: usize) -> Vec<f64> {
        let mut dir = vec![0.0; n_tau];
        for (d, v) in dir.iter_mut().zip(&self.direction) {
            *d = *v;
        }
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for d in &mut dir {
                *d /= norm;
            }
        }
        let scale = match self.kind {
            DisturbanceKind::None => 0.0,
            DisturbanceKind::Constant => self.magnitude,
            DisturbanceKind::Sine => {
                self.magnitude * (2.0 * std::f64::consts::PI * self.frequency * t).sin()
            }
        };
        for d in &mut dir {
            *d *= scale;
        }
        dir
    }
}

/// Offsets applied to the reference-consistent initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct InitialOffset {
    pub px: f64,
    pub pz: f64,
    pub vx: f64,
    pub vz: f64,
    pub theta: f64,
    pub omega: f64,
}

/// Everything one closed-loop run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub plant: PlantKind,
    /// Time-scale separation of the fast reference, in (0, 1].
    pub epsilon: f64,
    /// Update period of every law [s].
    pub dt: f64,
    pub duration: f64,
    pub seed: u64,
    /// Parameter estimates start at this multiple of the true values.
    pub initial_parameter_scale: f64,
    pub scheme: Scheme,
    pub control_mode: ControlMode,
    pub fidelity: FidelityConfig,
    pub initial_offset: InitialOffset,
    pub gains: GainsConfig,
    pub disturbance: DisturbanceConfig,
    /// Plant parameters for the quadplane; defaults when absent.
    pub quadplane_params: Option<QuadplaneParams>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            plant: PlantKind::Quadplane,
            epsilon: 0.2,
            dt: 0.01,
            duration: 30.0,
            seed: 0,
            initial_parameter_scale: 1.5,
            scheme: Scheme::ForwardEuler,
            control_mode: ControlMode::Allocated,
            fidelity: FidelityConfig::Full,
            initial_offset: InitialOffset::default(),
            gains: GainsConfig::default(),
            disturbance: DisturbanceConfig::default(),
            quadplane_params: None,
        }
    }
}

impl ScenarioConfig {
    /// Defaults adjusted for the quadrotor's three inputs.
    pub fn default_quadrotor() -> Self {
        Self {
            plant: PlantKind::Quadrotor,
            duration: 10.0,
            gains: GainsConfig {
                q: vec![1.0, 1.0, 1.0],
                ..GainsConfig::default()
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.dt <= 0.0 {
            return Err(format!("dt must be positive, got {}", self.dt));
        }
        if !(0.0 < self.epsilon && self.epsilon <= 1.0) {
            return Err(format!("epsilon must be in (0, 1], got {}", self.epsilon));
        }
        if self.duration <= 0.0 {
            return Err(format!("duration must be positive, got {}", self.duration));
        }
        let expected_m = match self.plant {
            PlantKind::Quadplane => 4,
            PlantKind::Quadrotor => 3,
        };
        if self.gains.q.len() != expected_m {
            return Err(format!(
                "q must have {expected_m} entries for this plant, got {}",
                self.gains.q.len()
            ));
        }
        for (name, v) in [
            ("gamma_w", self.gains.gamma_w),
            ("gamma_e", self.gains.gamma_e),
            ("gamma_u", self.gains.gamma_u),
            ("gamma_lambda", self.gains.gamma_lambda),
            ("alpha", self.gains.alpha),
            ("beta", self.gains.beta),
        ] {
            if v <= 0.0 {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.gains.q.iter().any(|v| *v <= 0.0) {
            return Err("q diagonal must be positive".into());
        }
        if self.initial_parameter_scale <= 0.0 {
            return Err("initial_parameter_scale must be positive".into());
        }
        if let Some(p) = &self.quadplane_params {
            p.validate()?;
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        let c: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }
}
