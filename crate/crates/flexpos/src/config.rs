//! JSON configuration: one document, every section optional, unknown keys
//! rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use flexpos_core::control::{AntiWindup, AxisGains, ControlMode, LoopConfig, PidGains};
use flexpos_core::kinematics::{
    Compliance6, InputStiffness, Jacobian6, MobilityParams, NOMINAL_COMPLIANCE, NOMINAL_INPUT_STIFFNESS,
    NOMINAL_JACOBIAN,
};
use flexpos_core::plant::{ActuatorParams, ModalParams, PlantConfig, SensorParams};
use flexpos_core::workspace::{InputBox, SAFE_STROKE_UM};
use flexpos_core::{Axis, Error as CoreError};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse configuration: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Re-labels a core validation error with the config key it came from.
fn keyed(key: &str, err: CoreError) -> ConfigError {
    match err {
        CoreError::Invalid { what, reason } if what.contains('.') => invalid(what, reason),
        CoreError::Invalid { what, reason } => invalid(key, format!("{what}: {reason}")),
        other => invalid(key, other.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub seed: u64,
    pub mobility: MobilityConfig,
    /// Row-major 6×6; columns are actuators, rows x, y, z (µm/µm) then
    /// rx, ry, rz (µrad/µm).
    pub jacobian: Vec<f64>,
    /// Row-major 6×6 output compliance, m/N and rad/(N·m) blocks.
    pub compliance: Vec<f64>,
    pub input_stiffness_n_per_m: f64,
    pub input_box: InputBoxConfig,
    pub actuator: ActuatorConfig,
    pub modal: ModalConfig,
    pub sensor: SensorConfig,
    pub controller: ControllerConfig,
    #[serde(rename = "loop")]
    pub loop_rates: LoopRatesConfig,
    pub simulate: SimulateConfig,
    pub fit_jacobian: FitConfig,
    pub resolution: ResolutionConfig,
    pub hysteresis: HysteresisConfig,
    pub freq_response: FreqResponseConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 1,
            mobility: MobilityConfig::default(),
            jacobian: NOMINAL_JACOBIAN.to_vec(),
            compliance: NOMINAL_COMPLIANCE.to_vec(),
            input_stiffness_n_per_m: NOMINAL_INPUT_STIFFNESS,
            input_box: InputBoxConfig::default(),
            actuator: ActuatorConfig::default(),
            modal: ModalConfig::default(),
            sensor: SensorConfig::default(),
            controller: ControllerConfig::default(),
            loop_rates: LoopRatesConfig::default(),
            simulate: SimulateConfig::default(),
            fit_jacobian: FitConfig::default(),
            resolution: ResolutionConfig::default(),
            hysteresis: HysteresisConfig::default(),
            freq_response: FreqResponseConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MobilityConfig {
    pub lambda: u32,
    pub n_links: u32,
    /// Degrees of freedom of each joint.
    pub joints: Vec<u32>,
}

impl Default for MobilityConfig {
    fn default() -> Self {
        let p = MobilityParams::positioner();
        MobilityConfig {
            lambda: p.lambda(),
            n_links: p.n_links(),
            joints: p.joints().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputBoxConfig {
    pub lo_um: [f64; 6],
    pub hi_um: [f64; 6],
    pub safe_stroke_um: f64,
}

impl Default for InputBoxConfig {
    fn default() -> Self {
        InputBoxConfig {
            lo_um: [0.0; 6],
            hi_um: [SAFE_STROKE_UM; 6],
            safe_stroke_um: SAFE_STROKE_UM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ActuatorConfig {
    pub v_min: f64,
    pub v_max: f64,
    pub stroke_um: f64,
    pub bw_alpha: f64,
    pub bw_beta: f64,
    pub bw_gamma: f64,
    pub bw_n: f64,
}

impl Default for ActuatorConfig {
    fn default() -> Self {
        let a = ActuatorParams::default();
        ActuatorConfig {
            v_min: a.v_min,
            v_max: a.v_max,
            stroke_um: a.stroke_um,
            bw_alpha: a.bw_alpha,
            bw_beta: a.bw_beta,
            bw_gamma: a.bw_gamma,
            bw_n: a.bw_n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModalConfig {
    /// Per task axis x, y, z, rx, ry, rz.
    pub freq_hz: [f64; 6],
    pub damping: [f64; 6],
}

impl Default for ModalConfig {
    fn default() -> Self {
        let m = ModalParams::default();
        ModalConfig {
            freq_hz: m.freq_hz,
            damping: m.damping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorConfig {
    pub noise_std: [f64; 6],
    pub adc_bits: u32,
    pub range: [f64; 6],
}

impl Default for SensorConfig {
    fn default() -> Self {
        let s = SensorParams::default();
        SensorConfig {
            noise_std: s.noise_std,
            adc_bits: s.adc_bits,
            range: s.range,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntiWindupConfig {
    Conditional,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeConfig {
    TaskSpace,
    PerActuator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub kp: [f64; 6],
    pub ki: [f64; 6],
    pub kd: [f64; 6],
    pub output_min_v: f64,
    pub output_max_v: f64,
    pub anti_windup: AntiWindupConfig,
    pub derivative_filter_s: Option<f64>,
    pub mode: ModeConfig,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        let g = PidGains::default();
        ControllerConfig {
            kp: g.axes.map(|a| a.kp),
            ki: g.axes.map(|a| a.ki),
            kd: g.axes.map(|a| a.kd),
            output_min_v: g.output_min,
            output_max_v: g.output_max,
            anti_windup: AntiWindupConfig::Conditional,
            derivative_filter_s: None,
            mode: ModeConfig::TaskSpace,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoopRatesConfig {
    pub control_rate_hz: f64,
    pub sim_dt_s: f64,
    pub operating_point_v: f64,
}

impl Default for LoopRatesConfig {
    fn default() -> Self {
        let l = LoopConfig::default();
        LoopRatesConfig {
            control_rate_hz: l.control_rate_hz,
            sim_dt_s: l.sim_dt,
            operating_point_v: l.operating_point_v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trajectory {
    Step,
    Sine,
    Circle,
    Rose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub trajectory: Trajectory,
    /// Driven axes. Circle and rose use the first two (rose: optional third).
    pub axes: Vec<String>,
    /// Translational amplitude, µm; rotational axes use `10 ×` this in µrad.
    pub amplitude: f64,
    pub freq_hz: f64,
    pub duration_s: f64,
    pub petals: u32,
    /// Amplitude of the rose's third axis, same units as `amplitude`.
    pub third_amplitude: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            trajectory: Trajectory::Circle,
            axes: vec!["x".into(), "y".into()],
            amplitude: 10.0,
            freq_hz: 0.5,
            duration_s: 4.0,
            petals: 4,
            third_amplitude: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// Synthetic samples drawn when no data file is given.
    pub samples: usize,
    /// Gaussian pose noise, µm on translations and µrad on rotations.
    pub noise_std: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            samples: 100,
            noise_std: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolutionConfig {
    /// Step height per axis, µm and µrad.
    pub steps: [f64; 6],
    pub period_s: f64,
    pub n_steps: usize,
    pub ascent_only: bool,
    pub threshold_sigma: f64,
    pub settle_fraction: f64,
}

impl Default for ResolutionConfig {
    fn default() -> Self {
        ResolutionConfig {
            steps: [0.0105, 0.0105, 0.015, 1.8, 1.3, 0.5],
            period_s: 2.0,
            n_steps: 5,
            ascent_only: false,
            threshold_sigma: 3.0,
            settle_fraction: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HysteresisConfig {
    pub freq_hz: f64,
    /// Cycles analysed after one discarded warm-up cycle.
    pub cycles: usize,
    /// Closed-loop reference amplitude on `axis`, µm or µrad.
    pub amplitude: f64,
    pub axis: String,
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        HysteresisConfig {
            freq_hz: 0.5,
            cycles: 3,
            amplitude: 20.0,
            axis: "z".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FreqResponseConfig {
    pub f0_hz: f64,
    pub f1_hz: f64,
    pub sweep_s: f64,
    /// Rest period after the sweep so the response can ring out, s.
    pub tail_s: f64,
    /// Chirp amplitude per axis, µm and µrad.
    pub amplitudes: [f64; 6],
    pub axes: Vec<String>,
    /// Fraction of the sweep span trimmed from each band edge.
    pub band_margin: f64,
    pub peak_window: f64,
    pub peak_threshold_db: f64,
}

impl Default for FreqResponseConfig {
    fn default() -> Self {
        FreqResponseConfig {
            f0_hz: 10.0,
            f1_hz: 1000.0,
            sweep_s: 10.0,
            tail_s: 0.5,
            amplitudes: [1.0, 1.0, 1.0, 10.0, 10.0, 10.0],
            axes: vec!["z".into()],
            band_margin: 0.1,
            peak_window: 0.2,
            peak_threshold_db: 3.0,
        }
    }
}

pub fn parse_axes(key: &str, names: &[String]) -> Result<Vec<Axis>, ConfigError> {
    let mut axes = Vec::with_capacity(names.len());
    for n in names {
        let a = Axis::parse(n.trim()).ok_or_else(|| invalid(key, format!("unknown axis `{n}`")))?;
        if axes.contains(&a) {
            return Err(invalid(key, format!("axis `{n}` listed twice")));
        }
        axes.push(a);
    }
    Ok(axes)
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("{v} must be finite and > 0")))
    }
}

impl Config {
    /// Empty or whitespace-only input yields the defaults.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = if text.trim().is_empty() {
            Config::default()
        } else {
            serde_json::from_str(text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Config::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Compact JSON with keys sorted at every level.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }

    /// SHA-256 of the canonical form, lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.mobility_params()?;
        self.jacobian()?;
        self.compliance()?;
        self.input_stiffness()?;
        self.input_box()?;
        let plant = self.plant()?;
        self.gains()?;
        self.loop_config()?;
        if self.loop_rates.sim_dt_s > plant.modal.max_dt() {
            return Err(invalid(
                "loop.sim_dt_s",
                format!(
                    "{} s exceeds the integrator limit {:.3e} s for the configured modes",
                    self.loop_rates.sim_dt_s,
                    plant.modal.max_dt()
                ),
            ));
        }

        let s = &self.simulate;
        let axes = parse_axes("simulate.axes", &s.axes)?;
        if axes.is_empty() {
            return Err(invalid("simulate.axes", "at least one axis is required"));
        }
        if matches!(s.trajectory, Trajectory::Circle | Trajectory::Rose) && axes.len() < 2 {
            return Err(invalid("simulate.axes", "circle and rose need two axes"));
        }
        if !s.amplitude.is_finite() {
            return Err(invalid("simulate.amplitude", "must be finite"));
        }
        positive("simulate.freq_hz", s.freq_hz)?;
        positive("simulate.duration_s", s.duration_s)?;
        if s.petals < 2 {
            return Err(invalid("simulate.petals", "must be >= 2"));
        }

        if self.fit_jacobian.samples < 7 {
            return Err(invalid(
                "fit_jacobian.samples",
                "need at least 7 samples for 7 unknowns per row",
            ));
        }
        if !(self.fit_jacobian.noise_std.is_finite() && self.fit_jacobian.noise_std >= 0.0) {
            return Err(invalid("fit_jacobian.noise_std", "must be finite and >= 0"));
        }

        let r = &self.resolution;
        positive("resolution.period_s", r.period_s)?;
        if r.n_steps == 0 {
            return Err(invalid("resolution.n_steps", "must be >= 1"));
        }
        if r.steps.iter().any(|v| !v.is_finite()) {
            return Err(invalid("resolution.steps", "must be finite"));
        }
        positive("resolution.threshold_sigma", r.threshold_sigma)?;
        if !(0.0..1.0).contains(&r.settle_fraction) {
            return Err(invalid("resolution.settle_fraction", "must be in [0, 1)"));
        }

        let h = &self.hysteresis;
        positive("hysteresis.freq_hz", h.freq_hz)?;
        positive("hysteresis.amplitude", h.amplitude)?;
        if h.cycles < 3 {
            return Err(invalid("hysteresis.cycles", "need at least 3 analysed cycles"));
        }
        if parse_axes("hysteresis.axis", std::slice::from_ref(&h.axis))?.len() != 1 {
            return Err(invalid("hysteresis.axis", "exactly one axis"));
        }

        let f = &self.freq_response;
        positive("freq_response.f0_hz", f.f0_hz)?;
        if !(f.f1_hz > f.f0_hz && f.f1_hz.is_finite()) {
            return Err(invalid("freq_response.f1_hz", "must exceed f0_hz"));
        }
        if 4.0 * f.f1_hz > self.loop_rates.control_rate_hz {
            return Err(invalid(
                "freq_response.f1_hz",
                "must be at most a quarter of loop.control_rate_hz",
            ));
        }
        positive("freq_response.sweep_s", f.sweep_s)?;
        if !(f.tail_s.is_finite() && f.tail_s >= 0.0) {
            return Err(invalid("freq_response.tail_s", "must be >= 0"));
        }
        if f.amplitudes.iter().any(|v| !v.is_finite()) {
            return Err(invalid("freq_response.amplitudes", "must be finite"));
        }
        if parse_axes("freq_response.axes", &f.axes)?.is_empty() {
            return Err(invalid("freq_response.axes", "at least one axis is required"));
        }
        if !(0.0..0.5).contains(&f.band_margin) {
            return Err(invalid("freq_response.band_margin", "must be in [0, 0.5)"));
        }
        positive("freq_response.peak_window", f.peak_window)?;
        if !(f.peak_threshold_db.is_finite() && f.peak_threshold_db >= 0.0) {
            return Err(invalid("freq_response.peak_threshold_db", "must be >= 0"));
        }
        Ok(())
    }

    pub fn mobility_params(&self) -> Result<MobilityParams, ConfigError> {
        let m = &self.mobility;
        MobilityParams::new(m.lambda, m.n_links, m.joints.clone()).map_err(|e| keyed("mobility", e))
    }

    fn matrix36(key: &str, v: &[f64]) -> Result<(), ConfigError> {
        if v.len() != 36 {
            return Err(invalid(
                key,
                format!("expected 36 numbers (row-major 6x6), got {}", v.len()),
            ));
        }
        Ok(())
    }

    pub fn jacobian(&self) -> Result<Jacobian6, ConfigError> {
        Self::matrix36("jacobian", &self.jacobian)?;
        Jacobian6::from_row_slice(&self.jacobian).map_err(|e| keyed("jacobian", e))
    }

    pub fn compliance(&self) -> Result<Compliance6, ConfigError> {
        Self::matrix36("compliance", &self.compliance)?;
        Compliance6::from_row_slice(&self.compliance).map_err(|e| keyed("compliance", e))
    }

    pub fn input_stiffness(&self) -> Result<InputStiffness, ConfigError> {
        InputStiffness::new(self.input_stiffness_n_per_m).map_err(|e| keyed("input_stiffness_n_per_m", e))
    }

    pub fn input_box(&self) -> Result<InputBox, ConfigError> {
        let b = &self.input_box;
        InputBox::new(b.lo_um, b.hi_um, b.safe_stroke_um).map_err(|e| keyed("input_box", e))
    }

    pub fn plant(&self) -> Result<PlantConfig, ConfigError> {
        let a = &self.actuator;
        let s = &self.sensor;
        let cfg = PlantConfig {
            jacobian: self.jacobian()?,
            actuator: ActuatorParams {
                v_min: a.v_min,
                v_max: a.v_max,
                stroke_um: a.stroke_um,
                bw_alpha: a.bw_alpha,
                bw_beta: a.bw_beta,
                bw_gamma: a.bw_gamma,
                bw_n: a.bw_n,
            },
            modal: ModalParams {
                freq_hz: self.modal.freq_hz,
                damping: self.modal.damping,
            },
            sensor: SensorParams {
                noise_std: s.noise_std,
                adc_bits: s.adc_bits,
                range: s.range,
            },
        };
        cfg.validate().map_err(|e| keyed("plant", e))?;
        Ok(cfg)
    }

    pub fn gains(&self) -> Result<PidGains, ConfigError> {
        let c = &self.controller;
        let gains = PidGains {
            axes: std::array::from_fn(|k| AxisGains {
                kp: c.kp[k],
                ki: c.ki[k],
                kd: c.kd[k],
            }),
            output_min: c.output_min_v,
            output_max: c.output_max_v,
            anti_windup: match c.anti_windup {
                AntiWindupConfig::Conditional => AntiWindup::Conditional,
                AntiWindupConfig::None => AntiWindup::None,
            },
            derivative_filter_s: c.derivative_filter_s,
        };
        gains.validate().map_err(|e| match e {
            CoreError::Invalid { what: "gains", reason } => invalid("controller.kp/ki/kd", reason),
            CoreError::Invalid {
                what: "gains.output_limits",
                reason,
            } => invalid("controller.output_min_v", reason),
            CoreError::Invalid { reason, .. } => invalid("controller.derivative_filter_s", reason),
            other => invalid("controller", other.to_string()),
        })?;
        Ok(gains)
    }

    pub fn loop_config(&self) -> Result<LoopConfig, ConfigError> {
        let l = &self.loop_rates;
        let cfg = LoopConfig {
            control_rate_hz: l.control_rate_hz,
            sim_dt: l.sim_dt_s,
            nominal_jacobian: self.jacobian()?,
            operating_point_v: l.operating_point_v,
            mode: match self.controller.mode {
                ModeConfig::TaskSpace => ControlMode::TaskSpace,
                ModeConfig::PerActuator => ControlMode::PerActuator,
            },
        };
        cfg.validate().map_err(|e| match e {
            CoreError::Invalid { reason, .. } => invalid("loop", reason),
            other => invalid("loop", other.to_string()),
        })?;
        if !(self.actuator.v_min..=self.actuator.v_max).contains(&l.operating_point_v) {
            return Err(invalid(
                "loop.operating_point_v",
                "must lie within [actuator.v_min, actuator.v_max]",
            ));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(Config::from_json("").unwrap(), Config::default());
        assert_eq!(Config::from_json("{}").unwrap(), Config::default());
    }

    #[test]
    fn hash_is_stable_under_key_order() {
        let a = Config::from_json(r#"{"seed": 7, "sensor": {"adc_bits": 18}}"#).unwrap();
        let b = Config::from_json(r#"{"sensor": {"adc_bits": 18}, "seed": 7}"#).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), Config::default().hash());
        assert_eq!(a.hash().len(), 64);
    }
}
