//! Simulated positioner: voltage → piezo actuator (saturation + Bouc-Wen
//! hysteresis) → Jacobian → per-axis second-order structure → noisy,
//! quantized capacitive sensing.

use alloc::format;
use core::f64::consts::PI;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal};

use crate::kinematics::{forward_map, Jacobian6};
use crate::{ActuatorVec6, Error, Pose6, Result, VoltageVec6};

/// First natural frequency with the 100 g payload mounted, Hz.
pub const LOADED_FIRST_MODE_HZ: f64 = 137.41;
/// First natural frequency of the bare stage, Hz.
pub const UNLOADED_FIRST_MODE_HZ: f64 = 633.25;

/// Loaded natural frequencies per task axis (x, y, z, rx, ry, rz), Hz.
/// Only Z (first mode) is a measured value; the rest are illustrative
/// placeholders following the mode order Z, X, Y, Rz, Ry, Rx.
pub const LOADED_MODES_HZ: [f64; 6] = [149.0, 151.0, LOADED_FIRST_MODE_HZ, 281.0, 268.0, 196.0];

/// Default modal damping ratio.
pub const DEFAULT_DAMPING: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorParams {
    pub v_min: f64,
    pub v_max: f64,
    /// Free displacement at `v_max`, µm.
    pub stroke_um: f64,
    /// Fraction of the output that follows the linear path (1 disables hysteresis).
    pub bw_alpha: f64,
    /// 1/µm
    pub bw_beta: f64,
    /// 1/µm
    pub bw_gamma: f64,
    pub bw_n: f64,
}

impl Default for ActuatorParams {
    fn default() -> Self {
        ActuatorParams {
            v_min: 0.0,
            v_max: 150.0,
            stroke_um: 38.5,
            bw_alpha: 0.6,
            bw_beta: 0.04,
            bw_gamma: 0.02,
            bw_n: 1.0,
        }
    }
}

impl ActuatorParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.v_min,
            self.v_max,
            self.stroke_um,
            self.bw_alpha,
            self.bw_beta,
            self.bw_gamma,
            self.bw_n,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("actuator", "all parameters must be finite"));
        }
        if self.v_min >= self.v_max {
            return Err(Error::invalid(
                "actuator.v_min",
                format!("v_min {} must be below v_max {}", self.v_min, self.v_max),
            ));
        }
        if self.stroke_um <= 0.0 {
            return Err(Error::invalid("actuator.stroke_um", "must be > 0"));
        }
        if self.bw_n < 1.0 {
            return Err(Error::invalid("actuator.bw_n", "must be >= 1"));
        }
        if self.bw_beta + self.bw_gamma <= 0.0 {
            return Err(Error::invalid("actuator.bw_beta", "bw_beta + bw_gamma must be > 0"));
        }
        if !(self.bw_alpha > 0.0 && self.bw_alpha <= 1.0) {
            return Err(Error::invalid("actuator.bw_alpha", "must be in (0, 1]"));
        }
        Ok(())
    }

    /// Nominal (hysteresis-free) displacement at `v`, after clamping.
    pub fn linear_displacement(&self, v: f64) -> f64 {
        let v = v.clamp(self.v_min, self.v_max);
        self.stroke_um * (v - self.v_min) / (self.v_max - self.v_min)
    }

    /// Nominal linear gain, V/µm.
    pub fn volts_per_um(&self) -> f64 {
        (self.v_max - self.v_min) / self.stroke_um
    }

    /// Fixed point of the hysteresis rate law: `|h| <= (1/(β+γ))^(1/n)`.
    pub fn hysteresis_bound(&self) -> f64 {
        libm::pow(1.0 / (self.bw_beta + self.bw_gamma), 1.0 / self.bw_n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ActuatorState {
    /// Bouc-Wen hysteretic displacement, µm.
    pub h: f64,
    d_lin: f64,
}

impl ActuatorState {
    pub fn linear_displacement(&self) -> f64 {
        self.d_lin
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorOutput {
    /// µm
    pub displacement: f64,
    /// The command was outside `[v_min, v_max]` and was clamped.
    pub saturated: bool,
}

/// Advances one actuator to voltage `v`.
///
/// The rate law `ḣ = ḋ − β|ḋ||h|ⁿ⁻¹h − γḋ|h|ⁿ` is rate independent, so the
/// explicit Euler update over `dt` only depends on the change of the linear
/// displacement. Large changes are split so that each Euler increment stays
/// inside the contraction region of the fixed point.
pub fn actuator_step(params: &ActuatorParams, state: &mut ActuatorState, v: f64, dt: f64) -> ActuatorOutput {
    debug_assert!(dt > 0.0);
    let saturated = v < params.v_min || v > params.v_max;
    let d_lin = params.linear_displacement(v);
    let delta = d_lin - state.d_lin;

    if delta != 0.0 && params.bw_alpha < 1.0 {
        let bound = params.hysteresis_bound();
        let stiffness = params.bw_n * (params.bw_beta + params.bw_gamma) * libm::pow(bound, params.bw_n - 1.0);
        let pieces = libm::ceil(delta.abs() * stiffness / 0.25).max(1.0) as usize;
        let dd = delta / pieces as f64;
        let n = params.bw_n;
        for _ in 0..pieces {
            let h = state.h;
            let habs = h.abs();
            state.h += dd
                - params.bw_beta * dd.abs() * libm::pow(habs, n - 1.0) * h
                - params.bw_gamma * dd * libm::pow(habs, n);
        }
        debug_assert!(
            state.h.abs() <= bound * (1.0 + 1e-9),
            "hysteresis state {} escaped bound {}",
            state.h,
            bound
        );
    }
    state.d_lin = d_lin;

    ActuatorOutput {
        displacement: params.bw_alpha * d_lin + (1.0 - params.bw_alpha) * state.h,
        saturated,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalParams {
    /// Natural frequency per task axis, Hz.
    pub freq_hz: [f64; 6],
    pub damping: [f64; 6],
}

impl ModalParams {
    /// Stage carrying the 100 g payload.
    pub fn loaded() -> Self {
        ModalParams {
            freq_hz: LOADED_MODES_HZ,
            damping: [DEFAULT_DAMPING; 6],
        }
    }

    /// Bare stage: loaded frequencies scaled by the measured
    /// unloaded/loaded ratio of the first mode.
    pub fn unloaded() -> Self {
        let ratio = UNLOADED_FIRST_MODE_HZ / LOADED_FIRST_MODE_HZ;
        let mut freq_hz = LOADED_MODES_HZ.map(|f| f * ratio);
        freq_hz[2] = UNLOADED_FIRST_MODE_HZ;
        ModalParams {
            freq_hz,
            damping: [DEFAULT_DAMPING; 6],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.freq_hz.iter().position(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::invalid(
                "modal.freq_hz",
                format!("axis {i} frequency must be finite and > 0"),
            ));
        }
        if let Some(i) = self.damping.iter().position(|z| !(*z > 0.0 && *z < 1.0)) {
            return Err(Error::invalid(
                "modal.damping",
                format!("axis {i} damping ratio must be in (0, 1)"),
            ));
        }
        Ok(())
    }

    /// Largest step the semi-implicit integrator accepts: 0.1 / max f.
    pub fn max_dt(&self) -> f64 {
        0.1 / self.freq_hz.iter().fold(0.0_f64, |m, &f| m.max(f))
    }
}

impl Default for ModalParams {
    fn default() -> Self {
        ModalParams::unloaded()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModalState {
    pub position: Pose6,
    pub velocity: Pose6,
}

/// Advances the six unit-DC-gain oscillators towards `J·u` by one step of
/// semi-implicit Euler and returns the true pose.
pub fn structure_step(
    jacobian: &Jacobian6,
    modal: &ModalParams,
    state: &mut ModalState,
    u: &ActuatorVec6,
    dt: f64,
) -> Result<Pose6> {
    let max_dt = modal.max_dt();
    if !(dt > 0.0 && dt <= max_dt) {
        return Err(Error::StepTooLarge { dt, max_dt });
    }
    let target = forward_map(jacobian, u);
    for k in 0..6 {
        let w = 2.0 * PI * modal.freq_hz[k];
        let q = state.position[k];
        let qd = state.velocity[k];
        let acc = w * w * (target[k] - q) - 2.0 * modal.damping[k] * w * qd;
        let qd = qd + dt * acc;
        state.velocity[k] = qd;
        state.position[k] = q + dt * qd;
    }
    Ok(state.position)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorParams {
    /// Gaussian noise per axis, µm or µrad.
    pub noise_std: [f64; 6],
    pub adc_bits: u32,
    /// Full-scale span per channel, centered on the sensor zero.
    pub range: [f64; 6],
}

impl Default for SensorParams {
    fn default() -> Self {
        SensorParams {
            noise_std: [0.002, 0.002, 0.002, 0.1, 0.1, 0.1],
            adc_bits: 16,
            range: [50.0, 50.0, 100.0, 5000.0, 5000.0, 5000.0],
        }
    }
}

impl SensorParams {
    pub fn validate(&self) -> Result<()> {
        if self.noise_std.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::invalid("sensor.noise_std", "must be finite and >= 0"));
        }
        if !(8..=24).contains(&self.adc_bits) {
            return Err(Error::invalid(
                "sensor.adc_bits",
                format!("must be within 8..=24, got {}", self.adc_bits),
            ));
        }
        if self.range.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::invalid("sensor.range", "must be finite and > 0"));
        }
        Ok(())
    }

    /// ADC quantization step of channel `k`.
    pub fn quantization_step(&self, k: usize) -> f64 {
        self.range[k] / libm::ldexp(1.0, self.adc_bits as i32)
    }

    pub fn with_noise_scale(mut self, scale: f64) -> Self {
        self.noise_std = self.noise_std.map(|s| s * scale);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub pose: Pose6,
    /// Channels whose reading hit the end of the ADC range.
    pub saturated: [bool; 6],
}

impl Measurement {
    pub fn any_saturated(&self) -> bool {
        self.saturated.iter().any(|&s| s)
    }
}

/// Adds noise, then quantizes each channel to its ADC grid.
pub fn sense<R: RngCore + ?Sized>(params: &SensorParams, pose: &Pose6, rng: &mut R) -> Measurement {
    let mut out = Pose6::ZERO;
    let mut saturated = [false; 6];
    for k in 0..6 {
        let z: f64 = StandardNormal.sample(rng);
        let noisy = pose[k] + params.noise_std[k] * z;
        let half = params.range[k] / 2.0;
        let step = params.quantization_step(k);
        let clamped = if noisy > half {
            saturated[k] = true;
            half
        } else if noisy < -half {
            saturated[k] = true;
            -half
        } else {
            noisy
        };
        out[k] = libm::round(clamped / step) * step;
    }
    Measurement { pose: out, saturated }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantConfig {
    pub jacobian: Jacobian6,
    pub actuator: ActuatorParams,
    pub modal: ModalParams,
    pub sensor: SensorParams,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            jacobian: Jacobian6::nominal(),
            actuator: ActuatorParams::default(),
            modal: ModalParams::default(),
            sensor: SensorParams::default(),
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        self.actuator.validate()?;
        self.modal.validate()?;
        self.sensor.validate()
    }
}

/// A running plant instance. Single owner; deterministic given its seed.
#[derive(Debug, Clone)]
pub struct Plant {
    config: PlantConfig,
    actuators: [ActuatorState; 6],
    displacement: ActuatorVec6,
    modal: ModalState,
    zero: Pose6,
    rng: ChaCha8Rng,
    voltage_saturated: bool,
}

impl Plant {
    /// Plant at rest with every actuator at `v_min` and the sensor zero at
    /// the rest pose.
    pub fn new(config: PlantConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        Ok(Plant {
            config,
            actuators: [ActuatorState::default(); 6],
            displacement: ActuatorVec6::ZERO,
            modal: ModalState::default(),
            zero: Pose6::ZERO,
            rng: ChaCha8Rng::seed_from_u64(seed),
            voltage_saturated: false,
        })
    }

    /// Plant whose actuators were slowly ramped from `v_min` to `voltage`,
    /// with the structure at rest and the sensors zeroed at that pose.
    pub fn settled_at(config: PlantConfig, voltage: VoltageVec6, seed: u64) -> Result<Self> {
        const RAMP_STEPS: usize = 2000;
        let mut plant = Plant::new(config, seed)?;
        let params = plant.config.actuator;
        for i in 0..6 {
            let target = voltage[i].clamp(params.v_min, params.v_max);
            for s in 1..=RAMP_STEPS {
                let v = params.v_min + (target - params.v_min) * s as f64 / RAMP_STEPS as f64;
                let out = actuator_step(&params, &mut plant.actuators[i], v, 1.0);
                plant.displacement[i] = out.displacement;
            }
        }
        let pose = forward_map(&plant.config.jacobian, &plant.displacement);
        plant.modal = ModalState {
            position: pose,
            velocity: Pose6::ZERO,
        };
        plant.zero = pose;
        Ok(plant)
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    /// Advances actuators and structure by `dt` under voltage `v`; returns the
    /// absolute true pose.
    pub fn advance(&mut self, v: &VoltageVec6, dt: f64) -> Result<Pose6> {
        let mut saturated = false;
        for i in 0..6 {
            let out = actuator_step(&self.config.actuator, &mut self.actuators[i], v[i], dt);
            self.displacement[i] = out.displacement;
            saturated |= out.saturated;
        }
        self.voltage_saturated = saturated;
        structure_step(
            &self.config.jacobian,
            &self.config.modal,
            &mut self.modal,
            &self.displacement,
            dt,
        )
    }

    /// Reads the sensors (relative to the sensor zero).
    pub fn measure(&mut self) -> Measurement {
        let rel = self.modal.position - self.zero;
        sense(&self.config.sensor, &rel, &mut self.rng)
    }

    /// One plant step: actuators, structure, then sensing.
    pub fn step(&mut self, v: &VoltageVec6, dt: f64) -> Result<(Pose6, Measurement)> {
        let pose = self.advance(v, dt)?;
        Ok((pose, self.measure()))
    }

    /// Absolute true pose (zero at rest with all actuators at `v_min`).
    pub fn true_pose(&self) -> Pose6 {
        self.modal.position
    }

    /// True pose in the sensor frame.
    pub fn pose_from_zero(&self) -> Pose6 {
        self.modal.position - self.zero
    }

    pub fn sensor_zero(&self) -> Pose6 {
        self.zero
    }

    pub fn actuator_displacement(&self) -> ActuatorVec6 {
        self.displacement
    }

    pub fn hysteresis_states(&self) -> [f64; 6] {
        self.actuators.map(|a| a.h)
    }

    /// Largest |h| over the six actuators, µm.
    pub fn hysteresis_peak(&self) -> f64 {
        self.actuators.iter().fold(0.0_f64, |m, a| m.max(a.h.abs()))
    }

    /// Whether the last voltage command was clamped on any channel.
    pub fn voltage_saturated(&self) -> bool {
        self.voltage_saturated
    }
}
