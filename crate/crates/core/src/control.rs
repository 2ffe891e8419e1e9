//! Discrete PID feedback around the simulated plant.
//!
//! The controller acts on task-space pose errors. Its effort (µm / µrad) is
//! mapped to actuator displacement through the inverse of the nominal
//! Jacobian and converted to volts with the actuator's linear gain, as a
//! delta about a mid-range operating point.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Matrix6, Vector6};

use crate::kinematics::{forward_map, Jacobian6};
use crate::plant::{Plant, PlantConfig};
use crate::signals::{Channels, TimeSeries};
use crate::workspace::{axis_ranges, InputBox};
use crate::{ActuatorVec6, Axis, Error, Pose6, Result, VoltageVec6};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AntiWindup {
    /// Freeze an integrator while its increment would push a saturated
    /// output further past its limit.
    #[default]
    Conditional,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl AxisGains {
    pub const NOMINAL: AxisGains = AxisGains {
        kp: 0.1,
        ki: 300.0,
        kd: 0.0,
    };
}

impl Default for AxisGains {
    fn default() -> Self {
        AxisGains::NOMINAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidGains {
    pub axes: [AxisGains; 6],
    /// Output limits. In a closed loop these bound the actuator voltage.
    pub output_min: f64,
    pub output_max: f64,
    pub anti_windup: AntiWindup,
    /// Time constant of the first-order derivative filter, s. `None` leaves
    /// the derivative unfiltered.
    pub derivative_filter_s: Option<f64>,
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains::uniform(AxisGains::NOMINAL)
    }
}

impl PidGains {
    pub fn uniform(gains: AxisGains) -> Self {
        PidGains {
            axes: [gains; 6],
            output_min: 0.0,
            output_max: 150.0,
            anti_windup: AntiWindup::Conditional,
            derivative_filter_s: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.axes.iter().enumerate() {
            for (name, v) in [("kp", g.kp), ("ki", g.ki), ("kd", g.kd)] {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::invalid(
                        "gains",
                        format!("axis {i} {name} = {v} must be finite and >= 0"),
                    ));
                }
            }
        }
        if !(self.output_min.is_finite() && self.output_max.is_finite() && self.output_min < self.output_max) {
            return Err(Error::invalid(
                "gains.output_limits",
                format!("need min < max, got [{}, {}]", self.output_min, self.output_max),
            ));
        }
        if let Some(tau) = self.derivative_filter_s {
            if !(tau.is_finite() && tau > 0.0) {
                return Err(Error::invalid("gains.derivative_filter_s", "must be > 0"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: [f64; 6],
    prev_error: Option<[f64; 6]>,
    derivative: [f64; 6],
}

impl PidState {
    pub fn new() -> Self {
        PidState::default()
    }
}

/// Tentative update: the new integral and the efforts with and without it.
struct Proposal {
    integral: [f64; 6],
    derivative: [f64; 6],
    with_integral: [f64; 6],
    frozen: [f64; 6],
}

fn propose(gains: &PidGains, state: &PidState, e: &[f64; 6], dt: f64) -> Proposal {
    let mut p = Proposal {
        integral: [0.0; 6],
        derivative: [0.0; 6],
        with_integral: [0.0; 6],
        frozen: [0.0; 6],
    };
    for k in 0..6 {
        let g = gains.axes[k];
        let raw_rate = match state.prev_error {
            Some(prev) => (e[k] - prev[k]) / dt,
            None => 0.0,
        };
        let d = match gains.derivative_filter_s {
            Some(tau) => (tau * state.derivative[k] + dt * raw_rate) / (tau + dt),
            None => raw_rate,
        };
        let i_new = state.integral[k] + e[k] * dt;
        let base = g.kp * e[k] + g.kd * d;
        p.integral[k] = i_new;
        p.derivative[k] = d;
        p.with_integral[k] = base + g.ki * i_new;
        p.frozen[k] = base + g.ki * state.integral[k];
    }
    p
}

fn commit(state: &mut PidState, p: &Proposal, e: &[f64; 6], freeze: &[bool; 6]) {
    for ((slot, &new), &frozen) in state.integral.iter_mut().zip(&p.integral).zip(freeze) {
        if !frozen {
            *slot = new;
        }
    }
    state.derivative = p.derivative;
    state.prev_error = Some(*e);
}

/// One controller update. The integral uses backward Euler, the derivative
/// a backward difference (zero on the first call). The output is clamped to
/// the gain limits.
pub fn pid_step(gains: &PidGains, state: &mut PidState, e: &[f64; 6], dt: f64) -> [f64; 6] {
    debug_assert!(dt > 0.0);
    let p = propose(gains, state, e, dt);
    let mut freeze = [false; 6];
    if gains.anti_windup == AntiWindup::Conditional {
        for k in 0..6 {
            let increment = gains.axes[k].ki * e[k] * dt;
            let u = p.with_integral[k];
            freeze[k] = (u > gains.output_max && increment > 0.0) || (u < gains.output_min && increment < 0.0);
        }
    }
    commit(state, &p, e, &freeze);
    core::array::from_fn(|k| {
        let u = if freeze[k] { p.frozen[k] } else { p.with_integral[k] };
        u.clamp(gains.output_min, gains.output_max)
    })
}

/// Where the PID acts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlMode {
    /// One loop per pose axis; effort decoupled through the inverse Jacobian.
    #[default]
    TaskSpace,
    /// Pose error mapped to actuator space first; one loop per actuator.
    PerActuator,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoopConfig {
    pub control_rate_hz: f64,
    /// Plant integration step, s.
    pub sim_dt: f64,
    /// Jacobian assumed by the controller.
    pub nominal_jacobian: Jacobian6,
    /// Voltage about which effort is applied, V.
    pub operating_point_v: f64,
    pub mode: ControlMode,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            control_rate_hz: 10_000.0,
            sim_dt: 1e-5,
            nominal_jacobian: Jacobian6::nominal(),
            operating_point_v: 75.0,
            mode: ControlMode::TaskSpace,
        }
    }
}

impl LoopConfig {
    /// Plant steps per control tick. Fails unless the control period is an
    /// integer multiple of `sim_dt`.
    pub fn substeps(&self) -> Result<usize> {
        substeps(self.control_rate_hz, self.sim_dt)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.operating_point_v.is_finite()) {
            return Err(Error::invalid("loop.operating_point_v", "must be finite"));
        }
        self.substeps().map(|_| ())
    }
}

fn substeps(rate_hz: f64, dt: f64) -> Result<usize> {
    if !(rate_hz.is_finite() && rate_hz > 0.0 && dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("loop", "control rate and sim_dt must be > 0"));
    }
    let ratio = 1.0 / (rate_hz * dt);
    let n = libm::round(ratio);
    if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
        return Err(Error::invalid(
            "loop",
            format!("control period 1/{rate_hz} s is not a multiple of sim_dt {dt} s"),
        ));
    }
    Ok(n as usize)
}

/// Everything recorded during a run, one entry per control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub reference: TimeSeries,
    /// True pose relative to the sensor zero.
    pub true_pose: TimeSeries,
    pub measured: TimeSeries,
    /// `reference − measured`.
    pub error: TimeSeries,
    pub voltage: TimeSeries,
    pub voltage_saturated: Vec<bool>,
    pub sensor_saturated: Vec<bool>,
    /// Largest |h| over the actuators, µm.
    pub hysteresis_peak: Vec<f64>,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    pub fn rate_hz(&self) -> f64 {
        self.reference.rate_hz()
    }
}

struct Recorder {
    reference: Vec<[f64; 6]>,
    true_pose: Vec<[f64; 6]>,
    measured: Vec<[f64; 6]>,
    error: Vec<[f64; 6]>,
    voltage: Vec<[f64; 6]>,
    voltage_saturated: Vec<bool>,
    sensor_saturated: Vec<bool>,
    hysteresis_peak: Vec<f64>,
}

impl Recorder {
    fn with_capacity(n: usize) -> Self {
        Recorder {
            reference: Vec::with_capacity(n),
            true_pose: Vec::with_capacity(n),
            measured: Vec::with_capacity(n),
            error: Vec::with_capacity(n),
            voltage: Vec::with_capacity(n),
            voltage_saturated: Vec::with_capacity(n),
            sensor_saturated: Vec::with_capacity(n),
            hysteresis_peak: Vec::with_capacity(n),
        }
    }

    fn finish(self, rate_hz: f64) -> Result<RunRecord> {
        Ok(RunRecord {
            reference: TimeSeries::new(rate_hz, Channels::Pose, self.reference)?,
            true_pose: TimeSeries::new(rate_hz, Channels::Pose, self.true_pose)?,
            measured: TimeSeries::new(rate_hz, Channels::Pose, self.measured)?,
            error: TimeSeries::new(rate_hz, Channels::Pose, self.error)?,
            voltage: TimeSeries::new(rate_hz, Channels::Voltage, self.voltage)?,
            voltage_saturated: self.voltage_saturated,
            sensor_saturated: self.sensor_saturated,
            hysteresis_peak: self.hysteresis_peak,
        })
    }
}

/// Bound beyond which a run counts as diverged: ten times the reachable
/// range of each axis over the actuator stroke.
fn divergence_bounds(config: &PlantConfig) -> Result<[f64; 6]> {
    let stroke = config.actuator.stroke_um;
    let input = InputBox::new([0.0; 6], [stroke; 6], f64::INFINITY)?;
    let ranges = axis_ranges(&config.jacobian, &input);
    Ok(ranges.map(|r| 10.0 * r.width()))
}

fn check_divergence(pose: &Pose6, bounds: &[f64; 6], time_s: f64) -> Result<()> {
    for axis in Axis::ALL {
        let value = pose.axis(axis);
        let bound = bounds[axis.index()];
        if !value.is_finite() || value.abs() > bound {
            return Err(Error::Unstable {
                time_s,
                axis,
                value,
                bound,
            });
        }
    }
    Ok(())
}

/// Runs the feedback loop over the whole reference. The plant starts settled
/// at the operating point with its sensors zeroed there, so the reference is
/// a displacement about that pose.
pub fn closed_loop_run(
    plant_config: &PlantConfig,
    gains: &PidGains,
    loop_config: &LoopConfig,
    reference: &TimeSeries,
    seed: u64,
) -> Result<RunRecord> {
    gains.validate()?;
    loop_config.validate()?;
    let n_sub = loop_config.substeps()?;
    if reference.channels() != Channels::Pose {
        return Err(Error::invalid("reference", "must hold pose channels"));
    }
    let rate = loop_config.control_rate_hz;
    if (reference.rate_hz() - rate).abs() > 1e-9 * rate {
        return Err(Error::invalid(
            "reference",
            format!("sampled at {} Hz, control runs at {rate} Hz", reference.rate_hz()),
        ));
    }

    let j_inv = loop_config.nominal_jacobian.inverse()?;
    let volts_per_um = plant_config.actuator.volts_per_um();
    let op = loop_config.operating_point_v;
    // Effort to voltage delta, and error to controller input.
    let (effort_map, error_map): (Matrix6<f64>, Matrix6<f64>) = match loop_config.mode {
        ControlMode::TaskSpace => (j_inv * volts_per_um, Matrix6::identity()),
        ControlMode::PerActuator => (Matrix6::identity() * volts_per_um, j_inv),
    };
    let bounds = divergence_bounds(plant_config)?;
    let ctrl_dt = 1.0 / rate;

    let mut plant = Plant::settled_at(*plant_config, VoltageVec6::splat(op), seed)?;
    let mut pid = PidState::new();
    let mut rec = Recorder::with_capacity(reference.len());

    for (tick, r) in reference.samples().iter().enumerate() {
        let meas = plant.measure();
        let pose_err = Pose6(*r) - meas.pose;
        let e: [f64; 6] = (error_map * Vector6::from(pose_err.0)).into();

        let p = propose(gains, &pid, &e, ctrl_dt);
        let to_volts = |u: &[f64; 6]| -> [f64; 6] {
            let dv = effort_map * Vector6::from(*u);
            core::array::from_fn(|j| op + dv[j])
        };
        let mut v = to_volts(&p.with_integral);
        let mut freeze = [false; 6];
        if gains.anti_windup == AntiWindup::Conditional {
            for a in 0..6 {
                let increment = gains.axes[a].ki * e[a] * ctrl_dt;
                freeze[a] = increment != 0.0
                    && (0..6).any(|j| {
                        let dv = effort_map[(j, a)] * increment;
                        (v[j] > gains.output_max && dv > 0.0) || (v[j] < gains.output_min && dv < 0.0)
                    });
            }
            if freeze.iter().any(|&f| f) {
                let u: [f64; 6] = core::array::from_fn(|a| if freeze[a] { p.frozen[a] } else { p.with_integral[a] });
                v = to_volts(&u);
            }
        }
        commit(&mut pid, &p, &e, &freeze);
        let clamped = VoltageVec6(v.map(|x| x.clamp(gains.output_min, gains.output_max)));
        let saturated = v.iter().any(|&x| x < gains.output_min || x > gains.output_max);

        rec.reference.push(*r);
        rec.true_pose.push(plant.pose_from_zero().0);
        rec.measured.push(meas.pose.0);
        rec.error.push(pose_err.0);
        rec.voltage.push(clamped.0);
        rec.voltage_saturated.push(saturated);
        rec.sensor_saturated.push(meas.any_saturated());
        rec.hysteresis_peak.push(plant.hysteresis_peak());

        for _ in 0..n_sub {
            plant.advance(&clamped, loop_config.sim_dt)?;
        }
        check_divergence(&plant.pose_from_zero(), &bounds, (tick + 1) as f64 * ctrl_dt)?;
    }
    rec.finish(rate)
}

/// Initial condition of an open-loop run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpenLoopStart {
    /// All actuators at `v_min`, structure at rest.
    Rest,
    /// Settled at this voltage on every actuator.
    OperatingPoint(f64),
}

/// Drives the plant with a voltage series and no feedback. The reference
/// column holds the hysteresis-free quasi-static pose `J·d_lin(v)`, relative
/// to the starting pose; errors are `reference − measured`.
pub fn open_loop_run(
    plant_config: &PlantConfig,
    voltage: &TimeSeries,
    sim_dt: f64,
    start: OpenLoopStart,
    seed: u64,
) -> Result<RunRecord> {
    if voltage.channels() != Channels::Voltage {
        return Err(Error::invalid("voltage", "must hold voltage channels"));
    }
    let n_sub = substeps(voltage.rate_hz(), sim_dt)?;
    let act = plant_config.actuator;
    let (mut plant, v0) = match start {
        OpenLoopStart::Rest => (Plant::new(*plant_config, seed)?, act.v_min),
        OpenLoopStart::OperatingPoint(v) => (Plant::settled_at(*plant_config, VoltageVec6::splat(v), seed)?, v),
    };
    let d0 = act.linear_displacement(v0);
    let bounds = divergence_bounds(plant_config)?;
    let mut rec = Recorder::with_capacity(voltage.len());

    for (tick, v) in voltage.samples().iter().enumerate() {
        let meas = plant.measure();
        let d_lin = ActuatorVec6(v.map(|x| act.linear_displacement(x) - d0));
        let reference = forward_map(&plant_config.jacobian, &d_lin);
        let command = VoltageVec6(*v);

        rec.reference.push(reference.0);
        rec.true_pose.push(plant.pose_from_zero().0);
        rec.measured.push(meas.pose.0);
        rec.error.push((reference - meas.pose).0);
        rec.voltage.push(*v);
        rec.voltage_saturated
            .push(v.iter().any(|&x| x < act.v_min || x > act.v_max));
        rec.sensor_saturated.push(meas.any_saturated());
        rec.hysteresis_peak.push(plant.hysteresis_peak());

        for _ in 0..n_sub {
            plant.advance(&command, sim_dt)?;
        }
        check_divergence(&plant.pose_from_zero(), &bounds, voltage.time(tick + 1))?;
    }
    rec.finish(voltage.rate_hz())
}
