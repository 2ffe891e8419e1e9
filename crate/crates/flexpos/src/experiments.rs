//! Experiment protocols. Each function takes a validated [`Config`] and
//! returns in-memory results; writing files is left to [`crate::output`].

use flexpos_core::analysis::{
    frequency_response, hysteresis_metrics, resolution_check, tracking_errors, FreqOptions, FreqResponse,
    HysteresisMetric, ResolutionOptions, ResolutionReport, TrackingReport,
};
use flexpos_core::control::{closed_loop_run, open_loop_run, OpenLoopStart, RunRecord};
use flexpos_core::kinematics::{
    fit_jacobian, inverse_map, mobility, output_deflection, required_actuator_force, synthetic_fit_samples,
    validate_compliance, ComplianceReport, Jacobian6, JacobianFit,
};
use flexpos_core::plant::PlantConfig;
use flexpos_core::signals::{
    chirp, circle, constant, rose, sine, staircase, Channels, Rose, StaircaseLayout, TimeSeries,
};
use flexpos_core::workspace::{summarize, workspace_projections, Polygon2D, WorkspaceSummary};
use flexpos_core::{ActuatorVec6, Axis, Pose6, Wrench6};

use crate::config::{parse_axes, Config, Trajectory};
use crate::Error;

/// Rotational channels take this multiple of a translational amplitude.
pub const ROTATION_SCALE: f64 = 10.0;

fn unit_scale(axis: Axis) -> f64 {
    if axis.is_rotation() {
        ROTATION_SCALE
    } else {
        1.0
    }
}

pub fn run_mobility(cfg: &Config) -> Result<i64, Error> {
    Ok(mobility(&cfg.mobility_params()?))
}

#[derive(Debug, Clone)]
pub struct WorkspaceReport {
    pub summary: WorkspaceSummary,
    pub projections: Vec<Polygon2D>,
    pub condition_number: f64,
    /// Actuator force needed to reach the top of the input box, N.
    pub required_force_n: f64,
    pub compliance: ComplianceReport,
    /// Deflection under a unit force along each translational axis, µm.
    pub unit_force_deflection_um: [f64; 3],
}

pub fn run_workspace(cfg: &Config) -> Result<WorkspaceReport, Error> {
    let jac = cfg.jacobian()?;
    let input = cfg.input_box()?;
    let compliance = cfg.compliance()?;
    let stroke = input
        .hi()
        .iter()
        .zip(input.lo())
        .fold(0.0_f64, |m, (h, l)| m.max(h - l));
    let deflection = |k: usize| {
        let mut w = Wrench6::ZERO;
        w[k] = 1.0;
        output_deflection(&compliance, &w)[k]
    };
    Ok(WorkspaceReport {
        summary: summarize(&jac, &input)?,
        projections: workspace_projections(&jac, &input),
        condition_number: jac.condition_number(),
        required_force_n: required_actuator_force(cfg.input_stiffness()?, stroke)?,
        compliance: validate_compliance(&compliance),
        unit_force_deflection_um: [deflection(0), deflection(1), deflection(2)],
    })
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub fit: JacobianFit,
    /// Jacobian the samples were generated from, if synthetic.
    pub truth: Option<Jacobian6>,
}

impl FitReport {
    /// Largest |estimate − truth| over the 36 entries.
    pub fn max_abs_deviation(&self) -> Option<f64> {
        let truth = self.truth.as_ref()?;
        let mut m = 0.0_f64;
        for r in 0..6 {
            for c in 0..6 {
                m = m.max((self.fit.jacobian.entry(r, c) - truth.entry(r, c)).abs());
            }
        }
        Some(m)
    }
}

/// Fits a Jacobian to `data`, or to synthetic samples of the configured
/// Jacobian when no data is given.
pub fn run_fit(cfg: &Config, data: Option<&[(ActuatorVec6, Pose6)]>) -> Result<FitReport, Error> {
    match data {
        Some(samples) => Ok(FitReport {
            fit: fit_jacobian(samples)?,
            truth: None,
        }),
        None => {
            let jac = cfg.jacobian()?;
            let samples = synthetic_fit_samples(
                &jac,
                &cfg.input_box()?,
                cfg.fit_jacobian.samples,
                cfg.fit_jacobian.noise_std,
                cfg.seed,
            );
            Ok(FitReport {
                fit: fit_jacobian(&samples)?,
                truth: Some(jac),
            })
        }
    }
}

/// Reference trajectory of the `simulate` subcommand at the control rate.
pub fn simulate_reference(cfg: &Config) -> Result<TimeSeries, Error> {
    let s = &cfg.simulate;
    let rate = cfg.loop_rates.control_rate_hz;
    let axes = parse_axes("simulate.axes", &s.axes)?;
    let per_axis = |amp: f64| {
        let mut a = [0.0; 6];
        for &ax in &axes {
            a[ax.index()] = amp * unit_scale(ax);
        }
        a
    };
    let series = match s.trajectory {
        Trajectory::Step => constant(per_axis(s.amplitude), s.duration_s, rate)?,
        Trajectory::Sine => sine(per_axis(s.amplitude), s.freq_hz, s.duration_s, rate)?,
        Trajectory::Circle => circle(
            (axes[0], axes[1]),
            s.amplitude * unit_scale(axes[0]),
            s.freq_hz,
            s.duration_s,
            rate,
        )?,
        Trajectory::Rose => {
            let spec = Rose {
                axes: (axes[0], axes[1]),
                amplitude: s.amplitude * unit_scale(axes[0]),
                petals: s.petals,
                third: axes.get(2).map(|&a| (a, s.third_amplitude * unit_scale(a))),
            };
            rose(&spec, s.freq_hz, s.duration_s, rate)?
        }
    };
    Ok(series)
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub record: RunRecord,
    pub tracking: TrackingReport,
}

pub fn run_closed_loop(cfg: &Config, reference: &TimeSeries) -> Result<RunRecord, Error> {
    Ok(closed_loop_run(
        &cfg.plant()?,
        &cfg.gains()?,
        &cfg.loop_config()?,
        reference,
        cfg.seed,
    )?)
}

pub fn run_simulate(cfg: &Config) -> Result<SimulateReport, Error> {
    let reference = simulate_reference(cfg)?;
    let record = run_closed_loop(cfg, &reference)?;
    let tracking = tracking_errors(&record.reference, &record.measured)?;
    Ok(SimulateReport { record, tracking })
}

/// |mean error| per axis over `window_s` ending at `end_s`.
pub fn steady_state_error(record: &RunRecord, end_s: f64, window_s: f64) -> Result<[f64; 6], Error> {
    let rate = record.rate_hz();
    let end = ((end_s * rate).round() as usize).min(record.len());
    let n = (window_s * rate).round() as usize;
    if n == 0 || n > end {
        return Err(Error::Usage(format!(
            "steady-state window of {window_s} s does not fit before t = {end_s} s"
        )));
    }
    let mut sum = [0.0; 6];
    for s in &record.error.samples()[end - n..end] {
        for k in 0..6 {
            sum[k] += s[k];
        }
    }
    Ok(sum.map(|v| (v / n as f64).abs()))
}

/// Closed-loop RMS tracking error of a sinusoid on every axis.
pub fn sine_tracking(cfg: &Config, amplitude: f64, freq_hz: f64, cycles: f64) -> Result<TrackingReport, Error> {
    let amps = Axis::ALL.map(|a| amplitude * unit_scale(a));
    let reference = sine(amps, freq_hz, cycles / freq_hz, cfg.loop_rates.control_rate_hz)?;
    let record = run_closed_loop(cfg, &reference)?;
    Ok(tracking_errors(&record.reference, &record.measured)?)
}

#[derive(Debug, Clone)]
pub struct ResolutionRun {
    pub layout: StaircaseLayout,
    pub record: RunRecord,
    pub report: ResolutionReport,
}

/// Closed-loop staircase on every axis with a non-zero step. `noise_scale`
/// multiplies the configured sensor noise.
pub fn run_resolution(cfg: &Config, noise_scale: f64) -> Result<ResolutionRun, Error> {
    let r = &cfg.resolution;
    let layout = StaircaseLayout {
        period_s: r.period_s,
        n_steps: r.n_steps,
        ascent_only: r.ascent_only,
    };
    let reference = staircase(r.steps, layout, cfg.loop_rates.control_rate_hz)?;
    let mut plant = cfg.plant()?;
    plant.sensor = plant.sensor.with_noise_scale(noise_scale);
    let record = closed_loop_run(&plant, &cfg.gains()?, &cfg.loop_config()?, &reference, cfg.seed)?;
    let opts = ResolutionOptions {
        threshold_sigma: r.threshold_sigma,
        settle_fraction: r.settle_fraction,
        ..ResolutionOptions::default()
    };
    let report = resolution_check(&record.measured, &layout, &r.steps, &opts)?;
    Ok(ResolutionRun { layout, record, report })
}

#[derive(Debug, Clone)]
pub struct HysteresisReport {
    pub axis: Axis,
    /// Commanded hysteresis-free pose against true pose, no feedback.
    pub open_loop: HysteresisMetric,
    /// Reference against measured pose under feedback.
    pub closed_loop: HysteresisMetric,
    pub open_record: RunRecord,
    pub closed_record: RunRecord,
}

impl HysteresisReport {
    /// Open-loop width over closed-loop width.
    pub fn reduction(&self) -> f64 {
        self.open_loop.width_pct / self.closed_loop.width_pct
    }
}

/// Voltages that move the stage along `direction` (task units) by `s(t)`,
/// scaled so the busiest actuator spans its full headroom about the
/// operating point.
fn directional_voltage(
    cfg: &Config,
    plant: &PlantConfig,
    direction: &Pose6,
    wave: &TimeSeries,
) -> Result<TimeSeries, Error> {
    let d = inverse_map(&plant.jacobian, direction)?;
    let op = cfg.loop_rates.operating_point_v;
    let g = plant.actuator.volts_per_um();
    let headroom = (plant.actuator.v_max - op).min(op - plant.actuator.v_min);
    let peak = d.max_abs() * g;
    let scale = if peak > 0.0 { headroom / peak } else { 0.0 };
    let samples = wave
        .samples()
        .iter()
        .map(|w| {
            std::array::from_fn(|j| (op + scale * g * d[j] * w[0]).clamp(plant.actuator.v_min, plant.actuator.v_max))
        })
        .collect();
    Ok(TimeSeries::new(wave.rate_hz(), Channels::Voltage, samples)?)
}

pub fn run_hysteresis(cfg: &Config) -> Result<HysteresisReport, Error> {
    let h = &cfg.hysteresis;
    let axis = parse_axes("hysteresis.axis", std::slice::from_ref(&h.axis))?[0];
    let k = axis.index();
    let rate = cfg.loop_rates.control_rate_hz;
    let duration = (h.cycles + 1) as f64 / h.freq_hz;
    let skip = (rate / h.freq_hz).round() as usize;
    let plant = cfg.plant()?;

    let mut unit = [0.0; 6];
    unit[0] = 1.0;
    let wave = sine(unit, h.freq_hz, duration, rate)?;
    let mut direction = Pose6::ZERO;
    direction[k] = 1.0;
    let voltage = directional_voltage(cfg, &plant, &direction, &wave)?;
    let open_record = open_loop_run(
        &plant,
        &voltage,
        cfg.loop_rates.sim_dt_s,
        OpenLoopStart::OperatingPoint(cfg.loop_rates.operating_point_v),
        cfg.seed,
    )?;
    let open_loop = hysteresis_metrics(
        &open_record.reference.column(k)[skip..],
        &open_record.true_pose.column(k)[skip..],
    )?;

    let mut amps = [0.0; 6];
    amps[k] = h.amplitude;
    let reference = sine(amps, h.freq_hz, duration, rate)?;
    let closed_record = run_closed_loop(cfg, &reference)?;
    let closed_loop = hysteresis_metrics(
        &closed_record.reference.column(k)[skip..],
        &closed_record.measured.column(k)[skip..],
    )?;

    Ok(HysteresisReport {
        axis,
        open_loop,
        closed_loop,
        open_record,
        closed_record,
    })
}

#[derive(Debug, Clone)]
pub struct FreqRun {
    pub band_hz: (f64, f64),
    pub record: RunRecord,
    pub response: FreqResponse,
}

/// Open-loop chirp on the configured axes; response of measured pose to the
/// commanded (hysteresis-free) pose.
pub fn run_freq_response(cfg: &Config) -> Result<FreqRun, Error> {
    let f = &cfg.freq_response;
    let rate = cfg.loop_rates.control_rate_hz;
    let axes = parse_axes("freq_response.axes", &f.axes)?;
    let mut amps = [0.0; 6];
    for a in &axes {
        amps[a.index()] = f.amplitudes[a.index()];
    }
    let sweep = chirp(amps, f.f0_hz, f.f1_hz, f.sweep_s, rate)?;
    let tail = (f.tail_s * rate).round() as usize;

    let plant = cfg.plant()?;
    // Actuator displacement per unit pose on each axis.
    let mut columns = [ActuatorVec6::ZERO; 6];
    for (a, col) in columns.iter_mut().enumerate() {
        let mut unit = Pose6::ZERO;
        unit[a] = 1.0;
        *col = inverse_map(&plant.jacobian, &unit)?;
    }
    let op = cfg.loop_rates.operating_point_v;
    let g = plant.actuator.volts_per_um();
    let mut samples: Vec<[f64; 6]> = sweep
        .samples()
        .iter()
        .map(|p| std::array::from_fn(|j| op + g * (0..6).map(|a| p[a] * columns[a][j]).sum::<f64>()))
        .collect();
    samples.extend(std::iter::repeat([op; 6]).take(tail));
    let voltage = TimeSeries::new(rate, Channels::Voltage, samples)?;
    let record = open_loop_run(
        &plant,
        &voltage,
        cfg.loop_rates.sim_dt_s,
        OpenLoopStart::OperatingPoint(op),
        cfg.seed,
    )?;

    let margin = f.band_margin * (f.f1_hz - f.f0_hz);
    let band_hz = (f.f0_hz + margin, f.f1_hz - margin);
    let opts = FreqOptions {
        peak_window: f.peak_window,
        peak_threshold_db: f.peak_threshold_db,
        ..FreqOptions::default()
    };
    let response = frequency_response(&record.reference, &record.measured, band_hz, &opts)?;
    Ok(FreqRun {
        band_hz,
        record,
        response,
    })
}
