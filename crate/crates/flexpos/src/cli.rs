//! Command-line interface: argument parsing and subcommand dispatch.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use flexpos_core::{ActuatorVec6, Axis, Pose6};

use crate::config::{Config, Trajectory};
use crate::experiments::{
    run_fit, run_freq_response, run_hysteresis, run_mobility, run_resolution, run_simulate, run_workspace,
};
use crate::output::{
    write_fit_csv, write_freq_csv, write_projections_csv, write_resolution_csv, write_run_csv, OutputDir,
};
use crate::Error;

#[derive(Debug, Parser)]
#[command(
    name = "flexpos",
    version,
    about = "Six-axis piezo positioner: kinematics, workspace and closed-loop experiments"
)]
pub struct Cli {
    /// JSON configuration file; absent sections take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(
        long,
        global = true,
        value_name = "DIR",
        env = "FLEXPOS_OUT",
        default_value = "flexpos-out"
    )]
    pub out: PathBuf,
    /// RNG seed; overrides the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args, Default)]
pub struct Overrides {
    /// Frequency override, Hz.
    #[arg(long)]
    pub freq: Option<f64>,
    /// Amplitude override, µm (rotational axes: ×10 µrad).
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Comma-separated axes, e.g. `x,y` or `z`.
    #[arg(long, value_delimiter = ',')]
    pub axes: Option<Vec<String>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Degrees of freedom from the mobility criterion.
    Mobility,
    /// Axis ranges, amplification, workspace volumes and force budget.
    Workspace,
    /// Least-squares Jacobian estimate.
    FitJacobian {
        /// CSV with columns d1..d6 (µm) then x, y, z (µm), rx, ry, rz (µrad).
        /// Without it, samples are synthesized from the configured Jacobian.
        #[arg(long, value_name = "CSV")]
        data: Option<PathBuf>,
    },
    /// Closed-loop tracking of the configured trajectory.
    Simulate {
        #[arg(long, value_enum)]
        trajectory: Option<TrajectoryArg>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Staircase resolution protocol.
    Resolution {
        /// Multiplies the configured sensor noise.
        #[arg(long, default_value_t = 1.0)]
        noise_scale: f64,
    },
    /// Open- versus closed-loop hysteresis on one axis.
    Hysteresis {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Chirp frequency response and resonance peaks.
    FreqResponse {
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum TrajectoryArg {
    Step,
    Sine,
    Circle,
    Rose,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Mobility => "mobility",
            Command::Workspace => "workspace",
            Command::FitJacobian { .. } => "fit-jacobian",
            Command::Simulate { .. } => "simulate",
            Command::Resolution { .. } => "resolution",
            Command::Hysteresis { .. } => "hysteresis",
            Command::FreqResponse { .. } => "freq-response",
        }
    }
}

/// Loads the configuration and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<Config, Error> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Simulate { trajectory, overrides } => {
            let s = &mut cfg.simulate;
            if let Some(t) = trajectory {
                s.trajectory = match t {
                    TrajectoryArg::Step => Trajectory::Step,
                    TrajectoryArg::Sine => Trajectory::Sine,
                    TrajectoryArg::Circle => Trajectory::Circle,
                    TrajectoryArg::Rose => Trajectory::Rose,
                };
            }
            s.freq_hz = overrides.freq.unwrap_or(s.freq_hz);
            s.amplitude = overrides.amplitude.unwrap_or(s.amplitude);
            if let Some(a) = &overrides.axes {
                s.axes = a.clone();
            }
        }
        Command::Hysteresis { overrides } => {
            let h = &mut cfg.hysteresis;
            h.freq_hz = overrides.freq.unwrap_or(h.freq_hz);
            h.amplitude = overrides.amplitude.unwrap_or(h.amplitude);
            if let Some(a) = &overrides.axes {
                match a.as_slice() {
                    [one] => h.axis = one.clone(),
                    _ => return Err(Error::Usage("hysteresis takes exactly one axis".into())),
                }
            }
        }
        Command::FreqResponse { overrides } => {
            let f = &mut cfg.freq_response;
            if overrides.freq.is_some() {
                return Err(Error::Usage(
                    "freq-response sweeps a band; set freq_response.f0_hz/f1_hz in the config".into(),
                ));
            }
            if let Some(a) = overrides.amplitude {
                for (k, v) in f.amplitudes.iter_mut().enumerate() {
                    let axis = Axis::from_index(k).expect("six axes");
                    *v = if axis.is_rotation() { 10.0 * a } else { a };
                }
            }
            if let Some(a) = &overrides.axes {
                f.axes = a.clone();
            }
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_fit_data(path: &Path) -> Result<Vec<(ActuatorVec6, Pose6)>, Error> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut samples = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        if rec.len() != 12 {
            return Err(Error::Data(format!(
                "{} row {}: expected 12 columns, found {}",
                path.display(),
                i + 1,
                rec.len()
            )));
        }
        let mut v = [0.0; 12];
        for (k, field) in rec.iter().enumerate() {
            v[k] = field.trim().parse().map_err(|_| {
                Error::Data(format!(
                    "{} row {} column {}: `{field}` is not a number",
                    path.display(),
                    i + 1,
                    k + 1
                ))
            })?;
        }
        let mut u = [0.0; 6];
        let mut p = [0.0; 6];
        u.copy_from_slice(&v[..6]);
        p.copy_from_slice(&v[6..]);
        samples.push((ActuatorVec6(u), Pose6(p)));
    }
    Ok(samples)
}

fn fmt_axes(values: &[f64; 6], precision: usize) -> String {
    Axis::ALL
        .iter()
        .map(|a| format!("{} {:.*} {}", a.label(), precision, values[a.index()], a.unit()))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Runs one subcommand, writing its files to the output directory, and
/// returns the summary text.
pub fn run(cli: &Cli) -> Result<String, Error> {
    let cfg = resolve_config(cli)?;
    let name = cli.command.name();
    let mut out = OutputDir::create(&cli.out)?;
    let mut s = String::new();
    let _ = writeln!(s, "{name} (seed {}, config {})", cfg.seed, &cfg.hash()[..12]);

    match &cli.command {
        Command::Mobility => {
            let dof = run_mobility(&cfg)?;
            let _ = writeln!(s, "degrees of freedom: {dof}");
        }
        Command::Workspace => {
            let w = run_workspace(&cfg)?;
            write_projections_csv(&out.file("projections.csv"), &w.projections)?;
            let widths = w.summary.widths();
            let _ = writeln!(s, "ranges: {}", fmt_axes(&widths, 1));
            let a = w.summary.amplification;
            let _ = writeln!(s, "amplification: x {:.2}, y {:.2}, z {:.2}", a[0], a[1], a[2]);
            let _ = writeln!(
                s,
                "volume: translational {:.4e} um^3, rotational {:.4e} urad^3",
                w.summary.translational_volume, w.summary.rotational_volume
            );
            let _ = writeln!(s, "jacobian condition number: {:.2}", w.condition_number);
            let _ = writeln!(s, "required actuator force: {:.1} N", w.required_force_n);
            let c = &w.compliance;
            let d = w.unit_force_deflection_um;
            let _ = writeln!(
                s,
                "compliance: relative asymmetry {:.4}, positive diagonal {}, {}",
                c.relative_asymmetry,
                c.positive_diagonal,
                if c.passed() { "pass" } else { "FAIL" }
            );
            let _ = writeln!(
                s,
                "deflection per newton: x {:.3}, y {:.3}, z {:.3} um",
                d[0], d[1], d[2]
            );
        }
        Command::FitJacobian { data } => {
            let samples = data.as_deref().map(read_fit_data).transpose()?;
            let report = run_fit(&cfg, samples.as_deref())?;
            write_fit_csv(&out.file("jacobian_fit.csv"), &report)?;
            let _ = writeln!(s, "samples: {}", report.fit.samples);
            let _ = writeln!(s, "rms residual: {}", fmt_axes(&report.fit.rms_residual, 4));
            if let Some(dev) = report.max_abs_deviation() {
                let _ = writeln!(s, "max |estimate - truth|: {dev:.3e}");
            }
        }
        Command::Simulate { .. } => {
            let r = run_simulate(&cfg)?;
            write_run_csv(&out.file("run.csv"), &r.record)?;
            let _ = writeln!(s, "samples: {} at {} Hz", r.record.len(), r.record.rate_hz());
            let _ = writeln!(s, "rms error: {}", fmt_axes(&r.tracking.rms, 4));
            let _ = writeln!(s, "max error: {}", fmt_axes(&r.tracking.max_abs, 4));
            let sat = r.record.voltage_saturated.iter().filter(|&&b| b).count();
            let _ = writeln!(s, "voltage-saturated ticks: {sat}");
        }
        Command::Resolution { noise_scale } => {
            let r = run_resolution(&cfg, *noise_scale)?;
            write_run_csv(&out.file("run.csv"), &r.record)?;
            write_resolution_csv(&out.file("dwells.csv"), &r.report, &r.layout)?;
            for a in &r.report.axes {
                let _ = writeln!(
                    s,
                    "{}: step {} {}, pooled std {:.4}, min separation {:.4}, ratio {:.1}, {}",
                    a.axis.label(),
                    a.step,
                    a.axis.unit(),
                    a.pooled_std,
                    a.min_separation,
                    a.separation_ratio,
                    if a.pass { "pass" } else { "FAIL" }
                );
            }
        }
        Command::Hysteresis { .. } => {
            let r = run_hysteresis(&cfg)?;
            write_run_csv(&out.file("open_loop.csv"), &r.open_record)?;
            write_run_csv(&out.file("closed_loop.csv"), &r.closed_record)?;
            for (label, m) in [("open loop", &r.open_loop), ("closed loop", &r.closed_loop)] {
                let _ = writeln!(
                    s,
                    "{label}: width {:.3}% (mid-range {:.3}%), area {:.4}, R^2 {:.6}",
                    m.width_pct, m.mid_width_pct, m.area, m.r_squared
                );
            }
            let _ = writeln!(s, "reduction on {}: {:.1}x", r.axis.label(), r.reduction());
        }
        Command::FreqResponse { .. } => {
            let r = run_freq_response(&cfg)?;
            write_run_csv(&out.file("run.csv"), &r.record)?;
            write_freq_csv(&out.file("freq_response.csv"), &r.response)?;
            let _ = writeln!(s, "band: {:.1}-{:.1} Hz", r.band_hz.0, r.band_hz.1);
            for a in &r.response.axes {
                let (f, m) = a.max_magnitude(&r.response.freq_hz);
                let peaks: Vec<String> = a.peaks_hz.iter().map(|p| format!("{p:.2}")).collect();
                let _ = writeln!(
                    s,
                    "{}: max {m:.2} dB at {f:.2} Hz, peaks [{}] Hz",
                    a.axis.label(),
                    peaks.join(", ")
                );
            }
        }
    }
    out.finish(name, &cfg, &s)?;
    Ok(s)
}
