//! CSV, manifest and summary files.
//!
//! Every CSV starts with a header naming each column and its unit. Numbers
//! use Rust's shortest round-trip formatting, so identical runs produce
//! byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use flexpos_core::analysis::{FreqResponse, ResolutionReport};
use flexpos_core::control::RunRecord;
use flexpos_core::signals::{Channels, StaircaseLayout};
use flexpos_core::workspace::Polygon2D;
use flexpos_core::Axis;

use crate::experiments::FitReport;
use crate::{Config, Error};

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, Error> {
    let file = fs::File::create(path).map_err(|e| Error::io(format!("cannot create {}", path.display()), e))?;
    Ok(csv::Writer::from_writer(file))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::io(format!("cannot write {}", path.display()), e.into())
}

fn write_rows(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<(), Error> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("cannot write {}", path.display()), e))
}

pub fn run_header() -> Vec<String> {
    let mut h = vec!["time_s".to_string()];
    for prefix in ["ref_", "true_", "meas_", "err_"] {
        h.extend(Channels::Pose.labels().iter().map(|l| format!("{prefix}{l}")));
    }
    h.extend(Channels::Voltage.labels().iter().map(|l| l.to_string()));
    h.extend(["voltage_saturated", "sensor_saturated", "hysteresis_peak_um"].map(String::from));
    h
}

/// One row per control tick.
pub fn write_run_csv(path: &Path, record: &RunRecord) -> Result<(), Error> {
    let rows = (0..record.len()).map(|i| {
        let mut row = Vec::with_capacity(31);
        row.push(record.reference.time(i).to_string());
        for series in [
            &record.reference,
            &record.true_pose,
            &record.measured,
            &record.error,
            &record.voltage,
        ] {
            row.extend(series.sample(i).iter().map(f64::to_string));
        }
        row.push(u8::from(record.voltage_saturated[i]).to_string());
        row.push(u8::from(record.sensor_saturated[i]).to_string());
        row.push(record.hysteresis_peak[i].to_string());
        row
    });
    write_rows(path, &run_header(), rows)
}

pub fn write_freq_csv(path: &Path, response: &FreqResponse) -> Result<(), Error> {
    let header = ["freq_hz", "axis", "mag_db", "phase_rad"].map(String::from);
    let rows = response.axes.iter().flat_map(|a| {
        response.freq_hz.iter().enumerate().map(move |(i, f)| {
            vec![
                f.to_string(),
                a.axis.label().to_string(),
                a.magnitude_db[i].to_string(),
                a.phase_rad[i].to_string(),
            ]
        })
    });
    write_rows(path, &header, rows)
}

pub fn write_projections_csv(path: &Path, polygons: &[Polygon2D]) -> Result<(), Error> {
    let header = ["plane", "vertex", "coord1", "coord2", "unit"].map(String::from);
    let rows = polygons.iter().flat_map(|p| {
        let unit = p.axes.0.unit();
        p.vertices.iter().enumerate().map(move |(i, v)| {
            vec![
                p.label(),
                i.to_string(),
                v[0].to_string(),
                v[1].to_string(),
                unit.to_string(),
            ]
        })
    });
    write_rows(path, &header, rows)
}

pub fn write_fit_csv(path: &Path, report: &FitReport) -> Result<(), Error> {
    let header = ["pose_axis", "actuator", "estimate", "std_error", "truth", "unit"].map(String::from);
    let fit = &report.fit;
    let rows = Axis::ALL.into_iter().flat_map(|axis| {
        let r = axis.index();
        (0..6).map(move |c| {
            vec![
                axis.label().to_string(),
                (c + 1).to_string(),
                fit.jacobian.entry(r, c).to_string(),
                fit.std_errors[r][c].to_string(),
                report.truth.map(|t| t.entry(r, c).to_string()).unwrap_or_default(),
                format!("{}_per_um", axis.unit()),
            ]
        })
    });
    write_rows(path, &header, rows)
}

pub fn write_resolution_csv(path: &Path, report: &ResolutionReport, layout: &StaircaseLayout) -> Result<(), Error> {
    let header = ["axis", "dwell", "level", "mean", "std", "unit"].map(String::from);
    let rows = report.axes.iter().flat_map(|a| {
        (0..a.means.len()).map(move |d| {
            vec![
                a.axis.label().to_string(),
                d.to_string(),
                (layout.level(d) * a.step).to_string(),
                a.means[d].to_string(),
                a.stds[d].to_string(),
                a.axis.unit().to_string(),
            ]
        })
    });
    write_rows(path, &header, rows)
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub subcommand: &'a str,
    pub config_hash: String,
    pub seed: u64,
    pub toolkit_version: &'static str,
    pub timestamp_unix_s: u64,
    pub files: Vec<String>,
}

/// Collects emitted files and writes the manifest and summary at the end.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, Error> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("cannot create {}", dir.display()), e))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Path for `name`, recorded in the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    pub fn finish(mut self, subcommand: &str, config: &Config, summary: &str) -> Result<(), Error> {
        let summary_path = self.file("summary.txt");
        fs::write(&summary_path, summary)
            .map_err(|e| Error::io(format!("cannot write {}", summary_path.display()), e))?;
        let config_path = self.file("config.json");
        fs::write(&config_path, config.to_json_pretty())
            .map_err(|e| Error::io(format!("cannot write {}", config_path.display()), e))?;
        let timestamp_unix_s = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = Manifest {
            subcommand,
            config_hash: config.hash(),
            seed: config.seed,
            toolkit_version: env!("CARGO_PKG_VERSION"),
            timestamp_unix_s,
            files: self.files.clone(),
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(format!("cannot write {}", path.display()), e))
    }
}
