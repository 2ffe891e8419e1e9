//! Reference and excitation waveforms as uniformly sampled series.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::{Axis, Error, Result};

/// What the six columns of a [`TimeSeries`] hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channels {
    /// Pose components, µm and µrad.
    Pose,
    /// Actuator voltages, V.
    Voltage,
    /// Actuator displacements, µm.
    Actuator,
}

impl Channels {
    pub fn labels(self) -> [&'static str; 6] {
        match self {
            Channels::Pose => ["x_um", "y_um", "z_um", "rx_urad", "ry_urad", "rz_urad"],
            Channels::Voltage => ["v1_V", "v2_V", "v3_V", "v4_V", "v5_V", "v6_V"],
            Channels::Actuator => ["d1_um", "d2_um", "d3_um", "d4_um", "d5_um", "d6_um"],
        }
    }
}

/// Uniformly sampled six-channel record; sample `i` is at `i / rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    rate_hz: f64,
    channels: Channels,
    samples: Vec<[f64; 6]>,
}

impl TimeSeries {
    pub fn new(rate_hz: f64, channels: Channels, samples: Vec<[f64; 6]>) -> Result<Self> {
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::invalid(
                "time series",
                format!("sample rate {rate_hz} must be > 0"),
            ));
        }
        if let Some(i) = samples.iter().position(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("time series", format!("sample {i} is not finite")));
        }
        Ok(TimeSeries {
            rate_hz,
            channels,
            samples,
        })
    }

    /// Samples `f(t)` at `round(duration · rate)` instants.
    pub fn from_fn(rate_hz: f64, duration_s: f64, channels: Channels, f: impl Fn(f64) -> [f64; 6]) -> Result<Self> {
        if !(duration_s.is_finite() && duration_s >= 0.0) {
            return Err(Error::invalid("duration", format!("{duration_s} must be >= 0")));
        }
        let n = libm::round(duration_s * rate_hz) as usize;
        let samples = (0..n).map(|i| f(i as f64 / rate_hz)).collect();
        TimeSeries::new(rate_hz, channels, samples)
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.rate_hz
    }

    pub fn samples(&self) -> &[[f64; 6]] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> [f64; 6] {
        self.samples[i]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[k]).collect()
    }

    /// Largest absolute value over all samples and channels.
    pub fn max_abs(&self) -> f64 {
        self.samples
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Timing of a staircase: dwell length and number of levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaircaseLayout {
    pub period_s: f64,
    pub n_steps: usize,
    /// Skip the symmetric descent back to zero.
    pub ascent_only: bool,
}

impl StaircaseLayout {
    pub fn dwells(&self) -> usize {
        if self.ascent_only {
            self.n_steps
        } else {
            2 * self.n_steps
        }
    }

    /// Level of dwell `k`, in multiples of the step height. The first step
    /// is taken at t = 0; the descent ends back at zero.
    pub fn level(&self, k: usize) -> f64 {
        if k < self.n_steps {
            (k + 1) as f64
        } else {
            (2 * self.n_steps - 1 - k) as f64
        }
    }

    pub fn duration(&self) -> f64 {
        self.dwells().max(1) as f64 * self.period_s
    }
}

/// Piecewise-constant staircase, right-continuous at step boundaries.
pub fn staircase(heights: [f64; 6], layout: StaircaseLayout, rate_hz: f64) -> Result<TimeSeries> {
    if !(layout.period_s > 0.0) || layout.period_s * rate_hz < 2.0 {
        return Err(Error::invalid(
            "staircase",
            "period must be positive and span at least two samples",
        ));
    }
    let per = libm::round(layout.period_s * rate_hz) as usize;
    let dwells = layout.dwells();
    let n = dwells.max(1) * per;
    let samples = (0..n)
        .map(|i| {
            if dwells == 0 {
                return [0.0; 6];
            }
            let level = layout.level(i / per);
            heights.map(|h| h * level)
        })
        .collect();
    TimeSeries::new(rate_hz, Channels::Pose, samples)
}

fn check_freq(freq_hz: f64, rate_hz: f64, max_fraction: f64) -> Result<()> {
    if !(freq_hz > 0.0 && freq_hz.is_finite()) {
        return Err(Error::invalid("frequency", format!("{freq_hz} Hz must be > 0")));
    }
    if freq_hz >= rate_hz * max_fraction {
        return Err(Error::invalid(
            "frequency",
            format!("{freq_hz} Hz too high for a {rate_hz} Hz sample rate"),
        ));
    }
    Ok(())
}

fn distinct(a: Axis, b: Axis) -> Result<()> {
    if a == b {
        Err(Error::invalid("axes", "trajectory axes must be distinct"))
    } else {
        Ok(())
    }
}

/// Circle in the `(first, second)` plane starting at `(radius, 0)`.
pub fn circle(plane: (Axis, Axis), radius: f64, freq_hz: f64, duration_s: f64, rate_hz: f64) -> Result<TimeSeries> {
    check_freq(freq_hz, rate_hz, 0.1)?;
    distinct(plane.0, plane.1)?;
    TimeSeries::from_fn(rate_hz, duration_s, Channels::Pose, |t| {
        let phase = 2.0 * PI * freq_hz * t;
        let mut s = [0.0; 6];
        s[plane.0.index()] = radius * libm::cos(phase);
        s[plane.1.index()] = radius * libm::sin(phase);
        s
    })
}

/// Rhodonea `r = A·sin(kθ)`, `θ = 2πft`, on two axes, with an optional
/// third axis following `A₃·sin(2πft)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rose {
    pub axes: (Axis, Axis),
    pub amplitude: f64,
    pub petals: u32,
    pub third: Option<(Axis, f64)>,
}

pub fn rose(spec: &Rose, freq_hz: f64, duration_s: f64, rate_hz: f64) -> Result<TimeSeries> {
    check_freq(freq_hz, rate_hz, 0.1)?;
    distinct(spec.axes.0, spec.axes.1)?;
    if spec.petals < 2 {
        return Err(Error::invalid("rose.petals", "k must be an integer >= 2"));
    }
    if let Some((axis, _)) = spec.third {
        if axis == spec.axes.0 || axis == spec.axes.1 {
            return Err(Error::invalid(
                "rose.third",
                "third axis must differ from the planar axes",
            ));
        }
    }
    let k = f64::from(spec.petals);
    TimeSeries::from_fn(rate_hz, duration_s, Channels::Pose, |t| {
        let theta = 2.0 * PI * freq_hz * t;
        let r = spec.amplitude * libm::sin(k * theta);
        let mut s = [0.0; 6];
        s[spec.axes.0.index()] = r * libm::cos(theta);
        s[spec.axes.1.index()] = r * libm::sin(theta);
        if let Some((axis, a3)) = spec.third {
            s[axis.index()] = a3 * libm::sin(theta);
        }
        s
    })
}

/// `Aₖ·sin(2πft)` on every axis.
pub fn sine(amplitudes: [f64; 6], freq_hz: f64, duration_s: f64, rate_hz: f64) -> Result<TimeSeries> {
    check_freq(freq_hz, rate_hz, 0.1)?;
    TimeSeries::from_fn(rate_hz, duration_s, Channels::Pose, |t| {
        let s = libm::sin(2.0 * PI * freq_hz * t);
        amplitudes.map(|a| a * s)
    })
}

/// Linear sweep `A·sin(2π(f₀t + (f₁−f₀)t²/(2T)))` over `[0, T)`.
pub fn chirp(amplitudes: [f64; 6], f0: f64, f1: f64, sweep_s: f64, rate_hz: f64) -> Result<TimeSeries> {
    if !(f0 > 0.0 && f1 >= f0) {
        return Err(Error::invalid("chirp", format!("need f1 >= f0 > 0, got {f0} -> {f1}")));
    }
    check_freq(f1, rate_hz, 0.25)?;
    if !(sweep_s > 0.0) {
        return Err(Error::invalid("chirp", "sweep time must be > 0"));
    }
    TimeSeries::from_fn(rate_hz, sweep_s, Channels::Pose, |t| {
        let s = libm::sin(chirp_phase(f0, f1, sweep_s, t));
        amplitudes.map(|a| a * s)
    })
}

/// Phase of the linear chirp at `t`, rad.
pub fn chirp_phase(f0: f64, f1: f64, sweep_s: f64, t: f64) -> f64 {
    2.0 * PI * (f0 * t + (f1 - f0) * t * t / (2.0 * sweep_s))
}

/// Instantaneous frequency of the linear chirp at `t`, Hz.
pub fn chirp_frequency(f0: f64, f1: f64, sweep_s: f64, t: f64) -> f64 {
    f0 + (f1 - f0) * t / sweep_s
}

pub fn constant(values: [f64; 6], duration_s: f64, rate_hz: f64) -> Result<TimeSeries> {
    TimeSeries::from_fn(rate_hz, duration_s, Channels::Pose, |_| values)
}

/// Serializable description of any generator.
#[derive(Debug, Clone, PartialEq)]
pub enum WaveformSpec {
    Staircase {
        heights: [f64; 6],
        layout: StaircaseLayout,
    },
    Circle {
        plane: (Axis, Axis),
        radius: f64,
        freq_hz: f64,
    },
    Rose {
        rose: Rose,
        freq_hz: f64,
    },
    Sine {
        amplitudes: [f64; 6],
        freq_hz: f64,
    },
    Chirp {
        amplitudes: [f64; 6],
        f0: f64,
        f1: f64,
        sweep_s: f64,
    },
    Constant {
        values: [f64; 6],
    },
}

impl WaveformSpec {
    /// Samples the waveform. Staircase and chirp carry their own length and
    /// ignore `duration_s`.
    pub fn generate(&self, duration_s: f64, rate_hz: f64) -> Result<TimeSeries> {
        match self {
            WaveformSpec::Staircase { heights, layout } => staircase(*heights, *layout, rate_hz),
            WaveformSpec::Circle { plane, radius, freq_hz } => circle(*plane, *radius, *freq_hz, duration_s, rate_hz),
            WaveformSpec::Rose { rose: r, freq_hz } => rose(r, *freq_hz, duration_s, rate_hz),
            WaveformSpec::Sine { amplitudes, freq_hz } => sine(*amplitudes, *freq_hz, duration_s, rate_hz),
            WaveformSpec::Chirp {
                amplitudes,
                f0,
                f1,
                sweep_s,
            } => chirp(*amplitudes, *f0, *f1, *sweep_s, rate_hz),
            WaveformSpec::Constant { values } => constant(*values, duration_s, rate_hz),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const RATE: f64 = 10_000.0;

    #[test]
    fn staircase_value_at_three_seconds() {
        let layout = StaircaseLayout {
            period_s: 2.0,
            n_steps: 5,
            ascent_only: false,
        };
        let s = staircase([0.0105, 0.0, 0.0, 0.0, 0.0, 0.0], layout, RATE).unwrap();
        assert_eq!(s.len(), 10 * 20_000);
        assert_abs_diff_eq!(s.sample(30_000)[0], 0.021, epsilon = 1e-15);
        // Right-continuous: the boundary sample already holds the new level.
        assert_abs_diff_eq!(s.sample(19_999)[0], 0.0105, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sample(20_000)[0], 0.021, epsilon = 1e-15);
        // Peak then symmetric descent to zero.
        assert_abs_diff_eq!(s.sample(5 * 20_000 - 1)[0], 0.0525, epsilon = 1e-15);
        assert_abs_diff_eq!(s.sample(5 * 20_000)[0], 0.042, epsilon = 1e-15);
        assert_eq!(s.sample(s.len() - 1)[0], 0.0);
    }

    #[test]
    fn zero_step_staircase_is_constant_zero() {
        let layout = StaircaseLayout {
            period_s: 2.0,
            n_steps: 0,
            ascent_only: false,
        };
        let s = staircase([1.0; 6], layout, 100.0).unwrap();
        assert_eq!(s.len(), 200);
        assert_eq!(s.max_abs(), 0.0);
    }

    #[test]
    fn staircase_needs_two_samples_per_period() {
        let layout = StaircaseLayout {
            period_s: 0.01,
            n_steps: 2,
            ascent_only: true,
        };
        assert!(staircase([1.0; 6], layout, 100.0).is_err());
    }

    #[test]
    fn circle_quarter_period() {
        let f = 0.5;
        let r = 10.0;
        let c = circle((Axis::X, Axis::Y), r, f, 2.0, RATE).unwrap();
        assert_eq!(c.sample(0)[0], r);
        assert_eq!(c.sample(0)[1], 0.0);
        let q = c.sample((RATE / (4.0 * f)) as usize);
        assert!(q[0].abs() <= 1e-12 * r);
        assert!((q[1] - r).abs() <= 1e-12 * r);
        assert!(circle((Axis::X, Axis::Y), r, 2000.0, 1.0, RATE).is_err());
    }

    #[test]
    fn circle_path_closes() {
        let f = 0.5;
        let r = 10.0;
        let c = circle((Axis::X, Axis::Z), r, f, 2.0 / f, RATE).unwrap();
        let one_period = (RATE / f) as usize;
        let p = c.sample(one_period);
        let start = c.sample(0);
        let gap = libm::hypot(p[0] - start[0], p[2] - start[2]);
        let arc_per_sample = 2.0 * PI * r * f / RATE;
        assert!(gap <= arc_per_sample);
    }

    #[test]
    fn rose_starts_at_origin_and_is_bounded() {
        let spec = Rose {
            axes: (Axis::X, Axis::Y),
            amplitude: 10.0,
            petals: 4,
            third: None,
        };
        let s = rose(&spec, 0.5, 2.0, RATE).unwrap();
        assert_eq!(&s.sample(0)[..2], &[0.0, 0.0]);
        let max_r = s
            .samples()
            .iter()
            .map(|p| libm::hypot(p[0], p[1]))
            .fold(0.0_f64, f64::max);
        assert!((max_r - 10.0).abs() <= 1e-9, "{max_r}");
    }

    #[test]
    fn even_rose_has_twice_k_petals() {
        let spec = Rose {
            axes: (Axis::X, Axis::Y),
            amplitude: 1.0,
            petals: 4,
            third: Some((Axis::Z, 2.0)),
        };
        // One θ period.
        let s = rose(&spec, 1.0, 1.0, RATE).unwrap();
        let r: Vec<f64> = s.samples().iter().map(|p| libm::hypot(p[0], p[1])).collect();
        let maxima = (1..r.len() - 1)
            .filter(|&i| r[i] > r[i - 1] && r[i] >= r[i + 1] && r[i] > 0.5)
            .count();
        assert_eq!(maxima, 8);
        assert!(s.column(2).iter().all(|z| z.abs() <= 2.0));
    }

    #[test]
    fn rose_needs_two_petals() {
        let spec = Rose {
            axes: (Axis::X, Axis::Y),
            amplitude: 1.0,
            petals: 1,
            third: None,
        };
        assert!(rose(&spec, 1.0, 1.0, RATE).is_err());
    }

    #[test]
    fn chirp_start_and_midpoint_frequency() {
        let c = chirp([1.0; 6], 10.0, 400.0, 5.0, RATE).unwrap();
        assert_eq!(c.sample(0), [0.0; 6]);
        assert_eq!(chirp_frequency(10.0, 400.0, 5.0, 2.5), 205.0);
        // Numerical derivative of the phase agrees.
        let h = 1e-6;
        let dphi = (chirp_phase(10.0, 400.0, 5.0, 2.5 + h) - chirp_phase(10.0, 400.0, 5.0, 2.5 - h)) / (2.0 * h);
        assert_abs_diff_eq!(dphi / (2.0 * PI), 205.0, epsilon = 1e-4);
    }

    #[test]
    fn flat_chirp_is_a_sine() {
        let c = chirp([2.0; 6], 5.0, 5.0, 1.0, RATE).unwrap();
        let s = sine([2.0; 6], 5.0, 1.0, RATE).unwrap();
        for (a, b) in c.samples().iter().zip(s.samples()) {
            assert_abs_diff_eq!(a[0], b[0], epsilon = 1e-9);
        }
        assert!(chirp([1.0; 6], 5.0, 4.0, 1.0, RATE).is_err());
        assert!(chirp([1.0; 6], 5.0, 3000.0, 1.0, RATE).is_err());
    }

    #[test]
    fn waveform_spec_dispatch() {
        let spec = WaveformSpec::Constant { values: [1.0; 6] };
        let s = spec.generate(0.5, 100.0).unwrap();
        assert_eq!(s.len(), 50);
        assert_eq!(s.channels().labels()[3], "rx_urad");
    }
}
