//! Post-processing of recorded series: tracking statistics, staircase
//! resolution, hysteresis loop metrics and chirp frequency response.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::Complex;

use crate::signals::{StaircaseLayout, TimeSeries};
use crate::{Axis, Error, Result};

fn same_grid(a: &TimeSeries, b: &TimeSeries) -> Result<()> {
    if (a.rate_hz() - b.rate_hz()).abs() > 1e-9 * a.rate_hz() {
        return Err(Error::invalid(
            "series",
            format!("sample rates differ: {} vs {} Hz", a.rate_hz(), b.rate_hz()),
        ));
    }
    if a.len() != b.len() {
        return Err(Error::invalid(
            "series",
            format!("lengths differ: {} vs {}", a.len(), b.len()),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------- tracking

/// Default fraction of a run discarded as start-up transient.
pub const DEFAULT_WARMUP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingReport {
    pub rms: [f64; 6],
    pub max_abs: [f64; 6],
    /// First sample included in the statistics.
    pub first_sample: usize,
    pub samples: usize,
}

impl TrackingReport {
    pub fn axis_rms(&self, axis: Axis) -> f64 {
        self.rms[axis.index()]
    }
}

/// Per-axis RMS and peak of `reference − measured` after the default warm-up.
pub fn tracking_errors(reference: &TimeSeries, measured: &TimeSeries) -> Result<TrackingReport> {
    tracking_errors_with(reference, measured, DEFAULT_WARMUP)
}

pub fn tracking_errors_with(reference: &TimeSeries, measured: &TimeSeries, warmup: f64) -> Result<TrackingReport> {
    same_grid(reference, measured)?;
    if !(0.0..1.0).contains(&warmup) {
        return Err(Error::invalid("warmup", format!("fraction {warmup} must be in [0, 1)")));
    }
    let first = libm::floor(warmup * reference.len() as f64) as usize;
    let n = reference.len() - first;
    if n == 0 {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let mut sq = [0.0; 6];
    let mut max_abs = [0.0_f64; 6];
    for (r, m) in reference.samples()[first..].iter().zip(&measured.samples()[first..]) {
        for k in 0..6 {
            let e = r[k] - m[k];
            sq[k] += e * e;
            max_abs[k] = max_abs[k].max(e.abs());
        }
    }
    Ok(TrackingReport {
        rms: sq.map(|s| libm::sqrt(s / n as f64)),
        max_abs,
        first_sample: first,
        samples: n,
    })
}

// -------------------------------------------------------------- resolution

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionOptions {
    /// Required step separation in pooled standard deviations.
    pub threshold_sigma: f64,
    /// Leading fraction of each dwell treated as settling and ignored.
    pub settle_fraction: f64,
    pub min_samples: usize,
}

impl Default for ResolutionOptions {
    fn default() -> Self {
        ResolutionOptions {
            threshold_sigma: 3.0,
            settle_fraction: 0.25,
            min_samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisResolution {
    pub axis: Axis,
    pub step: f64,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Root mean of the per-dwell variances.
    pub pooled_std: f64,
    /// Smallest |difference| of consecutive dwell means.
    pub min_separation: f64,
    /// `min_separation / pooled_std`; infinite for noiseless data.
    pub separation_ratio: f64,
    /// Every consecutive difference has the sign of the commanded step.
    pub monotonic: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolutionReport {
    pub axes: Vec<AxisResolution>,
}

impl ResolutionReport {
    pub fn pass(&self) -> bool {
        self.axes.iter().all(|a| a.pass)
    }

    pub fn axis(&self, axis: Axis) -> Option<&AxisResolution> {
        self.axes.iter().find(|a| a.axis == axis)
    }
}

/// Checks that every dwell of a staircase is distinguishable from the next.
/// Axes with a zero step are skipped.
pub fn resolution_check(
    measured: &TimeSeries,
    layout: &StaircaseLayout,
    steps: &[f64; 6],
    opts: &ResolutionOptions,
) -> Result<ResolutionReport> {
    let dwells = layout.dwells();
    if dwells < 2 {
        return Err(Error::invalid("staircase", "need at least two dwells"));
    }
    if !(0.0..1.0).contains(&opts.settle_fraction) {
        return Err(Error::invalid("settle_fraction", "must be in [0, 1)"));
    }
    let per = libm::round(layout.period_s * measured.rate_hz()) as usize;
    let skip = libm::ceil(opts.settle_fraction * per as f64) as usize;
    let used = per.saturating_sub(skip);
    if used < opts.min_samples {
        return Err(Error::InsufficientData {
            needed: opts.min_samples,
            got: used,
        });
    }
    if measured.len() < dwells * per {
        return Err(Error::InsufficientData {
            needed: dwells * per,
            got: measured.len(),
        });
    }

    let mut axes = Vec::new();
    for axis in Axis::ALL {
        let k = axis.index();
        let step = steps[k];
        if step == 0.0 {
            continue;
        }
        let mut means = Vec::with_capacity(dwells);
        let mut stds = Vec::with_capacity(dwells);
        for d in 0..dwells {
            let start = d * per + skip;
            let vals = &measured.samples()[start..(d + 1) * per];
            // Shifted by the first sample so constant dwells give exactly zero spread.
            let shift = vals[0][k];
            let mean = vals.iter().map(|s| s[k] - shift).sum::<f64>() / used as f64;
            let var = vals
                .iter()
                .map(|s| (s[k] - shift - mean) * (s[k] - shift - mean))
                .sum::<f64>()
                / (used - 1) as f64;
            means.push(shift + mean);
            stds.push(libm::sqrt(var));
        }
        let pooled_std = libm::sqrt(stds.iter().map(|s| s * s).sum::<f64>() / dwells as f64);
        let mut monotonic = true;
        let mut min_separation = f64::INFINITY;
        for d in 0..dwells - 1 {
            let expected = (layout.level(d + 1) - layout.level(d)) * step;
            let diff = means[d + 1] - means[d];
            monotonic &= diff * expected > 0.0;
            min_separation = min_separation.min(diff.abs());
        }
        let separation_ratio = if pooled_std > 0.0 {
            min_separation / pooled_std
        } else if min_separation > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let pass = monotonic && separation_ratio >= opts.threshold_sigma;
        axes.push(AxisResolution {
            axis,
            step,
            means,
            stds,
            pooled_std,
            min_separation,
            separation_ratio,
            monotonic,
            pass,
        });
    }
    Ok(ResolutionReport { axes })
}

// -------------------------------------------------------------- hysteresis

/// Points at which ascending and descending branches are compared.
pub const HYSTERESIS_GRID: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisMetric {
    /// Largest branch separation, % of the response span.
    pub width_pct: f64,
    /// Branch separation at the middle of the drive range, % of span.
    pub mid_width_pct: f64,
    /// Largest branch separation in response units.
    pub width: f64,
    /// Area enclosed by the averaged loop, drive × response units.
    pub area: f64,
    /// Coefficient of determination of the straight-line fit `y ≈ a·x + b`.
    pub r_squared: f64,
    pub slope: f64,
    pub intercept: f64,
    pub ascending_sweeps: usize,
    pub descending_sweeps: usize,
}

struct Sweep {
    start: usize,
    end: usize,
    ascending: bool,
}

/// Splits `x` at its turning points. Reversals smaller than `tol` are
/// treated as noise.
fn sweeps(x: &[f64], tol: f64) -> Vec<Sweep> {
    let mut turns = vec![0];
    let mut dir = 0i8;
    let mut ext = 0;
    for i in 1..x.len() {
        match dir {
            0 => {
                if x[i] > x[0] + tol {
                    dir = 1;
                    ext = i;
                } else if x[i] < x[0] - tol {
                    dir = -1;
                    ext = i;
                }
            }
            1 => {
                if x[i] >= x[ext] {
                    ext = i;
                } else if x[i] < x[ext] - tol {
                    turns.push(ext);
                    dir = -1;
                    ext = i;
                }
            }
            _ => {
                if x[i] <= x[ext] {
                    ext = i;
                } else if x[i] > x[ext] + tol {
                    turns.push(ext);
                    dir = 1;
                    ext = i;
                }
            }
        }
    }
    if dir != 0 {
        turns.push(ext);
    }
    turns
        .windows(2)
        .map(|w| Sweep {
            start: w[0],
            end: w[1],
            ascending: x[w[1]] > x[w[0]],
        })
        .collect()
}

/// Linear interpolation of the branch `(xs, ys)` (sorted by x) at `q`.
fn interp(xs: &[f64], ys: &[f64], q: f64) -> f64 {
    let i = xs.partition_point(|&v| v < q);
    if i == 0 {
        return ys[0];
    }
    if i == xs.len() {
        return ys[xs.len() - 1];
    }
    let (x0, x1) = (xs[i - 1], xs[i]);
    if x1 == x0 {
        return ys[i];
    }
    ys[i - 1] + (ys[i] - ys[i - 1]) * (q - x0) / (x1 - x0)
}

/// Loop metrics of response `y` against a periodic drive `x`. Needs at
/// least two full ascending and two full descending sweeps, a full sweep
/// covering at least 90% of the drive range.
pub fn hysteresis_metrics(x: &[f64], y: &[f64]) -> Result<HysteresisMetric> {
    if x.len() != y.len() {
        return Err(Error::invalid("hysteresis", "drive and response lengths differ"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid("hysteresis", "non-finite sample"));
    }
    let (xmin, xmax) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    let span = xmax - xmin;
    if !(span > 0.0) {
        return Err(Error::invalid("hysteresis", "drive is constant"));
    }
    let full: Vec<Sweep> = sweeps(x, 0.01 * span)
        .into_iter()
        .filter(|s| (x[s.end] - x[s.start]).abs() >= 0.9 * span)
        .collect();
    let n_up = full.iter().filter(|s| s.ascending).count();
    let n_down = full.len() - n_up;
    if n_up < 2 || n_down < 2 {
        return Err(Error::invalid(
            "hysteresis",
            format!("drive is not cyclic: {n_up} full ascending and {n_down} full descending sweeps, need 2 each"),
        ));
    }

    // Common x coverage of every full sweep.
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    let branches: Vec<(bool, Vec<f64>, Vec<f64>)> = full
        .iter()
        .map(|s| {
            let mut pts: Vec<(f64, f64)> = (s.start..=s.end).map(|i| (x[i], y[i])).collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            lo = lo.max(pts[0].0);
            hi = hi.min(pts[pts.len() - 1].0);
            let (xs, ys) = pts.into_iter().unzip();
            (s.ascending, xs, ys)
        })
        .collect();
    let grid: Vec<f64> = (0..HYSTERESIS_GRID)
        .map(|i| lo + (hi - lo) * i as f64 / (HYSTERESIS_GRID - 1) as f64)
        .collect();
    let mut up = vec![0.0; HYSTERESIS_GRID];
    let mut down = vec![0.0; HYSTERESIS_GRID];
    for (ascending, xs, ys) in &branches {
        let (target, count) = if *ascending {
            (&mut up, n_up)
        } else {
            (&mut down, n_down)
        };
        for (g, t) in grid.iter().zip(target.iter_mut()) {
            *t += interp(xs, ys, *g) / count as f64;
        }
    }

    let gaps: Vec<f64> = up.iter().zip(&down).map(|(u, d)| (u - d).abs()).collect();
    let width = gaps.iter().fold(0.0_f64, |m, &g| m.max(g));
    let mid_x = 0.5 * (xmin + xmax);
    let mid = grid
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - mid_x).abs().total_cmp(&(b.1 - mid_x).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0);

    // Averaged loop: ascending branch out, descending branch back.
    let mut twice_area = 0.0;
    let ring: Vec<(f64, f64)> = grid
        .iter()
        .zip(&up)
        .map(|(g, u)| (*g, *u))
        .chain(grid.iter().zip(&down).rev().map(|(g, d)| (*g, *d)))
        .collect();
    for i in 0..ring.len() {
        let (x0, y0) = ring[i];
        let (x1, y1) = ring[(i + 1) % ring.len()];
        twice_area += x0 * y1 - x1 * y0;
    }
    let area = 0.5 * twice_area.abs();

    // Straight-line fit over the samples of the full sweeps.
    let idx = full.iter().flat_map(|s| s.start..=s.end);
    let (mut n, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in idx.clone() {
        n += 1.0;
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    let mx = sx / n;
    let my = sy / n;
    let slope = (sxy - n * mx * my) / (sxx - n * mx * mx);
    let intercept = my - slope * mx;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in idx {
        let r = y[i] - (slope * x[i] + intercept);
        ss_res += r * r;
        ss_tot += (y[i] - my) * (y[i] - my);
        ymin = ymin.min(y[i]);
        ymax = ymax.max(y[i]);
    }
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    let y_span = ymax - ymin;
    let pct = |w: f64| if y_span > 0.0 { 100.0 * w / y_span } else { 0.0 };

    Ok(HysteresisMetric {
        width_pct: pct(width),
        mid_width_pct: pct(gaps[mid]),
        width,
        area,
        r_squared,
        slope,
        intercept,
        ascending_sweeps: n_up,
        descending_sweeps: n_down,
    })
}

// ------------------------------------------------------- frequency response

pub mod fft {
    //! In-place iterative radix-2 FFT.

    use super::*;

    /// Forward transform `X[k] = Σ x[n]·e^{−2πikn/N}`; `N` must be a power of two.
    pub fn fft_in_place(buf: &mut [Complex<f64>]) {
        let n = buf.len();
        assert!(n.is_power_of_two(), "FFT length {n} is not a power of two");
        if n < 2 {
            return;
        }
        let bits = n.trailing_zeros();
        for i in 0..n {
            let j = i.reverse_bits() >> (usize::BITS - bits);
            if j > i {
                buf.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= n {
            let ang = -2.0 * PI / len as f64;
            for start in (0..n).step_by(len) {
                for k in 0..len / 2 {
                    let w = Complex::new(libm::cos(ang * k as f64), libm::sin(ang * k as f64));
                    let a = buf[start + k];
                    let b = buf[start + k + len / 2] * w;
                    buf[start + k] = a + b;
                    buf[start + k + len / 2] = a - b;
                }
            }
            len <<= 1;
        }
    }

    /// Spectrum of a real signal, zero-padded to `n` (a power of two).
    pub fn real_spectrum(x: &[f64], n: usize) -> Vec<Complex<f64>> {
        let mut buf = vec![Complex::new(0.0, 0.0); n];
        for (b, v) in buf.iter_mut().zip(x) {
            b.re = *v;
        }
        fft_in_place(&mut buf);
        buf
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqOptions {
    /// Half-width of the peak search window relative to frequency.
    pub peak_window: f64,
    /// Required rise above the window median, dB.
    pub peak_threshold_db: f64,
    pub min_samples: usize,
}

impl Default for FreqOptions {
    fn default() -> Self {
        FreqOptions {
            peak_window: 0.1,
            peak_threshold_db: 3.0,
            min_samples: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisResponse {
    pub axis: Axis,
    /// `20·log10|H|`, dB relative to unit gain.
    pub magnitude_db: Vec<f64>,
    /// Unwrapped phase, rad.
    pub phase_rad: Vec<f64>,
    /// Frequencies of detected resonance peaks, Hz.
    pub peaks_hz: Vec<f64>,
}

impl AxisResponse {
    /// Magnitude at the grid point closest to `f`.
    pub fn magnitude_at(&self, freq_hz: &[f64], f: f64) -> f64 {
        let i = freq_hz
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - f).abs().total_cmp(&(b.1 - f).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.magnitude_db[i]
    }

    /// Largest magnitude and where it occurs.
    pub fn max_magnitude(&self, freq_hz: &[f64]) -> (f64, f64) {
        self.magnitude_db
            .iter()
            .zip(freq_hz)
            .fold(
                (f64::NAN, f64::NEG_INFINITY),
                |best, (&m, &f)| if m > best.1 { (f, m) } else { best },
            )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreqResponse {
    /// Ascending grid restricted to the swept band, Hz.
    pub freq_hz: Vec<f64>,
    pub axes: Vec<AxisResponse>,
}

impl FreqResponse {
    pub fn axis(&self, axis: Axis) -> Option<&AxisResponse> {
        self.axes.iter().find(|a| a.axis == axis)
    }
}

fn unwrap_phase(p: &mut [f64]) {
    let mut offset = 0.0;
    for i in 1..p.len() {
        let raw = p[i] + offset;
        let mut d = raw - p[i - 1];
        while d > PI {
            offset -= 2.0 * PI;
            d -= 2.0 * PI;
        }
        while d < -PI {
            offset += 2.0 * PI;
            d += 2.0 * PI;
        }
        p[i] = p[i - 1] + d;
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Local maxima that dominate a `±window` neighbourhood and rise at least
/// `threshold_db` above its median.
pub fn detect_peaks(freq_hz: &[f64], mag_db: &[f64], window: f64, threshold_db: f64) -> Vec<f64> {
    let mut peaks = Vec::new();
    let mut scratch = Vec::new();
    for i in 0..freq_hz.len() {
        let f = freq_hz[i];
        let lo = freq_hz.partition_point(|&g| g < f * (1.0 - window));
        let hi = freq_hz.partition_point(|&g| g <= f * (1.0 + window));
        if hi - lo < 3 {
            continue;
        }
        let win = &mag_db[lo..hi];
        let is_max = win.iter().enumerate().all(|(j, &m)| {
            let idx = lo + j;
            m < mag_db[i] || (m == mag_db[i] && idx >= i)
        });
        if !is_max {
            continue;
        }
        scratch.clear();
        scratch.extend_from_slice(win);
        if mag_db[i] >= median(&mut scratch) + threshold_db {
            peaks.push(f);
        }
    }
    peaks
}

/// Relative input spread below which an axis counts as not excited.
pub const EXCITATION_FLOOR: f64 = 1e-9;

/// Hann-windowed FFT ratio `FFT(out)/FFT(in)` over `[f0, f1]`, for each axis
/// whose input is excited.
pub fn frequency_response(
    input: &TimeSeries,
    output: &TimeSeries,
    band_hz: (f64, f64),
    opts: &FreqOptions,
) -> Result<FreqResponse> {
    same_grid(input, output)?;
    let (f0, f1) = band_hz;
    if !(f0 > 0.0 && f1 > f0) {
        return Err(Error::invalid("band", format!("need 0 < f0 < f1, got [{f0}, {f1}]")));
    }
    let rate = input.rate_hz();
    if rate < 4.0 * f1 {
        return Err(Error::invalid(
            "band",
            format!("sample rate {rate} Hz is below 4 x the {f1} Hz band edge"),
        ));
    }
    let len = input.len();
    if len < opts.min_samples {
        return Err(Error::InsufficientData {
            needed: opts.min_samples,
            got: len,
        });
    }
    let n = len.next_power_of_two();
    let df = rate / n as f64;
    let first = libm::ceil(f0 / df) as usize;
    let last = libm::floor(f1 / df) as usize;
    if last < first + 8 {
        return Err(Error::InsufficientData {
            needed: 8,
            got: (last + 1).saturating_sub(first),
        });
    }
    let freq_hz: Vec<f64> = (first..=last).map(|i| i as f64 * df).collect();
    let window: Vec<f64> = (0..len)
        .map(|i| 0.5 * (1.0 - libm::cos(2.0 * PI * i as f64 / len as f64)))
        .collect();
    let prepared = |col: Vec<f64>| -> Vec<f64> {
        let mean = col.iter().sum::<f64>() / len as f64;
        col.iter().zip(&window).map(|(v, w)| (v - mean) * w).collect()
    };

    // Axes whose input spread is negligible next to the strongest one carry
    // only rounding noise and are skipped.
    let spread: [f64; 6] = core::array::from_fn(|k| {
        let (lo, hi) = input
            .samples()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                (lo.min(s[k]), hi.max(s[k]))
            });
        hi - lo
    });
    let strongest = spread.iter().fold(0.0_f64, |m, &v| m.max(v));

    let mut axes = Vec::new();
    for axis in Axis::ALL {
        let k = axis.index();
        if !(spread[k] > EXCITATION_FLOOR * strongest) {
            continue;
        }
        let xin = input.column(k);
        let sin = fft::real_spectrum(&prepared(xin), n);
        let sout = fft::real_spectrum(&prepared(output.column(k)), n);
        let h: Vec<Complex<f64>> = (first..=last).map(|i| sout[i] / sin[i]).collect();
        let magnitude_db: Vec<f64> = h.iter().map(|c| 20.0 * libm::log10(libm::hypot(c.re, c.im))).collect();
        if let Some(i) = magnitude_db.iter().position(|m| !m.is_finite()) {
            return Err(Error::invalid(
                "frequency_response",
                format!("input of axis {} has no energy at {} Hz", axis.label(), freq_hz[i]),
            ));
        }
        let mut phase_rad: Vec<f64> = h.iter().map(|c| libm::atan2(c.im, c.re)).collect();
        unwrap_phase(&mut phase_rad);
        let peaks_hz = detect_peaks(&freq_hz, &magnitude_db, opts.peak_window, opts.peak_threshold_db);
        axes.push(AxisResponse {
            axis,
            magnitude_db,
            phase_rad,
            peaks_hz,
        });
    }
    if axes.is_empty() {
        return Err(Error::invalid("frequency_response", "input is zero on every axis"));
    }
    Ok(FreqResponse { freq_hz, axes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals::{chirp, staircase, Channels};
    use approx::assert_abs_diff_eq;

    fn series(samples: Vec<[f64; 6]>) -> TimeSeries {
        TimeSeries::new(1000.0, Channels::Pose, samples).unwrap()
    }

    #[test]
    fn identical_series_have_zero_error() {
        let s = series((0..100).map(|i| [i as f64; 6]).collect());
        let r = tracking_errors(&s, &s).unwrap();
        assert_eq!(r.rms, [0.0; 6]);
        assert_eq!(r.max_abs, [0.0; 6]);
        assert_eq!(r.first_sample, 10);
    }

    #[test]
    fn constant_offset() {
        let a = series(vec![[1.0; 6]; 50]);
        let mut b = a.samples().to_vec();
        for s in &mut b {
            s[2] -= 0.25;
        }
        let r = tracking_errors(&a, &series(b)).unwrap();
        assert_abs_diff_eq!(r.rms[2], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(r.max_abs[2], 0.25, epsilon = 1e-15);
        assert_eq!(r.rms[0], 0.0);
    }

    #[test]
    fn mismatched_series_rejected() {
        let a = series(vec![[0.0; 6]; 50]);
        let b = series(vec![[0.0; 6]; 49]);
        assert!(tracking_errors(&a, &b).is_err());
        let c = TimeSeries::new(500.0, Channels::Pose, vec![[0.0; 6]; 50]).unwrap();
        assert!(tracking_errors(&a, &c).is_err());
    }

    fn layout() -> StaircaseLayout {
        StaircaseLayout {
            period_s: 0.2,
            n_steps: 3,
            ascent_only: false,
        }
    }

    #[test]
    fn noiseless_staircase_passes() {
        let steps = [0.0105, 0.0, 0.0, 0.0, 0.0, -1.8];
        let s = staircase(steps, layout(), 1000.0).unwrap();
        let r = resolution_check(&s, &layout(), &steps, &ResolutionOptions::default()).unwrap();
        assert_eq!(r.axes.len(), 2);
        assert!(r.pass());
        assert_eq!(r.axes[0].separation_ratio, f64::INFINITY);
        assert_eq!(r.axes[0].means.len(), 6);
    }

    #[test]
    fn short_dwells_rejected() {
        let l = StaircaseLayout {
            period_s: 0.1,
            ..layout()
        };
        let s = staircase([1.0; 6], l, 1000.0).unwrap();
        let err = resolution_check(&s, &l, &[1.0; 6], &ResolutionOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { needed: 100, got: 75 }));
    }

    #[test]
    fn reversed_staircase_is_not_monotonic() {
        let steps = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let s = staircase(steps, layout(), 1000.0).unwrap();
        let r = resolution_check(
            &s,
            &layout(),
            &[-1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            &ResolutionOptions::default(),
        )
        .unwrap();
        assert!(!r.axes[0].monotonic);
        assert!(!r.pass());
    }

    fn cycles(n: usize, per: usize, f: impl Fn(f64) -> (f64, f64)) -> (Vec<f64>, Vec<f64>) {
        (0..n * per).map(|i| f(2.0 * PI * i as f64 / per as f64)).unzip()
    }

    #[test]
    fn single_valued_response_has_no_loop() {
        let (x, y) = cycles(3, 1000, |t| (libm::sin(t), libm::sin(t)));
        let m = hysteresis_metrics(&x, &y).unwrap();
        assert_abs_diff_eq!(m.width, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.area, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ellipse_area() {
        let (a, b) = (2.0, 0.5);
        let (x, y) = cycles(3, 4000, |t| (a * libm::cos(t), b * libm::sin(t)));
        let m = hysteresis_metrics(&x, &y).unwrap();
        let exact = PI * a * b;
        assert!((m.area - exact).abs() <= 0.01 * exact, "{} vs {exact}", m.area);
        assert_abs_diff_eq!(m.mid_width_pct, 100.0, epsilon = 0.5);
    }

    #[test]
    fn one_cycle_is_not_enough() {
        let (x, y) = cycles(1, 1000, |t| (libm::sin(t), libm::cos(t)));
        assert!(hysteresis_metrics(&x, &y).is_err());
        let flat = vec![1.0; 100];
        assert!(hysteresis_metrics(&flat, &flat).is_err());
    }

    #[test]
    fn fft_matches_direct_dft() {
        let x: Vec<f64> = (0..16).map(|i| libm::sin(i as f64 * 0.7) + 0.1 * i as f64).collect();
        let fast = fft::real_spectrum(&x, 16);
        for (k, f) in fast.iter().enumerate() {
            let mut acc = Complex::new(0.0, 0.0);
            for (n, v) in x.iter().enumerate() {
                let a = -2.0 * PI * (k * n) as f64 / 16.0;
                acc += Complex::new(libm::cos(a), libm::sin(a)) * *v;
            }
            assert_abs_diff_eq!(f.re, acc.re, epsilon = 1e-12);
            assert_abs_diff_eq!(f.im, acc.im, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_system_is_flat() {
        let mut amps = [0.0; 6];
        amps[2] = 1.0;
        let c = chirp(amps, 10.0, 200.0, 2.0, 2000.0).unwrap();
        let fr = frequency_response(&c, &c, (20.0, 180.0), &FreqOptions::default()).unwrap();
        assert_eq!(fr.axes.len(), 1);
        let z = fr.axis(Axis::Z).unwrap();
        assert!(z.magnitude_db.iter().all(|m| m.abs() < 1e-9));
        assert!(z.peaks_hz.is_empty());
        assert!(fr.freq_hz.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn frequency_response_validation() {
        let c = chirp([1.0; 6], 10.0, 200.0, 0.1, 2000.0).unwrap();
        assert!(matches!(
            frequency_response(&c, &c, (10.0, 200.0), &FreqOptions::default()),
            Err(Error::InsufficientData { .. })
        ));
        let c = chirp([1.0; 6], 10.0, 200.0, 2.0, 2000.0).unwrap();
        assert!(frequency_response(&c, &c, (10.0, 900.0), &FreqOptions::default()).is_err());
        assert!(frequency_response(&c, &c, (100.0, 50.0), &FreqOptions::default()).is_err());
    }

    #[test]
    fn peak_picking_on_synthetic_curve() {
        let f: Vec<f64> = (1..=400).map(|i| i as f64).collect();
        let m: Vec<f64> = f
            .iter()
            .map(|&x| 20.0 * libm::exp(-((x - 137.0) / 3.0) * ((x - 137.0) / 3.0)))
            .collect();
        assert_eq!(detect_peaks(&f, &m, 0.1, 3.0), vec![137.0]);
    }
}
