//! Reachable workspace of box-bounded actuator inputs.
//!
//! The image of the input box under the Jacobian is a zonotope. Each 3×6
//! block (translational, rotational) is treated as its own 3D zonotope whose
//! generators are the block's columns scaled by the input widths.

use alloc::format;
use alloc::vec::Vec;

use crate::kinematics::Jacobian6;
use crate::{Axis, Error, Result};

/// Largest input displacement the flexure joints tolerate, µm.
pub const SAFE_STROKE_UM: f64 = 110.0;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputBox {
    lo: [f64; 6],
    hi: [f64; 6],
}

impl InputBox {
    pub fn new(lo: [f64; 6], hi: [f64; 6], safe_stroke: f64) -> Result<Self> {
        for i in 0..6 {
            if !lo[i].is_finite() || !hi[i].is_finite() {
                return Err(Error::invalid(
                    "input_box",
                    format!("actuator {} bound not finite", i + 1),
                ));
            }
            if lo[i] > hi[i] {
                return Err(Error::invalid(
                    "input_box",
                    format!("actuator {}: lo {} > hi {}", i + 1, lo[i], hi[i]),
                ));
            }
            if hi[i] > safe_stroke {
                return Err(Error::invalid(
                    "input_box",
                    format!(
                        "actuator {}: hi {} exceeds safe stroke {} um",
                        i + 1,
                        hi[i],
                        safe_stroke
                    ),
                ));
            }
        }
        Ok(InputBox { lo, hi })
    }

    /// Same `[lo, hi]` on every actuator, checked against [`SAFE_STROKE_UM`].
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        InputBox::new([lo; 6], [hi; 6], SAFE_STROKE_UM)
    }

    pub fn lo(&self) -> [f64; 6] {
        self.lo
    }

    pub fn hi(&self) -> [f64; 6] {
        self.hi
    }

    pub fn widths(&self) -> [f64; 6] {
        core::array::from_fn(|i| self.hi[i] - self.lo[i])
    }

    /// Common width when every actuator has the same bounds.
    pub fn uniform_width(&self) -> Option<f64> {
        let w = self.widths();
        w.iter().all(|&x| x == w[0]).then_some(w[0])
    }
}

impl Default for InputBox {
    fn default() -> Self {
        InputBox {
            lo: [0.0; 6],
            hi: [SAFE_STROKE_UM; 6],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

/// Exact reachable interval of every pose axis.
pub fn axis_ranges(jacobian: &Jacobian6, input: &InputBox) -> [Interval; 6] {
    core::array::from_fn(|k| {
        let mut min = 0.0;
        let mut max = 0.0;
        for i in 0..6 {
            let a = jacobian.entry(k, i) * input.lo[i];
            let b = jacobian.entry(k, i) * input.hi[i];
            min += a.min(b);
            max += a.max(b);
        }
        Interval { min, max }
    })
}

/// Translational range divided by input width, for X, Y, Z.
pub fn amplification_ratios(jacobian: &Jacobian6, input: &InputBox) -> Result<[f64; 3]> {
    let width = input
        .uniform_width()
        .ok_or_else(|| Error::invalid("input_box", "amplification needs a uniform box"))?;
    if width <= 0.0 {
        return Err(Error::invalid("input_box", "zero-width box has no amplification"));
    }
    let ranges = axis_ranges(jacobian, input);
    Ok(core::array::from_fn(|k| ranges[k].width() / width))
}

fn block_generators(jacobian: &Jacobian6, input: &InputBox, first_row: usize) -> [Vec3; 6] {
    let w = input.widths();
    core::array::from_fn(|col| core::array::from_fn(|r| jacobian.entry(first_row + r, col) * w[col]))
}

/// Columns of the translational block scaled by input widths (µm).
pub fn translational_generators(jacobian: &Jacobian6, input: &InputBox) -> [Vec3; 6] {
    block_generators(jacobian, input, 0)
}

/// Columns of the rotational block scaled by input widths (µrad).
pub fn rotational_generators(jacobian: &Jacobian6, input: &InputBox) -> [Vec3; 6] {
    block_generators(jacobian, input, 3)
}

fn det3(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0]) + a[2] * (b[0] * c[1] - b[1] * c[0])
}

/// Exact volume of `{Σ tᵢgᵢ : tᵢ ∈ [0,1]}`: the sum of |det| over all
/// generator triples. Rank-deficient sets give 0.
pub fn zonotope_volume_3d(generators: &[Vec3]) -> f64 {
    let m = generators.len();
    let mut volume = 0.0;
    for a in 0..m {
        for b in (a + 1)..m {
            for c in (b + 1)..m {
                volume += det3(&generators[a], &generators[b], &generators[c]).abs();
            }
        }
    }
    volume
}

/// Coordinate plane of a 3D generator block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    /// First and second coordinates (X-Y or Rx-Ry).
    P01,
    /// First and third (X-Z or Rx-Rz).
    P02,
    /// Second and third (Y-Z or Ry-Rz).
    P12,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::P01, Plane::P02, Plane::P12];

    pub fn coords(self) -> (usize, usize) {
        match self {
            Plane::P01 => (0, 1),
            Plane::P02 => (0, 2),
            Plane::P12 => (1, 2),
        }
    }

    /// Task axes spanned by this plane in the given block.
    pub fn axes(self, rotational: bool) -> (Axis, Axis) {
        let (a, b) = self.coords();
        let offset = if rotational { 3 } else { 0 };
        (Axis::ALL[a + offset], Axis::ALL[b + offset])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon2D {
    /// Counterclockwise, convex, not closed (last vertex != first).
    pub vertices: Vec<[f64; 2]>,
    pub axes: (Axis, Axis),
    /// Set when the projection has fewer than two independent directions.
    pub degenerate: bool,
}

impl Polygon2D {
    pub fn label(&self) -> alloc::string::String {
        format!("{}-{}", self.axes.0.label(), self.axes.1.label())
    }

    /// Signed shoelace area (positive when counterclockwise).
    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        let mut twice = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            twice += p[0] * q[1] - q[0] * p[1];
        }
        twice / 2.0
    }

    pub fn bounding_box(&self) -> (Interval, Interval) {
        let mut u = Interval {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        };
        let mut v = u;
        for p in &self.vertices {
            u.min = u.min.min(p[0]);
            u.max = u.max.max(p[0]);
            v.min = v.min.min(p[1]);
            v.max = v.max.max(p[1]);
        }
        (u, v)
    }

    /// Vertex average, which for a centrally symmetric polygon is its center.
    pub fn centroid(&self) -> [f64; 2] {
        let n = self.vertices.len().max(1) as f64;
        let (sx, sy) = self
            .vertices
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p[0], sy + p[1]));
        [sx / n, sy / n]
    }

    /// Every turn is a left turn (collinear allowed within `tol` relative).
    pub fn is_convex(&self, tol: f64) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return true;
        }
        let scale = self.scale();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
            cross >= -tol * scale * scale
        })
    }

    /// Point reflection through the centroid maps the vertex set onto itself.
    pub fn is_centrally_symmetric(&self, tol: f64) -> bool {
        let c = self.centroid();
        let scale = self.scale().max(1.0);
        self.vertices.iter().all(|p| {
            let r = [2.0 * c[0] - p[0], 2.0 * c[1] - p[1]];
            self.vertices
                .iter()
                .any(|q| (q[0] - r[0]).abs() <= tol * scale && (q[1] - r[1]).abs() <= tol * scale)
        })
    }

    fn scale(&self) -> f64 {
        let (u, v) = self.bounding_box();
        u.width().max(v.width())
    }
}

/// Planar zonotope `{Σ tᵢ gᵢ}` projected on `plane`, as a CCW polygon.
pub fn project_2d(generators: &[Vec3], plane: Plane, rotational: bool) -> Polygon2D {
    let (a, b) = plane.coords();
    let axes = plane.axes(rotational);
    let projected: Vec<[f64; 2]> = generators.iter().map(|g| [g[a], g[b]]).collect();
    let scale = projected.iter().fold(0.0_f64, |m, g| m.max(g[0].abs()).max(g[1].abs()));

    // Start from the origin corner (t = 0); flipping a generator to the upper
    // half-plane moves the start by that generator.
    let mut start = [0.0, 0.0];
    let mut dirs: Vec<[f64; 2]> = Vec::new();
    for g in projected {
        if scale == 0.0 || libm::hypot(g[0], g[1]) <= 1e-12 * scale {
            continue;
        }
        let flip = g[1] < 0.0 || (g[1] == 0.0 && g[0] < 0.0);
        let h = if flip {
            start[0] += g[0];
            start[1] += g[1];
            [-g[0], -g[1]]
        } else {
            g
        };
        dirs.push(h);
    }

    if dirs.is_empty() {
        return Polygon2D {
            vertices: alloc::vec![start],
            axes,
            degenerate: true,
        };
    }

    dirs.sort_by(|p, q| {
        let ap = libm::atan2(p[1], p[0]);
        let aq = libm::atan2(q[1], q[0]);
        ap.total_cmp(&aq)
    });
    // Merge parallel generators so no collinear vertices appear.
    let mut merged: Vec<[f64; 2]> = Vec::with_capacity(dirs.len());
    for d in dirs {
        if let Some(last) = merged.last_mut() {
            let cross = last[0] * d[1] - last[1] * d[0];
            let norm = libm::hypot(last[0], last[1]) * libm::hypot(d[0], d[1]);
            if cross.abs() <= 1e-12 * norm {
                last[0] += d[0];
                last[1] += d[1];
                continue;
            }
        }
        merged.push(d);
    }
    let mut vertices = Vec::with_capacity(2 * merged.len());
    let mut p = start;
    for d in &merged {
        vertices.push(p);
        p = [p[0] + d[0], p[1] + d[1]];
    }
    for d in &merged {
        vertices.push(p);
        p = [p[0] - d[0], p[1] - d[1]];
    }
    let degenerate = merged.len() < 2;
    if degenerate {
        vertices.truncate(2);
    }
    Polygon2D {
        vertices,
        axes,
        degenerate,
    }
}

/// All six planar projections: three translational planes, then three
/// rotational planes.
pub fn workspace_projections(jacobian: &Jacobian6, input: &InputBox) -> Vec<Polygon2D> {
    let mut out = Vec::with_capacity(6);
    let t = translational_generators(jacobian, input);
    let r = rotational_generators(jacobian, input);
    for (gens, rotational) in [(&t, false), (&r, true)] {
        for plane in Plane::ALL {
            let mut poly = project_2d(gens, plane, rotational);
            // Shift from the generator origin to the low corner of the box.
            let (a, b) = plane.coords();
            let base = if rotational { 3 } else { 0 };
            let lo_shift = lo_corner_offset(jacobian, input, base);
            for v in &mut poly.vertices {
                v[0] += lo_shift[a];
                v[1] += lo_shift[b];
            }
            out.push(poly);
        }
    }
    out
}

fn lo_corner_offset(jacobian: &Jacobian6, input: &InputBox, first_row: usize) -> Vec3 {
    core::array::from_fn(|r| (0..6).map(|i| jacobian.entry(first_row + r, i) * input.lo[i]).sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkspaceSummary {
    pub ranges: [Interval; 6],
    pub amplification: [f64; 3],
    /// µm³
    pub translational_volume: f64,
    /// µrad³
    pub rotational_volume: f64,
}

impl WorkspaceSummary {
    pub fn widths(&self) -> [f64; 6] {
        self.ranges.map(|r| r.width())
    }
}

pub fn summarize(jacobian: &Jacobian6, input: &InputBox) -> Result<WorkspaceSummary> {
    Ok(WorkspaceSummary {
        ranges: axis_ranges(jacobian, input),
        amplification: amplification_ratios(jacobian, input)?,
        translational_volume: zonotope_volume_3d(&translational_generators(jacobian, input)),
        rotational_volume: zonotope_volume_3d(&rotational_generators(jacobian, input)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn nominal_box() -> InputBox {
        InputBox::uniform(0.0, 110.0).unwrap()
    }

    #[test]
    fn nominal_ranges() {
        let r = axis_ranges(&Jacobian6::nominal(), &nominal_box());
        let expected = [403.7, 398.5, 390.9, 8864.4, 8297.8, 15278.2];
        for (got, want) in r.iter().zip(expected) {
            assert_abs_diff_eq!(got.width(), want, epsilon = 0.1);
        }
    }

    #[test]
    fn identity_unit_box() {
        let r = axis_ranges(&Jacobian6::identity(), &InputBox::uniform(0.0, 1.0).unwrap());
        assert!(r.iter().all(|i| i.width() == 1.0));
    }

    #[test]
    fn half_box_halves_ranges() {
        let j = Jacobian6::nominal();
        let full = axis_ranges(&j, &nominal_box());
        let half = axis_ranges(&j, &InputBox::uniform(0.0, 55.0).unwrap());
        for (f, h) in full.iter().zip(half.iter()) {
            assert_abs_diff_eq!(h.width() * 2.0, f.width(), epsilon = 1e-9);
        }
    }

    #[test]
    fn amplification() {
        let j = Jacobian6::nominal();
        let a = amplification_ratios(&j, &nominal_box()).unwrap();
        for (got, want) in a.iter().zip([3.67, 3.62, 3.55]) {
            assert_abs_diff_eq!(*got, want, epsilon = 0.01);
        }
        let half = amplification_ratios(&j, &InputBox::uniform(0.0, 55.0).unwrap()).unwrap();
        for (x, y) in a.iter().zip(half.iter()) {
            assert_abs_diff_eq!(*x, *y, epsilon = 1e-12);
        }
        let id = amplification_ratios(&Jacobian6::identity(), &nominal_box()).unwrap();
        assert_eq!(id, [1.0, 1.0, 1.0]);
        assert!(amplification_ratios(&j, &InputBox::uniform(5.0, 5.0).unwrap()).is_err());
    }

    #[test]
    fn box_validation() {
        assert!(InputBox::uniform(10.0, 5.0).is_err());
        assert!(InputBox::uniform(0.0, 120.0).is_err());
        assert!(InputBox::new([0.0; 6], [120.0; 6], 150.0).is_ok());
    }

    #[test]
    fn box_zonotope_volume() {
        let g = [
            [2.0, 0.0, 0.0],
            [0.0, 3.0, 0.0],
            [0.0, 0.0, 5.0],
            [0.0; 3],
            [0.0; 3],
            [0.0; 3],
        ];
        assert_abs_diff_eq!(zonotope_volume_3d(&g), 30.0, epsilon = 1e-12);
    }

    #[test]
    fn degenerate_volume_is_zero() {
        let g = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert_eq!(zonotope_volume_3d(&g), 0.0);
    }

    #[test]
    fn nominal_volumes_near_reported() {
        let j = Jacobian6::nominal();
        let s = summarize(&j, &nominal_box()).unwrap();
        assert!((s.translational_volume / 2.0339e7 - 1.0).abs() < 0.02);
        assert!((s.rotational_volume / 3.7015e11 - 1.0).abs() < 0.02);
    }

    #[test]
    fn unit_square_projection() {
        let g = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0; 3], [0.0; 3], [0.0; 3], [0.0; 3]];
        let p = project_2d(&g, Plane::P01, false);
        assert!(!p.degenerate);
        assert_eq!(p.vertices.len(), 4);
        assert_abs_diff_eq!(p.area(), 1.0, epsilon = 1e-12);
        let (u, v) = p.bounding_box();
        assert_eq!((u.min, u.max, v.min, v.max), (0.0, 1.0, 0.0, 1.0));
    }

    #[test]
    fn single_generator_is_flagged_segment() {
        let g = [[1.0, 2.0, 0.0], [0.0; 3], [0.0; 3]];
        let p = project_2d(&g, Plane::P01, false);
        assert!(p.degenerate);
        assert_eq!(p.vertices.len(), 2);
    }

    #[test]
    fn all_zero_projection_is_a_point() {
        let g = [[0.0, 0.0, 7.0]; 6];
        let p = project_2d(&g, Plane::P01, false);
        assert!(p.degenerate);
        assert_eq!(p.vertices, alloc::vec![[0.0, 0.0]]);
    }

    #[test]
    fn nominal_xy_projection_matches_ranges() {
        let j = Jacobian6::nominal();
        let input = nominal_box();
        let ranges = axis_ranges(&j, &input);
        let polys = workspace_projections(&j, &input);
        assert_eq!(polys.len(), 6);
        for poly in &polys {
            let (u, v) = poly.bounding_box();
            let (a, b) = poly.axes;
            let ra = ranges[a.index()];
            let rb = ranges[b.index()];
            assert_abs_diff_eq!(u.min, ra.min, epsilon = 1e-9 * ra.width());
            assert_abs_diff_eq!(u.max, ra.max, epsilon = 1e-9 * ra.width());
            assert_abs_diff_eq!(v.min, rb.min, epsilon = 1e-9 * rb.width());
            assert_abs_diff_eq!(v.max, rb.max, epsilon = 1e-9 * rb.width());
            assert!(poly.is_convex(1e-12));
            assert!(poly.is_centrally_symmetric(1e-9));
            assert!(poly.area() > 0.0);
            assert!(poly.vertices.len() <= 12);
        }
        assert_eq!(polys[0].label(), "x-y");
        assert_eq!(polys[5].label(), "ry-rz");
    }
}
