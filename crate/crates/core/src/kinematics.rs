//! Linear kinematic and static model of the positioner.
//!
//! The stage pose responds linearly to the six actuator displacements
//! through a 6×6 Jacobian, and linearly to an external wrench through a
//! 6×6 compliance matrix.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix6, Vector6};

use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal, StandardUniform};

use crate::workspace::InputBox;
use crate::{ActuatorVec6, Error, Pose6, Result, Wrench6};

/// Regression-fitted Jacobian of the positioner, row-major.
/// Rows 1-3 are µm/µm, rows 4-6 µrad/µm.
#[rustfmt::skip]
pub const NOMINAL_JACOBIAN: [f64; 36] = [
    -0.65214, -0.926,   -0.26136,  0.26204,  0.91721,  0.65117,
     0.68583,  0.22332, -0.90423, -0.89984,  0.21785,  0.69157,
     0.59421,  0.59531,  0.59273,  0.58933,  0.58998,  0.59237,
     6.8766, -19.846,   13.804,   13.74,   -19.594,    6.7252,
   -18.912,   -3.8375,  14.909,  -14.936,    3.9577,  18.883,
    23.248,  -23.313,   23.035,  -23.009,   23.089,  -23.199,
];

/// Output compliance of the stage, row-major, SI units
/// (m/N, m/(N·m), rad/N, rad/(N·m) by block).
#[rustfmt::skip]
pub const NOMINAL_COMPLIANCE: [f64; 36] = [
     8.1702e-06,  2.9018e-09, -8.1048e-09,  2.2626e-07,  1.5341e-04,  6.7613e-07,
     2.9006e-09,  8.1760e-06,  2.1384e-08, -1.5340e-04,  1.5135e-07, -5.8689e-07,
    -8.1046e-09,  2.1240e-08,  1.0176e-05, -1.2287e-06,  2.4710e-07, -2.7619e-07,
     2.2628e-07, -1.5340e-04, -1.2577e-06,  3.0963e-02, -2.6427e-07,  9.1629e-06,
     1.5341e-04,  1.5135e-07,  2.4704e-07, -2.6427e-07,  3.0831e-02,  3.1156e-05,
     6.9291e-07, -5.8687e-07, -2.7620e-07,  9.1629e-06,  3.1156e-05,  1.8005e-02,
];

/// Input stiffness of one bridge amplifier, N/m.
pub const NOMINAL_INPUT_STIFFNESS: f64 = 3.0378e6;

/// Inverse operations refuse matrices at or above this condition number.
pub const MAX_CONDITION: f64 = 1e6;

/// Largest tolerated relative asymmetry of a compliance matrix.
pub const COMPLIANCE_ASYMMETRY_TOL: f64 = 0.05;

const UM_PER_M: f64 = 1e6;

/// Parameters of the Kutzbach-Grübler mobility count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MobilityParams {
    lambda: u32,
    n_links: u32,
    joints: Vec<u32>,
}

impl MobilityParams {
    /// `joints` holds the DOF count of every joint.
    pub fn new(lambda: u32, n_links: u32, joints: Vec<u32>) -> Result<Self> {
        if lambda != 3 && lambda != 6 {
            return Err(Error::invalid(
                "mobility.lambda",
                format!("motion-space dimension must be 3 or 6, got {lambda}"),
            ));
        }
        if n_links < 2 {
            return Err(Error::invalid(
                "mobility.n_links",
                format!("need at least 2 links, got {n_links}"),
            ));
        }
        if let Some((i, m)) = joints.iter().enumerate().find(|(_, &m)| m < 1 || m > lambda) {
            return Err(Error::invalid(
                "mobility.joints",
                format!("joint {i} has {m} DOF, must be within 1..={lambda}"),
            ));
        }
        Ok(MobilityParams {
            lambda,
            n_links,
            joints,
        })
    }

    /// The positioner: 8 links and 9 two-DOF joints in spatial motion.
    pub fn positioner() -> Self {
        MobilityParams {
            lambda: 6,
            n_links: 8,
            joints: alloc::vec![2; 9],
        }
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn n_links(&self) -> u32 {
        self.n_links
    }

    pub fn joints(&self) -> &[u32] {
        &self.joints
    }
}

/// Mechanism DOF, `λ(n − j − 1) + Σ mᵢ`.
pub fn mobility(p: &MobilityParams) -> i64 {
    let lambda = i64::from(p.lambda);
    let n = i64::from(p.n_links);
    let j = p.joints.len() as i64;
    let freedoms: i64 = p.joints.iter().map(|&m| i64::from(m)).sum();
    lambda * (n - j - 1) + freedoms
}

fn matrix_from_row_slice(what: &'static str, entries: &[f64]) -> Result<Matrix6<f64>> {
    if entries.len() != 36 {
        return Err(Error::invalid(
            what,
            format!("expected 36 row-major entries, got {}", entries.len()),
        ));
    }
    if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(
            what,
            format!("entry {} (row {}, col {}) is not finite", i, i / 6 + 1, i % 6 + 1),
        ));
    }
    Ok(Matrix6::from_row_slice(entries))
}

fn row_major(m: &Matrix6<f64>) -> [f64; 36] {
    core::array::from_fn(|i| m[(i / 6, i % 6)])
}

/// Actuator-to-pose map: row k gives pose component k per µm of each input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian6 {
    m: Matrix6<f64>,
}

impl Jacobian6 {
    pub fn from_row_slice(entries: &[f64]) -> Result<Self> {
        matrix_from_row_slice("jacobian", entries).map(|m| Jacobian6 { m })
    }

    pub fn nominal() -> Self {
        Jacobian6 {
            m: Matrix6::from_row_slice(&NOMINAL_JACOBIAN),
        }
    }

    pub fn identity() -> Self {
        Jacobian6 { m: Matrix6::identity() }
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.m
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.m[(row, col)]
    }

    pub fn to_row_major(&self) -> [f64; 36] {
        row_major(&self.m)
    }

    /// 2-norm condition number (ratio of extreme singular values).
    pub fn condition_number(&self) -> f64 {
        condition_number(&self.m)
    }

    /// Inverse matrix, refusing ill-conditioned Jacobians.
    pub fn inverse(&self) -> Result<Matrix6<f64>> {
        let condition = self.condition_number();
        if !(condition < MAX_CONDITION) {
            return Err(Error::IllConditioned {
                condition,
                limit: MAX_CONDITION,
            });
        }
        self.m.lu().try_inverse().ok_or(Error::IllConditioned {
            condition,
            limit: MAX_CONDITION,
        })
    }
}

fn condition_number(m: &Matrix6<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Pose produced by actuator displacements `u`.
pub fn forward_map(jacobian: &Jacobian6, u: &ActuatorVec6) -> Pose6 {
    let p = jacobian.m * Vector6::from(u.0);
    Pose6(p.into())
}

/// Actuator displacements that realize `target` exactly (square LU solve).
pub fn inverse_map(jacobian: &Jacobian6, target: &Pose6) -> Result<ActuatorVec6> {
    let condition = jacobian.condition_number();
    if !(condition < MAX_CONDITION) {
        return Err(Error::IllConditioned {
            condition,
            limit: MAX_CONDITION,
        });
    }
    let u = jacobian
        .m
        .lu()
        .solve(&Vector6::from(target.0))
        .ok_or(Error::IllConditioned {
            condition,
            limit: MAX_CONDITION,
        })?;
    Ok(ActuatorVec6(u.into()))
}

/// Least-squares Jacobian estimate from measured input/output pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianFit {
    pub jacobian: Jacobian6,
    /// Fitted constant offset per pose axis. Close to zero for a linear plant.
    pub intercept: Pose6,
    /// Root-mean-square residual per pose axis.
    pub rms_residual: [f64; 6],
    /// Standard error of every Jacobian entry, `[row][col]`.
    /// Infinite when the fit has no residual degrees of freedom.
    pub std_errors: [[f64; 6]; 6],
    pub intercept_std_errors: [f64; 6],
    pub samples: usize,
}

/// Ordinary least squares per pose axis on `[1, u₁..u₆]`.
pub fn fit_jacobian(samples: &[(ActuatorVec6, Pose6)]) -> Result<JacobianFit> {
    const COLS: usize = 7;
    let n = samples.len();
    if n < COLS {
        return Err(Error::InsufficientData { needed: COLS, got: n });
    }
    if samples.iter().any(|(u, p)| !u.is_finite() || !p.is_finite()) {
        return Err(Error::invalid("fit samples", "non-finite sample"));
    }

    let design = DMatrix::from_fn(n, COLS, |r, c| if c == 0 { 1.0 } else { samples[r].0[c - 1] });
    let qr = design.clone().qr();
    let r = qr.r();
    let q = qr.q();

    let diag_max = (0..COLS).fold(0.0_f64, |m, i| m.max(r[(i, i)].abs()));
    let rank = (0..COLS).filter(|&i| r[(i, i)].abs() > 1e-10 * diag_max).count();
    if rank < COLS {
        return Err(Error::RankDeficient { rank, columns: COLS });
    }
    let r_inv = r
        .clone()
        .try_inverse()
        .ok_or(Error::RankDeficient { rank, columns: COLS })?;
    // (XᵀX)⁻¹ = R⁻¹R⁻ᵀ, only the diagonal is needed.
    let cov_diag: Vec<f64> = (0..COLS)
        .map(|i| (0..COLS).map(|k| r_inv[(i, k)] * r_inv[(i, k)]).sum())
        .collect();

    let dof = n - COLS;
    let mut jac = Matrix6::zeros();
    let mut intercept = [0.0; 6];
    let mut rms_residual = [0.0; 6];
    let mut std_errors = [[0.0; 6]; 6];
    let mut intercept_std_errors = [0.0; 6];

    for row in 0..6 {
        let y = DVector::from_fn(n, |i, _| samples[i].1 .0[row]);
        let qty = q.tr_mul(&y);
        let beta = r
            .solve_upper_triangular(&qty)
            .ok_or(Error::RankDeficient { rank, columns: COLS })?;
        let residual = &y - &design * &beta;
        let rss = residual.norm_squared();
        rms_residual[row] = libm::sqrt(rss / n as f64);
        let sigma2 = if dof > 0 { rss / dof as f64 } else { f64::INFINITY };

        intercept[row] = beta[0];
        intercept_std_errors[row] = libm::sqrt(sigma2 * cov_diag[0]);
        for col in 0..6 {
            jac[(row, col)] = beta[col + 1];
            std_errors[row][col] = libm::sqrt(sigma2 * cov_diag[col + 1]);
        }
    }

    Ok(JacobianFit {
        jacobian: Jacobian6 { m: jac },
        intercept: Pose6(intercept),
        rms_residual,
        std_errors,
        intercept_std_errors,
        samples: n,
    })
}

/// Input/output pairs of a simulated calibration: inputs uniform in `input`,
/// outputs `J·u` plus Gaussian noise of `noise_std` on every pose axis.
pub fn synthetic_fit_samples(
    jacobian: &Jacobian6,
    input: &InputBox,
    n: usize,
    noise_std: f64,
    seed: u64,
) -> Vec<(ActuatorVec6, Pose6)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (input.lo(), input.hi());
    (0..n)
        .map(|_| {
            let u = ActuatorVec6(core::array::from_fn(|i| {
                let t: f64 = StandardUniform.sample(&mut rng);
                lo[i] + t * (hi[i] - lo[i])
            }));
            let mut p = forward_map(jacobian, &u);
            for k in 0..6 {
                let z: f64 = StandardNormal.sample(&mut rng);
                p[k] += noise_std * z;
            }
            (u, p)
        })
        .collect()
}

/// Stage compliance: maps a wrench to the deflection it produces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compliance6 {
    m: Matrix6<f64>,
}

impl Compliance6 {
    pub fn from_row_slice(entries: &[f64]) -> Result<Self> {
        matrix_from_row_slice("compliance", entries).map(|m| Compliance6 { m })
    }

    pub fn nominal() -> Self {
        Compliance6 {
            m: Matrix6::from_row_slice(&NOMINAL_COMPLIANCE),
        }
    }

    pub fn identity() -> Self {
        Compliance6 { m: Matrix6::identity() }
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.m
    }

    pub fn to_row_major(&self) -> [f64; 36] {
        row_major(&self.m)
    }
}

/// Deflection under `wrench`, returned in µm / µrad.
pub fn output_deflection(compliance: &Compliance6, wrench: &Wrench6) -> Pose6 {
    let d = compliance.m * Vector6::from(wrench.0);
    Pose6(d.into()) * UM_PER_M
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceReport {
    /// max |Cᵢⱼ − Cⱼᵢ|
    pub max_asymmetry: f64,
    /// max |Cᵢⱼ − Cⱼᵢ| / max |Cᵢⱼ|
    pub relative_asymmetry: f64,
    pub diagonal: [f64; 6],
    pub symmetric: bool,
    pub positive_diagonal: bool,
}

impl ComplianceReport {
    pub fn passed(&self) -> bool {
        self.symmetric && self.positive_diagonal
    }

    /// Translational diagonal entries, m/N.
    pub fn linear_diagonal(&self) -> [f64; 3] {
        [self.diagonal[0], self.diagonal[1], self.diagonal[2]]
    }

    /// Rotational diagonal entries, rad/(N·m).
    pub fn angular_diagonal(&self) -> [f64; 3] {
        [self.diagonal[3], self.diagonal[4], self.diagonal[5]]
    }
}

/// Checks approximate symmetry and strictly positive diagonal.
pub fn validate_compliance(compliance: &Compliance6) -> ComplianceReport {
    let m = &compliance.m;
    let mut max_asymmetry = 0.0_f64;
    for i in 0..6 {
        for j in (i + 1)..6 {
            max_asymmetry = max_asymmetry.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    let scale = m.amax();
    let relative_asymmetry = if scale > 0.0 { max_asymmetry / scale } else { 0.0 };
    let diagonal: [f64; 6] = core::array::from_fn(|i| m[(i, i)]);
    ComplianceReport {
        max_asymmetry,
        relative_asymmetry,
        diagonal,
        symmetric: relative_asymmetry <= COMPLIANCE_ASYMMETRY_TOL,
        positive_diagonal: diagonal.iter().all(|&c| c > 0.0),
    }
}

/// Stiffness seen by one actuator at the input of its bridge amplifier, N/m.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct InputStiffness(f64);

impl InputStiffness {
    pub fn new(n_per_m: f64) -> Result<Self> {
        if n_per_m.is_finite() && n_per_m > 0.0 {
            Ok(InputStiffness(n_per_m))
        } else {
            Err(Error::invalid(
                "input_stiffness",
                format!("must be finite and > 0, got {n_per_m}"),
            ))
        }
    }

    pub fn nominal() -> Self {
        InputStiffness(NOMINAL_INPUT_STIFFNESS)
    }

    pub fn n_per_m(self) -> f64 {
        self.0
    }
}

/// Force in N an actuator must supply to push its input by `displacement_um`.
pub fn required_actuator_force(stiffness: InputStiffness, displacement_um: f64) -> Result<f64> {
    if !(displacement_um >= 0.0) || !displacement_um.is_finite() {
        return Err(Error::invalid(
            "input displacement",
            format!("must be finite and >= 0, got {displacement_um}"),
        ));
    }
    Ok(stiffness.0 * displacement_um / UM_PER_M)
}
