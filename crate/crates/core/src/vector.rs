use core::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

/// Task-space axis, in the fixed row order of the Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
    Rx,
    Ry,
    Rz,
}

impl Axis {
    pub const ALL: [Axis; 6] = [Axis::X, Axis::Y, Axis::Z, Axis::Rx, Axis::Ry, Axis::Rz];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Axis> {
        Axis::ALL.get(i).copied()
    }

    pub const fn is_rotation(self) -> bool {
        matches!(self, Axis::Rx | Axis::Ry | Axis::Rz)
    }

    pub const fn label(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
            Axis::Rx => "rx",
            Axis::Ry => "ry",
            Axis::Rz => "rz",
        }
    }

    pub const fn unit(self) -> &'static str {
        if self.is_rotation() {
            "urad"
        } else {
            "um"
        }
    }

    /// Parses `x`, `y`, `z`, `rx`, `ry`, `rz` (also `thetax` style aliases).
    pub fn parse(s: &str) -> Option<Axis> {
        let axis = match s {
            "x" | "X" => Axis::X,
            "y" | "Y" => Axis::Y,
            "z" | "Z" => Axis::Z,
            "rx" | "Rx" | "RX" | "thetax" => Axis::Rx,
            "ry" | "Ry" | "RY" | "thetay" => Axis::Ry,
            "rz" | "Rz" | "RZ" | "thetaz" => Axis::Rz,
            _ => return None,
        };
        Some(axis)
    }
}

macro_rules! vec6 {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Default)]
        pub struct $name(pub [f64; 6]);

        impl $name {
            pub const ZERO: $name = $name([0.0; 6]);

            pub const fn from_array(a: [f64; 6]) -> Self {
                $name(a)
            }

            pub const fn splat(v: f64) -> Self {
                $name([v; 6])
            }

            pub const fn to_array(self) -> [f64; 6] {
                self.0
            }

            pub fn iter(&self) -> core::slice::Iter<'_, f64> {
                self.0.iter()
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|v| v.is_finite())
            }

            pub fn map(self, f: impl Fn(f64) -> f64) -> Self {
                $name(self.0.map(f))
            }

            /// Largest absolute component.
            pub fn max_abs(&self) -> f64 {
                self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            }
        }

        impl From<[f64; 6]> for $name {
            fn from(a: [f64; 6]) -> Self {
                $name(a)
            }
        }

        impl Index<usize> for $name {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }

        impl IndexMut<usize> for $name {
            fn index_mut(&mut self, i: usize) -> &mut f64 {
                &mut self.0[i]
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, rhs: $name) -> $name {
                $name(core::array::from_fn(|i| self.0[i] + rhs.0[i]))
            }
        }

        impl AddAssign for $name {
            fn add_assign(&mut self, rhs: $name) {
                for (a, b) in self.0.iter_mut().zip(rhs.0) {
                    *a += b;
                }
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, rhs: $name) -> $name {
                $name(core::array::from_fn(|i| self.0[i] - rhs.0[i]))
            }
        }

        impl Neg for $name {
            type Output = $name;
            fn neg(self) -> $name {
                self.map(|v| -v)
            }
        }

        impl Mul<f64> for $name {
            type Output = $name;
            fn mul(self, s: f64) -> $name {
                self.map(|v| v * s)
            }
        }
    };
}

vec6!(
    /// Stage displacement: x, y, z in µm, then rx, ry, rz in µrad.
    Pose6
);
vec6!(
    /// Per-actuator input displacement in µm.
    ActuatorVec6
);
vec6!(
    /// Per-actuator drive voltage in volts.
    VoltageVec6
);
vec6!(
    /// Force (N) and moment (N·m) applied at the stage.
    Wrench6
);

impl Pose6 {
    pub const fn new(x: f64, y: f64, z: f64, rx: f64, ry: f64, rz: f64) -> Self {
        Pose6([x, y, z, rx, ry, rz])
    }

    pub fn axis(&self, axis: Axis) -> f64 {
        self.0[axis.index()]
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }
    pub fn y(&self) -> f64 {
        self.0[1]
    }
    pub fn z(&self) -> f64 {
        self.0[2]
    }
    pub fn rx(&self) -> f64 {
        self.0[3]
    }
    pub fn ry(&self) -> f64 {
        self.0[4]
    }
    pub fn rz(&self) -> f64 {
        self.0[5]
    }
}

impl Wrench6 {
    pub const fn new(fx: f64, fy: f64, fz: f64, mx: f64, my: f64, mz: f64) -> Self {
        Wrench6([fx, fy, fz, mx, my, mz])
    }
}
