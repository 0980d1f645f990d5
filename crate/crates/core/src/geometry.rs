//! Deterministic 3D placement of the base station (BS) array, the users,
//! the planar IRS and the radar target.
//!
//! Coordinates follow the usual layout: the BS uniform linear array sits on
//! the y-axis at height `bs_height`, the user array lies on the ground at
//! `x = user_x`, and the √N × √N IRS spans the x/z plane around its center
//! `(irs_x, irs_y, irs_height)`.
//!
//! Squared distances (ε) are kept as squared distances; callers decide where
//! a square root is needed.

use nalgebra::{DMatrix, DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("IRS element count {0} is not a perfect square")]
    NotSquare(usize),
    #[error("{0} must be at least 1")]
    EmptyArray(&'static str),
    #[error("{name} must be positive, got {value}")]
    NonPositiveSpacing { name: &'static str, value: f64 },
    #[error("{name} must be non-negative, got {value}")]
    NegativeHeight { name: &'static str, value: f64 },
    #[error("speed must be non-negative, got {0}")]
    NegativeSpeed(f64),
    #[error("mobility lists {got} users but the scene has {expected}")]
    MobilityLength { expected: usize, got: usize },
    #[error("IRS element index {index} outside 1..={count}")]
    ElementIndex { index: usize, count: usize },
    #[error("wavelength must be positive, got {0}")]
    Wavelength(f64),
}

/// A length that may be given in meters or in carrier wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Length {
    Meters(f64),
    Wavelengths(f64),
}

impl Length {
    pub fn resolve(self, wavelength: f64) -> f64 {
        match self {
            Length::Meters(m) => m,
            Length::Wavelengths(w) => w * wavelength,
        }
    }
}

/// Scene description before the carrier wavelength is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLayout {
    pub bs_antennas: usize,
    pub users: usize,
    pub irs_elements: usize,
    pub bs_spacing: Length,
    pub irs_spacing: Length,
    pub user_spacing: Length,
    pub bs_height: f64,
    pub irs_height: f64,
    pub target_height: f64,
    pub irs_x: f64,
    pub irs_y: f64,
    pub user_x: f64,
    pub target_x: f64,
    pub target_y: f64,
}

impl Default for SceneLayout {
    /// Two users, a 4-antenna BS and a 3×3 IRS in the reference deployment.
    fn default() -> Self {
        Self {
            bs_antennas: 4,
            users: 2,
            irs_elements: 9,
            bs_spacing: Length::Wavelengths(0.5),
            irs_spacing: Length::Wavelengths(0.2),
            user_spacing: Length::Meters(0.5),
            bs_height: 20.0,
            irs_height: 25.0,
            target_height: 25.0,
            irs_x: 1.0,
            irs_y: 2.0,
            user_x: 2.0,
            target_x: 1.5,
            target_y: 1.0,
        }
    }
}

impl SceneLayout {
    pub fn resolve(&self, wavelength: f64) -> Result<SceneGeometry, GeometryError> {
        if !(wavelength > 0.0) {
            return Err(GeometryError::Wavelength(wavelength));
        }
        let geom = SceneGeometry {
            bs_antennas: self.bs_antennas,
            users: self.users,
            irs_elements: self.irs_elements,
            bs_spacing: self.bs_spacing.resolve(wavelength),
            irs_spacing: self.irs_spacing.resolve(wavelength),
            user_spacing: self.user_spacing.resolve(wavelength),
            bs_height: self.bs_height,
            irs_height: self.irs_height,
            target_height: self.target_height,
            irs_x: self.irs_x,
            irs_y: self.irs_y,
            user_x: self.user_x,
            target_x: self.target_x,
            target_y: self.target_y,
        };
        geom.validate()?;
        Ok(geom)
    }
}

/// Resolved scene; every length is in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    /// M
    pub bs_antennas: usize,
    /// K
    pub users: usize,
    /// N, a perfect square.
    pub irs_elements: usize,
    pub bs_spacing: f64,
    pub irs_spacing: f64,
    pub user_spacing: f64,
    pub bs_height: f64,
    pub irs_height: f64,
    pub target_height: f64,
    pub irs_x: f64,
    pub irs_y: f64,
    pub user_x: f64,
    pub target_x: f64,
    pub target_y: f64,
}

/// Linear motion of one node: speed in m/s, heading in radians.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Motion {
    pub speed: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mobility {
    pub users: Vec<Motion>,
    pub target: Motion,
}

impl Mobility {
    /// Every user shares one motion.
    pub fn uniform(users: usize, user: Motion, target: Motion) -> Self {
        Self {
            users: vec![user; users],
            target,
        }
    }

    pub fn stationary(users: usize) -> Self {
        Self::uniform(users, Motion::default(), Motion::default())
    }

    pub fn validate(&self, geom: &SceneGeometry) -> Result<(), GeometryError> {
        if self.users.len() != geom.users {
            return Err(GeometryError::MobilityLength {
                expected: geom.users,
                got: self.users.len(),
            });
        }
        for m in self.users.iter().chain(std::iter::once(&self.target)) {
            if !(m.speed >= 0.0) {
                return Err(GeometryError::NegativeSpeed(m.speed));
            }
        }
        Ok(())
    }
}

/// Element coordinates; index 0 corresponds to element 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Positions {
    pub bs: Vec<Vector3<f64>>,
    pub users: Vec<Vector3<f64>>,
    pub irs: Vec<Vector3<f64>>,
    pub irs_center: Vector3<f64>,
    pub target: Vector3<f64>,
}

/// Squared propagation distances.
#[derive(Debug, Clone, PartialEq)]
pub struct SquaredDistances {
    /// M × N, BS antenna m to IRS element n.
    pub bs_irs: DMatrix<f64>,
    /// N × K, IRS element n to user k.
    pub irs_user: DMatrix<f64>,
    /// N, IRS element n to the target.
    pub irs_target: DVector<f64>,
}

/// Exact integer square root, if `n` is a perfect square.
pub fn perfect_sqrt(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

impl SceneGeometry {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.bs_antennas == 0 {
            return Err(GeometryError::EmptyArray("bs_antennas"));
        }
        if self.users == 0 {
            return Err(GeometryError::EmptyArray("users"));
        }
        if self.irs_elements == 0 {
            return Err(GeometryError::EmptyArray("irs_elements"));
        }
        if perfect_sqrt(self.irs_elements).is_none() {
            return Err(GeometryError::NotSquare(self.irs_elements));
        }
        for (name, value) in [
            ("bs_spacing", self.bs_spacing),
            ("irs_spacing", self.irs_spacing),
            ("user_spacing", self.user_spacing),
        ] {
            if !(value > 0.0) {
                return Err(GeometryError::NonPositiveSpacing { name, value });
            }
        }
        for (name, value) in [
            ("bs_height", self.bs_height),
            ("irs_height", self.irs_height),
            ("target_height", self.target_height),
        ] {
            if !(value >= 0.0) {
                return Err(GeometryError::NegativeHeight { name, value });
            }
        }
        Ok(())
    }

    /// Side length √N of the IRS.
    pub fn irs_side(&self) -> usize {
        perfect_sqrt(self.irs_elements).expect("validated geometry has square IRS")
    }

    /// Signed in-plane offset Δ_n of IRS element `n` (1-based) from the
    /// IRS center, applied to both its x and z coordinates.
    pub fn irs_offset(&self, n: usize) -> Result<f64, GeometryError> {
        if n == 0 || n > self.irs_elements {
            return Err(GeometryError::ElementIndex {
                index: n,
                count: self.irs_elements,
            });
        }
        let side = self.irs_side();
        let centering = ((side + 1) / 2) as f64 + 0.5 * ((side + 1) % 2) as f64;
        let column = n - ((n - 1) / side) * side;
        Ok((column as f64 - centering) * self.irs_spacing)
    }

    fn offsets(&self) -> Vec<f64> {
        (1..=self.irs_elements)
            .map(|n| self.irs_offset(n).expect("index in range"))
            .collect()
    }

    fn bs_y(&self, m: usize) -> f64 {
        (self.bs_antennas as f64 - 2.0 * m as f64 + 1.0) * self.bs_spacing / 2.0
    }

    fn user_y(&self, k: usize) -> f64 {
        (self.users as f64 - 2.0 * k as f64 + 1.0) * self.user_spacing / 2.0
    }

    pub fn positions(&self) -> Positions {
        let bs = (1..=self.bs_antennas)
            .map(|m| Vector3::new(0.0, self.bs_y(m), self.bs_height))
            .collect();
        let users = (1..=self.users)
            .map(|k| Vector3::new(self.user_x, self.user_y(k), 0.0))
            .collect();
        let irs = self
            .offsets()
            .into_iter()
            .map(|d| Vector3::new(self.irs_x + d, self.irs_y, self.irs_height + d))
            .collect();
        Positions {
            bs,
            users,
            irs,
            irs_center: Vector3::new(self.irs_x, self.irs_y, self.irs_height),
            target: Vector3::new(self.target_x, self.target_y, self.target_height),
        }
    }

    /// Squared distances built from the per-axis coordinate differences.
    pub fn squared_distances(&self) -> SquaredDistances {
        let offsets = self.offsets();
        let (m_count, n_count, k_count) = (self.bs_antennas, self.irs_elements, self.users);

        let bs_irs = DMatrix::from_fn(m_count, n_count, |m, n| {
            let d = offsets[n];
            let x = self.irs_x + d;
            let y = self.irs_y - self.bs_y(m + 1);
            let z = self.irs_height + d - self.bs_height;
            x * x + y * y + z * z
        });
        let irs_user = DMatrix::from_fn(n_count, k_count, |n, k| {
            let d = offsets[n];
            let x = self.irs_x + d - self.user_x;
            let y = self.irs_y - self.user_y(k + 1);
            let z = self.irs_height + d;
            x * x + y * y + z * z
        });
        let irs_target = DVector::from_fn(n_count, |n, _| {
            let d = offsets[n];
            let x = self.irs_x + d - self.target_x;
            let y = self.irs_y - self.target_y;
            let z = self.irs_height + d - self.target_height;
            x * x + y * y + z * z
        });
        SquaredDistances {
            bs_irs,
            irs_user,
            irs_target,
        }
    }

    /// LoS Doppler shift (Hz) on the IRS→user link for a user moving with `motion`.
    ///
    /// The planar projection uses the shared user-array abscissa `user_x`.
    pub fn doppler_user(&self, motion: Motion, wavelength: f64) -> Result<f64, GeometryError> {
        let dx = self.irs_x - self.user_x;
        let dy = self.irs_y;
        projected_doppler(motion, wavelength, dx, dy)
    }

    /// LoS Doppler shift (Hz) on the IRS→target link.
    pub fn doppler_target(&self, motion: Motion, wavelength: f64) -> Result<f64, GeometryError> {
        let dx = self.irs_x - self.target_x;
        let dy = self.target_y - self.irs_y;
        projected_doppler(motion, wavelength, dx, dy)
    }
}

fn projected_doppler(motion: Motion, wavelength: f64, dx: f64, dy: f64) -> Result<f64, GeometryError> {
    if !(wavelength > 0.0) {
        return Err(GeometryError::Wavelength(wavelength));
    }
    let norm = dx.hypot(dy);
    if norm == 0.0 {
        if motion.speed != 0.0 {
            log::warn!("degenerate Doppler geometry (coincident planar positions); using 0 Hz");
        }
        return Ok(0.0);
    }
    Ok(motion.speed / wavelength * (dx * motion.angle.cos() + dy * motion.angle.sin()) / norm)
}
