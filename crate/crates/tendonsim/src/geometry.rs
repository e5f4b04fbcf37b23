//! Shoulder joint geometry: a two degree of freedom ball joint described by an
//! azimuth/elevation pair, with swing-only rotations that keep the arm's roll fixed.
//!
//! Angles are degrees at every public boundary; radians never escape this module.
//! The torso frame doubles as the world frame. At the neutral pose the arm axis
//! points along -z (arm hanging down); elevation swings the arm away from -z inside
//! the vertical plane selected by the azimuth.

use nalgebra::{Point3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Validation failures for [`ShoulderModel`].
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("sphere radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("arm length must be positive, got {0}")]
    NonPositiveArmLength(f64),
    #[error("arm length {arm_length_mm} must exceed the sphere radius {sphere_radius_mm}")]
    ArmShorterThanSphere {
        arm_length_mm: f64,
        sphere_radius_mm: f64,
    },
    #[error("neutral axis must be unit length, |axis| = {0}")]
    NonUnitNeutralAxis(f64),
    #[error("model contains a non-finite value")]
    NonFinite,
}

/// A joint configuration: azimuth selects the vertical motion plane, elevation is
/// the swing angle away from the hanging neutral inside that plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointPose {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
}

impl JointPose {
    /// Arm hanging straight down; every azimuth is equivalent here.
    pub const NEUTRAL: JointPose = JointPose {
        azimuth_deg: 0.0,
        elevation_deg: 0.0,
    };

    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        Self {
            azimuth_deg,
            elevation_deg,
        }
    }
}

/// Dimensions of the shoulder rig: a sphere (the joint ball) centered at
/// `center_mm` and a rigid arm of `arm_length_mm` whose neutral direction is
/// `neutral_axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShoulderModel {
    pub center_mm: [f64; 3],
    pub sphere_radius_mm: f64,
    pub arm_length_mm: f64,
    pub neutral_axis: [f64; 3],
}

impl Default for ShoulderModel {
    fn default() -> Self {
        Self {
            center_mm: [0.0, 0.0, 0.0],
            sphere_radius_mm: 60.0,
            arm_length_mm: 300.0,
            neutral_axis: [0.0, 0.0, -1.0],
        }
    }
}

impl ShoulderModel {
    pub fn center(&self) -> Point3<f64> {
        Point3::new(self.center_mm[0], self.center_mm[1], self.center_mm[2])
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = self
            .center_mm
            .iter()
            .chain(self.neutral_axis.iter())
            .all(|v| v.is_finite())
            && self.sphere_radius_mm.is_finite()
            && self.arm_length_mm.is_finite();
        if !finite {
            return Err(GeometryError::NonFinite);
        }
        if self.sphere_radius_mm <= 0.0 {
            return Err(GeometryError::NonPositiveRadius(self.sphere_radius_mm));
        }
        if self.arm_length_mm <= 0.0 {
            return Err(GeometryError::NonPositiveArmLength(self.arm_length_mm));
        }
        if self.arm_length_mm <= self.sphere_radius_mm {
            return Err(GeometryError::ArmShorterThanSphere {
                arm_length_mm: self.arm_length_mm,
                sphere_radius_mm: self.sphere_radius_mm,
            });
        }
        let norm = Vector3::from(self.neutral_axis).norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(GeometryError::NonUnitNeutralAxis(norm));
        }
        Ok(())
    }
}

/// Which rigid body a routed point is attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Torso,
    Humerus,
}

/// Unit direction of the arm at `pose`:
/// (sin(el) cos(az), sin(el) sin(az), -cos(el)).
pub fn arm_axis(pose: &JointPose) -> Vector3<f64> {
    let az = pose.azimuth_deg.to_radians();
    let el = pose.elevation_deg.to_radians();
    Vector3::new(el.sin() * az.cos(), el.sin() * az.sin(), -el.cos())
}

/// Rotation carrying the humerus from neutral to `pose`: a single swing by the
/// elevation angle about the horizontal axis (sin(az), -cos(az), 0). Zero
/// elevation gives the identity for every azimuth, so the neutral pose is unique.
pub fn humerus_rotation(pose: &JointPose) -> Rotation3<f64> {
    let az = pose.azimuth_deg.to_radians();
    let el = pose.elevation_deg.to_radians();
    let axis = Unit::new_unchecked(Vector3::new(az.sin(), -az.cos(), 0.0));
    Rotation3::from_axis_angle(&axis, el)
}

/// World position of a point given in `frame`-local coordinates. Torso points are
/// already world coordinates; humerus points are stated in the neutral pose and
/// rotate rigidly about the sphere center.
pub fn transform_point(
    model: &ShoulderModel,
    pose: &JointPose,
    frame: Frame,
    local_mm: &Point3<f64>,
) -> Point3<f64> {
    match frame {
        Frame::Torso => *local_mm,
        Frame::Humerus => {
            let c = model.center();
            c + humerus_rotation(pose) * (local_mm - c)
        }
    }
}
