//! Pinhole camera model.
//!
//! Camera frame: +x right, +y down, +z forward (right-handed). The world is
//! right-handed with +z up. A [`CameraPose`] holds the camera-to-world
//! rotation; depth everywhere means camera-space z, not ray length.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use super::SceneError;
use crate::geometry::Vec3;

/// World up direction.
pub const WORLD_UP: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Default focal length in pixels when a configuration does not give one.
pub const DEFAULT_FOCAL: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, SceneError> {
        let k = CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// `fx = fy = 1000`, principal point at the image centre.
    pub fn centered(width: u32, height: u32) -> Self {
        CameraIntrinsics {
            fx: DEFAULT_FOCAL,
            fy: DEFAULT_FOCAL,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(SceneError::Validation(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::Domain("zero-area image".into()));
        }
        if !(0.0..self.width as f64).contains(&self.cx) || !(0.0..self.height as f64).contains(&self.cy) {
            return Err(SceneError::Validation(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Inverse of the intrinsics matrix: maps homogeneous pixels to
    /// camera-space rays with unit z.
    pub fn back_projection(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// Camera placement: position plus camera-to-world rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    pub orientation: UnitQuaternion<f64>,
}

impl CameraPose {
    pub fn new(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        CameraPose { position, orientation }
    }

    /// Camera frame aligned with the world frame.
    pub fn identity_at(position: Vec3) -> Self {
        CameraPose::new(position, UnitQuaternion::identity())
    }

    /// Yaw turns left about world up, pitch tilts the view up, roll spins
    /// about the viewing axis; all in degrees. Zero angles look along world
    /// +x with the image upright.
    pub fn from_euler_deg(position: Vec3, yaw: f64, pitch: f64, roll: f64) -> Self {
        let base = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, -1.0),
            Vec3::new(1.0, 0.0, 0.0),
        ]));
        let r = Rotation3::from_axis_angle(&Vec3::z_axis(), yaw.to_radians())
            * Rotation3::from_axis_angle(&Vec3::y_axis(), -pitch.to_radians())
            * Rotation3::from_axis_angle(&Vec3::x_axis(), roll.to_radians())
            * base;
        CameraPose::new(position, UnitQuaternion::from_rotation_matrix(&r))
    }

    pub fn right(&self) -> Vec3 {
        self.orientation * Vec3::x()
    }

    pub fn down(&self) -> Vec3 {
        self.orientation * Vec3::y()
    }

    pub fn forward(&self) -> Vec3 {
        self.orientation * Vec3::z()
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.orientation.inverse_transform_vector(&(p - self.position))
    }

    pub fn camera_to_world(&self, p: &Vec3) -> Vec3 {
        self.orientation * p + self.position
    }
}

/// Serializable pose as stored in scene and anchor files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EulerPose {
    pub position: [f64; 3],
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

impl EulerPose {
    pub fn to_pose(&self) -> CameraPose {
        CameraPose::from_euler_deg(Vec3::from(self.position), self.yaw, self.pitch, self.roll)
    }

    pub fn is_finite(&self) -> bool {
        self.position
            .iter()
            .chain([&self.yaw, &self.pitch, &self.roll])
            .all(|v| v.is_finite())
    }
}

/// Projects a world point; `None` when it is not in front of the camera.
pub fn project(point: &Vec3, intrinsics: &CameraIntrinsics, pose: &CameraPose) -> Option<([f64; 2], f64)> {
    let c = pose.world_to_camera(point);
    if !(c.z > 0.0) {
        return None;
    }
    Some((
        [
            intrinsics.fx * c.x / c.z + intrinsics.cx,
            intrinsics.fy * c.y / c.z + intrinsics.cy,
        ],
        c.z,
    ))
}

/// World point at camera-space depth `depth` behind `pixel`: the camera
/// vector `depth * B * (x, y, 1)` with `B` the back-projection matrix,
/// carried into the world by the pose.
pub fn unproject(
    pixel: [f64; 2],
    depth: f64,
    intrinsics: &CameraIntrinsics,
    pose: &CameraPose,
) -> Result<Vec3, SceneError> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(SceneError::Domain(format!("depth must be positive, got {depth}")));
    }
    let camera = intrinsics.back_projection() * Vec3::new(pixel[0], pixel[1], 1.0) * depth;
    Ok(pose.camera_to_world(&camera))
}
