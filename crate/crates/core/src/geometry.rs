//! Position and rotation normalization of skeleton frames.
//!
//! A frame is first translated so the spine midpoint `C` sits at the origin,
//! then rotated about the vertical axis so the body plane through `C` and the
//! two shoulders faces the sensor (+Z).

use std::f64::consts::PI;

use crate::error::GeometryError;
use crate::skeleton::{GestureSequence, JointId, SkeletonFrame, Vec3};

/// Facing angles smaller than this are left unrotated. A frame that is
/// already normalized yields a residual angle of a few ulps; skipping it
/// makes a second normalization pass exact.
pub const ANGLE_SNAP: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationConfig {
    /// Threshold on the cross-product and projection norms below which a
    /// frame is treated as degenerate.
    pub epsilon: f64,
    /// Fail on degenerate frames instead of falling back to no rotation.
    pub strict: bool,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        NormalizationConfig {
            epsilon: 1e-9,
            strict: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationReport {
    /// Signed facing angle that was removed, in `(-pi, pi]`.
    pub theta_rad: f64,
    /// Translation that was added to every joint (`-C`).
    pub translation: Vec3,
    /// Set when the rotation fell back to identity.
    pub degenerate: bool,
}

/// Moves the spine joint to the origin. Returns the shifted frame and the
/// translation `-C` that was added.
pub fn translate_to_origin(frame: &SkeletonFrame) -> (SkeletonFrame, Vec3) {
    let translation = -frame.joint(JointId::Spine);
    (frame.map(|p| p + translation), translation)
}

/// Unit normal of the plane through spine and shoulders, oriented as
/// `CR x CL` so a signer facing the sensor gives `+Z`.
pub fn body_plane_normal(
    frame: &SkeletonFrame,
    config: &NormalizationConfig,
) -> Result<Vec3, GeometryError> {
    let c = frame.joint(JointId::Spine);
    let cl = frame.joint(JointId::ShoulderLeft) - c;
    let cr = frame.joint(JointId::ShoulderRight) - c;
    let n = cr.cross(cl);
    let norm = n.norm();
    if !(norm >= config.epsilon) {
        return Err(GeometryError::DegenerateFrame { cross_norm: norm });
    }
    Ok(n.scale(1.0 / norm))
}

/// Signed angle between the normal's XZ projection and +Z, in `(-pi, pi]`.
/// Its magnitude is the arccos of the normalized projection's z component.
pub fn rotation_angle(normal: Vec3, config: &NormalizationConfig) -> Result<f64, GeometryError> {
    let projection_norm = normal.x.hypot(normal.z);
    if !(projection_norm >= config.epsilon) {
        return Err(GeometryError::DegenerateProjection { projection_norm });
    }
    let theta = normal.x.atan2(normal.z);
    Ok(if theta <= -PI { PI } else { theta })
}

/// Rotates every joint about the Y axis:
/// `(x, y, z) -> (x cos a + z sin a, y, -x sin a + z cos a)`.
pub fn rotate_about_y(frame: &SkeletonFrame, alpha: f64) -> SkeletonFrame {
    let (sin, cos) = alpha.sin_cos();
    frame.map(|p| Vec3 {
        x: p.x * cos + p.z * sin,
        y: p.y,
        z: -p.x * sin + p.z * cos,
    })
}

pub fn normalize_frame(
    frame: &SkeletonFrame,
    config: &NormalizationConfig,
) -> Result<(SkeletonFrame, NormalizationReport), GeometryError> {
    let (centered, translation) = translate_to_origin(frame);
    let angle = body_plane_normal(&centered, config).and_then(|n| rotation_angle(n, config));
    let (theta, degenerate) = match angle {
        Ok(theta) if theta.abs() < ANGLE_SNAP => (0.0, false),
        Ok(theta) => (theta, false),
        Err(e) if config.strict => return Err(e),
        Err(_) => (0.0, true),
    };
    let out = if theta == 0.0 {
        centered
    } else {
        // Adding +0 turns -0 into +0, so a second pass reproduces the bits.
        rotate_about_y(&centered, -theta).map(|p| p + Vec3::ZERO)
    };
    Ok((
        out,
        NormalizationReport {
            theta_rad: theta,
            translation,
            degenerate,
        },
    ))
}

/// Normalizes each frame independently; metadata is carried over unchanged.
pub fn normalize_sequence(
    seq: &GestureSequence,
    config: &NormalizationConfig,
) -> Result<(GestureSequence, Vec<NormalizationReport>), GeometryError> {
    let mut frames = Vec::with_capacity(seq.len());
    let mut reports = Vec::with_capacity(seq.len());
    for (i, frame) in seq.frames().iter().enumerate() {
        let (f, r) = normalize_frame(frame, config).map_err(|e| GeometryError::InSequence {
            frame: i,
            source: Box::new(e),
        })?;
        frames.push(f);
        reports.push(r);
    }
    let out = seq
        .with_frames(frames)
        .expect("non-empty input yields non-empty output");
    Ok((out, reports))
}
