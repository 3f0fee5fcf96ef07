//! Skeleton data model: 20 Kinect v1 joints per frame, frames grouped into
//! labelled gesture sequences.

use std::fmt;
use std::ops::{Add, Neg, Sub};

use crate::error::SkeletonError;

/// Number of tracked joints per frame.
pub const NUM_JOINTS: usize = 20;

/// Width of a flattened frame (x, y, z per joint).
pub const FEATURE_WIDTH: usize = NUM_JOINTS * 3;

/// Kinect v1 joint enumeration. Discriminants are the stable array indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum JointId {
    HipCenter = 0,
    Spine = 1,
    ShoulderCenter = 2,
    Head = 3,
    ShoulderLeft = 4,
    ElbowLeft = 5,
    WristLeft = 6,
    HandLeft = 7,
    ShoulderRight = 8,
    ElbowRight = 9,
    WristRight = 10,
    HandRight = 11,
    HipLeft = 12,
    KneeLeft = 13,
    AnkleLeft = 14,
    FootLeft = 15,
    HipRight = 16,
    KneeRight = 17,
    AnkleRight = 18,
    FootRight = 19,
}

impl JointId {
    pub const ALL: [JointId; NUM_JOINTS] = [
        JointId::HipCenter,
        JointId::Spine,
        JointId::ShoulderCenter,
        JointId::Head,
        JointId::ShoulderLeft,
        JointId::ElbowLeft,
        JointId::WristLeft,
        JointId::HandLeft,
        JointId::ShoulderRight,
        JointId::ElbowRight,
        JointId::WristRight,
        JointId::HandRight,
        JointId::HipLeft,
        JointId::KneeLeft,
        JointId::AnkleLeft,
        JointId::FootLeft,
        JointId::HipRight,
        JointId::KneeRight,
        JointId::AnkleRight,
        JointId::FootRight,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<JointId> {
        Self::ALL.get(index).copied()
    }
}

/// A point or direction in sensor space, meters. X right, Y up, Z toward the
/// sensor from the signer.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 {
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    /// Checked constructor; rejects NaN and infinities.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Vec3, SkeletonError> {
        let v = Vec3 { x, y, z };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SkeletonError::NonFinite)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3 {
            x: self.x * s,
            y: self.y * s,
            z: self.z * s,
        }
    }

    pub fn distance(self, other: Vec3) -> f64 {
        (self - other).norm()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3 {
            x: self.x + o.x,
            y: self.y + o.y,
            z: self.z + o.z,
        }
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3 {
            x: self.x - o.x,
            y: self.y - o.y,
            z: self.z - o.z,
        }
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3 {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// One timestep: 20 joint positions indexed by [`JointId`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonFrame {
    joints: [Vec3; NUM_JOINTS],
}

impl SkeletonFrame {
    pub fn new(joints: [Vec3; NUM_JOINTS]) -> Result<SkeletonFrame, SkeletonError> {
        if joints.iter().all(Vec3::is_finite) {
            Ok(SkeletonFrame { joints })
        } else {
            Err(SkeletonError::NonFinite)
        }
    }

    /// Builds a frame from a 60-wide coordinate row in joint order.
    pub fn from_flat(values: &[f64]) -> Result<SkeletonFrame, SkeletonError> {
        if values.len() != FEATURE_WIDTH {
            return Err(SkeletonError::WrongWidth(values.len()));
        }
        let mut joints = [Vec3::ZERO; NUM_JOINTS];
        for (joint, xyz) in joints.iter_mut().zip(values.chunks_exact(3)) {
            *joint = Vec3 {
                x: xyz[0],
                y: xyz[1],
                z: xyz[2],
            };
        }
        SkeletonFrame::new(joints)
    }

    pub fn joint(&self, id: JointId) -> Vec3 {
        self.joints[id.index()]
    }

    pub fn joints(&self) -> &[Vec3; NUM_JOINTS] {
        &self.joints
    }

    /// Applies `f` to every joint. The result must stay finite.
    pub(crate) fn map(&self, f: impl Fn(Vec3) -> Vec3) -> SkeletonFrame {
        let mut joints = self.joints;
        for j in joints.iter_mut() {
            *j = f(*j);
        }
        debug_assert!(joints.iter().all(Vec3::is_finite));
        SkeletonFrame { joints }
    }
}

/// 60 reals, `(x, y, z)` of joint `k` at `3k..3k+3`.
pub fn flatten_frame(frame: &SkeletonFrame) -> [f64; FEATURE_WIDTH] {
    let mut out = [0.0; FEATURE_WIDTH];
    for (dst, j) in out.chunks_exact_mut(3).zip(frame.joints.iter()) {
        dst[0] = j.x;
        dst[1] = j.y;
        dst[2] = j.z;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HandMode {
    Single,
    Double,
}

impl HandMode {
    pub fn as_str(self) -> &'static str {
        match self {
            HandMode::Single => "single",
            HandMode::Double => "double",
        }
    }

    pub fn parse(s: &str) -> Option<HandMode> {
        match s {
            "single" => Some(HandMode::Single),
            "double" => Some(HandMode::Double),
            _ => None,
        }
    }
}

/// A recorded gesture with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureSequence {
    frames: Vec<SkeletonFrame>,
    pub class_id: u32,
    pub class_name: String,
    pub signer_id: u32,
    pub repetition: u32,
    pub hand_mode: HandMode,
    /// Rotation applied at generation time, degrees. Informational only.
    pub rotation_deg: f64,
}

impl GestureSequence {
    pub fn new(
        frames: Vec<SkeletonFrame>,
        class_id: u32,
        class_name: impl Into<String>,
        signer_id: u32,
        repetition: u32,
        hand_mode: HandMode,
        rotation_deg: f64,
    ) -> Result<GestureSequence, SkeletonError> {
        if frames.is_empty() {
            return Err(SkeletonError::EmptySequence);
        }
        Ok(GestureSequence {
            frames,
            class_id,
            class_name: class_name.into(),
            signer_id,
            repetition,
            hand_mode,
            rotation_deg,
        })
    }

    pub fn frames(&self) -> &[SkeletonFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Same metadata, different frames (same count is not required).
    pub fn with_frames(&self, frames: Vec<SkeletonFrame>) -> Result<GestureSequence, SkeletonError> {
        if frames.is_empty() {
            return Err(SkeletonError::EmptySequence);
        }
        Ok(GestureSequence {
            frames,
            ..self.clone()
        })
    }
}

/// Row-major `T x 60` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    /// Wraps raw rows of arbitrary width `cols`.
    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> FeatureMatrix {
        assert_eq!(rows * cols, data.len());
        assert!(rows > 0 && cols > 0);
        FeatureMatrix { rows, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.data.len() / self.rows
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let c = self.cols();
        &self.data[t * c..(t + 1) * c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

pub fn sequence_to_features(seq: &GestureSequence) -> FeatureMatrix {
    let mut data = Vec::with_capacity(seq.len() * FEATURE_WIDTH);
    for frame in seq.frames() {
        data.extend_from_slice(&flatten_frame(frame));
    }
    FeatureMatrix {
        rows: seq.len(),
        data,
    }
}
