//! Synthetic gesture corpus.
//!
//! Mirrors a recording protocol where every signer performs every sign
//! several times, each repetition at a random position and at one of a few
//! scheduled facing angles. Trajectories are parametric arm motions derived
//! from the class index; signers differ by body scale and tempo.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::GenError;
use crate::geometry::{self, NormalizationConfig};
use crate::par::Exec;
use crate::skeleton::{GestureSequence, HandMode, JointId, SkeletonFrame, Vec3, NUM_JOINTS};

/// Single-handed share of the vocabulary: 16 of 30 signs.
const SINGLE_OF_30: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub num_classes: usize,
    pub num_signers: usize,
    pub reps_per_signer: usize,
    pub frames_per_gesture: usize,
    /// Standard deviation of per-coordinate Gaussian joint noise, meters.
    pub noise_sigma: f64,
    /// Translations are uniform in `[-r, r]` on each axis, meters.
    pub translation_range: f64,
    /// Facing angles in degrees; repetitions cycle through them in blocks.
    pub rotation_set: Vec<f64>,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            num_classes: 30,
            num_signers: 10,
            reps_per_signer: 9,
            frames_per_gesture: 45,
            noise_sigma: 0.01,
            translation_range: 0.5,
            rotation_set: vec![0.0, 45.0, 90.0],
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: String| Err(GenError::InvalidConfig(m));
        if self.num_classes < 2 {
            return bad(format!("num_classes = {}; need at least 2", self.num_classes));
        }
        if self.num_signers == 0 || self.reps_per_signer == 0 || self.frames_per_gesture == 0 {
            return bad("signers, reps and frames must all be >= 1".into());
        }
        if self.rotation_set.is_empty() || self.rotation_set.iter().any(|r| !r.is_finite()) {
            return bad("rotation set must be non-empty and finite".into());
        }
        if !self.reps_per_signer.is_multiple_of(self.rotation_set.len()) {
            return bad(format!(
                "reps_per_signer {} not divisible by {} rotations",
                self.reps_per_signer,
                self.rotation_set.len()
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma = {}", self.noise_sigma));
        }
        if !(self.translation_range >= 0.0 && self.translation_range.is_finite()) {
            return bad(format!("translation_range = {}", self.translation_range));
        }
        Ok(())
    }

    /// Number of single-handed classes: the leading 16/30 share, rounded,
    /// keeping at least one class of each kind.
    pub fn num_single(&self) -> usize {
        let n = self.num_classes;
        ((n * SINGLE_OF_30 + 15) / 30).clamp(1, n.saturating_sub(1).max(1))
    }

    pub fn hand_mode(&self, class: usize) -> HandMode {
        if class < self.num_single() {
            HandMode::Single
        } else {
            HandMode::Double
        }
    }

    /// Rotation scheduled for a repetition index.
    pub fn rotation_for(&self, rep: usize) -> f64 {
        let block = self.reps_per_signer / self.rotation_set.len();
        self.rotation_set[rep / block]
    }

    pub fn total(&self) -> usize {
        self.num_classes * self.num_signers * self.reps_per_signer
    }
}

pub fn class_name(class: usize) -> String {
    format!("sign_{class:02}")
}

/// SplitMix64 finalizer used to derive independent stream seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream(parts: &[u64]) -> ChaCha8Rng {
    let seed = parts.iter().fold(0x5eed_u64, |acc, &p| mix(acc ^ mix(p)));
    ChaCha8Rng::seed_from_u64(seed)
}

/// Deterministic per-signer body scale and tempo.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignerStyle {
    /// Multiplies every joint offset from the spine; in `[0.9, 1.1]`.
    pub limb_scale: f64,
    /// Gesture tempo; in `[0.85, 1.15]`.
    pub speed: f64,
}

impl SignerStyle {
    pub fn for_signer(signer: usize) -> SignerStyle {
        let mut rng = stream(&[0x5167_u64, signer as u64]);
        SignerStyle {
            limb_scale: rng.random_range(0.9..=1.1),
            speed: rng.random_range(0.85..=1.15),
        }
    }
}

/// Number of horizontal stroke directions, 45 degrees apart.
pub const HEADINGS: usize = 4;

/// Hand stroke relative to its shoulder, in the signer's body frame. The
/// stroke runs along a horizontal heading and has an independent vertical
/// component; both are sinusoids plus linear drift.
#[derive(Debug, Clone, Copy, PartialEq)]
struct HandPath {
    center: [f64; 3],
    /// Direction of the horizontal stroke, radians from +X towards +Z.
    heading: f64,
    /// Along-heading and vertical components.
    amplitude: [f64; 2],
    frequency: [f64; 2],
    phase: [f64; 2],
    drift: [f64; 2],
}

impl HandPath {
    fn random(rng: &mut ChaCha8Rng, heading: f64) -> HandPath {
        const FREQS: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
        let mut p = HandPath {
            center: [
                rng.random_range(-0.1..0.05),
                rng.random_range(-0.3..0.05),
                rng.random_range(0.25..0.35),
            ],
            heading,
            amplitude: [0.0; 2],
            frequency: [0.0; 2],
            phase: [0.0; 2],
            drift: [0.0; 2],
        };
        for a in 0..2 {
            p.frequency[a] = FREQS[rng.random_range(0..FREQS.len())];
            p.phase[a] = rng.random_range(0.0..TAU);
        }
        p.amplitude = [rng.random_range(0.1..0.18), rng.random_range(0.03..0.1)];
        p.drift = [rng.random_range(-0.15..0.15), rng.random_range(-0.1..0.1)];
        p
    }

    /// Offset from the shoulder at normalized time `u in [0, 1]`. `side` is
    /// +1 for the right hand and -1 for the left (mirrors X).
    fn offset(&self, u: f64, side: f64) -> Vec3 {
        let wave = |a: usize| {
            self.amplitude[a] * (TAU * self.frequency[a] * u + self.phase[a]).sin()
                + self.drift[a] * (u - 0.5)
        };
        let (along, up) = (wave(0), wave(1));
        let (sin, cos) = self.heading.sin_cos();
        Vec3 {
            x: side * (self.center[0] + along * cos),
            y: self.center[1] + up,
            z: self.center[2] + along * sin,
        }
    }
}

/// Class-specific motion: the right hand always moves; the left hand moves
/// only for two-handed classes.
///
/// Classes come in groups of [`HEADINGS`] that share one stroke shape and
/// differ only in its horizontal direction. A facing change of 45 or 90
/// degrees therefore turns one class's hand motion into another's; only the
/// torso orientation tells them apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMotion {
    right: HandPath,
    left: Option<HandPath>,
}

impl ClassMotion {
    pub fn for_class(class: usize, mode: HandMode) -> ClassMotion {
        let heading = (class % HEADINGS) as f64 * std::f64::consts::FRAC_PI_4;
        let mut rng = stream(&[0xc1a5_u64, (class / HEADINGS) as u64]);
        let right = HandPath::random(&mut rng, heading);
        let left = match mode {
            HandMode::Single => None,
            HandMode::Double => Some(HandPath::random(&mut rng, heading)),
        };
        ClassMotion { right, left }
    }
}

fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3 { x, y, z }
}

/// Standing pose facing +Z with the spine at the origin and arms hanging.
/// Spine and shoulders lie in the plane `z = 0`.
pub fn template() -> [Vec3; NUM_JOINTS] {
    use JointId::*;
    let mut j = [Vec3::ZERO; NUM_JOINTS];
    let mut put = |id: JointId, p: Vec3| j[id.index()] = p;
    put(HipCenter, v(0.0, -0.3, 0.0));
    put(Spine, v(0.0, 0.0, 0.0));
    put(ShoulderCenter, v(0.0, 0.45, 0.0));
    put(Head, v(0.0, 0.68, 0.02));
    for (side, s, e, w, h) in [
        (-1.0, ShoulderLeft, ElbowLeft, WristLeft, HandLeft),
        (1.0, ShoulderRight, ElbowRight, WristRight, HandRight),
    ] {
        put(s, v(0.2 * side, 0.45, 0.0));
        put(e, v(0.24 * side, 0.17, 0.02));
        put(w, v(0.26 * side, -0.08, 0.05));
        put(h, v(0.27 * side, -0.15, 0.07));
    }
    for (side, hip, knee, ankle, foot) in [
        (-1.0, HipLeft, KneeLeft, AnkleLeft, FootLeft),
        (1.0, HipRight, KneeRight, AnkleRight, FootRight),
    ] {
        put(hip, v(0.1 * side, -0.35, 0.0));
        put(knee, v(0.11 * side, -0.78, 0.03));
        put(ankle, v(0.11 * side, -1.18, 0.0));
        put(foot, v(0.12 * side, -1.24, 0.09));
    }
    j
}

fn place_arm(joints: &mut [Vec3; NUM_JOINTS], side: f64, hand: Vec3) {
    use JointId::*;
    let (s, e, w, h) = if side > 0.0 {
        (ShoulderRight, ElbowRight, WristRight, HandRight)
    } else {
        (ShoulderLeft, ElbowLeft, WristLeft, HandLeft)
    };
    let shoulder = joints[s.index()];
    let mid = shoulder + (hand - shoulder).scale(0.5);
    let elbow = mid + v(0.07 * side, -0.08, -0.03);
    joints[e.index()] = elbow;
    joints[w.index()] = elbow + (hand - elbow).scale(0.85);
    joints[h.index()] = hand;
}

/// Frames of one gesture in the signer's own body frame, before noise and
/// rigid motion.
pub fn canonical_frames(
    motion: &ClassMotion,
    style: &SignerStyle,
    frames: usize,
) -> Vec<SkeletonFrame> {
    let base = template();
    (0..frames)
        .map(|t| {
            let progress = if frames > 1 {
                t as f64 / (frames - 1) as f64
            } else {
                0.0
            };
            let u = (progress * style.speed).min(1.0);
            let mut j = base;
            let shoulder_r = j[JointId::ShoulderRight.index()];
            place_arm(&mut j, 1.0, shoulder_r + motion.right.offset(u, 1.0));
            if let Some(left) = &motion.left {
                let shoulder_l = j[JointId::ShoulderLeft.index()];
                place_arm(&mut j, -1.0, shoulder_l + left.offset(u, -1.0));
            }
            for p in j.iter_mut() {
                *p = p.scale(style.limb_scale);
            }
            SkeletonFrame::new(j).expect("finite template")
        })
        .collect()
}

/// Identity of one generated sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Slot {
    class: usize,
    signer: usize,
    rep: usize,
}

fn generate_one(config: &GenConfig, slot: Slot) -> GestureSequence {
    let mode = config.hand_mode(slot.class);
    let motion = ClassMotion::for_class(slot.class, mode);
    let style = SignerStyle::for_signer(slot.signer);
    let mut rng = stream(&[config.seed, slot.class as u64, slot.signer as u64, slot.rep as u64]);

    let r = config.translation_range;
    let draw = |rng: &mut ChaCha8Rng| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
    let translation = v(draw(&mut rng), draw(&mut rng), draw(&mut rng));
    let rotation_deg = config.rotation_for(slot.rep);
    let alpha = rotation_deg.to_radians();
    let noise = Normal::new(0.0, config.noise_sigma).expect("sigma validated");

    let frames = canonical_frames(&motion, &style, config.frames_per_gesture)
        .into_iter()
        .map(|f| {
            let noisy = if config.noise_sigma > 0.0 {
                let mut j = *f.joints();
                for p in j.iter_mut() {
                    *p = *p + v(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
                }
                SkeletonFrame::new(j).expect("finite noise")
            } else {
                f
            };
            let rotated = geometry::rotate_about_y(&noisy, alpha);
            SkeletonFrame::new(rotated.joints().map(|p| p + translation)).expect("finite motion")
        })
        .collect();

    GestureSequence::new(
        frames,
        slot.class as u32,
        class_name(slot.class),
        slot.signer as u32,
        slot.rep as u32,
        mode,
        rotation_deg,
    )
    .expect("frames_per_gesture >= 1")
}

/// Generates the full corpus in `(class, signer, rep)` order.
pub fn generate_dataset(config: &GenConfig) -> Result<Vec<GestureSequence>, GenError> {
    generate_dataset_with(config, Exec::default())
}

pub fn generate_dataset_with(
    config: &GenConfig,
    exec: Exec,
) -> Result<Vec<GestureSequence>, GenError> {
    config.validate()?;
    let mut slots = Vec::with_capacity(config.total());
    for class in 0..config.num_classes {
        for signer in 0..config.num_signers {
            for rep in 0..config.reps_per_signer {
                slots.push(Slot { class, signer, rep });
            }
        }
    }
    Ok(exec.map(&slots, |&slot| generate_one(config, slot)))
}

/// Frames used when comparing trajectories of different lengths.
const RESAMPLE_FRAMES: usize = 32;

/// Linear-in-time resampling of the normalized, flattened trajectory.
fn trajectory_vector(seq: &GestureSequence) -> Vec<f64> {
    let (norm, _) = geometry::normalize_sequence(seq, &NormalizationConfig::default())
        .expect("lenient normalization never fails");
    let rows: Vec<[f64; 60]> = norm.frames().iter().map(crate::skeleton::flatten_frame).collect();
    let n = rows.len();
    let mut out = Vec::with_capacity(RESAMPLE_FRAMES * 60);
    for k in 0..RESAMPLE_FRAMES {
        let pos = if n > 1 {
            k as f64 * (n - 1) as f64 / (RESAMPLE_FRAMES - 1) as f64
        } else {
            0.0
        };
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let w = pos - lo as f64;
        out.extend(rows[lo].iter().zip(&rows[hi]).map(|(a, b)| a * (1.0 - w) + b * w));
    }
    out
}

/// Ratio of root-mean-square inter-class to intra-class distance between
/// normalized, time-resampled trajectories. Values well above 1 mean the
/// classes are separable; 1 means class identity carries no signal.
///
/// Uses the identity `mean |a - b|^2 = E|a|^2 + E|b|^2 - 2 mu_a . mu_b` over
/// independent pairs, so the cost is linear in the dataset size.
pub fn class_separability_check(dataset: &[GestureSequence]) -> Result<f64, GenError> {
    let mut classes: Vec<u32> = dataset.iter().map(|s| s.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(GenError::InvalidConfig(format!(
            "separability needs at least 2 classes, found {}",
            classes.len()
        )));
    }
    let vectors: Vec<Vec<f64>> = Exec::default().map(dataset, trajectory_vector);
    let dim = vectors[0].len();

    struct Stats {
        n: usize,
        sum: Vec<f64>,
        sq: f64,
    }
    let mut stats: Vec<Stats> = classes
        .iter()
        .map(|_| Stats {
            n: 0,
            sum: vec![0.0; dim],
            sq: 0.0,
        })
        .collect();
    for (seq, vec) in dataset.iter().zip(&vectors) {
        let k = classes.binary_search(&seq.class_id).expect("class listed");
        let s = &mut stats[k];
        s.n += 1;
        for (a, b) in s.sum.iter_mut().zip(vec) {
            *a += b;
        }
        s.sq += vec.iter().map(|x| x * x).sum::<f64>();
    }

    // Intra: distinct pairs within a class. Inter: all cross-class pairs.
    let (mut intra_sum, mut intra_pairs) = (0.0, 0.0);
    for s in &stats {
        if s.n < 2 {
            continue;
        }
        let n = s.n as f64;
        let sum_norm_sq = s.sum.iter().map(|x| x * x).sum::<f64>();
        // sum over ordered pairs i != j of |a_i - a_j|^2 = 2 n sq - 2 |sum|^2
        intra_sum += 2.0 * n * s.sq - 2.0 * sum_norm_sq;
        intra_pairs += n * (n - 1.0);
    }
    let (mut inter_sum, mut inter_pairs) = (0.0, 0.0);
    for (i, a) in stats.iter().enumerate() {
        for b in &stats[i + 1..] {
            let (na, nb) = (a.n as f64, b.n as f64);
            let cross: f64 = a.sum.iter().zip(&b.sum).map(|(x, y)| x * y).sum();
            inter_sum += 2.0 * (nb * a.sq + na * b.sq - 2.0 * cross);
            inter_pairs += 2.0 * na * nb;
        }
    }
    if intra_pairs == 0.0 {
        return Err(GenError::InvalidConfig(
            "separability needs a class with at least 2 sequences".into(),
        ));
    }
    let intra = (intra_sum / intra_pairs).max(0.0).sqrt();
    let inter = (inter_sum / inter_pairs).max(0.0).sqrt();
    Ok(inter / intra)
}
