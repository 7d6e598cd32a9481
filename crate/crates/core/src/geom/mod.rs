//! Scene and skeleton geometry: distance maps, contact maps, contact-point
//! extraction, spatial indexing, and scene-point sampling.
//!
//! All values are meters. Distances are computed in double precision so
//! contact values stay stable near the extraction threshold.

pub mod spatial;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::Array;
use crate::error::{Error, Result};
pub use spatial::SpatialIndex;

/// Static environment: N 3-D points.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneCloud {
    points: Vec<[f64; 3]>,
}

impl SceneCloud {
    pub fn new(points: Vec<[f64; 3]>) -> Result<SceneCloud> {
        if points.is_empty() {
            return Err(Error::InvalidInput("scene cloud must contain at least one point".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "scene point {i} has non-finite coordinates {p:?}"
                )));
            }
        }
        Ok(SceneCloud { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    /// Per-axis (min, max) bounds.
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }
}

/// One skeleton configuration: J global joint positions.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    joints: Vec<[f64; 3]>,
    root_index: usize,
}

impl Pose {
    pub fn new(joints: Vec<[f64; 3]>, root_index: usize) -> Result<Pose> {
        if joints.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "pose needs at least 2 joints, got {}",
                joints.len()
            )));
        }
        if root_index >= joints.len() {
            return Err(Error::InvalidInput(format!(
                "root index {} out of range for {} joints",
                root_index,
                joints.len()
            )));
        }
        for (i, p) in joints.iter().enumerate() {
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "joint {i} has non-finite coordinates {p:?}"
                )));
            }
        }
        Ok(Pose { joints, root_index })
    }

    pub fn num_joints(&self) -> usize {
        self.joints.len()
    }

    pub fn joints(&self) -> &[[f64; 3]] {
        &self.joints
    }

    pub fn root_index(&self) -> usize {
        self.root_index
    }

    pub fn root(&self) -> [f64; 3] {
        self.joints[self.root_index]
    }
}

/// F frames x J joints x 3 global coordinates plus frame rate.
#[derive(Clone, Debug, PartialEq)]
pub struct MotionSequence {
    joints_per_frame: usize,
    fps: f64,
    root_index: usize,
    data: Vec<[f64; 3]>,
}

impl MotionSequence {
    pub fn new(
        frames: Vec<Vec<[f64; 3]>>,
        fps: f64,
        root_index: usize,
    ) -> Result<MotionSequence> {
        if frames.is_empty() {
            return Err(Error::InvalidInput("motion needs at least one frame".into()));
        }
        if fps <= 0.0 || !fps.is_finite() {
            return Err(Error::InvalidParameter(format!("fps {fps} must be positive")));
        }
        let j = frames[0].len();
        if j < 2 || root_index >= j {
            return Err(Error::InvalidInput(format!(
                "invalid joint count {j} or root index {root_index}"
            )));
        }
        let mut data = Vec::with_capacity(frames.len() * j);
        for (f, frame) in frames.iter().enumerate() {
            if frame.len() != j {
                return Err(Error::InvalidInput(format!(
                    "frame {f} has {} joints, expected {j}",
                    frame.len()
                )));
            }
            for (jj, p) in frame.iter().enumerate() {
                if !p.iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "frame {f} joint {jj} has non-finite coordinates"
                    )));
                }
            }
            data.extend_from_slice(frame);
        }
        Ok(MotionSequence {
            joints_per_frame: j,
            fps,
            root_index,
            data,
        })
    }

    pub fn num_frames(&self) -> usize {
        self.data.len() / self.joints_per_frame
    }

    pub fn num_joints(&self) -> usize {
        self.joints_per_frame
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn root_index(&self) -> usize {
        self.root_index
    }

    pub fn frame(&self, f: usize) -> &[[f64; 3]] {
        let j = self.joints_per_frame;
        &self.data[f * j..(f + 1) * j]
    }

    pub fn pose(&self, f: usize) -> Pose {
        Pose {
            joints: self.frame(f).to_vec(),
            root_index: self.root_index,
        }
    }

    pub fn root_at(&self, f: usize) -> [f64; 3] {
        self.frame(f)[self.root_index]
    }

    /// Frames `[start, start+len)` as a new sequence.
    pub fn window(&self, start: usize, len: usize) -> Result<MotionSequence> {
        if start + len > self.num_frames() || len == 0 {
            return Err(Error::InvalidInput(format!(
                "window [{start}, {}) out of range for {} frames",
                start + len,
                self.num_frames()
            )));
        }
        let j = self.joints_per_frame;
        Ok(MotionSequence {
            joints_per_frame: j,
            fps: self.fps,
            root_index: self.root_index,
            data: self.data[start * j..(start + len) * j].to_vec(),
        })
    }

    /// `[F, J*3]` layout used as network input.
    pub fn flattened(&self) -> Array {
        let mut data = Vec::with_capacity(self.data.len() * 3);
        for p in &self.data {
            data.extend_from_slice(p);
        }
        Array::from_vec(&[self.num_frames(), self.joints_per_frame * 3], data).expect("shape")
    }

    /// Root positions as `[F, 3]`.
    pub fn roots(&self) -> Array {
        let f = self.num_frames();
        let mut data = Vec::with_capacity(f * 3);
        for i in 0..f {
            data.extend_from_slice(&self.root_at(i));
        }
        Array::from_vec(&[f, 3], data).expect("shape")
    }

    /// Non-root joints relative to the root, `[F, J-1, 3]`, original joint
    /// order with the root skipped.
    pub fn local_poses(&self) -> Array {
        let f = self.num_frames();
        let j = self.joints_per_frame;
        let mut data = Vec::with_capacity(f * (j - 1) * 3);
        for fi in 0..f {
            let root = self.root_at(fi);
            for (ji, p) in self.frame(fi).iter().enumerate() {
                if ji == self.root_index {
                    continue;
                }
                data.extend_from_slice(&[p[0] - root[0], p[1] - root[1], p[2] - root[2]]);
            }
        }
        Array::from_vec(&[f, j - 1, 3], data).expect("shape")
    }
}

/// J x N map of joint-to-scene-point distances for one pose.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMap {
    values: Array,
}

impl DistanceMap {
    pub fn values(&self) -> &Array {
        &self.values
    }

    pub fn at(&self, joint: usize, point: usize) -> f64 {
        self.values.at(&[joint, point])
    }
}

/// F x J x N Gaussian-normalized proximity, values in (0, 1].
///
/// Entries underflow to exactly 0 once d exceeds ~38.6 sigma (the f64
/// exponent floor); with the default 2.5 m sampling radius and sigma 0.2
/// every stored value stays strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactMap {
    values: Array,
    sigma: f64,
}

impl ContactMap {
    pub fn values(&self) -> &Array {
        &self.values
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn num_frames(&self) -> usize {
        self.values.shape()[0]
    }

    /// One frame as a `[J, N]` array.
    pub fn frame(&self, f: usize) -> Array {
        let s = self.values.shape();
        self.values
            .slice(0, f, 1)
            .and_then(|a| a.reshape(&[s[1], s[2]]))
            .expect("frame slice")
    }

    /// Frames `[start, start+len)` as a new map.
    pub fn window(&self, start: usize, len: usize) -> Result<ContactMap> {
        Ok(ContactMap {
            values: self.values.slice(0, start, len)?,
            sigma: self.sigma,
        })
    }
}

/// T x J x 4 contact points: columns 1-3 coordinates, column 4 in {0,1}.
#[derive(Clone, Debug, PartialEq)]
pub struct ContactPointSet {
    entries: Array,
}

impl ContactPointSet {
    pub fn new(entries: Array) -> Result<ContactPointSet> {
        if entries.rank() != 3 || entries.shape()[2] != 4 {
            return Err(Error::InvalidInput(format!(
                "contact point set must be [T, J, 4], got {:?}",
                entries.shape()
            )));
        }
        let s = entries.shape().to_vec();
        for t in 0..s[0] {
            for j in 0..s[1] {
                let flag = entries.at(&[t, j, 3]);
                if flag != 0.0 && flag != 1.0 {
                    return Err(Error::InvalidInput(format!(
                        "contact indicator at ({t},{j}) is {flag}, expected 0 or 1"
                    )));
                }
                if flag == 0.0 {
                    for c in 0..3 {
                        if entries.at(&[t, j, c]) != 0.0 {
                            return Err(Error::InvalidInput(format!(
                                "non-contact entry at ({t},{j}) has nonzero coordinates"
                            )));
                        }
                    }
                }
            }
        }
        Ok(ContactPointSet { entries })
    }

    pub fn zeros(frames: usize, joints: usize) -> ContactPointSet {
        ContactPointSet {
            entries: Array::zeros(&[frames, joints, 4]),
        }
    }

    pub fn entries(&self) -> &Array {
        &self.entries
    }

    pub fn num_frames(&self) -> usize {
        self.entries.shape()[0]
    }

    pub fn num_joints(&self) -> usize {
        self.entries.shape()[1]
    }
}

/// Pairwise joint-to-point distances (Euclidean).
pub fn distance_map(pose: &Pose, scene: &SceneCloud) -> Result<DistanceMap> {
    let j = pose.num_joints();
    let n = scene.len();
    let mut data = Vec::with_capacity(j * n);
    for joint in pose.joints() {
        for point in scene.points() {
            data.push(spatial::dist2(joint, point).sqrt());
        }
    }
    Ok(DistanceMap {
        values: Array::from_vec(&[j, n], data)?,
    })
}

/// Gaussian normalization `exp(-d^2 / (2 sigma^2))` of a distance map.
pub fn normalize_to_contact(distances: &DistanceMap, sigma: f64) -> Result<Array> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "sigma {sigma} must be positive"
        )));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    Ok(distances.values.map(|d| (-d * d * inv).exp()))
}

/// Per-frame contact maps of a motion against a scene, `[F, J, N]`.
pub fn contact_sequence(
    motion: &MotionSequence,
    scene: &SceneCloud,
    sigma: f64,
) -> Result<ContactMap> {
    let f = motion.num_frames();
    let j = motion.num_joints();
    let n = scene.len();
    let mut data = Vec::with_capacity(f * j * n);
    for fi in 0..f {
        let pose = motion.pose(fi);
        let frame = normalize_to_contact(&distance_map(&pose, scene)?, sigma)?;
        data.extend_from_slice(frame.data());
    }
    Ok(ContactMap {
        values: Array::from_vec(&[f, j, n], data)?,
        sigma,
    })
}

/// For each joint of a `[J, N]` contact frame, the argmax scene point (ties:
/// lowest index) if its value exceeds `epsilon`, else an all-zero row.
/// Returns `[J, 4]`.
pub fn extract_contact_points(
    frame_map: &Array,
    scene: &SceneCloud,
    epsilon: f64,
) -> Result<Array> {
    if epsilon <= 0.0 || epsilon >= 1.0 {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} outside (0, 1)"
        )));
    }
    if frame_map.rank() != 2 || frame_map.shape()[1] != scene.len() {
        return Err(Error::shape(
            "extract_contact_points",
            frame_map.shape(),
            &[frame_map.shape().first().copied().unwrap_or(0), scene.len()],
        ));
    }
    let j = frame_map.shape()[0];
    let n = scene.len();
    let mut out = Array::zeros(&[j, 4]);
    for ji in 0..j {
        let row = &frame_map.data()[ji * n..(ji + 1) * n];
        let mut best = 0usize;
        for (i, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = i;
            }
        }
        if row[best] > epsilon {
            let p = scene.points()[best];
            out.set(&[ji, 0], p[0]);
            out.set(&[ji, 1], p[1]);
            out.set(&[ji, 2], p[2]);
            out.set(&[ji, 3], 1.0);
        }
    }
    Ok(out)
}

/// Contact points for a range of frames of a (possibly predicted) map
/// volume `[F, J, N]`.
pub fn extract_contact_points_range(
    maps: &Array,
    scene: &SceneCloud,
    epsilon: f64,
    start: usize,
    len: usize,
) -> Result<ContactPointSet> {
    if maps.rank() != 3 {
        return Err(Error::InvalidInput(format!(
            "expected [F, J, N] maps, got {:?}",
            maps.shape()
        )));
    }
    let (j, n) = (maps.shape()[1], maps.shape()[2]);
    let mut frames = Vec::with_capacity(len);
    for f in start..start + len {
        let frame = maps.slice(0, f, 1)?.reshape(&[j, n])?;
        frames.push(extract_contact_points(&frame, scene, epsilon)?);
    }
    let refs: Vec<&Array> = frames.iter().collect();
    let stacked = Array::concat(&refs, 0)?.reshape(&[len, j, 4])?;
    ContactPointSet::new(stacked)
}

pub fn build_spatial_index(scene: &SceneCloud) -> SpatialIndex {
    SpatialIndex::build(scene)
}

/// Uniformly sample up to `count` scene points within `radius` of `anchor`,
/// without replacement, deterministically under `seed`. Candidate order is
/// ascending point index; when all candidates fit they are returned as-is.
pub fn sample_scene_points(
    scene: &SceneCloud,
    anchor: &[f64; 3],
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<SceneCloud> {
    if radius <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "radius {radius} must be positive"
        )));
    }
    if count < 1 {
        return Err(Error::InvalidParameter("count must be at least 1".into()));
    }
    let r2 = radius * radius;
    let mut candidates: Vec<usize> = scene
        .points()
        .iter()
        .enumerate()
        .filter(|(_, p)| spatial::dist2(anchor, p) <= r2)
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return Err(Error::EmptyRegion(format!(
            "no scene point within {radius} m of {anchor:?}"
        )));
    }
    if candidates.len() > count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..count {
            let j = rng.random_range(i..candidates.len());
            candidates.swap(i, j);
        }
        candidates.truncate(count);
    }
    let points = candidates.iter().map(|&i| scene.points()[i]).collect();
    SceneCloud::new(points)
}
