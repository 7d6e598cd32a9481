//! Temporal track refinement: two-stage energy minimization that first fits
//! smooth global orientations/translations, then pose parameters, against
//! per-frame observed point clouds.

pub mod body;
pub mod chamfer;
pub mod energy;
pub mod rot6d;

use std::collections::BTreeMap;

use crate::autodiff::{adam_step, AdamState, Array, BoundParams, Params, Tape};
use crate::error::{Error, Result};
pub use body::{BodyModel, SphereSkeleton};
pub use chamfer::chamfer;
pub use energy::{energy_pcd_global, energy_smooth_global, energy_smooth_pose};
pub use rot6d::rot6d_to_matrix;

/// Per-frame global rotation (6-D representation) and translation.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalTrack {
    /// `[P, 6]`
    pub rot6d: Array,
    /// `[P, 3]`, meters
    pub trans: Array,
}

impl GlobalTrack {
    pub fn new(rot6d: Array, trans: Array) -> Result<GlobalTrack> {
        if rot6d.rank() != 2 || rot6d.shape()[1] != 6 {
            return Err(Error::InvalidInput(format!(
                "rotation track must be [P, 6], got {:?}",
                rot6d.shape()
            )));
        }
        if trans.rank() != 2 || trans.shape()[1] != 3 || trans.shape()[0] != rot6d.shape()[0] {
            return Err(Error::shape("global_track", rot6d.shape(), trans.shape()));
        }
        let track = GlobalTrack { rot6d, trans };
        for f in 0..track.len() {
            rot6d_to_matrix(&track.rot_at(f))?;
        }
        Ok(track)
    }

    pub fn len(&self) -> usize {
        self.rot6d.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rot_at(&self, frame: usize) -> [f64; 6] {
        std::array::from_fn(|i| self.rot6d.at(&[frame, i]))
    }

    pub fn trans_at(&self, frame: usize) -> [f64; 3] {
        std::array::from_fn(|i| self.trans.at(&[frame, i]))
    }
}

/// Per-frame pose parameters, `[P, D]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseTrack {
    pub theta: Array,
}

impl PoseTrack {
    pub fn new(theta: Array) -> Result<PoseTrack> {
        if theta.rank() != 2 {
            return Err(Error::InvalidInput(format!(
                "pose track must be [P, D], got {:?}",
                theta.shape()
            )));
        }
        if !theta.all_finite() {
            return Err(Error::InvalidInput("pose track has non-finite entries".into()));
        }
        Ok(PoseTrack { theta })
    }

    pub fn len(&self) -> usize {
        self.theta.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dof(&self) -> usize {
        self.theta.shape()[1]
    }

    /// One frame as `[1, D]`.
    pub fn frame(&self, f: usize) -> Result<Array> {
        self.theta.slice(0, f, 1)
    }
}

/// Per-frame observed point clouds (variable point counts).
#[derive(Clone, Debug)]
pub struct ObservationSet {
    pub frames: Vec<Array>,
}

impl ObservationSet {
    pub fn new(frames: Vec<Array>) -> Result<ObservationSet> {
        if frames.is_empty() {
            return Err(Error::InvalidInput("observation set has no frames".into()));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.rank() != 2 || f.shape()[1] != 3 || f.shape()[0] == 0 {
                return Err(Error::InvalidInput(format!(
                    "observation frame {i} must be a non-empty [N, 3] array, got {:?}",
                    f.shape()
                )));
            }
        }
        Ok(ObservationSet { frames })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, f: usize) -> Vec<[f64; 3]> {
        self.frames[f]
            .data()
            .chunks_exact(3)
            .map(|c| [c[0], c[1], c[2]])
            .collect()
    }
}

/// One optimizer iteration of a refinement stage.
#[derive(Clone, Copy, Debug)]
pub struct EnergyRecord {
    pub iteration: usize,
    pub data_term: f64,
    pub smoothness: f64,
    pub total: f64,
}

const SMOOTHNESS_WEIGHT: f64 = 0.1;

/// Stage 1: minimize E_pcd + 0.1 E_smooth over rotations and translations,
/// poses frozen. Returns the best-energy iterate and the energy trace.
pub fn refine_global(
    track: &GlobalTrack,
    poses: &PoseTrack,
    beta: &Array,
    body: &dyn BodyModel,
    observations: &ObservationSet,
    iterations: usize,
    lr: f64,
) -> Result<(GlobalTrack, Vec<EnergyRecord>)> {
    let p = track.len();
    if poses.len() != p || observations.len() != p {
        return Err(Error::InvalidInput(format!(
            "frame counts disagree: track {p}, poses {}, observations {}",
            poses.len(),
            observations.len()
        )));
    }
    let mut frame_vertices = Vec::with_capacity(p);
    for f in 0..p {
        frame_vertices.push(body.vertices(&poses.frame(f)?, beta)?);
    }

    let mut params = Params::new();
    params.insert("rot", track.rot6d.clone());
    params.insert("trans", track.trans.clone());
    let mut adam = AdamState::new(lr);
    let mut best: Option<(f64, Params)> = None;
    let mut trace = Vec::with_capacity(iterations);
    for it in 0..iterations {
        let tape = Tape::new();
        let bound = BoundParams::bind(&tape, &params);
        let rot = bound.get("rot");
        let trans = bound.get("trans");
        let data = energy::energy_pcd_global_tape(&tape, rot, trans, &frame_vertices, observations)?;
        let smooth = energy::energy_smooth_global_tape(rot, trans)?;
        let total = data.add(&smooth.scale(SMOOTHNESS_WEIGHT))?;
        total.backward()?;
        let (dv, sv, tv) = (data.value().item(), smooth.value().item(), total.value().item());
        trace.push(EnergyRecord {
            iteration: it,
            data_term: dv,
            smoothness: sv,
            total: tv,
        });
        if best.as_ref().map_or(true, |(b, _)| tv < *b) {
            best = Some((tv, params.clone()));
        }
        adam_step(&mut params, &bound.grads(), &mut adam);
    }
    let refined = match best {
        Some((_, p)) => p,
        None => params,
    };
    Ok((
        GlobalTrack::new(refined.get("rot").clone(), refined.get("trans").clone())?,
        trace,
    ))
}

/// Stage 2: minimize E_pcd + 0.1 E_smooth over pose parameters, with the
/// refined rotations/translations frozen.
pub fn refine_pose(
    poses: &PoseTrack,
    refined_track: &GlobalTrack,
    beta: &Array,
    body: &dyn BodyModel,
    observations: &ObservationSet,
    iterations: usize,
    lr: f64,
) -> Result<(PoseTrack, Vec<EnergyRecord>)> {
    let p = poses.len();
    if refined_track.len() != p || observations.len() != p {
        return Err(Error::InvalidInput(format!(
            "frame counts disagree: poses {p}, track {}, observations {}",
            refined_track.len(),
            observations.len()
        )));
    }
    let mut params = Params::new();
    params.insert("theta", poses.theta.clone());
    let mut adam = AdamState::new(lr);
    let mut best: Option<(f64, Params)> = None;
    let mut trace = Vec::with_capacity(iterations);
    for it in 0..iterations {
        let tape = Tape::new();
        let bound = BoundParams::bind(&tape, &params);
        let theta = bound.get("theta");
        let data =
            energy::energy_pcd_pose_tape(&tape, theta, refined_track, beta, body, observations)?;
        let smooth = energy::energy_smooth_pose_tape(theta)?;
        let total = data.add(&smooth.scale(SMOOTHNESS_WEIGHT))?;
        total.backward()?;
        let (dv, sv, tv) = (data.value().item(), smooth.value().item(), total.value().item());
        trace.push(EnergyRecord {
            iteration: it,
            data_term: dv,
            smoothness: sv,
            total: tv,
        });
        if best.as_ref().map_or(true, |(b, _)| tv < *b) {
            best = Some((tv, params.clone()));
        }
        let grads: BTreeMap<String, Array> = bound.grads();
        adam_step(&mut params, &grads, &mut adam);
    }
    let refined = match best {
        Some((_, p)) => p,
        None => params,
    };
    Ok((PoseTrack::new(refined.get("theta").clone())?, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn smooth_demo(p: usize) -> (GlobalTrack, PoseTrack, Array, SphereSkeleton) {
        let body = SphereSkeleton::default_humanoid();
        let k = body.num_joints();
        let beta = Array::full(&[k], 1.0);
        let mut rot = Array::zeros(&[p, 6]);
        let mut trans = Array::zeros(&[p, 3]);
        let mut theta = Array::zeros(&[p, 3 * k]);
        for f in 0..p {
            let t = f as f64 / p as f64;
            let yaw = 0.3 * t;
            rot.set(&[f, 0], yaw.cos());
            rot.set(&[f, 1], yaw.sin());
            rot.set(&[f, 4], 1.0);
            trans.set(&[f, 0], t);
            trans.set(&[f, 2], 0.9 + 0.02 * (6.28 * t).sin());
            theta.set(&[f, 11 * 3 + 1], 0.5 * (6.28 * t).sin());
            theta.set(&[f, 14 * 3 + 1], -0.5 * (6.28 * t).sin());
        }
        (
            GlobalTrack::new(rot, trans).unwrap(),
            PoseTrack::new(theta).unwrap(),
            beta,
            body,
        )
    }

    fn observe(
        track: &GlobalTrack,
        poses: &PoseTrack,
        beta: &Array,
        body: &SphereSkeleton,
    ) -> ObservationSet {
        let mut frames = Vec::new();
        for f in 0..track.len() {
            let verts = body.vertices(&poses.frame(f).unwrap(), beta).unwrap();
            let rot = rot6d_to_matrix(&track.rot_at(f)).unwrap();
            let t = track.trans_at(f);
            let mut data = Vec::with_capacity(verts.len());
            for v in verts.data().chunks_exact(3) {
                for i in 0..3 {
                    data.push(v[0] * rot[i][0] + v[1] * rot[i][1] + v[2] * rot[i][2] + t[i]);
                }
            }
            frames.push(Array::from_vec(&[verts.shape()[0], 3], data).unwrap());
        }
        ObservationSet::new(frames).unwrap()
    }

    #[test]
    fn already_optimal_input_stays_put() {
        // constant track, perfect fit: both energy terms are zero, so the
        // gradient vanishes and the start is the recorded best
        let body = SphereSkeleton::default_humanoid();
        let k = body.num_joints();
        let beta = Array::full(&[k], 1.0);
        let p = 4;
        let mut rot = Array::zeros(&[p, 6]);
        for f in 0..p {
            rot.set(&[f, 0], 1.0);
            rot.set(&[f, 4], 1.0);
        }
        let track = GlobalTrack::new(rot, Array::full(&[p, 3], 0.5)).unwrap();
        let poses = PoseTrack::new(Array::zeros(&[p, 3 * k])).unwrap();
        let obs = observe(&track, &poses, &beta, &body);
        let (refined, trace) =
            refine_global(&track, &poses, &beta, &body, &obs, 30, 0.01).unwrap();
        assert!(refined.rot6d.max_abs_diff(&track.rot6d) < 1e-6);
        assert!(refined.trans.max_abs_diff(&track.trans) < 1e-6);
        assert!(trace[0].total < 1e-12);
    }

    #[test]
    fn noisy_translations_recover() {
        let (track, poses, beta, body) = smooth_demo(6);
        let obs = observe(&track, &poses, &beta, &body);
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let noise = Normal::new(0.0, 0.02).unwrap();
        let mut noisy = track.clone();
        for v in noisy.trans.data_mut() {
            *v += noise.sample(&mut rng);
        }
        let rmse = |a: &GlobalTrack, b: &GlobalTrack| {
            let mut acc = 0.0;
            for (x, y) in a.trans.data().iter().zip(b.trans.data()) {
                acc += (x - y) * (x - y);
            }
            (acc / a.trans.len() as f64).sqrt()
        };
        let before = rmse(&noisy, &track);
        let (refined, trace) =
            refine_global(&noisy, &poses, &beta, &body, &obs, 150, 0.01).unwrap();
        let after = rmse(&refined, &track);
        assert!(
            after < before,
            "translation RMSE must improve: {before} -> {after}"
        );
        // descent: final best <= initial
        let last_best = trace.iter().map(|r| r.total).fold(f64::INFINITY, f64::min);
        assert!(last_best <= trace[0].total);
    }

    #[test]
    fn best_energy_is_monotone_over_prefixes() {
        let (track, poses, beta, body) = smooth_demo(5);
        let obs = observe(&track, &poses, &beta, &body);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let mut noisy_poses = poses.clone();
        for v in noisy_poses.theta.data_mut() {
            *v += noise.sample(&mut rng);
        }
        let (_, trace) =
            refine_pose(&noisy_poses, &track, &beta, &body, &obs, 40, 0.01).unwrap();
        let mut best = f64::INFINITY;
        let mut bests = Vec::new();
        for r in &trace {
            best = best.min(r.total);
            bests.push(best);
        }
        for w in bests.windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(bests.last().unwrap() < &trace[0].total);
    }
}
