//! Refinement energies: per-frame Chamfer data term plus first/second
//! finite-difference smoothness priors.

use super::body::BodyModel;
use super::chamfer::{chamfer, chamfer_tape};
use super::rot6d::{rot6d_to_matrix, rot6d_transposed_tape};
use super::{GlobalTrack, ObservationSet, PoseTrack};
use crate::autodiff::{Array, Tape, Tensor};
use crate::error::{Error, Result};

fn check_window(p: usize) -> Result<()> {
    if p < 3 {
        return Err(Error::TooShort(format!(
            "smoothness energies need at least 3 frames, got {p}"
        )));
    }
    Ok(())
}

fn sq_sum_rows(a: &Array) -> f64 {
    a.data().iter().map(|v| v * v).sum()
}

/// Velocity/acceleration prior on the global track:
/// sum of squared first differences of rotation and translation over P-1
/// frames (normalized by P-1) plus squared second differences over P-2
/// frames (normalized by P-2).
pub fn energy_smooth_global(track: &GlobalTrack) -> Result<f64> {
    let p = track.len();
    check_window(p)?;
    let d = |a: &Array| -> Result<Array> {
        let n = a.shape()[0];
        a.slice(0, 1, n - 1)?.sub(&a.slice(0, 0, n - 1)?)
    };
    let dr = d(&track.rot6d)?;
    let dt = d(&track.trans)?;
    let ddr = d(&dr)?;
    let ddt = d(&dt)?;
    Ok((sq_sum_rows(&dr) + sq_sum_rows(&dt)) / (p - 1) as f64
        + (sq_sum_rows(&ddr) + sq_sum_rows(&ddt)) / (p - 2) as f64)
}

/// Pose prior: squared first differences (from frame 2) and squared second
/// differences (from frame 3), both normalized by P-1.
pub fn energy_smooth_pose(track: &PoseTrack) -> Result<f64> {
    let p = track.len();
    check_window(p)?;
    let n = track.theta.shape()[0];
    let d = track
        .theta
        .slice(0, 1, n - 1)?
        .sub(&track.theta.slice(0, 0, n - 1)?)?;
    let dd = d.slice(0, 1, n - 2)?.sub(&d.slice(0, 0, n - 2)?)?;
    Ok((sq_sum_rows(&d) + sq_sum_rows(&dd)) / (p - 1) as f64)
}

/// Mean per-frame Chamfer distance between observations and posed surface
/// samples: (1/P) sum_p C(o_p, v_p R_p^T + t_p).
pub fn energy_pcd_global(
    track: &GlobalTrack,
    poses: &PoseTrack,
    beta: &Array,
    body: &dyn BodyModel,
    observations: &ObservationSet,
) -> Result<f64> {
    let p = track.len();
    if poses.len() != p || observations.len() != p {
        return Err(Error::InvalidInput(format!(
            "frame counts disagree: track {p}, poses {}, observations {}",
            poses.len(),
            observations.len()
        )));
    }
    let mut acc = 0.0;
    for f in 0..p {
        let verts = body.vertices(&poses.frame(f)?, beta)?;
        let rot = rot6d_to_matrix(&track.rot_at(f))?;
        let t = track.trans_at(f);
        let posed: Vec<[f64; 3]> = verts
            .data()
            .chunks_exact(3)
            .map(|v| {
                let mut out = [0.0; 3];
                for (i, o) in out.iter_mut().enumerate() {
                    // row vector times R^T
                    *o = v[0] * rot[i][0] + v[1] * rot[i][1] + v[2] * rot[i][2] + t[i];
                }
                out
            })
            .collect();
        acc += chamfer(&observations.frame(f), &posed)?;
    }
    Ok(acc / p as f64)
}

fn smooth_rows_tape(a: &Tensor) -> Result<(Tensor, Tensor)> {
    let n = a.shape()[0];
    let d = a.slice(0, 1, n - 1)?.sub(&a.slice(0, 0, n - 1)?)?;
    let dd = d.slice(0, 1, n - 2)?.sub(&d.slice(0, 0, n - 2)?)?;
    Ok((d, dd))
}

/// Tape version of the global smoothness energy.
pub fn energy_smooth_global_tape(rot: &Tensor, trans: &Tensor) -> Result<Tensor> {
    let p = rot.shape()[0];
    check_window(p)?;
    let (dr, ddr) = smooth_rows_tape(rot)?;
    let (dt, ddt) = smooth_rows_tape(trans)?;
    let vel = dr
        .square()
        .sum_all()
        .add(&dt.square().sum_all())?
        .scale(1.0 / (p - 1) as f64);
    let acc = ddr
        .square()
        .sum_all()
        .add(&ddt.square().sum_all())?
        .scale(1.0 / (p - 2) as f64);
    vel.add(&acc)
}

/// Tape version of the pose smoothness energy.
pub fn energy_smooth_pose_tape(theta: &Tensor) -> Result<Tensor> {
    let p = theta.shape()[0];
    check_window(p)?;
    let (d, dd) = smooth_rows_tape(theta)?;
    Ok(d
        .square()
        .sum_all()
        .add(&dd.square().sum_all())?
        .scale(1.0 / (p - 1) as f64))
}

/// Tape data term for stage 1: rotations/translations are tracked, per-frame
/// vertices are precomputed constants.
pub fn energy_pcd_global_tape(
    tape: &Tape,
    rot: &Tensor,
    trans: &Tensor,
    frame_vertices: &[Array],
    observations: &ObservationSet,
) -> Result<Tensor> {
    let p = rot.shape()[0];
    if frame_vertices.len() != p || observations.len() != p {
        return Err(Error::InvalidInput("frame counts disagree".into()));
    }
    let mut acc: Option<Tensor> = None;
    for f in 0..p {
        let rt = rot6d_transposed_tape(tape, &rot.slice(0, f, 1)?)?;
        let verts = tape.constant(frame_vertices[f].clone());
        let posed = verts.matmul(&rt)?.add(&trans.slice(0, f, 1)?)?;
        let c = chamfer_tape(tape, &observations.frames[f], &posed)?;
        acc = Some(match acc {
            None => c,
            Some(a) => a.add(&c)?,
        });
    }
    Ok(acc.expect("P >= 1").scale(1.0 / p as f64))
}

/// Tape data term for stage 2: theta is tracked, rotations/translations are
/// frozen constants.
pub fn energy_pcd_pose_tape(
    tape: &Tape,
    theta: &Tensor,
    frozen: &GlobalTrack,
    beta: &Array,
    body: &dyn BodyModel,
    observations: &ObservationSet,
) -> Result<Tensor> {
    let p = theta.shape()[0];
    if frozen.len() != p || observations.len() != p {
        return Err(Error::InvalidInput("frame counts disagree".into()));
    }
    let mut acc: Option<Tensor> = None;
    for f in 0..p {
        let rot = rot6d_to_matrix(&frozen.rot_at(f))?;
        let mut rt = Vec::with_capacity(9);
        for col in 0..3 {
            for row in 0..3 {
                rt.push(rot[row][col]); // transpose
            }
        }
        let rt = tape.constant(Array::from_vec(&[3, 3], rt)?);
        let t = tape.constant(Array::from_vec(&[1, 3], frozen.trans_at(f).to_vec())?);
        let theta_f = theta.slice(0, f, 1)?;
        let verts = body.vertices_tape(tape, &theta_f, beta)?;
        let posed = verts.matmul(&rt)?.add(&t)?;
        let c = chamfer_tape(tape, &observations.frames[f], &posed)?;
        acc = Some(match acc {
            None => c,
            Some(a) => a.add(&c)?,
        });
    }
    Ok(acc.expect("P >= 1").scale(1.0 / p as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refine::body::SphereSkeleton;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn constant_track(p: usize) -> GlobalTrack {
        let mut rot = Array::zeros(&[p, 6]);
        for f in 0..p {
            rot.set(&[f, 0], 1.0);
            rot.set(&[f, 4], 1.0);
        }
        GlobalTrack::new(rot, Array::zeros(&[p, 3])).unwrap()
    }

    #[test]
    fn constant_track_has_zero_smoothness() {
        assert_eq!(energy_smooth_global(&constant_track(5)).unwrap(), 0.0);
        let theta = PoseTrack::new(Array::full(&[4, 6], 0.3)).unwrap();
        assert_eq!(energy_smooth_pose(&theta).unwrap(), 0.0);
    }

    #[test]
    fn linear_ramp_has_velocity_but_no_acceleration() {
        let p = 6;
        let mut track = constant_track(p);
        for f in 0..p {
            track.trans.set(&[f, 0], 0.1 * f as f64);
        }
        let e = energy_smooth_global(&track).unwrap();
        // velocity term only: (P-1) * 0.01 / (P-1) = 0.01
        assert!((e - 0.01).abs() < 1e-12);

        let mut theta = Array::zeros(&[p, 2]);
        for f in 0..p {
            theta.set(&[f, 1], 0.2 * f as f64);
        }
        let e = energy_smooth_pose(&PoseTrack::new(theta).unwrap()).unwrap();
        assert!((e - 0.04).abs() < 1e-12);
    }

    #[test]
    fn noise_increases_smoothness_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let p = 20;
        let base = constant_track(p);
        let e0 = energy_smooth_global(&base).unwrap();
        let mut worse = 0;
        for _ in 0..20 {
            let mut noisy = base.clone();
            for v in noisy.trans.data_mut() {
                *v += rng.random_range(-0.05..0.05);
            }
            for v in noisy.rot6d.data_mut() {
                *v += rng.random_range(-0.05..0.05);
            }
            if energy_smooth_global(&noisy).unwrap() > e0 {
                worse += 1;
            }
        }
        assert_eq!(worse, 20, "noise must increase the energy of a constant track");
    }

    #[test]
    fn too_short_window_is_error() {
        assert!(matches!(
            energy_smooth_global(&constant_track(2)),
            Err(Error::TooShort(_))
        ));
        let theta = PoseTrack::new(Array::zeros(&[2, 3])).unwrap();
        assert!(matches!(energy_smooth_pose(&theta), Err(Error::TooShort(_))));
    }

    #[test]
    fn tape_smoothness_matches_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let p = 7;
        let rot = Array::uniform(&[p, 6], -1.0, 1.0, &mut rng);
        let trans = Array::uniform(&[p, 3], -1.0, 1.0, &mut rng);
        let track = GlobalTrack::new(rot.clone(), trans.clone()).unwrap();
        let tape = Tape::new();
        let rt = tape.constant(rot);
        let tt = tape.constant(trans);
        let e = energy_smooth_global_tape(&rt, &tt).unwrap().value().item();
        assert!((e - energy_smooth_global(&track).unwrap()).abs() < 1e-12);

        let theta = Array::uniform(&[p, 5], -1.0, 1.0, &mut rng);
        let pt = PoseTrack::new(theta.clone()).unwrap();
        let tape = Tape::new();
        let tht = tape.constant(theta);
        let e = energy_smooth_pose_tape(&tht).unwrap().value().item();
        assert!((e - energy_smooth_pose(&pt).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn perfect_fit_has_zero_data_term_and_offsets_increase_it() {
        let body = SphereSkeleton::default_humanoid();
        let k = body.num_joints();
        let beta = Array::full(&[k], 1.0);
        let p = 3;
        let track = constant_track(p);
        let mut theta = Array::zeros(&[p, 3 * k]);
        for f in 0..p {
            theta.set(&[f, 35], 0.2 * f as f64); // some articulation
        }
        let poses = PoseTrack::new(theta).unwrap();
        let mut frames = Vec::new();
        for f in 0..p {
            frames.push(body.vertices(&poses.frame(f).unwrap(), &beta).unwrap());
        }
        let obs = ObservationSet::new(frames).unwrap();
        let e0 = energy_pcd_global(&track, &poses, &beta, &body, &obs).unwrap();
        assert!(e0 < 1e-18, "perfect fit energy {e0}");

        let mut shifted = track.clone();
        for f in 0..p {
            shifted.trans.set(&[f, 0], 0.05);
        }
        let e1 = energy_pcd_global(&shifted, &poses, &beta, &body, &obs).unwrap();
        assert!(e1 > e0);
        let mut farther = track.clone();
        for f in 0..p {
            farther.trans.set(&[f, 0], 0.1);
        }
        let e2 = energy_pcd_global(&farther, &poses, &beta, &body, &obs).unwrap();
        assert!(e2 > e1, "data term must grow with the offset: {e1} vs {e2}");
    }

    #[test]
    fn single_frame_reduces_to_one_chamfer_term() {
        let body = SphereSkeleton::default_humanoid();
        let k = body.num_joints();
        let beta = Array::full(&[k], 1.0);
        let track = {
            let mut rot = Array::zeros(&[1, 6]);
            rot.set(&[0, 0], 1.0);
            rot.set(&[0, 4], 1.0);
            GlobalTrack::new(rot, Array::from_vec(&[1, 3], vec![0.2, 0.0, 0.0]).unwrap()).unwrap()
        };
        let poses = PoseTrack::new(Array::zeros(&[1, 3 * k])).unwrap();
        let verts = body.vertices(&poses.frame(0).unwrap(), &beta).unwrap();
        let obs_pts: Vec<[f64; 3]> = verts.data().chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        let obs = ObservationSet::new(vec![verts.clone()]).unwrap();
        let e = energy_pcd_global(&track, &poses, &beta, &body, &obs).unwrap();
        let posed: Vec<[f64; 3]> = obs_pts.iter().map(|p| [p[0] + 0.2, p[1], p[2]]).collect();
        let direct = crate::refine::chamfer::chamfer(&obs_pts, &posed).unwrap();
        assert!((e - direct).abs() < 1e-12);
    }
}
