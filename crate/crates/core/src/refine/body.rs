//! Surrogate body model: a kinematic sphere-skeleton. Joints are posed by
//! forward kinematics from per-joint axis-angle parameters (D = 3K), and
//! each joint carries 8 fixed sphere-surface offsets, giving N_v = 8K
//! differentiable surface samples.

use crate::autodiff::{Array, Tape, Tensor};
use crate::error::{Error, Result};

/// Differentiable map from pose parameters to surface sample points.
pub trait BodyModel {
    fn vertex_count(&self) -> usize;
    /// Pose parameter count D.
    fn dof(&self) -> usize;
    /// `theta`: `[1, D]` on the tape; `beta`: frozen per-joint radius scales.
    /// Returns `[N_v, 3]` surface samples in the body frame.
    fn vertices_tape(&self, tape: &Tape, theta: &Tensor, beta: &Array) -> Result<Tensor>;

    /// Value-only convenience.
    fn vertices(&self, theta: &Array, beta: &Array) -> Result<Array> {
        let tape = Tape::new();
        let t = tape.constant(theta.clone());
        Ok(self.vertices_tape(&tape, &t, beta)?.value())
    }
}

/// Sphere-skeleton: a joint tree with fixed bone offsets and per-joint
/// sphere radii.
pub struct SphereSkeleton {
    /// Parent joint per joint; the root (index 0) has no parent. Parents
    /// always precede children.
    parents: Vec<Option<usize>>,
    /// Bone offset from the parent joint, in the parent frame.
    offsets: Vec<[f64; 3]>,
    radii: Vec<f64>,
    sphere_dirs: Array,
}

impl SphereSkeleton {
    pub fn new(
        parents: Vec<Option<usize>>,
        offsets: Vec<[f64; 3]>,
        radii: Vec<f64>,
    ) -> Result<SphereSkeleton> {
        let k = parents.len();
        if k == 0 || offsets.len() != k || radii.len() != k {
            return Err(Error::InvalidInput(
                "skeleton arrays must be non-empty and equally sized".into(),
            ));
        }
        if parents[0].is_some() {
            return Err(Error::InvalidInput("joint 0 must be the root".into()));
        }
        for (i, p) in parents.iter().enumerate().skip(1) {
            match p {
                Some(parent) if *parent < i => {}
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "joint {i} must have a parent with a smaller index"
                    )))
                }
            }
        }
        // cube corners, normalized: 8 fixed unit directions
        let s = 1.0 / 3f64.sqrt();
        let mut dirs = Vec::with_capacity(24);
        for k in 0..8u8 {
            dirs.extend_from_slice(&[
                if k & 4 == 0 { -s } else { s },
                if k & 2 == 0 { -s } else { s },
                if k & 1 == 0 { -s } else { s },
            ]);
        }
        Ok(SphereSkeleton {
            parents,
            offsets,
            radii,
            sphere_dirs: Array::from_vec(&[8, 3], dirs)?,
        })
    }

    /// A compact humanoid used by the demo pipeline and tests: torso chain,
    /// two arms, two legs.
    pub fn default_humanoid() -> SphereSkeleton {
        let parents = vec![
            None,      // 0 pelvis
            Some(0),   // 1 spine
            Some(1),   // 2 chest
            Some(2),   // 3 neck
            Some(3),   // 4 head
            Some(2),   // 5 left shoulder
            Some(5),   // 6 left elbow
            Some(6),   // 7 left wrist
            Some(2),   // 8 right shoulder
            Some(8),   // 9 right elbow
            Some(9),   // 10 right wrist
            Some(0),   // 11 left hip
            Some(11),  // 12 left knee
            Some(12),  // 13 left foot
            Some(0),   // 14 right hip
            Some(14),  // 15 right knee
            Some(15),  // 16 right foot
        ];
        let offsets = vec![
            [0.0, 0.0, 0.0],
            [0.0, 0.0, 0.15],
            [0.0, 0.0, 0.2],
            [0.0, 0.0, 0.15],
            [0.0, 0.0, 0.12],
            [0.0, 0.18, 0.05],
            [0.0, 0.26, 0.0],
            [0.0, 0.25, 0.0],
            [0.0, -0.18, 0.05],
            [0.0, -0.26, 0.0],
            [0.0, -0.25, 0.0],
            [0.0, 0.1, -0.05],
            [0.0, 0.0, -0.4],
            [0.0, 0.0, -0.42],
            [0.0, -0.1, -0.05],
            [0.0, 0.0, -0.4],
            [0.0, 0.0, -0.42],
        ];
        let radii = vec![
            0.11, 0.1, 0.1, 0.05, 0.09, 0.05, 0.04, 0.035, 0.05, 0.04, 0.035, 0.07, 0.05, 0.04,
            0.07, 0.05, 0.04,
        ];
        SphereSkeleton::new(parents, offsets, radii).expect("valid humanoid")
    }

    pub fn num_joints(&self) -> usize {
        self.parents.len()
    }
}

/// Rodrigues rotation from an axis-angle `[1, 3]` tensor, on the tape.
/// Small-angle-safe: (1 - cos a)/a^2 is computed as 2 sin^2(a/2)/a^2.
pub fn rodrigues_tape(tape: &Tape, axis_angle: &Tensor) -> Result<Tensor> {
    if axis_angle.shape() != [1, 3] {
        return Err(Error::InvalidInput(format!(
            "rodrigues expects [1, 3], got {:?}",
            axis_angle.shape()
        )));
    }
    let tiny = tape.constant(Array::scalar(1e-300));
    let sq = axis_angle.square().sum_all().add(&tiny)?;
    let angle = sq.sqrt();
    let sinc = angle.sin().div(&angle)?;
    let versine = angle.scale(0.5).sin().square().scale(2.0).div(&sq)?;

    let wx = axis_angle.slice(1, 0, 1)?;
    let wy = axis_angle.slice(1, 1, 1)?;
    let wz = axis_angle.slice(1, 2, 1)?;
    let zero = tape.constant(Array::zeros(&[1, 1]));
    let r0 = Tensor::concat(&[&zero, &wz.neg(), &wy], 1)?;
    let r1 = Tensor::concat(&[&wz, &zero, &wx.neg()], 1)?;
    let r2 = Tensor::concat(&[&wy.neg(), &wx, &zero], 1)?;
    let skew = Tensor::concat(&[&r0, &r1, &r2], 0)?;
    let skew2 = skew.matmul(&skew)?;

    let eye = tape.constant(Array::from_vec(
        &[3, 3],
        vec![1., 0., 0., 0., 1., 0., 0., 0., 1.],
    )?);
    eye.add(&skew.mul(&sinc)?)?.add(&skew2.mul(&versine)?)
}

impl BodyModel for SphereSkeleton {
    fn vertex_count(&self) -> usize {
        8 * self.parents.len()
    }

    fn dof(&self) -> usize {
        3 * self.parents.len()
    }

    fn vertices_tape(&self, tape: &Tape, theta: &Tensor, beta: &Array) -> Result<Tensor> {
        let k = self.parents.len();
        if theta.shape() != [1, 3 * k] {
            return Err(Error::InvalidInput(format!(
                "theta shape {:?} does not match {} joints",
                theta.shape(),
                k
            )));
        }
        if beta.len() != k {
            return Err(Error::InvalidInput(format!(
                "beta has {} entries, expected {}",
                beta.len(),
                k
            )));
        }
        let mut global_rot: Vec<Tensor> = Vec::with_capacity(k);
        let mut position: Vec<Tensor> = Vec::with_capacity(k);
        let mut samples: Vec<Tensor> = Vec::with_capacity(k);
        for j in 0..k {
            let local = rodrigues_tape(tape, &theta.slice(1, 3 * j, 3)?)?;
            let (rot, pos) = match self.parents[j] {
                None => (local, tape.constant(Array::zeros(&[1, 3]))),
                Some(p) => {
                    let rot = global_rot[p].matmul(&local)?;
                    let off = tape.constant(Array::from_vec(&[1, 3], self.offsets[j].to_vec())?);
                    // row vector times R^T rotates by R
                    let moved = off.matmul(&global_rot[p].transpose()?)?;
                    (rot, position[p].add(&moved)?)
                }
            };
            let radius = self.radii[j] * beta.data()[j];
            let dirs = tape.constant(self.sphere_dirs.scale(radius));
            let surface = dirs.matmul(&rot.transpose()?)?.add(&pos)?;
            samples.push(surface);
            global_rot.push(rot);
            position.push(pos);
        }
        let refs: Vec<&Tensor> = samples.iter().collect();
        Tensor::concat(&refs, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rodrigues_identity_at_zero() {
        let tape = Tape::new();
        let t = tape.constant(Array::zeros(&[1, 3]));
        let r = rodrigues_tape(&tape, &t).unwrap().value();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((r.at(&[i, j]) - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rodrigues_quarter_turn_about_z() {
        let tape = Tape::new();
        let half_pi = std::f64::consts::FRAC_PI_2;
        let t = tape.constant(Array::from_vec(&[1, 3], vec![0.0, 0.0, half_pi]).unwrap());
        let r = rodrigues_tape(&tape, &t).unwrap().value();
        // R (1,0,0)^T = (0,1,0)^T
        assert!((r.at(&[0, 0]) - 0.0).abs() < 1e-12);
        assert!((r.at(&[1, 0]) - 1.0).abs() < 1e-12);
        assert!((r.at(&[2, 0]) - 0.0).abs() < 1e-12);
    }

    #[test]
    fn rodrigues_is_orthonormal_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..20 {
            let tape = Tape::new();
            let v = Array::uniform(&[1, 3], -2.0, 2.0, &mut rng);
            let t = tape.constant(v);
            let r = rodrigues_tape(&tape, &t).unwrap().value();
            for i in 0..3 {
                for j in 0..3 {
                    let dot: f64 = (0..3).map(|k| r.at(&[k, i]) * r.at(&[k, j])).sum();
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((dot - expect).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn humanoid_rest_pose_shape_and_determinism() {
        let body = SphereSkeleton::default_humanoid();
        let beta = Array::full(&[body.num_joints()], 1.0);
        let theta = Array::zeros(&[1, body.dof()]);
        let v1 = body.vertices(&theta, &beta).unwrap();
        let v2 = body.vertices(&theta, &beta).unwrap();
        assert_eq!(v1.shape(), &[body.vertex_count(), 3]);
        assert_eq!(v1, v2);
        assert!(v1.all_finite());
    }

    #[test]
    fn posing_moves_descendant_samples() {
        let body = SphereSkeleton::default_humanoid();
        let beta = Array::full(&[body.num_joints()], 1.0);
        let rest = body.vertices(&Array::zeros(&[1, body.dof()]), &beta).unwrap();
        // bend the left hip (joint 11): its subtree (knee 12, foot 13) moves
        let mut theta = Array::zeros(&[1, body.dof()]);
        theta.set(&[0, 11 * 3 + 1], 0.8);
        let posed = body.vertices(&theta, &beta).unwrap();
        let sub = posed.slice(0, 12 * 8, 16).unwrap();
        let sub_rest = rest.slice(0, 12 * 8, 16).unwrap();
        assert!(sub.max_abs_diff(&sub_rest) > 0.05);
        // the pelvis samples stay put
        let torso = posed.slice(0, 0, 8).unwrap();
        let torso_rest = rest.slice(0, 0, 8).unwrap();
        assert!(torso.max_abs_diff(&torso_rest) < 1e-12);
    }
}
