//! Single-scale point-voxel encoder: average point features into a voxel
//! grid, run a 3-D convolution stack, trilinearly devoxelize back to points,
//! fuse with a shared per-point MLP branch, then emit a per-point residual
//! after concatenating a broadcast pose embedding.
//!
//! Coordinates are normalized to the unit cube of the scene bounding box, so
//! the encoder is invariant to rigid translation of the whole input.

use rand::Rng;

use crate::autodiff::{glorot_uniform, Array, BoundParams, Params, Tape, Tensor};
use crate::error::{Error, Result};
use crate::geom::SceneCloud;

/// Voxelization/devoxelization layout for one scene at one resolution.
#[derive(Clone, Debug)]
pub struct PvGeometry {
    pub resolution: usize,
    /// Per point: flat voxel id (x-major, then y, then z).
    pub voxel_of_point: Vec<usize>,
    /// Per point: 8 (corner voxel id, trilinear weight) pairs.
    pub corners: Vec<[(usize, f64); 8]>,
}

impl PvGeometry {
    pub fn new(scene: &SceneCloud, resolution: usize) -> Result<PvGeometry> {
        let r = resolution;
        if r < 1 {
            return Err(Error::InvalidParameter("voxel resolution must be >= 1".into()));
        }
        let (lo, hi) = scene.bounding_box();
        let extent: Vec<f64> = (0..3).map(|a| hi[a] - lo[a]).collect();
        if extent.iter().all(|&e| e <= 0.0) {
            return Err(Error::InvalidScene(
                "all scene points coincide; bounding box is degenerate".into(),
            ));
        }
        let rf = r as f64;
        let mut voxel_of_point = Vec::with_capacity(scene.len());
        let mut corners = Vec::with_capacity(scene.len());
        for p in scene.points() {
            let mut norm = [0.5f64; 3];
            for a in 0..3 {
                if extent[a] > 0.0 {
                    norm[a] = (p[a] - lo[a]) / extent[a];
                }
            }
            let cell = |a: usize| ((norm[a] * rf).floor() as usize).min(r - 1);
            voxel_of_point.push((cell(0) * r + cell(1)) * r + cell(2));

            // voxel centers sit at (i + 0.5) / r
            let mut base = [0isize; 3];
            let mut frac = [0f64; 3];
            for a in 0..3 {
                let u = norm[a] * rf - 0.5;
                let f = u.floor();
                base[a] = f as isize;
                frac[a] = u - f;
            }
            let clamp = |v: isize| v.clamp(0, r as isize - 1) as usize;
            let mut cs = [(0usize, 0f64); 8];
            for (k, c) in cs.iter_mut().enumerate() {
                let (dx, dy, dz) = (k >> 2 & 1, k >> 1 & 1, k & 1);
                let w = |d: usize, a: usize| if d == 1 { frac[a] } else { 1.0 - frac[a] };
                let id = (clamp(base[0] + dx as isize) * r + clamp(base[1] + dy as isize)) * r
                    + clamp(base[2] + dz as isize);
                *c = (id, w(dx, 0) * w(dy, 1) * w(dz, 2));
            }
            corners.push(cs);
        }
        Ok(PvGeometry {
            resolution: r,
            voxel_of_point,
            corners,
        })
    }

    pub fn num_voxels(&self) -> usize {
        self.resolution.pow(3)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PvSpec {
    /// Per-point feature width (joints x kept DCT coefficients).
    pub channels: usize,
    pub hidden: usize,
    pub resolution: usize,
}

impl PvSpec {
    pub fn init<R: Rng>(&self, params: &mut Params, prefix: &str, rng: &mut R) {
        let (c, h) = (self.channels, self.hidden);
        let conv_dims = [(c, h), (h, h), (h, h)];
        for (i, (cin, cout)) in conv_dims.iter().enumerate() {
            params.insert(
                format!("{prefix}.conv{i}.w"),
                glorot_uniform(27 * cin, *cout, rng),
            );
            params.insert(format!("{prefix}.conv{i}.b"), Array::zeros(&[1, *cout]));
        }
        params.insert(format!("{prefix}.point0.w"), glorot_uniform(c, h, rng));
        params.insert(format!("{prefix}.point0.b"), Array::zeros(&[1, h]));
        params.insert(format!("{prefix}.point1.w"), glorot_uniform(h, h, rng));
        params.insert(format!("{prefix}.point1.b"), Array::zeros(&[1, h]));
        params.insert(format!("{prefix}.head0.w"), glorot_uniform(2 * h, h, rng));
        params.insert(format!("{prefix}.head0.b"), Array::zeros(&[1, h]));
        params.insert(format!("{prefix}.head1.w"), glorot_uniform(h, c, rng));
        params.insert(format!("{prefix}.head1.b"), Array::zeros(&[1, c]));
    }

    /// `features`: `[N, channels]`; `embedding`: `[1, hidden]`. Returns the
    /// per-point residual `[N, channels]`.
    pub fn encode(
        &self,
        tape: &Tape,
        bound: &BoundParams,
        prefix: &str,
        geometry: &PvGeometry,
        features: &Tensor,
        embedding: &Tensor,
    ) -> Result<Tensor> {
        let n = features.shape()[0];
        if features.shape() != [n, self.channels] {
            return Err(Error::shape(
                "point_voxel_encode",
                &features.shape(),
                &[n, self.channels],
            ));
        }
        let r = geometry.resolution;

        // voxel branch
        let mut grid = features.scatter_mean(&geometry.voxel_of_point, geometry.num_voxels())?;
        for i in 0..3 {
            grid = grid
                .conv3d(bound.get(&format!("{prefix}.conv{i}.w")), r)?
                .add(bound.get(&format!("{prefix}.conv{i}.b")))?
                .tanh();
        }
        // trilinear devoxelization
        let mut devox: Option<Tensor> = None;
        for k in 0..8 {
            let ids: Vec<usize> = geometry.corners.iter().map(|c| c[k].0).collect();
            let ws: Vec<f64> = geometry.corners.iter().map(|c| c[k].1).collect();
            let w = tape.constant(Array::from_vec(&[n, 1], ws)?);
            let term = grid.gather_rows(&ids)?.mul(&w)?;
            devox = Some(match devox {
                None => term,
                Some(acc) => acc.add(&term)?,
            });
        }
        let devox = devox.expect("eight corners");

        // point branch
        let p0 = features
            .matmul(bound.get(&format!("{prefix}.point0.w")))?
            .add(bound.get(&format!("{prefix}.point0.b")))?
            .tanh();
        let p1 = p0
            .matmul(bound.get(&format!("{prefix}.point1.w")))?
            .add(bound.get(&format!("{prefix}.point1.b")))?
            .tanh();

        let fused = devox.add(&p1)?;

        // broadcast the pose embedding to every point, then the output head
        let ones = tape.constant(Array::full(&[n, 1], 1.0));
        let emb_rows = ones.matmul(embedding)?;
        let cat = Tensor::concat(&[&fused, &emb_rows], 1)?;
        let h0 = cat
            .matmul(bound.get(&format!("{prefix}.head0.w")))?
            .add(bound.get(&format!("{prefix}.head0.b")))?
            .tanh();
        h0.matmul(bound.get(&format!("{prefix}.head1.w")))?
            .add(bound.get(&format!("{prefix}.head1.b")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn voxel_center_devoxelization_is_exact() {
        // anchors pin the bounding box to [0,1]^3 so the remaining points sit
        // exactly at voxel centers; a one-hot grid devoxelized there must
        // return exactly that voxel's feature (weight 1 on the own corner)
        let r = 4usize;
        let mut pts = vec![[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]];
        let center_start = pts.len();
        for x in 0..r {
            for y in 0..r {
                for z in 0..r {
                    let c = |i: usize| (i as f64 + 0.5) / r as f64;
                    pts.push([c(x), c(y), c(z)]);
                }
            }
        }
        let scene = SceneCloud::new(pts).unwrap();
        let geo = PvGeometry::new(&scene, r).unwrap();
        for (p, corners) in geo.corners.iter().enumerate() {
            let total: f64 = corners.iter().map(|c| c.1).sum();
            assert!((total - 1.0).abs() < 1e-12);
            if p < center_start {
                continue;
            }
            let on_self: f64 = corners
                .iter()
                .filter(|c| c.0 == geo.voxel_of_point[p])
                .map(|c| c.1)
                .sum();
            assert!(
                (on_self - 1.0).abs() < 1e-12,
                "point {p}: weight on own voxel {on_self}"
            );
        }
    }

    #[test]
    fn degenerate_scene_rejected() {
        let scene = SceneCloud::new(vec![[1.0, 1.0, 1.0]; 5]).unwrap();
        assert!(matches!(
            PvGeometry::new(&scene, 4),
            Err(Error::InvalidScene(_))
        ));
    }

    #[test]
    fn planar_scene_is_accepted() {
        let scene = SceneCloud::new(vec![
            [0.0, 0.0, 0.5],
            [1.0, 0.0, 0.5],
            [0.0, 1.0, 0.5],
        ])
        .unwrap();
        let geo = PvGeometry::new(&scene, 2).unwrap();
        assert_eq!(geo.voxel_of_point.len(), 3);
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<[f64; 3]> = (0..20)
            .map(|_| {
                [
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        let spec = PvSpec {
            channels: 6,
            hidden: 5,
            resolution: 4,
        };
        let mut params = Params::new();
        spec.init(&mut params, "pv", &mut rng);
        let feat = Array::uniform(&[20, 6], -1.0, 1.0, &mut rng);
        let emb = Array::uniform(&[1, 5], -1.0, 1.0, &mut rng);

        let run = |offset: f64| {
            let shifted: Vec<[f64; 3]> = pts
                .iter()
                .map(|p| [p[0] + offset, p[1] + offset, p[2] + offset])
                .collect();
            let scene = SceneCloud::new(shifted).unwrap();
            let geo = PvGeometry::new(&scene, 4).unwrap();
            let tape = Tape::new();
            let bound = BoundParams::bind(&tape, &params);
            let f = tape.constant(feat.clone());
            let e = tape.constant(emb.clone());
            spec.encode(&tape, &bound, "pv", &geo, &f, &e)
                .unwrap()
                .value()
        };
        let base = run(0.0);
        let moved = run(3.75);
        assert!(base.max_abs_diff(&moved) < 1e-9);
        assert_eq!(base.shape(), &[20, 6]);
    }
}
