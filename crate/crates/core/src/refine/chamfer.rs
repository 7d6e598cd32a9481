//! Symmetric squared-distance Chamfer measure between point sets, with a
//! spatial-index-accelerated value path and a tape builder that is
//! differentiable through the matched pairs.

use crate::autodiff::{Array, Tape, Tensor};
use crate::error::{Error, Result};
use crate::geom::{SceneCloud, SpatialIndex};

fn rows_of(points: &Array) -> Result<Vec<[f64; 3]>> {
    if points.rank() != 2 || points.shape()[1] != 3 {
        return Err(Error::InvalidInput(format!(
            "expected an [N, 3] point array, got {:?}",
            points.shape()
        )));
    }
    Ok(points
        .data()
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect())
}

/// Mean over A of the squared distance to the nearest point of B, plus the
/// same with the roles swapped.
pub fn chamfer(a: &[[f64; 3]], b: &[[f64; 3]]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("chamfer distance of an empty set".into()));
    }
    let index_b = SpatialIndex::build(&SceneCloud::new(b.to_vec())?);
    let index_a = SpatialIndex::build(&SceneCloud::new(a.to_vec())?);
    let to_b: f64 = a.iter().map(|p| index_b.nearest(p).1).sum::<f64>() / a.len() as f64;
    let to_a: f64 = b.iter().map(|p| index_a.nearest(p).1).sum::<f64>() / b.len() as f64;
    Ok(to_b + to_a)
}

/// Double-loop reference used by the oracle tests.
pub fn chamfer_brute_force(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    let min_d2 = |p: &[f64; 3], set: &[[f64; 3]]| {
        set.iter()
            .map(|q| crate::geom::spatial::dist2(p, q))
            .fold(f64::INFINITY, f64::min)
    };
    let to_b: f64 = a.iter().map(|p| min_d2(p, b)).sum::<f64>() / a.len() as f64;
    let to_a: f64 = b.iter().map(|p| min_d2(p, a)).sum::<f64>() / b.len() as f64;
    to_b + to_a
}

/// Chamfer between a constant observation set and tape-tracked vertices,
/// `[Nv, 3]`. Correspondences are found on current values and held fixed for
/// this evaluation; gradients flow through the matched vertex coordinates.
pub fn chamfer_tape(tape: &Tape, observed: &Array, vertices: &Tensor) -> Result<Tensor> {
    let obs_rows = rows_of(observed)?;
    let vert_vals = vertices.value();
    let vert_rows = rows_of(&vert_vals)?;
    if obs_rows.is_empty() || vert_rows.is_empty() {
        return Err(Error::InvalidInput("chamfer distance of an empty set".into()));
    }
    let index_v = SpatialIndex::build(&SceneCloud::new(vert_rows.clone())?);
    let index_o = SpatialIndex::build(&SceneCloud::new(obs_rows.clone())?);

    // observation -> nearest vertex
    let idx_to_v: Vec<usize> = obs_rows.iter().map(|p| index_v.nearest(p).0).collect();
    let obs_const = tape.constant(observed.clone());
    let matched_v = vertices.gather_rows(&idx_to_v)?;
    let to_v = obs_const
        .sub(&matched_v)?
        .square()
        .sum_axis(1)?
        .mean_all();

    // vertex -> nearest observation (a constant gather)
    let mut matched_o = Vec::with_capacity(vert_rows.len() * 3);
    for p in &vert_rows {
        let q = obs_rows[index_o.nearest(p).0];
        matched_o.extend_from_slice(&q);
    }
    let matched_o = tape.constant(Array::from_vec(&[vert_rows.len(), 3], matched_o)?);
    let to_o = vertices
        .sub(&matched_o)?
        .square()
        .sum_axis(1)?
        .mean_all();

    to_v.add(&to_o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn self_distance_is_zero() {
        let a = vec![[0.0, 0.0, 0.0], [1.0, 2.0, 3.0], [-1.0, 0.5, 0.25]];
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn unit_offset_pair_gives_two() {
        let a = vec![[0.0, 0.0, 0.0]];
        let b = vec![[1.0, 0.0, 0.0]];
        assert!((chamfer(&a, &b).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_and_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let na = rng.random_range(1..40);
            let nb = rng.random_range(1..40);
            let gen = |rng: &mut ChaCha8Rng, n: usize| -> Vec<[f64; 3]> {
                (0..n)
                    .map(|_| {
                        [
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                        ]
                    })
                    .collect()
            };
            let a = gen(&mut rng, na);
            let b = gen(&mut rng, nb);
            let ab = chamfer(&a, &b).unwrap();
            let ba = chamfer(&b, &a).unwrap();
            assert!((ab - ba).abs() < 1e-12);
            assert!((ab - chamfer_brute_force(&a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_set_is_error() {
        let a = vec![[0.0, 0.0, 0.0]];
        assert!(chamfer(&a, &[]).is_err());
        assert!(chamfer(&[], &a).is_err());
    }

    #[test]
    fn tape_value_matches_plain_and_grad_descends() {
        let obs = Array::from_vec(&[2, 3], vec![0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let verts = Array::from_vec(&[2, 3], vec![0.1, 0.0, 0.0, 0.9, 0.0, 0.0]).unwrap();
        let tape = Tape::new();
        let v = tape.var(verts.clone());
        let c = chamfer_tape(&tape, &obs, &v).unwrap();
        let plain = chamfer(
            &[[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
            &[[0.1, 0.0, 0.0], [0.9, 0.0, 0.0]],
        )
        .unwrap();
        assert!((c.value().item() - plain).abs() < 1e-12);
        c.backward().unwrap();
        let g = v.grad();
        // moving each vertex toward its observation reduces the distance
        assert!(g.at(&[0, 0]) > 0.0);
        assert!(g.at(&[1, 0]) < 0.0);
    }
}
