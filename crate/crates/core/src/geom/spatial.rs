//! k-d tree over a scene point cloud.
//!
//! Queries are required to be bit-identical to a brute-force scan, including
//! the tie rule: among equidistant points the lowest point index wins. Both
//! paths share the same squared-distance expression so compares are exact.

use super::SceneCloud;

#[inline]
pub fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

struct Node {
    point: u32,
    left: i32,
    right: i32,
}

/// Immutable nearest-neighbor / radius index. Safe to share across threads.
pub struct SpatialIndex {
    points: Vec<[f64; 3]>,
    nodes: Vec<Node>,
    root: i32,
}

impl SpatialIndex {
    pub fn build(scene: &SceneCloud) -> SpatialIndex {
        let points = scene.points().to_vec();
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut index = SpatialIndex {
            points,
            nodes: Vec::with_capacity(order.len()),
            root: -1,
        };
        index.root = index.build_rec(&mut order, 0);
        index
    }

    fn build_rec(&mut self, order: &mut [u32], depth: usize) -> i32 {
        if order.is_empty() {
            return -1;
        }
        let axis = depth % 3;
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            let ca = self.points[a as usize][axis];
            let cb = self.points[b as usize][axis];
            ca.partial_cmp(&cb).unwrap().then(a.cmp(&b))
        });
        let point = order[mid];
        let id = self.nodes.len() as i32;
        self.nodes.push(Node {
            point,
            left: -1,
            right: -1,
        });
        let (lo, rest) = order.split_at_mut(mid);
        let hi = &mut rest[1..];
        let left = self.build_rec(lo, depth + 1);
        let right = self.build_rec(hi, depth + 1);
        self.nodes[id as usize].left = left;
        self.nodes[id as usize].right = right;
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index and squared distance of the closest point (ties: lowest index).
    pub fn nearest(&self, query: &[f64; 3]) -> (usize, f64) {
        debug_assert!(!self.points.is_empty());
        let mut best = (u32::MAX, f64::INFINITY);
        self.nearest_rec(self.root, query, 0, &mut best);
        (best.0 as usize, best.1)
    }

    fn nearest_rec(&self, node: i32, query: &[f64; 3], depth: usize, best: &mut (u32, f64)) {
        if node < 0 {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = &self.points[n.point as usize];
        let d2 = dist2(query, p);
        if d2 < best.1 || (d2 == best.1 && n.point < best.0) {
            *best = (n.point, d2);
        }
        let axis = depth % 3;
        let diff = query[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.nearest_rec(near, query, depth + 1, best);
        // equal split distance can still hide a tie with a lower index
        if diff * diff <= best.1 {
            self.nearest_rec(far, query, depth + 1, best);
        }
    }

    /// Indices (ascending) of all points with squared distance <= r^2.
    pub fn within_radius(&self, query: &[f64; 3], radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.radius_rec(self.root, query, 0, r2, &mut out);
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, node: i32, query: &[f64; 3], depth: usize, r2: f64, out: &mut Vec<usize>) {
        if node < 0 {
            return;
        }
        let n = &self.nodes[node as usize];
        let p = &self.points[n.point as usize];
        if dist2(query, p) <= r2 {
            out.push(n.point as usize);
        }
        let axis = depth % 3;
        let diff = query[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            (n.left, n.right)
        } else {
            (n.right, n.left)
        };
        self.radius_rec(near, query, depth + 1, r2, out);
        if diff * diff <= r2 {
            self.radius_rec(far, query, depth + 1, r2, out);
        }
    }
}

/// Reference scan used by the equivalence tests.
pub fn brute_force_nearest(points: &[[f64; 3]], query: &[f64; 3]) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        let d2 = dist2(query, p);
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    best
}

pub fn brute_force_within_radius(points: &[[f64; 3]], query: &[f64; 3], radius: f64) -> Vec<usize> {
    let r2 = radius * radius;
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| dist2(query, p) <= r2)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(points: Vec<[f64; 3]>) -> SceneCloud {
        SceneCloud::new(points).unwrap()
    }

    #[test]
    fn singleton_cloud() {
        let c = cloud(vec![[1.0, 2.0, 3.0]]);
        let idx = SpatialIndex::build(&c);
        let (i, d2) = idx.nearest(&[0.0, 0.0, 0.0]);
        assert_eq!(i, 0);
        assert_eq!(d2, 14.0);
    }

    #[test]
    fn lattice_exact_hit() {
        let mut pts = Vec::new();
        for x in 0..3 {
            for y in 0..3 {
                for z in 0..3 {
                    pts.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        let c = cloud(pts.clone());
        let idx = SpatialIndex::build(&c);
        let (i, d2) = idx.nearest(&[1.0, 2.0, 0.0]);
        assert_eq!(pts[i], [1.0, 2.0, 0.0]);
        assert_eq!(d2, 0.0);
    }

    #[test]
    fn ties_prefer_lowest_index() {
        // two coincident points plus one farther away
        let c = cloud(vec![[5.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]);
        let idx = SpatialIndex::build(&c);
        let (i, _) = idx.nearest(&[0.0, 0.0, 0.0]);
        assert_eq!(i, 1);
        // symmetric pair around the query
        let c = cloud(vec![[2.0, 0.0, 0.0], [-2.0, 0.0, 0.0]]);
        let idx = SpatialIndex::build(&c);
        let (i, _) = idx.nearest(&[0.0, 0.0, 0.0]);
        assert_eq!(i, 0);
    }

    #[test]
    fn matches_brute_force_on_random_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let n = rng.random_range(1..200);
            let pts: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    [
                        rng.random_range(-3.0..3.0),
                        rng.random_range(-3.0..3.0),
                        rng.random_range(-3.0..3.0),
                    ]
                })
                .collect();
            let c = cloud(pts.clone());
            let idx = SpatialIndex::build(&c);
            for _ in 0..50 {
                let q = [
                    rng.random_range(-4.0..4.0),
                    rng.random_range(-4.0..4.0),
                    rng.random_range(-4.0..4.0),
                ];
                assert_eq!(idx.nearest(&q), brute_force_nearest(&pts, &q));
                let r = rng.random_range(0.1..3.0);
                assert_eq!(
                    idx.within_radius(&q, r),
                    brute_force_within_radius(&pts, &q, r)
                );
            }
        }
    }

    #[test]
    fn shared_across_threads() {
        let c = cloud(vec![[0.0, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 0.0, 1.0]]);
        let idx = std::sync::Arc::new(SpatialIndex::build(&c));
        let handles: Vec<_> = (0..4)
            .map(|t| {
                let idx = std::sync::Arc::clone(&idx);
                std::thread::spawn(move || idx.nearest(&[t as f64, 0.0, 0.0]).0)
            })
            .collect();
        for h in handles {
            h.join().unwrap();
        }
    }
}
