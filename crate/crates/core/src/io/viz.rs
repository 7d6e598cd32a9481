//! Per-frame OBJ export: scene points as `p` elements, skeleton bones as `l`
//! line elements. Any mesh viewer opens the result.

use std::path::Path;

use super::synth::SKELETON_EDGES;
use crate::error::{Error, Result};
use crate::geom::{MotionSequence, SceneCloud};

pub fn frame_to_obj(scene: &SceneCloud, joints: &[[f64; 3]]) -> String {
    let mut s = String::with_capacity((scene.len() + joints.len()) * 24);
    s.push_str("# scene points + skeleton line set\n");
    for p in scene.points() {
        s.push_str(&format!("v {} {} {}\n", p[0], p[1], p[2]));
    }
    for j in joints {
        s.push_str(&format!("v {} {} {}\n", j[0], j[1], j[2]));
    }
    for i in 1..=scene.len() {
        s.push_str(&format!("p {i}\n"));
    }
    let base = scene.len();
    for (a, b) in SKELETON_EDGES {
        if a < joints.len() && b < joints.len() {
            s.push_str(&format!("l {} {}\n", base + a + 1, base + b + 1));
        }
    }
    s
}

/// Writes `frame_0000.obj`, `frame_0001.obj`, ... into `dir`.
pub fn export_viz(scene: &SceneCloud, motion: &MotionSequence, dir: &Path) -> Result<()> {
    if !dir.exists() {
        std::fs::create_dir_all(dir)?;
    }
    if !dir.is_dir() {
        return Err(Error::InvalidInput(format!(
            "{} is not a directory",
            dir.display()
        )));
    }
    for f in 0..motion.num_frames() {
        let obj = frame_to_obj(scene, motion.frame(f));
        std::fs::write(dir.join(format!("frame_{f:04}.obj")), obj)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn obj_counts_match() {
        let scene = SceneCloud::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap();
        let joints = vec![[0.0, 0.0, 1.0]; super::super::synth::JOINT_COUNT];
        let obj = frame_to_obj(&scene, &joints);
        let v = obj.lines().filter(|l| l.starts_with("v ")).count();
        let p = obj.lines().filter(|l| l.starts_with("p ")).count();
        let l = obj.lines().filter(|l| l.starts_with("l ")).count();
        assert_eq!(v, 2 + joints.len());
        assert_eq!(p, 2);
        assert_eq!(l, SKELETON_EDGES.len());
    }
}
