//! File formats, synthetic data generation, and visualization export.

pub mod motion_file;
pub mod scene_file;
pub mod synth;
pub mod track_file;
pub mod viz;

pub use motion_file::{load_motion, save_motion};
pub use scene_file::{load_scene, save_scene};
pub use synth::{
    generate_dataset, generate_synthetic, MotionTemplate, SceneTemplate, SynthSpec, JOINT_COUNT,
    ROOT_INDEX, SKELETON_EDGES,
};
pub use track_file::{load_track, save_track, TrackFile};
pub use viz::export_viz;
