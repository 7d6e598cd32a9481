//! Synthetic scenes and motions at desk scale: dense point grids for
//! floor/wall/box/stair surfaces, and a procedurally animated 17-joint
//! skeleton whose feet alternate ground contact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geom::{MotionSequence, SceneCloud};

/// Joint layout of the synthetic skeleton (17 joints, root = pelvis).
pub const JOINT_COUNT: usize = 17;
pub const ROOT_INDEX: usize = 0;

/// Bone connectivity, used by the OBJ export.
pub const SKELETON_EDGES: [(usize, usize); 16] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    (2, 5),
    (5, 6),
    (6, 7),
    (2, 8),
    (8, 9),
    (9, 10),
    (0, 11),
    (11, 12),
    (12, 13),
    (0, 14),
    (14, 15),
    (15, 16),
];

const PELVIS: usize = 0;
const SPINE: usize = 1;
const CHEST: usize = 2;
const NECK: usize = 3;
const HEAD: usize = 4;
const L_SHOULDER: usize = 5;
const L_ELBOW: usize = 6;
const L_WRIST: usize = 7;
const R_SHOULDER: usize = 8;
const R_ELBOW: usize = 9;
const R_WRIST: usize = 10;
const L_HIP: usize = 11;
const L_KNEE: usize = 12;
const L_FOOT: usize = 13;
const R_HIP: usize = 14;
const R_KNEE: usize = 15;
const R_FOOT: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SceneTemplate {
    Corridor,
    RoomWithBox,
    Stairs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MotionTemplate {
    StraightWalk,
    Turn,
    SitOnBox,
}

impl std::str::FromStr for SceneTemplate {
    type Err = Error;
    fn from_str(s: &str) -> Result<SceneTemplate> {
        match s {
            "corridor" => Ok(SceneTemplate::Corridor),
            "room-with-box" => Ok(SceneTemplate::RoomWithBox),
            "stairs" => Ok(SceneTemplate::Stairs),
            other => Err(Error::InvalidParameter(format!(
                "unknown scene template {other:?} (corridor | room-with-box | stairs)"
            ))),
        }
    }
}

impl std::str::FromStr for MotionTemplate {
    type Err = Error;
    fn from_str(s: &str) -> Result<MotionTemplate> {
        match s {
            "straight-walk" => Ok(MotionTemplate::StraightWalk),
            "turn" => Ok(MotionTemplate::Turn),
            "sit-on-box" => Ok(MotionTemplate::SitOnBox),
            other => Err(Error::InvalidParameter(format!(
                "unknown motion template {other:?} (straight-walk | turn | sit-on-box)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SynthSpec {
    pub scene: SceneTemplate,
    pub motion: MotionTemplate,
    /// Scene grid spacing, meters (smaller = denser).
    pub spacing: f64,
    pub frames: usize,
    pub fps: f64,
    /// Gaussian jitter added to every joint coordinate.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> SynthSpec {
        SynthSpec {
            scene: SceneTemplate::Corridor,
            motion: MotionTemplate::StraightWalk,
            spacing: 0.1,
            frames: 90,
            fps: 30.0,
            noise: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.spacing <= 0.0 {
            return Err(Error::InvalidParameter("spacing must be positive".into()));
        }
        if self.frames < 1 {
            return Err(Error::InvalidParameter("frames must be at least 1".into()));
        }
        if self.fps <= 0.0 {
            return Err(Error::InvalidParameter("fps must be positive".into()));
        }
        if self.noise < 0.0 {
            return Err(Error::InvalidParameter("noise must be non-negative".into()));
        }
        Ok(())
    }
}

/// Geometry constants shared by scenes and motions.
const BOX_CENTER_X: f64 = 3.2;
const BOX_HALF: f64 = 0.4;
const BOX_TOP: f64 = 0.45;

struct GridSampler<'r> {
    spacing: f64,
    jitter: f64,
    rng: &'r mut ChaCha8Rng,
    points: Vec<[f64; 3]>,
}

impl<'r> GridSampler<'r> {
    fn new(spacing: f64, rng: &'r mut ChaCha8Rng) -> GridSampler<'r> {
        GridSampler {
            spacing,
            jitter: 0.3 * spacing,
            rng,
            points: Vec::new(),
        }
    }

    /// Rectangle with constant value on `fixed_axis`; jitter stays in-plane.
    fn plane(
        &mut self,
        fixed_axis: usize,
        fixed_value: f64,
        a_axis: usize,
        a0: f64,
        a1: f64,
        b_axis: usize,
        b0: f64,
        b1: f64,
    ) {
        let na = ((a1 - a0) / self.spacing).round() as usize + 1;
        let nb = ((b1 - b0) / self.spacing).round() as usize + 1;
        for i in 0..na {
            for j in 0..nb {
                let mut p = [0.0f64; 3];
                p[fixed_axis] = fixed_value;
                p[a_axis] =
                    a0 + i as f64 * self.spacing + self.rng.random_range(-self.jitter..self.jitter);
                p[b_axis] =
                    b0 + j as f64 * self.spacing + self.rng.random_range(-self.jitter..self.jitter);
                p[a_axis] = p[a_axis].clamp(a0, a1);
                p[b_axis] = p[b_axis].clamp(b0, b1);
                self.points.push(p);
            }
        }
    }
}

fn build_scene(template: SceneTemplate, spacing: f64, rng: &mut ChaCha8Rng) -> Result<SceneCloud> {
    let mut g = GridSampler::new(spacing, rng);
    match template {
        SceneTemplate::Corridor => {
            // floor strip along +x with two walls
            g.plane(2, 0.0, 0, -1.0, 8.0, 1, -1.2, 1.2);
            g.plane(1, -1.2, 0, -1.0, 8.0, 2, 0.0, 2.2);
            g.plane(1, 1.2, 0, -1.0, 8.0, 2, 0.0, 2.2);
        }
        SceneTemplate::RoomWithBox => {
            g.plane(2, 0.0, 0, -3.0, 5.0, 1, -3.0, 3.0);
            g.plane(0, -3.0, 1, -3.0, 3.0, 2, 0.0, 2.4);
            g.plane(0, 5.0, 1, -3.0, 3.0, 2, 0.0, 2.4);
            g.plane(1, -3.0, 0, -3.0, 5.0, 2, 0.0, 2.4);
            g.plane(1, 3.0, 0, -3.0, 5.0, 2, 0.0, 2.4);
            // box: top plus four sides
            let (cx, h) = (BOX_CENTER_X, BOX_HALF);
            g.plane(2, BOX_TOP, 0, cx - h, cx + h, 1, -h, h);
            g.plane(0, cx - h, 1, -h, h, 2, 0.0, BOX_TOP);
            g.plane(0, cx + h, 1, -h, h, 2, 0.0, BOX_TOP);
            g.plane(1, -h, 0, cx - h, cx + h, 2, 0.0, BOX_TOP);
            g.plane(1, h, 0, cx - h, cx + h, 2, 0.0, BOX_TOP);
        }
        SceneTemplate::Stairs => {
            // approach floor, then five steps climbing +x
            g.plane(2, 0.0, 0, -1.0, 2.0, 1, -1.5, 1.5);
            for s in 0..5 {
                let x0 = 2.0 + s as f64 * 0.3;
                let z = (s + 1) as f64 * 0.15;
                g.plane(2, z, 0, x0, x0 + 0.3, 1, -1.5, 1.5);
                g.plane(0, x0, 1, -1.5, 1.5, 2, z - 0.15, z);
            }
        }
    }
    SceneCloud::new(g.points)
}

/// Root path: position and heading per frame.
struct PathPlan {
    positions: Vec<[f64; 2]>,
    headings: Vec<f64>,
    /// Pelvis height per frame (sitting lowers it).
    pelvis_z: Vec<f64>,
    /// Frame after which stepping stops (sitting), if any.
    freeze_after: Option<usize>,
}

fn plan_path(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> PathPlan {
    let f = spec.frames;
    let dt = 1.0 / spec.fps;
    let walk_speed = rng.random_range(0.6..0.85);
    let mut positions = Vec::with_capacity(f);
    let mut headings = Vec::with_capacity(f);
    let mut pelvis_z = Vec::with_capacity(f);
    let mut freeze_after = None;

    let stand_height = rng.random_range(0.86..0.93);
    let mut pos;
    match spec.motion {
        MotionTemplate::StraightWalk => {
            let y0 = rng.random_range(-0.3..0.3);
            pos = [0.0, y0];
            for i in 0..f {
                positions.push(pos);
                headings.push(0.0);
                pelvis_z.push(stand_height);
                let _ = i;
                pos[0] += walk_speed * dt;
            }
        }
        MotionTemplate::Turn => {
            let angle = rng.random_range(0.5..1.1) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let turn_start = f / 3;
            let turn_len = (f / 3).max(1);
            let mut heading = 0.0;
            pos = [0.0, rng.random_range(-0.3..0.3)];
            for i in 0..f {
                positions.push(pos);
                headings.push(heading);
                pelvis_z.push(stand_height);
                if i >= turn_start && i < turn_start + turn_len {
                    heading += angle / turn_len as f64;
                }
                pos[0] += walk_speed * heading.cos() * dt;
                pos[1] += walk_speed * heading.sin() * dt;
            }
        }
        MotionTemplate::SitOnBox => {
            // approach the box from a seed-varied distance, stop, sit
            let start_x = BOX_CENTER_X - BOX_HALF - rng.random_range(1.2..2.2);
            let stop_x = BOX_CENTER_X - BOX_HALF - 0.15;
            let sit_frames = (0.8 * spec.fps) as usize;
            pos = [start_x, rng.random_range(-0.15..0.15)];
            let mut stopped_at: Option<usize> = None;
            for i in 0..f {
                positions.push(pos);
                headings.push(0.0);
                match stopped_at {
                    None => {
                        pelvis_z.push(stand_height);
                        pos[0] += walk_speed * dt;
                        if pos[0] >= stop_x {
                            pos[0] = stop_x;
                            stopped_at = Some(i + 1);
                        }
                    }
                    Some(s) => {
                        let k = ((i - s) as f64 / sit_frames as f64).min(1.0);
                        // ease down onto the box top
                        let eased = 0.5 - 0.5 * (std::f64::consts::PI * k).cos();
                        pelvis_z.push(stand_height + (BOX_TOP + 0.08 - stand_height) * eased);
                        // pelvis slides back over the box while sitting
                        pos[0] = stop_x + (BOX_CENTER_X - stop_x) * 0.55 * eased;
                    }
                }
            }
            freeze_after = stopped_at;
        }
    }
    PathPlan {
        positions,
        headings,
        pelvis_z,
        freeze_after,
    }
}

fn rot2(heading: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = heading.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Foot trajectories from a footstep schedule: alternating stance/swing with
/// step targets along the path. Returns per-frame positions for both feet.
fn plan_feet(plan: &PathPlan, fps: f64) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let f = plan.positions.len();
    let step_frames = ((0.5 * fps) as usize).max(2);
    let lateral = 0.11;
    let foot_z = 0.015;
    let lift = 0.09;

    let stance_at = |frame: usize, side: usize| -> [f64; 3] {
        let frame = frame.min(f - 1);
        let p = plan.positions[frame];
        let h = plan.headings[frame];
        let side_sign = if side == 0 { 1.0 } else { -1.0 };
        let off = rot2(h, [0.0, side_sign * lateral]);
        [p[0] + off[0], p[1] + off[1], foot_z]
    };

    let freeze = plan.freeze_after.unwrap_or(usize::MAX);
    let mut feet = (Vec::with_capacity(f), Vec::with_capacity(f));
    for side in 0..2 {
        // landing after half-cycle k happens at frame (k+1)*step_frames,
        // leading the root slightly
        let out = if side == 0 { &mut feet.0 } else { &mut feet.1 };
        let mut planted = stance_at(0, side);
        let mut swing_start = planted;
        for frame in 0..f {
            let half_cycle = frame / step_frames;
            let phase = (frame % step_frames) as f64 / step_frames as f64;
            let swinging = half_cycle % 2 == side && frame < freeze;
            if swinging {
                if frame % step_frames == 0 {
                    swing_start = planted;
                    let land_frame = (half_cycle + 1) * step_frames + step_frames / 2;
                    planted = stance_at(land_frame, side);
                }
                // smoothstep horizontal, sine lift vertical
                let s = phase * phase * (3.0 - 2.0 * phase);
                let x = swing_start[0] + (planted[0] - swing_start[0]) * s;
                let y = swing_start[1] + (planted[1] - swing_start[1]) * s;
                let z = foot_z + lift * (std::f64::consts::PI * phase).sin();
                out.push([x, y, z]);
            } else {
                out.push(planted);
            }
        }
    }
    feet
}

/// Procedural skeleton animation for one spec. Deterministic under the seed.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<(SceneCloud, MotionSequence)> {
    spec.validate()?;
    let mut scene_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    scene_rng.set_stream(1);
    let scene = build_scene(spec.scene, spec.spacing, &mut scene_rng)?;

    let mut motion_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    motion_rng.set_stream(2);
    let plan = plan_path(spec, &mut motion_rng);
    let (left_foot, right_foot) = plan_feet(&plan, spec.fps);

    let f = spec.frames;
    let step_frames = ((0.5 * spec.fps) as usize).max(2);
    let mut frames = Vec::with_capacity(f);
    for i in 0..f {
        let p = plan.positions[i];
        let h = plan.headings[i];
        let pz = plan.pelvis_z[i];
        let moving = plan.freeze_after.map_or(true, |s| i < s);
        let cycle = i as f64 / step_frames as f64 * std::f64::consts::PI;
        let bob = if moving { 0.012 * (2.0 * cycle).sin() } else { 0.0 };
        let sway = if moving { 0.25 * cycle.sin() } else { 0.0 };

        let at = |forward: f64, side: f64, z: f64| -> [f64; 3] {
            let o = rot2(h, [forward, side]);
            [p[0] + o[0], p[1] + o[1], z]
        };

        let pelvis = at(0.0, 0.0, pz + bob);
        // sitting folds the torso slightly forward
        let seated = !moving;
        let lean = if seated { 0.08 } else { 0.02 };
        let spine = at(lean * 0.5, 0.0, pelvis[2] + 0.15);
        let chest = at(lean, 0.0, pelvis[2] + 0.35);
        let neck = at(lean, 0.0, pelvis[2] + 0.50);
        let head = at(lean, 0.0, pelvis[2] + 0.62);

        let arm_swing = if moving { 0.16 * sway } else { 0.0 };
        let l_shoulder = at(lean, 0.18, chest[2] + 0.03);
        let r_shoulder = at(lean, -0.18, chest[2] + 0.03);
        let l_elbow = at(lean + arm_swing, 0.22, chest[2] - 0.22);
        let r_elbow = at(lean - arm_swing, -0.22, chest[2] - 0.22);
        let l_wrist = at(lean + 2.2 * arm_swing, 0.24, chest[2] - 0.45);
        let r_wrist = at(lean - 2.2 * arm_swing, -0.24, chest[2] - 0.45);

        let l_hip = at(0.0, 0.10, pelvis[2] - 0.05);
        let r_hip = at(0.0, -0.10, pelvis[2] - 0.05);
        let lf = left_foot[i];
        let rf = right_foot[i];
        let knee = |hip: [f64; 3], foot: [f64; 3]| -> [f64; 3] {
            // midpoint pushed toward the heading; more bend when the foot is
            // lifted or the body is seated
            let bend = 0.06 + 1.2 * (foot[2] - 0.015).max(0.0) + if seated { 0.22 } else { 0.0 };
            let fwd = rot2(h, [bend, 0.0]);
            [
                0.5 * (hip[0] + foot[0]) + fwd[0],
                0.5 * (hip[1] + foot[1]) + fwd[1],
                0.5 * (hip[2] + foot[2]),
            ]
        };
        let l_knee = knee(l_hip, lf);
        let r_knee = knee(r_hip, rf);

        let mut joints = vec![[0.0; 3]; JOINT_COUNT];
        joints[PELVIS] = pelvis;
        joints[SPINE] = spine;
        joints[CHEST] = chest;
        joints[NECK] = neck;
        joints[HEAD] = head;
        joints[L_SHOULDER] = l_shoulder;
        joints[L_ELBOW] = l_elbow;
        joints[L_WRIST] = l_wrist;
        joints[R_SHOULDER] = r_shoulder;
        joints[R_ELBOW] = r_elbow;
        joints[R_WRIST] = r_wrist;
        joints[L_HIP] = l_hip;
        joints[L_KNEE] = l_knee;
        joints[L_FOOT] = lf;
        joints[R_HIP] = r_hip;
        joints[R_KNEE] = r_knee;
        joints[R_FOOT] = rf;
        frames.push(joints);
    }

    if spec.noise > 0.0 {
        let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed);
        noise_rng.set_stream(3);
        let dist = Normal::new(0.0, spec.noise)
            .map_err(|_| Error::InvalidParameter("invalid noise level".into()))?;
        for frame in &mut frames {
            for joint in frame.iter_mut() {
                for c in joint.iter_mut() {
                    *c += dist.sample(&mut noise_rng);
                }
            }
        }
    }

    let motion = MotionSequence::new(frames, spec.fps, ROOT_INDEX)?;
    Ok((scene, motion))
}

/// A mixed dataset cycling the three template pairs with per-sample seeds:
/// corridor walks, room turns, and walk-to-box-and-sit sequences.
pub fn generate_dataset(
    count: usize,
    frames: usize,
    spacing: f64,
    fps: f64,
    base_seed: u64,
) -> Result<Vec<(SceneCloud, MotionSequence)>> {
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let (scene, motion) = match i % 3 {
            0 => (SceneTemplate::Corridor, MotionTemplate::StraightWalk),
            1 => (SceneTemplate::RoomWithBox, MotionTemplate::Turn),
            _ => (SceneTemplate::RoomWithBox, MotionTemplate::SitOnBox),
        };
        let spec = SynthSpec {
            scene,
            motion,
            spacing,
            frames,
            fps,
            noise: 0.0,
            seed: base_seed.wrapping_add(i as u64),
        };
        out.push(generate_synthetic(&spec)?);
    }
    Ok(out)
}
