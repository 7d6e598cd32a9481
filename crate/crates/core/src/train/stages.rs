//! Stage-wise training: the contact predictor and the motion forecaster are
//! separate optimization problems. Per-sequence (batch-1) Adam updates,
//! dataset order shuffled per epoch under the run seed, per-sample scene
//! sampling derived from the run seed so cached targets stay fixed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

use super::config::TrainConfig;
use super::loss;
use crate::autodiff::{adam_step, AdamState, Array, BoundParams, Tape};
use crate::error::{Error, Result};
use crate::geom::{
    contact_sequence, extract_contact_points_range, sample_scene_points, ContactPointSet,
    MotionSequence, SceneCloud,
};
use crate::nets::{
    assemble_global_joints, contact_forward, motion_forward, ContactArch, ContactInputs,
    ContactNet, MotionArch, MotionInputs, MotionNet,
};

/// One training/evaluation item: a scene plus a motion of P+T frames.
#[derive(Clone, Debug)]
pub struct Sample {
    pub scene: SceneCloud,
    pub motion: MotionSequence,
}

pub type Dataset = Vec<Sample>;

/// Per-step and per-epoch loss trace of one training stage.
#[derive(Clone, Debug, Default)]
pub struct TrainLog {
    pub per_step: Vec<f64>,
    pub per_epoch: Vec<f64>,
}

impl TrainLog {
    /// One `epoch <i> mean_loss <v>` line per epoch.
    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut s = String::new();
        for (i, v) in self.per_epoch.iter().enumerate() {
            s.push_str(&format!("epoch {i} mean_loss {v:.12e}\n"));
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// How the motion stage obtains its conditioning contact points.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContactConditioning {
    /// Extracted from ground-truth contact maps at the run threshold.
    GroundTruth,
    /// All-zero contact points (contact-ablated model).
    Zeroed,
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn shuffled(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    order
}

fn check_dataset(dataset: &Dataset, cfg: &TrainConfig) -> Result<usize> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let j = dataset[0].motion.num_joints();
    for (i, s) in dataset.iter().enumerate() {
        if s.motion.num_frames() != cfg.past + cfg.future {
            return Err(Error::InvalidInput(format!(
                "sample {i} has {} frames, expected past+future = {}",
                s.motion.num_frames(),
                cfg.past + cfg.future
            )));
        }
        if s.motion.num_joints() != j {
            return Err(Error::InvalidInput(format!(
                "sample {i} has {} joints, expected {j}",
                s.motion.num_joints()
            )));
        }
    }
    Ok(j)
}

/// Scene points sampled around the last observed root of one sample,
/// deterministic in (run seed, sample index).
pub fn sampled_scene_for(sample: &Sample, cfg: &TrainConfig, index: usize) -> Result<SceneCloud> {
    let anchor = sample.motion.root_at(cfg.past - 1);
    sample_scene_points(
        &sample.scene,
        &anchor,
        cfg.sample_radius,
        cfg.sample_count,
        cfg.seed.wrapping_add(index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
    )
}

struct PreparedContact {
    inputs: ContactInputs,
    gt_maps: Array,
}

/// Train the contact prediction network by minimizing the map loss with
/// Adam at `lr_contact`.
pub fn train_contact_stage(dataset: &Dataset, cfg: &TrainConfig) -> Result<(ContactNet, TrainLog)> {
    cfg.validate()?;
    let joints = check_dataset(dataset, cfg)?;
    let arch = ContactArch {
        joints,
        dct_l: cfg.dct_l,
        hidden: cfg.hidden,
        voxel_r: cfg.voxel_r,
    };
    let mut prepared = Vec::with_capacity(dataset.len());
    for (i, sample) in dataset.iter().enumerate() {
        let scene = sampled_scene_for(sample, cfg, i)?;
        let gt = contact_sequence(&sample.motion, &scene, cfg.sigma)?;
        let past_maps = gt.window(0, cfg.past)?;
        let observed = sample.motion.window(0, cfg.past)?;
        let inputs = ContactInputs::prepare(&scene, &past_maps, &observed, cfg.future, &arch)?;
        prepared.push(PreparedContact {
            inputs,
            gt_maps: gt.values().clone(),
        });
    }

    let mut net = ContactNet::new(arch, cfg.seed);
    let mut adam = AdamState::new(cfg.lr_contact);
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let mut rng = stream_rng(cfg.seed, 1_000 + epoch as u64);
        let mut epoch_sum = 0.0;
        for &i in &shuffled(prepared.len(), &mut rng) {
            let item = &prepared[i];
            let tape = Tape::new();
            let bound = BoundParams::bind(&tape, &net.params);
            let pred = contact_forward(&tape, &bound, &net.arch, &item.inputs)?;
            let gt = tape.constant(item.gt_maps.clone());
            let l = loss::loss_map_tape(&pred, &gt)?;
            l.backward()?;
            adam_step(&mut net.params, &bound.grads(), &mut adam);
            let lv = l.value().item();
            log.per_step.push(lv);
            epoch_sum += lv;
        }
        log.per_epoch.push(epoch_sum / prepared.len() as f64);
    }
    Ok((net, log))
}

struct PreparedMotion {
    inputs: MotionInputs,
    gt_roots: Array,
    gt_locals: Array,
    contacts: ContactPointSet,
}

/// Ground-truth contact points of a sample: extracted from its ground-truth
/// contact maps over the future frames at the run threshold.
pub fn ground_truth_contacts(
    sample: &Sample,
    scene: &SceneCloud,
    cfg: &TrainConfig,
) -> Result<ContactPointSet> {
    let gt = contact_sequence(&sample.motion, scene, cfg.sigma)?;
    extract_contact_points_range(gt.values(), scene, cfg.epsilon, cfg.past, cfg.future)
}

fn prepare_motion(
    dataset: &Dataset,
    cfg: &TrainConfig,
    arch: &MotionArch,
    conditioning: ContactConditioning,
) -> Result<Vec<PreparedMotion>> {
    let mut prepared = Vec::with_capacity(dataset.len());
    for (i, sample) in dataset.iter().enumerate() {
        let contacts = match conditioning {
            ContactConditioning::GroundTruth => {
                let scene = sampled_scene_for(sample, cfg, i)?;
                ground_truth_contacts(sample, &scene, cfg)?
            }
            ContactConditioning::Zeroed => {
                ContactPointSet::zeros(cfg.future, sample.motion.num_joints())
            }
        };
        let observed = sample.motion.window(0, cfg.past)?;
        let future = sample.motion.window(cfg.past, cfg.future)?;
        let inputs = MotionInputs::prepare(&observed, &contacts, arch)?;
        prepared.push(PreparedMotion {
            inputs,
            gt_roots: future.roots(),
            gt_locals: future.local_poses(),
            contacts,
        });
    }
    Ok(prepared)
}

/// Train the motion forecasting network (root MLP + local decoder jointly)
/// with Adam at `lr_motion`, conditioned on ground-truth contact points (or
/// zeros for the ablated model).
pub fn train_motion_stage_with(
    dataset: &Dataset,
    cfg: &TrainConfig,
    conditioning: ContactConditioning,
) -> Result<(MotionNet, TrainLog)> {
    cfg.validate()?;
    let joints = check_dataset(dataset, cfg)?;
    let arch = MotionArch {
        joints,
        hidden: cfg.hidden,
        past: cfg.past,
        future: cfg.future,
        root_dct_l: cfg.root_dct_l,
    };
    let prepared = prepare_motion(dataset, cfg, &arch, conditioning)?;
    let root_index = dataset[0].motion.root_index();

    let mut net = MotionNet::new(arch, cfg.seed.wrapping_add(1));
    let mut adam = AdamState::new(cfg.lr_motion);
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let mut rng = stream_rng(cfg.seed, 2_000 + epoch as u64);
        let mut epoch_sum = 0.0;
        for &i in &shuffled(prepared.len(), &mut rng) {
            let item = &prepared[i];
            let tape = Tape::new();
            let bound = BoundParams::bind(&tape, &net.params);
            let (roots, locals) = motion_forward(&tape, &bound, &net.arch, &item.inputs)?;
            let gt_roots = tape.constant(item.gt_roots.clone());
            let gt_locals = tape.constant(item.gt_locals.clone());
            let l_root = loss::loss_root_tape(&roots, &gt_roots)?;
            let l_local = loss::loss_local_tape(&locals, &gt_locals)?;
            let globals = assemble_global_joints(&tape, &roots, &locals, root_index)?;
            let l_contact = loss::loss_contact_tape(&tape, &globals, &item.contacts)?;
            let l = loss::loss_motion_tape(&l_root, &l_local, &l_contact, cfg.lambdas())?;
            l.backward()?;
            adam_step(&mut net.params, &bound.grads(), &mut adam);
            let lv = l.value().item();
            log.per_step.push(lv);
            epoch_sum += lv;
        }
        log.per_epoch.push(epoch_sum / prepared.len() as f64);
    }
    Ok((net, log))
}

/// Standard stage-2 training: ground-truth contact points as conditioning.
pub fn train_motion_stage(dataset: &Dataset, cfg: &TrainConfig) -> Result<(MotionNet, TrainLog)> {
    train_motion_stage_with(dataset, cfg, ContactConditioning::GroundTruth)
}
