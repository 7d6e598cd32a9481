//! Command-line pipeline: synthetic data generation, stage-wise training,
//! forecasting, evaluation, track refinement, and OBJ export.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use camf::autodiff::Array;
use camf::error::{Error, Result};
use camf::geom::MotionSequence;
use camf::io::{self, synth};
use camf::nets::{forecast, ContactNet, MotionNet};
use camf::refine::{refine_global, refine_pose, BodyModel, EnergyRecord, SphereSkeleton};
use camf::train::{
    evaluate, train_contact_stage, train_motion_stage_with, ContactConditioning, ContactSource,
    Sample, TrainConfig,
};

#[derive(Parser)]
#[command(
    name = "camf",
    version,
    about = "Contact-aware 3D human motion forecasting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Key-value configuration file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Contact-map normalizing factor, meters.
    #[arg(long)]
    sigma: Option<f64>,
    /// Contact threshold for point extraction.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Kept DCT coefficients per contact channel.
    #[arg(long = "dct-l")]
    dct_l: Option<usize>,
    /// Observed frames.
    #[arg(long)]
    past: Option<usize>,
    /// Predicted frames.
    #[arg(long)]
    future: Option<usize>,
    /// Run seed (fallback: CAMF_SEED, then 0).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Learning rate of the stage being trained.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long = "voxel-r")]
    voxel_r: Option<usize>,
    #[arg(long = "sample-count")]
    sample_count: Option<usize>,
    #[arg(long = "sample-radius")]
    sample_radius: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => TrainConfig::load(path)?,
            None => {
                let mut c = TrainConfig::default();
                if let Ok(v) = std::env::var("CAMF_SEED") {
                    c.seed = v.parse().map_err(|_| {
                        Error::InvalidParameter(format!("CAMF_SEED is not an integer: {v:?}"))
                    })?;
                }
                c
            }
        };
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = self.dct_l {
            cfg.dct_l = v;
        }
        if let Some(v) = self.past {
            cfg.past = v;
        }
        if let Some(v) = self.future {
            cfg.future = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.hidden {
            cfg.hidden = v;
        }
        if let Some(v) = self.voxel_r {
            cfg.voxel_r = v;
        }
        if let Some(v) = self.sample_count {
            cfg.sample_count = v;
        }
        if let Some(v) = self.sample_radius {
            cfg.sample_radius = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene/motion pair, or a dataset directory.
    GenSynth {
        /// Motion template: straight-walk | turn | sit-on-box.
        #[arg(long, default_value = "straight-walk")]
        template: String,
        /// Scene template: corridor | room-with-box | stairs.
        #[arg(long, default_value = "corridor")]
        scene: String,
        #[arg(long, default_value_t = 90)]
        frames: usize,
        /// Scene grid spacing, meters.
        #[arg(long, default_value_t = 0.1)]
        spacing: f64,
        /// Joint jitter (Gaussian sigma, meters).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// Single-pair mode outputs.
        #[arg(long = "out-scene")]
        out_scene: Option<PathBuf>,
        #[arg(long = "out-motion")]
        out_motion: Option<PathBuf>,
        /// Dataset mode: write `count` template-cycling pairs into a directory.
        #[arg(long = "out-dir")]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Train the contact prediction network.
    TrainContact {
        #[arg(long = "data-dir")]
        data_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "loss-log")]
        loss_log: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Train the motion forecasting network (ground-truth contact points).
    TrainMotion {
        #[arg(long = "data-dir")]
        data_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "loss-log")]
        loss_log: Option<PathBuf>,
        /// Train the contact-ablated variant (all-zero contact points).
        #[arg(long = "ablate-contacts", default_value_t = false)]
        ablate_contacts: bool,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Forecast future motion for one scene + observed motion.
    Predict {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        motion: PathBuf,
        #[arg(long = "contact-ckpt")]
        contact_ckpt: PathBuf,
        #[arg(long = "motion-ckpt")]
        motion_ckpt: PathBuf,
        #[arg(long = "out-motion")]
        out_motion: PathBuf,
        /// Contact points extracted from the predicted maps, CSV.
        #[arg(long = "out-contacts")]
        out_contacts: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Evaluate trained networks over a dataset directory.
    Eval {
        #[arg(long = "data-dir")]
        data_dir: PathBuf,
        #[arg(long = "contact-ckpt")]
        contact_ckpt: PathBuf,
        #[arg(long = "motion-ckpt")]
        motion_ckpt: PathBuf,
        /// predicted | gt | zero
        #[arg(long = "contact-source", default_value = "predicted")]
        contact_source: String,
        #[arg(long = "out-csv")]
        out_csv: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Two-stage temporal refinement of a jittery track.
    Refine {
        #[arg(long)]
        track: PathBuf,
        /// Directory of per-frame observation clouds (sorted by name).
        #[arg(long = "obs-dir")]
        obs_dir: PathBuf,
        #[arg(long = "out-track")]
        out_track: PathBuf,
        #[arg(long = "energy-csv")]
        energy_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 300)]
        iters: usize,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
    },
    /// Write per-frame OBJ files (scene points + skeleton lines).
    ExportViz {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        motion: PathBuf,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
    },
}

fn env_seed(explicit: Option<u64>) -> Result<u64> {
    if let Some(s) = explicit {
        return Ok(s);
    }
    match std::env::var("CAMF_SEED") {
        Ok(v) => v
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("CAMF_SEED is not an integer: {v:?}"))),
        Err(_) => Ok(0),
    }
}

/// Pairs `<prefix>_scene.*` with `<prefix>_motion.*`, sorted by prefix.
fn load_dataset(dir: &Path) -> Result<Vec<Sample>> {
    let mut scenes: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut motions: BTreeMap<String, PathBuf> = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        if let Some(prefix) = stem.strip_suffix("_scene") {
            scenes.insert(prefix.to_string(), path.clone());
        } else if let Some(prefix) = stem.strip_suffix("_motion") {
            motions.insert(prefix.to_string(), path.clone());
        }
    }
    let mut samples = Vec::new();
    for (prefix, scene_path) in &scenes {
        let Some(motion_path) = motions.get(prefix) else {
            return Err(Error::InvalidInput(format!(
                "dataset entry {prefix:?} has a scene file but no motion file"
            )));
        };
        samples.push(Sample {
            scene: io::load_scene(scene_path)?,
            motion: io::load_motion(motion_path)?,
        });
    }
    if samples.is_empty() {
        return Err(Error::InvalidInput(format!(
            "no `*_scene` / `*_motion` pairs found in {}",
            dir.display()
        )));
    }
    Ok(samples)
}

fn contacts_csv(entries: &Array) -> String {
    let mut s = String::from("frame,joint,x,y,z,contact\n");
    let (t, j) = (entries.shape()[0], entries.shape()[1]);
    for ti in 0..t {
        for ji in 0..j {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                ti,
                ji,
                entries.at(&[ti, ji, 0]),
                entries.at(&[ti, ji, 1]),
                entries.at(&[ti, ji, 2]),
                entries.at(&[ti, ji, 3]) as u8
            ));
        }
    }
    s
}

fn energy_csv(stage1: &[EnergyRecord], stage2: &[EnergyRecord]) -> String {
    let mut s = String::from("stage,iteration,data_term,smoothness,total\n");
    for (stage, trace) in [(1, stage1), (2, stage2)] {
        for r in trace {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                stage, r.iteration, r.data_term, r.smoothness, r.total
            ));
        }
    }
    s
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSynth {
            template,
            scene,
            frames,
            spacing,
            noise,
            seed,
            out_scene,
            out_motion,
            out_dir,
            count,
        } => {
            let seed = env_seed(seed)?;
            if let Some(dir) = out_dir {
                let count = count.unwrap_or(20);
                std::fs::create_dir_all(&dir)?;
                let pairs = synth::generate_dataset(count, frames, spacing, 30.0, seed)?;
                for (i, (scene, motion)) in pairs.iter().enumerate() {
                    io::save_scene(scene, &dir.join(format!("sample_{i:03}_scene.cams")))?;
                    io::save_motion(motion, &dir.join(format!("sample_{i:03}_motion.camm")))?;
                }
                eprintln!("wrote {count} sample pairs to {}", dir.display());
                return Ok(());
            }
            let spec = synth::SynthSpec {
                scene: scene.parse()?,
                motion: template.parse()?,
                spacing,
                frames,
                fps: 30.0,
                noise,
                seed,
            };
            let (scene, motion) = synth::generate_synthetic(&spec)?;
            let out_scene = out_scene
                .ok_or_else(|| Error::InvalidParameter("--out-scene is required".into()))?;
            let out_motion = out_motion
                .ok_or_else(|| Error::InvalidParameter("--out-motion is required".into()))?;
            io::save_scene(&scene, &out_scene)?;
            io::save_motion(&motion, &out_motion)?;
            eprintln!(
                "wrote {} scene points and {} frames",
                scene.len(),
                motion.num_frames()
            );
            Ok(())
        }
        Command::TrainContact {
            data_dir,
            out,
            loss_log,
            config,
        } => {
            let mut cfg = config.resolve()?;
            if let Some(lr) = config.lr {
                cfg.lr_contact = lr;
            }
            let dataset = load_dataset(&data_dir)?;
            eprintln!(
                "training contact net: {} samples, {} epochs, lr {}",
                dataset.len(),
                cfg.epochs,
                cfg.lr_contact
            );
            let (net, log) = train_contact_stage(&dataset, &cfg)?;
            net.save(&out)?;
            if let Some(path) = loss_log {
                log.write_to(&path)?;
            }
            eprintln!(
                "done: first epoch loss {:.6}, last {:.6}",
                log.per_epoch.first().unwrap_or(&f64::NAN),
                log.per_epoch.last().unwrap_or(&f64::NAN)
            );
            Ok(())
        }
        Command::TrainMotion {
            data_dir,
            out,
            loss_log,
            ablate_contacts,
            config,
        } => {
            let mut cfg = config.resolve()?;
            if let Some(lr) = config.lr {
                cfg.lr_motion = lr;
            }
            let dataset = load_dataset(&data_dir)?;
            let conditioning = if ablate_contacts {
                ContactConditioning::Zeroed
            } else {
                ContactConditioning::GroundTruth
            };
            eprintln!(
                "training motion net: {} samples, {} epochs, lr {}, contacts {:?}",
                dataset.len(),
                cfg.epochs,
                cfg.lr_motion,
                conditioning
            );
            let (net, log) = train_motion_stage_with(&dataset, &cfg, conditioning)?;
            net.save(&out)?;
            if let Some(path) = loss_log {
                log.write_to(&path)?;
            }
            eprintln!(
                "done: first epoch loss {:.6}, last {:.6}",
                log.per_epoch.first().unwrap_or(&f64::NAN),
                log.per_epoch.last().unwrap_or(&f64::NAN)
            );
            Ok(())
        }
        Command::Predict {
            scene,
            motion,
            contact_ckpt,
            motion_ckpt,
            out_motion,
            out_contacts,
            config,
        } => {
            let cfg = config.resolve()?;
            let scene = io::load_scene(&scene)?;
            let full = io::load_motion(&motion)?;
            if full.num_frames() < cfg.past {
                return Err(Error::InvalidInput(format!(
                    "motion has {} frames but the run needs {} observed frames",
                    full.num_frames(),
                    cfg.past
                )));
            }
            if full.num_frames() > cfg.past {
                eprintln!(
                    "note: using the first {} of {} frames as the observation",
                    cfg.past,
                    full.num_frames()
                );
            }
            let observed = full.window(0, cfg.past)?;
            let anchor = observed.root_at(cfg.past - 1);
            let sampled = camf::geom::sample_scene_points(
                &scene,
                &anchor,
                cfg.sample_radius,
                cfg.sample_count,
                cfg.seed,
            )?;
            let contact_net = ContactNet::load(&contact_ckpt)?;
            let motion_net = MotionNet::load(&motion_ckpt)?;
            let out = forecast(
                &sampled,
                &observed,
                &contact_net,
                &motion_net,
                cfg.sigma,
                cfg.epsilon,
            )?;
            io::save_motion(&out.motion, &out_motion)?;
            if let Some(path) = out_contacts {
                std::fs::write(path, contacts_csv(out.contact_points.entries()))?;
            }
            eprintln!("wrote {} predicted frames", out.motion.num_frames());
            Ok(())
        }
        Command::Eval {
            data_dir,
            contact_ckpt,
            motion_ckpt,
            contact_source,
            out_csv,
            config,
        } => {
            let cfg = config.resolve()?;
            let source = match contact_source.as_str() {
                "predicted" => ContactSource::Predicted,
                "gt" => ContactSource::GroundTruth,
                "zero" => ContactSource::Zeroed,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown contact source {other:?} (predicted | gt | zero)"
                    )))
                }
            };
            let dataset = load_dataset(&data_dir)?;
            let contact_net = ContactNet::load(&contact_ckpt)?;
            let motion_net = MotionNet::load(&motion_ckpt)?;
            let report = evaluate(&dataset, &contact_net, &motion_net, &cfg, source)?;
            print!("{}", report.table());
            if let Some(path) = out_csv {
                std::fs::write(path, report.csv())?;
            }
            Ok(())
        }
        Command::Refine {
            track,
            obs_dir,
            out_track,
            energy_csv: energy_csv_path,
            iters,
            lr,
        } => {
            let track_file = io::load_track(&track)?;
            let body = SphereSkeleton::default_humanoid();
            if track_file.dof() != body.dof() {
                return Err(Error::InvalidInput(format!(
                    "track has {} pose parameters but the body model expects {}",
                    track_file.dof(),
                    body.dof()
                )));
            }
            let mut files: Vec<PathBuf> = std::fs::read_dir(&obs_dir)?
                .collect::<std::io::Result<Vec<_>>>()?
                .into_iter()
                .map(|e| e.path())
                .filter(|p| p.is_file())
                .collect();
            files.sort();
            if files.len() != track_file.len() {
                return Err(Error::InvalidInput(format!(
                    "{} observation files for a {}-frame track",
                    files.len(),
                    track_file.len()
                )));
            }
            let mut frames = Vec::with_capacity(files.len());
            for f in &files {
                let cloud = io::load_scene(f)?;
                let mut data = Vec::with_capacity(cloud.len() * 3);
                for p in cloud.points() {
                    data.extend_from_slice(p);
                }
                frames.push(Array::from_vec(&[cloud.len(), 3], data)?);
            }
            let observations = camf::refine::ObservationSet::new(frames)?;
            let beta = Array::full(&[body.num_joints()], 1.0);
            eprintln!("stage 1: global orientation/translation ({iters} iterations)");
            let (refined_global, trace1) = refine_global(
                &track_file.global,
                &track_file.poses,
                &beta,
                &body,
                &observations,
                iters,
                lr,
            )?;
            eprintln!("stage 2: pose parameters ({iters} iterations)");
            let (refined_poses, trace2) = refine_pose(
                &track_file.poses,
                &refined_global,
                &beta,
                &body,
                &observations,
                iters,
                lr,
            )?;
            let refined = io::TrackFile::new(refined_global, refined_poses, track_file.fps)?;
            io::save_track(&refined, &out_track)?;
            if let Some(path) = energy_csv_path {
                std::fs::write(path, energy_csv(&trace1, &trace2))?;
            }
            let (e0, e1) = (
                trace1.first().map_or(f64::NAN, |r| r.total),
                trace2.last().map_or(f64::NAN, |r| r.total),
            );
            eprintln!("energy: {e0:.6} -> {e1:.6}");
            Ok(())
        }
        Command::ExportViz {
            scene,
            motion,
            out_dir,
        } => {
            let scene = io::load_scene(&scene)?;
            let motion: MotionSequence = io::load_motion(&motion)?;
            io::export_viz(&scene, &motion, &out_dir)?;
            eprintln!(
                "wrote {} OBJ frames to {}",
                motion.num_frames(),
                out_dir.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
