//! Evaluation: full inference per sample, MPJPE aggregation over a dataset.

use super::config::TrainConfig;
use super::metrics::{summarize, HorizonErrors};
use super::stages::{ground_truth_contacts, sampled_scene_for, Dataset};
use crate::error::{Error, Result};
use crate::geom::{contact_sequence, extract_contact_points_range, ContactPointSet};
use crate::nets::{ContactNet, MotionNet};

/// Where evaluation takes its conditioning contact points from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContactSource {
    /// Predicted contact maps -> extracted points (the full pipeline).
    Predicted,
    /// Points extracted from ground-truth maps.
    GroundTruth,
    /// All-zero contact points.
    Zeroed,
}

/// Aggregated path/pose errors (millimeters) over a dataset.
#[derive(Clone, Debug)]
pub struct EvalReport {
    pub path: HorizonErrors,
    pub pose: HorizonErrors,
    pub samples: usize,
    pub contact_source: ContactSource,
}

impl EvalReport {
    /// Aligned text table, Path/Pose rows by horizon.
    pub fn table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "{:<6} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            "metric", "0.5s", "1.0s", "1.5s", "2.0s", "mean"
        ));
        let fmt_row = |name: &str, h: &HorizonErrors| {
            let mut row = format!("{name:<6}");
            for (_, v) in &h.at {
                match v {
                    Some(e) => row.push_str(&format!(" {e:>8.1}")),
                    None => row.push_str(&format!(" {:>8}", "-")),
                }
            }
            row.push_str(&format!(" {:>8.1}\n", h.mean));
            row
        };
        s.push_str(&fmt_row("path", &self.path));
        s.push_str(&fmt_row("pose", &self.pose));
        s
    }

    /// CSV rows matching the table layout: metric,0.5s,1.0s,1.5s,2.0s,mean.
    pub fn csv(&self) -> String {
        let mut s = String::from("metric,0.5s,1.0s,1.5s,2.0s,mean\n");
        let fmt_row = |name: &str, h: &HorizonErrors| {
            let mut row = String::from(name);
            for (_, v) in &h.at {
                row.push(',');
                if let Some(e) = v {
                    row.push_str(&format!("{e:.3}"));
                }
            }
            row.push_str(&format!(",{:.3}\n", h.mean));
            row
        };
        s.push_str(&fmt_row("path", &self.path));
        s.push_str(&fmt_row("pose", &self.pose));
        s
    }
}

/// Run inference over every sample and aggregate MPJPE. The per-frame error
/// curves are averaged across samples, then summarized at the standard
/// horizons.
pub fn evaluate(
    dataset: &Dataset,
    contact_net: &ContactNet,
    motion_net: &MotionNet,
    cfg: &TrainConfig,
    source: ContactSource,
) -> Result<EvalReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let t = cfg.future;
    let mut path_acc = vec![0.0f64; t];
    let mut pose_acc = vec![0.0f64; t];
    for (i, sample) in dataset.iter().enumerate() {
        let scene = sampled_scene_for(sample, cfg, i)?;
        let observed = sample.motion.window(0, cfg.past)?;
        let future = sample.motion.window(cfg.past, t)?;

        let contacts = match source {
            ContactSource::GroundTruth => ground_truth_contacts(sample, &scene, cfg)?,
            ContactSource::Zeroed => ContactPointSet::zeros(t, sample.motion.num_joints()),
            ContactSource::Predicted => {
                let past_maps = contact_sequence(&observed, &scene, cfg.sigma)?;
                let maps = contact_net.predict_maps(&scene, &past_maps, &observed, t)?;
                extract_contact_points_range(&maps, &scene, cfg.epsilon, cfg.past, t)?
            }
        };
        let (roots, locals) = motion_net.predict(&observed, &contacts)?;
        let path = super::metrics::per_frame_error(&future.roots(), &roots)?;
        let pose = super::metrics::per_frame_error(&future.local_poses(), &locals)?;
        for ti in 0..t {
            path_acc[ti] += path[ti];
            pose_acc[ti] += pose[ti];
        }
    }
    let n = dataset.len() as f64;
    for v in path_acc.iter_mut().chain(pose_acc.iter_mut()) {
        *v /= n;
    }
    Ok(EvalReport {
        path: summarize(&path_acc, cfg.fps),
        pose: summarize(&pose_acc, cfg.fps),
        samples: dataset.len(),
        contact_source: source,
    })
}
