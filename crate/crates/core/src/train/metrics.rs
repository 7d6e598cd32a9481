//! Mean per-joint position error, reported in millimeters at fixed time
//! horizons plus the mean over all predicted frames.

use crate::autodiff::Array;
use crate::error::{Error, Result};

pub const STANDARD_HORIZONS: [f64; 4] = [0.5, 1.0, 1.5, 2.0];

/// Errors at the standard horizons (None when the horizon lies beyond the
/// predicted span) plus the mean over all frames. Millimeters.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizonErrors {
    pub at: Vec<(f64, Option<f64>)>,
    pub mean: f64,
}

/// Per-frame mean joint displacement, meters. Accepts `[T, 3]` (treated as a
/// single joint) or `[T, K, 3]`.
pub fn per_frame_error(gt: &Array, pred: &Array) -> Result<Vec<f64>> {
    if gt.shape() != pred.shape() {
        return Err(Error::shape("mpjpe", gt.shape(), pred.shape()));
    }
    let (t, k) = match gt.rank() {
        2 if gt.shape()[1] == 3 => (gt.shape()[0], 1),
        3 if gt.shape()[2] == 3 => (gt.shape()[0], gt.shape()[1]),
        _ => {
            return Err(Error::InvalidInput(format!(
                "mpjpe expects [T, 3] or [T, K, 3], got {:?}",
                gt.shape()
            )))
        }
    };
    let mut out = Vec::with_capacity(t);
    for ti in 0..t {
        let mut frame = 0.0;
        for ki in 0..k {
            let base = (ti * k + ki) * 3;
            let mut d2 = 0.0;
            for c in 0..3 {
                let d = gt.data()[base + c] - pred.data()[base + c];
                d2 += d * d;
            }
            frame += d2.sqrt();
        }
        out.push(frame / k as f64);
    }
    Ok(out)
}

/// Error at a horizon, millimeters. The horizon maps to frame
/// `round(seconds * fps)` (1-based); beyond the span it is an error.
pub fn error_at_horizon(per_frame_m: &[f64], fps: f64, seconds: f64) -> Result<f64> {
    let frame = (seconds * fps).round() as usize;
    if frame < 1 || frame > per_frame_m.len() {
        return Err(Error::InvalidParameter(format!(
            "horizon {seconds}s (frame {frame}) outside the {}-frame prediction",
            per_frame_m.len()
        )));
    }
    Ok(per_frame_m[frame - 1] * 1000.0)
}

/// Standard-horizon summary of a per-frame error curve (meters in, mm out).
pub fn summarize(per_frame_m: &[f64], fps: f64) -> HorizonErrors {
    let at = STANDARD_HORIZONS
        .iter()
        .map(|&s| (s, error_at_horizon(per_frame_m, fps, s).ok()))
        .collect();
    let mean = per_frame_m.iter().sum::<f64>() / per_frame_m.len().max(1) as f64 * 1000.0;
    HorizonErrors { at, mean }
}

/// Path error: MPJPE of the root trajectory (`[T, 3]`).
pub fn mpjpe_path(gt_roots: &Array, pred_roots: &Array, fps: f64) -> Result<HorizonErrors> {
    Ok(summarize(&per_frame_error(gt_roots, pred_roots)?, fps))
}

/// Pose error: MPJPE of local joint positions (`[T, J-1, 3]`).
pub fn mpjpe_pose(gt_local: &Array, pred_local: &Array, fps: f64) -> Result<HorizonErrors> {
    Ok(summarize(&per_frame_error(gt_local, pred_local)?, fps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_sequences_are_zero() {
        let gt = Array::full(&[60, 5, 3], 1.25);
        let errs = mpjpe_pose(&gt, &gt, 30.0).unwrap();
        assert_eq!(errs.mean, 0.0);
        for (_, e) in errs.at {
            assert_eq!(e, Some(0.0));
        }
    }

    #[test]
    fn constant_offset_is_5000_mm() {
        let gt = Array::zeros(&[60, 3]);
        let mut pred = Array::zeros(&[60, 3]);
        for t in 0..60 {
            pred.set(&[t, 0], 3.0);
            pred.set(&[t, 1], 4.0);
        }
        let errs = mpjpe_path(&gt, &pred, 30.0).unwrap();
        assert!((errs.mean - 5000.0).abs() < 1e-9);
        for (_, e) in errs.at {
            assert!((e.unwrap() - 5000.0).abs() < 1e-9);
        }
    }

    #[test]
    fn horizons_map_to_frames_15_30_45_60_at_30hz() {
        let per_frame: Vec<f64> = (1..=60).map(|f| f as f64).collect();
        assert_eq!(error_at_horizon(&per_frame, 30.0, 0.5).unwrap(), 15_000.0);
        assert_eq!(error_at_horizon(&per_frame, 30.0, 1.0).unwrap(), 30_000.0);
        assert_eq!(error_at_horizon(&per_frame, 30.0, 1.5).unwrap(), 45_000.0);
        assert_eq!(error_at_horizon(&per_frame, 30.0, 2.0).unwrap(), 60_000.0);
        assert!(error_at_horizon(&per_frame, 30.0, 2.5).is_err());
    }

    #[test]
    fn mean_is_average_of_per_frame_errors() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let gt = Array::uniform(&[10, 4, 3], -1.0, 1.0, &mut rng);
        let pred = Array::uniform(&[10, 4, 3], -1.0, 1.0, &mut rng);
        let per_frame = per_frame_error(&gt, &pred).unwrap();
        let expect = per_frame.iter().sum::<f64>() / 10.0 * 1000.0;
        let errs = mpjpe_pose(&gt, &pred, 30.0).unwrap();
        assert!((errs.mean - expect).abs() < 1e-12);
        // brute-force a single frame
        let mut acc = 0.0;
        for k in 0..4 {
            let mut d2 = 0.0;
            for c in 0..3 {
                let d = gt.at(&[3, k, c]) - pred.at(&[3, k, c]);
                d2 += d * d;
            }
            acc += d2.sqrt();
        }
        assert!((per_frame[3] - acc / 4.0).abs() < 1e-12);
    }
}
