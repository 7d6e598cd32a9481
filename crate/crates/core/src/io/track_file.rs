//! Refinement track files: per-frame 6-D rotation, translation, and pose
//! parameters. Text form: header `camt <P> <D> <fps>` then P rows of
//! 9+D numbers. Binary form: magic `CAMT`, u32 P, u32 D, f64 fps, then
//! P*(9+D) little-endian f64.

use std::io::{Read, Write};
use std::path::Path;

use crate::autodiff::Array;
use crate::error::{Error, Result};
use crate::refine::{GlobalTrack, PoseTrack};

const MAGIC: &[u8; 4] = b"CAMT";

#[derive(Clone, Debug, PartialEq)]
pub struct TrackFile {
    pub global: GlobalTrack,
    pub poses: PoseTrack,
    pub fps: f64,
}

impl TrackFile {
    pub fn new(global: GlobalTrack, poses: PoseTrack, fps: f64) -> Result<TrackFile> {
        if global.len() != poses.len() {
            return Err(Error::InvalidInput(format!(
                "global track has {} frames but poses have {}",
                global.len(),
                poses.len()
            )));
        }
        if fps <= 0.0 {
            return Err(Error::InvalidParameter(format!("fps {fps} must be positive")));
        }
        Ok(TrackFile { global, poses, fps })
    }

    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.poses.dof()
    }
}

pub fn track_to_binary(track: &TrackFile) -> Vec<u8> {
    let (p, d) = (track.len(), track.dof());
    let mut out = Vec::with_capacity(20 + p * (9 + d) * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(p as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&track.fps.to_le_bytes());
    for f in 0..p {
        for v in track.global.rot_at(f) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in track.global.trans_at(f) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for i in 0..d {
            out.extend_from_slice(&track.poses.theta.at(&[f, i]).to_le_bytes());
        }
    }
    out
}

pub fn track_from_binary(bytes: &[u8]) -> Result<TrackFile> {
    if bytes.len() < 20 || &bytes[0..4] != MAGIC {
        return Err(Error::parse("offset 0", "bad magic, expected CAMT"));
    }
    let p = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let fps = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let row = 9 + d;
    let need = 20 + p * row * 8;
    if bytes.len() != need {
        return Err(Error::parse(
            format!("offset {}", bytes.len().min(need)),
            format!("expected {need} bytes, found {}", bytes.len()),
        ));
    }
    let mut rot = Array::zeros(&[p, 6]);
    let mut trans = Array::zeros(&[p, 3]);
    let mut theta = Array::zeros(&[p, d]);
    for f in 0..p {
        let base = 20 + f * row * 8;
        let read = |i: usize| {
            f64::from_le_bytes(bytes[base + i * 8..base + (i + 1) * 8].try_into().unwrap())
        };
        for i in 0..6 {
            rot.set(&[f, i], read(i));
        }
        for i in 0..3 {
            trans.set(&[f, i], read(6 + i));
        }
        for i in 0..d {
            theta.set(&[f, i], read(9 + i));
        }
    }
    TrackFile::new(GlobalTrack::new(rot, trans)?, PoseTrack::new(theta)?, fps)
}

pub fn track_to_text(track: &TrackFile) -> String {
    let (p, d) = (track.len(), track.dof());
    let mut s = format!("camt {} {} {}\n", p, d, track.fps);
    for f in 0..p {
        let mut row = Vec::with_capacity(9 + d);
        row.extend(track.global.rot_at(f));
        row.extend(track.global.trans_at(f));
        for i in 0..d {
            row.push(track.poses.theta.at(&[f, i]));
        }
        let strs: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        s.push_str(&strs.join(" "));
        s.push('\n');
    }
    s
}

pub fn track_from_text(text: &str) -> Result<TrackFile> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse("line 1", "empty track file"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "camt" {
        return Err(Error::parse("line 1", "expected header `camt <P> <D> <fps>`"));
    }
    let p: usize = toks[1]
        .parse()
        .map_err(|_| Error::parse("line 1", "frame count is not an integer"))?;
    let d: usize = toks[2]
        .parse()
        .map_err(|_| Error::parse("line 1", "dof count is not an integer"))?;
    let fps: f64 = toks[3]
        .parse()
        .map_err(|_| Error::parse("line 1", "fps is not a number"))?;
    let mut rot = Array::zeros(&[p, 6]);
    let mut trans = Array::zeros(&[p, 3]);
    let mut theta = Array::zeros(&[p, d]);
    let mut f = 0;
    for (ln, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if f >= p {
            return Err(Error::parse(
                format!("line {}", ln + 1),
                format!("more than {p} data rows"),
            ));
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::parse(format!("line {}", ln + 1), "non-numeric value"))?;
        if vals.len() != 9 + d {
            return Err(Error::parse(
                format!("line {}", ln + 1),
                format!("expected {} values, found {}", 9 + d, vals.len()),
            ));
        }
        for i in 0..6 {
            rot.set(&[f, i], vals[i]);
        }
        for i in 0..3 {
            trans.set(&[f, i], vals[6 + i]);
        }
        for i in 0..d {
            theta.set(&[f, i], vals[9 + i]);
        }
        f += 1;
    }
    if f != p {
        return Err(Error::parse(
            "end of file",
            format!("expected {p} data rows, found {f}"),
        ));
    }
    TrackFile::new(GlobalTrack::new(rot, trans)?, PoseTrack::new(theta)?, fps)
}

pub fn load_track(path: &Path) -> Result<TrackFile> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let loc = |e: Error| match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}: {}", path.display(), location),
            message,
        },
        other => other,
    };
    if bytes.starts_with(MAGIC) {
        track_from_binary(&bytes).map_err(loc)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::parse(path.display().to_string(), "not valid UTF-8 text"))?;
        track_from_text(&text).map_err(loc)
    }
}

/// Extension `.camt` selects the binary form, anything else text.
pub fn save_track(track: &TrackFile, path: &Path) -> Result<()> {
    let binary = path.extension().is_some_and(|e| e == "camt");
    let mut f = std::fs::File::create(path)?;
    if binary {
        f.write_all(&track_to_binary(track))?;
    } else {
        f.write_all(track_to_text(track).as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> TrackFile {
        let p = 3;
        let mut rot = Array::zeros(&[p, 6]);
        for f in 0..p {
            rot.set(&[f, 0], 1.0);
            rot.set(&[f, 4], 1.0);
            rot.set(&[f, 1], 0.01 * f as f64);
        }
        let mut trans = Array::zeros(&[p, 3]);
        for f in 0..p {
            trans.set(&[f, 0], 0.1 * f as f64);
        }
        let theta = Array::full(&[p, 6], 0.25);
        TrackFile::new(
            GlobalTrack::new(rot, trans).unwrap(),
            PoseTrack::new(theta).unwrap(),
            30.0,
        )
        .unwrap()
    }

    #[test]
    fn binary_and_text_roundtrip() {
        let t = demo();
        assert_eq!(track_from_binary(&track_to_binary(&t)).unwrap(), t);
        assert_eq!(track_from_text(&track_to_text(&t)).unwrap(), t);
    }

    #[test]
    fn malformed_inputs_error() {
        let bytes = track_to_binary(&demo());
        assert!(track_from_binary(&bytes[..bytes.len() - 1]).is_err());
        assert!(track_from_text("camt 2 6 30\n1 0 0 0 1 0 0 0 0 0 0 0 0 0 0\n").is_err());
        assert!(track_from_text("camt x 6 30\n").is_err());
    }
}
