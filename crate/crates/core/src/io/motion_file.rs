//! Motion files. Text form: header line `camm <F> <J> <fps> <root_index>
//! <m|mm>` followed by F*J `x y z` lines, frame-major. Binary form: magic
//! `CAMM`, u32 F, u32 J, f64 fps, u32 root_index, u8 units tag (0 = m,
//! 1 = mm), then F*J*3 little-endian f64.
//!
//! Millimeter-tagged payloads are converted to meters on load.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::MotionSequence;

const MAGIC: &[u8; 4] = b"CAMM";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Units {
    Meters,
    Millimeters,
}

impl Units {
    fn scale_to_meters(self) -> f64 {
        match self {
            Units::Meters => 1.0,
            Units::Millimeters => 0.001,
        }
    }
}

pub fn motion_to_binary(motion: &MotionSequence) -> Vec<u8> {
    let (f, j) = (motion.num_frames(), motion.num_joints());
    let mut out = Vec::with_capacity(25 + f * j * 24);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(f as u32).to_le_bytes());
    out.extend_from_slice(&(j as u32).to_le_bytes());
    out.extend_from_slice(&motion.fps().to_le_bytes());
    out.extend_from_slice(&(motion.root_index() as u32).to_le_bytes());
    out.push(0); // meters
    for fi in 0..f {
        for p in motion.frame(fi) {
            for &c in p {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
    }
    out
}

pub fn motion_from_binary(bytes: &[u8]) -> Result<MotionSequence> {
    if bytes.len() < 25 || &bytes[0..4] != MAGIC {
        return Err(Error::parse("offset 0", "bad magic, expected CAMM"));
    }
    let f = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let j = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let fps = f64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let root = u32::from_le_bytes(bytes[20..24].try_into().unwrap()) as usize;
    let units = match bytes[24] {
        0 => Units::Meters,
        1 => Units::Millimeters,
        other => {
            return Err(Error::parse(
                "offset 24",
                format!("unknown units tag {other}"),
            ))
        }
    };
    let need = 25 + f * j * 24;
    if bytes.len() != need {
        return Err(Error::parse(
            format!("offset {}", bytes.len().min(need)),
            format!(
                "expected {need} bytes for {f}x{j} frames, found {}",
                bytes.len()
            ),
        ));
    }
    let scale = units.scale_to_meters();
    let mut frames = Vec::with_capacity(f);
    for fi in 0..f {
        let mut frame = Vec::with_capacity(j);
        for ji in 0..j {
            let base = 25 + (fi * j + ji) * 24;
            let read =
                |o: usize| f64::from_le_bytes(bytes[base + o..base + o + 8].try_into().unwrap());
            let p = [read(0) * scale, read(8) * scale, read(16) * scale];
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::parse(
                    format!("offset {base}"),
                    format!("frame {fi} joint {ji} has non-finite coordinates"),
                ));
            }
            frame.push(p);
        }
        frames.push(frame);
    }
    MotionSequence::new(frames, fps, root)
}

pub fn motion_to_text(motion: &MotionSequence) -> String {
    let (f, j) = (motion.num_frames(), motion.num_joints());
    let mut s = format!("camm {} {} {} {} m\n", f, j, motion.fps(), motion.root_index());
    for fi in 0..f {
        for p in motion.frame(fi) {
            s.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
        }
    }
    s
}

pub fn motion_from_text(text: &str) -> Result<MotionSequence> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse("line 1", "empty motion file"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 6 || toks[0] != "camm" {
        return Err(Error::parse(
            "line 1",
            "expected header `camm <F> <J> <fps> <root_index> <m|mm>`",
        ));
    }
    let f: usize = toks[1]
        .parse()
        .map_err(|_| Error::parse("line 1", "frame count is not an integer"))?;
    let j: usize = toks[2]
        .parse()
        .map_err(|_| Error::parse("line 1", "joint count is not an integer"))?;
    let fps: f64 = toks[3]
        .parse()
        .map_err(|_| Error::parse("line 1", "fps is not a number"))?;
    let root: usize = toks[4]
        .parse()
        .map_err(|_| Error::parse("line 1", "root index is not an integer"))?;
    let units = match toks[5] {
        "m" => Units::Meters,
        "mm" => Units::Millimeters,
        other => return Err(Error::parse("line 1", format!("unknown units {other:?}"))),
    };
    let scale = units.scale_to_meters();
    let mut coords = Vec::with_capacity(f * j);
    for (ln, raw) in lines {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut p = [0.0f64; 3];
        let mut it = line.split_whitespace();
        for c in p.iter_mut() {
            let tok = it.next().ok_or_else(|| {
                Error::parse(format!("line {}", ln + 1), "expected three coordinates")
            })?;
            *c = tok
                .parse::<f64>()
                .map_err(|_| {
                    Error::parse(
                        format!("line {}", ln + 1),
                        format!("not a number: {tok:?}"),
                    )
                })?
                * scale;
        }
        if it.next().is_some() {
            return Err(Error::parse(
                format!("line {}", ln + 1),
                "trailing tokens after three coordinates",
            ));
        }
        coords.push(p);
    }
    if coords.len() != f * j {
        return Err(Error::parse(
            "end of file",
            format!("expected {} coordinate rows, found {}", f * j, coords.len()),
        ));
    }
    let frames: Vec<Vec<[f64; 3]>> = coords.chunks(j).map(|c| c.to_vec()).collect();
    MotionSequence::new(frames, fps, root)
}

pub fn load_motion(path: &Path) -> Result<MotionSequence> {
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
        motion_from_binary(&bytes).map_err(loc)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::parse(path.display().to_string(), "not valid UTF-8 text"))?;
        motion_from_text(&text).map_err(loc)
    }
}

/// Extension `.camm` selects the binary form, anything else text.
pub fn save_motion(motion: &MotionSequence, path: &Path) -> Result<()> {
    let binary = path.extension().is_some_and(|e| e == "camm");
    let mut f = std::fs::File::create(path)?;
    if binary {
        f.write_all(&motion_to_binary(motion))?;
    } else {
        f.write_all(motion_to_text(motion).as_bytes())?;
    }
    Ok(())
}
