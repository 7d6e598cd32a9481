//! Scene point-cloud files: ASCII `x y z` text and a binary form
//! (magic `CAMS`, u32 point count, then N*3 little-endian f32).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::SceneCloud;

const MAGIC: &[u8; 4] = b"CAMS";

pub fn scene_to_binary(scene: &SceneCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + scene.len() * 12);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(scene.len() as u32).to_le_bytes());
    for p in scene.points() {
        for &c in p {
            out.extend_from_slice(&(c as f32).to_le_bytes());
        }
    }
    out
}

pub fn scene_from_binary(bytes: &[u8]) -> Result<SceneCloud> {
    if bytes.len() < 8 || &bytes[0..4] != MAGIC {
        return Err(Error::parse("offset 0", "bad magic, expected CAMS"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let need = 8 + n * 12;
    if bytes.len() != need {
        return Err(Error::parse(
            format!("offset {}", bytes.len().min(need)),
            format!("expected {need} bytes for {n} points, found {}", bytes.len()),
        ));
    }
    let mut points = Vec::with_capacity(n);
    for i in 0..n {
        let base = 8 + i * 12;
        let read = |o: usize| f32::from_le_bytes(bytes[base + o..base + o + 4].try_into().unwrap());
        let p = [read(0) as f64, read(4) as f64, read(8) as f64];
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::parse(
                format!("offset {base}"),
                format!("point {i} has non-finite coordinates"),
            ));
        }
        points.push(p);
    }
    SceneCloud::new(points)
}

pub fn scene_to_text(scene: &SceneCloud) -> String {
    let mut s = String::new();
    for p in scene.points() {
        s.push_str(&format!("{} {} {}\n", p[0], p[1], p[2]));
    }
    s
}

pub fn scene_from_text(text: &str) -> Result<SceneCloud> {
    let mut points = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut coords = [0.0f64; 3];
        let mut it = line.split_whitespace();
        for (i, c) in coords.iter_mut().enumerate() {
            let tok = it.next().ok_or_else(|| {
                Error::parse(format!("line {}", ln + 1), "expected three coordinates")
            })?;
            *c = tok.parse().map_err(|_| {
                Error::parse(
                    format!("line {}", ln + 1),
                    format!("coordinate {} is not a number: {tok:?}", i + 1),
                )
            })?;
            if !c.is_finite() {
                return Err(Error::parse(
                    format!("line {}", ln + 1),
                    "non-finite coordinate",
                ));
            }
        }
        if it.next().is_some() {
            return Err(Error::parse(
                format!("line {}", ln + 1),
                "trailing tokens after three coordinates",
            ));
        }
        points.push(coords);
    }
    SceneCloud::new(points)
}

/// Binary when the file starts with the CAMS magic, text otherwise.
pub fn load_scene(path: &Path) -> Result<SceneCloud> {
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
        scene_from_binary(&bytes).map_err(loc)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::parse(path.display().to_string(), "not valid UTF-8 text"))?;
        scene_from_text(&text).map_err(loc)
    }
}

/// Extension `.cams` selects the binary form, anything else text.
pub fn save_scene(scene: &SceneCloud, path: &Path) -> Result<()> {
    let binary = path.extension().is_some_and(|e| e == "cams");
    let mut f = std::fs::File::create(path)?;
    if binary {
        f.write_all(&scene_to_binary(scene))?;
    } else {
        f.write_all(scene_to_text(scene).as_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f32_scene() -> SceneCloud {
        // coordinates exactly representable in f32
        SceneCloud::new(vec![[0.5, -1.25, 3.0], [10.0, 0.0625, -0.125]]).unwrap()
    }

    #[test]
    fn binary_roundtrip_bit_exact() {
        let scene = f32_scene();
        let bytes = scene_to_binary(&scene);
        let loaded = scene_from_binary(&bytes).unwrap();
        assert_eq!(scene, loaded);
        assert_eq!(bytes, scene_to_binary(&loaded));
    }

    #[test]
    fn text_roundtrip_exact_for_f64() {
        let scene = SceneCloud::new(vec![[0.1, 0.2, 0.30000000000004], [-7.25, 1e-9, 2.0]]).unwrap();
        let text = scene_to_text(&scene);
        let loaded = scene_from_text(&text).unwrap();
        assert_eq!(scene, loaded);
    }

    #[test]
    fn truncated_binary_is_parse_error() {
        let bytes = scene_to_binary(&f32_scene());
        for cut in [1, 5, 9, bytes.len() - 1] {
            assert!(matches!(
                scene_from_binary(&bytes[..cut]),
                Err(Error::Parse { .. })
            ));
        }
    }

    #[test]
    fn malformed_text_reports_line() {
        let err = scene_from_text("1 2 3\n4 five 6\n").unwrap_err();
        match err {
            Error::Parse { location, .. } => assert!(location.contains("line 2")),
            other => panic!("unexpected error {other:?}"),
        }
        assert!(scene_from_text("1 2\n").is_err());
        assert!(scene_from_text("1 2 3 4\n").is_err());
        assert!(scene_from_text("").is_err());
    }
}
