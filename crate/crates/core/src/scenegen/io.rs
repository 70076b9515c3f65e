//! Plain-text scene files.
//!
//! ```text
//! # primseg scene
//! version 1
//! points <N>
//! classes <C>
//! <x> <y> <z> <label> <object_id>      (N rows)
//! ```
//!
//! Coordinates are written with the shortest representation that parses back
//! to the identical `f64`. Unlabeled points carry label `-1`. Lines starting
//! with `#` are comments.

use std::fmt::Write as _;
use std::path::Path;

use super::scene::Scene;
use crate::error::{Error, Result};

pub const SCENE_FORMAT_VERSION: u32 = 1;

pub fn scene_to_string(scene: &Scene) -> String {
    let mut out = String::with_capacity(scene.len() * 48 + 64);
    out.push_str("# primseg scene\n");
    let _ = writeln!(out, "version {SCENE_FORMAT_VERSION}");
    let _ = writeln!(out, "points {}", scene.len());
    let _ = writeln!(out, "classes {}", scene.class_count);
    for ((p, l), o) in scene.points.iter().zip(&scene.labels).zip(&scene.object_ids) {
        let _ = writeln!(out, "{} {} {} {} {}", p[0], p[1], p[2], l, o);
    }
    out
}

pub fn parse_scene(text: &str, source: &str) -> Result<Scene> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let err = |line: usize, message: String| Error::Parse {
        location: format!("{source}:{line}"),
        message,
    };

    let mut header = |key: &str| -> Result<(usize, u64)> {
        let (n, line) = lines
            .next()
            .ok_or_else(|| err(0, format!("missing '{key}' header (file truncated)")))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(err(n, format!("expected '{key} <value>', found '{line}'")));
        }
        let value = parts
            .next()
            .and_then(|v| v.parse::<u64>().ok())
            .ok_or_else(|| err(n, format!("'{key}' needs a non-negative integer")))?;
        Ok((n, value))
    };

    let (vline, version) = header("version")?;
    if version != u64::from(SCENE_FORMAT_VERSION) {
        return Err(err(vline, format!("unsupported scene format version {version}")));
    }
    let (_, count) = header("points")?;
    let (_, classes) = header("classes")?;
    let count = count as usize;

    let mut scene = Scene {
        points: Vec::with_capacity(count.min(1 << 24)),
        labels: Vec::with_capacity(count.min(1 << 24)),
        object_ids: Vec::with_capacity(count.min(1 << 24)),
        class_count: classes as usize,
    };
    for (n, line) in lines.by_ref() {
        if scene.len() == count {
            return Err(err(n, format!("more rows than the declared {count} points")));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 5 {
            return Err(err(n, format!("expected 5 fields, found {}", fields.len())));
        }
        let coord = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(n, format!("invalid coordinate '{}'", fields[i])))
        };
        let p = [coord(0)?, coord(1)?, coord(2)?];
        let label: i32 = fields[3]
            .parse()
            .map_err(|_| err(n, format!("invalid label '{}'", fields[3])))?;
        let object: u32 = fields[4]
            .parse()
            .map_err(|_| err(n, format!("invalid object id '{}'", fields[4])))?;
        if label < -1 || (label >= 0 && label as u64 >= classes) {
            return Err(Error::Validation(format!(
                "{source}:{n}: row {} has label {label} outside [0, {classes}) and is not -1",
                scene.len()
            )));
        }
        scene.points.push(p);
        scene.labels.push(label);
        scene.object_ids.push(object);
    }
    if scene.len() != count {
        return Err(err(
            text.lines().count(),
            format!("file truncated: declared {count} points, found {}", scene.len()),
        ));
    }
    scene.validate()?;
    Ok(scene)
}

pub fn write_scene(scene: &Scene, path: &Path) -> Result<()> {
    std::fs::write(path, scene_to_string(scene)).map_err(|e| Error::io(path, e))
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene(&text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::seeded_rng;
    use crate::scenegen::{default_taxonomy, generate_scene, SceneConfig};

    fn scene() -> Scene {
        let d = default_taxonomy();
        let mut s =
            generate_scene(&d.taxonomy.categories, &SceneConfig::default(), &mut seeded_rng(8)).unwrap();
        s.labels[3] = -1;
        s
    }

    #[test]
    fn round_trip_is_exact() {
        let s = scene();
        let back = parse_scene(&scene_to_string(&s), "mem").unwrap();
        assert_eq!(back, s);
        let bits = |s: &Scene| s.points.iter().flatten().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&s));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.scene");
        let s = scene();
        write_scene(&s, &path).unwrap();
        assert_eq!(read_scene(&path).unwrap(), s);
    }

    #[test]
    fn truncated_file_is_parse_error() {
        let text = scene_to_string(&scene());
        let cut = &text[..text.len() / 2];
        let cut = &cut[..cut.rfind('\n').unwrap()];
        let err = parse_scene(cut, "t").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        assert!(parse_scene("version 1\npoints 3", "t").is_err());
        assert!(parse_scene("", "t").is_err());
    }

    #[test]
    fn out_of_range_label_names_row() {
        let text = "version 1\npoints 2\nclasses 2\n0 0 0 1 0\n1 1 1 2 0\n";
        let err = parse_scene(text, "bad").unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Validation(_)));
        assert!(msg.contains("row 1") && msg.contains("bad:5"), "{msg}");
    }

    #[test]
    fn garbage_token_reports_line() {
        let text = "version 1\npoints 1\nclasses 2\n0 zero 0 1 0\n";
        let msg = parse_scene(text, "g").unwrap_err().to_string();
        assert!(msg.contains("g:4"), "{msg}");
    }
}
