//! Plain-text mesh format:
//!
//! ```text
//! dgtd-mesh v1
//! V <count>
//! x y
//! ...
//! T <count>
//! i j k
//! ...
//! ```
//!
//! Vertex indices are 0-based. Blank lines are ignored.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{Mesh2D, OrientationPolicy};
use crate::error::{DgError, Result};

const HEADER: &str = "dgtd-mesh v1";

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh2D> {
    load_mesh_with(path, OrientationPolicy::Reject)
}

pub fn load_mesh_with(path: impl AsRef<Path>, policy: OrientationPolicy) -> Result<Mesh2D> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| DgError::io(path, e))?;
    parse_mesh(&text, path, policy)
}

pub fn parse_mesh(text: &str, origin: &Path, policy: OrientationPolicy) -> Result<Mesh2D> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let err = |line: usize, msg: String| DgError::Parse {
        path: origin.to_path_buf(),
        line,
        msg,
    };

    match lines.next() {
        Some((_, HEADER)) => {}
        Some((n, other)) => return Err(err(n, format!("expected header `{HEADER}`, found `{other}`"))),
        None => return Err(err(0, "empty mesh file".into())),
    }

    let vcount = section_count(lines.next(), "V", origin)?;
    let mut vertices = Vec::with_capacity(vcount);
    for i in 0..vcount {
        let (n, l) = lines
            .next()
            .ok_or_else(|| err(0, format!("file ends before vertex {i}")))?;
        let vals = parse_fields::<f64>(l, 2).map_err(|m| err(n, format!("vertex {i}: {m}")))?;
        if !vals.iter().all(|v| v.is_finite()) {
            return Err(err(n, format!("vertex {i} has a non-finite coordinate")));
        }
        vertices.push([vals[0], vals[1]]);
    }

    let tcount = section_count(lines.next(), "T", origin)?;
    let mut triangles = Vec::with_capacity(tcount);
    for i in 0..tcount {
        let (n, l) = lines
            .next()
            .ok_or_else(|| err(0, format!("file ends before triangle {i}")))?;
        let vals = parse_fields::<usize>(l, 3).map_err(|m| err(n, format!("triangle {i}: {m}")))?;
        triangles.push([vals[0], vals[1], vals[2]]);
    }
    if let Some((n, l)) = lines.next() {
        return Err(err(n, format!("unexpected trailing content `{l}`")));
    }

    Mesh2D::with_policy(vertices, triangles, policy)
}

fn section_count(line: Option<(usize, &str)>, tag: &str, origin: &Path) -> Result<usize> {
    let (n, l) = line.ok_or_else(|| DgError::Parse {
        path: origin.to_path_buf(),
        line: 0,
        msg: format!("missing `{tag} <count>` section"),
    })?;
    let mut it = l.split_whitespace();
    let parsed = match (it.next(), it.next(), it.next()) {
        (Some(t), Some(c), None) if t == tag => c.parse::<usize>().ok(),
        _ => None,
    };
    parsed.ok_or_else(|| DgError::Parse {
        path: origin.to_path_buf(),
        line: n,
        msg: format!("expected `{tag} <count>`, found `{l}`"),
    })
}

fn parse_fields<T: std::str::FromStr>(line: &str, count: usize) -> std::result::Result<Vec<T>, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != count {
        return Err(format!("expected {count} fields, found {}", fields.len()));
    }
    fields
        .iter()
        .map(|f| f.parse::<T>().map_err(|_| format!("cannot parse `{f}`")))
        .collect()
}

/// Renders a mesh in the text format. Coordinates use the shortest decimal
/// representation that parses back to the same `f64`.
pub fn write_mesh(mesh: &Mesh2D) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "V {}", mesh.vertices().len());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:?} {:?}", v[0], v[1]);
    }
    let _ = writeln!(out, "T {}", mesh.triangles().len());
    for t in mesh.triangles() {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    out
}

pub fn save_mesh(mesh: &Mesh2D, path: impl AsRef<Path>) -> Result<()> {
    let path: PathBuf = path.as_ref().to_path_buf();
    std::fs::write(&path, write_mesh(mesh)).map_err(|e| DgError::io(path, e))
}
