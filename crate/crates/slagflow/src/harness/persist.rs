//! Output files: CSV traces, pretty JSON documents and mesh snapshots.
//! Floats are written in shortest round-trip form, so equal values give
//! byte-identical files.

use super::HarnessError;
use crate::lagmesh::{ConstructionTag, Deck, H1Loop, ImmersedLagrangian};
use crate::Point;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

const MESH_MAGIC: &str = "# slagflow mesh v1";

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io { path: path.to_path_buf(), msg: e.to_string() }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

pub fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(&dir.join(name), e))?;
    text.push('\n');
    write_text(dir, name, &text)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

/// CSV with a header from the field names of `T`; `None` becomes an empty cell.
pub fn csv_text<T: Serialize>(rows: &[T]) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| io_err(Path::new("<csv>"), e))?;
    }
    let bytes = w.into_inner().map_err(|e| io_err(Path::new("<csv>"), e))?;
    String::from_utf8(bytes).map_err(|e| io_err(Path::new("<csv>"), e))
}

pub fn write_csv<T: Serialize>(dir: &Path, name: &str, rows: &[T]) -> Result<PathBuf, HarnessError> {
    write_text(dir, name, &csv_text(rows)?)
}

#[derive(Serialize, Deserialize)]
struct MeshMeta {
    resolution: [usize; 2],
    decks: [Deck; 2],
    h1_basis: Vec<H1Loop>,
    tag: ConstructionTag,
    special_phase: f64,
}

/// Text table of a mesh: a JSON metadata line, then one row per vertex with
/// its index, grid coordinates and ambient coordinates.
pub fn mesh_snapshot_text(lag: &ImmersedLagrangian) -> String {
    let meta = MeshMeta {
        resolution: lag.resolution,
        decks: lag.decks.clone(),
        h1_basis: lag.h1_basis.clone(),
        tag: lag.tag,
        special_phase: lag.special_phase,
    };
    let mut s = String::new();
    let _ = writeln!(s, "{MESH_MAGIC}");
    let _ = writeln!(s, "# meta {}", serde_json::to_string(&meta).expect("mesh metadata serializes"));
    let header: Vec<String> = (0..lag.ambient_dim()).map(|k| format!("x{k}")).collect();
    let _ = writeln!(s, "vertex i j {}", header.join(" "));
    for (v, p) in lag.positions.iter().enumerate() {
        let (i, j) = lag.coords(v);
        let _ = write!(s, "{v} {i} {j}");
        for x in p.iter() {
            let _ = write!(s, " {x}");
        }
        s.push('\n');
    }
    s
}

pub fn parse_mesh_snapshot(text: &str) -> Result<ImmersedLagrangian, HarnessError> {
    let bad = |line: usize, msg: String| HarnessError::Snapshot { line, msg };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l == MESH_MAGIC => {}
        _ => return Err(bad(1, "missing mesh header".into())),
    }
    let meta: MeshMeta = match lines.next() {
        Some((_, l)) if l.starts_with("# meta ") => {
            serde_json::from_str(&l["# meta ".len()..]).map_err(|e| bad(2, e.to_string()))?
        }
        _ => return Err(bad(2, "missing metadata line".into())),
    };
    lines.next();
    let mut positions = Vec::new();
    for (k, l) in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() < 4 || f[0].parse::<usize>().ok() != Some(positions.len()) {
            return Err(bad(k + 1, format!("expected vertex {} with coordinates", positions.len())));
        }
        let xs = f[3..]
            .iter()
            .map(|x| x.parse::<f64>().map_err(|e| bad(k + 1, e.to_string())))
            .collect::<Result<Vec<f64>, _>>()?;
        positions.push(Point::from_vec(xs));
    }
    let mut lag = ImmersedLagrangian::new(meta.resolution, positions, meta.decks, meta.tag, meta.special_phase)
        .map_err(|e| bad(0, e.to_string()))?;
    lag.h1_basis = meta.h1_basis;
    Ok(lag)
}

pub fn write_mesh(dir: &Path, name: &str, lag: &ImmersedLagrangian) -> Result<PathBuf, HarnessError> {
    write_text(dir, name, &mesh_snapshot_text(lag))
}

pub fn read_mesh(path: &Path) -> Result<ImmersedLagrangian, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_mesh_snapshot(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::CalabiModelSpec;
    use crate::lagmesh::{build_model_slag, SlagModelSpec};
    use crate::moser::FlowTraceRow;

    #[test]
    fn snapshot_round_trips_exactly() {
        let spec = CalabiModelSpec::square(2, std::f64::consts::TAU).unwrap();
        let lag = build_model_slag(&spec, &SlagModelSpec::new((-16f64).exp(), [1, 0], [6, 4]).with_warp(0.2)).unwrap();
        let text = mesh_snapshot_text(&lag);
        let back = parse_mesh_snapshot(&text).unwrap();
        assert_eq!(back, lag);
        assert_eq!(mesh_snapshot_text(&back), text);
    }

    #[test]
    fn truncated_snapshot_names_the_line() {
        let spec = CalabiModelSpec::square(2, std::f64::consts::TAU).unwrap();
        let lag = build_model_slag(&spec, &SlagModelSpec::new((-16f64).exp(), [1, 0], [4, 4])).unwrap();
        let text = mesh_snapshot_text(&lag).replace("\n5 1 1 ", "\n5 1 1 x");
        match parse_mesh_snapshot(&text) {
            Err(HarnessError::Snapshot { line, .. }) => assert_eq!(line, 9),
            other => panic!("{other:?}"),
        }
        let short: String = mesh_snapshot_text(&lag).lines().take(10).map(|l| format!("{l}\n")).collect();
        assert!(parse_mesh_snapshot(&short).is_err());
    }

    #[test]
    fn csv_has_the_trace_columns() {
        let row = FlowTraceRow {
            t: 0.5,
            sup_v: 0.1,
            mu: 1e-3,
            omega_residual: 2e-12,
            l0_min: 2.0,
            l0_max: 2.0,
            volume: 27.9,
        };
        let t = csv_text(&[row]).unwrap();
        assert_eq!(t, "t,sup_v,mu,omega_residual,l0_min,l0_max,volume\n0.5,0.1,0.001,2e-12,2.0,2.0,27.9\n");
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
