//! CSV/JSON writers. Floats are written with 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use nlepi::simulator::{Record, Snapshot};
use serde::Serialize;

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes through a temporary file in the same directory and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// Header line plus one row per entry, each row a list of floats.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(float).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn trajectory_csv(records: &[Record]) -> String {
    csv_table(
        &["t", "g", "h", "sup_u", "sup_v", "mass_u", "mass_v"],
        records
            .iter()
            .map(|r| vec![r.t, r.g, r.h, r.sup_u, r.sup_v, r.mass_u, r.mass_v]),
    )
}

pub fn snapshots_csv(snapshots: &[Snapshot]) -> String {
    let mut s = String::from("t,x,u,v\n");
    for snap in snapshots {
        for k in 0..snap.x.len() {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                float(snap.t),
                float(snap.x[k]),
                float(snap.u[k]),
                float(snap.v[k])
            );
        }
    }
    s
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}
