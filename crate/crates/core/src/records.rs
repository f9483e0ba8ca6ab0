//! The force CSV schema shared by oracle sessions and estimation output:
//! `time_s,finger,fx_n,fy_n,fz_n,phase,source`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force::{FingerId, ForceVector, Phase};

pub const FORCE_CSV_HEADER: [&str; 7] = ["time_s", "finger", "fx_n", "fy_n", "fz_n", "phase", "source"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceRecord {
    pub time_s: f64,
    pub finger: FingerId,
    pub fx_n: f64,
    pub fy_n: f64,
    pub fz_n: f64,
    pub phase: Phase,
    pub source: String,
}

impl ForceRecord {
    pub fn new(time_s: f64, finger: FingerId, f: ForceVector, phase: Phase, source: &str) -> Self {
        ForceRecord {
            time_s,
            finger,
            fx_n: f.fx,
            fy_n: f.fy,
            fz_n: f.fz,
            phase,
            source: source.to_string(),
        }
    }

    pub fn force(&self) -> ForceVector {
        ForceVector::new(self.fx_n, self.fy_n, self.fz_n)
    }
}

pub fn write_force_csv(path: impl AsRef<Path>, records: &[ForceRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_force_csv(path: impl AsRef<Path>) -> Result<Vec<ForceRecord>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(FORCE_CSV_HEADER.iter().copied()) {
        return Err(Error::format(
            path,
            format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
        ));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_every_bit() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        let recs = vec![
            ForceRecord::new(0.1, FingerId::Thumb, ForceVector::new(0.1 + 0.2, -1e-17, 3.0), Phase::Hold, "oracle"),
            ForceRecord::new(0.2, FingerId::Ring, ForceVector::new(1.0 / 3.0, 2.0, 0.0), Phase::Unknown, "estimate"),
        ];
        write_force_csv(&p, &recs).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("time_s,finger,fx_n,fy_n,fz_n,phase,source\n"));
        assert_eq!(read_force_csv(&p).unwrap(), recs);
    }

    #[test]
    fn wrong_header_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.csv");
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(matches!(read_force_csv(&p), Err(Error::Format { .. })));
    }
}
