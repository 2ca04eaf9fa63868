//! Pose trajectory log: one JSON object per line.
//!
//! Field order is fixed: `frame`, `timestamp`, `rotation` (9 floats,
//! row-major), `translation` (3 floats, meters), `eta`, `phase`,
//! `template_points`, `icp_rmse` (meters, `null` when no registration ran),
//! `template_updated`.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{Phase, StepReport};
use crate::geometry::RigidPose;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub frame: usize,
    pub timestamp: f64,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
    pub eta: f64,
    pub phase: Phase,
    pub template_points: usize,
    pub icp_rmse: Option<f64>,
    pub template_updated: bool,
}

impl TrajectoryRecord {
    pub fn from_step(frame: usize, timestamp: f64, report: &StepReport) -> Self {
        let (rotation, translation) = report.pose.to_row_major();
        Self {
            frame,
            timestamp,
            rotation,
            translation,
            eta: report.eta,
            phase: report.phase,
            template_points: report.template_len,
            icp_rmse: report.icp.as_ref().map(|r| r.final_rmse),
            template_updated: report.template_updated,
        }
    }

    pub fn pose(&self) -> Option<RigidPose> {
        RigidPose::from_row_major(&self.rotation, &self.translation).ok()
    }

    /// Equality of every float down to the bit pattern.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        let bits = |r: &Self| {
            let mut v: Vec<u64> = r.rotation.iter().chain(&r.translation).map(|x| x.to_bits()).collect();
            v.push(r.timestamp.to_bits());
            v.push(r.eta.to_bits());
            v.push(r.icp_rmse.map_or(u64::MAX, f64::to_bits));
            v
        };
        self.frame == other.frame
            && self.phase == other.phase
            && self.template_points == other.template_points
            && self.template_updated == other.template_updated
            && self.icp_rmse.is_some() == other.icp_rmse.is_some()
            && bits(self) == bits(other)
    }
}

/// Streams records to any writer, one line each.
pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn write(&mut self, record: &TrajectoryRecord) -> io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

pub fn write_trajectory<W: Write>(out: W, records: &[TrajectoryRecord]) -> io::Result<()> {
    let mut w = TrajectoryWriter::new(io::BufWriter::new(out));
    for r in records {
        w.write(r)?;
    }
    w.into_inner().flush()
}

pub fn read_trajectory<R: BufRead>(input: R) -> io::Result<Vec<TrajectoryRecord>> {
    let mut records = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1)))?;
        records.push(rec);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> TrajectoryRecord {
        TrajectoryRecord {
            frame: 3,
            timestamp: 0.1,
            rotation: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            translation: [0.01, -0.02, 0.125],
            eta: 0.6,
            phase: Phase::Phase2,
            template_points: 812,
            icp_rmse: None,
            template_updated: false,
        }
    }

    #[test]
    fn field_order_is_fixed() {
        let line = serde_json::to_string(&record()).unwrap();
        let keys = [
            "frame", "timestamp", "rotation", "translation", "eta", "phase", "template_points", "icp_rmse",
            "template_updated",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| line.find(&format!("\"{k}\"")).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{line}");
        assert!(line.contains("\"phase\":\"phase2\""));
        assert!(line.contains("\"icp_rmse\":null"));
    }

    #[test]
    fn round_trip() {
        let mut a = record();
        let mut b = record();
        b.frame = 4;
        b.icp_rmse = Some(0.0012345678901234);
        a.timestamp = 1.0 / 3.0;
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &[a.clone(), b.clone()]).unwrap();
        assert_eq!(read_trajectory(&buf[..]).unwrap(), vec![a, b]);
    }

    #[test]
    fn bitwise_equality_separates_signed_zero() {
        let a = record();
        let mut b = record();
        assert!(a.bitwise_eq(&b));
        b.translation[0] = 0.0;
        let mut c = b.clone();
        c.translation[0] = -0.0;
        assert_eq!(b, c);
        assert!(!b.bitwise_eq(&c));
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_trajectory(&b"{\"frame\": 1}\n"[..]).is_err());
    }
}
