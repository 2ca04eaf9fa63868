//! Sequence directories: one `frame_NNNNN.txt` per frame with lines
//! `x y z label` (meters; label 0 part, 1 powder, 2 occluder), plus
//! `manifest.csv` with columns
//! `frame,timestamp,file,r00,r01,r02,r10,r11,r12,r20,r21,r22,tx,ty,tz,truth_eta`.
//!
//! Floats are written in shortest round-trip form, so reading a sequence
//! back reproduces it bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::Point3;

use super::render::{Label, ScanFrame};
use super::SimulatorError;
use crate::geometry::{PointCloud, RigidPose};

pub const MANIFEST: &str = "manifest.csv";

const HEADER: [&str; 16] = [
    "frame", "timestamp", "file", "r00", "r01", "r02", "r10", "r11", "r12", "r20", "r21", "r22", "tx", "ty", "tz",
    "truth_eta",
];

pub fn frame_file_name(index: usize) -> String {
    format!("frame_{index:05}.txt")
}

pub fn format_points(points: &[Point3<f64>], labels: &[Label]) -> String {
    let mut out = String::with_capacity(points.len() * 64);
    for (p, l) in points.iter().zip(labels) {
        let _ = writeln!(out, "{} {} {} {}", p.x, p.y, p.z, l.code());
    }
    out
}

pub fn parse_points(text: &str) -> Result<(PointCloud, Vec<Label>), SimulatorError> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |m: &str| SimulatorError::Format(format!("line {}: {m}", n + 1));
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 && fields.len() != 4 {
            return Err(bad("expected `x y z [label]`"));
        }
        let mut c = [0.0; 3];
        for (slot, s) in c.iter_mut().zip(&fields) {
            *slot = s.parse().map_err(|_| bad("bad coordinate"))?;
        }
        let label = match fields.get(3) {
            Some(s) => s.parse::<u8>().ok().and_then(Label::from_code).ok_or_else(|| bad("bad label"))?,
            None => Label::Part,
        };
        points.push(Point3::new(c[0], c[1], c[2]));
        labels.push(label);
    }
    let cloud = PointCloud::new(points).map_err(|e| SimulatorError::Format(e.to_string()))?;
    Ok((cloud, labels))
}

pub fn write_sequence(dir: &Path, frames: &[ScanFrame]) -> Result<(), SimulatorError> {
    fs::create_dir_all(dir).map_err(|e| SimulatorError::io(dir, e))?;
    let manifest_path = dir.join(MANIFEST);
    let mut manifest = csv::Writer::from_path(&manifest_path).map_err(|e| SimulatorError::Format(e.to_string()))?;
    manifest
        .write_record(HEADER)
        .map_err(|e| SimulatorError::Format(e.to_string()))?;
    for (k, f) in frames.iter().enumerate() {
        let name = frame_file_name(k);
        let path = dir.join(&name);
        fs::write(&path, format_points(&f.points, &f.labels)).map_err(|e| SimulatorError::io(&path, e))?;
        let (r, t) = f.truth_pose.to_row_major();
        let mut row = vec![k.to_string(), f.timestamp.to_string(), name];
        row.extend(r.iter().chain(&t).map(|v| v.to_string()));
        row.push(f.truth_eta.to_string());
        manifest
            .write_record(&row)
            .map_err(|e| SimulatorError::Format(e.to_string()))?;
    }
    manifest.flush().map_err(|e| SimulatorError::io(&manifest_path, e))
}

pub fn read_sequence(dir: &Path) -> Result<Vec<ScanFrame>, SimulatorError> {
    let manifest_path = dir.join(MANIFEST);
    let mut reader = csv::Reader::from_path(&manifest_path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => SimulatorError::io(&manifest_path, io),
        other => SimulatorError::Format(format!("{other:?}")),
    })?;
    let header = reader
        .headers()
        .map_err(|e| SimulatorError::Format(e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(SimulatorError::Format(format!("unexpected manifest header in {}", manifest_path.display())));
    }
    let mut frames = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(|e| SimulatorError::Format(e.to_string()))?;
        let num = |i: usize| -> Result<f64, SimulatorError> {
            record[i]
                .parse()
                .map_err(|_| SimulatorError::Format(format!("manifest row {}: bad number in column {}", n + 1, HEADER[i])))
        };
        let mut r = [0.0; 9];
        for (i, slot) in r.iter_mut().enumerate() {
            *slot = num(3 + i)?;
        }
        let t = [num(12)?, num(13)?, num(14)?];
        let truth_pose = RigidPose::from_row_major(&r, &t)
            .map_err(|e| SimulatorError::Format(format!("manifest row {}: {e}", n + 1)))?;
        let path = dir.join(&record[2]);
        let text = fs::read_to_string(&path).map_err(|e| SimulatorError::io(&path, e))?;
        let (points, labels) = parse_points(&text)?;
        frames.push(ScanFrame {
            timestamp: num(1)?,
            points,
            truth_pose,
            labels,
            truth_eta: num(15)?,
        });
    }
    Ok(frames)
}
