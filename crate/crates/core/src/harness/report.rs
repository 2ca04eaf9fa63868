//! Aggregation of trial results into tables and summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::metrics::mean;
use super::speed::{MotionKind, SpeedEntry};
use super::trial::TrialResult;
use super::HarnessError;
use crate::tracker::Strategy;

/// Visibility as an exact map key (thousandths).
fn vis_key(v: f64) -> i64 {
    (v * 1000.0).round() as i64
}

fn first_seen<T: PartialEq + Clone>(items: impl IntoIterator<Item = T>) -> Vec<T> {
    let mut out = Vec::new();
    for it in items {
        if !out.contains(&it) {
            out.push(it);
        }
    }
    out
}

/// Header plus rows of preformatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_writer(out);
        let res = w
            .write_record(&self.header)
            .and_then(|_| self.rows.iter().try_for_each(|r| w.write_record(r)))
            .and_then(|_| w.flush().map_err(csv::Error::from));
        res.map_err(|e| HarnessError::Config(format!("csv: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Mean errors of one (strategy, part, visibility) cell over its seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellStats {
    pub r_err_deg: f64,
    pub t_err_cm: f64,
    pub trials: usize,
}

/// Per-cell means of static trials keyed by (strategy, part, visibility in thousandths).
pub fn static_cells(results: &[TrialResult]) -> BTreeMap<(Strategy, String, i64), CellStats> {
    let mut groups: BTreeMap<(Strategy, String, i64), Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        groups
            .entry((r.strategy, r.part_id.clone(), vis_key(r.visibility)))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|(k, rs)| {
            let r = mean(&rs.iter().map(|t| t.mean_r_err()).collect::<Vec<_>>());
            let t = mean(&rs.iter().map(|t| t.mean_t_err()).collect::<Vec<_>>());
            (
                k,
                CellStats {
                    r_err_deg: r,
                    t_err_cm: t,
                    trials: rs.len(),
                },
            )
        })
        .collect()
}

/// Mean R_err and t_err per strategy for one part, pooled over `visibilities`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartOrdering {
    pub part_id: String,
    /// (strategy, mean R_err, mean t_err) in the order the strategies were given.
    pub means: Vec<(Strategy, f64, f64)>,
}

impl PartOrdering {
    /// Both errors are non-decreasing along the strategy order.
    pub fn holds(&self) -> bool {
        self.means
            .windows(2)
            .all(|w| w[0].1 <= w[1].1 && w[0].2 <= w[1].2)
    }
}

/// Pools every trial of each part at the listed visibilities.
pub fn static_orderings(results: &[TrialResult], visibilities: &[f64], strategies: &[Strategy]) -> Vec<PartOrdering> {
    let keys: Vec<i64> = visibilities.iter().map(|&v| vis_key(v)).collect();
    first_seen(results.iter().map(|r| r.part_id.clone()))
        .into_iter()
        .map(|part| {
            let means = strategies
                .iter()
                .map(|&s| {
                    let sel: Vec<&TrialResult> = results
                        .iter()
                        .filter(|r| r.part_id == part && r.strategy == s && keys.contains(&vis_key(r.visibility)))
                        .collect();
                    let r = mean(&sel.iter().map(|t| t.mean_r_err()).collect::<Vec<_>>());
                    let t = mean(&sel.iter().map(|t| t.mean_t_err()).collect::<Vec<_>>());
                    (s, r, t)
                })
                .collect();
            PartOrdering { part_id: part, means }
        })
        .collect()
}

/// Rows strategy x part (plus an overall row per strategy); columns R_err
/// per visibility then t_err per visibility.
pub fn static_table(results: &[TrialResult]) -> Table {
    let cells = static_cells(results);
    let strategies = first_seen(results.iter().map(|r| r.strategy));
    let parts = first_seen(results.iter().map(|r| r.part_id.clone()));
    let mut vis = first_seen(results.iter().map(|r| vis_key(r.visibility)));
    vis.sort_unstable();

    let mut header = vec!["strategy".to_string(), "part".to_string()];
    header.extend(vis.iter().map(|v| format!("r_err_deg_{}", v / 10)));
    header.extend(vis.iter().map(|v| format!("t_err_cm_{}", v / 10)));
    let fmt = |x: f64| if x.is_nan() { String::new() } else { format!("{x:.3}") };

    let mut rows = Vec::new();
    for &s in &strategies {
        for part in &parts {
            let mut row = vec![s.name().to_string(), part.clone()];
            let get = |v: i64| cells.get(&(s, part.clone(), v));
            row.extend(vis.iter().map(|&v| get(v).map_or(String::new(), |c| fmt(c.r_err_deg))));
            row.extend(vis.iter().map(|&v| get(v).map_or(String::new(), |c| fmt(c.t_err_cm))));
            rows.push(row);
        }
        let mut row = vec![s.name().to_string(), "overall".to_string()];
        let overall = |v: i64, pick: fn(&CellStats) -> f64| {
            let xs: Vec<f64> = parts
                .iter()
                .filter_map(|p| cells.get(&(s, p.clone(), v)).map(pick))
                .collect();
            fmt(mean(&xs))
        };
        row.extend(vis.iter().map(|&v| overall(v, |c| c.r_err_deg)));
        row.extend(vis.iter().map(|&v| overall(v, |c| c.t_err_cm)));
        rows.push(row);
    }
    Table { header, rows }
}

/// Success rate per (part, strategy) and overall, as fractions.
pub fn success_rates(results: &[TrialResult]) -> (BTreeMap<(String, Strategy), f64>, BTreeMap<Strategy, f64>) {
    let mut per: BTreeMap<(String, Strategy), (usize, usize)> = BTreeMap::new();
    let mut all: BTreeMap<Strategy, (usize, usize)> = BTreeMap::new();
    for r in results {
        for slot in [per.entry((r.part_id.clone(), r.strategy)).or_default(), all.entry(r.strategy).or_default()] {
            slot.0 += usize::from(r.success);
            slot.1 += 1;
        }
    }
    let rate = |(ok, n): (usize, usize)| ok as f64 / n as f64;
    (
        per.into_iter().map(|(k, v)| (k, rate(v))).collect(),
        all.into_iter().map(|(k, v)| (k, rate(v))).collect(),
    )
}

/// Rows per part plus overall; one success-percentage column per strategy.
pub fn push_table(results: &[TrialResult]) -> Table {
    let strategies = first_seen(results.iter().map(|r| r.strategy));
    let parts = first_seen(results.iter().map(|r| r.part_id.clone()));
    let (per, all) = success_rates(results);
    let mut header = vec!["part".to_string()];
    header.extend(strategies.iter().map(|s| format!("{}_success_pct", s.name())));
    let mut rows: Vec<Vec<String>> = parts
        .iter()
        .map(|p| {
            let mut row = vec![p.clone()];
            row.extend(
                strategies
                    .iter()
                    .map(|s| format!("{:.1}", 100.0 * per.get(&(p.clone(), *s)).copied().unwrap_or(f64::NAN))),
            );
            row
        })
        .collect();
    let mut row = vec!["overall".to_string()];
    row.extend(strategies.iter().map(|s| format!("{:.1}", 100.0 * all[s])));
    rows.push(row);
    Table { header, rows }
}

/// Mean maximum speed per (part, motion, visibility), one column per strategy.
pub fn speed_table(entries: &[SpeedEntry]) -> Table {
    let strategies = first_seen(entries.iter().map(|e| e.strategy));
    let parts = first_seen(entries.iter().map(|e| e.part_id.clone()));
    let motions = first_seen(entries.iter().map(|e| e.motion));
    let mut vis = first_seen(entries.iter().map(|e| vis_key(e.visibility)));
    vis.sort_unstable();
    let mut header = vec![
        "part".to_string(),
        "motion".to_string(),
        "unit".to_string(),
        "visibility_pct".to_string(),
    ];
    header.extend(strategies.iter().map(|s| format!("{}_max_speed", s.name())));
    let mut rows = Vec::new();
    for part in &parts {
        for &m in &motions {
            for &v in &vis {
                let mut row = vec![part.clone(), m.name().to_string(), m.unit().to_string(), (v / 10).to_string()];
                let mut any = false;
                for &s in &strategies {
                    let xs: Vec<f64> = entries
                        .iter()
                        .filter(|e| &e.part_id == part && e.motion == m && vis_key(e.visibility) == v && e.strategy == s)
                        .map(|e| e.max_speed)
                        .collect();
                    any |= !xs.is_empty();
                    row.push(if xs.is_empty() { String::new() } else { format!("{:.3}", mean(&xs)) });
                }
                if any {
                    rows.push(row);
                }
            }
        }
    }
    Table { header, rows }
}

/// Mean maximum playback factor per (part, strategy) over entries at or below `max_visibility`.
pub fn speed_orderings(entries: &[SpeedEntry], max_visibility: f64, strategies: &[Strategy]) -> Vec<PartOrdering> {
    first_seen(entries.iter().map(|e| e.part_id.clone()))
        .into_iter()
        .map(|part| {
            let means = strategies
                .iter()
                .map(|&s| {
                    let xs: Vec<f64> = entries
                        .iter()
                        .filter(|e| e.part_id == part && e.strategy == s && vis_key(e.visibility) <= vis_key(max_visibility))
                        .map(|e| e.max_factor)
                        .collect();
                    // Larger is better here; store the negation so `holds` reads the same way.
                    let m = -mean(&xs);
                    (s, m, m)
                })
                .collect();
            PartOrdering { part_id: part, means }
        })
        .collect()
}

pub fn static_summary(results: &[TrialResult], strategies: &[Strategy]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "static trials: {}", results.len());
    let low = [0.2, 0.4, 0.6];
    let orderings = static_orderings(results, &low, strategies);
    let holding = orderings.iter().filter(|o| o.holds()).count();
    let _ = writeln!(s, "ordering {} at 20-60% visibility (pooled):", names(strategies));
    for o in &orderings {
        let cells: Vec<String> = o
            .means
            .iter()
            .map(|(st, r, t)| format!("{} {:.2} deg {:.3} cm", st.name(), r, t))
            .collect();
        let _ = writeln!(s, "  {:10} {} [{}]", o.part_id, cells.join(" | "), verdict(o.holds()));
    }
    let _ = writeln!(s, "  parts holding: {holding}/{}", orderings.len());
    let full: Vec<&TrialResult> = results
        .iter()
        .filter(|r| r.strategy == Strategy::ConditionalUpdate && vis_key(r.visibility) == 1000)
        .collect();
    if !full.is_empty() {
        let t = mean(&full.iter().map(|r| r.mean_t_err()).collect::<Vec<_>>());
        let _ = writeln!(s, "cuicp mean t_err at 100% visibility: {t:.3} cm");
    }
    s
}

pub fn push_summary(results: &[TrialResult], strategies: &[Strategy]) -> String {
    let (_, all) = success_rates(results);
    let mut s = String::new();
    let _ = writeln!(s, "push trials: {}", results.len());
    for st in strategies {
        if let Some(r) = all.get(st) {
            let _ = writeln!(s, "  {:10} success {:.1}%", st.name(), 100.0 * r);
        }
    }
    s
}

pub fn speed_summary(entries: &[SpeedEntry], strategies: &[Strategy]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "speed entries: {}", entries.len());
    let orderings = speed_orderings(entries, 0.6, strategies);
    let _ = writeln!(s, "ordering {} by mean max factor at <= 60% visibility:", names(strategies));
    for o in &orderings {
        let cells: Vec<String> = o.means.iter().map(|(st, m, _)| format!("{} {:.2}", st.name(), -m)).collect();
        let _ = writeln!(s, "  {:10} {} [{}]", o.part_id, cells.join(" | "), verdict(o.holds()));
    }
    let _ = writeln!(
        s,
        "  parts holding: {}/{}",
        orderings.iter().filter(|o| o.holds()).count(),
        orderings.len()
    );
    for m in MotionKind::ALL {
        let n = entries.iter().filter(|e| e.motion == m).count();
        let _ = writeln!(s, "{} entries: {n} ({})", m.name(), m.unit());
    }
    s
}

fn names(strategies: &[Strategy]) -> String {
    strategies.iter().map(|s| s.name()).collect::<Vec<_>>().join(" <= ")
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "holds"
    } else {
        "violated"
    }
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), HarnessError> {
    let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for it in items {
        serde_json::to_writer(&mut w, it).map_err(|e| HarnessError::Config(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let file = std::fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut out = Vec::new();
    for (n, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| HarnessError::Config(format!("{}:{}: {e}", path.display(), n + 1)))?,
        );
    }
    Ok(out)
}
