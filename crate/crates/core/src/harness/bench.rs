//! Benchmark configuration and suite runners.
//!
//! Every suite is a list of independent conditions run on a rayon pool and
//! collected in configuration order, so result files do not depend on the
//! number of workers. Wall-clock figures go to separate timing files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use super::parallel::{run_parallel_demo, ParallelDemo, TrialJob};
use super::report::{
    io_err, push_summary, push_table, speed_summary, speed_table, static_summary, static_table, write_jsonl, Table,
};
use super::speed::{run_speed_condition, MotionKind, SpeedEntry, SpeedProtocol};
use super::throughput::{measure_throughput, throughput_frames, Throughput, ThroughputProtocol};
use super::trial::{
    push_frames, push_setup, static_frames, static_scene, track_frames, trial_config, PushProtocol,
    StaticProtocol, TrackRun, TrialResult,
};
use super::HarnessError;
use crate::simulator::{PartKind, PartModel};
use crate::tracker::{write_trajectory, Strategy, TrackerConfig};

/// Tracker settings for benchmarks: the library defaults with phase gating
/// off, since every trial starts from a known pose.
pub fn bench_tracker_default() -> TrackerConfig {
    TrackerConfig {
        phase_gating: false,
        ..TrackerConfig::default()
    }
}

/// Keys given in the file override [`bench_tracker_default`].
fn overlay_tracker<'de, D: Deserializer<'de>>(d: D) -> Result<TrackerConfig, D::Error> {
    use serde::de::Error;
    let given = toml::Table::deserialize(d)?;
    let mut merged = toml::Table::try_from(bench_tracker_default()).map_err(D::Error::custom)?;
    merged.extend(given);
    TrackerConfig::deserialize(merged).map_err(D::Error::custom)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StaticBench {
    pub visibilities: Vec<f64>,
    #[serde(flatten)]
    pub protocol: StaticProtocol,
}

impl Default for StaticBench {
    fn default() -> Self {
        Self {
            visibilities: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            protocol: StaticProtocol::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeedBench {
    pub visibilities: Vec<f64>,
    pub motions: Vec<MotionKind>,
    #[serde(flatten)]
    pub protocol: SpeedProtocol,
}

impl Default for SpeedBench {
    fn default() -> Self {
        Self {
            visibilities: vec![0.2, 0.4, 0.6],
            motions: MotionKind::ALL.to_vec(),
            protocol: SpeedProtocol::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThroughputBench {
    /// Strategies timed on each part.
    pub strategies: Vec<Strategy>,
    #[serde(flatten)]
    pub protocol: ThroughputProtocol,
}

impl Default for ThroughputBench {
    fn default() -> Self {
        Self {
            strategies: Strategy::ALL.to_vec(),
            protocol: ThroughputProtocol::default(),
        }
    }
}

/// Everything a `bench` run needs. Units are in the key names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Seeds `first_seed .. first_seed + seeds` per condition.
    pub seeds: u64,
    pub first_seed: u64,
    pub parts: Vec<PartKind>,
    pub strategies: Vec<Strategy>,
    /// Write one trajectory log per trial.
    pub trajectories: bool,
    #[serde(deserialize_with = "overlay_tracker")]
    pub tracker: TrackerConfig,
    #[serde(rename = "static")]
    pub static_trials: StaticBench,
    pub push: PushProtocol,
    pub speed: SpeedBench,
    pub throughput: ThroughputBench,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            seeds: 10,
            first_seed: 0,
            parts: PartKind::ALL.to_vec(),
            strategies: Strategy::ALL.to_vec(),
            trajectories: true,
            tracker: bench_tracker_default(),
            static_trials: StaticBench::default(),
            push: PushProtocol::default(),
            speed: SpeedBench::default(),
            throughput: ThroughputBench::default(),
        }
    }
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let raw: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        // Flattened sections cannot reject unknown keys themselves.
        for (section, keys) in [
            ("static", section_keys(&StaticBench::default())),
            ("speed", section_keys(&SpeedBench::default())),
            ("throughput", section_keys(&ThroughputBench::default())),
        ] {
            if let Some(toml::Value::Table(t)) = raw.get(section) {
                if let Some(k) = t.keys().find(|k| !keys.contains(*k)) {
                    return Err(HarnessError::Config(format!("unknown key '{k}' in [{section}]")));
                }
            }
        }
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |m: String| Err(HarnessError::Config(m));
        if self.seeds == 0 {
            return fail("seeds must be >= 1".into());
        }
        if self.parts.is_empty() || self.strategies.is_empty() {
            return fail("parts and strategies must be non-empty".into());
        }
        self.tracker.validate()?;
        let vis = self.static_trials.visibilities.iter().chain(&self.speed.visibilities);
        if let Some(v) = vis.into_iter().find(|v| !(**v > 0.0 && **v <= 1.0)) {
            return fail(format!("visibility {v} outside (0, 1]"));
        }
        let s = &self.static_trials.protocol;
        if !(s.fps > 0.0 && s.duration_s > 0.0 && s.noise_sigma_mm >= 0.0) {
            return fail("static: fps and duration_s must be > 0, noise_sigma_mm >= 0".into());
        }
        let p = &self.push;
        if !(p.fps > 0.0 && p.speed_cm_s >= 0.0 && p.distance_cm >= 0.0 && p.rest_s > 0.0)
            || !(0.0 < p.min_visibility && p.min_visibility <= p.max_visibility && p.max_visibility <= 1.0)
        {
            return fail("push: need fps > 0, rest_s > 0, 0 < min_visibility <= max_visibility <= 1".into());
        }
        let sp = &self.speed.protocol;
        if !(sp.fps > 0.0 && sp.duration_s > 0.0 && sp.max_factor >= 1.0 && sp.resolution > 0.0) {
            return fail("speed: need fps > 0, duration_s > 0, max_factor >= 1, resolution > 0".into());
        }
        let t = &self.throughput.protocol;
        if t.frames < 200 {
            return fail(format!("throughput: at least 200 timed frames required, got {}", t.frames));
        }
        if !(t.visibility > 0.0 && t.visibility <= 1.0) {
            return fail("throughput: visibility outside (0, 1]".into());
        }
        Ok(())
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (self.first_seed..self.first_seed + self.seeds).collect()
    }
}

fn section_keys<T: Serialize>(value: &T) -> Vec<String> {
    toml::Table::try_from(value).map_or_else(|_| Vec::new(), |t| t.keys().cloned().collect())
}

/// A scored trial with the run it came from.
#[derive(Debug, Clone)]
pub struct Scored {
    pub result: TrialResult,
    pub run: TrackRun,
}

fn models(parts: &[PartKind]) -> Vec<Arc<PartModel>> {
    parts.iter().map(|&k| Arc::new(PartModel::procedural(k))).collect()
}

/// Static trials over parts x visibilities x seeds; every strategy tracks
/// the same rendered frames.
pub fn run_static_suite(cfg: &BenchConfig) -> Result<Vec<Scored>, HarnessError> {
    let parts = models(&cfg.parts);
    let conditions: Vec<(usize, f64, u64)> = (0..parts.len())
        .flat_map(|p| {
            cfg.static_trials
                .visibilities
                .iter()
                .flat_map(move |&v| cfg.seed_list().into_iter().map(move |s| (p, v, s)))
        })
        .collect();
    let proto = &cfg.static_trials.protocol;
    let nested: Result<Vec<Vec<Scored>>, HarnessError> = conditions
        .par_iter()
        .map(|&(p, v, seed)| {
            let scene = static_scene(&parts[p], v, seed, proto);
            let frames = static_frames(&scene, proto)?;
            Ok(cfg
                .strategies
                .iter()
                .map(|&s| {
                    let tc = trial_config(&cfg.tracker, &scene.part, s);
                    let run = track_frames(&frames, scene.part.cad.clone(), frames[0].truth_pose, &tc);
                    let result = TrialResult::evaluate("static", &scene.part, v, seed, s, &frames, &run);
                    Scored { result, run }
                })
                .collect())
        })
        .collect();
    Ok(nested?.into_iter().flatten().collect())
}

/// Push trials over parts x seeds.
pub fn run_push_suite(cfg: &BenchConfig) -> Result<Vec<Scored>, HarnessError> {
    let parts = models(&cfg.parts);
    let conditions: Vec<(usize, u64)> = (0..parts.len())
        .flat_map(|p| cfg.seed_list().into_iter().map(move |s| (p, s)))
        .collect();
    let nested: Result<Vec<Vec<Scored>>, HarnessError> = conditions
        .par_iter()
        .map(|&(p, seed)| {
            let setup = push_setup(&parts[p], seed, &cfg.push);
            let frames = push_frames(&setup, &cfg.push)?;
            Ok(cfg
                .strategies
                .iter()
                .map(|&s| {
                    let tc = trial_config(&cfg.tracker, &setup.scene.part, s);
                    let run = track_frames(&frames, setup.scene.part.cad.clone(), frames[0].truth_pose, &tc);
                    let result =
                        TrialResult::evaluate("push", &setup.scene.part, setup.visibility, seed, s, &frames, &run);
                    Scored { result, run }
                })
                .collect())
        })
        .collect();
    Ok(nested?.into_iter().flatten().collect())
}

/// Maximum-speed search over parts x motions x visibilities x seeds.
pub fn run_speed_suite(cfg: &BenchConfig) -> Result<Vec<SpeedEntry>, HarnessError> {
    let parts = models(&cfg.parts);
    let mut conditions = Vec::new();
    for p in 0..parts.len() {
        for &m in &cfg.speed.motions {
            for &v in &cfg.speed.visibilities {
                for s in cfg.seed_list() {
                    conditions.push((p, m, v, s));
                }
            }
        }
    }
    let nested: Result<Vec<Vec<SpeedEntry>>, HarnessError> = conditions
        .par_iter()
        .map(|&(p, m, v, seed)| {
            run_speed_condition(&parts[p], m, v, seed, &cfg.strategies, &cfg.tracker, &cfg.speed.protocol)
        })
        .collect();
    Ok(nested?.into_iter().flatten().collect())
}

/// Single-tracker rate for one part and strategy.
#[derive(Debug, Clone, Serialize)]
pub struct ThroughputEntry {
    pub part_id: String,
    pub strategy: Strategy,
    #[serde(flatten)]
    pub throughput: Throughput,
}

/// Times each (part, strategy) sequentially on the calling thread.
pub fn run_throughput_suite(cfg: &BenchConfig) -> Result<Vec<ThroughputEntry>, HarnessError> {
    let proto = &cfg.throughput.protocol;
    let mut out = Vec::new();
    for part in models(&cfg.parts) {
        let frames = throughput_frames(&part, cfg.first_seed, proto)?;
        for &s in &cfg.throughput.strategies {
            let tc = trial_config(&cfg.tracker, &part, s);
            let throughput = measure_throughput(&frames, part.cad.clone(), frames[0].truth_pose, &tc, proto.warmup)?;
            out.push(ThroughputEntry {
                part_id: part.name.clone(),
                strategy: s,
                throughput,
            });
        }
    }
    Ok(out)
}

/// Two static cubes side by side, then a static cube next to a toppling owl.
pub fn parallel_scenarios(cfg: &BenchConfig) -> Result<Vec<Vec<TrialJob>>, HarnessError> {
    let cube = Arc::new(PartModel::procedural(PartKind::Cube));
    let owl = Arc::new(PartModel::procedural(PartKind::Owl));
    let seed = cfg.first_seed;
    let proto = &cfg.static_trials.protocol;
    let s = Strategy::ConditionalUpdate;
    Ok(vec![
        vec![
            TrialJob::static_trial(&cube, 0.6, seed, s, proto)?,
            TrialJob::static_trial(&cube, 0.6, seed + 1, s, proto)?,
        ],
        vec![
            TrialJob::static_trial(&cube, 0.6, seed, s, proto)?,
            TrialJob::topple(&owl, 0.6, seed, s, 30.0, proto.noise_sigma_mm)?,
        ],
    ])
}

fn create_dir(path: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn trajectory_path(dir: &Path, r: &TrialResult) -> PathBuf {
    dir.join(format!(
        "{}_{}_v{:03}_s{}_{}.jsonl",
        r.experiment,
        r.part_id,
        (r.visibility * 100.0).round() as i64,
        r.seed,
        r.strategy.name()
    ))
}

fn write_trials(out: &Path, scored: &[Scored], save_trajectories: bool) -> Result<(), HarnessError> {
    let results: Vec<TrialResult> = scored.iter().map(|s| s.result.clone()).collect();
    write_jsonl(&out.join("trials.jsonl"), &results)?;
    if save_trajectories {
        let dir = out.join("trajectories");
        create_dir(&dir)?;
        for s in scored {
            let path = trajectory_path(&dir, &s.result);
            let file = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
            write_trajectory(file, &s.run.records).map_err(|e| io_err(&path, e))?;
        }
    }
    let mut timing = Table {
        header: ["experiment", "part", "visibility", "seed", "strategy", "frames", "fps"]
            .map(String::from)
            .to_vec(),
        rows: Vec::new(),
    };
    for s in scored {
        let r = &s.result;
        timing.rows.push(vec![
            r.experiment.clone(),
            r.part_id.clone(),
            format!("{:.3}", r.visibility),
            r.seed.to_string(),
            r.strategy.name().into(),
            s.run.records.len().to_string(),
            format!("{:.1}", s.run.fps()),
        ]);
    }
    timing.save(&out.join("timing.csv"))
}

/// Static suite; writes `trials.jsonl`, `table_static.csv`, `summary.txt`,
/// per-trial trajectories and `timing.csv` under `out`.
pub fn bench_static(cfg: &BenchConfig, out: &Path) -> Result<String, HarnessError> {
    create_dir(out)?;
    let scored = run_static_suite(cfg)?;
    write_trials(out, &scored, cfg.trajectories)?;
    let results: Vec<TrialResult> = scored.into_iter().map(|s| s.result).collect();
    static_table(&results).save(&out.join("table_static.csv"))?;
    let summary = static_summary(&results, &cfg.strategies);
    write_text(&out.join("summary.txt"), &summary)?;
    Ok(summary)
}

/// Push suite; same layout as [`bench_static`] with `table_push.csv`.
pub fn bench_push(cfg: &BenchConfig, out: &Path) -> Result<String, HarnessError> {
    create_dir(out)?;
    let scored = run_push_suite(cfg)?;
    write_trials(out, &scored, cfg.trajectories)?;
    let results: Vec<TrialResult> = scored.into_iter().map(|s| s.result).collect();
    push_table(&results).save(&out.join("table_push.csv"))?;
    let summary = push_summary(&results, &cfg.strategies);
    write_text(&out.join("summary.txt"), &summary)?;
    Ok(summary)
}

/// Speed suite; writes `speed.jsonl`, `table_speed.csv` and `summary.txt`.
pub fn bench_speed(cfg: &BenchConfig, out: &Path) -> Result<String, HarnessError> {
    create_dir(out)?;
    let entries = run_speed_suite(cfg)?;
    write_jsonl(&out.join("speed.jsonl"), &entries)?;
    speed_table(&entries).save(&out.join("table_speed.csv"))?;
    let summary = speed_summary(&entries, &cfg.strategies);
    write_text(&out.join("summary.txt"), &summary)?;
    Ok(summary)
}

/// CPU model and worker count, for timing reports.
pub fn hardware_description() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|m| m.trim().to_string())
        })
        .unwrap_or_else(|| "unknown".into());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!("cpu: {cpu}\navailable_parallelism: {cores}\n")
}

/// Throughput and parallel runs; writes `throughput.csv`, `parallel.csv`
/// and `summary.txt` (timings, so not reproducible).
pub fn bench_throughput(cfg: &BenchConfig, out: &Path) -> Result<String, HarnessError> {
    create_dir(out)?;
    let entries = run_throughput_suite(cfg)?;
    let mut table = Table {
        header: ["part", "strategy", "fps", "frames_timed", "mean_scan_points", "mean_template_points"]
            .map(String::from)
            .to_vec(),
        rows: Vec::new(),
    };
    for e in &entries {
        let t = &e.throughput;
        table.rows.push(vec![
            e.part_id.clone(),
            e.strategy.name().into(),
            format!("{:.1}", t.fps),
            t.frames_timed.to_string(),
            format!("{:.0}", t.mean_scan_points),
            format!("{:.0}", t.mean_template_points),
        ]);
    }
    table.save(&out.join("throughput.csv"))?;

    let demos: Vec<(String, ParallelDemo)> = ["two_static_cubes", "cube_and_toppling_owl"]
        .into_iter()
        .map(String::from)
        .zip(
            parallel_scenarios(cfg)?
                .iter()
                .map(|jobs| run_parallel_demo(jobs, &cfg.tracker))
                .collect::<Result<Vec<_>, _>>()?,
        )
        .collect();
    let mut par = Table {
        header: ["scenario", "job", "part", "success", "final_r_err_deg", "final_t_err_cm", "identical", "scaling"]
            .map(String::from)
            .to_vec(),
        rows: Vec::new(),
    };
    for (name, demo) in &demos {
        for (r, job) in demo.results.iter().zip(["a", "b"]) {
            par.rows.push(vec![
                name.clone(),
                job.into(),
                r.part_id.clone(),
                r.success.to_string(),
                format!("{:.3}", r.final_r_err_deg),
                format!("{:.3}", r.final_t_err_cm),
                demo.identical().to_string(),
                format!("{:.2}", demo.scaling()),
            ]);
        }
    }
    par.save(&out.join("parallel.csv"))?;

    let mut summary = hardware_description();
    for e in &entries {
        let _ = writeln!(
            summary,
            "{:10} {:10} {:7.1} fps on {:.0}-point scans",
            e.part_id,
            e.strategy.name(),
            e.throughput.fps,
            e.throughput.mean_scan_points
        );
    }
    for (name, demo) in &demos {
        let _ = writeln!(
            summary,
            "{name}: identical to sequential {}, aggregate scaling {:.2}x",
            demo.identical(),
            demo.scaling()
        );
    }
    write_text(&out.join("summary.txt"), &summary)?;
    Ok(summary)
}

/// Rebuilds the table of a finished run from `trials.jsonl` or `speed.jsonl`.
pub fn report(input: &Path) -> Result<Table, HarnessError> {
    let trials = input.join("trials.jsonl");
    let speed = input.join("speed.jsonl");
    if trials.is_file() {
        let results: Vec<TrialResult> = super::report::read_jsonl(&trials)?;
        let Some(first) = results.first() else {
            return Err(HarnessError::Precondition(format!("{} holds no trials", trials.display())));
        };
        match first.experiment.as_str() {
            "push" => Ok(push_table(&results)),
            _ => Ok(static_table(&results)),
        }
    } else if speed.is_file() {
        let entries: Vec<SpeedEntry> = super::report::read_jsonl(&speed)?;
        Ok(speed_table(&entries))
    } else {
        Err(HarnessError::Precondition(format!(
            "{} holds neither trials.jsonl nor speed.jsonl",
            input.display()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_tracker_section_keeps_bench_defaults() {
        let cfg = BenchConfig::from_toml("seeds = 2\n[tracker]\nxi_cm = 0.9\n").unwrap();
        assert_eq!(cfg.tracker.xi_cm, 0.9);
        assert!(!cfg.tracker.phase_gating);
        assert_eq!(cfg.tracker.delta1_deg, 30.0);
        let cfg = BenchConfig::from_toml("seeds = 2\n").unwrap();
        assert!(!cfg.tracker.phase_gating);
    }

    #[test]
    fn sections_and_units() {
        let cfg = BenchConfig::from_toml(
            "parts = [\"owl\", \"pipe\"]\nstrategies = [\"cuicp\", \"vanilla\"]\n\
             [static]\nvisibilities = [0.4]\nduration_s = 2.0\n\
             [speed]\nmotions = [\"rotation\"]\nmax_factor = 8.0\n\
             [throughput]\nframes = 300\n",
        )
        .unwrap();
        assert_eq!(cfg.parts, [PartKind::Owl, PartKind::Pipe]);
        assert_eq!(cfg.static_trials.visibilities, [0.4]);
        assert_eq!(cfg.static_trials.protocol.duration_s, 2.0);
        assert_eq!(cfg.static_trials.protocol.fps, 10.0);
        assert_eq!(cfg.speed.motions, [MotionKind::Rotation]);
        assert_eq!(cfg.speed.protocol.max_factor, 8.0);
        assert_eq!(cfg.throughput.protocol.frames, 300);
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            "seeds = 0",
            "bogus = 1",
            "[static]\nvisibilities = [1.5]",
            "[static]\nfpz = 3.0",
            "[throughput]\nframes = 50",
            "[tracker]\ndelta3 = 2.0",
            "parts = [\"teapot\"]",
        ] {
            assert!(BenchConfig::from_toml(bad).is_err(), "{bad}");
        }
    }
}
