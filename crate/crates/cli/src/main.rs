//! `depowder`: simulate scans, track parts, run benchmarks, rebuild reports.

use std::error::Error;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{Matrix3, Vector3};

use depowder::geometry::{PointCloud, RigidPose};
use depowder::harness::{self, BenchConfig};
use depowder::simulator::{
    generate_sequence, parse_points, read_sequence, write_sequence, MotionScriptConfig, PartKind, PartModel,
    SceneConfig, TriangleMesh,
};
use depowder::tracker::{init_tracker, Strategy, TrackerConfig, TrajectoryRecord, TrajectoryWriter};

#[derive(Parser)]
#[command(name = "depowder", version, about = "Pose tracking for parts emerging from powder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a scan sequence from a scene file.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        /// Keyframed motion; the part stays at the scene pose without one.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fps: f64,
        /// Seconds.
        #[arg(long)]
        duration: f64,
        /// Replaces the seed in the scene file.
        #[arg(long)]
        seed: u64,
    },
    /// Track a part through a scan sequence and write its trajectory.
    Track {
        /// Model as an OBJ mesh, or a point list with one "x y z" per line.
        #[arg(long)]
        cad: PathBuf,
        #[arg(long)]
        frames: PathBuf,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// Tracker settings; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Initial pose "x,y,z,roll,pitch,yaw" in cm and degrees. Defaults to
        /// the first frame's pose in the sequence manifest.
        #[arg(long, allow_hyphen_values = true)]
        init: Option<String>,
    },
    /// Run an experiment suite.
    Bench {
        #[arg(value_enum)]
        suite: Suite,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild the table of a finished bench run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one of the built-in part meshes as OBJ.
    Part {
        #[arg(value_enum)]
        kind: PartArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Vanilla,
    Continuous,
    Cuicp,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Vanilla => Strategy::Vanilla,
            StrategyArg::Continuous => Strategy::Continuous,
            StrategyArg::Cuicp => Strategy::ConditionalUpdate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Static,
    Push,
    Speed,
    Throughput,
}

#[derive(Clone, Copy, ValueEnum)]
enum PartArg {
    Cube,
    Cup,
    Propeller,
    Owl,
    Pipe,
}

impl From<PartArg> for PartKind {
    fn from(p: PartArg) -> Self {
        match p {
            PartArg::Cube => PartKind::Cube,
            PartArg::Cup => PartKind::Cup,
            PartArg::Propeller => PartKind::Propeller,
            PartArg::Owl => PartKind::Owl,
            PartArg::Pipe => PartKind::Pipe,
        }
    }
}

type Result<T> = std::result::Result<T, Box<dyn Error>>;

/// Failure after which the partial output is still written.
#[derive(Debug)]
struct TrackingLost {
    frame: usize,
    reason: String,
}

impl std::fmt::Display for TrackingLost {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "tracking lost at frame {}: {}", self.frame, self.reason)
    }
}

impl Error for TrackingLost {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate {
            scene,
            script,
            out,
            fps,
            duration,
            seed,
        } => simulate(&scene, script.as_deref(), &out, fps, duration, seed),
        Command::Track {
            cad,
            frames,
            strategy,
            config,
            out,
            init,
        } => track(&cad, &frames, strategy.into(), config.as_deref(), &out, init.as_deref()),
        Command::Bench { suite, config, out } => bench(suite, &config, &out),
        Command::Report { input, out } => report(&input, &out),
        Command::Part { kind, out } => PartKind::from(kind).mesh().write_obj(&out).map_err(Into::into),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is::<TrackingLost>() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn simulate(scene: &Path, script: Option<&Path>, out: &Path, fps: f64, duration: f64, seed: u64) -> Result<()> {
    let (mut cfg, base) = SceneConfig::load(scene)?;
    cfg.seed = seed;
    let scene = cfg.build(&base)?;
    let script = script.map(MotionScriptConfig::load).transpose()?.map(|s| s.build()).transpose()?;
    let frames = generate_sequence(&scene, script.as_ref(), fps, duration)?;
    write_sequence(out, &frames)?;
    eprintln!("wrote {} frames to {}", frames.len(), out.display());
    Ok(())
}

fn load_cad(path: &Path, xi_cm: f64) -> Result<Arc<PointCloud>> {
    let is_obj = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"));
    if is_obj {
        let mesh = TriangleMesh::load_obj(path)?;
        let part = PartModel::from_mesh("cad", mesh, vec![Matrix3::identity()], xi_cm, 0)?;
        Ok(part.cad)
    } else {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(Arc::new(parse_points(&text)?.0))
    }
}

fn parse_init(text: &str) -> Result<RigidPose> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| format!("--init: {e}"))?;
    let [x, y, z, roll, pitch, yaw] = v[..] else {
        return Err(format!("--init needs 6 comma-separated numbers, got {}", v.len()).into());
    };
    Ok(RigidPose::from_rpy_deg([roll, pitch, yaw], Vector3::new(x, y, z) / 100.0))
}

fn track(
    cad: &Path,
    frames_dir: &Path,
    strategy: Strategy,
    config: Option<&Path>,
    out: &Path,
    init: Option<&str>,
) -> Result<()> {
    let cfg = match config {
        Some(path) => TrackerConfig::load(path)?,
        None => TrackerConfig::default(),
    }
    .with_strategy(strategy);
    let cad = load_cad(cad, cfg.xi_cm)?;
    let frames = read_sequence(frames_dir)?;
    let Some(first) = frames.first() else {
        return Err(format!("{} holds no frames", frames_dir.display()).into());
    };
    let t_init = match init {
        Some(text) => parse_init(text)?,
        None => first.truth_pose,
    };
    let mut state = init_tracker(cad, t_init, &first.points, &cfg)?;
    let file = File::create(out).map_err(|e| format!("{}: {e}", out.display()))?;
    let mut writer = TrajectoryWriter::new(std::io::BufWriter::new(file));
    for (i, frame) in frames.iter().enumerate() {
        let report = state.step(&frame.points).map_err(|e| TrackingLost {
            frame: i,
            reason: e.to_string(),
        });
        let report = match report {
            Ok(r) => r,
            Err(lost) => {
                writer.into_inner().into_inner().map_err(|e| e.into_error())?;
                return Err(lost.into());
            }
        };
        writer.write(&TrajectoryRecord::from_step(i, frame.timestamp, &report))?;
    }
    writer.into_inner().into_inner().map_err(|e| e.into_error())?;
    eprintln!("tracked {} frames", frames.len());
    Ok(())
}

fn bench(suite: Suite, config: &Path, out: &Path) -> Result<()> {
    let cfg = BenchConfig::load(config)?;
    let summary = match suite {
        Suite::Static => harness::bench_static(&cfg, out)?,
        Suite::Push => harness::bench_push(&cfg, out)?,
        Suite::Speed => harness::bench_speed(&cfg, out)?,
        Suite::Throughput => harness::bench_throughput(&cfg, out)?,
    };
    print!("{summary}");
    Ok(())
}

fn report(input: &Path, out: &Path) -> Result<()> {
    harness::report(input)?.save(out)?;
    Ok(())
}
