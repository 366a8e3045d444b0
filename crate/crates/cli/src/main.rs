use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ringjam::cohort::{analyze, metrics_csv, run_cohort, CohortSpec};
use ringjam::{compute_metrics, run_session, Condition, ScenarioConfig, SessionLog, SessionMetrics};

/// Default output directory when `--out` is not given.
const OUT_ENV: &str = "RINGJAM_OUT_DIR";

#[derive(Parser)]
#[command(name = "ringjam", version, about = "Ring-road traffic sessions under manual, haptic and automated pedal control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one session and write its log.
    Simulate {
        #[arg(long, default_value = "manual")]
        condition: Condition,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML scenario file; see `default-config`.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output stem; `.rjlog` and `.json` are appended.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        dt: Option<f64>,
        /// Session length in seconds; the failure moves to its end.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Run a paired cohort and write metrics, statistics and plot data.
    Experiment {
        #[arg(long, default_value_t = 24)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "manual,haptic,automated")]
        conditions: Vec<Condition>,
        #[arg(long, default_value_t = 2024)]
        base_seed: u64,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Participants whose time series are extracted.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        extract: Vec<usize>,
    },
    /// Serve interactive sessions over WebSocket.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Print the default scenario configuration.
    DefaultConfig,
}

type CliResult<T> = Result<T, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            condition,
            seed,
            config,
            out,
            dt,
            duration,
        } => simulate(condition, seed, config.as_deref(), out, dt, duration),
        Command::Experiment {
            n,
            conditions,
            base_seed,
            workers,
            config,
            out,
            extract,
        } => experiment(n, conditions, base_seed, workers, config.as_deref(), out, extract),
        Command::Serve { port, host, config } => serve(&host, port, config.as_deref()),
        Command::DefaultConfig => {
            print!("{}", ringjam::config::default_config_toml());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<ScenarioConfig> {
    match path {
        Some(p) => ScenarioConfig::load(p).map_err(|e| format!("{}: {e}", p.display())),
        None => Ok(ScenarioConfig::default()),
    }
}

fn default_out() -> PathBuf {
    std::env::var_os(OUT_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

/// Files written so far; removed unless the run completes.
struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    done: bool,
}

impl Outputs {
    fn new() -> Self {
        Self {
            files: Vec::new(),
            dirs: Vec::new(),
            done: false,
        }
    }

    fn create_dir(&mut self, dir: &Path) -> CliResult<()> {
        if !dir.exists() {
            fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            self.dirs.push(dir.to_path_buf());
        }
        Ok(())
    }

    fn write(&mut self, path: PathBuf, contents: impl AsRef<[u8]>) -> CliResult<()> {
        self.files.push(path.clone());
        fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if self.done {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

fn summary_line(log: &SessionLog, m: &SessionMetrics) -> String {
    let gap = m
        .min_gap_after_failure
        .map(|g| format!("{g:.3}"))
        .unwrap_or_else(|| "-".into());
    format!(
        "condition={} seed={} end={:?} steps={} ego_speed_std={:.4} platoon_speed_std={:.4} braking_instances={} \
         jam_lifetime={:.2} throughput={:.3} min_gap_after_failure={} collision={}",
        log.config.condition,
        log.config.seed,
        log.end_reason,
        log.len(),
        m.ego_speed_std,
        m.platoon_speed_std,
        m.braking_instances,
        m.jam_lifetime,
        m.throughput,
        gap,
        m.collision
    )
}

fn simulate(
    condition: Condition,
    seed: u64,
    config: Option<&Path>,
    out: Option<PathBuf>,
    dt: Option<f64>,
    duration: Option<f64>,
) -> CliResult<()> {
    let mut cfg = load_config(config)?.with_condition(condition).with_seed(seed);
    if let Some(dt) = dt {
        cfg.dt = dt;
    }
    if let Some(d) = duration {
        cfg.duration = d;
        cfg.failure_time = d;
        cfg.transient = cfg.transient.min(d / 2.0);
    }
    cfg.validate().map_err(|e| e.to_string())?;
    let stem = out.unwrap_or_else(|| default_out().join(format!("session_{condition}_{seed}")));

    let mut outputs = Outputs::new();
    if let Some(parent) = stem.parent().filter(|p| !p.as_os_str().is_empty()) {
        outputs.create_dir(parent)?;
    }
    let log = run_session(&cfg).map_err(|e| e.to_string())?;
    let metrics = compute_metrics(&log).map_err(|e| e.to_string())?;
    let table = stem.with_extension("rjlog");
    let meta = stem.with_extension("json");
    outputs.files.push(table.clone());
    outputs.files.push(meta.clone());
    log.save(&stem).map_err(|e| format!("{}: {e}", stem.display()))?;
    outputs.done = true;
    println!("{}", summary_line(&log, &metrics));
    println!("wrote {} and {}", table.display(), meta.display());
    Ok(())
}

/// Columns of the time-series extracts, sampled at 10 Hz.
const EXTRACT_HEADER: &str = "t,ego_gap,ego_speed,vcmd,s_acc,s_brake,stiffness,target_acc,leader_speed,platoon_min_speed";

fn extract_csv(log: &SessionLog) -> String {
    let stride = (0.1 / log.config.dt).round().max(1.0) as usize;
    let n = log.vehicle_count();
    let leader = n - 1;
    let mut out = String::from(EXTRACT_HEADER);
    out.push('\n');
    for k in (0..log.len()).step_by(stride) {
        let e = &log.ego;
        let pmin = log.speeds.iter().map(|s| s[k]).fold(f64::INFINITY, f64::min);
        out.push_str(&format!(
            "{:.2},{:.4},{:.4},{:.4},{:.4},{:.4},{:.3},{:.4},{:.4},{:.4}\n",
            log.time[k],
            e.gap[k],
            e.speed[k],
            e.vcmd[k],
            e.s_acc[k],
            e.s_brake[k],
            e.stiffness[k],
            e.target_acc[k],
            log.speeds[leader][k],
            pmin
        ));
    }
    out
}

fn experiment(
    n: usize,
    conditions: Vec<Condition>,
    base_seed: u64,
    workers: Option<usize>,
    config: Option<&Path>,
    out: Option<PathBuf>,
    extract: Vec<usize>,
) -> CliResult<()> {
    if n == 0 {
        return Err("--n must be at least 1".into());
    }
    if workers == Some(0) {
        return Err("--workers must be at least 1".into());
    }
    let mut unique = conditions.clone();
    unique.sort();
    unique.dedup();
    if unique.len() != conditions.len() || conditions.is_empty() {
        return Err("--conditions must list distinct conditions".into());
    }
    let mut spec = CohortSpec::new(n, base_seed);
    spec.base_config = load_config(config)?;
    spec.conditions = conditions.clone();
    spec.workers = workers;
    spec.keep_logs_for = extract.iter().copied().filter(|&p| p < n).collect();
    let dir = out.unwrap_or_else(default_out);

    let mut outputs = Outputs::new();
    outputs.create_dir(&dir)?;
    let results = run_cohort(&spec).map_err(|e| e.to_string())?;
    let report = analyze(&results, &conditions);

    outputs.write(dir.join("metrics.csv"), metrics_csv(&results))?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?;
    outputs.write(dir.join("stats.json"), json)?;
    let series_dir = dir.join("timeseries");
    if results.iter().any(|r| r.log.is_some()) {
        outputs.create_dir(&series_dir)?;
    }
    for r in &results {
        if let Some(log) = &r.log {
            let name = format!("p{:02}_{}.csv", r.participant, r.condition);
            outputs.write(series_dir.join(name), extract_csv(log))?;
        }
    }
    outputs.done = true;

    for c in &conditions {
        let rs: Vec<_> = results.iter().filter(|r| r.condition == *c).collect();
        let mean = |f: fn(&SessionMetrics) -> f64| rs.iter().map(|r| f(&r.metrics)).sum::<f64>() / rs.len() as f64;
        println!(
            "{c:>9}: ego_speed_std={:.4} platoon_speed_std={:.4} braking={:.1} jam_lifetime={:.1} not_dissipated={} collisions={}",
            mean(|m| m.ego_speed_std),
            mean(|m| m.platoon_speed_std),
            mean(|m| m.braking_instances as f64),
            mean(|m| m.jam_lifetime),
            rs.iter().filter(|r| !r.metrics.jam_dissipated).count(),
            rs.iter().filter(|r| r.metrics.collision).count()
        );
    }
    println!("wrote {} sessions to {}", results.len(), dir.display());
    Ok(())
}

fn serve(host: &str, port: u16, config: Option<&Path>) -> CliResult<()> {
    let addr: SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| format!("bad address {host}:{port}: {e}"))?;
    let service = ringjam_service::ServiceConfig {
        scenario: load_config(config)?,
        ..Default::default()
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime
        .block_on(ringjam_service::serve(addr, service))
        .map_err(|e| e.to_string())
}
