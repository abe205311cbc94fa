//! Command line front end. [`run`] returns the process exit code.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use tsn_ids_core::routes::{check_routes, RouteConfig};
use tsn_ids_core::{DetectorConfig, Rule};

use crate::monitor::{run_pipeline, MonitorOptions, MonitorOutcome};
use crate::notice_log::{NoticeLog, NoticeRecord};
use crate::pcap::open_pcap;
use crate::scenario::{generate, load_script, load_truth, write_corpus, ScenarioScript};
use crate::verify::{verify_records, VerifyReport};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NOTICES: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

/// Environment variable holding the log filter (e.g. `debug`).
pub const LOG_LEVEL_ENV: &str = "TSNZEEK_LOG_LEVEL";

#[derive(Debug, Parser)]
#[command(
    name = "tsn-ids",
    version,
    about = "Intrusion detection for TSN (SRP / FRER) captures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Replay a capture through the detector and log notices.
    Monitor(MonitorArgs),
    /// Generate a labelled capture from a scenario script or preset.
    Generate(GenerateArgs),
    /// Replay a capture and compare its notices with ground truth.
    Verify(VerifyArgs),
    /// Check FRER member paths for shared links.
    CheckRoutes(CheckRoutesArgs),
}

#[derive(Debug, clap::Args)]
pub struct MonitorArgs {
    #[arg(long)]
    pub pcap: PathBuf,
    /// Detector configuration (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Notice log; JSON lines go to stdout when omitted.
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Replay speed relative to capture time; 0 replays unpaced.
    #[arg(long, default_value_t = 0.0)]
    pub speed: f64,
    /// Omit wall-clock fields so runs are byte-identical.
    #[arg(long)]
    pub fixed_clock: bool,
    /// Route configuration (JSON) checked before the replay.
    #[arg(long)]
    pub routes: Option<PathBuf>,
    /// Write the final detector state (JSON).
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Benign,
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    A7,
    HubDelay,
}

#[derive(Debug, clap::Args)]
pub struct GenerateArgs {
    /// Scenario script (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub script: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Overrides the script's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Hub delay for the hub-delay preset.
    #[arg(long, default_value_t = 15.0)]
    pub hub_delay_ms: f64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// File stem; defaults to the scenario name.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, clap::Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub pcap: PathBuf,
    /// Ground truth; defaults to `<pcap stem>.truth.json` next to the capture.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Detector configuration overriding the one recorded in the truth file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub fixed_clock: bool,
}

#[derive(Debug, clap::Args)]
pub struct CheckRoutesArgs {
    #[arg(long)]
    pub routes: PathBuf,
}

type CliResult = Result<i32, String>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                EXIT_ERROR
            } else {
                EXIT_CLEAN
            };
        }
    };
    let result = match cli.command {
        Command::Monitor(a) => monitor(a),
        Command::Generate(a) => generate_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::CheckRoutes(a) => check_routes_cmd(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    })
}

pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_LEVEL_ENV, "warn");
    let _ = env_logger::Builder::from_env(env)
        .format_timestamp(None)
        .try_init();
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("{what} {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{what} {}: {e}", path.display()))
}

pub fn load_config(path: &Path) -> Result<DetectorConfig, String> {
    let cfg: DetectorConfig = read_json(path, "config")?;
    cfg.validate()
        .map_err(|e| format!("config {}: {e}", path.display()))?;
    Ok(cfg)
}

fn open_frames(
    path: &Path,
) -> Result<impl Iterator<Item = crate::pcap::TimestampedFrame> + Send, String> {
    let reader = open_pcap(path).map_err(|e| format!("pcap {}: {e}", path.display()))?;
    // A truncated tail ends the replay; earlier records are still processed.
    let display = path.display().to_string();
    Ok(reader.map_while(move |r| r.map_err(|e| log::warn!("pcap {display}: {e}")).ok()))
}

fn log_sink(path: Option<&Path>, fixed_clock: bool) -> Result<NoticeLog<Box<dyn Write>>, String> {
    let out: Box<dyn Write> = match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| format!("log {}: {e}", p.display()))?,
        )),
        None => Box::new(io::stdout()),
    };
    Ok(NoticeLog::new(out, fixed_clock))
}

fn summary(outcome: &MonitorOutcome) -> String {
    let r = &outcome.report;
    let mut s = format!(
        "frames_in={} published={} other={} parse_errors={} notices={} median_lag_us={:.1} p99_lag_us={:.1} wall_s={:.3}",
        r.frames_in, r.frames_published, r.other_count, r.parse_errors, outcome.notices_total, r.lag.median_us, r.lag.p99_us, r.wall_s
    );
    for (code, n) in &outcome.notices_by_code {
        s.push_str(&format!("\n  {code}: {n}"));
    }
    for w in &outcome.shared_nodes {
        s.push_str(&format!(
            "\n  warning: stream {} paths {:?} share node {}",
            w.stream_id, w.paths, w.node
        ));
    }
    s
}

fn monitor(a: MonitorArgs) -> CliResult {
    let config = match &a.config {
        Some(p) => load_config(p)?,
        None => DetectorConfig::default(),
    };
    let routes = a
        .routes
        .as_deref()
        .map(|p| read_json::<RouteConfig>(p, "routes"))
        .transpose()?;
    let opts = MonitorOptions {
        config,
        speed: a.speed,
        routes,
        ..MonitorOptions::default()
    };
    let frames = open_frames(&a.pcap)?;
    let mut log = log_sink(a.log.as_deref(), a.fixed_clock)?;
    let outcome =
        run_pipeline(frames, &opts, |n| log.emit(n).map(drop)).map_err(|e| e.to_string())?;
    let text = summary(&outcome);
    if a.log.is_some() {
        println!("{text}");
    } else {
        eprintln!("{text}");
    }
    if let Some(p) = &a.snapshot {
        let json = serde_json::to_string_pretty(&outcome.snapshot).map_err(|e| e.to_string())?;
        std::fs::write(p, json + "\n").map_err(|e| format!("snapshot {}: {e}", p.display()))?;
    }
    Ok(if outcome.notices_total > 0 {
        EXIT_NOTICES
    } else {
        EXIT_CLEAN
    })
}

pub fn preset_script(preset: Preset, seed: u64, hub_delay_ms: f64) -> ScenarioScript {
    match preset {
        Preset::Benign => ScenarioScript::benign(seed, 10.0),
        Preset::A1 => ScenarioScript::attack(Rule::A1, seed),
        Preset::A2 => ScenarioScript::attack(Rule::A2, seed),
        Preset::A3 => ScenarioScript::attack(Rule::A3, seed),
        Preset::A4 => ScenarioScript::attack(Rule::A4, seed),
        Preset::A5 => ScenarioScript::attack(Rule::A5, seed),
        Preset::A6 => ScenarioScript::attack(Rule::A6, seed),
        Preset::A7 => ScenarioScript::attack(Rule::A7, seed),
        Preset::HubDelay => ScenarioScript::hub_delay(hub_delay_ms, seed),
    }
}

fn generate_cmd(a: GenerateArgs) -> CliResult {
    let mut script = match (&a.script, a.preset) {
        (Some(p), _) => load_script(p).map_err(|e| format!("{}: {e}", p.display()))?,
        (None, Some(preset)) => preset_script(preset, 0, a.hub_delay_ms),
        (None, None) => return Err("either --script or --preset is required".into()),
    };
    if let Some(seed) = a.seed {
        script.seed = seed;
    }
    let corpus = generate(&script).map_err(|e| e.to_string())?;
    let stem = a
        .name
        .or_else(|| script.name.clone())
        .unwrap_or_else(|| "scenario".into());
    let files = write_corpus(&corpus, &a.out, &stem).map_err(|e| e.to_string())?;
    println!(
        "wrote {} frames to {} (truth {}, routes {})",
        corpus.frames.len(),
        files.pcap.display(),
        files.truth.display(),
        files.routes.display()
    );
    Ok(EXIT_CLEAN)
}

fn default_truth_path(pcap: &Path) -> PathBuf {
    let stem = pcap
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    pcap.with_file_name(format!("{stem}.truth.json"))
}

/// Replays `pcap`, logs notices, and checks them against `truth`.
pub fn verify_capture(
    pcap: &Path,
    truth: &crate::scenario::Truth,
    config: Option<DetectorConfig>,
    log: Option<&Path>,
    fixed_clock: bool,
) -> Result<(VerifyReport, Vec<NoticeRecord>, MonitorOutcome), String> {
    let opts = MonitorOptions {
        config: config.unwrap_or_else(|| truth.detector_config.clone()),
        routes: Some(truth.routes.clone()),
        ..MonitorOptions::default()
    };
    let frames = open_frames(pcap)?;
    let mut sink = match log {
        Some(p) => Some(
            NoticeLog::create(p, fixed_clock).map_err(|e| format!("log {}: {e}", p.display()))?,
        ),
        None => None,
    };
    let mut records = Vec::new();
    let outcome = run_pipeline(frames, &opts, |n| {
        match &mut sink {
            Some(s) => records.push(s.emit(n)?),
            None => records.push(NoticeRecord::from_notice(n)),
        }
        Ok(())
    })
    .map_err(|e| e.to_string())?;
    Ok((verify_records(&records, truth), records, outcome))
}

fn verify_cmd(a: VerifyArgs) -> CliResult {
    let truth_path = a
        .truth
        .clone()
        .unwrap_or_else(|| default_truth_path(&a.pcap));
    let truth =
        load_truth(&truth_path).map_err(|e| format!("truth {}: {e}", truth_path.display()))?;
    let config = a.config.as_deref().map(load_config).transpose()?;
    let (report, _, outcome) =
        verify_capture(&a.pcap, &truth, config, a.log.as_deref(), a.fixed_clock)?;
    println!("{}", summary(&outcome));
    for e in &report.expectations {
        let mark = if e.satisfied { "ok     " } else { "MISSING" };
        println!(
            "{mark} {} [{}] matched {} (min {})",
            e.note, e.label, e.matched, e.min_count
        );
    }
    for r in &report.unexpected {
        println!(
            "UNEXPECTED {} at {} stream {}: {}",
            r.note,
            r.ts,
            r.stream_id.as_deref().unwrap_or("-"),
            r.msg
        );
    }
    println!("known-benign notices: {}", report.known_benign);
    if report.passed() {
        println!("verify: PASS");
        Ok(EXIT_CLEAN)
    } else {
        println!("verify: FAIL");
        Ok(EXIT_MISMATCH)
    }
}

fn check_routes_cmd(a: CheckRoutesArgs) -> CliResult {
    let routes: RouteConfig = read_json(&a.routes, "routes")?;
    let findings =
        check_routes(&routes, 0.0).map_err(|e| format!("routes {}: {e}", a.routes.display()))?;
    let mut out = NoticeLog::new(io::stdout(), true);
    for n in &findings.notices {
        out.emit(n).map_err(|e| e.to_string())?;
    }
    for w in &findings.shared_nodes {
        eprintln!(
            "warning: stream {} paths {:?} share node {}",
            w.stream_id, w.paths, w.node
        );
    }
    Ok(if findings.notices.is_empty() {
        EXIT_CLEAN
    } else {
        EXIT_NOTICES
    })
}
