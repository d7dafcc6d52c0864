//! Command-line front end.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use vpm::codec::{build_code, rate_accounting, simulate_trials, write_trace_csv, CodeParams, EstimateMode};
use vpm::config::{load_game, load_game_config, parse_pstar, validate_game, MonitoringConfig};
use vpm::constraint::compute_rstar;
use vpm::deviation::DeviationSpec;
use vpm::region::sweep::{write_hull_csv, write_region_csv};
use vpm::region::{sweep_region, RegionResult, SweepOptions};
use vpm::repeated::{epsilon_equilibrium_check, run_match, SimConfig};
use vpm::seed;


macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout(), $($arg)*)?
    };
}

#[derive(Parser)]
#[command(name = "vpm", version, about = "Encoder-assisted monitoring for repeated games")]
struct Cli {
    /// Master seed; every stochastic sub-run derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps and trials (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the information constraint for one mixed profile.
    Analyze(AnalyzeArgs),
    /// Sweep the product grid and write region and hull CSVs.
    Region(RegionArgs),
    /// Monte Carlo error estimate of the block code.
    SimulateCoding(CodingArgs),
    /// Play the block grim-trigger protocol.
    SimulateGame(GameArgs),
    /// Print the CSV and JSON formats.
    Schema,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Game JSON file.
    #[arg(long)]
    game: PathBuf,
    /// `P*` inline (`0.9,0.1;0.9,0.1`), as a JSON array, or a file holding either.
    #[arg(long)]
    pstar: String,
    /// Print the full report as JSON.
    #[arg(long)]
    json: bool,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RegionArgs {
    #[arg(long)]
    game: PathBuf,
    /// Comma-separated noise levels of the binary channel; replaces the
    /// file's monitoring block.
    #[arg(long, value_delimiter = ',')]
    delta: Vec<f64>,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Support floor; when omitted both 0 and `step` are run.
    #[arg(long)]
    floor: Option<f64>,
    /// Skip hulls (needed for three or more players).
    #[arg(long)]
    no_hull: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    SuspectOnly,
}

#[derive(Args)]
struct CodingArgs {
    #[arg(long)]
    game: PathBuf,
    #[arg(long)]
    pstar: String,
    /// Block length.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Rate slack.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Typicality slack (default: the rate slack).
    #[arg(long)]
    typicality: Option<f64>,
    #[arg(long)]
    raw_threshold: Option<usize>,
    /// Deviation as JSON, e.g. `{"player":0,"kind":"constant","action":1}`,
    /// or a file holding it.
    #[arg(long)]
    deviation: Option<String>,
    #[arg(long, value_enum, default_value_t = Mode::Full)]
    mode: Mode,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GameArgs {
    #[arg(long)]
    game: PathBuf,
    /// Match config JSON (see `vpm schema`).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

/// Match config file: a simulation config plus the equilibrium check.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MatchFile {
    #[serde(flatten)]
    sim: SimConfig,
    /// Matches per batch in the equilibrium check.
    #[serde(default = "default_matches")]
    matches: usize,
    /// Deviations tested by the equilibrium check; empty skips the check.
    #[serde(default)]
    library: Vec<DeviationSpec>,
}

fn default_matches() -> usize {
    100
}

#[derive(Debug, Serialize)]
struct RunManifest {
    command: String,
    config: serde_json::Value,
    master_seed: u64,
    version: String,
    outputs: Vec<String>,
    duration_secs: f64,
}

fn write_manifest(
    dir: &Path,
    command: &str,
    config: serde_json::Value,
    master_seed: u64,
    outputs: &[PathBuf],
    started: Instant,
) -> Result<PathBuf> {
    let manifest = RunManifest {
        command: command.to_string(),
        config,
        master_seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        duration_secs: started.elapsed().as_secs_f64(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))
}

fn out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))
}

/// Inline text, or the contents of a file when the argument names one.
fn inline_or_file(arg: &str) -> Result<String> {
    let p = Path::new(arg);
    if p.is_file() {
        fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))
    } else {
        Ok(arg.to_string())
    }
}

fn analyze(args: &AnalyzeArgs) -> Result<()> {
    let (game, monitoring) = load_game(&args.game)?;
    let pstar = parse_pstar(&inline_or_file(&args.pstar)?, &game)?;
    let report = compute_rstar(&game, &monitoring, &pstar)?;
    let verdict = if report.satisfied { "SATISFIED" } else { "VIOLATED" };
    let text = serde_json::to_string_pretty(&report)?;
    if args.json {
        out!("{text}");
    } else {
        out!(
            "R*={:.3} bits, threshold={:.3}, {verdict}",
            report.rstar, report.threshold
        );
        for (i, v) in report.per_deviator.iter().enumerate() {
            out!(
                "  deviator {}: chi={}, max term={:.6}, value={:.6}",
                i + 1,
                report.colorings[i].count,
                report.max_term(i),
                v
            );
        }
    }
    if let Some(path) = &args.out {
        fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn floor_tag(x: f64) -> String {
    format!("{x}").replace('.', "p")
}

fn region(args: &RegionArgs, master_seed: u64, started: Instant) -> Result<()> {
    let raw = load_game_config(&args.game)?;
    let floors = match args.floor {
        Some(f) => vec![f],
        None => vec![0.0, args.step],
    };
    let cases: Vec<(Option<f64>, vpm::config::GameConfig)> = if args.delta.is_empty() {
        vec![(None, raw.clone())]
    } else {
        args.delta
            .iter()
            .map(|&d| {
                let mut c = raw.clone();
                c.monitoring = MonitoringConfig::Fig3 { delta: d };
                (Some(d), c)
            })
            .collect()
    };
    out_dir(&args.out_dir)?;
    let mut outputs = vec![];
    let mut summary = vec![];
    for (delta, cfg) in &cases {
        let (game, monitoring) = validate_game(cfg)?;
        for &floor in &floors {
            let mut options = SweepOptions::new(args.step, floor);
            options.hull = !args.no_hull;
            let result: RegionResult = sweep_region(&game, &monitoring, options)?;
            let stem = match delta {
                Some(d) => format!("delta_{}_floor_{}", floor_tag(*d), floor_tag(floor)),
                None => format!("floor_{}", floor_tag(floor)),
            };
            let region_path = args.out_dir.join(format!("region_{stem}.csv"));
            write_region_csv(&game, &result, create(&region_path)?)?;
            outputs.push(region_path);
            let in_r = result.records.iter().filter(|r| r.in_r).count();
            let mut line = json!({
                "delta": delta,
                "floor": floor,
                "points": result.records.len(),
                "in_r": in_r,
            });
            if let Some(h) = &result.hulls {
                let hull_path = args.out_dir.join(format!("hull_{stem}.csv"));
                write_hull_csv(&result, create(&hull_path)?)?;
                outputs.push(hull_path);
                line["area_ratio"] = json!(h.area_ratio());
                line["clipped_ratio"] = json!(h.clipped_ratio());
                line["grid_ratio"] = json!(h.grid_ratio());
                line["covers_folk"] = json!(h.covers_folk());
                out!(
                    "delta={} floor={floor}: {in_r}/{} points in R, area ratio {:.4} (clipped {:.4}, grid {:.4}), covers folk: {}",
                    delta.map_or_else(|| "file".to_string(), |d| d.to_string()),
                    result.records.len(),
                    h.area_ratio(),
                    h.clipped_ratio(),
                    h.grid_ratio(),
                    h.covers_folk()
                );
            } else {
                out!(
                    "delta={} floor={floor}: {in_r}/{} points in R",
                    delta.map_or_else(|| "file".to_string(), |d| d.to_string()),
                    result.records.len()
                );
            }
            summary.push(line);
        }
    }
    let summary_path = args.out_dir.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    outputs.push(summary_path);
    let config = json!({
        "game": raw,
        "delta": args.delta,
        "step": args.step,
        "floors": floors,
        "hull": !args.no_hull,
    });
    write_manifest(&args.out_dir, "region", config, master_seed, &outputs, started)?;
    Ok(())
}

fn simulate_coding(args: &CodingArgs, master_seed: u64, started: Instant) -> Result<()> {
    let (game, monitoring) = load_game(&args.game)?;
    let pstar = parse_pstar(&inline_or_file(&args.pstar)?, &game)?;
    let deviation: Option<DeviationSpec> = match &args.deviation {
        Some(text) => {
            let d: DeviationSpec = serde_json::from_str(&inline_or_file(text)?).context("cannot parse deviation")?;
            d.validate(&game)?;
            Some(d)
        }
        None => None,
    };
    let mut params = CodeParams::new(args.n, args.epsilon, seed::derive(&[master_seed, 1]));
    params.typicality_epsilon = args.typicality;
    params.raw_threshold = args.raw_threshold;
    let code = build_code(&game, &monitoring, &pstar, params)?;
    let mode = match args.mode {
        Mode::Full => EstimateMode::Full,
        Mode::SuspectOnly => EstimateMode::SuspectOnly,
    };
    let trial_seed = seed::derive(&[master_seed, 2]);
    let (estimate, records) = simulate_trials(&code, deviation.as_ref(), args.trials, trial_seed, mode)?;
    out_dir(&args.out_dir)?;
    let trace_path = args.out_dir.join("coding_trace.csv");
    write_trace_csv(&records, create(&trace_path)?)?;
    // accounting of one honest-looking sample: the all-most-likely sequence
    let likely: Vec<usize> = (0..game.players())
        .map(|k| {
            let p = pstar.marginal(k);
            (0..p.len()).fold(0, |b, a| if p[a] > p[b] { a } else { b })
        })
        .collect();
    let accounting = rate_accounting(&code, &vec![game.profiles().index(&likely); args.n])?;
    let report = json!({
        "rstar": code.rstar(),
        "threshold": code.threshold(),
        "epsilon": code.epsilon(),
        "typicality_epsilon": code.typicality_epsilon(),
        "raw_threshold": code.raw_threshold(),
        "estimate": estimate,
        "accounting_example": accounting,
    });
    let report_path = args.out_dir.join("coding_report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    out!(
        "R*={:.3} bits, threshold={:.3}, n={}, trials={}",
        code.rstar(),
        code.threshold(),
        args.n,
        estimate.trials
    );
    out!(
        "error estimate {:.4} (95% CI {:.4}..{:.4}); E1 {}, E2 {}, suspect {}, overflow {}, stage {}, search {}",
        estimate.estimate,
        estimate.ci95.0,
        estimate.ci95.1,
        estimate.e1,
        estimate.e2,
        estimate.suspect_misidentified,
        estimate.overflow,
        estimate.stage_ambiguity,
        estimate.search_too_large
    );
    let config = json!({
        "game": load_game_config(&args.game)?,
        "pstar": pstar,
        "n": args.n,
        "trials": args.trials,
        "epsilon": args.epsilon,
        "typicality": args.typicality,
        "raw_threshold": args.raw_threshold,
        "deviation": deviation,
        "mode": match args.mode { Mode::Full => "full", Mode::SuspectOnly => "suspect_only" },
    });
    write_manifest(
        &args.out_dir,
        "simulate-coding",
        config,
        master_seed,
        &[trace_path, report_path],
        started,
    )?;
    Ok(())
}

fn simulate_game(args: &GameArgs, seed_flag: Option<u64>, started: Instant) -> Result<()> {
    let (game, monitoring) = load_game(&args.game)?;
    let text = fs::read_to_string(&args.config).with_context(|| format!("cannot read {}", args.config.display()))?;
    let mut file: MatchFile = serde_json::from_str(&text).map_err(|e| {
        anyhow::anyhow!(
            "{}: line {} column {}: {e}",
            args.config.display(),
            e.line(),
            e.column()
        )
    })?;
    if let Some(s) = seed_flag {
        file.sim.master_seed = s;
    }
    let master_seed = file.sim.master_seed;
    let trace = run_match(&game, &monitoring, &file.sim)?;
    out_dir(&args.out_dir)?;
    let trace_path = args.out_dir.join("match_trace.csv");
    trace.write_csv(create(&trace_path)?)?;
    let mut outputs = vec![trace_path];
    out!(
        "match: n={} B={} utilities {:?}, E={}",
        file.sim.n,
        file.sim.blocks,
        trace.utilities.iter().map(|u| format!("{u:.4}")).collect::<Vec<_>>(),
        u8::from(trace.event)
    );
    if !file.library.is_empty() {
        let report = epsilon_equilibrium_check(&game, &monitoring, &file.sim, &file.library, file.matches)?;
        let path = args.out_dir.join("equilibrium_report.json");
        fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
        outputs.push(path);
        let mut summary = String::new();
        summary += &format!(
            "honest utilities {:?} (target {:?}), false alarms {:.3}\n",
            report.honest_utilities, report.target, report.false_alarm_rate
        );
        for d in &report.deviations {
            summary += &format!(
                "{}: utility {:.4}, gain {:+.4} (allowed {:.4}), detected {:.3}\n",
                d.label, d.utility, d.gain, d.tolerance, d.detection_rate
            );
        }
        summary += &format!(
            "max gain {:+.4}, eps_eq {} -> {}\n",
            report.max_gain,
            report.eq_epsilon,
            if report.pass { "PASS" } else { "FAIL" }
        );
        write!(std::io::stdout(), "{summary}")?;
        let path = args.out_dir.join("equilibrium_summary.txt");
        fs::write(&path, summary)?;
        outputs.push(path);
    }
    let config = json!({
        "game": load_game_config(&args.game)?,
        "match": file,
    });
    write_manifest(&args.out_dir, "simulate-game", config, master_seed, &outputs, started)?;
    Ok(())
}

const SCHEMA: &str = "\
game file (JSON):
  players                int, K >= 2
  actions                [[label, ...], ...] one list per player, file order kept
  utilities              one row per action profile, row-major with player 1 slowest;
                         each row lists the K payoffs
  monitoring             {\"kind\": \"fig3\", \"delta\": d}  binary channel, flip d/2
                         {\"kind\": \"table\", \"signals\": [[label, ...], ...],
                          \"probabilities\": one row per action profile over
                          signal profiles, row-major}
  public_alphabet_size   int, |S0| >= 1

match config (JSON, simulate-game):
  n, blocks, code_epsilon, test_epsilon
  eq_epsilon             optional, default 0.1
  pstar                  {\"marginals\": [[...], ...]}
  deviation              optional, e.g. {\"player\": 0, \"kind\": \"constant\", \"action\": 1,
                         \"start_stage\": 400}; kinds: iid {distribution}, constant {action},
                         periodic {pattern}, scripted {actions}, exact_type_shuffle
  master_seed            int (overridden by --seed)
  layer                  \"codec\" | \"ideal\"
  on_decode_failure      \"flag\" | \"ignore\"
  matches, library       equilibrium check batch size and deviation list

region_<stem>.csv:
  p<k>_<action> ...      grid point P*, one column per player and action
  u1 .. uK               expected utilities
  rstar                  information constraint value in bits
  in_r                   true iff rstar < log2|S0|
  ir                     true iff individually rational

hull_<stem>.csv:
  hull                   clipped | ir_points | folk | grid_folk
  vertex                 index along the counter-clockwise boundary
  u1, u2                 vertex coordinates

coding_trace.csv:
  trial, seed            trial index and derived seed
  deviation              deviation label or none
  deviator               1-based player, empty for none
  suspect                1-based suspect chosen by the encoder
  error_class            none | overflow | encoder_error | search_too_large | suspect |
                         stage_ambiguity | e1 | e2
  mismatch               true iff some decoder output differs from the truth

match_trace.csv:
  block                  1-based block index
  tested_block           block whose decoded content was tested, empty for none
  E_k_i                  1 iff player k declared player i a deviator
  punish_k               1-based punishment target of player k, 0 for none
  u_k                    block-average utility of player k
  decode_failures        decoders that failed on the previous block

manifest.json (every command with --out-dir):
  command, config        subcommand and its resolved inputs
  master_seed, version   seed used and crate version
  outputs                files written
  duration_secs          wall time
";

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    let started = Instant::now();
    let master_seed = cli.seed.unwrap_or(0);
    match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Region(a) => region(a, master_seed, started),
        Command::SimulateCoding(a) => simulate_coding(a, master_seed, started),
        Command::SimulateGame(a) => simulate_game(a, cli.seed, started),
        Command::Schema => {
            std::io::stdout().write_all(SCHEMA.as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed pipe (e.g. `| head`) is not a failure
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe) => {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
