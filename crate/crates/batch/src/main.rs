use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dramaturg_batch::{
    ablate, annotation_sheet, judge_storylines, read_annotations, run_batch, score_checks, to_jsonl, BatchOptions,
    RunOutcome, RunStats,
};
use dramaturg_core::llm::BackendSpec;
use dramaturg_core::script::{demo_script, load_script, ScriptSetting};
use dramaturg_core::session::{EngineConfig, PlayRecord};
use serde::Serialize;

/// Generate plays in bulk and evaluate them.
#[derive(Parser)]
#[command(name = "dramaturg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play N complete plays and write their records and statistics.
    Run {
        #[command(flatten)]
        play: PlayArgs,
        /// Directory for `run-NNN.json` records and `stats.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Statistics of recorded plays, computed two ways.
    Stats {
        #[arg(long)]
        plays: PathBuf,
    },
    /// Emit a blank check-annotation sheet, one JSON line per check.
    AnnotateSheet {
        #[arg(long)]
        plays: PathBuf,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Precision, recall and F1 of objective checks against annotations.
    ScoreChecks {
        #[arg(long)]
        plays: PathBuf,
        #[arg(long)]
        annotations: PathBuf,
    },
    /// Ask a judge model to score each recorded storyline.
    Judge {
        #[arg(long)]
        plays: PathBuf,
        /// Judge backend: demo, demo:<p> or http.
        #[arg(long, default_value = "demo")]
        backend: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the full, no-instruction and no-monologue configurations.
    Ablate {
        #[command(flatten)]
        play: PlayArgs,
        /// Also judge every group with this backend.
        #[arg(long)]
        judge: Option<String>,
        /// Directory for per-group records and `ablation.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PlayArgs {
    /// Script file (TOML); the bundled demo when absent.
    #[arg(long)]
    script: Option<PathBuf>,
    /// demo, demo:<p> (p = chance a check passes) or http.
    #[arg(long, default_value = "demo")]
    backend: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "runs", default_value_t = 10)]
    n_runs: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 5_000)]
    max_ticks: usize,
    /// Engine config file (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one engine setting, e.g. `--set force_complete=12`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Actors get no director instruction.
    #[arg(long)]
    no_instruction: bool,
    /// Prompts carry stored content instead of monologues.
    #[arg(long)]
    no_monologue: bool,
}

type CliResult<T> = Result<T, String>;

impl PlayArgs {
    fn setting(&self) -> CliResult<ScriptSetting> {
        match &self.script {
            None => Ok(demo_script()),
            Some(p) => load_script(&read(p)?.into_bytes()).map_err(|e| format!("{}: {e}", p.display())),
        }
    }

    fn config(&self) -> CliResult<EngineConfig> {
        let mut table = match &self.config {
            Some(p) => toml::from_str::<toml::Table>(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
            None => toml::Table::try_from(EngineConfig::default()).map_err(|e| e.to_string())?,
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| format!("--set `{o}`: expected KEY=VALUE"))?;
            let value = toml::from_str::<toml::Table>(&format!("v = {v}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(v.to_string()));
            table.insert(k.trim().to_string(), value);
        }
        let mut config: EngineConfig = table.try_into().map_err(|e: toml::de::Error| e.to_string())?;
        if self.no_instruction {
            config.instruction_enabled = false;
        }
        if self.no_monologue {
            config.monologue_enabled = false;
        }
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }

    fn options(&self) -> BatchOptions {
        BatchOptions {
            n_runs: self.n_runs,
            seed: self.seed,
            workers: self.workers,
            max_ticks: self.max_ticks,
        }
    }
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn backend(name: &str) -> CliResult<BackendSpec> {
    BackendSpec::parse(name)
}

fn save_runs(dir: &Path, runs: &[RunOutcome]) -> CliResult<()> {
    for r in runs {
        write(&dir.join(format!("{}.json", r.run_id)), &r.record.to_json())?;
    }
    Ok(())
}

/// Every `run-*.json` in `dir`, by file name.
fn load_plays(dir: &Path) -> CliResult<Vec<(String, PlayRecord)>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| format!("{}: {e}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name().is_some_and(|n| n.to_string_lossy().starts_with("run-"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(format!("{}: no run-*.json play records", dir.display()));
    }
    paths
        .iter()
        .map(|p| {
            let record = PlayRecord::from_json(&read(p)?).map_err(|e| format!("{}: {e}", p.display()))?;
            let id = p
                .file_stem()
                .expect("json file has a stem")
                .to_string_lossy()
                .to_string();
            Ok((id, record))
        })
        .collect()
}

#[derive(Serialize)]
struct StatsReport {
    stats: RunStats,
    recount: RunStats,
    consistent: bool,
}

fn stats_report(records: &[&PlayRecord]) -> StatsReport {
    let stats = RunStats::from_decisions(records.iter().copied());
    let recount = RunStats::recount(records.iter().copied());
    StatsReport {
        consistent: stats == recount,
        stats,
        recount,
    }
}

fn run(command: Command) -> CliResult<String> {
    match command {
        Command::Run { play, out } => {
            let output = run_batch(
                &play.setting()?,
                &play.config()?,
                &backend(&play.backend)?,
                &play.options(),
            )
            .map_err(|e| e.to_string())?;
            for r in output.runs.iter().filter(|r| !r.succeeded()) {
                eprintln!("{}: {}", r.run_id, r.error.as_deref().unwrap_or_default());
            }
            let records: Vec<&PlayRecord> = output.runs.iter().map(|r| &r.record).collect();
            let report = json(&stats_report(&records));
            if let Some(dir) = out {
                save_runs(&dir, &output.runs)?;
                write(&dir.join("stats.json"), &report)?;
            }
            Ok(report)
        }
        Command::Stats { plays } => {
            let loaded = load_plays(&plays)?;
            let records: Vec<&PlayRecord> = loaded.iter().map(|(_, r)| r).collect();
            Ok(json(&stats_report(&records)))
        }
        Command::AnnotateSheet { plays, out } => {
            let loaded = load_plays(&plays)?;
            let sheet = annotation_sheet(loaded.iter().map(|(id, r)| (id.as_str(), r.decisions.as_slice())));
            let text = to_jsonl(&sheet);
            match out {
                Some(path) => {
                    write(&path, &text)?;
                    Ok(format!("{} checks written to {}", sheet.len(), path.display()))
                }
                None => Ok(text.trim_end().to_string()),
            }
        }
        Command::ScoreChecks { plays, annotations } => {
            let loaded = load_plays(&plays)?;
            let labels = read_annotations(&read(&annotations)?).map_err(|e| e.to_string())?;
            let report = score_checks(
                loaded.iter().map(|(id, r)| (id.as_str(), r.decisions.as_slice())),
                &labels,
            )
            .map_err(|e| e.to_string())?;
            eprintln!("{}", report.display());
            Ok(json(&report))
        }
        Command::Judge {
            plays,
            backend: name,
            seed,
        } => {
            let loaded = load_plays(&plays)?;
            let report = judge_storylines(
                loaded
                    .iter()
                    .filter(|(_, r)| r.finished)
                    .map(|(id, r)| (id.as_str(), r)),
                backend(&name)?.build(seed),
            );
            Ok(json(&report))
        }
        Command::Ablate { play, judge, out } => {
            let judge = judge.as_deref().map(backend).transpose()?;
            let (report, groups) = ablate(
                &play.setting()?,
                &play.config()?,
                &backend(&play.backend)?,
                &play.options(),
                judge.as_ref(),
            )
            .map_err(|e| e.to_string())?;
            let text = json(&report);
            if let Some(dir) = out {
                for (name, runs) in &groups {
                    save_runs(&dir.join(name), runs)?;
                }
                write(&dir.join("ablation.json"), &text)?;
            }
            Ok(text)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse().command) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("dramaturg: {e}");
            ExitCode::FAILURE
        }
    }
}
