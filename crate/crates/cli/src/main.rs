use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use defurnish::backend::{open_backend, serve_mock, BackendEndpoint, MockMode, ENDPOINT_ENV};
use defurnish::io::{load_labels, load_mask, load_panorama, save_panorama};
use defurnish::pipeline::{defurnish, run_eval_suite, EvalMethod, MaskSource, PipelineConfig};
use defurnish::prompts::default_prompt_set;
use defurnish::synthgen::{generate_dataset, CaseKind, EmptySource, SynthConfig};

#[derive(Parser)]
#[command(name = "defurnish", version, about = "Remove furniture from equirectangular panoramas")]
struct Cli {
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Pipeline config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config override `section.key=value`; `--section.key value` also works.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Defurnish one panorama.
    Defurnish {
        #[arg(long)]
        input: PathBuf,
        /// Semantic label map (16-bit PNG).
        #[arg(long, conflicts_with = "mask", required_unless_present = "mask")]
        labels: Option<PathBuf>,
        /// Binary furniture mask PNG.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        /// Backend URL or `mock:<mode>`.
        #[arg(long)]
        endpoint: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Write the run report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Generate a synthetic dataset with a manifest.
    SynthData {
        #[arg(long)]
        out: PathBuf,
        /// `train` or `eval`.
        #[arg(long, default_value = "eval")]
        kind: CaseKind,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Synthesis config (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the configured panorama width.
        #[arg(long)]
        width: Option<usize>,
        /// Empty panoramas to furnish; procedural rooms when absent.
        #[arg(long = "empty", value_name = "PNG")]
        empty: Vec<PathBuf>,
    },
    /// Score methods on a synthetic manifest and print CSV.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated: oracle, identity, oracle-pipeline,
        /// pipeline:<backend>, naive:<backend>.
        #[arg(long, value_delimiter = ',', default_value = "oracle,identity,oracle-pipeline")]
        methods: Vec<EvalMethod>,
        #[command(flatten)]
        config: ConfigArgs,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Training prompt utilities.
    Prompts {
        #[command(subcommand)]
        command: PromptsCommand,
    },
    /// Run a mock backend server until interrupted.
    ServeMock {
        /// identity, oracle:<dir>, constant[:r,g,b], fallback-superres.
        #[arg(long, default_value = "identity")]
        mode: MockMode,
        #[arg(long, default_value = "127.0.0.1:8700")]
        bind: String,
    },
}

#[derive(Subcommand)]
enum PromptsCommand {
    /// Print the prompt set, one per line.
    List,
}

/// Rewrites `--section.key value` and `--section.key=value` into
/// `--set section.key=value`.
fn expand_dotted(args: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut it = args.into_iter().peekable();
    while let Some(arg) = it.next() {
        let dotted = arg
            .strip_prefix("--")
            .filter(|k| k.split('=').next().is_some_and(|k| k.contains('.')));
        match dotted {
            Some(kv) if kv.contains('=') => {
                out.push("--set".into());
                out.push(kv.to_string());
            }
            Some(key) if it.peek().is_some() => {
                let value = it.next().unwrap_or_default();
                out.push("--set".into());
                out.push(format!("{key}={value}"));
            }
            _ => out.push(arg),
        }
    }
    out
}

fn load_config(args: &ConfigArgs) -> Result<PipelineConfig> {
    let mut cfg = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if args.config.is_none() {
        if let Some(ep) = BackendEndpoint::from_env() {
            cfg.backend.base_url = ep.base_url;
        }
    }
    for kv in &args.overrides {
        let Some((key, value)) = kv.split_once('=') else {
            bail!(defurnish::Error::Config(format!("override `{kv}` is not KEY=VALUE")));
        };
        cfg.set(key.trim(), value.trim())?;
    }
    Ok(cfg)
}

fn backend_spec(endpoint: Option<String>, cfg: &PipelineConfig) -> String {
    endpoint
        .or_else(|| std::env::var(ENDPOINT_ENV).ok().filter(|v| !v.trim().is_empty()))
        .unwrap_or_else(|| cfg.backend.base_url.clone())
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| defurnish::Error::Io {
                path: p.into(),
                source: e,
            })
            .map_err(Into::into),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Defurnish {
            input,
            labels,
            mask,
            config,
            endpoint,
            seed,
            out,
            report,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.inpaint.seed = seed;
            }
            let pano = load_panorama(&input)?;
            let backend = open_backend(&backend_spec(endpoint, &cfg), &cfg.backend)?;
            let result = match (&labels, &mask) {
                (Some(l), _) => defurnish(&pano, MaskSource::Labels(&load_labels(l)?), &cfg, &*backend)?,
                (None, Some(m)) => defurnish(&pano, MaskSource::Mask(&load_mask(m)?), &cfg, &*backend)?,
                (None, None) => bail!(defurnish::Error::Config("need --labels or --mask".into())),
            };
            save_panorama(&out, &result.image)?;
            let mut run_report = result.report;
            run_report.output_path = Some(out.display().to_string());
            log::info!(
                "wrote {} ({:.0} ms total, {:.0} ms local, mask {:.2}%)",
                out.display(),
                run_report.total_ms(),
                run_report.local_ms(),
                run_report.mask_coverage_pct
            );
            if let Some(path) = report {
                let json = serde_json::to_string_pretty(&run_report)?;
                write_output(Some(&path), &(json + "\n"))?;
            }
        }
        Command::SynthData {
            out,
            kind,
            count,
            seed,
            config,
            width,
            empty,
        } => {
            let mut cfg = match config {
                Some(path) => SynthConfig::load(&path)?,
                None => SynthConfig::default(),
            };
            if let Some(w) = width {
                cfg.width = w;
            }
            let source = if empty.is_empty() {
                EmptySource::Procedural
            } else {
                EmptySource::Files(empty)
            };
            let records = generate_dataset(&out, &source, kind, count, seed, &cfg)?;
            println!("{}", out.join("manifest.ndjson").display());
            log::info!("generated {} cases in {}", records.len(), out.display());
        }
        Command::Eval {
            manifest,
            methods,
            config,
            out,
        } => {
            let cfg = load_config(&config)?;
            let report = run_eval_suite(&manifest, &methods, &cfg)?;
            for f in &report.failures {
                eprintln!(
                    "failed: case {} method {}: {}",
                    f.case_id,
                    f.method.as_deref().unwrap_or("-"),
                    f.message
                );
            }
            write_output(out.as_deref(), &report.to_csv()?)?;
        }
        Command::Prompts {
            command: PromptsCommand::List,
        } => {
            for p in default_prompt_set().prompts() {
                println!("{p}");
            }
        }
        Command::ServeMock { mode, bind } => {
            let name = mode.name();
            let handle = serve_mock(mode, &bind)?;
            println!("{} listening on {}", name, handle.url());
            use std::io::Write;
            std::io::stdout().flush().context("flushing stdout")?;
            handle.wait_for_ctrl_c()?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<defurnish::Error>() {
        Some(e) if e.is_validation() => 2,
        Some(e) if e.is_backend() => 3,
        Some(e) if e.is_io() => 4,
        _ if err.downcast_ref::<serde_json::Error>().is_some() => 4,
        _ if err.downcast_ref::<std::io::Error>().is_some() => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(expand_dotted(std::env::args()));
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::expand_dotted;

    fn v(args: &[&str]) -> Vec<String> {
        args.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dotted_flags_become_overrides() {
        assert_eq!(
            expand_dotted(v(&["x", "--blend.tau", "0.1", "--out", "o.png", "--blend.r_far=50"])),
            v(&["x", "--set", "blend.tau=0.1", "--out", "o.png", "--set", "blend.r_far=50"])
        );
        assert_eq!(expand_dotted(v(&["x", "--out", "a.b.png"])), v(&["x", "--out", "a.b.png"]));
    }
}
