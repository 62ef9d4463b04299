//! `rsma-opt`: run ergodic sum rate, multicast, rate region and DoF studies
//! from a TOML or JSON experiment file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use rsma_opt::channel::{draw_saa_samples, generate_block};
use rsma_opt::exec::{init_thread_pool, Exec};
use rsma_opt::experiments::output::write_outputs;
use rsma_opt::experiments::{
    estimate_dof, run_esr_curve, run_multicast_study, run_rate_region, ExperimentKind, ExperimentSpec, ResultRecord,
    RunOptions,
};
use rsma_opt::optimizer::{assemble_subproblem, init_precoders, init_schedule, resolve_params, AoState};
use rsma_opt::strategy::{enumerate_orders, make_layout, LayoutParams, Strategy};

#[derive(Parser, Debug)]
#[command(name = "rsma-opt", version, about = "Precoder optimization experiments for the MISO broadcast channel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ergodic sum rate curve or multicast study, as set by `kind`.
    Run(Common),
    /// Two-user rate regions; also writes hull.csv.
    Region(Common),
    /// Sum rate curve followed by a high-SNR slope fit.
    Dof(Common),
    /// Check the config and print the resolved spec. Runs nothing.
    Validate(Common),
    /// Write the first subproblem of one block as JSON.
    DumpProblem {
        #[command(flatten)]
        common: Common,
        /// Strategy name; the first configured strategy when absent.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long, default_value_t = 0)]
        block: u64,
        /// Output file; `<output-dir>/problem.json` when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment file, `.toml` or `.json`.
    #[arg(short, long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; logical cores when unset.
    #[arg(long, env = "RSMA_OPT_THREADS")]
    threads: Option<usize>,
    #[arg(short, long)]
    output_dir: Option<PathBuf>,
    /// `dotted.path=value`, value parsed as JSON and taken as a string
    /// otherwise. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// -v for debug, -vv for trace.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
    #[arg(short, long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Run(c) | Command::Region(c) | Command::Dof(c) | Command::Validate(c) => c,
        Command::DumpProblem { common, .. } => common,
    };
    init_logging(common);
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn init_logging(c: &Common) {
    let level = match (c.quiet, c.verbose) {
        (true, _) => "error",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn dispatch(cmd: &Command) -> Result<ExitCode> {
    match cmd {
        Command::Validate(c) => {
            let spec = load_spec(c)?;
            println!("{}", serde_json::to_string_pretty(&spec)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(c) => {
            let (spec, opts) = prepare(c)?;
            match spec.kind {
                ExperimentKind::RateRegion => region(&spec, opts),
                ExperimentKind::Multicast => finish(&spec, run_multicast_study(&spec, opts)?, None),
                ExperimentKind::EsrCurve => finish(&spec, run_esr_curve(&spec, opts)?, None),
            }
        }
        Command::Region(c) => {
            let (mut spec, opts) = prepare(c)?;
            spec.kind = ExperimentKind::RateRegion;
            spec.validate()?;
            region(&spec, opts)
        }
        Command::Dof(c) => {
            let (spec, opts) = prepare(c)?;
            let records = run_esr_curve(&spec, opts)?;
            let fits = estimate_dof(&records, spec.dof.snr_window)?;
            println!("strategy,alpha,slope,target,points");
            for f in &fits {
                let target = f.target.map_or(String::new(), |t| format!("{t}"));
                println!("{},{},{:.4},{},{}", f.strategy.name(), f.alpha, f.slope, target, f.points);
            }
            let dir = out_dir(&spec);
            let code = finish(&spec, records, None)?;
            std::fs::write(dir.join("dof.json"), serde_json::to_string_pretty(&fits)? + "\n")?;
            Ok(code)
        }
        Command::DumpProblem {
            common,
            strategy,
            block,
            out,
        } => {
            let spec = load_spec(common)?;
            let strategy = match strategy {
                Some(s) => serde_json::from_value::<Strategy>(Value::String(s.clone()))
                    .map_err(|_| anyhow!("unknown strategy {s:?}"))?,
                None => spec.strategies[0],
            };
            let path = out.clone().unwrap_or_else(|| out_dir(&spec).join("problem.json"));
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            dump_problem(&spec, strategy, *block, &path)?;
            log::info!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn region(spec: &ExperimentSpec, opts: RunOptions) -> Result<ExitCode> {
    let out = run_rate_region(spec, opts)?;
    finish(spec, out.records, Some(&out.hulls))
}

fn out_dir(spec: &ExperimentSpec) -> PathBuf {
    PathBuf::from(&spec.output.dir)
}

/// Writes the outputs and maps mostly skipped aggregates to exit code 2.
fn finish(
    spec: &ExperimentSpec,
    records: Vec<ResultRecord>,
    hulls: Option<&[rsma_opt::experiments::RegionHull]>,
) -> Result<ExitCode> {
    let dir = out_dir(spec);
    let manifest = write_outputs(&dir, spec, &records, hulls)?;
    log::info!("wrote {} rows to {} (results {})", records.len(), dir.display(), &manifest.results_hash[..12]);
    let bad: Vec<&ResultRecord> = records.iter().filter(|r| r.is_aggregate() && r.mostly_skipped()).collect();
    for r in &bad {
        log::warn!(
            "{} at {} dB, alpha {}: {}/{} blocks skipped",
            r.strategy.name(),
            r.snr_db,
            r.alpha,
            r.skipped,
            r.blocks
        );
    }
    Ok(if bad.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn prepare(c: &Common) -> Result<(ExperimentSpec, RunOptions)> {
    let spec = load_spec(c)?;
    let threads = match c.threads {
        Some(0) => bail!("--threads must be at least 1"),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    init_thread_pool(threads);
    let exec = if threads > 1 { Exec::Parallel } else { Exec::Sequential };
    log::debug!("{threads} worker threads");
    Ok((spec, RunOptions { exec }))
}

/// Parses, applies overrides and flags, then validates.
fn load_spec(c: &Common) -> Result<ExperimentSpec> {
    let mut value = read_config(&c.config)?;
    for o in &c.overrides {
        let (key, raw) = o.split_once('=').ok_or_else(|| anyhow!("override {o:?} is not KEY=VALUE"))?;
        let v = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        set_path(&mut value, key, v)?;
    }
    if let Some(seed) = c.seed {
        set_path(&mut value, "seed", seed.into())?;
    }
    if let Some(dir) = &c.output_dir {
        set_path(&mut value, "output.dir", Value::String(dir.display().to_string()))?;
    }
    let spec: ExperimentSpec = serde_json::from_value(value).context("config does not match the experiment schema")?;
    spec.validate()?;
    Ok(spec)
}

fn read_config(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => {
            let t: toml::Value = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            Ok(serde_json::to_value(t)?)
        }
        Some("json") => serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display())),
        _ => bail!("{}: config must end in .toml or .json", path.display()),
    }
}

fn set_path(root: &mut Value, key: &str, v: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            bail!("empty segment in override key {key:?}");
        }
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), v);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize = part.parse().with_context(|| format!("{key}: {part:?} is not an index"))?;
                let len = items.len();
                let slot = items.get_mut(idx).ok_or_else(|| anyhow!("{key}: index {idx} out of {len}"))?;
                if last {
                    *slot = v;
                    return Ok(());
                }
                slot
            }
            _ => bail!("{key}: cannot descend into a scalar at {part:?}"),
        };
    }
    Ok(())
}

/// First-iteration subproblem for the first SNR, alpha and weight vector.
fn dump_problem(spec: &ExperimentSpec, strategy: Strategy, block: u64, path: &Path) -> Result<()> {
    let (snr, alpha) = (spec.channel.snr_db[0], spec.channel.alpha[0]);
    let cfg = spec.channel_config(snr, alpha);
    let samples = draw_saa_samples(&generate_block(&cfg, block)?, &cfg, spec.samples)?;
    let weights = spec.weight_vectors().swap_remove(0);
    let ao = spec.ao_for(alpha, &weights);
    let base = spec.layout_params()?;
    let mut params: LayoutParams = resolve_params(strategy, &base, &ao, &samples);
    let k = spec.num_users();
    if let Some(o) = enumerate_orders(strategy, k)?.into_iter().next() {
        params.dpc_order = params.dpc_order.or(o.dpc_order);
        params.common_order = params.common_order.or(o.common_order);
    }
    let layout = make_layout(strategy, k, &params)?;
    let p_t = cfg.transmit_power();
    let start = init_schedule(&layout, p_t, ao.csit_alpha, ao.num_inits).swap_remove(0);
    let mut state = AoState::new(&layout, init_precoders(&layout, &samples.estimate, p_t, &start));
    state.iteration = 1;
    state.update_g(&samples);
    state.update_w(&samples);
    state.refresh_constants(&samples);
    assemble_subproblem(&state, &layout, &ao, p_t).dump_json(path)?;
    Ok(())
}
