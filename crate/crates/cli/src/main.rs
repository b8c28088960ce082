use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::warn;

use chandisc::channels::make_channel;
use chandisc::experiments::{
    emit_results, run_scenario, ChannelSpec, Method, OutputFormat, ResultRecord, RunOptions, ScenarioConfig,
};
use chandisc::metrology::{disjointness_heuristic, finite_discrimination_check, hnks_check, SpanKind, SPAN_TOL};

const BUILTIN: [(&str, &str); 5] = [
    ("unitary", include_str!("../scenarios/unitary.toml")),
    ("perp-signal-first", include_str!("../scenarios/perp-signal-first.toml")),
    ("perp-noise-first", include_str!("../scenarios/perp-noise-first.toml")),
    ("parallel-dephasing", include_str!("../scenarios/parallel-dephasing.toml")),
    ("fig5", include_str!("../scenarios/fig5.toml")),
];

/// Optimal discrimination of quantum channels over adaptive strategies.
///
/// Solver tolerances can be overridden with DISCRIMINATE_FEAS_TOL,
/// DISCRIMINATE_GAP_TOL and DISCRIMINATE_MAX_ITER. Set RUST_LOG=info for
/// per-cell progress.
#[derive(Parser)]
#[command(name = "discriminate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method of a scenario and write the results.
    Run(RunArgs),
    /// Compute only the metrological bounds and print the span diagnostics.
    Bound(BoundArgs),
    /// Check a scenario file without running it.
    Validate {
        /// Scenario file, or the name of a builtin scenario.
        config: String,
    },
    /// List the builtin scenarios.
    List,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file, or the name of a builtin scenario.
    config: String,
    /// Output directory [default: results/<scenario>].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads for independent cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Replaces the see-saw seed from the scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write per-cell wall-clock times.
    #[arg(long)]
    timings: bool,
    /// Skip the per-series plot files.
    #[arg(long)]
    no_plot: bool,
}

#[derive(Args)]
struct BoundArgs {
    config: String,
    /// Also write the bound records here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn load(config: &str) -> Result<ScenarioConfig> {
    let path = Path::new(config);
    if path.exists() {
        return ScenarioConfig::from_file(path).with_context(|| format!("loading {config}"));
    }
    match BUILTIN.iter().find(|(name, _)| *name == config) {
        Some((name, text)) => ScenarioConfig::from_toml_str(text).with_context(|| format!("builtin scenario {name}")),
        None => bail!("no file `{config}` and no builtin scenario of that name (see `discriminate list`)"),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6}"))
}

fn print_table(records: &[ResultRecord]) {
    println!("{:<14} {:>8} {:>4} {:>4} {:>10} {:>10}  status", "method", "dtheta", "N", "d_A", "p_err", "qfi");
    for r in records {
        println!(
            "{:<14} {:>8} {:>4} {:>4} {:>10} {:>10}  {}",
            r.method.name(),
            r.delta_theta.map_or_else(|| "-".into(), |v| format!("{v}")),
            r.n,
            r.d_anc.map_or_else(|| "-".into(), |v| v.to_string()),
            fmt_opt(r.p_err),
            r.qfi.map_or_else(|| "-".into(), |v| format!("{v:.4}")),
            r.status
        );
    }
}

fn report_failures(records: &[ResultRecord]) {
    let failed = records.iter().filter(|r| r.status == "failed").count();
    if failed > 0 {
        warn!("{failed} of {} cells failed; see the detail column", records.len());
    }
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = load(&args.config)?;
    if let Some(f) = args.format {
        cfg.output.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
        };
    }
    cfg.output.timings |= args.timings;
    cfg.output.plot_data &= !args.no_plot;
    let opts = RunOptions { jobs: args.jobs, seed: args.seed, methods: None };
    let records = run_scenario(&cfg, &opts)?;
    report_failures(&records);
    let dir = args.out.unwrap_or_else(|| PathBuf::from("results").join(&cfg.name));
    for path in emit_results(&records, &cfg.name, &dir, &cfg.output)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn diagnostics(cfg: &ScenarioConfig) -> Result<()> {
    if let ChannelSpec::Phase { model, theta0, .. } = &cfg.channels {
        let m = make_channel(*model)?;
        let r = hnks_check(m.kraus_at(*theta0).kraus(), &m.dkraus_at(*theta0), SPAN_TOL)?;
        println!(
            "generator outside the Kraus span: {} (residual {:.3e})",
            if r.condition_holds { "yes" } else { "no" },
            r.residual
        );
    }
    for inst in cfg.instances()? {
        let ch = inst.inst.channels();
        if ch.len() != 2 {
            continue;
        }
        let label = inst.delta_theta.map_or_else(String::new, |dt| format!(" (dtheta = {dt})"));
        let span = finite_discrimination_check(&ch[0], &ch[1], SPAN_TOL, SpanKind::Complex)?;
        let disj = disjointness_heuristic(&ch[0], &ch[1], 200, 0)?;
        println!(
            "identity outside span{{K1_i^dag K2_j}}{label}: {} (residual {:.3e})",
            if span.condition_holds { "yes" } else { "no" },
            span.residual
        );
        println!(
            "disjoint-output input found{label}: {} (smallest angle {:.3e})",
            if disj.found_input { "yes" } else { "no" },
            disj.angle
        );
    }
    Ok(())
}

fn bound(args: BoundArgs) -> Result<()> {
    let cfg = load(&args.config)?;
    diagnostics(&cfg)?;
    let bounds: Vec<Method> = cfg.methods.iter().copied().filter(Method::is_bound).collect();
    if bounds.is_empty() {
        println!("scenario requests no bound methods");
        return Ok(());
    }
    let opts = RunOptions { jobs: args.jobs, seed: None, methods: Some(bounds) };
    let records = run_scenario(&cfg, &opts)?;
    report_failures(&records);
    print_table(&records);
    if let Some(dir) = args.out {
        for path in emit_results(&records, &cfg.name, &dir, &cfg.output)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn validate(config: &str) -> Result<()> {
    let cfg = load(config)?;
    let ns = cfg.n_list();
    let methods: Vec<&str> = cfg.methods.iter().map(Method::name).collect();
    println!("{}: ok", cfg.name);
    if !cfg.description.is_empty() {
        println!("  {}", cfg.description);
    }
    println!("  instances: {}", cfg.instances()?.len());
    match (ns.first(), ns.last()) {
        (Some(a), Some(b)) => println!("  N: {a}..={b} ({} values)", ns.len()),
        _ => println!("  N: none"),
    }
    println!("  d_A: {:?}", cfg.d_anc);
    println!("  methods: {}", methods.join(", "));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Bound(args) => bound(args),
        Command::Validate { config } => validate(&config),
        Command::List => {
            for (name, text) in BUILTIN {
                let desc = ScenarioConfig::from_toml_str(text).map(|c| c.description).unwrap_or_default();
                println!("{name:<20} {desc}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
