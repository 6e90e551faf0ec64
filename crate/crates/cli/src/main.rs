//! `tpop`: experiment driver for tree proof-of-position.

mod config;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use tpop::report::{map_from_csv, map_to_csv, render_heatmap};
use tpop::{
    global_jsd, pointwise_jsd, sweep_grid, sweep_world, verify, Confirmation, ConfirmationTable,
    DuplicatePolicy, JsdReport, MapKind, MapSource, PerformanceMap, TPoPParams, TreeBundle,
    VerificationOutcome, WitnessTree,
};

use crate::config::{ExperimentConfig, ThetaSpec};

#[derive(Debug, Parser)]
#[command(name = "tpop", version, about = "Tree proof-of-position experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// TOML experiment configuration; missing keys take their defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads; output does not depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Grid spacing for p_h and p_c; must divide 1.
    #[arg(long, global = true, value_name = "F")]
    grid_step: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Parameter preset (overrides the config file).
    #[arg(long, global = true, value_enum)]
    theta: Option<Preset>,
    /// Trees per cell for the model sweep.
    #[arg(long, global = true, value_name = "N")]
    trees: Option<u64>,
    /// Simulation runs per cell.
    #[arg(long, global = true, value_name = "N")]
    runs: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Flat,
    Deep,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep the graphical model; writes r_model.csv and s_model.csv.
    Model,
    /// Sweep the agent-based simulator; writes r_sim.csv and s_sim.csv.
    Sim,
    /// Compare model and simulation maps; writes jsd_report.json.
    Validate {
        /// Directory holding r_model.csv and s_model.csv (default: --out).
        #[arg(long, value_name = "DIR")]
        model_dir: Option<PathBuf>,
        /// Directory holding r_sim.csv and s_sim.csv (default: --out).
        #[arg(long, value_name = "DIR")]
        sim_dir: Option<PathBuf>,
    },
    /// Verify one tree. Exit code 0 = truthful, 1 = untruthful, 2 = input error.
    VerifyTree(VerifyArgs),
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Tree JSON, or a bundle `{theta, tree, confirmations}`.
    tree: PathBuf,
    /// JSON array of `{witness, parent, confirms}`; replaces bundled answers.
    #[arg(long, value_name = "PATH")]
    confirmations: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Witnesses per level, comma separated, e.g. `2,2`.
    #[arg(long, value_delimiter = ',')]
    witnesses: Option<Vec<u32>>,
    #[arg(long, value_enum)]
    duplicate_policy: Option<PolicyArg>,
    /// Print the full outcome as JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolicyArg {
    Discount,
    FailProof,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::VerifyTree(args) => match cmd_verify_tree(&cli.global, args) {
            Ok(true) => return ExitCode::SUCCESS,
            Ok(false) => return ExitCode::from(1),
            Err(e) => Err(e),
        },
        command => run(&cli.global, command),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn load_config(global: &GlobalArgs) -> Result<ExperimentConfig> {
    let mut config = match &global.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = global.seed {
        config.set_seed(seed);
    }
    if let Some(step) = global.grid_step {
        config.grid_step = step;
    }
    if let Some(out) = &global.out {
        config.output_dir = out.clone();
    }
    if let Some(preset) = global.theta {
        let name = match preset {
            Preset::Flat => "flat",
            Preset::Deep => "deep",
        };
        (config.theta, config.theta_label) = ThetaSpec::Preset(name.into()).resolve()?;
    }
    if let Some(trees) = global.trees {
        config.model_trees_per_cell = trees;
    }
    if let Some(runs) = global.runs {
        config.sim_runs_per_cell = runs;
    }
    config.validate()?;
    Ok(config)
}

fn run(global: &GlobalArgs, command: &Command) -> Result<()> {
    let config = load_config(global)?;
    if let Some(jobs) = global.jobs {
        if jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("cannot start worker pool")?;
    }
    let out = &config.output_dir;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    match command {
        Command::Model => cmd_model(&config),
        Command::Sim => cmd_sim(&config),
        Command::Validate { model_dir, sim_dir } => cmd_validate(
            &config,
            model_dir.as_deref().unwrap_or(out),
            sim_dir.as_deref().unwrap_or(out),
        ),
        Command::VerifyTree(_) => unreachable!("handled in main"),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn file_stem(kind: MapKind, suffix: &str) -> String {
    format!("{}_{suffix}", kind.letter().to_ascii_lowercase())
}

/// Writes `<stem>.csv` and `<stem>.svg`; the SVG is rendered from the CSV
/// text so it depends on nothing else.
fn write_map(dir: &Path, stem: &str, map: &PerformanceMap, title: &str) -> Result<PathBuf> {
    let csv = map_to_csv(map);
    let reread = map_from_csv(&csv, map.kind, map.source)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    write_file(&csv_path, &csv)?;
    write_file(
        &dir.join(format!("{stem}.svg")),
        &render_heatmap(&reread, title),
    )?;
    Ok(csv_path)
}

fn cmd_model(config: &ExperimentConfig) -> Result<()> {
    let (r, s) = sweep_grid(
        &config.theta,
        config.grid()?,
        config.model_trees_per_cell,
        config.master_seed,
    )?;
    for map in [&r, &s] {
        let title = format!("{}_m, {}", map.kind.letter(), config.theta_label);
        write_map(
            &config.output_dir,
            &file_stem(map.kind, "model"),
            map,
            &title,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct RunRecord {
    p_h: f64,
    p_c: f64,
    run: usize,
    #[serde(flatten)]
    confusion: tpop::Confusion,
    under_filled: u64,
}

fn cmd_sim(config: &ExperimentConfig) -> Result<()> {
    let grid = config.grid()?;
    let sweep = sweep_world(
        &config.world,
        &config.theta,
        grid,
        config.sim_runs_per_cell,
        config.master_seed,
    )?;
    for map in [&sweep.reliability, &sweep.security] {
        let title = format!("{}_s, {}", map.kind.letter(), config.theta_label);
        write_map(&config.output_dir, &file_stem(map.kind, "sim"), map, &title)?;
    }
    let mut lines = Vec::new();
    for (index, cell) in sweep.runs.iter().enumerate() {
        let (p_h, p_c) = grid.point(index);
        for (run, result) in cell.iter().enumerate() {
            let record = RunRecord {
                p_h,
                p_c,
                run,
                confusion: result.confusion,
                under_filled: result.under_filled,
            };
            serde_json::to_writer(&mut lines, &record)?;
            lines.push(b'\n');
        }
    }
    let path = config.output_dir.join("sim_runs.jsonl");
    fs::File::create(&path)
        .and_then(|mut f| f.write_all(&lines))
        .with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_map(dir: &Path, kind: MapKind, source: MapSource, suffix: &str) -> Result<PerformanceMap> {
    let path = dir.join(format!("{}.csv", file_stem(kind, suffix)));
    let text =
        fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    map_from_csv(&text, kind, source).with_context(|| format!("invalid map {}", path.display()))
}

fn cmd_validate(config: &ExperimentConfig, model_dir: &Path, sim_dir: &Path) -> Result<()> {
    let mut reports = Vec::new();
    for kind in [MapKind::Reliability, MapKind::Security] {
        let model = read_map(model_dir, kind, MapSource::Model, "model")?;
        let sim = read_map(sim_dir, kind, MapSource::Simulation, "sim")?;
        let pointwise = pointwise_jsd(&model, &sim)
            .with_context(|| format!("cannot compare {} maps", kind.name()))?;
        let global = global_jsd(&model, &sim)?;
        let title = format!("JSD({0}_m, {0}_s), {1}", kind.letter(), config.theta_label);
        let stem = format!("jsd_{}", kind.letter().to_ascii_lowercase());
        let csv_path = write_map(&config.output_dir, &stem, &pointwise, &title)?;
        println!("JSD {} = {global:.4}", kind.name());
        reports.push(JsdReport {
            kind,
            theta_label: config.theta_label.clone(),
            global,
            // relative to the report, so the report does not depend on --out
            pointwise_csv_path: csv_path
                .file_name()
                .expect("map path has a file name")
                .to_string_lossy()
                .into_owned(),
        });
    }
    let json = serde_json::to_string_pretty(&reports)? + "\n";
    write_file(&config.output_dir.join("jsd_report.json"), &json)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed JSON in {}", path.display()))
}

fn cmd_verify_tree(global: &GlobalArgs, args: &VerifyArgs) -> Result<bool> {
    let text = fs::read_to_string(&args.tree)
        .with_context(|| format!("cannot read {}", args.tree.display()))?;
    let bundle =
        TreeBundle::from_json(&text).with_context(|| format!("in {}", args.tree.display()))?;
    let confirmations = match &args.confirmations {
        Some(path) => read_json::<Vec<Confirmation>>(path)?,
        None => bundle.confirmations,
    };
    let base = match bundle.theta {
        Some(theta) => theta,
        None => load_config(global)?.theta,
    };
    let mut theta = TPoPParams::new(
        args.threshold.unwrap_or(base.threshold().value()),
        args.witnesses
            .clone()
            .unwrap_or_else(|| base.witnesses().to_vec()),
    )?
    .with_duplicate_policy(base.duplicate_policy());
    if let Some(policy) = args.duplicate_policy {
        theta = theta.with_duplicate_policy(match policy {
            PolicyArg::Discount => DuplicatePolicy::Discount,
            PolicyArg::FailProof => DuplicatePolicy::FailProof,
        });
    }
    let table: ConfirmationTable = confirmations.into_iter().collect();
    let outcome = verify(&bundle.tree, &theta, &table)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&outcome)?);
    } else {
        print_outcome(&bundle.tree, &outcome);
    }
    Ok(outcome.verdict)
}

fn print_outcome(tree: &WitnessTree, outcome: &VerificationOutcome) {
    let verdict = if outcome.verdict {
        "truthful"
    } else {
        "untruthful"
    };
    println!("prover {}: {verdict}", tree.root());
    for tally in &outcome.per_level_confirmed {
        println!(
            "level {}: M = {} (need {} of n = {})",
            tally.level, tally.confirmed, tally.required, tally.nominal
        );
    }
    for (parent, k) in &outcome.per_parent_confirmations {
        println!("K[{parent}] = {k}");
    }
    let list = |ids: &[tpop::AgentId]| {
        ids.iter()
            .map(|a| a.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    println!("eliminated: [{}]", list(&outcome.eliminated));
    if !outcome.duplicates.is_empty() {
        println!("duplicates: [{}]", list(&outcome.duplicates));
    }
    if let Some(level) = outcome.failure_level {
        println!("stopped at level {level}");
    }
}
