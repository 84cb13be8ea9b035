use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use labelsift::detector::{assemble_report, Matrices};
use labelsift::evaluation::{load_pairs_csv, perturb as plant, run_grid, GridSpec, PerturbationSetting};
use labelsift::event_log::{write_csv, write_xes};
use labelsift::graph::{build_dfg, build_ifg, RelationGraph, DEFAULT_THETA_LD};
use labelsift::{Error, EventLog};
use serde_json::json;

use crate::config::{FileConfig, List};
use crate::error::CliError;
use crate::input::{write_file, InputFormat, InputSpec, LogArgs};
use crate::settings::{DetectorArgs, Settings};
use crate::{Format, Global};

const VERSION: &str = concat!("labelsift ", env!("CARGO_PKG_VERSION"));

pub const DETECT_KEYS: &[&str] = &["out", "csv", "dump-matrices"];
pub const PERTURB_KEYS: &[&str] = &["select-pct", "rename-pct", "out-dir"];
pub const EVALUATE_KEYS: &[&str] = &["x", "y", "replicates", "known", "out-dir"];
pub const EXPORT_KEYS: &[&str] = &["kind", "theta-ld", "out"];

#[derive(Args, Debug)]
pub struct DetectArgs {
    #[command(flatten)]
    log: LogArgs,

    #[command(flatten)]
    detector: DetectorArgs,

    /// Write the JSON report to this file
    #[arg(long)]
    out: Option<PathBuf>,

    /// Write one CSV row per label pair to this file
    #[arg(long)]
    csv: Option<PathBuf>,

    /// Write each similarity matrix as CSV into this directory
    #[arg(long)]
    dump_matrices: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PerturbArgs {
    #[command(flatten)]
    log: LogArgs,

    /// Percentage of labels that get a synthetic variant
    #[arg(long)]
    select_pct: Option<f64>,

    /// Percentage of a selected label's events renamed to the variant
    #[arg(long)]
    rename_pct: Option<f64>,

    /// Directory for the perturbed log and its ground truth
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    log: LogArgs,

    #[command(flatten)]
    detector: DetectorArgs,

    /// Label-selection percentages, comma-separated
    #[arg(long)]
    x: Option<List>,

    /// Event-renaming percentages, comma-separated
    #[arg(long)]
    y: Option<List>,

    /// Runs per (x, y) setting
    #[arg(long)]
    replicates: Option<usize>,

    /// CSV of label pairs already known to be redundant
    #[arg(long)]
    known: Option<PathBuf>,

    /// Directory for grid_raw.csv and grid_summary.csv
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GraphKind {
    Direct,
    Indirect,
}

impl std::str::FromStr for GraphKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        <Self as ValueEnum>::from_str(s, true)
    }
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    log: LogArgs,

    /// Directly-follows or long-distance (indirect) relations
    #[arg(long, value_enum)]
    kind: Option<GraphKind>,

    /// Long-distance dependency threshold for `--kind indirect`
    #[arg(long)]
    theta_ld: Option<f64>,

    /// Write to this file instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `# key: value` lines placed at the top of CSV outputs.
fn csv_preamble(items: &[(&str, String)]) -> Vec<u8> {
    let mut out = format!("# {VERSION}\n");
    for (k, v) in items {
        out.push_str(&format!("# {k}: {}\n", v.replace('\n', " ")));
    }
    out.into_bytes()
}

fn stdout(bytes: &[u8]) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    out.write_all(bytes)
        .and_then(|()| out.flush())
        .map_err(|e| CliError::io(Path::new("<stdout>"), e))
}

fn write_all(files: &[(PathBuf, Vec<u8>)]) -> Result<(), CliError> {
    for (path, bytes) in files {
        write_file(path, bytes)?;
        log::info!("wrote {}", path.display());
    }
    Ok(())
}

fn resolve_seed(g: &Global) -> u64 {
    g.seed.unwrap_or_else(|| {
        let seed = rand::random::<u64>();
        log::info!("generated seed {seed}");
        seed
    })
}

fn config_json(settings: &Settings) -> Result<String, CliError> {
    serde_json::to_string(&settings.config).map_err(|e| CliError::from(Error::from(e)))
}

pub fn detect(args: DetectArgs, g: &Global) -> Result<(), CliError> {
    let file = &g.file;
    let input = InputSpec::resolve(args.log, file)?;
    let settings = Settings::resolve(args.detector, file)?;
    let out = file.pick(args.out, "out")?;
    let csv_out = file.pick(args.csv, "csv")?;
    let dump = file.pick(args.dump_matrices, "dump-matrices")?;
    let format = match g.format.unwrap_or(Format::Table) {
        Format::Dot => return Err(CliError::config("detect writes json, csv or table")),
        f => f,
    };
    let provider = settings.provider()?;
    let log = input.load()?;

    let matrices = Matrices::compute(&log, &settings.config, provider.as_deref())?;
    let report = assemble_report(&log, &settings.config, provider.as_deref(), &matrices)?;

    let preamble = csv_preamble(&[
        ("input", input.path.display().to_string()),
        ("config", config_json(&settings)?),
        ("semantic_provider", report.semantic_provider.clone().unwrap_or_else(|| "none".into())),
    ]);
    let json = report.to_json()? + "\n";
    let mut csv = preamble.clone();
    report.write_csv(&mut csv)?;

    let mut files = Vec::new();
    if let Some(path) = out {
        files.push((path, json.clone().into_bytes()));
    }
    if let Some(path) = csv_out {
        files.push((path, csv.clone()));
    }
    if let Some(dir) = dump {
        for m in matrices.iter() {
            let mut bytes = preamble.clone();
            m.write_csv(&mut bytes)?;
            files.push((dir.join(format!("{}.csv", m.kind().name())), bytes));
        }
    }
    write_all(&files)?;

    match format {
        Format::Json => stdout(json.as_bytes()),
        Format::Csv => stdout(&csv),
        _ => stdout(report.to_table().as_bytes()),
    }
}

/// Serialises a log in the given format with provenance in a comment.
fn log_bytes(log: &EventLog, format: InputFormat, items: &[(&str, String)]) -> Result<Vec<u8>, CliError> {
    match format {
        InputFormat::Csv => {
            let mut bytes = csv_preamble(items);
            write_csv(log, &mut bytes)?;
            Ok(bytes)
        }
        InputFormat::Xes => {
            let mut body = Vec::new();
            write_xes(log, &mut body)?;
            let mut note = format!("<!-- {VERSION}");
            for (k, v) in items {
                note.push_str(&format!("; {k}: {}", v.replace("--", "- -")));
            }
            note.push_str(" -->\n");
            let split = body.iter().position(|&b| b == b'\n').map_or(0, |i| i + 1);
            let mut bytes = body[..split].to_vec();
            bytes.extend_from_slice(note.as_bytes());
            bytes.extend_from_slice(&body[split..]);
            Ok(bytes)
        }
    }
}

pub fn perturb(args: PerturbArgs, g: &Global) -> Result<(), CliError> {
    let file = &g.file;
    let input = InputSpec::resolve(args.log, file)?;
    let select_pct = file
        .pick(args.select_pct, "select-pct")?
        .ok_or_else(|| CliError::config("--select-pct is required"))?;
    let rename_pct = file
        .pick(args.rename_pct, "rename-pct")?
        .ok_or_else(|| CliError::config("--rename-pct is required"))?;
    let out_dir = file.pick(args.out_dir, "out-dir")?.unwrap_or_else(|| PathBuf::from("."));
    let format = g.format.unwrap_or(Format::Table);
    if format == Format::Dot {
        return Err(CliError::config("perturb writes json, csv or table"));
    }
    let setting = PerturbationSetting {
        select_pct,
        rename_pct,
        seed: resolve_seed(g),
        replicate: 0,
    };
    setting.validate()?;
    let log = input.load()?;
    let (perturbed, truth) = plant(&log, &setting)?;

    let base = format!("{}_x{select_pct}_y{rename_pct}_seed{}", input.stem(), setting.seed);
    let log_path = out_dir.join(format!("{base}.{}", input.extension()));
    let truth_path = out_dir.join(format!("{base}_truth.csv"));
    let items = [
        ("input", input.path.display().to_string()),
        ("seed", setting.seed.to_string()),
        ("select_pct", select_pct.to_string()),
        ("rename_pct", rename_pct.to_string()),
    ];
    let mut truth_csv = csv_preamble(&items);
    truth.write_csv(&mut truth_csv)?;
    write_all(&[
        (log_path.clone(), log_bytes(&perturbed, input.format, &items)?),
        (truth_path.clone(), truth_csv.clone()),
    ])?;

    match format {
        Format::Json => {
            let value = json!({
                "seed": setting.seed,
                "log": log_path.display().to_string(),
                "truth": truth_path.display().to_string(),
                "planted": truth.synthetic,
            });
            stdout(format!("{value:#}\n").as_bytes())
        }
        Format::Csv => stdout(&truth_csv),
        _ => {
            let mut text = format!(
                "seed {}\nlog {}\ntruth {}\n",
                setting.seed,
                log_path.display(),
                truth_path.display()
            );
            for (a, b) in &truth.synthetic {
                text.push_str(&format!("planted {a} -> {b}\n"));
            }
            stdout(text.as_bytes())
        }
    }
}

pub fn evaluate(args: EvaluateArgs, g: &Global) -> Result<(), CliError> {
    let file = &g.file;
    let input = InputSpec::resolve(args.log, file)?;
    let settings = Settings::resolve(args.detector, file)?;
    let seed = resolve_seed(g);
    let mut spec = GridSpec::standard(seed);
    if let Some(x) = file.pick(args.x, "x")? {
        spec.select_pcts = x.numbers("--x")?;
    }
    if let Some(y) = file.pick(args.y, "y")? {
        spec.rename_pcts = y.numbers("--y")?;
    }
    if let Some(r) = file.pick(args.replicates, "replicates")? {
        spec.replicates = r;
    }
    if spec.run_count() == 0 {
        return Err(CliError::config("the grid has no runs"));
    }
    let known_path = file.pick(args.known, "known")?;
    let out_dir = file.pick(args.out_dir, "out-dir")?.unwrap_or_else(|| PathBuf::from("."));
    let format = g.format.unwrap_or(Format::Table);
    if format == Format::Dot {
        return Err(CliError::config("evaluate writes json, csv or table"));
    }
    let known = match &known_path {
        Some(p) => load_pairs_csv(p)?,
        None => Vec::new(),
    };
    let provider = settings.provider()?;
    let log = input.load()?;

    let result = run_grid(&log, &spec, &settings.config, &known, provider.as_deref())?;

    let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    let preamble = csv_preamble(&[
        ("input", input.path.display().to_string()),
        ("seed", seed.to_string()),
        ("x", join(&spec.select_pcts)),
        ("y", join(&spec.rename_pcts)),
        ("replicates", spec.replicates.to_string()),
        (
            "known",
            known_path.as_ref().map_or("none".into(), |p| p.display().to_string()),
        ),
        ("config", config_json(&settings)?),
    ]);
    let mut raw = preamble.clone();
    result.write_raw_csv(&mut raw)?;
    let mut summary = preamble;
    result.write_summary_csv(&mut summary)?;
    write_all(&[
        (out_dir.join("grid_raw.csv"), raw),
        (out_dir.join("grid_summary.csv"), summary.clone()),
    ])?;

    match format {
        Format::Json => {
            let value = json!({
                "seed": seed,
                "runs": result.rows.len(),
                "mean_f_score": result.mean_f_score(),
                "summary": result.summary,
            });
            stdout(format!("{value:#}\n").as_bytes())
        }
        Format::Csv => stdout(&summary),
        _ => {
            let mut text = format!(
                "seed {seed} | {} runs | mean f-score {:.4}\n{:>8}  {:>8}  {:>5}  {:>8}  {:>8}\n",
                result.rows.len(),
                result.mean_f_score(),
                "x",
                "y",
                "runs",
                "mean_f",
                "std_f"
            );
            for s in &result.summary {
                text.push_str(&format!(
                    "{:>8}  {:>8}  {:>5}  {:>8.4}  {:>8.4}\n",
                    s.x, s.y, s.runs, s.mean_f_score, s.std_f_score
                ));
            }
            stdout(text.as_bytes())
        }
    }
}

fn edge_list(graph: &RelationGraph) -> Vec<(String, String, u64)> {
    graph
        .arcs()
        .map(|(a, b, n)| (a.to_string(), b.to_string(), n))
        .collect()
}

pub fn export_dfg(args: ExportArgs, g: &Global) -> Result<(), CliError> {
    let file = &g.file;
    let input = InputSpec::resolve(args.log, file)?;
    let kind = file.pick(args.kind, "kind")?.unwrap_or(GraphKind::Direct);
    let theta_ld = file.pick(args.theta_ld, "theta-ld")?.unwrap_or(DEFAULT_THETA_LD);
    let out = file.pick(args.out, "out")?;
    let format = g.format.unwrap_or(Format::Dot);
    let log = input.load()?;
    if log.is_empty() {
        return Err(Error::EmptyLog.into());
    }
    let graph = match kind {
        GraphKind::Direct => build_dfg(&log),
        GraphKind::Indirect => build_ifg(&log, theta_ld)?,
    };
    let mut items = vec![
        ("input", input.path.display().to_string()),
        ("kind", format!("{kind:?}").to_lowercase()),
    ];
    if kind == GraphKind::Indirect {
        items.push(("theta_ld", theta_ld.to_string()));
    }

    let bytes = match format {
        Format::Json => {
            let edges: Vec<_> = edge_list(&graph)
                .into_iter()
                .map(|(from, to, count)| json!({"from": from, "to": to, "count": count}))
                .collect();
            let mut value = json!({
                "tool": VERSION,
                "input": input.path.display().to_string(),
                "kind": items[1].1,
                "nodes": graph.nodes(),
                "edges": edges,
            });
            if kind == GraphKind::Indirect {
                value["theta_ld"] = json!(theta_ld);
            }
            format!("{value:#}\n").into_bytes()
        }
        Format::Csv => {
            let mut bytes = csv_preamble(&items);
            let mut w = csv::Writer::from_writer(&mut bytes);
            w.write_record(["from", "to", "count"]).map_err(Error::from)?;
            for (a, b, n) in edge_list(&graph) {
                w.write_record([a, b, n.to_string()]).map_err(Error::from)?;
            }
            w.flush().map_err(|e| CliError::io(Path::new("<edge list>"), e))?;
            drop(w);
            bytes
        }
        Format::Dot | Format::Table => {
            let mut text = format!("// {VERSION}\n");
            for (k, v) in &items {
                text.push_str(&format!("// {k}: {v}\n"));
            }
            text.push_str(&graph.to_dot());
            text.into_bytes()
        }
    };
    match out {
        Some(path) => write_all(&[(path, bytes)]),
        None => stdout(&bytes),
    }
}

/// Rejects config keys that no command understands.
pub fn check_config(file: &FileConfig) -> Result<(), CliError> {
    file.check_keys(&[
        crate::GLOBAL_KEYS,
        crate::input::KEYS,
        crate::settings::KEYS,
        DETECT_KEYS,
        PERTURB_KEYS,
        EVALUATE_KEYS,
        EXPORT_KEYS,
    ])
}
