mod session;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use planehead_core::abstraction::build_abstracted_mesh;
use planehead_core::engine::Engine;
use planehead_core::io::{load_labels, load_mesh, read_json, save_labels, save_mesh, write_json};
use planehead_core::mesh::Mesh;
use planehead_core::metrics::{aggregate_measures, build_lanteri_constraints, eye_socket_measures, LandmarkSet, MeasureReport};
use planehead_core::segment::{transfer_labels, vsa_segment_with, LabeledTemplate, VsaOptions};
use planehead_core::skinning::DEFAULT_LEVELS;
use planehead_core::stylize::{OptimizeOptions, StyleParams};
use planehead_service::server::{self, DEFAULT_PORT};
use planehead_service::Service;

use session::{file_sha256, SessionFile};

/// Bad arguments; exits with status 2 like clap's own usage errors.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser)]
#[command(name = "planehead", version, about = "Sculptural plane stylization of triangle meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a mesh into planar regions.
    Segment(SegmentArgs),
    /// Build the anchor-and-polyline abstraction of a segmented mesh.
    Abstract(AbstractArgs),
    /// Optimize the abstraction and deform the full mesh.
    Stylize(StylizeArgs),
    /// Compare eye-socket depth measures between two groups.
    Analyze(AnalyzeArgs),
    /// Run the live editing server.
    Serve(ServeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SegmentMode {
    Vsa,
    Template,
}

#[derive(clap::Args)]
struct SegmentArgs {
    mesh: PathBuf,
    #[arg(long, value_enum)]
    mode: SegmentMode,
    /// Region count for `vsa`.
    #[arg(long)]
    k: Option<usize>,
    /// Aligned template mesh for `template`.
    #[arg(long)]
    template: Option<PathBuf>,
    /// Template labels; defaults to `<template stem>.labels.json`.
    #[arg(long)]
    template_labels: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Defaults to `<mesh stem>.labels.json`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct AbstractArgs {
    mesh: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Defaults to `<mesh stem>.abstracted.json`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ParamArgs {
    #[arg(long)]
    lambda_d: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Smoothing scale for boundaries without their own value.
    #[arg(long)]
    smooth_default: Option<f64>,
    /// StyleParams JSON; flags override its values.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    no_lanteri: bool,
}

impl ParamArgs {
    fn resolve(&self, base: StyleParams) -> Result<StyleParams> {
        let mut p = match &self.params {
            Some(path) => read_json(path).with_context(|| format!("cannot read params {}", path.display()))?,
            None => base,
        };
        if let Some(v) = self.lambda_d {
            p.lambda_d = v;
        }
        if let Some(v) = self.mu {
            p.mu = v;
        }
        if let Some(v) = self.smooth_default {
            p.smoothing = v;
        }
        if self.no_lanteri {
            p.lanteri = false;
        }
        p.validate().map_err(|e| usage(e.to_string()))?;
        Ok(p)
    }
}

#[derive(clap::Args)]
struct InputArgs {
    /// Input mesh; optional with `--session`, which stores its path.
    mesh: Option<PathBuf>,
    #[arg(long, conflicts_with = "session")]
    labels: Option<PathBuf>,
    #[arg(long, conflicts_with = "session")]
    landmarks: Option<PathBuf>,
    /// Resume from a saved session instead of labels and landmarks.
    #[arg(long)]
    session: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_LEVELS)]
    levels: usize,
}

struct Inputs {
    engine: Engine,
    session: SessionFile,
}

impl InputArgs {
    fn load(&self, params: &ParamArgs) -> Result<Inputs> {
        if let Some(path) = &self.session {
            let (mut session, mesh) = SessionFile::load(path, self.mesh.as_deref())?;
            session.params = params.resolve(session.params.clone())?;
            let engine = session.engine(mesh)?;
            return Ok(Inputs { engine, session });
        }
        let mesh_path = self.mesh.clone().ok_or_else(|| usage("a mesh or --session is required"))?;
        let labels_path = self.labels.as_ref().ok_or_else(|| usage("--labels is required without --session"))?;
        let params = params.resolve(StyleParams::default())?;
        let mesh = load_mesh(&mesh_path)?;
        let labels = load_labels(labels_path)?;
        let landmarks: LandmarkSet = match &self.landmarks {
            Some(p) => read_json(p).with_context(|| format!("cannot read landmarks {}", p.display()))?,
            None => LandmarkSet::default(),
        };
        let abstracted = build_abstracted_mesh(&mesh, &labels)?;
        let session = SessionFile {
            mesh_sha256: file_sha256(&mesh_path)?,
            mesh: mesh_path,
            labels,
            abstracted,
            params,
            constraints: build_lanteri_constraints(&landmarks),
            landmarks,
            pyramid_levels: self.levels,
        };
        let engine = session.engine(mesh)?;
        Ok(Inputs { engine, session })
    }
}

#[derive(clap::Args)]
struct StylizeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Deformed mesh, `.obj` or `.ply`.
    #[arg(short, long)]
    out: PathBuf,
    /// Defaults to `<out stem>.session.json`.
    #[arg(long)]
    save_session: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Text,
    Csv,
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    /// `MESH=LANDMARKS` pair or a JSON file of measures (one or a list).
    #[arg(long, required = true)]
    human: Vec<String>,
    #[arg(long, required = true)]
    sculpt: Vec<String>,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    format: TableFormat,
    /// Writes to stdout when absent.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ServeArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    #[arg(long, default_value_t = DEFAULT_PORT)]
    port: u16,
    /// Optimization budget per edit in milliseconds.
    #[arg(long, default_value_t = 100)]
    budget_ms: u64,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn segment(args: SegmentArgs) -> Result<()> {
    let mesh = load_mesh(&args.mesh)?;
    let labels = match args.mode {
        SegmentMode::Vsa => {
            let k = args.k.ok_or_else(|| usage("--mode vsa needs --k"))?;
            if k == 0 {
                return Err(usage("--k must be at least 1"));
            }
            let opts = VsaOptions {
                k,
                max_iters: args.max_iters,
                seed: args.seed,
            };
            let out = vsa_segment_with(&mesh, &opts)?;
            log::info!(
                "VSA finished after {} iterations, energy {:.6e}",
                out.energy_trace.len(),
                out.energy_trace.last().copied().unwrap_or(0.0)
            );
            out.labeling
        }
        SegmentMode::Template => {
            let path = args.template.as_ref().ok_or_else(|| usage("--mode template needs --template PATH"))?;
            let labels_path = args.template_labels.clone().unwrap_or_else(|| sibling(path, "labels.json"));
            let template = LabeledTemplate {
                mesh: load_mesh(path)?,
                labels: load_labels(&labels_path)?,
            };
            transfer_labels(&mesh, &template)?
        }
    };
    let out = args.out.unwrap_or_else(|| sibling(&args.mesh, "labels.json"));
    save_labels(&out, &labels)?;
    println!("{} regions written to {}", labels.k, out.display());
    Ok(())
}

fn abstract_mesh(args: AbstractArgs) -> Result<()> {
    let mesh = load_mesh(&args.mesh)?;
    let labels = load_labels(&args.labels)?;
    let a = build_abstracted_mesh(&mesh, &labels)?;
    let out = args.out.unwrap_or_else(|| sibling(&args.mesh, "abstracted.json"));
    write_json(&out, &a)?;
    println!(
        "{} anchors ({} free) over {} regions written to {}",
        a.anchor_count(),
        a.free_anchor_count(),
        labels.k,
        out.display()
    );
    Ok(())
}

fn stylize(args: StylizeArgs) -> Result<()> {
    let Inputs { mut engine, session } = args.input.load(&args.params)?;
    let out = engine.stylize(&session.params, &OptimizeOptions::default())?;
    let triangles = engine.mesh().triangles().to_vec();
    save_mesh(&args.out, &out.positions, &triangles)?;
    let session_path = args.save_session.unwrap_or_else(|| sibling(&args.out, "session.json"));
    session.save(&session_path)?;

    let s = &out.state;
    let first = s.energy_trace.first().copied().unwrap_or(0.0);
    println!(
        "energy {first:.6e} -> {:.6e} in {} iterations ({:?})",
        s.energy(),
        s.iterations,
        s.termination
    );
    let terms = engine.energy_terms(&session.params, &s.positions)?;
    println!(
        "  style {:.4e}  flatness {:.4e}  area {:.4e}  edge {:.4e}  vertex {:.4e}  normal {:.4e}  lanteri {:.4e}",
        terms.style, terms.flatness, terms.area, terms.edge, terms.vertex, terms.normal, terms.lanteri
    );
    if !s.degenerate_regions.is_empty() {
        println!("  degenerate regions: {:?}", s.degenerate_regions);
    }
    if out.clamped > 0 {
        println!("  {} vertices had their smoothing scale clamped", out.clamped);
    }
    println!("wrote {} and {}", args.out.display(), session_path.display());
    Ok(())
}

#[derive(serde::Deserialize)]
#[serde(untagged)]
enum Measures {
    One(MeasureReport),
    Many(Vec<MeasureReport>),
}

fn group_measures(items: &[String]) -> Result<Vec<MeasureReport>> {
    let mut out = Vec::new();
    for item in items {
        if let Some((mesh, landmarks)) = item.split_once('=') {
            let m: Mesh = load_mesh(mesh)?;
            let lm: LandmarkSet = read_json(landmarks).with_context(|| format!("cannot read landmarks {landmarks}"))?;
            lm.validate(&m)?;
            out.push(eye_socket_measures(&lm, m.vertices()).with_context(|| format!("measuring {mesh}"))?);
        } else {
            match read_json(item).with_context(|| format!("cannot read measures {item}"))? {
                Measures::One(r) => out.push(r),
                Measures::Many(rs) => out.extend(rs),
            }
        }
    }
    Ok(out)
}

fn analyze(args: AnalyzeArgs) -> Result<()> {
    let table = aggregate_measures(&group_measures(&args.human)?, &group_measures(&args.sculpt)?)?;
    let mut buf = Vec::new();
    match args.format {
        TableFormat::Csv => table.write_csv(&mut buf)?,
        TableFormat::Text => write!(buf, "{table}")?,
    }
    match args.out {
        Some(path) => std::fs::write(&path, buf).with_context(|| format!("cannot write {}", path.display()))?,
        None => std::io::stdout().write_all(&buf)?,
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let Inputs { engine, session } = args.input.load(&args.params)?;
    let service = Service::start(engine, session.params, Duration::from_millis(args.budget_ms)).map_err(|e| anyhow!(e))?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = server::bind((args.host, args.port).into()).await?;
        println!("serving on ws://{}", listener.local_addr()?);
        server::serve(listener, service).await
    })?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PLANEHEAD_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Segment(a) => segment(a),
        Command::Abstract(a) => abstract_mesh(a),
        Command::Stylize(a) => stylize(a),
        Command::Analyze(a) => analyze(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
