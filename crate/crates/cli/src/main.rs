use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use lumifield::dataio::{Dataset, Split};
use lumifield::pipeline::{self, FieldSource, FitConfig, GenConfig};
use lumifield::plenoctree::{ExtractionConfig, Plenoctree};
use lumifield::raymarch::{MarchSettings, TransmittanceModel};
use lumifield::renderer::{self, Scene};
use lumifield::shmath::ActivationKind;
use lumifield::training::{save_checkpoint, write_history_csv, ColorLoss, LossRecord};
use lumifield::{Error, GridF32, OctreeF64};

#[derive(Parser)]
#[command(
    name = "lumifield",
    version,
    about = "Radiance-field luminaires: datasets, fitting, octrees and rendering"
)]
struct Cli {
    /// Worker threads (default: all logical cores).
    #[arg(long, global = true, env = "LUMIFIELD_THREADS")]
    threads: Option<usize>,
    /// Write progress as CSV to this file.
    #[arg(long, global = true)]
    log: Option<PathBuf>,
    /// Overwrite existing outputs.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render ground-truth views of an analytic toy or a grid file.
    GenDataset(GenArgs),
    /// Fit an SH voxel grid to a dataset's training views.
    Fit(FitArgs),
    /// Bake a grid into a plenoctree.
    Extract(ExtractArgs),
    /// Render a scene file, or a dataset split through an octree.
    Render(RenderArgs),
    /// Compare predicted views against ground truth.
    Eval(EvalArgs),
    /// Measure octree traversal speed.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    /// `sphere`, `banded`, `cluster` (optionally `toy:`-prefixed) or a
    /// grid file (`grid:PATH` or a bare path).
    #[arg(long, default_value = "banded")]
    field: String,
    /// Training views.
    #[arg(long, default_value_t = 32)]
    n_views: usize,
    #[arg(long, default_value_t = 0)]
    n_val: usize,
    #[arg(long, default_value_t = 8)]
    n_test: usize,
    #[arg(long, default_value_t = 4.0)]
    radius: f64,
    #[arg(long, default_value_t = 128)]
    res: usize,
    /// Orthographic image plane width.
    #[arg(long, default_value_t = 1.8)]
    width: f64,
    #[arg(long, default_value = "linear", value_parser = parse_model)]
    model: TransmittanceModel,
    /// Output activation of grid fields: `sigmoid:MAX`, `logsigmoid:EPS`.
    #[arg(long, default_value = "sigmoid:1", value_parser = parse_activation)]
    activation: ActivationKind,
    #[arg(long, default_value_t = 1024)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// TOML file with any of the fit options below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    res: Option<usize>,
    #[arg(long)]
    lmax: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    n_coarse: Option<usize>,
    #[arg(long)]
    n_fine: Option<usize>,
    #[arg(long)]
    lr_start: Option<f64>,
    #[arg(long)]
    lr_end: Option<f64>,
    /// `hdr` (regularized) or `mse`.
    #[arg(long)]
    loss: Option<String>,
    /// Weight of the alpha term.
    #[arg(long)]
    alpha_weight: Option<f64>,
    /// Override the dataset's transmittance model.
    #[arg(long, value_parser = parse_model)]
    model: Option<TransmittanceModel>,
    /// Also write grid plus optimizer state here.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitFile {
    res: Option<usize>,
    lmax: Option<usize>,
    iters: Option<usize>,
    seed: Option<u64>,
    batch: Option<usize>,
    n_coarse: Option<usize>,
    n_fine: Option<usize>,
    lr_start: Option<f64>,
    lr_end: Option<f64>,
    loss: Option<String>,
    alpha_weight: Option<f64>,
    model: Option<String>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, default_value_t = 7)]
    depth: usize,
    #[arg(long, default_value_t = 0.01)]
    prune_sigma: f64,
    #[arg(long, default_value_t = 256)]
    refine_samples: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RenderArgs {
    /// Scene file to render to a single image.
    #[arg(long, conflicts_with_all = ["octree", "dataset"])]
    scene: Option<PathBuf>,
    #[arg(long)]
    spp: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write a tone-mapped PPM preview.
    #[arg(long)]
    preview: Option<PathBuf>,
    /// Octree to render the views of `--dataset` with.
    #[arg(long, requires = "dataset")]
    octree: Option<PathBuf>,
    #[arg(long, requires = "octree")]
    dataset: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: String,
    /// Disable the sigma_min / alpha_max traversal thresholds.
    #[arg(long)]
    exact: bool,
    /// Output image (scene) or directory (views).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred_dir: PathBuf,
    #[arg(long)]
    gt_dir: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    octree: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    rays: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "linear", value_parser = parse_model)]
    model: TransmittanceModel,
    #[arg(long, default_value = "sigmoid:10", value_parser = parse_activation)]
    activation: ActivationKind,
}

fn parse_model(s: &str) -> Result<TransmittanceModel, String> {
    match s {
        "linear" => Ok(TransmittanceModel::Linear),
        "exponential" | "exp" => Ok(TransmittanceModel::Exponential),
        _ => Err(format!(
            "unknown transmittance model '{s}' (linear, exponential)"
        )),
    }
}

fn parse_activation(s: &str) -> Result<ActivationKind, String> {
    let (name, arg) = s.split_once(':').unwrap_or((s, ""));
    let value = || {
        arg.parse::<f64>()
            .map_err(|_| format!("activation '{s}' needs a numeric parameter"))
    };
    let act = match name {
        "sigmoid" => ActivationKind::ExtendedSigmoid { max: value()? },
        "logsigmoid" => ActivationKind::LogSigmoid { eps: value()? },
        "exp" if arg.is_empty() => ActivationKind::Exponential,
        _ => {
            return Err(format!(
                "unknown activation '{s}' (sigmoid:MAX, logsigmoid:EPS, exp)"
            ))
        }
    };
    act.validate().map_err(|e| e.to_string())?;
    Ok(act)
}

fn parse_split(s: &str) -> anyhow::Result<Split> {
    Ok(match s {
        "train" => Split::Train,
        "val" => Split::Val,
        "test" => Split::Test,
        _ => bail!("unknown split '{s}' (train, val, test)"),
    })
}

fn ensure_writable(path: &Path, force: bool) -> anyhow::Result<()> {
    if path.exists() && !force {
        bail!(
            "output {} exists (use --force to overwrite)",
            path.display()
        );
    }
    Ok(())
}

fn gen_dataset(cli: &Cli, a: &GenArgs) -> anyhow::Result<()> {
    let field: FieldSource = a.field.parse()?;
    let cfg = GenConfig {
        field,
        n_train: a.n_views,
        n_val: a.n_val,
        n_test: a.n_test,
        radius: a.radius,
        resolution: a.res,
        width: a.width,
        model: a.model,
        activation: a.activation,
        samples_per_ray: a.samples,
    };
    let ds = pipeline::gen_dataset(&a.out, &cfg, cli.force)?;
    let count = |s| ds.views(s).len();
    println!(
        "wrote {} train, {} val, {} test views to {}",
        count(Split::Train),
        count(Split::Val),
        count(Split::Test),
        a.out.display()
    );
    Ok(())
}

fn fit(cli: &Cli, a: &FitArgs) -> anyhow::Result<()> {
    let file: FitFile = match &a.config {
        Some(p) => toml::from_str(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )
        .map_err(|e| anyhow::anyhow!("config {}: {}", p.display(), e.message()))?,
        None => FitFile::default(),
    };
    ensure_writable(&a.out, cli.force)?;
    let ds = Dataset::open(&a.dataset)?;
    let mut cfg = FitConfig::for_dataset(
        &ds.manifest,
        a.res.or(file.res).unwrap_or(32),
        a.lmax.or(file.lmax).unwrap_or(2),
        a.iters.or(file.iters).unwrap_or(20_000),
        a.seed.or(file.seed).unwrap_or(0),
    );
    let t = &mut cfg.train;
    t.batch_rays = a.batch.or(file.batch).unwrap_or(t.batch_rays);
    t.n_coarse = a.n_coarse.or(file.n_coarse).unwrap_or(t.n_coarse);
    t.n_fine = a.n_fine.or(file.n_fine).unwrap_or(t.n_fine);
    t.lr_start = a.lr_start.or(file.lr_start).unwrap_or(t.lr_start);
    t.lr_end = a.lr_end.or(file.lr_end).unwrap_or(t.lr_end);
    let model = match (a.model, &file.model) {
        (Some(m), _) => Some(m),
        (None, Some(s)) => Some(parse_model(s).map_err(anyhow::Error::msg)?),
        (None, None) => None,
    };
    t.model = model.unwrap_or(t.model);
    match a.loss.as_deref().or(file.loss.as_deref()) {
        None | Some("hdr") => cfg.loss.color = ColorLoss::HdrRegularized,
        Some("mse") => cfg.loss.color = ColorLoss::Mse,
        Some(other) => bail!("unknown loss '{other}' (hdr, mse)"),
    }
    cfg.loss.term_weights[2] = a.alpha_weight.or(file.alpha_weight).unwrap_or(1.0);
    let every = (cfg.train.iterations / 20).max(1);
    let mut progress = |r: &LossRecord| {
        if r.iteration % every == 0 || r.iteration + 1 == cfg.train.iterations {
            eprintln!(
                "iter {:>6}  loss {:.6e}  alpha {:.4e}  lr {:.3e}",
                r.iteration, r.total, r.alpha, r.lr
            );
        }
    };
    let (grid, out) = pipeline::fit_dataset(&ds, &cfg, &mut progress)?;
    grid.save(&a.out)?;
    if let Some(path) = &cli.log {
        write_history_csv(path, &out.history)?;
    }
    if let Some(path) = &a.checkpoint {
        save_checkpoint(path, &grid, &out.optimizer)?;
    }
    println!(
        "wrote grid {} ({} iterations)",
        a.out.display(),
        out.history.len()
    );
    Ok(())
}

fn extract(cli: &Cli, a: &ExtractArgs) -> anyhow::Result<()> {
    ensure_writable(&a.out, cli.force)?;
    let grid = GridF32::load(&a.grid)?.cast::<f64>();
    let cfg = ExtractionConfig {
        max_depth: a.depth,
        prune_sigma: a.prune_sigma,
        refine_samples: a.refine_samples,
    };
    let tree = Plenoctree::extract(
        &grid.sampler(lumifield::field::Interpolation::Trilinear),
        &cfg,
    )?;
    tree.save(&a.out)?;
    let s = tree.stats();
    println!(
        "wrote octree {}: {} nodes, {} leaves, depth {}, {} bytes",
        a.out.display(),
        s.nodes,
        s.leaves,
        s.max_depth,
        s.bytes
    );
    Ok(())
}

fn render(cli: &Cli, a: &RenderArgs) -> anyhow::Result<()> {
    if let Some(scene_path) = &a.scene {
        ensure_writable(&a.out, cli.force)?;
        let scene = Scene::load(scene_path)?;
        let mut cfg = scene.estimator;
        cfg.spp = a.spp.unwrap_or(cfg.spp);
        cfg.seed = a.seed.unwrap_or(cfg.seed);
        let out = renderer::render(&scene, &cfg)?;
        out.image.save_pfm(&a.out)?;
        if let Some(p) = &a.preview {
            out.image.save_preview_ppm(p)?;
        }
        println!(
            "wrote {} ({}x{}, {} spp)",
            a.out.display(),
            out.image.width,
            out.image.height,
            cfg.spp
        );
        return Ok(());
    }
    let (Some(octree), Some(dataset)) = (&a.octree, &a.dataset) else {
        bail!("render needs either --scene or --octree with --dataset");
    };
    let split = parse_split(&a.split)?;
    let ds = Dataset::open(dataset)?;
    let tree: OctreeF64 = Plenoctree::load(octree)?;
    let m = &ds.manifest;
    let settings = if a.exact {
        MarchSettings::exact(m.model, m.activation)
    } else {
        MarchSettings::render_defaults(m.model, m.activation)
    };
    let pred = pipeline::render_views(&tree, &ds, split, &settings, &a.out, cli.force)?;
    println!(
        "wrote {} views to {}",
        pred.views(split).len(),
        a.out.display()
    );
    Ok(())
}

fn eval(a: &EvalArgs) -> anyhow::Result<()> {
    let split = parse_split(&a.split)?;
    let pred = Dataset::open(&a.pred_dir)?;
    let gt = Dataset::open(&a.gt_dir)?;
    let report = pipeline::evaluate(&pred, &gt, split)?;
    print!("{}", report.to_table());
    Ok(())
}

fn bench(a: &BenchArgs) -> anyhow::Result<()> {
    let tree: OctreeF64 = Plenoctree::load(&a.octree)?;
    println!(
        "{:<8} {:>10} {:>10} {:>16} {:>14}",
        "mode", "rays", "hits", "leaves_per_ray", "rays_per_sec"
    );
    for (mode, settings) in [
        ("exact", MarchSettings::exact(a.model, a.activation)),
        (
            "render",
            MarchSettings::render_defaults(a.model, a.activation),
        ),
    ] {
        let r = pipeline::bench_octree(&tree, &settings, a.rays, a.seed);
        println!(
            "{mode:<8} {:>10} {:>10} {:>16.3} {:>14.0}",
            r.rays, r.hits, r.leaves_per_ray, r.rays_per_sec
        );
    }
    Ok(())
}

fn error_kind(e: &anyhow::Error) -> &'static str {
    match e.downcast_ref::<Error>() {
        Some(Error::Io(_)) => "io",
        Some(Error::Format { .. }) => "format",
        Some(Error::SceneParse(_)) | Some(Error::InvalidScene(_)) => "scene",
        Some(Error::NonFiniteLoss { .. }) => "training",
        Some(_) => "config",
        None if e.downcast_ref::<std::io::Error>().is_some() => "io",
        None => "usage",
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match &cli.command {
        Command::GenDataset(a) => gen_dataset(cli, a),
        Command::Fit(a) => fit(cli, a),
        Command::Extract(a) => extract(cli, a),
        Command::Render(a) => render(cli, a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error[{}]: {msg}", error_kind(&e));
            ExitCode::FAILURE
        }
    }
}
