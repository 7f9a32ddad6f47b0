//! `exa`: volume to mesh pipeline, phantoms, artifact statistics and table
//! generation.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use exa_core::codec::{build_code_table, default_corpus};
use exa_core::exa_io::{EmphasisMode, ExportFormat};
use exa_core::mesh::build_config_table;
use exa_core::pipeline::{
    parse_stages, report_stats, run_pipeline, CropBox, InputFormat, PipelineConfig,
};
use exa_core::volume::{generate_phantom, write_raw3d, PhantomKind, PhantomSpec};

#[derive(Parser)]
#[command(name = "exa", version, about = "Noisy volumes to compressed, segmented, feature-attributed meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline on a volume or a phantom.
    Run(RunArgs),
    /// Write a phantom volume as raw3d.
    Phantom(PhantomArgs),
    /// Summarize an EXA file or a bundle directory.
    Stats {
        path: PathBuf,
        /// Print JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Regenerate the octree code table or the configuration table.
    GenTable {
        #[arg(long, value_enum, default_value = "code")]
        kind: TableKind,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TableKind {
    Code,
    Config,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Tablet,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Sphere,
    Ball,
    NestedBox,
    SmoothedNoise,
}

#[derive(Args, Clone)]
struct PhantomOpts {
    /// Phantom kind; replaces the input volume.
    #[arg(long, value_enum)]
    phantom: Option<Kind>,
    /// Phantom grid size `nx,ny,nz` (or one value for a cube).
    #[arg(long, default_value = "64")]
    dims: String,
    /// Phantom noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Ball radius in grid units.
    #[arg(long)]
    radius: Option<f64>,
}

fn parse_dims(s: &str) -> Result<[usize; 3]> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse().with_context(|| format!("bad dimension {x:?}")))
        .collect::<Result<_>>()?;
    match v.as_slice() {
        [n] => Ok([*n; 3]),
        [x, y, z] => Ok([*x, *y, *z]),
        _ => bail!("dims must be n or nx,ny,nz"),
    }
}

impl PhantomOpts {
    fn spec(&self, seed: u64) -> Result<Option<PhantomSpec>> {
        let Some(kind) = self.phantom else {
            return Ok(None);
        };
        let dims = parse_dims(&self.dims)?;
        let mut spec = match kind {
            Kind::Sphere => PhantomSpec::sphere(dims[0]),
            Kind::Ball => {
                let r = self.radius.unwrap_or(0.4 * dims[0] as f64);
                PhantomSpec::ball(dims[0], r)
            }
            Kind::NestedBox => PhantomSpec::nested_box(dims),
            Kind::SmoothedNoise => PhantomSpec::smoothed_noise(dims[0], seed),
        };
        if matches!(spec.kind, PhantomKind::Sphere { .. } | PhantomKind::SmoothedNoise { .. }) {
            spec.dims = dims;
        }
        Ok(Some(spec.with_noise(self.noise, seed)))
    }
}

#[derive(Args)]
struct PhantomArgs {
    #[command(flatten)]
    opts: PhantomOpts,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path stem; writes `<out>.json` and `<out>.f32`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input volume (raw3d stem, `.json` or `.f32`, or an HDF5 file).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    hdf5_dataset: Option<String>,
    /// Sub-box `x,y,z:nx,ny,nz`.
    #[arg(long)]
    crop: Option<String>,
    #[arg(long)]
    bins: Option<usize>,
    /// Threshold factor over the histogram valley density.
    #[arg(long)]
    f: Option<f64>,
    /// `auto` or an iso-value.
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    precision: Option<u8>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Skip low-pass 2:1 resampling.
    #[arg(long)]
    no_resample: bool,
    #[arg(long)]
    denoise_iters: Option<usize>,
    #[arg(long)]
    smooth_iters: Option<usize>,
    #[arg(long)]
    vertex_iters: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    k1_thresh: Option<f64>,
    #[arg(long)]
    ao_rays: Option<usize>,
    #[arg(long)]
    ao_radius: Option<f64>,
    /// Vertex clustering tolerances `degrees,distance`.
    #[arg(long)]
    cluster: Option<String>,
    #[arg(long)]
    fill_holes: bool,
    /// Comma separated: ply, obj, stl, bundle.
    #[arg(long)]
    export: Option<String>,
    #[arg(long)]
    emphasis: Option<String>,
    /// Comma separated partitions written to STL.
    #[arg(long)]
    stl_partitions: Option<String>,
    /// `all` or a list of preprocess, extract, mesh, features, export.
    #[arg(long)]
    stages: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    stem: Option<String>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    phantom: PhantomOpts,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Raw3d,
    Hdf5,
}

fn list<T>(s: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty()).map(f).collect()
}

fn build_config(a: &RunArgs) -> Result<PipelineConfig> {
    let mut c = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(Preset::Tablet) = a.preset {
        c.precision = PipelineConfig::tablet().precision;
    }
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = &a.$field {
                c.$field = v.clone();
            }
        )*};
    }
    set!(bins, f, precision, denoise_iters, smooth_iters, vertex_iters, k1_thresh, ao_rays, ao_radius, out_dir, stem);
    if a.input.is_some() {
        c.input = a.input.clone();
        c.phantom = None;
    }
    if let Some(f) = a.format {
        c.format = match f {
            FormatArg::Raw3d => InputFormat::Raw3d,
            FormatArg::Hdf5 => InputFormat::Hdf5,
        };
    }
    if let Some(d) = &a.hdf5_dataset {
        c.hdf5_dataset = d.clone();
    }
    if let Some(s) = &a.crop {
        c.crop = Some(s.parse::<CropBox>().map_err(anyhow::Error::msg)?);
    }
    match a.tau.as_deref() {
        None => {}
        Some("auto") => c.tau = None,
        Some(t) => c.tau = Some(t.parse().with_context(|| format!("bad --tau {t:?}"))?),
    }
    if a.no_resample {
        c.resample = false;
    }
    if let Some(s) = &a.cluster {
        let v = list(s, |x| x.parse::<f64>().with_context(|| format!("bad --cluster {x:?}")))?;
        let [ang, pos] = v[..] else {
            bail!("--cluster takes degrees,distance");
        };
        c.cluster = Some((ang, pos));
    }
    if a.fill_holes {
        c.fill_holes = true;
    }
    if let Some(s) = &a.export {
        c.export = list(s, |x| Ok(x.parse::<ExportFormat>()?))?;
    }
    if let Some(s) = &a.emphasis {
        c.emphasis = serde_json::from_value::<EmphasisMode>(serde_json::Value::String(s.clone()))
            .with_context(|| format!("unknown emphasis mode {s:?}"))?;
    }
    if let Some(s) = &a.stl_partitions {
        c.stl_partitions = list(s, |x| x.parse::<u8>().with_context(|| format!("bad partition {x:?}")))?;
    }
    if let Some(s) = &a.stages {
        c.stages = parse_stages(s).map_err(anyhow::Error::msg)?;
    }
    if a.threads.is_some() {
        c.threads = a.threads;
    }
    if a.seed.is_some() {
        c.seed = a.seed;
    }
    if let Some(spec) = a.phantom.spec(a.seed.unwrap_or(0))? {
        c.phantom = Some(spec);
        c.input = None;
    }
    Ok(c)
}

fn run(a: &RunArgs) -> Result<bool> {
    let cfg = build_config(a)?;
    let (json, ok) = match run_pipeline(&cfg) {
        Ok(report) => (serde_json::to_string_pretty(&report)?, true),
        Err(e) => {
            eprintln!("error: {e}");
            let v = serde_json::json!({"error": {"stage": e.stage, "message": e.message}});
            (serde_json::to_string_pretty(&v)?, false)
        }
    };
    match &a.report {
        Some(p) => fs::write(p, json + "\n").with_context(|| format!("writing {}", p.display()))?,
        None => println!("{json}"),
    }
    Ok(ok)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(&a),
        Command::Phantom(a) => (|| {
            let spec = a.opts.spec(a.seed)?.context("--phantom is required")?;
            let vol = generate_phantom(&spec)?;
            write_raw3d(&vol, &a.out)?;
            log::info!("wrote {} ({:?})", a.out.display(), vol.dims());
            Ok(true)
        })(),
        Command::Stats { path, json } => (|| {
            let s = report_stats(&path)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&s)?);
            } else {
                print!("{s}");
            }
            Ok(true)
        })(),
        Command::GenTable { kind, out } => (|| {
            match kind {
                TableKind::Code => {
                    let t = build_code_table(&default_corpus());
                    fs::write(&out, t.as_bytes())?;
                    let hash: String = t.hash().iter().map(|b| format!("{b:02x}")).collect();
                    println!("code table {hash}");
                }
                TableKind::Config => {
                    let t = build_config_table();
                    fs::write(&out, t.to_bytes())?;
                    println!("{} cases, {} classes", t.distinct_cases(), t.class_count);
                }
            }
            Ok(true)
        })(),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
