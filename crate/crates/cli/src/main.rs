//! `goi`: generate illusion stimuli and simulate their perceived geometry.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use goi_core::pipeline::{run_pipeline, run_suite, write_artifacts, PipelineConfig, WarpMode};
use goi_core::solver::SolverMethod;
use goi_core::{generate, save_image, Error, ErrorCategory, StimulusKind, StimulusSpec};

use config::ConfigError;

#[derive(Parser)]
#[command(name = "goi", version, about = "Geometric optical illusion simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a stimulus image and its JSON description.
    Stimulus(StimulusArgs),
    /// Run the full pipeline on one configuration.
    Run(RunArgs),
    /// Run every suite preset and summarize the bending directions.
    Suite(SuiteArgs),
    /// Print the effective configuration as TOML.
    Config(ConfigArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct StimulusArgs {
    /// One of hering, wundt, ehrenstein-square, wundt-hering, zollner,
    /// random-segments, blank.
    #[arg(value_parser = parse_kind)]
    kind: StimulusKind,
    /// Output image (.png or .pgm). The sidecar goes next to it as .json.
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    geometry: GeometryArgs,
}

#[derive(Args, Default)]
struct GeometryArgs {
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    line_offset: Option<f64>,
    #[arg(long)]
    n_inducers: Option<usize>,
    #[arg(long)]
    line_thickness: Option<f64>,
    #[arg(long)]
    segment_length: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bright strokes on a dark ground.
    #[arg(long)]
    invert: bool,
}

impl GeometryArgs {
    fn apply(&self, s: &mut StimulusSpec) {
        if let Some(v) = self.width {
            s.width = v;
        }
        if let Some(v) = self.height {
            s.height = v;
        }
        if let Some(v) = self.line_offset {
            s.line_offset = v;
        }
        if let Some(v) = self.n_inducers {
            s.n_inducers = v;
        }
        if let Some(v) = self.line_thickness {
            s.line_thickness = v;
        }
        if let Some(v) = self.segment_length {
            s.segment_length = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if self.invert {
            s.invert = true;
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Spectral,
    Cg,
}

#[derive(Clone, Copy, ValueEnum)]
enum WarpArg {
    Forward,
    Backward,
}

#[derive(Args, Default)]
struct ModelArgs {
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    n_orientations: Option<usize>,
    #[arg(long)]
    b_bar: Option<f64>,
    #[arg(long)]
    kernel_radius: Option<usize>,
    /// Use the raw kernels without removing their mean.
    #[arg(long)]
    no_dc_compensation: bool,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    eig_floor: Option<f64>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long)]
    solver_tol: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long, value_enum)]
    warp_mode: Option<WarpArg>,
    /// Write every optional export.
    #[arg(long)]
    export_all: bool,
    #[arg(long)]
    stride: Option<usize>,
}

impl ModelArgs {
    fn apply(&self, c: &mut PipelineConfig) {
        if let Some(v) = self.sigma {
            c.sigma = v;
            c.kernel_radius = None;
        }
        if let Some(v) = self.n_orientations {
            c.n_orientations = v;
        }
        if let Some(v) = self.b_bar {
            c.b_bar = v;
        }
        if let Some(v) = self.kernel_radius {
            c.kernel_radius = Some(v);
        }
        if self.no_dc_compensation {
            c.dc_compensation = false;
        }
        if let Some(v) = self.gamma {
            c.gamma = v;
        }
        if let Some(v) = self.eig_floor {
            c.eig_floor = v;
        }
        if let Some(v) = self.solver {
            c.solver_method = match v {
                SolverArg::Spectral => SolverMethod::Spectral,
                SolverArg::Cg => SolverMethod::ConjugateGradient,
            };
        }
        if let Some(v) = self.solver_tol {
            c.solver_tol = v;
        }
        if let Some(v) = self.max_iterations {
            c.max_iterations = v;
        }
        if let Some(v) = self.warp_mode {
            c.warp_mode = match v {
                WarpArg::Forward => WarpMode::Forward,
                WarpArg::Backward => WarpMode::Backward,
            };
        }
        if self.export_all {
            let e = &mut c.exports;
            e.overlay = true;
            e.quiver = true;
            e.ellipses = true;
            e.metrics = true;
            e.energy_slices = true;
            e.argmax = true;
            e.kernels = true;
            e.line_samples = true;
        }
        if let Some(v) = self.stride {
            c.exports.stride = v;
        }
    }
}

#[derive(Args)]
struct SourceArgs {
    /// TOML configuration; keys override the preset.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Base preset (overrides a `preset` key in the file): hering,
    /// hering-near, hering-far, hering-random, wundt, wundt-hering,
    /// ehrenstein-square, zollner, blank.
    #[arg(short, long)]
    preset: Option<String>,
    /// Simulate an existing grayscale image instead of a generated figure.
    #[arg(long)]
    input: Option<PathBuf>,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[command(flatten)]
    model: ModelArgs,
}

impl SourceArgs {
    fn resolve(&self) -> Result<PipelineConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => config::load(path, self.preset.as_deref())?,
            None => PipelineConfig::preset(self.preset.as_deref().unwrap_or("hering"))?,
        };
        self.geometry.apply(&mut cfg.stimulus);
        self.model.apply(&mut cfg);
        if let Some(p) = &self.input {
            cfg.input = Some(goi_core::pipeline::InputImage {
                path: p.clone(),
                target_lines: Vec::new(),
            });
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Output directory (default: `output_dir` from the config, else `out`).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SuiteArgs {
    #[arg(short, long, default_value = "suite")]
    output: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Exit with an error status when any preset fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ConfigArgs {
    #[command(flatten)]
    source: SourceArgs,
}

fn parse_kind(s: &str) -> Result<StimulusKind, String> {
    StimulusKind::parse(s).ok_or_else(|| {
        let names: Vec<_> = StimulusKind::ALL.iter().map(|k| k.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn category_code(c: ErrorCategory) -> u8 {
    match c {
        ErrorCategory::Config => 2,
        ErrorCategory::Io => 3,
        ErrorCategory::Solver => 4,
        ErrorCategory::Internal => 5,
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: category_code(e.category()),
            message: e.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Core(e) => e.into(),
            ConfigError::Read(..) => Failure {
                code: 3,
                message: e.to_string(),
            },
            ConfigError::Parse(_) => Failure {
                code: 2,
                message: e.to_string(),
            },
        }
    }
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("GOI_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| Failure {
        code: 2,
        message: format!("GOI_THREADS must be a positive integer, got {raw:?}"),
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure {
            code: 5,
            message: format!("thread pool: {e}"),
        })
}

fn sidecar_path(image: &Path) -> PathBuf {
    image.with_extension("json")
}

fn cmd_stimulus(args: &StimulusArgs) -> Result<(), Failure> {
    let mut spec = StimulusSpec::new(args.kind);
    args.geometry.apply(&mut spec);
    let stim = generate(&spec)?;
    if let Some(dir) = args.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_image(&stim.image, &args.output)?;
    let side = sidecar_path(&args.output);
    let mut json = serde_json::to_string_pretty(&stim.metadata).map_err(Error::from)?;
    json.push('\n');
    std::fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
    eprintln!("wrote {} and {}", args.output.display(), side.display());
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<(), Failure> {
    let mut cfg = args.source.resolve()?;
    if let Some(o) = &args.output {
        cfg.output_dir = o.clone();
    }
    eprintln!("running {} (sigma {}, gamma {})", cfg.name, cfg.sigma, cfg.gamma);
    let run = run_pipeline(&cfg)?;
    let manifest = write_artifacts(&run, &cfg.output_dir)?;
    let m = run.run_metrics();
    println!("max displacement {:.4} px", m.max_displacement);
    for line in &m.deflection.lines {
        println!(
            "line {:?} {:+.1}: mid {:+.4} px, max {:.4} px, bow {:+.4} px",
            line.axis, line.offset, line.mid_deflection, line.max_deflection, line.bow
        );
    }
    eprintln!(
        "wrote {} files to {}",
        manifest.files.len() + 1,
        cfg.output_dir.display()
    );
    Ok(())
}

fn cmd_suite(args: &SuiteArgs) -> Result<(), Failure> {
    let summary = run_suite(&args.output, |c| args.model.apply(c))?;
    print!("{}", summary.to_markdown());
    let worst = summary
        .rows
        .iter()
        .filter_map(|r| r.error_category)
        .map(category_code)
        .max();
    match worst {
        Some(code) if args.strict => Err(Failure {
            code,
            message: format!("{} of {} presets failed", summary.failures(), summary.rows.len()),
        }),
        Some(_) => {
            eprintln!("{} of {} presets failed", summary.failures(), summary.rows.len());
            Ok(())
        }
        None => Ok(()),
    }
}

fn cmd_config(args: &ConfigArgs) -> Result<(), Failure> {
    let cfg = args.source.resolve()?.resolved()?;
    let text = toml::to_string(&cfg).map_err(|e| Failure {
        code: 5,
        message: e.to_string(),
    })?;
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Stimulus(a) => cmd_stimulus(a),
        Command::Run(a) => cmd_run(a),
        Command::Suite(a) => cmd_suite(a),
        Command::Config(a) => cmd_config(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
