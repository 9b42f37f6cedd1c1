//! End-to-end runs, presets, artifact export and the preset suite.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, ErrorCategory, Result};
use crate::gabor::{self, build_bank, GaborBank, GaborParams};
use crate::raster::{load_image, quantize, save_image, RasterImage};
use crate::response::{energy, lift, normalized_weights, EnergyField};
use crate::solver::{solve_displacement, DisplacementField, SolveReport, SolverMethod, SolverParams};
use crate::stimulus::{generate, StimulusKind, StimulusMetadata, StimulusSpec, TargetLine};
use crate::tensor::{self, cometric, invert_to_metric, principal_directions, InversionStats, SymTensorField, TensorParams};
use crate::warp::{
    deflection_metrics, displaced_line, line_parameters, render_overlay, save_overlay, warp_image, warp_image_backward,
    DeflectionMetrics,
};

pub const PRESETS: [&str; 9] = [
    "hering",
    "hering-near",
    "hering-far",
    "hering-random",
    "wundt",
    "wundt-hering",
    "ehrenstein-square",
    "zollner",
    "blank",
];

/// Presets exercised by [`run_suite`].
pub const SUITE_PRESETS: [&str; 8] = [
    "hering",
    "hering-far",
    "hering-near",
    "hering-random",
    "wundt",
    "wundt-hering",
    "ehrenstein-square",
    "zollner",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarpMode {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Exports {
    /// Warped stimulus over the reference target lines (RGB PNG).
    pub overlay: bool,
    /// `x1,x2,u1,u2` on the stride grid.
    pub quiver: bool,
    /// Cometric entries and principal axes on the stride grid.
    pub ellipses: bool,
    pub metrics: bool,
    /// One PNG per orientation with the energy slice.
    pub energy_slices: bool,
    /// Per-pixel index of the strongest orientation (JSON).
    pub argmax: bool,
    /// Real and imaginary parts of the bank as one PNG mosaic.
    pub kernels: bool,
    /// Original and displaced samples of every target line.
    pub line_samples: bool,
    pub stride: usize,
}

impl Default for Exports {
    fn default() -> Self {
        Self {
            overlay: true,
            quiver: true,
            ellipses: true,
            metrics: true,
            energy_slices: false,
            argmax: false,
            kernels: false,
            line_samples: false,
            stride: 8,
        }
    }
}

/// An external stimulus image with optional target-line geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputImage {
    pub path: PathBuf,
    #[serde(default)]
    pub target_lines: Vec<TargetLine>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Label used for file namespacing and summaries.
    pub name: String,
    pub stimulus: StimulusSpec,
    /// Replaces the generated stimulus when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputImage>,
    pub sigma: f64,
    pub n_orientations: usize,
    pub b_bar: f64,
    /// Kernel half-width; the smallest radius meeting the mass bound when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_radius: Option<usize>,
    pub dc_compensation: bool,
    pub gamma: f64,
    pub eig_floor: f64,
    pub solver_method: SolverMethod,
    pub solver_tol: f64,
    pub max_iterations: usize,
    pub warp_mode: WarpMode,
    /// Where artifacts go. Not part of the numerical setup, so it is left
    /// out of serialized manifests.
    #[serde(default = "default_output_dir", skip_serializing)]
    pub output_dir: PathBuf,
    pub exports: Exports,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::preset("hering").expect("hering preset exists")
    }
}

impl PipelineConfig {
    fn base(name: &str, stimulus: StimulusSpec, sigma: f64) -> Self {
        Self {
            name: name.to_string(),
            stimulus,
            input: None,
            sigma,
            n_orientations: gabor::DEFAULT_ORIENTATIONS,
            b_bar: gabor::DEFAULT_B_BAR,
            kernel_radius: None,
            dc_compensation: true,
            gamma: tensor::DEFAULT_GAMMA,
            eig_floor: tensor::DEFAULT_EIG_FLOOR,
            solver_method: SolverMethod::Spectral,
            solver_tol: crate::solver::DEFAULT_TOL,
            max_iterations: crate::solver::DEFAULT_MAX_ITERATIONS,
            warp_mode: WarpMode::Forward,
            output_dir: default_output_dir(),
            exports: Exports::default(),
        }
    }

    /// Named experiment setup on a 256×256 canvas.
    pub fn preset(name: &str) -> Result<Self> {
        let spec = |kind: StimulusKind, offset: Option<f64>| {
            let mut s = StimulusSpec::new(kind);
            if let Some(d) = offset {
                s.line_offset = d;
            }
            s
        };
        let cfg = match name {
            "hering" => Self::base(name, spec(StimulusKind::Hering, None), 6.72),
            "hering-near" => Self::base(name, spec(StimulusKind::Hering, Some(25.0)), 6.72),
            "hering-far" => Self::base(name, spec(StimulusKind::Hering, Some(70.0)), 6.72),
            "hering-random" => Self::base(name, spec(StimulusKind::RandomSegments, None), 6.72),
            "wundt" => Self::base(name, spec(StimulusKind::Wundt, None), 11.2),
            "wundt-hering" => Self::base(name, spec(StimulusKind::WundtHering, None), 6.72),
            "ehrenstein-square" => Self::base(name, spec(StimulusKind::EhrensteinSquare, None), 13.44),
            "zollner" => Self::base(name, spec(StimulusKind::Zollner, None), 10.08),
            "blank" => Self::base(name, spec(StimulusKind::Blank, None), 6.72),
            other => {
                return Err(Error::InvalidParams(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(cfg)
    }

    pub fn gabor_params(&self) -> Result<GaborParams> {
        let mut p = GaborParams::with_orientations(self.sigma, self.n_orientations)?;
        p.b_bar = self.b_bar;
        p.dc_compensation = self.dc_compensation;
        if let Some(r) = self.kernel_radius {
            p.kernel_radius = r;
        }
        p.validate()?;
        Ok(p)
    }

    pub fn tensor_params(&self) -> TensorParams {
        TensorParams {
            gamma: self.gamma,
            eig_floor: self.eig_floor,
        }
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            method: self.solver_method,
            tol: self.solver_tol,
            max_iterations: self.max_iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::InvalidParams(format!(
                "run name {:?} must be a non-empty file name",
                self.name
            )));
        }
        if self.input.is_none() {
            self.stimulus.validate()?;
        }
        self.gabor_params()?;
        self.tensor_params().validate()?;
        self.solver_params().validate()?;
        if self.exports.stride == 0 {
            return Err(Error::InvalidParams("export stride must be positive".into()));
        }
        Ok(())
    }

    /// Copy with every automatic choice made explicit.
    pub fn resolved(&self) -> Result<Self> {
        let mut out = self.clone();
        out.kernel_radius = Some(self.gabor_params()?.kernel_radius);
        Ok(out)
    }
}

/// Everything computed by one pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub config: PipelineConfig,
    pub image: RasterImage,
    pub stimulus: Option<StimulusMetadata>,
    pub target_lines: Vec<TargetLine>,
    pub center: (f64, f64),
    pub bank: GaborBank,
    pub energy: EnergyField,
    pub cometric: SymTensorField,
    pub metric: SymTensorField,
    pub inversion: InversionStats,
    pub displacement: DisplacementField,
    pub solve_reports: [SolveReport; 2],
    pub metrics: DeflectionMetrics,
    pub warped: RasterImage,
}

fn check_weights(w: &ndarray::Array3<f64>) -> Result<()> {
    let sums = w.sum_axis(ndarray::Axis(0));
    if let Some(s) = sums.iter().find(|s| (*s - 1.0).abs() > 1e-12) {
        return Err(Error::Invariant(format!("orientation weights sum to {s}")));
    }
    Ok(())
}

fn check_trace(c: &SymTensorField, gamma: f64) -> Result<()> {
    for (a, d) in c.t11.iter().zip(c.t22.iter()) {
        let tr = gamma * (a + d);
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::Invariant(format!("trace of γ·p⁻¹ is {tr}")));
        }
    }
    Ok(())
}

fn check_gauge(u: &DisplacementField) -> Result<()> {
    let scale = u.max_abs().max(1.0);
    for (name, c) in [("u1", &u.u1), ("u2", &u.u2)] {
        let m = c.mean().unwrap_or(0.0);
        if m.abs() > 1e-10 * scale {
            return Err(Error::Invariant(format!("mean of {name} is {m}")));
        }
    }
    Ok(())
}

/// Stimulus, lift, energy, cometric, metric, right-hand side, solve, warp
/// and deflection metrics. Writes nothing.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun> {
    config.validate()?;
    match &config.input {
        Some(input) => {
            let img = load_image(&input.path)?;
            run_core(config, img, None, input.target_lines.clone())
        }
        None => {
            let s = generate(&config.stimulus)?;
            let lines = s.metadata.target_lines.clone();
            run_core(config, s.image, Some(s.metadata), lines)
        }
    }
}

/// [`run_pipeline`] on an image already in memory; `config.stimulus` and
/// `config.input` are ignored. Target lines are relative to the image center.
pub fn run_pipeline_on_image(
    config: &PipelineConfig,
    image: RasterImage,
    target_lines: Vec<TargetLine>,
) -> Result<PipelineRun> {
    let mut config = config.clone();
    config.input = None;
    config.gabor_params()?;
    config.tensor_params().validate()?;
    config.solver_params().validate()?;
    run_core(&config, image, None, target_lines)
}

fn run_core(
    config: &PipelineConfig,
    image: RasterImage,
    stimulus: Option<StimulusMetadata>,
    target_lines: Vec<TargetLine>,
) -> Result<PipelineRun> {
    let config = config.resolved()?;
    let center = ((image.width() as f64 - 1.0) / 2.0, (image.height() as f64 - 1.0) / 2.0);

    let bank = build_bank(&config.gabor_params()?)?;
    let energy = energy(&lift(&image, &bank)?);
    let weights = normalized_weights(&energy);
    check_weights(&weights)?;

    let tp = config.tensor_params();
    let cometric = cometric(&weights, &tp)?;
    drop(weights);
    check_trace(&cometric, tp.gamma)?;
    let (metric, inversion) = invert_to_metric(&cometric, &tp)?;

    let (displacement, solve_reports) = solve_displacement(&metric, &config.solver_params())?;
    check_gauge(&displacement)?;

    let metrics = deflection_metrics(&target_lines, center, &displacement)?;
    let warped = match config.warp_mode {
        WarpMode::Forward => warp_image(&image, &displacement)?,
        WarpMode::Backward => warp_image_backward(&image, &displacement)?,
    };

    Ok(PipelineRun {
        config,
        image,
        stimulus,
        target_lines,
        center,
        bank,
        energy,
        cometric,
        metric,
        inversion,
        displacement,
        solve_reports,
        metrics,
        warped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub name: String,
    pub max_displacement: f64,
    pub deflection: DeflectionMetrics,
    pub inversion: InversionStats,
    pub solve_reports: [SolveReport; 2],
}

impl PipelineRun {
    pub fn run_metrics(&self) -> RunMetrics {
        RunMetrics {
            name: self.config.name.clone(),
            max_displacement: self.displacement.max_abs(),
            deflection: self.metrics.clone(),
            inversion: self.inversion,
            solve_reports: self.solve_reports.clone(),
        }
    }
}

/// Enough to reproduce a run: the resolved configuration plus the digest of
/// every file written next to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub generator: String,
    pub config: PipelineConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stimulus: Option<StimulusMetadata>,
    pub inversion: InversionStats,
    pub solve_reports: [SolveReport; 2],
    /// File name relative to the run directory → SHA-256.
    pub files: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

struct ArtifactWriter {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl ArtifactWriter {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: BTreeMap::new(),
        })
    }

    fn record(&mut self, name: &str) -> Result<()> {
        let path = self.dir.join(name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.files.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.bytes(name, text.as_bytes())
    }

    fn raster(&mut self, name: &str, img: &RasterImage) -> Result<()> {
        save_image(img, self.dir.join(name))?;
        self.record(name)
    }

    fn gray(&mut self, name: &str, img: &GrayImage) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        img.save_with_format(&path, image::ImageFormat::Png)
            .map_err(|e| Error::Decode {
                path: path.clone(),
                reason: e.to_string(),
            })?;
        self.record(name)
    }
}

fn stride_points(w: usize, h: usize, stride: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..h)
        .step_by(stride)
        .flat_map(move |i| (0..w).step_by(stride).map(move |j| (j, i)))
}

fn quiver_csv(u: &DisplacementField, stride: usize) -> String {
    let mut s = String::from("x1,x2,u1,u2\n");
    for (j, i) in stride_points(u.width(), u.height(), stride) {
        let (a, b) = u.at(j, i);
        let _ = writeln!(s, "{j},{i},{a},{b}");
    }
    s
}

fn ellipses_csv(t: &SymTensorField, stride: usize) -> String {
    let pf = principal_directions(t);
    let mut s = String::from("x1,x2,t11,t12,t22,lambda1,lambda2,angle,degenerate\n");
    for (j, i) in stride_points(t.width(), t.height(), stride) {
        let [a, b, d] = t.at(j, i);
        let _ = writeln!(
            s,
            "{j},{i},{a},{b},{d},{},{},{},{}",
            pf.lambda1[[i, j]],
            pf.lambda2[[i, j]],
            pf.angle[[i, j]],
            pf.degenerate[[i, j]] as u8
        );
    }
    s
}

fn line_samples_csv(run: &PipelineRun) -> Result<String> {
    let mut s = String::from("line,x1,x2,x1_displaced,x2_displaced\n");
    for (k, line) in run.target_lines.iter().enumerate() {
        let moved = displaced_line(line, run.center, &run.displacement)?;
        for (t, (c, d)) in line_parameters(line)?.into_iter().zip(moved) {
            let (a, b) = line.point(run.center, t);
            let _ = writeln!(s, "{k},{a},{b},{c},{d}");
        }
    }
    Ok(s)
}

#[derive(Serialize)]
struct ArgmaxExport<'a> {
    width: usize,
    height: usize,
    thetas: Vec<f64>,
    argmax: &'a [Vec<usize>],
}

fn energy_slice(e: &EnergyField, k: usize, max: f64) -> GrayImage {
    let (_, h, w) = e.values.dim();
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let v = if max > 0.0 {
            e.values[[k, y as usize, x as usize]] / max
        } else {
            0.0
        };
        Luma([quantize(v)])
    })
}

/// Mosaic with one row per orientation: real part, then imaginary part,
/// both mapped so that zero is mid-gray.
pub fn kernel_mosaic(bank: &GaborBank) -> GrayImage {
    let side = bank.params.kernel_radius * 2 + 1;
    let gap = 2;
    let m = bank
        .filters
        .iter()
        .flat_map(|f| f.kernel.iter().map(|z| z.re.abs().max(z.im.abs())))
        .fold(0.0f64, f64::max);
    let cols = 8usize;
    let rows = bank.len().div_ceil(cols);
    let tile_w = 2 * side + gap;
    let width = cols * (tile_w + gap);
    let height = rows * (side + gap);
    let mut img = GrayImage::from_pixel(width as u32, height as u32, Luma([255]));
    for (k, f) in bank.filters.iter().enumerate() {
        let (ox, oy) = ((k % cols) * (tile_w + gap), (k / cols) * (side + gap));
        for ((i, j), z) in f.kernel.indexed_iter() {
            for (part, v) in [(0, z.re), (1, z.im)] {
                let g = quantize(0.5 + v / (2.0 * m));
                let x = ox + part * (side + gap) + j;
                img.put_pixel(x as u32, (oy + i) as u32, Luma([g]));
            }
        }
    }
    img
}

/// Write the requested exports and the manifest into `dir`.
pub fn write_artifacts(run: &PipelineRun, dir: &Path) -> Result<Manifest> {
    let mut out = ArtifactWriter::new(dir)?;
    let ex = &run.config.exports;
    out.raster("stimulus.png", &run.image)?;
    if let Some(meta) = &run.stimulus {
        out.json("stimulus.json", meta)?;
    }
    out.raster("warped.png", &run.warped)?;
    if ex.overlay {
        let overlay = render_overlay(&run.warped, &run.target_lines, run.center);
        let path = dir.join("overlay.png");
        save_overlay(&overlay, &path)?;
        out.record("overlay.png")?;
    }
    if ex.metrics {
        out.json("metrics.json", &run.run_metrics())?;
    }
    if ex.quiver {
        out.bytes("quiver.csv", quiver_csv(&run.displacement, ex.stride).as_bytes())?;
    }
    if ex.ellipses {
        out.bytes("ellipses.csv", ellipses_csv(&run.cometric, ex.stride).as_bytes())?;
    }
    if ex.line_samples {
        out.bytes("line_samples.csv", line_samples_csv(run)?.as_bytes())?;
    }
    if ex.argmax {
        let am = run.energy.argmax();
        let rows: Vec<Vec<usize>> = am.rows().into_iter().map(|r| r.to_vec()).collect();
        out.json(
            "argmax.json",
            &ArgmaxExport {
                width: am.ncols(),
                height: am.nrows(),
                thetas: run.bank.thetas(),
                argmax: &rows,
            },
        )?;
    }
    if ex.energy_slices {
        let max = run.energy.values.iter().cloned().fold(0.0, f64::max);
        for k in 0..run.energy.n_orientations() {
            out.gray(&format!("energy/theta_{k:02}.png"), &energy_slice(&run.energy, k, max))?;
        }
    }
    if ex.kernels {
        out.gray("kernels.png", &kernel_mosaic(&run.bank))?;
    }
    let manifest = Manifest {
        generator: concat!("goi ", env!("CARGO_PKG_VERSION")).to_string(),
        config: run.config.clone(),
        stimulus: run.stimulus.clone(),
        inversion: run.inversion,
        solve_reports: run.solve_reports.clone(),
        files: out.files.clone(),
    };
    out.json("manifest.json", &manifest)?;
    Ok(manifest)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bending {
    Outward,
    Inward,
    Mixed,
    None,
}

impl Bending {
    pub fn of(mids: &[f64]) -> Self {
        if mids.is_empty() || mids.iter().all(|&m| m == 0.0) {
            Bending::None
        } else if mids.iter().all(|&m| m > 0.0) {
            Bending::Outward
        } else if mids.iter().all(|&m| m < 0.0) {
            Bending::Inward
        } else {
            Bending::Mixed
        }
    }

    fn label(self) -> &'static str {
        match self {
            Bending::Outward => "outward",
            Bending::Inward => "inward",
            Bending::Mixed => "mixed",
            Bending::None => "none",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub preset: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_category: Option<ErrorCategory>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign: Option<Bending>,
    pub sigma: f64,
    pub max_displacement: f64,
    pub mid_deflection: Vec<f64>,
    pub max_deflection: Vec<f64>,
    pub bow: Vec<f64>,
    pub fitted_slope: Vec<f64>,
    pub straightness_residual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub rows: Vec<SuiteRow>,
}

impl SuiteSummary {
    pub fn row(&self, preset: &str) -> Option<&SuiteRow> {
        self.rows.iter().find(|r| r.preset == preset)
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok).count()
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from(
            "| preset | σ | status | bending | mid deflection (px) | max deflection (px) | bow (px) | max abs(u) (px) |\n\
             |---|---|---|---|---|---|---|---|\n",
        );
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:+.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        };
        for r in &self.rows {
            let status = match &r.error {
                None => "ok".to_string(),
                Some(e) => format!("error: {}", e.replace('|', "/")),
            };
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} | {} | {:.4} |",
                r.preset,
                r.sigma,
                status,
                r.sign.map_or("-", Bending::label),
                list(&r.mid_deflection),
                list(&r.max_deflection),
                list(&r.bow),
                r.max_displacement
            );
        }
        s
    }
}

fn suite_row(preset: &str, cfg: &PipelineConfig, result: Result<PipelineRun>) -> SuiteRow {
    let mut row = SuiteRow {
        preset: preset.to_string(),
        ok: false,
        error: None,
        error_category: None,
        sign: None,
        sigma: cfg.sigma,
        max_displacement: 0.0,
        mid_deflection: vec![],
        max_deflection: vec![],
        bow: vec![],
        fitted_slope: vec![],
        straightness_residual: vec![],
    };
    match result {
        Err(e) => {
            row.error = Some(e.to_string());
            row.error_category = Some(e.category());
        }
        Ok(run) => {
            let lines = &run.metrics.lines;
            row.ok = true;
            row.max_displacement = run.displacement.max_abs();
            row.mid_deflection = lines.iter().map(|l| l.mid_deflection).collect();
            row.max_deflection = lines.iter().map(|l| l.max_deflection).collect();
            row.bow = lines.iter().map(|l| l.bow).collect();
            row.fitted_slope = lines.iter().map(|l| l.fitted_slope).collect();
            row.straightness_residual = lines.iter().map(|l| l.straightness_residual).collect();
            row.sign = Some(Bending::of(&row.mid_deflection));
        }
    }
    row
}

/// Run every suite preset into `out_dir/<preset>/` and write `suite.json`
/// and `suite.md`. `customize` may adjust each preset before it runs. A
/// failing preset is recorded in its row; only errors writing the summary
/// abort the suite.
pub fn run_suite(
    out_dir: &Path,
    customize: impl Fn(&mut PipelineConfig) + Sync,
) -> Result<SuiteSummary> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let rows: Vec<SuiteRow> = SUITE_PRESETS
        .par_iter()
        .map(|&name| {
            let mut cfg = PipelineConfig::preset(name).expect("suite presets exist");
            customize(&mut cfg);
            cfg.output_dir = out_dir.join(name);
            let result = run_pipeline(&cfg).and_then(|run| {
                write_artifacts(&run, &cfg.output_dir)?;
                Ok(run)
            });
            suite_row(name, &cfg, result)
        })
        .collect();
    let summary = SuiteSummary { rows };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    let p = out_dir.join("suite.json");
    fs::write(&p, json).map_err(|e| Error::io(&p, e))?;
    let p = out_dir.join("suite.md");
    fs::write(&p, summary.to_markdown()).map_err(|e| Error::io(&p, e))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_carry_their_scales() {
        let sigma = |n: &str| PipelineConfig::preset(n).unwrap().sigma;
        assert_eq!(sigma("hering"), 6.72);
        assert_eq!(sigma("wundt"), 11.2);
        assert_eq!(sigma("ehrenstein-square"), 13.44);
        assert_eq!(sigma("zollner"), 10.08);
        for name in PRESETS {
            let cfg = PipelineConfig::preset(name).unwrap();
            assert_eq!((cfg.stimulus.width, cfg.stimulus.height), (256, 256));
            cfg.validate().unwrap();
        }
        assert!(PipelineConfig::preset("nope").is_err());
    }

    #[test]
    fn resolved_config_names_its_radius() {
        let cfg = PipelineConfig::preset("hering").unwrap().resolved().unwrap();
        assert_eq!(cfg.kernel_radius, Some(44));
        let json = serde_json::to_string(&cfg).unwrap();
        assert!(json.contains("\"kernel_radius\":44"));
        assert!(!json.contains("output_dir"));
    }

    #[test]
    fn bending_labels() {
        assert_eq!(Bending::of(&[0.2, 0.1]), Bending::Outward);
        assert_eq!(Bending::of(&[-0.2, -0.1]), Bending::Inward);
        assert_eq!(Bending::of(&[-0.2, 0.1]), Bending::Mixed);
        assert_eq!(Bending::of(&[]), Bending::None);
    }

    #[test]
    fn digests_are_lowercase_hex() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
