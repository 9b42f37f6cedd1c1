//! Procedural renderings of the classic geometrical-optical illusion figures.
//!
//! Every figure is built from anti-aliased strokes (segments and circles)
//! laid out in center-relative coordinates `X = col - cx`, `Y = row - cy`
//! with `(cx, cy) = ((W-1)/2, (H-1)/2)`. Symmetric figures are assembled by
//! mirroring half of their strokes exactly, so reflection symmetry holds
//! bit-for-bit on the rendered raster.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{RasterImage, MIN_SIDE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StimulusKind {
    Hering,
    Wundt,
    EhrensteinSquare,
    WundtHering,
    Zollner,
    RandomSegments,
    Blank,
}

impl StimulusKind {
    pub const ALL: [StimulusKind; 7] = [
        StimulusKind::Hering,
        StimulusKind::Wundt,
        StimulusKind::EhrensteinSquare,
        StimulusKind::WundtHering,
        StimulusKind::Zollner,
        StimulusKind::RandomSegments,
        StimulusKind::Blank,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StimulusKind::Hering => "hering",
            StimulusKind::Wundt => "wundt",
            StimulusKind::EhrensteinSquare => "ehrenstein-square",
            StimulusKind::WundtHering => "wundt-hering",
            StimulusKind::Zollner => "zollner",
            StimulusKind::RandomSegments => "random-segments",
            StimulusKind::Blank => "blank",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Whether the target lines run horizontally.
    fn horizontal_targets(self) -> bool {
        matches!(
            self,
            StimulusKind::Wundt | StimulusKind::WundtHering | StimulusKind::Zollner
        )
    }
}

/// Parameters of a generated figure.
///
/// `n_inducers` counts radial rays (Hering, RandomSegments density
/// reference), rays per side fan (Wundt, Wundt-Hering), concentric circles
/// (Ehrenstein square) or hatch strokes per target line (Zöllner). For the
/// Ehrenstein square `line_offset` is the half side of the square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusSpec {
    pub kind: StimulusKind,
    pub width: usize,
    pub height: usize,
    pub line_offset: f64,
    pub n_inducers: usize,
    pub line_thickness: f64,
    #[serde(default)]
    pub seed: u64,
    /// Stroke length for random segments and Zöllner hatches.
    pub segment_length: f64,
    /// Render bright strokes on a dark ground instead.
    #[serde(default)]
    pub invert: bool,
}

impl StimulusSpec {
    /// Defaults for `kind` on a 256×256 canvas.
    pub fn new(kind: StimulusKind) -> Self {
        let (line_offset, n_inducers, segment_length) = match kind {
            StimulusKind::Hering => (40.0, 24, 27.0),
            StimulusKind::Wundt => (40.0, 12, 27.0),
            StimulusKind::WundtHering => (40.0, 12, 27.0),
            StimulusKind::EhrensteinSquare => (50.0, 8, 27.0),
            StimulusKind::Zollner => (40.0, 16, 30.0),
            // 4σ at the Hering scale σ = 6.72 px.
            StimulusKind::RandomSegments => (40.0, 24, 27.0),
            StimulusKind::Blank => (40.0, 2, 27.0),
        };
        Self {
            kind,
            width: 256,
            height: 256,
            line_offset,
            n_inducers,
            line_thickness: 2.0,
            seed: 0,
            segment_length,
            invert: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidStimulus(m));
        if self.width < MIN_SIDE || self.height < MIN_SIDE {
            return fail(format!(
                "canvas {}x{} is below the {MIN_SIDE}px minimum",
                self.width, self.height
            ));
        }
        let half = if self.kind.horizontal_targets() {
            self.height as f64 / 2.0
        } else if self.kind == StimulusKind::EhrensteinSquare {
            self.width.min(self.height) as f64 / 2.0
        } else {
            self.width as f64 / 2.0
        };
        if self.kind != StimulusKind::Blank && !(self.line_offset > 0.0 && self.line_offset < half) {
            return fail(format!(
                "line_offset {} must lie in (0, {half})",
                self.line_offset
            ));
        }
        if self.n_inducers < 2 {
            return fail(format!("n_inducers {} must be at least 2", self.n_inducers));
        }
        if !(self.line_thickness > 0.0 && self.line_thickness.is_finite()) {
            return fail(format!("line_thickness {} must be positive", self.line_thickness));
        }
        if !(self.segment_length > 0.0 && self.segment_length.is_finite()) {
            return fail(format!("segment_length {} must be positive", self.segment_length));
        }
        Ok(())
    }

    fn center(&self) -> (f64, f64) {
        ((self.width as f64 - 1.0) / 2.0, (self.height as f64 - 1.0) / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Vertical,
    Horizontal,
}

/// Exact geometry of one straight target line, relative to the image center.
///
/// A vertical line sits at `x1 = cx + offset` and spans
/// `x2 ∈ [cy + extent.0, cy + extent.1]`; a horizontal line swaps the roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetLine {
    pub axis: Axis,
    pub offset: f64,
    pub extent: (f64, f64),
}

impl TargetLine {
    /// Absolute `(x1, x2)` pixel coordinate of the point `s` along the line.
    pub fn point(&self, center: (f64, f64), s: f64) -> (f64, f64) {
        match self.axis {
            Axis::Vertical => (center.0 + self.offset, center.1 + s),
            Axis::Horizontal => (center.0 + s, center.1 + self.offset),
        }
    }

    /// Unit normal pointing away from the image center.
    pub fn outward_normal(&self) -> (f64, f64) {
        let sign = if self.offset >= 0.0 { 1.0 } else { -1.0 };
        match self.axis {
            Axis::Vertical => (sign, 0.0),
            Axis::Horizontal => (0.0, sign),
        }
    }
}

/// JSON sidecar written next to a saved stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusMetadata {
    pub kind: StimulusKind,
    pub params: StimulusSpec,
    pub center: (f64, f64),
    pub target_lines: Vec<TargetLine>,
}

#[derive(Debug, Clone)]
pub struct Stimulus {
    pub image: RasterImage,
    pub metadata: StimulusMetadata,
}

impl Stimulus {
    pub fn target_lines(&self) -> &[TargetLine] {
        &self.metadata.target_lines
    }

    pub fn center(&self) -> (f64, f64) {
        self.metadata.center
    }
}

#[derive(Debug, Clone, Copy)]
enum Stroke {
    Segment { a: (f64, f64), b: (f64, f64) },
    Circle { radius: f64 },
}

impl Stroke {
    fn mirror_x(self) -> Self {
        match self {
            Stroke::Segment { a, b } => Stroke::Segment {
                a: (-a.0, a.1),
                b: (-b.0, b.1),
            },
            c => c,
        }
    }

    fn mirror_y(self) -> Self {
        match self {
            Stroke::Segment { a, b } => Stroke::Segment {
                a: (a.0, -a.1),
                b: (b.0, -b.1),
            },
            c => c,
        }
    }

    fn distance(&self, x: f64, y: f64) -> f64 {
        match *self {
            Stroke::Segment { a, b } => {
                let (sx, sy) = (b.0 - a.0, b.1 - a.1);
                let (dx, dy) = (x - a.0, y - a.1);
                let len2 = sx * sx + sy * sy;
                let t = if len2 > 0.0 {
                    ((dx * sx + dy * sy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                (dx - t * sx).hypot(dy - t * sy)
            }
            Stroke::Circle { radius } => (x.hypot(y) - radius).abs(),
        }
    }

    /// Center-relative bounding box `(xmin, xmax, ymin, ymax)`.
    fn bounds(&self) -> (f64, f64, f64, f64) {
        match *self {
            Stroke::Segment { a, b } => (a.0.min(b.0), a.0.max(b.0), a.1.min(b.1), a.1.max(b.1)),
            Stroke::Circle { radius } => (-radius, radius, -radius, radius),
        }
    }
}

/// Pixel darkness of a stroke of width `t` at distance `d` from its axis:
/// a one-pixel linear ramp across the stroke border, which equals the
/// covered area of a pixel crossed by a straight edge at normal incidence.
fn coverage(d: f64, t: f64) -> f64 {
    (t / 2.0 + 0.5 - d).clamp(0.0, 1.0)
}

fn rasterize(spec: &StimulusSpec, strokes: &[Stroke]) -> Array2<f64> {
    let (w, h) = (spec.width, spec.height);
    let (cx, cy) = spec.center();
    let t = spec.line_thickness;
    let pad = t / 2.0 + 1.0;
    let mut dark = Array2::<f64>::zeros((h, w));
    for s in strokes {
        let (x0, x1, y0, y1) = s.bounds();
        let j0 = (cx + x0 - pad).floor().max(0.0) as usize;
        let i0 = (cy + y0 - pad).floor().max(0.0) as usize;
        let j1 = ((cx + x1 + pad).ceil().max(0.0) as usize).min(w - 1);
        let i1 = ((cy + y1 + pad).ceil().max(0.0) as usize).min(h - 1);
        if j0 > j1 || i0 > i1 {
            continue;
        }
        for i in i0..=i1 {
            let y = i as f64 - cy;
            for j in j0..=j1 {
                let x = j as f64 - cx;
                let c = coverage(s.distance(x, y), t);
                let cell = &mut dark[[i, j]];
                if c > *cell {
                    *cell = c;
                }
            }
        }
    }
    dark
}

/// Push `s` and its exact left/right mirror image.
fn push_mirrored(out: &mut Vec<Stroke>, s: Stroke) {
    out.push(s);
    out.push(s.mirror_x());
}

fn canvas_reach(spec: &StimulusSpec) -> f64 {
    (spec.width as f64).hypot(spec.height as f64)
}

/// Rays through the center at angles `π/2 + (k + ½)·2π/n`; the set is
/// closed under `φ → π − φ`, so only the right half is computed.
fn radial_rays(spec: &StimulusSpec, n: usize, out: &mut Vec<Stroke>) {
    let reach = canvas_reach(spec);
    let step = 2.0 * PI / n as f64;
    for k in 0..n {
        let phi = FRAC_PI_2 + (k as f64 + 0.5) * step;
        let c = phi.cos();
        if c > 1e-12 {
            push_mirrored(
                out,
                Stroke::Segment {
                    a: (0.0, 0.0),
                    b: (reach * c, reach * phi.sin()),
                },
            );
        } else if c.abs() <= 1e-12 {
            out.push(Stroke::Segment {
                a: (0.0, 0.0),
                b: (0.0, reach * phi.sin().signum()),
            });
        }
    }
}

/// Two fans whose apexes sit on the horizontal midline at the left and
/// right borders; each fan reaches the vertical center axis.
fn side_fans(spec: &StimulusSpec, n: usize, out: &mut Vec<Stroke>) {
    let (cx, _) = spec.center();
    let half_angle = 75f64.to_radians();
    for k in 0..n {
        let a = -half_angle + (k as f64 + 0.5) * 2.0 * half_angle / n as f64;
        push_mirrored(
            out,
            Stroke::Segment {
                a: (-cx, 0.0),
                b: (0.0, cx * a.tan()),
            },
        );
    }
}

fn vertical_targets(spec: &StimulusSpec, out: &mut Vec<Stroke>, lines: &mut Vec<TargetLine>) {
    let (_, cy) = spec.center();
    let d = spec.line_offset;
    push_mirrored(
        out,
        Stroke::Segment {
            a: (-d, -cy),
            b: (-d, cy),
        },
    );
    for offset in [-d, d] {
        lines.push(TargetLine {
            axis: Axis::Vertical,
            offset,
            extent: (-cy, cy),
        });
    }
}

fn horizontal_targets(spec: &StimulusSpec, out: &mut Vec<Stroke>, lines: &mut Vec<TargetLine>) {
    let (cx, _) = spec.center();
    let d = spec.line_offset;
    for y in [-d, d] {
        out.push(Stroke::Segment {
            a: (-cx, y),
            b: (cx, y),
        });
        lines.push(TargetLine {
            axis: Axis::Horizontal,
            offset: y,
            extent: (-cx, cx),
        });
    }
}

/// Total length of `n` center rays inside the canvas.
fn hering_ink_length(spec: &StimulusSpec, n: usize) -> f64 {
    let (cx, cy) = spec.center();
    let step = 2.0 * PI / n as f64;
    (0..n)
        .map(|k| {
            let phi = FRAC_PI_2 + (k as f64 + 0.5) * step;
            let (c, s) = (phi.cos().abs(), phi.sin().abs());
            let tx = if c > 0.0 { cx / c } else { f64::INFINITY };
            let ty = if s > 0.0 { cy / s } else { f64::INFINITY };
            tx.min(ty)
        })
        .sum()
}

/// Number of random segments matching the ink of an `n`-ray Hering background.
pub fn random_segment_count(spec: &StimulusSpec) -> usize {
    (hering_ink_length(spec, spec.n_inducers) / spec.segment_length).round() as usize
}

/// Render the figure described by `spec` together with its target-line geometry.
pub fn generate(spec: &StimulusSpec) -> Result<Stimulus> {
    spec.validate()?;
    let (cx, cy) = spec.center();
    let mut strokes = Vec::new();
    let mut lines = Vec::new();
    match spec.kind {
        StimulusKind::Blank => {}
        StimulusKind::Hering => {
            radial_rays(spec, spec.n_inducers, &mut strokes);
            vertical_targets(spec, &mut strokes, &mut lines);
        }
        StimulusKind::Wundt => {
            side_fans(spec, spec.n_inducers, &mut strokes);
            horizontal_targets(spec, &mut strokes, &mut lines);
        }
        StimulusKind::WundtHering => {
            side_fans(spec, spec.n_inducers, &mut strokes);
            radial_rays(spec, 2 * spec.n_inducers, &mut strokes);
            horizontal_targets(spec, &mut strokes, &mut lines);
        }
        StimulusKind::EhrensteinSquare => {
            let n = spec.n_inducers;
            let r_max = cx.min(cy) + 0.5;
            for k in 1..=n {
                strokes.push(Stroke::Circle {
                    radius: (k as f64 - 0.5) * r_max / n as f64,
                });
            }
            let s = spec.line_offset;
            push_mirrored(
                &mut strokes,
                Stroke::Segment {
                    a: (s, -s),
                    b: (s, s),
                },
            );
            for y in [-s, s] {
                strokes.push(Stroke::Segment {
                    a: (-s, y),
                    b: (s, y),
                });
            }
            for offset in [-s, s] {
                lines.push(TargetLine {
                    axis: Axis::Vertical,
                    offset,
                    extent: (-s, s),
                });
            }
            for offset in [-s, s] {
                lines.push(TargetLine {
                    axis: Axis::Horizontal,
                    offset,
                    extent: (-s, s),
                });
            }
        }
        StimulusKind::Zollner => {
            // Hatches lean one way on the upper line and the other way on the
            // lower line; the figure is symmetric under the top/bottom flip.
            let n = spec.n_inducers;
            let spacing = spec.width as f64 / n as f64;
            let (hx, hy) = (
                spec.segment_length / 2.0 * FRAC_PI_4.cos(),
                spec.segment_length / 2.0 * FRAC_PI_4.sin(),
            );
            let y = -spec.line_offset;
            for k in 0..n {
                let x = (k as f64 + 0.5 - n as f64 / 2.0) * spacing;
                let s = Stroke::Segment {
                    a: (x - hx, y - hy),
                    b: (x + hx, y + hy),
                };
                strokes.push(s);
                strokes.push(s.mirror_y());
            }
            horizontal_targets(spec, &mut strokes, &mut lines);
        }
        StimulusKind::RandomSegments => {
            let count = random_segment_count(spec);
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let half = spec.segment_length / 2.0;
            for _ in 0..count {
                let x = rng.random_range(-cx..=cx);
                let y = rng.random_range(-cy..=cy);
                let a = rng.random_range(0.0..PI);
                let (dx, dy) = (half * a.cos(), half * a.sin());
                strokes.push(Stroke::Segment {
                    a: (x - dx, y - dy),
                    b: (x + dx, y + dy),
                });
            }
            vertical_targets(spec, &mut strokes, &mut lines);
        }
    }
    let dark = rasterize(spec, &strokes);
    let data = if spec.invert {
        dark
    } else {
        dark.mapv(|d| 1.0 - d)
    };
    Ok(Stimulus {
        image: RasterImage::from_array(data)?,
        metadata: StimulusMetadata {
            kind: spec.kind,
            params: spec.clone(),
            center: (cx, cy),
            target_lines: lines,
        },
    })
}
