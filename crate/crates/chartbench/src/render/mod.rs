//! Deterministic raster rendering of benchmark items.
//!
//! Every chart shares one [`StyleSpec`]: legend above the plot, y-axis tick
//! labels formatted per the item's format condition, x categories evenly
//! banded. Each PNG is accompanied by a JSON sidecar recording tick labels
//! and data-point pixel positions, so label fidelity and geometry can be
//! checked without OCR.

mod canvas;

use std::path::{Path, PathBuf};

use anyhow::Context;
use chartbench_core::generate::Manifest;
use chartbench_core::numformat::format_tick;
use chartbench_core::{AxisSpec, BenchmarkItem, ChartType, DataTable};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use canvas::{Anchor, Canvas, Rgb};

use crate::filter::ItemFilter;
use crate::io::{write_atomic, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LegendPosition {
    #[default]
    Top,
    Bottom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StyleSpec {
    /// Canvas size before `scale`.
    pub width: u32,
    pub height: u32,
    pub font_size: f32,
    /// Entity colours in legend order, `#rrggbb`.
    pub palette: Vec<String>,
    pub legend: LegendPosition,
    pub grid: bool,
    /// Multiplies every pixel dimension (a DPI stand-in).
    pub scale: f32,
    pub line_width: f64,
    pub marker_radius: f64,
    pub background: String,
}

impl Default for StyleSpec {
    fn default() -> Self {
        Self {
            width: 640,
            height: 420,
            font_size: 13.0,
            palette: ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"]
                .map(String::from)
                .to_vec(),
            legend: LegendPosition::Top,
            grid: true,
            scale: 1.0,
            line_width: 2.0,
            marker_radius: 4.5,
            background: "#ffffff".into(),
        }
    }
}

pub const MIN_PALETTE: usize = 6;

impl StyleSpec {
    pub fn validate(&self) -> Result<(), RenderError> {
        let bad = |m: String| Err(RenderError::InvalidStyle(m));
        if self.width < 100 || self.height < 100 {
            return bad(format!("canvas {}x{} is too small", self.width, self.height));
        }
        if !(self.scale > 0.0 && self.scale <= 8.0) {
            return bad(format!("scale {} outside (0, 8]", self.scale));
        }
        let positive = |v: f64| v > 0.0;
        if !positive(f64::from(self.font_size)) || !positive(self.line_width) || !positive(self.marker_radius) {
            return bad("font_size, line_width and marker_radius must be positive".into());
        }
        if self.palette.len() < MIN_PALETTE {
            return bad(format!("palette needs at least {MIN_PALETTE} colours"));
        }
        let colors = self.colors()?;
        for (i, c) in colors.iter().enumerate() {
            if colors[..i].contains(c) {
                return bad(format!("palette colour {} is repeated", self.palette[i]));
            }
        }
        Rgb::parse_hex(&self.background).ok_or_else(|| RenderError::InvalidStyle("bad background colour".into()))?;
        Ok(())
    }

    fn colors(&self) -> Result<Vec<Rgb>, RenderError> {
        self.palette
            .iter()
            .map(|s| Rgb::parse_hex(s).ok_or_else(|| RenderError::InvalidStyle(format!("bad colour {s:?}"))))
            .collect()
    }

    pub fn pixel_size(&self) -> (u32, u32) {
        (
            (self.width as f32 * self.scale).round() as u32,
            (self.height as f32 * self.scale).round() as u32,
        )
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("invalid style: {0}")]
    InvalidStyle(String),
    #[error("cell ({row}, {col}) = {value} lies outside the axis range")]
    CellOutsideAxis { row: String, col: String, value: f64 },
    #[error("table has no rows or no entities")]
    EmptyTable,
    #[error("{entities} entities exceed the {palette}-colour palette")]
    PaletteTooSmall { entities: usize, palette: usize },
    #[error("axis has fewer than two ticks")]
    InvalidAxis,
}

/// Maps data values to pixel rows: `min_tick` sits at `bottom_px`,
/// `max_tick` at `top_px`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YTransform {
    pub min_value: f64,
    pub max_value: f64,
    pub top_px: f64,
    pub bottom_px: f64,
}

impl YTransform {
    pub fn to_px(&self, v: f64) -> f64 {
        let frac = (v - self.min_value) / (self.max_value - self.min_value);
        self.bottom_px - frac * (self.bottom_px - self.top_px)
    }

    pub fn from_px(&self, y: f64) -> f64 {
        let frac = (self.bottom_px - y) / (self.bottom_px - self.top_px);
        self.min_value + frac * (self.max_value - self.min_value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickMeta {
    pub value: f64,
    pub label: String,
    pub y_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMeta {
    pub label: String,
    pub x_px: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointMeta {
    pub row: usize,
    pub col: usize,
    pub value: f64,
    pub x_px: f64,
    pub y_px: f64,
}

/// Sidecar written next to each image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderMeta {
    pub item_id: String,
    pub chart_type: ChartType,
    pub width: u32,
    pub height: u32,
    /// `[left, top, right, bottom]` in pixels.
    pub plot_area: [f64; 4],
    pub y_transform: YTransform,
    pub y_ticks: Vec<TickMeta>,
    pub x_categories: Vec<CategoryMeta>,
    pub legend: Vec<String>,
    pub points: Vec<PointMeta>,
}

pub struct Rendered {
    pub png: Vec<u8>,
    pub meta: RenderMeta,
}

const GRID: Rgb = Rgb([225, 225, 225]);
const AXIS: Rgb = Rgb([60, 60, 60]);
const TEXT: Rgb = Rgb([30, 30, 30]);

/// Renders `item` showing `table`.
pub fn render(item: &BenchmarkItem, table: &DataTable, style: &StyleSpec) -> Result<Rendered, RenderError> {
    style.validate()?;
    let axis = &item.axis;
    if axis.tick_values.len() < 2 {
        return Err(RenderError::InvalidAxis);
    }
    if table.n_rows() == 0 || table.n_cols() == 0 {
        return Err(RenderError::EmptyTable);
    }
    let colors = style.colors()?;
    if table.n_cols() > colors.len() {
        return Err(RenderError::PaletteTooSmall {
            entities: table.n_cols(),
            palette: colors.len(),
        });
    }
    for p in table.datapoints() {
        if let Some(v) = p.value {
            if !axis.contains(v) {
                return Err(RenderError::CellOutsideAxis { row: p.row.to_string(), col: p.col.to_string(), value: v });
            }
        }
    }

    let s = f64::from(style.scale);
    let font = style.font_size * style.scale;
    let fs = f64::from(font);
    let (w, h) = style.pixel_size();
    let mut canvas = Canvas::new(w, h, Rgb::parse_hex(&style.background).unwrap_or(Rgb::WHITE));

    let labels: Vec<String> = axis.tick_values.iter().map(|&v| format_tick(v, axis.format)).collect();
    let label_width = labels.iter().map(|l| Canvas::measure(l, font)).fold(0.0, f64::max);
    let legend_band = fs * 2.4;
    let left = (label_width + 16.0 * s).ceil();
    let right = f64::from(w) - 20.0 * s;
    let (top, bottom) = match style.legend {
        LegendPosition::Top => (legend_band + 10.0 * s, f64::from(h) - fs * 2.2),
        LegendPosition::Bottom => (14.0 * s, f64::from(h) - fs * 2.2 - legend_band),
    };
    let y = YTransform {
        min_value: axis.min_tick(),
        max_value: axis.max_tick(),
        top_px: top,
        bottom_px: bottom,
    };

    // Grid, ticks and labels.
    let mut y_ticks = Vec::with_capacity(labels.len());
    for (&v, label) in axis.tick_values.iter().zip(labels) {
        let py = y.to_px(v);
        if style.grid {
            canvas.line((left, py), (right, py), s, GRID);
        }
        canvas.line((left - 5.0 * s, py), (left, py), s, AXIS);
        canvas.text(&label, left - 8.0 * s, py + fs * 0.36, font, Anchor::Right, TEXT);
        y_ticks.push(TickMeta { value: v, label, y_px: py });
    }

    let n_rows = table.n_rows();
    let band = (right - left) / n_rows as f64;
    let centre = |r: usize| left + band * (r as f64 + 0.5);
    let x_categories: Vec<CategoryMeta> = table
        .row_headers
        .iter()
        .enumerate()
        .map(|(r, label)| {
            let x = centre(r);
            canvas.line((x, bottom), (x, bottom + 5.0 * s), s, AXIS);
            canvas.text(label, x, bottom + 8.0 * s + fs, font, Anchor::Center, TEXT);
            CategoryMeta { label: label.clone(), x_px: x }
        })
        .collect();

    let n_ent = table.n_cols();
    let mut points = Vec::new();
    match item.chart_type {
        ChartType::Line | ChartType::Dot => {
            for (c, &color) in colors.iter().enumerate().take(n_ent) {
                let series: Vec<Option<(f64, f64)>> =
                    (0..n_rows).map(|r| table.get(r, c).map(|v| (centre(r), y.to_px(v)))).collect();
                if item.chart_type == ChartType::Line {
                    for pair in series.windows(2) {
                        if let [Some(a), Some(b)] = pair {
                            canvas.line(*a, *b, style.line_width * s, color);
                        }
                    }
                }
                for (r, pt) in series.iter().enumerate() {
                    if let Some((px, py)) = *pt {
                        let radius = if item.chart_type == ChartType::Line {
                            style.marker_radius * s * 0.6
                        } else {
                            style.marker_radius * s
                        };
                        canvas.disc(px, py, radius, colors[c]);
                        points.push(PointMeta {
                            row: r,
                            col: c,
                            value: table.get(r, c).unwrap_or_default(),
                            x_px: px,
                            y_px: py,
                        });
                    }
                }
            }
        }
        ChartType::Bar => {
            let baseline = y.to_px(0.0f64.clamp(axis.min_tick(), axis.max_tick()));
            let group = band * 0.8;
            let bar = group / n_ent as f64;
            for r in 0..n_rows {
                let start = centre(r) - group / 2.0;
                for (c, &color) in colors.iter().enumerate().take(n_ent) {
                    let Some(v) = table.get(r, c) else { continue };
                    let x0 = start + bar * c as f64;
                    let py = y.to_px(v);
                    canvas.fill_rect(x0 + 0.5 * s, py, x0 + bar - 0.5 * s, baseline, color);
                    points.push(PointMeta {
                        row: r,
                        col: c,
                        value: v,
                        x_px: x0 + bar / 2.0,
                        y_px: py,
                    });
                }
            }
        }
    }

    // Axes on top of the series.
    canvas.line((left, top), (left, bottom), s, AXIS);
    canvas.line((left, bottom), (right, bottom), s, AXIS);

    // Legend: swatch + name per entity, centred.
    let swatch = fs * 0.9;
    let gap = fs * 1.2;
    let widths: Vec<f64> = table.col_headers.iter().map(|n| swatch + fs * 0.4 + Canvas::measure(n, font)).collect();
    let total = widths.iter().sum::<f64>() + gap * (n_ent.saturating_sub(1)) as f64;
    let mut lx = (f64::from(w) - total) / 2.0;
    let ly = match style.legend {
        LegendPosition::Top => legend_band / 2.0 + 4.0 * s,
        LegendPosition::Bottom => f64::from(h) - legend_band / 2.0,
    };
    for (c, name) in table.col_headers.iter().enumerate() {
        canvas.fill_rect(lx, ly - swatch / 2.0, lx + swatch, ly + swatch / 2.0, colors[c]);
        canvas.text(name, lx + swatch + fs * 0.4, ly + fs * 0.36, font, Anchor::Left, TEXT);
        lx += widths[c] + gap;
    }

    Ok(Rendered {
        png: canvas.encode_png(),
        meta: RenderMeta {
            item_id: item.id.clone(),
            chart_type: item.chart_type,
            width: w,
            height: h,
            plot_area: [left, top, right, bottom],
            y_transform: y,
            y_ticks,
            x_categories,
            legend: table.col_headers.clone(),
            points,
        },
    })
}

/// The axis labels a chart of `axis` shows, in tick order.
pub fn tick_labels(axis: &AxisSpec) -> Vec<String> {
    axis.tick_values.iter().map(|&v| format_tick(v, axis.format)).collect()
}

pub fn image_file_name(item_id: &str) -> String {
    format!("{item_id}.png")
}

pub fn meta_file_name(item_id: &str) -> String {
    format!("{item_id}.meta.json")
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RenderReport {
    pub written: usize,
    pub skipped: usize,
    /// `(item_id, error)` for items that could not be rendered or written.
    pub failed: Vec<(String, String)>,
}

impl RenderReport {
    pub fn is_complete(&self) -> bool {
        self.failed.is_empty()
    }
}

#[derive(Debug, Clone, Default)]
pub struct RenderOptions {
    /// Re-render even when both image and sidecar already exist.
    pub force: bool,
    /// `image_ref` values are made relative to this directory when possible.
    pub ref_base: Option<PathBuf>,
}

/// Renders every selected item into `out_dir` in parallel and records each
/// image path in the item's `image_ref`. Finished items (image and sidecar
/// present) are skipped, so an interrupted run can be resumed; every file is
/// written atomically.
pub fn render_manifest(
    manifest: &mut Manifest,
    style: &StyleSpec,
    out_dir: &Path,
    filter: &ItemFilter,
    options: &RenderOptions,
) -> anyhow::Result<RenderReport> {
    style.validate()?;
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let selected: Vec<usize> = (0..manifest.items.len()).filter(|&i| filter.matches(&manifest.items[i])).collect();

    enum Outcome {
        Written,
        Skipped,
        Failed(String),
    }
    let m: &Manifest = manifest;
    let outcomes: Vec<(usize, Outcome)> = selected
        .par_iter()
        .map(|&i| {
            let item = &m.items[i];
            let png_path = out_dir.join(image_file_name(&item.id));
            let meta_path = out_dir.join(meta_file_name(&item.id));
            if !options.force && png_path.is_file() && meta_path.is_file() {
                return (i, Outcome::Skipped);
            }
            let result = (|| -> anyhow::Result<()> {
                let table = m
                    .truth_for(item)
                    .with_context(|| format!("no ground truth table {}", item.table_id))?;
                let r = render(item, table, style)?;
                write_atomic(&png_path, &r.png)?;
                write_json(&meta_path, &r.meta)?;
                Ok(())
            })();
            match result {
                Ok(()) => (i, Outcome::Written),
                Err(e) => (i, Outcome::Failed(format!("{e:#}"))),
            }
        })
        .collect();

    let mut report = RenderReport::default();
    for (i, outcome) in outcomes {
        let item = &mut manifest.items[i];
        match outcome {
            Outcome::Written => report.written += 1,
            Outcome::Skipped => report.skipped += 1,
            Outcome::Failed(e) => {
                report.failed.push((item.id.clone(), e));
                continue;
            }
        }
        let path = out_dir.join(image_file_name(&item.id));
        let shown = options
            .ref_base
            .as_deref()
            .and_then(|base| path.strip_prefix(base).ok())
            .unwrap_or(&path);
        item.image_ref = Some(shown.to_string_lossy().into_owned());
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chartbench_core::generate::{derive_axis, generate_manifest, GenConfig};
    use chartbench_core::{Condition, Part};

    fn three_entity_item(chart: ChartType) -> (BenchmarkItem, DataTable) {
        let m = generate_manifest(&GenConfig {
            parts: vec![Part::A],
            digit_lengths: vec![1],
            entity_counts: vec![3],
            tables_per_entity_count: 1,
            ..GenConfig::default()
        })
        .unwrap();
        let item = m.items.iter().find(|i| i.chart_type == chart).unwrap().clone();
        let table = m.truth_for(&item).unwrap().clone();
        (item, table)
    }

    #[test]
    fn plain_six_tick_labels() {
        let table = DataTable::from_values(
            "t",
            vec!["2018".into(), "2019".into(), "2020".into(), "2021".into()],
            vec!["A".into(), "B".into(), "C".into()],
            vec![vec![9.1, 2.0, 3.5]; 4],
        );
        let (mut item, _) = three_entity_item(ChartType::Line);
        item.axis = derive_axis(&table, 6).unwrap();
        let r = render(&item, &table, &StyleSpec::default()).unwrap();
        let labels: Vec<&str> = r.meta.y_ticks.iter().map(|t| t.label.as_str()).collect();
        assert_eq!(labels, ["0", "2", "4", "6", "8", "10"]);
        assert_eq!((r.meta.width, r.meta.height), StyleSpec::default().pixel_size());
    }

    #[test]
    fn bar_has_group_per_category_and_bar_per_entity() {
        let (item, table) = three_entity_item(ChartType::Bar);
        let r = render(&item, &table, &StyleSpec::default()).unwrap();
        assert_eq!(r.meta.points.len(), 12);
        assert_eq!(r.meta.x_categories.len(), 4);
        for row in 0..4 {
            let xs: Vec<f64> = r.meta.points.iter().filter(|p| p.row == row).map(|p| p.x_px).collect();
            assert_eq!(xs.len(), 3);
            assert!(xs.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn deterministic_bytes() {
        for chart in ChartType::ALL {
            let (item, table) = three_entity_item(chart);
            let a = render(&item, &table, &StyleSpec::default()).unwrap();
            let b = render(&item, &table, &StyleSpec::default()).unwrap();
            assert_eq!(a.png, b.png);
            assert_eq!(&a.png[1..4], b"PNG");
        }
    }

    #[test]
    fn y_transform_is_affine() {
        let (item, table) = three_entity_item(ChartType::Dot);
        let r = render(&item, &table, &StyleSpec::default()).unwrap();
        let y = r.meta.y_transform;
        assert_eq!(y.to_px(item.axis.min_tick()), y.bottom_px);
        assert!((y.to_px(item.axis.max_tick()) - y.top_px).abs() < 1e-9);
        for p in &r.meta.points {
            assert!((y.from_px(p.y_px) - p.value).abs() < 1e-9 * item.axis.max_tick());
        }
        let (a, b) = (1.25, 7.5);
        let mid = y.to_px((a + b) / 2.0);
        assert!((mid - (y.to_px(a) + y.to_px(b)) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_out_of_range_cells_and_bad_styles() {
        let (item, mut table) = three_entity_item(ChartType::Line);
        table.cells[0][0] = Some(item.axis.max_tick() * 2.0);
        assert!(matches!(
            render(&item, &table, &StyleSpec::default()),
            Err(RenderError::CellOutsideAxis { .. })
        ));
        let mut style = StyleSpec::default();
        style.palette.truncate(5);
        assert!(style.validate().is_err());
        let mut style = StyleSpec::default();
        style.palette[1] = style.palette[0].clone();
        assert!(style.validate().is_err());
    }

    #[test]
    fn scaled_style_grows_canvas() {
        let (item, table) = three_entity_item(ChartType::Line);
        let style = StyleSpec { scale: 1.5, ..StyleSpec::default() };
        let r = render(&item, &table, &style).unwrap();
        assert_eq!((r.meta.width, r.meta.height), (960, 630));
        assert_eq!(item.condition, Condition::Base);
    }
}
