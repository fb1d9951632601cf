//! Step-function tables and heatmaps for individual terms, as CSV and SVG.

use std::fmt::Write as _;

use super::EbmModel;
use crate::binning::BinMap;
use crate::dataset::{Feature, FeatureKind, FeatureValue};
use crate::error::{EbmError, Result};
use crate::scalar::{parse_scalar, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct StepRow<T> {
    pub bin: usize,
    /// Category label for categorical features.
    pub level: Option<String>,
    pub lower: T,
    pub upper: T,
    pub score: T,
    pub stderr: T,
}

/// Piecewise-constant shape function: one row per bin, `(lower, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepTable<T> {
    pub label: String,
    pub categorical: bool,
    pub rows: Vec<StepRow<T>>,
}

/// Pair term grid with the bin edges of both axes.
#[derive(Clone, Debug, PartialEq)]
pub struct PairGrid<T> {
    pub label: String,
    pub row_feature: String,
    pub col_feature: String,
    pub row_edges: Vec<(T, T)>,
    pub col_edges: Vec<(T, T)>,
    pub grid: Vec<T>,
    pub stderr: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ShapeExport<T> {
    Step(StepTable<T>),
    Heatmap(PairGrid<T>),
}

const STEP_HEADER: &str = "bin,level,lower,upper,score,stderr";

fn edges_of<T: Scalar>(map: &BinMap<T>) -> Vec<(T, T)> {
    (0..map.bin_count()).map(|b| map.edges(b)).collect()
}

fn axis_label<T: Scalar>(feature: &Feature, bin: usize, (lo, hi): (T, T)) -> String {
    match feature.kind {
        FeatureKind::Categorical { .. } => feature.levels.get(bin).cloned().unwrap_or_else(|| bin.to_string()),
        FeatureKind::Numeric => format!("({lo};{hi}]"),
    }
}

impl<T: Scalar> EbmModel<T> {
    pub fn export_shape(&self, label: &str) -> Result<ShapeExport<T>> {
        let t = self.term_index(label)?;
        let n_shapes = self.shape_terms().len();
        if t < n_shapes {
            let term = &self.shape_terms()[t];
            let feature = self.schema().feature(term.feature);
            let map = &self.bin_maps()[term.feature];
            let rows = (0..map.bin_count())
                .map(|bin| {
                    let (lower, upper) = map.edges(bin);
                    StepRow {
                        bin,
                        level: feature.kind.is_categorical().then(|| axis_label(feature, bin, (lower, upper))),
                        lower,
                        upper,
                        score: term.scores[bin],
                        stderr: term.stderr[bin],
                    }
                })
                .collect();
            Ok(ShapeExport::Step(StepTable {
                label: label.to_string(),
                categorical: feature.kind.is_categorical(),
                rows,
            }))
        } else {
            let p = &self.pair_terms()[t - n_shapes];
            let (a, b) = p.features;
            Ok(ShapeExport::Heatmap(PairGrid {
                label: label.to_string(),
                row_feature: self.schema().feature(a).name.clone(),
                col_feature: self.schema().feature(b).name.clone(),
                row_edges: edges_of(&self.bin_maps()[a]),
                col_edges: edges_of(&self.bin_maps()[b]),
                grid: p.grid.clone(),
                stderr: p.stderr.clone(),
            }))
        }
    }

    /// Axis labels (interval text or category level) used in heatmap exports.
    fn axis_labels(&self, feature: usize) -> Vec<String> {
        let map = &self.bin_maps()[feature];
        let f = self.schema().feature(feature);
        (0..map.bin_count()).map(|b| axis_label(f, b, map.edges(b))).collect()
    }

    /// CSV and SVG renderings of a term.
    pub fn render_term(&self, label: &str) -> Result<(String, String)> {
        match self.export_shape(label)? {
            ShapeExport::Step(table) => Ok((table.to_csv(), table.to_svg(self.unit()))),
            ShapeExport::Heatmap(grid) => {
                let t = self.term_index(label)? - self.shape_terms().len();
                let (a, b) = self.pair_terms()[t].features;
                let rows = self.axis_labels(a);
                let cols = self.axis_labels(b);
                Ok((grid.to_csv(&rows, &cols), grid.to_svg(&rows, &cols)))
            }
        }
    }
}

impl<T: Scalar> StepTable<T> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(STEP_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.bin,
                r.level.as_deref().unwrap_or(""),
                r.lower,
                r.upper,
                r.score,
                r.stderr
            );
        }
        out
    }

    pub fn from_csv(label: &str, text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(STEP_HEADER) {
            return Err(EbmError::Malformed("step table header missing".into()));
        }
        let mut rows = Vec::new();
        let mut categorical = false;
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 6 {
                return Err(EbmError::Malformed(format!("step table line {} has {} cells", i + 2, cells.len())));
            }
            let num = |k: usize| -> Result<T> {
                parse_scalar(cells[k]).ok_or_else(|| EbmError::Malformed(format!("bad number `{}`", cells[k])))
            };
            let bin = cells[0].parse().map_err(|_| EbmError::Malformed(format!("bad bin `{}`", cells[0])))?;
            let level = (!cells[1].is_empty()).then(|| cells[1].to_string());
            categorical |= level.is_some();
            rows.push(StepRow { bin, level, lower: num(2)?, upper: num(3)?, score: num(4)?, stderr: num(5)? });
        }
        if rows.is_empty() {
            return Err(EbmError::Malformed("step table has no rows".into()));
        }
        Ok(StepTable { label: label.to_string(), categorical, rows })
    }

    /// Score for a raw value using only the table's edges.
    pub fn lookup(&self, value: FeatureValue<T>) -> Result<T> {
        match value {
            FeatureValue::Code(c) => self
                .rows
                .iter()
                .find(|r| r.bin == c)
                .map(|r| r.score)
                .ok_or_else(|| EbmError::Domain(format!("code {c} not in table"))),
            FeatureValue::Numeric(v) => {
                let row = self.rows.iter().find(|r| v <= r.upper).unwrap_or_else(|| self.rows.last().expect("non-empty"));
                Ok(row.score)
            }
        }
    }

    pub fn to_svg(&self, unit: &str) -> String {
        let (w, h, m) = (640.0, 360.0, 56.0);
        let scores: Vec<f64> = self.rows.iter().map(|r| r.score.as_f64()).collect();
        let errs: Vec<f64> = self.rows.iter().map(|r| r.stderr.as_f64()).collect();
        let y_lo = scores.iter().zip(&errs).map(|(s, e)| s - e).fold(f64::INFINITY, f64::min).min(0.0);
        let y_hi = scores.iter().zip(&errs).map(|(s, e)| s + e).fold(f64::NEG_INFINITY, f64::max).max(0.0);
        let y_span = if y_hi > y_lo { y_hi - y_lo } else { 1.0 };
        let sy = |v: f64| h - m - (v - y_lo) / y_span * (h - 2.0 * m);

        // x positions: finite interval ends; open ends extend by 5% of the span
        let xs: Vec<(f64, f64)> = if self.categorical {
            self.rows.iter().map(|r| (r.lower.as_f64(), r.upper.as_f64())).collect()
        } else {
            let cuts: Vec<f64> = self.rows.iter().skip(1).map(|r| r.lower.as_f64()).collect();
            let (lo, hi) = match (cuts.first(), cuts.last()) {
                (Some(&a), Some(&b)) => {
                    let pad = if b > a { (b - a) * 0.05 } else { 1.0 };
                    (a - pad, b + pad)
                }
                _ => (0.0, 1.0),
            };
            self.rows
                .iter()
                .map(|r| {
                    let l = r.lower.as_f64();
                    let u = r.upper.as_f64();
                    (if l.is_finite() { l } else { lo }, if u.is_finite() { u } else { hi })
                })
                .collect()
        };
        let x_lo = xs.first().map_or(0.0, |x| x.0);
        let x_hi = xs.last().map_or(1.0, |x| x.1);
        let x_span = if x_hi > x_lo { x_hi - x_lo } else { 1.0 };
        let sx = |v: f64| m + (v - x_lo) / x_span * (w - 2.0 * m);

        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
            w / 2.0,
            xml_escape(&self.label)
        );
        let _ = writeln!(
            svg,
            "<line x1=\"{m}\" y1=\"{0:.2}\" x2=\"{1}\" y2=\"{0:.2}\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>",
            sy(0.0),
            w - m
        );
        let mut band = String::new();
        let mut line = String::new();
        for ((x0, x1), (s, e)) in xs.iter().zip(scores.iter().zip(&errs)) {
            let _ = writeln!(
                band,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#bbb\" fill-opacity=\"0.6\"/>",
                sx(*x0),
                sy(s + e),
                (sx(*x1) - sx(*x0)).max(0.5),
                (sy(s - e) - sy(s + e)).max(0.0)
            );
            if line.is_empty() {
                let _ = write!(line, "M{:.2},{:.2}", sx(*x0), sy(*s));
            } else {
                let _ = write!(line, " V{:.2}", sy(*s));
            }
            let _ = write!(line, " H{:.2}", sx(*x1));
        }
        svg.push_str(&band);
        let _ = writeln!(svg, "<path d=\"{line}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>");
        let _ = writeln!(
            svg,
            "<line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{0}\" stroke=\"black\"/>\n\
             <line x1=\"{m}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>",
            h - m,
            w - m
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{y_hi:.4}</text>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{y_lo:.4}</text>\n\
             <text x=\"{m}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">{x_lo:.4}</text>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{x_hi:.4}</text>\n\
             <text x=\"14\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 {:.2})\" text-anchor=\"middle\">score ({})</text>",
            4.0,
            m - 4.0,
            4.0,
            h - m + 4.0,
            h - m + 16.0,
            w - m,
            h - m + 16.0,
            h / 2.0,
            h / 2.0,
            xml_escape(unit)
        );
        svg.push_str("</svg>\n");
        svg
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Diverging blue–white–red colour for `v` in `[-1, 1]`.
fn diverging(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r as u8, g as u8, b as u8)
}

impl<T: Scalar> PairGrid<T> {
    pub fn rows(&self) -> usize {
        self.row_edges.len()
    }

    pub fn cols(&self) -> usize {
        self.col_edges.len()
    }

    /// Matrix CSV: header holds column-axis bins, first column holds row-axis bins.
    pub fn to_csv(&self, row_labels: &[String], col_labels: &[String]) -> String {
        let mut out = format!("{}\\{}", self.row_feature, self.col_feature);
        for c in col_labels {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for (a, rl) in row_labels.iter().enumerate() {
            out.push_str(rl);
            for b in 0..self.cols() {
                let _ = write!(out, ",{}", self.grid[a * self.cols() + b]);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_svg(&self, row_labels: &[String], col_labels: &[String]) -> String {
        let (w, h, left, top) = (640.0, 560.0, 140.0, 60.0);
        let (gw, gh) = (w - left - 40.0, h - top - 120.0);
        let cw = gw / self.cols() as f64;
        let ch = gh / self.rows() as f64;
        let max_abs = self.grid.iter().map(|v| v.as_f64().abs()).fold(0.0, f64::max);
        let scale = if max_abs > 0.0 { max_abs } else { 1.0 };
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
            w / 2.0,
            xml_escape(&self.label)
        );
        for a in 0..self.rows() {
            for b in 0..self.cols() {
                let v = self.grid[a * self.cols() + b].as_f64();
                // row axis runs bottom-up
                let y = top + gh - (a + 1) as f64 * ch;
                let _ = writeln!(
                    svg,
                    "<rect x=\"{:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"><title>{} / {}: {v}</title></rect>",
                    left + b as f64 * cw,
                    cw + 0.05,
                    ch + 0.05,
                    diverging(v / scale),
                    xml_escape(&row_labels[a]),
                    xml_escape(&col_labels[b])
                );
            }
        }
        let _ = writeln!(
            svg,
            "<rect x=\"{left}\" y=\"{top}\" width=\"{gw}\" height=\"{gh}\" fill=\"none\" stroke=\"black\"/>\n\
             <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"20\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 20 {:.2})\" text-anchor=\"middle\">{}</text>\n\
             <text x=\"{left}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\">colour scale ±{scale:.4}</text>",
            left + gw / 2.0,
            top + gh + 40.0,
            xml_escape(&self.col_feature),
            top + gh / 2.0,
            top + gh / 2.0,
            xml_escape(&self.row_feature),
            top + gh + 70.0
        );
        svg.push_str("</svg>\n");
        svg
    }
}
