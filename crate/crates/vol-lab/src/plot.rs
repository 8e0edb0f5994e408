//! Plot artifacts: a gnuplot-ready data file and a standalone SVG chart per table.

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::table::ResultTable;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("table {0} is empty, nothing to plot")]
    Empty(String),
    #[error("table {table} has no column {column}")]
    MissingColumn { table: String, column: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotStyle {
    LevelSweep,
    SkewSweep,
    SkewVsMaturity,
    ApproxError,
    Decomposition,
}

#[derive(Debug, Clone, PartialEq)]
enum Reference {
    None,
    Identity,
    Column(&'static str),
}

struct PlotSpec {
    x: &'static str,
    y: &'static str,
    err: &'static str,
    series: Option<&'static str>,
    reference: Reference,
    log_log_variant: bool,
}

impl PlotStyle {
    fn spec(self) -> PlotSpec {
        match self {
            PlotStyle::LevelSweep => PlotSpec {
                x: "sigma0",
                y: "iv_hat",
                err: "stderr",
                series: Some("series"),
                reference: Reference::Identity,
                log_log_variant: false,
            },
            PlotStyle::SkewSweep => PlotSpec {
                x: "sigma0",
                y: "skew_scaled",
                err: "scaled_stderr",
                series: Some("series"),
                reference: Reference::Column("theory"),
                log_log_variant: false,
            },
            PlotStyle::SkewVsMaturity => PlotSpec {
                x: "maturity",
                y: "skew_raw",
                err: "skew_stderr",
                series: Some("kind"),
                reference: Reference::Column("theory_raw"),
                log_log_variant: true,
            },
            PlotStyle::ApproxError => PlotSpec {
                x: "strike",
                y: "median",
                err: "median_stderr",
                series: Some("maturity"),
                reference: Reference::None,
                log_log_variant: false,
            },
            PlotStyle::Decomposition => PlotSpec {
                x: "row",
                y: "gap",
                err: "joint_stderr",
                series: Some("n_steps"),
                reference: Reference::None,
                log_log_variant: false,
            },
        }
    }
}

struct Point {
    x: f64,
    y: f64,
    err: f64,
    reference: Option<f64>,
}

struct Series {
    label: String,
    points: Vec<Point>,
}

fn collect(table: &ResultTable, spec: &PlotSpec) -> Result<Vec<Series>, PlotError> {
    let missing = |column: &str| PlotError::MissingColumn {
        table: table.name.clone(),
        column: column.to_owned(),
    };
    let xs = if spec.x == "row" {
        (0..table.len()).map(|i| i as f64).collect()
    } else {
        table.column(spec.x).ok_or_else(|| missing(spec.x))?
    };
    let ys = table.column(spec.y).ok_or_else(|| missing(spec.y))?;
    let errs = table.column(spec.err).ok_or_else(|| missing(spec.err))?;
    let labels = match spec.series {
        Some(c) => table.text_column(c).ok_or_else(|| missing(c))?,
        None => vec![String::new(); table.len()],
    };
    let refs = match spec.reference {
        Reference::Column(c) => Some(table.column(c).ok_or_else(|| missing(c))?),
        _ => None,
    };
    let mut out: Vec<Series> = Vec::new();
    for i in 0..table.len() {
        let point = Point {
            x: xs[i],
            y: ys[i],
            err: errs[i],
            reference: refs.as_ref().map(|r| r[i]),
        };
        match out.iter_mut().find(|s| s.label == labels[i]) {
            Some(s) => s.points.push(point),
            None => out.push(Series {
                label: labels[i].clone(),
                points: vec![point],
            }),
        }
    }
    Ok(out)
}

/// Writes `<name>.csv`, `<name>.dat` and, with `svg`, `<name>.svg` into
/// `dir`. Skew-versus-maturity tables whose skews are all non-zero also get
/// `<name>_loglog.svg`. Nothing is written for an empty table.
pub fn emit_plot_data(table: &ResultTable, style: PlotStyle, dir: &Path, svg: bool) -> Result<Vec<PathBuf>, PlotError> {
    if table.is_empty() {
        return Err(PlotError::Empty(table.name.clone()));
    }
    let spec = style.spec();
    let series = collect(table, &spec)?;
    std::fs::create_dir_all(dir)?;
    let mut written = vec![table.save_csv(dir)?];

    let dat = dir.join(format!("{}.dat", table.name));
    std::fs::write(&dat, gnuplot_data(&series, &spec))?;
    written.push(dat);

    if svg {
        let path = dir.join(format!("{}.svg", table.name));
        std::fs::write(&path, render_svg(&table.name, &series, &spec, false))?;
        written.push(path);
        let all_nonzero = series.iter().flat_map(|s| &s.points).all(|p| p.y != 0.0 && p.x > 0.0);
        if spec.log_log_variant && all_nonzero {
            let path = dir.join(format!("{}_loglog.svg", table.name));
            std::fs::write(&path, render_svg(&table.name, &series, &spec, true))?;
            written.push(path);
        }
    }
    Ok(written)
}

fn gnuplot_data(series: &[Series], spec: &PlotSpec) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} {} {} reference", spec.x, spec.y, spec.err);
    for (i, ser) in series.iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# series {}", ser.label);
        for p in &ser.points {
            let reference = match spec.reference {
                Reference::Identity => p.x,
                _ => p.reference.unwrap_or(f64::NAN),
            };
            let _ = writeln!(s, "{:.16e} {:.16e} {:.16e} {:.16e}", p.x, p.y, p.err, reference);
        }
    }
    s
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 460.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 30.0, 40.0, 55.0); // left, right, top, bottom
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            let v = if log { v.log10() } else { v };
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 {
            let pad = if lo == 0.0 { 1.0 } else { 0.1 * lo.abs() };
            lo -= pad;
            hi += pad;
        }
        let pad = 0.05 * (hi - lo);
        Self {
            lo: lo - pad,
            hi: hi + pad,
            log,
        }
    }

    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let (a, b) = (self.lo.ceil() as i32, self.hi.floor() as i32);
            return (a..=b).map(|e| (10f64.powi(e), format!("1e{e}"))).collect();
        }
        let span = self.hi - self.lo;
        let raw = span / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let mut t = (self.lo / step).ceil() * step;
        let mut out = Vec::new();
        while t <= self.hi + 1e-12 * span {
            out.push((t, format!("{}", (t / step).round() * step)));
            t += step;
        }
        out
    }
}

fn render_svg(title: &str, series: &[Series], spec: &PlotSpec, log_log: bool) -> String {
    let transform = |y: f64| if log_log { y.abs() } else { y };
    let points = || series.iter().flat_map(|s| &s.points);
    let xaxis = Axis::fit(points().map(|p| p.x), log_log);
    let yaxis = Axis::fit(
        points().flat_map(|p| {
            let mut v = vec![transform(p.y)];
            if !log_log {
                v.push(p.y - p.err);
                v.push(p.y + p.err);
            }
            if let Some(r) = p.reference {
                v.push(transform(r));
            }
            if spec.reference == Reference::Identity {
                v.push(p.x);
            }
            v
        }),
        log_log,
    );
    let (ml, mr, mt, mb) = MARGIN;
    let pw = WIDTH - ml - mr;
    let ph = HEIGHT - mt - mb;
    let px = |x: f64| ml + xaxis.frac(x) * pw;
    let py = |y: f64| mt + (1.0 - yaxis.frac(y)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let heading = if log_log { format!("{title} (log-log, |{}|)", spec.y) } else { title.to_owned() };
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(&heading));
    let _ = writeln!(s, r##"<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##);
    for (v, label) in xaxis.ticks() {
        let x = px(v);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#333"/>"##, mt + ph, mt + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, mt + ph + 18.0);
    }
    for (v, label) in yaxis.ticks() {
        let y = py(v);
        let _ = writeln!(s, r##"<line x1="{:.2}" y1="{y:.2}" x2="{ml}" y2="{y:.2}" stroke="#333"/>"##, ml - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, ml - 8.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, ml + pw / 2.0, HEIGHT - 12.0, spec.x);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        mt + ph / 2.0,
        mt + ph / 2.0,
        spec.y
    );

    if spec.reference == Reference::Identity && !log_log {
        let (a, b) = (xaxis.lo.max(yaxis.lo), xaxis.hi.min(yaxis.hi));
        if a < b {
            let _ = writeln!(
                s,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#888" stroke-dasharray="6 4"/>"##,
                px(a),
                py(a),
                px(b),
                py(b)
            );
        }
    }

    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let mut pts: Vec<&Point> = ser.points.iter().filter(|p| p.x.is_finite() && p.y.is_finite()).collect();
        pts.sort_by(|a, b| a.x.total_cmp(&b.x));
        if pts.is_empty() {
            continue;
        }
        let path: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", px(p.x), py(transform(p.y)))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}"/>"#, path.join(" "));
        let refs: Vec<String> = pts
            .iter()
            .filter_map(|p| p.reference.filter(|r| r.is_finite() && (!log_log || *r != 0.0)).map(|r| format!("{:.2},{:.2}", px(p.x), py(transform(r)))))
            .collect();
        if refs.len() > 1 {
            let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-dasharray="4 3"/>"#, refs.join(" "));
        }
        for p in &pts {
            let (x, y) = (px(p.x), py(transform(p.y)));
            if !log_log && p.err.is_finite() && p.err > 0.0 {
                let (lo, hi) = (py(p.y - 1.96 * p.err), py(p.y + 1.96 * p.err));
                let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{lo:.2}" x2="{x:.2}" y2="{hi:.2}" stroke="{color}"/>"#);
            }
            let _ = writeln!(s, r#"<circle cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#);
        }
        if !ser.label.is_empty() {
            let ly = mt + 16.0 + 16.0 * i as f64;
            let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}" fill="{color}">{}</text>"#, ml + 10.0, escape(&ser.label));
        }
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
