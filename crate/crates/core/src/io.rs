//! File formats: edge lists, design and response CSVs, result tables, JSON
//! and a small SVG line plot.
//!
//! Numbers written to CSV carry 17 significant digits so that parsing them
//! back gives the same doubles.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::cv::CvResult;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;
use crate::path::PathResult;
use crate::simbench::{BenchmarkTable, RocCurve};
use crate::solver::FitResult;

/// Scientific notation with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn parse_f64(cell: &str, line: usize, column: usize) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        column,
        message: format!("not a number: {:?}", cell.trim()),
    })
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?
        .read_to_string(&mut s)?;
    Ok(s)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
    ))
}

/// `u<TAB>v[<TAB>weight]` per line, 0-based ids, weight 1 when omitted;
/// blank lines and lines starting with `#` are skipped.
pub fn parse_edge_list(text: &str, p: usize) -> Result<WeightedGraph> {
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::Parse {
                line,
                column: 1,
                message: format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let vertex = |k: usize| {
            fields[k].parse::<usize>().map_err(|_| Error::Parse {
                line,
                column: k + 1,
                message: format!("not a vertex id: {:?}", fields[k]),
            })
        };
        let weight = match fields.get(2) {
            Some(w) => parse_f64(w, line, 3)?,
            None => 1.0,
        };
        edges.push((vertex(0)?, vertex(1)?, weight));
    }
    WeightedGraph::new(p, &edges)
}

pub fn read_edge_list(path: &Path, p: usize) -> Result<WeightedGraph> {
    parse_edge_list(&read_to_string(path)?, p)
}

pub fn write_edge_list(w: impl Write, g: &WeightedGraph) -> Result<()> {
    let mut w = w;
    writeln!(w, "# u\tv\tweight")?;
    for e in g.edges() {
        writeln!(w, "{}\t{}\t{}", e.u, e.v, format_f64(e.weight))?;
    }
    Ok(())
}

fn csv_reader(r: impl Read) -> csv::Reader<impl Read> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(r)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}

/// Header row of covariate names, then one numeric row per sample.
pub fn parse_design(r: impl Read) -> Result<(DMatrix<f64>, Vec<String>)> {
    let mut records = csv_reader(r).into_records();
    let header = match records.next() {
        Some(rec) => rec.map_err(csv_error)?,
        None => return Err(Error::NoSamples("design file is empty".into())),
    };
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    let p = names.len();
    let mut values = Vec::new();
    let mut n = 0;
    for rec in records {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(n + 2, |pos| pos.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != p {
            return Err(Error::Parse {
                line,
                column: rec.len().min(p) + 1,
                message: format!("expected {p} fields, found {}", rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            values.push(parse_f64(cell, line, j + 1)?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoSamples("design file has a header but no rows".into()));
    }
    Ok((DMatrix::from_row_slice(n, p, &values), names))
}

/// One numeric column; a first row that is not a number is taken as a header.
pub fn parse_response(r: impl Read) -> Result<DVector<f64>> {
    let mut values = Vec::new();
    for (i, rec) in csv_reader(r).into_records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(i + 1, |pos| pos.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != 1 {
            return Err(Error::Parse {
                line,
                column: 2,
                message: format!("response must have one column, found {}", rec.len()),
            });
        }
        match parse_f64(&rec[0], line, 1) {
            Ok(v) => values.push(v),
            Err(_) if i == 0 => {}
            Err(e) => return Err(e),
        }
    }
    if values.is_empty() {
        return Err(Error::NoSamples("response file has no values".into()));
    }
    Ok(DVector::from_vec(values))
}

/// Raw dataset with covariate names from the design header.
pub fn read_dataset(design: &Path, response: &Path) -> Result<Dataset> {
    let (x, names) = parse_design(BufReader::new(File::open(design).map_err(|e| {
        Error::Io(format!("{}: {e}", design.display()))
    })?))?;
    let y = parse_response(BufReader::new(File::open(response).map_err(|e| {
        Error::Io(format!("{}: {e}", response.display()))
    })?))?;
    if y.len() != x.nrows() {
        return Err(Error::DimensionMismatch {
            what: "response rows",
            expected: x.nrows(),
            found: y.len(),
        });
    }
    Dataset::new(x, y)?.with_names(names)
}

fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn csv_writer(w: impl Write) -> csv::Writer<impl Write> {
    csv::WriterBuilder::new().from_writer(w)
}

fn flush<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::Io(e.to_string()))?
        .flush()?;
    Ok(())
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_design(w: impl Write, x: &DMatrix<f64>, names: Option<&[String]>) -> Result<()> {
    let mut out = csv_writer(w);
    let names = names.map_or_else(|| default_names(x.ncols()), <[String]>::to_vec);
    out.write_record(&names).map_err(io_err)?;
    for i in 0..x.nrows() {
        out.write_record(x.row(i).iter().map(|&v| format_f64(v))).map_err(io_err)?;
    }
    flush(out)
}

pub fn write_response(w: impl Write, y: &DVector<f64>) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["y"]).map_err(io_err)?;
    for &v in y.iter() {
        out.write_record([format_f64(v)]).map_err(io_err)?;
    }
    flush(out)
}

/// Standardized and original-scale coefficients, intercept in the last row.
pub fn write_coefficients(w: impl Write, fit: &FitResult, names: Option<&[String]>) -> Result<()> {
    let mut out = csv_writer(w);
    let names = names.map_or_else(|| default_names(fit.beta.len()), <[String]>::to_vec);
    out.write_record(["name", "beta_standardized", "beta_original"]).map_err(io_err)?;
    for (j, name) in names.iter().enumerate() {
        out.write_record([name.clone(), format_f64(fit.beta[j]), format_f64(fit.beta_original[j])])
            .map_err(io_err)?;
    }
    out.write_record(["(intercept)".to_string(), String::new(), format_f64(fit.intercept)])
        .map_err(io_err)?;
    flush(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

/// One row per grid point with both penalty forms and every coefficient
/// on the original scale.
pub fn write_path(w: impl Write, path: &PathResult, names: Option<&[String]>) -> Result<()> {
    let mut out = csv_writer(w);
    let p = path.fits.first().map_or(0, |f| f.beta.len());
    let names = names.map_or_else(|| default_names(p), <[String]>::to_vec);
    let mut header: Vec<String> = [
        "point", "lambda1", "lambda2", "lambda", "alpha", "active", "objective", "kkt_residual",
        "converged", "intercept",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(names);
    out.write_record(&header).map_err(io_err)?;
    for (k, fit) in path.fits.iter().enumerate() {
        let mut row = vec![
            k.to_string(),
            format_f64(fit.lambda1),
            format_f64(fit.lambda2),
            opt(fit.lambda),
            opt(fit.alpha),
            fit.active_set.len().to_string(),
            format_f64(fit.objective),
            format_f64(fit.kkt_residual),
            fit.converged.to_string(),
            format_f64(fit.intercept),
        ];
        row.extend(fit.beta_original.iter().map(|&b| format_f64(b)));
        out.write_record(&row).map_err(io_err)?;
    }
    flush(out)
}

pub fn write_cv(w: impl Write, cv: &CvResult) -> Result<()> {
    let mut out = csv_writer(w);
    let mut header: Vec<String> = ["point", "lambda1", "lambda2", "lambda", "alpha", "mean_error", "se", "best"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..cv.folds).map(|f| format!("fold_{f}")));
    out.write_record(&header).map_err(io_err)?;
    for (k, pt) in cv.points.iter().enumerate() {
        let mut row = vec![
            k.to_string(),
            format_f64(pt.lambda1),
            format_f64(pt.lambda2),
            opt(pt.lambda),
            opt(pt.alpha),
            format_f64(pt.mean_error),
            format_f64(pt.se),
            (k == cv.best).to_string(),
        ];
        row.extend(pt.fold_errors.iter().map(|&e| format_f64(e)));
        out.write_record(&row).map_err(io_err)?;
    }
    flush(out)
}

/// Long format: one row per method, model and correlation.
pub fn write_benchmark(w: impl Write, table: &BenchmarkTable) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "method", "model", "correlation", "mean_mse", "se_mse", "mean_auc", "se_auc", "replicates", "failures",
    ])
    .map_err(io_err)?;
    for r in &table.rows {
        out.write_record([
            r.method.name().to_string(),
            r.model.number().to_string(),
            format_f64(r.correlation),
            format_f64(r.mean_mse),
            format_f64(r.se_mse),
            format_f64(r.mean_auc),
            format_f64(r.se_auc),
            r.replicates.to_string(),
            r.failures.to_string(),
        ])
        .map_err(io_err)?;
    }
    flush(out)
}

pub fn write_roc(w: impl Write, curve: &RocCurve) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["fpr", "tpr", "lambda"]).map_err(io_err)?;
    for pt in &curve.points {
        out.write_record([format_f64(pt.fpr), format_f64(pt.tpr), format_f64(pt.lambda)])
            .map_err(io_err)?;
    }
    flush(out)
}

pub fn write_json(w: impl Write, value: &impl Serialize) -> Result<()> {
    let mut w = w;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Opens `path` for writing (creating parent directories) and runs `f`.
pub fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Polylines on shared axes with a legend.
pub fn svg_line_plot(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 480.0, 60.0);
    let all = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all.filter(|(x, y)| x.is_finite() && y.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0 < x1) {
        (x0, x1) = if x0.is_finite() { (x0 - 0.5, x0 + 0.5) } else { (0.0, 1.0) };
    }
    if !(y0 < y1) {
        (y0, y1) = if y0.is_finite() { (y0 - 0.5, y0 + 0.5) } else { (0.0, 1.0) };
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#,
        h - m,
        w - m,
        h - m,
        h - m
    );
    for k in 0..=4 {
        let t = k as f64 / 4.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle" font-size="11">{}</text>"#, sx(xv), h - m + 16.0, tick(xv));
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end" font-size="11">{}</text>"#, m - 6.0, sy(yv) + 4.0, tick(yv));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle" font-size="13">{}</text>"#, w / 2.0, h - 16.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" font-size="13" transform="rotate(-90 16 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    );
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        let ly = m + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}" font-size="12">{}</text>"#,
            w - m - 110.0,
            w - m - 90.0,
            w - m - 84.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{:.3}", v).trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
