//! On-disk formats: scan orders (JSON, CSV, SVG), patch grids (JSON),
//! locality reports (CSV, JSON) and kernel dumps (CSV).

use std::fmt::Write as _;

use fractscan_core::block::PatchGrid;
use fractscan_core::curves::{CellCoord, CurveKind, CurveSpec, GridShape, ScanOrder};
use fractscan_core::metrics::LocalityReport;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown curve kind {0:?}")]
    UnknownKind(String),
    #[error(transparent)]
    Invalid(#[from] fractscan_core::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OrderFormat {
    Json,
    Csv,
    Svg,
}

#[derive(Serialize, Deserialize)]
struct OrderDoc {
    kind: String,
    rows: usize,
    cols: usize,
    direction: u8,
    shift: i64,
    forward: Vec<[usize; 2]>,
}

pub fn export_order(order: &ScanOrder, format: OrderFormat) -> Vec<u8> {
    match format {
        OrderFormat::Json => order_to_json(order).into_bytes(),
        OrderFormat::Csv => order_to_csv(order).into_bytes(),
        OrderFormat::Svg => order_to_svg(order).into_bytes(),
    }
}

pub fn order_to_json(order: &ScanOrder) -> String {
    let spec = order.spec();
    let doc = OrderDoc {
        kind: spec.kind.name().to_owned(),
        rows: spec.shape.rows,
        cols: spec.shape.cols,
        direction: spec.direction,
        shift: spec.shift,
        forward: order.forward().iter().map(|c| [c.row, c.col]).collect(),
    };
    let mut out = serde_json::to_string(&doc).expect("plain data serialises");
    out.push('\n');
    out
}

/// Parses an order document and checks that it is a bijection on its grid.
pub fn order_from_json(text: &str) -> Result<ScanOrder, FormatError> {
    let doc: OrderDoc = serde_json::from_str(text)?;
    let kind: CurveKind = doc
        .kind
        .parse()
        .map_err(|_| FormatError::UnknownKind(doc.kind.clone()))?;
    let spec = CurveSpec::new(
        kind,
        GridShape::new(doc.rows, doc.cols)?,
        doc.direction,
        doc.shift,
    );
    spec.validate()?;
    let forward = doc
        .forward
        .iter()
        .map(|&[r, c]| CellCoord::new(r, c))
        .collect();
    Ok(ScanOrder::from_forward(spec, forward)?)
}

pub fn order_to_csv(order: &ScanOrder) -> String {
    let mut out = String::from("index,row,col\n");
    for (i, c) in order.forward().iter().enumerate() {
        writeln!(out, "{i},{},{}", c.row, c.col).unwrap();
    }
    out
}

/// One polyline through the cell centres, top-left origin, one unit per cell.
pub fn order_to_svg(order: &ScanOrder) -> String {
    let shape = order.shape();
    let points: Vec<String> = order
        .forward()
        .iter()
        .map(|c| format!("{},{}", c.col as f64 + 0.5, c.row as f64 + 0.5))
        .collect();
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {cols} {rows}" width="{w}" height="{h}">"#,
        cols = shape.cols,
        rows = shape.rows,
        w = shape.cols * 32,
        h = shape.rows * 32,
    )
    .unwrap();
    writeln!(
        out,
        r#"  <polyline fill="none" stroke="black" stroke-width="0.1" stroke-linejoin="round" points="{}"/>"#,
        points.join(" ")
    )
    .unwrap();
    out.push_str("</svg>\n");
    out
}

#[derive(Serialize, Deserialize)]
struct GridDoc {
    rows: usize,
    cols: usize,
    channels: usize,
    data: Vec<f64>,
}

pub fn grid_to_json(grid: &PatchGrid) -> String {
    let shape = grid.shape();
    let doc = GridDoc {
        rows: shape.rows,
        cols: shape.cols,
        channels: grid.channels(),
        data: grid.data().to_vec(),
    };
    let mut out = serde_json::to_string(&doc).expect("finite data serialises");
    out.push('\n');
    out
}

pub fn grid_from_json(text: &str) -> Result<PatchGrid, FormatError> {
    let doc: GridDoc = serde_json::from_str(text)?;
    Ok(PatchGrid::new(
        GridShape::new(doc.rows, doc.cols)?,
        doc.channels,
        doc.data,
    )?)
}

pub const REPORT_HEADER: &str =
    "kind,direction,shift,continuity,max_adj_gap,mean_adj_gap,gl_measure";

pub fn reports_to_csv(reports: &[LocalityReport]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.spec.kind,
            r.spec.direction,
            r.spec.shift,
            r.continuity_fraction,
            r.max_adj_gap,
            r.mean_adj_gap,
            r.gl_measure
        )
        .unwrap();
    }
    out
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    kind: &'a str,
    rows: usize,
    cols: usize,
    direction: u8,
    shift: i64,
    continuity_fraction: f64,
    max_adj_gap: usize,
    mean_adj_gap: f64,
    gl_measure: f64,
}

pub fn reports_to_json(reports: &[LocalityReport]) -> String {
    let docs: Vec<ReportDoc> = reports
        .iter()
        .map(|r| ReportDoc {
            kind: r.spec.kind.name(),
            rows: r.spec.shape.rows,
            cols: r.spec.shape.cols,
            direction: r.spec.direction,
            shift: r.spec.shift,
            continuity_fraction: r.continuity_fraction,
            max_adj_gap: r.max_adj_gap,
            mean_adj_gap: r.mean_adj_gap,
            gl_measure: r.gl_measure,
        })
        .collect();
    let mut out = serde_json::to_string_pretty(&docs).expect("plain data serialises");
    out.push('\n');
    out
}

/// Header `k0,k1,...` followed by one line of kernel values.
pub fn kernel_to_csv(kernel: &[f64]) -> String {
    let header: Vec<String> = (0..kernel.len()).map(|k| format!("k{k}")).collect();
    let values: Vec<String> = kernel.iter().map(|v| v.to_string()).collect();
    format!("{}\n{}\n", header.join(","), values.join(","))
}
