//! Legacy VTK snapshots and CSV series. Floats are written in shortest
//! round-trip form, so identical inputs give identical bytes.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use hotspot_core::abm::AbmTotals;
use hotspot_core::analysis::FitResult;
use hotspot_core::pde::StepRecord;
use hotspot_core::Mesh;

use crate::error::{CliError, Result};

/// Legacy ASCII unstructured grid with one scalar per named point field.
pub fn format_vtk(mesh: &Mesh, fields: &[(&str, &[f64])], title: &str) -> Result<String> {
    let n = mesh.node_count();
    for (name, values) in fields {
        if values.len() != n {
            return Err(CliError::Other(format!(
                "field {name} has {} values for {n} nodes",
                values.len()
            )));
        }
    }
    let mut s = String::with_capacity(64 * n);
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{title}");
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {n} double");
    for [x, y] in mesh.nodes() {
        let _ = writeln!(s, "{x} {y} 0");
    }
    let m = mesh.quad_count();
    let _ = writeln!(s, "CELLS {m} {}", 5 * m);
    for [a, b, c, d] in mesh.quads() {
        let _ = writeln!(s, "4 {a} {b} {c} {d}");
    }
    let _ = writeln!(s, "CELL_TYPES {m}");
    for _ in 0..m {
        let _ = writeln!(s, "9");
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {n}");
    }
    for (name, values) in fields {
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for v in values.iter() {
            let _ = writeln!(s, "{v}");
        }
    }
    Ok(s)
}

pub fn write_vtk(path: &Path, mesh: &Mesh, fields: &[(&str, &[f64])], title: &str) -> Result<()> {
    let text = format_vtk(mesh, fields, title)?;
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Row-by-row CSV writer with a header taken from the record type.
pub struct CsvSink<R> {
    path: std::path::PathBuf,
    writer: csv::Writer<BufWriter<File>>,
    _record: std::marker::PhantomData<R>,
}

impl<R: Serialize> CsvSink<R> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| CliError::io(path, e))?;
        Ok(CsvSink {
            path: path.to_path_buf(),
            writer: csv::Writer::from_writer(BufWriter::new(file)),
            _record: std::marker::PhantomData,
        })
    }

    pub fn push(&mut self, record: &R) -> Result<()> {
        self.writer.serialize(record).map_err(|e| self.csv_error(e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))
    }

    fn csv_error(&self, e: csv::Error) -> CliError {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(&self.path, io),
            other => CliError::Other(format!("{}: {other:?}", self.path.display())),
        }
    }
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<()> {
    let mut sink = CsvSink::create(path)?;
    for r in rows {
        sink.push(r)?;
    }
    sink.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatsRow {
    pub step: usize,
    pub time: f64,
    pub iters: usize,
    #[serde(rename = "incr_A")]
    pub incr_a: f64,
    pub incr_rho: f64,
    #[serde(rename = "min_A")]
    pub min_a: f64,
    #[serde(rename = "max_A")]
    pub max_a: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    pub linear_iters_1: usize,
    pub linear_iters_2: usize,
}

impl From<&StepRecord> for StatsRow {
    fn from(r: &StepRecord) -> Self {
        StatsRow {
            step: r.step,
            time: r.time,
            iters: r.iters,
            incr_a: r.incr_a,
            incr_rho: r.incr_rho,
            min_a: r.min_a,
            max_a: r.max_a,
            min_rho: r.min_rho,
            max_rho: r.max_rho,
            linear_iters_1: r.linear_iters_1,
            linear_iters_2: r.linear_iters_2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AbmRow {
    pub step: usize,
    pub time: f64,
    pub total_n: f64,
    pub total_burglaries: f64,
    #[serde(rename = "mean_B")]
    pub mean_b: f64,
}

impl From<&AbmTotals> for AbmRow {
    fn from(t: &AbmTotals) -> Self {
        AbmRow {
            step: t.step,
            time: t.time,
            total_n: t.total_n,
            total_burglaries: t.total_burglaries,
            mean_b: t.mean_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub eta: f64,
    pub count: usize,
    pub mean_diameter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HotspotRow {
    pub time: f64,
    pub count: usize,
    pub mean_diameter: f64,
}

pub fn format_fit(label: &str, fit: &FitResult) -> String {
    let k = &fit.coefficients;
    let formula = match fit.model {
        hotspot_core::analysis::FitModel::Exponential => {
            format!("{} * exp({} * x) + {}", k[0], k[1], k[2])
        }
        hotspot_core::analysis::FitModel::Quadratic => {
            format!("{} * x^2 + {} * x + {}", k[0], k[1], k[2])
        }
    };
    let mut s = format!(
        "{label}: {formula}\n  residual_norm = {}\n",
        fit.residual_norm
    );
    if fit.degenerate {
        s.push_str("  degenerate: no trend in the data\n");
    }
    s
}
