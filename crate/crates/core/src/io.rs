//! CSV and JSON writers for run outputs.
//!
//! CSV files open with `#` comment lines carrying the run parameters and
//! are read back with `#` treated as a comment marker.

use crate::error::{OqcvError, Result};
use crate::heterodyne::OqcvSlice;
use crate::negativity::SweepTable;
use crate::sampling::{EmpiricalW, SampleBatch, SampleMode};
use crate::states::PhasePoint;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

fn csv_err(e: csv::Error) -> OqcvError {
    if e.is_io_error() {
        OqcvError::Io(e.to_string())
    } else {
        OqcvError::Serde(e.to_string())
    }
}

fn open_with_comments(path: &Path, comments: &[String], extra: &[String]) -> Result<csv::Writer<BufWriter<File>>> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "# oqcv {}", env!("CARGO_PKG_VERSION"))?;
    for c in comments.iter().chain(extra) {
        writeln!(f, "# {c}")?;
    }
    Ok(csv::WriterBuilder::new().has_headers(false).from_writer(f))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, value)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let f = std::io::BufReader::new(File::open(path)?);
    Ok(serde_json::from_reader(f)?)
}

/// `beta_re,beta_im,w_value`, real axis outermost.
pub fn write_slice_csv(path: &Path, slice: &OqcvSlice, extra: &[String]) -> Result<()> {
    let g = slice.grid;
    let mut w = open_with_comments(
        path,
        &[
            format!("state={}", slice.state),
            format!("alpha={}", slice.fixed_alpha),
            format!("grid re=[{},{}] im=[{},{}] n={}x{}", g.re.0, g.re.1, g.im.0, g.im.1, g.n_re, g.n_im),
        ],
        extra,
    )?;
    w.write_record(["beta_re", "beta_im", "w_value"]).map_err(csv_err)?;
    for (b, v) in slice.iter() {
        w.serialize((b.re, b.im, v)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Read back the three columns of a slice file.
pub fn read_slice_csv(path: &Path) -> Result<Vec<(PhasePoint, f64)>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(csv_err)?;
    r.deserialize::<(f64, f64, f64)>()
        .map(|row| row.map(|(a, b, v)| (PhasePoint::new(a, b), v)).map_err(csv_err))
        .collect()
}

/// `nbar,negativity,error,nodes,L,seconds`; failed rows are listed as trailing comments.
pub fn write_sweep_csv(path: &Path, table: &SweepTable, extra: &[String]) -> Result<()> {
    let mut w = open_with_comments(path, &[format!("family={}", table.family.name())], extra)?;
    w.write_record(["nbar", "negativity", "error", "nodes", "L", "seconds"]).map_err(csv_err)?;
    let mut failed = Vec::new();
    for row in &table.rows {
        match &row.result {
            Some(r) => w
                .serialize((row.nbar, r.value, r.error_estimate, r.nodes_per_axis, r.domain_radius, r.wall_time))
                .map_err(csv_err)?,
            None => failed.push(format!("failed nbar={}: {}", row.nbar, row.error.as_deref().unwrap_or("unknown"))),
        }
    }
    let mut f = w.into_inner().map_err(|e| OqcvError::from(e.into_error()))?;
    for c in failed {
        writeln!(f, "# {c}")?;
    }
    f.flush()?;
    Ok(())
}

/// Plain table with a header row and `#` metadata lines.
pub fn write_table_csv<R: Serialize>(path: &Path, header: &[&str], rows: &[R], extra: &[String]) -> Result<()> {
    let mut w = open_with_comments(path, &[], extra)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Parameters stored next to a batch's CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSidecar {
    pub seed: u64,
    pub count: usize,
    pub mode: SampleMode,
    pub state: String,
    pub proposals: u64,
    pub acceptance: f64,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

/// Sequential batches get `alpha_re,alpha_im,beta_re,beta_im`; second-only batches `beta_re,beta_im`.
pub fn write_batch(path: &Path, batch: &SampleBatch) -> Result<()> {
    let mut w = open_with_comments(
        path,
        &[format!("state={} seed={} mode={:?} count={}", batch.state, batch.seed, batch.mode, batch.count)],
        &[],
    )?;
    match batch.mode {
        SampleMode::Sequential => {
            w.write_record(["alpha_re", "alpha_im", "beta_re", "beta_im"]).map_err(csv_err)?;
            for (a, b) in batch.alphas.iter().zip(&batch.betas) {
                w.serialize((a.re, a.im, b.re, b.im)).map_err(csv_err)?;
            }
        }
        SampleMode::SecondOnly => {
            w.write_record(["beta_re", "beta_im"]).map_err(csv_err)?;
            for b in batch.second_outcomes() {
                w.serialize((b.re, b.im)).map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    write_json(
        &sidecar_path(path),
        &BatchSidecar {
            seed: batch.seed,
            count: batch.count,
            mode: batch.mode,
            state: batch.state.clone(),
            proposals: batch.proposals,
            acceptance: batch.acceptance(),
        },
    )
}

/// Rebuild a batch from its CSV and JSON sidecar.
pub fn read_batch(path: &Path) -> Result<SampleBatch> {
    let side: BatchSidecar = read_json(&sidecar_path(path))?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).map_err(csv_err)?;
    let (mut alphas, mut betas) = (Vec::with_capacity(side.count), Vec::new());
    match side.mode {
        SampleMode::Sequential => {
            betas.reserve(side.count);
            for row in r.deserialize::<(f64, f64, f64, f64)>() {
                let (ar, ai, br, bi) = row.map_err(csv_err)?;
                alphas.push(PhasePoint::new(ar, ai));
                betas.push(PhasePoint::new(br, bi));
            }
        }
        SampleMode::SecondOnly => {
            for row in r.deserialize::<(f64, f64)>() {
                let (br, bi) = row.map_err(csv_err)?;
                alphas.push(PhasePoint::new(br, bi));
            }
        }
    }
    if alphas.len() != side.count {
        return Err(OqcvError::invalid(format!("{}: {} rows, sidecar says {}", path.display(), alphas.len(), side.count)));
    }
    Ok(SampleBatch {
        seed: side.seed,
        count: side.count,
        mode: side.mode,
        state: side.state,
        alphas,
        betas,
        proposals: side.proposals,
    })
}

/// One row per 4D cell with any sequential count, plus the analytic bin average when given.
pub fn write_histogram_csv(path: &Path, w: &EmpiricalW, analytic: Option<&[f64]>, extra: &[String]) -> Result<()> {
    let b = w.binning.bins;
    let b2 = b * b;
    let mut out = open_with_comments(
        path,
        &[format!(
            "bins={} width={} center={} sequential={} second_only={}",
            b, w.binning.width, w.binning.center, w.sequential_count, w.second_only_count
        )],
        extra,
    )?;
    let mut header = vec!["alpha_re", "alpha_im", "beta_re", "beta_im", "w_value", "stderr", "count"];
    if analytic.is_some() {
        header.push("w_analytic");
    }
    out.write_record(&header).map_err(csv_err)?;
    for a in 0..b2 {
        let ca = w.binning.bin_center(a / b, a % b);
        for ib in 0..b2 {
            let k = a * b2 + ib;
            if w.counts_joint[k] == 0 {
                continue;
            }
            let cb = w.binning.bin_center(ib / b, ib % b);
            let mut rec = vec![
                ca.re.to_string(),
                ca.im.to_string(),
                cb.re.to_string(),
                cb.im.to_string(),
                w.values[k].to_string(),
                w.stderr[k].to_string(),
                w.counts_joint[k].to_string(),
            ];
            if let Some(an) = analytic {
                rec.push(an[k].to_string());
            }
            out.write_record(&rec).map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Provenance written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub inputs: serde_json::Value,
    pub outputs: Vec<String>,
    pub threads: usize,
    pub wall_time_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, inputs: serde_json::Value) -> Self {
        RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs,
            outputs: Vec::new(),
            threads: rayon::current_num_threads(),
            wall_time_seconds: 0.0,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}
