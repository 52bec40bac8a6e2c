use crate::{
    CollapseArgs, EmpiricalArgs, Format, GammaArgs, Mode, NegativityArgs, SampleArgs, SchemeArgs, SliceArgs, SweepArgs,
    SweepFailure,
};
use anyhow::{Context, Result};
use oqcv::circuit::{collapse_fidelity_with_input, scheme_distribution};
use oqcv::heterodyne::{heterodyne_commensurability, heterodyne_gamma, oqcv_slice, q_support, GridSpec};
use oqcv::io::{self, RunManifest};
use oqcv::negativity::{negativity_sweep, negativity_with};
use oqcv::quadrature::{integrate_2d, Rule1d};
use oqcv::sampling::{analytic_bin_average, empirical_oqcv, nsit_signature, sample_second_only, sample_sequential};
use oqcv::states::{amplitude_for_mean_photon, husimi_q, mean_photon, p_mixture_of};
use oqcv::{Binning, NegativityOptions, OqcvError, PhasePoint, SampleMode, State, StateFamily};
use serde::Serialize;
use serde_json::Value;
use std::f64::consts::SQRT_2;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub struct Ctx {
    base: PathBuf,
    start: Instant,
}

impl Ctx {
    pub fn new(base: PathBuf) -> Self {
        Ctx { base, start: Instant::now() }
    }

    /// Relative paths resolve against the config file's directory.
    fn path(&self, p: &Path) -> Result<PathBuf> {
        Ok(std::path::absolute(self.base.join(p))?)
    }

    fn state(&self, spec: &str) -> Result<State> {
        Ok(State::parse_spec_in(spec, &self.base)?)
    }
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    OqcvError::Invalid(msg.into()).into()
}

fn point(s: &str) -> Result<PhasePoint> {
    Ok(s.parse::<PhasePoint>()?)
}

fn grid_dims(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| invalid(format!("grid must look like 101x101, got '{s}'")))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| invalid(format!("bad grid size '{s}'")));
    Ok((parse(a)?, parse(b)?))
}

fn format_for(out: &Path, f: Option<Format>) -> Format {
    f.unwrap_or(match out.extension().and_then(|e| e.to_str()) {
        Some("json") => Format::Json,
        _ => Format::Csv,
    })
}

pub fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

/// Everything needed to regenerate one output.
struct Run {
    command: &'static str,
    inputs: Value,
}

impl Run {
    fn new(command: &'static str, args: &impl Serialize) -> Result<Self> {
        Ok(Run { command, inputs: serde_json::to_value(args)? })
    }

    fn csv_meta(&self) -> Vec<String> {
        vec![format!("command={}", self.command), format!("inputs={}", self.inputs)]
    }

    fn write_json<T: Serialize>(&self, path: &Path, result: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Envelope<'a, T> {
            oqcv_version: &'a str,
            command: &'a str,
            inputs: &'a Value,
            result: &'a T,
        }
        let e = Envelope { oqcv_version: env!("CARGO_PKG_VERSION"), command: self.command, inputs: &self.inputs, result };
        io::write_json(path, &e)?;
        Ok(())
    }

    fn finish(self, ctx: &Ctx, outputs: &[&Path]) -> Result<()> {
        let Some(first) = outputs.first() else { return Ok(()) };
        let mut m = RunManifest::new(self.command, self.inputs);
        m.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
        m.wall_time_seconds = ctx.start.elapsed().as_secs_f64();
        let mp = manifest_path(first);
        m.write(&mp)?;
        eprintln!("wrote {} (manifest {})", m.outputs.join(", "), mp.display());
        Ok(())
    }
}

pub fn slice(ctx: &Ctx, mut a: SliceArgs) -> Result<()> {
    let st = ctx.state(&a.state)?;
    let alpha = point(&a.alpha)?;
    let center = point(&a.center)?;
    let (n_re, n_im) = grid_dims(&a.grid)?;
    let half = a.extent.unwrap_or_else(|| mean_photon(&st).sqrt() + 6.0);
    if !(half > 0.0 && half.is_finite()) {
        return Err(invalid(format!("extent must be positive, got {half}")));
    }
    let grid = GridSpec {
        re: (center.re - half, center.re + half),
        im: (center.im - half, center.im + half),
        n_re,
        n_im,
    };
    a.state = st.to_string();
    a.extent = Some(half);
    a.out = ctx.path(&a.out)?;
    let run = Run::new("slice", &a)?;
    let s = oqcv_slice(&st, alpha, grid)?;
    match format_for(&a.out, a.format) {
        Format::Csv => io::write_slice_csv(&a.out, &s, &run.csv_meta())?,
        Format::Json => run.write_json(&a.out, &s)?,
    }
    println!("min {:.6e} max {:.6e} argmax {}", s.min(), s.max(), s.argmax());
    run.finish(ctx, &[&a.out])
}

#[derive(Serialize)]
struct NegativityRow<'a> {
    state: &'a str,
    nbar: f64,
    negativity: f64,
    error: f64,
    nodes: usize,
    #[serde(rename = "L")]
    domain: f64,
    seconds: f64,
}

pub fn negativity(ctx: &Ctx, mut a: NegativityArgs) -> Result<()> {
    let st = ctx.state(&a.state)?;
    let mut opts = NegativityOptions::with_tolerance(a.tol);
    opts.force_full = a.full;
    if let Some(m) = a.max_nodes {
        opts.max_nodes_4d = m;
        opts.max_nodes_3d = m;
    }
    a.state = st.to_string();
    if let Some(out) = &a.out {
        a.out = Some(ctx.path(out)?);
    }
    let run = Run::new("negativity", &a)?;
    let r = negativity_with(&st, &opts)?;
    println!(
        "N = {:.6} ± {:.1e}  ({}, {} nodes/axis, {:?} layout, {:.2} s)",
        r.value, r.error_estimate, r.state, r.nodes_per_axis, r.symmetry_reduction, r.wall_time
    );
    let Some(out) = &a.out else { return Ok(()) };
    match format_for(out, a.format) {
        Format::Csv => {
            let row = NegativityRow {
                state: &r.state,
                nbar: r.nbar,
                negativity: r.value,
                error: r.error_estimate,
                nodes: r.nodes_per_axis,
                domain: r.domain_radius,
                seconds: r.wall_time,
            };
            io::write_table_csv(out, &["state", "nbar", "negativity", "error", "nodes", "L", "seconds"], &[row], &run.csv_meta())?
        }
        Format::Json => run.write_json(out, &r)?,
    }
    run.finish(ctx, &[out])
}

pub fn sweep(ctx: &Ctx, mut a: SweepArgs) -> Result<()> {
    let family: StateFamily = a.family.parse()?;
    // infeasible points are input errors, not sweep failures
    for &nbar in &a.nbars {
        if !(nbar == 0.0 && family != StateFamily::CatMinus) {
            amplitude_for_mean_photon(family, nbar)?;
        }
    }
    let mut opts = NegativityOptions::with_tolerance(a.tol);
    opts.force_full = a.full;
    a.family = family.name().to_string();
    if let Some(out) = &a.out {
        a.out = Some(ctx.path(out)?);
    }
    let run = Run::new("sweep", &a)?;
    let table = negativity_sweep(family, &a.nbars, &opts)?;
    for row in &table.rows {
        match (&row.result, &row.error) {
            (Some(r), _) => println!("nbar {:<8} N = {:.6} ± {:.1e}", row.nbar, r.value, r.error_estimate),
            (None, e) => println!("nbar {:<8} failed: {}", row.nbar, e.as_deref().unwrap_or("unknown")),
        }
    }
    if let Some(out) = &a.out {
        match format_for(out, a.format) {
            Format::Csv => io::write_sweep_csv(out, &table, &run.csv_meta())?,
            Format::Json => run.write_json(out, &table)?,
        }
        run.finish(ctx, &[out])?;
    }
    if !table.all_ok() {
        let failed: Vec<String> = table
            .rows
            .iter()
            .filter_map(|r| r.error.as_ref().map(|e| format!("nbar {}: {e}", r.nbar)))
            .collect();
        return Err(SweepFailure(failed.join("; ")).into());
    }
    Ok(())
}

pub fn sample(ctx: &Ctx, mut a: SampleArgs) -> Result<()> {
    let st = ctx.state(&a.state)?;
    a.state = st.to_string();
    a.out = ctx.path(&a.out)?;
    let run = Run::new("sample", &a)?;
    let b = match a.mode {
        Mode::Sequential => sample_sequential(&st, a.count, a.seed)?,
        Mode::SecondOnly => sample_second_only(&st, a.count, a.seed)?,
    };
    io::write_batch(&a.out, &b)?;
    println!("{} {:?} samples of {} (seed {}, acceptance {:.3})", b.count, b.mode, b.state, b.seed, b.acceptance());
    let sidecar = io::sidecar_path(&a.out);
    run.finish(ctx, &[&a.out, &sidecar])
}

#[derive(Serialize)]
struct Cell {
    alpha: PhasePoint,
    beta: PhasePoint,
    w: f64,
    stderr: f64,
    count: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    w_analytic: Option<f64>,
}

#[derive(Serialize)]
struct Histogram {
    binning: Binning,
    sequential_count: usize,
    second_only_count: usize,
    mean_stderr: f64,
    nsit_z: f64,
    total_variation: Option<f64>,
    cells: Vec<Cell>,
}

pub fn empirical(ctx: &Ctx, mut a: EmpiricalArgs) -> Result<()> {
    a.sequential = ctx.path(&a.sequential)?;
    a.second_only = ctx.path(&a.second_only)?;
    a.out = ctx.path(&a.out)?;
    let seq = io::read_batch(&a.sequential).with_context(|| format!("reading {}", a.sequential.display()))?;
    let m2 = io::read_batch(&a.second_only).with_context(|| format!("reading {}", a.second_only.display()))?;
    if seq.mode != SampleMode::Sequential || m2.mode != SampleMode::SecondOnly {
        return Err(invalid("--sequential needs a sequential batch and --second-only a second-only batch"));
    }
    if seq.state != m2.state {
        return Err(invalid(format!("batches are of different states: {} and {}", seq.state, m2.state)));
    }
    let st = State::parse_spec(&seq.state)?;
    let mut binning = Binning::for_state(&st);
    binning.bins = a.bins.unwrap_or(binning.bins);
    binning.width = a.width.unwrap_or(binning.width);
    if let Some(c) = &a.center {
        binning.center = point(c)?;
    }
    a.bins = Some(binning.bins);
    a.width = Some(binning.width);
    a.center = Some(binning.center.to_string());
    let run = Run::new("empirical-w", &a)?;
    let w = empirical_oqcv(&seq, &m2, binning)?;
    let chi = nsit_signature(&seq, &m2, binning)?;
    let analytic = if a.analytic { Some(analytic_bin_average(&st, binning)?) } else { None };
    let tv = analytic.as_deref().map(|an| w.total_variation(an));
    println!(
        "{} sequential, {} second-only; mean stderr {:.3e}; signaling z = {:.2}{}",
        w.sequential_count,
        w.second_only_count,
        w.mean_stderr(),
        chi.z,
        tv.map(|t| format!("; TV to exact {t:.4}")).unwrap_or_default()
    );
    match format_for(&a.out, a.format) {
        Format::Csv => io::write_histogram_csv(&a.out, &w, analytic.as_deref(), &run.csv_meta())?,
        Format::Json => {
            let b = binning.bins;
            let b2 = b * b;
            let cells = (0..b2 * b2)
                .filter(|&k| w.counts_joint[k] > 0)
                .map(|k| Cell {
                    alpha: binning.bin_center(k / b2 / b, (k / b2) % b),
                    beta: binning.bin_center((k % b2) / b, k % b),
                    w: w.values[k],
                    stderr: w.stderr[k],
                    count: w.counts_joint[k],
                    w_analytic: analytic.as_ref().map(|an| an[k]),
                })
                .collect();
            let h = Histogram {
                binning,
                sequential_count: w.sequential_count,
                second_only_count: w.second_only_count,
                mean_stderr: w.mean_stderr(),
                nsit_z: chi.z,
                total_variation: tv,
                cells,
            };
            run.write_json(&a.out, &h)?
        }
    }
    run.finish(ctx, &[&a.out])
}

#[derive(Serialize)]
struct SchemeRow {
    x: f64,
    p: f64,
    scheme: f64,
    two_q: f64,
    abs_diff: f64,
}

#[derive(Serialize)]
struct SchemeReport {
    max_abs_diff: f64,
    normalization: f64,
    rows: Vec<SchemeRow>,
}

pub fn scheme_check(ctx: &Ctx, mut a: SchemeArgs) -> Result<()> {
    let st = ctx.state(&a.state)?;
    let mix = p_mixture_of(&st)?;
    let (nx, np) = grid_dims(&a.grid)?;
    if nx < 2 || np < 2 || !(a.extent > 0.0) {
        return Err(invalid("scheme grid needs at least 2x2 points and a positive extent"));
    }
    a.state = st.to_string();
    if let Some(out) = &a.out {
        a.out = Some(ctx.path(out)?);
    }
    let run = Run::new("scheme-check", &a)?;
    let mut rows = Vec::with_capacity(nx * np);
    for i in 0..nx {
        for j in 0..np {
            let x = -a.extent + 2.0 * a.extent * i as f64 / (nx - 1) as f64;
            let p = -a.extent + 2.0 * a.extent * j as f64 / (np - 1) as f64;
            let scheme = scheme_distribution(&mix, x, p)?;
            let two_q = 2.0 * husimi_q(&st, PhasePoint::new(SQRT_2 * x, SQRT_2 * p));
            rows.push(SchemeRow { x, p, scheme, two_q, abs_diff: (scheme - two_q).abs() });
        }
    }
    let max_abs_diff = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    // the readings are Q's arguments scaled by 1/√2
    let b = q_support(&st);
    let rx = Rule1d::composite(b.re.0 / SQRT_2, b.re.1 / SQRT_2, 16, 10);
    let ry = Rule1d::composite(b.im.0 / SQRT_2, b.im.1 / SQRT_2, 16, 10);
    // the mixture was validated by the grid pass above
    let normalization = integrate_2d(&rx, &ry, |x, p| scheme_distribution(&mix, x, p).unwrap_or(f64::NAN));
    println!("max |P(x,p) - 2Q(√2 x, √2 p)| = {max_abs_diff:.3e}; ∫P = {normalization:.10}");
    let Some(out) = &a.out else { return Ok(()) };
    match format_for(out, a.format) {
        Format::Csv => io::write_table_csv(out, &["x", "p", "scheme", "two_q", "abs_diff"], &rows, &run.csv_meta())?,
        Format::Json => run.write_json(out, &SchemeReport { max_abs_diff, normalization, rows })?,
    }
    run.finish(ctx, &[out])
}

#[derive(Serialize)]
struct CollapseRow {
    db: f64,
    fidelity: f64,
}

pub fn collapse_curve(ctx: &Ctx, mut a: CollapseArgs) -> Result<()> {
    let input = point(&a.input)?;
    a.input = input.to_string();
    if let Some(out) = &a.out {
        a.out = Some(ctx.path(out)?);
    }
    let run = Run::new("collapse-curve", &a)?;
    let rows: Vec<CollapseRow> = a
        .db
        .iter()
        .map(|&db| Ok(CollapseRow { db, fidelity: collapse_fidelity_with_input(input, a.x, a.p, db)? }))
        .collect::<Result<_>>()?;
    for r in &rows {
        println!("{:>8} dB  F = {:.12}", r.db, r.fidelity);
    }
    let Some(out) = &a.out else { return Ok(()) };
    match format_for(out, a.format) {
        Format::Csv => io::write_table_csv(out, &["db", "fidelity"], &rows, &run.csv_meta())?,
        Format::Json => run.write_json(out, &rows)?,
    }
    run.finish(ctx, &[out])
}

#[derive(Serialize)]
struct GammaEntry {
    p: usize,
    q: usize,
    r: usize,
    s: usize,
    gamma: f64,
}

pub fn gamma(ctx: &Ctx, mut a: GammaArgs) -> Result<()> {
    let st = ctx.state(&a.state)?;
    if a.nodes < 8 {
        return Err(invalid("--nodes must be at least 8"));
    }
    a.state = st.to_string();
    a.out = ctx.path(&a.out)?;
    let run = Run::new("gamma", &a)?;
    let g = heterodyne_gamma(&st, a.degree, a.nodes)?;
    let k = a.degree + 1;
    let entries: Vec<GammaEntry> = (0..k.pow(4))
        .map(|i| {
            let (p, q, r, s) = (i / (k * k * k), (i / (k * k)) % k, (i / k) % k, i % k);
            GammaEntry { p, q, r, s, gamma: g.get(p, q, r, s) }
        })
        .collect();
    let check = if a.check { Some(heterodyne_commensurability(&st, &g, a.nodes)?) } else { None };
    println!("degree {} ({} entries)", a.degree, entries.len());
    if let Some(c) = &check {
        println!("direct moments: max relative error {:.3e} at {:?}, ∫W = {:.10}", c.max_relative_error, c.worst, c.integral);
    }
    match format_for(&a.out, a.format) {
        Format::Csv => {
            let mut meta = run.csv_meta();
            meta.push(format!("degree={}", a.degree));
            if let Some(c) = &check {
                meta.push(format!("check max_relative_error={} integral={}", c.max_relative_error, c.integral));
            }
            io::write_table_csv(&a.out, &["p", "q", "r", "s", "gamma"], &entries, &meta)?
        }
        Format::Json => {
            #[derive(Serialize)]
            struct GammaFile<'a> {
                state: &'a str,
                degree: usize,
                entries: &'a [GammaEntry],
                commensurability: Option<oqcv::heterodyne::HeterodyneCommensurability>,
            }
            run.write_json(&a.out, &GammaFile { state: &a.state, degree: a.degree, entries: &entries, commensurability: check })?
        }
    }
    run.finish(ctx, &[&a.out])
}
