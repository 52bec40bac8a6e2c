//! Negativity `N = ∫ max(-W, 0)` over the four-dimensional outcome space.
//!
//! Where `W < 0` the correction `g(α)·S(β)` must outweigh the non-negative
//! joint, so `S(β) < 0` and `∫_{|α|>R} g < e^{-R²/2}` bound what lies
//! outside the integration box. The `α` box is therefore a fixed square
//! of half-width 6.5 and the `β` box is the support of `S`.
//!
//! Three integration layouts, chosen from the state's symmetry:
//!
//! * full 4D tensor product;
//! * reflection: conjugation-invariant states integrate `β_i ≥ 0` and double;
//! * azimuthal: phase-invariant states reduce to `(|α|, |β|, φ)` with
//!   Jacobian `2π|α||β|` and `φ ∈ [0, π]` doubled.
//!
//! Each axis uses composite 8-point Gauss–Legendre panels. Resolution
//! doubles until two successive estimates agree to the tolerance. Partial
//! sums are formed per `α_r` (or `|α|`) node and merged in index order, so
//! the result does not depend on the number of worker threads.

use crate::engine::SettingProbabilities;
use crate::error::{OqcvError, Result};
use crate::heterodyne::{marginal_after_first, marginal_support, oqcv_terms, signaling_weight, Rect};
use crate::quadrature::Rule1d;
use crate::states::{amplitude_for_mean_photon, husimi_q, ln_husimi_q, mean_photon, PhasePoint, State, StateFamily};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryReduction {
    None,
    Reflection,
    Azimuthal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativityOptions {
    /// Required agreement between successive resolutions.
    pub tolerance: f64,
    /// Nodes per axis at the first pass (rounded up to a multiple of 8).
    pub start_nodes: usize,
    /// Node cap for the 4D layouts.
    pub max_nodes_4d: usize,
    /// Node cap for the azimuthal layout.
    pub max_nodes_3d: usize,
    /// Half-width of the `α` square (radius in the azimuthal layout).
    pub alpha_half_width: f64,
    /// Use the full 4D layout whatever the symmetry.
    pub force_full: bool,
}

impl Default for NegativityOptions {
    fn default() -> Self {
        NegativityOptions {
            tolerance: 1e-3,
            start_nodes: 48,
            max_nodes_4d: 384,
            max_nodes_3d: 768,
            alpha_half_width: 6.5,
            force_full: false,
        }
    }
}

impl NegativityOptions {
    pub fn with_tolerance(tolerance: f64) -> Self {
        NegativityOptions { tolerance, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityResult {
    pub state: String,
    pub nbar: f64,
    pub value: f64,
    /// Difference between the last two resolutions.
    pub error_estimate: f64,
    /// Largest `|β|` coordinate covered.
    pub domain_radius: f64,
    pub alpha_half_width: f64,
    pub beta_box: Rect,
    pub nodes_per_axis: usize,
    pub symmetry_reduction: SymmetryReduction,
    pub wall_time: f64,
    /// `(nodes per axis, estimate)` for every pass.
    pub history: Vec<(usize, f64)>,
}

fn layout_for(state: &State, force_full: bool) -> SymmetryReduction {
    if force_full {
        SymmetryReduction::None
    } else if state.is_phase_symmetric() {
        SymmetryReduction::Azimuthal
    } else if state.is_conjugation_symmetric() {
        SymmetryReduction::Reflection
    } else {
        SymmetryReduction::None
    }
}

fn rule(a: f64, b: f64, nodes: usize) -> Rule1d {
    Rule1d::composite(a, b, nodes.div_ceil(8).max(1), 8)
}

/// `S(β) = Q(β) - P12(β)`.
fn bracket(state: &State, beta: PhasePoint) -> f64 {
    husimi_q(state, beta) - marginal_after_first(state, beta)
}

/// One 4D pass. With `reflect`, only `β_i ≥ 0` is integrated and doubled.
fn pass_4d(state: &State, alpha_half: f64, beta_box: Rect, nodes: usize, reflect: bool) -> f64 {
    let ar = rule(-alpha_half, alpha_half, nodes);
    let ai = ar.clone();
    let br = rule(beta_box.re.0, beta_box.re.1, nodes);
    let bi = if reflect {
        rule(0.0, beta_box.im.1, nodes / 2)
    } else {
        rule(beta_box.im.0, beta_box.im.1, nodes)
    };
    // negative-bracket β nodes grouped by β_r index: (β_i index, w_β, S)
    let rows: Vec<Vec<(usize, f64, f64)>> = br
        .iter()
        .map(|(x, wx)| {
            bi.iter()
                .enumerate()
                .filter_map(|(j, (y, wy))| {
                    let s = bracket(state, PhasePoint::new(x, y));
                    (s < 0.0).then_some((j, wx * wy, s))
                })
                .collect()
        })
        .collect();
    let table = |a: &Rule1d, b: &Rule1d| -> Vec<Vec<f64>> {
        a.nodes.iter().map(|&x| b.nodes.iter().map(|&y| (-(x - y) * (x - y)).exp()).collect()).collect()
    };
    let er = table(&ar, &br);
    let ei = table(&ai, &bi);
    let partial: Vec<f64> = (0..ar.len())
        .into_par_iter()
        .map(|a| {
            let mut acc = 0.0;
            for (b, (y, wy)) in ai.iter().enumerate() {
                let alpha = PhasePoint::new(ar.nodes[a], y);
                let wa = ar.weights[a] * wy;
                let q = (ln_husimi_q(state, alpha) - PI.ln()).exp();
                let g = signaling_weight(alpha);
                let eib = &ei[b];
                let mut row_acc = 0.0;
                for (ir, row) in rows.iter().enumerate() {
                    if row.is_empty() {
                        continue;
                    }
                    let qr = q * er[a][ir];
                    for &(ii, wb, s) in row {
                        let v = qr * eib[ii] + g * s;
                        if v < 0.0 {
                            row_acc -= wb * v;
                        }
                    }
                }
                acc += wa * row_acc;
            }
            acc
        })
        .collect();
    let total: f64 = partial.iter().sum();
    if reflect {
        2.0 * total
    } else {
        total
    }
}

/// One azimuthal pass over `(|α|, |β|, φ)`.
fn pass_3d(state: &State, alpha_radius: f64, beta_radius: f64, nodes: usize) -> f64 {
    let ra = rule(0.0, alpha_radius, nodes);
    let rb = rule(0.0, beta_radius, nodes);
    let rp = rule(0.0, PI, nodes);
    let cos_phi: Vec<f64> = rp.nodes.iter().map(|p| p.cos()).collect();
    let beta_terms: Vec<(f64, f64, f64)> = rb
        .iter()
        .map(|(r, w)| (r, w * r, bracket(state, PhasePoint::new(r, 0.0))))
        .collect();
    let partial: Vec<f64> = (0..ra.len())
        .into_par_iter()
        .map(|a| {
            let (r1, w1) = (ra.nodes[a], ra.weights[a]);
            let alpha = PhasePoint::new(r1, 0.0);
            let lq = ln_husimi_q(state, alpha) - PI.ln();
            let g = signaling_weight(alpha);
            let mut acc = 0.0;
            for &(r2, w2, s) in &beta_terms {
                if s >= 0.0 {
                    continue;
                }
                let base = lq - r1 * r1 - r2 * r2;
                let mut inner = 0.0;
                for (c, wp) in cos_phi.iter().zip(&rp.weights) {
                    let v = (base + 2.0 * r1 * r2 * c).exp() + g * s;
                    if v < 0.0 {
                        inner -= wp * v;
                    }
                }
                acc += w2 * inner;
            }
            w1 * r1 * acc
        })
        .collect();
    // 2π from the overall angle, 2 from folding φ onto [0, π]
    4.0 * PI * partial.iter().sum::<f64>()
}

/// Negativity with default options and the given tolerance.
pub fn negativity(state: &State, tolerance: f64) -> Result<NegativityResult> {
    negativity_with(state, &NegativityOptions::with_tolerance(tolerance))
}

pub fn negativity_with(state: &State, opts: &NegativityOptions) -> Result<NegativityResult> {
    state.validate()?;
    if !(opts.tolerance > 0.0) {
        return Err(OqcvError::invalid("tolerance must be positive"));
    }
    let start = Instant::now();
    let layout = layout_for(state, opts.force_full);
    let mut beta_box = marginal_support(state);
    if layout == SymmetryReduction::Reflection {
        let h = beta_box.im.1.max(-beta_box.im.0);
        beta_box.im = (-h, h);
    }
    let beta_radius = [beta_box.re.0, beta_box.re.1, beta_box.im.0, beta_box.im.1]
        .iter()
        .map(|v| v.abs())
        .fold(0.0, f64::max);
    let cap = match layout {
        SymmetryReduction::Azimuthal => opts.max_nodes_3d,
        _ => opts.max_nodes_4d,
    };
    let eval = |nodes: usize| match layout {
        SymmetryReduction::Azimuthal => pass_3d(state, opts.alpha_half_width, beta_radius, nodes),
        SymmetryReduction::Reflection => pass_4d(state, opts.alpha_half_width, beta_box, nodes, true),
        SymmetryReduction::None => pass_4d(state, opts.alpha_half_width, beta_box, nodes, false),
    };
    let mut nodes = opts.start_nodes.div_ceil(8).max(2) * 8;
    let mut history = vec![(nodes, eval(nodes))];
    loop {
        nodes *= 2;
        let v = eval(nodes);
        history.push((nodes, v));
        let prev = history[history.len() - 2].1;
        let err = (v - prev).abs();
        if err < opts.tolerance {
            return Ok(NegativityResult {
                state: state.to_string(),
                nbar: mean_photon(state),
                value: v,
                error_estimate: err,
                domain_radius: beta_radius,
                alpha_half_width: opts.alpha_half_width,
                beta_box,
                nodes_per_axis: nodes,
                symmetry_reduction: layout,
                wall_time: start.elapsed().as_secs_f64(),
                history,
            });
        }
        if nodes * 2 > cap {
            return Err(OqcvError::NotConverged { last: v, previous: prev, error: err, tolerance: opts.tolerance, nodes });
        }
    }
}

/// `∫∫ max(-W, 0)` for a generic experiment, over its domain hint.
pub fn negativity_generic(probs: &SettingProbabilities, tolerance: f64) -> Result<(f64, f64)> {
    let d = probs.domain();
    let pass = |nodes: usize| {
        let r1 = rule(d.x1.0, d.x1.1, nodes);
        let r2 = rule(d.x2.0, d.x2.1, nodes);
        crate::quadrature::integrate_2d(&r1, &r2, |a, b| (-probs.oqcv(a, b)).max(0.0))
    };
    let mut nodes = 64;
    let mut prev = pass(nodes);
    while nodes < 4096 {
        nodes *= 2;
        let v = pass(nodes);
        if (v - prev).abs() < tolerance {
            return Ok((v, (v - prev).abs()));
        }
        prev = v;
    }
    Err(OqcvError::NotConverged { last: prev, previous: prev, error: f64::NAN, tolerance, nodes })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub nbar: f64,
    pub result: Option<NegativityResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub family: StateFamily,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Values of the successful rows as `(n̄, N)`.
    pub fn values(&self) -> Vec<(f64, f64)> {
        self.rows.iter().filter_map(|r| r.result.as_ref().map(|x| (r.nbar, x.value))).collect()
    }

    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.result.is_some())
    }
}

/// One negativity per `n̄`; a failing point is recorded in its row and the sweep continues.
///
/// For families other than vacuum, `n̄ = 0` stands for the vacuum.
pub fn negativity_sweep(family: StateFamily, nbars: &[f64], opts: &NegativityOptions) -> Result<SweepTable> {
    if nbars.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(OqcvError::invalid("sweep n̄ values must be strictly increasing"));
    }
    let rows = nbars
        .iter()
        .map(|&nbar| {
            let state = if nbar == 0.0 && family != StateFamily::CatMinus {
                Ok(State::Vacuum)
            } else {
                amplitude_for_mean_photon(family, nbar)
            };
            match state.and_then(|s| negativity_with(&s, opts)) {
                Ok(r) => SweepRow { nbar, result: Some(r), error: None },
                Err(e) => SweepRow { nbar, result: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(SweepTable { family, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRow {
    pub nbar: f64,
    pub alpha: PhasePoint,
    pub beta: PhasePoint,
    pub joint: f64,
    pub signaling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsTable {
    pub rows: Vec<AsymptoticRow>,
    /// Per probe: `(joint slope, signaling slope)` of `ln|term|` against `ln n̄`.
    pub slopes: Vec<(f64, f64)>,
}

fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.abs().ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        let dx = x.ln() - mx;
        (a + dx * (y.abs().ln() - my), b + dx * dx)
    });
    num / den
}

/// Both terms of `W` for thermal states at fixed probes, with log-log slopes.
pub fn thermal_asymptotics(nbars: &[f64], probes: &[(PhasePoint, PhasePoint)]) -> Result<AsymptoticsTable> {
    if nbars.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
        return Err(OqcvError::invalid("thermal n̄ must be finite and >= 0"));
    }
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for &(alpha, beta) in probes {
        let mut j = Vec::new();
        let mut s = Vec::new();
        for &nbar in nbars {
            let (joint, signaling) = oqcv_terms(&State::Thermal { nbar }, alpha, beta);
            rows.push(AsymptoticRow { nbar, alpha, beta, joint, signaling });
            if nbar > 0.0 {
                j.push((nbar, joint));
                s.push((nbar, signaling));
            }
        }
        let fit = |v: &[(f64, f64)]| if v.len() >= 2 { loglog_slope(v) } else { f64::NAN };
        slopes.push((fit(&j), fit(&s)));
    }
    Ok(AsymptoticsTable { rows, slopes })
}
