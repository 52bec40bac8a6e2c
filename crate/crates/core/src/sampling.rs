//! Monte-Carlo simulation of the sequential heterodyne experiment.
//!
//! First outcomes are drawn from `Q` by rejection inside a centred disk
//! under the global bound `Q ≤ 1/π`; the field then collapses to `|α⟩`, so
//! the second outcome is `α` plus Gaussian noise of variance 1/2 per axis.
//!
//! Samples are generated in fixed chunks of [`CHUNK`] draws. Chunk `k` of
//! a batch uses a ChaCha8 stream keyed by the seed with stream index
//! `(mode << 48) | k`, so a batch depends only on `(state, count, seed)`
//! and not on how chunks are scheduled across threads.

use crate::error::{OqcvError, Result};
use crate::heterodyne::{marginal_after_first, q_support_radius};
use crate::quadrature::gauss_legendre_unit;
use crate::states::{husimi_q, mean_photon, PhasePoint, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Draws per reproducible stream.
pub const CHUNK: usize = 8192;
/// Abort when acceptance falls below this.
pub const MIN_ACCEPTANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// First then second measurement.
    Sequential,
    /// Second measurement alone; outcomes are stored in `alphas`.
    SecondOnly,
}

impl SampleMode {
    fn tag(self) -> u64 {
        match self {
            SampleMode::Sequential => 1,
            SampleMode::SecondOnly => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub seed: u64,
    pub count: usize,
    pub mode: SampleMode,
    pub state: String,
    pub alphas: Vec<PhasePoint>,
    /// Empty for `SecondOnly` batches.
    pub betas: Vec<PhasePoint>,
    /// Rejection proposals made in total.
    pub proposals: u64,
}

impl SampleBatch {
    /// Outcomes of the second measurement time, in either mode.
    pub fn second_outcomes(&self) -> &[PhasePoint] {
        match self.mode {
            SampleMode::Sequential => &self.betas,
            SampleMode::SecondOnly => &self.alphas,
        }
    }

    pub fn acceptance(&self) -> f64 {
        self.count as f64 / self.proposals as f64
    }
}

/// Radius of the rejection disk: `√n̄ + 6`, widened when `Q` reaches further.
pub fn sampling_radius(state: &State) -> f64 {
    (mean_photon(state).sqrt() + 6.0).max(q_support_radius(state))
}

fn chunk_rng(seed: u64, mode: SampleMode, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((mode.tag() << 48) | chunk as u64);
    rng
}

/// Draw `n` outcomes of `Q`; returns them and the proposal count.
fn draw_q(state: &State, n: usize, radius: f64, rng: &mut ChaCha8Rng) -> Result<(Vec<PhasePoint>, u64)> {
    let mut out = Vec::with_capacity(n);
    let mut proposals = 0u64;
    while out.len() < n {
        proposals += 1;
        let r = radius * rng.random::<f64>().sqrt();
        let th = 2.0 * PI * rng.random::<f64>();
        let a = PhasePoint::from_polar(r, th);
        if rng.random::<f64>() < PI * husimi_q(state, a) {
            out.push(a);
        }
        if proposals >= 100_000 && (out.len() as f64) < MIN_ACCEPTANCE * proposals as f64 {
            return Err(OqcvError::SamplerEfficiency { acceptance: out.len() as f64 / proposals as f64, proposals });
        }
    }
    Ok((out, proposals))
}

fn sample(state: &State, count: usize, seed: u64, mode: SampleMode) -> Result<SampleBatch> {
    state.validate()?;
    if count == 0 {
        return Err(OqcvError::invalid("sample count must be at least 1"));
    }
    let radius = sampling_radius(state);
    let noise = Normal::new(0.0, 0.5f64.sqrt()).expect("valid normal");
    let chunks = count.div_ceil(CHUNK);
    let parts: Vec<(Vec<PhasePoint>, Vec<PhasePoint>, u64)> = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let n = CHUNK.min(count - k * CHUNK);
            let mut rng = chunk_rng(seed, mode, k);
            let (alphas, proposals) = draw_q(state, n, radius, &mut rng)?;
            let betas = match mode {
                SampleMode::Sequential => alphas
                    .iter()
                    .map(|a| PhasePoint::new(a.re + noise.sample(&mut rng), a.im + noise.sample(&mut rng)))
                    .collect(),
                SampleMode::SecondOnly => Vec::new(),
            };
            Ok((alphas, betas, proposals))
        })
        .collect::<Result<_>>()?;
    let mut batch = SampleBatch {
        seed,
        count,
        mode,
        state: state.to_string(),
        alphas: Vec::with_capacity(count),
        betas: Vec::with_capacity(if mode == SampleMode::Sequential { count } else { 0 }),
        proposals: 0,
    };
    for (a, b, p) in parts {
        batch.alphas.extend(a);
        batch.betas.extend(b);
        batch.proposals += p;
    }
    Ok(batch)
}

/// `count` sequential `(α, β)` pairs.
pub fn sample_sequential(state: &State, count: usize, seed: u64) -> Result<SampleBatch> {
    sample(state, count, seed, SampleMode::Sequential)
}

/// `count` outcomes of the second measurement performed alone (distributed as `Q`).
pub fn sample_second_only(state: &State, count: usize, seed: u64) -> Result<SampleBatch> {
    sample(state, count, seed, SampleMode::SecondOnly)
}

/// Square bins of equal width on every axis, shared by `α` and `β`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    pub bins: usize,
    pub width: f64,
    pub center: PhasePoint,
}

impl Binning {
    /// 40 bins of width 0.75 per axis around the state's centre.
    pub fn for_state(state: &State) -> Self {
        Binning { bins: 40, width: 0.75, center: state.center() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 || self.bins > 128 || !(self.width > 0.0) || !self.center.is_finite() {
            return Err(OqcvError::invalid(format!("bad binning {self:?}")));
        }
        Ok(())
    }

    fn lo(&self, center: f64) -> f64 {
        center - 0.5 * self.bins as f64 * self.width
    }

    /// Lower edge of bin `i` on the real (`axis = 0`) or imaginary axis.
    pub fn edge(&self, axis: usize, i: usize) -> f64 {
        let c = if axis == 0 { self.center.re } else { self.center.im };
        self.lo(c) + i as f64 * self.width
    }

    /// Centre of the 2D bin `(i, j)`.
    pub fn bin_center(&self, i: usize, j: usize) -> PhasePoint {
        PhasePoint::new(self.edge(0, i) + 0.5 * self.width, self.edge(1, j) + 0.5 * self.width)
    }

    fn index1(&self, x: f64, c: f64) -> Option<usize> {
        let t = ((x - self.lo(c)) / self.width).floor();
        (t >= 0.0 && t < self.bins as f64).then_some(t as usize)
    }

    /// 2D bin index `i * bins + j` of a point.
    pub fn index2(&self, p: PhasePoint) -> Option<usize> {
        Some(self.index1(p.re, self.center.re)? * self.bins + self.index1(p.im, self.center.im)?)
    }

    pub fn area(&self) -> f64 {
        self.width * self.width
    }

    /// 2D bins touching the point (one, two or four of them).
    pub fn bins_touching(&self, p: PhasePoint) -> Vec<usize> {
        let axis = |x: f64, c: f64| -> Vec<usize> {
            let t = (x - self.lo(c)) / self.width;
            let k = t.round();
            if (t - k).abs() < 1e-12 && k >= 1.0 && k < self.bins as f64 {
                vec![k as usize - 1, k as usize]
            } else {
                self.index1(x, c).into_iter().collect()
            }
        };
        let mut out = Vec::new();
        for i in axis(p.re, self.center.re) {
            for j in axis(p.im, self.center.im) {
                out.push(i * self.bins + j);
            }
        }
        out
    }
}

/// Binned estimate of `W` with per-bin standard errors and the raw counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalW {
    pub binning: Binning,
    pub sequential_count: usize,
    pub second_only_count: usize,
    /// Bin-averaged `g(α)` per 2D `α` bin.
    pub g_bar: Vec<f64>,
    /// 4D counts of sequential pairs, index `a * bins² + b`.
    pub counts_joint: Vec<u32>,
    /// 2D counts of sequential second outcomes.
    pub counts_after_first: Vec<u32>,
    /// 2D counts of the second-only batch.
    pub counts_second_only: Vec<u32>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

/// `(estimate, standard error)` of a bin-averaged `W` from counts.
///
/// `c_j` counts sequential pairs in the 4D cell (or union of cells with
/// total `α` area `alpha_area`), `c12` sequential second outcomes in the
/// `β` bin and `c2` second-only outcomes in the same bin.
fn bin_estimate(c_j: f64, c12: f64, c2: f64, n: f64, m: f64, g_bar: f64, alpha_area: f64, beta_area: f64) -> (f64, f64) {
    let v4 = alpha_area * beta_area;
    let (pj, p12, p2) = (c_j / n, c12 / n, c2 / m);
    let k = g_bar / beta_area;
    let est = pj / v4 + k * (p2 - p12);
    let var_j = pj * (1.0 - pj) / n / (v4 * v4);
    let var_12 = p12 * (1.0 - p12) / n;
    let var_2 = p2 * (1.0 - p2) / m;
    let cov = pj * (1.0 - p12) / n;
    let var = var_j + k * k * (var_12 + var_2) - 2.0 * k / v4 * cov;
    (est, var.max(0.0).sqrt())
}

/// `∫` of `f` over `[lo, lo + width]` by `n`-point Gauss–Legendre.
fn bin_nodes(lo: f64, width: f64, unit: &crate::quadrature::Rule1d) -> Vec<(f64, f64)> {
    unit.iter().map(|(x, w)| (lo + 0.5 * width * (x + 1.0), 0.5 * width * w)).collect()
}

fn g_bar(binning: &Binning) -> Vec<f64> {
    let unit = gauss_legendre_unit(8);
    let b = binning.bins;
    let axis = |axis: usize| -> Vec<f64> {
        (0..b)
            .map(|i| {
                bin_nodes(binning.edge(axis, i), binning.width, &unit)
                    .iter()
                    .map(|(x, w)| w * (-0.5 * x * x).exp())
                    .sum::<f64>()
            })
            .collect()
    };
    let (gr, gi) = (axis(0), axis(1));
    let mut out = vec![0.0; b * b];
    for i in 0..b {
        for j in 0..b {
            out[i * b + j] = gr[i] * gi[j] / (2.0 * PI) / binning.area();
        }
    }
    out
}

/// Histogram estimate of `W` from a sequential and a second-only batch.
pub fn empirical_oqcv(seq: &SampleBatch, m2: &SampleBatch, binning: Binning) -> Result<EmpiricalW> {
    binning.validate()?;
    if seq.mode != SampleMode::Sequential || m2.mode != SampleMode::SecondOnly {
        return Err(OqcvError::invalid("empirical W needs a sequential batch and a second-only batch"));
    }
    if seq.state != m2.state {
        return Err(OqcvError::invalid(format!("batches come from different states: {} vs {}", seq.state, m2.state)));
    }
    let b2 = binning.bins * binning.bins;
    let mut cj = vec![0u32; b2 * b2];
    let mut c12 = vec![0u32; b2];
    let mut c2 = vec![0u32; b2];
    for (a, b) in seq.alphas.iter().zip(&seq.betas) {
        let ib = binning.index2(*b);
        if let Some(ib) = ib {
            c12[ib] += 1;
            if let Some(ia) = binning.index2(*a) {
                cj[ia * b2 + ib] += 1;
            }
        }
    }
    for b in m2.second_outcomes() {
        if let Some(ib) = binning.index2(*b) {
            c2[ib] += 1;
        }
    }
    let g = g_bar(&binning);
    let (n, m) = (seq.count as f64, m2.count as f64);
    let area = binning.area();
    let (values, stderr): (Vec<f64>, Vec<f64>) = (0..b2 * b2)
        .into_par_iter()
        .map(|k| {
            let (ia, ib) = (k / b2, k % b2);
            bin_estimate(cj[k] as f64, c12[ib] as f64, c2[ib] as f64, n, m, g[ia], area, area)
        })
        .unzip();
    Ok(EmpiricalW {
        binning,
        sequential_count: seq.count,
        second_only_count: m2.count,
        g_bar: g,
        counts_joint: cj,
        counts_after_first: c12,
        counts_second_only: c2,
        values,
        stderr,
    })
}

impl EmpiricalW {
    fn b2(&self) -> usize {
        self.binning.bins * self.binning.bins
    }

    /// Mean standard error over bins with any sequential count.
    pub fn mean_stderr(&self) -> f64 {
        let (s, k) = self
            .stderr
            .iter()
            .zip(&self.counts_joint)
            .filter(|(_, &c)| c > 0)
            .fold((0.0, 0usize), |(s, k), (e, _)| (s + e, k + 1));
        s / k as f64
    }

    /// Average of `W` over a set of `α` bins, per `β` bin, with standard
    /// errors recomputed from the pooled counts.
    pub fn aggregate_alpha(&self, alpha_bins: &[usize]) -> (Vec<f64>, Vec<f64>) {
        let b2 = self.b2();
        let k = alpha_bins.len() as f64;
        let g = alpha_bins.iter().map(|&a| self.g_bar[a]).sum::<f64>() / k;
        let (n, m) = (self.sequential_count as f64, self.second_only_count as f64);
        let area = self.binning.area();
        (0..b2)
            .map(|ib| {
                let cj: f64 = alpha_bins.iter().map(|&a| self.counts_joint[a * b2 + ib] as f64).sum();
                bin_estimate(
                    cj,
                    self.counts_after_first[ib] as f64,
                    self.counts_second_only[ib] as f64,
                    n,
                    m,
                    g,
                    k * area,
                    area,
                )
            })
            .unzip()
    }

    /// `½ Σ_cells |W_est - W_ref| · cell volume`.
    pub fn total_variation(&self, reference: &[f64]) -> f64 {
        let v4 = self.binning.area().powi(2);
        0.5 * v4 * self.values.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }
}

/// Exact bin averages of `W` on the binning's 4D cells, index `a * bins² + b`.
pub fn analytic_bin_average(state: &State, binning: Binning) -> Result<Vec<f64>> {
    state.validate()?;
    binning.validate()?;
    let unit = gauss_legendre_unit(6);
    let nb = binning.bins;
    let b2 = nb * nb;
    let area = binning.area();
    let nodes = |axis: usize| -> Vec<Vec<(f64, f64)>> {
        (0..nb).map(|i| bin_nodes(binning.edge(axis, i), binning.width, &unit)).collect()
    };
    let (nr, ni) = (nodes(0), nodes(1));
    // K[x node][bin] = ∫_bin e^{-(x-y)²} dy
    let kernel = |xs: &Vec<Vec<(f64, f64)>>| -> Vec<Vec<f64>> {
        xs.iter()
            .flatten()
            .map(|&(x, _)| {
                xs.iter().map(|bin| bin.iter().map(|(y, w)| w * (-(x - y) * (x - y)).exp()).sum()).collect()
            })
            .collect()
    };
    let (kr, ki) = (kernel(&nr), kernel(&ni));
    let g = g_bar(&binning);
    // ∫_β-bin [Q - P12]
    let s_bin: Vec<f64> = (0..b2)
        .map(|ib| {
            let (i, j) = (ib / nb, ib % nb);
            let mut acc = 0.0;
            for &(x, wx) in &nr[i] {
                for &(y, wy) in &ni[j] {
                    let p = PhasePoint::new(x, y);
                    acc += wx * wy * (husimi_q(state, p) - marginal_after_first(state, p));
                }
            }
            acc
        })
        .collect();
    let q = unit.len();
    let out: Vec<Vec<f64>> = (0..b2)
        .into_par_iter()
        .map(|ia| {
            let (i, j) = (ia / nb, ia % nb);
            let mut joint = vec![0.0; b2];
            for (u, &(x, wx)) in nr[i].iter().enumerate() {
                for (v, &(y, wy)) in ni[j].iter().enumerate() {
                    let qa = wx * wy * husimi_q(state, PhasePoint::new(x, y)) / PI;
                    if qa < 1e-300 {
                        continue;
                    }
                    let kx = &kr[i * q + u];
                    let ky = &ki[j * q + v];
                    for br in 0..nb {
                        let t = qa * kx[br];
                        for bi in 0..nb {
                            joint[br * nb + bi] += t * ky[bi];
                        }
                    }
                }
            }
            joint
                .iter()
                .zip(&s_bin)
                .map(|(jv, s)| jv / (area * area) + g[ia] * s / area)
                .collect()
        })
        .collect();
    Ok(out.into_iter().flatten().collect())
}

/// Two-sample chi-square comparison of second-outcome histograms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    /// `(χ² - dof) / √(2 dof)`.
    pub z: f64,
}

/// Compare the sequential batch's second outcomes with the second-only batch.
///
/// A large `z` means the first measurement changed the second one's statistics.
pub fn nsit_signature(seq: &SampleBatch, m2: &SampleBatch, binning: Binning) -> Result<ChiSquare> {
    binning.validate()?;
    let hist = |pts: &[PhasePoint]| {
        let mut h = vec![0.0; binning.bins * binning.bins];
        for p in pts {
            if let Some(i) = binning.index2(*p) {
                h[i] += 1.0;
            }
        }
        h
    };
    let (h1, h2) = (hist(seq.second_outcomes()), hist(m2.second_outcomes()));
    let (n1, n2): (f64, f64) = (h1.iter().sum(), h2.iter().sum());
    let (k1, k2) = ((n2 / n1).sqrt(), (n1 / n2).sqrt());
    let mut stat = 0.0;
    let mut used = 0usize;
    for (a, b) in h1.iter().zip(&h2) {
        if a + b > 0.0 {
            stat += (k1 * a - k2 * b).powi(2) / (a + b);
            used += 1;
        }
    }
    let dof = used.saturating_sub(1).max(1);
    Ok(ChiSquare { statistic: stat, dof, z: (stat - dof as f64) / (2.0 * dof as f64).sqrt() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_batch() {
        let a = sample_sequential(&State::Vacuum, 20_000, 7).unwrap();
        let b = sample_sequential(&State::Vacuum, 20_000, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_sequential(&State::Vacuum, 20_000, 8).unwrap();
        assert_ne!(a.alphas, c.alphas);
        let m = sample_second_only(&State::Vacuum, 100, 7).unwrap();
        assert!(m.betas.is_empty());
        assert_eq!(m.second_outcomes().len(), 100);
    }

    #[test]
    fn prefix_property_of_chunks() {
        // a longer batch starts with the shorter one
        let a = sample_sequential(&State::coherent(1.0, 0.0), CHUNK + 10, 3).unwrap();
        let b = sample_sequential(&State::coherent(1.0, 0.0), 2 * CHUNK, 3).unwrap();
        assert_eq!(a.alphas[..CHUNK], b.alphas[..CHUNK]);
    }

    #[test]
    fn bin_indexing() {
        let b = Binning { bins: 4, width: 1.0, center: PhasePoint::ORIGIN };
        assert_eq!(b.index2(PhasePoint::new(-1.5, 0.5)), Some(2));
        assert_eq!(b.index2(PhasePoint::new(2.5, 0.0)), None);
        let mut t = b.bins_touching(PhasePoint::ORIGIN);
        t.sort();
        assert_eq!(t, vec![5, 6, 9, 10]);
        assert_eq!(b.bins_touching(PhasePoint::new(0.5, 0.5)), vec![10]);
    }

    #[test]
    fn bin_averages_integrate_to_one() {
        let s = State::coherent(0.5, 0.0);
        let b = Binning { bins: 16, width: 1.0, center: s.center() };
        let w = analytic_bin_average(&s, b).unwrap();
        let mass: f64 = w.iter().sum::<f64>() * b.area() * b.area();
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
    }

    #[test]
    fn rejects_mismatched_batches() {
        let s = sample_sequential(&State::Vacuum, 100, 1).unwrap();
        let m = sample_second_only(&State::Number { n: 1 }, 100, 1).unwrap();
        assert!(empirical_oqcv(&s, &m, Binning::for_state(&State::Vacuum)).is_err());
        assert!(empirical_oqcv(&s, &s, Binning::for_state(&State::Vacuum)).is_err());
    }
}
