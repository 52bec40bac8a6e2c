//! Probabilist's Hermite polynomials and characteristic tensors.
//!
//! `He_n` is orthogonal under the weight `exp(-x²/2)` with norm
//! `√(2π)·n!`. A density of two variables expands as
//!
//! ```text
//! P(x1, x2) = exp(-(x1² + x2²)/2) Σ_{m,n} He_m(x1) He_n(x2) C_mn / (2π m! n!)
//! C_mn      = ∫∫ He_m(x1) He_n(x2) P(x1, x2) dx1 dx2
//! ```
//!
//! Raw `He_n` values and factorials overflow long before degree 40 is
//! useful, so sums are carried out with the orthonormal Hermite functions
//! `ψ_n(x) = He_n(x)·exp(-x²/4) / √(√(2π)·n!)`. In that basis the
//! expansion reads `P = exp(-(x1²+x2²)/4) Σ C̃_mn ψ_m(x1) ψ_n(x2)` with
//! `C̃_mn = C_mn / (s_m s_n)` and `s_n = √(√(2π) n!)`.

use crate::error::{OqcvError, Result};
use crate::quadrature::Rule1d;
use serde::{Deserialize, Serialize};

/// Default truncation degree for series evaluation.
pub const DEFAULT_MAX_DEGREE: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HermiteDegree(pub usize);

impl From<usize> for HermiteDegree {
    fn from(n: usize) -> Self {
        HermiteDegree(n)
    }
}

/// `He_n(x)` by the three-term recurrence.
pub fn hermite_eval(n: impl Into<HermiteDegree>, x: f64) -> f64 {
    let n = n.into().0;
    if n == 0 {
        return 1.0;
    }
    let mut prev = 1.0;
    let mut cur = x;
    for k in 1..n {
        let next = x * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// All `He_0..=He_max` at `x`.
pub fn hermite_all(max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    out.push(1.0);
    if max >= 1 {
        out.push(x);
    }
    for k in 1..max {
        let next = x * out[k] - k as f64 * out[k - 1];
        out.push(next);
    }
    out
}

/// Orthonormal Hermite functions `ψ_0..=ψ_max` at `x`.
pub fn hermite_functions(max: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(max + 1);
    let psi0 = (-0.25 * x * x).exp() / (2.0 * std::f64::consts::PI).powf(0.25);
    out.push(psi0);
    if max >= 1 {
        out.push(x * psi0);
    }
    for k in 1..max {
        let kf = k as f64;
        let next = (x * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
        out.push(next);
    }
    out
}

/// `ln s_n = ln √(√(2π)·n!)`, the factor between raw and scaled tensor entries.
pub fn ln_scale(n: usize) -> f64 {
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    0.5 * (0.5 * (2.0 * std::f64::consts::PI).ln() + ln_fact)
}

/// Truncated matrix of Hermite moments `Γ_mn` (or `C_mn`).
///
/// Entries are stored raw, exactly as the moments themselves; `scaled`
/// gives the overflow-safe coefficients used for series evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicTensor {
    max_degree: usize,
    entries: Vec<f64>,
}

impl CharacteristicTensor {
    pub fn zeros(max_degree: usize) -> Self {
        CharacteristicTensor {
            max_degree,
            entries: vec![0.0; (max_degree + 1) * (max_degree + 1)],
        }
    }

    /// Tensor of a product of standard normals: `δ_m0 δ_n0`.
    pub fn unit(max_degree: usize) -> Self {
        let mut t = Self::zeros(max_degree);
        t.set(0, 0, 1.0);
        t
    }

    /// Build from scaled coefficients `C̃_mn`.
    pub fn from_scaled(max_degree: usize, scaled: &[f64]) -> Self {
        assert_eq!(scaled.len(), (max_degree + 1) * (max_degree + 1));
        let s: Vec<f64> = (0..=max_degree).map(ln_scale).collect();
        let mut t = Self::zeros(max_degree);
        for m in 0..=max_degree {
            for n in 0..=max_degree {
                let v = scaled[m * (max_degree + 1) + n];
                t.entries[m * (max_degree + 1) + n] = v * (s[m] + s[n]).exp();
            }
        }
        t
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.entries[m * (self.max_degree + 1) + n]
    }

    pub fn set(&mut self, m: usize, n: usize, v: f64) {
        self.entries[m * (self.max_degree + 1) + n] = v;
    }

    /// `C̃_mn = C_mn / (s_m s_n)`.
    pub fn scaled(&self, m: usize, n: usize) -> f64 {
        self.get(m, n) * (-(ln_scale(m) + ln_scale(n))).exp()
    }

    fn scaled_matrix(&self) -> Vec<f64> {
        let d = self.max_degree;
        let s: Vec<f64> = (0..=d).map(ln_scale).collect();
        let mut out = vec![0.0; (d + 1) * (d + 1)];
        for m in 0..=d {
            for n in 0..=d {
                out[m * (d + 1) + n] = self.get(m, n) * (-(s[m] + s[n])).exp();
            }
        }
        out
    }

    /// Restrict to a lower truncation degree.
    pub fn truncated(&self, max_degree: usize) -> Self {
        let d = max_degree.min(self.max_degree);
        let mut t = Self::zeros(d);
        for m in 0..=d {
            for n in 0..=d {
                t.set(m, n, self.get(m, n));
            }
        }
        t
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|v| v.is_finite())
    }
}

/// Quadrature used to compute characteristic tensors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TensorQuadrature {
    /// Half-width `L` of the square `[-L, L]²`.
    pub half_width: f64,
    pub nodes_per_axis: usize,
    /// Allowed deviation of `∫∫ density` from 1.
    pub normalization_tolerance: f64,
}

impl Default for TensorQuadrature {
    fn default() -> Self {
        TensorQuadrature {
            half_width: 8.0,
            nodes_per_axis: 200,
            normalization_tolerance: 1e-6,
        }
    }
}

/// Per-node Hermite-function table `ψ_k(x_i)·exp(x_i²/4)·w_i`, laid out `[i][k]`.
pub(crate) fn weighted_moment_table(rule: &Rule1d, max_degree: usize) -> Vec<Vec<f64>> {
    rule.iter()
        .map(|(x, w)| {
            let lift = (0.25 * x * x).exp() * w;
            hermite_functions(max_degree, x)
                .into_iter()
                .map(|p| p * lift)
                .collect()
        })
        .collect()
}

/// Scaled moments `∫∫ ψ_m ψ_n exp((x1²+x2²)/4) f` on tensor GL nodes.
pub(crate) fn scaled_moments_2d<F: Fn(f64, f64) -> f64>(
    f: F,
    max_degree: usize,
    rx: &Rule1d,
    ry: &Rule1d,
) -> Vec<f64> {
    let d = max_degree + 1;
    let tx = weighted_moment_table(rx, max_degree);
    let ty = weighted_moment_table(ry, max_degree);
    // first contract over x2: inner[i][n] = Σ_j f(x_i, y_j) ty[j][n]
    let mut out = vec![0.0; d * d];
    for (i, &x) in rx.nodes.iter().enumerate() {
        let mut inner = vec![0.0; d];
        for (j, &y) in ry.nodes.iter().enumerate() {
            let v = f(x, y);
            if v == 0.0 {
                continue;
            }
            for n in 0..d {
                inner[n] += v * ty[j][n];
            }
        }
        for m in 0..d {
            let a = tx[i][m];
            for n in 0..d {
                out[m * d + n] += a * inner[n];
            }
        }
    }
    out
}

/// `C_mn = ∫∫ He_m(x1) He_n(x2) density(x1, x2)` for `m, n ≤ max_degree`.
pub fn characteristic_tensor<F: Fn(f64, f64) -> f64>(
    density: F,
    max_degree: usize,
    quad: &TensorQuadrature,
) -> Result<CharacteristicTensor> {
    let rule = Rule1d::gauss_legendre(-quad.half_width, quad.half_width, quad.nodes_per_axis);
    let scaled = scaled_moments_2d(&density, max_degree, &rule, &rule);
    let tensor = CharacteristicTensor::from_scaled(max_degree, &scaled);
    let norm = tensor.get(0, 0);
    if !((norm - 1.0).abs() <= quad.normalization_tolerance) {
        return Err(OqcvError::Normalization {
            integral: norm,
            tolerance: quad.normalization_tolerance,
        });
    }
    Ok(tensor)
}

/// Truncated Hermite series of a tensor at `(x1, x2)`.
pub fn series_eval(tensor: &CharacteristicTensor, x1: f64, x2: f64) -> f64 {
    series_eval_with_tail(tensor, x1, x2).0
}

/// Series value together with a tail estimate: the magnitude of the last
/// diagonal band (`max(m, n) = max_degree`).
pub fn series_eval_with_tail(tensor: &CharacteristicTensor, x1: f64, x2: f64) -> (f64, f64) {
    let d = tensor.max_degree();
    let p1 = hermite_functions(d, x1);
    let p2 = hermite_functions(d, x2);
    let coeff = tensor.scaled_matrix();
    let mut total = 0.0;
    let mut band = 0.0;
    for m in 0..=d {
        for n in 0..=d {
            let term = coeff[m * (d + 1) + n] * p1[m] * p2[n];
            total += term;
            if m == d || n == d {
                band += term;
            }
        }
    }
    let envelope = (-0.25 * (x1 * x1 + x2 * x2)).exp();
    (total * envelope, band.abs() * envelope)
}
