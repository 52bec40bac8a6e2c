//! Generic two-time quasiprobability over scalar outcomes.
//!
//! One experiment is described by three densities: `p1(x1)` (first
//! measurement alone), `p2(x2)` (second measurement alone) and the
//! sequential joint `joint(x1, x2)`. With `φ` the standard normal density,
//!
//! ```text
//! W(x1, x2) = joint(x1, x2)
//!           + φ(x2) [p1(x1) - ∫dx2 joint]
//!           + φ(x1) [p2(x2) - ∫dx1 joint]
//! ```
//!
//! which has marginals exactly `p1` and `p2`, and Hermite moments equal to
//! the moment matrix `Γ` built from the three settings.

use crate::error::{OqcvError, Result};
use crate::hermite::{self, CharacteristicTensor, TensorQuadrature};
use crate::quadrature::{adaptive, Rule1d};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub type Density1d = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Density2d = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Default tolerance for normalization, deficits and the negativity verdict.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

/// Standard normal density.
pub fn std_normal(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Rectangle outside which all three densities are treated as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainHint {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
}

impl DomainHint {
    pub fn square(half_width: f64) -> Self {
        DomainHint { x1: (-half_width, half_width), x2: (-half_width, half_width) }
    }

    fn contains(&self, x1: f64, x2: f64) -> bool {
        x1 >= self.x1.0 && x1 <= self.x1.1 && x2 >= self.x2.0 && x2 <= self.x2.1
    }
}

impl Default for DomainHint {
    fn default() -> Self {
        DomainHint::square(8.0)
    }
}

/// Barycentric interpolant on Chebyshev–Lobatto points of `[a, b]`.
#[derive(Clone)]
struct Chebyshev {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl Chebyshev {
    fn points(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..=n)
            .map(|j| {
                let t = (PI * j as f64 / n as f64).cos();
                0.5 * (a + b) + 0.5 * (b - a) * t
            })
            .collect()
    }

    fn eval(&self, x: f64) -> f64 {
        if x < self.a || x > self.b {
            return 0.0;
        }
        let n = self.nodes.len() - 1;
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, (&xj, &fj)) in self.nodes.iter().zip(&self.values).enumerate() {
            let dx = x - xj;
            if dx == 0.0 {
                return fj;
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            num += w * fj / dx;
            den += w / dx;
        }
        num / den
    }

    /// Build from `f`, doubling the degree until held-out midpoints agree.
    fn build(f: &dyn Fn(f64) -> Result<f64>, a: f64, b: f64) -> Result<Self> {
        let mut n = 64;
        let mut prev_gap = f64::INFINITY;
        loop {
            let nodes = Self::points(a, b, n);
            let values = nodes.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
            let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            let c = Chebyshev { a, b, nodes, values };
            let mut gap = 0.0f64;
            for j in (0..n).step_by(5) {
                let t = (PI * (j as f64 + 0.5) / n as f64).cos();
                let x = 0.5 * (a + b) + 0.5 * (b - a) * t;
                gap = gap.max((c.eval(x) - f(x)?).abs());
            }
            if gap <= 1e-11 * scale.max(1.0) {
                return Ok(c);
            }
            if n >= 2048 {
                return Err(OqcvError::NotConverged {
                    last: gap,
                    previous: prev_gap,
                    error: gap,
                    tolerance: 1e-11,
                    nodes: n + 1,
                });
            }
            prev_gap = gap;
            n *= 2;
        }
    }
}

/// Densities of one two-time experiment, with cached marginals of the joint.
#[derive(Clone)]
pub struct SettingProbabilities {
    p1: Density1d,
    p2: Density1d,
    joint: Density2d,
    domain: DomainHint,
    joint_marginal_1: Chebyshev,
    joint_marginal_2: Chebyshev,
}

impl fmt::Debug for SettingProbabilities {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SettingProbabilities").field("domain", &self.domain).finish_non_exhaustive()
    }
}

impl SettingProbabilities {
    pub fn new(p1: Density1d, p2: Density1d, joint: Density2d, domain: DomainHint) -> Result<Self> {
        Self::with_tolerance(p1, p2, joint, domain, DEFAULT_TOLERANCE)
    }

    /// Build and check normalization of all three densities against `tolerance`.
    pub fn with_tolerance(
        p1: Density1d,
        p2: Density1d,
        joint: Density2d,
        domain: DomainHint,
        tolerance: f64,
    ) -> Result<Self> {
        let (a1, b1) = domain.x1;
        let (a2, b2) = domain.x2;
        if !(a1 < b1 && a2 < b2 && a1.is_finite() && b1.is_finite() && a2.is_finite() && b2.is_finite()) {
            return Err(OqcvError::invalid(format!("bad domain hint {domain:?}")));
        }
        let qtol = 1e-13;
        let j1 = Arc::clone(&joint);
        let m1 = move |x1: f64| adaptive(|x2| j1(x1, x2), a2, b2, qtol).map(|r| r.0);
        let j2 = Arc::clone(&joint);
        let m2 = move |x2: f64| adaptive(|x1| j2(x1, x2), a1, b1, qtol).map(|r| r.0);
        let joint_marginal_1 = Chebyshev::build(&m1, a1, b1)?;
        let joint_marginal_2 = Chebyshev::build(&m2, a2, b2)?;
        let probs = SettingProbabilities { p1, p2, joint, domain, joint_marginal_1, joint_marginal_2 };

        let check = |v: f64| -> Result<()> {
            if (v - 1.0).abs() > tolerance || !v.is_finite() {
                return Err(OqcvError::Normalization { integral: v, tolerance });
            }
            Ok(())
        };
        check(adaptive(|x| (probs.p1)(x), a1, b1, qtol)?.0)?;
        check(adaptive(|x| (probs.p2)(x), a2, b2, qtol)?.0)?;
        check(adaptive(|x| probs.joint_marginal_1.eval(x), a1, b1, qtol)?.0)?;
        Ok(probs)
    }

    /// Product joint `p1 ⊗ p2`: the no-signaling, classical case.
    pub fn product(p1: Density1d, p2: Density1d, domain: DomainHint) -> Result<Self> {
        let (q1, q2) = (Arc::clone(&p1), Arc::clone(&p2));
        let joint: Density2d = Arc::new(move |x1, x2| q1(x1) * q2(x2));
        Self::new(p1, p2, joint, domain)
    }

    pub fn domain(&self) -> DomainHint {
        self.domain
    }

    pub fn p1(&self, x1: f64) -> f64 {
        (self.p1)(x1)
    }

    pub fn p2(&self, x2: f64) -> f64 {
        (self.p2)(x2)
    }

    pub fn joint(&self, x1: f64, x2: f64) -> f64 {
        if self.domain.contains(x1, x2) {
            (self.joint)(x1, x2)
        } else {
            0.0
        }
    }

    /// `∫dx2 joint(x1, x2)`, the first outcome's statistics with the second measurement present.
    pub fn joint_marginal_1(&self, x1: f64) -> f64 {
        self.joint_marginal_1.eval(x1)
    }

    /// `∫dx1 joint(x1, x2)`.
    pub fn joint_marginal_2(&self, x2: f64) -> f64 {
        self.joint_marginal_2.eval(x2)
    }

    /// The quasiprobability at `(x1, x2)`.
    pub fn oqcv(&self, x1: f64, x2: f64) -> f64 {
        self.joint(x1, x2)
            + std_normal(x2) * (self.p1(x1) - self.joint_marginal_1(x1))
            + std_normal(x1) * (self.p2(x2) - self.joint_marginal_2(x2))
    }
}

/// The quasiprobability as a function of two outcomes.
pub fn oqcv_density(probs: &SettingProbabilities) -> impl Fn(f64, f64) -> f64 + Send + Sync + '_ {
    move |x1, x2| probs.oqcv(x1, x2)
}

/// Hermite moment matrix `Γ` on 200 nodes per axis over the domain hint.
pub fn gamma_moments(probs: &SettingProbabilities, max_degree: usize) -> Result<CharacteristicTensor> {
    gamma_moments_with(probs, max_degree, 200)
}

/// `Γ_00 = 1`, row `(m, 0)` from `p1`, column `(0, n)` from `p2`, interior from the joint.
pub fn gamma_moments_with(
    probs: &SettingProbabilities,
    max_degree: usize,
    nodes_per_axis: usize,
) -> Result<CharacteristicTensor> {
    let panels = nodes_per_axis.div_ceil(8).max(1);
    let d = probs.domain;
    let r1 = Rule1d::composite(d.x1.0, d.x1.1, panels, 8);
    let r2 = Rule1d::composite(d.x2.0, d.x2.1, panels, 8);
    let mut scaled = hermite::scaled_moments_2d(|a, b| probs.joint(a, b), max_degree, &r1, &r2);
    let t1 = hermite::weighted_moment_table(&r1, max_degree);
    let t2 = hermite::weighted_moment_table(&r2, max_degree);
    let k = max_degree + 1;
    // a 1D moment sits in the (m, 0) slot, whose unscaling also multiplies by s_0
    let s0 = (-hermite::ln_scale(0)).exp();
    for m in 0..k {
        scaled[m * k] = s0 * r1.nodes.iter().zip(&t1).map(|(&x, t)| probs.p1(x) * t[m]).sum::<f64>();
    }
    for n in 0..k {
        scaled[n] = s0 * r2.nodes.iter().zip(&t2).map(|(&x, t)| probs.p2(x) * t[n]).sum::<f64>();
    }
    let mut tensor = CharacteristicTensor::from_scaled(max_degree, &scaled);
    tensor.set(0, 0, 1.0);
    if !tensor.is_finite() {
        return Err(OqcvError::invalid("non-finite Hermite moments"));
    }
    Ok(tensor)
}

/// The truncated Hermite series built from `Γ`.
pub fn oqcv_series(tensor: &CharacteristicTensor, x1: f64, x2: f64) -> f64 {
    hermite::series_eval(tensor, x1, x2)
}

/// Outcome of recomputing `Γ` from a candidate quasiprobability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommensurabilityReport {
    /// `max |Γ'_mn/Γ'_00 - Γ_mn| / max(|Γ_mn|, 1)` over `m, n ≤ max_degree`.
    pub max_relative_error: f64,
    pub worst: (usize, usize),
    /// `Γ'_00 = ∫∫ W`.
    pub integral: f64,
}

/// Recompute `Γ_mn = ∫∫ He_m He_n W` and compare against `tensor`.
///
/// Moments are taken relative to the recomputed `∫∫W`, so the `(0, 0)`
/// entry matches by construction and normalization is reported separately.
pub fn commensurability_check<F: Fn(f64, f64) -> f64>(
    w: F,
    tensor: &CharacteristicTensor,
    max_degree: usize,
    quad: &TensorQuadrature,
) -> Result<CommensurabilityReport> {
    let d = max_degree.min(tensor.max_degree());
    let moments = |nodes: usize| {
        let panels = nodes.div_ceil(8);
        let r = Rule1d::composite(-quad.half_width, quad.half_width, panels, 8);
        CharacteristicTensor::from_scaled(d, &hermite::scaled_moments_2d(&w, d, &r, &r))
    };
    let coarse = moments(quad.nodes_per_axis);
    let fine = moments(quad.nodes_per_axis * 3 / 2);
    let mut drift = 0.0f64;
    let mut report = CommensurabilityReport { max_relative_error: 0.0, worst: (0, 0), integral: fine.get(0, 0) };
    for m in 0..=d {
        for n in 0..=d {
            let denom = tensor.get(m, n).abs().max(1.0);
            let g = fine.get(m, n) / fine.get(0, 0);
            drift = drift.max((g - coarse.get(m, n) / coarse.get(0, 0)).abs() / denom);
            let err = (g - tensor.get(m, n)).abs() / denom;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = (m, n);
            }
        }
    }
    if drift > 1e-9 {
        return Err(OqcvError::NotConverged {
            last: report.max_relative_error,
            previous: report.max_relative_error - drift,
            error: drift,
            tolerance: 1e-9,
            nodes: quad.nodes_per_axis * 3 / 2,
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// Both conditions hold within tolerance: `W` is an ordinary joint probability.
    MrCompatible,
    /// A condition fails but `W` stays non-negative on the scan grid.
    SignalingNonnegative,
    /// `W` dips below `-tolerance` somewhere.
    Negative,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::MrCompatible => "MR_COMPATIBLE",
            Verdict::SignalingNonnegative => "SIGNALING_NONNEGATIVE",
            Verdict::Negative => "NEGATIVE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelClassification {
    /// `∫|p2 - ∫dx1 joint| dx2`.
    pub nsit_deficit_norm: f64,
    /// `∫|p1 - ∫dx2 joint| dx1`.
    pub aot_deficit_norm: f64,
    pub min_oqcv: f64,
    pub argmin: (f64, f64),
    pub verdict: Verdict,
}

/// Deficit norms and the grid minimum of `W`, with the resulting verdict.
pub fn classify(probs: &SettingProbabilities, tolerance: f64) -> ModelClassification {
    let d = probs.domain;
    let r1 = Rule1d::composite(d.x1.0, d.x1.1, 64, 8);
    let r2 = Rule1d::composite(d.x2.0, d.x2.1, 64, 8);
    let aot = r1.integrate(|x| (probs.p1(x) - probs.joint_marginal_1(x)).abs());
    let nsit = r2.integrate(|x| (probs.p2(x) - probs.joint_marginal_2(x)).abs());

    let steps = 400;
    let mut min = f64::INFINITY;
    let mut argmin = (0.0, 0.0);
    for i in 0..=steps {
        let x1 = d.x1.0 + (d.x1.1 - d.x1.0) * i as f64 / steps as f64;
        for j in 0..=steps {
            let x2 = d.x2.0 + (d.x2.1 - d.x2.0) * j as f64 / steps as f64;
            let v = probs.oqcv(x1, x2);
            if v < min {
                min = v;
                argmin = (x1, x2);
            }
        }
    }
    let verdict = if min < -tolerance {
        Verdict::Negative
    } else if nsit < tolerance && aot < tolerance {
        Verdict::MrCompatible
    } else {
        Verdict::SignalingNonnegative
    };
    ModelClassification { nsit_deficit_norm: nsit, aot_deficit_norm: aot, min_oqcv: min, argmin, verdict }
}
