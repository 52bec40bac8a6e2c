//! Gaussian model of the double-homodyne heterodyne scheme.
//!
//! Quadratures are ordered `(x_0, p_0, x_1, p_1, ...)` with `x = (a + a†)/√2`,
//! so the vacuum has variance 1/2 per quadrature and `|μ⟩` has mean
//! `√2 (Re μ, Im μ)`.
//!
//! The circuit has four modes: the input, a vacuum port, and two ancillas
//! squeezed in `x` and in `p`. Beam splitters `(0,1)`, `(0,2)` and `(1,3)`
//! route the input; `x` is read on mode 0 and `p` on mode 1. The ancilla
//! outputs meet on a last beam splitter and the conditional state is the
//! port left after projecting the other one onto vacuum (its detector did
//! not click). With ideal ancillas the outcome density is `2Q(√2μ)` and the
//! conditional state is `|μ⟩`; finite squeezing gives a measurable gap.

use crate::error::{OqcvError, Result};
use crate::states::{PFunctionMixture, PhasePoint};
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use std::f64::consts::{PI, SQRT_2};

/// Means and covariances of a set of bosonic modes.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCircuitState {
    pub labels: Vec<String>,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

/// Symplectic form `Ω = ⊕ [[0, 1], [-1, 0]]`.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        o[(2 * k, 2 * k + 1)] = 1.0;
        o[(2 * k + 1, 2 * k)] = -1.0;
    }
    o
}

/// 50:50 beam splitter: `out_i = (a_i - a_j)/√2`, `out_j = (a_i + a_j)/√2`.
pub fn beam_splitter_matrix(modes: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut s = DMatrix::identity(2 * modes, 2 * modes);
    let h = 1.0 / SQRT_2;
    for q in 0..2 {
        let (a, b) = (2 * i + q, 2 * j + q);
        s[(a, a)] = h;
        s[(a, b)] = -h;
        s[(b, a)] = h;
        s[(b, b)] = h;
    }
    s
}

impl GaussianCircuitState {
    pub fn vacuum(labels: &[&str]) -> Self {
        let n = labels.len();
        GaussianCircuitState {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            mean: DVector::zeros(2 * n),
            cov: DMatrix::identity(2 * n, 2 * n) * 0.5,
        }
    }

    pub fn modes(&self) -> usize {
        self.labels.len()
    }

    fn mode_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| OqcvError::invalid(format!("no mode '{label}'")))
    }

    /// Replace a mode (assumed uncorrelated with the rest) by the given mean and covariance.
    pub fn set_mode(&mut self, label: &str, mean: Vector2<f64>, cov: Matrix2<f64>) -> Result<()> {
        let k = self.mode_index(label)?;
        for r in 0..2 {
            self.mean[2 * k + r] = mean[r];
            for c in 0..2 {
                self.cov[(2 * k + r, 2 * k + c)] = cov[(r, c)];
            }
        }
        Ok(())
    }

    /// Apply a symplectic map to all modes.
    pub fn apply(&mut self, s: &DMatrix<f64>) {
        self.mean = s * &self.mean;
        self.cov = s * &self.cov * s.transpose();
    }

    pub fn beam_splitter(&mut self, a: &str, b: &str) -> Result<()> {
        let (i, j) = (self.mode_index(a)?, self.mode_index(b)?);
        let s = beam_splitter_matrix(self.modes(), i, j);
        self.apply(&s);
        Ok(())
    }

    fn remove_mode(&mut self, k: usize) {
        let keep: Vec<usize> = (0..2 * self.modes()).filter(|&q| q / 2 != k).collect();
        self.mean = DVector::from_iterator(keep.len(), keep.iter().map(|&q| self.mean[q]));
        self.cov = DMatrix::from_fn(keep.len(), keep.len(), |r, c| self.cov[(keep[r], keep[c])]);
        self.labels.remove(k);
    }

    /// Condition on reading `value` for quadrature `quad` (0 = x, 1 = p) of a mode, then discard it.
    ///
    /// Returns the probability density of that reading.
    pub fn homodyne(&mut self, label: &str, quad: usize, value: f64) -> Result<f64> {
        let k = self.mode_index(label)?;
        let idx = 2 * k + quad;
        let s = self.cov[(idx, idx)];
        if !(s > 0.0) {
            return Err(OqcvError::invalid("homodyne on a quadrature with zero variance"));
        }
        let dev = value - self.mean[idx];
        let density = (-0.5 * dev * dev / s).exp() / (2.0 * PI * s).sqrt();
        let c = self.cov.column(idx).clone_owned();
        self.cov -= &c * c.transpose() / s;
        self.mean += &c * (dev / s);
        self.remove_mode(k);
        Ok(density)
    }

    /// Condition a mode on being found in vacuum, then discard it.
    ///
    /// Returns the projection probability `⟨0|ϱ_k|0⟩` for a single-mode marginal.
    pub fn project_vacuum(&mut self, label: &str) -> Result<f64> {
        let k = self.mode_index(label)?;
        let b = [2 * k, 2 * k + 1];
        let sb = Matrix2::from_fn(|r, c| self.cov[(b[r], b[c])]);
        let db = Vector2::new(self.mean[b[0]], self.mean[b[1]]);
        let m = sb + Matrix2::identity() * 0.5;
        let inv = m.try_inverse().ok_or_else(|| OqcvError::invalid("singular vacuum projection"))?;
        let prob = (-0.5 * db.dot(&(inv * db))).exp() / m.determinant().sqrt();
        let n = 2 * self.modes();
        let sab = DMatrix::from_fn(n, 2, |r, c| self.cov[(r, b[c])]);
        let inv_d = DMatrix::from_fn(2, 2, |r, c| inv[(r, c)]);
        self.cov -= &sab * &inv_d * sab.transpose();
        self.mean -= &sab * (&inv_d * DVector::from_column_slice(db.as_slice()));
        self.remove_mode(k);
        Ok(prob)
    }

    /// Single-mode mean and covariance.
    pub fn mode(&self, label: &str) -> Result<(Vector2<f64>, Matrix2<f64>)> {
        let k = self.mode_index(label)?;
        Ok((
            Vector2::new(self.mean[2 * k], self.mean[2 * k + 1]),
            Matrix2::from_fn(|r, c| self.cov[(2 * k + r, 2 * k + c)]),
        ))
    }

    /// Mean and covariance of an arbitrary set of quadratures `(mode, quad)`.
    pub fn quadratures(&self, picks: &[(&str, usize)]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let idx = picks
            .iter()
            .map(|(l, q)| self.mode_index(l).map(|k| 2 * k + q))
            .collect::<Result<Vec<_>>>()?;
        Ok((
            DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i])),
            DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.cov[(idx[r], idx[c])]),
        ))
    }

    /// Symmetric, and every symplectic eigenvalue at least 1/2.
    pub fn is_physical(&self, tol: f64) -> bool {
        let n = self.cov.nrows();
        if (&self.cov - self.cov.transpose()).amax() > tol {
            return false;
        }
        let o = symplectic_form(self.modes());
        let m = &o * &self.cov;
        let sq = -(&m * &m);
        sq.complex_eigenvalues().iter().all(|z| z.re.max(0.0).sqrt() >= 0.5 - tol) && n == 2 * self.modes()
    }
}

/// Fidelity of a single-mode Gaussian state with the coherent state `|μ⟩`.
pub fn coherent_fidelity(mean: Vector2<f64>, cov: Matrix2<f64>, mu: PhasePoint) -> f64 {
    let m = cov + Matrix2::identity() * 0.5;
    let d = mean - Vector2::new(SQRT_2 * mu.re, SQRT_2 * mu.im);
    let inv = m.try_inverse().expect("covariance plus vacuum is invertible");
    (-0.5 * d.dot(&(inv * d))).exp() / m.determinant().sqrt()
}

pub const MODE_LABELS: [&str; 4] = ["input", "vacuum", "ancilla_x", "ancilla_p"];

/// The four-mode circuit prepared with a Gaussian input and ancillas squeezed by `squeezing_db`.
///
/// `None` squeezing means ideal ancillas (zero variance in the read quadrature).
pub fn scheme_circuit(input_mean: Vector2<f64>, input_cov: Matrix2<f64>, squeezing_db: Option<f64>) -> GaussianCircuitState {
    let mut st = GaussianCircuitState::vacuum(&MODE_LABELS);
    let (lo, hi) = match squeezing_db {
        Some(db) => {
            let e = 10f64.powf(db / 10.0);
            (0.5 / e, 0.5 * e)
        }
        None => (0.0, f64::INFINITY),
    };
    st.set_mode("input", input_mean, input_cov).expect("mode exists");
    let hi = if hi.is_finite() { hi } else { 0.5 };
    st.set_mode("ancilla_x", Vector2::zeros(), Matrix2::new(lo, 0.0, 0.0, hi)).expect("mode exists");
    st.set_mode("ancilla_p", Vector2::zeros(), Matrix2::new(hi, 0.0, 0.0, lo)).expect("mode exists");
    st.beam_splitter("input", "vacuum").expect("modes exist");
    st.beam_splitter("input", "ancilla_x").expect("modes exist");
    st.beam_splitter("vacuum", "ancilla_p").expect("modes exist");
    st
}

/// Run the conditional part of the scheme on a given input and return the output's fidelity with `|x + ip⟩`.
pub fn collapse_fidelity_with_input(input: PhasePoint, x: f64, p: f64, squeezing_db: f64) -> Result<f64> {
    if !(squeezing_db.is_finite() && squeezing_db >= 0.0) {
        return Err(OqcvError::invalid(format!("ancilla squeezing {squeezing_db} dB must be >= 0")));
    }
    let mean = Vector2::new(SQRT_2 * input.re, SQRT_2 * input.im);
    let mut st = scheme_circuit(mean, Matrix2::identity() * 0.5, Some(squeezing_db));
    st.homodyne("input", 0, x)?;
    st.homodyne("vacuum", 1, p)?;
    st.beam_splitter("ancilla_x", "ancilla_p")?;
    // ancilla_x now holds (a_x - a_p)/√2, watched by the detector that must stay dark
    st.project_vacuum("ancilla_x")?;
    let (m, c) = st.mode("ancilla_p")?;
    Ok(coherent_fidelity(m, c, PhasePoint::new(x, p)).clamp(0.0, 1.0))
}

/// Fidelity of the post-measurement state with `|x + ip⟩` for a vacuum input.
pub fn collapse_fidelity(x: f64, p: f64, squeezing_db: f64) -> Result<f64> {
    collapse_fidelity_with_input(PhasePoint::ORIGIN, x, p, squeezing_db)
}

/// Outcome density of the ideal circuit for one Gaussian input.
fn gaussian_outcome_density(mean: Vector2<f64>, cov: Matrix2<f64>, x: f64, p: f64) -> f64 {
    let st = scheme_circuit(mean, cov, None);
    let (m, c) = st.quadratures(&[("input", 0), ("vacuum", 1)]).expect("modes exist");
    let c = Matrix2::from_fn(|r, k| c[(r, k)]);
    let d = Vector2::new(x - m[0], p - m[1]);
    let inv = c.try_inverse().expect("read-out covariance is positive definite");
    (-0.5 * d.dot(&(inv * d))).exp() / (2.0 * PI * c.determinant().sqrt())
}

/// Density of the two homodyne readings `(x, p)` for an input given by its P function.
///
/// Each coherent component (or the thermal Gaussian) is propagated
/// through the ideal circuit and the read-out quadratures' Gaussian density
/// is evaluated, without reference to `Q`.
pub fn scheme_distribution(input: &PFunctionMixture, x: f64, p: f64) -> Result<f64> {
    input.validate()?;
    let coherent = |w: PhasePoint| {
        gaussian_outcome_density(Vector2::new(SQRT_2 * w.re, SQRT_2 * w.im), Matrix2::identity() * 0.5, x, p)
    };
    Ok(match input {
        PFunctionMixture::CoherentPoint(w) => coherent(*w),
        PFunctionMixture::Thermal { nbar } => {
            gaussian_outcome_density(Vector2::zeros(), Matrix2::identity() * (nbar + 0.5), x, p)
        }
        PFunctionMixture::Discrete(c) => c.iter().map(|c| c.weight * coherent(c.amplitude())).sum(),
    })
}
