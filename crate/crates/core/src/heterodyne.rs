//! Quasiprobability of a light state in the heterodyne (coherent-state) basis.
//!
//! Both measurements are the POVM `π⁻¹|α⟩⟨α|`, and the first one leaves
//! the field in `|α⟩`. With `Q` the Husimi function,
//!
//! ```text
//! joint(α, β) = Q(α) · π⁻¹ exp(-|α-β|²)
//! P12(β)      = ∫d²α joint(α, β)
//! W(α, β)     = joint(α, β) + (2π)⁻¹ exp(-|α|²/2) [Q(β) - P12(β)]
//! ```
//!
//! The first-measurement correction is absent because integrating the
//! joint over `β` returns `Q(α)` exactly; [`oqcv_value_all_terms`] keeps it
//! and evaluates it numerically as a cross-check.
//!
//! `P12` is `Q` blurred by a Gaussian of variance 1/2 per axis. Closed
//! forms used for each family (`b = |β|²`):
//!
//! * coherent `w`: `exp(-|β-w|²/2) / 2π`
//! * thermal `n̄`: `exp(-b/(n̄+2)) / (π(n̄+2))`
//! * number `n`: `exp(-b/2) L_n(-b/2) / (2^{n+1} π)`
//! * squeezed `r`: Gaussian with per-axis variances `σ² + 1/2`
//! * cat± `w`: `exp(-(b+|w|²)/2) [cosh Re(β*w) ± exp(-|w|²) cos Im(β*w)] / (π A±²)`

use crate::error::{OqcvError, Result};
use crate::hermite::hermite_all;
use crate::quadrature::Rule1d;
use crate::states::{husimi_q, ln_husimi_q, CatParity, PFunctionMixture, PhasePoint, State};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `g(α) = (2π)⁻¹ exp(-|α|²/2)`, the weight of the second-measurement correction.
pub fn signaling_weight(alpha: PhasePoint) -> f64 {
    (-0.5 * alpha.norm_sqr()).exp() / (2.0 * PI)
}

/// `Q(α) · π⁻¹ |⟨α|β⟩|²`, evaluated in log form.
pub fn joint_density(state: &State, alpha: PhasePoint, beta: PhasePoint) -> f64 {
    (ln_husimi_q(state, alpha) - alpha.dist_sqr(beta) - PI.ln()).exp()
}

/// `L_n(x)` by the three-term recurrence.
fn laguerre(n: u32, x: f64) -> f64 {
    let (mut l0, mut l1) = (1.0, 1.0 - x);
    if n == 0 {
        return l0;
    }
    for k in 1..n {
        let kf = k as f64;
        let l2 = ((2.0 * kf + 1.0 - x) * l1 - kf * l0) / (kf + 1.0);
        l0 = l1;
        l1 = l2;
    }
    l1
}

fn gaussian_2d(x: f64, y: f64, var_x: f64, var_y: f64) -> f64 {
    (-0.5 * (x * x / var_x + y * y / var_y)).exp() / (2.0 * PI * (var_x * var_y).sqrt())
}

/// Per-axis variances of a squeezed vacuum's `Q` in its own frame.
fn squeezed_q_variances(r: f64) -> (f64, f64) {
    let t = r.tanh();
    (0.5 / (1.0 + t), 0.5 / (1.0 - t))
}

fn cat_p12(w: PhasePoint, parity: CatParity, beta: PhasePoint) -> f64 {
    let x = w.norm_sqr();
    let u = beta.re * w.re + beta.im * w.im;
    let v = beta.re * w.im - beta.im * w.re;
    let (bracket_ln_extra, bracket) = match parity {
        CatParity::Plus => {
            if u.abs() > 300.0 {
                (u.abs() - 2f64.ln(), 1.0)
            } else {
                (0.0, u.cosh() + (-x).exp() * v.cos())
            }
        }
        CatParity::Minus => {
            if u.abs() > 300.0 {
                (u.abs() - 2f64.ln(), 1.0)
            } else {
                let s = (0.5 * u).sinh();
                let c = (0.5 * v).sin();
                (0.0, 2.0 * s * s + 2.0 * c * c - v.cos() * (-x).exp_m1())
            }
        }
    };
    let norm2 = match parity {
        CatParity::Plus => 2.0 + 2.0 * (-2.0 * x).exp(),
        CatParity::Minus => -2.0 * (-2.0 * x).exp_m1(),
    };
    (-(beta.norm_sqr() + x) / 2.0 + bracket_ln_extra).exp() * bracket / (PI * norm2)
}

/// `∫d²α joint(α, β)`: the second outcome's density when the first measurement happened.
pub fn marginal_after_first(state: &State, beta: PhasePoint) -> f64 {
    match state {
        State::Vacuum => (-0.5 * beta.norm_sqr()).exp() / (2.0 * PI),
        State::Coherent { w } | State::PMixture(PFunctionMixture::CoherentPoint(w)) => {
            (-0.5 * beta.dist_sqr(*w)).exp() / (2.0 * PI)
        }
        State::Thermal { nbar } | State::PMixture(PFunctionMixture::Thermal { nbar }) => {
            (-beta.norm_sqr() / (nbar + 2.0)).exp() / (PI * (nbar + 2.0))
        }
        State::PMixture(PFunctionMixture::Discrete(c)) => c
            .iter()
            .map(|c| c.weight * (-0.5 * beta.dist_sqr(c.amplitude())).exp())
            .sum::<f64>()
            / (2.0 * PI),
        State::Number { n } => {
            let h = 0.5 * beta.norm_sqr();
            // exp(-h) L_n(-h) / 2^{n+1} overflows term by term only for huge n
            (-h - (*n as f64 + 1.0) * 2f64.ln()).exp() * laguerre(*n, -h) / PI
        }
        State::OddCatLimit => marginal_after_first(&State::Number { n: 1 }, beta),
        State::SqueezedVacuum { r, theta } => {
            let b = beta.rotate(-0.5 * theta);
            let (vx, vy) = squeezed_q_variances(*r);
            gaussian_2d(b.re, b.im, vx + 0.5, vy + 0.5)
        }
        State::Cat { w, parity } => cat_p12(*w, *parity, beta),
    }
}

/// Axis-aligned rectangle in phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re: (f64, f64),
    pub im: (f64, f64),
}

impl Rect {
    pub fn centered(c: PhasePoint, half_re: f64, half_im: f64) -> Self {
        Rect { re: (c.re - half_re, c.re + half_re), im: (c.im - half_im, c.im + half_im) }
    }

    pub fn union(self, o: Rect) -> Rect {
        Rect {
            re: (self.re.0.min(o.re.0), self.re.1.max(o.re.1)),
            im: (self.im.0.min(o.im.0), self.im.1.max(o.im.1)),
        }
    }

    pub fn width_re(&self) -> f64 {
        self.re.1 - self.re.0
    }

    pub fn width_im(&self) -> f64 {
        self.im.1 - self.im.0
    }
}

/// A rectangle outside which `Q` (and `P12`) are below roughly `e^{-21}` of their peak.
///
/// `blur` adds the variance-1/2 heterodyne kernel, giving the support of `P12`.
fn support_box(state: &State, blur: bool) -> Rect {
    let k = 6.5;
    let extra = if blur { 0.5 } else { 0.0 };
    let iso = |c: PhasePoint, var: f64| {
        let h = k * (var + extra).sqrt();
        Rect::centered(c, h, h)
    };
    match state {
        State::Vacuum => iso(PhasePoint::ORIGIN, 0.5),
        State::Coherent { w } | State::PMixture(PFunctionMixture::CoherentPoint(w)) => iso(*w, 0.5),
        State::Thermal { nbar } | State::PMixture(PFunctionMixture::Thermal { nbar }) => {
            iso(PhasePoint::ORIGIN, 0.5 * (nbar + 1.0))
        }
        State::PMixture(PFunctionMixture::Discrete(c)) => c
            .iter()
            .map(|c| iso(c.amplitude(), 0.5))
            .reduce(Rect::union)
            .expect("validated mixtures are non-empty"),
        State::Number { n } => {
            let h = (*n as f64 + 1.0).sqrt() + if blur { 6.0 } else { 5.0 };
            Rect::centered(PhasePoint::ORIGIN, h, h)
        }
        State::OddCatLimit => support_box(&State::Number { n: 1 }, blur),
        State::SqueezedVacuum { r, theta } => {
            let (vx, vy) = squeezed_q_variances(*r);
            if *theta == 0.0 {
                Rect::centered(PhasePoint::ORIGIN, k * (vx + extra).sqrt(), k * (vy + extra).sqrt())
            } else {
                iso(PhasePoint::ORIGIN, vy)
            }
        }
        State::Cat { w, .. } => iso(*w, 0.5).union(iso(-*w, 0.5)),
    }
}

/// Support rectangle of `Q`.
pub fn q_support(state: &State) -> Rect {
    support_box(state, false)
}

/// Support rectangle of `P12` (and hence of `Q(β) - P12(β)`).
pub fn marginal_support(state: &State) -> Rect {
    support_box(state, true)
}

/// Radius of a centred disk holding all but about `e^{-21}` of `Q`.
pub fn q_support_radius(state: &State) -> f64 {
    let b = q_support(state);
    [b.re.0, b.re.1, b.im.0, b.im.1].iter().map(|v| v.abs()).fold(0.0, f64::max) * std::f64::consts::SQRT_2
}

/// `P12(β)` by tensor Gauss–Legendre quadrature over `α`, refined until
/// successive node doublings agree to `tol`. Returns `(value, error)`.
pub fn marginal_after_first_quadrature(state: &State, beta: PhasePoint, tol: f64) -> Result<(f64, f64)> {
    let b = q_support(state);
    let integral = |nodes: usize| {
        let panels = nodes / 8;
        let rx = Rule1d::composite(b.re.0, b.re.1, panels, 8);
        let ry = Rule1d::composite(b.im.0, b.im.1, panels, 8);
        crate::quadrature::integrate_2d(&rx, &ry, |x, y| joint_density(state, PhasePoint::new(x, y), beta))
    };
    let mut nodes = 64;
    let mut prev = integral(nodes);
    loop {
        nodes *= 2;
        let cur = integral(nodes);
        let err = (cur - prev).abs();
        if err < tol {
            return Ok((cur, err));
        }
        if nodes >= 1024 {
            return Err(OqcvError::NotConverged { last: cur, previous: prev, error: err, tolerance: tol, nodes });
        }
        prev = cur;
    }
}

/// The two pieces of `W`: `(joint, g(α)·[Q(β) - P12(β)])`.
pub fn oqcv_terms(state: &State, alpha: PhasePoint, beta: PhasePoint) -> (f64, f64) {
    let joint = joint_density(state, alpha, beta);
    let s = husimi_q(state, beta) - marginal_after_first(state, beta);
    (joint, signaling_weight(alpha) * s)
}

/// `W(α, β)` in the heterodyne basis.
pub fn oqcv_value(state: &State, alpha: PhasePoint, beta: PhasePoint) -> f64 {
    let (j, s) = oqcv_terms(state, alpha, beta);
    j + s
}

/// `W` with the first-measurement correction `(2π)⁻¹e^{-|β|²/2}[Q(α) - ∫d²β joint]`
/// computed numerically instead of dropped.
pub fn oqcv_value_all_terms(state: &State, alpha: PhasePoint, beta: PhasePoint) -> f64 {
    // ∫d²β π⁻¹e^{-|α-β|²} on a box around α
    let r = Rule1d::composite(-7.0, 7.0, 16, 8);
    let kernel_mass = r.integrate(|u| (-u * u).exp()).powi(2) / PI;
    let m1 = husimi_q(state, alpha) * kernel_mass;
    let aot = (-0.5 * beta.norm_sqr()).exp() / (2.0 * PI) * (husimi_q(state, alpha) - m1);
    oqcv_value(state, alpha, beta) + aot
}

/// `π⁻¹ t (t - 1/2)` with `t = |⟨β|w⟩| = exp(-|w-β|²/2)`: the coherent-state value of `Q(β) - P12(β)`.
pub fn coherent_bracket(w: PhasePoint, beta: PhasePoint) -> f64 {
    let t = (-0.5 * w.dist_sqr(beta)).exp();
    t * (t - 0.5) / PI
}

/// `W` for a state given by its P function, as the P-weighted average of coherent-state values.
pub fn oqcv_of_mixture(mixture: &PFunctionMixture, alpha: PhasePoint, beta: PhasePoint) -> f64 {
    match mixture {
        // thermal P averages to the thermal state's own closed forms
        PFunctionMixture::Thermal { nbar } => oqcv_value(&State::Thermal { nbar: *nbar }, alpha, beta),
        PFunctionMixture::CoherentPoint(w) => oqcv_value(&State::Coherent { w: *w }, alpha, beta),
        PFunctionMixture::Discrete(c) => c
            .iter()
            .map(|c| c.weight * oqcv_value(&State::Coherent { w: c.amplitude() }, alpha, beta))
            .sum(),
    }
}

/// A rectangular mesh over `β`, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub re: (f64, f64),
    pub im: (f64, f64),
    pub n_re: usize,
    pub n_im: usize,
}

impl GridSpec {
    pub fn square(center: PhasePoint, half_width: f64, n: usize) -> Self {
        GridSpec {
            re: (center.re - half_width, center.re + half_width),
            im: (center.im - half_width, center.im + half_width),
            n_re: n,
            n_im: n,
        }
    }

    /// Centred square of half-width `√n̄ + 6`.
    pub fn covering(state: &State, n: usize) -> Self {
        let h = crate::states::mean_photon(state).sqrt() + 6.0;
        GridSpec::square(PhasePoint::ORIGIN, h, n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_re < 2 || self.n_im < 2 {
            return Err(OqcvError::invalid("slice grid needs at least 2 points per axis"));
        }
        if !(self.re.0 < self.re.1 && self.im.0 < self.im.1) {
            return Err(OqcvError::invalid(format!("empty slice extent {self:?}")));
        }
        Ok(())
    }

    pub fn step_re(&self) -> f64 {
        (self.re.1 - self.re.0) / (self.n_re - 1) as f64
    }

    pub fn step_im(&self) -> f64 {
        (self.im.1 - self.im.0) / (self.n_im - 1) as f64
    }

    pub fn point(&self, i: usize, j: usize) -> PhasePoint {
        PhasePoint::new(self.re.0 + i as f64 * self.step_re(), self.im.0 + j as f64 * self.step_im())
    }
}

/// `W(α, ·)` for a fixed first outcome, sampled on a `β` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OqcvSlice {
    pub state: String,
    pub fixed_alpha: PhasePoint,
    pub grid: GridSpec,
    /// Row-major in `β_re`: `values[i * n_im + j]` sits at `grid.point(i, j)`.
    pub values: Vec<f64>,
}

impl OqcvSlice {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_im + j]
    }

    pub fn iter(&self) -> impl Iterator<Item = (PhasePoint, f64)> + '_ {
        (0..self.grid.n_re)
            .flat_map(move |i| (0..self.grid.n_im).map(move |j| (self.grid.point(i, j), self.value(i, j))))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid point holding the largest value.
    pub fn argmax(&self) -> PhasePoint {
        let (k, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, &v)| if v > best.1 { (k, v) } else { best });
        self.grid.point(k / self.grid.n_im, k % self.grid.n_im)
    }
}

/// Evaluate `W(fixed_alpha, β)` over the grid, in parallel over `β_re` columns.
pub fn oqcv_slice(state: &State, fixed_alpha: PhasePoint, grid: GridSpec) -> Result<OqcvSlice> {
    state.validate()?;
    grid.validate()?;
    let cols: Vec<Vec<f64>> = (0..grid.n_re)
        .into_par_iter()
        .map(|i| (0..grid.n_im).map(|j| oqcv_value(state, fixed_alpha, grid.point(i, j))).collect())
        .collect();
    Ok(OqcvSlice {
        state: state.to_string(),
        fixed_alpha,
        grid,
        values: cols.into_iter().flatten().collect(),
    })
}

/// Four-index Hermite moments `Γ[(p,q),(r,s)]` over `(α_r, α_i, β_r, β_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeterodyneGamma {
    pub degree: usize,
    entries: Vec<f64>,
}

impl HeterodyneGamma {
    fn zeros(degree: usize) -> Self {
        HeterodyneGamma { degree, entries: vec![0.0; (degree + 1).pow(4)] }
    }

    fn index(&self, p: usize, q: usize, r: usize, s: usize) -> usize {
        let k = self.degree + 1;
        ((p * k + q) * k + r) * k + s
    }

    pub fn get(&self, p: usize, q: usize, r: usize, s: usize) -> f64 {
        self.entries[self.index(p, q, r, s)]
    }

    fn add(&mut self, p: usize, q: usize, r: usize, s: usize, v: f64) {
        let i = self.index(p, q, r, s);
        self.entries[i] += v;
    }

    fn indices(degree: usize) -> impl Iterator<Item = [usize; 4]> {
        let k = degree + 1;
        (0..k.pow(4)).map(move |i| [i / (k * k * k), (i / (k * k)) % k, (i / k) % k, i % k])
    }
}

/// `Γ` assembled from the three settings: `Q` alone for rows `(p,q,0,0)` and
/// columns `(0,0,r,s)`, the sequential joint for everything else.
pub fn heterodyne_gamma(state: &State, degree: usize, nodes: usize) -> Result<HeterodyneGamma> {
    state.validate()?;
    let b = q_support(state);
    let panels = nodes.div_ceil(8);
    let rx = Rule1d::composite(b.re.0, b.re.1, panels, 8);
    let ry = Rule1d::composite(b.im.0, b.im.1, panels, 8);
    let inner = Rule1d::composite(-7.0, 7.0, 14, 8);
    // ∫dy He_k(y) e^{-(x-y)²} for one axis
    let kernel_moments = |x: f64| -> Vec<f64> {
        let mut acc = vec![0.0; degree + 1];
        for (u, w) in inner.iter() {
            let h = hermite_all(degree, x + u);
            let e = w * (-u * u).exp();
            for k in 0..=degree {
                acc[k] += e * h[k];
            }
        }
        acc
    };
    let kx: Vec<Vec<f64>> = rx.nodes.iter().map(|&x| kernel_moments(x)).collect();
    let ky: Vec<Vec<f64>> = ry.nodes.iter().map(|&y| kernel_moments(y)).collect();
    let hx: Vec<Vec<f64>> = rx.nodes.iter().map(|&x| hermite_all(degree, x)).collect();
    let hy: Vec<Vec<f64>> = ry.nodes.iter().map(|&y| hermite_all(degree, y)).collect();
    let mut g = HeterodyneGamma::zeros(degree);
    for (i, (x, wx)) in rx.iter().enumerate() {
        for (j, (y, wy)) in ry.iter().enumerate() {
            let q = husimi_q(state, PhasePoint::new(x, y)) * wx * wy;
            if q == 0.0 {
                continue;
            }
            for [p, qq, r, s] in HeterodyneGamma::indices(degree) {
                let v = match ((p, qq) == (0, 0), (r, s) == (0, 0)) {
                    (true, true) => continue,
                    (false, true) => hx[i][p] * hy[j][qq],
                    (true, false) => hx[i][r] * hy[j][s],
                    (false, false) => hx[i][p] * hy[j][qq] * kx[i][r] * ky[j][s] / PI,
                };
                g.add(p, qq, r, s, q * v);
            }
        }
    }
    g.add(0, 0, 0, 0, 1.0);
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeterodyneCommensurability {
    /// `max |Γ'/Γ'_0000 - Γ| / max(|Γ|, 1)`.
    pub max_relative_error: f64,
    pub worst: [usize; 4],
    /// `∫∫∫∫ W`.
    pub integral: f64,
}

/// Integrate `He_p He_q He_r He_s W` directly over the 4D box and compare with `Γ`.
pub fn heterodyne_commensurability(state: &State, gamma: &HeterodyneGamma, nodes: usize) -> Result<HeterodyneCommensurability> {
    let degree = gamma.degree;
    // g(α) is a unit-variance Gaussian at the origin whatever the state
    let a = q_support(state).union(Rect::centered(PhasePoint::ORIGIN, 7.0, 7.0));
    let b = marginal_support(state);
    let panels = nodes.div_ceil(8);
    let ar = Rule1d::composite(a.re.0, a.re.1, panels, 8);
    let ai = Rule1d::composite(a.im.0, a.im.1, panels, 8);
    let br = Rule1d::composite(b.re.0, b.re.1, panels, 8);
    let bi = Rule1d::composite(b.im.0, b.im.1, panels, 8);
    let k = degree + 1;
    let table = |r: &Rule1d| -> Vec<Vec<f64>> { r.iter().map(|(x, w)| hermite_all(degree, x).iter().map(|h| h * w).collect()).collect() };
    let (tar, tai, tbr, tbi) = (table(&ar), table(&ai), table(&br), table(&bi));
    let partial: Vec<Vec<f64>> = (0..ar.len())
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0; k.pow(4)];
            let mut beta_m = vec![0.0; k * k];
            for (j, &y) in ai.nodes.iter().enumerate() {
                let alpha = PhasePoint::new(ar.nodes[i], y);
                beta_m.iter_mut().for_each(|v| *v = 0.0);
                for (u, &br_x) in br.nodes.iter().enumerate() {
                    for (v, &bi_x) in bi.nodes.iter().enumerate() {
                        let w = oqcv_value(state, alpha, PhasePoint::new(br_x, bi_x));
                        for r in 0..k {
                            let t = w * tbr[u][r];
                            for s in 0..k {
                                beta_m[r * k + s] += t * tbi[v][s];
                            }
                        }
                    }
                }
                for p in 0..k {
                    for q in 0..k {
                        let c = tar[i][p] * tai[j][q];
                        for rs in 0..k * k {
                            acc[(p * k + q) * k * k + rs] += c * beta_m[rs];
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut moments = vec![0.0; k.pow(4)];
    for row in &partial {
        for (m, v) in moments.iter_mut().zip(row) {
            *m += v;
        }
    }
    let integral = moments[0];
    let mut rep = HeterodyneCommensurability { max_relative_error: 0.0, worst: [0; 4], integral };
    for idx in HeterodyneGamma::indices(degree) {
        let [p, q, r, s] = idx;
        let want = gamma.get(p, q, r, s);
        let got = moments[((p * k + q) * k + r) * k + s] / integral;
        let err = (got - want).abs() / want.abs().max(1.0);
        if err > rep.max_relative_error {
            rep.max_relative_error = err;
            rep.worst = idx;
        }
    }
    Ok(rep)
}
