//! Single-mode light states with closed-form Husimi Q functions.
//!
//! `Q(α) = π⁻¹⟨α|ϱ|α⟩` is a density per unit `d²α = dα_r dα_i`. Closed
//! forms used here:
//!
//! | family            | `π·Q(α)`                                                        |
//! |-------------------|-----------------------------------------------------------------|
//! | coherent `w`      | `exp(-|α-w|²)`                                                  |
//! | number `n`        | `exp(-|α|²) |α|^{2n} / n!`                                      |
//! | squeezed `r, θ`   | `sech r · exp(-|α|² - tanh r · Re(e^{iθ} α*²))`                 |
//! | cat± `w`          | `4 exp(-|α|²-|w|²) |cosh/sinh(α* w)|² / A±²`                    |
//! | thermal `n̄`       | `exp(-|α|²/(n̄+1)) / (n̄+1)`                                      |
//!
//! with `A±² = 2 ± 2 exp(-2|w|²)`. The minus cat normalization is
//! evaluated through `expm1`, and states with `|w| < 1e-8` must use the
//! explicit single-photon limit [`State::OddCatLimit`].

use crate::error::{OqcvError, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// Below this amplitude the minus cat is rejected in favour of its limit.
pub const CAT_MINUS_MIN_AMPLITUDE: f64 = 1e-8;

/// A point of phase space, `α = re + i·im`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhasePoint {
    pub re: f64,
    pub im: f64,
}

impl PhasePoint {
    pub const ORIGIN: PhasePoint = PhasePoint { re: 0.0, im: 0.0 };

    pub const fn new(re: f64, im: f64) -> Self {
        PhasePoint { re, im }
    }

    pub fn from_polar(r: f64, theta: f64) -> Self {
        PhasePoint::new(r * theta.cos(), r * theta.sin())
    }

    pub fn norm_sqr(self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn norm(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn conj(self) -> Self {
        PhasePoint::new(self.re, -self.im)
    }

    pub fn scale(self, s: f64) -> Self {
        PhasePoint::new(self.re * s, self.im * s)
    }

    /// Multiply by `e^{iθ}`.
    pub fn rotate(self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        PhasePoint::new(c * self.re - s * self.im, s * self.re + c * self.im)
    }

    pub fn dist_sqr(self, other: PhasePoint) -> f64 {
        (self - other).norm_sqr()
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    /// Complex product `self* · other`, returned as `(re, im)`.
    fn conj_mul(self, other: PhasePoint) -> (f64, f64) {
        (
            self.re * other.re + self.im * other.im,
            self.re * other.im - self.im * other.re,
        )
    }
}

impl std::ops::Add for PhasePoint {
    type Output = PhasePoint;
    fn add(self, o: PhasePoint) -> PhasePoint {
        PhasePoint::new(self.re + o.re, self.im + o.im)
    }
}

impl std::ops::Sub for PhasePoint {
    type Output = PhasePoint;
    fn sub(self, o: PhasePoint) -> PhasePoint {
        PhasePoint::new(self.re - o.re, self.im - o.im)
    }
}

impl std::ops::Neg for PhasePoint {
    type Output = PhasePoint;
    fn neg(self) -> PhasePoint {
        PhasePoint::new(-self.re, -self.im)
    }
}

impl fmt::Display for PhasePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.re, self.im)
    }
}

impl FromStr for PhasePoint {
    type Err = OqcvError;
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(',');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(OqcvError::invalid(format!("expected 're,im', got '{s}'")));
        };
        let p = PhasePoint::new(parse_f64(a)?, parse_f64(b)?);
        if !p.is_finite() {
            return Err(OqcvError::invalid(format!("non-finite phase point '{s}'")));
        }
        Ok(p)
    }
}

/// An unreadable mixture is a bad state spec.
fn bad_pmix(spec: &str, e: OqcvError) -> OqcvError {
    match e {
        OqcvError::Io(m) | OqcvError::Serde(m) => OqcvError::invalid(format!("state '{spec}': {m}")),
        other => other,
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| OqcvError::invalid(format!("not a number: '{s}'")))
}

/// `|⟨α|β⟩|² = exp(-|α-β|²)`.
pub fn coherent_overlap(alpha: PhasePoint, beta: PhasePoint) -> f64 {
    (-alpha.dist_sqr(beta)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CatParity {
    Plus,
    Minus,
}

/// One weighted coherent component of a discrete P-function mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub w_re: f64,
    pub w_im: f64,
    pub weight: f64,
}

impl MixtureComponent {
    pub fn amplitude(&self) -> PhasePoint {
        PhasePoint::new(self.w_re, self.w_im)
    }
}

/// A regular, non-negative Glauber–Sudarshan P function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PFunctionMixture {
    /// `P(w) = exp(-|w|²/n̄)/(π n̄)`; `n̄ = 0` is the vacuum point mass.
    Thermal { nbar: f64 },
    /// `δ²(w - w0)`.
    CoherentPoint(PhasePoint),
    /// Finite weighted sum of point masses.
    Discrete(Vec<MixtureComponent>),
}

impl PFunctionMixture {
    pub fn discrete(components: Vec<MixtureComponent>) -> Result<Self> {
        let m = PFunctionMixture::Discrete(components);
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PFunctionMixture::Thermal { nbar } => {
                if !(nbar.is_finite() && *nbar >= 0.0) {
                    return Err(OqcvError::invalid(format!("thermal mean {nbar} must be finite and >= 0")));
                }
            }
            PFunctionMixture::CoherentPoint(w) => {
                if !w.is_finite() {
                    return Err(OqcvError::invalid("non-finite coherent amplitude"));
                }
            }
            PFunctionMixture::Discrete(c) => {
                if c.is_empty() {
                    return Err(OqcvError::invalid("empty P-function mixture"));
                }
                let mut total = 0.0;
                for comp in c {
                    if !(comp.weight.is_finite() && comp.weight >= 0.0) || !comp.amplitude().is_finite() {
                        return Err(OqcvError::invalid(format!("bad mixture component {comp:?}")));
                    }
                    total += comp.weight;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(OqcvError::invalid(format!("mixture weights sum to {total}, expected 1")));
                }
            }
        }
        Ok(())
    }

    /// Parse the JSON list form `[{"w_re":..,"w_im":..,"weight":..}, ...]`.
    pub fn from_json(text: &str) -> Result<Self> {
        let comps: Vec<MixtureComponent> = serde_json::from_str(text)?;
        Self::discrete(comps)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| OqcvError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }

    /// Components as a weighted list when the mixture is atomic.
    pub fn atoms(&self) -> Option<Vec<(PhasePoint, f64)>> {
        match self {
            PFunctionMixture::Thermal { nbar } if *nbar == 0.0 => Some(vec![(PhasePoint::ORIGIN, 1.0)]),
            PFunctionMixture::Thermal { .. } => None,
            PFunctionMixture::CoherentPoint(w) => Some(vec![(*w, 1.0)]),
            PFunctionMixture::Discrete(c) => Some(c.iter().map(|c| (c.amplitude(), c.weight)).collect()),
        }
    }
}

/// One of the catalogued light states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum State {
    Vacuum,
    Coherent { w: PhasePoint },
    Number { n: u32 },
    /// Squeezed vacuum `S(r e^{iθ})|0⟩`; `theta = 0` squeezes the real quadrature.
    SqueezedVacuum { r: f64, theta: f64 },
    Cat { w: PhasePoint, parity: CatParity },
    /// The `|w| → 0` limit of the minus cat, which is the single-photon state.
    OddCatLimit,
    Thermal { nbar: f64 },
    PMixture(PFunctionMixture),
}

/// State families addressable by mean photon number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateFamily {
    Vacuum,
    Coherent,
    Number,
    SqueezedVacuum,
    CatPlus,
    CatMinus,
    Thermal,
}

impl StateFamily {
    pub fn name(self) -> &'static str {
        match self {
            StateFamily::Vacuum => "vacuum",
            StateFamily::Coherent => "coherent",
            StateFamily::Number => "number",
            StateFamily::SqueezedVacuum => "squeezed",
            StateFamily::CatPlus => "cat+",
            StateFamily::CatMinus => "cat-",
            StateFamily::Thermal => "thermal",
        }
    }
}

impl fmt::Display for StateFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StateFamily {
    type Err = OqcvError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "vacuum" => StateFamily::Vacuum,
            "coherent" => StateFamily::Coherent,
            "number" => StateFamily::Number,
            "squeezed" | "squeezed_vacuum" => StateFamily::SqueezedVacuum,
            "cat+" | "cat_plus" => StateFamily::CatPlus,
            "cat-" | "cat_minus" => StateFamily::CatMinus,
            "thermal" => StateFamily::Thermal,
            other => return Err(OqcvError::invalid(format!("unknown state family '{other}'"))),
        })
    }
}

impl State {
    pub fn coherent(re: f64, im: f64) -> Self {
        State::Coherent { w: PhasePoint::new(re, im) }
    }

    pub fn squeezed(r: f64) -> Self {
        State::SqueezedVacuum { r, theta: 0.0 }
    }

    pub fn cat_plus(re: f64, im: f64) -> Self {
        State::Cat { w: PhasePoint::new(re, im), parity: CatParity::Plus }
    }

    pub fn cat_minus(re: f64, im: f64) -> Self {
        State::Cat { w: PhasePoint::new(re, im), parity: CatParity::Minus }
    }

    /// Check parameter domains; every evaluation entry point relies on this.
    pub fn validate(&self) -> Result<()> {
        match self {
            State::Vacuum | State::OddCatLimit | State::Number { .. } => Ok(()),
            State::Coherent { w } if w.is_finite() => Ok(()),
            State::Coherent { .. } => Err(OqcvError::invalid("coherent amplitude must be finite")),
            State::SqueezedVacuum { r, theta } => {
                if r.is_finite() && *r >= 0.0 && theta.is_finite() {
                    Ok(())
                } else {
                    Err(OqcvError::invalid(format!("squeezing r={r} must be finite and >= 0")))
                }
            }
            State::Cat { w, parity } => {
                if !w.is_finite() {
                    return Err(OqcvError::invalid("cat amplitude must be finite"));
                }
                if *parity == CatParity::Minus && w.norm() < CAT_MINUS_MIN_AMPLITUDE {
                    return Err(OqcvError::invalid(format!(
                        "minus cat with |w| = {} < {CAT_MINUS_MIN_AMPLITUDE}; use the explicit limit 'cat-:limit'",
                        w.norm()
                    )));
                }
                Ok(())
            }
            State::Thermal { nbar } => {
                if nbar.is_finite() && *nbar >= 0.0 {
                    Ok(())
                } else {
                    Err(OqcvError::invalid(format!("thermal mean {nbar} must be finite and >= 0")))
                }
            }
            State::PMixture(m) => m.validate(),
        }
    }

    /// Parse the state grammar; `pmix:@file` paths resolve against the working directory.
    pub fn parse_spec(spec: &str) -> Result<Self> {
        Self::parse_spec_in(spec, Path::new("."))
    }

    /// Parse the state grammar resolving `pmix:@file` against `base`.
    pub fn parse_spec_in(spec: &str, base: &Path) -> Result<Self> {
        let spec = spec.trim();
        let (head, arg) = match spec.split_once(':') {
            Some((h, a)) => (h, Some(a.trim())),
            None => (spec, None),
        };
        let need = |what: &str| -> Result<&str> {
            arg.filter(|a| !a.is_empty())
                .ok_or_else(|| OqcvError::invalid(format!("state '{head}' needs {what}")))
        };
        let state = match head {
            "vacuum" => {
                if arg.is_some() {
                    return Err(OqcvError::invalid("vacuum takes no parameters"));
                }
                State::Vacuum
            }
            "coherent" => State::Coherent { w: need("w_re,w_im")?.parse()? },
            "number" => {
                let a = need("a photon number")?;
                let n = a
                    .parse::<u32>()
                    .map_err(|_| OqcvError::invalid(format!("photon number must be a non-negative integer, got '{a}'")))?;
                State::Number { n }
            }
            "squeezed" => {
                let a = need("r")?;
                match a.split_once(',') {
                    Some((r, t)) => State::SqueezedVacuum { r: parse_f64(r)?, theta: parse_f64(t)? },
                    None => State::SqueezedVacuum { r: parse_f64(a)?, theta: 0.0 },
                }
            }
            "cat+" => State::Cat { w: need("w_re,w_im")?.parse()?, parity: CatParity::Plus },
            "cat-" => {
                let a = need("w_re,w_im")?;
                if a == "limit" {
                    State::OddCatLimit
                } else {
                    State::Cat { w: a.parse()?, parity: CatParity::Minus }
                }
            }
            "thermal" => State::Thermal { nbar: parse_f64(need("nbar")?)? },
            "pmix" => {
                let a = need("@file.json or an inline JSON list")?;
                if let Some(path) = a.strip_prefix('@') {
                    State::PMixture(PFunctionMixture::from_json_file(base.join(path)).map_err(|e| bad_pmix(spec, e))?)
                } else if a.starts_with('[') {
                    State::PMixture(PFunctionMixture::from_json(a).map_err(|e| bad_pmix(spec, e))?)
                } else {
                    return Err(OqcvError::invalid("pmix expects '@file.json' or '[...]'"));
                }
            }
            other => return Err(OqcvError::invalid(format!("unknown state '{other}'"))),
        };
        state.validate()?;
        Ok(state)
    }

    pub fn family(&self) -> Option<StateFamily> {
        Some(match self {
            State::Vacuum => StateFamily::Vacuum,
            State::Coherent { .. } => StateFamily::Coherent,
            State::Number { .. } => StateFamily::Number,
            State::SqueezedVacuum { .. } => StateFamily::SqueezedVacuum,
            State::Cat { parity: CatParity::Plus, .. } => StateFamily::CatPlus,
            State::Cat { parity: CatParity::Minus, .. } | State::OddCatLimit => StateFamily::CatMinus,
            State::Thermal { .. } => StateFamily::Thermal,
            State::PMixture(_) => return None,
        })
    }

    /// Invariant under `α → e^{iφ}α` for every `φ`.
    pub fn is_phase_symmetric(&self) -> bool {
        match self {
            State::Vacuum | State::Number { .. } | State::Thermal { .. } | State::OddCatLimit => true,
            State::Coherent { w } => w.norm_sqr() == 0.0,
            State::Cat { w, parity: CatParity::Plus } => w.norm_sqr() == 0.0,
            State::SqueezedVacuum { r, .. } => *r == 0.0,
            State::PMixture(PFunctionMixture::Thermal { .. }) => true,
            State::PMixture(PFunctionMixture::CoherentPoint(w)) => w.norm_sqr() == 0.0,
            State::PMixture(PFunctionMixture::Discrete(c)) => c.iter().all(|c| c.amplitude().norm_sqr() == 0.0),
            State::Cat { .. } => false,
        }
    }

    /// Invariant under complex conjugation `α → α*`.
    pub fn is_conjugation_symmetric(&self) -> bool {
        match self {
            State::Coherent { w } | State::Cat { w, .. } => w.im == 0.0,
            State::SqueezedVacuum { theta, .. } => *theta == 0.0,
            State::PMixture(PFunctionMixture::CoherentPoint(w)) => w.im == 0.0,
            State::PMixture(PFunctionMixture::Discrete(c)) => c.iter().all(|c| c.w_im == 0.0),
            _ => true,
        }
    }

    /// Centre of the Q function (its mean amplitude).
    pub fn center(&self) -> PhasePoint {
        match self {
            State::Coherent { w } | State::PMixture(PFunctionMixture::CoherentPoint(w)) => *w,
            State::PMixture(PFunctionMixture::Discrete(c)) => c
                .iter()
                .fold(PhasePoint::ORIGIN, |acc, c| acc + c.amplitude().scale(c.weight)),
            _ => PhasePoint::ORIGIN,
        }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            State::Vacuum => write!(f, "vacuum"),
            State::Coherent { w } => write!(f, "coherent:{w}"),
            State::Number { n } => write!(f, "number:{n}"),
            State::SqueezedVacuum { r, theta } if *theta == 0.0 => write!(f, "squeezed:{r}"),
            State::SqueezedVacuum { r, theta } => write!(f, "squeezed:{r},{theta}"),
            State::Cat { w, parity: CatParity::Plus } => write!(f, "cat+:{w}"),
            State::Cat { w, parity: CatParity::Minus } => write!(f, "cat-:{w}"),
            State::OddCatLimit => write!(f, "cat-:limit"),
            State::Thermal { nbar } => write!(f, "thermal:{nbar}"),
            State::PMixture(PFunctionMixture::Thermal { nbar }) => write!(f, "thermal:{nbar}"),
            State::PMixture(PFunctionMixture::CoherentPoint(w)) => write!(f, "coherent:{w}"),
            State::PMixture(PFunctionMixture::Discrete(c)) => {
                let json = serde_json::to_string(c).map_err(|_| fmt::Error)?;
                write!(f, "pmix:{json}")
            }
        }
    }
}

impl FromStr for State {
    type Err = OqcvError;
    fn from_str(s: &str) -> Result<Self> {
        State::parse_spec(s)
    }
}

/// `ln(sinh²u + c²)` without overflow for large `|u|`.
fn ln_sinh2_plus(u: f64, c2: f64) -> f64 {
    let a = u.abs();
    if a < 20.0 {
        (a.sinh().powi(2) + c2).ln()
    } else {
        2.0 * a - 4f64.ln()
    }
}

/// `ln A±²` for the cat normalization.
fn ln_cat_norm(w: PhasePoint, parity: CatParity) -> f64 {
    let x = -2.0 * w.norm_sqr();
    match parity {
        CatParity::Plus => (2.0 + 2.0 * x.exp()).ln(),
        CatParity::Minus => (-2.0 * x.exp_m1()).ln(),
    }
}

fn ln_factorial(n: u32) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Natural log of the Husimi Q density; `-inf` where `Q = 0`.
pub fn ln_husimi_q(state: &State, alpha: PhasePoint) -> f64 {
    let a2 = alpha.norm_sqr();
    let ln_pi = PI.ln();
    match state {
        State::Vacuum => -a2 - ln_pi,
        State::Coherent { w } => -alpha.dist_sqr(*w) - ln_pi,
        State::Number { n } => {
            if *n == 0 {
                -a2 - ln_pi
            } else if a2 == 0.0 {
                f64::NEG_INFINITY
            } else {
                -a2 + *n as f64 * a2.ln() - ln_factorial(*n) - ln_pi
            }
        }
        State::OddCatLimit => ln_husimi_q(&State::Number { n: 1 }, alpha),
        State::SqueezedVacuum { r, theta } => {
            let t = r.tanh();
            // Re(e^{iθ} α*²)
            let (s, c) = theta.sin_cos();
            let re_a2 = alpha.re * alpha.re - alpha.im * alpha.im;
            let im_a2 = -2.0 * alpha.re * alpha.im;
            let quad = c * re_a2 - s * im_a2;
            -r.cosh().ln() - a2 - t * quad - ln_pi
        }
        State::Cat { w, parity } => {
            let (u, v) = alpha.conj_mul(*w);
            let c2 = match parity {
                CatParity::Plus => v.cos().powi(2),
                CatParity::Minus => v.sin().powi(2),
            };
            let body = ln_sinh2_plus(u, c2);
            4f64.ln() - a2 - w.norm_sqr() + body - ln_cat_norm(*w, *parity) - ln_pi
        }
        State::Thermal { nbar } => -a2 / (nbar + 1.0) - (nbar + 1.0).ln() - ln_pi,
        State::PMixture(m) => match m {
            PFunctionMixture::Thermal { nbar } => ln_husimi_q(&State::Thermal { nbar: *nbar }, alpha),
            PFunctionMixture::CoherentPoint(w) => -alpha.dist_sqr(*w) - ln_pi,
            PFunctionMixture::Discrete(c) => {
                let logs: Vec<f64> = c
                    .iter()
                    .filter(|c| c.weight > 0.0)
                    .map(|c| c.weight.ln() - alpha.dist_sqr(c.amplitude()))
                    .collect();
                log_sum_exp(&logs) - ln_pi
            }
        },
    }
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `Q(α) = π⁻¹⟨α|ϱ|α⟩`.
pub fn husimi_q(state: &State, alpha: PhasePoint) -> f64 {
    match state {
        State::Vacuum => (-alpha.norm_sqr()).exp() / PI,
        State::Coherent { w } | State::PMixture(PFunctionMixture::CoherentPoint(w)) => {
            (-alpha.dist_sqr(*w)).exp() / PI
        }
        State::Thermal { nbar } | State::PMixture(PFunctionMixture::Thermal { nbar }) => {
            (-alpha.norm_sqr() / (nbar + 1.0)).exp() / (PI * (nbar + 1.0))
        }
        State::PMixture(PFunctionMixture::Discrete(c)) => {
            c.iter().map(|c| c.weight * (-alpha.dist_sqr(c.amplitude())).exp()).sum::<f64>() / PI
        }
        _ => ln_husimi_q(state, alpha).exp(),
    }
}

/// Closed-form mean photon number `⟨n̂⟩`.
pub fn mean_photon(state: &State) -> f64 {
    match state {
        State::Vacuum => 0.0,
        State::Coherent { w } => w.norm_sqr(),
        State::Number { n } => *n as f64,
        State::SqueezedVacuum { r, .. } => r.sinh().powi(2),
        State::Cat { w, parity } => {
            let x = w.norm_sqr();
            match parity {
                CatParity::Plus => x * x.tanh(),
                CatParity::Minus => x_coth_x(x),
            }
        }
        State::OddCatLimit => 1.0,
        State::Thermal { nbar } => *nbar,
        State::PMixture(m) => match m {
            PFunctionMixture::Thermal { nbar } => *nbar,
            PFunctionMixture::CoherentPoint(w) => w.norm_sqr(),
            PFunctionMixture::Discrete(c) => c.iter().map(|c| c.weight * c.amplitude().norm_sqr()).sum(),
        },
    }
}

fn x_coth_x(x: f64) -> f64 {
    if x < 1e-6 {
        1.0 + x * x / 3.0
    } else {
        x / x.tanh()
    }
}

/// Invert a monotone increasing `f` on `[lo, hi]` by bisection.
fn bisect(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// A state of the given family with `mean_photon == nbar` (phases fixed to zero).
pub fn amplitude_for_mean_photon(family: StateFamily, nbar: f64) -> Result<State> {
    let infeasible = |reason: &str| OqcvError::Infeasible {
        family: family.name().to_string(),
        nbar,
        reason: reason.to_string(),
    };
    if !(nbar.is_finite() && nbar >= 0.0) {
        return Err(infeasible("mean photon number must be finite and >= 0"));
    }
    let state = match family {
        StateFamily::Vacuum => {
            if nbar != 0.0 {
                return Err(infeasible("vacuum has n̄ = 0"));
            }
            State::Vacuum
        }
        StateFamily::Coherent => State::coherent(nbar.sqrt(), 0.0),
        StateFamily::Number => {
            if nbar.fract() != 0.0 || nbar > u32::MAX as f64 {
                return Err(infeasible("number states need an integral n̄"));
            }
            State::Number { n: nbar as u32 }
        }
        StateFamily::SqueezedVacuum => State::squeezed(nbar.sqrt().asinh()),
        StateFamily::Thermal => State::Thermal { nbar },
        StateFamily::CatPlus => {
            let x = bisect(|x| x * x.tanh(), nbar, 0.0, nbar + 1.0);
            State::cat_plus(x.sqrt(), 0.0)
        }
        StateFamily::CatMinus => {
            if nbar < 1.0 {
                return Err(infeasible("the minus cat has n̄ = |w|²coth|w|² >= 1"));
            }
            let x = bisect(x_coth_x, nbar, 0.0, nbar + 1.0);
            if x.sqrt() < CAT_MINUS_MIN_AMPLITUDE {
                State::OddCatLimit
            } else {
                State::cat_minus(x.sqrt(), 0.0)
            }
        }
    };
    let got = mean_photon(&state);
    if (got - nbar).abs() > 1e-10 * nbar.max(1.0) {
        return Err(infeasible(&format!("inversion reached only n̄ = {got}")));
    }
    Ok(state)
}

/// The P function of a state, for the families where it is regular and non-negative.
pub fn p_mixture_of(state: &State) -> Result<PFunctionMixture> {
    match state {
        State::Vacuum => Ok(PFunctionMixture::CoherentPoint(PhasePoint::ORIGIN)),
        State::Coherent { w } => Ok(PFunctionMixture::CoherentPoint(*w)),
        State::Thermal { nbar } => Ok(PFunctionMixture::Thermal { nbar: *nbar }),
        State::PMixture(m) => Ok(m.clone()),
        other => Err(OqcvError::NotRepresentable(other.to_string())),
    }
}
