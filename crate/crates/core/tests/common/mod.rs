//! Shared generators for the engine tests.
#![allow(dead_code)]

use oqcv::engine::{DomainHint, SettingProbabilities};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::sync::Arc;

pub fn normal(mean: f64, sd: f64) -> impl Fn(f64) -> f64 + Send + Sync + Copy {
    move |x| (-(x - mean).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * PI).sqrt())
}

/// One Gaussian two-time experiment: `x1 ~ N(m1, s1²)`, `x2 | x1 ~ N(a + b·x1, s²)`.
///
/// `p2` is the M2-alone density; `None` uses the joint's own marginal (no signaling).
#[derive(Debug, Clone, Copy)]
pub struct GaussianMarkov {
    pub m1: f64,
    pub s1: f64,
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub p2: Option<(f64, f64)>,
}

impl GaussianMarkov {
    pub fn probs(&self) -> SettingProbabilities {
        let GaussianMarkov { m1, s1, a, b, s, p2 } = *self;
        let (m2, s2) = p2.unwrap_or((a + b * m1, (s * s + b * b * s1 * s1).sqrt()));
        let f1 = normal(m1, s1);
        let cond = normal(0.0, s);
        SettingProbabilities::new(
            Arc::new(f1),
            Arc::new(normal(m2, s2)),
            Arc::new(move |x1, x2| f1(x1) * cond(x2 - a - b * x1)),
            DomainHint::default(),
        )
        .expect("ensemble member is normalized")
    }

    pub fn is_product(&self) -> bool {
        self.b == 0.0 && self.p2.is_none()
    }
}

/// Random members: a third no-signaling products, a third correlated without
/// signaling, a third with an undisturbed `p2 = N(m1-ish, 1)` that signals.
pub fn ensemble(seed: u64, count: usize) -> Vec<GaussianMarkov> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|k| {
            let m1 = rng.random_range(-1.0..1.0);
            let s1 = rng.random_range(0.7..1.3);
            let a = rng.random_range(-0.5..0.5);
            let s = rng.random_range(0.6..1.2);
            match k % 3 {
                0 => GaussianMarkov { m1, s1, a, b: 0.0, s, p2: None },
                1 => GaussianMarkov { m1, s1, a, b: rng.random_range(-0.8..0.8), s, p2: None },
                _ => {
                    let b = rng.random_range(-0.8..0.8);
                    GaussianMarkov { m1, s1, a, b, s, p2: Some((a + b * m1, rng.random_range(0.7..1.3))) }
                }
            }
        })
        .collect()
}

/// Mean shift `ε` on the second outcome with the M2-alone density left at `N(0, 1)`.
///
/// `W` reduces to `φ(x1)φ(x2)` exactly, so it is non-negative while NSIT fails by `O(ε)`.
pub fn shifted_signaling(eps: f64) -> GaussianMarkov {
    GaussianMarkov { m1: 0.0, s1: 1.0, a: eps, b: 0.0, s: 1.0, p2: Some((0.0, 1.0)) }
}

/// `x2 = x1/2 + z`, observed against an undisturbed standard normal.
pub fn signaling_toy() -> GaussianMarkov {
    GaussianMarkov { m1: 0.0, s1: 1.0, a: 0.0, b: 0.5, s: 1.0, p2: Some((0.0, 1.0)) }
}
