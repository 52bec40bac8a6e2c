use oqcv::quadrature::Rule1d;
use oqcv::sampling::{
    analytic_bin_average, empirical_oqcv, sample_second_only, sample_sequential, sampling_radius, Binning, SampleBatch,
};
use oqcv::states::{husimi_q, PhasePoint, State};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::PI;

/// CDF of `|α|²` for a phase-symmetric state, from radial integration of `Q`.
struct RadialCdf {
    u: Vec<f64>,
    cdf: Vec<f64>,
}

impl RadialCdf {
    fn new(state: &State, u_max: f64) -> Self {
        // density of u = |α|² is π Q(√u)
        let n = 4000;
        let mut u = vec![0.0];
        let mut cdf = vec![0.0];
        let h = u_max / n as f64;
        for k in 0..n {
            let r = Rule1d::gauss_legendre(k as f64 * h, (k + 1) as f64 * h, 6);
            let m = r.integrate(|x| PI * husimi_q(state, PhasePoint::new(x.sqrt(), 0.0)));
            u.push((k + 1) as f64 * h);
            cdf.push(cdf[k] + m);
        }
        let total = *cdf.last().unwrap();
        RadialCdf { u, cdf: cdf.into_iter().map(|c| c / total).collect() }
    }

    fn inverse(&self, p: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c < p).clamp(1, self.u.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let t = if c1 > c0 { (p - c0) / (c1 - c0) } else { 0.0 };
        self.u[k - 1] + t * (self.u[k] - self.u[k - 1])
    }
}

fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    d
}

#[test]
fn identical_across_thread_counts() {
    let st = State::Number { n: 1 };
    let run = |threads: usize| -> (SampleBatch, SampleBatch, Vec<f64>) {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let s = sample_sequential(&st, 30_000, 99).unwrap();
            let m = sample_second_only(&st, 30_000, 99).unwrap();
            let w = empirical_oqcv(&s, &m, Binning { bins: 12, width: 1.0, center: PhasePoint::ORIGIN }).unwrap();
            (s, m, w.values)
        })
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert!(a.2.iter().zip(&b.2).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn frozen_seed_map() {
    // the (seed → batch) map is part of the output contract
    let b = sample_sequential(&State::Vacuum, 3, 2024).unwrap();
    let frozen = [
        (0.06212383893921839, 0.6185084995697645),
        (0.04295594595920242, -1.3073730320443187),
        (0.5064177468051679, -0.7330444790209403),
        (0.8721533497534228, 1.8969842932734977),
        (0.7986851924858909, -2.652505900066136),
        (0.17270046002188838, 0.17589435143309318),
    ];
    let got: Vec<(f64, f64)> = b.alphas.iter().chain(&b.betas).map(|p| (p.re, p.im)).collect();
    assert_eq!(got, frozen);
}

#[test]
fn second_outcome_moments_for_a_coherent_state() {
    let b = sample_sequential(&State::coherent(1.0, 0.0), 1_000_000, 5).unwrap();
    let n = b.count as f64;
    let (mr, mi) = b.betas.iter().fold((0.0, 0.0), |(r, i), p| (r + p.re, i + p.im));
    let (mr, mi) = (mr / n, mi / n);
    // each axis: variance 1/2 from Q plus 1/2 from the second step
    let sigma = (1.0 / n).sqrt();
    assert!((mr - 1.0).abs() < 3.0 * sigma, "{mr}");
    assert!(mi.abs() < 3.0 * sigma, "{mi}");
    let vr = b.betas.iter().map(|p| (p.re - mr).powi(2)).sum::<f64>() / (n - 1.0);
    let vi = b.betas.iter().map(|p| (p.im - mi).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((vr - 1.0).abs() < 0.02 && (vi - 1.0).abs() < 0.02, "{vr} {vi}");
}

#[test]
fn number_two_radial_chi_square() {
    let st = State::Number { n: 2 };
    let r = sampling_radius(&st);
    let cdf = RadialCdf::new(&st, r * r);
    let b = sample_sequential(&st, 100_000, 17).unwrap();
    // 50 equiprobable bins in |α|²
    let edges: Vec<f64> = (1..50).map(|k| cdf.inverse(k as f64 / 50.0)).collect();
    let mut counts = [0f64; 50];
    for a in &b.alphas {
        counts[edges.partition_point(|&e| e < a.norm_sqr())] += 1.0;
    }
    let expect = b.count as f64 / 50.0;
    let chi2: f64 = counts.iter().map(|c| (c - expect).powi(2) / expect).sum();
    let p = 1.0 - ChiSquared::new(49.0).unwrap().cdf(chi2);
    assert!(p > 1e-3, "χ² = {chi2}, p = {p}");
}

#[test]
fn rejection_matches_inverse_cdf_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(31337);
    for (k, st) in [State::Vacuum, State::Number { n: 2 }, State::Thermal { nbar: 1.5 }].into_iter().enumerate() {
        let r = sampling_radius(&st);
        let cdf = RadialCdf::new(&st, r * r);
        let n = 20_000;
        let b = sample_second_only(&st, n, 40 + k as u64).unwrap();
        let direct: Vec<f64> = (0..n).map(|_| cdf.inverse(rng.random::<f64>())).collect();
        let d = ks_statistic(b.alphas.iter().map(|a| a.norm_sqr()).collect(), direct);
        // two-sample critical value at level 1e-3
        let crit = (-0.5 * (0.5e-3f64).ln()).sqrt() * (2.0 / n as f64).sqrt();
        assert!(d < crit, "{st}: D = {d} ≥ {crit}");
    }
}

#[test]
fn standard_errors_scale_with_sample_size() {
    let st = State::coherent(1.0, 0.0);
    let binning = Binning { bins: 16, width: 0.75, center: st.center() };
    let est = |n: usize| {
        let s = sample_sequential(&st, n, 1).unwrap();
        let m = sample_second_only(&st, n, 2).unwrap();
        empirical_oqcv(&s, &m, binning).unwrap()
    };
    let (small, large) = (est(200_000), est(400_000));
    let cells: Vec<usize> = (0..small.values.len()).filter(|&k| small.counts_joint[k] >= 20).collect();
    let mean = |w: &oqcv::sampling::EmpiricalW| cells.iter().map(|&k| w.stderr[k]).sum::<f64>() / cells.len() as f64;
    let ratio = mean(&large) / mean(&small);
    assert!((ratio - 0.5f64.sqrt()).abs() < 0.1 * 0.5f64.sqrt(), "{ratio}");
}

#[test]
fn number_two_sign_pattern_at_the_origin_slice() {
    let st = State::Number { n: 2 };
    let binning = Binning::for_state(&st);
    let s = sample_sequential(&st, 1_000_000, 8).unwrap();
    let m = sample_second_only(&st, 1_000_000, 9).unwrap();
    let w = empirical_oqcv(&s, &m, binning).unwrap();
    let origin_bins = binning.bins_touching(PhasePoint::ORIGIN);
    assert_eq!(origin_bins.len(), 4);
    let (values, stderr) = w.aggregate_alpha(&origin_bins);
    let analytic = analytic_bin_average(&st, binning).unwrap();
    let b2 = binning.bins * binning.bins;
    let (mut checked, mut negative) = (0, 0);
    for ib in 0..b2 {
        let an: f64 = origin_bins.iter().map(|&a| analytic[a * b2 + ib]).sum::<f64>() / origin_bins.len() as f64;
        if values[ib].abs() > 3.0 * stderr[ib] && an.abs() > 1e-6 {
            checked += 1;
            assert_eq!(values[ib] < 0.0, an < 0.0, "β bin {ib}: {} ± {} vs {an}", values[ib], stderr[ib]);
            if an < 0.0 {
                negative += 1;
            }
        }
    }
    assert!(checked > 10 && negative > 0, "{checked} checked, {negative} negative");
}
