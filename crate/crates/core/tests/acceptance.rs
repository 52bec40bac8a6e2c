//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

mod common;

use oqcv::circuit::{collapse_fidelity, scheme_distribution};
use oqcv::engine::{classify, commensurability_check, gamma_moments, oqcv_series, Verdict, DEFAULT_TOLERANCE};
use oqcv::hermite::{TensorQuadrature, DEFAULT_MAX_DEGREE};
use oqcv::heterodyne::{
    coherent_bracket, heterodyne_commensurability, heterodyne_gamma, marginal_support, oqcv_slice, oqcv_value,
    GridSpec,
};
use oqcv::negativity::{negativity, negativity_sweep, thermal_asymptotics, NegativityOptions, SymmetryReduction};
use oqcv::quadrature::{integrate_2d, Rule1d};
use oqcv::sampling::{analytic_bin_average, empirical_oqcv, nsit_signature, sample_second_only, sample_sequential, Binning};
use oqcv::states::{amplitude_for_mean_photon, husimi_q, PFunctionMixture, PhasePoint, State, StateFamily};
use std::f64::consts::SQRT_2;
use std::time::Instant;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_vacuum() -> Outcome {
    let t = Instant::now();
    let r = negativity(&State::Vacuum, 1e-3).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    check(
        (r.value - 0.145420).abs() <= 2e-3 && r.symmetry_reduction == SymmetryReduction::Azimuthal && secs <= 120.0,
        format!("N = {:.6} ± {:.1e} ({:?}, {} nodes, {secs:.2} s)", r.value, r.error_estimate, r.symmetry_reduction, r.nodes_per_axis),
    )
}

fn c2_coherent() -> Outcome {
    let t = Instant::now();
    let table = negativity_sweep(StateFamily::Coherent, &[1.0, 5.0, 10.0, 20.0, 30.0], &NegativityOptions::with_tolerance(1e-3))
        .map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    if !table.all_ok() {
        return Err(format!("sweep rows failed: {:?}", table.rows.iter().filter_map(|r| r.error.clone()).collect::<Vec<_>>()));
    }
    let v: Vec<f64> = table.values().iter().map(|r| r.1).collect();
    let nondecreasing = v.windows(2).all(|w| w[1] >= w[0]);
    let flat = (v[4] - v[3]).abs() <= 2e-3;
    let n20 = (v[3] - 0.250045).abs() <= 2e-3;
    check(
        nondecreasing && flat && n20 && secs <= 1800.0,
        format!("N(1,5,10,20,30) = {v:.5?}, |N20 - 0.250045| = {:.2e} ({secs:.1} s)", (v[3] - 0.250045).abs()),
    )
}

fn c3_thermal() -> Outcome {
    let table = negativity_sweep(StateFamily::Thermal, &[0.0, 1.0, 2.0, 5.0, 10.0, 20.0], &NegativityOptions::with_tolerance(1e-4))
        .map_err(|e| e.to_string())?;
    let v: Vec<f64> = table.values().iter().map(|r| r.1).collect();
    let decreasing = table.all_ok() && v.windows(2).all(|w| w[1] < w[0]);
    let probes = [(PhasePoint::new(1.0, 0.0), PhasePoint::new(0.0, 1.0))];
    let asym = thermal_asymptotics(&[50.0, 100.0, 200.0, 400.0], &probes).map_err(|e| e.to_string())?;
    let (sj, ss) = asym.slopes[0];
    check(
        decreasing && (sj + 1.0).abs() <= 0.1 && (ss + 2.0).abs() <= 0.1,
        format!("N = {v:.5?}; slopes joint {sj:.4}, signaling {ss:.4}"),
    )
}

fn c4_cats() -> Outcome {
    let opts = NegativityOptions::with_tolerance(1e-3);
    let plus = negativity(&amplitude_for_mean_photon(StateFamily::CatPlus, 10.0).map_err(|e| e.to_string())?, opts.tolerance)
        .map_err(|e| e.to_string())?;
    let minus = negativity(&amplitude_for_mean_photon(StateFamily::CatMinus, 10.0).map_err(|e| e.to_string())?, opts.tolerance)
        .map_err(|e| e.to_string())?;
    check(
        (plus.value - minus.value).abs() <= 5e-3,
        format!("N(cat+) = {:.6}, N(cat-) = {:.6}", plus.value, minus.value),
    )
}

fn c5_structure() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    // normalization and α-marginality of the heterodyne W
    let ra = Rule1d::composite(-7.0, 7.0, 7, 8);
    let mut worst_norm = 0.0f64;
    let mut worst_marg = 0.0f64;
    for st in [State::Vacuum, State::Number { n: 2 }, State::coherent(0.8, -0.3), State::cat_plus(1.2, 0.0)] {
        let b = marginal_support(&st);
        let (bx, by) = (Rule1d::composite(b.re.0, b.re.1, 7, 8), Rule1d::composite(b.im.0, b.im.1, 7, 8));
        let total = integrate_2d(&ra, &ra, |ar, ai| {
            let a = PhasePoint::new(ar, ai);
            integrate_2d(&bx, &by, |br, bi| oqcv_value(&st, a, PhasePoint::new(br, bi)))
        });
        worst_norm = worst_norm.max((total - 1.0).abs());
        let fine = Rule1d::composite(-7.5, 7.5, 20, 10);
        for k in 0..8 {
            let beta = PhasePoint::from_polar(0.4 * k as f64, 0.9 * k as f64);
            let m = integrate_2d(&fine, &fine, |x, y| oqcv_value(&st, PhasePoint::new(x, y), beta));
            worst_marg = worst_marg.max((m - husimi_q(&st, beta)).abs());
        }
    }
    ok &= worst_norm < 1e-5 && worst_marg < 1e-6;
    notes.push(format!("|∫W - 1| ≤ {worst_norm:.1e}, marginality ≤ {worst_marg:.1e}"));

    // commensurability: generic engine to degree 4, heterodyne to degree 2 per axis
    let mut worst_comm = 0.0f64;
    for g in [common::signaling_toy()].into_iter().chain(common::ensemble(5, 3)) {
        let p = g.probs();
        let t = gamma_moments(&p, 4).map_err(|e| e.to_string())?;
        let rep = commensurability_check(|a, b| p.oqcv(a, b), &t, 4, &TensorQuadrature::default()).map_err(|e| e.to_string())?;
        worst_comm = worst_comm.max(rep.max_relative_error);
    }
    for st in [State::Vacuum, State::coherent(0.7, 0.2)] {
        let gamma = heterodyne_gamma(&st, 2, 64).map_err(|e| e.to_string())?;
        let rep = heterodyne_commensurability(&st, &gamma, 64).map_err(|e| e.to_string())?;
        worst_comm = worst_comm.max(rep.max_relative_error);
    }
    ok &= worst_comm < 1e-6;
    notes.push(format!("commensurability ≤ {worst_comm:.1e}"));

    // series against the closed form at degree 40
    let mut worst_series = 0.0f64;
    for g in [common::signaling_toy()].into_iter().chain(common::ensemble(3, 6)) {
        let p = g.probs();
        let t = gamma_moments(&p, DEFAULT_MAX_DEGREE).map_err(|e| e.to_string())?;
        for i in 0..13 {
            for j in 0..13 {
                let (x1, x2) = (-3.0 + 0.5 * i as f64, -3.0 + 0.5 * j as f64);
                worst_series = worst_series.max((oqcv_series(&t, x1, x2) - p.oqcv(x1, x2)).abs());
            }
        }
    }
    ok &= worst_series < 1e-4;
    notes.push(format!("series vs closed form ≤ {worst_series:.1e}"));
    check(ok, notes.join("; "))
}

fn c6_classification() -> Outcome {
    let mut counts = [0usize; 3];
    let mut ok = true;
    for g in common::ensemble(2024, 30) {
        let p = g.probs();
        let c = classify(&p, DEFAULT_TOLERANCE);
        if g.is_product() {
            ok &= c.verdict == Verdict::MrCompatible;
            let (x1, x2) = (0.3, -0.8);
            ok &= (p.oqcv(x1, x2) - p.joint(x1, x2)).abs() < 1e-8;
        }
        if c.verdict == Verdict::Negative {
            ok &= c.nsit_deficit_norm > DEFAULT_TOLERANCE;
        }
        counts[c.verdict as usize] += 1;
    }
    let constructed = classify(&common::shifted_signaling(1e-3).probs(), DEFAULT_TOLERANCE);
    ok &= constructed.verdict == Verdict::SignalingNonnegative && counts[2] > 0;
    check(
        ok,
        format!(
            "ensemble verdicts MR/SN/NEG = {counts:?}; constructed case {} (NSIT deficit {:.2e}, min W {:.2e})",
            constructed.verdict, constructed.nsit_deficit_norm, constructed.min_oqcv
        ),
    )
}

fn c7_bracket() -> Outcome {
    let w = PhasePoint::new(0.6, -0.2);
    let at = |d: f64| coherent_bracket(w, w + PhasePoint::new(d, 0.0));
    let t_of = |d: f64| (-0.5 * d * d).exp();
    // scan the distance |β - w|, then refine the bracketing cell
    let step = 1e-3;
    let grid: Vec<f64> = (0..=4000).map(|k| k as f64 * step).collect();
    let k0 = grid.windows(2).position(|p| at(p[0]) >= 0.0 && at(p[1]) < 0.0).ok_or("no sign change")?;
    let (mut lo, mut hi) = (grid[k0], grid[k0 + 1]);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if at(mid) >= 0.0 {
            lo = mid
        } else {
            hi = mid
        }
    }
    let t_zero = t_of(0.5 * (lo + hi));
    let kmin = (0..grid.len()).min_by(|&a, &b| at(grid[a]).total_cmp(&at(grid[b]))).unwrap();
    let (mut a, mut b) = (grid[kmin.saturating_sub(1)], grid[(kmin + 1).min(grid.len() - 1)]);
    for _ in 0..100 {
        let (m1, m2) = (a + (b - a) / 3.0, b - (b - a) / 3.0);
        if at(m1) < at(m2) {
            b = m2
        } else {
            a = m1
        }
    }
    let d_min = 0.5 * (a + b);
    let t_min = t_of(d_min);
    let min_val = at(d_min);
    check(
        (t_zero - 0.5).abs() < 1e-6 && (t_min - 0.25).abs() < 1e-6 && (min_val + 1.0 / (16.0 * std::f64::consts::PI)).abs() < 1e-12,
        format!("zero at t = {t_zero:.9}, minimum {min_val:.9} at t = {t_min:.9}"),
    )
}

fn c8_sampler() -> Outcome {
    let st = State::coherent(1.0, 0.0);
    let binning = Binning::for_state(&st);
    let seq = sample_sequential(&st, 1_000_000, 11).map_err(|e| e.to_string())?;
    let m2 = sample_second_only(&st, 1_000_000, 12).map_err(|e| e.to_string())?;
    let w = empirical_oqcv(&seq, &m2, binning).map_err(|e| e.to_string())?;
    let reference = analytic_bin_average(&st, binning).map_err(|e| e.to_string())?;
    let tv = w.total_variation(&reference);
    let chi = nsit_signature(&seq, &m2, binning).map_err(|e| e.to_string())?;
    let small = |threads: usize| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let s = sample_sequential(&st, 50_000, 11).unwrap();
            let m = sample_second_only(&st, 50_000, 12).unwrap();
            let e = empirical_oqcv(&s, &m, Binning { bins: 16, width: 0.75, center: st.center() }).unwrap();
            (s, m, e)
        })
    };
    let reproducible = small(1) == small(3);
    let prefix_matches = seq.alphas[..50_000] == small(2).0.alphas[..];
    check(
        tv < 0.02 && chi.z > 5.0 && reproducible && prefix_matches,
        format!("TV = {tv:.4}, NSIT χ² z = {:.0} (dof {}), reproducible across threads: {reproducible}", chi.z, chi.dof),
    )
}

fn c9_scheme() -> Outcome {
    let inputs = [
        (State::Vacuum, PFunctionMixture::CoherentPoint(PhasePoint::ORIGIN)),
        (State::coherent(0.9, -0.4), PFunctionMixture::CoherentPoint(PhasePoint::new(0.9, -0.4))),
        (State::Thermal { nbar: 1.7 }, PFunctionMixture::Thermal { nbar: 1.7 }),
    ];
    let mut worst = 0.0f64;
    let mut worst_norm = 0.0f64;
    for (st, mix) in &inputs {
        for i in 0..21 {
            for j in 0..21 {
                let (x, p) = (-2.0 + 0.2 * i as f64, -2.0 + 0.2 * j as f64);
                let v = scheme_distribution(mix, x, p).map_err(|e| e.to_string())?;
                worst = worst.max((v - 2.0 * husimi_q(st, PhasePoint::new(SQRT_2 * x, SQRT_2 * p))).abs());
            }
        }
        let r = Rule1d::composite(-7.0, 7.0, 16, 10);
        let z = integrate_2d(&r, &r, |x, p| scheme_distribution(mix, x, p).unwrap());
        worst_norm = worst_norm.max((z - 1.0).abs());
    }
    let dbs = [0.0, 3.0, 10.0, 20.0, 40.0, 60.0];
    let f: Vec<f64> = dbs.iter().map(|&db| collapse_fidelity(0.3, -0.2, db).unwrap()).collect();
    let monotone = f.windows(2).all(|w| w[1] >= w[0]);
    check(
        worst < 1e-10 && worst_norm < 1e-8 && monotone && f[5] > 0.9999 && f[0] < 1.0,
        format!("max |P - 2Q(√2μ)| = {worst:.1e}, |∫P - 1| = {worst_norm:.1e}; fidelity over {dbs:?} dB = {f:.8?}"),
    )
}

fn c10_slices() -> Outcome {
    let st = State::Number { n: 2 };
    let grid = GridSpec::square(PhasePoint::ORIGIN, 4.0, 101);
    let s0 = oqcv_slice(&st, PhasePoint::ORIGIN, grid).map_err(|e| e.to_string())?;
    // negative annulus: a ring negative at every angle outside a ring positive at every angle
    let ring_sign = |r: f64| -> i32 {
        let v: Vec<f64> = (0..16)
            .map(|j| oqcv_value(&st, PhasePoint::ORIGIN, PhasePoint::from_polar(r, j as f64 * std::f64::consts::PI / 8.0)))
            .collect();
        if v.iter().all(|&x| x > 0.0) {
            1
        } else if v.iter().all(|&x| x < 0.0) {
            -1
        } else {
            0
        }
    };
    let signs: Vec<i32> = (1..=40).map(|k| ring_sign(0.1 * k as f64)).collect();
    let first_positive = signs.iter().position(|&s| s == 1);
    let ring_negative = first_positive.is_some_and(|k| signs[k..].contains(&-1));
    let annulus_start = first_positive.and_then(|k| signs[k..].iter().position(|&s| s == -1).map(|j| 0.1 * (k + j + 1) as f64));
    let annulus = annulus_start.map_or("none".to_string(), |r| format!("{r:.1}"));
    let centre = oqcv_value(&st, PhasePoint::ORIGIN, PhasePoint::ORIGIN);
    let s1 = oqcv_slice(&st, PhasePoint::new(1.0, 1.0), grid).map_err(|e| e.to_string())?;
    let arg = s1.argmax();
    let dist = arg.dist_sqr(PhasePoint::new(1.0, 1.0)).sqrt();
    check(
        s0.min() < 0.0 && ring_negative && dist <= 0.5,
        format!(
            "α=0: min {:.4e}, W(0,0) = {centre:.4e}, negative annulus from |β| ≈ {annulus}; α=(1,1): argmax ({arg}) at distance {dist:.3}",
            s0.min()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("vacuum negativity", c1_vacuum),
        ("coherent saturation", c2_coherent),
        ("thermal trend and asymptotics", c3_thermal),
        ("cat equality", c4_cats),
        ("structural invariants", c5_structure),
        ("classification logic", c6_classification),
        ("coherent bracket", c7_bracket),
        ("sampler fidelity", c8_sampler),
        ("scheme identity", c9_scheme),
        ("number-state slices", c10_slices),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let out = f();
        let secs = t.elapsed().as_secs_f64();
        match out {
            Ok(d) => println!("PASS criterion {:>2} ({name}): {d} [{secs:.1} s]", k + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {:>2} ({name}): {d} [{secs:.1} s]", k + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
