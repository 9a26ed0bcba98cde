use std::sync::Arc;

use gfsim_core::cellsystem::{KillPlacement, TreeEngine, TreeResolution, TruncationPolicy};
use gfsim_core::cumulant::StableFamily;
use gfsim_core::lamperti::StopRule;
use gfsim_core::levy::{LevySampler, SamplerOptions, SmallJumps, SpineSign};
use gfsim_core::rng::StreamSeed;
use gfsim_core::spine::*;
use gfsim_core::stats::{cauchy_stable, EstimateWithCI};

fn engine() -> SpineEngine {
    SpineEngine::new(1.5, 2e-2, SamplerOptions::default(), StopRule { level_floor: -16.0, ..StopRule::default() })
        .unwrap()
}

#[test]
fn plus_spine_grows_and_has_the_tilted_mean() {
    let e = engine();
    let mut cfg = SpineConfig::new(SpineSign::Plus, 1.5, 1.0);
    cfg.horizon = 10.0;
    let seed = StreamSeed::new(1, "plus");
    let above = (0..400).filter(|&i| e.simulate(&cfg, &mut seed.replica(i)).terminal_value() > 1.0).count();
    assert!(above > 200, "{above}");
    let inc: Vec<f64> =
        (0..20_000).map(|i| e.plus.sample_path(1.0, &mut seed.child("inc").replica(i)).endpoint()).collect();
    let est = EstimateWithCI::from_samples(&inc);
    let target = std::f64::consts::PI.sqrt() / 2.0;
    assert!(est.z_score(target).abs() < 3.0, "{est:?} vs {target}");
}

#[test]
fn empirical_laplace_exponents_match_shifted_cumulants() {
    let fam = StableFamily::new(1.5).unwrap();
    let opts =
        SamplerOptions { small_jumps: SmallJumps::Gaussian, gaussian_step: 1.0 / 64.0, ..SamplerOptions::default() };
    for (sign, omega) in [(SpineSign::Minus, fam.omega_minus()), (SpineSign::Plus, fam.omega_plus())] {
        let mut t = fam.spine_triplet(sign).unwrap();
        t.jumps = t.jumps.with_cutoff(2e-2).unwrap();
        let s = LevySampler::new(&t, opts).unwrap();
        let seed = StreamSeed::new(2, "laplace");
        let ends: Vec<f64> = (0..100_000).map(|i| s.sample_path(1.0, &mut seed.replica(i)).endpoint()).collect();
        for q in [0.25, 0.5] {
            let v: Vec<f64> = ends.iter().map(|x| (q * x).exp()).collect();
            let est = EstimateWithCI::from_samples(&v);
            let target = fam.kappa(omega + q).unwrap().exp();
            assert!(est.z_score(target).abs() < 3.0, "{sign:?} q={q}: {est:?} vs {target}");
        }
    }
}

#[test]
fn absorption_and_transience() {
    let e = engine();
    let seed = StreamSeed::new(3, "abs");
    for i in 0..1000 {
        let i_val = e.sample_i(&mut seed.replica(i));
        assert!(i_val.is_finite() && i_val > 0.0);
    }
    let p = prob_i_leq(&e, 1e3, 2000, seed.child("large"));
    assert!(p.mean > 0.99, "{p:?}");
    let below = |h: f64| {
        let mut cfg = SpineConfig::new(SpineSign::Plus, 1.5, 1.0);
        cfg.horizon = h;
        (0..2000).filter(|&i| e.simulate(&cfg, &mut seed.child("plus").replica(i)).terminal_value() < 1.0).count()
    };
    let (a, b, c) = (below(0.5), below(2.0), below(8.0));
    assert!(a > b && b > c, "{a} {b} {c}");
}

#[test]
fn prob_i_leq_is_reproducible_across_worker_counts() {
    let e = engine();
    let seed = StreamSeed::new(4, "det");
    let one =
        rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| prob_i_leq(&e, 0.3, 4000, seed));
    let three =
        rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| prob_i_leq(&e, 0.3, 4000, seed));
    assert_eq!(one, three);
}

#[test]
fn area_from_zero_is_finite_and_stable() {
    let e = engine();
    let pool = Arc::new(IDistribution::simulate(&e, 20_000, StreamSeed::new(5, "pool")));
    let params = StableFamily::new(1.5).unwrap().params().unwrap();
    let trees = TreeEngine::new(&params, TreeResolution::default(), KillPlacement::Smeared(pool.clone())).unwrap();
    let pol = TruncationPolicy { x_min: 0.05, ..TruncationPolicy::default() };
    let seed = StreamSeed::new(5, "p0");
    let v: Vec<f64> = (0..2000)
        .map(|i| {
            let s = seed.child_index(i);
            area_under_p0plus(
                &e,
                &trees,
                &pool,
                1.0,
                &pol,
                &P0PlusOptions::default(),
                s.child("trees"),
                &mut s.replica(0),
            )
            .unwrap()
        })
        .collect();
    assert!(v.iter().all(|x| x.is_finite() && *x >= 0.0));
    assert!(cauchy_stable(&v, 4.0));
}
