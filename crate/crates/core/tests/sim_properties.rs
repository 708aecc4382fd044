use freeknot::mc::{run_replicates, EstimateWithError, McConfig};
use freeknot::sim::{
    extend_path, simulate_brownian_bridge, simulate_diffusion, simulate_integrated_wiener, IwpState, Scheme,
    SdePreset,
};
use freeknot::RngStream;
use proptest::prelude::*;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Sample mean and variance with their standard errors (Gaussian data).
fn mean_var(xs: &[f64]) -> (EstimateWithError, f64, f64) {
    let m = EstimateWithError::from_samples(xs);
    let n = xs.len() as f64;
    let var = xs.iter().map(|x| (x - m.mean).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var, var * (2.0 / (n - 1.0)).sqrt())
}

#[test]
fn integrated_wiener_scaling_in_moments() {
    let n_rep = 10_000;
    let cfg = McConfig { replicates: n_rep, seed: 17, grid_n: 64, ..McConfig::default() };
    for s in 0..=2usize {
        for rho in [0.25, 4.0] {
            // Values at t in {1/2, 1} and at rho t on a grid that contains both.
            let vals = run_replicates(&cfg, s as u64 + 1, |_, rng| {
                let base = simulate_integrated_wiener(s, 64, 1.0, rng)?;
                let scaled = simulate_integrated_wiener(s, 64, rho, rng)?;
                let f = rho.powf(-(s as f64 + 0.5));
                Ok([
                    base.top().values()[32],
                    base.top().values()[64],
                    f * scaled.top().values()[32],
                    f * scaled.top().values()[64],
                ])
            })
            .unwrap();
            for (a, b) in [(0usize, 2usize), (1, 3)] {
                let xa: Vec<f64> = vals.iter().map(|v| v[a]).collect();
                let xb: Vec<f64> = vals.iter().map(|v| v[b]).collect();
                let (ma, va, sva) = mean_var(&xa);
                let (mb, vb, svb) = mean_var(&xb);
                assert!(ma.z_diff(&mb).abs() <= 3.0, "s={s} rho={rho}: means {} vs {}", ma.mean, mb.mean);
                let z = (va - vb) / (sva * sva + svb * svb).sqrt();
                assert!(z.abs() <= 3.0, "s={s} rho={rho}: variances {va} vs {vb}");
            }
        }
    }
}

#[test]
fn integrated_wiener_variance_and_cross_covariance() {
    let cfg = McConfig { replicates: 20_000, seed: 3, grid_n: 16, ..McConfig::default() };
    let vals = run_replicates(&cfg, 9, |_, rng| {
        let p = simulate_integrated_wiener(2, 16, 1.0, rng)?;
        Ok([p.levels[0].values()[16], p.levels[1].values()[16], p.levels[2].values()[16]])
    })
    .unwrap();
    for s in 0..=2 {
        let xs: Vec<f64> = vals.iter().map(|v| v[s]).collect();
        let (_, var, se) = mean_var(&xs);
        // Var W^(s)(1) = 1 / ((2s + 1) (s!)^2).
        let expect = 1.0 / ((2 * s + 1) as f64 * factorial(s).powi(2));
        assert!((var - expect).abs() <= 3.0 * se, "s={s}: {var} vs {expect}");
    }
    // Cov(W(1), W^(1)(1)) = 1/2.
    let prod: Vec<f64> = vals.iter().map(|v| v[0] * v[1]).collect();
    let c = EstimateWithError::from_samples(&prod);
    assert!((c.mean - 0.5).abs() <= 3.0 * c.std_error, "{} ± {}", c.mean, c.std_error);
}

#[test]
fn bridge_midpoint_variance() {
    let cfg = McConfig { replicates: 100_000, seed: 5, grid_n: 16, ..McConfig::default() };
    let mids = run_replicates(&cfg, 2, |_, rng| {
        let b = simulate_brownian_bridge(16, rng)?;
        assert_eq!(b.values()[0], 0.0);
        assert_eq!(b.values()[16], 0.0);
        Ok(b.values()[8])
    })
    .unwrap();
    let (_, var, _) = mean_var(&mids);
    assert!((var - 0.25).abs() <= 0.01, "{var}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn continuation_from_saved_state_is_bitwise_identical(
        s in 0usize..4,
        n1 in 1usize..50,
        n2 in 1usize..50,
        seed in any::<u64>(),
    ) {
        let h = 0.01;
        let mut rng = RngStream::new(seed, 7);
        let mut paths = simulate_integrated_wiener(s, n1, n1 as f64 * h, &mut rng).unwrap();
        let saved = paths.state.clone();
        let mut rng_a = rng.clone();
        let mut rng_b = rng.clone();
        let fresh = extend_path(&saved, s, n2, n2 as f64 * paths.levels[0].step(), &mut rng_b).unwrap();
        paths.extend(n2, &mut rng_a).unwrap();
        for (lvl, more) in paths.levels.iter().zip(&fresh.levels) {
            prop_assert_eq!(&lvl.values()[n1 + 1..], &more[..]);
        }
        prop_assert_eq!(paths.state.clone(), fresh.state);
        prop_assert!(paths.levels.iter().all(|l| l.values().iter().all(|v| v.is_finite())));
        prop_assert_eq!(IwpState::origin(s).order(), s);
    }
}

#[test]
fn diffusion_sup_increments_scale_linearly() {
    let coeff = SdePreset::OuSine.coefficients();
    let cfg = McConfig { replicates: 4000, seed: 8, grid_n: 1 << 11, ..McConfig::default() };
    // Step 2^-15, horizon 2^-4.
    let sups = run_replicates(&cfg, 4, |_, rng| {
        let d = simulate_diffusion(&coeff, 1 << 11, 1.0 / 16.0, rng, Scheme::Euler)?;
        let x = d.x.values();
        Ok((4..=8)
            .map(|e| {
                let m = (1usize << 15) >> e;
                x[..=m].iter().map(|v| (v - x[0]).powi(2)).fold(0.0, f64::max)
            })
            .collect::<Vec<f64>>())
    })
    .unwrap();
    let ratios: Vec<f64> = (0..5)
        .map(|j| {
            let h = 2f64.powi(-(4 + j as i32));
            sups.iter().map(|v| v[j]).sum::<f64>() / sups.len() as f64 / h
        })
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    for r in &ratios {
        assert!((r / mean - 1.0).abs() <= 0.2, "{ratios:?}");
    }
}

#[test]
fn diffusion_sup_moments_are_stable() {
    let coeff = SdePreset::MeanRevertingTanh.coefficients();
    let sup_norms = |reps: usize| {
        let cfg = McConfig { replicates: reps, seed: 10, grid_n: 256, ..McConfig::default() };
        run_replicates(&cfg, 6, |_, rng| {
            let d = simulate_diffusion(&coeff, 256, 1.0, rng, Scheme::Milstein)?;
            Ok(d.x.values().iter().fold(0.0f64, |m, v| m.max(v.abs())))
        })
        .unwrap()
    };
    let small = sup_norms(2000);
    let large = sup_norms(4000);
    for q in [1, 2, 4] {
        let a = EstimateWithError::from_samples(&small.iter().map(|x| x.powi(q)).collect::<Vec<_>>());
        let b = EstimateWithError::from_samples(&large.iter().map(|x| x.powi(q)).collect::<Vec<_>>());
        assert!(a.mean.is_finite() && b.mean.is_finite());
        // The first half of the larger run is the smaller run, so compare the
        // second half against the first.
        let tail = EstimateWithError::from_samples(&large[2000..].iter().map(|x| x.powi(q)).collect::<Vec<_>>());
        assert!(a.z_diff(&tail).abs() <= 4.0, "q={q}: {} vs {}", a.mean, tail.mean);
        assert!((b.std_error / a.std_error - 2f64.powf(-0.5)).abs() <= 0.15 * 2f64.powf(-0.5));
    }
}
