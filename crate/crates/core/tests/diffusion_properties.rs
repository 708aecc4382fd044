use freeknot::diffusion::{build_drift_spline, build_martingale_spline, diffusion_rate_study, drift_part, ito_part};
use freeknot::mc::{run_replicates, EstimateWithError, McConfig, RateFit};
use freeknot::sim::{simulate_diffusion, Scheme, SdeCoefficients, SdePreset};
use freeknot::{build_spline, spline_error, Norm, PathKind, SampledPath};

fn slope(ks: &[usize], errs: &[f64]) -> f64 {
    let pts = ks.iter().zip(errs).map(|(&k, &e)| ((k as f64).ln(), e.ln())).collect();
    RateFit::ols(pts).unwrap().slope
}

#[test]
fn drift_spline_error_decays_like_one_over_k() {
    let coeff = SdeCoefficients::new(|x| -x, |_| 1.0, 1.0).unwrap();
    let ks = [8usize, 16, 32, 64, 128];
    let cfg = McConfig { replicates: 200, seed: 1, grid_n: 1 << 12, ..McConfig::default() };
    let errs = run_replicates(&cfg, 1, |_, rng| {
        let d = simulate_diffusion(&coeff, cfg.grid_n, 1.0, rng, Scheme::Euler)?;
        let y = drift_part(&d.x, &coeff)?;
        ks.iter().map(|&k| spline_error(&y, &build_drift_spline(&d.x, &coeff, k)?, Norm::INF)).collect()
    })
    .unwrap();
    let means: Vec<f64> =
        (0..ks.len()).map(|j| errs.iter().map(|e: &Vec<f64>| e[j]).sum::<f64>() / errs.len() as f64).collect();
    let s = slope(&ks, &means);
    assert!((s + 1.0).abs() <= 0.1, "{s}");
}

#[test]
fn martingale_spline_error_decays_like_root_k() {
    let coeff = SdeCoefficients::new(|_| 0.0, |x| 1.0 + 0.1 * x.sin(), 0.0).unwrap();
    let ks = [4usize, 8, 16, 32, 64];
    let cfg = McConfig { replicates: 200, seed: 2, grid_n: 1 << 12, ..McConfig::default() };
    let errs = run_replicates(&cfg, 2, |_, rng| {
        let d = simulate_diffusion(&coeff, cfg.grid_n, 1.0, rng, Scheme::Euler)?;
        let y = drift_part(&d.x, &coeff)?;
        let m = SampledPath::new(
            0.0,
            d.x.step(),
            d.x.values().iter().zip(y.values()).map(|(a, b)| a - b).collect(),
            PathKind::Diffusion,
        )?;
        ks.iter()
            .map(|&k| {
                let ms = build_martingale_spline(&d.x, &d.w, &coeff, k, cfg.tol_rel)?;
                assert!(ms.spline.n_pieces() <= 2 * k);
                for j in 0..=k {
                    let t = j as f64 / k as f64;
                    assert!(ms.spline.knots().iter().any(|&s| (s - t).abs() < 1e-12), "knot {t} missing");
                }
                spline_error(&m, &ms.spline, Norm::INF)
            })
            .collect::<freeknot::Result<Vec<f64>>>()
    })
    .unwrap();
    let means: Vec<f64> = (0..ks.len()).map(|j| errs.iter().map(|e| e[j]).sum::<f64>() / errs.len() as f64).collect();
    let s = slope(&ks, &means);
    assert!((s + 0.5).abs() <= 0.1, "{s}");
}

#[test]
fn wiener_martingale_error_within_twice_the_free_knot_error() {
    let coeff = SdePreset::Wiener.coefficients();
    let cfg = McConfig { replicates: 100, seed: 3, grid_n: 1 << 12, ..McConfig::default() };
    let k = 16;
    let pairs = run_replicates(&cfg, 3, |_, rng| {
        let d = simulate_diffusion(&coeff, cfg.grid_n, 1.0, rng, Scheme::Euler)?;
        let r = ito_part(&d.x, &d.w, &coeff)?;
        let ms = build_martingale_spline(&d.x, &d.w, &coeff, k, cfg.tol_rel)?;
        let plain = build_spline(&d.w, k, 0, Norm::INF, cfg.tol_rel)?;
        Ok((spline_error(&r, &ms.spline, Norm::INF)?, plain.error()))
    })
    .unwrap();
    let m = EstimateWithError::from_samples(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
    let w = EstimateWithError::from_samples(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
    assert!(m.mean <= 2.0 * w.mean, "{} vs {}", m.mean, w.mean);
}

#[test]
fn direct_fit_dominates_composite_and_both_decay() {
    let ks = [4usize, 8, 16, 32, 64];
    for preset in [SdePreset::Wiener, SdePreset::OuSine, SdePreset::MeanRevertingTanh] {
        let coeff = preset.coefficients();
        let cfg = McConfig { replicates: 150, seed: 4, grid_n: 1 << 12, ..McConfig::default() };
        let st = diffusion_rate_study(&coeff, &ks, Norm::INF, 1.0, &cfg).unwrap();
        for row in &st.rows {
            assert!(
                row.direct_error.mean <= row.composite_error.mean,
                "{}: k={} direct {} composite {}",
                preset.name(),
                row.k,
                row.direct_error.mean,
                row.composite_error.mean
            );
            assert!(row.composite_pieces <= 2.0 * row.k as f64);
        }
        if preset != SdePreset::MeanRevertingTanh {
            assert!((st.direct_fit.slope + 0.5).abs() <= 0.1, "{}: {}", preset.name(), st.direct_fit.slope);
            assert!((st.composite_fit.slope + 0.5).abs() <= 0.1, "{}: {}", preset.name(), st.composite_fit.slope);
        }
    }
}
