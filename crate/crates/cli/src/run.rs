use std::path::{Path, PathBuf};
use std::time::Instant;

use freeknot::diffusion::diffusion_rate_study;
use freeknot::mc::{
    avg_knot_rate_study, estimate_eta_kappa, estimate_tau, negative_moment_study, rate_study,
    small_deviation_study, xi_structure_check, Sampler,
};
use freeknot::{build_spline, PathKind, SampledPath};

use crate::config::{Experiment, Format, RunConfig, SamplerSpec};
use crate::report::{ExperimentReport, Fit, Table};
use crate::spline_file::{write_spline, SplineFile};
use crate::RunError;

/// Relative tolerance on grid spacings when reading a path from CSV.
const GRID_TOL: f64 = 1e-6;

/// Runs the experiment and fills `report`. On error the report keeps
/// whatever was filled in before the failure.
pub fn run_experiment(cfg: &RunConfig, report: &mut ExperimentReport) -> Result<(), RunError> {
    let ap = &cfg.params;
    let mc = &cfg.mc;
    match cfg.experiment {
        Experiment::Tau => {
            let est = estimate_tau(ap.r, ap.s, ap.p, cfg.epsilon, mc)?;
            report.estimate("tau", est.tau);
            report.estimate("c", est.c);
            report.estimate("beta", est.beta);
            report.estimate("grid_step", est.grid_step);
            report.table = Table::new(&["epsilon", "tau", "tau_std_error", "c", "c_std_error", "capped"]);
            report.table.push(vec![
                est.epsilon,
                est.tau.mean,
                est.tau.std_error,
                est.c.mean,
                est.c.std_error,
                est.capped as f64,
            ]);
            if est.unreliable {
                report.notes.push(format!("{} replicates hit the horizon cap, estimate unreliable", est.capped));
            }
        }
        Experiment::Rate => {
            let st = rate_study(ap.r, ap.s, ap.p, ap.q, &cfg.k_list, mc)?;
            report.estimate("beta", st.beta);
            report.fits.insert("error_vs_k".into(), Fit::new(&st.fit, Some(-(ap.s as f64 + 0.5))));
            report.table =
                Table::new(&["k", "mean_error", "std_error", "mean_gamma", "k_pow_beta_times_error"]);
            for row in &st.rows {
                report.table.push(vec![
                    row.k as f64,
                    row.mean_error,
                    row.std_error,
                    row.mean_gamma,
                    row.k_pow_beta_times_error,
                ]);
            }
        }
        Experiment::AvgKnots => {
            let st = avg_knot_rate_study(ap.r, ap.s, ap.p, ap.q, &cfg.epsilon_list, mc)?;
            report.estimate("beta", st.beta);
            report.fits.insert("error_vs_pieces".into(), Fit::new(&st.fit, Some(-(ap.s as f64 + 0.5))));
            report.table = Table::new(&["epsilon", "mean_pieces", "pieces_std_error", "mean_error", "std_error"]);
            for row in &st.rows {
                report.table.push(vec![
                    row.epsilon,
                    row.mean_pieces,
                    row.pieces_std_error,
                    row.mean_error,
                    row.std_error,
                ]);
            }
            for (i, ratio) in st.piece_ratio_vs_scaling.iter().enumerate() {
                report.estimate(&format!("piece_ratio_vs_scaling_{i}"), *ratio);
            }
        }
        Experiment::XiCheck => {
            let rep = xi_structure_check(ap.r, ap.s, ap.p, cfg.epsilon, cfg.j_max, mc)?;
            if let Some(c) = rep.lag1_correlation {
                report.estimate("lag1_correlation", c);
            }
            report.estimate("lag1_bound", rep.lag1_bound);
            if let Some(z) = rep.max_pairwise_z {
                report.estimate("max_pairwise_z", z);
            }
            report.table = Table::new(&["j", "mean_spacing", "std_error"]);
            for (j, e) in rep.per_j.iter().enumerate() {
                report.table.push(vec![(j + 1) as f64, e.mean, e.std_error]);
            }
            if rep.unreliable {
                report.notes.push(format!("{} replicates hit the horizon cap, estimate unreliable", rep.capped));
            }
        }
        Experiment::Smalldev => {
            let st = small_deviation_study(ap.r, ap.s, ap.p, &cfg.epsilon_list, mc)?;
            if let Some(fit) = &st.fit {
                report.fits.insert("loglog_prob_vs_log_inv_eps".into(), Fit::new(fit, Some(st.expected_slope)));
            }
            report.table = Table::new(&[
                "epsilon",
                "hits",
                "probability",
                "std_error",
                "hits_no_poly",
                "probability_no_poly",
            ]);
            for row in &st.rows {
                report.table.push(vec![
                    row.epsilon,
                    row.hits as f64,
                    row.probability,
                    row.std_error,
                    row.hits_no_poly as f64,
                    row.probability_no_poly,
                ]);
            }
            report.notes.extend(st.warnings.iter().cloned());
        }
        Experiment::Negmom => {
            let sampler = match cfg.sampler {
                SamplerSpec::Exp1 => Sampler::Exp1,
                SamplerSpec::Constant(c) => Sampler::Constant(c),
            };
            let rows = negative_moment_study(&sampler, cfg.alpha, &cfg.k_list, mc)?;
            report.table = Table::new(&["k", "estimate", "std_error"]);
            for row in &rows {
                report.table.push(vec![row.k as f64, row.estimate.mean, row.estimate.std_error]);
            }
        }
        Experiment::EtaKappa => {
            let coeff = cfg.sde_preset.coefficients();
            let ek = estimate_eta_kappa(ap.p.value(), cfg.p1, cfg.p2, &coeff, mc)?;
            report.estimate("eta", ek.eta);
            report.estimate("kappa", ek.kappa);
            report.table = Table::new(&["eta", "eta_std_error", "kappa", "kappa_std_error"]);
            report.table.push(vec![ek.eta.mean, ek.eta.std_error, ek.kappa.mean, ek.kappa.std_error]);
        }
        Experiment::Diffusion => {
            let coeff = cfg.sde_preset.coefficients();
            let st = diffusion_rate_study(&coeff, &cfg.k_list, ap.p, ap.q, mc)?;
            report.fits.insert("direct_error_vs_pieces".into(), Fit::new(&st.direct_fit, Some(-0.5)));
            report.fits.insert("composite_error_vs_pieces".into(), Fit::new(&st.composite_fit, Some(-0.5)));
            report.table = Table::new(&[
                "k",
                "direct_pieces",
                "direct_error",
                "direct_std_error",
                "composite_pieces",
                "composite_error",
                "composite_std_error",
                "drift_error",
                "martingale_error",
            ]);
            for row in &st.rows {
                report.table.push(vec![
                    row.k as f64,
                    row.direct_pieces,
                    row.direct_error.mean,
                    row.direct_error.std_error,
                    row.composite_pieces,
                    row.composite_error.mean,
                    row.composite_error.std_error,
                    row.drift_error.mean,
                    row.martingale_error.mean,
                ]);
            }
        }
        Experiment::ApproximateFile => {
            let input = cfg.input.as_deref().expect("checked during resolution");
            let path = read_path_csv(input)?;
            let fk = build_spline(&path, ap.k, ap.r, ap.p, mc.tol_rel)?;
            report.estimate("pieces", fk.n_pieces() as f64);
            report.estimate("gamma", fk.gamma);
            report.estimate("error", fk.error());
            report.table = Table::new(&["knot_left", "knot_right", "piece_error"]);
            for (w, e) in fk.spline.knots().windows(2).zip(&fk.piece_errors) {
                report.table.push(vec![w[0], w[1], *e]);
            }
            let file = SplineFile { k: ap.k, r: ap.r, p: ap.p, gamma: fk.gamma, spline: fk.spline };
            let out = spline_path(&cfg.out);
            std::fs::create_dir_all(&cfg.out).map_err(|e| RunError::io(&cfg.out, e))?;
            let f = std::fs::File::create(&out).map_err(|e| RunError::io(&out, e))?;
            write_spline(std::io::BufWriter::new(f), &file).map_err(|e| RunError::io(&out, e))?;
        }
    }
    Ok(())
}

/// Where `approximate-file` writes the fitted spline.
pub fn spline_path(out: &Path) -> PathBuf {
    out.join("approximate-file.spline.csv")
}

/// Runs the experiment and writes its report (also after a failure).
pub fn execute(cfg: &RunConfig) -> (ExperimentReport, Result<Vec<PathBuf>, RunError>) {
    let mut report = ExperimentReport::new(cfg.experiment, cfg.mc.seed, cfg.echo());
    let start = Instant::now();
    let outcome = run_experiment(cfg, &mut report);
    report.wall_time_s = start.elapsed().as_secs_f64();
    if let Err(e) = &outcome {
        report.fail(e);
    }
    let written = report.write(&cfg.out, cfg.format == Format::Csv);
    let result = match (outcome, written) {
        (Err(e), _) => Err(e),
        (Ok(()), w) => w,
    };
    (report, result)
}

/// Reads a two-column `time,value` CSV on a uniform grid starting at 0.
/// A non-numeric first line is treated as a header.
pub fn read_path_csv(file: &Path) -> Result<SampledPath, RunError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(file)
        .map_err(|e| RunError::Input(format!("cannot read {}: {e}", file.display())))?;
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| RunError::Input(format!("{}: {e}", file.display())))?;
        if rec.len() != 2 {
            return Err(RunError::Input(format!("line {}: expected 2 columns, got {}", i + 1, rec.len())));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(t), Ok(v)) if t.is_finite() && v.is_finite() => {
                ts.push(t);
                vs.push(v);
            }
            _ if i == 0 => continue,
            _ => return Err(RunError::Input(format!("line {}: not a finite number", i + 1))),
        }
    }
    if ts.len() < 2 {
        return Err(RunError::Input("need at least two samples".into()));
    }
    let step = (ts[ts.len() - 1] - ts[0]) / (ts.len() - 1) as f64;
    if !(step > 0.0) {
        return Err(RunError::Input("times must increase".into()));
    }
    for (i, w) in ts.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > GRID_TOL * step {
            return Err(RunError::Input(format!(
                "grid is not uniform: spacing {} at row {} differs from the mean spacing {step}",
                w[1] - w[0],
                i + 2
            )));
        }
    }
    if ts[0].abs() > GRID_TOL * step {
        return Err(RunError::Input(format!("grid must start at 0, starts at {}", ts[0])));
    }
    Ok(SampledPath::new(0.0, step, vs, PathKind::Synthetic)?)
}
