use rayon::prelude::*;

use photodetection::detector::graded_tau_grid;
use photodetection::emodel::{e_count_distribution, e_moments, e_ncav, e_wt_curve};
use photodetection::microdetector::quadrature::{bright_coeff_quad, dark_coeff_quad, QuadOptions};
use photodetection::microdetector::{self as micro, bright_coeff, brightness_vs_wavelength, dark_coeff};
use photodetection::oracle::{chi_square_gof, markov_counts_series, mc_trajectories, mc_waiting_time};
use photodetection::sdmodel::{sd_count_distribution, sd_moments, sd_ncav, sd_wt_curve};
use photodetection::{CountStats, PhotonDistribution, Variant};

use crate::config::RunConfig;
use crate::output::{fmt_num, fmt_opt, write_table};
use crate::CliError;

type Rows = Vec<Vec<String>>;

fn row(xs: &[f64]) -> Vec<String> {
    xs.iter().map(|&x| fmt_num(x)).collect()
}

fn done(path: std::path::PathBuf, rows: usize) {
    println!("wrote {} rows to {}", rows, path.display());
}

pub fn qjs_table(cfg: &RunConfig) -> Result<(), CliError> {
    let t = micro::qjs_table(&cfg.params, &cfg.mode, cfg.n_max)?;
    let rows: Rows = (0..=cfg.n_max)
        .map(|n| row(&[n as f64, t.jb[n], t.jb_norm(n), t.jd[n], t.jd_norm(n), t.je[n]]))
        .collect();
    let results = vec![
        ("rb".to_string(), fmt_num(t.rb)),
        ("rd".to_string(), fmt_num(t.rd)),
        ("snr".to_string(), fmt_num(t.snr)),
        ("beta".to_string(), fmt_opt(t.beta_fit)),
        ("xi".to_string(), fmt_opt(t.xi_fit)),
    ];
    let header = ["n", "jb", "jb_norm", "jd", "jd_norm", "je"];
    done(write_table(cfg, "qjs-table", &header, &rows, &results)?, rows.len());
    Ok(())
}

pub fn snr_scan(cfg: &RunConfig) -> Result<(), CliError> {
    let s = micro::snr_scan(&cfg.params, &cfg.mode, &cfg.b_grid, cfg.drop)?;
    let rows: Rows = s.points.iter().map(|p| row(&[p.b, p.rb, p.rd, p.snr])).collect();
    let results = vec![
        ("plateau".to_string(), fmt_num(s.plateau)),
        ("breakdown_b".to_string(), fmt_opt(s.breakdown)),
    ];
    let path = write_table(cfg, "snr-scan", &["b", "rb", "rd", "snr"], &rows, &results)?;
    match s.breakdown {
        Some(b) => println!("breakdown at b = {}", fmt_num(b)),
        None => println!("no breakdown inside the grid"),
    }
    done(path, rows.len());
    Ok(())
}

pub fn brightness(cfg: &RunConfig) -> Result<(), CliError> {
    let mut rows = Rows::new();
    let mut results = Vec::new();
    for &b in &cfg.b_values {
        let curve = brightness_vs_wavelength(&cfg.params.with_b(b)?, &cfg.lambda_grid)?;
        let peak = curve.iter().fold((f64::NAN, f64::NEG_INFINITY), |a, &p| if p.1 > a.1 { p } else { a });
        results.push((format!("peak_lambda_b{}", fmt_num(b)), fmt_num(peak.0)));
        rows.extend(curve.iter().map(|&(lambda, rb)| row(&[lambda, b, rb])));
    }
    done(write_table(cfg, "brightness", &["lambda", "b", "rb"], &rows, &results)?, rows.len());
    Ok(())
}

fn k_or_nan(s: &CountStats<f64>) -> f64 {
    s.k_t().unwrap_or(f64::NAN)
}

pub fn counts(cfg: &RunConfig) -> Result<(), CliError> {
    let dist = cfg.dist()?;
    let sd = cfg.detector(Variant::Sd)?;
    let e = cfg.detector(Variant::E)?;
    let rows: Rows = cfg
        .rt_grid
        .par_iter()
        .map(|&rt| {
            let a = sd_moments(&dist, &sd, rt)?;
            let b = e_moments(&dist, &e, rt)?;
            Ok(row(&[rt, a.mbar, b.mbar, k_or_nan(&a), k_or_nan(&b)]))
        })
        .collect::<Result<_, photodetection::Error>>()?;
    let results = vec![("n_max".to_string(), dist.n_max().to_string())];
    let header = ["rt", "mbar_sd", "mbar_e", "k_sd", "k_e"];
    done(write_table(cfg, "counts", &header, &rows, &results)?, rows.len());
    Ok(())
}

pub fn wt(cfg: &RunConfig) -> Result<(), CliError> {
    let dist = cfg.dist()?;
    let det = cfg.detector(cfg.model)?;
    let taus = graded_tau_grid(cfg.theta, cfg.tau_points);
    let rows: Rows = cfg
        .rt_grid
        .par_iter()
        .map(|&rt| {
            let (ncav, curve) = match cfg.model {
                Variant::Sd => (sd_ncav(&dist, rt), sd_wt_curve(&dist, &det, rt, &taus, cfg.theta)?),
                Variant::E => (e_ncav(&dist, rt)?, e_wt_curve(&dist, &det, rt, &taus, cfg.theta)?),
            };
            Ok(vec![fmt_num(rt), fmt_num(ncav), fmt_opt(curve.mean_wt)])
        })
        .collect::<Result<_, photodetection::Error>>()?;
    let results = vec![("theta_defaulted".to_string(), cfg.theta_defaulted.to_string())];
    done(write_table(cfg, "wt", &["rt", "ncav", "mean_wt"], &rows, &results)?, rows.len());
    Ok(())
}

const VERIFY_RTS: [f64; 3] = [0.5, 2.0, 10.0];
const VERIFY_MC_RT: f64 = 1.0;

struct Report {
    failed: usize,
}

impl Report {
    fn check(&mut self, name: &str, ok: bool, detail: String) {
        if !ok {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

fn closed_counts(dist: &PhotonDistribution<f64>, det: &photodetection::IdealizedDetector<f64>, rt: f64, m_max: usize) -> Result<Vec<f64>, CliError> {
    Ok(match det.variant() {
        Variant::Sd => sd_count_distribution(dist, det, rt, m_max)?,
        Variant::E => e_count_distribution(dist, det, rt, m_max)?,
    })
}

fn closed_moments(dist: &PhotonDistribution<f64>, det: &photodetection::IdealizedDetector<f64>, rt: f64) -> Result<CountStats<f64>, CliError> {
    Ok(match det.variant() {
        Variant::Sd => sd_moments(dist, det, rt)?,
        Variant::E => e_moments(dist, det, rt)?,
    })
}

pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let dist = cfg.dist()?;
    let mut rep = Report { failed: 0 };
    let dark = cfg.d * VERIFY_RTS[VERIFY_RTS.len() - 1];
    let m_max = dist.n_max() + 10 + (dark + 10.0 * dark.sqrt()).ceil() as usize;

    for v in [Variant::Sd, Variant::E] {
        let det = cfg.detector(v)?;
        let markov = markov_counts_series(&dist, &det, &VERIFY_RTS, m_max)?;
        let (mut worst_mass, mut worst_diff) = (0.0f64, 0.0f64);
        for (&rt, m) in VERIFY_RTS.iter().zip(&markov) {
            let p = closed_counts(&dist, &det, rt, m_max)?;
            worst_mass = worst_mass.max((p.iter().sum::<f64>() - 1.0).abs());
            for (a, b) in p.iter().zip(m) {
                worst_diff = worst_diff.max((a - b).abs());
            }
        }
        rep.check(&format!("{v} completeness"), worst_mass <= 1e-8, format!("max |sum p - 1| = {worst_mass:.2e}"));
        rep.check(&format!("{v} markov"), worst_diff <= 1e-8, format!("max |p - p_markov| = {worst_diff:.2e}"));

        let mc = mc_trajectories(&dist, &det, VERIFY_MC_RT, cfg.n_traj, cfg.seed)?;
        let exact = closed_counts(&dist, &det, VERIFY_MC_RT, m_max)?;
        let gof = chi_square_gof(&mc.histogram, &exact)?;
        rep.check(
            &format!("{v} mc histogram"),
            gof.p_value >= 1e-3,
            format!("chi2 = {:.2} on {} dof, p = {:.3}", gof.statistic, gof.dof, gof.p_value),
        );
        let mean = closed_moments(&dist, &det, VERIFY_MC_RT)?.mbar;
        let z = (mc.mean() - mean).abs() / mc.mean_stderr().max(f64::MIN_POSITIVE);
        rep.check(
            &format!("{v} mc mean"),
            z <= 4.0,
            format!("{:.5} vs {:.5} ({z:.2} sigma)", mc.mean(), mean),
        );

        let taus = graded_tau_grid(cfg.theta, cfg.tau_points);
        let curve = match v {
            Variant::Sd => sd_wt_curve(&dist, &det, VERIFY_MC_RT, &taus, cfg.theta)?,
            Variant::E => e_wt_curve(&dist, &det, VERIFY_MC_RT, &taus, cfg.theta)?,
        };
        match (curve.mean_wt, mc_waiting_time(&dist, &det, VERIFY_MC_RT, cfg.theta, cfg.n_traj, cfg.seed)) {
            (Some(exact), Ok(est)) => {
                // the MC conditions on a finite bin around the first click
                let tol = 4.0 * est.stderr + 0.01 * exact;
                let diff = (est.mean_wt - exact).abs();
                rep.check(
                    &format!("{v} mc waiting time"),
                    diff <= tol,
                    format!("{:.5} +- {:.5} vs {exact:.5}", est.mean_wt, est.stderr),
                );
            }
            (None, _) => println!("SKIP {v} mc waiting time: empty window"),
            (_, Err(e)) => println!("SKIP {v} mc waiting time: {e}"),
        }
    }

    let opts = QuadOptions::default();
    let at = photodetection::FieldMode::new(cfg.params.lambda0())?;
    let pairs = [
        ("bright", bright_coeff(&cfg.params, &at, 1)?, bright_coeff_quad(&cfg.params, &at, 1, opts)?),
        ("dark", dark_coeff(&cfg.params, &at, 0)?, dark_coeff_quad(&cfg.params, &at, 0, opts)?),
    ];
    for (name, closed, quad) in pairs {
        let rel = if closed == quad { 0.0 } else { (closed - quad).abs() / closed.abs().max(quad.abs()) };
        rep.check(&format!("{name} rate quadrature"), rel <= 1e-6, format!("relative difference {rel:.2e}"));
    }

    if rep.failed > 0 {
        return Err(CliError::Verification(format!("{} check(s) failed", rep.failed)));
    }
    Ok(())
}
