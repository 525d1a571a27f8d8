//! Slower Monte Carlo checks against closed forms and between independent
//! halves of a simulation.

use std::f64::consts::PI;

use enf_core::abc::{
    abc_accept, build_reference_table, simulate_summary, AbcConfig, Acceptance, PriorSpec, ReferenceTable, Target,
};
use enf_core::curve::linear_grid;
use enf_core::io::{read_sample_set, write_sample_set};
use enf_core::simulate::{fit_matern_mincontrast, matern_k, simulate_matern, simulate_poisson, MaternParams};
use enf_core::summaries::{empty_space_f, estimate_k, FConfig};
use enf_core::{CurveKind, NerveSample, RngSpec, SampleSet, SummaryCurve, Window};

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn healthy_set(n: usize, seed: u64) -> SampleSet {
    let spec = RngSpec::new(seed);
    let samples: Vec<NerveSample> = (0..n)
        .map(|i| {
            let mut s = simulate_matern(&MaternParams::default(), &Window::default(), spec.derive(i as u64))
                .unwrap()
                .sample;
            s.sample_id = format!("h{i:03}");
            s.subject_id = format!("subj{}", i / 2);
            s
        })
        .collect();
    SampleSet::new(samples).unwrap()
}

#[test]
fn poisson_mean_k_is_pi_r_squared() {
    let w = Window::default();
    let lambda = 100.0 / w.area();
    let grid = [10.0, 25.0, 50.0];
    let spec = RngSpec::new(11);
    let ks: Vec<Vec<f64>> = (0..300)
        .map(|i| {
            let p = simulate_poisson(lambda, &w, spec.derive(i)).unwrap();
            estimate_k(&p, &grid).unwrap().values().to_vec()
        })
        .collect();
    for (j, r) in grid.iter().enumerate() {
        let col: Vec<f64> = ks.iter().map(|k| k[j]).collect();
        let (m, sd) = mean_sd(&col);
        let truth = PI * r * r;
        // n^2 normalisation biases K low by about 1/n
        let tol = 3.0 * sd / (col.len() as f64).sqrt() + 0.02 * truth;
        assert!((m - truth).abs() < tol, "r={r}: mean K {m}, expected {truth} +- {tol}");
    }
}

#[test]
fn matern_daughters_k_matches_closed_form_and_fits_back() {
    let w = Window::default();
    let params = MaternParams::default();
    let grid = linear_grid(2.0, 80.0, 2.0);
    let spec = RngSpec::new(17);
    let ks: Vec<Vec<f64>> = (0..500)
        .map(|i| {
            let d = simulate_matern(&params, &w, spec.derive(i)).unwrap().daughters();
            estimate_k(&d, &grid).unwrap().values().to_vec()
        })
        .collect();
    let mut mean = Vec::new();
    for (j, &r) in grid.iter().enumerate() {
        let col: Vec<f64> = ks.iter().map(|k| k[j]).collect();
        let (m, sd) = mean_sd(&col);
        let truth = matern_k(&params, r);
        // ratio estimator bias of order 1/n on top of the sampling error
        let tol = 3.0 * sd / (col.len() as f64).sqrt() + 0.01 * truth;
        assert!((m - truth).abs() < tol, "r={r}: mean K {m}, Matérn K {truth} +- {tol}");
        mean.push(m);
    }
    let fit = fit_matern_mincontrast(&SummaryCurve::new(grid, mean, CurveKind::K).unwrap(), params.mu).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    assert!(rel(fit.params.radius, params.radius) < 0.1, "{fit:?}");
    assert!(rel(fit.params.kappa, params.kappa) < 0.15, "{fit:?}");
}

#[test]
fn poisson_mean_f_matches_closed_form() {
    let w = Window::default();
    let lambda = 60.0 / w.area();
    let cfg = FConfig {
        n_test_points: 2500,
        grid: linear_grid(0.0, 60.0, 5.0),
    };
    let spec = RngSpec::new(5);
    let fs: Vec<Vec<f64>> = (0..300)
        .map(|i| {
            let s = spec.derive(i);
            let p = simulate_poisson(lambda, &w, s.derive(0)).unwrap();
            empty_space_f(&p, &cfg, s.derive(1)).unwrap().values().to_vec()
        })
        .collect();
    for (j, r) in cfg.grid.iter().enumerate() {
        let col: Vec<f64> = fs.iter().map(|f| f[j]).collect();
        let (m, sd) = mean_sd(&col);
        let truth = 1.0 - (-lambda * PI * r * r).exp();
        let tol = 3.0 * sd / (col.len() as f64).sqrt() + 0.005;
        assert!((m - truth).abs() < tol, "r={r}: mean F {m}, expected {truth} +- {tol}");
    }
}

#[test]
fn summary_decreases_with_theta() {
    let healthy = healthy_set(12, 21);
    let cfg = AbcConfig {
        f_config: FConfig {
            n_test_points: 2500,
            ..FConfig::default()
        },
        ..AbcConfig::default()
    };
    let n_b = 14;
    let draw = |theta: f64, salt: u64| -> Vec<f64> {
        (0..300u64)
            .filter_map(|k| {
                let src = &healthy.samples()[(k as usize) % healthy.len()];
                if src.n_trees() <= n_b {
                    return None;
                }
                simulate_summary(src, theta, n_b, &cfg, salt * 1_000_000 + k).unwrap()
            })
            .collect()
    };
    let (m_lo, sd_lo) = mean_sd(&draw(0.005, 1));
    let (m_hi, sd_hi) = mean_sd(&draw(1.0, 2));
    let se = (sd_lo.powi(2) / 300.0 + sd_hi.powi(2) / 300.0).sqrt();
    assert!(
        m_lo - m_hi > 3.0 * se,
        "mean summary {m_lo} at small theta vs {m_hi} at large theta (se {se})"
    );
}

fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn posterior_from_table_halves_agree() {
    let healthy = healthy_set(12, 33);
    let cfg = AbcConfig {
        n_sims: 6000,
        acceptance: Acceptance::Quantile(0.05),
        f_config: FConfig {
            n_test_points: 2500,
            ..FConfig::default()
        },
        ..AbcConfig::default()
    };
    let prior = PriorSpec::exponential(10.0, 0.01).unwrap();
    let table = build_reference_table(&healthy, &[Target::new("t", 14)], &prior, &cfg, RngSpec::new(8)).unwrap();
    let (even, odd): (Vec<_>, Vec<_>) = table.rows.iter().cloned().enumerate().partition(|(i, _)| i % 2 == 0);
    let half = |v: Vec<(usize, enf_core::abc::ReferenceRow)>| ReferenceTable {
        rows: v.into_iter().map(|(_, r)| r).collect(),
    };
    let (a, b) = (half(even), half(odd));
    for observed in [34.0, 38.0, 44.0] {
        let pa = abc_accept(&a, "t", observed, cfg.acceptance).unwrap().draws.thetas;
        let pb = abc_accept(&b, "t", observed, cfg.acceptance).unwrap().draws.thetas;
        let (na, nb) = (pa.len() as f64, pb.len() as f64);
        // two-sample KS critical value at the 0.1% level
        let crit = 1.95 * ((na + nb) / (na * nb)).sqrt();
        let d = ks_statistic(&pa, &pb);
        assert!(d < crit, "s={observed}: KS {d} >= {crit} ({na} vs {nb} draws)");
    }
}

#[test]
fn pattern_csv_round_trip() {
    let set = healthy_set(3, 2);
    let mut buf = Vec::new();
    write_sample_set(&set, &mut buf).unwrap();
    let back = read_sample_set(buf.as_slice(), Window::default(), "mem").unwrap();
    assert_eq!(back.len(), set.len());
    for (x, y) in set.samples().iter().zip(back.samples()) {
        assert_eq!(x.sample_id, y.sample_id);
        assert_eq!(x.subject_id, y.subject_id);
        assert_eq!(x.group, y.group);
        assert_eq!(x.n_trees(), y.n_trees());
        assert_eq!(x.n_ends(), y.n_ends());
        for (p, q) in x.end_points().iter().zip(y.end_points()) {
            assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
        }
    }
}
