use bvsr_core::model::EffectDraw;
use bvsr_core::rao_blackwell::{draw_terms, predict, sparsify_by_pip, RbAccumulator};
use bvsr_core::simulate::{sim_genotypes, sim_phenotypes, SimulationSpec};
use bvsr_core::{GenotypeMatrix, Response};

fn data() -> (GenotypeMatrix, Response) {
    let spec = SimulationSpec::new(12, 60, 0.5, 21);
    let (raw, _) = sim_genotypes(&spec).unwrap();
    let (y, _) = sim_phenotypes(&raw, &spec).unwrap();
    (raw.impute_and_center().unwrap(), Response::new(&y).unwrap())
}

fn ss_centered(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum()
}

fn log_normal(x: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - x * x / (2.0 * var)
}

/// Conditional log odds of `γ_j = 1` and `E(β_j | γ_j = 1, ·)` by 1-D
/// quadrature over `β_j`, intercept integrated under a flat prior.
fn oracle(g: &GenotypeMatrix, y: &Response, draw: &EffectDraw, h: f64, pi: f64, j: usize) -> (f64, f64) {
    let s = g.col_variance();
    let others: Vec<(usize, f64)> =
        draw.gamma.iter().zip(&draw.beta).filter(|(&i, _)| i != j).map(|(&i, &b)| (i, b)).collect();
    let mut r = y.values().to_vec();
    for &(i, b) in &others {
        for (ri, xi) in r.iter_mut().zip(g.column(i)) {
            *ri -= b * xi;
        }
    }
    let odds_h = h / (1.0 - h);
    let s_minus: f64 = others.iter().map(|&(i, _)| s[i]).sum();
    let sig_plus = odds_h / (s_minus + s[j]);
    let tau = draw.tau;
    let x = g.column(j);
    let log_lik = |b: f64| {
        let e: Vec<f64> = r.iter().zip(x).map(|(ri, xi)| ri - b * xi).collect();
        -0.5 * tau * ss_centered(&e)
    };
    let xtx: f64 = x.iter().map(|v| v * v).sum();
    let xtr: f64 = x.iter().zip(&r).map(|(a, b)| a * b).sum();
    let centre = xtr / (xtx + 1.0 / sig_plus);
    let sd = 1.0 / (tau * (xtx + 1.0 / sig_plus)).sqrt();
    let m = 8001;
    let step = 30.0 * sd / (m - 1) as f64;
    let mut logs = Vec::with_capacity(m);
    let mut bs = Vec::with_capacity(m);
    for i in 0..m {
        let b = centre - 15.0 * sd + i as f64 * step;
        let w: f64 = if i == 0 || i == m - 1 { 0.5 } else { 1.0 };
        logs.push(w.ln() + step.ln() + log_normal(b, sig_plus / tau) + log_lik(b));
        bs.push(b);
    }
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let z: f64 = weights.iter().sum();
    let log_marg = top + z.ln();
    let mean = weights.iter().zip(&bs).map(|(w, b)| w * b).sum::<f64>() / z;
    let mut log_odds = log_marg - log_lik(0.0) + pi.ln() - (1.0 - pi).ln();
    if !others.is_empty() {
        let sig_minus = odds_h / s_minus;
        for &(_, b) in &others {
            log_odds += log_normal(b, sig_plus / tau) - log_normal(b, sig_minus / tau);
        }
    }
    (log_odds, mean)
}

#[test]
fn inclusion_terms_match_quadrature() {
    let (g, y) = data();
    let draws = [
        EffectDraw { gamma: vec![1, 4, 7], beta: vec![0.4, -0.2, 0.1], tau: 1.3, pve: 0.0 },
        EffectDraw { gamma: vec![0], beta: vec![0.8], tau: 0.7, pve: 0.0 },
        EffectDraw { gamma: vec![], beta: vec![], tau: 2.0, pve: 0.0 },
    ];
    for draw in &draws {
        for &(h, pi) in &[(0.4, 0.1), (0.9, 0.02)] {
            let terms = draw_terms(&g, &y, draw, h, pi);
            assert_eq!(terms.len(), 12);
            for (j, t) in terms {
                let (log_odds, mean) = oracle(&g, &y, draw, h, pi, j);
                assert!((t.log_odds - log_odds).abs() < 1e-7, "j={j}: {} vs {log_odds}", t.log_odds);
                assert!((t.cond_mean - mean).abs() < 1e-7 * mean.abs().max(1.0), "j={j}: {} vs {mean}", t.cond_mean);
                assert!((t.prob - 1.0 / (1.0 + (-log_odds).exp())).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn accumulator_averages_and_merges() {
    let (g, y) = data();
    let d1 = EffectDraw { gamma: vec![2], beta: vec![0.3], tau: 1.0, pve: 0.0 };
    let d2 = EffectDraw { gamma: vec![2, 5], beta: vec![0.3, -0.5], tau: 1.1, pve: 0.0 };
    let mut a = RbAccumulator::new(12);
    assert!(a.pip_estimate().is_err());
    a.update(&g, &y, &d1, 0.3, 0.05);
    let mut b = RbAccumulator::new(12);
    b.update(&g, &y, &d2, 0.5, 0.1);
    a.merge(&b).unwrap();
    let t1 = draw_terms(&g, &y, &d1, 0.3, 0.05);
    let t2 = draw_terms(&g, &y, &d2, 0.5, 0.1);
    let pip = a.pip_estimate().unwrap();
    let beta = a.posterior_mean_beta().unwrap();
    for j in 0..12 {
        let want = (t1[j].1.prob + t2[j].1.prob) / 2.0;
        assert!((pip[j] - want).abs() < 1e-14);
        let want_b = (t1[j].1.prob * t1[j].1.cond_mean + t2[j].1.prob * t2[j].1.cond_mean) / 2.0;
        assert!((beta[j] - want_b).abs() < 1e-14);
    }
    assert!(a.merge(&RbAccumulator::new(3)).is_err());
}

#[test]
fn prediction_and_sparsification() {
    let yhat = predict(&[1.0, 2.0], &[0.5, -1.0], &[0.5, 1.0], 3.0).unwrap();
    assert!((yhat - (0.25 - 1.0 + 3.0)).abs() < 1e-15);
    assert!(predict(&[1.0], &[0.5, -1.0], &[0.5, 1.0], 3.0).is_err());
    let s = sparsify_by_pip(&[1.0, 2.0, 3.0, 4.0], &[0.1, 0.9, 0.5, 0.9], 2);
    assert_eq!(s, vec![0.0, 2.0, 0.0, 4.0]);
}
