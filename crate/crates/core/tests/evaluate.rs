use bvsr_core::evaluate::{
    calibration_bins, mspe, power_curve, region_summaries, rpv, single_snp_bf, true_positives_at, Covariance,
    SINGLE_SNP_SIGMAS,
};
use bvsr_core::likelihood::single_covariate_log_bf;
use bvsr_core::simulate::{sim_genotypes, sim_phenotypes, EffectDist, SimulationSpec};
use bvsr_core::{chain_rng, Response, SnpInfo};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[test]
fn double_exponential_has_variance_two() {
    let mut rng = chain_rng(1, 0);
    let m = 400_000;
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..m {
        let v = EffectDist::DoubleExponential.sample(&mut rng);
        s1 += v;
        s2 += v * v;
    }
    assert!((s1 / m as f64).abs() < 0.01);
    assert!((s2 / m as f64 - 2.0).abs() < 0.03);
}

#[test]
fn single_snp_bf_averages_on_the_bf_scale() {
    let spec = SimulationSpec::new(5, 100, 0.3, 2);
    let (raw, _) = sim_genotypes(&spec).unwrap();
    let (y, _) = sim_phenotypes(&raw, &spec).unwrap();
    let g = raw.impute_and_center().unwrap();
    let r = Response::new(&y).unwrap();
    for j in 0..5 {
        let xty: f64 = g.column(j).iter().zip(r.values()).map(|(a, b)| a * b).sum();
        let mean: f64 = SINGLE_SNP_SIGMAS
            .iter()
            .map(|s| single_covariate_log_bf(g.col_sum_sq(j), xty, r.centered_ss(), 100, s * s).exp())
            .sum::<f64>()
            / 3.0;
        assert!((single_snp_bf(&g, &r, j) - mean.ln()).abs() < 1e-10);
    }
}

#[test]
fn power_curve_matches_naive_counting() {
    let mut rng = chain_rng(5, 0);
    for _ in 0..20 {
        let n = 50;
        let scores: Vec<f64> = (0..n).map(|_| (rng.random_range(0..15) as f64) / 3.0).collect();
        let causal: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.3).collect();
        let curve = power_curve(&scores, &causal).unwrap();
        let mut thresholds = scores.clone();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        assert_eq!(curve.len(), thresholds.len());
        for (pt, &t) in curve.iter().zip(&thresholds) {
            let tp = (0..n).filter(|&i| scores[i] >= t && causal[i]).count();
            let fp = (0..n).filter(|&i| scores[i] >= t && !causal[i]).count();
            assert_eq!((pt.threshold, pt.true_pos, pt.false_pos), (t, tp, fp));
        }
        for max_fp in [0, 3, 10] {
            let naive = thresholds
                .iter()
                .map(|&t| ((0..n).filter(|&i| scores[i] >= t && causal[i]).count(), (0..n).filter(|&i| scores[i] >= t && !causal[i]).count()))
                .filter(|&(_, fp)| fp <= max_fp)
                .map(|(tp, _)| tp)
                .max()
                .unwrap_or(0);
            assert_eq!(true_positives_at(&curve, max_fp), naive);
        }
    }
}

#[test]
fn calibration_bins_count_and_judge() {
    let pips = [0.01, 0.02, 0.03, 0.96, 0.97, 1.0, 0.5];
    let causal = [false, false, true, true, true, true, false];
    let bins = calibration_bins(&pips, &causal).unwrap();
    assert_eq!(bins.len(), 20);
    assert_eq!(bins[0].count, 3);
    assert!((bins[0].causal_fraction - 1.0 / 3.0).abs() < 1e-15);
    assert!((bins[0].two_se - 2.0 * (2.0f64 / 9.0 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(bins[0].within_two_se(), Some(true));
    assert_eq!(bins[19].count, 3);
    assert_eq!(bins[10].within_two_se(), Some(false));
    assert_eq!(bins[5].within_two_se(), None);
    assert!(calibration_bins(&[1.5], &[true]).is_err());
}

#[test]
fn mspe_matches_monte_carlo() {
    let s = [0.5, 0.3, 0.2];
    let beta = [1.0, -0.5, 0.0];
    let bhat = [0.8, 0.0, 0.2];
    let tau: f64 = 2.0;
    let mut rng = chain_rng(9, 0);
    let m = 200_000;
    let mut acc = 0.0;
    for _ in 0..m {
        let x: Vec<f64> = s.iter().map(|v: &f64| v.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect();
        let e: f64 = StandardNormal.sample(&mut rng);
        let y: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + e / tau.sqrt();
        let yhat: f64 = x.iter().zip(&bhat).map(|(a, b)| a * b).sum();
        acc += (y - yhat) * (y - yhat);
    }
    let want = mspe(&bhat, &beta, tau, Covariance::Independent(&s)).unwrap();
    assert!((acc / m as f64 - want).abs() < 0.01, "{} vs {want}", acc / m as f64);
    assert!((rpv(&beta, &beta, tau, Covariance::Independent(&s)).unwrap() - 1.0).abs() < 1e-12);
    assert!(rpv(&[0.0; 3], &beta, tau, Covariance::Independent(&s)).unwrap().abs() < 1e-12);
    assert!(rpv(&[0.0; 3], &[0.0; 3], tau, Covariance::Independent(&s)).is_err());
}

#[test]
fn empirical_covariance_uses_the_columns() {
    let spec = SimulationSpec::new(4, 30, 0.3, 3);
    let g = sim_genotypes(&spec).unwrap().0.impute_and_center().unwrap();
    let beta = [0.0, 1.0, 0.0, -1.0];
    let bhat = [0.5, 0.5, 0.0, 0.0];
    let d: Vec<f64> = (0..30).map(|i| 0.5 * g.column(0)[i] - 0.5 * g.column(1)[i] + g.column(3)[i]).collect();
    let want = d.iter().map(|v| v * v).sum::<f64>() / 30.0 + 1.0;
    assert!((mspe(&bhat, &beta, 1.0, Covariance::Empirical(&g)).unwrap() - want).abs() < 1e-12);
}

#[test]
fn regions_partition_the_expected_count() {
    let meta: Vec<SnpInfo> = (0..40)
        .map(|j| SnpInfo { id: format!("s{j}"), chromosome: if j < 25 { "1" } else { "2" }.into(), position: j as u64 * 130_000 })
        .collect();
    let mut rng = chain_rng(4, 0);
    let pips: Vec<f64> = (0..40).map(|_| rng.random::<f64>()).collect();
    let gammas: Vec<Vec<usize>> = (0..50).map(|_| (0..40).filter(|_| rng.random::<f64>() < 0.1).collect()).collect();
    let refs: Vec<&[usize]> = gammas.iter().map(|g| g.as_slice()).collect();
    // non-overlapping windows partition the SNPs
    let tiles = region_summaries(&pips, &refs, &meta, None, 1_000_000, 1_000_000).unwrap();
    let total: f64 = tiles.iter().map(|r| r.e_count).sum();
    assert!((total - pips.iter().sum::<f64>()).abs() < 1e-12);
    assert_eq!(tiles.iter().map(|r| r.n_snps).sum::<usize>(), 40);
    for r in &tiles {
        let occupied = refs
            .iter()
            .filter(|g| g.iter().any(|&j| meta[j].chromosome == r.chromosome && (r.window_start..r.window_end).contains(&meta[j].position)))
            .count() as f64
            / 50.0;
        let p = r.prob_1.unwrap() + r.prob_2.unwrap() + r.prob_gt2.unwrap();
        assert!((p - occupied).abs() < 1e-12);
        assert!(r.e_count_truncated <= 1.0);
    }
    let sliding = region_summaries(&pips, &[], &meta, Some(&pips), 1_000_000, 500_000).unwrap();
    assert!(sliding.iter().all(|r| r.prob_1.is_none() && r.max_single_log10_bf.is_some()));
    assert!(sliding.len() > tiles.len());
}
