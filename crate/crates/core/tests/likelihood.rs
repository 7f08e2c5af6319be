use bvsr_core::likelihood::single_covariate_log_bf;
use bvsr_core::{chain_rng, GenotypeMatrix, ModelFactorization, Response, SnpInfo};
use rand::Rng;

fn data(seed: u64) -> (GenotypeMatrix, Response) {
    let (n, p) = (80, 6);
    let mut rng = chain_rng(seed, 0);
    let vals: Vec<f64> = (0..n * p).map(|_| rng.random_range(0..3) as f64).collect();
    let meta = (0..p).map(|j| SnpInfo { id: format!("s{j}"), ..Default::default() }).collect();
    let g = GenotypeMatrix::from_dense(n, p, vals, meta).unwrap().impute_and_center().unwrap();
    let y: Vec<f64> = (0..n).map(|i| 0.5 * g.column(1)[i] - 0.3 * g.column(4)[i] + rng.random::<f64>() * 2.0).collect();
    (g, Response::new(&y).unwrap())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn posterior_draws_have_the_right_moments() {
    let (g, y) = data(1);
    let sigma2 = 0.5;
    let fact = ModelFactorization::new(&g, &y, &[4, 1], Some(sigma2)).unwrap();
    // 2x2 posterior by hand, in index order (1, 4)
    let (x1, x4) = (g.column(1), g.column(4));
    let a = [dot(x1, x1) + 1.0 / sigma2, dot(x1, x4), dot(x4, x4) + 1.0 / sigma2];
    let b = [dot(x1, y.values()), dot(x4, y.values())];
    let det = a[0] * a[2] - a[1] * a[1];
    let mean = [(a[2] * b[0] - a[1] * b[1]) / det, (a[0] * b[1] - a[1] * b[0]) / det];
    let quad = b[0] * mean[0] + b[1] * mean[1];
    let rss = y.centered_ss() - quad;
    assert!((fact.quad() - quad).abs() < 1e-9 * quad);
    let mut rng = chain_rng(2, 0);
    let m = 40_000;
    let (mut tau_sum, mut b_sum) = (0.0, [0.0; 2]);
    let mut tb_sq = 0.0;
    for _ in 0..m {
        let d = fact.sample_beta_tau(&g, &mut rng);
        assert_eq!(d.gamma, vec![1, 4]);
        tau_sum += d.tau;
        b_sum[0] += d.beta[0];
        b_sum[1] += d.beta[1];
        // τ(β₁ − m₁)² has mean Ω₁₁ = a₂₂/det
        tb_sq += d.tau * (d.beta[0] - mean[0]).powi(2);
    }
    let n = y.len() as f64;
    let e_tau = n / rss;
    let sd_tau = (n / 2.0).sqrt() * 2.0 / rss;
    assert!((tau_sum / m as f64 - e_tau).abs() < 5.0 * sd_tau / (m as f64).sqrt());
    for r in 0..2 {
        assert!((b_sum[r] / m as f64 - mean[r]).abs() < 0.01 * mean[r].abs().max(0.1), "beta {r}");
    }
    assert!((tb_sq / m as f64 / (a[2] / det) - 1.0).abs() < 0.03);
}

#[test]
fn one_covariate_bf_matches_factorization() {
    let (g, y) = data(3);
    for j in 0..6 {
        for s2 in [0.01, 0.3, 4.0] {
            let f = ModelFactorization::new(&g, &y, &[j], Some(s2)).unwrap().log_bf().unwrap();
            let s = single_covariate_log_bf(g.col_sum_sq(j), dot(g.column(j), y.values()), y.centered_ss(), y.len(), s2);
            assert!((f - s).abs() < 1e-10);
        }
    }
    let empty = ModelFactorization::new(&g, &y, &[], None).unwrap();
    assert_eq!(empty.log_bf().unwrap(), 0.0);
}

#[test]
fn removing_what_was_added_restores_the_model() {
    let (g, y) = data(4);
    let mut f = ModelFactorization::new(&g, &y, &[0, 2], Some(0.2)).unwrap();
    let before = f.log_bf().unwrap();
    f.add(&g, &y, 5).unwrap();
    f.swap(&g, &y, 0, 3).unwrap();
    f.swap(&g, &y, 3, 0).unwrap();
    f.remove(5).unwrap();
    assert!((f.log_bf().unwrap() - before).abs() < 1e-10);
    assert!(f.add(&g, &y, 2).is_err());
    assert!(f.remove(4).is_err());
}

#[test]
fn shifting_the_response_matches_a_rebuild() {
    let (g, y) = data(5);
    let mut f = ModelFactorization::new(&g, &y, &[1, 3], Some(0.7)).unwrap();
    let mut v = y.values().to_vec();
    v.swap(3, 10);
    let deltas = [(3, v[3] - y.values()[3]), (10, v[10] - y.values()[10])];
    f.shift_response(&g, &deltas);
    let moved = Response::new(&v).unwrap();
    let fresh = ModelFactorization::new(&g, &moved, &[1, 3], Some(0.7)).unwrap();
    assert!((f.log_bf().unwrap() - fresh.log_bf().unwrap()).abs() < 1e-10);
}
