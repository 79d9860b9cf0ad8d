use std::f64::consts::LN_2;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qentropy::dist::{shannon_entropy, Distribution};
use qentropy::encodings::{projected_encoding_spectral, OracleKind};
use qentropy::estimator::{
    analytic_ledger, derive, estimate_with, heavy_entropy, reconstruct, total_query_bound, EstimatorParams, Mode,
};
use qentropy::qsub::QueryLedger;

fn dist(max_n: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.0f64..1.0, 4..=max_n)
        .prop_filter("nonzero total", |w| w.iter().sum::<f64>() > 1e-3)
        .prop_map(|w| Distribution::normalized(w).unwrap())
}

/// Labels the ideal QSVE calls heavy: `√p` rounds to at least one grid step.
fn heavy_here(p: &Distribution, m: usize) -> Vec<f64> {
    let scale = (m as f64).exp2();
    p.probs().iter().copied().filter(|&x| (x.sqrt() * scale - 0.5).ceil() >= 1.0).collect()
}

fn power_sum(p: &[f64], a: f64) -> f64 {
    p.iter().map(|&x| x.powf(1.0 - a) - x.powf(1.0 + a)).sum::<f64>() / (2.0 * a * LN_2)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn power_sum_sandwich(p in dist(200), gamma in 1.2f64..3.0) {
        let d = qentropy::estimator::derive_params(&EstimatorParams::new(p.n(), gamma, 0.1).unwrap(), 1.0).unwrap();
        let heavy: Vec<f64> = p.probs().iter().copied().filter(|&x| x >= d.beta_prime).collect();
        let h: f64 = heavy.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.log2()).sum();
        let f = power_sum(&heavy, d.a);
        prop_assert!(h - 1e-9 <= f && f <= d.gamma_heavy * h + 1e-9);
    }

    #[test]
    fn injected_budget_errors_stay_within_eps(p in dist(64), gamma in 1.3f64..2.5, eps in 0.05f64..0.4) {
        let n = p.n();
        let params = EstimatorParams::new(n, gamma, eps).unwrap();
        let der = derive(&params, 1.0).unwrap();
        let d = &der.params;
        let enc = projected_encoding_spectral(&p, OracleKind::Classical);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rep = heavy_entropy(&enc, d, (&der.pos, &der.neg), Mode::Exact, &mut rng, &mut QueryLedger::new()).unwrap();
        let f = power_sum(&heavy_here(&p, d.m_bits), d.a);
        for (sp, sm) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let fp = rep.f_plus_amp + sp * d.eps3;
            let fm = rep.f_minus_amp + sm * d.eps3;
            let err = (reconstruct(d, fp, fm) - f).abs();
            prop_assert!(err <= eps, "err {} > eps {}", err, eps);
        }
    }

    #[test]
    fn run_ledger_is_analytic(p in dist(40), gamma in 1.3f64..3.0, seed in any::<u64>(), quantum in any::<bool>()) {
        let kind = if quantum { OracleKind::Quantum } else { OracleKind::Classical };
        let enc = projected_encoding_spectral(&p, kind);
        let params = EstimatorParams::new(p.n(), gamma, 0.2).unwrap();
        let der = derive(&params, enc.alpha).unwrap();
        for mode in [Mode::Exact, Mode::Sampled] {
            let rep = estimate_with(&enc, &params, &der, mode, seed).unwrap();
            prop_assert_eq!(rep.ledger, analytic_ledger(&der.params, enc.ancilla_count, mode.repetitions()));
        }
    }
}

proptest! {
    #[test]
    fn gamma_rounding(n in 4usize..1_000_000, gamma in 1.01f64..6.0) {
        let (m, sb, gp) = qentropy::estimator::round_beta(n, gamma);
        prop_assert_eq!(sb, (-(m as f64)).exp2());
        prop_assert!(gp <= gamma + 1e-12);
        let nf = n as f64;
        prop_assert!(nf.powf(1.0 / (2.0 * gp * gp)) <= 2.0 * nf.powf(1.0 / (2.0 * gamma * gamma)) * (1.0 + 1e-12));
    }
}

#[test]
fn quantum_path_matches_classical_on_diagonal_states() {
    let p = Distribution::zipf(32, 0.5).unwrap();
    let h = shannon_entropy(&p);
    let params = EstimatorParams::new(32, 1.5, 0.1).unwrap();
    let run = |kind| {
        let enc = projected_encoding_spectral(&p, kind);
        estimate_with(&enc, &params, &derive(&params, enc.alpha).unwrap(), Mode::Exact, 0).unwrap()
    };
    let (mut c, mut q) = (run(OracleKind::Classical), run(OracleKind::Quantum));
    c.check_against(h);
    q.check_against(h);
    assert_eq!((c.within_guarantee, q.within_guarantee), (Some(true), Some(true)));
    let ratio = q.ledger.queries() as f64 / c.ledger.queries() as f64;
    let rt = 32f64.sqrt();
    assert!(ratio >= 0.5 * rt && ratio <= 2.0 * rt, "ratio {ratio}");
}

#[test]
fn bound_covers_sweep_sizes() {
    for e in 6..=14 {
        let n = 1usize << e;
        for gamma in [1.5, 2.0, 3.0] {
            let params = EstimatorParams::new(n, gamma, 0.1).unwrap();
            let d = derive(&params, 1.0).unwrap();
            let q = analytic_ledger(&d.params, 2 * e, 1).queries() as f64;
            assert!(q <= total_query_bound(&params, 1.0), "n = {n}, gamma = {gamma}: {q}");
        }
    }
}

#[test]
fn exact_mode_is_deterministic_and_seed_independent() {
    let p = Distribution::zipf(128, 1.0).unwrap();
    let enc = projected_encoding_spectral(&p, OracleKind::Classical);
    let params = EstimatorParams::new(128, 1.5, 0.1).unwrap();
    let der = derive(&params, 1.0).unwrap();
    let a = estimate_with(&enc, &params, &der, Mode::Exact, 1).unwrap();
    let b = estimate_with(&enc, &params, &der, Mode::Exact, 99).unwrap();
    assert_eq!(a.h_tilde, b.h_tilde);
    let mut c = estimate_with(&enc, &params, &der, Mode::Sampled, 5).unwrap();
    let d = estimate_with(&enc, &params, &der, Mode::Sampled, 5).unwrap();
    assert_eq!(c.h_tilde, d.h_tilde);
    c.check_against(shannon_entropy(&p));
    assert!(c.within_guarantee.is_some() && c.guarantee_interval.is_some());
}
