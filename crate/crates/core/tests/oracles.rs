mod common;

use common::{quadrature_covariance, taylor_expm};
use covloc::analytic::{analytic_covariance, build_a};
use covloc::bounds::{
    cov_bound, cov_bound_diffusion_only, cov_bound_meanfield_only, estimator_variance_bound,
    lambda_eta, q_entry_bound, surrogate_generator, surrogate_q, BoundInputs,
};
use covloc::lattice::cyclic_distance;
use covloc::localization::{choose_bandwidth, localize, spectral_norm};
use covloc::models::{fhn_model, linear_model, FhnParams, LinearParams};
use covloc::{LipschitzConstants, ModelKind};
use nalgebra::DMatrix;

const FIGURE_CONFIGS: [(f64, f64); 3] = [(0.0, 5.0), (20.0, 0.0), (20.0, 5.0)];

fn consts(l0: f64, lf: f64, lh: f64) -> LipschitzConstants {
    LipschitzConstants::new(l0, lf, lh).unwrap()
}

fn linear_inputs(d_u: f64, w: f64, t: f64, n: usize) -> BoundInputs {
    let model = linear_model(LinearParams::standard(d_u, w), n).unwrap();
    BoundInputs::for_model(&model, t, 1.0).unwrap()
}

#[test]
fn propagator_matches_taylor_oracle() {
    for (d_u, w) in FIGURE_CONFIGS {
        let sys = build_a(&LinearParams::standard(d_u, w), 12).unwrap();
        for t in [0.01, 0.3] {
            let oracle = taylor_expm(&(sys.a_matrix() * t));
            let err = (sys.propagator(t) - &oracle).amax() / oracle.amax();
            assert!(err < 1e-10, "d_u={d_u} w={w} t={t}: {err}");
        }
    }
}

#[test]
fn analytic_covariance_matches_quadrature_oracle() {
    for (d_u, w) in FIGURE_CONFIGS.into_iter().chain([(1.0, 0.0), (5.0, 0.5)]) {
        for n in [5, 16] {
            for t in [1.0, 5.0] {
                let p = LinearParams::standard(d_u, w);
                let sys = build_a(&p, n).unwrap();
                let exact = analytic_covariance(&sys, &DMatrix::zeros(n, n), p.sigma_u, t).unwrap();
                let oracle = quadrature_covariance(sys.a_matrix(), p.sigma_u, t, 2500);
                let rel = (exact.data() - &oracle).amax() / oracle.amax();
                assert!(rel < 1e-8, "d_u={d_u} w={w} n={n} t={t}: {rel}");
            }
        }
    }
}

#[test]
fn analytic_covariance_is_circulant() {
    for (d_u, w) in FIGURE_CONFIGS {
        let p = LinearParams::standard(d_u, w);
        let sys = build_a(&p, 64).unwrap();
        let c = analytic_covariance(&sys, &DMatrix::zeros(64, 64), p.sigma_u, 5.0).unwrap();
        let m = c.data();
        for r in 0..63 {
            for s in 0..64 {
                assert!((m[(r + 1, (s + 1) % 64)] - m[(r, s)]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn diffusion_only_covariance_decays_monotonically() {
    for d_u in [1.0, 5.0, 20.0] {
        let p = LinearParams::standard(d_u, 0.0);
        let sys = build_a(&p, 64).unwrap();
        let c = analytic_covariance(&sys, &DMatrix::zeros(64, 64), p.sigma_u, 5.0).unwrap();
        for k in 0..32 {
            assert!(c.data()[(0, k + 1)] <= c.data()[(0, k)], "d_u={d_u} k={k}");
        }
    }
}

#[test]
fn linear_drift_is_the_system_matrix() {
    for n in [8, 64] {
        let p = LinearParams::new(1.3, 2.0, 0.7, 0.5).unwrap();
        let model = linear_model(p, n).unwrap();
        let a = build_a(&p, n).unwrap();
        let mut seed = 0x2545_f491_4f6c_dd1du64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
        };
        for _ in 0..100 {
            let u: Vec<f64> = (0..n).map(|_| next()).collect();
            let mut out = vec![0.0; n];
            model.drift(0.0, &u, &mut out);
            let expected = a.a_matrix() * nalgebra::DVector::from_column_slice(&u);
            for (x, y) in out.iter().zip(expected.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn surrogate_q_three_cycle_golden() {
    let c = consts(-1.0, 0.5, 0.0);
    let q = surrogate_q(&c, 3, 1.0, 1.0).unwrap();
    let oracle = taylor_expm(&(surrogate_generator(&c, 3).unwrap() * 2.0));
    assert!((&q - &oracle).amax() < 1e-13);
    for i in 0..3 {
        for j in 0..3 {
            let golden = if i == j {
                0.366_524_712_245_242_63
            } else {
                0.316_737_643_877_378_7
            };
            assert!((q[(i, j)] - golden).abs() < 1e-14);
        }
    }
}

#[test]
fn surrogate_q_matches_taylor_oracle_with_mean_field() {
    let c = consts(-2.0, 0.5, 0.3);
    for s in [0.1, 1.0, 5.0] {
        let q = surrogate_q(&c, 16, 5.0, s).unwrap();
        let e = taylor_expm(&(surrogate_generator(&c, 16).unwrap() * s));
        let oracle = &e * e.transpose();
        assert!((&q - &oracle).amax() < 1e-12 * oracle.amax().max(1.0));
    }
}

fn q_violations(c: &LipschitzConstants, n: usize) -> Vec<(usize, usize, f64, f64)> {
    let mut out = Vec::new();
    for s in [0.1, 1.0, 5.0] {
        let q = surrogate_q(c, n, s, s).unwrap();
        for beta in [0.1, 0.5, 1.0] {
            for i in 1..=n {
                for j in 1..=n {
                    let b = q_entry_bound(i, j, c, n, s, beta).unwrap();
                    if !(q[(i - 1, j - 1)] < b) {
                        out.push((i, j, s, beta));
                    }
                }
            }
        }
    }
    out
}

#[test]
fn q_entry_bound_dominates_contracting_surrogates() {
    for c in [
        consts(-2.0, 0.5, 0.3),
        consts(-3.0, 1.0, 1.0),
        consts(-6.0, 0.0, 5.0),
        consts(-41.0, 20.0, 0.0),
    ] {
        assert!(q_violations(&c, 16).is_empty(), "{c:?}");
    }
}

#[test]
fn q_entry_bound_fails_for_a_marginal_surrogate() {
    // lambda_0 + 2 lambda_F = 0: Q(s) = e^{2Gs} spreads mass faster than the
    // single-exponential bound allows.
    let v = q_violations(&consts(-1.0, 0.5, 0.0), 16);
    assert!(!v.is_empty());
    assert!(v.iter().all(|&(_, _, s, _)| s == 5.0));
}

/// `(d_u, w, t, beta, d)` for every entry where the analytic covariance is not
/// below the bound.
fn dominance_violations() -> Vec<(f64, f64, f64, f64, usize)> {
    let n = 64;
    let mut out = Vec::new();
    for (d_u, w) in FIGURE_CONFIGS {
        let p = LinearParams::standard(d_u, w);
        let sys = build_a(&p, n).unwrap();
        for t in [1.0, 5.0] {
            let c = analytic_covariance(&sys, &DMatrix::zeros(n, n), p.sigma_u, t).unwrap();
            let inputs = linear_inputs(d_u, w, t, n);
            for beta in [0.1, 0.2, 0.5, 1.0] {
                for i in 1..=n {
                    for j in 1..=n {
                        let b = cov_bound(i, j, beta, &inputs).unwrap().total;
                        if c.data()[(i - 1, j - 1)].abs() > b {
                            let d = cyclic_distance(i, j, n).unwrap();
                            out.push((d_u, w, t, beta, d));
                        }
                    }
                }
            }
        }
    }
    out
}

#[test]
fn bound_dominates_exact_linear_covariance() {
    let v = dominance_violations();
    // Only the near-antipodal entries of the short-time diffusion-only case
    // at the two largest beta escape the bound (see the README).
    let mut counts = std::collections::BTreeMap::new();
    for (d_u, w, t, beta, d) in v {
        assert_eq!((d_u, w, t), (20.0, 0.0, 1.0));
        *counts.entry((beta.to_bits(), d)).or_insert(0) += 1;
    }
    let expected: std::collections::BTreeMap<_, _> = [
        ((0.5f64.to_bits(), 32), 64),
        ((1.0f64.to_bits(), 31), 128),
        ((1.0f64.to_bits(), 32), 64),
    ]
    .into_iter()
    .collect();
    assert_eq!(counts, expected);
}

#[test]
fn specialized_bounds_agree_with_the_general_bound() {
    let diff = linear_inputs(20.0, 0.0, 5.0, 64);
    for beta in [0.1, 0.2, 0.7] {
        for j in 1..=64 {
            let general = cov_bound(1, j, beta, &diff).unwrap();
            assert_eq!(
                general.total,
                cov_bound_diffusion_only(1, j, beta, &diff).unwrap()
            );
        }
    }
    let mf = linear_inputs(0.0, 5.0, 5.0, 64);
    let limit = cov_bound_meanfield_only(&mf).unwrap();
    let mut prev = f64::INFINITY;
    for beta in [5.0, 10.0, 20.0, 40.0] {
        let gap = (cov_bound(1, 2, beta, &mf).unwrap().total - limit).abs();
        assert!(gap <= prev);
        prev = gap;
    }
    assert!(prev / limit < 1e-12);
}

#[test]
fn bounds_grow_with_time_when_lambda_beta_is_positive() {
    let inputs = BoundInputs::new(consts(-1.0, 0.6, 0.4), 0.3, 0.2, 2, 1.5, 0.0, 32).unwrap();
    for beta in [0.5, 1.0, 2.0] {
        let (l, _) = lambda_eta(beta, &inputs.constants);
        assert!(l > 0.0);
        let mut prev = (0.0, 0.0);
        for k in 0..=40 {
            let i = inputs.with_t(0.1 * k as f64);
            let b = cov_bound(1, 5, beta, &i).unwrap().total;
            let e = estimator_variance_bound(&i, beta).unwrap();
            assert!(b >= prev.0 && e >= prev.1);
            prev = (b, e);
        }
    }
}

#[test]
fn estimator_variance_bound_golden_for_fhn() {
    let model = fhn_model(FhnParams::with_coupling(0.5, 0.0), 128).unwrap();
    let mut inputs = BoundInputs::for_model(&model, 0.1, 1.0).unwrap();
    inputs.sigma0_sq_frob = 0.0;
    let v = estimator_variance_bound(&inputs, 0.1).unwrap();
    let golden = 19_823_311.956_476_453;
    assert!(((v - golden) / golden).abs() < 1e-12, "{v}");
}

#[test]
fn fhn_constants_follow_coupling() {
    for (d_u, w) in [(0.02, 0.0), (0.5, 0.3), (10.0, 0.0), (0.0, 0.5)] {
        let model = fhn_model(FhnParams::with_coupling(d_u, w), 8).unwrap();
        let ModelKind::Fhn(p) = model.kind() else {
            unreachable!()
        };
        let c = covloc::lipschitz_constants(&model).unwrap();
        assert!((c.lambda_f - d_u / p.epsilon).abs() < 1e-12);
        assert!((c.lambda_h - w / p.epsilon).abs() < 1e-12);
        for u in [-2.0, -1.05, 0.0, 0.7, 1.9] {
            let j = p.rescaled_self_jacobian(u);
            let sym_off = 0.5 * (j[0][1] + j[1][0]);
            let tr = j[0][0] + j[1][1];
            let det = j[0][0] * j[1][1] - sym_off * sym_off;
            let top = tr / 2.0 + (tr * tr / 4.0 - det).max(0.0).sqrt();
            assert!(top <= c.lambda_0 + 1e-10, "d_u={d_u} w={w} u={u}");
        }
    }
}

#[test]
fn localization_meets_target_on_exact_covariance() {
    let p = LinearParams::standard(20.0, 0.0);
    let sys = build_a(&p, 64).unwrap();
    let c = analytic_covariance(&sys, &DMatrix::zeros(64, 64), p.sigma_u, 5.0).unwrap();
    let inputs = linear_inputs(20.0, 0.0, 5.0, 64);
    let coefficient = cov_bound_diffusion_only(1, 1, 0.2, &inputs).unwrap();
    for eps in [0.1, 0.01] {
        let choice = choose_bandwidth(eps, 0.2, coefficient, 64).unwrap();
        let localized = localize(&c, choice.bandwidth).unwrap();
        let err = spectral_norm(&(c.data() - localized.data())).unwrap();
        assert!(err <= eps, "eps={eps} L={} err={err}", choice.bandwidth);
    }
}
