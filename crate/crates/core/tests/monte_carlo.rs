use covloc::analytic::{analytic_covariance, analytic_mean, build_a};
use covloc::estimators::{
    monte_carlo_covariance, sample_covariance, shifted_pair_covariance, spatial_average,
    TestFunction,
};
use covloc::integrator::{integrate, NoiseSource, StreamNoise};
use covloc::localization::{localize, spectral_norm};
use covloc::models::{fhn_model, linear_model, FhnParams, LinearParams};
use covloc::{simulate_ensemble, IntegratorConfig};
use nalgebra::{DMatrix, DVector};

struct Replay {
    draws: Vec<f64>,
    pos: usize,
}

impl NoiseSource for Replay {
    fn fill_standard_normal(&mut self, out: &mut [f64]) {
        out.copy_from_slice(&self.draws[self.pos..self.pos + out.len()]);
        self.pos += out.len();
    }
}

#[test]
fn uncoupled_ou_variance() {
    let model = linear_model(LinearParams::standard(0.0, 0.0), 4).unwrap();
    let cfg = IntegratorConfig::new(1e-3, 1.0, 17).unwrap();
    let ens = simulate_ensemble(&model, &cfg, 20_000).unwrap();
    let exact = 0.25 * (1.0 - (-2.0f64).exp()) / 2.0;
    assert!((exact - 0.108_083_2).abs() < 1e-6);
    for i in 0..4 {
        let r = monte_carlo_covariance(&ens, i, i, 0).unwrap();
        // Euler bias at h = 1e-3 is ~1e-4, well inside the sampling error.
        assert!(
            (r.estimate - exact).abs() < 4.0 * r.std_error.unwrap(),
            "{r:?}"
        );
    }
}

#[test]
fn ensemble_moments_match_exact_linear_solution() {
    let n = 16;
    let p = LinearParams::standard(5.0, 1.0);
    let model = linear_model(p, n)
        .unwrap()
        .with_initial_law(
            DVector::from_element(1, 1.0),
            DMatrix::from_element(1, 1, 0.3),
        )
        .unwrap();
    let sys = build_a(&p, n).unwrap();
    let t = 0.5;
    let h = p.default_step();
    let cfg = IntegratorConfig::new(h, (t / h).round() * h, 5).unwrap();
    let k = 4000;
    let ens = simulate_ensemble(&model, &cfg, k).unwrap();

    let mean = analytic_mean(&sys, &DVector::from_element(n, 1.0), cfg.t_end).unwrap();
    let cov0 = DMatrix::identity(n, n) * 0.09;
    let cov = analytic_covariance(&sys, &cov0, p.sigma_u, cfg.t_end).unwrap();
    for i in 0..n {
        let m = (0..k).map(|j| ens.value(j, i, 0)).sum::<f64>() / k as f64;
        let se = (cov.data()[(i, i)] / k as f64).sqrt();
        assert!(
            (m - mean[i]).abs() < 4.0 * se,
            "block {i}: {m} vs {}",
            mean[i]
        );
    }
    for lag in 0..=3 {
        let r = monte_carlo_covariance(&ens, 0, lag, 0).unwrap();
        let exact = cov.data()[(0, lag)];
        assert!(
            (r.estimate - exact).abs() < 5.0 * r.std_error.unwrap(),
            "lag {lag}"
        );
    }
}

/// RMS difference at time `t` between Euler paths with steps `h` and `h/2`
/// driven by the same Brownian path, for `h = h_fine * 2^level`.
fn coupled_rms(paths: usize, h_fine: f64, levels: usize, t: f64) -> Vec<f64> {
    let n = 8;
    let p = LinearParams::standard(1.0, 1.0);
    let model = linear_model(p, n).unwrap();
    let n_fine = (t / h_fine).round() as usize;
    let mut sums = vec![0.0; levels];
    for path in 0..paths {
        let mut fine = vec![0.0; n_fine * n];
        StreamNoise::for_sample(99, path as u64).fill_standard_normal(&mut fine);
        let mut finals = Vec::new();
        for level in 0..=levels {
            let m = 1usize << level;
            let steps = n_fine / m;
            let scale = 1.0 / (m as f64).sqrt();
            let mut draws = vec![0.0; steps * n];
            for s in 0..steps {
                for sub in 0..m {
                    for b in 0..n {
                        draws[s * n + b] += fine[(s * m + sub) * n + b] * scale;
                    }
                }
            }
            let mut state = vec![0.0; n];
            let mut noise = Replay { draws, pos: 0 };
            integrate(
                &model,
                &mut state,
                0.0,
                h_fine * m as f64,
                steps,
                &mut noise,
            )
            .unwrap();
            finals.push(state);
        }
        for level in 0..levels {
            let d2: f64 = finals[level]
                .iter()
                .zip(&finals[level + 1])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / n as f64;
            sums[level] += d2;
        }
    }
    sums.iter().map(|s| (s / paths as f64).sqrt()).collect()
}

#[test]
fn strong_error_halves_with_the_step() {
    // levels: (2.5e-3 vs 1.25e-3), (5e-3 vs 2.5e-3), (1e-2 vs 5e-3)
    let rms = coupled_rms(400, 1.25e-3, 3, 1.0);
    for w in rms.windows(2) {
        let ratio = w[1] / w[0];
        assert!((1.7..=2.3).contains(&ratio), "{rms:?}");
    }
}

#[test]
fn fhn_ensemble_stays_finite_and_bounded() {
    let p = FhnParams::with_coupling(0.5, 0.0);
    let model = fhn_model(p, 16).unwrap();
    let cfg = IntegratorConfig::new(p.default_step(), 0.2, 3).unwrap();
    let ens = simulate_ensemble(&model, &cfg, 64).unwrap();
    assert!(ens.as_slice().iter().all(|v| v.is_finite()));
    // the activator lives on the cubic's outer branches, |u| <~ 2
    assert!(ens.as_slice().chunks(2).all(|b| b[0].abs() < 3.0));
    let u_mean = spatial_average(&ens, &TestFunction::component(0)).estimate;
    assert!(u_mean.abs() < 2.5, "{u_mean}");
}

#[test]
fn spatial_average_agrees_with_monte_carlo_for_homogeneous_linear_field() {
    let n = 32;
    let model = linear_model(LinearParams::standard(5.0, 0.0), n).unwrap();
    let cfg = IntegratorConfig::new(1e-3, 1.0, 8).unwrap();
    let ens = simulate_ensemble(&model, &cfg, 400).unwrap();
    for lag in [0, 1, 3, 8] {
        let spatial = shifted_pair_covariance(&ens, lag, 0).unwrap();
        let mc = monte_carlo_covariance(&ens, 0, lag, 0).unwrap();
        let se = spatial.std_error.unwrap().hypot(mc.std_error.unwrap());
        assert!(
            (spatial.estimate - mc.estimate).abs() < 5.0 * se,
            "lag {lag}"
        );
        assert!(spatial.std_error.unwrap() < mc.std_error.unwrap());
    }
}

#[test]
fn sample_covariance_is_symmetric_psd() {
    let model = linear_model(LinearParams::standard(1.0, 0.5), 12).unwrap();
    let cfg = IntegratorConfig::new(1e-3, 0.5, 4).unwrap();
    let ens = simulate_ensemble(&model, &cfg, 30).unwrap();
    let c = sample_covariance(&ens).unwrap();
    assert_eq!(c.data(), &c.data().transpose());
    let eig = nalgebra::SymmetricEigen::new(c.data().clone());
    assert!(eig.eigenvalues.min() >= -1e-10 * c.data().trace());
}

#[test]
fn localized_sample_covariance_beats_raw() {
    let n = 32;
    let p = LinearParams::standard(20.0, 0.0);
    let model = linear_model(p, n).unwrap();
    let sys = build_a(&p, n).unwrap();
    let cfg = IntegratorConfig::new(1e-3, 1.0, 0).unwrap();
    let exact = analytic_covariance(&sys, &DMatrix::zeros(n, n), p.sigma_u, 1.0).unwrap();
    let mut raw = Vec::new();
    let mut loc = Vec::new();
    for rep in 0..6u64 {
        let cfg = IntegratorConfig {
            master_seed: 1000 + rep,
            ..cfg
        };
        let ens = simulate_ensemble(&model, &cfg, 50).unwrap();
        let c = sample_covariance(&ens).unwrap();
        raw.push(spectral_norm(&(c.data() - exact.data())).unwrap());
        let l = localize(&c, 8).unwrap();
        loc.push(spectral_norm(&(l.data() - exact.data())).unwrap());
    }
    raw.sort_by(f64::total_cmp);
    loc.sort_by(f64::total_cmp);
    assert!(loc[3] < raw[3], "{loc:?} vs {raw:?}");
}
