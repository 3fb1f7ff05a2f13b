//! Acceptance suite: one PASS/FAIL line per criterion; exits nonzero if any fail.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use covloc::analytic::{analytic_covariance, build_a, circulant_covariance_row};
use covloc::bounds::{
    cov_bound_diffusion_only, cov_bound_meanfield_only, q_entry_bound, surrogate_q, BoundInputs,
};
use covloc::estimators::{
    monte_carlo_covariance, sample_covariance, stein_identity_check, TestFunction,
};
use covloc::integrator::{integrate, NoiseSource, StreamNoise};
use covloc::localization::{choose_bandwidth, localize, spectral_norm};
use covloc::models::{linear_model, LinearParams};
use covloc::{regime, simulate_ensemble, IntegratorConfig, LipschitzConstants};
use covloc_cli::experiments::{ls_slope, spatial_vs_mc, ComparisonSpec};
use nalgebra::DMatrix;

type Outcome = Result<String, String>;

const N: usize = 64;
const T: f64 = 5.0;

fn diffusion_params() -> LinearParams {
    LinearParams::standard(20.0, 0.0)
}

fn inputs(p: LinearParams, n: usize) -> BoundInputs {
    BoundInputs::for_model(&linear_model(p, n).unwrap(), T, 1.0).unwrap()
}

fn exact_diffusion() -> DMatrix<f64> {
    let p = diffusion_params();
    let sys = build_a(&p, N).unwrap();
    analytic_covariance(&sys, &DMatrix::zeros(N, N), p.sigma_u, T)
        .unwrap()
        .into_inner()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_analytic_vs_monte_carlo() -> Outcome {
    let p = diffusion_params();
    let exact = exact_diffusion();
    let cfg = IntegratorConfig::new(p.default_step(), T, 20_240_101).unwrap();
    let start = Instant::now();
    let ens =
        simulate_ensemble(&linear_model(p, N).unwrap(), &cfg, 8192).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let mut worst = 0.0f64;
    for k in 0..=32 {
        let r = monte_carlo_covariance(&ens, 0, k, 0).unwrap();
        let z = (r.estimate - exact[(0, k)]) / r.std_error.unwrap();
        worst = worst.max(z.abs());
    }
    ensure(worst < 5.0, || format!("max |z| = {worst:.2} over k <= 32"))?;
    ensure(secs <= 120.0, || format!("ensemble took {secs:.0} s"))?;
    Ok(format!(
        "K = 8192, max |z| = {worst:.2} over k <= 32, ensemble {secs:.1} s"
    ))
}

fn c2_exponential_decay() -> Outcome {
    let exact = exact_diffusion();
    let ks: Vec<f64> = (2..=15).map(|k| k as f64).collect();
    let logs: Vec<f64> = (2..=15).map(|k| exact[(0, k)].abs().ln()).collect();
    let slope = ls_slope(&ks, &logs);
    ensure(slope < 0.0, || format!("slope {slope}"))?;
    let inp = inputs(diffusion_params(), N);
    let mut min_ratio = f64::INFINITY;
    for k in 0..=N / 2 {
        let b = cov_bound_diffusion_only(1, 1 + k, 0.2, &inp).unwrap();
        let c = exact[(0, k)].abs();
        ensure(c < b, || format!("k = {k}: |cov| {c:e} >= bound {b:e}"))?;
        min_ratio = min_ratio.min(b / c);
    }
    Ok(format!(
        "slope {slope:.4}, bound/|cov| >= {min_ratio:.3} for k <= 32"
    ))
}

fn c3_one_over_n() -> Outcome {
    let p = LinearParams::standard(0.0, 5.0);
    let mut scaled = Vec::new();
    let mut coef = 0.0;
    for n in [16, 32, 64, 128] {
        let row = circulant_covariance_row(&p, n, T).unwrap();
        scaled.push(row[1] * n as f64);
        coef = cov_bound_meanfield_only(&inputs(p, n)).unwrap() * n as f64;
    }
    let (lo, hi) = scaled
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    ensure(hi / lo - 1.0 < 0.01, || {
        format!("N cov spread {lo} .. {hi}")
    })?;
    ensure((coef - 0.41330).abs() < 5e-5, || {
        format!("coefficient {coef}")
    })?;
    ensure(hi < coef, || {
        format!("N cov {hi} exceeds coefficient {coef}")
    })?;
    Ok(format!(
        "N cov in [{lo:.5}, {hi:.5}], coefficient {coef:.5}"
    ))
}

fn c4_combined_shape() -> Outcome {
    let both = circulant_covariance_row(&LinearParams::standard(20.0, 5.0), N, T).unwrap();
    let mean_field = circulant_covariance_row(&LinearParams::standard(0.0, 5.0), N, T).unwrap();
    let half = &both[..=N / 2];
    let min = half.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(min > 0.0, || format!("minimum {min}"))?;
    ensure(half.windows(2).all(|w| w[1] <= w[0]), || {
        "curve is not nonincreasing".into()
    })?;
    let plateau = half[N / 2];
    let flat = (half[3 * N / 8] - plateau) / plateau;
    ensure(flat < 0.05, || {
        format!("no plateau: cov(3N/8) exceeds cov(N/2) by {flat:.3}")
    })?;
    let ratio = plateau * N as f64 / (mean_field[N / 2] * N as f64);
    ensure((0.5..=2.0).contains(&ratio), || {
        format!("plateau ratio {ratio}")
    })?;
    Ok(format!(
        "cov(0) = {:.4}, plateau {plateau:.3e}, plateau / mean-field plateau = {ratio:.3}",
        half[0]
    ))
}

fn c5_q_bound() -> Outcome {
    let n = 16;
    let sets = [
        (-2.0, 0.5, 0.3),
        (-3.0, 1.0, 1.0),
        (-6.0, 0.0, 5.0),
        (-41.0, 20.0, 0.0),
    ];
    let mut combos = 0;
    let mut min_gap = f64::INFINITY;
    for (l0, lf, lh) in sets {
        let c = LipschitzConstants::new(l0, lf, lh).unwrap();
        for s in [0.1, 1.0, 5.0] {
            let q = surrogate_q(&c, n, s, s).unwrap();
            for beta in [0.1, 0.5, 1.0] {
                combos += 1;
                for i in 1..=n {
                    for j in 1..=n {
                        let b = q_entry_bound(i, j, &c, n, s, beta).unwrap();
                        let v = q[(i - 1, j - 1)];
                        ensure(v < b, || {
                            format!("{c:?} s={s} beta={beta} ({i},{j}): {v:e} >= {b:e}")
                        })?;
                        min_gap = min_gap.min(b - v);
                    }
                }
            }
        }
    }
    Ok(format!(
        "{combos} combinations, smallest margin {min_gap:.3e}"
    ))
}

fn c6_stein() -> Outcome {
    let id = TestFunction::component(0);
    let neg = TestFunction::new(|x| -x[0], |_, out| out[0] = -1.0);
    let sq = TestFunction::new(|x| x[0] * x[0], |x, out| out[0] = 2.0 * x[0]);
    let mut parts = Vec::new();
    for (name, f, g) in [
        ("x, x", &id, &id),
        ("x^2, x^2", &sq, &sq),
        ("x, -x", &id, &neg),
    ] {
        let c = stein_identity_check(f, g, 1, 100_000, 64, 11).unwrap();
        let ratio = c.residual / c.combined_se();
        ensure(ratio < 3.0, || {
            format!("{name}: residual {:.4} = {ratio:.2} SE", c.residual)
        })?;
        parts.push(format!("{name}: {ratio:.2} SE"));
    }
    Ok(parts.join(", "))
}

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

fn c7_discretization_order() -> Outcome {
    let n = 8;
    let model = linear_model(LinearParams::standard(1.0, 1.0), n).unwrap();
    let (paths, h_fine, levels, t) = (4000, 1.25e-3, 3, 1.0);
    let n_fine = (t / h_fine) as usize;
    let mut sums = vec![0.0; levels];
    for path in 0..paths {
        let mut fine = vec![0.0; n_fine * n];
        StreamNoise::for_sample(77, path as u64).fill_standard_normal(&mut fine);
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
            integrate(
                &model,
                &mut state,
                0.0,
                h_fine * m as f64,
                steps,
                &mut Replay { draws, pos: 0 },
            )
            .map_err(|e| e.to_string())?;
            finals.push(state);
        }
        for level in 0..levels {
            sums[level] += finals[level]
                .iter()
                .zip(&finals[level + 1])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                / n as f64;
        }
    }
    let rms: Vec<f64> = sums.iter().map(|s| (s / paths as f64).sqrt()).collect();
    let ratios: Vec<f64> = rms.windows(2).map(|w| w[1] / w[0]).collect();
    ensure(ratios.iter().all(|r| (1.8..=2.2).contains(r)), || {
        format!("ratios {ratios:?}")
    })?;
    Ok(format!(
        "h = 1e-2 .. 1.25e-3, ratios {:.3}, {:.3}",
        ratios[0], ratios[1]
    ))
}

fn comparison(name: &str, t: f64) -> Vec<covloc_cli::experiments::ComparisonRow> {
    let p = regime(name).unwrap().params;
    let model = p.build(128).unwrap();
    let spec = ComparisonSpec {
        step: p.default_step(),
        seed: 5,
        times: vec![t],
        mc_k: 512,
        replicates: 20,
        component: 0,
        max_lag: 16,
    };
    spatial_vs_mc(&model, &spec).unwrap()
}

fn c8_spatial_averaging() -> Outcome {
    let f = comparison("regime-f", 1.0);
    let worst_f = f
        .iter()
        .map(|r| r.z_score().unwrap().abs())
        .fold(0.0, f64::max);
    ensure(worst_f < 5.0, || {
        let zs: Vec<String> = f
            .iter()
            .map(|r| format!("{:.1}", r.z_score().unwrap()))
            .collect();
        format!(
            "regime (f), t = 1: max |z| = {worst_f:.2}; z by lag [{}]",
            zs.join(", ")
        )
    })?;
    let b = comparison("regime-b", 5.0);
    let worst_b = b
        .iter()
        .map(|r| r.z_score().unwrap().abs())
        .fold(0.0, f64::max);
    ensure(worst_b > 5.0, || {
        format!("regime (b), t = 5: max |z| = {worst_b:.2}, expected > 5")
    })?;
    Ok(format!(
        "regime (f) t = 1: max |z| = {worst_f:.2} over lags <= 16; regime (b) t = 5: max |z| = {worst_b:.1}"
    ))
}

fn c9_localization() -> Outcome {
    let exact = exact_diffusion();
    let p = diffusion_params();
    let inp = inputs(p, N);
    let coef = cov_bound_diffusion_only(1, 1, 0.2, &inp).unwrap();
    let exact_c = covloc::BlockCovariance::new(exact.clone(), N, 1).unwrap();
    let tight = choose_bandwidth(0.01, 0.2, coef, N).unwrap();
    let err =
        spectral_norm(&(&exact - localize(&exact_c, tight.bandwidth).unwrap().data())).unwrap();
    ensure(err <= 0.01, || {
        format!("L = {}: error {err:e}", tight.bandwidth)
    })?;

    let loose = choose_bandwidth(0.1, 0.2, coef, N).unwrap();
    let l = loose.bandwidth;
    let model = linear_model(p, N).unwrap();
    let (mut raw, mut loc) = (Vec::new(), Vec::new());
    for rep in 0..20u64 {
        let cfg = IntegratorConfig::new(p.default_step(), T, 9_000 + rep).unwrap();
        let ens = simulate_ensemble(&model, &cfg, 100).unwrap();
        let c = sample_covariance(&ens).unwrap();
        raw.push(spectral_norm(&(c.data() - &exact)).unwrap());
        loc.push(spectral_norm(&(localize(&c, l).unwrap().data() - &exact)).unwrap());
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (v[9] + v[10]) / 2.0
    };
    let (m_raw, m_loc) = (median(&mut raw), median(&mut loc));
    ensure(m_loc < m_raw, || {
        format!("L = {l}: median localized {m_loc:.4} vs raw {m_raw:.4}")
    })?;
    Ok(format!(
        "eps = 0.01: L = {}{} with error {err:.1e}; K = 100, L = {l}: median error {m_loc:.4} vs raw {m_raw:.4}",
        tight.bandwidth,
        if tight.insufficient { " (capped at N/2)" } else { "" },
    ))
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn covloc(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_covloc"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "covloc {args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn c10_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg_linear = tmp.path().join("linear.toml");
    std::fs::write(
        &cfg_linear,
        r#"model = "linear-combined"
n_blocks = 16
n_samples = 64
t_end = 1.0
master_seed = 3
outputs = ["cov-curve", "cov-vs-n", "bounds-overlay", "spatial-vs-mc", "localization-report"]
n_values = [8, 16]
[bounds]
betas = [0.2, 0.5]
optimize = true
[comparison]
times = [0.5, 1.0]
replicates = 4
"#,
    )
    .unwrap();
    let cfg_fhn = tmp.path().join("fhn.toml");
    std::fs::write(
        &cfg_fhn,
        r#"model = "regime-c"
n_blocks = 16
n_samples = 16
t_end = 0.2
component = 2
outputs = ["cov-curve", "spatial-vs-mc", "localization-report"]
[localization]
epsilon = 0.5
[comparison]
replicates = 3
"#,
    )
    .unwrap();
    let cov_input = tmp.path().join("cov.cvl");
    let mut runs: Vec<(String, Vec<String>)> = Vec::new();
    for cfg in [&cfg_linear, &cfg_fhn] {
        let c = cfg.to_str().unwrap().to_string();
        for sub in ["simulate", "cov", "bounds", "run"] {
            runs.push((
                format!("{sub} {}", cfg.file_name().unwrap().to_string_lossy()),
                vec![sub.into(), "--config".into(), c.clone()],
            ));
        }
    }
    runs.push((
        "figure F4".into(),
        vec!["figure".into(), "F4".into(), "--svg".into()],
    ));
    runs.push((
        "localize".into(),
        vec![
            "localize".into(),
            "--input".into(),
            cov_input.to_str().unwrap().into(),
            "--epsilon".into(),
            "0.1".into(),
            "--coefficient".into(),
            "1.589".into(),
        ],
    ));

    let exact_c = covloc::BlockCovariance::new(exact_diffusion(), N, 1).unwrap();
    std::fs::write(&cov_input, covloc::io::encode_covariance(&exact_c, T)).unwrap();

    let mut checked = 0;
    for (label, args) in &runs {
        let mut outputs = Vec::new();
        for (k, threads) in ["1", "1", "4"].iter().enumerate() {
            let dir = tmp.path().join(format!("{}-{k}", label.replace(' ', "_")));
            let mut full: Vec<&str> = vec!["--threads", threads];
            full.extend(args.iter().map(String::as_str));
            full.extend(["--out", dir.to_str().unwrap()]);
            covloc(&full)?;
            outputs.push(read_dir(&dir));
        }
        ensure(outputs[0].len() > 1, || format!("{label}: no files"))?;
        ensure(outputs[0] == outputs[1], || {
            format!("{label}: reruns differ")
        })?;
        ensure(outputs[0] == outputs[2], || {
            format!("{label}: 1 vs 4 threads differ")
        })?;
        checked += outputs[0].len();
    }
    let a = covloc(&["models", "--list"])?;
    ensure(a == covloc(&["models", "--list"])?, || {
        "models --list differs".into()
    })?;
    Ok(format!(
        "{} invocations x 3 runs (1, 1, 4 threads), {checked} files byte-identical",
        runs.len()
    ))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "analytic vs Monte Carlo covariance (linear, d_u = 20)",
            c1_analytic_vs_monte_carlo,
        ),
        (
            "exponential decay and diffusion bound at beta = 0.2",
            c2_exponential_decay,
        ),
        ("1/N scaling under mean-field coupling", c3_one_over_n),
        ("combined coupling: decay then plateau", c4_combined_shape),
        ("surrogate Q dominated by its entry bound", c5_q_bound),
        ("Gaussian interpolation identity", c6_stein),
        ("strong discretization order one", c7_discretization_order),
        (
            "spatial averaging vs Monte Carlo (FHN)",
            c8_spatial_averaging,
        ),
        ("localization end to end", c9_localization),
        (
            "determinism across reruns and thread counts",
            c10_determinism,
        ),
    ];
    let mut failed = 0;
    for (k, (title, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {title} ({detail}) [{secs:.1} s]", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {title} ({why}) [{secs:.1} s]", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
