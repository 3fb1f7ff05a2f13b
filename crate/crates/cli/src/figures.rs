//! Figure registry: each entry regenerates the data behind one figure of the
//! covariance-decay study as CSV tables.
//!
//! | id  | content                                                              |
//! |-----|----------------------------------------------------------------------|
//! | F1  | linear, mean field only (w = 5): cov(u_1, u_i) at t = 5 for several N, patterns |
//! | F2  | linear, mean field only: cov(u_1, u_2) vs N with the 1/N bound       |
//! | F3  | linear, diffusion only, N = 64: cov(u_1, u_i) for d_u in {1, 5, 20}, patterns |
//! | F4  | linear, d_u = 20: cov(u_1, u_{1+k}), log scale, bound at beta = 0.2  |
//! | F5  | linear, w = 5, d_u in {1, 5, 20}: cov(u_1, u_i), patterns            |
//! | F6  | linear, d_u = 20, w = 5: cov(u_1, u_{1+k}) with bounds               |
//! | F7  | FHN diffusion regimes: spatiotemporal patterns                      |
//! | F8  | FHN diffusion regimes: cov(u_1, u_i), cov(v_1, v_i) at t = 5        |
//! | F9  | FHN mean-field regimes: spatiotemporal patterns                     |
//! | F10 | FHN mean-field regimes: cov(u_1, u_2) vs N at t in {3, 5}           |
//! | F11 | FHN regimes (a)-(e): patterns, spatial average vs Monte Carlo       |
//! | F12 | FHN regime (f): pattern, spatial average vs Monte Carlo             |

use std::path::Path;

use covloc::bounds::{
    cov_bound, cov_bound_diffusion_only, cov_bound_meanfield_only, optimize_beta, BoundInputs,
    DEFAULT_BETA_RANGE,
};
use covloc::models::{LinearParams, PresetParams};
use covloc::{
    linear_model, regime, simulate_ensemble, simulate_ensemble_snapshots, IntegratorConfig,
    LatticeModelSpec,
};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::experiments::{
    comparison_table, linear_row, mc_curve, pattern_table, spatial_vs_mc, ComparisonSpec,
};
use crate::output::{OutputSet, Table};
use crate::svg::LinePlot;

const LINEAR_T: f64 = 5.0;
const FHN_T: f64 = 5.0;
const BETA_OVERLAY: f64 = 0.2;
const COMPARISON_TIMES: [f64; 4] = [0.5, 1.0, 2.0, 5.0];

/// System and ensemble sizes of one reproduction scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleTable {
    pub name: String,
    /// System sizes of the linear mean-field figures (F1, F2).
    pub linear_ns: Vec<usize>,
    /// System size of the remaining linear figures.
    pub linear_n: usize,
    /// Monte Carlo ensemble overlaid on the exact linear curves.
    pub linear_k: usize,
    /// System size of the FHN figures.
    pub fhn_n: usize,
    /// Monte Carlo ensemble of the FHN covariance figures (F8, F10).
    pub fhn_k: usize,
    /// System sizes of F10.
    pub fhn_ns: Vec<usize>,
    /// Monte Carlo ensemble of the spatial-average comparisons (F11, F12).
    pub mc_k: usize,
    /// Independent single-realization spatial estimates per comparison.
    pub spatial_replicates: usize,
    /// Frame spacing of the spatiotemporal patterns.
    pub frame_dt: f64,
}

impl ScaleTable {
    pub fn desk() -> Self {
        Self {
            name: "desk".into(),
            linear_ns: vec![16, 32, 64, 128],
            linear_n: 64,
            linear_k: 1024,
            fhn_n: 128,
            fhn_k: 1024,
            fhn_ns: vec![16, 32, 64, 128],
            mc_k: 512,
            spatial_replicates: 20,
            frame_dt: 0.05,
        }
    }

    pub fn paper() -> Self {
        Self {
            name: "paper".into(),
            linear_ns: vec![16, 32, 64, 128],
            linear_n: 64,
            linear_k: 8192,
            fhn_n: 512,
            fhn_k: 8192,
            fhn_ns: vec![16, 32, 64, 128, 256, 512],
            mc_k: 512,
            spatial_replicates: 1,
            frame_dt: 0.01,
        }
    }

    pub fn named(name: &str) -> CliResult<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" => Ok(Self::paper()),
            other => Err(CliError::Config(format!(
                "unknown scale `{other}`; valid scales: desk, paper"
            ))),
        }
    }
}

type FigureFn = fn(&ScaleTable, u64, &mut OutputSet) -> CliResult<()>;

#[derive(Debug)]
pub struct FigureInfo {
    pub id: &'static str,
    pub title: &'static str,
    run: FigureFn,
}

pub const FIGURES: [FigureInfo; 12] = [
    FigureInfo {
        id: "F1",
        title: "linear mean field: cov(u_1, u_i) for several N",
        run: f1,
    },
    FigureInfo {
        id: "F2",
        title: "linear mean field: cov(u_1, u_2) vs N",
        run: f2,
    },
    FigureInfo {
        id: "F3",
        title: "linear diffusion: cov(u_1, u_i) for several d_u",
        run: f3,
    },
    FigureInfo {
        id: "F4",
        title: "linear diffusion d_u = 20: decay and bound",
        run: f4,
    },
    FigureInfo {
        id: "F5",
        title: "linear diffusion and mean field: cov(u_1, u_i)",
        run: f5,
    },
    FigureInfo {
        id: "F6",
        title: "linear d_u = 20, w = 5: decay and bounds",
        run: f6,
    },
    FigureInfo {
        id: "F7",
        title: "FHN diffusion regimes: patterns",
        run: f7,
    },
    FigureInfo {
        id: "F8",
        title: "FHN diffusion regimes: covariance at t = 5",
        run: f8,
    },
    FigureInfo {
        id: "F9",
        title: "FHN mean-field regimes: patterns",
        run: f9,
    },
    FigureInfo {
        id: "F10",
        title: "FHN mean-field regimes: cov(u_1, u_2) vs N",
        run: f10,
    },
    FigureInfo {
        id: "F11",
        title: "FHN regimes (a)-(e): spatial average vs Monte Carlo",
        run: f11,
    },
    FigureInfo {
        id: "F12",
        title: "FHN regime (f): spatial average vs Monte Carlo",
        run: f12,
    },
];

pub fn find_figure(id: &str) -> CliResult<&'static FigureInfo> {
    FIGURES
        .iter()
        .find(|f| f.id.eq_ignore_ascii_case(id))
        .ok_or_else(|| CliError::UnknownFigure {
            name: id.to_string(),
            valid: FIGURES.iter().map(|f| f.id.to_string()).collect(),
        })
}

#[derive(Serialize)]
struct FigureRecord<'a> {
    figure: &'a str,
    title: &'a str,
    seed: u64,
    scale: &'a ScaleTable,
}

/// Runs one figure into `dir`, writing its tables and `metadata.json`.
pub fn run_figure(
    id: &str,
    scale: &ScaleTable,
    seed: u64,
    dir: &Path,
    svg: bool,
) -> CliResult<Vec<String>> {
    let fig = find_figure(id)?;
    let mut out = OutputSet::create(dir, svg)?;
    (fig.run)(scale, seed, &mut out)?;
    out.finish(
        "figure",
        &FigureRecord {
            figure: fig.id,
            title: fig.title,
            seed,
            scale,
        },
    )
}

fn linear(d_u: f64, w: f64) -> LinearParams {
    LinearParams::standard(d_u, w)
}

fn model_of(name: &str, n: usize) -> CliResult<(LatticeModelSpec, f64)> {
    let p = regime(name)?.params;
    Ok((p.build(n)?, p.default_step()))
}

fn linear_ensemble(
    p: &LinearParams,
    n: usize,
    k: usize,
    seed: u64,
) -> CliResult<covloc::EnsembleState> {
    let model = linear_model(*p, n)?;
    let h = p.default_step();
    let cfg = IntegratorConfig::new(h, LINEAR_T, seed)?;
    Ok(simulate_ensemble(&model, &cfg, k)?)
}

/// Exact and sampled `cov(u_1, u_i)`, `i = 1..N`, of one linear configuration.
fn push_linear_row(
    table: &mut Table,
    label: f64,
    p: &LinearParams,
    n: usize,
    k: usize,
    seed: u64,
) -> CliResult<Vec<(f64, f64)>> {
    let exact = linear_row(p, n, LINEAR_T)?;
    let ens = linear_ensemble(p, n, k, seed)?;
    let mut curve = Vec::with_capacity(n);
    for i in 0..n {
        let r = covloc::estimators::monte_carlo_covariance(&ens, 0, i, 0)?;
        let d = i.min(n - i);
        table.push(vec![
            label.into(),
            (i + 1).into(),
            d.into(),
            exact[i].into(),
            r.estimate.into(),
            r.std_error.into(),
        ]);
        curve.push(((i + 1) as f64, exact[i]));
    }
    Ok(curve)
}

fn f1(s: &ScaleTable, seed: u64, out: &mut OutputSet) -> CliResult<()> {
    let p = linear(0.0, 5.0);
    let mut table = Table::new(&[
        "n",
        "i",
        "distance",
        "analytic",
        "monte_carlo",
        "monte_carlo_se",
    ]);
    let mut plot = LinePlot::new("cov(u_1, u_i), w = 5, t = 5", "i", "covariance");
    for (k, &n) in s.linear_ns.iter().enumerate() {
        let curve = push_linear_row(&mut table, n as f64, &p, n, s.linear_k, seed + k as u64)?;
        plot = plot.line(&format!("N = {n}"), curve);
        let pattern = pattern_table(
            &linear_model(p, n)?,
            p.default_step(),
            LINEAR_T,
            s.frame_dt,
            seed + 100 + k as u64,
        )?;
        out.write_table(&format!("f1_pattern_n{n}.csv"), &pattern)?;
    }
    out.write_table("f1_cov.csv", &table)?;
    out.write_plot("f1_cov.svg", &plot)?;
    out.note("system sizes of the mean-field curves are a registry choice (16, 32, 64, 128)");
    Ok(())
}

fn f2(s: &ScaleTable, seed: u64, out: &mut OutputSet) -> CliResult<()> {
    let p = linear(0.0, 5.0);
    let mut table = Table::new(&[
        "n",
        "analytic",
        "n_times_analytic",
        "monte_carlo",
        "monte_carlo_se",
        "bound",
        "bound_coefficient",
    ]);
    let mut exact_pts = Vec::new();
    let mut bound_pts = Vec::new();
    for (k, &n) in s.linear_ns.iter().enumerate() {
        let exact = linear_row(&p, n, LINEAR_T)?[1];
        let ens = linear_ensemble(&p, n, s.linear_k, seed + k as u64)?;
        let mc = covloc::estimators::monte_carlo_covariance(&ens, 0, 1, 0)?;
        let inputs = BoundInputs::for_model(&linear_model(p, n)?, LINEAR_T, 1.0)?;
        let bound = cov_bound_meanfield_only(&inputs)?;
        table.push(vec![
            n.into(),
            exact.into(),
            (n as f64 * exact).into(),
            mc.estimate.into(),
            mc.std_error.into(),
            bound.into(),
            (n as f64 * bound).into(),
        ]);
        exact_pts.push(((n as f64).ln(), exact.ln()));
        bound_pts.push(((n as f64).ln(), bound.ln()));
    }
    out.write_table("f2_cov_vs_n.csv", &table)?;
    out.write_plot(
        "f2_cov_vs_n.svg",
        &LinePlot::new("cov(u_1, u_2) vs N (log-log)", "ln N", "ln cov")
            .line("exact", exact_pts)
            .dashed("bound", bound_pts),
    )
}

fn hov_family(fig: &str, w: f64, s: &ScaleTable, seed: u64, out: &mut OutputSet) -> CliResult<()> {
    let n = s.linear_n;
    let mut table = Table::new(&[
        "d_u",
        "i",
        "distance",
        "analytic",
        "monte_carlo",
        "monte_carlo_se",
    ]);
    let mut plot = LinePlot::new(
        &format!("cov(u_1, u_i), N = {n}, w = {w}, t = 5"),
        "i",
        "covariance",
    );
    for (k, d_u) in [1.0, 5.0, 20.0].into_iter().enumerate() {
        let p = linear(d_u, w);
        let curve = push_linear_row(&mut table, d_u, &p, n, s.linear_k, seed + k as u64)?;
        plot = plot.line(&format!("d_u = {d_u}"), curve);
        let pattern = pattern_table(
            &linear_model(p, n)?,
            p.default_step(),
            LINEAR_T,
            s.frame_dt,
            seed + 100 + k as u64,
        )?;
        out.write_table(&format!("{fig}_pattern_du{d_u}.csv"), &pattern)?;
    }
    out.write_table(&format!("{fig}_cov.csv"), &table)?;
    out.write_plot(&format!("{fig}_cov.svg"), &plot)?;
    out.note("diffusion strengths of the panel family are a registry choice (1, 5, 20)");
    Ok(())
}

fn f3(s: &ScaleTable, seed: u64, out: &mut OutputSet) -> CliResult<()> {
    hov_family("f3", 0.0, s, seed, out)
}

fn f5(s: &ScaleTable, seed: u64, out: &mut OutputSet) -> CliResult<()> {
    hov_family("f5", 5.0, s, seed, out)
}

/// Decay curve `k = 0..=N/2` with sampled values and bound overlays.
fn decay_curve(
    fig: &str,
    p: LinearParams,
    s: &ScaleTable,
    seed: u64,
    out: &mut OutputSet,
) -> CliResult<()> {
    let n = s.linear_n;
    let model = linear_model(p, n)?;
    let exact = linear_row(&p, n, LINEAR_T)?;
    let ens = linear_ensemble(&p, n, s.linear_k, seed)?;
    let mc = mc_curve(&ens, 0, n / 2)?;
    let inputs = BoundInputs::for_model(&model, LINEAR_T, 1.0)?;
    let mut table = Table::new(&[
        "k",
        "analytic",
        "log_abs_analytic",
        "monte_carlo",
        "monte_carlo_se",
        "bound_beta_0.2",
        "log_bound_beta_0.2",
        "bound_optimized",
        "beta_optimized",
    ]);
    let (mut e_pts, mut b_pts) = (Vec::new(), Vec::new());
    for k in 0..=n / 2 {
        let bound = if p.w == 0.0 {
            cov_bound_diffusion_only(1, 1 + k, BETA_OVERLAY, &inputs)?
        } else {
            cov_bound(1, 1 + k, BETA_OVERLAY, &inputs)?.total
        };
        let (beta_opt, opt) = optimize_beta(1, 1 + k, &inputs, DEFAULT_BETA_RANGE)?;
        table.push(vec![
            k.into(),
            exact[k].into(),
            exact[k].abs().ln().into(),
            mc[k].0.into(),
            mc[k].1.into(),
            bound.into(),
            bound.ln().into(),
            opt.total.into(),
            beta_opt.into(),
        ]);
        e_pts.push((k as f64, exact[k].abs().ln()));
        b_pts.push((k as f64, bound.ln()));
    }
    out.write_table(&format!("{fig}_curve.csv"), &table)?;
    out.write_plot(
        &format!("{fig}_curve.svg"),
        &LinePlot::new(
            &format!("ln |cov(u_1, u_(1+k))|, d_u = {}, w = {}", p.d_u, p.w),
            "k",
            "log covariance",
        )
        .line("exact", e_pts)
        .dashed("bound, beta = 0.2", b_pts),
    )
}

fn f4(s: &ScaleTable, seed: u64, out: &mut OutputSet) -> CliResult<()> {
    decay_curve("f4", linear(20.0, 0.0), s, seed, out)
}

fn f6(s: &ScaleTable, seed: u64, out: &mut OutputSet) -> CliResult<()> {
    decay_curve("f6", linear(20.0, 5.0), s, seed, out)
}

fn patterns(
    fig: &str,
    names: &[&str],
    s: &ScaleTable,
    seed: u64,
    out: &mut OutputSet,
) -> CliResult<()> {
    for (k, name) in names.iter().enumerate() {
        let (model, h) = model_of(name, s.fhn_n)?;
        let t = pattern_table(&model, h, FHN_T, s.frame_dt, seed + k as u64)?;
        out.write_table(&format!("{fig}_pattern_{name}.csv"), &t)?;
    }
    Ok(())
}

const DIFFUSION_REGIMES: [&str; 3] = [
    "diffusion-strongly-mixed",
    "diffusion-weakly-coherent",
    "diffusion-strongly-coherent",
];
const MEANFIELD_REGIMES: [&str; 3] = ["meanfield-weak", "meanfield-moderate", "meanfield-strong"];

fn f7(s: &ScaleTable, seed: u64, out: &mut OutputSet) -> CliResult<()> {
    patterns("f7", &DIFFUSION_REGIMES, s, seed, out)
}

fn f9(s: &ScaleTable, seed: u64, out: &mut OutputSet) -> CliResult<()> {
    patterns("f9", &MEANFIELD_REGIMES, s, seed, out)
}

fn f8(s: &ScaleTable, seed: u64, out: &mut OutputSet) -> CliResult<()> {
    let n = s.fhn_n;
    let mut table = Table::new(&[
        "regime",
        "i",
        "distance",
        "cov_u",
        "cov_u_se",
        "log_abs_cov_u",
        "cov_v",
        "cov_v_se",
        "log_abs_cov_v",
    ]);
    let mut plot = LinePlot::new(&format!("cov(u_1, u_i), N = {n}, t = 5"), "i", "covariance");
    for (k, name) in DIFFUSION_REGIMES.iter().enumerate() {
        let (model, h) = model_of(name, n)?;
        let cfg = IntegratorConfig::new(h, FHN_T, seed + k as u64)?;
        let ens = simulate_ensemble(&model, &cfg, s.fhn_k)?;
        let mut pts = Vec::new();
        for i in 0..n {
            let u = covloc::estimators::monte_carlo_covariance(&ens, 0, i, 0)?;
            let v = covloc::estimators::monte_carlo_covariance(&ens, 0, i, 1)?;
            table.push(vec![
                (*name).into(),
                (i + 1).into(),
                i.min(n - i).into(),
                u.estimate.into(),
                u.std_error.into(),
                u.estimate.abs().ln().into(),
                v.estimate.into(),
                v.std_error.into(),
                v.estimate.abs().ln().into(),
            ]);
            pts.push(((i + 1) as f64, u.estimate));
        }
        plot = plot.line(name, pts);
    }
    out.write_table("f8_cov.csv", &table)?;
    out.write_plot("f8_cov.svg", &plot)
}

fn f10(s: &ScaleTable, seed: u64, out: &mut OutputSet) -> CliResult<()> {
    let mut table = Table::new(&[
        "regime",
        "w",
        "t",
        "n",
        "cov_u12",
        "cov_u12_se",
        "n_times_cov",
    ]);
    for (k, name) in ["meanfield-moderate", "meanfield-strong"]
        .iter()
        .enumerate()
    {
        let params = regime(name)?.params;
        let w = match params {
            PresetParams::Fhn(p) => p.w,
            PresetParams::Linear(p) => p.w,
        };
        for (m, &n) in s.fhn_ns.iter().enumerate() {
            let model = params.build(n)?;
            let cfg =
                IntegratorConfig::new(params.default_step(), FHN_T, seed + (100 * k + m) as u64)?;
            let snaps = simulate_ensemble_snapshots(&model, &cfg, s.fhn_k, 0, &[3.0, FHN_T])?;
            for ens in &snaps {
                let r = covloc::estimators::monte_carlo_covariance(ens, 0, 1, 0)?;
                table.push(vec![
                    (*name).into(),
                    w.into(),
                    ens.time().into(),
                    n.into(),
                    r.estimate.into(),
                    r.std_error.into(),
                    (n as f64 * r.estimate).into(),
                ]);
            }
        }
    }
    out.write_table("f10_cov_vs_n.csv", &table)
}

fn comparisons(
    fig: &str,
    names: &[&str],
    s: &ScaleTable,
    seed: u64,
    out: &mut OutputSet,
) -> CliResult<()> {
    for (k, name) in names.iter().enumerate() {
        let (model, h) = model_of(name, s.fhn_n)?;
        let pattern = pattern_table(&model, h, FHN_T, s.frame_dt, seed + 100 + k as u64)?;
        out.write_table(&format!("{fig}_pattern_{name}.csv"), &pattern)?;
        let spec = ComparisonSpec {
            step: h,
            seed: seed + k as u64,
            times: COMPARISON_TIMES.to_vec(),
            mc_k: s.mc_k,
            replicates: s.spatial_replicates,
            component: 0,
            max_lag: s.fhn_n / 2,
        };
        let rows = spatial_vs_mc(&model, &spec)?;
        out.write_table(
            &format!("{fig}_{name}_comparison.csv"),
            &comparison_table(&rows),
        )?;
        let mut plot = LinePlot::new(&format!("{name}: cov(u_1, u_(1+k))"), "k", "covariance");
        for &t in &COMPARISON_TIMES {
            let at: Vec<_> = rows.iter().filter(|r| r.t == t).collect();
            plot = plot
                .line(
                    &format!("MC t = {t}"),
                    at.iter().map(|r| (r.lag as f64, r.monte_carlo)).collect(),
                )
                .dashed(
                    &format!("spatial t = {t}"),
                    at.iter().map(|r| (r.lag as f64, r.spatial)).collect(),
                );
        }
        out.write_plot(&format!("{fig}_{name}_comparison.svg"), &plot)?;
    }
    out.note(
        "spatial estimates average independent single realizations; their spread gives spatial_se",
    );
    Ok(())
}

fn f11(s: &ScaleTable, seed: u64, out: &mut OutputSet) -> CliResult<()> {
    comparisons(
        "f11",
        &["regime-a", "regime-b", "regime-c", "regime-d", "regime-e"],
        s,
        seed,
        out,
    )
}

fn f12(s: &ScaleTable, seed: u64, out: &mut OutputSet) -> CliResult<()> {
    comparisons("f12", &["regime-f"], s, seed, out)
}
