#![allow(dead_code)]

use nalgebra::DMatrix;

/// Matrix exponential by scaling and squaring a 30-term Taylor series.
pub fn taylor_expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.abs().row_sum().max();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a * scale;
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = &term * &x / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `sigma^2 int_0^t e^{2 A s} ds` by Romberg extrapolation of the trapezoid
/// rule on `4m` panels, with `e^{2 A s}` advanced by repeated multiplication.
pub fn quadrature_covariance(a: &DMatrix<f64>, sigma: f64, t: f64, m: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let panels = 4 * m;
    let h = t / panels as f64;
    let step = taylor_expm(&(a * (2.0 * h)));
    let mut trap = [
        DMatrix::<f64>::zeros(n, n),
        DMatrix::<f64>::zeros(n, n),
        DMatrix::<f64>::zeros(n, n),
    ];
    let mut e = DMatrix::<f64>::identity(n, n);
    for k in 0..=panels {
        let end = k == 0 || k == panels;
        let w = if end { 0.5 } else { 1.0 };
        trap[0] += &e * w;
        if k % 2 == 0 {
            trap[1] += &e * w;
        }
        if k % 4 == 0 {
            trap[2] += &e * w;
        }
        e = &e * &step;
    }
    let t0 = &trap[0] * h;
    let t1 = &trap[1] * (2.0 * h);
    let t2 = &trap[2] * (4.0 * h);
    let r_fine = (&t0 * 4.0 - &t1) / 3.0;
    let r_coarse = (&t1 * 4.0 - &t2) / 3.0;
    (r_fine * 16.0 - r_coarse) / 15.0 * (sigma * sigma)
}
