use crate::error::{Error, Result};
use crate::recon::linalg::{Cholesky, Matrix};
use crate::recon::model::{Dims, LinearReconstructor};

/// Normal-equation residual the solver must reach, relative to `‖XᵀY‖`.
pub const RIDGE_RESIDUAL_TOL: f64 = 1e-10;
const MAX_REFINEMENTS: usize = 8;

/// Ridge regression with an unpenalized bias.
///
/// Rows of `features` and `targets` are samples. Features and targets are
/// centered, `(XᵀX + λI) W = XᵀY` is solved for the centered data, and the
/// bias restores the means. With fewer samples than features the equivalent
/// `n×n` dual system is solved instead; either way the primal residual is
/// checked and iteratively refined.
pub fn fit_ridge(
    features: &Matrix,
    targets: &Matrix,
    lambda: f64,
    in_dims: Dims,
    out_dims: Dims,
) -> Result<LinearReconstructor> {
    let n = features.rows;
    if n == 0 || targets.rows != n {
        return Err(Error::DimMismatch(format!(
            "{} feature rows vs {} target rows",
            features.rows, targets.rows
        )));
    }
    if features.cols != in_dims.len() || targets.cols != out_dims.len() {
        return Err(Error::DimMismatch(format!(
            "matrix widths {}/{} vs dims {in_dims:?}/{out_dims:?}",
            features.cols, targets.cols
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "ridge lambda {lambda} must be non-negative"
        )));
    }

    let (xc, x_mean) = center(features);
    let (yc, y_mean) = center(targets);
    let p = features.cols;
    let xty = xc.t_matmul(&yc);

    let apply_normal = |w: &Matrix| -> Matrix {
        // (XᵀX + λI) W without forming XᵀX
        let mut out = xc.t_matmul(&xc.matmul(w));
        for (o, v) in out.data.iter_mut().zip(&w.data) {
            *o += lambda * v;
        }
        out
    };

    let mut w = if n < p && lambda > 0.0 {
        // W = Xᵀ (X Xᵀ + λI)⁻¹ Y
        let mut gram = xc.matmul(&xc.transpose());
        gram.add_diagonal(lambda);
        let alpha = Cholesky::factor(&gram)?.solve(&yc);
        xc.t_matmul(&alpha)
    } else {
        let mut normal = xc.t_matmul(&xc);
        normal.add_diagonal(lambda);
        Cholesky::factor(&normal)?.solve(&xty)
    };

    let scale = xty.frobenius().max(f64::MIN_POSITIVE);
    let mut primal: Option<Cholesky> = None;
    for _ in 0..MAX_REFINEMENTS {
        let mut residual = apply_normal(&w);
        for (r, b) in residual.data.iter_mut().zip(&xty.data) {
            *r = b - *r;
        }
        if residual.frobenius() / scale < RIDGE_RESIDUAL_TOL || xty.frobenius() == 0.0 {
            break;
        }
        if primal.is_none() {
            let mut normal = xc.t_matmul(&xc);
            normal.add_diagonal(lambda);
            primal = Some(Cholesky::factor(&normal)?);
        }
        let delta = primal.as_ref().unwrap().solve(&residual);
        for (v, d) in w.data.iter_mut().zip(&delta.data) {
            *v += d;
        }
    }

    // reconstructor rows are outputs: transpose W (p × q) to q × p
    let weights = w.transpose().data;
    let q = out_dims.len();
    let bias = (0..q)
        .map(|j| y_mean[j] - (0..p).map(|i| w.get(i, j) * x_mean[i]).sum::<f64>())
        .collect();
    LinearReconstructor::from_parts(in_dims, out_dims, weights, bias)
}

/// Relative residual `‖XᵀY − (XᵀX + λI)W‖ / ‖XᵀY‖` of a fitted model on
/// centered data.
pub fn normal_equation_residual(model: &LinearReconstructor, features: &Matrix, targets: &Matrix, lambda: f64) -> f64 {
    let (xc, _) = center(features);
    let (yc, _) = center(targets);
    let p = features.cols;
    let q = targets.cols;
    let mut w = Matrix::zeros(p, q);
    for j in 0..q {
        for i in 0..p {
            w.data[i * q + j] = model.weights()[j * p + i];
        }
    }
    let xty = xc.t_matmul(&yc);
    let mut lhs = xc.t_matmul(&xc.matmul(&w));
    for (o, v) in lhs.data.iter_mut().zip(&w.data) {
        *o += lambda * v;
    }
    let diff: f64 = lhs
        .data
        .iter()
        .zip(&xty.data)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    diff / xty.frobenius().max(f64::MIN_POSITIVE)
}

fn center(m: &Matrix) -> (Matrix, Vec<f64>) {
    let mut mean = vec![0.0; m.cols];
    for r in 0..m.rows {
        for (acc, v) in mean.iter_mut().zip(m.row(r)) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= m.rows as f64);
    let mut out = m.clone();
    for r in 0..m.rows {
        for (v, mu) in out.data[r * m.cols..(r + 1) * m.cols].iter_mut().zip(&mean) {
            *v -= mu;
        }
    }
    (out, mean)
}
