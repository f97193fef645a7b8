use crate::error::{Error, Result};
use crate::image::Image;
use crate::metrics::{mse, ssim_impl, SsimConfig};

fn check_weights(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha >= 0.0 && beta >= 0.0) || (alpha == 0.0 && beta == 0.0) {
        return Err(Error::InvalidConfig(format!(
            "loss weights must be non-negative and not both zero (alpha={alpha}, beta={beta})"
        )));
    }
    Ok(())
}

/// `alpha·MSE + beta·(1 − SSIM)` with the default (global-window) SSIM.
pub fn composite_loss(pred: &Image, gt: &Image, alpha: f64, beta: f64) -> Result<f64> {
    composite_loss_with(pred, gt, alpha, beta, &SsimConfig::default())
}

pub fn composite_loss_with(pred: &Image, gt: &Image, alpha: f64, beta: f64, ssim: &SsimConfig) -> Result<f64> {
    check_weights(alpha, beta)?;
    pred.ensure_same_dims(gt)?;
    let mut loss = alpha * mse(pred, gt)?;
    if beta != 0.0 {
        loss += beta * (1.0 - ssim_impl(pred, gt, ssim, false)?.0);
    }
    Ok(loss)
}

/// Loss value and its gradient with respect to `pred`.
pub fn loss_and_gradient(pred: &Image, gt: &Image, alpha: f64, beta: f64, ssim: &SsimConfig) -> Result<(f64, Image)> {
    check_weights(alpha, beta)?;
    pred.ensure_same_dims(gt)?;
    let n = pred.len() as f64;
    let mut value = 0.0;
    let mut grad = Image::zeros(pred.width(), pred.height());
    if alpha != 0.0 {
        value += alpha * mse(pred, gt)?;
        for ((g, p), t) in grad.data_mut().iter_mut().zip(pred.data()).zip(gt.data()) {
            *g = alpha * 2.0 * (p - t) / n;
        }
    }
    if beta != 0.0 {
        let (s, ds) = ssim_impl(pred, gt, ssim, true)?;
        value += beta * (1.0 - s);
        let ds = ds.expect("gradient requested");
        for (g, d) in grad.data_mut().iter_mut().zip(ds.data()) {
            *g -= beta * d;
        }
    }
    Ok((value, grad))
}

pub fn loss_gradient(pred: &Image, gt: &Image, alpha: f64, beta: f64) -> Result<Image> {
    loss_and_gradient(pred, gt, alpha, beta, &SsimConfig::default()).map(|(_, g)| g)
}
