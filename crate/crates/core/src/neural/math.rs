use crate::{Error, Result};

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn relu_vec(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = relu(*x));
    v
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Err(Error::Empty("softmax input"));
    }
    if !z.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("softmax input"));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `g(x) + x`.
pub fn residual_block<G>(x: &[f64], g: G) -> Result<Vec<f64>>
where
    G: FnOnce(&[f64]) -> Vec<f64>,
{
    let gx = g(x);
    if gx.len() != x.len() {
        return Err(Error::LengthMismatch {
            left: gx.len(),
            right: x.len(),
        });
    }
    Ok(gx.iter().zip(x).map(|(a, b)| a + b).collect())
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::Empty("mse input"));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (t - p) * (t - p)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}
