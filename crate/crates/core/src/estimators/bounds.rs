use crate::error::{Error, Result};
use crate::ndmath::{logsumexp_unchecked, Matrix};
use crate::neural::Mlp;

/// Class indices of the four-class problem.
pub const JOINT: usize = 0;
pub const REF_JOINT: usize = 1;
pub const REF_PRODUCT: usize = 2;
pub const PRODUCT: usize = 3;

/// `(r₁₄, r₁₂ + r₂₃ + r₃₄)` from one row of four logits, `r_ij = h_i - h_j`.
pub fn telescoped_ratio(logits: &[f64]) -> (f64, f64) {
    assert_eq!(logits.len(), 4, "telescoping needs four logits");
    let r = |i: usize, j: usize| logits[i] - logits[j];
    (r(0, 3), r(0, 1) + r(1, 2) + r(2, 3))
}

/// `h₁ - h₄` for each row of `pairs`.
pub fn log_ratio(net: &Mlp, pairs: &Matrix) -> Result<Vec<f64>> {
    if net.outputs() != 4 {
        return Err(Error::shape("four logits", net.outputs()));
    }
    let logits = net.forward(pairs)?;
    Ok(logits.iter_rows().map(|r| r[JOINT] - r[PRODUCT]).collect())
}

/// Mean log-ratio over evaluation pairs drawn from the joint.
pub fn mime_estimate(net: &Mlp, eval_pairs: &Matrix) -> Result<f64> {
    if eval_pairs.rows() == 0 {
        return Err(Error::EmptyEvaluationSet);
    }
    let r = log_ratio(net, eval_pairs)?;
    Ok(r.iter().sum::<f64>() / r.len() as f64)
}

/// `mean f(joint) - ln mean exp f(product)`.
pub fn dv_bound(f_joint: &[f64], f_product: &[f64]) -> Result<f64> {
    if f_joint.is_empty() || f_product.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let mean = f_joint.iter().sum::<f64>() / f_joint.len() as f64;
    Ok(mean - logsumexp_unchecked(f_product) + (f_product.len() as f64).ln())
}

/// `mean f(joint) - mean exp(f(product) - 1)`.
pub fn nwj_bound(f_joint: &[f64], f_product: &[f64]) -> Result<f64> {
    if f_joint.is_empty() || f_product.is_empty() {
        return Err(Error::EmptyEvaluationSet);
    }
    let mean = f_joint.iter().sum::<f64>() / f_joint.len() as f64;
    let partition = f_product.iter().map(|f| (f - 1.0).exp()).sum::<f64>() / f_product.len() as f64;
    Ok(mean - partition)
}

/// Donsker–Varadhan bound with the classifier's log-ratio as critic.
pub fn dv_estimate_from_ratio(net: &Mlp, joint_eval: &Matrix, product_eval: &Matrix) -> Result<f64> {
    if joint_eval.rows() == 0 || product_eval.rows() == 0 {
        return Err(Error::EmptyEvaluationSet);
    }
    dv_bound(&log_ratio(net, joint_eval)?, &log_ratio(net, product_eval)?)
}
