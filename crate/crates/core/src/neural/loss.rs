use crate::error::{Error, Result};
use crate::ndmath::{logsumexp_unchecked, Matrix};

use super::Mlp;

/// Row-wise softmax.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut p = logits.clone();
    for i in 0..p.rows() {
        let row = p.row_mut(i);
        let lse = logsumexp_unchecked(row);
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
        }
    }
    p
}

fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(Error::shape(format!("{rows} labels"), labels.len()));
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= classes) {
        return Err(Error::shape(format!("labels below {classes}"), bad));
    }
    Ok(())
}

/// Mean negative log softmax probability of the true class.
pub fn softmax_xent(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    check_labels(labels, logits.rows(), logits.cols())?;
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total: f64 = logits.iter_rows().zip(labels).map(|(row, &c)| logsumexp_unchecked(row) - row[c]).sum();
    Ok(total / labels.len() as f64)
}

/// Cross-entropy loss of `net` on a labelled batch and its parameter
/// gradient.
pub fn softmax_xent_backward(net: &Mlp, batch: &Matrix, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    if batch.cols() != net.input_dim() {
        return Err(Error::shape(format!("{} input columns", net.input_dim()), batch.cols()));
    }
    let (cache, logits) = net.forward_cached(batch);
    let loss = softmax_xent(&logits, labels)?;
    let mut dlogits = softmax_rows(&logits);
    let scale = 1.0 / labels.len() as f64;
    for (i, &c) in labels.iter().enumerate() {
        let row = dlogits.row_mut(i);
        row[c] -= 1.0;
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    Ok((loss, net.backward(batch, &cache, &dlogits)))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::ndmath::Rng;
    use crate::neural::MlpConfig;

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Matrix::zeros(6, 4);
        let loss = softmax_xent(&logits, &[0, 1, 2, 3, 0, 1]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-15);
        assert!((loss - 1.3862944).abs() < 1e-7);
    }

    #[test]
    fn confident_logits_give_near_zero_loss() {
        let mut logits = Matrix::zeros(3, 4);
        let labels = [2, 0, 3];
        for (i, &c) in labels.iter().enumerate() {
            logits[(i, c)] = 30.0;
        }
        let loss = softmax_xent(&logits, &labels).unwrap();
        assert!((0.0..1e-12).contains(&loss));
    }

    #[test]
    fn label_validation() {
        let logits = Matrix::zeros(2, 3);
        assert!(softmax_xent(&logits, &[0, 3]).is_err());
        assert!(softmax_xent(&logits, &[0]).is_err());
    }

    /// Central finite differences over every parameter.
    fn numeric_grad(net: &Mlp, x: &Matrix, labels: &[usize], h: f64) -> Vec<f64> {
        let mut probe = net.clone();
        (0..net.num_params())
            .map(|i| {
                let orig = probe.params()[i];
                probe.params_mut()[i] = orig + h;
                let up = softmax_xent(&probe.forward(x).unwrap(), labels).unwrap();
                probe.params_mut()[i] = orig - h;
                let down = softmax_xent(&probe.forward(x).unwrap(), labels).unwrap();
                probe.params_mut()[i] = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }

    fn relative_error(a: &[f64], b: &[f64]) -> f64 {
        let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let norm_a: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm_b: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        diff / (norm_a + norm_b).max(1e-12)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = Rng::new(2024);
        for (hidden, width, din, k, skip) in [(0, 0, 3, 2, true), (1, 6, 2, 4, true), (2, 5, 4, 3, false)] {
            let cfg = MlpConfig::new(din, k).with_hidden(hidden, width).with_skip(skip);
            let net = Mlp::new(cfg, &mut rng).unwrap();
            let x = Matrix::from_fn(9, din, |_, _| rng.standard_normal());
            let labels: Vec<usize> = (0..9).map(|i| i % k).collect();
            let (_, analytic) = softmax_xent_backward(&net, &x, &labels).unwrap();
            let numeric = numeric_grad(&net, &x, &labels, 1e-5);
            assert!(relative_error(&analytic, &numeric) < 1e-4);
        }
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(v in prop::collection::vec(-500.0f64..500.0, 12)) {
            let p = softmax_rows(&Matrix::from_vec(3, 4, v));
            for row in p.iter_rows() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}
