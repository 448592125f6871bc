use crate::error::{Error, Result};
use crate::ndmath::{chol_log_det, cholesky, symmetric_eigen, Matrix};
use crate::synth::PairedDataset;

use super::multinomial::moments;

/// `H[Y] - H[Y|X]` under a full-covariance Gaussian fitted to the pairs.
///
/// For a Gaussian this is `½·(ln det Σyy + ln det Σxx - ln det Σ)`.
pub fn doe_gaussian(ds: &PairedDataset) -> Result<f64> {
    let dim = ds.dx() + ds.dy();
    if ds.n() < dim * dim || ds.n() < 2 {
        return Err(Error::TooFewSamples { needed: (dim * dim).max(2), got: ds.n() });
    }
    let (_, cov) = moments(&ds.joint())?;
    gaussian_mi_from_covariance(&cov, ds.dx())
}

pub fn gaussian_mi_from_covariance(cov: &Matrix, dx: usize) -> Result<f64> {
    let dim = cov.rows();
    let (values, _) = symmetric_eigen(cov);
    let (lo, hi) = (values[0], values[dim - 1]);
    if lo.is_nan() || lo <= hi * 1e-12 {
        return Err(Error::SingularCovariance);
    }
    let log_det = |m: &Matrix| cholesky(m).map(|l| chol_log_det(&l)).map_err(|_| Error::SingularCovariance);
    let full = log_det(cov)?;
    let xx = log_det(&cov.block(0, dx, 0, dx))?;
    let yy = log_det(&cov.block(dx, dim, dx, dim))?;
    Ok(0.5 * (xx + yy - full))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndmath::Rng;
    use crate::synth::{NonlinearGaussianSpec, Transform, TransformPair};

    fn gauss(d: usize, rho: f64, t: Transform, n: usize, seed: u64) -> PairedDataset {
        NonlinearGaussianSpec::new(d, rho, TransformPair::both(t)).unwrap().generate(n, &mut Rng::new(seed))
    }

    #[test]
    fn bivariate_closed_form() {
        let cov = Matrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
        let mi = gaussian_mi_from_covariance(&cov, 1).unwrap();
        assert!((mi - 0.143_841_036_225_890_46).abs() < 1e-14);
    }

    #[test]
    fn recovers_gaussian_truth() {
        let est = doe_gaussian(&gauss(1, 0.5, Transform::Identity, 10_000, 1)).unwrap();
        assert!((est - 0.143_841_036_225_890_46).abs() < 0.03);
        let zero = doe_gaussian(&gauss(1, 0.0, Transform::Identity, 10_000, 2)).unwrap();
        assert!(zero.abs() < 0.02);
    }

    #[test]
    fn singular_and_small_inputs() {
        let x = Matrix::from_fn(50, 1, |i, _| i as f64);
        let singular = PairedDataset::new(x.clone(), x).unwrap();
        assert!(matches!(doe_gaussian(&singular), Err(Error::SingularCovariance)));
        let small = gauss(4, 0.5, Transform::Identity, 63, 3);
        assert!(matches!(doe_gaussian(&small), Err(Error::TooFewSamples { .. })));
    }
}
