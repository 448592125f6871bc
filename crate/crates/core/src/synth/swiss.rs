use std::f64::consts::PI;

use crate::error::Result;
use crate::ndmath::{norm_cdf, Matrix, Rng};

use super::gaussian::check_rho;
use super::PairedDataset;

/// Swiss roll: `x ∈ R²` on a spiral driven by `ε_x`, `y = Φ(ε_y) ∈ (0, 1)`,
/// with `(ε_x, ε_y)` standard bivariate normal of correlation `rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwissRollSpec {
    pub rho: f64,
}

impl SwissRollSpec {
    pub fn new(rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(SwissRollSpec { rho })
    }

    /// Both maps are injective in one dimension, so MI is that of the
    /// underlying Gaussian pair.
    pub fn true_mi(&self) -> f64 {
        -0.5 * (-self.rho * self.rho).ln_1p()
    }

    /// Spiral angle `t = 3π/2·(1 + 2Φ(ε))`, in `(3π/2, 9π/2)`.
    pub fn angle(eps: f64) -> f64 {
        1.5 * PI * (1.0 + 2.0 * norm_cdf(eps))
    }

    pub fn generate(&self, n: usize, rng: &mut Rng) -> PairedDataset {
        let scale = (1.0 - self.rho * self.rho).sqrt();
        let mut x = Matrix::zeros(n, 2);
        let mut y = Matrix::zeros(n, 1);
        for i in 0..n {
            let ex = rng.standard_normal();
            let ey = self.rho * ex + scale * rng.standard_normal();
            let t = Self::angle(ex);
            x[(i, 0)] = t * t.cos() / 21.0;
            x[(i, 1)] = t * t.sin() / 21.0;
            y[(i, 0)] = norm_cdf(ey);
        }
        PairedDataset::new(x, y).expect("shapes agree")
    }
}
