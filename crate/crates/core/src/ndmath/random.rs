use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Matrix;

/// Seeded ChaCha8 stream.
///
/// Child streams come from [`Rng::split`], which depends only on this
/// stream's seed and the child index, never on how much has been drawn.
/// That keeps results independent of scheduling order.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { seed, inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent sub-stream number `stream`.
    pub fn split(&self, stream: u64) -> Rng {
        Rng::new(mix_seed(self.seed, stream))
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        use rand::Rng as _;
        self.inner.random_range(0..n)
    }

    /// Uniformly random permutation of `0..n`.
    pub fn permutation(&mut self, n: usize) -> Vec<usize> {
        use rand::seq::SliceRandom;
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut self.inner);
        idx
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// SplitMix64 finalizer over a (seed, stream) pair.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n` i.i.d. rows from `N(mean, L·Lᵀ)` where `chol_lower` is `L`.
pub fn sample_mvn(rng: &mut Rng, mean: &[f64], chol_lower: &Matrix, n: usize) -> Matrix {
    let dim = chol_lower.rows();
    assert_eq!(mean.len(), dim, "mean length must match the factor");
    let mut out = Matrix::zeros(n, dim);
    let mut z = vec![0.0; dim];
    for i in 0..n {
        for v in z.iter_mut() {
            *v = rng.standard_normal();
        }
        let row = out.row_mut(i);
        for r in 0..dim {
            let l = chol_lower.row(r);
            let mut s = mean[r];
            for c in 0..=r {
                s += l[c] * z[c];
            }
            row[r] = s;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        assert_ne!(Rng::new(1).next_u64(), Rng::new(2).next_u64());
    }

    #[test]
    fn split_ignores_consumption() {
        let a = Rng::new(7);
        let mut b = Rng::new(7);
        b.next_u64();
        assert_eq!(a.split(3).next_u64(), b.split(3).next_u64());
        assert_ne!(a.split(3).next_u64(), a.split(4).next_u64());
    }

    #[test]
    fn uniform_in_range() {
        let mut r = Rng::new(0);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn mvn_empty_and_deterministic() {
        let l = Matrix::identity(3);
        let m = sample_mvn(&mut Rng::new(5), &[0.0; 3], &l, 0);
        assert_eq!(m.shape(), (0, 3));
        let a = sample_mvn(&mut Rng::new(5), &[0.0; 3], &l, 50);
        let b = sample_mvn(&mut Rng::new(5), &[0.0; 3], &l, 50);
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn mvn_covariance_large_sample() {
        let n = 1_000_000;
        let l = Matrix::identity(3);
        let s = sample_mvn(&mut Rng::new(11), &[0.0; 3], &l, n);
        let mut cov = [[0.0; 3]; 3];
        for row in s.iter_rows() {
            for i in 0..3 {
                for j in 0..3 {
                    cov[i][j] += row[i] * row[j];
                }
            }
        }
        for (i, r) in cov.iter().enumerate() {
            for (j, v) in r.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((v / n as f64 - target).abs() < 0.01, "cov[{i}][{j}]");
            }
        }
    }

    #[test]
    fn mvn_correlated_covariance() {
        let sigma = Matrix::from_rows(&[[1.0, 0.6], [0.6, 2.0]]).unwrap();
        let l = super::super::cholesky(&sigma).unwrap();
        let n = 200_000;
        let s = sample_mvn(&mut Rng::new(3), &[1.0, -2.0], &l, n);
        let (mut m0, mut m1) = (0.0, 0.0);
        for r in s.iter_rows() {
            m0 += r[0];
            m1 += r[1];
        }
        m0 /= n as f64;
        m1 /= n as f64;
        let c01 = s.iter_rows().map(|r| (r[0] - m0) * (r[1] - m1)).sum::<f64>() / n as f64;
        assert!((m0 - 1.0).abs() < 0.01 && (m1 + 2.0).abs() < 0.01);
        assert!((c01 - 0.6).abs() < 0.02);
    }
}
