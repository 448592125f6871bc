use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ndmath::{symmetric_eigen, Matrix, Rng};

use super::PairedDataset;

/// Seed of the fixed mixing-matrix ensemble shared by every estimator.
pub const DEFAULT_MATRIX_SEED: u64 = 0x00A1_B2C3_D4E5_F607;

/// Largest accepted condition number for the mixing matrices.
pub const MAX_CONDITION: f64 = 100.0;

/// Element-wise nonlinearity applied before the mixing matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    /// Raw Gaussian coordinates, no mixing matrix.
    Identity,
    Tanh,
    Cube,
    Exp,
}

impl Transform {
    pub const ALL: [Transform; 4] = [Transform::Identity, Transform::Tanh, Transform::Cube, Transform::Exp];

    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Transform::Identity => v,
            Transform::Tanh => v.tanh(),
            Transform::Cube => v * v * v,
            Transform::Exp => v.exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Tanh => "tanh",
            Transform::Cube => "cube",
            Transform::Exp => "exp",
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Transform::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown transform {s:?} (identity, tanh, cube, exp)")))
    }
}

/// Transforms for the `x` side and the `y` side.
///
/// Written as a single name when both sides agree (`cube`) and as
/// `fx-gy` otherwise (`tanh-exp`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TransformPair {
    pub x: Transform,
    pub y: Transform,
}

impl TransformPair {
    pub fn both(t: Transform) -> Self {
        TransformPair { x: t, y: t }
    }
}

impl fmt::Display for TransformPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.x == self.y {
            f.write_str(self.x.name())
        } else {
            write!(f, "{}-{}", self.x.name(), self.y.name())
        }
    }
}

impl FromStr for TransformPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('-') {
            Some((a, b)) => Ok(TransformPair { x: a.parse()?, y: b.parse()? }),
            None => Ok(TransformPair::both(s.parse()?)),
        }
    }
}

impl Serialize for TransformPair {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TransformPair {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `x = A·f(ε_x)`, `y = B·g(ε_y)` with `(ε_x,i, ε_y,i)` standard bivariate
/// normal pairs of correlation `rho` and all other coordinates independent.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearGaussianSpec {
    pub d: usize,
    pub rho: f64,
    pub transforms: TransformPair,
    pub matrix_seed: u64,
}

impl NonlinearGaussianSpec {
    pub fn new(d: usize, rho: f64, transforms: TransformPair) -> Result<Self> {
        let spec = NonlinearGaussianSpec { d, rho, transforms, matrix_seed: DEFAULT_MATRIX_SEED };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::ConfigInvalid("d must be at least 1".into()));
        }
        check_rho(self.rho)
    }

    /// Closed-form `-d/2 · ln(1 - ρ²)`, unchanged by the bijective transforms.
    pub fn true_mi(&self) -> f64 {
        -0.5 * self.d as f64 * (-self.rho * self.rho).ln_1p()
    }

    /// The mixing matrices `(A, B)`. Fixed by `matrix_seed` and `d`.
    pub fn mixing_matrices(&self) -> (Matrix, Matrix) {
        let root = Rng::new(self.matrix_seed).split(self.d as u64);
        (well_conditioned(self.d, &mut root.split(0)), well_conditioned(self.d, &mut root.split(1)))
    }

    pub fn generate(&self, n: usize, rng: &mut Rng) -> PairedDataset {
        let d = self.d;
        let (a, b) = self.mixing_matrices();
        let scale = (1.0 - self.rho * self.rho).sqrt();
        let mut ex = Matrix::zeros(n, d);
        let mut ey = Matrix::zeros(n, d);
        for i in 0..n {
            for j in 0..d {
                let z1 = rng.standard_normal();
                let z2 = rng.standard_normal();
                ex[(i, j)] = self.transforms.x.apply(z1);
                ey[(i, j)] = self.transforms.y.apply(self.rho * z1 + scale * z2);
            }
        }
        let x = mix(ex, &a, self.transforms.x);
        let y = mix(ey, &b, self.transforms.y);
        PairedDataset::new(x, y).expect("shapes agree")
    }
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!("rho must lie in (-1, 1), got {rho}")))
    }
}

/// Rows `t(ε)` become `A·t(ε)`; the identity transform skips the matrix.
fn mix(transformed: Matrix, a: &Matrix, t: Transform) -> Matrix {
    match t {
        Transform::Identity => transformed,
        _ => transformed.matmul(&a.transpose()).expect("square mixing matrix"),
    }
}

pub fn condition_number(a: &Matrix) -> f64 {
    let gram = a.transpose().matmul(a).expect("square");
    let (vals, _) = symmetric_eigen(&gram);
    let lo = vals.first().copied().unwrap_or(0.0);
    let hi = vals.last().copied().unwrap_or(0.0);
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        (hi / lo).sqrt()
    }
}

/// Gaussian matrix with entries of variance `1/d`, redrawn until its
/// condition number is below [`MAX_CONDITION`].
fn well_conditioned(d: usize, rng: &mut Rng) -> Matrix {
    let std = (1.0 / d as f64).sqrt();
    loop {
        let a = Matrix::from_fn(d, d, |_, _| std * rng.standard_normal());
        if condition_number(&a) < MAX_CONDITION {
            return a;
        }
    }
}
