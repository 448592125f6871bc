//! MI estimators behind one train/estimate interface.
//!
//! Every run partitions the pairs into train, validation and evaluation
//! splits, standardizes inputs with training-split statistics, trains on
//! the training split with early stopping on validation, and reads the
//! estimate off the evaluation split. All randomness comes from
//! sub-streams of the run seed.

mod bounds;
mod config;
mod critic;
mod data;
mod doe;
mod multinomial;

pub use bounds::{
    dv_bound, dv_estimate_from_ratio, log_ratio, mime_estimate, nwj_bound, telescoped_ratio, JOINT, PRODUCT, REF_JOINT,
    REF_PRODUCT,
};
pub use config::{EstimatorConfig, EstimatorKind, MiEstimate, Mode};
pub use critic::{critic_values, infonce_estimate, train_critic, train_infonce, CriticBound, CriticTask, InfoNceTask};
pub use data::{DataSplit, Standardizer};
pub use doe::{doe_gaussian, gaussian_mi_from_covariance};
pub use multinomial::{moments, train_multinomial, GaussianReference, MultinomialTask, ReferenceSampler};

use crate::copula::fit_copula;
use crate::error::Result;
use crate::ndmath::{Matrix, Rng};
use crate::neural::{EpochRecord, Mlp};
use crate::synth::PairedDataset;

use data::shuffled_pairs;

const STREAM_SPLIT: u64 = 0;
const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_EVAL: u64 = 3;

/// A trained estimator, ready to report on its evaluation split.
#[derive(Clone, Debug)]
pub struct TrainedEstimator {
    kind: EstimatorKind,
    seed: u64,
    mode: Mode,
    contrastive_batch: usize,
    model: Model,
    standardizer: Standardizer,
    evaluation: PairedDataset,
    eval_product: Matrix,
    history: Vec<EpochRecord>,
}

#[derive(Clone, Debug)]
enum Model {
    Network(Mlp),
    ClosedForm(f64),
}

/// Trains `kind` on `ds` with everything derived from `seed`.
pub fn train(kind: EstimatorKind, ds: &PairedDataset, cfg: &EstimatorConfig, seed: u64) -> Result<TrainedEstimator> {
    cfg.validate_for(kind)?;
    let root = Rng::new(seed);
    let split = DataSplit::new(ds, cfg.validation_fraction, cfg.evaluation_fraction, &mut root.split(STREAM_SPLIT))?;
    let standardizer = if cfg.standardize {
        Standardizer::fit(&split.train.joint())?
    } else {
        Standardizer::identity(ds.dx() + ds.dy())
    };
    let split = split.map(|p| standardizer.apply_pairs(&p));
    let mut init_rng = root.split(STREAM_INIT);
    let mut rng = root.split(STREAM_TRAIN);

    let (model, history) = match kind {
        EstimatorKind::DoeGaussian => (Model::ClosedForm(doe_gaussian(&split.train)?), Vec::new()),
        EstimatorKind::Mime => {
            let copula = fit_copula(&split.train)?;
            let out = train_multinomial(&split.train, &split.validation, &copula, cfg, &mut init_rng, &mut rng)?;
            (Model::Network(out.net), out.history)
        }
        EstimatorKind::Mre => {
            let reference = GaussianReference::fit(&split.train)?;
            let out = train_multinomial(&split.train, &split.validation, &reference, cfg, &mut init_rng, &mut rng)?;
            (Model::Network(out.net), out.history)
        }
        EstimatorKind::Mine | EstimatorKind::Nwj => {
            let bound = if kind == EstimatorKind::Mine { CriticBound::Dv } else { CriticBound::Nwj };
            let out = train_critic(bound, &split.train, &split.validation, cfg, &mut init_rng, &mut rng)?;
            (Model::Network(out.net), out.history)
        }
        EstimatorKind::InfoNce => {
            let out = train_infonce(&split.train, &split.validation, cfg, &mut init_rng, &mut rng)?;
            (Model::Network(out.net), out.history)
        }
    };
    let eval_product = shuffled_pairs(&split.evaluation, &mut root.split(STREAM_EVAL));
    Ok(TrainedEstimator {
        kind,
        seed,
        mode: kind.mode_for(cfg.mode),
        contrastive_batch: cfg.contrastive_batch(),
        model,
        standardizer,
        evaluation: split.evaluation,
        eval_product,
        history,
    })
}

/// Trains and evaluates in one call.
pub fn estimate(kind: EstimatorKind, ds: &PairedDataset, cfg: &EstimatorConfig, seed: u64) -> Result<MiEstimate> {
    train(kind, ds, cfg, seed)?.estimate()
}

impl TrainedEstimator {
    /// Estimate in the mode fixed at training time.
    pub fn estimate(&self) -> Result<MiEstimate> {
        self.estimate_with(self.mode)
    }

    /// Estimate with another readout; only the four-class estimators
    /// offer a choice (`ratio` or `dv`).
    pub fn estimate_with(&self, mode: Mode) -> Result<MiEstimate> {
        let mode = self.kind.mode_for(mode);
        let joint = self.evaluation.joint();
        let value = match (&self.model, mode) {
            (Model::ClosedForm(v), _) => *v,
            (Model::Network(net), Mode::Ratio) => mime_estimate(net, &joint)?,
            (Model::Network(net), Mode::Dv) if self.kind.is_multinomial() => {
                dv_estimate_from_ratio(net, &joint, &self.eval_product)?
            }
            (Model::Network(net), Mode::Dv) => {
                CriticBound::Dv.value(&critic_values(net, &joint)?, &critic_values(net, &self.eval_product)?)?
            }
            (Model::Network(net), Mode::Nwj) => {
                CriticBound::Nwj.value(&critic_values(net, &joint)?, &critic_values(net, &self.eval_product)?)?
            }
            (Model::Network(net), Mode::InfoNce) => infonce_estimate(net, &self.evaluation, self.contrastive_batch)?,
            (Model::Network(_), Mode::ClosedForm) => unreachable!("closed form has no network"),
        };
        Ok(MiEstimate { value, estimator: self.kind, mode, eval_samples: self.evaluation.n(), seed: self.seed })
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    /// The trained network, absent for closed-form estimators.
    pub fn network(&self) -> Option<&Mlp> {
        match &self.model {
            Model::Network(net) => Some(net),
            Model::ClosedForm(_) => None,
        }
    }

    /// Input transform applied before the network.
    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    /// Standardized evaluation pairs.
    pub fn evaluation(&self) -> &PairedDataset {
        &self.evaluation
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{NonlinearGaussianSpec, Transform, TransformPair};

    fn gauss(d: usize, rho: f64, n: usize, seed: u64) -> PairedDataset {
        NonlinearGaussianSpec::new(d, rho, TransformPair::both(Transform::Identity))
            .unwrap()
            .generate(n, &mut Rng::new(seed))
    }

    fn tiny() -> EstimatorConfig {
        EstimatorConfig {
            hidden_layers: 2,
            width: 16,
            batch_size: 64,
            max_epochs: 3,
            patience: 2,
            infonce_batch: 16,
            ..EstimatorConfig::default()
        }
    }

    #[test]
    fn every_estimator_runs_and_is_deterministic() {
        let ds = gauss(1, 0.5, 1000, 1);
        for kind in EstimatorKind::ALL {
            let a = estimate(kind, &ds, &tiny(), 7).unwrap();
            let b = estimate(kind, &ds, &tiny(), 7).unwrap();
            assert_eq!(a.value.to_bits(), b.value.to_bits(), "{kind}");
            assert!(a.value.is_finite());
            assert_eq!((a.estimator, a.eval_samples, a.seed), (kind, 100, 7));
        }
    }

    #[test]
    fn modes_reported() {
        let ds = gauss(1, 0.5, 600, 2);
        let dv = EstimatorConfig { mode: Mode::Dv, ..tiny() };
        assert_eq!(estimate(EstimatorKind::Mime, &ds, &dv, 1).unwrap().mode, Mode::Dv);
        assert_eq!(estimate(EstimatorKind::Mre, &ds, &tiny(), 1).unwrap().mode, Mode::Ratio);
        assert_eq!(estimate(EstimatorKind::Nwj, &ds, &dv, 1).unwrap().mode, Mode::Nwj);
        assert_eq!(estimate(EstimatorKind::DoeGaussian, &ds, &dv, 1).unwrap().mode, Mode::ClosedForm);
    }

    #[test]
    fn trained_mime_satisfies_telescoping() {
        let ds = gauss(2, 0.7, 800, 3);
        let t = train(EstimatorKind::Mime, &ds, &tiny(), 4).unwrap();
        let net = t.network().unwrap();
        let logits = net.forward(&t.evaluation().joint()).unwrap();
        for row in logits.iter_rows() {
            let (a, b) = telescoped_ratio(row);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn mime_learns_dependence() {
        let ds = gauss(1, 0.8, 4000, 5);
        let cfg = EstimatorConfig { max_epochs: 15, patience: 5, ..tiny() };
        let t = train(EstimatorKind::Mime, &ds, &cfg, 6).unwrap();
        let est = t.estimate().unwrap().value;
        let truth = -0.5 * (1.0f64 - 0.64).ln();
        assert!((est - truth).abs() < 0.15, "estimate {est} vs {truth}");
        assert!(t.history().len() >= 2);
    }

    #[test]
    fn independence_gives_small_estimates() {
        let ds = gauss(1, 0.0, 2000, 8);
        let cfg = EstimatorConfig { learning_rate: 2e-3, max_epochs: 30, patience: 5, ..tiny() };
        for kind in [EstimatorKind::Mime, EstimatorKind::Nwj, EstimatorKind::DoeGaussian] {
            let v = estimate(kind, &ds, &cfg, 9).unwrap().value;
            assert!(v.abs() < 0.1, "{kind}: {v}");
        }
    }

    #[test]
    fn infonce_never_exceeds_log_batch() {
        let ds = gauss(2, 0.95, 1000, 10);
        let v = estimate(EstimatorKind::InfoNce, &ds, &tiny(), 11).unwrap().value;
        assert!(v <= 16f64.ln());
    }

    #[test]
    fn invalid_configs_fail_before_training() {
        let ds = gauss(1, 0.5, 1000, 12);
        let bad = EstimatorConfig { batch_size: 66, ..tiny() };
        assert!(estimate(EstimatorKind::Mime, &ds, &bad, 1).is_err());
        assert!(estimate(EstimatorKind::Mime, &gauss(1, 0.5, 30, 1), &tiny(), 1).is_err());
    }
}
