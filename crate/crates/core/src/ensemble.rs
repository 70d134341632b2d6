//! Cross-validated deep ensemble: one base network per fold, trained on the
//! fold's complement, with the final stress prediction being the mean of the
//! member outputs.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{kfold, Dataset, FoldAssignment, Samples, Scaler};
use crate::error::Error;
use crate::mlp::{self, Architecture, NetworkParameters, TrainConfig, TrainHistory};
use crate::physics::DesignPoint;
use crate::seeds;
use crate::Result;

const FORMAT_TAG: &str = "vessel-surrogate/ensemble";
const FORMAT_VERSION: u32 = 1;

/// One trained ensemble member plus its training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub seed: u64,
    /// Training-set rows (indices into the ensemble's training data) the
    /// member was fitted on.
    pub fit_indices: Vec<usize>,
    /// Rows used for early-stopping validation.
    pub val_indices: Vec<usize>,
    pub history: TrainHistory,
    pub params: NetworkParameters,
}

/// A trained deep ensemble: k member networks sharing one scaler and
/// architecture. Prediction is the member mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub format: String,
    pub version: u32,
    pub k: usize,
    pub architecture: Architecture,
    pub scaler: Scaler,
    pub master_seed: u64,
    /// `None` in the degenerate single-member case.
    pub fold_assignment: Option<FoldAssignment>,
    pub members: Vec<Member>,
}

/// Planned data usage for one member before training.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberPlan {
    pub seed: u64,
    pub fit_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

/// Derives the per-member fit/validation index sets.
///
/// For `k >= 2` member `i` works on the complement of fold `i` (the other
/// k−1 folds); that complement is then split 90/10 into fit and validation
/// rows. `k = 1` trains a single member on a 90/10 split of everything.
/// The held-out fold itself is never touched by its member.
pub fn member_plan(
    n: usize,
    k: usize,
    master_seed: u64,
) -> Result<(Option<FoldAssignment>, Vec<MemberPlan>)> {
    if k == 0 {
        return Err(Error::config("ensemble size k must be >= 1".to_string()));
    }
    if n < 10 * k {
        return Err(Error::config(format!(
            "need at least {} samples to train a {k}-member ensemble (10 per member), got {n}",
            10 * k
        )));
    }
    let folds = if k >= 2 {
        Some(kfold(n, k, seeds::derive_seed(master_seed, "ensemble-folds"))?)
    } else {
        None
    };
    let mut plans = Vec::with_capacity(k);
    for i in 0..k {
        let mut pool: Vec<usize> = match &folds {
            Some(f) => f.complement_indices(i),
            None => (0..n).collect(),
        };
        let mut rng = seeds::derive_rng(master_seed, &format!("member-split-{i}"));
        pool.shuffle(&mut rng);
        let n_val = (pool.len() / 10).max(1);
        let mut val_indices: Vec<usize> = pool[..n_val].to_vec();
        let mut fit_indices: Vec<usize> = pool[n_val..].to_vec();
        val_indices.sort_unstable();
        fit_indices.sort_unstable();
        plans.push(MemberPlan {
            seed: seeds::derive_seed(master_seed, &format!("member-{i}")),
            fit_indices,
            val_indices,
        });
    }
    Ok((folds, plans))
}

/// Trains a k-member ensemble on `train_data`.
///
/// The scaler is fitted on the full training data; members then train on
/// min-max-normalized inputs and standardized targets. Member seeds derive
/// from `config.seed`, so the result is bit-identical across runs and
/// independent of how many workers execute the members.
pub fn train_ensemble(
    train_data: &Dataset,
    k: usize,
    arch: &Architecture,
    config: &TrainConfig,
) -> Result<EnsembleModel> {
    arch.validate()?;
    config.validate()?;
    let (folds, plans) = member_plan(train_data.len(), k, config.seed)?;
    let scaler = Scaler::fit(train_data)?;

    let inputs: Vec<[f64; 4]> = train_data.points.iter().map(|p| scaler.apply(p)).collect();
    let targets: Vec<f64> = train_data
        .targets
        .iter()
        .map(|&y| scaler.apply_target(y))
        .collect();
    let build_set = |indices: &[usize]| {
        let mut set = Samples::new(4);
        for &i in indices {
            set.push(&inputs[i], targets[i]);
        }
        set
    };

    let members: Vec<Member> = plans
        .into_par_iter()
        .enumerate()
        .map(|(i, plan)| {
            let fit = build_set(&plan.fit_indices);
            let val = build_set(&plan.val_indices);
            let member_config = TrainConfig {
                seed: plan.seed,
                ..config.clone()
            };
            let (params, history) =
                mlp::train(arch, &fit, &val, &member_config).map_err(|e| match e {
                    Error::Training { epoch, message, .. } => Error::Training {
                        member: i,
                        epoch,
                        message,
                    },
                    other => other,
                })?;
            Ok(Member {
                seed: plan.seed,
                fit_indices: plan.fit_indices,
                val_indices: plan.val_indices,
                history,
                params,
            })
        })
        .collect::<Result<Vec<Member>>>()?;

    Ok(EnsembleModel {
        format: FORMAT_TAG.to_string(),
        version: FORMAT_VERSION,
        k,
        architecture: arch.clone(),
        scaler,
        master_seed: config.seed,
        fold_assignment: folds,
        members,
    })
}

impl EnsembleModel {
    /// Standardized (z-score) outputs of every member for one design.
    pub fn member_outputs(&self, design: &DesignPoint) -> Result<Vec<f64>> {
        design.validate()?;
        let x = self.scaler.apply(design);
        self.members
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let z = mlp::forward_eval(&m.params, &x)?;
                if !z.is_finite() {
                    return Err(Error::model(
                        format!("members[{i}]"),
                        format!("non-finite output {z}"),
                    ));
                }
                Ok(z)
            })
            .collect()
    }

    /// Predicted maximum von Mises stress in pascals: the member outputs are
    /// averaged in standardized space, then the target standardization is
    /// inverted.
    pub fn predict(&self, design: &DesignPoint) -> Result<f64> {
        let outputs = self.member_outputs(design)?;
        let mean = outputs.iter().sum::<f64>() / outputs.len() as f64;
        Ok(self.scaler.invert_target(mean))
    }

    /// Predictions for a batch of designs, row-aligned with the input.
    pub fn predict_batch(&self, designs: &[DesignPoint]) -> Result<Vec<f64>> {
        designs.iter().map(|d| self.predict(d)).collect()
    }

    /// Structural validation with field-path error messages.
    pub fn validate(&self) -> Result<()> {
        if self.format != FORMAT_TAG {
            return Err(Error::model(
                "format",
                format!("expected '{FORMAT_TAG}', got '{}'", self.format),
            ));
        }
        if self.version != FORMAT_VERSION {
            return Err(Error::model(
                "version",
                format!("unsupported version {}", self.version),
            ));
        }
        if self.k == 0 || self.members.len() != self.k {
            return Err(Error::model(
                "members",
                format!(
                    "manifest k = {} but {} members stored",
                    self.k,
                    self.members.len()
                ),
            ));
        }
        self.architecture.validate()?;
        self.scaler.validate()?;
        for (i, member) in self.members.iter().enumerate() {
            if member.params.arch != self.architecture {
                return Err(Error::model(
                    format!("members[{i}].params.arch"),
                    "differs from the manifest architecture".to_string(),
                ));
            }
            member.params.validate_shapes().map_err(|e| match e {
                Error::Model { field, message } => {
                    Error::model(format!("members[{i}].params.{field}"), message)
                }
                other => other,
            })?;
        }
        Ok(())
    }

    /// Writes the model as structured JSON text. Weight values use the
    /// shortest decimal form that parses back to the identical f64, so a
    /// saved model predicts bit-exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    /// Loads and validates a model file.
    pub fn load(path: &Path) -> Result<EnsembleModel> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let model: EnsembleModel = serde_json::from_str(&text)?;
        model.validate()?;
        Ok(model)
    }
}
