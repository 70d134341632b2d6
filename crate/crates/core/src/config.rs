//! Run configuration: a flat, human-editable TOML file covering every stage
//! of a run. Any field may be omitted (defaults apply) and command-line
//! flags override file values.
//!
//! ```toml
//! seed = 42
//! jobs = 0                     # 0 = all available cores
//!
//! [design_space]
//! depth = [100.0, 6000.0]      # m
//! length = [0.1, 2.0]          # m
//! thickness = [0.002, 0.06]    # m
//! radius = [0.05, 0.5]         # m
//!
//! [sampling]
//! n = 11311
//! method = "uniform"           # or "latin_hypercube"
//!
//! [split]
//! n_train = 8000
//!
//! [architecture]
//! hidden_widths = [64, 64, 64, 64, 64, 64]
//! dropout_rate = 0.2
//! dropout_after = [2, 4]
//! skip_spans = [[1, 3], [3, 5]]
//!
//! [training]
//! learning_rate = 0.001
//! batch_size = 128
//! max_epochs = 2000
//! patience = 50
//!
//! [ensemble]
//! k = 5
//!
//! [material]
//! name = "Al6061-T6"
//! yield_strength_pa = 2.76e8
//! density_kg_m3 = 2700.0
//! safety_factor = 1.5
//!
//! [tuning]
//! cv_folds = 3
//!
//! [forest_grid]
//! max_depth = [8, 14]
//! n_trees = [100]
//! criteria = ["variance_reduction", "mae_reduction"]
//! max_features = [4]
//!
//! [boost_grid]
//! max_depth = [2, 3]
//! n_trees = [100, 200]
//! shrinkage = [0.1]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{DesignSpace, SamplingMethod};
use crate::error::Error;
use crate::mlp::{Architecture, TrainConfig};
use crate::physics::Material;
use crate::trees::{SplitCriterion, TreeHyperParams};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub n: usize,
    pub method: SamplingMethod,
}

impl Default for SamplingSection {
    fn default() -> Self {
        SamplingSection {
            n: 11_311,
            method: SamplingMethod::Uniform,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub n_train: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { n_train: 8000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainingSection {
            learning_rate: d.learning_rate,
            batch_size: d.batch_size,
            max_epochs: d.max_epochs,
            patience: d.patience,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub k: usize,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection { k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSection {
    pub name: String,
    pub yield_strength_pa: f64,
    pub density_kg_m3: f64,
    pub safety_factor: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        let m = Material::al6061_t6();
        MaterialSection {
            name: m.name,
            yield_strength_pa: m.yield_strength,
            density_kg_m3: m.density,
            safety_factor: 1.5,
        }
    }
}

impl MaterialSection {
    pub fn material(&self) -> Material {
        Material {
            name: self.name.clone(),
            yield_strength: self.yield_strength_pa,
            density: self.density_kg_m3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningSection {
    pub cv_folds: usize,
}

impl Default for TuningSection {
    fn default() -> Self {
        TuningSection { cv_folds: 3 }
    }
}

/// Axes of the random-forest tuning grid; cells are the cartesian product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestGridSection {
    pub max_depth: Vec<usize>,
    pub n_trees: Vec<usize>,
    pub criteria: Vec<SplitCriterion>,
    pub max_features: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
}

impl Default for ForestGridSection {
    fn default() -> Self {
        ForestGridSection {
            max_depth: vec![8, 14],
            n_trees: vec![100],
            criteria: vec![
                SplitCriterion::VarianceReduction,
                SplitCriterion::MaeReduction,
            ],
            max_features: vec![4],
            min_samples_leaf: vec![1],
        }
    }
}

impl ForestGridSection {
    pub fn expand(&self) -> Vec<TreeHyperParams> {
        let mut grid = Vec::new();
        for &max_depth in &self.max_depth {
            for &n_trees in &self.n_trees {
                for &criterion in &self.criteria {
                    for &max_features in &self.max_features {
                        for &min_samples_leaf in &self.min_samples_leaf {
                            grid.push(TreeHyperParams {
                                max_depth,
                                min_samples_leaf,
                                criterion,
                                n_trees,
                                max_features,
                                bootstrap: true,
                                shrinkage: 0.1,
                            });
                        }
                    }
                }
            }
        }
        grid
    }
}

/// Axes of the gradient-boost tuning grid. Residual trees always split
/// under the squared-error criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostGridSection {
    pub max_depth: Vec<usize>,
    pub n_trees: Vec<usize>,
    pub shrinkage: Vec<f64>,
    pub min_samples_leaf: Vec<usize>,
}

impl Default for BoostGridSection {
    fn default() -> Self {
        BoostGridSection {
            max_depth: vec![2, 3],
            n_trees: vec![100, 200],
            shrinkage: vec![0.1],
            min_samples_leaf: vec![1],
        }
    }
}

impl BoostGridSection {
    pub fn expand(&self) -> Vec<TreeHyperParams> {
        let mut grid = Vec::new();
        for &max_depth in &self.max_depth {
            for &n_trees in &self.n_trees {
                for &shrinkage in &self.shrinkage {
                    for &min_samples_leaf in &self.min_samples_leaf {
                        grid.push(TreeHyperParams {
                            max_depth,
                            min_samples_leaf,
                            criterion: SplitCriterion::VarianceReduction,
                            n_trees,
                            max_features: 4,
                            bootstrap: false,
                            shrinkage,
                        });
                    }
                }
            }
        }
        grid
    }
}

/// Everything a run needs. All randomness flows from `seed`; stage seeds
/// are derived by labeled hashing so adding a stage never perturbs the
/// streams of earlier stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker pool size; 0 means all available cores. Results are
    /// independent of this value.
    pub jobs: usize,
    pub design_space: DesignSpace,
    pub sampling: SamplingSection,
    pub split: SplitSection,
    pub architecture: Architecture,
    pub training: TrainingSection,
    pub ensemble: EnsembleSection,
    pub material: MaterialSection,
    pub tuning: TuningSection,
    pub forest_grid: ForestGridSection,
    pub boost_grid: BoostGridSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            jobs: 0,
            design_space: DesignSpace::default(),
            sampling: SamplingSection::default(),
            split: SplitSection::default(),
            architecture: Architecture::default(),
            training: TrainingSection::default(),
            ensemble: EnsembleSection::default(),
            material: MaterialSection::default(),
            tuning: TuningSection::default(),
            forest_grid: ForestGridSection::default(),
            boost_grid: BoostGridSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Training hyperparameters with the ensemble-stage seed filled in by
    /// the caller.
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.training.learning_rate,
            batch_size: self.training.batch_size,
            max_epochs: self.training.max_epochs,
            patience: self.training.patience,
            seed,
        }
    }

    /// Checks every referenced module's invariants up front, before any
    /// Sampling, training, or file output starts.
    pub fn validate(&self) -> Result<()> {
        self.design_space.validate()?;
        if self.sampling.n == 0 {
            return Err(Error::config("sampling.n must be > 0".to_string()));
        }
        if self.split.n_train == 0 || self.split.n_train >= self.sampling.n {
            return Err(Error::config(format!(
                "split.n_train must satisfy 0 < n_train < sampling.n ({}), got {}",
                self.sampling.n, self.split.n_train
            )));
        }
        self.architecture.validate()?;
        self.train_config(0).validate()?;
        if self.ensemble.k == 0 {
            return Err(Error::config("ensemble.k must be >= 1".to_string()));
        }
        self.material.material().validate()?;
        if !(self.material.safety_factor.is_finite() && self.material.safety_factor >= 1.0) {
            return Err(Error::config(format!(
                "material.safety_factor must be >= 1, got {}",
                self.material.safety_factor
            )));
        }
        if self.tuning.cv_folds < 2 {
            return Err(Error::config("tuning.cv_folds must be >= 2".to_string()));
        }
        let forest = self.forest_grid.expand();
        let boost = self.boost_grid.expand();
        if forest.is_empty() || boost.is_empty() {
            return Err(Error::config(
                "forest_grid and boost_grid must each contain at least one cell".to_string(),
            ));
        }
        for hp in forest.iter().chain(&boost) {
            hp.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "seed = 7\n[sampling]\nn = 500\n[split]\nn_train = 400\n",
        )
        .unwrap();
        let config = RunConfig::load(&path).unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.sampling.n, 500);
        assert_eq!(config.split.n_train, 400);
        assert_eq!(config.ensemble.k, 5);
        assert_eq!(config.architecture.hidden_widths, vec![64; 6]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "sed = 7\n").unwrap();
        assert!(RunConfig::load(&path).is_err());
    }

    #[test]
    fn invalid_values_are_rejected_before_any_work() {
        let mut bad = RunConfig::default();
        bad.split.n_train = bad.sampling.n;
        assert!(bad.validate().is_err());

        let mut bad = RunConfig::default();
        bad.architecture.hidden_widths = vec![64; 3];
        assert!(bad.validate().is_err());

        let mut bad = RunConfig::default();
        bad.material.safety_factor = 0.5;
        assert!(bad.validate().is_err());

        let mut bad = RunConfig::default();
        bad.training.patience = 0;
        assert!(bad.validate().is_err());

        let mut bad = RunConfig::default();
        bad.design_space.thickness = (0.0, 0.06);
        assert!(bad.validate().is_err());
    }

    #[test]
    fn grids_expand_to_the_cartesian_product() {
        let config = RunConfig::default();
        assert_eq!(config.forest_grid.expand().len(), 4);
        assert_eq!(config.boost_grid.expand().len(), 4);
    }
}
