//! Implementations behind the `vessel-surrogate` subcommands. Each function
//! validates its inputs fully before producing any output file.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{self, Dataset, Samples, Scaler};
use crate::ensemble::{self, EnsembleModel};
use crate::error::Error;
use crate::metrics::{self, NamedReport};
use crate::mlp;
use crate::physics::{self, DesignPoint};
use crate::seeds;
use crate::trees::{self, BaselineKind, TreeHyperParams};
use crate::Result;

/// Sidecar written by `train` next to the model: the held-out rows of the
/// source CSV, for later evaluation on the exact same split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub seed: u64,
    pub n: usize,
    pub n_train: usize,
    pub test_indices: Vec<usize>,
}

/// `<model>.split.json` for a model saved at `<model>.json`.
pub fn split_sidecar_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("split.json")
}

/// Runs `f` on a worker pool of `jobs` threads (0 = all cores).
pub fn with_jobs<T>(jobs: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::config(format!("cannot build worker pool: {e}")))?;
    pool.install(f)
}

/// `gen-data`: sample the design space, evaluate the stress oracle, write
/// the CSV, and report the per-sample cost.
pub fn run_gen_data(config: &RunConfig, out: &Path) -> Result<()> {
    config.validate()?;
    let designs = dataset::sample_designs(
        &config.design_space,
        config.sampling.n,
        seeds::derive_seed(config.seed, "sample-designs"),
        config.sampling.method,
    )?;
    let start = Instant::now();
    let data = dataset::generate_dataset(&designs)?;
    let elapsed = start.elapsed();
    dataset::write_csv(&data, out)?;
    let per_sample_us = elapsed.as_secs_f64() * 1e6 / data.len() as f64;
    println!(
        "wrote {} samples to {} (oracle cost {:.3} us/sample, {:.3} s total)",
        data.len(),
        out.display(),
        per_sample_us,
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    dataset::read_csv(path, None)
}

/// `train`: split the data, train the k-member ensemble on the training
/// part, save the model plus the test-split sidecar.
pub fn run_train(config: &RunConfig, data_path: &Path, out: &Path) -> Result<()> {
    config.validate()?;
    let data = load_dataset(data_path)?;
    let n_train = config.split.n_train;
    if n_train >= data.len() {
        return Err(Error::config(format!(
            "split.n_train = {n_train} but {} has only {} rows",
            data_path.display(),
            data.len()
        )));
    }
    let (train_idx, test_idx) = dataset::split_indices(
        data.len(),
        n_train,
        seeds::derive_seed(config.seed, "train-test-split"),
    )?;
    let train = data.subset(&train_idx);

    println!(
        "training {}-member ensemble on {} samples ({} parameters per member)",
        config.ensemble.k,
        train.len(),
        mlp::param_count(&config.architecture)
    );
    let start = Instant::now();
    let model = ensemble::train_ensemble(
        &train,
        config.ensemble.k,
        &config.architecture,
        &config.train_config(seeds::derive_seed(config.seed, "ensemble")),
    )?;
    let train_s = start.elapsed().as_secs_f64();

    model.save(out)?;
    let split = SplitFile {
        seed: config.seed,
        n: data.len(),
        n_train,
        test_indices: test_idx,
    };
    let sidecar = split_sidecar_path(out);
    std::fs::write(&sidecar, serde_json::to_string_pretty(&split)?)
        .map_err(|e| Error::io(sidecar.display().to_string(), e))?;

    for (i, member) in model.members.iter().enumerate() {
        let best = member.history.epochs[member.history.best_epoch];
        println!(
            "member {i}: {} epochs, best val L1 {:.5} at epoch {}",
            member.history.epochs.len(),
            best.val_loss,
            member.history.best_epoch
        );
    }
    println!(
        "saved model to {} and split to {} ({train_s:.1} s)",
        out.display(),
        sidecar.display()
    );
    Ok(())
}

/// Inputs for the surrogate's tree competitors: min-max-normalized features
/// with targets kept in pascals (trees are target-scale-equivariant, and the
/// relative-residual metrics need the original units).
fn tree_samples(scaler: &Scaler, data: &Dataset) -> Samples {
    let mut s = Samples::new(4);
    for (p, &y) in data.points.iter().zip(&data.targets) {
        s.push(&scaler.apply(p), y);
    }
    s
}

struct TimedModel {
    name: &'static str,
    tune_s: f64,
    train_s: f64,
    predict_us_per_sample: f64,
    predictions: Vec<f64>,
    chosen: Option<TreeHyperParams>,
}

/// `benchmark`: train the deep ensemble and the tuned tree baselines on the
/// identical train split, evaluate all three on the identical test split,
/// emit the four-metric comparison table plus timing lines.
pub fn run_benchmark(config: &RunConfig, data_path: &Path, out: Option<&Path>) -> Result<()> {
    config.validate()?;
    let data = load_dataset(data_path)?;
    if config.split.n_train >= data.len() {
        return Err(Error::config(format!(
            "split.n_train = {} but {} has only {} rows",
            config.split.n_train,
            data_path.display(),
            data.len()
        )));
    }
    let (train_idx, test_idx) = dataset::split_indices(
        data.len(),
        config.split.n_train,
        seeds::derive_seed(config.seed, "train-test-split"),
    )?;
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);
    println!(
        "samples: {} (train {}, test {})",
        data.len(),
        train.len(),
        test.len()
    );
    println!(
        "ensemble parameters per member: {}",
        mlp::param_count(&config.architecture)
    );

    let mut results: Vec<TimedModel> = Vec::new();

    // deep ensemble
    {
        let start = Instant::now();
        let model = ensemble::train_ensemble(
            &train,
            config.ensemble.k,
            &config.architecture,
            &config.train_config(seeds::derive_seed(config.seed, "ensemble")),
        )?;
        let train_s = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let predictions = model.predict_batch(&test.points)?;
        let predict_us = start.elapsed().as_secs_f64() * 1e6 / test.len() as f64;
        results.push(TimedModel {
            name: "Deep ensemble",
            tune_s: 0.0,
            train_s,
            predict_us_per_sample: predict_us,
            predictions,
            chosen: None,
        });
    }

    // tree baselines share the ensemble's input normalization protocol
    let scaler = Scaler::fit(&train)?;
    let train_samples = tree_samples(&scaler, &train);
    let test_samples = tree_samples(&scaler, &test);

    for (name, kind, grid, label) in [
        (
            "Random Forest",
            BaselineKind::Forest,
            config.forest_grid.expand(),
            "forest",
        ),
        (
            "Gradient Boost",
            BaselineKind::Boost,
            config.boost_grid.expand(),
            "boost",
        ),
    ] {
        let start = Instant::now();
        let search = trees::grid_search(
            kind,
            &train_samples,
            &grid,
            config.tuning.cv_folds,
            seeds::derive_seed(config.seed, &format!("{label}-grid")),
        )?;
        let tune_s = start.elapsed().as_secs_f64();
        for cell in &search.table {
            println!(
                "tuning {name}: depth {} trees {} criterion {:?} -> cv mean |dZ| {:.4}",
                cell.hyper_params.max_depth,
                cell.hyper_params.n_trees,
                cell.hyper_params.criterion,
                cell.mean_abs_residual
            );
        }
        let start = Instant::now();
        let model = trees::fit_baseline(
            kind,
            &train_samples,
            &search.best,
            seeds::derive_seed(config.seed, &format!("{label}-final")),
        )?;
        let train_s = start.elapsed().as_secs_f64();
        let start = Instant::now();
        let predictions: Vec<f64> = (0..test_samples.len())
            .map(|i| model.predict(test_samples.row(i)))
            .collect();
        let predict_us = start.elapsed().as_secs_f64() * 1e6 / test.len() as f64;
        results.push(TimedModel {
            name,
            tune_s,
            train_s,
            predict_us_per_sample: predict_us,
            predictions,
            chosen: Some(search.best),
        });
    }

    let rows: Vec<NamedReport> = results
        .iter()
        .map(|r| {
            Ok(NamedReport {
                model: r.name.to_string(),
                report: metrics::report(&test.targets, &r.predictions)?,
            })
        })
        .collect::<Result<_>>()?;
    let table = metrics::benchmark_table(rows)?;

    println!();
    print!("{}", table.render_text());
    println!();
    for r in &results {
        if let Some(hp) = &r.chosen {
            println!(
                "chosen {}: depth {} trees {} criterion {:?} shrinkage {}",
                r.name, hp.max_depth, hp.n_trees, hp.criterion, hp.shrinkage
            );
        }
    }
    for r in &results {
        println!(
            "timing model=\"{}\" tune_s={:.3} train_s={:.3} predict_us_per_sample={:.3}",
            r.name, r.tune_s, r.train_s, r.predict_us_per_sample
        );
    }
    let acc: Vec<f64> = table.rows.iter().map(|r| r.report.accuracy_pct).collect();
    let reproduced = acc[0] > acc[1] && acc[1] > acc[2];
    println!(
        "ordering accuracy Deep ensemble > Random Forest > Gradient Boost: {}",
        if reproduced { "reproduced" } else { "not reproduced" }
    );

    if let Some(out) = out {
        std::fs::write(out, table.render_csv())
            .map_err(|e| Error::io(out.display().to_string(), e))?;
        println!("wrote table to {}", out.display());
    }
    Ok(())
}

const PA_PER_MPA: f64 = 1e6;

/// `predict` on a single design given as flags.
pub fn run_predict_single(
    config: &RunConfig,
    model_path: &Path,
    design: DesignPoint,
    with_oracle: bool,
) -> Result<()> {
    design.validate()?;
    let model = EnsembleModel::load(model_path)?;
    let material = config.material.material();
    let sf = config.material.safety_factor;

    let surrogate_pa = model.predict(&design)?;
    println!("surrogate: {:.3} MPa", surrogate_pa / PA_PER_MPA);
    let surrogate_ok = surrogate_pa * sf < material.yield_strength;
    if with_oracle {
        let oracle_pa = physics::max_vm_stress(&design)?.max_vm;
        println!("oracle:    {:.3} MPa", oracle_pa / PA_PER_MPA);
        if oracle_pa > 0.0 {
            println!(
                "relative gap |surrogate - oracle| / oracle: {:.4}",
                (surrogate_pa - oracle_pa).abs() / oracle_pa
            );
        }
        let oracle_ok = physics::is_feasible(&design, &material, sf)?;
        println!(
            "feasible (oracle, safety factor {sf}, yield {:.1} MPa): {}",
            material.yield_strength / PA_PER_MPA,
            if oracle_ok { "yes" } else { "no" }
        );
    }
    println!(
        "feasible (surrogate, safety factor {sf}, yield {:.1} MPa): {}",
        material.yield_strength / PA_PER_MPA,
        if surrogate_ok { "yes" } else { "no" }
    );
    Ok(())
}

/// Reads a batch of designs: the dataset schema minus the target column
/// (a present target column is ignored).
fn read_designs_csv(path: &Path) -> Result<Vec<DesignPoint>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let path_str = path.display().to_string();
    let mut idx = [0usize; 4];
    for (slot, name) in dataset::CSV_HEADER[..4].iter().enumerate() {
        idx[slot] = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| Error::CsvData {
                path: path_str.clone(),
                row: 1,
                message: format!("missing column '{name}'"),
            })?;
    }
    let mut designs = Vec::new();
    for (row_0, record) in reader.records().enumerate() {
        let row = row_0 + 1;
        let record = record?;
        let mut vals = [0.0f64; 4];
        for slot in 0..4 {
            let cell = record.get(idx[slot]).unwrap_or("");
            vals[slot] = cell.parse().map_err(|_| Error::CsvData {
                path: path_str.clone(),
                row,
                message: format!("non-numeric cell '{cell}'"),
            })?;
        }
        designs.push(
            DesignPoint::new(vals[0], vals[1], vals[2], vals[3]).map_err(|e| Error::CsvData {
                path: path_str.clone(),
                row,
                message: e.to_string(),
            })?,
        );
    }
    Ok(designs)
}

/// `predict --batch`: CSV of designs in, row-aligned CSV of predictions out.
pub fn run_predict_batch(
    config: &RunConfig,
    model_path: &Path,
    batch_path: &Path,
    with_oracle: bool,
    out: Option<&Path>,
) -> Result<()> {
    let model = EnsembleModel::load(model_path)?;
    let designs = read_designs_csv(batch_path)?;
    let material = config.material.material();
    let sf = config.material.safety_factor;

    let mut text = String::new();
    text.push_str("depth_m,length_m,thickness_m,radius_m,predicted_max_vm_pa,feasible");
    if with_oracle {
        text.push_str(",oracle_max_vm_pa");
    }
    text.push('\n');
    for d in &designs {
        let pred = model.predict(d)?;
        let feasible = pred * sf < material.yield_strength;
        text.push_str(&format!(
            "{},{},{},{},{},{}",
            d.depth, d.length, d.thickness, d.radius, pred, feasible
        ));
        if with_oracle {
            text.push_str(&format!(",{}", physics::max_vm_stress(d)?.max_vm));
        }
        text.push('\n');
    }
    match out {
        Some(path) => {
            std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))?;
            println!("wrote {} predictions to {}", designs.len(), path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// `eval`: metrics of a saved model on a dataset, optionally restricted to
/// the test rows recorded by `train`.
pub fn run_eval(
    model_path: &Path,
    data_path: &Path,
    split_path: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let model = EnsembleModel::load(model_path)?;
    let data = load_dataset(data_path)?;
    let eval_set = match split_path {
        None => data,
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            let split: SplitFile = serde_json::from_str(&text)?;
            if split.n != data.len() {
                return Err(Error::config(format!(
                    "split file {} was made for {} rows but {} has {}",
                    path.display(),
                    split.n,
                    data_path.display(),
                    data.len()
                )));
            }
            if let Some(&bad) = split.test_indices.iter().find(|&&i| i >= data.len()) {
                return Err(Error::config(format!(
                    "split file {} lists row {bad} beyond the dataset",
                    path.display()
                )));
            }
            data.subset(&split.test_indices)
        }
    };
    if eval_set.is_empty() {
        return Err(Error::config("evaluation set is empty".to_string()));
    }
    let predictions = model.predict_batch(&eval_set.points)?;
    let report = metrics::report(&eval_set.targets, &predictions)?;
    let table = metrics::benchmark_table(vec![NamedReport {
        model: "Deep ensemble".to_string(),
        report,
    }])?;
    print!("{}", table.render_text());
    if let Some(path) = out {
        std::fs::write(path, table.render_csv())
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        println!("wrote table to {}", path.display());
    }
    Ok(())
}
