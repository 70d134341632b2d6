//! Design-space sampling, oracle-driven data generation, normalization,
//! splitting, and CSV persistence.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::physics::{self, DesignPoint};
use crate::seeds;
use crate::Result;

/// Canonical CSV header written by [`write_csv`] and expected by
/// [`read_csv`] when no column map is given.
pub const CSV_HEADER: [&str; 5] = ["depth_m", "length_m", "thickness_m", "radius_m", "max_vm_pa"];

/// Names of the four design variables, in canonical order.
pub const VARIABLE_NAMES: [&str; 4] = ["depth", "length", "thickness", "radius"];

/// Per-variable bounds of the design space, SI units.
///
/// Degenerate bounds (`lower == upper`) are allowed and pin the variable to a
/// single value; `lower > upper` is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignSpace {
    pub depth: (f64, f64),
    pub length: (f64, f64),
    pub thickness: (f64, f64),
    pub radius: (f64, f64),
}

impl Default for DesignSpace {
    /// Depth spans the 0–6000 m operating range with a 100 m floor so
    /// targets stay bounded away from zero; geometry bounds cover small
    /// instrument hulls up to 1 m diameter.
    fn default() -> Self {
        DesignSpace {
            depth: (100.0, 6000.0),
            length: (0.1, 2.0),
            thickness: (0.002, 0.06),
            radius: (0.05, 0.5),
        }
    }
}

impl DesignSpace {
    pub fn bounds(&self) -> [(f64, f64); 4] {
        [self.depth, self.length, self.thickness, self.radius]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in VARIABLE_NAMES.iter().zip(self.bounds()) {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::config(format!(
                    "{name} bounds must be finite with lower <= upper, got [{lo}, {hi}]"
                )));
            }
        }
        if self.depth.0 < 0.0 || self.length.0 < 0.0 {
            return Err(Error::config(
                "depth and length lower bounds must be >= 0".to_string(),
            ));
        }
        if self.thickness.0 <= 0.0 || self.radius.0 <= 0.0 {
            return Err(Error::config(
                "thickness and radius lower bounds must be > 0".to_string(),
            ));
        }
        Ok(())
    }
}

/// How [`sample_designs`] fills the space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMethod {
    /// Independent uniform draws per variable.
    Uniform,
    /// Latin hypercube: each variable visits all `n` equal-width strata
    /// exactly once.
    LatinHypercube,
}

impl std::str::FromStr for SamplingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplingMethod::Uniform),
            "latin_hypercube" | "lhs" => Ok(SamplingMethod::LatinHypercube),
            other => Err(Error::config(format!(
                "unknown sampling method '{other}' (expected 'uniform' or 'latin_hypercube')"
            ))),
        }
    }
}

/// Where a dataset's targets came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    OracleGenerated,
    Imported,
}

/// Paired design points and ground-truth maximum von Mises stresses.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Vec<DesignPoint>,
    /// Maximum von Mises stress per point, pascals.
    pub targets: Vec<f64>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// New dataset holding the rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            provenance: self.provenance,
        }
    }
}

fn in_stratum(rng: &mut impl Rng, lo: f64, hi: f64, stratum: usize, n: usize) -> f64 {
    let u = (stratum as f64 + rng.random::<f64>()) / n as f64;
    lo + u * (hi - lo)
}

/// Draws `n` valid design points from `space`.
///
/// Points with `thickness >= radius` are rejected and redrawn. Uniform
/// sampling redraws the whole point; Latin hypercube redraws within the
/// point's strata (keeping the stratification intact) and falls back to a
/// plain uniform redraw only if a stratum combination is inherently
/// infeasible. A space whose acceptance ratio falls below 1% is reported as
/// a configuration error.
pub fn sample_designs(
    space: &DesignSpace,
    n: usize,
    seed: u64,
    method: SamplingMethod,
) -> Result<Vec<DesignPoint>> {
    space.validate()?;
    if n == 0 {
        return Err(Error::config("sample count must be > 0".to_string()));
    }
    let mut rng = seeds::rng_from(seed);
    let bounds = space.bounds();
    let budget = n.saturating_mul(100).max(1000);
    let mut attempts: usize = 0;
    let mut out = Vec::with_capacity(n);

    match method {
        SamplingMethod::Uniform => {
            while out.len() < n {
                if attempts >= budget {
                    return Err(Error::config(format!(
                        "rejection rate above 99% while sampling: {} accepted in {} attempts; \
                         check that the thickness/radius bounds admit thickness < radius",
                        out.len(),
                        attempts
                    )));
                }
                attempts += 1;
                let draw: Vec<f64> = bounds
                    .iter()
                    .map(|&(lo, hi)| lo + rng.random::<f64>() * (hi - lo))
                    .collect();
                if let Ok(p) = DesignPoint::new(draw[0], draw[1], draw[2], draw[3]) {
                    out.push(p);
                }
            }
        }
        SamplingMethod::LatinHypercube => {
            // One stratum permutation per variable.
            let mut strata: Vec<Vec<usize>> = Vec::with_capacity(4);
            for _ in 0..4 {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                strata.push(perm);
            }
            #[allow(clippy::needless_range_loop)]
            for i in 0..n {
                let mut point = None;
                for _ in 0..100 {
                    attempts += 1;
                    let vals: Vec<f64> = (0..4)
                        .map(|v| {
                            let (lo, hi) = bounds[v];
                            in_stratum(&mut rng, lo, hi, strata[v][i], n)
                        })
                        .collect();
                    if let Ok(p) = DesignPoint::new(vals[0], vals[1], vals[2], vals[3]) {
                        point = Some(p);
                        break;
                    }
                }
                // Infeasible stratum pairing: give up on stratification for
                // this row rather than looping forever.
                while point.is_none() {
                    if attempts >= budget {
                        return Err(Error::config(format!(
                            "rejection rate above 99% while sampling: {} accepted in {} attempts",
                            out.len(),
                            attempts
                        )));
                    }
                    attempts += 1;
                    let draw: Vec<f64> = bounds
                        .iter()
                        .map(|&(lo, hi)| lo + rng.random::<f64>() * (hi - lo))
                        .collect();
                    point = DesignPoint::new(draw[0], draw[1], draw[2], draw[3]).ok();
                }
                out.push(point.expect("loop exits only with a point"));
            }
        }
    }
    Ok(out)
}

/// Evaluates the physics oracle over `designs`.
///
/// Evaluation may run on a worker pool; targets are stored in sample order,
/// so the output is independent of scheduling.
pub fn generate_dataset(designs: &[DesignPoint]) -> Result<Dataset> {
    let targets: Vec<f64> = designs
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            physics::max_vm_stress(d)
                .map(|s| s.max_vm)
                .map_err(|e| Error::domain(format!("sample {i}: {e}")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Dataset {
        points: designs.to_vec(),
        targets,
        provenance: Provenance::OracleGenerated,
    })
}

/// Random disjoint partition into `n_train` training rows and the rest.
pub fn train_test_split(data: &Dataset, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    let (train_idx, test_idx) = split_indices(data.len(), n_train, seed)?;
    Ok((data.subset(&train_idx), data.subset(&test_idx)))
}

/// Index form of [`train_test_split`]; both sides are sorted ascending.
pub fn split_indices(n: usize, n_train: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n_train == 0 || n_train >= n {
        return Err(Error::domain(format!(
            "n_train must satisfy 0 < n_train < {n}, got {n_train}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut seeds::rng_from(seed));
    let mut train: Vec<usize> = indices[..n_train].to_vec();
    let mut test: Vec<usize> = indices[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Assignment of every sample to one of `k` folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    /// `membership[i]` is the fold of sample `i`, in `[0, k)`.
    pub membership: Vec<usize>,
}

impl FoldAssignment {
    /// Samples belonging to fold `fold`, ascending.
    pub fn fold_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.membership.len())
            .filter(|&i| self.membership[i] == fold)
            .collect()
    }

    /// Samples *not* in fold `fold`, ascending.
    pub fn complement_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.membership.len())
            .filter(|&i| self.membership[i] != fold)
            .collect()
    }
}

/// Disjoint, covering fold assignment with sizes differing by at most one.
pub fn kfold(n_samples: usize, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::domain(format!("fold count must be >= 2, got {k}")));
    }
    if n_samples < k {
        return Err(Error::domain(format!(
            "need at least {k} samples for {k} folds, got {n_samples}"
        )));
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(&mut seeds::rng_from(seed));
    let mut membership = vec![0usize; n_samples];
    for (pos, &sample) in order.iter().enumerate() {
        membership[sample] = pos % k;
    }
    Ok(FoldAssignment { k, membership })
}

/// Normalization state fitted on training data only: per-variable min–max
/// for the inputs, z-score for the targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub input_min: [f64; 4],
    pub input_max: [f64; 4],
    pub target_mean: f64,
    pub target_std: f64,
}

impl Scaler {
    /// Fits the scaler on `train`. Fails if any input variable is constant
    /// or the targets have zero spread.
    pub fn fit(train: &Dataset) -> Result<Scaler> {
        if train.is_empty() {
            return Err(Error::config(
                "cannot fit a scaler on an empty dataset".to_string(),
            ));
        }
        let mut input_min = [f64::INFINITY; 4];
        let mut input_max = [f64::NEG_INFINITY; 4];
        for p in &train.points {
            for (v, x) in p.as_array().iter().enumerate() {
                input_min[v] = input_min[v].min(*x);
                input_max[v] = input_max[v].max(*x);
            }
        }
        for (v, name) in VARIABLE_NAMES.iter().enumerate() {
            if input_max[v] <= input_min[v] {
                return Err(Error::config(format!(
                    "input variable '{name}' is constant ({}) in the training data; \
                     min-max normalization is undefined",
                    input_min[v]
                )));
            }
        }
        let n = train.targets.len() as f64;
        let target_mean = train.targets.iter().sum::<f64>() / n;
        let var = train
            .targets
            .iter()
            .map(|y| (y - target_mean).powi(2))
            .sum::<f64>()
            / n;
        let target_std = var.sqrt();
        if !(target_std.is_finite() && target_std > 0.0) {
            return Err(Error::config(
                "targets are constant in the training data; standardization is undefined"
                    .to_string(),
            ));
        }
        Ok(Scaler {
            input_min,
            input_max,
            target_mean,
            target_std,
        })
    }

    /// Min–max normalizes one design point. Training points map into
    /// [0, 1]^4; out-of-range points may fall outside and are never clamped.
    pub fn apply(&self, point: &DesignPoint) -> [f64; 4] {
        let raw = point.as_array();
        let mut out = [0.0; 4];
        for v in 0..4 {
            out[v] = (raw[v] - self.input_min[v]) / (self.input_max[v] - self.input_min[v]);
        }
        out
    }

    /// Standardizes a target value (pascals → z-score).
    pub fn apply_target(&self, y: f64) -> f64 {
        (y - self.target_mean) / self.target_std
    }

    /// Inverse of [`Scaler::apply_target`].
    pub fn invert_target(&self, z: f64) -> f64 {
        self.target_mean + self.target_std * z
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in VARIABLE_NAMES.iter().enumerate() {
            if !(self.input_min[v].is_finite() && self.input_max[v] > self.input_min[v]) {
                return Err(Error::config(format!(
                    "scaler bounds for '{name}' are invalid: [{}, {}]",
                    self.input_min[v], self.input_max[v]
                )));
            }
        }
        if !(self.target_std > 0.0 && self.target_std.is_finite() && self.target_mean.is_finite())
        {
            return Err(Error::config(format!(
                "scaler target statistics invalid: mean {}, std {}",
                self.target_mean, self.target_std
            )));
        }
        Ok(())
    }
}

/// Feature/target rows in flat row-major storage, as consumed by the
/// regressors (inputs typically min-max normalized).
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub dim: usize,
}

impl Samples {
    pub fn new(dim: usize) -> Self {
        Samples {
            inputs: Vec::new(),
            targets: Vec::new(),
            dim,
        }
    }

    pub fn push(&mut self, x: &[f64], y: f64) {
        debug_assert_eq!(x.len(), self.dim);
        self.inputs.extend_from_slice(x);
        self.targets.push(y);
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }
}

/// Maps one canonical field to a column of a foreign CSV file, with an
/// optional multiplicative unit conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub column: String,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

impl ColumnSpec {
    fn canonical(name: &str) -> ColumnSpec {
        ColumnSpec {
            column: name.to_string(),
            scale: 1.0,
        }
    }
}

/// Column mapping for [`read_csv`]; the default matches [`CSV_HEADER`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub depth: ColumnSpec,
    pub length: ColumnSpec,
    pub thickness: ColumnSpec,
    pub radius: ColumnSpec,
    pub target: ColumnSpec,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            depth: ColumnSpec::canonical(CSV_HEADER[0]),
            length: ColumnSpec::canonical(CSV_HEADER[1]),
            thickness: ColumnSpec::canonical(CSV_HEADER[2]),
            radius: ColumnSpec::canonical(CSV_HEADER[3]),
            target: ColumnSpec::canonical(CSV_HEADER[4]),
        }
    }
}

impl ColumnMap {
    fn specs(&self) -> [&ColumnSpec; 5] {
        [
            &self.depth,
            &self.length,
            &self.thickness,
            &self.radius,
            &self.target,
        ]
    }
}

/// Writes a dataset to `path` using the canonical schema. Values are written
/// in the shortest decimal form that parses back to the identical f64.
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut buf = String::with_capacity(64 * (data.len() + 1));
    buf.push_str(&CSV_HEADER.join(","));
    buf.push('\n');
    for (p, y) in data.points.iter().zip(&data.targets) {
        let a = p.as_array();
        buf.push_str(&format!("{},{},{},{},{}\n", a[0], a[1], a[2], a[3], y));
    }
    file.write_all(buf.as_bytes())
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// Reads a dataset from `path`. With `column_map = None` the canonical
/// schema is expected; foreign files are adapted through a [`ColumnMap`]
/// (column renames plus per-column unit factors).
///
/// Errors name the offending column or the 1-based data row.
pub fn read_csv(path: &Path, column_map: Option<&ColumnMap>) -> Result<Dataset> {
    let default_map = ColumnMap::default();
    let map = column_map.unwrap_or(&default_map);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Error::io(path.display().to_string(), std::io::Error::other(e.to_string())),
            _ => Error::Csv(e),
        })?;
    let headers = reader.headers()?.clone();
    let path_str = path.display().to_string();

    let mut col_idx = [0usize; 5];
    for (slot, mapped) in map.specs().iter().enumerate() {
        col_idx[slot] = headers
            .iter()
            .position(|h| h == mapped.column)
            .ok_or_else(|| {
                Error::CsvData {
                    path: path_str.clone(),
                    row: 1,
                    message: format!(
                        "missing column '{}' (found: {})",
                        mapped.column,
                        headers.iter().collect::<Vec<_>>().join(", ")
                    ),
                }
            })?;
    }
    let scales: Vec<f64> = map.specs().iter().map(|s| s.scale).collect();

    let mut points = Vec::new();
    let mut targets = Vec::new();
    for (row_0, record) in reader.records().enumerate() {
        let row = row_0 + 1; // 1-based data row
        let record = record?;
        let mut vals = [0.0f64; 5];
        for slot in 0..5 {
            let cell = record.get(col_idx[slot]).ok_or_else(|| Error::CsvData {
                path: path_str.clone(),
                row,
                message: format!("row has no column index {}", col_idx[slot]),
            })?;
            let parsed: f64 = cell.parse().map_err(|_| Error::CsvData {
                path: path_str.clone(),
                row,
                message: format!(
                    "non-numeric cell '{}' in column '{}'",
                    cell,
                    map.specs()[slot].column
                ),
            })?;
            vals[slot] = parsed * scales[slot];
        }
        let point =
            DesignPoint::new(vals[0], vals[1], vals[2], vals[3]).map_err(|e| Error::CsvData {
                path: path_str.clone(),
                row,
                message: e.to_string(),
            })?;
        if !vals[4].is_finite() {
            return Err(Error::CsvData {
                path: path_str.clone(),
                row,
                message: format!("target must be finite, got {}", vals[4]),
            });
        }
        points.push(point);
        targets.push(vals[4]);
    }
    Ok(Dataset {
        points,
        targets,
        provenance: Provenance::Imported,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_dataset(n: usize) -> Dataset {
        let mut rng = seeds::rng_from(99);
        let designs: Vec<DesignPoint> = (0..n)
            .map(|_| {
                DesignPoint::new(
                    100.0 + 5000.0 * rng.random::<f64>(),
                    0.1 + rng.random::<f64>(),
                    0.005 + 0.01 * rng.random::<f64>(),
                    0.1 + 0.3 * rng.random::<f64>(),
                )
                .unwrap()
            })
            .collect();
        generate_dataset(&designs).unwrap()
    }

    #[test]
    fn degenerate_bounds_repeat_the_single_point() {
        let space = DesignSpace {
            depth: (1000.0, 1000.0),
            length: (1.0, 1.0),
            thickness: (0.01, 0.01),
            radius: (0.2, 0.2),
        };
        let pts = sample_designs(&space, 5, 3, SamplingMethod::Uniform).unwrap();
        assert_eq!(pts.len(), 5);
        for p in &pts {
            assert_eq!(p.as_array(), [1000.0, 1.0, 0.01, 0.2]);
        }
    }

    #[test]
    fn uniform_sampling_respects_bounds_and_centers() {
        let space = DesignSpace::default();
        let pts = sample_designs(&space, 10_000, 17, SamplingMethod::Uniform).unwrap();
        assert_eq!(pts.len(), 10_000);
        let bounds = space.bounds();
        for (v, (lo, hi)) in bounds.iter().enumerate() {
            let vals: Vec<f64> = pts.iter().map(|p| p.as_array()[v]).collect();
            let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!(min >= *lo && max <= *hi);
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let mid = 0.5 * (lo + hi);
            // Rejection of thickness >= radius barely skews these bounds.
            assert!(
                (mean - mid).abs() / (hi - lo) < 0.02,
                "variable {v}: mean {mean} vs midpoint {mid}"
            );
        }
        for p in &pts {
            assert!(p.thickness < p.radius);
        }
    }

    #[test]
    fn lhs_occupies_every_stratum_exactly_once() {
        // Bounds chosen so thickness < radius always holds and no fallback
        // redraw can disturb the stratification.
        let space = DesignSpace {
            thickness: (0.002, 0.04),
            radius: (0.05, 0.5),
            ..DesignSpace::default()
        };
        let n = 100;
        let pts = sample_designs(&space, n, 5, SamplingMethod::LatinHypercube).unwrap();
        for (v, (lo, hi)) in space.bounds().iter().enumerate() {
            let mut seen = vec![false; n];
            for p in &pts {
                let x = p.as_array()[v];
                let stratum = (((x - lo) / (hi - lo) * n as f64) as usize).min(n - 1);
                assert!(!seen[stratum], "variable {v}: stratum {stratum} hit twice");
                seen[stratum] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let space = DesignSpace::default();
        for method in [SamplingMethod::Uniform, SamplingMethod::LatinHypercube] {
            let a = sample_designs(&space, 200, 11, method).unwrap();
            let b = sample_designs(&space, 200, 11, method).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn infeasible_bounds_are_a_config_error() {
        // radius below thickness everywhere: every draw rejected
        let space = DesignSpace {
            thickness: (0.2, 0.3),
            radius: (0.05, 0.1),
            ..DesignSpace::default()
        };
        let err = sample_designs(&space, 10, 1, SamplingMethod::Uniform).unwrap_err();
        assert!(matches!(err, Error::Config(_)), "got {err:?}");
    }

    #[test]
    fn generate_dataset_single_point_hand_value() {
        let d = DesignPoint::new(1000.0, 1.0, 0.01, 0.2).unwrap();
        let ds = generate_dataset(&[d]).unwrap();
        assert_eq!(ds.len(), 1);
        assert!((ds.targets[0] - 1.786_277_321_313_53e8).abs() / 1.786e8 < 1e-9);
        assert_eq!(ds.provenance, Provenance::OracleGenerated);
    }

    #[test]
    fn generate_dataset_empty() {
        let ds = generate_dataset(&[]).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn split_sizes_and_union() {
        let data = toy_dataset(123);
        let (train, test) = train_test_split(&data, 100, 7).unwrap();
        assert_eq!(train.len(), 100);
        assert_eq!(test.len(), 23);
        // multiset union equals the original
        let mut merged: Vec<(u64, u64)> = train
            .targets
            .iter()
            .chain(&test.targets)
            .zip(train.points.iter().chain(&test.points))
            .map(|(y, p)| (y.to_bits(), p.depth.to_bits()))
            .collect();
        let mut original: Vec<(u64, u64)> = data
            .targets
            .iter()
            .zip(&data.points)
            .map(|(y, p)| (y.to_bits(), p.depth.to_bits()))
            .collect();
        merged.sort_unstable();
        original.sort_unstable();
        assert_eq!(merged, original);
    }

    #[test]
    fn split_is_deterministic_and_supports_single_test_row() {
        let data = toy_dataset(20);
        let (a1, b1) = train_test_split(&data, 19, 5).unwrap();
        let (a2, b2) = train_test_split(&data, 19, 5).unwrap();
        assert_eq!(b1.len(), 1);
        assert_eq!(a1, a2);
        assert_eq!(b1, b2);
        assert!(train_test_split(&data, 0, 5).is_err());
        assert!(train_test_split(&data, 20, 5).is_err());
    }

    #[test]
    fn full_scale_split_arithmetic() {
        let (train, test) = split_indices(11_311, 8000, 1).unwrap();
        assert_eq!(train.len(), 8000);
        assert_eq!(test.len(), 3311);
    }

    #[test]
    fn kfold_sizes() {
        let folds = kfold(8000, 5, 3).unwrap();
        for f in 0..5 {
            assert_eq!(folds.fold_indices(f).len(), 1600);
        }
        let folds = kfold(7, 3, 3).unwrap();
        let mut sizes: Vec<usize> = (0..3).map(|f| folds.fold_indices(f).len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 3]);
        assert!(kfold(2, 3, 0).is_err());
        assert!(kfold(10, 1, 0).is_err());
    }

    #[test]
    fn scaler_corners_and_roundtrip() {
        let data = toy_dataset(50);
        let scaler = Scaler::fit(&data).unwrap();
        let lo = DesignPoint {
            depth: scaler.input_min[0],
            length: scaler.input_min[1],
            thickness: scaler.input_min[2],
            radius: scaler.input_min[3],
        };
        let hi = DesignPoint {
            depth: scaler.input_max[0],
            length: scaler.input_max[1],
            thickness: scaler.input_max[2],
            radius: scaler.input_max[3],
        };
        assert_eq!(scaler.apply(&lo), [0.0, 0.0, 0.0, 0.0]);
        assert_eq!(scaler.apply(&hi), [1.0, 1.0, 1.0, 1.0]);

        let mut rng = seeds::rng_from(4);
        for _ in 0..1000 {
            let y = 1e6 + 1e9 * rng.random::<f64>();
            let back = scaler.invert_target(scaler.apply_target(y));
            assert!((back - y).abs() / y.abs() < 1e-12);
        }
    }

    #[test]
    fn scaler_rejects_constant_variable() {
        let d = DesignPoint::new(1000.0, 1.0, 0.01, 0.2).unwrap();
        let ds = generate_dataset(&[d, d]).unwrap();
        let err = Scaler::fit(&ds).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("depth"), "should name a variable: {msg}");
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let data = toy_dataset(40);
        write_csv(&data, &path).unwrap();
        let back = read_csv(&path, None).unwrap();
        assert_eq!(back.points, data.points);
        assert_eq!(
            back.targets
                .iter()
                .map(|y| y.to_bits())
                .collect::<Vec<_>>(),
            data.targets.iter().map(|y| y.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!(back.provenance, Provenance::Imported);

        // header only
        std::fs::write(&path, "depth_m,length_m,thickness_m,radius_m,max_vm_pa\n").unwrap();
        assert!(read_csv(&path, None).unwrap().is_empty());

        // missing column
        std::fs::write(&path, "depth_m,length_m,thickness_m,max_vm_pa\n").unwrap();
        let err = read_csv(&path, None).unwrap_err();
        assert!(err.to_string().contains("radius_m"), "{err}");

        // non-numeric cell, row-indexed
        std::fs::write(
            &path,
            "depth_m,length_m,thickness_m,radius_m,max_vm_pa\n1000,1,0.01,0.2,1e8\n1000,1,oops,0.2,1e8\n",
        )
        .unwrap();
        let err = read_csv(&path, None).unwrap_err();
        assert!(err.to_string().contains(":2"), "{err}");

        // invariant violation, row-indexed
        std::fs::write(
            &path,
            "depth_m,length_m,thickness_m,radius_m,max_vm_pa\n1000,1,0.25,0.2,1e8\n",
        )
        .unwrap();
        let err = read_csv(&path, None).unwrap_err();
        assert!(err.to_string().contains(":1"), "{err}");
    }

    #[test]
    fn csv_column_map_with_unit_conversion() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("foreign.csv");
        // depth in km, stress in MPa, shuffled column order
        std::fs::write(
            &path,
            "stress_mpa,len,th,r,depth_km\n178.6,1.0,0.01,0.2,1.0\n",
        )
        .unwrap();
        let map = ColumnMap {
            depth: ColumnSpec {
                column: "depth_km".into(),
                scale: 1000.0,
            },
            length: ColumnSpec {
                column: "len".into(),
                scale: 1.0,
            },
            thickness: ColumnSpec {
                column: "th".into(),
                scale: 1.0,
            },
            radius: ColumnSpec {
                column: "r".into(),
                scale: 1.0,
            },
            target: ColumnSpec {
                column: "stress_mpa".into(),
                scale: 1e6,
            },
        };
        let ds = read_csv(&path, Some(&map)).unwrap();
        assert_eq!(ds.points[0].depth, 1000.0);
        assert_eq!(ds.targets[0], 178.6e6);
    }

    proptest! {
        #[test]
        fn kfold_partitions(n in 5usize..400, k in 2usize..6, seed in 0u64..1000) {
            prop_assume!(n >= k);
            let folds = kfold(n, k, seed).unwrap();
            prop_assert_eq!(folds.membership.len(), n);
            let mut covered = vec![false; n];
            let mut sizes = vec![0usize; k];
            for (f, size) in sizes.iter_mut().enumerate() {
                for i in folds.fold_indices(f) {
                    prop_assert!(!covered[i]);
                    covered[i] = true;
                    *size += 1;
                }
            }
            prop_assert!(covered.iter().all(|&c| c));
            let max = sizes.iter().max().unwrap();
            let min = sizes.iter().min().unwrap();
            prop_assert!(max - min <= 1);
        }

        #[test]
        fn csv_f64_roundtrip_is_bit_exact(
            depth in 0.0f64..6000.0,
            length in 0.001f64..5.0,
            radius in 0.01f64..1.0,
            frac in 0.001f64..0.999,
            target in 1.0f64..1e12,
        ) {
            let thickness = radius * frac;
            let d = DesignPoint::new(depth, length, thickness, radius).unwrap();
            let ds = Dataset {
                points: vec![d],
                targets: vec![target],
                provenance: Provenance::OracleGenerated,
            };
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("rt.csv");
            write_csv(&ds, &path).unwrap();
            let back = read_csv(&path, None).unwrap();
            prop_assert_eq!(back.points[0].depth.to_bits(), depth.to_bits());
            prop_assert_eq!(back.points[0].length.to_bits(), length.to_bits());
            prop_assert_eq!(back.points[0].thickness.to_bits(), thickness.to_bits());
            prop_assert_eq!(back.points[0].radius.to_bits(), radius.to_bits());
            prop_assert_eq!(back.targets[0].to_bits(), target.to_bits());
        }

        #[test]
        fn scaler_never_clamps(scale in 1.5f64..4.0) {
            let data = toy_dataset(30);
            let scaler = Scaler::fit(&data).unwrap();
            // a point beyond the training max on every variable
            let out = DesignPoint {
                depth: scaler.input_max[0] * scale,
                length: scaler.input_max[1] * scale,
                thickness: scaler.input_max[2] * scale,
                radius: scaler.input_max[3] * scale * 10.0,
            };
            let z = scaler.apply(&out);
            for v in z {
                prop_assert!(v > 1.0);
            }
        }
    }
}
