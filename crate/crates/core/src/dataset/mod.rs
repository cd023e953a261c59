//! Tabular data, preprocessing, and design-of-experiments sampling.

mod sobol;
mod transform;

use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{BoundExpr, Expr};
use crate::rng;

pub use sobol::{sobol_unit, Sobol, MAX_DIM as SOBOL_MAX_DIM};
pub use transform::{mean_std, TransformKind, TransformPipeline, TransformRecord};

/// A feature bound: a constant, or an expression over features listed
/// earlier in the same spec list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Bound {
    Fixed(f64),
    Expr(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub lower: Bound,
    pub upper: Bound,
    #[serde(default)]
    pub units: String,
}

impl FeatureSpec {
    pub fn fixed(name: &str, lower: f64, upper: f64, units: &str) -> Result<Self> {
        if !(lower < upper) {
            return Err(Error::InvalidArgument(format!(
                "feature `{name}`: lower bound {lower} must be below upper bound {upper}"
            )));
        }
        Ok(FeatureSpec {
            name: name.into(),
            lower: Bound::Fixed(lower),
            upper: Bound::Fixed(upper),
            units: units.into(),
        })
    }
}

/// The six environmental inputs of an offshore turbine load study, with
/// turbulence-intensity and shear-exponent bounds that depend on wind speed.
/// Rotor radius 99 m, hub height 119 m, and cut-out speed 25 m/s enter the
/// shear bounds.
pub fn environmental_features() -> Vec<FeatureSpec> {
    let expr = |s: &str| Bound::Expr(s.to_string());
    vec![
        FeatureSpec {
            name: "u".into(),
            lower: Bound::Fixed(4.0),
            upper: Bound::Fixed(25.0),
            units: "m/s".into(),
        },
        FeatureSpec {
            name: "TI".into(),
            lower: Bound::Fixed(2.5),
            upper: expr("18 / u * (6.8 + 0.75 * u + 3 * pow(10 / u, 2))"),
            units: "%".into(),
        },
        FeatureSpec {
            name: "alpha".into(),
            lower: expr("0.15 - 0.23 * (25 / u) * (1 - pow(0.4 * log(99 / 119), 2))"),
            upper: expr("0.22 + 0.4 * (99 / 119) * (25 / u)"),
            units: "-".into(),
        },
        FeatureSpec {
            name: "Hs".into(),
            lower: Bound::Fixed(0.0),
            upper: Bound::Fixed(6.0),
            units: "m".into(),
        },
        FeatureSpec {
            name: "Tp".into(),
            lower: Bound::Fixed(1.0),
            upper: Bound::Fixed(21.0),
            units: "s".into(),
        },
        FeatureSpec {
            name: "Wdir".into(),
            lower: Bound::Fixed(-180.0),
            upper: Bound::Fixed(180.0),
            units: "deg".into(),
        },
    ]
}

#[derive(Debug, Clone)]
enum CompiledBound {
    Fixed(f64),
    Expr(BoundExpr),
}

impl CompiledBound {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            CompiledBound::Fixed(v) => *v,
            CompiledBound::Expr(e) => e.eval(x),
        }
    }
}

/// Feature specs with bound expressions compiled, able to resolve the box
/// for each coordinate given the coordinates before it.
#[derive(Debug, Clone)]
pub struct FeatureBox {
    names: Vec<String>,
    bounds: Vec<(CompiledBound, CompiledBound)>,
}

impl FeatureBox {
    pub fn new(specs: &[FeatureSpec]) -> Result<Self> {
        let names: Vec<String> = specs.iter().map(|s| s.name.clone()).collect();
        let mut bounds = Vec::with_capacity(specs.len());
        for (j, spec) in specs.iter().enumerate() {
            let compile = |b: &Bound| -> Result<CompiledBound> {
                match b {
                    Bound::Fixed(v) => Ok(CompiledBound::Fixed(*v)),
                    Bound::Expr(src) => {
                        let e = Expr::parse(src)?;
                        if let Some(v) = e.variables().iter().find(|v| !names[..j].contains(v)) {
                            return Err(Error::Expression(format!(
                                "bound of `{}` refers to `{v}`, which is not an earlier feature",
                                spec.name
                            )));
                        }
                        Ok(CompiledBound::Expr(e.bind(&names)?))
                    }
                }
            };
            bounds.push((compile(&spec.lower)?, compile(&spec.upper)?));
        }
        Ok(FeatureBox { names, bounds })
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Bounds of coordinate `j`; `x` must hold valid values for all
    /// coordinates before `j` (later entries are ignored).
    pub fn bounds(&self, j: usize, x: &[f64]) -> (f64, f64) {
        let (lo, hi) = &self.bounds[j];
        (lo.eval(x), hi.eval(x))
    }

    /// Maps a point of the unit cube into the box, coordinate by coordinate.
    pub fn map_unit(&self, unit: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.dim()];
        for j in 0..self.dim() {
            let (lo, hi) = self.bounds(j, &x);
            if !(lo < hi) {
                return Err(Error::InvalidArgument(format!(
                    "feature `{}` has empty range [{lo}, {hi}] at {:?}",
                    self.names[j],
                    &x[..j]
                )));
            }
            x[j] = lo + unit[j] * (hi - lo);
        }
        Ok(x)
    }

    pub fn check_contains(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        for j in 0..self.dim() {
            let (lo, hi) = self.bounds(j, x);
            let tol = 1e-9 * (hi - lo).abs().max(1.0);
            if !(x[j] >= lo - tol && x[j] <= hi + tol) {
                return Err(Error::OutOfBounds {
                    feature: self.names[j].clone(),
                    point: x.to_vec(),
                    lower: lo,
                    upper: hi,
                });
            }
        }
        Ok(())
    }
}

/// First `n` Sobol points after skipping `skip`, mapped into the feature box.
pub fn sobol_design(specs: &[FeatureSpec], n: usize, skip: usize) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("design size must be at least 1".into()));
    }
    let fbox = FeatureBox::new(specs)?;
    let unit = sobol_unit(fbox.dim(), n, skip)?;
    map_design(&fbox, &unit)
}

/// `n` independent uniform points in the feature box.
pub fn random_design(specs: &[FeatureSpec], n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("design size must be at least 1".into()));
    }
    let fbox = FeatureBox::new(specs)?;
    let mut r = rng::rng_from_key(rng::derive_key(&[seed, rng::hash_str("design")]));
    let unit = DMatrix::from_fn(n, fbox.dim(), |_, _| r.gen::<f64>());
    map_design(&fbox, &unit)
}

fn map_design(fbox: &FeatureBox, unit: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(unit.nrows(), unit.ncols());
    for i in 0..unit.nrows() {
        let u: Vec<f64> = unit.row(i).iter().copied().collect();
        let x = fbox.map_unit(&u)?;
        for (j, v) in x.into_iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetTransform {
    Identity,
    Log,
}

/// Design matrix plus one response column.
#[derive(Debug, Clone)]
pub struct DataSet {
    features: DMatrix<f64>,
    target: DVector<f64>,
    feature_specs: Vec<FeatureSpec>,
    target_name: String,
    target_transform: TargetTransform,
    scaling: Option<TransformPipeline>,
}

impl DataSet {
    /// Builds a raw (untransformed) data set.
    pub fn new(
        features: DMatrix<f64>,
        target: DVector<f64>,
        feature_specs: Vec<FeatureSpec>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        if features.nrows() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: features.nrows(),
                actual: target.len(),
            });
        }
        if features.ncols() != feature_specs.len() {
            return Err(Error::DimensionMismatch {
                expected: features.ncols(),
                actual: feature_specs.len(),
            });
        }
        if let Some(i) = (0..features.nrows())
            .find(|&i| !target[i].is_finite() || features.row(i).iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidArgument(format!(
                "row {} contains a non-finite value",
                i + 1
            )));
        }
        Ok(DataSet {
            features,
            target,
            feature_specs,
            target_name: target_name.into(),
            target_transform: TargetTransform::Identity,
            scaling: None,
        })
    }

    /// Data already in model units, with feature specs derived from the data.
    pub fn from_scaled(features: DMatrix<f64>, target: DVector<f64>) -> Result<Self> {
        let names: Vec<String> = (0..features.ncols()).map(|j| format!("x{j}")).collect();
        let specs = specs_from_data(&names, &features);
        let mut d = DataSet::new(features, target, specs, "y")?;
        d.scaling = Some(TransformPipeline::identity(names, "y".into()));
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn target(&self) -> &DVector<f64> {
        &self.target
    }

    pub fn feature_specs(&self) -> &[FeatureSpec] {
        &self.feature_specs
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.feature_specs.iter().map(|s| s.name.clone()).collect()
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn target_transform(&self) -> TargetTransform {
        self.target_transform
    }

    /// Transform pipeline, when this data set is in model units.
    pub fn scaling(&self) -> Option<&TransformPipeline> {
        self.scaling.as_ref()
    }

    /// Pipeline for model units, identity when the data set was never
    /// transformed.
    pub fn pipeline_or_identity(&self) -> TransformPipeline {
        self.scaling
            .clone()
            .unwrap_or_else(|| TransformPipeline::identity(self.feature_names(), self.target_name.clone()))
    }

    /// Row subset in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> DataSet {
        let features = DMatrix::from_fn(rows.len(), self.dim(), |i, j| self.features[(rows[i], j)]);
        let target = DVector::from_iterator(rows.len(), rows.iter().map(|&i| self.target[i]));
        DataSet {
            features,
            target,
            ..self.clone()
        }
    }

    /// The first `n` rows (or all, when fewer).
    pub fn head(&self, n: usize) -> DataSet {
        let rows: Vec<usize> = (0..n.min(self.len())).collect();
        self.select_rows(&rows)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }
}

fn specs_from_data(names: &[String], x: &DMatrix<f64>) -> Vec<FeatureSpec> {
    names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let col = x.column(j);
            let (mut lo, mut hi) = if col.is_empty() {
                (0.0, 1.0)
            } else {
                (col.min(), col.max())
            };
            if !(lo < hi) {
                lo -= 0.5;
                hi += 0.5;
            }
            FeatureSpec {
                name: name.clone(),
                lower: Bound::Fixed(lo),
                upper: Bound::Fixed(hi),
                units: String::new(),
            }
        })
        .collect()
}

/// Reads a header-first CSV. Every column other than `target_column` becomes a
/// feature, in file order. Row numbers in errors count data rows from 1.
pub fn load_csv(path: impl AsRef<Path>, target_column: &str) -> Result<DataSet> {
    let file = File::open(path.as_ref())?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_idx = headers
        .iter()
        .position(|h| h == target_column)
        .ok_or_else(|| Error::MissingColumn(target_column.to_string()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != target_idx)
        .map(|(_, h)| h.clone())
        .collect();
    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row,
                column: headers[c].clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: headers[c].clone(),
                    message: format!("`{cell}` is not finite"),
                });
            }
            if c == target_idx {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let n = ys.len();
    let features = DMatrix::from_row_slice(n, feature_names.len(), &xs);
    let specs = specs_from_data(&feature_names, &features);
    DataSet::new(features, DVector::from_vec(ys), specs, target_column)
}

/// Serializes features then target as CSV text; numbers use the shortest
/// representation that reads back exactly.
pub fn csv_string(d: &DataSet) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = d.feature_names();
    header.push(d.target_name.clone());
    w.write_record(&header)?;
    for i in 0..d.len() {
        let mut rec: Vec<String> = d.features.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(d.target[i].to_string());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn write_csv(d: &DataSet, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path, csv_string(d)?.as_bytes())
}

/// Statistics used by the z-score filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZScoreStats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone)]
pub struct ZScoreOutcome {
    pub data: DataSet,
    /// Indices into the input data set, ascending.
    pub removed: Vec<usize>,
    pub stats: ZScoreStats,
    /// Set when the target had zero spread and nothing could be scored.
    pub zero_variance: bool,
}

/// Drops rows whose target lies more than `threshold` population standard
/// deviations from the mean. Statistics are computed once, on the input.
pub fn zscore_filter(d: &DataSet, threshold: f64) -> Result<ZScoreOutcome> {
    if d.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "z-score filtering needs at least 3 rows, got {}",
            d.len()
        )));
    }
    let (mean, std) = mean_std(d.target.as_slice());
    zscore_filter_with(d, threshold, ZScoreStats { mean, std })
}

/// Z-score filter against externally supplied statistics.
pub fn zscore_filter_with(d: &DataSet, threshold: f64, stats: ZScoreStats) -> Result<ZScoreOutcome> {
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "z-score threshold must be positive, got {threshold}"
        )));
    }
    if stats.std <= 0.0 {
        log::warn!("target has zero variance; z-score filter removes nothing");
        return Ok(ZScoreOutcome {
            data: d.clone(),
            removed: Vec::new(),
            stats,
            zero_variance: true,
        });
    }
    let (keep, removed): (Vec<usize>, Vec<usize>) =
        (0..d.len()).partition(|&i| (d.target[i] - stats.mean).abs() / stats.std <= threshold);
    Ok(ZScoreOutcome {
        data: d.select_rows(&keep),
        removed,
        stats,
        zero_variance: false,
    })
}

/// Feature scaling convention; log targets are always log-then-standardize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMode {
    #[default]
    Standardize,
    Range,
}

/// Fits feature and target transforms on a raw data set and applies them.
pub fn fit_transforms(d: &DataSet, target_positive: bool) -> Result<(DataSet, TransformPipeline)> {
    fit_transforms_with(d, target_positive, ScalingMode::Standardize)
}

pub fn fit_transforms_with(
    d: &DataSet,
    target_positive: bool,
    mode: ScalingMode,
) -> Result<(DataSet, TransformPipeline)> {
    if d.is_empty() {
        return Err(Error::Empty("cannot fit transforms on an empty data set"));
    }
    if target_positive {
        let bad: Vec<usize> = (0..d.len()).filter(|&i| d.target[i] <= 0.0).map(|i| i + 1).collect();
        if !bad.is_empty() {
            return Err(Error::NonPositiveTarget { rows: bad });
        }
    }
    let affine = match mode {
        ScalingMode::Standardize => TransformKind::Standardize,
        ScalingMode::Range => TransformKind::Range,
    };
    let features: Vec<TransformRecord> = (0..d.dim())
        .map(|j| {
            let col: Vec<f64> = d.features.column(j).iter().copied().collect();
            TransformRecord::fit(affine, &col)
        })
        .collect::<Result<_>>()?;
    let target_kind = if target_positive {
        TransformKind::LogThenStandardize
    } else {
        affine
    };
    let target = TransformRecord::fit(target_kind, d.target.as_slice())?;
    let pipeline = TransformPipeline {
        feature_names: d.feature_names(),
        target_name: d.target_name.clone(),
        features,
        target,
    };
    let x = DMatrix::from_fn(d.len(), d.dim(), |i, j| pipeline.features[j].apply(d.features[(i, j)]));
    let y = d.target.map(|v| target.apply(v));
    let out = DataSet {
        features: x,
        target: y,
        feature_specs: d.feature_specs.clone(),
        target_name: d.target_name.clone(),
        target_transform: if target_positive {
            TargetTransform::Log
        } else {
            TargetTransform::Identity
        },
        scaling: Some(pipeline.clone()),
    };
    Ok((out, pipeline))
}

/// Maps a transformed data set back to physical units.
pub fn inverse_transform(d: &DataSet) -> DataSet {
    let Some(p) = d.scaling.as_ref() else {
        return d.clone();
    };
    let x = DMatrix::from_fn(d.len(), d.dim(), |i, j| p.features[j].invert(d.features[(i, j)]));
    let y = d.target.map(|v| p.target.invert(v));
    DataSet {
        features: x,
        target: y,
        feature_specs: d.feature_specs.clone(),
        target_name: d.target_name.clone(),
        target_transform: TargetTransform::Identity,
        scaling: None,
    }
}
