use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Standardize,
    Range,
    LogThenStandardize,
}

/// Affine map `v ↦ (v - shift) / scale`, preceded by `ln` for
/// [`TransformKind::LogThenStandardize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub kind: TransformKind,
    pub shift: f64,
    pub scale: f64,
}

impl TransformRecord {
    pub fn identity() -> Self {
        TransformRecord {
            kind: TransformKind::Standardize,
            shift: 0.0,
            scale: 1.0,
        }
    }

    /// Fits the record to `values`. Zero spread falls back to `scale = 1`.
    pub fn fit(kind: TransformKind, values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("cannot fit a transform to no values"));
        }
        let mapped: Vec<f64> = match kind {
            TransformKind::LogThenStandardize => values.iter().map(|v| v.ln()).collect(),
            _ => values.to_vec(),
        };
        let (shift, scale) = match kind {
            TransformKind::Range => {
                let lo = mapped.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = mapped.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi - lo)
            }
            _ => {
                let (mean, std) = mean_std(&mapped);
                (mean, std)
            }
        };
        let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
        Ok(TransformRecord { kind, shift, scale })
    }

    pub fn apply(&self, v: f64) -> f64 {
        let v = match self.kind {
            TransformKind::LogThenStandardize => v.ln(),
            _ => v,
        };
        (v - self.shift) / self.scale
    }

    pub fn invert(&self, v: f64) -> f64 {
        let v = v * self.scale + self.shift;
        match self.kind {
            TransformKind::LogThenStandardize => v.exp(),
            _ => v,
        }
    }

    pub fn is_log(&self) -> bool {
        self.kind == TransformKind::LogThenStandardize
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Everything needed to map physical inputs into model space and model
/// outputs back to physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformPipeline {
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub features: Vec<TransformRecord>,
    pub target: TransformRecord,
}

impl TransformPipeline {
    pub fn identity(feature_names: Vec<String>, target_name: String) -> Self {
        let features = vec![TransformRecord::identity(); feature_names.len()];
        TransformPipeline {
            feature_names,
            target_name,
            features,
            target: TransformRecord::identity(),
        }
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn transform_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(x.iter().zip(&self.features).map(|(v, r)| r.apply(*v)).collect())
    }

    pub fn untransform_point(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.features).map(|(v, r)| r.invert(*v)).collect()
    }

    pub fn transform_target(&self, y: f64) -> f64 {
        self.target.apply(y)
    }

    pub fn invert_target(&self, y: f64) -> f64 {
        self.target.invert(y)
    }

    /// Checks that query columns line up with the columns this pipeline was
    /// fitted on.
    pub fn check_feature_names(&self, names: &[String]) -> Result<()> {
        if names != self.feature_names.as_slice() {
            return Err(Error::Format(format!(
                "feature columns {:?} do not match the model's {:?}",
                names, self.feature_names
            )));
        }
        Ok(())
    }
}
