use crate::error::{Error, Result};
use crate::mesh::Mesh;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub const DEFAULT_THRESHOLD: f64 = 0.3;
pub const DEFAULT_SUPPRESSION_DROP: f64 = 0.01;

/// How intensities are read off the latent field above the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityVariant {
    /// Source intensity equals the field value phi(x) > c.
    Weighted,
    /// Every active node carries intensity 1.
    Constant,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThresholdSpec {
    pub threshold: f64,
    pub variant: IntensityVariant,
    /// After a removal the field at that node is clamped to
    /// threshold - suppression_drop.
    pub suppression_drop: f64,
}

impl Default for ThresholdSpec {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            variant: IntensityVariant::Weighted,
            suppression_drop: DEFAULT_SUPPRESSION_DROP,
        }
    }
}

impl ThresholdSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::Config(format!(
                "threshold must be positive, got {}",
                self.threshold
            )));
        }
        if !(self.suppression_drop > 0.0) {
            return Err(Error::Config(format!(
                "suppression drop must be positive, got {}",
                self.suppression_drop
            )));
        }
        Ok(())
    }
}

/// One recovered or true source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSource {
    pub x: f64,
    pub y: f64,
    pub intensity: f64,
}

/// Node-weight vector of the thresholded field: strict inequality, zero
/// weight below or at the threshold.
pub fn threshold_weights(phi: &DVector<f64>, spec: &ThresholdSpec) -> DVector<f64> {
    DVector::from_fn(phi.len(), |i, _| {
        let v = phi[i];
        if v > spec.threshold {
            match spec.variant {
                IntensityVariant::Weighted => v,
                IntensityVariant::Constant => 1.0,
            }
        } else {
            0.0
        }
    })
}

/// Indices with phi strictly above the threshold, ascending.
pub fn active_nodes(phi: &DVector<f64>, threshold: f64) -> Vec<usize> {
    (0..phi.len()).filter(|&i| phi[i] > threshold).collect()
}

/// Point-source view of a node-weight vector, ordered by node index.
pub fn sources_from_weights(weights: &DVector<f64>, mesh: &Mesh) -> Vec<PointSource> {
    (0..weights.len())
        .filter(|&k| weights[k] != 0.0)
        .map(|k| {
            let p = mesh.node(k);
            PointSource {
                x: p[0],
                y: p[1],
                intensity: weights[k],
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuppressOutcome {
    Applied,
    /// The node was already at or below the threshold; the field is
    /// unchanged and the caller may want to log a warning.
    AlreadyInactive,
}

/// Clamps one node of the field below the threshold so that the
/// thresholded set no longer contains it; all other entries untouched.
pub fn suppress_node(phi: &mut DVector<f64>, node: usize, spec: &ThresholdSpec) -> SuppressOutcome {
    if phi[node] > spec.threshold {
        phi[node] = spec.threshold - spec.suppression_drop;
        SuppressOutcome::Applied
    } else {
        SuppressOutcome::AlreadyInactive
    }
}
