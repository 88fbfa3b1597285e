use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RvgpError};
use crate::geometry::GaugeFrameSet;
use crate::spectral::{positional_encodings, Spectrum};

/// Matérn smoothness: finite `nu`, or the squared-exponential limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SmoothnessRepr", into = "SmoothnessRepr")]
pub enum Smoothness {
    Finite(f64),
    Infinite,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SmoothnessRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<SmoothnessRepr> for Smoothness {
    type Error = String;

    fn try_from(r: SmoothnessRepr) -> Result<Self, String> {
        match r {
            SmoothnessRepr::Number(v) => Ok(Smoothness::Finite(v)),
            SmoothnessRepr::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => {
                Ok(Smoothness::Infinite)
            }
            SmoothnessRepr::Text(s) => Err(format!("unrecognized smoothness {s:?}")),
        }
    }
}

impl From<Smoothness> for SmoothnessRepr {
    fn from(s: Smoothness) -> Self {
        match s {
            Smoothness::Finite(v) => SmoothnessRepr::Number(v),
            Smoothness::Infinite => SmoothnessRepr::Text("inf".into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaternHyperparams {
    /// Amplitude.
    pub sigma: f64,
    /// Lengthscale.
    pub kappa: f64,
    pub nu: Smoothness,
    /// Observation noise standard deviation.
    pub noise: f64,
}

impl MaternHyperparams {
    /// Starting point: `sigma = 1`, `kappa = 5 * mean edge length`,
    /// `nu = 3/2`, `noise = 1e-3`.
    pub fn initial(mean_edge_length: f64) -> Self {
        Self {
            sigma: 1.0,
            kappa: 5.0 * mean_edge_length,
            nu: Smoothness::Finite(1.5),
            noise: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(RvgpError::InvalidInput(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(RvgpError::InvalidInput(format!("kappa must be > 0, got {}", self.kappa)));
        }
        if let Smoothness::Finite(nu) = self.nu {
            if !(nu > 0.0 && nu.is_finite()) {
                return Err(RvgpError::InvalidInput(format!("nu must be > 0, got {nu}")));
            }
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(RvgpError::InvalidInput(format!("noise must be >= 0, got {}", self.noise)));
        }
        Ok(())
    }
}

/// Per-eigenvalue weights `Phi(lambda)^-2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFilter {
    pub weights: DVector<f64>,
}

/// Finite `nu`: `(2 nu / kappa^2 + lambda)^-nu`; infinite: `exp(-kappa^2 lambda / 2)`.
/// Eigenvalues down to `-1e-8` are clamped to zero.
pub fn spectral_filter(eigenvalues: &DVector<f64>, hyper: &MaternHyperparams) -> Result<SpectralFilter> {
    if !(hyper.kappa > 0.0) {
        return Err(RvgpError::InvalidInput(format!("kappa must be > 0, got {}", hyper.kappa)));
    }
    if let Smoothness::Finite(nu) = hyper.nu {
        if !(nu > 0.0) {
            return Err(RvgpError::InvalidInput(format!("nu must be > 0, got {nu}")));
        }
    }
    if let Some(bad) = eigenvalues.iter().find(|&&l| l < -1e-8 || !l.is_finite()) {
        return Err(RvgpError::InvalidInput(format!(
            "eigenvalue {bad} is not (numerically) nonnegative"
        )));
    }
    let kappa2 = hyper.kappa * hyper.kappa;
    let weights = eigenvalues.map(|l| {
        let l = l.max(0.0);
        match hyper.nu {
            Smoothness::Finite(nu) => (2.0 * nu / kappa2 + l).powf(-nu),
            Smoothness::Infinite => (-kappa2 * l / 2.0).exp(),
        }
    });
    Ok(SpectralFilter { weights })
}

/// `sigma^2 c P diag(filter) Q^T`.
pub fn kernel_block(
    p: &DMatrix<f64>,
    q: &DMatrix<f64>,
    filter: &SpectralFilter,
    sigma: f64,
    c_norm: f64,
) -> Result<DMatrix<f64>> {
    let k = filter.weights.len();
    if p.ncols() != k || q.ncols() != k {
        return Err(RvgpError::DimensionMismatch(format!(
            "encodings have {} and {} columns, filter has {k}",
            p.ncols(),
            q.ncols()
        )));
    }
    let mut scaled = p.clone();
    for (c, w) in filter.weights.iter().enumerate() {
        scaled.column_mut(c).scale_mut(*w);
    }
    Ok(scaled * q.transpose() * (sigma * sigma * c_norm))
}

/// Positional encodings of every node plus what the kernel needs from the
/// spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    encodings: Vec<DMatrix<f64>>,
    eigenvalues: DVector<f64>,
    fiber_dim: usize,
    frames: Option<GaugeFrameSet>,
}

impl FeatureSet {
    /// Tangent-bundle features `P_i = T_i (U_c)_i`, each `d x k`.
    pub fn from_connection(spectrum: &Spectrum, frames: &GaugeFrameSet) -> Result<Self> {
        Ok(Self {
            encodings: positional_encodings(spectrum, frames)?,
            eigenvalues: spectrum.eigenvalues.clone(),
            fiber_dim: frames.manifold_dim(),
            frames: Some(frames.clone()),
        })
    }

    /// Scalar Laplacian-eigenmap features `sqrt(n) (u_i1, ..., u_ik)`, each `1 x k`.
    pub fn from_scalar(spectrum: &Spectrum) -> Result<Self> {
        if spectrum.fiber_dim != 1 {
            return Err(RvgpError::DimensionMismatch(format!(
                "scalar features need a scalar spectrum, got fiber dimension {}",
                spectrum.fiber_dim
            )));
        }
        let n = spectrum.dim();
        let scale = (n as f64).sqrt();
        let encodings = (0..n)
            .map(|i| spectrum.eigenvectors.rows(i, 1) * scale)
            .collect();
        Ok(Self {
            encodings,
            eigenvalues: spectrum.eigenvalues.clone(),
            fiber_dim: 1,
            frames: None,
        })
    }

    /// Features from explicit parts; used when loading persisted models.
    pub fn from_parts(
        encodings: Vec<DMatrix<f64>>,
        eigenvalues: DVector<f64>,
        fiber_dim: usize,
        frames: Option<GaugeFrameSet>,
    ) -> Result<Self> {
        let k = eigenvalues.len();
        let rows = encodings.first().map_or(0, DMatrix::nrows);
        if encodings.iter().any(|p| p.shape() != (rows, k)) {
            return Err(RvgpError::DimensionMismatch(format!(
                "every encoding must be {rows}x{k}"
            )));
        }
        if let Some(f) = &frames {
            if f.len() != encodings.len() || f.ambient_dim() != rows || f.manifold_dim() != fiber_dim {
                return Err(RvgpError::DimensionMismatch("frames do not match encodings".into()));
            }
        }
        Ok(Self {
            encodings,
            eigenvalues,
            fiber_dim,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.encodings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encodings.is_empty()
    }

    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Rows of each encoding: the ambient dimension, or 1 for scalar features.
    pub fn output_dim(&self) -> usize {
        self.encodings.first().map_or(0, DMatrix::nrows)
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn frames(&self) -> Option<&GaugeFrameSet> {
        self.frames.as_ref()
    }

    pub fn encoding(&self, i: usize) -> &DMatrix<f64> {
        &self.encodings[i]
    }

    pub fn encodings(&self) -> &[DMatrix<f64>] {
        &self.encodings
    }

    pub(crate) fn check_nodes(&self, nodes: &[usize]) -> Result<()> {
        if let Some(&bad) = nodes.iter().find(|&&i| i >= self.len()) {
            return Err(RvgpError::IndexOutOfRange {
                what: "encoded nodes",
                index: bad,
                len: self.len(),
            });
        }
        Ok(())
    }

    /// Basis in which inducing variables are expressed at node `i`: the
    /// tangent frame for bundle features, the identity otherwise.
    pub(crate) fn tangent_basis(&self, i: usize) -> DMatrix<f64> {
        match &self.frames {
            Some(f) => f.frame(i).clone(),
            None => DMatrix::identity(self.output_dim(), self.output_dim()),
        }
    }

    /// `c` such that the mean trace of diagonal prior blocks equals
    /// `sigma^2 m`.
    pub fn normalization(&self, filter: &SpectralFilter) -> f64 {
        let total: f64 = self
            .encodings
            .iter()
            .map(|p| {
                p.column_iter()
                    .zip(filter.weights.iter())
                    .map(|(col, w)| w * col.norm_squared())
                    .sum::<f64>()
            })
            .sum();
        (self.fiber_dim * self.len()) as f64 / total
    }

    /// Stacked `P_i diag(sqrt(filter))` for the given nodes, node-major rows.
    pub(crate) fn weighted_rows(&self, nodes: &[usize], filter: &SpectralFilter) -> DMatrix<f64> {
        let r = self.output_dim();
        let k = self.k();
        let mut out = DMatrix::zeros(nodes.len() * r, k);
        for (slot, &i) in nodes.iter().enumerate() {
            let p = &self.encodings[i];
            for c in 0..k {
                let w = filter.weights[c].sqrt();
                for a in 0..r {
                    out[(slot * r + a, c)] = p[(a, c)] * w;
                }
            }
        }
        out
    }
}
