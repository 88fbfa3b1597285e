use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::field::TangentField;
use super::heat::{vector_heat, HeatOptions, VectorHeat};
use crate::bundle::TangentBundle;
use crate::error::{Result, RvgpError};
use crate::geometry::{furthest_point_sample, squared_distance, FpsSample, PointCloud};

/// How many anchors carry random vectors before diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchors {
    Count(usize),
    /// Fraction of the nodes, rounded, at least one.
    Fraction(f64),
    /// Fewest furthest-point anchors whose spacing is at most this value.
    Spacing(f64),
}

impl Default for Anchors {
    fn default() -> Self {
        Anchors::Fraction(0.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldSpec {
    pub anchors: Anchors,
    pub tau: f64,
    pub heat: HeatOptions,
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self {
            anchors: Anchors::default(),
            tau: 100.0,
            heat: HeatOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentField {
    pub heat: VectorHeat,
    /// The projected anchor vectors before diffusion.
    pub initial: TangentField,
    pub anchors: Vec<usize>,
    pub spacing: f64,
}

impl ExperimentField {
    pub fn field(&self) -> &TangentField {
        &self.heat.field
    }
}

/// Random unit ambient vectors at furthest-point anchors, projected to the
/// tangent spaces and smoothed by the vector heat method.
pub fn generate_experiment_field(bundle: &TangentBundle, spec: &FieldSpec, seed: u64) -> Result<ExperimentField> {
    let sample = anchor_sample(&bundle.points, spec.anchors)?;
    let n = bundle.len();
    let d = bundle.points.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ambient = DMatrix::zeros(n, d);
    for &i in &sample.indices {
        let v = loop {
            let v = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let norm: f64 = v.norm();
            if norm > 1e-12 {
                break v / norm;
            }
        };
        ambient.row_mut(i).copy_from(&v.transpose());
    }
    let initial = TangentField::project(&bundle.frames, &ambient)?;
    let heat = vector_heat(&bundle.connection, &bundle.laplacian, &bundle.frames, &initial, spec.tau, &spec.heat)?;
    Ok(ExperimentField {
        heat,
        initial,
        anchors: sample.indices,
        spacing: sample.spacing,
    })
}

fn anchor_sample(points: &PointCloud, anchors: Anchors) -> Result<FpsSample> {
    let n = points.len();
    match anchors {
        Anchors::Count(c) => furthest_point_sample(points, c),
        Anchors::Fraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(RvgpError::InvalidInput(format!("anchor fraction must be in (0, 1], got {f}")));
            }
            furthest_point_sample(points, ((f * n as f64).round() as usize).clamp(1, n))
        }
        Anchors::Spacing(alpha) => {
            if !(alpha > 0.0) {
                return Err(RvgpError::InvalidInput(format!("anchor spacing must be > 0, got {alpha}")));
            }
            // spacing shrinks as anchors are added; bisect on the count
            let (mut lo, mut hi) = (2usize, n);
            if furthest_point_sample(points, hi)?.spacing > alpha {
                return furthest_point_sample(points, n);
            }
            while lo < hi {
                let mid = (lo + hi) / 2;
                if furthest_point_sample(points, mid)?.spacing <= alpha {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            furthest_point_sample(points, lo)
        }
    }
}

/// Seeded split of `0..n` into `(train, test)`, both ascending; the train
/// set has `round(fraction * n)` nodes.
pub fn random_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(RvgpError::InvalidInput(format!("train fraction must be in (0, 1], got {fraction}")));
    }
    let count = (fraction * n as f64).round() as usize;
    if count == 0 {
        return Err(RvgpError::InvalidInput(format!("train fraction {fraction} leaves no training nodes out of {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = order[..count].to_vec();
    let mut test = order[count..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// The `round(fraction * n)` nodes closest (Euclidean) to `center`, ascending.
pub fn mask_around(points: &PointCloud, center: usize, fraction: f64) -> Result<Vec<usize>> {
    let n = points.len();
    if center >= n {
        return Err(RvgpError::IndexOutOfRange {
            what: "mask center",
            index: center,
            len: n,
        });
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(RvgpError::InvalidInput(format!("mask fraction must be in (0, 1), got {fraction}")));
    }
    let count = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let c = points.point(center);
    let mut order: Vec<(f64, usize)> = (0..n).map(|i| (squared_distance(points.point(i), c), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut mask: Vec<usize> = order[..count].iter().map(|&(_, i)| i).collect();
    mask.sort_unstable();
    Ok(mask)
}
