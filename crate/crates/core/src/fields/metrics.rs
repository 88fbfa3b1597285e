use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RvgpError};
use crate::geometry::{GaugeFrameSet, ProximityGraph};

const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: String,
    pub value: f64,
    pub n_nodes: usize,
    pub n_excluded: usize,
}

fn check_pair(pred: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<()> {
    if pred.shape() != truth.shape() {
        return Err(RvgpError::DimensionMismatch(format!(
            "prediction is {}x{}, truth is {}x{}",
            pred.nrows(),
            pred.ncols(),
            truth.nrows(),
            truth.ncols()
        )));
    }
    Ok(())
}

/// Angle between two vectors as `2 atan2(|a^ - b^|, |a^ + b^|)`, accurate near 0 and pi.
fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (u, v) = (x / na, y / nb);
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Row pairs where neither vector vanishes, plus the number skipped.
fn usable_rows(pred: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<(Vec<(Vec<f64>, Vec<f64>)>, usize)> {
    check_pair(pred, truth)?;
    let mut out = Vec::with_capacity(pred.nrows());
    let mut excluded = 0;
    for i in 0..pred.nrows() {
        let p: Vec<f64> = pred.row(i).iter().copied().collect();
        let t: Vec<f64> = truth.row(i).iter().copied().collect();
        if norm(&p) <= ZERO_NORM || norm(&t) <= ZERO_NORM {
            excluded += 1;
            continue;
        }
        out.push((p, t));
    }
    if out.is_empty() {
        return Err(RvgpError::InvalidInput("no node has a nonzero predicted and true vector".into()));
    }
    Ok((out, excluded))
}

fn cosines(pred: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<(Vec<f64>, usize)> {
    let (rows, excluded) = usable_rows(pred, truth)?;
    let cos = rows
        .iter()
        .map(|(p, t)| {
            let dot: f64 = p.iter().zip(t).map(|(x, y)| x * y).sum();
            (dot / (norm(p) * norm(t))).clamp(-1.0, 1.0)
        })
        .collect();
    Ok((cos, excluded))
}

/// Mean cosine similarity between predicted and true vectors.
pub fn alignment_score(pred: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<MetricReport> {
    let (cos, excluded) = cosines(pred, truth)?;
    Ok(MetricReport {
        metric: "alignment".into(),
        value: cos.iter().sum::<f64>() / cos.len() as f64,
        n_nodes: cos.len(),
        n_excluded: excluded,
    })
}

/// Mean angle in radians between predicted and true vectors.
pub fn angular_error(pred: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<MetricReport> {
    let (rows, excluded) = usable_rows(pred, truth)?;
    Ok(MetricReport {
        metric: "angular_error".into(),
        value: rows.iter().map(|(p, t)| angle_between(p, t)).sum::<f64>() / rows.len() as f64,
        n_nodes: rows.len(),
        n_excluded: excluded,
    })
}

/// Norms of the components normal to the tangent spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentDeviation {
    pub mean: f64,
    pub max: f64,
    pub n_nodes: usize,
}

impl TangentDeviation {
    pub fn reports(&self) -> [MetricReport; 2] {
        let report = |metric: &str, value| MetricReport {
            metric: metric.into(),
            value,
            n_nodes: self.n_nodes,
            n_excluded: 0,
        };
        [report("out_of_tangent_mean", self.mean), report("out_of_tangent_max", self.max)]
    }
}

/// `|(I - T_i T_i^T) v_i|` over `nodes`, with `vectors` one row per listed node.
pub fn out_of_tangent(frames: &GaugeFrameSet, nodes: &[usize], vectors: &DMatrix<f64>) -> Result<TangentDeviation> {
    if vectors.nrows() != nodes.len() || vectors.ncols() != frames.ambient_dim() {
        return Err(RvgpError::DimensionMismatch(format!(
            "{} nodes but vectors are {}x{}",
            nodes.len(),
            vectors.nrows(),
            vectors.ncols()
        )));
    }
    if nodes.is_empty() {
        return Err(RvgpError::InvalidInput("no nodes to evaluate".into()));
    }
    let mut sum = 0.0;
    let mut max = 0.0f64;
    for (r, &i) in nodes.iter().enumerate() {
        let normal = frames.normal_component(i, &vectors.row(r).transpose())?.norm();
        sum += normal;
        max = max.max(normal);
    }
    Ok(TangentDeviation {
        mean: sum / nodes.len() as f64,
        max,
        n_nodes: nodes.len(),
    })
}

/// Largest ambient angle across edges with exactly one endpoint in `masked`.
/// `field` holds one vector per graph node. Edges touching a vanishing
/// vector are excluded.
pub fn boundary_max_angular_jump(graph: &ProximityGraph, masked: &[usize], field: &DMatrix<f64>) -> Result<MetricReport> {
    let n = graph.len();
    if field.nrows() != n {
        return Err(RvgpError::DimensionMismatch(format!("field has {} rows, graph has {n} nodes", field.nrows())));
    }
    let mut inside = vec![false; n];
    for &i in masked {
        if i >= n {
            return Err(RvgpError::IndexOutOfRange {
                what: "masked nodes",
                index: i,
                len: n,
            });
        }
        inside[i] = true;
    }
    let mut max = f64::NEG_INFINITY;
    let (mut counted, mut excluded) = (0, 0);
    for e in graph.edges() {
        if inside[e.i] == inside[e.j] {
            continue;
        }
        let a: Vec<f64> = field.row(e.i).iter().copied().collect();
        let b: Vec<f64> = field.row(e.j).iter().copied().collect();
        if norm(&a) <= ZERO_NORM || norm(&b) <= ZERO_NORM {
            excluded += 1;
            continue;
        }
        counted += 1;
        max = max.max(angle_between(&a, &b));
    }
    if counted == 0 {
        return Err(RvgpError::InvalidInput("mask has no usable boundary edges".into()));
    }
    Ok(MetricReport {
        metric: "boundary_max_angular_jump".into(),
        value: max,
        n_nodes: counted,
        n_excluded: excluded,
    })
}
