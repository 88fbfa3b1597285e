use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{FeatureSet, MaternHyperparams, Smoothness};
use super::model::RvgpModel;
use crate::error::{Result, RvgpError};

/// Box and schedule for the evidence search. Bounds are in natural units;
/// the search runs in log space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub sigma: (f64, f64),
    pub kappa: (f64, f64),
    pub noise: (f64, f64),
    /// Grid values per axis used to seed the search.
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    /// Best grid points refined by coordinate search.
    #[serde(default = "default_starts")]
    pub starts: usize,
    /// Extra uniformly random (in log space) starting points.
    #[serde(default)]
    pub random_starts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    #[serde(default = "default_min_step")]
    pub min_step: f64,
}

fn default_grid() -> usize {
    3
}
fn default_starts() -> usize {
    2
}
fn default_max_evals() -> usize {
    250
}
fn default_min_step() -> f64 {
    1e-2
}

impl SearchConfig {
    /// Two decades either side of `initial` for `sigma` and `kappa`;
    /// noise from `1e-6 sigma` to `sigma`.
    pub fn around(initial: &MaternHyperparams) -> Self {
        Self {
            sigma: (initial.sigma / 100.0, initial.sigma * 100.0),
            kappa: (initial.kappa / 100.0, initial.kappa * 100.0),
            noise: (initial.sigma * 1e-6, initial.sigma),
            grid_points: default_grid(),
            starts: default_starts(),
            random_starts: 0,
            seed: 0,
            max_evals: default_max_evals(),
            min_step: default_min_step(),
        }
    }

    fn log_box(&self) -> Result<[(f64, f64); 3]> {
        let mut out = [(0.0, 0.0); 3];
        for (slot, (name, (lo, hi))) in [("sigma", self.sigma), ("kappa", self.kappa), ("noise", self.noise)]
            .into_iter()
            .enumerate()
        {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(RvgpError::InvalidInput(format!(
                    "search bounds for {name} must satisfy 0 < lo <= hi, got ({lo}, {hi})"
                )));
            }
            out[slot] = (lo.ln(), hi.ln());
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub hyper: MaternHyperparams,
    pub log_marginal_likelihood: f64,
    pub evaluations: usize,
    /// Grid initialization points and their objective values.
    pub grid: Vec<(MaternHyperparams, f64)>,
}

struct Objective<F> {
    eval_fn: F,
    nu: Smoothness,
    evaluations: usize,
    best: Option<([f64; 3], f64)>,
}

impl<F: FnMut(&MaternHyperparams) -> f64> Objective<F> {
    fn hyper(&self, x: &[f64; 3]) -> MaternHyperparams {
        MaternHyperparams {
            sigma: x[0].exp(),
            kappa: x[1].exp(),
            nu: self.nu,
            noise: x[2].exp(),
        }
    }

    fn eval(&mut self, x: &[f64; 3]) -> f64 {
        self.evaluations += 1;
        let h = self.hyper(x);
        let value = (self.eval_fn)(&h);
        if value.is_finite() && self.best.is_none_or(|(_, b)| value > b) {
            self.best = Some((*x, value));
        }
        value
    }
}

/// Maximizes the log marginal likelihood over `(log sigma, log kappa,
/// log noise)` with `nu` fixed: a coarse grid seeds a few compass
/// (coordinate) searches and the best evaluated point wins.
pub fn fit_hyperparameters(
    features: &FeatureSet,
    train_nodes: &[usize],
    targets: &DMatrix<f64>,
    nu: Smoothness,
    config: &SearchConfig,
) -> Result<FitOutcome> {
    maximize(nu, config, |h| {
        RvgpModel::fit(features, train_nodes, targets, h)
            .map(|m| m.log_marginal_likelihood())
            .unwrap_or(f64::NAN)
    })
}

/// Same search for independent per-channel scalar models sharing one set of
/// hyperparameters: the objective is the sum of channel evidences.
pub fn fit_channelwise_hyperparameters(
    features: &FeatureSet,
    train_nodes: &[usize],
    targets: &DMatrix<f64>,
    nu: Smoothness,
    config: &SearchConfig,
) -> Result<FitOutcome> {
    if features.output_dim() != 1 {
        return Err(RvgpError::DimensionMismatch("channelwise search needs scalar features".into()));
    }
    let channels: Vec<DMatrix<f64>> = (0..targets.ncols()).map(|c| targets.columns(c, 1).into_owned()).collect();
    maximize(nu, config, |h| {
        channels
            .iter()
            .map(|y| {
                RvgpModel::fit(features, train_nodes, y, h)
                    .map(|m| m.log_marginal_likelihood())
                    .unwrap_or(f64::NAN)
            })
            .sum()
    })
}

fn maximize(
    nu: Smoothness,
    config: &SearchConfig,
    eval_fn: impl FnMut(&MaternHyperparams) -> f64,
) -> Result<FitOutcome> {
    let bounds = config.log_box()?;
    let mut objective = Objective {
        eval_fn,
        nu,
        evaluations: 0,
        best: None,
    };
    let g = config.grid_points.max(1);
    let axis = |d: usize, t: usize| {
        let (lo, hi) = bounds[d];
        if g == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * (t as f64 + 0.5) / g as f64
        }
    };
    let mut seeds: Vec<([f64; 3], f64)> = Vec::with_capacity(g * g * g);
    let mut grid = Vec::with_capacity(g * g * g);
    for a in 0..g {
        for b in 0..g {
            for c in 0..g {
                let x = [axis(0, a), axis(1, b), axis(2, c)];
                let v = objective.eval(&x);
                grid.push((objective.hyper(&x), v));
                seeds.push((x, v));
            }
        }
    }
    seeds.sort_by(|p, q| nan_low(q.1).total_cmp(&nan_low(p.1)));
    seeds.truncate(config.starts);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.random_starts {
        let x = [0, 1, 2].map(|d| rng.random_range(bounds[d].0..=bounds[d].1));
        let v = objective.eval(&x);
        seeds.push((x, v));
    }
    for (start, value) in seeds {
        compass_search(&mut objective, start, value, &bounds, config);
    }
    let (x, value) = objective.best.ok_or(RvgpError::ObjectiveUndefined)?;
    Ok(FitOutcome {
        hyper: objective.hyper(&x),
        log_marginal_likelihood: value,
        evaluations: objective.evaluations,
        grid,
    })
}

fn nan_low(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn compass_search<F: FnMut(&MaternHyperparams) -> f64>(
    objective: &mut Objective<F>,
    mut x: [f64; 3],
    value: f64,
    bounds: &[(f64, f64); 3],
    config: &SearchConfig,
) {
    let mut fx = nan_low(value);
    let mut step = bounds
        .iter()
        .map(|(lo, hi)| (hi - lo) / (2.0 * config.grid_points.max(1) as f64))
        .fold(0.0f64, f64::max)
        .max(config.min_step);
    let budget = objective.evaluations + config.max_evals;
    while step >= config.min_step && objective.evaluations < budget {
        let mut improved = false;
        for d in 0..3 {
            for dir in [1.0, -1.0] {
                let mut trial = x;
                trial[d] = (x[d] + dir * step).clamp(bounds[d].0, bounds[d].1);
                if trial[d] == x[d] {
                    continue;
                }
                let ft = nan_low(objective.eval(&trial));
                if ft > fx {
                    x = trial;
                    fx = ft;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
}
