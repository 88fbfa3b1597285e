use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::sparse::SymmetricOperator;
use crate::error::{Result, RvgpError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Dense when the operator dimension is at most `dense_threshold`.
    #[default]
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    pub solver: SolverKind,
    /// Residual tolerance relative to the operator's Frobenius norm.
    pub tolerance: f64,
    /// Operator-vector product budget; `None` means `10 * dim`.
    pub max_matvecs: Option<usize>,
    pub block_size: usize,
    /// Krylov basis cap; `None` means `3 * wanted + 2 * block_size`.
    pub max_basis: Option<usize>,
    pub dense_threshold: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            solver: SolverKind::Auto,
            tolerance: 1e-10,
            max_matvecs: None,
            block_size: 8,
            max_basis: None,
            dense_threshold: 2000,
            seed: 0,
        }
    }
}

/// The `k` smallest eigenpairs of a symmetric operator, ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    /// One eigenvector per column.
    pub eigenvectors: DMatrix<f64>,
    /// Values per node: `m` for a connection Laplacian, 1 for a graph Laplacian.
    pub fiber_dim: usize,
    /// Eigenvalue `k + 1`, when the operator has one.
    pub next_eigenvalue: Option<f64>,
    /// Largest `|A u - lambda u|` over the returned pairs.
    pub max_residual: f64,
    pub solver: SolverKind,
    pub tolerance: f64,
}

impl Spectrum {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn nodes(&self) -> usize {
        self.dim() / self.fiber_dim
    }

    /// True when the cut after eigenvalue `k` separates (numerically) equal
    /// eigenvalues, which makes the truncated basis order-dependent.
    pub fn splits_degenerate_cluster(&self) -> bool {
        match self.next_eigenvalue {
            Some(next) => next - self.eigenvalues[self.k() - 1] < 1e-8,
            None => false,
        }
    }

    /// Keeps the first `k` pairs.
    pub fn truncate(&self, k: usize) -> Result<Spectrum> {
        if k == 0 || k > self.k() {
            return Err(RvgpError::InvalidInput(format!(
                "cannot truncate a {}-column spectrum to {k}",
                self.k()
            )));
        }
        let next = if k < self.k() {
            Some(self.eigenvalues[k])
        } else {
            self.next_eigenvalue
        };
        Ok(Spectrum {
            eigenvalues: self.eigenvalues.rows(0, k).into_owned(),
            eigenvectors: self.eigenvectors.columns(0, k).into_owned(),
            next_eigenvalue: next,
            ..self.clone()
        })
    }
}

/// Computes the `k` smallest eigenpairs.
///
/// Eigenvectors are sign-normalized so their largest-magnitude entry is
/// positive. Within a degenerate eigenspace the basis is whatever the solver
/// produced.
pub fn eigendecompose<A: SymmetricOperator + ?Sized>(
    op: &A,
    k: usize,
    options: &EigenOptions,
) -> Result<Spectrum> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(RvgpError::InvalidInput(format!(
            "requested {k} eigenpairs of a {n}-dimensional operator"
        )));
    }
    let wanted = if k < n { k + 1 } else { k };
    let use_dense = match options.solver {
        SolverKind::Dense => true,
        SolverKind::Iterative => false,
        SolverKind::Auto => n <= options.dense_threshold,
    };
    let (values, mut vectors) = if use_dense {
        dense_eigendecompose(&op.to_dense(), wanted)
    } else {
        block_krylov_schur(op, wanted, options)?
    };
    for c in 0..vectors.ncols() {
        normalize_sign(&mut vectors, c);
    }
    let mut max_residual = 0.0f64;
    for c in 0..k {
        let u = vectors.column(c).into_owned();
        let r = (op.apply(&u) - &u * values[c]).norm();
        max_residual = max_residual.max(r);
    }
    Ok(Spectrum {
        eigenvalues: DVector::from_iterator(k, values.iter().take(k).copied()),
        eigenvectors: vectors.columns(0, k).into_owned(),
        fiber_dim: op.fiber_dim(),
        next_eigenvalue: if wanted > k { Some(values[k]) } else { None },
        max_residual,
        solver: if use_dense {
            SolverKind::Dense
        } else {
            SolverKind::Iterative
        },
        tolerance: options.tolerance,
    })
}

/// The `k` smallest eigenpairs of a dense symmetric matrix, ascending.
pub fn dense_eigendecompose(matrix: &DMatrix<f64>, k: usize) -> (Vec<f64>, DMatrix<f64>) {
    let eig = matrix.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    order.truncate(k);
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(matrix.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

fn normalize_sign(vectors: &mut DMatrix<f64>, c: usize) {
    let mut best = (0.0f64, 0usize);
    for r in 0..vectors.nrows() {
        let a = vectors[(r, c)].abs();
        if a > best.0 {
            best = (a, r);
        }
    }
    if vectors[(best.1, c)] < 0.0 {
        vectors.column_mut(c).neg_mut();
    }
}

/// Thick-restart block Lanczos (Krylov-Schur form) with full
/// reorthogonalization. The projected matrix is accumulated explicitly as
/// `Q^T A Q`, so restarts only need to keep the retained Ritz vectors.
fn block_krylov_schur<A: SymmetricOperator + ?Sized>(
    op: &A,
    wanted: usize,
    options: &EigenOptions,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = op.dim();
    let block = options.block_size.clamp(1, n);
    let cap = options
        .max_basis
        .unwrap_or(3 * wanted + 2 * block)
        .clamp((wanted + block).min(n), n);
    let budget = options.max_matvecs.unwrap_or(10 * n);
    let scale = op.frobenius_norm().max(f64::MIN_POSITIVE);
    let threshold = options.tolerance * scale;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);

    let mut basis = DMatrix::<f64>::zeros(n, cap);
    let mut projected = DMatrix::<f64>::zeros(cap, cap);
    let mut used = 0usize;
    let mut pending = orthonormalize(&basis.columns(0, 0).into_owned(), random_block(n, block, &mut rng), &mut rng);
    let mut matvecs = 0usize;

    loop {
        while used < n && !pending.is_empty() && used + pending.ncols() <= cap {
            let pb = pending.ncols();
            let mut w = op.apply_block(&pending);
            matvecs += pb;
            basis.columns_mut(used, pb).copy_from(&pending);
            let total = used + pb;
            let q = basis.columns(0, total);
            let mut h = q.tr_mul(&w);
            w -= q * &h;
            let h2 = q.tr_mul(&w);
            w -= q * &h2;
            h += h2;
            for r in 0..total {
                for c in 0..pb {
                    let col = used + c;
                    if r < used {
                        projected[(r, col)] = h[(r, c)];
                        projected[(col, r)] = h[(r, c)];
                    } else if r >= col {
                        let avg = 0.5 * (h[(r, c)] + h[(col, r - used)]);
                        projected[(r, col)] = avg;
                        projected[(col, r)] = avg;
                    }
                }
            }
            used = total;
            let room = (n - used).min(block);
            pending = if room == 0 {
                DMatrix::zeros(n, 0)
            } else {
                let w = w.columns(0, room.min(w.ncols())).into_owned();
                orthonormalize(&basis.columns(0, used).into_owned(), w, &mut rng)
            };
        }

        let t = projected.view((0, 0), (used, used)).into_owned();
        let (theta, y) = dense_eigendecompose(&t, used);
        let take = wanted.min(used);
        let ritz = basis.columns(0, used) * y.columns(0, take);
        let image = op.apply_block(&ritz);
        matvecs += take;
        let mut worst = 0.0f64;
        for c in 0..take {
            let r = (image.column(c) - ritz.column(c) * theta[c]).norm();
            worst = worst.max(r);
        }
        if used == n || worst <= threshold {
            return Ok((theta[..take].to_vec(), ritz));
        }
        if matvecs >= budget {
            return Err(RvgpError::NoConvergence {
                matvecs,
                residual: worst,
            });
        }
        // restart on the lowest Ritz vectors
        let keep = (wanted + block).max((used + wanted) / 2).min(cap - block).min(used);
        let kept = basis.columns(0, used) * y.columns(0, keep);
        basis.columns_mut(0, keep).copy_from(&kept);
        projected.fill(0.0);
        for c in 0..keep {
            projected[(c, c)] = theta[c];
        }
        used = keep;
        if pending.is_empty() {
            pending = orthonormalize(&basis.columns(0, used).into_owned(), random_block(n, block, &mut rng), &mut rng);
        }
    }
}

fn random_block(n: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, cols, |_, _| StandardNormal.sample(rng))
}

/// Orthonormalizes `w` column by column against `q` and itself. Columns that
/// (numerically) vanish are replaced by fresh random directions.
fn orthonormalize(q: &DMatrix<f64>, mut w: DMatrix<f64>, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = w.nrows();
    let limit = n - q.ncols();
    let cols = w.ncols().min(limit);
    let mut out = DMatrix::<f64>::zeros(n, cols);
    for c in 0..cols {
        let mut v = w.column(c).into_owned();
        let reference = v.norm();
        for attempt in 0..4 {
            for _ in 0..2 {
                if q.ncols() > 0 {
                    let coeff = q.tr_mul(&v);
                    v -= q * coeff;
                }
                if c > 0 {
                    let prev = out.columns(0, c);
                    let coeff = prev.tr_mul(&v);
                    v -= prev * coeff;
                }
            }
            let norm = v.norm();
            if norm > 1e-10 * reference.max(f64::MIN_POSITIVE) && norm > 0.0 {
                v /= norm;
                break;
            }
            assert!(attempt < 3, "failed to extend orthonormal basis");
            v = DVector::from_fn(n, |_, _| StandardNormal.sample(rng));
        }
        out.set_column(c, &v);
    }
    w.fill(0.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GaugeFrameSet, ProximityGraph, TransportMapSet};
    use crate::spectral::{assemble_connection_laplacian, assemble_graph_laplacian};
    use rand::Rng;

    fn random_graph(n: usize, extra: usize, seed: u64) -> ProximityGraph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges: Vec<(usize, usize, f64)> = (1..n).map(|i| (rng.random_range(0..i), i, 0.5 + rng.random::<f64>())).collect();
        for _ in 0..extra {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            if a != b {
                edges.push((a, b, 0.5 + rng.random::<f64>()));
            }
        }
        ProximityGraph::from_edges(n, edges).unwrap()
    }

    #[test]
    fn connected_graph_null_space() {
        let g = random_graph(30, 40, 2);
        let l = assemble_graph_laplacian(&g);
        for solver in [SolverKind::Dense, SolverKind::Iterative] {
            let s = eigendecompose(&l, 3, &EigenOptions { solver, ..Default::default() }).unwrap();
            assert!(s.eigenvalues[0].abs() < 1e-9);
            let u = s.eigenvectors.column(0);
            let c = 1.0 / 30f64.sqrt();
            assert!(u.iter().all(|&x| (x - c).abs() < 1e-8), "{solver:?}");
        }
    }

    #[test]
    fn full_spectrum_matches_dense_on_small_bundle() {
        let g = random_graph(10, 12, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let maps = g
            .edges()
            .iter()
            .map(|e| ((e.i, e.j), DMatrix::from_fn(2, 2, |_, _| rng.random::<f64>() - 0.5).qr().q()))
            .collect();
        let t = TransportMapSet::from_maps(2, maps).unwrap();
        let frames = GaugeFrameSet::new(vec![DMatrix::identity(2, 2); 10]).unwrap();
        let lc = assemble_connection_laplacian(&g, &frames, &t).unwrap();
        let opts = EigenOptions { solver: SolverKind::Iterative, block_size: 3, ..Default::default() };
        let it = eigendecompose(&lc, 20, &opts).unwrap();
        let (dense, _) = dense_eigendecompose(&lc.to_dense(), 20);
        for (a, b) in it.eigenvalues.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(it.next_eigenvalue.is_none());
        let gram = it.eigenvectors.transpose() * &it.eigenvectors;
        assert!((gram - DMatrix::<f64>::identity(20, 20)).norm() < 1e-8);
    }

    #[test]
    fn restart_path_converges_and_is_deterministic() {
        let g = random_graph(150, 300, 8);
        let l = assemble_graph_laplacian(&g);
        let opts = EigenOptions { solver: SolverKind::Iterative, block_size: 4, max_basis: Some(40), ..Default::default() };
        let a = eigendecompose(&l, 10, &opts).unwrap();
        let b = eigendecompose(&l, 10, &opts).unwrap();
        assert_eq!(a, b);
        let (dense, _) = dense_eigendecompose(&l.to_dense(), 11);
        for (x, y) in a.eigenvalues.iter().zip(&dense) {
            assert!((x - y).abs() < 1e-8);
        }
        assert!((a.next_eigenvalue.unwrap() - dense[10]).abs() < 1e-8);
        assert!(a.max_residual <= 1e-8 * l.frobenius_norm());
    }

    #[test]
    fn budget_exhaustion_reports_residual() {
        let g = random_graph(200, 400, 1);
        let l = assemble_graph_laplacian(&g);
        let opts = EigenOptions {
            solver: SolverKind::Iterative,
            max_matvecs: Some(30),
            max_basis: Some(20),
            block_size: 2,
            ..Default::default()
        };
        assert!(matches!(eigendecompose(&l, 5, &opts), Err(RvgpError::NoConvergence { .. })));
    }

    #[test]
    fn rejects_bad_k() {
        let g = random_graph(5, 0, 0);
        let l = assemble_graph_laplacian(&g);
        assert!(eigendecompose(&l, 0, &EigenOptions::default()).is_err());
        assert!(eigendecompose(&l, 6, &EigenOptions::default()).is_err());
    }

    #[test]
    fn degenerate_cut_detected() {
        let g = ProximityGraph::from_edges(4, (0..4).map(|i| (i, (i + 1) % 4, 1.0))).unwrap();
        let l = assemble_graph_laplacian(&g);
        let s = eigendecompose(&l, 2, &EigenOptions::default()).unwrap();
        assert!(s.splits_degenerate_cluster());
        let s = eigendecompose(&l, 3, &EigenOptions::default()).unwrap();
        assert!(!s.splits_degenerate_cluster());
    }
}
