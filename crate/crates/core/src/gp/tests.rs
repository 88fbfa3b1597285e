use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::bundle::TangentBundle;
use crate::geometry::{mesh, FrameNeighbors, GaugeFrameSet, ProximityGraph, TransportMapSet, Weighting};
use crate::spectral::{assemble_connection_laplacian, assemble_graph_laplacian, dense_eigendecompose, Spectrum, SolverKind};

fn random_frames(n: usize, d: usize, m: usize, rng: &mut ChaCha8Rng) -> GaugeFrameSet {
    let frames = (0..n)
        .map(|_| {
            let a = DMatrix::from_fn(d, m, |_, _| rng.random::<f64>() - 0.5);
            a.qr().q()
        })
        .collect();
    GaugeFrameSet::new(frames).unwrap()
}

fn ring_with_chords(n: usize) -> ProximityGraph {
    let mut edges: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    edges.push((0, n / 2, 0.5));
    ProximityGraph::from_edges(n, edges).unwrap()
}

fn full_spectrum(op: &crate::spectral::ConnectionLaplacian, k: usize) -> Spectrum {
    use crate::spectral::SymmetricOperator;
    let (values, vectors) = dense_eigendecompose(&op.to_dense(), k);
    Spectrum {
        eigenvalues: DVector::from_vec(values),
        eigenvectors: vectors,
        fiber_dim: op.fiber_dim(),
        next_eigenvalue: None,
        max_residual: 0.0,
        solver: SolverKind::Dense,
        tolerance: 1e-10,
    }
}

/// Random frames on a small ring graph, full spectrum.
fn random_features(n: usize, seed: u64) -> FeatureSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let graph = ring_with_chords(n);
    let frames = random_frames(n, 3, 2, &mut rng);
    let transports = TransportMapSet::compute(&graph, &frames).unwrap();
    let lc = assemble_connection_laplacian(&graph, &frames, &transports).unwrap();
    FeatureSet::from_connection(&full_spectrum(&lc, 2 * n), &frames).unwrap()
}

fn torus_features(a: usize, b: usize, k: usize) -> (TangentBundle, FeatureSet) {
    let mesh = mesh::torus(1.0, 0.4, a, b).unwrap();
    let graph = ProximityGraph::from_mesh(&mesh, Weighting::Unit).unwrap();
    let bundle = TangentBundle::build(mesh.points, graph, 2, FrameNeighbors::Auto).unwrap();
    let features = bundle.features(k, &Default::default()).unwrap();
    (bundle, features)
}

fn hyper(sigma: f64, kappa: f64, nu: Smoothness, noise: f64) -> MaternHyperparams {
    MaternHyperparams { sigma, kappa, nu, noise }
}

/// Tangent vectors at the given nodes, one ambient row per node.
fn tangent_targets(features: &FeatureSet, nodes: &[usize], seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = features.frames().unwrap();
    let d = frames.ambient_dim();
    let mut y = DMatrix::zeros(nodes.len(), d);
    for (r, &i) in nodes.iter().enumerate() {
        let c = DVector::from_fn(frames.manifold_dim(), |_, _| rng.random::<f64>() - 0.5);
        y.row_mut(r).copy_from(&(frames.frame(i) * c).transpose());
    }
    y
}

fn flat(y: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(y.len(), y.row_iter().flat_map(|r| r.iter().copied().collect::<Vec<_>>()))
}

#[test]
fn gram_is_psd() {
    let features = random_features(6, 1);
    assert_eq!(features.k(), 12);
    let all: Vec<usize> = (0..6).collect();
    for nu in [Smoothness::Finite(0.5), Smoothness::Finite(2.5), Smoothness::Infinite] {
        for kappa in [0.2, 1.0, 5.0] {
            let h = hyper(1.3, kappa, nu, 0.0);
            let filter = spectral_filter(features.eigenvalues(), &h).unwrap();
            let c = features.normalization(&filter);
            let gram = assemble_gram(&features, &all, &filter, h.sigma, 0.0, c).unwrap();
            assert_eq!(gram.prior, gram.prior.transpose());
            let eig = SymmetricEigen::new(gram.prior.clone()).eigenvalues;
            let max = eig.max();
            assert!(eig.min() >= -1e-9 * max, "min eig {} max {max}", eig.min());
        }
    }
}

#[test]
fn normalization_sets_mean_trace() {
    let features = random_features(7, 2);
    let h = hyper(1.7, 0.8, Smoothness::Finite(1.5), 0.0);
    let filter = spectral_filter(features.eigenvalues(), &h).unwrap();
    let c = features.normalization(&filter);
    let mean_trace: f64 = (0..7)
        .map(|i| kernel_block(features.encoding(i), features.encoding(i), &filter, h.sigma, c).unwrap().trace())
        .sum::<f64>()
        / 7.0;
    assert!((mean_trace - h.sigma * h.sigma * 2.0).abs() < 1e-10);
}

#[test]
fn log_determinant_matches_dense_eigenvalues() {
    let features = random_features(5, 3);
    let nodes = [0, 1, 2, 3, 4];
    let h = hyper(1.0, 0.7, Smoothness::Finite(1.5), 0.3);
    let filter = spectral_filter(features.eigenvalues(), &h).unwrap();
    let c = features.normalization(&filter);
    let gram = assemble_gram(&features, &nodes, &filter, h.sigma, h.noise, c).unwrap();
    let oracle: f64 = SymmetricEigen::new(gram.noisy()).eigenvalues.iter().map(|l| l.ln()).sum();
    assert!(((gram.log_determinant() - oracle) / oracle).abs() < 1e-8);
}

#[test]
fn log_marginal_likelihood_matches_dense_formula() {
    let features = random_features(6, 4);
    let nodes = [0, 2, 3, 5];
    let y = tangent_targets(&features, &nodes, 9);
    let h = hyper(0.9, 1.1, Smoothness::Finite(2.5), 0.2);
    let model = RvgpModel::fit(&features, &nodes, &y, &h).unwrap();
    let k = model.gram().noisy();
    let yv = flat(&y);
    let inv = k.clone().try_inverse().unwrap();
    let logdet = k.determinant().ln();
    let n = yv.len() as f64;
    let oracle = -0.5 * (yv.transpose() * inv * &yv)[0] - 0.5 * logdet - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    assert!((model.log_marginal_likelihood() - oracle).abs() < 1e-8 * oracle.abs().max(1.0));
}

#[test]
fn vanishing_prior_gives_iid_gaussian_evidence() {
    let features = random_features(5, 5);
    let nodes = [1, 3, 4];
    let y = tangent_targets(&features, &nodes, 1) * 3.0;
    let model = RvgpModel::fit(&features, &nodes, &y, &hyper(1e-12, 1.0, Smoothness::Finite(1.5), 1.0)).unwrap();
    let oracle: f64 = y.iter().map(|v| -0.5 * v * v - 0.5 * (2.0 * std::f64::consts::PI).ln()).sum();
    assert!((model.log_marginal_likelihood() - oracle).abs() < 1e-10);
}

#[test]
fn noise_dominated_limit() {
    let features = random_features(6, 6);
    let nodes = [0, 1, 2];
    let y = tangent_targets(&features, &nodes, 2);
    let model = RvgpModel::fit(&features, &nodes, &y, &hyper(1.0, 1.0, Smoothness::Finite(1.5), 1e3)).unwrap();
    let noisy = model.gram().noisy();
    let scaled = &noisy / 1e6 - DMatrix::identity(noisy.nrows(), noisy.ncols());
    assert!(scaled.abs().max() < 1e-5);
    let p = model.predict(&[3, 4, 5]).unwrap();
    assert!(p.mean.abs().max() < 1e-5 * y.abs().max());
}

#[test]
fn zero_data_gives_zero_mean() {
    let features = random_features(6, 7);
    let y = DMatrix::zeros(3, 3);
    let model = RvgpModel::fit(&features, &[0, 2, 4], &y, &hyper(1.0, 1.0, Smoothness::Finite(0.5), 0.1)).unwrap();
    let p = model.predict(&[0, 1, 2, 3, 4, 5]).unwrap();
    assert!(p.mean.iter().all(|&v| v == 0.0));
}

#[test]
fn refit_is_deterministic() {
    let features = random_features(6, 8);
    let nodes = [5, 1, 3];
    let y = tangent_targets(&features, &nodes, 3);
    let h = hyper(1.0, 0.5, Smoothness::Infinite, 0.05);
    let a = RvgpModel::fit(&features, &nodes, &y, &h).unwrap();
    let b = RvgpModel::fit(&features, &nodes, &y, &h).unwrap();
    assert_eq!(a.weights(), b.weights());
    assert_eq!(a.gram().factor(), b.gram().factor());
    assert_eq!(a.predict(&[0, 2]).unwrap(), b.predict(&[0, 2]).unwrap());
}

#[test]
fn fit_rejects_bad_input() {
    let features = random_features(5, 9);
    let h = hyper(1.0, 1.0, Smoothness::Finite(1.5), 0.1);
    assert!(RvgpModel::fit(&features, &[0, 0], &DMatrix::zeros(2, 3), &h).is_err());
    assert!(RvgpModel::fit(&features, &[0, 1], &DMatrix::zeros(2, 2), &h).is_err());
    assert!(RvgpModel::fit(&features, &[0, 9], &DMatrix::zeros(2, 3), &h).is_err());
    let mut y = DMatrix::zeros(2, 3);
    y[(1, 1)] = f64::NAN;
    assert!(RvgpModel::fit(&features, &[0, 1], &y, &h).is_err());
}

#[test]
fn full_rank_interpolation() {
    let features = random_features(8, 10);
    let nodes = [0, 1, 3, 4, 6];
    let y = tangent_targets(&features, &nodes, 4);
    let model = RvgpModel::fit(&features, &nodes, &y, &hyper(1.0, 0.1, Smoothness::Finite(0.5), 1e-8)).unwrap();
    let p = model.predict(&nodes).unwrap();
    // oracle: dense solve of the same system
    let k = model.gram().prior.clone();
    let ks = k.clone();
    let mut noisy = k.clone();
    for i in 0..noisy.nrows() {
        noisy[(i, i)] += 1e-16 + model.gram().jitter;
    }
    let direct = ks * noisy.lu().solve(&flat(&y)).unwrap();
    let residual = (flat(&p.mean) - flat(&y)).norm() / flat(&y).norm();
    assert!(residual < 1e-4, "residual {residual}");
    assert!((flat(&p.mean) - &direct).norm() / direct.norm() < 1e-4);
}

#[test]
fn posterior_covariances_are_symmetric_psd() {
    let features = random_features(7, 11);
    let nodes = [0, 3, 5];
    let y = tangent_targets(&features, &nodes, 5);
    let model = RvgpModel::fit(&features, &nodes, &y, &hyper(1.2, 0.6, Smoothness::Finite(1.5), 0.01)).unwrap();
    for cov in model.predict(&(0..7).collect::<Vec<_>>()).unwrap().covariances {
        assert_eq!(cov, cov.transpose());
        let eig = SymmetricEigen::new(cov).eigenvalues;
        assert!(eig.min() >= -1e-8);
    }
}

#[test]
fn variance_grows_away_from_training_on_a_line() {
    let n = 9;
    let edges: Vec<(usize, usize, f64)> = (0..n - 1).map(|i| (i, i + 1, 1.0)).collect();
    let graph = ProximityGraph::from_edges(n, edges).unwrap();
    let frames = GaugeFrameSet::new(vec![DMatrix::from_column_slice(2, 1, &[1.0, 0.0]); n]).unwrap();
    let transports = TransportMapSet::compute(&graph, &frames).unwrap();
    let lc = assemble_connection_laplacian(&graph, &frames, &transports).unwrap();
    let features = FeatureSet::from_connection(&full_spectrum(&lc, n), &frames).unwrap();
    let h = hyper(1.0, 3.0, Smoothness::Finite(1.5), 1e-2);
    let train = [0, 1, 2];
    let y = DMatrix::from_row_slice(3, 2, &[0.3, 0.0, -0.2, 0.0, 0.5, 0.0]);
    let model = RvgpModel::fit(&features, &train, &y, &h).unwrap();
    let all: Vec<usize> = (0..n).collect();
    let pred = model.predict(&all).unwrap();

    // oracle: dense joint covariance, posterior by explicit inverse
    let filter = spectral_filter(features.eigenvalues(), &h).unwrap();
    let c = features.normalization(&filter);
    let block = |i: usize, j: usize| kernel_block(features.encoding(i), features.encoding(j), &filter, h.sigma, c).unwrap()[(0, 0)];
    let ktt = DMatrix::from_fn(3, 3, |a, b| block(train[a], train[b]) + if a == b { 1e-4 } else { 0.0 });
    let inv = ktt.try_inverse().unwrap();
    let var: Vec<f64> = all
        .iter()
        .map(|&q| {
            let ks = DVector::from_fn(3, |a, _| block(q, train[a]));
            block(q, q) - (ks.transpose() * &inv * &ks)[0]
        })
        .collect();
    for (q, v) in var.iter().enumerate() {
        assert!((pred.covariances[q][(0, 0)] - v).abs() < 1e-10, "node {q}");
    }
    let trained_max = var[..3].iter().copied().fold(0.0, f64::max);
    assert!(var[3..].iter().all(|&v| v >= trained_max));
    assert!(var[n - 1] > var[3]);
}

#[test]
fn one_dimensional_bundle_reduces_to_scalar_gp() {
    let graph = ring_with_chords(10);
    let n = graph.len();
    let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let frames = GaugeFrameSet::new(vec![e1; n]).unwrap();
    let transports = TransportMapSet::compute(&graph, &frames).unwrap();
    let lc = assemble_connection_laplacian(&graph, &frames, &transports).unwrap();
    let l = assemble_graph_laplacian(&graph);
    assert_eq!(lc.matrix().dense(), l.matrix().dense());

    let k = 6;
    let vector = FeatureSet::from_connection(&full_spectrum(&lc, k), &frames).unwrap();
    let scalar_spec = {
        let s = full_spectrum(&lc, k);
        Spectrum { fiber_dim: 1, ..s }
    };
    let scalar = FeatureSet::from_scalar(&scalar_spec).unwrap();
    let h = hyper(1.0, 0.8, Smoothness::Finite(1.5), 0.1);
    let train = [0, 2, 5, 7];
    let ys = DMatrix::from_column_slice(4, 1, &[0.4, -0.1, 0.9, 0.2]);
    let mut ya = DMatrix::zeros(4, 2);
    ya.set_column(0, &ys.column(0));
    let pv = RvgpModel::fit(&vector, &train, &ya, &h).unwrap().predict(&[1, 3, 9]).unwrap();
    let ps = RvgpModel::fit(&scalar, &train, &ys, &h).unwrap().predict(&[1, 3, 9]).unwrap();
    for q in 0..3 {
        assert!((pv.mean[(q, 0)] - ps.mean[(q, 0)]).abs() < 1e-10);
        assert!(pv.mean[(q, 1)].abs() < 1e-10);
        assert!((pv.covariances[q][(0, 0)] - ps.covariances[q][(0, 0)]).abs() < 1e-10);
    }
}

#[test]
fn gram_rank_bounded_by_k() {
    let (_, features) = torus_features(8, 5, 5);
    let nodes: Vec<usize> = (0..20).collect();
    let h = hyper(1.0, 0.5, Smoothness::Finite(1.5), 0.0);
    let filter = spectral_filter(features.eigenvalues(), &h).unwrap();
    let c = features.normalization(&filter);
    let gram = assemble_gram(&features, &nodes, &filter, 1.0, 0.0, c).unwrap();
    let sv = gram.prior.singular_values();
    let rank = sv.iter().filter(|&&s| s > 1e-10 * sv.max()).count();
    assert!(rank <= 5, "rank {rank}");
}

#[test]
fn inducing_equals_exact_without_compression() {
    let (_, features) = torus_features(8, 5, 20);
    let train: Vec<usize> = (0..40).step_by(2).collect();
    let query: Vec<usize> = (1..40).step_by(2).collect();
    let y = tangent_targets(&features, &train, 6);
    for h in [
        hyper(1.0, 0.5, Smoothness::Finite(1.5), 0.05),
        hyper(0.7, 1.5, Smoothness::Infinite, 0.2),
    ] {
        let exact = RvgpModel::fit(&features, &train, &y, &h).unwrap().predict(&query).unwrap();
        let dtc = inducing_point_predict(&features, &train, &y, &train, &h, &query).unwrap();
        assert!((&exact.mean - &dtc.mean).abs().max() < 1e-6);
        for (a, b) in exact.covariances.iter().zip(&dtc.covariances) {
            assert!((a - b).abs().max() < 1e-6);
        }
    }
}

#[test]
fn inducing_rejects_bad_sets() {
    let features = random_features(6, 12);
    let y = tangent_targets(&features, &[0, 1], 0);
    let h = hyper(1.0, 1.0, Smoothness::Finite(1.5), 0.1);
    assert!(inducing_point_predict(&features, &[0, 1], &y, &[], &h, &[2]).is_err());
    assert!(inducing_point_predict(&features, &[0, 1], &y, &[0, 1, 2], &h, &[2]).is_err());
    assert!(inducing_point_predict(&features, &[0, 1], &y, &[0], &hyper(1.0, 1.0, Smoothness::Finite(1.5), 0.0), &[2]).is_err());
}

fn sample_prior(features: &FeatureSet, h: &MaternHyperparams, seed: u64) -> DMatrix<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let filter = spectral_filter(features.eigenvalues(), h).unwrap();
    let c = features.normalization(&filter);
    let all: Vec<usize> = (0..features.len()).collect();
    let q = features.weighted_rows(&all, &filter);
    let xi = DVector::from_fn(features.k(), |_, _| StandardNormal.sample(&mut rng));
    let noise = DVector::from_fn(q.nrows(), |_, _| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * h.noise
    });
    let f = q * xi * (h.sigma * c.sqrt()) + noise;
    let d = features.output_dim();
    DMatrix::from_fn(features.len(), d, |i, a| f[i * d + a])
}

#[test]
fn evidence_peaks_near_generating_noise() {
    let (_, features) = torus_features(12, 8, 30);
    let truth = hyper(1.0, 0.8, Smoothness::Finite(1.5), 0.1);
    let y = sample_prior(&features, &truth, 21);
    let all: Vec<usize> = (0..features.len()).collect();
    let grid = [0.01, 0.03, 0.1, 0.3, 1.0];
    let lml: Vec<f64> = grid
        .iter()
        .map(|&s| RvgpModel::fit(&features, &all, &y, &MaternHyperparams { noise: s, ..truth }).unwrap().log_marginal_likelihood())
        .collect();
    let best = (0..grid.len()).max_by(|&a, &b| lml[a].total_cmp(&lml[b])).unwrap();
    assert_eq!(grid[best], 0.1, "{lml:?}");
    assert!(lml[0] < lml[1] && lml[1] < lml[2] && lml[2] > lml[3] && lml[3] > lml[4]);
}

#[test]
fn search_stays_in_bounds_and_beats_grid() {
    let (_, features) = torus_features(10, 6, 20);
    let truth = hyper(1.0, 0.6, Smoothness::Finite(1.5), 0.05);
    let y = sample_prior(&features, &truth, 3);
    let train: Vec<usize> = (0..features.len()).step_by(2).collect();
    let yt = DMatrix::from_fn(train.len(), 3, |r, c| y[(train[r], c)]);
    let mut config = SearchConfig::around(&MaternHyperparams::initial(0.3));
    config.sigma = (0.2, 5.0);
    config.kappa = (0.05, 4.0);
    config.noise = (1e-3, 0.5);
    let out = fit_hyperparameters(&features, &train, &yt, Smoothness::Finite(1.5), &config).unwrap();
    let h = out.hyper;
    assert!((0.2..=5.0).contains(&h.sigma) && (0.05..=4.0).contains(&h.kappa) && (1e-3..=0.5).contains(&h.noise));
    assert_eq!(out.grid.len(), 27);
    assert!(out.grid.iter().all(|(_, v)| out.log_marginal_likelihood >= *v));
    let again = fit_hyperparameters(&features, &train, &yt, Smoothness::Finite(1.5), &config).unwrap();
    assert_eq!(out, again);
    let refit = RvgpModel::fit(&features, &train, &yt, &h).unwrap();
    assert_eq!(refit.log_marginal_likelihood(), out.log_marginal_likelihood);
}

#[test]
fn search_rejects_bad_box() {
    let features = random_features(5, 13);
    let y = tangent_targets(&features, &[0, 1], 0);
    let mut config = SearchConfig::around(&MaternHyperparams::initial(1.0));
    config.kappa = (2.0, 1.0);
    assert!(fit_hyperparameters(&features, &[0, 1], &y, Smoothness::Finite(1.5), &config).is_err());
}

#[test]
fn search_recovers_lengthscale() {
    let (bundle, features) = torus_features(20, 10, 50);
    // unit edge weights put kappa in hop units; 3 hops makes the filter decay across the kept band
    let truth = hyper(1.0, 3.0, Smoothness::Finite(1.5), 0.01);
    let all: Vec<usize> = (0..features.len()).collect();
    let config = SearchConfig::around(&MaternHyperparams::initial(bundle.graph.mean_edge_length(&bundle.points)));
    for seed in 0..3 {
        let y = sample_prior(&features, &truth, seed);
        let out = fit_hyperparameters(&features, &all, &y, Smoothness::Finite(1.5), &config).unwrap();
        let ratio = out.hyper.kappa / truth.kappa;
        assert!((0.5..=2.0).contains(&ratio), "seed {seed}: recovered {:?}", out.hyper);
    }
}

#[test]
fn off_graph_extension() {
    let (bundle, features) = torus_features(16, 8, 30);
    let train: Vec<usize> = (0..features.len()).step_by(3).collect();
    let y = tangent_targets(&features, &train, 8);
    let model = RvgpModel::fit(&features, &train, &y, &hyper(1.0, 2.0, Smoothness::Finite(1.5), 0.01)).unwrap();
    let direct = model.predict(&[5]).unwrap();
    let via = model.predict_encodings(&[features.encoding(5).clone()]).unwrap();
    assert!((&direct.mean - &via.mean).abs().max() < 1e-12);

    let a = bundle.points.point(5);
    let b = bundle.points.point(6);
    let mid: Vec<f64> = a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect();
    let (frame, enc) = extend_encoding(&bundle.points, &features, &mid, 6).unwrap();
    let p = model.predict_encodings(&[enc]).unwrap();
    let v = p.mean.row(0).transpose();
    let normal = &v - &frame * (frame.transpose() * &v);
    assert!(normal.norm() <= 1e-10 * v.norm().max(1.0));
    assert!(extend_encoding(&bundle.points, &features, &mid[..2], 6).is_err());
    assert!(extend_encoding(&bundle.points, &features, &mid, 1).is_err());
}
