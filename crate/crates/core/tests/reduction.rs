mod common;

use common::{linf, norm_inf, spin_up};
use hjbpod::deim::{nonlinearity_snapshots, DeimInterpolant, DeimOperator};
use hjbpod::linalg::Matrix;
use hjbpod::pod::{numerical_rank, PodBasis};
use hjbpod::snapshot::SnapshotSet;
use hjbpod::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn to_nalgebra(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

#[test]
fn snapshot_columns_have_zero_mean() {
    let (_, set) = spin_up(12, 40, 2.0);
    let y = set.fluctuations();
    let scale = 1e-12 * set.len() as f64 * norm_inf(set.mean());
    for i in 0..y.nrows() {
        let s: f64 = (0..y.ncols()).map(|j| y[(i, j)]).sum();
        assert!(s.abs() <= scale);
    }
}

#[test]
fn singular_values_match_independent_svd() {
    let (_, set) = spin_up(10, 30, 3.0);
    let basis = PodBasis::compute(&set, 4).unwrap();
    let oracle = to_nalgebra(set.fluctuations()).singular_values();
    let mut expected: Vec<f64> = oracle.iter().copied().collect();
    expected.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let sigma = basis.singular_values();
    assert_eq!(sigma.len(), expected.len());
    for (s, e) in sigma.iter().zip(&expected) {
        assert!((s - e).abs() <= 1e-10 * expected[0], "{s} vs {e}");
    }
}

#[test]
fn gram_matrix_is_identity() {
    let (_, set) = spin_up(12, 40, 4.0);
    for ell in [1, 3, 8] {
        let basis = PodBasis::compute(&set, ell).unwrap();
        assert!(basis.orthonormality_defect() <= 1e-10);
    }
}

#[test]
fn truncation_error_equals_discarded_energy() {
    let (_, set) = spin_up(12, 40, 4.0);
    for ell in [1, 2, 3, 5] {
        let basis = PodBasis::compute(&set, ell).unwrap();
        let mut err = 0.0;
        for j in 0..set.len() {
            let y = set.snapshot(j);
            let r = basis.reconstruct(&basis.project(&y).unwrap()).unwrap();
            err += y.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        let discarded = basis.discarded_energy();
        let total: f64 = basis.singular_values().iter().map(|s| s * s).sum();
        assert!(
            (err - discarded).abs() <= 1e-8 * total,
            "ell {ell}: {err} vs {discarded}"
        );
    }
}

#[test]
fn full_rank_reconstruction_is_exact() {
    let (_, set) = spin_up(10, 20, 2.0);
    let probe = PodBasis::compute(&set, 1).unwrap();
    let rank = numerical_rank(probe.singular_values());
    assert!(rank >= 10 && rank < set.len());
    let basis = PodBasis::compute(&set, rank).unwrap();
    for j in 0..set.len() {
        let y = set.snapshot(j);
        let r = basis.reconstruct(&basis.project(&y).unwrap()).unwrap();
        assert!(linf(&y, &r) <= 1e-8 * norm_inf(&y));
    }
    let err = PodBasis::compute(&set, set.len() + 1).unwrap_err();
    assert!(matches!(err, Error::RankDeficient { .. }));
    assert!(err.to_string().contains("sigma") || err.to_string().contains("σ"));
}

#[test]
fn basis_is_deterministic_and_roundtrips() {
    let (_, set) = spin_up(10, 20, 2.0);
    let a = PodBasis::compute(&set, 3).unwrap();
    assert_eq!(a, PodBasis::compute(&set, 3).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let bp = dir.path().join("basis.txt");
    let sp = dir.path().join("snapshots.txt");
    a.save(&bp).unwrap();
    set.save(&sp).unwrap();
    assert_eq!(PodBasis::<f64>::load(&bp).unwrap(), a);
    let back: SnapshotSet<f64> = SnapshotSet::load(&sp).unwrap();
    assert_eq!(back.fluctuations(), set.fluctuations());
    assert_eq!(back.mean(), set.mean());
    assert_eq!(back.times(), set.times());
}

fn nonlinear_snapshots(n: usize, count: usize) -> (hjbpod::flow::FlowModel<f64>, SnapshotSet<f64>, Matrix<f64>) {
    let (model, set) = spin_up(n, count, 2.0);
    let fields: Vec<Vec<f64>> = (0..set.len()).map(|j| set.snapshot(j)).collect();
    let g = nonlinearity_snapshots(&model, fields.iter().map(Vec::as_slice)).unwrap();
    (model, set, g)
}

#[test]
fn deim_is_exact_on_its_span() {
    let (_, _, g) = nonlinear_snapshots(12, 40);
    let deim = DeimInterpolant::from_snapshots(&g, 6).unwrap();
    let u = deim.basis();
    let mut idx = deim.indices().to_vec();
    idx.sort_unstable();
    idx.dedup();
    assert_eq!(idx.len(), 6);
    for c in [[1.0, -0.5, 0.25, 2.0, 0.0, -1.5], [0.3, 0.0, 0.0, 0.0, 1.0, 0.7]] {
        let v = u.matvec(&c);
        let r = deim.reconstruct(&v).unwrap();
        assert!(linf(&v, &r) <= 1e-10 * norm_inf(&v).max(1.0));
    }
}

#[test]
fn deim_reproduces_selected_rows() {
    let (_, _, g) = nonlinear_snapshots(12, 40);
    let deim = DeimInterpolant::from_snapshots(&g, 6).unwrap();
    let v: Vec<f64> = (0..g.nrows()).map(|k| ((k * 7 % 13) as f64 - 6.0) / 3.0).collect();
    let r = deim.reconstruct(&v).unwrap();
    for &p in deim.indices() {
        assert!((r[p] - v[p]).abs() <= 1e-10 * norm_inf(&v));
    }
}

#[test]
fn full_rank_deim_matches_galerkin_nonlinearity() {
    let (_, set, g) = nonlinear_snapshots(10, 20);
    let mut rank = 0;
    let sv = to_nalgebra(&g).singular_values();
    let smax = sv.iter().fold(0.0f64, |m, &s| m.max(s));
    for &s in sv.iter() {
        if s >= 1e-12 * smax {
            rank += 1;
        }
    }
    let deim = DeimInterpolant::from_snapshots(&g, rank).unwrap();
    let basis = PodBasis::compute(&set, 3).unwrap();
    let op: DeimOperator<f64> = deim.operator(basis.modes()).unwrap();
    for j in 0..g.ncols() {
        let eta = g.col(j);
        let samples: Vec<f64> = op.indices().iter().map(|&p| eta[p]).collect();
        let approx = op.apply(&samples).unwrap();
        let exact = basis.modes().tr_matvec(eta);
        assert!(
            linf(&approx, &exact) <= 1e-8 * norm_inf(&exact).max(1.0),
            "snapshot {j}"
        );
    }
}

#[test]
fn deim_operator_roundtrips() {
    let (_, set, g) = nonlinear_snapshots(10, 20);
    let basis = PodBasis::compute(&set, 3).unwrap();
    let op = DeimInterpolant::from_snapshots(&g, 6)
        .unwrap()
        .operator(basis.modes())
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("deim.txt");
    op.save(&p).unwrap();
    assert_eq!(DeimOperator::<f64>::load(&p).unwrap(), op);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_then_reconstruction_is_a_projector(c in prop::collection::vec(-3.0f64..3.0, 4), noise in prop::collection::vec(-1.0f64..1.0, 180)) {
        let (_, set) = spin_up(10, 20, 2.0);
        let basis = PodBasis::compute(&set, 4).unwrap();
        let y: Vec<f64> = basis.reconstruct(&c).unwrap().iter().zip(noise.iter().cycle()).map(|(a, b)| a + 0.1 * b).collect();
        let w = basis.project(&y).unwrap();
        let w2 = basis.project(&basis.reconstruct(&w).unwrap()).unwrap();
        for (a, b) in w.iter().zip(&w2) {
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn deim_interpolates_any_vector_at_its_rows(v in prop::collection::vec(-5.0f64..5.0, 180)) {
        let basis = Matrix::from_columns(180, &[
            (0..180).map(|k| (k as f64 * 0.1).sin()).collect(),
            (0..180).map(|k| (k as f64 * 0.05).cos()).collect(),
            (0..180).map(|k| ((k % 17) as f64 - 8.0) / 10.0).collect(),
        ]).unwrap();
        let q = hjbpod::linalg::householder_qr(&basis).0;
        let deim = DeimInterpolant::new(q).unwrap();
        let r = deim.reconstruct(&v).unwrap();
        for &p in deim.indices() {
            prop_assert!((r[p] - v[p]).abs() <= 1e-9 * (1.0 + v[p].abs()));
        }
    }
}
