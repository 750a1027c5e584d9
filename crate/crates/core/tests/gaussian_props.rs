use fsvi_core::gaussian::{kl_divergence, pushforward_linear, GaussianDist};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn spd(dim: usize, entries: &[f64], ridge: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(dim, dim, |i, j| entries[i * dim + j]);
    &a * a.transpose() + DMatrix::identity(dim, dim) * ridge
}

prop_compose! {
    fn gaussian(dim: usize)(
        mean in prop::collection::vec(-2.0..2.0f64, dim),
        entries in prop::collection::vec(-1.0..1.0f64, dim * dim),
        ridge in 0.1..1.0f64,
    ) -> GaussianDist {
        GaussianDist::new_full(DVector::from_vec(mean), spd(dim, &entries, ridge)).unwrap()
    }
}

fn pair() -> impl Strategy<Value = (GaussianDist, GaussianDist)> {
    (1usize..5).prop_flat_map(|d| (gaussian(d), gaussian(d)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_is_nonnegative_and_zero_on_the_diagonal((q, p) in pair()) {
        prop_assert!(kl_divergence(&q, &p).unwrap() >= -1e-10);
        prop_assert!(kl_divergence(&q, &q).unwrap().abs() < 1e-10);
    }

    #[test]
    fn invertible_maps_preserve_kl(
        (q, p) in pair(),
        entries in prop::collection::vec(-1.0..1.0f64, 16),
    ) {
        let d = q.dim();
        let map = spd(d, &entries, 0.5);
        let direct = kl_divergence(&q, &p).unwrap();
        let mapped = kl_divergence(&pushforward_linear(&q, &map).unwrap(), &pushforward_linear(&p, &map).unwrap()).unwrap();
        prop_assert!((direct - mapped).abs() <= 1e-8 * direct.abs().max(1.0));
    }

    #[test]
    fn projections_do_not_increase_kl((q, p) in pair(), keep in 1usize..5) {
        let d = q.dim();
        let keep = keep.min(d);
        let map = DMatrix::from_fn(keep, d, |i, j| if i == j { 1.0 } else { 0.0 });
        let full = kl_divergence(&q, &p).unwrap();
        let marginal = kl_divergence(&pushforward_linear(&q, &map).unwrap(), &pushforward_linear(&p, &map).unwrap()).unwrap();
        prop_assert!(marginal <= full + 1e-9);
    }

    #[test]
    fn diagonal_and_dense_paths_agree(
        m1 in prop::collection::vec(-2.0..2.0f64, 3),
        v1 in prop::collection::vec(0.1..3.0f64, 3),
        m2 in prop::collection::vec(-2.0..2.0f64, 3),
        v2 in prop::collection::vec(0.1..3.0f64, 3),
    ) {
        let qd = GaussianDist::new_diagonal(DVector::from_vec(m1.clone()), DVector::from_vec(v1.clone())).unwrap();
        let pd = GaussianDist::new_diagonal(DVector::from_vec(m2.clone()), DVector::from_vec(v2.clone())).unwrap();
        let qf = GaussianDist::new_full(DVector::from_vec(m1), DMatrix::from_diagonal(&DVector::from_vec(v1))).unwrap();
        let pf = GaussianDist::new_full(DVector::from_vec(m2), DMatrix::from_diagonal(&DVector::from_vec(v2))).unwrap();
        let a = kl_divergence(&qd, &pd).unwrap();
        let b = kl_divergence(&qf, &pf).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }
}

#[test]
fn univariate_closed_form() {
    // KL(N(1, 4) || N(0, 1)) = 0.5 (4 + 1 - 1 - ln 4)
    let q = GaussianDist::new_full(DVector::from_element(1, 1.0), DMatrix::from_element(1, 1, 4.0)).unwrap();
    let p = GaussianDist::standard(1);
    let expected = 0.5 * (4.0 + 1.0 - 1.0 - 4f64.ln());
    assert!((kl_divergence(&q, &p).unwrap() - expected).abs() < 1e-14);
}
