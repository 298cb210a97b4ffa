mod common;

use proptest::prelude::*;
use wicnode::conelab::{wwic_witness_2x2, WitnessOutcome, WITNESS_TOL};
use wicnode::densela::{eig2x2, induced_norm, matrix_measure, DenseMatrix, DenseVector, PNorm};
use wicnode::lipnet::{activation_jacobian_norm, ActivationKind, LipschitzNet};
use wicnode::wicfield::{certify_wic, SamplingBox, Weighting, WicField};

use common::{random_net, ACTIVATIONS};

fn square(n: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-2.0f64..=2.0, n * n).prop_map(move |v| DenseMatrix::new(n, n, v).unwrap())
}

fn pair() -> impl Strategy<Value = (DenseMatrix, DenseMatrix)> {
    (1usize..6).prop_flat_map(|n| (square(n), square(n)))
}

fn norm() -> impl Strategy<Value = PNorm> {
    prop_oneof![Just(PNorm::One), Just(PNorm::Inf)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn positive_homogeneity((a, _) in pair(), alpha in 0.0f64..5.0, p in norm()) {
        let lhs = matrix_measure(&a.scale(alpha), p).unwrap();
        let rhs = alpha * matrix_measure(&a, p).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
    }

    #[test]
    fn subadditivity((a, b) in pair(), p in norm()) {
        let s = matrix_measure(&a.add(&b).unwrap(), p).unwrap();
        prop_assert!(s <= matrix_measure(&a, p).unwrap() + matrix_measure(&b, p).unwrap() + 1e-12);
    }

    #[test]
    fn bounded_by_norm((a, _) in pair(), p in norm()) {
        let (mu, n) = (matrix_measure(&a, p).unwrap(), induced_norm(&a, p).unwrap());
        prop_assert!(-n <= mu && mu <= n);
    }

    #[test]
    fn shift_invariance((a, _) in pair(), alpha in -5.0f64..5.0, p in norm()) {
        let lhs = matrix_measure(&a.shift_diagonal(alpha), p).unwrap();
        let rhs = matrix_measure(&a, p).unwrap() + alpha;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs() + alpha.abs()));
    }

    #[test]
    fn lipschitz_in_the_matrix((a, b) in pair(), p in norm()) {
        let gap = (matrix_measure(&a, p).unwrap() - matrix_measure(&b, p).unwrap()).abs();
        prop_assert!(gap <= induced_norm(&a.sub(&b).unwrap(), p).unwrap() + 1e-12);
    }

    #[test]
    fn dominates_spectral_abscissa(a in square(2), p in prop_oneof![Just(PNorm::One), Just(PNorm::Two), Just(PNorm::Inf)]) {
        prop_assert!(matrix_measure(&a, p).unwrap() >= eig2x2(&a).unwrap().max_real_part() - 1e-12);
    }

    #[test]
    fn transpose_swaps_one_and_inf((a, _) in pair()) {
        prop_assert_eq!(induced_norm(&a, PNorm::One).unwrap(), induced_norm(&a.transpose(), PNorm::Inf).unwrap());
        prop_assert_eq!(matrix_measure(&a, PNorm::One).unwrap(), matrix_measure(&a.transpose(), PNorm::Inf).unwrap());
    }

    #[test]
    fn definitional_limit((a, _) in pair(), p in norm()) {
        let h = 1e-6;
        let n = a.rows();
        let limit = (induced_norm(&DenseMatrix::identity(n).add(&a.scale(h)).unwrap(), p).unwrap() - 1.0) / h;
        let norm = induced_norm(&a, p).unwrap();
        prop_assert!((matrix_measure(&a, p).unwrap() - limit).abs() <= 10.0 * norm * norm * h + 1e-9);
    }

    #[test]
    fn saturated_activations(v in prop::collection::vec(-5.0f64..5.0, 1..8), k in 0usize..3, p in norm()) {
        let kind = ACTIVATIONS[k];
        prop_assume!(v.iter().all(|x| x.abs() > 1e-9));
        let n = activation_jacobian_norm(kind, &DenseVector::new(v.clone()).unwrap(), p).unwrap();
        let computed = induced_norm(&kind.jacobian(&v), p).unwrap();
        if kind.saturates(p) {
            prop_assert_eq!(n, 1.0);
            prop_assert!((computed - 1.0).abs() <= 1e-15);
        } else {
            prop_assert!(computed <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn witness_duality(a in square(2)) {
        let ok = |m: &DenseMatrix, p| match wwic_witness_2x2(m, p) {
            Ok(WitnessOutcome::Found(w)) => w.achieved_mu <= WITNESS_TOL,
            _ => false,
        };
        prop_assert_eq!(ok(&a, PNorm::One), ok(&a.transpose(), PNorm::Inf));
    }
}

#[test]
fn bound_dominates_sampled_jacobians() {
    for seed in 0..100u64 {
        let p = if seed % 2 == 0 { PNorm::One } else { PNorm::Inf };
        let act = ACTIVATIONS[(seed % 3) as usize];
        let width = 2 + (seed as usize * 7) % 15;
        let dims: Vec<usize> = match seed % 3 {
            0 => vec![3, width, 2],
            1 => vec![3, width, width / 2 + 1, 2],
            _ => vec![3, width, 4, width, 2],
        };
        let net = random_net(seed, &dims, act, p);
        let bound = net.lipschitz_bound(p).unwrap();
        let emp = net.empirical_lipschitz(p, 1000, 3.0, seed).unwrap();
        assert!(emp <= bound + 1e-9, "seed {seed}: {emp} > {bound}");
    }
}

#[test]
fn forward_map_respects_the_bound() {
    use rand::Rng;
    let mut rng = wicnode::seed::stream_rng(3, 0);
    for (i, act) in ACTIVATIONS.iter().enumerate() {
        for p in [PNorm::One, PNorm::Inf] {
            let net = random_net(40 + i as u64, &[3, 10, 3], *act, p);
            let bound = net.lipschitz_bound(p).unwrap();
            for _ in 0..1000 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
                let y: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
                let fx = net.forward(&x);
                let fy = net.forward(&y);
                let lhs = p.vector_norm(&fx.iter().zip(&fy).map(|(a, b)| a - b).collect::<Vec<_>>());
                let rhs = bound * p.vector_norm(&x.iter().zip(&y).map(|(a, b)| a - b).collect::<Vec<_>>());
                assert!(lhs <= rhs + 1e-9);
            }
        }
    }
}

#[test]
fn identity_weight_matches_unweighted_certificate() {
    let net = random_net(7, &[3, 8, 3], ActivationKind::SinSplit, PNorm::Inf);
    let f = WicField::new(net, 0.1, PNorm::Inf, Weighting::Identity).unwrap();
    let eye = DenseMatrix::identity(f.dim());
    let a = certify_wic(&f, PNorm::Inf, None, SamplingBox::new(4.0), 500, 2).unwrap();
    let b = certify_wic(&f, PNorm::Inf, Some(&eye), SamplingBox::new(4.0), 500, 2).unwrap();
    assert_eq!(a, b);
}

#[test]
fn trained_parameters_stay_contracting() {
    let net = LipschitzNet::init(&[2, 6, 2], ActivationKind::CRelu, PNorm::One, 3).unwrap();
    let f = WicField::new(net, 0.2, PNorm::One, Weighting::DiagPositive { log_diag: vec![0.3, -0.4] }).unwrap();
    let wild: Vec<f64> = f.params().iter().enumerate().map(|(i, v)| v * 40.0 + (i as f64).sin()).collect();
    let g = f.with_params(&wild).unwrap();
    let rep = g.certify(SamplingBox::new(6.0), 2000, 1).unwrap();
    assert!(rep.max_mu <= -0.2 + 1e-9);
}
