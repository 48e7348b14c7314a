use proptest::prelude::*;

use softpulse::matcore::{CMatrix, C64};
use softpulse::propagate::{integrate_exact, integrate_perturbative};
use softpulse::pulseshape::builtin;
use softpulse::sequences::{classify_order, parse_sequence, Axis, ClassifyOptions, IntervalCache, IntervalSpec, Sequence, Token};
use softpulse::spinmodel::{build_internal, Bond};
use softpulse::{ChainModel, ClusterSpec, Parity, PulseSchedule};

const STEPS: usize = 400;

fn matrix(dim: usize) -> impl Strategy<Value = CMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), dim * dim)
        .prop_map(move |v| CMatrix::from_vec(dim, v.into_iter().map(|(re, im)| C64::new(re, im)).collect()))
}

fn diff(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut d = a.clone();
    d.add_scaled(b, C64::new(-1.0, 0.0));
    d.frobenius_norm()
}

fn token() -> impl Strategy<Value = Token> {
    (prop::bool::ANY, prop::bool::ANY, prop::bool::ANY).prop_map(|(y, even, neg)| {
        Token::new(if y { Axis::Y } else { Axis::X }, if even { Parity::Even } else { Parity::Odd }, neg)
    })
}

fn interval() -> impl Strategy<Value = IntervalSpec> {
    prop_oneof![
        1 => Just(IntervalSpec::idle()),
        4 => token().prop_map(IntervalSpec::single),
        1 => (token(), token())
            .prop_filter("distinct sublattices", |(a, b)| a.parity != b.parity)
            .prop_map(|(a, b)| {
                let mut tokens = vec![a, b];
                tokens.sort_by_key(|t| t.parity);
                IntervalSpec { tokens }
            }),
    ]
}

fn sequence(max_len: usize) -> impl Strategy<Value = Sequence> {
    prop::collection::vec(interval(), 1..=max_len).prop_map(|intervals| Sequence { intervals })
}

fn model() -> impl Strategy<Value = ChainModel> {
    prop_oneof![
        (0.1f64..2.0).prop_map(ChainModel::ising),
        (0.1f64..2.0, 0.05f64..1.0).prop_map(|(jz, jp)| ChainModel::xxz(jz, jp)),
        (0.1f64..2.0, 0.1f64..2.0, 0u64..100).prop_map(|(jz, b, s)| ChainModel::bath(jz, b, s)),
    ]
}

proptest! {
    #[test]
    fn commutator_is_antisymmetric(a in matrix(4), b in matrix(4)) {
        let ab = a.commutator(&b);
        let ba = b.commutator(&a);
        prop_assert!(diff(&ab, &ba.scale_real(-1.0)) < 1e-12);
        prop_assert!(ab.trace().norm() < 1e-12);
    }

    #[test]
    fn kron_mixed_product(a in matrix(2), b in matrix(2), c in matrix(2), d in matrix(2)) {
        let lhs = a.kron(&b).matmul(&c.kron(&d));
        let rhs = a.matmul(&c).kron(&b.matmul(&d));
        prop_assert!(diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn adjoint_reverses_products(a in matrix(4), b in matrix(4)) {
        let lhs = a.matmul(&b).adjoint();
        let rhs = b.adjoint().matmul(&a.adjoint());
        prop_assert!(diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn sequence_notation_round_trips(seq in sequence(8)) {
        let text = seq.to_string();
        prop_assert_eq!(parse_sequence(&text).unwrap(), seq);
    }

    #[test]
    fn internal_hamiltonian_is_hermitian(m in model(), n in 1usize..=5, even in prop::bool::ANY) {
        let first = if even { Parity::Even } else { Parity::Odd };
        let h = build_internal(&m, &ClusterSpec::chain(n, first)).unwrap();
        prop_assert!(h.hermiticity_defect() < 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exact_evolution_stays_unitary(seq in sequence(4), m in model()) {
        let schedule = seq.bind(&builtin("S1").unwrap());
        let u = integrate_exact(&ClusterSpec::chain(3, Parity::Odd), &m, &schedule, STEPS).unwrap();
        prop_assert!(u.unitarity_defect() < 5e-9 * seq.len() as f64, "defect {}", u.unitarity_defect());
    }

    #[test]
    fn bare_propagator_is_unitary(seq in sequence(6)) {
        let schedule = seq.bind(&builtin("Q1").unwrap());
        let r = integrate_perturbative(&ClusterSpec::chain(2, Parity::Odd), &ChainModel::ising(1.0), &schedule, 1, STEPS).unwrap();
        // RK4 loses unitarity at O(h^5) per interval
        prop_assert!(r.u0().unitarity_defect() < 2e-9 * seq.len() as f64, "defect {}", r.u0().unitarity_defect());
    }

    #[test]
    fn corrections_are_homogeneous(seq in sequence(3), lambda in 0.2f64..3.0) {
        let schedule = seq.bind(&builtin("S1").unwrap());
        let cluster = ClusterSpec::chain(3, Parity::Odd);
        let base = ChainModel::xxz(1.0, 0.3);
        let r = integrate_perturbative(&cluster, &base, &schedule, 3, STEPS).unwrap().residual_norms();
        let s = integrate_perturbative(&cluster, &base.scaled(lambda), &schedule, 3, STEPS).unwrap().residual_norms();
        for (k, (a, b)) in r.iter().zip(&s).enumerate() {
            let want = a * lambda.powi(k as i32 + 1);
            prop_assert!((b - want).abs() <= 1e-7 * want.max(1e-12), "k={} {} vs {}", k + 1, b, want);
        }
    }

    #[test]
    fn first_order_is_additive_over_bonds(seq in sequence(3), m in model()) {
        let schedule = seq.bind(&builtin("S1").unwrap());
        let with = |w0: f64, w1: f64| {
            let cluster = ClusterSpec {
                n_sites: 3,
                first: Parity::Odd,
                bonds: vec![Bond { left: 0, weight: w0 }, Bond { left: 1, weight: w1 }],
            };
            integrate_perturbative(&cluster, &ChainModel { bath: None, ..m.clone() }, &schedule, 1, STEPS).unwrap().r.remove(0)
        };
        let mut sum = with(1.0, 0.0);
        sum.add_scaled(&with(0.0, 1.0), C64::new(1.0, 0.0));
        prop_assert!(diff(&with(1.0, 1.0), &sum) < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn order_is_invariant_under_sign_flip_and_relabeling(seq in sequence(2)) {
        let shape = builtin("S1").unwrap();
        let model = ChainModel::ising(1.0);
        let opts = ClassifyOptions { k_max: 3, steps: STEPS, ..Default::default() };
        let cache = IntervalCache::new();
        let order = |s: &Sequence| classify_order(s, &shape, &model, &opts, &cache).map(|r| r.order).ok();
        let base = order(&seq);
        prop_assert_eq!(order(&seq.map(Token::negated)), base);
        prop_assert_eq!(order(&seq.map(Token::relabeled)), base);
    }
}

#[test]
fn idle_schedule_has_no_bare_rotation() {
    let r = integrate_perturbative(&ClusterSpec::chain(2, Parity::Odd), &ChainModel::ising(1.0), &PulseSchedule::idle(2), 2, STEPS).unwrap();
    assert!(diff(&r.u0(), &CMatrix::identity(4)) < 1e-15);
}
