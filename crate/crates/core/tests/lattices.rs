use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twistcm::lattice_charclass::*;
use twistcm::lie_twist::*;
use twistcm::rational::{self, frac, q, QVec, Q};

const SUPPORTED: [(Family, usize, u32); 8] = [
    (Family::A, 2, 2),
    (Family::A, 3, 2),
    (Family::A, 4, 2),
    (Family::A, 5, 2),
    (Family::D, 4, 2),
    (Family::D, 5, 2),
    (Family::D, 4, 3),
    (Family::E6, 6, 2),
];

fn setup(family: Family, rank: usize, order: u32) -> (RootSystem, OuterAutomorphism) {
    let rs = build_root_system(family, rank).unwrap();
    let nu = build_outer(&rs, order).unwrap();
    (rs, nu)
}

fn gram_det(rs: &RootSystem, basis: &[QVec]) -> Q {
    let g: Vec<QVec> = basis.iter().map(|a| basis.iter().map(|b| rs.pair(a, b)).collect()).collect();
    rational::determinant(&g)
}

#[test]
fn upsilon_image_of_a3_weights_is_spanned_by_eta() {
    // N = 4: a single generator -(1/2, -1/2, -1/2, 1/2)
    let (rs, nu) = setup(Family::A, 3, 2);
    let image = upsilon_image(&weight_lattice(&rs), &nu).unwrap();
    let eta = IntegerLattice::span(4, &[vec![frac(-1, 2), frac(1, 2), frac(1, 2), frac(-1, 2)]]).unwrap();
    assert!(image.contains_lattice(&eta) && eta.contains_lattice(&image));
}

#[test]
fn upsilon_image_of_sl_weights_matches_eta_family() {
    for n_dim in [5usize, 6, 7] {
        let (rs, nu) = setup(Family::A, n_dim - 1, 2);
        let image = upsilon_image(&weight_lattice(&rs), &nu).unwrap();
        let count = if n_dim % 2 == 0 { n_dim / 2 - 1 } else { n_dim / 2 };
        let etas: Vec<QVec> = (1..=count)
            .map(|j| {
                let outer = frac(n_dim as i64 - 2 * j as i64, n_dim as i64);
                let inner = frac(-2 * j as i64, n_dim as i64);
                (0..n_dim).map(|i| if i < j || i >= n_dim - j { -outer } else { -inner }).collect()
            })
            .collect();
        let eta = IntegerLattice::span(n_dim, &etas).unwrap();
        assert!(image.contains_lattice(&eta) && eta.contains_lattice(&image), "N = {n_dim}");
    }
}

#[test]
fn orbit_sum_criterion_matches_rational_span() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for (family, rank, order) in SUPPORTED {
        let (rs, nu) = setup(family, rank, order);
        let image = upsilon_image(&weight_lattice(&rs), &nu).unwrap();
        let mut members = 0;
        for k in 0..200 {
            let x = rs.simple_roots.iter().fold(rational::zeros(rs.dim()), |acc, a| {
                rational::add(&acc, &rational::scale(frac(rng.random_range(-9..=9), rng.random_range(1..=6)), a))
            });
            // every other sample is pushed into the image by removing its average
            let x = if k % 2 == 0 { rational::sub(&x, &nu.average(&x)) } else { x };
            let in_span = rational::solve_in_basis(image.basis(), &x).is_some();
            assert_eq!(in_upsilon_span(&nu, &x), in_span, "{family}{rank}");
            members += usize::from(in_span);
        }
        assert!(members >= 100);
    }
}

#[test]
fn center_of_a2() {
    let rs = build_root_system(Family::A, 2).unwrap();
    let z = lattice_quotient(&weight_lattice(&rs), &root_lattice(&rs)).unwrap();
    assert_eq!(z.invariant_factors, vec![3]);
}

#[test]
fn quotient_by_diag_two_four() {
    let sup = IntegerLattice::from_basis(2, vec![vec![q(1), q(0)], vec![q(0), q(1)]]).unwrap();
    let sub = IntegerLattice::from_basis(2, vec![vec![q(2), q(0)], vec![q(0), q(4)]]).unwrap();
    let g = lattice_quotient(&sup, &sub).unwrap();
    assert_eq!(g.invariant_factors, vec![2, 4]);
    // the generators have exactly the stated orders modulo the sublattice
    for (gen, d) in g.generators.iter().zip(&g.invariant_factors) {
        for k in 1..*d {
            assert!(!sub.contains(&rational::scale(q(k), gen)));
        }
        assert!(sub.contains(&rational::scale(q(*d), gen)));
    }
}

#[test]
fn table_rows() {
    let a3 = char_class_group(Family::A, 3, 2).unwrap();
    assert_eq!((a3.twisted.invariant_factors.clone(), a3.center.invariant_factors.clone()), (vec![2], vec![4]));
    assert_eq!(a3.weight_generators, vec![1]);
    assert_eq!(a3.invariant_subalgebra, "C2");

    let a4 = char_class_group(Family::A, 4, 2).unwrap();
    assert_eq!(a4.twisted.invariant_factors, vec![5]);
    assert_eq!(a4.center.invariant_factors, vec![5]);
    assert_eq!(a4.weight_generators, vec![1]);

    let d4 = char_class_group(Family::D, 4, 3).unwrap();
    assert_eq!(d4.twisted.invariant_factors, vec![2, 2]);
    assert_eq!(d4.weight_generators, vec![1, 3]);
    assert_eq!(d4.invariant_subalgebra, "G2");

    let e6 = char_class_group(Family::E6, 6, 2).unwrap();
    assert_eq!(e6.twisted.invariant_factors, vec![3]);
    assert_eq!(e6.weight_generators, vec![1]);
}

#[test]
fn d_series_center_depends_on_parity() {
    for rank in 4..=7 {
        let row = char_class_group(Family::D, rank, 2).unwrap();
        assert_eq!(row.twisted.invariant_factors, vec![2]);
        assert_eq!(row.weight_generators, vec![rank - 1]);
        let expected = if rank % 2 == 1 { vec![4] } else { vec![2, 2] };
        assert_eq!(row.center.invariant_factors, expected, "D{rank}");
    }
}

#[test]
fn unsupported_pairs_are_rejected() {
    assert!(char_class_group(Family::A, 3, 3).is_err());
    assert!(char_class_group(Family::A, 1, 2).is_err());
    assert!(char_class_group(Family::D, 5, 3).is_err());
}

#[test]
fn group_orders_match_determinant_ratios() {
    for (family, rank, order) in SUPPORTED {
        let (rs, nu) = setup(family, rank, order);
        let row = char_class_group(family, rank, order).unwrap();
        assert_eq!(row.center.order() % row.twisted.order(), 0);
        let p_up = upsilon_image(&weight_lattice(&rs), &nu).unwrap();
        let q_up = upsilon_image(&root_lattice(&rs), &nu).unwrap();
        let ratio = gram_det(&rs, q_up.basis()) / gram_det(&rs, p_up.basis());
        assert_eq!(ratio, q(row.twisted.order() * row.twisted.order()), "{family}{rank}");
        let ratio = gram_det(&rs, &rs.simple_roots) / gram_det(&rs, &rs.fundamental_weights);
        assert_eq!(ratio, q(row.center.order() * row.center.order()));
    }
}

#[test]
fn weight_shift_solutions() {
    let (rs, nu) = setup(Family::A, 3, 2);
    let row = char_class_group(Family::A, 3, 2).unwrap();
    let generator = &row.twisted.generators[0];
    assert_eq!(weight_shift_solution(&rs, &nu, generator).unwrap(), WeightShift::Fundamental(1));
    assert_eq!(weight_shift_solution(&rs, &nu, &rational::zeros(4)).unwrap(), WeightShift::NoShift);

    let (rs, nu) = setup(Family::D, 5, 2);
    let eta = rational::unit(5, 4);
    assert_eq!(weight_shift_solution(&rs, &nu, &eta).unwrap(), WeightShift::Fundamental(4));
    let (rs, nu) = setup(Family::D, 4, 2);
    assert_eq!(weight_shift_solution(&rs, &nu, &rational::unit(4, 3)).unwrap(), WeightShift::Fundamental(3));
}

#[test]
fn invariant_lattice_quotients() {
    let expected = [
        ((Family::A, 3, 2), vec![2]),
        ((Family::A, 5, 2), vec![2]),
        ((Family::D, 5, 2), vec![2]),
        ((Family::A, 2, 2), vec![]),
        ((Family::A, 4, 2), vec![]),
        ((Family::D, 4, 3), vec![]),
        ((Family::E6, 6, 2), vec![]),
    ];
    for ((family, rank, order), factors) in expected {
        let (rs, nu) = setup(family, rank, order);
        let inv = invariant_lattices(&rs, &nu).unwrap();
        assert_eq!(inv.quotient.invariant_factors, factors, "{family}{rank}");
    }
}

#[test]
fn invariant_lattices_are_nu_stable_and_dual() {
    for (family, rank, order) in SUPPORTED {
        let (rs, nu) = setup(family, rank, order);
        let inv = invariant_lattices(&rs, &nu).unwrap();
        for lattice in [&inv.coweight_lattice, &inv.coroot_lattice] {
            let image = lattice.image(|v| nu.apply(v)).unwrap();
            assert!(image.contains_lattice(lattice) && lattice.contains_lattice(&image));
        }
        assert!(inv.coweight_lattice.contains_lattice(&inv.coroot_lattice));
        let folding = orbit_decompose(&rs, &nu);
        for (j, w) in inv.coweights.iter().enumerate() {
            for (k, a) in folding.simple.iter().enumerate() {
                assert_eq!(rs.pair(w, a), q(i64::from(j == k)));
            }
        }
        // invariant coweights are weights of g
        assert!(inv.coweights.iter().all(|w| weight_lattice(&rs).contains(w)));
    }
}

fn reducers() -> Vec<AlcoveReducer> {
    let mut out = Vec::new();
    for (family, rank, order) in SUPPORTED {
        let (rs, nu) = setup(family, rank, order);
        out.push(AlcoveReducer::new(&rs, &nu, ReductionFlavor::Coweight).unwrap());
        out.push(AlcoveReducer::new(&rs, &nu, ReductionFlavor::Coroot).unwrap());
    }
    out.push(AlcoveReducer::sl2n_lambda(1).unwrap());
    out.push(AlcoveReducer::sl2n_lambda(3).unwrap());
    out
}

fn random_point(dim: usize, rng: &mut ChaCha8Rng) -> Vec<C64> {
    (0..dim).map(|_| C64::new(rng.random_range(-3.0..3.0), rng.random_range(-2.0..2.0))).collect()
}

fn close(x: &[C64], y: &[C64], tol: f64) -> bool {
    x.iter().zip(y).all(|(a, b)| (a - b).norm() < tol)
}

#[test]
fn reduced_points_are_fixed() {
    let tau = C64::new(0.2, 1.1);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for reducer in reducers() {
        for _ in 0..20 {
            let u = random_point(reducer.dim(), &mut rng);
            let once = reducer.reduce(&u, tau).unwrap();
            let twice = reducer.reduce(&once.reduced, tau).unwrap();
            assert!(twice.transcript.is_empty(), "{:?}", twice.transcript);
            assert!(close(&twice.reduced, &once.reduced, 1e-13));
        }
    }
}

#[test]
fn transcript_restores_input() {
    let tau = C64::new(-0.3, 0.9);
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for reducer in reducers() {
        for _ in 0..20 {
            let u = random_point(reducer.dim(), &mut rng);
            let red = reducer.reduce(&u, tau).unwrap();
            assert!(close(&reducer.restore(&red, tau), &u, 1e-12));
        }
    }
}

#[test]
fn lattice_shifts_do_not_change_the_reduction() {
    let tau = C64::new(0.1, 1.3);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for reducer in reducers() {
        for _ in 0..20 {
            let u = random_point(reducer.dim(), &mut rng);
            let g1: Vec<i64> = (0..reducer.dim()).map(|_| rng.random_range(-3..=3)).collect();
            let g2: Vec<i64> = (0..reducer.dim()).map(|_| rng.random_range(-3..=3)).collect();
            let (s1, s2) = (reducer.lattice_vector(&g1), reducer.lattice_vector(&g2));
            let shifted: Vec<C64> = u.iter().zip(s1.iter().zip(&s2)).map(|(z, (a, b))| z + a + tau * b).collect();
            let r0 = reducer.reduce(&u, tau).unwrap();
            let r1 = reducer.reduce(&shifted, tau).unwrap();
            assert!(close(&r0.reduced, &r1.reduced, 1e-12), "{:?} vs {:?}", r0.reduced, r1.reduced);
        }
    }
}

#[test]
fn weyl_images_have_the_same_reduction() {
    let tau = C64::new(0.4, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    for reducer in reducers() {
        let nroots = reducer.positive_roots().len();
        for _ in 0..20 {
            let u = random_point(reducer.dim(), &mut rng);
            let (mut a, mut b) = AlcoveReducer::split(&u, tau);
            for _ in 0..4 {
                let k = rng.random_range(0..nroots);
                a = reducer.reflect_linear(k, &a);
                b = reducer.reflect_linear(k, &b);
            }
            let w_u = AlcoveReducer::join(&a, &b, tau);
            let r0 = reducer.reduce(&u, tau).unwrap();
            let r1 = reducer.reduce(&w_u, tau).unwrap();
            assert!(close(&r0.reduced, &r1.reduced, 1e-12));
        }
    }
}

#[test]
fn reduction_errors() {
    let reducer = AlcoveReducer::sl2n_lambda(2).unwrap();
    let u = vec![C64::new(0.1, 0.0); 2];
    assert!(matches!(reducer.reduce(&u, C64::new(0.0, -1.0)), Err(twistcm::Error::InvalidModulus(_))));
    assert!(matches!(reducer.reduce(&[C64::new(f64::NAN, 0.0), C64::new(0.0, 0.0)], C64::new(0.0, 1.0)), Err(twistcm::Error::NonFinite(_))));
    assert!(matches!(reducer.reduce(&u[..1], C64::new(0.0, 1.0)), Err(twistcm::Error::Dimension(_))));
    assert!(AlcoveReducer::sl2n_lambda(0).is_err());
}

#[test]
fn lambda_alcove_is_sorted_half_cube() {
    let reducer = AlcoveReducer::sl2n_lambda(3).unwrap();
    let red = reducer.reduce(&[C64::new(0.9, 0.0), C64::new(-0.3, 0.0), C64::new(2.2, 0.0)], C64::new(0.0, 1.0)).unwrap();
    let re: Vec<f64> = red.reduced.iter().map(|z| z.re).collect();
    assert!((re[0] - 0.3).abs() < 1e-12 && (re[1] - 0.2).abs() < 1e-12 && (re[2] - 0.1).abs() < 1e-12, "{re:?}");
}

proptest! {
    #[test]
    fn reduced_points_lie_in_the_domain(re in proptest::collection::vec(-5.0f64..5.0, 2), im in proptest::collection::vec(-3.0f64..3.0, 2)) {
        let (rs, nu) = setup(Family::A, 3, 2);
        let reducer = AlcoveReducer::new(&rs, &nu, ReductionFlavor::Coroot).unwrap();
        let tau = C64::new(0.25, 1.2);
        let u: Vec<C64> = re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b)).collect();
        let red = reducer.reduce(&u, tau).unwrap();
        let (a, b) = AlcoveReducer::split(&red.reduced, tau);
        prop_assert!(reducer.in_closed_alcove(&a));
        prop_assert!(reducer.lattice_coordinates(&b).iter().all(|c| *c > -1e-9 && *c < 1.0));
    }
}
