use nodal_lab::grid::{assemble_laplacian, build_domain, DomainKind};
use nodal_lab::io::{f64s_from_le_bytes, f64s_to_le_bytes, pack_bits, unpack_bits};
use nodal_lab::nodal::{extract_nodal_domains, squared_distance_transform};
use nodal_lab::poincare::poincare_1d;
use proptest::prelude::*;

fn brute_force_sq_distance(shape: [usize; 2], features: &[bool], node: usize) -> f64 {
    let (i, j) = (node / shape[1], node % shape[1]);
    features
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(k, _)| {
            let (a, b) = (k / shape[1], k % shape[1]);
            (a as f64 - i as f64).powi(2) + (b as f64 - j as f64).powi(2)
        })
        .fold(f64::INFINITY, f64::min)
}

proptest! {
    #[test]
    fn bitset_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..300)) {
        let packed = pack_bits(&bits);
        prop_assert_eq!(unpack_bits(&packed, bits.len()).unwrap(), bits);
    }

    #[test]
    fn f64_bytes_round_trip(xs in proptest::collection::vec(any::<f64>(), 0..50)) {
        let back = f64s_from_le_bytes(&f64s_to_le_bytes(&xs)).unwrap();
        prop_assert_eq!(back.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), xs.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
    }

    #[test]
    fn distance_transform_matches_brute_force(
        rows in 1usize..14, cols in 1usize..14, seed in proptest::collection::vec(any::<bool>(), 196)
    ) {
        let features: Vec<bool> = seed[..rows * cols].to_vec();
        prop_assume!(features.iter().any(|&f| f));
        let dt = squared_distance_transform(&[rows, cols], &features, false);
        for node in 0..rows * cols {
            prop_assert_eq!(dt[node], brute_force_sq_distance([rows, cols], &features, node));
        }
    }

    #[test]
    fn one_dimensional_lemma_holds(u in proptest::collection::vec(-10.0f64..10.0, 3..60), z in 0usize..60, a in -2.0f64..2.0, len in 0.1f64..5.0) {
        let zero = z % u.len();
        let mut u = u;
        u[zero] = 0.0;
        let r = poincare_1d(&u, a, a + len, zero).unwrap();
        prop_assert!(r.holds(1e-9));
    }

    #[test]
    fn energy_nonnegative_and_domains_partition_support(phi in proptest::collection::vec(-1.0f64..1.0, 49)) {
        let d = build_domain(DomainKind::Square, 9, 1.0).unwrap();
        prop_assert_eq!(d.active_count(), phi.len());
        let op = assemble_laplacian(&d);
        prop_assert!(op.dirichlet_energy(&phi).unwrap() >= 0.0);
        let dec = extract_nodal_domains(&phi, &d).unwrap();
        let labelled: usize = dec.domains().iter().map(|dom| dom.node_count()).sum();
        prop_assert_eq!(labelled, phi.iter().filter(|&&v| v != 0.0).count());
    }
}
