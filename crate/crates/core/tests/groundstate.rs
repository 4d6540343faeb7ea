use ealab::disorder::{CouplingField, FieldTag, Stream};
use ealab::groundstate::{
    check_gs_criterion, constrained_solve, energy, solve, BoundaryCondition, Constraint, FixedLayer, Method,
    SpinConfig,
};
use ealab::lattice::{BoxLattice, Topology};
use proptest::prelude::*;

fn lattice(dims: &[usize], topo: &str) -> BoxLattice {
    BoxLattice::with_dims(dims, Topology::parse(topo, dims.len()).unwrap()).unwrap()
}

/// Minimum over all 2^n configurations, straight from the definition.
fn brute_force(l: &BoxLattice, j: &CouplingField, bc: &BoundaryCondition, keep: impl Fn(&SpinConfig) -> bool) -> f64 {
    let n = l.n_vertices();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        let s = SpinConfig::from_spins((0..n).map(|v| if mask >> v & 1 == 1 { -1 } else { 1 }).collect());
        if keep(&s) {
            best = best.min(energy(l, j, &s, bc).unwrap());
        }
    }
    best
}

fn random_layer(l: &BoxLattice, seed: u64) -> FixedLayer {
    let n = l.boundary_slots().len();
    let spins = Stream::new(seed, 0, FieldTag::LayerA).signs(n);
    let couplings = Stream::new(seed, 0, FieldTag::LayerCouplings).normals(n);
    FixedLayer::new(spins, couplings)
}

fn frustrated_square() -> (BoxLattice, CouplingField) {
    let l = lattice(&[2, 2], "open");
    let j = CouplingField::from_values(&l, vec![1.0, 0.5, 2.0, -1.5]).unwrap();
    (l, j)
}

#[test]
fn frustrated_square_ground_state() {
    let (l, j) = frustrated_square();
    // the 0.5 coupling sits on edge 1
    assert_eq!(l.edge(1).a, 0);
    assert_eq!(l.edge(1).b, 2);
    let bc = BoundaryCondition::Free;
    let oracle = brute_force(&l, &j, &bc, |_| true);
    assert_eq!(oracle, -4.0);
    for m in [Method::Enumeration, Method::ColumnDp, Method::Auto] {
        let r = solve(&l, &j, &bc, m).unwrap();
        assert_eq!(r.energy, -4.0);
        assert_eq!(r.config.edge_value(&l, 1), -1);
        assert_eq!(r.config.spin(0), 1);
        let plus = constrained_solve(&l, &j, &bc, &Constraint::edge(1, 1), m).unwrap();
        let minus = constrained_solve(&l, &j, &bc, &Constraint::edge(1, -1), m).unwrap();
        assert_eq!(plus.energy, brute_force(&l, &j, &bc, |s| s.edge_value(&l, 1) == 1));
        assert_eq!(plus.energy, -3.0);
        assert_eq!(minus.energy, -4.0);
    }
}

#[test]
fn ferromagnet_is_aligned() {
    for (dims, topo) in [(vec![3, 3], "open"), (vec![4, 4], "periodic"), (vec![5], "open"), (vec![3, 3, 2], "open")] {
        let l = lattice(&dims, topo);
        let j = CouplingField::constant(&l, 1.0);
        let r = solve(&l, &j, &BoundaryCondition::natural(&l), Method::Auto).unwrap();
        assert_eq!(r.energy, -(l.n_edges() as f64));
        assert!(r.config.spins().iter().all(|&s| s == 1));
        let c = constrained_solve(&l, &j, &BoundaryCondition::natural(&l), &Constraint::edge(0, 1), Method::Auto).unwrap();
        assert_eq!(c.config, r.config);
    }
}

#[test]
fn solvers_agree_with_brute_force() {
    let cases: Vec<(Vec<usize>, &str, BoundaryCondition)> = vec![
        (vec![3, 3], "open", BoundaryCondition::Free),
        (vec![3, 4], "open", BoundaryCondition::Free),
        (vec![4, 3], "periodic", BoundaryCondition::Periodic),
        (vec![3, 3], "periodic", BoundaryCondition::Antiperiodic { axis: 1 }),
        (vec![4, 3], "periodic,open", BoundaryCondition::Periodic),
        (vec![4, 3], "periodic,open", BoundaryCondition::Antiperiodic { axis: 0 }),
        (vec![3, 4], "open,periodic", BoundaryCondition::Antiperiodic { axis: 1 }),
        (vec![7], "open", BoundaryCondition::Free),
        (vec![7], "periodic", BoundaryCondition::Antiperiodic { axis: 0 }),
    ];
    for (i, (dims, topo, bc)) in cases.iter().enumerate() {
        let l = lattice(dims, topo);
        for seed in 0..20u64 {
            let j = CouplingField::sample(&l, 1000 * i as u64 + seed);
            let oracle = brute_force(&l, &j, bc, |_| true);
            let en = solve(&l, &j, bc, Method::Enumeration).unwrap();
            let dp = solve(&l, &j, bc, Method::ColumnDp).unwrap();
            assert!((en.energy - oracle).abs() < 1e-12, "{dims:?} {topo} {bc}");
            assert!((dp.energy - oracle).abs() < 1e-12, "{dims:?} {topo} {bc}");
            assert_eq!(en.config, dp.config, "{dims:?} {topo} {bc} seed {seed}");
            assert_eq!(en.config.spin(0), 1);
            assert!((en.gap.unwrap() - dp.gap.unwrap()).abs() < 1e-9);
        }
    }
}

#[test]
fn fixed_boundary_matches_brute_force() {
    for dims in [vec![3, 3], vec![2, 4], vec![6]] {
        let l = lattice(&dims, "open");
        for seed in 0..15u64 {
            let j = CouplingField::sample(&l, seed);
            let bc = BoundaryCondition::Fixed(random_layer(&l, seed));
            let oracle = brute_force(&l, &j, &bc, |_| true);
            let en = solve(&l, &j, &bc, Method::Enumeration).unwrap();
            let dp = solve(&l, &j, &bc, Method::ColumnDp).unwrap();
            assert!((en.energy - oracle).abs() < 1e-12);
            assert_eq!(en.config, dp.config);
        }
    }
    let l = lattice(&[4, 3], "periodic,open");
    let bc = BoundaryCondition::Fixed(random_layer(&l, 5));
    let j = CouplingField::sample(&l, 5);
    let oracle = brute_force(&l, &j, &bc, |_| true);
    assert!((solve(&l, &j, &bc, Method::ColumnDp).unwrap().energy - oracle).abs() < 1e-12);
}

#[test]
fn constraints_match_brute_force() {
    let l = lattice(&[3, 3], "periodic");
    let bc = BoundaryCondition::Periodic;
    for seed in 0..10u64 {
        let j = CouplingField::sample(&l, seed);
        for e in [0usize, 5, 17] {
            for s in [1i8, -1] {
                let oracle = brute_force(&l, &j, &bc, |c| c.edge_value(&l, e) == s);
                for m in [Method::Enumeration, Method::ColumnDp] {
                    let r = constrained_solve(&l, &j, &bc, &Constraint::edge(e, s), m).unwrap();
                    assert!((r.energy - oracle).abs() < 1e-12);
                    assert_eq!(r.config.edge_value(&l, e), s);
                }
            }
        }
        let pins = vec![(4usize, -1i8), (7, 1)];
        let oracle = brute_force(&l, &j, &bc, |c| c.spin(4) == -1 && c.spin(7) == 1);
        for m in [Method::Enumeration, Method::ColumnDp] {
            let r = constrained_solve(&l, &j, &bc, &Constraint::PinnedSpins(pins.clone()), m).unwrap();
            assert!((r.energy - oracle).abs() < 1e-12);
        }
    }
}

#[test]
fn infeasible_pins_are_reported() {
    let (l, j) = frustrated_square();
    let c = Constraint::PinnedSpins(vec![(0, 1), (0, -1)]);
    assert!(constrained_solve(&l, &j, &BoundaryCondition::Free, &c, Method::Enumeration).is_err());
    assert!(constrained_solve(&l, &j, &BoundaryCondition::Free, &c, Method::ColumnDp).is_err());
}

#[test]
fn size_limits() {
    let big = lattice(&[6, 6], "open");
    let j = CouplingField::sample(&big, 1);
    assert!(solve(&big, &j, &BoundaryCondition::Free, Method::Enumeration).is_err());
    assert!(solve(&big, &j, &BoundaryCondition::Free, Method::ColumnDp).is_ok());
    let wide = lattice(&[13, 2], "open");
    let j = CouplingField::sample(&wide, 1);
    assert!(solve(&wide, &j, &BoundaryCondition::Free, Method::ColumnDp).is_err());
    let cube = lattice(&[2, 2, 2], "open");
    let j = CouplingField::sample(&cube, 1);
    assert!(solve(&cube, &j, &BoundaryCondition::Free, Method::ColumnDp).is_err());
    assert!(solve(&cube, &j, &BoundaryCondition::Free, Method::Auto).is_ok());
}

#[test]
fn criterion_holds_for_solver_output_and_fails_after_a_flip() {
    let l = lattice(&[4, 4], "open");
    for seed in 0..100u64 {
        let j = CouplingField::sample(&l, seed);
        let r = solve(&l, &j, &BoundaryCondition::Free, Method::Auto).unwrap();
        let rep = check_gs_criterion(&l, &j, &r.config, &BoundaryCondition::Free, 4).unwrap();
        assert!(rep.pass, "seed {seed}: {rep:?}");
        let mut bad = r.config.clone();
        bad.flip(5);
        let rep = check_gs_criterion(&l, &j, &bad, &BoundaryCondition::Free, 1).unwrap();
        // the flipped spin's local field now opposes it unless it was exactly zero
        assert!(!rep.pass);
        assert_eq!(rep.worst_subset, vec![5]);
    }
}

#[test]
fn degenerate_instance_is_flagged() {
    let l = lattice(&[2, 2], "open");
    let j = CouplingField::from_values(&l, vec![1.0, 1.0, 1.0, -1.0]).unwrap();
    let r = solve(&l, &j, &BoundaryCondition::Free, Method::Auto).unwrap();
    assert!(r.degenerate);
    assert_eq!(r.energy, -2.0);
    let en = solve(&l, &j, &BoundaryCondition::Free, Method::Enumeration).unwrap();
    // lexicographically smallest among the tied states
    assert_eq!(en.config, r.config);
    assert_eq!(r.config.to_bits(), "0000");
}

#[test]
fn json_record_fields() {
    let (l, j) = frustrated_square();
    let r = solve(&l, &j, &BoundaryCondition::Free, Method::Auto).unwrap();
    let v = serde_json::to_value(r.record(&l, &BoundaryCondition::Free, 9)).unwrap();
    for key in ["d", "L", "topology", "bc", "seed", "energy", "config", "degenerate", "gap"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["config"], r.config.to_bits());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gauge_transformation_preserves_energy(seed in 0u64..10_000, v in 0usize..16, mask in 0u32..65536) {
        let l = lattice(&[4, 4], "periodic");
        let j = CouplingField::sample(&l, seed);
        let sigma = SpinConfig::from_spins((0..16).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect());
        let mut jg = j.clone();
        for &(_, e) in l.neighbors(v) {
            jg.set(e, -j.get(e));
        }
        let mut sg = sigma.clone();
        sg.flip(v);
        let a = energy(&l, &j, &sigma, &BoundaryCondition::Periodic).unwrap();
        let b = energy(&l, &jg, &sg, &BoundaryCondition::Periodic).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn summation_order_is_immaterial(seed in 0u64..10_000, mask in 0u64..(1 << 36)) {
        let l = lattice(&[6, 6], "open");
        let j = CouplingField::sample(&l, seed);
        let sigma = SpinConfig::from_spins((0..36).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect());
        let e = energy(&l, &j, &sigma, &BoundaryCondition::Free).unwrap();
        let mut terms: Vec<f64> = (0..l.n_edges()).map(|k| -j.get(k) * f64::from(sigma.edge_value(&l, k))).collect();
        terms.reverse();
        let rev: f64 = terms.iter().sum();
        terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
        let sorted: f64 = terms.iter().sum();
        prop_assert!((e - rev).abs() < 1e-10);
        prop_assert!((e - sorted).abs() < 1e-10);
    }

    #[test]
    fn dp_matches_enumeration_on_random_boxes(seed in 0u64..1_000_000, w in 2usize..5, h in 2usize..5, periodic in proptest::bool::ANY) {
        let topo = if periodic && w >= 3 && h >= 3 { "periodic" } else { "open" };
        let l = lattice(&[w, h], topo);
        let bc = BoundaryCondition::natural(&l);
        let j = CouplingField::sample(&l, seed);
        let en = solve(&l, &j, &bc, Method::Enumeration).unwrap();
        let dp = solve(&l, &j, &bc, Method::ColumnDp).unwrap();
        prop_assert!((en.energy - dp.energy).abs() < 1e-12);
        prop_assert_eq!(en.config, dp.config);
    }
}
