use ealab::disorder::{FieldTag, InterpolationPath};
use ealab::experiment::{Disorder, Setup};
use ealab::groundstate::{interior_energy, solve, BoundaryCondition, Method};
use ealab::lattice::{BoxLattice, Topology};
use ealab::stats::log_space;
use ealab::variance::*;

fn identity_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(log_space(1e-4, 20.0, 200));
    g
}

#[test]
fn gaussian_identity_for_all_test_functions() {
    let grid = identity_grid();
    for f in [TestFunction::Linear, TestFunction::Square, TestFunction::Product, TestFunction::Hermite3] {
        for n in [2, 4] {
            let r = gaussian_identity_selftest(f, n, 100_000, &grid, 31).unwrap();
            assert!(r.pass, "{r:?}");
            assert!(r.tail_bound < 1e-6);
        }
    }
}

#[test]
fn linear_identity_is_exact_up_to_quadrature() {
    // the linear integrand is deterministic: only quadrature error remains
    let r = gaussian_identity_selftest(TestFunction::Linear, 2, 10, &identity_grid(), 1).unwrap();
    assert!((r.estimate - 1.0).abs() < 1e-8);
    assert_eq!(r.mc_se, 0.0);
}

#[test]
fn identical_replicas_give_zero_variance_and_trivial_bound() {
    let setup = Setup::free(2);
    let grid = default_s_grid(0.5, 21);
    let r = variance_bound(&setup, &ReplicaEnsemble::Identical, 3, 0.5, &grid, 20, 4).unwrap();
    assert_eq!(r.lhs.value, 0.0);
    assert_eq!(r.incongruence_proxy.value, 0.0);
    assert!(r.rhs.value <= 0.0);
    assert_eq!(r.verdict, BoundVerdict::HoldsTrivially);
}

#[test]
fn periodic_antiperiodic_bookkeeping_is_the_wrap_term() {
    let setup = Setup::periodic(2);
    let ens = ReplicaEnsemble::Pa { axis: 0 };
    let r = lhs_variance(&setup, &ens, 4, 10, 12).unwrap();
    let lattice = BoxLattice::build(2, 4, Topology::periodic(2)).unwrap();
    for x in &r.samples {
        let j = setup.disorder.sample(&lattice, 12, x.realization, FieldTag::Couplings);
        let ap = BoundaryCondition::Antiperiodic { axis: 0 };
        let g1 = solve(&lattice, &j, &BoundaryCondition::Periodic, Method::Enumeration).unwrap();
        let g2 = solve(&lattice, &j, &ap, Method::Enumeration).unwrap();
        let dh = interior_energy(&lattice, &j, &g1.config).unwrap() - interior_energy(&lattice, &j, &g2.config).unwrap();
        assert!((x.delta_h - dh).abs() < 1e-12);
        let wrap: f64 = (0..lattice.n_edges())
            .filter(|&e| lattice.edge(e).wraps && lattice.edge(e).axis == 0)
            .map(|e| j.get(e) * f64::from(g2.config.edge_value(&lattice, e)))
            .sum();
        assert!((x.boundary_term + 2.0 * wrap).abs() < 1e-12);
    }
}

#[test]
fn single_point_grid_reduces_to_closed_form() {
    let setup = Setup::free(2);
    let t = 0.3;
    let r = variance_bound(&setup, &ReplicaEnsemble::Ff, 3, t, &[t], 50, 8).unwrap();
    let edges = 12.0;
    let g = r.incongruence_proxy.value - (2.0 * r.drift_1[0]).sqrt() - (2.0 * r.drift_2[0]).sqrt();
    let expected = 2.0 * edges * g * (1.0 - (-t as f64).exp());
    assert!((r.rhs.value - expected).abs() < 1e-12, "{} vs {expected}", r.rhs.value);
}

#[test]
fn bound_never_violated_on_small_boxes() {
    let grid = default_s_grid(0.5, 21);
    for (setup, ens) in [
        (Setup::free(2), ReplicaEnsemble::Ff),
        (Setup::periodic(2), ReplicaEnsemble::Pa { axis: 0 }),
    ] {
        let r = variance_bound(&setup, &ens, 3, 0.5, &grid, 200, 17).unwrap();
        assert!(r.lhs.value > 0.0);
        assert!(r.lhs.value + 2.0 * r.lhs.se >= r.rhs.value - 2.0 * r.rhs.se, "{ens}: {:?} vs {:?}", r.lhs, r.rhs);
        assert_ne!(r.verdict, BoundVerdict::Violated);
        assert!(r.integrand_check.pass, "{:?}", r.integrand_check);
        assert_eq!(r.drift_1[0], 0.0);
    }
}

#[test]
fn variance_is_independent_of_worker_count() {
    let grid = default_s_grid(0.5, 21);
    let a = variance_bound(&Setup::free(2).with_workers(1), &ReplicaEnsemble::Ff, 3, 0.5, &grid, 30, 2).unwrap();
    let b = variance_bound(&Setup::free(2).with_workers(8), &ReplicaEnsemble::Ff, 3, 0.5, &grid, 30, 2).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn ff_variance_is_finite_and_positive() {
    let r = lhs_variance(&Setup::free(2), &ReplicaEnsemble::Ff, 4, 500, 21).unwrap();
    assert!(r.lhs.value > 0.0 && r.lhs.value.is_finite());
    assert!(r.lhs.se > 0.0 && r.lhs.se < r.lhs.value);
}

#[test]
fn chain_edge_window_follows_the_coupling_sign() {
    let setup = Setup::free(1);
    let (l, b, t) = (12, 5, 2.0);
    let grid = default_s_grid(t, 40);
    let r = single_edge_bound(&setup, &ReplicaEnsemble::Identical, l, b, t, &grid, 40, 6).unwrap();
    let lattice = BoxLattice::build(1, l, Topology::open(1)).unwrap();
    for (k, x) in r.bound.samples.iter().enumerate() {
        let j = setup.disorder.sample(&lattice, 6, x.realization, FieldTag::Couplings);
        let jp = setup.disorder.sample(&lattice, 6, x.realization, FieldTag::Target);
        let path = InterpolationPath::single_edge(j.clone(), jp, b).unwrap();
        let expected = grid
            .iter()
            .copied()
            .find(|&s| path.at(s).unwrap().get(b).signum() != j.get(b).signum());
        assert_eq!(r.first_change_1[k], expected);
        assert_eq!(r.first_change_2[k], expected);
    }
    assert!(r.bound.rhs.value <= 0.0);
}

#[test]
fn ferromagnet_stiffness_is_one_wall_per_ring() {
    let setup = Setup { topology: cylinder(2), bc: BoundaryCondition::Periodic, ..Setup::free(2) }
        .with_disorder(Disorder::Ferromagnet);
    let r = stiffness_scan(&setup, 0, &[3, 4, 5], 4, 1).unwrap();
    for p in &r.points {
        assert!(p.x.iter().all(|&x| x == -2.0 * p.l as f64));
        assert_eq!(p.var_x.value, 0.0);
    }
    assert!(r.two_theta.is_none());
}

#[test]
fn ring_stiffness_is_twice_the_weakest_coupling() {
    let setup = Setup { topology: Topology::periodic(1), bc: BoundaryCondition::Periodic, ..Setup::free(1) };
    let sizes = [6, 10, 14];
    let r = stiffness_scan(&setup, 0, &sizes, 200, 3).unwrap();
    for p in &r.points {
        let lattice = BoxLattice::build(1, p.l, Topology::periodic(1)).unwrap();
        for (k, &x) in p.x.iter().enumerate() {
            let j = setup.disorder.sample(&lattice, 3, k as u64, FieldTag::Couplings);
            let min = j.values().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
            let sign = j.values().iter().fold(1.0, |s, v| s * v.signum());
            assert!((x - (-sign * 2.0 * min)).abs() < 1e-12);
        }
        assert_eq!(p.wall.value, 1.0);
    }
    assert!(r.scaled_trend.is_some());
}

#[test]
fn overlap_distance_obeys_triangle_inequality() {
    for l in [3, 4, 6] {
        let lattice = BoxLattice::build(2, l, Topology::periodic(2)).unwrap();
        let r = triangle_check(&lattice, 10_000, l as u64).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
