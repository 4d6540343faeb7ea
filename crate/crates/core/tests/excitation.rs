use ealab::disorder::{interpolate, CouplingField, EdgeSubset, FieldTag, InterpolationPath};
use ealab::excitation::{
    critical_droplet, crossing_times, drift_check, excitation_pair, flexibility, order_configs, stability_scan,
    WindowEnergyVector,
};
use ealab::groundstate::{constrained_solve, solve, BoundaryCondition, Constraint, Method, SpinConfig};
use ealab::lattice::{BoxLattice, Region, Topology};
use ealab::Error;

fn open(dims: &[usize]) -> BoxLattice {
    BoxLattice::with_dims(dims, Topology::open(dims.len())).unwrap()
}

const M: Method = Method::Auto;

#[test]
fn ferromagnetic_chain_pair() {
    let l = open(&[6]);
    let j = CouplingField::from_values(&l, vec![1.0, 0.3, 2.0, 0.7, 1.5]).unwrap();
    let bc = BoundaryCondition::Free;
    let ground = solve(&l, &j, &bc, M).unwrap().energy;
    for b in 0..5 {
        let p = excitation_pair(&l, &j, &bc, b, M).unwrap();
        assert!((p.e_plus - ground).abs() < 1e-12);
        assert!((p.e_minus - (ground + 2.0 * j.get(b).abs())).abs() < 1e-12);
    }
}

#[test]
fn pair_minimum_is_ground_energy() {
    let l = BoxLattice::build(2, 4, Topology::periodic(2)).unwrap();
    let bc = BoundaryCondition::Periodic;
    for seed in 0..20 {
        let j = CouplingField::sample(&l, seed);
        let ground = solve(&l, &j, &bc, M).unwrap().energy;
        for b in [0, 7, 31] {
            let p = excitation_pair(&l, &j, &bc, b, M).unwrap();
            assert!((p.ground_energy() - ground).abs() < 1e-12);
            assert_eq!(p.sigma_plus.edge_value(&l, b), 1);
            assert_eq!(p.sigma_minus.edge_value(&l, b), -1);
        }
    }
}

#[test]
fn open_chain_has_zero_critical_value() {
    let l = open(&[9]);
    for seed in 0..10 {
        let j = CouplingField::sample(&l, seed);
        for b in 0..l.n_edges() {
            let f = flexibility(&l, &j, &BoundaryCondition::Free, b, M).unwrap();
            assert!(f.critical_value.abs() < 1e-12);
            assert!((f.flexibility - 2.0 * j.get(b).abs()).abs() < 1e-12);
            let d = critical_droplet(&l, &j, &BoundaryCondition::Free, b, M).unwrap();
            assert_eq!(d.boundary, vec![b]);
        }
    }
}

#[test]
fn flexibility_identity_and_resampling_invariance() {
    let l = open(&[4, 4]);
    let bc = BoundaryCondition::Free;
    for seed in 0..10 {
        let j = CouplingField::sample(&l, seed);
        for b in 0..l.n_edges() {
            let f = flexibility(&l, &j, &bc, b, M).unwrap();
            assert!((f.flexibility - 2.0 * (j.get(b) - f.critical_value).abs()).abs() < 1e-10);
            let sign = if j.get(b) > f.critical_value { 1 } else { -1 };
            assert_eq!(f.ground_sign, sign);
        }
        let b = (seed as usize * 5) % l.n_edges();
        let c0 = flexibility(&l, &j, &bc, b, M).unwrap().critical_value;
        let fresh = ealab::disorder::Stream::new(seed, 0, FieldTag::Resample).normals(20);
        for v in fresh {
            let c = flexibility(&l, &j.with_edge(b, v), &bc, b, M).unwrap().critical_value;
            assert!((c - c0).abs() < 1e-10);
        }
    }
}

#[test]
fn antiperiodic_wrap_edge_critical_value() {
    let l = BoxLattice::build(2, 3, Topology::periodic(2)).unwrap();
    let bc = BoundaryCondition::Antiperiodic { axis: 0 };
    let b = (0..l.n_edges()).find(|&e| l.edge(e).wraps && l.edge(e).axis == 0).unwrap();
    for seed in 0..10 {
        let j = CouplingField::sample(&l, seed);
        let f = flexibility(&l, &j, &bc, b, M).unwrap();
        assert!((f.flexibility - 2.0 * (j.get(b) - f.critical_value).abs()).abs() < 1e-10);
    }
}

#[test]
fn droplet_boundary_is_region_boundary() {
    for (dims, topo) in [(vec![4, 4], "open"), (vec![4, 4], "periodic"), (vec![3, 5], "open")] {
        let l = BoxLattice::with_dims(&dims, Topology::parse(topo, 2).unwrap()).unwrap();
        let bc = BoundaryCondition::natural(&l);
        for seed in 0..10 {
            let j = CouplingField::sample(&l, seed);
            for b in 0..l.n_edges() {
                let d = critical_droplet(&l, &j, &bc, b, M).unwrap();
                assert!(d.boundary.contains(&b));
                if !d.flexibility.degenerate {
                    assert_eq!(d.components, 1);
                    assert_eq!(l.boundary_edges(&d.region).unwrap(), d.boundary);
                    assert!(2 * d.region_size() <= l.n_vertices());
                }
            }
        }
    }
}

/// Smallest edge boundary of a vertex set holding exactly one endpoint of `b`.
fn min_cut_through(l: &BoxLattice, b: usize) -> usize {
    let e = *l.edge(b);
    let n = l.n_vertices();
    let mut best = usize::MAX;
    for mask in 0u32..(1 << n) {
        if (mask >> e.a & 1) == (mask >> e.b & 1) {
            continue;
        }
        let verts: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
        let r = Region::from_vertices(l, &verts).unwrap();
        best = best.min(l.boundary_edges(&r).unwrap().len());
    }
    best
}

#[test]
fn ferromagnet_droplet_is_minimal_cut() {
    let l = open(&[3, 3]);
    let j = CouplingField::constant(&l, 1.0);
    for b in 0..l.n_edges() {
        let d = critical_droplet(&l, &j, &BoundaryCondition::Free, b, M).unwrap();
        assert_eq!(d.size(), min_cut_through(&l, b), "edge {b}");
    }
}

fn window_vector(l: &BoxLattice, j: &CouplingField, w: &[usize]) -> WindowEnergyVector {
    WindowEnergyVector::compute(l, j, &BoundaryCondition::natural(l), w, M).unwrap()
}

#[test]
fn window_vector_laws() {
    let l = open(&[5, 5]);
    for seed in 0..3 {
        let j = CouplingField::sample(&l, seed);
        for w in [vec![12usize], vec![3, 4], vec![10, 30], vec![0, 1, 2], vec![14, 15, 16, 17]] {
            let v = window_vector(&l, &j, &w);
            let n = v.len();
            for a in 0..n {
                assert_eq!(v.diff(a, a), 0.0);
                for b in 0..n {
                    assert!((v.diff(a, b) + v.diff(b, a)).abs() < 1e-9);
                    assert!(v.diff(a, b) <= v.boundary_bound + 1e-9);
                    for c in 0..n {
                        assert!((v.diff(a, c) - v.diff(a, b) - v.diff(b, c)).abs() < 1e-9);
                    }
                }
            }
            // independence from the window couplings
            let mut moved = j.clone();
            for &e in &w {
                moved.set(e, 3.0 * j.get(e) - 1.0);
            }
            let v2 = window_vector(&l, &moved, &w);
            for (x, y) in v.values.iter().zip(&v2.values) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn window_rejects_cycles_and_large_windows() {
    let l = open(&[3, 3]);
    let j = CouplingField::sample(&l, 1);
    // edges of the plaquette at vertex 0: (0,1), (0,3), (1,4), (3,4)
    let plaq: Vec<usize> = [(0, 1), (0, 3), (1, 4), (3, 4)].iter().map(|&(a, b)| l.edge_between(a, b).unwrap()).collect();
    let r = WindowEnergyVector::compute(&l, &j, &BoundaryCondition::Free, &plaq, M);
    assert!(matches!(r, Err(Error::Unsupported(_))));
    let r = WindowEnergyVector::compute(&l, &j, &BoundaryCondition::Free, &[0, 1, 2, 3, 4], M);
    assert!(r.is_err());
}

#[test]
fn single_edge_window_gives_twice_critical_value() {
    let l = open(&[4, 4]);
    for seed in 0..10 {
        let j = CouplingField::sample(&l, seed);
        for b in [0, 5, 11] {
            let v = window_vector(&l, &j, &[b]);
            let f = flexibility(&l, &j, &BoundaryCondition::Free, b, M).unwrap();
            assert!((v.diff(0, 1) - 2.0 * f.critical_value).abs() < 1e-10);
            assert!((v.critical_value().unwrap() - f.critical_value).abs() < 1e-10);
            let order = order_configs(&v, &[j.get(b)]).unwrap();
            let first = if j.get(b) > f.critical_value { 0 } else { 1 };
            assert_eq!(order[0], first);
        }
    }
}

#[test]
fn order_matches_constrained_energies() {
    let l = open(&[5, 5]);
    let bc = BoundaryCondition::Free;
    for seed in 0..10 {
        let j = CouplingField::sample(&l, seed);
        let w = [6usize, 9];
        let v = window_vector(&l, &j, &w);
        let jw: Vec<f64> = w.iter().map(|&e| j.get(e)).collect();
        let order = order_configs(&v, &jw).unwrap();
        let mut energies: Vec<(f64, usize)> = v
            .configs
            .iter()
            .enumerate()
            .map(|(i, eta)| {
                let c = Constraint::EdgeValues(w.iter().copied().zip(eta.iter().copied()).collect());
                (constrained_solve(&l, &j, &bc, &c, M).unwrap().energy, i)
            })
            .collect();
        energies.sort_by(|a, b| a.0.total_cmp(&b.0));
        let by_solve: Vec<usize> = energies.iter().map(|x| x.1).collect();
        assert_eq!(order, by_solve);
        let ground = solve(&l, &j, &bc, M).unwrap().config;
        let restricted: Vec<i8> = w.iter().map(|&e| ground.edge_value(&l, e)).collect();
        assert_eq!(v.configs[order[0]], restricted);
    }
}

#[test]
fn two_edge_critical_lines_match_constrained_solves() {
    let l = open(&[5, 5]);
    let bc = BoundaryCondition::Free;
    for seed in 0..10 {
        let j = CouplingField::sample(&l, seed);
        let w = [7usize, 22];
        let v = window_vector(&l, &j, &w);
        let constrained = |jj: &CouplingField, eta: &[i8]| {
            let c = Constraint::EdgeValues(w.iter().copied().zip(eta.iter().copied()).collect());
            constrained_solve(&l, jj, &bc, &c, M).unwrap().energy
        };
        for a in 0..4 {
            for b in a + 1..4 {
                let diff: Vec<f64> = (0..2).map(|e| f64::from(v.configs[a][e] - v.configs[b][e])).collect();
                // move the first edge whose value differs onto the critical line
                let e = if diff[0] != 0.0 { 0 } else { 1 };
                let other = 1 - e;
                let on_line = (v.diff(a, b) - diff[other] * j.get(w[other])) / diff[e];
                let jj = j.with_edge(w[e], on_line);
                let gap = constrained(&jj, &v.configs[a]) - constrained(&jj, &v.configs[b]);
                assert!(gap.abs() < 1e-10, "pair ({a},{b}) gap {gap}");
            }
        }
    }
}

#[test]
fn crossings_bound_and_ground_changes() {
    let l = open(&[4, 4]);
    let bc = BoundaryCondition::Free;
    let mut most = 0;
    for seed in 0..30 {
        let j = CouplingField::sample(&l, seed);
        let jp = CouplingField::sample_stream(&l, seed, 0, FieldTag::Target);
        let w = vec![5usize, 6];
        let v = window_vector(&l, &j, &w);
        let path = InterpolationPath::new(j.clone(), jp.clone(), EdgeSubset::Edges(w.clone())).unwrap();
        let cr = crossing_times(&v, &path, 10.0).unwrap();
        most = most.max(cr.len());
        assert!(cr.len() <= 16);
        assert!(cr.windows(2).all(|p| p[0].t <= p[1].t));
        // the window restriction of the ground state only changes across crossings
        let grid: Vec<f64> = (0..=200).map(|k| 10.0 * k as f64 / 200.0).collect();
        let mut prev: Option<Vec<i8>> = None;
        for win in grid.windows(2) {
            let t = win[1];
            let g = solve(&l, &interpolate(&path, t).unwrap(), &bc, M).unwrap().config;
            let r: Vec<i8> = w.iter().map(|&e| g.edge_value(&l, e)).collect();
            if let Some(p) = &prev {
                if *p != r {
                    assert!(cr.iter().any(|c| c.t > win[0] - 1e-12 && c.t <= t + 1e-12), "seed {seed} t {t}");
                }
            }
            prev = Some(r);
        }
        let single = window_vector(&l, &j, &[5]);
        let p1 = InterpolationPath::single_edge(j.clone(), jp.clone(), 5).unwrap();
        assert!(crossing_times(&single, &p1, 50.0).unwrap().len() <= 2);
    }
    assert!(most > 0);
}

#[test]
fn crossing_rejects_mismatched_path() {
    let l = open(&[3, 3]);
    let j = CouplingField::sample(&l, 2);
    let v = window_vector(&l, &j, &[0]);
    let whole = InterpolationPath::whole(j.clone(), j.clone()).unwrap();
    assert!(crossing_times(&v, &whole, 1.0).is_err());
    let p = InterpolationPath::single_edge(j.clone(), j.clone(), 0).unwrap();
    assert!(crossing_times(&v, &p, 51.0).is_err());
    // J' = J leaves the single coupling on the ray c(t) J_b; no crossing when it
    // starts off the critical value and keeps its side
    let cr = crossing_times(&v, &p, 50.0).unwrap();
    let c = v.critical_value().unwrap();
    if j.get(0).abs() > c.abs() || j.get(0).signum() != c.signum() {
        assert!(cr.is_empty());
    }
}

#[test]
fn ferromagnet_stability_is_trivial() {
    let l = open(&[3, 3]);
    let j = CouplingField::constant(&l, 1.0);
    let grid: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
    let r = stability_scan(&l, &j, &j, &BoundaryCondition::Free, 4, &grid, M).unwrap();
    assert!(r.pass());
    assert!(r.points.iter().all(|p| p.ground_sign == 1));
    // the path is the ray c(t) J with c in [1, sqrt 2], so F scales by c(t)
    for p in &r.points {
        let (a, b) = ealab::disorder::path_weights(p.t);
        assert!((p.flexibility - r.points[0].flexibility * (a + b)).abs() < 1e-12);
    }
}

#[test]
fn chain_sign_flips_at_zero_crossing() {
    let l = open(&[5]);
    let j = CouplingField::from_values(&l, vec![0.8, -0.4, 1.2, 0.5]).unwrap();
    let jp = CouplingField::from_values(&l, vec![0.2, 1.0, -0.7, 0.9]).unwrap();
    let grid: Vec<f64> = (0..=1000).map(|k| k as f64 * 2e-3).collect();
    let b = 1;
    let r = stability_scan(&l, &j, &jp, &BoundaryCondition::Free, b, &grid, M).unwrap();
    assert!(r.pass());
    // J_b(t) = 0 where tan φ = 0.4, i.e. e^{-t} = 1/sqrt(1.16)
    let t0 = 0.5 * 1.16f64.ln();
    for p in &r.points {
        let expected = if p.t < t0 { -1 } else { 1 };
        if (p.t - t0).abs() > 1e-9 {
            assert_eq!(p.ground_sign, expected, "t = {}", p.t);
        }
    }
}

#[test]
fn drift_bound_holds() {
    let l = open(&[4, 4]);
    let bc = BoundaryCondition::Free;
    for seed in 0..5 {
        let j = CouplingField::sample(&l, seed);
        let jp = CouplingField::sample_stream(&l, seed, 0, FieldTag::Target);
        let zero = drift_check(&l, &j, &jp, &bc, 3, 0.0, 100, M).unwrap();
        assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));
        for t in [0.01, 0.1, 1.0] {
            let r = drift_check(&l, &j, &jp, &bc, 3, t, 100, M).unwrap();
            assert!(r.pass(), "{r:?}");
            assert!(r.lhs <= r.rhs + 1e-9);
        }
    }
    let j = CouplingField::sample(&l, 0);
    assert!(drift_check(&l, &j, &j, &bc, 0, 1.5, 100, M).is_err());
    assert!(drift_check(&l, &j, &j, &bc, 0, 0.5, 50, M).is_err());
}

#[test]
fn chain_drift_closed_form() {
    let l = open(&[6]);
    for seed in 0..10 {
        let j = CouplingField::sample(&l, seed);
        let jp = CouplingField::sample_stream(&l, seed, 0, FieldTag::Target);
        let b = 2;
        for t in [0.05, 0.5, 1.0] {
            let r = drift_check(&l, &j, &jp, &BoundaryCondition::Free, b, t, 100, M).unwrap();
            let (x, y) = ealab::disorder::path_weights(t);
            let jt = x * j.get(b) + y * jp.get(b);
            assert!((r.lhs - 2.0 * (jt.abs() - j.get(b).abs()).abs()).abs() < 1e-12);
            assert_eq!(r.max_droplet, 1);
            let coeff = (x - 1.0).abs() + y;
            assert!(coeff <= 3.0 * t.sqrt());
            assert!(r.pass());
        }
    }
}

#[test]
fn stability_on_random_paths() {
    let l = open(&[4, 4]);
    let grid: Vec<f64> = (0..=200).map(|k| k as f64 * 5e-3).collect();
    for seed in 0..5 {
        let j = CouplingField::sample(&l, seed);
        let jp = CouplingField::sample_stream(&l, seed, 0, FieldTag::Target);
        for b in [0, 10, 23] {
            let r = stability_scan(&l, &j, &jp, &BoundaryCondition::Free, b, &grid, M).unwrap();
            assert!(r.pass(), "{:?}", r.violations);
        }
    }
    let _ = SpinConfig::all_up(1);
}
