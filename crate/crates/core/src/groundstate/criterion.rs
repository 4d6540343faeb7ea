//! Local stability check: flipping any small connected cluster must not lower
//! the energy.

use serde::Serialize;

use super::{BoundaryCondition, Problem, SpinConfig};
use crate::disorder::CouplingField;
use crate::error::{Error, Result};
use crate::lattice::BoxLattice;

pub const MAX_SUBSET: usize = 6;

/// Tolerance on the boundary sum of a cluster.
const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub pass: bool,
    pub worst_subset: Vec<usize>,
    pub worst_value: f64,
    pub subsets_checked: usize,
}

/// Evaluates `Σ_{∂B} J σ_x σ_y` (plus outer-layer terms) for every connected
/// vertex set `B` with `|B| <= k`. Half the energy change from flipping `B`.
pub fn check_gs_criterion(
    lattice: &BoxLattice,
    j: &CouplingField,
    sigma: &SpinConfig,
    bc: &BoundaryCondition,
    k: usize,
) -> Result<CriterionReport> {
    if k == 0 || k > MAX_SUBSET {
        return Err(Error::Invalid(format!("subset size {k} outside 1..={MAX_SUBSET}")));
    }
    sigma.check_len(lattice.n_vertices())?;
    let problem = Problem::compile(lattice, j, bc)?;
    let n = problem.n;
    let s = sigma.spins();

    // satisfied weight of each edge, indexed by lattice edge
    let w: Vec<f64> = problem.edges.iter().map(|&(a, b, jv)| jv * f64::from(s[a] * s[b])).collect();
    let h: Vec<f64> = (0..n).map(|v| problem.field[v] * f64::from(s[v])).collect();

    let mut report = CriterionReport {
        pass: true,
        worst_subset: Vec::new(),
        worst_value: f64::INFINITY,
        subsets_checked: 0,
    };
    let mut sub = Vec::with_capacity(k);
    let mut inside = vec![false; n];
    for root in 0..n {
        sub.push(root);
        inside[root] = true;
        let ext: Vec<usize> = lattice.neighbors(root).iter().map(|&(u, _)| u).filter(|&u| u > root).collect();
        extend(lattice, &w, &h, k, root, &mut sub, &mut inside, ext, &mut report);
        inside[root] = false;
        sub.pop();
    }
    report.pass = report.worst_value >= -TOL;
    Ok(report)
}

fn boundary_sum(lattice: &BoxLattice, w: &[f64], h: &[f64], sub: &[usize], inside: &[bool]) -> f64 {
    let mut total = 0.0;
    for &v in sub {
        total += h[v];
        for &(u, e) in lattice.neighbors(v) {
            if !inside[u] {
                total += w[e];
            }
        }
    }
    total
}

/// Enumerates each connected set once, as the sets whose smallest vertex is
/// `root`, by growing only through exclusive neighbours.
#[allow(clippy::too_many_arguments)]
fn extend(
    lattice: &BoxLattice,
    w: &[f64],
    h: &[f64],
    k: usize,
    root: usize,
    sub: &mut Vec<usize>,
    inside: &mut Vec<bool>,
    mut ext: Vec<usize>,
    report: &mut CriterionReport,
) {
    let value = boundary_sum(lattice, w, h, sub, inside);
    report.subsets_checked += 1;
    if value < report.worst_value {
        report.worst_value = value;
        report.worst_subset = {
            let mut b = sub.clone();
            b.sort_unstable();
            b
        };
    }
    if sub.len() == k {
        return;
    }
    while let Some(x) = ext.pop() {
        let mut next = ext.clone();
        for &(u, _) in lattice.neighbors(x) {
            if u <= root || inside[u] || next.contains(&u) {
                continue;
            }
            let touches_sub = lattice.neighbors(u).iter().any(|&(y, _)| inside[y]);
            if !touches_sub {
                next.push(u);
            }
        }
        sub.push(x);
        inside[x] = true;
        extend(lattice, w, h, k, root, sub, inside, next, report);
        inside[x] = false;
        sub.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Topology;

    /// Counts connected induced subsets by brute force over bitmasks.
    fn brute_count(lattice: &BoxLattice, k: usize) -> usize {
        let n = lattice.n_vertices();
        let mut count = 0;
        for mask in 1u32..(1 << n) {
            if mask.count_ones() as usize > k {
                continue;
            }
            let verts: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            let mut seen = vec![verts[0]];
            let mut i = 0;
            while i < seen.len() {
                for &(u, _) in lattice.neighbors(seen[i]) {
                    if mask >> u & 1 == 1 && !seen.contains(&u) {
                        seen.push(u);
                    }
                }
                i += 1;
            }
            if seen.len() == verts.len() {
                count += 1;
            }
        }
        count
    }

    #[test]
    fn enumerates_each_connected_subset_once() {
        for (dims, topo) in [(vec![3, 3], "open"), (vec![3, 4], "periodic"), (vec![4, 3], "periodic,open")] {
            let l = BoxLattice::with_dims(&dims, Topology::parse(topo, 2).unwrap()).unwrap();
            let j = CouplingField::constant(&l, 1.0);
            let s = SpinConfig::all_up(l.n_vertices());
            for k in 1..=5 {
                let bc = BoundaryCondition::natural(&l);
                let r = check_gs_criterion(&l, &j, &s, &bc, k).unwrap();
                assert_eq!(r.subsets_checked, brute_count(&l, k), "{dims:?} {topo} k={k}");
            }
        }
    }

    #[test]
    fn ferromagnet_sums_equal_boundary_size() {
        let l = BoxLattice::build(2, 4, Topology::open(2)).unwrap();
        let j = CouplingField::constant(&l, 1.0);
        let s = SpinConfig::all_up(16);
        let r = check_gs_criterion(&l, &j, &s, &BoundaryCondition::Free, 4).unwrap();
        assert!(r.pass);
        // a corner vertex has the smallest boundary
        assert_eq!(r.worst_value, 2.0);
        assert_eq!(r.worst_subset, vec![0]);
    }

    #[test]
    fn rejects_large_budget() {
        let l = BoxLattice::build(1, 4, Topology::open(1)).unwrap();
        let j = CouplingField::constant(&l, 1.0);
        let s = SpinConfig::all_up(4);
        assert!(check_gs_criterion(&l, &j, &s, &BoundaryCondition::Free, 7).is_err());
        assert!(check_gs_criterion(&l, &j, &s, &BoundaryCondition::Free, 0).is_err());
    }
}
