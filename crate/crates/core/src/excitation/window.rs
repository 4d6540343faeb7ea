//! Energy vectors of a small window of edges.
//!
//! For each edge configuration `η` of the window, `E(η)` is the constrained
//! minimum with the window edges forced to `η` minus the window's own energy
//! `-Σ_w J_e η_e`. Only differences `E(η, η') = E(η) - E(η')` carry meaning.
//! They do not depend on the window couplings, so they fix the ground state
//! for every value of those couplings at once.

use serde::Serialize;

use crate::disorder::{path_weights, CouplingField, InterpolationPath};
use crate::error::{Error, Result};
use crate::groundstate::{constrained_solve, BoundaryCondition, Constraint, Method, DEGENERACY_TOL};
use crate::lattice::BoxLattice;

pub const MAX_WINDOW_EDGES: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowEnergyVector {
    pub edges: Vec<usize>,
    /// Edge configurations; bit `i` of the index set means edge `i` is `-1`.
    pub configs: Vec<Vec<i8>>,
    /// `E(η, η₀)` with `η₀` the all-`+1` configuration.
    pub values: Vec<f64>,
    /// Sign applied to each window coupling by the boundary condition.
    pub signs: Vec<f64>,
    /// `Σ 2|J_e|` over the couplings touching the window from outside.
    pub boundary_bound: f64,
}

impl WindowEnergyVector {
    pub fn compute(
        lattice: &BoxLattice,
        j: &CouplingField,
        bc: &BoundaryCondition,
        window: &[usize],
        method: Method,
    ) -> Result<Self> {
        check_window(lattice, window)?;
        let k = window.len();
        let signs: Vec<f64> = window
            .iter()
            .map(|&e| {
                let edge = lattice.edge(e);
                match bc {
                    BoundaryCondition::Antiperiodic { axis } if edge.wraps && edge.axis == *axis => -1.0,
                    _ => 1.0,
                }
            })
            .collect();
        let configs: Vec<Vec<i8>> = (0..1usize << k)
            .map(|m| (0..k).map(|i| if m >> i & 1 == 1 { -1 } else { 1 }).collect())
            .collect();
        let mut absolute = Vec::with_capacity(configs.len());
        for eta in &configs {
            let cons = Constraint::EdgeValues(window.iter().copied().zip(eta.iter().copied()).collect());
            let r = constrained_solve(lattice, j, bc, &cons, method)?;
            let internal: f64 = (0..k).map(|i| -signs[i] * j.get(window[i]) * f64::from(eta[i])).sum();
            absolute.push(r.energy - internal);
        }
        let values = absolute.iter().map(|a| a - absolute[0]).collect();
        Ok(Self { edges: window.to_vec(), configs, values, signs, boundary_bound: boundary_bound(lattice, j, bc, window) })
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// `E(η_i, η_j)`.
    pub fn diff(&self, i: usize, k: usize) -> f64 {
        self.values[i] - self.values[k]
    }

    pub fn index_of(&self, eta: &[i8]) -> Option<usize> {
        self.configs.iter().position(|c| c == eta)
    }

    /// Window energy `-Σ J_e η_e` for the given window couplings.
    pub fn window_energy(&self, i: usize, couplings: &[f64]) -> f64 {
        self.configs[i].iter().zip(couplings).zip(&self.signs).map(|((&s, &c), &g)| -g * c * f64::from(s)).sum()
    }

    /// Critical value of edge `b` from a single-edge vector: `E(+,-)/2`.
    pub fn critical_value(&self) -> Option<f64> {
        (self.edges.len() == 1).then(|| self.signs[0] * self.diff(0, 1) / 2.0)
    }
}

fn check_window(lattice: &BoxLattice, window: &[usize]) -> Result<()> {
    if window.is_empty() || window.len() > MAX_WINDOW_EDGES {
        return Err(Error::Invalid(format!("window has {} edges, allowed 1..={MAX_WINDOW_EDGES}", window.len())));
    }
    let mut seen = window.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != window.len() {
        return Err(Error::Invalid("window lists an edge twice".into()));
    }
    if let Some(&e) = window.iter().find(|&&e| e >= lattice.n_edges()) {
        return Err(Error::Invalid(format!("edge {e} outside lattice")));
    }
    // union-find over window vertices; a cycle would make some edge
    // configurations unrealizable
    let mut parent: Vec<usize> = (0..lattice.n_vertices()).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &e in window {
        let edge = lattice.edge(e);
        let (ra, rb) = (root(&mut parent, edge.a), root(&mut parent, edge.b));
        if ra == rb {
            return Err(Error::Unsupported("window edges contain a cycle".into()));
        }
        parent[ra] = rb;
    }
    Ok(())
}

fn boundary_bound(lattice: &BoxLattice, j: &CouplingField, bc: &BoundaryCondition, window: &[usize]) -> f64 {
    let mut touched = vec![false; lattice.n_vertices()];
    for &e in window {
        touched[lattice.edge(e).a] = true;
        touched[lattice.edge(e).b] = true;
    }
    let mut total = 0.0;
    for (e, edge) in lattice.edges().iter().enumerate() {
        if !window.contains(&e) && (touched[edge.a] || touched[edge.b]) {
            total += 2.0 * j.get(e).abs();
        }
    }
    if let BoundaryCondition::Fixed(layer) = bc {
        for (slot, &(v, _, _)) in lattice.boundary_slots().iter().enumerate() {
            if touched[v] {
                total += 2.0 * layer.couplings[slot].abs();
            }
        }
    }
    total
}

/// Configurations sorted by `E(η) + H_w(η)`, i.e. `η ≺ η'` iff
/// `E(η,η') + H_w(η) - H_w(η') < 0`. Fails when two levels are closer than
/// the degeneracy tolerance.
pub fn order_configs(vector: &WindowEnergyVector, couplings: &[f64]) -> Result<Vec<usize>> {
    if couplings.len() != vector.edges.len() {
        return Err(Error::Mismatch(format!(
            "{} couplings for a {}-edge window",
            couplings.len(),
            vector.edges.len()
        )));
    }
    let totals: Vec<f64> = (0..vector.len()).map(|i| vector.values[i] + vector.window_energy(i, couplings)).collect();
    let mut order: Vec<usize> = (0..vector.len()).collect();
    order.sort_by(|&a, &b| totals[a].total_cmp(&totals[b]));
    for w in order.windows(2) {
        if totals[w[1]] - totals[w[0]] <= DEGENERACY_TOL {
            return Err(Error::Degenerate(format!(
                "window configurations {} and {} are tied",
                w[0], w[1]
            )));
        }
    }
    Ok(order)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub t: f64,
    /// Indices of the two configurations exchanging order.
    pub pair: (usize, usize),
}

/// Roots in `(0, t_max]` of `a e^{-t} + b sqrt(1 - e^{-2t}) = c`.
///
/// In the angle `φ` with `e^{-t} = cos φ` the left side is `a cos φ + b sin φ`,
/// which has extrema at `φ0 = atan2(b, a)` and `φ0 ± π`. At most one of them
/// falls inside `(0, π/2)`, and each monotone branch holds at most one root.
pub(crate) fn solve_crossing(a: f64, b: f64, c: f64, t_max: f64) -> Vec<f64> {
    let g = |t: f64| {
        let (x, y) = path_weights(t);
        a * x + b * y - c
    };
    use std::f64::consts::{FRAC_PI_2, PI};
    let phi0 = b.atan2(a);
    let mut cuts = vec![0.0];
    // the maximum sits at φ0 and the minimum at φ0 ± π; at most one lies inside
    for phi in [phi0, phi0 + PI, phi0 - PI] {
        if phi > 0.0 && phi < FRAC_PI_2 {
            let t0 = -phi.cos().ln();
            if t0 < t_max {
                cuts.push(t0);
            }
        }
    }
    cuts.push(t_max);
    let mut roots = Vec::new();
    for w in cuts.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (glo, ghi) = (g(lo), g(hi));
        if glo == 0.0 || glo.signum() == ghi.signum() && ghi != 0.0 {
            continue;
        }
        if ghi == 0.0 {
            roots.push(hi);
            continue;
        }
        while hi - lo > 1e-12 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            let gm = g(mid);
            if gm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if gm.signum() == glo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    roots.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    roots
}

/// Times in `(0, t_max]` at which two window configurations exchange order
/// along an interpolation of the window couplings, sorted.
pub fn crossing_times(vector: &WindowEnergyVector, path: &InterpolationPath, t_max: f64) -> Result<Vec<Crossing>> {
    if !(t_max > 0.0 && t_max <= 50.0) {
        return Err(Error::Invalid(format!("t_max {t_max} outside (0, 50]")));
    }
    if let Some(&e) = vector.edges.iter().find(|&&e| !path.moves(e)) {
        return Err(Error::Invalid(format!("window edge {e} is not interpolated by the path")));
    }
    if let Some(e) = (0..path.base.len()).find(|&e| path.moves(e) && !vector.edges.contains(&e)) {
        return Err(Error::Invalid(format!("path moves edge {e} outside the window")));
    }
    let base: Vec<f64> = vector.edges.iter().map(|&e| path.base.get(e)).collect();
    let target: Vec<f64> = vector.edges.iter().map(|&e| path.target.get(e)).collect();
    let mut out = Vec::new();
    for i in 0..vector.len() {
        for k in i + 1..vector.len() {
            // total(i) - total(k) = E(i,k) - Σ g_e J_e (η_i - η_k)_e
            let mut a = 0.0;
            let mut b = 0.0;
            for e in 0..vector.edges.len() {
                let v = vector.signs[e] * f64::from(vector.configs[i][e] - vector.configs[k][e]);
                a += v * base[e];
                b += v * target[e];
            }
            for t in solve_crossing(a, b, vector.diff(i, k), t_max) {
                out.push(Crossing { t, pair: (i, k) });
            }
        }
    }
    out.sort_by(|x, y| x.t.total_cmp(&y.t).then(x.pair.cmp(&y.pair)));
    Ok(out)
}
