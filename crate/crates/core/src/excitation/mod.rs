//! Excitations of a single edge: the best configurations with the edge
//! satisfied and unsatisfied, the flexibility separating them, its critical
//! value, and the droplet on which the two configurations disagree.

mod path;
mod window;

use serde::Serialize;

use crate::disorder::CouplingField;
use crate::error::{Error, Result};
use crate::groundstate::{constrained_solve, BoundaryCondition, Constraint, Method, SpinConfig};
use crate::lattice::{BoxLattice, Region};

pub use path::{drift_check, drift_slack, stability_scan, DriftReport, PathPoint, StabilityReport, StabilityViolation};
pub use window::{crossing_times, order_configs, Crossing, WindowEnergyVector, MAX_WINDOW_EDGES};

/// Constrained minima with `σ_b = +1` and `σ_b = -1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcitationPair {
    pub edge: usize,
    pub sigma_plus: SpinConfig,
    pub sigma_minus: SpinConfig,
    pub e_plus: f64,
    pub e_minus: f64,
    /// Either constrained minimum is tied with its runner-up.
    pub degenerate: bool,
}

impl ExcitationPair {
    pub fn flexibility(&self) -> f64 {
        (self.e_plus - self.e_minus).abs()
    }

    /// Edge value of `b` in the unconstrained ground state.
    pub fn ground_value(&self) -> i8 {
        if self.e_plus <= self.e_minus {
            1
        } else {
            -1
        }
    }

    pub fn ground_energy(&self) -> f64 {
        self.e_plus.min(self.e_minus)
    }

    /// Edges whose value differs between the two configurations.
    pub fn droplet_boundary(&self, lattice: &BoxLattice) -> Vec<usize> {
        (0..lattice.n_edges())
            .filter(|&e| self.sigma_plus.edge_value(lattice, e) != self.sigma_minus.edge_value(lattice, e))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlexibilityRecord {
    pub edge: usize,
    pub flexibility: f64,
    pub critical_value: f64,
    /// Edge value of `b` in the ground state.
    pub ground_sign: i8,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropletReport {
    pub edge: usize,
    pub boundary: Vec<usize>,
    pub region: Region,
    /// Number of connected pieces of the disagreement set.
    pub components: usize,
    pub flexibility: FlexibilityRecord,
}

impl DropletReport {
    pub fn size(&self) -> usize {
        self.boundary.len()
    }

    pub fn region_size(&self) -> usize {
        self.region.len()
    }
}

fn check_edge(lattice: &BoxLattice, b: usize) -> Result<()> {
    if b >= lattice.n_edges() {
        return Err(Error::Invalid(format!("edge {b} outside lattice with {} edges", lattice.n_edges())));
    }
    Ok(())
}

/// `+1`, or `-1` when the boundary condition negates the coupling of `b`.
fn coupling_sign(lattice: &BoxLattice, bc: &BoundaryCondition, b: usize) -> f64 {
    let e = lattice.edge(b);
    match bc {
        BoundaryCondition::Antiperiodic { axis } if e.wraps && e.axis == *axis => -1.0,
        _ => 1.0,
    }
}

pub fn excitation_pair(
    lattice: &BoxLattice,
    j: &CouplingField,
    bc: &BoundaryCondition,
    b: usize,
    method: Method,
) -> Result<ExcitationPair> {
    check_edge(lattice, b)?;
    let plus = constrained_solve(lattice, j, bc, &Constraint::edge(b, 1), method)?;
    let minus = constrained_solve(lattice, j, bc, &Constraint::edge(b, -1), method)?;
    Ok(ExcitationPair {
        edge: b,
        degenerate: plus.degenerate || minus.degenerate,
        sigma_plus: plus.config,
        sigma_minus: minus.config,
        e_plus: plus.energy,
        e_minus: minus.energy,
    })
}

fn flexibility_from_pair(
    lattice: &BoxLattice,
    j: &CouplingField,
    bc: &BoundaryCondition,
    pair: &ExcitationPair,
    method: Method,
) -> Result<FlexibilityRecord> {
    let b = pair.edge;
    // Both constrained minima with the b-term removed; they do not depend on J_b.
    let zeroed = j.with_edge(b, 0.0);
    let a0 = constrained_solve(lattice, &zeroed, bc, &Constraint::edge(b, 1), method)?;
    let b0 = constrained_solve(lattice, &zeroed, bc, &Constraint::edge(b, -1), method)?;
    let critical_value = coupling_sign(lattice, bc, b) * (a0.energy - b0.energy) / 2.0;
    Ok(FlexibilityRecord {
        edge: b,
        flexibility: pair.flexibility(),
        critical_value,
        ground_sign: pair.ground_value(),
        degenerate: pair.degenerate || a0.degenerate || b0.degenerate,
    })
}

/// `F_b = |E_+ - E_-|` and the critical value `C_b` with `F_b = 2|J_b - C_b|`.
pub fn flexibility(
    lattice: &BoxLattice,
    j: &CouplingField,
    bc: &BoundaryCondition,
    b: usize,
    method: Method,
) -> Result<FlexibilityRecord> {
    let pair = excitation_pair(lattice, j, bc, b, method)?;
    flexibility_from_pair(lattice, j, bc, &pair, method)
}

/// Critical droplet of `b`: the edge-disagreement set of the excitation pair
/// and the vertex-disagreement component holding an endpoint of `b`.
pub fn critical_droplet(
    lattice: &BoxLattice,
    j: &CouplingField,
    bc: &BoundaryCondition,
    b: usize,
    method: Method,
) -> Result<DropletReport> {
    let pair = excitation_pair(lattice, j, bc, b, method)?;
    let flex = flexibility_from_pair(lattice, j, bc, &pair, method)?;
    droplet_from_pair(lattice, bc, &pair, flex)
}

pub(crate) fn droplet_from_pair(
    lattice: &BoxLattice,
    bc: &BoundaryCondition,
    pair: &ExcitationPair,
    flexibility: FlexibilityRecord,
) -> Result<DropletReport> {
    let edge = *lattice.edge(pair.edge);
    let plus = &pair.sigma_plus;
    let minus = if bc.is_flip_symmetric() {
        let n = lattice.n_vertices();
        let distance = plus.spins().iter().zip(pair.sigma_minus.spins()).filter(|(a, b)| a != b).count();
        let flip = if 2 * distance == n {
            // tie: keep the orientation in which the lower endpoint of b disagrees
            plus.spin(edge.a) == pair.sigma_minus.spin(edge.a)
        } else {
            2 * distance > n
        };
        if flip {
            pair.sigma_minus.flipped()
        } else {
            pair.sigma_minus.clone()
        }
    } else {
        pair.sigma_minus.clone()
    };
    let disagree = lattice.disagreement(plus, &minus)?;
    let anchor = if disagree.contains(edge.a) { edge.a } else { edge.b };
    let pieces = lattice.connected_components(&disagree)?;
    let components = pieces.len();
    let region = pieces
        .into_iter()
        .find(|r| r.contains(anchor))
        .expect("one endpoint of b always disagrees");
    Ok(DropletReport { edge: pair.edge, boundary: pair.droplet_boundary(lattice), region, components, flexibility })
}
