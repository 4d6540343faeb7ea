//! Exact zero-temperature ground states of `H = -Σ J_xy σ_x σ_y` on a box.
//!
//! Two exact solvers are provided: Gray-code enumeration over the free spins
//! and a banded transfer dynamic program that sweeps the sites in index order
//! while remembering the last `W` spins, `W` being the extent of axis 0.

mod criterion;
mod enumerate;
mod transfer;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::disorder::CouplingField;
use crate::error::{Error, Result};
use crate::lattice::BoxLattice;

pub use criterion::{check_gs_criterion, CriterionReport, MAX_SUBSET};
pub use enumerate::MAX_FREE_SPINS;
pub use transfer::MAX_WIDTH;

/// Energy gap below which two levels count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// One Ising spin per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig {
    spins: Vec<i8>,
}

impl SpinConfig {
    /// Panics unless every entry is `±1`.
    pub fn from_spins(spins: Vec<i8>) -> Self {
        assert!(spins.iter().all(|&s| s == 1 || s == -1), "spins must be +1 or -1");
        Self { spins }
    }

    pub fn all_up(n: usize) -> Self {
        Self { spins: vec![1; n] }
    }

    pub fn len(&self) -> usize {
        self.spins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    pub fn spin(&self, v: usize) -> i8 {
        self.spins[v]
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn flip(&mut self, v: usize) {
        self.spins[v] = -self.spins[v];
    }

    pub fn flipped(&self) -> Self {
        Self { spins: self.spins.iter().map(|s| -s).collect() }
    }

    pub fn check_len(&self, n: usize) -> Result<()> {
        if self.spins.len() != n {
            return Err(Error::Mismatch(format!("{} spins for {n} vertices", self.spins.len())));
        }
        Ok(())
    }

    /// `σ_a σ_b` on edge `e`.
    pub fn edge_value(&self, lattice: &BoxLattice, e: usize) -> i8 {
        let edge = lattice.edge(e);
        self.spins[edge.a] * self.spins[edge.b]
    }

    pub fn edge_values(&self, lattice: &BoxLattice) -> Vec<i8> {
        (0..lattice.n_edges()).map(|e| self.edge_value(lattice, e)).collect()
    }

    /// `'0'` for `+1` and `'1'` for `-1`, vertex 0 first.
    pub fn to_bits(&self) -> String {
        self.spins.iter().map(|&s| if s == 1 { '0' } else { '1' }).collect()
    }

    pub fn from_bits(bits: &str) -> Result<Self> {
        bits.chars()
            .map(|c| match c {
                '0' => Ok(1),
                '1' => Ok(-1),
                _ => Err(Error::Format(format!("bad spin character `{c}`"))),
            })
            .collect::<Result<Vec<i8>>>()
            .map(|spins| Self { spins })
    }
}

/// Spins and couplings of a one-vertex-thick layer enclosing the open faces,
/// one entry per slot of [`BoxLattice::boundary_slots`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedLayer {
    pub spins: Vec<i8>,
    pub couplings: Vec<f64>,
}

impl FixedLayer {
    pub fn new(spins: Vec<i8>, couplings: Vec<f64>) -> Self {
        Self { spins, couplings }
    }

    pub fn uniform(lattice: &BoxLattice, spin: i8, coupling: f64) -> Self {
        let n = lattice.boundary_slots().len();
        Self { spins: vec![spin; n], couplings: vec![coupling; n] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Open box, no boundary terms.
    Free,
    /// Use the lattice topology as built; open axes stay free.
    Periodic,
    /// Like `Periodic` with the wrap couplings on `axis` negated.
    Antiperiodic { axis: usize },
    /// Open faces coupled to a frozen outer layer.
    Fixed(FixedLayer),
}

impl BoundaryCondition {
    pub fn validate(&self, lattice: &BoxLattice) -> Result<()> {
        let topo = lattice.topology();
        match self {
            Self::Free if !topo.is_fully_open() => {
                Err(Error::Invalid("free boundary condition needs an open box".into()))
            }
            Self::Periodic if topo.is_fully_open() => {
                Err(Error::Invalid("periodic boundary condition needs a periodic axis".into()))
            }
            Self::Antiperiodic { axis } if !topo.is_periodic(*axis) => Err(Error::Invalid(
                format!("antiperiodic axis {axis} is not periodic"),
            )),
            Self::Fixed(layer) => {
                let n = lattice.boundary_slots().len();
                if layer.spins.len() != n || layer.couplings.len() != n {
                    return Err(Error::Mismatch(format!(
                        "fixed layer has {} spins and {} couplings for {n} slots",
                        layer.spins.len(),
                        layer.couplings.len()
                    )));
                }
                if layer.spins.iter().any(|&s| s != 1 && s != -1) {
                    return Err(Error::Invalid("fixed layer spins must be +1 or -1".into()));
                }
                if layer.couplings.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Invalid("fixed layer couplings must be finite".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// True when the energy is invariant under a global flip.
    pub fn is_flip_symmetric(&self) -> bool {
        !matches!(self, Self::Fixed(layer) if !layer.spins.is_empty())
    }

    /// Free on open boxes, periodic otherwise.
    pub fn natural(lattice: &BoxLattice) -> Self {
        if lattice.topology().is_fully_open() {
            Self::Free
        } else {
            Self::Periodic
        }
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Free => f.write_str("free"),
            Self::Periodic => f.write_str("periodic"),
            Self::Antiperiodic { axis } => write!(f, "antiperiodic:{axis}"),
            Self::Fixed(_) => f.write_str("fixed"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Auto,
    Enumeration,
    ColumnDp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Enumeration,
    ColumnDp,
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Enumeration => "enumeration",
            Self::ColumnDp => "column_dp",
        })
    }
}

/// Restriction of the configuration space.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Constraint {
    #[default]
    None,
    /// `σ_a σ_b = s` on each listed edge.
    EdgeValues(Vec<(usize, i8)>),
    /// `σ_v = s` on each listed vertex.
    PinnedSpins(Vec<(usize, i8)>),
}

impl Constraint {
    pub fn edge(e: usize, value: i8) -> Self {
        Self::EdgeValues(vec![(e, value)])
    }

    fn validate(&self, lattice: &BoxLattice) -> Result<()> {
        let (items, bound, what) = match self {
            Self::None => return Ok(()),
            Self::EdgeValues(v) => (v, lattice.n_edges(), "edge"),
            Self::PinnedSpins(v) => (v, lattice.n_vertices(), "vertex"),
        };
        for &(i, s) in items {
            if i >= bound {
                return Err(Error::Invalid(format!("constrained {what} {i} outside lattice")));
            }
            if s != 1 && s != -1 {
                return Err(Error::Invalid(format!("constraint value {s} is not +1 or -1")));
            }
        }
        Ok(())
    }

    fn pins(&self) -> &[(usize, i8)] {
        match self {
            Self::PinnedSpins(p) => p,
            _ => &[],
        }
    }

    fn edge_values(&self) -> &[(usize, i8)] {
        match self {
            Self::EdgeValues(e) => e,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundStateResult {
    pub config: SpinConfig,
    pub energy: f64,
    pub solver: Solver,
    pub degenerate: bool,
    /// Distance to the next level; `None` when no other configuration is
    /// admissible.
    pub gap: Option<f64>,
}

/// Serialized form of a ground state together with the instance metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundStateRecord {
    pub schema: String,
    pub d: usize,
    #[serde(rename = "L")]
    pub l: usize,
    pub dims: Vec<usize>,
    pub topology: String,
    pub bc: String,
    pub seed: u64,
    pub solver: Solver,
    pub energy: f64,
    pub config: String,
    pub degenerate: bool,
    pub gap: Option<f64>,
}

impl GroundStateResult {
    pub fn record(&self, lattice: &BoxLattice, bc: &BoundaryCondition, seed: u64) -> GroundStateRecord {
        GroundStateRecord {
            schema: "ealab.groundstate/1".into(),
            d: lattice.dim(),
            l: lattice.side(),
            dims: lattice.dims().to_vec(),
            topology: lattice.topology().to_string(),
            bc: bc.to_string(),
            seed,
            solver: self.solver,
            energy: self.energy,
            config: self.config.to_bits(),
            degenerate: self.degenerate,
            gap: self.gap,
        }
    }
}

/// Flattened instance: effective couplings after boundary signs, plus the
/// fields induced by a fixed outer layer.
#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub n: usize,
    /// `(a, b, J)` with `a < b`, in lattice edge order.
    pub edges: Vec<(usize, usize, f64)>,
    pub field: Vec<f64>,
    pub flip_symmetric: bool,
}

impl Problem {
    pub fn compile(lattice: &BoxLattice, j: &CouplingField, bc: &BoundaryCondition) -> Result<Self> {
        j.check(lattice)?;
        bc.validate(lattice)?;
        let edges = lattice
            .edges()
            .iter()
            .zip(j.values())
            .map(|(e, &v)| {
                let flip = matches!(bc, BoundaryCondition::Antiperiodic { axis } if e.wraps && e.axis == *axis);
                (e.a, e.b, if flip { -v } else { v })
            })
            .collect();
        let mut field = vec![0.0; lattice.n_vertices()];
        if let BoundaryCondition::Fixed(layer) = bc {
            for (slot, &(v, _, _)) in lattice.boundary_slots().iter().enumerate() {
                field[v] += layer.couplings[slot] * f64::from(layer.spins[slot]);
            }
        }
        Ok(Self { n: lattice.n_vertices(), edges, field, flip_symmetric: bc.is_flip_symmetric() })
    }

    pub fn energy(&self, spins: &[i8]) -> f64 {
        let mut e = 0.0;
        for &(a, b, j) in &self.edges {
            e -= j * f64::from(spins[a] * spins[b]);
        }
        for (h, &s) in self.field.iter().zip(spins) {
            e -= h * f64::from(s);
        }
        e
    }
}

/// Outcome of a raw solver run before packaging.
pub(crate) struct Raw {
    pub spins: Vec<i8>,
    pub second: f64,
}

/// Energy of `σ` under `bc`, boundary terms included.
pub fn energy(lattice: &BoxLattice, j: &CouplingField, sigma: &SpinConfig, bc: &BoundaryCondition) -> Result<f64> {
    sigma.check_len(lattice.n_vertices())?;
    Ok(Problem::compile(lattice, j, bc)?.energy(sigma.spins()))
}

/// `-Σ J_e σ_e` over every lattice edge with the couplings as given, i.e.
/// without boundary signs or outer-layer terms.
pub fn interior_energy(lattice: &BoxLattice, j: &CouplingField, sigma: &SpinConfig) -> Result<f64> {
    j.check(lattice)?;
    sigma.check_len(lattice.n_vertices())?;
    Ok(lattice
        .edges()
        .iter()
        .zip(j.values())
        .map(|(e, v)| -v * f64::from(sigma.spin(e.a) * sigma.spin(e.b)))
        .sum())
}

pub fn solve(lattice: &BoxLattice, j: &CouplingField, bc: &BoundaryCondition, method: Method) -> Result<GroundStateResult> {
    constrained_solve(lattice, j, bc, &Constraint::None, method)
}

/// Exact minimizer among configurations satisfying `constraint`.
pub fn constrained_solve(
    lattice: &BoxLattice,
    j: &CouplingField,
    bc: &BoundaryCondition,
    constraint: &Constraint,
    method: Method,
) -> Result<GroundStateResult> {
    let problem = Problem::compile(lattice, j, bc)?;
    constraint.validate(lattice)?;
    solve_problem(lattice, &problem, constraint, method)
}

pub(crate) fn solve_problem(
    lattice: &BoxLattice,
    problem: &Problem,
    constraint: &Constraint,
    method: Method,
) -> Result<GroundStateResult> {
    let pins = constraint.pins();
    let edge_values = constraint.edge_values();
    let (raw, solver) = match method {
        Method::Enumeration => (enumerate::enumerate(problem, pins, edge_values)?, Solver::Enumeration),
        Method::ColumnDp => (transfer::column_dp(lattice, problem, pins, edge_values)?, Solver::ColumnDp),
        Method::Auto => match transfer::supports(lattice) {
            Ok(()) => (transfer::column_dp(lattice, problem, pins, edge_values)?, Solver::ColumnDp),
            Err(dp_err) => match enumerate::enumerate(problem, pins, edge_values) {
                Ok(raw) => (raw, Solver::Enumeration),
                Err(Error::TooLarge { .. }) => return Err(dp_err),
                Err(e) => return Err(e),
            },
        },
    };
    let energy = problem.energy(&raw.spins);
    let gap = raw.second.is_finite().then(|| (raw.second - energy).max(0.0));
    Ok(GroundStateResult {
        config: SpinConfig { spins: raw.spins },
        energy,
        solver,
        degenerate: gap.is_some_and(|g| g < DEGENERACY_TOL),
        gap,
    })
}

/// `(1/|Λ*|) Σ_e σ1_e σ2_e`.
pub fn edge_overlap(lattice: &BoxLattice, sigma1: &SpinConfig, sigma2: &SpinConfig) -> Result<f64> {
    sigma1.check_len(lattice.n_vertices())?;
    sigma2.check_len(lattice.n_vertices())?;
    if lattice.n_edges() == 0 {
        return Ok(1.0);
    }
    let agree: i64 = lattice
        .edges()
        .iter()
        .map(|e| i64::from(sigma1.spin(e.a) * sigma1.spin(e.b) * sigma2.spin(e.a) * sigma2.spin(e.b)))
        .sum();
    Ok(agree as f64 / lattice.n_edges() as f64)
}
