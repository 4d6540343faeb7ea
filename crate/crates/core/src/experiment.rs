//! Shared plumbing for Monte Carlo experiments: lattice family, coupling
//! law, and deterministic realization-parallel maps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::{CouplingField, FieldTag};
use crate::error::{Error, Result};
use crate::groundstate::{BoundaryCondition, Method};
use crate::lattice::{BoxLattice, Topology};

/// Law of the interior couplings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Disorder {
    /// Independent standard normals.
    #[default]
    Gaussian,
    /// Every coupling equals 1; diagnostic only.
    Ferromagnet,
}

impl Disorder {
    pub fn sample(&self, lattice: &BoxLattice, seed: u64, realization: u64, tag: FieldTag) -> CouplingField {
        match self {
            Self::Gaussian => CouplingField::sample_stream(lattice, seed, realization, tag),
            Self::Ferromagnet => CouplingField::constant(lattice, 1.0),
        }
    }
}

/// A family of boxes `L^d` sharing topology, boundary condition and solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setup {
    pub d: usize,
    pub topology: Topology,
    pub bc: BoundaryCondition,
    pub method: Method,
    pub disorder: Disorder,
    /// Worker threads; 0 uses all cores. Results never depend on it.
    pub workers: usize,
}

impl Setup {
    /// Open boxes with free boundaries.
    pub fn free(d: usize) -> Self {
        Self {
            d,
            topology: Topology::open(d),
            bc: BoundaryCondition::Free,
            method: Method::Auto,
            disorder: Disorder::Gaussian,
            workers: 0,
        }
    }

    /// Fully periodic boxes.
    pub fn periodic(d: usize) -> Self {
        Self { topology: Topology::periodic(d), bc: BoundaryCondition::Periodic, ..Self::free(d) }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_disorder(mut self, disorder: Disorder) -> Self {
        self.disorder = disorder;
        self
    }

    pub fn lattice(&self, l: usize) -> Result<BoxLattice> {
        if self.topology.dim() != self.d {
            return Err(Error::Mismatch(format!(
                "topology has {} axes for d = {}",
                self.topology.dim(),
                self.d
            )));
        }
        let lattice = BoxLattice::build(self.d, l, self.topology.clone())?;
        if matches!(self.bc, BoundaryCondition::Fixed(_)) {
            return Err(Error::Unsupported("experiments draw no fixed layers; use free, periodic or antiperiodic".into()));
        }
        self.bc.validate(&lattice)?;
        Ok(lattice)
    }
}

/// `f(0..n)` collected in index order on `workers` threads.
pub fn par_map<T, F>(workers: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

/// Validates the degenerate-discard budget: at most 0.1% of realizations.
pub fn check_discards(discarded: usize, n_real: usize) -> Result<()> {
    if discarded as f64 > 1e-3 * n_real as f64 {
        return Err(Error::Degenerate(format!(
            "{discarded} of {n_real} realizations had tied ground states (limit 0.1%)"
        )));
    }
    Ok(())
}
