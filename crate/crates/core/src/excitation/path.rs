//! Flexibility of one edge along the whole-box interpolation path.
//!
//! Along the path every coupling moves by at most `3 sqrt(Δt) M` over a step
//! `Δt <= 1`, with `M = max_e max(|J_e|, |J'_e|)`, and the flexibility has
//! slope `±2` in each coupling of the droplet boundary and zero elsewhere.
//! Hence `|F(t + Δt) - F(t)| <= 6 sqrt(Δt) M max|∂D|`, and the ground-state
//! value of the edge cannot change over a step on which `F` stays above that.

use serde::Serialize;

use super::excitation_pair;
use crate::disorder::{CouplingField, InterpolationPath};
use crate::error::{Error, Result};
use crate::groundstate::{BoundaryCondition, Method};
use crate::lattice::BoxLattice;

const DRIFT_TOL: f64 = 1e-9;

/// `6 sqrt(Δt) M D`.
pub fn drift_slack(dt: f64, max_coupling: f64, max_droplet: usize) -> f64 {
    6.0 * dt.sqrt() * max_coupling * max_droplet as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathPoint {
    pub t: f64,
    pub flexibility: f64,
    pub ground_sign: i8,
    pub droplet_size: usize,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityViolation {
    /// `"sign_change"` or `"discontinuity"`.
    pub kind: &'static str,
    pub t_lo: f64,
    pub t_hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub edge: usize,
    pub points: Vec<PathPoint>,
    pub max_coupling: f64,
    pub max_droplet: usize,
    pub violations: Vec<StabilityViolation>,
}

impl StabilityReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

fn max_coupling(j: &CouplingField, jp: &CouplingField) -> f64 {
    j.max_abs().max(jp.max_abs())
}

fn trace(
    lattice: &BoxLattice,
    path: &InterpolationPath,
    bc: &BoundaryCondition,
    b: usize,
    grid: &[f64],
    method: Method,
) -> Result<Vec<PathPoint>> {
    grid.iter()
        .map(|&t| {
            let jt = path.at(t)?;
            let pair = excitation_pair(lattice, &jt, bc, b, method)?;
            Ok(PathPoint {
                t,
                flexibility: pair.flexibility(),
                ground_sign: pair.ground_value(),
                droplet_size: pair.droplet_boundary(lattice).len(),
                degenerate: pair.degenerate,
            })
        })
        .collect()
}

/// Recomputes `F_b` and the ground-state value of `b` on every grid point of
/// the whole-box path from `J` to `J'` and checks, for each step, that the
/// value of `b` is unchanged whenever `F_b` exceeds the step slack at both
/// ends, and that `F_b` moves by no more than the slack.
pub fn stability_scan(
    lattice: &BoxLattice,
    j: &CouplingField,
    jp: &CouplingField,
    bc: &BoundaryCondition,
    b: usize,
    t_grid: &[f64],
    method: Method,
) -> Result<StabilityReport> {
    if t_grid.is_empty() {
        return Err(Error::Invalid("empty t grid".into()));
    }
    if t_grid.iter().any(|&t| !(0.0..=50.0).contains(&t)) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("t grid must be strictly increasing within [0, 50]".into()));
    }
    let path = InterpolationPath::whole(j.clone(), jp.clone())?;
    let points = trace(lattice, &path, bc, b, t_grid, method)?;
    let m = max_coupling(j, jp);
    let max_droplet = points.iter().map(|p| p.droplet_size).max().unwrap_or(0);
    let mut violations = Vec::new();
    for w in points.windows(2) {
        let (p, q) = (&w[0], &w[1]);
        let dt = q.t - p.t;
        // the coupling increment bound behind the slack needs steps <= 1
        if dt > 1.0 {
            continue;
        }
        let slack = drift_slack(dt, m, max_droplet);
        let v = |kind| StabilityViolation { kind, t_lo: p.t, t_hi: q.t, f_lo: p.flexibility, f_hi: q.flexibility, slack };
        if p.flexibility.min(q.flexibility) > slack && p.ground_sign != q.ground_sign {
            violations.push(v("sign_change"));
        }
        if (q.flexibility - p.flexibility).abs() > slack + DRIFT_TOL {
            violations.push(v("discontinuity"));
        }
    }
    Ok(StabilityReport { edge: b, points, max_coupling: m, max_droplet, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub edge: usize,
    pub t: f64,
    /// `|F_b(t) - F_b(0)|`.
    pub lhs: f64,
    /// `6 sqrt(t) M max_{s<=t} |∂D_b(s)|`.
    pub rhs: f64,
    /// Largest `|F_b(s) - F_b(0)| - 6 sqrt(s) M max_{u<=s} |∂D_b(u)|` over the grid.
    pub worst_margin: f64,
    pub max_coupling: f64,
    pub max_droplet: usize,
    pub grid_points: usize,
}

impl DriftReport {
    pub fn pass(&self) -> bool {
        self.worst_margin <= DRIFT_TOL
    }
}

/// Evaluates the drift bound on a uniform grid of `n_grid >= 100` points in
/// `[0, t]`. Refuses `t > 1`, where the constant 6 is not established.
pub fn drift_check(
    lattice: &BoxLattice,
    j: &CouplingField,
    jp: &CouplingField,
    bc: &BoundaryCondition,
    b: usize,
    t: f64,
    n_grid: usize,
    method: Method,
) -> Result<DriftReport> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Invalid(format!("drift bound needs 0 <= t <= 1, got {t}")));
    }
    if n_grid < 100 {
        return Err(Error::Invalid(format!("drift grid needs at least 100 points, got {n_grid}")));
    }
    let grid: Vec<f64> = if t == 0.0 {
        vec![0.0]
    } else {
        (0..n_grid).map(|k| t * k as f64 / (n_grid - 1) as f64).collect()
    };
    let path = InterpolationPath::whole(j.clone(), jp.clone())?;
    let points = trace(lattice, &path, bc, b, &grid, method)?;
    let m = max_coupling(j, jp);
    let f0 = points[0].flexibility;
    let mut running = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for p in &points {
        running = running.max(p.droplet_size);
        worst = worst.max((p.flexibility - f0).abs() - drift_slack(p.t, m, running));
    }
    let last = points.last().expect("non-empty grid");
    Ok(DriftReport {
        edge: b,
        t,
        lhs: (last.flexibility - f0).abs(),
        rhs: drift_slack(t, m, running),
        worst_margin: worst,
        max_coupling: m,
        max_droplet: running,
        grid_points: points.len(),
    })
}
