//! Monte Carlo checks of the Gaussian variance machinery: the interpolation
//! identity for smooth test functions, the lower bound on the variance of
//! ground-state energy differences between replica pairs, its single-edge
//! form, and the periodic/antiperiodic stiffness scan.
//!
//! Replica pairs come from boundary conditions drawn independently of the
//! interior couplings; `mean(1 - Q(σ1, σ2))` stands in for incongruence.

use serde::{Deserialize, Serialize};

use crate::chaos::{loglog_fit, ExponentFit};
use crate::disorder::{CouplingField, EdgeSubset, FieldTag, InterpolationPath, Stream};
use crate::error::{Error, Result};
use crate::experiment::{check_discards, par_map, Setup};
use crate::groundstate::{
    edge_overlap, interior_energy, solve, BoundaryCondition, FixedLayer, Method, SpinConfig,
};
use crate::lattice::{BoxLattice, Topology};
use crate::stats::{self, jackknife_variance, log_space, mann_kendall, pairwise_sum, Estimate, MannKendall};

/// Weights `(w_a, w_b)` with `∫_a^b g(s) e^{-s} ds = w_a g(a) + w_b g(b)` for
/// `g` linear on `[a, b]`.
fn segment_weights(a: f64, b: f64) -> (f64, f64) {
    let h = b - a;
    let ea = (-a).exp();
    let total = ea * -(-h).exp_m1();
    // ∫_0^h u e^{-u} du / h = (1 - e^{-h}(1 + h)) / h, by series for small h
    let first = if h < 0.1 {
        let mut term = 1.0;
        let mut sum = 0.0;
        for k in 1..20 {
            term *= -h / k as f64;
            if k >= 2 {
                sum += term * (k - 1) as f64;
            }
        }
        sum / h
    } else {
        (-(-h).exp_m1() - h * (-h).exp()) / h
    };
    let wb = ea * first;
    (total - wb, wb)
}

/// Quadrature weights for `∫_0^t g(s) e^{-s} ds` with `g` linear between grid
/// points and constant beyond the first and last point.
pub fn exp_weights(grid: &[f64], t: f64) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::Invalid("empty s grid".into()));
    }
    if grid.iter().any(|s| !s.is_finite() || *s < 0.0 || *s > t) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid(format!("s grid must be strictly increasing within [0, {t}]")));
    }
    let n = grid.len();
    let mut w = vec![0.0; n];
    w[0] += -(-grid[0]).exp_m1();
    for k in 0..n - 1 {
        let (a, b) = segment_weights(grid[k], grid[k + 1]);
        w[k] += a;
        w[k + 1] += b;
    }
    w[n - 1] += (-grid[n - 1]).exp() - (-t).exp();
    Ok(w)
}

/// `0` followed by `n - 1` points log-spaced from `1e-4 t` to `t`.
pub fn default_s_grid(t: f64, n: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(log_space(1e-4 * t, t, n.max(2) - 1));
    g
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    /// `Y_1`, variance 1.
    Linear,
    /// `Y_1^2`, variance 2.
    Square,
    /// `Y_1 Y_2`, variance 1.
    Product,
    /// `Y_1^3 - 3 Y_1`, variance 6.
    Hermite3,
}

impl TestFunction {
    pub fn exact_variance(&self) -> f64 {
        match self {
            Self::Linear => 1.0,
            Self::Square => 2.0,
            Self::Product => 1.0,
            Self::Hermite3 => 6.0,
        }
    }

    fn min_dim(&self) -> usize {
        if *self == Self::Product {
            2
        } else {
            1
        }
    }

    /// `Σ_i ∂_i h(y) ∂_i h(z)`.
    fn gradient_product(&self, y: &[f64], z: &[f64]) -> f64 {
        match self {
            Self::Linear => 1.0,
            Self::Square => 4.0 * y[0] * z[0],
            Self::Product => y[1] * z[1] + y[0] * z[0],
            Self::Hermite3 => 9.0 * (y[0] * y[0] - 1.0) * (z[0] * z[0] - 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaussianIdentityReport {
    pub function: TestFunction,
    pub n: usize,
    pub n_samples: usize,
    pub exact: f64,
    pub estimate: f64,
    pub mc_se: f64,
    /// `e^{-s_max} E|∇h|^2`, bounding the truncated tail.
    pub tail_bound: f64,
    /// Difference to the same rule on every other grid point, over 3.
    pub quadrature_error: f64,
    pub combined_se: f64,
    pub pass: bool,
}

/// Estimates `∫_0^∞ Σ_i E[∂_i h(Y) ∂_i h(Y(s))] e^{-s} ds` sample by sample
/// on `s_grid` and compares it with the exact `Var h(Y)`.
pub fn gaussian_identity_selftest(
    function: TestFunction,
    n: usize,
    n_samples: usize,
    s_grid: &[f64],
    seed: u64,
) -> Result<GaussianIdentityReport> {
    if n < function.min_dim() {
        return Err(Error::Invalid(format!("{function:?} needs n >= {}", function.min_dim())));
    }
    if n_samples < 2 {
        return Err(Error::Invalid("need at least two samples".into()));
    }
    let s_max = *s_grid.last().ok_or_else(|| Error::Invalid("empty s grid".into()))?;
    let w = exp_weights(s_grid, s_max)?;
    let coarse_grid: Vec<f64> = s_grid.iter().copied().step_by(2).collect();
    let w_coarse = exp_weights(&coarse_grid, s_max)?;
    let decay: Vec<(f64, f64)> = s_grid.iter().map(|&s| ((-s).exp(), (-(-2.0 * s).exp_m1()).sqrt())).collect();
    let rows = par_map(0, n_samples, |k| {
        let mut stream = Stream::new(seed, k as u64, FieldTag::Aux);
        let y = stream.normals(n);
        let yp = stream.normals(n);
        let mut z = vec![0.0; n];
        let mut fine = 0.0;
        let mut coarse = 0.0;
        for (idx, &(a, b)) in decay.iter().enumerate() {
            for i in 0..n {
                z[i] = a * y[i] + b * yp[i];
            }
            let g = function.gradient_product(&y, &z);
            fine += w[idx] * g;
            if idx % 2 == 0 {
                coarse += w_coarse[idx / 2] * g;
            }
        }
        Ok((fine, coarse, function.gradient_product(&y, &y)))
    })?;
    let fine: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let coarse: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let grad_sq: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let estimate = stats::mean(&fine);
    let mc_se = stats::std_error(&fine);
    let tail_bound = (-s_max).exp() * stats::mean(&grad_sq);
    let quadrature_error = (estimate - stats::mean(&coarse)).abs() / 3.0;
    let combined_se = (mc_se * mc_se + quadrature_error * quadrature_error + tail_bound * tail_bound).sqrt();
    let exact = function.exact_variance();
    Ok(GaussianIdentityReport {
        function,
        n,
        n_samples,
        exact,
        estimate,
        mc_se,
        tail_bound,
        quadrature_error,
        combined_se,
        pass: (estimate - exact).abs() <= 3.0 * combined_se,
    })
}

/// How the two replicas' boundary conditions are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ReplicaEnsemble {
    /// Periodic against antiperiodic along `axis`.
    Pa { axis: usize },
    /// Two independent random fixed outer layers sharing Gaussian slot
    /// couplings, all drawn per realization.
    Ff,
    /// Both replicas use the natural boundary condition; diagnostic only.
    Identical,
}

impl std::fmt::Display for ReplicaEnsemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Pa { axis } => write!(f, "pa:{axis}"),
            Self::Ff => f.write_str("ff"),
            Self::Identical => f.write_str("identical"),
        }
    }
}

impl ReplicaEnsemble {
    /// The two boundary conditions of realization `r`.
    pub fn boundary_conditions(
        &self,
        lattice: &BoxLattice,
        seed: u64,
        r: u64,
    ) -> Result<(BoundaryCondition, BoundaryCondition)> {
        let pair = match self {
            Self::Pa { axis } => (BoundaryCondition::Periodic, BoundaryCondition::Antiperiodic { axis: *axis }),
            Self::Ff => {
                let n = lattice.boundary_slots().len();
                if n == 0 {
                    return Err(Error::Invalid("fixed layers need an open axis".into()));
                }
                let couplings = Stream::new(seed, r, FieldTag::LayerCouplings).normals(n);
                let a = Stream::new(seed, r, FieldTag::LayerA).signs(n);
                let b = Stream::new(seed, r, FieldTag::LayerB).signs(n);
                (
                    BoundaryCondition::Fixed(FixedLayer::new(a, couplings.clone())),
                    BoundaryCondition::Fixed(FixedLayer::new(b, couplings)),
                )
            }
            Self::Identical => {
                let bc = BoundaryCondition::natural(lattice);
                (bc.clone(), bc)
            }
        };
        pair.0.validate(lattice)?;
        pair.1.validate(lattice)?;
        Ok(pair)
    }

    /// Lattice family matching the ensemble: open for `Ff`, periodic for `Pa`.
    pub fn setup(&self, d: usize) -> Setup {
        match self {
            Self::Pa { .. } => Setup::periodic(d),
            Self::Ff | Self::Identical => Setup::free(d),
        }
    }
}

/// Which couplings move along the interpolation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PathKind {
    Whole,
    Edge(usize),
}

/// Everything one realization contributes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaSample {
    pub realization: u64,
    /// `H_Λ(σ1) - H_Λ(σ2)` over interior edges with unflipped couplings.
    pub delta_h: f64,
    /// Full energies under each replica's boundary condition.
    pub energy_1: f64,
    pub energy_2: f64,
    /// `energy_1 - energy_2 - delta_h`: wrap signs and outer-layer terms.
    pub boundary_term: f64,
    /// `Q(σ1, σ2)`, or `σ1_b σ2_b` on a single-edge path.
    pub overlap_12: f64,
    /// Per grid `s`: `1 - Q(σi(0), σi(s))`, or the single-edge analogue.
    pub drift_1: Vec<f64>,
    pub drift_2: Vec<f64>,
    /// Per grid `s`: `Σ_b (σ1_b(s) - σ2_b(s))(σ1_b(0) - σ2_b(0))`.
    pub integrand: Vec<f64>,
}

fn edge_product(lattice: &BoxLattice, a: &SpinConfig, b: &SpinConfig, e: usize) -> f64 {
    f64::from(a.edge_value(lattice, e) * b.edge_value(lattice, e))
}

fn cross_sum(lattice: &BoxLattice, s1: &SpinConfig, s2: &SpinConfig, z1: &SpinConfig, z2: &SpinConfig) -> f64 {
    (0..lattice.n_edges())
        .map(|e| {
            let now = f64::from(s1.edge_value(lattice, e) - s2.edge_value(lattice, e));
            let then = f64::from(z1.edge_value(lattice, e) - z2.edge_value(lattice, e));
            now * then
        })
        .sum()
}

#[allow(clippy::too_many_arguments)]
fn replica_sample(
    lattice: &BoxLattice,
    setup: &Setup,
    ensemble: &ReplicaEnsemble,
    path_kind: PathKind,
    s_grid: &[f64],
    seed: u64,
    r: u64,
) -> Result<Option<ReplicaSample>> {
    let j = setup.disorder.sample(lattice, seed, r, FieldTag::Couplings);
    let (bc1, bc2) = ensemble.boundary_conditions(lattice, seed, r)?;
    let g1 = solve(lattice, &j, &bc1, setup.method)?;
    let g2 = solve(lattice, &j, &bc2, setup.method)?;
    if g1.degenerate || g2.degenerate {
        return Ok(None);
    }
    let delta_h = interior_energy(lattice, &j, &g1.config)? - interior_energy(lattice, &j, &g2.config)?;
    let overlap_12 = match path_kind {
        PathKind::Whole => edge_overlap(lattice, &g1.config, &g2.config)?,
        PathKind::Edge(b) => edge_product(lattice, &g1.config, &g2.config, b),
    };
    let mut drift_1 = Vec::with_capacity(s_grid.len());
    let mut drift_2 = Vec::with_capacity(s_grid.len());
    let mut integrand = Vec::with_capacity(s_grid.len());
    if !s_grid.is_empty() {
        let jp = setup.disorder.sample(lattice, seed, r, FieldTag::Target);
        let subset = match path_kind {
            PathKind::Whole => EdgeSubset::All,
            PathKind::Edge(b) => EdgeSubset::Edges(vec![b]),
        };
        let path = InterpolationPath::new(j.clone(), jp, subset)?;
        for &s in s_grid {
            let (z1, z2) = if s == 0.0 {
                (g1.config.clone(), g2.config.clone())
            } else {
                let js = path.at(s)?;
                let h1 = solve(lattice, &js, &bc1, setup.method)?;
                let h2 = solve(lattice, &js, &bc2, setup.method)?;
                if h1.degenerate || h2.degenerate {
                    return Ok(None);
                }
                (h1.config, h2.config)
            };
            match path_kind {
                PathKind::Whole => {
                    drift_1.push(1.0 - edge_overlap(lattice, &g1.config, &z1)?);
                    drift_2.push(1.0 - edge_overlap(lattice, &g2.config, &z2)?);
                }
                PathKind::Edge(b) => {
                    drift_1.push(1.0 - edge_product(lattice, &g1.config, &z1, b));
                    drift_2.push(1.0 - edge_product(lattice, &g2.config, &z2, b));
                }
            }
            integrand.push(cross_sum(lattice, &z1, &z2, &g1.config, &g2.config));
        }
    }
    Ok(Some(ReplicaSample {
        realization: r,
        delta_h,
        energy_1: g1.energy,
        energy_2: g2.energy,
        boundary_term: g1.energy - g2.energy - delta_h,
        overlap_12,
        drift_1,
        drift_2,
        integrand,
    }))
}

fn collect_samples(
    setup: &Setup,
    ensemble: &ReplicaEnsemble,
    l: usize,
    path_kind: PathKind,
    s_grid: &[f64],
    n_real: usize,
    seed: u64,
) -> Result<(BoxLattice, Vec<ReplicaSample>, usize)> {
    if n_real < 3 {
        return Err(Error::Invalid("variance estimates need n_real >= 3".into()));
    }
    let lattice = BoxLattice::build(setup.d, l, setup.topology.clone())?;
    if let PathKind::Edge(b) = path_kind {
        if b >= lattice.n_edges() {
            return Err(Error::Invalid(format!("edge {b} outside lattice with {} edges", lattice.n_edges())));
        }
    }
    let rows = par_map(setup.workers, n_real, |r| {
        replica_sample(&lattice, setup, ensemble, path_kind, s_grid, seed, r as u64)
    })?;
    let discarded = rows.iter().filter(|r| r.is_none()).count();
    check_discards(discarded, n_real)?;
    Ok((lattice, rows.into_iter().flatten().collect(), discarded))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVerdict {
    /// `LHS - 2 SE >= RHS + 2 SE`.
    Holds,
    /// The lower bound is not positive.
    HoldsTrivially,
    /// The 2-SE intervals overlap.
    Inconclusive,
    /// `LHS + 2 SE < RHS - 2 SE`; contradicts the inequality.
    Violated,
}

impl BoundVerdict {
    fn judge(lhs: Estimate, rhs: Estimate) -> Self {
        if rhs.value <= 0.0 {
            Self::HoldsTrivially
        } else if lhs.value - 2.0 * lhs.se >= rhs.value + 2.0 * rhs.se {
            Self::Holds
        } else if lhs.value + 2.0 * lhs.se < rhs.value - 2.0 * rhs.se {
            Self::Violated
        } else {
            Self::Inconclusive
        }
    }
}

/// Per grid `s`, the mean of the cross-sum integrand and whether it is
/// non-negative within 3 SE.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrandCheck {
    pub s: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub d: usize,
    pub l: usize,
    pub ensemble: String,
    /// `whole` or `edge:<b>`.
    pub path: String,
    pub seed: u64,
    pub n_real: usize,
    pub n_used: usize,
    pub n_discarded: usize,
    pub t: f64,
    pub s_grid: Vec<f64>,
    /// Sample variance of `ΔH` with jackknife SE.
    pub lhs: Estimate,
    /// Quadrature of the lower bound with jackknife SE.
    pub rhs: Estimate,
    /// `mean(1 - Q(σ1, σ2))`.
    pub incongruence_proxy: Estimate,
    /// Per grid `s`, `mean(1 - Q(σi(0), σi(s)))` for each replica.
    pub drift_1: Vec<f64>,
    pub drift_2: Vec<f64>,
    /// Mean of `ΔH` and of the boundary bookkeeping term.
    pub mean_delta_h: f64,
    pub mean_boundary_term: f64,
    pub integrand_check: IntegrandCheck,
    pub verdict: BoundVerdict,
    #[serde(skip)]
    pub samples: Vec<ReplicaSample>,
}

/// The lower bound from per-sample sums: `prefactor ∫_0^t {mean(1 - q12) -
/// root Σ_i sqrt(mean drift_i(s))} e^{-s} ds`, with the square root taken
/// of the averaged drift.
fn rhs_value(weights: &[f64], prefactor: f64, root: f64, n: f64, sum_q: f64, sum_d1: &[f64], sum_d2: &[f64]) -> f64 {
    let a = sum_q / n;
    let terms: Vec<f64> = (0..weights.len())
        .map(|k| {
            let g = a - root * ((sum_d1[k] / n).max(0.0).sqrt() + (sum_d2[k] / n).max(0.0).sqrt());
            weights[k] * g
        })
        .collect();
    prefactor * pairwise_sum(&terms)
}

/// Value and jackknife SE of the quadrature.
fn rhs_estimate(samples: &[ReplicaSample], weights: &[f64], prefactor: f64, root: f64) -> Estimate {
    let n = samples.len();
    let n_s = weights.len();
    let q: Vec<f64> = samples.iter().map(|x| 1.0 - x.overlap_12).collect();
    let sum_q = pairwise_sum(&q);
    let column = |f: &dyn Fn(&ReplicaSample) -> f64| pairwise_sum(&samples.iter().map(f).collect::<Vec<_>>());
    let sum_d1: Vec<f64> = (0..n_s).map(|k| column(&|x| x.drift_1[k])).collect();
    let sum_d2: Vec<f64> = (0..n_s).map(|k| column(&|x| x.drift_2[k])).collect();
    let full = rhs_value(weights, prefactor, root, n as f64, sum_q, &sum_d1, &sum_d2);
    let leave: Vec<f64> = (0..n)
        .map(|i| {
            let x = &samples[i];
            let d1: Vec<f64> = (0..n_s).map(|k| sum_d1[k] - x.drift_1[k]).collect();
            let d2: Vec<f64> = (0..n_s).map(|k| sum_d2[k] - x.drift_2[k]).collect();
            rhs_value(weights, prefactor, root, (n - 1) as f64, sum_q - q[i], &d1, &d2)
        })
        .collect();
    let lm = stats::mean(&leave);
    let dev: Vec<f64> = leave.iter().map(|v| (v - lm) * (v - lm)).collect();
    Estimate::new(full, ((n - 1) as f64 / n as f64 * pairwise_sum(&dev)).sqrt())
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    setup: &Setup,
    ensemble: &ReplicaEnsemble,
    lattice: &BoxLattice,
    path_kind: PathKind,
    samples: Vec<ReplicaSample>,
    discarded: usize,
    t: f64,
    s_grid: &[f64],
    seed: u64,
) -> Result<VarianceReport> {
    let n_used = samples.len();
    if n_used < 3 {
        return Err(Error::Invalid("fewer than 3 usable realizations".into()));
    }
    let delta: Vec<f64> = samples.iter().map(|x| x.delta_h).collect();
    let lhs = jackknife_variance(&delta);
    let q: Vec<f64> = samples.iter().map(|x| 1.0 - x.overlap_12).collect();
    let proxy = Estimate::of_mean(&q);
    let (rhs, drift_1, drift_2, check) = if s_grid.is_empty() {
        let empty = IntegrandCheck { s: vec![], mean: vec![], se: vec![], pass: true };
        (Estimate::new(f64::NAN, f64::NAN), vec![], vec![], empty)
    } else {
        let weights = exp_weights(s_grid, t)?;
        // sqrt(2 E[drift]) for the box, sqrt(2) sqrt(E[drift]) for one edge
        let prefactor = match path_kind {
            PathKind::Whole => 2.0 * lattice.n_edges() as f64,
            PathKind::Edge(_) => 2.0,
        };
        let root = std::f64::consts::SQRT_2;
        let rhs = rhs_estimate(&samples, &weights, prefactor, root);
        let mean_col = |f: &dyn Fn(&ReplicaSample) -> f64| stats::mean(&samples.iter().map(f).collect::<Vec<_>>());
        let d1 = (0..s_grid.len()).map(|k| mean_col(&|x| x.drift_1[k])).collect();
        let d2 = (0..s_grid.len()).map(|k| mean_col(&|x| x.drift_2[k])).collect();
        let mut mean = Vec::new();
        let mut se = Vec::new();
        for k in 0..s_grid.len() {
            let col: Vec<f64> = samples.iter().map(|x| x.integrand[k]).collect();
            mean.push(stats::mean(&col));
            se.push(stats::std_error(&col));
        }
        let pass = mean.iter().zip(&se).all(|(m, s)| *m >= -3.0 * s);
        (rhs, d1, d2, IntegrandCheck { s: s_grid.to_vec(), mean, se, pass })
    };
    let boundary: Vec<f64> = samples.iter().map(|x| x.boundary_term).collect();
    let verdict = if rhs.value.is_nan() { BoundVerdict::Inconclusive } else { BoundVerdict::judge(lhs, rhs) };
    Ok(VarianceReport {
        d: setup.d,
        l: lattice.side(),
        ensemble: ensemble.to_string(),
        path: match path_kind {
            PathKind::Whole => "whole".into(),
            PathKind::Edge(b) => format!("edge:{b}"),
        },
        seed,
        n_real: n_used + discarded,
        n_used,
        n_discarded: discarded,
        t,
        s_grid: s_grid.to_vec(),
        lhs,
        rhs,
        incongruence_proxy: proxy,
        drift_1,
        drift_2,
        mean_delta_h: stats::mean(&delta),
        mean_boundary_term: stats::mean(&boundary),
        integrand_check: check,
        verdict,
        samples,
    })
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Invalid(format!("t must be positive, got {t}")));
    }
    Ok(())
}

/// Sample variance of `ΔH = H_Λ(σ1) - H_Λ(σ2)` with jackknife SE.
pub fn lhs_variance(setup: &Setup, ensemble: &ReplicaEnsemble, l: usize, n_real: usize, seed: u64) -> Result<VarianceReport> {
    let (lattice, samples, discarded) = collect_samples(setup, ensemble, l, PathKind::Whole, &[], n_real, seed)?;
    build_report(setup, ensemble, &lattice, PathKind::Whole, samples, discarded, f64::NAN, &[], seed)
}

/// Both sides of the variance lower bound on one set of realizations, with
/// the whole box interpolated and the bound integrated over `[0, t]`.
pub fn variance_bound(
    setup: &Setup,
    ensemble: &ReplicaEnsemble,
    l: usize,
    t: f64,
    s_grid: &[f64],
    n_real: usize,
    seed: u64,
) -> Result<VarianceReport> {
    check_t(t)?;
    exp_weights(s_grid, t)?;
    let (lattice, samples, discarded) = collect_samples(setup, ensemble, l, PathKind::Whole, s_grid, n_real, seed)?;
    build_report(setup, ensemble, &lattice, PathKind::Whole, samples, discarded, t, s_grid, seed)
}

/// The right-hand side of the variance lower bound alone.
pub fn rhs_bound(
    setup: &Setup,
    ensemble: &ReplicaEnsemble,
    l: usize,
    t: f64,
    s_grid: &[f64],
    n_real: usize,
    seed: u64,
) -> Result<Estimate> {
    Ok(variance_bound(setup, ensemble, l, t, s_grid, n_real, seed)?.rhs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingleEdgeReport {
    pub edge: usize,
    pub bound: VarianceReport,
    /// Per used realization and replica, the first grid `s` at which the
    /// value of the edge differs from its value at `s = 0`.
    pub first_change_1: Vec<Option<f64>>,
    pub first_change_2: Vec<Option<f64>>,
}

/// The bound with only `J_b` interpolated and `Q` replaced by the edge
/// product, plus the per-realization constancy windows of `σ_b`.
#[allow(clippy::too_many_arguments)]
pub fn single_edge_bound(
    setup: &Setup,
    ensemble: &ReplicaEnsemble,
    l: usize,
    b: usize,
    t: f64,
    s_grid: &[f64],
    n_real: usize,
    seed: u64,
) -> Result<SingleEdgeReport> {
    check_t(t)?;
    exp_weights(s_grid, t)?;
    let kind = PathKind::Edge(b);
    let (lattice, samples, discarded) = collect_samples(setup, ensemble, l, kind, s_grid, n_real, seed)?;
    let first = |drift: &dyn Fn(&ReplicaSample) -> &Vec<f64>| -> Vec<Option<f64>> {
        samples
            .iter()
            .map(|x| drift(x).iter().zip(s_grid).find(|(d, _)| **d != 0.0).map(|(_, s)| *s))
            .collect()
    };
    let first_change_1 = first(&|x| &x.drift_1);
    let first_change_2 = first(&|x| &x.drift_2);
    let bound = build_report(setup, ensemble, &lattice, kind, samples, discarded, t, s_grid, seed)?;
    Ok(SingleEdgeReport { edge: b, bound, first_change_1, first_change_2 })
}

/// Periodic along axis 0 and open along the others.
pub fn cylinder(d: usize) -> Topology {
    let mut flags = vec![false; d];
    flags[0] = true;
    Topology::from_flags(flags)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StiffnessPoint {
    pub l: usize,
    pub n_real: usize,
    /// Mean of `X = E_P - E_AP`.
    pub mean_x: Estimate,
    pub var_x: Estimate,
    /// `Var(X) / L^{d-1}`.
    pub var_scaled: Estimate,
    /// Edges whose satisfaction differs between the two ground states,
    /// over realizations where both are unique.
    pub wall: Estimate,
    pub n_degenerate: usize,
    #[serde(skip)]
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StiffnessReport {
    pub d: usize,
    pub topology: String,
    pub axis: usize,
    pub seed: u64,
    pub points: Vec<StiffnessPoint>,
    /// `2θ` from `log Var(X)` against `log L`.
    pub two_theta: Option<ExponentFit>,
    /// Domain-wall dimension from `log mean wall` against `log L`.
    pub d_f: Option<ExponentFit>,
    /// Trend of `Var(X)/L^{d-1}` across sizes; the upper bound predicts none.
    pub scaled_trend: Option<MannKendall>,
}

/// Ground energies with periodic and antiperiodic-along-`axis` boundaries:
/// `X = E_P - E_AP`. Energies are unique even when configurations tie, so no
/// realization is discarded; ties only drop out of the wall statistic.
pub fn stiffness_scan(setup: &Setup, axis: usize, sizes: &[usize], n_real: usize, seed: u64) -> Result<StiffnessReport> {
    if n_real < 3 || sizes.is_empty() {
        return Err(Error::Invalid("stiffness scan needs sizes and n_real >= 3".into()));
    }
    let mut points = Vec::with_capacity(sizes.len());
    for &l in sizes {
        let lattice = BoxLattice::build(setup.d, l, setup.topology.clone())?;
        let ap = BoundaryCondition::Antiperiodic { axis };
        ap.validate(&lattice)?;
        let rows = par_map(setup.workers, n_real, |r| {
            let j = setup.disorder.sample(&lattice, seed, r as u64, FieldTag::Couplings);
            let p = solve(&lattice, &j, &BoundaryCondition::Periodic, setup.method)?;
            let a = solve(&lattice, &j, &ap, setup.method)?;
            let wall = (!p.degenerate && !a.degenerate).then(|| {
                (0..lattice.n_edges())
                    .filter(|&e| {
                        let edge = lattice.edge(e);
                        let sign = if edge.wraps && edge.axis == axis { -1 } else { 1 };
                        p.config.edge_value(&lattice, e) * a.config.edge_value(&lattice, e) * sign < 0
                    })
                    .count() as f64
            });
            Ok((p.energy - a.energy, wall))
        })?;
        let x: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let walls: Vec<f64> = rows.iter().filter_map(|r| r.1).collect();
        let var_x = jackknife_variance(&x);
        let scale = (l as f64).powi(setup.d as i32 - 1);
        points.push(StiffnessPoint {
            l,
            n_real,
            mean_x: Estimate::of_mean(&x),
            var_x,
            var_scaled: Estimate::new(var_x.value / scale, var_x.se / scale),
            wall: if walls.is_empty() { Estimate::new(f64::NAN, f64::NAN) } else { Estimate::of_mean(&walls) },
            n_degenerate: n_real - walls.len(),
            x,
        });
    }
    let ls: Vec<usize> = points.iter().map(|p| p.l).collect();
    let vars: Vec<f64> = points.iter().map(|p| p.var_x.value).collect();
    let walls: Vec<f64> = points.iter().map(|p| p.wall.value).collect();
    let two_theta = if ls.len() >= 3 && vars.iter().all(|v| *v > 0.0) {
        Some(loglog_fit("2theta", &ls, &vars, 1.0, 1.0)?)
    } else {
        None
    };
    let d_f = if ls.len() >= 3 && walls.iter().all(|w| *w > 0.0) {
        Some(loglog_fit("d_f", &ls, &walls, 1.0, 1.0)?)
    } else {
        None
    };
    let scaled: Vec<f64> = points.iter().map(|p| p.var_scaled.value).collect();
    let scaled_trend = (scaled.len() >= 3).then(|| mann_kendall(&scaled, 0.05));
    Ok(StiffnessReport {
        d: setup.d,
        topology: setup.topology.to_string(),
        axis,
        seed,
        points,
        two_theta,
        d_f,
        scaled_trend,
    })
}

/// `‖σ - σ'‖ = sqrt(2 - 2 Q(σ, σ'))`.
pub fn overlap_distance(lattice: &BoxLattice, a: &SpinConfig, b: &SpinConfig) -> Result<f64> {
    Ok((2.0 - 2.0 * edge_overlap(lattice, a, b)?).max(0.0).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriangleReport {
    pub l: usize,
    pub triples: usize,
    /// Largest `‖a - c‖ - ‖a - b‖ - ‖b - c‖` seen.
    pub worst_excess: f64,
    pub pass: bool,
}

/// Checks the triangle inequality of the overlap distance on random triples;
/// the second member perturbs the first and the third perturbs the second, so all
/// distance scales occur.
pub fn triangle_check(lattice: &BoxLattice, triples: usize, seed: u64) -> Result<TriangleReport> {
    let n = lattice.n_vertices();
    let excess = par_map(0, triples, |k| {
        let mut s = Stream::new(seed, k as u64, FieldTag::Aux);
        let a = SpinConfig::from_spins(s.signs(n));
        // flip each spin with a probability Φ(z - 1.5) drawn per member
        let perturb = |base: &SpinConfig, s: &mut Stream| {
            let z = s.normal() - 1.5;
            let mut c = base.clone();
            for v in 0..n {
                if s.normal() < z {
                    c.flip(v);
                }
            }
            c
        };
        let b = perturb(&a, &mut s);
        let c = perturb(&b, &mut s);
        let configs = [&a, &b, &c];
        let mut worst = f64::NEG_INFINITY;
        for (x, y, z) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            let direct = overlap_distance(lattice, configs[x], configs[z])?;
            let via = overlap_distance(lattice, configs[x], configs[y])? + overlap_distance(lattice, configs[y], configs[z])?;
            worst = worst.max(direct - via);
        }
        Ok(worst)
    })?;
    let worst_excess = excess.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(TriangleReport { l: lattice.side(), triples, worst_excess, pass: worst_excess <= 1e-12 })
}

/// Energies of the two replicas recomputed from scratch; used to cross-check
/// the bookkeeping term.
pub fn replica_energies(
    lattice: &BoxLattice,
    j: &CouplingField,
    bc1: &BoundaryCondition,
    bc2: &BoundaryCondition,
    method: Method,
) -> Result<(f64, f64, f64)> {
    let g1 = solve(lattice, j, bc1, method)?;
    let g2 = solve(lattice, j, bc2, method)?;
    let dh = interior_energy(lattice, j, &g1.config)? - interior_energy(lattice, j, &g2.config)?;
    Ok((g1.energy, g2.energy, dh))
}
