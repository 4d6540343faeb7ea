//! One function per experiment kind. Each writes its CSV/JSON files and
//! records discards, invariant violations and notes in the [`Log`].

use std::collections::BTreeMap;

use ealab::chaos::{
    adc_threshold, chaos_curve, collapse_fit, droplet_size_scan, fit_alpha, flexibility_histogram, relation_report,
    zero_chaos_window, AdcThreshold, ChaosCurve, CollapseFit, DropletScan, ExponentFit, FlexibilityHistogram,
    RelationInputs, RelationReport, ZeroChaosWindow,
};
use ealab::disorder::{CouplingField, EdgeSubset, FieldTag, InterpolationPath};
use ealab::excitation::{crossing_times, drift_check, stability_scan, WindowEnergyVector};
use ealab::experiment::{par_map, Setup};
use ealab::groundstate::{check_gs_criterion, solve, BoundaryCondition, CriterionReport, GroundStateRecord, Method};
use ealab::lattice::{BoxLattice, Topology};
use ealab::stats::{log_space, Estimate};
use ealab::variance::{
    cylinder, default_s_grid, gaussian_identity_selftest, single_edge_bound, stiffness_scan, triangle_check,
    variance_bound, BoundVerdict, GaussianIdentityReport, SingleEdgeReport, StiffnessReport, TestFunction,
    TriangleReport, VarianceReport,
};
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{RunError, RunResult};
use crate::output::{num, opt, DiscardCount, Outputs};

/// Enumeration cross-checks only run up to this many spins.
const CROSS_CHECK_MAX_SPINS: usize = 20;
/// Energy agreement required between the two exact solvers.
const SOLVER_TOL: f64 = 1e-12;

#[derive(Debug, Default)]
pub(crate) struct Log {
    pub discarded: Vec<DiscardCount>,
    pub violations: Vec<String>,
    pub notes: Vec<String>,
}

impl Log {
    fn discard(&mut self, stage: String, discarded: usize, total: usize) {
        self.discarded.push(DiscardCount { stage, discarded, total });
    }
}

/// Serde name of a unit enum variant.
fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        Ok(other) => other.to_string(),
        Err(_) => String::new(),
    }
}

fn s<T: ToString>(v: T) -> String {
    v.to_string()
}

// ---------------------------------------------------------------- gs

#[derive(Debug, Clone, Serialize)]
struct CrossCheck {
    enumeration_energy: f64,
    column_dp_energy: f64,
    energy_gap: f64,
    /// Configurations equal up to a global flip where the energy allows it.
    same_config: bool,
}

#[derive(Debug, Clone, Serialize)]
struct GsEntry {
    realization: u64,
    record: GroundStateRecord,
    criterion: CriterionReport,
    cross_check: Option<CrossCheck>,
}

fn cross_check(lattice: &BoxLattice, j: &CouplingField, bc: &BoundaryCondition) -> RunResult<Option<CrossCheck>> {
    if lattice.n_vertices() > CROSS_CHECK_MAX_SPINS {
        return Ok(None);
    }
    let e = solve(lattice, j, bc, Method::Enumeration)?;
    let c = match solve(lattice, j, bc, Method::ColumnDp) {
        Ok(c) => c,
        Err(ealab::Error::TooLarge { .. }) => return Ok(None),
        Err(err) => return Err(err.into()),
    };
    let same = e.config == c.config || (bc.is_flip_symmetric() && e.config == c.config.flipped());
    Ok(Some(CrossCheck {
        enumeration_energy: e.energy,
        column_dp_energy: c.energy,
        energy_gap: (e.energy - c.energy).abs(),
        same_config: same || e.degenerate,
    }))
}

fn gs_instance(
    cfg: &ExperimentConfig,
    lattice: &BoxLattice,
    bc: &BoundaryCondition,
    j: &CouplingField,
    realization: u64,
    seed: u64,
) -> RunResult<GsEntry> {
    let r = solve(lattice, j, bc, cfg.method)?;
    let criterion = check_gs_criterion(lattice, j, &r.config, bc, cfg.gs.criterion_k)?;
    let cross_check = if cfg.gs.cross_check { cross_check(lattice, j, bc)? } else { None };
    Ok(GsEntry { realization, record: r.record(lattice, bc, seed), criterion, cross_check })
}

pub(crate) fn gs(cfg: &ExperimentConfig, out: &mut Outputs, log: &mut Log) -> RunResult<()> {
    let setup = cfg.setup()?;
    let mut entries: Vec<GsEntry> = Vec::new();
    if let Some(path) = &cfg.gs.couplings {
        let bytes = std::fs::read(path).map_err(|e| RunError::io(path, e))?;
        let j = if path.extension().is_some_and(|e| e == "csv") {
            let text = String::from_utf8(bytes).map_err(|e| RunError::format(path, e.to_string()))?;
            CouplingField::from_csv(&text)?
        } else {
            CouplingField::read_binary(bytes.as_slice())?
        };
        let shape = j.shape().clone();
        let lattice = BoxLattice::with_dims(&shape.dims, shape.topology.clone())?;
        let bc = cfg.boundary_condition(&shape.topology)?;
        entries.push(gs_instance(cfg, &lattice, &bc, &j, 0, j.seed())?);
    } else {
        for &l in &cfg.sizes {
            let lattice = setup.lattice(l)?;
            let batch = par_map(setup.workers, cfg.n_real, |r| {
                let j = setup.disorder.sample(&lattice, cfg.seed, r as u64, FieldTag::Couplings);
                let entry = gs_instance(cfg, &lattice, &setup.bc, &j, r as u64, cfg.seed).map_err(core_error)?;
                let bytes = if cfg.gs.save_couplings {
                    let mut buf = Vec::new();
                    j.write_binary(&mut buf)?;
                    Some(buf)
                } else {
                    None
                };
                Ok((entry, bytes))
            })?;
            for (entry, bytes) in batch {
                if let Some(b) = bytes {
                    out.write_raw(&format!("couplings_L{l}_r{}.bin", entry.realization), &b)?;
                }
                entries.push(entry);
            }
        }
    }

    let mut degenerate: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for e in &entries {
        let slot = degenerate.entry(e.record.l).or_default();
        slot.1 += 1;
        if e.record.degenerate {
            slot.0 += 1;
        }
        if !e.criterion.pass {
            log.violations.push(format!(
                "L={} realization {}: ground-state criterion fails on cluster {:?} ({})",
                e.record.l, e.realization, e.criterion.worst_subset, e.criterion.worst_value
            ));
        }
        if let Some(c) = &e.cross_check {
            if c.energy_gap > SOLVER_TOL || !c.same_config {
                log.violations.push(format!(
                    "L={} realization {}: solvers disagree (energy gap {}, same config {})",
                    e.record.l, e.realization, c.energy_gap, c.same_config
                ));
            }
        }
    }
    for (l, (n_deg, total)) in degenerate {
        if n_deg > 0 {
            log.notes.push(format!("L={l}: {n_deg} of {total} instances have tied ground states (kept)"));
        }
    }

    out.csv(
        "groundstates.csv",
        "ealab.groundstates/1",
        &[
            "L",
            "realization",
            "solver",
            "energy",
            "degenerate",
            "gap",
            "criterion_pass",
            "criterion_worst",
            "subsets_checked",
            "cross_check_gap",
            "config",
        ],
        entries.iter().map(|e| {
            vec![
                s(e.record.l),
                s(e.realization),
                label(&e.record.solver),
                num(e.record.energy),
                s(e.record.degenerate),
                opt(e.record.gap),
                s(e.criterion.pass),
                num(e.criterion.worst_value),
                s(e.criterion.subsets_checked),
                opt(e.cross_check.as_ref().map(|c| c.energy_gap)),
                e.record.config.clone(),
            ]
        }),
    )?;
    out.json("groundstates.json", "ealab.groundstates/1", &entries)
}

/// Runner errors raised inside a parallel map travel as core errors.
fn core_error(e: RunError) -> ealab::Error {
    match e {
        RunError::Core(c) => c,
        other => ealab::Error::Invalid(other.to_string()),
    }
}

// ---------------------------------------------------------------- droplet

fn droplet_files(out: &mut Outputs, scan: &DropletScan) -> RunResult<()> {
    let mut hist = Vec::new();
    for st in &scan.per_size {
        let tail: BTreeMap<usize, f64> = st.tail.iter().copied().collect();
        for &(size, count) in &st.histogram {
            hist.push(vec![s(st.l), s(size), s(count), opt(tail.get(&size).copied())]);
        }
    }
    out.csv("droplet_hist.csv", "ealab.droplet_hist/1", &["L", "size", "count", "tail"], hist)?;
    let mut max = Vec::new();
    for st in &scan.per_size {
        for (k, m) in st.max_sizes.iter().enumerate() {
            max.push(vec![s(st.l), s(k), s(m)]);
        }
    }
    out.csv("droplet_max.csv", "ealab.droplet_max/1", &["L", "sample", "max_size"], max)
}

fn log_droplets(log: &mut Log, scan: &DropletScan, n_real: usize) {
    for st in &scan.per_size {
        log.discard(format!("droplet L={}", st.l), st.n_discarded, n_real);
    }
    if scan.gamma.is_none() {
        log.notes.push("gamma needs at least 3 sizes with droplets".into());
    }
}

pub(crate) fn droplet(cfg: &ExperimentConfig, out: &mut Outputs, log: &mut Log) -> RunResult<()> {
    let setup = cfg.setup()?;
    let scan = droplet_size_scan(&setup, &cfg.sizes, cfg.n_real, cfg.seed)?;
    log_droplets(log, &scan, cfg.n_real);
    droplet_files(out, &scan)?;
    out.json("droplets.json", "ealab.droplets/1", &scan)
}

// ---------------------------------------------------------------- chaos

#[derive(Debug, Serialize)]
struct ZeroWindowSummary {
    l: usize,
    n_real: usize,
    /// Realizations whose ground state moved no later than the guaranteed window.
    violations: usize,
    min_guaranteed_t: f64,
    windows: Vec<ZeroChaosWindow>,
}

#[derive(Debug, Serialize)]
struct ChaosReport {
    overlap_kind: &'static str,
    eps: f64,
    curves: Vec<ChaosCurve>,
    thresholds: Vec<AdcThreshold>,
    alpha: Option<ExponentFit>,
    collapse: Option<CollapseFit>,
    droplets: Option<DropletScan>,
    flexibility: Option<FlexibilityHistogram>,
    stiffness: Option<StiffnessReport>,
    zero_window: Vec<ZeroWindowSummary>,
    relations: RelationReport,
}

fn flexibility_files(out: &mut Outputs, h: &FlexibilityHistogram) -> RunResult<()> {
    let rows = (0..h.deltas.len()).map(|k| {
        vec![
            s(h.l),
            num(h.deltas[k]),
            s(h.counts[k]),
            num(h.prob[k]),
            num(h.se[k]),
            num(h.bound[k]),
            s(h.asserted[k]),
            s(h.holds[k]),
            opt(h.chain_reference.as_ref().map(|c| c[k])),
        ]
    });
    out.csv(
        "flexibility.csv",
        "ealab.flexibility/1",
        &["L", "delta", "count", "prob", "se", "bound", "asserted", "holds", "chain_reference"],
        rows,
    )
}

/// Chains have `F_b = 2|J_b|`; the histogram must match the exact law.
fn chain_mismatches(h: &FlexibilityHistogram) -> Vec<f64> {
    let Some(exact) = &h.chain_reference else {
        return Vec::new();
    };
    (0..h.deltas.len())
        .filter(|&k| {
            let se = (exact[k] * (1.0 - exact[k]) / h.n_samples as f64).sqrt();
            (h.prob[k] - exact[k]).abs() > 3.0 * se
        })
        .map(|k| h.deltas[k])
        .collect()
}

fn stiffness_files(out: &mut Outputs, r: &StiffnessReport) -> RunResult<()> {
    let rows = r.points.iter().map(|p| {
        vec![
            s(p.l),
            s(p.n_real),
            num(p.mean_x.value),
            num(p.mean_x.se),
            num(p.var_x.value),
            num(p.var_x.se),
            num(p.var_scaled.value),
            num(p.var_scaled.se),
            num(p.wall.value),
            num(p.wall.se),
            s(p.n_degenerate),
        ]
    });
    out.csv(
        "stiffness.csv",
        "ealab.stiffness/1",
        &[
            "L",
            "n_real",
            "mean_x",
            "mean_x_se",
            "var_x",
            "var_x_se",
            "var_scaled",
            "var_scaled_se",
            "wall",
            "wall_se",
            "n_degenerate",
        ],
        rows,
    )?;
    let mut raw = Vec::new();
    for p in &r.points {
        for (k, x) in p.x.iter().enumerate() {
            raw.push(vec![s(p.l), s(k), num(*x)]);
        }
    }
    out.csv("stiffness_raw.csv", "ealab.stiffness_raw/1", &["L", "realization", "x"], raw)
}

fn log_stiffness(log: &mut Log, r: &StiffnessReport) {
    if r.two_theta.is_none() {
        log.notes.push("2theta needs at least 3 sizes with positive variance".into());
    }
    if let Some(mk) = &r.scaled_trend {
        if mk.trend == ealab::stats::Trend::Increasing {
            log.notes.push(format!("Var(X)/L^(d-1) trends upward (Mann-Kendall p = {})", mk.p_value));
        }
    }
}

fn stiffness_setup(d: usize, disorder: ealab::experiment::Disorder, method: Method, workers: usize) -> Setup {
    Setup { d, topology: cylinder(d), bc: BoundaryCondition::Periodic, method, disorder, workers }
}

pub(crate) fn chaos(cfg: &ExperimentConfig, out: &mut Outputs, log: &mut Log) -> RunResult<()> {
    let setup = cfg.setup()?;
    let c = &cfg.chaos;
    let grid = c.grid();
    let mut curves = Vec::with_capacity(cfg.sizes.len());
    for &l in &cfg.sizes {
        let curve = chaos_curve(&setup, l, &grid, cfg.n_real, cfg.seed)?;
        log.discard(format!("chaos L={l}"), curve.n_discarded, cfg.n_real);
        curves.push(curve);
    }
    let thresholds: Vec<AdcThreshold> = curves.iter().map(|cv| adc_threshold(cv, c.eps)).collect::<Result<_, _>>()?;
    for th in thresholds.iter().filter(|t| t.below_grid) {
        log.notes.push(format!("L={}: mean(1-Q) exceeds eps at the first grid point; t* is an upper bound", th.l));
    }
    let pairs: Vec<(usize, f64)> = thresholds.iter().map(|t| (t.l, t.t_star)).collect();
    let alpha = note_err(log, "alpha", fit_alpha(&pairs, cfg.d));
    let collapse = note_err(log, "collapse", collapse_fit(&curves));

    let droplets = if c.droplets {
        let n = c.droplet_n_real.unwrap_or(cfg.n_real);
        let scan = droplet_size_scan(&setup, &cfg.sizes, n, cfg.seed)?;
        log_droplets(log, &scan, n);
        droplet_files(out, &scan)?;
        Some(scan)
    } else {
        None
    };

    let flexibility = if c.flexibility {
        let l = c.flexibility_size.unwrap_or(cfg.sizes[0]);
        let n = c.flexibility_n_real.unwrap_or(cfg.n_real);
        let h = flexibility_histogram(&setup, l, n, cfg.seed, &c.deltas)?;
        log.discard(format!("flexibility L={l}"), h.n_discarded, n);
        if !h.pass() {
            log.violations.push(format!("flexibility density exceeds delta/sqrt(2 pi) + 3 SE at L={l}"));
        }
        for delta in chain_mismatches(&h) {
            log.violations.push(format!("chain flexibility law off by more than 3 SE at delta={delta}"));
        }
        flexibility_files(out, &h)?;
        Some(h)
    } else {
        None
    };

    let stiffness = if c.stiffness_sizes.is_empty() {
        None
    } else {
        let st = stiffness_setup(cfg.d, cfg.disorder, cfg.method, cfg.workers);
        let r = stiffness_scan(&st, 0, &c.stiffness_sizes, c.stiffness_n_real.unwrap_or(cfg.n_real), cfg.seed)?;
        log_stiffness(log, &r);
        stiffness_files(out, &r)?;
        Some(r)
    };

    let mut zero_window = Vec::new();
    if c.zero_window_n_real > 0 {
        let mut rows = Vec::new();
        for &l in &cfg.sizes {
            let lattice = setup.lattice(l)?;
            let windows = par_map(setup.workers, c.zero_window_n_real, |r| {
                let j = setup.disorder.sample(&lattice, cfg.seed, r as u64, FieldTag::Couplings);
                let jp = setup.disorder.sample(&lattice, cfg.seed, r as u64, FieldTag::Target);
                zero_chaos_window(&lattice, &j, &jp, &setup.bc, &grid, setup.method)
            })?;
            let broken = windows.iter().filter(|w| w.first_break.is_some_and(|t| t <= w.guaranteed_t)).count();
            if broken > 0 {
                log.violations.push(format!("L={l}: {broken} ground states moved inside the drift-bound window"));
            }
            for (r, w) in windows.iter().enumerate() {
                rows.push(vec![
                    s(l),
                    s(r),
                    num(w.guaranteed_t),
                    num(w.min_flexibility),
                    num(w.max_coupling),
                    s(w.max_droplet),
                    opt(w.first_break),
                ]);
            }
            zero_window.push(ZeroWindowSummary {
                l,
                n_real: windows.len(),
                violations: broken,
                min_guaranteed_t: windows.iter().map(|w| w.guaranteed_t).fold(f64::INFINITY, f64::min),
                windows,
            });
        }
        out.csv(
            "zero_window.csv",
            "ealab.zero_window/1",
            &["L", "realization", "guaranteed_t", "min_flexibility", "max_coupling", "max_droplet", "first_break"],
            rows,
        )?;
    }

    let inputs = RelationInputs {
        d: cfg.d,
        alpha: alpha.as_ref().map(ExponentFit::as_estimate),
        gamma: droplets.as_ref().and_then(|d| d.gamma.as_ref()).map(ExponentFit::as_estimate),
        xi: collapse.as_ref().map(|f| Estimate::new(f.xi, f.xi_se)),
        theta: stiffness
            .as_ref()
            .and_then(|r| r.two_theta.as_ref())
            .map(|f| Estimate::new(f.estimate / 2.0, f.se / 2.0)),
        d_f: stiffness.as_ref().and_then(|r| r.d_f.as_ref()).map(ExponentFit::as_estimate),
    };
    let relations = relation_report(&inputs);

    let mut curve_rows = Vec::new();
    let mut raw_rows = Vec::new();
    for cv in &curves {
        for k in 0..cv.len() {
            curve_rows.push(vec![
                s(cv.l),
                num(cv.t[k]),
                num(cv.mean[k]),
                num(cv.se[k]),
                num(cv.q05[k]),
                num(cv.q50[k]),
                num(cv.q95[k]),
                s(cv.n_used),
                s(cv.n_discarded),
            ]);
        }
        for (sample, row) in cv.overlaps.iter().enumerate() {
            for (k, q) in row.iter().enumerate() {
                raw_rows.push(vec![s(cv.l), s(sample), num(cv.t[k]), num(*q)]);
            }
        }
    }
    out.csv(
        "chaos_curve.csv",
        "ealab.chaos_curve/1",
        &["L", "t", "mean", "se", "q05", "q50", "q95", "n_used", "n_discarded"],
        curve_rows,
    )?;
    out.csv("chaos_raw.csv", "ealab.chaos_raw/1", &["L", "sample", "t", "q"], raw_rows)?;
    out.csv(
        "thresholds.csv",
        "ealab.thresholds/1",
        &["L", "eps", "t_star", "below_grid"],
        thresholds.iter().map(|t| vec![s(t.l), num(t.eps), num(t.t_star), s(t.below_grid)]),
    )?;
    relation_files(out, &relations)?;
    let report = ChaosReport {
        overlap_kind: "edge",
        eps: c.eps,
        curves,
        thresholds,
        alpha,
        collapse,
        droplets,
        flexibility,
        stiffness,
        zero_window,
        relations,
    };
    out.json("chaos.json", "ealab.chaos/1", &report)
}

fn note_err<T>(log: &mut Log, what: &str, r: ealab::Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(e) => {
            log.notes.push(format!("{what}: {e}"));
            None
        }
    }
}

fn relation_files(out: &mut Outputs, r: &RelationReport) -> RunResult<()> {
    out.csv(
        "relations.csv",
        "ealab.relations/1",
        &["relation", "difference", "se", "lo", "hi", "verdict", "note"],
        r.relations.iter().map(|c| {
            vec![
                c.relation.clone(),
                num(c.difference.value),
                num(c.difference.se),
                num(c.interval.0),
                num(c.interval.1),
                label(&c.verdict),
                c.note.clone(),
            ]
        }),
    )
}

// ---------------------------------------------------------------- variance

#[derive(Debug, Serialize)]
struct VarianceRun {
    reports: Vec<VarianceReport>,
    single_edge: Vec<SingleEdgeReport>,
}

fn check_bound(log: &mut Log, r: &VarianceReport) {
    if r.verdict == BoundVerdict::Violated {
        log.violations.push(format!(
            "L={} {} {}: variance {} +- {} below lower bound {} +- {}",
            r.l, r.ensemble, r.path, r.lhs.value, r.lhs.se, r.rhs.value, r.rhs.se
        ));
    }
    if !r.integrand_check.pass {
        log.violations.push(format!("L={} {} {}: cross-sum integrand negative beyond 3 SE", r.l, r.ensemble, r.path));
    }
    log.discard(format!("variance L={} {}", r.l, r.path), r.n_discarded, r.n_real);
}

pub(crate) fn variance(cfg: &ExperimentConfig, out: &mut Outputs, log: &mut Log) -> RunResult<()> {
    let setup = cfg.setup()?;
    let ensemble = cfg.ensemble()?;
    let v = &cfg.variance;
    let grid = default_s_grid(v.t, v.s_points);
    let mut run = VarianceRun { reports: Vec::new(), single_edge: Vec::new() };
    for &l in &cfg.sizes {
        let r = variance_bound(&setup, &ensemble, l, v.t, &grid, cfg.n_real, cfg.seed)?;
        check_bound(log, &r);
        run.reports.push(r);
        if let Some(b) = v.edge {
            let r = single_edge_bound(&setup, &ensemble, l, b, v.t, &grid, cfg.n_real, cfg.seed)?;
            check_bound(log, &r.bound);
            run.single_edge.push(r);
        }
    }
    let all: Vec<&VarianceReport> = run.reports.iter().chain(run.single_edge.iter().map(|x| &x.bound)).collect();
    out.csv(
        "variance.csv",
        "ealab.variance/1",
        &[
            "L",
            "ensemble",
            "path",
            "n_used",
            "n_discarded",
            "lhs",
            "lhs_se",
            "rhs",
            "rhs_se",
            "proxy",
            "proxy_se",
            "mean_delta_h",
            "mean_boundary_term",
            "verdict",
            "integrand_pass",
        ],
        all.iter().map(|r| {
            vec![
                s(r.l),
                r.ensemble.clone(),
                r.path.clone(),
                s(r.n_used),
                s(r.n_discarded),
                num(r.lhs.value),
                num(r.lhs.se),
                num(r.rhs.value),
                num(r.rhs.se),
                num(r.incongruence_proxy.value),
                num(r.incongruence_proxy.se),
                num(r.mean_delta_h),
                num(r.mean_boundary_term),
                label(&r.verdict),
                s(r.integrand_check.pass),
            ]
        }),
    )?;
    let mut raw = Vec::new();
    let mut integrand = Vec::new();
    for r in &all {
        for x in &r.samples {
            raw.push(vec![
                s(r.l),
                r.path.clone(),
                s(x.realization),
                num(x.delta_h),
                num(x.energy_1),
                num(x.energy_2),
                num(x.boundary_term),
                num(x.overlap_12),
            ]);
        }
        let ic = &r.integrand_check;
        for k in 0..ic.s.len() {
            integrand.push(vec![
                s(r.l),
                r.path.clone(),
                num(ic.s[k]),
                num(r.drift_1[k]),
                num(r.drift_2[k]),
                num(ic.mean[k]),
                num(ic.se[k]),
            ]);
        }
    }
    out.csv(
        "variance_raw.csv",
        "ealab.variance_raw/1",
        &["L", "path", "realization", "delta_h", "energy_1", "energy_2", "boundary_term", "overlap_12"],
        raw,
    )?;
    out.csv(
        "variance_integrand.csv",
        "ealab.variance_integrand/1",
        &["L", "path", "s", "drift_1", "drift_2", "integrand_mean", "integrand_se"],
        integrand,
    )?;
    if !run.single_edge.is_empty() {
        let mut rows = Vec::new();
        for r in &run.single_edge {
            for (k, x) in r.bound.samples.iter().enumerate() {
                rows.push(vec![s(r.bound.l), s(r.edge), s(x.realization), opt(r.first_change_1[k]), opt(r.first_change_2[k])]);
            }
        }
        out.csv(
            "single_edge.csv",
            "ealab.single_edge/1",
            &["L", "edge", "realization", "first_change_1", "first_change_2"],
            rows,
        )?;
    }
    out.json("variance.json", "ealab.variance/1", &run)
}

// ---------------------------------------------------------------- stiffness

pub(crate) fn stiffness(cfg: &ExperimentConfig, out: &mut Outputs, log: &mut Log) -> RunResult<()> {
    let setup = cfg.setup()?;
    let r = stiffness_scan(&setup, cfg.stiffness.axis, &cfg.sizes, cfg.n_real, cfg.seed)?;
    log_stiffness(log, &r);
    stiffness_files(out, &r)?;
    out.json("stiffness.json", "ealab.stiffness/1", &r)
}

// ---------------------------------------------------------------- window

#[derive(Debug, Clone, Serialize)]
struct WindowRow {
    window: usize,
    crossings: Vec<(f64, usize, usize)>,
}

#[derive(Debug, Clone, Serialize)]
struct StabilityRow {
    edge: usize,
    points: usize,
    violations: usize,
    max_droplet: usize,
    drift_lhs: f64,
    drift_rhs: f64,
    drift_worst_margin: f64,
    drift_pass: bool,
}

#[derive(Debug, Serialize)]
struct WindowSummary {
    l: usize,
    edges: Vec<usize>,
    bound: u64,
    max_crossings: usize,
    mean_crossings: f64,
    paths: usize,
}

#[derive(Debug, Serialize)]
struct StabilitySummary {
    l: usize,
    edge: usize,
    paths: usize,
    violations: usize,
    drift_failures: usize,
    worst_drift_margin: f64,
}

#[derive(Debug, Serialize)]
struct WindowRun {
    t_max: f64,
    dt: f64,
    t_stability: f64,
    windows: Vec<WindowSummary>,
    stability: Vec<StabilitySummary>,
}

/// Bound on crossings of a `k`-edge window: `4^k`, and 2 for one edge.
fn crossing_bound(k: usize) -> u64 {
    if k == 1 {
        2
    } else {
        4u64.pow(k as u32)
    }
}

fn window_name(w: &[usize]) -> String {
    w.iter().map(usize::to_string).collect::<Vec<_>>().join("+")
}

pub(crate) fn window(cfg: &ExperimentConfig, out: &mut Outputs, log: &mut Log) -> RunResult<()> {
    let setup = cfg.setup()?;
    let w = &cfg.window;
    let n_steps = (w.t_stability / w.dt).round() as usize;
    let grid: Vec<f64> = (0..=n_steps).map(|k| (k as f64 * w.dt).min(w.t_stability)).collect();
    let mut run = WindowRun { t_max: w.t_max, dt: w.dt, t_stability: w.t_stability, windows: Vec::new(), stability: Vec::new() };
    let (mut window_rows, mut crossing_rows, mut stability_rows) = (Vec::new(), Vec::new(), Vec::new());
    for &l in &cfg.sizes {
        let lattice = setup.lattice(l)?;
        let m = lattice.n_edges();
        if let Some(e) = w.windows.iter().flatten().chain(&w.stability_edges).find(|&&e| e >= m) {
            return Err(RunError::Config { field: "window".into(), reason: format!("edge {e} outside L={l} ({m} edges)") });
        }
        let rows = par_map(setup.workers, cfg.n_real, |r| {
            let j = setup.disorder.sample(&lattice, cfg.seed, r as u64, FieldTag::Couplings);
            let jp = setup.disorder.sample(&lattice, cfg.seed, r as u64, FieldTag::Target);
            let mut wrows = Vec::with_capacity(w.windows.len());
            for (k, edges) in w.windows.iter().enumerate() {
                let v = WindowEnergyVector::compute(&lattice, &j, &setup.bc, edges, setup.method)?;
                let path = if edges.len() == 1 {
                    InterpolationPath::single_edge(j.clone(), jp.clone(), edges[0])?
                } else {
                    InterpolationPath::new(j.clone(), jp.clone(), EdgeSubset::Edges(edges.clone()))?
                };
                let cr = crossing_times(&v, &path, w.t_max)?;
                wrows.push(WindowRow { window: k, crossings: cr.iter().map(|c| (c.t, c.pair.0, c.pair.1)).collect() });
            }
            let mut srows = Vec::with_capacity(w.stability_edges.len());
            for &b in &w.stability_edges {
                let st = stability_scan(&lattice, &j, &jp, &setup.bc, b, &grid, setup.method)?;
                let dr = drift_check(&lattice, &j, &jp, &setup.bc, b, w.t_stability, w.drift_points, setup.method)?;
                srows.push(StabilityRow {
                    edge: b,
                    points: st.points.len(),
                    violations: st.violations.len(),
                    max_droplet: st.max_droplet,
                    drift_lhs: dr.lhs,
                    drift_rhs: dr.rhs,
                    drift_worst_margin: dr.worst_margin,
                    drift_pass: dr.pass(),
                });
            }
            Ok((wrows, srows))
        })?;

        for (k, edges) in w.windows.iter().enumerate() {
            let counts: Vec<usize> = rows.iter().map(|(wr, _)| wr[k].crossings.len()).collect();
            let bound = crossing_bound(edges.len());
            let max = counts.iter().copied().max().unwrap_or(0);
            if max as u64 > bound {
                log.violations.push(format!("L={l} window {}: {max} crossings exceed {bound}", window_name(edges)));
            }
            run.windows.push(WindowSummary {
                l,
                edges: edges.clone(),
                bound,
                max_crossings: max,
                mean_crossings: counts.iter().sum::<usize>() as f64 / counts.len() as f64,
                paths: counts.len(),
            });
        }
        for (i, &b) in w.stability_edges.iter().enumerate() {
            let col: Vec<&StabilityRow> = rows.iter().map(|(_, sr)| &sr[i]).collect();
            let violations: usize = col.iter().map(|x| x.violations).sum();
            let drift_failures = col.iter().filter(|x| !x.drift_pass).count();
            if violations > 0 || drift_failures > 0 {
                log.violations.push(format!(
                    "L={l} edge {b}: {violations} stability violations, {drift_failures} drift-bound failures"
                ));
            }
            run.stability.push(StabilitySummary {
                l,
                edge: b,
                paths: col.len(),
                violations,
                drift_failures,
                worst_drift_margin: col.iter().map(|x| x.drift_worst_margin).fold(f64::NEG_INFINITY, f64::max),
            });
        }
        for (r, (wr, sr)) in rows.iter().enumerate() {
            for row in wr {
                let edges = &w.windows[row.window];
                window_rows.push(vec![
                    s(l),
                    s(r),
                    window_name(edges),
                    s(edges.len()),
                    s(row.crossings.len()),
                    s(crossing_bound(edges.len())),
                ]);
                for &(t, a, b) in &row.crossings {
                    crossing_rows.push(vec![s(l), s(r), window_name(edges), num(t), s(a), s(b)]);
                }
            }
            for x in sr {
                stability_rows.push(vec![
                    s(l),
                    s(r),
                    s(x.edge),
                    s(x.points),
                    s(x.violations),
                    s(x.max_droplet),
                    num(x.drift_lhs),
                    num(x.drift_rhs),
                    num(x.drift_worst_margin),
                    s(x.drift_pass),
                ]);
            }
        }
    }
    out.csv(
        "window.csv",
        "ealab.window/1",
        &["L", "realization", "window", "n_edges", "crossings", "bound"],
        window_rows,
    )?;
    out.csv(
        "window_crossings.csv",
        "ealab.window_crossings/1",
        &["L", "realization", "window", "t", "config_a", "config_b"],
        crossing_rows,
    )?;
    out.csv(
        "stability.csv",
        "ealab.stability/1",
        &[
            "L",
            "realization",
            "edge",
            "points",
            "violations",
            "max_droplet",
            "drift_lhs",
            "drift_rhs",
            "drift_worst_margin",
            "drift_pass",
        ],
        stability_rows,
    )?;
    out.json("window.json", "ealab.window/1", &run)
}

// ---------------------------------------------------------------- selftest

#[derive(Debug, Clone, Serialize)]
pub struct SolverCheck {
    pub dims: Vec<usize>,
    pub instances: usize,
    pub max_energy_gap: f64,
    /// Non-degenerate instances whose configurations differ beyond a flip.
    pub config_mismatches: usize,
    pub degenerate: usize,
    pub criterion_failures: usize,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
struct SelftestRun {
    gaussian: Vec<GaussianIdentityReport>,
    solvers: Vec<SolverCheck>,
    triangle: Vec<TriangleReport>,
}

/// `0` followed by 200 log-spaced points in `[1e-4, 20]`.
pub fn identity_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(log_space(1e-4, 20.0, 200));
    g
}

/// Enumeration against the column DP on open boxes of shape `dims`, plus the
/// ground-state criterion on every enumeration result.
pub fn solver_check(dims: &[usize], instances: usize, k: usize, seed: u64, workers: usize) -> ealab::Result<SolverCheck> {
    let lattice = BoxLattice::with_dims(dims, Topology::open(dims.len()))?;
    let bc = BoundaryCondition::Free;
    let rows = par_map(workers, instances, |i| {
        let j = CouplingField::sample_stream(&lattice, seed, i as u64, FieldTag::Couplings);
        let e = solve(&lattice, &j, &bc, Method::Enumeration)?;
        let c = solve(&lattice, &j, &bc, Method::ColumnDp)?;
        let same = e.config == c.config || e.config == c.config.flipped();
        let crit = check_gs_criterion(&lattice, &j, &e.config, &bc, k)?;
        Ok(((e.energy - c.energy).abs(), same, e.degenerate, crit.pass))
    })?;
    let max_energy_gap = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let config_mismatches = rows.iter().filter(|r| !r.1 && !r.2).count();
    let degenerate = rows.iter().filter(|r| r.2).count();
    let criterion_failures = rows.iter().filter(|r| !r.3).count();
    Ok(SolverCheck {
        dims: dims.to_vec(),
        instances,
        max_energy_gap,
        config_mismatches,
        degenerate,
        criterion_failures,
        pass: max_energy_gap <= SOLVER_TOL && config_mismatches == 0 && criterion_failures == 0,
    })
}

pub(crate) fn selftest(cfg: &ExperimentConfig, out: &mut Outputs, log: &mut Log) -> RunResult<()> {
    let st = &cfg.selftest;
    let grid = identity_grid();
    let mut run = SelftestRun { gaussian: Vec::new(), solvers: Vec::new(), triangle: Vec::new() };
    for f in [TestFunction::Linear, TestFunction::Square, TestFunction::Product, TestFunction::Hermite3] {
        let r = gaussian_identity_selftest(f, st.n, st.samples, &grid, cfg.seed)?;
        if !r.pass {
            log.violations.push(format!(
                "Gaussian identity {}: {} vs exact {} (combined SE {})",
                label(&f),
                r.estimate,
                r.exact,
                r.combined_se
            ));
        }
        run.gaussian.push(r);
    }
    for dims in &st.shapes {
        let r = solver_check(dims, st.instances, st.criterion_k, cfg.seed, cfg.workers)?;
        if !r.pass {
            log.violations.push(format!(
                "solvers on {dims:?}: energy gap {}, {} mismatches, {} criterion failures",
                r.max_energy_gap, r.config_mismatches, r.criterion_failures
            ));
        }
        run.solvers.push(r);
    }
    let setup = cfg.setup()?;
    for &l in &cfg.sizes {
        let lattice = setup.lattice(l)?;
        let r = triangle_check(&lattice, st.triples, cfg.seed)?;
        if !r.pass {
            log.violations.push(format!("overlap distance breaks the triangle inequality at L={l} by {}", r.worst_excess));
        }
        run.triangle.push(r);
    }

    let mut rows = Vec::new();
    for g in &run.gaussian {
        rows.push(vec![
            "gaussian_identity".into(),
            format!("{}:n={}", label(&g.function), g.n),
            num(g.estimate),
            num(g.exact),
            num(3.0 * g.combined_se),
            s(g.pass),
        ]);
    }
    for c in &run.solvers {
        let dims: Vec<String> = c.dims.iter().map(usize::to_string).collect();
        rows.push(vec![
            "solver_agreement".into(),
            dims.join("x"),
            num(c.max_energy_gap),
            "0".into(),
            num(SOLVER_TOL),
            s(c.pass),
        ]);
    }
    for t in &run.triangle {
        rows.push(vec!["triangle".into(), format!("L={}", t.l), num(t.worst_excess), "0".into(), num(1e-12), s(t.pass)]);
    }
    out.csv("selftest.csv", "ealab.selftest/1", &["check", "case", "value", "reference", "tolerance", "pass"], rows)?;
    out.json("selftest.json", "ealab.selftest/1", &run)
}
