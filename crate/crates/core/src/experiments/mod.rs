//! Scenario configuration, batch runs over `(method, N, d_A)` cells and
//! result output.

mod config;
mod output;

use std::f64::consts::FRAC_PI_2;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    BoundConfig, ChannelSpec, FixedChannel, GridSetting, Instance, Method, OutputConfig, OutputFormat, ScenarioConfig,
    SeesawConfig,
};
pub use output::{emit_results, parse_csv, plot_series, records_to_csv, records_to_json, PlotSeries};

use crate::channels::{convex_interpolation, kraus_path_from_choi_family, make_channel, ChannelFamily};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::metrology::{err_bound_from_qfi, integrated_err_bounds, qfi_iterative_bound, PathGrid};
use crate::seesaw::run_seesaw;
use crate::tester::{solve_exact_with, TesterCap};

/// One result cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scenario: String,
    pub method: Method,
    pub delta_theta: Option<f64>,
    pub n: usize,
    pub d_anc: Option<usize>,
    pub p_err: Option<f64>,
    pub p_succ: Option<f64>,
    /// `optimal` / `max_iter` for exact cells, `converged` / `max_cycles`
    /// for see-saw cells, `ok` for bounds, or `skipped` / `failed`.
    pub status: String,
    pub seed: Option<u64>,
    /// Fisher-information bound `F_N` (phase-encoded scenarios).
    pub qfi: Option<f64>,
    /// Bound on the Bures angle between the two output states.
    pub angle: Option<f64>,
    pub wall_time: Option<f64>,
    /// Reason for a skip or failure.
    pub detail: String,
}

impl ResultRecord {
    fn new(scenario: &str, method: Method, delta_theta: Option<f64>, n: usize) -> Self {
        Self {
            scenario: scenario.to_string(),
            method,
            delta_theta,
            n,
            d_anc: None,
            p_err: None,
            p_succ: None,
            status: String::new(),
            seed: None,
            qfi: None,
            angle: None,
            wall_time: None,
            detail: String::new(),
        }
    }

    fn with_p_err(mut self, p_err: f64) -> Self {
        self.p_err = Some(p_err);
        self.p_succ = Some(1.0 - p_err);
        self
    }

    fn with_status(mut self, status: impl Into<String>) -> Self {
        self.status = status.into();
        self
    }

    fn failed(mut self, e: &Error) -> Self {
        warn!("{} {} N = {} failed: {e}", self.scenario, self.method.name(), self.n);
        self.status = "failed".into();
        self.detail = e.to_string();
        self
    }

    fn skipped(mut self, why: impl Into<String>) -> Self {
        self.status = "skipped".into();
        self.detail = why.into();
        self
    }
}

/// Order-normalizes records so output does not depend on scheduling.
pub fn sort_records(records: &mut [ResultRecord]) {
    let dt = |r: &ResultRecord| r.delta_theta.unwrap_or(f64::NEG_INFINITY);
    records.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(dt(a).total_cmp(&dt(b)))
            .then(a.d_anc.cmp(&b.d_anc))
            .then(a.n.cmp(&b.n))
    });
}

/// Half the rotation angle between two unitaries, `arccos(|Tr U1†U2| / d)`.
pub fn unitary_separation_angle(u1: &CMat, u2: &CMat) -> Result<f64> {
    if u1.shape() != u2.shape() || !u1.is_square() {
        return Err(Error::DimensionMismatch("unitaries differ in shape".into()));
    }
    let overlap = linalg::trace(&(u1.adjoint() * u2)).norm() / u1.nrows() as f64;
    Ok(overlap.clamp(0.0, 1.0).acos())
}

/// Optimal error for `N` uses of one of two unitaries separated by `alpha`:
/// `½[1 − sin(min(Nα, π/2))]`.
pub fn unitary_error_from_angle(alpha: f64, n: usize) -> f64 {
    let a = n as f64 * alpha;
    if a >= FRAC_PI_2 {
        0.0
    } else {
        0.5 * (1.0 - a.sin())
    }
}

/// The noiseless benchmark curve for rotations differing by `delta_theta`.
pub fn unitary_error_curve(delta_theta: f64, n: usize) -> f64 {
    let m = make_channel(ChannelFamily::UnitaryZRotation).expect("parameter free");
    let u1 = m.kraus_at(0.0).kraus()[0].clone();
    let u2 = m.kraus_at(delta_theta).kraus()[0].clone();
    let alpha = unitary_separation_angle(&u1, &u2).expect("same shape");
    unitary_error_from_angle(alpha, n)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 or 1 runs sequentially.
    pub jobs: usize,
    /// Replaces the configured see-saw seed.
    pub seed: Option<u64>,
    /// Restricts the run to these methods.
    pub methods: Option<Vec<Method>>,
}

#[derive(Debug, Clone, Copy)]
enum Cell {
    Exact { inst: usize, n: usize },
    Seesaw { inst: usize, n: usize, d_anc: usize },
    QfiBound { inst: usize },
    UnitaryBound { inst: usize },
}

fn plan(cfg: &ScenarioConfig, n_inst: usize, methods: &[Method]) -> Vec<Cell> {
    let ns = cfg.n_list();
    if ns.is_empty() {
        return Vec::new();
    }
    let mut cells = Vec::new();
    for inst in 0..n_inst {
        for &m in methods {
            match m {
                Method::Exact => cells.extend(ns.iter().map(|&n| Cell::Exact { inst, n })),
                Method::Seesaw => {
                    for &d_anc in &cfg.d_anc {
                        cells.extend(ns.iter().map(|&n| Cell::Seesaw { inst, n, d_anc }));
                    }
                }
                Method::QfiBound => cells.push(Cell::QfiBound { inst }),
                Method::UnitaryBound => cells.push(Cell::UnitaryBound { inst }),
            }
        }
    }
    cells
}

fn run_cell(cfg: &ScenarioConfig, instances: &[Instance], cell: Cell, seed: u64) -> Vec<ResultRecord> {
    let name = cfg.name.as_str();
    let start = Instant::now();
    let mut out = match cell {
        Cell::Exact { inst, n } => {
            let Instance { delta_theta, inst } = &instances[inst];
            let rec = ResultRecord::new(name, Method::Exact, *delta_theta, n);
            let rec = match cfg.exact_max_n {
                Some(cap) if n > cap => rec.skipped(format!("N above exact_max_n = {cap}")),
                _ => match solve_exact_with(inst, n, &TesterCap::default(), &crate::sdp::SolverOptions::from_env()) {
                    Ok(r) => rec.with_p_err(r.p_err()).with_status(r.status.to_string()),
                    Err(Error::CapExceeded(why)) => rec.skipped(why),
                    Err(e) => rec.failed(&e),
                },
            };
            vec![rec]
        }
        Cell::Seesaw { inst, n, d_anc } => {
            let Instance { delta_theta, inst } = &instances[inst];
            let mut opts = cfg.seesaw_options();
            opts.seed = seed;
            let mut rec = ResultRecord::new(name, Method::Seesaw, *delta_theta, n);
            rec.d_anc = Some(d_anc);
            rec.seed = Some(seed);
            let rec = match run_seesaw(inst, n, d_anc, &opts) {
                Ok(r) => rec.with_p_err(r.p_err()).with_status(if r.converged { "converged" } else { "max_cycles" }),
                Err(e) => rec.failed(&e),
            };
            vec![rec]
        }
        Cell::QfiBound { inst } => qfi_cells(cfg, &instances[inst]),
        Cell::UnitaryBound { inst } => {
            let dt = instances[inst].delta_theta.expect("validated: phase scenario");
            cfg.n_list()
                .into_iter()
                .map(|n| {
                    let mut rec = ResultRecord::new(name, Method::UnitaryBound, Some(dt), n);
                    rec.angle = Some(n as f64 * 0.5 * dt.abs());
                    rec.with_p_err(unitary_error_curve(dt, n)).with_status("ok")
                })
                .collect()
        }
    };
    let secs = start.elapsed().as_secs_f64();
    // Bound cells cover every N at once; the time is split evenly.
    let share = secs / out.len().max(1) as f64;
    for r in &mut out {
        r.wall_time = Some(share);
    }
    if let Some(r) = out.first() {
        info!("{name}: {} N = {} d_A = {:?} done in {secs:.2}s", r.method.name(), r.n, r.d_anc);
    }
    out
}

fn qfi_cells(cfg: &ScenarioConfig, instance: &Instance) -> Vec<ResultRecord> {
    let ns = cfg.n_list();
    let n_max = *ns.last().expect("nonempty plan");
    let name = cfg.name.as_str();
    let blank = |n| ResultRecord::new(name, Method::QfiBound, instance.delta_theta, n);
    match &cfg.channels {
        ChannelSpec::Phase { model, theta0, .. } => {
            let dt = instance.delta_theta.expect("phase scenario");
            let m = match make_channel(*model) {
                Ok(m) => m,
                Err(e) => return ns.iter().map(|&n| blank(n).failed(&e)).collect(),
            };
            match qfi_iterative_bound(m.kraus_at(*theta0).kraus(), &m.dkraus_at(*theta0), n_max) {
                Ok(series) => ns
                    .iter()
                    .map(|&n| {
                        let f = series.at(n);
                        let mut rec = blank(n).with_p_err(err_bound_from_qfi(f, dt)).with_status("ok");
                        rec.qfi = Some(f);
                        rec.angle = Some(0.5 * dt.abs() * f.max(0.0).sqrt());
                        rec
                    })
                    .collect(),
                Err(e) => ns.iter().map(|&n| blank(n).failed(&e)).collect(),
            }
        }
        ChannelSpec::Fixed { .. } => match path_bounds(cfg, instance, n_max) {
            Ok(bounds) => ns
                .iter()
                .map(|&n| {
                    let b = &bounds[n - 1];
                    let mut rec = blank(n).with_p_err(b.bound).with_status("ok");
                    rec.angle = Some(b.angle);
                    if !b.excluded.is_empty() {
                        rec.detail = format!("{} flagged path points excluded", b.excluded.len());
                    }
                    rec
                })
                .collect(),
            Err(e) => ns.iter().map(|&n| blank(n).failed(&e)).collect(),
        },
    }
}

fn path_bounds(cfg: &ScenarioConfig, instance: &Instance, n_max: usize) -> Result<Vec<crate::metrology::IntegratedBound>> {
    let chois = instance.inst.chois();
    let (a, b) = (&chois[0], &chois[1]);
    let bc = &cfg.bound;
    let grid = PathGrid::new(bc.grid.into(), 0.0, 1.0, bc.grid_points)?;
    let path = kraus_path_from_choi_family(|p| convex_interpolation(a, b, p), &grid.nodes, bc.rank_tol, bc.fd_step)?;
    integrated_err_bounds(&path, &grid, n_max, bc.exclude_flagged)
}

/// Runs every cell of a scenario. Per-cell failures become `failed`
/// records; only an unusable configuration is an error.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let instances = cfg.instances()?;
    let methods: Vec<Method> = match &opts.methods {
        Some(only) => cfg.methods.iter().copied().filter(|m| only.contains(m)).collect(),
        None => cfg.methods.clone(),
    };
    let cells = plan(cfg, instances.len(), &methods);
    let seed = opts.seed.unwrap_or(cfg.seesaw.seed);
    info!("{}: {} cells", cfg.name, cells.len());
    let mut records: Vec<ResultRecord> = if opts.jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        pool.install(|| cells.par_iter().flat_map_iter(|&c| run_cell(cfg, &instances, c, seed)).collect())
    } else {
        cells.iter().flat_map(|&c| run_cell(cfg, &instances, c, seed)).collect()
    };
    sort_records(&mut records);
    Ok(records)
}
