//! The four commands. Levels in a k-list run concurrently; each produces
//! one table.

use rayon::prelude::*;
use toeplitz_core::acceptance::{self, AcceptanceConfig, CriterionResult, CRITERIA};
use toeplitz_core::geometry::{self, SymbolField, TorusPhaseSpace};
use toeplitz_core::projector::{self, FourierPair};
use toeplitz_core::propagator::{self, BRANCH_STEP};
use toeplitz_core::quantum::{self, HermitianOperator, QuantumSpace};

use crate::config::{ExperimentConfig, SymbolChoice};
use crate::output::{Cell, Table};
use crate::symbol::build_symbol;

/// Node count of the `f̂` quadrature before frequency-driven refinement.
pub const FHAT_NODES: usize = 512;

/// Tolerance for a point to count as lying on the chosen energy level.
pub const LEVEL_TOL: f64 = 1e-10;

#[derive(Debug)]
pub enum RunError {
    /// The configuration cannot be run as given.
    Config(String),
    /// A numerical failure while running.
    Numerical(String),
}

impl From<toeplitz_core::Error> for RunError {
    fn from(e: toeplitz_core::Error) -> Self {
        RunError::Numerical(e.to_string())
    }
}

impl From<crate::config::ConfigError> for RunError {
    fn from(e: crate::config::ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

/// Runtime settings taken from the environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Environment {
    pub quad_scale: f64,
    pub seed: Option<u64>,
}

impl Environment {
    pub fn from_env() -> Result<Self, RunError> {
        let quad_scale = match std::env::var("TP_QUAD_SCALE") {
            Ok(s) => {
                let v: f64 = s
                    .trim()
                    .parse()
                    .map_err(|_| RunError::Config(format!("TP_QUAD_SCALE={s:?} is not a number")))?;
                if !(v > 0.0 && v.is_finite()) {
                    return Err(RunError::Config(format!("TP_QUAD_SCALE must be positive, got {v}")));
                }
                v
            }
            Err(_) => 1.0,
        };
        let seed = match std::env::var("TP_SEED") {
            Ok(s) => Some(
                s.trim()
                    .parse()
                    .map_err(|_| RunError::Config(format!("TP_SEED={s:?} is not an unsigned integer")))?,
            ),
            Err(_) => None,
        };
        Ok(Self { quad_scale, seed })
    }
}

fn operator_for(qs: &QuantumSpace, choice: &SymbolChoice, sym: &SymbolField) -> Result<HermitianOperator, RunError> {
    match choice {
        SymbolChoice::ModelCos => Ok(quantum::model_operator(qs)),
        SymbolChoice::Expression(_) => Ok(quantum::toeplitz_build(qs, sym, 0.0)?),
    }
}

fn require_autonomous(cfg: &ExperimentConfig, sym: &SymbolField) -> Result<(), RunError> {
    if sym.is_autonomous() {
        Ok(())
    } else {
        Err(RunError::Config(format!(
            "the {} command works on an energy level and needs a symbol without t",
            cfg.command
        )))
    }
}

fn level_energy(cfg: &ExperimentConfig, sym: &SymbolField) -> Result<f64, RunError> {
    let h = sym.h(0.0, cfg.point);
    match cfg.energy {
        None => Ok(h),
        Some(e) if (e - h).abs() <= LEVEL_TOL => Ok(e),
        Some(e) => Err(RunError::Config(format!(
            "point ({}, {}) has energy {h:.17}, not {e}; omit --energy to use the level through the point",
            cfg.point[0], cfg.point[1]
        ))),
    }
}

fn per_level<F>(cfg: &ExperimentConfig, env: &Environment, run: F) -> Result<Vec<Table>, RunError>
where
    F: Fn(QuantumSpace) -> Result<Table, RunError> + Sync,
{
    cfg.levels
        .par_iter()
        .map(|&k| run(QuantumSpace::with_quad_scale(k, env.quad_scale)?))
        .collect()
}

pub const PROPAGATOR_COLUMNS: [&str; 9] = [
    "t",
    "re_exact",
    "im_exact",
    "re_pred",
    "im_pred",
    "abs_exact",
    "abs_pred",
    "rel_err_modulus",
    "phase_err",
];

/// Exact kernel on the graph of the flow against the graph predictor.
pub fn run_propagator(cfg: &ExperimentConfig, env: &Environment) -> Result<Vec<Table>, RunError> {
    let sym = build_symbol(&cfg.symbol)?;
    let ps = TorusPhaseSpace::default();
    let times = cfg.tgrid.values();
    per_level(cfg, env, |qs| {
        let samples = if sym.is_autonomous() {
            let op = operator_for(&qs, &cfg.symbol, &sym)?;
            propagator::graph_compare(&ps, &qs, &op, cfg.point, &times)?
        } else {
            propagator::graph_compare_timedep(&ps, &qs, &sym, cfg.point, &times, cfg.max_step)?
        };
        let mut table = Table::new(qs.k(), &PROPAGATOR_COLUMNS);
        for s in samples {
            table.push(vec![
                Cell::Float(s.t),
                Cell::Float(s.exact.re),
                Cell::Float(s.exact.im),
                Cell::Float(s.predicted.re),
                Cell::Float(s.predicted.im),
                Cell::Float(s.exact.norm()),
                Cell::Float(s.predicted.norm()),
                Cell::Float(s.rel_err_modulus),
                Cell::Float(s.phase_err),
            ]);
        }
        Ok(table)
    })
}

pub const PROJECTOR_COLUMNS: [&str; 14] = [
    "energy",
    "x_p",
    "x_q",
    "y_p",
    "y_q",
    "re_exact",
    "im_exact",
    "re_pred",
    "im_pred",
    "abs_exact",
    "abs_pred",
    "rel_err_modulus",
    "returns",
    "off_image",
];

/// Smoothed spectral projector kernel at `(target, point)` on the level
/// through `point`, against the return-time predictor.
pub fn run_projector(cfg: &ExperimentConfig, env: &Environment) -> Result<Vec<Table>, RunError> {
    let sym = build_symbol(&cfg.symbol)?;
    require_autonomous(cfg, &sym)?;
    let energy = level_energy(cfg, &sym)?;
    for y in &cfg.targets {
        let h = sym.h(0.0, *y);
        if (h - energy).abs() > LEVEL_TOL {
            return Err(RunError::Config(format!(
                "target ({}, {}) has energy {h:.17}, not the level {energy:.17} of the point",
                y[0], y[1]
            )));
        }
    }
    let pair: FourierPair = projector::build_fourier_pair(cfg.fhat.kind, cfg.fhat.support_t, FHAT_NODES)?;
    let ps = TorusPhaseSpace::default();
    let points: Vec<_> = cfg.targets.iter().map(|&y| (y, cfg.point)).collect();
    per_level(cfg, env, |qs| {
        let op = operator_for(&qs, &cfg.symbol, &sym)?;
        let k = qs.k();
        let samples = projector::projector_compare(&ps, &[(qs, op)], &pair, energy, &points)?;
        let mut table = Table::new(k, &PROJECTOR_COLUMNS);
        for s in samples {
            table.push(vec![
                Cell::Float(s.energy),
                Cell::Float(s.x[0]),
                Cell::Float(s.x[1]),
                Cell::Float(s.y[0]),
                Cell::Float(s.y[1]),
                Cell::Float(s.exact.re),
                Cell::Float(s.exact.im),
                Cell::Float(s.predicted.re),
                Cell::Float(s.predicted.im),
                Cell::Float(s.exact.norm()),
                Cell::Float(s.predicted.norm()),
                Cell::Float(s.rel_err_modulus),
                Cell::Int(s.returns as i64),
                Cell::Bool(s.off_image),
            ]);
        }
        Ok(table)
    })
}

pub const LIFT_COLUMNS: [&str; 7] = [
    "t",
    "transport_L_phase",
    "prequantum_phase",
    "rho_half_re",
    "rho_half_im",
    "rho_level_half_re",
    "rho_level_half_im",
];

/// Phases and amplitudes of the semiclassical lifts along the flow line.
/// Phases are branch-continuous angles, not reduced mod 2π.
pub fn run_lifts(cfg: &ExperimentConfig, _env: &Environment) -> Result<Vec<Table>, RunError> {
    let sym = build_symbol(&cfg.symbol)?;
    require_autonomous(cfg, &sym)?;
    let energy = level_energy(cfg, &sym)?;
    let ps = TorusPhaseSpace::default();
    let times = cfg.tgrid.values();
    let (grid, index) = propagator::refined_grid(&times, BRANCH_STEP);
    let traj = geometry::integrate_flow(&ps, &sym, cfg.point, &grid)?;
    cfg.levels
        .par_iter()
        .map(|&k| {
            let lift = geometry::geometric_lift(&ps, &sym, &traj, k, Some(energy))?;
            let angle = geometry::prequantum_angle(&traj, k);
            let level = lift.rho_level_half.as_ref().expect("energy was given");
            let mut table = Table::new(k, &LIFT_COLUMNS);
            for (&t, &i) in times.iter().zip(&index) {
                table.push(vec![
                    Cell::Float(t),
                    Cell::Float(lift.transport_l[i].branch_angle),
                    Cell::Float(angle[i]),
                    Cell::Float(lift.rho_half[i].value.re),
                    Cell::Float(lift.rho_half[i].value.im),
                    Cell::Float(level[i].value.re),
                    Cell::Float(level[i].value.im),
                ]);
            }
            Ok(table)
        })
        .collect()
}

/// Runs the selected acceptance criteria in order; `report` sees each
/// result as soon as it is available.
pub fn run_selftest<F>(cfg: &ExperimentConfig, env: &Environment, mut report: F) -> Vec<CriterionResult>
where
    F: FnMut(&CriterionResult),
{
    let mut acc = AcceptanceConfig {
        quad_scale: env.quad_scale,
        ..AcceptanceConfig::default()
    };
    if let Some(seed) = env.seed {
        acc.seed = seed;
    }
    let ids: Vec<String> = cfg
        .criteria
        .clone()
        .unwrap_or_else(|| CRITERIA.iter().map(|s| s.to_string()).collect());
    ids.iter()
        .map(|id| {
            let r = acceptance::run(id, &acc).unwrap_or_else(|e| CriterionResult {
                id: id.clone(),
                description: "evaluation error".into(),
                measured: f64::NAN,
                bound: f64::NAN,
                pass: false,
                diagnostics: Vec::new(),
                notes: vec![e.to_string()],
            });
            report(&r);
            r
        })
        .collect()
}
