//! Quantum propagators `U_{k,t} = e^{−iktT}` and their Schwartz kernels,
//! together with the graph predictor
//! `(k/2π) [ρ_t(x)]^{1/2} e^{−i∫H^sub} [e^{−i∫H} 𝒯_t^L]^k`.
//!
//! Kernel values are reported in the unitary frame of the basis gauge. The
//! exact kernel is compared with the predictor at the lifted endpoint
//! `φ_t(x) ∈ ℝ²` of the flow line, because the predictor's transport factor
//! integrates `α` along that lift.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, Point, SymbolField, TorusPhaseSpace, Trajectory};
use crate::linalg;
use crate::quantum::{HermitianOperator, QuantumSpace};

/// Tolerance on the unitarity defect of each propagator step.
pub const UNITARITY_TOL: f64 = 1e-9;

/// Largest time step used when following branches of square roots.
pub const BRANCH_STEP: f64 = 0.01;

/// `e^{−iktT}` from the eigendecomposition of `T`.
pub fn propagate_autonomous(op: &HermitianOperator, t: f64) -> DMatrix<Complex64> {
    let kf = f64::from(op.k());
    let phases: Vec<Complex64> = op
        .eigenvalues()
        .iter()
        .map(|&l| Complex64::from_polar(1.0, -kf * t * l))
        .collect();
    let dim = op.dim();
    if op.is_diagonal() {
        return DMatrix::from_diagonal(&nalgebra::DVector::from_vec(phases));
    }
    let v = &op.eigen().vectors;
    let mut vd = v.clone();
    for j in 0..dim {
        let ph = phases[j];
        vd.column_mut(j).iter_mut().for_each(|z| *z *= ph);
    }
    vd * v.adjoint()
}

/// Solves `(ik)⁻¹ dU/dt + T_t U = 0`, `U(t₀) = I`, on `tgrid` with the
/// midpoint exponential `U_{n+1} = e^{−ik h T(t_n + h/2)} U_n`.
pub fn propagate_timedep<F>(op_at: F, tgrid: &[f64]) -> Result<Vec<DMatrix<Complex64>>>
where
    F: Fn(f64) -> Result<HermitianOperator>,
{
    if tgrid.is_empty() {
        return Err(Error::Validation("time grid is empty".into()));
    }
    if tgrid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation("time grid must be strictly increasing".into()));
    }
    let first = op_at(tgrid[0])?;
    let dim = first.dim();
    let mut out = Vec::with_capacity(tgrid.len());
    let mut u = DMatrix::<Complex64>::identity(dim, dim);
    out.push(u.clone());
    for w in tgrid.windows(2) {
        let h = w[1] - w[0];
        let frozen = op_at(w[0] + h / 2.0)?;
        if frozen.dim() != dim {
            return Err(Error::Validation("operator dimension changed along the path".into()));
        }
        let step = propagate_autonomous(&frozen, h);
        let defect = linalg::unitarity_defect(&step);
        if defect > UNITARITY_TOL {
            return Err(Error::StepRejected {
                t: w[1],
                estimate: defect,
                tolerance: UNITARITY_TOL,
            });
        }
        u = step * u;
        out.push(u.clone());
    }
    let drift = linalg::unitarity_defect(out.last().expect("non-empty"));
    if drift > UNITARITY_TOL {
        return Err(Error::StepRejected {
            t: tgrid[tgrid.len() - 1],
            estimate: drift,
            tolerance: UNITARITY_TOL,
        });
    }
    Ok(out)
}

/// `Σ_{ℓℓ′} U_{ℓℓ′} Ψ_ℓ(y) conj(Ψ_{ℓ′}(x))`.
pub fn kernel_eval(qs: &QuantumSpace, u: &DMatrix<Complex64>, y: Point, x: Point) -> Result<Complex64> {
    let a = qs.weighted_row(y)?;
    let b = qs.weighted_row(x)?;
    let dim = qs.dim();
    if u.nrows() != dim || u.ncols() != dim {
        return Err(Error::Validation("operator size does not match the space".into()));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for l in 0..dim {
        let mut row = Complex64::new(0.0, 0.0);
        for m in 0..dim {
            row += u[(l, m)] * b[m].conj();
        }
        sum += a[l] * row;
    }
    Ok(sum)
}

/// Coefficients `(Vᵀ a)_j` of weighted basis values in the eigenbasis.
pub fn eigen_coefficients(qs: &QuantumSpace, op: &HermitianOperator, x: Point) -> Result<Vec<Complex64>> {
    let row = qs.weighted_row(x)?;
    if op.is_diagonal() {
        return Ok(row);
    }
    let v = &op.eigen().vectors;
    Ok((0..op.dim())
        .map(|j| v.column(j).iter().zip(&row).map(|(vj, r)| vj * r).sum())
        .collect())
}

/// `Σ_j g(λ_j) (Vᵀa(y))_j conj((Vᵀa(x))_j)`: the kernel of `g(T)`.
pub fn spectral_kernel<G>(qs: &QuantumSpace, op: &HermitianOperator, y: Point, x: Point, g: G) -> Result<Complex64>
where
    G: Fn(f64) -> Complex64,
{
    let a = eigen_coefficients(qs, op, y)?;
    let b = if x == y { a.clone() } else { eigen_coefficients(qs, op, x)? };
    Ok(op
        .eigenvalues()
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(&l, (ai, bi))| g(l) * ai * bi.conj())
        .sum())
}

/// `U_{k,t}(y, x)` for `U = e^{−iktT}` without forming the matrix.
pub fn propagator_kernel(qs: &QuantumSpace, op: &HermitianOperator, t: f64, y: Point, x: Point) -> Result<Complex64> {
    let kf = f64::from(op.k());
    spectral_kernel(qs, op, y, x, |l| Complex64::from_polar(1.0, -kf * t * l))
}

/// `times ∪ {0}` refined so that consecutive samples are at most `max_step`
/// apart, with the positions of the requested times.
pub fn refined_grid(times: &[f64], max_step: f64) -> (Vec<f64>, Vec<usize>) {
    let mut anchors: Vec<f64> = times.to_vec();
    anchors.push(0.0);
    anchors.sort_by(f64::total_cmp);
    anchors.dedup();
    let mut grid = vec![anchors[0]];
    for w in anchors.windows(2) {
        let n = ((w[1] - w[0]) / max_step).ceil().max(1.0) as usize;
        for i in 1..n {
            grid.push(w[0] + (w[1] - w[0]) * i as f64 / n as f64);
        }
        grid.push(w[1]);
    }
    let index = times
        .iter()
        .map(|t| grid.iter().position(|g| g == t).expect("anchor kept"))
        .collect();
    (grid, index)
}

/// Graph predictor values at the requested times, with the trajectory on
/// the refined grid and the positions of the requested times in it.
pub fn graph_predictor_series(
    ps: &TorusPhaseSpace,
    sym: &SymbolField,
    x: Point,
    times: &[f64],
    k: u32,
) -> Result<(Trajectory, Vec<usize>, Vec<Complex64>)> {
    let (grid, index) = refined_grid(times, BRANCH_STEP);
    let traj = geometry::integrate_flow(ps, sym, x, &grid)?;
    let rho_half = geometry::rho_graph_half(&traj)?;
    let phase = geometry::prequantum_phase(&traj, k);
    let amplitude = f64::from(k) / (2.0 * PI);
    let values = index
        .iter()
        .map(|&i| rho_half[i].value * phase[i] * amplitude)
        .collect();
    Ok((traj, index, values))
}

/// The graph predictor at one time.
pub fn asymptotic_graph_kernel(
    ps: &TorusPhaseSpace,
    sym: &SymbolField,
    x: Point,
    t: f64,
    k: u32,
) -> Result<Complex64> {
    Ok(graph_predictor_series(ps, sym, x, &[t], k)?.2[0])
}

/// Exact and predicted kernel values at `(φ_t(x), x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelSample {
    pub k: u32,
    pub t: f64,
    pub x: Point,
    /// `φ_t(x)` reduced to the fundamental cell.
    pub y: Point,
    #[serde(serialize_with = "crate::serialize_complex")]
    pub exact: Complex64,
    #[serde(serialize_with = "crate::serialize_complex")]
    pub predicted: Complex64,
    pub rel_err_modulus: f64,
    /// `arg(exact/predicted)`, unwrapped along the time grid.
    pub phase_err: f64,
}

impl KernelSample {
    pub fn modulus_error(exact: Complex64, predicted: Complex64) -> f64 {
        (exact.norm() - predicted.norm()).abs() / predicted.norm()
    }
}

/// Unwraps a sequence of angles so consecutive entries differ by at most π.
pub fn unwrap_phases(raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(raw.len());
    let mut offset = 0.0;
    for (i, &a) in raw.iter().enumerate() {
        if i > 0 {
            let prev = raw[i - 1];
            let jump = a - prev;
            if jump > PI {
                offset -= 2.0 * PI;
            } else if jump < -PI {
                offset += 2.0 * PI;
            }
        }
        out.push(a + offset);
    }
    out
}

/// Exact kernel `U_{k,t}(φ_t(x), x)` against the graph predictor on `tgrid`.
pub fn graph_compare(
    ps: &TorusPhaseSpace,
    qs: &QuantumSpace,
    op: &HermitianOperator,
    x: Point,
    tgrid: &[f64],
) -> Result<Vec<KernelSample>> {
    let k = qs.k();
    let (traj, index, predicted) = graph_predictor_series(ps, op.symbol(), x, tgrid, k)?;
    let b = eigen_coefficients(qs, op, x)?;
    let kf = f64::from(k);
    let exact: Result<Vec<Complex64>> = tgrid
        .par_iter()
        .zip(index.par_iter())
        .map(|(&t, &i)| {
            let a = eigen_coefficients(qs, op, traj.lifted[i])?;
            Ok(op
                .eigenvalues()
                .iter()
                .zip(a.iter().zip(&b))
                .map(|(&l, (ai, bi))| Complex64::from_polar(1.0, -kf * t * l) * ai * bi.conj())
                .sum())
        })
        .collect();
    samples_from(k, x, tgrid, &traj, &index, &exact?, &predicted)
}

fn samples_from(
    k: u32,
    x: Point,
    tgrid: &[f64],
    traj: &Trajectory,
    index: &[usize],
    exact: &[Complex64],
    predicted: &[Complex64],
) -> Result<Vec<KernelSample>> {
    let raw: Vec<f64> = exact
        .iter()
        .zip(predicted)
        .map(|(e, p)| (e / p).arg())
        .collect();
    let unwrapped = unwrap_phases(&raw);
    Ok((0..tgrid.len())
        .map(|j| KernelSample {
            k,
            t: tgrid[j],
            x,
            y: traj.points[index[j]],
            exact: exact[j],
            predicted: predicted[j],
            rel_err_modulus: KernelSample::modulus_error(exact[j], predicted[j]),
            phase_err: unwrapped[j],
        })
        .collect())
}

/// [`graph_compare`] for a time-dependent symbol: `U_{k,t}` from the
/// midpoint exponential of `T_k(H_t)` on a grid of step at most `max_step`.
/// Times must be non-negative and strictly increasing.
pub fn graph_compare_timedep(
    ps: &TorusPhaseSpace,
    qs: &QuantumSpace,
    sym: &SymbolField,
    x: Point,
    tgrid: &[f64],
    max_step: f64,
) -> Result<Vec<KernelSample>> {
    if tgrid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Validation(
            "time-dependent propagation runs forward from t = 0; use non-negative times".into(),
        ));
    }
    if tgrid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation("time grid must be strictly increasing".into()));
    }
    let k = qs.k();
    let (grid, index) = refined_grid(tgrid, max_step.min(BRANCH_STEP));
    let quantized = crate::quantum::toeplitz_build(qs, sym, 0.0)?;
    let symbol = quantized.symbol().clone();
    let traj = geometry::integrate_flow(ps, &symbol, x, &grid)?;
    let rho_half = geometry::rho_graph_half(&traj)?;
    let phase = geometry::prequantum_phase(&traj, k);
    let amplitude = f64::from(k) / (2.0 * PI);
    let predicted: Vec<Complex64> = index
        .iter()
        .map(|&i| rho_half[i].value * phase[i] * amplitude)
        .collect();
    let quantizer = crate::quantum::ToeplitzQuantizer::new(qs, sym, 0.0)?;
    let steps = propagate_timedep(|t| quantizer.build(sym, t), &grid)?;
    let exact: Result<Vec<Complex64>> = index
        .par_iter()
        .map(|&i| kernel_eval(qs, &steps[i], traj.lifted[i], x))
        .collect();
    samples_from(k, x, tgrid, &traj, &index, &exact?, &predicted)
}

/// Minimum lattice distance between a probe point and the flow graph.
pub const MIN_OFFSET: f64 = 0.05;

/// Kernel magnitudes away from the graph for a sequence of levels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OffGraphReport {
    pub t: f64,
    pub x: Point,
    pub y: Point,
    pub levels: Vec<u32>,
    pub magnitudes: Vec<f64>,
    /// `log₂(|K_{k_i}|/|K_{k_{i+1}}|) / log₂(k_{i+1}/k_i)` for consecutive levels.
    pub orders: Vec<f64>,
}

/// `|U_{k,t}(φ_t(x) + offset, x)|` for each `(space, operator)` pair.
pub fn offgraph_probe(
    ps: &TorusPhaseSpace,
    levels: &[(QuantumSpace, HermitianOperator)],
    x: Point,
    t: f64,
    offset: Point,
) -> Result<OffGraphReport> {
    let (distance, _) = ps.lattice_distance(offset, [0.0, 0.0]);
    if distance < MIN_OFFSET {
        return Err(Error::TooCloseToGraph {
            distance,
            minimum: MIN_OFFSET,
        });
    }
    let Some((_, first)) = levels.first() else {
        return Err(Error::Validation("no levels given".into()));
    };
    let grid = if t > 0.0 {
        vec![0.0, t]
    } else if t < 0.0 {
        vec![t, 0.0]
    } else {
        vec![0.0]
    };
    let traj = geometry::integrate_flow(ps, first.symbol(), x, &grid)?;
    let end = traj.lifted[traj.times.iter().position(|&s| s == t).expect("grid contains t")];
    let y = [end[0] + offset[0], end[1] + offset[1]];
    let mut magnitudes = Vec::with_capacity(levels.len());
    for (qs, op) in levels {
        magnitudes.push(propagator_kernel(qs, op, t, y, x)?.norm());
    }
    let ks: Vec<u32> = levels.iter().map(|(qs, _)| qs.k()).collect();
    let orders = (1..ks.len())
        .map(|i| {
            (magnitudes[i - 1] / magnitudes[i]).log2()
                / (f64::from(ks[i]) / f64::from(ks[i - 1])).log2()
        })
        .collect();
    Ok(OffGraphReport {
        t,
        x,
        y,
        levels: ks,
        magnitudes,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{model_operator, BasisGauge};

    fn space(k: u32) -> QuantumSpace {
        QuantumSpace::with_gauge(k, BasisGauge::Holomorphic).unwrap()
    }

    #[test]
    fn autonomous_propagator_basics() {
        let qs = space(6);
        let op = model_operator(&qs);
        let id = propagate_autonomous(&op, 0.0);
        assert!(linalg::max_abs(&(id - DMatrix::identity(12, 12))) == 0.0);
        let t = 0.37;
        let u = propagate_autonomous(&op, t);
        for l in 0..12 {
            let expected = Complex64::from_polar(1.0, -6.0 * t * (PI * l as f64 / 6.0).cos());
            assert!((u[(l, l)] - expected).norm() < 1e-15);
        }
        assert!(linalg::unitarity_defect(&u) < 1e-10);
    }

    #[test]
    fn group_law_for_a_dense_operator() {
        let qs = QuantumSpace::new(6).unwrap();
        let sym = SymbolField::from_fn("mix", true, |_, p, q| {
            (2.0 * PI * p).cos() + 0.5 * (2.0 * PI * q).sin()
        });
        let op = crate::quantum::toeplitz_build(&qs, &sym, 0.0).unwrap();
        let (s, t) = (0.3, 0.45);
        let lhs = propagate_autonomous(&op, s) * propagate_autonomous(&op, t);
        let rhs = propagate_autonomous(&op, s + t);
        assert!(linalg::max_abs(&(lhs - rhs)) < 1e-10);
        let u = propagate_autonomous(&op, 1.3);
        let trace: Complex64 = (u.adjoint() * &u).trace();
        assert!((trace.re - 12.0).abs() < 1e-10);
        // spectral kernel equals the matrix route
        let (y, x) = ([0.2, 0.7], [0.45, 0.1]);
        let a = kernel_eval(&qs, &u, y, x).unwrap();
        let b = propagator_kernel(&qs, &op, 1.3, y, x).unwrap();
        assert!((a - b).norm() < 1e-10);
    }

    #[test]
    fn time_dependent_integrator() {
        let qs = space(5);
        let op = model_operator(&qs);
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.025).collect();
        let constant = propagate_timedep(|_| Ok(op.clone()), &grid).unwrap();
        let direct = propagate_autonomous(&op, 1.0);
        assert!(linalg::max_abs(&(constant.last().unwrap() - direct)) < 1e-8);

        // T = c(t) I with c(t) = sin t: phase e^{−ik(1 − cos t)}
        let scalar = |t: f64| {
            HermitianOperator::diagonal(5, vec![t.sin(); 10], SymbolField::constant(0.0))
        };
        let grid: Vec<f64> = (0..=1000).map(|i| i as f64 * 1e-3).collect();
        let us = propagate_timedep(scalar, &grid).unwrap();
        let expected = Complex64::from_polar(1.0, -5.0 * (1.0 - 1f64.cos()));
        assert!((us.last().unwrap()[(3, 3)] - expected).norm() < 1e-6);
        assert!(us.iter().all(|u| linalg::unitarity_defect(u) < 1e-9));
        assert!(propagate_timedep(|_| Ok(op.clone()), &[0.0, 0.0]).is_err());
    }

    #[test]
    fn time_dependent_graph_comparison() {
        let ps = TorusPhaseSpace::default();
        let qs = QuantumSpace::new(16).unwrap();
        let sym = SymbolField::model_cos();
        let tgrid = [0.0, 0.1, 0.25];
        let frozen = crate::quantum::toeplitz_build(&qs, &sym, 0.0).unwrap();
        let a = graph_compare(&ps, &qs, &frozen, [0.3, 0.1], &tgrid).unwrap();
        let b = graph_compare_timedep(&ps, &qs, &sym, [0.3, 0.1], &tgrid, 0.01).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u.exact - v.exact).norm() < 1e-9 * u.exact.norm());
            assert!((u.predicted - v.predicted).norm() < 1e-9 * u.predicted.norm());
        }

        let pulsed = SymbolField::from_fn("pulsed", false, |t, p, q| {
            (1.0 + 0.5 * t) * (2.0 * PI * q).cos() + 0.2 * t * (2.0 * PI * p).sin()
        });
        let qs = QuantumSpace::new(24).unwrap();
        let rows = graph_compare_timedep(&ps, &qs, &pulsed, [0.3, 0.1], &[0.0, 0.1, 0.2, 0.3], 0.005).unwrap();
        assert!(rows.iter().all(|r| r.rel_err_modulus < 0.02), "{rows:?}");
        assert!(graph_compare_timedep(&ps, &qs, &pulsed, [0.3, 0.1], &[-0.1, 0.0], 0.01).is_err());
    }

    #[test]
    fn kernel_identities() {
        let qs = space(20);
        let id = DMatrix::<Complex64>::identity(40, 40);
        let x = [0.3, 0.1];
        let diag = kernel_eval(&qs, &id, x, x).unwrap();
        assert!((diag.re - qs.bergman_diag(x).unwrap()).abs() < 1e-12);
        let y = [0.35, 0.12];
        let a = kernel_eval(&qs, &id, y, x).unwrap();
        let b = kernel_eval(&qs, &id, x, y).unwrap();
        assert!((a - b.conj()).norm() < 1e-10);
    }

    #[test]
    fn predictor_at_zero_and_refined_grid() {
        let ps = TorusPhaseSpace::default();
        let v = asymptotic_graph_kernel(&ps, &SymbolField::model_cos(), [0.3, 0.1], 0.0, 100).unwrap();
        assert!((v - Complex64::new(100.0 / (2.0 * PI), 0.0)).norm() < 1e-12);
        let (grid, idx) = refined_grid(&[-0.05, 0.5], 0.1);
        assert_eq!(grid[idx[0]], -0.05);
        assert_eq!(grid[idx[1]], 0.5);
        assert!(grid.contains(&0.0));
        assert!(grid.windows(2).all(|w| w[1] - w[0] <= 0.1 + 1e-15));
    }

    #[test]
    fn model_predictor_closed_form() {
        let ps = TorusPhaseSpace::default();
        let (k, q, t) = (50u32, 0.1f64, 0.8f64);
        let v = asymptotic_graph_kernel(&ps, &SymbolField::model_cos(), [0.3, q], t, k).unwrap();
        let a = PI * t / 2.0 * (2.0 * PI * q).cos();
        let kf = f64::from(k);
        let phase = -kf * t * ((2.0 * PI * q).cos() + PI * q * (2.0 * PI * q).sin()) + 0.5 * a.atan();
        let expected = Complex64::from_polar(kf / (2.0 * PI) * (1.0 + a * a).powf(-0.25), phase);
        assert!((v - expected).norm() < 1e-10 * expected.norm());
    }

    #[test]
    fn small_time_agreement() {
        let ps = TorusPhaseSpace::default();
        let qs = space(100);
        let op = model_operator(&qs);
        let grid: Vec<f64> = (0..=20).map(|i| i as f64 * 0.005).collect();
        let rows = graph_compare(&ps, &qs, &op, [0.3, 0.1], &grid).unwrap();
        assert!(rows.iter().all(|r| r.rel_err_modulus < 0.02));
        assert!((rows[0].exact.re - qs.bergman_diag([0.3, 0.1]).unwrap()).abs() < 1e-12);
        let at = rows.iter().find(|r| (r.t - 0.05).abs() < 1e-12).unwrap();
        assert!(at.rel_err_modulus < 0.02);
        assert!(rows.iter().all(|r| r.phase_err.abs() < 0.05));
    }

    #[test]
    fn constant_subprincipal_shift_is_exact() {
        let ps = TorusPhaseSpace::default();
        let qs = space(30);
        let op = model_operator(&qs);
        let shifted = op.shifted(0.7);
        let (x, t) = ([0.3, 0.1], 0.6);
        let y = geometry::integrate_flow(&ps, op.symbol(), x, &[0.0, t]).unwrap().lifted[1];
        let phase = Complex64::from_polar(1.0, -0.7 * t);
        let e0 = propagator_kernel(&qs, &op, t, y, x).unwrap();
        let e1 = propagator_kernel(&qs, &shifted, t, y, x).unwrap();
        assert!((e1 - e0 * phase).norm() < 1e-12 * e0.norm().max(1.0));
        let p0 = asymptotic_graph_kernel(&ps, op.symbol(), x, t, 30).unwrap();
        let p1 = asymptotic_graph_kernel(&ps, shifted.symbol(), x, t, 30).unwrap();
        assert!((p1 - p0 * phase).norm() < 1e-12 * p0.norm());
    }

    #[test]
    fn off_graph_probe() {
        let ps = TorusPhaseSpace::default();
        let levels: Vec<_> = [25, 50]
            .into_iter()
            .map(|k| {
                let qs = space(k);
                let op = model_operator(&qs);
                (qs, op)
            })
            .collect();
        let report = offgraph_probe(&ps, &levels, [0.3, 0.1], 0.5, [0.0, 0.5]).unwrap();
        for (m, k) in report.magnitudes.iter().zip(&report.levels) {
            assert!(*m < 1e-6 * f64::from(*k) / (2.0 * PI));
        }
        let along_p = offgraph_probe(&ps, &levels, [0.3, 0.1], 0.5, [0.5, 0.0]).unwrap();
        assert!(along_p.magnitudes[1] < 1e-6 * 50.0 / (2.0 * PI));
        assert!(along_p.orders[0] > 3.0);
        assert!(matches!(
            offgraph_probe(&ps, &levels, [0.3, 0.1], 0.5, [0.0, 0.0]),
            Err(Error::TooCloseToGraph { .. })
        ));
        assert!(matches!(
            offgraph_probe(&ps, &levels, [0.3, 0.1], 0.5, [1.0, 0.0]),
            Err(Error::TooCloseToGraph { .. })
        ));
    }

    #[test]
    fn phase_unwrapping() {
        let raw = [3.0, -3.0, -2.9, 3.1];
        let u = unwrap_phases(&raw);
        assert!((u[1] - (2.0 * PI - 3.0)).abs() < 1e-15);
        assert!(u.windows(2).all(|w| (w[1] - w[0]).abs() <= PI));
    }
}
