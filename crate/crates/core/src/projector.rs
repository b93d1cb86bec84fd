//! Smoothed spectral projectors `f(k(E − T))` with `f̂` compactly supported,
//! their exact kernels and the return-time predictor
//! `(k/2π)^{1/2} Σ_t f̂(t) [ρ′_t(x)]^{1/2} e^{−i∫H^sub} [𝒯_t^L]^k`.
//!
//! Fourier convention: `f(E) = (2π)^{−1/2} ∫ e^{itE} f̂(t) dt`, so that
//! `f(k(E − T)) = (2π)^{−1/2} ∫ f̂(t) e^{iktE} e^{−iktT} dt`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, Point, SymbolField, TorusPhaseSpace};
use crate::propagator::{self, BRANCH_STEP};
use crate::quadrature::{self, Rule};
use crate::quantum::{HermitianOperator, QuantumSpace};

/// Shape of `f̂` on `[−T, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FhatKind {
    /// `exp(−1/(1 − (t/T)²))`.
    Bump,
    /// `exp(−t²/(2σ²))` with `σ = T/9`, cut off at `±T`.
    GaussianTruncated,
}

impl FromStr for FhatKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bump" => Ok(FhatKind::Bump),
            "gaussian" | "gaussian-truncated" => Ok(FhatKind::GaussianTruncated),
            other => Err(Error::UnknownTag(other.to_string())),
        }
    }
}

impl fmt::Display for FhatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FhatKind::Bump => "bump",
            FhatKind::GaussianTruncated => "gaussian-truncated",
        })
    }
}

const PANEL_NODES: usize = 16;

/// Largest phase change `|E|·h` of `e^{itE}` across one panel.
const PANEL_PHASE: f64 = 8.0;

/// Tolerance on the change of `f(0)` when the nodes are doubled.
pub const FOURIER_TOL: f64 = 1e-10;

/// A compactly supported `f̂` and its inverse transform `f` by quadrature.
#[derive(Debug, Clone)]
pub struct FourierPair {
    kind: FhatKind,
    support_t: f64,
    nodes: usize,
    base: Rule,
    f0: f64,
}

impl FourierPair {
    pub fn kind(&self) -> FhatKind {
        self.kind
    }

    pub fn support_t(&self) -> f64 {
        self.support_t
    }

    pub fn quad_nodes(&self) -> usize {
        self.nodes
    }

    pub fn fhat(&self, t: f64) -> f64 {
        let s = t / self.support_t;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        match self.kind {
            FhatKind::Bump => (-1.0 / (1.0 - s * s)).exp(),
            FhatKind::GaussianTruncated => (-40.5 * s * s).exp(),
        }
    }

    /// `f(0) = (2π)^{−1/2} ∫ f̂`.
    pub fn f0(&self) -> f64 {
        self.f0
    }

    /// Composite Gauss–Legendre rule on `[−T, T]` fine enough for `e^{itE}`.
    pub fn rule_for(&self, frequency: f64) -> Rule {
        let base_panels = self.nodes.div_ceil(PANEL_NODES).max(1);
        let needed = (frequency.abs() * 2.0 * self.support_t / PANEL_PHASE).ceil() as usize;
        let panels = base_panels.max(needed);
        if panels == base_panels {
            return self.base.clone();
        }
        quadrature::composite_gauss_legendre(PANEL_NODES, panels, -self.support_t, self.support_t)
    }

    /// `f(E) = (2π)^{−1/2} ∫ e^{itE} f̂(t) dt`.
    pub fn f_eval(&self, e: f64) -> Complex64 {
        let rule = self.rule_for(e);
        let sum: Complex64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| Complex64::from_polar(w * self.fhat(t), t * e))
            .sum();
        sum / (2.0 * PI).sqrt()
    }
}

/// Builds `f̂` of the given shape on `[−T, T]` with `nodes` quadrature nodes
/// (rounded up to whole 16-node panels).
pub fn build_fourier_pair(kind: FhatKind, support_t: f64, nodes: usize) -> Result<FourierPair> {
    if !(support_t > 0.0 && support_t.is_finite()) {
        return Err(Error::Validation(format!(
            "support half-width must be positive, got {support_t}"
        )));
    }
    if nodes == 0 {
        return Err(Error::Validation("need at least one node".into()));
    }
    let panels = nodes.div_ceil(PANEL_NODES);
    let mut pair = FourierPair {
        kind,
        support_t,
        nodes: panels * PANEL_NODES,
        base: quadrature::composite_gauss_legendre(PANEL_NODES, panels, -support_t, support_t),
        f0: 0.0,
    };
    let coarse = pair.base.integrate(|t| pair.fhat(t));
    let fine = quadrature::composite_gauss_legendre(PANEL_NODES, 2 * panels, -support_t, support_t)
        .integrate(|t| pair.fhat(t));
    let change = (fine - coarse).abs() / (2.0 * PI).sqrt();
    if change > FOURIER_TOL {
        return Err(Error::Resolution {
            change,
            tolerance: FOURIER_TOL,
        });
    }
    pair.f0 = coarse / (2.0 * PI).sqrt();
    Ok(pair)
}

/// `f(k(E − λ_j))` for every eigenvalue of `op`.
pub fn spectral_weights(op: &HermitianOperator, pair: &FourierPair, energy: f64) -> Vec<Complex64> {
    let kf = f64::from(op.k());
    op.eigenvalues()
        .par_iter()
        .map(|&l| pair.f_eval(kf * (energy - l)))
        .collect()
}

/// `f(k(E − T))(y, x)` as a spectral sum.
pub fn projector_kernel_exact(
    qs: &QuantumSpace,
    op: &HermitianOperator,
    pair: &FourierPair,
    energy: f64,
    y: Point,
    x: Point,
) -> Result<Complex64> {
    let weights = spectral_weights(op, pair, energy);
    projector_kernel_with_weights(qs, op, &weights, y, x)
}

/// Spectral sum with precomputed [`spectral_weights`].
pub fn projector_kernel_with_weights(
    qs: &QuantumSpace,
    op: &HermitianOperator,
    weights: &[Complex64],
    y: Point,
    x: Point,
) -> Result<Complex64> {
    let a = propagator::eigen_coefficients(qs, op, y)?;
    let b = if x == y { a.clone() } else { propagator::eigen_coefficients(qs, op, x)? };
    Ok(weights
        .iter()
        .zip(a.iter().zip(&b))
        .map(|(w, (ai, bi))| w * ai * bi.conj())
        .sum())
}

/// `(2π)^{−1/2} ∫ f̂(t) e^{iktE} U_{k,t}(y, x) dt` by quadrature in `t`.
pub fn projector_kernel_time_quadrature(
    qs: &QuantumSpace,
    op: &HermitianOperator,
    pair: &FourierPair,
    energy: f64,
    y: Point,
    x: Point,
) -> Result<Complex64> {
    let kf = f64::from(op.k());
    let spread = op
        .eigenvalues()
        .iter()
        .map(|l| (energy - l).abs())
        .fold(0.0, f64::max);
    let rule = pair.rule_for(kf * spread);
    let a = propagator::eigen_coefficients(qs, op, y)?;
    let b = propagator::eigen_coefficients(qs, op, x)?;
    let products: Vec<Complex64> = a.iter().zip(&b).map(|(ai, bi)| ai * bi.conj()).collect();
    let sum: Complex64 = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&t, &w)| {
            let kernel: Complex64 = op
                .eigenvalues()
                .iter()
                .zip(&products)
                .map(|(&l, c)| Complex64::from_polar(1.0, -kf * t * l) * c)
                .sum();
            kernel * Complex64::from_polar(w * pair.fhat(t), kf * t * energy)
        })
        .sum();
    Ok(sum / (2.0 * PI).sqrt())
}

/// `Σ_j f(k(E − λ_j))` against the quadrature of the diagonal kernel over
/// the torus with `4π dp dq`.
pub fn projector_trace_check(
    qs: &QuantumSpace,
    op: &HermitianOperator,
    pair: &FourierPair,
    energy: f64,
    nodes: usize,
) -> Result<(Complex64, Complex64)> {
    let weights = spectral_weights(op, pair, energy);
    let trace: Complex64 = weights.iter().sum();
    let p_rule = quadrature::periodic_trapezoid(nodes);
    let q_rule = quadrature::composite_gauss_legendre(PANEL_NODES, nodes.div_ceil(PANEL_NODES), 0.0, 1.0);
    let integral: Result<Complex64> = q_rule
        .nodes
        .par_iter()
        .zip(q_rule.weights.par_iter())
        .map(|(&q, &wq)| {
            let mut row = Complex64::new(0.0, 0.0);
            for (&p, &wp) in p_rule.nodes.iter().zip(&p_rule.weights) {
                row += projector_kernel_with_weights(qs, op, &weights, [p, q], [p, q])? * wp;
            }
            Ok(row * wq * 4.0 * PI)
        })
        .sum();
    Ok((trace, integral?))
}

/// One return of the flow from `x` to `y` and its share of the predictor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReturnTerm {
    pub t: f64,
    pub winding: [i64; 2],
    pub fhat: f64,
    #[serde(serialize_with = "crate::serialize_complex")]
    pub rho_level_half: Complex64,
    #[serde(serialize_with = "crate::serialize_complex")]
    pub contribution: Complex64,
}

/// The return-time predictor and its terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectorPrediction {
    #[serde(serialize_with = "crate::serialize_complex")]
    pub value: Complex64,
    pub terms: Vec<ReturnTerm>,
    /// No return lies in `supp f̂`: the kernel is `O(k^{−∞})` there and the
    /// predictor is zero.
    pub off_image: bool,
}

/// Predictor of `f(k(E − T))(y, x)` for `x, y ∈ H⁻¹(E)`.
///
/// Each return `φ_t(x) = y + Λw` contributes at the lifted endpoint, and the
/// lattice multiplier `e^{−ikω(w, y)/2}` brings it back to `y`.
pub fn projector_kernel_asymptotic(
    ps: &TorusPhaseSpace,
    sym: &SymbolField,
    pair: &FourierPair,
    energy: f64,
    y: Point,
    x: Point,
    k: u32,
) -> Result<ProjectorPrediction> {
    for (name, z) in [("x", x), ("y", y)] {
        let h = sym.h(0.0, z);
        if (h - energy).abs() > 1e-10 {
            return Err(Error::Validation(format!(
                "{name} = {z:?} has energy {h}, not on the level {energy}"
            )));
        }
    }
    geometry::norm_x(ps, sym, 0.0, x)?;
    let returns: Vec<geometry::ReturnTime> = geometry::return_times(ps, sym, x, y, pair.support_t())?
        .into_iter()
        .filter(|r| r.t.abs() < pair.support_t())
        .collect();
    if returns.is_empty() {
        return Ok(ProjectorPrediction {
            value: Complex64::new(0.0, 0.0),
            terms: Vec::new(),
            off_image: true,
        });
    }
    let times: Vec<f64> = returns.iter().map(|r| r.t).collect();
    let (grid, index) = propagator::refined_grid(&times, BRANCH_STEP);
    let traj = geometry::integrate_flow(ps, sym, x, &grid)?;
    let rho_half = geometry::rho_level_half(ps, sym, &traj, energy)?;
    let kf = f64::from(k);
    let amplitude = (kf / (2.0 * PI)).sqrt();
    let mut terms = Vec::with_capacity(returns.len());
    for (r, &i) in returns.iter().zip(&index) {
        let transport = -traj.action_hsub[i] + kf * traj.conn_l[i];
        let w = ps.lattice_vector(r.winding);
        let multiplier = -kf * ps.multiplier_phase(w, y);
        let fhat = pair.fhat(r.t);
        let contribution =
            Complex64::from_polar(amplitude * fhat, transport + multiplier) * rho_half[i].value;
        terms.push(ReturnTerm {
            t: r.t,
            winding: r.winding,
            fhat,
            rho_level_half: rho_half[i].value,
            contribution,
        });
    }
    Ok(ProjectorPrediction {
        value: terms.iter().map(|t| t.contribution).sum(),
        terms,
        off_image: false,
    })
}

/// Exact against predicted projector kernel at one point and level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectorSample {
    pub k: u32,
    pub energy: f64,
    pub x: Point,
    pub y: Point,
    #[serde(serialize_with = "crate::serialize_complex")]
    pub exact: Complex64,
    #[serde(serialize_with = "crate::serialize_complex")]
    pub predicted: Complex64,
    pub returns: usize,
    pub off_image: bool,
    /// `||exact| − |predicted||/|predicted|`, `NaN` off the image.
    pub rel_err_modulus: f64,
    /// This error over the error at the previous level for the same point.
    pub decay_ratio: Option<f64>,
}

/// Comparison table over `(y, x)` pairs and levels, ordered by pair then level.
pub fn projector_compare(
    ps: &TorusPhaseSpace,
    levels: &[(QuantumSpace, HermitianOperator)],
    pair: &FourierPair,
    energy: f64,
    points: &[(Point, Point)],
) -> Result<Vec<ProjectorSample>> {
    let mut out = Vec::with_capacity(points.len() * levels.len());
    let weights: Vec<Vec<Complex64>> = levels
        .iter()
        .map(|(_, op)| spectral_weights(op, pair, energy))
        .collect();
    for &(y, x) in points {
        let mut previous: Option<f64> = None;
        for ((qs, op), w) in levels.iter().zip(&weights) {
            let exact = projector_kernel_with_weights(qs, op, w, y, x)?;
            let pred = projector_kernel_asymptotic(ps, op.symbol(), pair, energy, y, x, qs.k())?;
            let rel = if pred.off_image {
                f64::NAN
            } else {
                (exact.norm() - pred.value.norm()).abs() / pred.value.norm()
            };
            out.push(ProjectorSample {
                k: qs.k(),
                energy,
                x,
                y,
                exact,
                predicted: pred.value,
                returns: pred.terms.len(),
                off_image: pred.off_image,
                rel_err_modulus: rel,
                decay_ratio: previous.map(|p| rel / p),
            });
            previous = Some(rel);
        }
    }
    Ok(out)
}
