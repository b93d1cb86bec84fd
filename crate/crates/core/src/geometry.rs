//! Classical geometry of the torus `ℝ²/ℤ²` with `ω = 4π dp∧dq`.
//!
//! Points are `[p, q]`. The prequantum connection form is
//! `α = 2π(p dq − q dp)`, which satisfies `dα = ω` but is not lattice
//! periodic, so every path integral is taken along the lifted path in `ℝ²`.
//! The canonical bundle is trivialized by `dz`, `z = p + iq`, with a flat
//! connection; its transport is kept in the formulas as the constant 1.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::symplectic::{self, BranchedPhase, LinearSymplectomorphism};

pub type Point = [f64; 2];

/// `ω(∂p, ∂q)`.
pub const SYMPLECTIC_AREA: f64 = 4.0 * PI;

/// `G` in `ω = iG dz∧dz̄`.
pub const METRIC_SCALE: f64 = 2.0 * PI;

/// Below this `‖X‖` a level is treated as critical.
pub const REGULAR_THRESHOLD: f64 = 1e-6;

/// The flat torus `ℝ²/Λ` with lattice basis `(e, f)` of symplectic area `4π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorusPhaseSpace {
    lattice: Matrix2<f64>,
}

impl Default for TorusPhaseSpace {
    fn default() -> Self {
        Self {
            lattice: Matrix2::identity(),
        }
    }
}

impl TorusPhaseSpace {
    /// Columns of `lattice` are the basis vectors `e`, `f` in `(p, q)`
    /// coordinates; `ω(e, f)` must equal `4π`.
    pub fn new(lattice: Matrix2<f64>) -> Result<Self> {
        let ps = Self { lattice };
        let area = ps.omega(
            [lattice[(0, 0)], lattice[(1, 0)]],
            [lattice[(0, 1)], lattice[(1, 1)]],
        );
        if (area - SYMPLECTIC_AREA).abs() > 1e-12 {
            return Err(Error::Validation(format!(
                "lattice has symplectic area {area}, expected 4π"
            )));
        }
        Ok(ps)
    }

    pub fn lattice(&self) -> &Matrix2<f64> {
        &self.lattice
    }

    pub fn omega(&self, u: Point, v: Point) -> f64 {
        SYMPLECTIC_AREA * (u[0] * v[1] - u[1] * v[0])
    }

    /// `α_x(v)`.
    pub fn alpha(&self, x: Point, v: Point) -> f64 {
        2.0 * PI * (x[0] * v[1] - x[1] * v[0])
    }

    /// The standard complex structure: `∂p ↦ ∂q`.
    pub fn complex_structure(&self, v: Point) -> Point {
        [-v[1], v[0]]
    }

    /// `x = reduced + Λ·winding` with `reduced` in the fundamental cell.
    pub fn reduce(&self, x: Point) -> (Point, [i64; 2]) {
        let inv = self.lattice.try_inverse().expect("lattice is invertible");
        let c = inv * nalgebra::Vector2::new(x[0], x[1]);
        let w = [c[0].floor() as i64, c[1].floor() as i64];
        let shift = self.lattice * nalgebra::Vector2::new(w[0] as f64, w[1] as f64);
        ([x[0] - shift[0], x[1] - shift[1]], w)
    }

    pub fn lattice_vector(&self, winding: [i64; 2]) -> Point {
        let v = self.lattice * nalgebra::Vector2::new(winding[0] as f64, winding[1] as f64);
        [v[0], v[1]]
    }

    /// Distance from `x − y` to the nearest lattice vector, and that vector's
    /// coordinates.
    pub fn lattice_distance(&self, x: Point, y: Point) -> (f64, [i64; 2]) {
        let inv = self.lattice.try_inverse().expect("lattice is invertible");
        let c = inv * nalgebra::Vector2::new(x[0] - y[0], x[1] - y[1]);
        let base = [c[0].floor() as i64, c[1].floor() as i64];
        let mut best = (f64::INFINITY, base);
        for da in 0..=1 {
            for db in 0..=1 {
                let w = [base[0] + da, base[1] + db];
                let v = self.lattice_vector(w);
                let d = (x[0] - y[0] - v[0]).hypot(x[1] - y[1] - v[1]);
                if d < best.0 {
                    best = (d, w);
                }
            }
        }
        best
    }

    /// Phase `θ` of the multiplier of `L`: a section in the `α`-trivialization
    /// satisfies `s(x + w) = e^{iθ} s(x)` with `θ = ω(w, x)/2`.
    pub fn multiplier_phase(&self, w: Point, x: Point) -> f64 {
        self.omega(w, x) / 2.0
    }

    /// `max |dα − ω|` over a grid, by centered differences of the coefficients.
    pub fn curvature_defect(&self, samples: usize, step: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..samples {
            for j in 0..samples {
                let x = [i as f64 / samples as f64, j as f64 / samples as f64];
                // α = a_p dp + a_q dq, dα = (∂_p a_q − ∂_q a_p) dp∧dq
                let a_p = |y: Point| self.alpha(y, [1.0, 0.0]);
                let a_q = |y: Point| self.alpha(y, [0.0, 1.0]);
                let d_aq =
                    (a_q([x[0] + step, x[1]]) - a_q([x[0] - step, x[1]])) / (2.0 * step);
                let d_ap =
                    (a_p([x[0], x[1] + step]) - a_p([x[0], x[1] - step])) / (2.0 * step);
                worst = worst.max((d_aq - d_ap - SYMPLECTIC_AREA).abs());
            }
        }
        worst
    }
}

type ScalarFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn(f64, f64, f64) -> Point + Send + Sync>;
type HessFn = Arc<dyn Fn(f64, f64, f64) -> [[f64; 2]; 2] + Send + Sync>;

/// Closed-form symbols with exact flows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSymbol {
    /// `H = cos(2πq)`, whose flow is the shear `(p, q) ↦ (p + t sin(2πq)/2, q)`.
    CosQ,
}

/// Principal and subprincipal symbols `H(t, p, q)`, `H^sub(t, p, q)`.
#[derive(Clone)]
pub struct SymbolField {
    name: String,
    principal: ScalarFn,
    subprincipal: ScalarFn,
    gradient: Option<GradFn>,
    hessian: Option<HessFn>,
    autonomous: bool,
    model: Option<ModelSymbol>,
    sub_constant: Option<f64>,
}

impl fmt::Debug for SymbolField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolField")
            .field("name", &self.name)
            .field("autonomous", &self.autonomous)
            .field("model", &self.model)
            .field("sub_constant", &self.sub_constant)
            .finish()
    }
}

/// Step of the centered differences used when no closed form is supplied.
pub const FD_STEP: f64 = 1e-5;

impl SymbolField {
    /// `H = cos(2πq)` with vanishing subprincipal symbol.
    pub fn model_cos() -> Self {
        let tau = 2.0 * PI;
        Self {
            name: "cos(2*pi*q)".into(),
            principal: Arc::new(move |_, _, q| (tau * q).cos()),
            subprincipal: Arc::new(|_, _, _| 0.0),
            gradient: Some(Arc::new(move |_, _, q| [0.0, -tau * (tau * q).sin()])),
            hessian: Some(Arc::new(move |_, _, q| {
                [[0.0, 0.0], [0.0, -tau * tau * (tau * q).cos()]]
            })),
            autonomous: true,
            model: Some(ModelSymbol::CosQ),
            sub_constant: Some(0.0),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            name: format!("{c}"),
            principal: Arc::new(move |_, _, _| c),
            subprincipal: Arc::new(|_, _, _| 0.0),
            gradient: Some(Arc::new(|_, _, _| [0.0, 0.0])),
            hessian: Some(Arc::new(|_, _, _| [[0.0; 2]; 2])),
            autonomous: true,
            model: None,
            sub_constant: Some(0.0),
        }
    }

    /// A symbol given by a function only; derivatives by centered differences.
    pub fn from_fn<F>(name: impl Into<String>, autonomous: bool, principal: F) -> Self
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            principal: Arc::new(principal),
            subprincipal: Arc::new(|_, _, _| 0.0),
            gradient: None,
            hessian: None,
            autonomous,
            model: None,
            sub_constant: Some(0.0),
        }
    }

    pub fn with_gradient<F>(mut self, gradient: F) -> Self
    where
        F: Fn(f64, f64, f64) -> Point + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    pub fn with_hessian<F>(mut self, hessian: F) -> Self
    where
        F: Fn(f64, f64, f64) -> [[f64; 2]; 2] + Send + Sync + 'static,
    {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    pub fn with_constant_subprincipal(mut self, c: f64) -> Self {
        self.subprincipal = Arc::new(move |_, _, _| c);
        self.sub_constant = Some(c);
        self
    }

    pub fn with_subprincipal<F>(mut self, sub: F) -> Self
    where
        F: Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    {
        self.subprincipal = Arc::new(sub);
        self.sub_constant = None;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn model(&self) -> Option<ModelSymbol> {
        self.model
    }

    pub fn constant_subprincipal(&self) -> Option<f64> {
        self.sub_constant
    }

    pub fn h(&self, t: f64, x: Point) -> f64 {
        (self.principal)(t, x[0], x[1])
    }

    pub fn h_sub(&self, t: f64, x: Point) -> f64 {
        (self.subprincipal)(t, x[0], x[1])
    }

    /// `(∂H/∂p, ∂H/∂q)`.
    pub fn grad(&self, t: f64, x: Point) -> Point {
        if let Some(g) = &self.gradient {
            return g(t, x[0], x[1]);
        }
        let h = FD_STEP;
        let f = |p: f64, q: f64| (self.principal)(t, p, q);
        [
            (f(x[0] + h, x[1]) - f(x[0] - h, x[1])) / (2.0 * h),
            (f(x[0], x[1] + h) - f(x[0], x[1] - h)) / (2.0 * h),
        ]
    }

    /// `[[H_pp, H_pq], [H_qp, H_qq]]`.
    pub fn hess(&self, t: f64, x: Point) -> [[f64; 2]; 2] {
        if let Some(hs) = &self.hessian {
            return hs(t, x[0], x[1]);
        }
        let h = FD_STEP;
        if self.gradient.is_some() {
            let gp = |dp: f64, dq: f64| self.grad(t, [x[0] + dp, x[1] + dq]);
            let (a, b) = (gp(h, 0.0), gp(-h, 0.0));
            let (c, d) = (gp(0.0, h), gp(0.0, -h));
            let hpp = (a[0] - b[0]) / (2.0 * h);
            let hqq = (c[1] - d[1]) / (2.0 * h);
            let hpq = ((a[1] - b[1]) + (c[0] - d[0])) / (4.0 * h);
            return [[hpp, hpq], [hpq, hqq]];
        }
        // Second differences of H lose half the digits at step 1e-5, so a
        // wider step balances truncation against rounding.
        let h = 1e-4;
        let f = |p: f64, q: f64| (self.principal)(t, p, q);
        let c = f(x[0], x[1]);
        let hpp = (f(x[0] + h, x[1]) - 2.0 * c + f(x[0] - h, x[1])) / (h * h);
        let hqq = (f(x[0], x[1] + h) - 2.0 * c + f(x[0], x[1] - h)) / (h * h);
        let hpq = (f(x[0] + h, x[1] + h) - f(x[0] + h, x[1] - h) - f(x[0] - h, x[1] + h)
            + f(x[0] - h, x[1] - h))
            / (4.0 * h * h);
        [[hpp, hpq], [hpq, hqq]]
    }

    /// Largest deviation from `Λ`-periodicity over an `n × n` sample grid.
    pub fn periodicity_defect(&self, t: f64, n: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = [i as f64 / n as f64 - 0.3, j as f64 / n as f64 + 0.2];
                let h0 = self.h(t, x);
                worst = worst
                    .max((self.h(t, [x[0] + 1.0, x[1]]) - h0).abs())
                    .max((self.h(t, [x[0], x[1] + 1.0]) - h0).abs());
            }
        }
        worst
    }

    /// Estimate of `sup |X|` from a coarse grid at the given times.
    fn field_bound(&self, times: &[f64]) -> f64 {
        let n = 24;
        let mut worst: f64 = 0.0;
        for &t in times {
            for i in 0..n {
                for j in 0..n {
                    let x = [i as f64 / n as f64, j as f64 / n as f64];
                    let v = hamiltonian_vector_field(self, t, x);
                    worst = worst.max(v[0].hypot(v[1]));
                }
            }
        }
        worst
    }
}

/// `X` with `ω(X, ·) = −dH`, i.e. `X = (−∂H/∂q, ∂H/∂p)/(4π)`.
pub fn hamiltonian_vector_field(sym: &SymbolField, t: f64, x: Point) -> Point {
    let g = sym.grad(t, x);
    [-g[1] / SYMPLECTIC_AREA, g[0] / SYMPLECTIC_AREA]
}

/// `DX` as a matrix acting on `(δp, δq)`.
pub fn field_jacobian(sym: &SymbolField, t: f64, x: Point) -> Matrix2<f64> {
    let h = sym.hess(t, x);
    Matrix2::new(-h[1][0], -h[1][1], h[0][0], h[0][1]) / SYMPLECTIC_AREA
}

/// A sampled flow line with its linearization and accumulated integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: Point,
    pub times: Vec<f64>,
    /// `φ_t(x)` on the lifted path in `ℝ²`.
    pub lifted: Vec<Point>,
    /// `φ_t(x)` reduced to the fundamental cell.
    pub points: Vec<Point>,
    /// `lifted = points + Λ·winding`.
    pub windings: Vec<[i64; 2]>,
    /// `T_xφ_t` on the lifted path.
    pub jacobians: Vec<Matrix2<f64>>,
    /// `∫₀ᵗ H(r, φ_r x) dr`.
    pub action_h: Vec<f64>,
    /// `∫₀ᵗ H^sub(r, φ_r x) dr`.
    pub action_hsub: Vec<f64>,
    /// `∫ α` along the lifted path.
    pub conn_l: Vec<f64>,
    /// Connection integral in `K`, identically zero for the flat torus.
    pub conn_k: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn jacobian_dmatrix(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(2, 2, self.jacobians[i].as_slice())
    }

    /// Largest `|det T_xφ_t − 1|` along the path.
    pub fn symplectic_defect(&self) -> f64 {
        self.jacobians
            .iter()
            .map(|m| (m.determinant() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

const STATE: usize = 9;
type State = [f64; STATE];

fn flow_rhs(ps: &TorusPhaseSpace, sym: &SymbolField, t: f64, s: &State) -> State {
    let x = [s[0], s[1]];
    let v = hamiltonian_vector_field(sym, t, x);
    let dx = field_jacobian(sym, t, x);
    let m = Matrix2::new(s[2], s[3], s[4], s[5]);
    let dm = dx * m;
    [
        v[0],
        v[1],
        dm[(0, 0)],
        dm[(0, 1)],
        dm[(1, 0)],
        dm[(1, 1)],
        sym.h(t, x),
        sym.h_sub(t, x),
        ps.alpha(x, v),
    ]
}

fn rk4(ps: &TorusPhaseSpace, sym: &SymbolField, t: f64, h: f64, s: &State) -> State {
    let add = |a: &State, b: &State, c: f64| -> State {
        let mut out = *a;
        for i in 0..STATE {
            out[i] += c * b[i];
        }
        out
    };
    let k1 = flow_rhs(ps, sym, t, s);
    let k2 = flow_rhs(ps, sym, t + h / 2.0, &add(s, &k1, h / 2.0));
    let k3 = flow_rhs(ps, sym, t + h / 2.0, &add(s, &k2, h / 2.0));
    let k4 = flow_rhs(ps, sym, t + h, &add(s, &k3, h));
    let mut out = *s;
    for i in 0..STATE {
        out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

fn rk4_span(
    ps: &TorusPhaseSpace,
    sym: &SymbolField,
    t0: f64,
    t1: f64,
    steps: usize,
    s: &State,
) -> State {
    let h = (t1 - t0) / steps as f64;
    let mut state = *s;
    for i in 0..steps {
        state = rk4(ps, sym, t0 + i as f64 * h, h, &state);
    }
    state
}

/// Local error tolerance of the flow integrator.
pub const FLOW_TOL: f64 = 1e-10;

/// Integrates the flow, its linearization and the action and connection
/// integrals over a grid that contains `t = 0` (negative times run backward).
///
/// Each grid interval is integrated with classical RK4 at steps no larger
/// than `1e-3 / (1 + sup|X|)` and checked against a run with half the step;
/// the step is halved until the difference is below [`FLOW_TOL`].
pub fn integrate_flow(
    ps: &TorusPhaseSpace,
    sym: &SymbolField,
    x: Point,
    times: &[f64],
) -> Result<Trajectory> {
    validate_grid(times)?;
    if sym.model() == Some(ModelSymbol::CosQ) && sym.constant_subprincipal().is_some() {
        return Ok(shear_trajectory(ps, sym, x, times));
    }
    let zero = times.iter().position(|&t| t == 0.0).expect("grid checked");
    let sample_times = [times[0], 0.0, times[times.len() - 1]];
    let h_max = 1e-3 / (1.0 + sym.field_bound(&sample_times));

    let mut states: Vec<State> = vec![[0.0; STATE]; times.len()];
    states[zero] = [x[0], x[1], 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
    let advance = |from: usize, to: usize, states: &mut [State]| -> Result<()> {
        let (t0, t1) = (times[from], times[to]);
        let mut steps = ((t1 - t0).abs() / h_max).ceil().max(1.0) as usize;
        let start = states[from];
        loop {
            let coarse = rk4_span(ps, sym, t0, t1, steps, &start);
            let fine = rk4_span(ps, sym, t0, t1, 2 * steps, &start);
            let estimate = coarse[..6]
                .iter()
                .zip(&fine[..6])
                .map(|(a, b)| (a - b).abs() / (1.0 + b.abs()))
                .fold(0.0, f64::max)
                / 15.0;
            if estimate <= FLOW_TOL {
                states[to] = fine;
                return Ok(());
            }
            steps *= 2;
            if steps > 1 << 20 {
                return Err(Error::StepRejected {
                    t: t1,
                    estimate,
                    tolerance: FLOW_TOL,
                });
            }
        }
    };
    for i in zero..times.len() - 1 {
        advance(i, i + 1, &mut states)?;
    }
    for i in (1..=zero).rev() {
        advance(i, i - 1, &mut states)?;
    }

    let mut traj = Trajectory {
        start: x,
        times: times.to_vec(),
        lifted: Vec::with_capacity(times.len()),
        points: Vec::with_capacity(times.len()),
        windings: Vec::with_capacity(times.len()),
        jacobians: Vec::with_capacity(times.len()),
        action_h: Vec::with_capacity(times.len()),
        action_hsub: Vec::with_capacity(times.len()),
        conn_l: Vec::with_capacity(times.len()),
        conn_k: vec![0.0; times.len()],
    };
    for s in &states {
        let lifted = [s[0], s[1]];
        let (reduced, winding) = ps.reduce(lifted);
        traj.lifted.push(lifted);
        traj.points.push(reduced);
        traj.windings.push(winding);
        traj.jacobians.push(Matrix2::new(s[2], s[3], s[4], s[5]));
        traj.action_h.push(s[6]);
        traj.action_hsub.push(s[7]);
        traj.conn_l.push(s[8]);
    }
    Ok(traj)
}

fn validate_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Validation("time grid is empty".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Validation("time grid has non-finite entries".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation("time grid must be strictly increasing".into()));
    }
    if !times.contains(&0.0) {
        return Err(Error::Validation("time grid must contain t = 0".into()));
    }
    Ok(())
}

fn shear_trajectory(ps: &TorusPhaseSpace, sym: &SymbolField, x: Point, times: &[f64]) -> Trajectory {
    let c = sym.constant_subprincipal().unwrap_or(0.0);
    let (s, co) = ((2.0 * PI * x[1]).sin(), (2.0 * PI * x[1]).cos());
    let n = times.len();
    let mut traj = Trajectory {
        start: x,
        times: times.to_vec(),
        lifted: Vec::with_capacity(n),
        points: Vec::with_capacity(n),
        windings: Vec::with_capacity(n),
        jacobians: Vec::with_capacity(n),
        action_h: Vec::with_capacity(n),
        action_hsub: Vec::with_capacity(n),
        conn_l: Vec::with_capacity(n),
        conn_k: vec![0.0; n],
    };
    for &t in times {
        let lifted = [x[0] + t * s / 2.0, x[1]];
        let (reduced, winding) = ps.reduce(lifted);
        traj.lifted.push(lifted);
        traj.points.push(reduced);
        traj.windings.push(winding);
        traj.jacobians.push(Matrix2::new(1.0, PI * t * co, 0.0, 1.0));
        traj.action_h.push(t * co);
        traj.action_hsub.push(c * t);
        traj.conn_l.push(-PI * t * x[1] * s);
    }
    traj
}

/// Line bundles whose parallel transport along flow lines enters the lifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bundle {
    /// The prequantum bundle, with connection form `α`.
    L,
    /// The canonical bundle, flat in the `dz` frame.
    K,
}

impl FromStr for Bundle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "L" | "l" => Ok(Bundle::L),
            "K" | "k" => Ok(Bundle::K),
            other => Err(Error::UnknownTag(other.to_string())),
        }
    }
}

/// `exp(i∫α_A)` along the lifted path at every sample time.
pub fn transport_phase(traj: &Trajectory, bundle: Bundle) -> Vec<Complex64> {
    let integrals = match bundle {
        Bundle::L => &traj.conn_l,
        Bundle::K => &traj.conn_k,
    };
    integrals
        .iter()
        .map(|&a| Complex64::from_polar(1.0, a))
        .collect()
}

/// Accumulated argument of the prequantum lift at level `k`:
/// `−∫H^sub + k(−∫H + ∫α)`.
pub fn prequantum_angle(traj: &Trajectory, k: u32) -> Vec<f64> {
    let kf = f64::from(k);
    (0..traj.len())
        .map(|i| -traj.action_hsub[i] + kf * (traj.conn_l[i] - traj.action_h[i]))
        .collect()
}

/// `e^{−i∫H^sub} [e^{−i∫H} 𝒯^L]^k`, the prequantum lift at level `k`.
pub fn prequantum_phase(traj: &Trajectory, k: u32) -> Vec<Complex64> {
    prequantum_angle(traj, k)
        .into_iter()
        .map(|a| Complex64::from_polar(1.0, a))
        .collect()
}

/// `ρ_t = det_ℂ(T_xφ_t)¹'⁰⁻¹ / 𝒯_t^K` at every sample.
pub fn rho_graph(traj: &Trajectory) -> Result<Vec<Complex64>> {
    let transport_k = transport_phase(traj, Bundle::K);
    (0..traj.len())
        .map(|i| {
            let g = LinearSymplectomorphism::standard(traj.jacobian_dmatrix(i))?;
            Ok(symplectic::holomorphic_determinant(&g)?.inv() / transport_k[i])
        })
        .collect()
}

/// `ρ_t` from the ratio of canonical pairings of the graph frames, times
/// `e^{−i∫f_K}` (zero on the flat torus). Independent of [`rho_graph`].
pub fn rho_graph_frame(traj: &Trajectory) -> Result<Vec<Complex64>> {
    (0..traj.len())
        .map(|i| {
            let g = LinearSymplectomorphism::standard(traj.jacobian_dmatrix(i))?;
            let c = symplectic::canonical_pairing_ratio(&g)?;
            Ok(c * Complex64::from_polar(1.0, -traj.conn_k[i]))
        })
        .collect()
}

/// Square roots continued outward from the sample at `t = 0`, forward for
/// positive times and backward for negative ones.
pub fn branch_sqrt_from_origin(times: &[f64], values: &[Complex64]) -> Result<Vec<BranchedPhase>> {
    let zero = times
        .iter()
        .position(|&t| t == 0.0)
        .ok_or_else(|| Error::Validation("time grid must contain t = 0".into()))?;
    let forward = symplectic::branch_sqrt_path(&values[zero..])?;
    let reversed: Vec<Complex64> = values[..=zero].iter().rev().copied().collect();
    let backward = symplectic::branch_sqrt_path(&reversed)?;
    let mut out: Vec<BranchedPhase> = backward.into_iter().rev().collect();
    out.extend(forward.into_iter().skip(1));
    Ok(out)
}

/// Branch-continuous `[ρ_t]^{1/2}` equal to `1` at `t = 0`.
pub fn rho_graph_half(traj: &Trajectory) -> Result<Vec<BranchedPhase>> {
    branch_sqrt_from_origin(&traj.times, &rho_graph(traj)?)
}

fn point_vec(v: Point) -> DVector<f64> {
    DVector::from_vec(vec![v[0], v[1]])
}

/// `ρ′_t`, the level-set lift relative to transport in `K`, for an
/// autonomous symbol and a start point on `H⁻¹(E)`.
pub fn rho_level(
    ps: &TorusPhaseSpace,
    sym: &SymbolField,
    traj: &Trajectory,
    energy: f64,
) -> Result<Vec<Complex64>> {
    if !sym.is_autonomous() {
        return Err(Error::Validation(
            "level-set lift needs an autonomous symbol".into(),
        ));
    }
    let h0 = sym.h(0.0, traj.start);
    if (h0 - energy).abs() > 1e-10 {
        return Err(Error::Validation(format!(
            "start point has energy {h0}, expected {energy}"
        )));
    }
    let _ = ps;
    let field_x = hamiltonian_vector_field(sym, 0.0, traj.start);
    norm_x_of(field_x)?;
    let transport_k = transport_phase(traj, Bundle::K);
    (0..traj.len())
        .map(|i| {
            let field_y = hamiltonian_vector_field(sym, 0.0, traj.lifted[i]);
            norm_x_of(field_y)?;
            let g = LinearSymplectomorphism::standard(traj.jacobian_dmatrix(i))?;
            let factors = symplectic::level_set_factors(
                &g,
                &point_vec(field_x),
                &point_vec(field_y),
                SYMPLECTIC_AREA,
            )?;
            Ok(factors.value() / transport_k[i])
        })
        .collect()
}

/// Branch-continuous `[ρ′_t]^{1/2}` starting at `√2‖X_x‖⁻¹`.
pub fn rho_level_half(
    ps: &TorusPhaseSpace,
    sym: &SymbolField,
    traj: &Trajectory,
    energy: f64,
) -> Result<Vec<BranchedPhase>> {
    branch_sqrt_from_origin(&traj.times, &rho_level(ps, sym, traj, energy)?)
}

fn norm_x_of(v: Point) -> Result<f64> {
    let norm = (SYMPLECTIC_AREA * (v[0] * v[0] + v[1] * v[1])).sqrt();
    if !(norm >= REGULAR_THRESHOLD) {
        return Err(Error::NonRegular {
            norm,
            threshold: REGULAR_THRESHOLD,
        });
    }
    Ok(norm)
}

/// `‖X‖ = √ω(X, jX)`.
pub fn norm_x(ps: &TorusPhaseSpace, sym: &SymbolField, t: f64, x: Point) -> Result<f64> {
    let v = hamiltonian_vector_field(sym, t, x);
    debug_assert!((ps.omega(v, ps.complex_structure(v)) - SYMPLECTIC_AREA * (v[0] * v[0] + v[1] * v[1])).abs() < 1e-12);
    norm_x_of(v)
}

/// Phases and amplitudes of the semiclassical lifts along a trajectory.
#[derive(Debug, Clone)]
pub struct GeometricLift {
    pub transport_l: Vec<BranchedPhase>,
    pub prequantum_k: Vec<Complex64>,
    pub rho_half: Vec<BranchedPhase>,
    pub rho_level_half: Option<Vec<BranchedPhase>>,
}

/// All lifts at level `k`; the level-set amplitude only when `energy` is given.
pub fn geometric_lift(
    ps: &TorusPhaseSpace,
    sym: &SymbolField,
    traj: &Trajectory,
    k: u32,
    energy: Option<f64>,
) -> Result<GeometricLift> {
    Ok(GeometricLift {
        transport_l: traj
            .conn_l
            .iter()
            .map(|&a| BranchedPhase::from_polar(1.0, a))
            .collect(),
        prequantum_k: prequantum_phase(traj, k),
        rho_half: rho_graph_half(traj)?,
        rho_level_half: energy
            .map(|e| rho_level_half(ps, sym, traj, e))
            .transpose()?,
    })
}

/// `B = ‖X₁‖² + iω(X₁, X₂)` for the Lagrangian line spanned by `tangent`.
pub fn b_coefficient(
    ps: &TorusPhaseSpace,
    sym: &SymbolField,
    t: f64,
    x: Point,
    tangent: Point,
) -> Result<Complex64> {
    let _ = ps;
    let omega = symplectic::standard_symplectic(1) * SYMPLECTIC_AREA;
    let cs = symplectic::standard_complex_structure(1);
    let field = point_vec(hamiltonian_vector_field(sym, t, x));
    let tangent = DMatrix::from_column_slice(2, 1, &tangent);
    symplectic::lagrangian_b_coefficient(&omega, &cs, &field, &tangent)
}

/// `B` on `M × M̄` for the diagonal Lagrangian and the field `(X, 0)`.
pub fn product_b_coefficient(sym: &SymbolField, t: f64, x: Point) -> Result<Complex64> {
    // coordinates (p, q, p′, q′); M̄ carries −ω and −j
    let j2 = symplectic::standard_symplectic(1) * SYMPLECTIC_AREA;
    let c2 = symplectic::standard_complex_structure(1);
    let mut omega = DMatrix::<f64>::zeros(4, 4);
    let mut cs = DMatrix::<f64>::zeros(4, 4);
    omega.view_mut((0, 0), (2, 2)).copy_from(&j2);
    omega.view_mut((2, 2), (2, 2)).copy_from(&(-&j2));
    cs.view_mut((0, 0), (2, 2)).copy_from(&c2);
    cs.view_mut((2, 2), (2, 2)).copy_from(&(-&c2));
    let v = hamiltonian_vector_field(sym, t, x);
    let field = DVector::from_vec(vec![v[0], v[1], 0.0, 0.0]);
    let diagonal = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
    symplectic::lagrangian_b_coefficient(&omega, &cs, &field, &diagonal)
}

/// A time `t` with `φ_t(x) = y + Λ·winding` on the lifted path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnTime {
    pub t: f64,
    pub winding: [i64; 2],
}

/// All `t ∈ [−T, T]` with `φ_t(x) ≡ y` modulo the lattice.
pub fn return_times(
    ps: &TorusPhaseSpace,
    sym: &SymbolField,
    x: Point,
    y: Point,
    window: f64,
) -> Result<Vec<ReturnTime>> {
    if !sym.is_autonomous() {
        return Err(Error::Validation("return times need an autonomous symbol".into()));
    }
    if !(window >= 0.0) {
        return Err(Error::Validation("window half-width must be non-negative".into()));
    }
    let (hx, hy) = (sym.h(0.0, x), sym.h(0.0, y));
    if (hx - hy).abs() > 1e-10 {
        return Err(Error::Validation(format!(
            "points lie on different levels ({hx} and {hy})"
        )));
    }
    norm_x(ps, sym, 0.0, x)?;
    if ps.lattice() == &Matrix2::identity() && sym.model() == Some(ModelSymbol::CosQ) {
        return Ok(shear_return_times(x, y, window));
    }
    general_return_times(ps, sym, x, y, window)
}

fn shear_return_times(x: Point, y: Point, window: f64) -> Vec<ReturnTime> {
    let dq = y[1] - x[1];
    let n = dq.round();
    if (dq - n).abs() > 1e-10 {
        return Vec::new();
    }
    let speed = (2.0 * PI * x[1]).sin() / 2.0;
    let dp = y[0] - x[0];
    // t = (dp + m)/speed for integer m
    let (lo, hi) = {
        let a = -window * speed.abs() - dp;
        let b = window * speed.abs() - dp;
        (a.ceil() as i64 - 1, b.floor() as i64 + 1)
    };
    let mut out: Vec<ReturnTime> = (lo..=hi)
        .map(|m| ReturnTime {
            t: (dp + m as f64) / speed,
            winding: [m, -(n as i64)],
        })
        .filter(|r| r.t.abs() <= window)
        .collect();
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out
}

fn general_return_times(
    ps: &TorusPhaseSpace,
    sym: &SymbolField,
    x: Point,
    y: Point,
    window: f64,
) -> Result<Vec<ReturnTime>> {
    let fy = hamiltonian_vector_field(sym, 0.0, y);
    if fy[0].hypot(fy[1]) * SYMPLECTIC_AREA.sqrt() < REGULAR_THRESHOLD {
        return Err(Error::Degenerate("target point is a fixed point of the flow".into()));
    }
    let speed = sym.field_bound(&[0.0]).max(1e-3);
    let step = (0.02 / speed).min(window.max(1e-3) / 8.0);
    let n = (window / step).ceil() as usize;
    let mut grid: Vec<f64> = (0..=2 * n)
        .map(|i| -window + i as f64 * window / n as f64)
        .collect();
    grid[n] = 0.0;
    let traj = integrate_flow(ps, sym, x, &grid)?;

    let along = |z: Point, w: Point| (z[0] - w[0]) * fy[0] + (z[1] - w[1]) * fy[1];
    let lifted_at = |i: usize, tau: f64| -> Result<Point> {
        if tau == 0.0 {
            return Ok(traj.lifted[i]);
        }
        let grid = if tau > 0.0 { [0.0, tau] } else { [tau, 0.0] };
        let sub = integrate_flow(ps, sym, traj.lifted[i], &grid)?;
        Ok(if tau > 0.0 { sub.lifted[1] } else { sub.lifted[0] })
    };
    let closeness = 4.0 * step * speed;
    let mut out: Vec<ReturnTime> = Vec::new();
    for i in 0..traj.len() - 1 {
        let (d0, w) = ps.lattice_distance(traj.lifted[i], y);
        let (d1, _) = ps.lattice_distance(traj.lifted[i + 1], y);
        if d0.min(d1) > closeness {
            continue;
        }
        let target = {
            let v = ps.lattice_vector(w);
            [y[0] + v[0], y[1] + v[1]]
        };
        let s0 = along(traj.lifted[i], target);
        let s1 = along(traj.lifted[i + 1], target);
        let last = i + 1 == traj.len() - 1;
        let bracket = s0 == 0.0 || (s1 == 0.0 && last) || s0 * s1 < 0.0;
        if bracket {
            let (mut a, mut b) = if s0 == 0.0 {
                (0.0, 0.0)
            } else if s1 == 0.0 {
                let h = grid[i + 1] - grid[i];
                (h, h)
            } else {
                (0.0, grid[i + 1] - grid[i])
            };
            let mut sa = s0;
            while b - a > 1e-12 {
                let mid = 0.5 * (a + b);
                let sm = along(lifted_at(i, mid)?, target);
                if sm == 0.0 {
                    a = mid;
                    b = mid;
                    break;
                }
                if sm.signum() == sa.signum() {
                    a = mid;
                    sa = sm;
                } else {
                    b = mid;
                }
            }
            let tau = 0.5 * (a + b);
            let t = grid[i] + tau;
            let end = lifted_at(i, tau)?;
            let (dist, winding) = ps.lattice_distance(end, y);
            if dist < 1e-8 && t.abs() <= window && !out.iter().any(|r| (r.t - t).abs() < 1e-9) {
                out.push(ReturnTime { t, winding });
            }
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(out)
}

/// Second-order invariants in coordinates `w = √G z` normalized to `G = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDiagnostics {
    /// `H_{ww̄} + ½H_{w̄w̄}`.
    pub box_h: Complex64,
    /// `H_{ww̄} + H_{w̄w̄}`.
    pub theta: Complex64,
    /// `θ/2 + H^sub`.
    pub zeta: Complex64,
}

pub fn box_operator(ps: &TorusPhaseSpace, sym: &SymbolField, t: f64, x: Point) -> BoxDiagnostics {
    let _ = ps;
    let h = sym.hess(t, x);
    let (hpp, hpq, hqq) = (h[0][0], h[0][1], h[1][1]);
    // ∂z = (∂p − i∂q)/2 and ∂w = G^{-1/2} ∂z
    let zzbar = Complex64::new((hpp + hqq) / 4.0, 0.0) / METRIC_SCALE;
    let zbar2 = Complex64::new((hpp - hqq) / 4.0, hpq / 2.0) / METRIC_SCALE;
    let box_h = zzbar + zbar2 * 0.5;
    let theta = zzbar + zbar2;
    BoxDiagnostics {
        box_h,
        theta,
        zeta: theta * 0.5 + sym.h_sub(t, x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_p() -> SymbolField {
        SymbolField::from_fn("cos(2*pi*p)", true, |_, p, _| (2.0 * PI * p).cos())
    }

    /// The model symbol without its closed-form flow, to exercise RK4.
    fn cos_q_numeric() -> SymbolField {
        SymbolField::from_fn("cos(2*pi*q)", true, |_, _, q| (2.0 * PI * q).cos())
            .with_gradient(|_, _, q| [0.0, -2.0 * PI * (2.0 * PI * q).sin()])
            .with_hessian(|_, _, q| [[0.0, 0.0], [0.0, -4.0 * PI * PI * (2.0 * PI * q).cos()]])
    }

    #[test]
    fn vector_field_examples() {
        let sym = SymbolField::model_cos();
        let v = hamiltonian_vector_field(&sym, 0.0, [0.3, 0.1]);
        assert!((v[0] - 0.5 * (0.2 * PI).sin()).abs() < 1e-15 && v[1] == 0.0);
        let v = hamiltonian_vector_field(&SymbolField::constant(2.0), 0.0, [0.3, 0.1]);
        assert_eq!(v, [0.0, 0.0]);
        let v = hamiltonian_vector_field(&cos_p(), 0.0, [0.1, 0.4]);
        assert!(v[0].abs() < 1e-12);
        assert!((v[1] + 0.5 * (0.2 * PI).sin()).abs() < 1e-8);
    }

    #[test]
    fn field_satisfies_hamilton_equation() {
        let ps = TorusPhaseSpace::default();
        let sym = SymbolField::from_fn("mix", true, |_, p, q| {
            (2.0 * PI * p).sin() * (2.0 * PI * q).cos() + 0.3 * (2.0 * PI * q).sin()
        });
        let x = [0.21, 0.67];
        let v = hamiltonian_vector_field(&sym, 0.0, x);
        let dh = sym.grad(0.0, x);
        for u in [[1.0, 0.0], [0.0, 1.0], [0.3, -0.8]] {
            let lhs = ps.omega(v, u) + dh[0] * u[0] + dh[1] * u[1];
            assert!(lhs.abs() < 1e-9);
        }
    }

    #[test]
    fn phase_space_structure() {
        let ps = TorusPhaseSpace::default();
        assert!(ps.curvature_defect(8, 1e-4) < 1e-8);
        assert_eq!(ps.reduce([1.25, -0.5]), ([0.25, 0.5], [1, -1]));
        assert!(TorusPhaseSpace::new(Matrix2::new(2.0, 0.0, 0.0, 1.0)).is_err());
        assert!(TorusPhaseSpace::new(Matrix2::new(1.0, 1.0, 0.0, 1.0)).is_ok());
    }

    #[test]
    fn shear_flow_closed_form() {
        let ps = TorusPhaseSpace::default();
        let sym = SymbolField::model_cos();
        let traj = integrate_flow(&ps, &sym, [0.3, 0.1], &[0.0, 1.0]).unwrap();
        assert!((traj.points[1][0] - (0.3 + 0.5 * (0.2 * PI).sin())).abs() < 1e-15);
        assert!((traj.points[1][0] - 0.59389).abs() < 1e-5);
        let j = traj.jacobians[1];
        assert!((j[(0, 1)] - PI * (0.2 * PI).cos()).abs() < 1e-14);
    }

    #[test]
    fn rk4_reproduces_the_shear() {
        let ps = TorusPhaseSpace::default();
        let exact = integrate_flow(&ps, &SymbolField::model_cos(), [0.3, 0.1], &[-0.7, 0.0, 0.4, 1.0])
            .unwrap();
        let num = integrate_flow(&ps, &cos_q_numeric(), [0.3, 0.1], &[-0.7, 0.0, 0.4, 1.0]).unwrap();
        for i in 0..4 {
            for c in 0..2 {
                assert!((exact.lifted[i][c] - num.lifted[i][c]).abs() < 1e-10);
            }
            assert!((exact.jacobians[i] - num.jacobians[i]).abs().max() < 1e-10);
            assert!((exact.action_h[i] - num.action_h[i]).abs() < 1e-10);
            assert!((exact.conn_l[i] - num.conn_l[i]).abs() < 1e-10);
        }
        assert!(num.symplectic_defect() < 1e-9);
    }

    #[test]
    fn grid_validation() {
        let ps = TorusPhaseSpace::default();
        let sym = SymbolField::model_cos();
        assert!(integrate_flow(&ps, &sym, [0.0, 0.1], &[0.1, 0.2]).is_err());
        assert!(integrate_flow(&ps, &sym, [0.0, 0.1], &[0.0, 0.0]).is_err());
        assert!(integrate_flow(&ps, &sym, [0.0, 0.1], &[]).is_err());
    }

    #[test]
    fn transport_examples() {
        let ps = TorusPhaseSpace::default();
        let sym = SymbolField::model_cos();
        let (t, q) = (0.8, 0.1);
        let traj = integrate_flow(&ps, &sym, [0.3, q], &[0.0, t]).unwrap();
        let tl = transport_phase(&traj, Bundle::L)[1];
        let expected = Complex64::from_polar(1.0, -PI * t * q * (2.0 * PI * q).sin());
        assert!((tl - expected).norm() < 1e-15);
        assert_eq!(transport_phase(&traj, Bundle::K)[1], Complex64::new(1.0, 0.0));
        assert!("M".parse::<Bundle>().is_err());

        // loop p ↦ p + 1 at height q: ∫α = −2πq
        let q: f64 = 0.37;
        let speed = 0.5 * (2.0 * PI * q).sin();
        let traj = integrate_flow(&ps, &sym, [0.0, q], &[0.0, 1.0 / speed]).unwrap();
        let loop_phase = transport_phase(&traj, Bundle::L)[1];
        assert!((loop_phase - Complex64::from_polar(1.0, -2.0 * PI * q)).norm() < 1e-13);
    }

    #[test]
    fn prequantum_examples() {
        let ps = TorusPhaseSpace::default();
        let (t, q, k) = (0.6, 0.1, 7);
        let traj = integrate_flow(&ps, &SymbolField::model_cos(), [0.3, q], &[0.0, t]).unwrap();
        let got = prequantum_phase(&traj, k)[1];
        let expected = Complex64::from_polar(
            1.0,
            -f64::from(k) * t * ((2.0 * PI * q).cos() + PI * q * (2.0 * PI * q).sin()),
        );
        assert!((got - expected).norm() < 1e-13);

        let c = 0.7;
        let traj = integrate_flow(&ps, &SymbolField::constant(c), [0.3, q], &[0.0, t]).unwrap();
        let got = prequantum_phase(&traj, k)[1];
        assert!((got - Complex64::from_polar(1.0, -f64::from(k) * c * t)).norm() < 1e-12);

        let sym = SymbolField::model_cos().with_constant_subprincipal(0.4);
        let traj2 = integrate_flow(&ps, &sym, [0.3, q], &[0.0, t]).unwrap();
        let traj1 = integrate_flow(&ps, &SymbolField::model_cos(), [0.3, q], &[0.0, t]).unwrap();
        let ratio = prequantum_phase(&traj2, k)[1] / prequantum_phase(&traj1, k)[1];
        assert!((ratio - Complex64::from_polar(1.0, -0.4 * t)).norm() < 1e-14);
    }

    #[test]
    fn rho_routes_agree_on_the_shear() {
        let ps = TorusPhaseSpace::default();
        let q: f64 = 0.1;
        let times: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let traj = integrate_flow(&ps, &SymbolField::model_cos(), [0.3, q], &times).unwrap();
        let a = rho_graph(&traj).unwrap();
        let b = rho_graph_frame(&traj).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-12);
        }
        let half = rho_graph_half(&traj).unwrap();
        let arg = half[100].branch_angle;
        assert!((arg - 0.5 * (PI * (0.2 * PI).cos() / 2.0).atan()).abs() < 1e-12);
        assert!((arg - 0.45214).abs() < 2e-4);
    }

    #[test]
    fn branches_continue_backward_in_time() {
        let ps = TorusPhaseSpace::default();
        let q: f64 = 0.1;
        let times: Vec<f64> = (-300..=300).map(|i| i as f64 / 100.0).collect();
        let traj = integrate_flow(&ps, &SymbolField::model_cos(), [0.3, q], &times).unwrap();
        let half = rho_graph_half(&traj).unwrap();
        for (&t, b) in times.iter().zip(&half) {
            let a = PI * t / 2.0 * (2.0 * PI * q).cos();
            assert!((b.branch_angle - 0.5 * a.atan()).abs() < 1e-12);
        }
    }

    #[test]
    fn level_rho_on_the_shear_is_constant() {
        let ps = TorusPhaseSpace::default();
        let sym = SymbolField::model_cos();
        let q: f64 = 0.1;
        let e = (2.0 * PI * q).cos();
        let traj = integrate_flow(&ps, &sym, [0.3, q], &[-1.0, 0.0, 0.5, 2.0]).unwrap();
        let rho = rho_level(&ps, &sym, &traj, e).unwrap();
        let expected = 2.0 / (PI * (2.0 * PI * q).sin().powi(2));
        for r in &rho {
            assert!((r - Complex64::new(expected, 0.0)).norm() < 1e-12 * expected);
        }
        let half = rho_level_half(&ps, &sym, &traj, e).unwrap();
        let nx = norm_x(&ps, &sym, 0.0, [0.3, q]).unwrap();
        assert!((half[1].value.re - 2f64.sqrt() / nx).abs() < 1e-12);
        assert!(rho_level(&ps, &sym, &traj, e + 0.1).is_err());
    }

    #[test]
    fn norm_examples() {
        let ps = TorusPhaseSpace::default();
        let sym = SymbolField::model_cos();
        let n1 = norm_x(&ps, &sym, 0.0, [0.0, 0.1]).unwrap();
        assert!((n1 - PI.sqrt() * (0.2 * PI).sin()).abs() < 1e-14);
        assert!((n1 - 1.04181).abs() < 5e-5);
        let n2 = norm_x(&ps, &sym, 0.0, [0.0, 0.25]).unwrap();
        assert!((n2 - 1.77245).abs() < 1e-5);
        assert!(matches!(
            norm_x(&ps, &SymbolField::constant(1.0), 0.0, [0.1, 0.1]),
            Err(Error::NonRegular { .. })
        ));
    }

    #[test]
    fn b_examples() {
        let ps = TorusPhaseSpace::default();
        let sym = SymbolField::model_cos();
        let q: f64 = 0.1;
        let b = b_coefficient(&ps, &sym, 0.0, [0.3, q], [0.0, 1.0]).unwrap();
        assert!((b - Complex64::new(PI * (2.0 * PI * q).sin().powi(2), 0.0)).norm() < 1e-14);
        assert!(matches!(
            b_coefficient(&ps, &sym, 0.0, [0.3, q], [1.0, 0.0]),
            Err(Error::Degenerate(_))
        ));
        let nx = norm_x(&ps, &sym, 0.0, [0.3, q]).unwrap();
        let bp = product_b_coefficient(&sym, 0.0, [0.3, q]).unwrap();
        assert!((bp - Complex64::new(nx * nx / 2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn shear_return_time_examples() {
        let ps = TorusPhaseSpace::default();
        let sym = SymbolField::model_cos();
        let x = [0.3, 0.1];
        let r = return_times(&ps, &sym, x, x, 3.0).unwrap();
        assert_eq!(r, vec![ReturnTime { t: 0.0, winding: [0, 0] }]);
        let r = return_times(&ps, &sym, x, x, 7.0).unwrap();
        let first = 2.0 / (0.2 * PI).sin();
        assert_eq!(r.len(), 5);
        assert!((r[3].t - first).abs() < 1e-12 && r[3].winding == [1, 0]);
        assert!((r[4].t - 2.0 * first).abs() < 1e-12 && r[4].winding == [2, 0]);
        assert!((r[1].t + first).abs() < 1e-12 && r[1].winding == [-1, 0]);
        assert!((first - 3.4026).abs() < 1e-4);

        let y = [0.3 + 0.25 * (0.2 * PI).sin(), 0.1];
        let r = return_times(&ps, &sym, x, y, 1.0).unwrap();
        assert!(r.iter().any(|r| (r.t - 0.5).abs() < 1e-12));
        assert!(return_times(&ps, &sym, [0.3, 0.5], [0.3, 0.5], 1.0).is_err());
    }

    #[test]
    fn general_return_times_match_the_shear() {
        let ps = TorusPhaseSpace::default();
        let x = [0.3, 0.1];
        let exact = return_times(&ps, &SymbolField::model_cos(), x, x, 7.0).unwrap();
        let num = return_times(&ps, &cos_q_numeric(), x, x, 7.0).unwrap();
        assert_eq!(exact.len(), num.len());
        for (a, b) in exact.iter().zip(&num) {
            assert!((a.t - b.t).abs() < 1e-9, "{a:?} {b:?}");
            assert_eq!(a.winding, b.winding);
        }
    }

    #[test]
    fn box_examples() {
        let ps = TorusPhaseSpace::default();
        let c = SymbolField::constant(3.0).with_constant_subprincipal(0.25);
        let d = box_operator(&ps, &c, 0.0, [0.2, 0.3]);
        assert_eq!(d.box_h, Complex64::new(0.0, 0.0));
        assert_eq!(d.zeta, Complex64::new(0.25, 0.0));
        let lin = SymbolField::from_fn("lin", true, |_, p, q| 2.0 * p - q);
        let d = box_operator(&ps, &lin, 0.0, [0.2, 0.3]);
        assert!(d.box_h.norm() < 1e-6 && d.theta.norm() < 1e-6);
        let q: f64 = 0.1;
        let d = box_operator(&ps, &SymbolField::model_cos(), 0.0, [0.2, q]);
        assert!((d.box_h.re + PI / 4.0 * (2.0 * PI * q).cos()).abs() < 1e-14);
        assert!(d.theta.norm() < 1e-14);
        let fd_sym = SymbolField::from_fn("cos", true, |_, _, q| (2.0 * PI * q).cos());
        let fd = box_operator(&ps, &fd_sym, 0.0, [0.2, q]);
        assert!((fd.box_h - d.box_h).norm() < 1e-5);
    }
}
