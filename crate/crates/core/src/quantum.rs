//! The quantum space `H_k` of holomorphic sections of `L^k` over the torus,
//! its theta-function basis and Toeplitz matrices in that basis.
//!
//! Basis values pass through [`LogComplex`] until the weighted combination
//! `Ψ_ℓ(x)·w(x)^{1/2}`, which is bounded by `O(k^{1/4})` even where the
//! individual theta terms and prefactors reach `e^{O(k)}`.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{Point, SymbolField};
use crate::linalg::{self, HermitianEigen};
use crate::quadrature::{self, Rule};

/// `mantissa · e^{exponent}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogComplex {
    pub mantissa: Complex64,
    pub exponent: f64,
}

impl LogComplex {
    pub const ONE: Self = Self {
        mantissa: Complex64::new(1.0, 0.0),
        exponent: 0.0,
    };

    /// `e^{log_modulus + i·phase}`.
    pub fn from_log(log_modulus: f64, phase: f64) -> Self {
        Self {
            mantissa: Complex64::from_polar(1.0, phase),
            exponent: log_modulus,
        }
    }

    pub fn to_complex(self) -> Complex64 {
        self.mantissa * self.exponent.exp()
    }

    /// `ln |value|`, `−∞` for zero.
    pub fn log_norm(self) -> f64 {
        self.mantissa.norm().ln() + self.exponent
    }

    pub fn scale_log(self, delta: f64) -> Self {
        Self {
            mantissa: self.mantissa,
            exponent: self.exponent + delta,
        }
    }

    pub fn conj(self) -> Self {
        Self {
            mantissa: self.mantissa.conj(),
            exponent: self.exponent,
        }
    }

    pub fn is_finite(self) -> bool {
        self.mantissa.re.is_finite() && self.mantissa.im.is_finite() && !self.exponent.is_nan()
    }
}

impl std::ops::Mul for LogComplex {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        Self {
            mantissa: self.mantissa * rhs.mantissa,
            exponent: self.exponent + rhs.exponent,
        }
    }
}

/// Relative truncation tolerance of the theta series.
pub const THETA_TOL: f64 = 1e-13;

/// `ϑ₃(w, e^{ν}) = Σ_{n∈ℤ} e^{νn²} e^{2inw}`, summed over `|n − n*| ≤ terms`
/// around the index `n*` of the largest term.
///
/// The truncation estimate is the size of the two outermost retained terms
/// relative to the largest one.
pub fn theta3(w: Complex64, nome_log: f64, terms: usize) -> Result<LogComplex> {
    if nome_log == f64::NEG_INFINITY {
        return Ok(LogComplex::ONE);
    }
    if !(nome_log < 0.0) {
        return Err(Error::Validation(format!(
            "theta nome must lie in (0, 1), got log nome {nome_log}"
        )));
    }
    // log|term_n| = νn² − 2n Im w, maximal at n = Im w / ν
    let centre = (w.im / nome_log).round();
    let log_mod = |n: f64| nome_log * n * n - 2.0 * n * w.im;
    let top = log_mod(centre);
    let r = terms as f64;
    let edge = log_mod(centre - r).max(log_mod(centre + r));
    let estimate = (edge - top).exp();
    if estimate > THETA_TOL {
        return Err(Error::Truncation {
            estimate,
            tolerance: THETA_TOL,
        });
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for i in -(terms as i64)..=(terms as i64) {
        let n = centre + i as f64;
        sum += Complex64::from_polar((log_mod(n) - top).exp(), 2.0 * n * w.re);
    }
    Ok(LogComplex {
        mantissa: sum,
        exponent: top,
    })
}

/// Phase convention of the theta basis `Ψ_ℓ` and the matching pointwise
/// weight `e^{−kφ}` of the Hermitian metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum BasisGauge {
    /// Prefactor `exp(2πi(ℓ + k q))` with weight `exp(−c·k q²)`.
    Displayed { weight_coeff: f64 },
    /// Prefactor `exp(2πi z(ℓ + k q))`, `z = p + iq`, with unit weight. The
    /// sections are holomorphic for `∂̄ − iα^{0,1}` in the unitary frame of
    /// the `α`-trivialization.
    Holomorphic,
}

impl fmt::Display for BasisGauge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisGauge::Displayed { weight_coeff } => write!(
                f,
                "prefactor exp(2i*pi*(l + k*q)), weight exp(-{:.6}*k*q^2)",
                weight_coeff
            ),
            BasisGauge::Holomorphic => {
                write!(f, "prefactor exp(2i*pi*z*(l + k*q)), unit weight")
            }
        }
    }
}

/// Candidate gauges in the order they are tried.
pub fn gauge_candidates() -> [BasisGauge; 3] {
    [
        BasisGauge::Displayed {
            weight_coeff: 2.0 * PI,
        },
        BasisGauge::Displayed {
            weight_coeff: 4.0 * PI,
        },
        BasisGauge::Holomorphic,
    ]
}

/// Outcome of the construction-time orthonormality test of one gauge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaugeTrial {
    pub gauge: BasisGauge,
    pub level: u32,
    pub gram_defect: f64,
    pub accepted: bool,
}

/// Tolerance of the orthonormality self-test.
pub const GRAM_TOL: f64 = 1e-8;

/// Tolerance on the change of a quadrature when its nodes are doubled.
pub const RESOLUTION_TOL: f64 = 1e-9;

/// Largest supported level.
pub const MAX_LEVEL: u32 = 400;

/// Level at which gauge candidates are screened.
const SCREEN_LEVEL: u32 = 10;

/// Largest level at which construction verifies the full Gram matrix.
const VERIFY_LEVEL: u32 = 50;

/// `H_k` with its theta basis.
#[derive(Debug, Clone)]
pub struct QuantumSpace {
    k: u32,
    gauge: BasisGauge,
    theta_terms: usize,
    quad_scale: f64,
    trials: Vec<GaugeTrial>,
}

impl QuantumSpace {
    /// Builds `H_k`, selecting the first gauge candidate whose basis passes
    /// the orthonormality test (screened at a small level, then verified at
    /// `k` itself when `k ≤ 50`).
    pub fn new(k: u32) -> Result<Self> {
        Self::with_quad_scale(k, 1.0)
    }

    pub fn with_quad_scale(k: u32, quad_scale: f64) -> Result<Self> {
        validate_level(k)?;
        if !(quad_scale > 0.0 && quad_scale.is_finite()) {
            return Err(Error::Validation(format!(
                "quadrature scale must be positive, got {quad_scale}"
            )));
        }
        let mut trials = Vec::new();
        for gauge in gauge_candidates() {
            let screen = Self::unchecked(SCREEN_LEVEL.min(k), gauge, quad_scale);
            let defect = screen.gram_defect_single()?;
            let accepted = defect <= GRAM_TOL;
            trials.push(GaugeTrial {
                gauge,
                level: screen.k,
                gram_defect: defect,
                accepted,
            });
            if !accepted {
                continue;
            }
            let mut qs = Self::unchecked(k, gauge, quad_scale);
            if k <= VERIFY_LEVEL && k != screen.k {
                let defect = qs.gram_defect_single()?;
                trials.push(GaugeTrial {
                    gauge,
                    level: k,
                    gram_defect: defect,
                    accepted: defect <= GRAM_TOL,
                });
                if defect > GRAM_TOL {
                    continue;
                }
            }
            qs.trials = trials;
            return Ok(qs);
        }
        Err(Error::Numerical(format!(
            "no basis gauge passed the orthonormality test: {trials:?}"
        )))
    }

    /// `H_k` in a fixed gauge, without the orthonormality self-test.
    pub fn with_gauge(k: u32, gauge: BasisGauge) -> Result<Self> {
        validate_level(k)?;
        Ok(Self::unchecked(k, gauge, 1.0))
    }

    fn unchecked(k: u32, gauge: BasisGauge, quad_scale: f64) -> Self {
        Self {
            k,
            gauge,
            theta_terms: 8,
            quad_scale,
            trials: Vec::new(),
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn dim(&self) -> usize {
        2 * self.k as usize
    }

    pub fn gauge(&self) -> BasisGauge {
        self.gauge
    }

    pub fn gauge_trials(&self) -> &[GaugeTrial] {
        &self.trials
    }

    pub fn theta_terms(&self) -> usize {
        self.theta_terms
    }

    /// Nodes per axis: `64·max(1, ⌈k/25⌉)`, times the quadrature scale.
    pub fn quad_order(&self) -> usize {
        let base = 64 * (self.k as usize).div_ceil(25).max(1);
        ((base as f64 * self.quad_scale).ceil() as usize).max(16)
    }

    /// `ln` of the pointwise metric weight `e^{−kφ(p, q)}`.
    pub fn log_metric_weight(&self, x: Point) -> f64 {
        match self.gauge {
            BasisGauge::Displayed { weight_coeff } => -weight_coeff * f64::from(self.k) * x[1] * x[1],
            BasisGauge::Holomorphic => 0.0,
        }
    }

    pub fn metric_weight(&self, x: Point) -> f64 {
        self.log_metric_weight(x).exp()
    }

    /// `Ψ_ℓ(p + iq)` in the trivialization of the gauge.
    pub fn basis_eval(&self, l: usize, x: Point) -> Result<LogComplex> {
        if l >= self.dim() {
            return Err(Error::Index {
                index: l,
                len: self.dim(),
            });
        }
        let kf = f64::from(self.k);
        let lf = l as f64;
        let w = Complex64::new(PI * 2.0 * kf * x[0], PI * (2.0 * kf * x[1] + lf));
        let theta = theta3(w, -2.0 * PI * kf, self.theta_terms)?;
        let base_log = 0.25 * kf.ln() - 0.5 * (2.0 * PI).ln() - PI * lf * lf / (2.0 * kf);
        let (log_mod, phase) = match self.gauge {
            BasisGauge::Displayed { .. } => (0.0, 2.0 * PI * (lf + kf * x[1])),
            BasisGauge::Holomorphic => {
                let c = lf + kf * x[1];
                (-2.0 * PI * x[1] * c, 2.0 * PI * x[0] * c)
            }
        };
        let value = theta * LogComplex::from_log(base_log + log_mod, phase);
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "basis value overflow at l = {l}, x = {x:?}"
            )));
        }
        Ok(value)
    }

    /// `Ψ_ℓ(x)·w(x)^{1/2}`: the basis value in a unitary frame.
    pub fn weighted_eval(&self, l: usize, x: Point) -> Result<Complex64> {
        Ok(self
            .basis_eval(l, x)?
            .scale_log(0.5 * self.log_metric_weight(x))
            .to_complex())
    }

    /// All weighted basis values at `x`.
    pub fn weighted_row(&self, x: Point) -> Result<Vec<Complex64>> {
        (0..self.dim()).map(|l| self.weighted_eval(l, x)).collect()
    }

    /// `Σ_ℓ |Ψ_ℓ(x)|² w(x)`, the diagonal of the Bergman kernel.
    pub fn bergman_diag(&self, x: Point) -> Result<f64> {
        Ok(self.weighted_row(x)?.iter().map(|z| z.norm_sqr()).sum())
    }

    fn rules(&self, nodes: usize) -> (Rule, Rule) {
        let p_rule = quadrature::periodic_trapezoid(nodes);
        let per_panel = 16;
        let panels = nodes.div_ceil(per_panel);
        let q_rule = quadrature::composite_gauss_legendre(per_panel, panels, 0.0, 1.0);
        (p_rule, q_rule)
    }

    /// `∫ f Ψ_{ℓ′} conj(Ψ_ℓ) w · 4π dp dq` at one node count.
    fn weighted_integral<F>(&self, nodes: usize, f: F) -> Result<DMatrix<Complex64>>
    where
        F: Fn(Point) -> f64 + Sync,
    {
        let (p_rule, q_rule) = self.rules(nodes);
        let dim = self.dim();
        let rows: Result<Vec<DMatrix<Complex64>>> = q_rule
            .nodes
            .par_iter()
            .zip(q_rule.weights.par_iter())
            .map(|(&q, &wq)| {
                let mut b = DMatrix::<Complex64>::zeros(p_rule.len(), dim);
                let mut fb = DMatrix::<Complex64>::zeros(p_rule.len(), dim);
                for (i, (&p, &wp)) in p_rule.nodes.iter().zip(&p_rule.weights).enumerate() {
                    let x = [p, q];
                    let scale = (4.0 * PI * wp * wq).sqrt();
                    let fx = f(x);
                    for (l, v) in self.weighted_row(x)?.into_iter().enumerate() {
                        b[(i, l)] = v * scale;
                        fb[(i, l)] = v * (scale * fx);
                    }
                }
                Ok(b.adjoint() * fb)
            })
            .collect();
        Ok(rows?
            .into_iter()
            .fold(DMatrix::zeros(dim, dim), |acc, m| acc + m))
    }

    /// The integral at the base and doubled node counts; the doubled result
    /// is returned when the two agree to [`RESOLUTION_TOL`].
    fn resolved_integral<F>(&self, f: F) -> Result<DMatrix<Complex64>>
    where
        F: Fn(Point) -> f64 + Sync,
    {
        let n = self.quad_order();
        let coarse = self.weighted_integral(n, &f)?;
        let fine = self.weighted_integral(2 * n, &f)?;
        let change = linalg::max_abs(&(&fine - &coarse));
        if !(change <= RESOLUTION_TOL) {
            return Err(Error::Resolution {
                change,
                tolerance: RESOLUTION_TOL,
            });
        }
        Ok(fine)
    }

    /// `G_{ℓℓ′} = ⟨Ψ_{ℓ′}, Ψ_ℓ⟩` under the metric weight and `4π dp dq`.
    pub fn gram_matrix(&self) -> Result<DMatrix<Complex64>> {
        self.resolved_integral(|_| 1.0)
    }

    fn gram_defect_single(&self) -> Result<f64> {
        let g = self.weighted_integral(self.quad_order(), |_| 1.0)?;
        let dim = self.dim();
        Ok(linalg::max_abs(&(g - DMatrix::<Complex64>::identity(dim, dim))))
    }

    /// `‖G − I‖∞`.
    pub fn gram_defect(&self) -> Result<f64> {
        let dim = self.dim();
        Ok(linalg::max_abs(
            &(self.gram_matrix()? - DMatrix::<Complex64>::identity(dim, dim)),
        ))
    }
}

fn validate_level(k: u32) -> Result<()> {
    if k == 0 || k > MAX_LEVEL {
        return Err(Error::Validation(format!(
            "level k must lie in 1..={MAX_LEVEL}, got {k}"
        )));
    }
    Ok(())
}

/// A Hermitian `2k × 2k` matrix in the theta basis with its eigendecomposition
/// and the symbols of the operator family it represents.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    k: u32,
    matrix: DMatrix<Complex64>,
    eigen: HermitianEigen,
    symbol: SymbolField,
    diagonal: bool,
}

/// Tolerance on the eigenpair residual of a built operator.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-9;

impl HermitianOperator {
    /// Symmetrizes `matrix` and diagonalizes it.
    pub fn from_matrix(k: u32, matrix: DMatrix<Complex64>, symbol: SymbolField) -> Result<Self> {
        if matrix.nrows() != 2 * k as usize || matrix.ncols() != 2 * k as usize {
            return Err(Error::Validation(format!(
                "operator at level {k} must be {0}x{0}",
                2 * k
            )));
        }
        let matrix = (&matrix + matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let eigen = linalg::hermitian_eigen(&matrix)?;
        let residual = eigen.max_residual(&matrix);
        if !(residual <= EIGEN_RESIDUAL_TOL * (1.0 + linalg::max_abs(&matrix))) {
            return Err(Error::Numerical(format!(
                "eigenpair residual {residual:e} above tolerance"
            )));
        }
        Ok(Self {
            k,
            matrix,
            eigen,
            symbol,
            diagonal: false,
        })
    }

    /// `diag(values)` with the standard basis as eigenvectors.
    pub fn diagonal(k: u32, values: Vec<f64>, symbol: SymbolField) -> Result<Self> {
        let dim = 2 * k as usize;
        if values.len() != dim {
            return Err(Error::Validation(format!(
                "expected {dim} diagonal entries, got {}",
                values.len()
            )));
        }
        let matrix = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            dim,
            values.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        Ok(Self {
            k,
            matrix,
            eigen: HermitianEigen {
                values,
                vectors: DMatrix::identity(dim, dim),
            },
            symbol,
            diagonal: true,
        })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn eigen(&self) -> &HermitianEigen {
        &self.eigen
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigen.values
    }

    /// The principal and subprincipal symbols of the family.
    pub fn symbol(&self) -> &SymbolField {
        &self.symbol
    }

    /// Whether the eigenvectors are the standard basis.
    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// `T + (c/k)·I`; the subprincipal symbol gains the constant `c`.
    pub fn shifted(&self, c: f64) -> Self {
        let shift = c / f64::from(self.k);
        let dim = self.dim();
        let matrix = &self.matrix + DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(shift, 0.0);
        let base_sub = self.symbol.clone();
        let symbol = match base_sub.constant_subprincipal() {
            Some(c0) => base_sub.with_constant_subprincipal(c0 + c),
            None => {
                let inner = self.symbol.clone();
                base_sub.with_subprincipal(move |t, p, q| inner.h_sub(t, [p, q]) + c)
            }
        };
        Self {
            k: self.k,
            matrix,
            eigen: HermitianEigen {
                values: self.eigen.values.iter().map(|v| v + shift).collect(),
                vectors: self.eigen.vectors.clone(),
            },
            symbol,
            diagonal: self.diagonal,
        }
    }
}

/// The diagonal operator `Ψ_ℓ ↦ cos(πℓ/k) Ψ_ℓ`, with principal symbol
/// `cos(2πq)` and vanishing subprincipal symbol.
pub fn model_operator(qs: &QuantumSpace) -> HermitianOperator {
    let kf = f64::from(qs.k());
    let values = (0..qs.dim()).map(|l| (PI * l as f64 / kf).cos()).collect();
    HermitianOperator::diagonal(qs.k(), values, SymbolField::model_cos())
        .expect("dimension matches by construction")
}

/// `(f_pp + f_qq)/(16π)`: the subprincipal symbol of `T_k(f)` with the
/// normalization `ω = 4π dp∧dq`.
pub fn toeplitz_subprincipal(f: &SymbolField, t: f64, x: Point) -> f64 {
    let h = f.hess(t, x);
    (h[0][0] + h[1][1]) / (16.0 * PI)
}

/// `⟨T_k(f)Ψ_{ℓ′}, Ψ_ℓ⟩ = ∫ f Ψ_{ℓ′} conj(Ψ_ℓ) w · 4π dp dq` for the symbol
/// frozen at time `t`.
pub fn toeplitz_matrix(qs: &QuantumSpace, f: &SymbolField, t: f64) -> Result<DMatrix<Complex64>> {
    qs.resolved_integral(|x| f.h(t, x))
}

/// `T_k(f)` at time `t` as a diagonalized operator. Its recorded symbol is
/// `f` with the subprincipal symbol of the Toeplitz quantization.
pub fn toeplitz_build(qs: &QuantumSpace, f: &SymbolField, t: f64) -> Result<HermitianOperator> {
    let matrix = toeplitz_matrix(qs, f, t)?;
    let inner = f.clone();
    let symbol = f
        .clone()
        .with_subprincipal(move |t, p, q| toeplitz_subprincipal(&inner, t, [p, q]));
    HermitianOperator::from_matrix(qs.k(), matrix, symbol)
}

/// Weighted basis rows cached at the quadrature nodes, for building
/// `T_k(H_t)` at many times. Resolution is verified once, at construction.
pub struct ToeplitzQuantizer<'a> {
    qs: &'a QuantumSpace,
    nodes: Vec<Point>,
    /// Row `i` holds `√(4π w_i)` times the weighted basis values at node `i`.
    rows: DMatrix<Complex64>,
}

impl<'a> ToeplitzQuantizer<'a> {
    /// Checks that `T_k(f_{t0})` is resolved at the base node count.
    pub fn new(qs: &'a QuantumSpace, f: &SymbolField, t0: f64) -> Result<Self> {
        toeplitz_matrix(qs, f, t0)?;
        let (p_rule, q_rule) = qs.rules(qs.quad_order());
        let mut nodes = Vec::with_capacity(p_rule.len() * q_rule.len());
        let mut weights = Vec::with_capacity(nodes.capacity());
        for (&q, &wq) in q_rule.nodes.iter().zip(&q_rule.weights) {
            for (&p, &wp) in p_rule.nodes.iter().zip(&p_rule.weights) {
                nodes.push([p, q]);
                weights.push((4.0 * PI * wp * wq).sqrt());
            }
        }
        let row_values: Result<Vec<Vec<Complex64>>> = nodes
            .par_iter()
            .zip(weights.par_iter())
            .map(|(&x, &w)| Ok(qs.weighted_row(x)?.into_iter().map(|v| v * w).collect()))
            .collect();
        let row_values = row_values?;
        let rows = DMatrix::from_fn(nodes.len(), qs.dim(), |i, l| row_values[i][l]);
        Ok(Self { qs, nodes, rows })
    }

    pub fn matrix(&self, f: &SymbolField, t: f64) -> DMatrix<Complex64> {
        let values: Vec<f64> = self.nodes.par_iter().map(|&x| f.h(t, x)).collect();
        let dim = self.qs.dim();
        let n = self.nodes.len();
        let data = self.rows.as_slice();
        // column-major storage: column l is data[l n .. (l + 1) n]
        let entries: Vec<(usize, usize, Complex64)> = (0..dim)
            .into_par_iter()
            .flat_map_iter(|l| {
                let weighted: Vec<Complex64> = data[l * n..(l + 1) * n]
                    .iter()
                    .zip(&values)
                    .map(|(x, v)| x.conj() * *v)
                    .collect();
                (l..dim).map(move |m| {
                    let b = &data[m * n..(m + 1) * n];
                    let (mut re, mut im) = (0.0, 0.0);
                    for (x, y) in weighted.iter().zip(b) {
                        re += x.re * y.re - x.im * y.im;
                        im += x.re * y.im + x.im * y.re;
                    }
                    (l, m, Complex64::new(re, im))
                })
            })
            .collect();
        let mut out = DMatrix::<Complex64>::zeros(dim, dim);
        for (l, m, z) in entries {
            out[(l, m)] = z;
            out[(m, l)] = z.conj();
        }
        out
    }

    pub fn build(&self, f: &SymbolField, t: f64) -> Result<HermitianOperator> {
        let inner = f.clone();
        let symbol = f
            .clone()
            .with_subprincipal(move |t, p, q| toeplitz_subprincipal(&inner, t, [p, q]));
        HermitianOperator::from_matrix(self.qs.k(), self.matrix(f, t), symbol)
    }
}
