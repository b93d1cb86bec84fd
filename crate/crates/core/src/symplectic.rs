//! Linear symplectic maps between complex-structured symplectic spaces.
//!
//! Vectors of `ℝ²ⁿ` are written in a symplectic basis `(x₁…xₙ, y₁…yₙ)` with
//! `ω(u, v) = uᵀ J v`, `J = [[0, I], [−I, 0]]`. The standard complex structure
//! sends `∂x` to `∂y`, and the complex coordinate is `w = x + i y`.
//!
//! The central quantity is the holomorphic determinant `det_ℂ g¹'⁰` of the
//! (1,0)→(1,0) block of `g ⊗ ℂ`. It is computed two ways: directly from the
//! block, and from the polar decomposition `g = g₁ g₂` through
//! `det_ℂ g¹'⁰ = ∏ (λᵢ + λᵢ⁻¹)/2 · det_ℂ g₁`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg;

/// Tolerance for structural identities (`gᵀJg = J`, `j² = −I`, …), relative
/// to the squared size of the matrices involved.
pub const STRUCTURE_TOL: f64 = 1e-10;

/// Tolerance for phase identities.
pub const PHASE_TOL: f64 = 1e-12;

/// A symplectic map `g: (S, j) → (S′, j′)` in symplectic bases.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSymplectomorphism {
    n: usize,
    matrix: DMatrix<f64>,
    source_cs: DMatrix<f64>,
    target_cs: DMatrix<f64>,
}

impl LinearSymplectomorphism {
    pub fn new(
        matrix: DMatrix<f64>,
        source_cs: DMatrix<f64>,
        target_cs: DMatrix<f64>,
    ) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || dim % 2 != 0 || matrix.ncols() != dim {
            return Err(Error::Validation(format!(
                "expected a square matrix of even size, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        for cs in [&source_cs, &target_cs] {
            if cs.nrows() != dim || cs.ncols() != dim {
                return Err(Error::Validation(
                    "complex structure has the wrong size".into(),
                ));
            }
        }
        let n = dim / 2;
        let omega = standard_symplectic(n);
        let scale = 1.0 + linalg::max_abs_real(&matrix).powi(2);
        let defect = linalg::max_abs_real(&(matrix.transpose() * &omega * &matrix - &omega));
        if !defect.is_finite() || defect > STRUCTURE_TOL * scale {
            return Err(Error::Validation(format!(
                "matrix is not symplectic: ‖gᵀJg − J‖ = {defect:e}"
            )));
        }
        validate_complex_structure(&source_cs)?;
        validate_complex_structure(&target_cs)?;
        Ok(Self {
            n,
            matrix,
            source_cs,
            target_cs,
        })
    }

    /// `g` between copies of `ℝ²ⁿ` with the standard complex structure.
    pub fn standard(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows() / 2;
        let j = standard_complex_structure(n);
        Self::new(matrix, j.clone(), j)
    }

    pub fn identity(n: usize) -> Self {
        let j = standard_complex_structure(n);
        Self {
            n,
            matrix: DMatrix::identity(2 * n, 2 * n),
            source_cs: j.clone(),
            target_cs: j,
        }
    }

    pub fn dim_n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn source_cs(&self) -> &DMatrix<f64> {
        &self.source_cs
    }

    pub fn target_cs(&self) -> &DMatrix<f64> {
        &self.target_cs
    }

    /// `‖g j − j′ g‖∞`.
    pub fn complex_linearity_defect(&self) -> f64 {
        linalg::max_abs_real(&(&self.matrix * &self.source_cs - &self.target_cs * &self.matrix))
    }

    pub fn compose(&self, inner: &Self) -> Result<Self> {
        Self::new(
            &self.matrix * &inner.matrix,
            inner.source_cs.clone(),
            self.target_cs.clone(),
        )
    }
}

/// `J = [[0, I], [−I, 0]]`.
pub fn standard_symplectic(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// The standard complex structure `∂x ↦ ∂y`, i.e. `[[0, −I], [I, 0]]`.
pub fn standard_complex_structure(n: usize) -> DMatrix<f64> {
    -standard_symplectic(n)
}

fn validate_complex_structure(cs: &DMatrix<f64>) -> Result<()> {
    let dim = cs.nrows();
    let n = dim / 2;
    let omega = standard_symplectic(n);
    let id = DMatrix::<f64>::identity(dim, dim);
    let scale = 1.0 + linalg::max_abs_real(cs).powi(2);
    let square = linalg::max_abs_real(&(cs * cs + &id));
    if !(square <= STRUCTURE_TOL * scale) {
        return Err(Error::Validation(format!(
            "complex structure does not square to −I (defect {square:e})"
        )));
    }
    let compat = linalg::max_abs_real(&(cs.transpose() * &omega * cs - &omega));
    if !(compat <= STRUCTURE_TOL * scale) {
        return Err(Error::Validation(format!(
            "complex structure is not ω-compatible (defect {compat:e})"
        )));
    }
    let metric = &omega * cs;
    if metric.clone().cholesky().is_none() {
        return Err(Error::Validation(
            "ω(·, j·) is not positive definite".into(),
        ));
    }
    Ok(())
}

/// A symplectic basis `P = [f₁…fₙ, jf₁…jfₙ]` with `jP = P j_std`, obtained by
/// Gram–Schmidt for the metric `ω(·, j·)`.
fn unitary_frame(cs: &DMatrix<f64>) -> DMatrix<f64> {
    let dim = cs.nrows();
    let n = dim / 2;
    let metric = standard_symplectic(n) * cs;
    let inner = |u: &DVector<f64>, v: &DVector<f64>| u.dot(&(&metric * v));
    let mut frame: Vec<DVector<f64>> = Vec::with_capacity(n);
    for c in 0..dim {
        if frame.len() == n {
            break;
        }
        let mut v = DVector::<f64>::zeros(dim);
        v[c] = 1.0;
        for f in &frame {
            let jf = cs * f;
            let a = inner(&v, f);
            let b = inner(&v, &jf);
            v -= f * a + jf * b;
        }
        let norm = inner(&v, &v).sqrt();
        if norm > 1e-8 {
            frame.push(v / norm);
        }
    }
    let mut p = DMatrix::zeros(dim, dim);
    for (a, f) in frame.iter().enumerate() {
        p.set_column(a, f);
        p.set_column(n + a, &(cs * f));
    }
    p
}

fn symplectic_inverse(p: &DMatrix<f64>) -> DMatrix<f64> {
    let j = standard_symplectic(p.nrows() / 2);
    -(&j * p.transpose() * &j)
}

/// `g` expressed between standard spaces: `P′⁻¹ g P`.
fn in_unitary_frames(g: &LinearSymplectomorphism) -> DMatrix<f64> {
    let std = standard_complex_structure(g.n);
    let src = if g.source_cs == std {
        DMatrix::identity(2 * g.n, 2 * g.n)
    } else {
        unitary_frame(&g.source_cs)
    };
    let dst = if g.target_cs == std {
        DMatrix::identity(2 * g.n, 2 * g.n)
    } else {
        unitary_frame(&g.target_cs)
    };
    symplectic_inverse(&dst) * g.matrix() * src
}

/// `((A + D) + i(C − B))/2` for `g = [[A, B], [C, D]]` between standard spaces.
fn standard_block(m: &DMatrix<f64>, n: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |r, c| {
        let a = m[(r, c)];
        let b = m[(r, n + c)];
        let cc = m[(n + r, c)];
        let d = m[(n + r, n + c)];
        Complex64::new((a + d) / 2.0, (cc - b) / 2.0)
    })
}

/// The (1,0)→(1,0) block of `g ⊗ ℂ` in unitary frames of the source and
/// target complex structures.
pub fn holomorphic_block(g: &LinearSymplectomorphism) -> DMatrix<Complex64> {
    standard_block(&in_unitary_frames(g), g.n)
}

/// `det_ℂ g¹'⁰`. The induced map on canonical lines is its reciprocal.
pub fn holomorphic_determinant(g: &LinearSymplectomorphism) -> Result<Complex64> {
    let det = holomorphic_block(g).determinant();
    if !(det.norm() >= 0.5) {
        return Err(Error::Numerical(format!(
            "holomorphic determinant has modulus {:e} < 1; input is not a valid symplectic map",
            det.norm()
        )));
    }
    Ok(det)
}

/// `g = g₁ g₂` with `g₁` complex-linear and `g₂` positive for `ω(·, j·)`.
#[derive(Debug, Clone)]
pub struct PolarDecomposition {
    pub unitary: LinearSymplectomorphism,
    pub positive: LinearSymplectomorphism,
    /// All `2n` eigenvalues of `g₂`, ascending; they pair as `(λ, 1/λ)`.
    pub stretch: Vec<f64>,
    /// `det_ℂ g₁`, from the complex representation `A + iC` of `g₁`.
    pub unitary_det: Complex64,
}

pub fn polar_decompose(g: &LinearSymplectomorphism) -> Result<PolarDecomposition> {
    if g.source_cs != g.target_cs {
        return Err(Error::Validation(
            "polar decomposition needs equal source and target complex structures".into(),
        ));
    }
    let n = g.n;
    let frame = if g.source_cs == standard_complex_structure(n) {
        DMatrix::identity(2 * n, 2 * n)
    } else {
        unitary_frame(&g.source_cs)
    };
    let frame_inv = symplectic_inverse(&frame);
    let gt = &frame_inv * g.matrix() * &frame;

    // gᵀ M g with M = ω(·, j·) = I in the unitary frame.
    let (mu, v) = linalg::symmetric_eigen(&(gt.transpose() * &gt))?;
    if mu.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Numerical(
            "gᵀg is not positive definite".into(),
        ));
    }
    let sqrt_mu: Vec<f64> = mu.iter().map(|m| m.sqrt()).collect();
    let g2 = &v * DMatrix::from_diagonal(&DVector::from_vec(sqrt_mu.clone())) * v.transpose();
    let g2_inv = &v
        * DMatrix::from_diagonal(&DVector::from_iterator(
            2 * n,
            sqrt_mu.iter().map(|s| 1.0 / s),
        ))
        * v.transpose();
    let g1 = &gt * g2_inv;

    let unitary_det = DMatrix::from_fn(n, n, |r, c| {
        Complex64::new(g1[(r, c)], g1[(n + r, c)])
    })
    .determinant();

    let cs = g.source_cs.clone();
    let back = |m: &DMatrix<f64>| &frame * m * &frame_inv;
    Ok(PolarDecomposition {
        unitary: LinearSymplectomorphism::new(back(&g1), cs.clone(), cs.clone())?,
        positive: LinearSymplectomorphism::new(back(&g2), cs.clone(), cs)?,
        stretch: sqrt_mu,
        unitary_det,
    })
}

/// `∏ᵢ (λᵢ + λᵢ⁻¹)/2 · det_ℂ g₁` over the `n` eigenvalues `λᵢ ≤ 1` of `g₂`.
pub fn polar_determinant(g: &LinearSymplectomorphism) -> Result<Complex64> {
    let polar = polar_decompose(g)?;
    let stretch_factor: f64 = polar.stretch[..g.n]
        .iter()
        .map(|&l| (l + 1.0 / l) / 2.0)
        .product();
    Ok(polar.unitary_det * stretch_factor)
}

/// Ratio `c` with `c · Ω(ξ_g u) = Ω(ξ_id u)` where `ξ_g(v) = (g v, v)` and
/// `Ω = p₁*(dz₁∧…∧dzₙ) ∧ p₂*(dz̄₁∧…∧dz̄ₙ)` on `ℝ²ⁿ ⊕ ℝ²ⁿ`.
///
/// Evaluated as a ratio of two `2n × 2n` complex determinants; equals
/// `1 / det_ℂ g¹'⁰` without forming the (1,0)-block. Standard structures only.
pub fn canonical_pairing_ratio(g: &LinearSymplectomorphism) -> Result<Complex64> {
    let n = g.n;
    let std = standard_complex_structure(n);
    if g.source_cs != std || g.target_cs != std {
        return Err(Error::Validation(
            "pairing route is implemented for the standard complex structure".into(),
        ));
    }
    let i = Complex64::new(0.0, 1.0);
    let dz = DMatrix::from_fn(n, 2 * n, |r, c| {
        if c == r {
            Complex64::new(1.0, 0.0)
        } else if c == n + r {
            i
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let dzbar = dz.map(|z| z.conj());
    let gc = g.matrix.map(|x| Complex64::new(x, 0.0));
    let pairing = |top: DMatrix<Complex64>| {
        let mut m = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
        m.view_mut((0, 0), (n, 2 * n)).copy_from(&top);
        m.view_mut((n, 0), (n, 2 * n)).copy_from(&dzbar);
        m.determinant()
    };
    let at_identity = pairing(dz.clone());
    let at_g = pairing(&dz * gc);
    if at_g.norm() == 0.0 {
        return Err(Error::Numerical("degenerate pairing".into()));
    }
    Ok(at_identity / at_g)
}

/// Factors of the level-set lift to the canonical bundle for a symplectic
/// linearization `g` that maps the Hamiltonian field `X_x` to `X_y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelSetFactors {
    /// `2‖X_x‖⁻²` times the ratio of canonical frames normalized on `X`.
    pub frame: Complex64,
    /// Reciprocal holomorphic determinant of the map induced on the
    /// symplectic complement of `span(X, jX)`.
    pub reduced: Complex64,
}

impl LevelSetFactors {
    pub fn value(&self) -> Complex64 {
        self.frame * self.reduced
    }
}

fn to_complex_coords(v: &DVector<f64>, n: usize) -> DVector<Complex64> {
    DVector::from_fn(n, |a, _| Complex64::new(v[a], v[n + a]))
}

fn from_complex_coords(w: &DVector<Complex64>) -> DVector<f64> {
    let n = w.len();
    DVector::from_fn(2 * n, |r, _| if r < n { w[r].re } else { w[r - n].im })
}

/// Unitary basis of the Hermitian complement of `xi` in `ℂⁿ`, by Gram–Schmidt
/// on the standard basis.
fn complement_basis(xi: &DVector<Complex64>) -> Vec<DVector<Complex64>> {
    let n = xi.len();
    let mut basis = vec![xi.clone() / Complex64::new(xi.norm(), 0.0)];
    for c in 0..n {
        if basis.len() == n {
            break;
        }
        let mut v = DVector::<Complex64>::zeros(n);
        v[c] = Complex64::new(1.0, 0.0);
        for b in &basis {
            let proj = b.dotc(&v);
            v -= b * proj;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / Complex64::new(norm, 0.0));
        }
    }
    basis.remove(0);
    basis
}

/// Level-set lift `Φ_F ⊗ Φ_G` expressed against the global frame
/// `dz₁∧…∧dzₙ`, for standard `j` and `ω = omega_scale · J`.
pub fn level_set_factors(
    g: &LinearSymplectomorphism,
    field_source: &DVector<f64>,
    field_target: &DVector<f64>,
    omega_scale: f64,
) -> Result<LevelSetFactors> {
    let n = g.n;
    let std = standard_complex_structure(n);
    if g.source_cs != std || g.target_cs != std {
        return Err(Error::Validation(
            "level-set lift is implemented for the standard complex structure".into(),
        ));
    }
    let xi_x = to_complex_coords(field_source, n);
    let xi_y = to_complex_coords(field_target, n);
    let norm_sq = omega_scale * xi_x.norm_squared();
    if !(xi_x.norm() > 0.0 && xi_y.norm() > 0.0) {
        return Err(Error::Degenerate("vanishing Hamiltonian field".into()));
    }

    let gx = complement_basis(&xi_x);
    let gy = complement_basis(&xi_y);
    let det_with = |xi: &DVector<Complex64>, rest: &[DVector<Complex64>]| {
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        m.set_column(0, xi);
        for (a, v) in rest.iter().enumerate() {
            m.set_column(a + 1, v);
        }
        m.determinant()
    };
    let frame_x = det_with(&xi_x, &gx);
    let frame_y = det_with(&xi_y, &gy);

    // ψ(v) = g v − c X_y, the class of g v modulo ℝ X_y represented in G_y.
    let omega = standard_symplectic(n);
    let jx_y = &std * field_target;
    let x_norm_y = field_target.dot(&(&omega * &jx_y));
    let psi = |v: &DVector<f64>| -> DVector<Complex64> {
        let gv = g.matrix() * v;
        let c = gv.dot(&(&omega * &jx_y)) / x_norm_y;
        let w = to_complex_coords(&(gv - field_target * c), n);
        DVector::from_iterator(gy.len(), gy.iter().map(|f| f.dotc(&w)))
    };
    let m = n - 1;
    let mut block = DMatrix::<Complex64>::zeros(m, m);
    let i = Complex64::new(0.0, 1.0);
    for (a, u) in gx.iter().enumerate() {
        let real_u = from_complex_coords(u);
        let real_ju = from_complex_coords(&(u * i));
        let c1 = psi(&real_u);
        let c2 = psi(&real_ju);
        block.set_column(a, &((c1 - c2 * i) * Complex64::new(0.5, 0.0)));
    }
    let reduced_det = if m == 0 {
        Complex64::new(1.0, 0.0)
    } else {
        block.determinant()
    };
    if !(reduced_det.norm() >= 0.5) {
        return Err(Error::Numerical(format!(
            "reduced holomorphic determinant has modulus {:e}",
            reduced_det.norm()
        )));
    }
    Ok(LevelSetFactors {
        frame: frame_x / frame_y * (2.0 / norm_sq),
        reduced: Complex64::new(1.0, 0.0) / reduced_det,
    })
}

/// `B = ‖X₁‖² + i ω(X₁, X₂)` for the splitting `X = X₁ + X₂` with
/// `X₁ ∈ j(T)`, `X₂ ∈ T`, where the columns of `tangent` span the Lagrangian
/// subspace `T`.
pub fn lagrangian_b_coefficient(
    omega: &DMatrix<f64>,
    cs: &DMatrix<f64>,
    field: &DVector<f64>,
    tangent: &DMatrix<f64>,
) -> Result<Complex64> {
    let dim = omega.nrows();
    let n = tangent.ncols();
    if tangent.nrows() != dim || 2 * n != dim {
        return Err(Error::Validation(
            "tangent frame must have 2n rows and n columns".into(),
        ));
    }
    let jt = cs * tangent;
    let mut system = DMatrix::<f64>::zeros(dim, dim);
    system.view_mut((0, 0), (dim, n)).copy_from(&jt);
    system.view_mut((0, n), (dim, n)).copy_from(tangent);
    let coeffs = system
        .lu()
        .solve(field)
        .ok_or_else(|| Error::Degenerate("tangent space is not totally real".into()))?;
    let x1 = &jt * coeffs.rows(0, n);
    let x2 = tangent * coeffs.rows(n, n);
    if x1.norm() <= 1e-10 * field.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate(
            "Hamiltonian field is tangent to the Lagrangian".into(),
        ));
    }
    let norm_sq = x1.dot(&(omega * cs * &x1));
    let cross = x1.dot(&(omega * &x2));
    Ok(Complex64::new(norm_sq, cross))
}

/// A square root sample with its continuously tracked argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchedPhase {
    pub value: Complex64,
    pub branch_angle: f64,
}

impl BranchedPhase {
    pub fn from_polar(modulus: f64, angle: f64) -> Self {
        Self {
            value: Complex64::from_polar(modulus, angle),
            branch_angle: angle,
        }
    }

    pub fn modulus(&self) -> f64 {
        self.value.norm()
    }

    pub fn squared(&self) -> Complex64 {
        self.value * self.value
    }
}

/// Square roots along a path, continued from the root with argument in
/// `(−π/4, π/4)` at the first sample.
pub fn branch_sqrt_path(values: &[Complex64]) -> Result<Vec<BranchedPhase>> {
    let Some(first) = values.first() else {
        return Ok(Vec::new());
    };
    if !(first.re > 0.0) {
        return Err(Error::Validation(format!(
            "path must start in the right half-plane, got {first}"
        )));
    }
    let mut out = Vec::with_capacity(values.len());
    let mut angle = first.arg();
    out.push(BranchedPhase::from_polar(first.norm().sqrt(), angle / 2.0));
    for (index, pair) in values.windows(2).enumerate() {
        let (prev, next) = (pair[0], pair[1]);
        if !(next.norm() > 0.0) || !next.re.is_finite() || !next.im.is_finite() {
            return Err(Error::Numerical(format!(
                "path vanishes or is not finite at sample {}",
                index + 1
            )));
        }
        let jump = (next / prev).arg();
        if jump.abs() >= FRAC_PI_2 {
            return Err(Error::GridTooCoarse {
                index: index + 1,
                jump,
                limit: FRAC_PI_2,
            });
        }
        angle += jump;
        out.push(BranchedPhase::from_polar(next.norm().sqrt(), angle / 2.0));
    }
    debug_assert!(out
        .windows(2)
        .all(|w| (w[1].branch_angle - w[0].branch_angle).abs() < FRAC_PI_4));
    Ok(out)
}

fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// A random symplectic matrix: a product of symmetric shears in both
/// directions, a diagonal stretch and a unitary rotation.
pub fn random_symplectic<R: Rng + ?Sized>(n: usize, rng: &mut R, spread: f64) -> DMatrix<f64> {
    let dim = 2 * n;
    let sym = |rng: &mut R| {
        let a = DMatrix::from_fn(n, n, |_, _| spread * standard_normal(rng));
        (&a + a.transpose()) * 0.5
    };
    let upper = |s: DMatrix<f64>| {
        let mut m = DMatrix::<f64>::identity(dim, dim);
        m.view_mut((0, n), (n, n)).copy_from(&s);
        m
    };
    let lower = |s: DMatrix<f64>| {
        let mut m = DMatrix::<f64>::identity(dim, dim);
        m.view_mut((n, 0), (n, n)).copy_from(&s);
        m
    };
    let mut stretch = DMatrix::<f64>::identity(dim, dim);
    for i in 0..n {
        let l = (spread * standard_normal(rng)).exp();
        stretch[(i, i)] = l;
        stretch[(n + i, n + i)] = 1.0 / l;
    }
    // exp of a skew-Hermitian generator A + iB gives a unitary [[X, −Y], [Y, X]].
    let skew = DMatrix::from_fn(n, n, |_, _| standard_normal(rng));
    let herm = DMatrix::from_fn(n, n, |_, _| standard_normal(rng));
    let gen = DMatrix::from_fn(n, n, |r, c| {
        Complex64::new(
            skew[(r, c)] - skew[(c, r)],
            herm[(r, c)] + herm[(c, r)],
        ) * 0.5
    });
    let unitary = gen.exp();
    let mut rot = DMatrix::<f64>::zeros(dim, dim);
    for r in 0..n {
        for c in 0..n {
            let z = unitary[(r, c)];
            rot[(r, c)] = z.re;
            rot[(r, n + c)] = -z.im;
            rot[(n + r, c)] = z.im;
            rot[(n + r, n + c)] = z.re;
        }
    }
    let s1 = sym(rng);
    let s2 = sym(rng);
    upper(s1) * lower(s2) * stretch * rot
}

/// The complex structure `P j_std P⁻¹` for a symplectic `P`.
pub fn conjugated_structure(p: &DMatrix<f64>) -> DMatrix<f64> {
    let n = p.nrows() / 2;
    p * standard_complex_structure(n) * symplectic_inverse(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn m2(a: f64, b: f64, c: f64, d: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[a, b, c, d])
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn identity_block_and_determinant() {
        let g = LinearSymplectomorphism::identity(1);
        assert_eq!(holomorphic_block(&g)[(0, 0)], Complex64::new(1.0, 0.0));
        assert!(close(holomorphic_determinant(&g).unwrap(), Complex64::new(1.0, 0.0), 1e-15));
        assert!(close(polar_determinant(&g).unwrap(), Complex64::new(1.0, 0.0), 1e-14));
    }

    #[test]
    fn shear_block_matches_closed_form() {
        for (t, q) in [(0.3, 0.1), (1.0, 0.7), (2.5, 0.05)] {
            let s = PI * t * (2.0 * PI * q).cos();
            let g = LinearSymplectomorphism::standard(m2(1.0, s, 0.0, 1.0)).unwrap();
            let expected = Complex64::new(1.0, -PI * t / 2.0 * (2.0 * PI * q).cos());
            assert!(close(holomorphic_block(&g)[(0, 0)], expected, 1e-15));
            assert!(close(holomorphic_determinant(&g).unwrap(), expected, 1e-15));
            assert!(close(polar_determinant(&g).unwrap(), expected, 1e-12));
        }
    }

    #[test]
    fn diagonal_stretch() {
        let g = LinearSymplectomorphism::standard(m2(2.0, 0.0, 0.0, 0.5)).unwrap();
        assert!(close(holomorphic_determinant(&g).unwrap(), Complex64::new(1.25, 0.0), 1e-15));
        let polar = polar_decompose(&g).unwrap();
        assert!(linalg::max_abs_real(&(polar.unitary.matrix() - DMatrix::identity(2, 2))) < 1e-12);
        assert!(linalg::max_abs_real(&(polar.positive.matrix() - m2(2.0, 0.0, 0.0, 0.5))) < 1e-12);
        assert!((polar.stretch[0] - 0.5).abs() < 1e-14);
        assert!(close(polar_determinant(&g).unwrap(), Complex64::new(1.25, 0.0), 1e-14));
    }

    #[test]
    fn rotation_is_its_own_unitary_factor() {
        let th: f64 = 0.7;
        let g = LinearSymplectomorphism::standard(m2(th.cos(), -th.sin(), th.sin(), th.cos()))
            .unwrap();
        let polar = polar_decompose(&g).unwrap();
        assert!(linalg::max_abs_real(&(polar.unitary.matrix() - g.matrix())) < 1e-12);
        assert!(linalg::max_abs_real(&(polar.positive.matrix() - DMatrix::identity(2, 2))) < 1e-12);
        let det = holomorphic_determinant(&g).unwrap();
        assert!(close(det, Complex64::from_polar(1.0, th), 1e-14));
    }

    #[test]
    fn rejects_non_symplectic_and_bad_structures() {
        assert!(LinearSymplectomorphism::standard(m2(2.0, 0.0, 0.0, 2.0)).is_err());
        let bad_cs = m2(0.0, -2.0, 1.0, 0.0);
        assert!(LinearSymplectomorphism::new(DMatrix::identity(2, 2), bad_cs.clone(), bad_cs).is_err());
        // j with ω(u, ju) < 0
        let neg = m2(0.0, 1.0, -1.0, 0.0);
        assert!(LinearSymplectomorphism::new(DMatrix::identity(2, 2), neg.clone(), neg).is_err());
        assert!(LinearSymplectomorphism::standard(DMatrix::identity(3, 3)).is_err());
    }

    #[test]
    fn polar_route_matches_block_route_for_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 1..=3 {
            for _ in 0..50 {
                let g = LinearSymplectomorphism::standard(random_symplectic(n, &mut rng, 0.6))
                    .unwrap();
                let direct = holomorphic_determinant(&g).unwrap();
                let polar = polar_determinant(&g).unwrap();
                assert!(close(direct, polar, 1e-9 * (1.0 + direct.norm())), "n={n}");
                assert!(direct.norm() >= 1.0 - 1e-12);
                let pairing = canonical_pairing_ratio(&g).unwrap();
                assert!(close(pairing * direct, Complex64::new(1.0, 0.0), 1e-10));
            }
        }
    }

    #[test]
    fn polar_factors_have_the_claimed_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=3 {
            let g = LinearSymplectomorphism::standard(random_symplectic(n, &mut rng, 0.5)).unwrap();
            let polar = polar_decompose(&g).unwrap();
            let rebuilt = polar.unitary.matrix() * polar.positive.matrix();
            assert!(linalg::max_abs_real(&(rebuilt - g.matrix())) < 1e-10);
            assert!(polar.unitary.complex_linearity_defect() < 1e-10);
            let g2 = polar.positive.matrix();
            assert!(linalg::max_abs_real(&(g2 - g2.transpose())) < 1e-10);
            let s = &polar.stretch;
            for i in 0..n {
                assert!((s[i] * s[2 * n - 1 - i] - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn nonstandard_structures_reduce_to_standard_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=2 {
            let p = random_symplectic(n, &mut rng, 0.4);
            let q = random_symplectic(n, &mut rng, 0.4);
            let h = random_symplectic(n, &mut rng, 0.4);
            // g = Q h P⁻¹ between (P j P⁻¹) and (Q j Q⁻¹) is conjugate to h.
            let g = &q * &h * symplectic_inverse(&p);
            let g = LinearSymplectomorphism::new(g, conjugated_structure(&p), conjugated_structure(&q))
                .unwrap();
            let hs = LinearSymplectomorphism::standard(h).unwrap();
            let a = holomorphic_determinant(&g).unwrap();
            let b = holomorphic_determinant(&hs).unwrap();
            // frames differ from P, Q by unitary maps, so only the modulus is fixed
            assert!((a.norm() - b.norm()).abs() < 1e-9 * b.norm());

            let same = LinearSymplectomorphism::new(
                &p * hs.matrix() * symplectic_inverse(&p),
                conjugated_structure(&p),
                conjugated_structure(&p),
            )
            .unwrap();
            let direct = holomorphic_determinant(&same).unwrap();
            let polar = polar_determinant(&same).unwrap();
            assert!(close(direct, polar, 1e-9 * (1.0 + direct.norm())));
            assert!(close(direct, b, 1e-9 * b.norm()));
        }
    }

    #[test]
    fn product_rule_for_complex_linear_maps() {
        let th1: f64 = 0.4;
        let th2: f64 = -1.3;
        let r = |t: f64| LinearSymplectomorphism::standard(m2(t.cos(), -t.sin(), t.sin(), t.cos())).unwrap();
        let (a, b) = (r(th1), r(th2));
        let ab = a.compose(&b).unwrap();
        let lhs = holomorphic_determinant(&ab).unwrap();
        let rhs = holomorphic_determinant(&a).unwrap() * holomorphic_determinant(&b).unwrap();
        assert!(close(lhs, rhs, 1e-14));
    }

    #[test]
    fn branch_sqrt_constant_path() {
        let out = branch_sqrt_path(&[Complex64::new(1.0, 0.0); 3]).unwrap();
        assert!(out.iter().all(|b| close(b.value, Complex64::new(1.0, 0.0), 1e-15)));
    }

    #[test]
    fn branch_sqrt_follows_through_the_cut() {
        let n = 3000;
        let path: Vec<_> = (0..=n)
            .map(|i| Complex64::from_polar(1.0, 3.0 * PI * i as f64 / n as f64))
            .collect();
        let out = branch_sqrt_path(&path).unwrap();
        let last = out.last().unwrap();
        assert!(close(last.value, Complex64::from_polar(1.0, 1.5 * PI), 1e-12));
        assert!((last.branch_angle - 1.5 * PI).abs() < 1e-12);
        for (b, v) in out.iter().zip(&path) {
            assert!(close(b.squared(), *v, 1e-12));
        }
    }

    #[test]
    fn branch_sqrt_rejects_coarse_grid_and_bad_start() {
        let path = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.1)];
        assert!(matches!(
            branch_sqrt_path(&path),
            Err(Error::GridTooCoarse { index: 1, .. })
        ));
        assert!(branch_sqrt_path(&[Complex64::new(-1.0, 0.0)]).is_err());
        assert!(branch_sqrt_path(&[]).unwrap().is_empty());
    }

    #[test]
    fn branch_sqrt_of_inverse_shear_factor() {
        let q: f64 = 0.1;
        let ts: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let a = |t: f64| PI * t / 2.0 * (2.0 * PI * q).cos();
        let path: Vec<_> = ts.iter().map(|&t| Complex64::new(1.0, -a(t)).inv()).collect();
        let out = branch_sqrt_path(&path).unwrap();
        for (&t, b) in ts.iter().zip(&out) {
            let expected = Complex64::from_polar((1.0 + a(t).powi(2)).powf(-0.25), 0.5 * a(t).atan());
            assert!(close(b.value, expected, 1e-14));
        }
    }

    #[test]
    fn level_set_factors_of_product_system() {
        // X = ∂x₁ scaled, flow acts by a shear in (x₁, y₁) preserving X and by
        // an arbitrary symplectic map on (x₂, y₂).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gg = random_symplectic(1, &mut rng, 0.7);
        let s = 0.8;
        let mut g = DMatrix::<f64>::identity(4, 4);
        // (x₁, x₂, y₁, y₂) ordering
        g[(0, 2)] = s;
        g[(1, 1)] = gg[(0, 0)];
        g[(1, 3)] = gg[(0, 1)];
        g[(3, 1)] = gg[(1, 0)];
        g[(3, 3)] = gg[(1, 1)];
        let g = LinearSymplectomorphism::standard(g).unwrap();
        let x = DVector::from_vec(vec![0.6, 0.0, 0.0, 0.0]);
        let f = level_set_factors(&g, &x, &x, 1.0).unwrap();
        let expected_frame = Complex64::new(2.0 / 0.36, 0.0);
        let expected_reduced = holomorphic_determinant(
            &LinearSymplectomorphism::standard(gg).unwrap(),
        )
        .unwrap()
        .inv();
        assert!(close(f.frame, expected_frame, 1e-12));
        assert!(close(f.reduced, expected_reduced, 1e-12));
    }

    #[test]
    fn b_coefficient_cases() {
        let omega = standard_symplectic(1);
        let j = standard_complex_structure(1);
        let vertical = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        // X ∈ j(T): B = ‖X‖²
        let x = DVector::from_vec(vec![0.3, 0.0]);
        let b = lagrangian_b_coefficient(&omega, &j, &x, &vertical).unwrap();
        assert!(close(b, Complex64::new(0.09, 0.0), 1e-15));
        // tangent field: degenerate
        let x = DVector::from_vec(vec![0.0, 0.4]);
        assert!(matches!(
            lagrangian_b_coefficient(&omega, &j, &x, &vertical),
            Err(Error::Degenerate(_))
        ));
        // mixed: X = (1, 1) = X₁ + X₂ with X₁ = (1, 0), X₂ = (0, 1)
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let b = lagrangian_b_coefficient(&omega, &j, &x, &vertical).unwrap();
        assert!(close(b, Complex64::new(1.0, 1.0), 1e-15));
    }
}
