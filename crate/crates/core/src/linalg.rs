//! Dense Hermitian eigensolver and small matrix helpers.
//!
//! The eigensolver reduces a complex Hermitian matrix to real symmetric
//! tridiagonal form with Householder reflections, then diagonalizes the
//! tridiagonal matrix with the implicit QL algorithm (the `tql2` routine of
//! EISPACK/JAMA), accumulating the eigenvectors.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigenvalues in ascending order with the matching unit eigenvectors stored
/// as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl HermitianEigen {
    /// Largest `‖A v − λ v‖₂` over all eigenpairs.
    pub fn max_residual(&self, a: &DMatrix<Complex64>) -> f64 {
        let av = a * &self.vectors;
        (0..self.values.len())
            .map(|j| {
                let lambda = self.values[j];
                av.column(j)
                    .iter()
                    .zip(self.vectors.column(j).iter())
                    .map(|(x, v)| (x - v * lambda).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

const MAX_QL_ITERATIONS: usize = 60;

/// Eigendecomposition of a Hermitian matrix. Only the Hermitian part
/// `(A + Aᴴ)/2` of the input is used.
pub fn hermitian_eigen(input: &DMatrix<Complex64>) -> Result<HermitianEigen> {
    let n = input.nrows();
    if n != input.ncols() {
        return Err(Error::Validation(format!(
            "eigensolver needs a square matrix, got {}x{}",
            n,
            input.ncols()
        )));
    }
    if n == 0 {
        return Ok(HermitianEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    if input.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }

    let mut a = (input + input.adjoint()) * Complex64::new(0.5, 0.0);
    let mut q = DMatrix::<Complex64>::identity(n, n);
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    let mut p = vec![Complex64::new(0.0, 0.0); n];

    for k in 0..n.saturating_sub(2) {
        let m = n - k - 1;
        let alpha = (k + 1..n).map(|i| a[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = a[(k + 1, k)];
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        for i in 0..m {
            v[i] = a[(k + 1 + i, k)];
        }
        v[0] += phase * alpha;
        let vnorm2: f64 = v[..m].iter().map(|z| z.norm_sqr()).sum();
        let tau = 2.0 / vnorm2;

        for i in 0..m {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..m {
                s += a[(k + 1 + i, k + 1 + j)] * v[j];
            }
            p[i] = s * tau;
        }
        let kappa = v[..m]
            .iter()
            .zip(&p[..m])
            .map(|(vi, pi)| vi.conj() * pi)
            .sum::<Complex64>()
            * (0.5 * tau);
        for i in 0..m {
            p[i] -= v[i] * kappa;
        }
        for j in 0..m {
            let vj = v[j].conj();
            let wj = p[j].conj();
            for i in 0..m {
                a[(k + 1 + i, k + 1 + j)] -= v[i] * wj + p[i] * vj;
            }
        }
        a[(k + 1, k)] = -phase * alpha;
        a[(k, k + 1)] = (-phase * alpha).conj();
        for i in k + 2..n {
            a[(i, k)] = Complex64::new(0.0, 0.0);
            a[(k, i)] = Complex64::new(0.0, 0.0);
        }
        for r in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..m {
                s += q[(r, k + 1 + j)] * v[j];
            }
            s *= tau;
            for j in 0..m {
                q[(r, k + 1 + j)] -= s * v[j].conj();
            }
        }
    }

    // Rotate the off-diagonal to be real and non-negative.
    let mut d: Vec<f64> = (0..n).map(|i| a[(i, i)].re).collect();
    let mut e = vec![0.0; n];
    let mut phases = vec![Complex64::new(1.0, 0.0); n];
    for i in 0..n - 1 {
        let off = a[(i + 1, i)];
        e[i] = off.norm();
        phases[i + 1] = if e[i] > 0.0 {
            phases[i] * off / e[i]
        } else {
            phases[i]
        };
    }

    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql2(&mut d, &mut e, &mut z, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));

    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        for r in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for c in 0..n {
                let zc = z[c * n + src];
                if zc != 0.0 {
                    s += q[(r, c)] * phases[c] * zc;
                }
            }
            vectors[(r, col)] = s;
        }
    }
    let values = order.iter().map(|&i| d[i]).collect();
    Ok(HermitianEigen { values, vectors })
}

/// Implicit QL on a symmetric tridiagonal matrix with diagonal `d` and
/// subdiagonal `e` (`e[i]` couples `i` and `i + 1`, `e[n-1] = 0`). `z` is
/// row-major and receives the eigenvectors as columns.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<()> {
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    e[n - 1] = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::EigenNoConvergence { iterations: iter });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in z.chunks_exact_mut(n) {
                        let hk = row[i + 1];
                        row[i + 1] = s * row[i] + c * hk;
                        row[i] = c * row[i] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Eigendecomposition of a real symmetric matrix, vectors returned real.
pub fn symmetric_eigen(a: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let complex = a.map(|x| Complex64::new(x, 0.0));
    let eig = hermitian_eigen(&complex)?;
    Ok((eig.values, eig.vectors.map(|z| z.re)))
}

/// Spectral norm, as the square root of the top eigenvalue of `AᴴA`.
pub fn operator_norm(a: &DMatrix<Complex64>) -> Result<f64> {
    let gram = a.adjoint() * a;
    let eig = hermitian_eigen(&gram)?;
    Ok(eig.values.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Largest entry modulus.
pub fn max_abs(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_real(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// `‖A − Aᴴ‖∞` entrywise.
pub fn hermitian_defect(a: &DMatrix<Complex64>) -> f64 {
    max_abs(&(a - a.adjoint()))
}

/// `‖UᴴU − I‖∞` entrywise.
pub fn unitarity_defect(u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows();
    max_abs(&(u.adjoint() * u - DMatrix::<Complex64>::identity(n, n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn diagonalizes_random_hermitian() {
        for (n, seed) in [(1, 1), (2, 2), (3, 3), (7, 4), (40, 5), (101, 6)] {
            let a = random_hermitian(n, seed);
            let eig = hermitian_eigen(&a).unwrap();
            assert!(eig.max_residual(&a) < 1e-11, "n={n}");
            assert!(unitarity_defect(&eig.vectors) < 1e-12, "n={n}");
            assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
            let trace: f64 = (0..n).map(|i| a[(i, i)].re).sum();
            let sum: f64 = eig.values.iter().sum();
            assert!((trace - sum).abs() < 1e-10);
        }
    }

    #[test]
    fn handles_degenerate_and_diagonal_input() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(0.5, 0.0),
        ]));
        let eig = hermitian_eigen(&a).unwrap();
        assert_eq!(eig.values, vec![-1.0, 0.5, 2.0, 2.0]);
        assert!(eig.max_residual(&a) < 1e-14);

        let id = DMatrix::<Complex64>::identity(5, 5);
        let eig = hermitian_eigen(&id).unwrap();
        assert!(eig.values.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn two_by_two_closed_form() {
        // [[a, b], [b̄, c]] has eigenvalues (a+c)/2 ± sqrt(((a-c)/2)² + |b|²).
        let b = Complex64::new(0.3, -0.4);
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(1.0, 0.0), b, b.conj(), Complex64::new(-2.0, 0.0)],
        );
        let eig = hermitian_eigen(&a).unwrap();
        let r = (1.5f64.powi(2) + b.norm_sqr()).sqrt();
        assert!((eig.values[0] - (-0.5 - r)).abs() < 1e-14);
        assert!((eig.values[1] - (-0.5 + r)).abs() < 1e-14);
    }

    #[test]
    fn operator_norm_of_rank_one() {
        let u = DMatrix::from_fn(4, 1, |i, _| Complex64::new(i as f64, 1.0));
        let v = DMatrix::from_fn(1, 4, |_, j| Complex64::new(1.0, -(j as f64)));
        let a = &u * &v;
        let expected = u.norm() * v.norm();
        assert!((operator_norm(&a).unwrap() - expected).abs() < 1e-10);
    }

    #[test]
    fn rejects_non_square() {
        let a = DMatrix::<Complex64>::zeros(2, 3);
        assert!(matches!(hermitian_eigen(&a), Err(Error::Validation(_))));
    }
}
