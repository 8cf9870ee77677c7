//! Minimal dense linear algebra for small Hermitian problems.
//!
//! The lattice Hamiltonian is a `(2 n_max + 1)`-dimensional Hermitian matrix
//! (17×17 at the default truncation), so a cyclic Jacobi eigensolver and a
//! pivoted Gaussian solve are all that is needed; no external linear-algebra
//! backend is pulled in.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    /// Zero matrix of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![Complex64::ZERO; dim * dim] }
    }

    /// Matrix dimension (rows = columns).
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.dim + col] = value;
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![Complex64::ZERO; self.dim];
        for (i, out_i) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.dim..(i + 1) * self.dim];
            *out_i = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// Largest `|A[i][j] - conj(A[j][i])|` over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..self.dim {
                let d = (self.get(i, j) - self.get(j, i).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    fn off_diagonal_norm_sq(&self) -> f64 {
        let mut sum = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    sum += self.get(i, j).norm_sqr();
                }
            }
        }
        sum
    }
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are sorted ascending; `vectors[k]` is the normalized
/// eigenvector for `values[k]`.
#[derive(Clone, Debug)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<Complex64>>,
}

/// Cyclic Jacobi diagonalization of a Hermitian matrix.
///
/// Returns `None` if the input is not Hermitian (defect above `1e-10` times
/// the matrix scale) or the sweep limit is exhausted, which does not happen
/// for well-formed Hermitian input.
pub fn hermitian_eigen(matrix: &CMatrix) -> Option<HermitianEigen> {
    let n = matrix.dim();
    let scale = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| matrix.get(i, j).norm())
        .fold(0.0f64, f64::max);
    if matrix.hermiticity_defect() > 1e-10 * scale {
        return None;
    }

    let mut a = matrix.clone();
    // v accumulates the rotations; columns end up as eigenvectors.
    let mut v = CMatrix::zeros(n);
    for i in 0..n {
        v.set(i, i, Complex64::ONE);
    }

    // converged once every off-diagonal element sits at rounding level
    let elem_tol = 1e-14 * scale;
    let tol = elem_tol * elem_tol * (n * (n - 1)) as f64;
    const MAX_SWEEPS: usize = 60;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if a.off_diagonal_norm_sq() <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                let g = apq.norm();
                if g <= 1e-300 {
                    continue;
                }
                let phase = apq / g; // e^{i φ}
                let app = a.get(p, p).re;
                let aqq = a.get(q, q).re;
                let tau = (aqq - app) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Unitary differs from identity only in rows/cols p, q:
                //   U[p][p] = c,            U[p][q] = s
                //   U[q][p] = -s e^{-iφ},   U[q][q] = c e^{-iφ}
                let e = phase.conj(); // e^{-iφ}
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a.get(r, p);
                    let arq = a.get(r, q);
                    let new_rp = c * arp - s * e * arq;
                    let new_rq = s * arp + c * e * arq;
                    a.set(r, p, new_rp);
                    a.set(r, q, new_rq);
                    a.set(p, r, new_rp.conj());
                    a.set(q, r, new_rq.conj());
                }
                a.set(p, p, Complex64::new(app - t * g, 0.0));
                a.set(q, q, Complex64::new(aqq + t * g, 0.0));
                a.set(p, q, Complex64::ZERO);
                a.set(q, p, Complex64::ZERO);
                for r in 0..n {
                    let vrp = v.get(r, p);
                    let vrq = v.get(r, q);
                    v.set(r, p, c * vrp - s * e * vrq);
                    v.set(r, q, s * vrp + c * e * vrq);
                }
            }
        }
    }
    if !converged && a.off_diagonal_norm_sq() > tol {
        return None;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a.get(i, i).re.total_cmp(&a.get(j, j).re));
    let values: Vec<f64> = order.iter().map(|&k| a.get(k, k).re).collect();
    let vectors: Vec<Vec<Complex64>> = order
        .iter()
        .map(|&k| {
            let mut col: Vec<Complex64> = (0..n).map(|r| v.get(r, k)).collect();
            let norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            col.iter_mut().for_each(|z| *z /= norm);
            col
        })
        .collect();
    Some(HermitianEigen { values, vectors })
}

/// Solve `A x = b` for small dense real systems by Gaussian elimination with
/// partial pivoting. `a` is row-major `n × n`. Returns `None` on (near)
/// singularity.
pub fn solve_real(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    assert_eq!(b.len(), n);
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap();
        let pivot = m[pivot_row * n + col];
        if pivot.abs() < 1e-300 {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                m.swap(col * n + k, pivot_row * n + k);
            }
            x.swap(col, pivot_row);
        }
        for row in (col + 1)..n {
            let factor = m[row * n + col] / m[col * n + col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                m[row * n + k] -= factor * m[col * n + k];
            }
            x[row] -= factor * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = x[col];
        for k in (col + 1)..n {
            acc -= m[col * n + k] * x[k];
        }
        let diag = m[col * n + col];
        if diag.abs() < 1e-300 {
            return None;
        }
        x[col] = acc / diag;
    }
    Some(x)
}

/// Inverse of a small dense real matrix, or `None` if singular.
pub fn invert_real(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    let mut unit = vec![0.0; n];
    for col in 0..n {
        unit.iter_mut().for_each(|u| *u = 0.0);
        unit[col] = 1.0;
        let x = solve_real(a, &unit, n)?;
        for row in 0..n {
            inv[row * n + col] = x[row];
        }
    }
    Some(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_hermitian(n: usize, seed: u64) -> CMatrix {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut m = CMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, Complex64::new(rng.random_range(-2.0..2.0), 0.0));
            for j in (i + 1)..n {
                let z = Complex64::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                );
                m.set(i, j, z);
                m.set(j, i, z.conj());
            }
        }
        m
    }

    #[test]
    fn eigen_reconstructs_hermitian_matrix() {
        for seed in 0..4 {
            let m = random_hermitian(17, seed);
            let eig = hermitian_eigen(&m).expect("diagonalization");
            for (lambda, vec) in eig.values.iter().zip(&eig.vectors) {
                let mv = m.mul_vec(vec);
                for (a, b) in mv.iter().zip(vec) {
                    assert_abs_diff_eq!(a.re, lambda * b.re, epsilon = 1e-9);
                    assert_abs_diff_eq!(a.im, lambda * b.im, epsilon = 1e-9);
                }
            }
            // eigenvalues sorted
            for w in eig.values.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn eigen_orthonormal_vectors() {
        let m = random_hermitian(9, 7);
        let eig = hermitian_eigen(&m).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let dot: Complex64 = eig.vectors[i]
                    .iter()
                    .zip(&eig.vectors[j])
                    .map(|(a, b)| a.conj() * b)
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(dot.norm(), expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let mut m = CMatrix::zeros(3);
        m.set(0, 1, Complex64::new(1.0, 0.0));
        m.set(1, 0, Complex64::new(2.0, 0.0));
        assert!(hermitian_eigen(&m).is_none());
    }

    #[test]
    fn solve_and_invert_roundtrip() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, -0.2, 0.5, -0.2, 2.0];
        let b = [1.0, -2.0, 0.5];
        let x = solve_real(&a, &b, 3).unwrap();
        for i in 0..3 {
            let lhs: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert_abs_diff_eq!(lhs, b[i], epsilon = 1e-12);
        }
        let inv = invert_real(&a, 3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let prod: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(prod, expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn solve_detects_singular() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(solve_real(&a, &[1.0, 1.0], 2).is_none());
    }
}
