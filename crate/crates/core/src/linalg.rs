//! Small dense complex linear algebra for the four-level subsystem.

use nalgebra::{SMatrix, SVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat4 = SMatrix<C64, 4, 4>;
pub type CVec4 = SVector<C64, 4>;

const MAX_SWEEPS: usize = 64;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn real_diag(d: [f64; 4]) -> CMat4 {
    CMat4::from_diagonal(&CVec4::new(c(d[0], 0.0), c(d[1], 0.0), c(d[2], 0.0), c(d[3], 0.0)))
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff<const N: usize>(a: &SMatrix<C64, N, N>, b: &SMatrix<C64, N, N>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Largest absolute entry of `a - a^dag`.
pub fn hermiticity_defect<const N: usize>(a: &SMatrix<C64, N, N>) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

pub fn trace<const N: usize>(a: &SMatrix<C64, N, N>) -> C64 {
    (0..N).map(|i| a[(i, i)]).sum()
}

/// Eigen-decomposition of a Hermitian matrix by cyclic complex Jacobi rotations.
///
/// Returns unsorted eigenvalues and the unitary whose columns are the matching
/// eigenvectors. Entries that are exactly zero and stay outside every rotated
/// pair remain exactly zero, so block-diagonal inputs yield block-pure vectors.
pub fn hermitian_eigen<const N: usize>(
    input: &SMatrix<C64, N, N>,
) -> Result<([f64; N], SMatrix<C64, N, N>)> {
    if input.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen("non-finite matrix entry".into()));
    }
    let mut a = *input;
    let mut v = SMatrix::<C64, N, N>::identity();
    for i in 0..N {
        a[(i, i)] = c(a[(i, i)].re, 0.0);
    }

    for sweep in 0..MAX_SWEEPS {
        let mut off = 0.0;
        let mut scale = 0.0;
        for p in 0..N {
            scale += a[(p, p)].re.abs();
            for q in (p + 1)..N {
                off += a[(p, q)].norm_sqr();
            }
        }
        if off == 0.0 || off.sqrt() <= f64::EPSILON * 1e-3 * scale.max(f64::MIN_POSITIVE) {
            return Ok((std::array::from_fn(|i| a[(i, i)].re), v));
        }
        for p in 0..N {
            for q in (p + 1)..N {
                let apq = a[(p, q)];
                let mag = apq.norm_sqr().sqrt();
                if mag == 0.0 {
                    continue;
                }
                let app = a[(p, p)].re;
                let aqq = a[(q, q)].re;
                // Negligible coupling relative to both diagonal entries after a few sweeps.
                if sweep > 3 && app.abs() + 100.0 * mag == app.abs() && aqq.abs() + 100.0 * mag == aqq.abs()
                {
                    a[(p, q)] = C64::new(0.0, 0.0);
                    a[(q, p)] = C64::new(0.0, 0.0);
                    continue;
                }
                let phase = apq / mag;
                let theta = (aqq - app) / (2.0 * mag);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                // V = [[c, s e^{i phi}], [-s e^{-i phi}, c]] on (p, q).
                let vpq = phase * sn;
                let vqp = -phase.conj() * sn;
                for k in 0..N {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    let nkp = akp * cs + akq * vqp;
                    let nkq = akp * vpq + akq * cs;
                    a[(k, p)] = nkp;
                    a[(p, k)] = nkp.conj();
                    a[(k, q)] = nkq;
                    a[(q, k)] = nkq.conj();
                }
                a[(p, p)] = c(app - t * mag, 0.0);
                a[(q, q)] = c(aqq + t * mag, 0.0);
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                for k in 0..N {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * cs + vkq * vqp;
                    v[(k, q)] = vkp * vpq + vkq * cs;
                }
            }
        }
    }
    Err(Error::Eigen(format!("Jacobi did not converge in {MAX_SWEEPS} sweeps")))
}
