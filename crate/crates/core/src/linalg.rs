//! Dense kernels for small complex matrices: matrix exponential, unitary
//! polar factor, and Hermitian eigenvalues.
//!
//! Everything here is deterministic and allocation-light; the matrices in
//! this crate are at most a few rows wide, so direct methods win over
//! anything iterative-sparse.

use nalgebra::{Complex, DMatrix};

pub type Scalar = Complex<f64>;
pub type Matrix = DMatrix<Scalar>;

/// Padé coefficients for the degree-13 approximant of `exp`.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// 1-norm threshold above which the argument is scaled before the
/// degree-13 approximant is applied (Higham's theta for degree 13).
const PADE13_THETA: f64 = 5.371920351148152;

pub fn frobenius_norm(a: &Matrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn one_norm(a: &Matrix) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn is_finite(a: &Matrix) -> bool {
    a.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Solves `a x = b` in place by Gaussian elimination with partial
/// pivoting; `b` is overwritten with the solution.
fn solve_in_place(a: &mut Matrix, b: &mut Matrix) {
    let n = a.nrows();
    let m = b.ncols();
    for col in 0..n {
        let mut pivot = col;
        let mut best = a[(col, col)].norm_sqr();
        for row in (col + 1)..n {
            let candidate = a[(row, col)].norm_sqr();
            if candidate > best {
                best = candidate;
                pivot = row;
            }
        }
        if pivot != col {
            a.swap_rows(col, pivot);
            b.swap_rows(col, pivot);
        }
        let diag = a[(col, col)];
        for row in (col + 1)..n {
            let factor = a[(row, col)] / diag;
            if factor.norm_sqr() == 0.0 {
                continue;
            }
            for k in col..n {
                let v = a[(col, k)];
                a[(row, k)] -= factor * v;
            }
            for k in 0..m {
                let v = b[(col, k)];
                b[(row, k)] -= factor * v;
            }
        }
    }
    for col in (0..n).rev() {
        let diag = a[(col, col)];
        for k in 0..m {
            let mut sum = b[(col, k)];
            for j in (col + 1)..n {
                sum -= a[(col, j)] * b[(j, k)];
            }
            b[(col, k)] = sum / diag;
        }
    }
}

/// Matrix exponential by scaling and squaring with the fixed degree-13
/// diagonal Padé approximant. Written with explicit buffers; this sits
/// on the hot path of every stochastic step.
pub fn expm(a: &Matrix) -> Matrix {
    let n = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > PADE13_THETA {
        (norm / PADE13_THETA).log2().ceil() as u32
    } else {
        0
    };
    let mut scaled = a.clone();
    if squarings > 0 {
        let factor = Scalar::new(0.5f64.powi(squarings as i32), 0.0);
        for z in scaled.iter_mut() {
            *z *= factor;
        }
    }

    let mut a2 = Matrix::zeros(n, n);
    scaled.mul_to(&scaled, &mut a2);
    let mut a4 = Matrix::zeros(n, n);
    a2.mul_to(&a2, &mut a4);
    let mut a6 = Matrix::zeros(n, n);
    a2.mul_to(&a4, &mut a6);

    // Polynomial pieces are assembled elementwise into shared buffers.
    let mut w = Matrix::zeros(n, n);
    let mut u = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    {
        let (ws, a2s, a4s, a6s) = (w.as_mut_slice(), a2.as_slice(), a4.as_slice(), a6.as_slice());
        for i in 0..ws.len() {
            ws[i] = a6s[i] * PADE13[13] + a4s[i] * PADE13[11] + a2s[i] * PADE13[9];
        }
    }
    a6.mul_to(&w, &mut u);
    {
        let (us, a2s, a4s, a6s) = (u.as_mut_slice(), a2.as_slice(), a4.as_slice(), a6.as_slice());
        for i in 0..us.len() {
            us[i] += a6s[i] * PADE13[7] + a4s[i] * PADE13[5] + a2s[i] * PADE13[3];
        }
    }
    for i in 0..n {
        u[(i, i)] += Scalar::new(PADE13[1], 0.0);
    }
    scaled.mul_to(&u, &mut w); // w now holds U = scaled * (odd part)
    {
        let (vs, a2s, a4s, a6s) = (v.as_mut_slice(), a2.as_slice(), a4.as_slice(), a6.as_slice());
        for i in 0..vs.len() {
            vs[i] = a6s[i] * PADE13[12] + a4s[i] * PADE13[10] + a2s[i] * PADE13[8];
        }
    }
    a6.mul_to(&v, &mut u); // u now holds a6 * (inner even part)
    {
        let (us, a2s, a4s, a6s) = (u.as_mut_slice(), a2.as_slice(), a4.as_slice(), a6.as_slice());
        for i in 0..us.len() {
            us[i] += a6s[i] * PADE13[6] + a4s[i] * PADE13[4] + a2s[i] * PADE13[2];
        }
    }
    for i in 0..n {
        u[(i, i)] += Scalar::new(PADE13[0], 0.0);
    }
    // u holds V, w holds U. Denominator V - U into a2, numerator V + U
    // into a4, then solve in place.
    {
        let (den, num, us, vs) =
            (a2.as_mut_slice(), a4.as_mut_slice(), w.as_slice(), u.as_slice());
        for i in 0..den.len() {
            den[i] = vs[i] - us[i];
            num[i] = vs[i] + us[i];
        }
    }
    solve_in_place(&mut a2, &mut a4);
    let mut result = a4;
    for _ in 0..squarings {
        result.mul_to(&result.clone(), &mut a6);
        std::mem::swap(&mut result, &mut a6);
    }
    result
}

/// Unitary polar factor by Newton iteration `X <- (X + X^-dagger) / 2`.
///
/// Converges quadratically for nonsingular input; near-unitary matrices
/// reach machine precision in a handful of iterations.
pub fn unitary_polar_factor(a: &Matrix) -> Option<Matrix> {
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let mut x = a.clone();
    for _ in 0..40 {
        let inv_adj = x.clone().lu().try_inverse()?.adjoint();
        let next = (&x + &inv_adj) * Scalar::new(0.5, 0.0);
        let step = frobenius_norm(&(&next - &x));
        x = next;
        if step < 1e-15 * (n as f64) {
            break;
        }
    }
    let defect = frobenius_norm(&(x.adjoint() * &x - &id));
    if defect < 1e-12 * (n as f64) {
        Some(x)
    } else {
        None
    }
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi sweeps, ascending.
pub fn hermitian_eigenvalues(a: &Matrix) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let scale = frobenius_norm(&m).max(1.0);
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.norm() <= 1e-18 * scale {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                let phase = apq / Scalar::new(apq.norm(), 0.0);
                let tau = (aqq - app) / (2.0 * apq.norm());
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Columns, then rows, of the plane rotation
                // J[p][p]=c, J[p][q]=s*phase, J[q][p]=-s*conj(phase), J[q][q]=c.
                for i in 0..n {
                    let aip = m[(i, p)];
                    let aiq = m[(i, q)];
                    m[(i, p)] = aip * c - aiq * phase.conj() * s;
                    m[(i, q)] = aip * phase * s + aiq * c;
                }
                for j in 0..n {
                    let apj = m[(p, j)];
                    let aqj = m[(q, j)];
                    m[(p, j)] = apj * c - aqj * phase * s;
                    m[(q, j)] = apj * phase.conj() * s + aqj * c;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eigs
}

/// Singular values, descending, via the Hermitian spectrum of `A^dagger A`.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let gram = a.adjoint() * a;
    let mut vals: Vec<f64> = hermitian_eigenvalues(&gram)
        .into_iter()
        .map(|l| l.max(0.0).sqrt())
        .collect();
    vals.reverse();
    vals
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let z = Matrix::zeros(4, 4);
        let e = expm(&z);
        assert_eq!(frobenius_norm(&(&e - Matrix::identity(4, 4))), 0.0);
    }

    #[test]
    fn expm_matches_planar_rotation() {
        // exp(theta * J) with J the 2x2 rotation generator.
        let theta = std::f64::consts::FRAC_PI_3;
        let mut j = Matrix::zeros(2, 2);
        j[(0, 1)] = Scalar::new(-theta, 0.0);
        j[(1, 0)] = Scalar::new(theta, 0.0);
        let e = expm(&j);
        approx(e[(0, 0)].re, theta.cos(), 1e-14);
        approx(e[(0, 1)].re, -theta.sin(), 1e-14);
        absdiff_zero(e[(0, 0)].im);
        absdiff_zero(e[(1, 0)].im);
    }

    fn absdiff_zero(x: f64) {
        assert!(x.abs() < 1e-14);
    }

    #[test]
    fn expm_handles_large_arguments_by_scaling() {
        // exp(a) * exp(-a) = I even when ||a|| forces squaring; a is taken
        // skew-Hermitian so the exponential is unitary.
        let raw = Matrix::from_fn(3, 3, |i, j| {
            Scalar::new(7.0 * (i as f64 - j as f64), 5.0 * ((i + j) as f64))
        });
        let a = (&raw - raw.adjoint()) * Scalar::new(0.5, 0.0);
        assert!(one_norm(&a) > PADE13_THETA);
        let e = expm(&a);
        let e_inv = expm(&(-&a));
        let err = frobenius_norm(&(&e * &e_inv - Matrix::identity(3, 3)));
        assert!(err < 1e-12, "err = {err}");
        let unitary_defect = frobenius_norm(&(e.adjoint() * &e - Matrix::identity(3, 3)));
        assert!(unitary_defect < 1e-12, "defect = {unitary_defect}");
    }

    #[test]
    fn polar_factor_recovers_unitary_part() {
        // q * diag(2, 0.5) has polar factor q.
        let theta = 0.7f64;
        let mut q = Matrix::zeros(2, 2);
        q[(0, 0)] = Scalar::new(theta.cos(), 0.0);
        q[(0, 1)] = Scalar::new(-theta.sin(), 0.0);
        q[(1, 0)] = Scalar::new(theta.sin(), 0.0);
        q[(1, 1)] = Scalar::new(theta.cos(), 0.0);
        let mut d = Matrix::zeros(2, 2);
        d[(0, 0)] = Scalar::new(2.0, 0.0);
        d[(1, 1)] = Scalar::new(0.5, 0.0);
        let a = &q * &d;
        let u = unitary_polar_factor(&a).unwrap();
        assert!(frobenius_norm(&(&u - &q)) < 1e-12);
    }

    #[test]
    fn hermitian_eigenvalues_match_known_spectrum() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let mut h = Matrix::zeros(2, 2);
        h[(0, 0)] = Scalar::new(2.0, 0.0);
        h[(1, 1)] = Scalar::new(2.0, 0.0);
        h[(0, 1)] = Scalar::new(0.0, 1.0);
        h[(1, 0)] = Scalar::new(0.0, -1.0);
        let eigs = hermitian_eigenvalues(&h);
        approx(eigs[0], 1.0, 1e-13);
        approx(eigs[1], 3.0, 1e-13);
    }

    #[test]
    fn singular_values_of_diagonal() {
        let mut d = Matrix::zeros(3, 3);
        d[(0, 0)] = Scalar::new(-4.0, 0.0);
        d[(1, 1)] = Scalar::new(2.0, 0.0);
        d[(2, 2)] = Scalar::new(1.0, 0.0);
        let sv = singular_values(&d);
        approx(sv[0], 4.0, 1e-12);
        approx(sv[1], 2.0, 1e-12);
        approx(sv[2], 1.0, 1e-12);
    }
}
