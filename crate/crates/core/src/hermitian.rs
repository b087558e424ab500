//! Dense kernels for small complex Hermitian matrices (row-major slices,
//! dimension nr <= 6 in practice). Positivity is certified by attempted
//! Cholesky factorization; spectra come from a cyclic Jacobi iteration with
//! complex rotations.

use num_complex::Complex64;

type C64 = Complex64;

/// In-place lower Cholesky factorization A = L L*. Fails on a non-positive
/// pivot, which certifies that A is not positive definite.
pub fn cholesky_in_place(a: &mut [C64], m: usize) -> Result<(), ()> {
    debug_assert_eq!(a.len(), m * m);
    for j in 0..m {
        let mut d = a[j * m + j].re;
        for k in 0..j {
            d -= a[j * m + k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(());
        }
        let l = d.sqrt();
        a[j * m + j] = C64::new(l, 0.0);
        for i in (j + 1)..m {
            let mut s = a[i * m + j];
            for k in 0..j {
                s -= a[i * m + k] * a[j * m + k].conj();
            }
            a[i * m + j] = s / l;
        }
    }
    Ok(())
}

/// log det of a Hermitian positive definite matrix via Cholesky.
pub fn logdet_pd(a: &[C64], m: usize) -> Result<f64, ()> {
    let mut buf = a.to_vec();
    cholesky_in_place(&mut buf, m)?;
    let mut s = 0.0;
    for j in 0..m {
        s += buf[j * m + j].re.ln();
    }
    Ok(2.0 * s)
}

/// True iff A - shift*I is positive definite (Cholesky succeeds).
pub fn is_pd_shifted(a: &[C64], m: usize, shift: f64) -> bool {
    let mut buf = a.to_vec();
    for j in 0..m {
        buf[j * m + j] -= shift;
    }
    cholesky_in_place(&mut buf, m).is_ok()
}

fn solve_cholesky(l: &[C64], m: usize, b: &mut [C64]) {
    // L y = b
    for i in 0..m {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * m + k] * b[k];
        }
        b[i] = s / l[i * m + i].re;
    }
    // L* x = y
    for i in (0..m).rev() {
        let mut s = b[i];
        for k in (i + 1)..m {
            s -= l[k * m + i].conj() * b[k];
        }
        b[i] = s / l[i * m + i].re;
    }
}

/// Inverse of a Hermitian positive definite matrix. The result is
/// symmetrized exactly (upper triangle mirrored into the lower one).
pub fn inverse_pd(a: &[C64], m: usize) -> Result<Vec<C64>, ()> {
    let mut l = a.to_vec();
    cholesky_in_place(&mut l, m)?;
    let mut inv = vec![C64::new(0.0, 0.0); m * m];
    let mut col = vec![C64::new(0.0, 0.0); m];
    for j in 0..m {
        col.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        col[j] = C64::new(1.0, 0.0);
        solve_cholesky(&l, m, &mut col);
        for i in 0..m {
            inv[i * m + j] = col[i];
        }
    }
    for j in 0..m {
        inv[j * m + j] = C64::new(inv[j * m + j].re, 0.0);
        for k in (j + 1)..m {
            let v = (inv[j * m + k] + inv[k * m + j].conj()) * 0.5;
            inv[j * m + k] = v;
            inv[k * m + j] = v.conj();
        }
    }
    Ok(inv)
}

/// Determinant of a Hermitian matrix (real by symmetry), via complex LU with
/// partial pivoting. Works for indefinite matrices too.
pub fn det_hermitian(a: &[C64], m: usize) -> f64 {
    let mut lu = a.to_vec();
    let mut det = C64::new(1.0, 0.0);
    for k in 0..m {
        let mut p = k;
        let mut best = lu[k * m + k].norm();
        for i in (k + 1)..m {
            let v = lu[i * m + k].norm();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if p != k {
            for j in 0..m {
                lu.swap(k * m + j, p * m + j);
            }
            det = -det;
        }
        let piv = lu[k * m + k];
        det *= piv;
        for i in (k + 1)..m {
            let f = lu[i * m + k] / piv;
            lu[i * m + k] = f;
            for j in (k + 1)..m {
                let sub = f * lu[k * m + j];
                lu[i * m + j] -= sub;
            }
        }
    }
    det.re
}

/// Frobenius norm.
pub fn frobenius(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian quadratic form gamma* M gamma (real part; the imaginary residue
/// of the accumulation is returned alongside for leak checks).
pub fn quad_form_parts(m_mat: &[C64], m: usize, gamma: &[C64]) -> (f64, f64) {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            acc += gamma[i].conj() * m_mat[i * m + j] * gamma[j];
        }
    }
    (acc.re, acc.im)
}

/// Full spectrum of a Hermitian matrix by cyclic Jacobi iteration.
/// Returns eigenvalues in descending order and the matching orthonormal
/// eigenvectors as columns of a row-major m x m matrix.
pub fn eigen_hermitian(a: &[C64], m: usize) -> (Vec<f64>, Vec<C64>) {
    let mut w = a.to_vec();
    let mut v = vec![C64::new(0.0, 0.0); m * m];
    for i in 0..m {
        v[i * m + i] = C64::new(1.0, 0.0);
    }
    let scale = frobenius(&w).max(1e-300);
    let tol = 1e-15 * scale;

    for _sweep in 0..40 {
        let mut off = 0.0f64;
        for p in 0..m {
            for q in (p + 1)..m {
                off += w[p * m + q].norm_sqr();
            }
        }
        if (2.0 * off).sqrt() <= tol {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let z = w[p * m + q];
                let az = z.norm();
                if az <= 1e-300 {
                    continue;
                }
                let phase = z / az;
                let tau = (w[p * m + p].re - w[q * m + q].re) / (2.0 * az);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let spc = s * phase.conj(); // R[q][p] = s e^{-i phi}
                let sp = s * phase; // appears in -s e^{i phi}

                // Rows/columns k not in {p, q}.
                for k in 0..m {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = w[k * m + p];
                    let akq = w[k * m + q];
                    let nkp = akp * c + akq * spc;
                    let nkq = akq * c - akp * sp;
                    w[k * m + p] = nkp;
                    w[p * m + k] = nkp.conj();
                    w[k * m + q] = nkq;
                    w[q * m + k] = nkq.conj();
                }
                let app = w[p * m + p].re;
                let aqq = w[q * m + q].re;
                let napp = c * c * app + s * s * aqq + 2.0 * c * s * az;
                let naqq = c * c * aqq + s * s * app - 2.0 * c * s * az;
                w[p * m + p] = C64::new(napp, 0.0);
                w[q * m + q] = C64::new(naqq, 0.0);
                w[p * m + q] = C64::new(0.0, 0.0);
                w[q * m + p] = C64::new(0.0, 0.0);

                for k in 0..m {
                    let vkp = v[k * m + p];
                    let vkq = v[k * m + q];
                    v[k * m + p] = vkp * c + vkq * spc;
                    v[k * m + q] = vkq * c - vkp * sp;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        w[j * m + j]
            .re
            .partial_cmp(&w[i * m + i].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let eigs: Vec<f64> = order.iter().map(|&i| w[i * m + i].re).collect();
    let mut vecs = vec![C64::new(0.0, 0.0); m * m];
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..m {
            vecs[i * m + new_col] = v[i * m + old_col];
        }
    }
    (eigs, vecs)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(a: &[C64], m: usize) -> f64 {
    if m == 1 {
        return a[0].re;
    }
    if m == 2 {
        let tr = a[0].re + a[3].re;
        let det = (a[0] * a[3] - a[1] * a[2]).re;
        let disc = (tr * tr - 4.0 * det).max(0.0).sqrt();
        return 0.5 * (tr - disc);
    }
    let (eigs, _) = eigen_hermitian(a, m);
    eigs[m - 1]
}
