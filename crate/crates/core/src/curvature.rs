//! Pointwise algebra of the nr x nr Hermitian quadratic form on TX (x) E:
//! assembly of the curvature tensor, determinant density, inverse, bundle
//! partial trace, eigenstructure, positivity certification, and bundle frame
//! changes.
//!
//! Tensor indices (i, alpha) with i < n (base) and alpha < r (fibre) are
//! flattened as a = i*r + alpha, so that adding a base Hessian acts as the
//! block pattern H (x) Id_r.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, HermitianMetricField, ScalarField};
use crate::hermitian;

type C64 = Complex64;

/// Grid field of nr x nr complex Hermitian matrices (row-major per node).
#[derive(Clone, Debug)]
pub struct NakanoTensorField {
    grid: GridSpec,
    n: usize,
    r: usize,
    values: Vec<C64>,
}

impl NakanoTensorField {
    pub fn zeros(grid: GridSpec, r: usize) -> Self {
        let d = grid.n() * r;
        NakanoTensorField {
            grid,
            n: grid.n(),
            r,
            values: vec![C64::new(0.0, 0.0); grid.len() * d * d],
        }
    }

    pub fn constant_diagonal(grid: GridSpec, r: usize, v: f64) -> Self {
        let mut f = Self::zeros(grid, r);
        let d = f.dim();
        for idx in 0..grid.len() {
            for a in 0..d {
                f.values[idx * d * d + a * d + a] = C64::new(v, 0.0);
            }
        }
        f
    }

    /// Builds a field from a per-node row-major matrix callback, symmetrizing
    /// exactly (lower triangle mirrors the conjugate upper triangle).
    pub fn from_fn(grid: GridSpec, r: usize, f: impl Fn(usize) -> Vec<C64>) -> Self {
        let mut out = Self::zeros(grid, r);
        let d = out.dim();
        for idx in 0..grid.len() {
            let m = f(idx);
            debug_assert_eq!(m.len(), d * d);
            let dst = &mut out.values[idx * d * d..(idx + 1) * d * d];
            for a in 0..d {
                dst[a * d + a] = C64::new(m[a * d + a].re, 0.0);
                for b in (a + 1)..d {
                    dst[a * d + b] = m[a * d + b];
                    dst[b * d + a] = m[a * d + b].conj();
                }
            }
        }
        out
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn base_dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    /// Matrix dimension nr.
    pub fn dim(&self) -> usize {
        self.n * self.r
    }

    pub fn at(&self, idx: usize) -> &[C64] {
        let d = self.dim() * self.dim();
        &self.values[idx * d..(idx + 1) * d]
    }

    pub fn at_mut(&mut self, idx: usize) -> &mut [C64] {
        let d = self.dim() * self.dim();
        &mut self.values[idx * d..(idx + 1) * d]
    }

    pub fn flat(&self, i: usize, alpha: usize) -> usize {
        i * self.r + alpha
    }

    /// Largest relative deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let m = self.at(idx);
            let scale = m.iter().fold(1e-300_f64, |s, z| s.max(z.norm()));
            for a in 0..d {
                for b in a..d {
                    worst = worst.max((m[a * d + b] - m[b * d + a].conj()).norm() / scale);
                }
            }
        }
        worst
    }

    /// Certifies Nakano positivity with the given margin: succeeds iff every
    /// node passes a Cholesky factorization of M - margin*I, and reports the
    /// offending node with its smallest eigenvalue otherwise.
    pub fn require_nakano_positive(&self, margin: f64) -> Result<()> {
        let d = self.dim();
        for idx in 0..self.grid.len() {
            if !hermitian::is_pd_shifted(self.at(idx), d, margin) {
                return Err(Error::NotNakanoPositive {
                    point: idx,
                    min_eig: hermitian::min_eigenvalue(self.at(idx), d),
                });
            }
        }
        Ok(())
    }
}

/// Theta_u = F + Hu (x) Id_r: entry ((i,alpha),(j,beta)) += Hu_ij delta_ab.
pub fn assemble_theta(f: &NakanoTensorField, hu: &HermitianMetricField) -> Result<NakanoTensorField> {
    f.grid().same_grid(&hu.grid())?;
    if f.base_dim() != hu.dim() {
        return Err(Error::ShapeMismatch(format!(
            "base dimension {} vs Hessian dimension {}",
            f.base_dim(),
            hu.dim()
        )));
    }
    let mut out = f.clone();
    let (n, r, d) = (f.base_dim(), f.rank(), f.dim());
    for idx in 0..f.grid().len() {
        let h = hu.at(idx);
        let m = out.at_mut(idx);
        for i in 0..n {
            for j in 0..n {
                let hij = h[i * n + j];
                for alpha in 0..r {
                    m[(i * r + alpha) * d + (j * r + alpha)] += hij;
                }
            }
        }
    }
    Ok(out)
}

/// Pointwise (1/r) log det M for a Nakano-positive field, via Cholesky.
pub fn log_det_power(m: &NakanoTensorField) -> Result<ScalarField> {
    let d = m.dim();
    let rinv = 1.0 / m.rank() as f64;
    let mut values = Vec::with_capacity(m.grid().len());
    for idx in 0..m.grid().len() {
        match hermitian::logdet_pd(m.at(idx), d) {
            Ok(ld) => values.push(rinv * ld),
            Err(()) => {
                return Err(Error::NotPositive {
                    point: idx,
                    min_eig: hermitian::min_eigenvalue(m.at(idx), d),
                })
            }
        }
    }
    ScalarField::from_values(m.grid(), values)
}

/// Pointwise Hermitian inverse of a Nakano-positive field.
pub fn invert(m: &NakanoTensorField) -> Result<NakanoTensorField> {
    let d = m.dim();
    let mut out = NakanoTensorField::zeros(m.grid(), m.rank());
    for idx in 0..m.grid().len() {
        match hermitian::inverse_pd(m.at(idx), d) {
            Ok(inv) => out.at_mut(idx).copy_from_slice(&inv),
            Err(()) => {
                return Err(Error::NotPositive {
                    point: idx,
                    min_eig: hermitian::min_eigenvalue(m.at(idx), d),
                })
            }
        }
    }
    Ok(out)
}

/// Bundle partial trace of an inverse tensor: the n x n field
/// alpha_ij = Sum_a Minv[(i,a),(j,a)]. For Minv the inverse of a
/// Nakano-positive tensor this is Hermitian positive definite; it is the
/// coefficient matrix of the linearized operator.
pub fn partial_trace_inverse(minv: &NakanoTensorField) -> HermitianMetricField {
    let (n, r, d) = (minv.base_dim(), minv.rank(), minv.dim());
    HermitianMetricField::from_fn(minv.grid(), n, |idx| {
        let m = minv.at(idx);
        let mut a = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for alpha in 0..r {
                    s += m[(i * r + alpha) * d + (j * r + alpha)];
                }
                a[i * n + j] = s;
            }
        }
        a
    })
}

/// Global minimum over grid nodes of the smallest eigenvalue of M(x).
pub fn min_nakano_eigenvalue(m: &NakanoTensorField) -> f64 {
    let d = m.dim();
    let mut min = f64::INFINITY;
    for idx in 0..m.grid().len() {
        min = min.min(hermitian::min_eigenvalue(m.at(idx), d));
    }
    min
}

/// Hermitian quadratic form gamma* M gamma at one node (real by symmetry).
pub fn quad_form(mat: &[C64], dim: usize, gamma: &[C64]) -> Result<f64> {
    if mat.len() != dim * dim || gamma.len() != dim {
        return Err(Error::ShapeMismatch(format!(
            "quad_form: matrix {} / vector {} vs dim {}",
            mat.len(),
            gamma.len(),
            dim
        )));
    }
    let (re, im) = hermitian::quad_form_parts(mat, dim, gamma);
    if im.abs() > 1e-10 * re.abs().max(1.0) {
        return Err(Error::ImaginaryLeak(im.abs()));
    }
    Ok(re)
}

/// Full spectrum of the tensor at one node.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// Row-major nr x nr matrix whose columns are the orthonormal
    /// eigenvectors, ordered like `eigenvalues`.
    pub vectors: Vec<C64>,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Component `flat` = (i, alpha) of eigenvector `a`.
    pub fn vector_component(&self, a: usize, flat: usize) -> C64 {
        self.vectors[flat * self.dim() + a]
    }

    /// Sum_a L_a v_a v_a*, for reconstruction checks.
    pub fn reconstruct(&self) -> Vec<C64> {
        let d = self.dim();
        let mut m = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                let mut s = C64::new(0.0, 0.0);
                for a in 0..d {
                    s += self.vectors[i * d + a] * self.vectors[j * d + a].conj() * self.eigenvalues[a];
                }
                m[i * d + j] = s;
            }
        }
        m
    }
}

/// Eigendecomposition of the nr x nr tensor at node `idx`.
pub fn eigendecompose(m: &NakanoTensorField, idx: usize) -> EigenDecomposition {
    let (eigenvalues, vectors) = hermitian::eigen_hermitian(m.at(idx), m.dim());
    EigenDecomposition { eigenvalues, vectors }
}

fn unitary_defect(u: &[C64], r: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..r {
        for b in 0..r {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..r {
                s += u[k * r + a].conj() * u[k * r + b];
            }
            let expect = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((s - expect).norm());
        }
    }
    worst
}

/// Conjugates the fibre index by an r x r unitary: M -> (Id_n (x) U) M (Id_n (x) U)*.
/// The determinant density is invariant under this change of trivialisation.
pub fn frame_change(m: &NakanoTensorField, u: &[C64]) -> Result<NakanoTensorField> {
    let (n, r, d) = (m.base_dim(), m.rank(), m.dim());
    if u.len() != r * r {
        return Err(Error::ShapeMismatch(format!(
            "unitary has {} entries, expected {}",
            u.len(),
            r * r
        )));
    }
    let defect = unitary_defect(u, r);
    if defect > 1e-13 {
        return Err(Error::NotUnitary(defect));
    }
    let out = NakanoTensorField::from_fn(m.grid(), r, |idx| {
        let src = m.at(idx);
        let mut dst = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..n {
            for j in 0..n {
                for alpha in 0..r {
                    for beta in 0..r {
                        let mut s = C64::new(0.0, 0.0);
                        for gamma in 0..r {
                            for delta in 0..r {
                                s += u[alpha * r + gamma]
                                    * src[(i * r + gamma) * d + (j * r + delta)]
                                    * u[beta * r + delta].conj();
                            }
                        }
                        dst[(i * r + alpha) * d + (j * r + beta)] = s;
                    }
                }
            }
        }
        dst
    });
    Ok(out)
}

/// Random unitary from sign-fixed Gram-Schmidt of a complex Gaussian matrix;
/// deterministic for a fixed RNG state.
pub fn random_unitary(rng: &mut impl rand::Rng, r: usize) -> Vec<C64> {
    let mut cols: Vec<Vec<C64>> = Vec::with_capacity(r);
    for _ in 0..r {
        loop {
            let mut v: Vec<C64> = (0..r)
                .map(|_| C64::new(gaussian(rng), gaussian(rng)))
                .collect();
            for prev in &cols {
                let mut dot = C64::new(0.0, 0.0);
                for k in 0..r {
                    dot += prev[k].conj() * v[k];
                }
                for k in 0..r {
                    v[k] -= dot * prev[k];
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-6 {
                let phase = v[0] / v[0].norm().max(1e-300);
                for z in v.iter_mut() {
                    *z = *z / norm / phase;
                }
                cols.push(v);
                break;
            }
        }
    }
    let mut u = vec![C64::new(0.0, 0.0); r * r];
    for (c, col) in cols.iter().enumerate() {
        for i in 0..r {
            u[i * r + c] = col[i];
        }
    }
    u
}

/// Box-Muller standard normal; keeps test fuel free of extra dependencies.
pub fn gaussian(rng: &mut impl rand::Rng) -> f64 {
    let u1: f64 = rng.gen_range(1e-12..1.0);
    let u2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    (-2.0 * u1.ln()).sqrt() * u2.cos()
}

/// Well-conditioned random Hermitian positive definite matrix, Id + G G*/m.
pub fn random_hpd(rng: &mut impl rand::Rng, m: usize) -> Vec<C64> {
    let mut g = vec![C64::new(0.0, 0.0); m * m];
    for z in g.iter_mut() {
        *z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    let mut a = vec![C64::new(0.0, 0.0); m * m];
    for i in 0..m {
        for j in 0..m {
            let mut s = C64::new(0.0, 0.0);
            for k in 0..m {
                s += g[i * m + k] * g[j * m + k].conj();
            }
            a[i * m + j] = s / m as f64;
        }
        a[i * m + i] += 1.0;
    }
    a
}

/// Gap of the concavity inequality
/// log det A <= log det B + tr(B^{-1}(A - B)): returns the right side minus
/// the left side, nonnegative (up to rounding) for Hermitian PD A, B.
pub fn concavity_gap(a: &[C64], b: &[C64], m: usize) -> Result<f64> {
    let not_pd = |mat: &[C64]| Error::NotPositive {
        point: 0,
        min_eig: hermitian::min_eigenvalue(mat, m),
    };
    let la = hermitian::logdet_pd(a, m).map_err(|_| not_pd(a))?;
    let lb = hermitian::logdet_pd(b, m).map_err(|_| not_pd(b))?;
    let binv = hermitian::inverse_pd(b, m).map_err(|_| not_pd(b))?;
    let mut tr = 0.0;
    for i in 0..m {
        for k in 0..m {
            tr += (binv[i * m + k] * (a[k * m + i] - b[k * m + i])).re;
        }
    }
    Ok(lb + tr - la)
}

/// Gap of the mean-value inequality tr(B^{-1} A)/m >= (det A / det B)^(1/m):
/// returns left minus right, nonnegative for Hermitian PD A, B.
pub fn mean_value_gap(a: &[C64], b: &[C64], m: usize) -> Result<f64> {
    let not_pd = |mat: &[C64]| Error::NotPositive {
        point: 0,
        min_eig: hermitian::min_eigenvalue(mat, m),
    };
    let la = hermitian::logdet_pd(a, m).map_err(|_| not_pd(a))?;
    let lb = hermitian::logdet_pd(b, m).map_err(|_| not_pd(b))?;
    let binv = hermitian::inverse_pd(b, m).map_err(|_| not_pd(b))?;
    let mut tr = 0.0;
    for i in 0..m {
        for k in 0..m {
            tr += (binv[i * m + k] * a[k * m + i]).re;
        }
    }
    Ok(tr / m as f64 - ((la - lb) / m as f64).exp())
}

/// Defect of the mutual-control identity: for M = F + diag(lam_i) (x) Id_r
/// with spectrum (L_a, gamma_a), every diagonal slot satisfies
/// F[(i,alpha),(i,alpha)] + lam_i = Sum_a |gamma_a[(i,alpha)]|^2 L_a.
/// Returns the largest absolute defect over the slots.
pub fn mutual_control_defect(f: &[C64], lam: &[f64], n: usize, r: usize) -> f64 {
    let d = n * r;
    debug_assert_eq!(f.len(), d * d);
    debug_assert_eq!(lam.len(), n);
    let mut m = f.to_vec();
    for i in 0..n {
        for alpha in 0..r {
            let a = i * r + alpha;
            m[a * d + a] += lam[i];
        }
    }
    let (eigs, vecs) = hermitian::eigen_hermitian(&m, d);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for alpha in 0..r {
            let flat = i * r + alpha;
            let mut s = 0.0;
            for a in 0..d {
                s += vecs[flat * d + a].norm_sqr() * eigs[a];
            }
            worst = worst.max((f[flat * d + flat].re + lam[i] - s).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::complex_hessian;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, 8, 1.0).unwrap()
    }

    fn diag_field(g: GridSpec, r: usize, entries: &[f64]) -> NakanoTensorField {
        let d = g.n() * r;
        assert_eq!(entries.len(), d);
        NakanoTensorField::from_fn(g, r, |_| {
            let mut m = vec![C64::new(0.0, 0.0); d * d];
            for a in 0..d {
                m[a * d + a] = C64::new(entries[a], 0.0);
            }
            m
        })
    }

    fn random_hpd_field(seed: u64, g: GridSpec, r: usize) -> NakanoTensorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = g.n() * r;
        let mats: Vec<Vec<C64>> = (0..g.len()).map(|_| random_hpd(&mut rng, d)).collect();
        NakanoTensorField::from_fn(g, r, |idx| mats[idx].clone())
    }

    #[test]
    fn assemble_with_zero_hessian_is_identity() {
        let g = grid(1);
        let f = diag_field(g, 2, &[2.0, 3.0]);
        let hu = HermitianMetricField::zeros(g, 1);
        let out = assemble_theta(&f, &hu).unwrap();
        assert_eq!(out.at(5), f.at(5));
    }

    #[test]
    fn assemble_adds_block_diagonal() {
        let g = grid(1);
        let f = diag_field(g, 2, &[2.0, 3.0]);
        let hu = HermitianMetricField::from_fn(g, 1, |_| vec![C64::new(-0.5, 0.0)]);
        let out = assemble_theta(&f, &hu).unwrap();
        for idx in 0..g.len() {
            let m = out.at(idx);
            assert_eq!(m[0], C64::new(1.5, 0.0));
            assert_eq!(m[3], C64::new(2.5, 0.0));
            assert_eq!(m[1], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn assemble_rank_one_is_elementwise_sum() {
        let g = grid(2);
        let u = ScalarField::from_fn(g, |x| (std::f64::consts::TAU * x[0]).cos() * 0.1);
        let hu = complex_hessian(&u);
        let f = NakanoTensorField::constant_diagonal(g, 1, 2.0);
        let out = assemble_theta(&f, &hu).unwrap();
        for idx in 0..g.len() {
            for j in 0..2 {
                for k in 0..2 {
                    let expect = f.at(idx)[j * 2 + k] + hu.entry(idx, j, k);
                    assert_eq!(out.at(idx)[j * 2 + k], expect);
                }
            }
        }
    }

    #[test]
    fn log_det_power_cases() {
        let g = grid(1);
        let id = NakanoTensorField::constant_diagonal(g, 2, 1.0);
        assert_eq!(log_det_power(&id).unwrap().sup_norm(), 0.0);

        let f = diag_field(g, 2, &[2.0, 3.0]);
        let ld = log_det_power(&f).unwrap();
        assert!((ld.values()[0] - 0.5 * 6.0f64.ln()).abs() < 1e-15);

        let g2 = grid(2);
        let f2 = NakanoTensorField::from_fn(g2, 1, |_| {
            vec![
                C64::new(2.0, 0.0),
                C64::new(0.0, 1.0),
                C64::new(0.0, -1.0),
                C64::new(2.0, 0.0),
            ]
        });
        let ld2 = log_det_power(&f2).unwrap();
        assert!((ld2.values()[0] - 3.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn log_det_power_reports_departure_from_cone() {
        let g = grid(1);
        let mut f = diag_field(g, 2, &[2.0, 3.0]);
        f.at_mut(7)[0] = C64::new(-1.0, 0.0);
        match log_det_power(&f) {
            Err(Error::NotPositive { point, min_eig }) => {
                assert_eq!(point, 7);
                assert!((min_eig + 1.0).abs() < 1e-12);
            }
            other => panic!("expected NotPositive, got {other:?}"),
        }
    }

    #[test]
    fn invert_multiplies_back() {
        let g = grid(1);
        let f = random_hpd_field(21, g, 2);
        let inv = invert(&f).unwrap();
        let d = f.dim();
        for idx in 0..g.len() {
            let a = f.at(idx);
            let b = inv.at(idx);
            for i in 0..d {
                for j in 0..d {
                    let mut s = C64::new(0.0, 0.0);
                    for k in 0..d {
                        s += a[i * d + k] * b[k * d + j];
                    }
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((s - expect).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn partial_trace_cases() {
        let g = grid(1);
        let minv = diag_field(g, 2, &[0.5, 1.0 / 3.0]);
        let a = partial_trace_inverse(&minv);
        assert!((a.entry(0, 0, 0).re - 5.0 / 6.0).abs() < 1e-15);

        let id = NakanoTensorField::constant_diagonal(g, 3, 1.0);
        let aid = partial_trace_inverse(&id);
        assert_eq!(aid.entry(4, 0, 0), C64::new(3.0, 0.0));
    }

    #[test]
    fn partial_trace_matches_explicit_summation() {
        let g = grid(2);
        let f = random_hpd_field(8, g, 2);
        let minv = invert(&f).unwrap();
        let a = partial_trace_inverse(&minv);
        let (n, r, d) = (2, 2, 4);
        for idx in [0usize, 13, 100] {
            let m = minv.at(idx);
            for i in 0..n {
                for j in 0..n {
                    let mut s = C64::new(0.0, 0.0);
                    for alpha in 0..r {
                        s += m[(i * r + alpha) * d + (j * r + alpha)];
                    }
                    assert!((a.entry(idx, i, j) - s).norm() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn min_eigenvalue_scan() {
        let g = grid(1);
        let id = NakanoTensorField::constant_diagonal(g, 2, 1.0);
        assert!((min_nakano_eigenvalue(&id) - 1.0).abs() < 1e-15);

        let mut f = diag_field(g, 2, &[2.0, 3.0]);
        let d = f.dim();
        for a in 0..d {
            f.at_mut(9)[a * d + a] -= 2.5;
        }
        assert!((min_nakano_eigenvalue(&f) + 0.5).abs() < 1e-14);

        let fr = random_hpd_field(77, g, 3);
        let scan = min_nakano_eigenvalue(&fr);
        let mut oracle = f64::INFINITY;
        for idx in 0..g.len() {
            let dec = eigendecompose(&fr, idx);
            oracle = oracle.min(*dec.eigenvalues.last().unwrap());
        }
        assert!((scan - oracle).abs() < 1e-12);
    }

    #[test]
    fn quad_form_cases() {
        let id = vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        ];
        let g1 = vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        assert!((quad_form(&id, 2, &g1).unwrap() - 1.0).abs() < 1e-15);

        let d23 = vec![
            C64::new(2.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(3.0, 0.0),
        ];
        assert!((quad_form(&d23, 2, &g1).unwrap() - 2.0).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let m = random_hpd(&mut rng, 4);
        let gamma: Vec<C64> = (0..4)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut oracle = C64::new(0.0, 0.0);
        for (i, gi) in gamma.iter().enumerate() {
            for (j, gj) in gamma.iter().enumerate() {
                oracle += gi.conj() * m[i * 4 + j] * gj;
            }
        }
        assert!((quad_form(&m, 4, &gamma).unwrap() - oracle.re).abs() < 1e-13);
    }

    #[test]
    fn eigendecompose_diagonal() {
        let g = grid(1);
        let f = diag_field(g, 2, &[3.0, 1.0]);
        let dec = eigendecompose(&f, 0);
        assert!((dec.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((dec.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!((dec.vector_component(0, 0).norm() - 1.0).abs() < 1e-13);
        assert!(dec.vector_component(0, 1).norm() < 1e-13);
    }

    #[test]
    fn frame_change_cases() {
        let g = grid(1);
        let f = diag_field(g, 2, &[2.0, 3.0]);

        let id = vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
        ];
        let same = frame_change(&f, &id).unwrap();
        assert_eq!(same.at(3), f.at(3));

        let swap = vec![
            C64::new(0.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
        ];
        let swapped = frame_change(&f, &swap).unwrap();
        assert_eq!(swapped.at(0)[0], C64::new(3.0, 0.0));
        assert_eq!(swapped.at(0)[3], C64::new(2.0, 0.0));

        let not_unitary = vec![
            C64::new(1.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.5, 0.0),
            C64::new(1.0, 0.0),
        ];
        assert!(matches!(
            frame_change(&f, &not_unitary),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn frame_change_preserves_determinant_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(4242);
        for (n, r) in [(1usize, 2usize), (1, 3), (2, 2)] {
            let g = GridSpec::new(n, 8, 1.0).unwrap();
            let f = random_hpd_field(rng.gen(), g, r);
            let u = random_unitary(&mut rng, r);
            let fu = frame_change(&f, &u).unwrap();
            let a = log_det_power(&f).unwrap();
            let b = log_det_power(&fu).unwrap();
            assert!(a.sub(&b).sup_norm() < 1e-12, "n={n} r={r}");
        }
    }

    #[test]
    fn positivity_equivalence_sampled_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let g = grid(1);
        let f = random_hpd_field(5, g, 3);
        let d = f.dim();
        for idx in [0usize, 17, 42] {
            let dec = eigendecompose(&f, idx);
            let min_eig = *dec.eigenvalues.last().unwrap();
            let mut min_form = f64::INFINITY;
            for _ in 0..200 {
                let mut gamma: Vec<C64> = (0..d)
                    .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let norm = gamma.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                gamma.iter_mut().for_each(|z| *z /= norm);
                min_form = min_form.min(quad_form(f.at(idx), d, &gamma).unwrap());
            }
            // Inserting the bottom eigenvector closes the sampled minimum
            // onto the smallest eigenvalue.
            let bottom: Vec<C64> = (0..d).map(|i| dec.vector_component(d - 1, i)).collect();
            min_form = min_form.min(quad_form(f.at(idx), d, &bottom).unwrap());
            assert!(min_form >= min_eig - 1e-10);
            assert!(min_form <= min_eig + 1e-10);
        }
    }

    #[test]
    fn matrix_inequalities_hold_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let m = rng.gen_range(1..=6);
            let a = random_hpd(&mut rng, m);
            let b = random_hpd(&mut rng, m);
            assert!(concavity_gap(&a, &b, m).unwrap() >= -1e-12);
            assert!(mean_value_gap(&a, &b, m).unwrap() >= -1e-12);
        }
    }

    #[test]
    fn mutual_control_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let shapes = [(1usize, 2usize), (2, 1), (2, 2), (2, 3)];
        for _ in 0..200 {
            let (n, r) = shapes[rng.gen_range(0..shapes.len())];
            let d = n * r;
            let f = random_hpd(&mut rng, d);
            let lam: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.3..0.3)).collect();
            assert!(mutual_control_defect(&f, &lam, n, r) < 1e-12);
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for r in 1..=4 {
            let u = random_unitary(&mut rng, r);
            assert!(unitary_defect(&u, r) < 1e-13, "r={r}");
        }
    }
}
