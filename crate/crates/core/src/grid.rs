//! Periodic grid on the real torus underlying C^n/Z^{2n} (n = 1 or 2), with
//! central-difference Wirtinger stencils and volume-weighted reductions.
//!
//! Complex coordinates are z^j = x^j + i y^j; real axis 2j carries x^j and
//! real axis 2j+1 carries y^j. All fields live at cell nodes on one shared
//! grid. First derivatives are antisymmetric central differences and the
//! complex Hessian is assembled by composing them, so the discrete
//! integration-by-parts identity <D a, b> = -<a, D b> holds exactly.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Finite-difference order of the first-derivative stencils.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum StencilOrder {
    #[default]
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "4")]
    Four,
}

pub const MAX_AXES: usize = 4;

/// Uniform periodic grid: `points_per_axis` nodes along each of the 2n real
/// axes, edge length `period` per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    points_per_axis: usize,
    period: f64,
    order: StencilOrder,
}

impl GridSpec {
    pub fn new(n: usize, points_per_axis: usize, period: f64) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::schema("grid.n", format!("n must be 1 or 2, got {n}")));
        }
        if points_per_axis < 8 || points_per_axis % 2 != 0 {
            return Err(Error::schema(
                "grid.N",
                format!("N must be even and >= 8, got {points_per_axis}"),
            ));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::schema("grid.period", format!("period must be positive, got {period}")));
        }
        Ok(GridSpec {
            n,
            points_per_axis,
            period,
            order: StencilOrder::Two,
        })
    }

    pub fn with_order(mut self, order: StencilOrder) -> Self {
        self.order = order;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn order(&self) -> StencilOrder {
        self.order
    }

    /// Number of real axes (2n).
    pub fn axes(&self) -> usize {
        2 * self.n
    }

    /// Total number of grid nodes, N^(2n).
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.axes() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Grid spacing h = period / N (identical on every axis).
    pub fn spacing(&self) -> f64 {
        self.period / self.points_per_axis as f64
    }

    /// Row-major decomposition of a linear index into per-axis indices
    /// (axis 0 slowest).
    pub fn decompose(&self, mut idx: usize) -> [usize; MAX_AXES] {
        let mut c = [0usize; MAX_AXES];
        let np = self.points_per_axis;
        for a in (0..self.axes()).rev() {
            c[a] = idx % np;
            idx /= np;
        }
        c
    }

    pub fn compose(&self, coords: &[usize]) -> usize {
        let mut idx = 0;
        for a in 0..self.axes() {
            idx = idx * self.points_per_axis + coords[a];
        }
        idx
    }

    /// Linear index of the node shifted by `delta` cells along `axis`,
    /// with periodic wrap.
    pub fn shifted(&self, idx: usize, axis: usize, delta: isize) -> usize {
        let np = self.points_per_axis as isize;
        let stride = self.stride(axis) as isize;
        let along = ((idx as isize / stride) % np + delta).rem_euclid(np);
        let base = idx as isize - ((idx as isize / stride) % np) * stride;
        (base + along * stride) as usize
    }

    fn stride(&self, axis: usize) -> usize {
        self.points_per_axis.pow((self.axes() - 1 - axis) as u32)
    }

    /// Real coordinates of a node.
    pub fn point(&self, idx: usize) -> [f64; MAX_AXES] {
        let c = self.decompose(idx);
        let h = self.spacing();
        let mut x = [0.0; MAX_AXES];
        for a in 0..self.axes() {
            x[a] = c[a] as f64 * h;
        }
        x
    }

    pub fn same_grid(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch(format!(
                "grids differ: {self:?} vs {other:?}"
            )));
        }
        Ok(())
    }
}

/// Real scalar function sampled at grid nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        ScalarField {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: GridSpec, v: f64) -> Self {
        ScalarField {
            grid,
            values: vec![v; grid.len()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite value in scalar field".into()));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|i| f(&grid.point(i)[..grid.axes()]))
            .collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().fold(f64::INFINITY, |m, v| m.min(*v))
    }

    /// Plain (unweighted) grid mean.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn shift(&self, s: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v + s).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    /// a + s*b
    pub fn add_scaled(&self, s: f64, other: &ScalarField) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        ScalarField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }
}

/// Field of complex n-vectors (one per grid node), used for (d_1 u, ..., d_n u).
#[derive(Clone, Debug)]
pub struct VectorField {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl VectorField {
    pub(crate) fn from_values(grid: GridSpec, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len() * grid.n());
        VectorField { grid, values }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    /// Components at one node.
    pub fn at(&self, idx: usize) -> &[Complex64] {
        let n = self.grid.n();
        &self.values[idx * n..(idx + 1) * n]
    }
}

/// Field of n x n complex Hermitian matrices, row-major per node.
#[derive(Clone, Debug)]
pub struct HermitianMetricField {
    grid: GridSpec,
    dim: usize,
    values: Vec<Complex64>,
}

impl HermitianMetricField {
    pub fn zeros(grid: GridSpec, dim: usize) -> Self {
        HermitianMetricField {
            grid,
            dim,
            values: vec![Complex64::new(0.0, 0.0); grid.len() * dim * dim],
        }
    }

    pub fn constant_diagonal(grid: GridSpec, dim: usize, v: f64) -> Self {
        let mut f = Self::zeros(grid, dim);
        for idx in 0..grid.len() {
            for j in 0..dim {
                f.values[idx * dim * dim + j * dim + j] = Complex64::new(v, 0.0);
            }
        }
        f
    }

    /// Builds a field from a per-node callback returning a row-major matrix.
    /// The result is symmetrized exactly: entries below the diagonal are the
    /// conjugates of the entries above it, diagonals keep their real part.
    pub fn from_fn(grid: GridSpec, dim: usize, f: impl Fn(usize) -> Vec<Complex64>) -> Self {
        let mut out = Self::zeros(grid, dim);
        for idx in 0..grid.len() {
            let m = f(idx);
            debug_assert_eq!(m.len(), dim * dim);
            let dst = &mut out.values[idx * dim * dim..(idx + 1) * dim * dim];
            for j in 0..dim {
                dst[j * dim + j] = Complex64::new(m[j * dim + j].re, 0.0);
                for k in (j + 1)..dim {
                    dst[j * dim + k] = m[j * dim + k];
                    dst[k * dim + j] = m[j * dim + k].conj();
                }
            }
        }
        out
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, idx: usize) -> &[Complex64] {
        let d = self.dim * self.dim;
        &self.values[idx * d..(idx + 1) * d]
    }

    pub fn at_mut(&mut self, idx: usize) -> &mut [Complex64] {
        let d = self.dim * self.dim;
        &mut self.values[idx * d..(idx + 1) * d]
    }

    pub fn entry(&self, idx: usize, j: usize, k: usize) -> Complex64 {
        self.values[idx * self.dim * self.dim + j * self.dim + k]
    }

    /// Largest relative deviation from Hermitian symmetry over the field.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let m = self.at(idx);
            let scale = m
                .iter()
                .fold(1e-300_f64, |s, z| s.max(z.norm()))
                .max(1e-300);
            for j in 0..d {
                for k in j..d {
                    let dev = (m[j * d + k] - m[k * d + j].conj()).norm();
                    worst = worst.max(dev / scale);
                }
            }
        }
        worst
    }

    /// Pointwise determinant (real part; matrices are Hermitian).
    pub fn det_at(&self, idx: usize) -> f64 {
        let m = self.at(idx);
        match self.dim {
            1 => m[0].re,
            2 => (m[0] * m[3] - m[1] * m[2]).re,
            d => crate::hermitian::det_hermitian(m, d),
        }
    }

    pub fn is_positive_definite(&self) -> Result<()> {
        for idx in 0..self.grid.len() {
            let mut buf = self.at(idx).to_vec();
            if crate::hermitian::cholesky_in_place(&mut buf, self.dim).is_err() {
                let (eigs, _) = crate::hermitian::eigen_hermitian(self.at(idx), self.dim);
                return Err(Error::NotPositive {
                    point: idx,
                    min_eig: eigs[self.dim - 1],
                });
            }
        }
        Ok(())
    }
}

fn diff1_with(
    grid: &GridSpec,
    values: &[f64],
    axis: usize,
) -> Vec<f64> {
    let h = grid.spacing();
    let len = grid.len();
    let mut out = vec![0.0; len];
    match grid.order() {
        StencilOrder::Two => {
            let c = 1.0 / (2.0 * h);
            for idx in 0..len {
                let p = grid.shifted(idx, axis, 1);
                let m = grid.shifted(idx, axis, -1);
                out[idx] = (values[p] - values[m]) * c;
            }
        }
        StencilOrder::Four => {
            let c = 1.0 / (12.0 * h);
            for idx in 0..len {
                let p1 = grid.shifted(idx, axis, 1);
                let m1 = grid.shifted(idx, axis, -1);
                let p2 = grid.shifted(idx, axis, 2);
                let m2 = grid.shifted(idx, axis, -2);
                out[idx] = (8.0 * (values[p1] - values[m1]) - (values[p2] - values[m2])) * c;
            }
        }
    }
    out
}

/// Central first difference of a scalar field along one real axis.
pub fn axis_derivative(u: &ScalarField, axis: usize) -> ScalarField {
    let grid = u.grid();
    ScalarField {
        grid,
        values: diff1_with(&grid, u.values(), axis),
    }
}

/// Wirtinger gradient (d_1 u, ..., d_n u) with d_j = (d/dx_j - i d/dy_j)/2,
/// built from central differences.
pub fn complex_gradient(u: &ScalarField) -> VectorField {
    let grid = u.grid();
    let n = grid.n();
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len() * n];
    for j in 0..n {
        let dx = diff1_with(&grid, u.values(), 2 * j);
        let dy = diff1_with(&grid, u.values(), 2 * j + 1);
        for idx in 0..grid.len() {
            values[idx * n + j] = Complex64::new(dx[idx], -dy[idx]) * 0.5;
        }
    }
    VectorField { grid, values }
}

/// Complex Hessian H_{jk} = d_j dbar_k u, assembled by composing the same
/// first-difference operators as [`complex_gradient`]. The output is exactly
/// Hermitian: the diagonal is computed as the real combination
/// (Dx_j Dx_j + Dy_j Dy_j)/4 (the imaginary part cancels identically because
/// shifts commute) and lower entries mirror the conjugates of upper ones.
pub fn complex_hessian(u: &ScalarField) -> HermitianMetricField {
    let grid = u.grid();
    let n = grid.n();
    let len = grid.len();
    let axes = grid.axes();

    // First differences along every real axis.
    let mut d1: Vec<Vec<f64>> = Vec::with_capacity(axes);
    for a in 0..axes {
        d1.push(diff1_with(&grid, u.values(), a));
    }

    let second = |a: usize, b: usize| -> Vec<f64> { diff1_with(&grid, &d1[b], a) };

    let mut out = HermitianMetricField::zeros(grid, n);
    for j in 0..n {
        let xx = second(2 * j, 2 * j);
        let yy = second(2 * j + 1, 2 * j + 1);
        for idx in 0..len {
            out.values[idx * n * n + j * n + j] = Complex64::new(0.25 * (xx[idx] + yy[idx]), 0.0);
        }
        for k in (j + 1)..n {
            let xjxk = second(2 * j, 2 * k);
            let yjyk = second(2 * j + 1, 2 * k + 1);
            let xjyk = second(2 * j, 2 * k + 1);
            let yjxk = second(2 * j + 1, 2 * k);
            for idx in 0..len {
                let re = 0.25 * (xjxk[idx] + yjyk[idx]);
                let im = 0.25 * (xjyk[idx] - yjxk[idx]);
                let z = Complex64::new(re, im);
                out.values[idx * n * n + j * n + k] = z;
                out.values[idx * n * n + k * n + j] = z.conj();
            }
        }
    }
    out
}

/// Mean of `f` weighted by the volume density det(g):
/// sum f det(g) / sum det(g) over grid nodes (exact trapezoidal rule on a
/// uniform periodic grid).
pub fn volume_mean(f: &ScalarField, g: &HermitianMetricField) -> Result<f64> {
    f.grid().same_grid(&g.grid())?;
    let mut num = 0.0;
    let mut den = 0.0;
    for idx in 0..f.grid().len() {
        let w = g.det_at(idx);
        if w <= 0.0 {
            return Err(Error::NonPositiveMetric { point: idx, det: w });
        }
        num += f.values()[idx] * w;
        den += w;
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid1(n_pts: usize) -> GridSpec {
        GridSpec::new(1, n_pts, 1.0).unwrap()
    }

    #[test]
    fn grid_spec_validation() {
        assert!(GridSpec::new(3, 16, 1.0).is_err());
        assert!(GridSpec::new(1, 6, 1.0).is_err());
        assert!(GridSpec::new(1, 9, 1.0).is_err());
        assert!(GridSpec::new(2, 8, 1.0).is_ok());
    }

    #[test]
    fn shifted_wraps_periodically() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let idx = g.compose(&[0, 7, 3, 0]);
        assert_eq!(g.shifted(idx, 1, 1), g.compose(&[0, 0, 3, 0]));
        assert_eq!(g.shifted(idx, 0, -1), g.compose(&[7, 7, 3, 0]));
        assert_eq!(g.shifted(idx, 3, -2), g.compose(&[0, 7, 3, 6]));
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = grid1(16);
        let u = ScalarField::constant(g, 3.25);
        let grad = complex_gradient(&u);
        for idx in 0..g.len() {
            assert_eq!(grad.at(idx)[0], Complex64::new(0.0, 0.0));
        }
    }

    #[test]
    fn gradient_matches_closed_form_and_converges() {
        // u = sin(2 pi x): d_z u = pi cos(2 pi x).
        let err_for = |n_pts: usize| -> f64 {
            let g = grid1(n_pts);
            let u = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin());
            let grad = complex_gradient(&u);
            let mut worst: f64 = 0.0;
            for idx in 0..g.len() {
                let x = g.point(idx);
                let exact = Complex64::new(PI * (2.0 * PI * x[0]).cos(), 0.0);
                worst = worst.max((grad.at(idx)[0] - exact).norm());
            }
            worst
        };
        let e64 = err_for(64);
        let e128 = err_for(128);
        assert!(e64 <= 2e-2, "e64 = {e64}");
        assert!(e128 <= e64 / 3.5, "e64 = {e64}, e128 = {e128}");
    }

    #[test]
    fn gradient_order_four_is_more_accurate() {
        let g = grid1(32).with_order(StencilOrder::Four);
        let u = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        let grad = complex_gradient(&u);
        let mut worst: f64 = 0.0;
        for idx in 0..g.len() {
            let x = g.point(idx);
            let exact = Complex64::new(PI * (2.0 * PI * x[0]).cos(), 0.0);
            worst = worst.max((grad.at(idx)[0] - exact).norm());
        }
        assert!(worst < 2e-4, "order-4 sup error {worst}");
    }

    #[test]
    fn gradient_two_dim_smooth_surrogate() {
        // u = sin(2 pi x1) sin(2 pi y2) / (4 pi^2):
        //   d_1 u = cos(2 pi x1) sin(2 pi y2) / (4 pi)
        //   d_2 u = -i sin(2 pi x1) cos(2 pi y2) / (4 pi)
        let g = GridSpec::new(2, 32, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |x| {
            (2.0 * PI * x[0]).sin() * (2.0 * PI * x[3]).sin() / (4.0 * PI * PI)
        });
        let grad = complex_gradient(&u);
        let mut worst: f64 = 0.0;
        for idx in 0..g.len() {
            let x = g.point(idx);
            let (sx, cx) = (2.0 * PI * x[0]).sin_cos();
            let (sy, cy) = (2.0 * PI * x[3]).sin_cos();
            let d1 = Complex64::new(cx * sy / (4.0 * PI), 0.0);
            let d2 = Complex64::new(0.0, -sx * cy / (4.0 * PI));
            worst = worst.max((grad.at(idx)[0] - d1).norm());
            worst = worst.max((grad.at(idx)[1] - d2).norm());
        }
        assert!(worst < 2e-3, "sup error {worst}");
    }

    #[test]
    fn hessian_of_zero_is_zero() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let u = ScalarField::zeros(g);
        let h = complex_hessian(&u);
        assert!(h.values.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn hessian_single_mode_matches_quarter_laplacian() {
        // u = cos(2 pi x): dz dzbar u = Laplacian/4 = -pi^2 cos(2 pi x).
        let g = grid1(64);
        let u = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
        let h = complex_hessian(&u);
        let mut worst: f64 = 0.0;
        for idx in 0..g.len() {
            let x = g.point(idx);
            let exact = -PI * PI * (2.0 * PI * x[0]).cos();
            worst = worst.max((h.entry(idx, 0, 0).re - exact).abs());
        }
        assert!(worst < 4.0 * PI.powi(4) / 64.0 / 64.0, "sup error {worst}");
    }

    #[test]
    fn hessian_mixed_entry_matches_exact_discrete_value() {
        // u = sin(2 pi x1) sin(2 pi x2). The composed central differences act
        // mode-by-mode, so H_12 = (sin(2 pi h)/(2h))^2 cos(2 pi x1) cos(2 pi x2)
        // holds exactly (x2 is the real part of z^2, axis 2).
        let g = GridSpec::new(2, 16, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[2]).sin());
        let h = complex_hessian(&u);
        let hh = g.spacing();
        let s = (2.0 * PI * hh).sin() / (2.0 * hh);
        for idx in 0..g.len() {
            let x = g.point(idx);
            let exact = s * s * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[2]).cos();
            let got = h.entry(idx, 0, 1);
            assert!((got.re - exact).abs() < 1e-11, "re {} vs {}", got.re, exact);
            assert!(got.im.abs() < 1e-12);
        }
    }

    #[test]
    fn hessian_is_exactly_hermitian() {
        let g = GridSpec::new(2, 8, 1.0).unwrap();
        let u = ScalarField::from_fn(g, |x| {
            (2.0 * PI * x[0]).sin() * (2.0 * PI * x[3]).cos() + 0.3 * (2.0 * PI * (x[1] + x[2])).cos()
        });
        let h = complex_hessian(&u);
        for idx in 0..g.len() {
            for j in 0..2 {
                for k in 0..2 {
                    let a = h.entry(idx, j, k);
                    let b = h.entry(idx, k, j).conj();
                    assert_eq!(a, b, "entries must mirror bitwise");
                }
            }
        }
    }

    #[test]
    fn hessian_error_quarters_when_n_doubles() {
        let err_for = |n_pts: usize| -> f64 {
            let g = grid1(n_pts);
            let u = ScalarField::from_fn(g, |x| {
                (2.0 * PI * x[0]).cos() + 0.5 * (2.0 * PI * x[1]).sin()
            });
            let h = complex_hessian(&u);
            let mut worst: f64 = 0.0;
            for idx in 0..g.len() {
                let x = g.point(idx);
                let exact = -PI * PI * ((2.0 * PI * x[0]).cos() + 0.5 * (2.0 * PI * x[1]).sin());
                worst = worst.max((h.entry(idx, 0, 0).re - exact).abs());
            }
            worst
        };
        let e = err_for(32);
        let e2 = err_for(64);
        assert!(e2 <= e / 3.5, "e32 = {e}, e64 = {e2}");
    }

    #[test]
    fn discrete_adjointness_holds_to_rounding() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for &order in &[StencilOrder::Two, StencilOrder::Four] {
            let g = GridSpec::new(1, 16, 1.0).unwrap().with_order(order);
            let a = ScalarField::from_values(
                g,
                (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            let b = ScalarField::from_values(
                g,
                (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
            .unwrap();
            for axis in 0..g.axes() {
                let da = axis_derivative(&a, axis);
                let db = axis_derivative(&b, axis);
                let lhs: f64 = da.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
                let rhs: f64 = a.values().iter().zip(db.values()).map(|(x, y)| x * y).sum();
                assert!((lhs + rhs).abs() < 1e-12, "axis {axis}: {lhs} vs {}", -rhs);
            }
        }
    }

    #[test]
    fn volume_mean_exact_cases() {
        let g = grid1(32);
        let id = HermitianMetricField::constant_diagonal(g, 1, 1.0);

        let f3 = ScalarField::constant(g, 3.0);
        assert!((volume_mean(&f3, &id).unwrap() - 3.0).abs() < 1e-15);

        let fs = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        assert!(volume_mean(&fs, &id).unwrap().abs() < 1e-14);

        let fs2 = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).sin().powi(2));
        assert!((volume_mean(&fs2, &id).unwrap() - 0.5).abs() < 1e-14);

        // Weighting direction: det g = 1 + 0.5 cos should bias the mean of cos.
        let gg = HermitianMetricField::from_fn(g, 1, |idx| {
            let x = g.point(idx);
            vec![Complex64::new(1.0 + 0.5 * (2.0 * PI * x[0]).cos(), 0.0)]
        });
        let fc = ScalarField::from_fn(g, |x| (2.0 * PI * x[0]).cos());
        assert!((volume_mean(&fc, &gg).unwrap() - 0.25).abs() < 1e-13);
    }

    #[test]
    fn volume_mean_rejects_nonpositive_metric() {
        let g = grid1(8);
        let mut gg = HermitianMetricField::constant_diagonal(g, 1, 1.0);
        gg.at_mut(3)[0] = Complex64::new(-0.5, 0.0);
        let f = ScalarField::constant(g, 1.0);
        match volume_mean(&f, &gg) {
            Err(Error::NonPositiveMetric { point, .. }) => assert_eq!(point, 3),
            other => panic!("expected NonPositiveMetric, got {other:?}"),
        }
    }
}
