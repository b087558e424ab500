//! Problem construction: background curvature tensors F, base metrics g,
//! source terms phi, manufactured solutions, and seeded random fields for
//! property suites.
//!
//! Smooth periodic data enters as real trigonometric polynomials
//! (`FourierSpec`). Each listed mode (k, c) contributes
//! c e^{i theta} + conj(c) e^{-i theta} with theta = 2 pi k.x / period, so
//! every spec evaluates to a real field and has closed-form Wirtinger
//! derivatives. Generators therefore produce grid-refinable scenarios: the
//! same spec re-evaluated at a finer N describes the same continuum problem.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curvature::{self, NakanoTensorField};
use crate::error::{Error, Result};
use crate::grid::{complex_hessian, GridSpec, HermitianMetricField, ScalarField, VectorField};

type C64 = Complex64;

/// One Fourier mode: integer wave vector over the 2n real axes and a complex
/// amplitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub k: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

impl FourierMode {
    pub fn amp(&self) -> C64 {
        C64::new(self.re, self.im)
    }
}

/// A real trigonometric polynomial given by its positive-frequency modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct FourierSpec {
    pub modes: Vec<FourierMode>,
}

impl FourierSpec {
    pub fn empty() -> Self {
        FourierSpec { modes: Vec::new() }
    }

    /// A cos(2 pi freq x_axis) as a single mode of amplitude a/2.
    pub fn cosine(axes: usize, axis: usize, freq: i64, a: f64) -> Self {
        let mut k = vec![0i64; axes];
        k[axis] = freq;
        FourierSpec {
            modes: vec![FourierMode { k, re: a / 2.0, im: 0.0 }],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Resolution safety: every mode must satisfy |k|_inf <= N/4 on the
    /// target grid, and mode vectors must have the right number of axes.
    /// Listing both k and -k (or a duplicate k) is rejected, since each
    /// listed mode already contributes its conjugate pair.
    pub fn validate_for(&self, grid: &GridSpec) -> Result<()> {
        let kmax = (grid.points_per_axis() / 4) as i64;
        let mut seen: Vec<Vec<i64>> = Vec::new();
        for m in &self.modes {
            if m.k.len() != grid.axes() {
                return Err(Error::schema(
                    "modes.k",
                    format!("wave vector {:?} has {} axes, grid has {}", m.k, m.k.len(), grid.axes()),
                ));
            }
            if m.k.iter().any(|&ki| ki.abs() > kmax) {
                return Err(Error::UnresolvedMode {
                    mode: m.k.clone(),
                    n_axis: grid.points_per_axis(),
                });
            }
            if !m.re.is_finite() || !m.im.is_finite() {
                return Err(Error::schema("modes.amp", "non-finite amplitude".to_string()));
            }
            let neg: Vec<i64> = m.k.iter().map(|&ki| -ki).collect();
            if seen.iter().any(|s| *s == m.k || *s == neg) {
                return Err(Error::schema(
                    "modes.k",
                    format!("mode {:?} duplicates an earlier mode or its conjugate pair", m.k),
                ));
            }
            seen.push(m.k.clone());
        }
        Ok(())
    }

    fn phases(&self, grid: &GridSpec, idx: usize) -> impl Iterator<Item = (C64, C64)> + '_ {
        let x = grid.point(idx);
        let period = grid.period();
        let axes = grid.axes();
        self.modes.iter().map(move |m| {
            let mut theta = 0.0;
            for a in 0..axes {
                theta += m.k[a] as f64 * x[a];
            }
            theta *= std::f64::consts::TAU / period;
            (m.amp(), C64::new(0.0, theta).exp())
        })
    }

    pub fn eval_at(&self, grid: &GridSpec, idx: usize) -> f64 {
        self.phases(grid, idx)
            .map(|(c, e)| 2.0 * (c * e).re)
            .sum()
    }

    /// Evaluates the polynomial exactly at grid nodes.
    pub fn eval(&self, grid: GridSpec) -> ScalarField {
        let values = (0..grid.len()).map(|i| self.eval_at(&grid, i)).collect();
        ScalarField::from_values(grid, values).expect("trig polynomial values are finite")
    }

    /// mu_j = (pi/period) (k_{y_j} + i k_{x_j}): the d_j symbol of e^{i theta}.
    fn mu(&self, m: &FourierMode, n: usize, period: f64) -> Vec<C64> {
        (0..n)
            .map(|j| {
                C64::new(m.k[2 * j + 1] as f64, m.k[2 * j] as f64) * (std::f64::consts::PI / period)
            })
            .collect()
    }

    /// Exact Wirtinger gradient of the polynomial, sampled on the grid.
    pub fn gradient_exact(&self, grid: GridSpec) -> VectorField {
        let n = grid.n();
        let mut out = vec![C64::new(0.0, 0.0); grid.len() * n];
        for (m, mode) in self.modes.iter().enumerate() {
            let mu = self.mu(mode, n, grid.period());
            for idx in 0..grid.len() {
                let (c, e) = self.phases(&grid, idx).nth(m).unwrap();
                let osc = C64::new(0.0, 2.0 * (c * e).im); // c e - conj(c e)
                for j in 0..n {
                    out[idx * n + j] += mu[j] * osc;
                }
            }
        }
        VectorField::from_values(grid, out)
    }

    /// Exact complex Hessian of the polynomial, sampled on the grid:
    /// H_{jl} = - mu_j conj(mu_l) * field per mode.
    pub fn hessian_exact(&self, grid: GridSpec) -> HermitianMetricField {
        let n = grid.n();
        let mus: Vec<Vec<C64>> = self
            .modes
            .iter()
            .map(|m| self.mu(m, n, grid.period()))
            .collect();
        HermitianMetricField::from_fn(grid, n, |idx| {
            let mut h = vec![C64::new(0.0, 0.0); n * n];
            for (w, (c, e)) in self.phases(&grid, idx).enumerate() {
                let f = 2.0 * (c * e).re;
                for j in 0..n {
                    for l in 0..n {
                        h[j * n + l] -= mus[w][j] * mus[w][l].conj() * f;
                    }
                }
            }
            h
        })
    }
}

/// Evaluates a `FourierSpec` on a grid; the spec operation behind scenario
/// construction. Fails if a mode is unresolved.
pub fn build_field(spec: &FourierSpec, grid: GridSpec) -> Result<ScalarField> {
    spec.validate_for(&grid)?;
    Ok(spec.eval(grid))
}

/// Default Nakano-positivity floor enforced at scenario construction.
pub const DEFAULT_MARGIN: f64 = 1e-3;

/// Full problem statement: geometry, background tensor F, base metric g,
/// source phi, lambda, and rank.
#[derive(Clone, Debug)]
pub struct Scenario {
    grid: GridSpec,
    r: usize,
    f: NakanoTensorField,
    g: HermitianMetricField,
    phi: ScalarField,
    lambda: f64,
    margin: f64,
    /// Combinatorial constant relating omega^n to the coordinate volume
    /// form; fixed to n! and shared by every generator, the solver and the
    /// oracle, so all comparisons are convention-independent.
    volume_factor: f64,
    /// sup norm of g - (1/r) tr_E F; zero for generator-coupled scenarios.
    omega_coupling_gap: f64,
    /// Ground truth for manufactured scenarios.
    u_star: Option<ScalarField>,
}

impl Scenario {
    pub fn new(
        grid: GridSpec,
        r: usize,
        f: NakanoTensorField,
        g: HermitianMetricField,
        phi: ScalarField,
        lambda: f64,
        margin: f64,
    ) -> Result<Self> {
        if r == 0 {
            return Err(Error::schema("rank", "rank must be >= 1"));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::schema("lambda", format!("lambda must be >= 0, got {lambda}")));
        }
        if !(margin > 0.0) {
            return Err(Error::schema("margin", format!("margin must be > 0, got {margin}")));
        }
        f.grid().same_grid(&grid)?;
        g.grid().same_grid(&grid)?;
        phi.grid().same_grid(&grid)?;
        if f.rank() != r {
            return Err(Error::ShapeMismatch(format!(
                "tensor rank {} vs scenario rank {r}",
                f.rank()
            )));
        }
        if f.hermitian_defect() > 1e-13 {
            return Err(Error::ShapeMismatch(format!(
                "background tensor Hermitian defect {:.3e}",
                f.hermitian_defect()
            )));
        }
        f.require_nakano_positive(margin)?;
        g.is_positive_definite()?;

        let trace = bundle_trace(&f);
        let mut gap: f64 = 0.0;
        for idx in 0..grid.len() {
            for j in 0..grid.n() {
                for k in 0..grid.n() {
                    let d = g.entry(idx, j, k) - trace.entry(idx, j, k) / r as f64;
                    gap = gap.max(d.norm());
                }
            }
        }

        let volume_factor = match grid.n() {
            1 => 1.0,
            2 => 2.0,
            _ => unreachable!("grid construction limits n to 1 or 2"),
        };

        Ok(Scenario {
            grid,
            r,
            f,
            g,
            phi,
            lambda,
            margin,
            volume_factor,
            omega_coupling_gap: gap,
            u_star: None,
        })
    }

    pub fn with_u_star(mut self, u_star: ScalarField) -> Self {
        self.u_star = Some(u_star);
        self
    }

    pub fn with_phi(mut self, phi: ScalarField) -> Result<Self> {
        phi.grid().same_grid(&self.grid)?;
        self.phi = phi;
        Ok(self)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn background(&self) -> &NakanoTensorField {
        &self.f
    }

    pub fn metric(&self) -> &HermitianMetricField {
        &self.g
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn volume_factor(&self) -> f64 {
        self.volume_factor
    }

    pub fn omega_coupling_gap(&self) -> f64 {
        self.omega_coupling_gap
    }

    pub fn u_star(&self) -> Option<&ScalarField> {
        self.u_star.as_ref()
    }

    /// Output gauge: lambda = 0 solutions are normalized to sup u = 0.
    pub fn normalization(&self) -> &'static str {
        if self.lambda == 0.0 {
            "sup_zero"
        } else {
            "none"
        }
    }

    /// Pointwise log of the volume density n! det g.
    pub fn log_volume_density(&self) -> ScalarField {
        let vf = self.volume_factor;
        let values = (0..self.grid.len())
            .map(|idx| (vf * self.g.det_at(idx)).ln())
            .collect();
        ScalarField::from_values(self.grid, values).expect("validated metric gives finite density")
    }
}

/// Bundle partial trace of a (non-inverted) tensor field: the n x n field
/// t_ij = Sum_alpha F[(i,alpha),(j,alpha)].
pub fn bundle_trace(f: &NakanoTensorField) -> HermitianMetricField {
    let (n, r, d) = (f.base_dim(), f.rank(), f.dim());
    HermitianMetricField::from_fn(f.grid(), n, |idx| {
        let m = f.at(idx);
        let mut t = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let mut s = C64::new(0.0, 0.0);
                for alpha in 0..r {
                    s += m[(i * r + alpha) * d + (j * r + alpha)];
                }
                t[i * n + j] = s;
            }
        }
        t
    })
}

/// Whether a manufactured source is built from exact derivatives of the
/// ground-truth potential (the discrete solution then converges to it at the
/// stencil order) or from the grid Hessian (the ground truth then solves the
/// discrete equation to rounding).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Construction {
    #[default]
    Analytic,
    Discrete,
}

/// Parameters of the diagonal twisted-torus generator: F is block-diagonal
/// in the fibre index with blocks tau Id + Hess(psi_alpha), and the base
/// metric is coupled as g = (1/r) tr_E F.
#[derive(Clone, Debug)]
pub struct DiagonalTorus {
    pub n: usize,
    pub r: usize,
    pub points_per_axis: usize,
    pub period: f64,
    pub tau: f64,
    pub psis: Vec<FourierSpec>,
    pub lambda: f64,
    pub margin: f64,
}

impl DiagonalTorus {
    pub fn flat(n: usize, r: usize, points_per_axis: usize, tau: f64, lambda: f64) -> Self {
        DiagonalTorus {
            n,
            r,
            points_per_axis,
            period: 1.0,
            tau,
            psis: vec![FourierSpec::empty(); r],
            lambda,
            margin: DEFAULT_MARGIN,
        }
    }

    fn background(&self, grid: GridSpec) -> Result<(NakanoTensorField, HermitianMetricField)> {
        if self.psis.len() != self.r {
            return Err(Error::schema(
                "background.psi",
                format!("need {} fibre potentials, got {}", self.r, self.psis.len()),
            ));
        }
        for psi in &self.psis {
            psi.validate_for(&grid)?;
        }
        let n = grid.n();
        let blocks: Vec<HermitianMetricField> = self
            .psis
            .iter()
            .map(|psi| psi.hessian_exact(grid))
            .collect();
        let (r, d) = (self.r, n * self.r);
        let tau = self.tau;
        let f = NakanoTensorField::from_fn(grid, r, |idx| {
            let mut m = vec![C64::new(0.0, 0.0); d * d];
            for (alpha, block) in blocks.iter().enumerate() {
                for i in 0..n {
                    for j in 0..n {
                        let mut v = block.entry(idx, i, j);
                        if i == j {
                            v += tau;
                        }
                        m[(i * r + alpha) * d + (j * r + alpha)] = v;
                    }
                }
            }
            m
        });
        // Coupling g = (1/r) tr_E F holds exactly by construction.
        let trace = bundle_trace(&f);
        let g = HermitianMetricField::from_fn(grid, n, |idx| {
            (0..n * n)
                .map(|e| trace.at(idx)[e] / r as f64)
                .collect()
        });
        Ok((f, g))
    }

    /// Scenario with an explicit source term.
    pub fn scenario(&self, phi_spec: &FourierSpec) -> Result<Scenario> {
        let grid = GridSpec::new(self.n, self.points_per_axis, self.period)?;
        let (f, g) = self.background(grid)?;
        let phi = build_field(phi_spec, grid)?;
        Scenario::new(grid, self.r, f, g, phi, self.lambda, self.margin)
    }

    /// Scenario whose source is reverse-engineered from a ground-truth
    /// potential, so the equation has a known solution.
    pub fn manufactured(&self, u_star_spec: &FourierSpec, construction: Construction) -> Result<Scenario> {
        let grid = GridSpec::new(self.n, self.points_per_axis, self.period)?;
        let (f, g) = self.background(grid)?;
        u_star_spec.validate_for(&grid)?;
        let u_star = u_star_spec.eval(grid);
        let zero = ScalarField::zeros(grid);
        let sc = Scenario::new(grid, self.r, f, g, zero, self.lambda, self.margin)?;
        let phi = match construction {
            Construction::Discrete => manufacture_phi(&sc, &u_star)?,
            Construction::Analytic => {
                let hu = u_star_spec.hessian_exact(grid);
                manufacture_phi_from_hessian(&sc, &u_star, &hu)?
            }
        };
        Ok(sc.with_phi(phi)?.with_u_star(u_star))
    }
}

/// Reverse-engineers the source:
/// phi = (1/r) log det(F + Hess u* (x) Id) - log(n! det g) - lambda r u*,
/// with the grid Hessian, so u* solves the discrete equation exactly.
pub fn manufacture_phi(sc: &Scenario, u_star: &ScalarField) -> Result<ScalarField> {
    let hu = complex_hessian(u_star);
    manufacture_phi_from_hessian(sc, u_star, &hu)
}

fn manufacture_phi_from_hessian(
    sc: &Scenario,
    u_star: &ScalarField,
    hu: &HermitianMetricField,
) -> Result<ScalarField> {
    u_star.grid().same_grid(&sc.grid())?;
    let theta = curvature::assemble_theta(sc.background(), hu)?;
    theta
        .require_nakano_positive(0.0)
        .map_err(|e| match e {
            Error::NotNakanoPositive { point, min_eig } => Error::NotNakanoPositive { point, min_eig },
            other => other,
        })?;
    let logdet = curvature::log_det_power(&theta)?;
    let lvol = sc.log_volume_density();
    Ok(logdet
        .sub(&lvol)
        .sub(&u_star.scale(sc.lambda() * sc.rank() as f64)))
}

/// Smooth band-limited Hermitian field with min eigenvalue pinned at
/// `margin`; bitwise reproducible from the seed.
pub fn random_nakano_field(
    grid: GridSpec,
    r: usize,
    seed: u64,
    margin: f64,
    amplitude: f64,
) -> NakanoTensorField {
    assert!(margin > 0.0, "margin must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.n() * r;
    let axes = grid.axes();

    // Unit wave vectors plus one mixed mode: band-limited on any valid grid.
    let mut waves: Vec<Vec<i64>> = (0..axes)
        .map(|a| {
            let mut k = vec![0i64; axes];
            k[a] = 1;
            k
        })
        .collect();
    let mut mixed = vec![0i64; axes];
    mixed[0] = 1;
    mixed[axes - 1] = -1;
    waves.push(mixed);

    // Complex matrix coefficient per wave; C e^{i theta} + C* e^{-i theta}
    // is Hermitian at every node.
    let coeffs: Vec<Vec<C64>> = waves
        .iter()
        .map(|_| {
            (0..d * d)
                .map(|_| {
                    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amplitude
                })
                .collect()
        })
        .collect();

    let tau = std::f64::consts::TAU / grid.period();
    let base = NakanoTensorField::from_fn(grid, r, |idx| {
        let x = grid.point(idx);
        let mut m = vec![C64::new(0.0, 0.0); d * d];
        for (w, k) in waves.iter().enumerate() {
            let mut theta = 0.0;
            for a in 0..axes {
                theta += k[a] as f64 * x[a];
            }
            let e = C64::new(0.0, tau * theta).exp();
            let c = &coeffs[w];
            for i in 0..d {
                for j in 0..d {
                    let z = c[i * d + j] * e;
                    m[i * d + j] += z + (c[j * d + i] * e).conj();
                }
            }
        }
        m
    });

    let min = curvature::min_nakano_eigenvalue(&base);
    let shift = margin - min;
    let mut out = base;
    for idx in 0..grid.len() {
        let mat = out.at_mut(idx);
        for a in 0..d {
            mat[a * d + a] += shift;
        }
    }
    out
}

/// Seeded band-limited real polynomial (|k|_inf <= 2) for probe directions,
/// perturbations and generic sources.
pub fn random_bandlimited_spec(axes: usize, seed: u64, amplitude: f64) -> FourierSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    let mut waves: Vec<Vec<i64>> = Vec::new();
    for a in 0..axes {
        let mut k = vec![0i64; axes];
        k[a] = 1;
        waves.push(k.clone());
        k[a] = 2;
        waves.push(k);
    }
    let mut mixed = vec![0i64; axes];
    mixed[0] = 1;
    mixed[axes - 1] = 1;
    waves.push(mixed);
    for k in waves {
        modes.push(FourierMode {
            k,
            re: rng.gen_range(-0.5..0.5) * amplitude,
            im: rng.gen_range(-0.5..0.5) * amplitude,
        });
    }
    FourierSpec { modes }
}

/// Generic scenario with a seeded random Nakano-positive background, the
/// coupled metric g = (1/r) tr_E F, and a small band-limited source.
pub fn random_scenario(
    n: usize,
    r: usize,
    points_per_axis: usize,
    lambda: f64,
    seed: u64,
) -> Result<Scenario> {
    let grid = GridSpec::new(n, points_per_axis, 1.0)?;
    let f = random_nakano_field(grid, r, seed, 0.5, 0.08);
    let trace = bundle_trace(&f);
    let g = HermitianMetricField::from_fn(grid, n, |idx| {
        (0..n * n).map(|e| trace.at(idx)[e] / r as f64).collect()
    });
    let phi_spec = random_bandlimited_spec(grid.axes(), seed ^ 0x5eed, 0.2);
    let phi = build_field(&phi_spec, grid)?;
    Scenario::new(grid, r, f, g, phi, lambda, DEFAULT_MARGIN)
}
