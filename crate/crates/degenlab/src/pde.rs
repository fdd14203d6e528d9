//! Grid solvers for the degenerate equation `sigma(|Du + xi|) Lap(u) = f`
//! on the unit interval/disk, plus the scale instrumentation: minimax
//! tangent-plane fits on balls `B_{r^n}`, Holder seminorms, and the
//! normalization that brings a problem into the small-source regime.
//!
//! The solver is a damped Picard iteration: freeze the gradient, divide the
//! source by the regularized law, solve the resulting Poisson problem, and
//! under-relax. Grids are cell-centered so no node sits exactly on the
//! symmetry point of an even solution, where the frozen coefficient would
//! degenerate to the floor.

use crate::minimax::{minimax_affine_1d, minimax_affine_nd};
use crate::modulus::{DegeneracyLaw, ModulusError};
use std::sync::Arc;

pub type FieldFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum PdeError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("Picard iteration did not converge in {iterations} steps (last update {last_diff:.3e}, residual {residual:.3e})")]
    NonConvergence { iterations: usize, last_diff: f64, residual: f64 },
    #[error("ball of radius {radius} holds only {got} grid points (need at least 5)")]
    TooFewPoints { radius: f64, got: usize },
    #[error(transparent)]
    Modulus(#[from] ModulusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Dimension {
    One,
    Two,
}

/// A degenerate problem on the unit ball with Dirichlet data.
#[derive(Clone)]
pub struct ProblemSpec {
    pub dimension: Dimension,
    pub sigma: DegeneracyLaw,
    pub source: FieldFn,
    /// Gradient shift: the law is evaluated at `|Du + xi|`.
    pub xi: Vec<f64>,
    /// Dirichlet data, evaluated at boundary points.
    pub boundary: FieldFn,
    /// Target mesh spacing.
    pub mesh: f64,
    /// Regularization floor applied to the law before dividing.
    pub floor: f64,
    /// Picard under-relaxation factor in (0, 1].
    pub relax: f64,
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("dimension", &self.dimension)
            .field("xi", &self.xi)
            .field("mesh", &self.mesh)
            .field("floor", &self.floor)
            .field("relax", &self.relax)
            .finish()
    }
}

impl ProblemSpec {
    pub fn one_d(
        sigma: DegeneracyLaw,
        source: impl Fn(f64) -> f64 + Send + Sync + 'static,
        xi: f64,
        left: f64,
        right: f64,
        mesh: f64,
    ) -> Result<Self, PdeError> {
        if !(mesh > 0.0 && mesh < 1.0) {
            return Err(PdeError::Invalid(format!("mesh must lie in (0, 1), got {mesh}")));
        }
        Ok(Self {
            dimension: Dimension::One,
            sigma,
            source: Arc::new(move |x: &[f64]| source(x[0])),
            xi: vec![xi],
            boundary: Arc::new(move |x: &[f64]| if x[0] < 0.0 { left } else { right }),
            mesh,
            floor: 1e-8,
            relax: 0.5,
        })
    }

    pub fn two_d(
        sigma: DegeneracyLaw,
        source: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        xi: [f64; 2],
        boundary: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        mesh: f64,
    ) -> Result<Self, PdeError> {
        if !(mesh > 0.0 && mesh < 1.0) {
            return Err(PdeError::Invalid(format!("mesh must lie in (0, 1), got {mesh}")));
        }
        Ok(Self {
            dimension: Dimension::Two,
            sigma,
            source: Arc::new(move |x: &[f64]| source(x[0], x[1])),
            xi: xi.to_vec(),
            boundary: Arc::new(move |x: &[f64]| boundary(x[0], x[1])),
            mesh,
            floor: 1e-8,
            relax: 0.5,
        })
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = floor;
        self
    }

    pub fn with_relax(mut self, relax: f64) -> Self {
        self.relax = relax;
        self
    }

    /// Regularized law value at gradient magnitude `t`: the law capped at
    /// its domain end and floored from below.
    fn sigma_reg(&self, t: f64) -> Result<(f64, bool), PdeError> {
        let end = self.sigma.sigma().domain_end();
        let tt = t.min(end);
        let raw = if tt <= 0.0 { 0.0 } else { self.sigma.sigma().eval(tt)? };
        if raw < self.floor {
            Ok((self.floor, true))
        } else {
            Ok((raw, false))
        }
    }

    fn source_sup(&self) -> f64 {
        // sampled bound on |f| over the ball
        let mut sup = 0.0f64;
        let n = 512;
        match self.dimension {
            Dimension::One => {
                for i in 0..n {
                    let x = -1.0 + 2.0 * (i as f64 + 0.5) / n as f64;
                    sup = sup.max((self.source)(&[x]).abs());
                }
            }
            Dimension::Two => {
                let m = 64;
                for i in 0..m {
                    for j in 0..m {
                        let x = -1.0 + 2.0 * (i as f64 + 0.5) / m as f64;
                        let y = -1.0 + 2.0 * (j as f64 + 0.5) / m as f64;
                        if x * x + y * y < 1.0 {
                            sup = sup.max((self.source)(&[x, y]).abs());
                        }
                    }
                }
            }
        }
        sup
    }
}

/// Solver controls.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Stop when the sup-norm Picard update falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Inner linear-solver tolerance (2-D only).
    pub lin_tol: f64,
    pub lin_max_sweeps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50_000, lin_tol: 1e-11, lin_max_sweeps: 20_000 }
    }
}

/// A discrete solution on the cell-centered grid.
#[derive(Debug, Clone)]
pub struct GridSolution {
    pub dimension: Dimension,
    /// Node coordinates (second entry zero in one dimension).
    pub points: Vec<[f64; 2]>,
    pub values: Vec<f64>,
    /// Effective spacing.
    pub h: f64,
    /// Sup-norm of `sigma_reg(|Du + xi|) Lap u - f` over interior nodes.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Regularization floor that was applied to the law.
    pub regularization_floor: f64,
    /// Number of nodes where the law was floored in the final iterate.
    pub floor_activations: usize,
}

impl GridSolution {
    /// Samples a closed-form function on the 1-D cell-centered grid; used to
    /// feed oracles to the fit instrumentation.
    pub fn sample_1d(f: impl Fn(f64) -> f64, mesh: f64) -> Self {
        let n = (2.0 / mesh).round().max(2.0) as usize;
        let h = 2.0 / n as f64;
        let mut points = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            let x = -1.0 + (i as f64 + 0.5) * h;
            points.push([x, 0.0]);
            values.push(f(x));
        }
        Self {
            dimension: Dimension::One,
            points,
            values,
            h,
            residual_norm: 0.0,
            iterations: 0,
            regularization_floor: 0.0,
            floor_activations: 0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Sup difference against a closed form.
    pub fn max_error(&self, exact: impl Fn(&[f64]) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.values)
            .fold(0.0f64, |m, (p, &v)| m.max((v - exact(&p[..])).abs()))
    }
}

fn thomas(diag: &[f64], off: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = off / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off * c[i - 1];
        c[i] = off / m;
        d[i] = (rhs[i] - off * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

struct Grid1d {
    n: usize,
    h: f64,
    xs: Vec<f64>,
    gl: f64,
    gr: f64,
    f: Vec<f64>,
}

impl Grid1d {
    fn build(p: &ProblemSpec) -> Self {
        let n = (2.0 / p.mesh).round().max(4.0) as usize;
        let h = 2.0 / n as f64;
        let xs: Vec<f64> = (0..n).map(|i| -1.0 + (i as f64 + 0.5) * h).collect();
        let gl = (p.boundary)(&[-1.0]);
        let gr = (p.boundary)(&[1.0]);
        let f: Vec<f64> = xs.iter().map(|&x| (p.source)(&[x])).collect();
        Self { n, h, xs, gl, gr, f }
    }

    /// Centered gradient with reflected Dirichlet ghosts.
    fn gradient(&self, u: &[f64], i: usize) -> f64 {
        let h2 = 2.0 * self.h;
        if i == 0 {
            (u[1] + u[0] - 2.0 * self.gl) / h2
        } else if i == self.n - 1 {
            (2.0 * self.gr - u[self.n - 1] - u[self.n - 2]) / h2
        } else {
            (u[i + 1] - u[i - 1]) / h2
        }
    }

    fn laplacian(&self, u: &[f64], i: usize) -> f64 {
        let hh = self.h * self.h;
        if i == 0 {
            (u[1] - 3.0 * u[0] + 2.0 * self.gl) / hh
        } else if i == self.n - 1 {
            (2.0 * self.gr - 3.0 * u[self.n - 1] + u[self.n - 2]) / hh
        } else {
            (u[i + 1] - 2.0 * u[i] + u[i - 1]) / hh
        }
    }

    /// Direct solve of `Lap u = g` with the Dirichlet closure.
    fn poisson(&self, g: &[f64]) -> Vec<f64> {
        let hh = self.h * self.h;
        let mut diag = vec![-2.0 / hh; self.n];
        diag[0] = -3.0 / hh;
        diag[self.n - 1] = -3.0 / hh;
        let mut rhs = g.to_vec();
        rhs[0] -= 2.0 * self.gl / hh;
        rhs[self.n - 1] -= 2.0 * self.gr / hh;
        thomas(&diag, 1.0 / hh, &rhs)
    }
}

fn solve_1d(p: &ProblemSpec, opt: &SolveOptions) -> Result<GridSolution, PdeError> {
    let grid = Grid1d::build(p);
    let xi = p.xi[0];
    // bootstrap with the uniformly elliptic problem so gradients are seeded
    let mut u = grid.poisson(&grid.f);
    let mut last_diff = f64::INFINITY;
    let mut iterations = 0;
    let mut floor_hits = 0usize;
    while iterations < opt.max_iter {
        iterations += 1;
        let mut g = vec![0.0; grid.n];
        floor_hits = 0;
        for (i, gi) in g.iter_mut().enumerate() {
            let grad = grid.gradient(&u, i) + xi;
            let (s, floored) = p.sigma_reg(grad.abs())?;
            if floored {
                floor_hits += 1;
            }
            *gi = grid.f[i] / s;
        }
        let fresh = grid.poisson(&g);
        last_diff = fresh
            .iter()
            .zip(&u)
            .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
        for i in 0..grid.n {
            u[i] += p.relax * (fresh[i] - u[i]);
        }
        if last_diff < opt.tol {
            break;
        }
    }
    // residual with the frozen coefficient rebuilt from the final iterate
    let mut residual = 0.0f64;
    for i in 0..grid.n {
        let grad = grid.gradient(&u, i) + xi;
        let (s, _) = p.sigma_reg(grad.abs())?;
        residual = residual.max((s * grid.laplacian(&u, i) - grid.f[i]).abs());
    }
    if last_diff >= opt.tol {
        return Err(PdeError::NonConvergence { iterations, last_diff, residual });
    }
    Ok(GridSolution {
        dimension: Dimension::One,
        points: grid.xs.iter().map(|&x| [x, 0.0]).collect(),
        values: u,
        h: grid.h,
        residual_norm: residual,
        iterations,
        regularization_floor: p.floor,
        floor_activations: floor_hits,
    })
}

struct Grid2d {
    side: usize,
    h: f64,
    coords: Vec<[f64; 2]>,
    /// Index into the unknown vector, usize::MAX outside the disk.
    index: Vec<usize>,
    inside: Vec<usize>,
    f: Vec<f64>,
    boundary_cache: Vec<f64>,
    boundary: FieldFn,
}

impl Grid2d {
    fn build(p: &ProblemSpec) -> Self {
        let side = (2.0 / p.mesh).round().max(8.0) as usize;
        let h = 2.0 / side as f64;
        let mut coords = Vec::with_capacity(side * side);
        let mut index = vec![usize::MAX; side * side];
        let mut inside = Vec::new();
        for j in 0..side {
            for i in 0..side {
                let x = -1.0 + (i as f64 + 0.5) * h;
                let y = -1.0 + (j as f64 + 0.5) * h;
                coords.push([x, y]);
                if x * x + y * y < 1.0 {
                    index[j * side + i] = inside.len();
                    inside.push(j * side + i);
                }
            }
        }
        let f: Vec<f64> = inside.iter().map(|&c| (p.source)(&coords[c][..])).collect();
        // nearest-boundary projection for every cell outside the disk
        let boundary_cache: Vec<f64> = coords
            .iter()
            .map(|&[x, y]| {
                let norm = (x * x + y * y).sqrt().max(1e-12);
                (p.boundary)(&[x / norm, y / norm])
            })
            .collect();
        Self { side, h, coords, index, inside, f, boundary_cache, boundary: p.boundary.clone() }
    }

    fn neighbor_value(&self, u: &[f64], cell: usize, di: i64, dj: i64) -> f64 {
        let side = self.side as i64;
        let i = (cell % self.side) as i64 + di;
        let j = (cell / self.side) as i64 + dj;
        if i < 0 || j < 0 || i >= side || j >= side {
            // project the out-of-square cell center onto the circle
            let x = -1.0 + (i as f64 + 0.5) * self.h;
            let y = -1.0 + (j as f64 + 0.5) * self.h;
            let norm = (x * x + y * y).sqrt();
            return (self.boundary)(&[x / norm, y / norm]);
        }
        let c = (j * side + i) as usize;
        match self.index[c] {
            usize::MAX => self.boundary_cache[c],
            k => u[k],
        }
    }

    fn gradient(&self, u: &[f64], cell: usize) -> [f64; 2] {
        let h2 = 2.0 * self.h;
        let e = self.neighbor_value(u, cell, 1, 0);
        let w = self.neighbor_value(u, cell, -1, 0);
        let n = self.neighbor_value(u, cell, 0, 1);
        let s = self.neighbor_value(u, cell, 0, -1);
        [(e - w) / h2, (n - s) / h2]
    }

    fn laplacian(&self, u: &[f64], cell: usize) -> f64 {
        let hh = self.h * self.h;
        let c = u[self.index[cell]];
        let e = self.neighbor_value(u, cell, 1, 0);
        let w = self.neighbor_value(u, cell, -1, 0);
        let n = self.neighbor_value(u, cell, 0, 1);
        let s = self.neighbor_value(u, cell, 0, -1);
        (e + w + n + s - 4.0 * c) / hh
    }

    /// SOR sweeps for `Lap u = g` on the masked disk.
    fn poisson(&self, g: &[f64], start: &[f64], tol: f64, max_sweeps: usize) -> Vec<f64> {
        let mut u = start.to_vec();
        let hh = self.h * self.h;
        let omega = 1.8;
        for _ in 0..max_sweeps {
            let mut max_change = 0.0f64;
            for color in 0..2 {
                for (k, &cell) in self.inside.iter().enumerate() {
                    let i = cell % self.side;
                    let j = cell / self.side;
                    if (i + j) % 2 != color {
                        continue;
                    }
                    let e = self.neighbor_value(&u, cell, 1, 0);
                    let w = self.neighbor_value(&u, cell, -1, 0);
                    let n = self.neighbor_value(&u, cell, 0, 1);
                    let s = self.neighbor_value(&u, cell, 0, -1);
                    let fresh = 0.25 * (e + w + n + s - hh * g[k]);
                    let delta = fresh - u[k];
                    u[k] += omega * delta;
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < tol {
                break;
            }
        }
        u
    }
}

fn solve_2d(p: &ProblemSpec, opt: &SolveOptions) -> Result<GridSolution, PdeError> {
    let grid = Grid2d::build(p);
    let m = grid.inside.len();
    if m == 0 {
        return Err(PdeError::Invalid("mesh too coarse: no cells inside the disk".into()));
    }
    let mut u = grid.poisson(&grid.f, &vec![0.0; m], opt.lin_tol, opt.lin_max_sweeps);
    let mut iterations = 0;
    let mut last_diff = f64::INFINITY;
    let mut floor_hits = 0usize;
    while iterations < opt.max_iter {
        iterations += 1;
        let mut g = vec![0.0; m];
        floor_hits = 0;
        for (k, &cell) in grid.inside.iter().enumerate() {
            let gr = grid.gradient(&u, cell);
            let mag = ((gr[0] + p.xi[0]).powi(2) + (gr[1] + p.xi[1]).powi(2)).sqrt();
            let (s, floored) = p.sigma_reg(mag)?;
            if floored {
                floor_hits += 1;
            }
            g[k] = grid.f[k] / s;
        }
        let fresh = grid.poisson(&g, &u, opt.lin_tol, opt.lin_max_sweeps);
        last_diff = fresh
            .iter()
            .zip(&u)
            .fold(0.0f64, |mx, (&a, &b)| mx.max((a - b).abs()));
        for k in 0..m {
            u[k] += p.relax * (fresh[k] - u[k]);
        }
        if last_diff < opt.tol {
            break;
        }
    }
    let mut residual = 0.0f64;
    for (k, &cell) in grid.inside.iter().enumerate() {
        let gr = grid.gradient(&u, cell);
        let mag = ((gr[0] + p.xi[0]).powi(2) + (gr[1] + p.xi[1]).powi(2)).sqrt();
        let (s, _) = p.sigma_reg(mag)?;
        residual = residual.max((s * grid.laplacian(&u, cell) - grid.f[k]).abs());
    }
    if last_diff >= opt.tol {
        return Err(PdeError::NonConvergence { iterations, last_diff, residual });
    }
    Ok(GridSolution {
        dimension: Dimension::Two,
        points: grid.inside.iter().map(|&c| grid.coords[c]).collect(),
        values: u,
        h: grid.h,
        residual_norm: residual,
        iterations,
        regularization_floor: p.floor,
        floor_activations: floor_hits,
    })
}

/// Solves the problem by damped Picard iteration.
pub fn solve(p: &ProblemSpec, opt: &SolveOptions) -> Result<GridSolution, PdeError> {
    if !(p.relax > 0.0 && p.relax <= 1.0) {
        return Err(PdeError::Invalid(format!("relaxation must lie in (0, 1], got {}", p.relax)));
    }
    if !(p.floor > 0.0) {
        return Err(PdeError::Invalid(format!("floor must be positive, got {}", p.floor)));
    }
    let want = match p.dimension {
        Dimension::One => 1,
        Dimension::Two => 2,
    };
    if p.xi.len() != want {
        return Err(PdeError::Invalid(format!("xi must have {want} components, got {}", p.xi.len())));
    }
    match p.dimension {
        Dimension::One => solve_1d(p, opt),
        Dimension::Two => solve_2d(p, opt),
    }
}

/// Per-node residual of the discrete operator at arbitrary values; exposes
/// the scheme's gradient-shift structure for invariance checks.
pub fn discrete_residual(p: &ProblemSpec, values: &[f64]) -> Result<Vec<f64>, PdeError> {
    match p.dimension {
        Dimension::One => {
            let grid = Grid1d::build(p);
            if values.len() != grid.n {
                return Err(PdeError::Invalid(format!(
                    "expected {} values, got {}",
                    grid.n,
                    values.len()
                )));
            }
            let mut out = Vec::with_capacity(grid.n);
            for i in 0..grid.n {
                let grad = grid.gradient(values, i) + p.xi[0];
                let (s, _) = p.sigma_reg(grad.abs())?;
                out.push(s * grid.laplacian(values, i) - grid.f[i]);
            }
            Ok(out)
        }
        Dimension::Two => {
            let grid = Grid2d::build(p);
            if values.len() != grid.inside.len() {
                return Err(PdeError::Invalid(format!(
                    "expected {} values, got {}",
                    grid.inside.len(),
                    values.len()
                )));
            }
            let mut out = Vec::with_capacity(grid.inside.len());
            for (k, &cell) in grid.inside.iter().enumerate() {
                let gr = grid.gradient(values, cell);
                let mag = ((gr[0] + p.xi[0]).powi(2) + (gr[1] + p.xi[1]).powi(2)).sqrt();
                let (s, _) = p.sigma_reg(mag)?;
                out.push(s * grid.laplacian(values, cell) - grid.f[k]);
            }
            Ok(out)
        }
    }
}

/// One measured scale of the tangent-plane decay.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayScale {
    pub n: usize,
    pub radius: f64,
    /// Minimax affine error on the ball.
    pub e: f64,
    /// Affine coefficients.
    pub a: f64,
    pub b: Vec<f64>,
    pub points: usize,
    /// `tau_n` from a renormalization trace, when supplied.
    pub tau: Option<f64>,
}

/// Tangent-plane decay measurements around a probe point.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DecayReport {
    pub probe: Vec<f64>,
    pub ratio: f64,
    pub scales: Vec<DecayScale>,
    /// Depth was cut because a ball held fewer than 5 grid points.
    pub truncated: bool,
    /// `max_n E_n / (tau_n r^n)` when taus are supplied.
    pub fitted_c: Option<f64>,
    /// Same maximum extended over the affine-coefficient increments.
    pub induction_c: Option<f64>,
    /// Fitted gradient-Holder exponent near the probe.
    pub holder_exponent: Option<f64>,
}

impl DecayReport {
    /// Log-log slope of `E_n` against the radii, minus one: the gradient
    /// smoothness exponent when the slope increments drown in noise.
    fn exponent_from_errors(scales: &[DecayScale]) -> Option<f64> {
        let pts: Vec<(f64, f64)> = scales
            .iter()
            .filter(|s| s.e > 1e-300)
            .map(|s| (s.radius.ln(), s.e.ln()))
            .collect();
        linreg(&pts).map(|slope| slope - 1.0)
    }

    fn exponent_from_slopes(scales: &[DecayScale], value_scale: f64) -> Option<f64> {
        let mut pts = Vec::new();
        for w in scales.windows(2) {
            let diff: f64 = w[0]
                .b
                .iter()
                .zip(&w[1].b)
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt();
            if diff > 1e-10 * value_scale.max(1.0) {
                pts.push((w[0].radius.ln(), diff.ln()));
            }
        }
        if pts.len() < 2 {
            return None;
        }
        linreg(&pts)
    }
}

fn linreg(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let den = n * sxx - sx * sx;
    if den.abs() < 1e-300 {
        return None;
    }
    Some((n * sxy - sx * sy) / den)
}

/// Chebyshev affine fits over the balls `B_{r^n}(probe)` for `n = 1..=depth`.
/// Depth is truncated (with a flag) when a ball holds fewer than 5 points.
/// When per-scale `taus` are supplied the report carries the fitted constant
/// of `E_n <= C tau_n r^n`.
pub fn fit_tangent_planes(
    sol: &GridSolution,
    probe: &[f64],
    ratio: f64,
    depth: usize,
    taus: Option<&[f64]>,
) -> Result<DecayReport, PdeError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(PdeError::Invalid(format!("scale ratio must lie in (0,1), got {ratio}")));
    }
    if depth == 0 {
        return Err(PdeError::Invalid("depth must be at least 1".into()));
    }
    let dim = match sol.dimension {
        Dimension::One => 1,
        Dimension::Two => 2,
    };
    let px = probe.first().copied().unwrap_or(0.0);
    let py = if dim == 2 { probe.get(1).copied().unwrap_or(0.0) } else { 0.0 };
    let mut scales = Vec::new();
    let mut truncated = false;
    for n in 1..=depth {
        let rad = ratio.powi(n as i32);
        let mut pts: Vec<Vec<f64>> = Vec::new();
        let mut us: Vec<f64> = Vec::new();
        for (p, &v) in sol.points.iter().zip(&sol.values) {
            let dx = p[0] - px;
            let dy = p[1] - py;
            if (dx * dx + dy * dy).sqrt() <= rad {
                pts.push(vec![p[0], p[1]]);
                us.push(v);
            }
        }
        if pts.len() < 5 {
            truncated = true;
            if scales.is_empty() {
                return Err(PdeError::TooFewPoints { radius: rad, got: pts.len() });
            }
            break;
        }
        let fit = if dim == 1 {
            let xs: Vec<f64> = pts.iter().map(|p| p[0]).collect();
            minimax_affine_1d(&xs, &us)
        } else {
            minimax_affine_nd(&pts, &us, 2)
        };
        let tau = taus.and_then(|t| t.get(n - 1)).copied();
        scales.push(DecayScale {
            n,
            radius: rad,
            e: fit.error,
            a: fit.offset,
            b: fit.slope,
            points: pts.len(),
            tau,
        });
    }

    let value_scale = sol.max_abs();
    let holder = DecayReport::exponent_from_slopes(&scales, value_scale)
        .or_else(|| DecayReport::exponent_from_errors(&scales));

    let (fitted_c, induction_c) = if taus.is_some() {
        let mut c_e = 0.0f64;
        let mut c_all = 0.0f64;
        for s in &scales {
            if let Some(tau) = s.tau {
                let denom = tau * s.radius;
                if denom > 0.0 {
                    c_e = c_e.max(s.e / denom);
                    c_all = c_all.max(s.e / denom);
                }
            }
        }
        for w in scales.windows(2) {
            if let Some(tau) = w[0].tau {
                let da = (w[1].a - w[0].a).abs();
                let db: f64 = w[0]
                    .b
                    .iter()
                    .zip(&w[1].b)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt();
                c_all = c_all.max(da / (tau * w[0].radius)).max(db / tau);
            }
        }
        (Some(c_e), Some(c_all))
    } else {
        (None, None)
    };

    Ok(DecayReport {
        probe: probe.to_vec(),
        ratio,
        scales,
        truncated,
        fitted_c,
        induction_c,
        holder_exponent: holder,
    })
}

/// `sup |u(x) - u(y)| / |x - y|^exponent` over grid pairs inside the ball of
/// `radius` around `center` (subsampled to keep the pair count tractable).
pub fn holder_seminorm(
    sol: &GridSolution,
    center: &[f64],
    radius: f64,
    exponent: f64,
) -> Result<f64, PdeError> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(PdeError::Invalid(format!("exponent must lie in (0, 1], got {exponent}")));
    }
    let cx = center.first().copied().unwrap_or(0.0);
    let cy = center.get(1).copied().unwrap_or(0.0);
    let mut pts: Vec<([f64; 2], f64)> = sol
        .points
        .iter()
        .zip(&sol.values)
        .filter(|(p, _)| {
            let dx = p[0] - cx;
            let dy = p[1] - cy;
            (dx * dx + dy * dy).sqrt() <= radius
        })
        .map(|(p, &v)| (*p, v))
        .collect();
    if pts.len() < 2 {
        return Err(PdeError::TooFewPoints { radius, got: pts.len() });
    }
    let stride = (pts.len() / 1500).max(1);
    if stride > 1 {
        pts = pts.into_iter().step_by(stride).collect();
    }
    let mut sup = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let dx = pts[i].0[0] - pts[j].0[0];
            let dy = pts[i].0[1] - pts[j].0[1];
            let d = (dx * dx + dy * dy).sqrt();
            if d > 0.0 {
                sup = sup.max((pts[i].1 - pts[j].1).abs() / d.powf(exponent));
            }
        }
    }
    Ok(sup)
}

/// Scaling bookkeeping that brings a problem into the normalized small-source
/// regime: `v(x) = u(rx)/K` solves the same class of equation with law
/// `sigma(K t / r)` and source `(r^2/K) f(rx)`.
#[derive(Clone)]
pub struct ScaledProblem {
    pub sigma_bar: DegeneracyLaw,
    pub source_bar: FieldFn,
    /// Bound on the rescaled source sup-norm (below the requested eps).
    pub source_bar_bound: f64,
    pub r: f64,
    pub k: f64,
    /// Whether `r` had to shrink below the requested eps.
    pub r_adjusted: bool,
}

impl std::fmt::Debug for ScaledProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScaledProblem")
            .field("r", &self.r)
            .field("k", &self.k)
            .field("source_bar_bound", &self.source_bar_bound)
            .field("r_adjusted", &self.r_adjusted)
            .finish()
    }
}

/// Computes the normalization scales `K = 1/(sup|u| + sup|f|)`, `r = eps`
/// (shrunk when needed to keep `r < K` and the rescaled source under eps).
/// The sup of `u` is taken from the caller or estimated from boundary data
/// plus the maximum-principle bound for unit ellipticity.
pub fn normalize_problem(p: &ProblemSpec, eps: f64, sup_u: Option<f64>) -> Result<ScaledProblem, PdeError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(PdeError::Invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    let sup_f = p.source_sup();
    let sup_u = match sup_u {
        Some(v) => {
            if !(v >= 0.0) {
                return Err(PdeError::Invalid("supplied sup|u| must be non-negative".into()));
            }
            v
        }
        None => {
            // boundary max plus the barrier bound for sigma >= 1
            let mut b = (p.boundary)(&[-1.0]).abs().max((p.boundary)(&[1.0]).abs());
            if p.dimension == Dimension::Two {
                for i in 0..64 {
                    let a = std::f64::consts::TAU * i as f64 / 64.0;
                    b = b.max((p.boundary)(&[a.cos(), a.sin()]).abs());
                }
            }
            b + 0.5 * sup_f
        }
    };
    let k = 1.0 / (sup_u + sup_f).max(1e-300);
    let mut r = eps;
    let mut adjusted = false;
    // keep r < K (the Dini integral of the rescaled inverse shrinks) and the
    // rescaled source below eps
    let mut guard = 0;
    while r >= k || (r * r / k) * sup_f >= eps {
        r *= 0.5;
        adjusted = true;
        guard += 1;
        if guard > 4000 {
            return Err(PdeError::Invalid("cannot reach the smallness regime: source too large".into()));
        }
    }
    let sigma_bar = DegeneracyLaw::normalized(p.sigma.sigma().scaled_argument(k / r)?)?;
    let source = p.source.clone();
    let (rr, kk) = (r, k);
    let source_bar: FieldFn = Arc::new(move |x: &[f64]| {
        let scaled: Vec<f64> = x.iter().map(|&c| rr * c).collect();
        (rr * rr / kk) * source(&scaled)
    });
    Ok(ScaledProblem {
        sigma_bar,
        source_bar,
        source_bar_bound: (r * r / k) * sup_f,
        r,
        k,
        r_adjusted: adjusted,
    })
}
