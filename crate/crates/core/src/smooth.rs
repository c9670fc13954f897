//! A `C^{1,1}` convex interpolant of first-order data on the coercivity
//! subspace.
//!
//! With `M` at least every pairwise ratio `|s_i - s_j|^2 / (2 r_ij)`, the
//! lower convex envelope `H` of `g(z) = min_i c_i + <s_i, z - z_i> + (M/2)|z - z_i|^2`
//! matches values and slopes at the data, is convex with `M`-Lipschitz
//! gradient, and lies above the corner minorant `max_i c_i + <s_i, z - z_i>`.
//! `H` is evaluated exactly through its conjugate:
//! `H(z) = max_s min_i c_i + <s, z - z_i> - |s - s_i|^2 / (2M)`, whose maximizer is `∇H(z)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vector;
use crate::maxmin::{self, Problem, Settings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Relative duality gap accepted if the active set has not settled.
    pub tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iterations: 1000, tolerance: 1e-9 }
    }
}

impl SolverConfig {
    pub(crate) fn settings(&self) -> Settings {
        Settings { max_iterations: self.max_iterations, accept_gap: self.tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    /// Coordinates in an orthonormal basis of the subspace.
    #[serde(with = "crate::serde_vec")]
    pub z: Vector,
    pub value: f64,
    #[serde(with = "crate::serde_vec")]
    pub slope: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    #[serde(with = "crate::serde_vec")]
    pub lo: Vector,
    #[serde(with = "crate::serde_vec")]
    pub hi: Vector,
}

impl BoundingBox {
    /// Hull of `points` scaled about its centre by `inflation`; degenerate
    /// axes get half-width 1.
    pub fn around(points: &[Vector], inflation: f64) -> Self {
        let d = points.first().map_or(0, |p| p.len());
        let mut lo = Vector::from_element(d, f64::INFINITY);
        let mut hi = Vector::from_element(d, f64::NEG_INFINITY);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        for k in 0..d {
            let c = 0.5 * (lo[k] + hi[k]);
            let half = 0.5 * (hi[k] - lo[k]);
            let half = if half > 0.0 { half * inflation } else { 1.0 };
            lo[k] = c - half;
            hi[k] = c + half;
        }
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, z: &Vector) -> bool {
        (0..self.dim()).all(|k| z[k] >= self.lo[k] && z[k] <= self.hi[k])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothInterpolant {
    pub m: f64,
    pub data: Vec<DataPoint>,
    pub bbox: BoundingBox,
    pub solver: SolverConfig,
}

/// `r(z_i, z_j) = c_i - c_j - <s_j, z_i - z_j>`.
fn residual(p: &DataPoint, q: &DataPoint) -> f64 {
    p.value - q.value - q.slope.dot(&(&p.z - &q.z))
}

/// `margin * max |s_i - s_j|^2 / (2 r_ij)` over pairs whose slopes differ by
/// more than `tol_grad`; 1 when no pair constrains it.
pub fn compute_m(data: &[DataPoint], margin: f64, tol_grad: f64) -> Result<f64> {
    let mut m = 0.0f64;
    for (i, p) in data.iter().enumerate() {
        for (j, q) in data.iter().enumerate() {
            if i == j {
                continue;
            }
            let gap = (&p.slope - &q.slope).norm();
            if gap <= tol_grad {
                continue;
            }
            let r = residual(p, q);
            if !(r > 0.0) {
                return Err(Error::CurvatureUndefined { i, j, residual: r, gap });
            }
            m = m.max(gap * gap / (2.0 * r));
        }
    }
    Ok(if m > 0.0 { margin * m } else { 1.0 })
}

/// Merges data points with coincident sites, which must carry the same value
/// and slope.
pub fn dedupe(data: Vec<DataPoint>, tol_grad: f64) -> Result<Vec<DataPoint>> {
    let scale = 1.0 + data.iter().map(|p| p.z.amax()).fold(0.0, f64::max);
    let mut out: Vec<DataPoint> = Vec::with_capacity(data.len());
    for (j, p) in data.into_iter().enumerate() {
        if let Some((i, q)) = out
            .iter()
            .enumerate()
            .find(|(_, q)| (&q.z - &p.z).amax() <= 1e-12 * scale)
        {
            let gap = (&p.slope - &q.slope).norm();
            let dv = (p.value - q.value).abs();
            if gap > tol_grad || dv > 1e-9 * (1.0 + p.value.abs()) {
                return Err(Error::CurvatureUndefined { i, j, residual: -dv, gap });
            }
            continue;
        }
        out.push(p);
    }
    Ok(out)
}

impl SmoothInterpolant {
    pub fn new(
        data: Vec<DataPoint>,
        margin: f64,
        tol_grad: f64,
        inflation: f64,
        solver: SolverConfig,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Internal("no data for the interpolant".into()));
        }
        let data = dedupe(data, tol_grad)?;
        let m = compute_m(&data, margin, tol_grad)?;
        let sites: Vec<Vector> = data.iter().map(|p| p.z.clone()).collect();
        let bbox = BoundingBox::around(&sites, inflation);
        Ok(Self { m, data, bbox, solver })
    }

    pub fn dim(&self) -> usize {
        self.bbox.dim()
    }

    /// Same construction after adding the linear function `<w, .>`.
    pub fn tilted(&self, w: &Vector) -> Self {
        let data = self
            .data
            .iter()
            .map(|p| DataPoint {
                z: p.z.clone(),
                value: p.value + w.dot(&p.z),
                slope: &p.slope + w,
            })
            .collect();
        Self { data, ..self.clone() }
    }

    /// `min_i c_i + <s_i, z - z_i> + (M/2)|z - z_i|^2`.
    pub fn eval_g(&self, z: &Vector) -> f64 {
        self.data
            .iter()
            .map(|p| {
                let d = z - &p.z;
                p.value + p.slope.dot(&d) + 0.5 * self.m * d.norm_squared()
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// `max_i c_i + <s_i, z - z_i>`.
    pub fn corner_minorant(&self, z: &Vector) -> f64 {
        self.data
            .iter()
            .map(|p| p.value + p.slope.dot(&(z - &p.z)))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Columns `z - z_i + s_i / M` and offsets `c_i - |s_i|^2 / (2M)` of the
    /// conjugate max-min problem at `z`.
    pub(crate) fn problem_at(&self, z: &Vector) -> (DMatrix<f64>, Vec<f64>) {
        let d = self.dim();
        let g = DMatrix::from_fn(d, self.data.len(), |r, c| {
            let p = &self.data[c];
            z[r] - p.z[r] + p.slope[r] / self.m
        });
        let e = self
            .data
            .iter()
            .map(|p| p.value - p.slope.norm_squared() / (2.0 * self.m))
            .collect();
        (g, e)
    }

    /// Value and gradient of the convex envelope of `g`.
    pub fn eval_h(&self, z: &Vector) -> Result<(f64, Vector)> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: z.len() });
        }
        let (g, e) = self.problem_at(z);
        let sol = maxmin::solve(&Problem { g: &g, e: &e }, self.m, None, self.solver.settings())?;
        Ok((sol.value, sol.s))
    }
}
