//! Discrete Legendre–Fenchel transforms on tensor grids and the discrete
//! convex envelope they give (two transforms in a row).
//!
//! The one-dimensional transform runs in linear time: the lower hull of the
//! samples is built with a monotone chain, then the slopes are swept in
//! increasing order. Higher dimensions factor into one-dimensional passes,
//! `f*(s) = max_{x_0} s_0 x_0 + max_{x_1} s_1 x_1 + ... - f(x)`, where every
//! pass after the first transforms the negated result of the previous one.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vector;
use crate::smooth::{BoundingBox, SmoothInterpolant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl GridAxis {
    pub fn node(&self, k: usize) -> f64 {
        if self.count <= 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * k as f64 / (self.count - 1) as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|k| self.node(k)).collect()
    }

    pub fn step(&self) -> f64 {
        if self.count <= 1 {
            0.0
        } else {
            (self.hi - self.lo) / (self.count - 1) as f64
        }
    }
}

/// `max_i s x_i - f_i` for every `s` in `ss`. Both `xs` and `ss` must be
/// increasing.
pub fn conjugate_1d(xs: &[f64], fs: &[f64], ss: &[f64]) -> Vec<f64> {
    // lower hull, monotone chain
    let mut hull: Vec<usize> = Vec::with_capacity(xs.len());
    for i in 0..xs.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (xs[b] - xs[a]) * (fs[i] - fs[a]) - (fs[b] - fs[a]) * (xs[i] - xs[a]);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    let mut out = Vec::with_capacity(ss.len());
    let mut k = 0;
    for &s in ss {
        while k + 1 < hull.len() {
            let (a, b) = (hull[k], hull[k + 1]);
            if s * xs[b] - fs[b] >= s * xs[a] - fs[a] {
                k += 1;
            } else {
                break;
            }
        }
        let i = hull[k];
        out.push(s * xs[i] - fs[i]);
    }
    out
}

/// Separable transform of `f` sampled on the tensor grid `xs` (row-major,
/// first axis slowest) onto the tensor grid `ss`.
pub fn conjugate_nd(xs: &[Vec<f64>], f: &[f64], ss: &[Vec<f64>]) -> Vec<f64> {
    let mut shape: Vec<usize> = xs.iter().map(|a| a.len()).collect();
    let d = shape.len();
    let mut cur = f.to_vec();
    for (pass, axis) in (0..d).rev().enumerate() {
        if pass > 0 {
            cur.iter_mut().for_each(|v| *v = -*v);
        }
        let stride: usize = shape[axis + 1..].iter().product();
        let (len, out_len) = (shape[axis], ss[axis].len());
        let outer: usize = shape[..axis].iter().product();
        let mut next = vec![0.0; outer * out_len * stride];
        let mut line = vec![0.0; len];
        for o in 0..outer {
            for inner in 0..stride {
                for k in 0..len {
                    line[k] = cur[o * len * stride + inner + k * stride];
                }
                let t = conjugate_1d(&xs[axis], &line, &ss[axis]);
                for k in 0..out_len {
                    next[o * out_len * stride + inner + k * stride] = t[k];
                }
            }
        }
        shape[axis] = out_len;
        cur = next;
    }
    cur
}

/// Values of the discrete convex envelope of `g` on a tensor grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeGrid {
    pub axes: Vec<GridAxis>,
    pub values: Vec<f64>,
}

/// Default points per axis: 512 up to dimension 2, 128 in dimension 3, no
/// grid beyond.
pub fn default_resolution(dim: usize) -> Option<usize> {
    match dim {
        1 | 2 => Some(512),
        3 => Some(128),
        _ => None,
    }
}

impl EnvelopeGrid {
    /// Biconjugate of `g` sampled on `resolution` points per axis of the box.
    pub fn build(h: &SmoothInterpolant, resolution: usize) -> Result<Self> {
        let d = h.dim();
        if d == 0 || resolution < 2 {
            return Err(Error::Internal("grid needs dimension >= 1 and two points per axis".into()));
        }
        let axes: Vec<GridAxis> = (0..d)
            .map(|k| GridAxis { lo: h.bbox.lo[k], hi: h.bbox.hi[k], count: resolution })
            .collect();
        let slope_axes = slope_axes(h, &axes);
        let xs: Vec<Vec<f64>> = axes.iter().map(GridAxis::nodes).collect();
        let ss: Vec<Vec<f64>> = slope_axes.iter().map(GridAxis::nodes).collect();

        let total: usize = axes.iter().map(|a| a.count).product();
        let mut g = Vec::with_capacity(total);
        let mut z = Vector::zeros(d);
        for flat in 0..total {
            unflatten(flat, &axes, &mut z);
            g.push(h.eval_g(&z));
        }
        let conj = conjugate_nd(&xs, &g, &ss);
        let values = conjugate_nd(&ss, &conj, &xs);
        Ok(Self { axes, values })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn node(&self, flat: usize) -> Vector {
        let mut z = Vector::zeros(self.dim());
        unflatten(flat, &self.axes, &mut z);
        z
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Multilinear interpolation; `None` outside the grid.
    pub fn interpolate(&self, z: &Vector) -> Option<f64> {
        let d = self.dim();
        let mut base = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for k in 0..d {
            let a = &self.axes[k];
            if z[k] < a.lo || z[k] > a.hi {
                return None;
            }
            let t = (z[k] - a.lo) / a.step();
            let i = (t.floor() as usize).min(a.count - 2);
            base[k] = i;
            frac[k] = t - i as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0;
            for k in 0..d {
                let bit = (corner >> k) & 1;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                flat = flat * self.axes[k].count + base[k] + bit;
            }
            acc += w * self.values[flat];
        }
        Some(acc)
    }

    /// Row-major little-endian `f64` payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_bytes(axes: Vec<GridAxis>, bytes: &[u8]) -> Result<Self> {
        let expected: usize = axes.iter().map(|a| a.count).product::<usize>() * 8;
        if bytes.len() != expected {
            return Err(Error::Parse(format!(
                "grid payload has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(Self { axes, values })
    }

    /// A-priori bound on `|grid - conv g|` at nodes whose supporting points
    /// stay inside the grid. Sampling `g` costs at most `M h^2 / 8` per axis.
    /// Restricting the second transform to grid slopes costs at most the slope
    /// step times the distance to the supporting node, which an affine piece
    /// of the envelope can stretch to the full box width.
    pub fn error_bound(&self, m: f64, slope_axes: &[GridAxis]) -> f64 {
        self.axes
            .iter()
            .zip(slope_axes)
            .map(|(a, s)| m * a.step() * a.step() / 8.0 + s.step() * (a.hi - a.lo))
            .sum()
    }
}

/// Symmetric slope ranges covering `∇q_i` over the box for every quadratic.
/// Counts are odd so that slope zero is a node.
pub fn slope_axes(h: &SmoothInterpolant, axes: &[GridAxis]) -> Vec<GridAxis> {
    axes.iter()
        .enumerate()
        .map(|(k, a)| {
            let bound = h
                .data
                .iter()
                .flat_map(|p| [a.lo, a.hi].map(|c| (p.slope[k] + h.m * (c - p.z[k])).abs()))
                .fold(0.0, f64::max);
            let bound = if bound > 0.0 { bound } else { 1.0 };
            GridAxis { lo: -bound, hi: bound, count: a.count | 1 }
        })
        .collect()
}

/// Grid covering `bbox` with the given resolution (used when reloading).
pub fn axes_for(bbox: &BoundingBox, resolution: usize) -> Vec<GridAxis> {
    (0..bbox.dim())
        .map(|k| GridAxis { lo: bbox.lo[k], hi: bbox.hi[k], count: resolution })
        .collect()
}

fn unflatten(mut flat: usize, axes: &[GridAxis], z: &mut Vector) {
    for k in (0..axes.len()).rev() {
        let c = axes[k].count;
        z[k] = axes[k].node(flat % c);
        flat /= c;
    }
}
