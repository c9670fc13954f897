//! Seeded point sets for audits and tensor grids for batch evaluation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::Vector;
use crate::lft::GridAxis;
use crate::smooth::BoundingBox;

/// Radius of the perturbations placed around data sites.
pub const NEAR_SITE_RADIUS: f64 = 1e-3;

/// Number of near-site perturbations in an audit set.
pub const NEAR_SITE_COUNT: usize = 100;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_in_box<R: Rng>(rng: &mut R, bbox: &BoundingBox, count: usize) -> Vec<Vector> {
    (0..count)
        .map(|_| {
            Vector::from_fn(bbox.dim(), |k, _| {
                let (lo, hi) = (bbox.lo[k], bbox.hi[k]);
                if hi > lo {
                    rng.gen_range(lo..=hi)
                } else {
                    lo
                }
            })
        })
        .collect()
}

/// Uniform direction on the unit sphere (by rejection from the cube).
pub fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vector {
    loop {
        let v = Vector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Points at distance `radius` from sites chosen round-robin.
pub fn near_sites<R: Rng>(rng: &mut R, sites: &[Vector], count: usize, radius: f64) -> Vec<Vector> {
    if sites.is_empty() {
        return Vec::new();
    }
    (0..count)
        .map(|i| {
            let s = &sites[i % sites.len()];
            s + unit_vector(rng, s.len()) * radius
        })
        .collect()
}

/// Uniform samples in `bbox`, then every site, then near-site perturbations.
pub fn audit_points(seed: u64, bbox: &BoundingBox, sites: &[Vector], uniform: usize) -> Vec<Vector> {
    let mut r = rng(seed);
    let mut pts = uniform_in_box(&mut r, bbox, uniform);
    pts.extend(sites.iter().cloned());
    pts.extend(near_sites(&mut r, sites, NEAR_SITE_COUNT, NEAR_SITE_RADIUS));
    pts
}

/// Tensor grid from `"min:max:count,..."`, one entry per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub axes: Vec<GridAxis>,
}

impl GridSpec {
    pub fn parse(spec: &str) -> Result<Self> {
        let axes = spec
            .split(',')
            .map(|part| {
                let fields: Vec<&str> = part.trim().split(':').collect();
                let [lo, hi, count] = fields.as_slice() else {
                    return Err(Error::Parse(format!("grid axis '{part}' is not min:max:count")));
                };
                let num = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Parse(format!("bad number '{s}' in grid axis '{part}'")))
                };
                let count = count
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad count in grid axis '{part}'")))?;
                Ok(GridAxis { lo: num(lo)?, hi: num(hi)?, count })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.count).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points, first axis slowest.
    pub fn points(&self) -> Vec<Vector> {
        let total = self.len();
        (0..total)
            .map(|mut flat| {
                let mut x = Vector::zeros(self.dim());
                for k in (0..self.dim()).rev() {
                    let c = self.axes[k].count;
                    x[k] = self.axes[k].node(flat % c);
                    flat /= c;
                }
                x
            })
            .collect()
    }
}
