//! Numerical certificate of every stage of a constructed extension.
//!
//! Each entry records the inequality or identity checked, how many samples
//! it used, the worst violation found (positive means violated by that much)
//! and the tolerance it was judged against. Sampling is seeded and all
//! reductions are order-independent, so a fixed seed reproduces the report
//! byte for byte.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelope::{Extension, FEval};
use crate::error::Result;
use crate::geometry::{Subspace, Vector};
use crate::jet::{Jet, Tolerances};
use crate::minimal::{minorant_worst_slack, CornerFunction, Decomposition};
use crate::pipeline::ExtensionResult;
use crate::sampling::{self, audit_points};
use crate::smooth::{BoundingBox, SmoothInterpolant, SolverConfig};
use crate::lft::slope_axes;

/// Factor of the best previously known Lipschitz guarantee, `5 L`.
pub const PRIOR_ART_FACTOR: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Uniform samples in the audit box (data sites and near-site
    /// perturbations are always added).
    pub samples: usize,
    pub pairs: usize,
    pub second_difference_points: usize,
    pub second_difference_step: f64,
    pub second_difference_bound: f64,
    pub fd_step: f64,
    /// Grid nodes compared against the exact envelope.
    pub grid_nodes: usize,
    pub probe_far: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            samples: 1000,
            pairs: 1000,
            second_difference_points: 100,
            second_difference_step: 1e-3,
            second_difference_bound: 0.05,
            fd_step: 1e-5,
            grid_nodes: 2000,
            probe_far: 100.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    /// The statement being checked.
    pub anchor: String,
    pub samples: usize,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckEntry {
    pub fn new(name: &str, anchor: &str, samples: usize, worst: f64, tolerance: f64) -> Self {
        let worst = if worst.is_nan() { f64::MAX } else { worst.clamp(-f64::MAX, f64::MAX) };
        Self {
            name: name.into(),
            anchor: anchor.into(),
            samples,
            worst_violation: worst,
            tolerance,
            pass: worst <= tolerance,
        }
    }

    /// Entry for a check that does not apply to this instance.
    pub fn vacuous(name: &str, anchor: &str) -> Self {
        Self::new(name, anchor, 0, 0.0, 0.0)
    }

    fn failed(name: &str, anchor: &str, samples: usize, tolerance: f64) -> Self {
        Self::new(name, anchor, samples, f64::MAX, tolerance)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub lipschitz: f64,
    pub prior_art_factor: f64,
    pub prior_art_bound: f64,
    pub achieved: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub verify: VerifyConfig,
    pub tolerances: Tolerances,
    pub solver: SolverConfig,
    pub curvature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub pass: bool,
    pub seed: u64,
    pub entries: Vec<CheckEntry>,
    pub comparisons: Vec<Comparison>,
    pub config: ConfigEcho,
}

impl Certificate {
    pub fn entry(&self, name: &str) -> Option<&CheckEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

fn max_of<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    it.into_iter().fold(f64::NEG_INFINITY, |m, x| if x.is_nan() { f64::NAN } else { m.max(x) })
}

/// `max` that is `0` on empty input.
fn max0<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let m = max_of(it);
    if m == f64::NEG_INFINITY {
        0.0
    } else {
        m
    }
}

struct Context<'a> {
    r: &'a ExtensionResult,
    ext: &'a Extension,
    cfg: &'a VerifyConfig,
    estar: Jet,
    points: Vec<Vector>,
    pairs: Vec<(Vector, Vector)>,
    f_at_points: Vec<Result<FEval>>,
    /// Absolute tolerance for quantities produced by the envelope solver.
    solver_tol: f64,
}

pub fn certify(r: &ExtensionResult, cfg: &VerifyConfig) -> Certificate {
    let ext = &r.extension;
    let estar = r.augmented_jet();
    let sites: Vec<Vector> = estar.points().iter().map(|p| p.site.clone()).collect();
    let bbox = BoundingBox::around(&sites, 3.0);
    let points = audit_points(cfg.seed, &bbox, &sites, cfg.samples);
    let mut rng = sampling::rng(cfg.seed.wrapping_add(1));
    let a = sampling::uniform_in_box(&mut rng, &bbox, cfg.pairs);
    let b = sampling::uniform_in_box(&mut rng, &bbox, cfg.pairs);
    let pairs: Vec<(Vector, Vector)> = a.into_iter().zip(b).collect();
    let f_at_points = ext.eval_f_many(&points);
    let fscale = max0(f_at_points.iter().filter_map(|f| f.as_ref().ok()).map(|f| f.value.abs()));
    let solver_tol = 2.0 * ext.interpolant().solver.tolerance * (1.0 + fscale);
    let ctx = Context { r, ext, cfg, estar, points, pairs, f_at_points, solver_tol };

    let mut entries = Vec::new();
    entries.extend(data_checks(&ctx));
    entries.extend(first_stage_checks(&ctx));
    entries.extend(augmentation_checks(&ctx));
    entries.extend(second_stage_checks(&ctx));
    entries.extend(smooth_checks(&ctx));
    entries.extend(envelope_checks(&ctx));
    entries.push(subdifferential_span_check(&r.m_star, &r.x, &ctx.points));

    let achieved = max0(ctx.f_at_points.iter().filter_map(|f| f.as_ref().ok()).map(|f| f.gradient.norm()));
    let comparisons = vec![Comparison {
        name: "sampled sup |∇F| against the 5L guarantee".into(),
        lipschitz: r.lipschitz,
        prior_art_factor: PRIOR_ART_FACTOR,
        prior_art_bound: PRIOR_ART_FACTOR * r.lipschitz,
        achieved,
    }];
    Certificate {
        pass: entries.iter().all(|e| e.pass),
        seed: cfg.seed,
        entries,
        comparisons,
        config: ConfigEcho {
            verify: cfg.clone(),
            tolerances: r.tolerances,
            solver: ext.interpolant().solver,
            curvature: ext.interpolant().m,
        },
    }
}

fn residual(j: &Jet, i: usize, k: usize) -> f64 {
    j.residual(i, k)
}

fn ordered_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (0..n).filter(move |&k| k != i).map(move |k| (i, k)))
}

fn data_checks(ctx: &Context) -> Vec<CheckEntry> {
    let j = &ctx.r.jet;
    let t = ctx.r.tolerances;
    let n = j.len();
    let pairs = n * n.saturating_sub(1);
    let l = ctx.r.lipschitz;
    let conv = max0(ordered_pairs(n).map(|(i, k)| -residual(j, i, k)));
    let flat = max0(
        ordered_pairs(n)
            .filter(|&(i, k)| residual(j, i, k) <= t.tol_eq)
            .map(|(i, k)| (&j.points()[i].gradient - &j.points()[k].gradient).norm()),
    );
    let quotient = max0(ordered_pairs(n).map(|(i, k)| {
        let (p, q) = (&j.points()[i], &j.points()[k]);
        (p.value - q.value).abs() - l * (&p.site - &q.site).norm()
    }));
    vec![
        CheckEntry::new("data convexity", "f(x) >= f(y) + <G(y), x - y> on E", pairs, conv, t.tol_eq),
        CheckEntry::new("data flatness", "f(x) - f(y) - <G(y), x - y> = 0 implies G(x) = G(y) on E", pairs, flat, t.tol_grad),
        CheckEntry::new(
            "data Lipschitz quotient",
            "|f(x) - f(y)| <= L |x - y| on E",
            pairs,
            quotient,
            1e-9 * (1.0 + j.max_abs_value()),
        ),
    ]
}

/// Reconstruction, minorant, subgradient and Lipschitz checks of one decomposition.
fn decomposition_checks(
    ctx: &Context,
    m: &CornerFunction,
    dec: Option<&Decomposition>,
    label: &str,
    sub: &str,
) -> Vec<CheckEntry> {
    let names = [
        format!("{label} reconstruction"),
        format!("{label} strict linear part"),
        format!("{label} coercivity minorant"),
        format!("{label} Lipschitz bound of the coercive part"),
    ];
    let anchors = [
        format!("{label} = c o P_{sub} + <v, .>"),
        "|v| < L".to_string(),
        format!("c(y) >= a |y| + b on {sub}"),
        "|c(y) - c(y')| <= (L + |v|) |y - y'|".to_string(),
    ];
    let Some(dec) = dec else {
        return (0..4).map(|k| CheckEntry::vacuous(&names[k], &anchors[k])).collect();
    };
    let l = ctx.r.lipschitz;
    let mscale = 1.0 + max0(ctx.points.iter().map(|x| m.value(x).abs()));
    let recon = max0(ctx.points.iter().map(|x| (m.value(x) - dec.reconstruct(x)).abs()));
    let c = &dec.coercive_part;
    let s = &dec.subspace;
    let slack = minorant_worst_slack(c, dec.a, dec.b, 10_000, 1e3, ctx.cfg.seed);
    let lip_c = l + dec.v.norm();
    let lip = max0(ctx.pairs.iter().map(|(a, b)| {
        let (pa, pb) = (s.project(a), s.project(b));
        (c.value(&pa) - c.value(&pb)).abs() - lip_c * (&pa - &pb).norm()
    }));
    vec![
        CheckEntry::new(&names[0], &anchors[0], ctx.points.len(), recon, 1e-9 * mscale),
        CheckEntry::new(&names[1], &anchors[1], 1, dec.v.norm() - l, -1e-12 * l),
        CheckEntry::new(&names[2], &anchors[2], 10_000, -slack, 1e-9 * (1.0 + 1e3 * lip_c + dec.b.abs())),
        CheckEntry::new(&names[3], &anchors[3], ctx.pairs.len(), lip, 1e-9 * (1.0 + mscale)),
    ]
}

fn first_stage_checks(ctx: &Context) -> Vec<CheckEntry> {
    let m = &ctx.r.minimal;
    let j = &ctx.r.jet;
    let interp = max0(j.points().iter().map(|p| (m.value(&p.site) - p.value).abs()));
    let mut out = vec![CheckEntry::new(
        "m interpolates the data",
        "m = f on E",
        j.len(),
        interp,
        1e-9 * (1.0 + j.max_abs_value()),
    )];
    out.extend(decomposition_checks(ctx, m, ctx.r.first.as_ref(), "m", "Y"));
    let sub = max0(ctx.pairs.iter().map(|(x, z)| {
        let (mx, i) = m.eval(x);
        mx + m.pieces()[i].slope.dot(&(z - x)) - m.value(z)
    }));
    out.push(CheckEntry::new(
        "m active-piece subgradient",
        "m(z) >= m(x) + <u, z - x> for the active slope u at x",
        ctx.pairs.len(),
        sub,
        1e-9 * (1.0 + max0(ctx.points.iter().map(|x| m.value(x).abs()))),
    ));
    out
}

fn augmentation_checks(ctx: &Context) -> Vec<CheckEntry> {
    let names = ["new data compatibility", "new gradients below L"];
    let anchors = [
        "f*(q) - f(x) - <G(x), q - x>, f(x) - f*(q) - <G*(q), x - q>, f*(q_i) - f*(q_j) - <G*(q_j), q_i - q_j> >= 1",
        "|G*(q_j)| <= (L + |v|) / 2",
    ];
    let Some(aug) = &ctx.r.augmentation else {
        return vec![CheckEntry::vacuous(names[0], anchors[0]), CheckEntry::vacuous(names[1], anchors[1])];
    };
    let worst = aug.compatibility.worst().unwrap_or(f64::INFINITY);
    let pairs = ctx.r.augmented.new_points.len() * (ctx.r.jet.len() * 2 + ctx.r.augmented.new_points.len());
    let l = ctx.r.lipschitz;
    let half = (l + aug.params.v.norm()) / 2.0;
    let grad = max0(ctx.r.augmented.new_points.iter().map(|q| q.gradient.norm() - half));
    vec![
        CheckEntry::new(names[0], anchors[0], pairs, 1.0 - worst, 1e-9),
        CheckEntry::new(names[1], anchors[1], ctx.r.augmented.new_points.len(), grad, 1e-12 * (1.0 + l)),
    ]
}

fn second_stage_checks(ctx: &Context) -> Vec<CheckEntry> {
    let r = ctx.r;
    let estar = &ctx.estar;
    let n = estar.len();
    let g0 = &estar.points()[0].gradient;
    let diffs: Vec<Vector> = estar.points().iter().map(|p| &p.gradient - g0).collect();
    let span_gap = match Subspace::span_with_scale(estar.ambient_dim(), &diffs, r.tolerances.rank_tol, r.lipschitz) {
        Ok(s) => s.projector_distance(&r.x),
        Err(_) => f64::MAX,
    };
    let sup_g = max0(estar.points().iter().map(|p| p.gradient.norm()));
    let conv = max0(ordered_pairs(n).map(|(i, k)| -estar.residual(i, k)));
    let above = max0(ctx.points.iter().map(|x| r.minimal.value(x) - r.m_star.value(x)));
    let mscale = 1.0 + max0(ctx.points.iter().map(|x| r.m_star.value(x).abs()));

    let mut out = vec![
        CheckEntry::new("span of G* differences", "span{G*(x) - G*(y)} = X", n, span_gap, 1e-8),
        CheckEntry::new("sup |G*| = L", "sup_{E*} |G*| = sup_E |G|", n, (sup_g - r.lipschitz).abs(), 1e-12 * (1.0 + r.lipschitz)),
        CheckEntry::new("augmented data convexity", "f*(x) >= f*(y) + <G*(y), x - y> on E*", n * n.saturating_sub(1), conv, r.tolerances.tol_eq),
        CheckEntry::new("m* above m", "m <= m*", ctx.points.len(), above, 1e-9 * mscale),
    ];
    out.push(match (&r.first, &r.second) {
        (Some(f), Some(s)) => CheckEntry::new(
            "v* agrees with v off X",
            "P_{X⊥} v* = P_{X⊥} v",
            1,
            r.x.reject(&(&s.v - &f.v)).norm(),
            1e-10 * (1.0 + r.lipschitz),
        ),
        _ => CheckEntry::vacuous("v* agrees with v off X", "P_{X⊥} v* = P_{X⊥} v"),
    });
    out.push(match &r.differentiability {
        Some(d) => CheckEntry::new(
            "c* differentiable at the data",
            "∇c*(P_X x) = G*(x) - v* on E*",
            n,
            d.max_deviation,
            d.tolerance,
        ),
        None => CheckEntry::vacuous("c* differentiable at the data", "∇c*(P_X x) = G*(x) - v* on E*"),
    });
    out.extend(decomposition_checks(ctx, &r.m_star, r.second.as_ref(), "m*", "X"));
    out
}

fn h_eval(h: &SmoothInterpolant, zs: &[Vector]) -> Vec<Result<(f64, Vector)>> {
    zs.par_iter().map(|z| h.eval_h(z)).collect()
}

fn smooth_checks(ctx: &Context) -> Vec<CheckEntry> {
    let h = ctx.ext.interpolant();
    let names = [
        ("H interpolates values", "H(z_i) = c*(z_i)"),
        ("∇H interpolates slopes", "∇H(z_i) = ∇c*(z_i)"),
        ("H midpoint convexity", "H((z + z')/2) <= (H(z) + H(z'))/2"),
        ("H between corner minorant and g", "max_i affine_i <= H <= g"),
        ("∇H matches finite differences", "(H(z + h e) - H(z - h e)) / 2h = <∇H(z), e>"),
        ("∇H is M-Lipschitz", "|∇H(z) - ∇H(z')| <= M |z - z'|"),
        ("pairwise C^{1,1} condition", "c_i >= c_j + <s_j, z_i - z_j> + |s_i - s_j|^2 / 2M"),
        ("grid agrees with H", "discrete biconjugate = conv g at grid nodes"),
    ];
    if h.dim() == 0 {
        return names.iter().map(|(n, a)| CheckEntry::vacuous(n, a)).collect();
    }
    let data_z: Vec<Vector> = h.data.iter().map(|p| p.z.clone()).collect();
    let at_data = h_eval(h, &data_z);
    let mut out = Vec::new();
    if at_data.iter().any(|r| r.is_err()) {
        out.push(CheckEntry::failed(names[0].0, names[0].1, data_z.len(), 1e-6));
        out.push(CheckEntry::failed(names[1].0, names[1].1, data_z.len(), 1e-4));
    } else {
        let vals = max0(at_data.iter().zip(&h.data).map(|(r, p)| {
            (r.as_ref().unwrap().0 - p.value).abs() / (1.0 + p.value.abs())
        }));
        let grads = max0(at_data.iter().zip(&h.data).map(|(r, p)| (&r.as_ref().unwrap().1 - &p.slope).norm()));
        out.push(CheckEntry::new(names[0].0, names[0].1, data_z.len(), vals, 1e-6));
        out.push(CheckEntry::new(names[1].0, names[1].1, data_z.len(), grads, 1e-4));
    }

    let mut rng = sampling::rng(ctx.cfg.seed.wrapping_add(2));
    let za = sampling::uniform_in_box(&mut rng, &h.bbox, ctx.cfg.pairs);
    let zb = sampling::uniform_in_box(&mut rng, &h.bbox, ctx.cfg.pairs);
    let mids: Vec<Vector> = za.iter().zip(&zb).map(|(a, b)| (a + b) * 0.5).collect();
    let (ha, hb, hm) = (h_eval(h, &za), h_eval(h, &zb), h_eval(h, &mids));
    let all_ok = ha.iter().chain(&hb).chain(&hm).all(|r| r.is_ok());
    let hscale = 1.0 + max0(ha.iter().chain(&hb).filter_map(|r| r.as_ref().ok()).map(|r| r.0.abs()));
    if all_ok {
        let val = |r: &Result<(f64, Vector)>| r.as_ref().unwrap().0;
        let grad = |r: &Result<(f64, Vector)>| r.as_ref().unwrap().1.clone();
        let conv = max0((0..za.len()).map(|i| val(&hm[i]) - 0.5 * (val(&ha[i]) + val(&hb[i]))));
        let sandwich = max0((0..za.len()).map(|i| {
            let v = val(&ha[i]);
            (h.corner_minorant(&za[i]) - v).max(v - h.eval_g(&za[i]))
        }));
        let lip = max0((0..za.len()).map(|i| (grad(&ha[i]) - grad(&hb[i])).norm() - h.m * (&za[i] - &zb[i]).norm()));
        out.push(CheckEntry::new(names[2].0, names[2].1, za.len(), conv, 1e-8 * hscale));
        out.push(CheckEntry::new(names[3].0, names[3].1, za.len(), sandwich, 1e-9 * hscale));

        let step = ctx.cfg.fd_step;
        let fd_points: Vec<&Vector> = za.iter().take(200).collect();
        let fd = fd_points
            .par_iter()
            .enumerate()
            .map(|(i, z)| -> Result<f64> {
                let g = grad(&ha[i]);
                let mut worst = 0.0f64;
                for k in 0..h.dim() {
                    let mut e = Vector::zeros(h.dim());
                    e[k] = step;
                    let d = (h.eval_h(&(*z + &e))?.0 - h.eval_h(&(*z - &e))?.0) / (2.0 * step);
                    worst = worst.max((d - g[k]).abs());
                }
                Ok(worst)
            })
            .collect::<Vec<_>>();
        let fd_tol = (10.0 + h.m) * step + 1e-6;
        out.push(match fd.into_iter().collect::<Result<Vec<f64>>>() {
            Ok(v) => CheckEntry::new(names[4].0, names[4].1, fd_points.len(), max0(v), fd_tol),
            Err(_) => CheckEntry::failed(names[4].0, names[4].1, fd_points.len(), fd_tol),
        });
        out.push(CheckEntry::new(names[5].0, names[5].1, za.len(), lip, 1e-6));
    } else {
        for (name, anchor) in &names[2..6] {
            out.push(CheckEntry::failed(name, anchor, za.len(), 0.0));
        }
    }

    let n = h.data.len();
    let pair = max0(ordered_pairs(n).map(|(i, k)| {
        let (p, q) = (&h.data[i], &h.data[k]);
        let r = p.value - q.value - q.slope.dot(&(&p.z - &q.z));
        (&p.slope - &q.slope).norm_squared() / (2.0 * h.m) - r
    }));
    let cscale = 1.0 + max0(h.data.iter().map(|p| p.value.abs()));
    out.push(CheckEntry::new(names[6].0, names[6].1, n * n.saturating_sub(1), pair, 1e-9 * cscale));

    out.push(match &ctx.r.grid {
        Some(grid) => {
            let hull = BoundingBox::around(&data_z, 1.0);
            let nodes: Vec<usize> = (0..grid.len()).filter(|&i| hull.contains(&grid.node(i))).collect();
            let stride = (nodes.len() / ctx.cfg.grid_nodes.max(1)).max(1);
            let chosen: Vec<usize> = nodes.iter().copied().step_by(stride).collect();
            let bound = 4.0 * grid.error_bound(h.m, &slope_axes(h, &grid.axes)) + 1e-9 * cscale;
            let diffs: Vec<Result<f64>> = chosen
                .par_iter()
                .map(|&i| Ok((grid.values[i] - h.eval_h(&grid.node(i))?.0).abs()))
                .collect();
            match diffs.into_iter().collect::<Result<Vec<f64>>>() {
                Ok(d) => CheckEntry::new(names[7].0, names[7].1, chosen.len(), max0(d), bound),
                Err(_) => CheckEntry::failed(names[7].0, names[7].1, chosen.len(), bound),
            }
        }
        None => CheckEntry::vacuous(names[7].0, names[7].1),
    });
    out
}

fn envelope_checks(ctx: &Context) -> Vec<CheckEntry> {
    let ext = ctx.ext;
    let r = ctx.r;
    let l = r.lipschitz;
    let stol = ctx.solver_tol;
    let mut out = Vec::new();

    let evals: Option<Vec<&FEval>> = ctx.f_at_points.iter().map(|f| f.as_ref().ok()).collect();
    let ft: Vec<Result<(f64, Vector)>> = ctx.points.par_iter().map(|x| ext.eval_ftilde(x)).collect();
    let ft: Option<Vec<f64>> = ft.into_iter().map(|f| f.ok().map(|v| v.0)).collect();
    match (&evals, &ft) {
        (Some(fs), Some(ft)) => {
            let below = max0(ctx.points.iter().zip(fs).map(|(x, f)| r.m_star.value(x) - f.value));
            let above = max0(fs.iter().zip(ft).map(|(f, t)| f.value - t));
            let grad = max0(fs.iter().map(|f| f.gradient.norm() - l));
            out.push(CheckEntry::new("m* below F", "m* <= F", fs.len(), below, stol));
            out.push(CheckEntry::new("F below F~", "F <= F~", fs.len(), above, stol));
            out.push(CheckEntry::new("|∇F| <= L", "|∇F(x)| <= L", fs.len(), grad, 1e-9 * (1.0 + l)));
            let sup = max0(fs.iter().map(|f| f.gradient.norm()));
            out.push(CheckEntry::new(
                "sampled sup |∇F| = L",
                "sup |∇F| = sup_E |G| = L",
                fs.len(),
                (sup - l).abs(),
                1e-6,
            ));
        }
        _ => {
            for (n, a) in [("m* below F", "m* <= F"), ("F below F~", "F <= F~"), ("|∇F| <= L", "|∇F(x)| <= L"), ("sampled sup |∇F| = L", "sup |∇F| = sup_E |G| = L")] {
                out.push(CheckEntry::failed(n, a, ctx.points.len(), 0.0));
            }
        }
    }

    // interpolation on E*
    let estar = &ctx.estar;
    let h = 1e-6;
    let site_checks: Vec<Result<(f64, f64, f64)>> = estar
        .points()
        .par_iter()
        .map(|p| {
            let f = ext.eval_f(&p.site)?;
            let mut fd_worst = 0.0f64;
            for k in 0..p.site.len() {
                let mut e = Vector::zeros(p.site.len());
                e[k] = h;
                let d = (ext.eval_f(&(&p.site + &e))?.value - ext.eval_f(&(&p.site - &e))?.value) / (2.0 * h);
                fd_worst = fd_worst.max((d - p.gradient[k]).abs());
            }
            Ok(((f.value - p.value).abs(), (&f.gradient - &p.gradient).norm(), fd_worst))
        })
        .collect();
    let ns = estar.len();
    match site_checks.into_iter().collect::<Result<Vec<_>>>() {
        Ok(v) => {
            out.push(CheckEntry::new("F interpolates f*", "F = f* on E*", ns, max0(v.iter().map(|t| t.0)), 1e-5));
            out.push(CheckEntry::new("∇F interpolates G*", "∇F = G* on E*", ns, max0(v.iter().map(|t| t.1)), 1e-6));
            out.push(CheckEntry::new(
                "finite differences of F match G*",
                "(F(y + h e) - F(y - h e)) / 2h = <G*(y), e> on E*",
                ns,
                max0(v.iter().map(|t| t.2)),
                1e-3,
            ));
        }
        Err(_) => {
            out.push(CheckEntry::failed("F interpolates f*", "F = f* on E*", ns, 1e-5));
            out.push(CheckEntry::failed("∇F interpolates G*", "∇F = G* on E*", ns, 1e-6));
            out.push(CheckEntry::failed("finite differences of F match G*", "(F(y + h e) - F(y - h e)) / 2h = <G*(y), e> on E*", ns, 1e-3));
        }
    }

    // sharpness at a site attaining L
    let (i_max, _) = r
        .jet
        .points()
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, p)| if p.gradient.norm() > b.1 { (i, p.gradient.norm()) } else { b });
    out.push(match ext.eval_f(&r.jet.points()[i_max].site) {
        Ok(f) => CheckEntry::new("sharpness at the data", "|∇F(y0)| = L where |G(y0)| = L", 1, (f.gradient.norm() - l).abs(), 1e-9 * (1.0 + l)),
        Err(_) => CheckEntry::failed("sharpness at the data", "|∇F(y0)| = L where |G(y0)| = L", 1, 1e-9),
    });

    // pairs: Lipschitz and midpoint convexity
    let pair_vals: Vec<Result<(f64, f64, f64)>> = ctx
        .pairs
        .par_iter()
        .map(|(a, b)| {
            let fa = ext.eval_f(a)?.value;
            let fb = ext.eval_f(b)?.value;
            let fm = ext.eval_f(&((a + b) * 0.5))?.value;
            Ok((fa, fb, fm))
        })
        .collect();
    match pair_vals.into_iter().collect::<Result<Vec<_>>>() {
        Ok(v) => {
            let lip = max0(v.iter().zip(&ctx.pairs).map(|((fa, fb, _), (a, b))| (fa - fb).abs() - l * (a - b).norm()));
            let conv = max0(v.iter().map(|(fa, fb, fm)| fm - 0.5 * (fa + fb)));
            out.push(CheckEntry::new("F is L-Lipschitz", "|F(x) - F(x')| <= L |x - x'|", v.len(), lip, stol));
            out.push(CheckEntry::new("F midpoint convexity", "F((x + x')/2) <= (F(x) + F(x'))/2", v.len(), conv, stol));
        }
        Err(_) => {
            out.push(CheckEntry::failed("F is L-Lipschitz", "|F(x) - F(x')| <= L |x - x'|", ctx.pairs.len(), stol));
            out.push(CheckEntry::failed("F midpoint convexity", "F((x + x')/2) <= (F(x) + F(x'))/2", ctx.pairs.len(), stol));
        }
    }

    out.push(second_difference_check(ctx));
    out.extend(probe_checks(ctx));
    out
}

fn second_difference_check(ctx: &Context) -> CheckEntry {
    let ext = ctx.ext;
    let name = "second differences";
    let anchor = "(F(x + h) + F(x - h) - 2F(x)) / |h| -> 0";
    let step = ctx.cfg.second_difference_step;
    let mut rng = sampling::rng(ctx.cfg.seed.wrapping_add(3));
    let count = ctx.cfg.second_difference_points.min(ctx.points.len());
    let cases: Vec<(Vector, Vector)> = ctx.points[..count]
        .iter()
        .map(|x| (x.clone(), sampling::unit_vector(&mut rng, x.len()) * step))
        .collect();
    let vals: Vec<Result<f64>> = cases
        .par_iter()
        .map(|(x, h)| {
            let s = ext.eval_f(&(x + h))?.value + ext.eval_f(&(x - h))?.value - 2.0 * ext.eval_f(x)?.value;
            Ok(s / step)
        })
        .collect();
    match vals.into_iter().collect::<Result<Vec<_>>>() {
        Ok(v) => CheckEntry::new(name, anchor, v.len(), max0(v), ctx.cfg.second_difference_bound),
        Err(_) => CheckEntry::failed(name, anchor, count, ctx.cfg.second_difference_bound),
    }
}

fn probe_checks(ctx: &Context) -> Vec<CheckEntry> {
    let ext = ctx.ext;
    let x = ext.x();
    let perp_name = ("probe along X⊥ vanishes", "F(x + t w) - F(x) - t <v*, w> = 0 for w in X⊥");
    let grow_name = ("probe along X grows", "F(x + t w) - F(x) - t <v*, w> grows at least like a* t for w in X");
    let mut out = Vec::new();

    let perp = x.complement().basis_vectors();
    if perp.is_empty() {
        out.push(CheckEntry::vacuous(perp_name.0, perp_name.1));
    } else {
        let cases: Vec<(Vector, Vector, f64)> = ctx.points[..ctx.points.len().min(20)]
            .iter()
            .flat_map(|p| perp.iter().flat_map(move |w| [1.0, -3.0, 10.0].map(|t| (p.clone(), w.clone(), t))))
            .collect();
        let vals: Vec<Result<f64>> = cases.par_iter().map(|(p, w, t)| ext.global_behavior_probe(p, w, *t)).collect();
        out.push(match vals.into_iter().collect::<Result<Vec<_>>>() {
            Ok(v) => CheckEntry::new(perp_name.0, perp_name.1, v.len(), max0(v.into_iter().map(f64::abs)), 2.0 * ctx.solver_tol),
            Err(_) => CheckEntry::failed(perp_name.0, perp_name.1, cases.len(), 2.0 * ctx.solver_tol),
        });
    }

    match &ctx.r.second {
        Some(dec) if x.dim() > 0 => {
            let base = &ctx.r.jet.points()[0].site;
            let far = ctx.cfg.probe_far;
            let dirs: Vec<Vector> = x.basis_vectors().into_iter().flat_map(|w| [w.clone(), -w]).collect();
            let vals: Vec<Result<f64>> = dirs
                .par_iter()
                .map(|w| {
                    let growth = ext.global_behavior_probe(base, w, far)? - ext.global_behavior_probe(base, w, 1.0)?;
                    Ok(dec.a * far / 2.0 - growth)
                })
                .collect();
            out.push(match vals.into_iter().collect::<Result<Vec<_>>>() {
                Ok(v) => CheckEntry::new(grow_name.0, grow_name.1, v.len(), max0(v), 0.0),
                Err(_) => CheckEntry::failed(grow_name.0, grow_name.1, dirs.len(), 0.0),
            });
        }
        _ => out.push(CheckEntry::vacuous(grow_name.0, grow_name.1)),
    }
    out
}

/// Span of differences of all slopes active (within rounding) at `points`,
/// compared with `x`.
pub fn subdifferential_span_check(m_star: &CornerFunction, x: &Subspace, points: &[Vector]) -> CheckEntry {
    let scale = 1.0 + m_star.lipschitz();
    let mut slopes: Vec<Vector> = Vec::new();
    for p in points {
        let (top, _) = m_star.eval(p);
        let tol = 1e-12 * (1.0 + top.abs() + scale * p.norm());
        for piece in m_star.pieces() {
            if piece.slope.dot(p) + piece.offset >= top - tol
                && slopes.iter().all(|s| (s - &piece.slope).amax() > 1e-14 * scale)
            {
                slopes.push(piece.slope.clone());
            }
        }
    }
    let gap = match slopes.first() {
        None => f64::MAX,
        Some(s0) => {
            let diffs: Vec<Vector> = slopes[1..].iter().map(|s| s - s0).collect();
            match Subspace::span_with_scale(x.ambient_dim(), &diffs, x.rank_tol(), m_star.lipschitz()) {
                Ok(span) if span.dim() == x.dim() => span.projector_distance(x),
                Ok(_) => 1.0,
                Err(_) => f64::MAX,
            }
        }
    };
    CheckEntry::new(
        "subdifferential span",
        "span{ξ_x - ξ_y : ξ ∈ ∂m*} = X",
        points.len(),
        gap,
        1e-8,
    )
}
