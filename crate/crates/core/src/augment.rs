//! New data points that raise the coercivity subspace from `Y` to `X` without
//! raising `sup |G|`.
//!
//! For each unit `w_j` of an orthonormal basis of `X ⊖ Y` a cone apex `p_j` is
//! placed beyond the data along `w_j`; the new site `q_j = p_j + T w_j` gets
//! value `m(q_j) + 1` and gradient `v + θ ε a w_j`, with `θ` and `T` chosen so
//! that the enlarged jet is still convex with unit slack.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Subspace, Vector};
use crate::jet::{lipschitz_bound, Jet, JetPoint};
use crate::minimal::{build_minimal, decompose, CornerFunction, Decomposition};

/// Aperture parameter of every cone.
pub const CONE_EPS: f64 = 0.5;

/// Slack below which a compatibility family is reported as failing.
pub const COMPATIBILITY_TOL: f64 = 1e-9;

/// `V = { x : eps <w, x - p> >= |P_Y(x - p)| }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    #[serde(with = "crate::serde_vec")]
    pub p: Vector,
    #[serde(with = "crate::serde_vec")]
    pub w: Vector,
    pub eps: f64,
}

impl ConeSpec {
    pub fn contains(&self, y: &Subspace, x: &Vector) -> bool {
        let d = x - &self.p;
        self.eps * self.w.dot(&d) >= y.project(&d).norm()
    }
}

/// The separate lower bounds on `T`; `t` exceeds their maximum by one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TBounds {
    /// `max |p_i - p_j| / |w_i - w_j|` (distinct new sites).
    pub separation: f64,
    /// `(2 - b + max_j c(P_Y p_j) + a |P_Y p_j|) / (θ ε a)`.
    pub cone: f64,
    /// Pairwise bound with the new gradients' magnitude `ε a`.
    pub pairwise: f64,
    /// Pairwise bound with the magnitude `θ ε a` actually used in `G*`.
    pub pairwise_scaled: f64,
}

impl TBounds {
    pub fn max(&self) -> f64 {
        self.separation.max(self.cone).max(self.pairwise).max(self.pairwise_scaled)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub theta: f64,
    pub t: f64,
    pub bounds: TBounds,
    pub a: f64,
    pub b: f64,
    pub eps: f64,
    pub lipschitz: f64,
    #[serde(with = "crate::serde_vec")]
    pub v: Vector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedJet {
    pub base: Jet,
    pub new_points: Vec<JetPoint>,
    pub x: Subspace,
    pub params: Option<AugmentParams>,
}

impl AugmentedJet {
    /// Base data followed by the new points.
    pub fn combined(&self) -> Result<Jet> {
        let mut pts = self.base.points().to_vec();
        pts.extend(self.new_points.iter().cloned());
        Jet::new(self.base.ambient_dim(), pts)
    }
}

/// Minimum slack of each family of inequalities between old and new data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    /// `f*(q_j) - f(x) - <G(x), q_j - x>`.
    pub new_above_old: Option<f64>,
    /// `f(x) - f*(q_j) - <G*(q_j), x - q_j>`.
    pub old_above_new: Option<f64>,
    /// `f*(q_i) - f*(q_j) - <G*(q_j), q_i - q_j>`.
    pub new_pairs: Option<f64>,
    pub passed: bool,
}

impl CompatibilityReport {
    pub fn worst(&self) -> Option<f64> {
        [self.new_above_old, self.old_above_new, self.new_pairs]
            .into_iter()
            .flatten()
            .reduce(f64::min)
    }
}

/// Cones along an orthonormal basis of `X ⊖ Y`, apex `p_j = (1 + max_E <w_j, x>) w_j`.
pub fn find_cones(jet: &Jet, y: &Subspace, x: &Subspace) -> Result<Vec<ConeSpec>> {
    let w = x.orthogonal_difference(y)?;
    Ok(w.basis_vectors()
        .into_iter()
        .map(|w| {
            let reach = jet
                .points()
                .iter()
                .map(|p| w.dot(&p.site))
                .fold(f64::NEG_INFINITY, f64::max);
            ConeSpec { p: &w * (1.0 + reach), w, eps: CONE_EPS }
        })
        .collect())
}

/// `θ = min(1/2, (L - |v|) / (4 a ε))`, so that `θ a ε < (L - |v|) / 2`.
pub fn choose_theta(lipschitz: f64, v_norm: f64, a: f64, eps: f64) -> Result<f64> {
    if !(v_norm < lipschitz) {
        return Err(Error::LinearPartTooLarge { v_norm, lipschitz });
    }
    Ok(0.5f64.min((lipschitz - v_norm) / (4.0 * a * eps)))
}

/// Lower bounds on `T` and `T = 1 + max` of them. Maxima over empty index
/// sets are 0.
pub fn choose_t(cones: &[ConeSpec], theta: f64, dec: &Decomposition) -> (f64, TBounds) {
    let (a, b) = (dec.a, dec.b);
    let y = &dec.subspace;
    let c = &dec.coercive_part;
    let c_at: Vec<f64> = cones.iter().map(|k| c.value(&y.project(&k.p))).collect();
    let mut bounds = TBounds { separation: 0.0, cone: 0.0, pairwise: 0.0, pairwise_scaled: 0.0 };

    let cone_max = cones
        .iter()
        .zip(&c_at)
        .map(|(k, ci)| ci + a * y.project(&k.p).norm())
        .fold(f64::NEG_INFINITY, f64::max);
    if !cones.is_empty() {
        let eps = cones[0].eps;
        bounds.cone = (2.0 - b + cone_max) / (theta * eps * a);
    }

    let mut min_w_gap2 = f64::INFINITY;
    let (mut worst, mut worst_scaled) = (0.0f64, 0.0f64);
    for i in 0..cones.len() {
        for j in 0..cones.len() {
            if i == j {
                continue;
            }
            let (ki, kj) = (&cones[i], &cones[j]);
            let wgap = (&ki.w - &kj.w).norm();
            min_w_gap2 = min_w_gap2.min(wgap * wgap);
            bounds.separation = bounds.separation.max((&ki.p - &kj.p).norm() / wgap);
            let dp = kj.w.dot(&(&ki.p - &kj.p));
            let base = c_at[j] - c_at[i];
            worst = worst.max((base + kj.eps * a * dp).abs());
            worst_scaled = worst_scaled.max((base + theta * kj.eps * a * dp).abs());
        }
    }
    if cones.len() > 1 {
        let eps = cones[0].eps;
        bounds.pairwise = (1.0 + worst) / (eps * a / 2.0 * min_w_gap2);
        bounds.pairwise_scaled = (1.0 + worst_scaled) / (theta * eps * a / 2.0 * min_w_gap2);
    }
    (1.0 + bounds.max(), bounds)
}

/// `q_j = p_j + T w_j`, `f*(q_j) = m(q_j) + 1`, `G*(q_j) = v + θ ε a w_j`.
pub fn make_augmented(
    jet: &Jet,
    m: &CornerFunction,
    dec: &Decomposition,
    x: &Subspace,
    cones: &[ConeSpec],
    params: AugmentParams,
) -> Result<AugmentedJet> {
    let scale = 1.0 + jet.points().iter().map(|p| p.site.norm()).fold(0.0, f64::max);
    let mut new_points = Vec::with_capacity(cones.len());
    for k in cones {
        let q = &k.p + &k.w * params.t;
        if jet.points().iter().any(|p| (&p.site - &q).norm() <= 1e-12 * scale) {
            return Err(Error::Internal("new site collides with a data site".into()));
        }
        let g = &dec.v + &k.w * (params.theta * k.eps * params.a);
        new_points.push(JetPoint::new(q.clone(), m.value(&q) + 1.0, g));
    }
    Ok(AugmentedJet { base: jet.clone(), new_points, x: x.clone(), params: Some(params) })
}

/// Jet unchanged, for `X = Y`.
pub fn unaugmented(jet: &Jet, x: &Subspace) -> AugmentedJet {
    AugmentedJet { base: jet.clone(), new_points: Vec::new(), x: x.clone(), params: None }
}

pub fn verify_compatibility(aj: &AugmentedJet) -> CompatibilityReport {
    let base = aj.base.points();
    let new = &aj.new_points;
    let fold = |acc: Option<f64>, r: f64| Some(acc.map_or(r, |m: f64| m.min(r)));
    let (mut fam1, mut fam2, mut fam3) = (None, None, None);
    for q in new {
        for x in base {
            fam1 = fold(fam1, q.value - x.value - x.gradient.dot(&(&q.site - &x.site)));
            fam2 = fold(fam2, x.value - q.value - q.gradient.dot(&(&x.site - &q.site)));
        }
        for qi in new {
            if std::ptr::eq(qi, q) {
                continue;
            }
            fam3 = fold(fam3, qi.value - q.value - q.gradient.dot(&(&qi.site - &q.site)));
        }
    }
    let ok = |f: Option<f64>| f.is_none_or(|s| s >= 1.0 - COMPATIBILITY_TOL);
    CompatibilityReport {
        passed: ok(fam1) && ok(fam2) && ok(fam3),
        new_above_old: fam1,
        old_above_new: fam2,
        new_pairs: fam3,
    }
}

/// `m*`, the minimal convex extension of the enlarged jet.
pub fn build_m_star(aj: &AugmentedJet) -> Result<CornerFunction> {
    Ok(build_minimal(&aj.combined()?))
}

/// Decomposition of `m*` along `X`, with the checks that tie it to the first one.
pub fn decompose_star(
    m_star: &CornerFunction,
    x: &Subspace,
    lipschitz: f64,
    first_v: &Vector,
) -> Result<Decomposition> {
    let dec = decompose(m_star, x, lipschitz)?;
    let drift = (x.reject(&dec.v) - x.reject(first_v)).norm();
    if drift > 1e-10 * (1.0 + lipschitz) {
        return Err(Error::Internal(format!(
            "component of v* orthogonal to X differs from that of v by {drift:.3e}"
        )));
    }
    Ok(dec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentiabilityReport {
    pub step: f64,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Central differences of `c*` at every projected site of `E*` against `G* - v*`.
pub fn check_differentiability_at_data(
    dec: &Decomposition,
    aj: &AugmentedJet,
    h: f64,
) -> Result<DifferentiabilityReport> {
    let x = &dec.subspace;
    let c = &dec.coercive_part;
    let basis = x.basis_vectors();
    let mut worst = 0.0f64;
    for p in aj.combined()?.points() {
        let z = x.project(&p.site);
        let target = x.coords(&(&p.gradient - &dec.v));
        for (k, e) in basis.iter().enumerate() {
            let fd = (c.value(&(&z + e * h)) - c.value(&(&z - e * h))) / (2.0 * h);
            worst = worst.max((fd - target[k]).abs());
        }
    }
    let tolerance = 10.0 * h;
    Ok(DifferentiabilityReport { step: h, max_deviation: worst, tolerance, passed: worst <= tolerance })
}

/// Everything produced by the augmentation stage for `Y ⊊ X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Augmentation {
    pub cones: Vec<ConeSpec>,
    pub params: AugmentParams,
    pub compatibility: CompatibilityReport,
}

/// Runs cones, θ, T and the new data for a decomposition of `m` along `Y`.
pub fn augment(
    jet: &Jet,
    m: &CornerFunction,
    first: &Decomposition,
    x: &Subspace,
) -> Result<(AugmentedJet, Augmentation)> {
    let lipschitz = lipschitz_bound(jet);
    let cones = find_cones(jet, &first.subspace, x)?;
    if cones.is_empty() {
        return Err(Error::Internal("augmentation requested with X = Y".into()));
    }
    let theta = choose_theta(lipschitz, first.v.norm(), first.a, CONE_EPS)?;
    let (t, bounds) = choose_t(&cones, theta, first);
    let params = AugmentParams {
        theta,
        t,
        bounds,
        a: first.a,
        b: first.b,
        eps: CONE_EPS,
        lipschitz,
        v: first.v.clone(),
    };
    let aj = make_augmented(jet, m, first, x, &cones, params.clone())?;
    let compatibility = verify_compatibility(&aj);
    if !compatibility.passed {
        return Err(Error::Internal(format!(
            "augmented data lost convexity slack (worst {:?})",
            compatibility.worst()
        )));
    }
    Ok((aj, Augmentation { cones, params, compatibility }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{compute_y, validate};

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    fn two_point_2d() -> Jet {
        Jet::new(
            2,
            vec![
                JetPoint::new(v(&[-1.0, 0.0]), 1.0, v(&[-1.0, 0.0])),
                JetPoint::new(v(&[1.0, 0.0]), 1.0, v(&[1.0, 0.0])),
            ],
        )
        .unwrap()
    }

    #[test]
    fn cone_for_two_point_example() {
        let j = two_point_2d();
        let y = compute_y(&j, 1e-9).unwrap();
        let cones = find_cones(&j, &y, &Subspace::full(2)).unwrap();
        assert_eq!(cones.len(), 1);
        assert_eq!(cones[0].w, v(&[0.0, 1.0]));
        assert_eq!(cones[0].p, v(&[0.0, 1.0]));
        assert_eq!(cones[0].eps, 0.5);
        for p in j.points() {
            assert!(!cones[0].contains(&y, &p.site));
        }
        assert!(find_cones(&j, &y, &y).unwrap().is_empty());
        let not_containing = Subspace::span(2, &[v(&[0.0, 1.0])], 1e-9).unwrap();
        assert!(matches!(find_cones(&j, &y, &not_containing), Err(Error::YNotInX { .. })));
    }

    #[test]
    fn theta_examples() {
        assert_eq!(choose_theta(1.0, 0.0, 1.0, 0.5).unwrap(), 0.5);
        assert!((choose_theta(1.0, 0.9, 1.0, 0.5).unwrap() - 0.05).abs() < 1e-15);
        assert!(choose_theta(1.0, 1.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn two_point_augmentation() {
        let j = two_point_2d();
        let y = compute_y(&j, 1e-9).unwrap();
        let m = build_minimal(&j);
        let first = decompose(&m, &y, 1.0).unwrap();
        assert_eq!((first.a, first.b), (1.0, 0.0));
        let x = Subspace::full(2);
        let (aj, aug) = augment(&j, &m, &first, &x).unwrap();
        assert_eq!(aug.params.theta, 0.5);
        assert_eq!(aug.params.bounds.cone, 8.0);
        assert_eq!(aug.params.t, 9.0);
        let q = &aj.new_points[0];
        assert_eq!(q.site, v(&[0.0, 10.0]));
        assert_eq!(q.value, 1.0);
        assert_eq!(q.gradient, v(&[0.0, 0.25]));

        // Family (2) at x = (1, 0): 1 - 1 - <(0, 0.25), (1, -10)> = 2.5.
        let c = &aug.compatibility;
        assert!(c.passed);
        assert_eq!(c.old_above_new, Some(2.5));
        assert_eq!(c.new_pairs, None);
        assert!(c.new_above_old.unwrap() >= 1.0);

        let combined = aj.combined().unwrap();
        assert!(validate(&combined, 1e-9, 1e-7).passed);

        let m_star = build_m_star(&aj).unwrap();
        for p in combined.points() {
            assert!((m_star.value(&p.site) - p.value).abs() < 1e-12);
        }
        let star = decompose_star(&m_star, &x, 1.0, &first.v).unwrap();
        assert!((&star.v - v(&[0.0, 1.0 / 12.0])).amax() < 1e-15);
        assert!((star.a - 1.0 / 12.0).abs() < 1e-14);
        let diff = check_differentiability_at_data(&star, &aj, 1e-5).unwrap();
        assert!(diff.passed, "{diff:?}");
    }

    #[test]
    fn several_cones_keep_pairwise_slack() {
        // f(x) = sqrt(1 + x1^2) + 0.2 x3: Y = span{e1} in R^3, X = R^3 needs two cones.
        let point = |x: [f64; 3]| {
            let r = (1.0 + x[0] * x[0]).sqrt();
            JetPoint::new(v(&x), r + 0.2 * x[2], v(&[x[0] / r, 0.0, 0.2]))
        };
        let j = Jet::new(3, vec![point([-1.0, 0.3, 0.0]), point([1.0, 0.0, -0.4]), point([0.0, 2.0, 1.0])])
            .unwrap();
        assert!(validate(&j, 1e-9, 1e-7).passed);
        let y = compute_y(&j, 1e-9).unwrap();
        assert_eq!(y.dim(), 1);
        let m = build_minimal(&j);
        let first = decompose(&m, &y, lipschitz_bound(&j)).unwrap();
        let x = Subspace::full(3);
        let (aj, aug) = augment(&j, &m, &first, &x).unwrap();
        assert_eq!(aj.new_points.len(), 2);
        assert!(aug.compatibility.new_pairs.unwrap() >= 1.0 - 1e-9);
        assert!(aug.params.t > aug.params.bounds.max());
        let l = lipschitz_bound(&j);
        for q in &aj.new_points {
            assert!(q.gradient.norm() <= (l + first.v.norm()) / 2.0 + 1e-15);
        }
        let m_star = build_m_star(&aj).unwrap();
        let star = decompose_star(&m_star, &x, l, &first.v).unwrap();
        assert!(star.v.norm() < l);
    }
}
