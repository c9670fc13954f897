//! End-to-end construction: validation, minimal extension, decomposition,
//! augmentation, smooth interpolant and the final Lipschitz envelope.

use serde::{Deserialize, Serialize};

use crate::augment::{
    self, check_differentiability_at_data, decompose_star, Augmentation, AugmentedJet,
    DifferentiabilityReport,
};
use crate::envelope::{Extension, DEFAULT_GRAD_SWITCH_REL};
use crate::error::{Error, Result};
use crate::geometry::{Subspace, Vector, DEFAULT_RANK_TOL};
use crate::jet::{lipschitz_bound, validate_with_rank_tol, Jet, Tolerances, ValidationReport};
use crate::lft::{default_resolution, EnvelopeGrid};
use crate::minimal::{build_minimal, decompose, CornerFunction, Decomposition};
use crate::smooth::{DataPoint, SmoothInterpolant, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Defaults to `1e-9 (1 + max|f|)`.
    pub tol_eq: Option<f64>,
    /// Defaults to `1e-7 (1 + L)`.
    pub tol_grad: Option<f64>,
    pub rank_tol: f64,
    /// Factor applied to the smallest admissible curvature `M`.
    pub curvature_margin: f64,
    pub box_inflation: f64,
    /// Points per axis of the stored envelope grid; defaults by dimension.
    pub grid_resolution: Option<usize>,
    pub build_grid: bool,
    pub solver: SolverConfig,
    pub grad_switch_rel: f64,
    /// Step of the finite differences checking `∇c*` at the data.
    pub fd_step: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tol_eq: None,
            tol_grad: None,
            rank_tol: DEFAULT_RANK_TOL,
            curvature_margin: 1.0,
            box_inflation: 3.0,
            grid_resolution: None,
            build_grid: true,
            solver: SolverConfig::default(),
            grad_switch_rel: DEFAULT_GRAD_SWITCH_REL,
            fd_step: 1e-5,
        }
    }
}

impl PipelineConfig {
    pub fn check(&self) -> Result<()> {
        let positive = [
            ("tol_eq", self.tol_eq.unwrap_or(1.0)),
            ("tol_grad", self.tol_grad.unwrap_or(1.0)),
            ("rank_tol", self.rank_tol),
            ("curvature_margin", self.curvature_margin),
            ("box_inflation", self.box_inflation),
            ("solver.tolerance", self.solver.tolerance),
            ("grad_switch_rel", self.grad_switch_rel),
            ("fd_step", self.fd_step),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Parse(format!("{name} must be positive, got {value}")));
            }
        }
        if self.curvature_margin < 1.0 {
            return Err(Error::Parse("curvature_margin must be at least 1".into()));
        }
        if self.solver.max_iterations == 0 {
            return Err(Error::Parse("solver.max_iterations must be positive".into()));
        }
        Ok(())
    }

    pub fn tolerances(&self, jet: &Jet) -> Tolerances {
        let base = Tolerances::for_jet(jet);
        Tolerances {
            tol_eq: self.tol_eq.unwrap_or(base.tol_eq),
            tol_grad: self.tol_grad.unwrap_or(base.tol_grad),
            rank_tol: self.rank_tol,
        }
    }
}

/// All intermediate objects of the construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionResult {
    pub jet: Jet,
    pub tolerances: Tolerances,
    pub validation: ValidationReport,
    pub lipschitz: f64,
    pub y: Subspace,
    pub x: Subspace,
    pub minimal: CornerFunction,
    /// `m = c o P_Y + <v, .>`; absent for constant gradients.
    pub first: Option<Decomposition>,
    /// Present when `Y ⊊ X`.
    pub augmentation: Option<Augmentation>,
    pub augmented: AugmentedJet,
    pub m_star: CornerFunction,
    /// `m* = c* o P_X + <v*, .>`; absent for constant gradients.
    pub second: Option<Decomposition>,
    pub differentiability: Option<DifferentiabilityReport>,
    pub extension: Extension,
    #[serde(skip)]
    pub grid: Option<EnvelopeGrid>,
}

impl ExtensionResult {
    /// `E*` with its data (the input jet when no points were added).
    pub fn augmented_jet(&self) -> Jet {
        self.augmented.combined().expect("augmented jet was validated at construction")
    }
}

/// Span of `x_span` or, when absent, `Y`.
pub fn resolve_x(jet: &Jet, y: &Subspace, x_span: Option<&[Vector]>, rank_tol: f64) -> Result<Subspace> {
    match x_span {
        None => Ok(y.clone()),
        Some(vs) => {
            let scale = vs.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let x = Subspace::span_with_scale(jet.ambient_dim(), vs, rank_tol, scale)?;
            let residual = x.containment_residual(y);
            if residual > 1e-10 {
                return Err(Error::YNotInX { residual });
            }
            Ok(x)
        }
    }
}

pub fn extend(jet: &Jet, x_span: Option<&[Vector]>, cfg: &PipelineConfig) -> Result<ExtensionResult> {
    cfg.check()?;
    let tolerances = cfg.tolerances(jet);
    let validation = validate_with_rank_tol(jet, tolerances.tol_eq, tolerances.tol_grad, tolerances.rank_tol);
    if !validation.passed {
        return Err(Error::ConditionsViolated(format!(
            "{} convexity violation(s), {} flatness violation(s), min residual {:?}",
            validation.convexity_violations.len(),
            validation.cw1_violations.len(),
            validation.min_convexity_residual
        )));
    }
    let lipschitz = lipschitz_bound(jet);
    let y = validation.y.clone();
    let x = resolve_x(jet, &y, x_span, tolerances.rank_tol)?;
    let minimal = build_minimal(jet);

    let (first, augmentation, augmented, m_star, second, v_star) = if y.dim() == 0 {
        if x.dim() > 0 {
            return Err(Error::ConstantGradient { dim_x: x.dim() });
        }
        let g = jet.points()[0].gradient.clone();
        (None, None, augment::unaugmented(jet, &x), minimal.clone(), None, g)
    } else {
        let first = decompose(&minimal, &y, lipschitz)?;
        let (augmented, augmentation) = if x.dim() > y.dim() {
            let (aj, aug) = augment::augment(jet, &minimal, &first, &x)?;
            (aj, Some(aug))
        } else {
            (augment::unaugmented(jet, &x), None)
        };
        let m_star = augment::build_m_star(&augmented)?;
        let second = decompose_star(&m_star, &x, lipschitz, &first.v)?;
        let v_star = second.v.clone();
        (Some(first), augmentation, augmented, m_star, Some(second), v_star)
    };

    let differentiability = match &second {
        Some(dec) => Some(check_differentiability_at_data(dec, &augmented, cfg.fd_step)?),
        None => None,
    };

    let data: Vec<DataPoint> = augmented
        .combined()?
        .points()
        .iter()
        .map(|p| DataPoint {
            z: x.coords(&p.site),
            value: p.value - v_star.dot(&p.site),
            slope: x.coords(&(&p.gradient - &v_star)),
        })
        .collect();
    let interpolant =
        SmoothInterpolant::new(data, cfg.curvature_margin, tolerances.tol_grad, cfg.box_inflation, cfg.solver)?;
    let grid = match cfg.grid_resolution.or_else(|| default_resolution(x.dim())) {
        Some(res) if cfg.build_grid && x.dim() > 0 => Some(EnvelopeGrid::build(&interpolant, res)?),
        _ => None,
    };
    let extension = Extension::new(x.clone(), v_star, lipschitz, interpolant, m_star.clone(), cfg.grad_switch_rel)?;

    Ok(ExtensionResult {
        jet: jet.clone(),
        tolerances,
        validation,
        lipschitz,
        y,
        x,
        minimal,
        first,
        augmentation,
        augmented,
        m_star,
        second,
        differentiability,
        extension,
        grid,
    })
}
