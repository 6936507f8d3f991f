//! Damped wave problems `ü + αA^ε ů + Au = f` and the scalar angle sweep.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::{fmt_float, CsvTable};
use crate::operator::{elliptic1d, fractional_power, laplacian1d, Operator};
use crate::path::SampledPath;
use crate::pencil::{check_pencil_hypotheses, predict_parabolic_angle, PencilSymbol, SectorGrid};
use crate::solver::CauchyProblem;
use crate::{CVector, C64};

/// Time grid points used when none is given.
pub const DEFAULT_TIME_POINTS: usize = 129;
/// Drift coefficient of the drift instance.
pub const DRIFT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GalleryName {
    /// `A = −Δ_h`, `B = αA`.
    StrongDamping,
    /// `A = −a u'' + b u'` (central drift), `B = αA`.
    StrongDampingDrift,
    /// `A = Δ_h²`, `B = αA^{1/2}`.
    IntermediateDamping,
    /// `A = [a]`, `B = α a^{1/2}`.
    Scalar(f64),
}

impl GalleryName {
    pub fn eps(&self) -> f64 {
        match self {
            GalleryName::StrongDamping | GalleryName::StrongDampingDrift => 1.0,
            GalleryName::IntermediateDamping | GalleryName::Scalar(_) => 0.5,
        }
    }
}

impl FromStr for GalleryName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "strong_damping" => Ok(Self::StrongDamping),
            "strong_damping_drift" => Ok(Self::StrongDampingDrift),
            "intermediate_damping" => Ok(Self::IntermediateDamping),
            other => {
                let a = other
                    .strip_prefix("scalar(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| invalid(format!("unknown gallery instance {other:?}")))?;
                let a: f64 = a
                    .trim()
                    .parse()
                    .map_err(|_| invalid(format!("bad scalar gallery parameter {a:?}")))?;
                if !(a > 0.0 && a.is_finite()) {
                    return Err(invalid("scalar gallery parameter must be positive"));
                }
                Ok(Self::Scalar(a))
            }
        }
    }
}

impl fmt::Display for GalleryName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GalleryName::StrongDamping => f.write_str("strong_damping"),
            GalleryName::StrongDampingDrift => f.write_str("strong_damping_drift"),
            GalleryName::IntermediateDamping => f.write_str("intermediate_damping"),
            GalleryName::Scalar(a) => write!(f, "scalar({a})"),
        }
    }
}

/// Forcing families. The time-dependent ones carry the spatial profile `sin(πx_i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Forcing {
    /// `t²`.
    Smooth,
    /// `|t − T/2|^θ`.
    RoughHolder { theta: f64 },
    /// `value` in every component, constant in time.
    Constant { value: f64 },
}

impl Forcing {
    pub fn sample(&self, n: usize, t_end: f64, n_points: usize) -> Result<SampledPath> {
        let profile = sine_profile(n);
        match *self {
            Forcing::Smooth => SampledPath::separable(t_end, n_points, &profile, |t| t * t),
            Forcing::RoughHolder { theta } => {
                if !(theta > 0.0 && theta <= 1.0) {
                    return Err(invalid(format!("rough forcing exponent must lie in (0, 1], got {theta}")));
                }
                SampledPath::separable(t_end, n_points, &profile, |t| (t - 0.5 * t_end).abs().powf(theta))
            }
            Forcing::Constant { value } => {
                SampledPath::from_fn(t_end, n_points, |_| CVector::from_element(n, C64::new(value, 0.0)))
            }
        }
    }
}

/// `sin(πx_i)` at the interior nodes `x_i = i/(n+1)`.
pub fn sine_profile(n: usize) -> CVector {
    CVector::from_fn(n, |i, _| C64::new((PI * (i + 1) as f64 / (n + 1) as f64).sin(), 0.0))
}

#[derive(Clone, Debug)]
pub struct GalleryInstance {
    pub name: GalleryName,
    pub problem: CauchyProblem,
    pub pencil: PencilSymbol,
    pub eps: f64,
    pub alpha: f64,
    pub theta: f64,
    /// The spectral angle of `A` lies strictly inside the admissible window.
    pub expected_admissible: bool,
    pub forcing: Forcing,
}

/// Instance with smooth forcing on [`DEFAULT_TIME_POINTS`] time points.
pub fn gallery(name: &str, n: usize, t_end: f64, alpha: f64, theta: f64) -> Result<GalleryInstance> {
    gallery_with(name.parse()?, n, t_end, alpha, theta, DEFAULT_TIME_POINTS, Forcing::Smooth)
}

pub fn gallery_with(
    name: GalleryName,
    n: usize,
    t_end: f64,
    alpha: f64,
    theta: f64,
    n_points: usize,
    forcing: Forcing,
) -> Result<GalleryInstance> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(invalid(format!("damping factor must be positive, got {alpha}")));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("regularity exponent must lie in (0, 1), got {theta}")));
    }
    let eps = name.eps();
    let a = match name {
        GalleryName::StrongDamping => laplacian1d(n, 1.0)?,
        GalleryName::StrongDampingDrift => elliptic1d(n, 1.0, 1.0, DRIFT, 0.0)?,
        GalleryName::IntermediateDamping => {
            let l = laplacian1d(n, 1.0)?;
            l.compose(&l)?.with_label("bilaplacian1d")
        }
        GalleryName::Scalar(v) => Operator::scalar(C64::new(v, 0.0)),
    };
    let b = fractional_power(&a, eps)?.scaled(C64::new(alpha, 0.0));
    let pencil = PencilSymbol::new(a.clone(), b.clone())?;
    let f = forcing.sample(a.dim(), t_end, n_points)?;
    let problem = CauchyProblem::homogeneous(a.clone(), b, f)?;
    let expected_admissible = match predict_parabolic_angle(eps, alpha) {
        Ok(limit) => a.spectral_angle()? < limit,
        Err(Error::Unsupported(_)) => false,
        Err(e) => return Err(e),
    };
    Ok(GalleryInstance {
        name,
        problem,
        pencil,
        eps,
        alpha,
        theta,
        expected_admissible,
        forcing,
    })
}

/// Sweep grid and certification settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    /// The pencil is certified on `Σ_{π/2 + margin}`.
    pub margin: f64,
    pub radial_count: usize,
    pub angular_count: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            margin: 0.01,
            radial_count: SectorGrid::DEFAULT_RADIAL,
            angular_count: SectorGrid::DEFAULT_ANGULAR,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub alpha: f64,
    pub phi: f64,
    pub predicted: bool,
    pub certified: bool,
    pub certified_failure: bool,
    pub sup_h: f64,
    pub sup_l2h: f64,
    pub sup_lbh: f64,
    pub sup_ah: f64,
}

/// Scalar pencil `λ² + α(e^{iφ})^ε λ + e^{iφ}`: `A = 1` rotated to angle `φ`.
pub fn rotated_scalar_pencil(eps: f64, alpha: f64, phi: f64) -> Result<PencilSymbol> {
    let a = C64::from_polar(1.0, phi);
    PencilSymbol::new(Operator::scalar(a), Operator::scalar(a.powf(eps) * alpha))
}

fn sweep_row(eps: f64, alpha: f64, phi: f64, params: &SweepParams) -> Result<SweepRow> {
    let predicted = match predict_parabolic_angle(eps, alpha) {
        Ok(limit) => phi < limit,
        Err(Error::Unsupported(_)) => false,
        Err(e) => return Err(e),
    };
    let pencil = rotated_scalar_pencil(eps, alpha, phi)?;
    let grid = SectorGrid::for_pencil(&pencil, FRAC_PI_2 + params.margin)?
        .with_density(params.radial_count, params.angular_count);
    let r = check_pencil_hypotheses(&pencil, &grid, None)?.report;
    Ok(SweepRow {
        eps,
        alpha,
        phi,
        predicted,
        certified: r.passes(),
        certified_failure: r.certified_failure,
        sup_h: r.sup_h,
        sup_l2h: r.sup_l2h,
        sup_lbh: r.sup_lbh,
        sup_ah: r.sup_ah,
    })
}

/// One row per `(ε, α, φ)` in lexicographic order.
pub fn sweep(eps_grid: &[f64], alpha_grid: &[f64], phi_grid: &[f64]) -> Result<Vec<SweepRow>> {
    sweep_with(eps_grid, alpha_grid, phi_grid, &SweepParams::default())
}

pub fn sweep_with(eps_grid: &[f64], alpha_grid: &[f64], phi_grid: &[f64], params: &SweepParams) -> Result<Vec<SweepRow>> {
    if eps_grid.is_empty() || alpha_grid.is_empty() || phi_grid.is_empty() {
        return Err(invalid("sweep grids must be nonempty"));
    }
    if !(params.margin > 0.0 && params.margin < FRAC_PI_2) {
        return Err(invalid(format!("sweep margin must lie in (0, π/2), got {}", params.margin)));
    }
    for &phi in phi_grid {
        if !(phi > 0.0 && phi < PI) {
            return Err(invalid(format!("sweep angle must lie in (0, π), got {phi}")));
        }
    }
    let triples: Vec<(f64, f64, f64)> = eps_grid
        .iter()
        .flat_map(|&e| alpha_grid.iter().flat_map(move |&a| phi_grid.iter().map(move |&p| (e, a, p))))
        .collect();
    triples
        .par_iter()
        .map(|&(e, a, p)| sweep_row(e, a, p, params))
        .collect()
}

/// Columns `eps, alpha, phi, predicted, certified, sup_H, sup_l2H, sup_lBH, sup_AH`.
pub fn sweep_csv(rows: &[SweepRow]) -> CsvTable {
    let mut t = CsvTable::new([
        "eps", "alpha", "phi", "predicted", "certified", "sup_H", "sup_l2H", "sup_lBH", "sup_AH",
    ]);
    for r in rows {
        t.push([
            fmt_float(r.eps),
            fmt_float(r.alpha),
            fmt_float(r.phi),
            r.predicted.to_string(),
            r.certified.to_string(),
            fmt_float(r.sup_h),
            fmt_float(r.sup_l2h),
            fmt_float(r.sup_lbh),
            fmt_float(r.sup_ah),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pencil::scalar_pole_locus;

    #[test]
    fn names_round_trip() {
        for s in ["strong_damping", "strong_damping_drift", "intermediate_damping", "scalar(2.5)"] {
            assert_eq!(s.parse::<GalleryName>().unwrap().to_string(), s);
        }
        assert!("wave".parse::<GalleryName>().is_err());
        assert!("scalar(-1)".parse::<GalleryName>().is_err());
    }

    #[test]
    fn admissibility_examples() {
        assert!(gallery("strong_damping", 8, 1.0, 1.0, 0.5).unwrap().expected_admissible);
        assert!(gallery("intermediate_damping", 8, 1.0, 2.5, 0.5).unwrap().expected_admissible);
        assert!(gallery("strong_damping_drift", 8, 1.0, 1.0, 0.5).unwrap().expected_admissible);
        let s = gallery("scalar(1)", 1, 1.0, 1.0, 0.5).unwrap();
        assert_eq!(s.eps, 0.5);
        assert!((scalar_pole_locus(1.0, 1.0, 0.5, 0.0).min_abs_angle() - 2.0 * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn damping_structure() {
        for name in ["strong_damping", "strong_damping_drift", "intermediate_damping"] {
            let g = gallery(name, 8, 1.0, 1.3, 0.5).unwrap();
            let expected = fractional_power(g.pencil.a(), g.eps).unwrap().scaled(C64::new(1.3, 0.0));
            assert!(g.pencil.b().relative_distance(&expected) < 1e-10, "{name}");
        }
        let g = gallery("intermediate_damping", 8, 1.0, 2.0, 0.5).unwrap();
        let lap = laplacian1d(8, 1.0).unwrap();
        assert!(g.pencil.a().relative_distance(&lap.compose(&lap).unwrap()) < 1e-12);
        assert!(g.pencil.b().relative_distance(&lap.scaled(C64::new(2.0, 0.0))) < 1e-8);
    }

    #[test]
    fn forcings() {
        let f = Forcing::Smooth.sample(3, 2.0, 5).unwrap();
        assert_eq!(f.value(0).norm(), 0.0);
        assert!((f.value(4)[1].re - 4.0).abs() < 1e-15);
        let r = Forcing::RoughHolder { theta: 0.5 }.sample(1, 1.0, 5).unwrap();
        assert_eq!(r.value(2)[0].re, 0.0);
        assert!((r.value(0)[0].re - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn sweep_examples() {
        let rows = sweep(&[0.5], &[2.0], &[3.0]).unwrap();
        assert!(rows[0].predicted && rows[0].certified);
        let rows = sweep(&[0.5], &[1.0], &[PI / 3.0 + 0.1]).unwrap();
        assert!(!rows[0].predicted && !rows[0].certified && rows[0].certified_failure);
        let t = sweep_csv(&rows);
        assert_eq!(t.header().join(","), "eps,alpha,phi,predicted,certified,sup_H,sup_l2H,sup_lBH,sup_AH");
    }
}
