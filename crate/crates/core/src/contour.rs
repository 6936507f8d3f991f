//! Quadrature contour for the solution operator.
//!
//! Γ consists of two rays `δ + r·e^{±iφ′}` leaving the vertex `δ > 0` on the
//! positive real axis. It is traversed downward, from `e^{iφ′}∞` through the
//! vertex to `e^{−iφ′}∞`: with the zero-trace resolvent
//! `R(λ,D)g(t) = −∫₀^t e^{λ(t−s)}g(s) ds` this is the orientation under which
//! `(1/2πi)∫_Γ R(λ,D)H(λ) dλ` inverts `D² + BD + A`.
//!
//! Each ray carries a trapezoid rule in `log r` on `[r₀, R]` and an eight-point
//! Gauss–Legendre rule on `[0, r₀]` next to the vertex, with `r₀ = δ/100`
//! small enough that the trapezoid end correction at `r₀` is negligible.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::operator::{operator_norm, Operator};
use crate::C64;

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
const GAUSS_8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362),
    (0.525_532_409_916_329, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

/// Inner end of the log-radial rule, relative to `δ`.
const INNER_RADIUS: f64 = 1e-2;

/// Contour construction parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourParams {
    /// Half-opening `φ₂` of the sector on which the pencil is controlled.
    pub phi2: f64,
    /// Tail tolerance; the truncation radius is `scale/√tol`.
    pub tol: f64,
    /// Trapezoid nodes on each ray.
    pub nodes_per_ray: usize,
}

impl Default for ContourParams {
    fn default() -> Self {
        Self {
            phi2: 3.0 * PI / 4.0,
            tol: 1e-10,
            nodes_per_ray: 100,
        }
    }
}

impl ContourParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi2 > FRAC_PI_2 && self.phi2 < PI) {
            return Err(invalid(format!("contour sector angle must lie in (π/2, π), got {}", self.phi2)));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(invalid(format!("contour tolerance must lie in (0, 1), got {}", self.tol)));
        }
        if self.nodes_per_ray < 2 {
            return Err(invalid("at least two nodes per ray are required"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contour {
    pub phi2: f64,
    /// Vertex offset `δ`.
    pub delta: f64,
    /// Ray angle `φ′`.
    pub ray_angle: f64,
    /// Truncation radius `R`.
    pub radius: f64,
    nodes: Vec<C64>,
    weights: Vec<C64>,
}

/// `max(‖A‖^{1/2}, ‖B‖, 1/T)`, the largest rate the solution can carry.
pub fn problem_scale(a: &Operator, b: &Operator, t_end: f64) -> f64 {
    operator_norm(a).sqrt().max(operator_norm(b)).max(1.0 / t_end)
}

/// Smallest `|arg|` over the nonzero poles of `H(λ) = (λ² + λB + A)⁻¹`,
/// i.e. the eigenvalues of the companion matrix `[[0, I], [−A, −B]]`.
/// Returns `π` when every pole is zero.
pub fn pole_sector_angle(a: &Operator, b: &Operator) -> Result<f64> {
    Ok(crate::pencil::pencil_poles(a, b)?
        .into_iter()
        .map(|z| z.arg().abs())
        .fold(PI, f64::min))
}

/// `φ₂` equal to the pole angle of the pencil, kept inside `[π/2 + 0.02, 0.95π]`,
/// so the rays sit midway between the imaginary axis and the nearest pole.
pub fn suggested_phi2(a: &Operator, b: &Operator) -> Result<f64> {
    Ok(pole_sector_angle(a, b)?.clamp(FRAC_PI_2 + 0.02, 0.95 * PI))
}

/// Contour with `φ′ = (π/2 + φ₂)/2`, `δ = 10⁻³/T` and `R = scale/√tol`.
pub fn build_contour(params: &ContourParams, problem_scale: f64, t_end: f64) -> Result<Contour> {
    params.validate()?;
    if !(problem_scale > 0.0 && problem_scale.is_finite()) {
        return Err(invalid(format!("problem scale must be positive, got {problem_scale}")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(invalid(format!("time horizon must be positive, got {t_end}")));
    }
    let ray_angle = 0.5 * (FRAC_PI_2 + params.phi2);
    let delta = 1e-3 / t_end;
    let radius = (problem_scale / params.tol.sqrt()).max(10.0 * delta);
    Contour::with_geometry(params.phi2, ray_angle, delta, radius, params.nodes_per_ray)
}

impl Contour {
    /// Contour with explicit geometry; `φ′` must lie in `(π/2, φ₂)`.
    pub fn with_geometry(phi2: f64, ray_angle: f64, delta: f64, radius: f64, nodes_per_ray: usize) -> Result<Self> {
        if !(phi2 > FRAC_PI_2 && phi2 < PI) {
            return Err(invalid(format!("contour sector angle must lie in (π/2, π), got {phi2}")));
        }
        if !(ray_angle > FRAC_PI_2 && ray_angle < phi2) {
            return Err(invalid(format!("ray angle {ray_angle} must lie in (π/2, {phi2})")));
        }
        if !(delta > 0.0 && radius > delta && radius.is_finite()) {
            return Err(invalid("contour needs 0 < δ < R < ∞"));
        }
        if nodes_per_ray < 2 {
            return Err(invalid("at least two nodes per ray are required"));
        }
        // (r, ω) on one ray, ordered outward from the vertex
        let r0 = INNER_RADIUS * delta;
        let mut ray: Vec<(f64, f64)> = GAUSS_8
            .iter()
            .map(|&(x, w)| (0.5 * r0 * (x + 1.0), 0.5 * r0 * w))
            .collect();
        let (l0, l1) = (r0.ln(), radius.ln());
        let h = (l1 - l0) / (nodes_per_ray as f64 - 1.0);
        for k in 0..nodes_per_ray {
            let r = (l0 + k as f64 * h).exp();
            let half = k == 0 || k + 1 == nodes_per_ray;
            ray.push((r, if half { 0.5 * h * r } else { h * r }));
        }
        let up = C64::from_polar(1.0, ray_angle);
        let down = up.conj();
        let mut nodes = Vec::with_capacity(2 * ray.len());
        let mut weights = Vec::with_capacity(2 * ray.len());
        // upper ray inward: dλ = −e^{iφ′} dr
        for &(r, w) in ray.iter().rev() {
            nodes.push(C64::new(delta, 0.0) + up * r);
            weights.push(-up * w);
        }
        // lower ray outward: dλ = e^{−iφ′} dr
        for &(r, w) in &ray {
            nodes.push(C64::new(delta, 0.0) + down * r);
            weights.push(down * w);
        }
        Ok(Self {
            phi2,
            delta,
            ray_angle,
            radius,
            nodes,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in traversal order.
    pub fn nodes(&self) -> &[C64] {
        &self.nodes
    }

    /// Weights `w_j` with `∫_Γ F dλ ≈ Σ w_j F(λ_j)`.
    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    /// `w_j/(2πi)`. Conjugate nodes carry conjugate coefficients.
    pub fn coefficients(&self) -> Vec<C64> {
        let two_pi_i = C64::new(0.0, 2.0 * PI);
        self.weights.iter().map(|w| w / two_pi_i).collect()
    }

    /// `(1/2πi) Σ w_j F(λ_j)`.
    pub fn integrate(&self, mut f: impl FnMut(C64) -> C64) -> C64 {
        self.nodes
            .iter()
            .zip(self.coefficients())
            .map(|(&l, c)| c * f(l))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_examples() {
        let p = ContourParams {
            phi2: 2.0 * PI / 3.0,
            ..Default::default()
        };
        let c = build_contour(&p, 1.0, 1.0).unwrap();
        assert!((c.ray_angle - 7.0 * PI / 12.0).abs() < 1e-15);
        assert_eq!(c.delta, 1e-3);
        let half = build_contour(&ContourParams { tol: p.tol / 2.0, ..p }, 1.0, 1.0).unwrap();
        assert!((half.radius / c.radius - 2f64.sqrt()).abs() < 1e-12);
        assert!(build_contour(&ContourParams { phi2: FRAC_PI_2, ..p }, 1.0, 1.0).is_err());
        assert_eq!(c.len(), 2 * (8 + 100));
    }

    #[test]
    fn pole_angles() {
        let one = Operator::scalar(C64::new(1.0, 0.0));
        assert!((pole_sector_angle(&one, &one).unwrap() - 2.0 * PI / 3.0).abs() < 1e-12);
        let two = Operator::scalar(C64::new(2.0, 0.0));
        assert!((pole_sector_angle(&one, &two).unwrap() - PI).abs() < 1e-6);
        assert!((suggested_phi2(&one, &two).unwrap() - 0.95 * PI).abs() < 1e-12);
    }

    #[test]
    fn nodes_in_sector_and_conjugate() {
        let c = build_contour(&ContourParams::default(), 5.0, 2.0).unwrap();
        let m = c.len();
        let coef = c.coefficients();
        for j in 0..m {
            assert!(c.nodes()[j].arg().abs() < c.phi2);
            assert!(c.nodes()[j].norm() > 0.0);
            assert_eq!(c.nodes()[j], c.nodes()[m - 1 - j].conj());
            assert!((coef[j] - coef[m - 1 - j].conj()).norm() <= 1e-15 * coef[j].norm());
        }
    }

    #[test]
    fn inverse_laplace_of_simple_symbols() {
        let c = build_contour(
            &ContourParams {
                nodes_per_ray: 200,
                ..Default::default()
            },
            1.0,
            1.0,
        )
        .unwrap();
        // (1/2πi)∫_Γ F(λ)e^{λτ} dλ is minus the inverse Laplace transform of F
        for tau in [0.01, 0.1, 0.5, 1.0] {
            let v = c.integrate(|l| (l * tau).exp() / ((l + 1.0) * (l + 1.0)));
            assert!((v + tau * (-tau).exp()).norm() < 1e-8, "{v}");
            let v = c.integrate(|l| (l * tau).exp() / ((l + 1.0) * (l + 2.0)));
            assert!((v + (-tau).exp() - (-2.0 * tau).exp()).norm() < 1e-8, "{v}");
        }
    }
}
