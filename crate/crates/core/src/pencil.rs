//! The quadratic pencil `λ² + λB + A` and sampled certification of its
//! sector bounds.
//!
//! Sector suprema are estimated on a log-radial × angular grid followed by a
//! local zoom around the largest samples. A bound that keeps growing under the
//! zoom is how a missing bound shows up numerically (finite sampling cannot
//! prove unboundedness); the report records the growth history so callers can
//! tell a certified failure from a merely large constant.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::{serde_float, serde_float_vec};
use crate::linalg::{self, Factor};
use crate::operator::{fractional_power, operator_norm, resolvent, Operator};
use crate::{CMatrix, C64};

/// Zoom levels attempted after the base grid.
const MAX_ZOOM_LEVELS: usize = 24;
/// Minimum number of zoom levels before a threshold crossing stops the zoom.
const MIN_ZOOM_LEVELS: usize = 3;
/// Points per side of a zoom patch.
const ZOOM_POINTS: usize = 9;
/// Relative growth below which a zoom level counts as stalled.
const STALL_TOL: f64 = 1e-6;
/// Growth of the sup over the base-grid value that certifies a failure.
const CERTIFY_GROWTH: f64 = 2.0;

/// `(A, B)` with `H(λ) = (λ² + λB + A)⁻¹`.
#[derive(Clone, Debug, PartialEq)]
pub struct PencilSymbol {
    a: Operator,
    b: Operator,
}

impl PencilSymbol {
    pub fn new(a: Operator, b: Operator) -> Result<Self> {
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: b.dim(),
            });
        }
        Ok(Self { a, b })
    }

    /// `B = α·A^ε`.
    pub fn damped(a: Operator, alpha: f64, eps: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(invalid("damping factor α must be positive"));
        }
        let b = fractional_power(&a, eps)?.scaled(C64::new(alpha, 0.0));
        Self::new(a, b)
    }

    pub fn a(&self) -> &Operator {
        &self.a
    }

    pub fn b(&self) -> &Operator {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    /// `(s²A, sB)`, whose symbol is `s⁻²H(λ/s)`.
    pub fn rescaled(&self, s: f64) -> Self {
        Self {
            a: self.a.scaled(C64::new(s * s, 0.0)),
            b: self.b.scaled(C64::new(s, 0.0)),
        }
    }

    /// Characteristic magnitude `max(‖A‖^{1/2}, ‖B‖)` of the pencil spectrum.
    pub fn scale(&self) -> f64 {
        operator_norm(&self.a).sqrt().max(operator_norm(&self.b))
    }

    fn pencil_matrix(&self, lambda: C64) -> (CMatrix, f64) {
        let n = self.dim();
        let m = CMatrix::identity(n, n) * (lambda * lambda) + self.b.matrix() * lambda + self.a.matrix();
        let scale = lambda.norm_sqr()
            + lambda.norm() * linalg::max_abs_entry(self.b.matrix())
            + linalg::max_abs_entry(self.a.matrix());
        (m, scale)
    }

    pub(crate) fn factor(&self, lambda: C64) -> Result<Factor> {
        let (m, scale) = self.pencil_matrix(lambda);
        Factor::new(m, scale).ok_or(Error::SingularPencil { lambda })
    }
}

/// `H(λ) = (λ² + λB + A)⁻¹`.
pub fn h_eval(pencil: &PencilSymbol, lambda: C64) -> Result<Operator> {
    let h = pencil
        .factor(lambda)?
        .inverse()
        .ok_or(Error::SingularPencil { lambda })?;
    Operator::new(h, format!("H({lambda})"))
}

/// `(‖λ²H(λ)‖, ‖λB·H(λ)‖, ‖A·H(λ)‖)`.
pub fn symbol_bounds(pencil: &PencilSymbol, lambda: C64) -> Result<(f64, f64, f64)> {
    let s = symbol_sample(pencil, lambda)?;
    Ok((s.norm_l2h, s.norm_lbh, s.norm_ah))
}

/// All four symbol norms at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolSample {
    pub lambda: C64,
    #[serde(with = "serde_float")]
    pub norm_h: f64,
    #[serde(with = "serde_float")]
    pub norm_l2h: f64,
    #[serde(with = "serde_float")]
    pub norm_lbh: f64,
    #[serde(with = "serde_float")]
    pub norm_ah: f64,
}

impl SymbolSample {
    fn singular(lambda: C64) -> Self {
        Self {
            lambda,
            norm_h: f64::INFINITY,
            norm_l2h: f64::INFINITY,
            norm_lbh: f64::INFINITY,
            norm_ah: f64::INFINITY,
        }
    }

    pub fn is_singular(&self) -> bool {
        !self.norm_h.is_finite()
    }

    /// Largest of the four norms.
    pub fn peak(&self) -> f64 {
        self.norm_h.max(self.norm_l2h).max(self.norm_lbh).max(self.norm_ah)
    }

    fn get(&self, q: usize) -> f64 {
        match q {
            0 => self.norm_h,
            1 => self.norm_l2h,
            2 => self.norm_lbh,
            _ => self.norm_ah,
        }
    }
}

pub fn symbol_sample(pencil: &PencilSymbol, lambda: C64) -> Result<SymbolSample> {
    let h = h_eval(pencil, lambda)?;
    let h = h.matrix();
    Ok(SymbolSample {
        lambda,
        norm_h: linalg::spectral_norm(h),
        norm_l2h: linalg::spectral_norm(h) * lambda.norm_sqr(),
        norm_lbh: linalg::spectral_norm(&(pencil.b().matrix() * h)) * lambda.norm(),
        norm_ah: linalg::spectral_norm(&(pencil.a().matrix() * h)),
    })
}

/// Nonzero poles of `H(λ) = (λ² + λB + A)⁻¹`: the eigenvalues of the
/// companion matrix `[[0, I], [−A, −B]]` above `10⁻¹²·max|entry|`.
pub fn pencil_poles(a: &Operator, b: &Operator) -> Result<Vec<C64>> {
    let n = a.dim();
    if b.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.dim() });
    }
    let mut m = CMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, n), (n, n)).fill_with_identity();
    m.view_mut((n, 0), (n, n)).copy_from(&(-a.matrix()));
    m.view_mut((n, n), (n, n)).copy_from(&(-b.matrix()));
    let scale = linalg::max_abs_entry(&m);
    Ok(linalg::eigenvalues(&m)?
        .into_iter()
        .filter(|z| z.norm() > 1e-12 * scale)
        .collect())
}

fn sample_or_singular(pencil: &PencilSymbol, lambda: C64) -> SymbolSample {
    symbol_sample(pencil, lambda).unwrap_or_else(|_| SymbolSample::singular(lambda))
}

/// Finite polar grid on the sector `{|arg λ| ≤ angle}` with log-spaced radii.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorGrid {
    pub angle: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub radial_count: usize,
    pub angular_count: usize,
}

impl SectorGrid {
    pub const DEFAULT_RADIAL: usize = 200;
    pub const DEFAULT_ANGULAR: usize = 41;

    pub fn new(angle: f64, r_min: f64, r_max: f64, radial_count: usize, angular_count: usize) -> Result<Self> {
        let g = Self {
            angle,
            r_min,
            r_max,
            radial_count,
            angular_count,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.angle > 0.0 && self.angle < PI) {
            return Err(invalid(format!("sector angle must lie in (0, π), got {}", self.angle)));
        }
        if !(self.r_min > 0.0 && self.r_min < self.r_max && self.r_max.is_finite()) {
            return Err(invalid("sector radii must satisfy 0 < r_min < r_max < ∞"));
        }
        if self.radial_count < 2 || self.angular_count < 2 {
            return Err(invalid("sector grids need at least two radii and two angles"));
        }
        Ok(())
    }

    /// Radii `10⁻⁴·‖A‖^{1/2} … 10⁴·‖A‖^{1/2}`, 200 × 41 points.
    pub fn for_pencil(pencil: &PencilSymbol, angle: f64) -> Result<Self> {
        let s = operator_norm(pencil.a()).sqrt();
        let s = if s > 0.0 { s } else { 1.0 };
        Self::new(angle, 1e-4 * s, 1e4 * s, Self::DEFAULT_RADIAL, Self::DEFAULT_ANGULAR)
    }

    /// Radii `10⁻⁴·‖M‖ … 10⁴·‖M‖` for resolvent sampling.
    pub fn for_operator(op: &Operator, angle: f64) -> Result<Self> {
        let s = operator_norm(op);
        let s = if s > 0.0 { s } else { 1.0 };
        Self::new(angle, 1e-4 * s, 1e4 * s, Self::DEFAULT_RADIAL, Self::DEFAULT_ANGULAR)
    }

    pub fn with_density(mut self, radial_count: usize, angular_count: usize) -> Self {
        self.radial_count = radial_count;
        self.angular_count = angular_count;
        self
    }

    pub fn radii(&self) -> Vec<f64> {
        linspace(self.r_min.ln(), self.r_max.ln(), self.radial_count)
            .into_iter()
            .map(f64::exp)
            .collect()
    }

    /// Angles in `[−angle, angle]`.
    pub fn angles(&self) -> Vec<f64> {
        linspace(-self.angle, self.angle, self.angular_count)
    }

    fn log_step(&self) -> f64 {
        (self.r_max.ln() - self.r_min.ln()) / (self.radial_count as f64 - 1.0)
    }

    fn angle_step(&self) -> f64 {
        2.0 * self.angle / (self.angular_count as f64 - 1.0)
    }
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let h = (b - a) / (n as f64 - 1.0);
    (0..n)
        .map(|k| if k + 1 == n { b } else { a + k as f64 * h })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub phi2: f64,
    pub threshold: f64,
    pub baseline: f64,
    #[serde(with = "serde_float")]
    pub sup_h: f64,
    #[serde(with = "serde_float")]
    pub sup_l2h: f64,
    #[serde(with = "serde_float")]
    pub sup_lbh: f64,
    #[serde(with = "serde_float")]
    pub sup_ah: f64,
    pub argmax_h: C64,
    pub argmax_l2h: C64,
    pub argmax_lbh: C64,
    pub argmax_ah: C64,
    pub passes_b: bool,
    pub passes_c: bool,
    pub passes_d: bool,
    /// The check failed and the sup grew under refinement (or hit a singular point).
    pub certified_failure: bool,
    pub singular_points: usize,
    /// Running sup of the peak norm: base grid first, then one entry per zoom level.
    #[serde(with = "serde_float_vec")]
    pub refinement_history: Vec<f64>,
    pub sample_count: usize,
    pub grid: SectorGrid,
}

impl HypothesisReport {
    pub fn passes(&self) -> bool {
        self.passes_b && self.passes_c && self.passes_d
    }

    pub fn sup_d(&self) -> f64 {
        self.sup_l2h.max(self.sup_lbh).max(self.sup_ah)
    }
}

/// Report plus every evaluated point, in evaluation order.
#[derive(Clone, Debug)]
pub struct PencilCheck {
    pub report: HypothesisReport,
    pub samples: Vec<SymbolSample>,
}

/// `10³·max(1, ‖A·H(0)‖)`.
pub fn default_threshold(pencil: &PencilSymbol) -> f64 {
    1e3 * baseline(pencil)
}

fn baseline(pencil: &PencilSymbol) -> f64 {
    symbol_sample(pencil, C64::new(0.0, 0.0))
        .map(|s| s.norm_ah)
        .unwrap_or(1.0)
        .max(1.0)
}

#[derive(Clone, Copy)]
struct Best {
    value: f64,
    at: C64,
}

struct Sups {
    best: [Best; 4],
    singular: usize,
}

impl Sups {
    fn new() -> Self {
        Self {
            best: [Best {
                value: 0.0,
                at: C64::new(0.0, 0.0),
            }; 4],
            singular: 0,
        }
    }

    fn absorb(&mut self, s: &SymbolSample) {
        if s.is_singular() {
            self.singular += 1;
        }
        for q in 0..4 {
            let v = s.get(q);
            if v > self.best[q].value || (v.is_infinite() && self.best[q].value.is_finite()) {
                self.best[q] = Best { value: v, at: s.lambda };
            }
        }
    }

    fn peak(&self) -> f64 {
        self.best.iter().map(|b| b.value).fold(0.0, f64::max)
    }
}

/// Polar zoom around `start` inside `{|arg| ≤ angle, r_min ≤ |λ| ≤ r_max}`.
///
/// `eval` maps a level's points to their peak values and returns the running
/// global sup. Each level shrinks the patch by 4 and recenters on the best point.
struct Zoom {
    angle: f64,
    log_bounds: (f64, f64),
    steps: (f64, f64),
}

impl Zoom {
    fn run(&self, start: C64, threshold: f64, mut eval: impl FnMut(&[C64]) -> (Vec<f64>, f64)) {
        let (lo, hi) = self.log_bounds;
        let mut cx = if start.norm() > 0.0 { start.norm().ln().clamp(lo, hi) } else { lo };
        let mut ca = if start.norm() > 0.0 { start.arg().clamp(-self.angle, self.angle) } else { 0.0 };
        let (mut hx, mut ha) = self.steps;
        let mut best = 0.0_f64;
        let mut stalls = 0;
        for level in 1..=MAX_ZOOM_LEVELS {
            let xs = linspace((cx - hx).max(lo), (cx + hx).min(hi), ZOOM_POINTS);
            let angs = linspace((ca - ha).max(-self.angle), (ca + ha).min(self.angle), ZOOM_POINTS);
            let pts: Vec<C64> = xs.iter().flat_map(|&x| angs.iter().map(move |&a| polar(x, a))).collect();
            let (vals, global) = eval(&pts);
            let prev = best;
            for (z, v) in pts.iter().zip(vals) {
                if v > best || (v.is_infinite() && best.is_finite()) {
                    best = v;
                    cx = z.norm().ln();
                    ca = z.arg();
                }
            }
            if !best.is_finite() || (level >= MIN_ZOOM_LEVELS && global > threshold) {
                break;
            }
            if level > 1 && best <= prev * (1.0 + STALL_TOL) {
                stalls += 1;
                if stalls >= 2 {
                    break;
                }
            } else {
                stalls = 0;
            }
            hx /= 4.0;
            ha /= 4.0;
        }
    }
}

fn polar(log_r: f64, angle: f64) -> C64 {
    C64::from_polar(log_r.exp(), angle)
}

/// Samples the closed sector `Σ_{grid.angle}` (which must open wider than
/// π/2) and checks existence, boundedness of `H`, and boundedness of
/// `λ²H`, `λBH`, `AH`.
pub fn check_pencil_hypotheses(pencil: &PencilSymbol, grid: &SectorGrid, threshold: Option<f64>) -> Result<PencilCheck> {
    grid.validate()?;
    if !(grid.angle > FRAC_PI_2 && grid.angle < PI) {
        return Err(invalid(format!(
            "pencil hypotheses need a sector angle in (π/2, π), got {}",
            grid.angle
        )));
    }
    let threshold = threshold.unwrap_or_else(|| default_threshold(pencil));
    let base_line = baseline(pencil);

    let mut points = vec![C64::new(0.0, 0.0)];
    let angles = grid.angles();
    for &r in &grid.radii() {
        points.extend(angles.iter().map(|&a| C64::from_polar(r, a)));
    }
    let mut samples: Vec<SymbolSample> = points.par_iter().map(|&z| sample_or_singular(pencil, z)).collect();
    // Grid points rarely land on a pole, so poles inside the closed sector
    // are recorded as singular samples directly.
    samples.extend(
        pencil_poles(pencil.a(), pencil.b())?
            .into_iter()
            .filter(|z| z.arg().abs() <= grid.angle)
            .map(SymbolSample::singular),
    );

    let mut sups = Sups::new();
    samples.iter().for_each(|s| sups.absorb(s));
    let base_peak = sups.peak();
    let mut history = vec![base_peak];

    if base_peak.is_finite() {
        let mut starts: Vec<C64> = Vec::new();
        for b in &sups.best {
            if !starts.iter().any(|s| (s - b.at).norm() <= 1e-12 * b.at.norm().max(1e-300)) {
                starts.push(b.at);
            }
        }
        let zoom = Zoom {
            angle: grid.angle,
            log_bounds: (grid.r_min.ln(), grid.r_max.ln()),
            steps: (grid.log_step(), grid.angle_step()),
        };
        for start in starts {
            zoom.run(start, threshold, |pts| {
                let level: Vec<SymbolSample> = pts.par_iter().map(|&z| sample_or_singular(pencil, z)).collect();
                level.iter().for_each(|s| sups.absorb(s));
                let peaks = level.iter().map(SymbolSample::peak).collect();
                samples.extend(level);
                let peak = sups.peak();
                history.push(peak);
                (peaks, peak)
            });
            if !sups.peak().is_finite() {
                break;
            }
        }
    }

    let [h, l2h, lbh, ah] = sups.best;
    let passes_b = sups.singular == 0;
    let passes_c = h.value <= threshold;
    let passes_d = l2h.value.max(lbh.value).max(ah.value) <= threshold;
    let final_peak = sups.peak();
    let grew = final_peak >= CERTIFY_GROWTH * base_peak;
    let certified_failure = !passes_b || (!(passes_c && passes_d) && grew);
    let report = HypothesisReport {
        phi2: grid.angle,
        threshold,
        baseline: base_line,
        sup_h: h.value,
        sup_l2h: l2h.value,
        sup_lbh: lbh.value,
        sup_ah: ah.value,
        argmax_h: h.at,
        argmax_l2h: l2h.at,
        argmax_lbh: lbh.at,
        argmax_ah: ah.at,
        passes_b,
        passes_c,
        passes_d,
        certified_failure,
        singular_points: sups.singular,
        refinement_history: history,
        sample_count: samples.len(),
        grid: *grid,
    };
    Ok(PencilCheck { report, samples })
}

/// Sampled `sup ‖λR(λ, M)‖` outside a sector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorialReport {
    /// Claimed sectoriality angle φ.
    pub angle: f64,
    /// Boundary ray angle φ′ of the sampled exterior.
    pub ray_angle: f64,
    pub sup: f64,
    pub argmax: C64,
    pub sample_count: usize,
}

/// Samples `‖λR(λ, op)‖` on the rays `arg λ = ±φ′` and on the arc
/// `|λ| = r_min` outside the sector, with `φ′ = grid.angle`.
///
/// The spectrum is checked first: any nonzero eigenvalue with `|arg| > φ`
/// means `op` is not sectorial of angle φ.
pub fn check_sectorial(op: &Operator, angle: f64, grid: &SectorGrid) -> Result<SectorialReport> {
    grid.validate()?;
    let ray = grid.angle;
    if !(angle > 0.0 && angle < ray && ray < PI) {
        return Err(invalid(format!(
            "need 0 < φ < φ′ < π, got φ = {angle}, φ′ = {ray}"
        )));
    }
    let scale = operator_norm(op).max(f64::MIN_POSITIVE);
    for mu in op.eigenvalues()? {
        if mu.norm() > 1e-12 * scale && mu.arg().abs() > angle {
            return Err(Error::NotSectorial { angle, point: mu });
        }
    }
    let value = |z: C64| -> Result<f64> { Ok(z.norm() * operator_norm(&resolvent(op, z)?)) };

    let mut points: Vec<C64> = Vec::new();
    for &r in &grid.radii() {
        points.push(C64::from_polar(r, ray));
        points.push(C64::from_polar(r, -ray));
    }
    for a in linspace(ray, 2.0 * PI - ray, grid.angular_count) {
        points.push(C64::from_polar(grid.r_min, a));
    }
    let vals: Vec<f64> = points.par_iter().map(|&z| value(z)).collect::<Result<_>>()?;
    let (mut best, mut at) = (0.0_f64, C64::new(0.0, 0.0));
    for (z, v) in points.iter().zip(&vals) {
        if *v > best {
            best = *v;
            at = *z;
        }
    }
    let mut count = points.len();

    // 1-D zoom along the ray carrying the maximum.
    if at.norm() > grid.r_min * (1.0 + 1e-12) {
        let dir = at.arg();
        let (lo, hi) = (grid.r_min.ln(), grid.r_max.ln());
        let mut cx = at.norm().ln();
        let mut hx = grid.log_step();
        for _ in 0..MAX_ZOOM_LEVELS {
            let xs = linspace((cx - hx).max(lo), (cx + hx).min(hi), ZOOM_POINTS);
            let zs: Vec<C64> = xs.iter().map(|&x| polar(x, dir)).collect();
            let vs: Vec<f64> = zs.iter().map(|&z| value(z)).collect::<Result<_>>()?;
            count += zs.len();
            let prev = best;
            for (z, v) in zs.iter().zip(vs) {
                if v > best {
                    best = v;
                    at = *z;
                    cx = z.norm().ln();
                }
            }
            if best <= prev * (1.0 + 1e-12) && hx < 1e-6 {
                break;
            }
            hx /= 4.0;
        }
    }
    Ok(SectorialReport {
        angle,
        ray_angle: ray,
        sup: best,
        argmax: at,
        sample_count: count,
    })
}

/// Roots of `λ² + α(a e^{iψ})^ε λ + a e^{iψ}` and their arguments in `(−π, π]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoleLocus {
    pub roots: [C64; 2],
    pub angles: [f64; 2],
}

impl PoleLocus {
    /// Smallest `|arg|` over the two poles: the widest λ-sector free of poles.
    pub fn min_abs_angle(&self) -> f64 {
        self.angles[0].abs().min(self.angles[1].abs())
    }
}

fn principal_arg(z: C64) -> f64 {
    let a = z.arg();
    if a <= -PI {
        PI
    } else {
        a
    }
}

pub fn scalar_pole_locus(a: f64, alpha: f64, eps: f64, psi: f64) -> PoleLocus {
    let base = C64::from_polar(a, psi);
    let b = base.powf(eps) * alpha;
    let disc = (b * b - base * 4.0).sqrt();
    // avoid cancellation: q = −(b + sign·√disc)/2, roots q and c/q
    let sign = if (b.conj() * disc).re >= 0.0 { 1.0 } else { -1.0 };
    let q = -(b + disc * sign) * 0.5;
    let roots = if q.norm() == 0.0 {
        [C64::new(0.0, 0.0); 2]
    } else {
        [q, base / q]
    };
    PoleLocus {
        roots,
        angles: [principal_arg(roots[0]), principal_arg(roots[1])],
    }
}

/// Supremum of the admissible sectoriality angle of `A` for `B = αA^ε`:
/// `π` if `ε = 1/2, α ≥ 2`; `π − 2·arctan(√(4−α²)/α)` if `ε = 1/2, α < 2`;
/// `π/(2ε)` if `ε ∈ (1/2, 1]`.
pub fn predict_parabolic_angle(eps: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::Unsupported(format!("damping factor α = {alpha} must be positive")));
    }
    if (eps - 0.5).abs() <= 1e-12 {
        if alpha >= 2.0 {
            Ok(PI)
        } else {
            Ok(PI - 2.0 * ((4.0 - alpha * alpha).sqrt() / alpha).atan())
        }
    } else if eps > 0.5 && eps <= 1.0 {
        Ok(PI / (2.0 * eps))
    } else {
        Err(Error::Unsupported(format!(
            "no admissible angle window for ε = {eps} (need ε = 1/2 or ε ∈ (1/2, 1])"
        )))
    }
}
