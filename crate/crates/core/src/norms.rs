//! Time-regularity norms of sampled paths: Hölder, little-Hölder, Besov
//! (Sobolev–Slobodeckij) and the real-interpolation norm of an operator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::io::{fmt_float, serde_float, CsvTable};
use crate::linalg::{self, Factor};
use crate::operator::{operator_norm, Operator};
use crate::path::SampledPath;
use crate::{CMatrix, CVector, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderNorm {
    pub seminorm: f64,
    pub sup_norm: f64,
}

impl HolderNorm {
    /// `sup‖u‖ + [u]_θ`.
    pub fn full(&self) -> f64 {
        self.sup_norm + self.seminorm
    }
}

fn check_theta_closed(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(invalid(format!("Hölder exponent must lie in (0, 1], got {theta}")));
    }
    Ok(())
}

/// Max of `‖u(t)−u(s)‖/|t−s|^θ` over grid pairs with `|t−s| ≤ max_gap`.
fn holder_quotient(u: &SampledPath, theta: f64, max_gap: usize) -> f64 {
    let h = u.step();
    let vals = u.values();
    let n = vals.len();
    let powers: Vec<f64> = (0..n).map(|m| (m as f64 * h).powf(theta)).collect();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = 0.0_f64;
            for j in i + 1..n.min(i + max_gap + 1) {
                let q = (&vals[j] - &vals[i]).norm() / powers[j - i];
                best = best.max(q);
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Hölder seminorm over all grid pairs, plus the sup norm.
pub fn holder_norm(u: &SampledPath, theta: f64) -> Result<HolderNorm> {
    check_theta_closed(theta)?;
    Ok(HolderNorm {
        seminorm: holder_quotient(u, theta, u.len()),
        sup_norm: u.sup_norm(),
    })
}

/// Hölder quotient restricted to pairs with `|t−s| ≤ window`. Membership in
/// the little-Hölder space shows up as this defect tending to zero with the
/// window under refinement.
pub fn little_holder_defect(u: &SampledPath, theta: f64, window: f64) -> Result<f64> {
    check_theta_closed(theta)?;
    if !(window > 0.0 && window < u.t_end()) {
        return Err(invalid(format!("window must lie in (0, T), got {window}")));
    }
    let h = u.step();
    let gaps = (window / h * (1.0 + 1e-12)).floor() as usize;
    if gaps == 0 {
        return Err(invalid(format!("window {window} is smaller than the grid step {h}")));
    }
    Ok(holder_quotient(u, theta, gaps))
}

/// Besov / Sobolev–Slobodeckij parameters `(θ, p, q)`; `p`, `q` may be `∞`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    pub theta: f64,
    #[serde(with = "serde_float")]
    pub p: f64,
    #[serde(with = "serde_float")]
    pub q: f64,
}

impl BesovParams {
    pub fn new(theta: f64, p: f64, q: f64) -> Result<Self> {
        let b = Self { theta, p, q };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(invalid(format!("Besov smoothness must lie in (0, 1), got {}", self.theta)));
        }
        if !(self.p >= 1.0) || !(self.q >= 1.0) {
            return Err(invalid("Besov integrability exponents must be ≥ 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovNorm {
    pub lp_norm: f64,
    pub seminorm: f64,
    /// Seminorm on every other grid point, when the grid allows it.
    pub coarse_seminorm: Option<f64>,
    /// The seminorm grew by more than a quarter under the last grid doubling.
    pub divergence_suspected: bool,
}

impl BesovNorm {
    pub fn full(&self) -> f64 {
        self.lp_norm + self.seminorm
    }
}

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    w[0] *= 0.5;
    w[n - 1] *= 0.5;
    w
}

/// `(∫₀^T ‖u‖^p dt)^{1/p}` by the trapezoid rule.
pub fn lp_norm(u: &SampledPath, p: f64) -> f64 {
    if p.is_infinite() {
        return u.sup_norm();
    }
    let w = trapezoid_weights(u.len(), u.step());
    let s: f64 = u.values().iter().zip(&w).map(|(v, w)| w * v.norm().powf(p)).sum();
    s.powf(1.0 / p)
}

/// `(∫₀^T (∫₀^T ‖u(t)−u(s)‖^p / |t−s|^{1+θp} ds)^{q/p} dt)^{1/q}`.
///
/// Off the diagonal band `|t−s| < Δt` the inner integral is a trapezoid sum;
/// on the band `u` is taken piecewise linear, which integrates in closed form
/// to `‖Δu‖^p Δt^{−θp} / (p(1−θ))` per adjacent cell.
fn besov_seminorm(vals: &[CVector], h: f64, params: &BesovParams) -> f64 {
    let n = vals.len();
    let (theta, p, q) = (params.theta, params.p, params.q);
    let expo = 1.0 + theta * p;
    let kernel: Vec<f64> = (0..n).map(|m| (m as f64 * h).powf(-expo)).collect();
    let band = h.powf(-theta * p) / (p * (1.0 - theta));
    let inner: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut s = 0.0;
            // left: points 0..k-1, trapezoid with half weights at 0 and k-1
            if k >= 2 {
                for j in 0..k {
                    let w = if j == 0 || j == k - 1 { 0.5 * h } else { h };
                    s += w * (&vals[k] - &vals[j]).norm().powf(p) * kernel[k - j];
                }
            }
            if k + 2 < n {
                for j in k + 1..n {
                    let w = if j == k + 1 || j == n - 1 { 0.5 * h } else { h };
                    s += w * (&vals[j] - &vals[k]).norm().powf(p) * kernel[j - k];
                }
            }
            if k >= 1 {
                s += (&vals[k] - &vals[k - 1]).norm().powf(p) * band;
            }
            if k + 1 < n {
                s += (&vals[k + 1] - &vals[k]).norm().powf(p) * band;
            }
            s
        })
        .collect();
    let w = trapezoid_weights(n, h);
    if q.is_infinite() {
        return inner.iter().fold(0.0_f64, |a, &x| a.max(x)).powf(1.0 / p);
    }
    let outer: f64 = inner.iter().zip(&w).map(|(i, w)| w * i.powf(q / p)).sum();
    outer.powf(1.0 / q)
}

/// Besov norm `‖u‖_{L^p} + [u]_{θ,p,q}` for finite `p`, `q`.
pub fn besov_norm(u: &SampledPath, params: &BesovParams) -> Result<BesovNorm> {
    params.validate()?;
    if params.p.is_infinite() {
        return Err(invalid("p = ∞ is the Hölder case; use holder_norm"));
    }
    if u.len() < 3 {
        return Err(invalid("Besov quadrature needs at least three grid points"));
    }
    let h = u.step();
    let seminorm = besov_seminorm(u.values(), h, params);
    let coarse_seminorm = if (u.len() - 1).is_multiple_of(2) && u.len() >= 5 {
        let coarse: Vec<CVector> = u.values().iter().step_by(2).cloned().collect();
        Some(besov_seminorm(&coarse, 2.0 * h, params))
    } else {
        None
    };
    let divergence_suspected = coarse_seminorm.is_some_and(|c| seminorm > 1.25 * c && seminorm > 1e-300);
    Ok(BesovNorm {
        lp_norm: lp_norm(u, params.p),
        seminorm,
        coarse_seminorm,
        divergence_suspected,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpNorm {
    /// `‖x‖`.
    pub base: f64,
    /// `‖t^θ D(t+D)⁻¹x‖_{L^p(dt/t)}`.
    pub integral: f64,
    /// The integrand had not decayed at one of the grid ends.
    pub tail_warning: bool,
}

impl InterpNorm {
    pub fn value(&self) -> f64 {
        self.base + self.integral
    }
}

/// 400 log-spaced points in `[10⁻⁶, 10⁶]·‖D‖`.
pub fn default_tgrid(d: &Operator) -> Vec<f64> {
    let s = operator_norm(d);
    let s = if s > 0.0 { s } else { 1.0 };
    crate::pencil::linspace(-6.0, 6.0, 400)
        .into_iter()
        .map(|e| 10f64.powf(e) * s)
        .collect()
}

/// `‖x‖ + ‖t^θ D(t+D)⁻¹x‖_{L^p(0,∞; dt/t)}`, trapezoid in `log t` over `tgrid`
/// (the sampled sup for `p = ∞`).
pub fn interp_norm(d: &Operator, x: &CVector, theta: f64, p: f64, tgrid: &[f64]) -> Result<InterpNorm> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(invalid(format!("interpolation exponent must lie in (0, 1), got {theta}")));
    }
    if !(p >= 1.0) {
        return Err(invalid("interpolation exponent p must be ≥ 1"));
    }
    if x.len() != d.dim() {
        return Err(Error::DimensionMismatch {
            expected: d.dim(),
            found: x.len(),
        });
    }
    if tgrid.len() < 2 || tgrid.windows(2).any(|w| !(w[0] > 0.0 && w[1] > w[0])) {
        return Err(invalid("tgrid must be positive and strictly increasing"));
    }
    let base = x.norm();
    if base == 0.0 {
        return Ok(InterpNorm {
            base: 0.0,
            integral: 0.0,
            tail_warning: false,
        });
    }
    let m = d.matrix();
    let triangular = linalg::is_lower_triangular(m) || linalg::is_upper_triangular(m);
    let scale = linalg::max_abs_entry(m);
    let integrand: Vec<f64> = tgrid
        .par_iter()
        .map(|&t| {
            let tc = C64::new(t, 0.0);
            let y = if triangular {
                linalg::shifted_triangular_solve(m, tc, x)
            } else {
                let shifted = m + CMatrix::identity(d.dim(), d.dim()) * tc;
                Factor::new(shifted, scale + t).and_then(|f| f.solve_vec(x))
            }
            .ok_or(Error::Singular {
                what: "t + D",
                at: tc,
            })?;
            // D(t+D)⁻¹x = x − t(t+D)⁻¹x
            Ok(t.powf(theta) * (x - y * tc).norm())
        })
        .collect::<Result<_>>()?;
    let peak = integrand.iter().fold(0.0_f64, |a, &v| a.max(v));
    let ends = integrand[0].max(integrand[integrand.len() - 1]);
    let tail_warning = peak > 0.0 && ends > 1e-2 * peak;
    let integral = if p.is_infinite() {
        peak
    } else {
        let logs: Vec<f64> = tgrid.iter().map(|t| t.ln()).collect();
        let mut s = 0.0;
        for i in 0..tgrid.len() - 1 {
            let dl = logs[i + 1] - logs[i];
            s += 0.5 * dl * (integrand[i].powf(p) + integrand[i + 1].powf(p));
        }
        s.powf(1.0 / p)
    };
    Ok(InterpNorm {
        base,
        integral,
        tail_warning,
    })
}

/// Which norm a [`NormRequest`] asks for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Sup,
    Holder,
    HolderSeminorm,
    LittleHolder,
    Besov,
    BesovSeminorm,
}

impl NormKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NormKind::Sup => "sup",
            NormKind::Holder => "holder",
            NormKind::HolderSeminorm => "holder_seminorm",
            NormKind::LittleHolder => "little_holder",
            NormKind::Besov => "besov",
            NormKind::BesovSeminorm => "besov_seminorm",
        }
    }
}

/// `(kind, θ, p, q)`; `window` is only read by [`NormKind::LittleHolder`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormRequest {
    pub kind: NormKind,
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "infinite", with = "serde_float")]
    pub p: f64,
    #[serde(default = "infinite", with = "serde_float")]
    pub q: f64,
    #[serde(default)]
    pub window: Option<f64>,
}

fn infinite() -> f64 {
    f64::INFINITY
}

impl NormRequest {
    pub fn sup() -> Self {
        Self {
            kind: NormKind::Sup,
            theta: 0.0,
            p: f64::INFINITY,
            q: f64::INFINITY,
            window: None,
        }
    }

    pub fn holder(theta: f64, seminorm: bool) -> Self {
        Self {
            kind: if seminorm { NormKind::HolderSeminorm } else { NormKind::Holder },
            theta,
            p: f64::INFINITY,
            q: f64::INFINITY,
            window: None,
        }
    }

    pub fn besov(params: BesovParams, seminorm: bool) -> Self {
        Self {
            kind: if seminorm { NormKind::BesovSeminorm } else { NormKind::Besov },
            theta: params.theta,
            p: params.p,
            q: params.q,
            window: None,
        }
    }

    pub fn evaluate(&self, u: &SampledPath) -> Result<f64> {
        match self.kind {
            NormKind::Sup => Ok(u.sup_norm()),
            NormKind::Holder => Ok(holder_norm(u, self.theta)?.full()),
            NormKind::HolderSeminorm => Ok(holder_norm(u, self.theta)?.seminorm),
            NormKind::LittleHolder => {
                let w = self.window.ok_or_else(|| invalid("little_holder needs a window"))?;
                little_holder_defect(u, self.theta, w)
            }
            NormKind::Besov | NormKind::BesovSeminorm => {
                let b = besov_norm(u, &BesovParams::new(self.theta, self.p, self.q)?)?;
                Ok(if self.kind == NormKind::Besov { b.full() } else { b.seminorm })
            }
        }
    }
}

/// Norm table with columns `norm_kind, theta, p, q, value, N, T`.
pub fn norm_table_csv(u: &SampledPath, requests: &[NormRequest]) -> Result<CsvTable> {
    let mut t = CsvTable::new(["norm_kind", "theta", "p", "q", "value", "N", "T"]);
    for r in requests {
        let v = r.evaluate(u)?;
        t.push([
            r.kind.as_str().to_owned(),
            fmt_float(r.theta),
            fmt_float(r.p),
            fmt_float(r.q),
            fmt_float(v),
            u.len().to_string(),
            fmt_float(u.t_end()),
        ]);
    }
    Ok(t)
}
