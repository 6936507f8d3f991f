//! The contour-integral solution operator `S`, the forward operator
//! `L = D² + BD + A`, a Crank–Nicolson reference solver and the initial-value
//! solve built on the lift `x₀(t) = u0 + t·u1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::Contour;
use crate::error::{invalid, Error, Result};
use crate::io::serde_float;
use crate::linalg::{self, Factor};
use crate::norms::{BesovParams, NormKind, NormRequest};
use crate::operator::Operator;
use crate::path::{grid_derivative, grid_second_derivative, SampledPath};
use crate::pencil::PencilSymbol;
use crate::{CMatrix, CVector, C64};

/// Largest admissible `Re λ·T` in the kernel.
const MAX_GROWTH: f64 = 50.0;
/// Nodes evaluated concurrently before their terms are summed in order.
const NODE_CHUNK: usize = 32;

/// `φ1(z) = (e^z − 1)/z` and `φ2(z) = (e^z − 1 − z)/z²`.
fn phi_functions(z: C64) -> (C64, C64) {
    if z.norm() < 0.5 {
        let (mut p1, mut p2) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        // z^k/(k+1)! and z^k/(k+2)!
        let mut term = C64::new(1.0, 0.0);
        for k in 0..24 {
            let t1 = term / (k as f64 + 1.0);
            p1 += t1;
            p2 += t1 / (k as f64 + 2.0);
            term = t1 * z;
        }
        (p1, p2)
    } else {
        let e = z.exp();
        ((e - 1.0) / z, (e - 1.0 - z) / (z * z))
    }
}

fn check_growth(lambda: C64, t_end: f64) -> Result<()> {
    let growth = lambda.re * t_end;
    if growth > MAX_GROWTH || !lambda.is_finite() {
        return Err(Error::Overflow { lambda, growth });
    }
    Ok(())
}

/// Columns `g_k` of an `n × N` matrix, mapped in place to
/// `u_k = −∫₀^{t_k} e^{λ(t_k−s)} g(s) ds` for the piecewise-linear interpolant.
fn resolvent_columns(lambda: C64, dt: f64, g: &mut CMatrix) {
    let (n, m) = g.shape();
    let z = lambda * dt;
    let (p1, p2) = phi_functions(z);
    let ez = z.exp();
    let (c0, c1) = ((p1 - p2) * dt, p2 * dt);
    for i in 0..n {
        let mut acc = C64::new(0.0, 0.0);
        let mut prev = g[(i, 0)];
        g[(i, 0)] = C64::new(0.0, 0.0);
        for k in 1..m {
            let cur = g[(i, k)];
            acc = ez * acc + c0 * prev + c1 * cur;
            g[(i, k)] = -acc;
            prev = cur;
        }
    }
}

fn path_to_matrix(p: &SampledPath) -> CMatrix {
    CMatrix::from_fn(p.dim(), p.len(), |i, k| p.value(k)[i])
}

fn matrix_to_path(t_end: f64, m: &CMatrix) -> Result<SampledPath> {
    SampledPath::new(t_end, m.column_iter().map(|c| c.into_owned()).collect())
}

/// `(λ − D)⁻¹g` with zero trace: `u(t) = −∫₀^t e^{λ(t−s)} g(s) ds`, exact for
/// the piecewise-linear interpolant of `g`.
pub fn resolvent_d_apply(lambda: C64, g: &SampledPath) -> Result<SampledPath> {
    check_growth(lambda, g.t_end())?;
    let mut m = path_to_matrix(g);
    resolvent_columns(lambda, g.step(), &mut m);
    matrix_to_path(g.t_end(), &m)
}

fn check_dims(a: &Operator, b: &Operator, dim: usize) -> Result<()> {
    for d in [a.dim(), b.dim()] {
        if d != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: d });
        }
    }
    Ok(())
}

/// `Sf` and its time derivative `DSf = (1/2πi)∫_Γ λR(λ,D)H(λ)f dλ`, the
/// latter valid because `∫_Γ H dλ = 0`.
pub fn apply_s_with_derivative(
    a: &Operator,
    b: &Operator,
    contour: &Contour,
    f: &SampledPath,
) -> Result<(SampledPath, SampledPath)> {
    check_dims(a, b, f.dim())?;
    let t_end = f.t_end();
    let dt = f.step();
    let pencil = PencilSymbol::new(a.clone(), b.clone())?;
    let rhs = path_to_matrix(f);
    let (n, m) = rhs.shape();
    let mut u = CMatrix::zeros(n, m);
    let mut du = CMatrix::zeros(n, m);
    if rhs.iter().all(|z| *z == C64::new(0.0, 0.0)) {
        return Ok((matrix_to_path(t_end, &u)?, matrix_to_path(t_end, &du)?));
    }
    let nodes = contour.nodes();
    let coef = contour.coefficients();
    for &l in nodes {
        check_growth(l, t_end)?;
    }
    let idx: Vec<usize> = (0..nodes.len()).collect();
    for chunk in idx.chunks(NODE_CHUNK) {
        let terms: Vec<CMatrix> = chunk
            .par_iter()
            .map(|&j| {
                let l = nodes[j];
                let mut y = pencil
                    .factor(l)?
                    .solve_mat(&rhs)
                    .ok_or(Error::SingularPencil { lambda: l })?;
                resolvent_columns(l, dt, &mut y);
                Ok(y)
            })
            .collect::<Result<_>>()?;
        for (&j, y) in chunk.iter().zip(&terms) {
            u.zip_apply(y, |acc, v| *acc += coef[j] * v);
            let c = coef[j] * nodes[j];
            du.zip_apply(y, |acc, v| *acc += c * v);
        }
    }
    Ok((matrix_to_path(t_end, &u)?, matrix_to_path(t_end, &du)?))
}

/// `Sf = (1/2πi)∫_Γ R(λ,D)H(λ)f dλ` on the grid of `f`.
pub fn apply_s(a: &Operator, b: &Operator, contour: &Contour, f: &SampledPath) -> Result<SampledPath> {
    Ok(apply_s_with_derivative(a, b, contour, f)?.0)
}

/// `ü + Bů + Au` with second-order grid derivatives.
pub fn apply_l(a: &Operator, b: &Operator, u: &SampledPath) -> Result<SampledPath> {
    check_dims(a, b, u.dim())?;
    let ddu = grid_second_derivative(u)?;
    let du = grid_derivative(u)?;
    ddu.add(&du.apply(b)?)?.add(&u.apply(a)?)
}

/// Crank–Nicolson on `v = (u, ů)`, `v̇ = Mv + (0, f)`, `M = [[0, I], [−A, −B]]`.
/// Returns `(u, ů)`.
pub fn timestep_trajectory(
    a: &Operator,
    b: &Operator,
    f: &SampledPath,
    u0: &CVector,
    u1: &CVector,
) -> Result<(SampledPath, SampledPath)> {
    let n = f.dim();
    check_dims(a, b, n)?;
    for v in [u0, u1] {
        if v.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: v.len() });
        }
    }
    let dt = f.step();
    let mut mat = CMatrix::zeros(2 * n, 2 * n);
    mat.view_mut((0, n), (n, n)).fill_with_identity();
    mat.view_mut((n, 0), (n, n)).copy_from(&(-a.matrix()));
    mat.view_mut((n, n), (n, n)).copy_from(&(-b.matrix()));
    let half = C64::new(0.5 * dt, 0.0);
    let id = CMatrix::identity(2 * n, 2 * n);
    let lhs = &id - &mat * half;
    let rhs_op = &id + &mat * half;
    let scale = 1.0 + 0.5 * dt * linalg::max_abs_entry(&mat);
    let step = Factor::new(lhs, scale).ok_or(Error::Singular {
        what: "Crank–Nicolson step matrix",
        at: C64::new(dt, 0.0),
    })?;
    let mut v = CVector::zeros(2 * n);
    v.rows_mut(0, n).copy_from(u0);
    v.rows_mut(n, n).copy_from(u1);
    let mut us = Vec::with_capacity(f.len());
    let mut dus = Vec::with_capacity(f.len());
    us.push(u0.clone());
    dus.push(u1.clone());
    for k in 0..f.len() - 1 {
        let mut r = &rhs_op * &v;
        let forcing = (f.value(k) + f.value(k + 1)) * half;
        let mut lower = r.rows_mut(n, n);
        lower += forcing;
        v = step.solve_vec(&r).ok_or(Error::Singular {
            what: "Crank–Nicolson step matrix",
            at: C64::new(dt, 0.0),
        })?;
        us.push(v.rows(0, n).into_owned());
        dus.push(v.rows(n, n).into_owned());
    }
    Ok((SampledPath::new(f.t_end(), us)?, SampledPath::new(f.t_end(), dus)?))
}

/// Reference trajectory `u` from Crank–Nicolson.
pub fn timestep_oracle(a: &Operator, b: &Operator, f: &SampledPath, u0: &CVector, u1: &CVector) -> Result<SampledPath> {
    Ok(timestep_trajectory(a, b, f, u0, u1)?.0)
}

/// `ü + Bů + Au = f`, `u(0) = u0`, `ů(0) = u1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyProblem {
    pub a: Operator,
    pub b: Operator,
    pub f: SampledPath,
    pub u0: CVector,
    pub u1: CVector,
}

impl CauchyProblem {
    pub fn new(a: Operator, b: Operator, f: SampledPath, u0: CVector, u1: CVector) -> Result<Self> {
        let p = Self { a, b, f, u0, u1 };
        p.validate()?;
        Ok(p)
    }

    /// Zero initial data.
    pub fn homogeneous(a: Operator, b: Operator, f: SampledPath) -> Result<Self> {
        let n = f.dim();
        Self::new(a, b, f, CVector::zeros(n), CVector::zeros(n))
    }

    pub fn validate(&self) -> Result<()> {
        if self.f.len() < 4 {
            return Err(invalid("the forcing needs at least four grid points"));
        }
        let n = self.f.dim();
        check_dims(&self.a, &self.b, n)?;
        for v in [&self.u0, &self.u1] {
            if v.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: v.len() });
            }
        }
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        self.f.t_end()
    }

    /// `‖f(0) − A u0 − B u1‖`.
    pub fn compatibility_defect(&self) -> f64 {
        (self.f.value(0) - self.a.apply(&self.u0) - self.b.apply(&self.u1)).norm()
    }

    /// `L̂x₀(t) = B u1 + A u0 + t·A u1` for the lift `x₀(t) = u0 + t·u1`.
    fn lift_forcing(&self) -> Result<SampledPath> {
        let c = self.b.apply(&self.u1) + self.a.apply(&self.u0);
        let slope = self.a.apply(&self.u1);
        SampledPath::from_fn(self.t_end(), self.f.len(), |t| &c + &slope * C64::new(t, 0.0))
    }

    fn lift(&self) -> Result<(SampledPath, SampledPath)> {
        let x0 = SampledPath::from_fn(self.t_end(), self.f.len(), |t| &self.u0 + &self.u1 * C64::new(t, 0.0))?;
        let dx0 = SampledPath::from_fn(self.t_end(), self.f.len(), |_| self.u1.clone())?;
        Ok((x0, dx0))
    }
}

/// Data space of the solve: Hölder `C^θ` or Besov `B^θ_{pq}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolveMode {
    Holder { theta: f64 },
    Besov(BesovParams),
}

impl SolveMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            SolveMode::Holder { theta } if !(*theta > 0.0 && *theta < 1.0) => {
                Err(invalid(format!("Hölder exponent must lie in (0, 1), got {theta}")))
            }
            SolveMode::Holder { .. } => Ok(()),
            SolveMode::Besov(p) => p.validate(),
        }
    }

    /// A pointwise trace condition applies in the Hölder scale and in the
    /// Besov scale once `θ ≥ 1/p`.
    pub fn needs_compatibility(&self) -> bool {
        match self {
            SolveMode::Holder { .. } => true,
            SolveMode::Besov(p) => p.theta * p.p >= 1.0,
        }
    }

    /// Full norm and seminorm requests of this scale.
    pub fn requests(&self) -> Vec<NormRequest> {
        match *self {
            SolveMode::Holder { theta } => vec![NormRequest::holder(theta, false), NormRequest::holder(theta, true)],
            SolveMode::Besov(p) => vec![NormRequest::besov(p, false), NormRequest::besov(p, true)],
        }
    }

    /// The full norm of this scale.
    pub fn full_norm(&self) -> NormRequest {
        self.requests()[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Contour,
    Timestep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub mode: SolveMode,
    pub method: Method,
    /// Relative compatibility tolerance; `None` skips the check.
    pub compat_tol: Option<f64>,
}

impl SolveOptions {
    pub fn new(mode: SolveMode) -> Self {
        Self {
            mode,
            method: Method::Contour,
            compat_tol: Some(DEFAULT_COMPAT_TOL),
        }
    }
}

pub const DEFAULT_COMPAT_TOL: f64 = 1e-8;

/// One row of the report's norm table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub component: String,
    pub kind: NormKind,
    pub theta: f64,
    #[serde(with = "serde_float")]
    pub p: f64,
    #[serde(with = "serde_float")]
    pub q: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: Method,
    pub mode: SolveMode,
    pub u: SampledPath,
    pub du: SampledPath,
    pub ddu: SampledPath,
    pub bdu: SampledPath,
    pub au: SampledPath,
    pub f: SampledPath,
    pub residual_inf: f64,
    pub norm_table: Vec<NormEntry>,
}

impl SolveReport {
    /// The five solution components and the forcing, by name.
    pub fn components(&self) -> [(&'static str, &SampledPath); 6] {
        [
            ("u", &self.u),
            ("du", &self.du),
            ("ddu", &self.ddu),
            ("Bdu", &self.bdu),
            ("Au", &self.au),
            ("f", &self.f),
        ]
    }

    fn from_trajectory(
        problem: &CauchyProblem,
        mode: SolveMode,
        method: Method,
        u: SampledPath,
        du: SampledPath,
    ) -> Result<Self> {
        let ddu = grid_derivative(&du)?;
        let bdu = du.apply(&problem.b)?;
        let au = u.apply(&problem.a)?;
        let residual_inf = ddu.add(&bdu)?.add(&au)?.sup_distance(&problem.f)?;
        let mut report = Self {
            method,
            mode,
            u,
            du,
            ddu,
            bdu,
            au,
            f: problem.f.clone(),
            residual_inf,
            norm_table: Vec::new(),
        };
        let mut rows = Vec::new();
        for (name, path) in report.components() {
            for r in std::iter::once(NormRequest::sup()).chain(mode.requests()) {
                rows.push(NormEntry {
                    component: name.to_owned(),
                    kind: r.kind,
                    theta: r.theta,
                    p: r.p,
                    q: r.q,
                    value: r.evaluate(path)?,
                });
            }
        }
        report.norm_table = rows;
        Ok(report)
    }
}

/// Initial-value solve with the contour method and the default
/// compatibility tolerance.
pub fn solve_ivp(problem: &CauchyProblem, contour: &Contour, mode: SolveMode) -> Result<SolveReport> {
    solve_ivp_with(problem, Some(contour), &SolveOptions::new(mode))
}

/// Initial-value solve. The contour is required for [`Method::Contour`].
pub fn solve_ivp_with(problem: &CauchyProblem, contour: Option<&Contour>, opts: &SolveOptions) -> Result<SolveReport> {
    problem.validate()?;
    opts.mode.validate()?;
    if let Some(tol) = opts.compat_tol {
        if opts.mode.needs_compatibility() {
            let fmax = problem.f.sup_norm();
            let bound = tol * if fmax > 0.0 { fmax } else { 1.0 };
            let defect = problem.compatibility_defect();
            if defect > bound {
                return Err(Error::Compatibility { defect, bound });
            }
        }
    }
    let (u, du) = match opts.method {
        Method::Contour => {
            let contour = contour.ok_or_else(|| invalid("the contour method needs a contour"))?;
            let g = problem.f.sub(&problem.lift_forcing()?)?;
            let (w, dw) = apply_s_with_derivative(&problem.a, &problem.b, contour, &g)?;
            let (x0, dx0) = problem.lift()?;
            (x0.add(&w)?, dx0.add(&dw)?)
        }
        Method::Timestep => timestep_trajectory(&problem.a, &problem.b, &problem.f, &problem.u0, &problem.u1)?,
    };
    SolveReport::from_trajectory(problem, opts.mode, opts.method, u, du)
}

/// `(‖u‖ + ‖ü‖ + ‖Bů‖ + ‖Au‖)/‖f‖` in the requested norm.
pub fn maxreg_ratio(report: &SolveReport, norm: &NormRequest) -> Result<f64> {
    let nf = norm.evaluate(&report.f)?;
    if !(nf > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let mut s = 0.0;
    for p in [&report.u, &report.ddu, &report.bdu, &report.au] {
        s += norm.evaluate(p)?;
    }
    Ok(s / nf)
}

/// Relative sup-norm disagreement `‖u − v‖_∞/‖v‖_∞` (absolute when `v = 0`).
pub fn relative_disagreement(u: &SampledPath, v: &SampledPath) -> Result<f64> {
    let d = u.sup_distance(v)?;
    let s = v.sup_norm();
    Ok(if s > 0.0 { d / s } else { d })
}
