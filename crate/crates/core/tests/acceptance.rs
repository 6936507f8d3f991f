//! Acceptance suite. Each test prints one `PASS`/`FAIL` line; run with
//! `cargo test -p parab2-core --test acceptance -- --nocapture --test-threads=1`.

use std::f64::consts::PI;
use std::time::Instant;

use parab2_core::contour::{build_contour, problem_scale, suggested_phi2, Contour, ContourParams};
use parab2_core::gallery::{gallery_with, sweep_with, Forcing, GalleryName, SweepParams};
use parab2_core::norms::{besov_norm, default_tgrid, interp_norm, BesovParams};
use parab2_core::operator::Operator;
use parab2_core::path::SampledPath;
use parab2_core::pencil::{check_sectorial, predict_parabolic_angle, scalar_pole_locus, SectorGrid};
use parab2_core::solver::{
    apply_l, apply_s, maxreg_ratio, relative_disagreement, solve_ivp, solve_ivp_with, timestep_oracle,
    CauchyProblem, SolveMode, SolveOptions,
};
use parab2_core::{CMatrix, CVector, Error, C64};

fn report(id: u32, ok: bool, detail: String) {
    println!("[acceptance {id:>2}] {} {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {id}: {detail}");
}

fn scalar(x: f64) -> Operator {
    Operator::scalar(C64::new(x, 0.0))
}

fn contour(a: &Operator, b: &Operator, t_end: f64, nodes: usize) -> Contour {
    let params = ContourParams {
        phi2: suggested_phi2(a, b).unwrap(),
        nodes_per_ray: nodes,
        ..Default::default()
    };
    build_contour(&params, problem_scale(a, b, t_end), t_end).unwrap()
}

fn strong_damping(n_points: usize, forcing: Forcing) -> CauchyProblem {
    gallery_with(GalleryName::StrongDamping, 8, 1.0, 1.0, 0.5, n_points, forcing)
        .unwrap()
        .problem
}

#[test]
fn criterion_01_scalar_analytic_solve() {
    let start = Instant::now();
    let (a, b) = (scalar(1.0), scalar(2.0));
    let f = SampledPath::scalar_fn(1.0, 256, |_| 1.0).unwrap();
    let c = contour(&a, &b, 1.0, 200);
    let u = apply_s(&a, &b, &c, &f).unwrap();
    let exact = SampledPath::scalar_fn(1.0, 256, |t| 1.0 - (-t).exp() * (1.0 + t)).unwrap();
    let err = u.sup_distance(&exact).unwrap();
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        err <= 1e-4 && secs < 5.0,
        format!("sup error {err:.3e} (≤ 1e-4), runtime {secs:.2}s (< 5s)"),
    );
}

fn right_inverse_residual(n_points: usize) -> f64 {
    let p = strong_damping(n_points, Forcing::Smooth);
    let c = contour(&p.a, &p.b, 1.0, 200);
    let u = apply_s(&p.a, &p.b, &c, &p.f).unwrap();
    let lu = apply_l(&p.a, &p.b, &u).unwrap();
    lu.sup_distance(&p.f).unwrap() / p.f.sup_norm()
}

#[test]
fn criterion_02_right_inverse() {
    let r1 = right_inverse_residual(128);
    let r2 = right_inverse_residual(256);
    report(
        2,
        r1 <= 1e-2 && r1 / r2 >= 3.0,
        format!("relative residual {r1:.3e} at N=128 (≤ 1e-2), reduction {:.2} on doubling (≥ 3)", r1 / r2),
    );
}

#[test]
fn criterion_03_left_inverse() {
    let p = strong_damping(128, Forcing::Smooth);
    let profile = parab2_core::gallery::sine_profile(8);
    let u = SampledPath::separable(1.0, 128, &profile, |t| t * t * (1.0 - t)).unwrap();
    let f = apply_l(&p.a, &p.b, &u).unwrap();
    let c = contour(&p.a, &p.b, 1.0, 200);
    let back = apply_s(&p.a, &p.b, &c, &f).unwrap();
    let rel = back.sup_distance(&u).unwrap() / u.sup_norm();
    report(3, rel <= 1e-2, format!("‖S L u − u‖/‖u‖ = {rel:.3e} (≤ 1e-2)"));
}

#[test]
fn criterion_04_method_agreement() {
    let cases = [
        (GalleryName::StrongDamping, 1.0),
        (GalleryName::StrongDampingDrift, 1.0),
        (GalleryName::IntermediateDamping, 2.5),
        (GalleryName::Scalar(1.0), 1.0),
    ];
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for (name, alpha) in cases {
        let n = if matches!(name, GalleryName::Scalar(_)) { 1 } else { 8 };
        let g = gallery_with(name, n, 1.0, alpha, 0.5, 256, Forcing::Smooth).unwrap();
        assert!(g.expected_admissible, "{name}");
        let p = &g.problem;
        let c = contour(&p.a, &p.b, 1.0, 200);
        let u = apply_s(&p.a, &p.b, &c, &p.f).unwrap();
        let v = timestep_oracle(&p.a, &p.b, &p.f, &p.u0, &p.u1).unwrap();
        let d = relative_disagreement(&u, &v).unwrap();
        worst = worst.max(d);
        parts.push(format!("{name}: {d:.2e}"));
    }
    report(4, worst <= 1e-3, format!("max relative disagreement {worst:.3e} (≤ 1e-3) [{}]", parts.join(", ")));
}

/// Angle `φ` at which the smallest pole argument of the rotated scalar pencil
/// equals `target`, by bisection on the pole locus.
fn pole_crossover(alpha: f64, target: f64) -> f64 {
    let g = |phi: f64| scalar_pole_locus(1.0, alpha, 0.5, phi).min_abs_angle() - target;
    let (mut lo, mut hi) = (1e-6, PI - 1e-6);
    assert!(g(lo) > 0.0 && g(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn criterion_05_phase_diagram() {
    let start = Instant::now();
    let params = SweepParams::default();
    let step = 0.01;
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 1.0, 1.9] {
        let pred = predict_parabolic_angle(0.5, alpha).unwrap();
        let phis: Vec<f64> = (-30..=30).map(|k| pred + k as f64 * step).filter(|&p| p > 0.0 && p < PI).collect();
        let rows = sweep_with(&[0.5], &[alpha], &phis, &params).unwrap();
        let pass_below = rows.iter().filter(|r| r.phi <= pred - 0.05 + 1e-12).all(|r| r.certified);
        let fail_above = rows
            .iter()
            .filter(|r| r.phi >= pred + 0.05 - 1e-12)
            .all(|r| !r.certified && r.certified_failure);
        let first_fail = rows.iter().find(|r| !r.certified).map(|r| r.phi).unwrap_or(f64::NAN);
        let oracle = pole_crossover(alpha, PI / 2.0 + params.margin);
        let crossover_ok = (first_fail - oracle).abs() <= step;
        ok &= pass_below && fail_above && crossover_ok;
        parts.push(format!(
            "α={alpha}: pred {pred:.4}, first fail {first_fail:.4}, oracle {oracle:.4}, pass≤pred−0.05 {pass_below}, fail≥pred+0.05 {fail_above}"
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    report(5, ok && secs < 30.0, format!("{}; runtime {secs:.1}s (< 30s)", parts.join("; ")));
}

#[test]
fn criterion_06_sectoriality_calibration() {
    let one = scalar(1.0);
    let mut ok = true;
    let mut parts = Vec::new();
    for ray in [PI / 6.0, PI / 4.0, PI / 2.0] {
        let grid = SectorGrid::for_operator(&one, ray).unwrap();
        let r = check_sectorial(&one, ray / 2.0, &grid).unwrap();
        // dense brute force along the boundary ray: |λ|/|λ − 1|
        let brute = (0..200_000)
            .map(|k| {
                let rad = 10f64.powf(-4.0 + 8.0 * k as f64 / 199_999.0);
                let l = C64::from_polar(rad, ray);
                l.norm() / (l - 1.0).norm()
            })
            .fold(0.0_f64, f64::max);
        let exact = 1.0 / ray.sin();
        let rel = (r.sup - exact).abs() / exact;
        ok &= rel <= 0.02 && (brute - exact).abs() / exact <= 0.02;
        parts.push(format!("φ′={ray:.4}: sup {:.6}, brute {brute:.6}, 1/sin φ′ {exact:.6}", r.sup));
    }
    report(6, ok, parts.join("; "));
}

fn rough_ratio(n_points: usize) -> f64 {
    let p = strong_damping(n_points, Forcing::RoughHolder { theta: 0.5 });
    let c = contour(&p.a, &p.b, 1.0, 200);
    let mode = SolveMode::Holder { theta: 0.5 };
    // f(0) ≠ 0 for this forcing; the zero-data problem is solved without the trace gate
    let opts = SolveOptions {
        compat_tol: None,
        ..SolveOptions::new(mode)
    };
    let r = solve_ivp_with(&p, Some(&c), &opts).unwrap();
    maxreg_ratio(&r, &mode.full_norm()).unwrap()
}

#[test]
fn criterion_07_holder_maxreg_stability() {
    let r1 = rough_ratio(128);
    let r2 = rough_ratio(256);
    let change = (r2 - r1).abs() / r1;
    report(
        7,
        r1.is_finite() && r2.is_finite() && change < 0.15,
        format!("ratio {r1:.4} (N=128) → {r2:.4} (N=256), change {:.1}% (< 15%)", 100.0 * change),
    );
}

/// `∫₀¹∫₀¹ |t−s|^γ ds dt`.
fn double_integral(gamma: f64) -> f64 {
    2.0 / ((gamma + 1.0) * (gamma + 2.0))
}

#[test]
fn criterion_08_norm_oracles() {
    let u = SampledPath::scalar_fn(1.0, 257, |t| t).unwrap();
    let b2 = besov_norm(&u, &BesovParams::new(0.25, 2.0, 2.0).unwrap()).unwrap().seminorm;
    let b1 = besov_norm(&u, &BesovParams::new(0.25, 1.0, 1.0).unwrap()).unwrap().seminorm;
    // with the |t−s|^{1+θp} kernel the p = 1 integrand is |t−s|^{−1/4}
    let exact2 = double_integral(0.5).sqrt();
    let exact1 = double_integral(-0.25);
    let d = scalar(1.0);
    let x = CVector::from_element(1, C64::new(1.0, 0.0));
    let tg = default_tgrid(&d);
    let sup = interp_norm(&d, &x, 0.5, f64::INFINITY, &tg).unwrap().value();
    let one = interp_norm(&d, &x, 0.5, 1.0, &tg).unwrap().value();
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    let ok = rel(b2, exact2) <= 0.02 && rel(b1, exact1) <= 0.02 && rel(sup, 1.5) <= 0.02 && rel(one, 1.0 + PI) <= 0.02;
    report(
        8,
        ok,
        format!(
            "besov p=2 {b2:.4} vs {exact2:.4}; besov p=1 {b1:.4} vs {exact1:.4}; interp p=∞ {sup:.4} vs 1.5; interp p=1 {one:.4} vs {:.4}",
            1.0 + PI
        ),
    );
}

/// The stated p = 1 reference value 0.4156 is `∫∫|t−s|^{3/4}`, the integrand
/// without the `+1` in the kernel exponent; it cannot hold together with the
/// p = 2 value 0.7303, which requires the `+1`.
#[test]
#[ignore = "reference value inconsistent with the kernel exponent; see README"]
fn criterion_08_literal_p1_reference() {
    let u = SampledPath::scalar_fn(1.0, 257, |t| t).unwrap();
    let b1 = besov_norm(&u, &BesovParams::new(0.25, 1.0, 1.0).unwrap()).unwrap().seminorm;
    let ok = (b1 - 0.4156).abs() / 0.4156 <= 0.02;
    report(8, ok, format!("besov p=1 {b1:.4} vs literal reference 0.4156"));
}

/// Forward differences `(x_k − x_{k−1})/Δt` with a zero first row.
fn forward_difference(n: usize, dt: f64) -> Operator {
    let mut m = CMatrix::zeros(n, n);
    for k in 1..n {
        m[(k, k)] = C64::new(1.0 / dt, 0.0);
        m[(k, k - 1)] = C64::new(-1.0 / dt, 0.0);
    }
    Operator::new(m, "forward_difference").unwrap()
}

fn interp_besov_ratio(g: fn(f64) -> f64, n_points: usize) -> f64 {
    let u = SampledPath::scalar_fn(1.0, n_points, g).unwrap();
    let dt = u.step();
    let d = forward_difference(n_points, dt);
    // √Δt makes the Euclidean norm a discrete L² norm
    let x = CVector::from_iterator(n_points, u.values().iter().map(|v| v[0] * dt.sqrt()));
    let i = interp_norm(&d, &x, 0.25, 2.0, &default_tgrid(&d)).unwrap().value();
    let b = besov_norm(&u, &BesovParams::new(0.25, 2.0, 2.0).unwrap()).unwrap().full();
    i / b
}

#[test]
fn criterion_09_interpolation_besov_consistency() {
    type Profile = (&'static str, fn(f64) -> f64);
    let family: [Profile; 5] = [
        ("t^1/4", |t| t.powf(0.25)),
        ("t", |t| t),
        ("sin 2πt", |t| (2.0 * PI * t).sin()),
        ("|t−1/2|^1/2", |t| (t - 0.5).abs().sqrt()),
        ("t²", |t| t * t),
    ];
    let c = 10.0;
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, g) in family {
        let r1 = interp_besov_ratio(g, 129);
        let r2 = interp_besov_ratio(g, 257);
        let moved = (r2 - r1).abs() / r1;
        ok &= r1 >= 1.0 / c && r1 <= c && r2 >= 1.0 / c && r2 <= c && moved < 0.2;
        parts.push(format!("{name}: {r1:.3}→{r2:.3}"));
    }
    report(9, ok, format!("ratios in [0.1, 10], moves < 20%: {}", parts.join(", ")));
}

#[test]
fn criterion_10_compatibility() {
    let a = scalar(1.0);
    let c = contour(&a, &a, 1.0, 100);
    let mode = SolveMode::Holder { theta: 0.5 };
    let tol = 1e-8;
    let mut ok = true;
    for defect in [0.0, 1e-10, 5e-9, 2e-8, 1e-6, 1e-2, 1.0] {
        let f = SampledPath::scalar_fn(1.0, 65, |_| 1.0 + defect).unwrap();
        let p = CauchyProblem::new(
            a.clone(),
            a.clone(),
            f,
            CVector::from_element(1, C64::new(1.0, 0.0)),
            CVector::zeros(1),
        )
        .unwrap();
        let bound = tol * (1.0 + defect);
        let res = solve_ivp(&p, &c, mode);
        let errored = matches!(res, Err(Error::Compatibility { .. }));
        ok &= errored == (defect > bound);
    }
    let f = SampledPath::scalar_fn(1.0, 65, |_| 1.0).unwrap();
    let p = CauchyProblem::new(a.clone(), a, f, CVector::from_element(1, C64::new(1.0, 0.0)), CVector::zeros(1)).unwrap();
    let r = solve_ivp(&p, &c, mode).unwrap();
    let dev = r.u.values().iter().map(|v| (v[0] - 1.0).norm()).fold(0.0, f64::max);
    ok &= r.residual_inf <= 1e-8 && dev <= 1e-8;
    report(
        10,
        ok,
        format!("error iff defect > tol on 7 defects; equilibrium residual {:.1e}, ‖u − 1‖∞ {dev:.1e}", r.residual_inf),
    );
}
