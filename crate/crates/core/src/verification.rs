//! Named end-to-end checks of the closed forms, limits, rates and
//! invariants of the damped problem. Each check has a runtime budget that
//! counts toward passing.

use std::f64::consts::PI;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::charts::{chart_field_eval, chart_from_reduced, pushforward_residual, reduced_from_chart, ChartId};
use crate::equilibria::{
    boundary_root, critical_det_closed_form, critical_interior_equilibrium, eigenvalues_small, gamma_pos_equilibrium,
    numeric_jacobian, Eigenvalue,
};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegrationConfig};
use crate::model::{
    cartesian_field, observables, reduced_ecc_sq, reduced_from_cartesian, rvl_rhs, CartesianState,
    DampingParams, ReducedState,
};
use crate::regime::{simulate_outcome, standard_ic, LabConfig, OmegaVerdict, OutcomeReport, PBehavior};
use crate::sweep::sweep;

type Params = DampingParams<f64>;

/// One sub-assertion of a check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub elapsed_s: f64,
    pub budget_s: f64,
    pub assertions: Vec<Assertion>,
}

impl CheckResult {
    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }
}

#[derive(Default)]
pub struct Ctx {
    assertions: Vec<Assertion>,
}

impl Ctx {
    pub fn check(&mut self, label: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion { label: label.into(), passed, detail: detail.into() });
    }

    fn fail(&mut self, label: impl Into<String>, err: impl std::fmt::Display) {
        self.check(label, false, err.to_string());
    }

    fn outcome(&mut self, a: f64, b: f64, d: f64) -> Option<OutcomeReport> {
        let res = Params::new(a, b, d).and_then(|p| simulate_outcome(&p, &standard_ic(0.9), &LabConfig::default()));
        match res {
            Ok(r) => Some(r),
            Err(e) => {
                self.fail(format!("({a},{b},{d}) runs"), e);
                None
            }
        }
    }
}

pub struct Check {
    pub name: &'static str,
    pub summary: &'static str,
    /// Part of the fast subset.
    pub quick: bool,
    pub budget_s: f64,
    run: fn(&mut Ctx),
}

pub const CHECKS: &[Check] = &[
    Check {
        name: "critical-closed-form",
        summary: "exact collision solution on the critical interior equilibrium",
        quick: true,
        budget_s: 1.0,
        run: critical_closed_form,
    },
    Check {
        name: "critical-ecc-limits",
        summary: "|E|² → 4δ² below δ = ½ and → 1 above",
        quick: true,
        budget_s: 15.0,
        run: critical_ecc_limits,
    },
    Check {
        name: "circularization",
        summary: "γ < 0 runs circularize with divergent angle and finite collision time",
        quick: true,
        budget_s: 20.0,
        run: circularization,
    },
    Check {
        name: "zero-hopf-decay",
        summary: "decay exponent of (r1-1)² + v² near the zero-Hopf point",
        quick: true,
        budget_s: 10.0,
        run: zero_hopf_decay,
    },
    Check {
        name: "gamma-pos-attractor",
        summary: "γ > 0 attractor, q1 rate, eccentricity and angle limits",
        quick: true,
        budget_s: 10.0,
        run: gamma_pos_attractor,
    },
    Check {
        name: "collision-time-dichotomy",
        summary: "finite vs infinite collision time on γ > 0",
        quick: true,
        budget_s: 20.0,
        run: collision_time_dichotomy,
    },
    Check {
        name: "radial-velocity-trichotomy",
        summary: "radial velocity unbounded, limiting or vanishing by β",
        quick: true,
        budget_s: 30.0,
        run: radial_velocity_trichotomy,
    },
    Check {
        name: "equilibrium-algebra",
        summary: "closed-form eigenvalues, determinant and boundary root",
        quick: true,
        budget_s: 1.0,
        run: equilibrium_algebra,
    },
    Check {
        name: "structural-invariants",
        summary: "eccentricity identities, conservation, chart consistency, scaling",
        quick: true,
        budget_s: 30.0,
        run: structural_invariants,
    },
    Check {
        name: "regime-diagram",
        summary: "5×5 (α, β) sweep at δ = 0.2 agrees with the predicted partition",
        quick: false,
        budget_s: 300.0,
        run: regime_diagram,
    },
];

/// Checks matching an optional name glob, restricted to the quick subset
/// when asked.
pub fn select(filter: Option<&str>, quick: bool) -> Result<Vec<&'static Check>> {
    let pattern = filter
        .map(glob::Pattern::new)
        .transpose()
        .map_err(|e| Error::InvalidParams(format!("bad filter pattern: {e}")))?;
    Ok(CHECKS
        .iter()
        .filter(|c| !quick || c.quick)
        .filter(|c| pattern.as_ref().is_none_or(|p| p.matches(c.name)))
        .collect())
}

pub fn run_check(check: &Check) -> CheckResult {
    let start = Instant::now();
    let mut ctx = Ctx::default();
    (check.run)(&mut ctx);
    let elapsed_s = start.elapsed().as_secs_f64();
    ctx.check("runtime", elapsed_s < check.budget_s, format!("{elapsed_s:.3} s of {} s", check.budget_s));
    let passed = ctx.assertions.iter().all(|a| a.passed);
    CheckResult { name: check.name.to_string(), passed, elapsed_s, budget_s: check.budget_s, assertions: ctx.assertions }
}

pub fn run_suite(filter: Option<&str>, quick: bool) -> Result<Vec<CheckResult>> {
    Ok(select(filter, quick)?.into_iter().map(run_check).collect())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Largest relative error of `l(t)` against `(1 - 3δ(1-4δ²)^(3/2) t)^(1/3)`
/// for `α = β = 1`, `δ = 0.3`, integrating `field` in `(r, v, l)` up to
/// `0.9 ω`.
pub fn closed_form_error(field: impl Fn(&[f64; 3]) -> [f64; 3]) -> f64 {
    let d: f64 = 0.3;
    let k = 1.0 - 4.0 * d * d;
    let rate = 3.0 * d * k.powf(1.5);
    let omega = 1.0 / rate;
    let l0 = 1.0;
    let r0 = l0 * l0 / k;
    let p0 = -2.0 * d * k.sqrt() / l0;
    let cfg = IntegrationConfig::until(0.9 * omega).with_tolerances(1e-13, 1e-15);
    let tr = integrate(&|_t: f64, y: &[f64; 3]| field(y), [r0, p0 * l0, l0], &cfg, &[]);
    if !tr.termination.is_success() {
        return f64::INFINITY;
    }
    tr.samples
        .iter()
        .map(|(t, y)| rel(y[2], (1.0 - rate * t).cbrt()))
        .fold(0.0, f64::max)
}

fn critical_closed_form(ctx: &mut Ctx) {
    let p = Params::new(1.0, 1.0, 0.3).expect("valid");
    let omega: f64 = 1.0 / (3.0 * 0.3 * 0.512);
    ctx.check("omega", (omega - 2.170139).abs() < 1e-6, format!("ω = {omega:.7}"));
    let err = closed_form_error(|y| rvl_rhs(&p, y));
    ctx.check("l(t) matches the closed form", err < 1e-6, format!("max relative error {err:.2e}"));
}

fn critical_ecc_limits(ctx: &mut Ctx) {
    for (d, target, tol) in [(0.2, 0.16, 1e-4), (0.3, 0.36, 1e-4), (0.7, 1.0, 1e-3)] {
        if let Some(r) = ctx.outcome(1.0, 1.0, d) {
            let e = r.ecc_sq_limit.unwrap_or(f64::NAN);
            ctx.check(format!("δ = {d}: |E|² limit"), (e - target).abs() <= tol, format!("{e:.8} vs {target} ± {tol}"));
        }
    }
}

fn circularization(ctx: &mut Ctx) {
    for (a, b, d) in [(0.0, 1.0, 0.1), (1.0, 0.5, 0.2)] {
        if let Some(r) = ctx.outcome(a, b, d) {
            let e = r.ecc_sq_limit.unwrap_or(f64::NAN);
            ctx.check(format!("({a},{b},{d}) |E|² → 0"), e < 1e-3, format!("{e:.3e}"));
            ctx.check(
                format!("({a},{b},{d}) θ diverges"),
                r.theta_diverged && r.delta_theta > 40.0 * PI,
                format!("Δθ = {:.1}", r.delta_theta),
            );
            ctx.check(
                format!("({a},{b},{d}) finite collision time"),
                matches!(r.omega, OmegaVerdict::Finite { .. }),
                format!("{:?}", r.omega),
            );
        }
    }
}

fn zero_hopf_decay(ctx: &mut Ctx) {
    let (a, b, d) = (0.0, 1.0, 0.1);
    let p = Params::new(a, b, d).expect("valid");
    let target = -2.0 * (a + b) / p.gamma_tilde();
    if let Some(r) = ctx.outcome(a, b, d) {
        match r.fits.get("r1v_dev") {
            Some(f) => {
                ctx.check("exponent", (f.exponent - target).abs() <= 0.15, format!("{:.4} vs {target}", f.exponent));
                ctx.check("fit quality", f.r_squared > 0.98, format!("r² = {:.5}", f.r_squared));
            }
            None => ctx.fail("exponent", "no (r1-1)² + v² fit"),
        }
    }
}

fn gamma_pos_attractor(ctx: &mut Ctx) {
    let (a, b, d) = (1.0, 2.0, 0.5);
    let Some(r) = ctx.outcome(a, b, d) else { return };
    let Some(y) = r.final_chart_state else {
        ctx.fail("run completes", format!("{:?}", r.status));
        return;
    };
    let v_star = -1.0 / d.sqrt();
    ctx.check("v11 → -δ^(-1/2)", (y[1] - v_star).abs() < 0.01, format!("{:.7} vs {v_star:.7}", y[1]));
    ctx.check("q1 → 0", y[0] < 0.05, format!("q1 = {:.3e}", y[0]));
    ctx.check("mu11 → 0", y[2].abs() < 1e-3, format!("mu11 = {:.3e}", y[2]));
    match r.fits.get("q1") {
        Some(f) => ctx.check("q1 exponent", (f.exponent + 0.5).abs() <= 0.075, format!("{:.4}", f.exponent)),
        None => ctx.fail("q1 exponent", "no fit"),
    }
    let e = r.ecc_sq_limit.unwrap_or(f64::NAN);
    ctx.check("|E|² → 1", (e - 1.0).abs() <= 1e-3, format!("{e:.8}"));
    ctx.check("θ converges", r.theta_converged, format!("Δθ = {:.6}", r.delta_theta));
    match r.ecc_vector_limit {
        Some([ex, ey]) => {
            let th = y[3];
            let dist = (ex + th.cos()).hypot(ey + th.sin());
            ctx.check("E → -e^(iθ)", dist < 0.01, format!("|E + e^(iθ)| = {dist:.3e}"));
        }
        None => ctx.fail("E → -e^(iθ)", "no eccentricity vector"),
    }
}

fn collision_time_dichotomy(ctx: &mut Ctx) {
    if let Some(r) = ctx.outcome(2.0, 2.0, 0.5) {
        ctx.check("(2,2,0.5) finite", matches!(r.omega, OmegaVerdict::Finite { .. }), format!("{:?}", r.omega));
    }
    if let Some(r) = ctx.outcome(0.0, 4.0, 0.1) {
        ctx.check("(0,4,0.1) infinite", r.omega == OmegaVerdict::Infinite, format!("{:?}", r.omega));
    }
}

fn radial_velocity_trichotomy(ctx: &mut Ctx) {
    if let Some(r) = ctx.outcome(1.0, 1.5, 0.1) {
        ctx.check("β = 1.5 unbounded", r.p_behavior == PBehavior::Unbounded, format!("{:?}", r.p_behavior));
    }
    let d = 0.5;
    if let Some(r) = ctx.outcome(1.0, 2.0, d) {
        let target = -1.0 / f64::sqrt(d);
        let ok = matches!(r.p_behavior, PBehavior::LimitValue(c) if rel(c, target) <= 0.01);
        ctx.check("β = 2 limit -δ^(-1/2)", ok, format!("{:?} vs {target:.6}", r.p_behavior));
    }
    if let Some(r) = ctx.outcome(1.0, 2.5, 0.1) {
        ctx.check("β = 2.5 to zero", r.p_behavior == PBehavior::ToZero, format!("{:?}", r.p_behavior));
    }
}

fn equilibrium_algebra(ctx: &mut Ctx) {
    let mut worst: f64 = 0.0;
    for a in [0.5, 1.0, 2.0] {
        for d in [0.2, 0.5, 1.5] {
            let p = Params::new(a, 2.0, d).expect("valid");
            let lam = d.powf(1.0 / (1.0 + a));
            let expected = [-(1.0 + a) * lam, -lam, 0.0];
            let eq = match gamma_pos_equilibrium(&p) {
                Ok(eq) => eq,
                Err(e) => return ctx.fail(format!("equilibrium at α={a}, δ={d}"), e),
            };
            let loc = [eq.location[0], eq.location[1], eq.location[2]];
            let field = |y: &[f64; 3]| {
                let f = chart_field_eval(eq.chart, &p, &[y[0], y[1], y[2], 0.0, 0.0]);
                [f[0], f[1], f[2]]
            };
            let num = numeric_jacobian(field, &loc, 1e-6).and_then(|j| eigenvalues_small(&j));
            match num {
                Ok(num) => {
                    for (n, e) in num.iter().zip(expected) {
                        worst = worst.max(n.dist(Eigenvalue::real(e)));
                    }
                    for (c, e) in eq.eigenvalues.iter().zip(expected) {
                        worst = worst.max(c.dist(Eigenvalue::real(e)));
                    }
                }
                Err(e) => return ctx.fail(format!("jacobian at α={a}, δ={d}"), e),
            }
        }
    }
    ctx.check("γ > 0 eigenvalues", worst < 1e-6, format!("max deviation {worst:.2e}"));

    for d in [0.1, 0.2, 0.4] {
        let p = Params::new(1.0, 1.0, d).expect("valid");
        match critical_interior_equilibrium(&p) {
            Ok(eq) => {
                let det = eq.extras.det_j.unwrap_or(f64::NAN);
                let closed = critical_det_closed_form(d);
                let expect = (2.0 * d + 1.0).powi(4) * (1.0 - 2.0 * d).powi(4);
                let err = (det - expect).abs().max((closed - expect).abs());
                ctx.check(format!("det J at δ = {d}"), err < 1e-10, format!("{det:.12} vs {expect:.12}"));
            }
            Err(e) => ctx.fail(format!("det J at δ = {d}"), e),
        }
    }

    let mut worst_res: f64 = 0.0;
    for a in [0.0, 0.5, 1.0, 2.0] {
        for d in [0.1, 0.5, 1.0, 3.0] {
            let p = Params::new(a, (3.0 - a) / 2.0, d).expect("valid");
            match boundary_root(&p) {
                Ok(v) => worst_res = worst_res.max((0.5 * v * v - 1.0 - d * v.abs().powf(a) * v).abs()),
                Err(e) => return ctx.fail("boundary root", e),
            }
        }
    }
    ctx.check("boundary root residual", worst_res < 1e-12, format!("{worst_res:.2e}"));
    let p = Params::new(0.0, 1.5, 1.0).expect("valid");
    match boundary_root(&p) {
        Ok(v) => {
            let expect = 1.0 - 3f64.sqrt();
            ctx.check("v1*(α=0, δ=1) = 1 - √3", (v - expect).abs() < 1e-12, format!("{v:.15}"));
        }
        Err(e) => ctx.fail("v1*(α=0, δ=1) = 1 - √3", e),
    }
}

fn random_state(rng: &mut StdRng) -> CartesianState<f64> {
    let r = rng.gen_range(0.2..3.0);
    let phi = rng.gen_range(-PI..PI);
    CartesianState::new(
        [r * phi.cos(), r * phi.sin()],
        [rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)],
    )
}

fn chart_cases() -> [(ChartId, Params); 5] {
    let p = |a, b, d| Params::new(a, b, d).expect("valid");
    [
        (ChartId::GammaPosA0, p(0.0, 2.0, 0.3)),
        (ChartId::GammaPosApos, p(1.0, 2.0, 0.5)),
        (ChartId::GammaNeg, p(0.0, 1.0, 0.1)),
        (ChartId::Critical, p(1.0, 1.0, 0.3)),
        (ChartId::CriticalL2, p(1.0, 1.0, 0.7)),
    ]
}

/// Relative deviation of `u₂(t/μ)` from `λ u₁(t)` where `u₂` starts at
/// `(λ u₀, λμ u̇₀)` and `μ²λ³ = 1`.
pub fn scaling_deviation(params: &Params, u0: CartesianState<f64>, lambda: f64, mu: f64, times: &[f64]) -> f64 {
    let cfg = |t: f64| IntegrationConfig::until(t).with_tolerances(1e-12, 1e-14);
    let field = cartesian_field(*params);
    let scaled = CartesianState::new(
        [lambda * u0.u[0], lambda * u0.u[1]],
        [lambda * mu * u0.udot[0], lambda * mu * u0.udot[1]],
    );
    let mut worst: f64 = 0.0;
    for &t in times {
        let a = integrate(&field, u0.to_array(), &cfg(t), &[]);
        let b = integrate(&field, scaled.to_array(), &cfg(t / mu), &[]);
        let (Some(ya), Some(yb)) = (a.final_state(), b.final_state()) else { return f64::INFINITY };
        if !(a.termination.is_success() && b.termination.is_success()) {
            return f64::INFINITY;
        }
        let scale = lambda * ya[0].hypot(ya[1]);
        worst = worst.max((lambda * ya[0] - yb[0]).hypot(lambda * ya[1] - yb[1]) / scale);
    }
    worst
}

fn structural_invariants(ctx: &mut Ctx) {
    let mut rng = StdRng::seed_from_u64(20);
    let (mut ecc_err, mut lag_err): (f64, f64) = (0.0, 0.0);
    for _ in 0..50 {
        let s = random_state(&mut rng);
        let o = match observables(&s) {
            Ok(o) => o,
            Err(e) => return ctx.fail("observables", e),
        };
        let red = reduced_from_cartesian(&s, 0.0).expect("r > 0");
        let vec_sq = o.ecc_vector[0].powi(2) + o.ecc_vector[1].powi(2);
        ecc_err = ecc_err.max((vec_sq - reduced_ecc_sq(&red)).abs() / vec_sq.max(1.0));
        let r = s.u[0].hypot(s.u[1]);
        let lag = r + o.ecc_vector[0] * s.u[0] + o.ecc_vector[1] * s.u[1] - o.ang_momentum.powi(2);
        lag_err = lag_err.max(lag.abs());
    }
    ctx.check("|E|² vector vs scalar", ecc_err < 1e-10, format!("{ecc_err:.2e}"));
    ctx.check("Lagrange identity", lag_err < 1e-10, format!("{lag_err:.2e}"));

    // undamped conservation
    let p0 = Params::undamped(1.0, 1.0);
    let u0 = CartesianState::new([1.0, 0.0], [0.0, 0.9]);
    let cfg = IntegrationConfig::until(100.0).with_tolerances(1e-13, 1e-15);
    let tr = integrate(&cartesian_field(p0), u0.to_array(), &cfg, &[]);
    let o0 = observables(&u0).expect("r > 0");
    let mut drift: f64 = 0.0;
    for (_, y) in &tr.samples {
        let o = observables(&CartesianState::from_array(y)).expect("r > 0");
        drift = drift
            .max((o.ecc_vector[0] - o0.ecc_vector[0]).hypot(o.ecc_vector[1] - o0.ecc_vector[1]))
            .max((o.energy - o0.energy).abs())
            .max((o.ang_momentum - o0.ang_momentum).abs());
    }
    ctx.check(
        "δ = 0 conservation of E, energy, l",
        tr.termination.is_success() && drift < 1e-8,
        format!("drift {drift:.2e} over t ∈ [0, 100]"),
    );

    // charts
    let (mut trip, mut push): (f64, f64) = (0.0, 0.0);
    for (chart, p) in chart_cases() {
        for _ in 0..20 {
            let s = ReducedState::new(
                rng.gen_range(0.2..3.0),
                rng.gen_range(-1.5..1.5),
                rng.gen_range(0.1..1.5),
                rng.gen_range(-3.0..3.0),
                rng.gen_range(0.0..2.0),
            );
            let c = match chart_from_reduced(chart, &p, &s) {
                Ok(c) => c,
                Err(e) => return ctx.fail(format!("{chart} transform"), e),
            };
            match reduced_from_chart(&p, &c) {
                Ok(back) => {
                    for (x, y) in s.to_array().iter().zip(back.to_array()) {
                        trip = trip.max((x - y).abs() / x.abs().max(1.0));
                    }
                }
                Err(e) => return ctx.fail(format!("{chart} inverse"), e),
            }
            match pushforward_residual(&p, &c) {
                Ok(r) => push = push.max(r),
                Err(e) => return ctx.fail(format!("{chart} pushforward"), e),
            }
        }
    }
    ctx.check("chart round trips", trip < 1e-12, format!("{trip:.2e}"));
    ctx.check("pushforward consistency", push < 1e-6, format!("{push:.2e}"));

    let (lambda, mu) = (4.0, 0.125);
    let times = [0.25, 0.5, 1.0];
    for (label, p) in [("γ = 0", Params::new(1.0, 1.0, 0.3)), ("δ = 0", Ok(Params::undamped(0.5, 0.5)))] {
        let p = p.expect("valid");
        let dev = scaling_deviation(&p, u0, lambda, mu, &times);
        ctx.check(format!("scaling symmetry, {label}"), dev < 1e-6, format!("{dev:.2e}"));
    }
}

fn regime_diagram(ctx: &mut Ctx) {
    let g = [0.25, 0.75, 1.25, 1.75, 2.25];
    match sweep(&g, &g, 0.2, &LabConfig::default(), None) {
        Ok(d) => {
            let scored = d.scored();
            let agreement = d.agreement().unwrap_or(0.0);
            ctx.check("points scored", scored > 0, format!("{scored} of {}", d.grid.len()));
            ctx.check("agreement ≥ 95%", agreement >= 0.95, format!("{:.1}%", 100.0 * agreement));
        }
        Err(e) => ctx.fail("sweep", e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_selects_critical_checks() {
        let names: Vec<_> = select(Some("critical*"), false).unwrap().iter().map(|c| c.name).collect();
        assert_eq!(names, ["critical-closed-form", "critical-ecc-limits"]);
        assert!(select(Some("["), false).is_err());
        assert!(!select(None, true).unwrap().iter().any(|c| c.name == "regime-diagram"));
        assert_eq!(select(None, false).unwrap().len(), 10);
    }

    #[test]
    fn closed_form_detects_flipped_damping() {
        let p = Params::new(1.0, 1.0, 0.3).unwrap();
        assert!(closed_form_error(|y| rvl_rhs(&p, y)) < 1e-6);
        let flipped = |y: &[f64; 3]| {
            let f = rvl_rhs(&p, y);
            let l = y[2];
            // reverse the drag in v̇ using l̇ = -D l
            let d = -f[2] / l;
            [f[0], f[1] + 4.0 * d * y[1], f[2]]
        };
        assert!(closed_form_error(flipped) > 1e-3);
    }
}
