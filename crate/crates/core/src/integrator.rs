//! Adaptive Dormand–Prince 5(4) integrator with PI step control, FSAL,
//! continuous (dense) output, event location and termination reporting.
//!
//! The integrator never panics on a bad trajectory: overflow, step-size
//! collapse and budget exhaustion end the run with a [`Termination`] reason
//! and keep every finite sample computed so far.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Right-hand side `y' = f(t, y)` plus the components that are nonnegative
/// on the invariant domain (they receive boundary clamping).
pub trait OdeSystem<T, const N: usize> {
    fn rhs(&self, t: T, y: &[T; N]) -> [T; N];

    fn nonnegative(&self) -> &[usize] {
        &[]
    }
}

impl<T, const N: usize, F> OdeSystem<T, N> for F
where
    F: Fn(T, &[T; N]) -> [T; N],
{
    fn rhs(&self, t: T, y: &[T; N]) -> [T; N] {
        self(t, y)
    }
}

/// A field together with its nonnegative components.
pub struct Constrained<'a, F> {
    pub field: F,
    pub nonnegative: &'a [usize],
}

impl<'a, T, const N: usize, F> OdeSystem<T, N> for Constrained<'a, F>
where
    F: Fn(T, &[T; N]) -> [T; N],
{
    fn rhs(&self, t: T, y: &[T; N]) -> [T; N] {
        (self.field)(t, y)
    }

    fn nonnegative(&self) -> &[usize] {
        self.nonnegative
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig<T> {
    pub rtol: T,
    pub atol: T,
    /// First trial step; chosen automatically when `None`.
    pub h_init: Option<T>,
    pub h_max: T,
    pub max_steps: usize,
    pub start_time: T,
    pub stop_time: T,
    /// Keep every `sample_stride`-th accepted step (the first and last
    /// points and event points are always kept).
    pub sample_stride: usize,
}

impl<T: Scalar> Default for IntegrationConfig<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-9),
            atol: T::lit(1e-12),
            h_init: None,
            h_max: T::infinity(),
            max_steps: 5_000_000,
            start_time: T::zero(),
            stop_time: T::one(),
            sample_stride: 1,
        }
    }
}

impl<T: Scalar> IntegrationConfig<T> {
    pub fn until(stop_time: T) -> Self {
        Self { stop_time, ..Self::default() }
    }

    pub fn with_tolerances(mut self, rtol: T, atol: T) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    fn validate(&self) -> Result<(), String> {
        if !(self.rtol > T::zero() && self.atol > T::zero()) {
            return Err("rtol and atol must be positive".into());
        }
        if self.max_steps == 0 || self.sample_stride == 0 {
            return Err("max_steps and sample_stride must be at least 1".into());
        }
        if !(self.h_max > T::zero()) {
            return Err("h_max must be positive".into());
        }
        if !(self.stop_time >= self.start_time) || !self.start_time.is_finite() {
            return Err("integration runs forward: need finite start_time <= stop_time".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Any,
    Up,
    Down,
}

impl Direction {
    fn admits<T: Scalar>(self, before: T, after: T) -> bool {
        let up = before < T::zero() && after >= T::zero();
        let down = before > T::zero() && after <= T::zero();
        match self {
            Direction::Any => up || down,
            Direction::Up => up,
            Direction::Down => down,
        }
    }
}

pub type EventFn<'a, T, const N: usize> = Box<dyn Fn(T, &[T; N]) -> T + 'a>;

pub struct EventSpec<'a, T, const N: usize> {
    pub name: String,
    pub function: EventFn<'a, T, N>,
    pub direction: Direction,
    pub terminal: bool,
}

impl<'a, T, const N: usize> EventSpec<'a, T, N> {
    pub fn new(name: impl Into<String>, function: impl Fn(T, &[T; N]) -> T + 'a) -> Self {
        Self { name: name.into(), function: Box::new(function), direction: Direction::Any, terminal: false }
    }

    pub fn direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }
}

impl<T, const N: usize> fmt::Debug for EventSpec<'_, T, N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventSpec")
            .field("name", &self.name)
            .field("direction", &self.direction)
            .field("terminal", &self.terminal)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    StopTime,
    TerminalEvent(String),
    MaxSteps,
    NonFinite,
    StepUnderflow,
}

impl Termination {
    /// Normal completion (stop time or a requested terminal event).
    pub fn is_success(&self) -> bool {
        matches!(self, Termination::StopTime | Termination::TerminalEvent(_))
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::StopTime => f.write_str("stop-time"),
            Termination::TerminalEvent(name) => write!(f, "event:{name}"),
            Termination::MaxSteps => f.write_str("max-steps"),
            Termination::NonFinite => f.write_str("non-finite"),
            Termination::StepUnderflow => f.write_str("step-underflow"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord<T, const N: usize> {
    pub name: String,
    pub time: T,
    pub state: [T; N],
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T, const N: usize> {
    pub samples: Vec<(T, [T; N])>,
    pub termination: Termination,
    pub events: Vec<EventRecord<T, N>>,
    pub stats: Stats,
    /// Set when the configuration itself was rejected (no steps taken).
    pub config_error: Option<String>,
}

impl<T: Scalar, const N: usize> Trajectory<T, N> {
    pub fn last(&self) -> Option<&(T, [T; N])> {
        self.samples.last()
    }

    pub fn final_time(&self) -> T {
        self.samples.last().map(|s| s.0).unwrap_or_else(T::nan)
    }

    pub fn final_state(&self) -> Option<[T; N]> {
        self.samples.last().map(|s| s.1)
    }

    pub fn times(&self) -> impl Iterator<Item = T> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn component(&self, i: usize) -> impl Iterator<Item = T> + '_ {
        self.samples.iter().map(move |s| s.1[i])
    }
}

// Dormand–Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Tableau converted once to the working scalar type.
struct Tableau<T> {
    c: [T; 4],
    a: [[T; 5]; 5],
    b: [T; 5],
    e: [T; 6],
    d: [T; 6],
}

impl<T: Scalar> Tableau<T> {
    fn new() -> Self {
        let l = T::lit;
        let z = T::zero();
        Self {
            c: [l(C2), l(C3), l(C4), l(C5)],
            a: [
                [l(A21), z, z, z, z],
                [l(A31), l(A32), z, z, z],
                [l(A41), l(A42), l(A43), z, z],
                [l(A51), l(A52), l(A53), l(A54), z],
                [l(A61), l(A62), l(A63), l(A64), l(A65)],
            ],
            b: [l(B1), l(B3), l(B4), l(B5), l(B6)],
            e: [l(E1), l(E3), l(E4), l(E5), l(E6), l(E7)],
            d: [l(D1), l(D3), l(D4), l(D5), l(D6), l(D7)],
        }
    }
}

fn axpy<T: Scalar, const N: usize>(y: &[T; N], h: T, terms: &[(T, &[T; N])]) -> [T; N] {
    let mut out = *y;
    for i in 0..N {
        let mut s = T::zero();
        for (c, k) in terms {
            s = s + *c * k[i];
        }
        out[i] = out[i] + h * s;
    }
    out
}

fn all_finite<T: Scalar, const N: usize>(y: &[T; N]) -> bool {
    y.iter().all(|x| x.is_finite())
}

/// Result of one trial step from `(t, y)` with size `h`.
struct Step<T, const N: usize> {
    y_new: [T; N],
    k: [[T; N]; 7],
    err: T,
}

struct Stepper<'s, T, const N: usize, S: ?Sized> {
    sys: &'s S,
    tab: Tableau<T>,
    evaluations: usize,
}

impl<'s, T: Scalar, const N: usize, S: OdeSystem<T, N> + ?Sized> Stepper<'s, T, N, S> {
    fn f(&mut self, t: T, y: &[T; N]) -> [T; N] {
        self.evaluations += 1;
        self.sys.rhs(t, y)
    }

    fn step(&mut self, t: T, y: &[T; N], k1: &[T; N], h: T, rtol: T, atol: T) -> Option<Step<T, N>> {
        let tab = &self.tab;
        let (c, a, b, e) = (tab.c, tab.a, tab.b, tab.e);
        let y2 = axpy(y, h, &[(a[0][0], k1)]);
        let k2 = self.f(t + c[0] * h, &y2);
        let y3 = axpy(y, h, &[(a[1][0], k1), (a[1][1], &k2)]);
        let k3 = self.f(t + c[1] * h, &y3);
        let y4 = axpy(y, h, &[(a[2][0], k1), (a[2][1], &k2), (a[2][2], &k3)]);
        let k4 = self.f(t + c[2] * h, &y4);
        let y5 = axpy(y, h, &[(a[3][0], k1), (a[3][1], &k2), (a[3][2], &k3), (a[3][3], &k4)]);
        let k5 = self.f(t + c[3] * h, &y5);
        let y6 = axpy(y, h, &[(a[4][0], k1), (a[4][1], &k2), (a[4][2], &k3), (a[4][3], &k4), (a[4][4], &k5)]);
        let k6 = self.f(t + h, &y6);
        let y_new = axpy(y, h, &[(b[0], k1), (b[1], &k3), (b[2], &k4), (b[3], &k5), (b[4], &k6)]);
        if !all_finite(&y_new) {
            return None;
        }
        let k7 = self.f(t + h, &y_new);
        if !all_finite(&k7) {
            return None;
        }
        let mut err = T::zero();
        for i in 0..N {
            let est = h * (e[0] * k1[i] + e[1] * k3[i] + e[2] * k4[i] + e[3] * k5[i] + e[4] * k6[i] + e[5] * k7[i]);
            let sc = atol + rtol * y[i].abs().max(y_new[i].abs());
            err = err.max(est.abs() / sc);
        }
        if !err.is_finite() {
            return None;
        }
        Some(Step { y_new, k: [*k1, k2, k3, k4, k5, k6, k7], err })
    }
}

/// Continuous extension over one accepted step.
struct Dense<T, const N: usize> {
    t0: T,
    h: T,
    r: [[T; N]; 5],
}

impl<T: Scalar, const N: usize> Dense<T, N> {
    fn new(tab: &Tableau<T>, t0: T, h: T, y0: &[T; N], y1: &[T; N], k: &[[T; N]; 7]) -> Self {
        let d = tab.d;
        let mut r = [[T::zero(); N]; 5];
        for i in 0..N {
            let dy = y1[i] - y0[i];
            let bspl = h * k[0][i] - dy;
            r[0][i] = y0[i];
            r[1][i] = dy;
            r[2][i] = bspl;
            r[3][i] = dy - h * k[6][i] - bspl;
            r[4][i] = h
                * (d[0] * k[0][i] + d[1] * k[2][i] + d[2] * k[3][i] + d[3] * k[4][i] + d[4] * k[5][i] + d[5] * k[6][i]);
        }
        Self { t0, h, r }
    }

    fn eval(&self, t: T) -> [T; N] {
        let th = (t - self.t0) / self.h;
        let th1 = T::one() - th;
        let mut out = [T::zero(); N];
        for i in 0..N {
            let r = &self.r;
            out[i] = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
        }
        out
    }
}

fn initial_step<T: Scalar, const N: usize, S: OdeSystem<T, N> + ?Sized>(
    stepper: &mut Stepper<'_, T, N, S>,
    t: T,
    y: &[T; N],
    f0: &[T; N],
    cfg: &IntegrationConfig<T>,
) -> T {
    // Hairer–Wanner heuristic
    let sc = |i: usize| cfg.atol + cfg.rtol * y[i].abs();
    let nrm = |v: &[T; N]| {
        let mut s = T::zero();
        for i in 0..N {
            s = s + (v[i] / sc(i)).powi(2);
        }
        (s / T::lit(N as f64)).sqrt()
    };
    let d0 = nrm(y);
    let d1 = nrm(f0);
    let mut h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) { T::lit(1e-6) } else { T::lit(0.01) * d0 / d1 };
    h0 = h0.min(cfg.h_max).min(cfg.stop_time - t);
    let y1 = axpy(y, h0, &[(T::one(), f0)]);
    let f1 = stepper.f(t + h0, &y1);
    let mut diff = [T::zero(); N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = nrm(&diff) / h0;
    let h1 = if !d2.is_finite() {
        h0 * T::lit(1e-3)
    } else if d1.max(d2) <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / d1.max(d2)).powf(T::lit(0.2))
    };
    let h = (T::lit(100.0) * h0).min(h1).min(cfg.h_max).min(cfg.stop_time - t);
    if h.is_finite() && h > T::zero() {
        h
    } else {
        T::lit(1e-6)
    }
}

/// Integrates `y' = f(t, y)` from `config.start_time` to `config.stop_time`.
pub fn integrate<T: Scalar, const N: usize, S: OdeSystem<T, N> + ?Sized>(
    system: &S,
    initial_state: [T; N],
    config: &IntegrationConfig<T>,
    events: &[EventSpec<'_, T, N>],
) -> Trajectory<T, N> {
    let mut traj = Trajectory {
        samples: Vec::new(),
        termination: Termination::NonFinite,
        events: Vec::new(),
        stats: Stats::default(),
        config_error: None,
    };
    if let Err(e) = config.validate() {
        traj.config_error = Some(e);
        return traj;
    }
    let mut stepper = Stepper { sys: system, tab: Tableau::new(), evaluations: 0 };
    let cfg = *config;
    let nonneg = system.nonnegative();
    let mut t = cfg.start_time;
    let mut y = initial_state;
    if !all_finite(&y) {
        return traj;
    }
    traj.samples.push((t, y));
    let mut k1 = stepper.f(t, &y);
    if !all_finite(&k1) {
        traj.stats.evaluations = stepper.evaluations;
        return traj;
    }
    if t >= cfg.stop_time {
        traj.termination = Termination::StopTime;
        traj.stats.evaluations = stepper.evaluations;
        return traj;
    }
    let mut h = match cfg.h_init {
        Some(h) if h > T::zero() => h.min(cfg.h_max),
        _ => initial_step(&mut stepper, t, &y, &k1, &cfg),
    };
    let mut g_prev: Vec<T> = events.iter().map(|e| (e.function)(t, &y)).collect();

    // PI controller constants
    let beta = T::lit(0.04);
    let expo = T::lit(0.2) - beta * T::lit(0.75);
    let safe = T::lit(0.9);
    let fac_min = T::lit(0.2);
    let fac_max = T::lit(10.0);
    let mut err_old = T::lit(1e-4);
    let mut last_rejected = false;
    let mut nonfinite_retries = 0usize;
    let clamp_floor = -T::lit(10.0) * cfg.atol;

    let termination = loop {
        if traj.stats.accepted >= cfg.max_steps {
            break Termination::MaxSteps;
        }
        let remaining = cfg.stop_time - t;
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        }
        if h < T::lit(1e-15) * t.abs().max(T::one()) {
            break Termination::StepUnderflow;
        }
        let Some(mut step) = stepper.step(t, &y, &k1, h, cfg.rtol, cfg.atol) else {
            nonfinite_retries += 1;
            if nonfinite_retries > 60 {
                break Termination::NonFinite;
            }
            traj.stats.rejected += 1;
            h = h * T::lit(0.25);
            last_rejected = true;
            continue;
        };
        let fac11 = step.err.powf(expo);
        if step.err > T::one() {
            traj.stats.rejected += 1;
            h = h / (T::one() / fac_min).min(fac11 / safe);
            last_rejected = true;
            continue;
        }
        nonfinite_retries = 0;

        // accepted
        let t_new = if last { cfg.stop_time } else { t + h };
        let mut clamped = false;
        let mut defect = false;
        for &i in nonneg {
            if step.y_new[i] < T::zero() {
                if step.y_new[i] > clamp_floor {
                    step.y_new[i] = T::zero();
                    clamped = true;
                } else {
                    defect = true;
                }
            }
        }
        if defect {
            break Termination::NonFinite;
        }
        traj.stats.accepted += 1;

        // events
        let dense = Dense::new(&stepper.tab, t, h, &y, &step.y_new, &step.k);
        let g_new: Vec<T> = events.iter().map(|e| (e.function)(t_new, &step.y_new)).collect();
        let mut hits: Vec<(T, usize, [T; N])> = Vec::new();
        for (idx, ev) in events.iter().enumerate() {
            if ev.direction.admits(g_prev[idx], g_new[idx]) {
                let (te, ye) = locate_event(&mut stepper, ev, &dense, t, &y, &k1, t_new, &step.y_new, g_prev[idx], &cfg);
                hits.push((te, idx, ye));
            }
        }
        hits.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
        let mut stop_event = None;
        for (te, idx, ye) in hits {
            traj.events.push(EventRecord { name: events[idx].name.clone(), time: te, state: ye });
            if events[idx].terminal {
                stop_event = Some((te, idx, ye));
                break;
            }
        }
        if let Some((te, idx, ye)) = stop_event {
            if te > t {
                traj.samples.push((te, ye));
            }
            break Termination::TerminalEvent(events[idx].name.clone());
        }

        t = t_new;
        y = step.y_new;
        k1 = if clamped { stepper.f(t, &y) } else { step.k[6] };
        g_prev = g_new;
        if last || traj.stats.accepted % cfg.sample_stride == 0 {
            traj.samples.push((t, y));
        }
        if last {
            break Termination::StopTime;
        }
        if !all_finite(&k1) {
            break Termination::NonFinite;
        }

        let mut fac = fac11 / err_old.powf(beta);
        fac = (T::one() / fac_max).max((T::one() / fac_min).min(fac / safe));
        let mut h_new = h / fac;
        if last_rejected {
            h_new = h_new.min(h);
        }
        err_old = step.err.max(T::lit(1e-4));
        last_rejected = false;
        h = h_new.min(cfg.h_max);
    };
    if let Some(&(tl, _)) = traj.samples.last() {
        if tl < t && termination != Termination::StopTime && !matches!(termination, Termination::TerminalEvent(_)) {
            traj.samples.push((t, y));
        }
    }
    traj.termination = termination;
    traj.stats.evaluations = stepper.evaluations;
    traj
}

/// Crossing time of an event inside the step `[t0, t1]`.
///
/// A bisection on the dense interpolant brackets the root; the bracket is
/// then refined by bisection on genuine Runge–Kutta substeps from `t0`,
/// whose error is far below the interpolant's.
#[allow(clippy::too_many_arguments)]
fn locate_event<T: Scalar, const N: usize, S: OdeSystem<T, N> + ?Sized>(
    stepper: &mut Stepper<'_, T, N, S>,
    ev: &EventSpec<'_, T, N>,
    dense: &Dense<T, N>,
    t0: T,
    y0: &[T; N],
    k1: &[T; N],
    t1: T,
    y1: &[T; N],
    g0: T,
    cfg: &IntegrationConfig<T>,
) -> (T, [T; N]) {
    let g = |t: T, y: &[T; N]| (ev.function)(t, y);
    let tol = |t: T| T::lit(1e-12) * t.abs() + T::lit(1e-14);
    let half = T::lit(0.5);
    let side = |v: T| v > T::zero() || (v == T::zero() && g0 < T::zero());
    let s0 = side(g0);

    let (mut lo, mut hi) = (t0, t1);
    for _ in 0..200 {
        if hi - lo <= tol(hi) {
            break;
        }
        let mid = lo + (hi - lo) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        if side(g(mid, &dense.eval(mid))) == s0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let dense_root = hi;

    // substep refinement
    let h = t1 - t0;
    let pad = (T::lit(1e-6) * h).max(T::lit(10.0) * tol(t1));
    let sub = |stepper: &mut Stepper<'_, T, N, S>, tt: T| -> Option<[T; N]> {
        if tt <= t0 {
            return Some(*y0);
        }
        if tt >= t1 {
            return Some(*y1);
        }
        stepper.step(t0, y0, k1, tt - t0, cfg.rtol, cfg.atol).map(|s| s.y_new)
    };
    let mut lo = (dense_root - pad).max(t0);
    let mut hi = (dense_root + pad).min(t1);
    let (Some(ylo), Some(yhi)) = (sub(stepper, lo), sub(stepper, hi)) else {
        return (dense_root, dense.eval(dense_root));
    };
    if side(g(lo, &ylo)) != s0 || side(g(hi, &yhi)) == s0 {
        return (dense_root, dense.eval(dense_root));
    }
    let mut y_hi = yhi;
    for _ in 0..200 {
        if hi - lo <= tol(hi) {
            break;
        }
        let mid = lo + (hi - lo) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        let Some(ym) = sub(stepper, mid) else { break };
        if side(g(mid, &ym)) == s0 {
            lo = mid;
        } else {
            hi = mid;
            y_hi = ym;
        }
    }
    (hi, y_hi)
}

/// Endpoint of a fixed-step Dormand–Prince integration with `n` steps.
pub fn integrate_fixed<T: Scalar, const N: usize, S: OdeSystem<T, N> + ?Sized>(
    system: &S,
    y0: [T; N],
    t0: T,
    t1: T,
    n: usize,
) -> [T; N] {
    let mut stepper = Stepper { sys: system, tab: Tableau::new(), evaluations: 0 };
    let h = (t1 - t0) / T::lit(n as f64);
    let mut y = y0;
    for i in 0..n {
        let t = t0 + h * T::lit(i as f64);
        let k1 = stepper.f(t, &y);
        match stepper.step(t, &y, &k1, h, T::one(), T::one()) {
            Some(s) => y = s.y_new,
            None => return [T::nan(); N],
        }
    }
    y
}

/// Observed order of accuracy of the 5th-order solution.
///
/// Runs fixed-step integrations with `n` and `2n` steps, where `n` is the
/// smallest power of two whose endpoint error drops below `1e-5`, and
/// returns `log2(e(n) / e(2n))`.
pub fn convergence_order<T: Scalar, const N: usize, S: OdeSystem<T, N> + ?Sized>(
    system: &S,
    ic: [T; N],
    t0: T,
    t1: T,
    exact: &[T; N],
) -> T {
    let error = |n: usize| {
        let y = integrate_fixed(system, ic, t0, t1, n);
        (0..N).fold(T::zero(), |m, i| m.max((y[i] - exact[i]).abs()))
    };
    let mut n = 4;
    let mut e = error(n);
    while !(e < T::lit(1e-5)) && n < 1 << 16 {
        n *= 2;
        e = error(n);
    }
    (e / error(2 * n)).log2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn oscillator(_: f64, y: &[f64; 2]) -> [f64; 2] {
        [y[1], -y[0]]
    }

    #[test]
    fn harmonic_period() {
        let cfg = IntegrationConfig::until(2.0 * PI);
        let tr = integrate(&oscillator, [1.0, 0.0], &cfg, &[]);
        assert_eq!(tr.termination, Termination::StopTime);
        let y = tr.final_state().unwrap();
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8, "{y:?}");
        assert_eq!(tr.final_time(), 2.0 * PI);
        assert!(tr.samples.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let err = |rtol: f64| {
            let cfg = IntegrationConfig::until(20.0).with_tolerances(rtol, rtol * 1e-3);
            let y = integrate(&oscillator, [1.0, 0.0], &cfg, &[]).final_state().unwrap();
            (y[0] - 20f64.cos()).abs().max((y[1] + 20f64.sin()).abs())
        };
        for rtol in [1e-5, 1e-6, 1e-7, 1e-8] {
            assert!(err(rtol) >= 5.0 * err(rtol / 10.0), "rtol {rtol}");
        }
    }

    #[test]
    fn event_down_crossing() {
        let ev = [EventSpec::new("x0", |_: f64, y: &[f64; 2]| y[0]).direction(Direction::Down)];
        let tr = integrate(&oscillator, [1.0, 0.0], &IntegrationConfig::until(10.0), &ev);
        assert_eq!(tr.events.len(), 2);
        assert!((tr.events[0].time - FRAC_PI_2).abs() < 1e-10, "{}", tr.events[0].time - FRAC_PI_2);
        assert!((tr.events[1].time - 5.0 * FRAC_PI_2).abs() < 1e-9);
        let up = [EventSpec::new("x0", |_: f64, y: &[f64; 2]| y[0]).direction(Direction::Up)];
        let tr = integrate(&oscillator, [1.0, 0.0], &IntegrationConfig::until(10.0), &up);
        assert!((tr.events[0].time - 3.0 * FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn terminal_event_stops() {
        let ev = [EventSpec::new("x0", |_: f64, y: &[f64; 2]| y[0]).terminal()];
        let tr = integrate(&oscillator, [1.0, 0.0], &IntegrationConfig::until(10.0), &ev);
        assert_eq!(tr.termination, Termination::TerminalEvent("x0".into()));
        let (t, y) = *tr.last().unwrap();
        assert!((t - FRAC_PI_2).abs() < 1e-10);
        assert!(y[0].abs() < 1e-9);
    }

    #[test]
    fn event_time_independent_of_stride() {
        let ev = || [EventSpec::new("x0", |_: f64, y: &[f64; 2]| y[0] - 0.3)];
        let mut cfg = IntegrationConfig::until(30.0);
        let a = integrate(&oscillator, [1.0, 0.0], &cfg, &ev());
        cfg.sample_stride = 10;
        let b = integrate(&oscillator, [1.0, 0.0], &cfg, &ev());
        assert!(b.samples.len() < a.samples.len());
        assert_eq!(a.events.len(), b.events.len());
        for (x, y) in a.events.iter().zip(&b.events) {
            assert!((x.time - y.time).abs() < 1e-10);
        }
    }

    #[test]
    fn deterministic() {
        let cfg = IntegrationConfig::until(50.0);
        let a = integrate(&oscillator, [1.0, 0.2], &cfg, &[]);
        let b = integrate(&oscillator, [1.0, 0.2], &cfg, &[]);
        assert_eq!(a, b);
    }

    #[test]
    fn blowup_reports_nonfinite() {
        // y' = y², y(0) = 1 blows up at t = 1
        let f = |_: f64, y: &[f64; 1]| [y[0] * y[0]];
        let tr = integrate(&f, [1.0], &IntegrationConfig::until(2.0), &[]);
        assert!(!tr.termination.is_success());
        assert!(tr.samples.iter().all(|s| s.1[0].is_finite()));
        assert!(tr.final_time() < 1.0 + 1e-6);
    }

    #[test]
    fn max_steps_budget() {
        let cfg = IntegrationConfig { max_steps: 5, ..IntegrationConfig::until(100.0) };
        let tr = integrate(&oscillator, [1.0, 0.0], &cfg, &[]);
        assert_eq!(tr.termination, Termination::MaxSteps);
        assert_eq!(tr.stats.accepted, 5);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = IntegrationConfig { rtol: 0.0, ..IntegrationConfig::until(1.0) };
        let tr = integrate(&oscillator, [1.0, 0.0], &cfg, &[]);
        assert!(tr.config_error.is_some());
    }

    #[test]
    fn clamps_small_negative_overshoot() {
        // exponential decay; the clamp keeps it nonnegative at loose tolerance
        let sys = Constrained { field: |_: f64, y: &[f64; 1]| [-50.0 * y[0]], nonnegative: &[0] };
        let cfg = IntegrationConfig::until(100.0).with_tolerances(1e-6, 1e-9);
        let tr = integrate(&sys, [1.0], &cfg, &[]);
        assert_eq!(tr.termination, Termination::StopTime);
        assert!(tr.samples.iter().all(|s| s.1[0] >= 0.0));
    }

    #[test]
    fn order_is_five() {
        let p = convergence_order(&oscillator, [1.0, 0.0], 0.0, 2.0 * PI, &[1.0, 0.0]);
        assert!((4.3..=5.7).contains(&p), "{p}");
        let decay = |_: f64, y: &[f64; 1]| [-y[0]];
        let p = convergence_order(&decay, [1.0], 0.0, 1.0, &[(-1f64).exp()]);
        assert!((4.3..=5.7).contains(&p), "{p}");
    }

    #[test]
    fn single_precision_runs() {
        let f = |_: f32, y: &[f32; 2]| [y[1], -y[0]];
        let cfg = IntegrationConfig::<f32>::until(std::f32::consts::PI).with_tolerances(1e-5, 1e-7);
        let y = integrate(&f, [1.0f32, 0.0], &cfg, &[]).final_state().unwrap();
        assert!((y[0] + 1.0).abs() < 1e-4);
    }
}
