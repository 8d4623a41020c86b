//! Predicted and observed asymptotics of single runs.
//!
//! A run starts in reduced coordinates `(r, p, l, θ, t)` and hands over to
//! the regime's blowup chart once `r < r_switch`. The chart run is then read
//! off at late chart time: eccentricity limit, angle divergence, collision
//! time finiteness, radial velocity behavior and rate-law exponents.
//!
//! This layer works in `f64` only.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::charts::{
    chart_ecc_vector, chart_field_eval, chart_from_reduced, chart_radius, ecc_sq_in_chart, reduced_from_chart,
    ChartId, ChartState,
};
use crate::error::{Error, Result};
use crate::fit::{fit_exponential_window, fit_power_law, fit_power_law_envelope, fit_power_law_window, PowerFit};
use crate::integrator::{integrate, Constrained, Direction, EventSpec, IntegrationConfig, Termination, Trajectory};
use crate::model::{reduced_field, DampingParams, ReducedState};

type Params = DampingParams<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    /// `-3 < γ < 0`: `|ℰ|² → 0`.
    Circularizing,
    /// `γ > 0`, `α - β + 3 > 0`: `|ℰ|² → 1`, collision in finite time.
    EccToOneFiniteTime,
    /// `γ > 0`, `α - β + 3 ≤ 0`: `|ℰ|² → 1`, collision only as `t → ∞`.
    EccToOneInfiniteTime,
    /// `γ = 0`, `δ < ½`: `|ℰ|² → 4δ²`.
    CriticalSubHalf,
    /// `γ = 0`, `δ ≥ ½`: `|ℰ|² → 1`.
    CriticalSuperHalf,
}

impl Regime {
    pub const ALL: [Regime; 5] = [
        Regime::Circularizing,
        Regime::EccToOneFiniteTime,
        Regime::EccToOneInfiniteTime,
        Regime::CriticalSubHalf,
        Regime::CriticalSuperHalf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Circularizing => "Circularizing",
            Regime::EccToOneFiniteTime => "EccToOneFiniteTime",
            Regime::EccToOneInfiniteTime => "EccToOneInfiniteTime",
            Regime::CriticalSubHalf => "CriticalSubHalf",
            Regime::CriticalSuperHalf => "CriticalSuperHalf",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidParams(format!("unknown regime '{s}'")))
    }
}

/// Regime predicted from `(γ, α - β + 3, δ)`.
pub fn predicted_regime(params: &Params) -> Regime {
    let g = params.gamma();
    if g < 0.0 {
        Regime::Circularizing
    } else if g > 0.0 {
        if params.collision_discriminant() > 0.0 {
            Regime::EccToOneFiniteTime
        } else {
            Regime::EccToOneInfiniteTime
        }
    } else if params.delta() < 0.5 {
        Regime::CriticalSubHalf
    } else {
        Regime::CriticalSuperHalf
    }
}

/// Chart used to read off asymptotics. Equal to the regime chart except for
/// `γ = 0, δ ≥ ½`, where `r1 → ∞` and the `critical-l2` chart is used.
pub fn analysis_chart(params: &Params) -> ChartId {
    match crate::charts::select_chart(params) {
        ChartId::Critical if params.delta() >= 0.5 => ChartId::CriticalL2,
        c => c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabConfig {
    /// Tolerances, step budget and sampling for both phases. Its time
    /// window is ignored; see `t_max` and `tau_end`.
    pub integration: IntegrationConfig<f64>,
    pub r_switch: f64,
    pub r_escape: f64,
    /// Physical-time budget for the reduced phase.
    pub t_max: f64,
    /// Chart-time horizon.
    pub tau_end: f64,
    /// Largest chart-time step, which also bounds the sampling gap.
    pub h_max_chart: f64,
    /// Chart runs stop once the radial coordinate drops below this value.
    pub collision_floor: f64,
    /// Use this chart instead of [`analysis_chart`].
    pub chart: Option<ChartId>,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            integration: IntegrationConfig::default(),
            r_switch: 0.5,
            r_escape: 1e3,
            t_max: 1e4,
            tau_end: 1e4,
            h_max_chart: 1.0,
            collision_floor: 1e-150,
            chart: None,
        }
    }
}

/// Standard initial condition `(r, p, l, θ) = (1, 0, l0, 0)`.
pub fn standard_ic(l0: f64) -> ReducedState<f64> {
    ReducedState::new(1.0, 0.0, l0, 0.0, 0.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    /// Chart phase reached `tau_end` or the collision floor.
    Completed,
    Escaped,
    /// Reduced phase used its time budget without reaching `r_switch`.
    NoSwitch,
    Failed(Termination),
}

/// Both phases of one run. Chart samples are `(τ, [c1, c2, c3, θ, t])`.
#[derive(Debug, Clone)]
pub struct PhaseRun {
    pub chart: ChartId,
    pub reduced: Trajectory<f64, 5>,
    pub chart_run: Option<Trajectory<f64, 5>>,
    pub status: RunStatus,
}

impl PhaseRun {
    pub fn chart_state(&self, y: &[f64; 5]) -> ChartState<f64> {
        ChartState::from_array(self.chart, y)
    }
}

fn check_ic(ic: &ReducedState<f64>) -> Result<()> {
    if !(ic.r > 0.0 && ic.l > 0.0 && ic.is_finite()) {
        return Err(Error::InvalidState(format!("initial condition needs r > 0 and l > 0, got {ic:?}")));
    }
    Ok(())
}

/// Reduced phase only, with the switch and escape events.
pub fn run_reduced(params: &Params, ic: &ReducedState<f64>, lab: &LabConfig, switch: bool) -> Result<Trajectory<f64, 5>> {
    check_ic(ic)?;
    let cfg = IntegrationConfig { start_time: ic.t, stop_time: ic.t + lab.t_max, ..lab.integration };
    let r_switch = lab.r_switch;
    let r_escape = lab.r_escape;
    let mut events = vec![EventSpec::new("escape", move |_, y: &[f64; 5]| y[0] - r_escape)
        .direction(Direction::Up)
        .terminal()];
    if switch {
        events.push(EventSpec::new("switch", move |_, y: &[f64; 5]| y[0] - r_switch).direction(Direction::Down).terminal());
    } else {
        // guard against integrating into the singularity
        events.push(EventSpec::new("collision", |_, y: &[f64; 5]| y[0] - 1e-8).direction(Direction::Down).terminal());
    }
    let sys = Constrained { field: reduced_field(*params), nonnegative: &[2] };
    Ok(integrate(&sys, ic.to_array(), &cfg, &events))
}

/// Chart phase from a reduced state with `r > 0`, `l > 0`.
pub fn run_chart(params: &Params, chart: ChartId, start: &ReducedState<f64>, lab: &LabConfig) -> Result<Trajectory<f64, 5>> {
    let c0 = chart_from_reduced(chart, params, start)?;
    let cfg = IntegrationConfig { start_time: 0.0, stop_time: lab.tau_end, h_max: lab.h_max_chart, ..lab.integration };
    let p = *params;
    let floor = lab.collision_floor;
    let r_escape = lab.r_escape;
    let radial = chart.radial_index();
    let events = [
        EventSpec::new("collision", move |_, y: &[f64; 5]| y[radial] - floor).direction(Direction::Down).terminal(),
        EventSpec::new("escape", move |_, y: &[f64; 5]| chart_radius(&p, chart, y) - r_escape)
            .direction(Direction::Up)
            .terminal(),
    ];
    let sys = Constrained { field: move |_: f64, y: &[f64; 5]| chart_field_eval(chart, &p, y), nonnegative: chart.nonnegative_components() };
    Ok(integrate(&sys, c0.to_array(), &cfg, &events))
}

/// Reduced phase until `r < r_switch`, then the chart phase.
pub fn run_phases(params: &Params, ic: &ReducedState<f64>, lab: &LabConfig) -> Result<PhaseRun> {
    check_ic(ic)?;
    let chart = lab.chart.unwrap_or_else(|| analysis_chart(params));
    if !chart.is_valid_for(params) {
        return Err(Error::ChartMismatch { chart: chart.name(), gamma: params.gamma() });
    }
    let reduced = if ic.r <= lab.r_switch {
        Trajectory {
            samples: vec![(ic.t, ic.to_array())],
            termination: Termination::TerminalEvent("switch".into()),
            events: vec![],
            stats: Default::default(),
            config_error: None,
        }
    } else {
        run_reduced(params, ic, lab, true)?
    };
    if let Some(e) = &reduced.config_error {
        return Err(Error::InvalidParams(e.clone()));
    }
    let status = match &reduced.termination {
        Termination::TerminalEvent(n) if n == "switch" => None,
        Termination::TerminalEvent(_) => Some(RunStatus::Escaped),
        Termination::StopTime => Some(RunStatus::NoSwitch),
        other => Some(RunStatus::Failed(other.clone())),
    };
    if let Some(status) = status {
        return Ok(PhaseRun { chart, reduced, chart_run: None, status });
    }
    let (_, y) = *reduced.last().expect("reduced phase has samples");
    let start = ReducedState::from_array(&y);
    let chart_run = run_chart(params, chart, &start, lab)?;
    let status = match &chart_run.termination {
        Termination::StopTime => RunStatus::Completed,
        Termination::TerminalEvent(n) if n == "collision" => RunStatus::Completed,
        Termination::TerminalEvent(_) => RunStatus::Escaped,
        other => RunStatus::Failed(other.clone()),
    };
    Ok(PhaseRun { chart, reduced, chart_run: Some(chart_run), status })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict")]
pub enum OmegaVerdict {
    Finite { estimate: f64 },
    Infinite,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PBehavior {
    Unbounded,
    LimitValue(f64),
    ToZero,
    Undetermined,
}

pub const OMEGA_MARGIN: f64 = 0.15;
const MIN_R2: f64 = 0.9;

/// Collision-time verdict from rate samples `(τ, dt/dτ)` and the physical
/// time `t_end` reached at the last sample.
///
/// The rate is fitted over the trailing decade, first as a power law
/// `τ^(-c)`: `c > 1 + margin` means a finite collision time estimated as
/// `t_end` plus the tail integral, `c < 1 - margin` means infinite. When an
/// exponential fits better (charts whose radial coordinate decays
/// exponentially) the time is finite.
pub fn collision_verdict_from_rates(rates: &[(f64, f64)], t_end: f64) -> OmegaVerdict {
    let Some(&(tau_f, rate_f)) = rates.iter().filter(|s| s.0 > 0.0).max_by(|a, b| a.0.total_cmp(&b.0)) else {
        return OmegaVerdict::Undetermined;
    };
    let lo = tau_f / 10.0;
    let window: Vec<(f64, f64)> = rates.iter().copied().filter(|s| s.0 >= lo && s.0 <= tau_f).collect();
    if window.len() < 3 {
        return OmegaVerdict::Undetermined;
    }
    if window.iter().all(|s| s.1 == 0.0) {
        return OmegaVerdict::Finite { estimate: t_end };
    }
    let positive: Vec<(f64, f64)> = window.iter().copied().filter(|s| s.1 > 0.0).collect();
    let power = fit_power_law_window(&positive, lo, tau_f).ok();
    let expo = fit_exponential_window(&positive, lo, tau_f).ok();
    let exp_decays = |e: &crate::fit::LineFit| e.slope < 0.0 && -e.slope * (tau_f - lo) > std::f64::consts::LN_10;
    if let Some(pf) = power.filter(|pf| positive.len() == window.len() && pf.r_squared >= MIN_R2) {
        let prefer_exp = expo.is_some_and(|e| e.r_squared > pf.r_squared && exp_decays(&e));
        if !prefer_exp {
            let c = -pf.exponent;
            return if c > 1.0 + OMEGA_MARGIN {
                OmegaVerdict::Finite { estimate: t_end + rate_f.max(0.0) * tau_f / (c - 1.0) }
            } else if c < 1.0 - OMEGA_MARGIN {
                OmegaVerdict::Infinite
            } else {
                OmegaVerdict::Undetermined
            };
        }
    }
    match expo {
        Some(e) if e.r_squared >= MIN_R2 && exp_decays(&e) => {
            OmegaVerdict::Finite { estimate: t_end + rate_f.max(0.0) / -e.slope }
        }
        // underflowed tail: rates hit zero inside the window
        _ if positive.len() < window.len() && window.last().is_some_and(|s| s.1 == 0.0) => {
            OmegaVerdict::Finite { estimate: t_end }
        }
        _ => OmegaVerdict::Undetermined,
    }
}

/// Collision-time verdict from samples `(τ, t)` of the co-integrated time,
/// with `dt/dτ` taken by finite differences.
pub fn collision_time_verdict(samples: &[(f64, f64)]) -> OmegaVerdict {
    if samples.windows(2).any(|w| w[1].1 < w[0].1 || !(w[1].0 > w[0].0)) {
        return OmegaVerdict::Undetermined;
    }
    let rates: Vec<(f64, f64)> = samples
        .windows(2)
        .map(|w| ((w[0].0 + w[1].0) / 2.0, (w[1].1 - w[0].1) / (w[1].0 - w[0].0)))
        .collect();
    let t_end = samples.last().map(|s| s.1).unwrap_or(f64::NAN);
    collision_verdict_from_rates(&rates, t_end)
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// Radial-velocity behavior from samples `(τ, p)`.
///
/// `LimitValue` when `p` varies by less than 1% over the trailing decade.
/// Otherwise the late level (median `|p|` over the last 10% of τ) is
/// compared with the envelope `max |p|` of the τ-decade up to three decades
/// back: growth by more than 2 per decade is `Unbounded`, a drop below ½ is
/// `ToZero`.
pub fn classify_p(series: &[(f64, f64)]) -> PBehavior {
    let series: Vec<(f64, f64)> = series.iter().copied().filter(|s| s.0 > 0.0 && s.1.is_finite()).collect();
    let Some(tau_f) = series.iter().map(|s| s.0).max_by(f64::total_cmp) else {
        return PBehavior::Undetermined;
    };
    let decade = |k: i32| -> Vec<f64> {
        let hi = tau_f / 10f64.powi(k);
        let lo = hi / 10.0;
        series.iter().filter(|s| s.0 >= lo && s.0 <= hi).map(|s| s.1).collect()
    };
    let last = decade(0);
    if last.len() < 3 {
        return PBehavior::Undetermined;
    }
    let (mn, mx) = last.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let tail: Vec<f64> = series.iter().filter(|s| s.0 >= 0.9 * tau_f).map(|s| s.1).collect();
    let limit = median(tail).unwrap_or(f64::NAN);
    if limit.abs() > 1e-12 && (mx - mn) <= 0.01 * limit.abs() {
        return PBehavior::LimitValue(limit);
    }
    let env = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let level = median(series.iter().filter(|s| s.0 >= 0.9 * tau_f).map(|s| s.1.abs()).collect()).unwrap_or(f64::NAN);
    let mut depth = 0;
    let mut env_k = f64::NAN;
    for k in 1..=3 {
        let d = decade(k);
        if d.len() < 3 {
            break;
        }
        depth = k;
        env_k = env(&d);
    }
    if depth == 0 || !(env_k > 0.0) {
        return PBehavior::Undetermined;
    }
    let ratio = level / env_k;
    if ratio.powf(1.0 / depth as f64) > 2.0 {
        PBehavior::Unbounded
    } else if ratio < 0.5 {
        PBehavior::ToZero
    } else {
        PBehavior::Undetermined
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsSummary {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl From<&Params> for ParamsSummary {
    fn from(p: &Params) -> Self {
        Self { alpha: p.alpha(), beta: p.beta(), delta: p.delta(), gamma: p.gamma() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub params: ParamsSummary,
    pub regime_predicted: Regime,
    pub regime_observed: Option<Regime>,
    pub chart: ChartId,
    pub status: RunStatus,
    /// Median of `|ℰ|²` over the last 10% of chart time.
    pub ecc_sq_limit: Option<f64>,
    pub theta_diverged: bool,
    /// Angle gained over the last τ-decade is below `1e-4` rad.
    pub theta_converged: bool,
    pub delta_theta: f64,
    pub omega: OmegaVerdict,
    pub p_behavior: PBehavior,
    pub fits: BTreeMap<String, PowerFit>,
    pub ecc_vector_limit: Option<[f64; 2]>,
    /// `(c1, c2, c3, θ, t)` at the end of the chart run.
    pub final_chart_state: Option<[f64; 5]>,
    pub tau_final: Option<f64>,
    pub flags: Vec<String>,
}

impl OutcomeReport {
    pub fn is_determinate(&self) -> bool {
        self.regime_observed.is_some()
    }
}

pub const NEAR_CRITICAL_BAND: f64 = 0.05;
const THETA_DIVERGENCE: f64 = 40.0 * PI;
const THETA_RATE_FLOOR: f64 = 0.1;
const THETA_TAIL: f64 = 1e-4;

fn empty_report(params: &Params, chart: ChartId, status: RunStatus, flags: Vec<String>) -> OutcomeReport {
    OutcomeReport {
        params: params.into(),
        regime_predicted: predicted_regime(params),
        regime_observed: None,
        chart,
        status,
        ecc_sq_limit: None,
        theta_diverged: false,
        theta_converged: false,
        delta_theta: f64::NAN,
        omega: OmegaVerdict::Undetermined,
        p_behavior: PBehavior::Undetermined,
        fits: BTreeMap::new(),
        ecc_vector_limit: None,
        final_chart_state: None,
        tau_final: None,
        flags,
    }
}

/// Value of the sample closest to chart time `tau`.
fn value_near(samples: &[(f64, [f64; 5])], tau: f64, i: usize) -> f64 {
    let idx = samples.partition_point(|s| s.0 < tau).min(samples.len() - 1);
    samples[idx].1[i]
}

/// Runs both phases and extracts the asymptotic outcome.
pub fn simulate_outcome(params: &Params, ic: &ReducedState<f64>, lab: &LabConfig) -> Result<OutcomeReport> {
    let run = run_phases(params, ic, lab)?;
    Ok(analyze(params, ic, &run))
}

/// Outcome of an existing two-phase run.
pub fn analyze(params: &Params, ic: &ReducedState<f64>, run: &PhaseRun) -> OutcomeReport {
    let chart = run.chart;
    let mut flags = Vec::new();
    if params.gamma().abs() < NEAR_CRITICAL_BAND {
        flags.push("near-critical".to_string());
    }
    let status_flag = match &run.status {
        RunStatus::Completed => None,
        RunStatus::Escaped => Some("escape".to_string()),
        RunStatus::NoSwitch => Some("no-switch".to_string()),
        RunStatus::Failed(t) => Some(format!("terminated:{t}")),
    };
    flags.extend(status_flag);
    let Some(tr) = run.chart_run.as_ref().filter(|_| run.status == RunStatus::Completed) else {
        return empty_report(params, chart, run.status.clone(), flags);
    };
    let samples = &tr.samples;
    let (tau_f, y_f) = *samples.last().expect("chart run has samples");
    let mut report = empty_report(params, chart, run.status.clone(), flags);
    report.tau_final = Some(tau_f);
    report.final_chart_state = Some(y_f);
    if tau_f < 100.0 {
        report.flags.push("short-chart-run".into());
        return report;
    }

    let field = |y: &[f64; 5]| chart_field_eval(chart, params, y);
    let window10: Vec<&(f64, [f64; 5])> = samples.iter().filter(|s| s.0 >= 0.9 * tau_f).collect();
    let ecc_at = |y: &[f64; 5]| ecc_sq_in_chart(chart, &[y[0], y[1], y[2]]);
    report.ecc_sq_limit = median(window10.iter().map(|s| ecc_at(&s.1)).collect());

    // angle
    let delta_theta = y_f[3] - ic.theta;
    let tail_rate = median(window10.iter().map(|s| field(&s.1)[3]).collect()).unwrap_or(0.0);
    report.delta_theta = delta_theta;
    report.theta_diverged = delta_theta > THETA_DIVERGENCE && tail_rate > THETA_RATE_FLOOR;
    report.theta_converged = (y_f[3] - value_near(samples, tau_f / 10.0, 3)).abs() < THETA_TAIL;

    // collision time, from the analytic rate dt/dτ
    let rates: Vec<(f64, f64)> = samples.iter().filter(|s| s.0 > 0.0).map(|s| (s.0, field(&s.1)[4])).collect();
    report.omega = collision_verdict_from_rates(&rates, y_f[4]);

    // radial velocity
    let p_series: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.0 > 0.0)
        .filter_map(|s| reduced_from_chart(params, &ChartState::from_array(chart, &s.1)).ok().map(|r| (s.0, r.p)))
        .collect();
    report.p_behavior = classify_p(&p_series);
    if report.p_behavior == PBehavior::Unbounded {
        if let Some(&(_, p)) = p_series.last() {
            report.flags.push(if p < 0.0 { "p-negative" } else { "p-positive" }.into());
        }
    }

    // rate laws
    let series = |f: &dyn Fn(&[f64; 5]) -> f64| -> Vec<(f64, f64)> {
        samples.iter().filter(|s| s.0 > 0.0).map(|s| (s.0, f(&s.1))).collect()
    };
    let mut wanted: Vec<(&str, Vec<(f64, f64)>, bool)> = match chart {
        ChartId::GammaPosApos => vec![("q1", series(&|y| y[0]), false)],
        ChartId::GammaPosA0 => vec![("y", series(&|y| y[0]), false)],
        // (r1, v) rotates about a drifting center with period 2π in τ, so
        // the deviations are fitted on their envelope
        ChartId::GammaNeg => vec![
            ("x", series(&|y| y[2]), false),
            ("r1v_dev", series(&|y| (y[0] - 1.0).powi(2) + y[1] * y[1]), true),
            ("ecc_sq", series(&|y| ecc_sq_in_chart(chart, &[y[0], y[1], y[2]])), true),
        ],
        ChartId::Critical | ChartId::CriticalL2 => vec![],
    };
    wanted.push(("dt_dtau", rates, false));
    for (name, data, envelope) in wanted {
        let f = if envelope { fit_power_law_envelope(&data, 2.0 * PI) } else { fit_power_law(&data) };
        if let Ok(f) = f {
            report.fits.insert(name.to_string(), f);
        }
    }

    if params.gamma() > 0.0 {
        report.ecc_vector_limit = Some(chart_ecc_vector(&ChartState::from_array(chart, &y_f)));
    }
    report.regime_observed = observe_regime(params, &report);
    report
}

const ECC_TOL: f64 = 1e-3;

/// Regime read off a completed outcome, or `None` when the evidence is
/// inconclusive.
pub fn observe_regime(params: &Params, r: &OutcomeReport) -> Option<Regime> {
    let e = r.ecc_sq_limit?;
    match r.chart {
        ChartId::GammaNeg => {
            let decaying = r
                .fits
                .get("ecc_sq")
                .is_some_and(|f| f.exponent < -0.1 && f.r_squared > 0.9 && e < 0.1);
            let finite = matches!(r.omega, OmegaVerdict::Finite { .. });
            (r.theta_diverged && finite && (e < ECC_TOL || decaying)).then_some(Regime::Circularizing)
        }
        ChartId::GammaPosA0 | ChartId::GammaPosApos => {
            if (e - 1.0).abs() >= ECC_TOL {
                return None;
            }
            match r.omega {
                OmegaVerdict::Finite { .. } => Some(Regime::EccToOneFiniteTime),
                OmegaVerdict::Infinite => Some(Regime::EccToOneInfiniteTime),
                OmegaVerdict::Undetermined => None,
            }
        }
        ChartId::Critical | ChartId::CriticalL2 => {
            let y = r.final_chart_state?;
            let e_final = ecc_sq_in_chart(r.chart, &[y[0], y[1], y[2]]);
            if (e_final - e).abs() > ECC_TOL {
                return None;
            }
            if (e - 1.0).abs() < ECC_TOL {
                Some(Regime::CriticalSuperHalf)
            } else if e > ECC_TOL && r.theta_diverged && params.is_critical() {
                Some(Regime::CriticalSubHalf)
            } else {
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(a: f64, b: f64, d: f64) -> Params {
        DampingParams::new(a, b, d).unwrap()
    }

    #[test]
    fn predicted_examples() {
        assert_eq!(predicted_regime(&params(0.0, 1.0, 0.1)), Regime::Circularizing);
        assert_eq!(predicted_regime(&params(0.0, 1.0, 5.0)), Regime::Circularizing);
        assert_eq!(predicted_regime(&params(0.0, 4.0, 0.1)), Regime::EccToOneInfiniteTime);
        assert_eq!(predicted_regime(&params(1.0, 1.0, 0.2)), Regime::CriticalSubHalf);
        assert_eq!(predicted_regime(&params(1.0, 1.0, 0.5)), Regime::CriticalSuperHalf);
        assert_eq!(predicted_regime(&params(2.0, 2.0, 0.5)), Regime::EccToOneFiniteTime);
    }

    #[test]
    fn regime_names_round_trip() {
        for r in Regime::ALL {
            assert_eq!(r.name().parse::<Regime>().unwrap(), r);
        }
    }

    fn log_grid(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn synthetic_time_verdicts() {
        let s: Vec<_> = log_grid(200, 1.0, 1e4).into_iter().map(|t| (t, 10.0 - 1.0 / t)).collect();
        match collision_time_verdict(&s) {
            OmegaVerdict::Finite { estimate } => assert!((estimate - 10.0).abs() < 1e-3, "{estimate}"),
            v => panic!("{v:?}"),
        }
        let s: Vec<_> = log_grid(200, 1.0, 1e4).into_iter().map(|t| (t, t.powf(0.2))).collect();
        assert_eq!(collision_time_verdict(&s), OmegaVerdict::Infinite);
        let s: Vec<_> = log_grid(200, 1.0, 1e4).into_iter().map(|t| (t, t.ln())).collect();
        assert_eq!(collision_time_verdict(&s), OmegaVerdict::Undetermined);
    }

    #[test]
    fn exponential_rates_are_finite() {
        let rates: Vec<_> = (1..2000).map(|i| (i as f64, (-0.05 * i as f64).exp())).collect();
        match collision_verdict_from_rates(&rates, 3.0) {
            OmegaVerdict::Finite { estimate } => assert!((estimate - 3.0).abs() < 1e-6),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn p_classification() {
        let g = log_grid(400, 1.0, 1e4);
        let up: Vec<_> = g.iter().map(|&t| (t, -t.sqrt())).collect();
        assert_eq!(classify_p(&up), PBehavior::Unbounded);
        let down: Vec<_> = g.iter().map(|&t| (t, t.powf(-0.25))).collect();
        assert_eq!(classify_p(&down), PBehavior::ToZero);
        let lim: Vec<_> = g.iter().map(|&t| (t, -1.5 + 1.0 / t)).collect();
        match classify_p(&lim) {
            PBehavior::LimitValue(c) => assert!((c + 1.5).abs() < 1e-3),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn rejects_bad_ic() {
        let lab = LabConfig::default();
        let ic = ReducedState::new(1.0, 0.0, 0.0, 0.0, 0.0);
        assert!(simulate_outcome(&params(0.0, 1.0, 0.1), &ic, &lab).is_err());
    }
}
