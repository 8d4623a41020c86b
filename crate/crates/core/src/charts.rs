//! Desingularized blowup charts.
//!
//! Each chart is a weighted change of coordinates around the collision set
//! `r = l = 0` followed by a time rescaling `dt/dτ > 0`, chosen so that the
//! transformed field extends to the boundary with nondegenerate structure.
//! The chart fields are evaluated in the chart's own time `τ`; every chart
//! also co-integrates the physical angle `θ` and time `t` through the factors
//! `dθ/dτ` and `dt/dτ`, so a chart run can be mapped back to physical
//! quantities without reference to other charts.
//!
//! | chart            | coordinates        | regime            |
//! |------------------|--------------------|-------------------|
//! | `gamma-pos-a0`   | `(y, v1, mu1)`     | `γ > 0`, `α = 0`  |
//! | `gamma-pos`      | `(q1, v11, mu11)`  | `γ > 0`, `α > 0`  |
//! | `gamma-neg`      | `(r1, v, x)`       | `γ < 0`           |
//! | `critical`       | `(r1, v, rho1)`    | `γ = 0`           |
//! | `critical-l2`    | `(v1, mu1, rho2)`  | `γ = 0`           |

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{reduced_rhs, DampingParams, ReducedState};
use crate::scalar::{pow_nonneg, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChartId {
    #[serde(rename = "gamma-pos-a0")]
    GammaPosA0,
    #[serde(rename = "gamma-pos")]
    GammaPosApos,
    GammaNeg,
    Critical,
    CriticalL2,
}

impl ChartId {
    pub const ALL: [ChartId; 5] =
        [ChartId::GammaPosA0, ChartId::GammaPosApos, ChartId::GammaNeg, ChartId::Critical, ChartId::CriticalL2];

    /// Stable identifier used on the command line and in JSON.
    pub fn name(self) -> &'static str {
        match self {
            ChartId::GammaPosA0 => "gamma-pos-a0",
            ChartId::GammaPosApos => "gamma-pos",
            ChartId::GammaNeg => "gamma-neg",
            ChartId::Critical => "critical",
            ChartId::CriticalL2 => "critical-l2",
        }
    }

    pub fn coordinate_names(self) -> [&'static str; 3] {
        match self {
            ChartId::GammaPosA0 => ["y", "v1", "mu1"],
            ChartId::GammaPosApos => ["q1", "v11", "mu11"],
            ChartId::GammaNeg => ["r1", "v", "x"],
            ChartId::Critical => ["r1", "v", "rho1"],
            ChartId::CriticalL2 => ["v1", "mu1", "rho2"],
        }
    }

    /// Index of the radial-like coordinate (the one that tends to zero at collision).
    pub fn radial_index(self) -> usize {
        match self {
            ChartId::GammaPosA0 | ChartId::GammaPosApos => 0,
            ChartId::GammaNeg | ChartId::Critical | ChartId::CriticalL2 => 2,
        }
    }

    /// Components of the 5-vector `[c1, c2, c3, θ, t]` that are nonnegative
    /// on the chart domain (radial-like and mu-like coordinates).
    pub fn nonnegative_components(self) -> &'static [usize] {
        match self {
            ChartId::GammaPosA0 | ChartId::GammaPosApos => &[0, 2],
            ChartId::GammaNeg | ChartId::Critical => &[2],
            ChartId::CriticalL2 => &[1, 2],
        }
    }

    pub fn is_valid_for<T: Scalar>(self, params: &DampingParams<T>) -> bool {
        let g = params.gamma();
        match self {
            ChartId::GammaPosA0 => g > T::zero() && params.alpha() == T::zero(),
            ChartId::GammaPosApos => g > T::zero() && params.alpha() > T::zero(),
            ChartId::GammaNeg => g < T::zero(),
            ChartId::Critical | ChartId::CriticalL2 => g == T::zero(),
        }
    }

    fn require_valid<T: Scalar>(self, params: &DampingParams<T>) -> Result<()> {
        if self.is_valid_for(params) {
            Ok(())
        } else {
            Err(Error::ChartMismatch { chart: self.name(), gamma: params.gamma().to_f64_lossy() })
        }
    }
}

impl fmt::Display for ChartId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChartId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChartId::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::UnknownChart(s.to_string()))
    }
}

/// Regime chart: the one whose boundary carries the asymptotics of `params`.
pub fn select_chart<T: Scalar>(params: &DampingParams<T>) -> ChartId {
    let g = params.gamma();
    if g > T::zero() {
        if params.alpha() == T::zero() {
            ChartId::GammaPosA0
        } else {
            ChartId::GammaPosApos
        }
    } else if g < T::zero() {
        ChartId::GammaNeg
    } else {
        ChartId::Critical
    }
}

/// Point in a chart, with co-integrated physical angle and time. When
/// returned from [`chart_rhs`] the fields hold `d/dτ` of each component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartState<T> {
    pub chart: ChartId,
    pub c1: T,
    pub c2: T,
    pub c3: T,
    pub theta: T,
    pub t: T,
}

impl<T: Scalar> ChartState<T> {
    pub fn new(chart: ChartId, coords: [T; 3], theta: T, t: T) -> Self {
        Self { chart, c1: coords[0], c2: coords[1], c3: coords[2], theta, t }
    }

    pub fn coords(&self) -> [T; 3] {
        [self.c1, self.c2, self.c3]
    }

    pub fn to_array(&self) -> [T; 5] {
        [self.c1, self.c2, self.c3, self.theta, self.t]
    }

    pub fn from_array(chart: ChartId, a: &[T; 5]) -> Self {
        Self { chart, c1: a[0], c2: a[1], c3: a[2], theta: a[3], t: a[4] }
    }

    pub fn radial(&self) -> T {
        self.coords()[self.chart.radial_index()]
    }
}

/// `h = ½v² + (r1-1)²/(2 r1²)`, the energy of the `x = 0` slice of the
/// `gamma-neg` chart; `2h = |ℰ|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianValue<T> {
    pub h: T,
}

pub fn hamiltonian<T: Scalar>(r1: T, v: T) -> HamiltonianValue<T> {
    let q = (r1 - T::one()) / r1;
    HamiltonianValue { h: (v * v + q * q) / T::lit(2.0) }
}

fn two<T: Scalar>() -> T {
    T::lit(2.0)
}

fn half<T: Scalar>() -> T {
    T::lit(0.5)
}

/// Coordinates of a reduced state `(r, p, l)` in `chart`.
pub fn chart_from_reduced<T: Scalar>(chart: ChartId, params: &DampingParams<T>, s: &ReducedState<T>) -> Result<ChartState<T>> {
    chart.require_valid(params)?;
    if !(s.r > T::zero()) {
        return Err(Error::InvalidState(format!("chart transform needs r > 0, got {}", s.r)));
    }
    if !(s.l > T::zero()) {
        return Err(Error::InvalidState(format!("chart transform needs l > 0, got {}", s.l)));
    }
    let (r, p, l) = (s.r, s.p, s.l);
    let a = params.alpha();
    let b = params.beta();
    let g = params.gamma();
    let coords = match chart {
        ChartId::GammaPosA0 => {
            let sr = r.sqrt();
            [r.powf(g / two()), sr * p, l / sr]
        }
        ChartId::GammaPosApos => {
            let q1 = r.powf(g / (two::<T>() * (T::one() + a)));
            let v11 = p * q1.powf((T::lit(4.0) - two::<T>() * b) / g);
            let mu11 = l * q1.powf(-(T::one() + a + g) / g);
            [q1, v11, mu11]
        }
        ChartId::GammaNeg => [r / (l * l), p * l, l.powf(params.gamma_tilde())],
        ChartId::Critical => [r / (l * l), p * l, l],
        ChartId::CriticalL2 => {
            let sr = r.sqrt();
            [p * sr, l / sr, sr]
        }
    };
    Ok(ChartState::new(chart, coords, s.theta, s.t))
}

/// Reduced state `(r, p, l)` of a chart point; inverse of [`chart_from_reduced`].
pub fn reduced_from_chart<T: Scalar>(params: &DampingParams<T>, c: &ChartState<T>) -> Result<ReducedState<T>> {
    c.chart.require_valid(params)?;
    if !(c.radial() > T::zero()) {
        return Err(Error::InvalidState(format!(
            "radial coordinate {} must be positive, got {}",
            c.chart.coordinate_names()[c.chart.radial_index()],
            c.radial()
        )));
    }
    let a = params.alpha();
    let b = params.beta();
    let g = params.gamma();
    let (r, p, l) = match c.chart {
        ChartId::GammaPosA0 => {
            let (y, v1, mu1) = (c.c1, c.c2, c.c3);
            let s = y.powf(g.recip());
            (s * s, v1 / s, s * mu1)
        }
        ChartId::GammaPosApos => {
            let (q1, v11, mu11) = (c.c1, c.c2, c.c3);
            (
                q1.powf(two::<T>() * (T::one() + a) / g),
                q1.powf((two::<T>() * b - T::lit(4.0)) / g) * v11,
                q1.powf((T::one() + a + g) / g) * mu11,
            )
        }
        ChartId::GammaNeg => {
            let (r1, v, x) = (c.c1, c.c2, c.c3);
            let l = x.powf(params.gamma_tilde().recip());
            (l * l * r1, v / l, l)
        }
        ChartId::Critical => {
            let (r1, v, rho1) = (c.c1, c.c2, c.c3);
            (rho1 * rho1 * r1, v / rho1, rho1)
        }
        ChartId::CriticalL2 => {
            let (v1, mu1, rho2) = (c.c1, c.c2, c.c3);
            (rho2 * rho2, v1 / rho2, mu1 * rho2)
        }
    };
    Ok(ReducedState::new(r, p, l, c.theta, c.t))
}

/// Physical radius of a chart point without the full inverse transform.
pub fn chart_radius<T: Scalar>(params: &DampingParams<T>, chart: ChartId, y: &[T; 5]) -> T {
    match chart {
        ChartId::GammaPosA0 => pow_nonneg(y[0], two::<T>() / params.gamma()),
        ChartId::GammaPosApos => pow_nonneg(y[0], two::<T>() * (T::one() + params.alpha()) / params.gamma()),
        ChartId::GammaNeg => pow_nonneg(y[2], two::<T>() / params.gamma_tilde()) * y[0],
        ChartId::Critical => y[2] * y[2] * y[0],
        ChartId::CriticalL2 => y[2] * y[2],
    }
}

/// Chart field in chart time `τ` followed by `dθ/dτ` and `dt/dτ`.
///
/// Fields are defined on the boundary (radial coordinate 0). Evaluations with
/// a negative nonnegative-coordinate produce NaN in the auxiliary factors.
pub fn chart_field_eval<T: Scalar>(chart: ChartId, params: &DampingParams<T>, y: &[T; 5]) -> [T; 5] {
    let a = params.alpha();
    let b = params.beta();
    let d = params.delta();
    let g = params.gamma();
    let half_a = a / two();
    match chart {
        ChartId::GammaPosA0 => {
            let (y0, v1, mu1) = (y[0], y[1], y[2]);
            let drag = d * pow_nonneg(mu1 * mu1 + v1 * v1, half_a);
            [
                g / two::<T>() * y0 * y0 * v1,
                -y0 + mu1 * mu1 * y0 + half::<T>() * v1 * v1 * y0 - drag * v1,
                -(half::<T>() * y0 * v1 + drag) * mu1,
                mu1 * y0,
                pow_nonneg(y0, two::<T>() * b / g),
            ]
        }
        ChartId::GammaPosApos => {
            let (q1, v11, mu11) = (y[0], y[1], y[2]);
            let ap1 = a + T::one();
            let q2 = q1 * q1;
            let drag = d * pow_nonneg(mu11 * mu11 + v11 * v11, half_a);
            [
                g / (two::<T>() * ap1) * q2 * q1 * v11,
                -T::one() + q2 * (mu11 * mu11 + (two::<T>() - b) / ap1 * v11 * v11) - drag * v11,
                -((a + b - T::one()) / ap1 * q2 * v11 + drag) * mu11,
                mu11 * q2,
                pow_nonneg(q1, two::<T>() * (two::<T>() * a + b) / g),
            ]
        }
        ChartId::GammaNeg => {
            let (r1, v, x) = (y[0], y[1], y[2]);
            let w = pow_nonneg(r1, -a - b) * pow_nonneg(T::one() + r1 * r1 * v * v, half_a);
            let gt = params.gamma_tilde();
            [
                v + two::<T>() * d * x * w * r1,
                -(r1 - T::one()) / (r1 * r1 * r1) - two::<T>() * d * x * w * v,
                -gt * d * w * x * x,
                (r1 * r1).recip(),
                pow_nonneg(x, T::lit(3.0) / gt),
            ]
        }
        ChartId::Critical => {
            let (r1, v, rho1) = (y[0], y[1], y[2]);
            let w = pow_nonneg(r1, -a - b) * pow_nonneg(T::one() + r1 * r1 * v * v, half_a);
            [
                v + two::<T>() * d * w * r1,
                -(r1 - T::one()) / (r1 * r1 * r1) - two::<T>() * d * w * v,
                -d * w * rho1,
                (r1 * r1).recip(),
                rho1 * rho1 * rho1,
            ]
        }
        ChartId::CriticalL2 => {
            let (v1, mu1, rho2) = (y[0], y[1], y[2]);
            let drag = d * pow_nonneg(mu1 * mu1 + v1 * v1, half_a);
            [
                half::<T>() * v1 * v1 - T::one() + mu1 * mu1 - drag * v1,
                -(half::<T>() * v1 + drag) * mu1,
                half::<T>() * rho2 * v1,
                mu1,
                rho2 * rho2 * rho2,
            ]
        }
    }
}

/// Chart field at `c` (derivatives with respect to the chart's own time).
pub fn chart_rhs<T: Scalar>(params: &DampingParams<T>, c: &ChartState<T>) -> Result<ChartState<T>> {
    c.chart.require_valid(params)?;
    let d = chart_field_eval(c.chart, params, &c.to_array());
    Ok(ChartState::from_array(c.chart, &d))
}

/// `|ℰ|²` expressed in chart coordinates.
pub fn chart_ecc_sq<T: Scalar>(c: &ChartState<T>) -> T {
    ecc_sq_in_chart(c.chart, &c.coords())
}

pub(crate) fn ecc_sq_in_chart<T: Scalar>(chart: ChartId, x: &[T; 3]) -> T {
    match chart {
        ChartId::GammaPosA0 => {
            let (v1, mu1) = (x[1], x[2]);
            let m2 = mu1 * mu1;
            T::one() - two::<T>() * m2 * (T::one() - half::<T>() * (m2 + v1 * v1))
        }
        ChartId::GammaPosApos => {
            let (q1, v11, mu11) = (x[0], x[1], x[2]);
            let q2 = q1 * q1;
            T::one() - two::<T>() * q2 * mu11 * mu11 * (T::one() - half::<T>() * q2 * (mu11 * mu11 + v11 * v11))
        }
        ChartId::GammaNeg | ChartId::Critical => two::<T>() * hamiltonian(x[0], x[1]).h,
        ChartId::CriticalL2 => {
            let (v1, mu1) = (x[0], x[1]);
            let m2 = mu1 * mu1;
            let q = T::one() - m2;
            m2 * v1 * v1 + q * q
        }
    }
}

/// Eccentricity vector in the frame rotating with `u`: `(l²/r - 1, -l·p)`,
/// so that `ℰ = e^{iθ}·(A + iB)`. Evaluated in chart coordinates, hence
/// finite on the collision boundary.
pub fn chart_ecc_rotating<T: Scalar>(c: &ChartState<T>) -> [T; 2] {
    let (l2_over_r, lp) = match c.chart {
        ChartId::GammaPosA0 => (c.c3 * c.c3, c.c3 * c.c2),
        ChartId::GammaPosApos => {
            let q2 = c.c1 * c.c1;
            (q2 * c.c3 * c.c3, q2 * c.c3 * c.c2)
        }
        ChartId::GammaNeg | ChartId::Critical => (c.c1.recip(), c.c2),
        ChartId::CriticalL2 => (c.c2 * c.c2, c.c2 * c.c1),
    };
    [l2_over_r - T::one(), -lp]
}

/// Eccentricity vector `ℰ` in the inertial frame of the counterclockwise section.
pub fn chart_ecc_vector<T: Scalar>(c: &ChartState<T>) -> [T; 2] {
    let [a, b] = chart_ecc_rotating(c);
    let (sin, cos) = c.theta.sin_cos();
    [a * cos - b * sin, a * sin + b * cos]
}

/// Largest relative mismatch between the chart field pushed forward to
/// `(r, p, l, θ)` by central differences and `dt/dτ` times the reduced field.
pub fn pushforward_residual(p: &DampingParams<f64>, c: &ChartState<f64>) -> Result<f64> {
    let base = c.to_array();
    let field = chart_field_eval(c.chart, p, &base);
    let to_rpl = |y: &[f64; 5]| -> Result<[f64; 3]> {
        let s = reduced_from_chart(p, &ChartState::from_array(c.chart, y))?;
        Ok([s.r, s.p, s.l])
    };
    let mut push = [0.0; 3];
    for j in 0..3 {
        let h = 1e-6 * base[j].abs().max(1e-3);
        let (mut yp, mut ym) = (base, base);
        yp[j] += h;
        ym[j] -= h;
        let (fp, fm) = (to_rpl(&yp)?, to_rpl(&ym)?);
        for i in 0..3 {
            push[i] += (fp[i] - fm[i]) / (2.0 * h) * field[j];
        }
    }
    let s = reduced_from_chart(p, c)?;
    let red = reduced_rhs(p, &s);
    let dt = field[4];
    let expect = [red.r * dt, red.p * dt, red.l * dt, red.theta * dt];
    let got = [push[0], push[1], push[2], field[3]];
    let scale = expect.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    Ok(expect.iter().zip(got).map(|(e, g)| (e - g).abs() / scale).fold(0.0, f64::max))
}
