//! Equilibria of the chart fields, their linearizations and stability.
//!
//! Eigenvalues of the 2×2 and 3×3 Jacobians come from the characteristic
//! polynomial in closed form, which keeps reports exact for the structured
//! (block triangular) matrices that occur here.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::charts::{chart_field_eval, ChartId};
use crate::error::{Error, Result};
use crate::model::DampingParams;
use crate::scalar::{pow_nonneg, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    HyperbolicSink,
    SaddleType,
    ZeroHopf,
    /// Some eigenvalue has zero real part and the point is not a zero-Hopf
    /// point; stability is decided by nonlinear terms (center manifold).
    CenterDegenerate,
}

/// Eigenvalue serialized as `{re, im}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue<T> {
    pub re: T,
    pub im: T,
}

impl<T: Scalar> Eigenvalue<T> {
    pub fn real(re: T) -> Self {
        Self { re, im: T::zero() }
    }

    pub fn to_complex(self) -> Complex<T> {
        Complex::new(self.re, self.im)
    }

    pub fn dist(self, other: Self) -> T {
        (self.re - other.re).hypot(self.im - other.im)
    }
}

impl<T> From<Complex<T>> for Eigenvalue<T> {
    fn from(c: Complex<T>) -> Self {
        Self { re: c.re, im: c.im }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Extras<T> {
    pub det_j: Option<T>,
    pub trace: Option<T>,
    pub ecc_sq: Option<T>,
    pub decay_a: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport<T> {
    pub chart: ChartId,
    /// Chart coordinates; two entries for the planar critical systems.
    pub location: Vec<T>,
    pub eigenvalues: Vec<Eigenvalue<T>>,
    pub stability: Stability,
    pub exists: bool,
    /// Norm of the field at `location` (0 when the point does not exist).
    pub residual: T,
    pub extras: Extras<T>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
}

/// Central-difference Jacobian with steps `h_i = scale · max(1, |x_i|)`.
pub fn numeric_jacobian<T: Scalar, const N: usize>(
    field: impl Fn(&[T; N]) -> [T; N],
    point: &[T; N],
    scale: T,
) -> Result<[[T; N]; N]> {
    let mut jac = [[T::zero(); N]; N];
    for j in 0..N {
        let h = scale * point[j].abs().max(T::one());
        let (mut xp, mut xm) = (*point, *point);
        xp[j] = xp[j] + h;
        xm[j] = xm[j] - h;
        let (fp, fm) = (field(&xp), field(&xm));
        // use the realized step to cancel representation error of x ± h
        let step = xp[j] - xm[j];
        for i in 0..N {
            let d = (fp[i] - fm[i]) / step;
            if !d.is_finite() {
                return Err(Error::NonFinite(format!("jacobian entry ({i},{j})")));
            }
            jac[i][j] = d;
        }
    }
    Ok(jac)
}

/// Eigenvalues of a 2×2 or 3×3 real matrix, sorted by ascending real part;
/// on equal real parts conjugate pairs come first (positive imaginary part
/// leading), then real roots.
pub fn eigenvalues_small<T: Scalar, const N: usize>(m: &[[T; N]; N]) -> Result<Vec<Eigenvalue<T>>> {
    let mut eigs = match N {
        2 => {
            let tr = m[0][0] + m[1][1];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            quadratic_roots(-tr, det)
        }
        3 => {
            let tr = m[0][0] + m[1][1] + m[2][2];
            let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
                + m[1][1] * m[2][2]
                - m[1][2] * m[2][1];
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            cubic_roots(-tr, minors, -det)
        }
        n => return Err(Error::Dimension(n)),
    };
    sort_eigenvalues(&mut eigs);
    Ok(eigs)
}

fn sort_eigenvalues<T: Scalar>(eigs: &mut [Eigenvalue<T>]) {
    eigs.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.abs().partial_cmp(&a.im.abs()).unwrap_or(std::cmp::Ordering::Equal))
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Roots of `λ² + bλ + c`.
fn quadratic_roots<T: Scalar>(b: T, c: T) -> Vec<Eigenvalue<T>> {
    let two = T::lit(2.0);
    let disc = b * b - T::lit(4.0) * c;
    if disc >= T::zero() {
        let s = disc.sqrt();
        // avoid cancellation: q = -(b + sign(b)·s)/2
        let q = -(b + if b >= T::zero() { s } else { -s }) / two;
        let r1 = q;
        let r2 = if q != T::zero() { c / q } else { -b - q };
        vec![Eigenvalue::real(r1), Eigenvalue::real(r2)]
    } else {
        let re = -b / two;
        let im = (-disc).sqrt() / two;
        vec![Eigenvalue { re, im }, Eigenvalue { re, im: -im }]
    }
}

/// Roots of `λ³ + aλ² + bλ + c` (Cardano, trigonometric form for three real roots).
fn cubic_roots<T: Scalar>(a: T, b: T, c: T) -> Vec<Eigenvalue<T>> {
    let three = T::lit(3.0);
    let two = T::lit(2.0);
    let shift = a / three;
    let p = b - a * a / three;
    let q = two * a * a * a / T::lit(27.0) - a * b / three + c;
    let disc = (q / two).powi(2) + (p / three).powi(3);
    // coefficient rounding makes disc noisy near repeated roots; snap it
    let scale = (p.abs() / three).max((q.abs() / two).powf(two / three)).max(shift * shift);
    let noise = T::lit(64.0) * T::epsilon() * scale * scale * scale;

    let mut roots = if disc.abs() <= noise {
        if p.abs() <= T::lit(64.0) * T::epsilon() * scale {
            vec![Eigenvalue::real(-shift); 3]
        } else {
            let single = three * q / p;
            let double = -three * q / (two * p);
            vec![Eigenvalue::real(single - shift), Eigenvalue::real(double - shift), Eigenvalue::real(double - shift)]
        }
    } else if disc > T::zero() {
        let s = disc.sqrt();
        let u = (-q / two + s).cbrt();
        let v = (-q / two - s).cbrt();
        let re = -(u + v) / two - shift;
        let im = three.sqrt() / two * (u - v);
        vec![Eigenvalue::real(u + v - shift), Eigenvalue { re, im }, Eigenvalue { re, im: -im }]
    } else {
        let m = two * (-p / three).sqrt();
        let arg = (three * q / (p * m)).max(-T::one()).min(T::one());
        let phi = arg.acos() / three;
        let tau = two * T::PI() / three;
        (0..3)
            .map(|k| Eigenvalue::real(m * (phi - tau * T::lit(k as f64)).cos() - shift))
            .collect()
    };

    // one Newton step on simple real roots
    let poly = |x: T| ((x + a) * x + b) * x + c;
    let dpoly = |x: T| (three * x + two * a) * x + b;
    for r in roots.iter_mut().filter(|r| r.im == T::zero()) {
        let d = dpoly(r.re);
        if d.abs() > T::lit(1e-6) * scale.sqrt().max(T::one()) {
            let next = r.re - poly(r.re) / d;
            if next.is_finite() && poly(next).abs() <= poly(r.re).abs() {
                r.re = next;
            }
        }
    }
    roots
}

/// Stability from eigenvalues, with `tol` deciding "zero real part".
pub fn classify_stability<T: Scalar>(eigs: &[Eigenvalue<T>], tol: T) -> Stability {
    let central: Vec<_> = eigs.iter().filter(|e| e.re.abs() <= tol).collect();
    if central.is_empty() {
        if eigs.iter().all(|e| e.re < T::zero()) {
            Stability::HyperbolicSink
        } else {
            Stability::SaddleType
        }
    } else if eigs.len() == 3
        && central.len() == 3
        && central.iter().filter(|e| e.im.abs() > tol).count() == 2
        && central.iter().filter(|e| e.im.abs() <= tol).count() == 1
    {
        Stability::ZeroHopf
    } else {
        Stability::CenterDegenerate
    }
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |s, x| s + *x * *x).sqrt()
}

/// The equilibrium on the collision boundary for `γ > 0`: in `(q1, v11, mu11)`
/// at `(0, -δ^(-1/(1+α)), 0)` for `α > 0`, in `(y, v1, mu1)` at the origin
/// for `α = 0`.
pub fn gamma_pos_equilibrium<T: Scalar>(params: &DampingParams<T>) -> Result<EquilibriumReport<T>> {
    if !(params.gamma() > T::zero()) {
        return Err(Error::InvalidParams(format!("needs gamma > 0, got {}", params.gamma())));
    }
    let a = params.alpha();
    let d = params.delta();
    let (chart, location, eigenvalues) = if a == T::zero() {
        (
            ChartId::GammaPosA0,
            [T::zero(); 3],
            vec![Eigenvalue::real(-d), Eigenvalue::real(-d), Eigenvalue::real(T::zero())],
        )
    } else {
        let k = (T::one() + a).recip();
        let lam = d.powf(k);
        (
            ChartId::GammaPosApos,
            [T::zero(), -d.powf(-k), T::zero()],
            vec![
                Eigenvalue::real(-(T::one() + a) * lam),
                Eigenvalue::real(-lam),
                Eigenvalue::real(T::zero()),
            ],
        )
    };
    let f = chart_field_eval(chart, params, &[location[0], location[1], location[2], T::zero(), T::zero()]);
    Ok(EquilibriumReport {
        chart,
        location: location.to_vec(),
        eigenvalues,
        stability: Stability::CenterDegenerate,
        exists: true,
        residual: norm(&f[..3]),
        extras: Extras { ecc_sq: Some(T::one()), ..Extras::default() },
        note: Some("one zero eigenvalue along the radial direction; attracting on the center manifold".into()),
    })
}

/// `(r1, v, x) = (1, 0, 0)` for `γ < 0`, with eigenvalues `±i, 0` and the
/// normal-form decay exponent `a = -(α+β)/γ̃`.
pub fn zero_hopf_report<T: Scalar>(params: &DampingParams<T>) -> Result<EquilibriumReport<T>> {
    if !(params.gamma() < T::zero()) {
        return Err(Error::InvalidParams(format!("needs gamma < 0, got {}", params.gamma())));
    }
    let loc = [T::one(), T::zero(), T::zero()];
    let field = |y: &[T; 3]| {
        let f = chart_field_eval(ChartId::GammaNeg, params, &[y[0], y[1], y[2], T::zero(), T::zero()]);
        [f[0], f[1], f[2]]
    };
    let residual = norm(&field(&loc));
    let jac = numeric_jacobian(field, &loc, T::lit(1e-6))?;
    let eigenvalues = eigenvalues_small(&jac)?;
    let stability = classify_stability(&eigenvalues, T::lit(1e-6));
    Ok(EquilibriumReport {
        chart: ChartId::GammaNeg,
        location: loc.to_vec(),
        eigenvalues,
        stability,
        exists: true,
        residual,
        extras: Extras {
            decay_a: Some(-(params.alpha() + params.beta()) / params.gamma_tilde()),
            ecc_sq: Some(T::zero()),
            ..Extras::default()
        },
        note: None,
    })
}

fn require_critical<T: Scalar>(params: &DampingParams<T>) -> Result<()> {
    if params.is_critical() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("needs gamma = 0, got {}", params.gamma())))
    }
}

/// The planar `(r1, v)` field of the critical chart (its `rho1` decouples).
pub fn critical_planar_field<T: Scalar>(params: &DampingParams<T>, y: &[T; 2]) -> [T; 2] {
    let f = chart_field_eval(ChartId::Critical, params, &[y[0], y[1], T::one(), T::zero(), T::zero()]);
    [f[0], f[1]]
}

/// Analytic Jacobian of [`critical_planar_field`].
pub fn critical_planar_jacobian<T: Scalar>(params: &DampingParams<T>, y: &[T; 2]) -> [[T; 2]; 2] {
    let [r1, v] = *y;
    let a = params.alpha();
    let ab = a + params.beta();
    let two = T::lit(2.0);
    let s = T::one() + r1 * r1 * v * v;
    let g = pow_nonneg(s, a / two);
    let g_pow = a * pow_nonneg(s, a / two - T::one());
    let g_r = g_pow * r1 * v * v;
    let g_v = g_pow * r1 * r1 * v;
    let c = two * params.delta();
    let rp = pow_nonneg(r1, -ab);
    let f = c * rp * g;
    let f_r = c * (-ab * rp / r1 * g + rp * g_r);
    let f_v = c * rp * g_v;
    [
        [f + r1 * f_r, T::one() + r1 * f_v],
        [-(T::lit(3.0) - two * r1) / r1.powi(4) - v * f_r, -f - v * f_v],
    ]
}

/// Interior equilibrium `(r1, v) = (1/(1-4δ²), -2δ√(1-4δ²))` of the critical
/// planar system; exists iff `δ < ½`.
pub fn critical_interior_equilibrium<T: Scalar>(params: &DampingParams<T>) -> Result<EquilibriumReport<T>> {
    require_critical(params)?;
    let d = params.delta();
    let two = T::lit(2.0);
    let disc = T::one() - T::lit(4.0) * d * d;
    if !(d < T::lit(0.5)) {
        return Ok(EquilibriumReport {
            chart: ChartId::Critical,
            location: vec![],
            eigenvalues: vec![],
            stability: Stability::CenterDegenerate,
            exists: false,
            residual: T::zero(),
            extras: Extras::default(),
            note: Some("no equilibrium with r1 > 0 for delta >= 1/2".into()),
        });
    }
    let loc = [disc.recip(), -two * d * disc.sqrt()];
    let jac = critical_planar_jacobian(params, &loc);
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let trace = jac[0][0] + jac[1][1];
    let eigenvalues = eigenvalues_small(&jac)?;
    let stability = classify_stability(&eigenvalues, T::lit(1e-12));
    let q = (loc[0] - T::one()) / loc[0];
    Ok(EquilibriumReport {
        chart: ChartId::Critical,
        location: loc.to_vec(),
        eigenvalues,
        stability,
        exists: true,
        residual: norm(&critical_planar_field(params, &loc)),
        extras: Extras { det_j: Some(det), trace: Some(trace), ecc_sq: Some(loc[1] * loc[1] + q * q), decay_a: None },
        note: None,
    })
}

/// Closed form `(2δ+1)⁴(1-2δ)⁴` of the Jacobian determinant at the interior equilibrium.
pub fn critical_det_closed_form<T: Scalar>(delta: T) -> T {
    let two = T::lit(2.0);
    ((two * delta + T::one()) * (T::one() - two * delta)).powi(4)
}

/// Planar `(v1, mu1)` part of the `critical-l2` field.
pub fn critical_l2_planar_field<T: Scalar>(params: &DampingParams<T>, y: &[T; 2]) -> [T; 2] {
    let f = chart_field_eval(ChartId::CriticalL2, params, &[y[0], y[1], T::zero(), T::zero(), T::zero()]);
    [f[0], f[1]]
}

/// `v1* < 0` solving `½v² = 1 + δ|v|^α v`.
pub fn boundary_root<T: Scalar>(params: &DampingParams<T>) -> Result<T> {
    let a = params.alpha();
    let d = params.delta();
    let f = |v: T| v * v / T::lit(2.0) - T::one() - d * pow_nonneg(v.abs(), a) * v;
    let mut lo = T::lit(-2.0);
    let mut hi = T::lit(-1e-9);
    let mut tries = 0;
    while f(lo) <= T::zero() {
        lo = lo * T::lit(2.0);
        tries += 1;
        if tries > 200 || !lo.is_finite() {
            return Err(Error::Equilibrium("no sign change for the boundary root".into()));
        }
    }
    if f(hi) >= T::zero() {
        return Err(Error::Equilibrium("no sign change for the boundary root".into()));
    }
    // f(lo) > 0 > f(hi)
    for _ in 0..400 {
        let mid = (lo + hi) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut v = (lo + hi) / T::lit(2.0);
    // Newton polish; f' = v - δ(α+1)|v|^α
    for _ in 0..3 {
        let df = v - d * (a + T::one()) * pow_nonneg(v.abs(), a);
        let next = v - f(v) / df;
        if next.is_finite() && f(next).abs() <= f(v).abs() {
            v = next;
        }
    }
    Ok(v)
}

/// Boundary equilibrium `(v1, mu1) = (v1*, 0)` of the `critical-l2` chart.
/// Attracting for `δ > ½`, degenerate at `δ = ½`, saddle for `δ < ½`.
pub fn critical_boundary_equilibrium<T: Scalar>(params: &DampingParams<T>) -> Result<EquilibriumReport<T>> {
    require_critical(params)?;
    let v = boundary_root(params)?;
    let a = params.alpha();
    let d = params.delta();
    let lam_v = v - d * (a + T::one()) * pow_nonneg(v.abs(), a);
    let lam_mu = (v * v - T::one()) / v.abs();
    let mut eigenvalues = vec![Eigenvalue::real(lam_v), Eigenvalue::real(lam_mu)];
    sort_eigenvalues(&mut eigenvalues);
    let half = T::lit(0.5);
    let stability = if d > half {
        Stability::HyperbolicSink
    } else if d == half {
        Stability::CenterDegenerate
    } else {
        Stability::SaddleType
    };
    let loc = [v, T::zero()];
    Ok(EquilibriumReport {
        chart: ChartId::CriticalL2,
        location: loc.to_vec(),
        eigenvalues,
        stability,
        exists: true,
        residual: norm(&critical_l2_planar_field(params, &loc)),
        extras: Extras { ecc_sq: Some(T::one()), ..Extras::default() },
        note: (d == half).then(|| "mu1 eigenvalue vanishes; attracting by a center-manifold argument".into()),
    })
}

/// Every equilibrium relevant for `params`.
pub fn equilibria_for<T: Scalar>(params: &DampingParams<T>) -> Result<Vec<EquilibriumReport<T>>> {
    let g = params.gamma();
    if g > T::zero() {
        Ok(vec![gamma_pos_equilibrium(params)?])
    } else if g < T::zero() {
        Ok(vec![zero_hopf_report(params)?])
    } else {
        Ok(vec![critical_interior_equilibrium(params)?, critical_boundary_equilibrium(params)?])
    }
}
