//! Spin vectors of the extended Landau-Lifschitz equation built from ECH
//! fields or from Hirota fields through a gauge transformation, the real
//! split s = m + il, residuals of the complex and split equations, and
//! fixed-x trajectories with a qualitative classifier.

use std::ops::{Add, Mul, Sub};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heisenberg::{ech_solution, EchFieldPoint};
use crate::hirota::ComplexField;
use crate::numerics::{pauli, Complex, Mat2, StencilSpec, I};
use crate::residual::{evaluate_grid, point_derivatives, relative, GridSpec, ResidualReport};
use crate::spectral::SolitonConfig;

/// A denominator is treated as vanishing below this fraction of the moduli
/// of its terms.
pub const DENOMINATOR_THRESHOLD: f64 = 1e-12;

pub fn cross<T: Copy + Mul<Output = T> + Sub<Output = T>>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Unconjugated bilinear dot product Σ aᵢbᵢ.
pub fn dot<T: Copy + Mul<Output = T> + Add<Output = T>>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn scale<T: Copy + Mul<Output = T>>(k: T, a: [T; 3]) -> [T; 3] {
    [k * a[0], k * a[1], k * a[2]]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

/// A complex spin vector s = (s₁, s₂, s₃) with S = s·σ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpinPoint {
    #[serde(with = "crate::numerics::complex_serde::array3")]
    pub s: [Complex; 3],
}

impl SpinPoint {
    pub fn new(s1: Complex, s2: Complex, s3: Complex) -> Self {
        SpinPoint { s: [s1, s2, s3] }
    }

    /// |s·s − 1| with the unconjugated product.
    pub fn unit_defect(&self) -> f64 {
        (dot(self.s, self.s) - 1.0).norm()
    }

    /// m = Re s, l = Im s.
    pub fn split(&self) -> RealSpinSplit {
        RealSpinSplit { m: self.s.map(|z| z.re), l: self.s.map(|z| z.im) }
    }

    /// Largest |Im sᵢ|.
    pub fn max_imaginary(&self) -> f64 {
        self.s.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// S = [[s₃, s₁ − is₂], [s₁ + is₂, −s₃]].
    pub fn s_matrix(&self) -> Mat2 {
        let [s1, s2, s3] = self.s;
        Mat2::new(s3, s1 - I * s2, s1 + I * s2, -s3)
    }

    fn is_finite(&self) -> bool {
        self.s.iter().all(|z| z.is_finite())
    }
}

/// Real and imaginary parts of a complex spin, s = m + il.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealSpinSplit {
    pub m: [f64; 3],
    pub l: [f64; 3],
}

impl RealSpinSplit {
    /// |m·m − l·l − 1|.
    pub fn norm_defect(&self) -> f64 {
        (dot(self.m, self.m) - dot(self.l, self.l) - 1.0).abs()
    }

    /// |m·l|.
    pub fn orthogonality_defect(&self) -> f64 {
        dot(self.m, self.l).abs()
    }

    /// (m₁, m₂, m₃, l₁, l₂, l₃).
    pub fn as_array(&self) -> [f64; 6] {
        [self.m[0], self.m[1], self.m[2], self.l[0], self.l[1], self.l[2]]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        RealSpinSplit { m: [a[0], a[1], a[2]], l: [a[3], a[4], a[5]] }
    }
}

/// s₁ = (u+v)/2, s₂ = i(u−v)/2, s₃ = −ω.
pub fn spin_from_ech(p: &EchFieldPoint) -> SpinPoint {
    SpinPoint::new((p.u + p.v) / 2.0, I * (p.u - p.v) / 2.0, -p.omega())
}

/// The split evaluated through the expansions in u, v, ω at ±x:
/// m₁ = ¼[u + v + κṽ + κ⁻¹ũ], m₂ = (i/4)[u − v − κṽ + κ⁻¹ũ], m₃ = −½[ω + ω̃],
/// l₁ = (i/4)[−u − v + κṽ + κ⁻¹ũ], l₂ = ¼[u − v + κṽ − κ⁻¹ũ], l₃ = (i/2)[ω − ω̃],
/// with a tilde marking evaluation at (−x,t).
pub fn split_ml(cfg: &SolitonConfig, x: f64, t: f64) -> Result<RealSpinSplit> {
    let p = ech_solution(cfg, x, t)?;
    let q = ech_solution(cfg, -x, t)?;
    Ok(split_from_parity_pair(&p, &q, cfg.kappa))
}

/// The (m, l) expansion from the fields at (x,t) and (−x,t).
pub fn split_from_parity_pair(p: &EchFieldPoint, tilde: &EchFieldPoint, kappa: f64) -> RealSpinSplit {
    let (u, v, w) = (p.u, p.v, p.omega());
    let (ut, vt, wt) = (tilde.u, tilde.v, tilde.omega());
    let (k, ki) = (kappa, kappa.recip());
    let m = [
        (u + v + vt * k + ut * ki) / 4.0,
        I * (u - v - vt * k + ut * ki) / 4.0,
        -(w + wt) / 2.0,
    ];
    let l = [
        I * (-u - v + vt * k + ut * ki) / 4.0,
        (u - v + vt * k - ut * ki) / 4.0,
        I * (w - wt) / 2.0,
    ];
    RealSpinSplit { m: m.map(|z| z.re), l: l.map(|z| z.re) }
}

/// Largest imaginary part left in the (m, l) expansion; vanishes when the
/// nonlocality relations hold.
pub fn split_reality_defect(p: &EchFieldPoint, tilde: &EchFieldPoint, kappa: f64) -> f64 {
    let (u, v, w) = (p.u, p.v, p.omega());
    let (ut, vt, wt) = (tilde.u, tilde.v, tilde.omega());
    let (k, ki) = (kappa, kappa.recip());
    [
        (u + v + vt * k + ut * ki) / 4.0,
        I * (u - v - vt * k + ut * ki) / 4.0,
        -(w + wt) / 2.0,
        I * (-u - v + vt * k + ut * ki) / 4.0,
        (u - v + vt * k - ut * ki) / 4.0,
        I * (w - wt) / 2.0,
    ]
    .iter()
    .map(|z| z.im.abs())
    .fold(0.0, f64::max)
}

fn checked_denominator(den: Complex, terms: &[f64], x: f64, t: f64) -> Result<Complex> {
    let bound: f64 = terms.iter().sum();
    if !(den.norm() > DENOMINATOR_THRESHOLD * bound) || !den.is_finite() {
        return Err(Error::Singular { x, t, level: None });
    }
    Ok(den)
}

fn finite(s: SpinPoint, x: f64, t: f64) -> Result<SpinPoint> {
    if s.is_finite() {
        Ok(s)
    } else {
        Err(Error::Singular { x, t, level: None })
    }
}

fn sample<Q: ComplexField + ?Sized>(q: &Q, x: f64, t: f64) -> Result<(Complex, Complex)> {
    match (q.value(x, t), q.dx(x, t)) {
        (Some(v), Some(d)) if v.is_finite() && d.is_finite() => Ok((v, d)),
        _ => Err(Error::Singular { x, t, level: None }),
    }
}

/// Local route: s₁ = 1 + 2κ|q|⁴/(qₓqₓ* − κ|q|⁴),
/// s₂ = |q|²(qₓ − κqₓ*)/(qₓqₓ* − κ|q|⁴), s₃ = i|q|²(qₓ + κqₓ*)/(qₓqₓ* − κ|q|⁴).
///
/// This is a cyclic relabelling (s₃, s₁, s₂) of the decomposition of
/// G⁻¹σ₃G for G = [[(ln q*)ₓ, q], [κq*, (ln q)ₓ]].
pub fn spin_from_hirota_local<Q: ComplexField + ?Sized>(q: &Q, kappa: f64, x: f64, t: f64) -> Result<SpinPoint> {
    let (v, vx) = sample(q, x, t)?;
    let q2 = v.norm_sqr();
    let q4 = q2 * q2;
    let xx = vx.norm_sqr();
    let den = checked_denominator(Complex::from(xx - kappa * q4), &[xx, q4], x, t)?;
    let s1 = 1.0 + 2.0 * kappa * q4 / den;
    let s2 = q2 * (vx - kappa * vx.conj()) / den;
    let s3 = I * q2 * (vx + kappa * vx.conj()) / den;
    finite(SpinPoint::new(s1, s2, s3), x, t)
}

/// Decomposes S = G⁻¹σ₃G as s₁ = (S₁₂+S₂₁)/2, s₂ = i(S₁₂−S₂₁)/2, s₃ = S₁₁.
pub fn spin_from_gauge(g: &Mat2) -> Result<SpinPoint> {
    let inv = g.inverse()?;
    let s = inv * pauli(3) * *g;
    let (s12, s21) = (s.m[0][1], s.m[1][0]);
    Ok(SpinPoint::new((s12 + s21) / 2.0, I * (s12 - s21) / 2.0, s.m[0][0]))
}

/// G = [[(ln q*)ₓ, q], [κq*, (ln q)ₓ]], up to the constant factor c.
pub fn local_gauge<Q: ComplexField + ?Sized>(q: &Q, kappa: f64, x: f64, t: f64) -> Result<Mat2> {
    let (v, vx) = sample(q, x, t)?;
    Ok(Mat2::new(vx.conj() / v.conj(), v, v.conj() * kappa, vx / v))
}

/// G = [[(ln q̃*)ₓ, q], [κq̃*, (ln q)ₓ]], up to the constant factor c, with
/// q̃ = q(−x,t). Satisfies Gₓ = A₀G for r = κq̃* when the constraint
/// (ln q̃*)ₓₓ = κqq̃* holds.
pub fn nonlocal_gauge<Q: ComplexField + ?Sized>(q: &Q, kappa: f64, x: f64, t: f64) -> Result<Mat2> {
    let (v, vx) = sample(q, x, t)?;
    let (p, px) = parity_partner(q, x, t)?;
    Ok(Mat2::new(px / p, v, p * kappa, vx / v))
}

/// (q̃*, ∂ₓq̃*) with q̃* = q*(−x,t) and ∂ₓq̃* = −qₓ*(−x,t).
fn parity_partner<Q: ComplexField + ?Sized>(q: &Q, x: f64, t: f64) -> Result<(Complex, Complex)> {
    let (v, vx) = sample(q, -x, t)?;
    Ok((v.conj(), -vx.conj()))
}

/// Nonlocal route, the decomposition of G⁻¹σ₃G for [`nonlocal_gauge`]: with
/// P = q̃* and Den = Pₓqₓ − κq²P²,
/// s₁ = qP(qₓ − κPₓ)/Den, s₂ = iqP(qₓ + κPₓ)/Den, s₃ = (Pₓqₓ + κq²P²)/Den.
pub fn spin_from_hirota_nonlocal<Q: ComplexField + ?Sized>(q: &Q, kappa: f64, x: f64, t: f64) -> Result<SpinPoint> {
    let (v, vx) = sample(q, x, t)?;
    let (p, px) = parity_partner(q, x, t)?;
    let a = px * vx;
    let b = v * v * p * p * kappa;
    let den = checked_denominator(a - b, &[a.norm(), b.norm()], x, t)?;
    let qp = v * p;
    let s1 = qp * (vx - px * kappa) / den;
    let s2 = I * qp * (vx + px * kappa) / den;
    let s3 = (a + b) / den;
    finite(SpinPoint::new(s1, s2, s3), x, t)
}

/// The nonlocal components in the printed form
/// s₁ = (q²q̃ₓ* − q̃*²qₓ)/(q̃*²q² − q̃ₓ*qₓ), s₂ = i(q²q̃ₓ* + q̃*²qₓ)/(…),
/// s₃ = −(q²q̃*² + qₓq̃ₓ*)/(…). Kept for comparison: it is unit length but
/// does not solve the extended equation for the κ = −1 soliton.
pub fn nonlocal_spin_as_printed<Q: ComplexField + ?Sized>(q: &Q, x: f64, t: f64) -> Result<SpinPoint> {
    let (v, vx) = sample(q, x, t)?;
    let (p, px) = parity_partner(q, x, t)?;
    let a = p * p * v * v;
    let b = px * vx;
    let den = checked_denominator(a - b, &[a.norm(), b.norm()], x, t)?;
    let s1 = (v * v * px - p * p * vx) / den;
    let s2 = I * (v * v * px + p * p * vx) / den;
    let s3 = -(a + b) / den;
    finite(SpinPoint::new(s1, s2, s3), x, t)
}

/// Relative residual of sₜ = −α s×sₓₓ − (3/2)β(sₓ·sₓ)sₓ + β s×(s×sₓₓₓ),
/// normalized by the sum of the vector norms of the terms.
pub fn elle_residual(
    sampler: impl Fn(f64, f64) -> Option<SpinPoint> + Sync,
    alpha: f64,
    beta: Complex,
    grid: &GridSpec,
    stencil: &StencilSpec,
) -> ResidualReport {
    let f = |x: f64, t: f64| sampler(x, t).map(|p| p.s);
    ResidualReport::evaluate("ELL", grid, Some(*stencil), |x, t| {
        let d = point_derivatives(&f, x, t, stencil)?;
        let j = d.x;
        let a = Complex::from(alpha);
        let terms = [
            d.dt,
            scale(a, cross(j.value, j.d2)),
            scale(beta * 1.5 * dot(j.d1, j.d1), j.d1),
            scale(-beta, cross(j.value, cross(j.value, j.d3))),
        ];
        Some(vector_relative(&terms, |z: Complex| z.norm()))
    })
}

/// |Σ terms| / Σ|termₖ| with Euclidean vector norms; a component that is
/// identically zero cannot inflate the ratio.
fn vector_relative<T: Copy + Add<Output = T>>(terms: &[[T; 3]], abs: impl Fn(T) -> f64) -> f64 {
    let norm = |v: [T; 3]| v.iter().map(|&z| abs(z).powi(2)).sum::<f64>().sqrt();
    let sum = terms[1..].iter().fold(terms[0], |acc, v| [acc[0] + v[0], acc[1] + v[1], acc[2] + v[2]]);
    relative(norm(sum), terms.iter().map(|&v| norm(v)))
}

/// Which version of the m-equation to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NelleForm {
    /// The real part of the complex equation, with
    /// (3/2)δ[(mₓ·mₓ)lₓ + 2(lₓ·mₓ)mₓ − (lₓ·lₓ)lₓ].
    #[default]
    Derived,
    /// The first bracket term written as (mₓ·mₓ)mₓ.
    AsPrinted,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NelleResidual {
    pub m_equation: ResidualReport,
    pub l_equation: ResidualReport,
}

/// Relative residuals of the coupled real equations for m and l obtained
/// from the extended Landau-Lifschitz equation with β = iδ.
pub fn nelle_residual(
    sampler: impl Fn(f64, f64) -> Option<RealSpinSplit> + Sync,
    alpha: f64,
    delta: f64,
    form: NelleForm,
    grid: &GridSpec,
    stencil: &StencilSpec,
) -> NelleResidual {
    let f = |x: f64, t: f64| sampler(x, t).map(|p| p.as_array());
    let samples = evaluate_grid(grid, |x, t| {
        let d = point_derivatives(&f, x, t, stencil)?;
        let j = d.x;
        let part = |a: [f64; 6], hi: bool| -> [f64; 3] {
            if hi {
                [a[3], a[4], a[5]]
            } else {
                [a[0], a[1], a[2]]
            }
        };
        let (m, l) = (part(j.value, false), part(j.value, true));
        let (mx, lx) = (part(j.d1, false), part(j.d1, true));
        let (mxx, lxx) = (part(j.d2, false), part(j.d2, true));
        let (mxxx, lxxx) = (part(j.d3, false), part(j.d3, true));
        let (mt, lt) = (part(d.dt, false), part(d.dt, true));
        let (a, dl) = (alpha, delta);
        let first = match form {
            NelleForm::Derived => lx,
            NelleForm::AsPrinted => mx,
        };
        let neg = |v: [f64; 3]| scale(-1.0, v);
        let m_terms = [
            neg(mt),
            scale(a, cross(l, lxx)),
            scale(-a, cross(m, mxx)),
            scale(1.5 * dl * dot(mx, mx), first),
            scale(3.0 * dl * dot(lx, mx), mx),
            scale(-1.5 * dl * dot(lx, lx), lx),
            scale(dl, cross(l, cross(l, lxxx))),
            scale(-dl, cross(m, cross(l, mxxx))),
            scale(-dl, cross(m, cross(m, lxxx))),
            scale(-dl, cross(l, cross(m, mxxx))),
        ];
        let l_terms = [
            neg(lt),
            scale(-a, cross(l, mxx)),
            scale(-a, cross(m, lxx)),
            scale(1.5 * dl * dot(lx, lx), mx),
            scale(3.0 * dl * dot(lx, mx), lx),
            scale(-1.5 * dl * dot(mx, mx), mx),
            scale(dl, cross(m, cross(m, mxxx))),
            scale(-dl, cross(l, cross(m, lxxx))),
            scale(-dl, cross(l, cross(l, mxxx))),
            scale(-dl, cross(m, cross(l, lxxx))),
        ];
        Some((vector_relative(&m_terms, f64::abs), vector_relative(&l_terms, f64::abs)))
    });
    let a: Vec<Option<f64>> = samples.iter().map(|s| s.map(|v| v.0)).collect();
    let b: Vec<Option<f64>> = samples.iter().map(|s| s.map(|v| v.1)).collect();
    let tag = match form {
        NelleForm::Derived => "",
        NelleForm::AsPrinted => " (as printed)",
    };
    NelleResidual {
        m_equation: ResidualReport::from_samples(format!("NELL1{tag}"), grid, Some(*stencil), &a),
        l_equation: ResidualReport::from_samples(format!("NELL2{tag}"), grid, Some(*stencil), &b),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub m: [f64; 3],
    pub l: [f64; 3],
    pub singular: bool,
}

impl TrajectoryPoint {
    fn coords(&self) -> [f64; 6] {
        RealSpinSplit { m: self.m, l: self.l }.as_array()
    }

    /// max(|m|, |l|).
    pub fn magnitude(&self) -> f64 {
        norm3(self.m).max(norm3(self.l))
    }
}

/// A spin sampled along the line x = x₀.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub x0: f64,
    pub points: Vec<TrajectoryPoint>,
}

/// Samples `samples` uniformly spaced times in [t₀, t₁] at x = x₀. Singular
/// samples are kept and flagged with NaN components.
pub fn trajectory(
    sampler: impl Fn(f64, f64) -> Option<SpinPoint> + Sync,
    x0: f64,
    t_range: (f64, f64),
    samples: usize,
) -> Trajectory {
    let (t0, t1) = t_range;
    let ts: Vec<f64> = match samples {
        0 => Vec::new(),
        1 => vec![t0],
        n => (0..n).map(|k| t0 + (t1 - t0) * k as f64 / (n - 1) as f64).collect(),
    };
    let points = ts
        .into_par_iter()
        .map(|t| match sampler(x0, t) {
            Some(s) if s.is_finite() => {
                let RealSpinSplit { m, l } = s.split();
                TrajectoryPoint { t, m, l, singular: false }
            }
            _ => TrajectoryPoint { t, m: [f64::NAN; 3], l: [f64::NAN; 3], singular: true },
        })
        .collect();
    Trajectory { x0, points }
}

/// Thresholds of [`classify_trajectory`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierSettings {
    /// A return to within this distance of the starting point counts as recurrence.
    pub recurrence_tolerance: f64,
    /// Terminal speed below which the curve counts as settled.
    pub speed_tolerance: f64,
    /// Growth of max(|m|,|l|) over its starting value that counts as unbounded.
    pub growth_factor: f64,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings { recurrence_tolerance: 1e-3, speed_tolerance: 1e-4, growth_factor: 10.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum TrajectoryClass {
    /// Returns to the starting point; `distance` is the closest return.
    Recurrent { return_time: f64, distance: f64 },
    DecayingToFixedPoint { terminal_speed: f64 },
    Bounded { max_magnitude: f64 },
    Unbounded { max_magnitude: f64, start_magnitude: f64 },
    /// Too few regular samples to judge.
    Undetermined,
}

impl TrajectoryClass {
    pub fn name(&self) -> &'static str {
        match self {
            TrajectoryClass::Recurrent { .. } => "recurrent",
            TrajectoryClass::DecayingToFixedPoint { .. } => "decaying_to_fixed_point",
            TrajectoryClass::Bounded { .. } => "bounded",
            TrajectoryClass::Unbounded { .. } => "unbounded",
            TrajectoryClass::Undetermined => "undetermined",
        }
    }
}

fn distance2(a: [f64; 6], b: [f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Closest return to the starting point after the curve has left its
/// neighbourhood, as (time, distance). Around each discrete minimum of the
/// distance the curve is replaced by the parabola through three samples and
/// the distance minimized on it.
pub fn closest_return(traj: &Trajectory, departure: f64) -> Option<(f64, f64)> {
    let pts: Vec<&TrajectoryPoint> = traj.points.iter().filter(|p| !p.singular).collect();
    let start = pts.first()?.coords();
    let d2: Vec<f64> = pts.iter().map(|p| distance2(p.coords(), start)).collect();
    let left = d2.iter().position(|&d| d > departure * departure)?;
    let mut best: Option<(f64, f64)> = None;
    for k in left.max(1)..d2.len().saturating_sub(1) {
        if !(d2[k] <= d2[k - 1] && d2[k] <= d2[k + 1]) {
            continue;
        }
        let (a, b, c) = (pts[k - 1].coords(), pts[k].coords(), pts[k + 1].coords());
        // P(σ) = b + σ(c − a)/2 + σ²(a − 2b + c)/2 on σ ∈ [−1, 1]
        let at = |sg: f64| -> f64 {
            let p: [f64; 6] = std::array::from_fn(|i| b[i] + sg * (c[i] - a[i]) / 2.0 + sg * sg * (a[i] - 2.0 * b[i] + c[i]) / 2.0);
            distance2(p, start)
        };
        let sg = golden_section_min(at, -1.0, 1.0);
        let (sg, value) = if at(sg) < d2[k] { (sg, at(sg)) } else { (0.0, d2[k]) };
        let cand = (pts[k].t + sg * (pts[k + 1].t - pts[k].t), value.sqrt());
        if best.is_none_or(|(_, d)| cand.1 < d) {
            best = Some(cand);
        }
    }
    best
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    (lo + hi) / 2.0
}

/// Speed |d(m,l)/dt| at the end of the window from a one-sided second-order
/// difference.
pub fn terminal_speed(traj: &Trajectory) -> Option<f64> {
    let pts: Vec<&TrajectoryPoint> = traj.points.iter().filter(|p| !p.singular).collect();
    let n = pts.len();
    if n < 3 {
        return None;
    }
    let (a, b, c) = (pts[n - 3].coords(), pts[n - 2].coords(), pts[n - 1].coords());
    let h = pts[n - 1].t - pts[n - 2].t;
    let v2: f64 = (0..6).map(|i| ((3.0 * c[i] - 4.0 * b[i] + a[i]) / (2.0 * h)).powi(2)).sum();
    Some(v2.sqrt())
}

/// Classifies a trajectory: unbounded if max(|m|,|l|) exceeds `growth_factor`
/// times its starting value, recurrent if it returns to within
/// `recurrence_tolerance` of the start, decaying if the terminal speed is
/// below `speed_tolerance`, bounded otherwise.
pub fn classify_trajectory(traj: &Trajectory, settings: &ClassifierSettings) -> TrajectoryClass {
    let regular: Vec<&TrajectoryPoint> = traj.points.iter().filter(|p| !p.singular).collect();
    if regular.len() < 3 {
        return TrajectoryClass::Undetermined;
    }
    let start_magnitude = regular[0].magnitude();
    let max_magnitude = regular.iter().map(|p| p.magnitude()).fold(0.0, f64::max);
    if max_magnitude > settings.growth_factor * start_magnitude {
        return TrajectoryClass::Unbounded { max_magnitude, start_magnitude };
    }
    let excursion = regular.iter().map(|p| distance2(p.coords(), regular[0].coords())).fold(0.0, f64::max).sqrt();
    let departure = (10.0 * settings.recurrence_tolerance).max(0.1 * excursion);
    if let Some((return_time, distance)) = closest_return(traj, departure) {
        if distance < settings.recurrence_tolerance {
            return TrajectoryClass::Recurrent { return_time, distance };
        }
    }
    match terminal_speed(traj) {
        Some(v) if v < settings.speed_tolerance => TrajectoryClass::DecayingToFixedPoint { terminal_speed: v },
        _ => TrajectoryClass::Bounded { max_magnitude },
    }
}

/// Groups the positions of significant local extrema of `ys` over `xs`.
/// An extremum is significant if |y − baseline| is at least
/// `relative_threshold` times the largest deviation; extrema further apart
/// than `gap` start a new cluster.
pub fn extremum_clusters(xs: &[f64], ys: &[f64], baseline: f64, relative_threshold: f64, gap: f64) -> Vec<Vec<f64>> {
    let n = xs.len().min(ys.len());
    let max_dev = ys[..n].iter().filter(|y| y.is_finite()).map(|y| (y - baseline).abs()).fold(0.0, f64::max);
    let mut clusters: Vec<Vec<f64>> = Vec::new();
    if max_dev == 0.0 {
        return clusters;
    }
    for k in 1..n.saturating_sub(1) {
        let (a, b, c) = (ys[k - 1], ys[k], ys[k + 1]);
        let extremum = (b > a && b >= c) || (b < a && b <= c);
        if !extremum || (b - baseline).abs() < relative_threshold * max_dev {
            continue;
        }
        match clusters.last_mut() {
            Some(cl) if xs[k] - cl.last().copied().unwrap_or(f64::NEG_INFINITY) <= gap => cl.push(xs[k]),
            _ => clusters.push(vec![xs[k]]),
        }
    }
    clusters
}

/// The (m, l) profile over x at fixed t; singular points are `None`.
pub fn x_profile(cfg: &SolitonConfig, t: f64, x_range: (f64, f64), samples: usize) -> Vec<(f64, Option<RealSpinSplit>)> {
    let grid = GridSpec::x_line(x_range.0, x_range.1, samples, t);
    let vals = evaluate_grid(&grid, |x, t| split_ml(cfg, x, t).ok());
    grid.xs().into_iter().zip(vals).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hirota::{FnField, LocalHirotaSoliton, NonlocalHirotaSoliton};
    use crate::spectral::presets;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn small_grid() -> GridSpec {
        GridSpec::new((-4.0, 4.0, 9), (-1.5, 1.5, 7)).unwrap()
    }

    fn nonlocal_reference() -> NonlocalHirotaSoliton {
        let p = presets::nonlocal_reference();
        NonlocalHirotaSoliton::new(p.mu, p.gamma, p.alpha, p.delta).unwrap()
    }

    fn local_soliton(mu: Complex, beta: f64) -> LocalHirotaSoliton {
        LocalHirotaSoliton::new(mu, c(0.4, 0.2), 0.3, beta).unwrap()
    }

    #[test]
    fn vacuum_spin() {
        let s = spin_from_ech(&EchFieldPoint::vacuum());
        assert_eq!(s.s, [c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
    }

    #[test]
    fn local_ech_spin_is_real() {
        let u = c(0.3, -0.4);
        let w = Complex::from((1.0 - u.norm_sqr()).sqrt());
        let p = EchFieldPoint { u, v: u.conj(), delta_omega: w - 1.0 };
        let s = spin_from_ech(&p);
        assert!((s.s[0] - u.re).norm() < 1e-15 && (s.s[1] + u.im).norm() < 1e-15);
        assert!(s.max_imaginary() < 1e-15);
    }

    #[test]
    fn ech_spin_unit_length() {
        for n in 1..=3 {
            let cfg = presets::soliton_family(n);
            for &(x, t) in &[(0.3, 0.2), (-1.1, 1.4), (2.2, -0.7)] {
                let s = spin_from_ech(&ech_solution(&cfg, x, t).unwrap());
                assert!(s.unit_defect() < 1e-10, "n={n}: {}", s.unit_defect());
            }
        }
    }

    #[test]
    fn printed_split_matches_direct_parts() {
        for n in 1..=2 {
            let cfg = presets::soliton_family(n);
            for &(x, t) in &[(0.3, 0.2), (-1.1, 1.4), (2.2, -0.7)] {
                let p = ech_solution(&cfg, x, t).unwrap();
                let direct = spin_from_ech(&p).split();
                let printed = split_ml(&cfg, x, t).unwrap();
                let tilde = ech_solution(&cfg, -x, t).unwrap();
                let scale = direct.as_array().iter().fold(1.0_f64, |a, b| a.max(b.abs()));
                for (a, b) in direct.as_array().iter().zip(printed.as_array()) {
                    assert!((a - b).abs() < 1e-10 * scale);
                }
                assert!(split_reality_defect(&p, &tilde, cfg.kappa) < 1e-10 * scale);
                assert!(printed.norm_defect() < 1e-10 * scale * scale);
                assert!(printed.orthogonality_defect() < 1e-10 * scale * scale);
            }
        }
    }

    #[test]
    fn real_lambda_split_structure() {
        // real λ and γ₁ = γ₂ real give v = −u*: s = (il₁, il₂, m₃)
        let cfg = SolitonConfig::new(vec![c(0.5, 0.0)], vec![c(0.3, 0.0), c(0.3, 0.0)], 1.0, 1.0, 0.0);
        for &(x, t) in &[(0.4, 0.3), (-1.0, 0.9)] {
            let s = split_ml(&cfg, x, t).unwrap();
            assert!(s.m[0].abs() < 1e-12 && s.m[1].abs() < 1e-12 && s.l[2].abs() < 1e-12);
            assert!(s.norm_defect() < 1e-10);
        }
    }

    #[test]
    fn local_routes_agree() {
        for q in [local_soliton(c(0.3, 0.0), 0.0), local_soliton(c(0.3, 0.1), 0.1)] {
            for &(x, t) in &[(0.5, 0.2), (-2.0, 3.0)] {
                let printed = spin_from_hirota_local(&q, -1.0, x, t).unwrap();
                let gauge = spin_from_gauge(&local_gauge(&q, -1.0, x, t).unwrap()).unwrap();
                let cyc = [gauge.s[2], gauge.s[0], gauge.s[1]];
                for (a, b) in printed.s.iter().zip(cyc) {
                    assert!((a - b).norm() < 1e-10);
                }
                assert!(printed.max_imaginary() < 1e-12);
                assert!(printed.unit_defect() < 1e-10);
            }
        }
    }

    #[test]
    fn nonlocal_routes_agree() {
        let q = nonlocal_reference();
        for &(x, t) in &[(0.5, 0.2), (-1.3, 2.0)] {
            let derived = spin_from_hirota_nonlocal(&q, -1.0, x, t).unwrap();
            let gauge = spin_from_gauge(&nonlocal_gauge(&q, -1.0, x, t).unwrap()).unwrap();
            for (a, b) in derived.s.iter().zip(gauge.s) {
                assert!((a - b).norm() < 1e-10);
            }
            assert!(derived.unit_defect() < 1e-10);
            assert!(nonlocal_spin_as_printed(&q, x, t).unwrap().unit_defect() < 1e-10);
        }
    }

    #[test]
    fn constant_spin_has_zero_residual() {
        let r = elle_residual(|_, _| Some(SpinPoint::new(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))), 1.0, c(0.0, 0.2), &small_grid(), &StencilSpec::default());
        assert_eq!(r.max, 0.0);
    }

    #[test]
    fn elle_holds_for_constructed_spins() {
        let g = small_grid();
        let st = StencilSpec::default();
        let cfg = SolitonConfig::new(vec![c(0.5, 0.0)], vec![c(0.3, 0.0), c(-0.2, 0.0)], 1.0, 1.0, 0.0);
        let r = elle_residual(|x, t| ech_solution(&cfg, x, t).ok().map(|p| spin_from_ech(&p)), cfg.alpha, cfg.beta(), &g, &st);
        assert!(r.passes(1e-6), "{}", r.max);
        let cfg = presets::soliton_family(1);
        let r = elle_residual(|x, t| ech_solution(&cfg, x, t).ok().map(|p| spin_from_ech(&p)), cfg.alpha, cfg.beta(), &g, &st);
        assert!(r.passes(1e-5), "{}", r.max);
        let q = nonlocal_reference();
        let r = elle_residual(|x, t| spin_from_hirota_nonlocal(&q, -1.0, x, t).ok(), q.alpha, q.beta(), &g, &st);
        assert!(r.passes(1e-5), "{}", r.max);
        let q = local_soliton(c(0.3, 0.0), 0.1);
        let r = elle_residual(|x, t| spin_from_hirota_local(&q, -1.0, x, t).ok(), q.alpha, q.beta(), &g, &st);
        assert!(r.passes(1e-5), "{}", r.max);
    }

    #[test]
    fn printed_nonlocal_spin_fails_the_equation() {
        let q = nonlocal_reference();
        let r = elle_residual(|x, t| nonlocal_spin_as_printed(&q, x, t).ok(), q.alpha, q.beta(), &small_grid(), &StencilSpec::default());
        assert!(r.max > 1e-2);
    }

    #[test]
    fn nelle_forms() {
        let g = small_grid();
        let st = StencilSpec::default();
        let cfg = presets::soliton_family(1);
        let s = |x, t| split_ml(&cfg, x, t).ok();
        let d = nelle_residual(s, cfg.alpha, cfg.delta, NelleForm::Derived, &g, &st);
        assert!(d.m_equation.passes(1e-5) && d.l_equation.passes(1e-5), "{} {}", d.m_equation.max, d.l_equation.max);
        let p = nelle_residual(s, cfg.alpha, cfg.delta, NelleForm::AsPrinted, &g, &st);
        assert!(p.m_equation.max > 1e-2);
        assert_eq!(p.l_equation.max, d.l_equation.max);
    }

    #[test]
    fn nelle_reduces_to_real_ll_for_vanishing_l() {
        // a real local spin with δ = 0: only mₜ = −α m×mₓₓ remains
        let q = local_soliton(c(0.3, 0.0), 0.0);
        let sampler = |x: f64, t: f64| spin_from_hirota_local(&q, -1.0, x, t).ok().map(|s| s.split());
        let r = nelle_residual(sampler, q.alpha, 0.0, NelleForm::Derived, &small_grid(), &StencilSpec::default());
        assert!(r.m_equation.passes(1e-6), "{}", r.m_equation.max);
        assert_eq!(r.l_equation.max, 0.0);
    }

    #[test]
    fn vacuum_trajectory_is_a_single_point() {
        let tr = trajectory(|_, _| Some(SpinPoint::new(c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0))), 0.0, (0.0, 10.0), 11);
        assert!(tr.points.windows(2).all(|w| w[0].m == w[1].m && w[0].l == w[1].l));
        assert_eq!(terminal_speed(&tr), Some(0.0));
        assert!(matches!(classify_trajectory(&tr, &ClassifierSettings::default()), TrajectoryClass::DecayingToFixedPoint { .. }));
    }

    #[test]
    fn classifier_on_synthetic_curves() {
        let circle = |_: f64, t: f64| Some(SpinPoint::new(c(t.cos(), 0.0), c(t.sin(), 0.0), c(0.0, 0.0)));
        let tr = trajectory(circle, 0.0, (0.0, 8.0), 801);
        match classify_trajectory(&tr, &ClassifierSettings::default()) {
            TrajectoryClass::Recurrent { return_time, distance } => {
                assert!((return_time - std::f64::consts::TAU).abs() < 1e-3 && distance < 1e-6);
            }
            other => panic!("{other:?}"),
        }
        let grow = |_: f64, t: f64| Some(SpinPoint::new(c(0.0, 0.0), c(0.0, t), c((1.0 + t * t).sqrt(), 0.0)));
        let tr = trajectory(grow, 0.0, (0.0, 20.0), 201);
        assert!(matches!(classify_trajectory(&tr, &ClassifierSettings::default()), TrajectoryClass::Unbounded { .. }));
        let spiral = |_: f64, t: f64| {
            let r = (-t).exp() * 0.5;
            Some(SpinPoint::new(c(r * (3.0 * t).cos(), 0.0), c(r * (3.0 * t).sin(), 0.0), c(1.0, 0.0)))
        };
        let tr = trajectory(spiral, 0.0, (0.0, 20.0), 2001);
        assert!(matches!(classify_trajectory(&tr, &ClassifierSettings::default()), TrajectoryClass::DecayingToFixedPoint { .. }));
        let tr = trajectory(spiral, 0.0, (0.0, 2.0), 201);
        assert!(matches!(classify_trajectory(&tr, &ClassifierSettings::default()), TrajectoryClass::Bounded { .. }));
    }

    #[test]
    fn singular_samples_are_flagged() {
        let tr = trajectory(|_, t| if t < 0.5 { None } else { Some(SpinPoint::new(c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0))) }, 0.0, (0.0, 1.0), 5);
        assert_eq!(tr.points.iter().filter(|p| p.singular).count(), 2);
        assert!(tr.points[0].m[0].is_nan());
    }

    #[test]
    fn clusters_of_extrema() {
        let xs: Vec<f64> = (0..2001).map(|k| -10.0 + 0.01 * k as f64).collect();
        let bump = |x: f64, c: f64| (-(x - c) * (x - c) * 4.0).exp();
        let ys: Vec<f64> = xs.iter().map(|&x| bump(x, -5.0) - 0.8 * bump(x, -4.4) + bump(x, 5.0) + 0.01 * (20.0 * x).sin()).collect();
        let cl = extremum_clusters(&xs, &ys, 0.0, 0.1, 2.0);
        assert_eq!(cl.len(), 2, "{cl:?}");
        assert!(cl[0].len() >= 2);
        assert!(extremum_clusters(&xs, &vec![1.0; xs.len()], 1.0, 0.1, 2.0).is_empty());
    }

    #[test]
    fn gauge_spin_needs_invertible_gauge() {
        assert!(spin_from_gauge(&Mat2::zero()).is_err());
        let field = FnField(|_: f64, _: f64| Some(c(0.0, 0.0)));
        assert!(spin_from_hirota_local(&field, -1.0, 0.0, 0.0).is_err());
    }
}
