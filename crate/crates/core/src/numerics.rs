//! Complex arithmetic kernel: 2×2 and 2n×2n complex matrices, determinants
//! and their x-derivatives, and central finite-difference stencils.
//!
//! Everything in here is a pure function of its inputs.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Base scalar for spectral parameters, phases and field values.
pub type Complex = Complex64;

/// The imaginary unit.
pub const I: Complex = Complex::new(0.0, 1.0);

/// Relative threshold below which a determinant is treated as vanishing.
pub const SINGULARITY_THRESHOLD: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("non-finite value for {what}")]
    NonFinite { what: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("singular matrix: |det| = {det:e} below threshold {threshold:e}")]
    Singular { det: f64, threshold: f64 },
    #[error("invalid stencil: {0}")]
    InvalidStencil(String),
    #[error("cannot parse complex number {0:?}")]
    ParseComplex(String),
}

/// Builds a complex number from user input, rejecting NaN and infinities.
pub fn checked_complex(re: f64, im: f64, what: &str) -> Result<Complex, NumericsError> {
    if re.is_finite() && im.is_finite() {
        Ok(Complex::new(re, im))
    } else {
        Err(NumericsError::NonFinite { what: what.to_string() })
    }
}

/// Parses complex literals of the form `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i`.
/// A trailing `j` is accepted in place of `i`.
pub fn parse_complex(text: &str) -> Result<Complex, NumericsError> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let err = || NumericsError::ParseComplex(text.to_string());
    if s.is_empty() {
        return Err(err());
    }
    let parse_f = |p: &str| -> Result<f64, NumericsError> {
        match p {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => p.parse::<f64>().map_err(|_| err()),
        }
    };
    let z = if let Some(body) = s.strip_suffix('i').or_else(|| s.strip_suffix('j')) {
        // split at the last sign that is not part of an exponent
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        match split {
            Some(k) => {
                let re = body[..k].parse::<f64>().map_err(|_| err())?;
                Complex::new(re, parse_f(&body[k..])?)
            }
            None => Complex::new(0.0, parse_f(body)?),
        }
    } else {
        Complex::new(s.parse::<f64>().map_err(|_| err())?, 0.0)
    };
    checked_complex(z.re, z.im, text)
}

/// Formats a complex number as `a+bi` with 17 significant digits.
pub fn format_complex(z: Complex) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{:.16e}{}{:.16e}i", z.re, sign, z.im.abs())
}

/// Serde adapters writing complex numbers as `"a+bi"` strings. Deserialization
/// also accepts plain numbers and `[re, im]` pairs.
pub mod complex_serde {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Text(String),
        Real(f64),
        Pair([f64; 2]),
    }

    impl Repr {
        fn into_complex(self) -> Result<Complex, NumericsError> {
            match self {
                Repr::Text(s) => parse_complex(&s),
                Repr::Real(re) => checked_complex(re, 0.0, "number"),
                Repr::Pair([re, im]) => checked_complex(re, im, "pair"),
            }
        }
    }

    pub fn serialize<S: Serializer>(z: &Complex, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_complex(*z))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex, D::Error> {
        Repr::deserialize(d)?.into_complex().map_err(D::Error::custom)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Complex], s: S) -> Result<S::Ok, S::Error> {
            s.collect_seq(v.iter().map(|z| format_complex(*z)))
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex>, D::Error> {
            Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(|r| r.into_complex().map_err(D::Error::custom))
                .collect()
        }
    }

    pub mod array3 {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[Complex; 3], s: S) -> Result<S::Ok, S::Error> {
            super::vec::serialize(v, s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[Complex; 3], D::Error> {
            let v = super::vec::deserialize(d)?;
            v.try_into().map_err(|v: Vec<Complex>| D::Error::invalid_length(v.len(), &"three complex numbers"))
        }
    }
}

// ---------------------------------------------------------------------------
// 2×2 matrices
// ---------------------------------------------------------------------------

/// A 2×2 complex matrix, stored row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub m: [[Complex; 2]; 2],
}

impl Mat2 {
    pub const fn new(a11: Complex, a12: Complex, a21: Complex, a22: Complex) -> Self {
        Mat2 { m: [[a11, a12], [a21, a22]] }
    }

    pub fn zero() -> Self {
        Self::splat(Complex::new(0.0, 0.0))
    }

    fn splat(z: Complex) -> Self {
        Mat2 { m: [[z; 2]; 2] }
    }

    pub fn identity() -> Self {
        Self::diag(Complex::new(1.0, 0.0), Complex::new(1.0, 0.0))
    }

    pub fn diag(a: Complex, b: Complex) -> Self {
        let z = Complex::new(0.0, 0.0);
        Self::new(a, z, z, b)
    }

    /// Matrix whose columns are the two given vectors.
    pub fn from_columns(c1: [Complex; 2], c2: [Complex; 2]) -> Self {
        Self::new(c1[0], c2[0], c1[1], c2[1])
    }

    pub fn column(&self, j: usize) -> [Complex; 2] {
        [self.m[0][j], self.m[1][j]]
    }

    pub fn det(&self) -> Complex {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    pub fn trace(&self) -> Complex {
        self.m[0][0] + self.m[1][1]
    }

    pub fn max_abs(&self) -> f64 {
        self.m.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|z| z.is_finite())
    }

    /// `|det| <= SINGULARITY_THRESHOLD * (max entry modulus)^2`.
    pub fn is_singular(&self) -> bool {
        let scale = self.max_abs();
        self.det().norm() <= SINGULARITY_THRESHOLD * scale * scale
    }

    pub fn inverse(&self) -> Result<Mat2, NumericsError> {
        let scale = self.max_abs();
        let det = self.det();
        let threshold = SINGULARITY_THRESHOLD * scale * scale;
        if !(det.norm() > threshold) {
            return Err(NumericsError::Singular { det: det.norm(), threshold });
        }
        let inv = det.inv();
        Ok(Mat2::new(
            self.m[1][1] * inv,
            -self.m[0][1] * inv,
            -self.m[1][0] * inv,
            self.m[0][0] * inv,
        ))
    }

    pub fn mul_vec(&self, v: [Complex; 2]) -> [Complex; 2] {
        [
            self.m[0][0] * v[0] + self.m[0][1] * v[1],
            self.m[1][0] * v[0] + self.m[1][1] * v[1],
        ]
    }

    pub fn scale(&self, z: Complex) -> Mat2 {
        self.map(|a| a * z)
    }

    pub fn map(&self, f: impl Fn(Complex) -> Complex) -> Mat2 {
        Mat2::new(f(self.m[0][0]), f(self.m[0][1]), f(self.m[1][0]), f(self.m[1][1]))
    }

    pub fn conj_transpose(&self) -> Mat2 {
        Mat2::new(self.m[0][0].conj(), self.m[1][0].conj(), self.m[0][1].conj(), self.m[1][1].conj())
    }

    /// Entrywise modulus, as a real matrix.
    pub fn abs(&self) -> [[f64; 2]; 2] {
        [
            [self.m[0][0].norm(), self.m[0][1].norm()],
            [self.m[1][0].norm(), self.m[1][1].norm()],
        ]
    }

    /// Largest entry modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (*self - *other).max_abs()
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m[0][0] + o.m[0][0],
            self.m[0][1] + o.m[0][1],
            self.m[1][0] + o.m[1][0],
            self.m[1][1] + o.m[1][1],
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + (-o)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.map(|z| -z)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let a = &self.m;
        let b = &o.m;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Mul<Complex> for Mat2 {
    type Output = Mat2;
    fn mul(self, z: Complex) -> Mat2 {
        self.scale(z)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        self.map(|a| a * s)
    }
}

/// Pauli matrix σ₁, σ₂ or σ₃ (`k` = 1, 2, 3).
pub fn pauli(k: usize) -> Mat2 {
    let o = Complex::new(0.0, 0.0);
    let one = Complex::new(1.0, 0.0);
    match k {
        1 => Mat2::new(o, one, one, o),
        2 => Mat2::new(o, -I, I, o),
        3 => Mat2::new(one, o, o, -one),
        _ => panic!("Pauli index must be 1, 2 or 3, got {k}"),
    }
}

/// `[A, B] = AB - BA`.
pub fn commutator(a: &Mat2, b: &Mat2) -> Mat2 {
    *a * *b - *b * *a
}

/// Product of entrywise-modulus matrices, `|A||B|`. Bounds the modulus of
/// every individual product contributing to each entry of `AB`.
pub fn abs_product(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[[{}, {}], [{}, {}]]",
            self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]
        )
    }
}

// ---------------------------------------------------------------------------
// Square n×n matrices
// ---------------------------------------------------------------------------

/// Dense square complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct MatN {
    dim: usize,
    data: Vec<Complex>,
}

impl MatN {
    pub fn new(dim: usize, data: Vec<Complex>) -> Result<Self, NumericsError> {
        if data.len() != dim * dim {
            return Err(NumericsError::DimensionMismatch { expected: dim * dim, found: data.len() });
        }
        Ok(MatN { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        MatN { dim, data }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { Complex::new(1.0, 0.0) } else { Complex::new(0.0, 0.0) })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Complex {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex) {
        self.data[i * self.dim + j] = z;
    }

    pub fn row(&self, i: usize) -> &[Complex] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Product of the Euclidean row norms (Hadamard bound on |det|).
    pub fn hadamard_bound(&self) -> f64 {
        (0..self.dim)
            .map(|i| self.row(i).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
            .product()
    }

    /// Determinant. Direct formula for dimensions 1 and 2, LU with partial
    /// pivoting on modulus otherwise.
    pub fn det(&self) -> Complex {
        match self.dim {
            0 => Complex::new(1.0, 0.0),
            1 => self.data[0],
            2 => self.data[0] * self.data[3] - self.data[1] * self.data[2],
            n => lu_det(n, self.data.clone()),
        }
    }

    /// Copy of `self` with row `r` replaced by row `r` of `other`.
    fn with_row_from(&self, r: usize, other: &MatN) -> MatN {
        let mut out = self.clone();
        out.data[r * self.dim..(r + 1) * self.dim].copy_from_slice(other.row(r));
        out
    }
}

fn lu_det(n: usize, mut a: Vec<Complex>) -> Complex {
    let mut det = Complex::new(1.0, 0.0);
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, a[i * n + k].norm()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pmax == 0.0 {
            return Complex::new(0.0, 0.0);
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            det = -det;
        }
        let pivot = a[k * n + k];
        det *= pivot;
        for i in (k + 1)..n {
            let factor = a[i * n + k] / pivot;
            if factor == Complex::new(0.0, 0.0) {
                continue;
            }
            for j in (k + 1)..n {
                let akj = a[k * n + j];
                a[i * n + j] -= factor * akj;
            }
        }
    }
    det
}

/// x-derivative of `det M(x)` given the entrywise derivative `m_dx`, via
/// multilinearity: the sum over rows of `det(M with row r from M_x)`.
pub fn det_dx(m: &MatN, m_dx: &MatN) -> Result<Complex, NumericsError> {
    if m.dim() != m_dx.dim() {
        return Err(NumericsError::DimensionMismatch { expected: m.dim(), found: m_dx.dim() });
    }
    Ok((0..m.dim()).map(|r| m.with_row_from(r, m_dx).det()).sum())
}

// ---------------------------------------------------------------------------
// Finite differences
// ---------------------------------------------------------------------------

/// Central finite-difference stencil: derivative order, accuracy order and step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StencilSpec {
    pub order: u8,
    pub accuracy: u8,
    pub step: f64,
    #[serde(default)]
    pub richardson: bool,
}

impl Default for StencilSpec {
    fn default() -> Self {
        StencilSpec { order: 1, accuracy: 4, step: 1e-3, richardson: false }
    }
}

impl StencilSpec {
    pub fn new(order: u8, accuracy: u8, step: f64) -> Result<Self, NumericsError> {
        let spec = StencilSpec { order, accuracy, step, richardson: false };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_order(mut self, order: u8) -> Self {
        self.order = order;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(1..=3).contains(&self.order) {
            return Err(NumericsError::InvalidStencil(format!("derivative order {} not in 1..=3", self.order)));
        }
        if !matches!(self.accuracy, 2 | 4 | 6) {
            return Err(NumericsError::InvalidStencil(format!("accuracy order {} not in {{2, 4, 6}}", self.accuracy)));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(NumericsError::InvalidStencil(format!("step {} must be positive", self.step)));
        }
        Ok(())
    }

    /// Stencil weights `(offset, weight)` for step 1.
    pub fn weights(&self) -> &'static [(i32, f64)] {
        central_weights(self.order, self.accuracy)
    }

    /// Largest |offset| over the first, second and third derivative stencils.
    pub fn half_width(&self) -> i32 {
        (1..=3).map(|k| central_weights(k, self.accuracy).iter().map(|w| w.0.abs()).max().unwrap_or(0)).max().unwrap_or(0)
    }
}

fn central_weights(order: u8, accuracy: u8) -> &'static [(i32, f64)] {
    match (order, accuracy) {
        (1, 2) => &[(-1, -0.5), (1, 0.5)],
        (1, 4) => &[(-2, 1.0 / 12.0), (-1, -2.0 / 3.0), (1, 2.0 / 3.0), (2, -1.0 / 12.0)],
        (1, 6) => &[
            (-3, -1.0 / 60.0),
            (-2, 3.0 / 20.0),
            (-1, -3.0 / 4.0),
            (1, 3.0 / 4.0),
            (2, -3.0 / 20.0),
            (3, 1.0 / 60.0),
        ],
        (2, 2) => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        (2, 4) => &[(-2, -1.0 / 12.0), (-1, 4.0 / 3.0), (0, -5.0 / 2.0), (1, 4.0 / 3.0), (2, -1.0 / 12.0)],
        (2, 6) => &[
            (-3, 1.0 / 90.0),
            (-2, -3.0 / 20.0),
            (-1, 3.0 / 2.0),
            (0, -49.0 / 18.0),
            (1, 3.0 / 2.0),
            (2, -3.0 / 20.0),
            (3, 1.0 / 90.0),
        ],
        (3, 2) => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        (3, 4) => &[(-3, 1.0 / 8.0), (-2, -1.0), (-1, 13.0 / 8.0), (1, -13.0 / 8.0), (2, 1.0), (3, -1.0 / 8.0)],
        (3, 6) => &[
            (-4, -7.0 / 240.0),
            (-3, 3.0 / 10.0),
            (-2, -169.0 / 120.0),
            (-1, 61.0 / 30.0),
            (1, -61.0 / 30.0),
            (2, 169.0 / 120.0),
            (3, -3.0 / 10.0),
            (4, 7.0 / 240.0),
        ],
        _ => panic!("unsupported stencil: order {order}, accuracy {accuracy}"),
    }
}

/// Σ wₖ f(k) / hᵒʳᵈᵉʳ evaluated in symmetric form: odd orders as
/// Σₖ₊ wₖ(fₖ − f₋ₖ), even orders as Σₖ₊ wₖ[(fₖ − f₀) + (f₋ₖ − f₀)]. Both are
/// exactly zero on constant samples.
fn apply_stencil<'a, T: FdValue + 'a>(order: u8, accuracy: u8, h: f64, get: impl Fn(i32) -> &'a T) -> T {
    let weights = central_weights(order, accuracy);
    let mut acc = get(weights[weights.len() - 1].0).zero_like();
    for &(k, w) in weights.iter().filter(|(k, _)| *k > 0) {
        if order % 2 == 1 {
            acc.add_scaled_difference(w, get(k), get(-k));
        } else {
            acc.add_scaled_difference(w, get(k), get(0));
            acc.add_scaled_difference(w, get(-k), get(0));
        }
    }
    acc.scaled(h.powi(-(order as i32)))
}

/// Values that finite-difference stencils can combine linearly.
pub trait FdValue: Clone {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, w: f64, other: &Self);
    /// self += w·(a − b), with the difference formed first.
    fn add_scaled_difference(&mut self, w: f64, a: &Self, b: &Self);
    fn all_finite(&self) -> bool;

    fn scaled(&self, w: f64) -> Self {
        let mut out = self.zero_like();
        out.add_scaled(w, self);
        out
    }
}

impl FdValue for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, w: f64, o: &Self) {
        *self += w * o;
    }
    fn add_scaled_difference(&mut self, w: f64, a: &Self, b: &Self) {
        *self += w * (a - b);
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl FdValue for Complex {
    fn zero_like(&self) -> Self {
        Complex::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, w: f64, o: &Self) {
        *self += o * w;
    }
    fn add_scaled_difference(&mut self, w: f64, a: &Self, b: &Self) {
        *self += (a - b) * w;
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

impl<T: FdValue + Copy, const N: usize> FdValue for [T; N] {
    fn zero_like(&self) -> Self {
        self.map(|v| v.zero_like())
    }
    fn add_scaled(&mut self, w: f64, o: &Self) {
        for (a, b) in self.iter_mut().zip(o) {
            a.add_scaled(w, b);
        }
    }
    fn add_scaled_difference(&mut self, w: f64, a: &Self, b: &Self) {
        for ((s, x), y) in self.iter_mut().zip(a).zip(b) {
            s.add_scaled_difference(w, x, y);
        }
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.all_finite())
    }
}

impl FdValue for Mat2 {
    fn zero_like(&self) -> Self {
        Mat2::zero()
    }
    fn add_scaled(&mut self, w: f64, o: &Self) {
        *self = *self + *o * w;
    }
    fn add_scaled_difference(&mut self, w: f64, a: &Self, b: &Self) {
        *self = *self + (*a - *b) * w;
    }
    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

/// Failure of a finite-difference evaluation; the point is to be masked.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FdError<E> {
    #[error("sampler failed at stencil node x = {x}")]
    Sampler { x: f64, source: E },
    #[error("sampler returned a non-finite value at stencil node x = {x}")]
    NonFinite { x: f64 },
}

/// Central-difference approximation of the `spec.order`-th derivative of an
/// infallible sampler at `x0`.
pub fn fd_derivative<T: FdValue>(
    sampler: impl Fn(f64) -> T,
    x0: f64,
    spec: &StencilSpec,
) -> Result<T, FdError<std::convert::Infallible>> {
    try_fd_derivative(|x| Ok(sampler(x)), x0, spec)
}

/// Like [`fd_derivative`] for samplers that can fail (e.g. at singular points).
pub fn try_fd_derivative<T: FdValue, E>(
    sampler: impl Fn(f64) -> Result<T, E>,
    x0: f64,
    spec: &StencilSpec,
) -> Result<T, FdError<E>> {
    let once = |h: f64| -> Result<T, FdError<E>> {
        let hw = spec.half_width();
        let needs_center = spec.order.is_multiple_of(2);
        let mut samples = Vec::with_capacity((2 * hw + 1) as usize);
        for k in -hw..=hw {
            if k == 0 && !needs_center {
                samples.push(None);
                continue;
            }
            let x = x0 + k as f64 * h;
            let v = sampler(x).map_err(|source| FdError::Sampler { x, source })?;
            if !v.all_finite() {
                return Err(FdError::NonFinite { x });
            }
            samples.push(Some(v));
        }
        let get = |k: i32| samples[(k + hw) as usize].as_ref().expect("stencil node sampled");
        Ok(apply_stencil(spec.order, spec.accuracy, h, get))
    };
    let coarse = once(spec.step)?;
    if !spec.richardson {
        return Ok(coarse);
    }
    let fine = once(spec.step / 2.0)?;
    Ok(richardson(&coarse, &fine, spec.accuracy))
}

fn richardson<T: FdValue>(coarse: &T, fine: &T, accuracy: u8) -> T {
    let p = 2f64.powi(accuracy as i32);
    let mut out = fine.scaled(p / (p - 1.0));
    out.add_scaled(-1.0 / (p - 1.0), coarse);
    out
}

/// Value and first three x-derivatives of a field at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<T> {
    pub value: T,
    pub d1: T,
    pub d2: T,
    pub d3: T,
}

/// Computes value and first three derivatives from one shared set of
/// samples at `x0 + k h`, |k| <= half width of the stencil family.
pub fn try_jet<T: FdValue, E>(
    sampler: impl Fn(f64) -> Result<T, E>,
    x0: f64,
    spec: &StencilSpec,
) -> Result<Jet<T>, FdError<E>> {
    let once = |h: f64| -> Result<Jet<T>, FdError<E>> {
        let hw = spec.half_width();
        let mut samples = Vec::with_capacity((2 * hw + 1) as usize);
        for k in -hw..=hw {
            let x = x0 + k as f64 * h;
            let v = sampler(x).map_err(|source| FdError::Sampler { x, source })?;
            if !v.all_finite() {
                return Err(FdError::NonFinite { x });
            }
            samples.push(v);
        }
        let value = samples[hw as usize].clone();
        let get = |k: i32| &samples[(k + hw) as usize];
        let apply = |order: u8| apply_stencil(order, spec.accuracy, h, get);
        Ok(Jet { d1: apply(1), d2: apply(2), d3: apply(3), value })
    };
    let coarse = once(spec.step)?;
    if !spec.richardson {
        return Ok(coarse);
    }
    let fine = once(spec.step / 2.0)?;
    Ok(Jet {
        value: coarse.value.clone(),
        d1: richardson(&coarse.d1, &fine.d1, spec.accuracy),
        d2: richardson(&coarse.d2, &fine.d2, spec.accuracy),
        d3: richardson(&coarse.d3, &fine.d3, spec.accuracy),
    })
}
