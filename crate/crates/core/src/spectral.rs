//! Spectral parameters, the phase function ξ_λ and the paired seed solutions
//! of the vacuum spectral problem.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{complex_serde, Complex, I};

/// Largest admissible real part of a seed exponent before `exp` overflows.
pub const OVERFLOW_GUARD: f64 = 709.0;

/// Complete parameter set for an order-`n` nonlocal soliton.
///
/// `lambdas` holds the base spectral parameters λ₁, λ₃, …, λ₂ₙ₋₁; the partners
/// are λ₂ᵢ = −λ₂ᵢ₋₁*. `gammas` holds the 2n phase constants γ₁…γ₂ₙ. The
/// time-evolution constant β is fixed to iδ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonConfig {
    #[serde(with = "complex_serde::vec")]
    pub lambdas: Vec<Complex>,
    #[serde(with = "complex_serde::vec")]
    pub gammas: Vec<Complex>,
    pub kappa: f64,
    pub alpha: f64,
    pub delta: f64,
    /// Gauge constants μ₁…μₙ; empty means all equal to 1.
    #[serde(default)]
    pub mu: Vec<f64>,
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_c() -> f64 {
    -1.0
}

/// A single violated configuration rule.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConfigViolation {
    pub parameter: String,
    pub rule: String,
}

impl ConfigViolation {
    fn new(parameter: impl Into<String>, rule: impl Into<String>) -> Self {
        ConfigViolation { parameter: parameter.into(), rule: rule.into() }
    }
}

impl fmt::Display for ConfigViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.parameter, self.rule)
    }
}

/// Seed vectors ψ₂ᵢ₋₁ = (φ₂ᵢ₋₁, ϕ₂ᵢ₋₁) and ψ₂ᵢ = (φ₂ᵢ, ϕ₂ᵢ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeedPair {
    pub psi_odd: [Complex; 2],
    pub psi_even: [Complex; 2],
}

impl SolitonConfig {
    /// Config with μ = 1 and c = −1.
    pub fn new(lambdas: Vec<Complex>, gammas: Vec<Complex>, kappa: f64, alpha: f64, delta: f64) -> Self {
        SolitonConfig { lambdas, gammas, kappa, alpha, delta, mu: Vec::new(), c: -1.0 }
    }

    pub fn with_mu(mut self, mu: Vec<f64>) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    /// Soliton order n.
    pub fn order(&self) -> usize {
        self.lambdas.len()
    }

    /// The time-evolution constant β = iδ.
    pub fn beta(&self) -> Complex {
        I * self.delta
    }

    /// μ at Darboux level `level` (1-based).
    pub fn mu_at(&self, level: usize) -> f64 {
        self.mu.get(level.wrapping_sub(1)).copied().unwrap_or(1.0)
    }

    /// All 2n spectral parameters λ₁, λ₂ = −λ₁*, λ₃, λ₄ = −λ₃*, …
    pub fn spectral_parameters(&self) -> Vec<Complex> {
        self.lambdas.iter().flat_map(|&l| [l, -l.conj()]).collect()
    }

    /// χₙ = (−1)ⁿ Πᵢ |λ₂ᵢ₋₁|⁻², the determinant of the accumulated intertwiner.
    pub fn chi(&self) -> f64 {
        let sign = if self.order().is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * self.lambdas.iter().map(|l| l.norm_sqr().recip()).product::<f64>()
    }

    /// Truncates to the first `n` solitons.
    pub fn truncated(&self, n: usize) -> SolitonConfig {
        let mut out = self.clone();
        out.lambdas.truncate(n);
        out.gammas.truncate(2 * n);
        if !out.mu.is_empty() {
            out.mu.truncate(n);
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let violations = validate_config(self);
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(violations))
        }
    }
}

fn subscript(k: usize) -> String {
    const DIGITS: [char; 10] = ['₀', '₁', '₂', '₃', '₄', '₅', '₆', '₇', '₈', '₉'];
    k.to_string().chars().map(|c| DIGITS[c.to_digit(10).unwrap() as usize]).collect()
}

/// Checks every invariant of [`SolitonConfig`]; an empty list means valid.
pub fn validate_config(cfg: &SolitonConfig) -> Vec<ConfigViolation> {
    let mut out = Vec::new();
    let n = cfg.order();
    if n == 0 {
        out.push(ConfigViolation::new("lambdas", "at least one spectral parameter is required"));
    }
    if cfg.gammas.len() != 2 * n {
        out.push(ConfigViolation::new(
            "gammas",
            format!("expected 2n = {} phase constants, found {}", 2 * n, cfg.gammas.len()),
        ));
    }
    if !cfg.mu.is_empty() && cfg.mu.len() != n {
        out.push(ConfigViolation::new("mu", format!("expected n = {n} gauge constants, found {}", cfg.mu.len())));
    }
    for (k, m) in cfg.mu.iter().enumerate() {
        if !m.is_finite() || *m == 0.0 {
            out.push(ConfigViolation::new(format!("μ{}", subscript(k + 1)), "must be finite and nonzero"));
        }
    }
    if !cfg.kappa.is_finite() || cfg.kappa == 0.0 {
        out.push(ConfigViolation::new("κ", "must be finite and nonzero"));
    }
    for (name, v) in [("α", cfg.alpha), ("δ", cfg.delta)] {
        if !v.is_finite() {
            out.push(ConfigViolation::new(name, "must be finite"));
        }
    }
    if !cfg.c.is_finite() || cfg.c == 0.0 {
        out.push(ConfigViolation::new("c", "must be finite and nonzero"));
    }
    for (k, g) in cfg.gammas.iter().enumerate() {
        if !g.is_finite() {
            out.push(ConfigViolation::new(format!("γ{}", subscript(k + 1)), "must be finite"));
        }
    }
    let mut finite = true;
    for (i, l) in cfg.lambdas.iter().enumerate() {
        let name = format!("λ{}", subscript(2 * i + 1));
        if !l.is_finite() {
            out.push(ConfigViolation::new(name, "must be finite"));
            finite = false;
        } else if *l == Complex::new(0.0, 0.0) {
            out.push(ConfigViolation::new(name, "spectral parameters must be nonzero"));
        } else if l.re == 0.0 {
            out.push(ConfigViolation::new(
                name.clone(),
                format!(
                    "pairing λ{p} = −{name}* breaks down: Re {name} = 0 makes λ{p} = {name}",
                    p = subscript(2 * i + 2)
                ),
            ));
        }
    }
    if finite {
        let all = cfg.spectral_parameters();
        for a in 0..all.len() {
            for b in (a + 1)..all.len() {
                // the Re λ = 0 collision within a pair is reported above
                if b == a + 1 && a % 2 == 0 {
                    continue;
                }
                if all[a] == all[b] {
                    out.push(ConfigViolation::new(
                        format!("λ{}, λ{}", subscript(a + 1), subscript(b + 1)),
                        "duplicate spectral parameter",
                    ));
                }
            }
        }
    }
    out
}

/// ξ_λ(x,t) = iλx + 2λ²(iα − 2δλ)t.
pub fn xi(lambda: Complex, x: f64, t: f64, alpha: f64, delta: f64) -> Complex {
    I * lambda * x + 2.0 * lambda * lambda * (I * alpha - 2.0 * delta * lambda) * t
}

fn guarded_exp(z: Complex, seed: usize, x: f64, t: f64) -> Result<Complex> {
    if z.re > OVERFLOW_GUARD {
        return Err(Error::Overflow { seed, exponent: z.re, x, t });
    }
    Ok(z.exp())
}

/// Seeds ψ₂ᵢ₋₁ = (e^{ξ+γ₂ᵢ₋₁}, e^{−ξ+γ₂ᵢ}) and
/// ψ₂ᵢ = (−κe^{−ξ̃*+γ₂ᵢ*}, e^{ξ̃*+γ₂ᵢ₋₁*}) with ξ = ξ_{λ₂ᵢ₋₁}(x,t) and
/// ξ̃* = ξ*_{λ₂ᵢ₋₁}(−x,t). `i` is 1-based.
pub fn seed_pair(i: usize, cfg: &SolitonConfig, x: f64, t: f64) -> Result<SeedPair> {
    if i == 0 || i > cfg.order() || cfg.gammas.len() < 2 * i {
        return Err(Error::Degenerate(format!("seed index {i} out of range for order {}", cfg.order())));
    }
    let lambda = cfg.lambdas[i - 1];
    let (g_odd, g_even) = (cfg.gammas[2 * i - 2], cfg.gammas[2 * i - 1]);
    let e = xi(lambda, x, t, cfg.alpha, cfg.delta);
    let et = xi(lambda, -x, t, cfg.alpha, cfg.delta).conj();
    let (s_odd, s_even) = (2 * i - 1, 2 * i);
    Ok(SeedPair {
        psi_odd: [guarded_exp(e + g_odd, s_odd, x, t)?, guarded_exp(-e + g_even, s_odd, x, t)?],
        psi_even: [
            -cfg.kappa * guarded_exp(-et + g_even.conj(), s_even, x, t)?,
            guarded_exp(et + g_odd.conj(), s_even, x, t)?,
        ],
    })
}

/// All 2n seeds in order ψ₁, ψ₂, …, ψ₂ₙ.
pub fn all_seeds(cfg: &SolitonConfig, x: f64, t: f64) -> Result<Vec<[Complex; 2]>> {
    let mut out = Vec::with_capacity(2 * cfg.order());
    for i in 1..=cfg.order() {
        let p = seed_pair(i, cfg, x, t)?;
        out.push(p.psi_odd);
        out.push(p.psi_even);
    }
    Ok(out)
}

/// The κ-twisted parity conjugation taking ψ₂ᵢ₋₁ to ψ₂ᵢ:
/// `(a, b)(x) ↦ (−κ b*(−x), a*(−x))`, given the vector evaluated at −x.
pub fn parity_conjugate(psi_at_minus_x: [Complex; 2], kappa: f64) -> [Complex; 2] {
    [-kappa * psi_at_minus_x[1].conj(), psi_at_minus_x[0].conj()]
}

/// Named parameter sets used throughout the examples, tests and self-test.
pub mod presets {
    use super::*;

    /// Local one-soliton reference parameters: spectral μ, shift γ, α, β.
    #[derive(Clone, Copy, Debug, PartialEq)]
    pub struct LocalSolitonParams {
        pub mu: Complex,
        pub gamma: Complex,
        pub alpha: f64,
        pub beta: f64,
    }

    /// Nonlocal one-soliton reference parameters: spectral μ, shift γ, α, δ.
    #[derive(Clone, Copy, Debug, PartialEq)]
    pub struct NonlocalSolitonParams {
        pub mu: Complex,
        pub gamma: Complex,
        pub alpha: f64,
        pub delta: f64,
    }

    /// Periodic local soliton, real μ = 0.3, no higher-order term.
    pub fn local_periodic() -> LocalSolitonParams {
        LocalSolitonParams { mu: Complex::new(0.3, 0.0), gamma: Complex::new(0.4, 0.2), alpha: 0.3, beta: 0.0 }
    }

    /// Decaying local soliton, complex μ = 0.3 + 0.1i, β = 0.
    pub fn local_decaying() -> LocalSolitonParams {
        LocalSolitonParams { mu: Complex::new(0.3, 0.1), ..local_periodic() }
    }

    /// Local soliton with real μ and higher-order term β = 0.1.
    pub fn local_extended() -> LocalSolitonParams {
        LocalSolitonParams { beta: 0.1, ..local_periodic() }
    }

    /// Decaying local soliton with β = 0.1.
    pub fn local_extended_decaying() -> LocalSolitonParams {
        LocalSolitonParams { mu: Complex::new(0.3, 0.1), ..local_extended() }
    }

    /// Nonlocal reference soliton: μ = 0.55i, γ = 0, α = 1.5, δ = 0.15.
    pub fn nonlocal_reference() -> NonlocalSolitonParams {
        NonlocalSolitonParams { mu: Complex::new(0.0, 0.55), gamma: Complex::new(0.0, 0.0), alpha: 1.5, delta: 0.15 }
    }

    /// Two-soliton set: α = 1.2, δ = 0.2, κ = 3, λ = 0.4 − 0.3i,
    /// ρ = 0.7 + 0.5i, γ = (5.1i, 0.1i, −1.1i, 0.2i).
    pub fn two_soliton() -> SolitonConfig {
        SolitonConfig::new(
            vec![Complex::new(0.4, -0.3), Complex::new(0.7, 0.5)],
            vec![Complex::new(0.0, 5.1), Complex::new(0.0, 0.1), Complex::new(0.0, -1.1), Complex::new(0.0, 0.2)],
            3.0,
            1.2,
            0.2,
        )
    }

    /// The two-soliton set extended by a third soliton λ₅ = 0.6 − 0.1i,
    /// γ₅ = γ₆ = 0.
    pub fn three_soliton() -> SolitonConfig {
        let mut cfg = two_soliton();
        cfg.lambdas.push(Complex::new(0.6, -0.1));
        cfg.gammas.extend([Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)]);
        cfg
    }

    /// The order-`n` member (n = 1, 2, 3) of the two-soliton family.
    pub fn soliton_family(n: usize) -> SolitonConfig {
        three_soliton().truncated(n)
    }
}
