//! Darboux-Crum engine: intertwiners built from seed columns, their iteration,
//! and the closed determinant formulas for the accumulated intertwiner.

use crate::error::{Error, Result};
use crate::numerics::{det_dx, Complex, Mat2, MatN, NumericsError, I};
use crate::spectral::{all_seeds, SolitonConfig};

/// Result of iterating the Darboux step n times at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct IntertwinerState {
    /// L⁽¹⁾ … L⁽ⁿ⁾.
    pub factors: Vec<Mat2>,
    /// The seed matrices H⁽ᵏ⁻¹⁾ each factor was built from.
    pub seed_columns: Vec<Mat2>,
    /// 𝓛⁽ⁿ⁾ = L⁽ⁿ⁾ ⋯ L⁽¹⁾.
    pub accumulated: Mat2,
    /// χₙ = det 𝓛⁽ⁿ⁾.
    pub chi: f64,
}

impl IntertwinerState {
    pub fn level(&self) -> usize {
        self.factors.len()
    }

    pub fn a(&self) -> Complex {
        self.accumulated.m[0][0]
    }
    pub fn b(&self) -> Complex {
        self.accumulated.m[0][1]
    }
    pub fn c(&self) -> Complex {
        self.accumulated.m[1][0]
    }
    pub fn d(&self) -> Complex {
        self.accumulated.m[1][1]
    }
}

/// Ĝ(λ) = −I + λL.
pub fn gauge_factor(l: &Mat2, lambda: Complex) -> Mat2 {
    *l * lambda - Mat2::identity()
}

/// L = H Λ⁻¹ H⁻¹ for seed columns `H` and diagonal `Λ`.
pub fn intertwiner_step(h: &Mat2, lambda: &Mat2) -> Result<Mat2, NumericsError> {
    let (l1, l2) = (lambda.m[0][0], lambda.m[1][1]);
    if l1 == Complex::new(0.0, 0.0) || l2 == Complex::new(0.0, 0.0) {
        return Err(NumericsError::Singular { det: 0.0, threshold: 0.0 });
    }
    let h_inv = h.inverse()?;
    Ok(*h * Mat2::diag(l1.inv(), l2.inv()) * h_inv)
}

/// Iterated Darboux transformation: at level k the columns of H⁽ᵏ⁻¹⁾ are the
/// dressed seeds ψ⁽ᵏ⁻¹⁾(λ₂ₖ₋₁), ψ⁽ᵏ⁻¹⁾(λ₂ₖ), and every remaining seed is
/// dressed by Ĝ⁽ᵏ⁾(λⱼ) = −I + λⱼL⁽ᵏ⁾.
pub fn darboux_iterate(cfg: &SolitonConfig, x: f64, t: f64) -> Result<IntertwinerState> {
    let lams = cfg.spectral_parameters();
    let mut psi = all_seeds(cfg, x, t)?;
    let n = cfg.order();
    let mut factors = Vec::with_capacity(n);
    let mut seed_columns = Vec::with_capacity(n);
    let mut acc = Mat2::identity();
    for k in 0..n {
        let h = Mat2::from_columns(psi[2 * k], psi[2 * k + 1]);
        let lam = Mat2::diag(lams[2 * k], lams[2 * k + 1]);
        let l = intertwiner_step(&h, &lam).map_err(|_| Error::Singular { x, t, level: Some(k + 1) })?;
        for j in (2 * k + 2)..psi.len() {
            psi[j] = gauge_factor(&l, lams[j]).mul_vec(psi[j]);
        }
        acc = l * acc;
        factors.push(l);
        seed_columns.push(h);
    }
    Ok(IntertwinerState { factors, seed_columns, accumulated: acc, chi: cfg.chi() })
}

/// The five 2n×2n matrices of the closed formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedMatrixKind {
    /// 𝒲ₙ, the common denominator.
    W,
    /// Ωₙ, numerator of 𝓛₁₁.
    Omega,
    /// 𝒰ₙ, numerator of 𝓛₁₂.
    U,
    /// 𝒱ₙ, numerator of 𝓛₂₁.
    V,
    /// Υₙ, numerator of 𝓛₂₂.
    Upsilon,
}

impl SeedMatrixKind {
    pub const ALL: [SeedMatrixKind; 5] =
        [SeedMatrixKind::W, SeedMatrixKind::Omega, SeedMatrixKind::U, SeedMatrixKind::V, SeedMatrixKind::Upsilon];

    /// Power of λᵢ and seed component (0 = φ, 1 = ϕ) in column `j` (1-based).
    fn entry(self, n: usize, j: usize) -> (i32, usize) {
        let (n, j) = (n as i32, j as i32);
        match self {
            SeedMatrixKind::W if j <= n => (n + 1 - j, 0),
            SeedMatrixKind::W => (2 * n + 1 - j, 1),
            SeedMatrixKind::Omega if j <= n => (j - 1, 0),
            SeedMatrixKind::Omega => (j - n, 1),
            SeedMatrixKind::Upsilon if j <= n => (j, 0),
            SeedMatrixKind::Upsilon => (j - n - 1, 1),
            SeedMatrixKind::U if j >= n => (2 * n - j, 0),
            SeedMatrixKind::U => (n - j, 1),
            SeedMatrixKind::V if j <= n + 1 => (j - 1, 1),
            SeedMatrixKind::V => (j - n - 1, 0),
        }
    }
}

/// A seed matrix together with its entrywise x-derivative.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedMatrix {
    pub value: MatN,
    pub dx: MatN,
}

/// Assembles one of the five seed matrices at (x,t). Row i uses λᵢ and ψᵢ;
/// since ∂ₓφᵢ = iλᵢφᵢ and ∂ₓϕᵢ = −iλᵢϕᵢ the derivative is exact.
pub fn seed_matrix(kind: SeedMatrixKind, cfg: &SolitonConfig, x: f64, t: f64) -> Result<SeedMatrix> {
    let seeds = all_seeds(cfg, x, t)?;
    Ok(assemble(kind, cfg.order(), &cfg.spectral_parameters(), &seeds))
}

fn assemble(kind: SeedMatrixKind, n: usize, lams: &[Complex], seeds: &[[Complex; 2]]) -> SeedMatrix {
    let dim = 2 * n;
    let mut value = MatN::identity(dim);
    let mut dx = MatN::identity(dim);
    for i in 0..dim {
        let lam = lams[i];
        for j in 1..=dim {
            let (p, comp) = kind.entry(n, j);
            let v = lam.powi(p) * seeds[i][comp];
            let rate = if comp == 0 { I * lam } else { -I * lam };
            value.set(i, j - 1, v);
            dx.set(i, j - 1, v * rate);
        }
    }
    SeedMatrix { value, dx }
}

/// 𝓛⁽ⁿ⁾ and its x-derivative from the closed determinant formulas.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LgenJet {
    pub value: Mat2,
    pub dx: Mat2,
    /// Cancellation factor of each derivative entry: the sum of the moduli of
    /// the two terms in (detₓ·det𝒲 − det·det𝒲ₓ) over the modulus of the result.
    pub dx_cancellation: [[f64; 2]; 2],
}

/// det 𝒲ₙ is treated as vanishing below this fraction of its Hadamard bound.
pub const DENOMINATOR_THRESHOLD: f64 = 1e-13;

fn check_denominator(w: &MatN, det_w: Complex, x: f64, t: f64) -> Result<()> {
    if !(det_w.norm() > DENOMINATOR_THRESHOLD * w.hadamard_bound()) || !det_w.is_finite() {
        return Err(Error::Singular { x, t, level: None });
    }
    Ok(())
}

/// 𝓛⁽ⁿ⁾ = [[detΩ, det𝒰], [det𝒱, detΥ]] / det𝒲.
pub fn lgen_closed(cfg: &SolitonConfig, x: f64, t: f64) -> Result<Mat2> {
    let lams = cfg.spectral_parameters();
    let seeds = all_seeds(cfg, x, t)?;
    let n = cfg.order();
    let dets: Vec<Complex> = SeedMatrixKind::ALL.iter().map(|&k| assemble(k, n, &lams, &seeds).value.det()).collect();
    let w = assemble(SeedMatrixKind::W, n, &lams, &seeds).value;
    check_denominator(&w, dets[0], x, t)?;
    let inv = dets[0].inv();
    Ok(Mat2::new(dets[1] * inv, dets[2] * inv, dets[3] * inv, dets[4] * inv))
}

impl LgenJet {
    /// x-derivatives with each entry taken from whichever of two equal
    /// expressions is less affected by cancellation. The identities
    /// AₓD = BCₓ and ADₓ = BₓC pair the entries as Aₓ ↔ CₓB/D and
    /// Bₓ ↔ DₓA/C.
    pub fn conditioned_dx(&self) -> Mat2 {
        let [[a, b], [c, d]] = self.value.m;
        let [[ax, bx], [cx, dx]] = self.dx.m;
        let [[ka, kb], [kc, kd]] = self.dx_cancellation;
        let pick = |own: Complex, k_own: f64, alt: Complex, k_alt: f64| {
            if k_own <= k_alt || !alt.is_finite() {
                own
            } else {
                alt
            }
        };
        Mat2::new(
            pick(ax, ka, cx * b / d, kc),
            pick(bx, kb, dx * a / c, kd),
            pick(cx, kc, ax * d / b, ka),
            pick(dx, kd, bx * c / a, kb),
        )
    }
}

/// [`lgen_closed`] together with the exact x-derivative of every entry.
pub fn lgen_with_dx(cfg: &SolitonConfig, x: f64, t: f64) -> Result<LgenJet> {
    let lams = cfg.spectral_parameters();
    let seeds = all_seeds(cfg, x, t)?;
    let n = cfg.order();
    let mut vals = [Complex::new(0.0, 0.0); 5];
    let mut ders = [Complex::new(0.0, 0.0); 5];
    let mut w_mat = None;
    for (k, &kind) in SeedMatrixKind::ALL.iter().enumerate() {
        let m = assemble(kind, n, &lams, &seeds);
        vals[k] = m.value.det();
        ders[k] = det_dx(&m.value, &m.dx)?;
        if kind == SeedMatrixKind::W {
            w_mat = Some(m.value);
        }
    }
    check_denominator(&w_mat.expect("W is assembled first"), vals[0], x, t)?;
    let (w, wx) = (vals[0], ders[0]);
    let ratio = |k: usize| vals[k] / w;
    let ratio_dx = |k: usize| (ders[k] - vals[k] * wx / w) / w;
    let cancel = |k: usize| {
        let (a, b) = (ders[k], vals[k] * wx / w);
        (a.norm() + b.norm()) / (a - b).norm()
    };
    Ok(LgenJet {
        value: Mat2::new(ratio(1), ratio(2), ratio(3), ratio(4)),
        dx: Mat2::new(ratio_dx(1), ratio_dx(2), ratio_dx(3), ratio_dx(4)),
        dx_cancellation: [[cancel(1), cancel(2)], [cancel(3), cancel(4)]],
    })
}

/// Normalized defect of the identities AₓD − BCₓ = 0 and ADₓ − BₓC = 0:
/// the larger modulus divided by max(|A|,|B|,|C|,|D|)² · max|λ|.
pub fn ab_identity_defect(jet: &LgenJet, scale: f64) -> f64 {
    let [[a, b], [c, d]] = jet.value.m;
    let [[ax, bx], [cx, dx]] = jet.dx.m;
    let e1 = (ax * d - b * cx).norm();
    let e2 = (a * dx - bx * c).norm();
    let norm = jet.value.max_abs().powi(2) * scale;
    if norm == 0.0 {
        return 0.0;
    }
    e1.max(e2) / norm
}

/// Largest |λ| of a configuration, the natural scale of x-derivatives.
pub fn derivative_scale(cfg: &SolitonConfig) -> f64 {
    cfg.lambdas.iter().map(|l| l.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{fd_derivative, StencilSpec};
    use crate::spectral::presets;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    fn basic_one() -> SolitonConfig {
        SolitonConfig::new(vec![c(0.3, 0.0)], vec![c(0.0, 0.0); 2], 1.0, 1.2, 0.2)
    }

    #[test]
    fn identity_columns() {
        let l = intertwiner_step(&Mat2::identity(), &Mat2::diag(c(2.0, 0.0), c(2.0, 0.0))).unwrap();
        assert!(l.max_abs_diff(&(Mat2::identity() * 0.5)) < 1e-15);
    }

    #[test]
    fn step_determinant() {
        let h = Mat2::new(c(1.0, 0.3), c(-0.2, 0.5), c(0.7, -1.0), c(2.0, 0.1));
        let (l1, l2) = (c(0.4, -0.3), c(-0.4, -0.3));
        let l = intertwiner_step(&h, &Mat2::diag(l1, l2)).unwrap();
        assert!((l.det() - (l1 * l2).inv()).norm() < 1e-12);
    }

    #[test]
    fn singular_columns_are_rejected() {
        let h = Mat2::new(c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0), c(2.0, 0.0));
        assert!(intertwiner_step(&h, &Mat2::diag(c(1.0, 0.0), c(2.0, 0.0))).is_err());
    }

    #[test]
    fn first_intertwiner_at_origin() {
        // H = [[1, -1], [1, 1]], Λ = diag(λ, -λ*) with λ = 0.3
        let cfg = basic_one();
        let state = darboux_iterate(&cfg, 0.0, 0.0).unwrap();
        let h = Mat2::new(c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0));
        let lam = Mat2::diag(c(0.3, 0.0), c(-0.3, 0.0));
        let direct = h * lam.inverse().unwrap() * h.inverse().unwrap();
        assert!(state.accumulated.max_abs_diff(&direct) < 1e-14);
        // 𝓛 = [[0, 1/0.3], [1/0.3, 0]]
        let expect = Mat2::new(c(0.0, 0.0), c(1.0 / 0.3, 0.0), c(1.0 / 0.3, 0.0), c(0.0, 0.0));
        assert!(state.accumulated.max_abs_diff(&expect) < 1e-13);
        let closed = lgen_closed(&cfg, 0.0, 0.0).unwrap();
        assert!(closed.max_abs_diff(&expect) < 1e-13);
    }

    #[test]
    fn printed_level_one_layouts() {
        let cfg = presets::soliton_family(1);
        let lams = cfg.spectral_parameters();
        let s = all_seeds(&cfg, 0.2, 0.1).unwrap();
        let get = |k| seed_matrix(k, &cfg, 0.2, 0.1).unwrap().value;
        let rows = |f: &dyn Fn(usize) -> [Complex; 2]| MatN::new(2, vec![f(0)[0], f(0)[1], f(1)[0], f(1)[1]]).unwrap();
        assert_eq!(get(SeedMatrixKind::W), rows(&|i| [lams[i] * s[i][0], lams[i] * s[i][1]]));
        assert_eq!(get(SeedMatrixKind::Omega), rows(&|i| [s[i][0], lams[i] * s[i][1]]));
        assert_eq!(get(SeedMatrixKind::Upsilon), rows(&|i| [lams[i] * s[i][0], s[i][1]]));
        assert_eq!(get(SeedMatrixKind::U), rows(&|i| [lams[i] * s[i][0], s[i][0]]));
        assert_eq!(get(SeedMatrixKind::V), rows(&|i| [s[i][1], lams[i] * s[i][1]]));
    }

    #[test]
    fn printed_level_two_layouts() {
        let cfg = presets::two_soliton();
        let lams = cfg.spectral_parameters();
        let s = all_seeds(&cfg, -0.4, 0.9).unwrap();
        let check = |kind, row: &dyn Fn(Complex, Complex, Complex) -> [Complex; 4]| {
            let m = seed_matrix(kind, &cfg, -0.4, 0.9).unwrap().value;
            for i in 0..4 {
                let expect = row(lams[i], s[i][0], s[i][1]);
                for j in 0..4 {
                    assert_eq!(m.get(i, j), expect[j], "{kind:?} ({i},{j})");
                }
            }
        };
        check(SeedMatrixKind::W, &|l, f, p| [l * l * f, l * f, l * l * p, l * p]);
        check(SeedMatrixKind::Omega, &|l, f, p| [f, l * f, l * p, l * l * p]);
        check(SeedMatrixKind::Upsilon, &|l, f, p| [l * f, l * l * f, p, l * p]);
        check(SeedMatrixKind::U, &|l, f, p| [l * p, l * l * f, l * f, f]);
        check(SeedMatrixKind::V, &|l, f, p| [p, l * p, l * l * p, l * f]);
    }

    #[test]
    fn two_soliton_determinant_is_chi() {
        let cfg = presets::two_soliton();
        let state = darboux_iterate(&cfg, 0.5, 3.0).unwrap();
        let expect = 1.0 / (c(0.4, -0.3).norm_sqr() * c(0.7, 0.5).norm_sqr());
        assert!((state.accumulated.det() - expect).norm() < 1e-9 * expect);
    }

    #[test]
    fn closed_matches_iteration_on_family() {
        for n in 1..=3 {
            let cfg = presets::soliton_family(n);
            for &(x, t) in &[(-1.0, 3.0), (0.5, 3.0), (2.2, -1.3), (0.0, 0.0)] {
                let it = darboux_iterate(&cfg, x, t).unwrap().accumulated;
                let cl = lgen_closed(&cfg, x, t).unwrap();
                let scale = it.max_abs();
                assert!(it.max_abs_diff(&cl) < 1e-9 * scale, "n={n} at ({x},{t})");
            }
        }
    }

    #[test]
    fn factor_determinants_and_dressing() {
        let cfg = presets::soliton_family(3);
        let lams = cfg.spectral_parameters();
        let state = darboux_iterate(&cfg, 0.7, -0.4).unwrap();
        for (k, (l, h)) in state.factors.iter().zip(&state.seed_columns).enumerate() {
            let expect = (lams[2 * k] * lams[2 * k + 1]).inv();
            assert!((l.det() - expect).norm() < 1e-9 * expect.norm());
            for col in 0..2 {
                let psi = h.column(col);
                let killed = gauge_factor(l, lams[2 * k + col]).mul_vec(psi);
                let scale = psi[0].norm().max(psi[1].norm());
                assert!(killed[0].norm().max(killed[1].norm()) < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn closed_determinant_relation_at_level_one() {
        let cfg = presets::soliton_family(1);
        for &(x, t) in &[(0.1, 0.2), (-2.0, 1.0), (3.0, -0.5)] {
            let d = |k| seed_matrix(k, &cfg, x, t).unwrap().value.det();
            let lhs = d(SeedMatrixKind::Omega) * d(SeedMatrixKind::Upsilon) - d(SeedMatrixKind::U) * d(SeedMatrixKind::V);
            let rhs = d(SeedMatrixKind::W).powi(2) * cfg.chi();
            assert!((lhs - rhs).norm() < 1e-10 * rhs.norm());
        }
    }

    #[test]
    fn lgen_dx_matches_fd() {
        let cfg = presets::two_soliton();
        let (x0, t0) = (0.3, 1.1);
        let jet = lgen_with_dx(&cfg, x0, t0).unwrap();
        let fd = fd_derivative(|x| lgen_closed(&cfg, x, t0).unwrap(), x0, &StencilSpec::default()).unwrap();
        assert!(jet.dx.max_abs_diff(&fd) < 1e-8 * jet.dx.max_abs().max(1.0));
    }

    #[test]
    fn constant_state_has_zero_defect() {
        let jet = LgenJet { value: Mat2::new(c(1.0, 2.0), c(3.0, 0.0), c(0.5, 0.5), c(-1.0, 0.0)), dx: Mat2::zero(), dx_cancellation: [[1.0; 2]; 2] };
        assert_eq!(ab_identity_defect(&jet, 1.0), 0.0);
    }

    #[test]
    fn ab_identity_on_family() {
        for n in 1..=2 {
            let cfg = presets::soliton_family(n);
            let jet = lgen_with_dx(&cfg, 0.8, -0.6).unwrap();
            assert!(ab_identity_defect(&jet, derivative_scale(&cfg)) < 1e-7);
        }
    }
}
