//! Nonlocal multi-soliton solutions (u, v, ω) of the extended continuous
//! Heisenberg equation and their residual checks.

use crate::darboux::{darboux_iterate, lgen_closed};
use crate::error::{Error, Result};
use crate::numerics::{abs_product, Complex, Mat2, StencilSpec, I};
use crate::residual::{point_derivatives, relative, GridSpec, ResidualReport};
use crate::spectral::{all_seeds, xi, SolitonConfig, OVERFLOW_GUARD};

/// Field values at one point. ω is stored as its deviation from the vacuum,
/// `delta_omega = ω − 1`, which keeps full relative precision in the tails.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EchFieldPoint {
    pub u: Complex,
    pub v: Complex,
    pub delta_omega: Complex,
}

impl EchFieldPoint {
    pub fn vacuum() -> Self {
        let z = Complex::new(0.0, 0.0);
        EchFieldPoint { u: z, v: z, delta_omega: z }
    }

    pub fn omega(&self) -> Complex {
        self.delta_omega + 1.0
    }

    /// |ω² + uv − 1|, evaluated as |δω(2 + δω) + uv|.
    pub fn constraint_defect(&self) -> f64 {
        (self.delta_omega * (self.delta_omega + 2.0) + self.u * self.v).norm()
    }

    /// S = [[−ω, u], [v, ω]].
    pub fn s_matrix(&self) -> Mat2 {
        Mat2::new(-self.omega(), self.u, self.v, self.omega())
    }

    /// S + σ₃ = [[−δω, u], [v, δω]].
    pub fn s_deviation(&self) -> Mat2 {
        Mat2::new(-self.delta_omega, self.u, self.v, self.delta_omega)
    }

    fn as_array(&self) -> [Complex; 3] {
        [self.u, self.v, self.delta_omega]
    }

    fn from_array(a: [Complex; 3]) -> Self {
        EchFieldPoint { u: a[0], v: a[1], delta_omega: a[2] }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|z| z.is_finite())
    }
}

/// u = 2AB/χ, v = −2CD/χ, ω = 1 + 2BC/χ (equal to (AD + BC)/χ since AD − BC = χ).
pub fn fields_from_intertwiner(l: &Mat2, chi: f64) -> EchFieldPoint {
    let [[a, b], [c, d]] = l.m;
    EchFieldPoint { u: a * b * (2.0 / chi), v: -c * d * (2.0 / chi), delta_omega: b * c * (2.0 / chi) }
}

fn finite_or_singular(p: EchFieldPoint, x: f64, t: f64) -> Result<EchFieldPoint> {
    if p.is_finite() {
        Ok(p)
    } else {
        Err(Error::Singular { x, t, level: None })
    }
}

/// Order-n solution from the closed determinant formulas.
pub fn ech_solution(cfg: &SolitonConfig, x: f64, t: f64) -> Result<EchFieldPoint> {
    let l = lgen_closed(cfg, x, t)?;
    finite_or_singular(fields_from_intertwiner(&l, cfg.chi()), x, t)
}

/// Order-n solution from the iterated Darboux product.
pub fn ech_solution_iterated(cfg: &SolitonConfig, x: f64, t: f64) -> Result<EchFieldPoint> {
    let state = darboux_iterate(cfg, x, t)?;
    finite_or_singular(fields_from_intertwiner(&state.accumulated, state.chi), x, t)
}

fn require_order(cfg: &SolitonConfig, n: usize) -> Result<()> {
    if cfg.order() != n || cfg.gammas.len() != 2 * n {
        return Err(Error::Degenerate(format!("expected an order-{n} configuration, got order {}", cfg.order())));
    }
    Ok(())
}

fn guarded(z: Complex, x: f64, t: f64) -> Result<Complex> {
    if z.re > OVERFLOW_GUARD {
        return Err(Error::Overflow { seed: 0, exponent: z.re, x, t });
    }
    Ok(z.exp())
}

/// Explicit one-soliton in exponential form.
pub fn one_soliton_closed(cfg: &SolitonConfig, x: f64, t: f64) -> Result<EchFieldPoint> {
    require_order(cfg, 1)?;
    let l = cfg.lambdas[0];
    let (g1, g2) = (cfg.gammas[0], cfg.gammas[1]);
    let k = cfg.kappa;
    let e = xi(l, x, t, cfg.alpha, cfg.delta);
    let et = xi(l, -x, t, cfg.alpha, cfg.delta).conj();
    let p = guarded(e + et + 2.0 * g1.re, x, t)?;
    let m = guarded(-e - et + 2.0 * g2.re, x, t)? * k;
    let sum = p + m;
    if sum.norm() <= 1e-12 * (p.norm() + m.norm()) {
        return Err(Error::Singular { x, t, level: None });
    }
    let den = sum * sum * l.norm_sqr();
    let big_e = (2.0 * g1.re + 2.0 * g2.re).exp();
    let a = l.re;
    let u = (guarded(-2.0 * et - g1.conj() + g2.conj(), x, t)? * (k * l) - guarded(2.0 * e + g1 - g2, x, t)? * l.conj())
        * (4.0 * k * a * big_e)
        / den;
    let v = (guarded(-2.0 * e - g1 + g2, x, t)? * (k * l.conj()) - guarded(2.0 * et + g1.conj() - g2.conj(), x, t)? * l)
        * (4.0 * a * big_e)
        / den;
    let delta_omega = -Complex::new(8.0 * k * a * a * big_e, 0.0) / den;
    finite_or_singular(EchFieldPoint { u, v, delta_omega }, x, t)
}

/// Explicit two-soliton from the Γ, R, T, L, K shorthand sums; ω from the
/// intertwiner entries.
pub fn two_soliton_closed(cfg: &SolitonConfig, x: f64, t: f64) -> Result<EchFieldPoint> {
    require_order(cfg, 2)?;
    let seeds = all_seeds(cfg, x, t)?;
    let lams = cfg.spectral_parameters();
    // 1-based accessors
    let lam = |i: usize| lams[i - 1];
    let f = |i: usize| seeds[i - 1][0];
    let p = |i: usize| seeds[i - 1][1];
    let gamma = |[i, j, k, l]: [usize; 4]| (lam(i) - lam(j)) * (lam(k) - lam(l)) * f(i) * f(j) * p(k) * p(l);
    let r = |idx: [usize; 4]| lam(idx[2]) * lam(idx[3]) * gamma(idx);
    let tt = |idx: [usize; 4]| lam(idx[0]) * lam(idx[1]) * gamma(idx);
    let vand = |j: usize, k: usize, l: usize| (lam(j) - lam(k)) * (lam(j) - lam(l)) * (lam(k) - lam(l));
    let ll = |[i, j, k, l]: [usize; 4]| lam(i) * vand(j, k, l) * p(i) * f(j) * f(k) * f(l);
    let kk = |[i, j, k, l]: [usize; 4]| lam(i) * vand(j, k, l) * f(i) * p(j) * p(k) * p(l);

    const GAMMA_TERMS: [[usize; 4]; 6] = [[1, 2, 3, 4], [1, 3, 4, 2], [1, 4, 2, 3], [2, 3, 1, 4], [3, 4, 1, 2], [4, 2, 1, 3]];
    const RT_TERMS: [[usize; 4]; 6] = [[1, 2, 3, 4], [1, 3, 4, 2], [1, 4, 2, 3], [2, 3, 1, 4], [2, 4, 3, 1], [3, 4, 1, 2]];

    let terms: Vec<Complex> = GAMMA_TERMS.iter().map(|&i| gamma(i)).collect();
    let gsum: Complex = terms.iter().sum();
    if gsum.norm() <= 1e-12 * terms.iter().map(|z| z.norm()).sum::<f64>() {
        return Err(Error::Singular { x, t, level: None });
    }
    let rsum: Complex = RT_TERMS.iter().map(|&i| r(i)).sum();
    let tsum: Complex = RT_TERMS.iter().map(|&i| tt(i)).sum();
    let lsum = ll([1, 2, 3, 4]) - ll([2, 1, 3, 4]) + ll([3, 1, 2, 4]) - ll([4, 1, 2, 3]);
    let ksum = kk([2, 1, 3, 4]) - kk([1, 2, 3, 4]) + kk([4, 1, 2, 3]) - kk([3, 1, 2, 4]);
    let denom = lam(1) * lam(2) * lam(3) * lam(4) * gsum * gsum;
    let u = lsum * rsum * 2.0 / denom;
    let v = ksum * tsum * 2.0 / denom;
    let l = lgen_closed(cfg, x, t)?;
    let delta_omega = l.m[0][1] * l.m[1][0] * (2.0 / cfg.chi());
    finite_or_singular(EchFieldPoint { u, v, delta_omega }, x, t)
}

/// Residual reports for the two component equations.
#[derive(Clone, Debug, PartialEq)]
pub struct EchResidual {
    pub uv1: ResidualReport,
    pub uv2: ResidualReport,
}

/// Relative residuals of
/// uₜ = iα(uω_xx − ωu_xx) − β[u_xxx + 3/2(u_x(u_xv_x + ω_x²) + u(u_xxv_x + u_xv_xx + 2ω_xω_xx))]
/// and its partner obtained by α → −α, u ↔ v.
pub fn ech_residual(
    sampler: impl Fn(f64, f64) -> Option<EchFieldPoint> + Sync,
    alpha: f64,
    beta: Complex,
    grid: &GridSpec,
    stencil: &StencilSpec,
) -> EchResidual {
    let f = |x: f64, t: f64| sampler(x, t).map(|p| p.as_array());
    let samples = crate::residual::evaluate_grid(grid, |x, t| {
        let d = point_derivatives(&f, x, t, stencil)?;
        let (j, dt) = (d.x, d.dt);
        let p = EchFieldPoint::from_array(j.value);
        let w = p.omega();
        let (wx, wxx) = (j.d1[2], j.d2[2]);
        let one = |s: usize, o: usize, sign: f64| -> f64 {
            // s: the evolving field, o: its partner
            let (a, ax, axx, axxx) = (j.value[s], j.d1[s], j.d2[s], j.d3[s]);
            let (bx, bxx) = (j.d1[o], j.d2[o]);
            let ia = I * alpha * sign;
            let terms = [
                dt[s],
                -ia * a * wxx,
                ia * w * axx,
                beta * axxx,
                beta * 1.5 * ax * ax * bx,
                beta * 1.5 * ax * wx * wx,
                beta * 1.5 * a * axx * bx,
                beta * 1.5 * a * ax * bxx,
                beta * 3.0 * a * wx * wxx,
            ];
            let eq: Complex = terms.iter().sum();
            relative(eq.norm(), terms.iter().map(|z| z.norm()))
        };
        Some((one(0, 1, 1.0), one(1, 0, -1.0)))
    });
    let uv1: Vec<Option<f64>> = samples.iter().map(|s| s.map(|v| v.0)).collect();
    let uv2: Vec<Option<f64>> = samples.iter().map(|s| s.map(|v| v.1)).collect();
    EchResidual {
        uv1: ResidualReport::from_samples("uv1", grid, Some(*stencil), &uv1),
        uv2: ResidualReport::from_samples("uv2", grid, Some(*stencil), &uv2),
    }
}

/// Relative residual of the matrix equation
/// Sₜ = iα(Sₓ² + SSₓₓ) − β[3/2(SₓSₓ² + SSₓₓSₓ + SSₓSₓₓ) + Sₓₓₓ],
/// maximized over the four entries. Each entry is normalized by the sum of
/// moduli of all scalar products contributing to it.
pub fn st_residual(
    sampler: impl Fn(f64, f64) -> Option<EchFieldPoint> + Sync,
    alpha: f64,
    beta: Complex,
    grid: &GridSpec,
    stencil: &StencilSpec,
) -> ResidualReport {
    // differentiate S + σ₃, which carries full relative precision
    let f = |x: f64, t: f64| sampler(x, t).map(|p| p.s_deviation());
    ResidualReport::evaluate("St", grid, Some(*stencil), |x, t| {
        let d = point_derivatives(&f, x, t, stencil)?;
        let j = d.x;
        let s = j.value - crate::numerics::pauli(3);
        let (sx, sxx, sxxx) = (j.d1, j.d2, j.d3);
        let ia = I * alpha;
        let terms = [
            d.dt,
            -(sx * sx * ia),
            -(s * sxx * ia),
            sx * sx * sx * (beta * 1.5),
            s * sxx * sx * (beta * 1.5),
            s * sx * sxx * (beta * 1.5),
            sxxx * beta,
        ];
        let (sa, sxa, sxxa, sxxxa) = (s.abs(), sx.abs(), sxx.abs(), sxxx.abs());
        let (al, be) = (alpha.abs(), beta.norm());
        let bounds = [
            d.dt.abs(),
            scale(abs_product(&sxa, &sxa), al),
            scale(abs_product(&sa, &sxxa), al),
            scale(abs_product(&abs_product(&sxa, &sxa), &sxa), 1.5 * be),
            scale(abs_product(&abs_product(&sa, &sxxa), &sxa), 1.5 * be),
            scale(abs_product(&abs_product(&sa, &sxa), &sxxa), 1.5 * be),
            scale(sxxxa, be),
        ];
        let eq = terms.iter().fold(Mat2::zero(), |acc, m| acc + *m);
        let mut worst: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                let rel = relative(eq.m[r][c].norm(), bounds.iter().map(|b| b[r][c]));
                worst = worst.max(rel);
            }
        }
        Some(worst)
    })
}

fn scale(m: [[f64; 2]; 2], s: f64) -> [[f64; 2]; 2] {
    m.map(|row| row.map(|v| v * s))
}

/// Nonlocality defects of a sampled solution.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlocalityDefects {
    /// max |u(x,t) − κ v*(−x,t)|.
    pub u: ResidualReport,
    /// max |ω(x,t) − κ ω*(−x,t)|; diagnostic only.
    pub omega_kappa: ResidualReport,
    /// max |ω(x,t) − ω*(−x,t)|.
    pub omega_conjugate: ResidualReport,
}

pub fn nonlocality_defect_ech(
    sampler: impl Fn(f64, f64) -> Option<EchFieldPoint> + Sync,
    kappa: f64,
    grid: &GridSpec,
) -> NonlocalityDefects {
    let pairs = crate::residual::evaluate_grid(grid, |x, t| Some((sampler(x, t)?, sampler(-x, t)?)));
    let pick = |f: &dyn Fn(&EchFieldPoint, &EchFieldPoint) -> f64| -> Vec<Option<f64>> {
        pairs.iter().map(|p| p.as_ref().map(|(a, b)| f(a, b))).collect()
    };
    let u = pick(&|a, b| (a.u - b.v.conj() * kappa).norm());
    let wk = pick(&|a, b| (a.omega() - b.omega().conj() * kappa).norm());
    let wc = pick(&|a, b| (a.delta_omega - b.delta_omega.conj()).norm());
    NonlocalityDefects {
        u: ResidualReport::from_samples("u-nonlocality", grid, None, &u),
        omega_kappa: ResidualReport::from_samples("omega-kappa-nonlocality", grid, None, &wk),
        omega_conjugate: ResidualReport::from_samples("omega-conjugate-nonlocality", grid, None, &wc),
    }
}

/// max |ω² + uv − 1| over the grid.
pub fn constraint_defect(sampler: impl Fn(f64, f64) -> Option<EchFieldPoint> + Sync, grid: &GridSpec) -> ResidualReport {
    ResidualReport::evaluate("omega^2+uv-1", grid, None, |x, t| sampler(x, t).map(|p| p.constraint_defect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::presets;

    fn c(re: f64, im: f64) -> Complex {
        Complex::new(re, im)
    }

    #[test]
    fn omega_at_origin_example() {
        let cfg = SolitonConfig::new(vec![c(0.3, 0.0)], vec![c(0.0, 0.0); 2], 1.0, 1.2, 0.2);
        let p = ech_solution(&cfg, 0.0, 0.0).unwrap();
        assert!((p.omega() - c(-1.0, 0.0)).norm() < 1e-12);
        let q = one_soliton_closed(&cfg, 0.0, 0.0).unwrap();
        assert!((q.omega() - c(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn closed_forms_match_darboux() {
        let one = presets::soliton_family(1);
        let two = presets::two_soliton();
        for &(x, t) in &[(0.5, 3.0), (-1.2, 0.4), (2.5, -1.0)] {
            let a = ech_solution(&one, x, t).unwrap();
            let b = one_soliton_closed(&one, x, t).unwrap();
            assert!((a.u - b.u).norm() + (a.v - b.v).norm() + (a.delta_omega - b.delta_omega).norm() < 1e-9);
            let a = ech_solution(&two, x, t).unwrap();
            let b = two_soliton_closed(&two, x, t).unwrap();
            let scale = a.u.norm().max(a.v.norm()).max(1.0);
            assert!((a.u - b.u).norm() + (a.v - b.v).norm() < 1e-9 * scale);
        }
    }

    #[test]
    fn iterated_and_closed_agree() {
        let cfg = presets::soliton_family(3);
        let a = ech_solution(&cfg, 0.3, 0.2).unwrap();
        let b = ech_solution_iterated(&cfg, 0.3, 0.2).unwrap();
        assert!((a.u - b.u).norm() < 1e-9 * a.u.norm().max(1.0));
    }

    #[test]
    fn s_squares_to_identity() {
        let cfg = presets::two_soliton();
        let p = ech_solution(&cfg, 0.7, 1.0).unwrap();
        let s = p.s_matrix();
        assert!((s * s).max_abs_diff(&Mat2::identity()) < 1e-10 * s.max_abs().powi(2).max(1.0));
    }

    #[test]
    fn real_parameters_give_conjugate_fields() {
        let cfg = SolitonConfig::new(vec![c(0.6, 0.0)], vec![c(0.3, 0.0), c(-0.2, 0.0)], 1.0, 1.2, 0.2);
        for &(x, t) in &[(0.4, 0.1), (-1.0, 0.7)] {
            let a = ech_solution(&cfg, x, t).unwrap();
            let b = ech_solution(&cfg, -x, t).unwrap();
            assert!((a.v - b.u.conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn negative_kappa_has_singular_points() {
        let cfg = SolitonConfig::new(vec![c(0.5, 0.0)], vec![c(0.0, 0.0); 2], -1.0, 0.0, 0.0);
        // at t = 0 the denominator is e^{2iλx} + κe^{−2iλx}, zero at x = 0 for κ = −1
        assert!(matches!(one_soliton_closed(&cfg, 0.0, 0.0), Err(Error::Singular { .. })));
        assert!(matches!(ech_solution(&cfg, 0.0, 0.0), Err(Error::Singular { .. })));
    }

    #[test]
    fn vacuum_residuals_vanish() {
        let grid = GridSpec::new((-1.0, 1.0, 5), (-1.0, 1.0, 5)).unwrap();
        let spec = StencilSpec::default();
        let vac = |_: f64, _: f64| Some(EchFieldPoint::vacuum());
        let r = ech_residual(vac, 1.2, c(0.0, 0.2), &grid, &spec);
        assert_eq!(r.uv1.max, 0.0);
        assert_eq!(r.uv2.max, 0.0);
        assert_eq!(st_residual(vac, 1.2, c(0.0, 0.2), &grid, &spec).max, 0.0);
    }
}
