//! Check batteries for `verify`, `sweep` and `selftest`.

use nonlocal_soliton::darboux::{ab_identity_defect, darboux_iterate, derivative_scale, lgen_closed, lgen_with_dx};
use nonlocal_soliton::heisenberg::{constraint_defect, ech_residual, ech_solution, nonlocality_defect_ech, st_residual};
use nonlocal_soliton::hirota::{
    bilinear_constraint_check, hirota_from_spectral, hirota_one_soliton_nonlocal, hirota_residual,
    nonlocality_defect_hirota, zero_curvature_residual, ConstraintMode, FnField, HirotaFieldPoint,
    LocalHirotaSoliton, NonlocalHirotaSoliton,
};
use nonlocal_soliton::landau::{
    classify_trajectory, elle_residual, extremum_clusters, nelle_residual, spin_from_ech, spin_from_hirota_local,
    spin_from_hirota_nonlocal, split_ml, trajectory, x_profile, ClassifierSettings, NelleForm, SpinPoint,
    Trajectory, TrajectoryClass,
};
use nonlocal_soliton::residual::{GridSpec, ResidualReport};
use nonlocal_soliton::spectral::presets::{self, LocalSolitonParams};
use nonlocal_soliton::{Complex, SolitonConfig, StencilSpec};

use crate::config::{LocalSpec, NonlocalSpec, System, TrajectorySource, TrajectorySpec};
use crate::report::Check;

pub const CONSTRAINT_TOL: f64 = 1e-10;
pub const NONLOCALITY_TOL: f64 = 1e-10;
pub const PDE_TOL: f64 = 1e-5;
pub const ZC_SPREAD_TOL: f64 = 1e-6;
pub const UNIT_TOL: f64 = 1e-10;
/// Bound on |s·s − 1| / (1 + Σ|sᵢ|²), the attainable double-precision level
/// for spins with large components.
pub const SCALED_UNIT_TOL: f64 = 1e-14;
pub const ELL_TOL: f64 = 1e-5;
pub const NELL_TOL: f64 = 1e-4;
pub const ORACLE_TOL: f64 = 1e-9;
pub const AB_TOL: f64 = 1e-7;
pub const BILINEAR_TOL: f64 = 1e-6;
pub const GENERIC_DEFECT_MIN: f64 = 1e-2;

/// Spectral parameters at which the zero-curvature condition is checked.
pub const ZC_LAMBDAS: [Complex; 3] = [Complex::new(0.7, 0.0), Complex::new(1.0, 0.5), Complex::new(-0.3, 2.0)];

fn renamed(mut r: ResidualReport, label: &str) -> ResidualReport {
    r.equation = format!("{label} {}", r.equation);
    r
}

/// Checks of the requested system(s) for one spectral configuration.
pub fn verify(cfg: &SolitonConfig, system: System, grid: &GridSpec, st: &StencilSpec) -> Vec<Check> {
    let mut out = Vec::new();
    let ech = |x, t| ech_solution(cfg, x, t).ok();
    if system.includes(System::Ech) {
        out.push(Check::from_report("ech", &constraint_defect(ech, grid), CONSTRAINT_TOL));
        out.push(Check::from_report("ech", &nonlocality_defect_ech(ech, cfg.kappa, grid).u, NONLOCALITY_TOL));
        let r = ech_residual(ech, cfg.alpha, cfg.beta(), grid, st);
        out.push(Check::from_report("ech", &r.uv1, PDE_TOL));
        out.push(Check::from_report("ech", &r.uv2, PDE_TOL));
        out.push(Check::from_report("ech", &st_residual(ech, cfg.alpha, cfg.beta(), grid, st), PDE_TOL));
    }
    let hirota = |x, t| hirota_from_spectral(cfg, x, t).ok();
    if system.includes(System::Hirota) {
        let r = hirota_residual(hirota, cfg.alpha, cfg.beta(), grid, st);
        out.push(Check::from_report("hirota", &r.zero1, PDE_TOL));
        out.push(Check::from_report("hirota", &r.zero2, PDE_TOL));
        out.push(Check::from_report("hirota", &nonlocality_defect_hirota(cfg, grid), NONLOCALITY_TOL));
    }
    if system.includes(System::Zerocurv) {
        out.extend(zero_curvature_checks("spectral", hirota, cfg.alpha, cfg.beta(), grid, st));
    }
    if system.includes(System::Elle) {
        let spin = |x, t| ech_solution(cfg, x, t).ok().map(|p| spin_from_ech(&p));
        out.push(unit_check("elle", "s.s-1", grid, spin));
        out.push(Check::from_report("elle", &elle_residual(spin, cfg.alpha, cfg.beta(), grid, st), ELL_TOL));
    }
    if system.includes(System::Nelle) {
        let split = |x, t| split_ml(cfg, x, t).ok();
        let r = ResidualReport::evaluate("m.l", grid, None, |x, t| split(x, t).map(|s| s.orthogonality_defect()));
        out.push(Check::from_report("nelle", &r, UNIT_TOL));
        let r = ResidualReport::evaluate("m.m-l.l-1", grid, None, |x, t| split(x, t).map(|s| s.norm_defect()));
        out.push(Check::from_report("nelle", &r, UNIT_TOL));
        let r = nelle_residual(split, cfg.alpha, cfg.delta, NelleForm::Derived, grid, st);
        out.push(Check::from_report("nelle", &r.m_equation, NELL_TOL));
        out.push(Check::from_report("nelle", &r.l_equation, NELL_TOL));
    }
    out
}

fn unit_check(system: &str, label: &str, grid: &GridSpec, spin: impl Fn(f64, f64) -> Option<SpinPoint> + Sync) -> Check {
    let r = ResidualReport::evaluate(label, grid, None, |x, t| spin(x, t).map(|s| s.unit_defect()));
    Check::from_report(system, &r, UNIT_TOL)
}

fn scaled_unit_check(system: &str, label: &str, grid: &GridSpec, spin: impl Fn(f64, f64) -> Option<SpinPoint> + Sync) -> Check {
    let r = ResidualReport::evaluate(label, grid, None, |x, t| {
        spin(x, t).map(|s| s.unit_defect() / (1.0 + s.s.iter().map(|z| z.norm_sqr()).sum::<f64>()))
    });
    Check::from_report(system, &r, SCALED_UNIT_TOL)
}

/// Zero-curvature residual at each of [`ZC_LAMBDAS`] and the spread of the
/// grid maxima over them.
pub fn zero_curvature_checks(
    label: &str,
    sampler: impl Fn(f64, f64) -> Option<HirotaFieldPoint> + Sync,
    alpha: f64,
    beta: Complex,
    grid: &GridSpec,
    st: &StencilSpec,
) -> Vec<Check> {
    let mut out = Vec::new();
    let mut maxima = Vec::new();
    for &l in &ZC_LAMBDAS {
        let r = zero_curvature_residual(&sampler, alpha, beta, l, grid, st);
        maxima.push(r.max);
        out.push(Check::from_report("zerocurv", &renamed(r, label), PDE_TOL));
    }
    let hi = maxima.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = maxima.iter().cloned().fold(f64::INFINITY, f64::min);
    out.push(Check::below("zerocurv", format!("{label} ZC spread over lambda"), hi - lo, ZC_SPREAD_TOL));
    out
}

/// Spin sampler for a trajectory source.
pub fn spin_source(
    source: TrajectorySource,
    cfg: &SolitonConfig,
    local: &LocalSpec,
    nonlocal: &NonlocalSpec,
) -> anyhow::Result<Box<dyn Fn(f64, f64) -> Option<SpinPoint> + Sync>> {
    Ok(match source {
        TrajectorySource::Spectral => {
            let cfg = cfg.clone();
            Box::new(move |x, t| {
                split_ml(&cfg, x, t).ok().map(|s| SpinPoint::new(Complex::new(s.m[0], s.l[0]), Complex::new(s.m[1], s.l[1]), Complex::new(s.m[2], s.l[2])))
            })
        }
        TrajectorySource::Local => {
            let q = local.soliton()?;
            Box::new(move |x, t| spin_from_hirota_local(&q, q.kappa, x, t).ok())
        }
        TrajectorySource::Nonlocal => {
            let q = nonlocal.soliton()?;
            Box::new(move |x, t| spin_from_hirota_nonlocal(&q, q.kappa, x, t).ok())
        }
    })
}

pub fn run_trajectory(
    spec: &TrajectorySpec,
    cfg: &SolitonConfig,
    local: &LocalSpec,
    nonlocal: &NonlocalSpec,
) -> anyhow::Result<(Trajectory, TrajectoryClass)> {
    let sampler = spin_source(spec.source, cfg, local, nonlocal)?;
    let tr = trajectory(sampler, spec.x0, (spec.t_range[0], spec.t_range[1]), spec.samples);
    let class = classify_trajectory(&tr, &ClassifierSettings::default());
    Ok((tr, class))
}

fn local_soliton(p: LocalSolitonParams) -> LocalHirotaSoliton {
    LocalHirotaSoliton::new(p.mu, p.gamma, p.alpha, p.beta).expect("preset parameters are valid")
}

fn nonlocal_reference_soliton() -> NonlocalHirotaSoliton {
    let p = presets::nonlocal_reference();
    NonlocalHirotaSoliton::new(p.mu, p.gamma, p.alpha, p.delta).expect("preset parameters are valid")
}

fn local_trajectory(p: LocalSolitonParams, x0: f64, t_range: (f64, f64)) -> Trajectory {
    let q = local_soliton(p);
    trajectory(|x, t| spin_from_hirota_local(&q, q.kappa, x, t).ok(), x0, t_range, 20001)
}

fn class_check(label: &str, tr: &Trajectory, expected: &str) -> Check {
    let settings = ClassifierSettings::default();
    let class = classify_trajectory(tr, &settings);
    let start = tr.points.iter().find(|p| !p.singular).map_or(f64::NAN, |p| p.magnitude());
    let check = match class {
        TrajectoryClass::Recurrent { distance, .. } if expected == "recurrent" => {
            Check::below("trajectory", format!("{label} return distance"), distance, settings.recurrence_tolerance)
        }
        TrajectoryClass::DecayingToFixedPoint { terminal_speed } if expected == "decaying_to_fixed_point" => {
            Check::below("trajectory", format!("{label} terminal speed"), terminal_speed, settings.speed_tolerance)
        }
        TrajectoryClass::Bounded { max_magnitude } if expected == "bounded" => {
            let limit = settings.growth_factor * start;
            Check::below("trajectory", format!("{label} max(|m|,|l|) vs growth limit"), max_magnitude, limit)
        }
        other => {
            let mut c = Check::below("trajectory", format!("{label} classification"), f64::NAN, 0.0);
            c.passed = other.name() == expected;
            c
        }
    };
    check.with_detail(format!("expected {expected}, got {}", class.name()))
}

/// The built-in reference parameter sets, end to end.
pub fn selftest() -> Vec<Check> {
    let g = GridSpec::default();
    let small = GridSpec::new((-5.0, 5.0, 21), (-2.0, 2.0, 21)).expect("valid grid");
    let st = StencilSpec::default();
    let mut out = Vec::new();

    // Darboux iteration against the determinant formulas
    let (mut entry, mut det) = (0.0_f64, 0.0_f64);
    for n in 1..=3 {
        let cfg = presets::soliton_family(n);
        for (x, t) in small.points() {
            let (Ok(state), Ok(closed)) = (darboux_iterate(&cfg, x, t), lgen_closed(&cfg, x, t)) else { continue };
            let it = state.accumulated;
            entry = entry.max(it.max_abs_diff(&closed) / it.max_abs());
            det = det.max((it.det() - cfg.chi()).norm() / cfg.chi().abs());
        }
    }
    out.push(Check::below("darboux", format!("iterated vs closed intertwiner, n=1..3 on {small}"), entry, ORACLE_TOL));
    out.push(Check::below("darboux", format!("det L - chi, n=1..3 on {small}"), det, ORACLE_TOL));

    for n in 1..=3 {
        let cfg = presets::soliton_family(n);
        let s = |x, t| ech_solution(&cfg, x, t).ok();
        out.push(Check::from_report("ech", &renamed(constraint_defect(s, &g), &format!("n={n}")), CONSTRAINT_TOL));
        out.push(Check::from_report("ech", &renamed(nonlocality_defect_ech(s, cfg.kappa, &g).u, &format!("n={n}")), NONLOCALITY_TOL));
        out.push(Check::from_report("hirota", &renamed(nonlocality_defect_hirota(&cfg, &g), &format!("n={n}")), NONLOCALITY_TOL));
    }

    let cfg = presets::two_soliton();
    let s = |x, t| ech_solution(&cfg, x, t).ok();
    let r = ech_residual(s, cfg.alpha, cfg.beta(), &g, &st);
    out.push(Check::from_report("ech", &renamed(r.uv1, "two-soliton"), PDE_TOL));
    out.push(Check::from_report("ech", &renamed(r.uv2, "two-soliton"), PDE_TOL));
    out.push(Check::from_report("ech", &renamed(st_residual(s, cfg.alpha, cfg.beta(), &g, &st), "two-soliton"), PDE_TOL));
    let r = hirota_residual(|x, t| hirota_from_spectral(&cfg, x, t).ok(), cfg.alpha, cfg.beta(), &g, &st);
    out.push(Check::from_report("hirota", &renamed(r.zero1, "two-soliton spectral"), PDE_TOL));
    out.push(Check::from_report("hirota", &renamed(r.zero2, "two-soliton spectral"), PDE_TOL));
    let scale = derivative_scale(&cfg);
    let r = ResidualReport::evaluate("two-soliton AB identity", &small, None, |x, t| {
        lgen_with_dx(&cfg, x, t).ok().map(|j| ab_identity_defect(&j, scale))
    });
    out.push(Check::from_report("darboux", &r, AB_TOL));

    let one = presets::soliton_family(1);
    let printed = |x, t| hirota_one_soliton_nonlocal(&one, x, t).ok();
    let r = hirota_residual(printed, one.alpha, one.beta(), &g, &st);
    out.push(Check::from_report("hirota", &renamed(r.zero1, "printed one-soliton"), PDE_TOL));
    out.push(Check::from_report("hirota", &renamed(r.zero2, "printed one-soliton"), PDE_TOL));
    out.extend(zero_curvature_checks("printed one-soliton", printed, one.alpha, one.beta(), &g, &st));

    for (label, p) in [
        ("local periodic", presets::local_periodic()),
        ("local decaying", presets::local_decaying()),
        ("local extended", presets::local_extended()),
        ("local extended decaying", presets::local_extended_decaying()),
    ] {
        let q = local_soliton(p);
        let r = hirota_residual(|x, t| q.field_point(x, t), q.alpha, q.beta(), &g, &st);
        out.push(Check::from_report("hirota", &renamed(r.zero1, label), PDE_TOL));
        out.push(Check::from_report("hirota", &renamed(r.zero2, label), PDE_TOL));
        out.push(unit_check("elle", &format!("{label} s.s-1"), &g, |x, t| spin_from_hirota_local(&q, q.kappa, x, t).ok()));
    }
    let lo = local_soliton(presets::local_periodic());
    out.extend(zero_curvature_checks("local periodic", |x, t| lo.field_point(x, t), lo.alpha, lo.beta(), &g, &st));
    let r = elle_residual(|x, t| spin_from_hirota_local(&lo, lo.kappa, x, t).ok(), lo.alpha, lo.beta(), &g, &st);
    out.push(Check::from_report("elle", &renamed(r, "local periodic"), ELL_TOL));

    let nl = nonlocal_reference_soliton();
    let r = hirota_residual(|x, t| nl.field_point(x, t), nl.alpha, nl.beta(), &g, &st);
    out.push(Check::from_report("hirota", &renamed(r.zero1, "nonlocal reference"), PDE_TOL));
    out.push(Check::from_report("hirota", &renamed(r.zero2, "nonlocal reference"), PDE_TOL));

    let f = |x: f64, t: f64| lo.tau_f(x, t);
    let d = bilinear_constraint_check(&lo, Some(&f), lo.kappa, ConstraintMode::Local, &small, &st);
    out.push(Check::from_report("hirota", &renamed(d.logarithmic, "local periodic"), BILINEAR_TOL));
    let f = |x: f64, t: f64| nl.tau_f(x, t);
    let d = bilinear_constraint_check(&nl, Some(&f), nl.kappa, ConstraintMode::Nonlocal, &small, &st);
    out.push(Check::from_report("hirota", &renamed(d.logarithmic, "nonlocal reference"), BILINEAR_TOL));
    let q = FnField(|x, t| hirota_from_spectral(&cfg, x, t).ok().map(|p| p.q));
    let d = bilinear_constraint_check(&q, None, cfg.kappa, ConstraintMode::Nonlocal, &small, &st);
    out.push(Check::above("hirota", format!("generic two-soliton bilinear defect on {small}"), d.logarithmic.max, GENERIC_DEFECT_MIN));

    out.push(unit_check("elle", "two-soliton s.s-1", &g, |x, t| ech_solution(&cfg, x, t).ok().map(|p| spin_from_ech(&p))));
    let nonlocal_spin = |x, t| spin_from_hirota_nonlocal(&nl, nl.kappa, x, t).ok();
    out.push(unit_check("elle", "nonlocal reference s.s-1", &g, nonlocal_spin));
    out.push(scaled_unit_check("elle", "nonlocal reference |s.s-1|/(1+sum|s_i|^2)", &g, nonlocal_spin));
    let r = elle_residual(nonlocal_spin, nl.alpha, nl.beta(), &g, &st);
    out.push(Check::from_report("elle", &renamed(r, "nonlocal reference"), ELL_TOL));
    let ll = SolitonConfig::new(vec![Complex::new(0.5, 0.0)], vec![Complex::new(0.3, 0.0), Complex::new(-0.2, 0.0)], 1.0, 1.0, 0.0);
    let r = elle_residual(|x, t| ech_solution(&ll, x, t).ok().map(|p| spin_from_ech(&p)), ll.alpha, ll.beta(), &g, &st);
    out.push(Check::from_report("elle", &renamed(r, "real-lambda Landau-Lifschitz limit"), ELL_TOL));

    let split = |x, t| split_ml(&cfg, x, t).ok();
    let r = ResidualReport::evaluate("two-soliton m.l", &g, None, |x, t| split(x, t).map(|s| s.orthogonality_defect()));
    out.push(Check::from_report("nelle", &r, UNIT_TOL));
    let r = ResidualReport::evaluate("two-soliton m.m-l.l-1", &g, None, |x, t| split(x, t).map(|s| s.norm_defect()));
    out.push(Check::from_report("nelle", &r, UNIT_TOL));
    let r = nelle_residual(split, cfg.alpha, cfg.delta, NelleForm::Derived, &g, &st);
    out.push(Check::from_report("nelle", &renamed(r.m_equation, "two-soliton"), NELL_TOL));
    out.push(Check::from_report("nelle", &renamed(r.l_equation, "two-soliton"), NELL_TOL));
    let r = nelle_residual(|x, t| nonlocal_spin(x, t).map(|s| s.split()), nl.alpha, nl.delta, NelleForm::Derived, &g, &st);
    out.push(Check::from_report("nelle", &renamed(r.m_equation, "nonlocal reference"), NELL_TOL));
    out.push(Check::from_report("nelle", &renamed(r.l_equation, "nonlocal reference"), NELL_TOL));

    out.push(class_check("local periodic x0=0 t in [0,250]", &local_trajectory(presets::local_periodic(), 0.0, (0.0, 250.0)), "recurrent"));
    out.push(class_check("local decaying x0=0 t in [0,800]", &local_trajectory(presets::local_decaying(), 0.0, (0.0, 800.0)), "decaying_to_fixed_point"));
    out.push(class_check("local extended x0=0 t in [0,500]", &local_trajectory(presets::local_extended(), 0.0, (0.0, 500.0)), "bounded"));
    out.push(class_check(
        "local extended decaying x0=0 t in [0,800]",
        &local_trajectory(presets::local_extended_decaying(), 0.0, (0.0, 800.0)),
        "decaying_to_fixed_point",
    ));
    let tr = trajectory(nonlocal_spin, 2.0, (-100.0, 100.0), 20001);
    out.push(class_check("nonlocal reference x0=2 t in [-100,100]", &tr, "bounded"));

    let profile = x_profile(&cfg, 3.0, (-15.0, 15.0), 3001);
    let xs: Vec<f64> = profile.iter().map(|p| p.0).collect();
    for (k, name) in ["m1", "m2", "m3", "l1", "l2", "l3"].iter().enumerate() {
        let ys: Vec<f64> = profile.iter().map(|p| p.1.map_or(f64::NAN, |s| s.as_array()[k])).collect();
        let baseline = if k == 2 { -1.0 } else { 0.0 };
        let n = extremum_clusters(&xs, &ys, baseline, 0.1, 2.0).len();
        out.push(Check::equal("trajectory", format!("two-soliton t=3 {name} extremum clusters"), n as f64, 2.0));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_selects_systems() {
        let cfg = presets::soliton_family(1);
        let g = GridSpec::new((-2.0, 2.0, 5), (-1.0, 1.0, 5)).unwrap();
        let st = StencilSpec::default();
        let ech = verify(&cfg, System::Ech, &g, &st);
        assert_eq!(ech.len(), 5);
        assert!(ech.iter().all(|c| c.system == "ech" && c.passed));
        let all = verify(&cfg, System::All, &g, &st);
        let systems: std::collections::BTreeSet<&str> = all.iter().map(|c| c.system.as_str()).collect();
        assert_eq!(systems.into_iter().collect::<Vec<_>>(), vec!["ech", "elle", "hirota", "nelle", "zerocurv"]);
    }

    #[test]
    fn classification_checks() {
        let circle = |_: f64, t: f64| Some(SpinPoint::new(Complex::new(t.cos(), 0.0), Complex::new(t.sin(), 0.0), Complex::new(0.0, 0.0)));
        let tr = trajectory(circle, 0.0, (0.0, 8.0), 801);
        assert!(class_check("circle", &tr, "recurrent").passed);
        let c = class_check("circle", &tr, "bounded");
        assert!(!c.passed);
        assert_eq!(c.detail.as_deref(), Some("expected bounded, got recurrent"));
        let arc = trajectory(circle, 0.0, (0.0, 2.0), 201);
        let c = class_check("arc", &arc, "bounded");
        assert!(c.passed && c.tolerance == 10.0, "{c:?}");
    }
}
