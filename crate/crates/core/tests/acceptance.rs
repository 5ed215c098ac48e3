//! Acceptance criteria, one pass/fail line each. Runs with its own harness so
//! the lines are printed on every `cargo test`.

use std::process::ExitCode;
use std::time::Instant;

use nonlocal_soliton::darboux::{ab_identity_defect, darboux_iterate, derivative_scale, lgen_closed, lgen_with_dx};
use nonlocal_soliton::heisenberg::{
    constraint_defect, ech_residual, ech_solution, nonlocality_defect_ech, one_soliton_closed, st_residual,
    two_soliton_closed, EchFieldPoint,
};
use nonlocal_soliton::hirota::{
    bilinear_constraint_check, hirota_from_spectral, hirota_one_soliton_nonlocal, hirota_residual,
    nonlocality_defect_hirota, zero_curvature_residual, ConstraintMode, FnField, HirotaFieldPoint,
    LocalHirotaSoliton, NonlocalHirotaSoliton,
};
use nonlocal_soliton::landau::{
    classify_trajectory, elle_residual, extremum_clusters, local_gauge, nelle_residual, nonlocal_gauge,
    spin_from_ech, spin_from_gauge, spin_from_hirota_local, spin_from_hirota_nonlocal, split_ml, trajectory,
    x_profile, ClassifierSettings, NelleForm, SpinPoint, TrajectoryClass,
};
use nonlocal_soliton::residual::{evaluate_grid, GridSpec, ResidualReport};
use nonlocal_soliton::spectral::presets::{self, LocalSolitonParams};
use nonlocal_soliton::{Complex, SolitonConfig, StencilSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 0x5eed_2024;

/// Collects the individual measurements of one criterion.
#[derive(Default)]
struct Checks {
    items: Vec<(String, f64, f64, bool)>,
    /// Diagnostics printed with the criterion; they do not affect the verdict.
    notes: Vec<String>,
}

impl Checks {
    /// Passes when `value < tol`.
    fn below(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        self.items.push((name.into(), value, tol, value < tol));
    }

    /// Passes when `value > tol`.
    fn above(&mut self, name: impl Into<String>, value: f64, tol: f64) {
        self.items.push((name.into(), value, tol, value > tol));
    }

    fn report(&mut self, r: &ResidualReport, tol: f64) {
        let ok = r.passes(tol);
        self.items.push((format!("{} on {}", r.equation, r.grid), r.max, tol, ok));
    }

    fn flag(&mut self, name: impl Into<String>, ok: bool) {
        self.items.push((name.into(), f64::NAN, f64::NAN, ok));
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    fn passed(&self) -> bool {
        !self.items.is_empty() && self.items.iter().all(|i| i.3)
    }
}

fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

fn default_grid() -> GridSpec {
    GridSpec::default()
}

fn stencil() -> StencilSpec {
    StencilSpec::default()
}

fn random_config(rng: &mut ChaCha8Rng, n: usize) -> SolitonConfig {
    let mut lambdas = Vec::with_capacity(n);
    while lambdas.len() < n {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let l = c(sign * rng.gen_range(0.2..0.9), rng.gen_range(-0.7..0.7));
        // keep spectral parameters (and partners) well separated
        if lambdas.iter().all(|m: &Complex| (l - m).norm() > 0.15 && (l + m.conj()).norm() > 0.15) {
            lambdas.push(l);
        }
    }
    let gammas = (0..2 * n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let kappa = [-1.0, 1.0, 3.0][rng.gen_range(0..3)];
    SolitonConfig::new(lambdas, gammas, kappa, rng.gen_range(0.3..1.5), rng.gen_range(0.0..0.3))
}

fn random_point(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (rng.gen_range(-3.0..3.0), rng.gen_range(-1.5..1.5))
}

fn criterion_1(ch: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut entry, mut det, mut evaluated, mut singular) = (0.0_f64, 0.0_f64, 0, 0);
    for trial in 0..50 {
        let cfg = random_config(&mut rng, 1 + trial % 3);
        for _ in 0..4 {
            let (x, t) = random_point(&mut rng);
            let (Ok(state), Ok(closed)) = (darboux_iterate(&cfg, x, t), lgen_closed(&cfg, x, t)) else {
                singular += 1;
                continue;
            };
            let it = state.accumulated;
            entry = entry.max(it.max_abs_diff(&closed) / it.max_abs());
            let chi = cfg.chi();
            det = det.max((it.det() - chi).norm() / chi.abs()).max((closed.det() - chi).norm() / chi.abs());
            evaluated += 1;
        }
    }
    ch.below(format!("iterated vs closed L, relative ({evaluated} points, {singular} singular skipped)"), entry, 1e-9);
    ch.below("det L - chi, relative", det, 1e-9);
    ch.flag("at least 180 of 200 points evaluated", evaluated >= 180);
}

fn field_difference(a: &EchFieldPoint, b: &EchFieldPoint) -> f64 {
    let scale = [a.u, a.v, a.delta_omega].iter().map(|z| z.norm()).fold(1.0, f64::max);
    [(a.u - b.u), (a.v - b.v), (a.delta_omega - b.delta_omega)].iter().map(|z| z.norm()).fold(0.0, f64::max) / scale
}

fn criterion_2(ch: &mut Checks) {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    for (n, closed) in [(1, one_soliton_closed as fn(&SolitonConfig, f64, f64) -> _), (2, two_soliton_closed)] {
        let (mut worst, mut count, mut attempts) = (0.0_f64, 0, 0);
        while count < 100 && attempts < 1000 {
            attempts += 1;
            let cfg = random_config(&mut rng, n);
            let (x, t) = random_point(&mut rng);
            let (Ok(a), Ok(b)) = (ech_solution(&cfg, x, t), closed(&cfg, x, t)) else { continue };
            worst = worst.max(field_difference(&a, &b));
            count += 1;
        }
        ch.below(format!("n={n} closed form vs determinant solution ({count} points)"), worst, 1e-9);
        ch.flag(format!("n={n} reached 100 non-singular points"), count == 100);
    }
}

fn criterion_3(ch: &mut Checks) {
    let g = default_grid();
    for n in 1..=3 {
        let cfg = presets::soliton_family(n);
        let s = |x, t| ech_solution(&cfg, x, t).ok();
        let mut r = constraint_defect(s, &g);
        r.equation = format!("n={n} omega^2+uv-1");
        ch.report(&r, 1e-10);
        let mut r = nonlocality_defect_ech(s, cfg.kappa, &g).u;
        r.equation = format!("n={n} u - kappa v*(-x,t)");
        ch.report(&r, 1e-10);
    }
}

fn local_soliton(p: LocalSolitonParams) -> LocalHirotaSoliton {
    LocalHirotaSoliton::new(p.mu, p.gamma, p.alpha, p.beta).unwrap()
}

fn nonlocal_reference_soliton() -> NonlocalHirotaSoliton {
    let p = presets::nonlocal_reference();
    NonlocalHirotaSoliton::new(p.mu, p.gamma, p.alpha, p.delta).unwrap()
}

fn renamed(mut r: ResidualReport, label: &str) -> ResidualReport {
    r.equation = format!("{label} {}", r.equation);
    r
}

fn criterion_4(ch: &mut Checks) {
    let (g, st) = (default_grid(), stencil());
    for n in 1..=2 {
        let cfg = presets::soliton_family(n);
        let s = |x, t| ech_solution(&cfg, x, t).ok();
        let e = ech_residual(s, cfg.alpha, cfg.beta(), &g, &st);
        ch.report(&renamed(e.uv1, &format!("n={n}")), 1e-5);
        ch.report(&renamed(e.uv2, &format!("n={n}")), 1e-5);
        ch.report(&renamed(st_residual(s, cfg.alpha, cfg.beta(), &g, &st), &format!("n={n}")), 1e-5);
        let h = hirota_residual(|x, t| hirota_from_spectral(&cfg, x, t).ok(), cfg.alpha, cfg.beta(), &g, &st);
        ch.report(&renamed(h.zero1, &format!("spectral n={n}")), 1e-5);
        ch.report(&renamed(h.zero2, &format!("spectral n={n}")), 1e-5);
    }
    let cfg = presets::soliton_family(1);
    let h = hirota_residual(|x, t| hirota_one_soliton_nonlocal(&cfg, x, t).ok(), cfg.alpha, cfg.beta(), &g, &st);
    ch.report(&renamed(h.zero1, "printed one-soliton"), 1e-5);
    ch.report(&renamed(h.zero2, "printed one-soliton"), 1e-5);
    for (label, p) in [
        ("local periodic", presets::local_periodic()),
        ("local decaying", presets::local_decaying()),
        ("local extended", presets::local_extended()),
        ("local extended decaying", presets::local_extended_decaying()),
    ] {
        let q = local_soliton(p);
        let h = hirota_residual(|x, t| q.field_point(x, t), q.alpha, q.beta(), &g, &st);
        ch.report(&renamed(h.zero1, label), 1e-5);
        ch.report(&renamed(h.zero2, label), 1e-5);
    }
    let q = nonlocal_reference_soliton();
    let h = hirota_residual(|x, t| q.field_point(x, t), q.alpha, q.beta(), &g, &st);
    ch.report(&renamed(h.zero1, "nonlocal reference"), 1e-5);
    ch.report(&renamed(h.zero2, "nonlocal reference"), 1e-5);
}

fn criterion_5(ch: &mut Checks) {
    for n in 1..=3 {
        let cfg = presets::soliton_family(n);
        ch.report(&renamed(nonlocality_defect_hirota(&cfg, &default_grid()), &format!("n={n}")), 1e-10);
    }
}

fn criterion_6(ch: &mut Checks) {
    let g = GridSpec::new((-5.0, 5.0, 21), (-2.0, 2.0, 21)).unwrap();
    for n in 1..=2 {
        let cfg = presets::soliton_family(n);
        let scale = derivative_scale(&cfg);
        let r = ResidualReport::evaluate(format!("n={n} AB identity"), &g, None, |x, t| {
            lgen_with_dx(&cfg, x, t).ok().map(|j| ab_identity_defect(&j, scale))
        });
        ch.report(&r, 1e-7);
    }
}

fn criterion_7(ch: &mut Checks) {
    let (g, st) = (default_grid(), stencil());
    let lambdas = [c(0.7, 0.0), c(1.0, 0.5), c(-0.3, 2.0)];
    let local = local_soliton(presets::local_periodic());
    let cfg = presets::soliton_family(1);
    let sources: [(&str, Box<dyn Fn(f64, f64) -> Option<HirotaFieldPoint> + Sync>, f64, Complex); 2] = [
        ("local one-soliton", Box::new(|x, t| local.field_point(x, t)), local.alpha, local.beta()),
        ("printed nonlocal one-soliton", Box::new(|x, t| hirota_one_soliton_nonlocal(&cfg, x, t).ok()), cfg.alpha, cfg.beta()),
    ];
    for (label, sampler, alpha, beta) in &sources {
        let mut maxima = Vec::new();
        for &l in &lambdas {
            let r = zero_curvature_residual(sampler, *alpha, *beta, l, &g, &st);
            maxima.push(r.max);
            ch.report(&renamed(r, label), 1e-5);
        }
        let spread = maxima.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - maxima.iter().cloned().fold(f64::INFINITY, f64::min);
        ch.below(format!("{label} lambda-to-lambda spread"), spread, 1e-6);
    }
}

fn unit_report(label: &str, g: &GridSpec, f: impl Fn(f64, f64) -> Option<SpinPoint> + Sync) -> ResidualReport {
    ResidualReport::evaluate(format!("{label} s.s-1"), g, None, |x, t| f(x, t).map(|s| s.unit_defect()))
}

/// Largest s.s-1 divided by the squared component scale 1 + sum |s_i|^2, the
/// best a double-precision representation of s can achieve being a few eps.
fn scaled_unit_defect(g: &GridSpec, f: impl Fn(f64, f64) -> Option<SpinPoint> + Sync) -> (f64, f64) {
    let samples = evaluate_grid(g, |x, t| {
        f(x, t).map(|s| {
            let scale = 1.0 + s.s.iter().map(|z| z.norm_sqr()).sum::<f64>();
            (s.unit_defect() / scale, scale)
        })
    });
    samples.into_iter().flatten().fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
}

fn criterion_8(ch: &mut Checks) {
    let (g, st) = (default_grid(), stencil());
    for n in 1..=3 {
        let cfg = presets::soliton_family(n);
        ch.report(&unit_report(&format!("ech n={n}"), &g, |x, t| ech_solution(&cfg, x, t).ok().map(|p| spin_from_ech(&p))), 1e-10);
    }
    for (label, p) in [("local periodic", presets::local_periodic()), ("local extended decaying", presets::local_extended_decaying())] {
        let q = local_soliton(p);
        ch.report(&unit_report(label, &g, |x, t| spin_from_hirota_local(&q, -1.0, x, t).ok()), 1e-10);
        ch.report(
            &unit_report(&format!("{label} gauge"), &g, |x, t| local_gauge(&q, -1.0, x, t).ok().and_then(|m| spin_from_gauge(&m).ok())),
            1e-10,
        );
    }
    let q = nonlocal_reference_soliton();
    ch.report(&unit_report("nonlocal reference", &g, |x, t| spin_from_hirota_nonlocal(&q, -1.0, x, t).ok()), 1e-10);
    ch.report(
        &unit_report("nonlocal reference gauge", &g, |x, t| nonlocal_gauge(&q, -1.0, x, t).ok().and_then(|m| spin_from_gauge(&m).ok())),
        1e-10,
    );
    let (rel, scale) = scaled_unit_defect(&g, |x, t| spin_from_hirota_nonlocal(&q, -1.0, x, t).ok());
    ch.note(format!("nonlocal reference: max |s.s-1|/(1+sum|s_i|^2) = {rel:.2e}, max 1+sum|s_i|^2 = {scale:.2e}"));
    let fam = presets::soliton_family(1);
    let (rel, scale) = scaled_unit_defect(&g, |x, t| split_ml(&fam, x, t).ok().map(|s| SpinPoint::new(c(s.m[0], s.l[0]), c(s.m[1], s.l[1]), c(s.m[2], s.l[2]))));
    ch.note(format!("split n=1: max |s.s-1|/(1+sum|s_i|^2) = {rel:.2e}, max 1+sum|s_i|^2 = {scale:.2e}"));
    for n in 1..=2 {
        let cfg = presets::soliton_family(n);
        let r = ResidualReport::evaluate(format!("split n={n} m.l"), &g, None, |x, t| split_ml(&cfg, x, t).ok().map(|s| s.orthogonality_defect()));
        ch.report(&r, 1e-10);
        let r = ResidualReport::evaluate(format!("split n={n} m.m-l.l-1"), &g, None, |x, t| split_ml(&cfg, x, t).ok().map(|s| s.norm_defect()));
        ch.report(&r, 1e-10);
    }
    // Landau-Lifschitz limit: κ = 1, real λ, β = 0
    let ll = SolitonConfig::new(vec![c(0.5, 0.0)], vec![c(0.3, 0.0), c(-0.2, 0.0)], 1.0, 1.0, 0.0);
    let r = elle_residual(|x, t| ech_solution(&ll, x, t).ok().map(|p| spin_from_ech(&p)), ll.alpha, ll.beta(), &g, &st);
    ch.report(&renamed(r, "real-lambda ech spin"), 1e-5);
    let nl = nelle_residual(
        |x, t| spin_from_hirota_nonlocal(&q, -1.0, x, t).ok().map(|s| s.split()),
        q.alpha,
        q.delta,
        NelleForm::Derived,
        &g,
        &st,
    );
    ch.report(&renamed(nl.m_equation, "nonlocal reference"), 1e-4);
    ch.report(&renamed(nl.l_equation, "nonlocal reference"), 1e-4);
    let cfg = presets::two_soliton();
    let nl = nelle_residual(|x, t| split_ml(&cfg, x, t).ok(), cfg.alpha, cfg.delta, NelleForm::Derived, &g, &st);
    ch.report(&renamed(nl.m_equation, "two-soliton"), 1e-4);
    ch.report(&renamed(nl.l_equation, "two-soliton"), 1e-4);
}

fn criterion_9(ch: &mut Checks) {
    let (g, st) = (default_grid(), stencil());
    let lo = local_soliton(presets::local_periodic());
    let f = |x: f64, t: f64| lo.tau_f(x, t);
    let d = bilinear_constraint_check(&lo, Some(&f), lo.kappa, ConstraintMode::Local, &g, &st);
    ch.report(&renamed(d.logarithmic, "local real mu"), 1e-6);
    ch.report(&renamed(d.hirota_form.unwrap(), "local real mu"), 1e-6);
    let nl = nonlocal_reference_soliton();
    let f = |x: f64, t: f64| nl.tau_f(x, t);
    let d = bilinear_constraint_check(&nl, Some(&f), nl.kappa, ConstraintMode::Nonlocal, &g, &st);
    ch.report(&renamed(d.logarithmic, "nonlocal reference"), 1e-6);
    ch.report(&renamed(d.hirota_form.unwrap(), "nonlocal reference"), 1e-6);
    let cfg = presets::two_soliton();
    let q = FnField(|x, t| hirota_from_spectral(&cfg, x, t).ok().map(|p| p.q));
    let d = bilinear_constraint_check(&q, None, cfg.kappa, ConstraintMode::Nonlocal, &g, &st);
    ch.above("generic two-soliton constraint defect", d.logarithmic.max, 1e-2);
}

fn criterion_10(ch: &mut Checks) {
    let settings = ClassifierSettings::default();
    let q = local_soliton(presets::local_periodic());
    for x0 in [-2.0, 0.0, 2.0] {
        let tr = trajectory(|x, t| spin_from_hirota_local(&q, -1.0, x, t).ok(), x0, (0.0, 250.0), 20001);
        match classify_trajectory(&tr, &settings) {
            TrajectoryClass::Recurrent { distance, .. } => ch.below(format!("local periodic x0={x0} return distance"), distance, 1e-3),
            other => ch.flag(format!("local periodic x0={x0} recurrent (got {})", other.name()), false),
        }
    }
    for (label, p) in [("local decaying", presets::local_decaying()), ("local extended decaying", presets::local_extended_decaying())] {
        let q = local_soliton(p);
        for x0 in [-2.0, 0.0, 2.0] {
            let tr = trajectory(|x, t| spin_from_hirota_local(&q, -1.0, x, t).ok(), x0, (0.0, 800.0), 20001);
            match classify_trajectory(&tr, &settings) {
                TrajectoryClass::DecayingToFixedPoint { terminal_speed } => {
                    ch.below(format!("{label} x0={x0} terminal speed"), terminal_speed, 1e-4)
                }
                other => ch.flag(format!("{label} x0={x0} decaying (got {})", other.name()), false),
            }
        }
    }
    let profile = x_profile(&presets::two_soliton(), 3.0, (-15.0, 15.0), 3001);
    let xs: Vec<f64> = profile.iter().map(|p| p.0).collect();
    let names = ["m1", "m2", "m3", "l1", "l2", "l3"];
    for (k, name) in names.iter().enumerate() {
        let ys: Vec<f64> = profile.iter().map(|p| p.1.map_or(f64::NAN, |s| s.as_array()[k])).collect();
        let baseline = if k == 2 { -1.0 } else { 0.0 };
        let clusters = extremum_clusters(&xs, &ys, baseline, 0.1, 2.0);
        ch.flag(format!("two-soliton {name} extremum clusters = {} (expected 2)", clusters.len()), clusters.len() == 2);
    }
}

fn main() -> ExitCode {
    let verbose = std::env::args().any(|a| a == "--nocapture" || a == "--show-output");
    let criteria: [(&str, fn(&mut Checks)); 10] = [
        ("oracle equivalence, Darboux iteration vs determinants", criterion_1),
        ("closed-form one- and two-soliton vs determinant solution", criterion_2),
        ("ECH constraint and nonlocality", criterion_3),
        ("PDE residuals", criterion_4),
        ("Hirota nonlocality", criterion_5),
        ("AB identity", criterion_6),
        ("zero-curvature condition", criterion_7),
        ("spin constraints, ELL and NELL", criterion_8),
        ("bilinear constraints", criterion_9),
        ("qualitative trajectory and profile shapes", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut ch = Checks::default();
        run(&mut ch);
        let ok = ch.passed();
        if !ok {
            failed += 1;
        }
        let worst = ch
            .items
            .iter()
            .filter(|i| i.1.is_finite() && i.2.is_finite())
            .max_by(|a, b| (a.1 / a.2).total_cmp(&(b.1 / b.2)));
        let summary = match worst {
            Some((label, v, tol, _)) => format!("worst {label}: {v:.3e} (tol {tol:.0e})"),
            None => String::new(),
        };
        println!(
            "criterion {:>2} {} {name}; {} checks; {summary} [{:.1}s]",
            k + 1,
            if ok { "PASS" } else { "FAIL" },
            ch.items.len(),
            start.elapsed().as_secs_f64()
        );
        for note in &ch.notes {
            println!("    note {note}");
        }
        for (label, v, tol, pass) in &ch.items {
            if verbose || !pass {
                let mark = if *pass { "ok  " } else { "FAIL" };
                if v.is_nan() {
                    println!("    {mark} {label}");
                } else {
                    println!("    {mark} {label}: {v:.3e} (tol {tol:.0e})");
                }
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
