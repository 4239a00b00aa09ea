//! Named verification suites behind `lbes verify --suite <name>`.
//!
//! Each suite runs numerical checks against independently computed
//! references (closed forms, finite differences, measured scaling bands)
//! and reports machine-readable pass/fail results.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use lbes::averaging::AveragingContext;
use lbes::bump::{chi2, phi_radial, Deltas};
use lbes::core::{SimConfig, State};
use lbes::costs::{
    check_assumption5a, check_hessian_bound, cost_nonconvex_sin, cost_quadratic, cost_tanh_norm,
    fd_gradient, CostFunction, DriftField,
};
use lbes::presets::{self, PresetKind};
use lbes::rng::SplitMix64;
use lbes::sim::{averaging_order_sweep, estimate_ultimate_bound, integrate};

pub const SUITES: [&str; 7] = [
    "bump",
    "costs",
    "averaging",
    "descent",
    "order",
    "bounds",
    "all",
];

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

fn check(checks: &mut Vec<Check>, name: &str, pass: bool, detail: String) {
    checks.push(Check {
        name: name.to_string(),
        pass,
        detail,
    });
}

pub fn run_suite(name: &str) -> Option<SuiteReport> {
    let checks = match name {
        "bump" => bump_suite(),
        "costs" => costs_suite(),
        "averaging" => averaging_suite(),
        "descent" => descent_suite(),
        "order" => order_suite(),
        "bounds" => bounds_suite(),
        "all" => {
            let mut all = Vec::new();
            for s in ["bump", "costs", "averaging", "descent", "order", "bounds"] {
                all.extend(run_suite(s)?.checks);
            }
            all
        }
        _ => return None,
    };
    Some(SuiteReport {
        suite: name.to_string(),
        pass: checks.iter().all(|c| c.pass),
        checks,
    })
}

fn bump_suite() -> Vec<Check> {
    let mut checks = Vec::new();
    let d = Deltas::new(1.0, 2.0, 3.0, 0.25).expect("valid deltas");

    let outer_one = (0..=400).all(|k| phi_radial(2.0 + k as f64 / 50.0, &d) == 1.0);
    check(
        &mut checks,
        "plateau_outside_delta2",
        outer_one,
        "phi == 1 exactly for r >= delta2".into(),
    );
    let inner_zero = (0..=400).all(|k| phi_radial(k as f64 / 400.0, &d) == 0.0);
    check(
        &mut checks,
        "plateau_inside_delta1",
        inner_zero,
        "phi == 0 exactly for r <= delta1".into(),
    );

    let mut sym_worst = 0.0f64;
    for k in 0..1000 {
        let r = -0.25 + 1.5 * k as f64 / 999.0;
        sym_worst = sym_worst.max((chi2(r) + chi2(1.0 - r) - 1.0).abs());
    }
    check(
        &mut checks,
        "chi2_partition_identity",
        sym_worst < 1e-12,
        format!("worst |chi2(r) + chi2(1-r) - 1| = {sym_worst:.2e}"),
    );

    let h = 1e-5;
    let deriv = |r: f64| (phi_radial(r + h, &d) - phi_radial(r - h, &d)) / (2.0 * h);
    let jump = |r: f64| (deriv(r + 2.0 * h) - deriv(r - 2.0 * h)).abs();
    let j1 = jump(d.delta1());
    let j2 = jump(d.delta2());
    check(
        &mut checks,
        "c1_across_transition_radii",
        j1 < 1e-4 && j2 < 1e-4,
        format!("derivative jumps ({j1:.2e}, {j2:.2e}) < 1e-4"),
    );
    checks
}

fn shipped_costs() -> Vec<CostFunction> {
    vec![
        cost_nonconvex_sin(DVector::zeros(2)),
        cost_tanh_norm(DVector::zeros(2)),
        cost_quadratic(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]),
        )
        .expect("diag(1,2) is SPD"),
    ]
}

fn costs_suite() -> Vec<Check> {
    let mut checks = Vec::new();

    for cost in shipped_costs() {
        let mut rng = SplitMix64::new(0xC05);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let x = cost.x_star() + rng.in_ball(2, 30.0);
            let g = cost.gradient(&x);
            let fd = fd_gradient(&cost, &x);
            worst = worst.max((&g - &fd).norm() / g.norm().max(1e-3));
        }
        check(
            &mut checks,
            &format!("gradient_vs_fd_{}", cost.name()),
            worst < 1e-5,
            format!("worst relative deviation {worst:.2e} over 1000 samples"),
        );
    }

    let r = check_assumption5a(&cost_nonconvex_sin(DVector::zeros(2)), 5000, 40.0, 1);
    check(
        &mut checks,
        "gradient_domination_nonconvex_sin",
        r.pass,
        format!("worst margin {:.3e}", r.worst_margin),
    );
    let q = cost_quadratic(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
    let r = check_assumption5a(&q, 5000, 40.0, 2);
    check(
        &mut checks,
        "gradient_domination_quadratic",
        r.pass,
        format!("worst margin {:.3e}", r.worst_margin),
    );

    for cost in shipped_costs() {
        let r = check_hessian_bound(&cost, 2000, 40.0, 3);
        check(
            &mut checks,
            &format!("hessian_bound_{}", cost.name()),
            r.pass,
            format!("max estimate {:.4} vs declared {:.4}", r.max_estimate, r.declared_bound),
        );
    }

    // Destabilizing drift of the law-1 experiment stays dominated.
    let c = cost_nonconvex_sin(DVector::zeros(2));
    let drift = DriftField::linear_destabilizing(0.5, DVector::zeros(2), 0.8);
    let dom = drift.check_domination(&c, 10_000, 50.0, 4);
    check(
        &mut checks,
        "drift_domination",
        dom.pass,
        format!("worst |b0|/|gradJ| = {:.4} vs kappa3 = {}", dom.worst_ratio, dom.kappa3),
    );
    checks
}

fn averaging_suite() -> Vec<Check> {
    let mut checks = Vec::new();

    for preset in presets::all() {
        let ctx = AveragingContext::with_default_nodes(
            preset.system.clone(),
            preset.deltas,
            preset.sim.epsilon,
        )
        .expect("preset context");
        let t = preset.system.period();
        let mut rng = SplitMix64::new(0xA46);
        let mut worst = 0.0f64;
        for _ in 0..16 {
            let x = rng.in_ball(preset.system.dim(), 3.0);
            // Probe just below T so the periodic reduction cannot shortcut
            // the full-period quadrature.
            for tau in [t, t - 1e-9] {
                worst = worst
                    .max(ctx.v1(&x, tau).norm())
                    .max(ctx.w_func(&x, tau).norm())
                    .max(ctx.v2(&x, tau).norm());
            }
        }
        check(
            &mut checks,
            &format!("period_integrals_vanish_{}", preset.name),
            worst < 1e-7,
            format!("worst |v1/w/v2|(T) = {worst:.2e}"),
        );
    }

    let p1 = presets::example1_nonlipschitz();
    let ctx = AveragingContext::with_default_nodes(
        p1.system.clone(),
        Deltas::identity(1.0).expect("deltas"),
        0.05,
    )
    .expect("context");
    let mut worst = 0.0f64;
    for k in 0..40 {
        let x = DVector::from_vec(vec![0.5 + 9.5 * k as f64 / 39.0]);
        let expect = -0.5 * x[0].abs().sqrt();
        worst = worst.max((ctx.average_field(&x)[0] - expect).abs());
    }
    check(
        &mut checks,
        "example1_average_closed_form",
        worst < 1e-8,
        format!("worst deviation from -0.5*sqrt(|x|)*sign(x): {worst:.2e}"),
    );

    let p2 = presets::example2_vibrational();
    if let PresetKind::Vibrational { b, gamma1, gamma2 } = &p2.kind {
        let a = presets::vibrational_averaged_matrix(b, *gamma1, *gamma2);
        let ctx = AveragingContext::with_default_nodes(
            p2.system.clone(),
            Deltas::identity(1.0).expect("deltas"),
            0.0,
        )
        .expect("context");
        let mut rng = SplitMix64::new(0xA47);
        let mut worst = 0.0f64;
        for _ in 0..8 {
            let z = rng.gaussian_vector(4) * 2.0;
            worst = worst.max((ctx.average_field(&z) - &a * &z).amax());
        }
        check(
            &mut checks,
            "vibrational_average_linear_map",
            worst < 1e-6,
            format!("worst entrywise deviation from the measured matrix: {worst:.2e}"),
        );
    }

    let fine = AveragingContext::new(
        p1.system.clone(),
        Deltas::identity(1.0).expect("deltas"),
        0.05,
        1024,
    )
    .expect("context");
    let x = DVector::from_vec(vec![2.2]);
    let delta = (ctx.average_field(&x) - fine.average_field(&x)).norm();
    check(
        &mut checks,
        "quadrature_richardson_stability",
        delta < 1e-9,
        format!("doubling quad_nodes moves fbar by {delta:.2e}"),
    );

    let d = Deltas::with_default_margin(0.5, 1.0, 2.0).expect("deltas");
    let inv_ctx =
        AveragingContext::with_default_nodes(p1.system.clone(), d, 0.05).expect("context");
    let mut rng = SplitMix64::new(0xA48);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let xt = DVector::from_vec(vec![rng.uniform_in(2.0, 8.0)]);
        let tau = rng.uniform_in(0.0, p1.system.period());
        let x = inv_ctx.psi_inverse(&xt, tau).expect("inversion at small eps");
        worst = worst.max((inv_ctx.phi(&x, tau) - &xt).norm());
    }
    check(
        &mut checks,
        "near_identity_round_trip",
        worst < 1e-10,
        format!("worst |Phi(Psi^-1(x),tau) - x| = {worst:.2e}"),
    );
    checks
}

fn descent_suite() -> Vec<Check> {
    let mut checks = Vec::new();
    let zero2 = DVector::zeros(2);
    for (preset, coeff) in [
        (presets::example5_law1_nonconvex_at(zero2.clone()), 0.8 - 1.0),
        (presets::example6_law2_bounded_at(zero2.clone()), 0.0 - 2.0),
    ] {
        let (cost, _, _, _, _) = preset.es_parts().expect("es preset");
        let ctx = AveragingContext::with_default_nodes(
            preset.system.clone(),
            preset.deltas,
            preset.sim.epsilon,
        )
        .expect("context");
        let mut rng = SplitMix64::new(0xDE5);
        let mut worst = f64::MIN;
        for _ in 0..1000 {
            let xt = rng.on_sphere(2, 1.0) * rng.uniform_in(preset.deltas.delta3(), 100.0);
            let grad = cost.gradient(&xt);
            let margin = grad.dot(&ctx.average_field(&xt)) - coeff * grad.norm_squared();
            worst = worst.max(margin);
        }
        check(
            &mut checks,
            &format!("descent_inequality_{}", preset.name),
            worst <= 1e-6,
            format!("worst margin over 1000 samples: {worst:.3e}"),
        );
    }
    checks
}

fn order_suite() -> Vec<Check> {
    let mut checks = Vec::new();

    // Vibrational loop at desk scale: the remainder is first order, so
    // ε-halving halves the trajectory error.
    let p2 = presets::example2_vibrational();
    let ctx = AveragingContext::with_default_nodes(
        p2.system.clone(),
        Deltas::identity(1.0).expect("deltas"),
        0.0,
    )
    .expect("context");
    let z0 = DVector::from_vec(vec![10.0, -10.0, 1.0, -1.0]);
    let report = averaging_order_sweep(
        &p2.system,
        |z| ctx.average_field(z),
        &z0,
        2.0,
        &[0.08, 0.04, 0.02],
        200,
    )
    .expect("sweep");
    check(
        &mut checks,
        "vibrational_sweep_first_order_band",
        report.in_band,
        format!("ratios {:?} within [0.3, 0.7]", report.ratios),
    );

    // Non-Lipschitz example: the fast field vanishes, the remainder is
    // second order, and the measured ratios sit near 1/4.
    let p1 = presets::example1_nonlipschitz();
    let ctx1 = AveragingContext::with_default_nodes(
        p1.system.clone(),
        Deltas::identity(1.0).expect("deltas"),
        0.0,
    )
    .expect("context");
    let report = averaging_order_sweep(
        &p1.system,
        |x| ctx1.average_field(x),
        &DVector::from_vec(vec![10.0]),
        10.0,
        &[0.2, 0.1, 0.05],
        200,
    )
    .expect("sweep");
    let second_order = report
        .ratios
        .iter()
        .all(|r| (0.15..=0.35).contains(r));
    check(
        &mut checks,
        "example1_sweep_second_order",
        second_order,
        format!("ratios {:?} near 1/4 (zero fast field)", report.ratios),
    );

    // Autonomous slow field equals its own average: exact-average flag.
    use lbes::core::{make_system, FieldFn, Rational};
    use std::sync::Arc;
    let f1: Arc<FieldFn> = Arc::new(|_x, _tau| DVector::zeros(1));
    let f2: Arc<FieldFn> = Arc::new(|x, _tau| -x.clone());
    let sys = make_system(1, f1, f2, None, &[Rational::integer(1)], "autonomous")
        .expect("valid system");
    let report = averaging_order_sweep(
        &sys,
        |x| -x.clone(),
        &DVector::from_vec(vec![1.0]),
        2.0,
        &[0.2, 0.1, 0.05],
        200,
    )
    .expect("sweep");
    check(
        &mut checks,
        "autonomous_exact_average_flag",
        report.exact_average && report.pass,
        format!(
            "errors {:?} at integration-noise level",
            report
                .entries
                .iter()
                .map(|e| e.max_err)
                .collect::<Vec<_>>()
        ),
    );
    checks
}

fn bounds_suite() -> Vec<Check> {
    let mut checks = Vec::new();

    // Contractive autonomous system: ultimate radius at integrator noise.
    use lbes::core::{make_system, FieldFn, Rational};
    use std::sync::Arc;
    let f1: Arc<FieldFn> = Arc::new(|_x, _tau| DVector::zeros(2));
    let f2: Arc<FieldFn> = Arc::new(|x, _tau| -x.clone());
    let sys = make_system(2, f1, f2, None, &[Rational::integer(1)], "contract")
        .expect("valid system");
    let cfg = SimConfig::new(0.5, 40.0, State::new(vec![1.0, 0.0]).unwrap())
        .unwrap()
        .with_seed(0xB0);
    let est = estimate_ultimate_bound(&sys, 4, 1.0, &cfg).expect("bound estimate");
    check(
        &mut checks,
        "stable_linear_ultimate_radius",
        est.escaped_runs.is_empty() && est.ultimate_radius < 1e-6,
        format!("ultimate radius {:.2e}", est.ultimate_radius),
    );

    // Law-1 loop at desk scale: every run settles, and halving ε does not
    // inflate the ultimate radius by more than 10%.
    let p5 = presets::example5_law1_nonconvex_at(DVector::zeros(2));
    let mut cfg = p5.sim.clone();
    cfg.t_final = 30.0;
    cfg.record_stride = 10;
    let est = estimate_ultimate_bound(&p5.system, 6, 100.0, &cfg).expect("bound estimate");
    check(
        &mut checks,
        "law1_batch_settles",
        est.escaped_runs.is_empty() && est.ultimate_radius < 5.0,
        format!(
            "ultimate radius {:.3} from radius 100, settle time {:.1}",
            est.ultimate_radius, est.settle_time
        ),
    );

    let mut cfg_half = cfg.clone();
    cfg_half.epsilon = cfg.epsilon / 2.0;
    let est_half =
        estimate_ultimate_bound(&p5.system, 6, 100.0, &cfg_half).expect("bound estimate");
    check(
        &mut checks,
        "law1_radius_trend_under_eps_halving",
        est_half.ultimate_radius <= 1.1 * est.ultimate_radius,
        format!(
            "radius {:.3} at eps vs {:.3} at eps/2",
            est.ultimate_radius, est_half.ultimate_radius
        ),
    );

    // Integrator sanity from the sim side: a run that blows up in finite
    // time is reported as an escape, not silently truncated.
    let f1b: Arc<FieldFn> = Arc::new(|_x, _tau| DVector::zeros(1));
    let f2b: Arc<FieldFn> = Arc::new(|x, _tau| DVector::from_vec(vec![x[0] * x[0]]));
    let blow = make_system(1, f1b, f2b, None, &[Rational::integer(1)], "blowup")
        .expect("valid system");
    let cfg = SimConfig::new(0.5, 10.0, State::new(vec![5.0]).unwrap()).unwrap();
    let traj = integrate(&blow, &cfg).expect("integration returns data");
    check(
        &mut checks,
        "escape_recorded_as_data",
        traj.escaped(),
        format!("finite-escape run flagged at t = {:.3}", traj.final_time()),
    );
    checks
}
