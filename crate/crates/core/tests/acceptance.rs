//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `--nocapture`) and asserting the stated tolerance.
//!
//! Criteria 2 and 8 encode targets that the measured dynamics of the
//! strongly coupled example cannot meet at the stated resolution (the exact
//! rotating solution is Lyapunov-unstable, so truncation noise is amplified
//! by roughly e^{1.5 t} and the computed trajectory collapses onto the
//! stationary pair (1, 0) well before t = 8 pi). They are implemented
//! faithfully and report the measured values; see the README's verification
//! notes.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::sync::Arc;
use std::time::Instant;
use weakhj_core::coupled::{coupled_residual, detect_period, evolve_coupled, long_time_limit};
use weakhj_core::critical::{alpha_curve, default_eps_list, find_c0, vanishing_discount};
use weakhj_core::hamiltonian::{bounds_ledger, legendre, CouplingLaw, CouplingMap, XMap};
use weakhj_core::scalar::standalone_problem;
use weakhj_core::semigroup::{aubry_set, default_aubry_tol, solve_decreasing_detailed};
use weakhj_core::{
    gauss_seidel, residual, residual_with, solve_increasing, verify_iteration_bounds,
    DiscountedFamily, GridField, KineticHamiltonian, Monotonicity, SchemeParams,
    SystemSpec, TorusGrid, Viscosity,
};

fn cmap(c: f64) -> XMap {
    Arc::new(move |_| c)
}

fn quad(grid: TorusGrid) -> KineticHamiltonian {
    KineticHamiltonian::quadratic(grid.length())
}

fn exx_system(grid: TorusGrid, c: f64, d: f64) -> SystemSpec {
    SystemSpec::new(
        vec![quad(grid), quad(grid)],
        CouplingLaw::Linear {
            lambda: vec![vec![cmap(1.0), cmap(1.0)], vec![cmap(-1.0), cmap(1.0)]],
            monotone: false,
        },
        vec![c, d],
        grid,
    )
    .unwrap()
}

fn strongly_coupled_system(grid: TorusGrid) -> SystemSpec {
    let g1: CouplingMap = Arc::new(|_x, u: &[f64]| u[0] * u[0] - u[1] - 1.0);
    let g2: CouplingMap = Arc::new(|_x, u: &[f64]| u[1] * u[1] + u[0] - 1.0);
    SystemSpec::new(
        vec![quad(grid), quad(grid)],
        CouplingLaw::Nonlinear {
            terms: vec![g1, g2],
            theta: 21.0,
            moduli: vec![0.0, 0.0],
            classes: vec![Monotonicity::None, Monotonicity::None],
            declared_b: None,
            sample_box: 10.0,
        },
        vec![0.0, 0.0],
        grid,
    )
    .unwrap()
}

fn chi016_spec(grid: TorusGrid) -> SystemSpec {
    SystemSpec::new(
        vec![
            KineticHamiltonian::quadratic_with_potential(|x: f64| x.sin(), grid.length()).unwrap(),
            quad(grid),
        ],
        CouplingLaw::Linear {
            lambda: vec![vec![cmap(1.0), cmap(-0.4)], vec![cmap(-0.4), cmap(1.0)]],
            monotone: true,
        },
        vec![0.0, 0.0],
        grid,
    )
    .unwrap()
}

#[test]
fn acceptance_1_exx_regression() {
    let start = Instant::now();
    let grid = TorusGrid::standard(256).unwrap();
    let params = SchemeParams::default();
    let prob = standalone_problem(
        quad(grid),
        |_x, u: f64| 2.0 * u,
        Monotonicity::Increasing,
        2.0,
        2.0,
        grid,
    )
    .unwrap();
    let u0 = solve_increasing(&prob, &params).unwrap();
    let threshold = 4.0 * grid.spacing();
    let mut worst = 0.0f64;
    for c in [-1.0, 0.0, 1.0] {
        for d in [-1.0, 0.0, 1.0] {
            let pair = [u0.shifted((c - d) / 2.0), u0.shifted((c + d) / 2.0)];
            let spec = exx_system(grid, c, d);
            let res = coupled_residual(&spec, &pair, &Viscosity::Auto).unwrap();
            worst = worst.max(res[0]).max(res[1]);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= threshold && elapsed < 10.0;
    println!(
        "ACCEPTANCE 1 (exx regression): {} — worst residual {worst:.2e} vs {threshold:.2e}, \
         {elapsed:.1}s",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(worst <= threshold, "worst residual {worst}");
    assert!(elapsed < 10.0, "runtime {elapsed}");
}

#[test]
fn acceptance_2_time_periodic_tracking() {
    let start = Instant::now();
    let grid = TorusGrid::standard(256).unwrap();
    let spec = strongly_coupled_system(grid);
    let phi = vec![
        GridField::sample(grid, f64::sin).unwrap(),
        GridField::sample(grid, f64::cos).unwrap(),
    ];
    let tau = std::f64::consts::TAU;
    let params = SchemeParams {
        store_stride: 4,
        ..SchemeParams::default()
    };
    let traj = evolve_coupled(&spec, &phi, tau, &params).unwrap();
    let mut sup_err = 0.0f64;
    for (fi, frame) in traj.components[0].frames().iter().enumerate() {
        let t = traj.components[0].time(fi);
        let e1 = GridField::sample(grid, |x| (x + t).sin()).unwrap();
        let e2 = GridField::sample(grid, |x| (x + t).cos()).unwrap();
        sup_err = sup_err
            .max(frame.sup_dist(&e1).unwrap())
            .max(traj.components[1].frame(fi).sup_dist(&e2).unwrap());
    }
    let traj2 = evolve_coupled(&spec, &phi, 2.0 * tau, &params).unwrap();
    let period = detect_period(&traj2, tau, 0.05).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = sup_err <= 0.05 && period.periodic && elapsed < 60.0;
    println!(
        "ACCEPTANCE 2 (time-periodic tracking): {} — sup error {sup_err:.3} vs 0.05, \
         period deviation {:.3} (stationary = {}), {elapsed:.1}s",
        if pass { "PASS" } else { "FAIL" },
        period.deviation,
        period.stationary,
    );
    assert!(elapsed < 60.0, "runtime {elapsed}");
    assert!(
        sup_err <= 0.05,
        "tracking error {sup_err:.3} exceeds 0.05: the exact rotating pair is \
         Lyapunov-unstable (measured growth rate ~e^1.5t), so no first-order monotone \
         scheme tracks it over a full period at n = 256; see the verification notes"
    );
    assert!(period.periodic, "period deviation {}", period.deviation);
}

#[test]
fn acceptance_3_alpha_line() {
    let start = Instant::now();
    let grid = TorusGrid::standard(256).unwrap();
    let fam = DiscountedFamily::new(
        KineticHamiltonian::quadratic_with_potential(|x: f64| x.sin(), grid.length()).unwrap(),
        KineticHamiltonian::quadratic_with_potential(|x: f64| (2.0 * x).cos(), grid.length())
            .unwrap(),
        cmap(2.0),
        cmap(1.0),
        grid,
    )
    .unwrap();
    let params = SchemeParams::default();
    // eps list reaches 1e-3 and below
    assert!(*default_eps_list().last().unwrap() <= 1e-3);
    let curve = alpha_curve(
        &fam,
        &[-1.0, 0.0, 1.0],
        &default_eps_list(),
        0,
        &params,
        1e-2,
        2,
    )
    .unwrap();
    let slope_err = (curve.fitted_slope + 0.5).abs();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = slope_err <= 5e-2 && curve.monotone_ok && curve.lipschitz_ok && elapsed < 300.0;
    println!(
        "ACCEPTANCE 3 (alpha line): {} — slope {:.4} (err {slope_err:.1e} vs 5e-2), \
         monotone {} lipschitz {}, {elapsed:.1}s",
        if pass { "PASS" } else { "FAIL" },
        curve.fitted_slope,
        curve.monotone_ok,
        curve.lipschitz_ok,
    );
    assert!(slope_err <= 5e-2, "slope {}", curve.fitted_slope);
    assert!(curve.monotone_ok, "worst {}", curve.worst_monotonicity_violation);
    assert!(curve.lipschitz_ok, "worst {}", curve.worst_lipschitz_violation);
    assert!(elapsed < 300.0, "runtime {elapsed}");
}

#[test]
fn acceptance_4_fixed_point() {
    let start = Instant::now();
    let grid = TorusGrid::standard(256).unwrap();
    let fam = DiscountedFamily::new(quad(grid), quad(grid), cmap(1.0), cmap(1.0), grid).unwrap();
    let params = SchemeParams::default();
    let c0 = find_c0(&fam, (-1.0, 1.0), 1e-3, &default_eps_list(), 0, &params).unwrap();
    // re-solve the system at (c0, c0) and check the pair residual
    let confirm = vanishing_discount(&fam, c0, &default_eps_list(), 0, &params).unwrap();
    let ce = fam.critical_system(c0, c0).unwrap();
    let res = coupled_residual(
        &ce,
        &[confirm.pair.0.clone(), confirm.pair.1.clone()],
        &Viscosity::Auto,
    )
    .unwrap();
    let worst = res[0].max(res[1]);
    let threshold = 4.0 * grid.spacing();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = c0.abs() <= 1e-3 && worst <= threshold;
    println!(
        "ACCEPTANCE 4 (fixed point c0): {} — c0 = {c0:.2e} (vs 1e-3), \
         re-solve residual {worst:.2e} vs {threshold:.2e}, {elapsed:.1}s",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(c0.abs() <= 1e-3, "c0 = {c0}");
    assert!(worst <= threshold, "residual {worst}");
}

#[test]
fn acceptance_5_iteration_bounds() {
    let start = Instant::now();
    let grid = TorusGrid::standard(256).unwrap();
    let spec = chi016_spec(grid);
    let params = SchemeParams::default().with_viscosity(6.0);
    let trace = gauss_seidel(&spec, None, &params).unwrap();
    assert!(trace.converged);
    let ledger = bounds_ledger(&spec).unwrap();
    assert!((ledger.kappa - 0.16).abs() < 1e-12);
    let report = verify_iteration_bounds(&trace, &ledger, 10.0 * params.tol).unwrap();

    // cross-check against the evolutionary long-time limit
    let phi = vec![GridField::zeros(grid), GridField::zeros(grid)];
    let lt = long_time_limit(&spec, &phi, &params, 120.0, Some(trace.final_fields())).unwrap();
    let mut dist = 0.0f64;
    for (a, b) in lt.terminal.iter().zip(trace.final_fields()) {
        dist = dist.max(a.sup_dist(b).unwrap());
    }
    let threshold = 4.0 * grid.spacing();
    let elapsed = start.elapsed().as_secs_f64();
    let pass =
        report.violations == 0 && lt.converged && dist <= threshold && elapsed < 120.0;
    println!(
        "ACCEPTANCE 5 (iteration bounds + large-time cross-check): {} — \
         {} sweeps, 0 expected bound violations (got {}), long-time distance {dist:.2e} \
         vs {threshold:.2e}, {elapsed:.1}s",
        if pass { "PASS" } else { "FAIL" },
        trace.sweeps.len(),
        report.violations,
    );
    assert_eq!(report.violations, 0);
    assert!(lt.converged);
    assert!(dist <= threshold, "{dist}");
    assert!(elapsed < 120.0, "runtime {elapsed}");
}

#[test]
fn acceptance_6_decreasing_pipeline() {
    let start = Instant::now();
    let grid = TorusGrid::standard(256).unwrap();
    let prob = standalone_problem(
        quad(grid),
        |x: f64, u: f64| -u + x.sin(),
        Monotonicity::Decreasing,
        1.0,
        1.0,
        grid,
    )
    .unwrap();
    let params = SchemeParams::default();
    let pipe = solve_decreasing_detailed(&prob, &params).unwrap();

    let r = residual(&prob, &pipe.solution);
    let threshold = 4.0 * grid.spacing();

    // Lemma-derived sup bound with the ledger constants for this problem:
    // Theta = 1, lambda = 1, H = max|sin| = 1; delta from the dyadic menu is
    // 1 with C = max over |q| <= 1 of (q^2/4 - sin x at its worst) computed
    // through the Legendre machinery below; mu = pi.
    let mut c_bound = f64::NEG_INFINITY;
    for k in 0..grid.n() {
        let x = grid.node(k);
        for j in 0..33 {
            let q = -1.0 + 2.0 * j as f64 / 32.0;
            let lk = legendre(prob.kinetic(), x, q, 2.0).unwrap();
            c_bound = c_bound.max(lk - prob.coupling_at_node(k, 0.0));
        }
    }
    let mu = grid.diameter() / 1.0;
    let a_const = mu * mu.exp();
    let b_const = c_bound * mu * mu.exp();
    let dv_bound = (1.0 + a_const) * 1.0 + b_const;

    let monotone_ok = pipe.run.monotone_flag;
    let u_minus = &pipe.transformed_solution;
    let v_plus = &pipe.forward_fixed_point;
    let idx = aubry_set(u_minus, v_plus, default_aubry_tol(grid)).unwrap();
    let l0 = c_bound + u_minus.sup_norm();
    let lower = idx
        .iter()
        .map(|&k| u_minus.values()[k])
        .fold(f64::NEG_INFINITY, f64::max)
        - l0 * mu * mu.exp();
    let uplus_ok = v_plus.values().iter().all(|&v| v >= lower);
    let elapsed = start.elapsed().as_secs_f64();
    let pass = r <= threshold
        && monotone_ok
        && pipe.solution.sup_norm() <= dv_bound
        && !idx.is_empty()
        && uplus_ok;
    println!(
        "ACCEPTANCE 6 (decreasing pipeline): {} — residual {r:.2e} vs {threshold:.2e}, \
         monotone run {} (worst violation {:.2e}), sup {:.3} vs bound {:.1}, \
         Aubry nodes {}, forward lower bound ok {}, {elapsed:.1}s",
        if pass { "PASS" } else { "FAIL" },
        monotone_ok,
        pipe.run.worst_violation,
        pipe.solution.sup_norm(),
        dv_bound,
        idx.len(),
        uplus_ok,
    );
    assert!(r <= threshold, "residual {r}");
    assert!(monotone_ok, "violation {}", pipe.run.worst_violation);
    assert!(pipe.solution.sup_norm() <= dv_bound);
    assert!(!idx.is_empty());
    assert!(uplus_ok);
}

#[test]
fn acceptance_7_comparison_suite() {
    let start = Instant::now();
    let grid = TorusGrid::standard(128).unwrap();
    let spec = chi016_spec(grid);
    let sigma = 6.0;
    let params = SchemeParams::default().with_viscosity(sigma);
    let mut rng = StdRng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let a1: f64 = rng.gen_range(-0.5..0.5);
        let a2: f64 = rng.gen_range(-0.5..0.5);
        let ph1: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let ph2: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let off1: f64 = rng.gen_range(0.0..0.4);
        let off2: f64 = rng.gen_range(0.0..0.4);
        let b1: f64 = rng.gen_range(0.0..0.2);
        let lo = vec![
            GridField::sample(grid, |x| a1 * (x + ph1).sin()).unwrap(),
            GridField::sample(grid, |x| a2 * (2.0 * x + ph2).cos()).unwrap(),
        ];
        let hi = vec![
            GridField::sample(grid, |x| a1 * (x + ph1).sin() + off1 + b1 * (1.0 + x.cos()))
                .unwrap(),
            GridField::sample(grid, |x| a2 * (2.0 * x + ph2).cos() + off2).unwrap(),
        ];
        let tl = evolve_coupled(&spec, &lo, 1.0, &params).unwrap();
        let th = evolve_coupled(&spec, &hi, 1.0, &params).unwrap();
        for i in 0..2 {
            for (fa, fb) in tl.components[i].frames().iter().zip(th.components[i].frames()) {
                worst = worst.max(fa.max_signed_gap(fb).unwrap());
            }
        }
    }
    let allowed = 10.0 * params.tol;
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= allowed;
    println!(
        "ACCEPTANCE 7 (comparison suite): {} — 50 ordered pairs, worst order violation \
         {worst:.2e} vs {allowed:.2e}, {elapsed:.1}s",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(worst <= allowed, "{worst}");
}

#[test]
fn acceptance_8_lower_limit_non_solution() {
    let start = Instant::now();
    let grid = TorusGrid::standard(256).unwrap();
    let spec = strongly_coupled_system(grid);
    // residual of the constant pair (-1, -1): gradient and dissipation
    // terms vanish exactly, equation 1 reads |0|^2 + 1 - (-1) - 1 = 1
    let pair = [
        GridField::constant(grid, -1.0),
        GridField::constant(grid, -1.0),
    ];
    let res = coupled_residual(&spec, &pair, &Viscosity::Auto).unwrap();
    let exact = (res[0] - 1.0).abs() < 1e-12;

    let phi = vec![
        GridField::sample(grid, f64::sin).unwrap(),
        GridField::sample(grid, f64::cos).unwrap(),
    ];
    let t_max = 8.0 * std::f64::consts::PI;
    let params = SchemeParams::default();
    let lt = long_time_limit(&spec, &phi, &params, t_max, None).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let pass = exact && !lt.converged;
    println!(
        "ACCEPTANCE 8 (lower-limit non-solution): {} — eq-1 residual of (-1,-1) = {:.12} \
         (exact {}), trajectory converged = {} at t = {:.1} of {t_max:.1}, {elapsed:.1}s",
        if pass { "PASS" } else { "FAIL" },
        res[0],
        exact,
        lt.converged,
        lt.t_reached,
    );
    assert!(exact, "eq-1 residual {}", res[0]);
    assert!(
        !lt.converged,
        "trajectory converged at t = {:.1} < 8 pi: floating-point noise is amplified \
         by the orbit instability (~e^1.5t), so the computed trajectory collapses onto \
         the stable stationary pair (1, 0) and the convergence detector fires; \
         sustained oscillation over [0, 8 pi] is not attainable in f64",
        lt.t_reached
    );
}

#[test]
fn acceptance_9_convergence_order() {
    let start = Instant::now();
    let sigma = 3.0;
    // (a) scalar increasing: u = cos x solves p^2 + V + 2u = 0 with
    //     V = -sin^2 x - 2 cos x
    let mut scalar_res = Vec::new();
    // (b) manufactured coupled pair: (cos x, sin x) solves the sign-patterned system
    //     p^2 + V_i + u_i - 0.4 u_j = 0 with
    //     V_1 = -sin^2 x - cos x + 0.4 sin x,
    //     V_2 = -cos^2 x - sin x + 0.4 cos x
    let mut pair_res = Vec::new();
    // (c) scalar decreasing-sampled: u = cos x solves p^2 + W - 2u = 0 with
    //     W = -sin^2 x + 2 cos x
    let mut dec_res = Vec::new();
    for n in [128usize, 256, 512] {
        let grid = TorusGrid::standard(n).unwrap();
        let v_kin = KineticHamiltonian::new(
            |x: f64, p: f64| p * p - x.sin() * x.sin() - 2.0 * x.cos(),
            3.0,
            grid.length(),
        )
        .unwrap();
        let prob = standalone_problem(
            v_kin,
            |_x, u: f64| 2.0 * u,
            Monotonicity::Increasing,
            2.0,
            2.0,
            grid,
        )
        .unwrap();
        let u = GridField::sample(grid, f64::cos).unwrap();
        scalar_res.push(residual_with(&prob, &u, sigma));

        let k1 = KineticHamiltonian::new(
            |x: f64, p: f64| p * p - x.sin() * x.sin() - x.cos() + 0.4 * x.sin(),
            3.0,
            grid.length(),
        )
        .unwrap();
        let k2 = KineticHamiltonian::new(
            |x: f64, p: f64| p * p - x.cos() * x.cos() - x.sin() + 0.4 * x.cos(),
            3.0,
            grid.length(),
        )
        .unwrap();
        let spec = SystemSpec::new(
            vec![k1, k2],
            CouplingLaw::Linear {
                lambda: vec![vec![cmap(1.0), cmap(-0.4)], vec![cmap(-0.4), cmap(1.0)]],
                monotone: true,
            },
            vec![0.0, 0.0],
            grid,
        )
        .unwrap();
        let pair = [
            GridField::sample(grid, f64::cos).unwrap(),
            GridField::sample(grid, f64::sin).unwrap(),
        ];
        let res = coupled_residual(&spec, &pair, &Viscosity::Fixed(sigma)).unwrap();
        pair_res.push(res[0].max(res[1]));

        let w_kin = KineticHamiltonian::new(
            |x: f64, p: f64| p * p - x.sin() * x.sin() + 2.0 * x.cos(),
            3.0,
            grid.length(),
        )
        .unwrap();
        let dprob = standalone_problem(
            w_kin,
            |_x, u: f64| -2.0 * u,
            Monotonicity::Decreasing,
            2.0,
            2.0,
            grid,
        )
        .unwrap();
        dec_res.push(residual_with(&dprob, &u, sigma));
    }
    let mut pass = true;
    let mut detail = String::new();
    for (name, r) in [
        ("increasing", &scalar_res),
        ("coupled pair", &pair_res),
        ("decreasing", &dec_res),
    ] {
        for w in r.windows(2) {
            let ratio = w[1] / w[0];
            detail.push_str(&format!("{name}: {ratio:.3} "));
            if !(0.375..=0.625).contains(&ratio) {
                pass = false;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    println!(
        "ACCEPTANCE 9 (convergence order): {} — halving ratios {detail}, {elapsed:.1}s",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "ratios {detail}; residuals {scalar_res:?} {pair_res:?} {dec_res:?}");
}
