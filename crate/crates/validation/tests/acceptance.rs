//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Expected values come from the closed forms in
//! `weakval_validation`, independently of the library routes under test.

use std::f64::consts::PI;
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weakval::channel::{apply_to_density, apply_to_w, kraus_from_dilation, Channel};
use weakval::decoherence::{decoherent_probe_shifts, decoherent_weak_value, dressed_channel, verify_decoherent_limit, EnvironmentModel};
use weakval::linalg::{c, tensor, CMatrix, DensityOp, QOperator, QState, C64};
use weakval::probe::{
    adiabatic_shift_quadrature, cnot_probability, cnot_probability_circuit, cnot_readout, cnot_weak_value_estimate,
    exact_shifts, exact_von_neumann, full_order_probe, gaussian_probe, protective_measurement, verify_weak_limit,
    CnotSetup, GridParams, ProtectiveConfig, DEFAULT_EPSILONS,
};
use weakval::random::{random_basis, random_density, random_hermitian, random_state, random_unit_vector, random_unitary};
use weakval::two_state::{abl_probabilities, build_w};
use weakval::weak::{
    bayes_decomposition, completeness_sum, expectation_via_weak_values, variance_via_weak_values, weak_value,
    PrePostSelection,
};
use clap::Parser;
use weakval_cli::app::{execute, Cli};
use weakval_cli::{parse_config, run_table};
use weakval_validation::{
    cnot_oracle, column, env_block, gaussian_branch_shifts, max_abs, oracle_diff, propagator, slope, spectral_branches,
    trace_out_second,
};

type Outcome = (bool, String);
type Criterion = fn() -> weakval::Result<Outcome>;

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn criterion_1() -> weakval::Result<Outcome> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut e_exp, mut e_var, mut e_comp, mut e_bayes) = (0f64, 0f64, 0f64, 0f64);
    for k in 0..1000 {
        let d = 2 + k % 7;
        let psi = random_state(d, &mut rng);
        let a = QOperator::hermitian(random_hermitian(d, &mut rng))?;
        let basis = random_basis(d, &mut rng);
        let v = column(&psi);
        let mean = (v.adjoint() * a.matrix() * &v)[(0, 0)];
        let second = (v.adjoint() * a.matrix() * a.matrix() * &v)[(0, 0)];
        e_exp = e_exp.max((expectation_via_weak_values(&psi, &a, &basis)? - mean).norm());
        e_var = e_var.max((variance_via_weak_values(&psi, &a, &basis)? - (second - mean * mean)).norm());
        let sel = PrePostSelection::new(psi.clone(), random_state(d, &mut rng))?;
        e_comp = e_comp.max((completeness_sum(&sel, &basis)? - 1.0).norm());
        let target = random_state(d, &mut rng);
        let direct = (column(&target).adjoint() * &v)[(0, 0)].norm_sqr();
        e_bayes = e_bayes.max((bayes_decomposition(&psi, &target, &basis)? - direct).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = e_exp <= 1e-9 && e_var <= 1e-9 && e_comp <= 1e-10 && e_bayes <= 1e-10 && secs < 10.0;
    Ok((pass, format!("mean {e_exp:.1e}, variance {e_var:.1e}, completeness {e_comp:.1e}, bayes {e_bayes:.1e}, {secs:.2} s")))
}

fn criterion_2() -> weakval::Result<Outcome> {
    let cfg = parse_config("preset = \"three-box\"\nscenario = \"abl\"\n[sweep]\nparameter = \"t\"\nvalues = [0.0]\n")
        .map_err(|e| weakval::Error::InvalidArgument(e.to_string()))?;
    let table = run_table(&cfg, 0, 1).map_err(|e| weakval::Error::InvalidArgument(e.to_string()))?;
    let pr = |name: &str| table.rows[0][table.columns.iter().position(|h| h == name).unwrap()];
    // path amplitudes ⟨f|k⟩⟨k|i⟩ = (1/3, 1/3, −1/3)
    let amps: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0];
    let abl = |k: usize| {
        let inside = amps[k].powi(2);
        let outside = (amps.iter().sum::<f64>() - amps[k]).powi(2);
        inside / (inside + outside)
    };
    let (box1, box3) = (pr("pr_box1"), pr("pr_box3"));
    let boxes_ok = (box1 - 1.0).abs() <= 1e-12 && (box3 - 1.0).abs() <= 1e-12;

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut e_sum, mut e_dist, mut e_strong) = (0f64, 0f64, 0f64);
    for k in 0..200 {
        let d = 2 + k % 5;
        let (pre, post) = (random_state(d, &mut rng), random_state(d, &mut rng));
        let basis = random_basis(d, &mut rng);
        let mut a = CMatrix::zeros(d, d);
        for (j, b) in basis.iter().enumerate() {
            a += column(b) * column(b).adjoint() * c(j as f64, 0.0);
        }
        let sel = PrePostSelection::new(pre.clone(), post.clone())?;
        let dist = abl_probabilities(&sel, &QOperator::hermitian(a)?)?;
        e_sum = e_sum.max((dist.probabilities.iter().sum::<f64>() - 1.0).abs());
        let paths: Vec<f64> = basis.iter().map(|b| (post.inner(b) * b.inner(&pre)).norm_sqr()).collect();
        let total: f64 = paths.iter().sum();
        for (p, q) in dist.probabilities.iter().zip(&paths) {
            e_dist = e_dist.max((p - q / total).abs());
        }
        if d == 2 {
            let strong = CnotSetup::from_states(pre.clone(), post.clone(), 1.0, 0.0)?;
            let zpaths: Vec<f64> = (0..2).map(|m| (post.amps()[m].conj() * pre.amps()[m]).norm_sqr()).collect();
            for m in 0..2 {
                e_strong = e_strong.max((cnot_readout(&strong, m)?.0 - zpaths[m] / (zpaths[0] + zpaths[1])).abs());
            }
        }
    }
    let pass = boxes_ok && e_sum <= 1e-12 && e_dist <= 1e-12 && e_strong <= 1e-12;
    Ok((
        pass,
        format!(
            "Pr[box1] {box1:.12} (oracle {:.12}), Pr[box2] {:.12}, Pr[box3] {box3:.12} (oracle {:.12}, required 1); random sums {e_sum:.1e}, random vs oracle {e_dist:.1e}, strong limit {e_strong:.1e}",
            abl(0),
            pr("pr_box2"),
            abl(2)
        ),
    ))
}

fn criterion_3() -> weakval::Result<Outcome> {
    let start = Instant::now();
    let xi = gaussian_probe(0.0, 1.0, GridParams::for_width(1.0))?;
    let g_list = [1e-2, 1e-3, 1e-4, 1e-5];
    let var_p = 0.25;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut min_order, mut coeff_err, mut route_err) = (f64::INFINITY, 0f64, 0f64);
    let mut done = 0;
    while done < 6 {
        let d = 2 + done % 2;
        let (pre, post) = (random_state(d, &mut rng), random_state(d, &mut rng));
        let basis = random_basis(d, &mut rng);
        let values: Vec<f64> = (0..d).map(|_| 2.0 * uniform(&mut rng) - 1.0).collect();
        let vectors: Vec<CMatrix> = basis.iter().map(column).collect();
        let mut a = CMatrix::zeros(d, d);
        for (v, b) in values.iter().zip(&vectors) {
            a += b * b.adjoint() * c(*v, 0.0);
        }
        let a = QOperator::hermitian(a)?;
        let sel = PrePostSelection::new(pre.clone(), post.clone())?;
        let w = weak_value(&sel, &a)?.value;
        if w.norm() > 2.0 || w.re.abs() < 0.05 || w.im.abs() < 0.05 {
            continue;
        }
        done += 1;
        let branches = spectral_branches(&column(&pre), &column(&post), &values, &vectors);
        let (mut err_q, mut err_p) = (vec![], vec![]);
        for &g in &g_list {
            let (dq, dp) = gaussian_branch_shifts(&branches, g, 1.0);
            err_q.push((dq - g * w.re).abs());
            err_p.push((dp - 2.0 * g * w.im * var_p).abs());
            let (lq, lp) = exact_shifts(&sel, &a, &xi, g)?;
            route_err = route_err.max((lq - dq).abs()).max((lp - dp).abs());
        }
        min_order = min_order.min(slope(&g_list, &err_q)).min(slope(&g_list, &err_p));
        let report = verify_weak_limit(&sel, &a, &xi, &g_list)?;
        min_order = min_order.min(report.order_q.unwrap_or(f64::INFINITY)).min(report.order_p.unwrap_or(f64::INFINITY));
        coeff_err = coeff_err
            .max((report.coeff_q[0] - w.re).abs() / w.re.abs())
            .max((report.coeff_p[0] - 2.0 * w.im * var_p).abs() / (2.0 * w.im * var_p).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = min_order >= 2.0 && coeff_err <= 1e-3 && route_err <= 1e-12 && secs < 60.0;
    Ok((
        pass,
        format!("min residual order {min_order:.3}, leading coefficient rel. error {coeff_err:.1e}, grid vs closed-form shifts {route_err:.1e}, {secs:.2} s"),
    ))
}

fn criterion_4() -> weakval::Result<Outcome> {
    let theta = 0.01f64.acos() / 2.0;
    let (ct, st) = (theta.cos(), theta.sin());
    let pre = QState::new(vec![c(ct, 0.0), c(st, 0.0)])?;
    let post = QState::new(vec![c(ct, 0.0), c(-st, 0.0)])?;
    let sel = PrePostSelection::new(pre, post)?;
    let z = QOperator::pauli_z();
    let w = weak_value(&sel, &z)?.value;
    let oracle_w = (ct * ct + st * st) / (ct * ct - st * st);
    let xi = gaussian_probe(0.0, 1.0, GridParams::for_width(1.0))?;
    let mut worst = 0f64;
    for g in [1e-6, 5e-7, 1e-7] {
        let out = exact_von_neumann(&sel, &z, &xi, g)?;
        let before = weakval::probe::probe_moments(&xi)?.mean_q;
        let after = weakval::probe::probe_moments(&out.xi_out)?.mean_q;
        worst = worst.max(((after - before) / g - 100.0).abs() / 100.0);
        let branches = [(1.0, c(ct * ct, 0.0)), (-1.0, c(-st * st, 0.0))];
        let (dq, _) = gaussian_branch_shifts(&branches, g, 1.0);
        worst = worst.max((dq / g - 100.0).abs() / 100.0);
    }
    let cfg = parse_config("preset = \"spin-amplification\"\nscenario = \"probe-sweep\"\n[sweep]\nparameter = \"g\"\nvalues = [1e-6]\n")
        .map_err(|e| weakval::Error::InvalidArgument(e.to_string()))?;
    let table = run_table(&cfg, 0, 1).map_err(|e| weakval::Error::InvalidArgument(e.to_string()))?;
    let k = table.columns.iter().position(|h| h == "dq_over_g").unwrap();
    worst = worst.max((table.rows[0][k] - 100.0).abs() / 100.0);
    let e_w = (w - oracle_w).norm().max((oracle_w - 100.0).abs());
    let pass = e_w <= 1e-9 && worst <= 0.01;
    Ok((pass, format!("weak value {:.12} (error {e_w:.1e}), worst |Δ[Q]/g − 100|/100 {worst:.1e}", w.re)))
}

fn criterion_5() -> weakval::Result<Outcome> {
    let xi = gaussian_probe(0.0, 1.0, GridParams::for_width(1.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut e_routes, mut e_oracle) = (0f64, 0f64);
    for k in 0..200 {
        let d = 2 + k % 3;
        let (pre, post) = (random_state(d, &mut rng), random_state(d, &mut rng));
        let basis = random_basis(d, &mut rng);
        let rank = 1 + k % (d - 1);
        let mut p = CMatrix::zeros(d, d);
        for b in &basis[..rank] {
            p += column(b) * column(b).adjoint();
        }
        let p = QOperator::hermitian(p)?;
        let sel = PrePostSelection::new(pre.clone(), post.clone())?;
        let g = 5.0 * uniform(&mut rng);
        let full = full_order_probe(&sel, &p, &xi, g)?;
        let spectral = exact_von_neumann(&sel, &p, &xi, g)?.xi_out;
        e_routes = e_routes.max(full.max_diff(&spectral));
        let inside = (column(&post).adjoint() * p.matrix() * column(&pre))[(0, 0)];
        let outside = post.inner(&pre) - inside;
        e_oracle = e_oracle.max(oracle_diff(&full, &[(g, inside), (0.0, outside)]));
    }
    let pass = e_routes <= 1e-10 && e_oracle <= 1e-10;
    Ok((pass, format!("full-order vs spectral {e_routes:.1e}, vs closed-form Gaussian branches {e_oracle:.1e}")))
}

fn criterion_6() -> weakval::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut e_closed = 0f64;
    for _ in 0..500 {
        let (pre, post) = (random_state(2, &mut rng), random_state(2, &mut rng));
        let eps = 0.98 * uniform(&mut rng) - 0.49;
        let setup = CnotSetup::with_epsilon(pre.clone(), post.clone(), eps)?;
        for k in 0..2 {
            let closed = cnot_probability(&setup, k)?;
            e_closed = e_closed
                .max((closed - cnot_probability_circuit(&setup, k)?).abs())
                .max((closed - cnot_oracle(&pre, &post, setup.gamma, setup.eta, k)).abs());
        }
    }
    let (mut e_re, mut e_slope_printed, mut e_slope_exact) = (0f64, 0f64, 0f64);
    let mut done = 0;
    while done < 50 {
        let (pre, post) = (random_state(2, &mut rng), random_state(2, &mut rng));
        let overlap = post.inner(&pre);
        if overlap.norm() < 0.3 {
            continue;
        }
        done += 1;
        for k in 0..2 {
            let w = post.amps()[k].conj() * pre.amps()[k] / overlap;
            let est = cnot_weak_value_estimate(&pre, &post, k, &DEFAULT_EPSILONS)?;
            e_re = e_re.max((est.re_est - w.re).abs());
            let printed = -0.5 * (w.re - 0.5 * w.norm_sqr());
            e_slope_printed = e_slope_printed.max((est.slope - printed).abs());
            let r = |e: f64| {
                let (g, h) = ((0.5 + e).sqrt(), (0.5 - e).sqrt());
                (cnot_oracle(&pre, &post, g, h, k) - h * h) / (g * g - h * h)
            };
            let h = 1e-3;
            let central = (r(h) - r(-h)) / (2.0 * h);
            e_slope_exact = e_slope_exact.max((est.slope - central).abs());
        }
    }
    let pass = e_closed <= 1e-12 && e_re <= 1e-6 && e_slope_printed <= 1e-6;
    Ok((
        pass,
        format!(
            "closed form vs circuit {e_closed:.1e}, Re w {e_re:.1e}, slope vs −½(Re w − ½|w|²) {e_slope_printed:.1e} (vs exact dR/dε {e_slope_exact:.1e})"
        ),
    ))
}

fn random_environment(rng: &mut ChaCha8Rng) -> weakval::Result<EnvironmentModel> {
    EnvironmentModel::new(
        QOperator::hermitian(random_hermitian(2, rng))?,
        QOperator::hermitian(random_hermitian(4, rng))?,
        random_state(2, rng),
        random_state(2, rng),
        QState::computational_basis(2),
        (0.0, 0.6, 1.1),
    )
}

fn criterion_7() -> weakval::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut e_dil, mut e_norm, mut e_s) = (0f64, 0f64, 0f64);
    for _ in 0..100 {
        let u = QOperator::unitary(random_unitary(4, &mut rng))?;
        let init = random_state(2, &mut rng);
        let ch = kraus_from_dilation(&u, &init, &QState::computational_basis(2))?;
        let rho = DensityOp::new(random_density(2, &mut rng))?;
        let joint = rho.matrix().kronecker(&(column(&init) * column(&init).adjoint()));
        let oracle = trace_out_second(&(u.matrix() * joint * u.matrix().adjoint()), 2, 2);
        e_dil = e_dil.max(max_abs(apply_to_density(&ch, &rho)?.matrix(), &oracle));
    }
    for _ in 0..20 {
        let env = random_environment(&mut rng)?;
        let ch = dressed_channel(&env)?;
        let (mut se, mut sf, mut s) = (CMatrix::zeros(2, 2), CMatrix::zeros(2, 2), CMatrix::zeros(2, 2));
        for (e, f) in ch.kraus_e().iter().zip(ch.kraus_f()) {
            se += e.matrix().adjoint() * e.matrix();
            sf += f.matrix().adjoint() * f.matrix();
            s += f.matrix().adjoint() * e.matrix();
        }
        let id = CMatrix::identity(2, 2);
        e_norm = e_norm.max(max_abs(&se, &id)).max(max_abs(&sf, &id));
        let (u, v) = env.sliced_evolutions()?;
        e_s = e_s.max(max_abs(&s, &env_block(&(v.matrix() * u.matrix()), 2, env.e_f(), env.e_i())));
    }
    let dephasing = Channel::new(vec![QState::basis(2, 0).projector().into_matrix(), QState::basis(2, 1).projector().into_matrix()])?;
    let plus = QState::plus();
    let ew = apply_to_w(&dephasing, &build_w(&PrePostSelection::new(plus.clone(), plus.clone())?))?;
    let squared = ew.matrix() * ew.matrix().adjoint();
    let rho_out = apply_to_density(&dephasing, &plus.density())?;
    let gap = max_abs(&squared, rho_out.matrix());
    // diag(¼, ¼) against diag(½, ½)
    let oracle_gap = 0.25;
    let pass = e_dil <= 1e-9 && e_norm <= 1e-9 && e_s <= 1e-8 && gap > 1e-3 && (gap - oracle_gap).abs() <= 1e-12;
    Ok((pass, format!("dilation {e_dil:.1e}, normalizations {e_norm:.1e}, S-matrix {e_s:.1e}, counterexample gap {gap:.3e}")))
}

fn criterion_8() -> weakval::Result<Outcome> {
    let start = Instant::now();
    let xi = gaussian_probe(0.0, 1.0, GridParams::for_width(1.0))?;
    let g_list = [5e-3, 1e-3, 1e-4, 1e-5];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let e0 = QState::basis(2, 0);
    let h0 = QOperator::pauli_x().into_matrix() * c(0.3, 0.0);
    let h1 = tensor(&QOperator::pauli_z(), &QOperator::pauli_x()).into_matrix() * c(0.8, 0.0);
    let mut models = vec![(
        EnvironmentModel::new(QOperator::hermitian(h0)?, QOperator::hermitian(h1)?, e0.clone(), e0.clone(), QState::computational_basis(2), (0.0, 0.7, 1.3))?,
        PrePostSelection::new(QState::normalized(vec![c(1.0, 0.0), c(0.6, 0.3)])?, QState::normalized(vec![c(0.8, 0.0), c(-0.2, 0.9)])?)?,
        [0.0, 0.0, 1.0],
    )];
    while models.len() < 4 {
        let env = random_environment(&mut rng)?;
        let sel = PrePostSelection::new(random_state(2, &mut rng), random_state(2, &mut rng))?;
        let n = random_unit_vector(&mut rng);
        match decoherent_weak_value(&env, &sel, &QOperator::pauli_dot(n)) {
            Ok(w) if w.norm() <= 2.0 => models.push((env, sel, n)),
            _ => {}
        }
    }
    let (mut min_order, mut e_oracle) = (f64::INFINITY, 0f64);
    for (env, sel, n) in &models {
        let a = QOperator::pauli_dot(*n);
        let (ti, t0, tf) = env.times();
        let h = env.h0().matrix().kronecker(&CMatrix::identity(2, 2)) + env.h1().matrix();
        let (u, v) = (propagator(&h, t0 - ti), propagator(&h, tf - t0));
        let pre = column(sel.pre()).kronecker(&column(env.e_i()));
        let post = column(sel.post()).kronecker(&column(env.e_f()));
        let branches: Vec<(f64, C64)> = [1.0, -1.0]
            .iter()
            .map(|s| {
                let p = (CMatrix::identity(2, 2) + a.matrix() * c(*s, 0.0)) * c(0.5, 0.0);
                (*s, (post.adjoint() * &v * p.kronecker(&CMatrix::identity(2, 2)) * &u * &pre)[(0, 0)])
            })
            .collect();
        let (mut err_q, mut err_p) = (vec![], vec![]);
        for &g in &g_list {
            let s = decoherent_probe_shifts(env, sel, &a, &xi, g)?;
            let (dq, dp) = gaussian_branch_shifts(&branches, g, 1.0);
            err_q.push((s.dq - dq).abs());
            err_p.push((s.dp - dp).abs());
            e_oracle = e_oracle.max((s.oracle_dq - dq).abs()).max((s.oracle_dp - dp).abs());
        }
        min_order = min_order.min(slope(&g_list, &err_q)).min(slope(&g_list, &err_p));
        let report = verify_decoherent_limit(env, sel, &a, &xi, &g_list)?;
        min_order = min_order.min(report.order_q.unwrap_or(f64::INFINITY)).min(report.order_p.unwrap_or(f64::INFINITY));
    }

    let mut e_reduce = 0f64;
    for _ in 0..10 {
        let h0 = random_hermitian(2, &mut rng);
        let (pre, post) = (random_state(2, &mut rng), random_state(2, &mut rng));
        let env = EnvironmentModel::new(
            QOperator::hermitian(h0.clone())?,
            QOperator::diagonal(&[0.0; 4]),
            e0.clone(),
            e0.clone(),
            QState::computational_basis(2),
            (0.0, 0.4, 1.0),
        )?;
        let a = QOperator::hermitian(random_hermitian(2, &mut rng))?;
        let (u0, v0) = (propagator(&h0, 0.4), propagator(&h0, 0.6));
        let (i, f) = (column(&pre), column(&post));
        let plain = (f.adjoint() * &v0 * a.matrix() * &u0 * &i)[(0, 0)] / (f.adjoint() * &v0 * &u0 * &i)[(0, 0)];
        let sel = PrePostSelection::new(pre, post)?;
        let w = decoherent_weak_value(&env, &sel, &a)?;
        e_reduce = e_reduce.max((w - plain).norm() / plain.norm().max(1.0));
        let g = 1e-3 / plain.norm().max(1.0);
        let s = decoherent_probe_shifts(&env, &sel, &a, &xi, g)?;
        e_reduce = e_reduce.max((s.dq - g * plain.re).abs()).max((s.dp - 2.0 * g * plain.im * 0.25).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = min_order >= 2.0 && e_reduce <= 1e-10 && secs < 300.0;
    Ok((
        pass,
        format!("min residual order {min_order:.3}, library oracle vs closed form {e_oracle:.1e}, H1 = 0 reduction {e_reduce:.1e}, {secs:.2} s"),
    ))
}

fn criterion_9() -> weakval::Result<Outcome> {
    let heavy = |mass: f64| gaussian_probe(0.0, 1.0, GridParams::for_width(1.0).with_mass(mass));
    let xi = heavy(1e3)?;
    let a = QOperator::diagonal(&[0.7, -0.2]);
    let cfg = ProtectiveConfig { total_time: 1.0, n_steps: 1000, ..Default::default() };
    let commuting = protective_measurement(|_| QOperator::diagonal(&[-0.5, 0.5]), |_| 0.3, &xi, &a, &cfg)?;
    // ground level of diag(−½, ½) is |0⟩, ⟨A⟩ = 0.7, g₀ = 0.3 · 1
    let e_commuting = (commuting.dq - 0.3 * 0.7).abs();

    let (omega, total, coupling) = (2.0, 200.0, 0.01);
    let h = move |t: f64| {
        let th = 0.5 * PI * t / total;
        QOperator::hermitian(QOperator::pauli_dot([th.sin(), 0.0, th.cos()]).into_matrix() * c(0.5 * omega, 0.0)).unwrap()
    };
    let cfg = ProtectiveConfig { total_time: total, n_steps: 10_000, ..Default::default() };
    let z = QOperator::pauli_z();
    let sweep = protective_measurement(h, |_| coupling, &xi, &z, &cfg)?;
    // ground state has Bloch vector −n(t): ∫ −g cos θ dt = −2gT/π
    let oracle = -2.0 * coupling * total / PI;
    let quad = adiabatic_shift_quadrature(h, |_| coupling, &z, &cfg, 2000)?;
    let rel = ((sweep.dq - oracle) / oracle).abs();
    let e_quad = ((quad - oracle) / oracle).abs();
    let pass = e_commuting <= 1e-10 && rel <= 0.02 && e_quad <= 1e-6 && sweep.target_fidelity >= 0.999;
    Ok((
        pass,
        format!(
            "commuting {e_commuting:.1e}, sweep dq {:.6} vs {oracle:.6} ({:.3}%), quadrature {e_quad:.1e}, fidelity {:.6}",
            sweep.dq,
            100.0 * rel,
            sweep.target_fidelity
        ),
    ))
}

fn cli(args: &[&str], sink: &mut Vec<u8>) -> Result<(), String> {
    let parsed = Cli::try_parse_from(std::iter::once("weakval").chain(args.iter().copied())).map_err(|e| e.to_string())?;
    execute(parsed, sink).map_err(|e| e.to_string())
}

fn criterion_10() -> weakval::Result<Outcome> {
    let io = |e: std::io::Error| weakval::Error::InvalidArgument(e.to_string());
    let dir = std::env::temp_dir().join(format!("weakval-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(io)?;
    let cfg = dir.join("config.toml");
    std::fs::write(
        &cfg,
        "scenario = \"probe-sweep\"\nseed = 4\n[system]\nrandom = { dim = 3 }\n[sweep]\nparameter = \"g\"\nvalues = [1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5]\n",
    )
    .map_err(io)?;
    let cfg = cfg.to_string_lossy().into_owned();
    let mut bodies = vec![];
    for workers in ["1", "3", "8"] {
        let out = dir.join(format!("run-{workers}.csv"));
        let status = cli(&["run", "--config", &cfg, "--out", &out.to_string_lossy(), "--workers", workers], &mut vec![]);
        bodies.push(status.ok().map(|_| std::fs::read(&out).unwrap_or_default()));
    }
    let identical = bodies[0].is_some() && bodies.iter().all(|b| b == &bodies[0]);
    let start = Instant::now();
    let mut report = vec![];
    let verify = cli(&["verify", "all"], &mut report);
    let secs = start.elapsed().as_secs_f64();
    let checks = String::from_utf8_lossy(&report).lines().filter(|l| l.contains("\"check\"")).count();
    let _ = std::fs::remove_dir_all(&dir);
    let pass = identical && verify.is_ok() && checks > 0 && secs < 600.0;
    let outcome = verify.err().unwrap_or_else(|| format!("{checks} checks passed"));
    Ok((pass, format!("byte-identical reruns {identical}, verify all: {outcome} in {secs:.2} s")))
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("weak-value statistics identities", criterion_1),
        ("ABL suite", criterion_2),
        ("weak limit of probe shifts", criterion_3),
        ("amplification to 100", criterion_4),
        ("full-order identity", criterion_5),
        ("C-NOT scheme", criterion_6),
        ("channel and W-operator identities", criterion_7),
        ("decoherence shifts", criterion_8),
        ("protective measurement", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let (pass, detail) = run().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            failed += 1;
        }
        println!("criterion {:>2} {} {name}: {detail}", k + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
