//! Fixed-seed invariant suites behind `weakval verify`.

use std::io::Write;
use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use weakval::channel::{apply_to_density, apply_to_w, dilation_output, kraus_from_dilation, s_matrix_identity_check, Channel};
use weakval::decoherence::{decoherent_weak_value, dressed_channel, verify_decoherent_limit, EnvironmentModel};
use weakval::linalg::{c, max_diff, tensor, CMatrix, DensityOp, QOperator, QState};
use weakval::probe::{
    cnot_probability, cnot_probability_circuit, cnot_weak_value_estimate, exact_von_neumann, full_order_probe,
    gaussian_probe, probe_moments, protective_measurement, qubit_probe_shift, verify_weak_limit, BlochVector,
    CnotSetup, GridParams, ProtectiveConfig, QubitProbeSetup, DEFAULT_EPSILONS,
};
use weakval::random::{random_basis, random_density, random_hermitian, random_state, random_unit_vector, random_unitary};
use weakval::two_state::{abl_probabilities, build_w};
use weakval::weak::{
    bayes_decomposition, completeness_sum, expectation_via_weak_values, variance_via_weak_values, weak_value,
    PrePostSelection,
};

use crate::error::CliError;

pub const SUITES: [&str; 5] = ["identities", "channels", "probe", "cnot", "decoherence"];

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub passed: bool,
}

fn at_most(name: &str, value: f64, bound: f64) -> Check {
    Check { name: name.into(), value, bound, passed: value <= bound }
}

fn at_least(name: &str, value: f64, bound: f64) -> Check {
    Check { name: name.into(), value, bound, passed: value >= bound }
}

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn hermitian(m: CMatrix) -> weakval::Result<QOperator> {
    QOperator::hermitian(m)
}

fn identities(rng: &mut ChaCha8Rng) -> weakval::Result<Vec<Check>> {
    let (mut e_exp, mut e_var, mut e_comp, mut e_bayes, mut e_abl) = (0f64, 0f64, 0f64, 0f64, 0f64);
    for k in 0..200 {
        let d = 2 + k % 7;
        let psi = random_state(d, rng);
        let a = hermitian(random_hermitian(d, rng))?;
        let basis = random_basis(d, rng);
        let av = a.matrix() * psi.amps();
        let mean = psi.amps().dotc(&av);
        let second = av.norm_squared();
        e_exp = e_exp.max((expectation_via_weak_values(&psi, &a, &basis)? - mean).norm());
        e_var = e_var.max((variance_via_weak_values(&psi, &a, &basis)? - c(second - mean.re * mean.re, 0.0)).norm());
        let sel = PrePostSelection::new(psi.clone(), random_state(d, rng))?;
        e_comp = e_comp.max((completeness_sum(&sel, &basis)? - c(1.0, 0.0)).norm());
        let target = random_state(d, rng);
        e_bayes = e_bayes.max((bayes_decomposition(&psi, &target, &basis)? - target.inner(&psi).norm_sqr()).abs());
        e_abl = e_abl.max((abl_probabilities(&sel, &a)?.probabilities.iter().sum::<f64>() - 1.0).abs());
    }
    let s = 1.0 / 3f64.sqrt();
    let pre = QState::new(vec![c(s, 0.0), c(s, 0.0), c(s, 0.0)])?;
    let post = QState::new(vec![c(s, 0.0), c(s, 0.0), c(-s, 0.0)])?;
    let sel = PrePostSelection::new(pre, post)?;
    let boxes: Vec<f64> = (0..3)
        .map(|k| {
            let p = QState::basis(3, k).projector();
            let dist = abl_probabilities(&sel, &p)?;
            Ok(dist.eigenvalues.iter().zip(&dist.probabilities).filter(|(v, _)| **v > 0.5).map(|(_, p)| *p).sum())
        })
        .collect::<weakval::Result<_>>()?;
    let w3 = weak_value(&sel, &QState::basis(3, 2).projector())?.value;
    Ok(vec![
        at_most("expectation_via_weak_values", e_exp, 1e-9),
        at_most("variance_via_weak_values", e_var, 1e-9),
        at_most("completeness_sum", e_comp, 1e-10),
        at_most("bayes_decomposition", e_bayes, 1e-10),
        at_most("abl_normalization", e_abl, 1e-12),
        at_most("three_box_pr_box1", (boxes[0] - 1.0).abs(), 1e-12),
        at_most("three_box_pr_box2", (boxes[1] - 1.0).abs(), 1e-12),
        at_most("three_box_pr_box3_one_fifth", (boxes[2] - 0.2).abs(), 1e-12),
        at_most("three_box_weak_value_box3", (w3 + 1.0).norm(), 1e-12),
    ])
}

fn random_model(rng: &mut ChaCha8Rng) -> weakval::Result<EnvironmentModel> {
    EnvironmentModel::new(
        hermitian(random_hermitian(2, rng))?,
        hermitian(random_hermitian(4, rng))?,
        random_state(2, rng),
        random_state(2, rng),
        QState::computational_basis(2),
        (0.0, 0.6, 1.1),
    )
}

fn channels(rng: &mut ChaCha8Rng) -> weakval::Result<Vec<Check>> {
    let mut e_dil = 0f64;
    for _ in 0..50 {
        let u = QOperator::unitary(random_unitary(4, rng))?;
        let init = random_state(2, rng);
        let ch = kraus_from_dilation(&u, &init, &QState::computational_basis(2))?;
        let rho = DensityOp::new(random_density(2, rng))?;
        let via_kraus = apply_to_density(&ch, &rho)?;
        e_dil = e_dil.max(max_diff(via_kraus.matrix(), &dilation_output(&u, &rho, &init)?));
    }
    let (mut e_norm, mut e_s) = (0f64, 0f64);
    for _ in 0..20 {
        let env = random_model(rng)?;
        let ch = dressed_channel(&env)?;
        let mut se = CMatrix::zeros(2, 2);
        let mut sf = CMatrix::zeros(2, 2);
        for (e, f) in ch.kraus_e().iter().zip(ch.kraus_f()) {
            se += e.matrix().adjoint() * e.matrix();
            sf += f.matrix().adjoint() * f.matrix();
        }
        let id = CMatrix::identity(2, 2);
        e_norm = e_norm.max(max_diff(&se, &id)).max(max_diff(&sf, &id));
        let (u, v) = env.sliced_evolutions()?;
        e_s = e_s.max(s_matrix_identity_check(&ch, &u, &v, env.e_i(), env.e_f())?);
    }
    // dephasing: E(W)E(W)† against E(WW†) for W = |+⟩⟨+|
    let dephasing = Channel::new(vec![QState::basis(2, 0).projector().into_matrix(), QState::basis(2, 1).projector().into_matrix()])?;
    let plus = QState::plus();
    let w = build_w(&PrePostSelection::new(plus.clone(), plus.clone())?);
    let ew = apply_to_w(&dephasing, &w)?;
    let squared = ew.matrix() * ew.matrix().adjoint();
    let rho_out = apply_to_density(&dephasing, &plus.density())?;
    let gap = max_diff(&squared, rho_out.matrix());
    Ok(vec![
        at_most("dilation_equivalence", e_dil, 1e-9),
        at_most("kraus_normalizations", e_norm, 1e-8),
        at_most("s_matrix_identity", e_s, 1e-8),
        at_least("w_channel_counterexample_gap", gap, 1e-3),
    ])
}

fn probe(rng: &mut ChaCha8Rng) -> weakval::Result<Vec<Check>> {
    let xi = gaussian_probe(0.0, 1.0, GridParams::for_width(1.0))?;
    let m = probe_moments(&xi)?;
    let mut checks = vec![at_most("gaussian_var_p", (m.var_p - 0.25).abs() / 0.25, 1e-6)];

    let g_list = [1e-2, 1e-3, 1e-4, 1e-5];
    let (mut min_order, mut coeff_err) = (f64::INFINITY, 0f64);
    let mut instances = 0;
    while instances < 4 {
        let d = 2 + instances % 2;
        let sel = PrePostSelection::new(random_state(d, rng), random_state(d, rng))?;
        let a = hermitian(random_hermitian(d, rng))?;
        let w = weak_value(&sel, &a)?.value;
        if w.norm() > 1.0 {
            continue;
        }
        instances += 1;
        let r = verify_weak_limit(&sel, &a, &xi, &g_list)?;
        min_order = min_order.min(r.order_q.unwrap_or(f64::INFINITY)).min(r.order_p.unwrap_or(f64::INFINITY));
        coeff_err = coeff_err.max((r.coeff_q[0] - w.re).abs() / w.re.abs().max(1e-3));
        if w.im.abs() > 1e-3 {
            coeff_err = coeff_err.max((r.coeff_p[0] - 2.0 * w.im * m.var_p).abs() / (2.0 * w.im * m.var_p).abs());
        }
    }
    checks.push(at_least("weak_limit_residual_order", min_order, 1.9));
    checks.push(at_most("weak_limit_leading_coefficient", coeff_err, 1e-3));

    let (ct, st) = (0.505f64.sqrt(), 0.495f64.sqrt());
    let amp = PrePostSelection::new(QState::normalized(vec![c(ct, 0.0), c(st, 0.0)])?, QState::normalized(vec![c(ct, 0.0), c(-st, 0.0)])?)?;
    let z = QOperator::pauli_z();
    let g = 1e-6;
    let out = exact_von_neumann(&amp, &z, &xi, g)?;
    let dq = probe_moments(&out.xi_out)?.mean_q - m.mean_q;
    checks.push(at_most("amplification_weak_value", (weak_value(&amp, &z)?.value - c(100.0, 0.0)).norm(), 1e-9));
    checks.push(at_most("amplification_shift_relative", (dq / g - 100.0).abs() / 100.0, 0.01));

    let mut e_full = 0f64;
    for k in 0..20 {
        let d = 2 + k % 3;
        let sel = PrePostSelection::new(random_state(d, rng), random_state(d, rng))?;
        let p = random_state(d, rng).projector();
        let g = 5.0 * uniform(rng);
        let spectral = exact_von_neumann(&sel, &p, &xi, g)?.xi_out;
        e_full = e_full.max(spectral.max_diff(&full_order_probe(&sel, &p, &xi, g)?));
    }
    checks.push(at_most("full_order_identity", e_full, 1e-10));

    let mut ratio = 0f64;
    for _ in 0..5 {
        let setup = QubitProbeSetup {
            r_i: BlochVector::pure(random_unit_vector(rng))?,
            r_f: BlochVector::pure(random_unit_vector(rng))?,
            m: BlochVector::pure(random_unit_vector(rng))?,
            v: random_unit_vector(rng),
            q: random_unit_vector(rng),
        };
        let a = QOperator::pauli_dot(random_unit_vector(rng));
        let Ok(w) = weak_value(&PrePostSelection::new(setup.r_i.to_state()?, setup.r_f.to_state()?)?, &a) else {
            continue;
        };
        let scale = w.value.norm().max(1.0).powi(2);
        for g in [1e-2, 1e-3, 1e-4] {
            ratio = ratio.max(qubit_probe_shift(&setup, &a, g)?.residual() / (g * g * scale));
        }
    }
    checks.push(at_most("qubit_probe_residual_over_g2", ratio, 100.0));

    let heavy = gaussian_probe(0.0, 1.0, GridParams::for_width(1.0).with_mass(1e3))?;
    let cfg = ProtectiveConfig { total_time: 1.0, n_steps: 1000, ..Default::default() };
    let a = QOperator::diagonal(&[0.7, -0.2]);
    let out = protective_measurement(|_| QOperator::diagonal(&[-0.5, 0.5]), |_| 0.3, &heavy, &a, &cfg)?;
    checks.push(at_most("protective_commuting_case", (out.dq - 0.21).abs(), 1e-10));
    Ok(checks)
}

fn cnot(rng: &mut ChaCha8Rng) -> weakval::Result<Vec<Check>> {
    let (mut e_circuit, mut e_strong) = (0f64, 0f64);
    for _ in 0..200 {
        let pre = random_state(2, rng);
        let post = random_state(2, rng);
        let eps = 0.4 * uniform(rng) - 0.2;
        let setup = CnotSetup::with_epsilon(pre.clone(), post.clone(), eps)?;
        for k in 0..2 {
            e_circuit = e_circuit.max((cnot_probability(&setup, k)? - cnot_probability_circuit(&setup, k)?).abs());
        }
        let strong = CnotSetup::from_states(pre.clone(), post.clone(), 1.0, 0.0)?;
        let dist = abl_probabilities(&PrePostSelection::new(pre, post)?, &QOperator::pauli_z())?;
        // eigenvalues ascend: −1 ↔ |1⟩, +1 ↔ |0⟩
        e_strong = e_strong.max((cnot_probability(&strong, 0)? - dist.probabilities[1]).abs());
    }
    let (mut e_re, mut e_slope) = (0f64, 0f64);
    let mut done = 0;
    while done < 20 {
        let pre = random_state(2, rng);
        let post = random_state(2, rng);
        let sel = PrePostSelection::new(pre.clone(), post.clone())?;
        if sel.overlap().norm() < 0.3 {
            continue;
        }
        done += 1;
        for k in 0..2 {
            let w = weak_value(&sel, &QState::basis(2, k).projector())?.value;
            let est = cnot_weak_value_estimate(&pre, &post, k, &DEFAULT_EPSILONS)?;
            e_re = e_re.max((est.re_est - w.re).abs());
            e_slope = e_slope.max(est.slope.abs());
        }
    }
    Ok(vec![
        at_most("closed_form_vs_circuit", e_circuit, 1e-12),
        at_most("strong_limit_matches_abl", e_strong, 1e-12),
        at_most("estimate_real_part", e_re, 1e-6),
        at_most("estimate_slope_exact_zero", e_slope, 1e-6),
    ])
}

fn decoherence(rng: &mut ChaCha8Rng) -> weakval::Result<Vec<Check>> {
    let (mut e_slice, mut e_plain) = (0f64, 0f64);
    for _ in 0..10 {
        let env = random_model(rng)?;
        let (us, vs) = env.sliced_evolutions()?;
        let (ue, ve) = env.exact_evolutions();
        e_slice = e_slice.max(max_diff(us.matrix(), ue.matrix())).max(max_diff(vs.matrix(), ve.matrix()));

        let e0 = QState::basis(2, 0);
        let decoupled = EnvironmentModel::new(
            env.h0().clone(),
            QOperator::diagonal(&[0.0; 4]),
            e0.clone(),
            e0,
            QState::computational_basis(2),
            env.times(),
        )?;
        let sel = PrePostSelection::new(random_state(2, rng), random_state(2, rng))?;
        let a = hermitian(random_hermitian(2, rng))?;
        let (u0, v0) = decoupled.free_evolutions();
        let plain = weak_value(&PrePostSelection::with_evolutions(sel.pre().clone(), sel.post().clone(), u0, v0)?, &a)?.value;
        e_plain = e_plain.max((decoherent_weak_value(&decoupled, &sel, &a)? - plain).norm() / plain.norm().max(1.0));
    }
    let xi = gaussian_probe(0.0, 1.0, GridParams::for_width(1.0))?;
    let h1 = hermitian(tensor(&QOperator::pauli_z(), &QOperator::pauli_x()).into_matrix() * c(0.8, 0.0))?;
    let h0 = hermitian(QOperator::pauli_x().into_matrix() * c(0.3, 0.0))?;
    let e0 = QState::basis(2, 0);
    let env = EnvironmentModel::new(h0, h1, e0.clone(), e0, QState::computational_basis(2), (0.0, 0.7, 1.3))?;
    let sel = PrePostSelection::new(
        QState::normalized(vec![c(1.0, 0.0), c(0.6, 0.3)])?,
        QState::normalized(vec![c(0.8, 0.0), c(-0.2, 0.9)])?,
    )?;
    let report = verify_decoherent_limit(&env, &sel, &QOperator::pauli_z(), &xi, &[5e-3, 1e-3, 1e-4, 1e-5])?;
    let order = report.order_q.unwrap_or(f64::INFINITY).min(report.order_p.unwrap_or(f64::INFINITY));
    Ok(vec![
        at_most("sliced_vs_exact_propagators", e_slice, 1e-10),
        at_most("decoupled_reduction", e_plain, 1e-10),
        at_least("dephasing_residual_order", order, 1.9),
    ])
}

/// Runs one suite; errors from the library become a failed `error` check.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<Check>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let result = match name {
        "identities" => identities(&mut rng),
        "channels" => channels(&mut rng),
        "probe" => probe(&mut rng),
        "cnot" => cnot(&mut rng),
        "decoherence" => decoherence(&mut rng),
        other => {
            return Err(CliError::Config(format!("unknown suite `{other}`, expected one of {} or all", SUITES.join(", "))))
        }
    };
    Ok(result.unwrap_or_else(|e| vec![Check { name: format!("error: {e}"), value: f64::NAN, bound: f64::NAN, passed: false }]))
}

fn number(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

/// Writes one JSON line per check and one summary line per suite; returns
/// the number of failed checks.
pub fn verify<W: Write>(suite: &str, seed: u64, out: &mut W) -> Result<usize, CliError> {
    let names: Vec<&str> = if suite == "all" { SUITES.to_vec() } else { vec![suite] };
    if let Some(bad) = names.iter().find(|n| !SUITES.contains(n)) {
        return Err(CliError::Config(format!("unknown suite `{bad}`, expected one of {} or all", SUITES.join(", "))));
    }
    let mut failures = 0;
    for name in names {
        let start = Instant::now();
        let checks = run_suite(name, seed)?;
        let failed = checks.iter().filter(|c| !c.passed).count();
        failures += failed;
        for c in &checks {
            let line = json!({"suite": name, "check": c.name, "value": number(c.value), "bound": number(c.bound), "passed": c.passed});
            writeln!(out, "{line}")?;
        }
        let summary = json!({"suite": name, "checks": checks.len(), "failed": failed, "seconds": start.elapsed().as_secs_f64()});
        writeln!(out, "{summary}")?;
    }
    Ok(failures)
}
