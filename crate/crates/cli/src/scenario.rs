//! Turns a validated config into a table, one row per sweep value.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use weakval::decoherence::{decoherent_probe_shifts_with_limit, traced_probe_shifts, EnvironmentModel};
use weakval::linalg::matrix_exponential;
use weakval::probe::{
    adiabatic_shift_quadrature, cnot_probability, cnot_probability_circuit, cnot_readout, exact_shifts,
    exact_von_neumann, gaussian_probe, jozsa_shifts, protective_measurement, qubit_probe_shift, BlochVector,
    CnotSetup, GridParams, ProbeGrid, ProtectiveConfig, QubitProbeSetup,
};
use weakval::random::{random_hermitian, random_state};
use weakval::two_state::abl_probabilities;
use weakval::weak::{weak_value, PrePostSelection};
use weakval::{c, QOperator, QState};

use crate::config::{self, ProtectiveModel, RunConfig, Scenario, SystemSpec};
use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

type RowFn = Box<dyn Fn(f64) -> weakval::Result<Vec<f64>> + Send + Sync>;

struct System {
    pre: QState,
    post: QState,
    observable: Option<QOperator>,
    projectors: Vec<(String, QOperator)>,
    hamiltonian: Option<QOperator>,
    total_time: f64,
}

fn system(spec: Option<&SystemSpec>, seed: u64) -> Result<System, CliError> {
    let spec = spec.ok_or_else(|| CliError::Config("missing [system] table".into()))?;
    let (pre, post, observable) = match spec.random {
        Some(r) => {
            if r.dim < 2 || r.dim > weakval::tol::MAX_EXP_DIM {
                return Err(CliError::Config(format!("system.random.dim must lie in 2..={}", weakval::tol::MAX_EXP_DIM)));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pre = random_state(r.dim, &mut rng);
            let post = random_state(r.dim, &mut rng);
            let a = QOperator::hermitian(random_hermitian(r.dim, &mut rng))?;
            (pre, post, Some(a))
        }
        None => {
            let missing = || CliError::Config("system.pre and system.post are required".into());
            let pre = config::state(spec.pre.as_deref().ok_or_else(missing)?, spec.normalize, "system.pre")?;
            let post = config::state(spec.post.as_deref().ok_or_else(missing)?, spec.normalize, "system.post")?;
            let a = spec.observable.as_ref().map(|m| config::hermitian(m, "system.observable")).transpose()?;
            (pre, post, a)
        }
    };
    let projectors = spec
        .projectors
        .iter()
        .flatten()
        .map(|p| Ok((p.name.clone(), QOperator::projector(config::matrix(&p.matrix, &p.name)?)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let hamiltonian = spec.hamiltonian.as_ref().map(|m| config::hermitian(m, "system.hamiltonian")).transpose()?;
    let total_time = spec.total_time.unwrap_or(1.0);
    if total_time.is_nan() || total_time <= 0.0 {
        return Err(CliError::Config("system.total_time must be positive".into()));
    }
    Ok(System { pre, post, observable, projectors, hamiltonian, total_time })
}

fn probe_grid(cfg: &RunConfig) -> Result<ProbeGrid, CliError> {
    let g = cfg.grid;
    let half = g.half_window.unwrap_or(20.0 * g.width);
    let params = GridParams { n_points: g.points, x_min: g.center - half, x_max: g.center + half, mass: g.mass };
    Ok(gaussian_probe(g.center, g.width, params)?)
}

fn required(op: &Option<QOperator>) -> Result<QOperator, CliError> {
    op.clone().ok_or_else(|| CliError::Config("system.observable is required".into()))
}

impl System {
    /// Selection with `U = e^{−iHt}`, `V = e^{−iH(T−t)}`.
    fn selection_at(&self, t: f64, floor: f64) -> weakval::Result<PrePostSelection> {
        let d = self.pre.dim();
        let h = self.hamiltonian.clone().unwrap_or_else(|| QOperator::diagonal(&vec![0.0; d]));
        let u = matrix_exponential(&h, c(0.0, -t))?;
        let v = matrix_exponential(&h, c(0.0, -(self.total_time - t)))?;
        Ok(PrePostSelection::with_evolutions(self.pre.clone(), self.post.clone(), u, v)?.with_overlap_floor(floor))
    }

    fn check_times(&self, values: &[f64]) -> Result<(), CliError> {
        if values.iter().any(|t| *t < 0.0 || *t > self.total_time) {
            return Err(CliError::Config(format!("sweep times must lie in [0, {}]", self.total_time)));
        }
        Ok(())
    }
}

fn bare_selection(sys: &System, floor: f64) -> Result<PrePostSelection, CliError> {
    Ok(PrePostSelection::new(sys.pre.clone(), sys.post.clone())?.with_overlap_floor(floor))
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn rotating(omega: f64, total: f64) -> impl Fn(f64) -> QOperator {
    move |t: f64| {
        let th = 0.5 * std::f64::consts::PI * t / total;
        QOperator::hermitian(QOperator::pauli_dot([th.sin(), 0.0, th.cos()]).into_matrix() * c(0.5 * omega, 0.0))
            .expect("Pauli combinations are Hermitian")
    }
}

fn prepare(cfg: &RunConfig, seed: u64) -> Result<(Vec<String>, RowFn), CliError> {
    let floor = cfg.tolerances.overlap_floor;
    let param = cfg.sweep.parameter.clone();
    match cfg.scenario {
        Scenario::WeakValue => {
            let sys = system(cfg.system.as_ref(), seed)?;
            sys.check_times(&cfg.sweep.values)?;
            let a = required(&sys.observable)?;
            let f = move |t: f64| {
                let w = weak_value(&sys.selection_at(t, floor)?, &a)?;
                Ok(vec![t, w.value.re, w.value.im, w.overlap.norm()])
            };
            Ok((columns(&["t", "re_w", "im_w", "abs_overlap"]), Box::new(f)))
        }
        Scenario::Abl => {
            let sys = system(cfg.system.as_ref(), seed)?;
            sys.check_times(&cfg.sweep.values)?;
            let mut cols = vec!["t".to_string()];
            if sys.projectors.is_empty() {
                let a = required(&sys.observable)?;
                let eig = weakval::linalg::eigendecompose_hermitian(&a)?;
                let levels = eig.eigenprojectors(weakval::tol::EIGEN_CLUSTER_GAP).len();
                cols.extend((0..levels).map(|k| format!("pr_{k}")));
                let f = move |t: f64| {
                    let dist = abl_probabilities(&sys.selection_at(t, floor)?, &a)?;
                    Ok(std::iter::once(t).chain(dist.probabilities).collect())
                };
                Ok((cols, Box::new(f)))
            } else {
                cols.extend(sys.projectors.iter().map(|(name, _)| format!("pr_{name}")));
                let f = move |t: f64| {
                    let sel = sys.selection_at(t, floor)?;
                    let mut row = vec![t];
                    for (_, p) in &sys.projectors {
                        // two-outcome measurement {P, 1 − P}
                        let dist = abl_probabilities(&sel, p)?;
                        let yes = dist
                            .eigenvalues
                            .iter()
                            .zip(&dist.probabilities)
                            .filter(|(v, _)| **v > 0.5)
                            .map(|(_, pr)| *pr)
                            .sum();
                        row.push(yes);
                    }
                    Ok(row)
                };
                Ok((cols, Box::new(f)))
            }
        }
        Scenario::ProbeSweep => {
            let sys = system(cfg.system.as_ref(), seed)?;
            let a = required(&sys.observable)?;
            let sel = bare_selection(&sys, floor)?;
            let xi = probe_grid(cfg)?;
            let f = move |g: f64| {
                let w = weak_value(&sel, &a)?.value;
                let (dq, dp) = exact_shifts(&sel, &a, &xi, g)?;
                let (fq, fp) = jozsa_shifts(w, &xi, g)?;
                let success = exact_von_neumann(&sel, &a, &xi, g)?.success_prob;
                Ok(vec![g, w.re, w.im, dq, dp, fq, fp, dq / g, success])
            };
            let cols = ["g", "re_w", "im_w", "dq_exact", "dp_exact", "dq_formula", "dp_formula", "dq_over_g", "success_prob"];
            Ok((columns(&cols), Box::new(f)))
        }
        Scenario::QubitProbe => {
            let q = cfg.qubit.expect("validated");
            let setup = QubitProbeSetup {
                r_i: BlochVector::pure(q.r_i)?,
                r_f: BlochVector::pure(q.r_f)?,
                m: BlochVector::pure(q.m)?,
                v: q.v,
                q: q.q,
            };
            let norm = q.n.iter().map(|x| x * x).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(CliError::Config(format!("qubit.n must be a unit vector, |n| = {norm}")));
            }
            let a = QOperator::pauli_dot(q.n);
            let f = move |g: f64| {
                let s = qubit_probe_shift(&setup, &a, g)?;
                Ok(vec![g, s.weak_value.re, s.weak_value.im, s.re_coefficient, s.im_coefficient, s.formula, s.exact, s.residual()])
            };
            let cols = ["g", "re_w", "im_w", "re_coefficient", "im_coefficient", "formula", "exact", "residual"];
            Ok((columns(&cols), Box::new(f)))
        }
        Scenario::CnotSweep => {
            let sys = system(cfg.system.as_ref(), seed)?;
            let k = cfg.cnot.expect("validated").k;
            if k > 1 {
                return Err(CliError::Config("cnot.k must be 0 or 1".into()));
            }
            let proj = QOperator::diagonal(&if k == 0 { [1.0, 0.0] } else { [0.0, 1.0] });
            let sel = bare_selection(&sys, floor)?;
            let (pre, post) = (sys.pre, sys.post);
            let f = move |eps: f64| {
                let setup = CnotSetup::with_epsilon(pre.clone(), post.clone(), eps)?;
                let prob = cnot_probability(&setup, k)?;
                let circuit = cnot_probability_circuit(&setup, k)?;
                let (_, r) = cnot_readout(&setup, k)?;
                let w = weak_value(&sel, &proj)?.value;
                Ok(vec![eps, prob, circuit, r, w.re, w.im])
            };
            Ok((columns(&["epsilon", "prob", "prob_circuit", "r", "re_w", "im_w"]), Box::new(f)))
        }
        Scenario::Protective => {
            let spec = cfg.protective.unwrap_or_default();
            let xi = probe_grid(cfg)?;
            let a = match cfg.system.as_ref().and_then(|s| s.observable.as_ref()) {
                Some(m) => config::hermitian(m, "system.observable")?,
                None => QOperator::pauli_z(),
            };
            let fixed_h = cfg
                .system
                .as_ref()
                .and_then(|s| s.hamiltonian.as_ref())
                .map(|m| config::hermitian(m, "system.hamiltonian"))
                .transpose()?;
            let f = move |value: f64| {
                let (mut coupling, mut total, mut steps) = (spec.coupling, spec.total_time, spec.n_steps);
                match param.as_str() {
                    "coupling" => coupling = value,
                    "total_time" => total = value,
                    _ => steps = value as usize,
                }
                let pc = ProtectiveConfig {
                    total_time: total,
                    n_steps: steps,
                    level: spec.level,
                    min_gap: spec.min_gap,
                    min_steps: spec.min_steps,
                };
                let g = move |_t: f64| coupling;
                let (dq, fidelity, quad) = match (spec.model, &fixed_h) {
                    (ProtectiveModel::Static, Some(h)) => {
                        let hs = |_t: f64| h.clone();
                        let out = protective_measurement(hs, g, &xi, &a, &pc)?;
                        (out.dq, out.target_fidelity, adiabatic_shift_quadrature(hs, g, &a, &pc, spec.quadrature_intervals)?)
                    }
                    _ => {
                        let out = protective_measurement(rotating(spec.omega, total), g, &xi, &a, &pc)?;
                        let quad = adiabatic_shift_quadrature(rotating(spec.omega, total), g, &a, &pc, spec.quadrature_intervals)?;
                        (out.dq, out.target_fidelity, quad)
                    }
                };
                Ok(vec![value, dq, quad, fidelity])
            };
            let first = cfg.sweep.parameter.clone();
            Ok((vec![first, "dq".into(), "quadrature".into(), "target_fidelity".into()], Box::new(f)))
        }
        Scenario::Decoherence => {
            let sys = system(cfg.system.as_ref(), seed)?;
            let a = required(&sys.observable)?;
            let sel = bare_selection(&sys, floor)?;
            let env_spec = cfg.environment.clone().expect("validated");
            let e_i = config::state(&env_spec.e_i, true, "environment.e_i")?;
            let e_f = config::state(&env_spec.e_f, true, "environment.e_f")?;
            let basis = match &env_spec.e_basis {
                Some(list) => list.iter().map(|v| config::state(v, false, "environment.e_basis")).collect::<Result<Vec<_>, _>>()?,
                None => QState::computational_basis(e_i.dim()),
            };
            let [ti, t0, tf] = env_spec.times;
            let env = EnvironmentModel::new(
                config::hermitian(&env_spec.h0, "environment.h0")?,
                config::hermitian(&env_spec.h1, "environment.h1")?,
                e_i,
                e_f,
                basis,
                (ti, t0, tf),
            )?
            .with_slices(env_spec.slices)?;
            let xi = probe_grid(cfg)?;
            let limit = cfg.tolerances.weak_coupling;
            let traced = env_spec.traced;
            let f = move |g: f64| {
                let s = if traced {
                    traced_probe_shifts(&env, &sel, &a, &xi, g)?
                } else {
                    decoherent_probe_shifts_with_limit(&env, &sel, &a, &xi, g, limit)?
                };
                Ok(vec![g, s.weak_value.re, s.weak_value.im, s.dq, s.dp, s.oracle_dq, s.oracle_dp, s.success_prob])
            };
            let cols = ["g", "re_w", "im_w", "dq", "dp", "oracle_dq", "oracle_dp", "success_prob"];
            Ok((columns(&cols), Box::new(f)))
        }
    }
}

/// Evaluates every sweep point on a pool of `workers` threads. Rows keep the
/// sweep order; the first failing point in that order is reported.
pub fn run_table(cfg: &RunConfig, seed: u64, workers: usize) -> Result<Table, CliError> {
    let (columns, row) = prepare(cfg, seed)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    let results: Vec<weakval::Result<Vec<f64>>> = pool.install(|| cfg.sweep.values.par_iter().map(|v| row(*v)).collect());
    let mut rows = Vec::with_capacity(results.len());
    for (value, result) in cfg.sweep.values.iter().zip(results) {
        let r = result?;
        if let Some(k) = r.iter().position(|x| !x.is_finite()) {
            return Err(CliError::NonFinite(format!("column {} at {} = {value}", columns[k], cfg.sweep.parameter)));
        }
        rows.push(r);
    }
    Ok(Table { columns, rows })
}
