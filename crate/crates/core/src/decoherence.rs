//! Weak measurement in the presence of an environment.
//!
//! The target evolves under `H = H₀⊗1_e + H₁`. With `U₀`, `V₀` the free
//! target evolutions over `[t_i, t₀]` and `[t₀, t_f]`, the full evolutions
//! factor as `U = U₀ K(t₀, t_i)` and `V = K(t_f, t₀) V₀`, where the `K` are
//! time-ordered exponentials of `H₁` in the interaction picture. These are
//! computed by fourth-order Magnus slicing with a doubling check.

use nalgebra::ComplexField;

use crate::channel::{apply_to_w, environment_element, Channel};
use crate::error::{dim_mismatch, Error, Result};
use crate::fit::fit_powers;
use crate::linalg::{
    eigendecompose_hermitian, max_diff, require_complete_basis, trace, unitary_exp, CMatrix, CVector, QOperator,
    QState, C64,
};
use crate::probe::grid::{probe_moments, ProbeGrid};
use crate::probe::von_neumann::{jozsa_shifts, residual_order};
use crate::tol;
use crate::two_state::{build_w, WOperator};
use crate::weak::PrePostSelection;

pub const DEFAULT_SLICES: usize = 512;
/// Largest change allowed when the slice count is doubled.
pub const SLICING_TOLERANCE: f64 = 1e-8;
/// Largest environment handled by the tripartite oracle.
pub const MAX_ORACLE_ENV_DIM: usize = 8;
/// Default bound on `|g·⟨A⟩|` for the first-order shift formulas.
pub const WEAK_COUPLING_LIMIT: f64 = 0.01;

#[derive(Clone, Debug)]
pub struct EnvironmentModel {
    h0: QOperator,
    h1: QOperator,
    e_i: QState,
    e_f: QState,
    e_basis: Vec<QState>,
    times: (f64, f64, f64),
    slices: usize,
}

impl EnvironmentModel {
    /// `h1` acts on target ⊗ environment with the target factor first;
    /// `times = (t_i, t₀, t_f)` with the measurement at `t₀`.
    pub fn new(
        h0: QOperator,
        h1: QOperator,
        e_i: QState,
        e_f: QState,
        e_basis: Vec<QState>,
        times: (f64, f64, f64),
    ) -> Result<Self> {
        h0.require_hermitian()?;
        h1.require_hermitian()?;
        let (ds, de) = (h0.dim(), e_i.dim());
        if h1.dim() != ds * de {
            return Err(dim_mismatch("coupling Hamiltonian", ds * de, h1.dim()));
        }
        if e_f.dim() != de {
            return Err(dim_mismatch("final environment state", de, e_f.dim()));
        }
        require_complete_basis(&e_basis, de)?;
        let (ti, t0, tf) = times;
        if !(ti < t0 && t0 < tf) || !tf.is_finite() || !ti.is_finite() {
            return Err(Error::InvalidTimes(format!("need t_i < t₀ < t_f, got ({ti}, {t0}, {tf})")));
        }
        Ok(Self { h0, h1, e_i, e_f, e_basis, times, slices: DEFAULT_SLICES })
    }

    /// Slices per interval for the coarser of the two doubling runs.
    pub fn with_slices(mut self, slices: usize) -> Result<Self> {
        if slices == 0 {
            return Err(Error::InvalidArgument("slice count must be positive".into()));
        }
        self.slices = slices;
        Ok(self)
    }

    /// Same model with a different environment post-selection.
    pub fn with_final_environment(&self, e_f: QState) -> Result<Self> {
        if e_f.dim() != self.env_dim() {
            return Err(dim_mismatch("final environment state", self.env_dim(), e_f.dim()));
        }
        Ok(Self { e_f, ..self.clone() })
    }

    pub fn target_dim(&self) -> usize {
        self.h0.dim()
    }
    pub fn env_dim(&self) -> usize {
        self.e_i.dim()
    }
    pub fn h0(&self) -> &QOperator {
        &self.h0
    }
    pub fn h1(&self) -> &QOperator {
        &self.h1
    }
    pub fn e_i(&self) -> &QState {
        &self.e_i
    }
    pub fn e_f(&self) -> &QState {
        &self.e_f
    }
    pub fn e_basis(&self) -> &[QState] {
        &self.e_basis
    }
    pub fn times(&self) -> (f64, f64, f64) {
        self.times
    }
    pub fn slices(&self) -> usize {
        self.slices
    }

    fn free(&self, tau: f64) -> CMatrix {
        unitary_exp(self.h0.matrix(), tau)
    }

    fn lift(&self, target: &CMatrix) -> CMatrix {
        target.kronecker(&CMatrix::identity(self.env_dim(), self.env_dim()))
    }

    /// `(U₀, V₀)`, the free target evolutions before and after `t₀`.
    pub fn free_evolutions(&self) -> (QOperator, QOperator) {
        let (ti, t0, tf) = self.times;
        (QOperator::from_raw(self.free(t0 - ti)), QOperator::from_raw(self.free(tf - t0)))
    }

    /// `(K(t₀, t_i), K(t_f, t₀))` by Magnus slicing, checked against a run
    /// with twice as many slices.
    pub fn interaction_propagators(&self) -> Result<(CMatrix, CMatrix)> {
        let (ti, t0, tf) = self.times;
        let h1 = self.h1.matrix();
        // K(t₀,t_i): H₁ seen through U₀(t − t_i)
        let before = |t: f64| {
            let u = self.lift(&self.free(t - ti));
            u.adjoint() * h1 * u
        };
        // K(t_f,t₀): H₁ carried forward by U₀(t_f − t)
        let after = |t: f64| {
            let u = self.lift(&self.free(tf - t));
            &u * h1 * u.adjoint()
        };
        let k_i = converged_time_ordered(before, ti, t0, self.slices)?;
        let k_f = converged_time_ordered(after, t0, tf, self.slices)?;
        Ok((k_i, k_f))
    }

    /// Full evolutions `U = U₀K(t₀,t_i)` and `V = K(t_f,t₀)V₀` on
    /// target ⊗ environment, from the sliced interaction propagators.
    pub fn sliced_evolutions(&self) -> Result<(QOperator, QOperator)> {
        let (u0, v0) = self.free_evolutions();
        let (k_i, k_f) = self.interaction_propagators()?;
        let u = self.lift(u0.matrix()) * k_i;
        let v = k_f * self.lift(v0.matrix());
        Ok((QOperator::from_raw(u), QOperator::from_raw(v)))
    }

    /// Full evolutions from a single exponential of the time-independent
    /// joint Hamiltonian.
    pub fn exact_evolutions(&self) -> (QOperator, QOperator) {
        let (ti, t0, tf) = self.times;
        let h = self.lift(self.h0.matrix()) + self.h1.matrix();
        (QOperator::from_raw(unitary_exp(&h, t0 - ti)), QOperator::from_raw(unitary_exp(&h, tf - t0)))
    }
}

/// Ordered product of fourth-order Magnus steps for `i dK/dt = H(t) K`.
pub fn time_ordered<F: Fn(f64) -> CMatrix>(h: F, start: f64, end: f64, slices: usize) -> CMatrix {
    let step = (end - start) / slices as f64;
    let offset = 3f64.sqrt() / 6.0;
    let mut k: Option<CMatrix> = None;
    for n in 0..slices {
        let a = start + n as f64 * step;
        let h1 = h(a + step * (0.5 - offset));
        let h2 = h(a + step * (0.5 + offset));
        let commutator = &h2 * &h1 - &h1 * &h2;
        // Ω = −i X with X Hermitian
        let x = (&h1 + &h2) * C64::from(0.5 * step)
            - commutator * C64::new(0.0, 3f64.sqrt() / 12.0 * step * step);
        let slice = unitary_exp(&x, 1.0);
        k = Some(match k {
            None => slice,
            Some(prev) => slice * prev,
        });
    }
    k.expect("at least one slice")
}

fn converged_time_ordered<F: Fn(f64) -> CMatrix>(h: F, start: f64, end: f64, slices: usize) -> Result<CMatrix> {
    let coarse = time_ordered(&h, start, end, slices);
    let fine = time_ordered(&h, start, end, 2 * slices);
    let change = max_diff(&coarse, &fine);
    if change > SLICING_TOLERANCE {
        return Err(Error::SlicingNonConvergence { change });
    }
    Ok(fine)
}

/// Kraus pairs `E_m = ⟨e_m|U|e_i⟩`, `F_m† = ⟨e_f|V|e_m⟩` built from the
/// sliced evolutions. The channel acts on `|i⟩⟨f|` directly.
pub fn dressed_channel(env: &EnvironmentModel) -> Result<Channel> {
    let (u, v) = env.sliced_evolutions()?;
    Channel::from_environment_factorization_with_tolerance(&u, &v, &env.e_i, &env.e_f, &env.e_basis, SLICING_TOLERANCE)
}

/// Interaction-picture Kraus pairs `E_m = U₀⟨e_m|K_i|e_i⟩U₀†` and
/// `F_m† = V₀†⟨e_f|K_f|e_m⟩V₀`, acting on `W₀ = U₀|i⟩⟨f|V₀`.
pub fn dressed_channel_interaction(env: &EnvironmentModel) -> Result<Channel> {
    let (u0, v0) = env.free_evolutions();
    let (u0, v0) = (u0.matrix(), v0.matrix());
    let (k_i, k_f) = env.interaction_propagators()?;
    let dims = (env.target_dim(), env.env_dim());
    let mut e = Vec::with_capacity(env.e_basis.len());
    let mut f = Vec::with_capacity(env.e_basis.len());
    for em in &env.e_basis {
        e.push(u0 * environment_element(&k_i, dims, em, &env.e_i)? * u0.adjoint());
        let f_dag = v0.adjoint() * environment_element(&k_f, dims, &env.e_f, em)? * v0;
        f.push(f_dag.adjoint());
    }
    Channel::build(e, f, SLICING_TOLERANCE)
}

fn require_bare_selection(env: &EnvironmentModel, sel: &PrePostSelection) -> Result<()> {
    if sel.dim() != env.target_dim() {
        return Err(dim_mismatch("selection", env.target_dim(), sel.dim()));
    }
    let id = CMatrix::identity(sel.dim(), sel.dim());
    if max_diff(sel.u_before().matrix(), &id) > tol::EQUALITY || max_diff(sel.u_after().matrix(), &id) > tol::EQUALITY
    {
        return Err(Error::InvalidArgument(
            "the selection must carry no evolutions; the model supplies U₀ and V₀".into(),
        ));
    }
    Ok(())
}

/// `E(W)` for `W = |i⟩⟨f|` under [`dressed_channel`].
pub fn decoherent_w(env: &EnvironmentModel, sel: &PrePostSelection) -> Result<WOperator> {
    require_bare_selection(env, sel)?;
    apply_to_w(&dressed_channel(env)?, &build_w(sel))
}

fn weak_value_with_floor(ew: &WOperator, a: &QOperator, floor: f64) -> Result<C64> {
    if a.dim() != ew.dim() {
        return Err(dim_mismatch("observable", ew.dim(), a.dim()));
    }
    let tr = ew.trace();
    if tr.norm() <= floor {
        return Err(Error::NearOrthogonalSelection { overlap: tr.norm(), floor });
    }
    Ok(trace(&(ew.matrix() * a.matrix())) / tr)
}

/// `⟨A⟩_{E(W)} = Tr[E(W)A] / Tr E(W)`.
pub fn decoherent_weak_value(env: &EnvironmentModel, sel: &PrePostSelection, a: &QOperator) -> Result<C64> {
    a.require_hermitian()?;
    weak_value_with_floor(&decoherent_w(env, sel)?, a, sel.overlap_floor())
}

/// Same weak value through [`dressed_channel_interaction`] acting on
/// `W₀ = U₀|i⟩⟨f|V₀`.
pub fn decoherent_weak_value_interaction(
    env: &EnvironmentModel,
    sel: &PrePostSelection,
    a: &QOperator,
) -> Result<C64> {
    a.require_hermitian()?;
    require_bare_selection(env, sel)?;
    let (u0, v0) = env.free_evolutions();
    let sel0 = PrePostSelection::with_evolutions(sel.pre().clone(), sel.post().clone(), u0, v0)?
        .with_overlap_floor(sel.overlap_floor());
    let ew = apply_to_w(&dressed_channel_interaction(env)?, &build_w(&sel0))?;
    weak_value_with_floor(&ew, a, sel.overlap_floor())
}

/// Formula shifts next to the tripartite oracle.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct DecoherentShifts {
    pub weak_value: C64,
    pub dq: f64,
    pub dp: f64,
    pub oracle_dq: f64,
    pub oracle_dp: f64,
    /// Joint post-selection probability of target and environment.
    pub success_prob: f64,
}

/// Conditioned probe from the exact joint evolution of target ⊗
/// environment ⊗ probe with coupling `e^{−ig A⊗1_e⊗P̂}` at `t₀`, post-selected
/// on `|f⟩|e_f⟩`. Each momentum bin is propagated with a Padé exponential of
/// the full coupling.
pub fn tripartite_probe(
    env: &EnvironmentModel,
    sel: &PrePostSelection,
    a: &QOperator,
    xi: &ProbeGrid,
    g: f64,
) -> Result<ProbeGrid> {
    require_bare_selection(env, sel)?;
    if env.env_dim() > MAX_ORACLE_ENV_DIM {
        return Err(Error::DimensionLimit { dim: env.env_dim(), limit: MAX_ORACLE_ENV_DIM });
    }
    if a.dim() != env.target_dim() {
        return Err(dim_mismatch("observable", env.target_dim(), a.dim()));
    }
    let spectrum = eigendecompose_hermitian(a)?.values;
    xi.check_shifts(&spectrum.iter().map(|v| g * v).collect::<Vec<_>>())?;
    let (u, v) = env.exact_evolutions();
    let coupling = env.lift(a.matrix());
    let start: CVector = u.matrix() * sel.pre().amps().kronecker(env.e_i.amps());
    let bra: CVector = v.matrix().adjoint() * sel.post().amps().kronecker(env.e_f.amps());
    let phi = xi.to_momentum();
    let out = phi
        .iter()
        .enumerate()
        .map(|(j, amp)| {
            let gate = (&coupling * C64::new(0.0, -g * xi.p(j))).exp();
            bra.dotc(&(gate * &start)) * amp
        })
        .collect();
    let probe = xi.from_momentum(out);
    probe.check_edges()?;
    Ok(probe)
}

fn oracle_shifts(xi: &ProbeGrid, branches: &[ProbeGrid]) -> Result<(f64, f64, f64)> {
    let before = probe_moments(xi)?;
    let mut weight = 0.0;
    let (mut q, mut p) = (0.0, 0.0);
    for b in branches {
        let n = b.norm_sq();
        if n > 0.0 {
            let m = probe_moments(b)?;
            weight += n;
            q += n * m.mean_q;
            p += n * m.mean_p;
        }
    }
    if !(weight > 0.0) {
        return Err(Error::AllPathsVanish);
    }
    Ok((q / weight - before.mean_q, p / weight - before.mean_p, weight))
}

fn check_weak_coupling(w: C64, g: f64, limit: f64) -> Result<()> {
    if (g * w).norm() > limit {
        return Err(Error::InvalidArgument(format!("|g·⟨A⟩| = {:e} exceeds the weak-coupling bound {limit}", (g * w).norm())));
    }
    Ok(())
}

/// First-order shifts from `⟨A⟩_{E(W)}` alongside the tripartite oracle.
pub fn decoherent_probe_shifts(
    env: &EnvironmentModel,
    sel: &PrePostSelection,
    a: &QOperator,
    xi: &ProbeGrid,
    g: f64,
) -> Result<DecoherentShifts> {
    decoherent_probe_shifts_with_limit(env, sel, a, xi, g, WEAK_COUPLING_LIMIT)
}

pub fn decoherent_probe_shifts_with_limit(
    env: &EnvironmentModel,
    sel: &PrePostSelection,
    a: &QOperator,
    xi: &ProbeGrid,
    g: f64,
    limit: f64,
) -> Result<DecoherentShifts> {
    let w = decoherent_weak_value(env, sel, a)?;
    check_weak_coupling(w, g, limit)?;
    let (dq, dp) = jozsa_shifts(w, xi, g)?;
    let probe = tripartite_probe(env, sel, a, xi, g)?;
    let (oracle_dq, oracle_dp, success_prob) = oracle_shifts(xi, std::slice::from_ref(&probe))?;
    Ok(DecoherentShifts { weak_value: w, dq, dp, oracle_dq, oracle_dp, success_prob })
}

/// Extension with the environment left unobserved: the probe ends in a
/// mixture over the environment outcomes `e_basis`. Returns the effective
/// weak value `Σ_k conj(Tr E_k(W))·Tr[E_k(W)A] / Σ_k |Tr E_k(W)|²`, whose
/// first-order shifts match the mixture.
pub fn traced_weak_value(env: &EnvironmentModel, sel: &PrePostSelection, a: &QOperator) -> Result<C64> {
    a.require_hermitian()?;
    let mut num = C64::from(0.0);
    let mut den = 0.0;
    for ef in &env.e_basis {
        let ew = decoherent_w(&env.with_final_environment(ef.clone())?, sel)?;
        let amp = ew.trace();
        num += amp.conj() * trace(&(ew.matrix() * a.matrix()));
        den += amp.norm_sqr();
    }
    let floor = sel.overlap_floor();
    if den.sqrt() <= floor {
        return Err(Error::NearOrthogonalSelection { overlap: den.sqrt(), floor });
    }
    Ok(num / den)
}

/// [`decoherent_probe_shifts`] with the environment traced out instead of
/// post-selected.
pub fn traced_probe_shifts(
    env: &EnvironmentModel,
    sel: &PrePostSelection,
    a: &QOperator,
    xi: &ProbeGrid,
    g: f64,
) -> Result<DecoherentShifts> {
    let w = traced_weak_value(env, sel, a)?;
    check_weak_coupling(w, g, WEAK_COUPLING_LIMIT)?;
    let (dq, dp) = jozsa_shifts(w, xi, g)?;
    let branches = env
        .e_basis
        .iter()
        .map(|ef| tripartite_probe(&env.with_final_environment(ef.clone())?, sel, a, xi, g))
        .collect::<Result<Vec<_>>>()?;
    let (oracle_dq, oracle_dp, success_prob) = oracle_shifts(xi, &branches)?;
    Ok(DecoherentShifts { weak_value: w, dq, dp, oracle_dq, oracle_dp, success_prob })
}

/// Formula-vs-oracle residuals over a coupling sequence.
#[derive(Clone, Debug)]
pub struct DecoherenceReport {
    pub weak_value: C64,
    pub rows: Vec<(f64, DecoherentShifts)>,
    pub order_q: Option<f64>,
    pub order_p: Option<f64>,
    /// Least-squares `oracle Δ[Q] ≈ c1 g + c2 g²`.
    pub coeff_q: [f64; 2],
    pub coeff_p: [f64; 2],
}

pub fn verify_decoherent_limit(
    env: &EnvironmentModel,
    sel: &PrePostSelection,
    a: &QOperator,
    xi: &ProbeGrid,
    g_list: &[f64],
) -> Result<DecoherenceReport> {
    if g_list.len() < 2 || g_list.iter().any(|g| *g == 0.0 || !g.is_finite()) {
        return Err(Error::DegenerateFit("need at least two nonzero couplings".into()));
    }
    let rows = g_list
        .iter()
        .map(|&g| decoherent_probe_shifts(env, sel, a, xi, g).map(|s| (g, s)))
        .collect::<Result<Vec<_>>>()?;
    let g_abs: Vec<f64> = g_list.iter().map(|g| g.abs()).collect();
    let err_q: Vec<f64> = rows.iter().map(|(_, s)| (s.dq - s.oracle_dq).abs()).collect();
    let err_p: Vec<f64> = rows.iter().map(|(_, s)| (s.dp - s.oracle_dp).abs()).collect();
    let cq = fit_powers(g_list, &rows.iter().map(|(_, s)| s.oracle_dq).collect::<Vec<_>>(), &[1, 2])?;
    let cp = fit_powers(g_list, &rows.iter().map(|(_, s)| s.oracle_dp).collect::<Vec<_>>(), &[1, 2])?;
    Ok(DecoherenceReport {
        weak_value: rows[0].1.weak_value,
        order_q: residual_order(&g_abs, &err_q)?,
        order_p: residual_order(&g_abs, &err_p)?,
        coeff_q: [cq[0], cq[1]],
        coeff_p: [cp[0], cp[1]],
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::s_matrix_identity_check;
    use crate::linalg::{c, tensor, QOperator};
    use crate::probe::grid::{gaussian_probe, GridParams};
    use crate::probe::von_neumann::exact_shifts;
    use crate::random::{random_hermitian, random_state};
    use crate::weak::weak_value;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TIMES: (f64, f64, f64) = (0.0, 0.7, 1.3);

    fn random_model(rng: &mut ChaCha8Rng, ds: usize, de: usize) -> EnvironmentModel {
        let h0 = QOperator::hermitian(random_hermitian(ds, rng)).unwrap();
        let h1 = QOperator::hermitian(random_hermitian(ds * de, rng)).unwrap();
        EnvironmentModel::new(h0, h1, random_state(de, rng), random_state(de, rng), QState::computational_basis(de), TIMES)
            .unwrap()
    }

    fn dephasing_model(lambda: f64) -> EnvironmentModel {
        let h0 = QOperator::hermitian(QOperator::pauli_x().into_matrix() * c(0.3, 0.0)).unwrap();
        let h1 = QOperator::hermitian(tensor(&QOperator::pauli_z(), &QOperator::pauli_x()).into_matrix() * c(lambda, 0.0))
            .unwrap();
        EnvironmentModel::new(h0, h1, QState::basis(2, 0), QState::basis(2, 0), QState::computational_basis(2), TIMES)
            .unwrap()
    }

    fn selection() -> PrePostSelection {
        let pre = QState::normalized(vec![c(1.0, 0.0), c(0.6, 0.3)]).unwrap();
        let post = QState::normalized(vec![c(0.8, 0.0), c(-0.2, 0.9)]).unwrap();
        PrePostSelection::new(pre, post).unwrap()
    }

    fn decoupled(h0: QOperator, de: usize) -> EnvironmentModel {
        let ds = h0.dim();
        let e = QState::basis(de, 0);
        EnvironmentModel::new(h0, QOperator::diagonal(&vec![0.0; ds * de]), e.clone(), e, QState::computational_basis(de), TIMES)
            .unwrap()
    }

    #[test]
    fn sliced_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (ds, de) in [(2, 2), (3, 2), (2, 3)] {
            let env = random_model(&mut rng, ds, de);
            let (us, vs) = env.sliced_evolutions().unwrap();
            let (ue, ve) = env.exact_evolutions();
            assert!(max_diff(us.matrix(), ue.matrix()) < 1e-10);
            assert!(max_diff(vs.matrix(), ve.matrix()) < 1e-10);
        }
    }

    #[test]
    fn commuting_coupling_closed_form() {
        // [H₀⊗1, H₁] = 0, so K = exp(−iH₁τ)
        let h0 = QOperator::diagonal(&[0.4, -0.9]);
        let h1 = QOperator::hermitian(tensor(&QOperator::pauli_z(), &QOperator::pauli_y()).into_matrix() * c(1.7, 0.0))
            .unwrap();
        let env = EnvironmentModel::new(h0, h1.clone(), QState::basis(2, 0), QState::basis(2, 1), QState::computational_basis(2), TIMES)
            .unwrap();
        let (k_i, k_f) = env.interaction_propagators().unwrap();
        let h = h1.matrix().clone();
        assert!(max_diff(&k_i, &(h.clone() * C64::new(0.0, -0.7)).exp()) < 1e-10);
        assert!(max_diff(&k_f, &(h * C64::new(0.0, -0.6)).exp()) < 1e-10);
    }

    #[test]
    fn normalizations_and_s_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let env = random_model(&mut rng, 2, 2);
            let ch = dressed_channel(&env).unwrap();
            let d = ch.dim();
            let mut se = CMatrix::zeros(d, d);
            let mut sf = CMatrix::zeros(d, d);
            for (e, f) in ch.kraus_e().iter().zip(ch.kraus_f()) {
                se += e.matrix().adjoint() * e.matrix();
                sf += f.matrix().adjoint() * f.matrix();
            }
            assert!(max_diff(&se, &CMatrix::identity(d, d)) < 1e-8);
            assert!(max_diff(&sf, &CMatrix::identity(d, d)) < 1e-8);
            let (u, v) = env.sliced_evolutions().unwrap();
            assert!(s_matrix_identity_check(&ch, &u, &v, env.e_i(), env.e_f()).unwrap() < 1e-8);
        }
    }

    #[test]
    fn interaction_picture_route_agrees() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let env = random_model(&mut rng, 2, 2);
            let sel = PrePostSelection::new(random_state(2, &mut rng), random_state(2, &mut rng)).unwrap();
            let (u0, v0) = env.free_evolutions();
            let sel0 = PrePostSelection::with_evolutions(sel.pre().clone(), sel.post().clone(), u0, v0).unwrap();
            let direct = apply_to_w(&dressed_channel(&env).unwrap(), &build_w(&sel)).unwrap();
            let dressed = apply_to_w(&dressed_channel_interaction(&env).unwrap(), &build_w(&sel0)).unwrap();
            assert!(max_diff(direct.matrix(), dressed.matrix()) < 1e-10);
        }
    }

    #[test]
    fn weak_value_matches_joint_weak_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let env = random_model(&mut rng, 2, 2);
            let sel = PrePostSelection::new(random_state(2, &mut rng), random_state(2, &mut rng)).unwrap();
            let a = QOperator::hermitian(random_hermitian(2, &mut rng)).unwrap();
            let (u, v) = env.exact_evolutions();
            let joint = PrePostSelection::with_evolutions(
                tensor(sel.pre(), env.e_i()),
                tensor(sel.post(), env.e_f()),
                u,
                v,
            )
            .unwrap();
            let oracle = weak_value(&joint, &tensor(&a, &QOperator::identity(2))).unwrap().value;
            let w = decoherent_weak_value(&env, &sel, &a).unwrap();
            assert!((w - oracle).norm() < 1e-9 * oracle.norm().max(1.0));
            assert!((decoherent_weak_value_interaction(&env, &sel, &a).unwrap() - w).norm() < 1e-10 * w.norm().max(1.0));
        }
    }

    #[test]
    fn decoupled_environment_reduces_to_plain_weak_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for de in [2, 3] {
            let env = decoupled(QOperator::hermitian(random_hermitian(2, &mut rng)).unwrap(), de);
            let sel = selection();
            let a = QOperator::hermitian(random_hermitian(2, &mut rng)).unwrap();
            let (u0, v0) = env.free_evolutions();
            let plain =
                weak_value(&PrePostSelection::with_evolutions(sel.pre().clone(), sel.post().clone(), u0, v0).unwrap(), &a)
                    .unwrap()
                    .value;
            assert!((decoherent_weak_value(&env, &sel, &a).unwrap() - plain).norm() < 1e-10);
            assert!((traced_weak_value(&env, &sel, &a).unwrap() - plain).norm() < 1e-10);
        }
    }

    #[test]
    fn identity_observable_gives_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let env = random_model(&mut rng, 3, 2);
        let sel = PrePostSelection::new(random_state(3, &mut rng), random_state(3, &mut rng)).unwrap();
        let w = decoherent_weak_value(&env, &sel, &QOperator::identity(3)).unwrap();
        assert!((w - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn environment_basis_rephasing_is_invisible() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let env = random_model(&mut rng, 2, 3);
        let sel = selection();
        let a = QOperator::pauli_z();
        let w = decoherent_weak_value(&env, &sel, &a).unwrap();
        let phased: Vec<QState> = env.e_basis().iter().enumerate().map(|(k, e)| e.with_phase(0.7 + k as f64)).collect();
        let env2 = EnvironmentModel::new(
            env.h0().clone(),
            env.h1().clone(),
            env.e_i().clone(),
            env.e_f().clone(),
            phased,
            TIMES,
        )
        .unwrap();
        assert!((decoherent_weak_value(&env2, &sel, &a).unwrap() - w).norm() < 1e-12);
    }

    #[test]
    fn decoupled_probe_matches_isolated_probe() {
        let xi = gaussian_probe(0.0, 1.0, GridParams::for_width(1.0)).unwrap();
        let env = decoupled(QOperator::diagonal(&[0.2, -0.5]), 2);
        let sel = selection();
        let a = QOperator::pauli_z();
        let (u0, v0) = env.free_evolutions();
        let sel0 = PrePostSelection::with_evolutions(sel.pre().clone(), sel.post().clone(), u0, v0).unwrap();
        let g = 1e-3;
        let s = decoherent_probe_shifts(&env, &sel, &a, &xi, g).unwrap();
        let (dq, dp) = exact_shifts(&sel0, &a, &xi, g).unwrap();
        assert!((s.oracle_dq - dq).abs() < 1e-10 && (s.oracle_dp - dp).abs() < 1e-10);
        let w = weak_value(&sel0, &a).unwrap().value;
        assert!((s.dq - g * w.re).abs() < 1e-10);
    }

    #[test]
    fn oracle_success_probability_at_zero_coupling() {
        let xi = gaussian_probe(0.0, 1.0, GridParams::for_width(1.0)).unwrap();
        let env = dephasing_model(0.8);
        let sel = selection();
        let (u, v) = env.exact_evolutions();
        let joint = PrePostSelection::with_evolutions(tensor(sel.pre(), env.e_i()), tensor(sel.post(), env.e_f()), u, v)
            .unwrap();
        let s = decoherent_probe_shifts(&env, &sel, &QOperator::pauli_z(), &xi, 0.0).unwrap();
        assert!((s.success_prob - joint.overlap().norm_sqr()).abs() < 1e-12);
        assert!(s.oracle_dq.abs() < 1e-12 && s.oracle_dp.abs() < 1e-12);
    }

    #[test]
    fn dephasing_residual_is_second_order() {
        let xi = gaussian_probe(0.0, 1.0, GridParams::for_width(1.0)).unwrap();
        let env = dephasing_model(0.8);
        let sel = selection();
        let a = QOperator::pauli_z();
        let report = verify_decoherent_limit(&env, &sel, &a, &xi, &[5e-3, 1e-3, 1e-4, 1e-5]).unwrap();
        assert!(report.weak_value.im.abs() > 1e-3);
        assert!(report.order_q.unwrap() >= 1.9, "{:?}", report.order_q);
        assert!(report.order_p.unwrap() >= 1.9, "{:?}", report.order_p);
        assert!((report.coeff_q[0] - report.weak_value.re).abs() < 1e-3 * report.weak_value.re.abs());
    }

    #[test]
    fn traced_environment_mixture() {
        let xi = gaussian_probe(0.0, 1.0, GridParams::for_width(1.0)).unwrap();
        let env = dephasing_model(0.8);
        let sel = selection();
        let a = QOperator::pauli_z();
        let errs: Vec<f64> = [1e-3, 1e-4]
            .iter()
            .map(|&g| {
                let s = traced_probe_shifts(&env, &sel, &a, &xi, g).unwrap();
                (s.dq - s.oracle_dq).abs() + (s.dp - s.oracle_dp).abs()
            })
            .collect();
        assert!(errs[1] < errs[0] * 0.02, "{errs:?}");
    }

    #[test]
    fn guards() {
        let h0 = QOperator::diagonal(&[0.0, 1.0]);
        let h1 = QOperator::hermitian(tensor(&QOperator::pauli_x(), &QOperator::pauli_x()).into_matrix() * c(40.0, 0.0))
            .unwrap();
        let e = QState::basis(2, 0);
        let basis = QState::computational_basis(2);
        assert!(matches!(
            EnvironmentModel::new(h0.clone(), h1.clone(), e.clone(), e.clone(), basis.clone(), (1.0, 0.5, 2.0)),
            Err(Error::InvalidTimes(_))
        ));
        assert!(matches!(
            EnvironmentModel::new(h0.clone(), h1.clone(), e.clone(), e.clone(), basis[..1].to_vec(), TIMES),
            Err(Error::IncompleteBasis { .. })
        ));
        let env = EnvironmentModel::new(h0, h1, e.clone(), e, basis, TIMES).unwrap().with_slices(1).unwrap();
        assert!(matches!(dressed_channel(&env), Err(Error::SlicingNonConvergence { .. })));

        let xi = gaussian_probe(0.0, 1.0, GridParams::for_width(1.0)).unwrap();
        let env = dephasing_model(0.3);
        assert!(matches!(
            decoherent_probe_shifts(&env, &selection(), &QOperator::pauli_z(), &xi, 0.5),
            Err(Error::InvalidArgument(_))
        ));
        let sel = PrePostSelection::new(QState::basis(2, 0), QState::basis(2, 1)).unwrap();
        let frozen = decoupled(QOperator::diagonal(&[0.0, 1.0]), 2);
        assert!(matches!(
            decoherent_weak_value(&frozen, &sel, &QOperator::pauli_z()),
            Err(Error::NearOrthogonalSelection { .. })
        ));
    }
}
