//! Pauli-transfer (η) representation of the fidelity dynamics.
//!
//! With η_m = Tr[P_m Q] for Q = ψφ† (state mode) or Q = UV†/2^N (gate mode),
//! the SSE becomes the linear SDE
//!
//! dη = (A_d + Σ_j z_j A_j) η dt − ½ Σ_l w_l B_l†B_l η d[X_l] + Σ_l √w_l B_l η dX_l
//!
//! with A_j[m,n] = (i/2^N) Tr[P_m [H_j, P_n]] and B_l[m,n] = (i/2^N) Tr[P_m S_l P_n].

use crate::error::{Error, Result};
use crate::linalg::{inner, ComplexMatrix, PauliBasis, C64, I};
use crate::noise::NoisePath;
use crate::sde::{self, Scheme, SdeSystem};
use crate::sse::{check_paths, ControlPulse, Dynamics, ScalingMode, Simulator, SseOptions, EPS_Z};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EtaMode {
    State,
    Gate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EtaState {
    pub eta: Vec<C64>,
    pub mode: EtaMode,
}

impl EtaState {
    /// η_m = φ†P_mψ
    pub fn from_states(basis: &PauliBasis, phi: &[C64], psi: &[C64]) -> Result<Self> {
        if phi.len() != basis.dim() || psi.len() != basis.dim() {
            return Err(Error::Dimension("state dimension does not match basis".into()));
        }
        let eta = basis
            .elements()
            .iter()
            .map(|p| inner(phi, &p.apply(psi)))
            .collect();
        Ok(Self {
            eta,
            mode: EtaMode::State,
        })
    }

    /// η_m = Tr[P_m U V†]/2^N
    pub fn from_unitaries(basis: &PauliBasis, u: &ComplexMatrix, v: &ComplexMatrix) -> Self {
        let q = u.matmul(&v.adjoint());
        Self {
            eta: basis.expand(&q),
            mode: EtaMode::Gate,
        }
    }

    /// η†Λ₀η = |η_0|²
    pub fn fidelity(&self) -> f64 {
        self.eta[0].norm_sqr()
    }

    pub fn norm_sq(&self) -> f64 {
        self.eta.iter().map(|z| z.norm_sqr()).sum()
    }

    /// ψφ† in state mode, UV† in gate mode.
    pub fn reconstruct_q(&self, basis: &PauliBasis) -> ComplexMatrix {
        let q = basis.reconstruct(&self.eta);
        match self.mode {
            EtaMode::State => q.scale_real(basis.normalization()),
            EtaMode::Gate => q,
        }
    }
}

/// η₀ = e₀ for the gate-mode system (Q₀ = I/2^N).
pub fn gate_eta_init(n_qubits: usize) -> Result<EtaState> {
    if n_qubits == 0 || n_qubits > crate::linalg::pauli::MAX_QUBITS {
        return Err(Error::InvalidArgument(format!("unsupported qubit count {n_qubits}")));
    }
    let mut eta = vec![C64::new(0.0, 0.0); 1 << (2 * n_qubits)];
    eta[0] = C64::new(1.0, 0.0);
    Ok(EtaState {
        eta,
        mode: EtaMode::Gate,
    })
}

#[derive(Clone, Debug)]
pub struct TransferSystem {
    pub basis: PauliBasis,
    /// Generator of a fixed drift Hamiltonian, if any.
    pub drift: Option<ComplexMatrix>,
    /// One per control channel.
    pub a: Vec<ComplexMatrix>,
    /// One per noise channel.
    pub b: Vec<ComplexMatrix>,
    /// B_l†B_l
    pub btb: Vec<ComplexMatrix>,
    /// Trace-expansion factor 1/2^N.
    pub normalization: f64,
    pub gammas: Vec<f64>,
    pub scaling: ScalingMode,
    pub couplings: Vec<Option<usize>>,
}

fn hamiltonian_generator(h: &ComplexMatrix, basis: &PauliBasis) -> ComplexMatrix {
    let n = basis.len();
    let norm = basis.normalization();
    let mut a = ComplexMatrix::zeros(n, n);
    for (col, pn) in basis.elements().iter().enumerate() {
        let comm = h.commutator(pn);
        for (row, pm) in basis.elements().iter().enumerate() {
            a[(row, col)] = I * pm.trace_product(&comm) * norm;
        }
    }
    a
}

fn noise_generator(s: &ComplexMatrix, basis: &PauliBasis) -> ComplexMatrix {
    let n = basis.len();
    let norm = basis.normalization();
    let mut b = ComplexMatrix::zeros(n, n);
    for (col, pn) in basis.elements().iter().enumerate() {
        let sp = s.matmul(pn);
        for (row, pm) in basis.elements().iter().enumerate() {
            b[(row, col)] = I * pm.trace_product(&sp) * norm;
        }
    }
    b
}

fn check_operator(op: &ComplexMatrix, basis: &PauliBasis) -> Result<()> {
    if op.rows() != basis.dim() || op.cols() != basis.dim() {
        return Err(Error::Dimension(format!(
            "operator {}x{} does not match {}-qubit basis",
            op.rows(),
            op.cols(),
            basis.n_qubits()
        )));
    }
    if !op.is_hermitian(1e-12) {
        return Err(Error::InvalidArgument("transfer generators need Hermitian operators".into()));
    }
    Ok(())
}

/// Assembles A_j for every control Hamiltonian and B_l for every noise
/// operator. Noise strengths default to 1; use
/// [`TransferSystem::from_dynamics`] to carry γ_l and couplings.
pub fn build_transfer_system(
    h_list: &[ComplexMatrix],
    s_list: &[ComplexMatrix],
    basis: &PauliBasis,
) -> Result<TransferSystem> {
    for op in h_list.iter().chain(s_list) {
        check_operator(op, basis)?;
    }
    let a: Vec<ComplexMatrix> = h_list.iter().map(|h| hamiltonian_generator(h, basis)).collect();
    let b: Vec<ComplexMatrix> = s_list.iter().map(|s| noise_generator(s, basis)).collect();
    for m in a.iter().chain(&b) {
        assert!(
            m.is_anti_hermitian(1e-12),
            "transfer generator lost anti-Hermiticity"
        );
    }
    let btb = b.iter().map(|m| m.adjoint().matmul(m)).collect();
    Ok(TransferSystem {
        basis: basis.clone(),
        drift: None,
        a,
        b,
        btb,
        normalization: basis.normalization(),
        gammas: vec![1.0; s_list.len()],
        scaling: ScalingMode::Fixed,
        couplings: vec![None; s_list.len()],
    })
}

impl TransferSystem {
    pub fn from_dynamics(dynamics: &Dynamics) -> Result<Self> {
        dynamics.validate()?;
        let n_qubits = dynamics.dim().trailing_zeros() as usize;
        let basis = PauliBasis::new(n_qubits)?;
        let s_list: Vec<ComplexMatrix> = dynamics.noise.iter().map(|c| c.operator.clone()).collect();
        let mut sys = build_transfer_system(&dynamics.controls, &s_list, &basis)?;
        if let Some(h) = &dynamics.drift {
            sys.drift = Some(hamiltonian_generator(h, &basis));
        }
        sys.gammas = dynamics.noise.iter().map(|c| c.spec.gamma).collect();
        sys.scaling = dynamics.scaling;
        sys.couplings = dynamics.noise.iter().map(|c| c.coupling).collect();
        Ok(sys)
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn noise_weight(&self, pulse: &ControlPulse, l: usize, i: usize) -> f64 {
        match (self.scaling, self.couplings[l]) {
            (ScalingMode::Scaled, Some(c)) => pulse.value(c, i).abs().max(EPS_Z),
            _ => 1.0,
        }
    }

    /// A_d + Σ_j z_j(t_i) A_j
    pub fn control_generator(&self, pulse: &ControlPulse, i: usize) -> ComplexMatrix {
        let n = self.dim();
        let mut m = self.drift.clone().unwrap_or_else(|| ComplexMatrix::zeros(n, n));
        for (j, a) in self.a.iter().enumerate() {
            let z = pulse.value(j, i);
            if z != 0.0 {
                m.axpy(C64::new(z, 0.0), a);
            }
        }
        m
    }

    /// Per-step drift matrices M_i and diffusion coefficients c_{l,i}
    /// (diffusion is c_{l,i} B_l) for the given noise realization.
    pub fn generator<'a>(&'a self, pulse: &ControlPulse, paths: &[NoisePath]) -> Result<EtaGenerator<'a>> {
        if pulse.n_channels() != self.a.len() {
            return Err(Error::Dimension(format!(
                "pulse has {} channels for {} generators",
                pulse.n_channels(),
                self.a.len()
            )));
        }
        if paths.len() != self.b.len() {
            return Err(Error::Dimension(format!(
                "{} noise paths for {} channels",
                paths.len(),
                self.b.len()
            )));
        }
        let steps = pulse.steps();
        let mut drift = Vec::with_capacity(steps);
        let mut coeff = vec![Vec::with_capacity(steps); self.b.len()];
        let mut silent = Vec::with_capacity(steps);
        for i in 0..steps {
            let mut m = self.control_generator(pulse, i);
            silent.push(paths.iter().all(|p| p.gamma == 0.0 && p.drift[i] == 0.0 && p.dqv[i] == 0.0));
            for (l, p) in paths.iter().enumerate() {
                let w = self.noise_weight(pulse, l, i);
                let qv = -0.5 * w * p.dqv[i] / p.dt;
                if qv != 0.0 {
                    m.axpy(C64::new(qv, 0.0), &self.btb[l]);
                }
                let dr = p.drift[i] * w.sqrt();
                if dr != 0.0 {
                    m.axpy(C64::new(dr, 0.0), &self.b[l]);
                }
                coeff[l].push(p.gamma * w.sqrt());
            }
            drift.push(m);
        }
        Ok(EtaGenerator {
            drift,
            b: &self.b,
            coeff,
            silent,
        })
    }
}

pub struct EtaGenerator<'a> {
    pub drift: Vec<ComplexMatrix>,
    b: &'a [ComplexMatrix],
    pub coeff: Vec<Vec<f64>>,
    /// Steps on which every noise channel is inactive.
    pub silent: Vec<bool>,
}

impl EtaGenerator<'_> {
    /// Advances one step; noiseless steps use the exact exponential.
    pub fn advance(
        &self,
        scheme: Scheme,
        i: usize,
        y: &ComplexMatrix,
        dt: f64,
        normals: &[f64],
    ) -> Result<ComplexMatrix> {
        if self.silent[i] {
            Ok(self.drift[i].scale_real(dt).expm().matmul(y))
        } else {
            sde::step(scheme, self, i, y, dt, normals)
        }
    }
}

impl SdeSystem for EtaGenerator<'_> {
    fn channels(&self) -> usize {
        self.b.len()
    }

    fn drift(&self, step: usize, y: &ComplexMatrix) -> ComplexMatrix {
        self.drift[step].matmul(y)
    }

    fn diffusion(&self, step: usize, channel: usize, y: &ComplexMatrix) -> ComplexMatrix {
        self.b[channel]
            .matmul(y)
            .scale_real(self.coeff[channel][step])
    }
}

/// Transposed inverse dynamics: if dΦ = MΦdt + ΣG_lΦdW_l then Ψ = Φ⁻¹
/// satisfies dΨᵀ = (−M + ΣG_l²)ᵀΨᵀdt − ΣG_lᵀΨᵀdW_l.
struct InverseGenerator {
    drift: Vec<ComplexMatrix>,
    diffusion: Vec<Vec<ComplexMatrix>>,
}

impl SdeSystem for InverseGenerator {
    fn channels(&self) -> usize {
        self.diffusion.len()
    }
    fn drift(&self, step: usize, y: &ComplexMatrix) -> ComplexMatrix {
        self.drift[step].matmul(y)
    }
    fn diffusion(&self, step: usize, channel: usize, y: &ComplexMatrix) -> ComplexMatrix {
        self.diffusion[channel][step].matmul(y)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum InverseMethod {
    /// Ψ_t = Φ_t⁻¹ by Gauss-Jordan elimination at every stored step.
    #[default]
    Inversion,
    /// Integrate the SDE satisfied by Φ⁻¹ with the same noise.
    Sde,
}

#[derive(Clone, Copy, Debug)]
pub struct EtaOptions {
    /// Also integrate Φ and form Ψ.
    pub solution_operator: bool,
    pub inverse: InverseMethod,
    pub cond_limit: f64,
}

impl Default for EtaOptions {
    fn default() -> Self {
        Self {
            solution_operator: true,
            inverse: InverseMethod::Inversion,
            cond_limit: 1e8,
        }
    }
}

impl EtaOptions {
    pub fn eta_only() -> Self {
        Self {
            solution_operator: false,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct EtaTrajectory {
    pub eta: Vec<Vec<C64>>,
    /// Φ_{t_i}, empty unless requested.
    pub phi: Vec<ComplexMatrix>,
    /// Ψ_{t_i}, empty unless requested.
    pub psi: Vec<ComplexMatrix>,
    pub max_condition: f64,
}

impl EtaTrajectory {
    pub fn fidelity(&self) -> Vec<f64> {
        self.eta.iter().map(|e| e[0].norm_sqr()).collect()
    }
}

pub fn propagate_eta(
    system: &TransferSystem,
    pulse: &ControlPulse,
    noise_paths: &[NoisePath],
    eta0: &EtaState,
    scheme: Scheme,
    opts: EtaOptions,
) -> Result<EtaTrajectory> {
    let n = system.dim();
    if eta0.eta.len() != n {
        return Err(Error::Dimension(format!("eta of length {} for a {n}-dim system", eta0.eta.len())));
    }
    for p in noise_paths {
        if p.steps != pulse.steps() {
            return Err(Error::Dimension("noise path grid differs from pulse grid".into()));
        }
    }
    let gen = system.generator(pulse, noise_paths)?;
    let steps = pulse.steps();
    let dt = pulse.dt();
    let mut normals = vec![0.0; noise_paths.len()];

    if !opts.solution_operator {
        let mut y = ComplexMatrix::column(&eta0.eta);
        let mut eta = Vec::with_capacity(steps + 1);
        eta.push(eta0.eta.clone());
        for i in 0..steps {
            for (nv, p) in normals.iter_mut().zip(noise_paths) {
                *nv = p.normal(i);
            }
            y = gen.advance(scheme, i, &y, dt, &normals)?;
            eta.push(y.as_slice().to_vec());
        }
        return Ok(EtaTrajectory {
            eta,
            phi: Vec::new(),
            psi: Vec::new(),
            max_condition: f64::NAN,
        });
    }

    // The scheme is linear in the state, so η_t = Φ_t η₀ holds exactly.
    let mut phi = Vec::with_capacity(steps + 1);
    phi.push(ComplexMatrix::identity(n));
    for i in 0..steps {
        for (nv, p) in normals.iter_mut().zip(noise_paths) {
            *nv = p.normal(i);
        }
        let next = gen.advance(scheme, i, &phi[i], dt, &normals)?;
        phi.push(next);
    }
    let eta: Vec<Vec<C64>> = phi.iter().map(|f| f.apply(&eta0.eta)).collect();

    let mut max_condition: f64 = 1.0;
    let psi = match opts.inverse {
        InverseMethod::Inversion => {
            let mut psi = Vec::with_capacity(steps + 1);
            for (i, f) in phi.iter().enumerate() {
                let inv = f.inverse().map_err(|_| Error::IllConditioned {
                    step: i,
                    cond: f64::INFINITY,
                })?;
                let cond = f.norm_1() * inv.norm_1();
                max_condition = max_condition.max(cond);
                if cond > opts.cond_limit {
                    return Err(Error::IllConditioned { step: i, cond });
                }
                psi.push(inv);
            }
            psi
        }
        InverseMethod::Sde => {
            let mut drift = Vec::with_capacity(steps);
            let mut diffusion = vec![Vec::with_capacity(steps); noise_paths.len()];
            for i in 0..steps {
                let mut m = gen.drift[i].scale_real(-1.0);
                for (l, b) in system.b.iter().enumerate() {
                    let g = b.scale_real(gen.coeff[l][i]);
                    m += &g.matmul(&g);
                    diffusion[l].push(g.scale_real(-1.0).transpose());
                }
                drift.push(m.transpose());
            }
            let inv_gen = InverseGenerator { drift, diffusion };
            let mut psi_t = ComplexMatrix::identity(n);
            let mut psi = Vec::with_capacity(steps + 1);
            psi.push(psi_t.clone());
            for i in 0..steps {
                for (nv, p) in normals.iter_mut().zip(noise_paths) {
                    *nv = p.normal(i);
                }
                psi_t = sde::step(scheme, &inv_gen, i, &psi_t, dt, &normals)?;
                psi.push(psi_t.transpose());
            }
            for (i, f) in phi.iter().enumerate() {
                let cond = f.condition_number();
                max_condition = max_condition.max(cond);
                if cond > opts.cond_limit {
                    return Err(Error::IllConditioned { step: i, cond });
                }
            }
            psi
        }
    };

    Ok(EtaTrajectory {
        eta,
        phi,
        psi,
        max_condition,
    })
}

/// η_t computed from directly propagated (φ_t, ψ_t), without
/// renormalization of ψ.
pub fn direct_eta_series(
    dynamics: &Dynamics,
    pulse: &ControlPulse,
    paths: Vec<NoisePath>,
    phi0: &[C64],
    psi0: &[C64],
    scheme: Scheme,
) -> Result<Vec<Vec<C64>>> {
    check_paths(dynamics, pulse, &paths)?;
    let basis = PauliBasis::new(dynamics.dim().trailing_zeros() as usize)?;
    let sim = Simulator::new(dynamics, pulse)?;
    let phi = sim.propagate_phi(phi0)?;
    let mut out = Vec::with_capacity(phi.len());
    let mut err = None;
    sim.evolve(ComplexMatrix::column(psi0), scheme, &paths, SseOptions::raw(), |i, y| {
        match EtaState::from_states(&basis, &phi[i], y.as_slice()) {
            Ok(e) => out.push(e.eta),
            Err(e) => err = Some(e),
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

/// Propagates (φ, ψ) directly and η through the transfer system on the same
/// noise realization; returns max_t ‖η_t^direct − η_t^system‖∞.
pub fn consistency_check(
    dynamics: &Dynamics,
    pulse: &ControlPulse,
    phi0: &[C64],
    psi0: &[C64],
    seed: u64,
    scheme: Scheme,
) -> Result<f64> {
    let system = TransferSystem::from_dynamics(dynamics)?;
    let paths = dynamics.sample_noise(pulse.dt(), pulse.steps(), seed)?;
    let eta0 = EtaState::from_states(&system.basis, phi0, psi0)?;
    let via_system = propagate_eta(&system, pulse, &paths, &eta0, scheme, EtaOptions::eta_only())?;
    let direct = direct_eta_series(dynamics, pulse, paths, phi0, psi0, scheme)?;
    Ok(direct
        .iter()
        .zip(&via_system.eta)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).norm()))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{pauli_basis, sigma_x, sigma_y, sigma_z, ZERO};
    use crate::noise::NoiseSpec;
    use crate::sse::NoiseChannel;

    #[test]
    fn identity_hamiltonian_has_zero_generator() {
        let basis = pauli_basis(1).unwrap();
        let sys = build_transfer_system(&[ComplexMatrix::identity(2)], &[], &basis).unwrap();
        assert!(sys.a[0].max_abs() < 1e-15);
    }

    #[test]
    fn sigma_z_couples_x_and_y_only() {
        let basis = pauli_basis(1).unwrap();
        let sys = build_transfer_system(&[sigma_z()], &[sigma_x()], &basis).unwrap();
        let a = &sys.a[0];
        for m in 0..4 {
            for n in 0..4 {
                let xy = (m == 1 && n == 2) || (m == 2 && n == 1);
                if !xy {
                    assert!(a[(m, n)].norm() < 1e-15, "A[{m},{n}] = {}", a[(m, n)]);
                }
            }
        }
        assert!(a[(1, 2)].norm() > 1.0);
        assert!((a[(1, 2)] + a[(2, 1)]).norm() < 1e-15);
    }

    #[test]
    fn generators_are_anti_hermitian() {
        let basis = pauli_basis(2).unwrap();
        let h = crate::linalg::kron(&sigma_x(), &sigma_y());
        let s = crate::linalg::kron(&sigma_z(), &ComplexMatrix::identity(2));
        let sys = build_transfer_system(&[h], &[s], &basis).unwrap();
        assert!(sys.a[0].is_anti_hermitian(1e-12));
        assert!(sys.b[0].is_anti_hermitian(1e-12));
    }

    #[test]
    fn rejects_non_hermitian() {
        let basis = pauli_basis(1).unwrap();
        let bad = ComplexMatrix::from_rows(&[[ZERO, C64::new(1.0, 0.0)], [ZERO, ZERO]]);
        assert!(build_transfer_system(&[bad], &[], &basis).is_err());
    }

    #[test]
    fn gate_init_and_reconstruction() {
        let e = gate_eta_init(1).unwrap();
        assert_eq!(e.eta, vec![C64::new(1.0, 0.0), ZERO, ZERO, ZERO]);
        let basis = pauli_basis(1).unwrap();
        assert!(e.reconstruct_q(&basis).max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn noiseless_rotation_matches_direct() {
        let ch = NoiseChannel::new(sigma_z(), NoiseSpec::white(0.0)).unwrap();
        let d = Dynamics::new(vec![sigma_x()], vec![ch]).unwrap();
        let pulse = ControlPulse::constant(&[1.0], 100, 0.01);
        let psi0 = vec![C64::new(1.0, 0.0), ZERO];
        let dev = consistency_check(&d, &pulse, &psi0, &psi0, 1, Scheme::Platen).unwrap();
        assert!(dev < 1e-8, "{dev}");
    }
}
