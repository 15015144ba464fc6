//! Liouvillian superoperators and tools built on them: Lindblad
//! dissipators, the thermal weak-coupling (Born–Markov–secular)
//! generator, propagation, steady states, and entropy-production
//! functionals.
//!
//! Superoperators are stored as dense d²×d² matrices acting on
//! column-stacked vectorized operators, i.e. vec(AρB) = (Bᵀ ⊗ A) vec(ρ).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{
    kron, matrix_log, relative_entropy, CMatrix, DensityMatrix, HilbertSpace, Operator,
    SUPPORT_CUTOFF,
};

/// Frequencies closer than this fraction of the spectral range are
/// binned together when grouping Bohr frequencies.
const FREQ_BIN_REL_TOL: f64 = 1e-9;
/// Maximum tolerated trace drift during propagation.
const TRACE_DRIFT_TOL: f64 = 1e-7;

/// Column-stacking vectorization: vec(ρ) stacks the columns of ρ.
pub fn vectorize(m: &CMatrix) -> DVector<Complex64> {
    let (r, c) = m.shape();
    DVector::from_fn(r * c, |k, _| m[(k % r, k / r)])
}

/// Inverse of [`vectorize`] for square matrices.
pub fn unvectorize(v: &DVector<Complex64>, d: usize) -> CMatrix {
    CMatrix::from_fn(d, d, |i, j| v[j * d + i])
}

/// A superoperator on operators over a fixed Hilbert space.
#[derive(Debug, Clone)]
pub struct Superoperator {
    space: HilbertSpace,
    mat: CMatrix,
}

impl Superoperator {
    pub fn new(space: HilbertSpace, mat: CMatrix) -> Result<Self> {
        let d2 = space.total_dim() * space.total_dim();
        if mat.nrows() != d2 || mat.ncols() != d2 {
            return Err(Error::InvalidInput(format!(
                "superoperator is {}x{}, expected {d2}x{d2}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { space, mat })
    }

    pub fn zeros(space: HilbertSpace) -> Self {
        let d2 = space.total_dim() * space.total_dim();
        Self {
            space,
            mat: CMatrix::zeros(d2, d2),
        }
    }

    pub fn identity(space: HilbertSpace) -> Self {
        let d2 = space.total_dim() * space.total_dim();
        Self {
            space,
            mat: CMatrix::identity(d2, d2),
        }
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    /// Left-multiplication superoperator ρ ↦ Aρ.
    pub fn left_mul(a: &Operator) -> Self {
        let d = a.dim();
        Self {
            space: a.space().clone(),
            mat: kron(&CMatrix::identity(d, d), a.matrix()),
        }
    }

    /// Right-multiplication superoperator ρ ↦ ρB.
    pub fn right_mul(b: &Operator) -> Self {
        let d = b.dim();
        Self {
            space: b.space().clone(),
            mat: kron(&b.matrix().transpose(), &CMatrix::identity(d, d)),
        }
    }

    /// Sandwich superoperator ρ ↦ AρB.
    pub fn sandwich(a: &Operator, b: &Operator) -> Self {
        Self {
            space: a.space().clone(),
            mat: kron(&b.matrix().transpose(), a.matrix()),
        }
    }

    /// Coherent part −i[H, ·].
    pub fn hamiltonian(h: &Operator) -> Self {
        let d = h.dim();
        let i = Complex64::new(0.0, 1.0);
        let mat = (kron(&h.matrix().transpose(), &CMatrix::identity(d, d))
            - kron(&CMatrix::identity(d, d), h.matrix()))
            * i;
        Self {
            space: h.space().clone(),
            mat,
        }
    }

    /// Lindblad dissipator D[A]ρ = AρA† − ½{A†A, ρ}, scaled by `rate`.
    pub fn dissipator(a: &Operator, rate: f64) -> Self {
        let d = a.dim();
        let id = CMatrix::identity(d, d);
        let ada = a.matrix().adjoint() * a.matrix();
        let jump = kron(&a.matrix().conjugate(), a.matrix());
        let anti = kron(&id, &ada) + kron(&ada.transpose(), &id);
        let mat = (jump - anti * Complex64::new(0.5, 0.0)) * Complex64::new(rate, 0.0);
        Self {
            space: a.space().clone(),
            mat,
        }
    }

    /// Cross dissipator ρ ↦ γ (A_ℓ ρ A_k† − ½{A_k† A_ℓ, ρ}), the
    /// building block of the secular thermal generator.
    pub fn cross_dissipator(a_l: &Operator, a_k: &Operator, rate: f64) -> Self {
        let d = a_l.dim();
        let id = CMatrix::identity(d, d);
        let akal = a_k.matrix().adjoint() * a_l.matrix();
        let jump = kron(&a_k.matrix().conjugate(), a_l.matrix());
        let anti = kron(&id, &akal) + kron(&akal.transpose(), &id);
        let mat = (jump - anti * Complex64::new(0.5, 0.0)) * Complex64::new(rate, 0.0);
        Self {
            space: a_l.space().clone(),
            mat,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::InvalidInput("superoperator space mismatch".into()));
        }
        Ok(Self {
            space: self.space.clone(),
            mat: &self.mat + &other.mat,
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            space: self.space.clone(),
            mat: &self.mat * Complex64::new(c, 0.0),
        }
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.space != other.space {
            return Err(Error::InvalidInput("superoperator space mismatch".into()));
        }
        Ok(Self {
            space: self.space.clone(),
            mat: &self.mat * &other.mat,
        })
    }

    /// Apply to an arbitrary matrix.
    pub fn apply_matrix(&self, m: &CMatrix) -> CMatrix {
        unvectorize(&(&self.mat * vectorize(m)), self.dim())
    }

    /// Apply to a density matrix; the result is a raw matrix since a
    /// generator output is traceless, not a state.
    pub fn apply(&self, rho: &DensityMatrix) -> CMatrix {
        self.apply_matrix(rho.matrix())
    }

    /// Exponential map e^{L t} as a superoperator (the channel for a
    /// time-independent generator).
    pub fn exp(&self, t: f64) -> Self {
        Self {
            space: self.space.clone(),
            mat: (&self.mat * Complex64::new(t, 0.0)).exp(),
        }
    }

    /// Build the superoperator of a quantum channel ρ ↦ Σ_k K_k ρ K_k†.
    pub fn from_kraus(space: HilbertSpace, kraus: &[CMatrix]) -> Result<Self> {
        let d = space.total_dim();
        let mut mat = CMatrix::zeros(d * d, d * d);
        for k in kraus {
            if k.nrows() != d || k.ncols() != d {
                return Err(Error::InvalidInput("Kraus operator dimension mismatch".into()));
            }
            mat += kron(&k.conjugate(), k);
        }
        Ok(Self { space, mat })
    }

    /// Superoperator of conjugation by a unitary, ρ ↦ UρU†.
    pub fn from_unitary(u: &Operator) -> Self {
        Self {
            space: u.space().clone(),
            mat: kron(&u.matrix().conjugate(), u.matrix()),
        }
    }

    /// Choi matrix of the map (column-stacking convention):
    /// J = (Φ ⊗ id)(|Ω⟩⟨Ω|) with |Ω⟩ = Σ_i |ii⟩, reshuffled from the
    /// superoperator matrix.
    pub fn choi(&self) -> CMatrix {
        let d = self.dim();
        let mut j = CMatrix::zeros(d * d, d * d);
        // J[(i,k),(j,l)] = S[(k,l) block index], with S acting as
        // vec(out) = S vec(in): out_{kl} entries of Φ(|i⟩⟨j|).
        for i in 0..d {
            for jj in 0..d {
                // Φ(|i⟩⟨j|) has vectorized index column j*d+i of S.
                for k in 0..d {
                    for l in 0..d {
                        j[(k * d + i, l * d + jj)] = self.mat[(l * d + k, jj * d + i)];
                    }
                }
            }
        }
        j
    }

    /// Check complete positivity and trace preservation of a channel.
    /// Returns (min Choi eigenvalue, max trace-preservation deviation).
    pub fn cptp_check(&self) -> (f64, f64) {
        let d = self.dim();
        let choi = self.choi();
        let eig = SymmetricEigen::new(choi.clone());
        let min_ev = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        // Trace preservation: tr_out of the Choi matrix must be the identity.
        let mut dev: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let mut acc = Complex64::ZERO;
                for k in 0..d {
                    acc += choi[(k * d + i, k * d + j)];
                }
                let expect = if i == j { Complex64::ONE } else { Complex64::ZERO };
                dev = dev.max((acc - expect).norm());
            }
        }
        (min_ev, dev)
    }

    /// Trace-annihilation defect of a generator: ‖tr{L ρ}‖ over a basis,
    /// measured as the max column sum of the trace functional.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim();
        let mut dev: f64 = 0.0;
        // tr{L(E_ij)} for every matrix unit E_ij.
        for col in 0..d * d {
            let mut acc = Complex64::ZERO;
            for k in 0..d {
                acc += self.mat[(k * d + k, col)];
            }
            dev = dev.max(acc.norm());
        }
        dev
    }
}

/// One decay channel of a secular thermal generator, for audit purposes.
#[derive(Debug, Clone)]
pub struct ThermalChannel {
    /// Bohr frequency ω = ε − ε′ of the channel (can be negative or zero).
    pub omega: f64,
    /// Coupling-operator indices (k, ℓ) of the rate γ_{kℓ}(ω).
    pub indices: (usize, usize),
    /// Rate γ_{kℓ}(ω).
    pub rate: f64,
    /// Eigenoperator A_ℓ(ω) of the jump side.
    pub jump: CMatrix,
    /// Eigenoperator A_k(ω) of the adjoint side.
    pub jump_adj_side: CMatrix,
}

/// Spectral correlation function γ_{kℓ}(ω) of the reservoir, supplied by
/// the caller. Must satisfy the KMS condition γ(−ω) = e^{−βω} γ(ω) for a
/// thermal reservoir; [`ldb_audit`] verifies this on the constructed
/// generator.
pub type SpectralDensity = dyn Fn(usize, usize, f64) -> f64;

/// The thermal Born–Markov–secular generator
///
///   L_β ρ = −i[H, ρ] (added separately by the caller if desired)
///         + Σ_ω Σ_{kℓ} γ_{kℓ}(ω) (A_ℓ(ω) ρ A_k†(ω) − ½{A_k†(ω)A_ℓ(ω), ρ}),
///
/// with eigenoperators A_k(ω) = Σ_{ε−ε′=ω} Π_ε A_k Π_{ε′}. The Lamb-shift
/// correction is omitted: it commutes with H and does not affect
/// populations in the secular regime.
///
/// Returns the dissipative part only, plus the channel list for audits.
pub fn thermal_generator(
    h: &Operator,
    couplings: &[Operator],
    gamma: &SpectralDensity,
) -> Result<(Superoperator, Vec<ThermalChannel>)> {
    if !h.is_hermitian(1e-10) {
        return Err(Error::InvalidInput("Hamiltonian must be Hermitian".into()));
    }
    for a in couplings {
        if a.space() != h.space() {
            return Err(Error::InvalidInput("coupling operator space mismatch".into()));
        }
    }
    let d = h.dim();
    let eig = SymmetricEigen::new(h.matrix().clone());
    let evals = &eig.eigenvalues;
    let v = &eig.eigenvectors;

    let spread = evals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - evals.iter().cloned().fold(f64::INFINITY, f64::min);
    let bin_tol = (FREQ_BIN_REL_TOL * spread).max(1e-12);

    // Collect distinct Bohr frequencies ω = ε_i − ε_j.
    let mut omegas: Vec<f64> = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let w = evals[i] - evals[j];
            if !omegas.iter().any(|&x| (x - w).abs() < bin_tol) {
                omegas.push(w);
            }
        }
    }
    omegas.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Coupling operators in the energy eigenbasis.
    let couplings_e: Vec<CMatrix> = couplings
        .iter()
        .map(|a| v.adjoint() * a.matrix() * v)
        .collect();

    let mut total = Superoperator::zeros(h.space().clone());
    let mut channels = Vec::new();

    for &omega in &omegas {
        // Eigenoperators A_k(ω) in the energy eigenbasis: keep entries
        // (i,j) with ε_j − ε_i = ω (A_k(ω) lowers energy by ω).
        let eigenops: Vec<CMatrix> = couplings_e
            .iter()
            .map(|ae| {
                let mut m = CMatrix::zeros(d, d);
                for i in 0..d {
                    for j in 0..d {
                        if (evals[j] - evals[i] - omega).abs() < bin_tol {
                            m[(i, j)] = ae[(i, j)];
                        }
                    }
                }
                m
            })
            .collect();

        for (k, ak) in eigenops.iter().enumerate() {
            for (l, al) in eigenops.iter().enumerate() {
                let rate = gamma(k, l, omega);
                if rate == 0.0 {
                    continue;
                }
                if rate < 0.0 && k == l {
                    return Err(Error::InvalidInput(format!(
                        "negative diagonal rate γ_{{{k}{k}}}({omega}) = {rate}"
                    )));
                }
                if al.iter().all(|c| c.norm() < 1e-15)
                    || ak.iter().all(|c| c.norm() < 1e-15)
                {
                    continue;
                }
                // Back to the original basis.
                let al_o = v * al * v.adjoint();
                let ak_o = v * ak * v.adjoint();
                let op_l = Operator::new(h.space().clone(), al_o.clone())?;
                let op_k = Operator::new(h.space().clone(), ak_o.clone())?;
                total = total.add(&Superoperator::cross_dissipator(&op_l, &op_k, rate))?;
                channels.push(ThermalChannel {
                    omega,
                    indices: (k, l),
                    rate,
                    jump: al_o,
                    jump_adj_side: ak_o,
                });
            }
        }
    }
    Ok((total, channels))
}

/// Convenience: single coupling operator with a flat thermal spectral
/// density γ(ω) = γ₀ · n-factor obeying KMS at inverse temperature β:
/// γ(ω>0) = γ₀ (emission into the bath), γ(−ω) = e^{−βω} γ(ω), γ(0) = γ₀.
pub fn flat_thermal_density(gamma0: f64, beta: f64) -> impl Fn(usize, usize, f64) -> f64 {
    move |k, l, omega| {
        if k != l {
            return 0.0;
        }
        if omega >= 0.0 {
            gamma0
        } else {
            gamma0 * (beta * omega).exp()
        }
    }
}

/// Audit local detailed balance of a constructed thermal generator:
/// for every channel at ω there must be a matching channel at −ω with
/// rate e^{−βω} times the forward rate. Returns the worst relative KMS
/// violation.
pub fn ldb_audit(channels: &[ThermalChannel], beta: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for c in channels {
        if c.omega.abs() < 1e-12 {
            continue;
        }
        // Find the reverse channel at −ω with swapped indices.
        let rev = channels.iter().find(|r| {
            (r.omega + c.omega).abs() < 1e-9 && r.indices == (c.indices.1, c.indices.0)
        });
        let expected = c.rate * (-beta * c.omega).exp();
        match rev {
            Some(r) => {
                let denom = expected.abs().max(1e-300);
                worst = worst.max((r.rate - expected).abs() / denom);
            }
            None => {
                if expected.abs() > 1e-15 {
                    worst = f64::INFINITY;
                }
            }
        }
    }
    worst
}

/// Propagate ρ under a time-independent generator for time t via the
/// matrix exponential of the superoperator. Fails if the trace drifts.
pub fn propagate(l: &Superoperator, rho: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    let channel = l.exp(t);
    let out = channel.apply(rho);
    let drift = (out.trace().re - 1.0).abs();
    if drift > TRACE_DRIFT_TOL {
        return Err(Error::Numerical(format!(
            "trace drifted by {drift:.3e} during propagation"
        )));
    }
    DensityMatrix::new(rho.space().clone(), out).map_err(|e| {
        Error::Numerical(format!("propagation produced an invalid state: {e}"))
    })
}

/// Propagate under a time-dependent generator L(t) with classic RK4 plus
/// one Richardson halving step for error control. `steps` is the base
/// step count; the result uses the extrapolated (order-5) combination.
pub fn propagate_time_dep<F>(
    l_of_t: F,
    rho: &DensityMatrix,
    t0: f64,
    t1: f64,
    steps: usize,
) -> Result<DensityMatrix>
where
    F: Fn(f64) -> Superoperator,
{
    if steps == 0 {
        return Err(Error::InvalidInput("steps must be positive".into()));
    }
    let coarse = rk4_run(&l_of_t, rho.matrix().clone(), t0, t1, steps);
    let fine = rk4_run(&l_of_t, rho.matrix().clone(), t0, t1, 2 * steps);
    // Richardson extrapolation for a 4th-order method.
    let extrap = (&fine * Complex64::new(16.0 / 15.0, 0.0))
        - (&coarse * Complex64::new(1.0 / 15.0, 0.0));
    let err = (&fine - &coarse).iter().map(|c| c.norm()).fold(0.0, f64::max) / 15.0;
    if err > 1e-7 {
        return Err(Error::Numerical(format!(
            "time-dependent propagation error estimate {err:.3e} exceeds 1e-7; increase steps"
        )));
    }
    let drift = (extrap.trace().re - 1.0).abs();
    if drift > TRACE_DRIFT_TOL {
        return Err(Error::Numerical(format!(
            "trace drifted by {drift:.3e} during time-dependent propagation"
        )));
    }
    DensityMatrix::new(rho.space().clone(), extrap)
        .map_err(|e| Error::Numerical(format!("propagation produced an invalid state: {e}")))
}

fn rk4_run<F>(l_of_t: &F, mut rho: CMatrix, t0: f64, t1: f64, steps: usize) -> CMatrix
where
    F: Fn(f64) -> Superoperator,
{
    let h = (t1 - t0) / steps as f64;
    let half = Complex64::new(0.5 * h, 0.0);
    let sixth = Complex64::new(h / 6.0, 0.0);
    for n in 0..steps {
        let t = t0 + n as f64 * h;
        let k1 = l_of_t(t).apply_matrix(&rho);
        let k2 = l_of_t(t + 0.5 * h).apply_matrix(&(&rho + &k1 * half));
        let k3 = l_of_t(t + 0.5 * h).apply_matrix(&(&rho + &k2 * half));
        let k4 = l_of_t(t + h).apply_matrix(&(&rho + &k3 * Complex64::new(h, 0.0)));
        rho += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4) * sixth;
    }
    rho
}

/// Stationary state of a generator: the trace-one element of its kernel.
/// Errors if the kernel is not one-dimensional (non-unique steady state)
/// or contains no trace-class element.
pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    let d = l.dim();
    let svd = l.mat.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = (smax * 1e-10).max(1e-12);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Numerical("SVD failed to produce V".into()))?;
    let null_idx: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] < tol)
        .collect();
    if null_idx.is_empty() {
        return Err(Error::Numerical("generator has no stationary state".into()));
    }
    if null_idx.len() > 1 {
        return Err(Error::Unsupported(format!(
            "steady state is not unique: kernel dimension {}",
            null_idx.len()
        )));
    }
    let vec = v_t.row(null_idx[0]).adjoint();
    let mut m = unvectorize(&DVector::from_iterator(d * d, vec.iter().cloned()), d);
    // Hermitize and normalize; the kernel vector is defined up to phase.
    m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = m.trace().re;
    if tr.abs() < 1e-12 {
        return Err(Error::Numerical(
            "kernel element is traceless; no stationary density matrix".into(),
        ));
    }
    m /= Complex64::new(tr, 0.0);
    DensityMatrix::new(l.space.clone(), m)
}

/// Spohn entropy-production functional
/// σ(ρ) = −tr{L(ρ)(ln ρ − ln ρ_ss)} ≥ 0 for a Lindblad L with stationary
/// state ρ_ss.
pub fn spohn_functional(
    l: &Superoperator,
    rho: &DensityMatrix,
    rho_ss: &DensityMatrix,
) -> Result<f64> {
    // Support condition: D(ρ‖ρ_ss) must be finite for the functional to
    // be well-defined.
    let dref = relative_entropy(rho, rho_ss)?;
    if !dref.is_finite() {
        return Err(Error::Unsupported(
            "Spohn functional undefined: state support exceeds stationary support".into(),
        ));
    }
    let lrho = l.apply(rho);
    let log_rho = matrix_log(rho);
    let log_ss = log_on_support_pub(rho_ss.matrix());
    let val = -((&lrho * (log_rho - log_ss)).trace().re);
    Ok(val)
}

fn log_on_support_pub(mat: &CMatrix) -> CMatrix {
    let eig = SymmetricEigen::new(mat.clone());
    let d = mat.nrows();
    let mut diag = CMatrix::zeros(d, d);
    for i in 0..d {
        let p = eig.eigenvalues[i];
        diag[(i, i)] = Complex64::new(if p > SUPPORT_CUTOFF { p.ln() } else { 0.0 }, 0.0);
    }
    &eig.eigenvectors * diag * eig.eigenvectors.adjoint()
}

/// Heat current into the system from a thermal generator:
/// Q̇ = tr{H L_diss(ρ)}.
pub fn heat_current(h: &Operator, l_diss: &Superoperator, rho: &DensityMatrix) -> f64 {
    (h.matrix() * l_diss.apply(rho)).trace().re
}

/// Integrate the heat current along the evolution under H-part + L_diss
/// from 0 to t using Simpson's rule on `n` (even) panels of the exactly
/// propagated trajectory.
pub fn integrated_heat(
    h: &Operator,
    l_total: &Superoperator,
    l_diss: &Superoperator,
    rho0: &DensityMatrix,
    t: f64,
    n: usize,
) -> Result<f64> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidInput("n must be a positive even number".into()));
    }
    let dt = t / n as f64;
    let step = l_total.exp(dt);
    let mut rho = rho0.matrix().clone();
    let mut values = Vec::with_capacity(n + 1);
    values.push((h.matrix() * l_diss.apply_matrix(&rho)).trace().re);
    for _ in 0..n {
        rho = step.apply_matrix(&rho);
        values.push((h.matrix() * l_diss.apply_matrix(&rho)).trace().re);
    }
    let mut acc = values[0] + values[n];
    for (i, &v) in values.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    Ok(acc * dt / 3.0)
}

#[allow(unused)]
fn dmatrix_abs_max(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{gibbs_state, qubit, sample_hermitian, sample_state, trace_distance, von_neumann_entropy};
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Damped qubit from the reference computation: H = (w0/2)σ_z with
    /// |index 0⟩ the excited state, flat thermal density at beta.
    fn damped_qubit() -> (Operator, Superoperator, Superoperator, Vec<ThermalChannel>) {
        let space = HilbertSpace::single("S", 2);
        let h = qubit::sigma_z(&space).scale(c(1.3 / 2.0, 0.0));
        let a = qubit::sigma_x(&space);
        let density = flat_thermal_density(0.35, 0.9);
        let (diss, channels) = thermal_generator(&h, &[a], &density).unwrap();
        let total = Superoperator::hamiltonian(&h).add(&diss).unwrap();
        (h, total, diss, channels)
    }

    #[test]
    fn vectorization_roundtrip() {
        let m = sample_hermitian(3, &HilbertSpace::single("S", 3), 1.0);
        let v = vectorize(m.matrix());
        let back = unvectorize(&v, 3);
        assert!((m.matrix() - back).iter().map(|x| x.norm()).fold(0.0, f64::max) < 1e-15);
    }

    #[test]
    fn sandwich_matches_direct_product() {
        let space = HilbertSpace::single("S", 3);
        let a = sample_hermitian(1, &space, 1.0);
        let b = sample_hermitian(2, &space, 1.0);
        let rho = sample_state(3, &space, 3).unwrap();
        let s = Superoperator::sandwich(&a, &b);
        let direct = a.matrix() * rho.matrix() * b.matrix();
        let via_sup = s.apply(&rho);
        assert!((direct - via_sup).iter().map(|x| x.norm()).fold(0.0, f64::max) < 1e-13);
    }

    #[test]
    fn hamiltonian_part_preserves_energy_and_trace() {
        let space = HilbertSpace::single("S", 4);
        let h = sample_hermitian(9, &space, 1.0);
        let l = Superoperator::hamiltonian(&h);
        assert!(l.trace_defect() < 1e-13);
        let rho = sample_state(10, &space, 4).unwrap();
        let rt = propagate(&l, &rho, 0.8).unwrap();
        assert_abs_diff_eq!(
            rt.expectation(&h).unwrap().re,
            rho.expectation(&h).unwrap().re,
            epsilon = 1e-10
        );
        // Unitary evolution preserves entropy.
        assert_abs_diff_eq!(
            von_neumann_entropy(&rt),
            von_neumann_entropy(&rho),
            epsilon = 1e-10
        );
    }

    #[test]
    fn dissipator_annihilates_trace() {
        let space = HilbertSpace::single("S", 3);
        let a = sample_hermitian(4, &space, 1.0);
        assert!(Superoperator::dissipator(&a, 0.7).trace_defect() < 1e-13);
    }

    #[test]
    fn damped_qubit_population_matches_reference() {
        let (_, total, _, _) = damped_qubit();
        let rho0 = DensityMatrix::basis_state(HilbertSpace::single("S", 2), 0).unwrap();
        let rt = propagate(&total, &rho0, 2.1).unwrap();
        // Reference excited-state population from the analytic solution.
        assert_abs_diff_eq!(rt.matrix()[(0, 0)].re, 0.5281476166203403, epsilon = 1e-11);
    }

    #[test]
    fn thermal_generator_stationary_state_is_gibbs() {
        let (h, total, _, _) = damped_qubit();
        let ss = steady_state(&total).unwrap();
        let gibbs = gibbs_state(&h, 0.9).unwrap();
        assert!(trace_distance(&ss, &gibbs).unwrap() < 1e-10);
        assert_abs_diff_eq!(ss.matrix()[(0, 0)].re, 0.2368549842731445, epsilon = 1e-10);
    }

    #[test]
    fn thermal_generator_gibbs_for_random_hamiltonian() {
        // A random nondegenerate 4-level system with two coupling
        // operators must still have the Gibbs state as fixed point.
        let space = HilbertSpace::single("S", 4);
        let h = sample_hermitian(41, &space, 1.0);
        let a1 = sample_hermitian(42, &space, 1.0);
        let a2 = sample_hermitian(43, &space, 0.5);
        let beta = 0.7;
        let density = flat_thermal_density(0.2, beta);
        let (diss, channels) = thermal_generator(&h, &[a1, a2], &density).unwrap();
        let gibbs = gibbs_state(&h, beta).unwrap();
        let residual = diss.apply(&gibbs);
        assert!(residual.iter().map(|x| x.norm()).fold(0.0, f64::max) < 1e-10);
        assert!(ldb_audit(&channels, beta) < 1e-10);
    }

    #[test]
    fn ldb_audit_flags_broken_kms() {
        let space = HilbertSpace::single("S", 2);
        let h = qubit::sigma_z(&space).scale(c(0.5, 0.0));
        let a = qubit::sigma_x(&space);
        // Rates violating KMS by 10%.
        let bad = |k: usize, l: usize, omega: f64| -> f64 {
            if k != l {
                return 0.0;
            }
            if omega >= 0.0 {
                1.0
            } else {
                1.1 * (0.9 * omega).exp()
            }
        };
        let (_, channels) = thermal_generator(&h, &[a], &bad).unwrap();
        assert!(ldb_audit(&channels, 0.9) > 0.05);
    }

    #[test]
    fn exp_channel_is_cptp() {
        let (_, total, _, _) = damped_qubit();
        let channel = total.exp(1.3);
        let (min_ev, tp_dev) = channel.cptp_check();
        assert!(min_ev > -1e-10, "Choi eigenvalue {min_ev}");
        assert!(tp_dev < 1e-10, "trace preservation deviation {tp_dev}");
    }

    #[test]
    fn unitary_channel_choi_is_rank_one() {
        let space = HilbertSpace::single("S", 3);
        let h = sample_hermitian(17, &space, 1.0);
        let u = crate::operators::unitary_from(&h, 0.9).unwrap();
        let choi = Superoperator::from_unitary(&u).choi();
        let eig = SymmetricEigen::new(choi);
        let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert_abs_diff_eq!(ev[0], 3.0, epsilon = 1e-10);
        assert!(ev[1].abs() < 1e-10);
    }

    #[test]
    fn kraus_channel_matches_unitary_superoperator() {
        let space = HilbertSpace::single("S", 2);
        let h = sample_hermitian(23, &space, 1.0);
        let u = crate::operators::unitary_from(&h, 0.4).unwrap();
        let from_kraus =
            Superoperator::from_kraus(space.clone(), &[u.matrix().clone()]).unwrap();
        let from_unitary = Superoperator::from_unitary(&u);
        let diff = from_kraus.matrix() - from_unitary.matrix();
        assert!(diff.iter().map(|x| x.norm()).fold(0.0, f64::max) < 1e-13);
    }

    #[test]
    fn spohn_functional_matches_reference_and_is_nonnegative() {
        let (h, total, _, _) = damped_qubit();
        let rho = DensityMatrix::new(
            HilbertSpace::single("S", 2),
            CMatrix::from_row_slice(
                2,
                2,
                &[c(0.62, 0.0), c(0.15, 0.05), c(0.15, -0.05), c(0.38, 0.0)],
            ),
        )
        .unwrap();
        let ss = gibbs_state(&h, 0.9).unwrap();
        let sigma = spohn_functional(&total, &rho, &ss).unwrap();
        assert_abs_diff_eq!(sigma, 0.31910839122213097, epsilon = 1e-9);
        assert!(sigma >= 0.0);
    }

    #[test]
    fn integrated_heat_matches_energy_change_for_static_hamiltonian() {
        // With a time-independent H the only energy change is heat, so
        // the quadrature must reproduce tr{H Δρ}. Reference: -0.2359958849382137.
        let (h, total, diss, _) = damped_qubit();
        let rho = DensityMatrix::new(
            HilbertSpace::single("S", 2),
            CMatrix::from_row_slice(
                2,
                2,
                &[c(0.62, 0.0), c(0.15, 0.05), c(0.15, -0.05), c(0.38, 0.0)],
            ),
        )
        .unwrap();
        let q = integrated_heat(&h, &total, &diss, &rho, 1.4, 200).unwrap();
        assert_abs_diff_eq!(q, -0.2359958849382137, epsilon = 1e-9);
        let rt = propagate(&total, &rho, 1.4).unwrap();
        let de = rt.expectation(&h).unwrap().re - rho.expectation(&h).unwrap().re;
        assert_abs_diff_eq!(q, de, epsilon = 1e-9);
    }

    #[test]
    fn time_dependent_propagation_reduces_to_static_case() {
        let (_, total, _, _) = damped_qubit();
        let rho = sample_state(55, &HilbertSpace::single("S", 2), 2).unwrap();
        let exact = propagate(&total, &rho, 1.1).unwrap();
        let tl = total.clone();
        let rk = propagate_time_dep(move |_| tl.clone(), &rho, 0.0, 1.1, 200).unwrap();
        assert!(trace_distance(&exact, &rk).unwrap() < 1e-9);
    }

    #[test]
    fn steady_state_rejects_degenerate_kernel() {
        // Pure dephasing in the z basis leaves every diagonal state
        // stationary: the kernel is two-dimensional.
        let space = HilbertSpace::single("S", 2);
        let l = Superoperator::dissipator(&qubit::sigma_z(&space), 1.0);
        assert!(matches!(steady_state(&l), Err(Error::Unsupported(_))));
    }

    #[test]
    fn spohn_functional_vanishes_at_stationarity() {
        let (h, total, _, _) = damped_qubit();
        let ss = gibbs_state(&h, 0.9).unwrap();
        let sigma = spohn_functional(&total, &ss, &ss).unwrap();
        assert!(sigma.abs() < 1e-10);
    }
}
