//! Dense complex operator algebra on labeled composite Hilbert spaces,
//! plus the entropic functionals used throughout the crate.
//!
//! All entropies are in nats. Density matrices are validated at
//! construction: constructors re-hermitize and renormalize once, then
//! enforce the invariants strictly.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Eigenvalues below this cutoff are treated as zero when defining the
/// support of a density matrix.
pub const SUPPORT_CUTOFF: f64 = 1e-12;
/// Eigenvalues below this are clamped to zero inside `0 ln 0 = 0`.
pub const ENTROPY_CUTOFF: f64 = 1e-14;
const HERMITICITY_TOL: f64 = 1e-10;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = -1e-10;

/// An ordered tensor product of labeled subsystems.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertSpace {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl HilbertSpace {
    pub fn new(parts: &[(&str, usize)]) -> Result<Self> {
        let mut labels = Vec::with_capacity(parts.len());
        let mut dims = Vec::with_capacity(parts.len());
        for &(label, dim) in parts {
            if dim == 0 {
                return Err(Error::InvalidInput(format!(
                    "subsystem '{label}' has dimension 0"
                )));
            }
            if labels.iter().any(|l| l == label) {
                return Err(Error::InvalidInput(format!("duplicate label '{label}'")));
            }
            labels.push(label.to_string());
            dims.push(dim);
        }
        if dims.is_empty() {
            return Err(Error::InvalidInput("empty Hilbert space".into()));
        }
        Ok(Self { dims, labels })
    }

    pub fn single(label: &str, dim: usize) -> Self {
        Self::new(&[(label, dim)]).expect("valid single-subsystem space")
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::InvalidInput(format!("unknown subsystem label '{label}'")))
    }

    /// Concatenation of two spaces (the space of A ⊗ B).
    pub fn join(&self, other: &Self) -> Result<Self> {
        let mut dims = self.dims.clone();
        let mut labels = self.labels.clone();
        for (d, l) in other.dims.iter().zip(&other.labels) {
            if labels.iter().any(|x| x == l) {
                return Err(Error::InvalidInput(format!(
                    "duplicate label '{l}' when joining spaces"
                )));
            }
            dims.push(*d);
            labels.push(l.clone());
        }
        Ok(Self { dims, labels })
    }

    /// Sub-space consisting of the listed labels, in their current order.
    pub fn subspace(&self, keep: &[&str]) -> Result<Self> {
        let mut dims = Vec::new();
        let mut labels = Vec::new();
        for (d, l) in self.dims.iter().zip(&self.labels) {
            if keep.contains(&l.as_str()) {
                dims.push(*d);
                labels.push(l.clone());
            }
        }
        if dims.len() != keep.len() {
            return Err(Error::InvalidInput(format!(
                "subspace labels {keep:?} not all present in {:?}",
                self.labels
            )));
        }
        Ok(Self { dims, labels })
    }
}

/// A dense operator on a labeled Hilbert space.
#[derive(Debug, Clone)]
pub struct Operator {
    space: HilbertSpace,
    mat: CMatrix,
}

impl Operator {
    pub fn new(space: HilbertSpace, mat: CMatrix) -> Result<Self> {
        let d = space.total_dim();
        if mat.nrows() != d || mat.ncols() != d {
            return Err(Error::InvalidInput(format!(
                "matrix is {}x{} but space dimension is {d}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { space, mat })
    }

    pub fn zeros(space: HilbertSpace) -> Self {
        let d = space.total_dim();
        Self {
            space,
            mat: CMatrix::zeros(d, d),
        }
    }

    pub fn identity(space: HilbertSpace) -> Self {
        let d = space.total_dim();
        Self {
            space,
            mat: CMatrix::identity(d, d),
        }
    }

    /// Real matrix entries promoted to complex.
    pub fn from_real(space: HilbertSpace, entries: &[f64]) -> Result<Self> {
        let d = space.total_dim();
        if entries.len() != d * d {
            return Err(Error::InvalidInput("entry count mismatch".into()));
        }
        let mat = CMatrix::from_row_slice(
            d,
            d,
            &entries
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect::<Vec<_>>(),
        );
        Ok(Self { space, mat })
    }

    pub fn space(&self) -> &HilbertSpace {
        &self.space
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space.clone(),
            mat: self.mat.adjoint(),
        }
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        max_abs(&(&self.mat - self.mat.adjoint())) < tol
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            space: self.space.clone(),
            mat: &self.mat * c,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self {
            space: self.space.clone(),
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self {
            space: self.space.clone(),
            mat: &self.mat - &other.mat,
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        Ok(Self {
            space: self.space.clone(),
            mat: &self.mat * &other.mat,
        })
    }

    pub fn commutator(&self, other: &Self) -> Result<Self> {
        Ok(Self {
            space: self.space.clone(),
            mat: &self.mat * &other.mat - &other.mat * &self.mat,
        })
    }

    fn check_same_space(&self, other: &Self) -> Result<()> {
        if self.space != other.space {
            return Err(Error::InvalidInput(
                "operators live on different spaces".into(),
            ));
        }
        Ok(())
    }

    /// Embed an operator on one subsystem into a larger space by
    /// tensoring with identities on all other factors.
    pub fn embed(&self, target: &HilbertSpace) -> Result<Self> {
        if self.space.labels.len() != 1 {
            return Err(Error::InvalidInput(
                "embed expects a single-subsystem operator".into(),
            ));
        }
        let label = &self.space.labels[0];
        let pos = target.index_of(label)?;
        if target.dims[pos] != self.space.dims[0] {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch embedding '{label}'"
            )));
        }
        let left: usize = target.dims[..pos].iter().product();
        let right: usize = target.dims[pos + 1..].iter().product();
        let mat = kron(
            &kron(&CMatrix::identity(left, left), &self.mat),
            &CMatrix::identity(right, right),
        );
        Ok(Self {
            space: target.clone(),
            mat,
        })
    }
}

/// Kronecker product with row-major composite index (i_A * d_B + i_B).
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = CMatrix::zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            let aij = a[(i, j)];
            if aij == Complex64::ZERO {
                continue;
            }
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// A ⊗ B with the result living on the concatenated space.
pub fn tensor_product(a: &Operator, b: &Operator) -> Result<Operator> {
    let space = a.space().join(b.space())?;
    Operator::new(space, kron(a.matrix(), b.matrix()))
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// A validated density matrix: Hermitian, unit trace, positive
/// semidefinite (all to fixed tolerances).
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    /// Re-hermitizes ((M + M†)/2) and renormalizes the trace once, then
    /// checks the invariants strictly.
    pub fn new(space: HilbertSpace, mat: CMatrix) -> Result<Self> {
        let raw = Operator::new(space, mat)?;
        let herm_dev = max_abs(&(raw.matrix() - raw.matrix().adjoint())) / 2.0;
        if herm_dev > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix not Hermitian: deviation {herm_dev:.3e}"
            )));
        }
        let sym = (raw.matrix() + raw.matrix().adjoint()) * Complex64::new(0.5, 0.0);
        let tr = sym.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let mat = sym / Complex64::new(tr, 0.0);
        let eig = SymmetricEigen::new(mat.clone());
        let min_ev = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_ev < POSITIVITY_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix has negative eigenvalue {min_ev:.3e}"
            )));
        }
        Ok(Self {
            op: Operator { space: raw.space, mat },
        })
    }

    pub fn from_operator(op: Operator) -> Result<Self> {
        Self::new(op.space, op.mat)
    }

    pub fn pure(space: HilbertSpace, amplitudes: &[Complex64]) -> Result<Self> {
        let d = space.total_dim();
        if amplitudes.len() != d {
            return Err(Error::InvalidInput("amplitude count mismatch".into()));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if norm <= 0.0 {
            return Err(Error::InvalidInput("zero state vector".into()));
        }
        let mut mat = CMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                mat[(i, j)] = amplitudes[i] * amplitudes[j].conj() / norm;
            }
        }
        Self::new(space, mat)
    }

    pub fn basis_state(space: HilbertSpace, index: usize) -> Result<Self> {
        let d = space.total_dim();
        let mut amps = vec![Complex64::ZERO; d];
        amps[index] = Complex64::ONE;
        Self::pure(space, &amps)
    }

    pub fn maximally_mixed(space: HilbertSpace) -> Self {
        let d = space.total_dim();
        let mat = CMatrix::identity(d, d) / Complex64::new(d as f64, 0.0);
        Self {
            op: Operator { space, mat },
        }
    }

    pub fn diagonal(space: HilbertSpace, probs: &[f64]) -> Result<Self> {
        let d = space.total_dim();
        if probs.len() != d {
            return Err(Error::InvalidInput("probability count mismatch".into()));
        }
        let mut mat = CMatrix::zeros(d, d);
        for (i, &p) in probs.iter().enumerate() {
            mat[(i, i)] = Complex64::new(p, 0.0);
        }
        Self::new(space, mat)
    }

    pub fn space(&self) -> &HilbertSpace {
        self.op.space()
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    pub fn as_operator(&self) -> &Operator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Spectrum (ascending) with tiny negative values clamped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.op.mat.clone());
        let mut ev: Vec<f64> = eig.eigenvalues.iter().map(|&x| x.max(0.0)).collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// ⟨A⟩ = tr{A ρ}.
    pub fn expectation(&self, a: &Operator) -> Result<Complex64> {
        if a.space() != self.space() {
            return Err(Error::InvalidInput("expectation space mismatch".into()));
        }
        Ok((a.matrix() * self.matrix()).trace())
    }

    /// U ρ U†.
    pub fn conjugate(&self, u: &Operator) -> Result<Self> {
        if u.space() != self.space() {
            return Err(Error::InvalidInput("conjugation space mismatch".into()));
        }
        let mat = u.matrix() * self.matrix() * u.matrix().adjoint();
        Self::new(self.space().clone(), mat)
    }

    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let op = tensor_product(&self.op, &other.op)?;
        Self::from_operator(op)
    }
}

/// Trace distance (1/2)‖ρ − σ‖₁.
pub fn trace_distance(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.space() != sigma.space() {
        return Err(Error::InvalidInput("trace distance space mismatch".into()));
    }
    let diff = rho.matrix() - sigma.matrix();
    let eig = SymmetricEigen::new(diff);
    Ok(0.5 * eig.eigenvalues.iter().map(|x| x.abs()).sum::<f64>())
}

/// Partial trace keeping the listed subsystems (in their original order).
pub fn partial_trace(rho: &DensityMatrix, keep: &[&str]) -> Result<DensityMatrix> {
    let mat = partial_trace_matrix(rho.matrix(), rho.space(), keep)?;
    DensityMatrix::new(rho.space().subspace(keep)?, mat)
}

/// Partial trace of an arbitrary matrix over all subsystems not listed.
pub fn partial_trace_matrix(
    mat: &CMatrix,
    space: &HilbertSpace,
    keep: &[&str],
) -> Result<CMatrix> {
    let n = space.dims().len();
    let mut keep_mask = vec![false; n];
    for label in keep {
        keep_mask[space.index_of(label)?] = true;
    }
    let kept_dims: Vec<usize> = (0..n).filter(|&i| keep_mask[i]).map(|i| space.dims()[i]).collect();
    let traced_dims: Vec<usize> = (0..n).filter(|&i| !keep_mask[i]).map(|i| space.dims()[i]).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced_dims.iter().product();

    // Row-major strides over the full composite index.
    let mut strides = vec![1usize; n];
    for i in (0..n - 1).rev() {
        strides[i] = strides[i + 1] * space.dims()[i + 1];
    }
    let kept_idx: Vec<usize> = (0..n).filter(|&i| keep_mask[i]).collect();
    let traced_idx: Vec<usize> = (0..n).filter(|&i| !keep_mask[i]).collect();

    let flatten = |multi_k: usize, multi_t: usize| -> usize {
        let mut idx = 0;
        let mut rk = multi_k;
        for (pos, &sub) in kept_idx.iter().enumerate().rev() {
            let dim = space.dims()[sub];
            idx += (rk % dim) * strides[sub];
            rk /= dim;
            let _ = pos;
        }
        let mut rt = multi_t;
        for &sub in traced_idx.iter().rev() {
            let dim = space.dims()[sub];
            idx += (rt % dim) * strides[sub];
            rt /= dim;
        }
        idx
    };

    let mut out = CMatrix::zeros(dk, dk);
    for a in 0..dk {
        for b in 0..dk {
            let mut acc = Complex64::ZERO;
            for t in 0..dt {
                acc += mat[(flatten(a, t), flatten(b, t))];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// Von Neumann entropy −tr{ρ ln ρ} in nats, with 0 ln 0 ≡ 0.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let s: f64 = rho
        .eigenvalues()
        .iter()
        .filter(|&&p| p > ENTROPY_CUTOFF)
        .map(|&p| -p * p.ln())
        .sum();
    s.max(0.0)
}

/// Entropy of an eigenvalue list (shared by matrix and classical paths).
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > ENTROPY_CUTOFF)
        .map(|&p| -p * p.ln())
        .sum()
}

/// Matrix logarithm of a positive operator restricted to its support;
/// off-support directions get `fill` on the diagonal of the log-spectrum.
fn log_on_support(mat: &CMatrix, fill: f64) -> CMatrix {
    let eig = SymmetricEigen::new(mat.clone());
    let d = mat.nrows();
    let mut diag = CMatrix::zeros(d, d);
    for i in 0..d {
        let p = eig.eigenvalues[i];
        diag[(i, i)] = Complex64::new(if p > SUPPORT_CUTOFF { p.ln() } else { fill }, 0.0);
    }
    &eig.eigenvectors * diag * eig.eigenvectors.adjoint()
}

/// ln ρ on the support of ρ (zero elsewhere).
pub fn matrix_log(rho: &DensityMatrix) -> CMatrix {
    log_on_support(rho.matrix(), 0.0)
}

/// Relative entropy D(ρ‖σ) = tr{ρ(ln ρ − ln σ)}.
///
/// Returns `f64::INFINITY` when the support of ρ is not contained in the
/// support of σ (support defined by the eigenvalue cutoff).
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.space().total_dim() != sigma.space().total_dim() {
        return Err(Error::InvalidInput("relative entropy dimension mismatch".into()));
    }
    let eig_s = SymmetricEigen::new(sigma.matrix().clone());
    let d = rho.dim();
    // Support check: ⟨v|ρ|v⟩ must vanish for every null eigenvector v of σ.
    for i in 0..d {
        if eig_s.eigenvalues[i] <= SUPPORT_CUTOFF {
            let v = eig_s.eigenvectors.column(i);
            let overlap = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
            if overlap > SUPPORT_CUTOFF {
                return Ok(f64::INFINITY);
            }
        }
    }
    let log_rho = matrix_log(rho);
    let log_sigma = log_on_support(sigma.matrix(), 0.0);
    // On-support contributions only: ρ annihilates the off-support block.
    let val = (rho.matrix() * (log_rho - log_sigma)).trace().re;
    Ok(val.max(0.0))
}

/// Mutual information across a bipartite cut given by the labels of one
/// side. Computed as S_A + S_B − S_AB.
pub fn mutual_information(rho: &DensityMatrix, side_a: &[&str]) -> Result<f64> {
    let all = rho.space().labels();
    let side_b: Vec<&str> = all
        .iter()
        .map(|s| s.as_str())
        .filter(|l| !side_a.contains(l))
        .collect();
    if side_a.is_empty() || side_b.is_empty() {
        return Err(Error::InvalidInput("mutual information needs a proper bipartition".into()));
    }
    let rho_a = partial_trace(rho, side_a)?;
    let rho_b = partial_trace(rho, &side_b)?;
    let mi = von_neumann_entropy(&rho_a) + von_neumann_entropy(&rho_b) - von_neumann_entropy(rho);
    Ok(mi)
}

/// Gibbs state e^{−βH}/Z. Negative β (population inversion) is allowed.
/// The extremal eigenvalue is subtracted before exponentiation to guard
/// against overflow.
pub fn gibbs_state(h: &Operator, beta: f64) -> Result<DensityMatrix> {
    if !beta.is_finite() {
        return Err(Error::InvalidInput("beta must be finite".into()));
    }
    if !h.is_hermitian(1e-10) {
        return Err(Error::InvalidInput("Hamiltonian must be Hermitian".into()));
    }
    let eig = SymmetricEigen::new(h.matrix().clone());
    let d = h.dim();
    let shift = if beta >= 0.0 {
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    };
    let weights: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&e| (-beta * (e - shift)).exp())
        .collect();
    let z: f64 = weights.iter().sum();
    let mut diag = CMatrix::zeros(d, d);
    for i in 0..d {
        diag[(i, i)] = Complex64::new(weights[i] / z, 0.0);
    }
    let mat = &eig.eigenvectors * diag * eig.eigenvectors.adjoint();
    DensityMatrix::new(h.space().clone(), mat)
}

/// Log partition function ln tr e^{−βH} (shift-stabilized).
pub fn log_partition_function(h: &Operator, beta: f64) -> f64 {
    let eig = SymmetricEigen::new(h.matrix().clone());
    let shift = if beta >= 0.0 {
        eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
    } else {
        eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    };
    let z: f64 = eig.eigenvalues.iter().map(|&e| (-beta * (e - shift)).exp()).sum();
    z.ln() - beta * shift
}

/// Nonequilibrium free energy F = E − T S with respect to temperature T.
pub fn noneq_free_energy(rho: &DensityMatrix, h: &Operator, temperature: f64) -> Result<f64> {
    if temperature <= 0.0 {
        return Err(Error::InvalidInput("temperature must be positive".into()));
    }
    let e = rho.expectation(h)?.re;
    Ok(e - temperature * von_neumann_entropy(rho))
}

/// U = e^{−iHt} via eigendecomposition of the Hermitian H.
pub fn unitary_from(h: &Operator, t: f64) -> Result<Operator> {
    if !h.is_hermitian(1e-10) {
        return Err(Error::InvalidInput("generator must be Hermitian".into()));
    }
    let eig = SymmetricEigen::new(h.matrix().clone());
    let d = h.dim();
    let mut diag = CMatrix::zeros(d, d);
    for i in 0..d {
        diag[(i, i)] = Complex64::new(0.0, -eig.eigenvalues[i] * t).exp();
    }
    let mat = &eig.eigenvectors * diag * eig.eigenvectors.adjoint();
    Operator::new(h.space().clone(), mat)
}

/// Deterministic random density matrix of exact rank
/// (G G†/tr with G a rank-limited complex Gaussian matrix).
pub fn sample_state(seed: u64, space: &HilbertSpace, rank: usize) -> Result<DensityMatrix> {
    let dim = space.total_dim();
    if rank == 0 || rank > dim {
        return Err(Error::InvalidInput(format!(
            "rank {rank} out of range for dimension {dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = CMatrix::zeros(dim, rank);
    for i in 0..dim {
        for j in 0..rank {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            g[(i, j)] = Complex64::new(re, im);
        }
    }
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(space.clone(), m / Complex64::new(tr, 0.0))
}

/// Deterministic random Hermitian operator (GUE-style).
pub fn sample_hermitian(seed: u64, space: &HilbertSpace, scale: f64) -> Operator {
    let dim = space.total_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            g[(i, j)] = Complex64::new(re, im);
        }
    }
    let h = (&g + g.adjoint()) * Complex64::new(0.5 * scale, 0.0);
    Operator {
        space: space.clone(),
        mat: h,
    }
}

/// Dephase a state in the eigenbasis of H (degenerate eigenvalues are
/// grouped by a deterministic ascending ordering and the state is block-
/// dephased between distinct eigenvalues only).
pub fn dephase_in_energy_basis(rho: &DensityMatrix, h: &Operator) -> Result<DensityMatrix> {
    if rho.space().total_dim() != h.space().total_dim() {
        return Err(Error::InvalidInput("dephasing dimension mismatch".into()));
    }
    let eig = SymmetricEigen::new(h.matrix().clone());
    let d = rho.dim();
    let v = &eig.eigenvectors;
    let rho_e = v.adjoint() * rho.matrix() * v;
    let mut out = CMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            if (eig.eigenvalues[i] - eig.eigenvalues[j]).abs() < 1e-10 {
                out[(i, j)] = rho_e[(i, j)];
            }
        }
    }
    let mat = v * out * v.adjoint();
    DensityMatrix::new(rho.space().clone(), mat)
}

/// Common single-qubit operators.
pub mod qubit {
    use super::*;

    pub fn sigma_x(space: &HilbertSpace) -> Operator {
        Operator::from_real(space.clone(), &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    pub fn sigma_y(space: &HilbertSpace) -> Operator {
        let mat = CMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::ZERO,
                Complex64::new(0.0, -1.0),
                Complex64::new(0.0, 1.0),
                Complex64::ZERO,
            ],
        );
        Operator::new(space.clone(), mat).unwrap()
    }

    pub fn sigma_z(space: &HilbertSpace) -> Operator {
        Operator::from_real(space.clone(), &[1.0, 0.0, 0.0, -1.0]).unwrap()
    }

    /// σ⁻ = |0⟩⟨1| (lowering, with |0⟩ the ground state).
    pub fn sigma_minus(space: &HilbertSpace) -> Operator {
        Operator::from_real(space.clone(), &[0.0, 1.0, 0.0, 0.0]).unwrap()
    }

    pub fn sigma_plus(space: &HilbertSpace) -> Operator {
        Operator::from_real(space.clone(), &[0.0, 0.0, 1.0, 0.0]).unwrap()
    }
}

/// Bosonic ladder operators on a truncated Fock space.
pub mod fock {
    use super::*;

    pub fn annihilation(space: &HilbertSpace) -> Operator {
        let d = space.total_dim();
        let mut mat = CMatrix::zeros(d, d);
        for n in 1..d {
            mat[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        Operator::new(space.clone(), mat).unwrap()
    }

    pub fn creation(space: &HilbertSpace) -> Operator {
        annihilation(space).adjoint()
    }

    pub fn number(space: &HilbertSpace) -> Operator {
        let d = space.total_dim();
        let mut mat = CMatrix::zeros(d, d);
        for n in 0..d {
            mat[(n, n)] = Complex64::new(n as f64, 0.0);
        }
        Operator::new(space.clone(), mat).unwrap()
    }
}
