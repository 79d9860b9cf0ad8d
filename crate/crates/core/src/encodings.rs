//! Purified access oracles and the projected unitary encodings built from
//! them.
//!
//! Unitaries are kept in structured form ([`Operator`]) so that the
//! three-register constructions can be applied to vectors without ever
//! materializing an `n³ × n³` matrix. Multi-register indices are row-major:
//! for registers of dimensions `(d₀, d₁, d₂)` the basis state `|i,j,k⟩` has
//! index `(i·d₁ + j)·d₂ + k`.

use nalgebra::{DMatrix, DVector};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::dist::{DensityMatrix, Distribution, C64, EIG_FLOOR};
use crate::error::{out_of_range, Error, Result};

/// Largest dimension for which unitarity is checked on the full matrix.
pub const DENSE_CHECK_CAP: usize = 512;
/// Largest register dimension for the explicit circuit constructions.
pub const CIRCUIT_REGISTER_CAP: usize = 64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

fn basis(dim: usize, i: usize) -> DVector<C64> {
    let mut v = DVector::from_element(dim, ZERO);
    v[i] = ONE;
    v
}

/// Structured unitary.
#[derive(Clone, Debug)]
pub enum Operator {
    Identity(usize),
    Dense(DMatrix<C64>),
    /// `H·D`, where `D` multiplies `|0⟩` by `phase` and `H = I − 2uu†/u†u` is
    /// a Householder reflection (`H = I` when `u = 0`). Maps `|0⟩` to a
    /// chosen unit vector.
    Preparation { phase: C64, u: DVector<C64> },
    /// Permutation of basis states: `|i⟩ ↦ |map[i]⟩`.
    BasisMap(Vec<usize>),
    /// Register permutation: output register `j` holds input register `perm[j]`.
    Permute { dims: Vec<usize>, perm: Vec<usize> },
    Kron(Box<Operator>, Box<Operator>),
    /// Applied first to last: `ops[k−1] ⋯ ops[0]`.
    Product(Vec<Operator>),
    Adjoint(Box<Operator>),
}

impl Operator {
    /// Unitary whose first column is `psi` (normalized).
    pub fn preparation(psi: &DVector<C64>) -> Result<Operator> {
        let norm = psi.norm();
        if !(norm > 0.0) {
            return Err(out_of_range("cannot prepare the zero vector"));
        }
        let psi = psi / C64::new(norm, 0.0);
        let phase = if psi[0].norm() > 0.0 { psi[0] / psi[0].norm() } else { ONE };
        let mut u = -psi;
        u[0] += phase;
        if u.norm() < 1e-15 {
            u.fill(ZERO);
        }
        Ok(Operator::Preparation { phase, u })
    }

    pub fn dim(&self) -> usize {
        match self {
            Operator::Identity(d) => *d,
            Operator::Dense(m) => m.nrows(),
            Operator::Preparation { u, .. } => u.len(),
            Operator::BasisMap(m) => m.len(),
            Operator::Permute { dims, .. } => dims.iter().product(),
            Operator::Kron(a, b) => a.dim() * b.dim(),
            Operator::Product(ops) => ops.first().map_or(0, |o| o.dim()),
            Operator::Adjoint(a) => a.dim(),
        }
    }

    pub fn adjoint(self) -> Operator {
        match self {
            Operator::Adjoint(a) => *a,
            other => Operator::Adjoint(Box::new(other)),
        }
    }

    pub fn apply(&self, v: &DVector<C64>) -> DVector<C64> {
        self.apply_inner(v, false)
    }

    pub fn apply_adjoint(&self, v: &DVector<C64>) -> DVector<C64> {
        self.apply_inner(v, true)
    }

    fn apply_inner(&self, v: &DVector<C64>, dagger: bool) -> DVector<C64> {
        assert_eq!(v.len(), self.dim(), "operator/vector dimension mismatch");
        match self {
            Operator::Identity(_) => v.clone(),
            Operator::Dense(m) => {
                if dagger {
                    m.adjoint() * v
                } else {
                    m * v
                }
            }
            Operator::Preparation { phase, u } => {
                let reflect = |w: &mut DVector<C64>| {
                    let uu = u.norm_squared();
                    if uu > 0.0 {
                        let coef = u.dotc(w) * C64::new(2.0 / uu, 0.0);
                        w.axpy(-coef, u, ONE);
                    }
                };
                let mut w = v.clone();
                if dagger {
                    reflect(&mut w);
                    w[0] *= phase.conj();
                } else {
                    w[0] *= phase;
                    reflect(&mut w);
                }
                w
            }
            Operator::BasisMap(map) => {
                let mut w = DVector::from_element(v.len(), ZERO);
                for (i, &j) in map.iter().enumerate() {
                    if dagger {
                        w[i] = v[j];
                    } else {
                        w[j] = v[i];
                    }
                }
                w
            }
            Operator::Permute { dims, perm } => permute_registers(v, dims, perm, dagger),
            Operator::Kron(a, b) => {
                let (da, db) = (a.dim(), b.dim());
                let mut w = v.clone();
                if !matches!(**b, Operator::Identity(_)) {
                    for i in 0..da {
                        let slice = &w.as_slice()[i * db..(i + 1) * db];
                        if slice.iter().all(|z| *z == ZERO) {
                            continue;
                        }
                        let seg = DVector::from_column_slice(slice);
                        let out = b.apply_inner(&seg, dagger);
                        w.as_mut_slice()[i * db..(i + 1) * db].copy_from_slice(out.as_slice());
                    }
                }
                if !matches!(**a, Operator::Identity(_)) {
                    for j in 0..db {
                        if (0..da).all(|i| w[i * db + j] == ZERO) {
                            continue;
                        }
                        let seg = DVector::from_iterator(da, (0..da).map(|i| w[i * db + j]));
                        let out = a.apply_inner(&seg, dagger);
                        for i in 0..da {
                            w[i * db + j] = out[i];
                        }
                    }
                }
                w
            }
            Operator::Product(ops) => {
                let mut w = v.clone();
                if dagger {
                    for op in ops.iter().rev() {
                        w = op.apply_inner(&w, true);
                    }
                } else {
                    for op in ops {
                        w = op.apply_inner(&w, false);
                    }
                }
                w
            }
            Operator::Adjoint(a) => a.apply_inner(v, !dagger),
        }
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let d = self.dim();
        let mut m = DMatrix::from_element(d, d, ZERO);
        for j in 0..d {
            m.set_column(j, &self.apply(&basis(d, j)));
        }
        m
    }

    /// `max |(U†U − I)_{ij}|`, on the full matrix up to [`DENSE_CHECK_CAP`]
    /// and on a fixed set of probe columns beyond.
    pub fn unitarity_residual(&self) -> f64 {
        let d = self.dim();
        if d <= DENSE_CHECK_CAP {
            let m = self.to_dense();
            let r = m.adjoint() * &m - DMatrix::identity(d, d);
            return r.iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
        let mut worst: f64 = 0.0;
        let probes = [0, 1, d / 3, d / 2, d - 1];
        for &j in &probes {
            let e = basis(d, j);
            let r = self.apply_adjoint(&self.apply(&e)) - e;
            worst = worst.max(r.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        // A spread-out probe with distinct phases.
        let v = DVector::from_iterator(d, (0..d).map(|k| C64::from_polar(1.0 / (d as f64).sqrt(), 0.37 * k as f64)));
        let r = self.apply_adjoint(&self.apply(&v)) - &v;
        worst.max(r.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }
}

fn permute_registers(v: &DVector<C64>, dims: &[usize], perm: &[usize], dagger: bool) -> DVector<C64> {
    let k = dims.len();
    let out_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let mut w = DVector::from_element(v.len(), ZERO);
    let mut digits = vec![0usize; k];
    for idx in 0..v.len() {
        let mut r = idx;
        for j in (0..k).rev() {
            digits[j] = r % dims[j];
            r /= dims[j];
        }
        let out = perm.iter().zip(&out_dims).fold(0usize, |acc, (&p, &d)| acc * d + digits[p]);
        if dagger {
            // Input indexed by the permuted layout.
            w[idx] = v[out];
        } else {
            w[out] = v[idx];
        }
    }
    w
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Classical,
    Quantum,
}

/// Unitary on two registers whose `|0,0⟩` column is a purification of the
/// target: `Σ√p_i|ψ_i⟩|i⟩` (classical; first register is traced out) or
/// `Σ√p_i|ψ_i⟩|i⟩` with `ψ_i` the eigenvectors of ρ (quantum; second
/// register is traced out).
#[derive(Clone, Debug)]
pub struct PurifiedOracle {
    pub unitary: Operator,
    pub register_dims: [usize; 2],
    /// Index (0 or 1) of the register traced out to recover the target.
    pub ancilla_register: usize,
    pub kind: OracleKind,
}

impl PurifiedOracle {
    pub fn prepared_state(&self) -> DVector<C64> {
        self.unitary.apply(&basis(self.unitary.dim(), 0))
    }

    /// The prepared state as a `d₀ × d₁` amplitude matrix.
    pub fn amplitude_matrix(&self) -> DMatrix<C64> {
        let [d0, d1] = self.register_dims;
        let s = self.prepared_state();
        DMatrix::from_fn(d0, d1, |i, j| s[i * d1 + j])
    }

    /// Partial trace of the prepared state over the ancilla register.
    pub fn reduced_state(&self) -> DMatrix<C64> {
        let psi = self.amplitude_matrix();
        if self.ancilla_register == 0 {
            // ρ[k,k'] = Σ_x ψ[x,k]·conj(ψ[x,k'])
            psi.transpose() * psi.map(|z| z.conj())
        } else {
            &psi * psi.adjoint()
        }
    }

    /// Diagonal of the reduced state.
    pub fn induced_distribution(&self) -> Result<Distribution> {
        let r = self.reduced_state();
        Distribution::normalized((0..r.nrows()).map(|i| r[(i, i)].re.max(0.0)).collect())
    }

    pub fn unitarity_residual(&self) -> f64 {
        self.unitary.unitarity_residual()
    }

    /// Label-register dimension `n`.
    pub fn n(&self) -> usize {
        match self.kind {
            OracleKind::Classical => self.register_dims[1],
            OracleKind::Quantum => self.register_dims[0],
        }
    }
}

/// Classical oracle with `|ψ_i⟩ = |i⟩`.
pub fn build_purified_oracle_classical(p: &Distribution) -> Result<PurifiedOracle> {
    let n = p.n();
    let mut psi = DVector::from_element(n * n, ZERO);
    for (i, &pi) in p.probs().iter().enumerate() {
        psi[i * n + i] = C64::new(pi.sqrt(), 0.0);
    }
    Ok(PurifiedOracle {
        unitary: Operator::preparation(&psi)?,
        register_dims: [n, n],
        ancilla_register: 0,
        kind: OracleKind::Classical,
    })
}

/// Quantum oracle preparing `Σ√p_i|ψ_i⟩|i⟩` from an eigendecomposition of ρ.
/// Eigenvalues under the floor are dropped, as in [`DensityMatrix::spectrum`].
pub fn build_purified_oracle_quantum(rho: &DensityMatrix) -> Result<PurifiedOracle> {
    let n = rho.n();
    let (vals, vecs) = rho.eigen();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    let mut psi = DVector::from_element(n * n, ZERO);
    for (i, &v) in vals.iter().enumerate() {
        let s = if v < EIG_FLOOR { 0.0 } else { v.sqrt() };
        for x in 0..n {
            psi[x * n + i] = vecs[(x, i)] * s;
        }
    }
    Ok(PurifiedOracle {
        unitary: Operator::preparation(&psi)?,
        register_dims: [n, n],
        ancilla_register: 1,
        kind: OracleKind::Quantum,
    })
}

/// A string `v ∈ [n]^m`; label `i` has probability `|{j : v_j = i}|/m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyVector {
    pub entries: Vec<usize>,
    pub n: usize,
}

impl FrequencyVector {
    pub fn new(entries: Vec<usize>, n: usize) -> Result<Self> {
        if entries.is_empty() {
            return Err(out_of_range("empty frequency vector"));
        }
        if let Some(&label) = entries.iter().find(|&&e| e >= n) {
            return Err(Error::LabelOutOfRange { label, n });
        }
        Ok(FrequencyVector { entries, n })
    }

    pub fn m(&self) -> usize {
        self.entries.len()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n];
        self.entries.iter().for_each(|&e| c[e] += 1);
        c
    }
}

/// One query to `O_v: |j⟩|k⟩ ↦ |j⟩|k + v_j mod n⟩` after a uniform
/// superposition over positions gives `Σ_i √(c_i/m)|ψ_i⟩|i⟩`, with `|ψ_i⟩`
/// uniform over the positions holding label `i`.
pub fn purified_from_frequency_vector(v: &FrequencyVector) -> Result<PurifiedOracle> {
    let (m, n) = (v.m(), v.n);
    let uniform = DVector::from_element(m, C64::new(1.0 / (m as f64).sqrt(), 0.0));
    let spread = Operator::Kron(Box::new(Operator::preparation(&uniform)?), Box::new(Operator::Identity(n)));
    let map = (0..m * n).map(|idx| {
        let (j, k) = (idx / n, idx % n);
        j * n + (k + v.entries[j]) % n
    });
    Ok(PurifiedOracle {
        unitary: Operator::Product(vec![spread, Operator::BasisMap(map.collect())]),
        register_dims: [m, n],
        ancilla_register: 0,
        kind: OracleKind::Classical,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingKind {
    Classical,
    Quantum,
    DensityBlock,
    Transformed,
}

/// One singular value of the encoded block (as stored, i.e. already
/// divided by α), the weight the designated input state puts on its right
/// singular vector, and that vector when the encoding is explicit.
#[derive(Clone, Debug)]
pub struct SingularComponent {
    pub sigma: f64,
    pub weight: f64,
    pub right: Option<DVector<C64>>,
}

#[derive(Clone, Debug)]
pub enum EncodingBody {
    /// `Π U Π̃` with `Π`, `Π̃` given as lists of basis indices; `input` is a
    /// density matrix on the `Π̃` subspace.
    Circuit { unitary: Operator, dims: Vec<usize>, left: Vec<usize>, right: Vec<usize>, input: DMatrix<C64> },
    /// The spectrum and input weights only, for sizes beyond the circuit cap.
    Spectral { singular_values: Vec<f64>, weights: Vec<f64> },
    /// Output of a singular value transformation: same right singular
    /// vectors, transformed values.
    Transformed { components: Vec<SingularComponent> },
}

#[derive(Clone, Debug)]
pub struct ProjectedUnitaryEncoding {
    body: EncodingBody,
    pub alpha: f64,
    pub ancilla_count: usize,
    pub delta_enc: f64,
    pub kind: EncodingKind,
    components: OnceLock<Vec<SingularComponent>>,
}

fn qubits(d: usize) -> usize {
    (usize::BITS - (d.max(1) - 1).leading_zeros()) as usize
}

impl ProjectedUnitaryEncoding {
    pub fn new(body: EncodingBody, alpha: f64, ancilla_count: usize, kind: EncodingKind) -> Self {
        ProjectedUnitaryEncoding { body, alpha, ancilla_count, delta_enc: 0.0, kind, components: OnceLock::new() }
    }

    pub fn body(&self) -> &EncodingBody {
        &self.body
    }

    /// Mutable access for building deliberately broken encodings.
    pub fn body_mut(&mut self) -> &mut EncodingBody {
        self.components = OnceLock::new();
        &mut self.body
    }

    /// The projected block `Π U Π̃` as a `|left| × |right|` matrix. For
    /// transformed and spectral encodings this is the matrix function on
    /// the right space (`Σ σ_j |v_j⟩⟨v_j|`, diagonal for spectral).
    pub fn block(&self) -> DMatrix<C64> {
        match &self.body {
            EncodingBody::Circuit { unitary, left, right, .. } => {
                let d = unitary.dim();
                let mut b = DMatrix::from_element(left.len(), right.len(), ZERO);
                for (c, &r) in right.iter().enumerate() {
                    let col = unitary.apply(&basis(d, r));
                    for (row, &l) in left.iter().enumerate() {
                        b[(row, c)] = col[l];
                    }
                }
                b
            }
            EncodingBody::Spectral { singular_values, .. } => {
                DMatrix::from_diagonal(&DVector::from_iterator(singular_values.len(), singular_values.iter().map(|&s| C64::new(s, 0.0))))
            }
            EncodingBody::Transformed { components } => {
                let d = components.first().and_then(|c| c.right.as_ref()).map_or(components.len(), |v| v.len());
                let mut b = DMatrix::from_element(d, d, ZERO);
                for (j, c) in components.iter().enumerate() {
                    match &c.right {
                        Some(v) => b += v * v.adjoint() * C64::new(c.sigma, 0.0),
                        None => b[(j, j)] = C64::new(c.sigma, 0.0),
                    }
                }
                b
            }
        }
    }

    /// Singular components in a fixed order (descending σ for explicit
    /// circuits, label order for spectral encodings). Computed once.
    pub fn components(&self) -> &[SingularComponent] {
        self.components.get_or_init(|| self.compute_components())
    }

    fn compute_components(&self) -> Vec<SingularComponent> {
        match &self.body {
            EncodingBody::Circuit { input, .. } => {
                let full = self.block();
                // Same singular values and right vectors as the tall block.
                let b = if full.nrows() > full.ncols() { full.qr().r() } else { full };
                let (l, ncols) = b.shape();
                // Eigenpairs of [[0, B], [B†, 0]] are ±σ with (u; ±v)/√2.
                // nalgebra's complex SVD can lose accuracy on sparse
                // rank-deficient blocks; the Hermitian eigensolver does not.
                let mut h = DMatrix::from_element(l + ncols, l + ncols, ZERO);
                h.view_mut((0, l), (l, ncols)).copy_from(&b);
                h.view_mut((l, 0), (ncols, l)).copy_from(&b.adjoint());
                let eig = h.symmetric_eigen();
                let tol = 1e-14 * b.norm().max(1.0);
                let mut order: Vec<usize> = (0..l + ncols).filter(|&j| eig.eigenvalues[j] > tol).collect();
                order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
                let mut out: Vec<SingularComponent> = order
                    .iter()
                    .map(|&j| {
                        let mut v: DVector<C64> = eig.eigenvectors.view((l, j), (ncols, 1)).column(0).into_owned();
                        let nv = v.norm();
                        v /= C64::new(nv, 0.0);
                        let weight = (v.adjoint() * input * &v)[(0, 0)].re;
                        SingularComponent { sigma: eig.eigenvalues[j], weight, right: Some(v) }
                    })
                    .collect();
                let k = out.len();
                // Right space wider than the block rank: complete with the
                // null space so the weights cover the whole input.
                if k < ncols {
                    let mut basis_vecs: Vec<DVector<C64>> = out.iter().filter_map(|c| c.right.clone()).collect();
                    for e in 0..ncols {
                        let mut v = basis(ncols, e);
                        for u in &basis_vecs {
                            let proj = u.dotc(&v);
                            v.axpy(-proj, u, ONE);
                        }
                        let nv = v.norm();
                        if nv > 1e-8 {
                            v /= C64::new(nv, 0.0);
                            let weight = (v.adjoint() * input * &v)[(0, 0)].re;
                            basis_vecs.push(v.clone());
                            out.push(SingularComponent { sigma: 0.0, weight, right: Some(v) });
                        }
                        if basis_vecs.len() == ncols {
                            break;
                        }
                    }
                }
                out
            }
            EncodingBody::Spectral { singular_values, weights } => singular_values
                .iter()
                .zip(weights)
                .map(|(&sigma, &weight)| SingularComponent { sigma, weight, right: None })
                .collect(),
            EncodingBody::Transformed { components } => components.clone(),
        }
    }

    pub fn singular_values(&self) -> Vec<f64> {
        self.components().iter().map(|c| c.sigma).collect()
    }

    pub fn unitarity_residual(&self) -> f64 {
        match &self.body {
            EncodingBody::Circuit { unitary, .. } => unitary.unitarity_residual(),
            _ => 0.0,
        }
    }

    /// Label-space dimension.
    pub fn n(&self) -> usize {
        match &self.body {
            EncodingBody::Circuit { right, .. } => right.len(),
            EncodingBody::Spectral { singular_values, .. } => singular_values.len(),
            EncodingBody::Transformed { components } => components.len(),
        }
    }

    pub fn is_explicit(&self) -> bool {
        !matches!(self.body, EncodingBody::Spectral { .. })
    }
}

fn check_register_cap(d: usize) -> Result<()> {
    if d > CIRCUIT_REGISTER_CAP {
        Err(Error::DimensionCap { dim: d, cap: CIRCUIT_REGISTER_CAP })
    } else {
        Ok(())
    }
}

/// Registers `(ψ, label, copy)`, `W = U ⊗ I`, `Π = Σ_i I⊗|i⟩⟨i|⊗|i⟩⟨i|`,
/// `Π̃ = |0⟩⟨0|⊗|0⟩⟨0|⊗I`. The block is `Σ√p_i |ψ_i,i,i⟩⟨0,0,i|`, α = 1.
pub fn projected_encoding_classical(oracle: &PurifiedOracle) -> Result<ProjectedUnitaryEncoding> {
    if oracle.kind != OracleKind::Classical {
        return Err(Error::WrongKind("classical"));
    }
    let [d0, n] = oracle.register_dims;
    check_register_cap(d0.max(n))?;
    let unitary = Operator::Kron(Box::new(oracle.unitary.clone()), Box::new(Operator::Identity(n)));
    let left = (0..d0).flat_map(|x| (0..n).map(move |i| (x * n + i) * n + i)).collect();
    let right = (0..n).collect();
    Ok(ProjectedUnitaryEncoding::new(
        EncodingBody::Circuit { unitary, dims: vec![d0, n, n], left, right, input: oracle.reduced_state() },
        1.0,
        qubits(d0) + qubits(n),
        EncodingKind::Classical
    ))
}

/// Registers `(R₁, system, ancilla)`, `U′ = (I ⊗ U_ρ†)(W ⊗ I)` with `W`
/// preparing `Σ_j|j,j⟩/√n`, `Π = I⊗|0⟩⟨0|⊗|0⟩⟨0|`, `Π̃ = |0⟩⟨0|⊗|0⟩⟨0|⊗I`.
/// The block has singular values `√(p_j/n)`, so α = √n.
pub fn projected_encoding_quantum(oracle: &PurifiedOracle) -> Result<ProjectedUnitaryEncoding> {
    if oracle.kind != OracleKind::Quantum {
        return Err(Error::WrongKind("quantum"));
    }
    let n = oracle.register_dims[0];
    check_register_cap(n)?;
    let mut omega = DVector::from_element(n * n, ZERO);
    for j in 0..n {
        omega[j * n + j] = C64::new(1.0 / (n as f64).sqrt(), 0.0);
    }
    let w = Operator::preparation(&omega)?;
    let unitary = Operator::Product(vec![
        Operator::Kron(Box::new(w), Box::new(Operator::Identity(n))),
        Operator::Kron(Box::new(Operator::Identity(n)), Box::new(oracle.unitary.clone().adjoint())),
    ]);
    let left = (0..n).map(|x| x * n * n).collect();
    let right = (0..n).collect();
    Ok(ProjectedUnitaryEncoding::new(
        EncodingBody::Circuit { unitary, dims: vec![n, n, n], left, right, input: oracle.reduced_state_ancilla() },
        (n as f64).sqrt(),
        2 * qubits(n),
        EncodingKind::Quantum
    ))
}

impl PurifiedOracle {
    /// Partial trace over the system register, i.e. the state of the
    /// purifying register: `ρ_anc[k,k'] = Σ_x ψ[x,k]·conj(ψ[x,k'])`.
    fn reduced_state_ancilla(&self) -> DMatrix<C64> {
        let psi = self.amplitude_matrix();
        psi.transpose() * psi.map(|z| z.conj())
    }
}

/// `U = (U_ρ† ⊗ I)(SWAP_{system, copy})(U_ρ ⊗ I)` on `(system, ancilla,
/// copy)`. Projecting the first two registers onto `|0,0⟩` on both sides
/// leaves ρ itself.
pub fn block_encoding_density_swap(oracle: &PurifiedOracle) -> Result<ProjectedUnitaryEncoding> {
    if oracle.kind != OracleKind::Quantum {
        return Err(Error::WrongKind("quantum"));
    }
    let n = oracle.register_dims[0];
    check_register_cap(n)?;
    let unitary = Operator::Product(vec![
        Operator::Kron(Box::new(oracle.unitary.clone()), Box::new(Operator::Identity(n))),
        Operator::Permute { dims: vec![n, n, n], perm: vec![2, 1, 0] },
        Operator::Kron(Box::new(oracle.unitary.clone().adjoint()), Box::new(Operator::Identity(n))),
    ]);
    let idx: Vec<usize> = (0..n).collect();
    Ok(ProjectedUnitaryEncoding::new(
        EncodingBody::Circuit { unitary, dims: vec![n, n, n], left: idx.clone(), right: idx, input: oracle.reduced_state() },
        1.0,
        2 * qubits(n),
        EncodingKind::DensityBlock
    ))
}

/// Spectrum-only encoding of a distribution: singular values `√p_i`
/// (classical) or `√(p_i/n)` with α = √n (quantum, `ρ = diag(p)` or any ρ
/// with spectrum `p`), input weights `p_i`.
pub fn projected_encoding_spectral(p: &Distribution, kind: OracleKind) -> ProjectedUnitaryEncoding {
    let n = p.n();
    let (alpha, ek) = match kind {
        OracleKind::Classical => (1.0, EncodingKind::Classical),
        OracleKind::Quantum => ((n as f64).sqrt(), EncodingKind::Quantum),
    };
    let body = EncodingBody::Spectral {
        singular_values: p.probs().iter().map(|&x| x.sqrt() / alpha).collect(),
        weights: p.probs().to_vec(),
    };
    ProjectedUnitaryEncoding::new(body, alpha, 2 * qubits(n), ek)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub max_sv_error: f64,
    pub unitarity_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Compares the sorted singular multiset of the block against `expected`
/// (padded with zeros to equal length) and checks unitarity.
pub fn verify_encoding(enc: &ProjectedUnitaryEncoding, expected_sv: &[f64], tolerance: f64) -> VerificationReport {
    let mut got = enc.singular_values();
    let mut want = expected_sv.to_vec();
    let len = got.len().max(want.len());
    got.resize(len, 0.0);
    want.resize(len, 0.0);
    got.sort_by(|a, b| b.total_cmp(a));
    want.sort_by(|a, b| b.total_cmp(a));
    let max_sv_error = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let unitarity_residual = enc.unitarity_residual();
    VerificationReport {
        max_sv_error,
        unitarity_residual,
        tolerance,
        pass: max_sv_error <= tolerance && unitarity_residual <= tolerance,
    }
}
