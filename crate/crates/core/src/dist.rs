//! Distributions, density matrices, exact entropies and the lower-bound
//! instance families.
//!
//! Labels are zero-based throughout: a distribution over `n` outcomes has
//! labels `0..n`. All entropies are in bits.

use std::f64::consts::{E, LOG2_E};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution as _, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Error, Result};

pub type C64 = Complex64;

/// Tolerance on the unit-sum and trace conditions.
pub const SUM_TOL: f64 = 1e-12;
/// Eigenvalues of a density matrix below this are treated as zero.
pub const EIG_FLOOR: f64 = 1e-12;
/// Largest support the collision family will materialize.
pub const COLLISION_CAP: usize = 1 << 22;

/// Upper-bound slack of the light-set entropy, `max_w w·log₂(1/w)`.
///
/// This is `1/e` nats, i.e. `log₂(e)/e ≈ 0.5307` bits.
pub const LIGHT_SLACK_BITS: f64 = LOG2_E / E;

/// A probability vector over `n` labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DistributionRecord", into = "DistributionRecord")]
pub struct Distribution {
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct DistributionRecord {
    n: usize,
    probs: Vec<f64>,
}

impl TryFrom<DistributionRecord> for Distribution {
    type Error = Error;
    fn try_from(r: DistributionRecord) -> Result<Self> {
        if r.n != r.probs.len() {
            return Err(Error::SizeMismatch(r.n, r.probs.len()));
        }
        Distribution::new(r.probs)
    }
}

impl From<Distribution> for DistributionRecord {
    fn from(d: Distribution) -> Self {
        DistributionRecord { n: d.probs.len(), probs: d.probs }
    }
}

impl Distribution {
    /// Validates nonnegativity and unit sum.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty probability vector".into()));
        }
        if let Some((i, &v)) = probs.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("entry {i} = {v} is not a nonnegative number")));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {s}")));
        }
        Ok(Distribution { probs })
    }

    /// Divides nonnegative weights by their sum.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s.is_finite() && s > 0.0) || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidDistribution("weights must be nonnegative with positive sum".into()));
        }
        Distribution::new(weights.into_iter().map(|w| w / s).collect())
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform distribution needs n > 0");
        Distribution { probs: vec![1.0 / n as f64; n] }
    }

    /// Uniform on the first `k` labels of `[n]`.
    pub fn uniform_on_prefix(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(out_of_range(format!("prefix size {k} not in 1..={n}")));
        }
        let mut probs = vec![0.0; n];
        probs[..k].iter_mut().for_each(|v| *v = 1.0 / k as f64);
        Ok(Distribution { probs })
    }

    pub fn point_mass(n: usize, label: usize) -> Result<Self> {
        if label >= n {
            return Err(Error::LabelOutOfRange { label, n });
        }
        let mut probs = vec![0.0; n];
        probs[label] = 1.0;
        Ok(Distribution { probs })
    }

    /// Symmetric Dirichlet sample, drawn as normalized Gamma variates.
    pub fn dirichlet<R: Rng + ?Sized>(n: usize, concentration: f64, rng: &mut R) -> Result<Self> {
        let g = Gamma::new(concentration, 1.0).map_err(|e| out_of_range(e.to_string()))?;
        loop {
            let w: Vec<f64> = (0..n).map(|_| g.sample(rng)).collect();
            if w.iter().sum::<f64>() > 0.0 {
                return Distribution::normalized(w);
            }
        }
    }

    /// `p_i ∝ (i+1)^{-s}`.
    pub fn zipf(n: usize, s: f64) -> Result<Self> {
        if n == 0 || !s.is_finite() || s < 0.0 {
            return Err(out_of_range("zipf needs n > 0 and s ≥ 0"));
        }
        Distribution::normalized((1..=n).map(|i| (i as f64).powf(-s)).collect())
    }

    pub fn n(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("distribution serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// `-x·log₂x` with `0·log 0 = 0`.
#[inline]
pub fn plogp(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

/// Binary entropy h(x) in bits.
pub fn binary_entropy(x: f64) -> f64 {
    plogp(x) + plogp(1.0 - x)
}

pub fn shannon_entropy(p: &Distribution) -> f64 {
    p.probs.iter().map(|&x| plogp(x)).sum()
}

/// Sorted set of labels.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSet {
    members: Vec<usize>,
}

impl LabelSet {
    pub fn new(mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        LabelSet { members }
    }

    pub fn empty() -> Self {
        LabelSet::default()
    }

    pub fn all(n: usize) -> Self {
        LabelSet { members: (0..n).collect() }
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, label: usize) -> bool {
        self.members.binary_search(&label).is_ok()
    }

    fn check(&self, n: usize) -> Result<()> {
        match self.members.last() {
            Some(&label) if label >= n => Err(Error::LabelOutOfRange { label, n }),
            _ => Ok(()),
        }
    }
}

impl FromIterator<usize> for LabelSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        LabelSet::new(iter.into_iter().collect())
    }
}

pub fn subset_entropy(p: &Distribution, a: &LabelSet) -> Result<f64> {
    a.check(p.n())?;
    Ok(a.members.iter().map(|&i| plogp(p.probs[i])).sum())
}

pub fn weight(p: &Distribution, a: &LabelSet) -> Result<f64> {
    a.check(p.n())?;
    Ok(a.members.iter().map(|&i| p.probs[i]).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub heavy: LabelSet,
    pub light: LabelSet,
    pub beta: f64,
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 1.0 {
        Ok(())
    } else {
        Err(out_of_range(format!("beta = {beta} not in (0,1)")))
    }
}

/// Heavy labels have `p_i ≥ beta`.
pub fn split_heavy_light(p: &Distribution, beta: f64) -> Result<SplitReport> {
    check_beta(beta)?;
    let (heavy, light): (Vec<usize>, Vec<usize>) = (0..p.n()).partition(|&i| p.probs[i] >= beta);
    Ok(SplitReport { heavy: LabelSet { members: heavy }, light: LabelSet { members: light }, beta })
}

/// Bounds on the entropy carried by the light labels:
/// `w·log₂(1/β) ≤ H_p(S_β) ≤ w·log₂n + log₂(e)/e`.
pub fn lightweight_bounds(p: &Distribution, beta: f64) -> Result<(f64, f64)> {
    let split = split_heavy_light(p, beta)?;
    let w = weight(p, &split.light)?;
    Ok((w * (1.0 / beta).log2(), w * (p.n() as f64).log2() + LIGHT_SLACK_BITS))
}

pub fn hellinger(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.n() != q.n() {
        return Err(Error::SizeMismatch(p.n(), q.n()));
    }
    let s: f64 = p.probs.iter().zip(&q.probs).map(|(a, b)| (a.sqrt() - b.sqrt()).powi(2)).sum();
    Ok((0.5 * s).sqrt().min(1.0))
}

pub fn total_variation(p: &Distribution, q: &Distribution) -> Result<f64> {
    if p.n() != q.n() {
        return Err(Error::SizeMismatch(p.n(), q.n()));
    }
    let s: f64 = p.probs.iter().zip(&q.probs).map(|(a, b)| (a - b).abs()).sum();
    Ok((0.5 * s).min(1.0))
}

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

#[derive(Serialize, Deserialize)]
struct DensityRecord {
    n: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::InvalidDensityMatrix("matrix must be square and nonempty".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if (entries[(i, j)] - entries[(j, i)].conj()).norm() > SUM_TOL {
                    return Err(Error::InvalidDensityMatrix(format!("not Hermitian at ({i},{j})")));
                }
            }
        }
        let tr: C64 = (0..n).map(|i| entries[(i, i)]).sum();
        if (tr - C64::new(1.0, 0.0)).norm() > SUM_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace = {tr}")));
        }
        let rho = DensityMatrix { entries };
        let (vals, _) = rho.eigen();
        if let Some(v) = vals.iter().find(|v| **v < -SUM_TOL) {
            return Err(Error::InvalidDensityMatrix(format!("negative eigenvalue {v}")));
        }
        Ok(rho)
    }

    pub fn diagonal(p: &Distribution) -> Self {
        DensityMatrix {
            entries: DMatrix::from_diagonal(&DVector::from_iterator(p.n(), p.probs().iter().map(|&x| C64::new(x, 0.0)))),
        }
    }

    pub fn maximally_mixed(n: usize) -> Self {
        DensityMatrix::diagonal(&Distribution::uniform(n))
    }

    /// `|ψ⟩⟨ψ|` for a nonzero vector, normalized first.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::InvalidDensityMatrix("zero vector".into()));
        }
        let v = psi / C64::new(norm, 0.0);
        Ok(DensityMatrix { entries: &v * v.adjoint() })
    }

    /// `V·diag(p)·V†` with `V` Haar-random.
    pub fn with_spectrum<R: Rng + ?Sized>(p: &Distribution, rng: &mut R) -> Self {
        let v = haar_unitary(p.n(), rng);
        let d = DMatrix::from_diagonal(&DVector::from_iterator(p.n(), p.probs().iter().map(|&x| C64::new(x, 0.0))));
        DensityMatrix { entries: hermitize(&v * d * v.adjoint()) }
    }

    /// Normalized Ginibre sample `GG†/Tr(GG†)`.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let g = ginibre(n, rng);
        let m = &g * g.adjoint();
        let tr: f64 = (0..n).map(|i| m[(i, i)].re).sum();
        DensityMatrix { entries: hermitize(m / C64::new(tr, 0.0)) }
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Eigenvalues in descending order with matching eigenvector columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<C64>) {
        let eig = self.entries.clone().symmetric_eigen();
        let n = self.n();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        (vals, vecs)
    }

    /// Eigenvalues clamped to `[0,1]`, with values below the floor zeroed.
    pub fn spectrum(&self) -> Vec<f64> {
        self.eigen().0.into_iter().map(|v| if v < EIG_FLOOR { 0.0 } else { v.min(1.0) }).collect()
    }

    pub fn to_json(&self) -> String {
        let n = self.n();
        let rec = DensityRecord {
            n,
            re: (0..n).map(|i| (0..n).map(|j| self.entries[(i, j)].re).collect()).collect(),
            im: (0..n).map(|i| (0..n).map(|j| self.entries[(i, j)].im).collect()).collect(),
        };
        serde_json::to_string(&rec).expect("density matrix serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rec: DensityRecord = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        let n = rec.n;
        if rec.re.len() != n || rec.im.len() != n || rec.re.iter().chain(&rec.im).any(|r| r.len() != n) {
            return Err(Error::Parse(format!("expected {n}x{n} re/im arrays")));
        }
        DensityMatrix::new(DMatrix::from_fn(n, n, |i, j| C64::new(rec.re[i][j], rec.im[i][j])))
    }
}

fn hermitize(m: DMatrix<C64>) -> DMatrix<C64> {
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn ginibre<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix,
/// with the phases of R's diagonal divided out.
pub fn haar_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<C64> {
    let qr = ginibre(n, rng).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    rho.spectrum().into_iter().map(plogp).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerBoundKind {
    NearDeterministic,
    TwoPointVsSpread,
    Collision,
}

impl std::str::FromStr for LowerBoundKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "near_deterministic" | "nd" => Ok(LowerBoundKind::NearDeterministic),
            "two_point_vs_spread" | "tp" => Ok(LowerBoundKind::TwoPointVsSpread),
            "collision" => Ok(LowerBoundKind::Collision),
            other => Err(Error::Parse(format!("unknown lower-bound kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub kind: LowerBoundKind,
    pub n: usize,
    pub param: f64,
    /// Support size of both members of the pair.
    pub support: usize,
    pub entropy_p: f64,
    pub entropy_q: f64,
    /// `H(p)/H(q)`; infinite when `H(q) = 0`.
    pub ratio: f64,
    pub hellinger: f64,
    /// Collision family only: realized subset size and the ideal `n^{1/γ²}`.
    pub subset_size: Option<usize>,
    pub ideal_subset_size: Option<f64>,
    /// Collision family only: the ratio `γ²+1` the construction aims for.
    pub ideal_ratio: Option<f64>,
    /// Collision family only: `|log₂n/log₂k − log₂n/log₂k_ideal|` plus
    /// float slack, the shift in the ratio caused by rounding `k`.
    pub ratio_tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowerBoundPair {
    pub p: Distribution,
    pub q: Distribution,
    pub report: SeparationReport,
}

/// The hard pairs: `(1−ε, ε/(n−1), …)` against `(1, 0, …)` or
/// `(1−ε, ε, 0, …)`, and the uniform distribution on `N = n·k` labels
/// against uniform on `k ≈ n^{1/γ²}` of them.
pub fn gen_lower_bound_pair(kind: LowerBoundKind, n: usize, param: f64) -> Result<LowerBoundPair> {
    if n < 3 {
        return Err(out_of_range(format!("n = {n} < 3")));
    }
    let (p, q, subset, ideal_k, ideal_ratio) = match kind {
        LowerBoundKind::NearDeterministic | LowerBoundKind::TwoPointVsSpread => {
            let eps = param;
            if !(eps > 0.0 && eps < 1.0) {
                return Err(out_of_range(format!("eps = {eps} not in (0,1)")));
            }
            let mut pv = vec![eps / (n - 1) as f64; n];
            pv[0] = 1.0 - eps;
            let mut qv = vec![0.0; n];
            if kind == LowerBoundKind::NearDeterministic {
                qv[0] = 1.0;
            } else {
                qv[0] = 1.0 - eps;
                qv[1] = eps;
            }
            (Distribution { probs: pv }, Distribution { probs: qv }, None, None, None)
        }
        LowerBoundKind::Collision => {
            let gamma = param;
            if !(gamma > 1.0 && gamma.is_finite()) {
                return Err(out_of_range(format!("gamma = {gamma} must exceed 1")));
            }
            let ideal = (n as f64).powf(1.0 / (gamma * gamma));
            let k = (ideal.round() as usize).max(2);
            let big_n = n.checked_mul(k).filter(|&v| v <= COLLISION_CAP).ok_or(Error::DimensionCap {
                dim: n.saturating_mul(k),
                cap: COLLISION_CAP,
            })?;
            (
                Distribution::uniform(big_n),
                Distribution::uniform_on_prefix(big_n, k)?,
                Some(k),
                Some(ideal),
                Some(gamma * gamma + 1.0),
            )
        }
    };
    let hp = shannon_entropy(&p);
    let hq = shannon_entropy(&q);
    let ratio_tolerance = subset.zip(ideal_k).map(|(k, ideal)| {
        let l = (n as f64).log2();
        (l / (k as f64).log2() - l / ideal.log2()).abs() + 1e-9
    });
    let report = SeparationReport {
        kind,
        n,
        param,
        support: p.n(),
        entropy_p: hp,
        entropy_q: hq,
        ratio: if hq > 0.0 { hp / hq } else { f64::INFINITY },
        hellinger: hellinger(&p, &q)?,
        subset_size: subset,
        ideal_subset_size: ideal_k,
        ideal_ratio,
        ratio_tolerance,
    };
    Ok(LowerBoundPair { p, q, report })
}
