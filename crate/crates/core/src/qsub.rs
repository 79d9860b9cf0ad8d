//! Singular value estimation, singular value transformation and amplitude
//! estimation, simulated at the level of their input/output contracts, with
//! a query ledger.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::C64;
use crate::encodings::{EncodingBody, EncodingKind, ProjectedUnitaryEncoding, SingularComponent};
use crate::error::{out_of_range, Error, Result};
use crate::log_approx::TaylorPolynomial;

/// QSVE at `m` bits costs `⌈QSVE_CONSTANT·α·2^m⌉` uses of `U` and `U†`.
pub const QSVE_CONSTANT: f64 = 2.0;
/// Largest `Π̂` dimension accepted by the statevector phase estimation.
pub const STATEVECTOR_DIM_CAP: usize = 512;
/// Largest bit count for statevector phase estimation.
pub const STATEVECTOR_MAX_BITS: usize = 10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryLedger {
    pub uses_u: u64,
    pub uses_u_dagger: u64,
    pub uses_controlled_u: u64,
    pub extra_gates: u64,
}

impl QueryLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Splits `count` uses between `U` (rounded up) and `U†`.
    pub fn charge_split(&mut self, count: u64) {
        self.uses_u += count.div_ceil(2);
        self.uses_u_dagger += count / 2;
    }

    pub fn add(&mut self, other: &QueryLedger) {
        self.uses_u += other.uses_u;
        self.uses_u_dagger += other.uses_u_dagger;
        self.uses_controlled_u += other.uses_controlled_u;
        self.extra_gates += other.extra_gates;
    }

    pub fn add_scaled(&mut self, other: &QueryLedger, times: u64) {
        self.uses_u += other.uses_u * times;
        self.uses_u_dagger += other.uses_u_dagger * times;
        self.uses_controlled_u += other.uses_controlled_u * times;
        self.extra_gates += other.extra_gates * times;
    }

    /// Oracle queries: plain, inverse and controlled uses.
    pub fn queries(&self) -> u64 {
        self.uses_u + self.uses_u_dagger + self.uses_controlled_u
    }
}

/// Charge of one QSVE call.
pub fn qsve_cost(alpha: f64, m_bits: usize) -> u64 {
    (QSVE_CONSTANT * alpha * (m_bits as f64).exp2()).ceil() as u64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SveMode {
    IdealSvd,
    StatevectorQpe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SVEResult {
    /// One value per singular component, in [`ProjectedUnitaryEncoding::components`] order.
    pub estimates: Vec<f64>,
    /// The unnormalized values `α·σ` that were estimated.
    pub sigmas: Vec<f64>,
    pub m_bits: usize,
    pub heavy: Option<Vec<bool>>,
}

impl SVEResult {
    /// Flags `q_i ≥ threshold`.
    pub fn classify(&mut self, threshold: f64) -> &[bool] {
        self.heavy = Some(self.estimates.iter().map(|&q| q >= threshold).collect());
        self.heavy.as_deref().expect("just set")
    }
}

/// Nearest point of the `2^{−m}` grid, ties toward zero, clamped to `[0,1]`.
pub fn round_to_grid(sigma: f64, m_bits: usize) -> f64 {
    let scale = (m_bits as f64).exp2();
    let x = sigma.max(0.0) * scale;
    let k = (x - 0.5).ceil().max(0.0);
    (k / scale).min(1.0)
}

pub fn qsve(enc: &ProjectedUnitaryEncoding, m_bits: usize, mode: SveMode, ledger: &mut QueryLedger) -> Result<SVEResult> {
    if m_bits == 0 {
        return Err(out_of_range("m_bits must be at least 1"));
    }
    let comps = enc.components();
    let sigmas: Vec<f64> = comps.iter().map(|c| enc.alpha * c.sigma).collect();
    let estimates = match mode {
        SveMode::IdealSvd => sigmas.iter().map(|&s| round_to_grid(s, m_bits)).collect(),
        SveMode::StatevectorQpe => statevector_qpe(enc, &comps, m_bits)?,
    };
    ledger.charge_split(qsve_cost(enc.alpha, m_bits));
    Ok(SVEResult { estimates, sigmas, m_bits, heavy: None })
}

/// Phase estimation with `m+1` ancilla qubits on `V = e^{iπΠ̂}`,
/// `Π̂ = [[0, αB], [αB†, 0]]`, started from `|1⟩|v⟩` for each right
/// singular vector `v`. The eigenphases `±σ/2` land on outcomes `±k` with
/// `σ ≈ k·2^{−m}`; the most likely `|k|` is reported (ties to the smaller).
fn statevector_qpe(enc: &ProjectedUnitaryEncoding, comps: &[SingularComponent], m_bits: usize) -> Result<Vec<f64>> {
    if !matches!(enc.body(), EncodingBody::Circuit { .. }) {
        return Err(out_of_range("statevector phase estimation needs an explicit circuit encoding"));
    }
    if m_bits > STATEVECTOR_MAX_BITS {
        return Err(out_of_range(format!("m_bits = {m_bits} > {STATEVECTOR_MAX_BITS} in statevector mode")));
    }
    let b = enc.block() * C64::new(enc.alpha, 0.0);
    let (l, r) = (b.nrows(), b.ncols());
    let d = l + r;
    if d > STATEVECTOR_DIM_CAP {
        return Err(Error::DimensionCap { dim: d, cap: STATEVECTOR_DIM_CAP });
    }
    let mut h = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    h.view_mut((0, l), (l, r)).copy_from(&b);
    h.view_mut((l, 0), (r, l)).copy_from(&b.adjoint());
    let eig = h.symmetric_eigen();
    let phases = DVector::from_iterator(d, eig.eigenvalues.iter().map(|&lam| C64::from_polar(1.0, PI * lam)));
    let v = &eig.eigenvectors * DMatrix::from_diagonal(&phases) * eig.eigenvectors.adjoint();

    let t = 1usize << (m_bits + 1);
    let half = t / 2;
    let mut out = Vec::with_capacity(comps.len());
    for c in comps {
        let right = c.right.as_ref().expect("circuit encodings carry right vectors");
        let mut psi = DVector::from_element(d, C64::new(0.0, 0.0));
        psi.rows_mut(l, r).copy_from(right);
        // Controlled powers V^j|ψ⟩ for every ancilla value j.
        let mut powers = Vec::with_capacity(t);
        powers.push(psi.clone());
        for j in 1..t {
            let next = &v * &powers[j - 1];
            powers.push(next);
        }
        // Inverse QFT on the ancilla and marginalize the system register.
        let mut by_abs = vec![0.0; half + 1];
        for k in 0..t {
            let mut amp = DVector::from_element(d, C64::new(0.0, 0.0));
            for (j, pj) in powers.iter().enumerate() {
                let w = C64::from_polar(1.0 / t as f64, -2.0 * PI * ((j * k) % t) as f64 / t as f64);
                amp.axpy(w, pj, C64::new(1.0, 0.0));
            }
            let signed = if k <= half { k } else { t - k };
            by_abs[signed] += amp.norm_squared();
        }
        let mut best = 0;
        for (k, &pk) in by_abs.iter().enumerate() {
            if pk > by_abs[best] + 1e-12 {
                best = k;
            }
        }
        out.push((best as f64 / (m_bits as f64).exp2()).min(1.0));
    }
    Ok(out)
}

fn check_polynomial(poly: &TaylorPolynomial) -> Result<()> {
    let ok_cert = poly.eps_cert.is_finite() && poly.eps_cert < 1.0;
    let ok_bound = (0..=200).all(|k| poly.eval(k as f64 / 200.0).abs() <= 1.0 + 1e-12);
    if ok_cert && ok_bound {
        Ok(())
    } else {
        Err(Error::Uncertified(format!("degree {} polynomial (eps_cert = {})", poly.degree, poly.eps_cert)))
    }
}

/// Even singular value transformation: same right singular vectors,
/// `σ ↦ poly(σ)`. The result is a normalized (α = 1) encoding.
pub fn qsvt_apply(enc: &ProjectedUnitaryEncoding, poly: &TaylorPolynomial, ledger: &mut QueryLedger) -> Result<ProjectedUnitaryEncoding> {
    check_polynomial(poly)?;
    let components = enc
        .components()
        .iter()
        .map(|c| SingularComponent { sigma: poly.eval(c.sigma), weight: c.weight, right: c.right.clone() })
        .collect();
    let deg = poly.degree as u64;
    ledger.charge_split(deg);
    ledger.uses_controlled_u += 1;
    ledger.extra_gates += (enc.ancilla_count as u64 + 1) * deg;
    Ok(ProjectedUnitaryEncoding::new(EncodingBody::Transformed { components }, 1.0, enc.ancilla_count + 2, EncodingKind::Transformed))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaeMode {
    Sampled,
    BoundOnly,
    /// Returns the amplitude itself (the noise-free contract).
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeEstimate {
    pub p_hat: f64,
    #[serde(rename = "M")]
    pub m: u64,
    pub mode: QaeMode,
}

/// `2π√(p(1−p))/M + π²/M²`.
pub fn qae_error_bound(p: f64, m: u64) -> f64 {
    let m = m as f64;
    2.0 * PI * (p * (1.0 - p)).max(0.0).sqrt() / m + PI * PI / (m * m)
}

/// Fejér-type kernel `sin²(Mπx)/(M² sin²(πx))`, equal to 1 at integers.
fn fejer(m: u64, x: f64) -> f64 {
    let s = (PI * x).sin();
    if s.abs() < 1e-300 || (x - x.round()).abs() < 1e-15 {
        return 1.0;
    }
    let num = (m as f64 * PI * x).sin();
    let mf = m as f64;
    (num * num) / (mf * mf * s * s)
}

/// Outcome distribution of `M`-round amplitude estimation over the grid
/// `j/M`, `j = 0..M`, for `p = sin²(πθ)`.
#[derive(Clone, Debug)]
pub struct QaeDistribution {
    pub m: u64,
    pub probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl QaeDistribution {
    pub fn new(p: f64, m: u64) -> Result<Self> {
        if m < 2 {
            return Err(out_of_range(format!("M = {m} < 2")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(out_of_range(format!("amplitude {p} not in [0,1]")));
        }
        let theta = p.sqrt().asin() / PI;
        let mf = m as f64;
        let probs: Vec<f64> = (0..m)
            .map(|j| {
                let g = j as f64 / mf;
                0.5 * (fejer(m, theta - g) + fejer(m, -theta - g))
            })
            .collect();
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|&q| {
                acc += q;
                acc
            })
            .collect();
        Ok(QaeDistribution { m, probs, cdf })
    }

    pub fn total(&self) -> f64 {
        *self.cdf.last().expect("M ≥ 2")
    }

    pub fn outcome(&self, j: usize) -> f64 {
        (PI * j as f64 / self.m as f64).sin().powi(2)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u = rng.random::<f64>() * self.total();
        let j = self.cdf.partition_point(|&c| c <= u).min(self.probs.len() - 1);
        self.outcome(j)
    }
}

/// Amplitude estimate of `p` with `M` rounds. Each round uses the state
/// preparation once forward and once inverted; the ledger is charged
/// `M × prep_cost` (the per-preparation cost already counts both).
pub fn qae<R: Rng + ?Sized>(
    p: f64,
    m: u64,
    mode: QaeMode,
    rng: &mut R,
    prep_cost: &QueryLedger,
    ledger: &mut QueryLedger,
) -> Result<AmplitudeEstimate> {
    let est = qae_boosted(p, m, mode, 1, rng, prep_cost, ledger)?;
    Ok(est)
}

/// Median of `repetitions` independent estimates, charged as many times.
pub fn qae_boosted<R: Rng + ?Sized>(
    p: f64,
    m: u64,
    mode: QaeMode,
    repetitions: usize,
    rng: &mut R,
    prep_cost: &QueryLedger,
    ledger: &mut QueryLedger,
) -> Result<AmplitudeEstimate> {
    if m < 2 {
        return Err(out_of_range(format!("M = {m} < 2")));
    }
    if !(-1e-12..=1.0 + 1e-12).contains(&p) {
        return Err(out_of_range(format!("amplitude {p} not in [0,1]")));
    }
    let p = p.clamp(0.0, 1.0);
    let p_hat = match mode {
        QaeMode::Exact => {
            check_repetitions(repetitions)?;
            p
        }
        QaeMode::BoundOnly => {
            let bound = qae_error_bound(p, m);
            boost_median(|r: &mut R| (p + r.random_range(-1.0..=1.0) * bound).clamp(0.0, 1.0), repetitions, rng)?
        }
        QaeMode::Sampled => {
            let dist = QaeDistribution::new(p, m)?;
            boost_median(|r: &mut R| dist.sample(r), repetitions, rng)?
        }
    };
    ledger.add_scaled(prep_cost, m * repetitions as u64);
    Ok(AmplitudeEstimate { p_hat, m, mode })
}

/// `⌈2π(2√p/ε + 1/√ε)⌉`, enough for the error bound to be at most ε at `p`.
pub fn m_for_precision(p_hint: f64, eps: f64) -> Result<u64> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(out_of_range(format!("eps = {eps} not in (0, 1/2)")));
    }
    if !(0.0..=1.0).contains(&p_hint) {
        return Err(out_of_range(format!("p_hint = {p_hint} not in [0,1]")));
    }
    let m = (2.0 * PI * (2.0 * p_hint.sqrt() / eps + 1.0 / eps.sqrt())).ceil();
    Ok((m as u64).max(2))
}

fn check_repetitions(repetitions: usize) -> Result<()> {
    if repetitions % 2 == 0 {
        return Err(out_of_range(format!("repetitions = {repetitions} must be odd")));
    }
    Ok(())
}

pub fn boost_median<R, F>(mut op: F, repetitions: usize, rng: &mut R) -> Result<f64>
where
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> f64,
{
    check_repetitions(repetitions)?;
    let mut xs: Vec<f64> = (0..repetitions).map(|_| op(rng)).collect();
    xs.sort_by(f64::total_cmp);
    Ok(xs[repetitions / 2])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{DensityMatrix, Distribution};
    use crate::encodings::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_rounding() {
        assert_eq!(round_to_grid(0.5, 2), 0.5);
        assert_eq!(round_to_grid(0.3, 2), 0.25);
        assert_eq!(round_to_grid(0.125, 2), 0.0);
        assert_eq!(round_to_grid(0.375, 2), 0.25);
        assert_eq!(round_to_grid(1.2, 2), 1.0);
    }

    #[test]
    fn qsve_uniform_and_ledger() {
        let enc = projected_encoding_classical(&build_purified_oracle_classical(&Distribution::uniform(4)).unwrap()).unwrap();
        let mut l = QueryLedger::new();
        let r = qsve(&enc, 2, SveMode::IdealSvd, &mut l).unwrap();
        assert!(r.estimates.iter().all(|&q| q == 0.5));
        assert_eq!((l.uses_u, l.uses_u_dagger), (4, 4));
        let r2 = qsve(&enc, 2, SveMode::StatevectorQpe, &mut l).unwrap();
        assert_eq!(r.estimates, r2.estimates);
        assert!(qsve(&enc, 0, SveMode::IdealSvd, &mut l).is_err());
    }

    #[test]
    fn statevector_on_swap_block() {
        let rho = DensityMatrix::diagonal(&Distribution::new(vec![0.5, 0.25, 0.25]).unwrap());
        let enc = block_encoding_density_swap(&build_purified_oracle_quantum(&rho).unwrap()).unwrap();
        let mut l = QueryLedger::new();
        let a = qsve(&enc, 2, SveMode::IdealSvd, &mut l).unwrap();
        let b = qsve(&enc, 2, SveMode::StatevectorQpe, &mut l).unwrap();
        assert_eq!(a.estimates, b.estimates);
        let mut e = a.estimates.clone();
        e.sort_by(f64::total_cmp);
        assert_eq!(e, vec![0.25, 0.25, 0.5]);
    }

    #[test]
    fn qsvt_constant_and_linear() {
        let enc = projected_encoding_spectral(&Distribution::uniform(4), OracleKind::Classical);
        let lin = crate::log_approx::taylor_poly_pos(1.0, 0.1, 1e-6).unwrap();
        let mut l = QueryLedger::new();
        let t = qsvt_apply(&enc, &lin, &mut l).unwrap();
        assert!(t.singular_values().iter().all(|&s| (s - 0.25).abs() < 1e-15));
        assert_eq!(l, QueryLedger { uses_u: 1, uses_u_dagger: 0, uses_controlled_u: 1, extra_gates: (enc.ancilla_count as u64 + 1) });
        let mut bad = lin.clone();
        bad.shifted_coeffs = vec![2.0];
        assert!(matches!(qsvt_apply(&enc, &bad, &mut l), Err(Error::Uncertified(_))));
    }

    #[test]
    fn qae_endpoints_and_m() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zero = QueryLedger::new();
        let mut l = QueryLedger::new();
        for mode in [QaeMode::Sampled, QaeMode::Exact] {
            for m in [2, 7, 64] {
                assert_eq!(qae(0.0, m, mode, &mut rng, &zero, &mut l).unwrap().p_hat, 0.0);
            }
            // θ = 1/2 is a grid angle only for even M.
            for m in [2, 8, 64] {
                assert!((qae(1.0, m, mode, &mut rng, &zero, &mut l).unwrap().p_hat - 1.0).abs() < 1e-15);
            }
        }
        for p in [0.0, 0.3, 1.0] {
            for _ in 0..50 {
                let e = qae(p, 16, QaeMode::BoundOnly, &mut rng, &zero, &mut l).unwrap();
                assert!((e.p_hat - p).abs() <= qae_error_bound(p, 16));
            }
        }
        assert!(qae(0.5, 1, QaeMode::Sampled, &mut rng, &zero, &mut l).is_err());
        assert_eq!(m_for_precision(1.0, 0.01).unwrap(), 1320);
        assert_eq!(m_for_precision(0.0, 0.25).unwrap(), 13);
        assert!(m_for_precision(0.5, 0.5).is_err());
    }

    #[test]
    fn qae_distribution_normalized_and_symmetric() {
        for &(p, m) in &[(0.3, 64u64), (0.1, 17), (0.99, 256)] {
            let d = QaeDistribution::new(p, m).unwrap();
            assert!((d.total() - 1.0).abs() < 1e-10);
            for j in 1..m as usize {
                assert!((d.probs[j] - d.probs[m as usize - j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn median_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(boost_median(|_: &mut ChaCha8Rng| 0.7, 5, &mut rng).unwrap(), 0.7);
        assert!(boost_median(|_: &mut ChaCha8Rng| 0.7, 4, &mut rng).is_err());
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let d = QaeDistribution::new(0.3, 64).unwrap();
        assert_eq!(boost_median(|r: &mut ChaCha8Rng| d.sample(r), 1, &mut a).unwrap(), d.sample(&mut b));
    }
}
