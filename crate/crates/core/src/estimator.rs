//! The light-weight estimator, the heavy-entropy estimator and their
//! combination into a multiplicative entropy estimate, with the parameter
//! derivation that ties their error budgets together.

use std::f64::consts::LN_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, DensityMatrix};
use crate::encodings::{
    projected_encoding_classical, projected_encoding_quantum, projected_encoding_spectral, OracleKind,
    ProjectedUnitaryEncoding, PurifiedOracle, CIRCUIT_REGISTER_CAP,
};
use crate::error::{out_of_range, Error, Result};
use crate::log_approx::{certify, taylor_poly_neg, taylor_poly_pos, TaylorPolynomial};
use crate::qsub::{m_for_precision, qae_boosted, qsve, qsve_cost, qsvt_apply, QaeMode, QueryLedger, SveMode};

/// Median-of-k repetitions used in sampled mode.
pub const BOOST_REPETITIONS: usize = 9;
/// Constant `C` in the closed-form query bound.
pub const TOTAL_BOUND_CONSTANT: f64 = 4096.0;
/// Precision used by the threshold test.
pub const THRESHOLD_EPS: f64 = 0.1;
/// Grid size for polynomial certification.
pub const CERT_GRID: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Exact singular values on the grid, exact amplitudes.
    Exact,
    /// Amplitudes perturbed anywhere inside the estimation error bound.
    Bound,
    /// Amplitudes drawn from the estimation outcome distribution, median of [`BOOST_REPETITIONS`].
    Sampled,
    /// Phase-estimation statevector for the singular values, exact amplitudes.
    Statevector,
}

impl Mode {
    pub fn sve(self) -> SveMode {
        match self {
            Mode::Statevector => SveMode::StatevectorQpe,
            _ => SveMode::IdealSvd,
        }
    }

    pub fn qae(self) -> QaeMode {
        match self {
            Mode::Bound => QaeMode::BoundOnly,
            Mode::Sampled => QaeMode::Sampled,
            Mode::Exact | Mode::Statevector => QaeMode::Exact,
        }
    }

    pub fn repetitions(self) -> usize {
        match self {
            Mode::Sampled => BOOST_REPETITIONS,
            _ => 1,
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" | "exact" => Ok(Mode::Exact),
            "bound" | "bound_only" => Ok(Mode::Bound),
            "sampled" => Ok(Mode::Sampled),
            "statevector" => Ok(Mode::Statevector),
            other => Err(Error::Parse(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorParams {
    pub n: usize,
    pub gamma: f64,
    pub eps: f64,
    pub eta: Option<f64>,
}

impl EstimatorParams {
    pub fn new(n: usize, gamma: f64, eps: f64) -> Result<Self> {
        if n < 4 {
            return Err(out_of_range(format!("n = {n} < 4")));
        }
        if !(gamma > 1.0 && gamma.is_finite()) {
            return Err(out_of_range(format!("gamma = {gamma} must exceed 1")));
        }
        if !(eps > 0.0 && eps < 1.0) {
            return Err(out_of_range(format!("eps = {eps} not in (0,1)")));
        }
        Ok(EstimatorParams { n, gamma, eps, eta: None })
    }

    /// Promise-slack form: `ε = η/8`.
    pub fn with_eta(n: usize, gamma: f64, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta < 8.0) {
            return Err(out_of_range(format!("eta = {eta} not in (0,8)")));
        }
        let mut p = Self::new(n, gamma, eta / 8.0)?;
        p.eta = Some(eta);
        Ok(p)
    }

    /// `3γ + 1/(2ε)`.
    pub fn promise_threshold(&self) -> f64 {
        3.0 * self.gamma + 1.0 / (2.0 * self.eps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub n: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub eps: f64,
    pub log2n: f64,
    pub m_bits: usize,
    /// `2^{−m}`.
    pub sqrt_beta_prime: f64,
    pub beta_prime: f64,
    /// `√(log₂n/(2m))`, used in the light term.
    pub gamma_prime: f64,
    /// Factor the exponent is built from: γ′, or γ when γ′ ≤ 1.
    pub gamma_heavy: f64,
    pub a: f64,
    /// Lower end of the polynomial domain in encoded units, `√β′/(2α)`.
    pub delta: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub eps3: f64,
    pub eps2_nominal: f64,
    pub eps3_nominal: f64,
    /// `(1/N₋² + 1/N₊²)/(2a·ln2)`: converts amplitude error into bits.
    pub k_rec: f64,
    pub deg_pos: usize,
    pub deg_neg: usize,
    /// `F̂₊ = N₊²·Σ p^{1+a}` up to polynomial error, likewise for `N₋`.
    pub n_pos_eff: f64,
    pub n_neg_eff: f64,
    pub neg_rescale: f64,
    pub m_light: u64,
    pub m_heavy: u64,
}

/// Derived parameters together with the two certified polynomials.
#[derive(Clone, Debug)]
pub struct Derivation {
    pub params: DerivedParams,
    pub pos: TaylorPolynomial,
    pub neg: TaylorPolynomial,
}

/// `(m, 2^{−m}, γ′)` with `m = ⌈log₂n/(2γ²)⌉`.
pub fn round_beta(n: usize, gamma: f64) -> (usize, f64, f64) {
    let l = (n as f64).log2();
    let m = ((l / (2.0 * gamma * gamma)).ceil() as usize).max(1);
    let sb = (-(m as f64)).exp2();
    (m, sb, (l / (2.0 * m as f64)).sqrt())
}

pub fn derive_params(params: &EstimatorParams, alpha: f64) -> Result<DerivedParams> {
    Ok(derive(params, alpha)?.params)
}

pub fn derive(params: &EstimatorParams, alpha: f64) -> Result<Derivation> {
    let EstimatorParams { n, gamma, eps, .. } = *params;
    EstimatorParams::new(n, gamma, eps)?;
    if !(alpha >= 1.0) {
        return Err(out_of_range(format!("alpha = {alpha} < 1")));
    }
    let log2n = (n as f64).log2();
    let (m_bits, sqrt_beta_prime, gamma_prime) = round_beta(n, gamma);
    let beta_prime = sqrt_beta_prime * sqrt_beta_prime;
    let ln_inv_beta = (1.0 / beta_prime).ln();
    let gamma_heavy = if gamma_prime > 1.0 { gamma_prime } else { gamma };
    let a = gamma_heavy.ln() / ln_inv_beta;
    let delta = sqrt_beta_prime / (2.0 * alpha);
    let eps1 = eps / (log2n * log2n);
    let eps2_nominal = eps * gamma.ln() / (2.0 * gamma.sqrt() * n as f64 * ln_inv_beta);
    let eps3_nominal = eps * gamma.ln() / (4.0 * gamma.sqrt() * ln_inv_beta);

    // The negative-power normalization depends on the degree (through the
    // rescale), which depends on ε₂, which depends on the normalization.
    let mut rescale = 1.0;
    let mut last = None;
    for _ in 0..12 {
        let n_pos = 0.5 * alpha.powf(-a);
        let n_neg = delta.powf(a) / (2.0 * rescale) * alpha.powf(a);
        let k_rec = (1.0 / (n_neg * n_neg) + 1.0 / (n_pos * n_pos)) / (2.0 * a * LN_2);
        let eps2 = eps2_nominal.min(eps / (4.0 * k_rec));
        let mut pos = taylor_poly_pos(a, delta, eps2)?;
        let mut neg = taylor_poly_neg(a, delta, eps2)?;
        certify(&mut pos, CERT_GRID)?;
        certify(&mut neg, CERT_GRID)?;
        let new_rescale = 0.5 * delta.powf(a) / neg.normalization;
        let settled = (new_rescale - rescale).abs() <= 1e-12 * rescale;
        last = Some((pos, neg));
        if settled {
            break;
        }
        rescale = new_rescale;
    }
    let (pos, neg) = last.expect("loop runs at least once");
    // Recompute the budget from the normalizations actually in use.
    let n_pos_eff = pos.normalization * alpha.powf(-a);
    let n_neg_eff = neg.normalization * alpha.powf(a);
    let k_rec = (1.0 / (n_neg_eff * n_neg_eff) + 1.0 / (n_pos_eff * n_pos_eff)) / (2.0 * a * LN_2);
    let eps2 = pos.eps_cert.max(neg.eps_cert);
    let eps3 = eps3_nominal.min(eps / k_rec - eps2 * (1.0 + eps2));
    if !(eps3 > 0.0) {
        return Err(Error::Unreachable(format!("no amplitude budget left (k_rec = {k_rec}, eps2 = {eps2})")));
    }
    let m_light = m_for_precision(1.0, eps1.min(0.49))?;
    let m_heavy = m_for_precision(1.0, eps3.min(0.49))?;
    Ok(Derivation {
        params: DerivedParams {
            n,
            alpha,
            gamma,
            eps,
            log2n,
            m_bits,
            sqrt_beta_prime,
            beta_prime,
            gamma_prime,
            gamma_heavy,
            a,
            delta,
            eps1,
            eps2,
            eps3,
            eps2_nominal,
            eps3_nominal,
            k_rec,
            deg_pos: pos.degree,
            deg_neg: neg.degree,
            n_pos_eff,
            n_neg_eff,
            neg_rescale: neg.rescale,
            m_light,
            m_heavy,
        },
        pos,
        neg,
    })
}

/// One preparation: the oracle query plus one QSVE.
fn prep_base(d: &DerivedParams) -> QueryLedger {
    let mut l = QueryLedger::new();
    l.uses_u += 1;
    l.charge_split(qsve_cost(d.alpha, d.m_bits));
    l
}

fn prep_with_poly(d: &DerivedParams, deg: usize, ancilla_count: usize) -> QueryLedger {
    let mut l = prep_base(d);
    l.charge_split(deg as u64);
    l.uses_controlled_u += 1;
    l.extra_gates += (ancilla_count as u64 + 1) * deg as u64;
    l
}

/// The ledger a full run charges, computed without running anything.
pub fn analytic_ledger(d: &DerivedParams, ancilla_count: usize, repetitions: usize) -> QueryLedger {
    let r = repetitions as u64;
    let mut total = QueryLedger::new();
    total.add_scaled(&prep_base(d), d.m_light * r);
    total.add_scaled(&prep_with_poly(d, d.deg_pos, ancilla_count), d.m_heavy * r);
    total.add_scaled(&prep_with_poly(d, d.deg_neg, ancilla_count), d.m_heavy * r);
    total
}

/// `C·α·n^{1/(2γ²)}·log₂²n/(ε·log₂γ)`.
pub fn total_query_bound(params: &EstimatorParams, alpha: f64) -> f64 {
    let n = params.n as f64;
    let l = n.log2();
    TOTAL_BOUND_CONSTANT * alpha * n.powf(1.0 / (2.0 * params.gamma * params.gamma)) * l * l
        / (params.eps * params.gamma.log2())
}

/// Light-weight estimate `w̃_S` of the mass below the QSVE threshold.
pub fn lightweight(
    enc: &ProjectedUnitaryEncoding,
    d: &DerivedParams,
    mode: Mode,
    rng: &mut ChaCha8Rng,
    ledger: &mut QueryLedger,
) -> Result<f64> {
    let mut prep = QueryLedger::new();
    prep.uses_u += 1;
    let mut sve = qsve(enc, d.m_bits, mode.sve(), &mut prep)?;
    let heavy = sve.classify(d.sqrt_beta_prime).to_vec();
    let amp: f64 = enc.components().iter().zip(&heavy).filter(|(_, &h)| !h).map(|(c, _)| c.weight).sum();
    let est = qae_boosted(amp.clamp(0.0, 1.0), d.m_light, mode.qae(), mode.repetitions(), rng, &prep, ledger)?;
    Ok(est.p_hat)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeavyReport {
    /// Reconstructed heavy-set entropy in bits (may be slightly negative).
    pub f_hat: f64,
    pub f_plus_hat: f64,
    pub f_minus_hat: f64,
    /// Noise-free amplitudes the estimates were drawn around.
    pub f_plus_amp: f64,
    pub f_minus_amp: f64,
    pub heavy_count: usize,
}

/// Heavy-set entropy from the two power sums.
pub fn heavy_entropy(
    enc: &ProjectedUnitaryEncoding,
    d: &DerivedParams,
    polys: (&TaylorPolynomial, &TaylorPolynomial),
    mode: Mode,
    rng: &mut ChaCha8Rng,
    ledger: &mut QueryLedger,
) -> Result<HeavyReport> {
    let comps = enc.components();
    let mut amps = [0.0; 2];
    let mut hats = [0.0; 2];
    let mut heavy_count = 0;
    for (slot, poly) in [polys.0, polys.1].into_iter().enumerate() {
        let mut prep = QueryLedger::new();
        prep.uses_u += 1;
        let mut sve = qsve(enc, d.m_bits, mode.sve(), &mut prep)?;
        let heavy = sve.classify(d.sqrt_beta_prime).to_vec();
        let transformed = qsvt_apply(enc, poly, &mut prep)?;
        heavy_count = heavy.iter().filter(|&&h| h).count();
        let amp: f64 = comps
            .iter()
            .zip(transformed.components())
            .zip(&heavy)
            .filter(|(_, &h)| h)
            .map(|((c, t), _)| c.weight * t.sigma * t.sigma)
            .sum();
        amps[slot] = amp;
        hats[slot] = qae_boosted(amp.clamp(0.0, 1.0), d.m_heavy, mode.qae(), mode.repetitions(), rng, &prep, ledger)?.p_hat;
    }
    let f_hat = reconstruct(d, hats[0], hats[1]);
    Ok(HeavyReport { f_hat, f_plus_hat: hats[0], f_minus_hat: hats[1], f_plus_amp: amps[0], f_minus_amp: amps[1], heavy_count })
}

/// `(F̂₋/N₋² − F̂₊/N₊²)/(2a·ln2)`.
pub fn reconstruct(d: &DerivedParams, f_plus: f64, f_minus: f64) -> f64 {
    (f_minus / (d.n_neg_eff * d.n_neg_eff) - f_plus / (d.n_pos_eff * d.n_pos_eff)) / (2.0 * d.a * LN_2)
}

/// Exact power-sum combination `Σ_{i∈B} p_i(p_i^{−a} − p_i^{a})/(2a·ln2)`.
pub fn power_sum_entropy(p: &[f64], a: f64) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| x * (x.powf(-a) - x.powf(a))).sum::<f64>() / (2.0 * a * LN_2)
}

pub fn check_guarantee(h_tilde: f64, h_true: f64, gamma: f64, eps: f64) -> Result<bool> {
    if !(h_true > 0.0) {
        return Err(out_of_range(format!("true entropy {h_true} must be positive")));
    }
    let f = (1.0 + 2.0 * eps) * gamma;
    Ok(h_true / f <= h_tilde && h_tilde <= f * h_true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    #[serde(rename = "H_tilde")]
    pub h_tilde: f64,
    #[serde(rename = "H_B_tilde")]
    pub h_b_tilde: f64,
    pub w_s_tilde: f64,
    #[serde(rename = "F_hat")]
    pub f_hat: f64,
    #[serde(rename = "F_plus_hat")]
    pub f_plus_hat: f64,
    #[serde(rename = "F_minus_hat")]
    pub f_minus_hat: f64,
    pub heavy_count: usize,
    pub derived: DerivedParams,
    pub ledger: QueryLedger,
    pub mode: Mode,
    pub seed: u64,
    pub encoding: OracleKind,
    pub explicit_encoding: bool,
    pub params: EstimatorParams,
    /// The entropy promise is assumed, never checked from the oracle.
    pub promise_assumed: bool,
    #[serde(rename = "H_true")]
    pub h_true: Option<f64>,
    pub promise_holds: Option<bool>,
    pub guarantee_interval: Option<(f64, f64)>,
    pub within_guarantee: Option<bool>,
}

impl EstimateReport {
    /// Attaches ground truth and evaluates the guarantee window.
    pub fn check_against(&mut self, h_true: f64) {
        let (g, e) = (self.params.gamma, self.params.eps);
        let f = (1.0 + 2.0 * e) * g;
        self.h_true = Some(h_true);
        self.promise_holds = Some(h_true >= self.params.promise_threshold());
        self.guarantee_interval = Some((h_true / f, f * h_true));
        self.within_guarantee = check_guarantee(self.h_tilde, h_true, g, e).ok();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Explicit circuit encoding when the registers fit, spectral otherwise.
pub fn encode_oracle(oracle: &PurifiedOracle) -> Result<ProjectedUnitaryEncoding> {
    let fits = oracle.register_dims.iter().all(|&d| d <= CIRCUIT_REGISTER_CAP);
    match (oracle.kind, fits) {
        (OracleKind::Classical, true) => projected_encoding_classical(oracle),
        (OracleKind::Quantum, true) => projected_encoding_quantum(oracle),
        (OracleKind::Classical, false) => Ok(projected_encoding_spectral(&oracle.induced_distribution()?, OracleKind::Classical)),
        (OracleKind::Quantum, false) => {
            let rho = DensityMatrix::new(oracle.reduced_state())?;
            let eigs = Distribution::normalized(rho.spectrum())?;
            Ok(projected_encoding_spectral(&eigs, OracleKind::Quantum))
        }
    }
}

fn encoding_kind(enc: &ProjectedUnitaryEncoding) -> OracleKind {
    if enc.alpha > 1.0 { OracleKind::Quantum } else { OracleKind::Classical }
}

pub fn estimate_entropy(oracle: &PurifiedOracle, params: &EstimatorParams, mode: Mode, seed: u64) -> Result<EstimateReport> {
    let enc = encode_oracle(oracle)?;
    estimate_entropy_encoded(&enc, params, mode, seed)
}

pub fn estimate_entropy_encoded(
    enc: &ProjectedUnitaryEncoding,
    params: &EstimatorParams,
    mode: Mode,
    seed: u64,
) -> Result<EstimateReport> {
    if enc.n() != params.n {
        return Err(Error::SizeMismatch(enc.n(), params.n));
    }
    let der = derive(params, enc.alpha)?;
    estimate_with(enc, params, &der, mode, seed)
}

/// Runs the estimator with an already derived parameter set.
pub fn estimate_with(
    enc: &ProjectedUnitaryEncoding,
    params: &EstimatorParams,
    der: &Derivation,
    mode: Mode,
    seed: u64,
) -> Result<EstimateReport> {
    let d = &der.params;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ledger = QueryLedger::new();
    let w = lightweight(enc, d, mode, &mut rng, &mut ledger)?;
    let heavy = heavy_entropy(enc, d, (&der.pos, &der.neg), mode, &mut rng, &mut ledger)?;
    let h_b = heavy.f_hat.max(0.0);
    let w_clamped = w.clamp(0.0, 1.0);
    let h_tilde = h_b + w_clamped * d.log2n / d.gamma_prime;
    Ok(EstimateReport {
        h_tilde,
        h_b_tilde: h_b,
        w_s_tilde: w_clamped,
        f_hat: heavy.f_hat,
        f_plus_hat: heavy.f_plus_hat,
        f_minus_hat: heavy.f_minus_hat,
        heavy_count: heavy.heavy_count,
        derived: d.clone(),
        ledger,
        mode,
        seed,
        encoding: encoding_kind(enc),
        explicit_encoding: enc.is_explicit(),
        params: *params,
        promise_assumed: true,
        h_true: None,
        promise_holds: None,
        guarantee_interval: None,
        within_guarantee: None,
    })
}

/// `γ = 1 + ε_add/log₂n`, inner precision `ε_add/2`.
pub fn additive_params(n: usize, eps_add: f64) -> Result<EstimatorParams> {
    if !(eps_add > 0.0 && eps_add < 1.0) {
        return Err(out_of_range(format!("eps_add = {eps_add} not in (0,1)")));
    }
    EstimatorParams::new(n, 1.0 + eps_add / (n as f64).log2(), eps_add / 2.0)
}

pub fn estimate_additive(oracle: &PurifiedOracle, eps_add: f64, mode: Mode, seed: u64) -> Result<EstimateReport> {
    let enc = encode_oracle(oracle)?;
    estimate_additive_encoded(&enc, eps_add, mode, seed)
}

pub fn estimate_additive_encoded(enc: &ProjectedUnitaryEncoding, eps_add: f64, mode: Mode, seed: u64) -> Result<EstimateReport> {
    let params = additive_params(enc.n(), eps_add)?;
    estimate_entropy_encoded(enc, &params, mode, seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdAnswer {
    High,
    Low,
}

/// Parameters for deciding `H ≥ H1` against `H ≤ H2`.
pub fn threshold_params(n: usize, h1: f64, h2: f64) -> Result<EstimatorParams> {
    let log2n = (n as f64).log2();
    if !(h2 > 0.0 && h2 < h1 && h1 <= log2n + 1e-12) {
        return Err(out_of_range(format!("need 0 < H2 < H1 ≤ log₂n, got H1 = {h1}, H2 = {h2}, log₂n = {log2n}")));
    }
    EstimatorParams::new(n, (h1 / h2).sqrt(), THRESHOLD_EPS)
}

pub fn entropy_threshold_test(oracle: &PurifiedOracle, h1: f64, h2: f64, mode: Mode, seed: u64) -> Result<(ThresholdAnswer, EstimateReport)> {
    let enc = encode_oracle(oracle)?;
    entropy_threshold_test_encoded(&enc, h1, h2, mode, seed)
}

/// High iff `H̃ ≥ √(H1·H2)`.
pub fn entropy_threshold_test_encoded(
    enc: &ProjectedUnitaryEncoding,
    h1: f64,
    h2: f64,
    mode: Mode,
    seed: u64,
) -> Result<(ThresholdAnswer, EstimateReport)> {
    let params = threshold_params(enc.n(), h1, h2)?;
    let report = estimate_entropy_encoded(enc, &params, mode, seed)?;
    let answer = if report.h_tilde >= (h1 * h2).sqrt() { ThresholdAnswer::High } else { ThresholdAnswer::Low };
    Ok((answer, report))
}
