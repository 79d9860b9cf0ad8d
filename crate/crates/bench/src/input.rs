//! Experiment inputs: JSON files and named generators.

use std::path::Path;

use qentropy::dist::{
    gen_lower_bound_pair, shannon_entropy, von_neumann_entropy, DensityMatrix, Distribution, LowerBoundKind,
};
use qentropy::encodings::{
    build_purified_oracle_classical, build_purified_oracle_quantum, projected_encoding_spectral,
    purified_from_frequency_vector, FrequencyVector, OracleKind, ProjectedUnitaryEncoding, CIRCUIT_REGISTER_CAP,
};
use qentropy::estimator::encode_oracle;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Something whose entropy is estimated.
#[derive(Clone, Debug)]
pub enum Target {
    Distribution(Distribution),
    Frequency(FrequencyVector),
    Density(DensityMatrix),
}

impl Target {
    pub fn n(&self) -> usize {
        match self {
            Target::Distribution(p) => p.n(),
            Target::Frequency(v) => v.n,
            Target::Density(r) => r.n(),
        }
    }

    pub fn kind(&self) -> OracleKind {
        match self {
            Target::Density(_) => OracleKind::Quantum,
            _ => OracleKind::Classical,
        }
    }

    /// The distribution the oracle induces (the spectrum for density matrices).
    pub fn distribution(&self) -> Result<Distribution, HarnessError> {
        Ok(match self {
            Target::Distribution(p) => p.clone(),
            Target::Frequency(v) => {
                let m = v.m() as f64;
                Distribution::normalized(v.counts().into_iter().map(|c| c as f64 / m).collect())?
            }
            Target::Density(r) => {
                let mut eig = r.spectrum();
                eig.sort_by(|a, b| b.total_cmp(a));
                Distribution::normalized(eig)?
            }
        })
    }

    pub fn entropy(&self) -> Result<f64, HarnessError> {
        Ok(match self {
            Target::Density(r) => von_neumann_entropy(r),
            other => shannon_entropy(&other.distribution()?),
        })
    }

    /// Explicit circuit encoding through the purified oracle when the
    /// registers fit under the cap, the spectral shortcut otherwise.
    pub fn encoding(&self) -> Result<ProjectedUnitaryEncoding, HarnessError> {
        let n = self.n();
        if n <= CIRCUIT_REGISTER_CAP {
            let oracle = match self {
                Target::Distribution(p) => build_purified_oracle_classical(p)?,
                Target::Frequency(v) => purified_from_frequency_vector(v)?,
                Target::Density(r) => build_purified_oracle_quantum(r)?,
            };
            return Ok(encode_oracle(&oracle)?);
        }
        Ok(projected_encoding_spectral(&self.distribution()?, self.kind()))
    }

    /// Same target through the spectral shortcut regardless of size.
    pub fn spectral_encoding(&self) -> Result<ProjectedUnitaryEncoding, HarnessError> {
        Ok(projected_encoding_spectral(&self.distribution()?, self.kind()))
    }
}

/// Where the input comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    File(String),
    Gen(String),
}

impl InputSource {
    /// Generated inputs that use randomness are reseeded per seed.
    pub fn materialize(&self, seed: u64) -> Result<Target, HarnessError> {
        match self {
            InputSource::File(path) => load_file(Path::new(path)),
            InputSource::Gen(text) => generate(text, seed),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            InputSource::File(p) => format!("file:{p}"),
            InputSource::Gen(g) => g.clone(),
        }
    }
}

#[derive(Deserialize)]
struct FreqRecord {
    n: usize,
    entries: Vec<usize>,
}

/// Distribution (`{"n","probs"}`), density matrix (`{"n","re","im"}`) or
/// frequency vector (`{"n","entries"}`) JSON.
pub fn load_file(path: &Path) -> Result<Target, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    parse_json(&text).map_err(|e| HarnessError::Validation(format!("{}: {e}", path.display())))
}

pub fn parse_json(text: &str) -> Result<Target, HarnessError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| HarnessError::Validation(format!("malformed JSON: {e}")))?;
    let has = |k: &str| value.get(k).is_some();
    if has("probs") {
        Ok(Target::Distribution(Distribution::from_json(text)?))
    } else if has("re") {
        Ok(Target::Density(DensityMatrix::from_json(text)?))
    } else if has("entries") {
        let r: FreqRecord = serde_json::from_value(value).map_err(|e| HarnessError::Validation(e.to_string()))?;
        Ok(Target::Frequency(FrequencyVector::new(r.entries, r.n)?))
    } else {
        Err(HarnessError::Validation("expected one of the keys probs, re/im or entries".into()))
    }
}

fn num<T: std::str::FromStr>(parts: &[&str], i: usize, text: &str) -> Result<T, HarnessError> {
    parts
        .get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| HarnessError::Validation(format!("generator {text:?}: bad or missing argument {i}")))
}

/// Named generators, `name:arg:arg…`:
///
/// | name | arguments | result |
/// |---|---|---|
/// | `uniform` | n | uniform on n |
/// | `prefix` | n, k | uniform on the first k of n |
/// | `point` | n | point mass on label 0 |
/// | `zipf` | n, s | `p_i ∝ i^{−s}` |
/// | `dirichlet` | n, conc | symmetric Dirichlet draw |
/// | `halfheavy` | n | `(1/2, 1/(2(n−1)), …)` |
/// | `lb` | kind, n, param, p\|q | member of a lower-bound pair |
/// | `freq` | n, v₀,v₁,… | frequency vector |
/// | `rho-mixed` | n | `I/n` |
/// | `rho-diag` | n, conc | `diag(p)`, p Dirichlet |
/// | `rho-spectrum` | n, conc | Haar rotation of a Dirichlet spectrum |
/// | `rho-random` | n | Ginibre-induced state |
pub fn generate(text: &str, seed: u64) -> Result<Target, HarnessError> {
    let parts: Vec<&str> = text.split(':').collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = || num::<usize>(&parts, 1, text);
    let t = match parts[0] {
        "uniform" => Target::Distribution(Distribution::uniform(n()?)),
        "prefix" => Target::Distribution(Distribution::uniform_on_prefix(n()?, num(&parts, 2, text)?)?),
        "point" => Target::Distribution(Distribution::point_mass(n()?, 0)?),
        "zipf" => Target::Distribution(Distribution::zipf(n()?, num(&parts, 2, text)?)?),
        "dirichlet" => Target::Distribution(Distribution::dirichlet(n()?, num(&parts, 2, text)?, &mut rng)?),
        "halfheavy" => {
            let n = n()?;
            if n < 2 {
                return Err(HarnessError::Validation("halfheavy needs n ≥ 2".into()));
            }
            let mut v = vec![0.5 / (n - 1) as f64; n];
            v[0] = 0.5;
            Target::Distribution(Distribution::new(v)?)
        }
        "lb" => {
            let kind: LowerBoundKind = parts.get(1).copied().unwrap_or("").parse()?;
            let pair = gen_lower_bound_pair(kind, num(&parts, 2, text)?, num(&parts, 3, text)?)?;
            match parts.get(4).copied() {
                Some("p") => Target::Distribution(pair.p),
                Some("q") => Target::Distribution(pair.q),
                _ => return Err(HarnessError::Validation(format!("generator {text:?}: last argument must be p or q"))),
            }
        }
        "freq" => {
            let entries = parts
                .get(2)
                .ok_or_else(|| HarnessError::Validation(format!("generator {text:?}: missing entries")))?
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| HarnessError::Validation(format!("generator {text:?}: {e}")))?;
            Target::Frequency(FrequencyVector::new(entries, n()?)?)
        }
        "rho-mixed" => Target::Density(DensityMatrix::maximally_mixed(n()?)),
        "rho-diag" => Target::Density(DensityMatrix::diagonal(&Distribution::dirichlet(n()?, num(&parts, 2, text)?, &mut rng)?)),
        "rho-spectrum" => {
            let p = Distribution::dirichlet(n()?, num(&parts, 2, text)?, &mut rng)?;
            Target::Density(DensityMatrix::with_spectrum(&p, &mut rng))
        }
        "rho-random" => Target::Density(DensityMatrix::random(n()?, &mut rng)),
        other => return Err(HarnessError::Validation(format!("unknown generator {other:?}"))),
    };
    Ok(t)
}
