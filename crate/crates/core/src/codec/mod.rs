//! Block source code that lets every player reconstruct the full action
//! profile sequence from its private signals plus one public message, even
//! when one player deviates.
//!
//! A message carries, least significant digit first: the suspect index
//! (radix K), one color per stage (radix `chi_i`), then one payload per
//! action `a_i` in index order. Rare actions (`n_{a_i} <= n1`) send the
//! opponents' actions raw, one digit of radix `|A_{-i}|` per stage; frequent
//! actions send a single bin index. The packed value plus one is written in
//! base `|S_0|` over `n` symbols, most significant first; the all-zero word
//! is reserved for encoder errors.

mod accounting;
mod decode;
mod encode;
mod estimate;
pub mod hash;

pub use accounting::{rate_accounting, ChainCheck, RateAccounting};
pub use decode::{decode, DecodeFailure};
pub use encode::{encode, identify_suspect, EncodeFailure, EncodedMessage, Payload, Segment};
pub use estimate::{
    estimate_binning_collision, estimate_error_probability, simulate_trials, wilson_interval,
    write_trace_csv, CollisionEstimate, ErrorEstimate, EstimateMode, TrialRecord,
};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::constraint::compute_rstar_with;
use crate::error::{Error, Result};
use crate::game::{MonitoringStructure, ProductDistribution, StageGame};
use crate::graph::{Coloring, DEFAULT_SUPPORT_THRESHOLD, POSITIVITY_CUTOFF};
use crate::radix::MixedRadix;

/// Largest number of candidates a decoder scans in one binned segment.
pub const SEARCH_CAP: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    pub n: usize,
    /// Rate slack used for bin counts and the feasibility margin.
    pub epsilon: f64,
    /// Slack of the typicality tests; defaults to `epsilon`.
    pub typicality_epsilon: Option<f64>,
    /// Raw-segment threshold; defaults to `max(4, ceil(log2 n))`.
    pub raw_threshold: Option<usize>,
    pub seed: u64,
    #[serde(default = "default_support")]
    pub support_threshold: f64,
}

fn default_support() -> f64 {
    DEFAULT_SUPPORT_THRESHOLD
}

impl CodeParams {
    pub fn new(n: usize, epsilon: f64, seed: u64) -> Self {
        Self {
            n,
            epsilon,
            typicality_epsilon: None,
            raw_threshold: None,
            seed,
            support_threshold: DEFAULT_SUPPORT_THRESHOLD,
        }
    }

    pub fn with_typicality(mut self, eps: f64) -> Self {
        self.typicality_epsilon = Some(eps);
        self
    }

    pub fn with_raw_threshold(mut self, n1: usize) -> Self {
        self.raw_threshold = Some(n1);
        self
    }
}

pub fn default_raw_threshold(n: usize) -> usize {
    let log = (n.max(1) as f64).log2().ceil() as usize;
    log.max(4)
}

/// Serializable description of a code; everything else is derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodebookSpec {
    pub game: StageGame,
    pub monitoring: MonitoringStructure,
    pub pstar: ProductDistribution,
    pub params: CodeParams,
    pub rstar: f64,
    pub colorings: Vec<Coloring>,
    /// `rates[i][a_i] = max_k H(a_{-i,k} | s_k(a_i), a_k)`.
    pub rates: Vec<Vec<f64>>,
    pub raw_threshold: usize,
    pub typicality_epsilon: f64,
}

/// Per-deviator lookup tables.
#[derive(Debug, Clone)]
pub(crate) struct DeviatorTables {
    pub opponents: Vec<usize>,
    pub shape: MixedRadix,
    /// `P*_{-i}` over the opponents' shape.
    pub probs: Vec<f64>,
    /// `profile[a_i][x]`: full profile index.
    pub profile: Vec<Vec<usize>>,
    /// `joint[a_i][k][x * |S_k| + s]` = `P*_{-i}(x) ℸ(s | a_i, x)`.
    pub joint: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone)]
pub struct Codebook {
    spec: CodebookSpec,
    tables: Vec<DeviatorTables>,
}

impl PartialEq for Codebook {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

/// Builds the code. Refuses when `R* + 2 eps > log2 |S_0|`.
pub fn build_code(
    game: &StageGame,
    monitoring: &MonitoringStructure,
    pstar: &ProductDistribution,
    params: CodeParams,
) -> Result<Codebook> {
    if params.n == 0 {
        return Err(Error::InvalidArgument("block length must be at least 1".into()));
    }
    if !(params.epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {}",
            params.epsilon
        )));
    }
    let raw_threshold = params
        .raw_threshold
        .unwrap_or_else(|| default_raw_threshold(params.n));
    if raw_threshold == 0 {
        return Err(Error::InvalidArgument("raw threshold must be at least 1".into()));
    }
    let typicality_epsilon = params.typicality_epsilon.unwrap_or(params.epsilon);
    if typicality_epsilon < 0.0 {
        return Err(Error::InvalidArgument("typicality epsilon must be nonnegative".into()));
    }
    let report = compute_rstar_with(game, monitoring, pstar, params.support_threshold)?;
    let required = report.rstar + 2.0 * params.epsilon;
    if required > report.threshold {
        return Err(Error::RateInfeasible {
            rstar: report.rstar,
            epsilon: params.epsilon,
            required,
            threshold: report.threshold,
        });
    }
    let rates = (0..game.players())
        .map(|i| {
            (0..game.action_count(i))
                .map(|a| report.max_term_for_action(i, a))
                .collect()
        })
        .collect();
    let spec = CodebookSpec {
        game: game.clone(),
        monitoring: monitoring.clone(),
        pstar: pstar.clone(),
        params,
        rstar: report.rstar,
        colorings: report.colorings,
        rates,
        raw_threshold,
        typicality_epsilon,
    };
    Ok(Codebook::from_valid_spec(spec))
}

impl Codebook {
    fn from_valid_spec(spec: CodebookSpec) -> Self {
        let game = &spec.game;
        let tables = (0..game.players())
            .map(|i| {
                let opponents: Vec<usize> = (0..game.players()).filter(|&j| j != i).collect();
                let shape = game.opponents_shape(i);
                let probs = spec.pstar.opponents(game, i);
                let profile: Vec<Vec<usize>> = (0..game.action_count(i))
                    .map(|a| {
                        (0..shape.size())
                            .map(|x| game.join_profile(i, a, &shape.digits(x)))
                            .collect()
                    })
                    .collect();
                let joint = (0..game.action_count(i))
                    .map(|a| {
                        (0..game.players())
                            .map(|k| {
                                let ns = spec.monitoring.signal_count(k);
                                let mut v = vec![0.0; shape.size() * ns];
                                for x in 0..shape.size() {
                                    for s in 0..ns {
                                        v[x * ns + s] = probs[x]
                                            * spec.monitoring.signal_prob(profile[a][x], k, s);
                                    }
                                }
                                v
                            })
                            .collect()
                    })
                    .collect();
                DeviatorTables {
                    opponents,
                    shape,
                    probs,
                    profile,
                    joint,
                }
            })
            .collect();
        Self { spec, tables }
    }

    pub fn spec(&self) -> &CodebookSpec {
        &self.spec
    }

    pub fn game(&self) -> &StageGame {
        &self.spec.game
    }

    pub fn monitoring(&self) -> &MonitoringStructure {
        &self.spec.monitoring
    }

    pub fn pstar(&self) -> &ProductDistribution {
        &self.spec.pstar
    }

    pub fn n(&self) -> usize {
        self.spec.params.n
    }

    pub fn epsilon(&self) -> f64 {
        self.spec.params.epsilon
    }

    pub fn typicality_epsilon(&self) -> f64 {
        self.spec.typicality_epsilon
    }

    pub fn raw_threshold(&self) -> usize {
        self.spec.raw_threshold
    }

    pub fn seed(&self) -> u64 {
        self.spec.params.seed
    }

    pub fn rstar(&self) -> f64 {
        self.spec.rstar
    }

    pub fn public_alphabet_size(&self) -> usize {
        self.spec.monitoring.public_alphabet_size()
    }

    pub fn threshold(&self) -> f64 {
        (self.public_alphabet_size() as f64).log2()
    }

    pub fn coloring(&self, i: usize) -> &Coloring {
        &self.spec.colorings[i]
    }

    pub fn rate(&self, i: usize, a_i: usize) -> f64 {
        self.spec.rates[i][a_i]
    }

    pub(crate) fn tables(&self, i: usize) -> &DeviatorTables {
        &self.tables[i]
    }

    /// `|S_0|^n`.
    pub fn capacity(&self) -> BigUint {
        BigUint::from(self.public_alphabet_size()).pow(self.n() as u32)
    }

    /// `ceil(2^{m (rate(i, a_i) + eps)})`.
    pub fn bin_count(&self, i: usize, a_i: usize, m: usize) -> BigUint {
        ceil_pow2(m as f64 * (self.rate(i, a_i) + self.epsilon()))
    }

    /// Candidate opponent symbols a decoder `k` scans at one stage: support
    /// of `P*_{-i}`, with `k`'s own component fixed when `k != i`.
    pub(crate) fn candidate_symbols(&self, i: usize, k: usize, own: usize) -> Vec<usize> {
        let t = &self.tables[i];
        let pos = t.opponents.iter().position(|&j| j == k);
        (0..t.shape.size())
            .filter(|&x| t.probs[x] > self.spec.params.support_threshold)
            .filter(|&x| pos.is_none_or(|p| t.shape.digit(x, p) == own))
            .collect()
    }

    /// Whether `a_i` is consistent with decoder `k`'s signal at one stage.
    pub(crate) fn action_plausible(&self, i: usize, k: usize, a_i: usize, own: usize, signal: usize) -> bool {
        let t = &self.tables[i];
        self.candidate_symbols(i, k, own).into_iter().any(|x| {
            self.spec.monitoring.signal_prob(t.profile[a_i][x], k, signal) > POSITIVITY_CUTOFF
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.spec)
            .map_err(|e| Error::InvalidArgument(format!("codebook serialization failed: {e}")))
    }

    /// Rebuilds a codebook from JSON and checks it against a fresh build.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: CodebookSpec = serde_json::from_str(text)
            .map_err(|e| Error::InvalidArgument(format!("codebook parse failed: {e}")))?;
        let rebuilt = build_code(&spec.game, &spec.monitoring, &spec.pstar, spec.params.clone())?;
        if rebuilt.spec.colorings != spec.colorings
            || rebuilt.spec.raw_threshold != spec.raw_threshold
            || rebuilt.spec.typicality_epsilon != spec.typicality_epsilon
            || rebuilt
                .spec
                .rates
                .iter()
                .flatten()
                .zip(spec.rates.iter().flatten())
                .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::InvalidArgument(
                "codebook does not match a rebuild from its own parameters".into(),
            ));
        }
        Ok(rebuilt)
    }
}

/// `ceil(2^x)` for `x >= 0`.
pub fn ceil_pow2(x: f64) -> BigUint {
    if x <= 0.0 {
        return BigUint::one();
    }
    if x < 52.0 {
        return BigUint::from(x.exp2().ceil() as u64);
    }
    let e = x.floor() as u64;
    let frac = x - e as f64;
    // 2^frac with 52 fractional bits, rounded up
    let mant = (frac.exp2() * (1u64 << 52) as f64).ceil() as u64;
    let v = BigUint::from(mant) << (e - 52);
    v.max(BigUint::one())
}

/// `log2` of a positive big integer.
pub fn log2_big(v: &BigUint) -> f64 {
    let bits = v.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return v.to_u64().expect("fits").to_f64().expect("finite").log2();
    }
    let shift = bits - 64;
    let top = (v >> shift).to_u64().expect("fits") as f64;
    top.log2() + shift as f64
}
