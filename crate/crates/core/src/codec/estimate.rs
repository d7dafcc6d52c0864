use std::io::Write;

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::decode::{decode, DecodeFailure};
use super::encode::{encode, identify_suspect, opponent_symbol, EncodeFailure, Payload};
use super::hash::SegmentHash;
use super::Codebook;
use crate::deviation::{ActionSampler, DeviationSpec};
use crate::error::{Error, Result};
use crate::game::sample_index;
use crate::info::{counts, counts_typical, JointDistribution};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    /// Encode and run every decoder.
    Full,
    /// Only the statistical test; a trial errs when the suspect is wrong.
    SuspectOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub trials: usize,
    /// Trials where some decoder did not return the true sequence.
    pub mismatches: usize,
    pub e1: usize,
    pub e2: usize,
    pub suspect_misidentified: usize,
    pub overflow: usize,
    pub stage_ambiguity: usize,
    /// Encoder-declared errors (also counted in `e1`).
    pub encoder_errors: usize,
    pub search_too_large: usize,
    pub per_decoder: Vec<usize>,
    pub estimate: f64,
    pub ci95: (f64, f64),
    /// Sum over decoders of the per-decoder error rates.
    pub decoder_sum: f64,
}

impl ErrorEstimate {
    /// Upper bound on the mismatches implied by the error classes.
    pub fn classified(&self) -> usize {
        self.e1 + self.e2 + self.suspect_misidentified + self.overflow + self.stage_ambiguity
            + self.search_too_large
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub deviation: String,
    pub deviator: Option<usize>,
    pub suspect: usize,
    pub error_class: String,
    pub mismatch: bool,
}

#[derive(Debug, Clone, Default)]
struct Flags {
    mismatch: bool,
    e1: bool,
    e2: bool,
    suspect: bool,
    overflow: bool,
    stage: bool,
    encoder: bool,
    search: bool,
    unclassified: bool,
    decoders: Vec<bool>,
}

impl Flags {
    fn class(&self) -> &'static str {
        if !self.mismatch {
            "none"
        } else if self.overflow {
            "overflow"
        } else if self.encoder {
            "encoder_error"
        } else if self.search {
            "search_too_large"
        } else if self.suspect {
            "suspect"
        } else if self.stage {
            "stage_ambiguity"
        } else if self.e1 {
            "e1"
        } else if self.e2 {
            "e2"
        } else {
            "unclassified"
        }
    }
}

/// Wilson score interval at 95%.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let den = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / den;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

fn run_trial(
    code: &Codebook,
    deviation: Option<&DeviationSpec>,
    trial: u64,
    master_seed: u64,
    mode: EstimateMode,
) -> (TrialRecord, Flags) {
    let game = code.game();
    let monitoring = code.monitoring();
    let n = code.n();
    let players = game.players();
    let trial_seed = seed::derive(&[master_seed, trial]);
    let mut rng = seed::stream(master_seed, trial);
    let mut sampler = ActionSampler::new(code.pstar().clone(), deviation.cloned(), n);
    let mut profiles = Vec::with_capacity(n);
    let mut signals = vec![Vec::with_capacity(n); players];
    let mut digits = vec![0; players];
    for t in 0..n {
        for (k, d) in digits.iter_mut().enumerate() {
            *d = sampler.action(k, t, &mut rng);
        }
        let a = game.profiles().index(&digits);
        profiles.push(a);
        let s = monitoring.sample(a, &mut rng);
        for (k, sig) in signals.iter_mut().enumerate() {
            sig.push(monitoring.signals().digit(s, k));
        }
    }
    let deviator = deviation.map(|d| d.player);
    let suspect = identify_suspect(game, code.pstar(), &profiles);
    let mut f = Flags {
        decoders: vec![false; players],
        ..Flags::default()
    };
    f.suspect = deviator.is_some_and(|d| d != suspect);
    match mode {
        EstimateMode::SuspectOnly => {
            f.mismatch = f.suspect;
        }
        EstimateMode::Full => match encode(code, &profiles) {
            Err(EncodeFailure::CapacityOverflow { .. }) => {
                f.overflow = true;
                f.mismatch = true;
                f.decoders.iter_mut().for_each(|d| *d = true);
            }
            Err(EncodeFailure::AtypicalSegment { .. }) => {
                f.encoder = true;
                f.e1 = true;
                f.mismatch = true;
                f.decoders.iter_mut().for_each(|d| *d = true);
            }
            Err(EncodeFailure::Invalid(e)) => panic!("simulated sequence rejected: {e}"),
            Ok(msg) => {
                let i = msg.suspect;
                let tables = code.tables(i);
                // E1: a true binned pair that is not jointly typical for some decoder
                for seg in &msg.segments {
                    if !matches!(seg.payload, Payload::Binned { .. }) {
                        continue;
                    }
                    for k in 0..players {
                        let ns = monitoring.signal_count(k);
                        let pairs: Vec<usize> = seg
                            .stages
                            .iter()
                            .map(|&t| opponent_symbol(code, i, profiles[t]) * ns + signals[k][t])
                            .collect();
                        let joint = &tables.joint[seg.action][k];
                        let c = counts(&pairs, joint.len()).expect("in range");
                        if !counts_typical(&c, joint, code.typicality_epsilon()) {
                            f.e1 = true;
                        }
                    }
                }
                for k in 0..players {
                    let own: Vec<usize> = profiles.iter().map(|&a| game.profiles().digit(a, k)).collect();
                    let out = decode(code, k, &msg.public, &signals[k], &own);
                    let wrong = out.as_ref() != Ok(&profiles);
                    f.decoders[k] = wrong;
                    if !wrong {
                        continue;
                    }
                    f.mismatch = true;
                    match out {
                        Err(DecodeFailure::Collision { .. }) => f.e2 = true,
                        Err(DecodeFailure::NoCandidate { .. }) => f.e1 = true,
                        Err(DecodeFailure::StageAmbiguity { .. }) => f.stage = true,
                        Err(DecodeFailure::SearchTooLarge { .. }) => f.search = true,
                        Err(_) => f.unclassified = true,
                        Ok(_) => {
                            if !(f.e1 || f.suspect) {
                                f.unclassified = true;
                            }
                        }
                    }
                }
            }
        },
    }
    let record = TrialRecord {
        trial,
        seed: trial_seed,
        deviation: deviation.map_or_else(|| "none".to_string(), DeviationSpec::label),
        deviator,
        suspect,
        error_class: f.class().to_string(),
        mismatch: f.mismatch,
    };
    (record, f)
}

/// Monte Carlo error estimate with a per-trial trace. Trials run in
/// parallel; each uses its own generator derived from `(master_seed, trial)`.
pub fn simulate_trials(
    code: &Codebook,
    deviation: Option<&DeviationSpec>,
    trials: usize,
    master_seed: u64,
    mode: EstimateMode,
) -> Result<(ErrorEstimate, Vec<TrialRecord>)> {
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    if let Some(d) = deviation {
        d.validate(code.game())?;
    }
    let outcomes: Vec<(TrialRecord, Flags)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(code, deviation, t, master_seed, mode))
        .collect();
    let players = code.game().players();
    let count = |f: fn(&Flags) -> bool| outcomes.iter().filter(|(_, x)| f(x)).count();
    let per_decoder: Vec<usize> = (0..players)
        .map(|k| outcomes.iter().filter(|(_, x)| x.decoders[k]).count())
        .collect();
    let mismatches = count(|x| x.mismatch);
    let unclassified = count(|x| x.unclassified);
    debug_assert_eq!(unclassified, 0);
    let estimate = ErrorEstimate {
        trials,
        mismatches,
        e1: count(|x| x.e1),
        e2: count(|x| x.e2),
        suspect_misidentified: count(|x| x.suspect),
        overflow: count(|x| x.overflow),
        stage_ambiguity: count(|x| x.stage),
        encoder_errors: count(|x| x.encoder),
        search_too_large: count(|x| x.search),
        estimate: mismatches as f64 / trials as f64,
        ci95: wilson_interval(mismatches, trials),
        decoder_sum: per_decoder.iter().sum::<usize>() as f64 / trials as f64,
        per_decoder,
    };
    Ok((estimate, outcomes.into_iter().map(|(r, _)| r).collect()))
}

pub fn estimate_error_probability(
    code: &Codebook,
    deviation: Option<&DeviationSpec>,
    trials: usize,
    master_seed: u64,
    mode: EstimateMode,
) -> Result<ErrorEstimate> {
    simulate_trials(code, deviation, trials, master_seed, mode).map(|(e, _)| e)
}

/// Columns: `trial, seed, deviation, deviator, suspect, error_class, mismatch`.
pub fn write_trace_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv write failed: {e}"));
    w.write_record(["trial", "seed", "deviation", "deviator", "suspect", "error_class", "mismatch"])
        .map_err(io)?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            r.deviation.clone(),
            r.deviator.map_or_else(String::new, |d| (d + 1).to_string()),
            (r.suspect + 1).to_string(),
            r.error_class.clone(),
            r.mismatch.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidArgument(format!("csv write failed: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEstimate {
    pub segment_length: usize,
    pub bins: String,
    pub receiver: usize,
    pub trials: usize,
    /// Draws that fall in the true bin and are jointly typical.
    pub collisions: usize,
    pub rate: f64,
    pub ci95: (f64, f64),
    /// Independent draws jointly typical with the side information, any bin.
    pub typical_pairs: usize,
    pub typical_pair_rate: f64,
    /// `min_k I(a_{-i}; s_k(a_i), a_k)` in bits.
    pub packing_exponent: f64,
    /// `log2(bins) / m`: bits per stage spent on the bin index.
    pub bin_rate: f64,
}

/// Probability that an independent `P*_{-i}` sequence lands in the true
/// sequence's bin and is jointly typical with fresh side information of the
/// bottleneck receiver.
pub fn estimate_binning_collision(
    code: &Codebook,
    i: usize,
    a_i: usize,
    m: usize,
    trials: usize,
    seed_value: u64,
    bins_override: Option<BigUint>,
) -> Result<CollisionEstimate> {
    let game = code.game();
    game.check_player(i)?;
    if a_i >= game.action_count(i) {
        return Err(Error::InvalidArgument(format!("action {a_i} out of range")));
    }
    if m <= code.raw_threshold() {
        return Err(Error::InvalidArgument(format!(
            "not applicable: a segment of length {m} is sent raw (threshold {})",
            code.raw_threshold()
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("at least one trial is required".into()));
    }
    let tables = code.tables(i);
    let monitoring = code.monitoring();
    // bottleneck receiver: largest conditional entropy, lowest index on ties
    let mut receiver = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut packing = f64::INFINITY;
    for k in 0..game.players() {
        let ns = monitoring.signal_count(k);
        let mut axes = vec![1];
        let mut sizes = vec![tables.shape.size(), ns];
        let mut probs = tables.joint[a_i][k].clone();
        if let Some(pos) = tables.opponents.iter().position(|&x| x == k) {
            // append a_k as its own axis so it joins the side information
            let na = game.action_count(k);
            let mut ext = vec![0.0; tables.shape.size() * ns * na];
            for x in 0..tables.shape.size() {
                let ak = tables.shape.digit(x, pos);
                for s in 0..ns {
                    ext[(x * ns + s) * na + ak] = probs[x * ns + s];
                }
            }
            probs = ext;
            sizes.push(na);
            axes.push(2);
        }
        let full = JointDistribution::new(sizes, probs)?;
        let h = full.conditional_entropy(&[0], &axes)?;
        packing = packing.min(full.mutual_information(&[0], &axes)?);
        if h > worst + 1e-12 {
            worst = h;
            receiver = k;
        }
    }
    let bins = bins_override.unwrap_or_else(|| code.bin_count(i, a_i, m));
    if bins == BigUint::from(0u8) {
        return Err(Error::InvalidArgument("bin count must be positive".into()));
    }
    let hash = SegmentHash::new(code.seed(), i, a_i, m, bins.clone());
    let ns = monitoring.signal_count(receiver);
    let joint = &tables.joint[a_i][receiver];
    let eps = code.typicality_epsilon();
    let results: Vec<(bool, bool)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::stream(seed_value, t);
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<usize> {
                (0..m).map(|_| sample_index(&tables.probs, rng)).collect()
            };
            let truth = draw(&mut rng);
            let side: Vec<usize> = truth
                .iter()
                .map(|&x| {
                    let row: Vec<f64> = (0..ns)
                        .map(|s| monitoring.signal_prob(tables.profile[a_i][x], receiver, s))
                        .collect();
                    sample_index(&row, &mut rng)
                })
                .collect();
            let other = draw(&mut rng);
            let pairs: Vec<usize> = other.iter().zip(&side).map(|(&x, &s)| x * ns + s).collect();
            let c = counts(&pairs, joint.len()).expect("in range");
            let mut typical = counts_typical(&c, joint, eps);
            if let Some(pos) = tables.opponents.iter().position(|&x| x == receiver) {
                // the receiver knows its own actions
                typical &= other
                    .iter()
                    .zip(&truth)
                    .all(|(&x, &y)| tables.shape.digit(x, pos) == tables.shape.digit(y, pos));
            }
            let same_bin = hash.bin(&other) == hash.bin(&truth);
            (typical && same_bin, typical)
        })
        .collect();
    let collisions = results.iter().filter(|r| r.0).count();
    let typical_pairs = results.iter().filter(|r| r.1).count();
    Ok(CollisionEstimate {
        segment_length: m,
        bin_rate: super::log2_big(&bins) / m as f64,
        bins: bins.to_string(),
        receiver,
        trials,
        collisions,
        rate: collisions as f64 / trials as f64,
        ci95: wilson_interval(collisions, trials),
        typical_pairs,
        typical_pair_rate: typical_pairs as f64 / trials as f64,
        packing_exponent: packing,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{build_code, CodeParams};
    use super::*;
    use crate::deviation::DeviationKind;
    use crate::game::{MonitoringStructure, ProductDistribution, StageGame};

    fn pd_code(n: usize, eps: f64, typ: f64) -> Codebook {
        let g = StageGame::prisoners_dilemma();
        let m = MonitoringStructure::fig3(&g, 0.5, 3).unwrap();
        let p = ProductDistribution::for_game(&g, vec![vec![0.9, 0.1], vec![0.9, 0.1]]).unwrap();
        build_code(&g, &m, &p, CodeParams::new(n, eps, 9).with_typicality(typ)).unwrap()
    }

    #[test]
    fn wilson_sane() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && hi > 0.5 && (hi - lo - 0.19).abs() < 0.01);
        assert_eq!(wilson_interval(0, 10).0, 0.0);
    }

    #[test]
    fn decomposition_complete_and_deterministic() {
        let code = pd_code(12, 0.05, 0.3);
        let dev = DeviationSpec::new(0, DeviationKind::Constant { action: 1 });
        for d in [None, Some(&dev)] {
            let (a, ta) = simulate_trials(&code, d, 300, 4, EstimateMode::Full).unwrap();
            let (b, tb) = simulate_trials(&code, d, 300, 4, EstimateMode::Full).unwrap();
            assert_eq!(a, b);
            assert_eq!(ta, tb);
            assert!(a.mismatches <= a.classified());
            assert!(ta.iter().all(|r| r.error_class != "unclassified"));
            assert!(a.per_decoder.iter().all(|&c| c <= a.mismatches));
            assert!(a.encoder_errors <= a.e1);
        }
        assert!(simulate_trials(&code, None, 0, 4, EstimateMode::Full).is_err());
    }

    #[test]
    fn suspect_only_mode() {
        let code = pd_code(16, 0.05, 0.05);
        let dev = DeviationSpec::new(1, DeviationKind::Constant { action: 1 });
        let e = estimate_error_probability(&code, Some(&dev), 200, 1, EstimateMode::SuspectOnly).unwrap();
        assert_eq!(e.mismatches, e.suspect_misidentified);
        assert!(e.suspect_misidentified <= 20);
        let mut out = vec![];
        let (_, trace) = simulate_trials(&code, Some(&dev), 3, 1, EstimateMode::SuspectOnly).unwrap();
        write_trace_csv(&trace, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("trial,seed,deviation,deviator,suspect,error_class,mismatch\n"));
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn collision_basics() {
        let code = pd_code(16, 0.05, 0.3);
        assert!(estimate_binning_collision(&code, 0, 0, 3, 10, 1, None).is_err());
        let one = estimate_binning_collision(&code, 0, 0, 12, 2000, 1, Some(BigUint::from(1u8))).unwrap();
        assert_eq!(one.collisions, one.typical_pairs);
        assert_eq!(one.receiver, 0);
        // I(a_2; s_1) for a flip-1/4 channel with P = (0.9, 0.1)
        let oracle = crate::info::entropy(&[0.9, 0.1]) - 0.398983;
        assert!((one.packing_exponent - oracle).abs() < 1e-5);
    }
}
