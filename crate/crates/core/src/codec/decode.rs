use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use super::hash::SegmentHash;
use super::{Codebook, SEARCH_CAP};
use crate::error::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum DecodeFailure {
    Invalid(Error),
    /// The reserved word: the encoder declared an error.
    Reserved,
    /// The index does not parse under the code (corrupted word).
    InvalidIndex,
    /// No action of the announced color is consistent with the signal.
    StageAmbiguity { stage: usize, candidates: usize },
    /// No jointly typical sequence in the announced bin.
    NoCandidate { action: usize },
    /// Several jointly typical sequences in the announced bin.
    Collision { action: usize, candidates: usize },
    SearchTooLarge { action: usize, size: f64 },
    /// The decoded sequence contradicts the decoder's own actions.
    Inconsistent { stage: usize },
}

impl DecodeFailure {
    pub fn class(&self) -> &'static str {
        match self {
            DecodeFailure::Invalid(_) => "invalid",
            DecodeFailure::Reserved => "reserved",
            DecodeFailure::InvalidIndex => "invalid_index",
            DecodeFailure::StageAmbiguity { .. } => "stage_ambiguity",
            DecodeFailure::NoCandidate { .. } => "no_candidate",
            DecodeFailure::Collision { .. } => "collision",
            DecodeFailure::SearchTooLarge { .. } => "search_too_large",
            DecodeFailure::Inconsistent { .. } => "inconsistent",
        }
    }
}

fn take(v: &mut BigUint, radix: &BigUint) -> BigUint {
    let d = &*v % radix;
    *v /= radix;
    d
}

/// Decoder of player `k`: rebuilds the profile sequence from the public
/// word, its own signals `s_k^n` and its own actions `a_k^n`.
pub fn decode(
    code: &Codebook,
    k: usize,
    public: &[usize],
    signals: &[usize],
    own_actions: &[usize],
) -> Result<Vec<usize>, DecodeFailure> {
    let game = code.game();
    let n = code.n();
    if k >= game.players() {
        return Err(DecodeFailure::Invalid(Error::PlayerIndex {
            index: k,
            players: game.players(),
        }));
    }
    for len in [public.len(), signals.len(), own_actions.len()] {
        if len != n {
            return Err(DecodeFailure::Invalid(Error::LengthMismatch { left: len, right: n }));
        }
    }
    let q = code.public_alphabet_size();
    if public.iter().any(|&s| s >= q) {
        return Err(DecodeFailure::InvalidIndex);
    }
    let index = public
        .iter()
        .fold(BigUint::zero(), |acc, &s| acc * q + s);
    if index.is_zero() {
        return Err(DecodeFailure::Reserved);
    }
    let mut v = index - 1u8;
    let i = take(&mut v, &BigUint::from(game.players()))
        .to_usize()
        .expect("small");
    let coloring = code.coloring(i);
    let chi = BigUint::from(coloring.count);
    let colors: Vec<usize> = (0..n)
        .map(|_| take(&mut v, &chi).to_usize().expect("small"))
        .collect();

    // the suspect's actions, stage by stage
    let mut actions = Vec::with_capacity(n);
    for t in 0..n {
        if k == i {
            actions.push(own_actions[t]);
            continue;
        }
        let fits: Vec<usize> = (0..game.action_count(i))
            .filter(|&a| coloring.colors[a] == colors[t])
            .filter(|&a| code.action_plausible(i, k, a, own_actions[t], signals[t]))
            .collect();
        if fits.len() != 1 {
            return Err(DecodeFailure::StageAmbiguity {
                stage: t,
                candidates: fits.len(),
            });
        }
        actions.push(fits[0]);
    }

    let tables = code.tables(i);
    let opp = BigUint::from(tables.shape.size());
    let mut segments = vec![vec![]; game.action_count(i)];
    for (t, &a) in actions.iter().enumerate() {
        segments[a].push(t);
    }
    let mut symbols = vec![usize::MAX; n];
    let mut binned = vec![];
    for (a, stages) in segments.iter().enumerate() {
        let m = stages.len();
        if m == 0 {
            continue;
        }
        if m <= code.raw_threshold() {
            for &t in stages {
                symbols[t] = take(&mut v, &opp).to_usize().expect("small");
            }
        } else {
            let bins = code.bin_count(i, a, m);
            binned.push((a, take(&mut v, &bins), bins));
        }
    }
    if !v.is_zero() {
        return Err(DecodeFailure::InvalidIndex);
    }
    for (a, bin, bins) in binned {
        let stages = &segments[a];
        let found = search_bin(code, i, k, a, stages, &bin, bins, signals, own_actions)?;
        for (&t, x) in stages.iter().zip(found) {
            symbols[t] = x;
        }
    }
    let out: Vec<usize> = actions
        .iter()
        .zip(&symbols)
        .map(|(&a, &x)| tables.profile[a][x])
        .collect();
    if let Some(t) = (0..n).find(|&t| game.profiles().digit(out[t], k) != own_actions[t]) {
        return Err(DecodeFailure::Inconsistent { stage: t });
    }
    Ok(out)
}

/// All sequences in the bin that are jointly typical with the decoder's
/// side information; the unique one is returned.
#[allow(clippy::too_many_arguments)]
fn search_bin(
    code: &Codebook,
    i: usize,
    k: usize,
    a: usize,
    stages: &[usize],
    bin: &BigUint,
    bins: BigUint,
    signals: &[usize],
    own_actions: &[usize],
) -> Result<Vec<usize>, DecodeFailure> {
    let found = scan_bin(code, i, k, a, stages, bin, bins, signals, own_actions, 2)?;
    match found.len() {
        0 => Err(DecodeFailure::NoCandidate { action: a }),
        1 => Ok(found.into_iter().next().expect("one")),
        c => Err(DecodeFailure::Collision {
            action: a,
            candidates: c,
        }),
    }
}

/// Enumerates candidate sequences, keeping at most `limit` matches.
#[allow(clippy::too_many_arguments)]
pub(crate) fn scan_bin(
    code: &Codebook,
    i: usize,
    k: usize,
    a: usize,
    stages: &[usize],
    bin: &BigUint,
    bins: BigUint,
    signals: &[usize],
    own_actions: &[usize],
    limit: usize,
) -> Result<Vec<Vec<usize>>, DecodeFailure> {
    let m = stages.len();
    let tables = code.tables(i);
    let ns = code.monitoring().signal_count(k);
    let joint = &tables.joint[a][k];
    let lists: Vec<Vec<usize>> = stages
        .iter()
        .map(|&t| code.candidate_symbols(i, k, own_actions[t]))
        .collect();
    let size: f64 = lists.iter().map(|l| l.len() as f64).product();
    if size > SEARCH_CAP as f64 {
        return Err(DecodeFailure::SearchTooLarge { action: a, size });
    }
    if lists.iter().any(Vec::is_empty) {
        return Ok(vec![]);
    }
    let hash = SegmentHash::new(code.seed(), i, a, m, bins);
    let mut choice = vec![0usize; m];
    let mut seq: Vec<usize> = lists.iter().map(|l| l[0]).collect();
    let mut state = hash.state(&seq);
    let sig: Vec<usize> = stages.iter().map(|&t| signals[t]).collect();
    let mut pair_counts = vec![0usize; joint.len()];
    let eps = code.typicality_epsilon();
    let mut found = vec![];
    loop {
        if hash.state_in_bin(&state, bin) {
            pair_counts.iter_mut().for_each(|c| *c = 0);
            for (x, s) in seq.iter().zip(&sig) {
                pair_counts[x * ns + s] += 1;
            }
            if crate::info::counts_typical(&pair_counts, joint, eps) {
                found.push(seq.clone());
                if found.len() >= limit {
                    return Ok(found);
                }
            }
        }
        // odometer step
        let mut t = 0;
        loop {
            if t == m {
                return Ok(found);
            }
            let old = seq[t];
            choice[t] += 1;
            if choice[t] == lists[t].len() {
                choice[t] = 0;
            }
            seq[t] = lists[t][choice[t]];
            hash.update(&mut state, t, old, seq[t]);
            if choice[t] != 0 {
                break;
            }
            t += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::{build_code, encode, CodeParams};
    use super::*;
    use crate::game::{MonitoringStructure, ProductDistribution, StageGame};

    fn signals_for(code: &Codebook, profiles: &[usize], k: usize, rng: &mut impl rand::Rng) -> Vec<usize> {
        profiles
            .iter()
            .map(|&a| {
                let s = code.monitoring().sample(a, rng);
                code.monitoring().signals().digit(s, k)
            })
            .collect()
    }

    #[test]
    fn exhaustive_roundtrip_deterministic_channel() {
        let g = StageGame::prisoners_dilemma();
        let m = MonitoringStructure::fig3(&g, 0.0, 4).unwrap();
        let p = ProductDistribution::uniform(&g);
        let code = build_code(&g, &m, &p, CodeParams::new(4, 0.05, 3).with_raw_threshold(4)).unwrap();
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        for x in 0..256usize {
            let seq: Vec<usize> = (0..4).map(|t| x >> (2 * t) & 3).collect();
            let e = encode(&code, &seq).unwrap();
            for k in 0..2 {
                let s = signals_for(&code, &seq, k, &mut rng);
                let own: Vec<usize> = seq.iter().map(|&a| g.profiles().digit(a, k)).collect();
                assert_eq!(decode(&code, k, &e.public, &s, &own).unwrap(), seq);
            }
        }
    }

    #[test]
    fn corrupted_word_fails_or_decodes_consistently() {
        let g = StageGame::prisoners_dilemma();
        let m = MonitoringStructure::fig3(&g, 0.0, 4).unwrap();
        let p = ProductDistribution::uniform(&g);
        let code = build_code(&g, &m, &p, CodeParams::new(4, 0.05, 3)).unwrap();
        let seq = vec![0, 3, 1, 2];
        let e = encode(&code, &seq).unwrap();
        let mut rng = rand::rngs::mock::StepRng::new(0, 1);
        let mut failures = 0;
        for pos in 0..4 {
            for delta in 1..4 {
                let mut w = e.public.clone();
                w[pos] = (w[pos] + delta) % 4;
                for k in 0..2 {
                    let s = signals_for(&code, &seq, k, &mut rng);
                    let own: Vec<usize> = seq.iter().map(|&a| g.profiles().digit(a, k)).collect();
                    match decode(&code, k, &w, &s, &own) {
                        Err(_) => failures += 1,
                        // any output is a well-formed sequence consistent with k's view
                        Ok(d) => {
                            assert_eq!(d.len(), 4);
                            for (t, &a) in d.iter().enumerate() {
                                assert_eq!(g.profiles().digit(a, k), own[t]);
                            }
                        }
                    }
                }
            }
        }
        assert!(failures > 0);
        let s = vec![0; 4];
        assert_eq!(decode(&code, 0, &[0; 4], &s, &s), Err(DecodeFailure::Reserved));
    }
}
