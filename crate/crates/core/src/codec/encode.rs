use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};

use super::hash::SegmentHash;
use super::Codebook;
use crate::error::Error;
use crate::game::{ProductDistribution, StageGame};
use crate::info::{counts, counts_typical, type_distance};

/// Statistical test: the player `k` whose opponents' empirical type is
/// closest in L1 to `P*_{-k}`. Ties go to the lowest index.
pub fn identify_suspect(game: &StageGame, pstar: &ProductDistribution, profiles: &[usize]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for k in 0..game.players() {
        let shape = game.opponents_shape(k);
        let others: Vec<usize> = (0..game.players()).filter(|&j| j != k).collect();
        let mut c = vec![0usize; shape.size()];
        for &a in profiles {
            let x: usize = others
                .iter()
                .zip(shape.strides())
                .map(|(&j, s)| game.profiles().digit(a, j) * s)
                .sum();
            c[x] += 1;
        }
        let d = type_distance(&c, &pstar.opponents(game, k));
        if d < best.0 - 1e-12 {
            best = (d, k);
        }
    }
    best.1
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Opponent symbols, one per stage of the segment.
    Raw(Vec<usize>),
    Binned { bin: BigUint, bins: BigUint },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub action: usize,
    /// Stages (in order) where the suspect played `action`.
    pub stages: Vec<usize>,
    pub payload: Payload,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMessage {
    pub suspect: usize,
    pub colors: Vec<usize>,
    pub segments: Vec<Segment>,
    /// Packed value plus one.
    pub index: BigUint,
    /// Base-`|S_0|` rendering of `index`, most significant symbol first.
    pub public: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EncodeFailure {
    Invalid(Error),
    /// A binned segment is not typical for `P*_{-i}`.
    AtypicalSegment { suspect: usize, action: usize },
    /// The message space does not fit in `|S_0|^n` words.
    CapacityOverflow { suspect: usize, needed_bits: f64, available_bits: f64 },
}

impl EncodeFailure {
    pub fn class(&self) -> &'static str {
        match self {
            EncodeFailure::Invalid(_) => "invalid",
            EncodeFailure::AtypicalSegment { .. } => "encoder_error",
            EncodeFailure::CapacityOverflow { .. } => "overflow",
        }
    }
}

/// Splits the stages by the suspect's action.
pub(crate) fn split_segments(code: &Codebook, i: usize, profiles: &[usize]) -> Vec<Vec<usize>> {
    let game = code.game();
    let mut seg = vec![vec![]; game.action_count(i)];
    for (t, &a) in profiles.iter().enumerate() {
        seg[game.profiles().digit(a, i)].push(t);
    }
    seg
}

/// Opponents' symbol (index in the opponents' shape) of a profile.
pub(crate) fn opponent_symbol(code: &Codebook, i: usize, profile: usize) -> usize {
    let game = code.game();
    let t = code.tables(i);
    t.opponents
        .iter()
        .zip(t.shape.strides())
        .map(|(&j, s)| game.profiles().digit(profile, j) * s)
        .sum()
}

/// Radices of the message, least significant first.
pub(crate) fn message_radices(code: &Codebook, i: usize, segment_lengths: &[usize]) -> Vec<BigUint> {
    let game = code.game();
    let opp = code.tables(i).shape.size();
    let mut r = vec![BigUint::from(game.players())];
    r.extend(std::iter::repeat_n(BigUint::from(code.coloring(i).count), code.n()));
    for (a, &m) in segment_lengths.iter().enumerate() {
        if m == 0 {
            continue;
        }
        if m <= code.raw_threshold() {
            r.extend(std::iter::repeat_n(BigUint::from(opp), m));
        } else {
            r.push(code.bin_count(i, a, m));
        }
    }
    r
}

pub(crate) fn render(index: &BigUint, base: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    if base == 1 {
        return out;
    }
    let mut v = index.clone();
    let b = BigUint::from(base);
    for slot in out.iter_mut().rev() {
        *slot = (&v % &b).to_usize().expect("digit fits");
        v /= &b;
    }
    out
}

pub fn encode(code: &Codebook, profiles: &[usize]) -> std::result::Result<EncodedMessage, EncodeFailure> {
    let game = code.game();
    let n = code.n();
    if profiles.len() != n {
        return Err(EncodeFailure::Invalid(Error::LengthMismatch {
            left: profiles.len(),
            right: n,
        }));
    }
    if let Some(&a) = profiles.iter().find(|&&a| a >= game.profile_count()) {
        return Err(EncodeFailure::Invalid(Error::InvalidArgument(format!(
            "profile index {a} out of range"
        ))));
    }
    let i = identify_suspect(game, code.pstar(), profiles);
    let coloring = code.coloring(i);
    let colors: Vec<usize> = profiles
        .iter()
        .map(|&a| coloring.colors[game.profiles().digit(a, i)])
        .collect();
    let tables = code.tables(i);
    let stage_sets = split_segments(code, i, profiles);
    let mut segments = vec![];
    for (a, stages) in stage_sets.iter().enumerate() {
        let m = stages.len();
        if m == 0 {
            continue;
        }
        let symbols: Vec<usize> = stages
            .iter()
            .map(|&t| opponent_symbol(code, i, profiles[t]))
            .collect();
        let payload = if m <= code.raw_threshold() {
            Payload::Raw(symbols)
        } else {
            let c = counts(&symbols, tables.shape.size()).expect("symbols in range");
            if !counts_typical(&c, &tables.probs, code.typicality_epsilon()) {
                return Err(EncodeFailure::AtypicalSegment { suspect: i, action: a });
            }
            let bins = code.bin_count(i, a, m);
            let h = SegmentHash::new(code.seed(), i, a, m, bins.clone());
            Payload::Binned { bin: h.bin(&symbols), bins }
        };
        segments.push(Segment {
            action: a,
            stages: stages.clone(),
            payload,
        });
    }
    let lengths: Vec<usize> = stage_sets.iter().map(Vec::len).collect();
    let radices = message_radices(code, i, &lengths);
    let space: BigUint = radices.iter().product();
    let capacity = code.capacity();
    if &space + 1u8 > capacity {
        return Err(EncodeFailure::CapacityOverflow {
            suspect: i,
            needed_bits: super::log2_big(&(&space + 1u8)),
            available_bits: n as f64 * code.threshold(),
        });
    }
    let mut digits: Vec<BigUint> = vec![BigUint::from(i)];
    digits.extend(colors.iter().map(|&c| BigUint::from(c)));
    for s in &segments {
        match &s.payload {
            Payload::Raw(sym) => digits.extend(sym.iter().map(|&x| BigUint::from(x))),
            Payload::Binned { bin, .. } => digits.push(bin.clone()),
        }
    }
    debug_assert_eq!(digits.len(), radices.len());
    let mut packed = BigUint::zero();
    for (d, r) in digits.iter().zip(&radices).rev() {
        packed = packed * r + d;
    }
    let index = packed + 1u8;
    let public = render(&index, code.public_alphabet_size(), n);
    Ok(EncodedMessage {
        suspect: i,
        colors,
        segments,
        index,
        public,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::MonitoringStructure;

    #[test]
    fn suspect_examples() {
        let g = StageGame::prisoners_dilemma();
        let p = ProductDistribution::for_game(&g, vec![vec![0.9, 0.1], vec![0.9, 0.1]]).unwrap();
        // a_2 with exact type (9 L, 1 R), a_1 all B
        let seq: Vec<usize> = (0..10)
            .map(|t| g.profiles().index(&[1, if t == 0 { 1 } else { 0 }]))
            .collect();
        assert_eq!(identify_suspect(&g, &p, &seq), 0);
        let exact: Vec<usize> = (0..10)
            .map(|t| g.profiles().index(&[usize::from(t == 3), usize::from(t == 7)]))
            .collect();
        assert_eq!(identify_suspect(&g, &p, &exact), 0);
        // player 2 off type
        let seq: Vec<usize> = (0..10)
            .map(|t| g.profiles().index(&[usize::from(t == 3), 1]))
            .collect();
        assert_eq!(identify_suspect(&g, &p, &seq), 1);
    }

    #[test]
    fn rendering_is_fixed_width() {
        assert_eq!(render(&BigUint::from(5u8), 3, 4), vec![0, 0, 1, 2]);
        assert_eq!(render(&BigUint::from(0u8), 3, 2), vec![0, 0]);
        let g = StageGame::prisoners_dilemma();
        let m = MonitoringStructure::fig3(&g, 0.0, 4).unwrap();
        let p = ProductDistribution::uniform(&g);
        let code = super::super::build_code(&g, &m, &p, super::super::CodeParams::new(4, 0.05, 0))
            .unwrap();
        let e = encode(&code, &[0, 1, 2, 3]).unwrap();
        assert_eq!(e.public.len(), 4);
        assert!(e.public.iter().all(|&s| s < 4));
        assert!(e.index > BigUint::zero());
        assert!(encode(&code, &[0, 1]).is_err());
    }
}
