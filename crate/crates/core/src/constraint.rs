//! The information constraint `R* < log2 |S_0|` and the set of mixed
//! profiles satisfying it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{MonitoringStructure, ProductDistribution, StageGame};
use crate::graph::{build_auxiliary_graph, minimal_coloring, Coloring, DEFAULT_SUPPORT_THRESHOLD};
use crate::info::JointDistribution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyTerm {
    pub deviator: usize,
    pub receiver: usize,
    pub action: usize,
    /// `H(a_{-i,k} | s_k(a_i), a_k)` in bits.
    pub bits: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfoConstraintReport {
    pub terms: Vec<EntropyTerm>,
    pub colorings: Vec<Coloring>,
    /// Per deviator: `max_{k, a_i} term + log2 chi_i`.
    pub per_deviator: Vec<f64>,
    pub rstar: f64,
    pub threshold: f64,
    pub satisfied: bool,
    /// `(i, k, a_i)` attaining `R*`.
    pub witness: (usize, usize, usize),
}

impl InfoConstraintReport {
    pub fn chromatic_numbers(&self) -> Vec<usize> {
        self.colorings.iter().map(|c| c.count).collect()
    }

    /// Largest term for deviator `i` over all receivers and actions.
    pub fn max_term(&self, i: usize) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.deviator == i)
            .fold(0.0, |m, t| m.max(t.bits))
    }

    /// Largest term for a fixed `(i, a_i)` over receivers.
    pub fn max_term_for_action(&self, i: usize, a_i: usize) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.deviator == i && t.action == a_i)
            .fold(0.0, |m, t| m.max(t.bits))
    }

    pub fn term(&self, i: usize, k: usize, a_i: usize) -> Option<f64> {
        self.terms
            .iter()
            .find(|t| t.deviator == i && t.receiver == k && t.action == a_i)
            .map(|t| t.bits)
    }
}

/// `H(a_{-i,k} | s_k, a_k)` under `P*_{-i} ⊗ ℸ(s_k | a_i, a_{-i})`, with
/// `a_i` fixed. The joint has one axis per opponent (increasing player
/// order) followed by the signal of `k`.
pub fn entropy_term(
    game: &StageGame,
    monitoring: &MonitoringStructure,
    pstar: &ProductDistribution,
    i: usize,
    k: usize,
    a_i: usize,
) -> Result<f64> {
    game.check_player(i)?;
    game.check_player(k)?;
    pstar.check_game(game)?;
    if a_i >= game.action_count(i) {
        return Err(Error::InvalidArgument(format!(
            "action {a_i} out of range for player {}",
            i + 1
        )));
    }
    let others: Vec<usize> = (0..game.players()).filter(|&j| j != i).collect();
    let target: Vec<usize> = others
        .iter()
        .enumerate()
        .filter(|(_, &j)| j != k)
        .map(|(pos, _)| pos)
        .collect();
    if target.is_empty() {
        return Ok(0.0);
    }
    let signal_axis = others.len();
    let mut given = vec![signal_axis];
    if let Some(pos) = others.iter().position(|&j| j == k) {
        given.push(pos);
    }
    let mut sizes: Vec<usize> = others.iter().map(|&j| game.action_count(j)).collect();
    sizes.push(monitoring.signal_count(k));
    let joint = JointDistribution::from_fn(sizes, |d| {
        let (opp, s) = d.split_at(signal_axis);
        let p: f64 = others
            .iter()
            .zip(opp)
            .map(|(&j, &a)| pstar.prob(j, a))
            .product();
        if p == 0.0 {
            return 0.0;
        }
        p * monitoring.signal_prob(game.join_profile(i, a_i, opp), k, s[0])
    });
    joint.conditional_entropy(&target, &given)
}

pub fn compute_rstar(
    game: &StageGame,
    monitoring: &MonitoringStructure,
    pstar: &ProductDistribution,
) -> Result<InfoConstraintReport> {
    compute_rstar_with(game, monitoring, pstar, DEFAULT_SUPPORT_THRESHOLD)
}

/// As [`compute_rstar`] with an explicit cutoff for `Supp P*_{-i}`.
pub fn compute_rstar_with(
    game: &StageGame,
    monitoring: &MonitoringStructure,
    pstar: &ProductDistribution,
    support_threshold: f64,
) -> Result<InfoConstraintReport> {
    pstar.check_game(game)?;
    let players = game.players();
    let mut terms = vec![];
    let mut colorings = vec![];
    let mut per_deviator = vec![];
    let mut rstar = f64::NEG_INFINITY;
    let mut witness = (0, 0, 0);
    for i in 0..players {
        let g = build_auxiliary_graph(game, monitoring, pstar, i, support_threshold)?;
        let coloring = minimal_coloring(&g);
        let mut best = f64::NEG_INFINITY;
        let mut best_at = (i, 0, 0);
        for a_i in 0..game.action_count(i) {
            for k in 0..players {
                let bits = entropy_term(game, monitoring, pstar, i, k, a_i)?;
                if bits > best {
                    best = bits;
                    best_at = (i, k, a_i);
                }
                terms.push(EntropyTerm {
                    deviator: i,
                    receiver: k,
                    action: a_i,
                    bits,
                });
            }
        }
        let value = best + (coloring.count as f64).log2();
        if value > rstar {
            rstar = value;
            witness = best_at;
        }
        per_deviator.push(value);
        colorings.push(coloring);
    }
    let threshold = (monitoring.public_alphabet_size() as f64).log2();
    Ok(InfoConstraintReport {
        terms,
        colorings,
        per_deviator,
        rstar,
        threshold,
        satisfied: rstar < threshold,
        witness,
    })
}

/// Membership in the constraint set (strict inequality).
pub fn in_constraint_set(
    game: &StageGame,
    monitoring: &MonitoringStructure,
    pstar: &ProductDistribution,
) -> Result<bool> {
    Ok(compute_rstar(game, monitoring, pstar)?.satisfied)
}

/// Closed form of `R*` for the two-player binary channel family: the larger
/// of the two posterior-entropy sums plus `log2 chi = 1`.
///
/// `p1` and `p2` are `P*_1(first action)` and `P*_2(first action)`.
pub fn pd_closed_form(delta: f64, p1: f64, p2: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "closed form needs delta in (0, 1], got {delta}"
        )));
    }
    for p in [p1, p2] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidDistribution(format!(
                "probability {p} outside [0, 1]"
            )));
        }
    }
    // c * log2(num / c) with 0 log(./0) = 0
    fn part(c: f64, num: f64) -> f64 {
        if c <= 0.0 {
            0.0
        } else {
            c * (num / c).log2()
        }
    }
    let side = |q: f64| {
        let (a, b) = (q, 1.0 - q);
        let h = delta / 2.0;
        let first = a * (1.0 - h) + b * h;
        let second = a * h + b * (1.0 - h);
        part(a * (1.0 - h), first)
            + part(b * h, first)
            + part(a * h, second)
            + part(b * (1.0 - h), second)
    };
    Ok(side(p2).max(side(p1)) + 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::info::{binary_entropy, entropy};
    use proptest::prelude::*;

    fn pd_report(delta: f64, p1: f64, p2: f64) -> InfoConstraintReport {
        let g = StageGame::prisoners_dilemma();
        let m = MonitoringStructure::fig3(&g, delta, 3).unwrap();
        let p = ProductDistribution::for_game(&g, vec![vec![p1, 1.0 - p1], vec![p2, 1.0 - p2]])
            .unwrap();
        compute_rstar(&g, &m, &p).unwrap()
    }

    #[test]
    fn term_examples() {
        let g = StageGame::prisoners_dilemma();
        let m = MonitoringStructure::fig3(&g, 1.0, 3).unwrap();
        let u = ProductDistribution::uniform(&g);
        assert_eq!(entropy_term(&g, &m, &u, 0, 1, 0).unwrap(), 0.0);
        for a in 0..2 {
            assert!((entropy_term(&g, &m, &u, 0, 0, a).unwrap() - 1.0).abs() < 1e-12);
        }
        let m = MonitoringStructure::fig3(&g, 0.5, 3).unwrap();
        let p = ProductDistribution::for_game(&g, vec![vec![0.9, 0.1], vec![0.9, 0.1]]).unwrap();
        // oracle: posterior entropy of a_2 given s_1 through a flip-1/4 channel
        let mut oracle = 0.0;
        for s in 0..2 {
            let w = |a: usize| if a == s { 0.75 } else { 0.25 };
            let ps = 0.9 * w(0) + 0.1 * w(1);
            oracle += ps * entropy(&[0.9 * w(0) / ps, 0.1 * w(1) / ps]);
        }
        let t = entropy_term(&g, &m, &p, 0, 0, 1).unwrap();
        assert!((t - oracle).abs() < 1e-12);
        assert!((t - 0.3990).abs() < 5e-5);
        assert!(entropy_term(&g, &m, &p, 0, 0, 2).is_err());
    }

    #[test]
    fn rstar_examples() {
        let r = pd_report(1.0, 0.5, 0.5);
        assert!((r.rstar - 2.0).abs() < 1e-12);
        assert!(!r.satisfied);
        assert!((r.threshold - 3f64.log2()).abs() < 1e-15);
        let r = pd_report(0.0, 0.3, 0.6);
        assert_eq!(r.rstar, 0.0);
        assert!(r.satisfied);
        assert_eq!(r.chromatic_numbers(), vec![1, 1]);
        let r = pd_report(0.5, 0.9, 0.9);
        assert!((r.rstar - 1.398983).abs() < 1e-5);
        assert!(r.satisfied);
        assert_eq!(r.chromatic_numbers(), vec![2, 2]);
    }

    #[test]
    fn rstar_recomputable_from_terms() {
        let r = pd_report(0.37, 0.2, 0.7);
        let recomputed = (0..2)
            .map(|i| r.max_term(i) + (r.colorings[i].count as f64).log2())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((recomputed - r.rstar).abs() < 1e-12);
        let (i, k, a) = r.witness;
        let w = r.term(i, k, a).unwrap() + (r.colorings[i].count as f64).log2();
        assert!((w - r.rstar).abs() < 1e-12);
    }

    #[test]
    fn single_symbol_public_alphabet() {
        let g = StageGame::prisoners_dilemma();
        let m = MonitoringStructure::fig3(&g, 0.2, 1).unwrap();
        let p = ProductDistribution::uniform(&g);
        assert!(!in_constraint_set(&g, &m, &p).unwrap());
        let m0 = MonitoringStructure::fig3(&g, 0.0, 1).unwrap();
        let pure = ProductDistribution::pure(&g, &[0, 0]);
        // R* = 0 = threshold: strict inequality fails
        assert!(!in_constraint_set(&g, &m0, &pure).unwrap());
    }

    #[test]
    fn strict_at_equality() {
        // |S_0| = 4 and R* = 2 exactly
        let g = StageGame::prisoners_dilemma();
        let m = MonitoringStructure::fig3(&g, 1.0, 4).unwrap();
        let r = compute_rstar(&g, &m, &ProductDistribution::uniform(&g)).unwrap();
        assert_eq!(r.rstar, 2.0);
        assert!(!r.satisfied);
    }

    #[test]
    fn closed_form_examples() {
        assert!((pd_closed_form(1.0, 0.5, 0.5).unwrap() - 2.0).abs() < 1e-12);
        let p = 0.3;
        assert!((pd_closed_form(1.0, 0.5, p).unwrap() - 2.0).abs() < 1e-12);
        assert!((pd_closed_form(1.0, 0.9, 0.9).unwrap() - (binary_entropy(0.9) + 1.0)).abs() < 1e-12);
        assert!(pd_closed_form(0.0, 0.5, 0.5).is_err());
        // bisection oracle for H_b(p) = log2 3 - 1 on (0, 1/2)
        let target = 3f64.log2() - 1.0;
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if binary_entropy(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 0.1403).abs() < 5e-5);
        // both players at p*: the closed form sits on the threshold
        assert!((pd_closed_form(1.0, lo, lo).unwrap() - 3f64.log2()).abs() < 1e-9);
    }

    #[test]
    fn two_player_cross_term_is_zero() {
        let g = StageGame::prisoners_dilemma();
        let m = MonitoringStructure::fig3(&g, 0.3, 3).unwrap();
        let p = ProductDistribution::for_game(&g, vec![vec![0.4, 0.6], vec![0.1, 0.9]]).unwrap();
        for i in 0..2 {
            for a in 0..2 {
                assert_eq!(entropy_term(&g, &m, &p, i, 1 - i, a).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn three_player_terms_bounded() {
        let labels: Vec<Vec<String>> = (0..3)
            .map(|k| vec![format!("x{k}"), format!("y{k}")])
            .collect();
        let g = StageGame::new(labels, vec![vec![0.0; 3]; 8]).unwrap();
        // each player sees the xor of the others' actions through a noisy bit
        let slabels: Vec<Vec<String>> = (0..3).map(|k| vec![format!("s{k}0"), format!("s{k}1")]).collect();
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|a| {
                let d = g.profiles().digits(a);
                (0..8)
                    .map(|s| {
                        let sd = [s >> 2 & 1, s >> 1 & 1, s & 1];
                        (0..3)
                            .map(|k| {
                                let x = (0..3).filter(|&j| j != k).map(|j| d[j]).sum::<usize>() % 2;
                                if sd[k] == x { 0.8 } else { 0.2 }
                            })
                            .product()
                    })
                    .collect()
            })
            .collect();
        let m = MonitoringStructure::new(&g, slabels, rows, 8).unwrap();
        let p = ProductDistribution::uniform(&g);
        let r = compute_rstar(&g, &m, &p).unwrap();
        for t in &r.terms {
            let opponents_left = if t.receiver == t.deviator { 2 } else { 1 };
            assert!(t.bits >= 0.0 && t.bits <= opponents_left as f64 + 1e-12);
        }
        // with k's own action known, the xor signal pins down the third player
        let t = r.term(0, 1, 0).unwrap();
        let oracle = binary_entropy(0.2);
        assert!((t - oracle).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn closed_form_matches(delta in 0.001f64..=1.0, p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0) {
            let r = pd_report(delta, p1, p2);
            let cf = pd_closed_form(delta, p1, p2).unwrap();
            prop_assert_eq!(r.chromatic_numbers(), vec![2, 2]);
            prop_assert!((r.rstar - cf).abs() < 1e-9, "{} vs {}", r.rstar, cf);
        }

        #[test]
        fn rstar_nondecreasing_in_noise(p1 in 0.01f64..0.99, p2 in 0.01f64..0.99) {
            let mut prev = f64::NEG_INFINITY;
            for step in 1..=20 {
                let delta = step as f64 * 0.05;
                let r = pd_report(delta, p1, p2).rstar;
                prop_assert!(r >= prev - 1e-12);
                prev = r;
            }
        }

        #[test]
        fn terms_bounded(delta in 0.0f64..=1.0, p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0) {
            let r = pd_report(delta, p1, p2);
            for t in &r.terms {
                prop_assert!(t.bits >= 0.0 && t.bits <= 1.0 + 1e-12);
                if t.receiver != t.deviator {
                    prop_assert_eq!(t.bits, 0.0);
                }
            }
        }
    }
}
