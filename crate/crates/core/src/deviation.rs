//! Unilateral deviations from the prescribed mixed profile.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{check_simplex, sample_index, ProductDistribution, StageGame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeviationKind {
    /// I.i.d. draws from another mixed action.
    Iid { distribution: Vec<f64> },
    Constant { action: usize },
    /// Cycles through the listed actions.
    Periodic { pattern: Vec<usize> },
    /// Plays the listed actions once, then falls back to the honest mix.
    Scripted { actions: Vec<usize> },
    /// Each block is a uniformly shuffled sequence with the exact type of the
    /// honest mix (rounded by largest remainders).
    ExactTypeShuffle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSpec {
    pub player: usize,
    #[serde(flatten)]
    pub kind: DeviationKind,
    /// First deviating stage, counted from 0.
    #[serde(default)]
    pub start_stage: usize,
}

impl DeviationSpec {
    pub fn new(player: usize, kind: DeviationKind) -> Self {
        Self {
            player,
            kind,
            start_stage: 0,
        }
    }

    /// Deviation starting with block `block` (1-based) of length `n`.
    pub fn from_block(player: usize, kind: DeviationKind, block: usize, n: usize) -> Self {
        Self {
            player,
            kind,
            start_stage: block.saturating_sub(1) * n,
        }
    }

    pub fn validate(&self, game: &StageGame) -> Result<()> {
        game.check_player(self.player)?;
        let n = game.action_count(self.player);
        let check = |a: usize| {
            if a < n {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!(
                    "deviation action {a} out of range for player {}",
                    self.player + 1
                )))
            }
        };
        match &self.kind {
            DeviationKind::Iid { distribution } => {
                if distribution.len() != n {
                    return Err(Error::InvalidDistribution(format!(
                        "deviation mix has {} entries for {n} actions",
                        distribution.len()
                    )));
                }
                check_simplex(distribution, "deviation mix")
            }
            DeviationKind::Constant { action } => check(*action),
            DeviationKind::Periodic { pattern } | DeviationKind::Scripted { actions: pattern } => {
                if pattern.is_empty() {
                    return Err(Error::InvalidArgument("empty deviation pattern".into()));
                }
                pattern.iter().try_for_each(|&a| check(a))
            }
            DeviationKind::ExactTypeShuffle => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        let kind = match &self.kind {
            DeviationKind::Iid { distribution } => format!("iid{distribution:?}"),
            DeviationKind::Constant { action } => format!("constant({action})"),
            DeviationKind::Periodic { pattern } => format!("periodic{pattern:?}"),
            DeviationKind::Scripted { actions } => format!("scripted{actions:?}"),
            DeviationKind::ExactTypeShuffle => "exact_type_shuffle".to_string(),
        };
        format!("p{}:{}@{}", self.player + 1, kind, self.start_stage)
    }
}

/// Counts of an exact-type sequence of length `n` for the mix `p`.
pub fn exact_type_counts(p: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = p.iter().map(|x| x * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = raw[a] - raw[a].floor();
        let rb = raw[b] - raw[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &a in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if p[a] > 0.0 {
            counts[a] += 1;
            left -= 1;
        }
    }
    counts
}

/// Draws the action profile sequence of one player stage by stage.
#[derive(Debug, Clone)]
pub struct ActionSampler {
    pstar: ProductDistribution,
    deviation: Option<DeviationSpec>,
    block_len: usize,
    shuffled: Vec<usize>,
}

impl ActionSampler {
    pub fn new(pstar: ProductDistribution, deviation: Option<DeviationSpec>, block_len: usize) -> Self {
        Self {
            pstar,
            deviation,
            block_len: block_len.max(1),
            shuffled: vec![],
        }
    }

    /// Whether player `k` deviates at global stage `t`.
    pub fn deviates(&self, k: usize, t: usize) -> bool {
        self.deviation
            .as_ref()
            .is_some_and(|d| d.player == k && t >= d.start_stage)
    }

    /// Whether the deviation, not the prescribed strategy, picks the action
    /// of `k` at `t`. False once a script has run out.
    pub fn overrides(&self, k: usize, t: usize) -> bool {
        if !self.deviates(k, t) {
            return false;
        }
        let d = self.deviation.as_ref().expect("deviation present");
        match &d.kind {
            DeviationKind::Scripted { actions } => t - d.start_stage < actions.len(),
            _ => true,
        }
    }

    /// Action of player `k` at global stage `t`.
    pub fn action<R: Rng + ?Sized>(&mut self, k: usize, t: usize, rng: &mut R) -> usize {
        if !self.deviates(k, t) {
            return self.pstar.sample(k, rng);
        }
        let d = self.deviation.as_ref().expect("deviation present");
        let rel = t - d.start_stage;
        match &d.kind {
            DeviationKind::Iid { distribution } => sample_index(distribution, rng),
            DeviationKind::Constant { action } => *action,
            DeviationKind::Periodic { pattern } => pattern[rel % pattern.len()],
            DeviationKind::Scripted { actions } => match actions.get(rel) {
                Some(&a) => a,
                None => self.pstar.sample(k, rng),
            },
            DeviationKind::ExactTypeShuffle => {
                let pos = t % self.block_len;
                if pos == 0 || self.shuffled.len() != self.block_len {
                    let counts = exact_type_counts(self.pstar.marginal(k), self.block_len);
                    self.shuffled = counts
                        .iter()
                        .enumerate()
                        .flat_map(|(a, &c)| std::iter::repeat_n(a, c))
                        .collect();
                    self.shuffled.shuffle(rng);
                }
                self.shuffled[pos]
            }
        }
    }

    /// The per-stage mixed action player `k` uses at stage `t`, when it is a
    /// fixed simplex point (shuffles and scripts report their point mass).
    pub fn stage_mix(&self, k: usize, t: usize, n_actions: usize) -> Vec<f64> {
        let point = |a: usize| {
            let mut v = vec![0.0; n_actions];
            v[a] = 1.0;
            v
        };
        if !self.deviates(k, t) {
            return self.pstar.marginal(k).to_vec();
        }
        let d = self.deviation.as_ref().expect("deviation present");
        let rel = t - d.start_stage;
        match &d.kind {
            DeviationKind::Iid { distribution } => distribution.clone(),
            DeviationKind::Constant { action } => point(*action),
            DeviationKind::Periodic { pattern } => point(pattern[rel % pattern.len()]),
            DeviationKind::Scripted { actions } => match actions.get(rel) {
                Some(&a) => point(a),
                None => self.pstar.marginal(k).to_vec(),
            },
            DeviationKind::ExactTypeShuffle => self.pstar.marginal(k).to_vec(),
        }
    }
}
