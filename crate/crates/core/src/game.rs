//! Stage games, private monitoring structures and mixed profiles.
//!
//! Actions and signals are addressed by position in their label lists, in
//! the order they were declared. Profiles are mixed-radix indices with the
//! first player as the most significant digit.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radix::MixedRadix;

/// Tolerance for probability vectors on input.
pub const PROB_TOLERANCE: f64 = 1e-12;

fn check_labels(labels: &[String], what: &str, player: usize) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::InvalidGame(format!(
            "player {} has an empty {what} set",
            player + 1
        )));
    }
    let mut seen = HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::InvalidGame(format!(
                "duplicate {what} label {l:?} for player {}",
                player + 1
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_simplex(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what} is empty")));
    }
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "{what} has a negative or non-finite entry {x}"
        )));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "{what} sums to {s}, not 1"
        )));
    }
    Ok(())
}

/// A finite stage game `(K, (A_k), (u_k))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageGame {
    action_labels: Vec<Vec<String>>,
    profiles: MixedRadix,
    /// `utilities[profile * K + k]`
    utilities: Vec<f64>,
}

impl StageGame {
    /// Builds a game from per-player action labels and one utility vector
    /// (length K) per action profile, in row-major profile order.
    pub fn new(action_labels: Vec<Vec<String>>, utilities: Vec<Vec<f64>>) -> Result<Self> {
        let k = action_labels.len();
        if k < 2 {
            return Err(Error::InvalidGame(format!(
                "K >= 2 required, got {k} player(s)"
            )));
        }
        for (p, labels) in action_labels.iter().enumerate() {
            check_labels(labels, "action", p)?;
        }
        let profiles = MixedRadix::new(action_labels.iter().map(Vec::len).collect());
        if utilities.len() != profiles.size() {
            return Err(Error::InvalidGame(format!(
                "dimension mismatch: expected {} utility rows, got {}",
                profiles.size(),
                utilities.len()
            )));
        }
        let mut flat = Vec::with_capacity(k * profiles.size());
        for (a, row) in utilities.iter().enumerate() {
            if row.len() != k {
                return Err(Error::InvalidGame(format!(
                    "dimension mismatch: utility row {a} has {} entries, expected {k}",
                    row.len()
                )));
            }
            if let Some(x) = row.iter().find(|x| !x.is_finite()) {
                return Err(Error::InvalidGame(format!(
                    "utility row {a} contains non-finite value {x}"
                )));
            }
            flat.extend_from_slice(row);
        }
        Ok(Self {
            action_labels,
            profiles,
            utilities: flat,
        })
    }

    /// The prisoner's dilemma with actions `{T, B}` x `{L, R}`.
    pub fn prisoners_dilemma() -> Self {
        let labels = vec![
            vec!["T".to_string(), "B".to_string()],
            vec!["L".to_string(), "R".to_string()],
        ];
        let u = vec![
            vec![3.0, 3.0],
            vec![0.0, 4.0],
            vec![4.0, 0.0],
            vec![1.0, 1.0],
        ];
        Self::new(labels, u).expect("static game is valid")
    }

    pub fn players(&self) -> usize {
        self.action_labels.len()
    }

    pub fn action_count(&self, k: usize) -> usize {
        self.action_labels[k].len()
    }

    pub fn action_counts(&self) -> &[usize] {
        self.profiles.radices()
    }

    pub fn action_labels(&self, k: usize) -> &[String] {
        &self.action_labels[k]
    }

    pub fn profiles(&self) -> &MixedRadix {
        &self.profiles
    }

    pub fn profile_count(&self) -> usize {
        self.profiles.size()
    }

    pub fn check_player(&self, k: usize) -> Result<()> {
        if k >= self.players() {
            return Err(Error::PlayerIndex {
                index: k,
                players: self.players(),
            });
        }
        Ok(())
    }

    pub fn utility(&self, profile: usize, k: usize) -> f64 {
        self.utilities[profile * self.players() + k]
    }

    pub fn utility_vector(&self, profile: usize) -> &[f64] {
        let k = self.players();
        &self.utilities[profile * k..(profile + 1) * k]
    }

    pub fn max_abs_utility(&self) -> f64 {
        self.utilities.iter().fold(0.0, |m, u| m.max(u.abs()))
    }

    /// Mixed-radix shape of the opponents' sub-profile `a_{-i}` (players in
    /// increasing index order, `i` skipped).
    pub fn opponents_shape(&self, i: usize) -> MixedRadix {
        MixedRadix::new(
            (0..self.players())
                .filter(|&j| j != i)
                .map(|j| self.action_count(j))
                .collect(),
        )
    }

    /// Full profile index from `a_i` and the opponents' digits.
    pub fn join_profile(&self, i: usize, a_i: usize, opponents: &[usize]) -> usize {
        let mut idx = 0;
        let mut o = 0;
        for (j, stride) in self.profiles.strides().iter().enumerate() {
            let a = if j == i {
                a_i
            } else {
                o += 1;
                opponents[o - 1]
            };
            idx += a * stride;
        }
        idx
    }

    /// Exact `E_{P*}[u_k]` for every player.
    pub fn expected_utility(&self, pstar: &ProductDistribution) -> Vec<f64> {
        let k = self.players();
        let mut out = vec![0.0; k];
        let mut digits = vec![0; k];
        for a in 0..self.profile_count() {
            self.profiles.digits_into(a, &mut digits);
            let p = pstar.profile_probability(&digits);
            if p == 0.0 {
                continue;
            }
            for (o, u) in out.iter_mut().zip(self.utility_vector(a)) {
                *o += p * u;
            }
        }
        out
    }
}

/// Conditional law `ℸ(s | a)` of the private signal profile given the
/// action profile, together with the public alphabet size `|S_0|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitoringStructure {
    signal_labels: Vec<Vec<String>>,
    signals: MixedRadix,
    /// `table[profile * |S| + signal_profile]`
    table: Vec<f64>,
    /// Per player `k`: `marginals[k][profile * |S_k| + s_k]`.
    marginals: Vec<Vec<f64>>,
    public_alphabet_size: usize,
}

impl MonitoringStructure {
    /// Builds the structure from explicit rows, one per action profile
    /// (row-major), each a distribution over signal profiles (row-major).
    pub fn new(
        game: &StageGame,
        signal_labels: Vec<Vec<String>>,
        rows: Vec<Vec<f64>>,
        public_alphabet_size: usize,
    ) -> Result<Self> {
        if signal_labels.len() != game.players() {
            return Err(Error::InvalidMonitoring(format!(
                "dimension mismatch: {} signal sets for {} players",
                signal_labels.len(),
                game.players()
            )));
        }
        for (p, labels) in signal_labels.iter().enumerate() {
            check_labels(labels, "signal", p)
                .map_err(|e| Error::InvalidMonitoring(e.to_string()))?;
        }
        if public_alphabet_size < 1 {
            return Err(Error::InvalidMonitoring(
                "public alphabet size must be at least 1".into(),
            ));
        }
        let signals = MixedRadix::new(signal_labels.iter().map(Vec::len).collect());
        if rows.len() != game.profile_count() {
            return Err(Error::InvalidMonitoring(format!(
                "dimension mismatch: expected {} rows, got {}",
                game.profile_count(),
                rows.len()
            )));
        }
        let mut table = Vec::with_capacity(rows.len() * signals.size());
        for (a, row) in rows.iter().enumerate() {
            if row.len() != signals.size() {
                return Err(Error::InvalidMonitoring(format!(
                    "dimension mismatch: row {a} has {} entries, expected {}",
                    row.len(),
                    signals.size()
                )));
            }
            check_simplex(row, &format!("row {a}")).map_err(|e| {
                Error::InvalidMonitoring(format!("row not stochastic: {e}"))
            })?;
            table.extend_from_slice(row);
        }
        let mut marginals: Vec<Vec<f64>> = (0..game.players())
            .map(|k| vec![0.0; rows.len() * signals.radices()[k]])
            .collect();
        let mut digits = vec![0; game.players()];
        for a in 0..rows.len() {
            for s in 0..signals.size() {
                let p = table[a * signals.size() + s];
                if p == 0.0 {
                    continue;
                }
                signals.digits_into(s, &mut digits);
                for (k, m) in marginals.iter_mut().enumerate() {
                    m[a * signals.radices()[k] + digits[k]] += p;
                }
            }
        }
        Ok(Self {
            signal_labels,
            signals,
            table,
            marginals,
            public_alphabet_size,
        })
    }

    /// Two-player binary channel where each player observes the opponent's
    /// action correctly with probability `1 - delta/2`, independently.
    pub fn fig3(game: &StageGame, delta: f64, public_alphabet_size: usize) -> Result<Self> {
        if game.players() != 2 || game.action_count(0) != 2 || game.action_count(1) != 2 {
            return Err(Error::InvalidMonitoring(
                "the fig3 channel needs a 2-player game with binary action sets".into(),
            ));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::InvalidMonitoring(format!(
                "delta must lie in [0, 1], got {delta}"
            )));
        }
        let flip = delta / 2.0;
        let w = |signal: usize, action: usize| if signal == action { 1.0 - flip } else { flip };
        // player 1 observes a_2, player 2 observes a_1
        let signal_labels = vec![game.action_labels(1).to_vec(), game.action_labels(0).to_vec()];
        let mut rows = Vec::with_capacity(4);
        for a1 in 0..2 {
            for a2 in 0..2 {
                let mut row = Vec::with_capacity(4);
                for s1 in 0..2 {
                    for s2 in 0..2 {
                        row.push(w(s1, a2) * w(s2, a1));
                    }
                }
                rows.push(row);
            }
        }
        Self::new(game, signal_labels, rows, public_alphabet_size)
    }

    pub fn public_alphabet_size(&self) -> usize {
        self.public_alphabet_size
    }

    pub fn signal_count(&self, k: usize) -> usize {
        self.signals.radices()[k]
    }

    pub fn signal_labels(&self, k: usize) -> &[String] {
        &self.signal_labels[k]
    }

    pub fn signals(&self) -> &MixedRadix {
        &self.signals
    }

    /// Row `ℸ(· | a)` over signal profiles.
    pub fn row(&self, profile: usize) -> &[f64] {
        let n = self.signals.size();
        &self.table[profile * n..(profile + 1) * n]
    }

    /// Marginal `ℸ(s_k | a)`.
    pub fn signal_prob(&self, profile: usize, k: usize, s_k: usize) -> f64 {
        self.marginals[k][profile * self.signal_count(k) + s_k]
    }

    /// Marginal channel of player `k`: one row `ℸ(· | a)` over `S_k` per profile.
    pub fn signal_channel(&self, k: usize) -> Vec<Vec<f64>> {
        let n = self.signal_count(k);
        self.marginals[k].chunks(n).map(<[f64]>::to_vec).collect()
    }

    /// Draws a signal profile for the given action profile.
    pub fn sample<R: Rng + ?Sized>(&self, profile: usize, rng: &mut R) -> usize {
        sample_index(self.row(profile), rng)
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &x) in p.iter().enumerate() {
        if x <= 0.0 {
            continue;
        }
        acc += x;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Product of independent mixed actions `P*_1 ⊗ … ⊗ P*_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductDistribution {
    marginals: Vec<Vec<f64>>,
}

impl ProductDistribution {
    pub fn new(marginals: Vec<Vec<f64>>) -> Result<Self> {
        for (k, p) in marginals.iter().enumerate() {
            check_simplex(p, &format!("mixed action of player {}", k + 1))?;
        }
        Ok(Self { marginals })
    }

    /// Checks the distribution against a game's action sets.
    pub fn for_game(game: &StageGame, marginals: Vec<Vec<f64>>) -> Result<Self> {
        let d = Self::new(marginals)?;
        d.check_game(game)?;
        Ok(d)
    }

    pub fn check_game(&self, game: &StageGame) -> Result<()> {
        if self.marginals.len() != game.players() {
            return Err(Error::InvalidDistribution(format!(
                "{} mixed actions for {} players",
                self.marginals.len(),
                game.players()
            )));
        }
        for (k, p) in self.marginals.iter().enumerate() {
            if p.len() != game.action_count(k) {
                return Err(Error::InvalidDistribution(format!(
                    "player {} has {} actions but {} probabilities",
                    k + 1,
                    game.action_count(k),
                    p.len()
                )));
            }
        }
        Ok(())
    }

    /// Point mass on an action profile.
    pub fn pure(game: &StageGame, actions: &[usize]) -> Self {
        let marginals = actions
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                let mut v = vec![0.0; game.action_count(k)];
                v[a] = 1.0;
                v
            })
            .collect();
        Self { marginals }
    }

    pub fn uniform(game: &StageGame) -> Self {
        let marginals = game
            .action_counts()
            .iter()
            .map(|&n| vec![1.0 / n as f64; n])
            .collect();
        Self { marginals }
    }

    pub fn players(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginal(&self, k: usize) -> &[f64] {
        &self.marginals[k]
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    pub fn prob(&self, k: usize, a: usize) -> f64 {
        self.marginals[k][a]
    }

    pub fn profile_probability(&self, actions: &[usize]) -> f64 {
        actions
            .iter()
            .enumerate()
            .map(|(k, &a)| self.marginals[k][a])
            .product()
    }

    /// `P*_{-i}` as a flat vector over the opponents' shape of `game`.
    pub fn opponents(&self, game: &StageGame, i: usize) -> Vec<f64> {
        let shape = game.opponents_shape(i);
        let players: Vec<usize> = (0..self.players()).filter(|&j| j != i).collect();
        let mut digits = vec![0; shape.len()];
        (0..shape.size())
            .map(|x| {
                shape.digits_into(x, &mut digits);
                players
                    .iter()
                    .zip(&digits)
                    .map(|(&j, &a)| self.marginals[j][a])
                    .product()
            })
            .collect()
    }

    /// Actions of player `k` whose probability exceeds `threshold`.
    pub fn support(&self, k: usize, threshold: f64) -> Vec<usize> {
        self.marginals[k]
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > threshold)
            .map(|(a, _)| a)
            .collect()
    }

    /// Draws one action of player `k`.
    pub fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> usize {
        sample_index(&self.marginals[k], rng)
    }
}
