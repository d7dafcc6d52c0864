//! Min-max (punishment) levels and individual rationality.

use serde::{Deserialize, Serialize};

use super::lp::solve_matrix_game;
use crate::error::{Error, Result};
use crate::game::{ProductDistribution, StageGame};

const DESCENT_ROUNDS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinmaxLevels {
    pub levels: Vec<f64>,
    /// `punishments[i]` is the full profile used against player `i`: the
    /// opponents' punishment mixes and, in slot `i`, a pure best response.
    pub punishments: Vec<ProductDistribution>,
    /// False when some level came from the K >= 3 heuristic.
    pub exact: bool,
}

impl MinmaxLevels {
    /// The opponents' punishment mix against `i`, player `j`'s component.
    pub fn punishment(&self, i: usize, j: usize) -> &[f64] {
        self.punishments[i].marginal(j)
    }
}

/// Matrix `M[a_i][a_j] = E[u_i(a_i, a_j, fixed others)]` for one punisher `j`.
fn reduced_matrix(game: &StageGame, i: usize, j: usize, mixes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; game.action_count(j)]; game.action_count(i)];
    let mut d = vec![0; game.players()];
    for a in 0..game.profile_count() {
        game.profiles().digits_into(a, &mut d);
        let w: f64 = (0..game.players())
            .filter(|&l| l != i && l != j)
            .map(|l| mixes[l][d[l]])
            .product();
        if w != 0.0 {
            m[d[i]][d[j]] += w * game.utility(a, i);
        }
    }
    m
}

/// Best-response value of `i` and the lowest-index maximizing action.
fn best_response(game: &StageGame, i: usize, mixes: &[Vec<f64>]) -> (f64, usize) {
    let j = if i == 0 { 1 } else { 0 };
    let m = reduced_matrix(game, i, j, mixes);
    let mut best = (f64::NEG_INFINITY, 0);
    for (a, row) in m.iter().enumerate() {
        let v: f64 = row.iter().zip(&mixes[j]).map(|(x, p)| x * p).sum();
        if v > best.0 + 1e-12 {
            best = (v, a);
        }
    }
    best
}

/// `v_i = min_{P_{-i}} max_{a_i} E[u_i]`. Exact (LP) for two players;
/// for more players an alternating per-punisher LP descent is used.
pub fn minmax_levels(game: &StageGame) -> Result<MinmaxLevels> {
    let k = game.players();
    let mut levels = vec![];
    let mut punishments = vec![];
    for i in 0..k {
        let mut mixes: Vec<Vec<f64>> = game
            .action_counts()
            .iter()
            .map(|&n| vec![1.0 / n as f64; n])
            .collect();
        if k == 2 {
            let j = 1 - i;
            let m = reduced_matrix(game, i, j, &mixes);
            let (_, _, col) = solve_matrix_game(&m)?;
            mixes[j] = col;
        } else {
            let mut current = best_response(game, i, &mixes).0;
            for _ in 0..DESCENT_ROUNDS {
                let before = current;
                for j in (0..k).filter(|&j| j != i) {
                    let m = reduced_matrix(game, i, j, &mixes);
                    let (v, _, col) = solve_matrix_game(&m)?;
                    if v < current - 1e-12 {
                        mixes[j] = col;
                        current = v;
                    }
                }
                if before - current <= 1e-12 {
                    break;
                }
            }
        }
        let (value, br) = best_response(game, i, &mixes);
        mixes[i] = vec![0.0; game.action_count(i)];
        mixes[i][br] = 1.0;
        levels.push(value);
        punishments.push(ProductDistribution::new(mixes)?);
    }
    Ok(MinmaxLevels {
        levels,
        punishments,
        exact: k == 2,
    })
}

/// `u_k >= v_k` for every player.
pub fn is_individually_rational(u: &[f64], levels: &[f64]) -> Result<bool> {
    if u.len() != levels.len() {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: levels.len(),
        });
    }
    Ok(u.iter().zip(levels).all(|(x, v)| x >= v))
}
