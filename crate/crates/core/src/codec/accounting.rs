use serde::{Deserialize, Serialize};

use super::encode::{identify_suspect, message_radices, split_segments};
use super::{log2_big, Codebook};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// False for the step that needs `n >= n2`, when `n` is smaller.
    pub applicable: bool,
}

/// Terms of the cardinality chain for one realized sequence, in bits per
/// stage, with the suspect chosen by the statistical test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateAccounting {
    pub suspect: usize,
    pub segment_lengths: Vec<usize>,
    /// `log2` of the realized message space, over `n`.
    pub realized: f64,
    /// Rounding of bin counts up to integers, over `n`.
    pub ceiling_slack: f64,
    /// `log2(K chi^n |A_{-i}|^{raw} prod 2^{m(H+eps)}) / n`.
    pub exact: f64,
    /// `log K / n + log chi + n1 |raw classes| log|A_{-i}| / n + sum (m/n)(H+eps)`.
    pub split: f64,
    /// `R* + (log K + n1 |A_i| log|A_{-i}|)/n + eps`.
    pub asymptotic: f64,
    /// `R* + 2 eps`.
    pub limit: f64,
    pub threshold: f64,
    /// `(log K + n1 |A_i| log|A_{-i}|) / eps`.
    pub n_bar2: f64,
    pub pre_asymptotic: bool,
    pub checks: Vec<ChainCheck>,
}

impl RateAccounting {
    /// Every applicable step holds.
    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.holds || !c.applicable)
    }

    pub fn violations(&self) -> Vec<&ChainCheck> {
        self.checks.iter().filter(|c| c.applicable && !c.holds).collect()
    }
}

const SLACK: f64 = 1e-9;

pub fn rate_accounting(code: &Codebook, profiles: &[usize]) -> Result<RateAccounting> {
    let n = code.n();
    if profiles.len() != n {
        return Err(Error::LengthMismatch {
            left: profiles.len(),
            right: n,
        });
    }
    let game = code.game();
    let i = identify_suspect(game, code.pstar(), profiles);
    let lengths: Vec<usize> = split_segments(code, i, profiles).iter().map(Vec::len).collect();
    let nf = n as f64;
    let eps = code.epsilon();
    let n1 = code.raw_threshold();
    let log_k = (game.players() as f64).log2();
    let log_chi = (code.coloring(i).count as f64).log2();
    let log_opp = (code.tables(i).shape.size() as f64).log2();

    let space: num_bigint::BigUint = message_radices(code, i, &lengths).iter().product();
    let realized = log2_big(&space) / nf;

    let mut raw_stages = 0usize;
    let mut raw_classes = 0usize;
    let mut binned_bits = 0.0;
    let mut slack = 0.0;
    for (a, &m) in lengths.iter().enumerate() {
        if m == 0 {
            // an empty class carries nothing; it counts as raw with zero stages
            raw_classes += 1;
            continue;
        }
        if m <= n1 {
            raw_stages += m;
            raw_classes += 1;
        } else {
            let x = m as f64 * (code.rate(i, a) + eps);
            binned_bits += x;
            slack += log2_big(&code.bin_count(i, a, m)) - x;
        }
    }
    let exact = (log_k + nf * log_chi + raw_stages as f64 * log_opp + binned_bits) / nf;
    let ceiling_slack = slack / nf;
    let split = log_k / nf
        + log_chi
        + (n1 * raw_classes) as f64 * log_opp / nf
        + binned_bits / nf;
    let overhead = log_k + (n1 * game.action_count(i)) as f64 * log_opp;
    let asymptotic = code.rstar() + overhead / nf + eps;
    let limit = code.rstar() + 2.0 * eps;
    let threshold = code.threshold();
    let n_bar2 = overhead / eps;
    let pre_asymptotic = nf < n_bar2;
    let check = |name: &str, lhs: f64, rhs: f64, applicable: bool| ChainCheck {
        name: name.to_string(),
        lhs,
        rhs,
        holds: lhs <= rhs + SLACK,
        applicable,
    };
    let checks = vec![
        check("realized <= exact + ceiling", realized, exact + ceiling_slack, true),
        check("exact <= split", exact, split, true),
        check("split <= asymptotic", split, asymptotic, true),
        check("asymptotic <= R* + 2eps", asymptotic, limit, !pre_asymptotic),
        check("R* + 2eps <= log2|S0|", limit, threshold, true),
        check("realized <= log2|S0|", realized, threshold, true),
    ];
    Ok(RateAccounting {
        suspect: i,
        segment_lengths: lengths,
        realized,
        ceiling_slack,
        exact,
        split,
        asymptotic,
        limit,
        threshold,
        n_bar2,
        pre_asymptotic,
        checks,
    })
}
