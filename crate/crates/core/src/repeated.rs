//! Block grim-trigger play of the repeated game with an encoder.
//!
//! Blocks are numbered from 1. During block `b` the encoder broadcasts the
//! code word of block `b - 1` (block 1 carries the all-zero word). At the end
//! of block `b` every player decodes block `b - 1`, and at the start of block
//! `b + 1` tests each decoded action sequence against `P*`. A failed test
//! switches the tester to the punishment plan for the rest of the match.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{build_code, decode, encode, wilson_interval, CodeParams, Codebook};
use crate::deviation::{ActionSampler, DeviationSpec};
use crate::error::{Error, Result};
use crate::game::{sample_index, MonitoringStructure, ProductDistribution, StageGame};
use crate::info::is_typical;
use crate::region::minmax_levels;
use crate::seed;

/// How players learn the previous block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitoringLayer {
    /// Run the block code: encode, sample signals, decode.
    Codec,
    /// Every player recovers the previous block exactly. Stands in for the
    /// code at block lengths where decoding is too expensive.
    Ideal,
}

/// What a player does when its decoder fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeFailurePolicy {
    /// Treat the failure as a failed test of every opponent.
    Flag,
    /// Skip the test for that block.
    Ignore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub blocks: usize,
    /// Rate slack of the block code.
    pub code_epsilon: f64,
    /// Slack of the per-block statistical test.
    pub test_epsilon: f64,
    pub pstar: ProductDistribution,
    #[serde(default)]
    pub deviation: Option<DeviationSpec>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_eq_epsilon")]
    pub eq_epsilon: f64,
    #[serde(default = "default_layer")]
    pub layer: MonitoringLayer,
    #[serde(default = "default_policy")]
    pub on_decode_failure: DecodeFailurePolicy,
    /// Keep per-stage sequences in the trace. Batch runs turn this off.
    #[serde(default = "default_true")]
    pub record_sequences: bool,
}

fn default_eq_epsilon() -> f64 {
    0.1
}

fn default_layer() -> MonitoringLayer {
    MonitoringLayer::Codec
}

fn default_policy() -> DecodeFailurePolicy {
    DecodeFailurePolicy::Flag
}

fn default_true() -> bool {
    true
}

impl SimConfig {
    /// One slack for coding and testing, codec layer, seed 0.
    pub fn new(n: usize, blocks: usize, epsilon: f64, pstar: ProductDistribution) -> Self {
        Self {
            n,
            blocks,
            code_epsilon: epsilon,
            test_epsilon: epsilon,
            pstar,
            deviation: None,
            master_seed: 0,
            eq_epsilon: default_eq_epsilon(),
            layer: MonitoringLayer::Codec,
            on_decode_failure: DecodeFailurePolicy::Flag,
            record_sequences: true,
        }
    }

    pub fn with_test_epsilon(mut self, eps: f64) -> Self {
        self.test_epsilon = eps;
        self
    }

    pub fn with_deviation(mut self, deviation: Option<DeviationSpec>) -> Self {
        self.deviation = deviation;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn with_layer(mut self, layer: MonitoringLayer) -> Self {
        self.layer = layer;
        self
    }

    pub fn with_eq_epsilon(mut self, eps: f64) -> Self {
        self.eq_epsilon = eps;
        self
    }

    pub fn validate(&self, game: &StageGame) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("block length must be at least 1".into()));
        }
        if self.blocks < 3 {
            return Err(Error::InvalidArgument(format!(
                "at least 3 blocks are required (two warm-up blocks), got {}",
                self.blocks
            )));
        }
        for (name, v) in [
            ("code epsilon", self.code_epsilon),
            ("test epsilon", self.test_epsilon),
            ("equilibrium epsilon", self.eq_epsilon),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        self.pstar.check_game(game)?;
        if let Some(d) = &self.deviation {
            d.validate(game)?;
        }
        Ok(())
    }

    pub fn stages(&self) -> usize {
        self.n * self.blocks
    }
}

/// Smallest block count with `B >= 8 max|u| / eps_eq`.
pub fn recommended_blocks(game: &StageGame, eq_epsilon: f64) -> usize {
    (8.0 * game.max_abs_utility() / eq_epsilon).ceil() as usize
}

/// 1 (true) iff the decoded sequence is not typical for `P*_i`.
pub fn statistical_block_test(decoded: &[usize], p: &[f64], epsilon: f64) -> bool {
    !is_typical(decoded, p, epsilon)
}

/// Full profile used against player `i`: the opponents' min-max mixes and
/// a pure best response for `i`.
pub fn punishment_profile(game: &StageGame, i: usize) -> Result<ProductDistribution> {
    game.check_player(i)?;
    Ok(minmax_levels(game)?.punishments.swap_remove(i))
}

/// Lowest-index flagged player.
pub fn punishment_target(flags: &[bool]) -> Option<usize> {
    flags.iter().position(|&f| f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    /// 1-based.
    pub block: usize,
    /// Action profile indices; empty unless sequences are recorded.
    pub profiles: Vec<usize>,
    /// Signal profile indices.
    pub signals: Vec<usize>,
    /// Public word broadcast during this block.
    pub public: Vec<usize>,
    pub encode_error: Option<String>,
    /// Decoder `k`'s estimate of the previous block's profiles.
    pub decoded: Vec<Option<Vec<usize>>>,
    pub decode_errors: Vec<Option<String>>,
    /// Block whose decoded content was tested at the start of this block.
    pub tested_block: Option<usize>,
    /// `tests[k][i]`: player `k` declared a deviation of player `i`.
    pub tests: Vec<Vec<bool>>,
    /// `atypical[i]`: player `i`'s true actions in this block fail the test.
    pub atypical: Vec<bool>,
    /// Player `k`'s punishment target during this block.
    pub punishment: Vec<Option<usize>>,
    /// Block-average stage utility per player.
    pub utilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchTrace {
    pub n: usize,
    pub seed: u64,
    pub blocks: Vec<BlockRecord>,
    /// Some test fired during the match.
    pub event: bool,
    /// Average stage utility over all `n B` stages.
    pub utilities: Vec<f64>,
}

impl MatchTrace {
    /// First block in which some other player declared `i` a deviator.
    pub fn first_detection(&self, i: usize) -> Option<usize> {
        self.blocks
            .iter()
            .find(|b| b.tests.iter().enumerate().any(|(k, t)| k != i && t[i]))
            .map(|b| b.block)
    }

    /// First block whose true actions of `i` fail the test.
    pub fn first_atypical_block(&self, i: usize) -> Option<usize> {
        self.blocks.iter().find(|b| b.atypical[i]).map(|b| b.block)
    }

    /// Recomputes the average utilities from the recorded profiles.
    pub fn replay_utilities(&self, game: &StageGame) -> Vec<f64> {
        let stages: usize = self.blocks.iter().map(|b| b.profiles.len()).sum();
        (0..game.players())
            .map(|k| {
                let total: f64 = self
                    .blocks
                    .iter()
                    .flat_map(|b| &b.profiles)
                    .map(|&a| game.utility(a, k))
                    .sum();
                total / stages as f64
            })
            .collect()
    }

    /// One row per block: `block, tested_block, E_k_i..., punish_k..., u_k...,
    /// decode_failures`. Punishment targets are 1-based, 0 for none.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let players = self.utilities.len();
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["block".to_string(), "tested_block".to_string()];
        for k in 1..=players {
            for i in 1..=players {
                header.push(format!("E_{k}_{i}"));
            }
        }
        header.extend((1..=players).map(|k| format!("punish_{k}")));
        header.extend((1..=players).map(|k| format!("u_{k}")));
        header.push("decode_failures".into());
        w.write_record(&header).map_err(csv_err)?;
        for b in &self.blocks {
            let mut row = vec![
                b.block.to_string(),
                b.tested_block.map_or_else(String::new, |t| t.to_string()),
            ];
            row.extend(b.tests.iter().flatten().map(|&e| u8::from(e).to_string()));
            row.extend(b.punishment.iter().map(|p| p.map_or(0, |i| i + 1).to_string()));
            row.extend(b.utilities.iter().map(|u| format!("{u:.6}")));
            row.push(b.decode_errors.iter().filter(|e| e.is_some()).count().to_string());
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::InvalidArgument(format!("csv write failed: {e}")))?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidArgument(format!("csv write failed: {e}"))
}

/// Shared, match-independent state.
struct Setup<'a> {
    game: &'a StageGame,
    monitoring: &'a MonitoringStructure,
    config: &'a SimConfig,
    code: Option<Codebook>,
    punishments: Vec<ProductDistribution>,
}

impl<'a> Setup<'a> {
    fn new(game: &'a StageGame, monitoring: &'a MonitoringStructure, config: &'a SimConfig) -> Result<Self> {
        config.validate(game)?;
        if monitoring.signals().len() != game.players() {
            return Err(Error::InvalidMonitoring(format!(
                "monitoring has {} players, game has {}",
                monitoring.signals().len(),
                game.players()
            )));
        }
        let code = match config.layer {
            MonitoringLayer::Codec => {
                let params = CodeParams::new(config.n, config.code_epsilon, seed::derive(&[config.master_seed, 0xC0DE]));
                Some(build_code(game, monitoring, &config.pstar, params)?)
            }
            MonitoringLayer::Ideal => None,
        };
        Ok(Self {
            game,
            monitoring,
            config,
            code,
            punishments: minmax_levels(game)?.punishments,
        })
    }

    fn play(&self, match_seed: u64) -> MatchTrace {
        let game = self.game;
        let cfg = self.config;
        let (n, players) = (cfg.n, game.players());
        let mut rng = seed::stream(match_seed, 0);
        let mut sampler = ActionSampler::new(cfg.pstar.clone(), cfg.deviation.clone(), n);
        let mut targets: Vec<Option<usize>> = vec![None; players];
        let mut blocks: Vec<BlockRecord> = Vec::with_capacity(cfg.blocks);
        let mut prev_profiles: Vec<usize> = vec![];
        let mut prev_signals: Vec<usize> = vec![];
        // decoded content of block b - 1, produced at the end of block b
        let mut pending: Vec<Option<Vec<usize>>> = vec![None; players];
        let mut pending_failed = vec![false; players];
        let mut totals = vec![0.0; players];
        let mut digits = vec![0; players];
        let mut event = false;

        for b in 1..=cfg.blocks {
            // tests on block b - 2
            let mut tests = vec![vec![false; players]; players];
            let tested_block = (b >= 3).then(|| b - 2);
            if tested_block.is_some() {
                for k in 0..players {
                    if pending_failed[k] {
                        if cfg.on_decode_failure == DecodeFailurePolicy::Flag {
                            for (i, t) in tests[k].iter_mut().enumerate() {
                                *t = i != k;
                            }
                        }
                        continue;
                    }
                    if let Some(seq) = &pending[k] {
                        for i in 0..players {
                            let own: Vec<usize> = seq.iter().map(|&a| game.profiles().digit(a, i)).collect();
                            tests[k][i] = statistical_block_test(&own, cfg.pstar.marginal(i), cfg.test_epsilon);
                        }
                    }
                }
                for k in 0..players {
                    if targets[k].is_none() {
                        targets[k] = punishment_target(&tests[k]);
                    }
                }
                event |= tests.iter().flatten().any(|&e| e);
            }

            // play block b
            let start = (b - 1) * n;
            let mut profiles = Vec::with_capacity(n);
            let mut signals = Vec::with_capacity(n);
            let mut block_totals = vec![0.0; players];
            for t in start..start + n {
                for (k, d) in digits.iter_mut().enumerate() {
                    *d = if sampler.overrides(k, t) {
                        sampler.action(k, t, &mut rng)
                    } else {
                        match targets[k] {
                            Some(i) => sample_index(self.punishments[i].marginal(k), &mut rng),
                            None => cfg.pstar.sample(k, &mut rng),
                        }
                    };
                }
                let a = game.profiles().index(&digits);
                for (k, u) in block_totals.iter_mut().enumerate() {
                    *u += game.utility(a, k);
                }
                profiles.push(a);
                if self.code.is_some() {
                    signals.push(self.monitoring.sample(a, &mut rng));
                }
            }

            // broadcast block b - 1 and decode it at the end of block b
            let mut public = vec![0; n];
            let mut encode_error = None;
            let mut decoded = vec![None; players];
            let mut decode_errors = vec![None; players];
            if b >= 2 {
                match &self.code {
                    None => decoded = vec![Some(prev_profiles.clone()); players],
                    Some(code) => match encode(code, &prev_profiles) {
                        Err(e) => {
                            encode_error = Some(e.class().to_string());
                            decode_errors = vec![Some("encoder_error".to_string()); players];
                        }
                        Ok(msg) => {
                            public = msg.public;
                            for k in 0..players {
                                let sk: Vec<usize> =
                                    prev_signals.iter().map(|&s| self.monitoring.signals().digit(s, k)).collect();
                                let own: Vec<usize> =
                                    prev_profiles.iter().map(|&a| game.profiles().digit(a, k)).collect();
                                match decode(code, k, &public, &sk, &own) {
                                    Ok(d) => decoded[k] = Some(d),
                                    Err(e) => decode_errors[k] = Some(e.class().to_string()),
                                }
                            }
                        }
                    },
                }
            }
            pending_failed = decode_errors.iter().map(Option::is_some).collect();
            pending = decoded.clone();

            for (k, u) in block_totals.iter().enumerate() {
                totals[k] += u;
            }
            let atypical = (0..players)
                .map(|i| {
                    let own: Vec<usize> = profiles.iter().map(|&a| game.profiles().digit(a, i)).collect();
                    statistical_block_test(&own, cfg.pstar.marginal(i), cfg.test_epsilon)
                })
                .collect();
            let record = BlockRecord {
                block: b,
                profiles: if cfg.record_sequences { profiles.clone() } else { vec![] },
                signals: if cfg.record_sequences { signals.clone() } else { vec![] },
                public: if cfg.record_sequences { public } else { vec![] },
                encode_error,
                decoded: if cfg.record_sequences { decoded } else { vec![None; players] },
                decode_errors,
                tested_block,
                tests,
                atypical,
                punishment: targets.clone(),
                utilities: block_totals.iter().map(|u| u / n as f64).collect(),
            };
            blocks.push(record);
            prev_profiles = profiles;
            prev_signals = signals;
        }
        let stages = cfg.stages() as f64;
        MatchTrace {
            n,
            seed: match_seed,
            blocks,
            event,
            utilities: totals.iter().map(|u| u / stages).collect(),
        }
    }
}

/// One match under `config.master_seed`.
pub fn run_match(game: &StageGame, monitoring: &MonitoringStructure, config: &SimConfig) -> Result<MatchTrace> {
    let setup = Setup::new(game, monitoring, config)?;
    Ok(setup.play(config.master_seed))
}

/// Independent matches in parallel; match `m` uses seed
/// `derive([master_seed, m])`. Output order follows `m`.
pub fn run_matches(
    game: &StageGame,
    monitoring: &MonitoringStructure,
    config: &SimConfig,
    matches: usize,
) -> Result<Vec<MatchTrace>> {
    let setup = Setup::new(game, monitoring, config)?;
    Ok((0..matches as u64)
        .into_par_iter()
        .map(|m| setup.play(seed::derive(&[config.master_seed, m])))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationOutcome {
    pub label: String,
    pub deviator: usize,
    pub utility: f64,
    /// 95% normal half-width of the mean.
    pub ci_half_width: f64,
    pub gain: f64,
    /// Gain allowance: `eps_eq` plus the combined half-width.
    pub tolerance: f64,
    pub detection_rate: f64,
    pub detection_ci95: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub matches: usize,
    pub honest_utilities: Vec<f64>,
    pub honest_ci_half_width: Vec<f64>,
    /// `E_{P*}[u_k]`.
    pub target: Vec<f64>,
    /// `|gamma_k - E_{P*}[u_k]|` for honest play.
    pub distance: Vec<f64>,
    pub false_alarm_rate: f64,
    pub deviations: Vec<DeviationOutcome>,
    pub max_gain: f64,
    pub eq_epsilon: f64,
    pub pass: bool,
}

fn mean_and_half_width(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, 1.96 * (var / n).sqrt())
}

/// Honest baseline plus one batch per library deviation, all with
/// `matches` matches. Sequences are not recorded.
pub fn epsilon_equilibrium_check(
    game: &StageGame,
    monitoring: &MonitoringStructure,
    config: &SimConfig,
    library: &[DeviationSpec],
    matches: usize,
) -> Result<EquilibriumReport> {
    if library.is_empty() {
        return Err(Error::InvalidArgument("deviation library is empty".into()));
    }
    if matches == 0 {
        return Err(Error::InvalidArgument("honest baseline needs at least one match".into()));
    }
    let players = game.players();
    let mut base = config.clone();
    base.deviation = None;
    base.record_sequences = false;
    let honest = run_matches(game, monitoring, &base, matches)?;
    let per_player = |traces: &[MatchTrace], k: usize| -> Vec<f64> { traces.iter().map(|t| t.utilities[k]).collect() };
    let (honest_utilities, honest_ci_half_width): (Vec<f64>, Vec<f64>) =
        (0..players).map(|k| mean_and_half_width(&per_player(&honest, k))).unzip();
    let target = game.expected_utility(&config.pstar);
    let distance = honest_utilities.iter().zip(&target).map(|(g, u)| (g - u).abs()).collect();
    let false_alarm_rate = honest.iter().filter(|t| t.event).count() as f64 / matches as f64;

    let mut deviations = Vec::with_capacity(library.len());
    for (idx, d) in library.iter().enumerate() {
        let mut cfg = base.clone().with_deviation(Some(d.clone()));
        cfg.master_seed = seed::derive(&[config.master_seed, 0xDE71, idx as u64]);
        let traces = run_matches(game, monitoring, &cfg, matches)?;
        let i = d.player;
        let (utility, half) = mean_and_half_width(&per_player(&traces, i));
        let detected = traces.iter().filter(|t| t.first_detection(i).is_some()).count();
        let combined = (half.powi(2) + honest_ci_half_width[i].powi(2)).sqrt();
        deviations.push(DeviationOutcome {
            label: d.label(),
            deviator: i,
            utility,
            ci_half_width: half,
            gain: utility - honest_utilities[i],
            tolerance: config.eq_epsilon + combined,
            detection_rate: detected as f64 / matches as f64,
            detection_ci95: wilson_interval(detected, matches),
        });
    }
    let max_gain = deviations.iter().map(|d| d.gain).fold(f64::NEG_INFINITY, f64::max);
    let pass = deviations.iter().all(|d| d.gain <= d.tolerance);
    Ok(EquilibriumReport {
        matches,
        honest_utilities,
        honest_ci_half_width,
        target,
        distance,
        false_alarm_rate,
        deviations,
        max_gain,
        eq_epsilon: config.eq_epsilon,
        pass,
    })
}

/// Average over matches of whether any honest test fired.
pub fn false_alarm_rate(traces: &[MatchTrace]) -> f64 {
    traces.iter().filter(|t| t.event).count() as f64 / traces.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deviation::DeviationKind;

    fn pd() -> StageGame {
        StageGame::prisoners_dilemma()
    }

    fn pstar(g: &StageGame, p: f64) -> ProductDistribution {
        ProductDistribution::for_game(g, vec![vec![p, 1.0 - p], vec![p, 1.0 - p]]).unwrap()
    }

    #[test]
    fn block_test_bits() {
        let exact = [vec![0; 9], vec![1]].concat();
        assert!(!statistical_block_test(&exact, &[0.9, 0.1], 0.05));
        assert!(statistical_block_test(&[1; 10], &[0.9, 0.1], 0.05));
        // zero-probability symbol
        assert!(statistical_block_test(&[0, 0, 0, 1], &[1.0, 0.0], 0.9));
    }

    #[test]
    fn pd_punishment_is_defect() {
        let g = pd();
        let p = punishment_profile(&g, 0).unwrap();
        assert_eq!(p.marginal(1), &[0.0, 1.0]);
        // best response of the punished player earns its min-max level
        let u = g.expected_utility(&p);
        assert!((u[0] - 1.0).abs() < 1e-9);
        assert!(punishment_profile(&g, 2).is_err());
    }

    #[test]
    fn zero_game_punishment_deterministic() {
        let g = StageGame::new(
            vec![vec!["x".into(), "y".into()], vec!["l".into(), "r".into()]],
            vec![vec![0.0, 0.0]; 4],
        )
        .unwrap();
        assert_eq!(punishment_profile(&g, 0).unwrap(), punishment_profile(&g, 0).unwrap());
    }

    #[test]
    fn lowest_flag_wins() {
        assert_eq!(punishment_target(&[false, true, true]), Some(1));
        assert_eq!(punishment_target(&[true, true]), Some(0));
        assert_eq!(punishment_target(&[false, false]), None);
    }

    #[test]
    fn three_blocks_one_test() {
        let g = pd();
        let m = MonitoringStructure::fig3(&g, 0.5, 3).unwrap();
        let cfg = SimConfig::new(20, 3, 0.2, pstar(&g, 0.9)).with_layer(MonitoringLayer::Ideal);
        let t = run_match(&g, &m, &cfg).unwrap();
        let tested: Vec<usize> = t.blocks.iter().filter_map(|b| b.tested_block).collect();
        assert_eq!(tested, vec![1]);
        assert_eq!(t.blocks[2].tested_block, Some(1));
        assert!(t.blocks[0].public.iter().all(|&s| s == 0));
    }

    #[test]
    fn config_validation() {
        let g = pd();
        let m = MonitoringStructure::fig3(&g, 0.5, 3).unwrap();
        let p = pstar(&g, 0.9);
        assert!(run_match(&g, &m, &SimConfig::new(10, 2, 0.1, p.clone())).is_err());
        assert!(run_match(&g, &m, &SimConfig::new(0, 3, 0.1, p.clone())).is_err());
        assert!(run_match(&g, &m, &SimConfig::new(10, 3, 0.0, p)).is_err());
        assert_eq!(recommended_blocks(&g, 0.5), 64);
    }

    #[test]
    fn codec_refusal_propagates() {
        let g = pd();
        let m = MonitoringStructure::fig3(&g, 1.0, 3).unwrap();
        let cfg = SimConfig::new(8, 3, 0.05, ProductDistribution::uniform(&g));
        assert!(matches!(run_match(&g, &m, &cfg), Err(Error::RateInfeasible { .. })));
    }

    #[test]
    fn trace_invariants() {
        let g = pd();
        let m = MonitoringStructure::fig3(&g, 0.02, 3).unwrap();
        let dev = DeviationSpec::from_block(0, DeviationKind::Constant { action: 1 }, 3, 8);
        let cfg = SimConfig::new(8, 8, 0.1, pstar(&g, 0.9))
            .with_deviation(Some(dev))
            .with_seed(5);
        let t = run_match(&g, &m, &cfg).unwrap();
        assert_eq!(t.blocks.len(), 8);
        let replay = t.replay_utilities(&g);
        for k in 0..2 {
            assert!((replay[k] - t.utilities[k]).abs() < 1e-12);
        }
        for w in t.blocks.windows(2) {
            for k in 0..2 {
                // absorbing
                if let Some(i) = w[0].punishment[k] {
                    assert_eq!(w[1].punishment[k], Some(i));
                }
                // punishment only starts from a test in the same block
                if w[0].punishment[k].is_none() && w[1].punishment[k].is_some() {
                    assert!(w[1].tests[k].iter().any(|&e| e));
                }
            }
        }
        // the first two blocks are never tested
        assert!(t.blocks[..2].iter().all(|b| b.tests.iter().flatten().all(|&e| !e)));
        assert!(t.blocks[..2].iter().all(|b| b.punishment.iter().all(Option::is_none)));
    }

    #[test]
    fn punished_players_follow_plan() {
        let g = pd();
        let m = MonitoringStructure::fig3(&g, 0.5, 3).unwrap();
        let dev = DeviationSpec::from_block(0, DeviationKind::Constant { action: 1 }, 3, 50);
        let cfg = SimConfig::new(50, 6, 0.2, pstar(&g, 0.9))
            .with_layer(MonitoringLayer::Ideal)
            .with_deviation(Some(dev));
        let t = run_match(&g, &m, &cfg).unwrap();
        assert_eq!(t.first_detection(0), Some(5));
        assert_eq!(t.first_atypical_block(0), Some(3));
        let last = t.blocks.last().unwrap();
        assert_eq!(last.punishment[1], Some(0));
        // both defect under punishment
        assert!(last.profiles.iter().all(|&a| a == 3));
        assert!((last.utilities[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_export() {
        let g = pd();
        let m = MonitoringStructure::fig3(&g, 0.5, 3).unwrap();
        let cfg = SimConfig::new(10, 4, 0.2, pstar(&g, 0.9)).with_layer(MonitoringLayer::Ideal);
        let t = run_match(&g, &m, &cfg).unwrap();
        let mut buf = vec![];
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "block,tested_block,E_1_1,E_1_2,E_2_1,E_2_2,punish_1,punish_2,u_1,u_2,decode_failures"
        );
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn empty_library_rejected() {
        let g = pd();
        let m = MonitoringStructure::fig3(&g, 0.5, 3).unwrap();
        let cfg = SimConfig::new(10, 3, 0.2, pstar(&g, 0.9)).with_layer(MonitoringLayer::Ideal);
        assert!(epsilon_equilibrium_check(&g, &m, &cfg, &[], 4).is_err());
        let lib = [DeviationSpec::new(0, DeviationKind::Constant { action: 1 })];
        assert!(epsilon_equilibrium_check(&g, &m, &cfg, &lib, 0).is_err());
    }

    #[test]
    fn batch_is_deterministic() {
        let g = pd();
        let m = MonitoringStructure::fig3(&g, 0.02, 3).unwrap();
        let cfg = SimConfig::new(8, 4, 0.1, pstar(&g, 0.9)).with_seed(9);
        let a = run_matches(&g, &m, &cfg, 6).unwrap();
        let b = run_matches(&g, &m, &cfg, 6).unwrap();
        assert_eq!(a, b);
    }
}
