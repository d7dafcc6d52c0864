//! JSON game files.
//!
//! ```json
//! {
//!   "players": 2,
//!   "actions": [["T", "B"], ["L", "R"]],
//!   "utilities": [[3, 3], [0, 4], [4, 0], [1, 1]],
//!   "monitoring": { "kind": "fig3", "delta": 0.5 },
//!   "public_alphabet_size": 3
//! }
//! ```
//!
//! `utilities` has one row per action profile in row-major order (player 1's
//! action varies slowest), each row listing every player's payoff. A
//! `"table"` monitoring block gives `signals` labels per player and one
//! `probabilities` row per action profile over signal profiles, both
//! row-major.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{MonitoringStructure, ProductDistribution, StageGame};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub players: usize,
    pub actions: Vec<Vec<String>>,
    pub utilities: Vec<Vec<f64>>,
    pub monitoring: MonitoringConfig,
    pub public_alphabet_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MonitoringConfig {
    Fig3 {
        delta: f64,
    },
    Table {
        signals: Vec<Vec<String>>,
        probabilities: Vec<Vec<f64>>,
    },
}

impl GameConfig {
    /// The prisoner's dilemma with the binary channel at `delta`.
    pub fn prisoners_dilemma(delta: f64, public_alphabet_size: usize) -> Self {
        let g = StageGame::prisoners_dilemma();
        Self {
            players: 2,
            actions: (0..2).map(|k| g.action_labels(k).to_vec()).collect(),
            utilities: (0..g.profile_count()).map(|a| g.utility_vector(a).to_vec()).collect(),
            monitoring: MonitoringConfig::Fig3 { delta },
            public_alphabet_size,
        }
    }
}

fn field(name: &str, e: Error) -> Error {
    let msg = match e {
        Error::InvalidGame(m) | Error::InvalidMonitoring(m) | Error::InvalidDistribution(m) => m,
        other => other.to_string(),
    };
    Error::Config(format!("field `{name}`: {msg}"))
}

/// Checks every invariant and builds the game and monitoring structure.
/// Labels are trimmed; action order follows the file.
pub fn validate_game(raw: &GameConfig) -> Result<(StageGame, MonitoringStructure)> {
    if raw.players < 2 {
        return Err(Error::Config(format!(
            "field `players`: K >= 2 required, got {}",
            raw.players
        )));
    }
    if raw.actions.len() != raw.players {
        return Err(Error::Config(format!(
            "field `actions`: dimension mismatch: {} action sets for {} players",
            raw.actions.len(),
            raw.players
        )));
    }
    let trim = |sets: &[Vec<String>]| -> Vec<Vec<String>> {
        sets.iter()
            .map(|s| s.iter().map(|l| l.trim().to_string()).collect())
            .collect()
    };
    let game = StageGame::new(trim(&raw.actions), raw.utilities.clone()).map_err(|e| {
        let name = if e.to_string().contains("utility") { "utilities" } else { "actions" };
        field(name, e)
    })?;
    let monitoring = match &raw.monitoring {
        MonitoringConfig::Fig3 { delta } => MonitoringStructure::fig3(&game, *delta, raw.public_alphabet_size),
        MonitoringConfig::Table { signals, probabilities } => {
            MonitoringStructure::new(&game, trim(signals), probabilities.clone(), raw.public_alphabet_size)
        }
    }
    .map_err(|e| {
        let name = if e.to_string().contains("public alphabet") {
            "public_alphabet_size"
        } else {
            "monitoring"
        };
        field(name, e)
    })?;
    Ok((game, monitoring))
}

/// Parses a game document without validating it. Syntax errors carry line
/// and column.
pub fn parse_game_config(text: &str) -> Result<GameConfig> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("line {} column {}: {e}", e.line(), e.column())))
}

pub fn load_game_config(path: &Path) -> Result<GameConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_game_config(&text).map_err(|e| in_file(path, e))
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// Parses and validates a game document.
pub fn parse_game(text: &str) -> Result<(StageGame, MonitoringStructure)> {
    validate_game(&parse_game_config(text)?)
}

pub fn load_game(path: &Path) -> Result<(StageGame, MonitoringStructure)> {
    validate_game(&load_game_config(path)?).map_err(|e| in_file(path, e))
}

/// Parses `P*` given inline as `0.9,0.1;0.9,0.1` or as a JSON array of
/// per-player vectors.
pub fn parse_pstar(text: &str, game: &StageGame) -> Result<ProductDistribution> {
    let t = text.trim();
    let marginals: Vec<Vec<f64>> = if t.starts_with('[') {
        serde_json::from_str(t)
            .map_err(|e| Error::Config(format!("P*: line {} column {}: {e}", e.line(), e.column())))?
    } else {
        t.split(';')
            .enumerate()
            .map(|(k, part)| {
                part.split(',')
                    .map(|x| {
                        x.trim().parse::<f64>().map_err(|e| {
                            Error::Config(format!("P*: player {} entry {:?}: {e}", k + 1, x.trim()))
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?
    };
    ProductDistribution::for_game(game, marginals).map_err(|e| field("pstar", e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PD: &str = r#"{
  "players": 2,
  "actions": [["T", "B"], ["L", "R"]],
  "utilities": [[3, 3], [0, 4], [4, 0], [1, 1]],
  "monitoring": { "kind": "fig3", "delta": 0.5 },
  "public_alphabet_size": 3
}"#;

    #[test]
    fn pd_file() {
        let (g, m) = parse_game(PD).unwrap();
        assert_eq!(g, StageGame::prisoners_dilemma());
        assert_eq!(m, MonitoringStructure::fig3(&g, 0.5, 3).unwrap());
        assert!(PD.lines().count() <= 20);
    }

    #[test]
    fn builtin_matches_file() {
        let text = serde_json::to_string(&GameConfig::prisoners_dilemma(0.5, 3)).unwrap();
        assert_eq!(parse_game(&text).unwrap(), parse_game(PD).unwrap());
    }

    #[test]
    fn table_monitoring() {
        let text = r#"{
  "players": 2,
  "actions": [[" T", "B"], ["L", "R"]],
  "utilities": [[3, 3], [0, 4], [4, 0], [1, 1]],
  "monitoring": { "kind": "table", "signals": [["x"], ["y"]],
                  "probabilities": [[1], [1], [1], [0.98]] },
  "public_alphabet_size": 2
}"#;
        let err = parse_game(text).unwrap_err().to_string();
        assert!(err.contains("row not stochastic"), "{err}");
        assert!(err.contains("monitoring"), "{err}");
        let ok = text.replace("0.98", "1");
        let (g, m) = parse_game(&ok).unwrap();
        assert_eq!(g.action_labels(0)[0], "T");
        assert_eq!(m.signal_count(0), 1);
    }

    #[test]
    fn errors_carry_context() {
        let one = PD.replace("\"players\": 2", "\"players\": 1");
        assert!(parse_game(&one).unwrap_err().to_string().contains("K >= 2 required"));
        let dup = PD.replace("[\"T\", \"B\"]", "[\"T\", \"T\"]");
        assert!(parse_game(&dup).unwrap_err().to_string().contains("duplicate"));
        let dim = PD.replace("[1, 1]]", "[1]]");
        let e = parse_game(&dim).unwrap_err().to_string();
        assert!(e.contains("utilities") && e.contains("dimension mismatch"), "{e}");
        let syntax = PD.replace("\"delta\": 0.5", "\"delta\": ");
        let e = parse_game(&syntax).unwrap_err().to_string();
        assert!(e.contains("line 5"), "{e}");
        let unknown = PD.replace("\"players\"", "\"player_count\"");
        assert!(parse_game(&unknown).is_err());
    }

    #[test]
    fn pstar_formats() {
        let g = StageGame::prisoners_dilemma();
        let a = parse_pstar("0.9,0.1;0.9,0.1", &g).unwrap();
        let b = parse_pstar("[[0.9,0.1],[0.9,0.1]]", &g).unwrap();
        assert_eq!(a, b);
        assert!(parse_pstar("0.9,0.2;0.9,0.1", &g).is_err());
        assert!(parse_pstar("0.9,x;0.9,0.1", &g).is_err());
        assert!(parse_pstar("1", &g).is_err());
    }
}
