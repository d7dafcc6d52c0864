//! Grid sweep over product distributions.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::{convex_hull, convex_hull_clip, polygon_area, Point};
use super::minmax::{is_individually_rational, minmax_levels, MinmaxLevels};
use crate::constraint::compute_rstar_with;
use crate::error::{Error, Result};
use crate::game::{MonitoringStructure, ProductDistribution, StageGame};
use crate::graph::DEFAULT_SUPPORT_THRESHOLD;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub grid_step: f64,
    /// Minimum probability of every action on the grid.
    pub support_floor: f64,
    /// Compute the two-dimensional hulls (two players only).
    pub hull: bool,
    pub support_threshold: f64,
}

impl SweepOptions {
    pub fn new(grid_step: f64, support_floor: f64) -> Self {
        Self {
            grid_step,
            support_floor,
            hull: true,
            support_threshold: DEFAULT_SUPPORT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub pstar: Vec<Vec<f64>>,
    pub utilities: Vec<f64>,
    pub rstar: f64,
    pub in_r: bool,
    pub ir: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionHulls {
    /// `conv u(R)` clipped to the IR quadrant.
    pub clipped: Vec<Point>,
    /// `conv(u(R) ∩ IR)`: hull of the individually rational points of `R`.
    pub ir_points: Vec<Point>,
    /// Pure-payoff hull clipped to IR.
    pub folk: Vec<Point>,
    /// Hull of every IR grid point, whatever its rate; the best any grid
    /// region can do.
    pub grid_folk: Vec<Point>,
}

impl RegionHulls {
    pub fn folk_area(&self) -> f64 {
        polygon_area(&self.folk)
    }

    /// `area(conv(u(R) ∩ IR)) / area(folk)`.
    pub fn area_ratio(&self) -> f64 {
        ratio(polygon_area(&self.ir_points), self.folk_area())
    }

    /// `area(conv u(R) ∩ IR) / area(folk)`.
    pub fn clipped_ratio(&self) -> f64 {
        ratio(polygon_area(&self.clipped), self.folk_area())
    }

    /// Ratio reached by the full grid; the gap to 1 is the discretization loss.
    pub fn grid_ratio(&self) -> f64 {
        ratio(polygon_area(&self.grid_folk), self.folk_area())
    }

    /// Slack allowed when comparing a grid region with the folk region.
    pub fn grid_tolerance(&self) -> f64 {
        1.0 - self.grid_ratio() + 1e-9
    }

    /// True when the region hull matches the folk hull up to grid resolution.
    pub fn covers_folk(&self) -> bool {
        self.area_ratio() >= 1.0 - self.grid_tolerance()
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionResult {
    pub options: SweepOptions,
    pub levels: MinmaxLevels,
    pub records: Vec<RegionRecord>,
    pub hulls: Option<RegionHulls>,
}

/// Grid points of the simplex over `n` actions with resolution `1/units`,
/// every coordinate at least `floor`, in lexicographic order.
pub fn simplex_grid(n: usize, units: usize, floor: f64) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for x in 0..=left {
            prefix.push(x);
            rec(n - 1, left - x, prefix, out);
            prefix.pop();
        }
    }
    let mut raw = vec![];
    rec(n, units, &mut vec![], &mut raw);
    raw.into_iter()
        .map(|c| c.into_iter().map(|x| x as f64 / units as f64).collect::<Vec<f64>>())
        .filter(|p| p.iter().all(|&x| x >= floor - 1e-9))
        .collect()
}

fn grid_units(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::InvalidArgument(format!(
            "grid step must lie in (0, 0.5], got {step}"
        )));
    }
    let units = (1.0 / step).round();
    if (units * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "grid step {step} does not divide 1"
        )));
    }
    Ok(units as usize)
}

/// Evaluates membership in `R`, utilities and IR on the product grid.
pub fn sweep_region(
    game: &StageGame,
    monitoring: &MonitoringStructure,
    options: SweepOptions,
) -> Result<RegionResult> {
    let units = grid_units(options.grid_step)?;
    if options.support_floor < 0.0 {
        return Err(Error::InvalidArgument("support floor must be nonnegative".into()));
    }
    if options.hull && game.players() != 2 {
        return Err(Error::Unsupported(format!(
            "hulls are two-dimensional; the game has {} players",
            game.players()
        )));
    }
    let levels = minmax_levels(game)?;
    let grids: Vec<Vec<Vec<f64>>> = game
        .action_counts()
        .iter()
        .map(|&n| simplex_grid(n, units, options.support_floor))
        .collect();
    let shape = crate::radix::MixedRadix::new(grids.iter().map(Vec::len).collect());
    let records = (0..shape.size())
        .into_par_iter()
        .map(|x| {
            let digits = shape.digits(x);
            let pstar: Vec<Vec<f64>> = digits
                .iter()
                .enumerate()
                .map(|(k, &d)| grids[k][d].clone())
                .collect();
            let p = ProductDistribution::new(pstar.clone())?;
            let report = compute_rstar_with(game, monitoring, &p, options.support_threshold)?;
            let utilities = game.expected_utility(&p);
            let ir = is_individually_rational(&utilities, &levels.levels)?;
            Ok(RegionRecord {
                pstar,
                utilities,
                rstar: report.rstar,
                in_r: report.satisfied,
                ir,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let hulls = options.hull.then(|| {
        let lv = [levels.levels[0], levels.levels[1]];
        let pt = |r: &RegionRecord| Point::new(r.utilities[0], r.utilities[1]);
        let in_r: Vec<Point> = records.iter().filter(|r| r.in_r).map(pt).collect();
        let in_r_ir: Vec<Point> = records.iter().filter(|r| r.in_r && r.ir).map(pt).collect();
        let grid_ir: Vec<Point> = records.iter().filter(|r| r.ir).map(pt).collect();
        let pure: Vec<Point> = (0..game.profile_count())
            .map(|a| Point::new(game.utility(a, 0), game.utility(a, 1)))
            .collect();
        RegionHulls {
            clipped: convex_hull_clip(&in_r, lv),
            ir_points: convex_hull(&in_r_ir),
            folk: convex_hull_clip(&pure, lv),
            grid_folk: convex_hull(&grid_ir),
        }
    });
    Ok(RegionResult {
        options,
        levels,
        records,
        hulls,
    })
}

/// Both conventions: floor 0 and floor equal to the grid step.
pub fn sweep_both_conventions(
    game: &StageGame,
    monitoring: &MonitoringStructure,
    grid_step: f64,
) -> Result<(RegionResult, RegionResult)> {
    let hull = game.players() == 2;
    let mut zero = SweepOptions::new(grid_step, 0.0);
    zero.hull = hull;
    let mut floored = SweepOptions::new(grid_step, grid_step);
    floored.hull = hull;
    Ok((
        sweep_region(game, monitoring, zero)?,
        sweep_region(game, monitoring, floored)?,
    ))
}

/// Header of the region CSV: `p{k}_{label}` per player and action, then
/// `u1..uK`, `rstar`, `in_r`, `ir`.
pub fn region_csv_header(game: &StageGame) -> Vec<String> {
    let mut h = vec![];
    for k in 0..game.players() {
        for l in game.action_labels(k) {
            h.push(format!("p{}_{}", k + 1, l));
        }
    }
    for k in 0..game.players() {
        h.push(format!("u{}", k + 1));
    }
    h.extend(["rstar", "in_r", "ir"].map(String::from));
    h
}

pub fn write_region_csv<W: Write>(game: &StageGame, result: &RegionResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv write failed: {e}"));
    w.write_record(region_csv_header(game)).map_err(io)?;
    for r in &result.records {
        let mut row: Vec<String> = r.pstar.iter().flatten().map(|p| format!("{p}")).collect();
        row.extend(r.utilities.iter().map(|u| format!("{u}")));
        row.push(format!("{}", r.rstar));
        row.push(r.in_r.to_string());
        row.push(r.ir.to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidArgument(format!("csv write failed: {e}")))
}

/// Columns `hull, vertex, u1, u2`; hull is one of `clipped`, `ir_points`,
/// `folk`, `grid_folk`.
pub fn write_hull_csv<W: Write>(result: &RegionResult, out: W) -> Result<()> {
    let hulls = result
        .hulls
        .as_ref()
        .ok_or_else(|| Error::Unsupported("no hulls were computed".into()))?;
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidArgument(format!("csv write failed: {e}"));
    w.write_record(["hull", "vertex", "u1", "u2"]).map_err(io)?;
    for (name, poly) in [
        ("clipped", &hulls.clipped),
        ("ir_points", &hulls.ir_points),
        ("folk", &hulls.folk),
        ("grid_folk", &hulls.grid_folk),
    ] {
        for (v, p) in poly.iter().enumerate() {
            w.write_record([name.to_string(), v.to_string(), format!("{}", p.x), format!("{}", p.y)])
                .map_err(io)?;
        }
    }
    w.flush()
        .map_err(|e| Error::InvalidArgument(format!("csv write failed: {e}")))
}
