//! Dense tableau simplex for small LPs of the form
//! `max c'y  s.t.  A y <= b, y >= 0` with `b >= 0`.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub primal: Vec<f64>,
    /// Shadow prices of the constraints.
    pub dual: Vec<f64>,
}

/// Solves the LP with Bland's rule, so ties resolve to the lowest index and
/// the method cannot cycle.
pub fn maximize(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let m = a.len();
    let n = c.len();
    if b.len() != m {
        return Err(Error::LengthMismatch { left: b.len(), right: m });
    }
    if let Some(row) = a.iter().find(|r| r.len() != n) {
        return Err(Error::LengthMismatch { left: row.len(), right: n });
    }
    if b.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidArgument("right-hand side must be nonnegative".into()));
    }
    let width = n + m + 1;
    // rows 0..m constraints, row m objective (stored as -c)
    let mut t = vec![vec![0.0; width]; m + 1];
    for r in 0..m {
        t[r][..n].copy_from_slice(&a[r]);
        t[r][n + r] = 1.0;
        t[r][width - 1] = b[r];
    }
    for j in 0..n {
        t[m][j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    loop {
        let Some(col) = (0..n + m).find(|&j| t[m][j] < -PIVOT_TOL) else {
            break;
        };
        let mut row = None;
        let mut best = f64::INFINITY;
        for r in 0..m {
            if t[r][col] > PIVOT_TOL {
                let ratio = t[r][width - 1] / t[r][col];
                let better = ratio < best - PIVOT_TOL
                    || (ratio <= best + PIVOT_TOL && row.is_some_and(|q: usize| basis[r] < basis[q]));
                if row.is_none() || better {
                    best = ratio;
                    row = Some(r);
                }
            }
        }
        let Some(row) = row else {
            return Err(Error::InvalidArgument("LP is unbounded".into()));
        };
        let p = t[row][col];
        for x in t[row].iter_mut() {
            *x /= p;
        }
        let pivot_row = t[row].clone();
        for (r, line) in t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = line[col];
            if f != 0.0 {
                for (x, y) in line.iter_mut().zip(&pivot_row) {
                    *x -= f * y;
                }
            }
        }
        basis[row] = col;
    }
    let mut primal = vec![0.0; n];
    for (r, &v) in basis.iter().enumerate() {
        if v < n {
            primal[v] = t[r][width - 1];
        }
    }
    let dual = (0..m).map(|r| t[m][n + r]).collect();
    Ok(LpSolution {
        value: t[m][width - 1],
        primal,
        dual,
    })
}

/// Value and optimal strategies of the zero-sum game where the row player
/// receives `payoff[r][c]` and maximizes. Returns `(value, row mix, column mix)`.
pub fn solve_matrix_game(payoff: &[Vec<f64>]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let rows = payoff.len();
    let cols = payoff.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidArgument("empty payoff matrix".into()));
    }
    let lo = payoff.iter().flatten().fold(f64::INFINITY, |m, &x| m.min(x));
    let shift = 1.0 - lo;
    let shifted: Vec<Vec<f64>> = payoff
        .iter()
        .map(|r| r.iter().map(|x| x + shift).collect())
        .collect();
    // column player: max sum y  s.t.  A y <= 1
    let sol = maximize(&vec![1.0; cols], &shifted, &vec![1.0; rows])?;
    let v = 1.0 / sol.value;
    let column = sol.primal.iter().map(|y| y * v).collect();
    let row = sol.dual.iter().map(|x| x * v).collect();
    Ok((v - shift, row, column))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_lp() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let s = maximize(
            &[3.0, 5.0],
            &[vec![1.0, 0.0], vec![0.0, 2.0], vec![3.0, 2.0]],
            &[4.0, 12.0, 18.0],
        )
        .unwrap();
        assert!((s.value - 36.0).abs() < 1e-12);
        assert!((s.primal[0] - 2.0).abs() < 1e-12 && (s.primal[1] - 6.0).abs() < 1e-12);
        // strong duality
        let dual_obj: f64 = s.dual.iter().zip([4.0, 12.0, 18.0]).map(|(y, b)| y * b).sum();
        assert!((dual_obj - 36.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_detected() {
        assert!(maximize(&[1.0], &[vec![-1.0]], &[1.0]).is_err());
    }

    #[test]
    fn matching_pennies() {
        let (v, r, c) = solve_matrix_game(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        assert!(v.abs() < 1e-12);
        for p in r.iter().chain(&c) {
            assert!((p - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn rock_paper_scissors() {
        let m = vec![
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
            vec![-1.0, 1.0, 0.0],
        ];
        let (v, r, c) = solve_matrix_game(&m).unwrap();
        assert!(v.abs() < 1e-12);
        for p in r.iter().chain(&c) {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }
}
