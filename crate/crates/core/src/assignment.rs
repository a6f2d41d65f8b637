//! Euclidean cost matrices and exact minimum-cost linear assignment.
//!
//! [`Hungarian`] is the O(n³) shortest-augmenting-path form of Kuhn-Munkres
//! with row/column potentials. It holds its scratch buffers so a tracker can
//! reuse one instance across frames without allocating.
//!
//! Ties are broken toward the lowest column index at every choice point, so
//! the result is a deterministic function of the matrix entries.
//! [`brute_force_assignment`] enumerates permutations in lexicographic order
//! and keeps the first strict minimum; it exists to check the solver.

use thiserror::Error;

use crate::types::{euclidean_distance, Point2D};

/// Largest side length accepted by [`brute_force_assignment`].
pub const BRUTE_FORCE_MAX_N: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AssignmentError {
    #[error("size mismatch: {tracks} tracks vs {detections} detections")]
    SizeMismatch { tracks: usize, detections: usize },
    #[error("cost matrix is empty")]
    Empty,
    #[error("cost matrix is not square: row {row} has {len} entries, expected {n}")]
    NotSquare { row: usize, len: usize, n: usize },
    #[error("non-finite cost at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("negative cost {value} at ({row}, {col})")]
    Negative { row: usize, col: usize, value: f64 },
    #[error("matrix side {n} exceeds the brute-force limit of {max}")]
    TooLarge { n: usize, max: usize },
}

/// Square matrix of non-negative finite costs; row = track, column = detection.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn from_row_major(n: usize, entries: Vec<f64>) -> Result<Self, AssignmentError> {
        if n == 0 {
            return Err(AssignmentError::Empty);
        }
        if entries.len() != n * n {
            return Err(AssignmentError::NotSquare {
                row: entries.len() / n,
                len: entries.len() % n,
                n,
            });
        }
        for (k, &value) in entries.iter().enumerate() {
            let (row, col) = (k / n, k % n);
            if !value.is_finite() {
                return Err(AssignmentError::NonFinite { row, col });
            }
            if value < 0.0 {
                return Err(AssignmentError::Negative { row, col, value });
            }
        }
        Ok(CostMatrix { n, entries })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, AssignmentError> {
        let n = rows.len();
        if n == 0 {
            return Err(AssignmentError::Empty);
        }
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(AssignmentError::NotSquare {
                row,
                len: r.len(),
                n,
            });
        }
        Self::from_row_major(n, rows.into_iter().flatten().collect())
    }

    /// Side length.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Sum of `C(i, mapping[i])` accumulated in row order.
    pub fn cost_of(&self, mapping: &[usize]) -> f64 {
        mapping
            .iter()
            .enumerate()
            .fold(0.0, |acc, (i, &j)| acc + self.get(i, j))
    }

    /// Overwrite with the distance matrix for a new pair of point sets,
    /// reusing the allocation.
    pub(crate) fn refill(
        &mut self,
        tracks: &[Point2D],
        detections: &[Point2D],
    ) -> Result<(), AssignmentError> {
        check_point_sets(tracks, detections)?;
        let n = tracks.len();
        self.n = n;
        self.entries.clear();
        self.entries.reserve(n * n);
        for t in tracks {
            for d in detections {
                let c = euclidean_distance(*t, *d);
                if !c.is_finite() {
                    let k = self.entries.len();
                    return Err(AssignmentError::NonFinite {
                        row: k / n,
                        col: k % n,
                    });
                }
                self.entries.push(c);
            }
        }
        Ok(())
    }

    pub(crate) fn empty() -> Self {
        CostMatrix {
            n: 0,
            entries: Vec::new(),
        }
    }
}

fn check_point_sets(tracks: &[Point2D], detections: &[Point2D]) -> Result<(), AssignmentError> {
    if tracks.len() != detections.len() {
        return Err(AssignmentError::SizeMismatch {
            tracks: tracks.len(),
            detections: detections.len(),
        });
    }
    if tracks.is_empty() {
        return Err(AssignmentError::Empty);
    }
    Ok(())
}

/// `C(i, j) = ‖tracks[i] − detections[j]‖₂`.
pub fn build_cost_matrix(
    tracks: &[Point2D],
    detections: &[Point2D],
) -> Result<CostMatrix, AssignmentError> {
    let mut c = CostMatrix::empty();
    c.refill(tracks, detections)?;
    Ok(c)
}

/// A permutation together with its total cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `mapping[i]` is the column assigned to row `i`.
    pub mapping: Vec<usize>,
    pub total_cost: f64,
}

/// Reusable Kuhn-Munkres solver.
#[derive(Debug, Default, Clone)]
pub struct Hungarian {
    // 1-based bookkeeping; index 0 is the virtual root column.
    row_pot: Vec<f64>,
    col_pot: Vec<f64>,
    col_owner: Vec<usize>,
    way: Vec<usize>,
    min_slack: Vec<f64>,
    used: Vec<bool>,
}

impl Hungarian {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, costs: &CostMatrix) -> Assignment {
        let mut mapping = Vec::with_capacity(costs.n());
        let total_cost = self.solve_into(costs, &mut mapping);
        Assignment {
            mapping,
            total_cost,
        }
    }

    /// Writes the optimal row→column mapping into `mapping` and returns its cost.
    pub fn solve_into(&mut self, costs: &CostMatrix, mapping: &mut Vec<usize>) -> f64 {
        let n = costs.n();
        self.reset(n);

        for row in 1..=n {
            self.col_owner[0] = row;
            let mut j0 = 0usize;
            self.min_slack.iter_mut().for_each(|m| *m = f64::INFINITY);
            self.used.iter_mut().for_each(|u| *u = false);

            loop {
                self.used[j0] = true;
                let i0 = self.col_owner[j0];
                let cost_row = costs.row(i0 - 1);
                let mut delta = f64::INFINITY;
                let mut j1 = 0usize;

                for j in 1..=n {
                    if self.used[j] {
                        continue;
                    }
                    let reduced = cost_row[j - 1] - self.row_pot[i0] - self.col_pot[j];
                    if reduced < self.min_slack[j] {
                        self.min_slack[j] = reduced;
                        self.way[j] = j0;
                    }
                    // strict: the lowest column wins ties
                    if self.min_slack[j] < delta {
                        delta = self.min_slack[j];
                        j1 = j;
                    }
                }

                for j in 0..=n {
                    if self.used[j] {
                        self.row_pot[self.col_owner[j]] += delta;
                        self.col_pot[j] -= delta;
                    } else {
                        self.min_slack[j] -= delta;
                    }
                }

                j0 = j1;
                if self.col_owner[j0] == 0 {
                    break;
                }
            }

            loop {
                let j1 = self.way[j0];
                self.col_owner[j0] = self.col_owner[j1];
                j0 = j1;
                if j0 == 0 {
                    break;
                }
            }
        }

        mapping.clear();
        mapping.resize(n, 0);
        for j in 1..=n {
            let owner = self.col_owner[j];
            if owner > 0 {
                mapping[owner - 1] = j - 1;
            }
        }
        costs.cost_of(mapping)
    }

    fn reset(&mut self, n: usize) {
        for v in [&mut self.row_pot, &mut self.col_pot, &mut self.min_slack] {
            v.clear();
            v.resize(n + 1, 0.0);
        }
        for v in [&mut self.col_owner, &mut self.way] {
            v.clear();
            v.resize(n + 1, 0);
        }
        self.used.clear();
        self.used.resize(n + 1, false);
    }
}

/// Exact minimum-cost assignment.
pub fn solve_assignment(costs: &CostMatrix) -> Assignment {
    Hungarian::new().solve(costs)
}

/// Exhaustive search over all `n!` permutations, for `n <= 10`.
pub fn brute_force_assignment(costs: &CostMatrix) -> Result<Assignment, AssignmentError> {
    let n = costs.n();
    if n > BRUTE_FORCE_MAX_N {
        return Err(AssignmentError::TooLarge {
            n,
            max: BRUTE_FORCE_MAX_N,
        });
    }

    struct Search<'a> {
        costs: &'a CostMatrix,
        current: Vec<usize>,
        used: Vec<bool>,
        best: Vec<usize>,
        best_cost: f64,
    }

    impl Search<'_> {
        fn descend(&mut self, row: usize, partial: f64) {
            let n = self.costs.n();
            if row == n {
                if partial < self.best_cost {
                    self.best_cost = partial;
                    self.best.copy_from_slice(&self.current);
                }
                return;
            }
            for col in 0..n {
                if self.used[col] {
                    continue;
                }
                self.used[col] = true;
                self.current[row] = col;
                self.descend(row + 1, partial + self.costs.get(row, col));
                self.used[col] = false;
            }
        }
    }

    let mut search = Search {
        costs,
        current: vec![0; n],
        used: vec![false; n],
        best: (0..n).collect(),
        best_cost: f64::INFINITY,
    };
    search.descend(0, 0.0);
    Ok(Assignment {
        total_cost: costs.cost_of(&search.best),
        mapping: search.best,
    })
}
