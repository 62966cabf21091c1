//! Gated minimum-cost bipartite assignment.
//!
//! Entries above the gate threshold (or infeasible) are removed before
//! solving, then a Hungarian solve finds the cheapest assignment among
//! those of maximum feasible cardinality. Rectangular matrices are padded
//! with dummy nodes internally; dummy matches come back as unmatched.

use crate::cost::CostMatrix;

/// Outcome of one assignment round. Matched pairs carry their cost;
/// `unmatched_rows` are track identities, `unmatched_cols` detection
/// indices, so that `matches` plus the unmatched lists partition both
/// index sets.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    pub matches: Vec<(i64, usize, f64)>,
    pub unmatched_rows: Vec<i64>,
    pub unmatched_cols: Vec<usize>,
}

impl AssignmentResult {
    pub fn total_cost(&self) -> f64 {
        self.matches.iter().map(|m| m.2).sum()
    }
}

/// Solve the gated assignment problem. Entries with `cost > threshold` or
/// marked infeasible are excluded up front; among gate-respecting
/// assignments the result has maximum cardinality and, within that,
/// minimum total cost. Degenerate sizes (0xN, Nx0) return all-unmatched.
pub fn solve(cost: &CostMatrix, threshold: f64) -> AssignmentResult {
    let rows = cost.rows();
    let cols = cost.cols();

    let feasible = |i: usize, j: usize| {
        let c = cost.get(i, j);
        c.is_finite() && c <= threshold
    };

    if rows == 0 || cols == 0 {
        return AssignmentResult {
            matches: Vec::new(),
            unmatched_rows: cost.row_ids().to_vec(),
            unmatched_cols: cost.col_ids().to_vec(),
        };
    }

    // Pad to square; dummy and gate-rejected entries share a cost larger
    // than any feasible assignment total, so minimizing the padded problem
    // first maximizes feasible cardinality, then minimizes feasible cost.
    let n = rows.max(cols);
    let mut feasible_sum = 1.0;
    for i in 0..rows {
        for j in 0..cols {
            if feasible(i, j) {
                feasible_sum += cost.get(i, j);
            }
        }
    }
    let big = feasible_sum;
    let entry = |i: usize, j: usize| {
        if i < rows && j < cols && feasible(i, j) {
            cost.get(i, j)
        } else {
            big
        }
    };

    let row_for_col = hungarian_square(n, entry);

    let mut matched_rows = vec![false; rows];
    let mut matched_cols = vec![false; cols];
    let mut matches = Vec::new();
    for (j, &i) in row_for_col.iter().enumerate() {
        if i < rows && j < cols && feasible(i, j) {
            matched_rows[i] = true;
            matched_cols[j] = true;
            matches.push((i, j));
        }
    }
    matches.sort_unstable();

    AssignmentResult {
        matches: matches
            .into_iter()
            .map(|(i, j)| (cost.row_ids()[i], cost.col_ids()[j], cost.get(i, j)))
            .collect(),
        unmatched_rows: (0..rows)
            .filter(|&i| !matched_rows[i])
            .map(|i| cost.row_ids()[i])
            .collect(),
        unmatched_cols: (0..cols)
            .filter(|&j| !matched_cols[j])
            .map(|j| cost.col_ids()[j])
            .collect(),
    }
}

/// Exact Hungarian solve of an n x n matrix via shortest augmenting paths
/// with potentials. Returns, for each column, the row assigned to it.
/// Column scans run in ascending index order, so ties break toward lower
/// indices deterministically.
fn hungarian_square(n: usize, entry: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    const NONE: usize = usize::MAX;
    // one virtual column at index n
    let mut u = vec![0.0; n + 1]; // row potentials, indexed by row
    let mut v = vec![0.0; n + 1]; // column potentials
    let mut row_for_col = vec![NONE; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 0..n {
        row_for_col[n] = i;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_for_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = n;
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let cur = entry(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_for_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_for_col[j0] == NONE {
                break;
            }
        }
        // augment along the alternating path back to the virtual column
        loop {
            let j1 = way[j0];
            row_for_col[j0] = row_for_col[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }
    row_for_col.truncate(n);
    row_for_col
}
