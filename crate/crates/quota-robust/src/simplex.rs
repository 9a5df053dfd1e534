//! Exact transportation simplex for small dense instances.
//!
//! Minimizes `sum c[i][j] * x[i][j]` over nonnegative flows with fixed row
//! sums `supply` and column sums `demand` (balanced within rounding). The
//! solver pivots on a spanning-tree basis with Bland's rule for both the
//! entering and the leaving variable, so runs are deterministic and cycling
//! is ruled out. Returned flows are vertices of the transportation polytope,
//! exact up to floating-point rounding.

/// Relative zero threshold for reduced costs.
const RC_EPS: f64 = 1e-12;

/// Solves the balanced transportation problem; returns the optimal cost and
/// an optimal flow matrix.
///
/// Panics if supplies and demands are not balanced to `1e-9` or if the pivot
/// cap is exceeded (neither happens for validated probability marginals).
pub fn solve_min(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
    let m = supply.len();
    let n = demand.len();
    assert!(m > 0 && n > 0, "empty marginals");
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    assert!(
        (total_s - total_d).abs() <= 1e-9,
        "unbalanced marginals: {total_s} vs {total_d}"
    );

    let mut x = vec![vec![0.0f64; n]; m];
    let mut basic = vec![vec![false; n]; m];

    // Northwest-corner start: the visited cells trace a staircase and always
    // form a spanning tree with m + n - 1 members.
    {
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let (mut i, mut j) = (0usize, 0usize);
        loop {
            let f = s[i].min(d[j]).max(0.0);
            x[i][j] = f;
            basic[i][j] = true;
            s[i] -= f;
            d[j] -= f;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if j == n - 1 || (i < m - 1 && s[i] <= d[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
    }

    let cost_scale = cost
        .iter()
        .flatten()
        .fold(0.0f64, |acc, &c| acc.max(c.abs()));
    let eps = RC_EPS * (1.0 + cost_scale);
    let max_pivots = 1000 * (m + n) * (m + n) + 1000;

    for _ in 0..max_pivots {
        let (u, v) = potentials(m, n, &basic, cost);

        // Bland: first cell in row-major order with a negative reduced cost.
        let mut entering = None;
        'scan: for i in 0..m {
            for j in 0..n {
                if !basic[i][j] && cost[i][j] - u[i] - v[j] < -eps {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let value = x
                .iter()
                .zip(cost)
                .map(|(xr, cr)| xr.iter().zip(cr).map(|(a, b)| a * b).sum::<f64>())
                .sum();
            return (value, x);
        };

        // The basis tree has a unique path from row ei to column ej; adding
        // the entering cell closes the pivot cycle. Cells at even positions
        // along the path lose flow.
        let path = tree_path(m, n, &basic, ei, ej);
        let mut shift = f64::INFINITY;
        for (pos, &(i, j)) in path.iter().enumerate() {
            if pos % 2 == 0 {
                shift = shift.min(x[i][j]);
            }
        }
        let shift = shift.max(0.0);
        // Bland again: lowest row-major cell among the minimizers leaves.
        let mut leaving = (usize::MAX, usize::MAX);
        for (pos, &(i, j)) in path.iter().enumerate() {
            if pos % 2 == 0 && x[i][j] <= shift + 1e-15 && (i, j) < leaving {
                leaving = (i, j);
            }
        }
        x[ei][ej] += shift;
        for (pos, &(i, j)) in path.iter().enumerate() {
            if pos % 2 == 0 {
                x[i][j] = (x[i][j] - shift).max(0.0);
            } else {
                x[i][j] += shift;
            }
        }
        x[leaving.0][leaving.1] = 0.0;
        basic[leaving.0][leaving.1] = false;
        basic[ei][ej] = true;
    }
    panic!("transportation simplex exceeded the pivot cap");
}

/// Dual potentials from the basis tree: `u[i] + v[j] = c[i][j]` on basic
/// cells, anchored at `u[0] = 0`.
fn potentials(m: usize, n: usize, basic: &[Vec<bool>], cost: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    let mut queue = std::collections::VecDeque::from([0usize]);
    // Nodes 0..m are rows, m..m+n are columns.
    let mut seen_row = vec![false; m];
    let mut seen_col = vec![false; n];
    seen_row[0] = true;
    while let Some(node) = queue.pop_front() {
        if node < m {
            let i = node;
            for j in 0..n {
                if basic[i][j] && !seen_col[j] {
                    seen_col[j] = true;
                    v[j] = cost[i][j] - u[i];
                    queue.push_back(m + j);
                }
            }
        } else {
            let j = node - m;
            for i in 0..m {
                if basic[i][j] && !seen_row[i] {
                    seen_row[i] = true;
                    u[i] = cost[i][j] - v[j];
                    queue.push_back(i);
                }
            }
        }
    }
    debug_assert!(u.iter().chain(v.iter()).all(|p| p.is_finite()));
    (u, v)
}

/// Unique path of basic cells from row `ei` to column `ej` in the basis
/// tree. The first cell shares row `ei`; cells alternate column/row moves.
fn tree_path(
    m: usize,
    n: usize,
    basic: &[Vec<bool>],
    ei: usize,
    ej: usize,
) -> Vec<(usize, usize)> {
    let total = m + n;
    let target = m + ej;
    let mut parent = vec![usize::MAX; total];
    let mut seen = vec![false; total];
    seen[ei] = true;
    let mut queue = std::collections::VecDeque::from([ei]);
    while let Some(node) = queue.pop_front() {
        if node == target {
            break;
        }
        if node < m {
            for j in 0..n {
                if basic[node][j] && !seen[m + j] {
                    seen[m + j] = true;
                    parent[m + j] = node;
                    queue.push_back(m + j);
                }
            }
        } else {
            let j = node - m;
            for i in 0..m {
                if basic[i][j] && !seen[i] {
                    seen[i] = true;
                    parent[i] = m + j;
                    queue.push_back(i);
                }
            }
        }
    }
    assert!(seen[target], "basis tree disconnected");
    let mut nodes = vec![target];
    while *nodes.last().unwrap() != ei {
        nodes.push(parent[*nodes.last().unwrap()]);
    }
    nodes.reverse();
    let mut cells = Vec::with_capacity(nodes.len() - 1);
    for pair in nodes.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let cell = if a < m { (a, b - m) } else { (b, a - m) };
        cells.push(cell);
    }
    cells
}
