//! Exact solver for the dense linear assignment problem.
//!
//! Shortest-augmenting-path algorithm with dual potentials (the
//! Jonker–Volgenant / Hungarian family), O(n^3) worst case, fast in practice
//! on geometric cost matrices. Minimizes `sum_i c[i, perm(i)]`.

/// Solves the square assignment problem for the row-major `n x n` matrix
/// `cost`. Returns `(perm, total)` where row `i` is assigned to column
/// `perm[i]` and `total` is the minimal cost.
pub fn solve_dense(cost: &[f64], n: usize) -> (Vec<usize>, f64) {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    assert!(n > 0);
    // p[j] = row assigned to column j (1-based; 0 = unassigned sentinel row).
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if !used[j] {
                    let cur = row[j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // Augment along the alternating path.
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut perm = vec![0usize; n];
    let mut total = 0.0;
    for j in 1..=n {
        let i = p[j];
        perm[i - 1] = j - 1;
        total += cost[(i - 1) * n + (j - 1)];
    }
    (perm, total)
}
