//! Minimum-cost perfect assignment (Hungarian method, shortest augmenting
//! paths with potentials), O(n^3).

/// Returns `col_of_row` minimizing `sum_i cost[i * n + col_of_row[i]]` for a
/// square `n x n` row-major cost matrix with finite entries.
///
/// Deterministic: among equally short augmenting paths, the lowest column
/// index wins.
pub fn min_cost_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return Vec::new();
    }
    // 1-based bookkeeping; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|f| *f = false);
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            let row = &cost[(i0 - 1) * n..i0 * n];
            for j in 1..=n {
                if used[j] {
                    continue;
                }
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
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![0usize; n];
    for j in 1..=n {
        col_of_row[row_of_col[j] - 1] = j - 1;
    }
    col_of_row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_known_cases() {
        assert!(min_cost_assignment(&[], 0).is_empty());
        assert_eq!(min_cost_assignment(&[3.0], 1), vec![0]);
        // anti-diagonal is cheap
        let c = [9.0, 1.0, 1.0, 9.0];
        assert_eq!(min_cost_assignment(&c, 2), vec![1, 0]);
        let c = [
            4.0, 1.0, 3.0, //
            2.0, 0.0, 5.0, //
            3.0, 2.0, 2.0,
        ];
        let a = min_cost_assignment(&c, 3);
        let total: f64 = a.iter().enumerate().map(|(i, &j)| c[i * 3 + j]).sum();
        assert_eq!(total, 5.0);
    }

    #[test]
    fn result_is_a_permutation() {
        let n = 30;
        let c: Vec<f64> = (0..n * n).map(|k| ((k * 7919) % 101) as f64).collect();
        let mut a = min_cost_assignment(&c, n);
        a.sort_unstable();
        assert_eq!(a, (0..n).collect::<Vec<_>>());
    }
}
