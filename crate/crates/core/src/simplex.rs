//! Phase-one simplex for small dense feasibility problems `A x = b, x >= 0`.
//!
//! Pivoting follows Bland's rule (lowest eligible index enters, lowest basic
//! index leaves on ratio ties), which cannot cycle.

const PIVOT_EPS: f64 = 1e-12;

/// Returns a basic feasible point of `{x >= 0 : A x = b}` or `None`.
///
/// `a` is row-major with one inner vector per equation.
pub fn phase_one(a: &[Vec<f64>], b: &[f64], feas_tol: f64) -> Option<Vec<f64>> {
    let m = a.len();
    assert_eq!(m, b.len(), "row count mismatch");
    let n = a.first().map_or(0, Vec::len);
    assert!(a.iter().all(|r| r.len() == n), "ragged constraint matrix");
    if m == 0 {
        return Some(vec![0.0; n]);
    }

    // Columns: n structural, m artificial, then the right-hand side.
    let width = n + m + 1;
    let rhs = n + m;
    let mut t = vec![vec![0.0; width]; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = sign * a[i][j];
        }
        t[i][n + i] = 1.0;
        t[i][rhs] = sign * b[i];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Reduced costs of the phase-one objective (sum of artificials).
    let mut cost = vec![0.0; width];
    for row in &t {
        for j in 0..n {
            cost[j] -= row[j];
        }
        cost[rhs] -= row[rhs];
    }

    let max_iter = 50 * (n + m).max(1);
    for _ in 0..max_iter {
        let Some(enter) = (0..n + m).find(|&j| cost[j] < -PIVOT_EPS) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let v = t[i][enter];
            if v > PIVOT_EPS {
                let ratio = t[i][rhs] / v;
                let better = ratio < best - PIVOT_EPS
                    || (ratio <= best + PIVOT_EPS && leave.is_some_and(|l| basis[i] < basis[l]));
                if leave.is_none() || better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        // Unbounded direction cannot occur: the objective is bounded below by 0.
        let Some(r) = leave else { break };
        pivot(&mut t, &mut cost, r, enter);
        basis[r] = enter;
    }

    let infeasibility = -cost[rhs];
    let scale = 1.0 + b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if infeasibility > feas_tol * scale {
        return None;
    }
    let mut x = vec![0.0; n];
    for (i, &j) in basis.iter().enumerate() {
        if j < n {
            x[j] = t[i][rhs].max(0.0);
        }
    }
    Some(x)
}

fn pivot(t: &mut [Vec<f64>], cost: &mut [f64], r: usize, c: usize) {
    let p = t[r][c];
    for v in t[r].iter_mut() {
        *v /= p;
    }
    let pivot_row = t[r].clone();
    for (i, row) in t.iter_mut().enumerate() {
        if i != r {
            let factor = row[c];
            if factor != 0.0 {
                for (v, pr) in row.iter_mut().zip(&pivot_row) {
                    *v -= factor * pr;
                }
            }
        }
    }
    let factor = cost[c];
    if factor != 0.0 {
        for (v, pr) in cost.iter_mut().zip(&pivot_row) {
            *v -= factor * pr;
        }
    }
}

/// Largest absolute equation residual `|A x - b|_inf`.
pub fn residual(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(row, bi)| (row.iter().zip(x).map(|(u, v)| u * v).sum::<f64>() - bi).abs())
        .fold(0.0, f64::max)
}
