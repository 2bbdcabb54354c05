//! Independent reference computations. Nothing here calls into the solvers it
//! is used to check.
#![allow(dead_code)]

/// Minimum of `Σ γ c` over the vertices of the transportation polytope with
/// margins `a`, `b`. Each basis is a spanning tree of the bipartite support
/// graph; bases with a cycle are skipped. Exponential, so keep `m, n ≤ 4`.
pub fn transport_by_vertices(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> f64 {
    let (m, n) = (a.len(), b.len());
    let cells: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let size = m + n - 1;
    let mut best = f64::INFINITY;
    let mut pick: Vec<usize> = (0..size).collect();
    loop {
        if let Some(x) = basic_solution(a, b, &pick.iter().map(|&c| cells[c]).collect::<Vec<_>>()) {
            let value: f64 = pick.iter().zip(&x).map(|(&c, v)| v * cost[cells[c].0][cells[c].1]).sum();
            best = best.min(value);
        }
        if !next_combination(&mut pick, cells.len()) {
            return best;
        }
    }
}

fn basic_solution(a: &[f64], b: &[f64], basis: &[(usize, usize)]) -> Option<Vec<f64>> {
    let mut row = a.to_vec();
    let mut col = b.to_vec();
    let mut x = vec![f64::NAN; basis.len()];
    let mut open: Vec<usize> = (0..basis.len()).collect();
    while !open.is_empty() {
        let leaf = open.iter().enumerate().find_map(|(pos, &c)| {
            let (i, j) = basis[c];
            let row_alone = open.iter().filter(|&&o| basis[o].0 == i).count() == 1;
            let col_alone = open.iter().filter(|&&o| basis[o].1 == j).count() == 1;
            match (row_alone, col_alone) {
                (true, _) => Some((pos, row[i])),
                (false, true) => Some((pos, col[j])),
                _ => None,
            }
        });
        let (pos, v) = leaf?;
        let c = open.swap_remove(pos);
        let (i, j) = basis[c];
        x[c] = v;
        row[i] -= v;
        col[j] -= v;
    }
    let residual = row.iter().chain(&col).fold(0.0f64, |acc, r| acc.max(r.abs()));
    (residual <= 1e-12 && x.iter().all(|&v| v >= -1e-12)).then_some(x)
}

fn next_combination(pick: &mut [usize], n: usize) -> bool {
    let k = pick.len();
    for i in (0..k).rev() {
        if pick[i] < n - k + i {
            pick[i] += 1;
            for j in i + 1..k {
                pick[j] = pick[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// `W₂²` between point masses on the line: the monotone (quantile) coupling.
pub fn quantile_w2sq(xs: &[f64], a: &[f64], ys: &[f64], b: &[f64]) -> f64 {
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&p, &q| v[p].total_cmp(&v[q]));
        idx
    };
    let (oa, ob) = (order(xs), order(ys));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[oa[0]], b[ob[0]]);
    let mut total = 0.0;
    while i < oa.len() && j < ob.len() {
        let mass = ra.min(rb);
        total += mass * (xs[oa[i]] - ys[ob[j]]).powi(2);
        ra -= mass;
        rb -= mass;
        if ra <= 1e-15 {
            i += 1;
            ra = if i < oa.len() { a[oa[i]] } else { 0.0 };
        }
        if rb <= 1e-15 {
            j += 1;
            rb = if j < ob.len() { b[ob[j]] } else { 0.0 };
        }
    }
    total
}

/// All-pairs shortest paths over weighted undirected edges.
pub fn floyd_warshall(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<f64>> {
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0.0;
    }
    for &(i, j, len) in edges {
        d[i][j] = d[i][j].min(len);
        d[j][i] = d[j][i].min(len);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// Implicit Euler on the two-point space with unit distance and uniform
/// measure: the generator is `[[-2, 2], [2, -2]]`, whose nonzero eigenvalue
/// is `-4` on the mode `(1, -1)`. Density after `k` steps from `(1+δ, 1−δ)`.
pub fn two_point_implicit_euler(delta: f64, dt: f64, k: usize) -> [f64; 2] {
    let mode = delta / (1.0 + 4.0 * dt).powi(k as i32);
    [1.0 + mode, 1.0 - mode]
}

/// Exact heat flow for the same data.
pub fn two_point_exact(delta: f64, t: f64) -> [f64; 2] {
    let mode = delta * (-4.0 * t).exp();
    [1.0 + mode, 1.0 - mode]
}
