//! Exact quadratic optimal transport on finite spaces.
//!
//! The transportation problem `min Σ γ(x,y) d²(x,y)` is restricted to the
//! supports of the two marginals and solved by the transportation simplex
//! (network simplex on the bipartite support graph). Dual multipliers of the
//! final basis are rescaled into Kantorovich potentials for the cost `d²/2`
//! and then replaced by their c-concave closure.

use serde::{Deserialize, Serialize};

use crate::space::{Coupling, ProbMeasure, Space};
use crate::{Error, Result};

/// A real function on the points of a space.
pub type Potential = Vec<f64>;

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct OtResult {
    pub w2: f64,
    pub coupling: Coupling,
    /// c-concave, zero at the first support point of `μ`.
    pub phi: Potential,
    pub phi_c: Potential,
    /// `∫φ dμ + ∫φᶜ dν`; equals half the primal value at optimality.
    pub dual_value: f64,
    /// `Σ γ d²`.
    pub primal_value: f64,
}

impl OtResult {
    /// `|primal/2 − dual|`.
    pub fn gap(&self) -> f64 {
        (0.5 * self.primal_value - self.dual_value).abs()
    }

    /// `max |φ(x) + φᶜ(y) − d²(x,y)/2|` over the support of the coupling.
    pub fn slackness_residual(&self, space: &Space) -> f64 {
        self.coupling
            .triplets()
            .into_iter()
            .filter(|&(_, _, v)| v > 0.0)
            .map(|(x, y, _)| (self.phi[x] + self.phi_c[y] - 0.5 * space.d2(x, y)).abs())
            .fold(0.0, f64::max)
    }
}

/// Serializable form of an [`OtResult`] with the coupling as sparse triplets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtFile {
    pub w2: f64,
    pub coupling: Vec<(usize, usize, f64)>,
    pub phi: Vec<f64>,
    pub phi_c: Vec<f64>,
    pub dual_value: f64,
    pub primal_value: f64,
    pub gap: f64,
}

impl From<&OtResult> for OtFile {
    fn from(r: &OtResult) -> Self {
        OtFile {
            w2: r.w2,
            coupling: r.coupling.triplets(),
            phi: r.phi.clone(),
            phi_c: r.phi_c.clone(),
            dual_value: r.dual_value,
            primal_value: r.primal_value,
            gap: r.gap(),
        }
    }
}

/// `φᶜ(y) = min_x d²(x,y)/2 − φ(x)`.
pub fn c_transform(space: &Space, phi: &[f64]) -> Potential {
    let n = space.len();
    (0..n)
        .map(|y| (0..n).map(|x| 0.5 * space.d2(x, y) - phi[x]).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Whether `φᶜᶜ = φ` within `tol`; also returns `max |φᶜᶜ − φ|`.
///
/// `φᶜᶜ ≥ φ` always holds, so the deficit measures how far `φ` sits below its
/// c-concave envelope.
pub fn is_c_concave(space: &Space, phi: &[f64], tol: f64) -> (bool, f64) {
    let cc = c_transform(space, &c_transform(space, phi));
    let deficit = cc.iter().zip(phi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    (deficit <= tol, deficit)
}

/// Truncation `min{n, max{−n, φ}}`.
pub fn truncate(phi: &[f64], n: f64) -> Potential {
    phi.iter().map(|v| v.clamp(-n, n)).collect()
}

pub fn solve_w2(space: &Space, mu: &ProbMeasure, nu: &ProbMeasure) -> Result<OtResult> {
    space.check_len("mu", mu.density.len())?;
    space.check_len("nu", nu.density.len())?;
    let a_full = mu.masses(space);
    let b_full = nu.masses(space);
    let rows: Vec<usize> = (0..space.len()).filter(|&i| a_full[i] > 0.0).collect();
    let cols: Vec<usize> = (0..space.len()).filter(|&j| b_full[j] > 0.0).collect();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::Infeasible("empty marginal".into()));
    }
    let a: Vec<f64> = rows.iter().map(|&i| a_full[i]).collect();
    let b: Vec<f64> = cols.iter().map(|&j| b_full[j]).collect();
    let (sa, sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    if (sa - sb).abs() > 1e-9 {
        return Err(Error::Infeasible(format!("marginal totals {sa} and {sb} differ")));
    }
    let cost: Vec<Vec<f64>> = rows.iter().map(|&x| cols.iter().map(|&y| space.d2(x, y)).collect()).collect();

    let sol = TransportSimplex::new(&a, &b, cost).solve()?;

    let n = space.len();
    let mut coupling = Coupling::zeros(n);
    for &(i, j, v) in &sol.basis {
        if v > 0.0 {
            coupling.set(rows[i], cols[j], v);
        }
    }

    // ψ on supp ν from the column multipliers, then φ = inf over supp ν
    let psi: Vec<f64> = sol.v.iter().map(|v| 0.5 * v).collect();
    let mut phi: Vec<f64> = (0..n)
        .map(|x| {
            cols.iter()
                .zip(&psi)
                .map(|(&y, p)| 0.5 * space.d2(x, y) - p)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let shift = phi[rows[0]];
    phi.iter_mut().for_each(|v| *v -= shift);
    let phi_c = c_transform(space, &phi);

    let primal_value = coupling.cost(space);
    let dual_value = mu.integrate(space, &phi) + nu.integrate(space, &phi_c);
    Ok(OtResult { w2: primal_value.max(0.0).sqrt(), coupling, phi, phi_c, dual_value, primal_value })
}

/// `W₂(μ, ν)` only.
pub fn w2(space: &Space, mu: &ProbMeasure, nu: &ProbMeasure) -> Result<f64> {
    Ok(solve_w2(space, mu, nu)?.w2)
}

struct Solution {
    basis: Vec<(usize, usize, f64)>,
    v: Vec<f64>,
}

/// Transportation simplex on an `m × n` cost matrix.
struct TransportSimplex {
    m: usize,
    n: usize,
    cost: Vec<Vec<f64>>,
    /// Basic cells `(row, col, flow)`; always a spanning tree of `m + n − 1` cells.
    basis: Vec<(usize, usize, f64)>,
    tol: f64,
}

impl TransportSimplex {
    fn new(a: &[f64], b: &[f64], cost: Vec<Vec<f64>>) -> Self {
        let (m, n) = (a.len(), b.len());
        let cmax = cost.iter().flatten().cloned().fold(0.0, f64::max);
        // northwest corner: each step retires exactly one row or column
        let mut basis = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        let (mut ra, mut rb) = (a[0], b[0]);
        loop {
            let x = ra.min(rb).max(0.0);
            basis.push((i, j, x));
            if i + 1 == m && j + 1 == n {
                break;
            }
            let retire_row = (ra <= rb && i + 1 < m) || j + 1 == n;
            if retire_row {
                rb -= x;
                i += 1;
                ra = a[i];
            } else {
                ra -= x;
                j += 1;
                rb = b[j];
            }
        }
        TransportSimplex { m, n, cost, basis, tol: 1e-12 * (1.0 + cmax) }
    }

    /// Tree adjacency over nodes `0..m` (rows) and `m..m+n` (columns); entries
    /// are `(neighbor, basis index)`.
    fn tree(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j, _)) in self.basis.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }

    /// Multipliers with `u_i + v_j = c_ij` on basic cells and `u_0 = 0`.
    fn duals(&self, adj: &[Vec<(usize, usize)>]) -> (Vec<f64>, Vec<f64>) {
        let m = self.m;
        let mut val = vec![f64::NAN; m + self.n];
        val[0] = 0.0;
        let mut stack = vec![0];
        while let Some(node) = stack.pop() {
            for &(nb, k) in &adj[node] {
                if val[nb].is_nan() {
                    let (i, j, _) = self.basis[k];
                    val[nb] = self.cost[i][j] - val[node];
                    stack.push(nb);
                }
            }
        }
        (val[..m].to_vec(), val[m..].to_vec())
    }

    /// Basis indices along the tree path from row `i` to column `j`.
    fn path(&self, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let total = self.m + self.n;
        let mut via = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        seen[i] = true;
        let mut stack = vec![i];
        let target = self.m + j;
        while let Some(node) = stack.pop() {
            if node == target {
                break;
            }
            for &(nb, k) in &adj[node] {
                if !seen[nb] {
                    seen[nb] = true;
                    via[nb] = k;
                    stack.push(nb);
                }
            }
        }
        let mut edges = Vec::new();
        let mut node = target;
        while node != i {
            let k = via[node];
            edges.push(k);
            let (r, c, _) = self.basis[k];
            node = if node == self.m + c { r } else { self.m + c };
        }
        edges.reverse();
        edges
    }

    fn solve(mut self) -> Result<Solution> {
        let max_pivots = 50 * (self.m + self.n).pow(2) + 1000;
        let mut streak = 0;
        for _ in 0..max_pivots {
            let adj = self.tree();
            let (u, v) = self.duals(&adj);
            let bland = streak >= DEGENERATE_STREAK;
            let mut entering = None;
            let mut best = -self.tol;
            'scan: for i in 0..self.m {
                for j in 0..self.n {
                    let r = self.cost[i][j] - u[i] - v[j];
                    if r < best {
                        entering = Some((i, j));
                        if bland {
                            break 'scan;
                        }
                        best = r;
                    }
                }
            }
            let Some((i, j)) = entering else {
                return Ok(Solution { basis: self.basis, v });
            };

            // path from row i to column j; odd positions lose flow
            let path = self.path(&adj, i, j);
            let mut theta = f64::INFINITY;
            let mut leave = usize::MAX;
            for (pos, &k) in path.iter().enumerate() {
                if pos % 2 == 0 {
                    let flow = self.basis[k].2;
                    let better = flow < theta || (flow == theta && bland && self.cell_key(k) < self.cell_key(leave));
                    if better {
                        theta = flow;
                        leave = k;
                    }
                }
            }
            if !theta.is_finite() {
                return Err(Error::Infeasible("unbounded pivot".into()));
            }
            for (pos, &k) in path.iter().enumerate() {
                if k == leave {
                    continue;
                }
                if pos % 2 == 0 {
                    self.basis[k].2 = (self.basis[k].2 - theta).max(0.0);
                } else {
                    self.basis[k].2 += theta;
                }
            }
            self.basis[leave] = (i, j, theta);
            streak = if theta == 0.0 { streak + 1 } else { 0 };
        }
        Err(Error::DegenerateBasis(max_pivots))
    }

    fn cell_key(&self, k: usize) -> (usize, usize) {
        if k == usize::MAX {
            return (usize::MAX, usize::MAX);
        }
        let (i, j, _) = self.basis[k];
        (i, j)
    }
}
