//! Dense solvers for weighted graph Laplacians.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

const CUTOFF: f64 = 1e-13;

/// Connected components of the graph made of edges with positive conductance.
pub(crate) fn components(n: usize, edges: &[(usize, usize, f64)]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j, c) in edges {
        if c > 0.0 {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for x in 0..n {
        let r = find(&mut parent, x);
        groups.entry(r).or_default().push(x);
    }
    groups.into_values().collect()
}

/// Solves `A φ = b` for the Laplacian `A = Σ c_e (δ_i − δ_j)(δ_i − δ_j)ᵀ`.
///
/// The solution has zero mean on every connected component of the positive
/// conductance graph. `b` must sum to zero on every component; otherwise the
/// offending component mass is returned as [`Error::SingularForm`].
///
/// Conductances below `CUTOFF` times the largest one are dropped: they sit at
/// rounding level and would make the shifted block numerically singular.
pub(crate) fn laplacian_solve(n: usize, edges: &[(usize, usize, f64)], b: &[f64]) -> Result<Vec<f64>> {
    let scale = b.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
    let top = edges.iter().map(|e| e.2).fold(0.0, f64::max);
    let pruned: Vec<(usize, usize, f64)> =
        edges.iter().map(|&(i, j, c)| (i, j, if c > CUTOFF * top { c } else { 0.0 })).collect();
    let edges = &pruned[..];
    let mut phi = vec![0.0; n];
    for comp in components(n, edges) {
        let mass: f64 = comp.iter().map(|&x| b[x]).sum();
        if mass.abs() > 1e-10 * scale {
            return Err(Error::SingularForm(mass));
        }
        if comp.len() == 1 {
            continue;
        }
        let k = comp.len();
        let mut local = vec![usize::MAX; n];
        for (a, &x) in comp.iter().enumerate() {
            local[x] = a;
        }
        let mut a = DMatrix::<f64>::zeros(k, k);
        for &(i, j, c) in edges {
            if c > 0.0 && local[i] != usize::MAX {
                let (p, q) = (local[i], local[j]);
                a[(p, p)] += c;
                a[(q, q)] += c;
                a[(p, q)] -= c;
                a[(q, p)] -= c;
            }
        }
        // rank-one shift pins the constant mode without changing the solution on 1⊥
        let shift = a.diagonal().max() / k as f64;
        a.add_scalar_mut(shift);
        let rhs = DVector::from_iterator(k, comp.iter().map(|&x| b[x] - mass / k as f64));
        let sol = a
            .cholesky()
            .ok_or_else(|| Error::SolverFailure("Laplacian block not positive definite".into()))?
            .solve(&rhs);
        let mean = sol.mean();
        for (a, &x) in comp.iter().enumerate() {
            phi[x] = sol[a] - mean;
        }
    }
    Ok(phi)
}

/// Solves the symmetric positive definite system `(diag(mass) + τ L) x = rhs`.
pub(crate) struct ShiftedLaplacian {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl ShiftedLaplacian {
    pub(crate) fn new(mass: &[f64], edges: &[(usize, usize, f64)], tau: f64) -> Result<Self> {
        let n = mass.len();
        let mut a = DMatrix::<f64>::from_diagonal(&DVector::from_column_slice(mass));
        for &(i, j, w) in edges {
            a[(i, i)] += tau * w;
            a[(j, j)] += tau * w;
            a[(i, j)] -= tau * w;
            a[(j, i)] -= tau * w;
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::SolverFailure(format!("implicit step matrix ({n}x{n}) not positive definite")))?;
        Ok(ShiftedLaplacian { chol })
    }

    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(rhs);
        self.chol.solve(&b).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_laplacian_solution() {
        // unit conductances on 0-1-2, b = (-1, 0, 1): φ = (-1, 0, 1)
        let edges = [(0, 1, 1.0), (1, 2, 1.0)];
        let phi = laplacian_solve(3, &edges, &[-1.0, 0.0, 1.0]).unwrap();
        for (p, e) in phi.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((p - e).abs() < 1e-14);
        }
    }

    #[test]
    fn disconnected_components_solved_separately() {
        let edges = [(0, 1, 2.0), (1, 2, 0.0), (2, 3, 1.0)];
        let phi = laplacian_solve(4, &edges, &[1.0, -1.0, 0.5, -0.5]).unwrap();
        assert!((phi[0] - phi[1] - 0.5).abs() < 1e-14);
        assert!((phi[2] - phi[3] - 0.5).abs() < 1e-14);
        let err = laplacian_solve(4, &edges, &[1.0, 0.0, 0.0, -1.0]).unwrap_err();
        assert!(matches!(err, Error::SingularForm(_)));
    }
}
