//! Finite metric measure spaces, probability measures and couplings.
//!
//! A [`Space`] is a finite point set with a dense distance matrix, a strictly
//! positive reference measure `m` and a weighted, connected edge graph. The
//! edge graph is what the discrete calculus differentiates along; the distance
//! matrix is what optimal transport pays for. Everything is validated once at
//! construction and immutable afterwards.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Relative slack allowed in the triangle inequality, to absorb rounding in
/// Euclidean distances of nearly collinear points.
const TRIANGLE_RTOL: f64 = 1e-12;

/// Total-mass tolerance for probability measures.
pub const MASS_TOL: f64 = 1e-12;

/// Neighbor entry of the adjacency list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist: f64,
    pub weight: f64,
}

/// Regular grid metadata, used by displacement interpolation.
///
/// Points are ordered row-major with the last axis fastest; coordinates are
/// `index * spacing` along each axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub shape: Vec<usize>,
    pub spacing: f64,
}

impl GridLayout {
    pub fn coords(&self, point: usize) -> Vec<f64> {
        self.multi_index(point)
            .into_iter()
            .map(|i| i as f64 * self.spacing)
            .collect()
    }

    pub fn multi_index(&self, mut point: usize) -> Vec<usize> {
        let mut idx = vec![0; self.shape.len()];
        for axis in (0..self.shape.len()).rev() {
            idx[axis] = point % self.shape[axis];
            point /= self.shape[axis];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &len)| acc * len + i)
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// On-disk form of a [`Space`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceFile {
    pub points: Vec<String>,
    pub dist: Vec<Vec<f64>>,
    pub measure: Vec<f64>,
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout: Option<GridLayout>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Space {
    points: Vec<String>,
    dist: Vec<f64>,
    measure: Vec<f64>,
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<Vec<Neighbor>>,
    layout: Option<GridLayout>,
}

impl Space {
    /// Validates and builds a space. Edges are undirected; an edge may be
    /// listed in both orientations as long as the weights agree.
    pub fn build(
        points: Vec<String>,
        dist: Vec<Vec<f64>>,
        measure: Vec<f64>,
        edges: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(Error::Shape("space needs at least one point".into()));
        }
        if dist.len() != n || dist.iter().any(|row| row.len() != n) {
            return Err(Error::Shape(format!("distance matrix must be {n}x{n}")));
        }
        if measure.len() != n {
            return Err(Error::Shape(format!(
                "measure has {} entries for {n} points",
                measure.len()
            )));
        }

        let mut flat = Vec::with_capacity(n * n);
        for row in &dist {
            flat.extend_from_slice(row);
        }
        let d = |i: usize, j: usize| flat[i * n + j];
        let mut dmax: f64 = 0.0;
        for i in 0..n {
            if d(i, i) != 0.0 {
                return Err(Error::AsymmetricDistance(i, i, format!("d(x,x) = {}", d(i, i))));
            }
            for j in 0..n {
                let dij = d(i, j);
                if !dij.is_finite() {
                    return Err(Error::AsymmetricDistance(i, j, "non-finite distance".into()));
                }
                if dij != d(j, i) {
                    return Err(Error::AsymmetricDistance(i, j, format!("{} != {}", dij, d(j, i))));
                }
                if i != j && dij <= 0.0 {
                    return Err(Error::AsymmetricDistance(i, j, "distinct points at distance 0".into()));
                }
                dmax = dmax.max(dij);
            }
        }
        let slack = TRIANGLE_RTOL * dmax;
        for x in 0..n {
            for z in 0..n {
                let dxz = d(x, z);
                for y in 0..n {
                    if dxz > d(x, y) + d(y, z) + slack {
                        return Err(Error::TriangleViolation(x, y, z));
                    }
                }
            }
        }

        for (i, &mi) in measure.iter().enumerate() {
            if !(mi > 0.0 && mi.is_finite()) {
                return Err(Error::NonpositiveMass(i, mi));
            }
        }

        let mut canon: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(a, b, w) in &edges {
            if a >= n || b >= n {
                return Err(Error::BadEdge(a, b, "endpoint out of range".into()));
            }
            if a == b {
                return Err(Error::BadEdge(a, b, "self loop".into()));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::BadEdge(a, b, format!("weight {w} must be positive")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            match canon.get(&(i, j)) {
                Some(&prev) if prev != w => {
                    return Err(Error::BadEdge(a, b, "conflicting weights for the two orientations".into()))
                }
                Some(_) => {}
                None => {
                    canon.insert((i, j), w);
                }
            }
        }
        let canon: Vec<(usize, usize, f64)> = canon.into_iter().map(|((i, j), w)| (i, j, w)).collect();

        let mut adjacency = vec![Vec::new(); n];
        for &(i, j, w) in &canon {
            let dij = d(i, j);
            adjacency[i].push(Neighbor { index: j, dist: dij, weight: w });
            adjacency[j].push(Neighbor { index: i, dist: dij, weight: w });
        }
        for nbrs in &mut adjacency {
            nbrs.sort_by_key(|nb| nb.index);
        }

        // connectivity from point 0
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(x) = stack.pop() {
            for nb in &adjacency[x] {
                if !seen[nb.index] {
                    seen[nb.index] = true;
                    stack.push(nb.index);
                }
            }
        }
        if let Some(unreached) = seen.iter().position(|s| !s) {
            return Err(Error::DisconnectedGraph(unreached));
        }

        Ok(Space { points, dist: flat, measure, edges: canon, adjacency, layout: None })
    }

    pub fn with_layout(mut self, layout: GridLayout) -> Result<Self> {
        if layout.len() != self.len() {
            return Err(Error::Shape(format!(
                "grid layout has {} cells for {} points",
                layout.len(),
                self.len()
            )));
        }
        self.layout = Some(layout);
        Ok(self)
    }

    pub fn from_file(file: SpaceFile) -> Result<Self> {
        let layout = file.layout;
        let space = Space::build(file.points, file.dist, file.measure, file.edges)?;
        match layout {
            Some(l) => space.with_layout(l),
            None => Ok(space),
        }
    }

    pub fn to_file(&self) -> SpaceFile {
        let n = self.len();
        SpaceFile {
            points: self.points.clone(),
            dist: (0..n).map(|i| self.dist[i * n..(i + 1) * n].to_vec()).collect(),
            measure: self.measure.clone(),
            edges: self.edges.clone(),
            layout: self.layout.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    #[inline]
    pub fn d(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.len() + y]
    }

    #[inline]
    pub fn d2(&self, x: usize, y: usize) -> f64 {
        let d = self.d(x, y);
        d * d
    }

    /// Reference mass `m(x)`.
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn neighbors(&self, x: usize) -> &[Neighbor] {
        &self.adjacency[x]
    }

    pub fn layout(&self) -> Option<&GridLayout> {
        self.layout.as_ref()
    }

    pub fn total_mass(&self) -> f64 {
        self.measure.iter().sum()
    }

    /// `∫ f dm`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.measure).map(|(v, m)| v * m).sum()
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().cloned().fold(0.0, f64::max)
    }

    /// Shortest edge length; the grid spacing for grid spaces.
    pub fn min_edge_length(&self) -> f64 {
        self.edges
            .iter()
            .map(|&(i, j, _)| self.d(i, j))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::Shape(format!("{what} has {len} entries, space has {}", self.len())));
        }
        Ok(())
    }
}

/// A probability measure `μ = ρ m`, stored through its density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbMeasure {
    pub density: Vec<f64>,
}

impl ProbMeasure {
    pub fn from_density(space: &Space, density: Vec<f64>) -> Result<Self> {
        space.check_len("density", density.len())?;
        if let Some(i) = density.iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::BadMeasure(format!("density at point {i} is {}", density[i])));
        }
        let total = space.integrate(&density);
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::BadMeasure(format!("total mass {total} differs from 1")));
        }
        Ok(ProbMeasure { density })
    }

    /// Builds a measure from point masses `μ({x})`.
    pub fn from_masses(space: &Space, masses: &[f64]) -> Result<Self> {
        space.check_len("masses", masses.len())?;
        let density = masses.iter().zip(space.measure()).map(|(p, m)| p / m).collect();
        ProbMeasure::from_density(space, density)
    }

    /// Builds a measure from nonnegative weights, rescaled to unit mass.
    pub fn normalized(space: &Space, weights: &[f64]) -> Result<Self> {
        space.check_len("weights", weights.len())?;
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::BadMeasure(format!("weights sum to {total}")));
        }
        let masses: Vec<f64> = weights.iter().map(|w| w / total).collect();
        ProbMeasure::from_masses(space, &masses)
    }

    pub fn reference(space: &Space) -> Self {
        let total = space.total_mass();
        ProbMeasure { density: vec![1.0 / total; space.len()] }
    }

    pub fn dirac(space: &Space, x: usize) -> Self {
        let mut density = vec![0.0; space.len()];
        density[x] = 1.0 / space.measure()[x];
        ProbMeasure { density }
    }

    pub fn masses(&self, space: &Space) -> Vec<f64> {
        self.density.iter().zip(space.measure()).map(|(r, m)| r * m).collect()
    }

    /// `∫ f dμ`.
    pub fn integrate(&self, space: &Space, f: &[f64]) -> f64 {
        self.density
            .iter()
            .zip(space.measure())
            .zip(f)
            .map(|((r, m), v)| r * m * v)
            .sum()
    }

    /// `max ρ`, the smallest `C` with `μ ≤ C m`.
    pub fn compression(&self) -> f64 {
        self.density.iter().cloned().fold(0.0, f64::max)
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.density.len()).filter(|&i| self.density[i] > 0.0).collect()
    }

    /// Pointwise convex combination `(1-λ)self + λ other`.
    pub fn mix(&self, other: &ProbMeasure, lambda: f64) -> ProbMeasure {
        ProbMeasure {
            density: self
                .density
                .iter()
                .zip(&other.density)
                .map(|(a, b)| (1.0 - lambda) * a + lambda * b)
                .collect(),
        }
    }
}

/// A transport plan between two measures on the same space, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    n: usize,
    mass: Vec<f64>,
}

/// Largest marginal errors of a coupling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginalDeficit {
    pub rows: f64,
    pub cols: f64,
}

impl MarginalDeficit {
    pub fn max(&self) -> f64 {
        self.rows.max(self.cols)
    }
}

impl Coupling {
    pub fn zeros(n: usize) -> Self {
        Coupling { n, mass: vec![0.0; n * n] }
    }

    pub fn from_dense(n: usize, mass: Vec<f64>) -> Result<Self> {
        if mass.len() != n * n {
            return Err(Error::Shape(format!("coupling needs {} entries", n * n)));
        }
        Ok(Coupling { n, mass })
    }

    pub fn product(space: &Space, mu: &ProbMeasure, nu: &ProbMeasure) -> Self {
        let a = mu.masses(space);
        let b = nu.masses(space);
        let n = space.len();
        let mut c = Coupling::zeros(n);
        for i in 0..n {
            for j in 0..n {
                c.mass[i * n + j] = a[i] * b[j];
            }
        }
        c
    }

    pub fn diagonal(space: &Space, mu: &ProbMeasure) -> Self {
        let a = mu.masses(space);
        let n = space.len();
        let mut c = Coupling::zeros(n);
        for (i, ai) in a.into_iter().enumerate() {
            c.mass[i * n + i] = ai;
        }
        c
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.mass[x * self.n + y]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.mass[x * self.n + y] = v;
    }

    #[inline]
    pub fn add(&mut self, x: usize, y: usize, v: f64) {
        self.mass[x * self.n + y] += v;
    }

    /// Nonzero entries `(x, y, γ(x,y))` in row-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n;
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(k, &v)| (k / n, k % n, v))
            .collect()
    }

    pub fn first_marginal(&self) -> Vec<f64> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).sum()).collect()
    }

    pub fn second_marginal(&self) -> Vec<f64> {
        (0..self.n).map(|j| (0..self.n).map(|i| self.get(i, j)).sum()).collect()
    }

    /// `Σ γ(x,y) d²(x,y)`.
    pub fn cost(&self, space: &Space) -> f64 {
        self.triplets().into_iter().map(|(x, y, v)| v * space.d2(x, y)).sum()
    }
}

/// Maximal row and column marginal errors of `γ` against `(μ, ν)`.
pub fn check_coupling(space: &Space, gamma: &Coupling, mu: &ProbMeasure, nu: &ProbMeasure) -> Result<MarginalDeficit> {
    space.check_len("coupling", gamma.size())?;
    let a = mu.masses(space);
    let b = nu.masses(space);
    let rows = gamma
        .first_marginal()
        .iter()
        .zip(&a)
        .map(|(r, a)| (r - a).abs())
        .fold(0.0, f64::max);
    let cols = gamma
        .second_marginal()
        .iter()
        .zip(&b)
        .map(|(c, b)| (c - b).abs())
        .fold(0.0, f64::max);
    Ok(MarginalDeficit { rows, cols })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn two_point_space_is_valid() {
        let s = Space::build(
            names(2),
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![0.5, 0.5],
            vec![(0, 1, 1.0)],
        )
        .unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.neighbors(0)[0].index, 1);
        assert_eq!(s.total_mass(), 1.0);
    }

    #[test]
    fn triangle_violation_reports_witness() {
        let err = Space::build(
            names(3),
            vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]],
            vec![1.0 / 3.0; 3],
            vec![(0, 1, 1.0), (1, 2, 1.0)],
        )
        .unwrap_err();
        assert_eq!(err, Error::TriangleViolation(0, 1, 2));
    }

    #[test]
    fn asymmetric_distance_rejected() {
        let err = Space::build(
            names(2),
            vec![vec![0.0, 1.0], vec![2.0, 0.0]],
            vec![0.5, 0.5],
            vec![(0, 1, 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::AsymmetricDistance(0, 1, _)));
    }

    #[test]
    fn nonpositive_mass_rejected() {
        let err = Space::build(
            names(2),
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![1.0, 0.0],
            vec![(0, 1, 1.0)],
        )
        .unwrap_err();
        assert_eq!(err, Error::NonpositiveMass(1, 0.0));
    }

    #[test]
    fn disconnected_graph_rejected() {
        let err = Space::build(
            names(3),
            vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]],
            vec![1.0 / 3.0; 3],
            vec![(0, 1, 1.0)],
        )
        .unwrap_err();
        assert_eq!(err, Error::DisconnectedGraph(2));
    }

    #[test]
    fn conflicting_edge_orientations_rejected() {
        let err = Space::build(
            names(2),
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
            vec![0.5, 0.5],
            vec![(0, 1, 1.0), (1, 0, 2.0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::BadEdge(..)));
    }

    fn line3() -> Space {
        Space::build(
            names(3),
            vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]],
            vec![0.25, 0.5, 0.25],
            vec![(0, 1, 1.0), (1, 2, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn measure_mass_is_validated() {
        let s = line3();
        assert!(ProbMeasure::from_density(&s, vec![1.0, 1.0, 1.0]).is_ok());
        assert!(ProbMeasure::from_density(&s, vec![1.0, 1.0, 2.0]).is_err());
        assert!(ProbMeasure::from_density(&s, vec![-1.0, 2.0, 2.0]).is_err());
        let d = ProbMeasure::dirac(&s, 2);
        assert_eq!(d.compression(), 4.0);
        assert_eq!(d.support(), vec![2]);
    }

    #[test]
    fn product_and_diagonal_couplings_have_zero_deficit() {
        let s = line3();
        let mu = ProbMeasure::normalized(&s, &[1.0, 2.0, 3.0]).unwrap();
        let nu = ProbMeasure::normalized(&s, &[3.0, 0.0, 1.0]).unwrap();
        let prod = Coupling::product(&s, &mu, &nu);
        assert!(check_coupling(&s, &prod, &mu, &nu).unwrap().max() < 1e-15);
        let diag = Coupling::diagonal(&s, &mu);
        assert!(check_coupling(&s, &diag, &mu, &mu).unwrap().max() < 1e-15);
    }

    #[test]
    fn diagonal_coupling_against_other_marginal_has_column_deficit() {
        let s = line3();
        let mu = ProbMeasure::normalized(&s, &[1.0, 2.0, 3.0]).unwrap();
        let nu = ProbMeasure::normalized(&s, &[3.0, 0.0, 1.0]).unwrap();
        let diag = Coupling::diagonal(&s, &mu);
        let def = check_coupling(&s, &diag, &mu, &nu).unwrap();
        assert!(def.rows < 1e-15);
        // column 0: 1/6 vs 3/4
        assert!((def.cols - 7.0 / 12.0).abs() < 1e-15, "{def:?}");
    }

    #[test]
    fn grid_layout_indexing_round_trips() {
        let l = GridLayout { shape: vec![3, 4], spacing: 0.5 };
        for p in 0..12 {
            assert_eq!(l.flat_index(&l.multi_index(p)), p);
        }
        assert_eq!(l.coords(5), vec![0.5, 0.5]);
    }
}
