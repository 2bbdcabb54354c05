//! Deterministic generators for the standard test spaces.
//!
//! Every generator returns a validated [`Space`] whose reference measure is
//! uniform with total mass 1. Edge weights are `m̄/d²` (with `m̄` the mean of
//! the endpoint masses), which makes the quadratic calculus consistent with
//! `∫|∇f|² dx` on grids. The exception is `two_point(d)`, the unit-weight
//! two-atom space (`w = 1/d²`).
//!
//! `random_euclidean(n, dim, seed)` draws coordinates in `[0,1)^dim` from a
//! ChaCha8 stream seeded with `seed_from_u64(seed)`, point by point and axis by
//! axis, one `f64` per coordinate. Its edges are the symmetrized
//! 3-nearest-neighbor graph joined with the Euclidean minimum spanning tree.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::space::{GridLayout, Space};
use crate::{Error, Result};

const KNN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpaceSpec {
    TwoPoint { d: f64 },
    PathGrid1d { n: usize },
    Grid2d { n: usize },
    Cycle { n: usize },
    RandomEuclidean { n: usize, dim: usize, seed: u64 },
}

impl SpaceSpec {
    /// Replaces the seed of a random spec; other specs are returned unchanged.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            SpaceSpec::RandomEuclidean { n, dim, .. } => SpaceSpec::RandomEuclidean { n, dim, seed },
            other => other,
        }
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpaceSpec::TwoPoint { d } => write!(f, "two_point({d})"),
            SpaceSpec::PathGrid1d { n } => write!(f, "path_grid_1d({n})"),
            SpaceSpec::Grid2d { n } => write!(f, "grid_2d({n})"),
            SpaceSpec::Cycle { n } => write!(f, "cycle({n})"),
            SpaceSpec::RandomEuclidean { n, dim, seed } => write!(f, "random_euclidean({n},{dim},{seed})"),
        }
    }
}

impl FromStr for SpaceSpec {
    type Err = Error;

    /// Parses `name(arg, ...)`. The seed of `random_euclidean` is optional
    /// and defaults to 0.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BadSpec(s.to_string());
        let s = s.trim();
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = &s[..open];
        let args: Vec<&str> = s[open + 1..s.len() - 1]
            .split(',')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .collect();
        let uint = |a: &str| a.parse::<usize>().map_err(|_| bad());
        match (name, args.as_slice()) {
            ("two_point", [d]) => Ok(SpaceSpec::TwoPoint { d: d.parse().map_err(|_| bad())? }),
            ("path_grid_1d", [n]) => Ok(SpaceSpec::PathGrid1d { n: uint(n)? }),
            ("grid_2d", [n]) => Ok(SpaceSpec::Grid2d { n: uint(n)? }),
            ("cycle", [n]) => Ok(SpaceSpec::Cycle { n: uint(n)? }),
            ("random_euclidean", [n, dim]) => Ok(SpaceSpec::RandomEuclidean { n: uint(n)?, dim: uint(dim)?, seed: 0 }),
            ("random_euclidean", [n, dim, seed]) => Ok(SpaceSpec::RandomEuclidean {
                n: uint(n)?,
                dim: uint(dim)?,
                seed: seed.parse().map_err(|_| bad())?,
            }),
            _ => Err(bad()),
        }
    }
}

pub fn generate(spec: SpaceSpec) -> Result<Space> {
    match spec {
        SpaceSpec::TwoPoint { d } => two_point(d),
        SpaceSpec::PathGrid1d { n } => path_grid_1d(n),
        SpaceSpec::Grid2d { n } => grid_2d(n),
        SpaceSpec::Cycle { n } => cycle(n),
        SpaceSpec::RandomEuclidean { n, dim, seed } => random_euclidean(n, dim, seed),
    }
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("p{i}")).collect()
}

fn grid_weight(m: f64, d: f64) -> f64 {
    m / (d * d)
}

pub fn two_point(d: f64) -> Result<Space> {
    if !(d > 0.0 && d.is_finite()) {
        return Err(Error::BadSpec(format!("two_point({d}): distance must be positive")));
    }
    Space::build(
        names(2),
        vec![vec![0.0, d], vec![d, 0.0]],
        vec![0.5, 0.5],
        vec![(0, 1, 1.0 / (d * d))],
    )
}

/// `n + 1` points at `i/n`, nearest-neighbor edges.
pub fn path_grid_1d(n: usize) -> Result<Space> {
    if n < 1 {
        return Err(Error::BadSpec("path_grid_1d needs N >= 1".into()));
    }
    let len = n + 1;
    let h = 1.0 / n as f64;
    let m = 1.0 / len as f64;
    let dist = (0..len)
        .map(|i| (0..len).map(|j| i.abs_diff(j) as f64 / n as f64).collect())
        .collect();
    let edges = (0..n).map(|i| (i, i + 1, grid_weight(m, h))).collect();
    Space::build(names(len), dist, vec![m; len], edges)?.with_layout(GridLayout { shape: vec![len], spacing: h })
}

/// `(n+1)²` points on `[0,1]²`, 4-neighbor edges, shortest-path (taxicab)
/// distance.
pub fn grid_2d(n: usize) -> Result<Space> {
    if n < 1 {
        return Err(Error::BadSpec("grid_2d needs N >= 1".into()));
    }
    let side = n + 1;
    let len = side * side;
    let h = 1.0 / n as f64;
    let m = 1.0 / len as f64;
    let layout = GridLayout { shape: vec![side, side], spacing: h };
    let mut dist = vec![vec![0.0; len]; len];
    for (p, row) in dist.iter_mut().enumerate() {
        let a = layout.multi_index(p);
        for (q, v) in row.iter_mut().enumerate() {
            let b = layout.multi_index(q);
            let steps = a[0].abs_diff(b[0]) + a[1].abs_diff(b[1]);
            *v = steps as f64 / n as f64;
        }
    }
    let mut edges = Vec::new();
    for i in 0..side {
        for j in 0..side {
            let p = layout.flat_index(&[i, j]);
            if i + 1 < side {
                edges.push((p, layout.flat_index(&[i + 1, j]), grid_weight(m, h)));
            }
            if j + 1 < side {
                edges.push((p, layout.flat_index(&[i, j + 1]), grid_weight(m, h)));
            }
        }
    }
    Space::build(names(len), dist, vec![m; len], edges)?.with_layout(layout)
}

/// `n` points on a cycle with unit edge lengths.
pub fn cycle(n: usize) -> Result<Space> {
    if n < 3 {
        return Err(Error::BadSpec("cycle needs N >= 3".into()));
    }
    let m = 1.0 / n as f64;
    let dist = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let k = i.abs_diff(j);
                    k.min(n - k) as f64
                })
                .collect()
        })
        .collect();
    let edges = (0..n).map(|i| (i, (i + 1) % n, grid_weight(m, 1.0))).collect();
    Space::build(names(n), dist, vec![m; n], edges)
}

pub fn random_euclidean(n: usize, dim: usize, seed: u64) -> Result<Space> {
    if n < 2 || dim < 1 {
        return Err(Error::BadSpec(format!("random_euclidean needs n >= 2 and dim >= 1, got ({n},{dim})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coords: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = coords[i]
                .iter()
                .zip(&coords[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let m = 1.0 / n as f64;

    let mut pairs = std::collections::BTreeSet::new();
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| dist[i][a].total_cmp(&dist[i][b]).then(a.cmp(&b)));
        for &j in order.iter().take(KNN) {
            pairs.insert((i.min(j), i.max(j)));
        }
    }
    // Prim's MST guarantees connectivity.
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, 0usize); n];
    in_tree[0] = true;
    for j in 1..n {
        best[j] = (dist[0][j], 0);
    }
    for _ in 1..n {
        let next = (0..n)
            .filter(|&j| !in_tree[j])
            .min_by(|&a, &b| best[a].0.total_cmp(&best[b].0).then(a.cmp(&b)))
            .expect("nonempty");
        in_tree[next] = true;
        let parent = best[next].1;
        pairs.insert((parent.min(next), parent.max(next)));
        for j in 0..n {
            if !in_tree[j] && dist[next][j] < best[j].0 {
                best[j] = (dist[next][j], next);
            }
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(i, j)| (i, j, grid_weight(m, dist[i][j])))
        .collect();
    Space::build(names(n), dist, vec![m; n], edges)
}
