//! The Hopf-Lax semigroup `Q_t f(x) = min_y f(y) + d²(x,y)/(2t)`, `Q₀f = f`.

use crate::calculus::{grad_modulus, CalculusKind};
use crate::report::VerificationReport;
use crate::space::Space;
use crate::transport::Potential;
use crate::{Error, Result};

/// Relative slack used to decide ties in the inf-convolution.
const TIE_RTOL: f64 = 1e-12;

pub fn evolve(space: &Space, f: &[f64], t: f64) -> Potential {
    if t == 0.0 {
        return f.to_vec();
    }
    let n = space.len();
    (0..n)
        .map(|x| (0..n).map(|y| f[y] + space.d2(x, y) / (2.0 * t)).fold(f64::INFINITY, f64::min))
        .collect()
}

/// Edge-neighbor slope `max_{y~x} |g(y) − g(x)| / d(x,y)`.
pub fn local_slope(space: &Space, g: &[f64]) -> Vec<f64> {
    grad_modulus(space, CalculusKind::Slope, g).values
}

/// `max_{x≠y} |g(y) − g(x)| / d(x,y)` over all pairs.
pub fn global_lip(space: &Space, g: &[f64]) -> f64 {
    let n = space.len();
    let mut lip: f64 = 0.0;
    for x in 0..n {
        for y in x + 1..n {
            lip = lip.max((g[y] - g[x]).abs() / space.d(x, y));
        }
    }
    lip
}

/// Minimizers of `y ↦ f(y) + d²(x,y)/(2t)` up to a relative tie tolerance.
pub fn minimizers(space: &Space, f: &[f64], x: usize, t: f64) -> Vec<usize> {
    let vals: Vec<f64> = (0..space.len()).map(|y| f[y] + space.d2(x, y) / (2.0 * t)).collect();
    let best = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = vals.iter().map(|v| v.abs()).fold(1.0, f64::max);
    (0..space.len()).filter(|&y| vals[y] <= best + TIE_RTOL * scale).collect()
}

/// `Q_t f` sampled on a time grid, with edge slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct HlTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<Potential>,
    pub lips: Vec<Vec<f64>>,
}

pub fn trajectory(space: &Space, f: &[f64], times: &[f64]) -> Result<HlTrajectory> {
    space.check_len("f", f.len())?;
    if times.iter().any(|&t| !(t.is_finite() && t >= 0.0)) {
        return Err(Error::BadSpec("Hopf-Lax times must be finite and nonnegative".into()));
    }
    let values: Vec<Potential> = times.iter().map(|&t| evolve(space, f, t)).collect();
    let lips = values.iter().map(|q| local_slope(space, q)).collect();
    Ok(HlTrajectory { times: times.to_vec(), values, lips })
}

/// Uniform grid `{T/K, 2T/K, …, T}`.
pub fn uniform_grid(points: usize, horizon: f64) -> Vec<f64> {
    (1..=points).map(|k| horizon * k as f64 / points as f64).collect()
}

/// Diagnostics of the semigroup along a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HlReport {
    /// `max_t Lip(Q_t f) / Lip(f)`; `None` when `f` is constant.
    pub lip_ratio: Option<f64>,
    /// `max (FD + σ²/2 − tol_hj)` where `σ = d(x, y_x)/t` for the farthest minimizer.
    pub hj_excess: f64,
    /// `max (FD + lip(Q_t f)²/2)` with the edge slope; logged only.
    pub hj_edge_residual: f64,
    /// `(t_k, x)` intervals `[t_k, t_{k+1}]` on which the minimizer set changes.
    pub kinks: Vec<(usize, usize)>,
    /// `max (Q_t f − f)⁺`.
    pub above_f: f64,
    /// `max (Q_{t_{k+1}} f − Q_{t_k} f)⁺`.
    pub increase_in_t: f64,
    /// `max (Q_{t+s} f − Q_t Q_s f)⁺` over grid pairs.
    pub semigroup_excess: f64,
    /// `max |Q_τ f − f|` at `τ` below the first time any point moves.
    pub small_time_deviation: f64,
}

pub fn verify_hl(space: &Space, f: &[f64], times: &[f64]) -> Result<HlReport> {
    if times.len() < 3 {
        return Err(Error::BadSpec("Hopf-Lax verification needs at least 3 times".into()));
    }
    if times[0] <= 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadSpec("Hopf-Lax times must be positive and increasing".into()));
    }
    let traj = trajectory(space, f, times)?;
    let n = space.len();
    let lip_f = global_lip(space, f);
    let lip_ratio = (lip_f > 0.0).then(|| {
        traj.values.iter().map(|q| global_lip(space, q) / lip_f).fold(0.0, f64::max)
    });

    let mut rep = HlReport {
        lip_ratio,
        hj_excess: f64::NEG_INFINITY,
        hj_edge_residual: f64::NEG_INFINITY,
        kinks: Vec::new(),
        above_f: 0.0,
        increase_in_t: 0.0,
        semigroup_excess: 0.0,
        small_time_deviation: 0.0,
    };
    let diam = space.diameter();
    for (k, q) in traj.values.iter().enumerate() {
        for x in 0..n {
            rep.above_f = rep.above_f.max(q[x] - f[x]);
        }
        if k + 1 == times.len() {
            break;
        }
        let (t, next) = (times[k], &traj.values[k + 1]);
        let h = times[k + 1] - t;
        let tol_hj = h * diam * diam / (2.0 * t * t * (t + h));
        for x in 0..n {
            rep.increase_in_t = rep.increase_in_t.max(next[x] - q[x]);
            let now = minimizers(space, f, x, t);
            if now != minimizers(space, f, x, times[k + 1]) {
                rep.kinks.push((k, x));
                continue;
            }
            let fd = (next[x] - q[x]) / h;
            let reach = now.iter().map(|&y| space.d(x, y)).fold(0.0, f64::max) / t;
            rep.hj_excess = rep.hj_excess.max(fd + 0.5 * reach * reach - tol_hj);
            rep.hj_edge_residual = rep.hj_edge_residual.max(fd + 0.5 * traj.lips[k][x].powi(2));
        }
    }
    if rep.hj_excess == f64::NEG_INFINITY {
        rep.hj_excess = 0.0;
        rep.hj_edge_residual = 0.0;
    }

    for (i, &s) in times.iter().enumerate() {
        let qs = &traj.values[i];
        for &t in times.iter().take(times.len() - i) {
            let lhs = evolve(space, f, t + s);
            let rhs = evolve(space, qs, t);
            for x in 0..n {
                rep.semigroup_excess = rep.semigroup_excess.max(lhs[x] - rhs[x]);
            }
        }
    }

    let tau = 0.5 * first_motion_time(space, f);
    if tau.is_finite() {
        let q = evolve(space, f, tau);
        rep.small_time_deviation = q.iter().zip(f).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    }
    Ok(rep)
}

/// `inf { d²(x,y) / (2(f(x) − f(y))) : f(y) < f(x) }`; below it `Q_t f = f`.
pub fn first_motion_time(space: &Space, f: &[f64]) -> f64 {
    let n = space.len();
    let mut t = f64::INFINITY;
    for x in 0..n {
        for y in 0..n {
            if f[y] < f[x] {
                t = t.min(space.d2(x, y) / (2.0 * (f[x] - f[y])));
            }
        }
    }
    t
}

impl HlReport {
    pub fn to_report(&self) -> VerificationReport {
        let mut r = VerificationReport::new("hopflax");
        if let Some(ratio) = self.lip_ratio {
            r.check("lip-ratio", "Lipschitz bound of the Hopf-Lax semigroup", ratio, 2.0, 1e-12);
        }
        r.check("hj-minimizer", "Hamilton-Jacobi subsolution inequality", self.hj_excess, 0.0, 1e-12);
        r.check("below-f", "Q_t f does not exceed f", self.above_f, 0.0, 0.0);
        r.check("monotone-in-t", "Q_t f nonincreasing in t", self.increase_in_t, 0.0, 0.0);
        r.check("sub-semigroup", "Q_t Q_s f dominates Q_(t+s) f", self.semigroup_excess, 0.0, 1e-12);
        r.check("small-time", "Q_t f returns to f as t decreases", self.small_time_deviation, 0.0, 0.0);
        r.diagnostic("hj-edge-slope", self.hj_edge_residual);
        r.diagnostic("kinks", self.kinks.len() as f64);
        r
    }
}
