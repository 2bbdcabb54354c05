//! Plans on path space: finitely many weighted discrete-time paths.

use serde::{Deserialize, Serialize};

use crate::calculus::{dpm, grad_modulus, CalculusKind};
use crate::curves::CurveSample;
use crate::report::VerificationReport;
use crate::space::{Coupling, Space};
use crate::{Error, Result};

/// Allowed deviation of the total weight from 1.
const WEIGHT_TOL: f64 = 1e-12;

/// Allowed marginal mismatch between consecutive couplings and the curve.
const MARGINAL_TOL: f64 = 1e-10;

/// Default cap on the number of paths produced by chaining couplings.
pub const DEFAULT_PATH_CAP: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub times: Vec<f64>,
    pub paths: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
}

impl Plan {
    pub fn new(times: Vec<f64>, paths: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<Self> {
        if times.len() < 2 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::BadPlan("time grid must be increasing with at least two times".into()));
        }
        if paths.is_empty() || paths.len() != weights.len() {
            return Err(Error::BadPlan(format!("{} paths but {} weights", paths.len(), weights.len())));
        }
        if let Some(p) = paths.iter().position(|p| p.len() != times.len()) {
            return Err(Error::BadPlan(format!("path {p} does not follow the time grid")));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::BadPlan("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::BadPlan(format!("weights sum to {total}")));
        }
        Ok(Plan { times, paths, weights })
    }

    /// Checks that every visited point exists in `space`.
    pub fn validate_on(&self, space: &Space) -> Result<()> {
        if self.paths.iter().flatten().any(|&x| x >= space.len()) {
            return Err(Error::BadPlan("path visits a point outside the space".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    /// Point masses of `(e_{t_k})_♯ plan`.
    pub fn marginal(&self, space: &Space, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; space.len()];
        for (p, w) in self.paths.iter().zip(&self.weights) {
            out[p[k]] += w;
        }
        out
    }

    /// `Σ_paths w Σ_k d²(γ_k, γ_{k+1}) / Δt_k`.
    pub fn action(&self, space: &Space) -> f64 {
        self.paths
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * (0..self.steps()).map(|k| space.d2(p[k], p[k + 1]) / self.dt(k)).sum::<f64>())
            .sum()
    }
}

/// Markov chaining of consecutive couplings `γ_k` of `(μ_k, μ_{k+1})`:
/// `w(x₀,…,x_K) = μ₀(x₀) Π γ_k(x_k, x_{k+1}) / μ_k(x_k)`.
pub fn lift_from_couplings(space: &Space, curve: &CurveSample, couplings: &[Coupling], cap: usize) -> Result<Plan> {
    if couplings.len() != curve.steps() {
        return Err(Error::BadPlan(format!("{} couplings for {} steps", couplings.len(), curve.steps())));
    }
    for (k, g) in couplings.iter().enumerate() {
        space.check_len("coupling", g.size())?;
        let a = curve.measures[k].masses(space);
        let b = curve.measures[k + 1].masses(space);
        let dr = g.first_marginal().iter().zip(&a).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let dc = g.second_marginal().iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        if dr.max(dc) > MARGINAL_TOL {
            return Err(Error::MarginalMismatch { step: k, deficit: dr.max(dc) });
        }
    }
    let a0 = curve.measures[0].masses(space);
    let mut partial: Vec<(Vec<usize>, f64)> =
        (0..space.len()).filter(|&x| a0[x] > 0.0).map(|x| (vec![x], a0[x])).collect();
    for g in couplings {
        let rows = g.first_marginal();
        let mut next = Vec::new();
        for (path, w) in partial {
            let x = *path.last().expect("paths are nonempty");
            for y in 0..space.len() {
                let v = g.get(x, y);
                if v > 0.0 {
                    let mut p = path.clone();
                    p.push(y);
                    next.push((p, w * v / rows[x]));
                    if next.len() > cap {
                        return Err(Error::PathExplosion(cap));
                    }
                }
            }
        }
        partial = next;
    }
    let total: f64 = partial.iter().map(|(_, w)| w).sum();
    let (paths, weights) = partial.into_iter().map(|(p, w)| (p, w / total)).unzip();
    Plan::new(curve.times.clone(), paths, weights)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestPlanReport {
    pub ok: bool,
    /// `max_k max_x` density of `(e_{t_k})_♯ plan`.
    pub max_density: f64,
    /// `(k, x)` where the density exceeds the bound.
    pub witness: Option<(usize, usize)>,
    pub action: f64,
}

/// Bounded compression `(e_t)_♯ plan ≤ C m` at grid times plus finite action.
pub fn is_test_plan(space: &Space, plan: &Plan, c: f64) -> TestPlanReport {
    let m = space.measure();
    let mut max_density: f64 = 0.0;
    let mut witness = None;
    for k in 0..plan.times.len() {
        for (x, mass) in plan.marginal(space, k).into_iter().enumerate() {
            let d = mass / m[x];
            if d > max_density {
                max_density = d;
            }
            if d > c * (1.0 + 1e-12) && witness.is_none() {
                witness = Some((k, x));
            }
        }
    }
    let action = plan.action(space);
    TestPlanReport { ok: witness.is_none() && action.is_finite(), max_density, witness, action }
}

/// First-step reading of "the plan represents the gradient of `g`".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Representation {
    /// `Σ w (g(γ₁) − g(γ₀)) / Δt₀`.
    pub a: f64,
    /// `½ Σ w |Dg|²(γ₀) + ½ Σ w (d(γ₀,γ₁)/Δt₀)²`.
    pub b: f64,
}

impl Representation {
    /// `B − A`; nonnegative up to rounding for lip-type gradients.
    pub fn deficit(&self) -> f64 {
        self.b - self.a
    }
}

pub fn represents_gradient(space: &Space, plan: &Plan, g: &[f64], kind: CalculusKind) -> Representation {
    let dg = grad_modulus(space, kind, g).values;
    let dt = plan.dt(0);
    let mut rep = Representation { a: 0.0, b: 0.0 };
    for (p, w) in plan.paths.iter().zip(&plan.weights) {
        let (x, y) = (p[0], p[1]);
        let v = space.d(x, y) / dt;
        rep.a += w * (g[y] - g[x]) / dt;
        rep.b += 0.5 * w * (dg[x] * dg[x] + v * v);
    }
    rep
}

/// Bound on `|first-step quotient of f − D f(∇g)|` along a representing plan.
///
/// Zero for the slope kind. For the quadratic kind on points of degree 2 it is
/// `½|Dg|(x)·|f(y) + f(y') − 2f(x)| / d(x,y)`, the gap between the forward and
/// central difference of `f`; other points make the allowance infinite.
pub fn first_step_allowance(space: &Space, plan: &Plan, f: &[f64], g: &[f64], kind: CalculusKind) -> f64 {
    if kind == CalculusKind::Slope {
        return 0.0;
    }
    let dg = grad_modulus(space, kind, g).values;
    let mut total = 0.0;
    for (p, w) in plan.paths.iter().zip(&plan.weights) {
        let (x, y) = (p[0], p[1]);
        if x == y {
            continue;
        }
        let nbs = space.neighbors(x);
        if nbs.len() != 2 {
            return f64::INFINITY;
        }
        let second: f64 = nbs.iter().map(|nb| f[nb.index] - f[x]).sum();
        total += w * 0.5 * dg[x] * second.abs() / space.d(x, y);
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorverReport {
    /// `∫ D⁻f(∇g) d(e₀)_♯plan`.
    pub lower: f64,
    /// `Σ w (f(γ₁) − f(γ₀)) / Δt₀`.
    pub middle: f64,
    /// `∫ D⁺f(∇g) d(e₀)_♯plan`.
    pub upper: f64,
    pub deficit: f64,
    /// Set when the plan does not represent the gradient of `g` within tolerance.
    pub vacuous: bool,
    /// `max(lower − middle, middle − upper, 0)`.
    pub violation: f64,
    pub tolerance: f64,
}

pub fn verify_horver(
    space: &Space,
    plan: &Plan,
    f: &[f64],
    g: &[f64],
    kind: CalculusKind,
    tol: f64,
) -> Result<HorverReport> {
    plan.validate_on(space)?;
    space.check_len("f", f.len())?;
    space.check_len("g", g.len())?;
    let rep = represents_gradient(space, plan, g, kind);
    let d = dpm(space, kind, f, g)?;
    let dt = plan.dt(0);
    let (mut lower, mut middle, mut upper, mut cert) = (0.0, 0.0, 0.0, 0.0);
    for (p, w) in plan.paths.iter().zip(&plan.weights) {
        let x = p[0];
        lower += w * d.minus[x];
        upper += w * d.plus[x];
        cert += w * d.certificate[x];
        middle += w * (f[p[1]] - f[x]) / dt;
    }
    let tolerance = tol + cert + first_step_allowance(space, plan, f, g, kind);
    let violation = (lower - middle).max(middle - upper).max(0.0);
    Ok(HorverReport {
        lower,
        middle,
        upper,
        deficit: rep.deficit(),
        vacuous: rep.deficit().abs() > tol,
        violation,
        tolerance,
    })
}

impl HorverReport {
    pub fn to_report(&self) -> VerificationReport {
        let mut r = VerificationReport::new("horver");
        if !self.vacuous {
            r.check("sandwich", "horizontal-vertical derivative sandwich", self.violation, 0.0, self.tolerance);
        }
        r.diagnostic("deficit", self.deficit);
        r.diagnostic("vacuous", if self.vacuous { 1.0 } else { 0.0 });
        r
    }
}

/// Steepest-ascent plan for `g` started at `x`.
///
/// Every path jumps to an edge neighbor `y` realizing the largest ascending
/// slope `s = (g(y) − g(x))/d(x,y)` within `Δt = d/s`; ties are split evenly.
/// Returns `None` when `x` is a local maximum or when ascending neighbors have
/// different lengths (no common time step).
pub fn steepest_ascent_plan(space: &Space, g: &[f64], x: usize) -> Option<Plan> {
    let nbs = space.neighbors(x);
    let best = nbs
        .iter()
        .map(|nb| (g[nb.index] - g[x]) / nb.dist)
        .fold(f64::NEG_INFINITY, f64::max);
    if !(best > 0.0) {
        return None;
    }
    let tops: Vec<_> = nbs
        .iter()
        .filter(|nb| (g[nb.index] - g[x]) / nb.dist >= best * (1.0 - 1e-14))
        .collect();
    let d = tops[0].dist;
    if tops.iter().any(|nb| (nb.dist - d).abs() > 1e-14 * d) {
        return None;
    }
    let w = 1.0 / tops.len() as f64;
    let paths = tops.iter().map(|nb| vec![x, nb.index]).collect();
    let mut weights = vec![w; tops.len()];
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|v| *v /= total);
    Plan::new(vec![0.0, d / best], paths, weights).ok()
}

/// Segment `[t_k, t_l]` of every path, reparametrized onto `[0, 1]`.
pub fn restrict(plan: &Plan, k: usize, l: usize) -> Result<Plan> {
    if !(k < l && l <= plan.steps()) {
        return Err(Error::BadIndices(k, l, plan.times.len()));
    }
    if k == 0 && l == plan.steps() {
        return Ok(plan.clone());
    }
    let (t0, t1) = (plan.times[k], plan.times[l]);
    let times = plan.times[k..=l].iter().map(|t| (t - t0) / (t1 - t0)).collect();
    let paths = plan.paths.iter().map(|p| p[k..=l].to_vec()).collect();
    Plan::new(times, paths, plan.weights.clone())
}
