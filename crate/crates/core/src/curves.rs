//! Curves of measures sampled on a time grid of `[0, 1]`.
//!
//! On a finite space every function is a combination of indicators, so the
//! operator `L_k` driving the curve on `[t_k, t_{k+1}]` is read off exactly
//! from density differences: `ℓ_k(x) = (ρ_{k+1}(x) − ρ_k(x)) m(x) / Δt_k`.
//! Its dual norm is taken with respect to the interval measure
//! `μ̄_k = ½(μ_k + μ_{k+1})`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{dual_norm, seminorm_mu, CalculusKind, Functional};
use crate::config::Tolerances;
use crate::hopflax;
use crate::report::VerificationReport;
use crate::space::{ProbMeasure, Space};
use crate::transport::{solve_w2, Potential};
use crate::{Error, Result};

/// Allowed deviation of the end times from 0 and 1.
const TIME_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample {
    pub times: Vec<f64>,
    pub measures: Vec<ProbMeasure>,
    /// `max_k max ρ_k`.
    pub compression: f64,
}

/// On-disk form of a curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFile {
    pub times: Vec<f64>,
    pub densities: Vec<Vec<f64>>,
}

impl CurveSample {
    pub fn new(space: &Space, times: Vec<f64>, measures: Vec<ProbMeasure>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::BadCurve("a curve needs at least two samples".into()));
        }
        if times.len() != measures.len() {
            return Err(Error::BadCurve(format!("{} times but {} measures", times.len(), measures.len())));
        }
        if times[0].abs() > TIME_TOL || (times[times.len() - 1] - 1.0).abs() > TIME_TOL {
            return Err(Error::BadCurve("time grid must run from 0 to 1".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::BadCurve("time grid must be increasing".into()));
        }
        for mu in &measures {
            ProbMeasure::from_density(space, mu.density.clone())?;
        }
        let compression = measures.iter().map(ProbMeasure::compression).fold(0.0, f64::max);
        Ok(CurveSample { times, measures, compression })
    }

    /// Uniform grid `t_k = k/K` with the given measures.
    pub fn uniform(space: &Space, measures: Vec<ProbMeasure>) -> Result<Self> {
        let k = measures.len().saturating_sub(1).max(1);
        let times = (0..measures.len()).map(|i| i as f64 / k as f64).collect();
        CurveSample::new(space, times, measures)
    }

    pub fn constant(space: &Space, mu: &ProbMeasure, steps: usize) -> Result<Self> {
        CurveSample::uniform(space, vec![mu.clone(); steps + 1])
    }

    pub fn from_file(space: &Space, file: CurveFile) -> Result<Self> {
        let measures = file
            .densities
            .into_iter()
            .map(|d| ProbMeasure::from_density(space, d))
            .collect::<Result<Vec<_>>>()?;
        CurveSample::new(space, file.times, measures)
    }

    pub fn to_file(&self) -> CurveFile {
        CurveFile {
            times: self.times.clone(),
            densities: self.measures.iter().map(|m| m.density.clone()).collect(),
        }
    }

    /// Number of intervals `K`.
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self, k: usize) -> f64 {
        self.times[k + 1] - self.times[k]
    }

    pub fn max_dt(&self) -> f64 {
        (0..self.steps()).map(|k| self.dt(k)).fold(0.0, f64::max)
    }

    /// `½(μ_k + μ_{k+1})`.
    pub fn interval_measure(&self, k: usize) -> ProbMeasure {
        self.measures[k].mix(&self.measures[k + 1], 0.5)
    }

    /// Time reversal `t ↦ 1 − t`.
    pub fn reversed(&self) -> CurveSample {
        CurveSample {
            times: self.times.iter().rev().map(|t| 1.0 - t).collect(),
            measures: self.measures.iter().rev().cloned().collect(),
            compression: self.compression,
        }
    }

    /// `k ↦ ∫ f dμ_k`.
    pub fn integrals(&self, space: &Space, f: &[f64]) -> Vec<f64> {
        self.measures.iter().map(|m| m.integrate(space, f)).collect()
    }
}

/// Per-interval chord speeds `W₂(μ_k, μ_{k+1}) / Δt_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedSample {
    pub speeds: Vec<f64>,
    /// `W₂(μ_k, μ_{k+1})`.
    pub chords: Vec<f64>,
    /// `Σ speed_k² Δt_k`.
    pub action: f64,
    /// `W₂²(μ₀, μ_K)`.
    pub endpoint_w2sq: f64,
}

pub fn metric_speed(space: &Space, curve: &CurveSample) -> Result<SpeedSample> {
    let mut speeds = Vec::with_capacity(curve.steps());
    let mut chords = Vec::with_capacity(curve.steps());
    let mut action = 0.0;
    for k in 0..curve.steps() {
        let w = solve_w2(space, &curve.measures[k], &curve.measures[k + 1])?.w2;
        let dt = curve.dt(k);
        chords.push(w);
        speeds.push(w / dt);
        action += w * w / dt;
    }
    let endpoint = solve_w2(space, &curve.measures[0], &curve.measures[curve.steps()])?.primal_value;
    Ok(SpeedSample { speeds, chords, action, endpoint_w2sq: endpoint })
}

/// Continuity-equation operators of a sampled curve.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSample {
    pub functionals: Vec<Functional>,
    /// `N_k = ‖ℓ_k‖*_{μ̄_k}`.
    pub norms: Vec<f64>,
    /// Representing potentials (quadratic kind).
    pub potentials: Vec<Option<Potential>>,
    /// False when some `N_k` is only a lower bound.
    pub exact: bool,
}

impl OperatorSample {
    /// `Σ N_k² Δt_k`.
    pub fn action(&self, curve: &CurveSample) -> f64 {
        self.norms.iter().enumerate().map(|(k, n)| n * n * curve.dt(k)).sum()
    }
}

pub fn extract_operator(space: &Space, curve: &CurveSample, kind: CalculusKind) -> Result<OperatorSample> {
    let mut out = OperatorSample { functionals: Vec::new(), norms: Vec::new(), potentials: Vec::new(), exact: true };
    for k in 0..curve.steps() {
        let l = Functional::from_difference(space, &curve.measures[k], &curve.measures[k + 1], curve.dt(k));
        let dn = dual_norm(space, kind, &l, &curve.interval_measure(k))?;
        out.exact &= dn.exact;
        out.norms.push(dn.norm);
        out.potentials.push(dn.potential);
        out.functionals.push(l);
    }
    Ok(out)
}

/// Lipschitz test functions for the duality check: random ones from `seed`,
/// plus `−φ` for the Kantorovich potential `φ` of the endpoints.
pub fn kuwada_battery(space: &Space, curve: &CurveSample, count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = space.diameter();
    let mut out: Vec<Vec<f64>> = (0..count)
        .map(|_| (0..space.len()).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
        .collect();
    let ot = solve_w2(space, &curve.measures[0], &curve.measures[curve.steps()])?;
    out.push(ot.phi.iter().map(|v| -v).collect());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MainReport {
    pub speeds: SpeedSample,
    pub operators: OperatorSample,
    /// `max_k |N_k − speed_k|`.
    pub speed_gap: f64,
    /// `Σ N_k² Δt_k`.
    pub action: f64,
    /// `max_φ ∫Q₁φ dμ₁ − ∫φ dμ₀`.
    pub kuwada_lhs: f64,
    /// `max_k |N_k − ‖φ_k‖_{μ̄_k}|` (quadratic kind).
    pub potential_identity: f64,
    pub tolerance: f64,
    pub kind: CalculusKind,
}

pub fn verify_main_theorem(
    space: &Space,
    curve: &CurveSample,
    kind: CalculusKind,
    tol: &Tolerances,
    seed: u64,
) -> Result<MainReport> {
    let speeds = metric_speed(space, curve)?;
    let operators = extract_operator(space, curve, kind)?;
    let speed_gap = speeds
        .speeds
        .iter()
        .zip(&operators.norms)
        .map(|(s, n)| (s - n).abs())
        .fold(0.0, f64::max);
    let action = operators.action(curve);

    let (mu0, mu1) = (&curve.measures[0], &curve.measures[curve.steps()]);
    let mut kuwada_lhs = f64::NEG_INFINITY;
    for phi in kuwada_battery(space, curve, 32, seed)? {
        let q1 = hopflax::evolve(space, &phi, 1.0);
        kuwada_lhs = kuwada_lhs.max(mu1.integrate(space, &q1) - mu0.integrate(space, &phi));
    }

    let mut potential_identity: f64 = 0.0;
    for (k, p) in operators.potentials.iter().enumerate() {
        if let Some(phi) = p {
            let norm = seminorm_mu(space, kind, phi, &curve.interval_measure(k));
            potential_identity = potential_identity.max((norm - operators.norms[k]).abs());
        }
    }

    let h = space.edges().iter().map(|&(i, j, _)| space.d(i, j)).fold(0.0, f64::max);
    Ok(MainReport {
        speeds,
        operators,
        speed_gap,
        action,
        kuwada_lhs,
        potential_identity,
        tolerance: tol.discretization(curve.max_dt(), h),
        kind,
    })
}

impl MainReport {
    pub fn to_report(&self) -> VerificationReport {
        let mut r = VerificationReport::new("main");
        let t = self.tolerance;
        r.check("action-bound", "endpoint distance bounded by operator action", self.speeds.endpoint_w2sq, self.action, t);
        r.check("speed-match", "operator norm equals metric speed", self.speed_gap, 0.0, t);
        r.check("kuwada", "Kuwada duality bound", self.kuwada_lhs, 0.5 * self.action, t);
        r.check(
            "chord-action",
            "chord action dominates endpoint distance",
            self.speeds.endpoint_w2sq,
            self.speeds.action,
            1e-9 * (1.0 + self.speeds.action),
        );
        if self.kind == CalculusKind::Quadratic {
            let scale = 1.0 + self.operators.norms.iter().cloned().fold(0.0, f64::max);
            r.check("potential-identity", "operator norm carried by its potential", self.potential_identity, 0.0, 1e-9 * scale);
        }
        r.diagnostic("chord-action", self.speeds.action);
        r.diagnostic("operator-action", self.action);
        r.diagnostic("endpoint-w2sq", self.speeds.endpoint_w2sq);
        r.env("calculus", self.kind);
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BbReport {
    /// `Σ N_k² Δt_k` per candidate.
    pub actions: Vec<f64>,
    pub best: f64,
    pub w2sq: f64,
}

impl BbReport {
    pub fn gap(&self) -> f64 {
        self.best - self.w2sq
    }

    pub fn to_report(&self, tol: f64) -> VerificationReport {
        let mut r = VerificationReport::new("bb");
        r.check("inf-direction", "dynamic action never beats W2 squared", self.w2sq, self.best, tol);
        r.diagnostic("gap", self.gap());
        r
    }
}

pub fn benamou_brenier(
    space: &Space,
    mu0: &ProbMeasure,
    mu1: &ProbMeasure,
    candidates: &[CurveSample],
    kind: CalculusKind,
    tol: &Tolerances,
) -> Result<BbReport> {
    if candidates.is_empty() {
        return Err(Error::BadCurve("no candidate curves".into()));
    }
    let mass_gap = |a: &ProbMeasure, b: &ProbMeasure| -> f64 {
        a.density
            .iter()
            .zip(&b.density)
            .zip(space.measure())
            .map(|((x, y), m)| (x - y).abs() * m)
            .fold(0.0, f64::max)
    };
    let mut actions = Vec::with_capacity(candidates.len());
    for c in candidates {
        let dev = mass_gap(&c.measures[0], mu0).max(mass_gap(&c.measures[c.steps()], mu1));
        if dev > tol.endpoint {
            return Err(Error::EndpointMismatch(dev));
        }
        actions.push(extract_operator(space, c, kind)?.action(c));
    }
    let best = actions.iter().cloned().fold(f64::INFINITY, f64::min);
    let w2sq = solve_w2(space, mu0, mu1)?.primal_value;
    Ok(BbReport { actions, best, w2sq })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerW2Report {
    /// Interior indices `k` with their `(difference quotient, ℓ(φ_k))`.
    pub samples: Vec<(usize, f64, f64)>,
    pub max_residual: f64,
}

/// Compares `d/dt ½W₂²(μ_t, ν)` with `L_t(φ_t)` at interior grid times, both
/// by central differences: `(μ_{k+1} − μ_{k−1}) / (t_{k+1} − t_{k−1})`.
pub fn w2_derivative(space: &Space, curve: &CurveSample, nu: &ProbMeasure) -> Result<DerW2Report> {
    let half_sq: Vec<f64> = curve
        .measures
        .iter()
        .map(|m| solve_w2(space, m, nu).map(|r| 0.5 * r.primal_value))
        .collect::<Result<_>>()?;
    let mut samples = Vec::new();
    let mut max_residual: f64 = 0.0;
    for k in 1..curve.steps() {
        let span = curve.times[k + 1] - curve.times[k - 1];
        let lhs = (half_sq[k + 1] - half_sq[k - 1]) / span;
        let phi = solve_w2(space, &curve.measures[k], nu)?.phi;
        let l = Functional::from_difference(space, &curve.measures[k - 1], &curve.measures[k + 1], span);
        let rhs = l.apply(&phi);
        max_residual = max_residual.max((lhs - rhs).abs());
        samples.push((k, lhs, rhs));
    }
    Ok(DerW2Report { samples, max_residual })
}
