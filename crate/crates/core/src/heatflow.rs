//! Heat flow: the `L²(m)` gradient flow of the quadratic Cheeger energy.
//!
//! Time stepping is implicit Euler, `(M + dt·W) ρ_{k+1} = M ρ_k` with `M` the
//! diagonal mass matrix and `W` the weighted graph Laplacian matrix, which is
//! one minimization step of `E(ρ) + ‖ρ − ρ_k‖²/(2dt)`. Mass conservation,
//! the maximum principle and energy dissipation all hold step by step.

use serde::{Deserialize, Serialize};

use crate::calculus::{cheeger_energy, dpm, CalculusKind};
use crate::config::Tolerances;
use crate::curves::CurveSample;
use crate::linalg::ShiftedLaplacian;
use crate::report::VerificationReport;
use crate::space::{ProbMeasure, Space};
use crate::transport::Potential;
use crate::{Error, Result};

/// `(Δf)(x) = Σ_{y~x} w_xy (f(y) − f(x)) / m(x)`.
pub fn laplacian(space: &Space, f: &[f64]) -> Potential {
    let m = space.measure();
    (0..space.len())
        .map(|x| space.neighbors(x).iter().map(|nb| nb.weight * (f[nb.index] - f[x])).sum::<f64>() / m[x])
        .collect()
}

/// `‖f‖²_{L²(m)}`.
fn l2_sq(space: &Space, f: &[f64]) -> f64 {
    f.iter().zip(space.measure()).map(|(v, m)| v * v * m).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatTrajectory {
    pub times: Vec<f64>,
    pub densities: Vec<Vec<f64>>,
    pub energies: Vec<f64>,
    pub laplacians: Vec<Vec<f64>>,
}

impl HeatTrajectory {
    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.steps()]
    }

    /// Every `stride`-th density as a curve on `[0, 1]`, time rescaled by the horizon.
    pub fn to_curve(&self, space: &Space, stride: usize) -> Result<CurveSample> {
        if stride == 0 || !self.steps().is_multiple_of(stride) {
            return Err(Error::BadCurve(format!("stride {stride} does not divide {} steps", self.steps())));
        }
        let t_end = self.horizon();
        let mut times = Vec::new();
        let mut measures = Vec::new();
        for k in (0..=self.steps()).step_by(stride) {
            times.push(self.times[k] / t_end);
            measures.push(ProbMeasure::from_density(space, self.densities[k].clone())?);
        }
        CurveSample::new(space, times, measures)
    }
}

pub fn run_heat_flow(space: &Space, rho0: &[f64], horizon: f64, dt: f64) -> Result<HeatTrajectory> {
    space.check_len("initial density", rho0.len())?;
    if rho0.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::BadInitial("density must be finite and nonnegative".into()));
    }
    if !(horizon > 0.0 && dt > 0.0 && dt <= horizon) {
        return Err(Error::BadInitial(format!("need 0 < dt <= T, got dt={dt}, T={horizon}")));
    }
    let steps = (horizon / dt).round() as usize;
    if ((steps as f64) * dt - horizon).abs() > 1e-9 * horizon {
        return Err(Error::BadInitial(format!("dt={dt} does not divide T={horizon}")));
    }
    let mass = space.measure();
    let solver = ShiftedLaplacian::new(mass, space.edges(), dt)?;
    let mut traj = HeatTrajectory {
        times: vec![0.0],
        densities: vec![rho0.to_vec()],
        energies: vec![cheeger_energy(space, CalculusKind::Quadratic, rho0)],
        laplacians: vec![laplacian(space, rho0)],
    };
    let mut rho = rho0.to_vec();
    for k in 1..=steps {
        let rhs: Vec<f64> = rho.iter().zip(mass).map(|(r, m)| r * m).collect();
        rho = solver.solve(&rhs);
        if rho.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverFailure(format!("non-finite density at step {k}")));
        }
        traj.times.push(k as f64 * dt);
        traj.energies.push(cheeger_energy(space, CalculusKind::Quadratic, &rho));
        traj.laplacians.push(laplacian(space, &rho));
        traj.densities.push(rho.clone());
    }
    Ok(traj)
}

/// Step-wise invariants of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatInvariants {
    /// `max_k |Σρ_k m − Σρ_0 m|`.
    pub mass_drift: f64,
    /// `max (ρ_k − max ρ0)⁺ ∨ (min ρ0 − ρ_k)⁺`.
    pub max_principle: f64,
    /// Rounding allowance used for the maximum principle.
    pub max_principle_tol: f64,
    /// `max_k (dt‖Δρ_{k+1}‖² − (E_k − E_{k+1}))`.
    pub dissipation_excess: f64,
    /// `Σ dt‖Δρ_k‖²`, k ≥ 1.
    pub dissipated: f64,
    pub initial_energy: f64,
    /// `max (E_{k+1} − E_k)⁺`.
    pub energy_increase: f64,
    /// Worst `ε∫f ∂_tρ dm − (E(ρ − εf) − E(ρ))` over steps and samples.
    pub subdifferential_excess: f64,
}

pub fn check_invariants(space: &Space, traj: &HeatTrajectory, probes: &[Vec<f64>]) -> HeatInvariants {
    let rho0 = &traj.densities[0];
    let (lo, hi) = rho0.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let m0 = space.integrate(rho0);
    let dt = traj.dt();
    let scale = rho0.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut out = HeatInvariants {
        mass_drift: 0.0,
        max_principle: 0.0,
        max_principle_tol: 4.0 * f64::EPSILON * scale,
        dissipation_excess: f64::NEG_INFINITY,
        dissipated: 0.0,
        initial_energy: traj.energies[0],
        energy_increase: 0.0,
        subdifferential_excess: f64::NEG_INFINITY,
    };
    for k in 0..=traj.steps() {
        let rho = &traj.densities[k];
        out.mass_drift = out.mass_drift.max((space.integrate(rho) - m0).abs());
        for &v in rho {
            out.max_principle = out.max_principle.max(v - hi).max(lo - v);
        }
        if k == 0 {
            continue;
        }
        let step = dt * l2_sq(space, &traj.laplacians[k]);
        out.dissipated += step;
        let drop = traj.energies[k - 1] - traj.energies[k];
        let slack = 1e-12 * traj.energies[0].max(f64::MIN_POSITIVE);
        out.dissipation_excess = out.dissipation_excess.max(step - drop - slack);
        out.energy_increase = out.energy_increase.max(-drop);

        let velocity: Vec<f64> = rho.iter().zip(&traj.densities[k - 1]).map(|(a, b)| (a - b) / dt).collect();
        for f in probes {
            for eps in [1e-3, 1e-1, 1.0] {
                let lhs = eps * space.integrate(&f.iter().zip(&velocity).map(|(a, v)| a * v).collect::<Vec<_>>());
                let moved: Vec<f64> = rho.iter().zip(f).map(|(r, v)| r - eps * v).collect();
                let rhs = cheeger_energy(space, CalculusKind::Quadratic, &moved) - traj.energies[k];
                out.subdifferential_excess = out.subdifferential_excess.max(lhs - rhs);
            }
        }
    }
    if out.dissipation_excess == f64::NEG_INFINITY {
        out.dissipation_excess = 0.0;
    }
    if out.subdifferential_excess == f64::NEG_INFINITY {
        out.subdifferential_excess = 0.0;
    }
    out
}

impl HeatInvariants {
    pub fn to_report(&self, tol: &Tolerances) -> VerificationReport {
        let mut r = VerificationReport::new("heat-invariants");
        r.check("mass", "mass conservation", self.mass_drift, 0.0, tol.mass);
        r.check("max-principle", "weak maximum principle", self.max_principle, 0.0, self.max_principle_tol);
        r.check("dissipation-step", "energy dissipation per step", self.dissipation_excess, 0.0, 0.0);
        r.check(
            "dissipation-total",
            "dissipated energy bounded by initial energy",
            self.dissipated,
            self.initial_energy,
            1e-12 * self.initial_energy,
        );
        r.check("energy-monotone", "energy nonincreasing", self.energy_increase, 0.0, 0.0);
        r.check("subdifferential", "heat flow is the energy gradient", self.subdifferential_excess, 0.0, tol.floor);
        r
    }
}

/// Continuity equation of the heat flow tested against a battery.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatContinuityReport {
    /// `max |central difference of ∫fρ dm − sandwich|` over interior steps and `f`.
    pub sandwich_residual: f64,
    /// `max (D⁻ side − D⁺ side)⁺`; the ordering of the sandwich.
    pub sandwich_order: f64,
    /// `max |−∫D f(∇ρ) dm − ∫∇f·∇(−log ρ) dμ|`.
    pub chain_rule_gap: f64,
    /// Largest second divided difference of `t ↦ ∫fρ_t dm` over the battery.
    pub modulus: f64,
    /// `a·dt·modulus + floor`: the remainder of a central difference.
    pub tolerance: f64,
    pub chain_tolerance: f64,
}

pub fn verify_heat_continuity(
    space: &Space,
    traj: &HeatTrajectory,
    kind: CalculusKind,
    battery: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<HeatContinuityReport> {
    if kind != CalculusKind::Quadratic {
        return Err(Error::BadSpec("the heat flow is defined for the quadratic calculus only".into()));
    }
    if traj.densities.iter().flatten().any(|&r| r <= 0.0) {
        return Err(Error::BadInitial("continuity check needs a density bounded away from 0".into()));
    }
    let dt = traj.dt();
    let mut out = HeatContinuityReport {
        sandwich_residual: 0.0,
        sandwich_order: 0.0,
        chain_rule_gap: 0.0,
        modulus: 0.0,
        tolerance: 0.0,
        chain_tolerance: tol.discretization(0.0, resolution(space)),
    };
    for f in battery {
        space.check_len("battery function", f.len())?;
        let ints: Vec<f64> = traj.densities.iter().map(|r| space.integrate(&mul(f, r))).collect();
        for k in 1..traj.steps() {
            let rho = &traj.densities[k];
            let central = (ints[k + 1] - ints[k - 1]) / (2.0 * dt);
            out.modulus = out.modulus.max((ints[k + 1] - 2.0 * ints[k] + ints[k - 1]).abs() / (dt * dt));
            let d = dpm(space, kind, f, rho)?;
            let lower = -space.integrate(&d.plus);
            let upper = -space.integrate(&d.minus);
            out.sandwich_order = out.sandwich_order.max(lower - upper);
            let miss = (lower - central).max(central - upper).max(0.0);
            out.sandwich_residual = out.sandwich_residual.max(miss);

            let log: Vec<f64> = rho.iter().map(|r| -r.ln()).collect();
            let grad_dot = dpm(space, kind, f, &log)?.plus;
            let flux = space.integrate(&mul(&grad_dot, rho));
            out.chain_rule_gap = out.chain_rule_gap.max((flux - lower).abs());
        }
    }
    out.tolerance = tol.discretization(dt * out.modulus, 0.0);
    Ok(out)
}

impl HeatContinuityReport {
    pub fn to_report(&self) -> VerificationReport {
        let mut r = VerificationReport::new("heat-continuity");
        r.check("sandwich", "continuity equation of the heat flow", self.sandwich_residual, 0.0, self.tolerance);
        r.check("sandwich-order", "lower side below upper side", self.sandwich_order, 0.0, 1e-12);
        r.check("chain-rule", "logarithmic form of the velocity", self.chain_rule_gap, 0.0, self.chain_tolerance);
        r
    }
}

/// Second-difference modulus of `t ↦ ∫f dμ_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakC1Report {
    /// `K = max |second divided difference|`.
    pub modulus: f64,
    /// `max |difference of consecutive slopes|`; vanishes like `K·Δt`.
    pub slope_jump: f64,
}

pub fn verify_weak_c1(space: &Space, curve: &CurveSample, battery: &[Vec<f64>]) -> Result<WeakC1Report> {
    let mut out = WeakC1Report { modulus: 0.0, slope_jump: 0.0 };
    for f in battery {
        space.check_len("battery function", f.len())?;
        let ints = curve.integrals(space, f);
        for k in 1..curve.steps() {
            let (a, b) = (curve.dt(k - 1), curve.dt(k));
            let s0 = (ints[k] - ints[k - 1]) / a;
            let s1 = (ints[k + 1] - ints[k]) / b;
            out.slope_jump = out.slope_jump.max((s1 - s0).abs());
            out.modulus = out.modulus.max(2.0 * (s1 - s0).abs() / (a + b));
        }
    }
    Ok(out)
}

/// Largest edge length.
pub fn resolution(space: &Space) -> f64 {
    space.edges().iter().map(|&(i, j, _)| space.d(i, j)).fold(0.0, f64::max)
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}
