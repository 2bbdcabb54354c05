//! Displacement interpolation on regular grids.
//!
//! Every atom `(x, y, γ)` of an optimal coupling travels along the straight
//! segment `(1−t)x + ty`; its mass is split barycentrically between the
//! nearest grid points on each axis. Each atom is lifted to paths by the
//! comonotone coupling of its per-time splits, which keeps the lifting at
//! `K + 2` paths per atom and axis.

use serde::{Deserialize, Serialize};

use crate::calculus::{dpm, CalculusKind};
use crate::config::Tolerances;
use crate::curves::{CurveFile, CurveSample};
use crate::heatflow::{resolution, verify_weak_c1, WeakC1Report};
use crate::hopflax;
use crate::paths::{represents_gradient, restrict, Plan};
use crate::report::VerificationReport;
use crate::space::{GridLayout, ProbMeasure, Space, SpaceFile};
use crate::transport::{c_transform, is_c_concave, solve_w2, Potential};
use crate::{Error, Result};

/// Fractions closer than this to a grid point snap onto it.
const SNAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicBundle {
    pub curve: CurveSample,
    /// Kantorovich potential from `μ₀` to `μ₁`.
    pub phi0: Potential,
    /// `φ_t = −Q_{1−t}(−φ₀ᶜ)` at every grid time.
    pub potentials: Vec<Potential>,
    pub lifting: Plan,
    /// `W₂(μ₀, μ₁)`.
    pub w2: f64,
}

/// On-disk form of a bundle; carries its space so it can be verified alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleFile {
    pub space: SpaceFile,
    pub curve: CurveFile,
    pub phi0: Vec<f64>,
    pub potentials: Vec<Vec<f64>>,
    pub lifting: Plan,
    pub w2: f64,
}

impl GeodesicBundle {
    /// Assembles a bundle from a curve, its endpoint potential and a lifting.
    pub fn from_parts(space: &Space, curve: CurveSample, phi0: Potential, lifting: Plan) -> Result<Self> {
        let w2 = solve_w2(space, &curve.measures[0], &curve.measures[curve.steps()])?.w2;
        let potentials = potential_flow(space, &phi0, &curve.times)?;
        Ok(GeodesicBundle { curve, phi0, potentials, lifting, w2 })
    }

    pub fn to_file(&self, space: &Space) -> BundleFile {
        BundleFile {
            space: space.to_file(),
            curve: self.curve.to_file(),
            phi0: self.phi0.clone(),
            potentials: self.potentials.clone(),
            lifting: self.lifting.clone(),
            w2: self.w2,
        }
    }

    pub fn from_file(file: BundleFile) -> Result<(Space, Self)> {
        let space = Space::from_file(file.space)?;
        let curve = CurveSample::from_file(&space, file.curve)?;
        file.lifting.validate_on(&space)?;
        let bundle = GeodesicBundle {
            curve,
            phi0: file.phi0,
            potentials: file.potentials,
            lifting: file.lifting,
            w2: file.w2,
        };
        Ok((space, bundle))
    }
}

/// `(index, weight)` pairs of the barycentric split of a fractional index.
fn split(p: f64) -> Vec<(usize, f64)> {
    let i0 = p.floor();
    let frac = p - i0;
    let i0 = i0 as usize;
    if frac <= SNAP {
        vec![(i0, 1.0)]
    } else if frac >= 1.0 - SNAP {
        vec![(i0 + 1, 1.0)]
    } else {
        vec![(i0, 1.0 - frac), (i0 + 1, frac)]
    }
}

/// Comonotone paths through per-time splits on one axis: `(indices, weight)`.
fn comonotone(splits: &[Vec<(usize, f64)>]) -> Vec<(Vec<usize>, f64)> {
    // quantile u < first weight lands on the lower index
    let mut cuts: Vec<f64> = vec![0.0, 1.0];
    for s in splits {
        if s.len() == 2 {
            cuts.push(s[0].1);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        if len <= 0.0 {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let path = splits
            .iter()
            .map(|s| if s.len() == 2 && mid >= s[0].1 { s[1].0 } else { s[0].0 })
            .collect();
        out.push((path, len));
    }
    out
}

fn grid_layout(space: &Space) -> Result<&GridLayout> {
    let layout = space
        .layout()
        .ok_or_else(|| Error::UnsupportedSpace("space has no grid layout".into()))?;
    if layout.shape.len() > 2 {
        return Err(Error::UnsupportedSpace(format!("{}-dimensional grids are not supported", layout.shape.len())));
    }
    Ok(layout)
}

pub fn displacement_interpolation(
    space: &Space,
    mu0: &ProbMeasure,
    mu1: &ProbMeasure,
    times: &[f64],
) -> Result<GeodesicBundle> {
    let layout = grid_layout(space)?.clone();
    let ot = solve_w2(space, mu0, mu1)?;
    let dims = layout.shape.len();
    let n = space.len();
    let mut masses = vec![vec![0.0; n]; times.len()];
    let mut paths = Vec::new();
    let mut weights = Vec::new();

    for (x, y, gamma) in ot.coupling.triplets() {
        let (ix, iy) = (layout.multi_index(x), layout.multi_index(y));
        // per axis: comonotone paths of fractional positions
        let mut axis_paths: Vec<Vec<(Vec<usize>, f64)>> = Vec::with_capacity(dims);
        for a in 0..dims {
            let splits: Vec<Vec<(usize, f64)>> = times
                .iter()
                .map(|&t| split((1.0 - t) * ix[a] as f64 + t * iy[a] as f64))
                .collect();
            axis_paths.push(comonotone(&splits));
        }
        let mut combos: Vec<(Vec<Vec<usize>>, f64)> = vec![(Vec::new(), gamma)];
        for ap in &axis_paths {
            combos = combos
                .into_iter()
                .flat_map(|(prefix, w)| {
                    ap.iter().map(move |(p, v)| {
                        let mut q = prefix.clone();
                        q.push(p.clone());
                        (q, w * v)
                    })
                })
                .collect();
        }
        for (per_axis, w) in combos {
            let path: Vec<usize> = (0..times.len())
                .map(|k| {
                    let idx: Vec<usize> = per_axis.iter().map(|p| p[k]).collect();
                    layout.flat_index(&idx)
                })
                .collect();
            for (k, &p) in path.iter().enumerate() {
                masses[k][p] += w;
            }
            paths.push(path);
            weights.push(w);
        }
    }

    let measures = masses
        .iter()
        .map(|m| ProbMeasure::from_masses(space, m))
        .collect::<Result<Vec<_>>>()?;
    let curve = CurveSample::new(space, times.to_vec(), measures)?;
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let lifting = Plan::new(times.to_vec(), paths, weights)?;
    let potentials = potential_flow(space, &ot.phi, times)?;
    Ok(GeodesicBundle { curve, phi0: ot.phi, potentials, lifting, w2: ot.w2 })
}

/// Uniform time grid `k/K`.
pub fn uniform_times(steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 / steps as f64).collect()
}

/// `φ_t = −Q_{1−t}(−φ₀ᶜ)`; at `t = 1` this is `φ₀ᶜ`, at `t = 0` it is `−φ₀`.
pub fn potential_flow(space: &Space, phi0: &[f64], times: &[f64]) -> Result<Vec<Potential>> {
    space.check_len("potential", phi0.len())?;
    let scale = 1.0 + phi0.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let (ok, deficit) = is_c_concave(space, phi0, 1e-9 * scale);
    if !ok {
        return Err(Error::NotCConcave(deficit));
    }
    let neg_c: Vec<f64> = c_transform(space, phi0).into_iter().map(|v| -v).collect();
    Ok(times
        .iter()
        .map(|&t| hopflax::evolve(space, &neg_c, (1.0 - t).max(0.0)).into_iter().map(|v| -v).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicReport {
    /// `max_{s,t} |W₂(μ_s,μ_t) − |s−t| W₂(μ₀,μ₁)|`.
    pub parametrization: f64,
    /// `max_t ½W₂²(μ_t,μ₁) − (∫ψ_t dμ_t + ∫ψ_tᶜ dμ₁)`, `ψ_t = (1−t)Q_{1−t}(−φᶜ)`.
    pub optimality: f64,
    /// `max_t` c-concavity deficit of `ψ_t`.
    pub c_concavity: f64,
    /// `max_k` representation deficit of the lifting restricted to `[t_k, 1]`
    /// for `(1−t_k)φ_{t_k}`.
    pub representation: f64,
    /// Most negative representation deficit, for reference.
    pub representation_min: f64,
    /// Continuity-equation sandwich residual over the battery.
    pub sandwich: f64,
    pub weak_c1: WeakC1Report,
    /// `max_k |N_k − ‖φ_{t_k}‖_{μ̄_k}|`; logged.
    pub norm_carried: f64,
    pub tolerance: f64,
}

pub fn verify_geodesic(
    space: &Space,
    bundle: &GeodesicBundle,
    kind: CalculusKind,
    battery: &[Vec<f64>],
    tol: &Tolerances,
) -> Result<GeodesicReport> {
    let curve = &bundle.curve;
    let kk = curve.steps();
    if bundle.potentials.len() != curve.times.len() || bundle.lifting.times.len() != curve.times.len() {
        return Err(Error::BadCurve("bundle components disagree on the time grid".into()));
    }
    let mu1 = &curve.measures[kk];

    let mut parametrization: f64 = 0.0;
    for s in 0..=kk {
        for t in s + 1..=kk {
            let w = solve_w2(space, &curve.measures[s], &curve.measures[t])?.w2;
            let target = (curve.times[t] - curve.times[s]) * bundle.w2;
            parametrization = parametrization.max((w - target).abs());
        }
    }

    let mut optimality = f64::NEG_INFINITY;
    let mut c_concavity: f64 = 0.0;
    for k in 0..=kk {
        let mu_t = &curve.measures[k];
        let lam = 1.0 - curve.times[k];
        let psi: Vec<f64> = bundle.potentials[k].iter().map(|v| -lam * v).collect();
        let psi_c = c_transform(space, &psi);
        let half = 0.5 * solve_w2(space, mu_t, mu1)?.primal_value;
        let dual = mu_t.integrate(space, &psi) + mu1.integrate(space, &psi_c);
        optimality = optimality.max(half - dual);
        c_concavity = c_concavity.max(is_c_concave(space, &psi, 0.0).1);
    }

    let mut representation = f64::NEG_INFINITY;
    let mut representation_min = f64::INFINITY;
    for k in 0..kk {
        let plan = restrict(&bundle.lifting, k, kk)?;
        let lam = 1.0 - curve.times[k];
        let g: Vec<f64> = bundle.potentials[k].iter().map(|v| lam * v).collect();
        let d = represents_gradient(space, &plan, &g, kind).deficit();
        representation = representation.max(d);
        representation_min = representation_min.min(d);
    }

    let mut sandwich: f64 = 0.0;
    for f in battery {
        space.check_len("battery function", f.len())?;
        let ints = curve.integrals(space, f);
        for k in 1..kk {
            let central = (ints[k + 1] - ints[k - 1]) / (curve.times[k + 1] - curve.times[k - 1]);
            let d = dpm(space, kind, f, &bundle.potentials[k])?;
            let mu = &curve.measures[k];
            let lower = mu.integrate(space, &d.minus);
            let upper = mu.integrate(space, &d.plus);
            sandwich = sandwich.max((lower - central).max(central - upper).max(0.0));
        }
    }

    let weak_c1 = verify_weak_c1(space, curve, battery)?;

    let mut norm_carried: f64 = 0.0;
    if kind == CalculusKind::Quadratic {
        let ops = crate::curves::extract_operator(space, curve, kind)?;
        for k in 0..kk {
            let norm = crate::calculus::seminorm_mu(space, kind, &bundle.potentials[k], &curve.interval_measure(k));
            norm_carried = norm_carried.max((ops.norms[k] - norm).abs());
        }
    }

    Ok(GeodesicReport {
        parametrization,
        optimality,
        c_concavity,
        representation,
        representation_min,
        sandwich,
        weak_c1,
        norm_carried,
        tolerance: tol.discretization(curve.max_dt(), resolution(space)),
    })
}

impl GeodesicReport {
    pub fn to_report(&self) -> VerificationReport {
        let t = self.tolerance;
        let mut r = VerificationReport::new("geodesic");
        r.check("parametrization", "constant-speed geodesic", self.parametrization, 0.0, t);
        r.check("potential-optimality", "Hopf-Lax potentials stay optimal", self.optimality, 0.0, t);
        r.check("potential-c-concave", "Hopf-Lax potentials are c-concave", self.c_concavity, 0.0, 1e-9);
        r.check("represents-gradient", "restricted lifting represents the gradient", self.representation, 0.0, t);
        r.check("continuity", "continuity equation along the geodesic", self.sandwich, 0.0, t);
        r.check("weak-c1", "weakly C1 curve", self.weak_c1.slope_jump, 0.0, t);
        r.diagnostic("representation-min", self.representation_min);
        r.diagnostic("weak-c1-modulus", self.weak_c1.modulus);
        r.diagnostic("norm-carried", self.norm_carried);
        r
    }
}
