//! Discrete weak-gradient calculus on the edge graph of a [`Space`].
//!
//! Two realizations of the minimal weak upper gradient `|Df|` are provided:
//!
//! * [`CalculusKind::Slope`]: `|Df|(x) = max_{y~x} |f(y) − f(x)| / d(x,y)`,
//!   the edge-neighbor local Lipschitz constant. Its Sobolev seminorm is not
//!   a Hilbert norm, and `D⁻f(∇g) < D⁺f(∇g)` happens whenever the maximum is
//!   attained on several edges.
//! * [`CalculusKind::Quadratic`]: `|Df|²(x) = Σ_{y~x} w_xy (f(y) − f(x))² / (2 m(x))`,
//!   so that `∫|Df|² dm` is the weighted graph Dirichlet form. This is the
//!   infinitesimally Hilbertian case.
//!
//! On top of `|Df|` the module builds the seminorm `‖f‖_μ`, the Cheeger energy,
//! the one-sided derivatives `D±f(∇g)` and the dual norm `‖L‖*_μ` of a
//! functional that annihilates constants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::space::{ProbMeasure, Space};
use crate::{Error, Result};

/// Default number of halvings in the ε-grid used for slope-kind `D±`.
pub const DEFAULT_EPS_HALVINGS: u32 = 40;

/// Relative slack tolerated in the monotonicity of the difference quotient.
const MONOTONE_TOL: f64 = 1e-9;

/// Default iteration budget for the slope-kind dual norm.
pub const DEFAULT_ASCENT_ITERATIONS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CalculusKind {
    Slope,
    Quadratic,
}

impl fmt::Display for CalculusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CalculusKind::Slope => "slope",
            CalculusKind::Quadratic => "quadratic",
        })
    }
}

impl FromStr for CalculusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slope" => Ok(CalculusKind::Slope),
            "quadratic" => Ok(CalculusKind::Quadratic),
            other => Err(Error::BadSpec(format!("unknown calculus kind {other:?}"))),
        }
    }
}

/// Pointwise `|Df|`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradField {
    pub values: Vec<f64>,
}

/// A linear functional `f ↦ Σ ℓ(x) f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Functional {
    pub coeffs: Vec<f64>,
}

impl Functional {
    pub fn zero(n: usize) -> Self {
        Functional { coeffs: vec![0.0; n] }
    }

    pub fn apply(&self, f: &[f64]) -> f64 {
        self.coeffs.iter().zip(f).map(|(l, v)| l * v).sum()
    }

    /// `ℓ · 1`; zero for functionals coming from mass-preserving curves.
    pub fn total(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// The functional `f ↦ ∫ f d(ν − μ) / dt`.
    pub fn from_difference(space: &Space, from: &ProbMeasure, to: &ProbMeasure, dt: f64) -> Self {
        Functional {
            coeffs: from
                .density
                .iter()
                .zip(&to.density)
                .zip(space.measure())
                .map(|((a, b), m)| (b - a) * m / dt)
                .collect(),
        }
    }
}

/// `|Df|²` pointwise.
pub fn grad_sq(space: &Space, kind: CalculusKind, f: &[f64]) -> Vec<f64> {
    let m = space.measure();
    (0..space.len())
        .map(|x| match kind {
            CalculusKind::Slope => space
                .neighbors(x)
                .iter()
                .map(|nb| {
                    let s = (f[nb.index] - f[x]) / nb.dist;
                    s * s
                })
                .fold(0.0, f64::max),
            CalculusKind::Quadratic => {
                space
                    .neighbors(x)
                    .iter()
                    .map(|nb| {
                        let df = f[nb.index] - f[x];
                        nb.weight * df * df
                    })
                    .sum::<f64>()
                    / (2.0 * m[x])
            }
        })
        .collect()
}

pub fn grad_modulus(space: &Space, kind: CalculusKind, f: &[f64]) -> GradField {
    GradField { values: grad_sq(space, kind, f).into_iter().map(f64::sqrt).collect() }
}

/// `‖f‖²_μ = ∫ |Df|² dμ`.
pub fn seminorm_sq(space: &Space, kind: CalculusKind, f: &[f64], mu: &ProbMeasure) -> f64 {
    mu.integrate(space, &grad_sq(space, kind, f))
}

pub fn seminorm_mu(space: &Space, kind: CalculusKind, f: &[f64], mu: &ProbMeasure) -> f64 {
    seminorm_sq(space, kind, f, mu).sqrt()
}

/// `‖f‖²_{S²} = ∫ |Df|² dm`.
pub fn sobolev_sq(space: &Space, kind: CalculusKind, f: &[f64]) -> f64 {
    space.integrate(&grad_sq(space, kind, f))
}

/// Cheeger energy `E(f) = ½ ∫ |Df|² dm`.
pub fn cheeger_energy(space: &Space, kind: CalculusKind, f: &[f64]) -> f64 {
    0.5 * sobolev_sq(space, kind, f)
}

/// Edge conductances of the quadratic form `‖f‖²_μ = Σ_e c_e (f_i − f_j)²`.
pub(crate) fn form_conductances(space: &Space, mu: &ProbMeasure) -> Vec<(usize, usize, f64)> {
    space
        .edges()
        .iter()
        .map(|&(i, j, w)| (i, j, w * 0.5 * (mu.density[i] + mu.density[j])))
        .collect()
}

/// One-sided derivatives `D⁻f(∇g)` and `D⁺f(∇g)`.
///
/// `certificate` bounds the distance of each reported value to its limit; it
/// is zero for the quadratic kind, where both sides are given in closed form.
#[derive(Debug, Clone, PartialEq)]
pub struct Dpm {
    pub minus: Vec<f64>,
    pub plus: Vec<f64>,
    pub certificate: Vec<f64>,
}

pub fn dpm(space: &Space, kind: CalculusKind, f: &[f64], g: &[f64]) -> Result<Dpm> {
    dpm_with_grid(space, kind, f, g, DEFAULT_EPS_HALVINGS)
}

/// As [`dpm`], with the slope-kind quotient evaluated at `ε = ±2^-k`,
/// `k = 0..=halvings`.
pub fn dpm_with_grid(space: &Space, kind: CalculusKind, f: &[f64], g: &[f64], halvings: u32) -> Result<Dpm> {
    let n = space.len();
    match kind {
        CalculusKind::Quadratic => {
            let m = space.measure();
            let vals: Vec<f64> = (0..n)
                .map(|x| {
                    space
                        .neighbors(x)
                        .iter()
                        .map(|nb| nb.weight * (f[nb.index] - f[x]) * (g[nb.index] - g[x]))
                        .sum::<f64>()
                        / (2.0 * m[x])
                })
                .collect();
            Ok(Dpm { minus: vals.clone(), plus: vals, certificate: vec![0.0; n] })
        }
        CalculusKind::Slope => {
            let mut out = Dpm { minus: vec![0.0; n], plus: vec![0.0; n], certificate: vec![0.0; n] };
            for x in 0..n {
                let (minus, plus, cert) = slope_quotient_limits(space, f, g, x, halvings)?;
                out.minus[x] = minus;
                out.plus[x] = plus;
                out.certificate[x] = cert;
            }
            Ok(out)
        }
    }
}

/// `(|D(g+εf)|² − |Dg|²)(x) / (2ε)` for the slope kind, expanded edge by edge
/// so that no cancellation against `|Dg|²` happens for small `ε`.
fn slope_quotient(slopes: &[(f64, f64)], top: f64, eps: f64) -> f64 {
    let num = slopes
        .iter()
        .map(|&(s, t)| (s * s - top) + eps * (2.0 * s * t + eps * t * t))
        .fold(f64::NEG_INFINITY, f64::max);
    num / (2.0 * eps)
}

fn slope_quotient_limits(space: &Space, f: &[f64], g: &[f64], x: usize, halvings: u32) -> Result<(f64, f64, f64)> {
    let slopes: Vec<(f64, f64)> = space
        .neighbors(x)
        .iter()
        .map(|nb| ((g[nb.index] - g[x]) / nb.dist, (f[nb.index] - f[x]) / nb.dist))
        .collect();
    if slopes.is_empty() {
        return Ok((0.0, 0.0, 0.0));
    }
    let top = slopes.iter().map(|(s, _)| s * s).fold(0.0, f64::max);

    // ε ↓ 0: quotient nonincreasing; ε ↑ 0: nondecreasing.
    let mut prev_plus = f64::INFINITY;
    let mut prev_minus = f64::NEG_INFINITY;
    let mut plus = 0.0;
    let mut minus = 0.0;
    let mut cert: f64 = 0.0;
    for k in 0..=halvings {
        let eps = (-(k as f64)).exp2();
        plus = slope_quotient(&slopes, top, eps);
        minus = slope_quotient(&slopes, top, -eps);
        let slack = MONOTONE_TOL * (1.0 + plus.abs().max(minus.abs()));
        if plus > prev_plus + slack {
            return Err(Error::NonMonotoneQuotient { point: x, drop: plus - prev_plus });
        }
        if minus < prev_minus - slack {
            return Err(Error::NonMonotoneQuotient { point: x, drop: prev_minus - minus });
        }
        if minus > plus + slack {
            return Err(Error::NonMonotoneQuotient { point: x, drop: minus - plus });
        }
        if k == halvings && k > 0 {
            cert = (prev_plus - plus).abs().max((minus - prev_minus).abs());
        }
        prev_plus = plus;
        prev_minus = minus;
    }
    Ok((minus, plus, cert))
}

/// Dual norm `‖L‖*_μ` together with its representing potential.
#[derive(Debug, Clone, PartialEq)]
pub struct DualNorm {
    pub norm: f64,
    /// Maximizer `φ` of `L(f) − ½‖f‖²_μ` (zero mean per component); quadratic
    /// kind only.
    pub potential: Option<Vec<f64>>,
    /// False when `norm` is only a certified lower bound.
    pub exact: bool,
}

pub fn dual_norm(space: &Space, kind: CalculusKind, l: &Functional, mu: &ProbMeasure) -> Result<DualNorm> {
    dual_norm_with(space, kind, l, mu, DEFAULT_ASCENT_ITERATIONS)
}

pub fn dual_norm_with(
    space: &Space,
    kind: CalculusKind,
    l: &Functional,
    mu: &ProbMeasure,
    iterations: usize,
) -> Result<DualNorm> {
    space.check_len("functional", l.coeffs.len())?;
    let scale = l.coeffs.iter().map(|v| v.abs()).sum::<f64>();
    if l.total().abs() > 1e-10 * scale.max(1e-300) {
        return Err(Error::Unrepresentable(l.total()));
    }
    if scale == 0.0 {
        return Ok(DualNorm {
            norm: 0.0,
            potential: (kind == CalculusKind::Quadratic).then(|| vec![0.0; space.len()]),
            exact: true,
        });
    }
    match kind {
        CalculusKind::Quadratic => {
            let phi = linalg::laplacian_solve(space.len(), &form_conductances(space, mu), &l.coeffs)?;
            let n2 = l.apply(&phi).max(0.0);
            Ok(DualNorm { norm: n2.sqrt(), potential: Some(phi), exact: true })
        }
        CalculusKind::Slope => Ok(slope_dual_lower_bound(space, l, mu, iterations)),
    }
}

/// `L(f) − ½‖f‖²_μ` for the slope kind.
fn slope_dual_objective(space: &Space, l: &Functional, mu: &ProbMeasure, f: &[f64]) -> f64 {
    l.apply(f) - 0.5 * seminorm_sq(space, CalculusKind::Slope, f, mu)
}

/// Projected subgradient ascent on the concave map `f ↦ L(f) − ½‖f‖²_μ`.
fn slope_dual_lower_bound(space: &Space, l: &Functional, mu: &ProbMeasure, iterations: usize) -> DualNorm {
    let n = space.len();
    let masses = mu.masses(space);

    // warm start: best multiple of the quadratic potential
    let mut f = vec![0.0; n];
    if let Ok(phi) = linalg::laplacian_solve(n, &form_conductances(space, mu), &l.coeffs) {
        let lin = l.apply(&phi);
        let quad = seminorm_sq(space, CalculusKind::Slope, &phi, mu);
        if quad > 0.0 && lin > 0.0 {
            let lambda = lin / quad;
            f = phi.iter().map(|v| lambda * v).collect();
        }
    }
    let mut best = slope_dual_objective(space, l, mu, &f).max(0.0);
    if best == 0.0 {
        f.iter_mut().for_each(|v| *v = 0.0);
    }

    let mut grad = vec![0.0; n];
    for k in 1..=iterations {
        grad.copy_from_slice(&l.coeffs);
        for x in 0..n {
            if masses[x] == 0.0 {
                continue;
            }
            let active = space.neighbors(x).iter().max_by(|a, b| {
                let sa = ((f[a.index] - f[x]) / a.dist).abs();
                let sb = ((f[b.index] - f[x]) / b.dist).abs();
                sa.total_cmp(&sb)
            });
            if let Some(nb) = active {
                let s = (f[nb.index] - f[x]) / nb.dist;
                let c = masses[x] * s / nb.dist;
                grad[nb.index] -= c;
                grad[x] += c;
            }
        }
        let mean = grad.iter().sum::<f64>() / n as f64;
        let step = 1.0 / (k as f64).sqrt();
        for (fi, gi) in f.iter_mut().zip(&grad) {
            *fi += step * (gi - mean);
        }
        best = best.max(slope_dual_objective(space, l, mu, &f));
    }
    DualNorm { norm: (2.0 * best).sqrt(), potential: None, exact: false }
}

/// `‖φ_n − φ_k‖_μ` for consecutive truncations `φ_n = min{n, max{−n, φ}}`
/// along `levels`; the sequence is Cauchy and vanishes once the level exceeds
/// `max |φ|`.
pub fn truncation_cauchy(space: &Space, kind: CalculusKind, phi: &[f64], mu: &ProbMeasure, levels: &[f64]) -> Vec<f64> {
    let trunc = |n: f64| -> Vec<f64> { phi.iter().map(|v| v.clamp(-n, n)).collect() };
    levels
        .windows(2)
        .map(|w| {
            let a = trunc(w[0]);
            let b = trunc(w[1]);
            let diff: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            seminorm_mu(space, kind, &diff, mu)
        })
        .collect()
}

/// A Lipschitz map `ℝ → ℝ` used in chain-rule checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainMap {
    /// `min{n, max{−n, r}}`.
    Truncation(f64),
    /// `min{n, |r|}`.
    AbsTruncated(f64),
    /// `tanh(r)`.
    Tanh,
}

impl ChainMap {
    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            ChainMap::Truncation(n) => r.clamp(-n, n),
            ChainMap::AbsTruncated(n) => r.abs().min(n),
            ChainMap::Tanh => r.tanh(),
        }
    }

    /// `|φ'(r)|`, with an arbitrary choice at kinks.
    pub fn abs_derivative(&self, r: f64) -> f64 {
        match *self {
            ChainMap::Truncation(n) | ChainMap::AbsTruncated(n) => {
                if r.abs() < n {
                    1.0
                } else {
                    0.0
                }
            }
            ChainMap::Tanh => 1.0 - r.tanh().powi(2),
        }
    }

    pub fn is_monotone(&self) -> bool {
        !matches!(self, ChainMap::AbsTruncated(_))
    }

    /// Largest `|φ'|` on `[lo, hi]`.
    fn lip_on(&self, lo: f64, hi: f64) -> f64 {
        match *self {
            ChainMap::Truncation(n) => {
                if hi <= -n || lo >= n {
                    0.0
                } else {
                    1.0
                }
            }
            ChainMap::AbsTruncated(n) => {
                if lo >= n || hi <= -n {
                    0.0
                } else {
                    1.0
                }
            }
            ChainMap::Tanh => {
                let r = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
                1.0 - r.tanh().powi(2)
            }
        }
    }

    /// Whether `φ` is affine on `[lo, hi]`.
    fn affine_on(&self, lo: f64, hi: f64) -> bool {
        match *self {
            ChainMap::Truncation(n) => hi <= -n || lo >= n || (lo >= -n && hi <= n),
            ChainMap::AbsTruncated(n) => {
                (lo >= n || hi <= -n) || (lo >= 0.0 && hi <= n) || (lo >= -n && hi <= 0.0)
            }
            ChainMap::Tanh => lo == hi,
        }
    }
}

/// Pointwise chain-rule diagnostics for `φ ∘ f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainRuleResidual {
    /// `max | |D(φ∘f)| − |φ'|∘f |Df| |` over points where `φ` is affine on the
    /// range of `f` over the closed neighborhood.
    pub equality: f64,
    /// `max (|D(φ∘f)| − Lip(φ; local range) |Df|)⁺` over all points.
    pub inequality: f64,
    /// Number of points where the equality residual was evaluated.
    pub affine_points: usize,
}

pub fn chain_rule_residual(space: &Space, kind: CalculusKind, f: &[f64], map: ChainMap) -> ChainRuleResidual {
    let comp: Vec<f64> = f.iter().map(|&v| map.eval(v)).collect();
    let dphi = grad_modulus(space, kind, &comp).values;
    let df = grad_modulus(space, kind, f).values;
    let mut out = ChainRuleResidual { equality: 0.0, inequality: 0.0, affine_points: 0 };
    for x in 0..space.len() {
        let (lo, hi) = space
            .neighbors(x)
            .iter()
            .fold((f[x], f[x]), |(lo, hi), nb| (lo.min(f[nb.index]), hi.max(f[nb.index])));
        out.inequality = out.inequality.max(dphi[x] - map.lip_on(lo, hi) * df[x]);
        if map.affine_on(lo, hi) {
            out.affine_points += 1;
            out.equality = out.equality.max((dphi[x] - map.abs_derivative(f[x]) * df[x]).abs());
        }
    }
    out
}

/// Diagnostics for the structural identities of a calculus.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    /// `max |‖f+g‖² + ‖f−g‖² − 2‖f‖² − 2‖g‖²|` in `S²`.
    pub parallelogram_deficit: f64,
    /// `max (D⁺f(∇g) − D⁻f(∇g))` over points and ordered pairs.
    pub strict_convexity_gap: f64,
    /// Chain-rule equality residual for monotone maps (truncations, tanh).
    pub chain_rule_monotone: f64,
    /// Chain-rule equality residual for `|r|` truncated.
    pub chain_rule_abs: f64,
    /// Worst violation of the chain-rule inequality, all maps.
    pub chain_rule_inequality: f64,
    /// `max (|D(fg)| − |f||Dg| − |g||Df|)⁺`; positive values are discretization
    /// error of the edge-based gradient.
    pub leibniz_excess: f64,
    /// Worst violation of `D⁺((1−λ)f₁+λf₂)(∇g) ≤ (1−λ)D⁺f₁(∇g) + λD⁺f₂(∇g)`.
    pub dpm_convexity_violation: f64,
}

pub fn structure_tests(space: &Space, kind: CalculusKind, sample_fns: &[Vec<f64>]) -> Result<StructureReport> {
    if sample_fns.is_empty() {
        return Err(Error::BadSpec("structure tests need at least one sample function".into()));
    }
    for f in sample_fns {
        space.check_len("sample function", f.len())?;
    }
    let norm2 = |f: &[f64]| sobolev_sq(space, kind, f);
    let mut rep = StructureReport {
        parallelogram_deficit: 0.0,
        strict_convexity_gap: 0.0,
        chain_rule_monotone: 0.0,
        chain_rule_abs: 0.0,
        chain_rule_inequality: 0.0,
        leibniz_excess: 0.0,
        dpm_convexity_violation: 0.0,
    };
    let n = space.len();
    for (i, f) in sample_fns.iter().enumerate() {
        let scale = f.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let maps = [
            ChainMap::Truncation(0.5 * scale),
            ChainMap::Truncation(0.9 * scale),
            ChainMap::AbsTruncated(0.7 * scale),
            ChainMap::Tanh,
        ];
        for map in maps {
            let r = chain_rule_residual(space, kind, f, map);
            if map.is_monotone() {
                rep.chain_rule_monotone = rep.chain_rule_monotone.max(r.equality);
            } else {
                rep.chain_rule_abs = rep.chain_rule_abs.max(r.equality);
            }
            rep.chain_rule_inequality = rep.chain_rule_inequality.max(r.inequality);
        }

        for g in &sample_fns[i..] {
            let sum: Vec<f64> = f.iter().zip(g).map(|(a, b)| a + b).collect();
            let diff: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
            let d = norm2(&sum) + norm2(&diff) - 2.0 * norm2(f) - 2.0 * norm2(g);
            rep.parallelogram_deficit = rep.parallelogram_deficit.max(d.abs());

            for (a, b) in [(f, g), (g, f)] {
                let dp = dpm(space, kind, a, b)?;
                for x in 0..n {
                    rep.strict_convexity_gap = rep.strict_convexity_gap.max(dp.plus[x] - dp.minus[x]);
                }
            }

            let prod: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
            let dprod = grad_modulus(space, kind, &prod).values;
            let df = grad_modulus(space, kind, f).values;
            let dg = grad_modulus(space, kind, g).values;
            for x in 0..n {
                let bound = f[x].abs() * dg[x] + g[x].abs() * df[x];
                rep.leibniz_excess = rep.leibniz_excess.max(dprod[x] - bound);
            }
        }
    }

    // convexity of f ↦ D⁺f(∇g) along λ ∈ {¼, ½, ¾}
    let k = sample_fns.len();
    for a in 0..k {
        let g = &sample_fns[a];
        let f1 = &sample_fns[(a + 1) % k];
        let f2 = &sample_fns[(a + 2) % k];
        let d1 = dpm(space, kind, f1, g)?;
        let d2 = dpm(space, kind, f2, g)?;
        for lambda in [0.25, 0.5, 0.75] {
            let mix: Vec<f64> = f1.iter().zip(f2).map(|(p, q)| (1.0 - lambda) * p + lambda * q).collect();
            let dm = dpm(space, kind, &mix, g)?;
            for x in 0..n {
                let rhs = (1.0 - lambda) * d1.plus[x] + lambda * d2.plus[x];
                let slack = dm.certificate[x] + (1.0 - lambda) * d1.certificate[x] + lambda * d2.certificate[x];
                rep.dpm_convexity_violation = rep.dpm_convexity_violation.max(dm.plus[x] - rhs - slack);
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{path_grid_1d, two_point};

    #[test]
    fn constant_has_zero_gradient() {
        let s = path_grid_1d(5).unwrap();
        for kind in [CalculusKind::Slope, CalculusKind::Quadratic] {
            let g = grad_modulus(&s, kind, &[3.0; 6]);
            assert!(g.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn two_point_gradients() {
        let s = two_point(1.0).unwrap();
        for kind in [CalculusKind::Slope, CalculusKind::Quadratic] {
            let g = grad_modulus(&s, kind, &[0.0, 1.0]);
            assert_eq!(g.values, vec![1.0, 1.0], "{kind}");
        }
    }

    #[test]
    fn slope_at_grid_peak() {
        let s = path_grid_1d(2).unwrap();
        let g = grad_modulus(&s, CalculusKind::Slope, &[0.0, 1.0, 0.0]);
        assert_eq!(g.values[1], 2.0);
    }

    #[test]
    fn seminorm_two_point() {
        let s = two_point(1.0).unwrap();
        let mu = ProbMeasure::reference(&s);
        assert!((seminorm_sq(&s, CalculusKind::Quadratic, &[0.0, 1.0], &mu) - 1.0).abs() < 1e-15);
        assert_eq!(seminorm_mu(&s, CalculusKind::Quadratic, &[2.0, 2.0], &mu), 0.0);
        // E(f) = ½ Σ |Df|² m = ½
        assert!((cheeger_energy(&s, CalculusKind::Quadratic, &[0.0, 1.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn squarepm_both_kinds() {
        let s = path_grid_1d(6).unwrap();
        let g = [0.3, -1.0, 0.7, 0.7, 2.0, 1.1, -0.4];
        for kind in [CalculusKind::Slope, CalculusKind::Quadratic] {
            let d = dpm(&s, kind, &g, &g).unwrap();
            let sq = grad_sq(&s, kind, &g);
            for x in 0..s.len() {
                let tol = d.certificate[x] + 1e-12 * (1.0 + sq[x]);
                assert!((d.plus[x] - sq[x]).abs() <= tol, "{kind} {x}");
                assert!((d.minus[x] - sq[x]).abs() <= tol, "{kind} {x}");
            }
        }
    }

    #[test]
    fn slope_witness_has_strict_gap() {
        let s = path_grid_1d(2).unwrap();
        let g = [0.0, 1.0, 0.0];
        let f = [0.0, 0.0, 1.0];
        let d = dpm(&s, CalculusKind::Slope, &f, &g).unwrap();
        // active slopes at the middle: s = (-2, -2), f-slopes t = (0, 2)
        assert!((d.plus[1] - 0.0).abs() <= d.certificate[1] + 1e-12);
        assert!((d.minus[1] + 4.0).abs() <= d.certificate[1] + 1e-12);
        assert!(d.plus[1] - d.minus[1] > 3.9);
    }

    #[test]
    fn dual_norm_zero_functional() {
        let s = two_point(1.0).unwrap();
        let mu = ProbMeasure::reference(&s);
        let dn = dual_norm(&s, CalculusKind::Quadratic, &Functional::zero(2), &mu).unwrap();
        assert_eq!(dn.norm, 0.0);
        assert_eq!(dn.potential, Some(vec![0.0, 0.0]));
    }

    #[test]
    fn dual_norm_two_point_by_hand() {
        // ‖f‖²_μ = (f_b − f_a)², so A = [[1,−1],[−1,1]], φ = (−½, ½), N² = 1
        let s = two_point(1.0).unwrap();
        let mu = ProbMeasure::reference(&s);
        let l = Functional { coeffs: vec![-1.0, 1.0] };
        let dn = dual_norm(&s, CalculusKind::Quadratic, &l, &mu).unwrap();
        assert!((dn.norm - 1.0).abs() < 1e-14);
        let phi = dn.potential.unwrap();
        assert!((phi[1] - phi[0] - 1.0).abs() < 1e-14);
        assert!((seminorm_mu(&s, CalculusKind::Quadratic, &phi, &mu) - dn.norm).abs() < 1e-14);
    }

    #[test]
    fn dual_norm_rejects_mass() {
        let s = two_point(1.0).unwrap();
        let mu = ProbMeasure::reference(&s);
        let l = Functional { coeffs: vec![1.0, 1.0] };
        assert!(matches!(
            dual_norm(&s, CalculusKind::Quadratic, &l, &mu),
            Err(Error::Unrepresentable(_))
        ));
    }

    #[test]
    fn dual_norm_singular_when_measure_cuts_graph() {
        let s = path_grid_1d(4).unwrap();
        let mu = ProbMeasure::normalized(&s, &[1.0, 1.0, 0.0, 0.0, 1.0]).unwrap();
        // moves mass from point 0 to point 4 across the empty middle
        let l = Functional { coeffs: vec![-1.0, 0.0, 0.0, 0.0, 1.0] };
        assert!(matches!(
            dual_norm(&s, CalculusKind::Quadratic, &l, &mu),
            Err(Error::SingularForm(_))
        ));
    }

    #[test]
    fn slope_dual_norm_is_a_lower_bound_two_point() {
        // on two points slope and quadratic |Df| coincide, so N = 1 is the sup
        let s = two_point(1.0).unwrap();
        let mu = ProbMeasure::reference(&s);
        let l = Functional { coeffs: vec![-1.0, 1.0] };
        let dn = dual_norm(&s, CalculusKind::Slope, &l, &mu).unwrap();
        assert!(!dn.exact);
        assert!(dn.norm <= 1.0 + 1e-12 && dn.norm > 0.999, "{}", dn.norm);
    }

    #[test]
    fn truncations_are_cauchy() {
        let s = path_grid_1d(8).unwrap();
        let mu = ProbMeasure::reference(&s);
        let phi: Vec<f64> = (0..9).map(|i| (i as f64 - 4.0).powi(3)).collect();
        let levels: Vec<f64> = (1..=80).map(|n| n as f64).collect();
        let steps = truncation_cauchy(&s, CalculusKind::Quadratic, &phi, &mu, &levels);
        assert!(steps.iter().skip(64).all(|&v| v == 0.0));
        assert!(steps[0] > 0.0);
    }

    #[test]
    fn chain_rule_truncation_is_exact_on_affine_points() {
        let s = path_grid_1d(10).unwrap();
        let f: Vec<f64> = (0..11).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
        for kind in [CalculusKind::Slope, CalculusKind::Quadratic] {
            let r = chain_rule_residual(&s, kind, &f, ChainMap::Truncation(1.5));
            assert!(r.affine_points > 0);
            assert!(r.equality <= 1e-12, "{kind} {r:?}");
            assert!(r.inequality <= 1e-12, "{kind} {r:?}");
        }
    }

    #[test]
    fn quadratic_structure_is_hilbertian() {
        let s = path_grid_1d(6).unwrap();
        let fns: Vec<Vec<f64>> = (0..4)
            .map(|k| (0..7).map(|i| ((i * (k + 2)) as f64 * 0.37).cos()).collect())
            .collect();
        let r = structure_tests(&s, CalculusKind::Quadratic, &fns).unwrap();
        assert!(r.parallelogram_deficit <= 1e-10, "{r:?}");
        assert!(r.strict_convexity_gap <= 1e-10, "{r:?}");
        assert!(r.dpm_convexity_violation <= 1e-10, "{r:?}");
    }

    #[test]
    fn slope_structure_witness_breaks_parallelogram() {
        let s = path_grid_1d(2).unwrap();
        let fns = vec![vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let r = structure_tests(&s, CalculusKind::Slope, &fns).unwrap();
        // ‖f+g‖² + ‖f−g‖² − 2‖f‖² − 2‖g‖² = 8/3 + 12 − 8 − 16/3
        assert!((r.parallelogram_deficit - 4.0 / 3.0).abs() < 1e-12, "{r:?}");
        assert!(r.strict_convexity_gap > 3.9);
    }
}
