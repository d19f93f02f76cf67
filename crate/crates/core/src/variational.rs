//! First variation of the energy, the critical-point residual, its
//! `u = tan(θ/2)` form, and a steepest-descent probe over sine modes.
//!
//! Along `θ + τφ` the energy changes at rate
//!
//! ```text
//! dE/dτ = -(1/4π²) ∬ cot((θ(x) - θ(y))/2) (φ(x) - φ(y)) cos(x - y) dx dy
//!       = -(1/4π²) ∫ R(x) φ(x) dx,
//! R(y)  = ∫_{-π}^{π} [cot((θ(y) - θ(y-x))/2) - cot((θ(y+x) - θ(y))/2)] cos x dx.
//! ```
//!
//! The discrete gradient differentiates the same midpoint rule as
//! [`conformal_energy`], so it agrees with finite differences of the
//! reported energy up to the finite-difference error.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{checked_nodes, conformal_energy, offset_tables, subtracted_energy, QuadratureSpec, TWO_PI_SQ};
use crate::error::{Error, Result};
use crate::maps::{difference_quotient_integral, validate, AngleMap};
use crate::quadrature::{pairwise_sum, GaussRule};

/// Descent stops once the coefficient gradient is this small.
pub const GRADIENT_TOL: f64 = 1e-6;

pub const MAX_MODES: usize = 32;

/// Samples used by the admissibility gate.
const GATE_SAMPLES: usize = 512;

/// Gauss order of the residual panels.
const RESIDUAL_ORDER: usize = 16;

/// `φ(t) = Σ c_k sin(k t)`, `k = 1..K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Perturbation {
    pub coeffs: Vec<f64>,
}

impl Perturbation {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    /// Single mode `amplitude · sin(k t)`.
    pub fn mode(k: usize, amplitude: f64) -> Self {
        assert!(k >= 1, "modes start at k = 1");
        let mut coeffs = vec![0.0; k];
        coeffs[k - 1] = amplitude;
        Self { coeffs }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * ((k + 1) as f64 * t).sin())
            .sum()
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| (k + 1) as f64 * c * ((k + 1) as f64 * t).cos())
            .sum()
    }

    /// Rescaled so that `max |φ'| = 1` on a 4096-point grid.
    pub fn unit_gradient(&self) -> Self {
        let n = 4096;
        let peak = (0..n)
            .map(|i| self.derivative(TAU * i as f64 / n as f64).abs())
            .fold(0.0, f64::max);
        if peak == 0.0 {
            return self.clone();
        }
        Self {
            coeffs: self.coeffs.iter().map(|c| c / peak).collect(),
        }
    }

    /// `θ + τ φ`.
    pub fn apply(&self, theta: &AngleMap, tau: f64) -> AngleMap {
        AngleMap::perturbed_unchecked(theta.clone(), self.coeffs.iter().map(|c| tau * c).collect())
    }
}

/// Refuse maps for which the variation integrals may diverge. Admitted:
/// a stable lower Hölder exponent `p < 2`, or a difference-quotient
/// integral `∬ |x-y| / |θ(x)-θ(y)|` that converges under refinement.
pub fn admissible(theta: &AngleMap) -> Result<()> {
    let diag = validate(theta, GATE_SAMPLES)?;
    if diag.hoelder_stable && diag.hoelder_lower.0 < 2.0 {
        return Ok(());
    }
    let (value, contracting) = difference_quotient_integral(theta, GATE_SAMPLES);
    if contracting {
        return Ok(());
    }
    Err(Error::NonIntegrable(format!(
        "lower Hölder exponent {} and non-converging difference-quotient integral ({value:e}); \
         the first variation may diverge",
        diag.hoelder_lower.0
    )))
}

/// `dE/dc_k` for `θ + Σ c_k sin(k t)` at `c = 0`, `k = 1..modes`, on the
/// `n`-node midpoint rule of the energy.
pub fn mode_gradient(theta: &AngleMap, modes: usize, n: usize) -> Result<Vec<f64>> {
    let h = TAU / n as f64;
    let values = checked_nodes(theta, n)?;
    let (_, cos) = offset_tables(n);
    let nodes: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    // sines[k * n + i] = sin((k+1) t_i)
    let sines: Vec<f64> = (0..modes)
        .flat_map(|k| nodes.iter().map(move |t| ((k + 1) as f64 * t).sin()))
        .collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = vec![0.0; modes];
            for j in i + 1..n {
                let w = cos[j - i] / (0.5 * (values[j] - values[i])).tan();
                for (k, a) in acc.iter_mut().enumerate() {
                    *a += w * (sines[k * n + j] - sines[k * n + i]);
                }
            }
            let slope = theta.derivative(nodes[i]);
            for (k, a) in acc.iter_mut().enumerate() {
                let kf = (k + 1) as f64;
                *a += kf * (kf * nodes[i]).cos() / slope;
            }
            acc
        })
        .collect();
    Ok((0..modes)
        .map(|k| {
            let col: Vec<f64> = rows.iter().map(|r| r[k]).collect();
            -pairwise_sum(&col) * h * h / TWO_PI_SQ
        })
        .collect())
}

/// Derivative of the energy along `θ + τφ` at `τ = 0`.
pub fn first_variation(theta: &AngleMap, phi: &Perturbation, q: &QuadratureSpec) -> Result<f64> {
    admissible(theta)?;
    let grad = mode_gradient(theta, phi.coeffs.len(), q.n)?;
    Ok(grad.iter().zip(&phi.coeffs).map(|(g, c)| g * c).sum())
}

/// Integrand of the residual at offset `x`, written as
/// `sin((B - A)/2) / (sin(A/2) sin(B/2))` with `A = θ(y) - θ(y-x)`,
/// `B = θ(y+x) - θ(y)` to avoid cancelling two large cotangents.
fn residual_integrand(theta: &AngleMap, y: f64, x: f64) -> f64 {
    let ty = theta.eval(y);
    let lo = theta.eval(y - x);
    let hi = theta.eval(y + x);
    let a = ty - lo;
    let b = hi - ty;
    let second = (hi + lo) - 2.0 * ty;
    (0.5 * second).sin() / ((0.5 * a).sin() * (0.5 * b).sin())
}

/// Dyadic panels stop at this offset; below it the second differences in
/// the integrands lose too many digits.
const INNER_OFFSET: f64 = 1e-5;

/// `2 ∫₀^π f(x) cos x dx`: uniform Gauss panels on `[π/m, π]`, dyadic
/// panels down to [`INNER_OFFSET`], and `x f(x)` at the last node for the
/// rest. Panel sums that stop halving mean `f` is unbounded at 0.
fn even_cosine_integral<F: FnMut(f64) -> f64>(q: &QuadratureSpec, what: &str, mut f: F) -> Result<f64> {
    let rule = GaussRule::new(RESIDUAL_ORDER);
    let m = (q.n / RESIDUAL_ORDER).max(4);
    let w = PI / m as f64;
    let mut g = |x: f64| f(x) * x.cos();
    let mut parts: Vec<f64> = (1..m)
        .map(|p| rule.integrate(p as f64 * w, (p + 1) as f64 * w, &mut g))
        .collect();
    let mut hi = w;
    let mut last = [f64::NAN; 2];
    while hi > INNER_OFFSET {
        let part = rule.integrate(0.5 * hi, hi, &mut g);
        parts.push(part);
        last = [last[1], part];
        hi *= 0.5;
    }
    let scale = parts.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
    let growing = last[1].abs() > 1e-9 * scale && last[1].abs() > 0.75 * last[0].abs();
    parts.push(hi * g(hi));
    let total = 2.0 * pairwise_sum(&parts);
    if growing || !total.is_finite() {
        return Err(Error::NonConvergent(format!(
            "{what}: panel contributions toward x = 0 do not decay"
        )));
    }
    Ok(total)
}

/// Critical-point residual `R(y)`; identically zero for Moebius maps.
pub fn critical_residual(theta: &AngleMap, y: f64, q: &QuadratureSpec) -> Result<f64> {
    admissible(theta)?;
    residual_unchecked(theta, y, q)
}

fn residual_unchecked(theta: &AngleMap, y: f64, q: &QuadratureSpec) -> Result<f64> {
    even_cosine_integral(q, &format!("residual at y = {y}"), |x| residual_integrand(theta, y, x))
}

/// The same integral in `u = tan(θ/2)`:
/// `U(y) = ∫ [1/(u(y+x) - u(y)) - 1/(u(y) - u(y-x))] cos x dx`,
/// with θ shifted so that `θ(y ± π) = ±π` and no pole falls inside the
/// window. Related to the residual by `R(y) = -(1 + u(y)²) U(y)`.
pub fn u_form_residual(theta: &AngleMap, y: f64, q: &QuadratureSpec) -> Result<UFormValue> {
    admissible(theta)?;
    let shift = -PI - theta.eval(y - PI);
    let u = |t: f64| (0.5 * (theta.eval(t) + shift)).tan();
    let uy = u(y);
    let mut pole = None;
    let value = even_cosine_integral(q, &format!("u-form residual at y = {y}"), |x| {
        let lo = theta.eval(y - x) + shift;
        let hi = theta.eval(y + x) + shift;
        if !(lo > -PI && hi < PI) && pole.is_none() {
            pole = Some(x);
        }
        let (ul, uh) = ((0.5 * lo).tan(), (0.5 * hi).tan());
        // 1/(uh - uy) - 1/(uy - ul) over a common denominator
        (2.0 * uy - uh - ul) / ((uh - uy) * (uy - ul))
    })?;
    if let Some(x) = pole {
        return Err(Error::NonConvergent(format!(
            "u-form window around y = {y} crosses a pole of tan(θ/2) at offset {x}"
        )));
    }
    Ok(UFormValue {
        y,
        u: uy,
        value,
        factor: -(1.0 + uy * uy),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UFormValue {
    pub y: f64,
    /// `u(y)` after re-centering.
    pub u: f64,
    pub value: f64,
    /// `R(y) = factor · value`.
    pub factor: f64,
}

impl UFormValue {
    pub fn as_residual(&self) -> f64 {
        self.factor * self.value
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualProfile {
    pub map: String,
    pub y: Vec<f64>,
    pub residual: Vec<f64>,
    pub n: usize,
    pub max_abs: f64,
}

impl ResidualProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("y,R\n");
        for (y, r) in self.y.iter().zip(&self.residual) {
            let _ = writeln!(out, "{y:e},{r:e}");
        }
        out
    }
}

/// `R` on the midpoint grid `(j + ½) 2π/points`.
pub fn residual_profile(theta: &AngleMap, points: usize, q: &QuadratureSpec) -> Result<ResidualProfile> {
    admissible(theta)?;
    let y: Vec<f64> = (0..points)
        .map(|j| TAU * (j as f64 + 0.5) / points as f64)
        .collect();
    let residual = y
        .par_iter()
        .map(|&y| residual_unchecked(theta, y, q))
        .collect::<Result<Vec<f64>>>()?;
    let max_abs = residual.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
    Ok(ResidualProfile {
        map: theta.to_string(),
        y,
        residual,
        n: q.n,
        max_abs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MoebiusFit {
    pub a: f64,
    pub rot: f64,
    /// Circular sup-distance of the lifts over 1024 samples.
    pub sup_distance: f64,
}

const FIT_SAMPLES: usize = 1024;
const FIT_GRID: usize = 64;

/// Nearest `e^{i rot} (w - a)/(1 - a w)`, real `a`, in the sup-norm of the
/// lift: a 64×64 grid over `(-0.95, 0.95) × [0, 2π)` followed by two local
/// refinements at half the previous spacing.
pub fn fit_moebius(theta: &AngleMap) -> MoebiusFit {
    let ts: Vec<f64> = (0..FIT_SAMPLES)
        .map(|i| TAU * (i as f64 + 0.5) / FIT_SAMPLES as f64)
        .collect();
    let target: Vec<f64> = ts.iter().map(|&t| theta.eval(t)).collect();
    let distance = |a: f64, rot: f64| -> f64 {
        let map = match AngleMap::moebius(Complex64::new(a, 0.0), rot) {
            Ok(m) => m,
            Err(_) => return f64::INFINITY,
        };
        ts.iter()
            .zip(&target)
            .map(|(&t, &v)| {
                let d = (map.eval(t) - v).rem_euclid(TAU);
                d.min(TAU - d)
            })
            .fold(0.0, f64::max)
    };
    let search = |a_lo: f64, a_hi: f64, r_lo: f64, r_hi: f64, open_rot: bool| {
        let cells: Vec<(f64, f64)> = (0..FIT_GRID)
            .flat_map(|i| {
                (0..FIT_GRID).map(move |j| {
                    let a = a_lo + (a_hi - a_lo) * i as f64 / (FIT_GRID - 1) as f64;
                    let steps = if open_rot { FIT_GRID } else { FIT_GRID - 1 };
                    let r = r_lo + (r_hi - r_lo) * j as f64 / steps as f64;
                    (a, r)
                })
            })
            .collect();
        cells
            .par_iter()
            .map(|&(a, r)| (distance(a, r), a, r))
            .reduce(
                || (f64::INFINITY, 0.0, 0.0),
                |x, y| if y.0 < x.0 || (y.0 == x.0 && (y.1, y.2) < (x.1, x.2)) { y } else { x },
            )
    };
    let mut best = search(-0.95, 0.95, 0.0, TAU, true);
    let (mut da, mut dr) = (1.9 / (FIT_GRID - 1) as f64, TAU / FIT_GRID as f64);
    for _ in 0..2 {
        let a_lo = (best.1 - da).max(-0.95);
        let a_hi = (best.1 + da).min(0.95);
        let cand = search(a_lo, a_hi, best.2 - dr, best.2 + dr, false);
        if cand.0 <= best.0 {
            best = cand;
        }
        da *= 0.5;
        dr *= 0.5;
    }
    // zero-parameter candidate so exact identities fit exactly
    let ident = distance(0.0, 0.0);
    if ident <= best.0 {
        best = (ident, 0.0, 0.0);
    }
    MoebiusFit {
        a: best.1,
        rot: best.2.rem_euclid(TAU),
        sup_distance: best.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DescentTrace {
    pub start: String,
    pub modes: usize,
    /// Energies of the accepted iterates, starting with the initial map.
    pub energies: Vec<f64>,
    pub energy_errs: Vec<f64>,
    pub grad_norms: Vec<f64>,
    /// Step length taken to reach each iterate after the first.
    pub step_sizes: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub fit: MoebiusFit,
    pub converged: bool,
    /// Line search could not find a monotone, energy-decreasing step.
    pub stalled: bool,
}

impl DescentTrace {
    pub fn steps(&self) -> usize {
        self.energies.len() - 1
    }

    pub fn final_map(&self, theta0: &AngleMap) -> AngleMap {
        AngleMap::perturbed_unchecked(theta0.clone(), self.coefficients.clone())
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.energies.windows(2).all(|w| w[1] < w[0])
    }

    /// `step,energy,grad_norm,step_size`; the first row has step size 0.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,energy,grad_norm,step_size\n");
        for (i, (e, g)) in self.energies.iter().zip(&self.grad_norms).enumerate() {
            let s = if i == 0 { 0.0 } else { self.step_sizes[i - 1] };
            let _ = writeln!(out, "{i},{e:.15e},{g:e},{s:e}");
        }
        out
    }
}

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Steepest descent on `θ₀ + Σ c_k sin(k t)`, `k = 1..modes`, with
/// Barzilai-Borwein trial steps and backtracking that rejects
/// non-monotone lifts and non-decreasing energies.
pub fn descend(theta0: &AngleMap, modes: usize, max_steps: usize, q: &QuadratureSpec) -> Result<DescentTrace> {
    if modes == 0 || modes > MAX_MODES {
        return Err(Error::Config(format!("descent needs 1..={MAX_MODES} modes (got {modes})")));
    }
    if !theta0.is_smooth() {
        return Err(Error::Domain(format!("descent needs a smooth starting map (got {theta0})")));
    }
    validate(theta0, GATE_SAMPLES)?;
    let at = |c: &[f64]| AngleMap::perturbed_unchecked(theta0.clone(), c.to_vec());

    let mut c = vec![0.0; modes];
    let first = conformal_energy(theta0, q)?;
    let mut energy = first.value;
    let mut grad = mode_gradient(theta0, modes, q.n)?;
    let mut trace = DescentTrace {
        start: theta0.to_string(),
        modes,
        energies: vec![energy],
        energy_errs: vec![first.err],
        grad_norms: vec![norm(&grad)],
        step_sizes: Vec::new(),
        coefficients: c.clone(),
        fit: MoebiusFit { a: 0.0, rot: 0.0, sup_distance: 0.0 },
        converged: false,
        stalled: false,
    };
    let mut step = 0.1 / norm(&grad).max(1e-12);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;

    for _ in 0..max_steps {
        let gnorm = norm(&grad);
        if gnorm < GRADIENT_TOL {
            trace.converged = true;
            break;
        }
        if let Some((dc, dg)) = prev.take() {
            let sy: f64 = dc.iter().zip(&dg).map(|(a, b)| a * b).sum();
            let ss: f64 = dc.iter().map(|a| a * a).sum();
            if sy > 0.0 {
                step = ss / sy;
            }
        }
        let mut accepted = None;
        let mut s = step;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = c.iter().zip(&grad).map(|(ci, gi)| ci - s * gi).collect();
            let map = at(&trial);
            let monotone = AngleMap::perturbed(theta0.clone(), trial.clone()).is_ok();
            if monotone {
                if let Ok(e) = subtracted_energy(&map, q.n) {
                    if e < energy && e <= energy - ARMIJO * s * gnorm * gnorm {
                        accepted = Some((trial, s));
                        break;
                    }
                }
            }
            s *= 0.5;
        }
        let Some((next, s)) = accepted else {
            trace.stalled = true;
            break;
        };
        let map = at(&next);
        let est = conformal_energy(&map, q)?;
        let next_grad = mode_gradient(&map, modes, q.n)?;
        prev = Some((
            next.iter().zip(&c).map(|(a, b)| a - b).collect(),
            next_grad.iter().zip(&grad).map(|(a, b)| a - b).collect(),
        ));
        c = next;
        grad = next_grad;
        energy = est.value;
        step = s;
        trace.energies.push(est.value);
        trace.energy_errs.push(est.err);
        trace.grad_norms.push(norm(&grad));
        trace.step_sizes.push(s);
    }
    if !trace.converged && norm(&grad) < GRADIENT_TOL {
        trace.converged = true;
    }
    trace.coefficients = c.clone();
    trace.fit = fit_moebius(&at(&c));
    Ok(trace)
}
