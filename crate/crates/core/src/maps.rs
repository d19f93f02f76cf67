//! Circle homeomorphisms represented by their lifted angle function.
//!
//! A map `g(e^{it}) = e^{iθ(t)}` is stored through θ, normalized so that
//! θ(2π) = θ(0) + 2π and extended to the real line by θ(t + 2π) = θ(t) + 2π.
//! All parameter checks happen in the constructors; evaluation never fails.

use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Bisection tolerance (angle units) for inverses without a closed form.
pub const INVERSION_TOL: f64 = 1e-12;

/// Candidate exponents for the lower Hölder bound `|Δθ| ≥ α |Δt|^p`.
pub const HOELDER_EXPONENTS: [f64; 5] = [1.0, 1.5, 2.0, 3.0, 4.0];

/// An exponent is admitted when the fitted α does not collapse under grid
/// doubling: `α(n) ≥ HOELDER_STABILITY · α(n/2)`.
pub const HOELDER_STABILITY: f64 = 0.75;

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Identity,
    /// θ(t) = t + rot + 2 arg(1 - a e^{-it}), the continuous lift of
    /// `e^{i rot} (w - a) / (1 - ā w)`.
    Moebius { a: Complex64, rot: f64 },
    Pwl { lambda: f64 },
    Square,
    Tabulated(Table),
    /// θ_base(t) + Σ c_k sin(k t), k = 1..
    Perturbed { base: Box<AngleMap>, coeffs: Vec<f64> },
    Inverse(Box<AngleMap>),
    /// outer ∘ inner
    Compose(Box<AngleMap>, Box<AngleMap>),
}

/// Lifted angle function of a circle homeomorphism.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMap(Repr);

/// Monotone piecewise-linear table of the lift on `[0, 2π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    t: Vec<f64>,
    theta: Vec<f64>,
}

impl Table {
    /// Build from samples; first row must be (0, 0) and last (2π, 2π),
    /// both columns strictly increasing.
    pub fn new(t: Vec<f64>, theta: Vec<f64>) -> Result<Self> {
        if t.len() != theta.len() || t.len() < 2 {
            return Err(Error::Validation {
                message: format!(
                    "table needs at least two rows of equal length (got {} and {})",
                    t.len(),
                    theta.len()
                ),
                indices: vec![],
            });
        }
        const EDGE: f64 = 1e-9;
        let last = t.len() - 1;
        let mut bad_edges = Vec::new();
        if t[0].abs() > EDGE || theta[0].abs() > EDGE {
            bad_edges.push(0);
        }
        if (t[last] - TAU).abs() > EDGE || (theta[last] - TAU).abs() > EDGE {
            bad_edges.push(last);
        }
        if !bad_edges.is_empty() {
            return Err(Error::Validation {
                message: "table must start at (0, 0) and end at (2π, 2π)".into(),
                indices: bad_edges,
            });
        }
        let offending: Vec<usize> = (1..t.len())
            .filter(|&i| !(t[i] > t[i - 1]) || !(theta[i] > theta[i - 1]))
            .collect();
        if !offending.is_empty() {
            return Err(Error::Validation {
                message: "table columns must be strictly increasing".into(),
                indices: offending,
            });
        }
        let mut t = t;
        let mut theta = theta;
        t[0] = 0.0;
        theta[0] = 0.0;
        t[last] = TAU;
        theta[last] = TAU;
        Ok(Self { t, theta })
    }

    /// Sample an existing map on a uniform grid of `n` intervals.
    pub fn from_map(map: &AngleMap, n: usize) -> Result<Self> {
        let base = map.eval(0.0);
        let t: Vec<f64> = (0..=n).map(|i| TAU * i as f64 / n as f64).collect();
        let theta = t.iter().map(|&s| map.eval(s) - base).collect();
        Self::new(t, theta)
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.theta.iter().copied())
    }

    fn segment(xs: &[f64], x: f64) -> usize {
        match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(xs.len() - 2),
            Err(i) => i.saturating_sub(1).min(xs.len() - 2),
        }
    }

    fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
        let i = Self::segment(xs, x);
        let w = (x - xs[i]) / (xs[i + 1] - xs[i]);
        ys[i] + w * (ys[i + 1] - ys[i])
    }

    fn slope(xs: &[f64], ys: &[f64], x: f64) -> f64 {
        let i = Self::segment(xs, x);
        (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
    }

    fn swapped(&self) -> Self {
        Self {
            t: self.theta.clone(),
            theta: self.t.clone(),
        }
    }
}

/// Split `t` into `2πk + r` with `r ∈ [0, 2π)`.
fn reduce(t: f64) -> (f64, f64) {
    let k = (t / TAU).floor();
    let mut r = t - TAU * k;
    let mut k = k;
    if r >= TAU {
        r -= TAU;
        k += 1.0;
    } else if r < 0.0 {
        r += TAU;
        k -= 1.0;
    }
    (k, r)
}

fn pwl_slope(lambda: f64) -> f64 {
    (TAU - 1.0) / (TAU - lambda)
}

impl AngleMap {
    pub fn identity() -> Self {
        AngleMap(Repr::Identity)
    }

    /// Boundary values of `w ↦ e^{i rot} (w - a) / (1 - ā w)`.
    pub fn moebius(a: Complex64, rot: f64) -> Result<Self> {
        if !(a.norm() < 1.0) || !rot.is_finite() {
            return Err(Error::Domain(format!(
                "Moebius parameter needs |a| < 1 and finite rotation (got a = {a}, rot = {rot})"
            )));
        }
        Ok(AngleMap(Repr::Moebius { a, rot }))
    }

    /// Rigid rotation by `angle`.
    pub fn rotation(angle: f64) -> Result<Self> {
        Self::moebius(Complex64::new(0.0, 0.0), angle)
    }

    /// Piecewise-linear map: slope `1/λ` on `[0, λ]`, then the affine branch
    /// joining `(λ, 1)` to `(2π, 2π)`.
    pub fn pwl(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Domain(format!("pwl needs λ in (0, 1] (got {lambda})")));
        }
        Ok(AngleMap(Repr::Pwl { lambda }))
    }

    /// θ(t) = t² on `[0, 1]`, θ(t) = t on `[1, 2π]`.
    pub fn square() -> Self {
        AngleMap(Repr::Square)
    }

    pub fn tabulated(table: Table) -> Self {
        AngleMap(Repr::Tabulated(table))
    }

    /// `base + Σ c_k sin(k t)`, rejected unless strictly increasing on a
    /// dense grid.
    pub fn perturbed(base: AngleMap, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("perturbation coefficients must be finite".into()));
        }
        let map = Self::perturbed_unchecked(base, coeffs);
        let n = 4096;
        let bad: Vec<usize> = (0..n)
            .filter(|&i| {
                let t = TAU * (i as f64 + 0.5) / n as f64;
                !(map.derivative(t) > 0.0)
            })
            .collect();
        if !bad.is_empty() {
            return Err(Error::Validation {
                message: "perturbed lift is not strictly increasing".into(),
                indices: bad,
            });
        }
        Ok(map)
    }

    pub(crate) fn perturbed_unchecked(base: AngleMap, coeffs: Vec<f64>) -> Self {
        match base.0 {
            Repr::Perturbed {
                base: inner,
                coeffs: old,
            } => {
                let len = old.len().max(coeffs.len());
                let merged = (0..len)
                    .map(|k| old.get(k).copied().unwrap_or(0.0) + coeffs.get(k).copied().unwrap_or(0.0))
                    .collect();
                AngleMap(Repr::Perturbed {
                    base: inner,
                    coeffs: merged,
                })
            }
            other => AngleMap(Repr::Perturbed {
                base: Box::new(AngleMap(other)),
                coeffs,
            }),
        }
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: AngleMap, inner: AngleMap) -> Self {
        match (&outer.0, &inner.0) {
            (Repr::Identity, _) => inner,
            (_, Repr::Identity) => outer,
            _ => AngleMap(Repr::Compose(Box::new(outer), Box::new(inner))),
        }
    }

    /// Two-sided inverse, in closed form where the family allows it.
    pub fn invert(&self) -> AngleMap {
        match &self.0 {
            Repr::Identity => AngleMap::identity(),
            Repr::Moebius { a, rot } => {
                // inverse of e^{iρ}(w-a)/(1-āw) is e^{-iρ}(z-a')/(1-ā'z), a' = -a e^{iρ}
                let a_inv = -a * Complex64::from_polar(1.0, *rot);
                let candidate = AngleMap(Repr::Moebius {
                    a: a_inv,
                    rot: -rot,
                });
                // pick the lift branch with θ⁻¹(θ(0)) = 0
                let miss = candidate.eval(self.eval(0.0));
                let shift = -TAU * (miss / TAU).round();
                AngleMap(Repr::Moebius {
                    a: a_inv,
                    rot: -rot + shift,
                })
            }
            Repr::Tabulated(table) => AngleMap(Repr::Tabulated(table.swapped())),
            Repr::Inverse(inner) => (**inner).clone(),
            Repr::Compose(outer, inner) => AngleMap::compose(inner.invert(), outer.invert()),
            Repr::Pwl { .. } | Repr::Square | Repr::Perturbed { .. } => {
                AngleMap(Repr::Inverse(Box::new(self.clone())))
            }
        }
    }

    /// θ(t) on the whole real line.
    pub fn eval(&self, t: f64) -> f64 {
        match &self.0 {
            Repr::Identity => t,
            Repr::Moebius { a, rot } => {
                let z = Complex64::new(1.0, 0.0) - a * Complex64::from_polar(1.0, -t);
                t + rot + 2.0 * z.arg()
            }
            Repr::Pwl { lambda } => {
                let (k, r) = reduce(t);
                let v = if r <= *lambda {
                    r / lambda
                } else {
                    1.0 + pwl_slope(*lambda) * (r - lambda)
                };
                TAU * k + v
            }
            Repr::Square => {
                let (k, r) = reduce(t);
                TAU * k + if r <= 1.0 { r * r } else { r }
            }
            Repr::Tabulated(table) => {
                let (k, r) = reduce(t);
                TAU * k + Table::interp(&table.t, &table.theta, r)
            }
            Repr::Perturbed { base, coeffs } => base.eval(t) + sine_series(coeffs, t),
            Repr::Inverse(inner) => inner.eval_inverse(t),
            Repr::Compose(outer, inner) => outer.eval(inner.eval(t)),
        }
    }

    /// θ'(t). Piecewise families return the one-sided slope of the
    /// branch containing `t` (left-closed branches).
    pub fn derivative(&self, t: f64) -> f64 {
        match &self.0 {
            Repr::Identity => 1.0,
            Repr::Moebius { a, .. } => {
                let d = Complex64::from_polar(1.0, t) - a;
                (1.0 - a.norm_sqr()) / d.norm_sqr()
            }
            Repr::Pwl { lambda } => {
                let (_, r) = reduce(t);
                if r < *lambda {
                    1.0 / lambda
                } else {
                    pwl_slope(*lambda)
                }
            }
            Repr::Square => {
                let (_, r) = reduce(t);
                if r < 1.0 {
                    2.0 * r
                } else {
                    1.0
                }
            }
            Repr::Tabulated(table) => {
                let (_, r) = reduce(t);
                Table::slope(&table.t, &table.theta, r)
            }
            Repr::Perturbed { base, coeffs } => {
                base.derivative(t)
                    + coeffs
                        .iter()
                        .enumerate()
                        .map(|(k, c)| (k + 1) as f64 * c * ((k + 1) as f64 * t).cos())
                        .sum::<f64>()
            }
            Repr::Inverse(inner) => 1.0 / inner.derivative(inner.eval_inverse(t)),
            Repr::Compose(outer, inner) => outer.derivative(inner.eval(t)) * inner.derivative(t),
        }
    }

    /// θ⁻¹(y), analytic for the piecewise families, bisection otherwise.
    fn eval_inverse(&self, y: f64) -> f64 {
        match &self.0 {
            Repr::Pwl { lambda } => {
                let (k, r) = reduce(y);
                let v = if r <= 1.0 {
                    lambda * r
                } else {
                    lambda + (r - 1.0) / pwl_slope(*lambda)
                };
                TAU * k + v
            }
            Repr::Square => {
                let (k, r) = reduce(y);
                TAU * k + if r <= 1.0 { r.sqrt() } else { r }
            }
            Repr::Inverse(inner) => inner.eval(y),
            _ => self.bisect_inverse(y),
        }
    }

    fn bisect_inverse(&self, y: f64) -> f64 {
        let base = self.eval(0.0);
        let k = ((y - base) / TAU).floor();
        let target = y - TAU * k;
        let (mut lo, mut hi) = (0.0, TAU);
        while hi - lo > INVERSION_TOL {
            let mid = 0.5 * (lo + hi);
            if self.eval(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
            if mid == lo && mid == hi {
                break;
            }
        }
        TAU * k + 0.5 * (lo + hi)
    }

    /// Values of θ at the midpoint nodes `(i + ½) 2π/n`.
    pub fn sample_midpoints(&self, n: usize) -> Vec<f64> {
        (0..n)
            .into_par_iter()
            .map(|i| self.eval(TAU * (i as f64 + 0.5) / n as f64))
            .collect()
    }

    pub fn is_moebius(&self) -> bool {
        matches!(self.0, Repr::Identity | Repr::Moebius { .. })
    }

    /// `(a, rot)` for Moebius maps (identity reports `a = 0, rot = 0`).
    pub fn moebius_params(&self) -> Option<(Complex64, f64)> {
        match &self.0 {
            Repr::Identity => Some((Complex64::new(0.0, 0.0), 0.0)),
            Repr::Moebius { a, rot } => Some((*a, *rot)),
            _ => None,
        }
    }

    /// Sine coefficients and base of a perturbed map.
    pub fn perturbation(&self) -> Option<(&AngleMap, &[f64])> {
        match &self.0 {
            Repr::Perturbed { base, coeffs } => Some((base, coeffs)),
            _ => None,
        }
    }

    /// Whether every part of the map is smooth (analytic families and
    /// sine perturbations of them).
    pub fn is_smooth(&self) -> bool {
        match &self.0 {
            Repr::Identity | Repr::Moebius { .. } => true,
            Repr::Perturbed { base, .. } => base.is_smooth(),
            Repr::Inverse(inner) => inner.is_smooth(),
            Repr::Compose(a, b) => a.is_smooth() && b.is_smooth(),
            _ => false,
        }
    }
}

pub(crate) fn sine_series(coeffs: &[f64], t: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c * ((k + 1) as f64 * t).sin())
        .sum()
}

/// Mini-language rendering; `parse_map(format!("{m}"))` rebuilds `m`.
impl fmt::Display for AngleMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Identity => write!(f, "identity"),
            Repr::Moebius { a, rot } => {
                write!(f, "mobius:a={:?}{:+?}i,rot={:?}", a.re, a.im, rot)
            }
            Repr::Pwl { lambda } => write!(f, "pwl:lambda={lambda:?}"),
            Repr::Square => write!(f, "square"),
            Repr::Tabulated(table) => write!(f, "table:<{} rows>", table.t.len()),
            Repr::Perturbed { base, coeffs } => {
                write!(f, "pert({base};")?;
                for (i, c) in coeffs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c:?}")?;
                }
                write!(f, ")")
            }
            Repr::Inverse(inner) => write!(f, "inv({inner})"),
            Repr::Compose(a, b) => write!(f, "comp({a},{b})"),
        }
    }
}

/// Sampled health report of a lift.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapDiagnostics {
    pub n_samples: usize,
    pub min_slope_estimate: f64,
    /// `(p, α)` with `|θ(x) - θ(y)| ≥ α |x - y|^p` on every sampled pair
    /// (circular distances).
    pub hoelder_lower: (f64, f64),
    /// False when no candidate exponent gave a refinement-stable α; the
    /// pair then reports the largest candidate.
    pub hoelder_stable: bool,
    pub monotone_ok: bool,
    pub endpoint_ok: bool,
    pub theta_at_zero: f64,
}

fn circ(d: f64) -> f64 {
    d.min(TAU - d)
}

/// Minimum over sampled pairs of `ln d_θ - p ln d_t` for every candidate p.
fn hoelder_log_alpha(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let h = TAU / n as f64;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut best = [f64::INFINITY; HOELDER_EXPONENTS.len()];
            for j in i + 1..n {
                let dt = circ((j - i) as f64 * h).ln();
                let dth = circ(values[j] - values[i]).ln();
                for (b, p) in best.iter_mut().zip(HOELDER_EXPONENTS) {
                    *b = b.min(dth - p * dt);
                }
            }
            best
        })
        .reduce(
            || [f64::INFINITY; HOELDER_EXPONENTS.len()],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x = x.min(y);
                }
                a
            },
        )
        .to_vec()
}

/// Check monotonicity and normalization on `n_samples` uniform points and
/// fit the lower Hölder bound.
pub fn validate(map: &AngleMap, n_samples: usize) -> Result<MapDiagnostics> {
    if n_samples < 16 {
        return Err(Error::Domain(format!(
            "validate needs at least 16 samples (got {n_samples})"
        )));
    }
    let n = n_samples;
    let h = TAU / n as f64;
    let values: Vec<f64> = (0..=n).map(|i| map.eval(i as f64 * h)).collect();
    let offending: Vec<usize> = (1..=n).filter(|&i| !(values[i] > values[i - 1])).collect();
    if !offending.is_empty() {
        return Err(Error::Validation {
            message: "lift is not strictly increasing".into(),
            indices: offending,
        });
    }
    let min_slope_estimate = values
        .windows(2)
        .map(|w| (w[1] - w[0]) / h)
        .fold(f64::INFINITY, f64::min);
    let theta_at_zero = values[0];
    let endpoint_ok = (values[n] - values[0] - TAU).abs() <= 1e-9;

    // min over pairs is monotone under refinement of a nested grid, so the
    // coarse level reuses every other sample
    let fine = hoelder_log_alpha(&values[..n]);
    let coarse_values: Vec<f64> = values[..n].iter().step_by(2).copied().collect();
    let coarse = hoelder_log_alpha(&coarse_values);
    let admitted = HOELDER_EXPONENTS
        .iter()
        .zip(fine.iter().zip(&coarse))
        .find(|(_, (f, c))| f.exp() > 0.0 && **f >= **c + HOELDER_STABILITY.ln());
    let (hoelder_lower, hoelder_stable) = match admitted {
        Some((p, (f, _))) => ((*p, f.exp()), true),
        None => {
            let last = HOELDER_EXPONENTS.len() - 1;
            ((HOELDER_EXPONENTS[last], fine[last].exp()), false)
        }
    };
    Ok(MapDiagnostics {
        n_samples,
        min_slope_estimate,
        hoelder_lower,
        hoelder_stable,
        monotone_ok: true,
        endpoint_ok,
        theta_at_zero,
    })
}

/// Sampled chordal bilipschitz constant: the largest of
/// `|g(ζ) - g(η)| / |ζ - η|` and its reciprocal over all pairs of `n`
/// midpoint nodes, together with the diagonal limits θ' and 1/θ'.
pub fn bilipschitz_constant(map: &AngleMap, n: usize) -> f64 {
    let h = TAU / n as f64;
    let values = map.sample_midpoints(n);
    let diag = (0..n)
        .map(|i| {
            let d = map.derivative((i as f64 + 0.5) * h);
            d.max(1.0 / d)
        })
        .fold(1.0, f64::max);
    let pairs = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut worst = 1.0f64;
            for j in i + 1..n {
                let r = ((values[j] - values[i]) / 2.0).sin().abs()
                    / (((j - i) as f64 * h) / 2.0).sin().abs();
                worst = worst.max(r).max(1.0 / r);
            }
            worst
        })
        .reduce(|| 1.0, f64::max);
    diag.max(pairs)
}

/// Discrete check of `∬ |x - y| / |θ(x) - θ(y)| < ∞` over `[0, 2π]²`:
/// midpoint sums at `n`, `n/2`, `n/4`. Returns the finest value and whether
/// successive increments contract (ratio below 0.8).
pub fn difference_quotient_integral(map: &AngleMap, n: usize) -> (f64, bool) {
    let level = |m: usize| -> f64 {
        let h = TAU / m as f64;
        let values = map.sample_midpoints(m);
        let rows: Vec<f64> = (0..m)
            .into_par_iter()
            .map(|i| {
                let mut s = 0.5 / map.derivative((i as f64 + 0.5) * h);
                for j in i + 1..m {
                    s += ((j - i) as f64 * h) / (values[j] - values[i]);
                }
                2.0 * s
            })
            .collect();
        crate::quadrature::pairwise_sum(&rows) * h * h
    };
    let i1 = level(n);
    let i2 = level(n / 2);
    let i4 = level(n / 4);
    let d1 = (i1 - i2).abs();
    let d2 = (i2 - i4).abs();
    let contracting = d1 <= 0.8 * d2 || d1 <= 1e-9 * i1.abs();
    (i1, contracting)
}

#[allow(dead_code)]
pub(crate) fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn eval_examples() {
        assert_eq!(AngleMap::identity().eval(1.7), 1.7);
        let m0 = AngleMap::moebius(c(0.0, 0.0), 0.0).unwrap();
        assert!((m0.eval(2.0) - 2.0).abs() < 1e-15);
        let m = AngleMap::moebius(c(0.5, 0.0), 0.0).unwrap();
        assert!((m.eval(PI) - PI).abs() < 1e-15);
        assert!((AngleMap::pwl(0.5).unwrap().eval(0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn moebius_endpoints_and_unwrapped_lift() {
        let m = AngleMap::moebius(c(0.5, 0.0), 0.0).unwrap();
        assert!(m.eval(0.0).abs() < 1e-15);
        assert!((m.eval(TAU) - TAU).abs() < 1e-14);
        // dense sampling of arg φ(e^{it}) with explicit unwrapping
        let n = 1024;
        let mut prev_raw = 0.0;
        let mut lifted = 0.0;
        for i in 0..=n {
            let t = TAU * i as f64 / n as f64;
            let w = Complex64::from_polar(1.0, t);
            let raw = ((w - 0.5) / (1.0 - 0.5 * w)).arg();
            if i > 0 {
                lifted += wrap_angle(raw - prev_raw);
            }
            prev_raw = raw;
            assert!((m.eval(t) - lifted).abs() < 1e-12, "t = {t}");
        }
        let samples: Vec<f64> = (0..1024).map(|i| m.eval(TAU * i as f64 / 1024.0)).collect();
        assert!(samples.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn moebius_matches_arctan_formula_on_upper_half() {
        for &a in &[0.3, 0.5, -0.4] {
            let m = AngleMap::moebius(c(a, 0.0), 0.0).unwrap();
            for i in 1..50 {
                let t = PI * i as f64 / 50.0;
                let num = (1.0 - a * a) * t.sin();
                let den = (1.0 + a * a) * t.cos() - 2.0 * a;
                let mut expected = (num / den).atan();
                if den < 0.0 {
                    expected += PI;
                }
                assert!((m.eval(t) - expected).abs() < 1e-12, "a = {a}, t = {t}");
            }
        }
    }

    #[test]
    fn constructor_domain_errors() {
        assert!(matches!(AngleMap::moebius(c(1.0, 0.0), 0.0), Err(Error::Domain(_))));
        assert!(matches!(AngleMap::moebius(c(0.8, 0.8), 0.0), Err(Error::Domain(_))));
        assert!(matches!(AngleMap::pwl(0.0), Err(Error::Domain(_))));
        assert!(matches!(AngleMap::pwl(1.5), Err(Error::Domain(_))));
        let err = Table::new(vec![0.0, 1.0, 0.9, TAU], vec![0.0, 1.0, 2.0, TAU]).unwrap_err();
        assert_eq!(
            err,
            Error::Validation {
                message: "table columns must be strictly increasing".into(),
                indices: vec![2]
            }
        );
    }

    #[test]
    fn pwl_branches() {
        let one = AngleMap::pwl(1.0).unwrap();
        assert!((one.eval(1.0) - 1.0).abs() < 1e-15);
        assert!((one.eval(TAU) - TAU).abs() < 1e-14);
        assert!((one.eval(3.3) - 3.3).abs() < 1e-14);
        let p = AngleMap::pwl(0.1).unwrap();
        assert!((p.eval(0.1) - 1.0).abs() < 1e-15);
        let tiny = AngleMap::pwl(0.01).unwrap();
        let l = bilipschitz_constant(&tiny, 2048);
        assert!((l - 100.0).abs() < 1e-9, "L = {l}");
    }

    #[test]
    fn square_branches() {
        let s = AngleMap::square();
        assert_eq!(s.eval(0.5), 0.25);
        assert_eq!(s.eval(1.0), 1.0);
        assert_eq!(s.eval(3.0), 3.0);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(AngleMap::identity().invert(), AngleMap::identity());
        let sq = AngleMap::square().invert();
        for &t in &[0.0, 0.04, 0.25, 0.81, 1.0] {
            assert!((sq.eval(t) - f64::sqrt(t)).abs() < 1e-15);
        }
        let m = AngleMap::moebius(c(0.5, 0.0), 0.0).unwrap();
        let mi = m.invert();
        let err = (0..4096)
            .map(|i| {
                let t = TAU * i as f64 / 4096.0;
                (mi.eval(m.eval(t)) - t).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "sup error {err}");
    }

    #[test]
    fn complex_rotated_moebius_inverse_keeps_lift() {
        let m = AngleMap::moebius(c(0.3, -0.6), 2.9).unwrap();
        let mi = m.invert();
        for i in 0..200 {
            let t = -7.0 + 0.07 * i as f64;
            assert!((mi.eval(m.eval(t)) - t).abs() < 1e-10);
            assert!((m.eval(mi.eval(t)) - t).abs() < 1e-10);
        }
    }

    #[test]
    fn bisection_inverse_of_perturbed_map() {
        let p = AngleMap::perturbed(AngleMap::identity(), vec![0.0, 0.2]).unwrap();
        let pi = p.invert();
        for i in 0..100 {
            let t = -3.0 + 0.11 * i as f64;
            assert!((pi.eval(p.eval(t)) - t).abs() < 1e-11);
        }
        assert!((pi.derivative(0.7) * p.derivative(pi.eval(0.7)) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn table_interpolation_and_inverse() {
        let table = Table::from_map(&AngleMap::square(), 512).unwrap();
        let m = AngleMap::tabulated(table);
        assert!((m.eval(0.5) - 0.25).abs() < 1e-4);
        let mi = m.invert();
        for i in 0..100 {
            let t = 0.0628 * i as f64;
            assert!((mi.eval(m.eval(t)) - t).abs() < 1e-12);
        }
    }

    #[test]
    fn validate_identity() {
        let d = validate(&AngleMap::identity(), 256).unwrap();
        assert_eq!(d.hoelder_lower.0, 1.0);
        assert!((d.hoelder_lower.1 - 1.0).abs() < 1e-12);
        assert!((d.min_slope_estimate - 1.0).abs() < 1e-12);
        assert!(d.monotone_ok && d.endpoint_ok && d.hoelder_stable);
    }

    #[test]
    fn validate_square_needs_exponent_two() {
        let d = validate(&AngleMap::square(), 4096).unwrap();
        assert_eq!(d.hoelder_lower.0, 2.0);
        assert!(d.hoelder_lower.1 > 0.0);
        // oracle: pairwise scan with p = 1 collapses like the grid spacing
        let h = TAU / 4096.0;
        let v: Vec<f64> = (0..4096).map(|i| AngleMap::square().eval(i as f64 * h)).collect();
        let alpha1 = (1..4096)
            .map(|j| (v[j] - v[0]) / (j as f64 * h))
            .fold(f64::INFINITY, f64::min);
        assert!(alpha1 <= 2.0 * h);
    }

    #[test]
    fn validate_pwl_min_slope() {
        let d = validate(&AngleMap::pwl(0.1).unwrap(), 1024).unwrap();
        let expected = (TAU - 1.0) / (TAU - 0.1);
        assert!((d.min_slope_estimate - expected).abs() < 1e-12);
        assert_eq!(d.hoelder_lower.0, 1.0);
    }

    #[test]
    fn validate_rejects_non_monotone() {
        let bad = AngleMap::perturbed_unchecked(AngleMap::identity(), vec![0.0, 0.0, 0.5]);
        match validate(&bad, 64) {
            Err(Error::Validation { indices, .. }) => assert!(!indices.is_empty()),
            other => panic!("expected validation failure, got {other:?}"),
        }
        assert!(AngleMap::perturbed(AngleMap::identity(), vec![0.0, 0.0, 0.5]).is_err());
    }

    #[test]
    fn difference_quotient_integral_detects_divergence() {
        let (_, ok) = difference_quotient_integral(&AngleMap::square(), 1024);
        assert!(ok);
        // square ∘ square is t⁴ near 0: the integrand behaves like 1/(x³ + ...)
        let cube = AngleMap::compose(AngleMap::square(), AngleMap::square());
        let (_, ok) = difference_quotient_integral(&cube, 1024);
        assert!(!ok);
    }

    #[test]
    fn display_round_trips_through_text() {
        let m = AngleMap::compose(
            AngleMap::moebius(c(0.3, -0.1), 1.0).unwrap(),
            AngleMap::pwl(0.25).unwrap().invert(),
        );
        assert_eq!(
            m.to_string(),
            "comp(mobius:a=0.3-0.1i,rot=1.0,inv(pwl:lambda=0.25))"
        );
    }
}
