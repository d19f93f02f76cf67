//! Cross ratios, empirical cross-ratio distortion, and the quasi-Moebius
//! energy bound
//!
//! ```text
//! E(g) ≤ (1/π) ∫₀^{π/2} log η(cot²(t/2)) cos t dt.
//! ```

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{conformal_energy, EnergyEstimate, QuadratureSpec};
use crate::error::{Error, Result};
use crate::maps::AngleMap;
use crate::quadrature::{dyadic_toward_zero, GaussRule};

/// Points closer than this are treated as coincident by [`cross_ratio`].
pub const COINCIDENCE: f64 = 1e-14;

/// Minimum pairwise chordal distance of scanned quadruples.
pub const SCAN_SEPARATION: f64 = 1e-3;

/// Envelope grid: `ENVELOPE_BINS` log-spaced points over
/// `[ENVELOPE_MIN, ENVELOPE_MAX]`.
pub const ENVELOPE_BINS: usize = 64;
pub const ENVELOPE_MIN: f64 = 1e-4;
pub const ENVELOPE_MAX: f64 = 1e4;

/// Dyadic panels toward `t = 0` stop once one contributes less than this.
pub const BOUND_PANEL_TOL: f64 = 1e-12;

/// Chordal cross ratio `|a-b||c-d| / (|a-c||b-d|)`.
pub fn cross_ratio(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<f64> {
    let pts = [a, b, c, d];
    for i in 0..4 {
        for j in i + 1..4 {
            if (pts[i] - pts[j]).norm() <= COINCIDENCE {
                return Err(Error::DegenerateQuadruple(i, j));
            }
        }
    }
    Ok((a - b).norm() * (c - d).norm() / ((a - c).norm() * (b - d).norm()))
}

/// [`cross_ratio`] of the circle points `e^{ia}, …, e^{id}`.
pub fn cross_ratio_angles(a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
    let e = |x: f64| Complex64::from_polar(1.0, x);
    cross_ratio(e(a), e(b), e(c), e(d))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistortionGauge {
    Identity,
    Linear { alpha: f64 },
    /// Log-log interpolation between the pairs; linear to 0 below the first
    /// pair and a power law with exponent `tail_exponent` above the last.
    Tabulated {
        t: Vec<f64>,
        eta: Vec<f64>,
        tail_exponent: f64,
    },
}

impl DistortionGauge {
    pub fn linear(alpha: f64) -> Result<Self> {
        if !(alpha >= 1.0) || !alpha.is_finite() {
            return Err(Error::Domain(format!("linear gauge needs finite α ≥ 1 (got {alpha})")));
        }
        Ok(DistortionGauge::Linear { alpha })
    }

    /// Gauge through `(t, η(t))` pairs with `t` strictly increasing, η
    /// non-decreasing and positive.
    pub fn tabulated(pairs: &[(f64, f64)]) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::Domain("tabulated gauge needs at least two pairs".into()));
        }
        let offending: Vec<usize> = pairs
            .iter()
            .enumerate()
            .filter(|(i, (t, e))| {
                !(*t > 0.0 && *e > 0.0 && t.is_finite() && e.is_finite())
                    || (*i > 0 && !(*t > pairs[i - 1].0 && *e >= pairs[i - 1].1))
            })
            .map(|(i, _)| i)
            .collect();
        if !offending.is_empty() {
            return Err(Error::Validation {
                message: "gauge pairs must be positive with t increasing and η non-decreasing".into(),
                indices: offending,
            });
        }
        let k = pairs.len();
        let (t0, e0) = pairs[k - 2];
        let (t1, e1) = pairs[k - 1];
        let tail_exponent = (e1 / e0).ln() / (t1 / t0).ln();
        Ok(DistortionGauge::Tabulated {
            t: pairs.iter().map(|p| p.0).collect(),
            eta: pairs.iter().map(|p| p.1).collect(),
            tail_exponent,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x.is_infinite() {
            return f64::INFINITY;
        }
        match self {
            DistortionGauge::Identity => x,
            DistortionGauge::Linear { alpha } => alpha * x,
            DistortionGauge::Tabulated {
                t,
                eta,
                tail_exponent,
            } => {
                let last = t.len() - 1;
                if x <= t[0] {
                    eta[0] * x / t[0]
                } else if x >= t[last] {
                    eta[last] * (x / t[last]).powf(*tail_exponent)
                } else {
                    let i = t.partition_point(|v| *v <= x) - 1;
                    let w = (x / t[i]).ln() / (t[i + 1] / t[i]).ln();
                    (eta[i].ln() + w * (eta[i + 1] / eta[i]).ln()).exp()
                }
            }
        }
    }

    /// `min η(t) η(1/t)` over the given points.
    pub fn reciprocity_floor(&self, ts: &[f64]) -> f64 {
        ts.iter()
            .map(|&t| self.eval(t) * self.eval(1.0 / t))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `(1/π) ∫₀^{π/2} log η(cot²(t/2)) cos t dt` with `n`-point Gauss panels
/// refined dyadically toward `t = 0`.
pub fn qm_energy_bound(eta: &DistortionGauge, n: usize) -> Result<f64> {
    let rule = GaussRule::new(n);
    let mut bad = None;
    let integrand = |t: f64| {
        let c = 1.0 / (0.5 * t).tan();
        let v = eta.eval(c * c).ln() * t.cos();
        if !v.is_finite() && bad.is_none() {
            bad = Some(t);
        }
        v
    };
    let result = dyadic_toward_zero(&rule, FRAC_PI_2, BOUND_PANEL_TOL, 400, integrand);
    if let Some(t) = bad {
        return Err(Error::NonIntegrable(format!(
            "log η(cot²(t/2)) is not finite at t = {t:e}"
        )));
    }
    match result {
        Some((v, _)) => Ok(v / PI),
        None => Err(Error::NonIntegrable(
            "bound integrand panels did not decay toward t = 0".into(),
        )),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossRatioSample {
    /// Circle points of the source quadruple, as angles.
    pub quadruple: [f64; 4],
    pub cr_in: f64,
    pub cr_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvelopeBin {
    pub t: f64,
    /// `max{cr_out : cr_in ≤ t}`; `None` while no sample lies at or below `t`.
    pub eta_hat: Option<f64>,
    /// Largest sampled `cr_in ≤ t`; `η(t_support) ≥ eta_hat` for any gauge
    /// the map satisfies.
    pub t_support: Option<f64>,
    /// Samples with `cr_in` in `(previous t, t]`.
    pub support_count: usize,
    /// Empty bin whose value was carried from below.
    pub interpolated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport {
    pub map: String,
    pub seed: u64,
    pub n_random: usize,
    pub n_structured: usize,
    pub n_degenerate: usize,
    pub bins: Vec<EnvelopeBin>,
    /// Smallest α with `cr_in/α ≤ cr_out ≤ α cr_in` on every sample.
    pub alpha_hat: f64,
    #[serde(skip)]
    pub samples: Vec<CrossRatioSample>,
}

impl EnvelopeReport {
    /// Empirical gauge at an arbitrary point.
    pub fn eta_hat_at(&self, t: f64) -> Option<f64> {
        self.samples
            .iter()
            .filter(|s| s.cr_in <= t)
            .map(|s| s.cr_out)
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }

    /// Tabulated gauge through `(t_support, eta_hat)` of the supported bins.
    pub fn gauge(&self) -> Result<DistortionGauge> {
        let mut pairs: Vec<(f64, f64)> = Vec::new();
        for b in &self.bins {
            if let (Some(t), Some(e)) = (b.t_support, b.eta_hat) {
                match pairs.last_mut() {
                    Some(last) if last.0 == t => last.1 = last.1.max(e),
                    _ => pairs.push((t, e)),
                }
            }
        }
        DistortionGauge::tabulated(&pairs)
    }

    /// `t,eta_hat,support_count` rows; gaps leave `eta_hat` empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,eta_hat,support_count\n");
        for b in &self.bins {
            let eta = b.eta_hat.map(|e| format!("{e:e}")).unwrap_or_default();
            let _ = writeln!(out, "{:e},{},{}", b.t, eta, b.support_count);
        }
        out
    }
}

fn chord(a: f64, b: f64) -> f64 {
    2.0 * (0.5 * (a - b)).sin().abs()
}

fn separated(q: &[f64; 4]) -> bool {
    (0..4).all(|i| (i + 1..4).all(|j| chord(q[i], q[j]) >= SCAN_SEPARATION))
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Deterministic adversarial quadruples: the family
/// `(1, e^{iλ}, -1, e^{3iπ/2})` and two multi-scale clusters around sixteen
/// base angles, `(x-ε, x, x+s, x+s+ε)` and `(x, x-ε, x+s, x+π)`.
fn structured_quadruples() -> Vec<[f64; 4]> {
    let mut out = Vec::new();
    for lambda in log_space(1.2e-3, 0.5, 15) {
        out.push([0.0, lambda, PI, 1.5 * PI]);
    }
    let scales = log_space(1.2e-3, 1.0, 16);
    for k in 0..16 {
        let x = TAU * k as f64 / 16.0;
        for &s in &scales {
            for &e in &scales {
                out.push([x - e, x, x + s, x + s + e]);
                out.push([x, x - e, x + s, x + PI]);
            }
        }
    }
    out.retain(separated);
    out
}

/// All six ordered ratios of the three pairings of a quadruple.
fn pairing_products(p: &[Complex64; 4]) -> [f64; 3] {
    let d = |i: usize, j: usize| (p[i] - p[j]).norm();
    [d(0, 1) * d(2, 3), d(0, 2) * d(1, 3), d(0, 3) * d(1, 2)]
}

const ORDERS: [(usize, usize); 6] = [(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)];

/// Sample quadruples (seeded, plus the structured families), record
/// source and image cross ratios, and build the upper envelope
/// `η̂(t) = max{cr_out : cr_in ≤ t}` on the log grid.
pub fn cr_distortion_scan(map: &AngleMap, n_quadruples: usize, seed: u64) -> Result<EnvelopeReport> {
    if n_quadruples < 1000 {
        return Err(Error::Config(format!(
            "cross-ratio scan needs at least 1000 quadruples (got {n_quadruples})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut quads: Vec<[f64; 4]> = Vec::with_capacity(n_quadruples);
    while quads.len() < n_quadruples {
        let q = [
            rng.gen_range(0.0..TAU),
            rng.gen_range(0.0..TAU),
            rng.gen_range(0.0..TAU),
            rng.gen_range(0.0..TAU),
        ];
        if separated(&q) {
            quads.push(q);
        }
    }
    let structured = structured_quadruples();
    let n_structured = structured.len();
    quads.extend(structured);

    let per_quad: Vec<Option<Vec<CrossRatioSample>>> = quads
        .par_iter()
        .map(|q| {
            let src = q.map(|x| Complex64::from_polar(1.0, x));
            let img = q.map(|x| Complex64::from_polar(1.0, map.eval(x)));
            let (pi, po) = (pairing_products(&src), pairing_products(&img));
            if po.iter().any(|v| *v <= COINCIDENCE * COINCIDENCE) {
                return None;
            }
            Some(
                ORDERS
                    .iter()
                    .map(|&(i, j)| {
                        let (a, b, c, d) = match (i, j) {
                            (0, 1) => (0, 1, 2, 3),
                            (1, 0) => (0, 2, 1, 3),
                            (0, 2) => (0, 1, 3, 2),
                            (2, 0) => (0, 3, 1, 2),
                            (1, 2) => (0, 2, 3, 1),
                            _ => (0, 3, 2, 1),
                        };
                        CrossRatioSample {
                            quadruple: [q[a], q[b], q[c], q[d]],
                            cr_in: pi[i] / pi[j],
                            cr_out: po[i] / po[j],
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    let n_degenerate = per_quad.iter().filter(|s| s.is_none()).count();
    let samples: Vec<CrossRatioSample> = per_quad.into_iter().flatten().flatten().collect();

    let grid = log_space(ENVELOPE_MIN, ENVELOPE_MAX, ENVELOPE_BINS);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by(|&a, &b| samples[a].cr_in.total_cmp(&samples[b].cr_in));
    let mut bins = Vec::with_capacity(ENVELOPE_BINS);
    let mut cursor = 0;
    let mut running: Option<f64> = None;
    let mut support: Option<f64> = None;
    for &t in &grid {
        let start = cursor;
        while cursor < order.len() && samples[order[cursor]].cr_in <= t {
            let v = samples[order[cursor]].cr_out;
            running = Some(running.map_or(v, |r| r.max(v)));
            support = Some(samples[order[cursor]].cr_in);
            cursor += 1;
        }
        let support_count = cursor - start;
        bins.push(EnvelopeBin {
            t,
            eta_hat: running,
            t_support: support,
            support_count,
            interpolated: support_count == 0 && running.is_some(),
        });
    }
    let alpha_hat = samples
        .iter()
        .map(|s| (s.cr_out / s.cr_in).max(s.cr_in / s.cr_out))
        .fold(1.0, f64::max);
    Ok(EnvelopeReport {
        map: map.to_string(),
        seed,
        n_random: n_quadruples,
        n_structured,
        n_degenerate,
        bins,
        alpha_hat,
        samples,
    })
}

/// Largest image cross ratio among quadruples of diameter about `scale`
/// clustered at `center` with source cross ratio at most 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterDistortion {
    pub scale: f64,
    pub max_cr_out: f64,
}

/// Cluster probe of local cross-ratio distortion: for each scale `ε`, the
/// quadruples `(c-ε, c, c+sε, c+π)` and `(c-ε, c, c+sε, c+sε+ε)` for
/// `s ∈ [1/8, 8]`, all six pairings. Growth as `ε → 0` means no gauge
/// controls the map near `c`.
pub fn cluster_distortion_trend(map: &AngleMap, center: f64, scales: &[f64]) -> Vec<ClusterDistortion> {
    let shapes = log_space(0.125, 8.0, 25);
    scales
        .iter()
        .map(|&eps| {
            let mut best = 0.0f64;
            for &s in &shapes {
                for q in [
                    [center - eps, center, center + s * eps, center + PI],
                    [center - eps, center, center + s * eps, center + s * eps + eps],
                ] {
                    let src = q.map(|x| Complex64::from_polar(1.0, x));
                    let img = q.map(|x| Complex64::from_polar(1.0, map.eval(x)));
                    let (pi, po) = (pairing_products(&src), pairing_products(&img));
                    for &(i, j) in &ORDERS {
                        if pi[i] / pi[j] <= 2.0 && po[j] > 0.0 {
                            best = best.max(po[i] / po[j]);
                        }
                    }
                }
            }
            ClusterDistortion {
                scale: eps,
                max_cr_out: best,
            }
        })
        .collect()
}

/// Log-log slope of `max_cr_out` against `1/scale`; about 0 for
/// quasi-Moebius maps, positive when distortion blows up at the center.
pub fn trend_exponent(trend: &[ClusterDistortion]) -> f64 {
    let pts: Vec<(f64, f64)> = trend
        .iter()
        .map(|c| ((1.0 / c.scale).ln(), c.max_cr_out.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundComparison {
    pub energy: EnergyEstimate,
    /// Bound from the tabulated empirical envelope.
    pub envelope_bound: f64,
    pub alpha_hat: f64,
    /// `1 + log(α̂)/π`
    pub linear_bound: f64,
    pub envelope_violation: bool,
    pub linear_violation: bool,
}

/// Tolerance added to the bound quadrature when flagging violations.
pub const BOUND_TOL: f64 = 1e-8;

pub fn bound_vs_energy(
    map: &AngleMap,
    q: &QuadratureSpec,
    scan: &EnvelopeReport,
) -> Result<BoundComparison> {
    if scan.map != map.to_string() {
        return Err(Error::Config(format!(
            "scan was produced for '{}', not '{map}'",
            scan.map
        )));
    }
    let energy = conformal_energy(map, q)?;
    let envelope_bound = qm_energy_bound(&scan.gauge()?, 32)?;
    let linear_bound = qm_energy_bound(&DistortionGauge::linear(scan.alpha_hat)?, 32)?;
    let tol = energy.err + BOUND_TOL;
    Ok(BoundComparison {
        energy,
        envelope_bound,
        alpha_hat: scan.alpha_hat,
        linear_bound,
        envelope_violation: energy.value > envelope_bound + tol,
        linear_violation: energy.value > linear_bound + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn e(x: f64) -> Complex64 {
        Complex64::from_polar(1.0, x)
    }

    #[test]
    fn square_quadruple_is_one_half() {
        let i = Complex64::i();
        let one = Complex64::new(1.0, 0.0);
        assert!((cross_ratio(one, i, -one, -i).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn antipodal_quadruple_is_cot_squared() {
        for &t in &[0.3, 1.0, FRAC_PI_2, 2.5] {
            let v = cross_ratio(e(t), -e(0.0), e(0.0), -e(t)).unwrap();
            let c = 1.0 / (0.5 * t).tan();
            assert!((v - c * c).abs() < 1e-12 * c * c, "t = {t}");
        }
        assert!((cross_ratio_angles(FRAC_PI_2, PI, 0.0, FRAC_PI_2 + PI).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn small_arc_quadruple_is_half_lambda() {
        let lambda = 1e-3;
        let v = cross_ratio_angles(0.0, lambda, PI, 1.5 * PI).unwrap();
        assert!((v / (lambda / 2.0) - 1.0).abs() < 0.05);
    }

    /// `|a-b||c-d| / (|a-c||b-d|)` from chord lengths `2|sin(Δ/2)|`.
    fn chord_cross_ratio(q: [f64; 4]) -> f64 {
        let c = |x: f64, y: f64| 2.0 * (0.5 * (x - y)).sin().abs();
        c(q[0], q[1]) * c(q[2], q[3]) / (c(q[0], q[2]) * c(q[1], q[3]))
    }

    #[test]
    fn pwl_adversarial_quadruple_image() {
        let lambda = 1e-2;
        let m = AngleMap::pwl(lambda).unwrap();
        let src = [0.0, lambda, PI, 1.5 * PI];
        let img = src.map(|x| m.eval(x));
        let got = cross_ratio_angles(img[0], img[1], img[2], img[3]).unwrap();
        assert!((got - chord_cross_ratio(img)).abs() < 1e-14);
        assert!((got - 0.331137).abs() < 1e-6, "{got}");
        // the slope-only images e^{iαπ}, e^{3iαπ/2}, dropping the branch offset
        let alpha = (TAU - 1.0) / (TAU - lambda);
        let literal = cross_ratio_angles(0.0, 1.0, alpha * PI, 1.5 * alpha * PI).unwrap();
        assert!((literal - 0.304918).abs() < 1e-6, "{literal}");
        let ratio = got / cross_ratio_angles(src[0], src[1], src[2], src[3]).unwrap();
        assert!((ratio * lambda - 0.6656).abs() < 1e-3, "{}", ratio * lambda);
    }

    #[test]
    fn coincident_points_are_rejected() {
        assert_eq!(
            cross_ratio_angles(0.0, 1.0, 1.0, 2.0),
            Err(Error::DegenerateQuadruple(1, 2))
        );
    }

    #[test]
    fn bound_of_identity_and_linear_gauges() {
        assert!((qm_energy_bound(&DistortionGauge::Identity, 20).unwrap() - 1.0).abs() < 1e-8);
        let one = DistortionGauge::linear(1.0).unwrap();
        assert!((qm_energy_bound(&one, 20).unwrap() - 1.0).abs() < 1e-8);
        let g = DistortionGauge::linear(PI.exp()).unwrap();
        assert!((qm_energy_bound(&g, 20).unwrap() - 2.0).abs() < 1e-8);
        let g2 = DistortionGauge::linear(2.0).unwrap();
        assert!((qm_energy_bound(&g2, 20).unwrap() - (1.0 + 2f64.ln() / PI)).abs() < 1e-8);
        assert!(DistortionGauge::linear(0.5).is_err());
        let _ = E;
    }

    #[test]
    fn bound_is_monotone_in_the_gauge() {
        let lo = DistortionGauge::tabulated(&[(1.0, 1.0), (10.0, 12.0), (100.0, 150.0)]).unwrap();
        let hi = DistortionGauge::tabulated(&[(1.0, 1.5), (10.0, 20.0), (100.0, 300.0)]).unwrap();
        assert!(qm_energy_bound(&hi, 20).unwrap() >= qm_energy_bound(&lo, 20).unwrap());
    }

    #[test]
    fn tabulated_gauge_interpolates_and_extrapolates() {
        let g = DistortionGauge::tabulated(&[(1.0, 1.0), (10.0, 100.0)]).unwrap();
        assert!((g.eval(100.0) - 1e4).abs() < 1e-8);
        assert!((g.eval(3.0) - 9.0).abs() < 1e-12);
        assert_eq!(g.eval(0.0), 0.0);
        assert!((g.eval(0.5) - 0.5).abs() < 1e-15);
        assert!(DistortionGauge::tabulated(&[(1.0, 2.0), (0.5, 3.0)]).is_err());
    }

    #[test]
    fn zero_gauge_value_is_not_integrable() {
        // η vanishing near t = 1 makes log η(cot²) = -∞ at t = π/2
        let g = DistortionGauge::Tabulated {
            t: vec![2.0, 3.0],
            eta: vec![1.0, 2.0],
            tail_exponent: 1.0,
        };
        let bad = DistortionGauge::Linear { alpha: 0.0 };
        assert!(matches!(qm_energy_bound(&bad, 8), Err(Error::NonIntegrable(_))));
        assert!(qm_energy_bound(&g, 8).is_ok());
    }

    #[test]
    fn scan_is_seed_deterministic_and_checks_size() {
        let m = AngleMap::pwl(0.3).unwrap();
        let a = cr_distortion_scan(&m, 1000, 7).unwrap();
        let b = cr_distortion_scan(&m, 1000, 7).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.alpha_hat, b.alpha_hat);
        assert!(cr_distortion_scan(&m, 999, 7).is_err());
    }

    #[test]
    fn moebius_scan_envelope_is_the_identity_gauge() {
        let m = AngleMap::moebius(Complex64::new(0.5, 0.0), 0.0).unwrap();
        let r = cr_distortion_scan(&m, 2000, 1).unwrap();
        assert!((r.alpha_hat - 1.0).abs() < 1e-9);
        for b in r.bins.iter().filter(|b| b.eta_hat.is_some()) {
            let t = b.t_support.unwrap();
            assert!(t <= b.t && (b.eta_hat.unwrap() - t).abs() <= 1e-9 * t);
        }
        let c = bound_vs_energy(&m, &QuadratureSpec::new(256), &r).unwrap();
        assert!((c.envelope_bound - 1.0).abs() < 1e-6, "{}", c.envelope_bound);
        assert!(!c.envelope_violation && !c.linear_violation);
    }

    #[test]
    fn square_distortion_blows_up_at_the_cusp() {
        let scales = log_space(1e-5, 1e-2, 7);
        let square = trend_exponent(&cluster_distortion_trend(&AngleMap::square(), 0.0, &scales));
        let pwl = trend_exponent(&cluster_distortion_trend(&AngleMap::pwl(0.1).unwrap(), 0.0, &scales));
        assert!(square > 0.9, "{square}");
        assert!(pwl.abs() < 0.05, "{pwl}");
    }
}
