//! Harmonic extension of boundary data, its Douglas energy, the second
//! Beltrami field `ν = conj(H_w̄)/H_w`, and the mean-distortion bound curve
//! `t ↦ (1/π) ∫ (1 + t²|ν|²)/(1 - t²|ν|²) J dw`.
//!
//! Radial nodes are Gauss-Legendre on `[0, 1]` and angular nodes uniform,
//! so with `M` radial and `2M` angular nodes every area integral of a
//! degree-`M` truncated series is exact up to rounding.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::maps::AngleMap;
use crate::quadrature::{gauss_legendre, pairwise_sum};

/// Boundary samples per retained mode.
pub const SAMPLES_PER_MODE: usize = 32;

pub const DEFAULT_TRUNCATION: usize = 512;

/// Last-octave to previous-octave ratio of the Douglas sum above which a
/// larger truncation is advised, and at which the sum is declared divergent.
pub const TAIL_ADVISORY_RATIO: f64 = 0.6;
pub const TAIL_DIVERGENT_RATIO: f64 = 0.9;

/// Truncated Fourier series `Σ_{|k| ≤ M} c_k e^{iks}` of `s ↦ e^{iθ(s)}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FourierBoundary {
    pub map: String,
    pub truncation: usize,
    pub n_samples: usize,
    /// `c_{-M}, …, c_M`.
    #[serde(skip)]
    pub coeffs: Vec<Complex64>,
    /// Geometric extrapolation of `Σ_{|k| > M} |k||c_k|²`.
    pub tail_energy: f64,
    /// Ratio of the Douglas sums over the last two octaves.
    pub octave_ratio: f64,
    pub advisory: Option<String>,
}

impl FourierBoundary {
    pub fn coeff(&self, k: i64) -> Complex64 {
        let m = self.truncation as i64;
        if k.abs() > m {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[(k + m) as usize]
    }

    /// `Σ |c_k|²`, equal to 1 for unimodular data.
    pub fn parseval(&self) -> f64 {
        pairwise_sum(&self.coeffs.iter().map(|c| c.norm_sqr()).collect::<Vec<_>>())
    }

    /// `Σ k (|c_k|² - |c_{-k}|²)`: the image area over π of the truncated
    /// extension, 1 in the limit for orientation-preserving homeomorphisms.
    pub fn winding_sum(&self) -> f64 {
        let terms: Vec<f64> = (1..=self.truncation as i64)
            .map(|k| k as f64 * (self.coeff(k).norm_sqr() - self.coeff(-k).norm_sqr()))
            .collect();
        pairwise_sum(&terms)
    }

    /// `k,re,im` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,re,im\n");
        let m = self.truncation as i64;
        for k in -m..=m {
            let c = self.coeff(k);
            let _ = writeln!(out, "{k},{:e},{:e}", c.re, c.im);
        }
        out
    }

    fn octave_sum(&self, lo: usize, hi: usize) -> f64 {
        (lo + 1..=hi)
            .map(|k| {
                let k = k as i64;
                k as f64 * (self.coeff(k).norm_sqr() + self.coeff(-k).norm_sqr())
            })
            .sum()
    }
}

pub fn boundary_fourier(map: &AngleMap, truncation: usize) -> Result<FourierBoundary> {
    if truncation < 16 {
        return Err(Error::Config(format!("truncation must be at least 16 (got {truncation})")));
    }
    let n = SAMPLES_PER_MODE * truncation;
    let mut buf: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|j| Complex64::from_polar(1.0, map.eval(TAU * j as f64 / n as f64)))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let scale = 1.0 / n as f64;
    let m = truncation as i64;
    let coeffs: Vec<Complex64> = (-m..=m)
        .map(|k| buf[k.rem_euclid(n as i64) as usize] * scale)
        .collect();
    let mut fb = FourierBoundary {
        map: map.to_string(),
        truncation,
        n_samples: n,
        coeffs,
        tail_energy: 0.0,
        octave_ratio: 0.0,
        advisory: None,
    };
    let last = fb.octave_sum(truncation / 2, truncation);
    let prev = fb.octave_sum(truncation / 4, truncation / 2);
    let total = fb.octave_sum(0, truncation);
    // octaves at rounding level carry no decay information
    let ratio = if prev > 0.0 && last > 1e-14 * total { last / prev } else { 0.0 };
    fb.octave_ratio = ratio;
    fb.tail_energy = if ratio < 1.0 { last * ratio / (1.0 - ratio) } else { f64::INFINITY };
    if ratio > TAIL_ADVISORY_RATIO {
        fb.advisory = Some(format!(
            "coefficient tail decays slowly (octave ratio {ratio:.3}); increase the truncation"
        ));
    }
    Ok(fb)
}

/// `Σ |k| |c_k|²` over the retained modes.
pub fn douglas_energy(fb: &FourierBoundary) -> Result<f64> {
    if !(fb.octave_ratio < TAIL_DIVERGENT_RATIO) {
        return Err(Error::InfiniteEnergy(format!(
            "last-octave ratio {:.3} for '{}' at truncation {}",
            fb.octave_ratio, fb.map, fb.truncation
        )));
    }
    let m = fb.truncation as i64;
    let terms: Vec<f64> = (-m..=m)
        .map(|k| k.unsigned_abs() as f64 * fb.coeff(k).norm_sqr())
        .collect();
    Ok(pairwise_sum(&terms))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtensionEnergy {
    pub value: f64,
    /// Extrapolated contribution of the dropped modes.
    pub tail: f64,
    pub truncation: usize,
}

/// Douglas energy of the inverse boundary map.
pub fn extension_energy(map: &AngleMap, truncation: usize) -> Result<ExtensionEnergy> {
    let fb = boundary_fourier(&map.invert(), truncation)?;
    Ok(ExtensionEnergy {
        value: douglas_energy(&fb)?,
        tail: fb.tail_energy,
        truncation,
    })
}

/// Harmonic extension sampled on a polar grid, stored row-major by radius.
#[derive(Debug, Clone)]
pub struct DiskField {
    pub radii: Vec<f64>,
    /// Area weight of each node on ring `i`: `w_i r_i 2π / n_angles`.
    pub ring_weights: Vec<f64>,
    pub n_angles: usize,
    pub h: Vec<Complex64>,
    pub h_w: Vec<Complex64>,
    pub h_wbar: Vec<Complex64>,
    pub jacobian: Vec<f64>,
    pub nu: Vec<Complex64>,
    /// Nodes where `H_w` vanishes and ν is undefined (set to 0).
    pub nu_undefined: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSummary {
    pub n_radii: usize,
    pub n_angles: usize,
    pub max_nu: f64,
    pub min_jacobian: f64,
    pub nonpositive_jacobian: usize,
    pub nu_undefined: usize,
    /// `max |∂ν/∂w̄|` on rings with `r ≤ 0.9`, by finite differences.
    pub cauchy_riemann_residual: f64,
    /// `(1/π) ∫ J`, the image area over π.
    pub area_ratio: f64,
}

impl DiskField {
    pub fn angle(&self, j: usize) -> f64 {
        TAU * j as f64 / self.n_angles as f64
    }

    fn weighted_sum<F: Fn(usize) -> f64 + Sync>(&self, f: F) -> f64 {
        let na = self.n_angles;
        let rings: Vec<f64> = (0..self.radii.len())
            .into_par_iter()
            .map(|i| {
                let row: Vec<f64> = (0..na).map(|j| f(i * na + j)).collect();
                pairwise_sum(&row) * self.ring_weights[i]
            })
            .collect();
        pairwise_sum(&rings) / PI
    }

    /// Largest `|∂ν/∂w̄|` over interior rings with `r ≤ 0.9`, using
    /// `∂_w̄ = (e^{iφ}/2)(∂_r + (i/r) ∂_φ)` and central differences.
    pub fn cauchy_riemann_residual(&self) -> f64 {
        let na = self.n_angles;
        let dphi = TAU / na as f64;
        let r = &self.radii;
        (1..r.len() - 1)
            .filter(|&i| r[i + 1] <= 0.9)
            .flat_map(|i| (0..na).map(move |j| (i, j)))
            .par_bridge()
            .map(|(i, j)| {
                let at = |ii: usize, jj: usize| self.nu[ii * na + (jj % na)];
                let (h0, h1) = (r[i] - r[i - 1], r[i + 1] - r[i]);
                let dr = (at(i + 1, j) * (h0 * h0) - at(i - 1, j) * (h1 * h1)
                    + at(i, j) * (h1 * h1 - h0 * h0))
                    / (h0 * h1 * (h0 + h1));
                let dp = (at(i, j + 1) - at(i, j + na - 1)) / (2.0 * dphi);
                let e = Complex64::from_polar(0.5, self.angle(j));
                (e * (dr + Complex64::i() * dp / r[i])).norm()
            })
            .reduce(|| 0.0, f64::max)
    }

    pub fn summary(&self) -> FieldSummary {
        FieldSummary {
            n_radii: self.radii.len(),
            n_angles: self.n_angles,
            max_nu: self.nu.iter().map(|v| v.norm()).fold(0.0, f64::max),
            min_jacobian: self.jacobian.iter().copied().fold(f64::INFINITY, f64::min),
            nonpositive_jacobian: self.jacobian.iter().filter(|j| !(**j > 0.0)).count(),
            nu_undefined: self.nu_undefined,
            cauchy_riemann_residual: self.cauchy_riemann_residual(),
            area_ratio: self.weighted_sum(|p| self.jacobian[p]),
        }
    }
}

/// Synthesize `H`, `H_w`, `H_w̄`, `J` and `ν` on `n_radii` Gauss-Legendre
/// rings times `n_angles` uniform angles, one FFT per ring with
/// frequencies folded modulo `n_angles`.
pub fn poisson_field(fb: &FourierBoundary, n_radii: usize, n_angles: usize) -> Result<DiskField> {
    if n_radii < 2 || n_angles < 4 {
        return Err(Error::Config(format!(
            "field grid needs at least 2 radii and 4 angles (got {n_radii} × {n_angles})"
        )));
    }
    let (x, w) = gauss_legendre(n_radii);
    let radii: Vec<f64> = x.iter().map(|x| 0.5 * (1.0 + x)).collect();
    let ring_weights: Vec<f64> = w
        .iter()
        .zip(&radii)
        .map(|(w, r)| 0.5 * w * r * TAU / n_angles as f64)
        .collect();
    let m = fb.truncation;
    let fft = FftPlanner::new().plan_fft_inverse(n_angles);
    let zero = Complex64::new(0.0, 0.0);

    let rings: Vec<[Vec<Complex64>; 3]> = radii
        .par_iter()
        .map(|&r| {
            let mut h = vec![zero; n_angles];
            let mut hw = vec![zero; n_angles];
            let mut hwb = vec![zero; n_angles];
            // H = Σ_{k≥0} c_k r^k e^{ikφ} + Σ_{k>0} c_{-k} r^k e^{-ikφ}
            // H_w = Σ_{k≥1} k c_k r^{k-1} e^{i(k-1)φ}
            // H_w̄ = Σ_{k≥1} k c_{-k} r^{k-1} e^{-i(k-1)φ}
            let mut rk = 1.0;
            for k in 0..=m {
                let ki = k as i64;
                h[k % n_angles] += fb.coeff(ki) * rk;
                if k > 0 {
                    h[(n_angles - k % n_angles) % n_angles] += fb.coeff(-ki) * rk;
                }
                if k < m {
                    let kn = (k + 1) as f64;
                    hw[k % n_angles] += fb.coeff(ki + 1) * (kn * rk);
                    hwb[(n_angles - k % n_angles) % n_angles] += fb.coeff(-ki - 1) * (kn * rk);
                }
                rk *= r;
            }
            for v in [&mut h, &mut hw, &mut hwb] {
                fft.process(v);
            }
            [h, hw, hwb]
        })
        .collect();

    let total = n_radii * n_angles;
    let (mut h, mut h_w, mut h_wbar) = (Vec::with_capacity(total), Vec::with_capacity(total), Vec::with_capacity(total));
    for [a, b, c] in rings {
        h.extend(a);
        h_w.extend(b);
        h_wbar.extend(c);
    }
    let jacobian: Vec<f64> = h_w
        .iter()
        .zip(&h_wbar)
        .map(|(a, b)| a.norm_sqr() - b.norm_sqr())
        .collect();
    let mut nu_undefined = 0;
    let nu: Vec<Complex64> = h_w
        .iter()
        .zip(&h_wbar)
        .map(|(a, b)| {
            if a.norm() == 0.0 {
                nu_undefined += 1;
                zero
            } else {
                b.conj() / a
            }
        })
        .collect();
    Ok(DiskField {
        radii,
        ring_weights,
        n_angles,
        h,
        h_w,
        h_wbar,
        jacobian,
        nu,
        nu_undefined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeformationCurve {
    pub t: Vec<f64>,
    pub b: Vec<f64>,
    pub b_zero: f64,
    /// `(1/π) ∫ (|H_w|² + |H_w̄|²)`, the `t → 1` limit.
    pub b_limit: f64,
    /// Largest relative gap between `(1+|ν|²)/(1-|ν|²) J` and
    /// `|H_w|² + |H_w̄|²` over the grid.
    pub limit_identity_gap: f64,
    /// Largest relative gap between central differences of `B` and the
    /// integrated derivative `(1/π) ∫ 4t|ν|²/(1 - t²|ν|²)² J` at interior `t`.
    pub derivative_gap: f64,
    pub strictly_increasing: bool,
    /// Set when `t²|ν|² ≥ 1` somewhere; the curve stops before that `t`.
    pub truncated: bool,
    /// Grid points with `J ≤ 0`; they stay in the sums.
    pub nonpositive_jacobian: usize,
}

impl DeformationCurve {
    /// `t,B` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,B\n");
        for (t, b) in self.t.iter().zip(&self.b) {
            let _ = writeln!(out, "{t:e},{b:.15e}");
        }
        out
    }
}

/// `B(t)` on the given parameters. Truncated series can lose `J > 0` at
/// nodes next to a boundary cusp; those nodes are counted, kept, and cut
/// the curve once `t²|ν|² ≥ 1` there.
pub fn deformation_bound_curve(field: &DiskField, t_grid: &[f64]) -> Result<DeformationCurve> {
    let nonpositive_jacobian = field.jacobian.iter().filter(|j| !(**j > 0.0)).count();
    if let Some(t) = t_grid.iter().find(|t| !(0.0..1.0).contains(*t)) {
        return Err(Error::Config(format!("curve parameters must lie in [0, 1) (got {t})")));
    }
    let nu2: Vec<f64> = field.nu.iter().map(|v| v.norm_sqr()).collect();
    let curve_at = |t: f64| {
        field.weighted_sum(|p| {
            let s = t * t * nu2[p];
            (1.0 + s) / (1.0 - s) * field.jacobian[p]
        })
    };
    let slope_at = |t: f64| {
        field.weighted_sum(|p| {
            let s = t * t * nu2[p];
            4.0 * t * nu2[p] / ((1.0 - s) * (1.0 - s)) * field.jacobian[p]
        })
    };
    let peak = nu2.iter().copied().fold(0.0, f64::max);
    let mut t = Vec::new();
    let mut b = Vec::new();
    let mut truncated = false;
    for &tv in t_grid {
        if tv * tv * peak >= 1.0 {
            truncated = true;
            break;
        }
        t.push(tv);
        b.push(curve_at(tv));
    }
    let b_limit = field.weighted_sum(|p| field.h_w[p].norm_sqr() + field.h_wbar[p].norm_sqr());
    let limit_identity_gap = (0..nu2.len())
        .map(|p| {
            let lhs = (1.0 + nu2[p]) / (1.0 - nu2[p]) * field.jacobian[p];
            let rhs = field.h_w[p].norm_sqr() + field.h_wbar[p].norm_sqr();
            (lhs - rhs).abs() / rhs.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    let derivative_gap = (1..t.len().saturating_sub(1))
        .map(|i| {
            let fd = (b[i + 1] - b[i - 1]) / (t[i + 1] - t[i - 1]);
            let exact = slope_at(t[i]);
            (fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    Ok(DeformationCurve {
        strictly_increasing: b.windows(2).all(|w| w[1] > w[0]),
        b_zero: curve_at(0.0),
        t,
        b,
        b_limit,
        limit_identity_gap,
        derivative_gap,
        truncated,
        nonpositive_jacobian,
    })
}

/// `j / points` for `j = 0..points`.
pub fn uniform_t_grid(points: usize) -> Vec<f64> {
    (0..points).map(|j| j as f64 / points as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moebius(a: f64, rot: f64) -> AngleMap {
        AngleMap::moebius(Complex64::new(a, 0.0), rot).unwrap()
    }

    #[test]
    fn identity_boundary_is_a_single_mode() {
        let fb = boundary_fourier(&AngleMap::identity(), 32).unwrap();
        assert!((fb.coeff(1) - 1.0).norm() < 1e-12);
        for k in -32..=32 {
            if k != 1 {
                assert!(fb.coeff(k).norm() <= 1e-12, "c_{k}");
            }
        }
        assert!((douglas_energy(&fb).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moebius_coefficients_are_geometric() {
        let fb = boundary_fourier(&moebius(0.5, 0.0), 64).unwrap();
        assert!((fb.coeff(0) + 0.5).norm() < 1e-12);
        for m in 1..40 {
            let want = 0.75 * 0.5f64.powi(m - 1);
            assert!((fb.coeff(m as i64) - want).norm() < 1e-12, "c_{m}");
            assert!(fb.coeff(-(m as i64)).norm() < 1e-12);
        }
        assert!((douglas_energy(&fb).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn square_boundary_satisfies_parseval() {
        let fb = boundary_fourier(&AngleMap::square(), 512).unwrap();
        assert!((fb.parseval() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn extension_energy_of_rotated_moebius_is_one() {
        let e = extension_energy(&moebius(0.5, 0.7), 256).unwrap();
        assert!((e.value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn discontinuous_boundary_has_infinite_energy() {
        // coefficients of a jump discontinuity decay like 1/k
        let fb = FourierBoundary {
            map: "step".into(),
            truncation: 64,
            n_samples: 0,
            coeffs: (-64..=64).map(|k: i64| Complex64::new(if k == 0 { 0.0 } else { 1.0 / k as f64 }, 0.0)).collect(),
            tail_energy: 0.0,
            octave_ratio: 1.0,
            advisory: None,
        };
        assert!(matches!(douglas_energy(&fb), Err(Error::InfiniteEnergy(_))));
    }

    #[test]
    fn identity_and_moebius_fields_are_conformal() {
        let fb = boundary_fourier(&AngleMap::identity(), 16).unwrap();
        let f = poisson_field(&fb, 16, 32).unwrap();
        for p in 0..f.h.len() {
            let (i, j) = (p / 32, p % 32);
            let w = Complex64::from_polar(f.radii[i], f.angle(j));
            assert!((f.h[p] - w).norm() < 1e-12);
            assert!((f.h_w[p] - 1.0).norm() < 1e-12 && f.h_wbar[p].norm() < 1e-12);
            assert!((f.jacobian[p] - 1.0).abs() < 1e-12);
        }
        let a = 0.5;
        let fb = boundary_fourier(&moebius(a, 0.0), 64).unwrap();
        let f = poisson_field(&fb, 64, 128).unwrap();
        let s = f.summary();
        assert!(s.max_nu < 1e-10);
        for p in (0..f.h.len()).step_by(97) {
            let (i, j) = (p / 128, p % 128);
            let w = Complex64::from_polar(f.radii[i], f.angle(j));
            let want = (w - a) / (1.0 - a * w);
            // truncated series: a^64 ≈ 5e-20
            assert!((f.h[p] - want).norm() < 1e-10);
        }
        let c = deformation_bound_curve(&f, &uniform_t_grid(8)).unwrap();
        for b in &c.b {
            assert!((b - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn square_field_curve() {
        let m = 128;
        let fb = boundary_fourier(&AngleMap::square().invert(), m).unwrap();
        let f = poisson_field(&fb, m, 2 * m).unwrap();
        let s = f.summary();
        assert!(s.max_nu < 1.0 && s.nonpositive_jacobian == 0, "{s:?}");
        let c = deformation_bound_curve(&f, &uniform_t_grid(32)).unwrap();
        // exact for the truncated series; the deficit from 1 is the dropped tail
        assert!((c.b_zero - fb.winding_sum()).abs() < 1e-12, "{}", c.b_zero);
        assert!((c.b_zero - 1.0).abs() < 2e-5);
        assert!(c.strictly_increasing);
        assert!((c.b_limit - douglas_energy(&fb).unwrap()).abs() < 1e-9);
        assert!(c.limit_identity_gap < 1e-9);
        assert!(c.derivative_gap < 0.05, "{}", c.derivative_gap);
    }

    #[test]
    fn cauchy_riemann_residual_shrinks_under_refinement() {
        let fb = boundary_fourier(&AngleMap::square().invert(), 64).unwrap();
        let coarse = poisson_field(&fb, 64, 128).unwrap().cauchy_riemann_residual();
        let fine = poisson_field(&fb, 128, 256).unwrap().cauchy_riemann_residual();
        assert!(fine < 0.5 * coarse, "{coarse} -> {fine}");
    }
}
