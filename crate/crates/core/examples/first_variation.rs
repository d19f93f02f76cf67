//! First variation against finite differences, and Euler-Lagrange residual
//! profiles of a critical and a non-critical map.

use conformal_energy::energy::{conformal_energy, QuadratureSpec};
use conformal_energy::variational::{first_variation, residual_profile, Perturbation};
use conformal_energy::{AngleMap, Result};
use num_complex::Complex64;

fn main() -> Result<()> {
    let q = QuadratureSpec::new(512);
    let map = AngleMap::square();
    let tau = 1e-4;
    for k in 2..=4 {
        let phi = Perturbation::mode(k, 1.0);
        let exact = first_variation(&map, &phi, &q)?;
        let plus = conformal_energy(&phi.apply(&map, tau), &q.with_refine(0))?.value;
        let minus = conformal_energy(&phi.apply(&map, -tau), &q.with_refine(0))?.value;
        println!("sin {k}t: dE = {exact:+.10}  central difference {:+.10}", (plus - minus) / (2.0 * tau));
    }
    let q = QuadratureSpec::new(4096);
    for map in [AngleMap::moebius(Complex64::new(0.5, 0.0), 0.0)?, AngleMap::square()] {
        let profile = residual_profile(&map, 32, &q)?;
        println!("{map}: max |R| = {:.3e}", profile.max_abs);
    }
    Ok(())
}
