//! Post-composition with a Moebius map leaves the energy unchanged.

use conformal_energy::energy::{conformal_energy, invariance_gap, QuadratureSpec};
use conformal_energy::{AngleMap, Result};
use num_complex::Complex64;

fn main() -> Result<()> {
    let q = QuadratureSpec::new(1024);
    let phi = AngleMap::moebius(Complex64::new(0.4, -0.3), 0.8)?;
    for map in [AngleMap::square(), AngleMap::pwl(0.1)?, AngleMap::pwl(0.01)?.invert()] {
        let e = conformal_energy(&map, &q)?;
        println!("{map:<24} E = {:.10}  gap after {phi}: {:.2e}", e.value, invariance_gap(&map, &phi, &q)?);
    }
    let m = AngleMap::moebius(Complex64::new(0.9, 0.0), 0.0)?;
    println!("{m}: E = {:.12}", conformal_energy(&m, &q)?.value);
    Ok(())
}
