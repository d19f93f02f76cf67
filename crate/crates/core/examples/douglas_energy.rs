//! Energy from the Fourier coefficients of the inverse boundary map,
//! compared with the double integral.

use conformal_energy::disk::{boundary_fourier, douglas_energy, extension_energy};
use conformal_energy::energy::{conformal_energy, QuadratureSpec};
use conformal_energy::{AngleMap, Result};
use num_complex::Complex64;

fn main() -> Result<()> {
    let q = QuadratureSpec::new(1024);
    for map in [
        AngleMap::moebius(Complex64::new(0.5, 0.0), 0.7)?,
        AngleMap::square(),
        AngleMap::pwl(0.1)?,
    ] {
        let ext = extension_energy(&map, 512)?;
        let e = conformal_energy(&map, &q)?;
        println!("{map:<32} Douglas {:.8} (+{:.1e} tail)  double integral {:.8}", ext.value, ext.tail, e.value);
    }
    let fb = boundary_fourier(&AngleMap::square().invert(), 64)?;
    println!("square, M = 64: {:.6}, octave ratio {:.3}", douglas_energy(&fb)?, fb.octave_ratio);
    Ok(())
}
