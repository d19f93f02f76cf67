//! Beltrami data of the harmonic extension and the monotone deformation
//! bound B(t).

use conformal_energy::disk::{boundary_fourier, deformation_bound_curve, poisson_field, uniform_t_grid};
use conformal_energy::{AngleMap, Result};

fn main() -> Result<()> {
    let m = 256;
    let fb = boundary_fourier(&AngleMap::square().invert(), m)?;
    let field = poisson_field(&fb, m, 2 * m)?;
    let s = field.summary();
    println!("max |ν| = {:.4}, min J = {:.3e}, area ratio {:.8}", s.max_nu, s.min_jacobian, s.area_ratio);
    let curve = deformation_bound_curve(&field, &uniform_t_grid(16))?;
    for (t, b) in curve.t.iter().zip(&curve.b) {
        println!("t = {t:.4}  B = {b:.10}");
    }
    println!("B(0) = {:.8}, B(1) = {:.8}, increasing {}", curve.b_zero, curve.b_limit, curve.strictly_increasing);
    Ok(())
}
