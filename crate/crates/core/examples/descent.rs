//! Gradient descent on sine-mode coefficients from a perturbed identity.

use conformal_energy::energy::QuadratureSpec;
use conformal_energy::variational::descend;
use conformal_energy::{AngleMap, Result};

fn main() -> Result<()> {
    let start = AngleMap::perturbed(AngleMap::identity(), vec![0.0, 0.2])?;
    let trace = descend(&start, 8, 200, &QuadratureSpec::new(512))?;
    for (i, e) in trace.energies.iter().enumerate().step_by(4) {
        println!("step {i:>3}  E = {e:.12}  |grad| = {:.2e}", trace.grad_norms[i]);
    }
    println!(
        "converged {} after {} steps; nearest Moebius a = {:.3e}, rot = {:.3e}, distance {:.2e}",
        trace.converged,
        trace.steps(),
        trace.fit.a,
        trace.fit.rot,
        trace.fit.sup_distance
    );
    Ok(())
}
