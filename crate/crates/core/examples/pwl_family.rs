//! Piecewise-linear family: forward energies stay bounded while the
//! inverses grow like log(1/λ).

use conformal_energy::acceptance::{default_lambdas, pwl_study};
use conformal_energy::energy::QuadratureSpec;
use conformal_energy::Result;

fn main() -> Result<()> {
    let study = pwl_study(&default_lambdas(), &QuadratureSpec::new(4096))?;
    println!("{:>10} {:>12} {:>12}", "lambda", "E(f)", "E(f^-1)");
    for r in &study.rows {
        println!("{:>10.1e} {:>12.6} {:>12.6}", r.lambda, r.forward.value, r.inverse.value);
    }
    println!("forward spread {:.2}%", 100.0 * study.forward_spread);
    println!("inverse slope {:.4} (expected {:.4})", study.inverse_slope, study.expected_slope);
    Ok(())
}
