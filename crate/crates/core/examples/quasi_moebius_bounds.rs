//! Energy bounds from distortion gauges, and the two-sided bilipschitz
//! inequality for a composite.

use std::f64::consts::PI;

use conformal_energy::bounds::{qm_energy_bound, DistortionGauge};
use conformal_energy::energy::{bilip_bounds_report, QuadratureSpec};
use conformal_energy::maps::bilipschitz_constant;
use conformal_energy::{AngleMap, Result};

fn main() -> Result<()> {
    println!("identity gauge: {:.12}", qm_energy_bound(&DistortionGauge::Identity, 32)?);
    for alpha in [1.5, 2.0, 10.0, PI.exp()] {
        let b = qm_energy_bound(&DistortionGauge::linear(alpha)?, 32)?;
        println!("linear α = {alpha:<8.4} bound {b:.10}  closed form {:.10}", 1.0 + alpha.ln() / PI);
    }
    let tabulated = DistortionGauge::tabulated(&[(1e-3, 2e-3), (0.5, 0.8), (1.0, 1.3), (2.0, 2.4), (1e3, 1.5e3)])?;
    println!("tabulated gauge: {:.6}", qm_energy_bound(&tabulated, 32)?);

    let f = AngleMap::pwl(0.3)?;
    let g = AngleMap::square();
    let l = bilipschitz_constant(&f, 4096) * (1.0 + 1e-6);
    let report = bilip_bounds_report(&f, &g, l, &QuadratureSpec::new(1024))?;
    println!(
        "E(f∘g) = {:.6} within [{:.6}, {:.6}]: {} / {}",
        report.energy_fg.value, report.lower_bound, report.upper_bound, report.lower_holds, report.upper_holds
    );
    Ok(())
}
