//! Empirical distortion envelope of a map and the bounds it implies.

use conformal_energy::bounds::{bound_vs_energy, cluster_distortion_trend, cr_distortion_scan, trend_exponent};
use conformal_energy::energy::QuadratureSpec;
use conformal_energy::{AngleMap, Result};

fn main() -> Result<()> {
    let scales: Vec<f64> = (0..7).map(|i| 10f64.powf(-5.0 + 0.5 * i as f64)).collect();
    for map in [AngleMap::pwl(0.01)?, AngleMap::square()] {
        let scan = cr_distortion_scan(&map, 10_000, 1)?;
        let cmp = bound_vs_energy(&map, &QuadratureSpec::new(1024), &scan)?;
        println!("{map}");
        println!("  η̂(2) = {:.1}, α̂ = {:.1}", scan.eta_hat_at(2.0).unwrap_or(f64::NAN), scan.alpha_hat);
        println!(
            "  E = {:.6} ≤ envelope bound {:.4}, linear bound {:.4}",
            cmp.energy.value, cmp.envelope_bound, cmp.linear_bound
        );
        let trend = cluster_distortion_trend(&map, 0.0, &scales);
        println!("  cusp cluster growth exponent {:.3}", trend_exponent(&trend));
    }
    Ok(())
}
