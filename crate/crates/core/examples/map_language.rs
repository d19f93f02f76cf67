//! Map expressions, validation diagnostics and parse errors.

use conformal_energy::cli::parse_map;
use conformal_energy::{validate, Result};

fn main() -> Result<()> {
    for expr in ["inv(pwl:lambda=0.01)", "comp(mobius:a=0.3+0i,rot=0,square)", "pert(square;0.02,0,0.01)"] {
        let map = parse_map(expr)?;
        let d = validate(&map, 1024)?;
        println!(
            "{map}\n  θ(π) = {:.6}, min slope {:.3e}, Hölder p = {} (stable {})",
            map.eval(std::f64::consts::PI),
            d.min_slope_estimate,
            d.hoelder_lower.0,
            d.hoelder_stable
        );
    }
    for bad in ["comp(square,pwl:lambda=-1)", "mobius:a=0.5,rot=0", "inv(square"] {
        println!("{}", parse_map(bad).unwrap_err());
    }
    Ok(())
}
