//! Conformal energy of the model families, with the excluded-diagonal
//! oracle alongside the fast scheme.

use conformal_energy::energy::{conformal_energy, energy_oracle, QuadratureSpec};
use conformal_energy::Result;
use conformal_energy::cli::parse_map;

fn main() -> Result<()> {
    let q = QuadratureSpec::new(1024);
    println!("{:<36} {:>12} {:>10} {:>12}", "map", "energy", "err", "oracle@2048");
    for expr in [
        "identity",
        "mobius:a=0.6+0.2i,rot=1.1",
        "pwl:lambda=0.1",
        "inv(pwl:lambda=0.1)",
        "square",
        "inv(square)",
        "pert(identity;0,0.2)",
    ] {
        let map = parse_map(expr)?;
        let e = conformal_energy(&map, &q)?;
        let oracle = energy_oracle(&map, 2048)?;
        println!("{expr:<36} {:>12.8} {:>10.1e} {:>12.6}", e.value, e.err, oracle);
    }
    Ok(())
}
