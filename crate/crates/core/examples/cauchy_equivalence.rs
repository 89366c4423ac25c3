// Monte Carlo check that one step from a root-n consistent start tracks the
// penalized Cauchy location estimate.

use onestep::experiments::{mc_equivalence_cauchy, OseKind};
use onestep::models::CauchyModel;

pub fn run() -> onestep::Result<()> {
    let model = CauchyModel::new(0.0, 20.0, Some(1000.0))?;
    for kind in [OseKind::ProxGradientMap, OseKind::ProxDescent] {
        let rep = mc_equivalence_cauchy(&model, &[200, 800, 3200], 100, kind, 7)?;
        println!("{kind:?}");
        for s in &rep.summaries {
            println!(
                "  n={:>5}  median sqrt(n)|ose - hat| = {:.3e}   median sqrt(n)|init - hat| = {:.3e}",
                s.n, s.median_ose, s.median_init
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
