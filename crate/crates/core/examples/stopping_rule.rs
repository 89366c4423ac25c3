// The one-step length bounds the distance to the minimizer from below.

use onestep::experiments::{stop_cond_audit, stop_cond_instance};
use onestep::solvers::{check_stop_cond_inequality, ose_prox_gradient, reference_minimizer};
use onestep::{InnerSolveConfig, ScalingMatrix};

pub fn run() -> onestep::Result<()> {
    let cfg = InnerSolveConfig::default();
    let inst = stop_cond_instance(11)?;
    let k = inst.constants;
    let lip = ScalingMatrix::scaled_identity(inst.theta_init.dim(), k.grad_lipschitz_big_m)?;
    let (hat, _) = reference_minimizer(&inst.objective, &lip, &inst.theta_init, &cfg)?;
    let ose = ose_prox_gradient(&inst.quadratic, &inst.l1, &inst.scaling, &inst.theta_init, &cfg)?;
    let rep = check_stop_cond_inequality(&inst.objective, &k, &inst.theta_init, &hat, &ose)?;
    println!(
        "m={:.3} M={:.3} L={:.3}: step {:.4} >= {:.4} * distance {:.4}? {}",
        k.strong_convexity_m,
        k.grad_lipschitz_big_m,
        k.scaling_bound_l,
        rep.step,
        rep.kappa_min,
        rep.distance,
        rep.holds
    );

    let audit = stop_cond_audit(200, 1)?;
    println!(
        "{} random instances: {} violations ({} with the larger constant)",
        audit.instances, audit.violations, audit.violations_with_kappa_max
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
