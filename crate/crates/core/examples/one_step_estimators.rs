// One Newton step, one proximal gradient step and one proximal descent step
// from a rough start, compared with the full solution.

use std::sync::Arc;

use nalgebra::{dmatrix, dvector};
use onestep::solvers::{
    one_newton_step, ose_prox_descent, ose_prox_gradient, run_prox_gradient, OseConfig,
    ScalingRule, StopRule,
};
use onestep::{
    CompositeObjective, InnerSolveConfig, NonsmoothTerm, ParamPoint, QuadraticTerm, ScalingMatrix,
};

pub fn run() -> onestep::Result<()> {
    let cfg = InnerSolveConfig::default();
    let h = dmatrix![4.0, 1.0, 0.0; 1.0, 3.0, 0.5; 0.0, 0.5, 2.0];
    let g = QuadraticTerm::centered(h.clone(), &dvector![1.0, -0.2, 0.05])?;
    let pen = NonsmoothTerm::l1(3, 0.3)?;
    let obj = CompositeObjective::new(Arc::new(g.clone()), pen.clone())?;
    let start = ParamPoint::new(vec![0.8, 0.1, -0.3])?;

    let c = ScalingMatrix::dense(h)?;
    println!("Newton step (penalty ignored): {:?}", one_newton_step(&g, &c, &start)?.as_slice());
    let cd = ScalingMatrix::diagonal(dvector![4.0, 3.0, 2.0])?;
    let pg = ose_prox_gradient(&g, &pen, &cd, &start, &cfg)?;
    println!("proximal gradient step:        {:?}", pg.as_slice());
    let pd = ose_prox_descent(&obj, &ScalingMatrix::scaled_identity(3, 0.1)?, &start, &cfg)?;
    println!("proximal descent step:         {:?}", pd.as_slice());

    let full = run_prox_gradient(
        &obj,
        &OseConfig::new(ScalingRule::Fixed(cd)),
        &start,
        &StopRule::new(1e-12, 10_000),
    )?;
    println!(
        "full run: {:?} after {} iterations ({:?})",
        full.final_point().as_slice(),
        full.iterations(),
        full.stopping_reason
    );

    // The same run stopped at c / sqrt(n), as if the objective came from n = 400 observations.
    let early = run_prox_gradient(
        &obj,
        &OseConfig::new(ScalingRule::HessianAtInit),
        &start,
        &StopRule::root_n(1.0, 400, 100),
    )?;
    println!("stopped at threshold 0.05 after {} iterations", early.iterations());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
