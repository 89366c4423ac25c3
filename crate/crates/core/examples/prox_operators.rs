// Closed-form proximal maps and the generic inner solver.

use std::sync::Arc;

use nalgebra::{dmatrix, dvector};
use onestep::prox::{project_box, prox_l1, prox_nuclear, scaled_prox_generic};
use onestep::{CompositeObjective, InnerSolveConfig, ParamPoint, QuadraticTerm, ScalingMatrix};

pub fn run() -> onestep::Result<()> {
    let x = ParamPoint::new(vec![3.0, 0.5, -1.5])?;
    let c = ScalingMatrix::diagonal(dvector![1.0, 1.0, 4.0])?;
    let l1 = prox_l1(&x, 1.0, &c)?;
    println!("soft threshold of {:?} -> {:?}", x.as_slice(), l1.point.as_slice());

    let lo = ParamPoint::new(vec![0.0, 0.0, 0.0])?;
    let hi = ParamPoint::new(vec![1.0, 1.0, 1.0])?;
    println!("box projection -> {:?}", project_box(&x, &lo, &hi)?.point.as_slice());

    let m = ParamPoint::from_matrix(&dmatrix![3.0, 0.0; 0.0, 1.0])?;
    let svt = prox_nuclear(&m, 1.0, 1.0)?;
    println!("singular value thresholding of diag(3, 1) -> {}", svt.point.to_matrix().unwrap());

    // No closed form: a quadratic under a dense scaling.
    let q = QuadraticTerm::new(dmatrix![1.0, 0.0; 0.0, 3.0], dvector![0.0, 0.0])?;
    let f = CompositeObjective::smooth_only(Arc::new(q));
    let cd = ScalingMatrix::dense(dmatrix![2.0, 0.5; 0.5, 1.0])?;
    let r = scaled_prox_generic(&f, &cd, &ParamPoint::new(vec![2.0, 2.0])?, &InnerSolveConfig::default())?;
    println!(
        "generic prox -> {:?} in {} inner iterations (residual {:.1e})",
        r.point.as_slice(),
        r.inner_iterations,
        r.stationarity_residual
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
