// Envelope value and gradient, and minimizing `f` through its envelope.

use std::sync::Arc;

use nalgebra::{dmatrix, dvector};
use onestep::prox::{minimize_envelope, moreau};
use onestep::{
    CompositeObjective, InnerSolveConfig, NonsmoothTerm, ParamPoint, QuadraticTerm, ScalingMatrix,
};

pub fn run() -> onestep::Result<()> {
    let cfg = InnerSolveConfig::default();
    let g = QuadraticTerm::centered(dmatrix![2.0, 0.3; 0.3, 1.0], &dvector![1.5, -2.0])?;
    let f = CompositeObjective::new(Arc::new(g), NonsmoothTerm::l1(2, 0.5)?)?;
    let c = ScalingMatrix::scaled_identity(2, 1.0)?;

    let x = ParamPoint::new(vec![4.0, 4.0])?;
    let e = moreau(&f, &c, &x, &cfg)?;
    println!("f(x) = {:.6}, e_C f(x) = {:.6}", f.value(&x), e.value);
    println!("grad e_C f(x) = {:?}", e.gradient.as_slice());

    let (xmin, iters) = minimize_envelope(&f, &c, &x, 1e-12, 10_000, &cfg)?;
    println!("proximal point iteration: {:?} after {iters} steps", xmin.as_slice());
    let at_min = moreau(&f, &c, &xmin, &cfg)?;
    println!("at the minimizer: f = {:.9}, e_C f = {:.9}", f.value(&xmin), at_min.value);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
