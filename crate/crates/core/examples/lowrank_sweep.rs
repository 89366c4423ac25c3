// Nuclear-norm penalized logistic fits on a synthetic rank-3 matrix.

use onestep::cli::default_lambdas;
use onestep::experiments::{lambda_sweep, lambda_zero_solution, synthetic_lowrank};

pub fn run() -> onestep::Result<()> {
    let (model, truth) = synthetic_lowrank(30, 3, 49, 0.0, 5)?;
    let lam0 = lambda_zero_solution(&model);
    println!("penalty with zero solution: {lam0:.4}");
    let sv = truth.singular_values();
    println!("true singular values: {:.3} {:.3} {:.3} {:.2e}", sv[0], sv[1], sv[2], sv[3]);
    for e in lambda_sweep(&model, &default_lambdas(lam0), 1.0, 200)? {
        match e.report {
            Some(r) => println!(
                "lambda {:.4}: rank {}, {} iterations, objective {:.4}",
                r.lambda,
                r.final_rank,
                r.iterations,
                r.final_objective()
            ),
            None => println!("lambda {:.4}: {}", e.lambda, e.error.unwrap_or_default()),
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
