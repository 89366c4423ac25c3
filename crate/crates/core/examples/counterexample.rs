// Unscaled gradient steps are not enough: the overshoot probability for the
// first mean coordinate does not vanish with n.

use onestep::experiments::{counterexample_closed_form, counterexample_monte_carlo, CounterexampleMode};

pub fn run() -> onestep::Result<()> {
    let cf = counterexample_closed_form(10.0, 1.0)?;
    println!("M = {:.2}, P(overshoot) = {:.6}", cf.m_constant, cf.probability);
    for mode in [
        CounterexampleMode::FixedStep,
        CounterexampleMode::ExactStep,
        CounterexampleMode::ScaledNewton,
    ] {
        for n in [100, 10_000] {
            let r = counterexample_monte_carlo(10.0, 1.0, n, 4000, mode, 3)?;
            println!(
                "{mode:?} n={n:>5}: empirical {:.4} +- {:.4}, reference {:.4}",
                r.empirical_prob, r.std_error, r.closed_form_prob
            );
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
