use nalgebra::DMatrix;
use onestep::cli::emit::{to_string, Format};
use onestep::experiments::{
    lambda_sweep, lambda_zero_solution, lowrank_fit, lowrank_fit_from, mc_equivalence_cauchy,
    run_mc_equivalence, stop_cond_audit, synthetic_lowrank, McConfig, McReport, OseKind,
};
use onestep::models::{logistic_objective, CauchyModel, LogisticMatrixModel};
use onestep::solvers::{run_prox_newton, StopRule, StoppingReason};
use onestep::{InnerSolveConfig, ParamPoint};

fn cauchy_model() -> CauchyModel {
    CauchyModel::new(0.0, 20.0, Some(1000.0)).unwrap()
}

#[test]
fn zero_deviation_start_is_a_fixed_point() {
    for kind in [OseKind::ProxGradientMap, OseKind::ProxDescent] {
        let mut cfg = McConfig::new(cauchy_model(), vec![200, 800], 25, kind, 3);
        cfg.zero_deviation_init = true;
        let rep = run_mc_equivalence(&cfg).unwrap();
        assert!(rep.failures.is_empty());
        for r in &rep.records {
            assert!(r.ose_deviation <= 1e-8, "{kind:?} n={} dev {}", r.n, r.ose_deviation);
        }
    }
}

#[test]
fn single_replicate_reports_are_bit_identical() {
    let a = mc_equivalence_cauchy(&cauchy_model(), &[200, 800], 1, OseKind::ProxGradientMap, 42)
        .unwrap();
    let b = mc_equivalence_cauchy(&cauchy_model(), &[200, 800], 1, OseKind::ProxGradientMap, 42)
        .unwrap();
    assert_eq!(to_string(&a, Format::Json).unwrap(), to_string(&b, Format::Json).unwrap());
    assert_eq!(to_string(&a, Format::Csv).unwrap(), to_string(&b, Format::Csv).unwrap());
}

#[test]
fn summaries_agree_with_raw_records() {
    let rep = mc_equivalence_cauchy(&cauchy_model(), &[200, 800], 40, OseKind::ProxDescent, 9)
        .unwrap();
    assert_eq!(rep.recompute_summaries(), rep.summaries);
    assert!(rep.records.iter().all(|r| r.ose_deviation >= 0.0 && r.init_deviation >= 0.0));
    assert_eq!(rep.records.len() + rep.failures.len(), 80);
}

#[test]
fn json_round_trip_reproduces_summaries() {
    let rep = mc_equivalence_cauchy(&cauchy_model(), &[200, 800], 10, OseKind::ProxGradientMap, 1)
        .unwrap();
    let text = to_string(&rep, Format::Json).unwrap();
    let back: McReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back.summaries, rep.summaries);
    assert_eq!(back, rep);
}

#[test]
fn csv_has_one_row_per_replicate() {
    let rep = mc_equivalence_cauchy(&cauchy_model(), &[200, 800], 3, OseKind::ProxGradientMap, 1)
        .unwrap();
    let text = to_string(&rep, Format::Csv).unwrap();
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn one_step_does_not_hurt_at_the_median() {
    let rep = mc_equivalence_cauchy(&cauchy_model(), &[200, 3200], 60, OseKind::ProxGradientMap, 2)
        .unwrap();
    assert!(rep.ordering_violations().is_empty(), "{:?}", rep.summaries);
}

#[test]
fn stop_cond_audit_is_deterministic_and_clean() {
    let a = stop_cond_audit(20, 8).unwrap();
    let b = stop_cond_audit(20, 8).unwrap();
    assert_eq!(a.records.len(), 20);
    assert_eq!(a.violations, 0);
    assert_eq!(to_string(&a, Format::Json).unwrap(), to_string(&b, Format::Json).unwrap());
}

#[test]
fn balanced_data_without_penalty_stops_at_zero() {
    let model = LogisticMatrixModel::new(DMatrix::from_element(4, 4, 0.5), 2, 0.0).unwrap();
    let rep = lowrank_fit(&model, 1.0, 50).unwrap();
    assert_eq!(rep.iterations, 0);
    assert_eq!(rep.final_rank, 0);
    assert_eq!(rep.stopping_reason, StoppingReason::Stationary);
    assert!(rep.theta.iter().all(|&t| t == 0.0));
}

#[test]
fn penalty_above_dual_certificate_gives_zero() {
    let (model, _) = synthetic_lowrank(12, 2, 49, 0.0, 4).unwrap();
    let lam0 = lambda_zero_solution(&model);
    let rep = lowrank_fit(&model.with_penalty(1.01 * lam0).unwrap(), 1.0, 100).unwrap();
    assert_eq!(rep.final_rank, 0);
    assert!(rep.theta.iter().all(|t| t.abs() < 1e-12));
    // Just below the certificate the solution is nonzero.
    let rep = lowrank_fit(&model.with_penalty(0.9 * lam0).unwrap(), 1.0, 100).unwrap();
    assert!(rep.final_rank >= 1);
}

#[test]
fn sweep_rank_is_nonincreasing_in_lambda() {
    let (model, _) = synthetic_lowrank(30, 3, 49, 0.0, 6).unwrap();
    let lam0 = lambda_zero_solution(&model);
    let mut lambdas: Vec<f64> = [0.05, 0.1, 0.2, 0.4, 0.7].iter().map(|f| f * lam0).collect();
    lambdas.reverse();
    let entries = lambda_sweep(&model, &lambdas, 1.0, 200).unwrap();
    let ranks: Vec<usize> = entries
        .iter()
        .map(|e| e.report.as_ref().expect("fit succeeds").final_rank)
        .collect();
    // Decreasing lambda: rank may only grow.
    assert!(ranks.windows(2).all(|w| w[0] <= w[1]), "{ranks:?}");
    for e in &entries {
        let tr = &e.report.as_ref().unwrap().objective_trajectory;
        assert!(tr.windows(2).all(|w| w[1] <= w[0] + 1e-10));
    }
}

#[test]
fn zero_penalty_sweep_is_a_single_unpenalized_fit() {
    let (model, _) = synthetic_lowrank(8, 2, 49, 0.0, 2).unwrap();
    let entries = lambda_sweep(&model, &[0.0], 1.0, 100).unwrap();
    assert_eq!(entries.len(), 1);
    assert_eq!(entries[0].report.as_ref().unwrap().lambda, 0.0);
}

#[test]
fn warm_start_matches_cold_start() {
    let (model, _) = synthetic_lowrank(20, 3, 49, 0.0, 12).unwrap();
    let lam0 = lambda_zero_solution(&model);
    let m = model.with_penalty(0.3 * lam0).unwrap();
    let cold = lowrank_fit(&m, 1e-3, 500).unwrap();
    let warm_from = lowrank_fit(&model.with_penalty(0.5 * lam0).unwrap(), 1e-3, 500).unwrap();
    let warm = lowrank_fit_from(&m, 1e-3, 500, Some(&warm_from.theta_point().unwrap())).unwrap();
    assert!((cold.final_objective() - warm.final_objective()).abs() <= 1e-6);
}

#[test]
fn proximal_newton_strictly_decreases_on_synthetic_data() {
    let (model, _) = synthetic_lowrank(20, 3, 49, 0.0, 1).unwrap();
    let m = model.with_penalty(0.3 * lambda_zero_solution(&model)).unwrap();
    let obj = logistic_objective(&m).unwrap();
    let theta0 = ParamPoint::from_matrix(&DMatrix::zeros(20, 20)).unwrap();
    let stop = StopRule::root_n(1.0, m.effective_n(), 100);
    let trace = run_prox_newton(&obj, &theta0, &stop, &InnerSolveConfig::default()).unwrap();
    assert!(trace.iterations() >= 2);
    assert!(trace.objective_values.windows(2).all(|w| w[1] < w[0]));
}
