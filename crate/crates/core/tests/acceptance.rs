//! Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! Set `ONESTEP_EDGE_LIST` to an edge-list file to also run the real-data path
//! of criterion 9.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use onestep::cli::dataset::{build_frequency_matrix, parse_edge_list, DEFAULT_SEGMENTS};
use onestep::cli::default_lambdas;
use onestep::experiments::{
    counterexample_closed_form, counterexample_monte_carlo, lambda_sweep, lambda_zero_solution,
    mc_equivalence_cauchy, stop_cond_audit, synthetic_lowrank, CounterexampleMode, McReport,
    OseKind,
};
use onestep::models::CauchyModel;
use onestep::prox::{
    minimize_envelope, moreau_gradient, moreau_value, nuclear_optimality_residual, prox_nuclear,
    scaled_prox, scaled_prox_generic,
};
use onestep::random::{replicate_seed, rng_from_seed, standard_normal, uniform_open01, SimRng};
use onestep::solvers::{ose_prox_gradient, reference_minimizer};
use onestep::{
    CompositeObjective, Curvature, InnerSolveConfig, NonsmoothTerm, ParamPoint, QuadraticTerm,
    ScalingMatrix, SmoothTerm,
};

const SEED: u64 = 20240601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let out = f();
    let elapsed = t.elapsed();
    let in_time = elapsed <= limit;
    let pass = out.pass && in_time;
    println!(
        "criterion {id} [{name}]: {} | {} | {:.2}s (limit {}s{})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", exceeded" }
    );
    pass
}

fn rng_for(tag: u64, i: usize) -> SimRng {
    rng_from_seed(replicate_seed(SEED, tag, i as u64))
}

fn random_spd(d: usize, rng: &mut SimRng, shift: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| standard_normal(rng));
    a.transpose() * a / d as f64 + DMatrix::identity(d, d) * shift
}

fn random_vec(d: usize, rng: &mut SimRng, scale: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| scale * standard_normal(rng))
}

fn point(v: DVector<f64>) -> ParamPoint {
    ParamPoint::from_vector(v).unwrap()
}

fn c_norm(v: &DVector<f64>, c: &ScalingMatrix) -> f64 {
    c.quad_form(v).sqrt()
}

fn firm_nonexpansiveness() -> Outcome {
    const TOL: f64 = 1e-9;
    let cfg = InnerSolveConfig::default();
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for i in 0..1000 {
        let mut rng = rng_for(1, i);
        let d = 1 + (uniform_open01(&mut rng) * 6.0) as usize;
        let c = ScalingMatrix::dense(random_spd(d, &mut rng, 0.2)).unwrap();
        let q = random_spd(d, &mut rng, 0.1);
        let b = random_vec(d, &mut rng, 1.0);
        let f = match i % 3 {
            0 => CompositeObjective::smooth_only(Arc::new(QuadraticTerm::new(q, b).unwrap())),
            1 => CompositeObjective::new(
                Arc::new(QuadraticTerm::new(q, b).unwrap()),
                NonsmoothTerm::l1(d, 2.0 * uniform_open01(&mut rng)).unwrap(),
            )
            .unwrap(),
            _ => {
                let lo = random_vec(d, &mut rng, 1.0);
                let hi = lo.map(|v| v + 0.1 + 2.0 * uniform_open01(&mut rng));
                CompositeObjective::from(NonsmoothTerm::box_indicator(lo, hi).unwrap())
            }
        };
        let x = random_vec(d, &mut rng, 3.0);
        let y = random_vec(d, &mut rng, 3.0);
        let px = scaled_prox(&f, &c, &point(x.clone()), &cfg);
        let py = scaled_prox(&f, &c, &point(y.clone()), &cfg);
        let (Ok(px), Ok(py)) = (px, py) else {
            failures += 1;
            continue;
        };
        let gap = c_norm(&(px.point.as_vector() - py.point.as_vector()), &c) - c_norm(&(x - y), &c);
        worst = worst.max(gap);
        if gap > TOL {
            failures += 1;
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!("1000 instances, {failures} violations, worst excess {worst:.3e} (tol {TOL:e})"),
    }
}

/// `1/2 w^T Q w - b^T w + sum_i log cosh(a_i w_i)`: smooth and convex.
struct LogCoshQuadratic {
    quad: QuadraticTerm,
    a: DVector<f64>,
}

impl SmoothTerm for LogCoshQuadratic {
    fn dim(&self) -> usize {
        self.a.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        let lc: f64 = x
            .iter()
            .zip(self.a.iter())
            .map(|(w, a)| {
                let t = (a * w).abs();
                t + (-2.0 * t).exp().ln_1p() - std::f64::consts::LN_2
            })
            .sum();
        self.quad.value(x) + lc
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let tanh = DVector::from_fn(x.len(), |i, _| self.a[i] * (self.a[i] * x[i]).tanh());
        self.quad.gradient(x) + tanh
    }
    fn hessian(&self, _x: &DVector<f64>) -> Option<Curvature> {
        None
    }
}

fn moreau_gradient_fd() -> Outcome {
    const TOL: f64 = 1e-5;
    const H: f64 = 1e-5;
    let cfg = InnerSolveConfig::default();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..200 {
        let mut rng = rng_for(2, i);
        let d = 1 + (uniform_open01(&mut rng) * 5.0) as usize;
        let g = LogCoshQuadratic {
            quad: QuadraticTerm::new(random_spd(d, &mut rng, 0.05), random_vec(d, &mut rng, 1.0))
                .unwrap(),
            a: random_vec(d, &mut rng, 1.5),
        };
        let f = CompositeObjective::smooth_only(Arc::new(g));
        let c = ScalingMatrix::dense(random_spd(d, &mut rng, 0.3)).unwrap();
        let x = random_vec(d, &mut rng, 2.0);
        let Ok(an) = moreau_gradient(&f, &c, &point(x.clone()), &cfg) else {
            failures += 1;
            continue;
        };
        let mut fd = DVector::zeros(d);
        for k in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += H;
            xm[k] -= H;
            let vp = moreau_value(&f, &c, &point(xp), &cfg).unwrap();
            let vm = moreau_value(&f, &c, &point(xm), &cfg).unwrap();
            fd[k] = (vp - vm) / (2.0 * H);
        }
        let rel = (&fd - an.as_vector()).norm() / an.as_vector().norm().max(1e-8);
        worst = worst.max(rel);
        if rel > TOL {
            failures += 1;
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!("200 instances, {failures} failures, worst relative error {worst:.3e} (tol {TOL:e})"),
    }
}

fn envelope_minimizer() -> Outcome {
    const TOL: f64 = 1e-6;
    let cfg = InnerSolveConfig::default();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..50 {
        let mut rng = rng_for(3, i);
        let d = 1 + (uniform_open01(&mut rng) * 6.0) as usize;
        let q = random_spd(d, &mut rng, 0.5);
        let lmax = q.clone().symmetric_eigenvalues().max();
        let g = QuadraticTerm::centered(q, &random_vec(d, &mut rng, 2.0)).unwrap();
        let f = CompositeObjective::new(
            Arc::new(g),
            NonsmoothTerm::l1(d, 1.5 * uniform_open01(&mut rng)).unwrap(),
        )
        .unwrap();
        let x0 = point(random_vec(d, &mut rng, 4.0));
        let c = ScalingMatrix::diagonal(DVector::from_fn(d, |_, _| {
            0.5 + 1.5 * uniform_open01(&mut rng)
        }))
        .unwrap();
        let lip = ScalingMatrix::scaled_identity(d, lmax).unwrap();
        let reference = reference_minimizer(&f, &lip, &x0, &cfg);
        let env = minimize_envelope(&f, &c, &x0, 1e-11, 100_000, &cfg);
        match (reference, env) {
            (Ok((hat, _)), Ok((xe, _))) => {
                let err = (hat.as_vector() - xe.as_vector()).amax();
                worst = worst.max(err);
                if err > TOL {
                    failures += 1;
                }
            }
            _ => failures += 1,
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!("50 composites, {failures} failures, worst max-abs error {worst:.3e} (tol {TOL:e})"),
    }
}

fn newton_exactness() -> Outcome {
    const TOL: f64 = 1e-10;
    let cfg = InnerSolveConfig::default();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for i in 0..200 {
        let mut rng = rng_for(4, i);
        let d = 1 + (uniform_open01(&mut rng) * 10.0) as usize;
        let h = random_spd(d, &mut rng, 0.5);
        let b = DVector::from_fn(d, |_, _| 20.0 * uniform_open01(&mut rng) - 10.0);
        let g = QuadraticTerm::centered(h.clone(), &b).unwrap();
        let c = ScalingMatrix::dense(h).unwrap();
        let start = point(DVector::from_fn(d, |_, _| 200.0 * uniform_open01(&mut rng) - 100.0));
        match ose_prox_gradient(&g, &NonsmoothTerm::zero(d), &c, &start, &cfg) {
            Ok(p) => {
                let err = (p.as_vector() - &b).amax();
                worst = worst.max(err);
                if err > TOL {
                    failures += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!("200 quadratics, {failures} failures, worst max-abs error {worst:.3e} (tol {TOL:e})"),
    }
}

fn halving_and_trend(rep: &McReport) -> (bool, String) {
    let med: Vec<f64> = rep.summaries.iter().map(|s| s.median_ose).collect();
    let first = med[0];
    let last = *med.last().unwrap();
    let inversions = med.windows(2).filter(|w| w[1] >= w[0]).count();
    let failures: usize = rep.summaries.iter().map(|s| s.failures).sum();
    let ok = last <= 0.5 * first && inversions <= 1;
    let meds: Vec<String> = med.iter().map(|m| format!("{m:.4e}")).collect();
    (
        ok,
        format!(
            "{:?}: medians [{}], ratio {:.3}, inversions {inversions}, failed replicates {failures}",
            rep.kind,
            meds.join(", "),
            last / first
        ),
    )
}

fn asymptotic_equivalence() -> Outcome {
    let model = CauchyModel::new(0.0, 20.0, Some(1000.0)).unwrap();
    let sizes = [200, 800, 3200, 12800];
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [OseKind::ProxGradientMap, OseKind::ProxDescent] {
        match mc_equivalence_cauchy(&model, &sizes, 500, kind, SEED) {
            Ok(rep) => {
                let (ok, text) = halving_and_trend(&rep);
                pass &= ok;
                parts.push(text);
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{kind:?}: error {e}"));
            }
        }
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn counterexample() -> Outcome {
    const TARGET: f64 = 0.0403;
    const TARGET_TOL: f64 = 5e-5;
    let run = || -> onestep::Result<Outcome> {
        let cf = counterexample_closed_form(10.0, 1.0)?;
        let small = counterexample_monte_carlo(10.0, 1.0, 100, 10_000, CounterexampleMode::FixedStep, SEED)?;
        let large = counterexample_monte_carlo(10.0, 1.0, 10_000, 10_000, CounterexampleMode::FixedStep, SEED + 1)?;
        let newton = counterexample_monte_carlo(10.0, 1.0, 100, 10_000, CounterexampleMode::ScaledNewton, SEED + 2)?;
        let value_ok = (cf.probability - TARGET).abs() <= TARGET_TOL && cf.closed_form_agrees;
        let mc_ok = (small.empirical_prob - cf.probability).abs() <= 3.0 * small.std_error
            && (large.empirical_prob - cf.probability).abs() <= 3.0 * large.std_error;
        let combined = (small.std_error.powi(2) + large.std_error.powi(2)).sqrt();
        let indep_ok = (small.empirical_prob - large.empirical_prob).abs() <= 3.0 * combined;
        let newton_ok = (0.48..=0.52).contains(&newton.empirical_prob);
        Ok(Outcome {
            pass: value_ok && mc_ok && indep_ok && newton_ok,
            detail: format!(
                "M {:.1}, quadrature {:.6} (closed form {:.6}); MC n=100 {:.4} +- {:.4}, n=10000 {:.4} +- {:.4}; \
                 n-independence gap {:.4} vs 3se {:.4}; Newton {:.4}",
                cf.m_constant,
                cf.probability,
                cf.closed_form,
                small.empirical_prob,
                small.std_error,
                large.empirical_prob,
                large.std_error,
                (small.empirical_prob - large.empirical_prob).abs(),
                3.0 * combined,
                newton.empirical_prob
            ),
        })
    };
    run().unwrap_or_else(|e| Outcome {
        pass: false,
        detail: format!("error {e}"),
    })
}

fn stopping_soundness() -> Outcome {
    match stop_cond_audit(100, SEED) {
        Ok(a) => {
            let min_margin = a.records.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
            Outcome {
                pass: a.violations == 0,
                detail: format!(
                    "100 instances, {} violations with the conservative constant (smallest margin {min_margin:.3e}); \
                     larger constant for comparison: {} violations",
                    a.violations, a.violations_with_kappa_max
                ),
            }
        }
        Err(e) => Outcome {
            pass: false,
            detail: format!("error {e}"),
        },
    }
}

fn nuclear_optimality() -> Outcome {
    const RESIDUAL_TOL: f64 = 1e-8;
    const AGREE_TOL: f64 = 1e-6;
    let cfg = InnerSolveConfig::default();
    let mut worst_res: f64 = 0.0;
    let mut worst_gap: f64 = 0.0;
    let mut failures = 0;
    for i in 0..100 {
        let mut rng = rng_for(8, i);
        let rows = 1 + (uniform_open01(&mut rng) * 30.0) as usize;
        let cols = 1 + (uniform_open01(&mut rng) * 30.0) as usize;
        let x = DMatrix::from_fn(rows, cols, |_, _| standard_normal(&mut rng));
        let weight = 3.0 * uniform_open01(&mut rng);
        let scale = 0.2 + 3.0 * uniform_open01(&mut rng);
        let xp = ParamPoint::from_matrix(&x).unwrap();
        let Ok(r) = prox_nuclear(&xp, weight, scale) else {
            failures += 1;
            continue;
        };
        let w = r.point.to_matrix().unwrap();
        let res = nuclear_optimality_residual(&x, &w, weight, scale);
        worst_res = worst_res.max(res);
        if res > RESIDUAL_TOL {
            failures += 1;
        }
        if i % 10 == 0 {
            let f = CompositeObjective::from(NonsmoothTerm::nuclear(rows, cols, weight).unwrap());
            let c = ScalingMatrix::scaled_identity(rows * cols, scale).unwrap();
            match scaled_prox_generic(&f, &c, &xp, &cfg) {
                Ok(g) => {
                    let gap = (g.point.as_vector() - r.point.as_vector()).amax();
                    worst_gap = worst_gap.max(gap);
                    if gap > AGREE_TOL {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!(
            "100 matrices, {failures} failures, worst residual {worst_res:.3e} (tol {RESIDUAL_TOL:e}), \
             worst generic-solver gap over 10 checks {worst_gap:.3e} (tol {AGREE_TOL:e})"
        ),
    }
}

fn lowrank_recovery() -> Outcome {
    const SLACK: f64 = 1e-10;
    let run = || -> onestep::Result<Outcome> {
        let (model, _) = synthetic_lowrank(50, 3, DEFAULT_SEGMENTS, 0.0, SEED)?;
        let lam0 = lambda_zero_solution(&model);
        let lambdas = default_lambdas(lam0);
        let entries = lambda_sweep(&model, &lambdas, 1.0, 200)?;
        let good: Vec<(f64, usize)> = entries
            .iter()
            .filter_map(|e| e.report.as_ref())
            .filter(|r| {
                r.final_rank <= 5
                    && r.objective_trajectory
                        .windows(2)
                        .all(|w| w[1] <= w[0] + SLACK * (1.0 + w[0].abs()))
            })
            .map(|r| (r.lambda, r.final_rank))
            .collect();
        let ranks: Vec<String> = entries
            .iter()
            .map(|e| match &e.report {
                Some(r) => format!("{:.3}->{}", e.lambda, r.final_rank),
                None => format!("{:.3}->error", e.lambda),
            })
            .collect();
        let mut detail = format!(
            "synthetic N=50 rank 3: sweep [{}], {} qualifying fits",
            ranks.join(", "),
            good.len()
        );
        let mut pass = !good.is_empty();
        match std::env::var_os("ONESTEP_EDGE_LIST") {
            Some(path) => {
                let ds = parse_edge_list(std::path::Path::new(&path), DEFAULT_SEGMENTS)?;
                let real = build_frequency_matrix(&ds, 0.0)?;
                let lam = default_lambdas(lambda_zero_solution(&real));
                let fits = lambda_sweep(&real, &lam[..1], 1.0, 200)?;
                let ok = fits.iter().all(|e| e.report.is_some());
                pass &= ok;
                detail.push_str(&format!("; edge list N={} fit {}", real.n, if ok { "ok" } else { "failed" }));
            }
            None => detail.push_str("; real edge list not supplied (set ONESTEP_EDGE_LIST)"),
        }
        Ok(Outcome { pass, detail })
    };
    run().unwrap_or_else(|e| Outcome {
        pass: false,
        detail: format!("error {e}"),
    })
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        check(1, "firm nonexpansiveness", secs(10), firm_nonexpansiveness),
        check(2, "envelope gradient", secs(30), moreau_gradient_fd),
        check(3, "envelope minimizer", secs(60), envelope_minimizer),
        check(4, "Newton one-step exactness", secs(5), newton_exactness),
        check(5, "asymptotic equivalence", secs(300), asymptotic_equivalence),
        check(6, "counterexample", secs(120), counterexample),
        check(7, "stopping inequality", secs(30), stopping_soundness),
        check(8, "nuclear prox optimality", secs(60), nuclear_optimality),
        check(9, "low-rank recovery", secs(300), lowrank_recovery),
    ];
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
