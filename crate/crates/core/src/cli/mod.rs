//! Command-line front end: argument and config-file resolution, dispatch to the
//! experiment harnesses, and report emission.
//!
//! Precedence is command-line flag, then `--config` file, then built-in default.

pub mod dataset;
pub mod emit;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiments::{
    counterexample_closed_form, counterexample_monte_carlo, lambda_sweep, lambda_zero_solution,
    prox_check, run_mc_equivalence, stop_cond_audit, synthetic_lowrank, CounterexampleMode,
    McConfig, OseKind,
};
use crate::models::{CauchyModel, LogisticMatrixModel};
use dataset::{build_frequency_matrix, parse_edge_list, DEFAULT_SEGMENTS};
use emit::{emit_report, CounterexampleBatch, Format, LowRankBatch};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Randomized checks of the proximal operators.
    ProxCheck,
    /// One-step equivalence Monte Carlo on the Cauchy location model.
    McEquivalence,
    /// Gradient-descent counterexample on the bivariate normal mean.
    Counterexample,
    /// Nuclear-norm penalized logistic fits over a penalty sweep.
    Lowrank,
    /// Randomized audit of the stopping inequality.
    StopCondAudit,
}

/// Step rule for `counterexample`, or one-step map for `mc-equivalence`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    FixedStep,
    ExactStep,
    ScaledNewton,
    ProxGradient,
    ProxDescent,
}

#[derive(Debug, Parser)]
#[command(
    name = "onestep",
    version,
    about = "One-step estimators with scaled proximal methods: experiments and diagnostics"
)]
pub struct Args {
    /// Command to run.
    #[arg(value_enum)]
    pub command: Command,
    /// Base seed for every random draw [default: 1].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path, `-` for stdout [default: -].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format [default: csv].
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Replicates or trials [default: 500 mc-equivalence, 10000 counterexample,
    /// 100 stop-cond-audit, 1000 prox-check].
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Comma-separated sample sizes [default: 200,800,3200,12800 for
    /// mc-equivalence; 100,10000 for counterexample].
    #[arg(long, value_delimiter = ',')]
    pub sample_sizes: Option<Vec<usize>>,
    /// Larger standard deviation of the bivariate normal [default: 10].
    #[arg(long)]
    pub sigma1: Option<f64>,
    /// Smaller standard deviation of the bivariate normal [default: 1].
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Cauchy scale [default: 20].
    #[arg(long)]
    pub sigma0: Option<f64>,
    /// Laplace prior scale; 0 for plain maximum likelihood [default: 1000].
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Step rule (counterexample: fixed-step, exact-step, scaled-newton) or
    /// one-step map (mc-equivalence: prox-gradient, prox-descent)
    /// [default: fixed-step / prox-gradient].
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    /// Nuclear-norm penalty; repeat for a sweep [default: 0.6, 0.4, 0.25, 0.15
    /// times the smallest penalty with a zero solution].
    #[arg(long = "lambda", allow_negative_numbers = true)]
    pub lambdas: Vec<f64>,
    /// Constant c of the c / sqrt(n) stopping rule [default: 1].
    #[arg(long)]
    pub stopping_c: Option<f64>,
    /// Time segments for edge-list binning [default: 49].
    #[arg(long)]
    pub segments: Option<usize>,
    /// Edge-list file; without it `lowrank` uses a synthetic instance.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Synthetic instance size [default: 50].
    #[arg(long)]
    pub synthetic_n: Option<usize>,
    /// Synthetic instance rank [default: 3].
    #[arg(long)]
    pub synthetic_rank: Option<usize>,
    /// Outer iteration cap for full solver runs [default: 200].
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// TOML file with any of the keys above (kebab-case).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    format: Option<Format>,
    replicates: Option<usize>,
    sample_sizes: Option<Vec<usize>>,
    sigma1: Option<f64>,
    sigma2: Option<f64>,
    sigma0: Option<f64>,
    gamma: Option<f64>,
    mode: Option<Mode>,
    lambda: Option<Vec<f64>>,
    stopping_c: Option<f64>,
    segments: Option<usize>,
    dataset: Option<PathBuf>,
    synthetic_n: Option<usize>,
    synthetic_rank: Option<usize>,
    max_iter: Option<usize>,
}

/// Fully resolved and validated configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub out: PathBuf,
    pub format: Format,
    pub replicates: usize,
    pub sample_sizes: Vec<usize>,
    pub sigma1: f64,
    pub sigma2: f64,
    pub sigma0: f64,
    pub gamma: Option<f64>,
    pub mode: Mode,
    pub lambdas: Vec<f64>,
    pub stopping_c: f64,
    pub segments: usize,
    pub dataset: Option<PathBuf>,
    pub synthetic_n: usize,
    pub synthetic_rank: usize,
    pub max_iter: usize,
}

fn read_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e
            .span()
            .map(|s| text[..s.start].lines().count().max(1))
            .unwrap_or(0),
        message: e.message().to_string(),
    })
}

impl RunConfig {
    pub fn resolve(args: Args) -> Result<Self> {
        let file = match &args.config {
            Some(p) => read_config(p)?,
            None => FileConfig::default(),
        };
        let cmd = args.command;
        let replicates_default = match cmd {
            Command::McEquivalence => 500,
            Command::Counterexample => 10_000,
            Command::StopCondAudit => 100,
            Command::ProxCheck => 1000,
            Command::Lowrank => 1,
        };
        let sizes_default = match cmd {
            Command::Counterexample => vec![100, 10_000],
            _ => vec![200, 800, 3200, 12800],
        };
        let mode_default = match cmd {
            Command::McEquivalence => Mode::ProxGradient,
            _ => Mode::FixedStep,
        };
        let gamma = args.gamma.or(file.gamma).unwrap_or(1000.0);
        let cfg = RunConfig {
            command: cmd,
            seed: args.seed.or(file.seed).unwrap_or(1),
            out: args.out.or(file.out).unwrap_or_else(|| PathBuf::from("-")),
            format: args.format.or(file.format).unwrap_or(Format::Csv),
            replicates: args.replicates.or(file.replicates).unwrap_or(replicates_default),
            sample_sizes: args.sample_sizes.or(file.sample_sizes).unwrap_or(sizes_default),
            sigma1: args.sigma1.or(file.sigma1).unwrap_or(10.0),
            sigma2: args.sigma2.or(file.sigma2).unwrap_or(1.0),
            sigma0: args.sigma0.or(file.sigma0).unwrap_or(20.0),
            gamma: (gamma != 0.0).then_some(gamma),
            mode: args.mode.or(file.mode).unwrap_or(mode_default),
            lambdas: if args.lambdas.is_empty() {
                file.lambda.unwrap_or_default()
            } else {
                args.lambdas
            },
            stopping_c: args.stopping_c.or(file.stopping_c).unwrap_or(1.0),
            segments: args.segments.or(file.segments).unwrap_or(DEFAULT_SEGMENTS),
            dataset: args.dataset.or(file.dataset),
            synthetic_n: args.synthetic_n.or(file.synthetic_n).unwrap_or(50),
            synthetic_rank: args.synthetic_rank.or(file.synthetic_rank).unwrap_or(3),
            max_iter: args.max_iter.or(file.max_iter).unwrap_or(200),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::contract(m.to_string()));
        if self.replicates == 0 {
            return bad("--replicates must be at least 1");
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return bad("--sample-sizes must be positive");
        }
        if !(self.sigma1 > self.sigma2 && self.sigma2 > 0.0 && self.sigma1.is_finite()) {
            return bad("need --sigma1 > --sigma2 > 0");
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad("--sigma0 must be positive");
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return bad("--gamma must be positive (0 disables the prior)");
            }
        }
        if !(self.stopping_c > 0.0 && self.stopping_c.is_finite()) {
            return bad("--stopping-c must be positive");
        }
        if self.segments == 0 {
            return bad("--segments must be at least 1");
        }
        if self.max_iter == 0 {
            return bad("--max-iter must be at least 1");
        }
        if self.lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
            return bad("--lambda values must be finite and nonnegative");
        }
        match self.command {
            Command::McEquivalence => {
                if !matches!(self.mode, Mode::ProxGradient | Mode::ProxDescent) {
                    return bad("mc-equivalence --mode must be prox-gradient or prox-descent");
                }
                if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
                    return bad("--sample-sizes must be strictly increasing");
                }
            }
            Command::Counterexample => {
                if !matches!(
                    self.mode,
                    Mode::FixedStep | Mode::ExactStep | Mode::ScaledNewton
                ) {
                    return bad(
                        "counterexample --mode must be fixed-step, exact-step or scaled-newton",
                    );
                }
            }
            Command::Lowrank => {
                if self.dataset.is_none()
                    && !(self.synthetic_rank >= 1 && self.synthetic_rank <= self.synthetic_n)
                {
                    return bad("need 1 <= --synthetic-rank <= --synthetic-n");
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Runs the command and returns a one-line human summary.
pub fn execute(cfg: &RunConfig) -> Result<String> {
    match cfg.command {
        Command::ProxCheck => {
            let rep = prox_check(cfg.replicates, cfg.seed)?;
            emit_report(&rep, &cfg.out, cfg.format)?;
            if rep.failures > 0 {
                return Err(Error::Validation(format!(
                    "{} of {} prox checks failed",
                    rep.failures,
                    rep.records.len()
                )));
            }
            Ok(format!("prox-check: {} checks passed", rep.records.len()))
        }
        Command::McEquivalence => {
            let model = CauchyModel::new(0.0, cfg.sigma0, cfg.gamma)?;
            let kind = match cfg.mode {
                Mode::ProxDescent => OseKind::ProxDescent,
                _ => OseKind::ProxGradientMap,
            };
            let mc = McConfig::new(model, cfg.sample_sizes.clone(), cfg.replicates, kind, cfg.seed);
            let rep = run_mc_equivalence(&mc)?;
            emit_report(&rep, &cfg.out, cfg.format)?;
            let medians: Vec<String> = rep
                .summaries
                .iter()
                .map(|s| format!("n={} median={:.4e}", s.n, s.median_ose))
                .collect();
            let mut line = format!("mc-equivalence: {}", medians.join(", "));
            let flagged = rep.ordering_violations();
            if !flagged.is_empty() {
                line.push_str(&format!(" (one step did not improve the median at n={flagged:?})"));
            }
            Ok(line)
        }
        Command::Counterexample => {
            let mode = match cfg.mode {
                Mode::ExactStep => CounterexampleMode::ExactStep,
                Mode::ScaledNewton => CounterexampleMode::ScaledNewton,
                _ => CounterexampleMode::FixedStep,
            };
            let closed_form = counterexample_closed_form(cfg.sigma1, cfg.sigma2)?;
            let runs = cfg
                .sample_sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    counterexample_monte_carlo(
                        cfg.sigma1,
                        cfg.sigma2,
                        n,
                        cfg.replicates,
                        mode,
                        cfg.seed.wrapping_add(i as u64),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let batch = CounterexampleBatch { closed_form, runs };
            emit_report(&batch, &cfg.out, cfg.format)?;
            let parts: Vec<String> = batch
                .runs
                .iter()
                .map(|r| {
                    format!(
                        "n={} p={:.4} (reference {:.4}, se {:.4})",
                        r.n, r.empirical_prob, r.closed_form_prob, r.std_error
                    )
                })
                .collect();
            Ok(format!("counterexample: {}", parts.join(", ")))
        }
        Command::Lowrank => {
            let model: LogisticMatrixModel = match &cfg.dataset {
                Some(path) => build_frequency_matrix(&parse_edge_list(path, cfg.segments)?, 0.0)?,
                None => {
                    synthetic_lowrank(
                        cfg.synthetic_n,
                        cfg.synthetic_rank,
                        cfg.segments,
                        0.0,
                        cfg.seed,
                    )?
                    .0
                }
            };
            let lam0 = lambda_zero_solution(&model);
            let lambdas = if cfg.lambdas.is_empty() {
                default_lambdas(lam0)
            } else {
                cfg.lambdas.clone()
            };
            let entries = lambda_sweep(&model, &lambdas, cfg.stopping_c, cfg.max_iter)?;
            let batch = LowRankBatch {
                node_count: model.n,
                lambda_zero_solution: lam0,
                entries,
            };
            emit_report(&batch, &cfg.out, cfg.format)?;
            let failed = batch.entries.iter().filter(|e| e.report.is_none()).count();
            if failed > 0 {
                return Err(Error::Validation(format!("{failed} of the penalty fits failed")));
            }
            let ranks: Vec<String> = batch
                .reports()
                .map(|r| format!("lambda={:.4} rank={}", r.lambda, r.final_rank))
                .collect();
            Ok(format!("lowrank (N={}): {}", model.n, ranks.join(", ")))
        }
        Command::StopCondAudit => {
            let rep = stop_cond_audit(cfg.replicates, cfg.seed)?;
            emit_report(&rep, &cfg.out, cfg.format)?;
            if rep.violations > 0 {
                return Err(Error::Validation(format!(
                    "{} of {} instances violate the stopping inequality",
                    rep.violations, rep.instances
                )));
            }
            Ok(format!(
                "stop-cond-audit: 0 of {} violations (larger branch constant: {} violations)",
                rep.instances, rep.violations_with_kappa_max
            ))
        }
    }
}

/// Descending sweep below the smallest penalty whose solution is zero.
pub fn default_lambdas(lambda_zero: f64) -> Vec<f64> {
    [0.6, 0.4, 0.25, 0.15]
        .iter()
        .map(|f| f * lambda_zero)
        .collect()
}

/// Parses `argv`, runs, and returns the process exit code. Errors are printed as
/// `error[category]: message`.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match RunConfig::resolve(args).and_then(|cfg| execute(&cfg)) {
        Ok(summary) => {
            eprintln!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(argv: &[&str]) -> Result<RunConfig> {
        let mut full = vec!["onestep"];
        full.extend_from_slice(argv);
        RunConfig::resolve(Args::try_parse_from(full).expect("valid argv"))
    }

    #[test]
    fn defaults_per_command() {
        let c = parse(&["counterexample"]).unwrap();
        assert_eq!(c.replicates, 10_000);
        assert_eq!(c.sample_sizes, vec![100, 10_000]);
        assert_eq!(c.mode, Mode::FixedStep);
        let m = parse(&["mc-equivalence"]).unwrap();
        assert_eq!(m.sample_sizes, vec![200, 800, 3200, 12800]);
        assert_eq!(m.replicates, 500);
        assert_eq!(m.gamma, Some(1000.0));
        assert_eq!(m.stopping_c, 1.0);
        assert_eq!(m.segments, 49);
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(&p, "seed = 9\nreplicates = 7\nsigma1 = 5.0\nlambda = [1.0, 2.0]\n").unwrap();
        let ps = p.to_str().unwrap();
        let c = parse(&["counterexample", "--config", ps, "--replicates", "3"]).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.replicates, 3);
        assert_eq!(c.sigma1, 5.0);
        assert_eq!(c.lambdas, vec![1.0, 2.0]);
    }

    #[test]
    fn unknown_config_keys_are_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.toml");
        std::fs::write(&p, "sede = 1\n").unwrap();
        let err = parse(&["prox-check", "--config", p.to_str().unwrap()]).unwrap_err();
        assert_eq!(err.category(), "parse");
    }

    #[test]
    fn validation_before_dispatch() {
        assert!(parse(&["counterexample", "--sigma1", "1", "--sigma2", "2"]).is_err());
        assert!(parse(&["mc-equivalence", "--mode", "fixed-step"]).is_err());
        assert!(parse(&["mc-equivalence", "--sample-sizes", "800,200"]).is_err());
        assert!(parse(&["lowrank", "--stopping-c", "0"]).is_err());
        assert!(parse(&["lowrank", "--lambda", "-1"]).is_err());
        let e = parse(&["prox-check", "--replicates", "0"]).unwrap_err();
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn gamma_zero_disables_prior() {
        assert_eq!(parse(&["mc-equivalence", "--gamma", "0"]).unwrap().gamma, None);
    }
}
