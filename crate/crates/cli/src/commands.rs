//! Command implementations: suite runs, grid scans, extremal search, the
//! height decomposition, and the DP-versus-enumeration oracle.

use std::sync::Arc;

use rayon::prelude::*;

use mpp_core::generators::{
    self, DyadicConfig, ScaleDist, SearchConfig, SearchTarget, StartKind,
};
use mpp_core::gundy::gundy_report;
use mpp_core::martingale::{AdaptedProcess, Martingale};
use mpp_core::paraproduct::Paraproduct;
use mpp_core::report::{self, CheckReport};
use mpp_core::space::{ExponentTriple, RandomVariable, SpaceDocument, StoppingSequence};
use mpp_core::variation::{
    brute_force_jump_count, brute_force_variation, jump_comparison_check, jump_count,
    jump_stopping_times, rho_variation, IncrementKernel, ParaproductKernel, ScalarKernel,
};
use mpp_core::verify;

use crate::config::{ConfigError, GeneratorKind, OutputFormat, RunConfig};

/// Seed offsets separating the `f`, `g`, and weight streams of one run seed.
const G_SEED_OFFSET: u64 = 0x9e37_79b9;
const W_SEED_OFFSET: u64 = 0x7f4a_7c15;

pub struct Inputs {
    pub f: Martingale,
    pub g: Martingale,
    pub w: RandomVariable,
    pub depth: u32,
    pub seed: u64,
    pub generator: String,
}

pub enum Outcome {
    /// Reports plus whether any bounded check failed.
    Reports(Vec<CheckReport>, bool),
    /// Pre-rendered text (search traces in CSV mode).
    Text(String, bool),
}

fn run_error(e: impl std::fmt::Display) -> ConfigError {
    ConfigError(format!("{e}"))
}

/// Builds the run inputs from the generator spec or a space document.
pub fn build_inputs(config: &RunConfig) -> Result<Inputs, ConfigError> {
    if let Some(path) = &config.space {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("space: cannot read {path}: {e}")))?;
        let (space, processes) = SpaceDocument::from_json(&text).map_err(run_error)?;
        let build = |name: &str| -> Result<Martingale, ConfigError> {
            let levels = processes
                .get(name)
                .ok_or_else(|| ConfigError(format!("space: missing process \"{name}\"")))?;
            Martingale::new(
                AdaptedProcess::from_level_values(space.clone(), levels.clone())
                    .map_err(run_error)?,
            )
            .map_err(run_error)
        };
        let f = build("f")?;
        let g = if processes.contains_key("g") { build("g")? } else { f.clone() };
        let w = match processes.get("w") {
            Some(levels) => {
                let proc = AdaptedProcess::from_level_values(space.clone(), levels.clone())
                    .map_err(run_error)?;
                proc.terminal()
            }
            None => RandomVariable::constant(space.clone(), 1.0),
        };
        let depth = space.depth() as u32;
        return Ok(Inputs { f, g, w, depth, seed: 0, generator: "space".into() });
    }

    let spec = &config.generator;
    let depth = spec.depth.expect("validated");
    match spec.kind {
        GeneratorKind::Rademacher => {
            let f = generators::rademacher_walk(depth);
            let w = RandomVariable::constant(f.space().clone(), 1.0);
            Ok(Inputs {
                g: f.clone(),
                w,
                f,
                depth,
                seed: spec.seed,
                generator: "rademacher".into(),
            })
        }
        GeneratorKind::Random => {
            let make = |seed: u64| {
                generators::random_dyadic_with(&DyadicConfig {
                    depth,
                    seed,
                    scale: ScaleDist::LogNormal { sigma: 1.0 },
                    start: StartKind::Zero,
                    bias: spec.bias,
                })
                .map_err(run_error)
            };
            let f = make(spec.seed)?;
            let g = make(spec.seed.wrapping_add(G_SEED_OFFSET))?;
            let w = generators::random_weight(f.space(), spec.seed.wrapping_add(W_SEED_OFFSET));
            Ok(Inputs { f, g, w, depth, seed: spec.seed, generator: "random".into() })
        }
    }
}

/// Subtracts the initial value, for the checks that require `f_0 = 0`.
fn centered(f: &Martingale) -> Martingale {
    let space = f.space().clone();
    let levels = f
        .process()
        .levels()
        .iter()
        .enumerate()
        .map(|(n, level)| {
            level
                .iter()
                .enumerate()
                .map(|(b, &v)| {
                    let mut root = b;
                    for m in (1..=n).rev() {
                        root = space.parent_atom(m, root);
                    }
                    v - f.process().level_values(0)[root]
                })
                .collect()
        })
        .collect();
    Martingale::new(AdaptedProcess::from_level_values(space, levels).expect("same shape"))
        .expect("centering preserves the tower property")
}

fn localization(inputs: &Inputs, lambda: f64) -> Result<StoppingSequence, ConfigError> {
    let depth = inputs.f.depth();
    Ok(jump_stopping_times(&inputs.f, &inputs.g, lambda, depth)
        .map_err(run_error)?
        .capped()
        .clone())
}

type Job = Box<dyn Fn() -> Result<Vec<CheckReport>, mpp_core::Error> + Send + Sync>;

fn run_jobs(jobs: Vec<Job>) -> Result<Vec<CheckReport>, ConfigError> {
    let results: Result<Vec<Vec<CheckReport>>, mpp_core::Error> =
        jobs.par_iter().map(|job| job()).collect();
    let mut reports: Vec<CheckReport> = results.map_err(run_error)?.into_iter().flatten().collect();
    report::sort_reports(&mut reports);
    Ok(reports)
}

fn attach_meta(inputs: &Inputs, reports: Vec<CheckReport>) -> Vec<CheckReport> {
    reports
        .into_iter()
        .map(|r| r.with_meta(Some(inputs.depth), Some(inputs.seed), Some(&inputs.generator)))
        .collect()
}

/// One pass of every check at the given parameters.
fn suite_jobs(
    inputs: Arc<Inputs>,
    seq: Arc<StoppingSequence>,
    p: f64,
    q: f64,
    rho: f64,
    lambda: f64,
    alpha_factor: f64,
) -> Result<Vec<Job>, ConfigError> {
    let exps = ExponentTriple::new(p, q).map_err(run_error)?;
    let g_l1 = inputs.g.lp_norm(1.0).map_err(run_error)?;
    let alpha = if g_l1 > 0.0 { alpha_factor * g_l1 } else { alpha_factor };
    let mut jobs: Vec<Job> = Vec::new();
    let push = |jobs: &mut Vec<Job>, job: Job| jobs.push(job);

    let i = inputs.clone();
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_lepingle(&i.f, p, rho)?])));
    let i = inputs.clone();
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_bourgain_jump(&i.f, p, lambda)?])));
    let i = inputs.clone();
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_doob(&i.f, p)?])));
    let i = inputs.clone();
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_weighted_doob(&i.f, &i.w, p)?])));
    let i = inputs.clone();
    push(&mut jobs, Box::new(move || Ok(verify::check_bdg(&centered(&i.f), p)?.to_vec())));
    let i = inputs.clone();
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_weighted_bdg(&centered(&i.f), &i.w)?])));
    let i = inputs.clone();
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_chao_long_max(&i.f, &i.g, &exps)?])));
    let (i, s) = (inputs.clone(), seq.clone());
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_vector_doob(&i.f, &s, p, q)?])));
    let (i, s) = (inputs.clone(), seq.clone());
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_localized_maximal(&i.f, &s, p)?])));
    let (i, s) = (inputs.clone(), seq.clone());
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_localized_square(&i.f, &s, p)?])));
    let (i, s) = (inputs.clone(), seq.clone());
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_prop_l1(&i.f, &i.g, &s, &exps)?])));
    let i = inputs.clone();
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_thm_variation(&i.f, &i.g, &exps, rho)?])));
    let i = inputs.clone();
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_thm_jump(&i.f, &i.g, &exps, lambda)?])));
    let i = inputs.clone();
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_rough_variation(&i.f, &i.g, p, rho)?])));
    let i = inputs.clone();
    push(&mut jobs, Box::new(move || Ok(vec![verify::check_rough_jump(&i.f, &i.g, p, lambda)?])));
    let i = inputs.clone();
    push(&mut jobs, Box::new(move || gundy_report(&i.g, alpha)));
    Ok(jobs)
}

/// `verify`: the full suite once, at the first value of each grid.
pub fn cmd_verify(config: &RunConfig) -> Result<Outcome, ConfigError> {
    let inputs = Arc::new(build_inputs(config)?);
    let (p, q) = (config.p[0], config.q[0]);
    let (rho, lambda, alpha) = (config.rho[0], config.lambda[0], config.alpha[0]);
    let seq = Arc::new(localization(&inputs, lambda)?);
    let mut jobs = suite_jobs(inputs.clone(), seq, p, q, rho, lambda, alpha)?;
    let (i, n_max) = (inputs.clone(), inputs.f.depth());
    jobs.push(Box::new(move || {
        // leaf-wise jump domination; lhs counts violating leaves
        let cmp = jump_comparison_check(&i.f, &i.g, lambda, n_max)?;
        let violations = cmp.holds.iter().filter(|&&ok| !ok).count() as f64;
        Ok(vec![CheckReport::from_sides("jump_comparison", violations, 1.0, Some(0.0))
            .with_lambda(lambda)])
    }));
    let reports = attach_meta(&inputs, run_jobs(jobs)?);
    let failed = bounded_failure(&reports, config);
    Ok(Outcome::Reports(reports, failed))
}

/// `scan`: the Cartesian grid of checks over all configured parameters.
pub fn cmd_scan(config: &RunConfig) -> Result<Outcome, ConfigError> {
    let inputs = Arc::new(build_inputs(config)?);
    let seq = Arc::new(localization(&inputs, config.lambda[0])?);
    let mut jobs: Vec<Job> = Vec::new();

    for &p in &config.p {
        let i = inputs.clone();
        jobs.push(Box::new(move || Ok(vec![verify::check_doob(&i.f, p)?])));
        let i = inputs.clone();
        jobs.push(Box::new(move || Ok(vec![verify::check_weighted_doob(&i.f, &i.w, p)?])));
        let i = inputs.clone();
        jobs.push(Box::new(move || Ok(verify::check_bdg(&centered(&i.f), p)?.to_vec())));
        for &rho in &config.rho {
            let i = inputs.clone();
            jobs.push(Box::new(move || Ok(vec![verify::check_lepingle(&i.f, p, rho)?])));
            let i = inputs.clone();
            jobs.push(Box::new(move || {
                Ok(vec![verify::check_rough_variation(&i.f, &i.g, p, rho)?])
            }));
        }
        for &lambda in &config.lambda {
            let i = inputs.clone();
            jobs.push(Box::new(move || Ok(vec![verify::check_bourgain_jump(&i.f, p, lambda)?])));
            let i = inputs.clone();
            jobs.push(Box::new(move || Ok(vec![verify::check_rough_jump(&i.f, &i.g, p, lambda)?])));
        }
        for &q in &config.q {
            let exps = ExponentTriple::new(p, q).map_err(run_error)?;
            let i = inputs.clone();
            jobs.push(Box::new(move || Ok(vec![verify::check_chao_long_max(&i.f, &i.g, &exps)?])));
            let (i, s) = (inputs.clone(), seq.clone());
            jobs.push(Box::new(move || Ok(vec![verify::check_vector_doob(&i.f, &s, p, q)?])));
            let (i, s) = (inputs.clone(), seq.clone());
            jobs.push(Box::new(move || Ok(vec![verify::check_prop_l1(&i.f, &i.g, &s, &exps)?])));
            for &rho in &config.rho {
                let i = inputs.clone();
                jobs.push(Box::new(move || {
                    Ok(vec![verify::check_thm_variation(&i.f, &i.g, &exps, rho)?])
                }));
            }
            for &lambda in &config.lambda {
                let i = inputs.clone();
                jobs.push(Box::new(move || {
                    Ok(vec![verify::check_thm_jump(&i.f, &i.g, &exps, lambda)?])
                }));
            }
        }
        let (i, s) = (inputs.clone(), seq.clone());
        jobs.push(Box::new(move || Ok(vec![verify::check_localized_maximal(&i.f, &s, p)?])));
        let (i, s) = (inputs.clone(), seq.clone());
        jobs.push(Box::new(move || Ok(vec![verify::check_localized_square(&i.f, &s, p)?])));
    }
    let i = inputs.clone();
    jobs.push(Box::new(move || Ok(vec![verify::check_weighted_bdg(&centered(&i.f), &i.w)?])));

    for &lambda in &config.lambda {
        let (i, n_max) = (inputs.clone(), inputs.f.depth());
        jobs.push(Box::new(move || {
            let cmp = jump_comparison_check(&i.f, &i.g, lambda, n_max)?;
            let violations = cmp.holds.iter().filter(|&&ok| !ok).count() as f64;
            Ok(vec![CheckReport::from_sides("jump_comparison", violations, 1.0, Some(0.0))
                .with_lambda(lambda)])
        }));
    }

    let g_l1 = inputs.g.lp_norm(1.0).map_err(run_error)?;
    for &factor in &config.alpha {
        let alpha = if g_l1 > 0.0 { factor * g_l1 } else { factor };
        let i = inputs.clone();
        jobs.push(Box::new(move || gundy_report(&i.g, alpha)));
    }

    let reports = attach_meta(&inputs, run_jobs(jobs)?);
    let failed = bounded_failure(&reports, config);
    Ok(Outcome::Reports(reports, failed))
}

/// `search`: hill climbing toward ratio-extremal inputs for one target.
pub fn cmd_search(config: &RunConfig) -> Result<Outcome, ConfigError> {
    let id = config.target.as_deref().expect("validated");
    let target = SearchTarget::parse(id).map_err(run_error)?;
    let cfg = SearchConfig {
        target,
        depth: config.generator.depth.expect("validated"),
        iterations: config.iterations,
        restarts: config.restarts,
        seed: config.generator.seed,
        p: config.p[0],
        q: config.q[0],
        rho: config.rho[0],
        lambda: config.lambda[0],
    };
    match generators::ratio_search(&cfg) {
        Ok(outcome) => {
            eprintln!(
                "search {}: best ratio {} (restart {})",
                target.id(),
                outcome.best_ratio,
                outcome.best_restart
            );
            match config.format {
                OutputFormat::Csv => {
                    Ok(Outcome::Text(generators::trace_to_csv(&outcome.trace), false))
                }
                OutputFormat::Json => {
                    let value = serde_json::json!({
                        "target": target.id(),
                        "best_ratio": outcome.best_ratio,
                        "best_restart": outcome.best_restart,
                        "best_scales": outcome.best_params.scales,
                        "best_scales_g": outcome.best_params_g.map(|g| g.scales),
                        "best_weight": outcome.best_weight,
                        "report": outcome.report,
                        "trace": outcome.trace.iter().map(|t| serde_json::json!({
                            "restart": t.restart,
                            "iteration": t.iteration,
                            "ratio": t.ratio,
                            "accepted": t.accepted,
                        })).collect::<Vec<_>>(),
                    });
                    Ok(Outcome::Text(
                        serde_json::to_string_pretty(&value).map_err(run_error)? + "\n",
                        false,
                    ))
                }
            }
        }
        Err(e @ mpp_core::Error::SearchBoundViolation { .. }) => {
            eprintln!("{e}");
            Ok(Outcome::Text(String::new(), true))
        }
        Err(e) => Err(run_error(e)),
    }
}

/// `decompose`: the height decomposition at every configured height
/// (multiples of `‖g‖₁`).
pub fn cmd_decompose(config: &RunConfig) -> Result<Outcome, ConfigError> {
    let inputs = build_inputs(config)?;
    let g_l1 = inputs.g.lp_norm(1.0).map_err(run_error)?;
    let mut reports = Vec::new();
    for &factor in &config.alpha {
        let alpha = if g_l1 > 0.0 { factor * g_l1 } else { factor };
        reports.extend(gundy_report(&inputs.g, alpha).map_err(run_error)?);
    }
    report::sort_reports(&mut reports);
    let reports = attach_meta(&inputs, reports);
    let failed = bounded_failure(&reports, config);
    Ok(Outcome::Reports(reports, failed))
}

/// `oracle`: DP versus exhaustive enumeration on freshly generated kernels.
pub fn cmd_oracle(config: &RunConfig) -> Result<Outcome, ConfigError> {
    let spec = &config.generator;
    let max_depth = spec.depth.expect("validated");
    let rhos = [0.7, 1.0, 1.5, 2.0, 3.0];
    let lambdas = [0.25, 0.5, 1.0, 2.0, 4.0];

    let instances: Vec<u64> = (0..config.count as u64).collect();
    let results: Result<Vec<Vec<CheckReport>>, mpp_core::Error> = instances
        .par_iter()
        .map(|&i| {
            let seed = spec.seed.wrapping_add(i);
            let depth = 2 + (seed % u64::from(max_depth.max(3) - 1)) as u32;
            let rho = rhos[(i as usize) % rhos.len()];
            let lambda = lambdas[(i as usize) % lambdas.len()];
            let reports = match i % 3 {
                0 => {
                    let sp = generators::random_tree_space(seed, depth as usize, 10);
                    let f = generators::random_martingale(&sp, seed);
                    let k = ScalarKernel::new(f.process());
                    oracle_rows(&k, rho, lambda)?
                }
                1 => {
                    let f = generators::random_dyadic(depth, seed, ScaleDist::LogNormal { sigma: 1.0 });
                    let g = generators::random_dyadic(
                        depth,
                        seed.wrapping_add(G_SEED_OFFSET),
                        ScaleDist::LogNormal { sigma: 1.0 },
                    );
                    let k = ParaproductKernel::new(Paraproduct::new(&f, &g)?);
                    oracle_rows(&k, rho, lambda)?
                }
                _ => {
                    let f = generators::random_dyadic(depth, seed, ScaleDist::LogNormal { sigma: 1.0 });
                    let g = generators::random_dyadic(
                        depth,
                        seed.wrapping_add(G_SEED_OFFSET),
                        ScaleDist::LogNormal { sigma: 1.0 },
                    );
                    let k = mpp_core::heisenberg::RoughKernel::new(&f, &g)?;
                    oracle_rows(&k, rho, lambda)?
                }
            };
            Ok(reports
                .into_iter()
                .map(|r| {
                    r.with_meta(Some(depth), Some(seed), Some("oracle"))
                        .with_rho(rho)
                        .with_lambda(lambda)
                })
                .collect())
        })
        .collect();
    let mut reports: Vec<CheckReport> =
        results.map_err(run_error)?.into_iter().flatten().collect();
    report::sort_reports(&mut reports);
    let failed = reports.iter().any(|r| !r.pass);
    Ok(Outcome::Reports(reports, failed))
}

/// Compares DP and enumeration; `lhs` is the largest absolute deviation,
/// `ratio` the largest relative one, bounded by `1e-12`.
fn oracle_rows<K: IncrementKernel>(
    kernel: &K,
    rho: f64,
    lambda: f64,
) -> Result<Vec<CheckReport>, mpp_core::Error> {
    let mut rows = Vec::with_capacity(2);
    let dp = rho_variation(kernel, rho)?;
    let bf = brute_force_variation(kernel, rho)?;
    rows.push(oracle_row("oracle_variation", &dp, &bf));
    let dp = jump_count(kernel, lambda)?;
    let bf = brute_force_jump_count(kernel, lambda)?;
    rows.push(oracle_row("oracle_jump", &dp, &bf));
    Ok(rows)
}

fn oracle_row(id: &str, dp: &RandomVariable, bf: &RandomVariable) -> CheckReport {
    let mut abs = 0.0f64;
    let mut scale = 1.0f64;
    for (a, b) in dp.values().iter().zip(bf.values()) {
        abs = abs.max((a - b).abs());
        scale = scale.max(b.abs());
    }
    let mut report = CheckReport::from_sides(id, abs, scale, Some(1e-12));
    report.pass = report.ratio <= 1e-12;
    report
}

fn bounded_failure(reports: &[CheckReport], config: &RunConfig) -> bool {
    let slack = config.tolerance.unwrap_or(1e-9);
    reports.iter().any(|r| match r.bound {
        Some(b) => r.ratio > b * (1.0 + slack),
        None => false,
    })
}

/// Renders reports in the configured format.
pub fn render(reports: &[CheckReport], format: OutputFormat) -> Result<String, ConfigError> {
    match format {
        OutputFormat::Csv => Ok(report::to_csv(reports)),
        OutputFormat::Json => {
            let mut text = report::to_json(reports).map_err(run_error)?;
            text.push('\n');
            Ok(text)
        }
    }
}
