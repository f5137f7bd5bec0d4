//! Martingale families on dyadic spaces, random test objects, and
//! hill-climbing search for ratio-extremal martingales.
//!
//! All randomness flows through `ChaCha8` streams seeded from a `u64`, so
//! identical seeds reproduce identical objects on every platform.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Uniform};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::martingale::{AdaptedProcess, Martingale};
use crate::report::CheckReport;
use crate::space::{FilteredSpace, RandomVariable, StoppingSequence, StoppingTime};
use crate::verify;

/// Distribution of the per-node difference scales `a_v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleDist {
    /// Every scale equal to 1.
    Unit,
    /// `exp(N(0, sigma²))`.
    LogNormal { sigma: f64 },
    /// Uniform on `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
}

impl ScaleDist {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ScaleDist::Unit => 1.0,
            ScaleDist::LogNormal { sigma } => {
                LogNormal::new(0.0, sigma).expect("valid sigma").sample(rng)
            }
            ScaleDist::Uniform { lo, hi } => Uniform::new(lo, hi).sample(rng),
        }
    }
}

/// Initial value of a generated martingale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StartKind {
    Zero,
    /// Drawn from the scale distribution with a random sign.
    Random,
}

/// Full configuration of the dyadic generator.
#[derive(Debug, Clone)]
pub struct DyadicConfig {
    pub depth: u32,
    pub seed: u64,
    pub scale: ScaleDist,
    pub start: StartKind,
    /// Conditional probability of the left child; `None` means 1/2.
    pub bias: Option<f64>,
}

/// One free scale per internal node of a dyadic tree of the given depth;
/// the node at level `n`, position `a` induces child increments `±a_v`
/// (conditional probabilities 1/2, 1/2), so the process is a martingale by
/// construction.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicMartingaleParams {
    pub depth: u32,
    pub start: f64,
    /// Scales in breadth-first order: node `(n, a)` sits at `2^n - 1 + a`.
    pub scales: Vec<f64>,
}

impl DyadicMartingaleParams {
    pub fn parameter_count(depth: u32) -> usize {
        (1usize << depth) - 1
    }

    pub fn flat(depth: u32, start: f64, value: f64) -> Self {
        DyadicMartingaleParams {
            depth,
            start,
            scales: vec![value; Self::parameter_count(depth)],
        }
    }

    fn node_index(n: usize, a: usize) -> usize {
        (1usize << n) - 1 + a
    }

    /// Materializes the martingale on the unbiased dyadic space.
    pub fn build(&self) -> Martingale {
        self.build_biased(0.5).expect("unbiased build cannot fail")
    }

    /// Materializes on the `theta`-biased dyadic space; increments are
    /// `+2(1-θ) a_v` (left) and `-2θ a_v` (right), which have conditional
    /// mean zero.
    pub fn build_biased(&self, theta: f64) -> Result<Martingale> {
        assert_eq!(self.scales.len(), Self::parameter_count(self.depth));
        let space = if theta == 0.5 {
            FilteredSpace::dyadic(self.depth)
        } else {
            FilteredSpace::dyadic_biased(self.depth, theta)?
        };
        let mut levels: Vec<Vec<f64>> = vec![vec![self.start]];
        for n in 1..=self.depth as usize {
            let prev = &levels[n - 1];
            let vals = (0..(1usize << n))
                .map(|b| {
                    let parent = b >> 1;
                    let a = self.scales[Self::node_index(n - 1, parent)];
                    let inc = if b & 1 == 0 { 2.0 * (1.0 - theta) * a } else { -2.0 * theta * a };
                    prev[parent] + inc
                })
                .collect();
            levels.push(vals);
        }
        Martingale::new(AdaptedProcess::from_level_values(space, levels)?)
    }
}

/// The standard walk with every `a_v = 1`: each difference is `±1`.
pub fn rademacher_walk(depth: u32) -> Martingale {
    DyadicMartingaleParams::flat(depth, 0.0, 1.0).build()
}

/// A reproducible random dyadic martingale with `f_0 = 0`.
pub fn random_dyadic(depth: u32, seed: u64, scale: ScaleDist) -> Martingale {
    random_dyadic_with(&DyadicConfig { depth, seed, scale, start: StartKind::Zero, bias: None })
        .expect("unbiased generation cannot fail")
}

/// Random dyadic martingale with full control over start and bias. Scales are
/// drawn in breadth-first node order from a `ChaCha8` stream.
pub fn random_dyadic_with(config: &DyadicConfig) -> Result<Martingale> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let start = match config.start {
        StartKind::Zero => 0.0,
        StartKind::Random => {
            let mag = config.scale.sample(&mut rng);
            if rng.gen_bool(0.5) {
                mag
            } else {
                -mag
            }
        }
    };
    let count = DyadicMartingaleParams::parameter_count(config.depth);
    let scales = (0..count).map(|_| config.scale.sample(&mut rng)).collect();
    let params = DyadicMartingaleParams { depth: config.depth, start, scales };
    params.build_biased(config.bias.unwrap_or(0.5))
}

/// A reproducible random refining tree: arbitrary leaf count and depth, built
/// by coarsening the singleton partition level by level.
pub fn random_tree_space(seed: u64, max_depth: usize, max_leaves: usize) -> Arc<FilteredSpace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let leaves = rng.gen_range(2..=max_leaves.max(2));
    let depth = rng.gen_range(1..=max_depth.max(1));
    let raw: Vec<f64> = (0..leaves).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();

    let mut atoms: Vec<Vec<usize>> = (0..leaves).map(|l| vec![l]).collect();
    let mut levels: Vec<Vec<Vec<usize>>> = vec![atoms.clone()];
    for _ in 0..depth {
        // merge a random number of atom pairs to coarsen
        let merges = rng.gen_range(0..=atoms.len() / 2);
        for _ in 0..merges {
            if atoms.len() < 2 {
                break;
            }
            let i = rng.gen_range(0..atoms.len());
            let mut j = rng.gen_range(0..atoms.len() - 1);
            if j >= i {
                j += 1;
            }
            let mut merged = atoms[i].clone();
            merged.extend_from_slice(&atoms[j]);
            merged.sort_unstable();
            let (lo, hi) = (i.min(j), i.max(j));
            atoms.remove(hi);
            atoms.remove(lo);
            atoms.push(merged);
        }
        levels.push(atoms.clone());
    }
    levels.reverse();
    FilteredSpace::new(probs, levels).expect("construction is valid by design")
}

/// A reproducible random martingale on an arbitrary space, closed from
/// random terminal values.
pub fn random_martingale(space: &Arc<FilteredSpace>, seed: u64) -> Martingale {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..space.leaf_count()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let h = RandomVariable::new(space.clone(), vals).expect("leaf count matches");
    Martingale::from_terminal(&h)
}

/// A nonnegative random weight with reproducible leaf values.
pub fn random_weight(space: &Arc<FilteredSpace>, seed: u64) -> RandomVariable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals: Vec<f64> = (0..space.leaf_count())
        .map(|_| LogNormal::new(0.0, 1.0).unwrap().sample(&mut rng))
        .collect();
    RandomVariable::new(space.clone(), vals).expect("leaf count matches")
}

/// Stopping sequence of first-crossing times `T_k = min {n : |u_n| > c_k}`
/// (capped at the horizon) for increasing thresholds `c_1 <= c_2 <= …`.
pub fn crossing_sequence(aux: &Martingale, thresholds: &[f64]) -> Result<StoppingSequence> {
    let space = aux.space().clone();
    let depth = space.depth();
    let mut times = vec![StoppingTime::constant(space.clone(), 0)?];
    let mut sorted = thresholds.to_vec();
    sorted.sort_by(f64::total_cmp);
    for &c in &sorted {
        let leaf_times: Vec<usize> = (0..space.leaf_count())
            .map(|leaf| {
                (0..=depth)
                    .find(|&n| aux.process().value_at(n, leaf).abs() > c)
                    .unwrap_or(depth)
            })
            .collect();
        times.push(StoppingTime::new(space.clone(), leaf_times)?);
    }
    StoppingSequence::new(times)
}

/// A random stopping sequence with `windows` localization windows.
pub fn random_stopping_sequence(
    space: &Arc<FilteredSpace>,
    seed: u64,
    windows: usize,
) -> Result<StoppingSequence> {
    let aux = random_martingale(space, seed ^ 0x5eed_5eed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut thresholds: Vec<f64> = (0..windows).map(|_| rng.gen_range(0.0..2.0)).collect();
    thresholds.sort_by(f64::total_cmp);
    crossing_sequence(&aux, &thresholds)
}

/// Searchable inequality targets. Bounded targets carry the explicit
/// constant of the underlying estimate; the search refuses to report a
/// ratio above it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SearchTarget {
    Doob,
    WeightedDoob,
    WeightedBdg,
    Lepingle,
    BourgainJump,
    BdgMaxOverSquare,
    BdgSquareOverMax,
    ChaoLongMax,
    ThmVariation,
    ThmJump,
    RoughVariation,
    RoughJump,
}

impl SearchTarget {
    pub fn parse(id: &str) -> Result<Self> {
        Ok(match id {
            "doob" => SearchTarget::Doob,
            "weighted_doob" => SearchTarget::WeightedDoob,
            "weighted_bdg" => SearchTarget::WeightedBdg,
            "lepingle" => SearchTarget::Lepingle,
            "bourgain_jump" => SearchTarget::BourgainJump,
            "bdg_max_over_square" => SearchTarget::BdgMaxOverSquare,
            "bdg_square_over_max" => SearchTarget::BdgSquareOverMax,
            "chao_long_max" => SearchTarget::ChaoLongMax,
            "thm_variation" => SearchTarget::ThmVariation,
            "thm_jump" => SearchTarget::ThmJump,
            "rough_variation" => SearchTarget::RoughVariation,
            "rough_jump" => SearchTarget::RoughJump,
            other => return Err(Error::UnknownCheckId(other.to_string())),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            SearchTarget::Doob => "doob",
            SearchTarget::WeightedDoob => "weighted_doob",
            SearchTarget::WeightedBdg => "weighted_bdg",
            SearchTarget::Lepingle => "lepingle",
            SearchTarget::BourgainJump => "bourgain_jump",
            SearchTarget::BdgMaxOverSquare => "bdg_max_over_square",
            SearchTarget::BdgSquareOverMax => "bdg_square_over_max",
            SearchTarget::ChaoLongMax => "chao_long_max",
            SearchTarget::ThmVariation => "thm_variation",
            SearchTarget::ThmJump => "thm_jump",
            SearchTarget::RoughVariation => "rough_variation",
            SearchTarget::RoughJump => "rough_jump",
        }
    }

    fn is_bilinear(&self) -> bool {
        matches!(
            self,
            SearchTarget::ChaoLongMax
                | SearchTarget::ThmVariation
                | SearchTarget::ThmJump
                | SearchTarget::RoughVariation
                | SearchTarget::RoughJump
        )
    }

    fn needs_weight(&self) -> bool {
        matches!(self, SearchTarget::WeightedDoob | SearchTarget::WeightedBdg)
    }

    /// Explicit constant for targets backed by sharp-constant estimates.
    pub fn bound(&self, p: f64) -> Option<f64> {
        match self {
            SearchTarget::Doob | SearchTarget::WeightedDoob => Some(crate::space::conjugate(p)),
            SearchTarget::WeightedBdg => Some(16.0 * (2f64.sqrt() + 1.0)),
            _ => None,
        }
    }
}

/// Search configuration; unused exponents may stay at their defaults.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub target: SearchTarget,
    pub depth: u32,
    pub iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    pub p: f64,
    pub q: f64,
    pub rho: f64,
    pub lambda: f64,
}

impl SearchConfig {
    pub fn new(target: SearchTarget, depth: u32) -> Self {
        SearchConfig {
            target,
            depth,
            iterations: 200,
            restarts: 4,
            seed: 0,
            p: 2.0,
            q: 2.0,
            rho: 1.5,
            lambda: 1.0,
        }
    }
}

/// One accepted or rejected proposal in a search chain.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub restart: usize,
    pub iteration: usize,
    pub ratio: f64,
    pub accepted: bool,
}

/// Result of a ratio search.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub target: SearchTarget,
    pub best_ratio: f64,
    pub best_params: DyadicMartingaleParams,
    /// Second-factor parameters for bilinear targets.
    pub best_params_g: Option<DyadicMartingaleParams>,
    /// Weight leaf values for weighted targets.
    pub best_weight: Option<Vec<f64>>,
    pub best_restart: usize,
    pub trace: Vec<TraceRow>,
    pub report: CheckReport,
}

/// Renders a search trace as CSV (`restart,iteration,ratio,accepted`).
pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("restart,iteration,ratio,accepted\n");
    for row in trace {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.restart,
            row.iteration,
            crate::report::format_float(row.ratio),
            row.accepted
        ));
    }
    out
}

struct SearchState {
    f: DyadicMartingaleParams,
    g: Option<DyadicMartingaleParams>,
    w: Option<Vec<f64>>,
}

impl SearchState {
    fn coordinate_count(&self) -> usize {
        self.f.scales.len()
            + self.g.as_ref().map_or(0, |g| g.scales.len())
            + self.w.as_ref().map_or(0, Vec::len)
    }

    fn perturb(&mut self, coord: usize, factor: f64) {
        let nf = self.f.scales.len();
        if coord < nf {
            self.f.scales[coord] *= factor;
            return;
        }
        let coord = coord - nf;
        if let Some(g) = self.g.as_mut() {
            if coord < g.scales.len() {
                g.scales[coord] *= factor;
                return;
            }
        }
        let coord = coord - self.g.as_ref().map_or(0, |g| g.scales.len());
        if let Some(w) = self.w.as_mut() {
            w[coord] *= factor;
        }
    }

    /// Rescales so that `‖f‖_p = 1` (and `‖g‖_q = 1`, `E w = 1`); every
    /// target ratio is invariant under these scalings.
    fn renormalize(&mut self, cfg: &SearchConfig, space: &Arc<FilteredSpace>) -> Result<()> {
        let norm = self.f.build().lp_norm(cfg.p)?;
        if norm > 0.0 {
            for a in self.f.scales.iter_mut() {
                *a /= norm;
            }
        }
        if let Some(g) = self.g.as_mut() {
            let norm = g.build().lp_norm(cfg.q)?;
            if norm > 0.0 {
                for a in g.scales.iter_mut() {
                    *a /= norm;
                }
            }
        }
        if let Some(w) = self.w.as_mut() {
            let mean: f64 = w.iter().zip(space.leaf_probs()).map(|(v, p)| v * p).sum();
            if mean > 0.0 {
                for v in w.iter_mut() {
                    *v /= mean;
                }
            }
        }
        Ok(())
    }
}

fn evaluate(cfg: &SearchConfig, space: &Arc<FilteredSpace>, state: &SearchState) -> Result<f64> {
    let f = state.f.build();
    let report = match cfg.target {
        SearchTarget::Doob => verify::check_doob(&f, cfg.p)?,
        SearchTarget::WeightedDoob => {
            let w = RandomVariable::new(space.clone(), state.w.clone().unwrap())?;
            verify::check_weighted_doob(&f, &w, cfg.p)?
        }
        SearchTarget::WeightedBdg => {
            let w = RandomVariable::new(space.clone(), state.w.clone().unwrap())?;
            verify::check_weighted_bdg(&f, &w)?
        }
        SearchTarget::Lepingle => verify::check_lepingle(&f, cfg.p, cfg.rho)?,
        SearchTarget::BourgainJump => verify::check_bourgain_jump(&f, cfg.p, cfg.lambda)?,
        SearchTarget::BdgMaxOverSquare => verify::check_bdg(&f, cfg.p)?[0].clone(),
        SearchTarget::BdgSquareOverMax => verify::check_bdg(&f, cfg.p)?[1].clone(),
        SearchTarget::ChaoLongMax => {
            let g = state.g.as_ref().unwrap().build();
            let exps = crate::space::ExponentTriple::new(cfg.p, cfg.q)?;
            verify::check_chao_long_max(&f, &g, &exps)?
        }
        SearchTarget::ThmVariation => {
            let g = state.g.as_ref().unwrap().build();
            let exps = crate::space::ExponentTriple::new(cfg.p, cfg.q)?;
            verify::check_thm_variation(&f, &g, &exps, cfg.rho)?
        }
        SearchTarget::ThmJump => {
            let g = state.g.as_ref().unwrap().build();
            let exps = crate::space::ExponentTriple::new(cfg.p, cfg.q)?;
            verify::check_thm_jump(&f, &g, &exps, cfg.lambda)?
        }
        SearchTarget::RoughVariation => {
            let g = state.g.as_ref().unwrap().build();
            verify::check_rough_variation(&f, &g, cfg.p, cfg.rho)?
        }
        SearchTarget::RoughJump => {
            let g = state.g.as_ref().unwrap().build();
            verify::check_rough_jump(&f, &g, cfg.p, cfg.lambda)?
        }
    };
    Ok(if report.ratio.is_finite() { report.ratio } else { 0.0 })
}

const STALL_WINDOW: usize = 25;
const ETA_START: f64 = 0.5;
const ETA_MIN: f64 = 1e-6;

fn run_restart(
    cfg: &SearchConfig,
    space: &Arc<FilteredSpace>,
    restart: usize,
) -> Result<(SearchState, f64, Vec<TraceRow>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(restart as u64));
    let count = DyadicMartingaleParams::parameter_count(cfg.depth);
    let draw = |rng: &mut ChaCha8Rng| DyadicMartingaleParams {
        depth: cfg.depth,
        start: 0.0,
        scales: (0..count)
            .map(|_| LogNormal::new(0.0, 0.5).unwrap().sample(rng))
            .collect(),
    };
    // restart 0 starts from the flat walk, later restarts from random scales
    let f = if restart == 0 {
        DyadicMartingaleParams::flat(cfg.depth, 0.0, 1.0)
    } else {
        draw(&mut rng)
    };
    let g = cfg.target.is_bilinear().then(|| if restart == 0 {
        DyadicMartingaleParams::flat(cfg.depth, 0.0, 1.0)
    } else {
        draw(&mut rng)
    });
    let w = cfg.target.needs_weight().then(|| {
        (0..space.leaf_count())
            .map(|_| LogNormal::new(0.0, 0.5).unwrap().sample(&mut rng))
            .collect::<Vec<f64>>()
    });
    let mut state = SearchState { f, g, w };
    state.renormalize(cfg, space)?;

    let mut best = evaluate(cfg, space, &state)?;
    let mut trace = vec![TraceRow { restart, iteration: 0, ratio: best, accepted: true }];
    let mut eta = ETA_START;
    let mut stall = 0usize;
    for iteration in 1..=cfg.iterations {
        let coord = rng.gen_range(0..state.coordinate_count());
        let factor = if rng.gen_bool(0.5) { 1.0 + eta } else { 1.0 / (1.0 + eta) };
        let mut proposal = SearchState {
            f: state.f.clone(),
            g: state.g.clone(),
            w: state.w.clone(),
        };
        proposal.perturb(coord, factor);
        proposal.renormalize(cfg, space)?;
        let ratio = evaluate(cfg, space, &proposal)?;
        let accepted = ratio > best;
        if accepted {
            best = ratio;
            state = proposal;
            stall = 0;
        } else {
            stall += 1;
            if stall >= STALL_WINDOW {
                eta = (eta / 2.0).max(ETA_MIN);
                stall = 0;
            }
        }
        trace.push(TraceRow { restart, iteration, ratio, accepted });
    }
    Ok((state, best, trace))
}

/// Hill climbing with multiplicative coordinate perturbations, maximizing the
/// target's check ratio over the dyadic family (`f_0 = 0`). Restarts run in
/// parallel; ties break toward the lowest restart index, so the outcome is
/// deterministic for a fixed seed. Fails if a bounded target's best ratio
/// exceeds its constant.
pub fn ratio_search(cfg: &SearchConfig) -> Result<SearchOutcome> {
    if cfg.iterations == 0 || cfg.restarts == 0 {
        return Err(Error::InvalidParameter("iterations and restarts must be >= 1".into()));
    }
    let space = FilteredSpace::dyadic(cfg.depth);
    let runs: Vec<(SearchState, f64, Vec<TraceRow>)> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(cfg, &space, r))
        .collect::<Result<_>>()?;

    let mut best_idx = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.1 > runs[best_idx].1 {
            best_idx = i;
        }
    }
    let mut trace = Vec::new();
    for run in &runs {
        trace.extend(run.2.iter().cloned());
    }
    let (state, best_ratio, _) = &runs[best_idx];

    if let Some(bound) = cfg.target.bound(cfg.p) {
        if *best_ratio > bound * (1.0 + crate::tol::BOUND_SLACK) {
            return Err(Error::SearchBoundViolation {
                id: cfg.target.id().to_string(),
                ratio: *best_ratio,
                bound,
            });
        }
    }

    let report = CheckReport::from_sides(
        cfg.target.id(),
        *best_ratio,
        1.0,
        cfg.target.bound(cfg.p),
    )
    .with_exponents(Some(cfg.p), cfg.target.is_bilinear().then_some(cfg.q), None)
    .with_meta(Some(cfg.depth), Some(cfg.seed), Some("search"));

    Ok(SearchOutcome {
        target: cfg.target,
        best_ratio: *best_ratio,
        best_params: state.f.clone(),
        best_params_g: state.g.clone(),
        best_weight: state.w.clone(),
        best_restart: best_idx,
        trace,
        report,
    })
}
