//! Adapted processes and martingales: maximal and square functions,
//! optional sampling, and the localized pieces cut out by a stopping
//! sequence.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::space::{same_space, FilteredSpace, RandomVariable, StoppingSequence};
use crate::tol::ABS_TOL;

/// A process adapted to the filtration: one value per level-`n` atom for
/// every level `n`. Measurability holds by representation.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedProcess {
    space: Arc<FilteredSpace>,
    // values[n][atom]
    values: Vec<Vec<f64>>,
}

impl AdaptedProcess {
    pub fn from_level_values(space: Arc<FilteredSpace>, values: Vec<Vec<f64>>) -> Result<Self> {
        if values.len() != space.depth() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} levels of values for depth {}",
                values.len(),
                space.depth()
            )));
        }
        for (n, level) in values.iter().enumerate() {
            let want = space.level(n).atom_count();
            if level.len() != want {
                return Err(Error::ShapeMismatch(format!(
                    "level {n} has {} values for {want} atoms",
                    level.len()
                )));
            }
            if level.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("non-finite value at level {n}")));
            }
        }
        Ok(AdaptedProcess { space, values })
    }

    pub fn constant(space: Arc<FilteredSpace>, c: f64) -> Self {
        let values = (0..=space.depth())
            .map(|n| vec![c; space.level(n).atom_count()])
            .collect();
        AdaptedProcess { space, values }
    }

    pub fn space(&self) -> &Arc<FilteredSpace> {
        &self.space
    }

    pub fn depth(&self) -> usize {
        self.space.depth()
    }

    pub fn level_values(&self, n: usize) -> &[f64] {
        &self.values[n]
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Value of the process at level `n` on the atom containing `leaf`.
    pub fn value_at(&self, n: usize, leaf: usize) -> f64 {
        self.values[n][self.space.level(n).atom_of(leaf)]
    }

    /// Leaf-expanded table `t[leaf][n]`, the prefix data consumed by kernels.
    pub fn leaf_table(&self) -> Vec<Vec<f64>> {
        let n_levels = self.values.len();
        (0..self.space.leaf_count())
            .map(|leaf| (0..n_levels).map(|n| self.value_at(n, leaf)).collect())
            .collect()
    }

    /// The level-`n` values expanded to a leaf-wise random variable.
    pub fn level_variable(&self, n: usize) -> RandomVariable {
        let vals = (0..self.space.leaf_count()).map(|l| self.value_at(n, l)).collect();
        RandomVariable::new(self.space.clone(), vals).expect("shape is consistent by construction")
    }

    /// Final-level values as a random variable.
    pub fn terminal(&self) -> RandomVariable {
        self.level_variable(self.space.depth())
    }
}

/// Location of a failed tower-property check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TowerViolation {
    pub level: usize,
    pub atom: usize,
    pub gap: f64,
}

/// First atom at which `E[f_n | F_{n-1}] = f_{n-1}` fails, if any.
///
/// The comparison is `|Σ_B P(B) f_n(B) - P(A) f_{n-1}(A)| <= 1e-12 (1 + |f_{n-1}(A)|)`
/// over level-`(n-1)` atoms `A` with level-`n` children `B`.
pub fn tower_violation(process: &AdaptedProcess) -> Option<TowerViolation> {
    let space = process.space();
    for n in 1..=space.depth() {
        let coarse = space.level(n - 1);
        let mut sums = vec![0.0; coarse.atom_count()];
        for (b, &v) in process.level_values(n).iter().enumerate() {
            sums[space.parent_atom(n, b)] += space.atom_prob(n, b) * v;
        }
        for (a, &s) in sums.iter().enumerate() {
            let prev = process.level_values(n - 1)[a];
            let gap = (s - space.atom_prob(n - 1, a) * prev).abs();
            if gap > ABS_TOL * (1.0 + prev.abs()) {
                return Some(TowerViolation { level: n, atom: a, gap });
            }
        }
    }
    None
}

/// True when the process satisfies the tower property everywhere.
pub fn is_martingale(process: &AdaptedProcess) -> bool {
    tower_violation(process).is_none()
}

/// An adapted process satisfying the tower property, validated at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Martingale {
    process: AdaptedProcess,
}

impl Martingale {
    pub fn new(process: AdaptedProcess) -> Result<Self> {
        match tower_violation(&process) {
            None => Ok(Martingale { process }),
            Some(v) => Err(Error::NotMartingale { level: v.level, atom: v.atom, gap: v.gap }),
        }
    }

    /// The closed martingale `f_n = E[h | F_n]` of a leaf-wise variable.
    pub fn from_terminal(h: &RandomVariable) -> Self {
        let space = h.space().clone();
        let values = (0..=space.depth())
            .map(|n| {
                let part = space.level(n);
                (0..part.atom_count())
                    .map(|a| {
                        part.atom(a)
                            .iter()
                            .map(|&l| space.leaf_prob(l) * h.value(l))
                            .sum::<f64>()
                            / space.atom_prob(n, a)
                    })
                    .collect()
            })
            .collect();
        Martingale { process: AdaptedProcess { space, values } }
    }

    pub fn constant(space: Arc<FilteredSpace>, c: f64) -> Self {
        Martingale { process: AdaptedProcess::constant(space, c) }
    }

    pub fn process(&self) -> &AdaptedProcess {
        &self.process
    }

    pub fn space(&self) -> &Arc<FilteredSpace> {
        self.process.space()
    }

    pub fn depth(&self) -> usize {
        self.process.depth()
    }

    /// Martingale differences `df_n(B) = f_n(B) - f_{n-1}(parent B)` for
    /// `n >= 1`; the entry at index 0 is empty to keep indices aligned.
    pub fn differences(&self) -> Vec<Vec<f64>> {
        let space = self.space();
        let mut out = Vec::with_capacity(space.depth() + 1);
        out.push(Vec::new());
        for n in 1..=space.depth() {
            let prev = self.process.level_values(n - 1);
            out.push(
                self.process
                    .level_values(n)
                    .iter()
                    .enumerate()
                    .map(|(b, &v)| v - prev[space.parent_atom(n, b)])
                    .collect(),
            );
        }
        out
    }

    /// `Mf = max_n |f_n|`, leaf-wise along each atom chain.
    pub fn maximal_function(&self) -> RandomVariable {
        let space = self.space();
        let vals = (0..space.leaf_count())
            .map(|leaf| {
                (0..=space.depth()).fold(0.0f64, |m, n| m.max(self.process.value_at(n, leaf).abs()))
            })
            .collect();
        RandomVariable::new(space.clone(), vals).expect("leaf count matches")
    }

    /// `Sf = (Σ_n |df_n|²)^{1/2}`, leaf-wise.
    pub fn square_function(&self) -> RandomVariable {
        let space = self.space();
        let diffs = self.differences();
        let vals = (0..space.leaf_count())
            .map(|leaf| {
                (1..=space.depth())
                    .map(|n| {
                        let d = diffs[n][space.level(n).atom_of(leaf)];
                        d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        RandomVariable::new(space.clone(), vals).expect("leaf count matches")
    }

    /// `‖f‖_{L^p} = sup_n ‖f_n‖_p`.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        let mut best = 0.0f64;
        for n in 0..=self.depth() {
            best = best.max(self.process.level_variable(n).lp_norm(p)?);
        }
        Ok(best)
    }

    /// Optional sampling along `T_0 ≤ … ≤ T_K`: the process `(f_{T_k})_k` on
    /// the sampled filtration `(F_{T_k})_k`, realized on the quotient space
    /// whose leaves are the atoms of `F_{T_K}`.
    pub fn optional_sample(&self, seq: &StoppingSequence) -> Result<DerivedMartingale> {
        if !same_space(self.space(), seq.space()) {
            return Err(Error::SpaceMismatch);
        }
        let leaves = self.space().leaf_count();
        let stages: Vec<Vec<usize>> = seq
            .times()
            .iter()
            .map(|t| (0..leaves).map(|l| t.at(l)).collect())
            .collect();
        derive_on_quotient(self, &stages, None)
    }

    /// The localized piece `f^(k)_n = f_{(n ∨ T_{k-1}) ∧ T_k} - f_{T_{k-1}}`,
    /// materialized on the full level grid `0..=N` over the localized
    /// filtration `F^(k)_n = F_{(n ∨ T_{k-1}) ∧ T_k}` and realized on the
    /// quotient space whose leaves are the atoms of `F_{T_k}`.
    pub fn localize(&self, seq: &StoppingSequence, k: usize) -> Result<DerivedMartingale> {
        if !same_space(self.space(), seq.space()) {
            return Err(Error::SpaceMismatch);
        }
        if k == 0 || k > seq.windows() {
            return Err(Error::PieceOutOfRange { index: k, max: seq.windows() });
        }
        let leaves = self.space().leaf_count();
        let lower: Vec<usize> = (0..leaves).map(|l| seq.time(k - 1).at(l)).collect();
        let upper: Vec<usize> = (0..leaves).map(|l| seq.time(k).at(l)).collect();
        let stages: Vec<Vec<usize>> = (0..=self.depth())
            .map(|n| (0..leaves).map(|l| n.max(lower[l]).min(upper[l])).collect())
            .collect();
        derive_on_quotient(self, &stages, Some(&lower))
    }
}

/// A martingale on a filtration derived from a base space by stopping-time
/// levels, with the pullback map to base leaves.
#[derive(Debug, Clone)]
pub struct DerivedMartingale {
    martingale: Martingale,
    base: Arc<FilteredSpace>,
    // base leaf -> derived leaf
    leaf_map: Vec<usize>,
}

impl DerivedMartingale {
    pub fn martingale(&self) -> &Martingale {
        &self.martingale
    }

    pub fn space(&self) -> &Arc<FilteredSpace> {
        self.martingale.space()
    }

    pub fn base(&self) -> &Arc<FilteredSpace> {
        &self.base
    }

    pub fn leaf_map(&self) -> &[usize] {
        &self.leaf_map
    }

    /// Pulls a variable on the derived space back to the base leaves.
    pub fn pull_back(&self, h: &RandomVariable) -> Result<RandomVariable> {
        if !same_space(h.space(), self.martingale.space()) {
            return Err(Error::SpaceMismatch);
        }
        let vals = self.leaf_map.iter().map(|&q| h.value(q)).collect();
        RandomVariable::new(self.base.clone(), vals)
    }

    /// Maximal function expressed on the base space.
    pub fn maximal_on_base(&self) -> RandomVariable {
        self.pull_back(&self.martingale.maximal_function()).expect("derived variable")
    }

    /// Square function expressed on the base space.
    pub fn square_on_base(&self) -> RandomVariable {
        self.pull_back(&self.martingale.square_function()).expect("derived variable")
    }

    /// Final value expressed on the base space.
    pub fn terminal_on_base(&self) -> RandomVariable {
        self.pull_back(&self.martingale.process().terminal()).expect("derived variable")
    }
}

/// Builds the quotient-space martingale with stage-`k` values
/// `f_{stages[k][leaf]}(leaf) - f_{sub[leaf]}(leaf)`.
///
/// `stages[k]` must assign to each base leaf a level that is measurable as a
/// stopping time; the stage partitions it induces are then nested, and the
/// final stage defines the quotient leaves.
fn derive_on_quotient(
    f: &Martingale,
    stages: &[Vec<usize>],
    sub: Option<&[usize]>,
) -> Result<DerivedMartingale> {
    let base = f.space().clone();
    let leaves = base.leaf_count();
    let last = stages.last().expect("at least one stage");

    // Group base leaves by their final-stage atom; first-occurrence order
    // sorts quotient leaves by smallest base leaf.
    let label = |stage: &[usize], leaf: usize| (stage[leaf], base.level(stage[leaf]).atom_of(leaf));
    let mut quotient_of = vec![usize::MAX; leaves];
    let mut reps: Vec<usize> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    for leaf in 0..leaves {
        let lab = label(last, leaf);
        let idx = reps
            .iter()
            .position(|&r| label(last, r) == lab)
            .unwrap_or_else(|| {
                reps.push(leaf);
                probs.push(0.0);
                reps.len() - 1
            });
        quotient_of[leaf] = idx;
        probs[idx] += base.leaf_prob(leaf);
    }
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }

    // Stage partitions over quotient leaves, grouped by stage label.
    let mut level_atoms: Vec<Vec<Vec<usize>>> = Vec::with_capacity(stages.len());
    let mut stage_atom_of: Vec<Vec<usize>> = Vec::with_capacity(stages.len());
    for stage in stages {
        let mut atoms: Vec<Vec<usize>> = Vec::new();
        let mut labels: Vec<(usize, usize)> = Vec::new();
        let mut atom_of = vec![usize::MAX; reps.len()];
        for (q, &rep) in reps.iter().enumerate() {
            let lab = label(stage, rep);
            let idx = labels.iter().position(|&l| l == lab).unwrap_or_else(|| {
                labels.push(lab);
                atoms.push(Vec::new());
                labels.len() - 1
            });
            atoms[idx].push(q);
            atom_of[q] = idx;
        }
        level_atoms.push(atoms);
        stage_atom_of.push(atom_of);
    }

    let space = crate::space::FilteredSpace::new(probs, level_atoms)?;
    let table = f.process().leaf_table();
    let values: Vec<Vec<f64>> = stages
        .iter()
        .enumerate()
        .map(|(k, stage)| {
            let mut vals = vec![0.0; space.level(k).atom_count()];
            for (q, &rep) in reps.iter().enumerate() {
                let mut v = table[rep][stage[rep]];
                if let Some(sub) = sub {
                    v -= table[rep][sub[rep]];
                }
                vals[stage_atom_of[k][q]] = v;
            }
            vals
        })
        .collect();
    let process = AdaptedProcess::from_level_values(space, values)?;
    let martingale = Martingale::new(process)?;
    Ok(DerivedMartingale { martingale, base, leaf_map: quotient_of })
}
