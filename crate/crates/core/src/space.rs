//! Finite filtered probability spaces, random variables, stopping times,
//! and the (quasi)norms used throughout the crate.
//!
//! A space is a refining sequence of partitions of a finite leaf set with
//! strictly positive leaf probabilities. Every expectation is a finite sum,
//! so all quantities are exact up to floating-point rounding.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol::ABS_TOL;

/// A partition of the leaf index set into atoms.
///
/// Atoms are stored as sorted leaf-index lists and ordered by their smallest
/// leaf, which makes structurally equal partitions compare equal.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    atoms: Vec<Vec<usize>>,
    atom_of: Vec<usize>,
}

impl Partition {
    /// Builds a partition from atom lists, canonicalizing the order.
    /// Fails unless the atoms cover every leaf in `0..leaf_count` exactly once.
    pub fn from_atoms(mut atoms: Vec<Vec<usize>>, leaf_count: usize) -> Result<Self, String> {
        for atom in atoms.iter_mut() {
            if atom.is_empty() {
                return Err("empty atom".to_string());
            }
            atom.sort_unstable();
        }
        atoms.sort_unstable_by_key(|a| a[0]);
        let mut atom_of = vec![usize::MAX; leaf_count];
        for (idx, atom) in atoms.iter().enumerate() {
            for &leaf in atom {
                if leaf >= leaf_count {
                    return Err(format!("leaf index {leaf} out of range 0..{leaf_count}"));
                }
                if atom_of[leaf] != usize::MAX {
                    return Err(format!("leaf {leaf} appears in more than one atom"));
                }
                atom_of[leaf] = idx;
            }
        }
        if let Some(leaf) = atom_of.iter().position(|&a| a == usize::MAX) {
            return Err(format!("leaf {leaf} missing from the partition"));
        }
        Ok(Partition { atoms, atom_of })
    }

    /// The partition of `0..leaf_count` into singletons.
    pub fn singletons(leaf_count: usize) -> Self {
        Partition {
            atoms: (0..leaf_count).map(|i| vec![i]).collect(),
            atom_of: (0..leaf_count).collect(),
        }
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn atoms(&self) -> &[Vec<usize>] {
        &self.atoms
    }

    pub fn atom(&self, idx: usize) -> &[usize] {
        &self.atoms[idx]
    }

    /// Index of the atom containing `leaf`.
    pub fn atom_of(&self, leaf: usize) -> usize {
        self.atom_of[leaf]
    }

    /// True when every atom of `self` is contained in a single atom of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.atoms
            .iter()
            .all(|atom| atom.iter().all(|&l| coarser.atom_of[l] == coarser.atom_of[atom[0]]))
    }

    pub fn is_singletons(&self) -> bool {
        self.atoms.iter().all(|a| a.len() == 1)
    }
}

/// An exact finite filtered probability space: a refining chain of partitions
/// `F_0 ⊆ F_1 ⊆ … ⊆ F_N` of a finite leaf set, with the level-`N` partition
/// consisting of singletons.
#[derive(Debug, PartialEq)]
pub struct FilteredSpace {
    leaf_probs: Vec<f64>,
    levels: Vec<Partition>,
    atom_probs: Vec<Vec<f64>>,
    // parents[n][a] = index of the level-(n-1) atom containing level-n atom a; parents[0] is empty.
    parents: Vec<Vec<usize>>,
}

impl FilteredSpace {
    /// Validates probabilities, partition structure, refinement, and the
    /// singleton top level, then assembles lookup tables.
    ///
    /// `level_atoms[n]` lists the atoms of the level-`n` partition. Errors
    /// carry a path into the corresponding document (`leaf_probs/3`,
    /// `level_atoms/2/0`, ...).
    pub fn new(leaf_probs: Vec<f64>, level_atoms: Vec<Vec<Vec<usize>>>) -> Result<Arc<Self>> {
        let leaf_count = leaf_probs.len();
        if leaf_count == 0 {
            return Err(Error::InvalidSpace {
                path: "leaf_probs".into(),
                reason: "no leaves".into(),
            });
        }
        for (i, &p) in leaf_probs.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 || p > 1.0 {
                return Err(Error::InvalidSpace {
                    path: format!("leaf_probs/{i}"),
                    reason: format!("probability {p} not in (0, 1]"),
                });
            }
        }
        let total: f64 = leaf_probs.iter().sum();
        if (total - 1.0).abs() > ABS_TOL {
            return Err(Error::InvalidSpace {
                path: "leaf_probs".into(),
                reason: format!("probabilities sum to {total}, not 1"),
            });
        }
        if level_atoms.len() < 2 {
            return Err(Error::InvalidSpace {
                path: "level_atoms".into(),
                reason: "depth must be at least 1 (need level 0 and level N partitions)".into(),
            });
        }
        let mut levels = Vec::with_capacity(level_atoms.len());
        for (n, atoms) in level_atoms.into_iter().enumerate() {
            let part = Partition::from_atoms(atoms, leaf_count).map_err(|reason| {
                Error::InvalidSpace { path: format!("level_atoms/{n}"), reason }
            })?;
            levels.push(part);
        }
        for n in 1..levels.len() {
            if !levels[n].refines(&levels[n - 1]) {
                return Err(Error::InvalidSpace {
                    path: format!("level_atoms/{n}"),
                    reason: format!("level {n} does not refine level {}", n - 1),
                });
            }
        }
        let top = levels.len() - 1;
        if !levels[top].is_singletons() {
            return Err(Error::InvalidSpace {
                path: format!("level_atoms/{top}"),
                reason: "top level partition must consist of singletons".into(),
            });
        }

        let atom_probs = levels
            .iter()
            .map(|part| {
                part.atoms()
                    .iter()
                    .map(|atom| atom.iter().map(|&l| leaf_probs[l]).sum())
                    .collect()
            })
            .collect();
        let parents = levels
            .iter()
            .enumerate()
            .map(|(n, part)| {
                if n == 0 {
                    Vec::new()
                } else {
                    part.atoms().iter().map(|atom| levels[n - 1].atom_of(atom[0])).collect()
                }
            })
            .collect();

        Ok(Arc::new(FilteredSpace { leaf_probs, levels, atom_probs, parents }))
    }

    /// The canonical dyadic space: `2^depth` equally likely leaves, level `n`
    /// partitioned into `2^n` contiguous blocks.
    pub fn dyadic(depth: u32) -> Arc<Self> {
        Self::dyadic_biased(depth, 0.5).expect("unbiased dyadic space is always valid")
    }

    /// Dyadic tree in which every node gives conditional probability `theta`
    /// to its left child. `theta = 0.5` recovers [`FilteredSpace::dyadic`].
    pub fn dyadic_biased(depth: u32, theta: f64) -> Result<Arc<Self>> {
        if depth == 0 {
            return Err(Error::InvalidSpace {
                path: "depth".into(),
                reason: "depth must be at least 1".into(),
            });
        }
        if theta.is_nan() || theta <= 0.0 || theta >= 1.0 {
            return Err(Error::InvalidSpace {
                path: "bias".into(),
                reason: format!("child probability {theta} not in (0, 1)"),
            });
        }
        let leaves = 1usize << depth;
        let mut probs = vec![1.0; leaves];
        for leaf in 0..leaves {
            for bit in 0..depth {
                // bit 0 is the first branching (most significant in leaf order)
                let right = (leaf >> (depth - 1 - bit)) & 1 == 1;
                probs[leaf] *= if right { 1.0 - theta } else { theta };
            }
        }
        let level_atoms = (0..=depth)
            .map(|n| {
                let block = 1usize << (depth - n);
                (0..(1usize << n)).map(|a| (a * block..(a + 1) * block).collect()).collect()
            })
            .collect();
        Self::new(probs, level_atoms)
    }

    /// Number of filtration steps `N`; levels run over `0..=N`.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_probs.len()
    }

    pub fn leaf_prob(&self, leaf: usize) -> f64 {
        self.leaf_probs[leaf]
    }

    pub fn leaf_probs(&self) -> &[f64] {
        &self.leaf_probs
    }

    pub fn level(&self, n: usize) -> &Partition {
        &self.levels[n]
    }

    pub fn atom_prob(&self, n: usize, atom: usize) -> f64 {
        self.atom_probs[n][atom]
    }

    /// Index of the level-`n-1` atom containing level-`n` atom `atom`.
    pub fn parent_atom(&self, n: usize, atom: usize) -> usize {
        self.parents[n][atom]
    }

    pub fn check_level(&self, n: usize) -> Result<()> {
        if n > self.depth() {
            Err(Error::LevelOutOfRange { level: n, depth: self.depth() })
        } else {
            Ok(())
        }
    }

    /// True when the leaf-wise values define a stopping time.
    pub fn is_stopping_time(&self, times: &[usize]) -> Result<bool> {
        Ok(self.stopping_violations(times)?.is_empty())
    }

    /// Violations of the stopping-time property for leaf-wise values `times`:
    /// every event `{T = n}` must be a union of level-`n` atoms.
    pub fn stopping_violations(&self, times: &[usize]) -> Result<Vec<StoppingViolation>> {
        if times.len() != self.leaf_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} stopping values for {} leaves",
                times.len(),
                self.leaf_count()
            )));
        }
        for (leaf, &t) in times.iter().enumerate() {
            if t > self.depth() {
                return Err(Error::StoppingValueOutOfRange {
                    leaf,
                    value: t,
                    depth: self.depth(),
                });
            }
        }
        let mut violations = Vec::new();
        for n in 0..=self.depth() {
            for (a, atom) in self.levels[n].atoms().iter().enumerate() {
                let hits = atom.iter().filter(|&&l| times[l] == n).count();
                if hits != 0 && hits != atom.len() {
                    violations.push(StoppingViolation { level: n, atom: a });
                }
            }
        }
        Ok(violations)
    }
}

/// True when the two handles denote the same space, structurally or by pointer.
pub fn same_space(a: &Arc<FilteredSpace>, b: &Arc<FilteredSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// An atom that witnesses failure of `{T = n} ∈ F_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoppingViolation {
    pub level: usize,
    pub atom: usize,
}

/// A real-valued function of the leaves.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariable {
    space: Arc<FilteredSpace>,
    values: Vec<f64>,
}

impl RandomVariable {
    pub fn new(space: Arc<FilteredSpace>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.leaf_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} leaves",
                values.len(),
                space.leaf_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite value at leaf {i}")));
        }
        Ok(RandomVariable { space, values })
    }

    pub fn constant(space: Arc<FilteredSpace>, c: f64) -> Self {
        let n = space.leaf_count();
        RandomVariable { space, values: vec![c; n] }
    }

    pub fn space(&self) -> &Arc<FilteredSpace> {
        &self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, leaf: usize) -> f64 {
        self.values[leaf]
    }

    /// Expectation `E[h]`.
    pub fn expectation(&self) -> f64 {
        self.values
            .iter()
            .zip(self.space.leaf_probs())
            .map(|(v, p)| v * p)
            .sum()
    }

    /// `E[h | F_n]`, constant on each level-`n` atom.
    pub fn conditional_expectation(&self, n: usize) -> Result<RandomVariable> {
        self.space.check_level(n)?;
        let part = self.space.level(n);
        let mut out = vec![0.0; self.values.len()];
        for (a, atom) in part.atoms().iter().enumerate() {
            let mass = self.space.atom_prob(n, a);
            let avg = atom
                .iter()
                .map(|&l| self.space.leaf_prob(l) * self.values[l])
                .sum::<f64>()
                / mass;
            for &l in atom {
                out[l] = avg;
            }
        }
        Ok(RandomVariable { space: self.space.clone(), values: out })
    }

    /// `‖h‖_{L^p} = (E|h|^p)^{1/p}`; `p = ∞` gives the essential supremum.
    /// Quasinorm exponents `p ∈ (0, 1)` are allowed.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_infinite() && p > 0.0 {
            return Ok(self.values.iter().fold(0.0, |m, v| m.max(v.abs())));
        }
        if p.is_nan() || p <= 0.0 {
            return Err(Error::NonPositiveExponent(p));
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(self.space.leaf_probs())
            .map(|(v, q)| v.abs().powf(p) * q)
            .sum();
        Ok(sum.powf(1.0 / p))
    }

    /// Weak quasinorm `sup_{α>0} α (P(|h| > α))^{1/p}`, computed exactly as
    /// the maximum of `v (P(|h| ≥ v))^{1/p}` over the positive values `v`
    /// of `|h|`. Rejects `p = ∞`.
    pub fn weak_lp_norm(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p <= 0.0 || p.is_infinite() {
            return Err(Error::NonPositiveExponent(p));
        }
        let mut best = 0.0f64;
        for v in self.values.iter().map(|x| x.abs()).filter(|&x| x > 0.0) {
            let tail: f64 = self
                .values
                .iter()
                .zip(self.space.leaf_probs())
                .filter(|(x, _)| x.abs() >= v)
                .map(|(_, q)| q)
                .sum();
            best = best.max(v.powf(p) * tail);
        }
        Ok(best.powf(1.0 / p))
    }

    /// Weighted norm `(E |h|^p w)^{1/p}` for a leaf-wise weight `w ≥ 0`.
    /// For `p = ∞` this is the essential supremum with respect to `w dP`,
    /// i.e. the largest `|h|` over leaves carrying positive weight.
    pub fn weighted_lp_norm(&self, w: &RandomVariable, p: f64) -> Result<f64> {
        if !same_space(&self.space, &w.space) {
            return Err(Error::SpaceMismatch);
        }
        if let Some(leaf) = w.values.iter().position(|&x| x < 0.0) {
            return Err(Error::NegativeWeight { leaf });
        }
        if p.is_infinite() && p > 0.0 {
            return Ok(self
                .values
                .iter()
                .zip(&w.values)
                .filter(|(_, &wv)| wv > 0.0)
                .fold(0.0, |m, (v, _)| m.max(v.abs())));
        }
        if p.is_nan() || p <= 0.0 {
            return Err(Error::NonPositiveExponent(p));
        }
        let sum: f64 = self
            .values
            .iter()
            .zip(self.space.leaf_probs())
            .zip(&w.values)
            .map(|((v, q), wv)| v.abs().powf(p) * wv * q)
            .sum();
        Ok(sum.powf(1.0 / p))
    }

    /// Leaf-wise map.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> RandomVariable {
        RandomVariable {
            space: self.space.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Leaf-wise combination of two variables on the same space.
    pub fn zip_with(&self, other: &RandomVariable, f: impl Fn(f64, f64) -> f64) -> Result<RandomVariable> {
        if !same_space(&self.space, &other.space) {
            return Err(Error::SpaceMismatch);
        }
        Ok(RandomVariable {
            space: self.space.clone(),
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }
}

/// Mixed quasinorm `‖ (Σ_k |h_k|^q)^{1/q} ‖_{L^p}` of a family on one space.
pub fn mixed_lp_lq_norm(family: &[RandomVariable], p: f64, q: f64) -> Result<f64> {
    let first = family
        .first()
        .ok_or_else(|| Error::InvalidParameter("empty family in mixed norm".into()))?;
    if q.is_nan() || q <= 0.0 || q.is_infinite() {
        return Err(Error::NonPositiveExponent(q));
    }
    for h in family.iter().skip(1) {
        if !same_space(first.space(), h.space()) {
            return Err(Error::SpaceMismatch);
        }
    }
    let space = first.space().clone();
    let values: Vec<f64> = (0..space.leaf_count())
        .map(|leaf| {
            family
                .iter()
                .map(|h| h.value(leaf).abs().powf(q))
                .sum::<f64>()
                .powf(1.0 / q)
        })
        .collect();
    RandomVariable { space, values }.lp_norm(p)
}

/// A bounded stopping time: leaf-wise values in `0..=N` with `{T = n} ∈ F_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingTime {
    space: Arc<FilteredSpace>,
    times: Vec<usize>,
}

impl StoppingTime {
    pub fn new(space: Arc<FilteredSpace>, times: Vec<usize>) -> Result<Self> {
        let violations = space.stopping_violations(&times)?;
        if let Some(v) = violations.first() {
            return Err(Error::NotStoppingTime { level: v.level, atom: v.atom });
        }
        Ok(StoppingTime { space, times })
    }

    /// The deterministic time `T ≡ n`.
    pub fn constant(space: Arc<FilteredSpace>, n: usize) -> Result<Self> {
        space.check_level(n)?;
        let len = space.leaf_count();
        Ok(StoppingTime { space, times: vec![n; len] })
    }

    pub fn space(&self) -> &Arc<FilteredSpace> {
        &self.space
    }

    pub fn times(&self) -> &[usize] {
        &self.times
    }

    pub fn at(&self, leaf: usize) -> usize {
        self.times[leaf]
    }
}

/// An increasing sequence `T_0 ≤ T_1 ≤ …` of bounded stopping times with `T_0 ≡ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingSequence {
    times: Vec<StoppingTime>,
}

impl StoppingSequence {
    pub fn new(times: Vec<StoppingTime>) -> Result<Self> {
        let first = times
            .first()
            .ok_or_else(|| Error::BadStoppingSequence("empty sequence".into()))?;
        if first.times().iter().any(|&t| t != 0) {
            return Err(Error::BadStoppingSequence("T_0 must be identically 0".into()));
        }
        for k in 1..times.len() {
            if !same_space(times[k].space(), first.space()) {
                return Err(Error::SpaceMismatch);
            }
            let prev = times[k - 1].times();
            if times[k].times().iter().zip(prev).any(|(&a, &b)| a < b) {
                return Err(Error::BadStoppingSequence(format!(
                    "T_{k} is not pointwise >= T_{}",
                    k - 1
                )));
            }
        }
        Ok(StoppingSequence { times })
    }

    /// Number of localization windows `K` (the sequence is `T_0, …, T_K`).
    pub fn windows(&self) -> usize {
        self.times.len() - 1
    }

    pub fn space(&self) -> &Arc<FilteredSpace> {
        self.times[0].space()
    }

    pub fn time(&self, k: usize) -> &StoppingTime {
        &self.times[k]
    }

    pub fn times(&self) -> &[StoppingTime] {
        &self.times
    }
}

/// Exponents `p, q ∈ (1, ∞)` with the Hölder-scaling `r`: `1/p + 1/q = 1/r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentTriple {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl ExponentTriple {
    /// Derives `r` from `p` and `q`.
    pub fn new(p: f64, q: f64) -> Result<Self> {
        Self::from_parts(p, q, 1.0 / (1.0 / p + 1.0 / q))
    }

    /// Validates an explicitly supplied triple.
    pub fn from_parts(p: f64, q: f64, r: f64) -> Result<Self> {
        let bad = |x: f64| x.is_nan() || x <= 1.0 || x.is_infinite();
        if bad(p) || bad(q) {
            return Err(Error::BadExponents(format!("p = {p}, q = {q} must lie in (1, ∞)")));
        }
        if r.is_nan() || r <= 0.5 {
            return Err(Error::BadExponents(format!("r = {r} must lie in (1/2, ∞)")));
        }
        if (1.0 / p + 1.0 / q - 1.0 / r).abs() > ABS_TOL {
            return Err(Error::BadExponents(format!("1/{p} + 1/{q} != 1/{r}")));
        }
        Ok(ExponentTriple { p, q, r })
    }
}

/// Conjugate exponent `p' = p/(p-1)`, with `1' = ∞` and `∞' = 1`.
pub fn conjugate(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

/// On-disk form of a space together with named adapted processes
/// (per-level, per-atom value arrays).
#[derive(Debug, Serialize, Deserialize)]
pub struct SpaceDocument {
    pub depth: usize,
    pub leaf_probs: Vec<f64>,
    pub level_atoms: Vec<Vec<Vec<usize>>>,
    #[serde(default)]
    pub processes: BTreeMap<String, Vec<Vec<f64>>>,
}

/// Named per-level, per-atom process values carried by a document.
pub type NamedProcesses = BTreeMap<String, Vec<Vec<f64>>>;

impl SpaceDocument {
    /// Parses and validates a document, reporting the first violation with a
    /// path into the JSON.
    pub fn from_json(text: &str) -> Result<(Arc<FilteredSpace>, NamedProcesses)> {
        let doc: SpaceDocument = serde_json::from_str(text)?;
        if doc.level_atoms.len() != doc.depth + 1 {
            return Err(Error::InvalidSpace {
                path: "level_atoms".into(),
                reason: format!(
                    "expected {} levels for depth {}, found {}",
                    doc.depth + 1,
                    doc.depth,
                    doc.level_atoms.len()
                ),
            });
        }
        let space = FilteredSpace::new(doc.leaf_probs, doc.level_atoms)?;
        for (name, levels) in &doc.processes {
            if levels.len() != space.depth() + 1 {
                return Err(Error::InvalidSpace {
                    path: format!("processes/{name}"),
                    reason: format!(
                        "expected {} levels, found {}",
                        space.depth() + 1,
                        levels.len()
                    ),
                });
            }
            for (n, vals) in levels.iter().enumerate() {
                let want = space.level(n).atom_count();
                if vals.len() != want {
                    return Err(Error::InvalidSpace {
                        path: format!("processes/{name}/{n}"),
                        reason: format!("expected {want} atom values, found {}", vals.len()),
                    });
                }
                if let Some(i) = vals.iter().position(|v| !v.is_finite()) {
                    return Err(Error::InvalidSpace {
                        path: format!("processes/{name}/{n}/{i}"),
                        reason: "non-finite value".into(),
                    });
                }
            }
        }
        Ok((space, doc.processes))
    }

    /// Serializes a space and named per-level processes.
    pub fn to_json(
        space: &FilteredSpace,
        processes: &NamedProcesses,
    ) -> Result<String> {
        let doc = SpaceDocument {
            depth: space.depth(),
            leaf_probs: space.leaf_probs().to_vec(),
            level_atoms: (0..=space.depth())
                .map(|n| space.level(n).atoms().to_vec())
                .collect(),
            processes: processes.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}
