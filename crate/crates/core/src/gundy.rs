//! Gundy-type decomposition of a martingale at a height `α` into a bounded
//! part, a rarely active part, and a part with absolutely summable
//! differences, each a martingale.
//!
//! Construction. Let `σ` be the first time at which either `|g_n| > α` or
//! `|dg_n| > α`. The increments of the stopped martingale `g^σ` are split at
//! height `α` into a small part and a large part (the latter can be nonzero
//! only at `σ` itself), and each part is compensated by its conditional
//! expectation to restore the martingale property:
//!
//! * `good`  = `g_0` plus the compensated small increments — every kept path
//!   value is a pre-stop value (at most `α`) plus at most one small jump, so
//!   `|good| <= 2α` whenever the compensators vanish, which is exact for
//!   symmetric dyadic martingales;
//! * `harmless` = the compensated large increments;
//! * `bad`   = `g - g^σ`, supported on `{σ <= N}`, so
//!   `P(M bad > 0) <= P(Mg > α) + P(max_n |dg_n| > α) <= 3 α⁻¹ ‖g‖₁`.
//!
//! If `|g_0| > 2α` on some level-0 atom, the initial value is rerouted into
//! `bad` there (otherwise the sup bound on `good` could not hold) and the
//! reports carry an `initial value rerouted` note.

use crate::error::{Error, Result};
use crate::martingale::{AdaptedProcess, Martingale};
use crate::report::CheckReport;
use crate::tol::nearly_equal;

/// The three martingale parts of a decomposition at height `alpha`.
///
/// Leaf-wise, `good + bad + harmless = g` within `1e-12`, `bad_0` and
/// `harmless_0` vanish unless the initial value was rerouted, and each part
/// is a martingale.
#[derive(Debug, Clone)]
pub struct GundyParts {
    pub good: Martingale,
    pub bad: Martingale,
    pub harmless: Martingale,
    pub alpha: f64,
    /// True when some level-0 atom had `|g_0| > 2α` and was rerouted into `bad`.
    pub rerouted: bool,
}

/// Decomposes `g` at height `alpha`.
pub fn gundy_decompose(g: &Martingale, alpha: f64) -> Result<GundyParts> {
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::NonPositiveThreshold(alpha));
    }
    let space = g.space().clone();
    let depth = space.depth();
    let diffs = g.differences();

    // stopped[n][atom]: σ <= n on the atom (σ is adapted, hence atom-constant).
    let mut stopped: Vec<Vec<bool>> = Vec::with_capacity(depth + 1);
    stopped.push(
        g.process().level_values(0).iter().map(|&v| v.abs() > alpha).collect(),
    );
    for n in 1..=depth {
        let vals = g.process().level_values(n);
        let level: Vec<bool> = (0..space.level(n).atom_count())
            .map(|b| {
                stopped[n - 1][space.parent_atom(n, b)]
                    || vals[b].abs() > alpha
                    || diffs[n][b].abs() > alpha
            })
            .collect();
        stopped.push(level);
    }

    // Initial values, rerouting atoms with |g_0| > 2α into bad.
    let g0 = g.process().level_values(0);
    let good0: Vec<f64> =
        g0.iter().map(|&v| if v.abs() > 2.0 * alpha { 0.0 } else { v }).collect();
    let rerouted = g0.iter().zip(&good0).any(|(&a, &b)| a != b);

    let mut good_levels: Vec<Vec<f64>> = vec![good0.clone()];
    let mut harmless_levels: Vec<Vec<f64>> = vec![vec![0.0; g0.len()]];
    let mut stopped_val: Vec<Vec<f64>> = vec![g0.to_vec()];

    for n in 1..=depth {
        let atom_count = space.level(n).atom_count();
        // increments of g^σ and their small/large split
        let mut small = vec![0.0; atom_count];
        let mut large = vec![0.0; atom_count];
        for b in 0..atom_count {
            let parent = space.parent_atom(n, b);
            let u = if stopped[n - 1][parent] { 0.0 } else { diffs[n][b] };
            if u.abs() > alpha {
                large[b] = u;
            } else {
                small[b] = u;
            }
        }
        // conditional expectations over each parent atom
        let parent_count = space.level(n - 1).atom_count();
        let mut comp_small = vec![0.0; parent_count];
        let mut comp_large = vec![0.0; parent_count];
        for b in 0..atom_count {
            let parent = space.parent_atom(n, b);
            let w = space.atom_prob(n, b);
            comp_small[parent] += w * small[b];
            comp_large[parent] += w * large[b];
        }
        for a in 0..parent_count {
            let mass = space.atom_prob(n - 1, a);
            comp_small[a] /= mass;
            comp_large[a] /= mass;
        }

        let mut good_n = vec![0.0; atom_count];
        let mut harmless_n = vec![0.0; atom_count];
        let mut stopped_n = vec![0.0; atom_count];
        for b in 0..atom_count {
            let parent = space.parent_atom(n, b);
            good_n[b] = good_levels[n - 1][parent] + small[b] - comp_small[parent];
            harmless_n[b] = harmless_levels[n - 1][parent] + large[b] - comp_large[parent];
            stopped_n[b] = if stopped[n - 1][parent] {
                stopped_val[n - 1][parent]
            } else {
                g.process().level_values(n)[b]
            };
        }
        good_levels.push(good_n);
        harmless_levels.push(harmless_n);
        stopped_val.push(stopped_n);
    }

    // bad = g - g^σ, plus the rerouted F_0 component kept constant in n.
    let bad_levels: Vec<Vec<f64>> = (0..=depth)
        .map(|n| {
            (0..space.level(n).atom_count())
                .map(|b| {
                    let mut root = b;
                    for m in (1..=n).rev() {
                        root = space.parent_atom(m, root);
                    }
                    g.process().level_values(n)[b] - stopped_val[n][b] + (g0[root] - good0[root])
                })
                .collect()
        })
        .collect();

    let build = |levels: Vec<Vec<f64>>| -> Result<Martingale> {
        Martingale::new(AdaptedProcess::from_level_values(space.clone(), levels)?)
    };
    Ok(GundyParts {
        good: build(good_levels)?,
        bad: build(bad_levels)?,
        harmless: build(harmless_levels)?,
        alpha,
        rerouted,
    })
}

impl GundyParts {
    /// Leaf-wise sum check `good + bad + harmless = g`.
    pub fn sum_matches(&self, g: &Martingale) -> bool {
        let space = g.space();
        (0..=space.depth()).all(|n| {
            (0..space.level(n).atom_count()).all(|b| {
                let total = self.good.process().level_values(n)[b]
                    + self.bad.process().level_values(n)[b]
                    + self.harmless.process().level_values(n)[b];
                nearly_equal(total, g.process().level_values(n)[b])
            })
        })
    }

    /// `M(bad) > 0` only where the stop triggered: `Mg > α` or `max_n |dg_n| > α`.
    pub fn bad_support_included(&self, g: &Martingale) -> bool {
        let mbad = self.bad.maximal_function();
        let mg = g.maximal_function();
        let diffs = g.differences();
        let space = g.space();
        (0..space.leaf_count()).all(|leaf| {
            if mbad.value(leaf) > 0.0 {
                let max_diff = (1..=space.depth())
                    .map(|n| diffs[n][space.level(n).atom_of(leaf)].abs())
                    .fold(0.0f64, f64::max);
                mg.value(leaf) > self.alpha || max_diff > self.alpha
            } else {
                true
            }
        })
    }
}

/// Computes the four quantitative bounds of the decomposition as reports:
/// `‖good‖_∞ <= 2α`, `‖good‖₁ <= 4‖g‖₁`, `P(M bad > 0) <= 3α⁻¹‖g‖₁`, and
/// `Σ_n ‖d harmless_n‖₁ <= 4‖g‖₁`.
pub fn gundy_report(g: &Martingale, alpha: f64) -> Result<Vec<CheckReport>> {
    let parts = gundy_decompose(g, alpha)?;
    let g_l1 = g.lp_norm(1.0)?;
    let space = g.space();

    let good_sup = parts.good.lp_norm(f64::INFINITY)?;
    let good_l1 = parts.good.lp_norm(1.0)?;
    let mbad = parts.bad.maximal_function();
    let bad_prob: f64 = (0..space.leaf_count())
        .filter(|&l| mbad.value(l) > 0.0)
        .map(|l| space.leaf_prob(l))
        .sum();
    let harm_diffs = parts.harmless.differences();
    let harm_l1: f64 = (1..=space.depth())
        .map(|n| {
            (0..space.level(n).atom_count())
                .map(|b| space.atom_prob(n, b) * harm_diffs[n][b].abs())
                .sum::<f64>()
        })
        .sum();

    let reports = vec![
        CheckReport::from_sides("gundy_good_sup", good_sup, alpha, Some(2.0)),
        CheckReport::from_sides("gundy_good_l1", good_l1, g_l1, Some(4.0)),
        CheckReport::from_sides("gundy_bad_prob", bad_prob, g_l1 / alpha, Some(3.0)),
        CheckReport::from_sides("gundy_harmless_l1", harm_l1, g_l1, Some(4.0)),
    ];
    Ok(reports
        .into_iter()
        .map(|r| {
            let r = r.with_alpha(alpha);
            if parts.rerouted {
                r.with_note("initial value rerouted")
            } else {
                r
            }
        })
        .collect())
}
