//! Paraproducts of martingale pairs, truncated and localized paraproducts,
//! and Riemann sums over random partitions.
//!
//! The paraproduct process is computed once per pair as prefix data, so that
//! a truncated paraproduct evaluates in O(1) per leaf from the tables
//! `(f, g, Π)`. The defining double sum is kept as an independent route for
//! identity checks.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::martingale::{AdaptedProcess, Martingale};
use crate::space::{same_space, FilteredSpace, RandomVariable, StoppingSequence};

/// The paraproduct process `Π_n(f,g) = Σ_{j<=n} f_{j-1} (g_j - g_{j-1})`
/// together with the leaf-expanded prefix tables of its factors.
#[derive(Debug, Clone)]
pub struct Paraproduct {
    pi: Martingale,
    f_table: Vec<Vec<f64>>,
    g_table: Vec<Vec<f64>>,
    pi_table: Vec<Vec<f64>>,
}

impl Paraproduct {
    pub fn new(f: &Martingale, g: &Martingale) -> Result<Self> {
        if !same_space(f.space(), g.space()) {
            return Err(Error::SpaceMismatch);
        }
        let space = f.space().clone();
        let g_diffs = g.differences();
        let mut levels: Vec<Vec<f64>> = Vec::with_capacity(space.depth() + 1);
        levels.push(vec![0.0; space.level(0).atom_count()]);
        for n in 1..=space.depth() {
            let vals = (0..space.level(n).atom_count())
                .map(|b| {
                    let parent = space.parent_atom(n, b);
                    levels[n - 1][parent]
                        + f.process().level_values(n - 1)[parent] * g_diffs[n][b]
                })
                .collect();
            levels.push(vals);
        }
        let process = AdaptedProcess::from_level_values(space, levels)?;
        let pi = Martingale::new(process)?;
        Ok(Paraproduct {
            f_table: f.process().leaf_table(),
            g_table: g.process().leaf_table(),
            pi_table: pi.process().leaf_table(),
            pi,
        })
    }

    /// The paraproduct as a martingale (`Π_0 = 0`).
    pub fn process(&self) -> &Martingale {
        &self.pi
    }

    pub fn space(&self) -> &Arc<FilteredSpace> {
        self.pi.space()
    }

    pub fn depth(&self) -> usize {
        self.pi.depth()
    }

    /// `Π_n(f,g)` at a leaf.
    pub fn value_at(&self, n: usize, leaf: usize) -> f64 {
        self.pi_table[leaf][n]
    }

    /// O(1) truncated paraproduct at one leaf:
    /// `Π_{n,n'} = Π_{n'} - Π_n - f_n (g_{n'} - g_n)`.
    pub fn truncated_at(&self, leaf: usize, n: usize, n_prime: usize) -> f64 {
        let f = &self.f_table[leaf];
        let g = &self.g_table[leaf];
        let pi = &self.pi_table[leaf];
        pi[n_prime] - pi[n] - f[n] * (g[n_prime] - g[n])
    }

    /// Truncated paraproduct `Π_{n,n'}(f,g)` as a random variable.
    pub fn truncated(&self, n: usize, n_prime: usize) -> Result<RandomVariable> {
        self.check_pair(n, n_prime)?;
        let vals = (0..self.space().leaf_count())
            .map(|leaf| self.truncated_at(leaf, n, n_prime))
            .collect();
        RandomVariable::new(self.space().clone(), vals)
    }

    /// Independent route: the defining double sum `Σ_{n<i<j<=n'} df_i dg_j`.
    pub fn truncated_direct(&self, n: usize, n_prime: usize) -> Result<RandomVariable> {
        self.check_pair(n, n_prime)?;
        let vals = (0..self.space().leaf_count())
            .map(|leaf| {
                let f = &self.f_table[leaf];
                let g = &self.g_table[leaf];
                let mut sum = 0.0;
                for j in (n + 2)..=n_prime {
                    let dg = g[j] - g[j - 1];
                    let mut inner = 0.0;
                    for i in (n + 1)..j {
                        inner += f[i] - f[i - 1];
                    }
                    sum += inner * dg;
                }
                sum
            })
            .collect();
        RandomVariable::new(self.space().clone(), vals)
    }

    fn check_pair(&self, n: usize, n_prime: usize) -> Result<()> {
        if n >= n_prime || n_prime > self.depth() {
            return Err(Error::BadIndexPair { lo: n, hi: n_prime, horizon: self.depth() });
        }
        Ok(())
    }

    /// Localized paraproduct `Σ_{T_{k-1} < i < j <= T_k} df_i dg_j`, leaf-wise.
    pub fn localized(&self, seq: &StoppingSequence, k: usize) -> Result<RandomVariable> {
        if !same_space(self.space(), seq.space()) {
            return Err(Error::SpaceMismatch);
        }
        if k == 0 || k > seq.windows() {
            return Err(Error::PieceOutOfRange { index: k, max: seq.windows() });
        }
        let lower = seq.time(k - 1);
        let upper = seq.time(k);
        let vals = (0..self.space().leaf_count())
            .map(|leaf| {
                let (a, b) = (lower.at(leaf), upper.at(leaf));
                if a < b {
                    self.truncated_at(leaf, a, b)
                } else {
                    0.0
                }
            })
            .collect();
        RandomVariable::new(self.space().clone(), vals)
    }
}

/// A random partition `0 = τ_0 ≤ τ_1 ≤ … ≤ τ_l` of the time axis.
#[derive(Debug, Clone)]
pub struct RandomPartition(StoppingSequence);

impl RandomPartition {
    pub fn new(seq: StoppingSequence) -> Self {
        RandomPartition(seq)
    }

    /// The full deterministic grid `τ_j = j`.
    pub fn full_grid(space: &Arc<FilteredSpace>) -> Result<Self> {
        use crate::space::StoppingTime;
        let times = (0..=space.depth())
            .map(|n| StoppingTime::constant(space.clone(), n))
            .collect::<Result<Vec<_>>>()?;
        Ok(RandomPartition(StoppingSequence::new(times)?))
    }

    pub fn sequence(&self) -> &StoppingSequence {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.windows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Riemann sum of the stochastic integral along a random partition:
/// `S_t(f,g;Σ) = Σ_j f_{min(t,τ_{j-1})} (g_{min(t,τ_j)} - g_{min(t,τ_{j-1})})`.
pub fn riemann_sum(
    f: &Martingale,
    g: &Martingale,
    partition: &RandomPartition,
    t: usize,
) -> Result<RandomVariable> {
    if !same_space(f.space(), g.space()) || !same_space(f.space(), partition.sequence().space()) {
        return Err(Error::SpaceMismatch);
    }
    f.space().check_level(t)?;
    let ft = f.process().leaf_table();
    let gt = g.process().leaf_table();
    let seq = partition.sequence();
    let vals = (0..f.space().leaf_count())
        .map(|leaf| {
            let mut sum = 0.0;
            for j in 1..=seq.windows() {
                let lo = t.min(seq.time(j - 1).at(leaf));
                let hi = t.min(seq.time(j).at(leaf));
                sum += ft[leaf][lo] * (gt[leaf][hi] - gt[leaf][lo]);
            }
            sum
        })
        .collect();
    RandomVariable::new(f.space().clone(), vals)
}

/// Summation by parts: checks leaf-wise that
/// `Π_{n,n'}(f,g) + Π_{n,n'}(g,f) + Σ_{n<j<=n'} df_j dg_j = (f_{n'}-f_n)(g_{n'}-g_n)`.
pub fn summation_by_parts_check(
    f: &Martingale,
    g: &Martingale,
    n: usize,
    n_prime: usize,
) -> Result<bool> {
    let fg = Paraproduct::new(f, g)?;
    let gf = Paraproduct::new(g, f)?;
    if n >= n_prime || n_prime > f.depth() {
        return Err(Error::BadIndexPair { lo: n, hi: n_prime, horizon: f.depth() });
    }
    let ft = f.process().leaf_table();
    let gt = g.process().leaf_table();
    let ok = (0..f.space().leaf_count()).all(|leaf| {
        let diag: f64 = ((n + 1)..=n_prime)
            .map(|j| (ft[leaf][j] - ft[leaf][j - 1]) * (gt[leaf][j] - gt[leaf][j - 1]))
            .sum();
        let lhs = fg.truncated_at(leaf, n, n_prime) + gf.truncated_at(leaf, n, n_prime) + diag;
        let rhs = (ft[leaf][n_prime] - ft[leaf][n]) * (gt[leaf][n_prime] - gt[leaf][n]);
        crate::tol::nearly_equal(lhs, rhs)
    });
    Ok(ok)
}

/// The splitting identity used to compare jump intervals against stopping
/// windows: for `s <= n' < n''`,
/// `Σ_{n'<i<j<=n''} df_i dg_j = Σ_{s<i<j<=n''} - Σ_{s<i<j<=n'} - (f_{n'}-f_s)(g_{n''}-g_{n'})`.
pub fn splitting_identity_check(
    pp: &Paraproduct,
    s: usize,
    n_prime: usize,
    n_second: usize,
) -> Result<bool> {
    if s > n_prime || n_prime >= n_second || n_second > pp.depth() {
        return Err(Error::BadIndexPair { lo: n_prime, hi: n_second, horizon: pp.depth() });
    }
    let ok = (0..pp.space().leaf_count()).all(|leaf| {
        let f = &pp.f_table[leaf];
        let g = &pp.g_table[leaf];
        let lhs = pp.truncated_at(leaf, n_prime, n_second);
        let tail = pp.truncated_at(leaf, s, n_second);
        let head = if s < n_prime { pp.truncated_at(leaf, s, n_prime) } else { 0.0 };
        let cross = (f[n_prime] - f[s]) * (g[n_second] - g[n_prime]);
        crate::tol::nearly_equal(lhs, tail - head - cross)
    });
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::rademacher_walk;
    use crate::martingale::is_martingale;
    use crate::space::StoppingTime;
    use crate::tol::nearly_equal;

    /// Leaf of the depth-3 walk whose sign path is (+1, -1, +1).
    const PMP: usize = 0b010;

    #[test]
    fn paraproduct_defining_sum() {
        let f = rademacher_walk(3);
        let pp = Paraproduct::new(&f, &f).unwrap();
        // increments +1, -1, +1 from 0: Π_3 = 0·1 + 1·(-1) + 0·1 = -1
        assert_eq!(pp.value_at(3, PMP), -1.0);
        assert!(pp.process().process().level_values(0).iter().all(|&v| v == 0.0));
        assert!(is_martingale(pp.process().process()));
    }

    #[test]
    fn paraproduct_rejects_mismatched_spaces() {
        let f = rademacher_walk(3);
        let g = rademacher_walk(4);
        assert!(matches!(Paraproduct::new(&f, &g), Err(Error::SpaceMismatch)));
    }

    #[test]
    fn paraproduct_with_constant_factor_vanishes() {
        let f = rademacher_walk(3);
        let c = Martingale::constant(f.space().clone(), 7.0);
        let pp = Paraproduct::new(&f, &c).unwrap();
        for n in 0..=3 {
            assert!(pp.process().process().level_values(n).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn truncated_two_routes_agree() {
        let f = rademacher_walk(4);
        let g = crate::generators::random_dyadic(4, 11, crate::generators::ScaleDist::LogNormal { sigma: 1.0 });
        let pp = Paraproduct::new(&f, &g).unwrap();
        for n in 0..4 {
            for n2 in (n + 1)..=4 {
                let a = pp.truncated(n, n2).unwrap();
                let b = pp.truncated_direct(n, n2).unwrap();
                for leaf in 0..f.space().leaf_count() {
                    assert!(nearly_equal(a.value(leaf), b.value(leaf)));
                }
            }
        }
        assert!(pp.truncated(2, 2).is_err());
        assert!(pp.truncated(3, 9).is_err());
    }

    #[test]
    fn truncated_small_cases() {
        let f = rademacher_walk(3);
        let pp = Paraproduct::new(&f, &f).unwrap();
        // adjacent indices: empty double sum
        let z = pp.truncated(1, 2).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        // the (+1,-1,+1) leaf over (0,3): (-1) + (1) + (-1) = -1
        let t = pp.truncated(0, 3).unwrap();
        assert_eq!(t.value(PMP), -1.0);
    }

    #[test]
    fn truncated_bilinearity() {
        let f = rademacher_walk(3);
        let g = crate::generators::random_dyadic(3, 5, crate::generators::ScaleDist::LogNormal { sigma: 1.0 });
        let scale = |m: &Martingale, c: f64| {
            Martingale::new(
                AdaptedProcess::from_level_values(
                    m.space().clone(),
                    m.process().levels().iter().map(|lv| lv.iter().map(|v| c * v).collect()).collect(),
                )
                .unwrap(),
            )
            .unwrap()
        };
        let pp = Paraproduct::new(&f, &g).unwrap();
        let pp_scaled = Paraproduct::new(&scale(&f, 2.0), &scale(&g, -3.0)).unwrap();
        let a = pp.truncated(0, 3).unwrap();
        let b = pp_scaled.truncated(0, 3).unwrap();
        for leaf in 0..f.space().leaf_count() {
            assert!(nearly_equal(b.value(leaf), -6.0 * a.value(leaf)));
        }
    }

    #[test]
    fn localized_matches_truncated_on_deterministic_windows() {
        let f = rademacher_walk(4);
        let g = rademacher_walk(4);
        let pp = Paraproduct::new(&f, &g).unwrap();
        let sp = f.space().clone();
        let seq = StoppingSequence::new(vec![
            StoppingTime::constant(sp.clone(), 0).unwrap(),
            StoppingTime::constant(sp.clone(), 4).unwrap(),
        ])
        .unwrap();
        let loc = pp.localized(&seq, 1).unwrap();
        let tr = pp.truncated(0, 4).unwrap();
        assert_eq!(loc.values(), tr.values());
        assert!(pp.localized(&seq, 2).is_err());
    }

    #[test]
    fn localized_equals_paraproduct_of_localized_pieces() {
        let f = crate::generators::random_dyadic(5, 3, crate::generators::ScaleDist::LogNormal { sigma: 1.0 });
        let g = crate::generators::random_dyadic(5, 4, crate::generators::ScaleDist::LogNormal { sigma: 1.0 });
        let aux = crate::generators::random_dyadic(5, 9, crate::generators::ScaleDist::LogNormal { sigma: 1.0 });
        let seq = crate::generators::crossing_sequence(&aux, &[0.4, 1.1, 2.7]).unwrap();
        let pp = Paraproduct::new(&f, &g).unwrap();
        for k in 1..=seq.windows() {
            let direct = pp.localized(&seq, k).unwrap();
            let fk = f.localize(&seq, k).unwrap();
            let gk = g.localize(&seq, k).unwrap();
            let inner = Paraproduct::new(fk.martingale(), gk.martingale()).unwrap();
            let pulled = fk.pull_back(&inner.process().process().terminal()).unwrap();
            for leaf in 0..f.space().leaf_count() {
                assert!(nearly_equal(direct.value(leaf), pulled.value(leaf)));
            }
        }
    }

    #[test]
    fn riemann_sum_full_grid_is_paraproduct() {
        let f = rademacher_walk(4);
        let g = crate::generators::random_dyadic(4, 2, crate::generators::ScaleDist::LogNormal { sigma: 1.0 });
        let pp = Paraproduct::new(&f, &g).unwrap();
        let grid = RandomPartition::full_grid(f.space()).unwrap();
        for t in 0..=4 {
            let s = riemann_sum(&f, &g, &grid, t).unwrap();
            for leaf in 0..f.space().leaf_count() {
                assert!(nearly_equal(s.value(leaf), pp.value_at(t, leaf)));
            }
        }
    }

    #[test]
    fn riemann_sum_coarse_partition() {
        let f = rademacher_walk(3);
        let g = rademacher_walk(3);
        let sp = f.space().clone();
        let coarse = RandomPartition::new(
            StoppingSequence::new(vec![
                StoppingTime::constant(sp.clone(), 0).unwrap(),
                StoppingTime::constant(sp.clone(), 3).unwrap(),
            ])
            .unwrap(),
        );
        let ft = f.process().leaf_table();
        let gt = g.process().leaf_table();
        for t in 0..=3 {
            let s = riemann_sum(&f, &g, &coarse, t).unwrap();
            for leaf in 0..sp.leaf_count() {
                let want = ft[leaf][0] * (gt[leaf][t] - gt[leaf][0]);
                assert!(nearly_equal(s.value(leaf), want));
            }
        }
    }

    #[test]
    fn summation_by_parts_examples() {
        let f = rademacher_walk(4);
        let g = crate::generators::random_dyadic(4, 7, crate::generators::ScaleDist::LogNormal { sigma: 1.0 });
        assert!(summation_by_parts_check(&f, &g, 0, 4).unwrap());
        assert!(summation_by_parts_check(&f, &f, 1, 3).unwrap());
        let c = Martingale::constant(f.space().clone(), 2.0);
        assert!(summation_by_parts_check(&f, &c, 0, 2).unwrap());
    }

    #[test]
    fn splitting_identity_examples() {
        let f = crate::generators::random_dyadic(5, 21, crate::generators::ScaleDist::LogNormal { sigma: 1.0 });
        let g = crate::generators::random_dyadic(5, 22, crate::generators::ScaleDist::LogNormal { sigma: 1.0 });
        let pp = Paraproduct::new(&f, &g).unwrap();
        for s in 0..3 {
            for n1 in s..4 {
                for n2 in (n1 + 1)..=5 {
                    assert!(splitting_identity_check(&pp, s, n1, n2).unwrap());
                }
            }
        }
        assert!(splitting_identity_check(&pp, 3, 2, 4).is_err());
    }
}
