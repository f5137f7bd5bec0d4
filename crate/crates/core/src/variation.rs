//! ρ-variation and λ-jump functionals of increment kernels, the recursive
//! stopping times that dominate paraproduct jumps, and brute-force oracles
//! for the dynamic programs.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::martingale::AdaptedProcess;
use crate::paraproduct::Paraproduct;
use crate::space::{same_space, FilteredSpace, RandomVariable, StoppingSequence, StoppingTime};

/// Horizon limit for the exhaustive partition enumeration.
pub const BRUTE_FORCE_LIMIT: usize = 14;

/// An O(1)-evaluable increment map `δ(i, j)` per leaf, `0 <= i < j <= horizon`.
pub trait IncrementKernel: Sync {
    fn space(&self) -> &Arc<FilteredSpace>;
    /// Largest admissible index; at most the depth of the space.
    fn horizon(&self) -> usize;
    fn eval(&self, leaf: usize, i: usize, j: usize) -> f64;
}

/// Scalar increments `δ(i,j) = f_j - f_i` of an adapted path.
pub struct ScalarKernel {
    space: Arc<FilteredSpace>,
    table: Vec<Vec<f64>>,
    horizon: usize,
}

impl ScalarKernel {
    pub fn new(process: &AdaptedProcess) -> Self {
        ScalarKernel {
            space: process.space().clone(),
            table: process.leaf_table(),
            horizon: process.depth(),
        }
    }

    pub fn with_horizon(process: &AdaptedProcess, horizon: usize) -> Result<Self> {
        process.space().check_level(horizon)?;
        let mut k = Self::new(process);
        k.horizon = horizon;
        Ok(k)
    }
}

impl IncrementKernel for ScalarKernel {
    fn space(&self) -> &Arc<FilteredSpace> {
        &self.space
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn eval(&self, leaf: usize, i: usize, j: usize) -> f64 {
        self.table[leaf][j] - self.table[leaf][i]
    }
}

/// Truncated-paraproduct increments `δ(i,j) = Π_{i,j}(f,g)`.
pub struct ParaproductKernel {
    pp: Paraproduct,
    horizon: usize,
}

impl ParaproductKernel {
    pub fn new(pp: Paraproduct) -> Self {
        let horizon = pp.depth();
        ParaproductKernel { pp, horizon }
    }

    pub fn with_horizon(pp: Paraproduct, horizon: usize) -> Result<Self> {
        pp.space().check_level(horizon)?;
        Ok(ParaproductKernel { pp, horizon })
    }
}

impl IncrementKernel for ParaproductKernel {
    fn space(&self) -> &Arc<FilteredSpace> {
        self.pp.space()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn eval(&self, leaf: usize, i: usize, j: usize) -> f64 {
        self.pp.truncated_at(leaf, i, j)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(Error::NonPositiveExponent(rho));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::NonPositiveThreshold(lambda));
    }
    Ok(())
}

/// Exact ρ-variation: leaf-wise supremum over all increasing index tuples of
/// `(Σ_k |δ(n_{k-1}, n_k)|^ρ)^{1/ρ}`, by the quadratic dynamic program
/// `V(j) = max(0, max_{i<j} V(i) + |δ(i,j)|^ρ)`.
pub fn rho_variation<K: IncrementKernel>(kernel: &K, rho: f64) -> Result<RandomVariable> {
    check_rho(rho)?;
    let h = kernel.horizon();
    let vals: Vec<f64> = (0..kernel.space().leaf_count())
        .into_par_iter()
        .map(|leaf| {
            let mut best = vec![0.0f64; h + 1];
            let mut top = 0.0f64;
            for j in 1..=h {
                let mut v = 0.0f64;
                for i in 0..j {
                    let cand = best[i] + kernel.eval(leaf, i, j).abs().powf(rho);
                    if cand > v {
                        v = cand;
                    }
                }
                best[j] = v;
                if v > top {
                    top = v;
                }
            }
            top.powf(1.0 / rho)
        })
        .collect();
    RandomVariable::new(kernel.space().clone(), vals)
}

/// Exact λ-jump counting function: leaf-wise maximum number of increments of
/// size at least λ over all increasing index tuples, by the dynamic program
/// `J(j) = max(J(j-1), max_{i<j, |δ(i,j)| >= λ} J(i) + 1)`.
pub fn jump_count<K: IncrementKernel>(kernel: &K, lambda: f64) -> Result<RandomVariable> {
    check_lambda(lambda)?;
    let h = kernel.horizon();
    let vals: Vec<f64> = (0..kernel.space().leaf_count())
        .into_par_iter()
        .map(|leaf| {
            let mut best = vec![0u32; h + 1];
            for j in 1..=h {
                let mut v = best[j - 1];
                for i in 0..j {
                    if kernel.eval(leaf, i, j).abs() >= lambda && best[i] + 1 > v {
                        v = best[i] + 1;
                    }
                }
                best[j] = v;
            }
            f64::from(best[h])
        })
        .collect();
    RandomVariable::new(kernel.space().clone(), vals)
}

fn check_brute_horizon(h: usize) -> Result<()> {
    if h > BRUTE_FORCE_LIMIT {
        return Err(Error::HorizonTooLarge { horizon: h, limit: BRUTE_FORCE_LIMIT });
    }
    Ok(())
}

/// Reference oracle: enumerates all index subsets of `{0..=horizon}`.
pub fn brute_force_variation<K: IncrementKernel>(kernel: &K, rho: f64) -> Result<RandomVariable> {
    check_rho(rho)?;
    check_brute_horizon(kernel.horizon())?;
    let h = kernel.horizon();
    let masks = 1u32 << (h + 1);
    let vals: Vec<f64> = (0..kernel.space().leaf_count())
        .into_par_iter()
        .map(|leaf| {
            let mut top = 0.0f64;
            for mask in 0u32..masks {
                let mut rest = mask;
                let mut prev: Option<usize> = None;
                let mut sum = 0.0f64;
                while rest != 0 {
                    let idx = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    if let Some(p) = prev {
                        sum += kernel.eval(leaf, p, idx).abs().powf(rho);
                    }
                    prev = Some(idx);
                }
                if sum > top {
                    top = sum;
                }
            }
            top.powf(1.0 / rho)
        })
        .collect();
    RandomVariable::new(kernel.space().clone(), vals)
}

/// Reference oracle for the jump count, by the same enumeration.
pub fn brute_force_jump_count<K: IncrementKernel>(kernel: &K, lambda: f64) -> Result<RandomVariable> {
    check_lambda(lambda)?;
    check_brute_horizon(kernel.horizon())?;
    let h = kernel.horizon();
    let masks = 1u32 << (h + 1);
    let vals: Vec<f64> = (0..kernel.space().leaf_count())
        .into_par_iter()
        .map(|leaf| {
            let mut top = 0u32;
            for mask in 0u32..masks {
                let mut rest = mask;
                let mut prev: Option<usize> = None;
                let mut count = 0u32;
                while rest != 0 {
                    let idx = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    if let Some(p) = prev {
                        if kernel.eval(leaf, p, idx).abs() >= lambda {
                            count += 1;
                        }
                    }
                    prev = Some(idx);
                }
                if count > top {
                    top = count;
                }
            }
            f64::from(top)
        })
        .collect();
    RandomVariable::new(kernel.space().clone(), vals)
}

/// The recursive stopping times that dominate paraproduct jumps: `S_0 = 0` and
/// `S_k` is the first `n > S_{k-1}` at which either the truncated paraproduct
/// over `(S_{k-1}, n]` or the running product `|f_{n'} - f_{S_{k-1}}| |g_n - g_{n'}|`
/// reaches `λ/3`. Infinity is encoded as `depth + 1`, and `T_k = S_k ∧ n_max`.
#[derive(Debug, Clone)]
pub struct JumpStoppingTimes {
    space: Arc<FilteredSpace>,
    lambda: f64,
    n_max: usize,
    // s[k][leaf]; the infinite time is depth + 1
    s: Vec<Vec<usize>>,
    capped: StoppingSequence,
}

impl JumpStoppingTimes {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Raw times `S_k`, with `depth + 1` standing for infinity.
    pub fn raw(&self) -> &[Vec<usize>] {
        &self.s
    }

    /// The capped sequence `T_k = S_k ∧ n_max`, each a valid stopping time.
    pub fn capped(&self) -> &StoppingSequence {
        &self.capped
    }

    /// The counting function: per leaf, the number of `k >= 1` with `S_k <= n_max`.
    pub fn count(&self) -> RandomVariable {
        let vals = (0..self.space.leaf_count())
            .map(|leaf| {
                self.s
                    .iter()
                    .skip(1)
                    .filter(|sk| sk[leaf] <= self.n_max)
                    .count() as f64
            })
            .collect();
        RandomVariable::new(self.space.clone(), vals).expect("leaf count matches")
    }
}

/// Builds the jump stopping times of a martingale pair at threshold `λ`.
pub fn jump_stopping_times(
    f: &crate::martingale::Martingale,
    g: &crate::martingale::Martingale,
    lambda: f64,
    n_max: usize,
) -> Result<JumpStoppingTimes> {
    check_lambda(lambda)?;
    if !same_space(f.space(), g.space()) {
        return Err(Error::SpaceMismatch);
    }
    f.space().check_level(n_max)?;
    let space = f.space().clone();
    let depth = space.depth();
    let infinity = depth + 1;
    let pp = Paraproduct::new(f, g)?;
    let ft = f.process().leaf_table();
    let gt = g.process().leaf_table();
    let third = lambda / 3.0;

    // Per-leaf list of finite trigger times, strictly increasing.
    let finite: Vec<Vec<usize>> = (0..space.leaf_count())
        .into_par_iter()
        .map(|leaf| {
            let mut times = Vec::new();
            let mut cur = 0usize;
            'outer: while cur < depth {
                for n in (cur + 1)..=depth {
                    let trig_pp = pp.truncated_at(leaf, cur, n).abs() >= third;
                    let trig_prod = ((cur + 1)..=n).any(|np| {
                        ((ft[leaf][np] - ft[leaf][cur]) * (gt[leaf][n] - gt[leaf][np])).abs()
                            >= third
                    });
                    if trig_pp || trig_prod {
                        times.push(n);
                        cur = n;
                        continue 'outer;
                    }
                }
                break;
            }
            times
        })
        .collect();

    let max_finite = finite.iter().map(Vec::len).max().unwrap_or(0);
    let k_count = max_finite + 1; // S_0 plus every attained k
    let mut s = vec![vec![infinity; space.leaf_count()]; k_count];
    for leaf in 0..space.leaf_count() {
        s[0][leaf] = 0;
        for (k, &t) in finite[leaf].iter().enumerate() {
            s[k + 1][leaf] = t;
        }
    }
    let capped_times = s
        .iter()
        .map(|sk| {
            let t: Vec<usize> = sk.iter().map(|&v| v.min(n_max)).collect();
            StoppingTime::new(space.clone(), t)
        })
        .collect::<Result<Vec<_>>>()?;
    let capped = StoppingSequence::new(capped_times)?;
    Ok(JumpStoppingTimes { space, lambda, n_max, s, capped })
}

/// Per-leaf result of the jump-domination comparison.
#[derive(Debug, Clone)]
pub struct JumpComparison {
    /// λ-jump count of the paraproduct kernel restricted to `{0..=n_max}`.
    pub jump_counts: RandomVariable,
    /// Number of finite stopping times within the horizon.
    pub stopping_counts: RandomVariable,
    /// Leaf-wise conjunction of the count domination and the covering claim.
    pub holds: Vec<bool>,
}

impl JumpComparison {
    pub fn all_hold(&self) -> bool {
        self.holds.iter().all(|&b| b)
    }
}

/// Checks leaf-wise that the paraproduct jump count is dominated by the
/// stopping-time count, and that every interval `(n', n''] ⊆ (0, n_max]`
/// whose truncated paraproduct reaches `λ` contains one of the `S_k`.
pub fn jump_comparison_check(
    f: &crate::martingale::Martingale,
    g: &crate::martingale::Martingale,
    lambda: f64,
    n_max: usize,
) -> Result<JumpComparison> {
    let st = jump_stopping_times(f, g, lambda, n_max)?;
    let pp = Paraproduct::new(f, g)?;
    let kernel = ParaproductKernel::with_horizon(pp, n_max)?;
    let jump_counts = jump_count(&kernel, lambda)?;
    let stopping_counts = st.count();
    let space = f.space().clone();
    let holds = (0..space.leaf_count())
        .map(|leaf| {
            if jump_counts.value(leaf) > stopping_counts.value(leaf) {
                return false;
            }
            // covering claim
            for n1 in 0..n_max {
                for n2 in (n1 + 1)..=n_max {
                    if kernel.eval(leaf, n1, n2).abs() >= lambda {
                        let covered = st
                            .raw()
                            .iter()
                            .skip(1)
                            .any(|sk| sk[leaf] > n1 && sk[leaf] <= n2);
                        if !covered {
                            return false;
                        }
                    }
                }
            }
            true
        })
        .collect();
    Ok(JumpComparison { jump_counts, stopping_counts, holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{rademacher_walk, random_dyadic, ScaleDist};
    use crate::martingale::Martingale;

    /// Single-leaf space carrying one deterministic path.
    fn path_kernel(path: &[f64]) -> ScalarKernel {
        let depth = path.len() - 1;
        let levels = (0..=depth).map(|_| vec![vec![0usize]]).collect();
        let sp = FilteredSpace::new(vec![1.0], levels).unwrap();
        let proc =
            AdaptedProcess::from_level_values(sp, path.iter().map(|&v| vec![v]).collect()).unwrap();
        ScalarKernel::new(&proc)
    }

    #[test]
    fn sawtooth_examples() {
        let k = path_kernel(&[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(rho_variation(&k, 1.0).unwrap().value(0), 3.0);
        assert!((rho_variation(&k, 2.0).unwrap().value(0) - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(jump_count(&k, 1.0).unwrap().value(0), 3.0);
        assert_eq!(jump_count(&k, 1.5).unwrap().value(0), 0.0);
        assert!(rho_variation(&k, 0.0).is_err());
        assert!(jump_count(&k, -1.0).is_err());
    }

    #[test]
    fn degenerate_path() {
        let k = path_kernel(&[0.0, 0.0]);
        assert_eq!(rho_variation(&k, 1.5).unwrap().value(0), 0.0);
        assert_eq!(jump_count(&k, 0.5).unwrap().value(0), 0.0);
    }

    #[test]
    fn variation_dominates_single_increment() {
        let f = random_dyadic(5, 31, ScaleDist::LogNormal { sigma: 1.0 });
        let k = ScalarKernel::new(f.process());
        let v = rho_variation(&k, 2.5).unwrap();
        for leaf in 0..f.space().leaf_count() {
            let mut single = 0.0f64;
            for i in 0..5 {
                for j in (i + 1)..=5 {
                    single = single.max(k.eval(leaf, i, j).abs());
                }
            }
            assert!(v.value(leaf) >= single - 1e-12);
        }
    }

    #[test]
    fn dp_matches_brute_force() {
        for seed in 0..8 {
            let depth = 3 + (seed % 4) as u32;
            let f = random_dyadic(depth, seed, ScaleDist::LogNormal { sigma: 1.0 });
            let g = random_dyadic(depth, seed + 100, ScaleDist::LogNormal { sigma: 1.0 });
            let sk = ScalarKernel::new(f.process());
            let pk = ParaproductKernel::new(Paraproduct::new(&f, &g).unwrap());
            for rho in [0.7, 1.0, 1.5, 2.0, 3.0] {
                let a = rho_variation(&sk, rho).unwrap();
                let b = brute_force_variation(&sk, rho).unwrap();
                assert_eq!(a.values(), b.values());
                let a = rho_variation(&pk, rho).unwrap();
                let b = brute_force_variation(&pk, rho).unwrap();
                assert_eq!(a.values(), b.values());
            }
            for lambda in [0.25, 1.0, 4.0] {
                let a = jump_count(&sk, lambda).unwrap();
                let b = brute_force_jump_count(&sk, lambda).unwrap();
                assert_eq!(a.values(), b.values());
            }
        }
    }

    #[test]
    fn brute_force_guard() {
        let f = rademacher_walk(2);
        let k = ScalarKernel::new(f.process());
        assert!(brute_force_variation(&k, 1.0).is_ok());
        let path: Vec<f64> = (0..=15).map(|i| f64::from(i % 2)).collect();
        let k = path_kernel(&path);
        assert!(matches!(
            brute_force_variation(&k, 1.0),
            Err(Error::HorizonTooLarge { .. })
        ));
    }

    #[test]
    fn variation_monotone_in_rho() {
        let f = random_dyadic(5, 77, ScaleDist::LogNormal { sigma: 1.0 });
        let k = ScalarKernel::new(f.process());
        let grid = [0.8, 1.0, 1.5, 2.0, 2.5, 3.0];
        let values: Vec<RandomVariable> =
            grid.iter().map(|&r| rho_variation(&k, r).unwrap()).collect();
        for w in values.windows(2) {
            for leaf in 0..f.space().leaf_count() {
                assert!(w[1].value(leaf) <= w[0].value(leaf) * (1.0 + 1e-12) + 1e-12);
            }
        }
    }

    #[test]
    fn jump_count_bounded_by_variation() {
        let f = random_dyadic(6, 13, ScaleDist::LogNormal { sigma: 1.0 });
        let k = ScalarKernel::new(f.process());
        for lambda in [0.5, 1.0, 2.0] {
            let jumps = jump_count(&k, lambda).unwrap();
            for rho in [1.0, 1.5, 2.0] {
                let var = rho_variation(&k, rho).unwrap();
                for leaf in 0..f.space().leaf_count() {
                    let cap = (var.value(leaf) / lambda).powf(rho).floor();
                    assert!(jumps.value(leaf) <= cap + 1e-9);
                }
            }
        }
    }

    #[test]
    fn jump_count_scaling_homogeneity() {
        let f = random_dyadic(5, 44, ScaleDist::LogNormal { sigma: 1.0 });
        let scaled = Martingale::new(
            AdaptedProcess::from_level_values(
                f.space().clone(),
                f.process()
                    .levels()
                    .iter()
                    .map(|lv| lv.iter().map(|v| -2.5 * v).collect())
                    .collect(),
            )
            .unwrap(),
        )
        .unwrap();
        let k = ScalarKernel::new(f.process());
        let ks = ScalarKernel::new(scaled.process());
        let lambda = 0.7;
        let a = jump_count(&k, lambda).unwrap();
        let b = jump_count(&ks, lambda * 2.5).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn rademacher_consecutive_lower_bound() {
        for d in [3u32, 5, 7] {
            let f = rademacher_walk(d);
            let k = ScalarKernel::new(f.process());
            for rho in [1.5, 2.0, 3.0] {
                let v = rho_variation(&k, rho).unwrap();
                let bound = f64::from(d).powf(1.0 / rho);
                for leaf in 0..f.space().leaf_count() {
                    assert!(v.value(leaf) >= bound - 1e-12);
                }
            }
        }
    }

    #[test]
    fn stopping_times_trivial_cases() {
        let sp = FilteredSpace::dyadic(4);
        let zero = Martingale::constant(sp.clone(), 0.0);
        let st = jump_stopping_times(&zero, &zero, 1.0, 4).unwrap();
        assert_eq!(st.raw().len(), 1); // only S_0
        assert!(st.count().values().iter().all(|&v| v == 0.0));

        // threshold above every trigger
        let f = rademacher_walk(4);
        let st = jump_stopping_times(&f, &f, 1e6, 4).unwrap();
        assert!(st.count().values().iter().all(|&v| v == 0.0));
        assert!(jump_stopping_times(&f, &f, 0.0, 4).is_err());
    }

    #[test]
    fn stopping_times_are_measurable() {
        for seed in [1u64, 2, 3] {
            let f = random_dyadic(5, seed, ScaleDist::LogNormal { sigma: 1.0 });
            let g = random_dyadic(5, seed + 9, ScaleDist::LogNormal { sigma: 1.0 });
            for lambda in [0.25, 1.0, 4.0] {
                // construction succeeds only if every T_k passes the stopping check
                let st = jump_stopping_times(&f, &g, lambda, 5).unwrap();
                assert!(st.capped().windows() >= 1);
            }
        }
    }

    #[test]
    fn jump_comparison_holds() {
        let zero = Martingale::constant(FilteredSpace::dyadic(3), 0.0);
        assert!(jump_comparison_check(&zero, &zero, 1.0, 3).unwrap().all_hold());

        let f = rademacher_walk(6);
        let cmp = jump_comparison_check(&f, &f, 1.0, 6).unwrap();
        assert!(cmp.all_hold());

        for seed in [5u64, 6] {
            let f = random_dyadic(6, seed, ScaleDist::LogNormal { sigma: 1.0 });
            let g = random_dyadic(6, seed + 50, ScaleDist::LogNormal { sigma: 1.0 });
            for lambda in [0.5, 2.0] {
                assert!(jump_comparison_check(&f, &g, lambda, 6).unwrap().all_hold());
            }
        }
    }

    #[test]
    fn jump_comparison_scale_invariant() {
        let f = random_dyadic(5, 8, ScaleDist::LogNormal { sigma: 1.0 });
        let g = random_dyadic(5, 9, ScaleDist::LogNormal { sigma: 1.0 });
        let scale = |m: &Martingale, c: f64| {
            Martingale::new(
                AdaptedProcess::from_level_values(
                    m.space().clone(),
                    m.process()
                        .levels()
                        .iter()
                        .map(|lv| lv.iter().map(|v| c * v).collect())
                        .collect(),
                )
                .unwrap(),
            )
            .unwrap()
        };
        let lambda = 1.3;
        let a = jump_comparison_check(&f, &g, lambda, 5).unwrap();
        let b = jump_comparison_check(&scale(&f, 2.0), &scale(&g, 3.0), lambda * 6.0, 5).unwrap();
        assert_eq!(a.jump_counts.values(), b.jump_counts.values());
        assert_eq!(a.stopping_counts.values(), b.stopping_counts.values());
    }
}
