//! The 3-dimensional Heisenberg group, the lift `H_n = (f_n, g_n, Π_n(f,g))`
//! of a martingale pair, and rough variation/jump functionals of the
//! associated box distance.

use std::ops::Mul;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::martingale::Martingale;
use crate::paraproduct::Paraproduct;
use crate::space::{FilteredSpace, RandomVariable};
use crate::tol::nearly_equal;
use crate::variation::{jump_count, rho_variation, IncrementKernel};

/// A point of the Heisenberg group with product
/// `(x,y,z)·(x',y',z') = (x+x', y+y', z+z'+xy')`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeisenbergElement {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl HeisenbergElement {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        HeisenbergElement { x, y, z }
    }

    pub fn identity() -> Self {
        HeisenbergElement { x: 0.0, y: 0.0, z: 0.0 }
    }

    /// Group inverse `(-x, -y, -z + xy)`.
    pub fn inverse(self) -> Self {
        HeisenbergElement { x: -self.x, y: -self.y, z: -self.z + self.x * self.y }
    }

    /// Homogeneous box norm `max(|x|, |y|, |z|^{1/2})`.
    pub fn box_norm(self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs().sqrt())
    }

    /// Anisotropic dilation `(cx, cy, c²z)`; the box norm scales by `|c|`.
    pub fn dilate(self, c: f64) -> Self {
        HeisenbergElement { x: c * self.x, y: c * self.y, z: c * c * self.z }
    }
}

impl Mul for HeisenbergElement {
    type Output = HeisenbergElement;

    fn mul(self, rhs: HeisenbergElement) -> HeisenbergElement {
        HeisenbergElement {
            x: self.x + rhs.x,
            y: self.y + rhs.y,
            z: self.z + rhs.z + self.x * rhs.y,
        }
    }
}

/// Left-invariant distance `d(a, b) = ‖a⁻¹ b‖`.
pub fn box_distance(a: HeisenbergElement, b: HeisenbergElement) -> f64 {
    (a.inverse() * b).box_norm()
}

/// The Heisenberg lift of a martingale pair: per leaf, the path
/// `H_n = (f_n, g_n, Π_n(f,g))`.
#[derive(Debug, Clone)]
pub struct HeisenbergPath {
    space: Arc<FilteredSpace>,
    // points[leaf][n]
    points: Vec<Vec<HeisenbergElement>>,
}

impl HeisenbergPath {
    pub fn space(&self) -> &Arc<FilteredSpace> {
        &self.space
    }

    pub fn depth(&self) -> usize {
        self.points[0].len() - 1
    }

    pub fn point(&self, leaf: usize, n: usize) -> HeisenbergElement {
        self.points[leaf][n]
    }
}

/// Builds the lift from the paraproduct prefix data.
pub fn lift(f: &Martingale, g: &Martingale) -> Result<HeisenbergPath> {
    let pp = Paraproduct::new(f, g)?;
    let ft = f.process().leaf_table();
    let gt = g.process().leaf_table();
    let space = f.space().clone();
    let points = (0..space.leaf_count())
        .map(|leaf| {
            (0..=space.depth())
                .map(|n| HeisenbergElement::new(ft[leaf][n], gt[leaf][n], pp.value_at(n, leaf)))
                .collect()
        })
        .collect();
    Ok(HeisenbergPath { space, points })
}

/// Checks the group form of the increment identity: leaf-wise,
/// `H_n · (f_{n'} - f_n, g_{n'} - g_n, Π_{n,n'}(f,g)) = H_{n'}`.
pub fn chen_check(f: &Martingale, g: &Martingale, n: usize, n_prime: usize) -> Result<bool> {
    let path = lift(f, g)?;
    let pp = Paraproduct::new(f, g)?;
    if n >= n_prime || n_prime > path.depth() {
        return Err(Error::BadIndexPair { lo: n, hi: n_prime, horizon: path.depth() });
    }
    let ok = (0..path.space.leaf_count()).all(|leaf| {
        let a = path.point(leaf, n);
        let b = path.point(leaf, n_prime);
        let inc = HeisenbergElement::new(b.x - a.x, b.y - a.y, pp.truncated_at(leaf, n, n_prime));
        let prod = a * inc;
        nearly_equal(prod.x, b.x) && nearly_equal(prod.y, b.y) && nearly_equal(prod.z, b.z)
    });
    Ok(ok)
}

/// Kernel `δ(i,j) = d(H_i, H_j)` of the lifted path.
pub struct RoughKernel {
    path: HeisenbergPath,
    horizon: usize,
}

impl RoughKernel {
    pub fn new(f: &Martingale, g: &Martingale) -> Result<Self> {
        let path = lift(f, g)?;
        let horizon = path.depth();
        Ok(RoughKernel { path, horizon })
    }

    pub fn with_horizon(f: &Martingale, g: &Martingale, horizon: usize) -> Result<Self> {
        let path = lift(f, g)?;
        path.space().check_level(horizon)?;
        Ok(RoughKernel { path, horizon })
    }
}

impl IncrementKernel for RoughKernel {
    fn space(&self) -> &Arc<FilteredSpace> {
        self.path.space()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn eval(&self, leaf: usize, i: usize, j: usize) -> f64 {
        box_distance(self.path.point(leaf, i), self.path.point(leaf, j))
    }
}

/// ρ-variation of the lifted path in the box distance.
pub fn rough_variation(f: &Martingale, g: &Martingale, rho: f64) -> Result<RandomVariable> {
    rho_variation(&RoughKernel::new(f, g)?, rho)
}

/// λ-jump count of the lifted path in the box distance.
pub fn rough_jump_count(f: &Martingale, g: &Martingale, lambda: f64) -> Result<RandomVariable> {
    jump_count(&RoughKernel::new(f, g)?, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{rademacher_walk, random_dyadic, ScaleDist};
    use crate::variation::ScalarKernel;
    use rand::{Rng, SeedableRng};

    #[test]
    fn product_and_identity() {
        let a = HeisenbergElement::new(1.0, 2.0, 3.0);
        let b = HeisenbergElement::new(4.0, 5.0, 6.0);
        assert_eq!(a * b, HeisenbergElement::new(5.0, 7.0, 14.0));
        let e = HeisenbergElement::identity();
        assert_eq!(e * a, a);
        assert_eq!(a * e, a);
    }

    #[test]
    fn associativity_on_random_triples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let p = |r: &mut rand_chacha::ChaCha8Rng| {
                HeisenbergElement::new(
                    r.gen_range(-3.0..3.0),
                    r.gen_range(-3.0..3.0),
                    r.gen_range(-3.0..3.0),
                )
            };
            let (a, b, c) = (p(&mut rng), p(&mut rng), p(&mut rng));
            let lhs = (a * b) * c;
            let rhs = a * (b * c);
            assert!(nearly_equal(lhs.x, rhs.x));
            assert!(nearly_equal(lhs.y, rhs.y));
            assert!(nearly_equal(lhs.z, rhs.z));
        }
    }

    #[test]
    fn inverse_examples() {
        let a = HeisenbergElement::new(1.0, 2.0, 3.0);
        assert_eq!(a.inverse(), HeisenbergElement::new(-1.0, -2.0, -1.0));
        assert_eq!(a * a.inverse(), HeisenbergElement::identity());
        assert_eq!(a.inverse() * a, HeisenbergElement::identity());
        let central = HeisenbergElement::new(0.0, 0.0, 4.0);
        assert_eq!(central.inverse(), HeisenbergElement::new(0.0, 0.0, -4.0));
        assert_eq!(a.inverse().inverse(), a);
    }

    #[test]
    fn box_norm_examples() {
        assert_eq!(HeisenbergElement::new(3.0, -2.0, -9.0).box_norm(), 3.0);
        assert_eq!(HeisenbergElement::new(0.0, 0.0, 4.0).box_norm(), 2.0);
    }

    #[test]
    fn box_norm_subadditive_and_triangle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let p = |r: &mut rand_chacha::ChaCha8Rng| {
            HeisenbergElement::new(
                r.gen_range(-2.0..2.0),
                r.gen_range(-2.0..2.0),
                r.gen_range(-4.0..4.0),
            )
        };
        for _ in 0..2000 {
            let (a, b, c) = (p(&mut rng), p(&mut rng), p(&mut rng));
            assert!((a * b).box_norm() <= a.box_norm() + b.box_norm() + 1e-12);
            assert!(box_distance(a, c) <= box_distance(a, b) + box_distance(b, c) + 1e-12);
            // left invariance
            let h = p(&mut rng);
            assert!(nearly_equal(box_distance(h * a, h * b), box_distance(a, b)));
        }
    }

    #[test]
    fn dilation_homogeneity() {
        let a = HeisenbergElement::new(1.5, -0.5, 2.0);
        for c in [-3.0, -1.0, 0.5, 2.0] {
            assert!(nearly_equal(a.dilate(c).box_norm(), c.abs() * a.box_norm()));
        }
    }

    #[test]
    fn lift_examples() {
        let sp = FilteredSpace::dyadic(3);
        let zero = Martingale::constant(sp, 0.0);
        let path = lift(&zero, &zero).unwrap();
        for n in 0..=3 {
            assert_eq!(path.point(0, n), HeisenbergElement::identity());
        }
        let f = rademacher_walk(3);
        let path = lift(&f, &f).unwrap();
        // the (+1,-1,+1) leaf: H_3 = (1, 1, -1)
        assert_eq!(path.point(0b010, 3), HeisenbergElement::new(1.0, 1.0, -1.0));
    }

    #[test]
    fn chen_relation_exhaustive() {
        let f = random_dyadic(6, 3, ScaleDist::LogNormal { sigma: 1.0 });
        let g = random_dyadic(6, 4, ScaleDist::LogNormal { sigma: 1.0 });
        for n in 0..6 {
            for n2 in (n + 1)..=6 {
                assert!(chen_check(&f, &g, n, n2).unwrap());
            }
        }
        let c = Martingale::constant(f.space().clone(), 3.0);
        assert!(chen_check(&f, &c, 0, 6).unwrap());
        assert!(chen_check(&f, &g, 2, 2).is_err());
    }

    #[test]
    fn rough_kernel_matches_max_formula() {
        let f = random_dyadic(5, 6, ScaleDist::LogNormal { sigma: 1.0 });
        let g = random_dyadic(5, 7, ScaleDist::LogNormal { sigma: 1.0 });
        let k = RoughKernel::new(&f, &g).unwrap();
        let pp = Paraproduct::new(&f, &g).unwrap();
        let ft = f.process().leaf_table();
        let gt = g.process().leaf_table();
        for leaf in 0..f.space().leaf_count() {
            for i in 0..5 {
                for j in (i + 1)..=5 {
                    let want = (ft[leaf][j] - ft[leaf][i])
                        .abs()
                        .max((gt[leaf][j] - gt[leaf][i]).abs())
                        .max(pp.truncated_at(leaf, i, j).abs().sqrt());
                    assert!(nearly_equal(k.eval(leaf, i, j), want));
                }
            }
        }
    }

    #[test]
    fn rough_functionals_trivial_and_dominating() {
        let sp = FilteredSpace::dyadic(4);
        let zero = Martingale::constant(sp, 0.0);
        assert!(rough_variation(&zero, &zero, 2.5)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        assert!(rough_jump_count(&zero, &zero, 1.0)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));

        // the distance dominates |Δf|, so rough jumps dominate scalar jumps
        let f = random_dyadic(5, 10, ScaleDist::LogNormal { sigma: 1.0 });
        let g = random_dyadic(5, 11, ScaleDist::LogNormal { sigma: 1.0 });
        for lambda in [0.5, 1.0, 2.0] {
            let rough = rough_jump_count(&f, &g, lambda).unwrap();
            let scalar = jump_count(&ScalarKernel::new(f.process()), lambda).unwrap();
            for leaf in 0..f.space().leaf_count() {
                assert!(rough.value(leaf) >= scalar.value(leaf));
            }
        }
    }
}
