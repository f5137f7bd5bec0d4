//! The inequality checks: each computes exact left and right sides on the
//! finite space and emits a [`CheckReport`]. Estimates with explicit
//! constants (Doob, weighted Doob, weighted square-function domination)
//! assert their bound; the rest report the measured ratio.

use crate::error::{Error, Result};
use crate::heisenberg::{rough_jump_count, rough_variation};
use crate::martingale::{DerivedMartingale, Martingale};
use crate::paraproduct::Paraproduct;
use crate::report::CheckReport;
use crate::space::{
    conjugate, mixed_lp_lq_norm, same_space, ExponentTriple, RandomVariable, StoppingSequence,
};
use crate::variation::{jump_count, rho_variation, ParaproductKernel, ScalarKernel};

/// Constant in the weighted maximal-vs-square estimate.
pub const WEIGHTED_BDG_CONSTANT: f64 = 16.0 * (std::f64::consts::SQRT_2 + 1.0);

fn check_p_open(p: f64) -> Result<()> {
    if p.is_nan() || p <= 1.0 || p.is_infinite() {
        return Err(Error::BadExponents(format!("p = {p} must lie in (1, ∞)")));
    }
    Ok(())
}

fn check_p_closed_top(p: f64) -> Result<()> {
    if p.is_nan() || p <= 1.0 {
        return Err(Error::BadExponents(format!("p = {p} must lie in (1, ∞]")));
    }
    Ok(())
}

/// `‖ V_ρ(scalar increments of f) ‖_p` against `‖f‖_p`; no explicit constant.
pub fn check_lepingle(f: &Martingale, p: f64, rho: f64) -> Result<CheckReport> {
    check_p_open(p)?;
    let variation = rho_variation(&ScalarKernel::new(f.process()), rho)?;
    let lhs = variation.lp_norm(p)?;
    let rhs = f.lp_norm(p)?;
    Ok(CheckReport::from_sides("lepingle", lhs, rhs, None)
        .with_exponents(Some(p), None, None)
        .with_rho(rho))
}

/// `‖ N_λ(f)^{1/2} ‖_p` against `λ⁻¹ ‖f‖_p`; no explicit constant.
pub fn check_bourgain_jump(f: &Martingale, p: f64, lambda: f64) -> Result<CheckReport> {
    check_p_open(p)?;
    let jumps = jump_count(&ScalarKernel::new(f.process()), lambda)?;
    let lhs = jumps.map(f64::sqrt).lp_norm(p)?;
    let rhs = f.lp_norm(p)? / lambda;
    Ok(CheckReport::from_sides("bourgain_jump", lhs, rhs, None)
        .with_exponents(Some(p), None, None)
        .with_lambda(lambda))
}

/// `‖Mf‖_p <= p' ‖f‖_p`; the constant is asserted.
pub fn check_doob(f: &Martingale, p: f64) -> Result<CheckReport> {
    check_p_closed_top(p)?;
    let lhs = f.maximal_function().lp_norm(p)?;
    let rhs = f.lp_norm(p)?;
    Ok(CheckReport::from_sides("doob", lhs, rhs, Some(conjugate(p)))
        .with_exponents(Some(p), None, None))
}

/// `‖Mf‖_{L^p(w)} <= p' ‖f_N‖_{L^p(Mw)}`; the constant is asserted.
pub fn check_weighted_doob(f: &Martingale, w: &RandomVariable, p: f64) -> Result<CheckReport> {
    check_p_closed_top(p)?;
    if !same_space(f.space(), w.space()) {
        return Err(Error::SpaceMismatch);
    }
    let w_mart = Martingale::from_terminal(w);
    let max_w = w_mart.maximal_function();
    let lhs = f.maximal_function().weighted_lp_norm(w, p)?;
    let rhs = f.process().terminal().weighted_lp_norm(&max_w, p)?;
    Ok(CheckReport::from_sides("weighted_doob", lhs, rhs, Some(conjugate(p)))
        .with_exponents(Some(p), None, None))
}

/// The two-sided maximal/square comparison: reports `‖Mf‖_p / ‖Sf‖_p` and its
/// reciprocal; no explicit constants.
pub fn check_bdg(f: &Martingale, p: f64) -> Result<[CheckReport; 2]> {
    if p.is_nan() || p < 1.0 || p.is_infinite() {
        return Err(Error::BadExponents(format!("p = {p} must lie in [1, ∞)")));
    }
    let m = f.maximal_function().lp_norm(p)?;
    let s = f.square_function().lp_norm(p)?;
    Ok([
        CheckReport::from_sides("bdg_max_over_square", m, s, None).with_exponents(
            Some(p),
            None,
            None,
        ),
        CheckReport::from_sides("bdg_square_over_max", s, m, None).with_exponents(
            Some(p),
            None,
            None,
        ),
    ])
}

/// Weighted L¹ domination of the maximal function by the square function:
/// `‖Mf‖_{L¹(w)} <= 16(√2+1) ‖Sf‖_{L¹(Mw)}`; the constant is asserted.
/// Requires `f_0 = 0` so the square function cannot degenerate.
pub fn check_weighted_bdg(f: &Martingale, w: &RandomVariable) -> Result<CheckReport> {
    if !same_space(f.space(), w.space()) {
        return Err(Error::SpaceMismatch);
    }
    if f.process().level_values(0).iter().any(|&v| v != 0.0) {
        return Err(Error::InvalidParameter(
            "weighted maximal/square comparison requires f_0 = 0".into(),
        ));
    }
    let w_mart = Martingale::from_terminal(w);
    let max_w = w_mart.maximal_function();
    let lhs = f.maximal_function().weighted_lp_norm(w, 1.0)?;
    let rhs = f.square_function().weighted_lp_norm(&max_w, 1.0)?;
    Ok(CheckReport::from_sides("weighted_bdg", lhs, rhs, Some(WEIGHTED_BDG_CONSTANT))
        .with_exponents(Some(1.0), None, None))
}

/// `‖ max_n |Π_n(f,g)| ‖_r` against `‖f‖_p ‖g‖_q`; no explicit constant.
pub fn check_chao_long_max(
    f: &Martingale,
    g: &Martingale,
    exps: &ExponentTriple,
) -> Result<CheckReport> {
    let pp = Paraproduct::new(f, g)?;
    let lhs = pp.process().maximal_function().lp_norm(exps.r)?;
    let rhs = f.lp_norm(exps.p)? * g.lp_norm(exps.q)?;
    Ok(CheckReport::from_sides("chao_long_max", lhs, rhs, None).with_exponents(
        Some(exps.p),
        Some(exps.q),
        Some(exps.r),
    ))
}

fn localized_pieces(f: &Martingale, seq: &StoppingSequence) -> Result<Vec<DerivedMartingale>> {
    (1..=seq.windows()).map(|k| f.localize(seq, k)).collect()
}

/// Vector-valued maximal estimate for the localized pieces:
/// `‖ Mf^(k) ‖_{L^p(ℓ^q)}` against `‖ f^(k)_N ‖_{L^p(ℓ^q)}`; no constant.
pub fn check_vector_doob(
    f: &Martingale,
    seq: &StoppingSequence,
    p: f64,
    q: f64,
) -> Result<CheckReport> {
    check_p_open(p)?;
    check_p_open(q)?;
    let pieces = localized_pieces(f, seq)?;
    let maxima: Vec<RandomVariable> = pieces.iter().map(DerivedMartingale::maximal_on_base).collect();
    let finals: Vec<RandomVariable> =
        pieces.iter().map(DerivedMartingale::terminal_on_base).collect();
    let lhs = mixed_lp_lq_norm(&maxima, p, q)?;
    let rhs = mixed_lp_lq_norm(&finals, p, q)?;
    Ok(CheckReport::from_sides("vector_doob", lhs, rhs, None).with_exponents(
        Some(p),
        Some(q),
        None,
    ))
}

/// `‖ Mf^(k) ‖_{L^p(ℓ²)}` against `‖f‖_p`; no constant.
pub fn check_localized_maximal(
    f: &Martingale,
    seq: &StoppingSequence,
    p: f64,
) -> Result<CheckReport> {
    check_p_open(p)?;
    let pieces = localized_pieces(f, seq)?;
    let maxima: Vec<RandomVariable> = pieces.iter().map(DerivedMartingale::maximal_on_base).collect();
    let lhs = mixed_lp_lq_norm(&maxima, p, 2.0)?;
    let rhs = f.lp_norm(p)?;
    Ok(CheckReport::from_sides("localized_maximal", lhs, rhs, None).with_exponents(
        Some(p),
        Some(2.0),
        None,
    ))
}

/// `‖ Sf^(k) ‖_{L^p(ℓ²)}` against `‖f‖_p`; no constant. Additionally asserts
/// the pathwise domination `(Σ_k Sf^(k)²)^{1/2} <= Sf`, which the report's
/// `pass` field reflects.
pub fn check_localized_square(
    f: &Martingale,
    seq: &StoppingSequence,
    p: f64,
) -> Result<CheckReport> {
    check_p_open(p)?;
    let pieces = localized_pieces(f, seq)?;
    let squares: Vec<RandomVariable> = pieces.iter().map(DerivedMartingale::square_on_base).collect();
    let lhs = mixed_lp_lq_norm(&squares, p, 2.0)?;
    let rhs = f.lp_norm(p)?;

    let total_square = f.square_function();
    let pathwise_ok = (0..f.space().leaf_count()).all(|leaf| {
        let sum: f64 = squares.iter().map(|s| s.value(leaf) * s.value(leaf)).sum();
        crate::tol::nearly_le(sum.sqrt(), total_square.value(leaf))
    });

    let mut report = CheckReport::from_sides("localized_square", lhs, rhs, None).with_exponents(
        Some(p),
        Some(2.0),
        None,
    );
    report.pass = report.pass && pathwise_ok;
    if !pathwise_ok {
        report = report.with_note("pathwise square domination failed");
    }
    Ok(report)
}

/// `‖ Σ_k |Π_∞(f^(k), g^(k))| ‖_r` (the `L^r(ℓ¹)` norm of the localized
/// paraproducts) against `‖f‖_p ‖g‖_q`; no constant.
pub fn check_prop_l1(
    f: &Martingale,
    g: &Martingale,
    seq: &StoppingSequence,
    exps: &ExponentTriple,
) -> Result<CheckReport> {
    let pp = Paraproduct::new(f, g)?;
    let space = f.space().clone();
    let mut sums = vec![0.0; space.leaf_count()];
    for k in 1..=seq.windows() {
        let piece = pp.localized(seq, k)?;
        for (s, v) in sums.iter_mut().zip(piece.values()) {
            *s += v.abs();
        }
    }
    let lhs = RandomVariable::new(space, sums)?.lp_norm(exps.r)?;
    let rhs = f.lp_norm(exps.p)? * g.lp_norm(exps.q)?;
    Ok(CheckReport::from_sides("prop_l1", lhs, rhs, None).with_exponents(
        Some(exps.p),
        Some(exps.q),
        Some(exps.r),
    ))
}

/// `‖ V_ρ(truncated paraproducts) ‖_r` against `‖f‖_p ‖g‖_q`; no constant.
pub fn check_thm_variation(
    f: &Martingale,
    g: &Martingale,
    exps: &ExponentTriple,
    rho: f64,
) -> Result<CheckReport> {
    let kernel = ParaproductKernel::new(Paraproduct::new(f, g)?);
    let lhs = rho_variation(&kernel, rho)?.lp_norm(exps.r)?;
    let rhs = f.lp_norm(exps.p)? * g.lp_norm(exps.q)?;
    Ok(CheckReport::from_sides("thm_variation", lhs, rhs, None)
        .with_exponents(Some(exps.p), Some(exps.q), Some(exps.r))
        .with_rho(rho))
}

/// `‖ N_λ(truncated paraproducts) ‖_r` against `λ⁻¹ ‖f‖_p ‖g‖_q`; no
/// constant. The report notes the largest leaf jump count.
pub fn check_thm_jump(
    f: &Martingale,
    g: &Martingale,
    exps: &ExponentTriple,
    lambda: f64,
) -> Result<CheckReport> {
    let kernel = ParaproductKernel::new(Paraproduct::new(f, g)?);
    let jumps = jump_count(&kernel, lambda)?;
    let lhs = jumps.lp_norm(exps.r)?;
    let rhs = f.lp_norm(exps.p)? * g.lp_norm(exps.q)? / lambda;
    let max_jumps = jumps.values().iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(CheckReport::from_sides("thm_jump", lhs, rhs, None)
        .with_exponents(Some(exps.p), Some(exps.q), Some(exps.r))
        .with_lambda(lambda)
        .with_note(format!("max_jump_count={max_jumps}")))
}

/// ρ-variation of the lifted path in the box distance against
/// `‖f‖_p + ‖g‖_p`; no constant. `ρ > 2` is the theorem's regime, other
/// values are allowed for exploration.
pub fn check_rough_variation(
    f: &Martingale,
    g: &Martingale,
    p: f64,
    rho: f64,
) -> Result<CheckReport> {
    check_p_open(p)?;
    let lhs = rough_variation(f, g, rho)?.lp_norm(p)?;
    let rhs = f.lp_norm(p)? + g.lp_norm(p)?;
    Ok(CheckReport::from_sides("rough_variation", lhs, rhs, None)
        .with_exponents(Some(p), None, None)
        .with_rho(rho))
}

/// `‖ (rough jump count)^{1/2} ‖_p` against `λ⁻¹ (‖f‖_p + ‖g‖_p)`; no constant.
pub fn check_rough_jump(
    f: &Martingale,
    g: &Martingale,
    p: f64,
    lambda: f64,
) -> Result<CheckReport> {
    check_p_open(p)?;
    let lhs = rough_jump_count(f, g, lambda)?.map(f64::sqrt).lp_norm(p)?;
    let rhs = (f.lp_norm(p)? + g.lp_norm(p)?) / lambda;
    Ok(CheckReport::from_sides("rough_jump", lhs, rhs, None)
        .with_exponents(Some(p), None, None)
        .with_lambda(lambda))
}
