//! Frobenius lifts and the Gamma action: substitution endomorphisms of the
//! series ring, plus the period element `t`.

use crate::coeff::{Ctx, Rat, Val};
use crate::error::{Error, Result};
use crate::series::{Bound, Coeff, Series};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use num_bigint::BigInt;
use num_traits::One;

/// A q-power Frobenius lift `T -> S` with `w(S - T^q) > 0`, acting as the
/// identity on coefficients. The inverse of `S` (as a Robba-ring unit) is
/// precomputed for substitution into negative powers.
#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusLift {
    ctx: Ctx,
    s: Series<Rat>,
    s_inv: Series<Rat>,
}

impl FrobeniusLift {
    /// Build a lift from its image of `T`, verifying `w(S - T^q) > 0` and
    /// that `S` has integral coefficients.
    pub fn new(ctx: Ctx, s: Series<Rat>) -> Result<FrobeniusLift> {
        for (k, c) in s.terms() {
            match c.val(ctx.p) {
                Val::Finite(v) if v < 0 => {
                    return Err(Error::InvalidInput(format!(
                        "lift image has non-integral coefficient at T^{k}"
                    )))
                }
                _ => {}
            }
        }
        let tq = Series::monomial(ctx, ctx.q as i64, crate::int(1))?;
        let diff = s.sub(&tq)?;
        if !diff.is_certified_zero() {
            match diff.gauss_w_exact()? {
                Val::Finite(v) if v <= 0 => {
                    return Err(Error::InvalidInput(String::from(
                        "lift must satisfy w(S - T^q) > 0",
                    )))
                }
                _ => {}
            }
        }
        let s_inv = s.invert_unit()?;
        Ok(FrobeniusLift { ctx, s, s_inv })
    }

    /// The standard absolute lift `S = (1+T)^p - 1` (requires `q = p`).
    pub fn standard(ctx: Ctx) -> Result<FrobeniusLift> {
        if ctx.q != ctx.p {
            return Err(Error::InvalidInput(format!(
                "standard lift needs q = p, got q = {} p = {}",
                ctx.q, ctx.p
            )));
        }
        FrobeniusLift::new(ctx, binomial_substitution(ctx, ctx.p)?)
    }

    pub fn ctx(&self) -> Ctx {
        self.ctx
    }

    pub fn s(&self) -> &Series<Rat> {
        &self.s
    }

    pub fn s_inv(&self) -> &Series<Rat> {
        &self.s_inv
    }

    /// Substitute `T -> S` into `f`: Horner on the nonnegative part in `S`,
    /// Horner on the negative part in `S^{-1}`.
    pub fn apply<C: Coeff>(&self, f: &Series<C>) -> Series<C> {
        substitute(f, &self.s, &self.s_inv)
    }

    /// Apply the substitution `a` times (a >= 1 gives the lift of `phi^a`).
    pub fn apply_iterated<C: Coeff>(&self, f: &Series<C>, a: u32) -> Series<C> {
        let mut out = f.clone();
        for _ in 0..a {
            out = self.apply(&out);
        }
        out
    }

    /// The lift of `phi^a`: image `S_a = phi^{a-1}(S)` composed, power `q^a`.
    pub fn iterate(&self, a: u32) -> Result<FrobeniusLift> {
        if a == 0 {
            return Err(Error::InvalidInput(String::from("pushforward needs a >= 1")));
        }
        let mut s = self.s.clone();
        for _ in 1..a {
            s = self.apply(&s);
        }
        let qa = self
            .ctx
            .q
            .checked_pow(a)
            .ok_or_else(|| Error::InvalidInput(String::from("q^a overflows")))?;
        let ctx = Ctx { q: qa, ..self.ctx };
        // tails of the composed image are inherited; revalidate cheaply
        let s = rebind(ctx, &s);
        FrobeniusLift::new(ctx, s)
    }
}

fn rebind(ctx: Ctx, s: &Series<Rat>) -> Series<Rat> {
    // contexts only differ in q, which Series does not inspect
    let terms: Vec<(i64, Rat)> = s.terms().map(|(k, c)| (k, c.clone())).collect();
    Series::from_terms(ctx, &terms)
        .expect("window unchanged")
        .with_tails(s.tail_lo(), s.tail_hi(), s.fuzz())
}

/// `(1+T)^e - 1` expanded exactly.
pub fn binomial_substitution(ctx: Ctx, e: u64) -> Result<Series<Rat>> {
    let mut terms: Vec<(i64, Rat)> = Vec::new();
    let mut binom = BigInt::one();
    for k in 1..=e {
        // C(e, k) built incrementally
        binom = binom * BigInt::from(e - k + 1) / BigInt::from(k);
        terms.push((k as i64, Rat::from_integer(binom.clone())));
    }
    Series::from_terms(ctx, &terms)
}

/// The Gamma action `T -> (1+T)^chi - 1` for a positive integer value of
/// the cyclotomic character on the chosen generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaAction {
    ctx: Ctx,
    chi: u64,
    s: Series<Rat>,
    s_inv: Series<Rat>,
}

impl GammaAction {
    pub fn new(ctx: Ctx, chi: u64) -> Result<GammaAction> {
        if chi == 0 {
            return Err(Error::InvalidInput(String::from("chi must be positive")));
        }
        let s = binomial_substitution(ctx, chi)?;
        let s_inv = s.invert_unit()?;
        Ok(GammaAction { ctx, chi, s, s_inv })
    }

    /// The standard generator value `chi = 1 + p`.
    pub fn standard(ctx: Ctx) -> Result<GammaAction> {
        GammaAction::new(ctx, 1 + ctx.p)
    }

    pub fn chi(&self) -> u64 {
        self.chi
    }

    pub fn apply<C: Coeff>(&self, f: &Series<C>) -> Series<C> {
        if self.chi == 1 {
            return f.clone();
        }
        substitute(f, &self.s, &self.s_inv)
    }
}

/// Shared substitution kernel: `f = f_- + f_+`, Horner on `f_+` in `s` and
/// on `f_-` in `s_inv`.
fn substitute<C: Coeff>(f: &Series<C>, s: &Series<Rat>, s_inv: &Series<Rat>) -> Series<C> {
    let ctx = f.ctx();
    let s_c: Series<C> = s.map_coeffs(|r| C::from_rat(r));
    let s_inv_c: Series<C> = s_inv.map_coeffs(|r| C::from_rat(r));
    let support = f.support();
    let hi = support.iter().copied().filter(|k| *k >= 0).max();
    let lo = support.iter().copied().filter(|k| *k < 0).min();
    // nonnegative part
    let mut plus = Series::zero(ctx);
    if let Some(hi) = hi {
        for k in (0..=hi).rev() {
            plus = plus.mul(&s_c);
            let c = f.coeff(k);
            if !c.is_zero() {
                plus = plus
                    .add(&Series::constant(ctx, c))
                    .expect("constant addition stays in window");
            }
        }
    }
    // negative part: sum_{j>=1} a_{-j} (S^{-1})^j by Horner from the deepest
    let mut minus = Series::zero(ctx);
    if let Some(lo) = lo {
        for k in lo..0 {
            let c = f.coeff(k);
            if !c.is_zero() {
                minus = minus
                    .add(&Series::constant(ctx, c))
                    .expect("constant addition stays in window");
            }
            minus = minus.mul(&s_inv_c);
        }
    }
    let out = plus.add(&minus).expect("substitution parts share full windows");
    // substitution preserves coefficient valuations, and it maps content at
    // index i to indices between i and q i: above-window content stays
    // above, below-window content stays below. Tails therefore carry over
    // as tails; only a window strictly inside the global one forces the
    // corresponding tail into the in-window fuzz.
    let (f_lo, f_hi) = f.window();
    let mut fuzz = f.fuzz();
    if f_hi < ctx.t_max {
        fuzz = fuzz.meet(f.tail_hi());
    }
    if f_lo > ctx.t_min {
        fuzz = fuzz.meet(f.tail_lo());
    }
    let (lo, hi) = out.window();
    let mut coeffs = alloc::collections::BTreeMap::new();
    for (k, c) in out.terms() {
        coeffs.insert(k, c.clone());
    }
    Series::from_parts(
        ctx,
        coeffs,
        lo,
        hi,
        out.tail_lo().meet(f.tail_lo()),
        out.tail_hi().meet(f.tail_hi()),
        out.fuzz().meet(fuzz),
    )
}

/// The period element `t = log(1+T) = sum_{k>=1} (-1)^{k+1} T^k / k`,
/// truncated to the window. The omitted coefficients `1/k` have unbounded
/// denominators, so the high tail carries no certificate.
pub fn t_element(ctx: Ctx) -> Series<Rat> {
    let mut terms: Vec<(i64, Rat)> = Vec::new();
    for k in 1..=ctx.t_max {
        let sign = if k % 2 == 1 { 1 } else { -1 };
        terms.push((k, Rat::new(BigInt::from(sign), BigInt::from(k))));
    }
    // low side and stored part are exact; only the high tail is uncertified
    Series::from_terms(ctx, &terms)
        .expect("t-series support inside window")
        .with_tails(Bound::Exact, Bound::Unknown, Bound::Exact)
}

impl<C: Coeff> Series<C> {
    /// Replace the certificates wholesale (internal constructor aid).
    pub(crate) fn with_tails(&self, tail_lo: Bound, tail_hi: Bound, fuzz: Bound) -> Series<C> {
        let (lo, hi) = self.window();
        let mut coeffs = alloc::collections::BTreeMap::new();
        for (k, c) in self.terms() {
            coeffs.insert(k, c.clone());
        }
        Series::from_parts(self.ctx(), coeffs, lo, hi, tail_lo, tail_hi, fuzz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{int, rat};

    fn ctx2() -> Ctx {
        Ctx::standard(2).unwrap()
    }

    #[test]
    fn standard_lift_p2() {
        let lift = FrobeniusLift::standard(ctx2()).unwrap();
        assert_eq!(lift.s().coeff(1), int(2));
        assert_eq!(lift.s().coeff(2), int(1));
        assert_eq!(lift.s().support().len(), 2);
    }

    #[test]
    fn standard_lift_p3() {
        let ctx = Ctx::standard(3).unwrap();
        let lift = FrobeniusLift::standard(ctx).unwrap();
        // binomial expansion oracle: (1+T)^3 - 1 = 3T + 3T^2 + T^3
        assert_eq!(lift.s().coeff(1), int(3));
        assert_eq!(lift.s().coeff(2), int(3));
        assert_eq!(lift.s().coeff(3), int(1));
    }

    #[test]
    fn degenerate_lift_tq_accepted() {
        let ctx = ctx2();
        let s = Series::monomial(ctx, 2, crate::int(1)).unwrap();
        let lift = FrobeniusLift::new(ctx, s).unwrap();
        let img = lift.apply(&Series::monomial(ctx, 1, crate::int(1)).unwrap());
        assert_eq!(img.coeff(2), int(1));
    }

    #[test]
    fn apply_fixes_constants() {
        let lift = FrobeniusLift::standard(ctx2()).unwrap();
        let c = Series::constant(ctx2(), rat(7, 3));
        let img = lift.apply(&c);
        assert_eq!(img.coeff(0), rat(7, 3));
        assert!(img.sub(&c).unwrap().is_certified_zero());
    }

    #[test]
    fn apply_t_matches_lift_image() {
        let ctx = ctx2();
        let lift = FrobeniusLift::standard(ctx).unwrap();
        let t = Series::monomial(ctx, 1, crate::int(1)).unwrap();
        let img = lift.apply(&t);
        assert_eq!(img.coeff(1), int(2));
        assert_eq!(img.coeff(2), int(1));
    }

    #[test]
    fn apply_negative_power_geometric_oracle() {
        // phi(T^{-1}) = sum_{k>=0} (-2)^k T^{-2-k} at p = 2
        let ctx = ctx2();
        let lift = FrobeniusLift::standard(ctx).unwrap();
        let tinv = Series::monomial(ctx, -1, crate::int(1)).unwrap();
        let img = lift.apply(&tinv);
        let mut pow = int(1);
        for k in 0..20 {
            assert_eq!(img.coeff(-2 - k), pow);
            pow = &pow * &int(-2);
        }
        // w preserved
        assert_eq!(img.gauss_w_exact().unwrap(), Val::Finite(0));
    }

    #[test]
    fn gamma_binomial_oracle() {
        // p=2, chi=3: gamma(T) = 3T + 3T^2 + T^3
        let ctx = ctx2();
        let gamma = GammaAction::standard(ctx).unwrap();
        assert_eq!(gamma.chi(), 3);
        let t = Series::monomial(ctx, 1, crate::int(1)).unwrap();
        let img = gamma.apply(&t);
        assert_eq!(img.coeff(1), int(3));
        assert_eq!(img.coeff(2), int(3));
        assert_eq!(img.coeff(3), int(1));
    }

    #[test]
    fn gamma_identity_when_chi_one() {
        let ctx = ctx2();
        let gamma = GammaAction::new(ctx, 1).unwrap();
        let f = Series::from_i64_terms(ctx, &[(-2, 3, 1), (5, 1, 7)]).unwrap();
        assert!(gamma.apply(&f).sub(&f).unwrap().is_certified_zero());
    }

    #[test]
    fn gamma_phi_commute() {
        // gamma(phi(T)) = phi(gamma(T)) coefficientwise, p=2 chi=3
        let ctx = ctx2();
        let lift = FrobeniusLift::standard(ctx).unwrap();
        let gamma = GammaAction::standard(ctx).unwrap();
        let t = Series::monomial(ctx, 1, crate::int(1)).unwrap();
        let lhs = gamma.apply(&lift.apply(&t));
        let rhs = lift.apply(&gamma.apply(&t));
        assert!(lhs.sub(&rhs).unwrap().is_certified_zero());
    }

    #[test]
    fn t_element_log_series() {
        let ctx = ctx2();
        let t = t_element(ctx);
        assert_eq!(t.coeff(0), int(0));
        assert_eq!(t.coeff(1), int(1));
        assert_eq!(t.coeff(2), rat(-1, 2));
        assert_eq!(t.coeff(3), rat(1, 3));
    }

    #[test]
    fn t_element_is_phi_eigenvector() {
        // phi(t) = p t on the certified window
        let ctx = ctx2();
        let lift = FrobeniusLift::standard(ctx).unwrap();
        let t = t_element(ctx);
        let lhs = lift.apply(&t);
        let rhs = t.scale(&int(2));
        // compare low-degree coefficients, which are certified exact
        for k in 0..32 {
            assert_eq!(lhs.coeff(k), rhs.coeff(k), "coefficient at {k}");
        }
    }

    #[test]
    fn isometry_on_random_polynomials() {
        let ctx = ctx2();
        let lift = FrobeniusLift::standard(ctx).unwrap();
        let f = Series::from_i64_terms(ctx, &[(-3, 5, 2), (0, 7, 1), (4, 1, 6)]).unwrap();
        let w = f.gauss_w_exact().unwrap();
        let img = lift.apply(&f);
        assert_eq!(img.gauss_w_exact().unwrap(), w);
    }

    #[test]
    fn semilinearity_multiplicative() {
        let ctx = ctx2();
        let lift = FrobeniusLift::standard(ctx).unwrap();
        let f = Series::from_i64_terms(ctx, &[(-1, 1, 1), (2, 3, 1)]).unwrap();
        let g = Series::from_i64_terms(ctx, &[(0, 1, 2), (1, 1, 1)]).unwrap();
        let lhs = lift.apply(&f.mul(&g));
        let rhs = lift.apply(&f).mul(&lift.apply(&g));
        assert!(lhs.difference_floor(&rhs).at_least(24));
    }

    #[test]
    fn wr_relation_under_phi() {
        // w_r(phi(f)) = w_{qr}(f) for monomials
        let ctx = ctx2();
        let lift = FrobeniusLift::standard(ctx).unwrap();
        let r = rat(1, 8);
        for (k, n) in [(3i64, 2i64), (-2, 6), (1, 1)] {
            let f = Series::from_i64_terms(ctx, &[(k, n, 1)]).unwrap();
            let img = lift.apply(&f);
            let rhs = f.wr(&(&r * &int(2))).exact_finite().unwrap();
            // for negative powers the image has an uncertified low tail, so
            // compare the attained window infimum
            let lhs = match img.wr(&r) {
                crate::series::WrQuery::Exact(crate::series::QVal::Finite(v)) => v,
                crate::series::WrQuery::Range { hi: crate::series::QVal::Finite(v), .. } => v,
                other => panic!("unexpected wr result {other:?}"),
            };
            assert_eq!(lhs, rhs, "monomial T^{k}");
        }
    }

    #[test]
    fn pushforward_lift_iterates() {
        let ctx = ctx2();
        let lift = FrobeniusLift::standard(ctx).unwrap();
        let lift2 = lift.iterate(2).unwrap();
        assert_eq!(lift2.ctx().q, 4);
        // S_2 = S(S) = (1+S)^2 - 1 where S = T^2 + 2T
        let t = Series::monomial(lift2.ctx(), 1, crate::int(1)).unwrap();
        let img = lift2.apply(&t);
        let direct = binomial_substitution(lift2.ctx(), 4).unwrap();
        assert!(img.sub(&direct).unwrap().is_certified_zero());
    }
}
