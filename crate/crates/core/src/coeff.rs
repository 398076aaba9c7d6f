//! The coefficient field: exact rationals with p-adic valuation queries.
//!
//! Coefficients are exact `BigRational`s, so the valuation identities
//! `v(ab) = v(a) + v(b)` and `v(a+b) >= min(v(a), v(b))` hold exactly and all
//! precision loss is confined to series truncation.

use crate::error::{Error, Result};
use alloc::format;
use core::cmp::Ordering;
use core::fmt;
use num_bigint::BigInt;
use num_integer::Integer as _;
use num_traits::{Signed, Zero};

/// Exact rational coefficients.
pub type Rat = num_rational::BigRational;

/// A p-adic valuation: an integer, or `Infinite` for the zero element.
///
/// Never a sentinel number; ordering puts `Infinite` above every finite
/// value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Val {
    Finite(i64),
    Infinite,
}

impl Val {
    pub fn is_finite(self) -> bool {
        matches!(self, Val::Finite(_))
    }

    pub fn finite(self) -> Option<i64> {
        match self {
            Val::Finite(v) => Some(v),
            Val::Infinite => None,
        }
    }

    /// Valuation of a product.
    pub fn add(self, other: Val) -> Val {
        match (self, other) {
            (Val::Finite(a), Val::Finite(b)) => Val::Finite(a + b),
            _ => Val::Infinite,
        }
    }

    pub fn min(self, other: Val) -> Val {
        if self <= other {
            self
        } else {
            other
        }
    }
}

impl PartialOrd for Val {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Val {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Val::Finite(a), Val::Finite(b)) => a.cmp(b),
            (Val::Finite(_), Val::Infinite) => Ordering::Less,
            (Val::Infinite, Val::Finite(_)) => Ordering::Greater,
            (Val::Infinite, Val::Infinite) => Ordering::Equal,
        }
    }
}

impl fmt::Display for Val {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Val::Finite(v) => write!(f, "{v}"),
            Val::Infinite => write!(f, "inf"),
        }
    }
}

/// The p-adic norm in exponent form: `p^exponent`, or zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    Zero,
    PowP { p: u64, exponent: i64 },
}

/// Prime and precision context shared by every series in a computation.
///
/// `p` is the residue characteristic, `q` the power used by the Frobenius
/// lift. `[t_min, t_max]` is the global working window for `T`-exponents and
/// `prec` the valuation threshold at which truncated expansions stop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ctx {
    pub p: u64,
    pub q: u64,
    pub t_min: i64,
    pub t_max: i64,
    pub prec: i64,
}

impl Ctx {
    pub fn new(p: u64, q: u64, t_min: i64, t_max: i64, prec: i64) -> Result<Ctx> {
        if !is_prime(p) {
            return Err(Error::InvalidInput(format!("p = {p} is not prime")));
        }
        if q < 2 {
            return Err(Error::InvalidInput(format!("q = {q} must be at least 2")));
        }
        if t_min >= 0 || t_max <= 0 || t_min >= t_max {
            return Err(Error::InvalidInput(format!(
                "window [{t_min}, {t_max}] must straddle 0"
            )));
        }
        if prec <= 0 {
            return Err(Error::InvalidInput(format!("prec = {prec} must be positive")));
        }
        Ok(Ctx { p, q, t_min, t_max, prec })
    }

    /// Standard context: absolute lift (`q = p`), window `[-64, 128]`.
    pub fn standard(p: u64) -> Result<Ctx> {
        Ctx::new(p, p, -64, 128, 32)
    }

    /// Same prime and precision, different window.
    pub fn with_window(self, t_min: i64, t_max: i64) -> Result<Ctx> {
        Ctx::new(self.p, self.q, t_min, t_max, self.prec)
    }

    /// Radius below which the lift is treated as finite etale of degree `q`.
    /// Gates which radii the family algorithms accept.
    pub fn r0(self) -> Rat {
        Rat::new(BigInt::from(1), BigInt::from(2 * self.q))
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// A coefficient of the base field `K = Q_p`, stored as an exact rational.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coefficient(pub Rat);

impl Coefficient {
    pub fn zero() -> Self {
        Coefficient(Rat::zero())
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// The p-adic valuation, normalised so that `val_p(p) = 1`.
    pub fn val_p(&self, p: u64) -> Val {
        rat_val_p(&self.0, p)
    }

    /// The p-adic norm `p^(-val)`, reported symbolically as an exponent.
    pub fn norm(&self, p: u64) -> Norm {
        match self.val_p(p) {
            Val::Infinite => Norm::Zero,
            Val::Finite(v) => Norm::PowP { p, exponent: -v },
        }
    }
}

/// p-adic valuation of an exact rational (`Infinite` for zero).
pub fn rat_val_p(x: &Rat, p: u64) -> Val {
    if x.is_zero() {
        return Val::Infinite;
    }
    let p = BigInt::from(p);
    Val::Finite(int_val(x.numer(), &p) - int_val(x.denom(), &p))
}

fn int_val(x: &BigInt, p: &BigInt) -> i64 {
    debug_assert!(!x.is_zero());
    let mut v = 0i64;
    let mut cur = x.abs();
    // doubling trick: divide out p, then p^2, p^4, ... while possible
    loop {
        let (quo, rem) = num_integer::Integer::div_rem(&cur, p);
        if !rem.is_zero() {
            return v;
        }
        v += 1;
        cur = quo;
        let mut pk = p * p;
        let mut step = 2i64;
        loop {
            let (quo, rem) = num_integer::Integer::div_rem(&cur, &pk);
            if !rem.is_zero() {
                break;
            }
            cur = quo;
            v += step;
            pk = &pk * &pk;
            step *= 2;
        }
    }
}

/// `p^k` as an exact rational (negative `k` allowed).
pub fn p_pow(p: u64, k: i64) -> Rat {
    let base = BigInt::from(p);
    if k >= 0 {
        Rat::from_integer(base.pow(k as u32))
    } else {
        Rat::new(BigInt::from(1), base.pow((-k) as u32))
    }
}

/// Canonical representative of `x` modulo `p^k`: the balanced residue
/// `p^v * m` with `m` an integer of absolute value at most `p^{k-v} / 2`.
/// Replacing a coefficient by its reduction changes it by an error of
/// valuation at least `k`, which the fuzz certificate absorbs; it keeps
/// numerators from growing beyond the meaningful precision.
pub fn rat_reduce_mod_p_pow(x: &Rat, p: u64, k: i64) -> Rat {
    let v = match rat_val_p(x, p) {
        Val::Infinite => return Rat::zero(),
        Val::Finite(v) => v,
    };
    if v >= k {
        return Rat::zero();
    }
    let exp = (k - v) as u32;
    let modulus = BigInt::from(p).pow(exp);
    // unit part a/b with a, b prime to p
    let unit = x * p_pow(p, -v);
    let a = unit.numer().mod_floor(&modulus);
    let b = unit.denom().mod_floor(&modulus);
    let b_inv = mod_inverse(&b, &modulus);
    let mut m = (a * b_inv).mod_floor(&modulus);
    let half = &modulus >> 1;
    if m > half {
        m -= &modulus;
    }
    Rat::from_integer(m) * p_pow(p, v)
}

fn mod_inverse(b: &BigInt, modulus: &BigInt) -> BigInt {
    let ext = num_integer::Integer::extended_gcd(b, modulus);
    debug_assert!(ext.gcd == BigInt::from(1), "inverse of non-unit");
    ext.x.mod_floor(modulus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{int, rat};

    #[test]
    fn valuation_of_p_is_one() {
        for p in [2u64, 3, 5, 7] {
            assert_eq!(Coefficient(int(p as i64)).val_p(p), Val::Finite(1));
        }
    }

    #[test]
    fn unit_and_zero_cases() {
        assert_eq!(Coefficient(int(1)).val_p(2), Val::Finite(0));
        assert_eq!(Coefficient(int(0)).val_p(2), Val::Infinite);
    }

    #[test]
    fn forced_by_multiplicativity() {
        assert_eq!(Coefficient(int(12)).val_p(2), Val::Finite(2));
        assert_eq!(Coefficient(rat(3, 4)).val_p(2), Val::Finite(-2));
    }

    #[test]
    fn norm_exponent_form() {
        assert_eq!(
            Coefficient(int(2)).norm(2),
            Norm::PowP { p: 2, exponent: -1 }
        );
        assert_eq!(Coefficient(int(1)).norm(2), Norm::PowP { p: 2, exponent: 0 });
        assert_eq!(
            Coefficient(rat(1, 8)).norm(2),
            Norm::PowP { p: 2, exponent: 3 }
        );
        assert_eq!(Coefficient(int(0)).norm(2), Norm::Zero);
    }

    #[test]
    fn context_rejects_composite_p() {
        assert!(Ctx::new(4, 4, -8, 8, 8).is_err());
        assert!(Ctx::new(2, 1, -8, 8, 8).is_err());
        assert!(Ctx::new(2, 2, 1, 8, 8).is_err());
    }

    #[test]
    fn p_pow_signs() {
        assert_eq!(p_pow(2, 3), int(8));
        assert_eq!(p_pow(2, -2), rat(1, 4));
        assert_eq!(p_pow(5, 0), int(1));
    }
}
