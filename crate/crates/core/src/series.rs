//! Truncated Laurent series with valuation certificates.
//!
//! A `Series<C>` stores finitely many exact coefficients on a certified
//! window `[lo, hi]` inside the global window `[t_min, t_max]` of its
//! context. Three certificates accompany the stored data:
//!
//! - `tail_lo`: a valuation lower bound for every omitted index `< lo`,
//! - `tail_hi`: the same for indices `> hi`,
//! - `fuzz`: a lower bound on the valuation of the error of each *stored*
//!   coefficient (`Exact` means the stored window is exact).
//!
//! `tail_lo = tail_hi = fuzz = Exact` exactly when the element is an exact
//! Laurent polynomial. Truncated expansions (geometric series, substitution
//! images) carry finite bounds, and every valuation query answers either an
//! exact value or an explicit interval. Downstream algorithms must branch on
//! certainty; nothing silently guesses.

use crate::coeff::{p_pow, rat_val_p, Ctx, Rat, Val};
use crate::error::{Error, Result};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use num_traits::{One, Signed, Zero};

/// Coefficient rings the series engine can operate over: the base field
/// `Q_p` and, for families, polynomials over it with the Gauss valuation.
pub trait Coeff: Clone + PartialEq + fmt::Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn from_rat(r: &Rat) -> Self;
    /// p-adic valuation (Gauss valuation for polynomial coefficients).
    fn val(&self, p: u64) -> Val;
    /// Inverse, when the element is a unit of the coefficient ring.
    fn inv(&self) -> Option<Self>;
    /// Canonical representative modulo `p^k` (error valuation >= k).
    fn reduce_mod(&self, p: u64, k: i64) -> Self;
}

impl Coeff for Rat {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn from_rat(r: &Rat) -> Self {
        r.clone()
    }
    fn val(&self, p: u64) -> Val {
        rat_val_p(self, p)
    }
    fn inv(&self) -> Option<Self> {
        if Zero::is_zero(self) {
            None
        } else {
            Some(self.recip())
        }
    }
    fn reduce_mod(&self, p: u64, k: i64) -> Self {
        crate::coeff::rat_reduce_mod_p_pow(self, p, k)
    }
}

/// A valuation lower-bound certificate for coefficients that are not stored
/// exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    /// The omitted coefficients are exactly zero (resp. the stored ones are
    /// exact).
    Exact,
    /// Valuations are at least the given integer.
    AtLeast(i64),
    /// No certificate.
    Unknown,
}

impl Bound {
    pub fn meet(self, other: Bound) -> Bound {
        match (self, other) {
            (Bound::Unknown, _) | (_, Bound::Unknown) => Bound::Unknown,
            (Bound::Exact, b) => b,
            (b, Bound::Exact) => b,
            (Bound::AtLeast(a), Bound::AtLeast(b)) => Bound::AtLeast(a.min(b)),
        }
    }

    /// Bound for a product: one factor bounded by `self`, the other by `v`.
    pub fn add_val(self, v: Val) -> Bound {
        match (self, v) {
            (Bound::Exact, _) => Bound::Exact,
            (_, Val::Infinite) => Bound::Exact,
            (Bound::AtLeast(a), Val::Finite(b)) => Bound::AtLeast(a + b),
            (Bound::Unknown, _) => Bound::Unknown,
        }
    }

    /// Bound for a product of two bounded errors.
    pub fn add(self, other: Bound) -> Bound {
        match (self, other) {
            (Bound::Exact, _) | (_, Bound::Exact) => Bound::Exact,
            (Bound::AtLeast(a), Bound::AtLeast(b)) => Bound::AtLeast(a + b),
            _ => Bound::Unknown,
        }
    }

    /// Shift a bound by an integer (used when scaling by a coefficient).
    pub fn shift(self, d: i64) -> Bound {
        match self {
            Bound::AtLeast(a) => Bound::AtLeast(a + d),
            other => other,
        }
    }

    /// Is the bound certified to be `>= v`?
    pub fn at_least(self, v: i64) -> bool {
        match self {
            Bound::Exact => true,
            Bound::AtLeast(a) => a >= v,
            Bound::Unknown => false,
        }
    }

    /// Is the bound certified to be `> v`?
    pub fn above(self, v: i64) -> bool {
        match self {
            Bound::Exact => true,
            Bound::AtLeast(a) => a > v,
            Bound::Unknown => false,
        }
    }

    fn fold_val(self, v: Val) -> Bound {
        match v {
            Val::Infinite => self,
            Val::Finite(x) => self.meet(Bound::AtLeast(x)),
        }
    }
}

/// Result of a Gauss-valuation query: exact, or an explicit interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WQuery {
    Exact(Val),
    /// The true valuation lies in `[lo, hi]`; `lo = Unknown` means no lower
    /// bound is certified.
    Range { lo: Bound, hi: Val },
}

impl WQuery {
    pub fn exact(self) -> Option<Val> {
        match self {
            WQuery::Exact(v) => Some(v),
            WQuery::Range { .. } => None,
        }
    }

    pub fn exact_finite(self) -> Option<i64> {
        self.exact().and_then(Val::finite)
    }

    /// Certified lower bound (Unknown when none).
    pub fn lower(self) -> Bound {
        match self {
            WQuery::Exact(Val::Finite(v)) => Bound::AtLeast(v),
            WQuery::Exact(Val::Infinite) => Bound::Exact,
            WQuery::Range { lo, .. } => lo,
        }
    }
}

/// An exact rational value or plus infinity; used for radius valuations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QVal {
    Finite(Rat),
    Infinite,
}

impl QVal {
    pub fn min(self, other: QVal) -> QVal {
        match (self, other) {
            (QVal::Infinite, b) => b,
            (a, QVal::Infinite) => a,
            (QVal::Finite(a), QVal::Finite(b)) => {
                if a <= b {
                    QVal::Finite(a)
                } else {
                    QVal::Finite(b)
                }
            }
        }
    }

    pub fn finite(self) -> Option<Rat> {
        match self {
            QVal::Finite(r) => Some(r),
            QVal::Infinite => None,
        }
    }
}

/// Result of a radius-valuation query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WrQuery {
    Exact(QVal),
    Range { lo: Option<Rat>, hi: QVal },
}

impl WrQuery {
    pub fn exact_finite(self) -> Option<Rat> {
        match self {
            WrQuery::Exact(QVal::Finite(r)) => Some(r),
            _ => None,
        }
    }

    pub fn lower(self) -> Option<Rat> {
        match self {
            WrQuery::Exact(QVal::Finite(r)) => Some(r),
            WrQuery::Exact(QVal::Infinite) => None, // unbounded above; caller treats as +inf
            WrQuery::Range { lo, .. } => lo,
        }
    }
}

/// A truncated Laurent series over `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct Series<C: Coeff> {
    ctx: Ctx,
    coeffs: BTreeMap<i64, C>,
    lo: i64,
    hi: i64,
    tail_lo: Bound,
    tail_hi: Bound,
    fuzz: Bound,
}

impl<C: Coeff> Series<C> {
    pub fn ctx(&self) -> Ctx {
        self.ctx
    }

    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn tail_lo(&self) -> Bound {
        self.tail_lo
    }

    pub fn tail_hi(&self) -> Bound {
        self.tail_hi
    }

    pub fn fuzz(&self) -> Bound {
        self.fuzz
    }

    /// The exact zero element (full window, exact tails).
    pub fn zero(ctx: Ctx) -> Self {
        Series {
            ctx,
            coeffs: BTreeMap::new(),
            lo: ctx.t_min,
            hi: ctx.t_max,
            tail_lo: Bound::Exact,
            tail_hi: Bound::Exact,
            fuzz: Bound::Exact,
        }
    }

    pub fn one(ctx: Ctx) -> Self {
        Self::constant(ctx, C::one())
    }

    pub fn constant(ctx: Ctx, c: C) -> Self {
        let mut s = Self::zero(ctx);
        if !c.is_zero() {
            s.coeffs.insert(0, c);
        }
        s
    }

    /// `c * T^k`; errors if `k` is outside the global window.
    pub fn monomial(ctx: Ctx, k: i64, c: C) -> Result<Self> {
        if k < ctx.t_min || k > ctx.t_max {
            return Err(Error::PrecisionInsufficient(format!(
                "monomial exponent {k} outside window [{}, {}]",
                ctx.t_min, ctx.t_max
            )));
        }
        let mut s = Self::zero(ctx);
        if !c.is_zero() {
            s.coeffs.insert(k, c);
        }
        Ok(s)
    }

    /// Exact Laurent polynomial from `(exponent, coefficient)` terms.
    pub fn from_terms(ctx: Ctx, terms: &[(i64, C)]) -> Result<Self> {
        let mut s = Self::zero(ctx);
        for (k, c) in terms {
            if *k < ctx.t_min || *k > ctx.t_max {
                return Err(Error::PrecisionInsufficient(format!(
                    "exponent {k} outside window [{}, {}]",
                    ctx.t_min, ctx.t_max
                )));
            }
            if c.is_zero() {
                continue;
            }
            let entry = s.coeffs.entry(*k).or_insert_with(C::zero);
            *entry = entry.add(c);
            if entry.is_zero() {
                s.coeffs.remove(k);
            }
        }
        Ok(s)
    }

    /// Raw constructor for internal use; normalises stored zeros away.
    pub(crate) fn from_parts(
        ctx: Ctx,
        coeffs: BTreeMap<i64, C>,
        lo: i64,
        hi: i64,
        tail_lo: Bound,
        tail_hi: Bound,
        fuzz: Bound,
    ) -> Self {
        debug_assert!(lo >= ctx.t_min && hi <= ctx.t_max && lo <= hi);
        let mut coeffs = coeffs;
        coeffs.retain(|k, c| *k >= lo && *k <= hi && !c.is_zero());
        Series { ctx, coeffs, lo, hi, tail_lo, tail_hi, fuzz }
    }

    pub fn coeff(&self, k: i64) -> C {
        self.coeffs.get(&k).cloned().unwrap_or_else(C::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &C)> {
        self.coeffs.iter().map(|(k, c)| (*k, c))
    }

    pub fn support(&self) -> Vec<i64> {
        self.coeffs.keys().copied().collect()
    }

    pub fn is_exact(&self) -> bool {
        self.tail_lo == Bound::Exact && self.tail_hi == Bound::Exact && self.fuzz == Bound::Exact
    }

    /// True when the element is certified to be exactly zero.
    pub fn is_certified_zero(&self) -> bool {
        self.coeffs.is_empty() && self.is_exact()
    }

    /// True when some stored coefficient survives every error certificate,
    /// so the element is certainly nonzero.
    pub fn is_certified_nonzero(&self) -> bool {
        self.coeffs
            .values()
            .any(|c| !self.fuzz_obscures(c.val(self.ctx.p)))
    }

    fn fuzz_obscures(&self, v: Val) -> bool {
        match (v, self.fuzz) {
            (_, Bound::Exact) => false,
            (Val::Infinite, _) => true,
            (Val::Finite(v), Bound::AtLeast(f)) => v >= f,
            (_, Bound::Unknown) => true,
        }
    }

    /// Minimum valuation over stored coefficients (`Infinite` if none).
    pub fn min_stored_val(&self) -> Val {
        self.coeffs
            .values()
            .map(|c| c.val(self.ctx.p))
            .fold(Val::Infinite, Val::min)
    }

    /// Lower bound on the valuations of all true coefficients.
    pub fn val_floor(&self) -> Bound {
        self.err_floor().fold_val(self.min_stored_val())
    }

    /// Lower bound on all error contributions (tails and stored fuzz).
    fn err_floor(&self) -> Bound {
        self.fuzz.meet(self.tail_lo).meet(self.tail_hi)
    }

    /// Lower bound on true coefficient valuations at indices `< idx`.
    fn floor_below(&self, idx: i64) -> Bound {
        let mut b = Bound::Exact;
        if idx > self.lo {
            b = b.meet(self.fuzz);
            for (_, c) in self.coeffs.range(..idx.min(self.hi + 1)) {
                b = b.fold_val(c.val(self.ctx.p));
            }
        }
        if idx > self.hi + 1 {
            b = b.meet(self.tail_hi);
        }
        b.meet(self.tail_lo)
    }

    /// Lower bound on true coefficient valuations at indices `> idx`.
    fn floor_above(&self, idx: i64) -> Bound {
        let mut b = Bound::Exact;
        if idx < self.hi {
            b = b.meet(self.fuzz);
            for (_, c) in self.coeffs.range((idx + 1).max(self.lo)..) {
                b = b.fold_val(c.val(self.ctx.p));
            }
        }
        if idx < self.lo - 1 {
            b = b.meet(self.tail_lo);
        }
        b.meet(self.tail_hi)
    }

    fn assert_compatible(&self, other: &Self) {
        assert_eq!(self.ctx, other.ctx, "series from different contexts");
    }

    /// The Gauss valuation `w(f) = inf_i v(a_i)`, exact or an interval.
    pub fn gauss_w(&self) -> WQuery {
        let stored = self.min_stored_val();
        let tails = self.tail_lo.meet(self.tail_hi);
        let certain = match stored {
            Val::Infinite => false,
            Val::Finite(v) => tails.at_least(v) && !self.fuzz_obscures(stored),
        };
        if certain {
            return WQuery::Exact(stored);
        }
        if self.coeffs.is_empty() && self.is_exact() {
            return WQuery::Exact(Val::Infinite);
        }
        let hi = if self.coeffs.is_empty() || self.fuzz_obscures(stored) {
            Val::Infinite
        } else {
            stored
        };
        WQuery::Range { lo: self.err_floor().fold_val(stored), hi }
    }

    /// Exact Gauss valuation or a precision error.
    pub fn gauss_w_exact(&self) -> Result<Val> {
        self.gauss_w().exact().ok_or_else(|| {
            Error::PrecisionInsufficient(String::from("Gauss valuation indeterminate"))
        })
    }

    /// The radius valuation `w_r(f) = inf_i (v(a_i) + r i)` for `r > 0`.
    pub fn wr(&self, r: &Rat) -> WrQuery {
        assert!(r.is_positive(), "radius must be positive");
        let p = self.ctx.p;
        let mut stored_min = QVal::Infinite;
        let mut all_certain = true;
        for (i, c) in &self.coeffs {
            match c.val(p) {
                Val::Infinite => {}
                Val::Finite(v) => {
                    if self.fuzz_obscures(Val::Finite(v)) {
                        all_certain = false;
                    } else {
                        stored_min =
                            stored_min.min(QVal::Finite(Rat::from_integer(v.into()) + r * Rat::from_integer((*i).into())));
                    }
                }
            }
        }
        // error bounds: fuzz across the window (worst at lo), high tail
        // (worst just above hi), low tail (no finite bound unless exact)
        let mut bound_parts: Vec<Rat> = Vec::new();
        let mut unbounded = false;
        match self.fuzz {
            Bound::Exact => {}
            Bound::AtLeast(f) => bound_parts
                .push(Rat::from_integer(f.into()) + r * Rat::from_integer(self.lo.into())),
            Bound::Unknown => unbounded = true,
        }
        match self.tail_hi {
            Bound::Exact => {}
            Bound::AtLeast(b) => bound_parts
                .push(Rat::from_integer(b.into()) + r * Rat::from_integer((self.hi + 1).into())),
            Bound::Unknown => unbounded = true,
        }
        match self.tail_lo {
            Bound::Exact => {}
            // for r > 0 a uniform valuation bound gives no w_r bound below lo
            _ => unbounded = true,
        }
        let err_lo: Option<Rat> = if unbounded {
            None
        } else {
            bound_parts.into_iter().fold(None, |acc, b| match acc {
                None => Some(b),
                Some(a) => Some(if a <= b { a } else { b }),
            })
        };
        let exact = all_certain
            && !unbounded
            && match (&stored_min, &err_lo) {
                (QVal::Finite(s), Some(e)) => e >= s,
                (QVal::Finite(_), None) => true,
                (QVal::Infinite, None) => true,
                (QVal::Infinite, Some(_)) => false,
            };
        if exact {
            return WrQuery::Exact(stored_min);
        }
        let lo = match (&stored_min, &err_lo) {
            (QVal::Finite(s), Some(e)) => Some(if s <= e { s.clone() } else { e.clone() }),
            (QVal::Finite(s), None) if !unbounded => Some(s.clone()),
            (QVal::Infinite, Some(e)) => Some(e.clone()),
            _ => None,
        };
        WrQuery::Range { lo, hi: stored_min }
    }

    /// `naive_v(f, i)`: the smallest stored index whose coefficient has
    /// valuation at most `i`, certified against the window.
    pub fn naive_v(&self, i: i64) -> Result<Val> {
        if !self.tail_lo.above(i) {
            return Err(Error::PrecisionInsufficient(format!(
                "cannot certify absence of valuation <= {i} below index {}",
                self.lo
            )));
        }
        for (k, c) in &self.coeffs {
            match c.val(self.ctx.p) {
                Val::Finite(v) if v <= i => {
                    if self.fuzz_obscures(Val::Finite(v)) {
                        return Err(Error::PrecisionInsufficient(format!(
                            "stored coefficient at {k} uncertain at threshold {i}"
                        )));
                    }
                    return Ok(Val::Finite(*k));
                }
                Val::Finite(v) => {
                    // coefficient certified above the threshold?
                    if v > i {
                        continue;
                    }
                    return Err(Error::PrecisionInsufficient(format!(
                        "coefficient at {k} uncertain at threshold {i}"
                    )));
                }
                Val::Infinite => continue,
            }
        }
        // fuzz could hide a qualifying coefficient inside the window
        if !self.fuzz.above(i) {
            return Err(Error::PrecisionInsufficient(format!(
                "window fuzz cannot rule out valuations <= {i}"
            )));
        }
        if !self.tail_hi.above(i) {
            return Err(Error::PrecisionInsufficient(format!(
                "cannot certify absence of valuation <= {i} above index {}",
                self.hi
            )));
        }
        Ok(Val::Infinite)
    }

    /// `naive_v_r(f, i, r) = r * naive_v(f, i) + i`.
    pub fn naive_v_r(&self, i: i64, r: &Rat) -> Result<QVal> {
        match self.naive_v(i)? {
            Val::Infinite => Ok(QVal::Infinite),
            Val::Finite(k) => {
                Ok(QVal::Finite(r * Rat::from_integer(k.into()) + Rat::from_integer(i.into())))
            }
        }
    }

    pub fn neg(&self) -> Self {
        let coeffs = self.coeffs.iter().map(|(k, c)| (*k, c.neg())).collect();
        Series { coeffs, ..self.clone() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.assert_compatible(other);
        let lo_f = if self.tail_lo == Bound::Exact { self.ctx.t_min } else { self.lo };
        let lo_g = if other.tail_lo == Bound::Exact { other.ctx.t_min } else { other.lo };
        let hi_f = if self.tail_hi == Bound::Exact { self.ctx.t_max } else { self.hi };
        let hi_g = if other.tail_hi == Bound::Exact { other.ctx.t_max } else { other.hi };
        let lo = lo_f.max(lo_g);
        let hi = hi_f.min(hi_g);
        if lo > hi {
            return Err(Error::PrecisionInsufficient(String::from(
                "window underflow in addition",
            )));
        }
        let mut coeffs: BTreeMap<i64, C> = BTreeMap::new();
        for (k, c) in self.coeffs.range(lo..=hi) {
            coeffs.insert(*k, c.clone());
        }
        for (k, c) in other.coeffs.range(lo..=hi) {
            let entry = coeffs.entry(*k).or_insert_with(C::zero);
            *entry = entry.add(c);
        }
        let tail_lo = self.floor_below(lo).meet(other.floor_below(lo));
        let tail_hi = self.floor_above(hi).meet(other.floor_above(hi));
        let fuzz = self.fuzz.meet(other.fuzz);
        Ok(Series::from_parts(self.ctx, coeffs, lo, hi, tail_lo, tail_hi, fuzz))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    /// Multiply by a scalar coefficient.
    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Series::zero(self.ctx);
        }
        let v = c.val(self.ctx.p);
        let coeffs = self.coeffs.iter().map(|(k, a)| (*k, a.mul(c))).collect();
        let d = match v {
            Val::Finite(d) => d,
            Val::Infinite => unreachable!(),
        };
        Series {
            ctx: self.ctx,
            coeffs,
            lo: self.lo,
            hi: self.hi,
            tail_lo: self.tail_lo.shift(d),
            tail_hi: self.tail_hi.shift(d),
            fuzz: self.fuzz.shift(d),
        }
    }

    /// Multiply by `T^m`.
    pub fn shift(&self, m: i64) -> Self {
        if m == 0 {
            return self.clone();
        }
        let ctx = self.ctx;
        let lo = (self.lo + m).max(ctx.t_min);
        let hi = (self.hi + m).min(ctx.t_max);
        if lo > hi {
            // the whole window slid outside; only a floor survives
            let floor = self.val_floor();
            return Series::from_parts(
                ctx,
                BTreeMap::new(),
                ctx.t_min,
                ctx.t_max,
                floor,
                floor,
                floor,
            );
        }
        let mut coeffs = BTreeMap::new();
        let mut tail_lo = self.tail_lo;
        let mut tail_hi = self.tail_hi;
        for (k, c) in &self.coeffs {
            let nk = k + m;
            if nk < lo {
                tail_lo = tail_lo.fold_val(c.val(ctx.p));
            } else if nk > hi {
                tail_hi = tail_hi.fold_val(c.val(ctx.p));
            } else {
                coeffs.insert(nk, c.clone());
            }
        }
        Series::from_parts(ctx, coeffs, lo, hi, tail_lo, tail_hi, self.fuzz)
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.assert_compatible(other);
        let ctx = self.ctx;
        let p = ctx.p;
        let mut conv: BTreeMap<i64, C> = BTreeMap::new();
        let mut dropped_lo = Bound::Exact;
        let mut dropped_hi = Bound::Exact;
        for (i, a) in &self.coeffs {
            let va = a.val(p);
            for (j, b) in &other.coeffs {
                let k = i + j;
                if k < ctx.t_min {
                    dropped_lo = dropped_lo.fold_val(va.add(b.val(p)));
                } else if k > ctx.t_max {
                    dropped_hi = dropped_hi.fold_val(va.add(b.val(p)));
                } else {
                    let entry = conv.entry(k).or_insert_with(C::zero);
                    *entry = entry.add(&a.mul(b));
                }
            }
        }
        // pollution from error terms of either factor hitting the window
        let mut pollution = Bound::Exact;
        // fuzz of one side against everything on the other
        pollution = pollution.meet(self.fuzz.add(other.val_floor()));
        pollution = pollution.meet(other.fuzz.add(self.val_floor()));
        // high tail of f: reaches index <= t_max only against g below t_max - hi_f
        if self.tail_hi != Bound::Exact {
            pollution =
                pollution.meet(self.tail_hi.add(other.floor_below(ctx.t_max - self.hi)));
        }
        if other.tail_hi != Bound::Exact {
            pollution =
                pollution.meet(other.tail_hi.add(self.floor_below(ctx.t_max - other.hi)));
        }
        // low tail of f: reaches index >= t_min only against g above t_min - lo_f
        if self.tail_lo != Bound::Exact {
            pollution =
                pollution.meet(self.tail_lo.add(other.floor_above(ctx.t_min - self.lo)));
        }
        if other.tail_lo != Bound::Exact {
            pollution =
                pollution.meet(other.tail_lo.add(self.floor_above(ctx.t_min - other.lo)));
        }
        // error against error
        let ef = self.err_floor();
        let eg = other.err_floor();
        pollution = pollution.meet(ef.add(eg));
        // low-tail certificate: low tails spread everywhere below, but a
        // high tail reaches below the window only against content of the
        // other factor far enough down (regional floors)
        let mut tail_lo = dropped_lo
            .meet(pollution)
            .meet(self.tail_lo.add(other.val_floor()))
            .meet(other.tail_lo.add(self.val_floor()));
        if self.tail_hi != Bound::Exact {
            tail_lo = tail_lo.meet(self.tail_hi.add(other.floor_below(ctx.t_min - self.hi)));
        }
        if other.tail_hi != Bound::Exact {
            tail_lo = tail_lo.meet(other.tail_hi.add(self.floor_below(ctx.t_min - other.hi)));
        }
        let mut tail_hi = dropped_hi
            .meet(pollution)
            .meet(self.tail_hi.add(other.val_floor()))
            .meet(other.tail_hi.add(self.val_floor()));
        if self.tail_lo != Bound::Exact {
            tail_hi = tail_hi.meet(self.tail_lo.add(other.floor_above(ctx.t_max - self.lo)));
        }
        if other.tail_lo != Bound::Exact {
            tail_hi = tail_hi.meet(other.tail_lo.add(self.floor_above(ctx.t_max - other.lo)));
        }
        Series::from_parts(ctx, conv, ctx.t_min, ctx.t_max, tail_lo, tail_hi, pollution)
    }

    /// Merge an extra error bound into every certificate (used when a
    /// remainder of known size is discarded).
    pub fn blur(&self, bound: Bound) -> Self {
        Series {
            tail_lo: self.tail_lo.meet(bound),
            tail_hi: self.tail_hi.meet(bound),
            fuzz: self.fuzz.meet(bound),
            ..self.clone()
        }
    }

    /// Drop stored coefficients whose valuation already reaches the fuzz
    /// certificate; they are indistinguishable from the error term, and
    /// keeping them only grows the support.
    pub fn compress(&self) -> Self {
        let b = match self.fuzz {
            Bound::AtLeast(b) => b,
            _ => return self.clone(),
        };
        let p = self.ctx.p;
        let coeffs = self
            .coeffs
            .iter()
            .filter(|(_, c)| match c.val(p) {
                Val::Finite(v) => v < b,
                Val::Infinite => false,
            })
            .map(|(k, c)| (*k, c.reduce_mod(p, b)))
            .collect();
        Series { coeffs, ..self.clone() }
    }

    /// Blur at the target valuation and compress.
    pub fn truncate_to(&self, target: i64) -> Self {
        self.blur(Bound::AtLeast(target)).compress()
    }

    /// Lower bound on `val(self - other)` over all coefficients.
    pub fn difference_floor(&self, other: &Self) -> Bound {
        match self.sub(other) {
            Ok(d) => d.val_floor(),
            Err(_) => Bound::Unknown,
        }
    }

    /// Certified negligibility: every true coefficient has valuation >= target.
    pub fn negligible(&self, target: i64) -> bool {
        self.val_floor().at_least(target)
    }

    /// Dominant-coefficient unit criterion for the Robba ring: there is a
    /// stored index `m` with `v(a_j) > v(a_m)` for `j < m` and
    /// `v(a_j) >= v(a_m)` for `j > m`, certified against the tails.
    pub fn robba_dominant_index(&self) -> Result<i64> {
        if self.coeffs.is_empty() {
            return if self.is_certified_zero() {
                Err(Error::ZeroInput)
            } else {
                Err(Error::PrecisionInsufficient(String::from(
                    "no stored coefficients to anchor a dominant index",
                )))
            };
        }
        let p = self.ctx.p;
        let min = self.min_stored_val();
        let vm = match min {
            Val::Finite(v) => v,
            Val::Infinite => unreachable!(),
        };
        if self.fuzz_obscures(min) {
            return Err(Error::PrecisionInsufficient(String::from(
                "dominant coefficient below the fuzz certificate",
            )));
        }
        let m = *self
            .coeffs
            .iter()
            .find(|(_, c)| c.val(p) == min)
            .map(|(k, _)| k)
            .unwrap();
        if !self.tail_lo.above(vm) {
            return Err(Error::PrecisionInsufficient(format!(
                "low tail cannot certify strict dominance over valuation {vm}"
            )));
        }
        if !self.tail_hi.at_least(vm) {
            return Err(Error::PrecisionInsufficient(format!(
                "high tail cannot certify dominance at valuation {vm}"
            )));
        }
        Ok(m)
    }

    /// Unit test for the Robba ring.
    pub fn is_unit_robba(&self) -> Result<bool> {
        match self.robba_dominant_index() {
            Ok(_) => Ok(true),
            Err(Error::ZeroInput) => Err(Error::ZeroInput),
            Err(e) => Err(e),
        }
    }

    /// Invert a Robba-ring unit: factor `f = c T^m (1 + g)` with `w(g) > 0`
    /// below the dominant index and expand the geometric series to the
    /// window.
    pub fn invert_unit(&self) -> Result<Self> {
        let m = self.robba_dominant_index()?;
        self.invert_at(m)
    }

    /// Invert a nonzero element of the completed field: the minimal index
    /// attaining the exact Gauss valuation anchors the factorisation, which
    /// requires `tail_lo` to be finite and strictly above `w(f)`.
    pub fn invert_field_e(&self) -> Result<Self> {
        if self.is_certified_zero() {
            return Err(Error::ZeroInput);
        }
        let w = self.gauss_w_exact()?;
        let wv = match w {
            Val::Finite(v) => v,
            Val::Infinite => return Err(Error::ZeroInput),
        };
        if !self.tail_lo.above(wv) {
            return Err(Error::PrecisionInsufficient(String::from(
                "minimal index not certified: low tail reaches the Gauss valuation",
            )));
        }
        let p = self.ctx.p;
        let m = *self
            .coeffs
            .iter()
            .find(|(_, c)| c.val(p) == w)
            .map(|(k, _)| k)
            .ok_or_else(|| Error::Internal(String::from("exact w with no attaining index")))?;
        self.invert_at(m)
    }

    fn invert_at(&self, m: i64) -> Result<Self> {
        let ctx = self.ctx;
        let c = self.coeff(m);
        let c_inv = c
            .inv()
            .ok_or_else(|| Error::NotAUnit(String::from("leading coefficient not invertible")))?;
        // n = f * c^{-1} * T^{-m} = 1 + g
        let normalised = self.scale(&c_inv).shift(-m);
        let g = normalised.sub(&Series::one(ctx))?;
        let target = ctx.prec;
        // every coefficient of g strictly below index 0 must have positive
        // valuation; at or above 0 nonnegative suffices since powers march up
        if !g.floor_below(0).above(0) {
            return Err(Error::PrecisionInsufficient(String::from(
                "cannot certify positive valuation below the dominant index",
            )));
        }
        if !g.floor_above(-1).at_least(0) {
            return Err(Error::PrecisionInsufficient(String::from(
                "cannot certify nonnegative valuation above the dominant index",
            )));
        }
        // Stage 1: invert the positive-degree skeleton 1 + g0 by degree
        // growth. g0 is pure positive support, so its powers only march up
        // and eventually leave the window for good.
        let g0_terms: BTreeMap<i64, C> = g
            .coeffs
            .range(1..)
            .map(|(k, c)| (*k, c.clone()))
            .collect();
        let g0 = Series::from_parts(ctx, g0_terms, ctx.t_min, ctx.t_max, Bound::Exact, Bound::Exact, Bound::Exact);
        let neg_g0 = g0.neg();
        let mut y0 = Series::one(ctx);
        let mut term = Series::one(ctx);
        let width = (ctx.t_max - ctx.t_min) as usize;
        let mut emptied = false;
        let mut early = false;
        for _ in 0..(width + 4) {
            term = term.mul(&neg_g0);
            if term.coeffs.is_empty() && term.tail_lo == Bound::Exact && term.fuzz == Bound::Exact
            {
                emptied = true;
                break;
            }
            if term.negligible(target) {
                early = true;
                break;
            }
            y0 = y0.add(&term)?;
        }
        if !emptied && !early {
            return Err(Error::Internal(String::from(
                "skeleton inversion failed to leave the window",
            )));
        }
        // content pushed above the window never returns in stage 1; an early
        // stop leaves a remainder at the target valuation
        let top_bound = term.tail_hi;
        let mut y0 = y0.with_tails(y0.tail_lo, y0.tail_hi.meet(top_bound), y0.fuzz);
        if early {
            y0 = y0.truncate_to(target);
        }
        // Stage 2: (1+g)^{-1} = y0 (1 - e)^{-1} with e = 1 - (1+g) y0.
        // Every in-window contribution of e gains valuation, so the
        // geometric series converges at the target precision.
        let e = Series::one(ctx).sub(&normalised.mul(&y0))?;
        // split off the above-window residue; words containing it re-enter
        // the window only through the strictly-positive-valuation down
        // moves of e, giving the +1 in the certificate below
        let e_in = e.with_tails(e.tail_lo, Bound::Exact, e.fuzz);
        let e_top = e.tail_hi;
        if !e_in.val_floor().above(0) {
            return Err(Error::PrecisionInsufficient(String::from(
                "inversion residual not certified to gain valuation",
            )));
        }
        let mut acc = Series::one(ctx);
        let mut term = Series::one(ctx);
        let cap = 2 * target.unsigned_abs() as usize + 16;
        let mut converged = false;
        for _ in 0..cap {
            term = term.mul(&e_in);
            if term.negligible(target) {
                converged = true;
                break;
            }
            acc = acc.add(&term)?;
        }
        if !converged {
            return Err(Error::Internal(String::from(
                "geometric inversion failed to converge within the iteration cap",
            )));
        }
        let mut out = y0.mul(&acc).blur(Bound::AtLeast(target));
        if e_top != Bound::Exact {
            out = Series {
                tail_hi: out.tail_hi.meet(e_top),
                tail_lo: out.tail_lo.meet(e_top.shift(1)),
                fuzz: out.fuzz.meet(e_top.shift(1)),
                ..out
            };
        }
        Ok(out.scale(&c_inv).shift(-m))
    }

    /// Map coefficients into another coefficient ring.
    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Series<D> {
        let coeffs = self.coeffs.iter().map(|(k, c)| (*k, f(c))).collect();
        Series::from_parts(self.ctx, coeffs, self.lo, self.hi, self.tail_lo, self.tail_hi, self.fuzz)
    }
}

impl Series<Rat> {
    /// Exact polynomial from integer `(exponent, numerator, denominator)`.
    pub fn from_i64_terms(ctx: Ctx, terms: &[(i64, i64, i64)]) -> Result<Self> {
        let terms: Vec<(i64, Rat)> = terms
            .iter()
            .map(|(k, n, d)| (*k, Rat::new((*n).into(), (*d).into())))
            .collect();
        Self::from_terms(ctx, &terms)
    }

    /// `p^k` as a constant series.
    pub fn p_power(ctx: Ctx, k: i64) -> Self {
        Self::constant(ctx, p_pow(ctx.p, k))
    }

    /// Points `(-i, v(a_i))` over the stored support, for Newton polygons.
    pub fn newton_points(&self) -> Result<Vec<(Rat, Rat)>> {
        if self.coeffs.is_empty() {
            return Err(Error::ZeroInput);
        }
        let mut pts = Vec::new();
        for (i, c) in &self.coeffs {
            match c.val(self.ctx.p) {
                Val::Finite(v) => {
                    if self.fuzz_obscures(Val::Finite(v)) {
                        return Err(Error::PrecisionInsufficient(format!(
                            "coefficient at {i} uncertain"
                        )));
                    }
                    pts.push((Rat::from_integer((-i).into()), Rat::from_integer(v.into())));
                }
                Val::Infinite => unreachable!("stored zeros are normalised away"),
            }
        }
        pts.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(pts)
    }
}

impl<C: Coeff> fmt::Display for Series<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            write!(f, "0")?;
        } else {
            let mut first = true;
            for (k, c) in &self.coeffs {
                if !first {
                    write!(f, " + ")?;
                }
                first = false;
                match *k {
                    0 => write!(f, "{c:?}")?,
                    1 => write!(f, "{c:?}*T")?,
                    k => write!(f, "{c:?}*T^{k}")?,
                }
            }
        }
        if !self.is_exact() {
            write!(f, " (+O: tails {:?}/{:?}, fuzz {:?})", self.tail_lo, self.tail_hi, self.fuzz)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{int, rat};

    fn ctx2() -> Ctx {
        Ctx::standard(2).unwrap()
    }

    fn s(terms: &[(i64, i64, i64)]) -> Series<Rat> {
        Series::from_i64_terms(ctx2(), terms).unwrap()
    }

    #[test]
    fn mul_identity() {
        // (p + T) * 1 = p + T
        let f = s(&[(0, 2, 1), (1, 1, 1)]);
        let one = Series::one(ctx2());
        let prod = f.mul(&one);
        assert_eq!(prod.coeff(0), int(2));
        assert_eq!(prod.coeff(1), int(1));
        assert!(prod.is_exact());
    }

    #[test]
    fn mul_expansion_oracle() {
        // (2 + T)(1 + 2T) = 2 + 5T + 2T^2, expanded by hand
        let f = s(&[(0, 2, 1), (1, 1, 1)]);
        let g = s(&[(0, 1, 1), (1, 2, 1)]);
        let prod = f.mul(&g);
        assert_eq!(prod.coeff(0), int(2));
        assert_eq!(prod.coeff(1), int(5));
        assert_eq!(prod.coeff(2), int(2));
        assert!(prod.is_exact());
    }

    #[test]
    fn gauss_w_basic() {
        // f = 2T^{-5} + 3T^2 -> w = min(1, 0) = 0
        let f = s(&[(-5, 2, 1), (2, 3, 1)]);
        assert_eq!(f.gauss_w(), WQuery::Exact(Val::Finite(0)));
    }

    #[test]
    fn gauss_w_additive_on_units() {
        let u = s(&[(0, 2, 1), (1, 1, 1)]);
        let v = s(&[(0, 1, 1), (1, 2, 1)]);
        let w_u = u.gauss_w_exact().unwrap();
        let w_v = v.gauss_w_exact().unwrap();
        let w_uv = u.mul(&v).gauss_w_exact().unwrap();
        assert_eq!(w_uv, w_u.add(w_v));
        assert_eq!(w_uv, Val::Finite(0));
    }

    #[test]
    fn gauss_w_indeterminate_interval() {
        // all stored valuations >= 3 but high tail only certifies >= 1
        let mut f = s(&[(0, 8, 1)]);
        f.tail_hi = Bound::AtLeast(1);
        f.hi = 4;
        match f.gauss_w() {
            WQuery::Range { lo, hi } => {
                assert_eq!(lo, Bound::AtLeast(1));
                assert_eq!(hi, Val::Finite(3));
            }
            other => panic!("expected interval, got {other:?}"),
        }
    }

    #[test]
    fn wr_values() {
        // f = T, r = 1/2 -> 1/2
        let f = s(&[(1, 1, 1)]);
        assert_eq!(f.wr(&rat(1, 2)).exact_finite().unwrap(), rat(1, 2));
        // f = 2T^{-2} + T^3, r = 1/4 -> min(1 - 1/2, 3/4) = 1/2
        let f = s(&[(-2, 2, 1), (3, 1, 1)]);
        assert_eq!(f.wr(&rat(1, 4)).exact_finite().unwrap(), rat(1, 2));
    }

    #[test]
    fn naive_v_scan() {
        // p=2, f = 2T^5 + T^9: naive_v(f,0) = 9, naive_v(f,1) = 5
        let f = s(&[(5, 2, 1), (9, 1, 1)]);
        assert_eq!(f.naive_v(0).unwrap(), Val::Finite(9));
        assert_eq!(f.naive_v(1).unwrap(), Val::Finite(5));
        let zero = Series::<Rat>::zero(ctx2());
        assert_eq!(zero.naive_v(7).unwrap(), Val::Infinite);
        // naive_v_r(T^3, 0, 1/2) = 3/2
        let g = s(&[(3, 1, 1)]);
        assert_eq!(
            g.naive_v_r(0, &rat(1, 2)).unwrap(),
            QVal::Finite(rat(3, 2))
        );
    }

    #[test]
    fn invert_monomial() {
        let f = s(&[(1, 1, 1)]);
        let inv = f.invert_unit().unwrap();
        assert_eq!(inv.coeff(-1), int(1));
        assert!(inv.mul(&f).sub(&Series::one(ctx2())).unwrap().negligible(24));
    }

    #[test]
    fn invert_phi_t_geometric_oracle() {
        // f = T^2 + 2T; inverse = sum_{k>=0} (-2)^k T^{-2-k}, by the
        // geometric series computed directly
        let f = s(&[(2, 1, 1), (1, 2, 1)]);
        let inv = f.invert_unit().unwrap();
        let mut pow = int(1);
        for k in 0..20 {
            assert_eq!(inv.coeff(-2 - k), pow, "coefficient at {}", -2 - k);
            pow = &pow * &int(-2);
        }
        let prod = f.mul(&inv);
        assert!(prod.sub(&Series::one(ctx2())).unwrap().negligible(24));
    }

    #[test]
    fn invert_non_dominant_example() {
        // f = 2 + T + 2T^2: dominant index m = 1
        let f = s(&[(0, 2, 1), (1, 1, 1), (2, 2, 1)]);
        assert_eq!(f.robba_dominant_index().unwrap(), 1);
        let inv = f.invert_unit().unwrap();
        let prod = f.mul(&inv);
        assert!(prod.sub(&Series::one(ctx2())).unwrap().negligible(24));
    }

    #[test]
    fn invert_field_e_cases() {
        // f = p -> 1/p
        let f = s(&[(0, 2, 1)]);
        let inv = f.invert_field_e().unwrap();
        assert_eq!(inv.coeff(0), rat(1, 2));
        // f = 2T^{-1} + 1: m = 0, inverse = sum (-2)^k T^{-k}, w = 0
        let f = s(&[(-1, 2, 1), (0, 1, 1)]);
        let inv = f.invert_field_e().unwrap();
        let mut pow = int(1);
        for k in 0..20 {
            assert_eq!(inv.coeff(-k), pow);
            pow = &pow * &int(-2);
        }
        assert_eq!(inv.gauss_w_exact().unwrap(), Val::Finite(0));
        // zero input
        assert_eq!(Series::<Rat>::zero(ctx2()).invert_field_e(), Err(Error::ZeroInput));
    }

    #[test]
    fn exact_times_exact_stays_exact() {
        let f = s(&[(-3, 1, 2), (4, 7, 1)]);
        let g = s(&[(0, 5, 1), (2, 1, 3)]);
        assert!(f.mul(&g).is_exact());
    }

    #[test]
    fn window_underflow_errors() {
        let ctx = ctx2();
        let mut f = s(&[(0, 1, 1)]);
        f.lo = 10;
        f.hi = 20;
        f.tail_lo = Bound::AtLeast(0);
        f.coeffs.clear();
        let mut g = s(&[(0, 1, 1)]);
        g.lo = -20;
        g.hi = 5;
        g.tail_hi = Bound::AtLeast(0);
        g.coeffs.clear();
        assert!(matches!(f.add(&g), Err(Error::PrecisionInsufficient(_))));
        let _ = ctx;
    }
}
