//! Families over the one-variable Tate algebra `Q_p<x>`: Gauss sup-norms,
//! specialisation at classical points, the shrinking-neighborhood radius,
//! the family approximation algorithm with its invertibility extension,
//! extension descent, local models, and the scan harnesses.
//!
//! Family coefficients are polynomials in `x` at desk scale; `phi` acts as
//! the identity on the base.

use crate::coeff::{p_pow, rat_reduce_mod_p_pow, rat_val_p, Rat, Val};
use crate::error::{Error, Result};
use crate::frobenius::FrobeniusLift;
use crate::matrix::Matrix;
use crate::newton::{polygon_compare, HNPolygon, PolygonCompare, SlopeMultiset};
use crate::phimodule::{series_integral_certified, PhiModule};
use crate::series::{Coeff, QVal, Series, WrQuery};
use crate::slopes::{generic_hn_polygon_seeded, invert_unipotent};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::{Signed, Zero};

fn rzero() -> Rat {
    Zero::zero()
}

fn rone() -> Rat {
    num_traits::One::one()
}

/// A polynomial in the base variable `x` with exact rational coefficients;
/// the coefficient ring of family elements. Valuations are Gauss valuations
/// (minimum over `x`-coefficients), matching the sup-norm on the closed
/// unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct XPoly {
    /// coefficient of x^d at index d; no trailing zeros
    coeffs: Vec<Rat>,
}

impl XPoly {
    pub fn from_coeffs(coeffs: Vec<Rat>) -> XPoly {
        let mut coeffs = coeffs;
        while coeffs.last().map(Zero::is_zero).unwrap_or(false) {
            coeffs.pop();
        }
        XPoly { coeffs }
    }

    pub fn constant(c: Rat) -> XPoly {
        XPoly::from_coeffs(vec![c])
    }

    /// The variable `x`.
    pub fn x() -> XPoly {
        XPoly::from_coeffs(vec![rzero(), rone()])
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.coeffs
    }

    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    /// Evaluate at a point of the closed unit disk.
    pub fn eval(&self, x: &Rat) -> Rat {
        let mut acc = rzero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    /// Substitute `x -> a + b x` (recentre and rescale the disk).
    pub fn recentre(&self, a: &Rat, b: &Rat) -> XPoly {
        let mut acc = XPoly::from_coeffs(Vec::new());
        let sub = XPoly::from_coeffs(vec![a.clone(), b.clone()]);
        for c in self.coeffs.iter().rev() {
            acc = Coeff::add(&Coeff::mul(&acc, &sub), &XPoly::constant(c.clone()));
        }
        acc
    }

    /// Divide by `x - a` given that the polynomial vanishes at `a`.
    pub fn divide_linear_root(&self, a: &Rat) -> Result<XPoly> {
        if !Zero::is_zero(&self.eval(a)) {
            return Err(Error::InvalidInput(String::from(
                "element does not vanish at the centre",
            )));
        }
        // synthetic division
        let mut out: Vec<Rat> = vec![rzero(); self.coeffs.len().saturating_sub(1)];
        let mut carry = rzero();
        for d in (1..self.coeffs.len()).rev() {
            carry = self.coeffs[d].clone() + a * &carry;
            out[d - 1] = carry.clone();
        }
        Ok(XPoly::from_coeffs(out))
    }
}

impl Coeff for XPoly {
    fn zero() -> Self {
        XPoly { coeffs: Vec::new() }
    }
    fn one() -> Self {
        XPoly::constant(rone())
    }
    fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }
    fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let a = self.coeffs.get(i).cloned().unwrap_or_else(rzero);
            let b = other.coeffs.get(i).cloned().unwrap_or_else(rzero);
            out.push(a + b);
        }
        XPoly::from_coeffs(out)
    }
    fn neg(&self) -> Self {
        XPoly { coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
    fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return XPoly { coeffs: Vec::new() };
        }
        let mut out = vec![rzero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        XPoly::from_coeffs(out)
    }
    fn from_rat(r: &Rat) -> Self {
        XPoly::constant(r.clone())
    }
    fn val(&self, p: u64) -> Val {
        self.coeffs
            .iter()
            .map(|c| rat_val_p(c, p))
            .fold(Val::Infinite, Val::min)
    }
    fn inv(&self) -> Option<Self> {
        if self.coeffs.len() == 1 {
            Coeff::inv(&self.coeffs[0]).map(XPoly::constant)
        } else {
            None
        }
    }
    fn reduce_mod(&self, p: u64, k: i64) -> Self {
        XPoly::from_coeffs(
            self.coeffs
                .iter()
                .map(|c| rat_reduce_mod_p_pow(c, p, k))
                .collect(),
        )
    }
}

/// A family element: a truncated Laurent series whose coefficients are
/// polynomials in `x`.
pub type FamilySeries = Series<XPoly>;

/// A family of phi-modules over the Tate algebra.
pub type FamilyPhiModule = PhiModule<XPoly>;

/// A classical point of the closed unit disk: `|x| <= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalPoint(Rat);

impl ClassicalPoint {
    pub fn new(p: u64, x: Rat) -> Result<ClassicalPoint> {
        match rat_val_p(&x, p) {
            Val::Finite(v) if v < 0 => Err(Error::InvalidInput(format!(
                "point has |x| > 1 (valuation {v})"
            ))),
            _ => Ok(ClassicalPoint(x)),
        }
    }

    pub fn value(&self) -> &Rat {
        &self.0
    }
}

/// Substitute `x = point` in every coefficient.
pub fn specialize_series(f: &FamilySeries, pt: &ClassicalPoint) -> Series<Rat> {
    f.map_coeffs(|c| c.eval(&pt.0))
}

/// Specialise a family at a classical point; tags are preserved.
pub fn specialize_module(m: &FamilyPhiModule, pt: &ClassicalPoint) -> Result<PhiModule<Rat>> {
    let mat = m.matrix().map(|e| specialize_series(e, pt));
    PhiModule::new(m.tag(), m.lift().clone(), mat)
}

/// Lift a scalar matrix to a constant family.
pub fn constant_family(m: &Matrix<Rat>) -> Matrix<XPoly> {
    m.map(|e| e.map_coeffs(|c| XPoly::constant(c.clone())))
}

/// The sup-norm valuation of a family element over the closed unit disk:
/// the Gauss valuation of its coefficients.
pub fn sup_norm(f: &FamilySeries) -> crate::series::WQuery {
    f.gauss_w()
}

/// Largest p-power radius `rho = p^{-m}` such that `|f(y)| <= lambda |f|`
/// for `|y - x0| <= rho`, where `f` vanishes at `x0` and `lambda = p^{-l}`.
/// Computed by factoring out `(x - x0)` from every coefficient.
pub fn neighborhood_radius(f: &FamilySeries, x0: &ClassicalPoint, l: i64) -> Result<i64> {
    if l < 0 {
        return Err(Error::InvalidInput(String::from(
            "shrink factor must be p^{-l}, l >= 0",
        )));
    }
    if f.is_certified_zero() {
        return Ok(0);
    }
    let g = try_map_coeffs(f, |c| c.divide_linear_root(&x0.0))?;
    let vf = match sup_norm(f) {
        crate::series::WQuery::Exact(Val::Finite(v)) => v,
        crate::series::WQuery::Exact(Val::Infinite) => return Ok(0),
        _ => {
            return Err(Error::PrecisionInsufficient(String::from(
                "sup-norm of the element indeterminate",
            )))
        }
    };
    let vg = match g.gauss_w() {
        crate::series::WQuery::Exact(Val::Finite(v)) => v,
        crate::series::WQuery::Exact(Val::Infinite) => return Ok(0),
        _ => {
            return Err(Error::PrecisionInsufficient(String::from(
                "sup-norm of the cofactor indeterminate",
            )))
        }
    };
    // rho |g| <= lambda |f|  <=>  m >= l + v(f) - v(g)
    Ok((l + vf - vg).max(0))
}

fn try_map_coeffs(
    f: &FamilySeries,
    op: impl Fn(&XPoly) -> Result<XPoly>,
) -> Result<FamilySeries> {
    let mut coeffs = alloc::collections::BTreeMap::new();
    for (k, c) in f.terms() {
        coeffs.insert(k, op(c)?);
    }
    let (lo, hi) = f.window();
    Ok(Series::from_parts(
        f.ctx(),
        coeffs,
        lo,
        hi,
        f.tail_lo(),
        f.tail_hi(),
        f.fuzz(),
    ))
}

/// Recentre and rescale a family: `x -> x0 + p^m x`, mapping the subdisk
/// `|x - x0| <= p^{-m}` onto the unit disk.
pub fn recentre_family(m: &Matrix<XPoly>, x0: &Rat, mexp: i64, p: u64) -> Matrix<XPoly> {
    let scale = p_pow(p, mexp);
    m.map(|e| e.map_coeffs(|c| c.recentre(x0, &scale)))
}

/// Report of a family-approximation run.
#[derive(Debug, Clone)]
pub struct ApproxReport {
    pub iterations: usize,
    /// `h = -w_r(D) - w_r(D^{-1})`.
    pub h: Rat,
    /// The certified lower bound `c + h/(q-1)` on `w_r` of the residual.
    pub wr_bound: Rat,
    /// Valuation threshold `k`: the residual lies in `p^k` times the
    /// integral ring at radius `r`.
    pub k: i64,
}

/// The family approximation algorithm. Given matrices `F`, `D` over the
/// annulus ring at radius `r` with `D` invertible, `h = -w_r(D) - w_r(D^{-1})`,
/// `w_r(F D^{-1} - I) >= c + h/(q-1)` and `2(q-1)(k-1) <= c`, build an
/// invertible `U` such that `V = U^{-1} F phi(U) D^{-1} - I` has entries in
/// `p^k` times the integral ring at radius `r` and `w_r(V) >= c + h/(q-1)`.
///
/// Each step collects the terms of `V` whose coefficient valuation is at
/// most `k - 1`; the iteration stops when none remain at window precision.
pub fn family_approximation<C: Coeff>(
    f: &Matrix<C>,
    d: &Matrix<C>,
    lift: &FrobeniusLift,
    r: &Rat,
    c: &Rat,
    k: i64,
) -> Result<(Matrix<C>, ApproxReport)> {
    let ctx = f.ctx();
    let q = ctx.q;
    if !r.is_positive() || r >= &(ctx.r0() / Rat::from_integer((q as i64).into())) {
        return Err(Error::InvalidInput(format!("radius {r} outside (0, r0/q)")));
    }
    if !c.is_positive() {
        return Err(Error::InvalidInput(String::from("c must be positive")));
    }
    if k < 1 || Rat::from_integer((2 * (q as i64 - 1) * (k - 1)).into()) > *c {
        return Err(Error::InvalidInput(format!("k = {k} violates 2(q-1)(k-1) <= c")));
    }
    let n = f.rows();
    if d.rows() != n || d.cols() != n || f.cols() != n {
        return Err(Error::InvalidInput(String::from("shape mismatch")));
    }
    let d_inv = invert_ring_matrix(d)?;
    let wr_d = wr_matrix_exact(d, r)?;
    let wr_d_inv = wr_matrix_exact(&d_inv, r)?;
    let h = -(wr_d + wr_d_inv);
    let qm1 = Rat::from_integer((q as i64 - 1).into());
    let bound = c + &h / &qm1;
    // precondition: w_r(F D^{-1} - I) >= c + h/(q-1)
    let v0 = f.mul(&d_inv)?.sub(&Matrix::identity(ctx, n))?;
    check_wr_at_least(&v0, r, &bound)?;
    let mut u = Matrix::identity(ctx, n);
    let mut f_cur = f.clone();
    let cap = 64usize;
    let mut iterations = 0;
    loop {
        let v = f_cur.mul(&d_inv)?.sub(&Matrix::identity(ctx, n))?;
        // collect the sub-sum of terms with coefficient valuation <= k-1
        let mut x = Matrix::zero(ctx, n, n);
        let mut any = false;
        for i in 0..n {
            for j in 0..n {
                let sel = select_low_valuation(v.at(i, j), k - 1)?;
                if !sel.is_certified_zero() {
                    any = true;
                }
                *x.at_mut(i, j) = sel;
            }
        }
        if !any {
            let report = ApproxReport { iterations, h, wr_bound: bound.clone(), k };
            // certify both postconditions before returning
            assert_approximation_postconditions(&f_cur, &d_inv, r, &report)?;
            return Ok((u, report));
        }
        if iterations >= cap {
            return Err(Error::Internal(String::from(
                "family approximation exceeded its iteration cap",
            )));
        }
        iterations += 1;
        let ix = Matrix::identity(ctx, n).add(&x)?;
        let ix_inv = invert_unipotent_generic(&ix, ctx.prec)?;
        u = u.mul(&ix)?;
        f_cur = ix_inv.mul(&f_cur)?.mul(&ix.apply_lift(lift))?;
    }
}

/// Terms of a family series whose coefficient valuation is at most `bound`.
/// Precision-insufficient when the certificates cannot decide membership.
fn select_low_valuation<C: Coeff>(f: &Series<C>, bound: i64) -> Result<Series<C>> {
    let ctx = f.ctx();
    if !f.tail_lo().above(bound) || !f.tail_hi().above(bound) || !f.fuzz().above(bound) {
        return Err(Error::PrecisionInsufficient(format!(
            "cannot certify the valuation-{bound} sub-sum against the window"
        )));
    }
    let mut terms: Vec<(i64, C)> = Vec::new();
    for (k, c) in f.terms() {
        match c.val(ctx.p) {
            Val::Finite(v) if v <= bound => terms.push((k, c.clone())),
            _ => {}
        }
    }
    Series::from_terms(ctx, &terms)
}

/// Postconditions of the approximation lemma, asserted by independent
/// recomputation from the returned data.
pub fn assert_approximation_postconditions<C: Coeff>(
    f_transformed: &Matrix<C>,
    d_inv: &Matrix<C>,
    r: &Rat,
    report: &ApproxReport,
) -> Result<()> {
    let ctx = f_transformed.ctx();
    let n = f_transformed.rows();
    let v = f_transformed.mul(d_inv)?.sub(&Matrix::identity(ctx, n))?;
    // (a) entries in p^k * integral ring: every coefficient valuation >= k
    for e in v.entries() {
        let shifted = e.scale(&C::from_rat(&p_pow(ctx.p, -report.k)));
        if !series_integral_certified(&shifted)? {
            return Err(Error::Internal(format!(
                "approximation postcondition failed: residual below p^{}",
                report.k
            )));
        }
    }
    // (b) w_r of the residual at least c + h/(q-1)
    check_wr_at_least(&v, r, &report.wr_bound)?;
    Ok(())
}

fn check_wr_at_least<C: Coeff>(m: &Matrix<C>, r: &Rat, bound: &Rat) -> Result<()> {
    for e in m.entries() {
        match e.wr(r) {
            WrQuery::Exact(QVal::Infinite) => {}
            WrQuery::Exact(QVal::Finite(v)) => {
                if &v < bound {
                    return Err(Error::PrecisionInsufficient(format!(
                        "w_r = {v} below the required bound {bound}"
                    )));
                }
            }
            WrQuery::Range { lo: Some(v), .. } => {
                if &v < bound {
                    return Err(Error::PrecisionInsufficient(format!(
                        "w_r only bounded below by {v}, need {bound}"
                    )));
                }
            }
            WrQuery::Range { lo: None, .. } => {
                return Err(Error::PrecisionInsufficient(String::from(
                    "w_r unbounded below at window precision",
                )))
            }
        }
    }
    Ok(())
}

fn wr_matrix_exact<C: Coeff>(m: &Matrix<C>, r: &Rat) -> Result<Rat> {
    let mut out: Option<Rat> = None;
    for e in m.entries() {
        match e.wr(r) {
            WrQuery::Exact(QVal::Finite(v)) => {
                out = Some(match out {
                    None => v,
                    Some(o) => {
                        if v < o {
                            v
                        } else {
                            o
                        }
                    }
                });
            }
            WrQuery::Exact(QVal::Infinite) => {}
            _ => {
                return Err(Error::PrecisionInsufficient(String::from(
                    "matrix radius valuation indeterminate",
                )))
            }
        }
    }
    out.ok_or(Error::ZeroInput)
}

/// Invert a matrix whose determinant passes the dominant-unit test.
fn invert_ring_matrix<C: Coeff>(m: &Matrix<C>) -> Result<Matrix<C>> {
    m.inverse_with(|d| d.invert_unit())
}

/// `I + X` inversion over any coefficient ring.
fn invert_unipotent_generic<C: Coeff>(m: &Matrix<C>, target: i64) -> Result<Matrix<C>> {
    let ctx = m.ctx();
    let n = m.rows();
    let x = m.sub(&Matrix::identity(ctx, n))?;
    let neg_x = x.neg();
    let mut acc = Matrix::identity(ctx, n);
    let mut term = Matrix::identity(ctx, n);
    let cap = 4 * target.unsigned_abs() as usize + 16;
    for _ in 0..cap {
        term = term.mul(&neg_x)?;
        let negligible = term
            .entries()
            .iter()
            .all(|e| e.is_certified_zero() || e.negligible(target));
        if negligible {
            return Ok(acc.map(|e| e.truncate_to(target)));
        }
        acc = acc.add(&term)?;
    }
    Err(Error::Internal(String::from(
        "unipotent inversion failed to converge",
    )))
}

/// Certificate that `U` is invertible over every annulus window
/// `[r/q^i, qr]` up to the cap.
#[derive(Debug, Clone)]
pub struct AnnulusCertificate {
    pub depth: u32,
    pub inner: Rat,
    pub outer: Rat,
}

/// Checks invertibility of `U` on widened annuli `[r/q^i, qr]` for `i` up
/// to `depth`, per the bootstrap of the invertibility-extension lemma: the
/// determinant must stay a unit as the inner radius shrinks.
pub fn extend_invertibility<C: Coeff>(
    u: &Matrix<C>,
    r: &Rat,
    depth: u32,
) -> Result<AnnulusCertificate> {
    let ctx = u.ctx();
    let q = Rat::from_integer((ctx.q as i64).into());
    let det = u.det()?;
    let outer = r * &q;
    let mut inner = r.clone();
    for _ in 0..depth {
        inner = &inner / &q;
        unit_on_annulus(&det, &inner, &outer)?;
    }
    Ok(AnnulusCertificate { depth, inner, outer })
}

/// An element is a unit on the annulus `[s_inner, s_outer]` when a single
/// index minimises `v(a_i) + s i` at both endpoints, certified against the
/// tails (no Newton-polygon slope falls inside the annulus).
fn unit_on_annulus<C: Coeff>(f: &Series<C>, s_inner: &Rat, s_outer: &Rat) -> Result<()> {
    let m_out = dominant_wr_index(f, s_outer)?;
    let m_in = dominant_wr_index(f, s_inner)?;
    if m_out != m_in {
        return Err(Error::NotAUnit(format!(
            "Newton slope inside the annulus: dominant index moves {m_out} -> {m_in}"
        )));
    }
    Ok(())
}

fn dominant_wr_index<C: Coeff>(f: &Series<C>, s: &Rat) -> Result<i64> {
    let p = f.ctx().p;
    let mut best: Option<(Rat, i64)> = None;
    for (k, c) in f.terms() {
        if let Val::Finite(v) = c.val(p) {
            let w = Rat::from_integer(v.into()) + s * Rat::from_integer(k.into());
            match &best {
                None => best = Some((w, k)),
                Some((bw, _)) => {
                    if w < *bw {
                        best = Some((w, k));
                    }
                }
            }
        }
    }
    let (w, k) = best.ok_or(Error::ZeroInput)?;
    // uniqueness of the minimiser
    for (k2, c) in f.terms() {
        if k2 == k {
            continue;
        }
        if let Val::Finite(v) = c.val(p) {
            let w2 = Rat::from_integer(v.into()) + s * Rat::from_integer(k2.into());
            if w2 == w {
                return Err(Error::NotAUnit(format!(
                    "two indices {k} and {k2} attain the minimum at s = {s}"
                )));
            }
        }
    }
    // certificates must not undercut the dominant value
    let guard = wr_ceil(&w);
    if !(f.tail_lo().above(guard) && f.tail_hi().above(guard) && f.fuzz().above(guard)) {
        return Err(Error::PrecisionInsufficient(String::from(
            "certificates cannot pin the dominant annulus index",
        )));
    }
    Ok(k)
}

fn wr_ceil(w: &Rat) -> i64 {
    use num_integer::Integer as _;
    let fl = w.numer().div_floor(w.denom());
    let fl: i64 = i64::try_from(fl).unwrap_or(i64::MAX / 2);
    fl + 1
}

/// Extension descent: given bounded invertible blocks `F11`, `F22` and an
/// off-diagonal block `F12` over the annulus ring, rescale by `p^m` so that
/// the approximation lemma applies with `D = diag(F11, F22)`, and return
/// the scaling exponent, the block-unipotent transform, and the bounded
/// extension matrix.
pub fn descend_extension(
    f11: &Matrix<Rat>,
    f22: &Matrix<Rat>,
    f12: &Matrix<Rat>,
    lift: &FrobeniusLift,
    r: &Rat,
) -> Result<(i64, Matrix<Rat>, Matrix<Rat>)> {
    let ctx = f11.ctx();
    let n1 = f11.rows();
    let n2 = f22.rows();
    if f12.rows() != n1 || f12.cols() != n2 {
        return Err(Error::InvalidInput(String::from("block shapes mismatch")));
    }
    let n = n1 + n2;
    let q = ctx.q as i64;
    let qm1 = Rat::from_integer((q - 1).into());
    // D = diag(F11, F22); scaling by p^m leaves it unchanged since the
    // coefficient action fixes p
    let mut d = Matrix::zero(ctx, n, n);
    for i in 0..n1 {
        for j in 0..n1 {
            *d.at_mut(i, j) = f11.at(i, j).clone();
        }
    }
    for i in 0..n2 {
        for j in 0..n2 {
            *d.at_mut(n1 + i, n1 + j) = f22.at(i, j).clone();
        }
    }
    let d_inv = invert_ring_matrix(&d)?;
    let h = -(wr_matrix_exact(&d, r)? + wr_matrix_exact(&d_inv, r)?);
    // choose m with w_r(p^m F12 F22^{-1}) >= c + h/(q-1), c = 1
    let f22_inv = invert_ring_matrix(f22)?;
    let c = rone();
    let needed = &c + &h / &qm1;
    let m = if f12.entries().iter().all(|e| e.is_certified_zero()) {
        0
    } else {
        let base = wr_matrix_exact(&f12.mul(&f22_inv)?, r)?;
        let deficit = &needed - &base;
        if deficit.is_positive() {
            wr_ceil(&deficit).max(0)
        } else {
            0
        }
    };
    let scale = Series::constant(ctx, p_pow(ctx.p, m));
    let mut f = d.clone();
    for i in 0..n1 {
        for j in 0..n2 {
            *f.at_mut(i, n1 + j) = f12.at(i, j).mul(&scale);
        }
    }
    let (u, _report) = family_approximation(&f, &d, lift, r, &c, 1)?;
    // the construction keeps U block-unipotent
    for i in 0..n {
        for j in 0..n {
            let e = u.at(i, j);
            let in_upper_block = i < n1 && j >= n1;
            if i == j {
                if !e.sub(&Series::one(ctx))?.negligible(1) {
                    return Err(Error::Internal(String::from(
                        "descent transform not unipotent on the diagonal",
                    )));
                }
            } else if !in_upper_block && !e.negligible(1) {
                return Err(Error::Internal(String::from(
                    "descent transform has content outside the upper block",
                )));
            }
        }
    }
    let u_inv = invert_unipotent(&u, ctx.prec)?;
    let out = u_inv.mul(&f)?.mul(&u.apply_lift(lift))?;
    // certify the output is bounded: every entry has an exact Gauss valuation
    for e in out.entries() {
        e.gauss_w_exact()?;
    }
    Ok((m, u, out))
}

/// Report from a local-model construction.
#[derive(Debug, Clone)]
pub struct LocalModelReport {
    /// `x -> x0 + p^m x` maps the certified subdisk onto the unit disk.
    pub radius_exp: i64,
    pub k: i64,
    pub c: Rat,
    /// Perturbation constant of the central fiber.
    pub c_fx: i64,
    /// Sampled points (in the subdisk coordinates) where the perturbation
    /// bound was verified.
    pub verified_points: Vec<Rat>,
}

/// Build a local model around a classical point: compute the perturbation
/// constant of the central fiber through the splitting iteration, shrink
/// the disk until the approximation lemma applies, run it, and verify at
/// sampled points that the transformed family stays within the perturbation
/// bound of the central fiber (hence has constant generic polygon).
pub fn localize_model(
    family: &FamilyPhiModule,
    x0: &ClassicalPoint,
    d_center: &Matrix<Rat>,
    r: &Rat,
    split_target: i64,
    seed: u64,
) -> Result<(Matrix<XPoly>, LocalModelReport)> {
    let ctx = family.ctx();
    let fx = specialize_module(family, x0)?;
    // perturbation data for the central fiber (splittable class required)
    let (u0, d0, _cert) =
        crate::slopes::valuation_split(fx.matrix(), d_center, &fx, split_target)?;
    let c_fx = crate::slopes::perturbation_constant(fx.matrix(), &u0, &d0, &fx)?;
    let w_fx = match fx.matrix().gauss_w_exact()? {
        Val::Finite(v) => v,
        Val::Infinite => return Err(Error::ZeroInput),
    };
    let q = ctx.q as i64;
    let k = (c_fx - w_fx).max(0) + 1;
    let c = Rat::from_integer((2 * (q - 1) * (k - 1)).into()).max(Rat::one());
    // required closeness of the rescaled family to the central fiber
    let fx_inv = invert_ring_matrix(fx.matrix())?;
    let h = -(wr_matrix_exact(fx.matrix(), r)? + wr_matrix_exact(&fx_inv, r)?);
    let qm1 = Rat::from_integer((q - 1).into());
    let wr_fx_inv = wr_matrix_exact(&fx_inv, r)?;
    let needed = &c - &wr_fx_inv + &h / &qm1;
    // shrink the disk until the family is close enough; every entry of
    // F - F_x vanishes at x0
    let diff = family.matrix().sub(&constant_family(fx.matrix()))?;
    let l = wr_ceil(&needed).max(0);
    let mut radius_exp = 0i64;
    for e in diff.entries() {
        if e.is_certified_zero() {
            continue;
        }
        radius_exp = radius_exp.max(neighborhood_radius(e, x0, l)?);
    }
    let rescaled = recentre_family(family.matrix(), x0.value(), radius_exp, ctx.p);
    let fx_family = constant_family(fx.matrix());
    let (u, _report) = family_approximation(&rescaled, &fx_family, family.lift(), r, &c, k)?;
    // verification scan: transformed fibers stay within the perturbation
    // bound of the central fiber, hence the generic polygon is constant
    let samples = sample_unit_disk(ctx.p, seed, 5);
    let mut verified = Vec::new();
    let u_inv = invert_unipotent_generic(&u, ctx.prec)?;
    let transformed = u_inv.mul(&rescaled)?.mul(&u.apply_lift(family.lift()))?;
    for s in samples {
        let pt = ClassicalPoint::new(ctx.p, s.clone())?;
        let spec = transformed.map(|e| specialize_series(e, &pt));
        let delta = spec.sub(fx.matrix())?;
        let mut min_v = Val::Infinite;
        for e in delta.entries() {
            min_v = min_v.min(e.gauss_w_exact()?);
        }
        if let Val::Finite(v) = min_v {
            if v <= c_fx {
                return Err(Error::Internal(format!(
                    "local model failed the perturbation bound at a sample: {v} <= {c_fx}"
                )));
            }
        }
        verified.push(s);
    }
    Ok((
        u,
        LocalModelReport { radius_exp, k, c, c_fx, verified_points: verified },
    ))
}

fn sample_unit_disk(p: u64, seed: u64, count: usize) -> Vec<Rat> {
    use rand_core::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![rzero(), rone()];
    while out.len() < count + 2 {
        let a = (rng.next_u64() % 64) as i64 - 32;
        let b = 2 * ((rng.next_u64() % 4) as i64) + 1;
        let cand = crate::rat(a, b);
        let integral = match rat_val_p(&cand, p) {
            Val::Infinite => true,
            Val::Finite(v) => v >= 0,
        };
        if integral && !out.contains(&cand) {
            out.push(cand);
        }
    }
    out
}

/// One scan-class entry: a distinct generic polygon and the points showing
/// it.
#[derive(Debug, Clone)]
pub struct ScanClass {
    pub multiset: SlopeMultiset,
    pub polygon: HNPolygon,
    pub points: Vec<Rat>,
}

/// Compute the generic polygon at each point and partition the points by
/// polygon.
pub fn scan_generic(
    family: &FamilyPhiModule,
    points: &[ClassicalPoint],
    seed: u64,
) -> Result<Vec<ScanClass>> {
    let mut classes: Vec<ScanClass> = Vec::new();
    for pt in points {
        let m = specialize_module(family, pt)?;
        let (ms, hn) = generic_hn_polygon_seeded(&m, seed)?;
        match classes.iter_mut().find(|c| c.multiset == ms) {
            Some(c) => c.points.push(pt.value().clone()),
            None => classes.push(ScanClass {
                multiset: ms,
                polygon: hn,
                points: vec![pt.value().clone()],
            }),
        }
    }
    Ok(classes)
}

/// Oracle for special polygons of fibers, available for the classes the
/// theory decides: globally pure families and the rank-2 classifier family.
pub enum SpecialOracle<'a> {
    /// Every fiber is pure of the given slope: the polygon is a line.
    GloballyPure { slope: Rat, rank: u32 },
    /// Classifier from an assembled rank-2 example family.
    Classifier(&'a dyn Fn(&ClassicalPoint) -> Result<SlopeMultiset>),
}

impl<'a> SpecialOracle<'a> {
    pub fn special(&self, pt: &ClassicalPoint) -> Result<SlopeMultiset> {
        match self {
            SpecialOracle::GloballyPure { slope, rank } => {
                Ok(SlopeMultiset::new(vec![slope.clone(); *rank as usize]))
            }
            SpecialOracle::Classifier(f) => f(pt),
        }
    }
}

/// One row of a semicontinuity report.
#[derive(Debug, Clone)]
pub struct SemicontinuityRow {
    pub point: Rat,
    pub special: SlopeMultiset,
    pub verdict: PolygonCompare,
}

/// Semicontinuity scan: assert that the special polygon of every sampled
/// fiber lies above (or equals) the special polygon at the centre, with
/// the same endpoints.
pub fn scan_semicontinuity(
    center: &ClassicalPoint,
    points: &[ClassicalPoint],
    oracle: &SpecialOracle,
) -> Result<(SlopeMultiset, Vec<SemicontinuityRow>, bool)> {
    let base = oracle.special(center)?;
    let base_poly = HNPolygon::from_multiset(&base);
    let mut rows = Vec::new();
    let mut all_ok = true;
    for pt in points {
        let ms = oracle.special(pt)?;
        let poly = HNPolygon::from_multiset(&ms);
        let verdict = polygon_compare(&poly, &base_poly)?;
        if !matches!(verdict, PolygonCompare::Equal | PolygonCompare::FirstAbove) {
            all_ok = false;
        }
        rows.push(SemicontinuityRow {
            point: pt.value().clone(),
            special: ms,
            verdict,
        });
    }
    Ok((base, rows, all_ok))
}
