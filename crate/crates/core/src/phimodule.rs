//! Frobenius modules: invertible matrices over a tagged series ring, with
//! the degree/slope calculus and the tensor formalism.
//!
//! Column convention, fixed project-wide: `phi(e_j) = sum_i F[i][j] e_i`.

use crate::coeff::{p_pow, Ctx, Rat, Val};
use crate::error::{Error, Result};
use crate::frobenius::FrobeniusLift;
use crate::matrix::Matrix;
use crate::series::{Coeff, Series};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// Which series ring the module lives over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingTag {
    /// The full Robba ring.
    Robba,
    /// The bounded subring (Gauss valuation defined).
    Bounded,
    /// The integral subring (all coefficient valuations >= 0).
    Integral,
    /// The completion of the bounded subring; a field.
    EField,
}

impl RingTag {
    fn combine(self, other: RingTag) -> RingTag {
        use RingTag::*;
        match (self, other) {
            (EField, _) | (_, EField) => EField,
            (Robba, _) | (_, Robba) => Robba,
            (Bounded, _) | (_, Bounded) => Bounded,
            (Integral, Integral) => Integral,
        }
    }
}

/// A phi-module: an invertible Frobenius matrix over a tagged ring.
#[derive(Debug, Clone)]
pub struct PhiModule<C: Coeff> {
    tag: RingTag,
    lift: FrobeniusLift,
    mat: Matrix<C>,
}

impl<C: Coeff> PhiModule<C> {
    /// Validates that the determinant passes the unit test of the tag's
    /// ring (the matrix defines an isomorphism `phi^* M -> M`).
    pub fn new(tag: RingTag, lift: FrobeniusLift, mat: Matrix<C>) -> Result<PhiModule<C>> {
        if mat.rows() != mat.cols() {
            return Err(Error::InvalidInput(String::from("Frobenius matrix must be square")));
        }
        let m = PhiModule { tag, lift, mat };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let det = self.mat.det()?;
        match self.tag {
            RingTag::Robba | RingTag::Bounded => {
                det.is_unit_robba()?;
            }
            RingTag::Integral => {
                for e in self.mat.entries() {
                    if !series_integral_certified(e)? {
                        return Err(Error::NotAUnit(String::from(
                            "integral tag with non-integral entry",
                        )));
                    }
                }
                let m = det.robba_dominant_index()?;
                if det.coeff(m).val(self.ctx().p) != Val::Finite(0) {
                    return Err(Error::NotAUnit(String::from(
                        "determinant is not an integral unit",
                    )));
                }
            }
            RingTag::EField => {
                if !det.is_certified_nonzero() {
                    return Err(Error::NotAUnit(String::from(
                        "determinant not certified nonzero over the field",
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn tag(&self) -> RingTag {
        self.tag
    }

    pub fn lift(&self) -> &FrobeniusLift {
        &self.lift
    }

    pub fn matrix(&self) -> &Matrix<C> {
        &self.mat
    }

    pub fn rank(&self) -> usize {
        self.mat.rows()
    }

    pub fn ctx(&self) -> Ctx {
        self.mat.ctx()
    }

    /// Retag (e.g. view a bounded module over the completed field).
    pub fn retag(&self, tag: RingTag) -> Result<PhiModule<C>> {
        PhiModule::new(tag, self.lift.clone(), self.mat.clone())
    }

    /// `deg(M) = w(det F)`.
    pub fn degree(&self) -> Result<i64> {
        match self.mat.det()?.gauss_w_exact()? {
            Val::Finite(v) => Ok(v),
            Val::Infinite => Err(Error::ZeroInput),
        }
    }

    /// `mu(M) = deg(M) / rank(M)`.
    pub fn slope(&self) -> Result<Rat> {
        let d = self.degree()?;
        Ok(Rat::new(d.into(), (self.rank() as i64).into()))
    }

    /// Twist by the rank-1 module with multiplier `p^c`: `F -> p^c F`.
    pub fn twist(&self, c: i64) -> Result<PhiModule<C>> {
        let factor = C::from_rat(&p_pow(self.ctx().p, c));
        let mat = self.mat.map(|e| e.scale(&factor));
        let tag = if self.tag == RingTag::Integral && c != 0 { RingTag::Bounded } else { self.tag };
        PhiModule::new(tag, self.lift.clone(), mat)
    }

    /// Tensor product (Kronecker matrix).
    pub fn tensor(&self, other: &PhiModule<C>) -> Result<PhiModule<C>> {
        if self.lift != other.lift {
            return Err(Error::InvalidInput(String::from("tensor of modules over different lifts")));
        }
        let mat = self.mat.kronecker(&other.mat);
        PhiModule::new(self.tag.combine(other.tag), self.lift.clone(), mat)
    }

    /// Dual module: `F -> (F^{-1})^T`.
    pub fn dual(&self) -> Result<PhiModule<C>> {
        let inv = self.invert_matrix(&self.mat)?;
        let tag = if self.tag == RingTag::Integral { RingTag::Integral } else { self.tag };
        PhiModule::new(tag, self.lift.clone(), inv.transpose())
    }

    /// Invert a matrix over the module's ring (determinant inverted by the
    /// tag-appropriate routine).
    pub fn invert_matrix(&self, m: &Matrix<C>) -> Result<Matrix<C>> {
        match self.tag {
            RingTag::EField => m.inverse_with(|d| d.invert_field_e()),
            _ => m.inverse_with(|d| d.invert_unit()),
        }
    }

    /// Exterior power with lexicographically ordered index subsets.
    pub fn exterior(&self, k: usize) -> Result<PhiModule<C>> {
        let n = self.rank();
        if k == 0 || k > n {
            return Err(Error::InvalidInput(format!("exterior power k = {k} out of range")));
        }
        let subsets = k_subsets(n, k);
        let ctx = self.ctx();
        let mut out = Matrix::zero(ctx, subsets.len(), subsets.len());
        for (si, s) in subsets.iter().enumerate() {
            for (ti, t) in subsets.iter().enumerate() {
                // minor with rows s, columns t
                let mut entries = Vec::with_capacity(k * k);
                for &i in s {
                    for &j in t {
                        entries.push(self.mat.at(i, j).clone());
                    }
                }
                let minor = Matrix::new(k, k, entries)?;
                *out.at_mut(si, ti) = minor.det()?;
            }
        }
        PhiModule::new(self.tag, self.lift.clone(), out)
    }

    /// Pushforward along `phi^a`: same data, matrix `F phi(F) ... phi^{a-1}(F)`,
    /// lift iterated `a` times.
    pub fn pushforward(&self, a: u32) -> Result<PhiModule<C>> {
        if a == 0 {
            return Err(Error::InvalidInput(String::from("pushforward needs a >= 1")));
        }
        let mut acc = self.mat.clone();
        let mut img = self.mat.clone();
        for _ in 1..a {
            img = img.apply_lift(&self.lift);
            acc = acc.mul(&img)?;
        }
        let lift = self.lift.iterate(a)?;
        let acc = rebind_matrix(lift.ctx(), &acc);
        PhiModule::new(self.tag, lift, acc)
    }

    /// Pullback of a `phi^a`-module to a `phi`-module of rank `n a` (block
    /// companion along the `X`-grading).
    pub fn pullback(&self, base: &FrobeniusLift, a: u32) -> Result<PhiModule<C>> {
        if a == 0 {
            return Err(Error::InvalidInput(String::from("pullback needs a >= 1")));
        }
        let n = self.rank();
        let na = n * a as usize;
        let ctx = base.ctx();
        let mat = rebind_matrix(ctx, &self.mat);
        let mut out = Matrix::zero(ctx, na, na);
        for j in 0..(a as usize - 1) {
            for i in 0..n {
                *out.at_mut((j + 1) * n + i, j * n + i) = Series::one(ctx);
            }
        }
        for i in 0..n {
            for k in 0..n {
                *out.at_mut(k, (a as usize - 1) * n + i) = mat.at(k, i).clone();
            }
        }
        PhiModule::new(self.tag, base.clone(), out)
    }

    /// Conjugate the Frobenius matrix: `F -> U^{-1} F phi(U)`.
    pub fn change_basis(&self, u: &Matrix<C>) -> Result<PhiModule<C>> {
        let u_inv = self.invert_matrix(u)?;
        let mat = u_inv.mul(&self.mat)?.mul(&u.apply_lift(&self.lift))?;
        PhiModule::new(self.tag, self.lift.clone(), mat)
    }

    /// Does the basis `e U` span an integral lattice with `phi^* N = N`?
    /// True iff `U^{-1} F phi(U)` and its inverse are integral within
    /// certificates.
    pub fn is_etale_witness(&self, u: &Matrix<C>) -> Result<bool> {
        let u_inv = self.invert_matrix(u)?;
        let g = u_inv.mul(&self.mat)?.mul(&u.apply_lift(&self.lift))?;
        for e in g.entries() {
            if !series_integral_certified(e)? {
                return Ok(false);
            }
        }
        let det = g.det()?;
        let m = det.robba_dominant_index()?;
        if det.coeff(m).val(self.ctx().p) != Val::Finite(0) {
            return Ok(false);
        }
        let g_inv = g.inverse_with(|d| d.invert_unit())?;
        for e in g_inv.entries() {
            if !series_integral_certified(e)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

fn rebind_matrix<C: Coeff>(ctx: Ctx, m: &Matrix<C>) -> Matrix<C> {
    m.map(|e| {
        let mut out = Series::zero(ctx);
        for (k, c) in e.terms() {
            if let Ok(mono) = Series::monomial(ctx, k, c.clone()) {
                out = out.add(&mono).expect("full windows");
            }
        }
        out.with_tails(e.tail_lo(), e.tail_hi(), e.fuzz())
    })
}

/// Certified integrality: every coefficient has valuation >= 0. Errors when
/// the certificates cannot decide.
pub fn series_integral_certified<C: Coeff>(s: &Series<C>) -> Result<bool> {
    let p = s.ctx().p;
    for (_k, c) in s.terms() {
        match c.val(p) {
            Val::Finite(v) if v < 0 => return Ok(false),
            Val::Finite(_) | Val::Infinite => {}
        }
    }
    // stored values are >= 0; errors must also be
    if s.fuzz().at_least(0) && s.tail_lo().at_least(0) && s.tail_hi().at_least(0) {
        Ok(true)
    } else {
        Err(Error::PrecisionInsufficient(format!(
            "integrality undecidable: tails {:?}/{:?}, fuzz {:?}",
            s.tail_lo(),
            s.tail_hi(),
            s.fuzz()
        )))
    }
}

/// The standard cyclic module `V_{lambda,d}`: `phi(e_1) = e_2, ...,
/// phi(e_{d-1}) = e_d, phi(e_d) = lambda e_1` (companion-style matrix).
pub fn standard_module(
    tag: RingTag,
    lift: &FrobeniusLift,
    lambda: Series<Rat>,
    d: usize,
) -> Result<PhiModule<Rat>> {
    if d == 0 {
        return Err(Error::InvalidInput(String::from("standard module needs d >= 1")));
    }
    let ctx = lift.ctx();
    let mut mat = Matrix::zero(ctx, d, d);
    for j in 0..d.saturating_sub(1) {
        *mat.at_mut(j + 1, j) = Series::one(ctx);
    }
    *mat.at_mut(0, d - 1) = lambda;
    PhiModule::new(tag, lift.clone(), mat)
}

/// Rank-1 module `R(c)` with `phi(v) = p^c v`.
pub fn twist_module(tag: RingTag, lift: &FrobeniusLift, c: i64) -> Result<PhiModule<Rat>> {
    let ctx = lift.ctx();
    let lambda = Series::p_power(ctx, c);
    standard_module(tag, lift, lambda, 1)
}

fn k_subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic k-subset
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{int, rat};

    fn ctx2() -> Ctx {
        Ctx::standard(2).unwrap()
    }

    fn lift2() -> FrobeniusLift {
        FrobeniusLift::standard(ctx2()).unwrap()
    }

    fn diag_p_pinv() -> PhiModule<Rat> {
        let ctx = ctx2();
        let mat = Matrix::diagonal(
            ctx,
            alloc::vec![Series::p_power(ctx, 1), Series::p_power(ctx, -1)],
        );
        PhiModule::new(RingTag::Bounded, lift2(), mat).unwrap()
    }

    #[test]
    fn degree_of_diag() {
        assert_eq!(diag_p_pinv().degree().unwrap(), 0);
        assert_eq!(diag_p_pinv().slope().unwrap(), int(0));
    }

    #[test]
    fn degree_of_rank1_twist() {
        for c in [-2i64, 0, 3] {
            let m = twist_module(RingTag::Bounded, &lift2(), c).unwrap();
            assert_eq!(m.degree().unwrap(), c);
        }
    }

    #[test]
    fn standard_module_degree_and_slope() {
        // V_{lambda,2} with lambda = p^3: det = -lambda, degree 3, slope 3/2
        let lam = Series::p_power(ctx2(), 3);
        let m = standard_module(RingTag::Bounded, &lift2(), lam, 2).unwrap();
        assert_eq!(m.degree().unwrap(), 3);
        assert_eq!(m.slope().unwrap(), rat(3, 2));
        // V_{p,2} has slope 1/2
        let m = standard_module(RingTag::Bounded, &lift2(), Series::p_power(ctx2(), 1), 2).unwrap();
        assert_eq!(m.slope().unwrap(), rat(1, 2));
    }

    #[test]
    fn twist_shifts_degree() {
        let m = diag_p_pinv();
        let t = m.twist(1).unwrap();
        assert_eq!(t.degree().unwrap(), m.degree().unwrap() + 1 * 2);
        assert_eq!(t.slope().unwrap(), m.slope().unwrap() + int(1));
        let id = m.twist(0).unwrap();
        assert_eq!(id.degree().unwrap(), m.degree().unwrap());
    }

    #[test]
    fn tensor_slope_additive() {
        let a = twist_module(RingTag::Bounded, &lift2(), 2).unwrap();
        let b = standard_module(RingTag::Bounded, &lift2(), Series::p_power(ctx2(), 1), 2).unwrap();
        let t = a.tensor(&b).unwrap();
        assert_eq!(
            t.slope().unwrap(),
            a.slope().unwrap() + b.slope().unwrap()
        );
    }

    #[test]
    fn dual_negates_degree() {
        let m = standard_module(RingTag::Bounded, &lift2(), Series::p_power(ctx2(), 3), 2).unwrap();
        let d = m.dual().unwrap();
        assert_eq!(d.degree().unwrap(), -m.degree().unwrap());
        assert_eq!(d.slope().unwrap(), -m.slope().unwrap());
    }

    #[test]
    fn top_exterior_is_determinant() {
        let m = diag_p_pinv();
        let e = m.exterior(2).unwrap();
        assert_eq!(e.rank(), 1);
        let det = m.matrix().det().unwrap();
        assert!(e.matrix().at(0, 0).sub(&det).unwrap().is_certified_zero());
    }

    #[test]
    fn pushforward_scales_slope() {
        // rank-1 lambda = p, a = 3 -> multiplier p^3, slope 3
        let m = twist_module(RingTag::Bounded, &lift2(), 1).unwrap();
        let p3 = m.pushforward(3).unwrap();
        assert_eq!(p3.degree().unwrap(), 3);
        // a = 1 is the identity
        let p1 = m.pushforward(1).unwrap();
        assert_eq!(p1.degree().unwrap(), 1);
    }

    #[test]
    fn pullback_divides_slope() {
        // property (6): mu([a]^* M) = mu(M) / a
        let base = lift2();
        let m2 = twist_module(RingTag::Bounded, &base.iterate(2).unwrap(), 3).unwrap();
        let pb = m2.pullback(&base, 2).unwrap();
        assert_eq!(pb.rank(), 2);
        assert_eq!(pb.slope().unwrap(), rat(3, 2));
    }

    #[test]
    fn etale_witness_cases() {
        let ctx = ctx2();
        // integral-invertible F with U = I -> true
        let f = Matrix::diagonal(
            ctx,
            alloc::vec![Series::one(ctx), Series::from_i64_terms(ctx, &[(0, 1, 1), (1, 2, 1)]).unwrap()],
        );
        let m = PhiModule::new(RingTag::Bounded, lift2(), f).unwrap();
        assert!(m.is_etale_witness(&Matrix::identity(ctx, 2)).unwrap());
        // diag(p, p^{-1}) with U = I -> false
        assert!(!diag_p_pinv().is_etale_witness(&Matrix::identity(ctx, 2)).unwrap());
    }

    #[test]
    fn block_triangular_degree_additivity() {
        let ctx = ctx2();
        let mut mat = Matrix::zero(ctx, 2, 2);
        *mat.at_mut(0, 0) = Series::p_power(ctx, 2);
        *mat.at_mut(0, 1) = Series::from_i64_terms(ctx, &[(3, 7, 1)]).unwrap();
        *mat.at_mut(1, 1) = Series::p_power(ctx, -1);
        let m = PhiModule::new(RingTag::Bounded, lift2(), mat).unwrap();
        assert_eq!(m.degree().unwrap(), 2 + (-1));
    }

    #[test]
    fn k_subsets_lex_order() {
        assert_eq!(
            k_subsets(4, 2),
            alloc::vec![
                alloc::vec![0, 1],
                alloc::vec![0, 2],
                alloc::vec![0, 3],
                alloc::vec![1, 2],
                alloc::vec![1, 3],
                alloc::vec![2, 3]
            ]
        );
    }
}
