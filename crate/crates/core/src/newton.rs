//! Newton polygons: lower convex hulls of exact rational point sets, used
//! both for root-valuation polygons of series and for slope polygons of
//! modules.

use crate::coeff::Rat;
use crate::error::{Error, Result};
use alloc::format;
use alloc::vec::Vec;
use num_traits::Zero;

/// The boundary of a lower convex hull: vertices with strictly increasing
/// x and strictly increasing slopes between consecutive vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonPolygon {
    vertices: Vec<(Rat, Rat)>,
}

impl NewtonPolygon {
    /// Lower convex hull by monotone chain; collinear points are merged so
    /// that consecutive slopes are strictly increasing.
    pub fn lower_hull(points: &[(Rat, Rat)]) -> Result<NewtonPolygon> {
        if points.is_empty() {
            return Err(Error::ZeroInput);
        }
        let mut pts: Vec<(Rat, Rat)> = points.to_vec();
        pts.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        // keep only the lowest point for each x
        pts.dedup_by(|a, b| a.0 == b.0);
        let mut hull: Vec<(Rat, Rat)> = Vec::new();
        for pt in pts {
            while hull.len() >= 2 {
                let a = &hull[hull.len() - 2];
                let b = &hull[hull.len() - 1];
                // drop b unless it turns strictly left (convex, collinear merged)
                let cross = (&b.0 - &a.0) * (&pt.1 - &a.1) - (&pt.0 - &a.0) * (&b.1 - &a.1);
                if cross <= Rat::zero() {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(pt);
        }
        Ok(NewtonPolygon { vertices: hull })
    }

    pub fn vertices(&self) -> &[(Rat, Rat)] {
        &self.vertices
    }

    /// Segments as `(slope, width)` pairs, slopes strictly increasing.
    pub fn segments(&self) -> Vec<(Rat, Rat)> {
        self.vertices
            .windows(2)
            .map(|w| {
                let dx = &w[1].0 - &w[0].0;
                let dy = &w[1].1 - &w[0].1;
                (dy / &dx, dx)
            })
            .collect()
    }

    /// Validity check used by tests: strict x-monotonicity and strict
    /// convexity.
    pub fn is_valid(&self) -> bool {
        if self.vertices.is_empty() {
            return false;
        }
        for w in self.vertices.windows(2) {
            if w[0].0 >= w[1].0 {
                return false;
            }
        }
        let segs = self.segments();
        for w in segs.windows(2) {
            if w[0].0 >= w[1].0 {
                return false;
            }
        }
        true
    }
}

/// A multiset of rational slopes with positive multiplicities, sorted
/// strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlopeMultiset {
    entries: Vec<(Rat, u32)>,
}

impl SlopeMultiset {
    pub fn new(mut slopes: Vec<Rat>) -> SlopeMultiset {
        slopes.sort();
        let mut entries: Vec<(Rat, u32)> = Vec::new();
        for s in slopes {
            match entries.last_mut() {
                Some((prev, m)) if *prev == s => *m += 1,
                _ => entries.push((s, 1)),
            }
        }
        SlopeMultiset { entries }
    }

    pub fn entries(&self) -> &[(Rat, u32)] {
        &self.entries
    }

    pub fn total_multiplicity(&self) -> u32 {
        self.entries.iter().map(|(_, m)| m).sum()
    }

    /// Sum of slope times multiplicity (the degree).
    pub fn weighted_sum(&self) -> Rat {
        self.entries
            .iter()
            .fold(Rat::zero(), |acc, (s, m)| acc + s * Rat::from_integer((*m).into()))
    }

    /// Flattened slope list, ascending.
    pub fn slopes(&self) -> Vec<Rat> {
        let mut out = Vec::new();
        for (s, m) in &self.entries {
            for _ in 0..*m {
                out.push(s.clone());
            }
        }
        out
    }
}

/// A slope polygon: starts at `(0, 0)`, vertex at `x = i` has height equal
/// to the sum of the `i` smallest slopes, endpoint `(rank, degree)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HNPolygon {
    rank: u32,
    /// heights at integer abscissae 0..=rank
    heights: Vec<Rat>,
}

impl HNPolygon {
    pub fn from_multiset(ms: &SlopeMultiset) -> HNPolygon {
        let slopes = ms.slopes();
        let mut heights = Vec::with_capacity(slopes.len() + 1);
        let mut acc = Rat::zero();
        heights.push(acc.clone());
        for s in &slopes {
            acc += s;
            heights.push(acc.clone());
        }
        HNPolygon { rank: slopes.len() as u32, heights }
    }

    pub fn rank(&self) -> u32 {
        self.rank
    }

    pub fn height(&self, i: u32) -> &Rat {
        &self.heights[i as usize]
    }

    pub fn endpoint(&self) -> (u32, Rat) {
        (self.rank, self.heights[self.rank as usize].clone())
    }

    /// Vertices `(i, height_i)` at every integer abscissa.
    pub fn points(&self) -> Vec<(Rat, Rat)> {
        self.heights
            .iter()
            .enumerate()
            .map(|(i, h)| (Rat::from_integer((i as i64).into()), h.clone()))
            .collect()
    }

    /// Recover the slope multiset (consecutive height differences).
    pub fn multiset(&self) -> SlopeMultiset {
        let slopes = self
            .heights
            .windows(2)
            .map(|w| &w[1] - &w[0])
            .collect::<Vec<_>>();
        SlopeMultiset::new(slopes)
    }
}

/// Outcome of a pointwise polygon comparison at integer abscissae.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolygonCompare {
    Equal,
    /// First polygon lies above (>= everywhere, equal endpoints).
    FirstAbove,
    /// Second polygon lies above (>= everywhere, equal endpoints).
    SecondAbove,
    Crossing,
}

impl PolygonCompare {
    pub fn as_str(self) -> &'static str {
        match self {
            PolygonCompare::Equal => "equal",
            PolygonCompare::FirstAbove => "above",
            PolygonCompare::SecondAbove => "below",
            PolygonCompare::Crossing => "crossing",
        }
    }
}

/// Pointwise comparison of two polygons of the same rank. "Above" requires
/// `>=` everywhere together with equal endpoints.
pub fn polygon_compare(p1: &HNPolygon, p2: &HNPolygon) -> Result<PolygonCompare> {
    if p1.rank != p2.rank {
        return Err(Error::RankMismatch { left: p1.rank as usize, right: p2.rank as usize });
    }
    let mut any_above = false;
    let mut any_below = false;
    for i in 0..=p1.rank {
        let a = p1.height(i);
        let b = p2.height(i);
        if a > b {
            any_above = true;
        } else if a < b {
            any_below = true;
        }
    }
    let endpoints_equal = p1.height(p1.rank) == p2.height(p2.rank);
    Ok(match (any_above, any_below) {
        (false, false) => PolygonCompare::Equal,
        (true, false) if endpoints_equal => PolygonCompare::FirstAbove,
        (false, true) if endpoints_equal => PolygonCompare::SecondAbove,
        _ => PolygonCompare::Crossing,
    })
}

/// Slope multiset read off a Newton polygon whose segment widths are
/// integers (errors otherwise).
pub fn multiset_from_hull(hull: &NewtonPolygon) -> Result<SlopeMultiset> {
    let mut slopes = Vec::new();
    for (slope, width) in hull.segments() {
        if !width.is_integer() {
            return Err(Error::Internal(format!(
                "non-integer segment width {width} in slope polygon"
            )));
        }
        let w: i64 = width.to_integer().try_into().map_err(|_| {
            Error::Internal(format!("segment width {width} out of range"))
        })?;
        for _ in 0..w {
            slopes.push(slope.clone());
        }
    }
    Ok(SlopeMultiset::new(slopes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{int, rat};

    fn pt(x: i64, y: i64) -> (Rat, Rat) {
        (int(x), int(y))
    }

    #[test]
    fn hull_of_two_plus_t() {
        // f = 2 + T at p = 2: points (0,1), (-1,0); single segment slope 1
        let hull = NewtonPolygon::lower_hull(&[pt(0, 1), pt(-1, 0)]).unwrap();
        assert_eq!(hull.vertices(), &[pt(-1, 0), pt(0, 1)]);
        let segs = hull.segments();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].0, int(1));
        assert!(hull.is_valid());
    }

    #[test]
    fn hull_single_point() {
        let hull = NewtonPolygon::lower_hull(&[pt(-3, 0)]).unwrap();
        assert_eq!(hull.vertices().len(), 1);
        assert!(hull.segments().is_empty());
        assert!(hull.is_valid());
    }

    #[test]
    fn hull_merges_collinear() {
        let hull =
            NewtonPolygon::lower_hull(&[pt(0, 0), pt(1, 1), pt(2, 2), pt(3, 4)]).unwrap();
        assert_eq!(hull.vertices(), &[pt(0, 0), pt(2, 2), pt(3, 4)]);
        assert!(hull.is_valid());
    }

    #[test]
    fn hull_drops_interior_points() {
        let hull = NewtonPolygon::lower_hull(&[pt(0, 0), pt(1, 5), pt(2, 0)]).unwrap();
        assert_eq!(hull.vertices(), &[pt(0, 0), pt(2, 0)]);
    }

    #[test]
    fn multiset_and_polygon() {
        let ms = SlopeMultiset::new(alloc::vec![int(1), int(-1)]);
        assert_eq!(ms.entries(), &[(int(-1), 1), (int(1), 1)]);
        let poly = HNPolygon::from_multiset(&ms);
        assert_eq!(poly.points(), alloc::vec![pt(0, 0), pt(1, -1), pt(2, 0)]);
        assert_eq!(poly.endpoint(), (2, int(0)));
    }

    #[test]
    fn compare_cases() {
        let generic = HNPolygon::from_multiset(&SlopeMultiset::new(alloc::vec![int(-1), int(1)]));
        let special = HNPolygon::from_multiset(&SlopeMultiset::new(alloc::vec![int(0), int(0)]));
        let steep = HNPolygon::from_multiset(&SlopeMultiset::new(alloc::vec![int(-2), int(2)]));
        assert_eq!(polygon_compare(&generic, &generic).unwrap(), PolygonCompare::Equal);
        assert_eq!(polygon_compare(&special, &generic).unwrap(), PolygonCompare::FirstAbove);
        assert_eq!(polygon_compare(&steep, &generic).unwrap(), PolygonCompare::SecondAbove);
        // genuine crossing with equal endpoints needs rank 3:
        // heights (0,-2,-1,0) vs (0,-1,-2,0)
        let crossing_a =
            HNPolygon::from_multiset(&SlopeMultiset::new(alloc::vec![int(-2), int(1), int(1)]));
        let crossing_b =
            HNPolygon::from_multiset(&SlopeMultiset::new(alloc::vec![int(-1), int(-1), int(2)]));
        assert_eq!(polygon_compare(&crossing_a, &crossing_b).unwrap(), PolygonCompare::Crossing);
        // a half-slope polygon dominates {0,1} pointwise with equal endpoints
        let halves = HNPolygon::from_multiset(&SlopeMultiset::new(alloc::vec![rat(1, 2), rat(1, 2)]));
        let zero_one = HNPolygon::from_multiset(&SlopeMultiset::new(alloc::vec![int(0), int(1)]));
        assert_eq!(polygon_compare(&zero_one, &halves).unwrap(), PolygonCompare::SecondAbove);
        let rank1 = HNPolygon::from_multiset(&SlopeMultiset::new(alloc::vec![int(0)]));
        assert!(matches!(
            polygon_compare(&rank1, &generic),
            Err(Error::RankMismatch { .. })
        ));
    }
}
