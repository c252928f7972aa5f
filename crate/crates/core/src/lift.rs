//! Lifting boundary maps to the interior.
//!
//! The graph sits inside `Q_n x Q_n x R` through the coordinatization `pi`
//! (collapse to shadows at integer height) and its zero-tail section
//! `pi_bar`. A pair of boundary maps then lifts to a vertex map
//! `psi = pi . (phi_l x phi_u x Id) . pi_bar`, whose preimage counts are
//! audited against the measure-linear constants. The module also carries
//! the k-to-1 `up` map onto the `kZ` sublattice and the base-`n^k`
//! digit-grouping embedding that identifies the sublattice with the
//! coarser graph.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::{One, ToPrimitive, Zero};

use crate::boundary::{BoundaryPoint, CloneBall};
use crate::dlgraph::{Ambient, DLBox, DLVertex, GraphError, DEFAULT_BUDGET};
use crate::qmaps::{MapError, PiecewiseMap};
use crate::ratio::{ceil_log_n, pow_n};
use crate::Rational;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LiftError {
    #[error("mixed branching parameters")]
    MixedParameters,
    #[error("points sit at different heights; use the graph metric for cross-level distances")]
    UnequalHeights,
    #[error("the same-level formula needs an integer height")]
    NonIntegerLevel,
    #[error("vertex {vertex} has shadow {clone} outside a map domain")]
    Coverage { vertex: usize, clone: String },
    #[error("clone measures multiply to {product} <= 1; the box would be empty")]
    Hypothesis { product: String },
    #[error("level {level} is not on the index-{k} sublattice")]
    OffSublattice { level: i64, k: u32 },
    #[error("target band top {top} leaves no headroom for the index-{k} raise")]
    Headroom { top: i64, k: u32 },
    #[error("branching parameter {n}^{k} overflows")]
    Parameter { n: u32, k: u32 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// A point of `Q_n x Q_n x R`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolPoint {
    x: BoundaryPoint,
    y: BoundaryPoint,
    t: Rational,
}

impl SolPoint {
    pub fn new(x: BoundaryPoint, y: BoundaryPoint, t: Rational) -> Result<Self, LiftError> {
        if x.n() != y.n() {
            return Err(LiftError::MixedParameters);
        }
        Ok(SolPoint { x, y, t })
    }

    pub fn n(&self) -> u32 {
        self.x.n()
    }

    pub fn x(&self) -> &BoundaryPoint {
        &self.x
    }

    pub fn y(&self) -> &BoundaryPoint {
        &self.y
    }

    pub fn t(&self) -> &Rational {
        &self.t
    }
}

/// Collapse to the vertex at height `floor(t)`: the pair of shadows of the
/// two coordinates. Constant on cells of diameter `n^floor(t)`.
pub fn pi(p: &SolPoint) -> DLVertex {
    let ft = p.t.floor().to_integer().to_i64().expect("height fits in i64");
    let x = CloneBall::shadow(&p.x, ft);
    let y = CloneBall::shadow(&p.y, -ft);
    DLVertex::new(x, y).expect("shadow heights sum to zero")
}

/// Zero-tail section of `pi`: extend both shadows by zeros at integer
/// height. Satisfies `pi(pi_bar(v)) == v`.
pub fn pi_bar(v: &DLVertex) -> SolPoint {
    SolPoint {
        x: v.lower_shadow().zero_tail_point(),
        y: v.upper_shadow().zero_tail_point(),
        t: Rational::from_integer(v.t().into()),
    }
}

/// `n^-t d(x, x') + n^t d(y, y')` for two points at the same integer
/// height.
pub fn sol_distance_same_level(p: &SolPoint, q: &SolPoint) -> Result<Rational, LiftError> {
    if p.n() != q.n() {
        return Err(LiftError::MixedParameters);
    }
    if p.t != q.t {
        return Err(LiftError::UnequalHeights);
    }
    if !p.t.is_integer() {
        return Err(LiftError::NonIntegerLevel);
    }
    let t = p.t.to_integer().to_i64().expect("height fits in i64");
    let n = p.n();
    let dx = crate::boundary::qn_distance(&p.x, &q.x).expect("same n");
    let dy = crate::boundary::qn_distance(&p.y, &q.y).expect("same n");
    Ok(pow_n(n, -t) * dx + pow_n(n, t) * dy)
}

/// How a [`VertexMap`] was produced; audits read the measure-linear
/// constants from here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// Lifted from a pair of boundary maps. The constants are present iff
    /// the respective map is measure linear with a single global constant.
    Psi {
        lambda_l: Option<Rational>,
        lambda_u: Option<Rational>,
    },
    /// The raise onto the index-`k` height sublattice.
    Up { k: u32 },
    /// `up` followed by the inverse embedding, in base-`n^k` coordinates.
    Factored { k: u32 },
    Raw,
}

/// A tabulated map from the vertices of one box into the graph. The
/// target box is recorded when a single box of the same band contains
/// every image; otherwise images are kept as raw vertices and membership
/// is resolved at audit time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexMap {
    source: DLBox,
    target: Option<DLBox>,
    entries: BTreeMap<usize, DLVertex>,
    provenance: Provenance,
}

impl VertexMap {
    /// Tabulate an arbitrary per-vertex rule over a box.
    pub fn tabulate(
        source: &DLBox,
        mut rule: impl FnMut(usize, &DLVertex) -> DLVertex,
        provenance: Provenance,
    ) -> VertexMap {
        let mut entries = BTreeMap::new();
        for id in source.all_ids() {
            let v = source.vertex(id);
            entries.insert(id, rule(id, &v));
        }
        let target = covering_box(entries.values(), source);
        VertexMap { source: source.clone(), target, entries, provenance }
    }

    pub fn source(&self) -> &DLBox {
        &self.source
    }

    pub fn target(&self) -> Option<&DLBox> {
        self.target.as_ref()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, &DLVertex)> {
        self.entries.iter().map(|(&id, v)| (id, v))
    }

    pub fn image_of(&self, id: usize) -> Option<&DLVertex> {
        self.entries.get(&id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn global_constant(m: &PiecewiseMap) -> Option<Rational> {
    m.measure_linear_report().global
}

/// Lift a pair of boundary maps to the box: each vertex goes through the
/// zero-tail section, the two coordinate maps, and back through `pi`. The
/// level is unchanged.
pub fn build_psi(
    phi_l: &PiecewiseMap,
    phi_u: &PiecewiseMap,
    source: &DLBox,
) -> Result<VertexMap, LiftError> {
    let mut entries = BTreeMap::new();
    for id in source.all_ids() {
        let v = source.vertex(id);
        let p = pi_bar(&v);
        let fx = phi_l.apply(p.x()).map_err(|_| LiftError::Coverage {
            vertex: id,
            clone: format!("{}", v.lower_shadow()),
        })?;
        let fy = phi_u.apply(p.y()).map_err(|_| LiftError::Coverage {
            vertex: id,
            clone: format!("{}", v.upper_shadow()),
        })?;
        let image = pi(&SolPoint::new(fx, fy, p.t().clone())?);
        entries.insert(id, image);
    }
    let target = covering_box(entries.values(), source);
    Ok(VertexMap {
        source: source.clone(),
        target,
        entries,
        provenance: Provenance::Psi {
            lambda_l: global_constant(phi_l),
            lambda_u: global_constant(phi_u),
        },
    })
}

/// The smallest box of the source's band containing every image, when the
/// image hulls land exactly at the anchor heights.
fn covering_box<'a>(
    images: impl Iterator<Item = &'a DLVertex>,
    source: &DLBox,
) -> Option<DLBox> {
    let mut xhull: Option<CloneBall> = None;
    let mut yhull: Option<CloneBall> = None;
    for v in images {
        for (hull, clone) in [(&mut xhull, v.lower_shadow()), (&mut yhull, v.upper_shadow())] {
            *hull = Some(match hull.take() {
                None => clone.clone(),
                Some(h) => crate::qmaps::clone_hull([&h, clone].into_iter()),
            });
        }
    }
    let (xhull, yhull) = (xhull?, yhull?);
    if xhull.height() != source.top_level() || yhull.height() != -source.base_level() {
        return None;
    }
    DLBox::build_anchored(xhull, yhull, DEFAULT_BUDGET).ok()
}

/// The box spanned by a pair of clones: anchors `C_l` (lower) and `C_u`
/// (upper), band `[-log_n mu(C_u), log_n mu(C_l)]`, with
/// `mu(C_l) mu(C_u)` vertices on every level. Requires the measure
/// product to exceed 1.
pub fn clone_box(c_l: &CloneBall, c_u: &CloneBall, budget: u128) -> Result<DLBox, LiftError> {
    if c_l.n() != c_u.n() {
        return Err(LiftError::MixedParameters);
    }
    let product = c_l.measure() * c_u.measure();
    if product <= Rational::one() {
        return Err(LiftError::Hypothesis { product: format!("{product}") });
    }
    Ok(DLBox::build_anchored(c_l.clone(), c_u.clone(), budget)?)
}

/// Raise a vertex to the nearest height in `kZ` at or above it. The
/// digits of the first-tree coordinate below the new height transfer onto
/// the second-tree choice path, so each level maps bijectively onto the
/// `kZ` level above it and interior fibers have exactly `k` elements.
pub fn up_map(v: &DLVertex, k: u32) -> DLVertex {
    debug_assert!(k >= 1);
    let t = v.t();
    let rise = (-t).rem_euclid(k as i64);
    if rise == 0 {
        return v.clone();
    }
    let mut x = v.lower_shadow().clone();
    let mut ydigits: Vec<(i64, u32)> = v.upper_shadow().prefix_support().collect();
    for m in 0..rise {
        ydigits.push((-t - 1 - m, x.prefix_digit(t + m)));
    }
    for _ in 0..rise {
        x = x.parent();
    }
    let y = CloneBall::new(v.n(), -t - rise, ydigits).expect("digits below n");
    DLVertex::new(x, y).expect("heights sum to zero")
}

fn coarse_n(n: u32, k: u32) -> Result<u32, LiftError> {
    n.checked_pow(k).ok_or(LiftError::Parameter { n, k })
}

/// Identify a vertex of the `n^k`-branching graph with a vertex on the
/// `kZ` levels of the `n`-branching graph: every base-`n^k` digit at
/// index `i` expands into base-`n` digits at indices `ki..ki+k`.
pub fn embed(v: &DLVertex, n: u32, k: u32) -> Result<DLVertex, LiftError> {
    let big = coarse_n(n, k)?;
    if v.n() != big {
        return Err(LiftError::MixedParameters);
    }
    let expand = |c: &CloneBall| {
        let mut digits = Vec::new();
        for (i, d) in c.prefix_support() {
            let mut rem = d;
            for m in 0..k as i64 {
                digits.push((k as i64 * i + m, rem % n));
                rem /= n;
            }
        }
        CloneBall::new(n, k as i64 * c.height(), digits).expect("digits below n")
    };
    let x = expand(v.lower_shadow());
    let y = expand(v.upper_shadow());
    Ok(DLVertex::new(x, y).expect("heights sum to zero"))
}

/// Inverse of [`embed`]: group base-`n` digits in blocks of `k`. Defined
/// exactly on the `kZ` levels.
pub fn embed_inv(v: &DLVertex, k: u32) -> Result<DLVertex, LiftError> {
    let n = v.n();
    let big = coarse_n(n, k)?;
    if v.t().rem_euclid(k as i64) != 0 {
        return Err(LiftError::OffSublattice { level: v.t(), k });
    }
    let group = |c: &CloneBall| {
        let height = c.height() / k as i64;
        let mut blocks: BTreeMap<i64, u32> = BTreeMap::new();
        for (i, d) in c.prefix_support() {
            let block = i.div_euclid(k as i64);
            let m = i.rem_euclid(k as i64) as u32;
            *blocks.entry(block).or_insert(0) += d * n.pow(m);
        }
        CloneBall::new(big, height, blocks).expect("digits below n^k")
    };
    let x = group(v.lower_shadow());
    let y = group(v.upper_shadow());
    Ok(DLVertex::new(x, y).expect("heights sum to zero"))
}

/// Post-compose a vertex map with `up` and the inverse embedding, landing
/// in the `n^k`-branching model. Each image moves fewer than `k` levels,
/// so the composite with [`embed`] stays at bounded distance from the
/// original map.
pub fn factor_through_sublattice(f: &VertexMap, k: u32) -> Result<VertexMap, LiftError> {
    if k == 1 {
        return Ok(f.clone());
    }
    if let Some(tb) = f.target() {
        if tb.top_level().rem_euclid(k as i64) != 0 {
            return Err(LiftError::Headroom { top: tb.top_level(), k });
        }
    }
    let mut entries = BTreeMap::new();
    for (id, w) in f.entries() {
        let raised = up_map(w, k);
        debug_assert!(raised.t() - w.t() < k as i64);
        entries.insert(id, embed_inv(&raised, k)?);
    }
    Ok(VertexMap {
        source: f.source.clone(),
        target: None,
        entries,
        provenance: Provenance::Factored { k },
    })
}

/// One level of a preimage audit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRow {
    pub t: i64,
    pub sum_counts: u64,
    /// `|level| / (lambda_l lambda_u)` when the constants are known.
    pub expected_center: Option<Rational>,
    pub lower_bound: Option<Rational>,
    pub upper_bound: Option<Rational>,
    pub in_sandwich: Option<bool>,
    /// Whether the level is at least `r` away from both band ends.
    pub interior: bool,
}

/// Preimage counts of a vertex map over a target box, checked against the
/// measure-linear sandwich when the map's constants are known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreimageAudit {
    /// `|m^{-1}(x)|` indexed by target box id.
    pub counts: Vec<u64>,
    pub rows: Vec<AuditRow>,
    /// Total preimages landing in the target box.
    pub total: u64,
    /// Number of tabulated source vertices.
    pub source_size: u64,
    /// Bilipschitz constant supplied by the caller.
    pub k_used: Rational,
    /// `log_n K`, rounded up: the excluded boundary depth.
    pub r: u32,
    /// `|boundary_r|` of the target box in its band.
    pub boundary_size: u64,
    pub lambda_product: Option<Rational>,
    pub global_lower: Option<Rational>,
    pub global_upper: Option<Rational>,
    pub in_sandwich: Option<bool>,
}

/// Count preimages of `m` over `target` and, when the map carries
/// measure-linear constants, check the sandwich
/// `|S|/(l_l l_u) - |b_r S| <= total <= |S|/(l_l l_u) + K^2 |b_r S|`
/// globally and per level.
pub fn preimage_audit(m: &VertexMap, target: &DLBox, k_used: &Rational) -> PreimageAudit {
    let n = target.n();
    let r = ceil_log_n(k_used, n).max(0) as u32;
    let mut counts = alloc::vec![0u64; target.vertex_count()];
    for (_, w) in m.entries() {
        if let Some(i) = target.index_of(w) {
            counts[i] += 1;
        }
    }
    let lambda_product = match m.provenance() {
        Provenance::Psi { lambda_l: Some(l), lambda_u: Some(u) } => Some(l * u),
        Provenance::Psi { .. } | Provenance::Raw | Provenance::Factored { .. } => None,
        Provenance::Up { .. } => None,
    };
    let boundary = target.r_boundary(&target.all_ids(), r, Ambient::Band);
    let mut boundary_per_level: BTreeMap<i64, u64> = BTreeMap::new();
    for v in &boundary {
        *boundary_per_level.entry(v.t()).or_insert(0) += 1;
    }
    let boundary_size = boundary.len() as u64;
    let ksq = k_used * k_used;
    let per_level = target.level_count() as u64;
    let mut rows = Vec::new();
    let mut total = 0u64;
    for t in target.levels() {
        let level_index = (t - target.base_level()) as usize;
        let lo = level_index * target.level_count();
        let sum: u64 = counts[lo..lo + target.level_count()].iter().sum();
        total += sum;
        let interior =
            t - target.base_level() >= r as i64 && target.top_level() - t >= r as i64;
        let b_t = Rational::from_integer((*boundary_per_level.get(&t).unwrap_or(&0)).into());
        let (center, lower, upper, ok) = match &lambda_product {
            Some(lp) => {
                let center = Rational::from_integer(per_level.into()) / lp;
                let lower = (&center - &b_t).max(Rational::zero());
                let upper = &center + &ksq * &b_t;
                let s = Rational::from_integer(sum.into());
                let ok = lower <= s && s <= upper;
                (Some(center), Some(lower), Some(upper), Some(ok))
            }
            None => (None, None, None, None),
        };
        rows.push(AuditRow {
            t,
            sum_counts: sum,
            expected_center: center,
            lower_bound: lower,
            upper_bound: upper,
            in_sandwich: ok,
            interior,
        });
    }
    let (global_lower, global_upper, in_sandwich) = match &lambda_product {
        Some(lp) => {
            let b = Rational::from_integer(boundary_size.into());
            let center = Rational::from_integer((target.vertex_count() as u64).into()) / lp;
            let lower = (&center - &b).max(Rational::zero());
            let upper = &center + &ksq * &b;
            let s = Rational::from_integer(total.into());
            let ok = lower <= s && s <= upper;
            (Some(lower), Some(upper), Some(ok))
        }
        None => (None, None, None),
    };
    PreimageAudit {
        counts,
        rows,
        total,
        source_size: m.len() as u64,
        k_used: k_used.clone(),
        r,
        boundary_size,
        lambda_product,
        global_lower,
        global_upper,
        in_sandwich,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmaps::Similarity;

    fn sol(x: BoundaryPoint, y: BoundaryPoint, t: i64) -> SolPoint {
        SolPoint::new(x, y, Rational::from_integer(t.into())).unwrap()
    }

    #[test]
    fn pi_sends_origin_to_base_vertex() {
        let b = DLBox::build(2, 3, 0, DEFAULT_BUDGET).unwrap();
        let p = sol(BoundaryPoint::zero(2), BoundaryPoint::zero(2), 0);
        assert_eq!(pi(&p), b.base_vertex());
    }

    #[test]
    fn pi_floors_the_height() {
        let x = BoundaryPoint::from_digits(3, [(2, 1)]).unwrap();
        let y = BoundaryPoint::zero(3);
        let at_one = sol(x.clone(), y.clone(), 1);
        let between = SolPoint::new(x, y, Rational::new(3.into(), 2.into())).unwrap();
        assert_eq!(pi(&at_one), pi(&between));
    }

    #[test]
    fn pi_collapses_cells() {
        // moving x within its height-t shadow does not change the vertex
        let x = BoundaryPoint::from_digits(2, [(4, 1)]).unwrap();
        let mut x2 = x.clone();
        x2.set_digit(-3, 1).unwrap();
        let y = BoundaryPoint::zero(2);
        assert_eq!(pi(&sol(x, y.clone(), 2)), pi(&sol(x2, y, 2)));
    }

    #[test]
    fn section_round_trip_is_identity() {
        for (h, a) in [(3i64, 0i64), (4, -2)] {
            let b = DLBox::build(2, h, a, DEFAULT_BUDGET).unwrap();
            for id in b.all_ids() {
                let v = b.vertex(id);
                assert_eq!(pi(&pi_bar(&v)), v);
            }
        }
    }

    #[test]
    fn shadow_duality() {
        let b = DLBox::build(3, 3, -1, DEFAULT_BUDGET).unwrap();
        for id in b.all_ids() {
            let v = b.vertex(id);
            let product = v.lower_shadow().measure() * v.upper_shadow().measure();
            assert_eq!(product, Rational::one());
        }
    }

    #[test]
    fn same_level_distance_formula() {
        let p = sol(BoundaryPoint::zero(2), BoundaryPoint::zero(2), 0);
        assert_eq!(sol_distance_same_level(&p, &p).unwrap(), Rational::zero());
        // x and x' at distance 1 (top differing index -1), same y
        let x2 = BoundaryPoint::from_digits(2, [(-1, 1)]).unwrap();
        let q = sol(x2, BoundaryPoint::zero(2), 0);
        assert_eq!(sol_distance_same_level(&p, &q).unwrap(), Rational::one());
        let shifted = sol(BoundaryPoint::zero(2), BoundaryPoint::zero(2), 1);
        assert_eq!(
            sol_distance_same_level(&p, &shifted),
            Err(LiftError::UnequalHeights)
        );
    }

    #[test]
    fn psi_of_identities_is_identity() {
        let b = DLBox::build(2, 3, -1, DEFAULT_BUDGET).unwrap();
        let id_l = PiecewiseMap::identity(CloneBall::zero(2, b.top_level()));
        let id_u = PiecewiseMap::identity(CloneBall::zero(2, -b.base_level()));
        let psi = build_psi(&id_l, &id_u, &b).unwrap();
        assert_eq!(psi.len(), b.vertex_count());
        for (id, w) in psi.entries() {
            assert_eq!(*w, b.vertex(id));
        }
        assert_eq!(psi.target(), Some(&b));
    }

    #[test]
    fn psi_shifts_clone_structure_by_the_map_shift() {
        // lower map: global similarity of factor n on the anchor window
        let b = DLBox::build(2, 4, -4, DEFAULT_BUDGET).unwrap();
        let window = CloneBall::zero(2, 0);
        let phi_l = PiecewiseMap::new([
            Similarity::new(window.clone(), CloneBall::zero(2, 1)).unwrap(),
        ])
        .unwrap();
        let phi_u = PiecewiseMap::identity(CloneBall::zero(2, 4));
        let psi = build_psi(&phi_l, &phi_u, &b).unwrap();
        for (id, w) in psi.entries() {
            let v = b.vertex(id);
            assert_eq!(w.t(), v.t());
            // the image lower clone is the height-t shadow of the shifted point
            let fx = phi_l.apply(&v.lower_shadow().zero_tail_point()).unwrap();
            assert_eq!(*w.lower_shadow(), CloneBall::shadow(&fx, v.t()));
        }
    }

    #[test]
    fn psi_reports_uncovered_shadows() {
        let b = DLBox::build(2, 2, 0, DEFAULT_BUDGET).unwrap();
        // lower domain misses half the anchor window
        let phi_l = PiecewiseMap::identity(CloneBall::zero(2, 2).child(0));
        let phi_u = PiecewiseMap::identity(CloneBall::zero(2, 0));
        assert!(matches!(
            build_psi(&phi_l, &phi_u, &b),
            Err(LiftError::Coverage { .. })
        ));
    }

    #[test]
    fn clone_box_dimensions() {
        // mu = 9 and 1/3: band of height 1 with 3 vertices per level
        let b = clone_box(&CloneBall::zero(3, 2), &CloneBall::zero(3, -1), DEFAULT_BUDGET)
            .unwrap();
        assert_eq!(b.height(), 1);
        assert_eq!(b.level_count(), 3);
        // mu = 2 and 2: height 2, 4 per level
        let b = clone_box(&CloneBall::zero(2, 1), &CloneBall::zero(2, 1), DEFAULT_BUDGET)
            .unwrap();
        assert_eq!(b.height(), 2);
        assert_eq!(b.level_count(), 4);
        // product 1 rejected
        assert!(matches!(
            clone_box(&CloneBall::zero(2, 1), &CloneBall::zero(2, -1), DEFAULT_BUDGET),
            Err(LiftError::Hypothesis { .. })
        ));
    }

    #[test]
    fn up_fixes_sublattice_levels() {
        let b = DLBox::build(3, 6, 0, DEFAULT_BUDGET).unwrap();
        for id in b.all_ids() {
            let v = b.vertex(id);
            if v.t() % 2 == 0 {
                assert_eq!(up_map(&v, 2), v);
            }
        }
    }

    #[test]
    fn up_interior_fibers_have_size_k() {
        for (n, k, h) in [(3u32, 2u32, 6i64), (2, 3, 9)] {
            let b = DLBox::build(n, h, 0, DEFAULT_BUDGET).unwrap();
            let mut fiber: BTreeMap<usize, u64> = BTreeMap::new();
            for id in b.all_ids() {
                let w = up_map(&b.vertex(id), k);
                if let Some(wid) = b.index_of(&w) {
                    *fiber.entry(wid).or_insert(0) += 1;
                }
            }
            let total: u64 = fiber.values().sum();
            assert_eq!(total, b.vertex_count() as u64);
            for t in b.levels() {
                // interior: k - 1 full levels available below
                if t.rem_euclid(k as i64) != 0 || t - (k as i64 - 1) < b.base_level() {
                    continue;
                }
                for xi in 0..b.level_count() {
                    let id = (t - b.base_level()) as usize * b.level_count() + xi;
                    assert_eq!(fiber.get(&id).copied().unwrap_or(0), k as u64);
                }
            }
        }
    }

    #[test]
    fn up_displacement_below_k() {
        let b = DLBox::build(2, 6, -3, DEFAULT_BUDGET).unwrap();
        for id in b.all_ids() {
            let v = b.vertex(id);
            let w = up_map(&v, 3);
            assert!(w.t() - v.t() < 3);
            assert!(w.t() >= v.t());
        }
    }

    #[test]
    fn embed_round_trips_and_fills_sublattice_levels() {
        let coarse = DLBox::build(4, 2, 0, DEFAULT_BUDGET).unwrap();
        let fine = DLBox::build(2, 4, 0, DEFAULT_BUDGET).unwrap();
        let mut seen = alloc::vec![false; fine.vertex_count()];
        for id in coarse.all_ids() {
            let v = coarse.vertex(id);
            let w = embed(&v, 2, 2).unwrap();
            assert_eq!(w.t(), 2 * v.t());
            assert_eq!(embed_inv(&w, 2).unwrap(), v);
            let wid = fine.index_of(&w).unwrap();
            assert!(!seen[wid], "embedding must be injective");
            seen[wid] = true;
        }
        // exactly the even levels are covered
        let covered = seen.iter().filter(|&&s| s).count();
        assert_eq!(covered, 3 * fine.level_count());
    }

    #[test]
    fn factoring_identity_is_up_in_coarse_coordinates() {
        let b = DLBox::build(2, 4, 0, DEFAULT_BUDGET).unwrap();
        let id_l = PiecewiseMap::identity(CloneBall::zero(2, 4));
        let id_u = PiecewiseMap::identity(CloneBall::zero(2, 0));
        let ident = build_psi(&id_l, &id_u, &b).unwrap();
        let factored = factor_through_sublattice(&ident, 2).unwrap();
        for (id, w) in factored.entries() {
            let v = b.vertex(id);
            assert_eq!(embed_inv(&up_map(&v, 2), 2).unwrap(), *w);
        }
        // k = 1 leaves the map untouched
        assert_eq!(&factor_through_sublattice(&ident, 1).unwrap(), &ident);
    }

    #[test]
    fn identity_audit_has_unit_counts() {
        let b = DLBox::build(2, 3, 0, DEFAULT_BUDGET).unwrap();
        let id_l = PiecewiseMap::identity(CloneBall::zero(2, 3));
        let id_u = PiecewiseMap::identity(CloneBall::zero(2, 0));
        let psi = build_psi(&id_l, &id_u, &b).unwrap();
        let audit = preimage_audit(&psi, &b, &Rational::one());
        assert!(audit.counts.iter().all(|&c| c == 1));
        assert_eq!(audit.total, b.vertex_count() as u64);
        assert_eq!(audit.in_sandwich, Some(true));
        assert!(audit.rows.iter().all(|r| r.in_sandwich == Some(true)));
    }

    #[test]
    fn doubling_lift_satisfies_the_sandwich() {
        // lambda_l = 2, lambda_u = 1 over an H = 8 band
        let b = DLBox::build(2, 8, -8, DEFAULT_BUDGET).unwrap();
        let phi_l = PiecewiseMap::new([
            Similarity::new(CloneBall::zero(2, 0), CloneBall::zero(2, 1)).unwrap(),
        ])
        .unwrap();
        let phi_u = PiecewiseMap::identity(CloneBall::zero(2, 8));
        let psi = build_psi(&phi_l, &phi_u, &b).unwrap();
        let audit = preimage_audit(&psi, &b, &Rational::from_integer(2.into()));
        assert_eq!(audit.lambda_product, Some(Rational::from_integer(2.into())));
        assert_eq!(audit.in_sandwich, Some(true));
        assert_eq!(audit.r, 1);
    }

    #[test]
    fn measure_preserving_lift_centers_at_box_size() {
        // lambda_l = 2, lambda_u = 1/2: product 1
        let b = DLBox::build(2, 8, -8, DEFAULT_BUDGET).unwrap();
        let phi_l = PiecewiseMap::new([
            Similarity::new(CloneBall::zero(2, 0), CloneBall::zero(2, 1)).unwrap(),
        ])
        .unwrap();
        let phi_u = PiecewiseMap::new([
            Similarity::new(CloneBall::zero(2, 8), CloneBall::zero(2, 7)).unwrap(),
        ])
        .unwrap();
        let psi = build_psi(&phi_l, &phi_u, &b).unwrap();
        let audit = preimage_audit(&psi, &b, &Rational::from_integer(2.into()));
        assert_eq!(audit.lambda_product, Some(Rational::one()));
        assert_eq!(audit.in_sandwich, Some(true));
    }
}
