//! Piecewise clone-similarity self-maps of boundary windows.
//!
//! A *similarity* maps one clone onto another by prefix replacement and an
//! index shift; it scales every distance by the exact factor
//! `n^(target height - source height)`. A [`PiecewiseMap`] glues finitely
//! many similarities with pairwise-disjoint sources and targets. This class
//! is closed under inversion, composition and zoom conjugation, and every
//! measure-linear constant it can realize is a product of primes dividing
//! `n` -- which is exactly what the prime-support check certifies.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_traits::{One, Zero};

use crate::boundary::{BoundaryPoint, CloneBall, CloneRelation, CloneSet};
use crate::ratio::{pow_n, prime_support};
use crate::rng::Stream;
use crate::Rational;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MapError {
    #[error("point {0} is outside the map domain")]
    Domain(String),
    #[error("mixed branching parameters")]
    MixedParameters,
    #[error("piece sources overlap")]
    OverlappingSources,
    #[error("piece targets overlap")]
    OverlappingTargets,
    #[error("range/domain mismatch in composition: range measure {range}, domain measure {domain}")]
    Composition { range: String, domain: String },
    #[error("map has no pieces")]
    Empty,
    #[error("zoom window does not stabilize within {0} levels")]
    ZoomDiverged(u32),
    #[error("malformed map description: {0}")]
    Description(String),
}

fn point_label(x: &BoundaryPoint) -> String {
    let mut s = format!("{}:", x.n());
    for (i, d) in x.support() {
        s.push_str(&format!("({i},{d})"));
    }
    s
}

/// A clone-to-clone similarity: prefix replacement plus index shift.
/// Scales all distances and measures by `n^(shift)` exactly.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Similarity {
    source: CloneBall,
    target: CloneBall,
}

impl Similarity {
    pub fn new(source: CloneBall, target: CloneBall) -> Result<Self, MapError> {
        if source.n() != target.n() {
            return Err(MapError::MixedParameters);
        }
        Ok(Similarity { source, target })
    }

    pub fn identity(window: CloneBall) -> Self {
        Similarity { source: window.clone(), target: window }
    }

    pub fn n(&self) -> u32 {
        self.source.n()
    }

    pub fn source(&self) -> &CloneBall {
        &self.source
    }

    pub fn target(&self) -> &CloneBall {
        &self.target
    }

    /// Height shift; the scaling factor is `n^shift`.
    pub fn shift(&self) -> i64 {
        self.target.height() - self.source.height()
    }

    pub fn scale(&self) -> Rational {
        pow_n(self.n(), self.shift())
    }

    pub fn invert(&self) -> Similarity {
        Similarity { source: self.target.clone(), target: self.source.clone() }
    }

    pub fn apply_point(&self, x: &BoundaryPoint) -> Result<BoundaryPoint, MapError> {
        if !self.source.contains_point(x) {
            return Err(MapError::Domain(point_label(x)));
        }
        let shift = self.shift();
        let mut digits: Vec<(i64, u32)> = self.target.prefix_support().collect();
        for (i, d) in x.support() {
            if i < self.source.height() {
                digits.push((i + shift, d));
            }
        }
        Ok(BoundaryPoint::from_digits(x.n(), digits).expect("digits below n"))
    }

    /// Image of a subclone of the source.
    pub fn apply_clone(&self, c: &CloneBall) -> Result<CloneBall, MapError> {
        if !matches!(
            self.source.relation(c),
            CloneRelation::Contains | CloneRelation::Equal
        ) {
            return Err(MapError::Domain(point_label(&c.zero_tail_point())));
        }
        let shift = self.shift();
        let mut digits: Vec<(i64, u32)> = self.target.prefix_support().collect();
        for (i, d) in c.prefix_support() {
            if i < self.source.height() {
                digits.push((i + shift, d));
            }
        }
        Ok(CloneBall::new(c.n(), c.height() + shift, digits).expect("digits below n"))
    }

    /// Preimage of a subclone of the target.
    pub fn preimage_clone(&self, c: &CloneBall) -> Result<CloneBall, MapError> {
        self.invert().apply_clone(c)
    }
}

/// A bilipschitz self-map of a boundary window given by finitely many
/// clone-to-clone similarities with pairwise-disjoint sources and targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PiecewiseMap {
    n: u32,
    /// Sorted by source clone for canonical order.
    pieces: Vec<Similarity>,
}

/// Measure-linear analysis of a piecewise map.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasureLinearReport {
    /// Present iff every piece scales measure by the same constant.
    pub global: Option<Rational>,
    /// `mu(range) / mu(domain)`: the candidate measure-linear constant of
    /// the whole window.
    pub window_ratio: Rational,
    /// Per-piece constants, in canonical piece order.
    pub per_piece: Vec<Rational>,
    /// A clone on which the map is measure linear (any piece source).
    pub witness_clone: CloneBall,
    /// Primes dividing the numerator or denominator of the constant
    /// (of `global` when present, of `window_ratio` otherwise).
    pub prime_support: Vec<u64>,
}

impl PiecewiseMap {
    pub fn new(pieces: impl IntoIterator<Item = Similarity>) -> Result<Self, MapError> {
        let mut pieces: Vec<Similarity> = pieces.into_iter().collect();
        let n = pieces.first().ok_or(MapError::Empty)?.n();
        if pieces.iter().any(|p| p.n() != n) {
            return Err(MapError::MixedParameters);
        }
        for (i, a) in pieces.iter().enumerate() {
            for b in &pieces[i + 1..] {
                if a.source.relation(&b.source) != CloneRelation::Disjoint {
                    return Err(MapError::OverlappingSources);
                }
                if a.target.relation(&b.target) != CloneRelation::Disjoint {
                    return Err(MapError::OverlappingTargets);
                }
            }
        }
        pieces.sort();
        Ok(PiecewiseMap { n, pieces })
    }

    pub fn identity(window: CloneBall) -> Self {
        PiecewiseMap { n: window.n(), pieces: alloc::vec![Similarity::identity(window)] }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn pieces(&self) -> &[Similarity] {
        &self.pieces
    }

    /// The canonical clone set of piece sources.
    pub fn domain(&self) -> CloneSet {
        CloneSet::new(self.pieces.iter().map(|p| p.source.clone()))
            .expect("piece sources are pairwise disjoint")
    }

    /// The canonical clone set of piece targets.
    pub fn range(&self) -> CloneSet {
        CloneSet::new(self.pieces.iter().map(|p| p.target.clone()))
            .expect("piece targets are pairwise disjoint")
    }

    pub fn piece_for(&self, x: &BoundaryPoint) -> Option<&Similarity> {
        self.pieces.iter().find(|p| p.source.contains_point(x))
    }

    pub fn apply(&self, x: &BoundaryPoint) -> Result<BoundaryPoint, MapError> {
        self.piece_for(x)
            .ok_or_else(|| MapError::Domain(point_label(x)))?
            .apply_point(x)
    }

    pub fn invert(&self) -> PiecewiseMap {
        let mut pieces: Vec<Similarity> = self.pieces.iter().map(Similarity::invert).collect();
        pieces.sort();
        PiecewiseMap { n: self.n, pieces }
    }

    /// `self` after `g`: pieces are the common refinement of `g`'s targets
    /// against `self`'s sources. Requires `range(g) == domain(self)` as
    /// point sets.
    pub fn compose(&self, g: &PiecewiseMap) -> Result<PiecewiseMap, MapError> {
        if self.n != g.n {
            return Err(MapError::MixedParameters);
        }
        if self.domain() != g.range() {
            return Err(MapError::Composition {
                range: format!("{}", g.range().measure()),
                domain: format!("{}", self.domain().measure()),
            });
        }
        let mut pieces = Vec::new();
        for gp in &g.pieces {
            for fp in &self.pieces {
                match fp.source.relation(&gp.target) {
                    CloneRelation::Disjoint => {}
                    CloneRelation::Contains | CloneRelation::Equal => {
                        // g's whole piece lands inside one piece of self
                        pieces.push(Similarity {
                            source: gp.source.clone(),
                            target: fp.apply_clone(&gp.target)?,
                        });
                    }
                    CloneRelation::Inside => {
                        // refine g's piece to the part mapping into fp
                        pieces.push(Similarity {
                            source: gp.preimage_clone(&fp.source)?,
                            target: fp.target.clone(),
                        });
                    }
                }
            }
        }
        PiecewiseMap::new(pieces)
    }

    /// A certified bilipschitz constant: the exact supremum of distance
    /// ratios over all point pairs. Within a piece the ratio is the piece
    /// scale; across pieces the distance between disjoint clones is
    /// constant, so the supremum is a finite maximum.
    pub fn bilipschitz_bound(&self) -> Rational {
        let mut k = Rational::one();
        for p in &self.pieces {
            let s = pow_n(self.n, p.shift().abs());
            if s > k {
                k = s;
            }
        }
        for (i, a) in self.pieces.iter().enumerate() {
            for b in &self.pieces[i + 1..] {
                let ds = a.source.set_distance(&b.source);
                let dt = a.target.set_distance(&b.target);
                debug_assert!(!ds.is_zero() && !dt.is_zero());
                for ratio in [&dt / &ds, &ds / &dt] {
                    if ratio > k {
                        k = ratio;
                    }
                }
            }
        }
        k
    }

    /// Largest observed distance ratio (in either direction) over sampled
    /// point pairs; always at most [`Self::bilipschitz_bound`].
    pub fn empirical_max_ratio(&self, samples: usize, depth: u32, stream: &mut Stream) -> Rational {
        let mut best = Rational::zero();
        for _ in 0..samples {
            let x = self.sample_domain_point(depth, stream);
            let y = self.sample_domain_point(depth, stream);
            if x == y {
                continue;
            }
            let d = crate::boundary::qn_distance(&x, &y).expect("same n");
            let fx = self.apply(&x).expect("sampled inside the domain");
            let fy = self.apply(&y).expect("sampled inside the domain");
            let df = crate::boundary::qn_distance(&fx, &fy).expect("same n");
            for ratio in [&df / &d, &d / &df] {
                if ratio > best {
                    best = ratio;
                }
            }
        }
        best
    }

    /// Uniform-ish random point of the domain: a uniformly chosen depth-
    /// `depth` cell of a piece source, taken with zero tail.
    pub fn sample_domain_point(&self, depth: u32, stream: &mut Stream) -> BoundaryPoint {
        let piece = &self.pieces[stream.below(self.pieces.len() as u64) as usize];
        let mut cell = piece.source.clone();
        for _ in 0..depth {
            cell = cell.child(stream.below(self.n as u64) as u32);
        }
        cell.zero_tail_point()
    }

    pub fn measure_linear_report(&self) -> MeasureLinearReport {
        let per_piece: Vec<Rational> = self.pieces.iter().map(Similarity::scale).collect();
        let first = per_piece[0].clone();
        let global = per_piece.iter().all(|l| *l == first).then_some(first);
        let window_ratio = self.range().measure() / self.domain().measure();
        let constant = global.clone().unwrap_or_else(|| window_ratio.clone());
        MeasureLinearReport {
            global,
            window_ratio,
            per_piece,
            witness_clone: self.pieces[0].source.clone(),
            prime_support: prime_support(&constant),
        }
    }
}

/// True iff every prime of the report's measure-linear constant divides
/// `n`. Holds for every valid surjective piecewise map with a global
/// constant.
pub fn check_prime_support(report: &MeasureLinearReport, n: u32) -> bool {
    let allowed = prime_support(&Rational::from_integer(n.into()));
    report.prime_support.iter().all(|p| allowed.contains(p))
}

/// Smallest clone containing all of the given clones.
pub fn clone_hull<'a>(mut clones: impl Iterator<Item = &'a CloneBall>) -> CloneBall {
    let mut hull = clones.next().expect("hull of a nonempty family").clone();
    for c in clones {
        while !matches!(hull.relation(c), CloneRelation::Contains | CloneRelation::Equal) {
            hull = hull.parent();
        }
    }
    hull
}

/// Result of zooming a piecewise map toward a point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoomLimit {
    /// The single similarity the conjugates stabilize to, written on the
    /// working window.
    pub limit: Similarity,
    /// First zoom depth at which the conjugated map became one piece.
    pub stabilization_depth: u32,
}

impl PiecewiseMap {
    /// Conjugate of the map by a zoom similarity `z` from a working window
    /// into the domain hull, renormalized so the image hull is anchored at
    /// the all-zero clone. When `z`'s target lies inside a single piece the
    /// result is one similarity.
    pub fn zoom_conjugate(&self, z: &Similarity) -> Result<PiecewiseMap, MapError> {
        let window = z.source();
        let focus = z.target();
        let mut parts: Vec<(CloneBall, CloneBall)> = Vec::new();
        for p in &self.pieces {
            match p.source.relation(focus) {
                CloneRelation::Disjoint => {}
                CloneRelation::Contains | CloneRelation::Equal => {
                    parts.push((focus.clone(), p.apply_clone(focus)?));
                }
                CloneRelation::Inside => {
                    parts.push((p.source.clone(), p.target.clone()));
                }
            }
        }
        if parts.is_empty() {
            return Err(MapError::Domain(point_label(&focus.zero_tail_point())));
        }
        let image_hull = clone_hull(parts.iter().map(|(_, img)| img));
        // renormalize: pull sources back through z, push images through the
        // canonical similarity onto a zero-anchored clone of matching size
        let out_height = window.height() + image_hull.height() - focus.height();
        let renorm = Similarity::new(image_hull, CloneBall::zero(self.n, out_height))?;
        let mut pieces = Vec::with_capacity(parts.len());
        for (src, img) in parts {
            pieces.push(Similarity {
                source: z.preimage_clone(&src)?,
                target: renorm.apply_clone(&img)?,
            });
        }
        PiecewiseMap::new(pieces)
    }

    /// Iterate canonical zooms along the digit path of `x` until the
    /// conjugated map is a single similarity on the working window (the
    /// hull of the domain). The limit scales measure by the constant of
    /// `x`'s piece.
    pub fn zoom_limit(&self, x: &BoundaryPoint) -> Result<ZoomLimit, MapError> {
        if self.piece_for(x).is_none() {
            return Err(MapError::Domain(point_label(x)));
        }
        let window = clone_hull(self.pieces.iter().map(|p| &p.source));
        // pieces are finitely deep, so the zoom meets a single piece after
        // at most the maximal piece depth
        let cap = self
            .pieces
            .iter()
            .map(|p| (window.height() - p.source.height()) as u32)
            .max()
            .unwrap_or(0)
            + 1;
        for depth in 0..=cap {
            let focus = CloneBall::shadow(x, window.height() - depth as i64);
            let zoom = Similarity::new(window.clone(), focus)?;
            let conj = self.zoom_conjugate(&zoom)?;
            if conj.pieces.len() == 1 {
                return Ok(ZoomLimit {
                    limit: conj.pieces.into_iter().next().expect("one piece"),
                    stabilization_depth: depth,
                });
            }
        }
        Err(MapError::ZoomDiverged(cap))
    }
}

/// All tilings of `window` by clones at depth at most `max_depth`:
/// either the window itself, or the union of tilings of its children.
pub fn tilings(window: &CloneBall, max_depth: u32) -> Vec<Vec<CloneBall>> {
    let mut out = alloc::vec![alloc::vec![window.clone()]];
    if max_depth == 0 {
        return out;
    }
    let children: Vec<Vec<Vec<CloneBall>>> = (0..window.n())
        .map(|d| tilings(&window.child(d), max_depth - 1))
        .collect();
    // cartesian product of the children's tilings
    let mut combos: Vec<Vec<CloneBall>> = alloc::vec![Vec::new()];
    for child_tilings in children {
        let mut next = Vec::new();
        for combo in &combos {
            for t in &child_tilings {
                let mut c = combo.clone();
                c.extend(t.iter().cloned());
                next.push(c);
            }
        }
        combos = next;
    }
    out.extend(combos);
    out
}

/// Exhaustive search for a piecewise map on the unit window of `Q_n` with
/// piece depth at most `max_depth`, per-piece shifts in
/// `[-shift_range, shift_range]`, and global measure-linear constant
/// exactly `target`. Returns the first witness found.
pub fn search_global_lambda(
    n: u32,
    max_depth: u32,
    shift_range: i64,
    target: &Rational,
) -> Option<PiecewiseMap> {
    let window = CloneBall::zero(n, 0);
    for tiling in tilings(&window, max_depth) {
        // a global constant forces every piece scale to equal the target;
        // collect the admissible shifts per piece
        let admissible: Vec<Vec<i64>> = tiling
            .iter()
            .map(|_| {
                (-shift_range..=shift_range)
                    .filter(|&s| pow_n(n, s) == *target)
                    .collect()
            })
            .collect();
        if admissible.iter().any(Vec::is_empty) {
            continue;
        }
        // every piece admits the shift; place targets by copying the
        // domain tiling shape into a disjoint window of the right size
        let shift = admissible[0][0];
        let carrier = Similarity::new(
            window.clone(),
            CloneBall::new(n, shift, [(shift.max(0) + 1, 1)]).expect("digit below n"),
        )
        .expect("same n");
        let pieces = tiling.iter().map(|src| Similarity {
            source: src.clone(),
            target: carrier.apply_clone(src).expect("tiling lies in the window"),
        });
        return Some(PiecewiseMap::new(pieces).expect("disjoint by construction"));
    }
    None
}

/// Seeded random tiling of `window` with cells at depth `<= max_depth`.
pub fn random_tiling(window: &CloneBall, max_depth: u32, stream: &mut Stream) -> Vec<CloneBall> {
    if max_depth == 0 || !stream.coin() {
        return alloc::vec![window.clone()];
    }
    let mut out = Vec::new();
    for d in 0..window.n() {
        out.extend(random_tiling(&window.child(d), max_depth - 1, stream));
    }
    out
}

/// Seeded random piecewise map with a global measure-linear constant
/// `n^shift`: a random tiling of the unit window mapped onto a shifted
/// copy of itself, with equal-measure pieces permuted at random.
pub fn random_global_map(n: u32, max_depth: u32, shift: i64, stream: &mut Stream) -> PiecewiseMap {
    let window = CloneBall::zero(n, 0);
    let tiling = random_tiling(&window, max_depth, stream);
    let carrier = Similarity::new(window, CloneBall::zero(n, shift)).expect("same n");
    let mut targets: Vec<CloneBall> = tiling
        .iter()
        .map(|c| carrier.apply_clone(c).expect("tiling lies in the window"))
        .collect();
    // shuffle targets among pieces of equal measure
    for i in (1..targets.len()).rev() {
        let j = stream.below(i as u64 + 1) as usize;
        if targets[i].height() == targets[j].height() {
            targets.swap(i, j);
        }
    }
    let pieces = tiling
        .into_iter()
        .zip(targets)
        .map(|(source, target)| Similarity { source, target });
    PiecewiseMap::new(pieces).expect("disjoint by construction")
}

/// Seeded random piecewise map with independent per-piece shifts in
/// `[0, spread]`; pieces land in separate carrier cells so targets never
/// collide. Generally not measure linear.
pub fn random_mixed_map(n: u32, max_depth: u32, spread: i64, stream: &mut Stream) -> PiecewiseMap {
    let window = CloneBall::zero(n, 0);
    let tiling = random_tiling(&window, max_depth, stream);
    // carrier cells: refine a tall window deep enough to give every piece
    // its own slot
    let mut slot_depth = 0u32;
    while (n as u64).pow(slot_depth) < tiling.len() as u64 {
        slot_depth += 1;
    }
    let top = CloneBall::zero(n, spread + max_depth as i64 + slot_depth as i64 + 1);
    let slots = top.refine(slot_depth);
    let pieces = tiling.into_iter().enumerate().map(|(i, source)| {
        let shift = stream.below(spread as u64 + 1) as i64;
        // the zero-tail descendant of the slot at the right height
        let slot = &slots[i];
        let target = CloneBall::new(
            n,
            source.height() + shift,
            slot.prefix_support(),
        )
        .expect("digits below n");
        Similarity { source, target }
    });
    PiecewiseMap::new(pieces).expect("slots keep targets disjoint")
}

/// Map description format: first line `n`, then one `source -> target`
/// clone-literal line per piece.
pub fn format_map(m: &PiecewiseMap) -> String {
    let mut out = format!("{}\n", m.n());
    for p in m.pieces() {
        out.push_str(&format!("{} -> {}\n", p.source(), p.target()));
    }
    out
}

/// Parse the map description format produced by [`format_map`].
pub fn parse_map(text: &str) -> Result<PiecewiseMap, MapError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let n: u32 = lines
        .next()
        .and_then(|l| l.trim().parse().ok())
        .ok_or_else(|| MapError::Description(String::from("missing branching parameter header")))?;
    let mut pieces = Vec::new();
    for line in lines {
        let (src, tgt) = line
            .split_once("->")
            .ok_or_else(|| MapError::Description(String::from(line)))?;
        let source = crate::boundary::parse_clone(src.trim())
            .map_err(|e| MapError::Description(format!("{e}")))?;
        let target = crate::boundary::parse_clone(tgt.trim())
            .map_err(|e| MapError::Description(format!("{e}")))?;
        if source.n() != n || target.n() != n {
            return Err(MapError::MixedParameters);
        }
        pieces.push(Similarity::new(source, target)?);
    }
    PiecewiseMap::new(pieces)
}
