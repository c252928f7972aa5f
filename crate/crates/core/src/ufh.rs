//! Degree-zero uniformly finite homology at finite scale.
//!
//! Chains live on boxes: a 0-chain assigns a bounded integer to every box
//! vertex, a 1-chain to pairs within a recorded radius. The pushforward of
//! the fundamental class along a vertex map has coefficient
//! `|f^-1(y)| - k` once the comparison multiple `k` is subtracted, and the
//! Whyte statistic `|sum a_x| / |boundary_r|` over a growing box family
//! decides whether that chain can bound: a ratio that keeps growing rules
//! out a bounded primitive, hence any bijection at bounded distance.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use num_traits::Zero;

use crate::boundary::{CloneBall, CloneRelation};
use crate::dlgraph::{Ambient, DLBox, GraphError};
use crate::lift::{build_psi, preimage_audit, LiftError, VertexMap};
use crate::qmaps::{MapError, PiecewiseMap};
use crate::Rational;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum UfhError {
    #[error("edge ({a}, {b}) at distance {d} exceeds the chain radius {radius}")]
    Radius { a: usize, b: usize, d: u32, radius: u32 },
    #[error("vertex id {0} outside the chain's box")]
    Membership(usize),
    #[error("height {h} does not fit the map windows")]
    Window { h: i64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Map(#[from] MapError),
}

/// A bounded 0-chain over a box: one integer coefficient per vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UFChain {
    carrier: DLBox,
    coeffs: Vec<i64>,
    bound: u64,
}

impl UFChain {
    pub fn new(carrier: DLBox, coeffs: Vec<i64>) -> Self {
        debug_assert_eq!(coeffs.len(), carrier.vertex_count());
        let bound = coeffs.iter().map(|a| a.unsigned_abs()).max().unwrap_or(0);
        UFChain { carrier, coeffs, bound }
    }

    pub fn zero(carrier: DLBox) -> Self {
        let len = carrier.vertex_count();
        UFChain::new(carrier, alloc::vec![0; len])
    }

    pub fn carrier(&self) -> &DLBox {
        &self.carrier
    }

    pub fn coeff(&self, id: usize) -> i64 {
        self.coeffs[id]
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    /// Recorded sup-norm bound `M_c`.
    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn sum(&self) -> i64 {
        self.coeffs.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&a| a == 0)
    }
}

/// A bounded 1-chain over a box: integer coefficients on ordered vertex
/// pairs, with the support radius recorded at construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeChain {
    carrier: DLBox,
    coeffs: BTreeMap<(usize, usize), i64>,
    bound: u64,
    radius: u32,
}

impl EdgeChain {
    /// Build from `((from, to), coefficient)` entries; the radius is the
    /// largest graph distance across the support, so the support condition
    /// holds by construction.
    pub fn new(
        carrier: DLBox,
        entries: impl IntoIterator<Item = ((usize, usize), i64)>,
    ) -> Result<Self, UfhError> {
        let mut coeffs: BTreeMap<(usize, usize), i64> = BTreeMap::new();
        for (pair, a) in entries {
            if a == 0 {
                continue;
            }
            for id in [pair.0, pair.1] {
                if id >= carrier.vertex_count() {
                    return Err(UfhError::Membership(id));
                }
            }
            *coeffs.entry(pair).or_insert(0) += a;
        }
        coeffs.retain(|_, a| *a != 0);
        let mut radius = 0;
        for &(a, b) in coeffs.keys() {
            let d = carrier.graph_distance(&carrier.vertex(a), &carrier.vertex(b))?;
            radius = radius.max(d);
        }
        let bound = coeffs.values().map(|a| a.unsigned_abs()).max().unwrap_or(0);
        Ok(EdgeChain { carrier, coeffs, bound, radius })
    }

    pub fn carrier(&self) -> &DLBox {
        &self.carrier
    }

    pub fn bound(&self) -> u64 {
        self.bound
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn support(&self) -> impl Iterator<Item = ((usize, usize), i64)> + '_ {
        self.coeffs.iter().map(|(&p, &a)| (p, a))
    }
}

/// Linear extension of `(x, y) -> y - x`. The coefficient sum of the
/// result is always zero.
pub fn boundary(e: &EdgeChain) -> UFChain {
    let mut coeffs = alloc::vec![0i64; e.carrier.vertex_count()];
    for ((from, to), a) in e.support() {
        coeffs[to] += a;
        coeffs[from] -= a;
    }
    UFChain::new(e.carrier.clone(), coeffs)
}

/// The comparison chain of a vertex map over a target box: coefficient
/// `|f^-1(y)| - k_offset` at every box vertex. `k_offset = 0` gives the
/// raw pushforward of the fundamental class.
pub fn pushforward(f: &VertexMap, k_offset: i64, target: &DLBox) -> UFChain {
    let mut coeffs = alloc::vec![-k_offset; target.vertex_count()];
    for (_, w) in f.entries() {
        if let Some(i) = target.index_of(w) {
            coeffs[i] += 1;
        }
    }
    UFChain::new(target.clone(), coeffs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    /// The statistic stays bounded by a constant over the scanned range.
    Consistent,
    /// The statistic grows beyond any fitted constant: monotone increase
    /// across at least 3 boxes with total growth factor >= 2.
    Obstructed,
    /// Fewer than 3 boxes scanned.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WhyteRow {
    pub h: i64,
    pub sum: i64,
    pub boundary_size: u64,
    pub ratio: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WhyteReport {
    pub rows: Vec<WhyteRow>,
    pub r: u32,
    pub verdict: Verdict,
    /// Largest observed ratio: the constant a bounded-statistic claim
    /// would have to beat.
    pub max_ratio: Rational,
}

fn decide(rows: &[WhyteRow]) -> Verdict {
    if rows.len() < 3 {
        return Verdict::Inconclusive;
    }
    for i in 0..rows.len() {
        let mut j = i;
        while j + 1 < rows.len() && rows[j + 1].ratio > rows[j].ratio {
            j += 1;
            let doubled = &rows[i].ratio + &rows[i].ratio;
            if j - i >= 2 && rows[j].ratio >= doubled {
                return Verdict::Obstructed;
            }
        }
    }
    Verdict::Consistent
}

/// Evaluate the Whyte statistic of a chain family over increasing box
/// heights: per height, `|sum of coefficients|` against the size of the
/// `r`-boundary of the chain's box in its band.
pub fn whyte_scan(
    mut family: impl FnMut(i64) -> Result<UFChain, UfhError>,
    h_list: &[i64],
    r: u32,
) -> Result<WhyteReport, UfhError> {
    let mut rows = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let chain = family(h)?;
        let b = chain.carrier();
        let boundary_size = b.r_boundary(&b.all_ids(), r, Ambient::Band).len() as u64;
        let sum = chain.sum();
        let ratio = if boundary_size == 0 {
            Rational::zero()
        } else {
            Rational::new(sum.unsigned_abs().into(), boundary_size.into())
        };
        rows.push(WhyteRow { h, sum, boundary_size, ratio });
    }
    rows.sort_by_key(|row| row.h);
    let verdict = decide(&rows);
    let max_ratio = rows
        .iter()
        .map(|row| row.ratio.clone())
        .max()
        .unwrap_or_else(Rational::zero);
    Ok(WhyteReport { rows, r, verdict, max_ratio })
}

/// Hull of the images of the part of `m` meeting `window`.
fn image_hull(m: &PiecewiseMap, window: &CloneBall) -> Result<CloneBall, UfhError> {
    let mut images = Vec::new();
    for p in m.pieces() {
        match p.source().relation(window) {
            CloneRelation::Disjoint => {}
            CloneRelation::Contains | CloneRelation::Equal => {
                images.push(p.apply_clone(window)?);
            }
            CloneRelation::Inside => images.push(p.target().clone()),
        }
    }
    if images.is_empty() {
        return Err(UfhError::Window { h: window.height() });
    }
    Ok(crate::qmaps::clone_hull(images.iter()))
}

/// Everything one obstruction experiment at a single height produces.
#[derive(Debug, Clone)]
pub struct ObstructionStage {
    pub source: DLBox,
    pub target: DLBox,
    pub psi: VertexMap,
    pub chain: UFChain,
}

/// Build the height-`h` stage of the standard obstruction experiment: a
/// source box anchored in the map domains, the lifted map, and the
/// comparison chain `|psi^-1(y)| - k` over the transported target box.
///
/// The target band keeps the source top (the lift preserves levels, so
/// higher levels are image-free) while the upper-tree anchor is carried
/// through `phi_u`; its lower-tree anchor is the zero-tail clone of the
/// image hull at the source top height.
pub fn obstruction_stage(
    phi_l: &PiecewiseMap,
    phi_u: &PiecewiseMap,
    k: i64,
    h: i64,
    budget: u128,
) -> Result<ObstructionStage, UfhError> {
    let dom_l = crate::qmaps::clone_hull(phi_l.pieces().iter().map(|p| p.source()));
    let dom_u = crate::qmaps::clone_hull(phi_u.pieces().iter().map(|p| p.source()));
    let xanchor = dom_l.clone();
    let y_height = h - dom_l.height();
    if y_height > dom_u.height() {
        return Err(UfhError::Window { h });
    }
    let yanchor = CloneBall::shadow(&dom_u.zero_tail_point(), y_height);
    let source = DLBox::build_anchored(xanchor.clone(), yanchor.clone(), budget)?;
    let psi = build_psi(phi_l, phi_u, &source)?;
    let xhull = image_hull(phi_l, &xanchor)?;
    let c_l = CloneBall::shadow(&xhull.zero_tail_point(), xanchor.height());
    let c_u = image_hull(phi_u, &yanchor)?;
    let target = DLBox::build_anchored(c_l, c_u, budget)?;
    let chain = pushforward(&psi, k, &target);
    Ok(ObstructionStage { source, target, psi, chain })
}

/// Outcome of the bounded-radius matching search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingReport {
    pub perfect: bool,
    /// Number of sources no matching can cover: the maximum Hall
    /// violation.
    pub deficiency: usize,
    /// `(source id, matched target id)` pairs of a maximum matching.
    pub matching: Vec<(usize, usize)>,
    /// A Hall certificate when deficiency > 0: source ids whose joint
    /// neighborhood is smaller by exactly the deficiency.
    pub deficient_set: Vec<usize>,
    pub neighborhood_size: usize,
}

/// Targets of `target` within graph distance `radius` of `w`, by id.
fn candidates(target: &DLBox, w: &crate::dlgraph::DLVertex, radius: u32) -> Vec<usize> {
    let Some(start) = target.index_of(w) else {
        return Vec::new();
    };
    let mut dist: BTreeMap<usize, u32> = BTreeMap::new();
    dist.insert(start, 0);
    let mut queue = VecDeque::from([start]);
    while let Some(id) = queue.pop_front() {
        let d = dist[&id];
        if d == radius {
            continue;
        }
        for nb in target.neighbors(&target.vertex(id)).expect("vertex in box") {
            let nid = target.index_of(&nb).expect("neighbor in box");
            dist.entry(nid).or_insert_with(|| {
                queue.push_back(nid);
                d + 1
            });
        }
    }
    dist.into_keys().collect()
}

/// Maximum bipartite matching where a source `v` may pair with any target
/// within graph distance `radius` of `f(v)`, via augmenting paths in
/// deterministic order. A nonzero deficiency comes with a Hall
/// certificate read off the final alternating-reachability cut.
pub fn bounded_matching(f: &VertexMap, target: &DLBox, radius: u32) -> MatchingReport {
    let sources: Vec<usize> = f.entries().map(|(id, _)| id).collect();
    let adj: Vec<Vec<usize>> = f
        .entries()
        .map(|(_, w)| candidates(target, w, radius))
        .collect();
    let mut match_of_target: BTreeMap<usize, usize> = BTreeMap::new();
    let mut match_of_source: Vec<Option<usize>> = alloc::vec![None; sources.len()];

    fn augment(
        s: usize,
        adj: &[Vec<usize>],
        match_of_target: &mut BTreeMap<usize, usize>,
        match_of_source: &mut [Option<usize>],
        visited: &mut BTreeMap<usize, ()>,
    ) -> bool {
        for &t in &adj[s] {
            if visited.insert(t, ()).is_some() {
                continue;
            }
            let free = match match_of_target.get(&t) {
                None => true,
                Some(&other) => {
                    augment(other, adj, match_of_target, match_of_source, visited)
                }
            };
            if free {
                match_of_target.insert(t, s);
                match_of_source[s] = Some(t);
                return true;
            }
        }
        false
    }

    for s in 0..sources.len() {
        let mut visited = BTreeMap::new();
        augment(s, &adj, &mut match_of_target, &mut match_of_source, &mut visited);
    }

    let unmatched: Vec<usize> = (0..sources.len())
        .filter(|&s| match_of_source[s].is_none())
        .collect();
    let deficiency = unmatched.len();

    // Hall certificate: sources reachable from the unmatched ones by
    // alternating paths; their joint neighborhood is fully matched into
    // the same set, so it falls short by exactly the deficiency.
    let mut in_set: Vec<bool> = alloc::vec![false; sources.len()];
    let mut neighborhood: BTreeMap<usize, ()> = BTreeMap::new();
    let mut queue: VecDeque<usize> = unmatched.iter().copied().collect();
    for &s in &unmatched {
        in_set[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        for &t in &adj[s] {
            if neighborhood.insert(t, ()).is_none() {
                if let Some(&other) = match_of_target.get(&t) {
                    if !in_set[other] {
                        in_set[other] = true;
                        queue.push_back(other);
                    }
                }
            }
        }
    }
    let deficient_set: Vec<usize> = if deficiency == 0 {
        Vec::new()
    } else {
        (0..sources.len())
            .filter(|&s| in_set[s])
            .map(|s| sources[s])
            .collect()
    };
    let matching: Vec<(usize, usize)> = (0..sources.len())
        .filter_map(|s| match_of_source[s].map(|t| (sources[s], t)))
        .collect();
    MatchingReport {
        perfect: deficiency == 0,
        deficiency,
        matching,
        deficient_set,
        neighborhood_size: if deficiency == 0 { 0 } else { neighborhood.len() },
    }
}

/// Convenience: audit a lifted map and scan its comparison chain in one
/// call, as the obstruction experiment does per height.
pub fn audit_stage(stage: &ObstructionStage, k_used: &Rational) -> crate::lift::PreimageAudit {
    preimage_audit(&stage.psi, &stage.target, k_used)
}
