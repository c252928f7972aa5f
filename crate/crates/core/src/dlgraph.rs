//! Finite height-band truncations of `DL(n,n)` with exact adjacency.
//!
//! A vertex of `DL(n,n)` is a pair of tree vertices whose heights sum to
//! zero; we store it as a pair of clones (the lower and upper shadows). A
//! *box* is the connected component of a height band `[a, a+H]` containing
//! an anchor vertex: it has exactly `(H+1) n^H` vertices, `n^H` per level,
//! and is the canonical Folner set of the graph.
//!
//! Boxes are never materialized as vertex lists: membership, indexing and
//! adjacency are all computed from the digit structure, and BFS works over
//! the deterministic vertex ids.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::boundary::{CloneBall, CloneRelation};

use crate::Rational;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("box of {size} vertices exceeds the configured budget of {budget}")]
    Budget { size: u128, budget: u128 },
    #[error("vertex does not belong to the box")]
    Membership,
    #[error("shadow heights of a DL vertex must sum to zero")]
    ShadowHeights,
    #[error("anchor clones are inconsistent with the requested band")]
    Anchor,
}

/// A vertex of `DL(n,n)`: height `t`, lower shadow of height `t`, upper
/// shadow of height `-t` (so the shadow measures multiply to one).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DLVertex {
    t: i64,
    x: CloneBall,
    y: CloneBall,
}

impl DLVertex {
    pub fn new(x: CloneBall, y: CloneBall) -> Result<Self, GraphError> {
        if x.height() + y.height() != 0 || x.n() != y.n() {
            return Err(GraphError::ShadowHeights);
        }
        Ok(DLVertex { t: x.height(), x, y })
    }

    pub fn n(&self) -> u32 {
        self.x.n()
    }

    pub fn t(&self) -> i64 {
        self.t
    }

    /// Lower shadow: the clone of height `t` in the first-tree boundary.
    pub fn lower_shadow(&self) -> &CloneBall {
        &self.x
    }

    /// Upper shadow: the clone of height `-t` in the second-tree boundary.
    pub fn upper_shadow(&self) -> &CloneBall {
        &self.y
    }
}

/// Which complement the r-boundary of a subset is computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ambient {
    /// Complement within the box itself.
    Box,
    /// Complement within the height band extended by `r` levels on both
    /// sides. This reproduces the infinite-graph boundary counts of a box.
    Band,
}

/// A box: the component of the band `[a, a+H]` containing the anchor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DLBox {
    n: u32,
    a: i64,
    h: i64,
    /// Anchor of the first tree: the common ancestor at height `a+H`.
    xanchor: CloneBall,
    /// Anchor of the second tree: the common ancestor at height `-a`.
    yanchor: CloneBall,
}

pub const DEFAULT_BUDGET: u128 = 1 << 26;

impl DLBox {
    /// Box of height `h` based at level `a`, anchored at the all-zero
    /// vertex.
    pub fn build(n: u32, h: i64, a: i64, budget: u128) -> Result<Self, GraphError> {
        Self::build_anchored(
            CloneBall::zero(n, a + h),
            CloneBall::zero(n, -a),
            budget,
        )
    }

    /// Box with explicit anchors: `xanchor` at height `a+h`, `yanchor` at
    /// height `-a`; the band is inferred from the anchor heights.
    pub fn build_anchored(
        xanchor: CloneBall,
        yanchor: CloneBall,
        budget: u128,
    ) -> Result<Self, GraphError> {
        if xanchor.n() != yanchor.n() {
            return Err(GraphError::Anchor);
        }
        let a = -yanchor.height();
        let h = xanchor.height() - a;
        if h < 0 {
            return Err(GraphError::Anchor);
        }
        let n = xanchor.n();
        let size = (n as u128)
            .checked_pow(h as u32)
            .and_then(|p| p.checked_mul(h as u128 + 1))
            .unwrap_or(u128::MAX);
        if size > budget {
            return Err(GraphError::Budget { size, budget });
        }
        Ok(DLBox { n, a, h, xanchor, yanchor })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Base level of the band.
    pub fn base_level(&self) -> i64 {
        self.a
    }

    /// Height `H` of the band; levels run over `[a, a+H]`.
    pub fn height(&self) -> i64 {
        self.h
    }

    pub fn top_level(&self) -> i64 {
        self.a + self.h
    }

    pub fn levels(&self) -> impl Iterator<Item = i64> {
        self.a..=self.a + self.h
    }

    pub fn xanchor(&self) -> &CloneBall {
        &self.xanchor
    }

    pub fn yanchor(&self) -> &CloneBall {
        &self.yanchor
    }

    /// `(H+1) n^H`.
    pub fn vertex_count(&self) -> usize {
        (self.h as usize + 1) * (self.n as usize).pow(self.h as u32)
    }

    /// `n^H` vertices on every level.
    pub fn level_count(&self) -> usize {
        (self.n as usize).pow(self.h as u32)
    }

    /// The anchor vertex at the bottom level.
    pub fn base_vertex(&self) -> DLVertex {
        self.vertex(0)
    }

    pub fn contains(&self, v: &DLVertex) -> bool {
        self.index_of(v).is_some()
    }

    /// Deterministic id, lexicographic in `(t, x digits, y digits)`.
    pub fn index_of(&self, v: &DLVertex) -> Option<usize> {
        if v.n() != self.n || v.t < self.a || v.t > self.a + self.h {
            return None;
        }
        // x must sit under the x anchor, y under the y anchor
        if v.x.relation(&self.xanchor) == CloneRelation::Disjoint
            || v.y.relation(&self.yanchor) == CloneRelation::Disjoint
        {
            return None;
        }
        let nn = self.n as usize;
        let mut xidx = 0usize;
        for i in (v.t..self.top_level()).rev() {
            xidx = xidx * nn + v.x.prefix_digit(i) as usize;
        }
        let mut yidx = 0usize;
        for j in (-v.t..-self.a).rev() {
            yidx = yidx * nn + v.y.prefix_digit(j) as usize;
        }
        let level = (v.t - self.a) as usize;
        Some(level * self.level_count() + xidx * nn.pow((v.t - self.a) as u32) + yidx)
    }

    /// Inverse of [`Self::index_of`].
    pub fn vertex(&self, mut id: usize) -> DLVertex {
        debug_assert!(id < self.vertex_count());
        let nn = self.n as usize;
        let level = id / self.level_count();
        id %= self.level_count();
        let t = self.a + level as i64;
        let ylen = (t - self.a) as u32;
        let yidx = id % nn.pow(ylen);
        let xidx = id / nn.pow(ylen);
        let mut xdigits: Vec<(i64, u32)> = self.xanchor.prefix_support().collect();
        let mut rem = xidx;
        for i in t..self.top_level() {
            xdigits.push((i, (rem % nn) as u32));
            rem /= nn;
        }
        let mut ydigits: Vec<(i64, u32)> = self.yanchor.prefix_support().collect();
        let mut rem = yidx;
        for j in -t..-self.a {
            ydigits.push((j, (rem % nn) as u32));
            rem /= nn;
        }
        let x = CloneBall::new(self.n, t, xdigits).expect("digits below n");
        let y = CloneBall::new(self.n, -t, ydigits).expect("digits below n");
        DLVertex::new(x, y).expect("heights sum to zero")
    }

    /// Neighbors inside the box: up to `n` upward (unique first-tree
    /// parent paired with each second-tree child) and `n` downward,
    /// clamped at the band ends.
    pub fn neighbors(&self, v: &DLVertex) -> Result<Vec<DLVertex>, GraphError> {
        if !self.contains(v) {
            return Err(GraphError::Membership);
        }
        let mut out = Vec::with_capacity(2 * self.n as usize);
        if v.t < self.top_level() {
            let xp = v.x.parent();
            for d in 0..self.n {
                let y = v.y.child(d);
                out.push(DLVertex::new(xp.clone(), y).expect("heights sum to zero"));
            }
        }
        if v.t > self.a {
            let yp = v.y.parent();
            for d in 0..self.n {
                let x = v.x.child(d);
                out.push(DLVertex::new(x, yp.clone()).expect("heights sum to zero"));
            }
        }
        Ok(out)
    }

    fn neighbor_ids(&self, id: usize, out: &mut Vec<usize>) {
        out.clear();
        let v = self.vertex(id);
        for w in self.neighbors(&v).expect("id enumerates box vertices") {
            out.push(self.index_of(&w).expect("neighbors stay in the box"));
        }
    }

    /// BFS distances from `from` to every vertex of the box.
    pub fn bfs_distances(&self, from: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.vertex_count()];
        let mut queue = VecDeque::new();
        dist[from] = 0;
        queue.push_back(from);
        let mut scratch = Vec::new();
        while let Some(u) = queue.pop_front() {
            self.neighbor_ids(u, &mut scratch);
            for &w in &scratch {
                if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Length of the shortest edge path between two box vertices.
    pub fn graph_distance(&self, u: &DLVertex, v: &DLVertex) -> Result<u32, GraphError> {
        let ui = self.index_of(u).ok_or(GraphError::Membership)?;
        let vi = self.index_of(v).ok_or(GraphError::Membership)?;
        if ui == vi {
            return Ok(0);
        }
        let d = self.bfs_distances(ui)[vi];
        debug_assert!(d != u32::MAX, "boxes are connected");
        Ok(d)
    }

    /// The box over the band extended by `r` levels on both ends; contains
    /// this box.
    pub fn extended(&self, r: i64) -> DLBox {
        let mut xanchor = self.xanchor.clone();
        let mut yanchor = self.yanchor.clone();
        for _ in 0..r {
            xanchor = xanchor.parent();
            yanchor = yanchor.parent();
        }
        DLBox {
            n: self.n,
            a: self.a - r,
            h: self.h + 2 * r,
            xanchor,
            yanchor,
        }
    }

    /// Two-sided r-boundary of a vertex subset (given by box ids): points
    /// outside `s` within distance `r` of `s`, plus points of `s` within
    /// distance `r` of the complement, computed against the chosen ambient
    /// graph.
    pub fn r_boundary(&self, s: &[usize], r: u32, ambient: Ambient) -> Vec<DLVertex> {
        match ambient {
            Ambient::Box => self.r_boundary_in(self, s, r),
            Ambient::Band => {
                let big = self.extended(r as i64);
                let ids: Vec<usize> = s
                    .iter()
                    .map(|&id| {
                        big.index_of(&self.vertex(id))
                            .expect("box vertices persist in the extended band")
                    })
                    .collect();
                big.r_boundary_in(&big, &ids, r)
            }
        }
    }

    fn r_boundary_in(&self, graph: &DLBox, s: &[usize], r: u32) -> Vec<DLVertex> {
        let count = graph.vertex_count();
        let mut in_s = vec![false; count];
        for &id in s {
            in_s[id] = true;
        }
        let from_s = graph.multi_bfs(&in_s, true, r);
        let from_comp = graph.multi_bfs(&in_s, false, r);
        let mut out = Vec::new();
        for id in 0..count {
            let boundary = if in_s[id] {
                from_comp[id] <= r && from_comp[id] > 0
            } else {
                from_s[id] <= r && from_s[id] > 0
            };
            if boundary {
                out.push(graph.vertex(id));
            }
        }
        out
    }

    /// Multi-source BFS from every vertex with `in_s[id] == sources`,
    /// truncated at depth `cap`.
    fn multi_bfs(&self, in_s: &[bool], sources: bool, cap: u32) -> Vec<u32> {
        let mut dist = vec![u32::MAX; in_s.len()];
        let mut queue = VecDeque::new();
        for (id, &flag) in in_s.iter().enumerate() {
            if flag == sources {
                dist[id] = 0;
                queue.push_back(id);
            }
        }
        let mut scratch = Vec::new();
        while let Some(u) = queue.pop_front() {
            if dist[u] >= cap {
                continue;
            }
            self.neighbor_ids(u, &mut scratch);
            for &w in &scratch {
                if dist[w] == u32::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// All box ids.
    pub fn all_ids(&self) -> Vec<usize> {
        (0..self.vertex_count()).collect()
    }
}

/// One row of a Folner scan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FolnerRow {
    pub h: i64,
    pub size: u128,
    pub boundary: u64,
    pub ratio: Rational,
}

/// Exact `|boundary_r S_H| / |S_H|` ratios for whole boxes over a list of
/// heights, computed against the band ambient.
pub fn folner_scan(
    n: u32,
    h_list: &[i64],
    r: u32,
    budget: u128,
) -> Result<Vec<FolnerRow>, GraphError> {
    let mut rows = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let b = DLBox::build(n, h, 0, budget)?;
        let boundary = b.r_boundary(&b.all_ids(), r, Ambient::Band).len() as u64;
        let size = b.vertex_count() as u128;
        let ratio = Rational::new(boundary.into(), (size as u64).into());
        rows.push(FolnerRow { h, size, boundary, ratio });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    #[test]
    fn census_small() {
        let b = DLBox::build(3, 2, 0, DEFAULT_BUDGET).unwrap();
        assert_eq!(b.vertex_count(), 27);
        assert_eq!(b.level_count(), 9);
        let b = DLBox::build(2, 0, 0, DEFAULT_BUDGET).unwrap();
        assert_eq!(b.vertex_count(), 1);
        let b = DLBox::build(2, 10, 0, DEFAULT_BUDGET).unwrap();
        assert_eq!(b.vertex_count(), 11 * 1024);
    }

    #[test]
    fn budget_is_enforced() {
        assert_eq!(
            DLBox::build(2, 10, 0, 100).unwrap_err(),
            GraphError::Budget { size: 11 * 1024, budget: 100 }
        );
    }

    #[test]
    fn ids_round_trip() {
        let b = DLBox::build(3, 3, -1, DEFAULT_BUDGET).unwrap();
        for id in 0..b.vertex_count() {
            let v = b.vertex(id);
            assert_eq!(b.index_of(&v), Some(id));
            assert_eq!(v.t() + v.upper_shadow().height(), 0);
        }
    }

    #[test]
    fn shadow_duality() {
        let b = DLBox::build(2, 4, -2, DEFAULT_BUDGET).unwrap();
        for id in 0..b.vertex_count() {
            let v = b.vertex(id);
            let product = v.lower_shadow().measure() * v.upper_shadow().measure();
            assert_eq!(product, Rational::new(1.into(), 1.into()));
        }
    }

    #[test]
    fn degrees() {
        let b = DLBox::build(3, 2, 0, DEFAULT_BUDGET).unwrap();
        for id in 0..b.vertex_count() {
            let v = b.vertex(id);
            let deg = b.neighbors(&v).unwrap().len();
            if v.t() == b.base_level() || v.t() == b.top_level() {
                assert_eq!(deg, 3);
            } else {
                assert_eq!(deg, 6);
            }
        }
        let single = DLBox::build(2, 0, 0, DEFAULT_BUDGET).unwrap();
        assert!(single.neighbors(&single.base_vertex()).unwrap().is_empty());
    }

    #[test]
    fn neighbors_reject_foreign_vertices() {
        let b = DLBox::build(2, 2, 0, DEFAULT_BUDGET).unwrap();
        let other = DLBox::build(2, 2, 5, DEFAULT_BUDGET).unwrap();
        assert_eq!(
            b.neighbors(&other.base_vertex()).unwrap_err(),
            GraphError::Membership
        );
    }

    #[test]
    fn boxes_are_connected() {
        for (n, h) in [(2u32, 5i64), (3, 3)] {
            let b = DLBox::build(n, h, 0, DEFAULT_BUDGET).unwrap();
            let dist = b.bfs_distances(0);
            assert!(dist.iter().all(|&d| d != u32::MAX));
        }
    }

    #[test]
    fn distance_basics() {
        let b = DLBox::build(3, 3, 0, DEFAULT_BUDGET).unwrap();
        let u = b.vertex(5);
        assert_eq!(b.graph_distance(&u, &u).unwrap(), 0);
        let w = &b.neighbors(&u).unwrap()[0];
        assert_eq!(b.graph_distance(&u, w).unwrap(), 1);
    }

    #[test]
    fn empty_subset_has_empty_boundary() {
        let b = DLBox::build(2, 3, 0, DEFAULT_BUDGET).unwrap();
        assert!(b.r_boundary(&[], 1, Ambient::Box).is_empty());
        assert!(b.r_boundary(&[], 1, Ambient::Band).is_empty());
    }

    #[test]
    fn whole_box_boundary_in_box_ambient_is_empty() {
        let b = DLBox::build(2, 3, 0, DEFAULT_BUDGET).unwrap();
        assert!(b.r_boundary(&b.all_ids(), 1, Ambient::Box).is_empty());
    }

    #[test]
    fn whole_box_boundary_in_band_ambient() {
        // outside part: n^(H+1) below and above; inside part: n^H top and
        // bottom levels
        let b = DLBox::build(2, 4, 0, DEFAULT_BUDGET).unwrap();
        let boundary = b.r_boundary(&b.all_ids(), 1, Ambient::Band);
        assert_eq!(boundary.len(), 2 * 32 + 2 * 16);
    }

    #[test]
    fn radius_zero_boundary_is_empty() {
        let b = DLBox::build(2, 3, 0, DEFAULT_BUDGET).unwrap();
        assert!(b.r_boundary(&b.all_ids(), 0, Ambient::Band).is_empty());
    }

    #[test]
    fn folner_ratios_decrease() {
        let rows = folner_scan(2, &[4, 6, 8, 10], 1, DEFAULT_BUDGET).unwrap();
        assert_eq!(rows[0].size, 5 * 16);
        for pair in rows.windows(2) {
            assert!(pair[1].ratio < pair[0].ratio);
        }
        assert!(rows.iter().all(|row| !row.ratio.is_zero()));
    }

    #[test]
    fn anchor_independence_of_counts() {
        let b0 = DLBox::build(3, 3, 0, DEFAULT_BUDGET).unwrap();
        let anchored = DLBox::build_anchored(
            CloneBall::new(3, 3, [(3, 1), (5, 2)]).unwrap(),
            CloneBall::new(3, 0, [(1, 2)]).unwrap(),
            DEFAULT_BUDGET,
        )
        .unwrap();
        assert_eq!(b0.vertex_count(), anchored.vertex_count());
        assert_eq!(
            b0.r_boundary(&b0.all_ids(), 1, Ambient::Band).len(),
            anchored
                .r_boundary(&anchored.all_ids(), 1, Ambient::Band)
                .len()
        );
    }
}
