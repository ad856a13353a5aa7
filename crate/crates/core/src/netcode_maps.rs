//! Relay network-coding maps.
//!
//! A map assigns a cluster label to every transmit pair `(x_A, x_B)`. It must
//! satisfy the exclusive law (no label repeated in a row or a column) so each
//! end node can recover its partner's symbol from the label and its own
//! symbol. A map removes a singular fade state when every pair of transmit
//! pairs colliding there shares a label.
//!
//! Maps are built per singular fade state: collisions are merged with a
//! union-find into blocks, then the blocks are coloured by backtracking so
//! that no row or column repeats a label, using as few labels as possible.

use rayon::prelude::*;
use serde::ser::{Serialize, SerializeMap, SerializeStruct, Serializer};

use crate::constellation::{relay_sums, validate_order, Constellation, FadeState};
use crate::error::{Error, Result};
use crate::singular_fades::{colliding_pairs, enumerate_singular_fades, CollidingPair};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterMap {
    m: usize,
    /// Row-major, `table[a·M + b]` is the label of transmit pair `(a, b)`.
    table: Vec<usize>,
    num_clusters: usize,
    /// Fade-state ids this map is known to remove.
    pub removed_fades: Vec<usize>,
}

impl ClusterMap {
    /// Builds a map from rows; the cluster count is one more than the
    /// largest label.
    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 || rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidConfig("map table must be square".into()));
        }
        let table: Vec<usize> = rows.iter().flatten().copied().collect();
        let num_clusters = table.iter().max().map_or(0, |&t| t + 1);
        Ok(Self {
            m,
            table,
            num_clusters,
            removed_fades: Vec::new(),
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    #[inline]
    pub fn label(&self, a: usize, b: usize) -> usize {
        self.table[a * self.m + b]
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.table.chunks(self.m).map(<[usize]>::to_vec).collect()
    }

    /// Partner symbol recovered by node A from label `l` and its own `a`.
    pub fn invert_at_a(&self, a: usize, l: usize) -> Option<usize> {
        (0..self.m).find(|&b| self.label(a, b) == l)
    }

    /// Partner symbol recovered by node B from label `l` and its own `b`.
    pub fn invert_at_b(&self, b: usize, l: usize) -> Option<usize> {
        (0..self.m).find(|&a| self.label(a, b) == l)
    }

    /// Relabels clusters in order of first appearance, row-major.
    pub fn canonical(&self) -> Self {
        let mut rename = vec![usize::MAX; self.num_clusters.max(1)];
        let mut next = 0;
        let table = self
            .table
            .iter()
            .map(|&l| {
                if rename[l] == usize::MAX {
                    rename[l] = next;
                    next += 1;
                }
                rename[l]
            })
            .collect();
        Self {
            m: self.m,
            table,
            num_clusters: next,
            removed_fades: self.removed_fades.clone(),
        }
    }

    /// True if every colliding pair of a fade state shares a label.
    pub fn clusters_all(&self, pairs: &[CollidingPair]) -> bool {
        pairs
            .iter()
            .all(|p| self.label(p.a.0, p.a.1) == self.label(p.b.0, p.b.1))
    }
}

impl Serialize for ClusterMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("ClusterMap", 2)?;
        st.serialize_field("t", &self.num_clusters)?;
        st.serialize_field("table", &self.rows())?;
        st.end()
    }
}

/// Row- and column-distinctness of the labels.
pub fn exclusive_law_holds(map: &ClusterMap) -> bool {
    let m = map.m;
    let t = map.num_clusters;
    let mut seen = vec![false; t];
    for r in 0..m {
        seen.iter_mut().for_each(|s| *s = false);
        for c in 0..m {
            let l = map.label(r, c);
            if l >= t || std::mem::replace(&mut seen[l], true) {
                return false;
            }
        }
    }
    for c in 0..m {
        seen.iter_mut().for_each(|s| *s = false);
        for r in 0..m {
            if std::mem::replace(&mut seen[map.label(r, c)], true) {
                return false;
            }
        }
    }
    true
}

/// Smallest relay-constellation distance between transmit pairs in
/// different clusters at fade state `z`.
pub fn min_cluster_distance(map: &ClusterMap, c: &Constellation, z: FadeState) -> f64 {
    let sums = relay_sums(c, z.z());
    let mut best = f64::INFINITY;
    for i in 0..sums.len() {
        let li = map.table[i];
        for j in i + 1..sums.len() {
            if map.table[j] != li {
                best = best.min((sums[i] - sums[j]).norm_sqr());
            }
        }
    }
    best.sqrt()
}

/// Pure XOR network code, `label(a, b) = a ^ b`.
pub fn xor_map(m: usize) -> Result<ClusterMap> {
    validate_order(m)?;
    let table = (0..m * m).map(|i| (i / m) ^ (i % m)).collect();
    Ok(ClusterMap {
        m,
        table,
        num_clusters: m,
        removed_fades: Vec::new(),
    })
}

/// Two cells `(a, b)` that must share a label.
pub type CellMerge = ((usize, usize), (usize, usize));

/// A partition of the `M × M` transmit-pair cells into blocks that must share
/// one label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellPartition {
    m: usize,
    block_of: Vec<usize>,
    blocks: Vec<Vec<usize>>,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

impl CellPartition {
    /// The partition with every cell alone.
    pub fn singletons(m: usize) -> Self {
        Self::from_merges(m, &[]).expect("singletons are always consistent")
    }

    /// Finest partition merging each listed pair of cells `((a, b), (a', b'))`.
    /// Fails if a block would hold two cells of one row or one column.
    pub fn from_merges(m: usize, merges: &[CellMerge]) -> Result<Self> {
        let mut uf = UnionFind::new(m * m);
        for &((a0, b0), (a1, b1)) in merges {
            uf.union(a0 * m + b0, a1 * m + b1);
        }
        let mut block_index = vec![usize::MAX; m * m];
        let mut blocks: Vec<Vec<usize>> = Vec::new();
        let mut block_of = vec![0; m * m];
        for (cell, slot) in block_of.iter_mut().enumerate() {
            let root = uf.find(cell);
            if block_index[root] == usize::MAX {
                block_index[root] = blocks.len();
                blocks.push(Vec::new());
            }
            *slot = block_index[root];
            blocks[block_index[root]].push(cell);
        }
        for block in &blocks {
            for (i, &x) in block.iter().enumerate() {
                for &y in &block[i + 1..] {
                    if x / m == y / m || x % m == y % m {
                        return Err(Error::InconsistentPartition((x / m, x % m), (y / m, y % m)));
                    }
                }
            }
        }
        Ok(Self {
            m,
            block_of,
            blocks,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, a: usize, b: usize) -> usize {
        self.block_of[a * self.m + b]
    }
}

/// Merge constraints imposed by removing the given fade state.
pub fn constraints_from_fade(
    c: &Constellation,
    h: &crate::singular_fades::SingularFadeState,
) -> Result<CellPartition> {
    let pairs = colliding_pairs(c, h)?;
    let merges: Vec<_> = pairs.iter().map(|p| (p.a, p.b)).collect();
    CellPartition::from_merges(c.m(), &merges)
}

type LabelSet = u128;

/// Colours the blocks of `partial` with at most `target_labels` labels so
/// that no row or column repeats a label. Returns `None` if no such
/// completion exists.
///
/// The search always branches on the block with the fewest feasible labels
/// (ties to the larger block, then the lower index) and tries labels in
/// increasing order, so the result is deterministic. A label above the
/// highest one used so far is tried only once, since unused labels are
/// interchangeable. With exactly `M` labels the search also fails early when
/// some row or column has no place left for a label, and places a label
/// directly when a row or column has exactly one place left for it.
pub fn complete_map(partial: &CellPartition, target_labels: usize) -> Option<ClusterMap> {
    let m = partial.m;
    if target_labels < m || target_labels > LabelSet::BITS as usize {
        return None;
    }
    let mut lines = vec![Vec::new(); 2 * m];
    for (b, cells) in partial.blocks.iter().enumerate() {
        for &c in cells {
            lines[c / m].push(b);
            lines[m + c % m].push(b);
        }
    }
    let mut search = Completion {
        m,
        t: target_labels,
        blocks: &partial.blocks,
        lines,
        row_used: vec![0; m],
        col_used: vec![0; m],
        color: vec![usize::MAX; partial.blocks.len()],
    };
    if !search.solve(0) {
        return None;
    }
    let mut table = vec![0; m * m];
    for (b, cells) in partial.blocks.iter().enumerate() {
        for &cell in cells {
            table[cell] = search.color[b];
        }
    }
    let num_clusters = search.color.iter().max().map_or(0, |&c| c + 1);
    Some(ClusterMap {
        m,
        table,
        num_clusters,
        removed_fades: Vec::new(),
    })
}

struct Completion<'a> {
    m: usize,
    t: usize,
    blocks: &'a [Vec<usize>],
    /// Blocks meeting each row (`0..M`) and each column (`M..2M`).
    lines: Vec<Vec<usize>>,
    row_used: Vec<LabelSet>,
    col_used: Vec<LabelSet>,
    color: Vec<usize>,
}

impl Completion<'_> {
    fn forbidden(&self, block: usize) -> LabelSet {
        self.blocks[block].iter().fold(0, |acc, &c| {
            acc | self.row_used[c / self.m] | self.col_used[c % self.m]
        })
    }

    fn set(&mut self, block: usize, label: usize, on: bool) {
        let bit: LabelSet = 1 << label;
        for &c in &self.blocks[block] {
            let (r, col) = (c / self.m, c % self.m);
            if on {
                self.row_used[r] |= bit;
                self.col_used[col] |= bit;
            } else {
                self.row_used[r] &= !bit;
                self.col_used[col] &= !bit;
            }
        }
        self.color[block] = if on { label } else { usize::MAX };
    }

    fn solve(&mut self, max_used: usize) -> bool {
        let all: LabelSet = if self.t == LabelSet::BITS as usize {
            LabelSet::MAX
        } else {
            (1 << self.t) - 1
        };
        let mut free = vec![0; self.blocks.len()];
        let mut pick: Option<(usize, u32)> = None;
        for (b, slot) in free.iter_mut().enumerate() {
            if self.color[b] != usize::MAX {
                continue;
            }
            *slot = all & !self.forbidden(b);
            let n = slot.count_ones();
            if n == 0 {
                return false;
            }
            let better = match pick {
                None => true,
                Some((pb, pn)) => {
                    n < pn || (n == pn && self.blocks[b].len() > self.blocks[pb].len())
                }
            };
            if better {
                pick = Some((b, n));
            }
        }
        let Some((block, n_block)) = pick else {
            return true;
        };

        // With exactly M labels every row and column holds each label once.
        let mut line_pick: Option<(usize, usize, u32)> = None;
        if self.t == self.m {
            for (line, blocks) in self.lines.iter().enumerate() {
                let used = if line < self.m {
                    self.row_used[line]
                } else {
                    self.col_used[line - self.m]
                };
                for label in 0..self.t {
                    if used & (1 << label) != 0 {
                        continue;
                    }
                    let n = blocks
                        .iter()
                        .filter(|&&b| self.color[b] == usize::MAX && free[b] & (1 << label) != 0)
                        .count() as u32;
                    if n == 0 {
                        return false;
                    }
                    if label < max_used && line_pick.is_none_or(|(_, _, best)| n < best) {
                        line_pick = Some((line, label, n));
                    }
                }
            }
        }

        if let Some((line, label, n)) = line_pick {
            if n == 1 && n_block > 1 {
                let candidates: Vec<usize> = self.lines[line]
                    .iter()
                    .copied()
                    .filter(|&b| self.color[b] == usize::MAX && free[b] & (1 << label) != 0)
                    .collect();
                for b in candidates {
                    self.set(b, label, true);
                    if self.solve(max_used) {
                        return true;
                    }
                    self.set(b, label, false);
                }
                return false;
            }
        }

        let options = free[block];
        for label in 0..self.t.min(max_used + 1) {
            if options & (1 << label) == 0 {
                continue;
            }
            self.set(block, label, true);
            if self.solve(max_used.max(label + 1)) {
                return true;
            }
            self.set(block, label, false);
        }
        false
    }
}

/// Completion with the fewest labels in `M..=2M`.
pub fn minimal_completion(partial: &CellPartition) -> Option<ClusterMap> {
    let m = partial.m;
    (m..=2 * m).find_map(|t| complete_map(partial, t))
}

/// One map per singular fade state, deduplicated up to label renaming.
#[derive(Debug, Clone)]
pub struct MapSet {
    pub m: usize,
    pub maps: Vec<ClusterMap>,
    /// `assignment[fade_id]` indexes `maps`.
    pub assignment: Vec<usize>,
}

impl MapSet {
    pub fn map_for(&self, fade_id: usize) -> &ClusterMap {
        &self.maps[self.assignment[fade_id]]
    }
}

impl Serialize for MapSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        struct Assignment<'a>(&'a [usize]);
        impl Serialize for Assignment<'_> {
            fn serialize<S: Serializer>(
                &self,
                serializer: S,
            ) -> std::result::Result<S::Ok, S::Error> {
                let mut map = serializer.serialize_map(Some(self.0.len()))?;
                for (fade, idx) in self.0.iter().enumerate() {
                    map.serialize_entry(&fade.to_string(), idx)?;
                }
                map.end()
            }
        }
        let mut st = serializer.serialize_struct("MapSet", 3)?;
        st.serialize_field("m", &self.m)?;
        st.serialize_field("maps", &self.maps)?;
        st.serialize_field("assignment", &Assignment(&self.assignment))?;
        st.end()
    }
}

/// Builds a removing map for every singular fade state of `M`-PSK.
pub fn build_map_set(m: usize) -> Result<MapSet> {
    let c = crate::constellation::psk_points(m)?;
    let fades = enumerate_singular_fades(m)?;
    let collisions: Vec<Vec<CollidingPair>> = fades
        .iter()
        .map(|h| colliding_pairs(&c, h))
        .collect::<Result<_>>()?;

    let built: Vec<ClusterMap> = fades
        .par_iter()
        .zip(collisions.par_iter())
        .map(|(h, pairs)| {
            let merges: Vec<_> = pairs.iter().map(|p| (p.a, p.b)).collect();
            let partial = CellPartition::from_merges(m, &merges)?;
            minimal_completion(&partial)
                .map(|map| map.canonical())
                .ok_or(Error::CompletionFailed {
                    fade_id: h.id,
                    max_labels: 2 * m,
                })
        })
        .collect::<Result<_>>()?;

    let mut maps: Vec<ClusterMap> = Vec::new();
    let mut assignment = Vec::with_capacity(fades.len());
    for map in built {
        let idx = match maps.iter().position(|x| x.table == map.table) {
            Some(i) => i,
            None => {
                maps.push(map);
                maps.len() - 1
            }
        };
        assignment.push(idx);
    }
    for map in &mut maps {
        map.removed_fades = collisions
            .iter()
            .enumerate()
            .filter(|(_, pairs)| map.clusters_all(pairs))
            .map(|(id, _)| id)
            .collect();
    }
    Ok(MapSet {
        m,
        maps,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constellation::psk_points;
    use crate::singular_fades::find_fade;
    use num_complex::Complex64;

    fn rows(r: &[&[usize]]) -> ClusterMap {
        ClusterMap::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn xor_table() {
        let x = xor_map(4).unwrap();
        assert_eq!(x.label(1, 2), 3);
        assert!(exclusive_law_holds(&x));
        assert!(exclusive_law_holds(&xor_map(8).unwrap()));
    }

    #[test]
    fn exclusive_law_examples() {
        assert!(!exclusive_law_holds(&rows(&[&[0, 0], &[0, 0]])));
        let good = rows(&[&[0, 1, 2, 3], &[1, 0, 3, 2], &[2, 3, 0, 1], &[3, 2, 1, 0]]);
        assert!(exclusive_law_holds(&good));
        let bad_col = rows(&[&[0, 1], &[0, 1]]);
        assert!(!exclusive_law_holds(&bad_col));
    }

    #[test]
    fn inversion_uses_side_information() {
        let x = xor_map(8).unwrap();
        for a in 0..8 {
            for b in 0..8 {
                let l = x.label(a, b);
                assert_eq!(x.invert_at_a(a, l), Some(b));
                assert_eq!(x.invert_at_b(b, l), Some(a));
            }
        }
    }

    #[test]
    fn qpsk_constraints() {
        let c = psk_points(4).unwrap();
        let fades = enumerate_singular_fades(4).unwrap();
        let id = find_fade(&fades, Complex64::new(0.5, 0.5), 1e-9).unwrap();
        let p = constraints_from_fade(&c, &fades[id]).unwrap();
        assert_eq!(p.blocks().len(), 12);
        assert_eq!(p.blocks().iter().filter(|b| b.len() == 2).count(), 4);
        for b in p.blocks() {
            for (i, &x) in b.iter().enumerate() {
                for &y in &b[i + 1..] {
                    assert_ne!(x / 4, y / 4);
                }
            }
        }
    }

    #[test]
    fn inconsistent_merge_rejected() {
        assert!(matches!(
            CellPartition::from_merges(4, &[((0, 0), (0, 1))]),
            Err(Error::InconsistentPartition(..))
        ));
        // Transitively: (0,0)~(1,1)~(0,2) puts row 0 twice.
        assert!(CellPartition::from_merges(4, &[((0, 0), (1, 1)), ((1, 1), (0, 2))]).is_err());
    }

    #[test]
    fn empty_partition_completes_to_latin_square() {
        for m in [2, 4, 8] {
            let map = complete_map(&CellPartition::singletons(m), m).unwrap();
            assert_eq!(map.num_clusters(), m);
            assert!(exclusive_law_holds(&map));
        }
    }

    /// Rows 0 and 1 are forced to be a cyclic shift of each other on the
    /// first `M - 1` columns, which leaves the last column of both rows
    /// needing the same label.
    fn shifted_rows(m: usize) -> CellPartition {
        let merges: Vec<_> = (0..m - 1)
            .map(|c| ((0, c), (1, (c + 1) % (m - 1))))
            .collect();
        CellPartition::from_merges(m, &merges).unwrap()
    }

    #[test]
    fn adversarial_partition_needs_extra_label() {
        for m in [4, 8] {
            let p = shifted_rows(m);
            assert!(complete_map(&p, m).is_none());
            let map = minimal_completion(&p).unwrap();
            assert_eq!(map.num_clusters(), m + 1);
            assert!(exclusive_law_holds(&map));
            for c in 0..m - 1 {
                assert_eq!(map.label(0, c), map.label(1, (c + 1) % (m - 1)));
            }
        }
    }

    #[test]
    fn completion_respects_blocks() {
        let c = psk_points(4).unwrap();
        let fades = enumerate_singular_fades(4).unwrap();
        for h in &fades {
            let p = constraints_from_fade(&c, h).unwrap();
            let map = minimal_completion(&p).unwrap();
            assert!(exclusive_law_holds(&map));
            for block in p.blocks() {
                let l = map.table()[block[0]];
                assert!(block.iter().all(|&cell| map.table()[cell] == l));
            }
        }
    }

    #[test]
    fn canonical_is_idempotent() {
        let m = rows(&[&[3, 1, 0, 2], &[1, 3, 2, 0], &[0, 2, 3, 1], &[2, 0, 1, 3]]);
        let c1 = m.canonical();
        assert_eq!(c1.rows()[0], vec![0, 1, 2, 3]);
        assert_eq!(c1.canonical(), c1);
    }

    #[test]
    fn cluster_distance_examples() {
        let c = psk_points(4).unwrap();
        let x = xor_map(4).unwrap();
        let d = min_cluster_distance(&x, &c, FadeState::new(Complex64::new(3.0, 0.0)));
        assert!((d - 2f64.sqrt()).abs() < 1e-9);
        let d1 = min_cluster_distance(&x, &c, FadeState::new(Complex64::new(1.0, 0.0)));
        assert!(d1 > 0.1, "{d1}");

        // A latin square that splits a colliding pair of h = (1+j)/2.
        let fades = enumerate_singular_fades(4).unwrap();
        let id = find_fade(&fades, Complex64::new(0.5, 0.5), 1e-9).unwrap();
        let pairs = colliding_pairs(&c, &fades[id]).unwrap();
        let splitter = [
            x.clone(),
            rows(&[&[0, 1, 2, 3], &[1, 2, 3, 0], &[2, 3, 0, 1], &[3, 0, 1, 2]]),
        ]
        .into_iter()
        .find(|m| !m.clusters_all(&pairs))
        .unwrap();
        let d0 = min_cluster_distance(&splitter, &c, FadeState::new(fades[id].value));
        assert!(d0 < 1e-9);
    }

    #[test]
    fn xor_leaves_some_qpsk_fades() {
        let c = psk_points(4).unwrap();
        let x = xor_map(4).unwrap();
        let fades = enumerate_singular_fades(4).unwrap();
        let zero = fades
            .iter()
            .filter(|h| min_cluster_distance(&x, &c, FadeState::new(h.value)) < 1e-9)
            .count();
        assert!(zero > 0 && zero < fades.len(), "{zero}");
    }

    #[test]
    fn qpsk_map_set() {
        let set = build_map_set(4).unwrap();
        assert_eq!(set.assignment.len(), 12);
        assert!(set.maps.len() <= 12);
        let json = serde_json::to_value(&set).unwrap();
        assert_eq!(json["assignment"]["11"], set.assignment[11]);
        assert_eq!(json["maps"][0]["table"].as_array().unwrap().len(), 4);
    }
}
