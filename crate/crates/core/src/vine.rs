//! Regular-vine structures: trees of pair-copula edges with derived
//! conditioned/conditioning labels, validation, JSON and Graphviz output,
//! and the variable-elimination plan used for sampling and conditional
//! evaluation.
//!
//! A vine on d variables has trees T_1..T_{d-1}. Nodes of T_1 are the
//! variables; nodes of T_l for l >= 2 are the edges of T_{l-1}. Two nodes
//! of T_l may only be joined if, as edges of T_{l-1}, they share an
//! endpoint (the proximity condition). Each edge then carries a label
//! (i, j | D): the conditioned pair is the symmetric difference of the
//! joined edges' constraint sets, the conditioning set their intersection.
//!
//! Variables are 0-based here; serialized labels are 1-based.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// One edge of a vine tree. At tree level 1 `left`/`right` are variable
/// indices; at level l >= 2 they index edges of the previous tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VineEdge {
    pub left: usize,
    pub right: usize,
    /// Conditioned pair (i, j), i < j, derived from the tree structure.
    pub conditioned: (usize, usize),
    /// Conditioning set, sorted ascending, derived from the tree structure.
    pub conditioning: Vec<usize>,
}

impl VineEdge {
    /// All variables the edge constrains: conditioned pair plus
    /// conditioning set, as a bitmask.
    pub(crate) fn constraint_mask(&self) -> u64 {
        let mut m = (1u64 << self.conditioned.0) | (1u64 << self.conditioned.1);
        for &v in &self.conditioning {
            m |= 1u64 << v;
        }
        m
    }

    /// 1-based label like `1,4|2,3`.
    pub fn label(&self) -> String {
        let mut s = format!("{},{}", self.conditioned.0 + 1, self.conditioned.1 + 1);
        if !self.conditioning.is_empty() {
            s.push('|');
            let parts: Vec<String> = self.conditioning.iter().map(|v| (v + 1).to_string()).collect();
            s.push_str(&parts.join(","));
        }
        s
    }
}

/// A regular vine: d - 1 trees whose level-l tree has d - l edges.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularVine {
    d: usize,
    trees: Vec<Vec<VineEdge>>,
}

/// Where an edge side (one conditioned variable) takes its conditional
/// pseudo-observations from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideSource {
    /// Ground level: the variable's own pseudo-observations.
    Variable(usize),
    /// A parent edge's conditional output for the same variable.
    Parent { level: usize, index: usize, side: usize },
}

/// Variable-elimination plan: `order[k]` is sampled k-th, inverted through
/// the edges in `chains[k]` (levels 1..k, ascending).
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    pub order: Vec<usize>,
    pub chains: Vec<Vec<(usize, usize)>>,
}

impl RegularVine {
    /// Build a vine from its skeleton: `levels[0]` holds variable pairs,
    /// `levels[l]` for l >= 1 holds pairs of edge indices into the previous
    /// level. Labels are derived; the full structure is validated.
    pub fn from_skeleton(d: usize, levels: &[Vec<(usize, usize)>]) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidStructure(format!("a vine needs d >= 2, got {d}")));
        }
        if d > 64 {
            return Err(Error::InvalidStructure("dimensions above 64 are not supported".into()));
        }
        if levels.len() != d - 1 {
            return Err(Error::InvalidStructure(format!(
                "expected {} tree levels, got {}",
                d - 1,
                levels.len()
            )));
        }
        let mut trees: Vec<Vec<VineEdge>> = Vec::with_capacity(d - 1);
        for (l, level) in levels.iter().enumerate() {
            let mut tree = Vec::with_capacity(level.len());
            for &(a, b) in level {
                let edge = if l == 0 {
                    if a >= d || b >= d || a == b {
                        return Err(Error::InvalidStructure(format!(
                            "ground edge ({a}, {b}) is not a pair of distinct variables below {d}"
                        )));
                    }
                    VineEdge {
                        left: a,
                        right: b,
                        conditioned: (a.min(b), a.max(b)),
                        conditioning: vec![],
                    }
                } else {
                    let prev = &trees[l - 1];
                    if a >= prev.len() || b >= prev.len() || a == b {
                        return Err(Error::InvalidStructure(format!(
                            "edge ({a}, {b}) at level {} does not join two distinct previous edges",
                            l + 1
                        )));
                    }
                    derive_label(&prev[a], &prev[b], a, b, l + 1)?
                };
                tree.push(edge);
            }
            trees.push(tree);
        }
        let vine = Self { d, trees };
        let violations = vine.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidStructure(violations.join("; ")));
        }
        Ok(vine)
    }

    /// Number of variables.
    pub fn dimension(&self) -> usize {
        self.d
    }

    /// Tree levels, outermost index = level - 1.
    pub fn trees(&self) -> &[Vec<VineEdge>] {
        &self.trees
    }

    pub fn edge(&self, level: usize, index: usize) -> &VineEdge {
        &self.trees[level][index]
    }

    /// Total number of edges, d(d-1)/2.
    pub fn edge_count(&self) -> usize {
        self.d * (self.d - 1) / 2
    }

    /// Locate an edge by its 0-based label.
    pub fn find_edge(&self, i: usize, j: usize, conditioning: &[usize]) -> Option<(usize, usize)> {
        let pair = (i.min(j), i.max(j));
        let mut v: Vec<usize> = conditioning.to_vec();
        v.sort_unstable();
        let level = v.len();
        if level >= self.trees.len() + 1 {
            return None;
        }
        self.trees[level]
            .iter()
            .position(|e| e.conditioned == pair && e.conditioning == v)
            .map(|idx| (level, idx))
    }

    /// Structural diagnostics; an empty list means the vine is regular.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let d = self.d;
        if self.trees.len() != d - 1 {
            out.push(format!("expected {} levels, found {}", d - 1, self.trees.len()));
            return out;
        }
        for (l, tree) in self.trees.iter().enumerate() {
            let nodes = d - l; // node count of T_{l+1}
            if tree.len() != nodes - 1 {
                out.push(format!("level {} needs {} edges, found {}", l + 1, nodes - 1, tree.len()));
                continue;
            }
            // spanning-tree check over this level's nodes
            let mut uf = UnionFind::new(nodes);
            for e in tree {
                if e.left >= nodes || e.right >= nodes || e.left == e.right {
                    out.push(format!("level {}: edge {:?} has invalid endpoints", l + 1, (e.left, e.right)));
                    continue;
                }
                if !uf.union(e.left, e.right) {
                    out.push(format!("level {}: edge {} closes a cycle", l + 1, e.label()));
                }
            }
            if !uf.connected() {
                out.push(format!("level {} does not span its nodes", l + 1));
            }
            for e in tree {
                if l > 0 {
                    let prev = &self.trees[l - 1];
                    let (f, g) = (&prev[e.left], &prev[e.right]);
                    if !shares_endpoint(f, g) {
                        out.push(format!(
                            "level {}: edge {} joins non-adjacent edges (proximity violated)",
                            l + 1,
                            e.label()
                        ));
                        continue;
                    }
                    match derive_label(f, g, e.left, e.right, l + 1) {
                        Ok(expect) => {
                            if expect.conditioned != e.conditioned || expect.conditioning != e.conditioning {
                                out.push(format!(
                                    "level {}: stored label {} disagrees with derived {}",
                                    l + 1,
                                    e.label(),
                                    expect.label()
                                ));
                            }
                        }
                        Err(err) => out.push(err.to_string()),
                    }
                } else if e.conditioned != (e.left.min(e.right), e.left.max(e.right))
                    || !e.conditioning.is_empty()
                {
                    out.push(format!("level 1: edge {} has a non-ground label", e.label()));
                }
            }
        }
        // every label must be unique
        let mut seen = std::collections::HashSet::new();
        for tree in &self.trees {
            for e in tree {
                if !seen.insert((e.conditioned, e.conditioning.clone())) {
                    out.push(format!("duplicate label {}", e.label()));
                }
            }
        }
        out
    }

    /// Recompute all labels from the skeleton (idempotent on valid vines).
    pub fn derive_labels(&mut self) -> Result<()> {
        for l in 0..self.trees.len() {
            for k in 0..self.trees[l].len() {
                let e = &self.trees[l][k];
                let fresh = if l == 0 {
                    VineEdge {
                        left: e.left,
                        right: e.right,
                        conditioned: (e.left.min(e.right), e.left.max(e.right)),
                        conditioning: vec![],
                    }
                } else {
                    let (a, b) = (e.left, e.right);
                    let prev = &self.trees[l - 1];
                    derive_label(&prev[a], &prev[b], a, b, l + 1)?
                };
                self.trees[l][k] = fresh;
            }
        }
        Ok(())
    }

    /// D-vine: T_1 is the path visiting `order`; every higher tree is the
    /// induced path.
    pub fn dvine(order: &[usize]) -> Result<Self> {
        let d = order.len();
        check_permutation(order)?;
        let mut levels: Vec<Vec<(usize, usize)>> = Vec::with_capacity(d - 1);
        levels.push((0..d - 1).map(|k| (order[k], order[k + 1])).collect());
        for l in 1..d - 1 {
            levels.push((0..d - 1 - l).map(|k| (k, k + 1)).collect());
        }
        Self::from_skeleton(d, &levels)
    }

    /// C-vine: T_1 is the star rooted at `order[0]`; each higher tree is
    /// the star rooted at the edge that contains all earlier roots.
    pub fn cvine(order: &[usize]) -> Result<Self> {
        let d = order.len();
        check_permutation(order)?;
        let mut levels: Vec<Vec<(usize, usize)>> = Vec::with_capacity(d - 1);
        levels.push((1..d).map(|k| (order[0], order[k])).collect());
        for l in 1..d - 1 {
            levels.push((1..d - l).map(|k| (0, k)).collect());
        }
        Self::from_skeleton(d, &levels)
    }

    /// Fixed five-variable vine that is neither a path nor a star
    /// (T_1 = 1-2, 2-3, 3-4, 3-5), used as the non-classified test
    /// structure.
    pub fn branching_five() -> Self {
        let levels = vec![
            vec![(0, 1), (1, 2), (2, 3), (2, 4)],
            vec![(0, 1), (1, 2), (2, 3)],
            vec![(0, 1), (1, 2)],
            vec![(0, 1)],
        ];
        Self::from_skeleton(5, &levels).expect("fixed structure is a regular vine")
    }

    /// Elimination plan for sampling / conditional evaluation: repeatedly
    /// peel a conditioned variable of the top surviving edge; its chain is
    /// the one surviving edge per level whose conditioned pair contains it.
    pub fn sampling_plan(&self) -> Result<SamplingPlan> {
        let d = self.d;
        let mut alive: Vec<Vec<bool>> = self.trees.iter().map(|t| vec![true; t.len()]).collect();
        let mut order = vec![0usize; d];
        let mut chains: Vec<Vec<(usize, usize)>> = vec![Vec::new(); d];
        let mut removed = 0u64;

        for step in (1..d).rev() {
            // the highest level still alive at this step
            let top_level = step - 1;
            let top_idx = alive[top_level]
                .iter()
                .position(|&a| a)
                .ok_or_else(|| Error::InvalidStructure("no surviving top edge while peeling".into()))?;
            if alive[top_level].iter().filter(|&&a| a).count() != 1 {
                return Err(Error::InvalidStructure("top level must have exactly one surviving edge".into()));
            }
            // peel the larger conditioned index for determinism
            let x = self.trees[top_level][top_idx].conditioned.1;
            let xbit = 1u64 << x;
            let mut chain = Vec::with_capacity(step);
            for l in 0..=top_level {
                let mut found: Option<usize> = None;
                for (k, e) in self.trees[l].iter().enumerate() {
                    if !alive[l][k] {
                        continue;
                    }
                    if e.constraint_mask() & xbit != 0 {
                        if e.conditioned.0 != x && e.conditioned.1 != x {
                            return Err(Error::InvalidStructure(format!(
                                "variable {} appears in a conditioning set while being peeled",
                                x + 1
                            )));
                        }
                        if found.replace(k).is_some() {
                            return Err(Error::InvalidStructure(format!(
                                "variable {} appears in two surviving edges at level {}",
                                x + 1,
                                l + 1
                            )));
                        }
                    }
                }
                let k = found.ok_or_else(|| {
                    Error::InvalidStructure(format!(
                        "variable {} missing from surviving level {}",
                        x + 1,
                        l + 1
                    ))
                })?;
                alive[l][k] = false;
                chain.push((l, k));
            }
            order[step] = x;
            chains[step] = chain;
            removed |= xbit;
        }
        let last = (0..d).find(|v| removed & (1 << v) == 0).expect("one variable remains");
        order[0] = last;
        Ok(SamplingPlan { order, chains })
    }

    /// Which parent output feeds the given conditioned side of an edge.
    pub fn side_source(&self, level: usize, index: usize, side: usize) -> SideSource {
        let e = &self.trees[level][index];
        let var = if side == 0 { e.conditioned.0 } else { e.conditioned.1 };
        if level == 0 {
            return SideSource::Variable(var);
        }
        let bit = 1u64 << var;
        let prev = &self.trees[level - 1];
        for parent_idx in [e.left, e.right] {
            let p = &prev[parent_idx];
            if p.constraint_mask() & bit != 0 {
                let pside = if p.conditioned.0 == var {
                    0
                } else if p.conditioned.1 == var {
                    1
                } else {
                    unreachable!("conditioned variable must sit in its parent's conditioned pair");
                };
                return SideSource::Parent { level: level - 1, index: parent_idx, side: pside };
            }
        }
        unreachable!("one parent must constrain each conditioned variable");
    }

    /// JSON representation with 1-based labels and deterministic ordering.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&VineDto::from(self)).expect("vine serialization cannot fail")
    }

    /// Parse and validate the JSON representation.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let dto: VineDto = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        dto.into_vine()
    }

    /// Graphviz rendering of the ground tree; `weights[k]` (one per ground
    /// edge, in tree order) controls line thickness.
    pub fn ground_tree_dot(&self, weights: Option<&[f64]>, names: Option<&[String]>) -> String {
        let mut s = String::from("graph vine_ground_tree {\n  node [shape=circle];\n");
        for v in 0..self.d {
            let name = names
                .and_then(|n| n.get(v).cloned())
                .unwrap_or_else(|| (v + 1).to_string());
            s.push_str(&format!("  n{} [label=\"{}\"];\n", v, name));
        }
        for (k, e) in self.trees[0].iter().enumerate() {
            let w = weights.and_then(|w| w.get(k).copied());
            let pen = w.map(|w| 0.5 + 4.0 * w.abs()).unwrap_or(1.0);
            let label = w.map(|w| format!(" label=\"{:.2}\"", w)).unwrap_or_default();
            s.push_str(&format!(
                "  n{} -- n{} [penwidth={:.3}{}];\n",
                e.conditioned.0, e.conditioned.1, pen, label
            ));
        }
        s.push_str("}\n");
        s
    }
}

fn check_permutation(order: &[usize]) -> Result<()> {
    let d = order.len();
    if d < 2 {
        return Err(Error::InvalidStructure("need at least 2 variables".into()));
    }
    let mut seen = vec![false; d];
    for &v in order {
        if v >= d || seen[v] {
            return Err(Error::InvalidStructure(format!(
                "order {:?} is not a permutation of 0..{d}",
                order
            )));
        }
        seen[v] = true;
    }
    Ok(())
}

pub(crate) fn shares_endpoint(f: &VineEdge, g: &VineEdge) -> bool {
    f.left == g.left || f.left == g.right || f.right == g.left || f.right == g.right
}

pub(crate) fn derive_label(f: &VineEdge, g: &VineEdge, a: usize, b: usize, level: usize) -> Result<VineEdge> {
    let (mf, mg) = (f.constraint_mask(), g.constraint_mask());
    let sym = mf ^ mg;
    let inter = mf & mg;
    if sym.count_ones() != 2 {
        return Err(Error::InvalidStructure(format!(
            "joining {} and {} at level {level} leaves {} conditioned variables (needs exactly 2)",
            f.label(),
            g.label(),
            sym.count_ones()
        )));
    }
    let i = sym.trailing_zeros() as usize;
    let j = (63 - sym.leading_zeros()) as usize;
    let mut conditioning: Vec<usize> = (0..64).filter(|k| inter & (1u64 << k) != 0).collect();
    conditioning.sort_unstable();
    Ok(VineEdge { left: a, right: b, conditioned: (i, j), conditioning })
}

struct UnionFind {
    parent: Vec<usize>,
    count: usize,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), count: n }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        self.count -= 1;
        true
    }

    fn connected(&self) -> bool {
        self.count == 1
    }
}

// --- serialization -----------------------------------------------------

#[derive(Serialize, Deserialize)]
struct EdgeDto {
    i: usize,
    j: usize,
    v: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct VineDto {
    d: usize,
    trees: Vec<Vec<EdgeDto>>,
}

impl From<&RegularVine> for VineDto {
    fn from(vine: &RegularVine) -> Self {
        let trees = vine
            .trees
            .iter()
            .map(|tree| {
                let mut dtos: Vec<EdgeDto> = tree
                    .iter()
                    .map(|e| EdgeDto {
                        i: e.conditioned.0 + 1,
                        j: e.conditioned.1 + 1,
                        v: e.conditioning.iter().map(|x| x + 1).collect(),
                    })
                    .collect();
                dtos.sort_by_key(|e| (e.i, e.j));
                dtos
            })
            .collect();
        VineDto { d: vine.d, trees }
    }
}

impl VineDto {
    fn into_vine(self) -> Result<RegularVine> {
        let d = self.d;
        if d < 2 || d > 64 {
            return Err(Error::InvalidStructure(format!("d = {d} out of supported range 2..=64")));
        }
        if self.trees.len() != d - 1 {
            return Err(Error::InvalidStructure(format!(
                "expected {} levels, found {}",
                d - 1,
                self.trees.len()
            )));
        }
        let mut trees: Vec<Vec<VineEdge>> = Vec::with_capacity(d - 1);
        for (l, level) in self.trees.iter().enumerate() {
            let mut tree: Vec<VineEdge> = Vec::with_capacity(level.len());
            for dto in level {
                if dto.i == 0 || dto.j == 0 || dto.v.iter().any(|&x| x == 0) {
                    return Err(Error::Parse("labels are 1-based; found index 0".into()));
                }
                let (i, j) = (dto.i - 1, dto.j - 1);
                let v: Vec<usize> = dto.v.iter().map(|&x| x - 1).collect();
                if i >= d || j >= d || i == j || v.iter().any(|&x| x >= d) {
                    return Err(Error::InvalidStructure(format!(
                        "label {},{} | {:?} uses indices outside 1..={d}",
                        dto.i, dto.j, dto.v
                    )));
                }
                let mut sorted = v.clone();
                sorted.sort_unstable();
                sorted.dedup();
                if sorted.len() != v.len() {
                    return Err(Error::InvalidStructure("conditioning set has repeats".into()));
                }
                if sorted.contains(&i) || sorted.contains(&j) {
                    return Err(Error::InvalidStructure(format!(
                        "conditioning set of {},{} overlaps its conditioned pair",
                        dto.i, dto.j
                    )));
                }
                if sorted.len() != l {
                    return Err(Error::InvalidStructure(format!(
                        "edge {},{} with {} conditioning variables placed at level {}",
                        dto.i,
                        dto.j,
                        sorted.len(),
                        l + 1
                    )));
                }
                let conditioned = (i.min(j), i.max(j));
                let (left, right) = if l == 0 {
                    (conditioned.0, conditioned.1)
                } else {
                    let mask = {
                        let mut m = (1u64 << i) | (1u64 << j);
                        for &x in &sorted {
                            m |= 1 << x;
                        }
                        m
                    };
                    find_parents(&trees[l - 1], mask).ok_or_else(|| {
                        Error::InvalidStructure(format!(
                            "no parent pair at level {} composes edge {},{} | {:?}",
                            l, dto.i, dto.j, dto.v
                        ))
                    })?
                };
                tree.push(VineEdge { left, right, conditioned, conditioning: sorted });
            }
            trees.push(tree);
        }
        let vine = RegularVine { d, trees };
        let violations = vine.validate();
        if !violations.is_empty() {
            return Err(Error::InvalidStructure(violations.join("; ")));
        }
        Ok(vine)
    }
}

fn find_parents(prev: &[VineEdge], mask: u64) -> Option<(usize, usize)> {
    for a in 0..prev.len() {
        let ma = prev[a].constraint_mask();
        if ma & mask != ma {
            continue;
        }
        for b in a + 1..prev.len() {
            let mb = prev[b].constraint_mask();
            if mb & mask == mb && ma | mb == mask && shares_endpoint(&prev[a], &prev[b]) {
                return Some((a, b));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dvine_labels_match_hand_derivation() {
        let v = RegularVine::dvine(&[0, 1, 2, 3, 4]).unwrap();
        assert_eq!(v.edge_count(), 10);
        let labels: Vec<Vec<String>> = v
            .trees()
            .iter()
            .map(|t| t.iter().map(|e| e.label()).collect())
            .collect();
        assert_eq!(labels[0], vec!["1,2", "2,3", "3,4", "4,5"]);
        assert_eq!(labels[1], vec!["1,3|2", "2,4|3", "3,5|4"]);
        assert_eq!(labels[2], vec!["1,4|2,3", "2,5|3,4"]);
        assert_eq!(labels[3], vec!["1,5|2,3,4"]);
        assert!(v.validate().is_empty());
    }

    #[test]
    fn cvine_labels_match_hand_derivation() {
        let v = RegularVine::cvine(&[0, 1, 2, 3]).unwrap();
        let labels: Vec<Vec<String>> = v
            .trees()
            .iter()
            .map(|t| t.iter().map(|e| e.label()).collect())
            .collect();
        assert_eq!(labels[0], vec!["1,2", "1,3", "1,4"]);
        assert_eq!(labels[1], vec!["2,3|1", "2,4|1"]);
        assert_eq!(labels[2], vec!["3,4|1,2"]);
    }

    #[test]
    fn branching_five_is_regular_and_not_classified() {
        let v = RegularVine::branching_five();
        assert!(v.validate().is_empty());
        let labels: Vec<String> = v.trees()[2].iter().map(|e| e.label()).collect();
        assert_eq!(labels, vec!["1,4|2,3", "2,5|3,4"]);
        assert_eq!(v.trees()[3][0].label(), "1,5|2,3,4");
        // ground tree has a degree-3 node but no degree-4 node
        let mut deg = [0usize; 5];
        for e in &v.trees()[0] {
            deg[e.conditioned.0] += 1;
            deg[e.conditioned.1] += 1;
        }
        assert_eq!(*deg.iter().max().unwrap(), 3);
    }

    #[test]
    fn proximity_violation_is_rejected() {
        // T_2 tries to join the two end edges of the path 1-2-3-4, which
        // share no variable.
        let levels = vec![vec![(0, 1), (1, 2), (2, 3)], vec![(0, 2), (1, 2)], vec![(0, 1)]];
        let err = RegularVine::from_skeleton(4, &levels).unwrap_err();
        assert!(matches!(err, Error::InvalidStructure(_)));
    }

    #[test]
    fn cycles_and_disconnection_are_rejected() {
        let levels = vec![vec![(0, 1), (1, 2), (0, 2)], vec![(0, 1)], vec![(0, 0)]];
        assert!(RegularVine::from_skeleton(4, &levels).is_err());
    }

    #[test]
    fn totals_and_level_sizes() {
        for d in 2..=7 {
            let order: Vec<usize> = (0..d).collect();
            let v = RegularVine::dvine(&order).unwrap();
            assert_eq!(v.edge_count(), d * (d - 1) / 2);
            for (l, tree) in v.trees().iter().enumerate() {
                assert_eq!(tree.len(), d - 1 - l);
            }
        }
    }

    #[test]
    fn derive_labels_is_idempotent() {
        let mut v = RegularVine::branching_five();
        let before = v.clone();
        v.derive_labels().unwrap();
        assert_eq!(before, v);
    }

    #[test]
    fn json_round_trip_preserves_structure() {
        for vine in [
            RegularVine::dvine(&[2, 0, 1, 3]).unwrap(),
            RegularVine::cvine(&[1, 3, 0, 2, 4]).unwrap(),
            RegularVine::branching_five(),
        ] {
            let s = vine.to_json_string();
            let back = RegularVine::from_json_str(&s).unwrap();
            // labels survive even if within-level order was normalized
            let labels = |v: &RegularVine| -> Vec<std::collections::BTreeSet<String>> {
                v.trees()
                    .iter()
                    .map(|t| t.iter().map(|e| e.label()).collect())
                    .collect()
            };
            assert_eq!(labels(&vine), labels(&back));
            assert!(back.validate().is_empty());
        }
    }

    #[test]
    fn json_rejects_overlapping_conditioning() {
        let s = r#"{"d":3,"trees":[[{"i":1,"j":2,"v":[]},{"i":2,"j":3,"v":[]}],[{"i":1,"j":3,"v":[3]}]]}"#;
        assert!(RegularVine::from_json_str(s).is_err());
    }

    #[test]
    fn json_rejects_bad_level_count() {
        let s = r#"{"d":3,"trees":[[{"i":1,"j":2,"v":[]},{"i":2,"j":3,"v":[]}]]}"#;
        assert!(RegularVine::from_json_str(s).is_err());
    }

    #[test]
    fn sampling_plan_covers_every_edge_once() {
        for vine in [
            RegularVine::dvine(&[0, 1, 2, 3, 4]).unwrap(),
            RegularVine::cvine(&[0, 1, 2, 3, 4]).unwrap(),
            RegularVine::branching_five(),
        ] {
            let plan = vine.sampling_plan().unwrap();
            assert_eq!(plan.order.len(), 5);
            let mut seen_vars: Vec<usize> = plan.order.clone();
            seen_vars.sort_unstable();
            assert_eq!(seen_vars, vec![0, 1, 2, 3, 4]);
            let mut seen_edges = std::collections::HashSet::new();
            for (k, chain) in plan.chains.iter().enumerate() {
                assert_eq!(chain.len(), k);
                for (pos, &(l, _)) in chain.iter().enumerate() {
                    assert_eq!(l, pos, "chain must ascend levels 1..k");
                }
                for &e in chain {
                    assert!(seen_edges.insert(e), "edge {:?} peeled twice", e);
                }
                // the peeled variable sits in the conditioned pair of every
                // chain edge
                let x = plan.order[k];
                for &(l, idx) in chain {
                    let e = vine.edge(l, idx);
                    assert!(e.conditioned.0 == x || e.conditioned.1 == x);
                }
            }
            assert_eq!(seen_edges.len(), vine.edge_count());
        }
    }

    #[test]
    fn side_source_points_to_parent_with_matching_constraint() {
        let vine = RegularVine::branching_five();
        for (l, tree) in vine.trees().iter().enumerate() {
            for (k, e) in tree.iter().enumerate() {
                for side in 0..2 {
                    let var = if side == 0 { e.conditioned.0 } else { e.conditioned.1 };
                    match vine.side_source(l, k, side) {
                        SideSource::Variable(v) => {
                            assert_eq!(l, 0);
                            assert_eq!(v, var);
                        }
                        SideSource::Parent { level, index, side: pside } => {
                            assert_eq!(level, l - 1);
                            let p = vine.edge(level, index);
                            let pvar =
                                if pside == 0 { p.conditioned.0 } else { p.conditioned.1 };
                            assert_eq!(pvar, var);
                            // parent constrains exactly the conditioning set plus the variable
                            let mut expect = e.conditioning.clone();
                            expect.push(var);
                            expect.sort_unstable();
                            let mut got: Vec<usize> = (0..64)
                                .filter(|b| p.constraint_mask() & (1u64 << b) != 0)
                                .collect();
                            got.sort_unstable();
                            assert_eq!(got, expect);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dot_output_mentions_all_ground_edges() {
        let vine = RegularVine::dvine(&[0, 1, 2]).unwrap();
        let dot = vine.ground_tree_dot(Some(&[0.9, -0.2]), None);
        assert!(dot.contains("n0 -- n1"));
        assert!(dot.contains("n1 -- n2"));
        assert!(dot.contains("penwidth=4.100"));
        assert!(dot.contains("penwidth=1.300"));
    }

    #[test]
    fn find_edge_by_label() {
        let vine = RegularVine::dvine(&[0, 1, 2, 3]).unwrap();
        assert_eq!(vine.find_edge(0, 3, &[1, 2]), Some((2, 0)));
        assert_eq!(vine.find_edge(3, 0, &[2, 1]), Some((2, 0)));
        assert_eq!(vine.find_edge(0, 2, &[]), None);
    }
}
