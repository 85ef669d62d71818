//! Merged-synonym tag hierarchy and weighted semantic paths.
//!
//! Every tag is a node; synonyms collapse into one node whose canonical name
//! is the first listed name. The hierarchy is a forest. Each leaf yields one
//! semantic path, walked from the leaf through its parent chain to a root.
//!
//! Node layer counts up from 0 at leaves (height of the subtree), and the
//! tag weight decreases with both layer and descendant count, so more
//! specific tags weigh more. The weight rule is pluggable via [`WeightFn`].
//!
//! Hierarchy file format, one record per node:
//!
//! ```text
//! id<TAB>canonical|syn1|syn2<TAB>parent_id
//! ```
//!
//! with `parent_id = -1` for roots. Blank lines and lines starting with `#`
//! are ignored. Ids must be exactly `0..n`.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::subset::{PathId, TagId, TagSubset};

/// Maps (layer, descendant count) to a positive tag weight.
pub type WeightFn = fn(usize, usize) -> f64;

/// `1 / ((layer + 1) * (descendants + 1))`.
pub fn default_weight(layer: usize, descendants: usize) -> f64 {
    1.0 / ((layer as f64 + 1.0) * (descendants as f64 + 1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TagNode {
    pub id: TagId,
    pub canonical_name: String,
    /// Alternate names, not including the canonical one.
    pub synonyms: Vec<String>,
    pub layer: usize,
    pub descendant_count: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemanticPath {
    pub path_id: PathId,
    /// Leaf first, root last.
    pub node_ids: Vec<TagId>,
}

impl SemanticPath {
    pub fn leaf(&self) -> TagId {
        self.node_ids[0]
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }
}

/// A tag declaration: canonical name plus synonyms merged into the same node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagSpec {
    pub name: String,
    pub synonyms: Vec<String>,
}

impl TagSpec {
    pub fn new(name: &str) -> Self {
        TagSpec {
            name: name.to_string(),
            synonyms: Vec::new(),
        }
    }

    pub fn with_synonyms(name: &str, synonyms: &[&str]) -> Self {
        TagSpec {
            name: name.to_string(),
            synonyms: synonyms.iter().map(|s| s.to_string()).collect(),
        }
    }
}

/// The complete family of distinct tag subsets derivable from one image's
/// ground-truth paths.
#[derive(Clone, Debug, Default)]
pub struct GroundTruthFamily {
    pub image_id: String,
    pub subsets: Vec<TagSubset>,
    /// Set when the family was requested for an empty path set.
    pub empty_paths: bool,
}

impl GroundTruthFamily {
    pub fn len(&self) -> usize {
        self.subsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsets.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct SemanticGraph {
    nodes: Vec<TagNode>,
    parent: Vec<Option<TagId>>,
    children: Vec<Vec<TagId>>,
    paths: Vec<SemanticPath>,
    tag_to_paths: Vec<Vec<PathId>>,
    names: HashMap<String, TagId>,
}

impl SemanticGraph {
    /// Builds the forest with [`default_weight`].
    pub fn build(tags: &[TagSpec], parent_edges: &[(String, String)]) -> Result<Self> {
        Self::build_with_weights(tags, parent_edges, default_weight)
    }

    pub fn build_with_weights(
        tags: &[TagSpec],
        parent_edges: &[(String, String)],
        weight_fn: WeightFn,
    ) -> Result<Self> {
        let mut names: HashMap<String, TagId> = HashMap::new();
        let mut nodes = Vec::with_capacity(tags.len());
        for (id, spec) in tags.iter().enumerate() {
            let canonical = spec.name.trim().to_string();
            let synonyms: Vec<String> = spec
                .synonyms
                .iter()
                .map(|s| s.trim().to_string())
                .filter(|s| *s != canonical)
                .collect();
            for name in std::iter::once(&canonical).chain(synonyms.iter()) {
                if name.is_empty() {
                    return Err(Error::Validation(format!("tag {id} has an empty name")));
                }
                if names.insert(name.clone(), id).is_some() {
                    return Err(Error::Validation(format!("duplicate tag name `{name}`")));
                }
            }
            nodes.push(TagNode {
                id,
                canonical_name: canonical,
                synonyms,
                layer: 0,
                descendant_count: 0,
                weight: 0.0,
            });
        }

        let n = nodes.len();
        let mut parent: Vec<Option<TagId>> = vec![None; n];
        let mut children: Vec<Vec<TagId>> = vec![Vec::new(); n];
        for (child_name, parent_name) in parent_edges {
            let child = *names
                .get(child_name.trim())
                .ok_or_else(|| Error::lookup("tag", child_name.trim()))?;
            let par = *names
                .get(parent_name.trim())
                .ok_or_else(|| Error::lookup("tag", parent_name.trim()))?;
            match parent[child] {
                Some(existing) if existing == par => continue,
                Some(_) => return Err(Error::MultiParent(nodes[child].canonical_name.clone())),
                None => {}
            }
            if child == par {
                return Err(Error::Cycle(nodes[child].canonical_name.clone()));
            }
            parent[child] = Some(par);
            children[par].push(child);
        }

        // Every parent chain must reach a root within n steps.
        for start in 0..n {
            let mut cur = start;
            let mut steps = 0;
            while let Some(p) = parent[cur] {
                cur = p;
                steps += 1;
                if steps > n {
                    return Err(Error::Cycle(nodes[start].canonical_name.clone()));
                }
            }
        }

        // Children before parents: process nodes by decreasing depth.
        let depth: Vec<usize> = (0..n)
            .map(|i| {
                let mut d = 0;
                let mut cur = i;
                while let Some(p) = parent[cur] {
                    cur = p;
                    d += 1;
                }
                d
            })
            .collect();
        let mut order: Vec<TagId> = (0..n).collect();
        order.sort_by(|a, b| depth[*b].cmp(&depth[*a]).then(a.cmp(b)));
        for &id in &order {
            let (layer, desc) = children[id].iter().fold((0usize, 0usize), |(l, d), &c| {
                (l.max(nodes[c].layer + 1), d + nodes[c].descendant_count + 1)
            });
            nodes[id].layer = layer;
            nodes[id].descendant_count = desc;
        }
        for node in nodes.iter_mut() {
            let w = weight_fn(node.layer, node.descendant_count);
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Numeric(format!(
                    "weight function returned {w} for `{}`",
                    node.canonical_name
                )));
            }
            node.weight = w;
        }

        let mut paths = Vec::new();
        let mut tag_to_paths: Vec<Vec<PathId>> = vec![Vec::new(); n];
        for leaf in (0..n).filter(|&i| children[i].is_empty()) {
            let path_id = paths.len();
            let mut node_ids = vec![leaf];
            let mut cur = leaf;
            while let Some(p) = parent[cur] {
                node_ids.push(p);
                cur = p;
            }
            for &t in &node_ids {
                tag_to_paths[t].push(path_id);
            }
            paths.push(SemanticPath { path_id, node_ids });
        }

        Ok(SemanticGraph {
            nodes,
            parent,
            children,
            paths,
            tag_to_paths,
            names,
        })
    }

    pub fn num_tags(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn nodes(&self) -> &[TagNode] {
        &self.nodes
    }

    pub fn node(&self, id: TagId) -> Result<&TagNode> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::lookup("tag id", id))
    }

    pub fn parent(&self, id: TagId) -> Result<Option<TagId>> {
        self.check(id)?;
        Ok(self.parent[id])
    }

    pub fn children(&self, id: TagId) -> Result<&[TagId]> {
        self.check(id)?;
        Ok(&self.children[id])
    }

    pub fn paths(&self) -> &[SemanticPath] {
        &self.paths
    }

    pub fn path(&self, id: PathId) -> Result<&SemanticPath> {
        self.paths
            .get(id)
            .ok_or_else(|| Error::lookup("path id", id))
    }

    /// Paths through `id`, ascending.
    pub fn tag_paths(&self, id: TagId) -> Result<&[PathId]> {
        self.check(id)?;
        Ok(&self.tag_to_paths[id])
    }

    /// Resolves a canonical name or any synonym.
    pub fn lookup(&self, name: &str) -> Option<TagId> {
        self.names.get(name.trim()).copied()
    }

    pub fn name(&self, id: TagId) -> Result<&str> {
        Ok(&self.node(id)?.canonical_name)
    }

    pub fn tag_weight(&self, id: TagId) -> Result<f64> {
        Ok(self.node(id)?.weight)
    }

    /// Whether two tags lie on a common semantic path. Reflexive.
    pub fn shares_path(&self, a: TagId, b: TagId) -> Result<bool> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.shares_path_unchecked(a, b))
    }

    pub(crate) fn shares_path_unchecked(&self, a: TagId, b: TagId) -> bool {
        if a == b {
            return true;
        }
        let (pa, pb) = (&self.tag_to_paths[a], &self.tag_to_paths[b]);
        let (mut i, mut j) = (0, 0);
        while i < pa.len() && j < pb.len() {
            match pa[i].cmp(&pb[j]) {
                std::cmp::Ordering::Equal => return true,
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
            }
        }
        false
    }

    /// True when no two members share a path.
    pub fn is_distinct(&self, subset: &TagSubset) -> Result<bool> {
        let ids = subset.ids();
        for &id in ids {
            self.check(id)?;
        }
        for (i, &a) in ids.iter().enumerate() {
            for &b in &ids[i + 1..] {
                if self.shares_path_unchecked(a, b) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    pub fn subset_weight(&self, subset: &TagSubset) -> Result<f64> {
        subset.ids().iter().map(|&id| self.tag_weight(id)).sum()
    }

    /// Computes the weight and caches it on the subset.
    pub fn weigh(&self, subset: &mut TagSubset) -> Result<f64> {
        let w = self.subset_weight(subset)?;
        subset.set_weight(w);
        Ok(w)
    }

    /// Enumerates every distinct subset that takes exactly one tag from each
    /// of at least two of the given paths. Single-tag subsets are omitted.
    /// Tags on a chosen path may not share any other path with the rest of
    /// the subset, and each set of tags is emitted once.
    pub fn enumerate_ground_truth_family(&self, sp_i: &[PathId]) -> Result<GroundTruthFamily> {
        let mut paths: Vec<PathId> = sp_i.to_vec();
        paths.sort_unstable();
        paths.dedup();
        for &p in &paths {
            self.path(p)?;
        }
        let mut family = GroundTruthFamily {
            empty_paths: paths.is_empty(),
            ..Default::default()
        };
        if paths.is_empty() {
            log::warn!("ground-truth family requested for an empty path set");
            return Ok(family);
        }

        let mut seen: HashSet<Vec<TagId>> = HashSet::new();
        let mut chosen: Vec<TagId> = Vec::new();
        for size in 2..=paths.len() {
            for combo in combinations(paths.len(), size) {
                let selected: Vec<&SemanticPath> =
                    combo.iter().map(|&i| &self.paths[paths[i]]).collect();
                self.product_into(&selected, &mut chosen, &mut seen, &mut family.subsets);
            }
        }
        Ok(family)
    }

    fn product_into(
        &self,
        paths: &[&SemanticPath],
        chosen: &mut Vec<TagId>,
        seen: &mut HashSet<Vec<TagId>>,
        out: &mut Vec<TagSubset>,
    ) {
        let depth = chosen.len();
        if depth == paths.len() {
            let mut key = chosen.clone();
            key.sort_unstable();
            if seen.insert(key) {
                let mut s = TagSubset::new(chosen.iter().copied());
                s.set_weight(chosen.iter().map(|&t| self.nodes[t].weight).sum());
                out.push(s);
            }
            return;
        }
        for &t in &paths[depth].node_ids {
            if chosen.iter().any(|&c| self.shares_path_unchecked(c, t)) {
                continue;
            }
            chosen.push(t);
            self.product_into(paths, chosen, seen, out);
            chosen.pop();
        }
    }

    /// Paths touched by any of the given tags, ascending.
    pub fn paths_of_tags(&self, tags: &[TagId]) -> Result<Vec<PathId>> {
        let mut out = Vec::new();
        for &t in tags {
            out.extend_from_slice(self.tag_paths(t)?);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    fn check(&self, id: TagId) -> Result<()> {
        if id < self.nodes.len() {
            Ok(())
        } else {
            Err(Error::lookup("tag id", id))
        }
    }

    pub fn parse_hierarchy(text: &str, source: &Path) -> Result<Self> {
        let mut records: Vec<(usize, Vec<String>, i64)> = Vec::new();
        let mut offset = 0u64;
        for line in text.split_inclusive('\n') {
            let line_offset = offset;
            offset += line.len() as u64;
            let content = line.trim_end_matches(['\n', '\r']);
            if content.trim().is_empty() || content.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = content.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::format(
                    source,
                    line_offset,
                    format!("expected 3 tab-separated fields, found {}", fields.len()),
                ));
            }
            let id: usize = fields[0].trim().parse().map_err(|_| {
                Error::format(source, line_offset, format!("bad node id `{}`", fields[0]))
            })?;
            let names: Vec<String> = fields[1].split('|').map(|s| s.trim().to_string()).collect();
            let parent: i64 = fields[2].trim().parse().map_err(|_| {
                Error::format(
                    source,
                    line_offset,
                    format!("bad parent id `{}`", fields[2]),
                )
            })?;
            records.push((id, names, parent));
        }

        let n = records.len();
        let mut by_id: Vec<Option<usize>> = vec![None; n];
        for (row, (id, _, _)) in records.iter().enumerate() {
            if *id >= n || by_id[*id].is_some() {
                return Err(Error::Validation(format!(
                    "{}: node ids must be unique and cover 0..{n}; got {id}",
                    source.display()
                )));
            }
            by_id[*id] = Some(row);
        }
        let ordered: Vec<&(usize, Vec<String>, i64)> =
            by_id.iter().map(|r| &records[r.unwrap()]).collect();
        let tags: Vec<TagSpec> = ordered
            .iter()
            .map(|(_, names, _)| TagSpec {
                name: names[0].clone(),
                synonyms: names[1..].to_vec(),
            })
            .collect();
        let mut edges = Vec::new();
        for (id, _, parent) in ordered.iter() {
            match *parent {
                -1 => {}
                p if p >= 0 && (p as usize) < n => {
                    edges.push((tags[*id].name.clone(), tags[p as usize].name.clone()));
                }
                p => {
                    return Err(Error::Validation(format!(
                        "{}: node {id} references unknown parent {p}",
                        source.display()
                    )))
                }
            }
        }
        Self::build(&tags, &edges)
    }

    pub fn read_hierarchy(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_hierarchy(&text, path)
    }

    pub fn to_hierarchy_string(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            let mut names = node.canonical_name.clone();
            for s in &node.synonyms {
                names.push('|');
                names.push_str(s);
            }
            let parent = self.parent[node.id].map(|p| p as i64).unwrap_or(-1);
            let _ = writeln!(out, "{}\t{}\t{}", node.id, names, parent);
        }
        out
    }

    /// One line per path: leaf-to-root names joined by `->`, then the
    /// per-tag weights, tab-separated.
    pub fn path_dump(&self) -> String {
        let mut out = String::new();
        for path in &self.paths {
            let names: Vec<&str> = path
                .node_ids
                .iter()
                .map(|&t| self.nodes[t].canonical_name.as_str())
                .collect();
            out.push_str(&names.join("->"));
            for &t in &path.node_ids {
                let _ = write!(out, "\t{}", self.nodes[t].weight);
            }
            out.push('\n');
        }
        out
    }
}

/// All `k`-combinations of `0..n` in lexicographic order.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// lady -> woman -> people(person), cactus -> plant, cat -> animal
    pub(crate) fn fig3() -> SemanticGraph {
        let tags = vec![
            TagSpec::new("lady"),
            TagSpec::new("woman"),
            TagSpec::with_synonyms("people", &["person"]),
            TagSpec::new("cactus"),
            TagSpec::new("plant"),
            TagSpec::new("cat"),
            TagSpec::new("animal"),
        ];
        let edges = [
            ("lady", "woman"),
            ("woman", "people"),
            ("cactus", "plant"),
            ("cat", "animal"),
        ]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect::<Vec<_>>();
        SemanticGraph::build(&tags, &edges).unwrap()
    }

    fn edges(e: &[(&str, &str)]) -> Vec<(String, String)> {
        e.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn fig3_paths_and_sizes() {
        let g = fig3();
        assert_eq!(g.num_tags(), 7);
        let lens: Vec<usize> = g.paths().iter().map(|p| p.len()).collect();
        assert_eq!(lens, vec![3, 2, 2]);
        let people = g.lookup("person").unwrap();
        assert_eq!(people, g.lookup("people").unwrap());
        assert_eq!(g.name(people).unwrap(), "people");
    }

    #[test]
    fn single_tag_forest() {
        let g = SemanticGraph::build(&[TagSpec::new("a")], &[]).unwrap();
        assert_eq!(g.num_paths(), 1);
        assert_eq!(g.paths()[0].node_ids, vec![0]);
        assert_eq!(g.node(0).unwrap().layer, 0);
        assert_eq!(g.node(0).unwrap().descendant_count, 0);
    }

    #[test]
    fn two_cycle_is_rejected() {
        let tags = [TagSpec::new("a"), TagSpec::new("b")];
        let err = SemanticGraph::build(&tags, &edges(&[("a", "b"), ("b", "a")])).unwrap_err();
        assert!(matches!(err, Error::Cycle(_)), "{err}");
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let err = SemanticGraph::build(&[TagSpec::new("a")], &edges(&[("a", "a")])).unwrap_err();
        assert!(matches!(err, Error::Cycle(_)));
    }

    #[test]
    fn multi_parent_is_rejected() {
        let tags = [TagSpec::new("a"), TagSpec::new("b"), TagSpec::new("c")];
        let err = SemanticGraph::build(&tags, &edges(&[("a", "b"), ("a", "c")])).unwrap_err();
        assert!(matches!(err, Error::MultiParent(ref n) if n == "a"));
    }

    #[test]
    fn duplicate_names_are_rejected() {
        let tags = [TagSpec::new("a"), TagSpec::with_synonyms("b", &["a"])];
        assert!(matches!(
            SemanticGraph::build(&tags, &[]),
            Err(Error::Validation(_))
        ));
        let tags = [TagSpec::new(" a"), TagSpec::new("a ")];
        assert!(SemanticGraph::build(&tags, &[]).is_err());
    }

    #[test]
    fn edge_to_unknown_tag() {
        let err = SemanticGraph::build(&[TagSpec::new("a")], &edges(&[("a", "zzz")])).unwrap_err();
        assert!(matches!(err, Error::Lookup { .. }));
    }

    #[test]
    fn weights_follow_formula() {
        let g = fig3();
        let w = |n: &str| g.tag_weight(g.lookup(n).unwrap()).unwrap();
        assert_eq!(w("lady"), 1.0);
        assert_eq!(w("cactus"), 1.0);
        assert_eq!(w("woman"), 0.25);
        assert_eq!(w("plant"), 0.25);
        // people: layer 2, descendants {woman, lady}
        assert_eq!(w("people"), 1.0 / 9.0);
        assert!(g.tag_weight(99).is_err());
    }

    #[test]
    fn layer_two_with_three_descendants() {
        let tags = [
            TagSpec::new("lady"),
            TagSpec::new("woman"),
            TagSpec::new("man"),
            TagSpec::new("people"),
        ];
        let g = SemanticGraph::build(
            &tags,
            &edges(&[("lady", "woman"), ("woman", "people"), ("man", "people")]),
        )
        .unwrap();
        let p = g.node(3).unwrap();
        assert_eq!((p.layer, p.descendant_count), (2, 3));
        assert_eq!(p.weight, 1.0 / 12.0);
    }

    #[test]
    fn shares_path_cases() {
        let g = fig3();
        let id = |n: &str| g.lookup(n).unwrap();
        assert!(g.shares_path(id("lady"), id("people")).unwrap());
        assert!(!g.shares_path(id("lady"), id("cactus")).unwrap());
        assert!(g.shares_path(id("cat"), id("cat")).unwrap());
        assert!(g.shares_path(0, 100).is_err());
    }

    #[test]
    fn siblings_do_not_share_a_path_but_share_parent() {
        let tags = [
            TagSpec::new("cat"),
            TagSpec::new("dog"),
            TagSpec::new("animal"),
        ];
        let g =
            SemanticGraph::build(&tags, &edges(&[("cat", "animal"), ("dog", "animal")])).unwrap();
        assert!(!g.shares_path(0, 1).unwrap());
        assert!(g.shares_path(0, 2).unwrap());
        assert_eq!(g.tag_paths(2).unwrap(), &[0, 1]);
    }

    #[test]
    fn family_counts_fig3() {
        let g = fig3();
        let fam = g.enumerate_ground_truth_family(&[0, 1, 2]).unwrap();
        let two = fam.subsets.iter().filter(|s| s.len() == 2).count();
        let three = fam.subsets.iter().filter(|s| s.len() == 3).count();
        assert_eq!((two, three), (16, 12));
        for s in &fam.subsets {
            assert!(g.is_distinct(s).unwrap());
        }
    }

    #[test]
    fn family_edge_cases() {
        let tags = [TagSpec::new("a"), TagSpec::new("b")];
        let g = SemanticGraph::build(&tags, &[]).unwrap();
        assert_eq!(g.enumerate_ground_truth_family(&[0, 1]).unwrap().len(), 1);
        assert_eq!(g.enumerate_ground_truth_family(&[0]).unwrap().len(), 0);
        let empty = g.enumerate_ground_truth_family(&[]).unwrap();
        assert!(empty.is_empty() && empty.empty_paths);
        assert!(g.enumerate_ground_truth_family(&[5]).is_err());
    }

    #[test]
    fn family_with_shared_ancestor_skips_conflicts() {
        let tags = [
            TagSpec::new("cat"),
            TagSpec::new("dog"),
            TagSpec::new("animal"),
        ];
        let g =
            SemanticGraph::build(&tags, &edges(&[("cat", "animal"), ("dog", "animal")])).unwrap();
        let fam = g.enumerate_ground_truth_family(&[0, 1]).unwrap();
        // only {cat, dog}; animal conflicts with both leaves
        assert_eq!(fam.len(), 1);
        assert_eq!(fam.subsets[0].sorted_ids(), vec![0, 1]);
    }

    #[test]
    fn subset_weight_cases() {
        let g = fig3();
        assert_eq!(g.subset_weight(&TagSubset::empty()).unwrap(), 0.0);
        let leaves = TagSubset::new([g.lookup("lady").unwrap(), g.lookup("cat").unwrap()]);
        assert_eq!(g.subset_weight(&leaves).unwrap(), 2.0);
        let lp = TagSubset::new([g.lookup("lady").unwrap(), g.lookup("plant").unwrap()]);
        assert_eq!(g.subset_weight(&lp).unwrap(), 1.25);
        assert!(g.subset_weight(&TagSubset::new([42])).is_err());
    }

    #[test]
    fn hierarchy_file_round_trip() {
        let g = fig3();
        let text = g.to_hierarchy_string();
        let g2 = SemanticGraph::parse_hierarchy(&text, Path::new("mem")).unwrap();
        assert_eq!(g.nodes(), g2.nodes());
        assert_eq!(g.paths(), g2.paths());
        assert_eq!(g.path_dump(), g2.path_dump());
    }

    #[test]
    fn hierarchy_parse_errors() {
        let p = Path::new("h.tsv");
        assert!(matches!(
            SemanticGraph::parse_hierarchy("0\ta\n", p),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            SemanticGraph::parse_hierarchy("0\ta\t-1\n0\tb\t-1\n", p),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            SemanticGraph::parse_hierarchy("0\ta\t1\n1\tb\t0\n", p),
            Err(Error::Cycle(_))
        ));
        assert!(matches!(
            SemanticGraph::parse_hierarchy("0\ta\t-1\n1\tb\tx\n", p),
            Err(Error::Format { offset: 7, .. })
        ));
    }

    #[test]
    fn path_dump_format() {
        let g = fig3();
        let dump = g.path_dump();
        let first = dump.lines().next().unwrap();
        assert_eq!(
            first,
            format!("lady->woman->people\t1\t0.25\t{}", 1.0 / 9.0)
        );
        assert_eq!(dump.lines().count(), 3);
    }

    #[test]
    fn combinations_enumerate_binomial() {
        assert_eq!(combinations(4, 2).len(), 6);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(combinations(5, 1).len(), 5);
        assert!(combinations(2, 3).is_empty());
    }
}
