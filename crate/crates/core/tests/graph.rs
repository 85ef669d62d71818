mod common;

use std::collections::BTreeSet;
use std::path::Path;

use proptest::prelude::*;
use tagdiv::{Error, SemanticGraph, TagSpec, TagSubset};

/// A random forest: `parents[i]` is `None` or an index below `i`.
fn forest() -> impl Strategy<Value = Vec<Option<usize>>> {
    (1usize..10).prop_flat_map(|n| {
        (0..n)
            .map(|i| {
                if i == 0 {
                    Just(None).boxed()
                } else {
                    prop_oneof![Just(None), (0..i).prop_map(Some)].boxed()
                }
            })
            .collect::<Vec<_>>()
    })
}

fn build(parents: &[Option<usize>]) -> SemanticGraph {
    let tags: Vec<TagSpec> = (0..parents.len())
        .map(|i| TagSpec::new(&format!("n{i}")))
        .collect();
    let edges: Vec<(String, String)> = parents
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|p| (format!("n{i}"), format!("n{p}"))))
        .collect();
    SemanticGraph::build(&tags, &edges).unwrap()
}

/// All tag sets of size >= 2 drawn from `gt` paths with no two tags on a
/// common path.
fn brute_family(g: &SemanticGraph, gt: &[usize]) -> BTreeSet<Vec<usize>> {
    let on_gt: Vec<usize> = (0..g.num_tags())
        .filter(|&t| g.tag_paths(t).unwrap().iter().any(|p| gt.contains(p)))
        .collect();
    let mut out = BTreeSet::new();
    for mask in 0u32..1 << on_gt.len() {
        let ids: Vec<usize> = (0..on_gt.len())
            .filter(|&i| mask >> i & 1 == 1)
            .map(|i| on_gt[i])
            .collect();
        if ids.len() < 2 {
            continue;
        }
        let ok = ids
            .iter()
            .enumerate()
            .all(|(i, &a)| ids[i + 1..].iter().all(|&b| !g.shares_path(a, b).unwrap()));
        if ok {
            out.insert(ids);
        }
    }
    out
}

#[test]
fn fig3_weights_and_paths() {
    let g = common::fig3();
    let w = |n: &str| g.tag_weight(g.lookup(n).unwrap()).unwrap();
    assert_eq!(w("lady"), 1.0);
    assert_eq!(w("woman"), 0.25);
    assert_eq!(w("people"), 1.0 / 9.0);
    assert_eq!(w("person"), 1.0 / 9.0);
    assert_eq!(w("plant"), 0.25);
    assert_eq!(g.num_paths(), 3);
    let sizes: Vec<usize> = g.paths().iter().map(|p| p.len()).collect();
    assert_eq!(sizes, vec![3, 2, 2]);
}

#[test]
fn layer_two_node_with_three_descendants_weighs_a_twelfth() {
    let tags = ["lady", "man", "woman", "people"].map(TagSpec::new);
    let e = |c: &str, p: &str| (c.to_string(), p.to_string());
    let g = SemanticGraph::build(
        &tags,
        &[e("lady", "woman"), e("woman", "people"), e("man", "people")],
    )
    .unwrap();
    assert_eq!(
        g.tag_weight(g.lookup("people").unwrap()).unwrap(),
        1.0 / 12.0
    );
}

#[test]
fn fig3_family_matches_brute_force() {
    let g = common::fig3();
    for gt in [vec![0, 1, 2], vec![0, 1], vec![1, 2], vec![0]] {
        let fam = g.enumerate_ground_truth_family(&gt).unwrap();
        let got: BTreeSet<Vec<usize>> = fam.subsets.iter().map(TagSubset::sorted_ids).collect();
        assert_eq!(got.len(), fam.subsets.len(), "family has duplicates");
        assert_eq!(got, brute_family(&g, &gt));
    }
}

#[test]
fn empty_gt_gives_flagged_empty_family() {
    let g = common::fig3();
    let fam = g.enumerate_ground_truth_family(&[]).unwrap();
    assert!(fam.is_empty());
    assert!(fam.empty_paths);
    assert!(matches!(
        g.enumerate_ground_truth_family(&[7]),
        Err(Error::Lookup { .. })
    ));
}

#[test]
fn hierarchy_file_round_trip_via_disk() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("h.tsv");
    let g = common::fig3();
    std::fs::write(&p, g.to_hierarchy_string()).unwrap();
    let back = SemanticGraph::read_hierarchy(&p).unwrap();
    assert_eq!(back.path_dump(), g.path_dump());
    assert_eq!(back.lookup("person"), g.lookup("people"));
    assert!(matches!(
        SemanticGraph::read_hierarchy(Path::new("/nonexistent/h.tsv")),
        Err(e) if e.is_io()
    ));
}

proptest! {
    #[test]
    fn forest_invariants(parents in forest()) {
        let g = build(&parents);
        let n = g.num_tags();
        let leaves = (0..n).filter(|&t| g.children(t).unwrap().is_empty()).count();
        prop_assert_eq!(g.num_paths(), leaves);
        let mut covered = vec![false; n];
        for p in g.paths() {
            prop_assert!(g.children(p.leaf()).unwrap().is_empty());
            for w in p.node_ids.windows(2) {
                prop_assert_eq!(g.parent(w[0]).unwrap(), Some(w[1]));
                // More specific tags weigh strictly more.
                prop_assert!(g.tag_weight(w[0]).unwrap() > g.tag_weight(w[1]).unwrap());
            }
            prop_assert_eq!(g.parent(*p.node_ids.last().unwrap()).unwrap(), None);
            p.node_ids.iter().for_each(|&t| covered[t] = true);
        }
        prop_assert!(covered.iter().all(|&c| c));
        for t in 0..n {
            let w = g.tag_weight(t).unwrap();
            prop_assert!(w > 0.0 && w <= 1.0);
            prop_assert!(g.shares_path(t, t).unwrap());
        }
    }

    #[test]
    fn shares_path_is_ancestry(parents in forest()) {
        let g = build(&parents);
        let ancestors = |mut t: usize| {
            let mut out = vec![t];
            while let Some(p) = parents[t] {
                out.push(p);
                t = p;
            }
            out
        };
        for a in 0..g.num_tags() {
            for b in 0..g.num_tags() {
                let related = ancestors(a).contains(&b) || ancestors(b).contains(&a);
                prop_assert_eq!(g.shares_path(a, b).unwrap(), related);
            }
        }
    }

    #[test]
    fn family_matches_brute_force(parents in forest(), pick in any::<u16>()) {
        let g = build(&parents);
        let gt: Vec<usize> = (0..g.num_paths()).filter(|p| pick >> p & 1 == 1).collect();
        let fam = g.enumerate_ground_truth_family(&gt).unwrap();
        for s in &fam.subsets {
            prop_assert!(g.is_distinct(s).unwrap());
            prop_assert!(s.len() >= 2);
        }
        let got: BTreeSet<Vec<usize>> = fam.subsets.iter().map(TagSubset::sorted_ids).collect();
        prop_assert_eq!(got.len(), fam.subsets.len());
        prop_assert_eq!(got, brute_family(&g, &gt));
    }

    #[test]
    fn hierarchy_text_round_trips(parents in forest()) {
        let g = build(&parents);
        let back = SemanticGraph::parse_hierarchy(&g.to_hierarchy_string(), Path::new("h")).unwrap();
        prop_assert_eq!(back.to_hierarchy_string(), g.to_hierarchy_string());
        prop_assert_eq!(back.path_dump(), g.path_dump());
    }
}
