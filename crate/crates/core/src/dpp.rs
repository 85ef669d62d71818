//! Conditional DPP kernel with a quality/similarity decomposition, exact
//! subset probabilities, and path-constrained sequential sampling.
//!
//! The kernel is `L(i, j) = v_i * S(i, j) * v_j` where `v` is a nonnegative
//! per-tag quality and `S` a unit-diagonal PSD similarity built from tag
//! embeddings as `S(i, j) = 1/2 + cos(t_i, t_j) / 2`.
//!
//! Sampling is sequential. At each step the next tag is drawn from the tags
//! that share no semantic path with anything already selected, with
//! probability proportional to its conditional gain
//! `det(L[Y + j]) / det(L[Y])`. Removing conflicting tags from the pool and
//! renormalizing gives the same conditional law as drawing and discarding
//! same-path tags, and always terminates.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::SemanticGraph;
use crate::linalg::{log_det_psd, Cholesky, SquareMatrix};
use crate::subset::{TagId, TagSubset};

/// Remaining eligible mass below which sampling stops.
pub const MASS_EPSILON: f64 = 1e-12;

/// Per-tag embedding vectors, indexed by tag id.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    names: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(names: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != vectors.len() {
            return Err(Error::Shape(format!(
                "{} names for {} embedding vectors",
                names.len(),
                vectors.len()
            )));
        }
        let dim = vectors.first().map_or(0, Vec::len);
        for (name, v) in names.iter().zip(&vectors) {
            if v.len() != dim {
                return Err(Error::Shape(format!(
                    "embedding for `{name}` has dimension {}, expected {dim}",
                    v.len()
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!(
                    "embedding for `{name}` is not finite"
                )));
            }
        }
        Ok(EmbeddingTable {
            dim,
            names,
            vectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vector(&self, id: TagId) -> &[f64] {
        &self.vectors[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Parses `name v1 v2 ... vD` lines. Every tag of `graph` must appear
    /// exactly once; names may be synonyms.
    pub fn parse(text: &str, graph: &SemanticGraph, source: &Path) -> Result<Self> {
        let m = graph.num_tags();
        let mut vectors: Vec<Option<Vec<f64>>> = vec![None; m];
        let mut dim: Option<usize> = None;
        let mut offset = 0u64;
        for line in text.split_inclusive('\n') {
            let line_offset = offset;
            offset += line.len() as u64;
            let mut fields = line.split_whitespace();
            let Some(name) = fields.next() else { continue };
            let id = graph
                .lookup(name)
                .ok_or_else(|| Error::lookup("tag", name))?;
            let v: Vec<f64> = fields
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| {
                    Error::format(source, line_offset, format!("bad float for `{name}`: {e}"))
                })?;
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(Error::format(
                        source,
                        line_offset,
                        format!("`{name}` has {} values, expected {d}", v.len()),
                    ))
                }
                _ => {}
            }
            if vectors[id].replace(v).is_some() {
                return Err(Error::Validation(format!(
                    "duplicate embedding for `{name}`"
                )));
            }
        }
        let mut out = Vec::with_capacity(m);
        for (id, v) in vectors.into_iter().enumerate() {
            out.push(v.ok_or_else(|| {
                Error::Validation(format!(
                    "{}: no embedding for `{}`",
                    source.display(),
                    graph.nodes()[id].canonical_name
                ))
            })?);
        }
        let names = graph
            .nodes()
            .iter()
            .map(|n| n.canonical_name.clone())
            .collect();
        EmbeddingTable::new(names, out)
    }

    pub fn read(path: &Path, graph: &SemanticGraph) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, graph, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, v) in self.names.iter().zip(&self.vectors) {
            out.push_str(name);
            for x in v {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Unit-diagonal symmetric PSD similarity with entries in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMatrix(SquareMatrix);

impl SimilarityMatrix {
    pub fn from_embeddings(table: &EmbeddingTable) -> Result<Self> {
        let norms: Vec<f64> = table
            .vectors
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        for (i, &n) in norms.iter().enumerate() {
            if !(n > 0.0) {
                return Err(Error::DegenerateEmbedding(table.names[i].clone()));
            }
        }
        let m = table.len();
        let mut s = SquareMatrix::identity(m);
        for i in 0..m {
            for j in i + 1..m {
                let dot: f64 = table.vectors[i]
                    .iter()
                    .zip(&table.vectors[j])
                    .map(|(a, b)| a * b)
                    .sum();
                let cos = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
                let v = 0.5 + 0.5 * cos;
                s.set(i, j, v);
                s.set(j, i, v);
            }
        }
        Ok(SimilarityMatrix(s))
    }

    /// Wraps an explicit matrix after checking symmetry, unit diagonal and
    /// the `[0, 1]` range.
    pub fn from_matrix(s: SquareMatrix) -> Result<Self> {
        let m = s.dim();
        for i in 0..m {
            if s.get(i, i) != 1.0 {
                return Err(Error::Domain(format!("S({i},{i}) = {} != 1", s.get(i, i))));
            }
            for j in 0..m {
                let v = s.get(i, j);
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain(format!("S({i},{j}) = {v} outside [0, 1]")));
                }
                if v != s.get(j, i) {
                    return Err(Error::Domain(format!("S is not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(SimilarityMatrix(s))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }
}

/// `L = diag(v) S diag(v)`, evaluated lazily.
#[derive(Clone, Debug)]
pub struct DppKernel<'s> {
    quality: Vec<f64>,
    similarity: &'s SimilarityMatrix,
}

impl<'s> DppKernel<'s> {
    pub fn new(quality: Vec<f64>, similarity: &'s SimilarityMatrix) -> Result<Self> {
        if quality.len() != similarity.dim() {
            return Err(Error::Shape(format!(
                "quality has length {}, similarity is {}x{}",
                quality.len(),
                similarity.dim(),
                similarity.dim()
            )));
        }
        if let Some((i, q)) = quality
            .iter()
            .enumerate()
            .find(|(_, q)| !(**q >= 0.0) || !q.is_finite())
        {
            return Err(Error::Domain(format!(
                "quality[{i}] = {q} must be finite and >= 0"
            )));
        }
        Ok(DppKernel {
            quality,
            similarity,
        })
    }

    pub fn len(&self) -> usize {
        self.quality.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quality.is_empty()
    }

    pub fn quality(&self) -> &[f64] {
        &self.quality
    }

    pub fn similarity(&self) -> &SimilarityMatrix {
        self.similarity
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.quality[i] * self.similarity.get(i, j) * self.quality[j]
    }

    pub fn materialize(&self) -> SquareMatrix {
        SquareMatrix::from_fn(self.len(), |i, j| self.entry(i, j))
    }

    fn submatrix(&self, ids: &[TagId]) -> SquareMatrix {
        SquareMatrix::from_fn(ids.len(), |a, b| self.entry(ids[a], ids[b]))
    }

    fn check_ids(&self, ids: &[TagId]) -> Result<()> {
        for (i, &id) in ids.iter().enumerate() {
            if id >= self.len() {
                return Err(Error::lookup("tag id", id));
            }
            if ids[..i].contains(&id) {
                return Err(Error::Domain(format!("tag {id} repeated in subset")));
            }
        }
        Ok(())
    }

    /// `log det(L + I)`, the log normalizer of the DPP.
    pub fn log_normalizer(&self) -> f64 {
        log_det_psd(&self.materialize().add_identity())
    }

    /// `P(T) = det(L_T) / det(L + I)`, computed in log space.
    pub fn subset_probability(&self, subset: &TagSubset) -> Result<f64> {
        self.check_ids(subset.ids())?;
        let num = log_det_psd(&self.submatrix(subset.ids()));
        Ok((num - self.log_normalizer()).exp())
    }

    /// `det(L[Y + j]) / det(L[Y])`: the squared residual of tag `j` against
    /// the span of the selected tags in the kernel's feature space.
    pub fn conditional_gain(&self, selected: &TagSubset, candidate: TagId) -> Result<f64> {
        self.check_ids(selected.ids())?;
        if candidate >= self.len() {
            return Err(Error::lookup("tag id", candidate));
        }
        if selected.contains(candidate) {
            return Err(Error::Domain(format!(
                "candidate {candidate} already selected"
            )));
        }
        let diag = self.entry(candidate, candidate);
        if selected.is_empty() {
            return Ok(diag);
        }
        let chol =
            Cholesky::factor(&self.submatrix(selected.ids())).ok_or(Error::SingularConditioning)?;
        let mut col: Vec<f64> = selected
            .ids()
            .iter()
            .map(|&y| self.entry(y, candidate))
            .collect();
        chol.forward_solve(&mut col);
        let proj: f64 = col.iter().map(|c| c * c).sum();
        Ok((diag - proj).max(0.0))
    }
}

/// Why a sequential draw stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    ReachedK,
    /// Every remaining tag shares a path with a selected one.
    PoolExhausted,
    /// Total eligible gain fell below [`MASS_EPSILON`]. An empty subset with
    /// this reason means every quality was zero.
    MassBelowEpsilon,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub subset: TagSubset,
    pub stop: StopReason,
}

/// One sequential draw of at most `k` path-distinct tags.
pub fn sample_distinct_subset<R: Rng + ?Sized>(
    kernel: &DppKernel<'_>,
    graph: &SemanticGraph,
    k: usize,
    rng: &mut R,
) -> Result<Draw> {
    let m = kernel.len();
    if graph.num_tags() != m {
        return Err(Error::Shape(format!(
            "kernel has {m} tags, graph has {}",
            graph.num_tags()
        )));
    }
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }

    let mut gain: Vec<f64> = (0..m).map(|j| kernel.entry(j, j)).collect();
    let mut eligible = vec![true; m];
    // Row j holds the coordinates of tag j in the orthonormal basis spanned by
    // the selected tags so far (incremental Cholesky).
    let mut coords: Vec<Vec<f64>> = vec![Vec::with_capacity(k); m];
    let mut subset = TagSubset::empty();

    let stop = loop {
        if subset.len() == k {
            break StopReason::ReachedK;
        }
        let mut total = 0.0;
        let mut any = false;
        for j in 0..m {
            if eligible[j] {
                any = true;
                total += gain[j].max(0.0);
            }
        }
        if !any {
            break StopReason::PoolExhausted;
        }
        if total < MASS_EPSILON {
            break StopReason::MassBelowEpsilon;
        }

        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for j in 0..m {
            if eligible[j] && gain[j] > 0.0 {
                acc += gain[j];
                pick = Some(j);
                if target < acc {
                    break;
                }
            }
        }
        let y = pick.expect("positive eligible mass implies a candidate");

        subset.push(y);
        eligible[y] = false;
        for j in 0..m {
            if eligible[j] && graph.shares_path_unchecked(y, j) {
                eligible[j] = false;
            }
        }
        let dy = gain[y].sqrt();
        let cy = std::mem::take(&mut coords[y]);
        for j in 0..m {
            if !eligible[j] {
                continue;
            }
            let dot: f64 = cy.iter().zip(&coords[j]).map(|(a, b)| a * b).sum();
            let e = (kernel.entry(y, j) - dot) / dy;
            coords[j].push(e);
            gain[j] -= e * e;
        }
    };

    if subset.is_empty() && stop == StopReason::MassBelowEpsilon {
        log::warn!("all qualities are zero; sampled an empty subset");
    }
    Ok(Draw { subset, stop })
}

/// Runs `repeats` draws and keeps the one with the largest tag weight sum;
/// ties go to the earliest draw.
pub fn sample_best_of<R: Rng + ?Sized>(
    kernel: &DppKernel<'_>,
    graph: &SemanticGraph,
    k: usize,
    repeats: usize,
    rng: &mut R,
) -> Result<TagSubset> {
    if repeats == 0 {
        return Err(Error::Domain("repeats must be at least 1".into()));
    }
    let mut best: Option<TagSubset> = None;
    for _ in 0..repeats {
        let mut draw = sample_distinct_subset(kernel, graph, k, rng)?.subset;
        let w = graph.weigh(&mut draw)?;
        match &best {
            Some(b) if b.cached_weight().unwrap_or(f64::NEG_INFINITY) >= w => {}
            _ => best = Some(draw),
        }
    }
    Ok(best.expect("repeats >= 1"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::TagSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat_graph(m: usize) -> SemanticGraph {
        let tags: Vec<TagSpec> = (0..m).map(|i| TagSpec::new(&format!("t{i}"))).collect();
        SemanticGraph::build(&tags, &[]).unwrap()
    }

    fn table(vs: Vec<Vec<f64>>) -> EmbeddingTable {
        let names = (0..vs.len()).map(|i| format!("t{i}")).collect();
        EmbeddingTable::new(names, vs).unwrap()
    }

    #[test]
    fn similarity_extremes() {
        let s = SimilarityMatrix::from_embeddings(&table(vec![
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 3.0],
            vec![-1.0, 0.0],
        ]))
        .unwrap();
        assert_eq!(s.get(0, 1), 1.0);
        assert_eq!(s.get(0, 2), 0.5);
        assert_eq!(s.get(0, 3), 0.0);
        assert_eq!(s.get(2, 2), 1.0);
    }

    #[test]
    fn zero_embedding_names_the_tag() {
        let err = SimilarityMatrix::from_embeddings(&table(vec![vec![1.0, 0.0], vec![0.0, 0.0]]))
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateEmbedding(ref n) if n == "t1"));
    }

    #[test]
    fn embedding_shape_is_checked() {
        let names = vec!["a".into(), "b".into()];
        assert!(matches!(
            EmbeddingTable::new(names, vec![vec![1.0], vec![1.0, 2.0]]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn kernel_entries() {
        let s = SimilarityMatrix::from_matrix(SquareMatrix::identity(3)).unwrap();
        let k = DppKernel::new(vec![1.0; 3], &s).unwrap();
        assert_eq!(k.materialize(), SquareMatrix::identity(3));

        let s = SimilarityMatrix::from_matrix(SquareMatrix::from_row_major(
            2,
            vec![1.0, 0.5, 0.5, 1.0],
        ))
        .unwrap();
        let k = DppKernel::new(vec![2.0, 3.0], &s).unwrap();
        assert_eq!(k.entry(0, 1), 3.0);
        assert_eq!(k.entry(0, 0), 4.0);

        let k = DppKernel::new(vec![2.0, 0.0], &s).unwrap();
        assert_eq!(k.entry(1, 0), 0.0);
        assert_eq!(k.entry(1, 1), 0.0);
    }

    #[test]
    fn kernel_rejects_bad_quality() {
        let s = SimilarityMatrix::from_matrix(SquareMatrix::identity(2)).unwrap();
        assert!(matches!(
            DppKernel::new(vec![1.0, -0.1], &s),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            DppKernel::new(vec![1.0], &s),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            DppKernel::new(vec![1.0, f64::NAN], &s),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn probability_examples() {
        let s = SimilarityMatrix::from_matrix(SquareMatrix::identity(2)).unwrap();
        let k = DppKernel::new(vec![1.0, 1.0], &s).unwrap();
        assert!((k.subset_probability(&TagSubset::new([0])).unwrap() - 0.25).abs() < 1e-15);
        assert!((k.subset_probability(&TagSubset::empty()).unwrap() - 0.25).abs() < 1e-15);
        assert!(k.subset_probability(&TagSubset::new([2])).is_err());
    }

    #[test]
    fn gain_examples() {
        let s = SimilarityMatrix::from_matrix(SquareMatrix::from_row_major(
            2,
            vec![1.0, 1.0, 1.0, 1.0],
        ))
        .unwrap();
        let k = DppKernel::new(vec![0.7, 1.3], &s).unwrap();
        assert_eq!(
            k.conditional_gain(&TagSubset::empty(), 1).unwrap(),
            1.3 * 1.3
        );
        assert!(k.conditional_gain(&TagSubset::new([0]), 1).unwrap() < 1e-12);
        assert!(matches!(
            k.conditional_gain(&TagSubset::new([0]), 0),
            Err(Error::Domain(_))
        ));

        let k0 = DppKernel::new(vec![0.0, 1.0], &s).unwrap();
        assert!(matches!(
            k0.conditional_gain(&TagSubset::new([0]), 1),
            Err(Error::SingularConditioning)
        ));
    }

    #[test]
    fn sampler_respects_k_and_zero_quality() {
        let g = flat_graph(4);
        let s = SimilarityMatrix::from_matrix(SquareMatrix::identity(4)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);

        let k = DppKernel::new(vec![1.0; 4], &s).unwrap();
        let d = sample_distinct_subset(&k, &g, 2, &mut rng).unwrap();
        assert_eq!(d.subset.len(), 2);
        assert_eq!(d.stop, StopReason::ReachedK);

        let z = DppKernel::new(vec![0.0; 4], &s).unwrap();
        let d = sample_distinct_subset(&z, &g, 3, &mut rng).unwrap();
        assert!(d.subset.is_empty());
        assert_eq!(d.stop, StopReason::MassBelowEpsilon);

        assert!(sample_distinct_subset(&k, &g, 0, &mut rng).is_err());
        assert!(sample_distinct_subset(&k, &flat_graph(3), 1, &mut rng).is_err());
    }

    #[test]
    fn sampler_stops_when_pool_is_exhausted() {
        // one chain: any pick excludes the rest
        let tags = [TagSpec::new("a"), TagSpec::new("b")];
        let g = SemanticGraph::build(&tags, &[("a".into(), "b".into())]).unwrap();
        let s = SimilarityMatrix::from_matrix(SquareMatrix::identity(2)).unwrap();
        let k = DppKernel::new(vec![1.0, 1.0], &s).unwrap();
        let d = sample_distinct_subset(&k, &g, 2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(d.subset.len(), 1);
        assert_eq!(d.stop, StopReason::PoolExhausted);
    }

    #[test]
    fn best_of_one_equals_single_draw() {
        let g = flat_graph(6);
        let s = SimilarityMatrix::from_embeddings(&table(
            (0..6)
                .map(|i| vec![1.0, i as f64 * 0.3, (i % 2) as f64])
                .collect(),
        ))
        .unwrap();
        let k = DppKernel::new(vec![0.9, 0.5, 0.7, 0.3, 0.8, 0.6], &s).unwrap();
        for seed in 0..20 {
            let a =
                sample_distinct_subset(&k, &g, 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = sample_best_of(&k, &g, 3, 1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(a.subset, b);
        }
        assert!(sample_best_of(&k, &g, 3, 0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn embedding_text_round_trip() {
        let g = flat_graph(3);
        let t = table(vec![vec![1.0, -2.5], vec![0.125, 3.0], vec![1e-3, 7.0]]);
        let back = EmbeddingTable::parse(&t.to_text(), &g, Path::new("e.txt")).unwrap();
        assert_eq!(t, back);
        assert!(matches!(
            EmbeddingTable::parse("t0 1 2\nt1 1\n", &g, Path::new("e.txt")),
            Err(Error::Format { offset: 7, .. })
        ));
        assert!(matches!(
            EmbeddingTable::parse("t0 1\nzz 1\n", &g, Path::new("e.txt")),
            Err(Error::Lookup { .. })
        ));
        assert!(matches!(
            EmbeddingTable::parse("t0 1\nt1 1\n", &g, Path::new("e.txt")),
            Err(Error::Validation(_))
        ));
    }
}
