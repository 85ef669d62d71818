//! Generator quality head, subset generation, and the averaging
//! discriminator with its reward.
//!
//! The generator maps `[feature_g; z]` through one linear layer and a sigmoid
//! to per-tag posteriors `q`, then samples a path-distinct subset from the
//! DPP whose quality is `sqrt(q)`, so that `L(t, t) = q_t`. The
//! discriminator averages per-tag sigmoid relevance scores of
//! `[feature_d; t_i]` over the subset.

use std::sync::OnceLock;

use rand::Rng;

use crate::dpp::{sample_best_of, DppKernel, EmbeddingTable, SimilarityMatrix};
use crate::error::{Error, Result};
use crate::graph::{GroundTruthFamily, SemanticGraph};
use crate::rng::RngStreams;
use crate::subset::{PathId, TagId, TagSubset};

/// Lower/upper clamp on discriminator outputs.
pub const D_CLAMP: f64 = 1e-6;

#[inline]
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Vocabulary-level inputs shared by every image: the hierarchy, tag
/// embeddings, and the similarity matrix derived from them.
#[derive(Clone, Debug)]
pub struct TagSpace {
    pub graph: SemanticGraph,
    pub embeddings: EmbeddingTable,
    pub similarity: SimilarityMatrix,
}

impl TagSpace {
    pub fn new(graph: SemanticGraph, embeddings: EmbeddingTable) -> Result<Self> {
        if embeddings.len() != graph.num_tags() {
            return Err(Error::Shape(format!(
                "{} embeddings for {} tags",
                embeddings.len(),
                graph.num_tags()
            )));
        }
        let similarity = SimilarityMatrix::from_embeddings(&embeddings)?;
        Ok(TagSpace {
            graph,
            embeddings,
            similarity,
        })
    }

    pub fn num_tags(&self) -> usize {
        self.graph.num_tags()
    }
}

#[derive(Debug)]
pub struct ImageRecord {
    pub id: String,
    pub feature_g: Vec<f64>,
    /// Discriminator feature; `None` aliases `feature_g`.
    pub feature_d: Option<Vec<f64>>,
    /// Tags as labeled in the source data.
    pub labels: Vec<TagId>,
    /// Ground-truth semantic paths, ascending.
    pub gt_paths: Vec<PathId>,
    family: OnceLock<GroundTruthFamily>,
}

impl Clone for ImageRecord {
    fn clone(&self) -> Self {
        ImageRecord {
            id: self.id.clone(),
            feature_g: self.feature_g.clone(),
            feature_d: self.feature_d.clone(),
            labels: self.labels.clone(),
            gt_paths: self.gt_paths.clone(),
            family: self.family.clone(),
        }
    }
}

impl ImageRecord {
    /// Derives `gt_paths` as every path touched by a labeled tag.
    pub fn new(
        id: impl Into<String>,
        feature_g: Vec<f64>,
        feature_d: Option<Vec<f64>>,
        labels: Vec<TagId>,
        graph: &SemanticGraph,
    ) -> Result<Self> {
        let gt_paths = graph.paths_of_tags(&labels)?;
        Ok(ImageRecord {
            id: id.into(),
            feature_g,
            feature_d,
            labels,
            gt_paths,
            family: OnceLock::new(),
        })
    }

    pub fn feature_d(&self) -> &[f64] {
        self.feature_d.as_deref().unwrap_or(&self.feature_g)
    }

    /// The ground-truth subset family, enumerated on first use.
    pub fn gt_family(&self, graph: &SemanticGraph) -> Result<&GroundTruthFamily> {
        if let Some(f) = self.family.get() {
            return Ok(f);
        }
        let mut fam = graph.enumerate_ground_truth_family(&self.gt_paths)?;
        fam.image_id = self.id.clone();
        Ok(self.family.get_or_init(|| fam))
    }

    /// Indicator over tags lying on any ground-truth path.
    pub fn gt_tag_indicator(&self, graph: &SemanticGraph) -> Vec<bool> {
        let mut y = vec![false; graph.num_tags()];
        for &p in &self.gt_paths {
            for &t in &graph.paths()[p].node_ids {
                y[t] = true;
            }
        }
        y
    }
}

/// Linear quality head: `q = sigmoid(W [feature; z] + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorParams {
    pub m: usize,
    pub d_g: usize,
    pub d_z: usize,
    /// Row-major `m x (d_g + d_z)`; row `t` scores tag `t`.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl GeneratorParams {
    pub fn zeros(m: usize, d_g: usize, d_z: usize) -> Self {
        GeneratorParams {
            m,
            d_g,
            d_z,
            w: vec![0.0; m * (d_g + d_z)],
            b: vec![0.0; m],
        }
    }

    /// Feature columns and bias at zero, noise columns `U[-0.01, 0.01]`.
    pub fn init<R: Rng + ?Sized>(m: usize, d_g: usize, d_z: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(m, d_g, d_z);
        let d = d_g + d_z;
        for t in 0..m {
            for c in d_g..d {
                p.w[t * d + c] = rng.random_range(-0.01..=0.01);
            }
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.d_g + self.d_z
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let d = self.input_dim();
        &self.w[t * d..(t + 1) * d]
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.b).all(|x| x.is_finite())
    }

    fn input(&self, feature: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        if feature.len() != self.d_g {
            return Err(Error::Shape(format!(
                "generator feature has length {}, expected {}",
                feature.len(),
                self.d_g
            )));
        }
        if z.len() != self.d_z {
            return Err(Error::Shape(format!(
                "noise has length {}, expected {}",
                z.len(),
                self.d_z
            )));
        }
        if let Some(v) = z.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("noise entry {v} outside [-1, 1]")));
        }
        let mut x = Vec::with_capacity(self.input_dim());
        x.extend_from_slice(feature);
        x.extend_from_slice(z);
        Ok(x)
    }

    /// Logits and the concatenated input they were computed from.
    pub fn logits(&self, feature: &[f64], z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let x = self.input(feature, z)?;
        let logits: Vec<f64> = (0..self.m)
            .map(|t| self.row(t).iter().zip(&x).map(|(w, v)| w * v).sum::<f64>() + self.b[t])
            .collect();
        Ok((logits, x))
    }

    /// Per-tag posteriors in `[0, 1]`.
    pub fn quality(&self, feature: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        let (logits, _) = self.logits(feature, z)?;
        let q: Vec<f64> = logits.into_iter().map(sigmoid).collect();
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "generator produced a non-finite posterior".into(),
            ));
        }
        Ok(q)
    }
}

pub fn generator_quality(
    params: &GeneratorParams,
    image: &ImageRecord,
    z: &[f64],
) -> Result<Vec<f64>> {
    params.quality(&image.feature_g, z)
}

/// `d_z` i.i.d. draws from `U[-1, 1]`.
pub fn sample_noise<R: Rng + ?Sized>(d_z: usize, rng: &mut R) -> Vec<f64> {
    (0..d_z).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Builds the DPP with quality `sqrt(q)` and keeps the heaviest of
/// `repeats` path-distinct draws of at most `k` tags.
#[allow(clippy::too_many_arguments)]
pub fn generate_subset<R: Rng + ?Sized>(
    params: &GeneratorParams,
    image: &ImageRecord,
    z: &[f64],
    space: &TagSpace,
    k: usize,
    repeats: usize,
    rng: &mut R,
) -> Result<TagSubset> {
    let q = generator_quality(params, image, z)?;
    let kernel = DppKernel::new(q.into_iter().map(f64::sqrt).collect(), &space.similarity)?;
    sample_best_of(&kernel, &space.graph, k, repeats, rng)
}

/// One best-of subset per independent noise draw, in draw order.
pub fn generate_diverse_set(
    params: &GeneratorParams,
    image: &ImageRecord,
    space: &TagSpace,
    n_noise: usize,
    k: usize,
    repeats: usize,
    streams: &mut RngStreams,
) -> Result<Vec<TagSubset>> {
    if n_noise == 0 {
        return Err(Error::Domain("n_noise must be at least 1".into()));
    }
    (0..n_noise)
        .map(|_| {
            let z = sample_noise(params.d_z, &mut streams.noise);
            generate_subset(params, image, &z, space, k, repeats, &mut streams.sampling)
        })
        .collect()
}

/// `D(I, T) = mean_i sigmoid(w . [feature_d; t_i] + b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorParams {
    pub d_d: usize,
    pub e_dim: usize,
    pub w: Vec<f64>,
    pub b: f64,
}

impl DiscriminatorParams {
    pub fn zeros(d_d: usize, e_dim: usize) -> Self {
        DiscriminatorParams {
            d_d,
            e_dim,
            w: vec![0.0; d_d + e_dim],
            b: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.b.is_finite() && self.w.iter().all(|x| x.is_finite())
    }

    /// Logit of `[feature; embedding]`.
    pub fn tag_logit(&self, feature: &[f64], embedding: &[f64]) -> f64 {
        let (wf, we) = self.w.split_at(self.d_d);
        let a: f64 = wf.iter().zip(feature).map(|(w, x)| w * x).sum();
        let e: f64 = we.iter().zip(embedding).map(|(w, x)| w * x).sum();
        a + e + self.b
    }

    pub(crate) fn check_shapes(&self, feature: &[f64], embeddings: &EmbeddingTable) -> Result<()> {
        if feature.len() != self.d_d {
            return Err(Error::Shape(format!(
                "discriminator feature has length {}, expected {}",
                feature.len(),
                self.d_d
            )));
        }
        if embeddings.dim() != self.e_dim {
            return Err(Error::Shape(format!(
                "embedding dimension {}, discriminator expects {}",
                embeddings.dim(),
                self.e_dim
            )));
        }
        Ok(())
    }
}

/// Unclamped average relevance.
pub fn discriminator_mean(
    params: &DiscriminatorParams,
    image: &ImageRecord,
    subset: &TagSubset,
    embeddings: &EmbeddingTable,
) -> Result<f64> {
    if subset.is_empty() {
        return Err(Error::Domain(
            "discriminator needs a nonempty subset".into(),
        ));
    }
    let f = image.feature_d();
    params.check_shapes(f, embeddings)?;
    let mut sum = 0.0;
    for &t in subset.ids() {
        if t >= embeddings.len() {
            return Err(Error::lookup("tag id", t));
        }
        sum += sigmoid(params.tag_logit(f, embeddings.vector(t)));
    }
    Ok(sum / subset.len() as f64)
}

/// Average relevance clamped to `[D_CLAMP, 1 - D_CLAMP]`.
pub fn discriminator_score(
    params: &DiscriminatorParams,
    image: &ImageRecord,
    subset: &TagSubset,
    embeddings: &EmbeddingTable,
) -> Result<f64> {
    Ok(discriminator_mean(params, image, subset, embeddings)?.clamp(D_CLAMP, 1.0 - D_CLAMP))
}

/// `-ln(1 - d)` for an already clamped score.
#[inline]
pub fn reward_from_score(d: f64) -> f64 {
    -(-d).ln_1p()
}

pub fn reward(
    params: &DiscriminatorParams,
    image: &ImageRecord,
    subset: &TagSubset,
    embeddings: &EmbeddingTable,
) -> Result<f64> {
    Ok(reward_from_score(discriminator_score(
        params, image, subset, embeddings,
    )?))
}
