//! Weighted semantic-path precision, recall and F1, and the single/ensemble
//! evaluation protocols.
//!
//! For a predicted subset `T` and ground-truth paths `G`:
//!
//! - precision is the weight share of predicted tags that lie on some path
//!   in `G`;
//! - recall credits each path in `G` with the largest weight among its tags
//!   present in `T`, normalized by the sum of leaf weights over `G`;
//! - F1 is the harmonic mean, 0 when both are 0.
//!
//! Both protocols draw `n_samples` subsets per image. The single subset is
//! the heaviest one; the ensemble subset is the union of the `top` heaviest.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::SemanticGraph;
use crate::model::{generate_diverse_set, GeneratorParams, ImageRecord, TagSpace};
use crate::rng::RngStreams;
use crate::subset::{PathId, TagSubset};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PrfTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PrfTriple {
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let s = precision + recall;
        let f1 = if s > 0.0 {
            2.0 * precision * recall / s
        } else {
            0.0
        };
        PrfTriple {
            precision,
            recall,
            f1,
        }
    }
}

pub fn semantic_prf(
    graph: &SemanticGraph,
    predicted: &TagSubset,
    gt_paths: &[PathId],
) -> Result<PrfTriple> {
    for &p in gt_paths {
        graph.path(p)?;
    }
    let mut total_w = 0.0;
    let mut matched_w = 0.0;
    for &t in predicted.ids() {
        let w = graph.tag_weight(t)?;
        total_w += w;
        if graph.tag_paths(t)?.iter().any(|p| gt_paths.contains(p)) {
            matched_w += w;
        }
    }
    if predicted.is_empty() || gt_paths.is_empty() {
        return Ok(PrfTriple::default());
    }

    let mut credit = 0.0;
    let mut leaf_total = 0.0;
    for &p in gt_paths {
        let path = graph.path(p)?;
        leaf_total += graph.tag_weight(path.leaf())?;
        let best = path
            .node_ids
            .iter()
            .filter(|t| predicted.contains(**t))
            .map(|&t| graph.nodes()[t].weight)
            .fold(0.0, f64::max);
        credit += best;
    }
    let precision = if total_w > 0.0 {
        matched_w / total_w
    } else {
        0.0
    };
    let recall = if leaf_total > 0.0 {
        credit / leaf_total
    } else {
        0.0
    };
    Ok(PrfTriple::from_pr(precision, recall))
}

/// `F1_sp` of a subset, 0 when the image has no ground-truth paths.
pub fn f1_sp(graph: &SemanticGraph, subset: &TagSubset, gt_paths: &[PathId]) -> Result<f64> {
    Ok(semantic_prf(graph, subset, gt_paths)?.f1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImageEval {
    pub image_id: String,
    pub single: PrfTriple,
    pub ensemble: PrfTriple,
    pub single_size: usize,
    pub ensemble_size: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub k: usize,
    pub images: Vec<ImageEval>,
    pub mean_single: PrfTriple,
    pub mean_ensemble: PrfTriple,
    /// Images without ground-truth paths.
    pub skipped: usize,
}

/// Protocol sizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Protocol {
    pub k: usize,
    pub n_samples: usize,
    pub top: usize,
    pub repeats: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Protocol {
            k: 3,
            n_samples: 10,
            top: 5,
            repeats: 1,
        }
    }
}

impl Protocol {
    fn validate(&self) -> Result<()> {
        if self.top == 0 || self.n_samples < self.top {
            return Err(Error::Domain(format!(
                "need n_samples >= top >= 1, got n_samples={} top={}",
                self.n_samples, self.top
            )));
        }
        if self.k == 0 || self.repeats == 0 {
            return Err(Error::Domain("k and repeats must be at least 1".into()));
        }
        Ok(())
    }
}

/// Picks the single and ensemble subsets from one image's samples.
/// Ties in weight keep draw order.
pub fn single_and_ensemble(
    graph: &SemanticGraph,
    samples: &[TagSubset],
    top: usize,
) -> Result<(TagSubset, TagSubset)> {
    let mut weighted: Vec<(usize, f64)> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| Ok((i, graph.subset_weight(s)?)))
        .collect::<Result<_>>()?;
    weighted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let single = weighted
        .first()
        .map(|&(i, _)| samples[i].clone())
        .unwrap_or_default();
    let ensemble = TagSubset::new(
        weighted
            .iter()
            .take(top)
            .flat_map(|&(i, _)| samples[i].ids().iter().copied()),
    );
    Ok((single, ensemble))
}

/// Scores precomputed samples. `samples[i]` belongs to `images[i]`.
pub fn evaluate_subsets(
    graph: &SemanticGraph,
    images: &[ImageRecord],
    samples: &[Vec<TagSubset>],
    k: usize,
    top: usize,
) -> Result<EvalReport> {
    if samples.len() != images.len() {
        return Err(Error::Shape(format!(
            "{} sample lists for {} images",
            samples.len(),
            images.len()
        )));
    }
    let mut rows = Vec::new();
    let mut skipped = 0;
    for (img, s) in images.iter().zip(samples) {
        if img.gt_paths.is_empty() {
            skipped += 1;
            continue;
        }
        rows.push(score_image(graph, img, s, top)?);
    }
    Ok(finish(k, rows, skipped))
}

fn score_image(
    graph: &SemanticGraph,
    img: &ImageRecord,
    samples: &[TagSubset],
    top: usize,
) -> Result<ImageEval> {
    let (single, ensemble) = single_and_ensemble(graph, samples, top)?;
    Ok(ImageEval {
        image_id: img.id.clone(),
        single: semantic_prf(graph, &single, &img.gt_paths)?,
        ensemble: semantic_prf(graph, &ensemble, &img.gt_paths)?,
        single_size: single.len(),
        ensemble_size: ensemble.len(),
    })
}

fn finish(k: usize, images: Vec<ImageEval>, skipped: usize) -> EvalReport {
    let n = images.len().max(1) as f64;
    let mean = |f: &dyn Fn(&ImageEval) -> PrfTriple| {
        let (p, r, f1) = images.iter().map(f).fold((0.0, 0.0, 0.0), |acc, t| {
            (acc.0 + t.precision, acc.1 + t.recall, acc.2 + t.f1)
        });
        PrfTriple {
            precision: p / n,
            recall: r / n,
            f1: f1 / n,
        }
    };
    EvalReport {
        k,
        mean_single: mean(&|e| e.single),
        mean_ensemble: mean(&|e| e.ensemble),
        images,
        skipped,
    }
}

/// Runs the protocol with the generator: `n_samples` noise draws per image.
/// Image `i` uses its own evaluation streams derived from `seed`, so the
/// report does not depend on `jobs`.
pub fn evaluate_generator(
    params: &GeneratorParams,
    space: &TagSpace,
    images: &[ImageRecord],
    protocol: Protocol,
    seed: u64,
    jobs: usize,
) -> Result<EvalReport> {
    protocol.validate()?;
    let work = |i: usize| -> Result<Option<ImageEval>> {
        let img = &images[i];
        if img.gt_paths.is_empty() {
            return Ok(None);
        }
        let mut streams = RngStreams::for_eval(seed, i);
        let samples = generate_diverse_set(
            params,
            img,
            space,
            protocol.n_samples,
            protocol.k,
            protocol.repeats,
            &mut streams,
        )?;
        score_image(&space.graph, img, &samples, protocol.top).map(Some)
    };
    let results: Vec<Result<Option<ImageEval>>> = if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
        pool.install(|| (0..images.len()).into_par_iter().map(work).collect())
    } else {
        (0..images.len()).map(work).collect()
    };
    let mut rows = Vec::new();
    let mut skipped = 0;
    for r in results {
        match r? {
            Some(e) => rows.push(e),
            None => skipped += 1,
        }
    }
    Ok(finish(protocol.k, rows, skipped))
}

/// Baseline protocol: repeated sampling from a fixed per-image quality
/// vector (e.g. another model's posteriors), with quality `sqrt(q)`.
pub fn evaluate_fixed_kernel(
    space: &TagSpace,
    images: &[ImageRecord],
    posteriors: &[Vec<f64>],
    protocol: Protocol,
    seed: u64,
) -> Result<EvalReport> {
    protocol.validate()?;
    if posteriors.len() != images.len() {
        return Err(Error::Shape(format!(
            "{} posterior vectors for {} images",
            posteriors.len(),
            images.len()
        )));
    }
    let mut samples = Vec::with_capacity(images.len());
    for (i, q) in posteriors.iter().enumerate() {
        let kernel = crate::dpp::DppKernel::new(
            q.iter().map(|v| v.max(0.0).sqrt()).collect(),
            &space.similarity,
        )?;
        let mut streams = RngStreams::for_eval(seed, i);
        let s = (0..protocol.n_samples)
            .map(|_| {
                crate::dpp::sample_best_of(
                    &kernel,
                    &space.graph,
                    protocol.k,
                    protocol.repeats,
                    &mut streams.sampling,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(s);
    }
    evaluate_subsets(&space.graph, images, &samples, protocol.k, protocol.top)
}

pub const REPORT_HEADER: &str = "image_id\tprotocol\tP\tR\tF1\tsingle_size\tensemble_size";

/// Per-image rows for every report, then a summary block laid out as
/// target x method with P/R/F1 columns per subset size, in percent.
pub fn format_report(method: &str, reports: &[EvalReport]) -> String {
    let mut out = String::new();
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for rep in reports {
        for e in &rep.images {
            for (name, t) in [("single", e.single), ("ensemble", e.ensemble)] {
                let _ = writeln!(
                    out,
                    "{}\t{}@{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}",
                    e.image_id,
                    name,
                    rep.k,
                    t.precision,
                    t.recall,
                    t.f1,
                    e.single_size,
                    e.ensemble_size
                );
            }
        }
    }
    out.push_str("# summary (%)\n");
    out.push_str("target\tmethod");
    for rep in reports {
        let _ = write!(out, "\tP@{k}\tR@{k}\tF1@{k}", k = rep.k);
    }
    out.push('\n');
    for target in ["single", "ensemble"] {
        let _ = write!(out, "{target}\t{method}");
        for rep in reports {
            let t = if target == "single" {
                rep.mean_single
            } else {
                rep.mean_ensemble
            };
            let _ = write!(
                out,
                "\t{:.2}\t{:.2}\t{:.2}",
                100.0 * t.precision,
                100.0 * t.recall,
                100.0 * t.f1
            );
        }
        out.push('\n');
    }
    let skipped: Vec<String> = reports.iter().map(|r| r.skipped.to_string()).collect();
    let _ = writeln!(out, "# skipped\t{}", skipped.join("\t"));
    out
}
