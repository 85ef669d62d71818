//! C ABI over `tagdiv`.
//!
//! Objects are opaque handles created by `*_new`/`*_load` and released by
//! the matching `*_free`. Every fallible call returns a [`TagdivStatus`];
//! on failure `tagdiv_last_error` describes the most recent error on the
//! calling thread. Output buffers are caller-owned: the callee writes at
//! most `cap` ids and always stores the true length, returning
//! `TAGDIV_STATUS_BUFFER_TOO_SMALL` when it does not fit.
//!
//! # Safety
//!
//! Every pointer argument must be null or valid for the access its name
//! implies: handles must come from this library and not be freed yet,
//! strings must be NUL-terminated, and `(ptr, len)` pairs must cover `len`
//! elements. Null pointers are reported as `TAGDIV_STATUS_NULL_POINTER`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use tagdiv::checkpoint::load_checkpoint;
use tagdiv::linalg::SquareMatrix;
use tagdiv::metrics::single_and_ensemble;
use tagdiv::model::generate_diverse_set;
use tagdiv::rng::{purpose, stream, RngStreams};
use tagdiv::{
    DppKernel, EmbeddingTable, Error, GeneratorParams, ImageRecord, SemanticGraph,
    SimilarityMatrix, TagSpace, TagSubset,
};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TagdivStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Validation = 3,
    Lookup = 4,
    Shape = 5,
    Numeric = 6,
    Io = 7,
    Format = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Weighted path-level precision, recall and F1.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TagdivPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Tag hierarchy and its semantic paths.
pub struct TagdivGraph(SemanticGraph);

/// DPP kernel: per-tag quality and a similarity matrix.
pub struct TagdivKernel {
    quality: Vec<f64>,
    similarity: SimilarityMatrix,
}

/// Trained generator with its tag space.
pub struct TagdivModel {
    space: TagSpace,
    generator: GeneratorParams,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

enum Failure {
    Status(TagdivStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn status_of(e: &Error) -> TagdivStatus {
    match e {
        Error::Io { .. } => TagdivStatus::Io,
        Error::Format { .. } => TagdivStatus::Format,
        Error::Lookup { .. } => TagdivStatus::Lookup,
        Error::Shape(_) => TagdivStatus::Shape,
        Error::Numeric(_) | Error::SingularConditioning => TagdivStatus::Numeric,
        Error::Domain(_) => TagdivStatus::InvalidArgument,
        Error::Validation(_)
        | Error::MultiParent(_)
        | Error::Cycle(_)
        | Error::DegenerateEmbedding(_) => TagdivStatus::Validation,
    }
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TagdivStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            TagdivStatus::Ok
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            TagdivStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure::Status(TagdivStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Status(TagdivStatus::InvalidArgument, msg.into())
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))?;
    Ok(PathBuf::from(s))
}

unsafe fn subset(ids: *const usize, len: usize) -> Result<TagSubset, Failure> {
    Ok(TagSubset::new(slice(ids, len, "ids")?.iter().copied()))
}

unsafe fn write_ids(
    s: &TagSubset,
    buf: *mut usize,
    cap: usize,
    len: *mut usize,
) -> Result<(), Failure> {
    *out(len, "out_len")? = s.len();
    if s.len() > cap {
        return Err(Failure::Status(
            TagdivStatus::BufferTooSmall,
            format!("need room for {} ids, buffer holds {cap}", s.len()),
        ));
    }
    if !s.is_empty() {
        if buf.is_null() {
            return Err(null("out_ids"));
        }
        std::slice::from_raw_parts_mut(buf, s.len()).copy_from_slice(s.ids());
    }
    Ok(())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `cap`). Returns the full message length excluding the NUL.
#[no_mangle]
pub unsafe extern "C" fn tagdiv_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && cap > 0 {
            let n = msg.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Loads a hierarchy file (`id<TAB>name|syn..<TAB>parent_id` per line).
#[no_mangle]
pub unsafe extern "C" fn tagdiv_graph_load(
    path_utf8: *const c_char,
    out_graph: *mut *mut TagdivGraph,
) -> TagdivStatus {
    guard(|| {
        let slot = out(out_graph, "out_graph")?;
        *slot = std::ptr::null_mut();
        let g = SemanticGraph::read_hierarchy(&path(path_utf8, "path")?)?;
        *slot = Box::into_raw(Box::new(TagdivGraph(g)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tagdiv_graph_free(graph: *mut TagdivGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

#[no_mangle]
pub unsafe extern "C" fn tagdiv_graph_num_tags(
    graph: *const TagdivGraph,
    out_n: *mut usize,
) -> TagdivStatus {
    guard(|| {
        *out(out_n, "out_n")? = deref(graph, "graph")?.0.num_tags();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tagdiv_graph_num_paths(
    graph: *const TagdivGraph,
    out_n: *mut usize,
) -> TagdivStatus {
    guard(|| {
        *out(out_n, "out_n")? = deref(graph, "graph")?.0.num_paths();
        Ok(())
    })
}

/// Resolves a canonical name or synonym to its tag id.
#[no_mangle]
pub unsafe extern "C" fn tagdiv_graph_lookup(
    graph: *const TagdivGraph,
    name_utf8: *const c_char,
    out_id: *mut usize,
) -> TagdivStatus {
    guard(|| {
        let g = &deref(graph, "graph")?.0;
        if name_utf8.is_null() {
            return Err(null("name"));
        }
        let name = CStr::from_ptr(name_utf8)
            .to_str()
            .map_err(|_| invalid("name is not UTF-8"))?;
        *out(out_id, "out_id")? = g.lookup(name).ok_or_else(|| Error::Lookup {
            kind: "tag",
            key: name.to_string(),
        })?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tagdiv_graph_tag_weight(
    graph: *const TagdivGraph,
    id: usize,
    out_w: *mut f64,
) -> TagdivStatus {
    guard(|| {
        *out(out_w, "out_w")? = deref(graph, "graph")?.0.tag_weight(id)?;
        Ok(())
    })
}

/// Stores 1 when the two tags lie on a common semantic path, else 0.
#[no_mangle]
pub unsafe extern "C" fn tagdiv_graph_shares_path(
    graph: *const TagdivGraph,
    a: usize,
    b: usize,
    out_shared: *mut i32,
) -> TagdivStatus {
    guard(|| {
        *out(out_shared, "out_shared")? = deref(graph, "graph")?.0.shares_path(a, b)? as i32;
        Ok(())
    })
}

/// Builds a kernel from `m` nonnegative qualities and a row-major `m x m`
/// similarity matrix (symmetric, unit diagonal, entries in [0, 1]).
#[no_mangle]
pub unsafe extern "C" fn tagdiv_kernel_new(
    quality: *const f64,
    m: usize,
    similarity: *const f64,
    out_kernel: *mut *mut TagdivKernel,
) -> TagdivStatus {
    guard(|| {
        let slot = out(out_kernel, "out_kernel")?;
        *slot = std::ptr::null_mut();
        let q = slice(quality, m, "quality")?.to_vec();
        let s = slice(
            similarity,
            m.checked_mul(m).ok_or_else(|| invalid("m too large"))?,
            "similarity",
        )?;
        let similarity =
            SimilarityMatrix::from_matrix(SquareMatrix::from_row_major(m, s.to_vec()))?;
        DppKernel::new(q.clone(), &similarity)?;
        *slot = Box::into_raw(Box::new(TagdivKernel {
            quality: q,
            similarity,
        }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tagdiv_kernel_free(kernel: *mut TagdivKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

fn kernel_view(k: &TagdivKernel) -> Result<DppKernel<'_>, Failure> {
    Ok(DppKernel::new(k.quality.clone(), &k.similarity)?)
}

/// Probability of exactly `ids` under the unconstrained DPP.
#[no_mangle]
pub unsafe extern "C" fn tagdiv_kernel_subset_probability(
    kernel: *const TagdivKernel,
    ids: *const usize,
    n: usize,
    out_p: *mut f64,
) -> TagdivStatus {
    guard(|| {
        let k = kernel_view(deref(kernel, "kernel")?)?;
        *out(out_p, "out_p")? = k.subset_probability(&subset(ids, n)?)?;
        Ok(())
    })
}

/// Draws `repeats` path-distinct subsets of at most `k` tags and writes the
/// heaviest one, in draw order. Deterministic in `seed`.
#[no_mangle]
pub unsafe extern "C" fn tagdiv_sample_best_of(
    kernel: *const TagdivKernel,
    graph: *const TagdivGraph,
    k: usize,
    repeats: usize,
    seed: u64,
    out_ids: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> TagdivStatus {
    guard(|| {
        let kern = kernel_view(deref(kernel, "kernel")?)?;
        let g = &deref(graph, "graph")?.0;
        if kern.len() != g.num_tags() {
            return Err(Error::Shape(format!(
                "kernel has {} tags, graph has {}",
                kern.len(),
                g.num_tags()
            ))
            .into());
        }
        let mut rng = stream(seed, purpose::SAMPLING);
        let s = tagdiv::sample_best_of(&kern, g, k, repeats, &mut rng)?;
        write_ids(&s, out_ids, cap, out_len)
    })
}

#[no_mangle]
pub unsafe extern "C" fn tagdiv_semantic_prf(
    graph: *const TagdivGraph,
    ids: *const usize,
    n: usize,
    gt_paths: *const usize,
    n_gt: usize,
    out_prf: *mut TagdivPrf,
) -> TagdivStatus {
    guard(|| {
        let g = &deref(graph, "graph")?.0;
        let gt = slice(gt_paths, n_gt, "gt_paths")?;
        let p = tagdiv::semantic_prf(g, &subset(ids, n)?, gt)?;
        *out(out_prf, "out_prf")? = TagdivPrf {
            precision: p.precision,
            recall: p.recall,
            f1: p.f1,
        };
        Ok(())
    })
}

/// Loads a tag space and the generator of a training checkpoint.
#[no_mangle]
pub unsafe extern "C" fn tagdiv_model_load(
    hierarchy_utf8: *const c_char,
    embeddings_utf8: *const c_char,
    checkpoint_utf8: *const c_char,
    out_model: *mut *mut TagdivModel,
) -> TagdivStatus {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        *slot = std::ptr::null_mut();
        let graph = SemanticGraph::read_hierarchy(&path(hierarchy_utf8, "hierarchy")?)?;
        let emb = EmbeddingTable::read(&path(embeddings_utf8, "embeddings")?, &graph)?;
        let (state, _) = load_checkpoint(&path(checkpoint_utf8, "checkpoint")?)?;
        if state.generator.m != graph.num_tags() {
            return Err(Error::Shape(format!(
                "checkpoint has {} tags, hierarchy has {}",
                state.generator.m,
                graph.num_tags()
            ))
            .into());
        }
        let space = TagSpace::new(graph, emb)?;
        *slot = Box::into_raw(Box::new(TagdivModel {
            space,
            generator: state.generator,
        }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tagdiv_model_free(model: *mut TagdivModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

#[no_mangle]
pub unsafe extern "C" fn tagdiv_model_feature_dim(
    model: *const TagdivModel,
    out_d: *mut usize,
) -> TagdivStatus {
    guard(|| {
        *out(out_d, "out_d")? = deref(model, "model")?.generator.d_g;
        Ok(())
    })
}

/// Tags one image: draws `n_noise` subsets of at most `k` tags, writes the
/// heaviest as the single subset and the union of the `top` heaviest as
/// the ensemble subset. Deterministic in `seed`.
#[no_mangle]
pub unsafe extern "C" fn tagdiv_model_annotate(
    model: *const TagdivModel,
    feature: *const f64,
    d: usize,
    n_noise: usize,
    k: usize,
    top: usize,
    repeats: usize,
    seed: u64,
    out_single: *mut usize,
    single_cap: usize,
    out_single_len: *mut usize,
    out_ensemble: *mut usize,
    ensemble_cap: usize,
    out_ensemble_len: *mut usize,
) -> TagdivStatus {
    guard(|| {
        let m = deref(model, "model")?;
        if d != m.generator.d_g {
            return Err(Error::Shape(format!(
                "feature has length {d}, model expects {}",
                m.generator.d_g
            ))
            .into());
        }
        if top == 0 || top > n_noise {
            return Err(invalid("top must be between 1 and n_noise"));
        }
        let f = slice(feature, d, "feature")?.to_vec();
        let image = ImageRecord::new("ffi", f, None, Vec::new(), &m.space.graph)?;
        let mut streams = RngStreams::for_eval(seed, 0);
        let samples = generate_diverse_set(
            &m.generator,
            &image,
            &m.space,
            n_noise,
            k,
            repeats,
            &mut streams,
        )?;
        let (single, ensemble) = single_and_ensemble(&m.space.graph, &samples, top)?;
        write_ids(&single, out_single, single_cap, out_single_len)?;
        write_ids(&ensemble, out_ensemble, ensemble_cap, out_ensemble_len)
    })
}
