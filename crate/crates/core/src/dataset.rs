//! Dataset files and the synthetic corpus.
//!
//! A dataset directory holds:
//!
//! ```text
//! hierarchy.tsv             tag forest (see `graph`)
//! embeddings.txt            `name v1 .. vD` per tag
//! train.feat, test.feat     generator features (D2IF)
//! train.labels, test.labels `image_id tag tag ..` per image, feature order
//! train.dfeat, test.dfeat   optional discriminator features (D2IF)
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dpp::EmbeddingTable;
use crate::error::{Error, Result};
use crate::graph::{SemanticGraph, TagSpec};
use crate::io::{read_features, write_atomic, write_features, FeatureBlock};
use crate::model::{ImageRecord, TagSpace};
use crate::rng::stream;
use crate::subset::TagId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetHeader {
    pub n_train: usize,
    pub n_test: usize,
    pub m: usize,
    pub n_paths: usize,
    pub d_g: usize,
    pub d_d: usize,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub space: TagSpace,
    pub train: Vec<ImageRecord>,
    pub test: Vec<ImageRecord>,
}

impl Dataset {
    /// Validates feature lengths against each other and the tag space.
    pub fn new(space: TagSpace, train: Vec<ImageRecord>, test: Vec<ImageRecord>) -> Result<Self> {
        let first = train.first().or(test.first());
        let (d_g, d_d) = first
            .map(|r| (r.feature_g.len(), r.feature_d().len()))
            .unwrap_or((0, 0));
        for r in train.iter().chain(&test) {
            if r.feature_g.len() != d_g || r.feature_d().len() != d_d {
                return Err(Error::Shape(format!(
                    "image {} has feature lengths ({}, {}), expected ({d_g}, {d_d})",
                    r.id,
                    r.feature_g.len(),
                    r.feature_d().len()
                )));
            }
            if let Some(&p) = r.gt_paths.iter().find(|&&p| p >= space.graph.num_paths()) {
                return Err(Error::lookup("path id", p));
            }
        }
        Ok(Dataset { space, train, test })
    }

    pub fn header(&self) -> DatasetHeader {
        let first = self.train.first().or(self.test.first());
        DatasetHeader {
            n_train: self.train.len(),
            n_test: self.test.len(),
            m: self.space.num_tags(),
            n_paths: self.space.graph.num_paths(),
            d_g: first.map_or(0, |r| r.feature_g.len()),
            d_d: first.map_or(0, |r| r.feature_d().len()),
        }
    }

    /// Writes the directory layout described in the module docs.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let graph = &self.space.graph;
        write_atomic(
            &dir.join("hierarchy.tsv"),
            graph.to_hierarchy_string().as_bytes(),
        )?;
        write_atomic(
            &dir.join("embeddings.txt"),
            self.space.embeddings.to_text().as_bytes(),
        )?;
        for (split, records) in [("train", &self.train), ("test", &self.test)] {
            let h = self.header();
            let rows: Vec<Vec<f64>> = records.iter().map(|r| r.feature_g.clone()).collect();
            write_features(&dir.join(format!("{split}.feat")), &rows, h.d_g)?;
            if records.iter().any(|r| r.feature_d.is_some()) {
                let rows: Vec<Vec<f64>> = records.iter().map(|r| r.feature_d().to_vec()).collect();
                write_features(&dir.join(format!("{split}.dfeat")), &rows, h.d_d)?;
            }
            let mut labels = String::new();
            for r in records.iter() {
                labels.push_str(&r.id);
                for &t in &r.labels {
                    labels.push(' ');
                    labels.push_str(graph.name(t)?);
                }
                labels.push('\n');
            }
            write_atomic(&dir.join(format!("{split}.labels")), labels.as_bytes())?;
        }
        Ok(())
    }
}

/// File locations for one dataset.
#[derive(Clone, Debug)]
pub struct DatasetPaths {
    pub hierarchy: PathBuf,
    pub embeddings: PathBuf,
    pub train_features: PathBuf,
    pub train_labels: PathBuf,
    pub test_features: PathBuf,
    pub test_labels: PathBuf,
    pub train_dfeatures: Option<PathBuf>,
    pub test_dfeatures: Option<PathBuf>,
}

impl DatasetPaths {
    /// Standard names under `dir`; discriminator features are used when present.
    pub fn in_dir(dir: &Path) -> Self {
        let opt = |name: &str| Some(dir.join(name)).filter(|p| p.exists());
        DatasetPaths {
            hierarchy: dir.join("hierarchy.tsv"),
            embeddings: dir.join("embeddings.txt"),
            train_features: dir.join("train.feat"),
            train_labels: dir.join("train.labels"),
            test_features: dir.join("test.feat"),
            test_labels: dir.join("test.labels"),
            train_dfeatures: opt("train.dfeat"),
            test_dfeatures: opt("test.dfeat"),
        }
    }
}

/// Parses a labels file: one line per image, id then tag names (synonyms
/// accepted). Blank lines are skipped.
pub fn parse_labels(
    text: &str,
    graph: &SemanticGraph,
    source: &Path,
) -> Result<Vec<(String, Vec<TagId>)>> {
    let mut out = Vec::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let line_offset = offset;
        offset += line.len() as u64;
        let mut fields = line.split_whitespace();
        let Some(id) = fields.next() else { continue };
        let mut tags = Vec::new();
        for name in fields {
            let t = graph.lookup(name).ok_or_else(|| {
                Error::format(
                    source,
                    line_offset,
                    format!("unknown tag `{name}` for image {id}"),
                )
            })?;
            if !tags.contains(&t) {
                tags.push(t);
            }
        }
        out.push((id.to_string(), tags));
    }
    Ok(out)
}

/// Builds the image records of one split from its feature and label files.
pub fn load_split(
    graph: &SemanticGraph,
    features: &Path,
    labels: &Path,
    dfeatures: Option<&Path>,
) -> Result<Vec<ImageRecord>> {
    let fg = read_features(features)?;
    let text = std::fs::read_to_string(labels).map_err(|e| Error::io(labels, e))?;
    let labels_v = parse_labels(&text, graph, labels)?;
    if labels_v.len() != fg.n {
        return Err(Error::Shape(format!(
            "{} lists {} images but {} holds {}",
            labels.display(),
            labels_v.len(),
            features.display(),
            fg.n
        )));
    }
    let fd: Option<FeatureBlock> = dfeatures.map(read_features).transpose()?;
    if let Some(fd) = &fd {
        if fd.n != fg.n {
            return Err(Error::Shape(format!(
                "{} holds {} images, expected {}",
                dfeatures.unwrap().display(),
                fd.n,
                fg.n
            )));
        }
    }
    labels_v
        .into_iter()
        .enumerate()
        .map(|(i, (id, tags))| {
            let d = fd.as_ref().map(|b| b.row(i).to_vec());
            ImageRecord::new(id, fg.row(i).to_vec(), d, tags, graph)
        })
        .collect()
}

pub fn load_dataset(paths: &DatasetPaths) -> Result<Dataset> {
    let graph = SemanticGraph::read_hierarchy(&paths.hierarchy)?;
    let emb = EmbeddingTable::read(&paths.embeddings, &graph)?;
    let train = load_split(
        &graph,
        &paths.train_features,
        &paths.train_labels,
        paths.train_dfeatures.as_deref(),
    )?;
    let test = load_split(
        &graph,
        &paths.test_features,
        &paths.test_labels,
        paths.test_dfeatures.as_deref(),
    )?;
    let space = TagSpace::new(graph, emb)?;
    Dataset::new(space, train, test)
}

pub fn load_dir(dir: &Path) -> Result<Dataset> {
    load_dataset(&DatasetPaths::in_dir(dir))
}

/// Parameters of the synthetic corpus.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub m: usize,
    pub n_paths: usize,
    pub max_depth: usize,
    /// Train plus test images.
    pub n_images: usize,
    pub n_test: usize,
    pub d_g: usize,
    pub embed_dim: usize,
    /// Standard deviation of the Gaussian feature noise.
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// The fixture used by end-to-end tests: 30 tags on 10 paths of depth 3,
    /// 500 images of which 100 are held out.
    pub fn canonical(seed: u64) -> Self {
        SynthSpec {
            m: 30,
            n_paths: 10,
            max_depth: 3,
            n_images: 500,
            n_test: 100,
            d_g: 60,
            embed_dim: 16,
            noise: 0.5,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.n_paths == 0 || self.max_depth == 0 {
            return bad("n_paths and max_depth must be at least 1".into());
        }
        if self.m < self.n_paths || self.m > self.n_paths * self.max_depth {
            return bad(format!(
                "{} tags cannot form {} paths of depth at most {}",
                self.m, self.n_paths, self.max_depth
            ));
        }
        if self.d_g < self.m {
            return bad(format!(
                "feature dimension {} is below the tag count {}",
                self.d_g, self.m
            ));
        }
        if self.n_paths < 2 {
            return bad("at least 2 paths are needed for multi-path images".into());
        }
        if self.n_test > self.n_images {
            return bad("n_test exceeds n_images".into());
        }
        if self.embed_dim == 0 {
            return bad("embed_dim must be at least 1".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!(
                "noise level {} must be finite and nonnegative",
                self.noise
            ));
        }
        Ok(())
    }
}

fn unit_gaussian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Disjoint chains, one path each. Tag names are `t<path>_<level>` with
/// level 0 at the root.
pub fn generate_synthetic_dataset(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = stream(spec.seed, 0);

    // Chain lengths: one tag each, the rest spread over chains with room.
    let mut lens = vec![1usize; spec.n_paths];
    for _ in 0..spec.m - spec.n_paths {
        let open: Vec<usize> = (0..spec.n_paths)
            .filter(|&c| lens[c] < spec.max_depth)
            .collect();
        lens[open[rng.random_range(0..open.len())]] += 1;
    }
    let mut tags = Vec::with_capacity(spec.m);
    let mut edges = Vec::new();
    let mut chains: Vec<Vec<String>> = Vec::with_capacity(spec.n_paths);
    for (c, &len) in lens.iter().enumerate() {
        let names: Vec<String> = (0..len).map(|l| format!("t{c}_{l}")).collect();
        for l in 1..len {
            edges.push((names[l].clone(), names[l - 1].clone()));
        }
        tags.extend(names.iter().map(|n| TagSpec::new(n)));
        chains.push(names);
    }
    let graph = SemanticGraph::build(&tags, &edges)?;

    // Tags of one chain share a direction, so related tags are similar.
    let mut vectors = vec![Vec::new(); spec.m];
    for chain in &chains {
        let base = unit_gaussian(spec.embed_dim, &mut rng);
        for name in chain {
            let jitter = unit_gaussian(spec.embed_dim, &mut rng);
            let v: Vec<f64> = base.iter().zip(&jitter).map(|(b, j)| b + 0.5 * j).collect();
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            vectors[graph.lookup(name).unwrap()] = v.into_iter().map(|x| x / n).collect();
        }
    }
    let names = graph
        .nodes()
        .iter()
        .map(|n| n.canonical_name.clone())
        .collect();
    let emb = EmbeddingTable::new(names, vectors)?;

    let block = spec.d_g / spec.m;
    let mut records = Vec::with_capacity(spec.n_images);
    for i in 0..spec.n_images {
        let n_gt = rng.random_range(2..=4.min(spec.n_paths));
        let mut picked = index::sample(&mut rng, spec.n_paths, n_gt).into_vec();
        picked.sort_unstable();
        let labels: Vec<TagId> = picked
            .iter()
            .map(|&c| {
                graph
                    .lookup(&chains[c][rng.random_range(0..lens[c])])
                    .unwrap()
            })
            .collect();
        let mut feature: Vec<f64> = (0..spec.d_g)
            .map(|_| {
                let n: f64 = StandardNormal.sample(&mut rng);
                spec.noise * n
            })
            .collect();
        for &t in &labels {
            feature[t * block..(t + 1) * block]
                .iter_mut()
                .for_each(|x| *x += 1.0);
        }
        // Round through f32 so the in-memory corpus equals its file form.
        let feature = feature.into_iter().map(|x| x as f32 as f64).collect();
        records.push(ImageRecord::new(
            format!("img{i:05}"),
            feature,
            None,
            labels,
            &graph,
        )?);
    }
    let test = records.split_off(spec.n_images - spec.n_test);
    let space = TagSpace::new(graph, emb)?;
    let ds = Dataset::new(space, records, test)?;
    check_graph_invariants(&ds.space.graph)?;
    Ok(ds)
}

/// Re-checks the structural invariants of a generated hierarchy.
fn check_graph_invariants(graph: &SemanticGraph) -> Result<()> {
    let mut on_path = vec![0usize; graph.num_tags()];
    for p in graph.paths() {
        for w in p.node_ids.windows(2) {
            if graph.parent(w[0])? != Some(w[1]) {
                return Err(Error::Validation(format!(
                    "path {} is not a parent chain",
                    p.path_id
                )));
            }
        }
        if graph.parent(*p.node_ids.last().unwrap())?.is_some()
            || !graph.children(p.leaf())?.is_empty()
        {
            return Err(Error::Validation(format!(
                "path {} does not run leaf to root",
                p.path_id
            )));
        }
        p.node_ids.iter().for_each(|&t| on_path[t] += 1);
    }
    if let Some(t) = on_path.iter().position(|&c| c == 0) {
        return Err(Error::Validation(format!("tag {t} lies on no path")));
    }
    for n in graph.nodes() {
        if !(n.weight > 0.0 && n.weight <= 1.0) {
            return Err(Error::Validation(format!(
                "tag {} has weight {}",
                n.id, n.weight
            )));
        }
    }
    Ok(())
}

/// Human-readable summary, one `key<TAB>value` per line.
pub fn describe(h: &DatasetHeader) -> String {
    let mut s = String::new();
    for (k, v) in [
        ("n_train", h.n_train),
        ("n_test", h.n_test),
        ("m", h.m),
        ("n_paths", h.n_paths),
        ("d_g", h.d_g),
        ("d_d", h.d_d),
    ] {
        let _ = writeln!(s, "{k}\t{v}");
    }
    s
}
