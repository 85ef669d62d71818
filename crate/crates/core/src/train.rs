//! Alternating adversarial training.
//!
//! Generator step: per image draw one noise vector, sample
//! `candidates_per_step` subsets, keep the one with the best `F1_sp`, and
//! ascend the policy-gradient surrogate
//!
//! ```text
//! J = sum_i R(I, T[..i]) * sum_t [ y_it log q_t + (1 - y_it) log(1 - q_t) ]
//! ```
//!
//! where `y_i` is the indicator of the first `i` sampled tags and
//! `R = -ln(1 - D)`. Rewards are plain numbers here; no gradient flows
//! through the discriminator.
//!
//! Discriminator step: ascend
//!
//! ```text
//! mean_{T in real} [ b log D(T) - (1-b)(D(T) - F1(T))^2 ]
//!   + b log(1 - D(T_G)) - (1-b)(D(T_G) - F1(T_G))^2
//! ```
//!
//! Both updates are plain SGD ascent with L2 decay on the weight matrices
//! (not on biases), mean-reduced over each batch in batch order.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_generator, f1_sp, Protocol};
use crate::model::{
    discriminator_score, generate_subset, reward_from_score, sample_noise, sigmoid,
    DiscriminatorParams, GeneratorParams, ImageRecord, TagSpace, D_CLAMP,
};
use crate::rng::{purpose, stream, RngStreams};
use crate::subset::TagSubset;

/// Floor applied to probabilities before taking logs in the surrogate.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub weight_decay: f64,
    pub beta: f64,
    pub gt_cap: usize,
    pub candidates_per_step: usize,
    pub k: usize,
    pub repeats: usize,
    pub d_z: usize,
    pub seed: u64,
    /// Draw a fresh noise vector per candidate instead of one per image.
    pub per_candidate_noise: bool,
    pub pretrain_g_epochs: usize,
    pub pretrain_g_lr: f64,
    pub pretrain_d_epochs: usize,
    pub pretrain_d_lr: f64,
    /// Held-out protocol used for the per-epoch history.
    pub eval_n_samples: usize,
    pub eval_top: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            epochs: 50,
            lr_g: 1e-4,
            lr_d: 5e-5,
            lr_decay: 0.1,
            lr_decay_every: 10,
            weight_decay: 1e-4,
            beta: 0.5,
            gt_cap: 10,
            candidates_per_step: 10,
            k: 3,
            repeats: 1,
            d_z: 50,
            seed: 0,
            per_candidate_noise: false,
            pretrain_g_epochs: 20,
            pretrain_g_lr: 0.1,
            pretrain_d_epochs: 20,
            pretrain_d_lr: 1.0,
            eval_n_samples: 10,
            eval_top: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.lr_g, self.lr_d, self.pretrain_g_lr, self.pretrain_d_lr];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::Validation(
                "learning rates must be finite and nonnegative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Validation(format!(
                "beta = {} outside [0, 1]",
                self.beta
            )));
        }
        if !(self.weight_decay >= 0.0) || !(self.lr_decay > 0.0) {
            return Err(Error::Validation(
                "weight decay must be >= 0 and lr decay > 0".into(),
            ));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("gt_cap", self.gt_cap),
            ("candidates_per_step", self.candidates_per_step),
            ("k", self.k),
            ("repeats", self.repeats),
            ("lr_decay_every", self.lr_decay_every),
            ("eval_top", self.eval_top),
        ] {
            if v == 0 {
                return Err(Error::Validation(format!("{name} must be at least 1")));
            }
        }
        if self.eval_n_samples < self.eval_top {
            return Err(Error::Validation(
                "eval_n_samples must be >= eval_top".into(),
            ));
        }
        Ok(())
    }

    /// Learning-rate multiplier for a given epoch.
    pub fn lr_factor(&self, epoch: usize) -> f64 {
        self.lr_decay.powi((epoch / self.lr_decay_every) as i32)
    }

    pub fn eval_protocol(&self) -> Protocol {
        Protocol {
            k: self.k,
            n_samples: self.eval_n_samples,
            top: self.eval_top,
            repeats: self.repeats,
        }
    }

    /// Seed for held-out evaluation; independent of the training streams.
    pub fn eval_seed(&self) -> u64 {
        self.seed ^ 0x9e37_79b9_7f4a_7c15
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub heldout_f1: f64,
}

/// One line per epoch: epoch, lr_g, lr_d, held-out F1_sp.
pub fn format_history(history: &[EpochRecord]) -> String {
    history
        .iter()
        .map(|r| format!("{}\t{}\t{}\t{}\n", r.epoch, r.lr_g, r.lr_d, r.heldout_f1))
        .collect()
}

#[derive(Clone, Debug)]
pub struct TrainState {
    pub generator: GeneratorParams,
    pub discriminator: DiscriminatorParams,
    pub epoch: usize,
    pub streams: RngStreams,
    pub history: Vec<EpochRecord>,
}

impl TrainState {
    /// Fresh parameters sized for `dataset`; noise columns from the init stream.
    pub fn new(dataset: &Dataset, config: &TrainConfig) -> Self {
        let h = dataset.header();
        let mut init = stream(config.seed, purpose::INIT);
        TrainState {
            generator: GeneratorParams::init(h.m, h.d_g, config.d_z, &mut init),
            discriminator: DiscriminatorParams::zeros(h.d_d, dataset.space.embeddings.dim()),
            epoch: 0,
            streams: RngStreams::new(config.seed),
            history: Vec::new(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.generator.is_finite() && self.discriminator.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorGrad {
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl GeneratorGrad {
    pub fn zeros_like(p: &GeneratorParams) -> Self {
        GeneratorGrad {
            w: vec![0.0; p.w.len()],
            b: vec![0.0; p.b.len()],
        }
    }

    fn add_scaled(&mut self, other: &GeneratorGrad, s: f64) {
        self.w
            .iter_mut()
            .zip(&other.w)
            .for_each(|(a, b)| *a += s * b);
        self.b
            .iter_mut()
            .zip(&other.b)
            .for_each(|(a, b)| *a += s * b);
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiscriminatorGrad {
    pub w: Vec<f64>,
    pub b: f64,
}

impl DiscriminatorGrad {
    pub fn zeros_like(p: &DiscriminatorParams) -> Self {
        DiscriminatorGrad {
            w: vec![0.0; p.w.len()],
            b: 0.0,
        }
    }

    fn add_scaled(&mut self, other: &DiscriminatorGrad, s: f64) {
        self.w
            .iter_mut()
            .zip(&other.w)
            .for_each(|(a, b)| *a += s * b);
        self.b += s * other.b;
    }
}

/// Rewards `R(I, T[..i])` for every prefix of the sampled subset.
pub fn prefix_rewards(
    disc: &DiscriminatorParams,
    image: &ImageRecord,
    subset: &TagSubset,
    space: &TagSpace,
) -> Result<Vec<f64>> {
    (1..=subset.len())
        .map(|i| {
            let d = discriminator_score(disc, image, &subset.prefix(i), &space.embeddings)?;
            Ok(reward_from_score(d))
        })
        .collect()
}

/// The surrogate and its gradient with respect to `(W, b)` given fixed
/// per-prefix rewards.
pub fn pg_surrogate(
    gen: &GeneratorParams,
    image: &ImageRecord,
    z: &[f64],
    subset: &TagSubset,
    rewards: &[f64],
) -> Result<(f64, GeneratorGrad)> {
    if subset.is_empty() {
        return Err(Error::Domain(
            "policy gradient needs a nonempty subset".into(),
        ));
    }
    if rewards.len() != subset.len() {
        return Err(Error::Shape(format!(
            "{} rewards for a subset of {}",
            rewards.len(),
            subset.len()
        )));
    }
    let (logits, x) = gen.logits(&image.feature_g, z)?;
    let m = gen.m;
    let q: Vec<f64> = logits.iter().map(|&a| sigmoid(a)).collect();
    let log_q: Vec<f64> = q.iter().map(|&v| v.max(LOG_FLOOR).ln()).collect();
    let log_nq: Vec<f64> = q.iter().map(|&v| (1.0 - v).max(LOG_FLOOR).ln()).collect();
    // d/da of the floored logs; zero where the floor is active.
    let dlog_q: Vec<f64> = q
        .iter()
        .map(|&v| if v > LOG_FLOOR { 1.0 - v } else { 0.0 })
        .collect();
    let dlog_nq: Vec<f64> = q
        .iter()
        .map(|&v| if 1.0 - v > LOG_FLOOR { -v } else { 0.0 })
        .collect();

    let ids = subset.ids();
    let mut in_prefix = vec![false; m];
    let ll_all_out: f64 = log_nq.iter().sum();
    let mut ll_prefix_delta = 0.0;
    let mut j = 0.0;
    let mut g_logit = vec![0.0; m];
    let total_r: f64 = rewards.iter().sum();
    // Every prefix's likelihood shares the all-negative term; the tags of
    // prefix i swap their negative term for a positive one.
    for (i, &t) in ids.iter().enumerate() {
        in_prefix[t] = true;
        ll_prefix_delta += log_q[t] - log_nq[t];
        j += rewards[i] * (ll_all_out + ll_prefix_delta);
    }
    // Tag t contributes its positive derivative to every prefix that
    // contains it and its negative derivative to every other prefix.
    let mut suffix_r = vec![0.0; ids.len() + 1];
    for i in (0..ids.len()).rev() {
        suffix_r[i] = suffix_r[i + 1] + rewards[i];
    }
    for t in 0..m {
        if !in_prefix[t] {
            g_logit[t] = total_r * dlog_nq[t];
        }
    }
    for (pos, &t) in ids.iter().enumerate() {
        let r_in = suffix_r[pos];
        let r_out = total_r - r_in;
        g_logit[t] = r_in * dlog_q[t] + r_out * dlog_nq[t];
    }

    let d = gen.input_dim();
    let mut grad = GeneratorGrad::zeros_like(gen);
    for t in 0..m {
        let g = g_logit[t];
        grad.b[t] = g;
        if g != 0.0 {
            let row = &mut grad.w[t * d..(t + 1) * d];
            row.iter_mut().zip(&x).for_each(|(w, xi)| *w = g * xi);
        }
    }
    Ok((j, grad))
}

/// Surrogate objective for one image and sampled subset, with rewards from
/// the current discriminator.
pub fn pg_objective_and_gradient(
    gen: &GeneratorParams,
    disc: &DiscriminatorParams,
    image: &ImageRecord,
    z: &[f64],
    subset: &TagSubset,
    space: &TagSpace,
) -> Result<(f64, GeneratorGrad)> {
    if subset.is_empty() {
        return Err(Error::Domain(
            "policy gradient needs a nonempty subset".into(),
        ));
    }
    let rewards = prefix_rewards(disc, image, subset, space)?;
    pg_surrogate(gen, image, z, subset, &rewards)
}

/// `D(T)` and `dD/d(w, b)`, with zero gradient when the clamp is active.
fn score_and_grad(
    disc: &DiscriminatorParams,
    image: &ImageRecord,
    subset: &TagSubset,
    space: &TagSpace,
) -> Result<(f64, DiscriminatorGrad)> {
    if subset.is_empty() {
        return Err(Error::Domain(
            "discriminator needs a nonempty subset".into(),
        ));
    }
    let f = image.feature_d();
    disc.check_shapes(f, &space.embeddings)?;
    let n = subset.len() as f64;
    let mut mean = 0.0;
    let mut grad = DiscriminatorGrad::zeros_like(disc);
    for &t in subset.ids() {
        let e = space.embeddings.vector(t);
        let s = sigmoid(disc.tag_logit(f, e));
        mean += s / n;
        let ds = s * (1.0 - s) / n;
        let (gf, ge) = grad.w.split_at_mut(disc.d_d);
        gf.iter_mut().zip(f).for_each(|(g, x)| *g += ds * x);
        ge.iter_mut().zip(e).for_each(|(g, x)| *g += ds * x);
        grad.b += ds;
    }
    if mean < D_CLAMP || mean > 1.0 - D_CLAMP {
        return Ok((
            mean.clamp(D_CLAMP, 1.0 - D_CLAMP),
            DiscriminatorGrad::zeros_like(disc),
        ));
    }
    Ok((mean, grad))
}

/// The beta-blended discriminator objective and its gradient.
pub fn discriminator_objective_and_gradient(
    disc: &DiscriminatorParams,
    image: &ImageRecord,
    real: &[TagSubset],
    fake: &TagSubset,
    beta: f64,
    space: &TagSpace,
) -> Result<(f64, DiscriminatorGrad)> {
    if real.is_empty() {
        return Err(Error::Domain(
            "discriminator objective needs ground-truth subsets".into(),
        ));
    }
    let graph = &space.graph;
    let mut value = 0.0;
    let mut grad = DiscriminatorGrad::zeros_like(disc);
    let inv = 1.0 / real.len() as f64;
    for t in real {
        let (d, g) = score_and_grad(disc, image, t, space)?;
        let f1 = f1_sp(graph, t, &image.gt_paths)?;
        value += inv * (beta * d.ln() - (1.0 - beta) * (d - f1).powi(2));
        let dv = beta / d - 2.0 * (1.0 - beta) * (d - f1);
        grad.add_scaled(&g, inv * dv);
    }
    let (d, g) = score_and_grad(disc, image, fake, space)?;
    let f1 = f1_sp(graph, fake, &image.gt_paths)?;
    value += beta * (-d).ln_1p() - (1.0 - beta) * (d - f1).powi(2);
    let dv = -beta / (1.0 - d) - 2.0 * (1.0 - beta) * (d - f1);
    grad.add_scaled(&g, dv);
    Ok((value, grad))
}

/// Per-step diagnostics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepStats {
    pub images: usize,
    pub skipped: usize,
    /// Generator step: mean F1_sp of the selected candidates.
    /// Discriminator step: mean objective value.
    pub mean: f64,
}

fn ascend_generator(
    gen: &mut GeneratorParams,
    grad: &GeneratorGrad,
    lr: f64,
    decay: f64,
    cols: std::ops::Range<usize>,
) {
    let d = gen.input_dim();
    let shrink = 1.0 - lr * decay;
    for t in 0..gen.m {
        for c in cols.clone() {
            let i = t * d + c;
            gen.w[i] = gen.w[i] * shrink + lr * grad.w[i];
        }
        gen.b[t] += lr * grad.b[t];
    }
}

fn ascend_discriminator(
    disc: &mut DiscriminatorParams,
    grad: &DiscriminatorGrad,
    lr: f64,
    decay: f64,
) {
    let shrink = 1.0 - lr * decay;
    disc.w
        .iter_mut()
        .zip(&grad.w)
        .for_each(|(w, g)| *w = *w * shrink + lr * g);
    disc.b += lr * grad.b;
}

/// One generator update over `batch` (indices into the training split).
pub fn generator_step(
    state: &mut TrainState,
    dataset: &Dataset,
    batch: &[usize],
    config: &TrainConfig,
    lr: f64,
) -> Result<StepStats> {
    let space = &dataset.space;
    let gen = &state.generator;
    let mut acc = GeneratorGrad::zeros_like(gen);
    let mut stats = StepStats::default();
    let mut f1_sum = 0.0;
    for &idx in batch {
        let image = &dataset.train[idx];
        if image.gt_paths.is_empty() {
            stats.skipped += 1;
            continue;
        }
        let shared_z = sample_noise(gen.d_z, &mut state.streams.noise);
        let mut best: Option<(f64, TagSubset, Vec<f64>)> = None;
        for _ in 0..config.candidates_per_step {
            let z = if config.per_candidate_noise {
                sample_noise(gen.d_z, &mut state.streams.noise)
            } else {
                shared_z.clone()
            };
            let cand = generate_subset(
                gen,
                image,
                &z,
                space,
                config.k,
                config.repeats,
                &mut state.streams.sampling,
            )?;
            let f1 = f1_sp(&space.graph, &cand, &image.gt_paths)?;
            if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
                best = Some((f1, cand, z));
            }
        }
        let (f1, subset, z) = best.expect("candidates_per_step >= 1");
        if subset.is_empty() {
            stats.skipped += 1;
            continue;
        }
        let (_, g) =
            pg_objective_and_gradient(gen, &state.discriminator, image, &z, &subset, space)?;
        acc.add_scaled(&g, 1.0);
        f1_sum += f1;
        stats.images += 1;
    }
    if stats.images > 0 {
        let inv = 1.0 / stats.images as f64;
        acc.w.iter_mut().for_each(|v| *v *= inv);
        acc.b.iter_mut().for_each(|v| *v *= inv);
        stats.mean = f1_sum * inv;
    }
    let cols = 0..state.generator.input_dim();
    ascend_generator(&mut state.generator, &acc, lr, config.weight_decay, cols);
    Ok(stats)
}

/// One discriminator update over `batch`. With `zero_noise` the fake subsets
/// come from the generator at `z = 0`.
pub fn discriminator_step(
    state: &mut TrainState,
    dataset: &Dataset,
    batch: &[usize],
    config: &TrainConfig,
    beta: f64,
    lr: f64,
    zero_noise: bool,
) -> Result<StepStats> {
    let space = &dataset.space;
    let gen = &state.generator;
    let mut acc = DiscriminatorGrad::zeros_like(&state.discriminator);
    let mut stats = StepStats::default();
    let mut value_sum = 0.0;
    for &idx in batch {
        let image = &dataset.train[idx];
        let family = image.gt_family(&space.graph)?;
        if family.is_empty() {
            stats.skipped += 1;
            continue;
        }
        let real = sample_family(&family.subsets, config.gt_cap, &mut state.streams.data);
        let z = if zero_noise {
            vec![0.0; gen.d_z]
        } else {
            sample_noise(gen.d_z, &mut state.streams.noise)
        };
        let fake = generate_subset(
            gen,
            image,
            &z,
            space,
            config.k,
            config.repeats,
            &mut state.streams.sampling,
        )?;
        if fake.is_empty() {
            stats.skipped += 1;
            continue;
        }
        let (v, g) = discriminator_objective_and_gradient(
            &state.discriminator,
            image,
            &real,
            &fake,
            beta,
            space,
        )?;
        acc.add_scaled(&g, 1.0);
        value_sum += v;
        stats.images += 1;
    }
    if stats.images > 0 {
        let inv = 1.0 / stats.images as f64;
        acc.w.iter_mut().for_each(|v| *v *= inv);
        acc.b *= inv;
        stats.mean = value_sum * inv;
    }
    ascend_discriminator(&mut state.discriminator, &acc, lr, config.weight_decay);
    Ok(stats)
}

/// At most `cap` subsets chosen uniformly without replacement, in family order.
pub fn sample_family<R: rand::Rng + ?Sized>(
    family: &[TagSubset],
    cap: usize,
    rng: &mut R,
) -> Vec<TagSubset> {
    if family.len() <= cap {
        return family.to_vec();
    }
    let mut idx = rand::seq::index::sample(rng, family.len(), cap).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| family[i].clone()).collect()
}

fn batches(n: usize, batch_size: usize, rng: &mut impl rand::Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Mean per-image binary cross-entropy over all tags on the training split,
/// at `z = 0`.
pub fn generator_cross_entropy(gen: &GeneratorParams, dataset: &Dataset) -> Result<f64> {
    let z = vec![0.0; gen.d_z];
    let mut total = 0.0;
    for image in &dataset.train {
        let q = gen.quality(&image.feature_g, &z)?;
        let y = image.gt_tag_indicator(&dataset.space.graph);
        total += q
            .iter()
            .zip(&y)
            .map(|(&p, &yt)| {
                -if yt {
                    p.max(LOG_FLOOR).ln()
                } else {
                    (1.0 - p).max(LOG_FLOOR).ln()
                }
            })
            .sum::<f64>();
    }
    Ok(total / dataset.train.len().max(1) as f64)
}

/// Fits the feature columns and bias with `z = 0` by per-tag cross-entropy
/// on the ground-truth tag indicators. Noise columns are left untouched.
/// Returns the training cross-entropy after each epoch.
pub fn pretrain_generator(
    state: &mut TrainState,
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    config.validate()?;
    let graph = &dataset.space.graph;
    let d_g = state.generator.d_g;
    let z = vec![0.0; state.generator.d_z];
    let targets: Vec<Vec<bool>> = dataset
        .train
        .iter()
        .map(|im| im.gt_tag_indicator(graph))
        .collect();
    let mut losses = Vec::with_capacity(config.pretrain_g_epochs);
    for _ in 0..config.pretrain_g_epochs {
        for batch in batches(
            dataset.train.len(),
            config.batch_size,
            &mut state.streams.data,
        ) {
            let gen = &state.generator;
            let mut acc = GeneratorGrad::zeros_like(gen);
            let d = gen.input_dim();
            for &idx in &batch {
                let image = &dataset.train[idx];
                let (logits, x) = gen.logits(&image.feature_g, &z)?;
                for (t, a) in logits.into_iter().enumerate() {
                    // descent on cross-entropy = ascent on log-likelihood
                    let g = if targets[idx][t] { 1.0 } else { 0.0 } - sigmoid(a);
                    acc.b[t] += g;
                    let row = &mut acc.w[t * d..t * d + d_g];
                    row.iter_mut()
                        .zip(&x[..d_g])
                        .for_each(|(w, xi)| *w += g * xi);
                }
            }
            let inv = 1.0 / batch.len() as f64;
            acc.w.iter_mut().for_each(|v| *v *= inv);
            acc.b.iter_mut().for_each(|v| *v *= inv);
            ascend_generator(
                &mut state.generator,
                &acc,
                config.pretrain_g_lr,
                config.weight_decay,
                0..d_g,
            );
        }
        if !state.generator.is_finite() {
            return Err(Error::Numeric("generator pre-training diverged".into()));
        }
        losses.push(generator_cross_entropy(&state.generator, dataset)?);
    }
    Ok(losses)
}

/// Regression-only discriminator pre-training: beta is forced to 0 and fake
/// subsets come from the generator at `z = 0`.
pub fn pretrain_discriminator(
    state: &mut TrainState,
    dataset: &Dataset,
    config: &TrainConfig,
) -> Result<()> {
    config.validate()?;
    for _ in 0..config.pretrain_d_epochs {
        for batch in batches(
            dataset.train.len(),
            config.batch_size,
            &mut state.streams.data,
        ) {
            discriminator_step(
                state,
                dataset,
                &batch,
                config,
                0.0,
                config.pretrain_d_lr,
                true,
            )?;
        }
        if !state.discriminator.is_finite() {
            return Err(Error::Numeric("discriminator pre-training diverged".into()));
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Generator,
    Discriminator,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TraceEvent {
    pub epoch: usize,
    pub batch: usize,
    pub phase: Phase,
}

/// Held-out single-subset F1_sp of the current generator.
pub fn heldout_f1(gen: &GeneratorParams, dataset: &Dataset, config: &TrainConfig) -> Result<f64> {
    if dataset.test.is_empty() {
        return Ok(0.0);
    }
    let rep = evaluate_generator(
        gen,
        &dataset.space,
        &dataset.test,
        config.eval_protocol(),
        config.eval_seed(),
        1,
    )?;
    Ok(rep.mean_single.f1)
}

/// Alternates generator and discriminator steps until `config.epochs`,
/// starting from `state.epoch`. Returns the records of the epochs run.
pub fn train(
    state: &mut TrainState,
    dataset: &Dataset,
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<Vec<EpochRecord>> {
    train_traced(state, dataset, config, checkpoint_dir, &mut |_| {})
}

pub fn train_traced(
    state: &mut TrainState,
    dataset: &Dataset,
    config: &TrainConfig,
    checkpoint_dir: Option<&Path>,
    trace: &mut dyn FnMut(TraceEvent),
) -> Result<Vec<EpochRecord>> {
    config.validate()?;
    let mut out = Vec::new();
    while state.epoch < config.epochs {
        let good = state.clone();
        let epoch = state.epoch;
        let factor = config.lr_factor(epoch);
        let (lr_g, lr_d) = (config.lr_g * factor, config.lr_d * factor);
        let plan = batches(
            dataset.train.len(),
            config.batch_size,
            &mut state.streams.data,
        );
        // Any failure inside the epoch restores the state from before it.
        if let Err(e) = run_epoch(state, dataset, config, &plan, epoch, (lr_g, lr_d), trace) {
            *state = good;
            return Err(e);
        }
        let record = EpochRecord {
            epoch,
            lr_g,
            lr_d,
            heldout_f1: heldout_f1(&state.generator, dataset, config)?,
        };
        log::info!("epoch {epoch}: held-out F1_sp {:.4}", record.heldout_f1);
        state.history.push(record);
        state.epoch += 1;
        out.push(record);
        if let Some(dir) = checkpoint_dir {
            crate::checkpoint::save_checkpoint(
                state,
                config,
                &dir.join(format!("epoch_{:03}.ckpt", state.epoch)),
            )?;
            crate::checkpoint::save_checkpoint(state, config, &dir.join("latest.ckpt"))?;
        }
    }
    Ok(out)
}

fn run_epoch(
    state: &mut TrainState,
    dataset: &Dataset,
    config: &TrainConfig,
    plan: &[Vec<usize>],
    epoch: usize,
    (lr_g, lr_d): (f64, f64),
    trace: &mut dyn FnMut(TraceEvent),
) -> Result<()> {
    for (bi, batch) in plan.iter().enumerate() {
        trace(TraceEvent {
            epoch,
            batch: bi,
            phase: Phase::Generator,
        });
        let g = generator_step(state, dataset, batch, config, lr_g)?;
        log::trace!("epoch {epoch} batch {bi} G mean F1 {:.4}", g.mean);
        trace(TraceEvent {
            epoch,
            batch: bi,
            phase: Phase::Discriminator,
        });
        let d = discriminator_step(state, dataset, batch, config, config.beta, lr_d, false)?;
        log::trace!("epoch {epoch} batch {bi} D objective {:.4}", d.mean);
        if !state.is_finite() {
            return Err(Error::Numeric(format!(
                    "non-finite parameters in epoch {epoch} batch {bi}; kept the state from before the epoch"
                )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{toy_image, toy_space};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_gen(rng: &mut ChaCha8Rng) -> GeneratorParams {
        let mut g = GeneratorParams::zeros(4, 3, 2);
        g.w.iter_mut()
            .for_each(|w| *w = rng.random_range(-1.0..1.0));
        g.b.iter_mut()
            .for_each(|b| *b = rng.random_range(-1.0..1.0));
        g
    }

    #[test]
    fn single_tag_surrogate_is_reward_times_loglik() {
        let space = toy_space();
        let img = toy_image(&space);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_gen(&mut rng);
        let z = [0.2, -0.4];
        let s = TagSubset::new([2]);
        let (j, _) = pg_surrogate(&g, &img, &z, &s, &[0.7]).unwrap();
        let q = g.quality(&img.feature_g, &z).unwrap();
        let ll: f64 = (0..4)
            .map(|t| if t == 2 { q[t].ln() } else { (1.0 - q[t]).ln() })
            .sum();
        assert!((j - 0.7 * ll).abs() < 1e-12);
    }

    #[test]
    fn zero_rewards_give_zero() {
        let space = toy_space();
        let img = toy_image(&space);
        let g = random_gen(&mut ChaCha8Rng::seed_from_u64(2));
        let (j, grad) =
            pg_surrogate(&g, &img, &[0.1, 0.1], &TagSubset::new([0, 1]), &[0.0, 0.0]).unwrap();
        assert_eq!(j, 0.0);
        assert!(grad.w.iter().chain(&grad.b).all(|v| *v == 0.0));
    }

    #[test]
    fn empty_subset_is_rejected() {
        let space = toy_space();
        let img = toy_image(&space);
        let g = GeneratorParams::zeros(4, 3, 0);
        let d = DiscriminatorParams::zeros(3, 2);
        assert!(matches!(
            pg_objective_and_gradient(&g, &d, &img, &[], &TagSubset::empty(), &space),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            discriminator_objective_and_gradient(&d, &img, &[], &TagSubset::new([0]), 0.5, &space),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn beta_one_is_pure_adversarial() {
        let space = toy_space();
        let img = toy_image(&space);
        let d = DiscriminatorParams {
            d_d: 3,
            e_dim: 2,
            w: vec![0.3, -0.1, 0.2, 0.5, -0.6],
            b: 0.1,
        };
        let real = vec![TagSubset::new([0, 1]), TagSubset::new([2])];
        let fake = TagSubset::new([3]);
        let (v, _) =
            discriminator_objective_and_gradient(&d, &img, &real, &fake, 1.0, &space).unwrap();
        let sc = |s: &TagSubset| discriminator_score(&d, &img, s, &space.embeddings).unwrap();
        let expect = 0.5 * (sc(&real[0]).ln() + sc(&real[1]).ln()) + (1.0 - sc(&fake)).ln();
        assert!((v - expect).abs() < 1e-12);

        let (v0, _) =
            discriminator_objective_and_gradient(&d, &img, &real, &fake, 0.0, &space).unwrap();
        let f = |s: &TagSubset| f1_sp(&space.graph, s, &img.gt_paths).unwrap();
        let expect0 = -0.5
            * ((sc(&real[0]) - f(&real[0])).powi(2) + (sc(&real[1]) - f(&real[1])).powi(2))
            - (sc(&fake) - f(&fake)).powi(2);
        assert!((v0 - expect0).abs() < 1e-12);
    }

    #[test]
    fn family_sample_respects_cap() {
        let fam: Vec<TagSubset> = (0..25).map(|i| TagSubset::new([i])).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = sample_family(&fam, 10, &mut rng);
        assert_eq!(s.len(), 10);
        let mut ids: Vec<usize> = s.iter().map(|t| t.ids()[0]).collect();
        ids.dedup();
        assert_eq!(ids.len(), 10);
        let s2 = sample_family(&fam, 10, &mut ChaCha8Rng::seed_from_u64(4));
        assert_eq!(s, s2);
        assert_eq!(sample_family(&fam[..3], 10, &mut rng).len(), 3);
    }

    #[test]
    fn lr_schedule() {
        let c = TrainConfig::default();
        assert_eq!(c.lr_factor(0), 1.0);
        assert_eq!(c.lr_factor(9), 1.0);
        assert!((c.lr_factor(10) - 0.1).abs() < 1e-15);
        assert!((c.lr_factor(25) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn weight_decay_scales_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut g = random_gen(&mut rng);
        let before = g.clone();
        let zero = GeneratorGrad::zeros_like(&g);
        let cols = 0..g.input_dim();
        ascend_generator(&mut g, &zero, 0.01, 1e-4, cols);
        for (a, b) in g.w.iter().zip(&before.w) {
            assert_eq!(*a, b * (1.0 - 0.01 * 1e-4));
        }
        assert_eq!(g.b, before.b);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            beta: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            gt_cap: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            lr_g: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
