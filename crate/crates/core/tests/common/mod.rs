//! Reference implementations used as test oracles. They share no code with
//! the library beyond its public types.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, One, ToPrimitive, Zero};
use rand::Rng;
use tagdiv::dataset::{generate_synthetic_dataset, SynthSpec};
use tagdiv::linalg::SquareMatrix;
use tagdiv::{Dataset, EmbeddingTable, SemanticGraph, SimilarityMatrix, TagSpace, TagSpec};

/// Determinant by cofactor expansion along the first row.
pub fn cofactor_det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    match n {
        0 => 1.0,
        1 => a[0][0],
        _ => (0..n)
            .map(|c| {
                let minor: Vec<Vec<f64>> = a[1..]
                    .iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|&(j, _)| j != c)
                            .map(|(_, &v)| v)
                            .collect()
                    })
                    .collect();
                let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
                sign * a[0][c] * cofactor_det(&minor)
            })
            .sum(),
    }
}

/// A float matrix scaled exactly to integers: entry = `int * 2^exp`.
/// Every finite f64 is a dyadic rational, so no rounding happens.
pub fn to_scaled_int(a: &[Vec<f64>]) -> (Vec<Vec<BigInt>>, i32) {
    let decoded: Vec<Vec<(u64, i16, i8)>> = a
        .iter()
        .map(|row| row.iter().map(|&x| Float::integer_decode(x)).collect())
        .collect();
    let exp = decoded
        .iter()
        .flatten()
        .filter(|d| d.0 != 0)
        .map(|d| d.1 as i32)
        .min()
        .unwrap_or(0);
    let ints = decoded
        .iter()
        .map(|row| {
            row.iter()
                .map(|&(mant, e, sign)| {
                    BigInt::from(sign) * (BigInt::from(mant) << (e as i32 - exp) as usize)
                })
                .collect()
        })
        .collect();
    (ints, exp)
}

/// Exact determinant of the principal submatrix of `a` on `ids`, by
/// cofactor expansion along successive rows with minors memoized by
/// (row, used-columns mask).
pub fn exact_det(a: &[Vec<BigInt>], ids: &[usize]) -> BigInt {
    fn go(
        a: &[Vec<BigInt>],
        ids: &[usize],
        row: usize,
        used: u32,
        memo: &mut HashMap<(usize, u32), BigInt>,
    ) -> BigInt {
        if row == ids.len() {
            return BigInt::one();
        }
        if let Some(v) = memo.get(&(row, used)) {
            return v.clone();
        }
        let mut acc = BigInt::zero();
        let mut positive = true;
        for c in 0..ids.len() {
            if used >> c & 1 == 1 {
                continue;
            }
            let term = &a[ids[row]][ids[c]] * go(a, ids, row + 1, used | 1 << c, memo);
            if positive {
                acc += term;
            } else {
                acc -= term;
            }
            positive = !positive;
        }
        memo.insert((row, used), acc.clone());
        acc
    }
    go(a, ids, 0, 0, &mut HashMap::new())
}

fn with_power_of_two(x: BigInt, e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(x << e as usize)
    } else {
        BigRational::new(x, BigInt::one() << (-e) as usize)
    }
}

/// Exact `det(L_T) / det(L + I)` for every subset `T` of `0..m`, rounded
/// once to f64, in the order of [`all_subsets`].
pub fn exact_subset_probabilities(l: &[Vec<f64>]) -> Vec<f64> {
    let m = l.len();
    let mut shifted = l.to_vec();
    for (i, row) in shifted.iter_mut().enumerate() {
        row[i] += 1.0;
    }
    let (li, e) = to_scaled_int(l);
    let (si, es) = to_scaled_int(&shifted);
    let all: Vec<usize> = (0..m).collect();
    let z = with_power_of_two(exact_det(&si, &all), es as i64 * m as i64);
    all_subsets(m)
        .iter()
        .map(|ids| {
            (with_power_of_two(exact_det(&li, ids), e as i64 * ids.len() as i64) / &z)
                .to_f64()
                .unwrap()
        })
        .collect()
}

pub fn sub(l: &[Vec<f64>], ids: &[usize]) -> Vec<Vec<f64>> {
    ids.iter()
        .map(|&i| ids.iter().map(|&j| l[i][j]).collect())
        .collect()
}

/// Every subset of `0..m` as a sorted id list.
pub fn all_subsets(m: usize) -> Vec<Vec<usize>> {
    (0u32..1 << m)
        .map(|mask| (0..m).filter(|&i| mask >> i & 1 == 1).collect())
        .collect()
}

/// Exact law of the sequential path-constrained process: at each step pick
/// an eligible tag with probability proportional to
/// `det(L[Y + j]) / det(L[Y])`, stop at `k` tags, when no tag is eligible,
/// or when the eligible mass drops below `eps`. Keys are sorted id lists.
pub fn sequential_law(
    l: &[Vec<f64>],
    shares: &dyn Fn(usize, usize) -> bool,
    k: usize,
    eps: f64,
) -> BTreeMap<Vec<usize>, f64> {
    fn go(
        l: &[Vec<f64>],
        shares: &dyn Fn(usize, usize) -> bool,
        k: usize,
        eps: f64,
        chosen: &mut Vec<usize>,
        p: f64,
        out: &mut BTreeMap<Vec<usize>, f64>,
    ) {
        let m = l.len();
        let eligible: Vec<usize> = (0..m)
            .filter(|&j| !chosen.contains(&j) && chosen.iter().all(|&c| !shares(c, j)))
            .collect();
        let base = cofactor_det(&sub(l, chosen));
        let gains: Vec<f64> = eligible
            .iter()
            .map(|&j| {
                let mut with = chosen.clone();
                with.push(j);
                (cofactor_det(&sub(l, &with)) / base).max(0.0)
            })
            .collect();
        let total: f64 = gains.iter().sum();
        if chosen.len() == k || eligible.is_empty() || total < eps {
            let mut key = chosen.clone();
            key.sort_unstable();
            *out.entry(key).or_insert(0.0) += p;
            return;
        }
        for (&j, &g) in eligible.iter().zip(&gains) {
            if g > 0.0 {
                chosen.push(j);
                go(l, shares, k, eps, chosen, p * g / total, out);
                chosen.pop();
            }
        }
    }
    let mut out = BTreeMap::new();
    go(l, shares, k, eps, &mut Vec::new(), 1.0, &mut out);
    out
}

/// A random kernel `L = B B^T` with nonnegative `B` (`m x r`), split into
/// quality `sqrt(diag L)` and unit-diagonal similarity.
pub fn random_kernel_parts<R: Rng>(
    m: usize,
    rng: &mut R,
) -> (Vec<f64>, SimilarityMatrix, Vec<Vec<f64>>) {
    let r = rng.random_range(m..=m + 4);
    let b: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..r).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let scale: f64 = rng.random_range(0.2..3.0);
    let l: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| scale * b[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum::<f64>())
                .collect()
        })
        .collect();
    let q: Vec<f64> = (0..m).map(|i| l[i][i].sqrt()).collect();
    let s = SquareMatrix::from_fn(m, |i, j| {
        if i == j {
            1.0
        } else {
            (l[i][j] / (q[i] * q[j])).min(1.0)
        }
    });
    let s = SimilarityMatrix::from_matrix(s).expect("valid similarity");
    // Rebuild L from the parts actually handed to the library.
    let l = (0..m)
        .map(|i| (0..m).map(|j| q[i] * s.get(i, j) * q[j]).collect())
        .collect();
    (q, s, l)
}

/// Central difference of `f` at coordinate `i` of `x`.
pub fn central_diff(x: &mut [f64], i: usize, h: f64, f: &mut dyn FnMut(&[f64]) -> f64) -> f64 {
    let x0 = x[i];
    x[i] = x0 + h;
    let fp = f(x);
    x[i] = x0 - h;
    let fm = f(x);
    x[i] = x0;
    (fp - fm) / (2.0 * h)
}

/// Relative error with a floor on the denominator so exact zeros compare
/// on an absolute scale.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-3)
}

/// The example hierarchy: people > woman > lady, plant > cactus, animal > cat.
pub fn fig3() -> SemanticGraph {
    let tags = [
        TagSpec::new("lady"),
        TagSpec::new("woman"),
        TagSpec::with_synonyms("people", &["person"]),
        TagSpec::new("cactus"),
        TagSpec::new("plant"),
        TagSpec::new("cat"),
        TagSpec::new("animal"),
    ];
    let e = |c: &str, p: &str| (c.to_string(), p.to_string());
    SemanticGraph::build(
        &tags,
        &[
            e("lady", "woman"),
            e("woman", "people"),
            e("cactus", "plant"),
            e("cat", "animal"),
        ],
    )
    .unwrap()
}

/// `m` tags on flat single-node paths with random 2-d embeddings.
pub fn flat_space<R: Rng>(m: usize, rng: &mut R) -> TagSpace {
    let tags: Vec<TagSpec> = (0..m).map(|i| TagSpec::new(&format!("t{i}"))).collect();
    let graph = SemanticGraph::build(&tags, &[]).unwrap();
    let names = (0..m).map(|i| format!("t{i}")).collect();
    let vecs = (0..m)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0)])
        .collect();
    TagSpace::new(graph, EmbeddingTable::new(names, vecs).unwrap()).unwrap()
}

pub fn tiny_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        m: 12,
        n_paths: 5,
        max_depth: 3,
        n_images: 60,
        n_test: 20,
        d_g: 24,
        embed_dim: 6,
        noise: 0.3,
        seed,
    }
}

pub fn tiny_dataset(seed: u64) -> Dataset {
    generate_synthetic_dataset(&tiny_spec(seed)).unwrap()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Desk-scale schedule for the canonical corpus: small batches and larger
/// learning rates than the full-size defaults, 20 adversarial epochs.
pub fn desk_config(seed: u64) -> tagdiv::TrainConfig {
    tagdiv::TrainConfig {
        seed,
        batch_size: 32,
        epochs: 20,
        lr_g: 0.1,
        lr_d: 0.01,
        pretrain_g_epochs: 20,
        pretrain_g_lr: 0.1,
        pretrain_d_epochs: 20,
        pretrain_d_lr: 1.0,
        ..Default::default()
    }
}
