//! Training checkpoints.
//!
//! ```text
//! magic    b"D2IA"
//! version  u32 LE (= 1)
//! shapes   u64 LE x5: m, d_g, d_z, d_d, e_dim
//! G        W (m*(d_g+d_z)) then b (m), f64 LE
//! D        w (d_d+e_dim) then b, f64 LE
//! epoch    u64 LE
//! rng      seed u64, noise/sampling/data word positions u128, LE
//! config   u64 LE byte length, then JSON
//! history  u64 LE count, then per record: epoch u64, lr_g, lr_d, F1 f64
//! trailer  SHA-256 of everything above
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::model::{DiscriminatorParams, GeneratorParams};
use crate::rng::{RngStreams, StreamPositions};
use crate::train::{EpochRecord, TrainConfig, TrainState};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"D2IA";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(state: &TrainState, config: &TrainConfig) -> Result<Vec<u8>> {
    let g = &state.generator;
    let d = &state.discriminator;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for s in [g.m, g.d_g, g.d_z, d.d_d, d.e_dim] {
        out.extend_from_slice(&(s as u64).to_le_bytes());
    }
    for v in
        g.w.iter()
            .chain(&g.b)
            .chain(&d.w)
            .chain(std::iter::once(&d.b))
    {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&(state.epoch as u64).to_le_bytes());
    let p = state.streams.positions();
    out.extend_from_slice(&p.seed.to_le_bytes());
    for pos in [p.noise, p.sampling, p.data] {
        out.extend_from_slice(&pos.to_le_bytes());
    }
    let json =
        serde_json::to_vec(config).map_err(|e| Error::Validation(format!("config echo: {e}")))?;
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&(state.history.len() as u64).to_le_bytes());
    for r in &state.history {
        out.extend_from_slice(&(r.epoch as u64).to_le_bytes());
        for v in [r.lr_g, r.lr_d, r.heldout_f1] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    source: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.source,
                self.bytes.len() as u64,
                format!("truncated {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn u128(&mut self, what: &str) -> Result<u128> {
        Ok(u128::from_le_bytes(
            self.take(16, what)?.try_into().unwrap(),
        ))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_bits(self.u64(what)?))
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let at = self.pos;
        let v = self.u64(what)?;
        usize::try_from(v)
            .ok()
            .filter(|&v| v <= self.bytes.len())
            .ok_or_else(|| Error::format(self.source, at as u64, format!("implausible {what} {v}")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(n.saturating_mul(8), what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8], source: &Path) -> Result<(TrainState, TrainConfig)> {
    if bytes.len() < 8 + 32 {
        return Err(Error::format(
            source,
            bytes.len() as u64,
            "truncated checkpoint",
        ));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::format(source, 0, "bad magic, expected D2IA"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(
            source,
            4,
            format!("unsupported checkpoint version {version}"),
        ));
    }
    let body_len = bytes.len() - 32;
    if Sha256::digest(&bytes[..body_len]).as_slice() != &bytes[body_len..] {
        return Err(Error::format(source, body_len as u64, "checksum mismatch"));
    }
    let mut r = Reader {
        bytes: &bytes[..body_len],
        pos: 8,
        source,
    };
    let m = r.usize("shape")?;
    let d_g = r.usize("shape")?;
    let d_z = r.usize("shape")?;
    let d_d = r.usize("shape")?;
    let e_dim = r.usize("shape")?;
    let w = r.f64s(m * (d_g + d_z), "generator weights")?;
    let b = r.f64s(m, "generator bias")?;
    let dw = r.f64s(d_d + e_dim, "discriminator weights")?;
    let db = r.f64("discriminator bias")?;
    let epoch = r.usize("epoch")?;
    let positions = StreamPositions {
        seed: r.u64("rng seed")?,
        noise: r.u128("rng position")?,
        sampling: r.u128("rng position")?,
        data: r.u128("rng position")?,
    };
    let json_len = r.usize("config length")?;
    let at = r.pos;
    let config: TrainConfig = serde_json::from_slice(r.take(json_len, "config")?)
        .map_err(|e| Error::format(source, at as u64, format!("config echo: {e}")))?;
    let n_hist = r.usize("history length")?;
    let mut history = Vec::with_capacity(n_hist.min(1 << 16));
    for _ in 0..n_hist {
        history.push(EpochRecord {
            epoch: r.usize("history epoch")?,
            lr_g: r.f64("history")?,
            lr_d: r.f64("history")?,
            heldout_f1: r.f64("history")?,
        });
    }
    if r.pos != body_len {
        return Err(Error::format(
            source,
            r.pos as u64,
            "trailing bytes before checksum",
        ));
    }
    let state = TrainState {
        generator: GeneratorParams { m, d_g, d_z, w, b },
        discriminator: DiscriminatorParams {
            d_d,
            e_dim,
            w: dw,
            b: db,
        },
        epoch,
        streams: RngStreams::restore(positions),
        history,
    };
    Ok((state, config))
}

pub fn save_checkpoint(state: &TrainState, config: &TrainConfig, path: &Path) -> Result<()> {
    write_atomic(path, &encode_checkpoint(state, config)?)
}

pub fn load_checkpoint(path: &Path) -> Result<(TrainState, TrainConfig)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn state() -> TrainState {
        let mut streams = RngStreams::new(11);
        let _: u64 = streams.noise.random();
        let mut g = GeneratorParams::zeros(3, 2, 2);
        g.w.iter_mut()
            .enumerate()
            .for_each(|(i, w)| *w = (i as f64).sin());
        TrainState {
            generator: g,
            discriminator: DiscriminatorParams {
                d_d: 2,
                e_dim: 1,
                w: vec![0.1, -0.2, f64::MIN_POSITIVE],
                b: -3.5,
            },
            epoch: 4,
            streams,
            history: vec![EpochRecord {
                epoch: 3,
                lr_g: 1e-4,
                lr_d: 5e-5,
                heldout_f1: 0.25,
            }],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = state();
        let c = TrainConfig::default();
        let bytes = encode_checkpoint(&s, &c).unwrap();
        let (back, c2) = decode_checkpoint(&bytes, Path::new("c")).unwrap();
        assert_eq!(c, c2);
        assert_eq!(back.generator, s.generator);
        assert_eq!(back.discriminator, s.discriminator);
        assert_eq!(back.streams.positions(), s.streams.positions());
        assert_eq!(back.history, s.history);
        assert_eq!(encode_checkpoint(&back, &c2).unwrap(), bytes);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode_checkpoint(&state(), &TrainConfig::default()).unwrap();
        let p = Path::new("c");
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_checkpoint(&bad, p),
            Err(Error::Format { offset: 0, .. })
        ));
        let mut bad = bytes.clone();
        bad[4] = 2;
        assert!(matches!(
            decode_checkpoint(&bad, p),
            Err(Error::Format { offset: 4, .. })
        ));
        let mut bad = bytes.clone();
        bad[20] ^= 1;
        assert!(matches!(
            decode_checkpoint(&bad, p),
            Err(Error::Format { .. })
        ));
        assert!(decode_checkpoint(&bytes[..bytes.len() - 1], p).is_err());
    }
}
