//! QRLD binary dataset files.
//!
//! Layout (little-endian): magic `QRLD`, `u16` version, `u32` metadata length,
//! metadata JSON, `u64` record count, then 33-byte records
//! `s: [f32; 3], a: i8, s_next: [f32; 3], r: f32, episode: u32`.

use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use qrl_core::env::{DatasetMeta, TransitionDataset, TransitionRecord};

pub const MAGIC: &[u8; 4] = b"QRLD";
pub const VERSION: u16 = 1;
pub const RECORD_BYTES: usize = 33;

pub fn write_dataset<W: Write>(mut w: W, dataset: &TransitionDataset) -> Result<()> {
    let meta = serde_json::to_vec(&dataset.meta)?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&u32::try_from(meta.len())?.to_le_bytes())?;
    w.write_all(&meta)?;
    w.write_all(&(dataset.records.len() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(RECORD_BYTES * dataset.records.len());
    for r in &dataset.records {
        for x in r.s {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf.extend_from_slice(&r.a.to_le_bytes());
        for x in r.s_next {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf.extend_from_slice(&r.r.to_le_bytes());
        buf.extend_from_slice(&r.episode.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn dataset_bytes(dataset: &TransitionDataset) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    write_dataset(&mut out, dataset)?;
    Ok(out)
}

fn take<const N: usize>(bytes: &[u8], at: &mut usize) -> Result<[u8; N]> {
    let end = *at + N;
    if end > bytes.len() {
        bail!("truncated dataset file at byte {}", *at);
    }
    let out = bytes[*at..end].try_into().expect("length checked");
    *at = end;
    Ok(out)
}

fn obs(bytes: &[u8], at: &mut usize) -> Result<[f32; 3]> {
    Ok([
        f32::from_le_bytes(take(bytes, at)?),
        f32::from_le_bytes(take(bytes, at)?),
        f32::from_le_bytes(take(bytes, at)?),
    ])
}

pub fn parse_dataset(bytes: &[u8]) -> Result<TransitionDataset> {
    let mut at = 0;
    if &take::<4>(bytes, &mut at)? != MAGIC {
        bail!("not a QRLD file (bad magic)");
    }
    let version = u16::from_le_bytes(take(bytes, &mut at)?);
    if version != VERSION {
        bail!("unsupported QRLD version {version}");
    }
    let meta_len = u32::from_le_bytes(take(bytes, &mut at)?) as usize;
    let meta_end = at.checked_add(meta_len).filter(|&e| e <= bytes.len());
    let Some(meta_end) = meta_end else {
        bail!("truncated dataset metadata");
    };
    let meta: DatasetMeta = serde_json::from_slice(&bytes[at..meta_end]).context("dataset metadata")?;
    at = meta_end;
    let count = u64::from_le_bytes(take(bytes, &mut at)?) as usize;
    if bytes.len() - at != count.saturating_mul(RECORD_BYTES) {
        bail!(
            "dataset declares {count} records but carries {} payload bytes",
            bytes.len() - at
        );
    }
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        records.push(TransitionRecord {
            s: obs(bytes, &mut at)?,
            a: i8::from_le_bytes(take(bytes, &mut at)?),
            s_next: obs(bytes, &mut at)?,
            r: f32::from_le_bytes(take(bytes, &mut at)?),
            episode: u32::from_le_bytes(take(bytes, &mut at)?),
        });
    }
    Ok(TransitionDataset { meta, records })
}

pub fn read_dataset<R: Read>(mut r: R) -> Result<TransitionDataset> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_dataset(&bytes)
}
