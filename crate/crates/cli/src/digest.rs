//! Content hashes identifying datasets, splits and artifacts.

use std::fmt::Write as _;
use std::path::Path;

use rankdistill_core::InteractionDataset;
use sha2::{Digest, Sha256};

use crate::error::{CliResult, DataContext};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(Sha256::digest(bytes).as_slice())
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).data_ctx(format!("hashing {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Hash of the indexed interaction set: raw ids in index order and every
/// interaction, held-out ones included. Equal fingerprints mean equal dense
/// indices, so runs on either dataset are interchangeable.
pub fn dataset_fingerprint(dataset: &InteractionDataset) -> String {
    let mut h = Sha256::new();
    for id in dataset.user_ids().iter() {
        h.update(id.as_bytes());
        h.update([0x1f]);
    }
    h.update([0x1e]);
    for id in dataset.item_ids().iter() {
        h.update(id.as_bytes());
        h.update([0x1f]);
    }
    h.update([0x1e]);
    for u in 0..dataset.num_users() {
        for i in dataset.all_items(u) {
            h.update((u as u64).to_le_bytes());
            h.update((i as u64).to_le_bytes());
        }
    }
    hex(h.finalize().as_slice())
}

/// Hash of the held-out assignment, independent of everything else.
pub fn split_fingerprint(dataset: &InteractionDataset) -> String {
    let mut h = Sha256::new();
    for a in dataset.split_assignments() {
        for v in [a.user, a.valid, a.test] {
            h.update((v as u64).to_le_bytes());
        }
    }
    hex(h.finalize().as_slice())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}
