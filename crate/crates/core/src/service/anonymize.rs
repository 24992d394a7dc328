use hmac::{Hmac, KeyInit, Mac};
use rand::RngCore;
use sha2::Sha256;

use super::StreamRecord;
use crate::preprocess::mention_pattern;

/// Environment variable holding the id-hashing key.
pub const KEY_ENV: &str = "SENTITREND_ANON_KEY";

/// Replaces mentions with `@user` and ids with a keyed HMAC-SHA256 digest.
#[derive(Clone)]
pub struct Anonymizer {
    key: Vec<u8>,
}

impl std::fmt::Debug for Anonymizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Anonymizer").finish_non_exhaustive()
    }
}

impl Anonymizer {
    pub fn new(key: impl Into<Vec<u8>>) -> Self {
        Anonymizer { key: key.into() }
    }

    /// Key from [`KEY_ENV`]; without it a random per-process key is used and
    /// hashed ids are only stable for the lifetime of the process.
    pub fn from_env() -> Self {
        match std::env::var(KEY_ENV) {
            Ok(key) if !key.is_empty() => Anonymizer::new(key),
            _ => {
                log::warn!("{KEY_ENV} is unset; hashing ids with a random per-process key");
                let mut key = vec![0u8; 32];
                rand::thread_rng().fill_bytes(&mut key);
                Anonymizer::new(key)
            }
        }
    }

    pub fn hash_id(&self, id: &str) -> String {
        let mut mac = Hmac::<Sha256>::new_from_slice(&self.key).expect("HMAC accepts any key length");
        mac.update(id.as_bytes());
        hex::encode(mac.finalize().into_bytes())
    }

    pub fn anonymize(&self, record: StreamRecord) -> StreamRecord {
        StreamRecord {
            id: self.hash_id(&record.id),
            text: mask_mentions(&record.text),
            ts: record.ts,
        }
    }
}

pub fn mask_mentions(text: &str) -> String {
    mention_pattern().replace_all(text, "@user").into_owned()
}

pub fn anonymize(record: StreamRecord, anonymizer: &Anonymizer) -> StreamRecord {
    anonymizer.anonymize(record)
}
