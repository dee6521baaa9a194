use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{check_ratio, CptError, CptSample};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum MixedRecord {
    Domain(CptSample),
    General(serde_json::Value),
}

impl MixedRecord {
    pub fn is_general(&self) -> bool {
        matches!(self, MixedRecord::General(_))
    }
}

/// Interleaves general-domain records so they make up `ratio` of the output.
/// General records are drawn without replacement; only when the stream runs
/// out does a fresh shuffled pass over it begin.
pub fn mix_corpus(
    domain: Vec<CptSample>,
    general: Vec<serde_json::Value>,
    ratio: f64,
    seed: u64,
) -> Result<Vec<MixedRecord>, CptError> {
    let domain = domain.into_iter().map(MixedRecord::Domain).collect();
    let general: Vec<MixedRecord> = general.into_iter().map(MixedRecord::General).collect();
    mix_records(domain, &general, ratio, seed)
}

/// [`mix_corpus`] for any record type.
pub fn mix_records<T: Clone>(domain: Vec<T>, general: &[T], ratio: f64, seed: u64) -> Result<Vec<T>, CptError> {
    check_ratio(ratio)?;
    let n_general = (domain.len() as f64 * ratio / (1.0 - ratio)).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = domain;
    if n_general > 0 && general.is_empty() {
        tracing::warn!(wanted = n_general, "no general records to mix in");
    }
    if !general.is_empty() {
        let mut drawn = 0;
        while drawn < n_general {
            let mut order: Vec<usize> = (0..general.len()).collect();
            order.shuffle(&mut rng);
            for i in order.into_iter().take(n_general - drawn) {
                out.push(general[i].clone());
                drawn += 1;
            }
        }
    }
    out.shuffle(&mut rng);
    Ok(out)
}
