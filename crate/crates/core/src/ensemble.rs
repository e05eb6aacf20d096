//! Ensemble (list) decoding over several graphs of the same polar subcode.
//!
//! Every sub-decoder sees the channel LLRs through its own permutation and
//! returns a candidate in the original domain. The most likely valid
//! candidate, by correlation with the channel LLRs, is selected.

use std::collections::HashSet;
use std::sync::Arc;

use rand::Rng;

use crate::bp::{decode, BpConfig, DecodeResult, DecoderGraph};
use crate::construction::SubcodeSpec;
use crate::error::Error;
use crate::transform::{sample_permutation, AffinePerm, PermGroupKind};

pub use crate::bp::candidate_metric;

/// Sub-decoders of a list decoder.
#[derive(Clone, Debug)]
pub struct EnsembleSpec {
    kind: PermGroupKind,
    relaxed: bool,
    decoders: Vec<DecoderGraph>,
}

impl EnsembleSpec {
    /// `list_size` distinct permutations from `kind`, optionally starting with the identity.
    pub fn random<R: Rng + ?Sized>(
        sub: Arc<SubcodeSpec>,
        list_size: usize,
        kind: PermGroupKind,
        relaxed: bool,
        include_identity: bool,
        rng: &mut R,
    ) -> Result<Self, Error> {
        if list_size == 0 {
            return Err(Error::InvalidArgument("list size must be at least 1".into()));
        }
        let order = kind.order(sub.n());
        if list_size as u128 > order {
            return Err(Error::GroupExhausted {
                requested: list_size,
                order,
            });
        }
        let mut seen = HashSet::new();
        let mut perms = Vec::with_capacity(list_size);
        if include_identity {
            let id = AffinePerm::identity(sub.n());
            seen.insert(id.map().to_vec());
            perms.push(id);
        }
        while perms.len() < list_size {
            let p = sample_permutation(kind, sub.n(), rng);
            if seen.insert(p.map().to_vec()) {
                perms.push(p);
            }
        }
        let decoders = perms
            .into_iter()
            .map(|p| DecoderGraph::new(sub.clone(), p, relaxed))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            kind,
            relaxed,
            decoders,
        })
    }

    /// Ensemble from explicitly chosen graphs.
    pub fn from_graphs(kind: PermGroupKind, relaxed: bool, decoders: Vec<DecoderGraph>) -> Result<Self, Error> {
        if decoders.is_empty() {
            return Err(Error::InvalidArgument("an ensemble needs at least one decoder".into()));
        }
        Ok(Self {
            kind,
            relaxed,
            decoders,
        })
    }

    pub fn kind(&self) -> PermGroupKind {
        self.kind
    }

    pub fn is_relaxed(&self) -> bool {
        self.relaxed
    }

    pub fn list_size(&self) -> usize {
        self.decoders.len()
    }

    pub fn decoders(&self) -> &[DecoderGraph] {
        &self.decoders
    }
}

/// Builds an ensemble whose first decoder is the unpermuted graph and whose
/// remaining `list_size - 1` decoders use distinct random permutations.
pub fn build_ensemble<R: Rng + ?Sized>(
    sub: Arc<SubcodeSpec>,
    list_size: usize,
    kind: PermGroupKind,
    relaxed: bool,
    rng: &mut R,
) -> Result<EnsembleSpec, Error> {
    EnsembleSpec::random(sub, list_size, kind, relaxed, true, rng)
}

/// Result of list decoding.
#[derive(Clone, Debug)]
pub struct ListOutcome {
    pub selected: DecodeResult,
    pub selected_index: usize,
    /// Iterations used by each sub-decoder, in decoder order.
    pub iterations: Vec<usize>,
    pub any_valid: bool,
}

impl ListOutcome {
    pub fn max_iterations(&self) -> usize {
        self.iterations.iter().copied().max().unwrap_or(0)
    }
}

/// Runs every sub-decoder and picks the valid candidate with the highest
/// metric (ties to the lowest decoder index). Without a valid candidate the
/// highest metric overall is returned and `any_valid` is false.
pub fn decode_list(e: &EnsembleSpec, llr_ch: &[f64], cfg: &BpConfig) -> Result<ListOutcome, Error> {
    let results = e
        .decoders
        .iter()
        .map(|g| decode(g, llr_ch, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let iterations = results.iter().map(|r| r.iterations).collect();
    let any_valid = results.iter().any(|r| r.valid);
    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        if any_valid && !r.valid {
            continue;
        }
        if best.is_none_or(|b| r.metric > results[b].metric) {
            best = Some(i);
        }
    }
    let selected_index = best.expect("ensemble is non-empty");
    let selected = results.into_iter().nth(selected_index).expect("index in range");
    Ok(ListOutcome {
        selected,
        selected_index,
        iterations,
        any_valid,
    })
}
