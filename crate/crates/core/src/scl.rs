//! Successive cancellation list decoding of polar subcodes.
//!
//! Hard frozen inputs are forced to zero and dynamic frozen inputs to the XOR
//! of their already decided support, so every surviving path satisfies all
//! constraints (including an embedded CRC). Path metrics are the exact
//! LLR-domain penalties `ln(1 + e^{-(1-2u)λ})`, which rank paths by their
//! a-posteriori probability.

use crate::bp::{boxplus_with, candidate_metric, check_llrs, DecodeResult};
use crate::construction::{polar_transform_in_place, PositionKind, SubcodeSpec};
use crate::error::Error;
use crate::gf2::BitVector;

#[derive(Clone, Debug)]
struct Path {
    /// `llr[d]` has `N >> d` entries for depths `1..=n`; index 0 is unused.
    llr: Vec<Vec<f64>>,
    /// Re-encoded left sibling at each depth.
    left: Vec<Vec<u8>>,
    v: Vec<u8>,
    metric: f64,
}

/// `ln(1 + e^{-x})` without overflow.
#[inline]
fn penalty(x: f64) -> f64 {
    if x > 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

#[inline]
fn f_node(a: f64, b: f64) -> f64 {
    boxplus_with(a, b, f64::INFINITY)
}

impl Path {
    fn new(n: usize) -> Self {
        let len = 1usize << n;
        Self {
            llr: (0..=n).map(|d| vec![0.0; if d == 0 { 0 } else { len >> d }]).collect(),
            left: (0..=n).map(|d| vec![0; if d == 0 { 0 } else { len >> d }]).collect(),
            v: Vec::with_capacity(len),
            metric: 0.0,
        }
    }

    /// Decision LLR of input `i` given the decided inputs `0..i`.
    fn leaf_llr(&mut self, i: usize, n: usize, channel: &[f64]) -> f64 {
        let len = channel.len();
        let start = if i == 0 { 1 } else { n - i.trailing_zeros() as usize };
        for d in start..=n {
            let half = len >> d;
            let (parents, rest) = self.llr.split_at_mut(d);
            let parent: &[f64] = if d == 1 { channel } else { &parents[d - 1] };
            let out = &mut rest[0];
            if (i >> (n - d)) & 1 == 0 {
                for j in 0..half {
                    out[j] = f_node(parent[j], parent[j + half]);
                }
            } else {
                let left = &self.left[d];
                for j in 0..half {
                    let a = parent[j];
                    out[j] = parent[j + half] + if left[j] == 0 { a } else { -a };
                }
            }
        }
        self.llr[n][0]
    }

    fn decide(&mut self, i: usize, n: usize, u: u8, llr: f64) {
        self.metric += penalty(if u == 0 { llr } else { -llr });
        self.v.push(u);
        let mut cur = vec![u];
        let mut d = n;
        while d > 0 {
            if (i >> (n - d)) & 1 == 0 {
                self.left[d].copy_from_slice(&cur);
                return;
            }
            let left = &self.left[d];
            let mut parent = Vec::with_capacity(2 * cur.len());
            parent.extend(left.iter().zip(&cur).map(|(a, b)| a ^ b));
            parent.extend_from_slice(&cur);
            cur = parent;
            d -= 1;
        }
    }
}

/// SCL output with the winning path metric.
#[derive(Clone, Debug)]
pub struct SclOutput {
    pub result: DecodeResult,
    /// Accumulated penalty of the selected path (0 for a perfectly confident decision).
    pub path_metric: f64,
}

/// Decodes with `list_size` paths and returns the best constraint-satisfying path.
pub fn scl_decode(sub: &SubcodeSpec, llr_ch: &[f64], list_size: usize) -> Result<DecodeResult, Error> {
    scl_decode_detailed(sub, llr_ch, list_size).map(|o| o.result)
}

pub fn scl_decode_detailed(sub: &SubcodeSpec, llr_ch: &[f64], list_size: usize) -> Result<SclOutput, Error> {
    let len = sub.len();
    check_llrs(llr_ch, len)?;
    if list_size == 0 {
        return Err(Error::InvalidArgument("list size must be at least 1".into()));
    }
    let n = sub.n() as usize;
    let mut paths = vec![Path::new(n)];
    for i in 0..len {
        match sub.kind(i) {
            PositionKind::Frozen => {
                for p in &mut paths {
                    let l = p.leaf_llr(i, n, llr_ch);
                    p.decide(i, n, 0, l);
                }
            }
            PositionKind::Dynamic(row) => {
                let support = &sub.dynamic()[row].support;
                for p in &mut paths {
                    let l = p.leaf_llr(i, n, llr_ch);
                    let u = support.iter().fold(0, |acc, &s| acc ^ p.v[s]);
                    p.decide(i, n, u, l);
                }
            }
            PositionKind::Free => {
                let llrs: Vec<f64> = paths.iter_mut().map(|p| p.leaf_llr(i, n, llr_ch)).collect();
                let mut forks: Vec<(f64, usize, u8)> = Vec::with_capacity(2 * paths.len());
                for (k, (p, &l)) in paths.iter().zip(&llrs).enumerate() {
                    forks.push((p.metric + penalty(l), k, 0));
                    forks.push((p.metric + penalty(-l), k, 1));
                }
                if forks.len() > list_size {
                    forks.sort_by(|a, b| a.0.total_cmp(&b.0));
                    forks.truncate(list_size);
                }
                let mut next = Vec::with_capacity(forks.len());
                for &(_, k, u) in &forks {
                    let mut p = paths[k].clone();
                    p.decide(i, n, u, llrs[k]);
                    next.push(p);
                }
                paths = next;
            }
        }
    }
    let best = paths
        .iter()
        .enumerate()
        .filter(|(_, p)| sub.satisfies_constraints(&p.v))
        .min_by(|a, b| a.1.metric.total_cmp(&b.1.metric))
        .or_else(|| paths.iter().enumerate().min_by(|a, b| a.1.metric.total_cmp(&b.1.metric)))
        .map(|(k, _)| k)
        .expect("at least one path survives");
    let path = &paths[best];
    let mut c = path.v.clone();
    polar_transform_in_place(&mut c);
    let c_hat = BitVector::from_bits(&c);
    let valid = sub.is_codeword_bits(&c);
    Ok(SclOutput {
        result: DecodeResult {
            metric: candidate_metric(&c_hat, llr_ch),
            v_hat: BitVector::from_bits(&path.v),
            c_hat,
            iterations: 0,
            converged: true,
            valid,
        },
        path_metric: path.metric,
    })
}
