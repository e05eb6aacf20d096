//! Belief propagation over a polar factor graph joined with the Tanner graph
//! of the dynamic frozen constraints.
//!
//! One iteration is a right-to-left sweep of L-messages through stages
//! `n..1`, one flooding sum-product round on the outer checks, and a
//! left-to-right sweep of R-messages through stages `1..n`. LLRs are positive
//! for bit 0 and are clamped to `±llr_max` after every operation.

use std::sync::Arc;

use crate::construction::SubcodeSpec;
use crate::error::Error;
use crate::gf2::BitVector;
use crate::transform::{
    classify_nodes, perm_matrices, post_transform, relax_constraints, relaxation_matrices,
    AffinePerm, NodeClassification,
};

pub const LLR_MAX: f64 = 20.0;

/// Scaling applied to min-sum check-node outputs.
pub const MIN_SUM_SCALE: f64 = 0.9375;

#[inline]
fn clamp(x: f64, max: f64) -> f64 {
    x.clamp(-max, max)
}

/// Check-node rule used in processing elements and outer checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CheckRule {
    /// Exact `2·atanh(tanh(a/2)·tanh(b/2))`.
    SumProduct { llr_max: f64 },
    /// Scaled `sign(a)·sign(b)·min(|a|, |b|)`.
    MinSum { llr_max: f64 },
}

impl CheckRule {
    #[inline]
    pub fn llr_max(self) -> f64 {
        match self {
            Self::SumProduct { llr_max } | Self::MinSum { llr_max } => llr_max,
        }
    }

    #[inline]
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            Self::SumProduct { llr_max } => boxplus_with(a, b, llr_max),
            Self::MinSum { llr_max } => {
                let m = a.abs().min(b.abs());
                let s = if (a < 0.0) ^ (b < 0.0) { -1.0 } else { 1.0 };
                // saturated inputs are certain; pass the other one through unscaled
                if a.abs() >= llr_max || b.abs() >= llr_max {
                    clamp(s * m, llr_max)
                } else {
                    clamp(s * m * MIN_SUM_SCALE, llr_max)
                }
            }
        }
    }
}

impl Default for CheckRule {
    fn default() -> Self {
        Self::SumProduct { llr_max: LLR_MAX }
    }
}

/// Exact boxplus with the default clamp.
pub fn boxplus(a: f64, b: f64) -> f64 {
    boxplus_with(a, b, LLR_MAX)
}

/// Exact boxplus in sign-magnitude form, clamped to `±llr_max`.
///
/// An input at saturation is treated as a certain bit, so the other input
/// passes through with the corresponding sign.
#[inline]
pub fn boxplus_with(a: f64, b: f64, llr_max: f64) -> f64 {
    if b.abs() >= llr_max {
        return clamp(if b < 0.0 { -a } else { a }, llr_max);
    }
    if a.abs() >= llr_max {
        return clamp(if a < 0.0 { -b } else { b }, llr_max);
    }
    let m = a.abs().min(b.abs());
    let s = if (a < 0.0) ^ (b < 0.0) { -m } else { m };
    let e_sum = (-(a + b).abs()).exp();
    let e_diff = (-(a - b).abs()).exp();
    clamp(s + ((1.0 + e_sum) / (1.0 + e_diff)).ln(), llr_max)
}

/// Outputs of one processing element update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PeOutputs {
    pub lu1: f64,
    pub lu2: f64,
    pub rx1: f64,
    pub rx2: f64,
}

/// Extrinsic update of one butterfly `x1 = u1 ⊕ u2`, `x2 = u2`.
#[inline]
pub fn pe_update(lx1: f64, lx2: f64, ru1: f64, ru2: f64, rule: CheckRule) -> PeOutputs {
    let (lu1, lu2) = pe_left(lx1, lx2, ru1, ru2, rule);
    let (rx1, rx2) = pe_right(lx1, lx2, ru1, ru2, rule);
    PeOutputs { lu1, lu2, rx1, rx2 }
}

/// Leftward half of [`pe_update`]: `(Lu1, Lu2)`.
#[inline]
fn pe_left(lx1: f64, lx2: f64, ru1: f64, ru2: f64, rule: CheckRule) -> (f64, f64) {
    let max = rule.llr_max();
    (
        rule.combine(lx1, clamp(lx2 + ru2, max)),
        clamp(rule.combine(lx1, ru1) + lx2, max),
    )
}

/// Rightward half of [`pe_update`]: `(Rx1, Rx2)`.
#[inline]
fn pe_right(lx1: f64, lx2: f64, ru1: f64, ru2: f64, rule: CheckRule) -> (f64, f64) {
    let max = rule.llr_max();
    (
        rule.combine(ru1, clamp(ru2 + lx2, max)),
        clamp(rule.combine(ru1, lx1) + ru2, max),
    )
}

/// Decoder parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BpConfig {
    pub max_iter: usize,
    pub llr_max: f64,
    pub min_sum: bool,
    /// Stop only when `v̂·G = ĉ` and `v̂` satisfies every constraint. When
    /// false, the first condition alone stops decoding.
    pub strict_stop: bool,
}

impl Default for BpConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            llr_max: LLR_MAX,
            min_sum: false,
            strict_stop: true,
        }
    }
}

impl BpConfig {
    pub fn rule(&self) -> CheckRule {
        if self.min_sum {
            CheckRule::MinSum { llr_max: self.llr_max }
        } else {
            CheckRule::SumProduct { llr_max: self.llr_max }
        }
    }
}

/// A compiled decoding graph for one (possibly permuted and relaxed)
/// representation of a polar subcode.
#[derive(Clone, Debug)]
pub struct DecoderGraph {
    n: u32,
    perm: AffinePerm,
    relaxed: bool,
    /// Subcode seen by this graph, in the permuted (and relaxed) domain.
    graph_code: SubcodeSpec,
    /// Per stage `s-1`: upper indices of active and removed butterflies.
    active: Vec<Vec<usize>>,
    bypassed: Vec<Vec<usize>>,
    classification: Option<NodeClassification>,
    /// Outer checks over input nodes: support plus constrained index.
    checks: Vec<Vec<usize>>,
    frozen: Vec<bool>,
    original: Arc<SubcodeSpec>,
}

impl DecoderGraph {
    /// Builds the graph of `original` seen through `perm` (position `j` of the
    /// graph reads channel position `π(j)`), optionally relaxed.
    pub fn new(original: Arc<SubcodeSpec>, perm: AffinePerm, relaxed: bool) -> Result<Self, Error> {
        let len = original.len();
        if perm.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for a code of length {len}",
                perm.len()
            )));
        }
        let transformed = if perm.is_identity() {
            (*original).clone()
        } else {
            // y'_j = y_{π(j)} is y·T⁻¹, so T⁻¹ is the post-transformation.
            let (_, t_inv) = perm_matrices(&perm);
            let empty = crate::gf2::BitMatrix::zeros(0, len);
            let (v_t, _) = post_transform(original.constraints(), &empty, &t_inv)?;
            SubcodeSpec::from_constraints(&v_t)?
        };
        let (graph_code, classification) = if relaxed {
            let plan = relaxation_matrices(classify_nodes(&transformed))?;
            let v_r = relax_constraints(transformed.constraints(), plan.r())?;
            (
                SubcodeSpec::from_constraints(&v_r)?,
                Some(plan.classification().clone()),
            )
        } else {
            (transformed, None)
        };
        let n = original.n();
        let mut active = Vec::with_capacity(n as usize);
        let mut bypassed = Vec::with_capacity(n as usize);
        for s in 1..=n as usize {
            let h = 1 << (s - 1);
            let (on, off): (Vec<usize>, Vec<usize>) = (0..len)
                .filter(|j| j & h == 0)
                .partition(|&j| !classification.as_ref().is_some_and(|c| c.is_removed(s, j)));
            active.push(on);
            bypassed.push(off);
        }
        let checks = graph_code
            .dynamic()
            .iter()
            .map(|d| {
                let mut vars = d.support.clone();
                vars.push(d.index);
                vars
            })
            .collect();
        let frozen = (0..len).map(|i| graph_code.is_hard_frozen(i)).collect();
        Ok(Self {
            n,
            perm,
            relaxed,
            graph_code,
            active,
            bypassed,
            classification,
            checks,
            frozen,
            original,
        })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn len(&self) -> usize {
        1 << self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn perm(&self) -> &AffinePerm {
        &self.perm
    }

    pub fn is_relaxed(&self) -> bool {
        self.relaxed
    }

    /// Node labels used for relaxation, if the graph is relaxed.
    pub fn classification(&self) -> Option<&NodeClassification> {
        self.classification.as_ref()
    }

    pub fn graph_code(&self) -> &SubcodeSpec {
        &self.graph_code
    }

    pub fn original(&self) -> &Arc<SubcodeSpec> {
        &self.original
    }

    pub fn checks(&self) -> &[Vec<usize>] {
        &self.checks
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.frozen[i]
    }

    /// Number of active processing elements per stage.
    pub fn active_pes(&self) -> Vec<usize> {
        self.active.iter().map(Vec::len).collect()
    }

    /// `x ← x·G` for the transform this graph implements (relaxed or not).
    fn encode_in_place(&self, bits: &mut [u8]) {
        for (s, uppers) in self.active.iter().enumerate() {
            let h = 1 << s;
            for &j in uppers {
                bits[j] ^= bits[j + h];
            }
        }
    }
}

/// L and R message grids plus outer check-to-variable messages.
#[derive(Clone, Debug)]
pub struct MessageState {
    len: usize,
    /// `(n+1) × N`, stage-major.
    pub l: Vec<f64>,
    pub r: Vec<f64>,
    /// Check-to-variable messages, one vector per check, edge order as in the check.
    pub c2v: Vec<Vec<f64>>,
}

impl MessageState {
    pub fn new(graph: &DecoderGraph) -> Self {
        let len = graph.len();
        let cells = (graph.n as usize + 1) * len;
        Self {
            len,
            l: vec![0.0; cells],
            r: vec![0.0; cells],
            c2v: graph.checks.iter().map(|c| vec![0.0; c.len()]).collect(),
        }
    }

    pub fn l_stage(&self, s: usize) -> &[f64] {
        &self.l[s * self.len..(s + 1) * self.len]
    }

    pub fn r_stage(&self, s: usize) -> &[f64] {
        &self.r[s * self.len..(s + 1) * self.len]
    }
}

/// One flooding sum-product round on the outer checks, refreshing `R[0]`.
///
/// Variable-to-check messages combine `L[0]` with the other checks' previous
/// messages. `R[0][i]` becomes `+llr_max` for hard frozen inputs and the sum of
/// incoming check messages otherwise.
pub fn outer_update(graph: &DecoderGraph, state: &mut MessageState, rule: CheckRule) {
    let len = state.len;
    let max = rule.llr_max();
    let mut ext = vec![0.0; len];
    for (check, msgs) in graph.checks.iter().zip(&state.c2v) {
        for (&i, &m) in check.iter().zip(msgs) {
            ext[i] += m;
        }
    }
    let mut v2c = Vec::new();
    let mut prefix = Vec::new();
    for (check, msgs) in graph.checks.iter().zip(state.c2v.iter_mut()) {
        v2c.clear();
        v2c.extend(
            check
                .iter()
                .zip(msgs.iter())
                .map(|(&i, &m)| clamp(state.l[i] + ext[i] - m, max)),
        );
        // Saturated inputs are the identity of `combine`, so +max seeds both scans.
        prefix.clear();
        prefix.push(max);
        for e in 0..v2c.len() - 1 {
            let p = rule.combine(prefix[e], v2c[e]);
            prefix.push(p);
        }
        let mut suffix = max;
        for e in (0..v2c.len()).rev() {
            msgs[e] = rule.combine(prefix[e], suffix);
            suffix = rule.combine(suffix, v2c[e]);
        }
    }
    ext.iter_mut().for_each(|x| *x = 0.0);
    for (check, msgs) in graph.checks.iter().zip(&state.c2v) {
        for (&i, &m) in check.iter().zip(msgs) {
            ext[i] += m;
        }
    }
    for i in 0..len {
        state.r[i] = if graph.frozen[i] { max } else { clamp(ext[i], max) };
    }
}

/// Output of one decoder.
#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    /// Codeword estimate in the original (unpermuted) domain.
    pub c_hat: BitVector,
    /// `c_hat·G_N`, the input estimate of the original code.
    pub v_hat: BitVector,
    pub iterations: usize,
    /// The stopping condition fired.
    pub converged: bool,
    /// `c_hat` is a codeword of the original subcode.
    pub valid: bool,
    /// Correlation of `c_hat` with the channel LLRs; higher is more likely.
    pub metric: f64,
}

/// Correlation `Σ (1 − 2ĉ_i)·llr_i`.
pub fn candidate_metric(c_hat: &BitVector, llr_ch: &[f64]) -> f64 {
    assert_eq!(c_hat.len(), llr_ch.len(), "candidate and LLR lengths differ");
    llr_ch
        .iter()
        .enumerate()
        .map(|(i, &l)| if c_hat.get(i) { -l } else { l })
        .sum()
}

pub(crate) fn check_llrs(llr_ch: &[f64], len: usize) -> Result<(), Error> {
    if llr_ch.len() != len {
        return Err(Error::DimensionMismatch(format!(
            "{} channel LLRs for block length {len}",
            llr_ch.len()
        )));
    }
    if let Some(i) = llr_ch.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFiniteLlr(i));
    }
    Ok(())
}

/// Iterative decoding of `llr_ch` (original domain) over `graph`.
pub fn decode(graph: &DecoderGraph, llr_ch: &[f64], cfg: &BpConfig) -> Result<DecodeResult, Error> {
    let len = graph.len();
    check_llrs(llr_ch, len)?;
    let n = graph.n as usize;
    let rule = cfg.rule();
    let max = cfg.llr_max;
    let mut st = MessageState::new(graph);
    let right = n * len;
    for (j, &src) in graph.perm.map().iter().enumerate() {
        st.l[right + j] = clamp(llr_ch[src], max);
    }
    outer_update(graph, &mut st, rule);

    let mut v_hat = vec![0u8; len];
    let mut c_hat = vec![0u8; len];
    let mut reenc = vec![0u8; len];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        for s in (1..=n).rev() {
            let h = 1 << (s - 1);
            let (lo, hi) = ((s - 1) * len, s * len);
            for &j in &graph.active[s - 1] {
                let (lu1, lu2) = pe_left(st.l[hi + j], st.l[hi + j + h], st.r[lo + j], st.r[lo + j + h], rule);
                st.l[lo + j] = lu1;
                st.l[lo + j + h] = lu2;
            }
            for &j in &graph.bypassed[s - 1] {
                st.l[lo + j] = st.l[hi + j];
                st.l[lo + j + h] = st.l[hi + j + h];
            }
        }
        outer_update(graph, &mut st, rule);
        for s in 1..=n {
            let h = 1 << (s - 1);
            let (lo, hi) = ((s - 1) * len, s * len);
            for &j in &graph.active[s - 1] {
                let (rx1, rx2) = pe_right(st.l[hi + j], st.l[hi + j + h], st.r[lo + j], st.r[lo + j + h], rule);
                st.r[hi + j] = rx1;
                st.r[hi + j + h] = rx2;
            }
            for &j in &graph.bypassed[s - 1] {
                st.r[hi + j] = st.r[lo + j];
                st.r[hi + j + h] = st.r[lo + j + h];
            }
        }
        for i in 0..len {
            v_hat[i] = (st.l[i] + st.r[i] < 0.0) as u8;
            c_hat[i] = (st.l[right + i] + st.r[right + i] < 0.0) as u8;
        }
        reenc.copy_from_slice(&v_hat);
        graph.encode_in_place(&mut reenc);
        if reenc == c_hat && (!cfg.strict_stop || graph.graph_code.satisfies_constraints(&v_hat)) {
            converged = true;
            break;
        }
    }

    let mut original = vec![0u8; len];
    for (j, &dst) in graph.perm.map().iter().enumerate() {
        original[dst] = c_hat[j];
    }
    let valid = graph.original.is_codeword_bits(&original);
    let c_hat = BitVector::from_bits(&original);
    let mut v = original;
    crate::construction::polar_transform_in_place(&mut v);
    Ok(DecodeResult {
        metric: candidate_metric(&c_hat, llr_ch),
        c_hat,
        v_hat: BitVector::from_bits(&v),
        iterations,
        converged,
        valid,
    })
}
