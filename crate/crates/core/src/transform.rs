//! Alternative representations of a polar subcode.
//!
//! An affine permutation `z ↦ A·z + b` on LSB-first index bits, applied as a
//! post-transformation, turns a polar subcode into a different polar subcode
//! followed by a permutation of the codeword. Relaxation removes processing
//! elements whose two left inputs are both frozen or both information bits;
//! the removed transformations `R` (with `R·G_relaxed = G_N`) are folded into
//! the constraint matrix.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::construction::{polar_transform_matrix, SubcodeSpec};
use crate::error::Error;
use crate::gf2::{BitMatrix, BitVector};

/// Permutation groups used for ensemble decoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PermGroupKind {
    Identity,
    /// Lower-triangular affine: unit-diagonal lower-triangular `A`, any `b`.
    Lta,
    /// General affine: any invertible `A`, any `b`.
    Ga,
    /// Stage shuffles: `A` a permutation matrix and `b = 0`.
    Stage,
}

impl PermGroupKind {
    /// Group order for `n` index bits.
    pub fn order(self, n: u32) -> u128 {
        let n = n as u128;
        match self {
            Self::Identity => 1,
            Self::Lta => 1u128 << (n * (n - 1) / 2 + n),
            Self::Ga => {
                // |GL(n, 2)| · 2^n
                let q = 1u128 << n;
                (0..n).map(|i| q - (1u128 << i)).product::<u128>() * q
            }
            Self::Stage => (1..=n).product::<u128>().max(1),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Lta => "lta",
            Self::Ga => "ga",
            Self::Stage => "stage",
        }
    }
}

impl fmt::Display for PermGroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PermGroupKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "none" => Ok(Self::Identity),
            "lta" => Ok(Self::Lta),
            "ga" => Ok(Self::Ga),
            "stage" | "pi" => Ok(Self::Stage),
            _ => Err(Error::Parse(format!(
                "unknown permutation group {s:?} (expected identity, lta, ga or stage)"
            ))),
        }
    }
}

/// Affine index permutation `π(z) = A·z + b` over LSB-first index bits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffinePerm {
    a: BitMatrix,
    b: BitVector,
    map: Vec<usize>,
}

impl AffinePerm {
    pub fn new(a: BitMatrix, b: BitVector) -> Result<Self, Error> {
        let n = a.rows();
        if a.cols() != n || b.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "affine map needs an n x n matrix and length-n offset, got {}x{} and {}",
                a.rows(),
                a.cols(),
                b.len()
            )));
        }
        if n > 24 {
            return Err(Error::InvalidArgument(format!("{n} index bits is too many")));
        }
        if a.rank() != n {
            return Err(Error::Singular);
        }
        let map = (0..1usize << n)
            .map(|i| {
                let z = BitVector::from_bits(&(0..n).map(|t| ((i >> t) & 1) as u8).collect::<Vec<_>>());
                let mut zp = a.mul_vec(&z).expect("dimensions checked");
                zp.xor_assign(&b);
                zp.iter_ones().map(|t| 1usize << t).sum()
            })
            .collect();
        Ok(Self { a, b, map })
    }

    pub fn identity(n: u32) -> Self {
        let n = n as usize;
        Self {
            a: BitMatrix::identity(n),
            b: BitVector::zeros(n),
            map: (0..1usize << n).collect(),
        }
    }

    pub fn n(&self) -> u32 {
        self.a.rows() as u32
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn a(&self) -> &BitMatrix {
        &self.a
    }

    pub fn b(&self) -> &BitVector {
        &self.b
    }

    /// The index map `i ↦ π(i)`.
    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn inverse_map(&self) -> Vec<usize> {
        let mut inv = vec![0; self.map.len()];
        for (i, &p) in self.map.iter().enumerate() {
            inv[p] = i;
        }
        inv
    }

    pub fn belongs_to(&self, kind: PermGroupKind) -> bool {
        let n = self.a.rows();
        match kind {
            PermGroupKind::Identity => self.is_identity(),
            PermGroupKind::Ga => true,
            PermGroupKind::Lta => (0..n).all(|r| {
                self.a.get(r, r) && (r + 1..n).all(|c| !self.a.get(r, c))
            }),
            PermGroupKind::Stage => {
                self.b.is_zero()
                    && (0..n).all(|r| self.a.row_weight(r) == 1)
                    && (0..n).all(|c| (0..n).filter(|&r| self.a.get(r, c)).count() == 1)
            }
        }
    }
}

/// Draws a uniformly random element of the group.
pub fn sample_permutation<R: Rng + ?Sized>(kind: PermGroupKind, n: u32, rng: &mut R) -> AffinePerm {
    let size = n as usize;
    let random_b = |rng: &mut R| {
        BitVector::from_bits(&(0..size).map(|_| rng.random::<bool>() as u8).collect::<Vec<_>>())
    };
    let (a, b) = match kind {
        PermGroupKind::Identity => return AffinePerm::identity(n),
        PermGroupKind::Lta => {
            let a = BitMatrix::from_fn(size, size, |r, c| r == c || (c < r && rng.random::<bool>()));
            (a, random_b(rng))
        }
        PermGroupKind::Ga => {
            let a = loop {
                let a = BitMatrix::from_fn(size, size, |_, _| rng.random::<bool>());
                if a.rank() == size {
                    break a;
                }
            };
            (a, random_b(rng))
        }
        PermGroupKind::Stage => {
            let mut sigma: Vec<usize> = (0..size).collect();
            sigma.shuffle(rng);
            let a = BitMatrix::from_fn(size, size, |r, c| sigma[r] == c);
            (a, BitVector::zeros(size))
        }
    };
    AffinePerm::new(a, b).expect("sampled matrix is invertible")
}

/// Permutation matrix `T` with `T[i][π(i)] = 1` and its inverse `Tᵀ`.
///
/// `c·T` moves `c_i` to position `π(i)`; `c·T⁻¹` puts `c_{π(j)}` at position `j`.
pub fn perm_matrices(p: &AffinePerm) -> (BitMatrix, BitMatrix) {
    let len = p.len();
    let t = BitMatrix::from_fn(len, len, |i, j| p.map()[i] == j);
    let t_inv = t.transpose();
    (t, t_inv)
}

/// Moves an invertible post-transformation `T` into the subcode:
/// `W_T = W·G_N·T·G_N` and `V_T = V·(G_N·T⁻¹·G_N)ᵀ`.
///
/// The codewords of the returned subcode are `c·T` for codewords `c` of the
/// input subcode. Either `v` or `w` may have zero rows.
pub fn post_transform(
    v: &BitMatrix,
    w: &BitMatrix,
    t: &BitMatrix,
) -> Result<(BitMatrix, BitMatrix), Error> {
    let len = t.rows();
    if t.cols() != len || !len.is_power_of_two() || v.cols() != len || w.cols() != len {
        return Err(Error::DimensionMismatch(format!(
            "post-transform of {}- and {}-column matrices by a {}x{} matrix",
            v.cols(),
            w.cols(),
            t.rows(),
            t.cols()
        )));
    }
    let g = polar_transform_matrix(len.trailing_zeros());
    let t_inv = t.inverse()?;
    let v_t = v.mul(&g.mul(&t_inv)?.mul(&g)?.transpose())?;
    let w_t = w.mul(&g)?.mul(t)?.mul(&g)?;
    Ok((v_t, w_t))
}

/// Node label used to decide which processing elements relaxation removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeLabel {
    Frozen,
    Info,
    Mixed,
}

/// Node labels for every stage and the processing elements removed by relaxation.
///
/// Stage `s ∈ 1..=n` holds the butterflies `(j, j + 2^{s-1})` for every `j`
/// with bit `s-1` clear, acting as `x_j = u_j ⊕ u_{j+h}`, `x_{j+h} = u_{j+h}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeClassification {
    n: u32,
    labels: Vec<Vec<NodeLabel>>,
    removed: Vec<Vec<bool>>,
}

impl NodeClassification {
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Label of node `index` at `stage` (stage 0 is the input side).
    pub fn label(&self, stage: usize, index: usize) -> NodeLabel {
        self.labels[stage][index]
    }

    /// Whether the butterfly at `stage` whose upper node is `upper` was removed.
    pub fn is_removed(&self, stage: usize, upper: usize) -> bool {
        self.removed[stage - 1][upper]
    }

    /// Removed processing elements as `(stage, upper, lower)` triples.
    pub fn removed_pes(&self) -> Vec<(usize, usize, usize)> {
        let len = 1usize << self.n;
        let mut out = Vec::new();
        for s in 1..=self.n as usize {
            let h = 1 << (s - 1);
            for j in (0..len).filter(|j| j & h == 0) {
                if self.removed[s - 1][j] {
                    out.push((s, j, j + h));
                }
            }
        }
        out
    }

    /// Applies the relaxed transform `x ← x·G_relaxed` in place.
    pub fn encode_in_place(&self, bits: &mut [u8]) {
        let len = bits.len();
        for s in 1..=self.n as usize {
            let h = 1 << (s - 1);
            for j in (0..len).filter(|j| j & h == 0) {
                if !self.removed[s - 1][j] {
                    bits[j] ^= bits[j + h];
                }
            }
        }
    }
}

/// Labels stage-0 nodes frozen (hard frozen in `sub`) or information
/// (everything else) and propagates labels through the stages.
pub fn classify_nodes(sub: &SubcodeSpec) -> NodeClassification {
    let frozen: Vec<bool> = (0..sub.len()).map(|i| sub.is_hard_frozen(i)).collect();
    classify_frozen_mask(&frozen)
}

pub(crate) fn classify_frozen_mask(frozen: &[bool]) -> NodeClassification {
    let len = frozen.len();
    let n = len.trailing_zeros();
    let mut labels = Vec::with_capacity(n as usize + 1);
    labels.push(
        frozen
            .iter()
            .map(|&f| if f { NodeLabel::Frozen } else { NodeLabel::Info })
            .collect::<Vec<_>>(),
    );
    let mut removed = Vec::with_capacity(n as usize);
    for s in 1..=n as usize {
        let h = 1 << (s - 1);
        let prev = &labels[s - 1];
        let mut next = prev.clone();
        let mut gone = vec![false; len];
        for j in (0..len).filter(|j| j & h == 0) {
            let (upper, lower) = (prev[j], prev[j + h]);
            if upper == lower && upper != NodeLabel::Mixed {
                gone[j] = true;
            } else {
                next[j] = NodeLabel::Mixed;
                next[j + h] = NodeLabel::Mixed;
            }
        }
        labels.push(next);
        removed.push(gone);
    }
    NodeClassification { n, labels, removed }
}

/// Relaxed transform and the matrix `R` of removed transformations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelaxationPlan {
    classification: NodeClassification,
    g_relaxed: BitMatrix,
    r: BitMatrix,
}

impl RelaxationPlan {
    pub fn new(sub: &SubcodeSpec) -> Result<Self, Error> {
        relaxation_matrices(classify_nodes(sub))
    }

    pub fn classification(&self) -> &NodeClassification {
        &self.classification
    }

    /// `G_N^(R)`
    pub fn g_relaxed(&self) -> &BitMatrix {
        &self.g_relaxed
    }

    /// `R` with `R·G_N^(R) = G_N`.
    pub fn r(&self) -> &BitMatrix {
        &self.r
    }
}

/// Builds `G_relaxed` from the surviving butterflies and `R = G_N·G_relaxed⁻¹`.
pub fn relaxation_matrices(classification: NodeClassification) -> Result<RelaxationPlan, Error> {
    let n = classification.n;
    let len = 1usize << n;
    let mut rows = Vec::with_capacity(len);
    for i in 0..len {
        let mut e = vec![0u8; len];
        e[i] = 1;
        classification.encode_in_place(&mut e);
        rows.push(e);
    }
    let g_relaxed = BitMatrix::from_rows(&rows)?;
    let g = polar_transform_matrix(n);
    let r = g.mul(&g_relaxed.inverse()?)?;
    if r.mul(&g_relaxed)? != g {
        return Err(Error::RelaxationInconsistent);
    }
    Ok(RelaxationPlan {
        classification,
        g_relaxed,
        r,
    })
}

/// `V_R = V·Rᵀ`: constraints on the input of the relaxed transform.
///
/// `R` is block diagonal with polar transforms on the relaxed blocks, hence an
/// involution, so this equals `V·(R⁻¹)ᵀ`.
pub fn relax_constraints(v: &BitMatrix, r: &BitMatrix) -> Result<BitMatrix, Error> {
    v.mul(&r.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::construction::{CrcSpec, PolarCodeSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example_perm() -> AffinePerm {
        let a = BitMatrix::parse_text("100\n110\n101\n").unwrap();
        AffinePerm::new(a, BitVector::from_bits(&[1, 0, 0])).unwrap()
    }

    #[test]
    fn group_orders() {
        assert_eq!(PermGroupKind::Lta.order(3), 64);
        assert_eq!(PermGroupKind::Stage.order(3), 6);
        assert_eq!(PermGroupKind::Ga.order(3), 168 * 8);
        assert_eq!(PermGroupKind::Identity.order(7), 1);
        assert_eq!(PermGroupKind::Lta.order(7), 1 << 28);
    }

    #[test]
    fn affine_maps() {
        assert_eq!(AffinePerm::identity(3).map(), &[0, 1, 2, 3, 4, 5, 6, 7]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_permutation(PermGroupKind::Identity, 3, &mut rng).is_identity());
        let p = example_perm();
        assert_eq!(p.map(), &[1, 6, 3, 4, 5, 2, 7, 0]);
        assert!(p.belongs_to(PermGroupKind::Lta));
        assert!(!p.belongs_to(PermGroupKind::Stage));
        let singular = BitMatrix::parse_text("110\n110\n001\n").unwrap();
        assert!(AffinePerm::new(singular, BitVector::zeros(3)).is_err());
    }

    #[test]
    fn sampled_permutations_belong_to_their_group() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in [PermGroupKind::Lta, PermGroupKind::Ga, PermGroupKind::Stage] {
            for n in 1..=7 {
                let p = sample_permutation(kind, n, &mut rng);
                assert!(p.belongs_to(kind), "{kind} n={n}");
                let mut seen = p.map().to_vec();
                seen.sort_unstable();
                assert!(seen.iter().enumerate().all(|(i, &x)| i == x));
            }
        }
    }

    #[test]
    fn lta_sampling_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts = std::collections::HashMap::new();
        let trials = 10_000.0;
        for _ in 0..10_000 {
            let p = sample_permutation(PermGroupKind::Lta, 3, &mut rng);
            *counts.entry(p.map().to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 64);
        let p: f64 = 1.0 / 64.0;
        let sigma = (trials * p * (1.0 - p)).sqrt();
        for &c in counts.values() {
            assert!((c as f64 - trials * p).abs() <= 5.0 * sigma, "count {c}");
        }
    }

    #[test]
    fn permutation_matrices() {
        let (t, t_inv) = perm_matrices(&AffinePerm::identity(3));
        assert!(t.is_identity() && t_inv.is_identity());
        let (t, t_inv) = perm_matrices(&example_perm());
        assert_eq!(
            t_inv.to_text(),
            "00000001\n10000000\n00000100\n00100000\n00010000\n00001000\n01000000\n00000010\n"
        );
        assert!(t.mul(&t_inv).unwrap().is_identity());
    }

    #[test]
    fn identity_post_transform_is_a_no_op() {
        let v = BitMatrix::parse_text("10000000\n01000000\n00100000\n00010100\n00011010\n00001001\n").unwrap();
        let w = v.nullspace_basis().unwrap();
        let (v_t, w_t) = post_transform(&v, &w, &BitMatrix::identity(8)).unwrap();
        assert_eq!((v_t, w_t), (v.clone(), w));
        assert!(post_transform(&v, &BitMatrix::zeros(0, 8), &BitMatrix::identity(4)).is_err());
    }

    #[test]
    fn classification_of_the_8_5_code() {
        let code = PolarCodeSpec::new(3, vec![3, 4, 5, 6, 7]).unwrap();
        let sub = SubcodeSpec::crc_aided(&code, &CrcSpec::none()).unwrap();
        let c = classify_nodes(&sub);
        assert_eq!(c.removed_pes(), vec![(1, 0, 1), (1, 4, 5), (1, 6, 7), (2, 4, 6), (2, 5, 7)]);
    }

    #[test]
    fn degenerate_relaxations() {
        let all_frozen = SubcodeSpec::from_constraints(&BitMatrix::identity(8)).unwrap();
        let plan = RelaxationPlan::new(&all_frozen).unwrap();
        assert_eq!(plan.classification().removed_pes().len(), 12);
        assert!(plan.g_relaxed().is_identity());
        assert_eq!(plan.r(), &polar_transform_matrix(3));

        let rate_one = SubcodeSpec::from_constraints(&BitMatrix::zeros(0, 8)).unwrap();
        let plan = RelaxationPlan::new(&rate_one).unwrap();
        assert_eq!(plan.classification().removed_pes().len(), 12);
        assert_eq!(plan.r(), &polar_transform_matrix(3));

        // alternating frozen/info blocks every butterfly from removal
        let v = BitMatrix::parse_text("1000\n0010\n").unwrap();
        let plan = RelaxationPlan::new(&SubcodeSpec::from_constraints(&v).unwrap()).unwrap();
        assert!(plan.classification().removed_pes().is_empty());
        assert!(plan.r().is_identity());
    }

    #[test]
    fn relax_with_identity_is_a_no_op() {
        let v = BitMatrix::parse_text("1000\n0110\n").unwrap();
        assert_eq!(relax_constraints(&v, &BitMatrix::identity(4)).unwrap(), v);
    }
}
