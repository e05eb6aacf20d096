//! Helpers shared by the integration tests: random code generators and
//! brute-force checkers that only rely on the public API.

#![allow(dead_code)]

use std::collections::BTreeSet;

use polar_subcode::construction::{polar_transform_in_place, CrcSpec, PolarCodeSpec, SubcodeSpec};
use polar_subcode::gf2::{BitMatrix, BitVector};
use polar_subcode::transform::{
    perm_matrices, post_transform, relax_constraints, sample_permutation, AffinePerm, PermGroupKind,
    RelaxationPlan,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn bits_of(x: u64, len: usize) -> Vec<u8> {
    (0..len).map(|t| if t < 64 { ((x >> t) & 1) as u8 } else { 0 }).collect()
}

/// Polar code with a random information set and a random CRC of degree ≤ 3.
pub fn random_polar_subcode<R: Rng>(rng: &mut R, n: u32) -> SubcodeSpec {
    let len = 1usize << n;
    let size = rng.random_range(1..=len);
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(rng);
    let code = PolarCodeSpec::new(n, idx[..size].to_vec()).unwrap();
    let degree = rng.random_range(0..=3u32.min(size as u32 - 1));
    let crc = if degree == 0 {
        CrcSpec::none()
    } else {
        CrcSpec::new(degree, rng.random_range(0..1u64 << degree) | 1).unwrap()
    };
    SubcodeSpec::crc_aided(&code, &crc).unwrap()
}

/// Subcode defined by a random full-rank constraint matrix.
pub fn random_constraint_subcode<R: Rng>(rng: &mut R, n: u32) -> SubcodeSpec {
    let len = 1usize << n;
    let rows = rng.random_range(0..len);
    loop {
        let v = BitMatrix::from_fn(rows, len, |_, _| rng.random::<bool>());
        if v.rank() == rows {
            return SubcodeSpec::from_constraints(&v).unwrap();
        }
    }
}

/// Every codeword, by enumerating all messages.
pub fn codewords(sub: &SubcodeSpec) -> BTreeSet<Vec<u8>> {
    assert!(sub.k() <= 16);
    (0..1u64 << sub.k())
        .map(|m| sub.encode_bits(&bits_of(m, sub.k())).1)
        .collect()
}

/// `c·T`: position `i` moves to `π(i)`.
pub fn permute(c: &[u8], p: &AffinePerm) -> Vec<u8> {
    let mut out = vec![0u8; c.len()];
    for (i, &dst) in p.map().iter().enumerate() {
        out[dst] = c[i];
    }
    out
}

/// Pre-transform `W` whose rows are the inputs `v` of the unit messages.
pub fn pre_transform(sub: &SubcodeSpec) -> BitMatrix {
    let rows: Vec<BitVector> = (0..sub.k())
        .map(|i| {
            let mut m = vec![0u8; sub.k()];
            m[i] = 1;
            BitVector::from_bits(&sub.encode_bits(&m).0)
        })
        .collect();
    BitMatrix::from_row_vectors(sub.len(), &rows).unwrap()
}

fn g(n: u32) -> BitMatrix {
    polar_subcode::construction::polar_transform_matrix(n)
}

/// `R·G_rel = G_N`, `R` is an involution, and the relaxed representation
/// encodes exactly into the original code.
pub fn check_relaxation(sub: &SubcodeSpec) -> Result<(), String> {
    let plan = RelaxationPlan::new(sub).map_err(|e| e.to_string())?;
    let gn = g(sub.n());
    if plan.r().mul(plan.g_relaxed()).unwrap() != gn {
        return Err("R·G_rel != G_N".into());
    }
    if !plan.r().mul(plan.r()).unwrap().is_identity() {
        return Err("R is not an involution".into());
    }
    let relaxed =
        SubcodeSpec::from_constraints(&relax_constraints(sub.constraints(), plan.r()).unwrap()).unwrap();
    if relaxed.k() != sub.k() {
        return Err("relaxation changed the dimension".into());
    }
    let messages = 1u64 << sub.k().min(8);
    for m in 0..messages {
        let (v, _) = relaxed.encode_bits(&bits_of(m, relaxed.k()));
        let mut c = v.clone();
        plan.classification().encode_in_place(&mut c);
        let direct = BitVector::from_bits(&v);
        if plan.g_relaxed().left_mul(&direct).unwrap().to_bits() != c {
            return Err("relaxed encoder disagrees with G_rel".into());
        }
        if !sub.is_codeword_bits(&c) {
            return Err(format!("relaxed encoding of message {m} is not a codeword"));
        }
    }
    Ok(())
}

/// The transformed subcode holds exactly the permuted codewords, and
/// `u·W_T·G_N·T⁻¹ = u·W·G_N` for every message `u`.
pub fn check_post_transform(sub: &SubcodeSpec, p: &AffinePerm) -> Result<(), String> {
    let (t, t_inv) = perm_matrices(p);
    let w = pre_transform(sub);
    let (v_t, w_t) = post_transform(sub.constraints(), &w, &t).map_err(|e| e.to_string())?;
    let moved = SubcodeSpec::from_constraints(&v_t).map_err(|e| e.to_string())?;
    let expected: BTreeSet<Vec<u8>> = codewords(sub).iter().map(|c| permute(c, p)).collect();
    if codewords(&moved) != expected {
        return Err("codeword sets differ".into());
    }
    let chain = w_t.mul(&g(sub.n())).unwrap().mul(&t_inv).unwrap();
    let direct = w.mul(&g(sub.n())).unwrap();
    for m in 0..1u64 << sub.k() {
        let u = BitVector::from_bits(&bits_of(m, sub.k()));
        if chain.left_mul(&u).unwrap() != direct.left_mul(&u).unwrap() {
            return Err(format!("chain identity fails for message {m}"));
        }
    }
    Ok(())
}

/// `j` is at least as reliable as `i` in the universal polar partial order.
pub fn dominates(j: usize, i: usize, n: u32) -> bool {
    (0..n).all(|t| (j >> t).count_ones() >= (i >> t).count_ones())
}

/// Upward closure of a few random indices: a decreasing information set.
pub fn random_decreasing_info_set<R: Rng>(rng: &mut R, n: u32) -> Vec<usize> {
    let len = 1usize << n;
    let seeds: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(0..len)).collect();
    (0..len).filter(|&j| seeds.iter().any(|&i| dominates(j, i, n))).collect()
}

/// Every lower-triangular affine permutation on `n` index bits.
pub fn all_lta(n: u32) -> Vec<AffinePerm> {
    let n = n as usize;
    let free: Vec<(usize, usize)> = (0..n).flat_map(|r| (0..r).map(move |c| (r, c))).collect();
    let mut out = Vec::new();
    for mask in 0..1u64 << free.len() {
        let a = BitMatrix::from_fn(n, n, |r, c| {
            r == c || free.iter().position(|&x| x == (r, c)).is_some_and(|k| mask >> k & 1 == 1)
        });
        for b in 0..1u64 << n {
            out.push(AffinePerm::new(a.clone(), BitVector::from_bits(&bits_of(b, n))).unwrap());
        }
    }
    out
}

/// Every permutation in `perms` maps every basis codeword of `code` into the code.
pub fn check_automorphisms(code: &PolarCodeSpec, perms: &[AffinePerm]) -> Result<(), String> {
    let len = code.len();
    let mut frozen = vec![true; len];
    for &i in code.info_set() {
        frozen[i] = false;
    }
    let basis: Vec<Vec<u8>> = code
        .info_set()
        .iter()
        .map(|&i| {
            let mut c = vec![0u8; len];
            c[i] = 1;
            polar_transform_in_place(&mut c);
            c
        })
        .collect();
    for p in perms {
        for c in &basis {
            let mut v = permute(c, p);
            polar_transform_in_place(&mut v);
            if v.iter().zip(&frozen).any(|(&b, &f)| f && b == 1) {
                return Err(format!("{:?} is not an automorphism", p.map()));
            }
        }
    }
    Ok(())
}

pub fn random_perm<R: Rng>(rng: &mut R, n: u32) -> AffinePerm {
    let kind = [PermGroupKind::Ga, PermGroupKind::Lta, PermGroupKind::Stage][rng.random_range(0..3)];
    sample_permutation(kind, n, rng)
}
