//! Polar code and polar subcode construction.
//!
//! A polar subcode is the set `{ v·G_N : V·vᵀ = 0 }` where `G_N` is the
//! `n`-fold Kronecker power of `[1 0; 1 1]` (natural index order, no bit
//! reversal) and `V` is the dynamic freezing constraint matrix. CRC-aided
//! polar codes are built by embedding the CRC parity-check equations into `V`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use crate::error::Error;
use crate::gf2::{BitMatrix, BitVector};

/// Generator `G_N = [1 0; 1 1]^{⊗n}`. Entry `(i, j)` is one iff the bits of
/// `j` are a subset of the bits of `i`.
pub fn polar_transform_matrix(n: u32) -> BitMatrix {
    let len = 1usize << n;
    BitMatrix::from_fn(len, len, |i, j| i & j == j)
}

/// In-place `x ← x·G_N` on a slice of `0`/`1` bytes (length must be a power of two).
pub fn polar_transform_in_place(bits: &mut [u8]) {
    let len = bits.len();
    debug_assert!(len.is_power_of_two());
    let mut half = 1;
    while half < len {
        for block in (0..len).step_by(2 * half) {
            for j in block..block + half {
                bits[j] ^= bits[j + half];
            }
        }
        half *= 2;
    }
}

pub fn polar_transform(v: &BitVector) -> BitVector {
    let mut bits = v.to_bits();
    polar_transform_in_place(&mut bits);
    BitVector::from_bits(&bits)
}

/// Mother polar code: block length `2^n` and its information set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolarCodeSpec {
    n: u32,
    info_set: Vec<usize>,
}

impl PolarCodeSpec {
    pub fn new(n: u32, mut info_set: Vec<usize>) -> Result<Self, Error> {
        let len = 1usize << n;
        info_set.sort_unstable();
        if info_set.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate index in information set".into()));
        }
        if let Some(&bad) = info_set.iter().find(|&&i| i >= len) {
            return Err(Error::InvalidArgument(format!(
                "information index {bad} out of range for N = {len}"
            )));
        }
        Ok(Self { n, info_set })
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

    pub fn info_set(&self) -> &[usize] {
        &self.info_set
    }

    pub fn frozen_set(&self) -> Vec<usize> {
        let mut is_info = vec![false; self.len()];
        for &i in &self.info_set {
            is_info[i] = true;
        }
        (0..self.len()).filter(|&i| !is_info[i]).collect()
    }
}

/// Where an information set comes from.
#[derive(Clone, Copy, Debug)]
pub enum InfoSetSource<'a> {
    /// Text file with the ascending information indices, whitespace separated.
    File(&'a Path),
    /// The same format, already in memory.
    Text(&'a str),
    /// The most reliable indices of the shipped 5G NR reliability sequence.
    Nr5g,
}

/// The 5G NR polar reliability sequence (TS 38.212 Table 5.3.1.2-1), least
/// reliable first, for the maximum mother length 1024.
pub fn nr5g_reliability() -> &'static [u16] {
    static SEQ: OnceLock<Vec<u16>> = OnceLock::new();
    SEQ.get_or_init(|| {
        include_str!("../data/nr5g_reliability.txt")
            .split_whitespace()
            .map(|t| t.parse().expect("shipped reliability sequence is numeric"))
            .collect()
    })
}

/// Loads an information set of `size` indices for block length `len`.
///
/// For file and text sources `size` is optional and, when given, must match
/// the number of indices read.
pub fn load_info_set(
    source: InfoSetSource<'_>,
    len: usize,
    size: Option<usize>,
) -> Result<PolarCodeSpec, Error> {
    if !len.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("block length {len} is not a power of two")));
    }
    let n = len.trailing_zeros();
    if let Some(size) = size {
        if size > len {
            return Err(Error::InvalidArgument(format!(
                "information set size {size} exceeds N = {len}"
            )));
        }
    }
    let parse = |text: &str| -> Result<PolarCodeSpec, Error> {
        let indices = text
            .split_whitespace()
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("not an index: {t:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse("information indices must be strictly ascending".into()));
        }
        if let Some(size) = size {
            if size != indices.len() {
                return Err(Error::Parse(format!(
                    "expected {size} information indices, found {}",
                    indices.len()
                )));
            }
        }
        PolarCodeSpec::new(n, indices).map_err(|e| Error::Parse(e.to_string()))
    };
    match source {
        InfoSetSource::File(path) => parse(&std::fs::read_to_string(path)?),
        InfoSetSource::Text(text) => parse(text),
        InfoSetSource::Nr5g => {
            let size = size.ok_or_else(|| {
                Error::InvalidArgument("builtin information set needs a size".into())
            })?;
            if len > 1024 {
                return Err(Error::InvalidArgument(
                    "5G reliability sequence covers N <= 1024".into(),
                ));
            }
            let restricted: Vec<usize> = nr5g_reliability()
                .iter()
                .map(|&i| i as usize)
                .filter(|&i| i < len)
                .collect();
            PolarCodeSpec::new(n, restricted[len - size..].to_vec())
        }
    }
}

/// CRC generator polynomial of degree `degree`.
///
/// `mask` holds the non-leading coefficients LSB first: bit `t` is the
/// coefficient of `x^t`. The leading `x^degree` term is implicit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CrcSpec {
    degree: u32,
    mask: u64,
}

impl CrcSpec {
    pub fn new(degree: u32, mask: u64) -> Result<Self, Error> {
        if degree > 63 {
            return Err(Error::InvalidArgument(format!("CRC degree {degree} exceeds 63")));
        }
        if mask >> degree != 0 {
            return Err(Error::InvalidArgument(format!(
                "mask {mask:#x} has terms at or above x^{degree}"
            )));
        }
        Ok(Self { degree, mask })
    }

    /// No outer code.
    pub fn none() -> Self {
        Self { degree: 0, mask: 0 }
    }

    /// `g(x) = x^3 + x + 1`
    pub fn crc3() -> Self {
        Self { degree: 3, mask: 0b011 }
    }

    /// `g(x) = x^8 + x^5 + x^4 + x^3 + 1` (mask `8:0x39`)
    pub fn crc8() -> Self {
        Self { degree: 8, mask: 0x39 }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    /// Parity bits `m(x)·x^r mod g(x)`, highest power first.
    ///
    /// The first message bit is the coefficient of the highest power of `m(x)`.
    pub fn remainder(&self, message: &[u8]) -> Vec<u8> {
        let r = self.degree;
        if r == 0 {
            return Vec::new();
        }
        let top = 1u64 << (r - 1);
        let keep = if r == 64 { u64::MAX } else { (1u64 << r) - 1 };
        let mut reg = 0u64;
        for &b in message {
            let feedback = (b & 1 == 1) ^ (reg & top != 0);
            reg = (reg << 1) & keep;
            if feedback {
                reg ^= self.mask;
            }
        }
        (0..r).rev().map(|t| ((reg >> t) & 1) as u8).collect()
    }
}

impl fmt::Display for CrcSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.degree == 0 {
            return f.write_str("none");
        }
        let mut terms = vec![format!("x^{}", self.degree)];
        for t in (0..self.degree).rev() {
            if (self.mask >> t) & 1 == 1 {
                terms.push(match t {
                    0 => "1".to_string(),
                    1 => "x".to_string(),
                    _ => format!("x^{t}"),
                });
            }
        }
        f.write_str(&terms.join(" + "))
    }
}

impl FromStr for CrcSpec {
    type Err = Error;

    /// Accepts `none`, `DEGREE:0xMASK` (e.g. `8:0x39`), or a polynomial such
    /// as `x^8+x^5+x^4+x^3+1`.
    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        let bad = |why: &str| Error::Parse(format!("bad CRC polynomial {s:?}: {why}"));
        if s.eq_ignore_ascii_case("none") {
            return Ok(Self::none());
        }
        if let Some((deg, mask)) = s.split_once(':') {
            let degree: u32 = deg.trim().parse().map_err(|_| bad("degree is not a number"))?;
            let mask = mask.trim();
            let hex = mask
                .strip_prefix("0x")
                .or_else(|| mask.strip_prefix("0X"))
                .ok_or_else(|| bad("mask must be hexadecimal with a 0x prefix"))?;
            let mask = u64::from_str_radix(hex, 16).map_err(|_| bad("mask is not hexadecimal"))?;
            return Self::new(degree, mask).map_err(|e| bad(&e.to_string()));
        }
        let mut coeffs = 0u128;
        for term in s.split('+') {
            let term = term.trim();
            let power = match term {
                "1" => 0,
                "x" => 1,
                _ => term
                    .strip_prefix("x^")
                    .and_then(|p| p.parse::<u32>().ok())
                    .ok_or_else(|| bad("expected terms like x^k, x or 1"))?,
            };
            if power > 64 {
                return Err(bad("degree too large"));
            }
            if coeffs >> power & 1 == 1 {
                return Err(bad("repeated term"));
            }
            coeffs |= 1 << power;
        }
        if coeffs == 0 {
            return Err(bad("empty polynomial"));
        }
        let degree = 127 - coeffs.leading_zeros();
        if degree == 0 {
            return Err(bad("constant polynomial"));
        }
        Self::new(degree, (coeffs & ((1u128 << degree) - 1)) as u64)
            .map_err(|e| bad(&e.to_string()))
    }
}

/// Dynamic freezing constraint matrix of a polar code concatenated with a CRC.
///
/// One weight-one row per frozen index, plus one row per CRC parity bit. The
/// CRC code of length `|𝒜|` is embedded into the information positions in
/// ascending order: message bits first, parity bits on the `r` highest
/// positions. Rows are sorted by their rightmost one.
pub fn build_constraint_matrix(code: &PolarCodeSpec, crc: &CrcSpec) -> Result<BitMatrix, Error> {
    let info = code.info_set();
    let r = crc.degree() as usize;
    if r > 0 && info.len() <= r {
        return Err(Error::InvalidArgument(format!(
            "{} information positions cannot hold a degree-{r} CRC",
            info.len()
        )));
    }
    let len = code.len();
    let k = info.len() - r;
    let mut rows: Vec<(usize, BitVector)> = Vec::with_capacity(len - k);
    for f in code.frozen_set() {
        let mut row = BitVector::zeros(len);
        row.set(f, true);
        rows.push((f, row));
    }
    if r > 0 {
        // Parity bit t depends linearly on the message; column i of that map
        // is the remainder of the i-th unit message.
        let mut parity_rows: Vec<BitVector> = info[k..]
            .iter()
            .map(|&p| {
                let mut row = BitVector::zeros(len);
                row.set(p, true);
                row
            })
            .collect();
        let mut unit = vec![0u8; k];
        for i in 0..k {
            unit[i] = 1;
            for (t, bit) in crc.remainder(&unit).into_iter().enumerate() {
                if bit == 1 {
                    parity_rows[t].set(info[i], true);
                }
            }
            unit[i] = 0;
        }
        rows.extend(info[k..].iter().copied().zip(parity_rows));
    }
    rows.sort_by_key(|(end, _)| *end);
    let rows: Vec<BitVector> = rows.into_iter().map(|(_, r)| r).collect();
    BitMatrix::from_row_vectors(len, &rows)
}

/// A dynamic frozen bit: `v[index]` equals the XOR of `v` over `support`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynamicFrozen {
    pub index: usize,
    /// Ascending, all smaller than `index`.
    pub support: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PositionKind {
    Free,
    Frozen,
    /// Index into [`SubcodeSpec::dynamic`].
    Dynamic(usize),
}

/// Canonical description of a polar subcode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubcodeSpec {
    n: u32,
    constraints: BitMatrix,
    hard_frozen: Vec<usize>,
    dynamic: Vec<DynamicFrozen>,
    free: Vec<usize>,
    kinds: Vec<PositionKind>,
}

impl SubcodeSpec {
    /// Canonicalizes `v` and classifies each row as hard or dynamic frozen.
    pub fn from_constraints(v: &BitMatrix) -> Result<Self, Error> {
        let len = v.cols();
        if !len.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "block length {len} is not a power of two"
            )));
        }
        let constraints = v.canonicalize_rightmost()?;
        let mut kinds = vec![PositionKind::Free; len];
        let mut hard_frozen = Vec::new();
        let mut dynamic = Vec::new();
        for row in 0..constraints.rows() {
            let mut ones = constraints.row_ones(row);
            let index = ones.pop().expect("canonical rows are non-zero");
            if ones.is_empty() {
                kinds[index] = PositionKind::Frozen;
                hard_frozen.push(index);
            } else {
                kinds[index] = PositionKind::Dynamic(dynamic.len());
                dynamic.push(DynamicFrozen { index, support: ones });
            }
        }
        let free = (0..len).filter(|&i| kinds[i] == PositionKind::Free).collect();
        Ok(Self {
            n: len.trailing_zeros(),
            constraints,
            hard_frozen,
            dynamic,
            free,
            kinds,
        })
    }

    /// CRC-aided polar code as a polar subcode.
    pub fn crc_aided(code: &PolarCodeSpec, crc: &CrcSpec) -> Result<Self, Error> {
        Self::from_constraints(&build_constraint_matrix(code, crc)?)
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

    /// Number of message bits.
    pub fn k(&self) -> usize {
        self.free.len()
    }

    /// Canonical constraint matrix `V`.
    pub fn constraints(&self) -> &BitMatrix {
        &self.constraints
    }

    pub fn hard_frozen(&self) -> &[usize] {
        &self.hard_frozen
    }

    pub fn dynamic(&self) -> &[DynamicFrozen] {
        &self.dynamic
    }

    /// Positions carrying message bits, ascending.
    pub fn free_positions(&self) -> &[usize] {
        &self.free
    }

    pub fn kind(&self, index: usize) -> PositionKind {
        self.kinds[index]
    }

    pub fn is_hard_frozen(&self, index: usize) -> bool {
        self.kinds[index] == PositionKind::Frozen
    }

    /// Fills `v` from message bits and the constraints, then returns `(v, c = v·G_N)`.
    pub fn encode(&self, message: &BitVector) -> Result<(BitVector, BitVector), Error> {
        if message.len() != self.k() {
            return Err(Error::DimensionMismatch(format!(
                "message has {} bits, code dimension is {}",
                message.len(),
                self.k()
            )));
        }
        let (v, c) = self.encode_bits(&message.to_bits());
        Ok((BitVector::from_bits(&v), BitVector::from_bits(&c)))
    }

    /// Byte-per-bit variant of [`encode`](Self::encode). Panics on a length mismatch.
    pub fn encode_bits(&self, message: &[u8]) -> (Vec<u8>, Vec<u8>) {
        assert_eq!(message.len(), self.k(), "message length mismatch");
        let mut v = vec![0u8; self.len()];
        for (&pos, &bit) in self.free.iter().zip(message) {
            v[pos] = bit & 1;
        }
        self.fill_dynamic(&mut v);
        let mut c = v.clone();
        polar_transform_in_place(&mut c);
        (v, c)
    }

    /// Recomputes every dynamic frozen bit of `v` in ascending index order.
    pub(crate) fn fill_dynamic(&self, v: &mut [u8]) {
        // Dynamic rows are sorted by index and supports only look backwards.
        for d in &self.dynamic {
            v[d.index] = d.support.iter().fold(0, |acc, &s| acc ^ v[s]);
        }
    }

    /// True iff `V·vᵀ = 0` for the given input vector `v`.
    pub fn satisfies_constraints(&self, v: &[u8]) -> bool {
        self.hard_frozen.iter().all(|&i| v[i] == 0)
            && self
                .dynamic
                .iter()
                .all(|d| d.support.iter().fold(v[d.index], |acc, &s| acc ^ v[s]) == 0)
    }

    /// True iff `c` is a codeword, i.e. `V·G_Nᵀ·cᵀ = 0`.
    pub fn is_codeword(&self, c: &BitVector) -> bool {
        c.len() == self.len() && self.is_codeword_bits(&c.to_bits())
    }

    pub fn is_codeword_bits(&self, c: &[u8]) -> bool {
        let mut v = c.to_vec();
        polar_transform_in_place(&mut v);
        self.satisfies_constraints(&v)
    }

    /// Message bits carried by a codeword (no validity check).
    pub fn message_of(&self, c: &[u8]) -> Vec<u8> {
        let mut v = c.to_vec();
        polar_transform_in_place(&mut v);
        self.free.iter().map(|&i| v[i]).collect()
    }
}
