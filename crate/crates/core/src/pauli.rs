//! Pauli strings in symplectic form, GF(2) bookkeeping for stabilizer checks.
//!
//! Bit convention: qubit `q` of an `n`-qubit register is bit `n - 1 - q` of the
//! computational-basis index (qubit 0 is the most significant bit). A
//! [`BinaryVector`] therefore has integer value equal to the basis index of
//! the corresponding bitstring.

use std::fmt;

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, ComplexVector, C64, I, ONE, ZERO};

pub const MAX_QUBITS: usize = 63;
pub const MAX_GROUP_GENERATORS: usize = 20;

#[inline]
pub fn qubit_mask(n: usize, q: usize) -> u64 {
    1u64 << (n - 1 - q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryVector {
    n: usize,
    bits: u64,
}

impl BinaryVector {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} bits");
        BinaryVector { n, bits: 0 }
    }

    /// From the integer value (the basis index).
    pub fn from_value(n: usize, bits: u64) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} bits");
        let mask = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
        BinaryVector { n, bits: bits & mask }
    }

    /// Bits listed qubit 0 first.
    pub fn from_bits(bits: &[u8]) -> Self {
        let n = bits.len();
        let mut v = Self::zeros(n);
        for (q, b) in bits.iter().enumerate() {
            if *b & 1 == 1 {
                v.bits |= qubit_mask(n, q);
            }
        }
        v
    }

    pub fn from_support(n: usize, support: &[usize]) -> Self {
        let mut v = Self::zeros(n);
        for &q in support {
            assert!(q < n, "qubit {q} out of range");
            v.bits ^= qubit_mask(n, q);
        }
        v
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn value(&self) -> u64 {
        self.bits
    }

    pub fn get(&self, q: usize) -> bool {
        self.bits & qubit_mask(self.n, q) != 0
    }

    pub fn flip(&mut self, q: usize) {
        self.bits ^= qubit_mask(self.n, q);
    }

    pub fn weight(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn xor(&self, other: &BinaryVector) -> BinaryVector {
        assert_eq!(self.n, other.n);
        BinaryVector { n: self.n, bits: self.bits ^ other.bits }
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n).filter(|&q| self.get(q)).collect()
    }
}

impl fmt::Display for BinaryVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            write!(f, "{}", if self.get(q) { '1' } else { '0' })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliKind {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        assert!(n <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        PauliString { n, x: 0, z: 0 }
    }

    pub fn from_parts(x: BinaryVector, z: BinaryVector) -> Self {
        assert_eq!(x.n, z.n);
        PauliString { n: x.n, x: x.bits, z: z.bits }
    }

    pub fn single(n: usize, q: usize, kind: PauliKind) -> Self {
        let mut p = Self::identity(n);
        p.set(q, kind);
        p
    }

    fn set(&mut self, q: usize, kind: PauliKind) {
        let m = qubit_mask(self.n, q);
        self.x &= !m;
        self.z &= !m;
        match kind {
            PauliKind::X => self.x |= m,
            PauliKind::Y => {
                self.x |= m;
                self.z |= m;
            }
            PauliKind::Z => self.z |= m,
        }
    }

    /// Parses a label such as `"XIZY"`, qubit 0 first.
    pub fn parse(label: &str) -> Result<Self> {
        let n = label.chars().count();
        if n > MAX_QUBITS {
            return Err(Error::Parse(format!("Pauli label longer than {MAX_QUBITS}")));
        }
        let mut p = Self::identity(n);
        for (q, ch) in label.chars().enumerate() {
            match ch {
                'I' => {}
                'X' => p.set(q, PauliKind::X),
                'Y' => p.set(q, PauliKind::Y),
                'Z' => p.set(q, PauliKind::Z),
                _ => return Err(Error::Parse(format!("bad Pauli letter {ch:?}"))),
            }
        }
        Ok(p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_bits(&self) -> BinaryVector {
        BinaryVector { n: self.n, bits: self.x }
    }

    pub fn z_bits(&self) -> BinaryVector {
        BinaryVector { n: self.n, bits: self.z }
    }

    pub fn kind(&self, q: usize) -> Option<PauliKind> {
        let m = qubit_mask(self.n, q);
        match (self.x & m != 0, self.z & m != 0) {
            (false, false) => None,
            (true, false) => Some(PauliKind::X),
            (true, true) => Some(PauliKind::Y),
            (false, true) => Some(PauliKind::Z),
        }
    }

    pub fn weight(&self) -> usize {
        (self.x | self.z).count_ones() as usize
    }

    /// i^{#Y}: the scalar in front of X^x Z^z.
    pub fn phase(&self) -> C64 {
        match (self.x & self.z).count_ones() % 4 {
            0 => ONE,
            1 => I,
            2 => -ONE,
            _ => -I,
        }
    }

    /// Product up to global phase (symplectic sum).
    pub fn compose(&self, other: &PauliString) -> PauliString {
        assert_eq!(self.n, other.n);
        PauliString { n: self.n, x: self.x ^ other.x, z: self.z ^ other.z }
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 0
    }

    /// Dense 2^n x 2^n matrix.
    pub fn matrix(&self) -> ComplexMatrix {
        let d = 1usize << self.n;
        let mut m = ComplexMatrix::zeros(d, d);
        let ph = self.phase();
        for b in 0..d as u64 {
            let sign = if (b & self.z).count_ones() % 2 == 1 { -ONE } else { ONE };
            m[((b ^ self.x) as usize, b as usize)] = ph * sign;
        }
        m
    }

    /// Matrix element `(P)_{b xor x, b}` for basis index `b`.
    #[inline]
    pub fn column_entry(&self, b: u64) -> (u64, C64) {
        let sign = if (b & self.z).count_ones() % 2 == 1 { -ONE } else { ONE };
        (b ^ self.x, self.phase() * sign)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n {
            let ch = match self.kind(q) {
                None => 'I',
                Some(PauliKind::X) => 'X',
                Some(PauliKind::Y) => 'Y',
                Some(PauliKind::Z) => 'Z',
            };
            write!(f, "{ch}")?;
        }
        Ok(())
    }
}

pub fn support(p: &PauliString) -> Vec<usize> {
    (0..p.n).filter(|&q| p.kind(q).is_some()).collect()
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// |P_r| = sum_{k <= r} C(n, k) 3^k.
pub fn pauli_count(n: usize, r: usize) -> u128 {
    (0..=r.min(n)).map(|k| binomial(n, k) * 3u128.pow(k as u32)).sum()
}

/// All Pauli strings of weight at most `r`: ordered by weight, then by
/// ascending support, then by letters X < Y < Z with the lowest qubit slowest.
pub fn enumerate_paulis(n: usize, r: usize) -> Result<Vec<PauliString>> {
    if r > n {
        return Err(Error::RadiusExceedsN { r, n });
    }
    let mut out = Vec::with_capacity(pauli_count(n, r) as usize);
    const KINDS: [PauliKind; 3] = [PauliKind::X, PauliKind::Y, PauliKind::Z];
    for k in 0..=r {
        let mut comb: Vec<usize> = (0..k).collect();
        loop {
            let total = 3usize.pow(k as u32);
            for code in 0..total {
                let mut p = PauliString::identity(n);
                let mut c = code;
                for idx in (0..k).rev() {
                    p.set(comb[idx], KINDS[c % 3]);
                    c /= 3;
                }
                out.push(p);
            }
            if !next_combination(&mut comb, n) {
                break;
            }
        }
    }
    Ok(out)
}

fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Applies `P` to a state vector: X flips a bit, Z contributes (-1)^bit, Y = iXZ.
pub fn apply_pauli(p: &PauliString, v: &ComplexVector) -> Result<ComplexVector> {
    let d = 1usize << p.n;
    if v.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: v.len() });
    }
    let mut out = ComplexVector::from_element(d, ZERO);
    for b in 0..d as u64 {
        let (t, amp) = p.column_entry(b);
        out[t as usize] = amp * v[b as usize];
    }
    Ok(out)
}

/// Applies `P` to every column of `m`.
pub fn apply_pauli_columns(p: &PauliString, m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let d = 1usize << p.n;
    if m.nrows() != d {
        return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
    }
    let mut out = ComplexMatrix::zeros(d, m.ncols());
    for b in 0..d as u64 {
        let (t, amp) = p.column_entry(b);
        for j in 0..m.ncols() {
            out[(t as usize, j)] = amp * m[(b as usize, j)];
        }
    }
    Ok(out)
}

// ---- GF(2) linear algebra on u64 rows ----

/// Reduced row-echelon basis; pivot of each row is its highest set bit, rows
/// sorted by descending pivot.
pub fn gf2_echelon(rows: &[u64]) -> Vec<u64> {
    let mut basis: Vec<u64> = Vec::new();
    for &r0 in rows {
        let mut r = r0;
        for b in &basis {
            let piv = 63 - b.leading_zeros();
            if r >> piv & 1 == 1 {
                r ^= b;
            }
        }
        if r == 0 {
            continue;
        }
        let piv = 63 - r.leading_zeros();
        for b in basis.iter_mut() {
            if *b >> piv & 1 == 1 {
                *b ^= r;
            }
        }
        basis.push(r);
        basis.sort_unstable_by_key(|b| b.leading_zeros());
    }
    basis
}

pub fn gf2_rank(rows: &[u64]) -> usize {
    gf2_echelon(rows).len()
}

/// Canonical coset representative of `v` modulo the span of an echelon basis.
pub fn gf2_reduce(v: u64, echelon: &[u64]) -> u64 {
    let mut r = v;
    for b in echelon {
        let piv = 63 - b.leading_zeros();
        if r >> piv & 1 == 1 {
            r ^= b;
        }
    }
    r
}

/// Basis of `{z : popcount(row & z) even for all rows}` in `n` bits.
pub fn gf2_kernel(rows: &[u64], n: usize) -> Vec<u64> {
    let ech = gf2_echelon(rows);
    let pivots: Vec<u32> = ech.iter().map(|b| 63 - b.leading_zeros()).collect();
    let mut out = Vec::new();
    for free in 0..n as u32 {
        if pivots.contains(&free) {
            continue;
        }
        // set the free bit, solve pivot bits from each echelon row
        let mut z = 1u64 << free;
        for (b, &piv) in ech.iter().zip(&pivots) {
            if b >> free & 1 == 1 {
                z |= 1u64 << piv;
            }
        }
        out.push(z);
    }
    out
}

/// A group of commuting same-type checks, stored as independent supports.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizerGroup {
    n: usize,
    generators: Vec<BinaryVector>,
}

impl StabilizerGroup {
    /// Rejects linearly dependent generators.
    pub fn new(n: usize, generators: Vec<BinaryVector>) -> Result<Self> {
        for g in &generators {
            if g.n != n {
                return Err(Error::DimensionMismatch { expected: n, got: g.n });
            }
        }
        let raw: Vec<u64> = generators.iter().map(|g| g.bits).collect();
        if gf2_rank(&raw) != generators.len() {
            return Err(Error::DependentGenerators);
        }
        Ok(StabilizerGroup { n, generators })
    }

    /// Keeps an independent subset (first occurrences win).
    pub fn from_spanning(n: usize, vectors: &[BinaryVector]) -> Self {
        let mut kept: Vec<BinaryVector> = Vec::new();
        let mut ech: Vec<u64> = Vec::new();
        for v in vectors {
            if gf2_reduce(v.bits, &ech) != 0 {
                kept.push(*v);
                let mut rows = ech.clone();
                rows.push(v.bits);
                ech = gf2_echelon(&rows);
            }
        }
        StabilizerGroup { n, generators: kept }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[BinaryVector] {
        &self.generators
    }
}

/// Minimum Hamming weight over the coset `v + span(G)`.
pub fn reduced_weight(v: &BinaryVector, g: &StabilizerGroup) -> Result<usize> {
    let k = g.generators.len();
    if k > MAX_GROUP_GENERATORS {
        return Err(Error::GroupTooLarge(k));
    }
    if v.n != g.n {
        return Err(Error::DimensionMismatch { expected: g.n, got: v.n });
    }
    let mut cur = v.bits;
    let mut best = cur.count_ones();
    for i in 1u64..(1u64 << k) {
        // Gray code: toggle generator at the lowest set bit of i
        cur ^= g.generators[i.trailing_zeros() as usize].bits;
        best = best.min(cur.count_ones());
    }
    Ok(best as usize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn steane_supports() -> Vec<Vec<usize>> {
        vec![vec![3, 4, 5, 6], vec![1, 2, 5, 6], vec![0, 2, 4, 6]]
    }

    #[test]
    fn support_examples() {
        assert!(support(&PauliString::identity(4)).is_empty());
        assert_eq!(support(&PauliString::single(4, 2, PauliKind::X)), vec![2]);
        let p = PauliString::parse("YIIZ").unwrap();
        assert_eq!(support(&p), vec![0, 3]);
        assert!(p.x_bits().get(0) && p.z_bits().get(0));
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_paulis(2, 0).unwrap().len(), 1);
        assert_eq!(enumerate_paulis(2, 1).unwrap().len(), 7);
        assert_eq!(enumerate_paulis(3, 2).unwrap().len(), 37);
        assert_eq!(enumerate_paulis(3, 3).unwrap().len(), 64);
        assert_eq!(enumerate_paulis(2, 3), Err(Error::RadiusExceedsN { r: 3, n: 2 }));
    }

    #[test]
    fn enumeration_matches_brute_force_set() {
        // oracle: filter all 4^n strings by weight
        let n = 3;
        let got = enumerate_paulis(n, 2).unwrap();
        let mut brute = Vec::new();
        for x in 0..8u64 {
            for z in 0..8u64 {
                let p = PauliString { n, x, z };
                if p.weight() <= 2 {
                    brute.push(p);
                }
            }
        }
        assert_eq!(got.len(), brute.len());
        for p in &brute {
            assert!(got.contains(p));
        }
        assert_eq!(got[0], PauliString::identity(n));
        assert_eq!(got[1].to_string(), "XII");
        assert_eq!(got[2].to_string(), "YII");
        assert_eq!(got[4].to_string(), "IXI");
        assert_eq!(got[10].to_string(), "XXI");
    }

    #[test]
    fn apply_examples() {
        let e = |d: usize, i: usize| {
            let mut v = ComplexVector::from_element(d, ZERO);
            v[i] = ONE;
            v
        };
        let x0 = PauliString::single(2, 0, PauliKind::X);
        assert_eq!(apply_pauli(&x0, &e(4, 0)).unwrap(), e(4, 2));
        let z0 = PauliString::single(2, 0, PauliKind::Z);
        assert_eq!(apply_pauli(&z0, &e(4, 2)).unwrap(), -e(4, 2));
        let y0 = PauliString::single(1, 0, PauliKind::Y);
        assert_eq!(apply_pauli(&y0, &e(2, 0)).unwrap(), e(2, 1) * I);
        assert!(apply_pauli(&y0, &e(4, 0)).is_err());
    }

    #[test]
    fn matrix_matches_kronecker_products() {
        let x = ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let y = ComplexMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]);
        let z = ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
        let p = PauliString::parse("XYZ").unwrap();
        let k = x.kronecker(&y).kronecker(&z);
        assert!((p.matrix() - k).norm() < 1e-15);
    }

    #[test]
    fn reduced_weight_examples() {
        let gens: Vec<BinaryVector> = steane_supports().iter().map(|s| BinaryVector::from_support(7, s)).collect();
        let g = StabilizerGroup::new(7, gens.clone()).unwrap();
        assert_eq!(reduced_weight(&gens[1], &g).unwrap(), 0);
        assert_eq!(reduced_weight(&BinaryVector::zeros(7), &g).unwrap(), 0);
        let e1 = BinaryVector::from_support(7, &[1]);
        // oracle: all 8 coset elements
        let mut best = usize::MAX;
        for mask in 0..8u32 {
            let mut v = e1;
            for (i, gv) in gens.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    v = v.xor(gv);
                }
            }
            best = best.min(v.weight());
        }
        assert_eq!(best, 1);
        assert_eq!(reduced_weight(&e1, &g).unwrap(), 1);
    }

    #[test]
    fn reduced_weight_caps_group() {
        let n = 21;
        let gens: Vec<BinaryVector> = (0..21).map(|q| BinaryVector::from_support(n, &[q])).collect();
        let g = StabilizerGroup::new(n, gens).unwrap();
        assert_eq!(reduced_weight(&BinaryVector::zeros(n), &g), Err(Error::GroupTooLarge(21)));
    }

    #[test]
    fn dependent_generators_rejected() {
        let a = BinaryVector::from_support(3, &[0, 1]);
        let b = BinaryVector::from_support(3, &[1, 2]);
        let c = a.xor(&b);
        assert_eq!(StabilizerGroup::new(3, vec![a, b, c]), Err(Error::DependentGenerators));
        assert_eq!(StabilizerGroup::from_spanning(3, &[a, b, c]).generators().len(), 2);
    }

    #[test]
    fn kernel_is_orthogonal_complement() {
        let rows: Vec<u64> = steane_supports().iter().map(|s| BinaryVector::from_support(7, s).value()).collect();
        let ker = gf2_kernel(&rows, 7);
        assert_eq!(ker.len(), 4);
        assert_eq!(gf2_rank(&ker), 4);
        for k in &ker {
            for r in &rows {
                assert_eq!((k & r).count_ones() % 2, 0);
            }
        }
    }

    proptest! {
        #[test]
        fn pauli_squared_is_scalar(n in 1usize..5, x in any::<u64>(), z in any::<u64>(), seed in any::<u64>()) {
            let mask = (1u64 << n) - 1;
            let p = PauliString { n, x: x & mask, z: z & mask };
            let d = 1usize << n;
            let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
            let v = crate::numerics::testutil::gaussian(&mut rng, d, 1).column(0).into_owned();
            let pv = apply_pauli(&p, &v).unwrap();
            prop_assert!((pv.norm() - v.norm()).abs() < 1e-12);
            let ppv = apply_pauli(&p, &pv).unwrap();
            prop_assert!((v.dotc(&ppv).norm() - v.norm_squared()).abs() < 1e-10);
        }

        #[test]
        fn full_enumeration_has_4_pow_n(n in 0usize..5) {
            prop_assert_eq!(enumerate_paulis(n, n).unwrap().len(), 1usize << (2 * n));
        }

        #[test]
        fn reduced_weight_bounded_by_weight(v in 0u64..128, pick in 0u8..8) {
            let all: Vec<BinaryVector> = steane_supports().iter().map(|s| BinaryVector::from_support(7, s)).collect();
            let gens: Vec<BinaryVector> = all.iter().enumerate().filter(|(i, _)| pick >> i & 1 == 1).map(|(_, g)| *g).collect();
            let g = StabilizerGroup::new(7, gens.clone()).unwrap();
            let bv = BinaryVector::from_value(7, v);
            let rw = reduced_weight(&bv, &g).unwrap();
            prop_assert!(rw <= bv.weight());
            // brute-force oracle over the coset
            let mut best = bv.weight();
            for m in 0..(1u32 << gens.len()) {
                let mut w = bv;
                for (i, gv) in gens.iter().enumerate() {
                    if m >> i & 1 == 1 { w = w.xor(gv); }
                }
                best = best.min(w.weight());
            }
            prop_assert_eq!(rw, best);
        }
    }
}
