//! Subspaces of the n-qubit Hilbert space, Pauli neighborhoods and boundaries.
//!
//! A subspace spanned by eigenstates of a stabilizer frame carries its member
//! labels alongside the dense basis. Neighborhoods of such subspaces are then
//! computed exactly on labels: a weight-r Pauli maps frame states to frame
//! states, and B_r = B_1 applied r times. Other subspaces go through the
//! generic span-and-orthonormalize route.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::numerics::{c, cr, orthonormalize_matrix, ComplexMatrix, ComplexVector, Tolerance, ONE, ZERO};
use crate::pauli::{apply_pauli_columns, enumerate_paulis, gf2_echelon, gf2_reduce, pauli_count, BinaryVector, PauliString};

/// Default neighborhood enumeration cap: |P_r| * k * 2^n scalar entries.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 28;

/// Orthonormal eigenbasis of a set of commuting X-type checks, labelled by
/// `(x mod rowspan(H_X), syndrome of z)`.
///
/// The frame state for label `(x, s)` is `X^x Z^{z(s)} psi0` with `psi0` the
/// uniform superposition over the X-stabilizer group applied to `|0...0>`.
/// Without X checks this is the computational basis and label index equals
/// basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeFrame {
    n: usize,
    x_generators: Vec<u64>,
    x_echelon: Vec<u64>,
    // one z with each syndrome, indexed by syndrome value
    z_of_syndrome: Vec<u64>,
    labels: Vec<(u64, u64)>,
    index: HashMap<(u64, u64), usize>,
}

impl CodeFrame {
    pub fn computational(n: usize) -> Self {
        Self::css(n, &[])
    }

    /// Frame for the given X-check supports (dependent checks are dropped).
    pub fn css(n: usize, x_checks: &[BinaryVector]) -> Self {
        let mut gens: Vec<u64> = Vec::new();
        let mut ech: Vec<u64> = Vec::new();
        for v in x_checks {
            if gf2_reduce(v.value(), &ech) != 0 {
                gens.push(v.value());
                let mut rows = ech.clone();
                rows.push(v.value());
                ech = gf2_echelon(&rows);
            }
        }
        let m = gens.len();
        let d = 1u64 << n;
        let mut z_of = vec![u64::MAX; 1 << m];
        for z in 0..d {
            let s = syndrome_of(&gens, z);
            if z_of[s as usize] == u64::MAX {
                z_of[s as usize] = z;
            }
        }
        let mut labels = Vec::with_capacity(d as usize);
        for x in 0..d {
            if gf2_reduce(x, &ech) == x {
                for s in 0..(1u64 << m) {
                    labels.push((x, s));
                }
            }
        }
        let index = labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        CodeFrame { n, x_generators: gens, x_echelon: ech, z_of_syndrome: z_of, labels, index }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn is_computational(&self) -> bool {
        self.x_generators.is_empty()
    }

    pub fn x_generators(&self) -> &[u64] {
        &self.x_generators
    }

    pub fn label(&self, idx: usize) -> (u64, u64) {
        self.labels[idx]
    }

    /// Label index of `X^x Z^z psi0` (up to phase).
    pub fn index_of(&self, x: u64, z: u64) -> usize {
        let key = (gf2_reduce(x, &self.x_echelon), syndrome_of(&self.x_generators, z));
        self.index[&key]
    }

    /// Representative z for a label's syndrome.
    pub fn z_rep(&self, idx: usize) -> u64 {
        self.z_of_syndrome[self.labels[idx].1 as usize]
    }

    /// Label reached by applying `p` to the frame state `idx`.
    pub fn apply(&self, idx: usize, p: &PauliString) -> usize {
        let (x, s) = self.labels[idx];
        let z = self.z_of_syndrome[s as usize];
        self.index_of(x ^ p.x_bits().value(), z ^ p.z_bits().value())
    }

    /// Dense frame state.
    pub fn state(&self, idx: usize) -> ComplexVector {
        let d = 1usize << self.n;
        let mut v = ComplexVector::from_element(d, ZERO);
        let (x, s) = self.labels[idx];
        let z = self.z_of_syndrome[s as usize];
        let m = self.x_generators.len();
        let amp = 1.0 / ((1u64 << m) as f64).sqrt();
        let mut g = 0u64;
        for i in 0u64..(1u64 << m) {
            if i > 0 {
                g ^= self.x_generators[i.trailing_zeros() as usize];
            }
            let sign = if (g & z).count_ones() % 2 == 1 { -amp } else { amp };
            v[(g ^ x) as usize] = cr(sign);
        }
        v
    }

    /// Columns are the frame states in label order.
    pub fn unitary(&self) -> ComplexMatrix {
        let d = self.dim();
        if self.is_computational() {
            return ComplexMatrix::identity(d, d);
        }
        let mut u = ComplexMatrix::zeros(d, d);
        for k in 0..d {
            u.set_column(k, &self.state(k));
        }
        u
    }
}

fn syndrome_of(gens: &[u64], z: u64) -> u64 {
    let mut s = 0u64;
    for (k, g) in gens.iter().enumerate() {
        if (g & z).count_ones() % 2 == 1 {
            s |= 1 << k;
        }
    }
    s
}

/// Member labels of a frame-spanned subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    pub frame: Arc<CodeFrame>,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    n: usize,
    basis: ComplexMatrix,
    label: String,
    frame: Option<FrameSet>,
}

impl Subspace {
    /// Validates orthonormal columns within 1e-9.
    pub fn from_basis(n: usize, basis: ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        let d = 1usize << n;
        if basis.nrows() != d {
            return Err(Error::DimensionMismatch { expected: d, got: basis.nrows() });
        }
        if basis.ncols() > d {
            return Err(Error::DimensionMismatch { expected: d, got: basis.ncols() });
        }
        let k = basis.ncols();
        let dev = (basis.adjoint() * &basis - ComplexMatrix::identity(k, k)).camax();
        if dev > 1e-9 {
            return Err(Error::NotOrthogonal(dev));
        }
        Ok(Subspace { n, basis, label: label.into(), frame: None })
    }

    /// Span of arbitrary vectors.
    pub fn span(n: usize, vectors: &[ComplexVector], label: impl Into<String>, tol: Tolerance) -> Result<Self> {
        let b = crate::numerics::orthonormal_column_basis(vectors, tol)?;
        Subspace::from_basis(n, b, label)
    }

    pub fn from_frame(frame: Arc<CodeFrame>, members: impl IntoIterator<Item = usize>, label: impl Into<String>) -> Self {
        let set: BTreeSet<usize> = members.into_iter().collect();
        let members: Vec<usize> = set.into_iter().collect();
        let n = frame.n;
        let d = 1usize << n;
        let mut basis = ComplexMatrix::zeros(d, members.len());
        for (k, &m) in members.iter().enumerate() {
            if frame.is_computational() {
                basis[(m, k)] = ONE;
            } else {
                basis.set_column(k, &frame.state(m));
            }
        }
        Subspace { n, basis, label: label.into(), frame: Some(FrameSet { frame, members }) }
    }

    /// Span of computational basis states.
    pub fn computational(n: usize, indices: impl IntoIterator<Item = usize>, label: impl Into<String>) -> Self {
        Self::from_frame(Arc::new(CodeFrame::computational(n)), indices, label)
    }

    pub fn full(n: usize) -> Self {
        Self::computational(n, 0..(1usize << n), "full")
    }

    pub fn empty(n: usize) -> Self {
        Self::computational(n, std::iter::empty(), "empty")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        1usize << self.n
    }

    pub fn is_empty(&self) -> bool {
        self.dim() == 0
    }

    pub fn basis(&self) -> &ComplexMatrix {
        &self.basis
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn frame(&self) -> Option<&FrameSet> {
        self.frame.as_ref()
    }

    /// Drops frame labels, forcing generic code paths.
    pub fn without_frame(&self) -> Self {
        Subspace { n: self.n, basis: self.basis.clone(), label: self.label.clone(), frame: None }
    }

    /// Basis indices when the subspace is spanned by computational states.
    pub fn computational_members(&self) -> Option<&[usize]> {
        match &self.frame {
            Some(fs) if fs.frame.is_computational() => Some(&fs.members),
            _ => None,
        }
    }

    /// `P_V M`.
    pub fn project_left(&self, m: &ComplexMatrix) -> ComplexMatrix {
        if let Some(idx) = self.computational_members() {
            let mut out = ComplexMatrix::zeros(m.nrows(), m.ncols());
            for &i in idx {
                out.set_row(i, &m.row(i));
            }
            return out;
        }
        &self.basis * (self.basis.adjoint() * m)
    }

    /// `M P_V`.
    pub fn project_right(&self, m: &ComplexMatrix) -> ComplexMatrix {
        if let Some(idx) = self.computational_members() {
            let mut out = ComplexMatrix::zeros(m.nrows(), m.ncols());
            for &j in idx {
                out.set_column(j, &m.column(j));
            }
            return out;
        }
        (m * &self.basis) * self.basis.adjoint()
    }

    /// `tr(P_V M)`.
    pub fn trace_with(&self, m: &ComplexMatrix) -> crate::numerics::C64 {
        if let Some(idx) = self.computational_members() {
            return idx.iter().map(|&i| m[(i, i)]).sum();
        }
        (self.basis.adjoint() * m * &self.basis).trace()
    }
}

pub fn projector(v: &Subspace) -> ComplexMatrix {
    let d = v.ambient_dim();
    if let Some(idx) = v.computational_members() {
        let mut p = ComplexMatrix::zeros(d, d);
        for &i in idx {
            p[(i, i)] = ONE;
        }
        return p;
    }
    &v.basis * v.basis.adjoint()
}

fn same_frame(a: &FrameSet, b: &FrameSet) -> bool {
    Arc::ptr_eq(&a.frame, &b.frame) || *a.frame == *b.frame
}

/// Frame-label neighborhood: closure under r rounds of single-qubit Paulis.
fn frame_neighborhood(fs: &FrameSet, r: usize) -> Vec<usize> {
    let frame = &fs.frame;
    let n = frame.n;
    let singles = enumerate_paulis(n, 1.min(n)).expect("r <= n");
    let mut inside = vec![false; frame.dim()];
    let mut frontier: Vec<usize> = fs.members.clone();
    for &m in &frontier {
        inside[m] = true;
    }
    for _ in 0..r {
        let mut next = Vec::new();
        for &m in &frontier {
            for p in &singles[1..] {
                let t = frame.apply(m, p);
                if !inside[t] {
                    inside[t] = true;
                    next.push(t);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    (0..frame.dim()).filter(|&i| inside[i]).collect()
}

/// Span of `S b` over weight-<=r Paulis S and basis vectors b, by direct
/// stacking and rank-revealing orthonormalization.
pub fn neighborhood_generic(v: &Subspace, r: usize, cap: u128) -> Result<Subspace> {
    let n = v.n;
    if r > n {
        return neighborhood_generic(v, n, cap);
    }
    let k = v.dim() as u128;
    let needed = pauli_count(n, r) * k * (1u128 << n);
    if needed > cap {
        return Err(Error::EnumerationTooLarge { needed, cap });
    }
    if v.is_empty() {
        return Ok(Subspace::empty(n).with_label(format!("B_{r}({})", v.label)));
    }
    let paulis = enumerate_paulis(n, r)?;
    let d = v.ambient_dim();
    let mut stacked = ComplexMatrix::zeros(d, paulis.len() * v.dim());
    for (i, p) in paulis.iter().enumerate() {
        let block = apply_pauli_columns(p, &v.basis)?;
        stacked.columns_mut(i * v.dim(), v.dim()).copy_from(&block);
    }
    let basis = orthonormalize_matrix(&stacked, Tolerance::default());
    Ok(Subspace { n, basis, label: format!("B_{r}({})", v.label), frame: None })
}

/// Neighborhood with an explicit enumeration cap for the generic path.
pub fn neighborhood_capped(v: &Subspace, r: usize, cap: u128) -> Result<Subspace> {
    if let Some(fs) = &v.frame {
        let members = frame_neighborhood(fs, r);
        return Ok(Subspace::from_frame(fs.frame.clone(), members, format!("B_{r}({})", v.label)));
    }
    neighborhood_generic(v, r, cap)
}

/// The r-neighborhood B_r(V).
pub fn neighborhood(v: &Subspace, r: usize) -> Result<Subspace> {
    neighborhood_capped(v, r, DEFAULT_ENUMERATION_CAP)
}

/// Orthogonal complement of `inner` inside `outer` (assumes inner is contained in outer).
pub fn relative_complement(outer: &Subspace, inner: &Subspace, label: impl Into<String>) -> Result<Subspace> {
    if outer.n != inner.n {
        return Err(Error::DimensionMismatch { expected: outer.n, got: inner.n });
    }
    if let (Some(fo), Some(fi)) = (&outer.frame, &inner.frame) {
        if same_frame(fo, fi) {
            let inn: BTreeSet<usize> = fi.members.iter().copied().collect();
            let rest: Vec<usize> = fo.members.iter().copied().filter(|m| !inn.contains(m)).collect();
            return Ok(Subspace::from_frame(fo.frame.clone(), rest, label));
        }
    }
    let target = outer.dim().saturating_sub(inner.dim());
    if target == 0 {
        return Ok(Subspace::empty(outer.n).with_label(label));
    }
    let residual = &outer.basis - &inner.basis * (inner.basis.adjoint() * &outer.basis);
    let mut basis = orthonormalize_matrix(&residual, Tolerance::default());
    if basis.ncols() > target {
        basis = basis.columns(0, target).into_owned();
    }
    Ok(Subspace { n: outer.n, basis, label: label.into(), frame: None })
}

/// The r-boundary: complement of V inside B_r(V). May have dimension zero.
pub fn boundary(v: &Subspace, r: usize) -> Result<Subspace> {
    let b = neighborhood(v, r)?;
    relative_complement(&b, v, format!("d_{r}({})", v.label))
}

pub fn boundary_capped(v: &Subspace, r: usize, cap: u128) -> Result<Subspace> {
    let b = neighborhood_capped(v, r, cap)?;
    relative_complement(&b, v, format!("d_{r}({})", v.label))
}

/// Computational states within Hamming distance `radius` of any center.
pub fn hamming_ball_subspace(centers: &[BinaryVector], radius: usize, n: usize) -> Result<Subspace> {
    for ctr in centers {
        if ctr.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: ctr.n() });
        }
    }
    let d = 1u64 << n;
    let members = (0..d).filter(|x| centers.iter().any(|ctr| ((x ^ ctr.value()).count_ones() as usize) <= radius)).map(|x| x as usize);
    Ok(Subspace::computational(n, members, format!("ball_{radius}")))
}

/// Orthogonal complement in the full space.
pub fn complement(v: &Subspace) -> Result<Subspace> {
    if let Some(fs) = &v.frame {
        let inn: BTreeSet<usize> = fs.members.iter().copied().collect();
        let rest = (0..fs.frame.dim()).filter(|m| !inn.contains(m));
        return Ok(Subspace::from_frame(fs.frame.clone(), rest, format!("comp({})", v.label)));
    }
    relative_complement(&Subspace::full(v.n), v, format!("comp({})", v.label))
}

/// Direct sum of mutually orthogonal subspaces.
pub fn direct_sum(parts: &[&Subspace], label: impl Into<String>) -> Result<Subspace> {
    let first = parts.first().ok_or(Error::EmptyInput)?;
    let n = first.n;
    for p in parts {
        if p.n != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.n });
        }
    }
    let frames: Vec<&FrameSet> = parts.iter().filter_map(|p| p.frame.as_ref()).collect();
    if frames.len() == parts.len() && frames.iter().all(|f| same_frame(f, frames[0])) {
        let members = frames.iter().flat_map(|f| f.members.iter().copied());
        return Ok(Subspace::from_frame(frames[0].frame.clone(), members, label));
    }
    let k: usize = parts.iter().map(|p| p.dim()).sum();
    let d = 1usize << n;
    let mut basis = ComplexMatrix::zeros(d, k);
    let mut col = 0;
    for p in parts {
        basis.columns_mut(col, p.dim()).copy_from(&p.basis);
        col += p.dim();
    }
    let dev = (basis.adjoint() * &basis - ComplexMatrix::identity(k, k)).camax();
    if dev > 1e-9 {
        return Err(Error::NotOrthogonal(dev));
    }
    Ok(Subspace { n, basis, label: label.into(), frame: None })
}

/// Orthogonal decomposition `A + B1 + B2 + C` of the full space.
#[derive(Debug, Clone)]
pub struct HilbertPartition {
    pub a: Subspace,
    pub b1: Subspace,
    pub b2: Subspace,
    pub c: Subspace,
}

impl HilbertPartition {
    /// Checks pairwise orthogonality (1e-9) and completeness.
    pub fn new(a: Subspace, b1: Subspace, b2: Subspace, c: Subspace) -> Result<Self> {
        let n = a.n;
        for s in [&b1, &b2, &c] {
            if s.n != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.n });
            }
        }
        let total = a.dim() + b1.dim() + b2.dim() + c.dim();
        if total != 1usize << n {
            return Err(Error::DimensionMismatch { expected: 1usize << n, got: total });
        }
        let parts = [&a, &b1, &b2, &c];
        for i in 0..4 {
            for j in i + 1..4 {
                let ov = overlap(parts[i], parts[j]);
                if ov > 1e-9 {
                    return Err(Error::NotOrthogonal(ov));
                }
            }
        }
        Ok(HilbertPartition { a, b1, b2, c })
    }

    /// A = V, B1 = d_r V, B2 = d_2r V minus d_r V, C = rest.
    pub fn local(v: &Subspace, r: usize) -> Result<Self> {
        let br = neighborhood(v, r)?;
        let b2r = neighborhood(&br, r)?;
        let b1 = relative_complement(&br, v, format!("d_{r}({})", v.label))?;
        let b2 = relative_complement(&b2r, &br, "B2")?;
        let c = complement(&b2r)?.with_label("C");
        HilbertPartition::new(v.clone(), b1, b2, c)
    }

    pub fn n(&self) -> usize {
        self.a.n
    }

    /// B = B1 + B2.
    pub fn b(&self) -> Result<Subspace> {
        direct_sum(&[&self.b1, &self.b2], "B")
    }
}

/// max |<u|v>| over basis vectors; 0 when frames prove disjointness.
pub fn overlap(a: &Subspace, b: &Subspace) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    if let (Some(fa), Some(fb)) = (&a.frame, &b.frame) {
        if same_frame(fa, fb) {
            let sa: BTreeSet<usize> = fa.members.iter().copied().collect();
            return if fb.members.iter().any(|m| sa.contains(m)) { 1.0 } else { 0.0 };
        }
    }
    (a.basis.adjoint() * &b.basis).iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

/// Text form: header lines then one `re im` pair per line, column by column.
pub fn subspace_to_text(v: &Subspace) -> String {
    let mut s = String::new();
    writeln!(s, "subspace").unwrap();
    writeln!(s, "n {}", v.n).unwrap();
    writeln!(s, "label {}", v.label).unwrap();
    writeln!(s, "dim {}", v.dim()).unwrap();
    for j in 0..v.dim() {
        writeln!(s, "column {j}").unwrap();
        for z in v.basis.column(j).iter() {
            writeln!(s, "{:.16e} {:.16e}", z.re, z.im).unwrap();
        }
    }
    s
}

pub fn subspace_from_text(text: &str) -> Result<Subspace> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    let mut next = |what: &str| lines.next().ok_or_else(|| Error::Parse(format!("missing {what}")));
    if next("header")? != "subspace" {
        return Err(Error::Parse("expected 'subspace'".into()));
    }
    let n: usize = field(next("n")?, "n")?;
    let label = next("label")?.strip_prefix("label").map(|s| s.trim().to_string()).ok_or_else(|| Error::Parse("expected label".into()))?;
    let k: usize = field(next("dim")?, "dim")?;
    if n > 20 {
        return Err(Error::Parse(format!("n = {n} too large")));
    }
    let d = 1usize << n;
    let mut basis = ComplexMatrix::zeros(d, k);
    for j in 0..k {
        let idx: usize = field(next("column")?, "column")?;
        if idx != j {
            return Err(Error::Parse(format!("column {idx} out of order")));
        }
        for i in 0..d {
            basis[(i, j)] = parse_complex(next("entry")?)?;
        }
    }
    Subspace::from_basis(n, basis, label)
}

pub(crate) fn field<T: std::str::FromStr>(line: &str, key: &str) -> Result<T> {
    let rest = line.strip_prefix(key).ok_or_else(|| Error::Parse(format!("expected '{key}', got '{line}'")))?;
    rest.trim().parse().map_err(|_| Error::Parse(format!("bad value for {key}: '{line}'")))
}

pub(crate) fn parse_complex(line: &str) -> Result<crate::numerics::C64> {
    let mut it = line.split_whitespace();
    let re: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse(format!("bad entry '{line}'")))?;
    let im: f64 = it.next().and_then(|t| t.parse().ok()).ok_or_else(|| Error::Parse(format!("bad entry '{line}'")))?;
    Ok(c(re, im))
}
