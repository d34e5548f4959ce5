//! Kraus channels with sparse operators.
//!
//! Kraus operators are stored row-wise with exact zeros dropped, so the local
//! channels built by the samplers cost O(d^2) per application rather than
//! O(d^3).

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{cr, trace_norm, ComplexMatrix, DensityMatrix, Tolerance, C64, I, ONE, ZERO};
use crate::pauli::PauliString;
use crate::subspace::{direct_sum, field, parse_complex, HilbertPartition, Subspace};

/// Row-compressed square operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    rows: Vec<Vec<(usize, C64)>>,
}

impl SparseOp {
    pub fn zeros(dim: usize) -> Self {
        SparseOp { dim, rows: vec![Vec::new(); dim] }
    }

    pub fn identity(dim: usize) -> Self {
        SparseOp { dim, rows: (0..dim).map(|i| vec![(i, ONE)]).collect() }
    }

    pub fn from_dense(m: &ComplexMatrix) -> Result<Self> {
        crate::numerics::check_square(m)?;
        let dim = m.nrows();
        let rows = (0..dim).map(|i| (0..dim).filter(|&j| m[(i, j)] != ZERO).map(|j| (j, m[(i, j)])).collect()).collect();
        Ok(SparseOp { dim, rows })
    }

    pub fn diagonal(d: &[C64]) -> Self {
        SparseOp { dim: d.len(), rows: d.iter().enumerate().map(|(i, v)| if *v != ZERO { vec![(i, *v)] } else { vec![] }).collect() }
    }

    pub fn pauli(p: &PauliString) -> Self {
        let dim = 1usize << p.n();
        let mut rows = vec![Vec::new(); dim];
        for b in 0..dim as u64 {
            let (t, amp) = p.column_entry(b);
            rows[t as usize].push((b as usize, amp));
        }
        SparseOp { dim, rows }
    }

    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> Self {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for (i, j, v) in triplets {
            rows[i].push((j, v));
        }
        for r in rows.iter_mut() {
            r.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, C64)> = Vec::with_capacity(r.len());
            for (j, v) in r.drain(..) {
                match merged.last_mut() {
                    Some(last) if last.0 == j => last.1 += v,
                    _ => merged.push((j, v)),
                }
            }
            merged.retain(|e| e.1 != ZERO);
            *r = merged;
        }
        SparseOp { dim, rows }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rows(&self) -> &[Vec<(usize, C64)>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        match self.rows[i].binary_search_by_key(&j, |e| e.0) {
            Ok(k) => self.rows[i][k].1,
            Err(_) => ZERO,
        }
    }

    pub fn to_dense(&self) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(self.dim, self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn scale(&self, s: C64) -> SparseOp {
        SparseOp { dim: self.dim, rows: self.rows.iter().map(|r| r.iter().map(|&(j, v)| (j, v * s)).filter(|e| e.1 != ZERO).collect()).collect() }
    }

    pub fn adjoint(&self) -> SparseOp {
        let mut trip = Vec::with_capacity(self.nnz());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                trip.push((j, i, v.conj()));
            }
        }
        SparseOp::from_triplets(self.dim, trip)
    }

    /// `self * other`.
    pub fn mul(&self, other: &SparseOp) -> SparseOp {
        let mut trip = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, a) in row {
                for &(j, b) in &other.rows[k] {
                    trip.push((i, j, a * b));
                }
            }
        }
        SparseOp::from_triplets(self.dim, trip)
    }

    /// `self * m` for a dense matrix with `dim` rows.
    pub fn mul_dense(&self, m: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, m.ncols());
        for c in 0..m.ncols() {
            let col = m.column(c);
            let mut oc = out.column_mut(c);
            for (i, row) in self.rows.iter().enumerate() {
                let mut s = ZERO;
                for &(j, v) in row {
                    s += v * col[j];
                }
                oc[i] = s;
            }
        }
        out
    }

    /// `out += (self * m) * self^dagger`.
    pub fn sandwich_into(&self, m: &ComplexMatrix, out: &mut ComplexMatrix) {
        let t = self.mul_dense(m);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                let w = v.conj();
                let src = t.column(j);
                let mut dst = out.column_mut(i);
                for r in 0..self.dim {
                    dst[r] += src[r] * w;
                }
            }
        }
    }

    /// Max deviation from acting as identity on qubit `q`.
    fn nontrivial_residual(&self, n: usize, q: usize) -> f64 {
        let m = 1usize << (n - 1 - q);
        let mut worst = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                let r = if (i ^ j) & m != 0 { v.norm() } else { 0.5 * (v - self.get(i ^ m, j ^ m)).norm() };
                worst = worst.max(r);
            }
        }
        worst
    }

    /// Qubits on which the operator acts non-trivially (threshold 1e-9).
    pub fn support(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&q| self.nontrivial_residual(n, q) > 1e-9).collect()
    }
}

/// One certified approximation: `M = (1 - p) L + p T` with `L` r-local,
/// so the diamond distance to `L` is at most `f = 2p`.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateEntry {
    pub r: usize,
    pub f: f64,
    pub p: f64,
    pub surrogate: KrausChannel,
    pub tail: KrausChannel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    n: usize,
    kraus: Vec<SparseOp>,
    declared_locality: Option<usize>,
    certificate: Vec<CertificateEntry>,
    label: String,
}

impl KrausChannel {
    /// Checks trace preservation within 1e-9.
    pub fn new(n: usize, kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let ops = kraus.iter().map(SparseOp::from_dense).collect::<Result<Vec<_>>>()?;
        Self::from_sparse(n, ops)
    }

    pub fn from_sparse(n: usize, kraus: Vec<SparseOp>) -> Result<Self> {
        let ch = Self::from_sparse_unchecked(n, kraus)?;
        let res = tp_residual(&ch);
        if res > 1e-9 {
            return Err(Error::NotTracePreserving(res));
        }
        Ok(ch)
    }

    /// Skips the trace-preservation check (dimensions still checked).
    pub fn from_sparse_unchecked(n: usize, kraus: Vec<SparseOp>) -> Result<Self> {
        if kraus.is_empty() {
            return Err(Error::EmptyInput);
        }
        let d = 1usize << n;
        for k in &kraus {
            if k.dim != d {
                return Err(Error::DimensionMismatch { expected: d, got: k.dim });
            }
        }
        Ok(KrausChannel { n, kraus, declared_locality: None, certificate: Vec::new(), label: String::new() })
    }

    pub fn identity(n: usize) -> Self {
        KrausChannel { n, kraus: vec![SparseOp::identity(1 << n)], declared_locality: None, certificate: Vec::new(), label: "identity".into() }
    }

    /// `(1 - p) local + p tail`, certified with `f(r) = 2p` at `r = locality(local)`.
    pub fn mixture(local: &KrausChannel, tail: &KrausChannel, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ConfigInvalid(format!("mixture weight {p}")));
        }
        if local.n != tail.n {
            return Err(Error::DimensionMismatch { expected: local.n, got: tail.n });
        }
        let a = cr((1.0 - p).sqrt());
        let b = cr(p.sqrt());
        let mut ops: Vec<SparseOp> = local.kraus.iter().map(|k| k.scale(a)).collect();
        ops.extend(tail.kraus.iter().map(|k| k.scale(b)));
        ops.retain(|k| k.nnz() > 0);
        let mut ch = KrausChannel::from_sparse(local.n, ops)?;
        let r = channel_locality(local)?;
        ch.certificate.push(CertificateEntry { r, f: 2.0 * p, p, surrogate: local.clone(), tail: tail.clone() });
        ch.label = format!("mix({}, {}, {p})", local.label, tail.label);
        Ok(ch)
    }

    /// Kraus products `K_{i_m} ... K_{i_1}` of channels applied in order.
    pub fn compose(channels: &[KrausChannel]) -> Result<Self> {
        let first = channels.first().ok_or(Error::EmptySchedule)?;
        let mut ops = first.kraus.clone();
        for ch in &channels[1..] {
            if ch.n != first.n {
                return Err(Error::DimensionMismatch { expected: first.n, got: ch.n });
            }
            let mut next = Vec::with_capacity(ops.len() * ch.kraus.len());
            for k in &ch.kraus {
                for o in &ops {
                    let p = k.mul(o);
                    if p.nnz() > 0 {
                        next.push(p);
                    }
                }
            }
            ops = next;
        }
        let mut out = KrausChannel::from_sparse_unchecked(first.n, ops)?;
        out.label = channels.iter().map(|c| c.label.as_str()).collect::<Vec<_>>().join("*");
        Ok(out)
    }

    pub fn with_declared_locality(mut self, r: usize) -> Self {
        self.declared_locality = Some(r);
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn kraus(&self) -> &[SparseOp] {
        &self.kraus
    }

    pub fn kraus_dense(&self) -> Vec<ComplexMatrix> {
        self.kraus.iter().map(SparseOp::to_dense).collect()
    }

    pub fn declared_locality(&self) -> Option<usize> {
        self.declared_locality
    }

    pub fn certificate(&self) -> &[CertificateEntry] {
        &self.certificate
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `sum_i K_i M K_i^dagger` for any square matrix `M`.
    pub fn apply_matrix(&self, m: &ComplexMatrix) -> Result<ComplexMatrix> {
        let d = self.dim();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: m.nrows() });
        }
        let mut out = ComplexMatrix::zeros(d, d);
        for k in &self.kraus {
            k.sandwich_into(m, &mut out);
        }
        Ok(out)
    }
}

fn tp_residual(ch: &KrausChannel) -> f64 {
    let d = ch.dim();
    let mut acc = ComplexMatrix::zeros(d, d);
    for k in &ch.kraus {
        for row in &k.rows {
            for &(a, va) in row {
                for &(b, vb) in row {
                    acc[(a, b)] += va.conj() * vb;
                }
            }
        }
    }
    for i in 0..d {
        acc[(i, i)] -= ONE;
    }
    acc.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelValidation {
    pub tp_residual: f64,
    pub supports: Vec<Vec<usize>>,
    pub passed: bool,
}

pub fn validate_channel(c: &KrausChannel, tol: Tolerance) -> ChannelValidation {
    let tp = tp_residual(c);
    ChannelValidation { tp_residual: tp, supports: c.kraus.iter().map(|k| k.support(c.n)).collect(), passed: tp < tol.abs }
}

pub fn apply_channel(c: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.n() != c.n {
        return Err(Error::DimensionMismatch { expected: c.n, got: rho.n() });
    }
    Ok(DensityMatrix::new_unchecked(c.apply_matrix(rho.mat())?, c.n))
}

/// Largest Kraus support. A declared value is returned when it upper-bounds
/// the detected one.
pub fn channel_locality(c: &KrausChannel) -> Result<usize> {
    let detected = c.kraus.iter().map(|k| k.support(c.n).len()).max().unwrap_or(0);
    match c.declared_locality {
        Some(dec) if dec < detected => Err(Error::DeclarationInconsistent { declared: dec, detected }),
        Some(dec) => Ok(dec),
        None => Ok(detected),
    }
}

/// Certificate soundness: surrogate locality and the exact mixture structure.
pub fn verify_certificate(c: &KrausChannel) -> Result<()> {
    for e in &c.certificate {
        let loc = channel_locality(&e.surrogate)?;
        if loc > e.r {
            return Err(Error::DeclarationInconsistent { declared: e.r, detected: loc });
        }
        if (e.f - 2.0 * e.p).abs() > 1e-15 {
            return Err(Error::AssertionFailed(format!("certificate f = {} != 2p", e.f)));
        }
        let rebuilt = KrausChannel::mixture(&e.surrogate, &e.tail, e.p)?;
        if rebuilt.kraus != c.kraus {
            return Err(Error::AssertionFailed("certificate does not match channel".into()));
        }
    }
    Ok(())
}

// ---- Pauli transfer matrix and steady states ----

/// In-place Walsh-Hadamard transform.
fn walsh(v: &mut [C64]) {
    let mut h = 1;
    while h < v.len() {
        for i in (0..v.len()).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

fn i_pow(k: u32) -> C64 {
    match k % 4 {
        0 => ONE,
        1 => I,
        2 => -ONE,
        _ => -I,
    }
}

/// `c_a = tr(sigma_a Y) / d` with `a = (x << n) | z` and `sigma_a = i^{|x&z|} X^x Z^z`.
pub fn pauli_coefficients(y: &ComplexMatrix, n: usize) -> Vec<C64> {
    let d = 1usize << n;
    let mut out = vec![ZERO; d * d];
    let mut w = vec![ZERO; d];
    for x in 0..d {
        for b in 0..d {
            w[b] = y[(b, b ^ x)];
        }
        walsh(&mut w);
        for z in 0..d {
            out[(x << n) | z] = i_pow((x & z).count_ones()) * w[z] / cr(d as f64);
        }
    }
    out
}

/// Inverse of [`pauli_coefficients`].
pub fn from_pauli_coefficients(c: &[C64], n: usize) -> ComplexMatrix {
    let d = 1usize << n;
    let mut m = ComplexMatrix::zeros(d, d);
    for x in 0..d {
        for z in 0..d {
            let a = c[(x << n) | z];
            if a == ZERO {
                continue;
            }
            let ph = i_pow((x & z).count_ones()) * a;
            for b in 0..d {
                let s = if (b & z).count_ones() % 2 == 1 { -ph } else { ph };
                m[(b ^ x, b)] += s;
            }
        }
    }
    m
}

/// Real Pauli transfer matrix `S[a][b] = tr(sigma_a M(sigma_b)) / d`.
pub fn pauli_transfer_matrix(c: &KrausChannel) -> Result<DMatrix<f64>> {
    let n = c.n;
    if n > 6 {
        return Err(Error::SuperoperatorTooLarge(n));
    }
    let d = 1usize << n;
    let nn = d * d;
    let mut s = DMatrix::<f64>::zeros(nn, nn);
    for x in 0..d {
        for z in 0..d {
            let b = (x << n) | z;
            let sigma = PauliString::from_parts(
                crate::pauli::BinaryVector::from_value(n, x as u64),
                crate::pauli::BinaryVector::from_value(n, z as u64),
            )
            .matrix();
            let img = c.apply_matrix(&sigma)?;
            for (a, v) in pauli_coefficients(&img, n).into_iter().enumerate() {
                s[(a, b)] = v.re;
            }
        }
    }
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    /// Largest modulus among eigenvalues other than the fixed one.
    pub second_modulus: f64,
}

/// Unique fixed point of a channel via its Pauli transfer matrix (n <= 6).
pub fn steady_state(c: &KrausChannel, tol: Tolerance) -> Result<DensityMatrix> {
    steady_state_report(c, tol).map(|s| s.rho)
}

pub fn steady_state_report(c: &KrausChannel, tol: Tolerance) -> Result<SteadyState> {
    let n = c.n;
    let s = pauli_transfer_matrix(c)?;
    let nn = s.nrows();
    let eig = s.clone().complex_eigenvalues();
    let mut near_one = 0;
    let mut second = 0.0f64;
    let mut mods: Vec<(f64, f64)> = eig.iter().map(|z| ((z - nalgebra::Complex::new(1.0, 0.0)).norm(), z.norm())).collect();
    mods.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (k, (dist, m)) in mods.iter().enumerate() {
        if *dist < 1e-9 {
            near_one += 1;
        } else if k > 0 {
            second = second.max(*m);
        }
    }
    if near_one > 1 {
        return Err(Error::MultipleSteadyStates(near_one));
    }
    // identity coefficient fixed by unit trace; solve the remaining block
    let d = 1usize << n;
    let c0 = 1.0 / d as f64;
    let mut a = DMatrix::<f64>::zeros(nn - 1, nn - 1);
    let mut rhs = nalgebra::DVector::<f64>::zeros(nn - 1);
    for i in 1..nn {
        for j in 1..nn {
            a[(i - 1, j - 1)] = s[(i, j)] - if i == j { 1.0 } else { 0.0 };
        }
        rhs[i - 1] = -s[(i, 0)] * c0;
    }
    let sol = a.lu().solve(&rhs).ok_or(Error::MultipleSteadyStates(2))?;
    let mut coeffs = vec![ZERO; nn];
    coeffs[0] = cr(c0);
    for i in 1..nn {
        coeffs[i] = cr(sol[i - 1]);
    }
    let m = from_pauli_coefficients(&coeffs, n);
    let m = (&m + m.adjoint()) * cr(0.5);
    let (evals, evecs) = crate::numerics::hermitian_eigensystem(&m)?;
    let lo = evals.iter().fold(f64::INFINITY, |a, b| a.min(*b));
    if lo < -1e-8 {
        return Err(Error::NoPositiveFixedPoint(lo));
    }
    let clipped = crate::numerics::hermitian_function(&evals, &evecs, |e| e.max(0.0));
    let t = clipped.trace().re;
    let rho = DensityMatrix::new_unchecked(clipped / cr(t), n);
    let res = trace_norm(&(c.apply_matrix(rho.mat())? - rho.mat()))?;
    if res >= tol.abs * 10.0 {
        return Err(Error::NotFixedPoint(res));
    }
    Ok(SteadyState { rho, second_modulus: second })
}

/// `max ||P_X K P_Y||` via the isometry sandwich `U_X^dagger K U_Y`.
pub fn sandwich_norm(k: &SparseOp, left: &Subspace, right: &Subspace) -> f64 {
    if left.is_empty() || right.is_empty() {
        return 0.0;
    }
    if let (Some(li), Some(ri)) = (left.computational_members(), right.computational_members()) {
        let rset: BTreeSet<usize> = ri.iter().copied().collect();
        let lpos: std::collections::HashMap<usize, usize> = li.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let rpos: std::collections::HashMap<usize, usize> = ri.iter().enumerate().map(|(p, &i)| (i, p)).collect();
        let mut sub = ComplexMatrix::zeros(li.len(), ri.len());
        let mut any = false;
        for &i in li {
            for &(j, v) in &k.rows[i] {
                if rset.contains(&j) {
                    sub[(lpos[&i], rpos[&j])] = v;
                    any = true;
                }
            }
        }
        return if any { crate::numerics::operator_norm(&sub) } else { 0.0 };
    }
    let kr = k.mul_dense(right.basis());
    crate::numerics::operator_norm(&(left.basis().adjoint() * kr))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// max ||(P_B2 + P_C) K P_A||
    pub forward_residual: f64,
    /// max ||(P_A + P_B1) K P_C||
    pub backward_residual: f64,
    pub residual: f64,
    pub passed: bool,
}

pub fn check_partition_condition(c: &KrausChannel, part: &HilbertPartition, tol: Tolerance) -> Result<ConditionReport> {
    if part.n() != c.n {
        return Err(Error::DimensionMismatch { expected: c.n, got: part.n() });
    }
    let far = direct_sum(&[&part.b2, &part.c], "B2+C")?;
    let near = direct_sum(&[&part.a, &part.b1], "A+B1")?;
    let mut fwd = 0.0f64;
    let mut bwd = 0.0f64;
    for k in &c.kraus {
        fwd = fwd.max(sandwich_norm(k, &far, &part.a));
        bwd = bwd.max(sandwich_norm(k, &near, &part.c));
    }
    let residual = fwd.max(bwd);
    Ok(ConditionReport { forward_residual: fwd, backward_residual: bwd, residual, passed: residual < tol.abs })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTrace {
    pub times: Vec<usize>,
    pub distances: Vec<f64>,
}

/// Distances `||rho(t) - rho_ref||_1` for t = 0..=T, channels applied cyclically.
pub fn evolve_sequence(channels: &[KrausChannel], rho0: &DensityMatrix, rho_ref: &DensityMatrix, t_max: usize) -> Result<EvolutionTrace> {
    if channels.is_empty() {
        return Err(Error::EmptySchedule);
    }
    for ch in channels {
        if ch.n != rho0.n() {
            return Err(Error::DimensionMismatch { expected: ch.n, got: rho0.n() });
        }
    }
    if rho_ref.n() != rho0.n() {
        return Err(Error::DimensionMismatch { expected: rho0.n(), got: rho_ref.n() });
    }
    let mut cur = rho0.mat().clone();
    let mut times = vec![0];
    let mut distances = vec![trace_norm(&(&cur - rho_ref.mat()))?];
    for t in 1..=t_max {
        cur = channels[(t - 1) % channels.len()].apply_matrix(&cur)?;
        times.push(t);
        distances.push(trace_norm(&(&cur - rho_ref.mat()))?);
    }
    Ok(EvolutionTrace { times, distances })
}

// ---- text serialization ----

fn write_channel(s: &mut String, c: &KrausChannel) {
    let d = c.dim();
    writeln!(s, "channel").unwrap();
    writeln!(s, "n {}", c.n).unwrap();
    writeln!(s, "label {}", c.label).unwrap();
    match c.declared_locality {
        Some(r) => writeln!(s, "declared_locality {r}").unwrap(),
        None => writeln!(s, "declared_locality none").unwrap(),
    }
    writeln!(s, "kraus_count {}", c.kraus.len()).unwrap();
    for (k, op) in c.kraus.iter().enumerate() {
        writeln!(s, "kraus {k}").unwrap();
        let m = op.to_dense();
        for i in 0..d {
            for j in 0..d {
                writeln!(s, "{:.16e} {:.16e}", m[(i, j)].re, m[(i, j)].im).unwrap();
            }
        }
    }
    writeln!(s, "certificate_count {}", c.certificate.len()).unwrap();
    for e in &c.certificate {
        writeln!(s, "certificate r {} f {:.16e} p {:.16e}", e.r, e.f, e.p).unwrap();
        write_channel(s, &e.surrogate);
        write_channel(s, &e.tail);
    }
    writeln!(s, "end").unwrap();
}

/// Structured text with 17-significant-digit complex entries (row-major).
pub fn channel_to_text(c: &KrausChannel) -> String {
    let mut s = String::new();
    write_channel(&mut s, c);
    s
}

fn take<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<&'a str> {
    lines.next().ok_or_else(|| Error::Parse("unexpected end of channel text".into()))
}

fn read_channel<'a>(lines: &mut impl Iterator<Item = &'a str>) -> Result<KrausChannel> {
    if take(lines)? != "channel" {
        return Err(Error::Parse("expected 'channel'".into()));
    }
    let n: usize = field(take(lines)?, "n")?;
    if n > 12 {
        return Err(Error::Parse(format!("n = {n} too large")));
    }
    let label = take(lines)?.strip_prefix("label").map(|s| s.trim().to_string()).ok_or_else(|| Error::Parse("expected label".into()))?;
    let dl = take(lines)?;
    let declared = match dl.strip_prefix("declared_locality").map(str::trim) {
        Some("none") => None,
        Some(v) => Some(v.parse::<usize>().map_err(|_| Error::Parse(format!("bad locality '{v}'")))?),
        None => return Err(Error::Parse("expected declared_locality".into())),
    };
    let count: usize = field(take(lines)?, "kraus_count")?;
    let d = 1usize << n;
    let mut ops = Vec::with_capacity(count);
    for k in 0..count {
        let idx: usize = field(take(lines)?, "kraus")?;
        if idx != k {
            return Err(Error::Parse(format!("kraus {idx} out of order")));
        }
        let mut m = ComplexMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = parse_complex(take(lines)?)?;
            }
        }
        ops.push(SparseOp::from_dense(&m)?);
    }
    let cc: usize = field(take(lines)?, "certificate_count")?;
    let mut cert = Vec::with_capacity(cc);
    for _ in 0..cc {
        let head = take(lines)?;
        let toks: Vec<&str> = head.split_whitespace().collect();
        if toks.len() != 7 || toks[0] != "certificate" || toks[1] != "r" || toks[3] != "f" || toks[5] != "p" {
            return Err(Error::Parse(format!("bad certificate line '{head}'")));
        }
        let pr = |t: &str| t.parse::<f64>().map_err(|_| Error::Parse(format!("bad number '{t}'")));
        let r: usize = toks[2].parse().map_err(|_| Error::Parse(format!("bad r '{}'", toks[2])))?;
        let (f, p) = (pr(toks[4])?, pr(toks[6])?);
        let surrogate = read_channel(lines)?;
        let tail = read_channel(lines)?;
        cert.push(CertificateEntry { r, f, p, surrogate, tail });
    }
    if take(lines)? != "end" {
        return Err(Error::Parse("expected 'end'".into()));
    }
    let mut ch = KrausChannel::from_sparse(n, ops)?;
    ch.declared_locality = declared;
    ch.certificate = cert;
    ch.label = label;
    Ok(ch)
}

pub fn channel_from_text(text: &str) -> Result<KrausChannel> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    read_channel(&mut lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::testutil::{gaussian, random_density};
    use crate::pauli::PauliKind;
    use crate::subspace::{boundary, hamming_ball_subspace, neighborhood};
    use crate::pauli::BinaryVector;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pauli_dense(label: &str) -> ComplexMatrix {
        PauliString::parse(label).unwrap().matrix()
    }

    fn half_flip() -> KrausChannel {
        let s = cr(0.5f64.sqrt());
        KrausChannel::new(1, vec![ComplexMatrix::identity(2, 2) * s, pauli_dense("X") * s]).unwrap()
    }

    fn depolarizing1() -> KrausChannel {
        let s = cr(0.5);
        KrausChannel::new(1, vec![ComplexMatrix::identity(2, 2) * s, pauli_dense("X") * s, pauli_dense("Y") * s, pauli_dense("Z") * s]).unwrap()
    }

    #[test]
    fn validation_examples() {
        assert_eq!(validate_channel(&KrausChannel::identity(2), Tolerance::default()).tp_residual, 0.0);
        let v = validate_channel(&half_flip(), Tolerance::default());
        assert!(v.tp_residual < 1e-15 && v.passed);
        assert_eq!(v.supports, vec![vec![], vec![0]]);
        let mut m = ComplexMatrix::identity(2, 2);
        m[(0, 0)] += cr(1e-3);
        let bad = KrausChannel::from_sparse_unchecked(1, vec![SparseOp::from_dense(&m).unwrap()]).unwrap();
        let v = validate_channel(&bad, Tolerance::default());
        assert!(!v.passed);
        // oracle: (1 + 1e-3)^2 - 1
        assert!((v.tp_residual - ((1.0 + 1e-3f64).powi(2) - 1.0)).abs() < 1e-15);
        assert!(matches!(KrausChannel::from_sparse(1, vec![SparseOp::from_dense(&m).unwrap()]), Err(Error::NotTracePreserving(_))));
    }

    #[test]
    fn apply_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(&mut rng, 2);
        let out = apply_channel(&KrausChannel::identity(2), &rho).unwrap();
        assert_eq!(out.mat(), rho.mat());
        let deph = KrausChannel::new(1, vec![ComplexMatrix::identity(2, 2) * cr(0.5f64.sqrt()), pauli_dense("Z") * cr(0.5f64.sqrt())]).unwrap();
        let plus = ComplexMatrix::from_element(2, 2, cr(0.5));
        let out = deph.apply_matrix(&plus).unwrap();
        assert!((out - ComplexMatrix::identity(2, 2) * cr(0.5)).norm() < 1e-15);
        let out = apply_channel(&depolarizing1(), &DensityMatrix::pure(&gaussian(&mut rng, 2, 1).column(0).into_owned(), 1).unwrap()).unwrap();
        assert!((out.mat().trace().re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn locality_examples() {
        assert_eq!(channel_locality(&half_flip()).unwrap(), 1);
        let s = cr(0.5f64.sqrt());
        let xx = KrausChannel::new(3, vec![ComplexMatrix::identity(8, 8) * s, pauli_dense("XXI") * s]).unwrap();
        assert_eq!(channel_locality(&xx).unwrap(), 2);
        let declared = xx.clone().with_declared_locality(1);
        assert_eq!(channel_locality(&declared), Err(Error::DeclarationInconsistent { declared: 1, detected: 2 }));
        assert_eq!(channel_locality(&xx.with_declared_locality(3)).unwrap(), 3);
    }

    #[test]
    fn support_of_controlled_op() {
        // CNOT on qubits (0, 2) of 3 acts on exactly those two
        let mut m = ComplexMatrix::zeros(8, 8);
        for b in 0..8usize {
            let t = if b & 4 != 0 { b ^ 1 } else { b };
            m[(t, b)] = ONE;
        }
        assert_eq!(SparseOp::from_dense(&m).unwrap().support(3), vec![0, 2]);
    }

    #[test]
    fn steady_state_examples() {
        let rho = steady_state(&depolarizing1(), Tolerance::default()).unwrap();
        assert!((rho.mat() - ComplexMatrix::identity(2, 2) * cr(0.5)).norm() < 1e-12);
        assert_eq!(steady_state(&KrausChannel::identity(1), Tolerance::default()).unwrap_err(), Error::MultipleSteadyStates(4));
    }

    #[test]
    fn steady_state_of_amplitude_damping() {
        // oracle: amplitude damping drives everything to |0><0|
        let g = 0.3f64;
        let k0 = ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, cr((1.0 - g).sqrt())]);
        let k1 = ComplexMatrix::from_row_slice(2, 2, &[ZERO, cr(g.sqrt()), ZERO, ZERO]);
        let ch = KrausChannel::new(1, vec![k0, k1]).unwrap();
        let rho = steady_state(&ch, Tolerance::default()).unwrap();
        assert!((rho.mat()[(0, 0)] - ONE).norm() < 1e-10);
    }

    #[test]
    fn pauli_coefficients_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = gaussian(&mut rng, 8, 8);
        let back = from_pauli_coefficients(&pauli_coefficients(&m, 3), 3);
        assert!((back - m).norm() < 1e-12);
    }

    #[test]
    fn partition_condition_examples() {
        let n = 3;
        let a = hamming_ball_subspace(&[BinaryVector::zeros(n)], 0, n).unwrap();
        let part = HilbertPartition::local(&a, 1).unwrap();
        let r = check_partition_condition(&KrausChannel::identity(n), &part, Tolerance::default()).unwrap();
        assert_eq!(r.residual, 0.0);
        let s = cr(0.5f64.sqrt());
        let local = KrausChannel::new(n, vec![ComplexMatrix::identity(8, 8) * s, pauli_dense("IXI") * s]).unwrap();
        assert!(check_partition_condition(&local, &part, Tolerance::default()).unwrap().passed);
        let global = KrausChannel::new(n, vec![ComplexMatrix::identity(8, 8) * s, pauli_dense("XXX") * s]).unwrap();
        let r = check_partition_condition(&global, &part, Tolerance::default()).unwrap();
        // oracle: |<111| sqrt(1/2) XXX |000>|
        assert!((r.residual - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(!r.passed);
        // generic (frame-free) partition gives the same residual
        let gp = HilbertPartition::new(part.a.without_frame(), part.b1.without_frame(), part.b2.without_frame(), part.c.without_frame()).unwrap();
        let r2 = check_partition_condition(&global, &gp, Tolerance::default()).unwrap();
        assert!((r2.residual - r.residual).abs() < 1e-12);
    }

    #[test]
    fn boundary_of_neighborhood_matches_partition_blocks() {
        let n = 3;
        let a = hamming_ball_subspace(&[BinaryVector::zeros(n)], 0, n).unwrap();
        let part = HilbertPartition::local(&a, 1).unwrap();
        assert_eq!(part.b1.dim(), boundary(&a, 1).unwrap().dim());
        assert_eq!(part.a.dim() + part.b1.dim() + part.b2.dim(), neighborhood(&a, 2).unwrap().dim());
    }

    #[test]
    fn evolve_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density(&mut rng, 1);
        let sigma = random_density(&mut rng, 1);
        let tr = evolve_sequence(&[KrausChannel::identity(1)], &rho, &sigma, 5).unwrap();
        assert!(tr.distances.windows(2).all(|w| (w[0] - w[1]).abs() < 1e-14));
        let tr = evolve_sequence(&[depolarizing1()], &rho, &rho, 3).unwrap();
        assert_eq!(tr.distances[0], 0.0);
        assert_eq!(tr.times, vec![0, 1, 2, 3]);
    }

    #[test]
    fn mixture_certificate() {
        let s = cr(0.5f64.sqrt());
        let tail = KrausChannel::new(2, vec![ComplexMatrix::identity(4, 4) * s, pauli_dense("XX") * s]).unwrap();
        let local = KrausChannel::new(2, vec![ComplexMatrix::identity(4, 4) * s, pauli_dense("XI") * s]).unwrap();
        let m = KrausChannel::mixture(&local, &tail, 0.1).unwrap();
        assert_eq!(m.certificate()[0].r, 1);
        assert!((m.certificate()[0].f - 0.2).abs() < 1e-15);
        verify_certificate(&m).unwrap();
        assert_eq!(channel_locality(&m).unwrap(), 2);
    }

    #[test]
    fn text_roundtrip() {
        let s = cr(0.5f64.sqrt());
        let tail = KrausChannel::new(2, vec![ComplexMatrix::identity(4, 4) * s, pauli_dense("XX") * s]).unwrap();
        let local = KrausChannel::new(2, vec![ComplexMatrix::identity(4, 4) * s, pauli_dense("YI") * s]).unwrap();
        let m = KrausChannel::mixture(&local, &tail, 0.25).unwrap().with_declared_locality(2);
        let back = channel_from_text(&channel_to_text(&m)).unwrap();
        assert_eq!(back, m);
        assert!(channel_from_text("channel\nn 1").is_err());
    }

    #[test]
    fn compose_matches_sequential_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = KrausChannel::new(2, vec![ComplexMatrix::identity(4, 4) * cr(0.8), PauliString::single(2, 0, PauliKind::Y).matrix() * cr(0.6)]).unwrap();
        let b = KrausChannel::new(2, vec![ComplexMatrix::identity(4, 4) * cr(0.6), PauliString::single(2, 1, PauliKind::X).matrix() * cr(0.8)]).unwrap();
        let rho = random_density(&mut rng, 2);
        let seq = b.apply_matrix(&a.apply_matrix(rho.mat()).unwrap()).unwrap();
        let comp = KrausChannel::compose(&[a, b]).unwrap().apply_matrix(rho.mat()).unwrap();
        assert!((seq - comp).norm() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn channels_contract_trace_distance(seed in any::<u64>(), p in 0.0f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = cr(p.sqrt());
            let t = cr((1.0 - p).sqrt());
            let ch = KrausChannel::new(2, vec![ComplexMatrix::identity(4, 4) * t, pauli_dense("XY") * s]).unwrap();
            let (a, b) = (random_density(&mut rng, 2), random_density(&mut rng, 2));
            let before = trace_norm(&(a.mat() - b.mat())).unwrap();
            let after = trace_norm(&(ch.apply_matrix(a.mat()).unwrap() - ch.apply_matrix(b.mat()).unwrap())).unwrap();
            prop_assert!(after <= before + 1e-9);
        }
    }
}
