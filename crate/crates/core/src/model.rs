//! Commuting-projector Hamiltonians built from parity checks, Gibbs states,
//! energy barriers and random local perturbations.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::{cr, hermitian_eigensystem, hermitian_residual, operator_norm, ComplexMatrix, DensityMatrix, C64, ZERO};
use crate::pauli::{qubit_mask, BinaryVector, PauliString};
use crate::subspace::{boundary, neighborhood, CodeFrame, Subspace};

/// Z-type and X-type parity checks on `n` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckFamily {
    pub n: usize,
    pub z_checks: Vec<Vec<usize>>,
    pub x_checks: Vec<Vec<usize>>,
    pub name: String,
}

impl CheckFamily {
    /// Validates supports and CSS commutativity (even overlaps).
    pub fn new(n: usize, z_checks: Vec<Vec<usize>>, x_checks: Vec<Vec<usize>>, name: impl Into<String>) -> Result<Self> {
        if n == 0 || n > crate::pauli::MAX_QUBITS {
            return Err(Error::ConfigInvalid(format!("qubit count {n} out of range")));
        }
        for s in z_checks.iter().chain(&x_checks) {
            for &q in s {
                if q >= n {
                    return Err(Error::SupportOutOfRange { index: q, n });
                }
            }
        }
        let fam = CheckFamily { n, z_checks, x_checks, name: name.into() };
        let zm = fam.z_masks();
        let xm = fam.x_masks();
        for (i, z) in zm.iter().enumerate() {
            for (j, x) in xm.iter().enumerate() {
                if (z & x).count_ones() % 2 == 1 {
                    return Err(Error::NonCommutingChecks { z: i, x: j });
                }
            }
        }
        Ok(fam)
    }

    pub fn is_classical(&self) -> bool {
        self.x_checks.is_empty()
    }

    fn mask(&self, s: &[usize]) -> u64 {
        s.iter().fold(0, |m, &q| m ^ qubit_mask(self.n, q))
    }

    pub fn z_masks(&self) -> Vec<u64> {
        self.z_checks.iter().map(|s| self.mask(s)).collect()
    }

    pub fn x_masks(&self) -> Vec<u64> {
        self.x_checks.iter().map(|s| self.mask(s)).collect()
    }

    /// Max number of checks touching one qubit.
    pub fn w0(&self) -> usize {
        let mut count = vec![0usize; self.n];
        for s in self.z_checks.iter().chain(&self.x_checks) {
            for &q in s {
                count[q] += 1;
            }
        }
        count.into_iter().max().unwrap_or(0)
    }

    pub fn max_support(&self) -> usize {
        self.z_checks.iter().chain(&self.x_checks).map(|s| s.len()).max().unwrap_or(0)
    }

    /// Eigenbasis frame of H0: computational for classical families.
    pub fn frame(&self) -> Arc<CodeFrame> {
        let xs: Vec<BinaryVector> = self.x_masks().into_iter().map(|m| BinaryVector::from_value(self.n, m)).collect();
        Arc::new(CodeFrame::css(self.n, &xs))
    }

    /// Violated checks of the H0 eigenstate `X^x Z^z psi0`.
    pub fn frame_energy(&self, x: u64, z: u64) -> usize {
        let zv = self.z_masks().iter().filter(|&&c| (c & x).count_ones() % 2 == 1).count();
        let xv = self.x_masks().iter().filter(|&&a| (a & z).count_ones() % 2 == 1).count();
        zv + xv
    }

    /// H0 energy of every frame label, in label order.
    pub fn frame_energies(&self, frame: &CodeFrame) -> Vec<f64> {
        (0..frame.dim())
            .map(|i| {
                let (x, _) = frame.label(i);
                self.frame_energy(x, frame.z_rep(i)) as f64
            })
            .collect()
    }
}

/// Periodic Ising chain: checks `Z_i Z_{i+1 mod n}`.
pub fn ising_ring(n: usize) -> Result<CheckFamily> {
    if n < 2 {
        return Err(Error::ConfigInvalid(format!("ising_ring needs n >= 2, got {n}")));
    }
    let z = (0..n).map(|i| vec![i, (i + 1) % n]).filter(|s| s[0] != s[1]).collect::<Vec<_>>();
    let z = if n == 2 { vec![vec![0, 1]] } else { z };
    CheckFamily::new(n, z, vec![], format!("ising_ring({n})"))
}

/// Open repetition code: checks `Z_i Z_{i+1}` for i < n-1.
pub fn repetition(n: usize) -> Result<CheckFamily> {
    if n < 2 {
        return Err(Error::ConfigInvalid(format!("repetition needs n >= 2, got {n}")));
    }
    CheckFamily::new(n, (0..n - 1).map(|i| vec![i, i + 1]).collect(), vec![], format!("repetition({n})"))
}

pub fn steane7() -> CheckFamily {
    let h = vec![vec![3, 4, 5, 6], vec![1, 2, 5, 6], vec![0, 2, 4, 6]];
    CheckFamily::new(7, h.clone(), h, "steane7").expect("steane checks commute")
}

/// Toric code on an L x L torus with 2L^2 edge qubits; Z checks on
/// plaquettes, X checks on vertices.
pub fn toric(l: usize) -> Result<CheckFamily> {
    if l < 2 || 2 * l * l > 18 {
        return Err(Error::ConfigInvalid(format!("toric supports L = 2..3, got {l}")));
    }
    let h = |i: usize, j: usize| (i % l) * l + (j % l);
    let v = |i: usize, j: usize| l * l + (i % l) * l + (j % l);
    let mut plaq = Vec::new();
    let mut star = Vec::new();
    for i in 0..l {
        for j in 0..l {
            let mut p = vec![h(i, j), h(i + 1, j), v(i, j), v(i, j + 1)];
            p.sort_unstable();
            plaq.push(p);
            let mut s = vec![h(i, j), h(i, j + l - 1), v(i, j), v(i + l - 1, j)];
            s.sort_unstable();
            star.push(s);
        }
    }
    CheckFamily::new(2 * l * l, plaq, star, format!("toric({l})"))
}

/// Classical LDPC family with weight-3 Z checks drawn from a seeded stream.
pub fn random_ldpc(n: usize, checks: usize, seed: u64) -> Result<CheckFamily> {
    if n < 3 {
        return Err(Error::ConfigInvalid(format!("random_ldpc needs n >= 3, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = Vec::with_capacity(checks);
    for _ in 0..checks {
        let mut s = rand::seq::index::sample(&mut rng, n, 3).into_vec();
        s.sort_unstable();
        z.push(s);
    }
    CheckFamily::new(n, z, vec![], format!("random_ldpc({n},{checks},{seed})"))
}

/// Resolve a registry name such as `ising_ring(6)`, `toric(2)` or
/// `random_ldpc(8,6,1)`.
pub fn registry(spec: &str) -> Result<CheckFamily> {
    let s = spec.trim();
    let (name, args) = match s.find('(') {
        Some(p) if s.ends_with(')') => (&s[..p], &s[p + 1..s.len() - 1]),
        None => (s, ""),
        _ => return Err(Error::ModelNotFound(spec.to_string())),
    };
    let nums: Vec<u64> = if args.trim().is_empty() {
        vec![]
    } else {
        args.split(',').map(|a| a.trim().parse::<u64>().map_err(|_| Error::ModelNotFound(spec.to_string()))).collect::<Result<_>>()?
    };
    match (name.trim(), nums.as_slice()) {
        ("ising_ring", [n]) => ising_ring(*n as usize),
        ("repetition", [n]) => repetition(*n as usize),
        ("steane7", []) => Ok(steane7()),
        ("toric", [l]) => toric(*l as usize),
        ("random_ldpc", [n, c, seed]) => random_ldpc(*n as usize, *c as usize, *seed),
        _ => Err(Error::ModelNotFound(spec.to_string())),
    }
}

/// Parse a check file: `Z: 0 1` / `X: 2 3 4` lines, optional `n: 7`, `#` comments.
pub fn parse_check_file(text: &str, name: &str) -> Result<CheckFamily> {
    let mut n: Option<usize> = None;
    let (mut z, mut x) = (Vec::new(), Vec::new());
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, rest) = line.split_once(':').ok_or_else(|| Error::Parse(format!("line {}: missing ':'", ln + 1)))?;
        let nums = || -> Result<Vec<usize>> {
            rest.split_whitespace().map(|t| t.parse::<usize>().map_err(|_| Error::Parse(format!("line {}: bad index '{t}'", ln + 1)))).collect()
        };
        match key.trim() {
            "n" => n = Some(rest.trim().parse().map_err(|_| Error::Parse(format!("line {}: bad n", ln + 1)))?),
            "Z" | "z" => z.push(nums()?),
            "X" | "x" => x.push(nums()?),
            other => return Err(Error::Parse(format!("line {}: unknown key '{other}'", ln + 1))),
        }
    }
    let n = match n {
        Some(n) => n,
        None => z.iter().chain(&x).flatten().max().map(|m| m + 1).ok_or_else(|| Error::Parse("no checks".into()))?,
    };
    CheckFamily::new(n, z, x, name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    pub mat: ComplexMatrix,
    pub n: usize,
    /// Max checks per qubit.
    pub w0: usize,
    /// Max support of perturbation terms (0 when unperturbed).
    pub w1: usize,
    pub source: String,
    pub checks: Option<CheckFamily>,
}

impl Hamiltonian {
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Sum of two Hamiltonians on the same qubits. Check data survives only
    /// when one summand is zero.
    pub fn plus(&self, other: &Hamiltonian) -> Result<Hamiltonian> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        Ok(Hamiltonian {
            mat: &self.mat + &other.mat,
            n: self.n,
            w0: self.w0.max(other.w0),
            w1: self.w1.max(other.w1),
            source: format!("{} + {}", self.source, other.source),
            // check data describes the sum only if the other term vanishes
            checks: if other.mat.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                self.checks.clone()
            } else if self.mat.iter().all(|z| *z == C64::new(0.0, 0.0)) {
                other.checks.clone()
            } else {
                None
            },
        })
    }

    /// Diagonal entries when the matrix is exactly diagonal.
    pub fn diagonal(&self) -> Option<Vec<f64>> {
        crate::numerics::real_diagonal(&self.mat)
    }
}

/// `H0 = sum_z (1 - C_k)/2 + sum_x (1 - A_k)/2`.
pub fn build_hamiltonian(checks: &CheckFamily) -> Result<Hamiltonian> {
    let n = checks.n;
    let zm = checks.z_masks();
    let xm = checks.x_masks();
    // re-verify commutation of the check operators themselves
    for (i, &zc) in zm.iter().enumerate() {
        let zp = PauliString::from_parts(BinaryVector::zeros(n), BinaryVector::from_value(n, zc));
        for (j, &xc) in xm.iter().enumerate() {
            let xp = PauliString::from_parts(BinaryVector::from_value(n, xc), BinaryVector::zeros(n));
            if !zp.commutes_with(&xp) {
                return Err(Error::NonCommutingChecks { z: i, x: j });
            }
        }
    }
    let d = 1usize << n;
    let mut mat = ComplexMatrix::zeros(d, d);
    for b in 0..d as u64 {
        let viol = zm.iter().filter(|&&c| (c & b).count_ones() % 2 == 1).count();
        mat[(b as usize, b as usize)] += cr(viol as f64 + 0.5 * xm.len() as f64);
        for &a in &xm {
            mat[((b ^ a) as usize, b as usize)] -= cr(0.5);
        }
    }
    Ok(Hamiltonian { mat, n, w0: checks.w0(), w1: 0, source: checks.name.clone(), checks: Some(checks.clone()) })
}

/// Number of violated Z checks on a classical configuration.
pub fn classical_energy(x: &BinaryVector, checks: &CheckFamily) -> Result<usize> {
    if !checks.is_classical() {
        return Err(Error::NotClassical);
    }
    if x.n() != checks.n {
        return Err(Error::DimensionMismatch { expected: checks.n, got: x.n() });
    }
    Ok(checks.z_masks().iter().filter(|&&c| (c & x.value()).count_ones() % 2 == 1).count())
}

/// Classical energies of all 2^n configurations, indexed by basis value.
pub fn classical_energies(checks: &CheckFamily) -> Result<Vec<f64>> {
    if !checks.is_classical() {
        return Err(Error::NotClassical);
    }
    let zm = checks.z_masks();
    Ok((0..1u64 << checks.n).map(|x| zm.iter().filter(|&&c| (c & x).count_ones() % 2 == 1).count() as f64).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionResult {
    pub gamma: f64,
    pub witness: BinaryVector,
    pub witness_energy: usize,
}

pub const EXPANSION_MAX_N: usize = 20;

/// `gamma = min over 0 < |x| <= delta n of E0(x)/|x|`, scanned in Gray-code
/// order. Ties go to the lexicographically smallest bitstring.
pub fn expansion_scan(checks: &CheckFamily, delta: f64) -> Result<ExpansionResult> {
    if !checks.is_classical() {
        return Err(Error::NotClassical);
    }
    let n = checks.n;
    if n > EXPANSION_MAX_N {
        return Err(Error::EnumerationTooLarge { needed: 1u128 << n, cap: 1u128 << EXPANSION_MAX_N });
    }
    let wmax = (delta * n as f64 + 1e-12).floor() as usize;
    if wmax == 0 {
        return Err(Error::ConfigInvalid(format!("delta {delta} admits no nonzero weight")));
    }
    let zm = checks.z_masks();
    // checks touching each bit position
    let mut touching: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, &c) in zm.iter().enumerate() {
        for (bit, list) in touching.iter_mut().enumerate() {
            if c >> bit & 1 == 1 {
                list.push(k);
            }
        }
    }
    let mut parity = vec![false; zm.len()];
    let mut energy = 0usize;
    let mut x = 0u64;
    let mut best: Option<(usize, usize, u64)> = None;
    for i in 1u64..(1u64 << n) {
        let bit = i.trailing_zeros() as usize;
        x ^= 1 << bit;
        for &k in &touching[bit] {
            parity[k] = !parity[k];
            if parity[k] {
                energy += 1;
            } else {
                energy -= 1;
            }
        }
        let w = x.count_ones() as usize;
        if w > wmax {
            continue;
        }
        let better = match best {
            None => true,
            Some((e, bw, bx)) => {
                let (l, r) = (energy * bw, e * w);
                l < r || (l == r && x < bx)
            }
        };
        if better {
            best = Some((energy, w, x));
        }
    }
    let (e, w, bx) = best.expect("wmax >= 1 guarantees a candidate");
    Ok(ExpansionResult { gamma: e as f64 / w as f64, witness: BinaryVector::from_value(n, bx), witness_energy: e })
}

#[derive(Debug, Clone)]
pub struct BarrierCertificate {
    pub v: Subspace,
    pub boundary: Subspace,
    pub inner_radius: usize,
    pub boundary_radius: usize,
    pub e_min_v: f64,
    pub e_min_boundary: f64,
    pub kappa: f64,
}

impl BarrierCertificate {
    /// Energy density `E_min(V)/n`.
    pub fn energy_density_eps(&self) -> f64 {
        self.e_min_v / self.v.n() as f64
    }
}

/// V = Pauli ball of radius `inner_radius` around the H0 eigenstate
/// `X^x0 Z^z0 psi0`; boundary = its `boundary_radius` shell.
pub fn barrier_subspace(
    checks: &CheckFamily,
    center: (&BinaryVector, &BinaryVector),
    inner_radius: usize,
    boundary_radius: usize,
    h: &Hamiltonian,
) -> Result<BarrierCertificate> {
    let n = checks.n;
    if center.0.n() != n || center.1.n() != n {
        return Err(Error::CenterOutsideSpace(center.0.n().max(center.1.n())));
    }
    if h.n != n {
        return Err(Error::DimensionMismatch { expected: n, got: h.n });
    }
    if inner_radius + boundary_radius > n {
        return Err(Error::RadiusExceedsN { r: inner_radius + boundary_radius, n });
    }
    let frame = checks.frame();
    let idx = frame.index_of(center.0.value(), center.1.value());
    let seed = Subspace::from_frame(frame, [idx], "center");
    let v = neighborhood(&seed, inner_radius)?.with_label(format!("V_{inner_radius}"));
    let bd = boundary(&v, boundary_radius)?;
    if bd.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    let e_min_v = subspace_min_energy(&v, h)?;
    let e_min_boundary = subspace_min_energy(&bd, h)?;
    Ok(BarrierCertificate {
        v,
        boundary: bd,
        inner_radius,
        boundary_radius,
        e_min_v,
        e_min_boundary,
        kappa: (e_min_boundary - e_min_v) / n as f64,
    })
}

/// Smallest eigenvalue of H compressed to V.
pub fn subspace_min_energy(v: &Subspace, h: &Hamiltonian) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptySubspace);
    }
    if v.ambient_dim() != h.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), got: v.ambient_dim() });
    }
    let compressed = match v.computational_members() {
        Some(idx) => ComplexMatrix::from_fn(idx.len(), idx.len(), |i, j| h.mat[(idx[i], idx[j])]),
        None => v.basis().adjoint() * &h.mat * v.basis(),
    };
    let compressed = (&compressed + compressed.adjoint()) * cr(0.5);
    let (evals, _) = hermitian_eigensystem(&compressed)?;
    Ok(evals[0])
}

/// Gibbs state with its spectral data, so that subspace weights can be
/// evaluated without re-diagonalizing.
#[derive(Debug, Clone)]
pub struct GibbsState {
    pub rho: DensityMatrix,
    pub beta: f64,
    pub log_z: f64,
    /// `-log Z / beta`; undefined at beta = 0.
    pub free_energy: Option<f64>,
    pub evals: Vec<f64>,
    pub evecs: ComplexMatrix,
}

impl GibbsState {
    /// `log tr(e^{-beta H} P_V)`; `-inf` when the weight vanishes.
    pub fn log_weight(&self, v: &Subspace) -> f64 {
        let p = v.trace_with(self.rho.mat()).re;
        if p <= 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log_z + p.ln()
        }
    }

    /// `F(V) = -(1/beta) log tr(e^{-beta H} P_V)`.
    pub fn subspace_free_energy(&self, v: &Subspace) -> Option<f64> {
        if self.beta > 0.0 {
            Some(-self.log_weight(v) / self.beta)
        } else {
            None
        }
    }
}

/// `rho = e^{-beta H} / Z` through the eigensystem, shifted by the ground energy.
pub fn gibbs_state(h: &Hamiltonian, beta: f64) -> Result<GibbsState> {
    if beta < 0.0 || beta.is_nan() {
        return Err(Error::BetaNegative(beta));
    }
    let (evals, evecs) = match h.diagonal() {
        // diagonal H: eigenvectors are basis states, sorted by energy
        Some(diag) => {
            let mut idx: Vec<usize> = (0..diag.len()).collect();
            idx.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
            let d = diag.len();
            let mut u = ComplexMatrix::zeros(d, d);
            for (k, &i) in idx.iter().enumerate() {
                u[(i, k)] = cr(1.0);
            }
            (idx.iter().map(|&i| diag[i]).collect::<Vec<f64>>(), u)
        }
        None => hermitian_eigensystem(&h.mat)?,
    };
    let e0 = evals[0];
    let w: Vec<f64> = evals.iter().map(|e| (-beta * (e - e0)).exp()).collect();
    let zs: f64 = w.iter().sum();
    let log_z = -beta * e0 + zs.ln();
    let rho = match h.diagonal() {
        Some(diag) => ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(diag.len(), diag.iter().map(|e| cr((-beta * (e - e0)).exp() / zs)))),
        None => {
            let r = crate::numerics::hermitian_function(&evals, &evecs, |e| (-beta * (e - e0)).exp() / zs);
            (&r + r.adjoint()) * cr(0.5)
        }
    };
    let free_energy = if beta > 0.0 { Some(-log_z / beta) } else { None };
    Ok(GibbsState { rho: DensityMatrix::new_unchecked(rho, h.n), beta, log_z, free_energy, evals, evecs })
}

/// Embed a `2^k x 2^k` operator acting on the sorted qubit set `support`.
pub fn embed_local(n: usize, support: &[usize], local: &ComplexMatrix) -> ComplexMatrix {
    let d = 1usize << n;
    let k = support.len();
    let masks: Vec<u64> = support.iter().map(|&q| qubit_mask(n, q)).collect();
    let full_mask: u64 = masks.iter().fold(0, |a, m| a | m);
    // local index uses support[0] as the most significant bit
    let local_of = |b: u64| -> usize {
        let mut li = 0usize;
        for m in &masks {
            li = (li << 1) | ((b & m != 0) as usize);
        }
        li
    };
    let spread = |li: usize| -> u64 {
        let mut b = 0u64;
        for (t, m) in masks.iter().enumerate() {
            if li >> (k - 1 - t) & 1 == 1 {
                b |= m;
            }
        }
        b
    };
    let mut out = ComplexMatrix::zeros(d, d);
    for col in 0..d as u64 {
        let rest = col & !full_mask;
        let lc = local_of(col);
        for lr in 0..(1usize << k) {
            let v = local[(lr, lc)];
            if v != ZERO {
                out[((rest | spread(lr)) as usize, col as usize)] += v;
            }
        }
    }
    out
}

/// `V = sum_l V_l` with Gaussian Hermitian terms on the given supports,
/// rescaled so that `||V|| = g n`.
pub fn random_local_perturbation(n: usize, term_supports: &[Vec<usize>], g: f64, seed: u64) -> Result<Hamiltonian> {
    let d = 1usize << n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = ComplexMatrix::zeros(d, d);
    let mut w1 = 0;
    for s in term_supports {
        let mut s = s.clone();
        s.sort_unstable();
        s.dedup();
        if let Some(&q) = s.iter().find(|&&q| q >= n) {
            return Err(Error::SupportOutOfRange { index: q, n });
        }
        w1 = w1.max(s.len());
        let k = 1usize << s.len();
        let gm = ComplexMatrix::from_fn(k, k, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
        let herm = (&gm + gm.adjoint()) * cr(0.5);
        total += embed_local(n, &s, &herm);
    }
    let nrm = operator_norm(&total);
    let mat = if g == 0.0 || nrm == 0.0 { ComplexMatrix::zeros(d, d) } else { total * cr(g * n as f64 / nrm) };
    Ok(Hamiltonian { mat, n, w0: 0, w1, source: format!("perturbation(g={g},seed={seed})"), checks: None })
}

/// Single-qubit supports {0}, {1}, ..., {n-1}.
pub fn single_site_supports(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|q| vec![q]).collect()
}

/// Max `||[A, B]||` entry-wise proxy used for commutation checks.
pub fn commutator_residual(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a * b - b * a).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Hermiticity residual of a Hamiltonian.
pub fn hamiltonian_residual(h: &Hamiltonian) -> f64 {
    hermitian_residual(&h.mat)
}
