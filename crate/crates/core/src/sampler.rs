//! Local Metropolis channels whose fixed point is the Gibbs state of a
//! commuting-projector Hamiltonian.

use crate::channel::{apply_channel, KrausChannel, SparseOp};
use crate::error::{Error, Result};
use crate::model::{gibbs_state, Hamiltonian};
use crate::numerics::{cr, trace_norm, DensityMatrix};
use crate::pauli::{qubit_mask, BinaryVector, PauliKind, PauliString};

pub const DEFAULT_ATTEMPT_PROB: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Flavor {
    X,
    Z,
}

impl Flavor {
    pub fn kind(self) -> PauliKind {
        match self {
            Flavor::X => PauliKind::X,
            Flavor::Z => PauliKind::Z,
        }
    }
}

fn acceptance(beta: f64, de: f64) -> f64 {
    if de <= 0.0 {
        1.0
    } else {
        (-beta * de).exp()
    }
}

fn check_prob(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!("attempt probability {q} not in (0,1]")))
    }
}

/// Single-site bit-flip Metropolis channel for a diagonal Hamiltonian:
/// `K_flip = sum_x sqrt(q a(x)) |x+e><x|`, `K_stay = sum_x sqrt(1 - q a(x)) |x><x|`.
pub fn metropolis_site_channel(h: &Hamiltonian, beta: f64, site: usize, attempt_prob: f64) -> Result<KrausChannel> {
    check_prob(attempt_prob)?;
    if beta < 0.0 {
        return Err(Error::BetaNegative(beta));
    }
    if site >= h.n {
        return Err(Error::SupportOutOfRange { index: site, n: h.n });
    }
    let e = h.diagonal().ok_or(Error::NotDiagonal)?;
    let d = e.len();
    let m = qubit_mask(h.n, site) as usize;
    let mut flip = Vec::with_capacity(d);
    let mut stay = Vec::with_capacity(d);
    for x in 0..d {
        let a = attempt_prob * acceptance(beta, e[x ^ m] - e[x]);
        flip.push((x ^ m, x, cr(a.sqrt())));
        stay.push((x, x, cr((1.0 - a).max(0.0).sqrt())));
    }
    let ops = vec![SparseOp::from_triplets(d, flip), SparseOp::from_triplets(d, stay)];
    let ops = ops.into_iter().filter(|k| k.nnz() > 0).collect();
    Ok(KrausChannel::from_sparse(h.n, ops)?.with_label(format!("metropolis(site={site},beta={beta})")))
}

/// `sum_T c_T prod_{j in T} C_j` as a sparse operator; `coef[T]` indexed by subset bitmask.
fn check_polynomial(n: usize, checks: &[PauliString], coef: &[f64]) -> SparseOp {
    let d = 1usize << n;
    let mut trip = Vec::new();
    for (t, &c) in coef.iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let mut p = PauliString::identity(n);
        for (j, ch) in checks.iter().enumerate() {
            if t >> j & 1 == 1 {
                p = p.compose(ch);
            }
        }
        for b in 0..d as u64 {
            let (to, amp) = p.column_entry(b);
            trip.push((to as usize, b as usize, amp * cr(c)));
        }
    }
    SparseOp::from_triplets(d, trip)
}

/// Energy-resolved single-Pauli Metropolis channel for a CSS Hamiltonian:
/// `K_w = sqrt(q min(1, e^{-beta w})) sigma_site P_w` over energy jumps `w`,
/// where `P_w` is built from the syndromes of the checks the flip toggles.
pub fn css_metropolis_channel(h0: &Hamiltonian, beta: f64, site: usize, flavor: Flavor, attempt_prob: f64) -> Result<KrausChannel> {
    css_metropolis_with_jumps(h0, beta, site, flavor, attempt_prob).map(|(c, _)| c)
}

/// As [`css_metropolis_channel`], also returning the energy jumps present.
pub fn css_metropolis_with_jumps(h0: &Hamiltonian, beta: f64, site: usize, flavor: Flavor, attempt_prob: f64) -> Result<(KrausChannel, Vec<i64>)> {
    check_prob(attempt_prob)?;
    if beta < 0.0 {
        return Err(Error::BetaNegative(beta));
    }
    let fam = h0.checks.as_ref().ok_or(Error::NotCommuting)?;
    let n = fam.n;
    if site >= n {
        return Err(Error::SupportOutOfRange { index: site, n });
    }
    // the flip toggles checks of the opposite type that touch the site
    let adjacent: Vec<PauliString> = match flavor {
        Flavor::X => fam
            .z_checks
            .iter()
            .filter(|s| s.contains(&site))
            .map(|s| PauliString::from_parts(BinaryVector::zeros(n), BinaryVector::from_support(n, s)))
            .collect(),
        Flavor::Z => fam
            .x_checks
            .iter()
            .filter(|s| s.contains(&site))
            .map(|s| PauliString::from_parts(BinaryVector::from_support(n, s), BinaryVector::zeros(n)))
            .collect(),
    };
    for (i, a) in adjacent.iter().enumerate() {
        for b in &adjacent[i + 1..] {
            if !a.commutes_with(b) {
                return Err(Error::NotCommuting);
            }
        }
    }
    let m = adjacent.len();
    if m == 0 {
        return Err(Error::TrivialFlip { site });
    }
    if m > 16 {
        return Err(Error::GroupTooLarge(m));
    }
    // projector onto syndrome s: 2^-m sum_T prod_{j in T} (-1)^{s_j} C_j;
    // flipping changes the energy by w = m - 2 |s|
    let mut by_jump: std::collections::BTreeMap<i64, Vec<f64>> = std::collections::BTreeMap::new();
    let norm = 1.0 / (1u64 << m) as f64;
    for s in 0u64..(1 << m) {
        let w = m as i64 - 2 * s.count_ones() as i64;
        let coef = by_jump.entry(w).or_insert_with(|| vec![0.0; 1 << m]);
        for (t, c) in coef.iter_mut().enumerate() {
            let sign = if (s & t as u64).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            *c += sign * norm;
        }
    }
    let sigma = SparseOp::pauli(&PauliString::single(n, site, flavor.kind()));
    let mut ops = Vec::new();
    let mut stay_coef = vec![0.0; 1 << m];
    let mut jumps = Vec::new();
    for (&w, coef) in &by_jump {
        let a = attempt_prob * acceptance(beta, w as f64);
        let pw = check_polynomial(n, &adjacent, coef);
        if pw.nnz() == 0 {
            continue;
        }
        jumps.push(w);
        ops.push(sigma.mul(&pw).scale(cr(a.sqrt())));
        let s = (1.0 - a).max(0.0).sqrt();
        for (acc, c) in stay_coef.iter_mut().zip(coef) {
            *acc += s * c;
        }
    }
    let stay = check_polynomial(n, &adjacent, &stay_coef);
    if stay.nnz() > 0 {
        ops.push(stay);
    }
    let ch = KrausChannel::from_sparse(n, ops)?.with_label(format!("css_metropolis(site={site},{flavor:?},beta={beta})"));
    Ok((ch, jumps))
}

/// `||M(rho) - rho||_1`.
pub fn fixed_point_residual(c: &KrausChannel, rho: &DensityMatrix) -> Result<f64> {
    let img = apply_channel(c, rho)?;
    trace_norm(&(img.mat() - rho.mat()))
}

/// Channel for one (site, flavor): CSS construction when the Hamiltonian
/// carries checks, plain bit-flip Metropolis for other diagonal ones.
pub fn site_channel(h: &Hamiltonian, beta: f64, site: usize, flavor: Flavor, attempt_prob: f64) -> Result<KrausChannel> {
    match (&h.checks, flavor) {
        (Some(_), _) => css_metropolis_channel(h, beta, site, flavor, attempt_prob),
        (None, Flavor::X) => metropolis_site_channel(h, beta, site, attempt_prob),
        (None, Flavor::Z) => Err(Error::TrivialFlip { site }),
    }
}

/// Ordered channels `(site, flavor)` for each site, each flavor, repeated,
/// all verified to fix the Gibbs state within 1e-9.
pub fn sweep_schedule(
    h: &Hamiltonian,
    beta: f64,
    sites: &[usize],
    flavors: &[Flavor],
    repetitions: usize,
    attempt_prob: f64,
) -> Result<Vec<KrausChannel>> {
    if sites.is_empty() || flavors.is_empty() || repetitions == 0 {
        return Err(Error::EmptySchedule);
    }
    let gibbs = gibbs_state(h, beta)?;
    let mut round = Vec::with_capacity(sites.len() * flavors.len());
    for &s in sites {
        for &f in flavors {
            round.push(site_channel(h, beta, s, f, attempt_prob)?);
        }
    }
    for (index, c) in round.iter().enumerate() {
        let residual = fixed_point_residual(c, &gibbs.rho)?;
        if residual > 1e-9 {
            return Err(Error::MixedFixedPoints { index, residual });
        }
    }
    let mut out = Vec::with_capacity(round.len() * repetitions);
    for _ in 0..repetitions {
        out.extend(round.iter().cloned());
    }
    Ok(out)
}

/// Flavors that act non-trivially on `site`.
pub fn active_flavors(h: &Hamiltonian, site: usize) -> Vec<Flavor> {
    match &h.checks {
        None => vec![Flavor::X],
        Some(f) => {
            let mut v = Vec::new();
            if f.z_checks.iter().any(|s| s.contains(&site)) {
                v.push(Flavor::X);
            }
            if f.x_checks.iter().any(|s| s.contains(&site)) {
                v.push(Flavor::Z);
            }
            v
        }
    }
}

/// Full sweep over every site and each active flavor.
pub fn full_sweep(h: &Hamiltonian, beta: f64, attempt_prob: f64) -> Result<Vec<KrausChannel>> {
    let gibbs = gibbs_state(h, beta)?;
    let mut out = Vec::new();
    for s in 0..h.n {
        for f in active_flavors(h, s) {
            let c = site_channel(h, beta, s, f, attempt_prob)?;
            let residual = fixed_point_residual(&c, &gibbs.rho)?;
            if residual > 1e-9 {
                return Err(Error::MixedFixedPoints { index: out.len(), residual });
            }
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(Error::EmptySchedule);
    }
    Ok(out)
}
