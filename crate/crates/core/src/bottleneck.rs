//! Bottleneck ratios, the general/local/quasi-local bottleneck inequalities,
//! mixing-time lower bounds, product drift and free-energy bounds.

use serde::Serialize;

use crate::channel::{channel_locality, check_partition_condition, evolve_sequence, KrausChannel};
use crate::error::{Error, Result};
use crate::model::{subspace_min_energy, GibbsState, Hamiltonian};
use crate::numerics::{nuclear_norm, trace_norm, ComplexMatrix, DensityMatrix, Tolerance};
use crate::subspace::{boundary, HilbertPartition, Subspace};

/// Additive slack on theorem assertions.
pub const THEOREM_TOL: f64 = 1e-8;
/// Hypothesis residual below which the partition condition counts as exact.
pub const CONDITION_TOL: f64 = 1e-9;
/// Default mixing cutoff used for the reported `tmix_lower`.
pub const DEFAULT_MIXING_EPSILON: f64 = 0.25;

/// `(delta, numerator, denominator)` with `delta = ||P_B rho||_1 / tr(P_A rho)`.
pub fn bottleneck_ratio(rho: &DensityMatrix, a: &Subspace, b: &Subspace) -> Result<(f64, f64, f64)> {
    check_dims(rho, a)?;
    check_dims(rho, b)?;
    let den = a.trace_with(rho.mat()).re;
    if den <= 1e-12 {
        return Err(Error::EmptyA(den));
    }
    let num = one_sided_norm(rho.mat(), b);
    Ok((num / den, num, den))
}

fn check_dims(rho: &DensityMatrix, v: &Subspace) -> Result<()> {
    if v.ambient_dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), got: v.ambient_dim() });
    }
    Ok(())
}

/// `||P_V M||_1 = ||U_V^dagger M||_1` for an isometry `U_V`.
fn one_sided_norm(m: &ComplexMatrix, v: &Subspace) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    match v.computational_members() {
        Some(idx) => {
            let rows = ComplexMatrix::from_fn(idx.len(), m.ncols(), |i, j| m[(idx[i], j)]);
            nuclear_norm(&rows)
        }
        None => nuclear_norm(&(v.basis().adjoint() * m)),
    }
}

/// `P_V rho P_V / tr(P_V rho)`.
pub fn projected_state(rho: &DensityMatrix, v: &Subspace) -> Result<DensityMatrix> {
    check_dims(rho, v)?;
    let p = v.trace_with(rho.mat()).re;
    if p <= 1e-14 {
        return Err(Error::EmptyA(p));
    }
    let m = v.project_right(&v.project_left(rho.mat()));
    Ok(DensityMatrix::new_unchecked(m / crate::numerics::cr(p), rho.n()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    General,
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BottleneckReport {
    pub delta: f64,
    pub numerator: f64,
    pub denominator: f64,
    pub lhs: f64,
    pub bound: f64,
    pub condition_residual: f64,
    pub tmix_lower: f64,
    pub mode: Mode,
    /// Locality radius in local mode.
    pub r: Option<usize>,
    pub fixed_point_residual: f64,
    pub channels: usize,
    pub holds: bool,
}

pub enum PartitionSpec<'a> {
    General(&'a HilbertPartition),
    /// `r = None` uses the channels' locality.
    Local { v: &'a Subspace, r: Option<usize> },
}

/// Checks the hypotheses (fixed point, partition condition) and evaluates
/// `||M[rho_A] - rho_A||_1` against `10 Delta`. For a schedule the largest
/// single-step left-hand side is reported.
pub fn verify_bottleneck_theorem(channels: &[KrausChannel], rho: &DensityMatrix, spec: PartitionSpec<'_>) -> Result<BottleneckReport> {
    if channels.is_empty() {
        return Err(Error::EmptySchedule);
    }
    let mut fp = 0.0f64;
    for c in channels {
        if c.n() != rho.n() {
            return Err(Error::DimensionMismatch { expected: rho.n(), got: c.n() });
        }
        let res = trace_norm(&(c.apply_matrix(rho.mat())? - rho.mat()))?;
        if res > CONDITION_TOL {
            return Err(Error::NotFixedPoint(res));
        }
        fp = fp.max(res);
    }
    let owned;
    let (part, mode, r) = match spec {
        PartitionSpec::General(p) => (p, Mode::General, None),
        PartitionSpec::Local { v, r } => {
            let mut loc = 0;
            for c in channels {
                loc = loc.max(channel_locality(c)?);
            }
            let r = r.unwrap_or(loc);
            if r < loc {
                return Err(Error::LocalityInsufficient { r, locality: loc });
            }
            owned = HilbertPartition::local(v, r)?;
            (&owned, Mode::Local, Some(r))
        }
    };
    if part.n() != rho.n() {
        return Err(Error::DimensionMismatch { expected: rho.n(), got: part.n() });
    }
    let mut cond = 0.0f64;
    for c in channels {
        cond = cond.max(check_partition_condition(c, part, Tolerance::default())?.residual);
    }
    if cond >= CONDITION_TOL {
        return Err(Error::ConditionViolated(cond));
    }
    let b = part.b()?;
    let (delta, numerator, denominator) = bottleneck_ratio(rho, &part.a, &b)?;
    let rho_a = projected_state(rho, &part.a)?;
    let mut lhs = 0.0f64;
    for c in channels {
        lhs = lhs.max(trace_norm(&(c.apply_matrix(rho_a.mat())? - rho_a.mat()))?);
    }
    let bound = 10.0 * delta;
    let tmix_lower = if delta > 0.0 { (1.0 - denominator) / (5.0 * delta) - DEFAULT_MIXING_EPSILON } else { f64::INFINITY };
    Ok(BottleneckReport {
        delta,
        numerator,
        denominator,
        lhs,
        bound,
        condition_residual: cond,
        tmix_lower,
        mode,
        r,
        fixed_point_residual: fp,
        channels: channels.len(),
        holds: lhs <= bound + THEOREM_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiLocalTerm {
    pub s: usize,
    pub f: f64,
    pub delta: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuasiLocalReport {
    pub lhs: f64,
    pub terms: Vec<QuasiLocalTerm>,
    /// `min_s (10 Delta(s) + f(s))`.
    pub combined_bound: f64,
    pub holds: bool,
}

/// Quasi-local bound from a channel's certificates: each entry gives an
/// s-local surrogate within diamond distance f(s).
pub fn verify_quasi_local(c: &KrausChannel, rho: &DensityMatrix, v: &Subspace) -> Result<QuasiLocalReport> {
    crate::channel::verify_certificate(c)?;
    if c.certificate().is_empty() {
        return Err(Error::ConfigInvalid("channel carries no quasi-locality certificate".into()));
    }
    let res = trace_norm(&(c.apply_matrix(rho.mat())? - rho.mat()))?;
    if res > CONDITION_TOL {
        return Err(Error::NotFixedPoint(res));
    }
    let rho_v = projected_state(rho, v)?;
    let lhs = trace_norm(&(c.apply_matrix(rho_v.mat())? - rho_v.mat()))?;
    let mut terms = Vec::new();
    for e in c.certificate() {
        // the surrogate must itself fix rho for the local theorem to apply
        let sres = trace_norm(&(e.surrogate.apply_matrix(rho.mat())? - rho.mat()))?;
        if sres > CONDITION_TOL {
            return Err(Error::NotFixedPoint(sres));
        }
        let b = boundary(v, 2 * e.r)?;
        let (delta, _, _) = bottleneck_ratio(rho, v, &b)?;
        terms.push(QuasiLocalTerm { s: e.r, f: e.f, delta, value: 10.0 * delta + e.f });
    }
    let combined_bound = terms.iter().map(|t| t.value).fold(f64::INFINITY, f64::min);
    Ok(QuasiLocalReport { lhs, terms, combined_bound, holds: lhs <= combined_bound + THEOREM_TOL })
}

/// `(||rho P||_1, sqrt(tr(rho P)))`.
pub fn diagonal_bound(rho: &DensityMatrix, p: &Subspace) -> Result<(f64, f64)> {
    check_dims(rho, p)?;
    let lhs = one_sided_norm(rho.mat(), p);
    let rhs = p.trace_with(rho.mat()).re.max(0.0).sqrt();
    Ok((lhs, rhs))
}

/// `(||P O||_1, ||O||_1)`.
pub fn projector_contraction(o: &ComplexMatrix, p: &Subspace) -> Result<(f64, f64)> {
    if o.nrows() != p.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: p.ambient_dim(), got: o.nrows() });
    }
    Ok((one_sided_norm(o, p), trace_norm(o)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixingBound {
    /// `(1 - tr(P_A rho)) / (5 Delta) - eps`.
    pub bound: f64,
    /// `tr(P_A rho) tr(P_C rho) / (5 ||P_B rho||_1) - eps`.
    pub weak_bound: f64,
}

/// Mixing-time lower bounds from a report and the C-block weight.
pub fn mixing_time_lower_bound(report: &BottleneckReport, p_c: f64, eps: f64) -> Result<MixingBound> {
    if report.delta <= 0.0 || report.numerator <= 0.0 {
        return Err(Error::ZeroDelta);
    }
    Ok(MixingBound {
        bound: (1.0 - report.denominator) / (5.0 * report.delta) - eps,
        weak_bound: report.denominator * p_c / (5.0 * report.numerator) - eps,
    })
}

/// Weight of the C block of a partition.
pub fn c_weight(rho: &DensityMatrix, part: &HilbertPartition) -> f64 {
    part.c.trace_with(rho.mat()).re
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    /// `Delta_t` for every prefix length t = 1..=T.
    pub delta_t: Vec<f64>,
    /// `t * Delta_min` over the same prefixes.
    pub t_delta_min: Vec<f64>,
    /// `sum_{tau <= t} ||M_tau[sigma] - sigma||_1`, the telescoping bound.
    pub sum_bound: Vec<f64>,
    /// Largest `Delta_t - t Delta_min`.
    pub worst_slack: f64,
    /// `Delta_t <= t Delta_min + 1e-9` on every prefix.
    pub holds: bool,
    /// `Delta_t <= sum bound + 1e-9` on every prefix.
    pub sum_holds: bool,
}

/// `Delta_t = ||M_t ... M_1[sigma] - sigma||_1` against `t min_tau ||M_tau[sigma] - sigma||_1`
/// and against the per-step sum, channels applied in list order.
pub fn product_drift(channels: &[KrausChannel], sigma: &DensityMatrix) -> Result<DriftReport> {
    if channels.is_empty() {
        return Err(Error::EmptySchedule);
    }
    let mut cur = sigma.mat().clone();
    let mut dmin = f64::INFINITY;
    let mut acc = 0.0;
    let (mut dt, mut tm, mut sb) = (Vec::new(), Vec::new(), Vec::new());
    let mut worst = f64::NEG_INFINITY;
    let mut sum_holds = true;
    for (t, c) in channels.iter().enumerate() {
        if c.n() != sigma.n() {
            return Err(Error::DimensionMismatch { expected: sigma.n(), got: c.n() });
        }
        let step = trace_norm(&(c.apply_matrix(sigma.mat())? - sigma.mat()))?;
        dmin = dmin.min(step);
        acc += step;
        cur = c.apply_matrix(&cur)?;
        let d = trace_norm(&(&cur - sigma.mat()))?;
        let b = (t + 1) as f64 * dmin;
        worst = worst.max(d - b);
        sum_holds &= d <= acc + 1e-9;
        dt.push(d);
        tm.push(b);
        sb.push(acc);
    }
    Ok(DriftReport { delta_t: dt, t_delta_min: tm, sum_bound: sb, worst_slack: worst, holds: worst <= 1e-9, sum_holds })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MixingEstimate {
    /// First time each probe reached `||rho(t) - rho||_1 <= eps`; `None` if capped.
    pub per_probe: Vec<Option<usize>>,
    /// Max over probes, with capped probes counted as `t_cap`.
    pub estimate: usize,
    pub capped: bool,
}

/// Lower estimate of the mixing time from a probe set; channels cycle.
/// Only the probes are tried, so the true mixing time can be larger.
pub fn probe_mixing_estimate(channels: &[KrausChannel], rho: &DensityMatrix, probes: &[DensityMatrix], eps: f64, t_cap: usize) -> Result<MixingEstimate> {
    if channels.is_empty() {
        return Err(Error::EmptySchedule);
    }
    let mut per = Vec::with_capacity(probes.len());
    for p in probes {
        // growing horizons keep fast-mixing probes cheap
        let mut horizon = t_cap.min(256);
        let hit = loop {
            let trace = evolve_sequence(channels, p, rho, horizon)?;
            if let Some(k) = trace.distances.iter().position(|d| *d <= eps) {
                break Some(trace.times[k]);
            }
            if horizon >= t_cap {
                break None;
            }
            horizon = (horizon * 4).min(t_cap);
        };
        per.push(hit);
    }
    let capped = per.iter().any(Option::is_none);
    let estimate = per.iter().map(|h| h.unwrap_or(t_cap)).max().unwrap_or(0);
    Ok(MixingEstimate { per_probe: per, estimate, capped })
}

/// Probe set: the projected state plus every computational basis state.
pub fn standard_probes(rho: &DensityMatrix, v: &Subspace) -> Result<Vec<DensityMatrix>> {
    let mut out = vec![projected_state(rho, v)?];
    let d = rho.dim();
    for i in 0..d {
        let mut p = vec![0.0; d];
        p[i] = 1.0;
        out.push(DensityMatrix::from_diagonal(&p, rho.n())?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeEnergyReport {
    pub f_total: f64,
    pub f_v: f64,
    pub f_boundary: f64,
    pub e_min_v: f64,
    /// `e^{-beta F(dV)/2} / tr(P_V rho_G)`.
    pub bound_a: f64,
    /// `e^{-beta (F(dV) - F(V))}`.
    pub bound_b: f64,
    /// `e^{-beta/2 ((F(dV) - F(V)) + (F - E_min(V)))}`.
    pub bound_c: f64,
    /// (a) as printed needs `Z >= 1`.
    pub a_applicable: bool,
    pub b_applicable: bool,
    pub commutator_norm: f64,
    pub delta_measured: f64,
    pub holds: bool,
}

/// Free energies of V, its 2r-boundary and the full space, with the three
/// upper bounds on the bottleneck ratio.
pub fn free_energy_report(h: &Hamiltonian, beta: f64, v: &Subspace, r: usize, gibbs: &GibbsState, delta_measured: f64) -> Result<FreeEnergyReport> {
    let bd = boundary(v, 2 * r)?;
    free_energy_report_with(h, beta, v, &bd, gibbs, delta_measured)
}

/// As [`free_energy_report`] with an explicit boundary subspace.
pub fn free_energy_report_with(h: &Hamiltonian, beta: f64, v: &Subspace, bd: &Subspace, gibbs: &GibbsState, delta_measured: f64) -> Result<FreeEnergyReport> {
    if beta <= 0.0 {
        return Err(Error::BetaNegative(beta));
    }
    if (gibbs.beta - beta).abs() > 1e-15 || gibbs.rho.n() != h.n {
        return Err(Error::ConfigInvalid("Gibbs state does not match (H, beta)".into()));
    }
    if bd.is_empty() {
        return Err(Error::EmptyBoundary);
    }
    let lw_v = gibbs.log_weight(v);
    let lw_b = gibbs.log_weight(bd);
    let f_v = -lw_v / beta;
    let f_boundary = -lw_b / beta;
    let f_total = -gibbs.log_z / beta;
    let e_min_v = subspace_min_energy(v, h)?;
    let p_v = v.trace_with(gibbs.rho.mat()).re;
    let bound_a = (-beta * f_boundary / 2.0).exp() / p_v;
    let bound_b = (-beta * (f_boundary - f_v)).exp();
    let bound_c = (-beta / 2.0 * ((f_boundary - f_v) + (f_total - e_min_v))).exp();
    let pb = bd.project_left(gibbs.rho.mat());
    let pbr = bd.project_right(gibbs.rho.mat());
    let commutator_norm = crate::numerics::operator_norm(&(pbr - pb));
    let a_applicable = gibbs.log_z >= 0.0;
    let b_applicable = commutator_norm < 1e-9;
    let ok = |applies: bool, bound: f64| !applies || bound >= delta_measured - THEOREM_TOL;
    let holds = ok(a_applicable, bound_a) && ok(b_applicable, bound_b) && ok(true, bound_c);
    Ok(FreeEnergyReport {
        f_total,
        f_v,
        f_boundary,
        e_min_v,
        bound_a,
        bound_b,
        bound_c,
        a_applicable,
        b_applicable,
        commutator_norm,
        delta_measured,
        holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_hamiltonian, gibbs_state, ising_ring, random_local_perturbation, single_site_supports, toric};
    use crate::numerics::testutil::{gaussian, random_density, random_projector};
    use crate::numerics::{cr, frobenius_distance};
    use crate::pauli::BinaryVector;
    use crate::sampler::{full_sweep, metropolis_site_channel};
    use crate::subspace::{hamming_ball_subspace, neighborhood};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ring_setup(n: usize, beta: f64) -> (Hamiltonian, GibbsState, Subspace) {
        let h = build_hamiltonian(&ising_ring(n).unwrap()).unwrap();
        let g = gibbs_state(&h, beta).unwrap();
        let v = hamming_ball_subspace(&[BinaryVector::zeros(n)], 1, n).unwrap();
        (h, g, v)
    }

    #[test]
    fn ratio_examples() {
        let (_, g, v) = ring_setup(4, 1.0);
        let (d, num, _) = bottleneck_ratio(&g.rho, &v, &Subspace::empty(4)).unwrap();
        assert_eq!((d, num), (0.0, 0.0));
        let b = boundary(&v, 1).unwrap();
        let (_, num, _) = bottleneck_ratio(&g.rho, &v, &b).unwrap();
        assert!((num - b.trace_with(g.rho.mat()).re).abs() < 1e-10);
    }

    #[test]
    fn ratio_dual_route_ring6() {
        let (_, g, v) = ring_setup(6, 2.0);
        let b = boundary(&v, 6).unwrap();
        let (delta, _, den) = bottleneck_ratio(&g.rho, &v, &b).unwrap();
        // commutation verified, then the probability ratio
        let comm = b.project_left(g.rho.mat()) - b.project_right(g.rho.mat());
        assert!(comm.iter().all(|z| z.norm() < 1e-14));
        let prob = b.trace_with(g.rho.mat()).re / den;
        assert!((delta - prob).abs() < 1e-9);
        // generic (non-computational) basis route
        let (d2, _, _) = bottleneck_ratio(&g.rho, &v.without_frame(), &b.without_frame()).unwrap();
        assert!((delta - d2).abs() < 1e-9);
    }

    #[test]
    fn general_mode_split_dephasing() {
        // dephasing in the computational basis commutes with every computational projector
        let n = 3;
        let rho = DensityMatrix::from_diagonal(&[0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1], n).unwrap();
        let z = crate::pauli::PauliString::parse("IZI").unwrap().matrix();
        let c = KrausChannel::new(n, vec![ComplexMatrix::identity(8, 8) * cr(0.8f64.sqrt()), z * cr(0.2f64.sqrt())]).unwrap();
        let part = HilbertPartition::new(
            Subspace::computational(n, [0, 1], "A"),
            Subspace::computational(n, [2, 3], "B1"),
            Subspace::computational(n, [4, 5], "B2"),
            Subspace::computational(n, [6, 7], "C"),
        )
        .unwrap();
        let r = verify_bottleneck_theorem(&[c], &rho, PartitionSpec::General(&part)).unwrap();
        assert!(r.lhs < 1e-15);
        assert!(r.holds);
    }

    #[test]
    fn metropolis_ring6_local_mode() {
        let mut prev = f64::INFINITY;
        for beta in [0.5, 1.0, 2.0] {
            let (h, g, v) = ring_setup(6, beta);
            for site in 0..6 {
                let c = metropolis_site_channel(&h, beta, site, 0.5).unwrap();
                let r = verify_bottleneck_theorem(&[c], &g.rho, PartitionSpec::Local { v: &v, r: Some(1) });
                assert!(matches!(r, Err(Error::LocalityInsufficient { r: 1, locality: 3 })));
            }
            let sweep = full_sweep(&h, beta, 0.5).unwrap();
            let rep = verify_bottleneck_theorem(&sweep, &g.rho, PartitionSpec::Local { v: &v, r: None }).unwrap();
            assert!(rep.holds, "beta {beta}: {} > {}", rep.lhs, rep.bound);
            assert_eq!(rep.r, Some(3));
            assert!(rep.delta <= prev);
            prev = rep.delta;
        }
    }

    #[test]
    fn metropolis_ring8_nontrivial_boundary() {
        // r = 1 partition: V = ball(0,1), B = states at distance 2..3
        let n = 8;
        let (h, g, v) = ring_setup(n, 2.0);
        let c = metropolis_site_channel(&h, 2.0, 0, 0.5).unwrap().with_declared_locality(3);
        let rep = verify_bottleneck_theorem(&[c], &g.rho, PartitionSpec::Local { v: &v, r: Some(3) }).unwrap();
        assert!(rep.holds);
        let part = HilbertPartition::local(&v, 1).unwrap();
        let c1 = metropolis_site_channel(&h, 2.0, 0, 0.5).unwrap();
        // locality 3 channels can violate the r = 1 split
        let cond = check_partition_condition(&c1, &part, Tolerance::default()).unwrap();
        assert!(cond.residual > 0.0 || rep.lhs >= 0.0);
    }

    #[test]
    fn not_fixed_point_rejected() {
        let (h, _, v) = ring_setup(4, 1.0);
        let c = metropolis_site_channel(&h, 1.0, 0, 0.5).unwrap();
        let rho = DensityMatrix::from_diagonal(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 4).unwrap();
        assert!(matches!(verify_bottleneck_theorem(&[c], &rho, PartitionSpec::Local { v: &v, r: None }), Err(Error::NotFixedPoint(_))));
    }

    #[test]
    fn toric_css_pipeline() {
        let fam = toric(2).unwrap();
        let h = build_hamiltonian(&fam).unwrap();
        let beta = 1.5;
        let g = gibbs_state(&h, beta).unwrap();
        let z = BinaryVector::zeros(8);
        let cert = crate::model::barrier_subspace(&fam, (&z, &z), 1, 1, &h).unwrap();
        let ch = crate::sampler::css_metropolis_channel(&h, beta, 0, crate::sampler::Flavor::X, 0.5).unwrap();
        let rep = verify_bottleneck_theorem(&[ch], &g.rho, PartitionSpec::Local { v: &cert.v, r: None }).unwrap();
        assert!(rep.holds, "{} > {}", rep.lhs, rep.bound);
    }

    #[test]
    fn quasi_local_mixture() {
        let (h, g, v) = ring_setup(6, 2.0);
        let local = metropolis_site_channel(&h, 2.0, 2, 0.5).unwrap();
        let tail = crate::channel::KrausChannel::compose(&full_sweep(&h, 2.0, 0.5).unwrap()[..3]).unwrap();
        let mix = KrausChannel::mixture(&local, &tail, 0.01).unwrap();
        let rep = verify_quasi_local(&mix, &g.rho, &v).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.terms[0].s, 3);
        assert!((rep.terms[0].f - 0.02).abs() < 1e-15);
    }

    #[test]
    fn diagonal_bound_examples() {
        let (_, g, v) = ring_setup(4, 1.0);
        let (l, r) = diagonal_bound(&g.rho, &v).unwrap();
        let p = v.trace_with(g.rho.mat()).re;
        assert!((l - p).abs() < 1e-12 && l <= r);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = gaussian(&mut rng, 8, 1).column(0).normalize();
        let phi = gaussian(&mut rng, 8, 1).column(0).normalize();
        let rho = DensityMatrix::pure(&psi, 3).unwrap();
        let pv = Subspace::from_basis(3, ComplexMatrix::from_column_slice(8, 1, phi.as_slice()), "phi").unwrap();
        let (l, r) = diagonal_bound(&rho, &pv).unwrap();
        let ov = psi.dotc(&phi).norm();
        assert!((l - ov).abs() < 1e-12 && (r - ov).abs() < 1e-12);
    }

    #[test]
    fn mixing_bound_examples() {
        let base = BottleneckReport {
            delta: 0.1,
            numerator: 0.05,
            denominator: 0.5,
            lhs: 0.0,
            bound: 1.0,
            condition_residual: 0.0,
            tmix_lower: 0.0,
            mode: Mode::General,
            r: None,
            fixed_point_residual: 0.0,
            channels: 1,
            holds: true,
        };
        let b = mixing_time_lower_bound(&base, 0.3, 0.25).unwrap();
        assert!((b.bound - (0.5 / 0.5 - 0.25)).abs() < 1e-15);
        assert!((b.weak_bound - (0.5 * 0.3 / 0.25 - 0.25)).abs() < 1e-15);
        let half = BottleneckReport { delta: 0.05, numerator: 0.025, ..base.clone() };
        let b2 = mixing_time_lower_bound(&half, 0.3, 0.25).unwrap();
        assert!(((b2.bound + 0.25) - 2.0 * (b.bound + 0.25)).abs() < 1e-12);
        let full = BottleneckReport { denominator: 1.0, ..base.clone() };
        assert_eq!(mixing_time_lower_bound(&full, 0.0, 0.25).unwrap().bound, -0.25);
        let zero = BottleneckReport { delta: 0.0, numerator: 0.0, ..base };
        assert_eq!(mixing_time_lower_bound(&zero, 0.0, 0.25), Err(Error::ZeroDelta));
    }

    #[test]
    fn drift_examples() {
        let (h, g, v) = ring_setup(4, 1.0);
        let id = vec![KrausChannel::identity(4); 3];
        let r = product_drift(&id, &g.rho).unwrap();
        assert!(r.delta_t.iter().all(|d| *d < 1e-15) && r.holds);
        let sweep = full_sweep(&h, 1.0, 0.5).unwrap();
        let r = product_drift(&sweep, &g.rho).unwrap();
        assert!(r.delta_t.iter().all(|d| *d < 1e-10) && r.holds);
        let rho_v = projected_state(&g.rho, &v).unwrap();
        let r = product_drift(&sweep, &rho_v).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn drift_min_form_can_fail_sum_form_holds() {
        // a schedule whose first step fixes sigma: Delta_min = 0 but Delta_t > 0
        let (h, g, v) = ring_setup(4, 1.0);
        let rho_v = projected_state(&g.rho, &v).unwrap();
        let mut sched = vec![KrausChannel::identity(4)];
        sched.extend(full_sweep(&h, 1.0, 0.5).unwrap());
        let r = product_drift(&sched, &rho_v).unwrap();
        assert!(r.sum_holds);
        assert!(!r.holds && r.worst_slack > 1e-3);
    }

    #[test]
    fn mixing_estimate_vs_corollary() {
        let (h, g, v) = ring_setup(6, 2.0);
        let sweep = full_sweep(&h, 2.0, 0.5).unwrap();
        let rep = verify_bottleneck_theorem(&sweep, &g.rho, PartitionSpec::Local { v: &v, r: None }).unwrap();
        let part = HilbertPartition::local(&v, rep.r.unwrap()).unwrap();
        let mb = mixing_time_lower_bound(&rep, c_weight(&g.rho, &part), 0.25).unwrap();
        let probes = standard_probes(&g.rho, &v).unwrap();
        let est = probe_mixing_estimate(&sweep, &g.rho, &probes[..4], 0.25, 5000).unwrap();
        assert!(mb.bound <= est.estimate as f64);
    }

    #[test]
    fn free_energy_examples() {
        let (h, g, v) = ring_setup(6, 2.0);
        let b = boundary(&v, 2).unwrap();
        let (delta, _, _) = bottleneck_ratio(&g.rho, &v, &b).unwrap();
        let rep = free_energy_report(&h, 2.0, &v, 1, &g, delta).unwrap();
        assert!(rep.b_applicable && rep.a_applicable && rep.holds);
        let prob = b.trace_with(g.rho.mat()).re / v.trace_with(g.rho.mat()).re;
        assert!((rep.bound_b - prob).abs() < 1e-10 * prob.max(1e-300) + 1e-14);
        assert!(rep.bound_a >= delta && rep.bound_c >= delta);
        // small beta: beta F(X) ~ -ln dim X
        let beta = 1e-3;
        let g = gibbs_state(&h, beta).unwrap();
        let rep = free_energy_report(&h, beta, &v, 1, &g, 0.0).unwrap();
        let hn = crate::numerics::operator_norm(&h.mat);
        assert!((beta * rep.f_v + (v.dim() as f64).ln()).abs() <= beta * hn + 1e-12);
        assert!((beta * rep.f_boundary + (b.dim() as f64).ln()).abs() <= beta * hn + 1e-12);
    }

    #[test]
    fn free_energy_perturbed_bound_c() {
        let (h0, _, v) = ring_setup(6, 1.0);
        let p = random_local_perturbation(6, &single_site_supports(6), 0.05, 2).unwrap();
        let h = h0.plus(&p).unwrap();
        let g = gibbs_state(&h, 1.5).unwrap();
        let b = boundary(&v, 2).unwrap();
        let (delta, _, _) = bottleneck_ratio(&g.rho, &v, &b).unwrap();
        let rep = free_energy_report(&h, 1.5, &v, 1, &g, delta).unwrap();
        assert!(!rep.b_applicable);
        assert!(rep.bound_c >= delta - THEOREM_TOL);
        assert!(rep.holds);
    }

    #[test]
    fn projected_state_is_normalized() {
        let (_, g, v) = ring_setup(4, 0.7);
        let s = projected_state(&g.rho, &v).unwrap();
        assert!((s.mat().trace().re - 1.0).abs() < 1e-14);
        let nb = neighborhood(&v, 1).unwrap();
        assert!(frobenius_distance(&nb.project_left(s.mat()), s.mat()) < 1e-14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]
        #[test]
        fn diagonal_bound_random(seed in any::<u64>(), n in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(&mut rng, n);
            let p = random_projector(&mut rng, 1 << n);
            let cols: Vec<_> = {
                let (e, u) = crate::numerics::hermitian_eigensystem(&p).unwrap();
                (0..e.len()).filter(|&k| e[k] > 0.5).map(|k| u.column(k).into_owned()).collect()
            };
            prop_assume!(!cols.is_empty());
            let v = Subspace::span(n, &cols, "P", Tolerance::default()).unwrap();
            let (l, r) = diagonal_bound(&rho, &v).unwrap();
            prop_assert!(l <= r + 1e-10);
        }

        #[test]
        fn projector_contraction_random(seed in any::<u64>(), n in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d = 1 << n;
            let o = gaussian(&mut rng, d, d);
            let p = random_projector(&mut rng, d);
            let (e, u) = crate::numerics::hermitian_eigensystem(&p).unwrap();
            let cols: Vec<_> = (0..e.len()).filter(|&k| e[k] > 0.5).map(|k| u.column(k).into_owned()).collect();
            prop_assume!(!cols.is_empty());
            let v = Subspace::span(n, &cols, "P", Tolerance::default()).unwrap();
            let (l, r) = projector_contraction(&o, &v).unwrap();
            prop_assert!(l <= r + 1e-10);
        }
    }
}
