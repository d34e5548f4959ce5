//! Subcommand pipelines behind the command-line runner.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::bottleneck::{
    bottleneck_ratio, c_weight, diagonal_bound, free_energy_report_with, mixing_time_lower_bound, probe_mixing_estimate, product_drift, projected_state, standard_probes, verify_bottleneck_theorem,
    PartitionSpec,
};
use crate::config::{ExperimentConfig, Subcommand};
use crate::error::{Error, Result};
use crate::markov::{classical_bottleneck_report, glauber_chain, StatePartition};
use crate::model::{barrier_subspace, build_hamiltonian, classical_energies, gibbs_state, parse_check_file, random_local_perturbation, registry, single_site_supports, CheckFamily, Hamiltonian};
use crate::numerics::hermitian_eigensystem;
use crate::sampler::{fixed_point_residual, full_sweep};
use crate::stability::{coefficient_cascade, default_delta_e, family_for, stability_sweep, sweep_csv, tail_amplitudes, verify_block_tridiagonal, BarrierSpec, SWEEP_CSV_HEADER};
use crate::subspace::{neighborhood, HilbertPartition, Subspace};

/// Environment variable overriding the worker count.
pub const JOBS_ENV: &str = "BOTTLENECKLAB_JOBS";

/// Column names of bottleneck report rows.
pub const REPORT_COLUMNS: [&str; 13] = ["delta", "numerator", "denominator", "lhs", "bound", "cond_residual", "tmix_lower", "beta", "g", "n", "model", "mode", "r"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub instance: String,
    pub invariant: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub instance: String,
    pub code: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub csv: String,
    pub report: Value,
    pub fit: Option<Value>,
    pub failures: Vec<Failure>,
    pub skipped: Vec<Skipped>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Default)]
struct Outcome {
    rows: Vec<Vec<String>>,
    detail: Option<Value>,
    failures: Vec<Failure>,
    skipped: Option<Skipped>,
}

impl Outcome {
    fn skip(instance: &str, e: Error) -> Self {
        Outcome { skipped: Some(Skipped { instance: instance.to_string(), code: e.code().to_string(), reason: e.to_string() }), ..Default::default() }
    }

    fn check(&mut self, ok: bool, instance: &str, invariant: &str, detail: String) {
        if !ok {
            self.failures.push(Failure { instance: instance.to_string(), invariant: invariant.to_string(), detail });
        }
    }
}

fn f(x: f64) -> String {
    format!("{x:.12e}")
}

fn resolve_models(cfg: &ExperimentConfig) -> Result<Vec<CheckFamily>> {
    let mut out = Vec::new();
    for m in &cfg.models {
        out.push(registry(m)?);
    }
    if let Some(p) = &cfg.check_file {
        let text = std::fs::read_to_string(p).map_err(|e| Error::ModelNotFound(format!("{}: {e}", p.display())))?;
        let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("check_file");
        out.push(parse_check_file(&text, name)?);
    }
    Ok(out)
}

/// Pauli ball of radius `inner` around the all-zero frame state.
pub fn center_ball(fam: &CheckFamily, inner: usize) -> Result<Subspace> {
    let frame = fam.frame();
    let idx = frame.index_of(0, 0);
    let seed = Subspace::from_frame(frame, [idx], "center");
    Ok(neighborhood(&seed, inner)?.with_label(format!("V_{inner}")))
}

fn perturbed(h0: &Hamiltonian, g: f64, seed: u64) -> Result<Hamiltonian> {
    if g == 0.0 {
        return Ok(h0.clone());
    }
    h0.plus(&random_local_perturbation(h0.n, &single_site_supports(h0.n), g, seed)?)
}

/// Computes every instance of a subcommand on the current rayon pool.
pub fn execute(cmd: Subcommand, cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate(cmd)?;
    if cmd == Subcommand::StabilitySweep {
        return execute_sweep(cfg);
    }
    let models = resolve_models(cfg)?;
    let (header, outcomes): (Vec<&str>, Vec<Outcome>) = match cmd {
        Subcommand::VerifyQuantum => {
            let grid = grid4(&models, &cfg.betas, &cfg.gs, &cfg.seeds);
            (REPORT_COLUMNS.to_vec(), grid.par_iter().map(|(m, b, g, s)| verify_quantum(cfg, m, *b, *g, *s)).collect())
        }
        Subcommand::VerifyClassical => {
            let grid = grid4(&models, &cfg.betas, &[0.0], &[0]);
            (REPORT_COLUMNS.to_vec(), grid.par_iter().map(|(m, b, _, _)| verify_classical(cfg, m, *b)).collect())
        }
        Subcommand::BarrierScan => {
            let grid = grid4(&models, &cfg.betas, &[0.0], &[0]);
            (BARRIER_COLUMNS.to_vec(), grid.par_iter().map(|(m, b, _, _)| barrier_scan(cfg, m, *b)).collect())
        }
        Subcommand::TailCheck => {
            let grid = grid4(&models, &[0.0], &cfg.gs, &cfg.seeds);
            (TAIL_COLUMNS.to_vec(), grid.par_iter().map(|(m, _, g, s)| tail_check(cfg, m, *g, *s)).collect())
        }
        Subcommand::MixingCompare => {
            let grid = grid4(&models, &cfg.betas, &[0.0], &[0]);
            (MIXING_COLUMNS.to_vec(), grid.par_iter().map(|(m, b, _, _)| mixing_compare(cfg, m, *b)).collect())
        }
        Subcommand::ModelInfo => (INFO_COLUMNS.to_vec(), models.par_iter().map(model_info).collect()),
        Subcommand::StabilitySweep => unreachable!("handled above"),
    };
    assemble(cmd, cfg, &header, outcomes, None)
}

fn grid4<'a>(models: &'a [CheckFamily], betas: &[f64], gs: &[f64], seeds: &[u64]) -> Vec<(&'a CheckFamily, f64, f64, u64)> {
    let mut out = Vec::new();
    for m in models {
        for &b in betas {
            for &g in gs {
                for &s in seeds {
                    out.push((m, b, g, s));
                }
            }
        }
    }
    out
}

fn assemble(cmd: Subcommand, cfg: &ExperimentConfig, header: &[&str], outcomes: Vec<Outcome>, fit: Option<Value>) -> Result<RunOutput> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(|e| Error::Io(e.to_string()))?;
    let mut failures = Vec::new();
    let mut skipped = Vec::new();
    let mut details = Vec::new();
    for o in outcomes {
        for r in &o.rows {
            w.write_record(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        failures.extend(o.failures);
        skipped.extend(o.skipped);
        if let Some(d) = o.detail {
            details.push(d);
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    let csv = String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))?;
    let report = json!({
        "subcommand": cmd.name(),
        "config": cfg,
        "instances": details,
        "skipped": skipped,
        "failures": failures,
    });
    Ok(RunOutput { csv, report, fit, failures, skipped })
}

fn verify_quantum(cfg: &ExperimentConfig, fam: &CheckFamily, beta: f64, g: f64, seed: u64) -> Outcome {
    let inst = format!("{} beta={beta} g={g} seed={seed}", fam.name);
    match verify_quantum_inner(cfg, fam, beta, g, seed, &inst) {
        Ok(o) => o,
        Err(e) => Outcome::skip(&inst, e),
    }
}

fn verify_quantum_inner(cfg: &ExperimentConfig, fam: &CheckFamily, beta: f64, g: f64, seed: u64, inst: &str) -> Result<Outcome> {
    let h0 = build_hamiltonian(fam)?;
    let h = perturbed(&h0, g, seed)?;
    let sweep = full_sweep(&h, beta, cfg.attempt_prob)?;
    let gibbs = gibbs_state(&h, beta)?;
    let mut o = Outcome::default();
    let mut fp = 0.0f64;
    for c in &sweep {
        fp = fp.max(fixed_point_residual(c, &gibbs.rho)?);
    }
    o.check(fp < 1e-10, inst, "sampler_fixed_point", format!("residual {fp:.3e}"));
    let v = center_ball(fam, cfg.barrier.inner)?;
    let rep = verify_bottleneck_theorem(&sweep, &gibbs.rho, PartitionSpec::Local { v: &v, r: cfg.radius })?;
    o.check(rep.lhs <= rep.bound + cfg.tolerances.theorem, inst, "bottleneck_local", format!("lhs {:.6e} > 10 delta {:.6e}", rep.lhs, rep.bound));
    let part = HilbertPartition::local(&v, rep.r.unwrap_or(0))?;
    let b = part.b()?;
    let (dl, dr) = diagonal_bound(&gibbs.rho, &b)?;
    o.check(dl <= dr + cfg.tolerances.theorem, inst, "diagonal_bound", format!("{dl:.6e} > {dr:.6e}"));
    let rho_a = projected_state(&gibbs.rho, &part.a)?;
    let drift = product_drift(&sweep, &rho_a)?;
    o.check(drift.worst_slack <= cfg.tolerances.drift, inst, "product_drift", format!("slack {:.3e}", drift.worst_slack));
    o.check(drift.sum_holds, inst, "product_drift_sum", "telescoping sum bound violated".into());
    o.rows.push(vec![
        f(rep.delta),
        f(rep.numerator),
        f(rep.denominator),
        f(rep.lhs),
        f(rep.bound),
        f(rep.condition_residual),
        f(rep.tmix_lower),
        beta.to_string(),
        g.to_string(),
        fam.n.to_string(),
        fam.name.clone(),
        "local".into(),
        rep.r.map(|r| r.to_string()).unwrap_or_default(),
    ]);
    o.detail = Some(json!({"instance": inst, "report": rep, "sampler_fixed_point": fp, "diagonal_bound": [dl, dr], "drift": drift}));
    Ok(o)
}

fn verify_classical(cfg: &ExperimentConfig, fam: &CheckFamily, beta: f64) -> Outcome {
    let inst = format!("{} beta={beta}", fam.name);
    let run = || -> Result<Outcome> {
        if !fam.is_classical() {
            return Err(Error::NotClassical);
        }
        let energies = classical_energies(fam)?;
        let chain = glauber_chain(&energies, beta, cfg.laziness)?;
        // single-flip moves: r = 1
        let part = StatePartition::hamming(fam.n, 0, cfg.barrier.inner, 1)?;
        let rep = classical_bottleneck_report(&chain, &part)?;
        let mut o = Outcome::default();
        o.check(rep.lhs <= rep.bound + cfg.tolerances.classical, &inst, "bottleneck_classical", format!("lhs {:.6e} > {:.6e}", rep.lhs, rep.bound));
        let delta = rep.pi_b / rep.pi_a;
        // drift bound: TV(M^t pi_A, pi) >= 1 - pi(A) - t pi(B)/pi(A)
        let tmix = if delta > 0.0 { (1.0 - rep.pi_a - cfg.mixing.epsilon) / delta } else { f64::INFINITY };
        o.rows.push(vec![
            f(delta),
            f(rep.pi_b),
            f(rep.pi_a),
            f(rep.lhs),
            f(rep.bound),
            f(rep.condition_residual),
            f(tmix),
            beta.to_string(),
            "0".into(),
            fam.n.to_string(),
            fam.name.clone(),
            "classical".into(),
            "1".into(),
        ]);
        o.detail = Some(json!({"instance": inst, "lhs": rep.lhs, "bound": rep.bound, "pi_a": rep.pi_a, "pi_b": rep.pi_b, "pi_c": rep.pi_c, "holds": rep.holds}));
        Ok(o)
    };
    run().unwrap_or_else(|e| Outcome::skip(&inst, e))
}

const BARRIER_COLUMNS: [&str; 17] =
    ["model", "n", "beta", "inner", "boundary", "dim_v", "dim_boundary", "e_min_v", "e_min_boundary", "kappa", "eps", "delta", "bound_a", "bound_b", "bound_c", "a_applicable", "b_applicable"];

fn barrier_scan(cfg: &ExperimentConfig, fam: &CheckFamily, beta: f64) -> Outcome {
    let inst = format!("{} beta={beta}", fam.name);
    let run = || -> Result<Outcome> {
        let h0 = build_hamiltonian(fam)?;
        let z = crate::pauli::BinaryVector::zeros(fam.n);
        let cert = barrier_subspace(fam, (&z, &z), cfg.barrier.inner, cfg.barrier.boundary, &h0)?;
        let gibbs = gibbs_state(&h0, beta)?;
        let (delta, _, _) = bottleneck_ratio(&gibbs.rho, &cert.v, &cert.boundary)?;
        let fe = free_energy_report_with(&h0, beta, &cert.v, &cert.boundary, &gibbs, delta)?;
        let mut o = Outcome::default();
        let tol = cfg.tolerances.theorem;
        o.check(fe.bound_c >= delta - tol, &inst, "free_energy_c", format!("{:.6e} < {delta:.6e}", fe.bound_c));
        o.check(!fe.a_applicable || fe.bound_a >= delta - tol, &inst, "free_energy_a", format!("{:.6e} < {delta:.6e}", fe.bound_a));
        o.check(!fe.b_applicable || fe.bound_b >= delta - tol, &inst, "free_energy_b", format!("{:.6e} < {delta:.6e}", fe.bound_b));
        o.rows.push(vec![
            fam.name.clone(),
            fam.n.to_string(),
            beta.to_string(),
            cfg.barrier.inner.to_string(),
            cfg.barrier.boundary.to_string(),
            cert.v.dim().to_string(),
            cert.boundary.dim().to_string(),
            f(cert.e_min_v),
            f(cert.e_min_boundary),
            f(cert.kappa),
            f(cert.energy_density_eps()),
            f(delta),
            f(fe.bound_a),
            f(fe.bound_b),
            f(fe.bound_c),
            fe.a_applicable.to_string(),
            fe.b_applicable.to_string(),
        ]);
        o.detail = Some(json!({"instance": inst, "kappa": cert.kappa, "eps": cert.energy_density_eps(), "free_energy": fe}));
        Ok(o)
    };
    run().unwrap_or_else(|e| Outcome::skip(&inst, e))
}

const TAIL_COLUMNS: [&str; 15] =
    ["model", "n", "g", "seed", "eps1", "eps2", "delta_e", "q_star", "lambda", "lemma_bound", "max_amplitude", "low_states", "block_residual", "max_cascade_c_top", "upper_dim"];

/// `eps2` leaving room for one shell of width just above `w0 w1`.
pub fn auto_eps2(eps1: f64, w0w1: f64, g: f64, n: usize) -> f64 {
    eps1 + 2.0 * (w0w1 + 0.5) / n as f64 + 4.0 * g
}

fn tail_check(cfg: &ExperimentConfig, fam: &CheckFamily, g: f64, seed: u64) -> Outcome {
    let inst = format!("{} g={g} seed={seed}", fam.name);
    let run = || -> Result<Outcome> {
        let h0 = build_hamiltonian(fam)?;
        let v = random_local_perturbation(fam.n, &single_site_supports(fam.n), g, seed)?;
        let h = h0.plus(&v)?;
        let w0w1 = (h0.w0 * v.w1.max(1)) as f64;
        let eps1 = cfg.tail.eps1;
        let eps2 = cfg.tail.eps2.unwrap_or_else(|| auto_eps2(eps1, w0w1, g, fam.n));
        let de = match cfg.tail.delta_e {
            Some(d) => d,
            None => default_delta_e(w0w1, eps1, eps2, g, fam.n)?,
        };
        let (recs, shells) = tail_amplitudes(&h, &h0, eps1, eps2, g, de)?;
        let block = verify_block_tridiagonal(&v, &shells);
        let mut o = Outcome::default();
        for r in &recs {
            o.check(r.holds, &inst, "tail_bound", format!("state {} amplitude {:.6e} > {:.6e}", r.eigen_index, r.amplitude, r.lemma_bound));
        }
        o.check(block.passed, &inst, "block_tridiagonal", format!("residual {:.3e}", block.residual));
        let (evals, evecs) = hermitian_eigensystem(&h.mat)?;
        let mut c_top = 0.0f64;
        let mut cascades = Vec::new();
        for r in &recs {
            let c = coefficient_cascade(&h, &h0, evals[r.eigen_index], &evecs.column(r.eigen_index).into_owned(), &shells)?;
            o.check(c.holds, &inst, "coefficient_cascade", format!("state {} c_> {:.6e} > {:.6e}", r.eigen_index, c.coefficients.last().unwrap(), c.recursion_product));
            c_top = c_top.max(*c.coefficients.last().unwrap());
            cascades.push(c);
        }
        let lambda = recs.first().map(|r| r.lambda).unwrap_or(crate::stability::lambda_g(eps1, eps2, g, shells.delta_e));
        let max_amp = recs.iter().map(|r| r.amplitude).fold(0.0, f64::max);
        o.rows.push(vec![
            fam.name.clone(),
            fam.n.to_string(),
            g.to_string(),
            seed.to_string(),
            f(eps1),
            f(eps2),
            f(shells.delta_e),
            shells.q_star().to_string(),
            f(lambda),
            f((-lambda * fam.n as f64).exp()),
            f(max_amp),
            recs.len().to_string(),
            f(block.residual),
            f(c_top),
            shells.upper().dim().to_string(),
        ]);
        o.detail = Some(json!({"instance": inst, "records": recs, "block": block, "cascades": cascades}));
        Ok(o)
    };
    run().unwrap_or_else(|e| Outcome::skip(&inst, e))
}

const MIXING_COLUMNS: [&str; 12] = ["model", "n", "beta", "delta", "p_a", "p_c", "epsilon", "bound", "weak_bound", "estimate", "capped", "probes"];

fn mixing_compare(cfg: &ExperimentConfig, fam: &CheckFamily, beta: f64) -> Outcome {
    let inst = format!("{} beta={beta}", fam.name);
    let run = || -> Result<Outcome> {
        let h0 = build_hamiltonian(fam)?;
        let sweep = full_sweep(&h0, beta, cfg.attempt_prob)?;
        let gibbs = gibbs_state(&h0, beta)?;
        let v = center_ball(fam, cfg.barrier.inner)?;
        let rep = verify_bottleneck_theorem(&sweep, &gibbs.rho, PartitionSpec::Local { v: &v, r: cfg.radius })?;
        let part = HilbertPartition::local(&v, rep.r.unwrap_or(0))?;
        let p_c = c_weight(&gibbs.rho, &part);
        let eps = cfg.mixing.epsilon;
        let mb = mixing_time_lower_bound(&rep, p_c, eps)?;
        let probes = standard_probes(&gibbs.rho, &v)?;
        let est = probe_mixing_estimate(&sweep, &gibbs.rho, &probes, eps, cfg.mixing.t_cap)?;
        let mut o = Outcome::default();
        o.check(mb.bound <= est.estimate as f64, &inst, "mixing_bound", format!("bound {:.6e} > estimate {}", mb.bound, est.estimate));
        o.rows.push(vec![
            fam.name.clone(),
            fam.n.to_string(),
            beta.to_string(),
            f(rep.delta),
            f(rep.denominator),
            f(p_c),
            f(eps),
            f(mb.bound),
            f(mb.weak_bound),
            est.estimate.to_string(),
            est.capped.to_string(),
            probes.len().to_string(),
        ]);
        o.detail = Some(json!({"instance": inst, "report": rep, "bound": mb, "estimate": est}));
        Ok(o)
    };
    run().unwrap_or_else(|e| Outcome::skip(&inst, e))
}

const INFO_COLUMNS: [&str; 9] = ["model", "n", "z_checks", "x_checks", "w0", "max_support", "classical", "ground_degeneracy", "max_energy"];

fn model_info(fam: &CheckFamily) -> Outcome {
    let frame = fam.frame();
    let e = fam.frame_energies(&frame);
    let ground = e.iter().filter(|x| **x == 0.0).count();
    let max_e = e.iter().copied().fold(0.0, f64::max);
    let mut o = Outcome::default();
    o.rows.push(vec![
        fam.name.clone(),
        fam.n.to_string(),
        fam.z_checks.len().to_string(),
        fam.x_checks.len().to_string(),
        fam.w0().to_string(),
        fam.max_support().to_string(),
        fam.is_classical().to_string(),
        ground.to_string(),
        max_e.to_string(),
    ]);
    o.detail = Some(json!({"model": fam.name, "z_checks": fam.z_checks, "x_checks": fam.x_checks}));
    o
}

fn execute_sweep(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let barrier = BarrierSpec { inner: cfg.barrier.inner, boundary: cfg.barrier.boundary };
    let mut outcomes = Vec::new();
    let mut fits = Vec::new();
    for model in &cfg.models {
        // fail fast on unknown names before the grid runs
        family_for(model, cfg.ns[0])?;
        let res = stability_sweep(model, barrier, &cfg.betas, &cfg.gs, &cfg.ns, &cfg.seeds)?;
        let csv = sweep_csv(&res.rows)?;
        let mut o = Outcome::default();
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(csv.as_bytes());
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Io(e.to_string()))?;
            o.rows.push(rec.iter().map(str::to_string).collect());
        }
        for r in &res.rows {
            let inst = format!("{} n={} beta={} g={} seed={}", r.model, r.n, r.beta, r.g, r.seed);
            if let Some(ok) = r.chain_holds {
                o.check(ok, &inst, "bound_chain", format!("delta {:.6e} > chain {:.6e}", r.delta, r.bound_chain));
            }
            o.check(r.barrier_persists, &inst, "barrier_persistence", format!("{:.6e} < {:.6e} - gn", r.barrier_min_perturbed, r.barrier_min_unperturbed));
        }
        for fit in &res.fits {
            if fit.asserted {
                o.check(fit.passed, &format!("{} beta={} g={}", fit.model, fit.beta, fit.g), "fit_slope", format!("b = {:.6e}", fit.b));
            }
        }
        if res.no_admissible_points {
            o.skipped = Some(Skipped { instance: model.clone(), code: Error::NoAdmissiblePoints.code().into(), reason: "no admissible (beta, g) point; trend reported only".into() });
        }
        o.detail = Some(json!({"model": model, "rows": res.rows}));
        fits.push(json!({"model": model, "fits": res.fits, "no_admissible_points": res.no_admissible_points}));
        outcomes.push(o);
    }
    assemble(Subcommand::StabilitySweep, cfg, &SWEEP_CSV_HEADER, outcomes, Some(Value::Array(fits)))
}

/// Worker count: environment variable, then flag, then config, then all cores.
pub fn effective_jobs(flag: Option<usize>, cfg: &ExperimentConfig) -> Result<usize> {
    if let Ok(v) = std::env::var(JOBS_ENV) {
        let j: usize = v.trim().parse().map_err(|_| Error::ConfigInvalid(format!("{JOBS_ENV} must be a positive integer, got {v:?}")))?;
        if j == 0 {
            return Err(Error::ConfigInvalid(format!("{JOBS_ENV} must be >= 1")));
        }
        return Ok(j);
    }
    Ok(flag.or(cfg.jobs).unwrap_or_else(rayon::current_num_threads).max(1))
}

/// Runs a subcommand on a dedicated pool and writes the artifacts to `out`.
pub fn run(cmd: Subcommand, cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<RunOutput> {
    cfg.validate(cmd)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| Error::ConfigInvalid(e.to_string()))?;
    let output = pool.install(|| execute(cmd, cfg))?;
    write_artifacts(&output, out)?;
    Ok(output)
}

pub fn write_artifacts(output: &RunOutput, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("report.csv"), &output.csv)?;
    let pretty = |v: &Value| serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()));
    std::fs::write(out.join("report.json"), pretty(&output.report)? + "\n")?;
    if let Some(fit) = &output.fit {
        std::fs::write(out.join("fit.json"), pretty(fit)? + "\n")?;
    }
    write_failures(out, &output.failures, None)
}

/// `failures.json`, also used for errors that abort a run.
pub fn write_failures(out: &Path, failures: &[Failure], error: Option<&Error>) -> Result<()> {
    std::fs::create_dir_all(out)?;
    let first = failures.first().map(|f| format!("{}: {} ({})", f.invariant, f.instance, f.detail));
    let v = json!({
        "passed": failures.is_empty() && error.is_none(),
        "error": error.map(|e| json!({"code": e.code(), "message": e.to_string()})),
        "first_violation": first,
        "failures": failures,
    });
    std::fs::write(out.join("failures.json"), serde_json::to_string_pretty(&v).map_err(|e| Error::Io(e.to_string()))? + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_quantum_ising4() {
        let cfg = ExperimentConfig::from_json(r#"{"models": ["ising_ring(4)"], "betas": [1.0]}"#).unwrap();
        let out = execute(Subcommand::VerifyQuantum, &cfg).unwrap();
        assert!(out.passed(), "{:?} {:?}", out.failures, out.skipped);
        assert_eq!(out.csv.lines().count(), 2);
        assert_eq!(out.csv.lines().next().unwrap(), REPORT_COLUMNS.join(","));
    }

    #[test]
    fn perturbed_sampler_is_skipped_with_code() {
        let cfg = ExperimentConfig::from_json(r#"{"models": ["ising_ring(4)"], "gs": [0.01]}"#).unwrap();
        let out = execute(Subcommand::VerifyQuantum, &cfg).unwrap();
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].code, "NotDiagonal");
    }

    #[test]
    fn unknown_model() {
        let cfg = ExperimentConfig::from_json(r#"{"models": ["nope(3)"]}"#).unwrap();
        assert!(matches!(execute(Subcommand::ModelInfo, &cfg), Err(Error::ModelNotFound(_))));
    }

    #[test]
    fn jobs_do_not_change_output() {
        let cfg = ExperimentConfig::from_json(r#"{"models": ["ising_ring(4)", "repetition(5)"], "betas": [0.5, 2.0]}"#).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let a = run(Subcommand::VerifyClassical, &cfg, &dir.path().join("a"), 1).unwrap();
        let b = run(Subcommand::VerifyClassical, &cfg, &dir.path().join("b"), 4).unwrap();
        assert_eq!(a.csv, b.csv);
        assert!(a.passed());
        let fa = std::fs::read(dir.path().join("a/report.json")).unwrap();
        let fb = std::fs::read(dir.path().join("b/report.json")).unwrap();
        assert_eq!(fa, fb);
    }
}
