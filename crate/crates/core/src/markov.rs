//! Classical Markov chains in the column-stochastic convention:
//! `M[i][j]` is the probability of moving from state `j` to state `i`, so a
//! distribution evolves as `pi -> M pi`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "# column-stochastic: entry (i,j) = P(next = i | current = j); every column sums to 1";

/// Column-stochastic matrix stored by columns, exact zeros omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticMatrix {
    dim: usize,
    cols: Vec<Vec<(usize, f64)>>,
}

impl StochasticMatrix {
    /// Validates non-negativity and unit column sums (1e-12).
    pub fn from_columns(dim: usize, cols: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if cols.len() != dim || dim == 0 {
            return Err(Error::InvalidStochastic(format!("expected {dim} columns, got {}", cols.len())));
        }
        let mut clean = Vec::with_capacity(dim);
        for (j, col) in cols.into_iter().enumerate() {
            let mut col: Vec<(usize, f64)> = col.into_iter().filter(|e| e.1 != 0.0).collect();
            col.sort_by_key(|e| e.0);
            let mut s = 0.0;
            for w in col.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidStochastic(format!("duplicate entry in column {j}")));
                }
            }
            for &(i, v) in &col {
                if i >= dim || !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::InvalidStochastic(format!("bad entry ({i},{j}) = {v}")));
                }
                s += v;
            }
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidStochastic(format!("column {j} sums to {s}")));
            }
            clean.push(col);
        }
        Ok(StochasticMatrix { dim, cols: clean })
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NonSquare { rows: m.nrows(), cols: m.ncols() });
        }
        let d = m.nrows();
        let cols = (0..d).map(|j| (0..d).map(|i| (i, m[(i, j)])).collect()).collect();
        Self::from_columns(d, cols)
    }

    pub fn identity(dim: usize) -> Self {
        StochasticMatrix { dim, cols: (0..dim).map(|j| vec![(j, 1.0)]).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn column(&self, j: usize) -> &[(usize, f64)] {
        &self.cols[j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self.cols[j].binary_search_by_key(&i, |e| e.0) {
            Ok(k) => self.cols[j][k].1,
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, v) in col {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// `M p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (j, col) in self.cols.iter().enumerate() {
            let pj = p[j];
            if pj == 0.0 {
                continue;
            }
            for &(i, v) in col {
                out[i] += v * pj;
            }
        }
        out
    }

    /// Dense CSV with a one-line convention header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = w;
        writeln!(w, "{CSV_HEADER}")?;
        let mut cw = csv::Writer::from_writer(w);
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim).map(|j| format!("{:.17e}", self.get(i, j))).collect();
            cw.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        cw.flush()?;
        Ok(())
    }
}

/// Disjoint cover of the state space by A, B1, B2, C.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePartition {
    pub a: Vec<usize>,
    pub b1: Vec<usize>,
    pub b2: Vec<usize>,
    pub c: Vec<usize>,
}

impl StatePartition {
    pub fn new(dim: usize, a: Vec<usize>, b1: Vec<usize>, b2: Vec<usize>, c: Vec<usize>) -> Result<Self> {
        if a.is_empty() || c.is_empty() {
            return Err(Error::InvalidPartition("A and C must be non-empty".into()));
        }
        let mut seen = vec![false; dim];
        for set in [&a, &b1, &b2, &c] {
            for &x in set {
                if x >= dim {
                    return Err(Error::InvalidPartition(format!("state {x} out of range")));
                }
                if seen[x] {
                    return Err(Error::InvalidPartition(format!("state {x} listed twice")));
                }
                seen[x] = true;
            }
        }
        if let Some(x) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidPartition(format!("state {x} not covered")));
        }
        Ok(StatePartition { a, b1, b2, c })
    }

    /// Hamming shells around `center` on n-bit states: A = ball(inner),
    /// B1 = next `r` shells, B2 = the `r` after that, C = rest.
    pub fn hamming(n: usize, center: u64, inner: usize, r: usize) -> Result<Self> {
        let (mut a, mut b1, mut b2, mut c) = (vec![], vec![], vec![], vec![]);
        for x in 0..(1u64 << n) {
            let dist = (x ^ center).count_ones() as usize;
            let s = x as usize;
            if dist <= inner {
                a.push(s);
            } else if dist <= inner + r {
                b1.push(s);
            } else if dist <= inner + 2 * r {
                b2.push(s);
            } else {
                c.push(s);
            }
        }
        StatePartition::new(1 << n, a, b1, b2, c)
    }

    fn labels(&self, dim: usize) -> Vec<u8> {
        let mut l = vec![0u8; dim];
        for (k, set) in [&self.a, &self.b1, &self.b2, &self.c].iter().enumerate() {
            for &x in set.iter() {
                l[x] = k as u8;
            }
        }
        l
    }
}

/// Indices of the closed communicating classes.
fn closed_classes(m: &StochasticMatrix) -> Vec<Vec<usize>> {
    let mut g = DiGraph::<(), ()>::with_capacity(m.dim, m.dim * 4);
    let nodes: Vec<_> = (0..m.dim).map(|_| g.add_node(())).collect();
    for (j, col) in m.cols.iter().enumerate() {
        for &(i, _) in col {
            if i != j {
                g.add_edge(nodes[j], nodes[i], ());
            }
        }
    }
    let sccs = tarjan_scc(&g);
    let mut comp = vec![0usize; m.dim];
    for (k, s) in sccs.iter().enumerate() {
        for v in s {
            comp[v.index()] = k;
        }
    }
    let mut closed = Vec::new();
    for (k, s) in sccs.iter().enumerate() {
        let leaks = s.iter().any(|v| m.cols[v.index()].iter().any(|&(i, _)| comp[i] != k));
        if !leaks {
            let mut members: Vec<usize> = s.iter().map(|v| v.index()).collect();
            members.sort_unstable();
            closed.push(members);
        }
    }
    closed.sort();
    closed
}

/// Stationary weights from detailed balance along a spanning tree, if the
/// chain is reversible on the given irreducible class.
fn reversible_stationary(m: &StochasticMatrix, class: &[usize]) -> Option<Vec<f64>> {
    let mut logw = vec![f64::NAN; m.dim];
    let root = class[0];
    logw[root] = 0.0;
    let mut stack = vec![root];
    while let Some(j) = stack.pop() {
        for &(i, v) in &m.cols[j] {
            if i == j || !logw[i].is_nan() {
                continue;
            }
            let back = m.get(j, i);
            if back == 0.0 {
                return None;
            }
            logw[i] = logw[j] + v.ln() - back.ln();
            stack.push(i);
        }
    }
    let top = class.iter().map(|&i| logw[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut pi = vec![0.0; m.dim];
    for &i in class {
        pi[i] = (logw[i] - top).exp();
    }
    let z: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= z;
    }
    // detailed balance on every edge
    for &j in class {
        for &(i, v) in &m.cols[j] {
            let lhs = pi[j] * v;
            let rhs = pi[i] * m.get(j, i);
            if (lhs - rhs).abs() > 1e-13 * lhs.max(rhs).max(1e-300) {
                return None;
            }
        }
    }
    Some(pi)
}

fn l1_residual(m: &StochasticMatrix, pi: &[f64]) -> f64 {
    m.apply(pi).iter().zip(pi).map(|(a, b)| (a - b).abs()).sum()
}

/// The unique stationary distribution.
pub fn stationary_distribution(m: &StochasticMatrix) -> Result<Vec<f64>> {
    let closed = closed_classes(m);
    if closed.len() != 1 {
        return Err(Error::NonUniqueStationary(closed.len()));
    }
    let class = &closed[0];
    if let Some(pi) = reversible_stationary(m, class) {
        if l1_residual(m, &pi) < 1e-10 {
            return Ok(pi);
        }
    }
    // (M - I) restricted to the closed class, last equation replaced by sum = 1
    let k = class.len();
    let pos: std::collections::HashMap<usize, usize> = class.iter().enumerate().map(|(p, &i)| (i, p)).collect();
    let mut a = DMatrix::<f64>::zeros(k, k);
    for (cj, &j) in class.iter().enumerate() {
        for &(i, v) in &m.cols[j] {
            if let Some(&ci) = pos.get(&i) {
                a[(ci, cj)] += v;
            }
        }
        a[(cj, cj)] -= 1.0;
    }
    for cj in 0..k {
        a[(k - 1, cj)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(k);
    rhs[k - 1] = 1.0;
    let sol = a.lu().solve(&rhs).ok_or(Error::NonUniqueStationary(2))?;
    let mut pi = vec![0.0; m.dim];
    for (ci, &i) in class.iter().enumerate() {
        pi[i] = sol[ci].max(0.0);
    }
    let z: f64 = pi.iter().sum();
    for p in pi.iter_mut() {
        *p /= z;
    }
    let res = l1_residual(m, &pi);
    if res >= 1e-10 {
        return Err(Error::AssertionFailed(format!("stationary residual {res:.3e}")));
    }
    Ok(pi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalCondition {
    /// Largest entry moving A into B2 or C, or C into A or B1.
    pub max_forbidden: f64,
    pub passed: bool,
}

/// Structural check; passes only on exact zeros.
pub fn check_classical_condition(m: &StochasticMatrix, part: &StatePartition) -> ClassicalCondition {
    let lab = part.labels(m.dim);
    let mut worst = 0.0f64;
    for &j in &part.a {
        for &(i, v) in &m.cols[j] {
            if lab[i] >= 2 {
                worst = worst.max(v);
            }
        }
    }
    for &j in &part.c {
        for &(i, v) in &m.cols[j] {
            if lab[i] <= 1 {
                worst = worst.max(v);
            }
        }
    }
    ClassicalCondition { max_forbidden: worst, passed: worst == 0.0 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalReport {
    pub lhs: f64,
    pub bound: f64,
    pub pi_a: f64,
    pub pi_b: f64,
    pub pi_c: f64,
    pub condition_residual: f64,
    pub holds: bool,
}

/// `||M pi_A - pi_A||_1` against `2 pi(B) / pi(A)`.
pub fn classical_bottleneck_report(m: &StochasticMatrix, part: &StatePartition) -> Result<ClassicalReport> {
    let cond = check_classical_condition(m, part);
    if !cond.passed {
        return Err(Error::ConditionViolated(cond.max_forbidden));
    }
    let pi = stationary_distribution(m)?;
    classical_report_with(m, part, &pi)
}

/// As [`classical_bottleneck_report`] with a known stationary distribution.
pub fn classical_report_with(m: &StochasticMatrix, part: &StatePartition, pi: &[f64]) -> Result<ClassicalReport> {
    let cond = check_classical_condition(m, part);
    if !cond.passed {
        return Err(Error::ConditionViolated(cond.max_forbidden));
    }
    let mass = |s: &[usize]| s.iter().map(|&i| pi[i]).sum::<f64>();
    let pa = mass(&part.a);
    if pa < 1e-14 {
        return Err(Error::EmptyA(pa));
    }
    let pb = mass(&part.b1) + mass(&part.b2);
    let pc = mass(&part.c);
    let mut pia = vec![0.0; m.dim];
    for &i in &part.a {
        pia[i] = pi[i] / pa;
    }
    let img = m.apply(&pia);
    let lhs: f64 = img.iter().zip(&pia).map(|(a, b)| (a - b).abs()).sum();
    let bound = 2.0 * pb / pa;
    Ok(ClassicalReport { lhs, bound, pi_a: pa, pi_b: pb, pi_c: pc, condition_residual: 0.0, holds: lhs <= bound + 1e-12 })
}

/// `(t, TV(M^t pi_A, pi), ||pi_A - pi||_TV - t * lhs)` for t = 0..=steps.
pub fn classical_drift_profile(m: &StochasticMatrix, part: &StatePartition, steps: usize) -> Result<Vec<(usize, f64, f64)>> {
    let pi = stationary_distribution(m)?;
    let rep = classical_report_with(m, part, &pi)?;
    let mut cur = vec![0.0; m.dim];
    for &i in &part.a {
        cur[i] = pi[i] / rep.pi_a;
    }
    let tv = |p: &[f64]| 0.5 * p.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>();
    let tv0 = tv(&cur);
    let mut out = vec![(0, tv0, tv0)];
    for t in 1..=steps {
        cur = m.apply(&cur);
        out.push((t, tv(&cur), tv0 - t as f64 * rep.lhs));
    }
    Ok(out)
}

pub const MIXING_CAP: u64 = 10_000_000;

fn worst_tv(p: &DMatrix<f64>, pi: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for x in 0..p.ncols() {
        let col = p.column(x);
        let s: f64 = col.iter().zip(pi).map(|(a, b)| (a - b).abs()).sum();
        worst = worst.max(0.5 * s);
    }
    worst
}

/// Smallest t with `max_x TV(M^t e_x, pi) <= eps`, by repeated squaring and
/// bisection on the powers.
pub fn classical_mixing_time(m: &StochasticMatrix, eps: f64) -> Result<u64> {
    if m.dim > 4096 {
        return Err(Error::InvalidStochastic(format!("dimension {} exceeds 4096", m.dim)));
    }
    // without a unique stationary law no delta start ever mixes
    let pi = match stationary_distribution(m) {
        Ok(pi) => pi,
        Err(Error::NonUniqueStationary(_)) => return Err(Error::NotConverged(MIXING_CAP)),
        Err(e) => return Err(e),
    };
    let base = m.to_dense();
    if worst_tv(&DMatrix::identity(m.dim, m.dim), &pi) <= eps {
        return Ok(0);
    }
    // powers[k] = M^(2^k)
    let mut powers = vec![base];
    while worst_tv(powers.last().unwrap(), &pi) > eps {
        let k = powers.len() as u32;
        if (1u64 << (k - 1)) >= MIXING_CAP {
            return Err(Error::NotConverged(MIXING_CAP));
        }
        let last = powers.last().unwrap();
        powers.push(last * last);
    }
    let k = powers.len() - 1;
    if k == 0 {
        return Ok(1);
    }
    // d(2^(k-1)) > eps >= d(2^k)
    let mut t: u64 = 1 << (k - 1);
    let mut cur = powers[k - 1].clone();
    for j in (0..k - 1).rev() {
        let cand = &powers[j] * &cur;
        if worst_tv(&cand, &pi) > eps {
            cur = cand;
            t += 1 << j;
        }
    }
    let t = t + 1;
    if t > MIXING_CAP {
        return Err(Error::NotConverged(MIXING_CAP));
    }
    Ok(t)
}

/// Single-flip Metropolis chain on `m`-bit states with laziness `l`: pick a
/// bit uniformly, accept with `min(1, exp(-beta dE))`, hold with extra
/// probability `l`.
pub fn glauber_chain(energies: &[f64], beta: f64, laziness: f64) -> Result<StochasticMatrix> {
    let dim = energies.len();
    if dim < 2 || !dim.is_power_of_two() || dim > 1 << 12 {
        return Err(Error::InvalidStochastic(format!("state count {dim} must be 2^m with 1 <= m <= 12")));
    }
    if !(0.0..1.0).contains(&laziness) {
        return Err(Error::InvalidStochastic(format!("laziness {laziness} not in [0,1)")));
    }
    if beta < 0.0 {
        return Err(Error::BetaNegative(beta));
    }
    let m = dim.trailing_zeros() as usize;
    let rate = (1.0 - laziness) / m as f64;
    let mut cols = Vec::with_capacity(dim);
    for x in 0..dim {
        let mut col = Vec::with_capacity(m + 1);
        let mut out = 0.0;
        for k in 0..m {
            let y = x ^ (1 << k);
            let de = energies[y] - energies[x];
            let acc = if de <= 0.0 { 1.0 } else { (-beta * de).exp() };
            let v = rate * acc;
            out += v;
            col.push((y, v));
        }
        col.push((x, 1.0 - out));
        cols.push(col);
    }
    StochasticMatrix::from_columns(dim, cols)
}

/// Metropolis walk on a path with target `pi`: propose a neighbor with
/// probability 1/2 each, accept with `min(1, pi_y / pi_x)`.
pub fn birth_death_metropolis(pi: &[f64]) -> Result<StochasticMatrix> {
    let d = pi.len();
    if d < 2 || pi.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::InvalidStochastic("target must be positive with >= 2 states".into()));
    }
    let mut cols = Vec::with_capacity(d);
    for x in 0..d {
        let mut col = Vec::new();
        let mut out = 0.0;
        for y in [x.wrapping_sub(1), x + 1] {
            if y < d {
                let v = 0.5 * (pi[y] / pi[x]).min(1.0);
                out += v;
                col.push((y, v));
            }
        }
        col.push((x, 1.0 - out));
        cols.push(col);
    }
    StochasticMatrix::from_columns(d, cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring_energies(n: usize) -> Vec<f64> {
        (0..1u64 << n)
            .map(|x| (0..n).filter(|&i| ((x >> i) ^ (x >> ((i + 1) % n))) & 1 == 1).count() as f64)
            .collect()
    }

    #[test]
    fn stationary_examples() {
        let flip = StochasticMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(stationary_distribution(&flip).unwrap(), vec![0.5, 0.5]);
        let e = ring_energies(4);
        let m = glauber_chain(&e, 0.7, 0.1).unwrap();
        let pi = stationary_distribution(&m).unwrap();
        // oracle: Gibbs weights
        let z: f64 = e.iter().map(|x| (-0.7 * x).exp()).sum();
        for (p, x) in pi.iter().zip(&e) {
            assert!((p - (-0.7 * x).exp() / z).abs() < 1e-10);
        }
        let block = StochasticMatrix::identity(3);
        assert_eq!(stationary_distribution(&block), Err(Error::NonUniqueStationary(3)));
    }

    #[test]
    fn stationary_non_reversible_uses_solver() {
        // cyclic drift 0 -> 1 -> 2 -> 0 with holding; uniform is stationary
        let m = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.5, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5]);
        let pi = stationary_distribution(&StochasticMatrix::from_dense(&m).unwrap()).unwrap();
        for p in pi {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
        // transient state carries no mass
        let m = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.3, 0.5, 0.5, 0.3, 0.0, 0.0, 0.4]);
        let pi = stationary_distribution(&StochasticMatrix::from_dense(&m).unwrap()).unwrap();
        assert_eq!(pi[2], 0.0);
    }

    fn birth_death_4() -> StochasticMatrix {
        let m = DMatrix::from_row_slice(4, 4, &[0.5, 0.25, 0.0, 0.0, 0.5, 0.5, 0.25, 0.0, 0.0, 0.25, 0.5, 0.5, 0.0, 0.0, 0.25, 0.5]);
        StochasticMatrix::from_dense(&m).unwrap()
    }

    #[test]
    fn condition_examples() {
        let m = birth_death_4();
        let good = StatePartition::new(4, vec![0], vec![1], vec![2], vec![3]).unwrap();
        assert!(check_classical_condition(&m, &good).passed);
        let bad = StatePartition::new(4, vec![0], vec![2], vec![1], vec![3]).unwrap();
        let r = check_classical_condition(&m, &bad);
        assert!(!r.passed);
        assert_eq!(r.max_forbidden, m.get(1, 0));
        assert!(check_classical_condition(&StochasticMatrix::identity(4), &bad).passed);
        assert!(matches!(classical_bottleneck_report(&m, &bad), Err(Error::ConditionViolated(_))));
    }

    #[test]
    fn report_trivial_case() {
        // C unreachable and B empty of weight: pi_A already stationary
        let m = DMatrix::from_row_slice(4, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let m = StochasticMatrix::from_dense(&m).unwrap();
        let part = StatePartition::new(4, vec![0], vec![1], vec![2], vec![3]).unwrap();
        let pi = vec![1.0, 0.0, 0.0, 0.0];
        let r = classical_report_with(&m, &part, &pi).unwrap();
        assert_eq!((r.lhs, r.bound), (0.0, 0.0));
    }

    #[test]
    fn report_birth_death_metropolis() {
        let target = [0.45, 0.05, 0.05, 0.45];
        let m = birth_death_metropolis(&target).unwrap();
        let part = StatePartition::new(4, vec![0], vec![1], vec![2], vec![3]).unwrap();
        let r = classical_bottleneck_report(&m, &part).unwrap();
        assert!((r.bound - 2.0 * 0.1 / 0.45).abs() < 1e-12);
        // oracle: only the 0 -> 1 move leaves A, with prob 0.5 * (0.05/0.45)
        let leak = 0.5 * 0.05 / 0.45;
        assert!((r.lhs - 2.0 * leak).abs() < 1e-12);
        assert!(r.holds);
    }

    #[test]
    fn report_glauber_ring_decreasing_in_beta() {
        let n = 10;
        let e = ring_energies(n);
        let part = StatePartition::hamming(n, 0, 1, 1).unwrap();
        let mut prev = (f64::INFINITY, f64::INFINITY);
        for beta in [0.5, 1.0, 2.0, 3.0] {
            let m = glauber_chain(&e, beta, 0.0).unwrap();
            let r = classical_bottleneck_report(&m, &part).unwrap();
            assert!(r.holds, "beta {beta}: {} > {}", r.lhs, r.bound);
            assert!(r.lhs < prev.0 && r.bound < prev.1);
            prev = (r.lhs, r.bound);
        }
    }

    #[test]
    fn mixing_time_examples() {
        let avg = StochasticMatrix::from_dense(&DMatrix::from_element(4, 4, 0.25)).unwrap();
        assert_eq!(classical_mixing_time(&avg, 0.25).unwrap(), 1);
        assert_eq!(classical_mixing_time(&StochasticMatrix::identity(3), 0.25), Err(Error::NotConverged(MIXING_CAP)));
        // lazy two-state walk: TV(t) = 0.5 (1 - 2p)^t
        for p in [0.05, 0.1, 0.3] {
            let m = StochasticMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0 - p, p, p, 1.0 - p])).unwrap();
            for eps in [0.25, 0.01] {
            let mut t = 0u64;
            while 0.5 * (1.0 - 2.0 * p as f64).powi(t as i32) > eps {
                t += 1;
            }
            assert_eq!(classical_mixing_time(&m, eps).unwrap(), t);
            }
        }
    }

    #[test]
    fn glauber_examples() {
        let e = ring_energies(3);
        let m = glauber_chain(&e, 0.0, 0.25).unwrap();
        for x in 0..8 {
            for k in 0..3 {
                assert!((m.get(x ^ (1 << k), x) - 0.75 / 3.0).abs() < 1e-15);
            }
        }
        let m = glauber_chain(&[0.0, 1.0], 5.0, 0.0).unwrap();
        assert!((m.get(1, 0) - (-5.0f64).exp()).abs() < 1e-15);
        assert!(glauber_chain(&[0.0, 1.0, 2.0], 1.0, 0.0).is_err());
    }

    #[test]
    fn drift_profile_lower_bound() {
        let e = ring_energies(6);
        let m = glauber_chain(&e, 2.0, 0.0).unwrap();
        let part = StatePartition::hamming(6, 0, 1, 1).unwrap();
        for (_, tv, lower) in classical_drift_profile(&m, &part, 50).unwrap() {
            assert!(tv >= lower - 1e-12);
        }
    }

    #[test]
    fn csv_export_has_header() {
        let mut buf = Vec::new();
        birth_death_4().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(lines.count(), 4);
    }

    proptest! {
        #[test]
        fn glauber_detailed_balance(seed in any::<u64>(), beta in 0.0f64..4.0, lazy in 0.0f64..0.9, m in 1usize..7) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let e: Vec<f64> = (0..1usize << m).map(|_| rng.gen_range(0.0..5.0)).collect();
            let ch = glauber_chain(&e, beta, lazy).unwrap();
            let w: Vec<f64> = e.iter().map(|x| (-beta * x).exp()).collect();
            let z: f64 = w.iter().sum();
            for x in 0..e.len() {
                for y in 0..e.len() {
                    let r = (w[x] / z * ch.get(y, x) - w[y] / z * ch.get(x, y)).abs();
                    prop_assert!(r < 1e-14);
                }
            }
        }

        #[test]
        fn classical_theorem_on_random_chains(seed in any::<u64>(), beta in 0.0f64..3.0, n in 4usize..8, inner in 0usize..2) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let e: Vec<f64> = (0..1usize << n).map(|_| rng.gen_range(0.0..3.0)).collect();
            let m = glauber_chain(&e, beta, 0.2).unwrap();
            let part = StatePartition::hamming(n, rng.gen_range(0..1u64 << n), inner, 1).unwrap();
            let r = classical_bottleneck_report(&m, &part).unwrap();
            prop_assert!(r.lhs <= r.bound + 1e-12);
        }
    }
}
