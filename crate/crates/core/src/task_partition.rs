//! Splitting `p` tasks among `q` workers.
//!
//! Task `u` happens with probability `mu_u`; when it does, worker `i(u)` must
//! perform its whole class `A_{i(u)}`. The cost is the moment of the class
//! size, and the one-shot view reduces to guessing `U` from the worker.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::{check_condition_h, indetermination_signed, JointDistribution, Margin};
use crate::error::{CoreError, Result};
use crate::guessing::{random_rank_law, renyi_sum};
use crate::matrix::Matrix;
use crate::rng::{cumulative, pick_cumulative, stream_rng};

/// Worker of each task, 0-based, among `workers` workers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPartition {
    assignment: Vec<usize>,
    workers: usize,
}

impl TaskPartition {
    pub fn new(assignment: Vec<usize>, workers: usize) -> Result<Self> {
        if assignment.is_empty() {
            return Err(CoreError::InvalidArgument("no tasks to assign".into()));
        }
        if workers == 0 || workers > assignment.len() {
            return Err(CoreError::InvalidArgument(format!(
                "need 1 <= workers <= tasks, got {workers} workers for {} tasks",
                assignment.len()
            )));
        }
        if let Some(&w) = assignment.iter().find(|&&w| w >= workers) {
            return Err(CoreError::InvalidArgument(format!(
                "worker {} out of range 1..={workers}",
                w + 1
            )));
        }
        Ok(Self { assignment, workers })
    }

    /// Worker count taken as the largest index used.
    pub fn from_assignment(assignment: Vec<usize>) -> Result<Self> {
        let workers = assignment.iter().max().map_or(0, |&w| w + 1);
        Self::new(assignment, workers)
    }

    pub fn singletons(p: usize) -> Self {
        Self {
            assignment: (0..p).collect(),
            workers: p,
        }
    }

    pub fn tasks(&self) -> usize {
        self.assignment.len()
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn worker_of(&self, u: usize) -> usize {
        self.assignment[u]
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.workers];
        for &w in &self.assignment {
            sizes[w] += 1;
        }
        sizes
    }

    /// Workers that were given nothing.
    pub fn empty_workers(&self) -> Vec<usize> {
        self.class_sizes()
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == 0)
            .map(|(w, _)| w)
            .collect()
    }

    fn check_tasks(&self, mu: &Margin) -> Result<()> {
        if mu.len() != self.tasks() {
            return Err(CoreError::DimensionMismatch(format!(
                "{} task probabilities for {} assigned tasks",
                mu.len(),
                self.tasks()
            )));
        }
        Ok(())
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(CoreError::InvalidArgument(format!("rho must be positive, got {rho}")))
    }
}

/// `E[|A_{i(U)}|^rho]`. Empty workers contribute nothing.
pub fn class_size_moment(mu: &Margin, part: &TaskPartition, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    part.check_tasks(mu)?;
    let sizes = part.class_sizes();
    Ok((0..mu.len())
        .map(|u| mu.get(u) * (sizes[part.worker_of(u)] as f64).powf(rho))
        .sum())
}

/// Lower bound on [`class_size_moment`] over all partitions into `q` classes:
/// `[sum_u mu_u^(1/(1+rho))]^(1+rho) / q^rho`.
pub fn partition_moment_bound(mu: &Margin, q: usize, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if q == 0 || q > mu.len() {
        return Err(CoreError::InvalidArgument(format!(
            "need 1 <= q <= {}, got {q}",
            mu.len()
        )));
    }
    Ok(renyi_sum(mu.weights().iter().copied(), rho) / (q as f64).powf(rho))
}

/// Joint law of (task, worker) and the worker margin.
///
/// Empty workers keep their zero column here.
pub fn induced_coupling(mu: &Margin, part: &TaskPartition) -> Result<(JointDistribution, Margin)> {
    part.check_tasks(mu)?;
    let cells = Matrix::from_fn(mu.len(), part.workers(), |u, v| {
        if part.worker_of(u) == v {
            mu.get(u)
        } else {
            0.0
        }
    });
    let mut nu = vec![0.0; part.workers()];
    for u in 0..mu.len() {
        nu[part.worker_of(u)] += mu.get(u);
    }
    let nu = Margin::new(nu)?;
    let pi = JointDistribution::with_margins(cells, mu.clone(), nu.clone())?;
    Ok((pi, nu))
}

/// One-shot success of guessing the task from its worker, and two lower bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionOneShot {
    pub m_value: f64,
    pub bound_pi_a: f64,
    pub bound_indet: f64,
    /// Whether the closed-form minimal-norm matrix is a true coupling.
    pub condition_h_holds: bool,
}

/// `m_value >= ||pi^A||^2 / max nu^A >= ||C+(mu, nu^A)||^2 / max nu^A`.
///
/// Workers with zero probability are dropped first. The last bound uses the
/// signed closed form when it is not a coupling.
pub fn partition_one_shot_bound(mu: &Margin, part: &TaskPartition) -> Result<PartitionOneShot> {
    let (pi, nu) = induced_coupling(mu, part)?;
    let active: Vec<usize> = (0..nu.len()).filter(|&v| nu.get(v) > 0.0).collect();
    let nu_active = Margin::new(active.iter().map(|&v| nu.get(v)).collect())?;
    let max_nu = nu_active.max();

    let mut m_value = 0.0;
    for u in 0..mu.len() {
        let nv = nu.get(part.worker_of(u));
        if nv > 0.0 {
            m_value += mu.get(u) * mu.get(u) / nv;
        }
    }
    let bound_pi_a = pi.squared_norm() / max_nu;
    let signed = indetermination_signed(mu, &nu_active);
    Ok(PartitionOneShot {
        m_value,
        bound_pi_a,
        bound_indet: signed.squared_norm() / max_nu,
        condition_h_holds: check_condition_h(mu, &nu_active),
    })
}

/// Mean number of tasks performed up to and including the intended one,
/// when the worker runs its class in random order weighted by `mu`.
///
/// Monte Carlo only; no bound is attached to it.
pub fn simulate_tasks_performed(mu: &Margin, part: &TaskPartition, samples: usize, seed: u64) -> Result<f64> {
    part.check_tasks(mu)?;
    if samples == 0 {
        return Err(CoreError::InvalidArgument("need at least one sample".into()));
    }
    let cdf = cumulative(mu.weights());
    let total = *cdf.last().expect("nonempty margin");
    let mut rng = stream_rng(seed, 0);
    let mut acc = 0.0;
    let mut remaining = Vec::with_capacity(mu.len());
    for _ in 0..samples {
        let u = pick_cumulative(&cdf, rng.gen::<f64>() * total);
        let w = part.worker_of(u);
        remaining.clear();
        remaining.extend((0..mu.len()).map(|t| if part.worker_of(t) == w { mu.get(t) } else { 0.0 }));
        let mut done = 0usize;
        loop {
            done += 1;
            let mass: f64 = remaining.iter().sum();
            let t = pick_cumulative(&cumulative(&remaining), rng.gen::<f64>() * mass);
            if t == u {
                break;
            }
            remaining[t] = 0.0;
        }
        acc += done as f64;
    }
    Ok(acc / samples as f64)
}

/// Exact counterpart of [`simulate_tasks_performed`] for classes up to the
/// randomized-rank size limit.
pub fn expected_tasks_performed(mu: &Margin, part: &TaskPartition) -> Result<f64> {
    let (pi, nu) = induced_coupling(mu, part)?;
    let mut total = 0.0;
    for v in 0..nu.len() {
        if nu.get(v) == 0.0 {
            continue;
        }
        let col: Vec<f64> = pi.cells().column(v).collect();
        let law = random_rank_law(&col)?;
        for (u, row) in law.iter().enumerate() {
            if col[u] > 0.0 {
                total += col[u] * row.iter().enumerate().map(|(k, pr)| pr * (k + 1) as f64).sum::<f64>();
            }
        }
    }
    Ok(total)
}
