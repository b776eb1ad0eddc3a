use std::path::PathBuf;

use clap::{Args, ValueEnum};
use indet_core::association::{
    chi_square, jv_contingency, jv_relational, relational_encode, ContingencyTable,
};
use indet_core::continuous::{
    check_condition_continuous, condition_continuous_lhs, evaluation_grid, l2_optimality_report,
    margin_recovery_error, total_mass, ContinuousCoupling, L2_TRIALS,
};
use indet_core::coupling::{
    condition_h_lhs, divergence_kl_to_uniform, divergence_l2_to_uniform, independence_coupling,
    indetermination_coupling, indetermination_projection, indetermination_signed, is_full_monge,
};
use indet_core::graph_cluster::{brute_force_best, global_score, louvain, Criterion, WeightedGraph, BRUTE_FORCE_MAX};
use indet_core::guessing::{
    lower_bound_generalized, one_shot, one_shot_bounds_margin_strategy, rho_moment, rho_moment_monte_carlo,
    GuessingInstance, Strategy,
};
use indet_core::sampler::{decompose, draw, empirical_joint};
use indet_core::task_partition::{
    class_size_moment, partition_moment_bound, partition_one_shot_bound, TaskPartition,
};
use indet_core::tolerance::MONGE_REL_TOL;
use indet_core::CoreError;
use serde_json::json;

use crate::io::{fmt_f64, matrix_csv, rows_csv, Loader};
use crate::{CliError, Command, Common, KindArg, Outcome};

#[derive(Args, Debug)]
pub struct CoupleArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long)]
    pub mu: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
    /// Emit the closed form even when it has negative cells.
    #[arg(long)]
    pub signed: bool,
}

#[derive(Args, Debug)]
pub struct MongeArgs {
    #[arg(long)]
    pub matrix: PathBuf,
    /// Relative tolerance on block sums.
    #[arg(long, default_value_t = MONGE_REL_TOL)]
    pub tol: f64,
}

#[derive(Args, Debug)]
pub struct DrawArgs {
    #[arg(long)]
    pub mu: PathBuf,
    #[arg(long)]
    pub nu: PathBuf,
    #[arg(long, short = 'n')]
    pub n: usize,
    /// Random when omitted; always recorded.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Add the empirical joint law to the report.
    #[arg(long)]
    pub histogram: bool,
}

#[derive(Args, Debug)]
pub struct CriteriaArgs {
    /// Contingency table of counts.
    #[arg(long, required_unless_present = "relational")]
    pub table: Option<PathBuf>,
    /// Compare two labelings of the same items instead.
    #[arg(long, requires_all = ["x", "y"])]
    pub relational: bool,
    #[arg(long)]
    pub x: Option<PathBuf>,
    #[arg(long)]
    pub y: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GuessStrategy {
    /// Decreasing posterior.
    Max,
    /// Random draws proportional to the posterior.
    Margin,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    /// Edge list "i,j,weight", 1-based vertices, each edge once.
    #[arg(long)]
    pub graph: PathBuf,
    /// Vertex count when the largest vertex is isolated.
    #[arg(long)]
    pub vertices: Option<usize>,
    #[arg(long, value_enum, default_value = "x")]
    pub criterion: KindArg,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optimize without the diagonal terms.
    #[arg(long)]
    pub no_diagonal: bool,
    #[arg(long, default_value_t = 20)]
    pub max_passes: usize,
    /// Also enumerate every partition (small graphs only).
    #[arg(long)]
    pub brute_force: bool,
}

#[derive(Args, Debug)]
pub struct GuessArgs {
    /// Joint law as JSON, or a CSV table of cells.
    #[arg(long)]
    pub pi: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, value_enum, default_value = "max")]
    pub strategy: GuessStrategy,
    /// Monte Carlo sample size when the exact moment is out of reach.
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct TasksArgs {
    #[arg(long)]
    pub mu: PathBuf,
    /// Worker of each task, 1-based.
    #[arg(long)]
    pub assign: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Worker count when the last workers get no task.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ContinuousArgs {
    #[arg(long)]
    pub f: PathBuf,
    #[arg(long)]
    pub g: PathBuf,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Quadrature nodes per piece.
    #[arg(long, default_value_t = 64)]
    pub quad: usize,
    /// Seed of the perturbation check.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn seed_or_random(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

pub fn dispatch(cmd: &Command, common: &Common, loader: &mut Loader) -> Result<(&'static str, Outcome), CliError> {
    Ok(match cmd {
        Command::Couple(a) => ("couple", couple(a, common, loader)?),
        Command::CheckMonge(a) => ("check-monge", check_monge(a, loader)?),
        Command::Draw(a) => ("draw", draw_pairs(a, common, loader)?),
        Command::Criteria(a) => ("criteria", criteria(a, loader)?),
        Command::Cluster(a) => ("cluster", cluster(a, common, loader)?),
        Command::Guess(a) => ("guess", guess(a, loader)?),
        Command::Tasks(a) => ("tasks", tasks(a, loader)?),
        Command::Continuous(a) => ("continuous", continuous(a, common, loader)?),
    })
}

fn header_row(common: &Common, cols: usize) -> String {
    if common.header {
        let names: Vec<String> = (1..=cols).map(|v| format!("v{v}")).collect();
        format!("{}\n", names.join(","))
    } else {
        String::new()
    }
}

fn couple(a: &CoupleArgs, common: &Common, loader: &mut Loader) -> Result<Outcome, CliError> {
    let mu = loader.margin("mu", &a.mu)?;
    let nu = loader.margin("nu", &a.nu)?;
    let lhs = condition_h_lhs(&mu, &nu);
    let (cells, feasible) = match a.kind {
        KindArg::Times => (independence_coupling(&mu, &nu).into_cells(), true),
        KindArg::Plus if a.signed => {
            let s = indetermination_signed(&mu, &nu);
            let feasible = s.is_feasible();
            (s.cells().clone(), feasible)
        }
        KindArg::Plus => (indetermination_coupling(&mu, &nu)?.into_cells(), true),
    };
    let mut outputs = json!({
        "kind": match a.kind { KindArg::Times => "independence", KindArg::Plus => "indetermination" },
        "cells": cells.to_rows(),
        "row_margin": mu.weights(),
        "col_margin": nu.weights(),
        "condition_h_lhs": lhs,
        "feasible": feasible,
        "full_monge": is_full_monge(&cells, MONGE_REL_TOL),
    });
    if feasible {
        let joint = indet_core::JointDistribution::with_margins(cells.clone(), mu.clone(), nu.clone())?;
        outputs["kl_to_uniform"] = json!(divergence_kl_to_uniform(&joint));
        outputs["l2_to_uniform"] = json!(divergence_l2_to_uniform(&joint));
    }
    let csv = header_row(common, cells.cols()) + &matrix_csv(&cells);
    Ok(Outcome {
        seed: None,
        outputs,
        table: Some(("coupling.csv".into(), csv)),
        extra: Vec::new(),
    })
}

fn check_monge(a: &MongeArgs, loader: &mut Loader) -> Result<Outcome, CliError> {
    let m = loader.matrix("matrix", &a.matrix)?;
    let proj = indetermination_projection(&m);
    let deviation = m.max_abs_diff(&proj).unwrap_or(0.0);
    Ok(Outcome {
        seed: None,
        outputs: json!({
            "full_monge": is_full_monge(&m, a.tol),
            "max_deviation_from_projection": deviation,
            "rows": m.rows(),
            "cols": m.cols(),
        }),
        table: None,
        extra: Vec::new(),
    })
}

fn draw_pairs(a: &DrawArgs, common: &Common, loader: &mut Loader) -> Result<Outcome, CliError> {
    let mu = loader.margin("mu", &a.mu)?;
    let nu = loader.margin("nu", &a.nu)?;
    let seed = seed_or_random(a.seed);
    let dec = decompose(&mu, &nu)?;
    let batch = draw(&dec, &mu, a.n, seed)?;
    let rows: Vec<Vec<String>> = batch
        .pairs
        .iter()
        .map(|&(u, v)| vec![(u + 1).to_string(), (v + 1).to_string()])
        .collect();
    let csv = rows_csv(common.header.then_some("u,v"), &rows);
    let sidecar = json!({
        "seed": seed,
        "n": batch.count,
        "generator_version": batch.generator_version,
    });
    let mut outputs = sidecar.clone();
    if a.histogram && a.n > 0 {
        outputs["histogram"] = serde_json::to_value(empirical_joint(&batch, mu.len(), nu.len())?).expect("serializable");
    }
    if !common.csv && common.out_dir.is_none() {
        outputs["pairs"] = json!(batch.pairs.iter().map(|&(u, v)| [u + 1, v + 1]).collect::<Vec<_>>());
    }
    Ok(Outcome {
        seed: Some(seed),
        outputs,
        table: Some(("pairs.csv".into(), csv)),
        extra: vec![("pairs.json".into(), format!("{sidecar}\n"))],
    })
}

fn criteria(a: &CriteriaArgs, loader: &mut Loader) -> Result<Outcome, CliError> {
    let outputs = if a.relational {
        let x = loader.labels("x", a.x.as_ref().expect("required by clap"))?;
        let y = loader.labels("y", a.y.as_ref().expect("required by clap"))?;
        if x.len() != y.len() {
            return Err(CoreError::DimensionMismatch(format!("{} labels against {}", x.len(), y.len())).into());
        }
        let distinct = |l: &[String]| {
            let mut seen: Vec<&String> = l.iter().collect();
            seen.sort();
            seen.dedup();
            seen.len()
        };
        let (p, q) = (distinct(&x), distinct(&y));
        let value = jv_relational(&relational_encode(&x)?, &relational_encode(&y)?, p, q)?;
        json!({"jv_relational": value, "items": x.len(), "p": p, "q": q})
    } else {
        let table = ContingencyTable::from_matrix(&loader.matrix("table", a.table.as_ref().expect("required by clap"))?)?;
        let jv = jv_contingency(&table);
        json!({
            "chi2": chi_square(&table)?,
            "jv_contingency": {
                "numerator": jv.numerator,
                "denominator": jv.denominator,
                "value": jv.value,
            },
            "n": table.n(),
        })
    };
    Ok(Outcome {
        seed: None,
        outputs,
        table: None,
        extra: Vec::new(),
    })
}

fn cluster(a: &ClusterArgs, common: &Common, loader: &mut Loader) -> Result<Outcome, CliError> {
    let rows = loader.numbers("graph", &a.graph)?;
    let mut edges = Vec::with_capacity(rows.len());
    let mut n = 0;
    for (i, r) in rows.iter().enumerate() {
        let bad = || CliError::Input(format!("{}: line {}: expected i,j,weight", a.graph.display(), i + 1));
        if r.len() != 3 || r[0] < 1.0 || r[1] < 1.0 || r[0].fract() != 0.0 || r[1].fract() != 0.0 {
            return Err(bad());
        }
        let (u, v) = (r[0] as usize - 1, r[1] as usize - 1);
        n = n.max(u + 1).max(v + 1);
        edges.push((u, v, r[2]));
    }
    if let Some(k) = a.vertices {
        if k < n {
            return Err(CliError::Input(format!("--vertices {k} but the edge list uses vertex {n}")));
        }
        n = k;
    }
    let g = WeightedGraph::from_edges(n, &edges)?;
    let criterion = match a.criterion {
        KindArg::Times => Criterion::Independence,
        KindArg::Plus => Criterion::Indetermination,
    };
    let full = criterion.local_weights(&g);
    let used = if a.no_diagonal { full.without_diagonal() } else { full.clone() };
    let seed = seed_or_random(a.seed);
    let report = louvain(&used, seed, a.max_passes)?;
    let labels: Vec<usize> = report.partition.labels().iter().map(|l| l + 1).collect();
    let mut outputs = json!({
        "criterion": match a.criterion { KindArg::Times => "x", KindArg::Plus => "plus" },
        "diagonal": !a.no_diagonal,
        "labels": labels,
        "classes": report.partition.class_count(),
        "score": report.score,
        "score_with_diagonal": global_score(&full, &report.partition)?,
        "passes": report.passes,
    });
    if a.brute_force {
        let (best, score) = brute_force_best(&used, BRUTE_FORCE_MAX)?;
        outputs["brute_force"] = json!({
            "labels": best.labels().iter().map(|l| l + 1).collect::<Vec<_>>(),
            "score": score,
        });
    }
    let rows: Vec<Vec<String>> = labels.iter().map(|l| vec![l.to_string()]).collect();
    Ok(Outcome {
        seed: Some(seed),
        outputs,
        table: Some(("labels.csv".into(), rows_csv(common.header.then_some("label"), &rows))),
        extra: Vec::new(),
    })
}

fn guess(a: &GuessArgs, loader: &mut Loader) -> Result<Outcome, CliError> {
    let pi = loader.joint("pi", &a.pi)?;
    let inst = GuessingInstance::new(pi.clone(), a.rho)?;
    let strategy = match a.strategy {
        GuessStrategy::Max => Strategy::SortedByPosterior,
        GuessStrategy::Margin => Strategy::RandomByPosterior,
    };
    let mut seed = None;
    let (moment, exact) = match rho_moment(&inst, &strategy) {
        Ok(m) => (m, true),
        Err(CoreError::SizeExceeded { .. }) => {
            let s = seed_or_random(a.seed);
            seed = Some(s);
            (rho_moment_monte_carlo(&inst, &strategy, a.samples, s)?, false)
        }
        Err(e) => return Err(e.into()),
    };
    let (lo, hi) = one_shot_bounds_margin_strategy(&pi)?;
    Ok(Outcome {
        seed,
        outputs: json!({
            "strategy": match a.strategy { GuessStrategy::Max => "max", GuessStrategy::Margin => "margin" },
            "rho": a.rho,
            "rho_moment": moment,
            "rho_moment_exact": exact,
            "one_shot": one_shot(&inst, &strategy)?,
            "lower_bound_generalized": lower_bound_generalized(&pi, a.rho)?,
            "one_shot_lower": lo,
            "one_shot_upper": hi,
        }),
        table: None,
        extra: Vec::new(),
    })
}

fn tasks(a: &TasksArgs, loader: &mut Loader) -> Result<Outcome, CliError> {
    let mu = loader.margin("mu", &a.mu)?;
    let assignment = loader.indices("assign", &a.assign)?;
    let part = match a.workers {
        Some(q) => TaskPartition::new(assignment, q)?,
        None => TaskPartition::from_assignment(assignment)?,
    };
    let r = partition_one_shot_bound(&mu, &part)?;
    Ok(Outcome {
        seed: None,
        outputs: json!({
            "workers": part.workers(),
            "empty_workers": part.empty_workers().iter().map(|w| w + 1).collect::<Vec<_>>(),
            "moment": class_size_moment(&mu, &part, a.rho)?,
            "moment_bound": partition_moment_bound(&mu, part.workers(), a.rho)?,
            "one_shot": r.m_value,
            "bound_piA": r.bound_pi_a,
            "bound_indet": r.bound_indet,
            "condition_h_holds": r.condition_h_holds,
        }),
        table: None,
        extra: Vec::new(),
    })
}

fn continuous(a: &ContinuousArgs, common: &Common, loader: &mut Loader) -> Result<Outcome, CliError> {
    let f = loader.density("f", &a.f)?;
    let g = loader.density("g", &a.g)?;
    if !check_condition_continuous(&f, &g) {
        return Err(CoreError::ContinuousConditionViolation {
            lhs: condition_continuous_lhs(&f, &g),
        }
        .into());
    }
    let c = ContinuousCoupling::new(f, g)?;
    let seed = seed_or_random(a.seed);
    let l2 = l2_optimality_report(&c, seed, L2_TRIALS)?;
    let grid = evaluation_grid(&c, a.grid)?;
    let rows: Vec<Vec<String>> = grid
        .iter()
        .map(|&(u, v, d, h)| vec![fmt_f64(u), fmt_f64(v), fmt_f64(d), fmt_f64(h)])
        .collect();
    Ok(Outcome {
        seed: Some(seed),
        outputs: json!({
            "condition_lhs": condition_continuous_lhs(&c.f, &c.g),
            "feasible": true,
            "min_density": c.min_density(),
            "margin_recovery_error": margin_recovery_error(&c, a.quad)?,
            "total_mass": total_mass(&c, a.quad),
            "l2_check_passed": l2.passed,
            "l2_smallest_increase": l2.increases.iter().copied().fold(f64::INFINITY, f64::min),
            "grid": a.grid,
        }),
        table: Some(("grid.csv".into(), rows_csv(common.header.then_some("u,v,density,cdf"), &rows))),
        extra: Vec::new(),
    })
}
