//! Guessing a message `U` from a side observation `V`.
//!
//! For each observed `v` the guesser follows an order over the `p` messages;
//! `G(order, u)` is the rank at which `u` is proposed. Performance is measured
//! by the moment `E[G^rho]` and by the one-shot success probability
//! `P(first guess = U)`. Expectations here are exact sums; a seeded Monte
//! Carlo estimator is provided for cross-validation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coupling::{indetermination_coupling, JointDistribution, Margin};
use crate::error::{CoreError, Result};
use crate::rng::{cumulative, pick_cumulative, stream_rng};

/// Support size above which exact rank laws of the randomized strategy are refused.
pub const MAX_RANDOM_SUPPORT: usize = 20;

/// An order of the message alphabet; `order[i]` is tried at position `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    order: Vec<usize>,
    rank: Vec<usize>,
}

impl Permutation {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let p = order.len();
        let mut rank = vec![usize::MAX; p];
        for (pos, &u) in order.iter().enumerate() {
            if u >= p || rank[u] != usize::MAX {
                return Err(CoreError::InvalidArgument(format!(
                    "{order:?} is not a permutation of 0..{p}"
                )));
            }
            rank[u] = pos + 1;
        }
        Ok(Self { order, rank })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            order: (0..p).collect(),
            rank: (1..=p).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.order
    }

    pub fn first(&self) -> usize {
        self.order[0]
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = CoreError;

    fn try_from(order: Vec<usize>) -> Result<Self> {
        Permutation::new(order)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.order
    }
}

/// Number of questions needed to reach `u`: its 1-based position in `order`.
pub fn gain(order: &Permutation, u: usize) -> usize {
    order.rank[u]
}

/// How the guesser orders messages for each observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// One fixed order per observation `v`.
    Deterministic(Vec<Permutation>),
    /// Decreasing posterior `pi(. | v)`; the first guess is the posterior mode.
    SortedByPosterior,
    /// Messages drawn one after another without replacement, each
    /// proportionally to its posterior among those not yet tried.
    RandomByPosterior,
}

/// A joint law of (message, observation) and a moment order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessingInstance {
    pub pi: JointDistribution,
    pub rho: f64,
}

impl GuessingInstance {
    pub fn new(pi: JointDistribution, rho: f64) -> Result<Self> {
        check_rho(rho)?;
        Ok(Self { pi, rho })
    }

    pub fn messages(&self) -> usize {
        self.pi.rows()
    }

    pub fn observations(&self) -> usize {
        self.pi.cols()
    }

    /// Unnormalized posterior `pi(., v)`.
    fn column(&self, v: usize) -> Vec<f64> {
        self.pi.cells().column(v).collect()
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(CoreError::InvalidArgument(format!("rho must be positive, got {rho}")))
    }
}

/// Decreasing weight, ties by ascending index.
pub fn optimal_order(weights: &[f64]) -> Permutation {
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    Permutation::new(order).expect("sorted indices form a permutation")
}

/// [`optimal_order`] for a margin.
pub fn optimal_order_margin(posterior: &Margin) -> Permutation {
    optimal_order(posterior.weights())
}

/// Law of the rank of each message when messages are drawn sequentially
/// without replacement proportionally to `weights`.
///
/// `out[u][k]` is the probability that `u` is proposed at position `k + 1`.
/// Zero-weight messages come after every positive one, in uniformly random
/// order. Exact, by dynamic programming over subsets of the support, so the
/// support is capped at [`MAX_RANDOM_SUPPORT`].
pub fn random_rank_law(weights: &[f64]) -> Result<Vec<Vec<f64>>> {
    let p = weights.len();
    let support: Vec<usize> = (0..p).filter(|&u| weights[u] > 0.0).collect();
    let m = support.len();
    if m > MAX_RANDOM_SUPPORT {
        return Err(CoreError::SizeExceeded {
            n: m,
            max: MAX_RANDOM_SUPPORT,
        });
    }
    let mut out = vec![vec![0.0; p]; p];
    let zeros = p - m;
    for u in (0..p).filter(|&u| weights[u] <= 0.0) {
        for k in m..p {
            out[u][k] = 1.0 / zeros as f64;
        }
    }
    if m == 0 {
        return Ok(out);
    }

    let w: Vec<f64> = support.iter().map(|&u| weights[u]).collect();
    // reach[s]: probability that the first |s| draws are exactly the set s.
    let mut reach = vec![0.0; 1 << m];
    reach[0] = 1.0;
    for s in 0..(1usize << m) {
        let prob = reach[s];
        if prob == 0.0 {
            continue;
        }
        let remaining: f64 = (0..m).filter(|&x| s & (1 << x) == 0).map(|x| w[x]).sum();
        let pos = s.count_ones() as usize;
        for x in (0..m).filter(|&x| s & (1 << x) == 0) {
            let step = prob * w[x] / remaining;
            reach[s | (1 << x)] += step;
            out[support[x]][pos] += step;
        }
    }
    Ok(out)
}

/// `E[G(S_V, U)^rho]` under the instance's joint law.
pub fn rho_moment(instance: &GuessingInstance, strategy: &Strategy) -> Result<f64> {
    let (p, q) = (instance.messages(), instance.observations());
    let rho = instance.rho;
    let nu = instance.pi.col_margin();
    let mut total = 0.0;
    for v in 0..q {
        if nu.get(v) == 0.0 {
            continue;
        }
        let col = instance.column(v);
        match strategy {
            Strategy::RandomByPosterior => {
                let law = random_rank_law(&col)?;
                for u in 0..p {
                    if col[u] > 0.0 {
                        let e: f64 = law[u]
                            .iter()
                            .enumerate()
                            .map(|(k, pr)| pr * ((k + 1) as f64).powf(rho))
                            .sum();
                        total += col[u] * e;
                    }
                }
            }
            _ => {
                let order = deterministic_order(strategy, &col, v, p)?;
                for u in 0..p {
                    total += col[u] * (gain(&order, u) as f64).powf(rho);
                }
            }
        }
    }
    Ok(total)
}

fn deterministic_order(strategy: &Strategy, col: &[f64], v: usize, p: usize) -> Result<Permutation> {
    match strategy {
        Strategy::SortedByPosterior => Ok(optimal_order(col)),
        Strategy::Deterministic(orders) => {
            let order = orders.get(v).ok_or_else(|| {
                CoreError::DimensionMismatch(format!("no order given for observation {}", v + 1))
            })?;
            if order.len() != p {
                return Err(CoreError::DimensionMismatch(format!(
                    "order for observation {} ranks {} messages, expected {p}",
                    v + 1,
                    order.len()
                )));
            }
            Ok(order.clone())
        }
        Strategy::RandomByPosterior => unreachable!("randomized strategy has no fixed order"),
    }
}

/// `(1 + ln p)^-rho [sum_u mu_u^(1/(1+rho))]^(1+rho)`: no strategy that
/// ignores side information does better.
pub fn lower_bound_original(mu: &Margin, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let p = mu.len() as f64;
    Ok((1.0 + p.ln()).powf(-rho) * renyi_sum(mu.weights().iter().copied(), rho))
}

/// `(1 + ln p)^-rho sum_v [sum_u pi_uv^(1/(1+rho))]^(1+rho)`.
pub fn lower_bound_generalized(pi: &JointDistribution, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    let p = pi.rows() as f64;
    let sum: f64 = (0..pi.cols())
        .map(|v| renyi_sum(pi.cells().column(v), rho))
        .sum();
    Ok((1.0 + p.ln()).powf(-rho) * sum)
}

/// `[sum x^(1/(1+rho))]^(1+rho)`.
pub(crate) fn renyi_sum(xs: impl Iterator<Item = f64>, rho: f64) -> f64 {
    let e = 1.0 / (1.0 + rho);
    xs.filter(|&x| x > 0.0).map(|x| x.powf(e)).sum::<f64>().powf(1.0 + rho)
}

/// Probability that the first guess is right.
pub fn one_shot(instance: &GuessingInstance, strategy: &Strategy) -> Result<f64> {
    let pi = &instance.pi;
    let nu = pi.col_margin();
    let mut total = 0.0;
    for v in 0..pi.cols() {
        let nv = nu.get(v);
        if nv == 0.0 {
            continue;
        }
        let col = instance.column(v);
        total += match strategy {
            Strategy::SortedByPosterior => col.iter().copied().fold(0.0, f64::max),
            Strategy::RandomByPosterior => col.iter().map(|x| x * x).sum::<f64>() / nv,
            Strategy::Deterministic(_) => {
                let order = deterministic_order(strategy, &col, v, pi.rows())?;
                col[order.first()]
            }
        };
    }
    Ok(total)
}

/// Probability that the right message is among the first `k` guesses.
///
/// Extends the one-shot measure (`k = 1`); provided for exploration only.
pub fn k_shot(instance: &GuessingInstance, strategy: &Strategy, k: usize) -> Result<f64> {
    let pi = &instance.pi;
    let p = pi.rows();
    let mut total = 0.0;
    for v in 0..pi.cols() {
        if pi.col_margin().get(v) == 0.0 {
            continue;
        }
        let col = instance.column(v);
        match strategy {
            Strategy::RandomByPosterior => {
                let law = random_rank_law(&col)?;
                for u in 0..p {
                    total += col[u] * law[u].iter().take(k).sum::<f64>();
                }
            }
            _ => {
                let order = deterministic_order(strategy, &col, v, p)?;
                total += order.as_slice().iter().take(k).map(|&u| col[u]).sum::<f64>();
            }
        }
    }
    Ok(total)
}

/// Bounds on the one-shot success of the randomized strategy:
/// `||pi||^2 / max nu <= M <= ||pi||^2 / min nu`, over observations with `nu > 0`.
pub fn one_shot_bounds_margin_strategy(pi: &JointDistribution) -> Result<(f64, f64)> {
    let norm = pi.squared_norm();
    let active = pi.col_margin().weights().iter().copied().filter(|&n| n > 0.0);
    let (lo, hi) = active.fold((f64::INFINITY, 0.0f64), |(lo, hi), n| (lo.min(n), hi.max(n)));
    if hi == 0.0 {
        return Err(CoreError::DegenerateInput("no observation has positive probability".into()));
    }
    Ok((norm / hi, norm / lo))
}

/// The sender's coupling minimizing `||pi||^2` for fixed margins.
pub fn sender_optimal_coupling(mu: &Margin, nu: &Margin) -> Result<JointDistribution> {
    indetermination_coupling(mu, nu)
}

/// Seeded Monte Carlo estimate of [`rho_moment`].
pub fn rho_moment_monte_carlo(
    instance: &GuessingInstance,
    strategy: &Strategy,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    if samples == 0 {
        return Err(CoreError::InvalidArgument("need at least one sample".into()));
    }
    let (p, q) = (instance.messages(), instance.observations());
    let cdf = cumulative(instance.pi.cells().as_slice());
    let total = *cdf.last().expect("nonempty table");
    let orders: Vec<Option<Permutation>> = (0..q)
        .map(|v| match strategy {
            Strategy::RandomByPosterior => Ok(None),
            _ if instance.pi.col_margin().get(v) == 0.0 => Ok(None),
            _ => deterministic_order(strategy, &instance.column(v), v, p).map(Some),
        })
        .collect::<Result<_>>()?;
    let mut rng = stream_rng(seed, 0);
    let mut acc = 0.0;
    let mut remaining = Vec::with_capacity(p);
    for _ in 0..samples {
        let cell = pick_cumulative(&cdf, rng.gen::<f64>() * total);
        let (u, v) = (cell / q, cell % q);
        let g = match &orders[v] {
            Some(order) => gain(order, u),
            None => {
                remaining.clear();
                remaining.extend(instance.column(v));
                let mut tries = 0;
                loop {
                    tries += 1;
                    let mass: f64 = remaining.iter().sum();
                    let pick = pick_cumulative(&cumulative(&remaining), rng.gen::<f64>() * mass);
                    if pick == u {
                        break tries;
                    }
                    remaining[pick] = 0.0;
                }
            }
        };
        acc += (g as f64).powf(instance.rho);
    }
    Ok(acc / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::independence_coupling;
    use approx::assert_abs_diff_eq;

    fn worked_margins() -> (Margin, Margin) {
        (
            Margin::new(vec![9.0 / 27.0, 6.0 / 27.0, 3.0 / 27.0, 9.0 / 27.0]).unwrap(),
            Margin::new(vec![9.0 / 27.0, 13.0 / 27.0, 5.0 / 27.0]).unwrap(),
        )
    }

    fn single_column(mu: &Margin, rho: f64) -> GuessingInstance {
        GuessingInstance::new(independence_coupling(mu, &Margin::uniform(1)), rho).unwrap()
    }

    #[test]
    fn gain_examples() {
        // alphabet (a, b, c, d) = (0, 1, 2, 3); order (b, c, a, d)
        let order = Permutation::new(vec![1, 2, 0, 3]).unwrap();
        assert_eq!(gain(&order, 2), 2);
        assert_eq!(gain(&order, 1), 1);
        assert_eq!(gain(&order, 3), 4);
        assert!(Permutation::new(vec![0, 0, 1]).is_err());
        assert!(Permutation::new(vec![0, 3]).is_err());
    }

    #[test]
    fn optimal_order_examples() {
        assert_eq!(optimal_order(&[0.1, 0.7, 0.2]).as_slice(), &[1, 2, 0]);
        assert_eq!(optimal_order(&[0.25; 4]).as_slice(), &[0, 1, 2, 3]);
        let (mu, _) = worked_margins();
        assert_eq!(optimal_order_margin(&mu).as_slice(), &[0, 3, 1, 2]);
    }

    #[test]
    fn moment_examples() {
        let (mu, _) = worked_margins();
        let inst = single_column(&mu, 1.0);
        assert_abs_diff_eq!(rho_moment(&inst, &Strategy::SortedByPosterior).unwrap(), 19.0 / 9.0, epsilon = 1e-15);
        let uniform = single_column(&Margin::uniform(5), 1.0);
        let fixed = Strategy::Deterministic(vec![Permutation::new(vec![4, 2, 0, 1, 3]).unwrap()]);
        assert_abs_diff_eq!(rho_moment(&uniform, &fixed).unwrap(), 3.0, epsilon = 1e-15);
        let point = single_column(&Margin::new(vec![1.0, 0.0, 0.0]).unwrap(), 25.0);
        assert_eq!(rho_moment(&point, &Strategy::SortedByPosterior).unwrap(), 1.0);
        assert!(GuessingInstance::new(inst.pi.clone(), 0.0).is_err());
    }

    #[test]
    fn original_bound_examples() {
        let point = Margin::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(lower_bound_original(&point, 2.0).unwrap(), (1.0 + 4f64.ln()).powi(-2), epsilon = 1e-15);
        assert_abs_diff_eq!(
            lower_bound_original(&Margin::uniform(4), 1.0).unwrap(),
            4.0 / (1.0 + 4f64.ln()),
            epsilon = 1e-14
        );
        let (mu, _) = worked_margins();
        let lb = lower_bound_original(&mu, 1.0).unwrap();
        assert_abs_diff_eq!(lb, 1.6090, epsilon = 1e-4);
        assert!(lb <= 19.0 / 9.0);
    }

    #[test]
    fn generalized_bound_reduces_to_original_on_one_column() {
        let (mu, _) = worked_margins();
        let inst = single_column(&mu, 0.7);
        assert_abs_diff_eq!(
            lower_bound_generalized(&inst.pi, 0.7).unwrap(),
            lower_bound_original(&mu, 0.7).unwrap(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn rank_law_is_doubly_stochastic() {
        let law = random_rank_law(&[0.5, 0.0, 0.3, 0.2]).unwrap();
        for row in &law {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
        }
        for k in 0..4 {
            assert_abs_diff_eq!(law.iter().map(|r| r[k]).sum::<f64>(), 1.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(law[0][0], 0.5, epsilon = 1e-15);
        assert_eq!(law[1][3], 1.0);
        // second pick is 2 after 0 (0.5 * 0.3/0.5) or after 3 (0.2 * 0.3/0.8)
        assert_abs_diff_eq!(law[2][1], 0.3 + 0.075, epsilon = 1e-15);
        assert!(matches!(random_rank_law(&[0.01; 25]), Err(CoreError::SizeExceeded { .. })));
    }

    #[test]
    fn one_shot_examples() {
        let (mu, nu) = worked_margins();
        let times = GuessingInstance::new(independence_coupling(&mu, &nu), 1.0).unwrap();
        assert_abs_diff_eq!(one_shot(&times, &Strategy::RandomByPosterior).unwrap(), 23.0 / 81.0, epsilon = 1e-15);
        let plus = GuessingInstance::new(indetermination_coupling(&mu, &nu).unwrap(), 1.0).unwrap();
        let expected = 23.0 / 243.0 + 45.0 / 351.0 + 1.0 / 15.0;
        assert_abs_diff_eq!(one_shot(&plus, &Strategy::RandomByPosterior).unwrap(), expected, epsilon = 1e-15);
        let diag = JointDistribution::from_rows(vec![vec![0.6, 0.0], vec![0.0, 0.4]]).unwrap();
        let diag = GuessingInstance::new(diag, 1.0).unwrap();
        assert_abs_diff_eq!(one_shot(&diag, &Strategy::SortedByPosterior).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(k_shot(&plus, &Strategy::RandomByPosterior, 1).unwrap(), expected, epsilon = 1e-14);
        assert_abs_diff_eq!(k_shot(&plus, &Strategy::SortedByPosterior, 4).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn one_shot_bound_examples() {
        let (mu, nu) = worked_margins();
        let plus = indetermination_coupling(&mu, &nu).unwrap();
        let (lo, hi) = one_shot_bounds_margin_strategy(&plus).unwrap();
        assert_abs_diff_eq!(lo, 77.0 / 351.0, epsilon = 1e-15);
        let m = one_shot(&GuessingInstance::new(plus, 1.0).unwrap(), &Strategy::RandomByPosterior).unwrap();
        assert!(lo <= m && m <= hi);
        let uniform = independence_coupling(&Margin::uniform(3), &Margin::uniform(4));
        let (lo, hi) = one_shot_bounds_margin_strategy(&uniform).unwrap();
        assert_abs_diff_eq!(lo, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(hi, 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn sender_coupling_matches_worked_example() {
        let (mu, nu) = worked_margins();
        let pi = sender_optimal_coupling(&mu, &nu).unwrap();
        assert_abs_diff_eq!(pi.get(0, 1), 4.0 / 27.0, epsilon = 1e-15);
        let u = sender_optimal_coupling(&Margin::uniform(2), &Margin::uniform(3)).unwrap();
        assert!(u.cells().as_slice().iter().all(|&x| (x - 1.0 / 6.0).abs() < 1e-15));
    }

    #[test]
    fn monte_carlo_agrees_with_exact_moments() {
        let (mu, nu) = worked_margins();
        let inst = GuessingInstance::new(indetermination_coupling(&mu, &nu).unwrap(), 1.0).unwrap();
        for strategy in [Strategy::SortedByPosterior, Strategy::RandomByPosterior] {
            let exact = rho_moment(&inst, &strategy).unwrap();
            let mc = rho_moment_monte_carlo(&inst, &strategy, 40_000, 5).unwrap();
            assert!((exact - mc).abs() < 0.03, "{strategy:?}: exact {exact}, mc {mc}");
        }
    }
}
