//! Exact Wasserstein-1 distance between finitely supported measures.
//!
//! The primal problem is solved as a min-cost flow on the bipartite graph
//! `μ-atoms → ν-atoms` by network simplex ([`simplex`]). The dual side is a
//! Lipschitz-1 potential obtained from the optimal basis and extended to the
//! whole space by a c-transform ([`DualWitness`]).

mod oracle;
mod simplex;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Point};
use crate::metric::Metric;

pub use oracle::w1_1d_oracle;

/// Slack allowed on `|f(p) - f(q)| <= d(p, q)`.
pub const LIPSCHITZ_SLACK: f64 = 1e-9;
/// Maximum admissible gap between primal cost and dual value.
pub const DUALITY_GAP: f64 = 1e-7;
/// Tolerance on plan marginals and cost recomputation.
pub const PLAN_TOLERANCE: f64 = 1e-9;
/// Largest common denominator for which weights are scaled to integers.
pub const MAX_EXACT_DENOMINATOR: u64 = 1_000_000_000;

/// An optimal coupling between `μ` (rows) and `ν` (columns).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols`.
    pub flow: Vec<f64>,
    pub cost_value: f64,
    /// Spanning-tree basis of the final simplex iterate.
    pub basis: Vec<(usize, usize)>,
    /// True when weights were solved as integers over a common denominator.
    pub exact_weights: bool,
    pub pivots: usize,
}

impl TransportPlan {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.flow[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.flow.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for row in self.flow.chunks(self.cols) {
            for (s, x) in sums.iter_mut().zip(row) {
                *s += x;
            }
        }
        sums
    }

    pub fn positive_flows(&self) -> usize {
        self.flow.iter().filter(|&&x| x > 0.0).count()
    }

    /// `Σ flow_ij · d(x_i, y_j)` recomputed from the measures.
    pub fn recompute_cost(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: Metric) -> f64 {
        let mut total = 0.0;
        for (i, p) in mu.atoms().iter().enumerate() {
            for (j, q) in nu.atoms().iter().enumerate() {
                let x = self.get(i, j);
                if x > 0.0 {
                    total += x * metric.dist(p, q);
                }
            }
        }
        total
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Smallest-denominator convergent `p/q` of `x` with `q <= max_den` whose
/// floating-point quotient is exactly `x`.
fn as_small_rational(x: f64, max_den: u64) -> Option<(u64, u64)> {
    if !(x > 0.0 && x <= 1.0) {
        return None;
    }
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a > 1e18 {
            break;
        }
        let a = a as u64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if h1 as f64 / k1 as f64 == x {
            return Some((h1, k1));
        }
        let frac = r - a as f64;
        if frac <= 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

/// Integer supplies/demands over a common denominator `D <= 1e9`, when every
/// weight is such a rational and both sides sum to exactly `D`.
fn exact_scaling(a: &[f64], b: &[f64]) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let fractions: Vec<(u64, u64)> = a
        .iter()
        .chain(b)
        .map(|&w| as_small_rational(w, MAX_EXACT_DENOMINATOR))
        .collect::<Option<_>>()?;
    let mut denominator = 1u64;
    for &(_, q) in &fractions {
        denominator = denominator / gcd(denominator, q) * q;
        if denominator > MAX_EXACT_DENOMINATOR {
            return None;
        }
    }
    let scaled: Vec<u64> = fractions.iter().map(|&(p, q)| p * (denominator / q)).collect();
    let (sa, sb) = scaled.split_at(a.len());
    if sa.iter().sum::<u64>() != denominator || sb.iter().sum::<u64>() != denominator {
        return None;
    }
    let to_f64 = |v: &[u64]| v.iter().map(|&x| x as f64).collect::<Vec<_>>();
    Some((to_f64(sa), to_f64(sb), denominator as f64))
}

pub fn cost_matrix(mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: Metric) -> Vec<f64> {
    let mut cost = Vec::with_capacity(mu.len() * nu.len());
    for p in mu.atoms() {
        for q in nu.atoms() {
            cost.push(metric.dist(p, q));
        }
    }
    cost
}

/// Exact `W1(μ, ν)` under `metric`, with an optimal plan.
pub fn w1_exact(mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: Metric) -> Result<(f64, TransportPlan)> {
    if mu.dim() != nu.dim() {
        return Err(Error::dims(mu.dim(), nu.dim()));
    }
    let cost = cost_matrix(mu, nu, metric);
    w1_with_cost(mu, nu, &cost)
}

/// As [`w1_exact`] with a precomputed row-major cost matrix.
pub(crate) fn w1_with_cost(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &[f64],
) -> Result<(f64, TransportPlan)> {
    if mu.dim() != nu.dim() {
        return Err(Error::dims(mu.dim(), nu.dim()));
    }
    let plan = solve_transport(mu.weights(), nu.weights(), cost)?;
    Ok((plan.cost_value, plan))
}

/// Optimal plan between weight vectors `a` and `b` for an arbitrary
/// row-major cost matrix.
pub fn solve_transport(a: &[f64], b: &[f64], cost: &[f64]) -> Result<TransportPlan> {
    let (m, n) = (a.len(), b.len());
    if m == 0 || n == 0 {
        return Err(Error::EmptyInput("transport between empty measures"));
    }
    if cost.len() != m * n {
        return Err(Error::dims(m * n, cost.len()));
    }
    let exact = exact_scaling(a, b);
    let exact_weights = exact.is_some();
    let (supply, demand, denominator) = exact.unwrap_or_else(|| (a.to_vec(), b.to_vec(), 1.0));

    let solution = simplex::solve(&simplex::Problem { supply: &supply, demand: &demand, cost })?;
    let flow: Vec<f64> = solution.flow.iter().map(|x| x / denominator).collect();
    let cost_value = flow.iter().zip(cost).map(|(x, c)| x * c).sum::<f64>();
    Ok(TransportPlan {
        rows: m,
        cols: n,
        flow,
        cost_value,
        basis: solution.basis,
        exact_weights,
        pivots: solution.iterations,
    })
}

/// A Lipschitz-1 potential certifying optimality of a transport plan.
///
/// `f(x) = min_j (d(x, ν_j) - v_j)` where `v` are the sink potentials of the
/// optimal basis; `values` tabulates `f` on the union of both supports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualWitness {
    pub support_points: Vec<Point>,
    pub values: Vec<f64>,
    pub dual_value: f64,
    pub primal_value: f64,
    pub lipschitz_modulus: f64,
    /// See [`lipschitz_excess`].
    pub lipschitz_excess: f64,
    pub metric: Metric,
    /// ν atoms and their potentials; together they define `f` everywhere.
    pub anchors: Vec<Point>,
    pub anchor_potentials: Vec<f64>,
}

impl DualWitness {
    /// c-transform evaluation at an arbitrary point.
    pub fn evaluate(&self, x: &Point) -> f64 {
        c_transform(x, &self.anchors, &self.anchor_potentials, self.metric)
    }

    pub fn gap(&self) -> f64 {
        (self.dual_value - self.primal_value).abs()
    }
}

pub fn c_transform(x: &Point, anchors: &[Point], potentials: &[f64], metric: Metric) -> f64 {
    anchors
        .iter()
        .zip(potentials)
        .map(|(q, v)| metric.dist(x, q) - v)
        .fold(f64::INFINITY, f64::min)
}

fn union_support(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<Point> {
    let mut seen = std::collections::HashSet::new();
    mu.atoms()
        .iter()
        .chain(nu.atoms())
        .filter(|p| seen.insert(p.key()))
        .cloned()
        .collect()
}

/// Dual potential for an optimal `plan`, checked against it.
///
/// Fails with [`Error::CertificateFailure`] when the witness is not
/// Lipschitz-1 on the union support or its value misses the primal cost by
/// more than [`DUALITY_GAP`].
pub fn dual_witness(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plan: &TransportPlan,
    metric: Metric,
) -> Result<DualWitness> {
    if mu.dim() != nu.dim() {
        return Err(Error::dims(mu.dim(), nu.dim()));
    }
    if plan.rows != mu.len() || plan.cols != nu.len() {
        return Err(Error::InvalidInput(format!(
            "plan is {}x{} but measures have {} and {} atoms",
            plan.rows,
            plan.cols,
            mu.len(),
            nu.len()
        )));
    }
    let cost = cost_matrix(mu, nu, metric);
    let (_, v) = simplex::potentials(plan.rows, plan.cols, &cost, &plan.basis)?;
    let anchors = nu.atoms().to_vec();

    let support_points = union_support(mu, nu);
    let values: Vec<f64> =
        support_points.iter().map(|p| c_transform(p, &anchors, &v, metric)).collect();
    let f = |p: &Point| c_transform(p, &anchors, &v, metric);
    let dual_value = mu.expectation(f) - nu.expectation(f);

    let modulus = if support_points.len() >= 2 {
        lipschitz_modulus(&support_points, &values, metric)?
    } else {
        0.0
    };
    let excess = lipschitz_excess(&support_points, &values, metric)?;
    let witness = DualWitness {
        support_points,
        values,
        dual_value,
        primal_value: plan.cost_value,
        lipschitz_modulus: modulus,
        lipschitz_excess: excess,
        metric,
        anchors,
        anchor_potentials: v,
    };
    verify_witness(&witness)?;
    Ok(witness)
}

fn verify_witness(w: &DualWitness) -> Result<()> {
    if w.lipschitz_excess > LIPSCHITZ_SLACK {
        return Err(Error::CertificateFailure(format!(
            "witness violates Lipschitz-1: |f(p) - f(q)| exceeds d(p, q) by {}",
            w.lipschitz_excess
        )));
    }
    if w.gap() > DUALITY_GAP {
        return Err(Error::CertificateFailure(format!(
            "duality gap {} exceeds {DUALITY_GAP} (primal {}, dual {})",
            w.gap(),
            w.primal_value,
            w.dual_value
        )));
    }
    Ok(())
}

/// Solve and certify in one step.
pub fn w1_certified(mu: &DiscreteMeasure, nu: &DiscreteMeasure, metric: Metric) -> Result<(TransportPlan, DualWitness)> {
    let (_, plan) = w1_exact(mu, nu, metric)?;
    let witness = dual_witness(mu, nu, &plan, metric)?;
    Ok((plan, witness))
}

/// `max_{p ≠ q} (|f(p) - f(q)| - d(p, q))`, floored at 0: how far `f`
/// is from Lipschitz-1 in absolute terms. Unlike the modulus ratio this is
/// not inflated by rounding between nearly coincident points.
pub fn lipschitz_excess(points: &[Point], values: &[f64], metric: Metric) -> Result<f64> {
    if points.len() != values.len() {
        return Err(Error::InvalidInput(format!("{} points but {} values", points.len(), values.len())));
    }
    let mut worst = 0.0f64;
    for (a, (p, fp)) in points.iter().zip(values).enumerate() {
        for (q, fq) in points.iter().zip(values).skip(a + 1) {
            if p.dim() != q.dim() {
                return Err(Error::dims(p.dim(), q.dim()));
            }
            worst = worst.max((fp - fq).abs() - metric.dist(p, q));
        }
    }
    Ok(worst)
}

/// `max_{p ≠ q} |f(p) - f(q)| / d(p, q)`.
pub fn lipschitz_modulus(points: &[Point], values: &[f64], metric: Metric) -> Result<f64> {
    if points.len() != values.len() {
        return Err(Error::InvalidInput(format!(
            "{} points but {} values",
            points.len(),
            values.len()
        )));
    }
    if points.len() < 2 {
        return Err(Error::DegenerateInput("need at least two points".into()));
    }
    let dim = points[0].dim();
    let mut best = 0.0f64;
    for (a, (p, fp)) in points.iter().zip(values).enumerate() {
        if p.dim() != dim {
            return Err(Error::dims(dim, p.dim()));
        }
        for (q, fq) in points.iter().zip(values).skip(a + 1) {
            let d = metric.dist(p, q);
            if d == 0.0 {
                return Err(Error::DegenerateInput(format!("duplicate point {:?}", p.coords())));
            }
            best = best.max((fp - fq).abs() / d);
        }
    }
    Ok(best)
}
