//! The three objectives compared by this crate:
//!
//! * `lhs`: `E_{y~π(y)} W1(G(y), π(·|y))`, the averaged conditional distance;
//! * `rhs`: `sup_D E_{(x,y)~π}[D(x,y) - E_z D(G(z,y),y)]` over `D` Lipschitz-1
//!   in `x` only. On a finite y-support the supremum splits into independent
//!   per-condition Kantorovich–Rubinstein problems;
//! * `joint`: `W1(π̃, π)` on `X × Y` where `π̃` pairs `π(y)` with `G(y)`.
//!
//! `lhs = rhs` on finite supports (strong duality per condition), and
//! `joint <= lhs` since gluing the per-condition couplings with the identity
//! on `y` is admissible for the joint problem.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generator::{self, GeneratorSpec, LatentSpec};
use crate::measures::{self, ConditionalTable, DiscreteMeasure, JointMeasure, Point};
use crate::metric::{Metric, ProductMetric};
use crate::par;
use crate::transport::{self, DualWitness, TransportPlan, DUALITY_GAP, LIPSCHITZ_SLACK};

/// Tolerance on `joint <= lhs`.
pub const DOMINATION_SLACK: f64 = 1e-9;
/// Tolerance on recomputing `lhs` from its per-condition terms.
pub const RECOMPUTE_TOLERANCE: f64 = 1e-12;

/// A joint law with a generator: conditionals and pushforwards precomputed
/// once per y-atom.
#[derive(Debug, Clone)]
pub struct Instance {
    pub joint: JointMeasure,
    pub table: ConditionalTable,
    /// `G(y)` per y-atom, in y-atom order.
    pub generated: Vec<DiscreteMeasure>,
    pub generator: GeneratorSpec,
    pub latent: LatentSpec,
    pub metric: Metric,
}

impl Instance {
    pub fn new(joint: &JointMeasure, g: &GeneratorSpec, eta: &LatentSpec, metric: Metric) -> Result<Self> {
        if g.dim_y() != joint.dim_y() {
            return Err(Error::dims(joint.dim_y(), g.dim_y()));
        }
        if g.dim_x() != joint.dim_x() {
            return Err(Error::dims(joint.dim_x(), g.dim_x()));
        }
        if eta.dim() != g.dim_z() {
            return Err(Error::dims(g.dim_z(), eta.dim()));
        }
        let table = measures::decompose(joint);
        let generated = par::try_map(&table.y_atoms, |y| generator::pushforward(g, eta, y))?;
        Ok(Instance {
            joint: joint.clone(),
            table,
            generated,
            generator: g.clone(),
            latent: eta.clone(),
            metric,
        })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn y_atoms(&self) -> &[Point] {
        &self.table.y_atoms
    }

    pub fn y_weights(&self) -> &[f64] {
        &self.table.y_weights
    }

    pub fn real(&self, k: usize) -> &DiscreteMeasure {
        &self.table.conditionals[k]
    }

    pub fn generated(&self, k: usize) -> &DiscreteMeasure {
        &self.generated[k]
    }

    /// Primal and dual solve of `W1(π(·|y_k), G(y_k))`.
    pub fn solve_condition(&self, k: usize) -> Result<ConditionSolve> {
        let (real, generated) = (self.real(k), self.generated(k));
        let (plan, witness) = transport::w1_certified(real, generated, self.metric)?;
        Ok(ConditionSolve { index: k, plan, witness })
    }

    /// All condition solves, in y-atom order.
    pub fn solve_conditions(&self) -> Result<Vec<ConditionSolve>> {
        par::try_map_range(self.len(), |k| self.solve_condition(k))
    }

    /// `π̃`: atoms `(G(z_i, y_j), y_j)` with weights `η_i π(y_j)`.
    pub fn generated_joint(&self) -> Result<JointMeasure> {
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for ((y, wy), gen) in self.table.y_atoms.iter().zip(&self.table.y_weights).zip(&self.generated) {
            for (x, wx) in gen.iter() {
                atoms.push((x.clone(), y.clone()));
                weights.push(wy * wx);
            }
        }
        JointMeasure::new(atoms, weights)
    }
}

#[derive(Debug, Clone)]
pub struct ConditionSolve {
    pub index: usize,
    pub plan: TransportPlan,
    pub witness: DualWitness,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerYTerm {
    pub index: usize,
    pub y: Point,
    pub weight: f64,
    pub w1: f64,
}

/// `f_y` tabulated on the union of the real and generated x-supports of `y`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessEntry {
    pub index: usize,
    pub y: Point,
    pub points: Vec<Point>,
    pub values: Vec<f64>,
    pub dual_value: f64,
    pub lipschitz_modulus: f64,
    pub lipschitz_excess: f64,
}

fn per_y_terms(inst: &Instance, solves: &[ConditionSolve]) -> Vec<PerYTerm> {
    solves
        .iter()
        .map(|s| PerYTerm {
            index: s.index,
            y: inst.y_atoms()[s.index].clone(),
            weight: inst.y_weights()[s.index],
            w1: s.plan.cost_value,
        })
        .collect()
}

fn witness_table(inst: &Instance, solves: &[ConditionSolve]) -> Vec<WitnessEntry> {
    solves
        .iter()
        .map(|s| WitnessEntry {
            index: s.index,
            y: inst.y_atoms()[s.index].clone(),
            points: s.witness.support_points.clone(),
            values: s.witness.values.clone(),
            dual_value: s.witness.dual_value,
            lipschitz_modulus: s.witness.lipschitz_modulus,
            lipschitz_excess: s.witness.lipschitz_excess,
        })
        .collect()
}

fn weighted_sum(weights: &[f64], values: impl Iterator<Item = f64>) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

/// `E_y W1(G(y), π(·|y))` with its per-condition terms.
pub fn lhs_conditional_objective(
    joint: &JointMeasure,
    g: &GeneratorSpec,
    eta: &LatentSpec,
    metric: Metric,
) -> Result<(f64, Vec<PerYTerm>)> {
    let inst = Instance::new(joint, g, eta, metric)?;
    let values = par::try_map_range(inst.len(), |k| {
        transport::w1_exact(inst.real(k), inst.generated(k), metric).map(|(w, _)| w)
    })?;
    let terms: Vec<PerYTerm> = values
        .iter()
        .enumerate()
        .map(|(k, &w1)| PerYTerm { index: k, y: inst.y_atoms()[k].clone(), weight: inst.y_weights()[k], w1 })
        .collect();
    let value = weighted_sum(inst.y_weights(), values.into_iter());
    Ok((value, terms))
}

/// Supremum over discriminators Lipschitz-1 in `x` only, with the optimal
/// per-condition potentials.
pub fn rhs_partial_dual(
    joint: &JointMeasure,
    g: &GeneratorSpec,
    eta: &LatentSpec,
    metric: Metric,
) -> Result<(f64, Vec<WitnessEntry>)> {
    let inst = Instance::new(joint, g, eta, metric)?;
    let solves = inst.solve_conditions()?;
    let value = weighted_sum(inst.y_weights(), solves.iter().map(|s| s.witness.dual_value));
    Ok((value, witness_table(&inst, &solves)))
}

/// `W1` between two joint laws on `X × Y` under a product metric.
pub fn joint_w1(
    joint_real: &JointMeasure,
    joint_gen: &JointMeasure,
    x_metric: Metric,
    product_metric: ProductMetric,
) -> Result<f64> {
    if joint_real.dim_x() != joint_gen.dim_x() {
        return Err(Error::dims(joint_real.dim_x(), joint_gen.dim_x()));
    }
    if joint_real.dim_y() != joint_gen.dim_y() {
        return Err(Error::dims(joint_real.dim_y(), joint_gen.dim_y()));
    }
    let rows = par::map(joint_real.atoms(), |(x, y)| {
        joint_gen
            .atoms()
            .iter()
            .map(|(x2, y2)| product_metric.distance(x_metric, (x.coords(), x2.coords()), (y.coords(), y2.coords())))
            .collect::<Vec<f64>>()
    });
    let cost: Vec<f64> = rows.into_iter().flatten().collect();
    let plan = transport::solve_transport(joint_real.weights(), joint_gen.weights(), &cost)?;
    Ok(plan.cost_value)
}

/// The three objectives side by side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObjectiveReport {
    pub lhs_value: f64,
    pub rhs_value: f64,
    pub joint_value: f64,
    /// `lhs - joint`.
    pub gap: f64,
    pub per_y_terms: Vec<PerYTerm>,
    pub witness: Vec<WitnessEntry>,
    pub metric: Metric,
    pub product_metric: ProductMetric,
}

impl ObjectiveReport {
    /// Fails with [`Error::InvariantViolation`] when any identity relating the
    /// three objectives is broken.
    pub fn check_invariants(&self) -> Result<()> {
        let recomputed: f64 = self.per_y_terms.iter().map(|t| t.weight * t.w1).sum();
        if (recomputed - self.lhs_value).abs() > RECOMPUTE_TOLERANCE {
            return Err(Error::InvariantViolation(format!(
                "lhs {} differs from the sum of its terms {recomputed}",
                self.lhs_value
            )));
        }
        if (self.lhs_value - self.rhs_value).abs() > DUALITY_GAP {
            return Err(Error::InvariantViolation(format!(
                "|lhs - rhs| = {} exceeds {DUALITY_GAP} (lhs {}, rhs {})",
                (self.lhs_value - self.rhs_value).abs(),
                self.lhs_value,
                self.rhs_value
            )));
        }
        if self.joint_value > self.lhs_value + DOMINATION_SLACK {
            return Err(Error::InvariantViolation(format!(
                "joint objective {} exceeds conditional objective {}",
                self.joint_value, self.lhs_value
            )));
        }
        if let Some(w) = self.witness.iter().find(|w| w.lipschitz_excess > LIPSCHITZ_SLACK) {
            return Err(Error::InvariantViolation(format!(
                "witness for y-atom {} has Lipschitz modulus {} in x",
                w.index, w.lipschitz_modulus
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        crate::report::to_json_string(self)
    }
}

/// All three objectives without the invariant check.
pub fn objective_report_unchecked(inst: &Instance, product_metric: ProductMetric) -> Result<ObjectiveReport> {
    let solves = inst.solve_conditions()?;
    let per_y_terms = per_y_terms(inst, &solves);
    let lhs_value = weighted_sum(inst.y_weights(), solves.iter().map(|s| s.plan.cost_value));
    let rhs_value = weighted_sum(inst.y_weights(), solves.iter().map(|s| s.witness.dual_value));
    let joint_gen = inst.generated_joint()?;
    let joint_value = joint_w1(&inst.joint, &joint_gen, inst.metric, product_metric)?;
    Ok(ObjectiveReport {
        lhs_value,
        rhs_value,
        joint_value,
        gap: lhs_value - joint_value,
        per_y_terms,
        witness: witness_table(inst, &solves),
        metric: inst.metric,
        product_metric,
    })
}

pub fn objective_report(
    joint: &JointMeasure,
    g: &GeneratorSpec,
    eta: &LatentSpec,
    metric: Metric,
    product_metric: ProductMetric,
) -> Result<ObjectiveReport> {
    let inst = Instance::new(joint, g, eta, metric)?;
    let report = objective_report_unchecked(&inst, product_metric)?;
    report.check_invariants()?;
    Ok(report)
}

/// `E_{(x,y)~π}[D(x,y)] - E_y E_z[D(G(z,y), y)]` for a discriminator given
/// per y-atom.
pub fn discriminator_value(inst: &Instance, mut d: impl FnMut(usize, &Point) -> f64) -> f64 {
    let mut total = 0.0;
    for (k, &wy) in inst.y_weights().iter().enumerate() {
        let real = inst.real(k).expectation(|x| d(k, x));
        let fake = inst.generated(k).expectation(|x| d(k, x));
        total += wy * (real - fake);
    }
    total
}
