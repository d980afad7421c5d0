//! The ε-certificate: a piecewise discriminator whose value comes within ε of
//! the conditional objective, with every link of the bound chain recorded.
//!
//! For `y` in box `C_k` with representative `y_k` and potential `f_k`:
//!
//! ```text
//! E F(y)  <=  ε/4 + E F(y_k)                                  (F varies by <= ε/4 in a box)
//!         <=  3ε/4 + E_y [E_{π(·|y_k)} f_k - E_{G(y)} f_k]     (generator moves by <= ε/4)
//!         <=  ε + E_y [E_{π(·|y)} f_k - E_{G(y)} f_k]  =  ε + V(D^ε)
//! ```

use serde::Serialize;

use super::{build_cover, build_piecewise_discriminator, discriminator_value, empirical_moduli, select_delta};
use super::{ModulusTable, PiecewiseDiscriminator};
use crate::duality::Instance;
use crate::error::{Error, Result};
use crate::generator::{GeneratorSpec, LatentSpec};
use crate::measures::JointMeasure;
use crate::metric::Metric;
use crate::report::fmt_f64;

/// Tolerance on every slack in the chain and on the final verdict.
pub const CHAIN_TOLERANCE: f64 = 1e-7;
/// Tolerance on `V(D^ε) <= rhs`.
pub const DUAL_DOMINATION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainBounds {
    /// `ε/4 + E_y F(y_k(y))`.
    #[serde(rename = "bound_F_eps")]
    pub bound_f_eps: f64,
    /// Per box, the smallest slack of `F(y_k) <= ε/2 + E_{π(·|y_k)} f_k - E_{G(y)} f_k`
    /// over its members, and of `F(y_k) <= ε/4 + dual(f_k)`.
    pub per_k_slacks: Vec<f64>,
    /// `3ε/4 + E_y [E_{π(·|y_k)} f_k - E_{G(y)} f_k]`.
    #[serde(rename = "total_F_bound")]
    pub total_f_bound: f64,
}

/// Slack of each inequality in the chain, in order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSlacks {
    pub lhs_to_bound: f64,
    pub bound_to_total: f64,
    pub total_to_final: f64,
}

impl StepSlacks {
    fn min(&self) -> f64 {
        self.lhs_to_bound.min(self.bound_to_total).min(self.total_to_final)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub epsilon: f64,
    pub delta: f64,
    /// Scale handed to the cover: `delta`, or `2 delta` when no pair binds.
    pub cover_delta: f64,
    pub boxes: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub v_deps: f64,
    /// `lhs - V(D^ε)`.
    pub gap: f64,
    pub chain: ChainBounds,
    pub steps: StepSlacks,
    /// `lhs <= V(D^ε) + ε`.
    pub within_epsilon: bool,
    /// `V(D^ε) <= rhs`.
    pub below_dual: bool,
    pub pass: bool,
}

impl Certificate {
    pub fn to_json(&self) -> String {
        crate::report::to_json_string(self)
    }

    /// Fails with [`Error::InvariantViolation`] on a failed verdict or a
    /// chain slack below `-1e-7`.
    pub fn check(&self) -> Result<()> {
        if let Some((k, s)) = self.chain.per_k_slacks.iter().enumerate().find(|(_, &s)| s < -CHAIN_TOLERANCE) {
            return Err(Error::InvariantViolation(format!("bound chain breaks in box {k} (slack {s})")));
        }
        if self.steps.min() < -CHAIN_TOLERANCE {
            return Err(Error::InvariantViolation(format!("bound chain breaks: {:?}", self.steps)));
        }
        if !self.within_epsilon {
            return Err(Error::InvariantViolation(format!(
                "lhs {} exceeds V(D^eps) + eps = {}",
                self.lhs,
                self.v_deps + self.epsilon
            )));
        }
        if !self.below_dual {
            return Err(Error::InvariantViolation(format!("V(D^eps) {} exceeds rhs {}", self.v_deps, self.rhs)));
        }
        Ok(())
    }
}

/// Precomputed pieces shared by every ε of a study.
struct Context<'a> {
    inst: &'a Instance,
    table: ModulusTable,
    rhs: f64,
}

impl<'a> Context<'a> {
    fn new(inst: &'a Instance) -> Result<Self> {
        let table = empirical_moduli(inst)?;
        let solves = inst.solve_conditions()?;
        let rhs = inst.y_weights().iter().zip(&solves).map(|(w, s)| w * s.witness.dual_value).sum();
        Ok(Context { inst, table, rhs })
    }

    fn lhs(&self) -> f64 {
        self.inst.y_weights().iter().zip(&self.table.f_values).map(|(w, f)| w * f).sum()
    }

    fn certify(&self, epsilon: f64) -> Result<(Certificate, PiecewiseDiscriminator)> {
        let inst = self.inst;
        let quarter = epsilon / 4.0;
        let delta = select_delta(&self.table, epsilon)?;
        // With no binding constraint every scale is admissible; cover by one box.
        let cover_delta = if self.table.holds_below(f64::INFINITY, quarter) { 2.0 * delta } else { delta };
        let cover = build_cover(inst.y_atoms(), cover_delta)?;
        let d = build_piecewise_discriminator(inst, &cover, quarter)?;
        let lhs = self.lhs();
        let v_deps = discriminator_value(inst, &d);

        let real_at_rep: Vec<f64> =
            d.pieces.iter().map(|p| inst.real(p.representative).expectation(|x| p.evaluate(x))).collect();
        let mut per_k_slacks: Vec<f64> = d.pieces.iter().map(|p| p.slack).collect();
        let mut expected_rep_f = 0.0;
        let mut middle = 0.0;
        for (k, &wy) in inst.y_weights().iter().enumerate() {
            let b = cover.assignment[k];
            let piece = &d.pieces[b];
            let f_rep = self.table.f_values[piece.representative];
            let generated = inst.generated(k).expectation(|x| piece.evaluate(x));
            expected_rep_f += wy * f_rep;
            middle += wy * (real_at_rep[b] - generated);
            per_k_slacks[b] = per_k_slacks[b].min(2.0 * quarter + real_at_rep[b] - generated - f_rep);
        }
        let bound_f_eps = quarter + expected_rep_f;
        let total_f_bound = 3.0 * quarter + middle;
        let steps = StepSlacks {
            lhs_to_bound: bound_f_eps - lhs,
            bound_to_total: total_f_bound - bound_f_eps,
            total_to_final: epsilon + v_deps - total_f_bound,
        };
        let within_epsilon = lhs <= v_deps + epsilon + CHAIN_TOLERANCE;
        let below_dual = v_deps <= self.rhs + DUAL_DOMINATION_SLACK;
        let chain_holds = steps.min() >= -CHAIN_TOLERANCE && per_k_slacks.iter().all(|&s| s >= -CHAIN_TOLERANCE);
        let cert = Certificate {
            epsilon,
            delta,
            cover_delta,
            boxes: cover.len(),
            lhs,
            rhs: self.rhs,
            v_deps,
            gap: lhs - v_deps,
            chain: ChainBounds { bound_f_eps, per_k_slacks, total_f_bound },
            steps,
            within_epsilon,
            below_dual,
            pass: within_epsilon && below_dual && chain_holds,
        };
        Ok((cert, d))
    }
}

/// Certificate record without the final check, together with the
/// discriminator it describes.
pub fn epsilon_certificate_unchecked(inst: &Instance, epsilon: f64) -> Result<(Certificate, PiecewiseDiscriminator)> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    Context::new(inst)?.certify(epsilon)
}

/// Builds `D^ε` and checks `lhs <= V(D^ε) + ε` and `V(D^ε) <= rhs`.
pub fn epsilon_certificate(
    joint: &JointMeasure,
    g: &GeneratorSpec,
    eta: &LatentSpec,
    metric: Metric,
    epsilon: f64,
) -> Result<Certificate> {
    let inst = Instance::new(joint, g, eta, metric)?;
    let (cert, _) = epsilon_certificate_unchecked(&inst, epsilon)?;
    cert.check()?;
    Ok(cert)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub epsilon: f64,
    pub delta: f64,
    pub lhs: f64,
    pub v_deps: f64,
    pub gap: f64,
}

/// One checked certificate per ε of a strictly decreasing schedule.
pub fn convergence_study(inst: &Instance, schedule: &[f64]) -> Result<Vec<ConvergenceRow>> {
    if schedule.is_empty() {
        return Err(Error::InvalidInput("empty epsilon schedule".into()));
    }
    if let Some(&bad) = schedule.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidEpsilon(bad));
    }
    if schedule.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("epsilon schedule must be strictly decreasing".into()));
    }
    let ctx = Context::new(inst)?;
    schedule
        .iter()
        .map(|&epsilon| {
            let (cert, _) = ctx.certify(epsilon)?;
            cert.check()?;
            Ok(ConvergenceRow { epsilon, delta: cert.delta, lhs: cert.lhs, v_deps: cert.v_deps, gap: cert.gap })
        })
        .collect()
}

pub fn convergence_table_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("epsilon,delta,lhs,v_deps,gap\n");
    for r in rows {
        let cells = [r.epsilon, r.delta, r.lhs, r.v_deps, r.gap].map(fmt_f64);
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
