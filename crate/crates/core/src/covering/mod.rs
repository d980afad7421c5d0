//! Box covers of the condition space and discriminators that are piecewise
//! constant in `y`.
//!
//! A [`CoverPartition`] is a uniform grid of half-open boxes anchored at the
//! corner of the y-support's bounding box; only boxes that meet the support
//! are kept. A [`PiecewiseDiscriminator`] assigns to every retained box the
//! optimal potential of its representative condition, so that
//! `D(x, y) = Σ_k 1_{C_k}(y) f_k(x)` is Lipschitz-1 in `x` for every `y`
//! and arbitrary in `y`.

mod certificate;
mod moduli;

use std::collections::{BTreeMap, HashSet};

use serde::Serialize;

use crate::duality::Instance;
use crate::error::{Error, Result};
use crate::measures::{bounding_box, AxisBox, Point};
use crate::metric::Metric;
use crate::par;
use crate::transport::{self, DualWitness, LIPSCHITZ_SLACK};

pub use certificate::{
    convergence_study, convergence_table_csv, epsilon_certificate, epsilon_certificate_unchecked, Certificate,
    ChainBounds, ConvergenceRow, StepSlacks, CHAIN_TOLERANCE,
};
pub use moduli::{empirical_moduli, lemma1_check, select_delta, ModulusTable, PairSlack, LEMMA_TOLERANCE};

/// Upper limit on the number of grid cells spanned by a cover.
pub const MAX_GRID_CELLS: f64 = 1e7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverBox {
    pub grid_index: Vec<i64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    /// Support indices inside the box, ascending.
    pub members: Vec<usize>,
    /// Lowest member index.
    pub representative: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverPartition {
    pub domain: AxisBox,
    /// Cell width per axis.
    pub widths: Vec<f64>,
    pub delta: f64,
    pub boxes: Vec<CoverBox>,
    /// Retained box of each support atom.
    pub assignment: Vec<usize>,
    #[serde(skip)]
    lookup: BTreeMap<Vec<i64>, usize>,
}

impl CoverPartition {
    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Euclidean diameter shared by all boxes.
    pub fn box_diameter(&self) -> f64 {
        self.widths.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    /// Grid cell containing `y`; membership is defined by this index, which
    /// makes the boxes disjoint exactly.
    pub fn grid_index(&self, y: &Point) -> Vec<i64> {
        y.coords()
            .iter()
            .zip(self.domain.low.iter().zip(&self.widths))
            .map(|(c, (lo, w))| ((c - lo) / w).floor() as i64)
            .collect()
    }

    /// Retained box containing `y`, if any.
    pub fn locate(&self, y: &Point) -> Option<usize> {
        if y.dim() != self.domain.dim() {
            return None;
        }
        self.lookup.get(&self.grid_index(y)).copied()
    }

    pub fn representatives(&self) -> Vec<usize> {
        self.boxes.iter().map(|b| b.representative).collect()
    }

    fn from_grid(domain: AxisBox, widths: Vec<f64>, delta: f64, support: &[Point], inherit: Option<&[usize]>) -> Self {
        let mut partition = CoverPartition {
            domain,
            widths,
            delta,
            boxes: Vec::new(),
            assignment: Vec::new(),
            lookup: BTreeMap::new(),
        };
        let mut groups: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
        for (i, y) in support.iter().enumerate() {
            groups.entry(partition.grid_index(y)).or_default().push(i);
        }
        let preferred: HashSet<usize> = inherit.map(|r| r.iter().copied().collect()).unwrap_or_default();
        let mut assignment = vec![0; support.len()];
        for (k, (grid_index, members)) in groups.into_iter().enumerate() {
            let low: Vec<f64> = grid_index
                .iter()
                .zip(partition.domain.low.iter().zip(&partition.widths))
                .map(|(&i, (lo, w))| lo + i as f64 * w)
                .collect();
            let high = low.iter().zip(&partition.widths).map(|(l, w)| l + w).collect();
            let representative = members.iter().copied().find(|m| preferred.contains(m)).unwrap_or(members[0]);
            for &m in &members {
                assignment[m] = k;
            }
            partition.lookup.insert(grid_index.clone(), k);
            partition.boxes.push(CoverBox { grid_index, low, high, members, representative });
        }
        partition.assignment = assignment;
        partition
    }

    /// Splits every cell in half along each axis. Fine boxes keep their
    /// parent's representative when it falls inside them.
    pub fn refine(&self, support: &[Point]) -> CoverPartition {
        let widths: Vec<f64> = self.widths.iter().map(|w| w / 2.0).collect();
        let reps = self.representatives();
        CoverPartition::from_grid(self.domain.clone(), widths, self.delta / 2.0, support, Some(&reps))
    }
}

/// Uniform grid cover of `y_support` by half-open boxes of diameter `< delta`.
///
/// The bounding box of the support is cut into cells of common width
/// `h = e / N` with `e` the largest extent and `N = ⌊e √n / δ⌋ + 1`. When the
/// whole bounding box already has diameter below `delta`, a single box is
/// used, enlarged just enough to hold its upper faces.
pub fn build_cover(y_support: &[Point], delta: f64) -> Result<CoverPartition> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidDelta(delta));
    }
    let domain = bounding_box(y_support, 0.0)?;
    let n = domain.dim() as f64;
    let extents = domain.extents();
    let diameter = domain.diameter();

    let widths = if diameter < delta {
        let pad = (delta - diameter) / (2.0 * n.sqrt());
        extents.iter().map(|e| e + pad).collect::<Vec<_>>()
    } else {
        let largest = extents.iter().cloned().fold(0.0, f64::max);
        let cells = (largest * n.sqrt() / delta).floor() + 1.0;
        let h = largest / cells;
        let total: f64 = extents.iter().map(|e| (e / h).floor() + 1.0).product();
        if total.is_nan() || total > MAX_GRID_CELLS {
            return Err(Error::Overflow(format!(
                "cover with delta {delta} needs {total:e} grid cells (limit {MAX_GRID_CELLS:e})"
            )));
        }
        vec![h; domain.dim()]
    };
    let partition = CoverPartition::from_grid(domain, widths, delta, y_support, None);
    debug_assert!(partition.box_diameter() < delta);
    Ok(partition)
}

/// The optimal potential of one box's representative, tabulated on every
/// x-atom that appears for a condition in the box.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Piece {
    pub box_index: usize,
    pub representative: usize,
    /// `F(y_k) = W1(G(y_k), π(·|y_k))`.
    pub representative_value: f64,
    pub witness: DualWitness,
    pub points: Vec<Point>,
    pub values: Vec<f64>,
    pub lipschitz_modulus: f64,
    /// See [`transport::lipschitz_excess`].
    pub lipschitz_excess: f64,
    /// `slack + dual(f_k) - F(y_k)`.
    pub slack: f64,
}

impl Piece {
    pub fn evaluate(&self, x: &Point) -> f64 {
        self.witness.evaluate(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PiecewiseDiscriminator {
    pub partition: CoverPartition,
    pub pieces: Vec<Piece>,
    pub metric: Metric,
}

impl PiecewiseDiscriminator {
    /// `D(x, y)`: the potential of the box holding `y`, zero outside all boxes.
    pub fn evaluate(&self, x: &Point, y: &Point) -> f64 {
        match self.partition.locate(y) {
            Some(k) => self.pieces[k].evaluate(x),
            None => 0.0,
        }
    }

    /// Maximum over pieces of the Lipschitz modulus in `x`.
    pub fn max_lipschitz_modulus(&self) -> f64 {
        self.pieces.iter().map(|p| p.lipschitz_modulus).fold(0.0, f64::max)
    }

    pub fn max_lipschitz_excess(&self) -> f64 {
        self.pieces.iter().map(|p| p.lipschitz_excess).fold(0.0, f64::max)
    }
}

fn distinct_points<'a>(points: impl Iterator<Item = &'a Point>) -> Vec<Point> {
    let mut seen = HashSet::new();
    points.filter(|p| seen.insert(p.key())).cloned().collect()
}

/// Solves each representative's condition exactly and extends its potential
/// by c-transform to all x-atoms relevant to the box.
///
/// Fails with [`Error::CertificateFailure`] when an extended potential is not
/// Lipschitz-1 or when `F(y_k) > slack + dual(f_k)`.
pub fn build_piecewise_discriminator(
    inst: &Instance,
    partition: &CoverPartition,
    slack: f64,
) -> Result<PiecewiseDiscriminator> {
    if slack.is_nan() || slack < 0.0 {
        return Err(Error::InvalidInput(format!("slack {slack} must be non-negative")));
    }
    if partition.assignment.len() != inst.len() {
        return Err(Error::InvalidInput(format!(
            "partition covers {} atoms but the instance has {}",
            partition.assignment.len(),
            inst.len()
        )));
    }
    let pieces = par::try_map(&partition.boxes, |b| {
        let k = partition.lookup[&b.grid_index];
        let rep = b.representative;
        let (plan, witness) = transport::w1_certified(inst.real(rep), inst.generated(rep), inst.metric)?;
        let points = distinct_points(
            b.members
                .iter()
                .flat_map(|&m| inst.real(m).atoms().iter().chain(inst.generated(m).atoms())),
        );
        let values: Vec<f64> = points.iter().map(|p| witness.evaluate(p)).collect();
        let lipschitz_modulus =
            if points.len() >= 2 { transport::lipschitz_modulus(&points, &values, inst.metric)? } else { 0.0 };
        let lipschitz_excess = transport::lipschitz_excess(&points, &values, inst.metric)?;
        if lipschitz_excess > LIPSCHITZ_SLACK {
            return Err(Error::CertificateFailure(format!(
                "extended potential for box {k} exceeds Lipschitz-1 by {lipschitz_excess}"
            )));
        }
        let piece_slack = slack + witness.dual_value - plan.cost_value;
        if piece_slack < -transport::DUALITY_GAP {
            return Err(Error::CertificateFailure(format!(
                "representative {rep} misses its dual value by {}",
                -piece_slack
            )));
        }
        Ok(Piece {
            box_index: k,
            representative: rep,
            representative_value: plan.cost_value,
            witness,
            points,
            values,
            lipschitz_modulus,
            lipschitz_excess,
            slack: piece_slack,
        })
    })?;
    Ok(PiecewiseDiscriminator { partition: partition.clone(), pieces, metric: inst.metric })
}

/// `V(D) = E_{(x,y)~π} D(x, y) - E_y E_z D(G(z, y), y)` for a piecewise
/// discriminator over the instance's own support.
pub fn discriminator_value(inst: &Instance, d: &PiecewiseDiscriminator) -> f64 {
    crate::duality::discriminator_value(inst, |k, x| d.pieces[d.partition.assignment[k]].evaluate(x))
}
