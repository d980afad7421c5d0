//! Pairwise moduli of continuity in `y` and the choice of cover scale.

use serde::Serialize;

use crate::duality::Instance;
use crate::error::{Error, Result};
use crate::generator;
use crate::measures::{bounding_box, Point};
use crate::metric::Metric;
use crate::par;
use crate::transport;

/// Tolerance on `|F(y) - F(y')| <= W1(π(·|y), π(·|y')) + E_z d(G(z,y), G(z,y'))`.
pub const LEMMA_TOLERANCE: f64 = 1e-9;

/// Relative width at which the scale bisection stops.
const BISECTION_RELATIVE: f64 = 1e-6;

/// Pairwise quantities over the y-support, stored as dense symmetric
/// row-major `m × m` tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModulusTable {
    pub y_atoms: Vec<Point>,
    /// Euclidean distance between y-atoms.
    pub y_distance: Vec<f64>,
    /// `W1(π(·|y_i), π(·|y_j))`.
    pub conditional: Vec<f64>,
    /// `E_z d(G(z, y_i), G(z, y_j))` in the ground metric on X.
    pub generator: Vec<f64>,
    /// `F(y_i) = W1(G(y_i), π(·|y_i))`.
    pub f_values: Vec<f64>,
}

impl ModulusTable {
    pub fn len(&self) -> usize {
        self.y_atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_atoms.is_empty()
    }

    fn at(&self, table: &[f64], i: usize, j: usize) -> f64 {
        table[i * self.len() + j]
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.at(&self.y_distance, i, j)
    }

    pub fn conditional_modulus(&self, i: usize, j: usize) -> f64 {
        self.at(&self.conditional, i, j)
    }

    pub fn generator_modulus(&self, i: usize, j: usize) -> f64 {
        self.at(&self.generator, i, j)
    }

    /// Whether all three moduli stay within `bound` for every pair closer
    /// than `delta`.
    pub fn holds_below(&self, delta: f64, bound: f64) -> bool {
        self.violations(bound).all(|(d, _, _)| d >= delta)
    }

    /// Pairs `(distance, i, j)` with some modulus above `bound`.
    fn violations(&self, bound: f64) -> impl Iterator<Item = (f64, usize, usize)> + '_ {
        let m = self.len();
        (0..m).flat_map(move |i| (i + 1..m).map(move |j| (i, j))).filter_map(move |(i, j)| {
            let f_gap = (self.f_values[i] - self.f_values[j]).abs();
            let bad = f_gap > bound || self.conditional_modulus(i, j) > bound || self.generator_modulus(i, j) > bound;
            bad.then(|| (self.distance(i, j), i, j))
        })
    }
}

/// Tabulates `F` and both moduli over all pairs of y-atoms.
pub fn empirical_moduli(inst: &Instance) -> Result<ModulusTable> {
    let m = inst.len();
    let metric = inst.metric;
    let f_values =
        par::try_map_range(m, |k| transport::w1_exact(inst.real(k), inst.generated(k), metric).map(|(v, _)| v))?;
    let rows = par::try_map_range(m, |i| {
        let mut row = Vec::with_capacity(m - i);
        for j in i + 1..m {
            let (ci, cj) = (inst.real(i), inst.real(j));
            let (cond, _) = transport::w1_exact(ci, cj, metric)?;
            let (yi, yj) = (&inst.y_atoms()[i], &inst.y_atoms()[j]);
            let gen = generator::generator_modulus(&inst.generator, &inst.latent, yi, yj, metric)?;
            row.push((Metric::Euclidean.dist(yi, yj), cond, gen));
        }
        Ok(row)
    })?;
    let mut y_distance = vec![0.0; m * m];
    let mut conditional = vec![0.0; m * m];
    let mut generator = vec![0.0; m * m];
    for (i, row) in rows.into_iter().enumerate() {
        for (offset, (d, c, g)) in row.into_iter().enumerate() {
            let j = i + 1 + offset;
            for (table, value) in [(&mut y_distance, d), (&mut conditional, c), (&mut generator, g)] {
                table[i * m + j] = value;
                table[j * m + i] = value;
            }
        }
    }
    Ok(ModulusTable { y_atoms: inst.y_atoms().to_vec(), y_distance, conditional, generator, f_values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairSlack {
    pub i: usize,
    pub j: usize,
    /// `|F(y_i) - F(y_j)|`.
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// Checks the modulus inequality for `F` on every pair; fails with
/// [`Error::InvariantViolation`] if a slack drops below `-1e-9`.
pub fn lemma1_check(table: &ModulusTable) -> Result<Vec<PairSlack>> {
    let m = table.len();
    let mut out = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            let lhs = (table.f_values[i] - table.f_values[j]).abs();
            let rhs = table.conditional_modulus(i, j) + table.generator_modulus(i, j);
            let slack = rhs - lhs;
            if slack < -LEMMA_TOLERANCE {
                return Err(Error::InvariantViolation(format!(
                    "|F(y_{i}) - F(y_{j})| = {lhs} exceeds the modulus bound {rhs}"
                )));
            }
            out.push(PairSlack { i, j, lhs, rhs, slack });
        }
    }
    Ok(out)
}

/// Largest cover scale `δ` (up to relative bisection width `1e-6`) such that
/// every pair of y-atoms closer than `δ` has `|F(y) - F(y')|`, the
/// conditional modulus and the generator modulus all at most `ε/4`.
///
/// The scale is capped at the diameter of the y-support. A single-point
/// support has every scale admissible; `1` is returned.
pub fn select_delta(table: &ModulusTable, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let diameter = bounding_box(&table.y_atoms, 0.0)?.diameter();
    if diameter == 0.0 {
        return Ok(1.0);
    }
    let bound = epsilon / 4.0;
    if table.holds_below(diameter, bound) {
        return Ok(diameter);
    }
    let (mut lo, mut hi) = (0.0, diameter);
    while hi - lo > BISECTION_RELATIVE * hi {
        let mid = 0.5 * (lo + hi);
        if table.holds_below(mid, bound) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    debug_assert!(lo > 0.0);
    Ok(lo)
}
