//! Finitely supported probability measures on `R^n` and on `R^{n_X} × R^{n_Y}`,
//! their conditional decomposition, and file I/O.
//!
//! Every constructor merges atoms with bitwise-equal coordinates, drops
//! zero-weight atoms and normalizes the weights. Values are immutable once
//! built; every operation returns a new value.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report;

/// Tolerance on the weight sum accepted from user-supplied data.
pub const INGEST_TOLERANCE: f64 = 1e-6;
/// Tolerance on the weight sum maintained internally.
pub const INTERNAL_TOLERANCE: f64 = 1e-12;

/// A point of `R^n` with finite coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyInput("point has no coordinates"));
        }
        if let Some(c) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::Parse(format!("non-finite coordinate {c}")));
        }
        // -0.0 and 0.0 must merge under bitwise comparison.
        Ok(Point(coords.into_iter().map(|c| c + 0.0).collect()))
    }

    pub fn scalar(c: f64) -> Result<Self> {
        Point::new(vec![c])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn translate(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim() {
            return Err(Error::dims(self.dim(), shift.len()));
        }
        Point::new(self.0.iter().zip(shift).map(|(a, b)| a + b).collect())
    }

    /// Bitwise identity of the coordinates, used for duplicate merging.
    pub fn key(&self) -> Vec<u64> {
        self.0.iter().map(|c| c.to_bits()).collect()
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let coords = Vec::<f64>::deserialize(d)?;
        Point::new(coords).map_err(serde::de::Error::custom)
    }
}

fn checked_weights(weights: &[f64], tolerance: f64) -> Result<f64> {
    if weights.is_empty() {
        return Err(Error::EmptyInput("measure has no atoms"));
    }
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidWeights(format!("weight {w} is negative or not finite")));
        }
    }
    let total: f64 = weights.iter().sum();
    if total == 0.0 {
        return Err(Error::InvalidWeights("all weights are zero".into()));
    }
    if (total - 1.0).abs() > tolerance {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {total}, which is off by more than {tolerance}"
        )));
    }
    Ok(total)
}

/// Rescales only when the sum is outside the internal tolerance, so that an
/// already normalized weight vector survives a save/load cycle bit for bit.
fn normalize(weights: &mut [f64], total: f64) {
    if (total - 1.0).abs() > INTERNAL_TOLERANCE {
        for w in weights.iter_mut() {
            *w /= total;
        }
    }
}

/// A probability measure with finitely many distinct atoms in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    dim: usize,
    atoms: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Builds a measure from user data: weights may be off from 1 by up to
    /// [`INGEST_TOLERANCE`] and are renormalized.
    pub fn new(atoms: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(atoms, weights, INGEST_TOLERANCE)
    }

    pub fn with_tolerance(atoms: Vec<Point>, weights: Vec<f64>, tolerance: f64) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let total = checked_weights(&weights, tolerance)?;
        let dim = atoms[0].dim();
        if let Some(p) = atoms.iter().find(|p| p.dim() != dim) {
            return Err(Error::dims(dim, p.dim()));
        }

        let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(atoms.len());
        let mut merged_atoms = Vec::with_capacity(atoms.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (p, w) in atoms.into_iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            match index.get(&p.key()) {
                Some(&i) => merged_weights[i] += w,
                None => {
                    index.insert(p.key(), merged_atoms.len());
                    merged_atoms.push(p);
                    merged_weights.push(w);
                }
            }
        }
        normalize(&mut merged_weights, total);
        Ok(DiscreteMeasure { dim, atoms: merged_atoms, weights: merged_weights })
    }

    pub fn uniform(atoms: Vec<Point>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n.max(1) as f64; n])
    }

    pub fn dirac(p: Point) -> Self {
        DiscreteMeasure { dim: p.dim(), atoms: vec![p], weights: vec![1.0] }
    }

    /// 1-D convenience constructor.
    pub fn from_scalars(values: &[f64], weights: &[f64]) -> Result<Self> {
        let atoms = values.iter().map(|&v| Point::scalar(v)).collect::<Result<Vec<_>>>()?;
        Self::new(atoms, weights.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[Point] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied())
    }

    /// `∫ f dμ`.
    pub fn expectation(&self, mut f: impl FnMut(&Point) -> f64) -> f64 {
        self.iter().map(|(p, w)| w * f(p)).sum()
    }

    pub fn translate(&self, shift: &[f64]) -> Result<Self> {
        let atoms = self.atoms.iter().map(|p| p.translate(shift)).collect::<Result<Vec<_>>>()?;
        Self::with_tolerance(atoms, self.weights.clone(), INTERNAL_TOLERANCE)
    }

    /// Same atoms with the same weights, in any order.
    pub fn same_support_and_weights(&self, other: &DiscreteMeasure) -> bool {
        if self.dim != other.dim || self.len() != other.len() {
            return false;
        }
        let lookup: HashMap<Vec<u64>, f64> = other.iter().map(|(p, w)| (p.key(), w)).collect();
        self.iter().all(|(p, w)| lookup.get(&p.key()) == Some(&w))
    }
}

/// A probability measure with finitely many distinct atoms `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointMeasure {
    dim_x: usize,
    dim_y: usize,
    atoms: Vec<(Point, Point)>,
    weights: Vec<f64>,
}

impl JointMeasure {
    pub fn new(atoms: Vec<(Point, Point)>, weights: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(atoms, weights, INGEST_TOLERANCE)
    }

    pub fn with_tolerance(
        atoms: Vec<(Point, Point)>,
        weights: Vec<f64>,
        tolerance: f64,
    ) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} atoms but {} weights",
                atoms.len(),
                weights.len()
            )));
        }
        let total = checked_weights(&weights, tolerance)?;
        let (dim_x, dim_y) = (atoms[0].0.dim(), atoms[0].1.dim());
        for (x, y) in &atoms {
            if x.dim() != dim_x {
                return Err(Error::dims(dim_x, x.dim()));
            }
            if y.dim() != dim_y {
                return Err(Error::dims(dim_y, y.dim()));
            }
        }

        let mut index: HashMap<(Vec<u64>, Vec<u64>), usize> = HashMap::with_capacity(atoms.len());
        let mut merged_atoms = Vec::with_capacity(atoms.len());
        let mut merged_weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for ((x, y), w) in atoms.into_iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            let key = (x.key(), y.key());
            match index.get(&key) {
                Some(&i) => merged_weights[i] += w,
                None => {
                    index.insert(key, merged_atoms.len());
                    merged_atoms.push((x, y));
                    merged_weights.push(w);
                }
            }
        }
        normalize(&mut merged_weights, total);
        Ok(JointMeasure { dim_x, dim_y, atoms: merged_atoms, weights: merged_weights })
    }

    /// `μ ⊗ ν` with `x ~ μ`, `y ~ ν`.
    pub fn product(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Self> {
        let mut atoms = Vec::with_capacity(mu.len() * nu.len());
        let mut weights = Vec::with_capacity(mu.len() * nu.len());
        for (y, wy) in nu.iter() {
            for (x, wx) in mu.iter() {
                atoms.push((x.clone(), y.clone()));
                weights.push(wx * wy);
            }
        }
        Self::with_tolerance(atoms, weights, INTERNAL_TOLERANCE)
    }

    pub fn dim_x(&self) -> usize {
        self.dim_x
    }

    pub fn dim_y(&self) -> usize {
        self.dim_y
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[(Point, Point)] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, &Point, f64)> {
        self.atoms.iter().zip(self.weights.iter().copied()).map(|((x, y), w)| (x, y, w))
    }

    /// Weight attached to the atom `(x, y)`, zero when absent.
    pub fn weight_of(&self, x: &Point, y: &Point) -> f64 {
        self.iter()
            .find(|(ax, ay, _)| ax.key() == x.key() && ay.key() == y.key())
            .map_or(0.0, |(_, _, w)| w)
    }
}

/// `π(y)` together with `π(·|y)` for every atom of the y-marginal.
///
/// Y-atoms are indexed by first appearance in the source joint measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionalTable {
    pub y_atoms: Vec<Point>,
    pub y_weights: Vec<f64>,
    pub conditionals: Vec<DiscreteMeasure>,
}

impl ConditionalTable {
    pub fn len(&self) -> usize {
        self.y_atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_atoms.is_empty()
    }

    pub fn marginal(&self) -> Result<DiscreteMeasure> {
        DiscreteMeasure::with_tolerance(
            self.y_atoms.clone(),
            self.y_weights.clone(),
            INTERNAL_TOLERANCE,
        )
    }

    /// Rebuilds `Σ_y π(y) · δ_y ⊗ π(·|y)`.
    pub fn recompose(&self) -> Result<JointMeasure> {
        let mut atoms = Vec::new();
        let mut weights = Vec::new();
        for ((y, wy), cond) in self.y_atoms.iter().zip(&self.y_weights).zip(&self.conditionals) {
            for (x, wx) in cond.iter() {
                atoms.push((x.clone(), y.clone()));
                weights.push(wy * wx);
            }
        }
        JointMeasure::with_tolerance(atoms, weights, INTERNAL_TOLERANCE)
    }
}

/// Splits a joint measure into its y-marginal and the conditionals `π(·|y)`.
pub fn decompose(joint: &JointMeasure) -> ConditionalTable {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut y_atoms: Vec<Point> = Vec::new();
    let mut groups: Vec<(Vec<Point>, Vec<f64>)> = Vec::new();
    for (x, y, w) in joint.iter() {
        let slot = *index.entry(y.key()).or_insert_with(|| {
            y_atoms.push(y.clone());
            groups.push((Vec::new(), Vec::new()));
            y_atoms.len() - 1
        });
        groups[slot].0.push(x.clone());
        groups[slot].1.push(w);
    }

    let mut y_weights = Vec::with_capacity(groups.len());
    let mut conditionals = Vec::with_capacity(groups.len());
    for (xs, ws) in groups {
        let mass: f64 = ws.iter().sum();
        let cond_weights: Vec<f64> = ws.iter().map(|w| w / mass).collect();
        // x-atoms are already distinct within a fixed y, weights positive.
        let cond = DiscreteMeasure::with_tolerance(xs, cond_weights, INGEST_TOLERANCE)
            .expect("conditional of a valid joint measure is valid");
        y_weights.push(mass);
        conditionals.push(cond);
    }
    ConditionalTable { y_atoms, y_weights, conditionals }
}

/// Projection onto `Y`.
pub fn marginal_y(joint: &JointMeasure) -> DiscreteMeasure {
    let atoms = joint.atoms().iter().map(|(_, y)| y.clone()).collect();
    DiscreteMeasure::with_tolerance(atoms, joint.weights().to_vec(), INGEST_TOLERANCE)
        .expect("marginal of a valid joint measure is valid")
}

/// Projection onto `X`.
pub fn marginal_x(joint: &JointMeasure) -> DiscreteMeasure {
    let atoms = joint.atoms().iter().map(|(x, _)| x.clone()).collect();
    DiscreteMeasure::with_tolerance(atoms, joint.weights().to_vec(), INGEST_TOLERANCE)
        .expect("marginal of a valid joint measure is valid")
}

/// Closed axis-aligned box `Π [low_i, high_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl AxisBox {
    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.dim()
            && p.coords()
                .iter()
                .zip(self.low.iter().zip(&self.high))
                .all(|(c, (lo, hi))| lo <= c && c <= hi)
    }

    pub fn extents(&self) -> Vec<f64> {
        self.low.iter().zip(&self.high).map(|(lo, hi)| hi - lo).collect()
    }

    /// Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        self.extents().iter().map(|e| e * e).sum::<f64>().sqrt()
    }
}

pub fn bounding_box(points: &[Point], padding: f64) -> Result<AxisBox> {
    let first = points.first().ok_or(Error::EmptyInput("bounding box of no points"))?;
    if !(padding >= 0.0 && padding.is_finite()) {
        return Err(Error::InvalidInput(format!("padding {padding} must be non-negative")));
    }
    let dim = first.dim();
    let mut low = first.coords().to_vec();
    let mut high = low.clone();
    for p in points {
        if p.dim() != dim {
            return Err(Error::dims(dim, p.dim()));
        }
        for (i, &c) in p.coords().iter().enumerate() {
            low[i] = low[i].min(c);
            high[i] = high[i].max(c);
        }
    }
    for (lo, hi) in low.iter_mut().zip(high.iter_mut()) {
        *lo -= padding;
        *hi += padding;
    }
    Ok(AxisBox { low, high })
}

// ---------------------------------------------------------------------------
// I/O

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureFormat {
    Json,
    Csv,
}

impl MeasureFormat {
    /// `.csv` selects CSV, everything else JSON.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MeasureFormat::Csv,
            _ => MeasureFormat::Json,
        }
    }
}

#[derive(Deserialize)]
struct MeasureFile {
    dim: usize,
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct JointAtomFile {
    x: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Deserialize)]
struct JointFile {
    dim_x: usize,
    dim_y: usize,
    atoms: Vec<JointAtomFile>,
    weights: Vec<f64>,
}

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub(crate) fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn rows_to_points(dim: usize, rows: Vec<Vec<f64>>) -> Result<Vec<Point>> {
    rows.into_iter()
        .map(|row| {
            if row.len() != dim {
                return Err(Error::dims(dim, row.len()));
            }
            Point::new(row)
        })
        .collect()
}

pub fn parse_measure_json(text: &str) -> Result<DiscreteMeasure> {
    let file: MeasureFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("measure json: {e}")))?;
    if file.atoms.is_empty() {
        return Err(Error::EmptyInput("measure has no atoms"));
    }
    let atoms = rows_to_points(file.dim, file.atoms)?;
    DiscreteMeasure::new(atoms, file.weights)
}

pub fn parse_measure_csv(text: &str) -> Result<DiscreteMeasure> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Parse(format!("csv header: {e}")))?.clone();
    if headers.len() < 2 || headers.get(headers.len() - 1) != Some("weight") {
        return Err(Error::Parse("csv header must be c1,...,cn,weight".into()));
    }
    let dim = headers.len() - 1;
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, .. } => Error::dims(dim, (*len as usize).saturating_sub(1)),
            _ => Error::Parse(format!("csv row {}: {e}", line + 1)),
        })?;
        let values = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Parse(format!("csv row {}: `{f}`: {e}", line + 1))))
            .collect::<Result<Vec<f64>>>()?;
        let (coords, w) = values.split_at(dim);
        atoms.push(Point::new(coords.to_vec())?);
        weights.push(w[0]);
    }
    if atoms.is_empty() {
        return Err(Error::EmptyInput("measure has no atoms"));
    }
    DiscreteMeasure::new(atoms, weights)
}

pub fn parse_joint_json(text: &str) -> Result<JointMeasure> {
    let file: JointFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("joint json: {e}")))?;
    if file.atoms.is_empty() {
        return Err(Error::EmptyInput("joint measure has no atoms"));
    }
    let atoms = file
        .atoms
        .into_iter()
        .map(|a| {
            if a.x.len() != file.dim_x {
                return Err(Error::dims(file.dim_x, a.x.len()));
            }
            if a.y.len() != file.dim_y {
                return Err(Error::dims(file.dim_y, a.y.len()));
            }
            Ok((Point::new(a.x)?, Point::new(a.y)?))
        })
        .collect::<Result<Vec<_>>>()?;
    JointMeasure::new(atoms, file.weights)
}

pub fn load_measure(path: &Path, format: MeasureFormat) -> Result<DiscreteMeasure> {
    let text = read_to_string(path)?;
    match format {
        MeasureFormat::Json => parse_measure_json(&text),
        MeasureFormat::Csv => parse_measure_csv(&text),
    }
}

pub fn load_joint(path: &Path) -> Result<JointMeasure> {
    parse_joint_json(&read_to_string(path)?)
}

pub fn measure_to_json(m: &DiscreteMeasure) -> String {
    let value = serde_json::json!({
        "dim": m.dim(),
        "atoms": m.atoms(),
        "weights": m.weights(),
    });
    report::to_json_string(&value)
}

pub fn measure_to_csv(m: &DiscreteMeasure) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=m.dim()).map(|i| format!("c{i}")).chain(["weight".to_string()]).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for (p, w) in m.iter() {
        let row: Vec<String> = p.coords().iter().chain([w].iter()).map(|v| report::fmt_f64(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn joint_to_json(j: &JointMeasure) -> String {
    let atoms: Vec<serde_json::Value> =
        j.atoms().iter().map(|(x, y)| serde_json::json!({ "x": x, "y": y })).collect();
    let value = serde_json::json!({
        "dim_x": j.dim_x(),
        "dim_y": j.dim_y(),
        "atoms": atoms,
        "weights": j.weights(),
    });
    report::to_json_string(&value)
}

pub fn save_measure(m: &DiscreteMeasure, path: &Path, format: MeasureFormat) -> Result<()> {
    let text = match format {
        MeasureFormat::Json => measure_to_json(m),
        MeasureFormat::Csv => measure_to_csv(m),
    };
    write_string(path, &text)
}

pub fn save_joint(j: &JointMeasure, path: &Path) -> Result<()> {
    write_string(path, &joint_to_json(j))
}
