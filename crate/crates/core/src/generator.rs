//! Deterministic generators `G(z, y)`, latent laws `η`, pushforwards `G(y)`,
//! and the y-modulus `E_z |G(z,y) - G(z,y')|` with its Lipschitz bound.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{self, DiscreteMeasure, Point};
use crate::metric::Metric;

const POWER_ITERATION_CAP: usize = 1000;
const POWER_ITERATION_RTOL: f64 = 1e-10;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 || rows[0].is_empty() {
            return Err(Error::EmptyInput("matrix has no entries"));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(n_rows * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::dims(cols, row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput("matrix entries must be finite".into()));
            }
            data.extend(row);
        }
        Ok(Matrix { rows: n_rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = s;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.data.chunks(self.cols).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, xi) in self.data.chunks(self.cols).zip(x) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
        out
    }

    /// Columns `start..start + len`.
    pub fn column_block(&self, start: usize, len: usize) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * len);
        for row in self.data.chunks(self.cols) {
            data.extend_from_slice(&row[start..start + len]);
        }
        Matrix { rows: self.rows, cols: len, data }
    }

    /// Spectral norm `‖M‖₂` by power iteration on `MᵀM`.
    ///
    /// Starts from the normalized all-ones vector; if that start lies in the
    /// kernel of `MᵀM`, restarts from the heaviest column of `MᵀM`. The
    /// Rayleigh quotient is inflated by the final residual norm, and iteration
    /// stops once that residual is below `1e-10` relative.
    pub fn operator_norm(&self) -> f64 {
        let gram = |v: &[f64]| self.apply_transpose(&self.apply(v));
        let frob2: f64 = self.data.iter().map(|a| a * a).sum();
        if frob2 == 0.0 {
            return 0.0;
        }
        let n = self.cols;
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        if norm(&gram(&v)) <= 1e-12 * frob2 {
            let columns: Vec<Vec<f64>> = (0..n)
                .map(|j| {
                    let mut e = vec![0.0; n];
                    e[j] = 1.0;
                    gram(&e)
                })
                .collect();
            let heaviest = columns
                .iter()
                .max_by(|a, b| norm(a).total_cmp(&norm(b)))
                .expect("at least one column");
            let s = norm(heaviest);
            v = heaviest.iter().map(|x| x / s).collect();
        }

        let mut rayleigh = 0.0;
        let mut residual = f64::INFINITY;
        for _ in 0..POWER_ITERATION_CAP {
            let w = gram(&v);
            rayleigh = w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>();
            residual = norm(&w.iter().zip(&v).map(|(a, b)| a - rayleigh * b).collect::<Vec<_>>());
            let length = norm(&w);
            if residual <= POWER_ITERATION_RTOL * rayleigh || length == 0.0 {
                break;
            }
            v = w.iter().map(|x| x / length).collect();
        }
        (rayleigh + residual).sqrt()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    pub fn lipschitz(self) -> f64 {
        1.0
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        })
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::dims(weights.rows(), bias.len()));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidInput("bias entries must be finite".into()));
        }
        Ok(Layer { weights, bias })
    }

    pub fn unbiased(weights: Matrix) -> Self {
        let bias = vec![0.0; weights.rows()];
        Layer { weights, bias }
    }
}

/// `G(z, y)`: either `A z + B y + c` or a feed-forward network on the
/// concatenated input `(z, y)` with the activation after every layer.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Affine { a: Matrix, b: Matrix, c: Vec<f64> },
    Mlp { dim_z: usize, dim_y: usize, layers: Vec<Layer>, activation: Activation },
}

impl GeneratorSpec {
    pub fn affine(a: Matrix, b: Matrix, c: Vec<f64>) -> Result<Self> {
        if a.rows() != c.len() {
            return Err(Error::dims(c.len(), a.rows()));
        }
        if b.rows() != c.len() {
            return Err(Error::dims(c.len(), b.rows()));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("offset entries must be finite".into()));
        }
        Ok(GeneratorSpec::Affine { a, b, c })
    }

    pub fn mlp(dim_z: usize, dim_y: usize, layers: Vec<Layer>, activation: Activation) -> Result<Self> {
        if dim_z == 0 || dim_y == 0 {
            return Err(Error::InvalidInput("latent and condition dimensions must be positive".into()));
        }
        let first = layers.first().ok_or(Error::EmptyInput("mlp has no layers"))?;
        if first.weights.cols() != dim_z + dim_y {
            return Err(Error::dims(dim_z + dim_y, first.weights.cols()));
        }
        for pair in layers.windows(2) {
            if pair[1].weights.cols() != pair[0].weights.rows() {
                return Err(Error::dims(pair[0].weights.rows(), pair[1].weights.cols()));
            }
        }
        Ok(GeneratorSpec::Mlp { dim_z, dim_y, layers, activation })
    }

    pub fn dim_z(&self) -> usize {
        match self {
            GeneratorSpec::Affine { a, .. } => a.cols(),
            GeneratorSpec::Mlp { dim_z, .. } => *dim_z,
        }
    }

    pub fn dim_y(&self) -> usize {
        match self {
            GeneratorSpec::Affine { b, .. } => b.cols(),
            GeneratorSpec::Mlp { dim_y, .. } => *dim_y,
        }
    }

    pub fn dim_x(&self) -> usize {
        match self {
            GeneratorSpec::Affine { c, .. } => c.len(),
            GeneratorSpec::Mlp { layers, .. } => layers.last().map_or(0, |l| l.weights.rows()),
        }
    }

    fn check_inputs(&self, z: &Point, y: &Point) -> Result<()> {
        if z.dim() != self.dim_z() {
            return Err(Error::dims(self.dim_z(), z.dim()));
        }
        if y.dim() != self.dim_y() {
            return Err(Error::dims(self.dim_y(), y.dim()));
        }
        Ok(())
    }
}

pub fn evaluate(g: &GeneratorSpec, z: &Point, y: &Point) -> Result<Point> {
    g.check_inputs(z, y)?;
    let out = match g {
        GeneratorSpec::Affine { a, b, c } => {
            let az = a.apply(z.coords());
            let by = b.apply(y.coords());
            az.iter().zip(&by).zip(c).map(|((p, q), r)| p + q + r).collect()
        }
        GeneratorSpec::Mlp { layers, activation, .. } => {
            let mut h: Vec<f64> = z.coords().iter().chain(y.coords()).copied().collect();
            for layer in layers {
                h = layer
                    .weights
                    .apply(&h)
                    .iter()
                    .zip(&layer.bias)
                    .map(|(x, b)| activation.apply(x + b))
                    .collect();
            }
            h
        }
    };
    Point::new(out).map_err(|_| Error::InvalidInput("generator output is not finite".into()))
}

/// Origin of a latent law.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LatentSource {
    Discrete,
    Gaussian { mean: Vec<f64>, std: Vec<f64>, samples: usize, seed: u64 },
}

/// A latent law `η`, always held as a finite support. Gaussian laws are
/// realized once into `samples` equally weighted draws from a seeded stream.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatentSpec {
    pub source: LatentSource,
    pub measure: DiscreteMeasure,
}

impl LatentSpec {
    pub fn discrete(measure: DiscreteMeasure) -> Self {
        LatentSpec { source: LatentSource::Discrete, measure }
    }

    pub fn gaussian(mean: Vec<f64>, std: Vec<f64>, samples: usize, seed: u64) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::EmptyInput("gaussian latent has no coordinates"));
        }
        if std.len() != mean.len() {
            return Err(Error::dims(mean.len(), std.len()));
        }
        if std.iter().any(|s| !(*s > 0.0 && s.is_finite())) || mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("gaussian latent needs finite mean and positive std".into()));
        }
        if samples == 0 {
            return Err(Error::InvalidInput("gaussian latent needs at least one sample".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let atoms = (0..samples)
            .map(|_| {
                let coords = mean
                    .iter()
                    .zip(&std)
                    .map(|(m, s)| {
                        let n: f64 = StandardNormal.sample(&mut rng);
                        m + s * n
                    })
                    .collect();
                Point::new(coords)
            })
            .collect::<Result<Vec<_>>>()?;
        let measure = DiscreteMeasure::new(atoms, vec![1.0 / samples as f64; samples])?;
        Ok(LatentSpec { source: LatentSource::Gaussian { mean, std, samples, seed }, measure })
    }

    pub fn dim(&self) -> usize {
        self.measure.dim()
    }
}

/// Law of `G(z, y)` for `z ~ η`; coincident images are merged.
pub fn pushforward(g: &GeneratorSpec, eta: &LatentSpec, y: &Point) -> Result<DiscreteMeasure> {
    let atoms = eta.measure.atoms().iter().map(|z| evaluate(g, z, y)).collect::<Result<Vec<_>>>()?;
    DiscreteMeasure::new(atoms, eta.measure.weights().to_vec())
}

/// `E_{z~η} d(G(z,y), G(z,y'))` with the euclidean norm.
pub fn assumption3_modulus(g: &GeneratorSpec, eta: &LatentSpec, y: &Point, y2: &Point) -> Result<f64> {
    generator_modulus(g, eta, y, y2, Metric::Euclidean)
}

pub fn generator_modulus(g: &GeneratorSpec, eta: &LatentSpec, y: &Point, y2: &Point, metric: Metric) -> Result<f64> {
    let mut total = 0.0;
    for (z, w) in eta.measure.iter() {
        let a = evaluate(g, z, y)?;
        let b = evaluate(g, z, y2)?;
        total += w * metric.dist(&a, &b);
    }
    Ok(total)
}

/// Upper bound `L_y` with `E_z |G(z,y) - G(z,y')| <= L_y |y - y'|`.
pub fn lipschitz_bound_y(g: &GeneratorSpec) -> f64 {
    match g {
        GeneratorSpec::Affine { b, .. } => b.operator_norm(),
        GeneratorSpec::Mlp { dim_z, dim_y, layers, activation } => {
            let first = layers[0].weights.column_block(*dim_z, *dim_y).operator_norm();
            layers[1..]
                .iter()
                .fold(first * activation.lipschitz(), |acc, l| acc * l.weights.operator_norm() * activation.lipschitz())
        }
    }
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Serialize, Deserialize)]
struct LayerFile {
    weights: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum GeneratorFile {
    Affine {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        c: Vec<f64>,
    },
    Mlp {
        dim_z: usize,
        dim_y: usize,
        #[serde(default)]
        activation: Activation,
        layers: Vec<LayerFile>,
    },
}

pub fn parse_generator_json(text: &str) -> Result<GeneratorSpec> {
    let file: GeneratorFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("generator json: {e}")))?;
    match file {
        GeneratorFile::Affine { a, b, c } => GeneratorSpec::affine(Matrix::from_rows(a)?, Matrix::from_rows(b)?, c),
        GeneratorFile::Mlp { dim_z, dim_y, activation, layers } => {
            let layers = layers
                .into_iter()
                .map(|l| {
                    let w = Matrix::from_rows(l.weights)?;
                    match l.bias {
                        Some(bias) => Layer::new(w, bias),
                        None => Ok(Layer::unbiased(w)),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            GeneratorSpec::mlp(dim_z, dim_y, layers, activation)
        }
    }
}

pub fn generator_to_json(g: &GeneratorSpec) -> String {
    let file = match g {
        GeneratorSpec::Affine { a, b, c } => GeneratorFile::Affine { a: a.to_rows(), b: b.to_rows(), c: c.clone() },
        GeneratorSpec::Mlp { dim_z, dim_y, layers, activation } => GeneratorFile::Mlp {
            dim_z: *dim_z,
            dim_y: *dim_y,
            activation: *activation,
            layers: layers
                .iter()
                .map(|l| LayerFile { weights: l.weights.to_rows(), bias: Some(l.bias.clone()) })
                .collect(),
        },
    };
    crate::report::to_json_string(&file)
}

#[derive(Deserialize)]
struct GaussianFile {
    mean: Vec<f64>,
    std: Vec<f64>,
    samples: usize,
    seed: Option<u64>,
}

/// Latent JSON: a measure document (optionally `"kind": "discrete"`), or
/// `{"kind": "gaussian", "mean", "std", "samples", "seed"}`. A gaussian
/// without `seed` uses `default_seed`.
pub fn parse_latent_json(text: &str, default_seed: u64) -> Result<LatentSpec> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("latent json: {e}")))?;
    match value.get("kind").and_then(|k| k.as_str()) {
        Some("gaussian") => {
            let g: GaussianFile =
                serde_json::from_value(value).map_err(|e| Error::Parse(format!("gaussian latent: {e}")))?;
            LatentSpec::gaussian(g.mean, g.std, g.samples, g.seed.unwrap_or(default_seed))
        }
        None | Some("discrete") => Ok(LatentSpec::discrete(measures::parse_measure_json(text)?)),
        Some(other) => Err(Error::Parse(format!("unknown latent kind `{other}`"))),
    }
}

pub fn latent_to_json(eta: &LatentSpec) -> String {
    match &eta.source {
        LatentSource::Discrete => measures::measure_to_json(&eta.measure),
        LatentSource::Gaussian { mean, std, samples, seed } => crate::report::to_json_string(&serde_json::json!({
            "kind": "gaussian",
            "mean": mean,
            "std": std,
            "samples": samples,
            "seed": seed,
        })),
    }
}
