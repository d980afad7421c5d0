//! Named instances and seeded random instance builders, shared by the test
//! suites, the benchmarks and the CLI's `--fixture` option.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::generator::{Activation, GeneratorSpec, LatentSpec, Layer, Matrix};
use crate::measures::{DiscreteMeasure, JointMeasure, Point};

pub type Triple = (JointMeasure, GeneratorSpec, LatentSpec);

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn pt(c: &[f64]) -> Point {
    Point::new(c.to_vec()).expect("finite fixture coordinates")
}

fn joint_1d(entries: &[(f64, f64, f64)]) -> JointMeasure {
    let atoms = entries.iter().map(|&(x, y, _)| (pt(&[x]), pt(&[y]))).collect();
    let weights = entries.iter().map(|e| e.2).collect();
    JointMeasure::new(atoms, weights).expect("valid fixture")
}

fn affine_1d(a: f64, b: f64, c: f64) -> GeneratorSpec {
    GeneratorSpec::affine(
        Matrix::from_rows(vec![vec![a]]).expect("1x1"),
        Matrix::from_rows(vec![vec![b]]).expect("1x1"),
        vec![c],
    )
    .expect("valid fixture")
}

fn dirac_latent() -> LatentSpec {
    LatentSpec::discrete(DiscreteMeasure::dirac(pt(&[0.0])))
}

/// `π = μ ⊗ ν`, `G(z, y) = z`, `η = μ`: every pushforward equals its
/// conditional.
pub fn copy_instance() -> Triple {
    let mu = DiscreteMeasure::from_scalars(&[-1.0, 0.5, 2.0], &[0.25, 0.25, 0.5]).expect("valid");
    let nu = DiscreteMeasure::from_scalars(&[0.0, 1.0, 3.0], &[0.5, 0.25, 0.25]).expect("valid");
    let joint = JointMeasure::product(&mu, &nu).expect("valid");
    (joint, affine_1d(1.0, 0.0, 0.0), LatentSpec::discrete(mu))
}

/// `y` uniform on `{0, 1}`, `π(x|y) = δ_y`, `G(z, y) = y + 1`.
pub fn shifted_delta_instance() -> Triple {
    let joint = joint_1d(&[(0.0, 0.0, 0.5), (1.0, 1.0, 0.5)]);
    (joint, affine_1d(0.0, 1.0, 1.0), dirac_latent())
}

/// `y` uniform on `{0, ρ}`, `π(x|0) = δ_0`, `π(x|ρ) = δ_1`, and a generator
/// swapping the two: `G(0) = δ_1`, `G(ρ) = δ_0`.
///
/// The conditional objective is 1 while the joint objective is only `ρ`.
pub fn swap_instance(rho: f64) -> Triple {
    let joint = joint_1d(&[(0.0, 0.0, 0.5), (1.0, rho, 0.5)]);
    (joint, affine_1d(0.0, -1.0 / rho, 1.0), dirac_latent())
}

/// `n` equally weighted y-atoms on a uniform grid of `[0, 1]`,
/// `π(x|y) = δ_y`, `G(z, y) = 2y + z` with `z` uniform on `{-0.1, 0.1}`.
pub fn delta_family(n: usize) -> Triple {
    assert!(n >= 1);
    let ys: Vec<f64> = if n == 1 { vec![0.5] } else { (0..n).map(|i| i as f64 / (n - 1) as f64).collect() };
    let entries: Vec<(f64, f64, f64)> = ys.iter().map(|&y| (y, y, 1.0 / n as f64)).collect();
    let eta = LatentSpec::discrete(DiscreteMeasure::from_scalars(&[-0.1, 0.1], &[0.5, 0.5]).expect("valid"));
    (joint_1d(&entries), affine_1d(1.0, 2.0, 0.0), eta)
}

/// One y-atom with a non-trivial conditional and generator.
pub fn single_y_instance() -> Triple {
    let joint = joint_1d(&[(0.0, 0.5, 0.2), (1.0, 0.5, 0.3), (2.5, 0.5, 0.5)]);
    let eta = LatentSpec::discrete(DiscreteMeasure::from_scalars(&[-1.0, 0.0, 1.0], &[0.3, 0.3, 0.4]).expect("valid"));
    (joint, affine_1d(0.7, 1.0, 0.2), eta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    Affine,
    Mlp,
}

#[derive(Debug, Clone)]
pub struct InstanceShape {
    pub dim_x: usize,
    pub dim_y: usize,
    pub dim_z: usize,
    pub max_y_atoms: usize,
    pub max_x_atoms: usize,
    pub max_latent_atoms: usize,
    pub generator: GeneratorKind,
}

impl Default for InstanceShape {
    fn default() -> Self {
        InstanceShape {
            dim_x: 1,
            dim_y: 1,
            dim_z: 1,
            max_y_atoms: 10,
            max_x_atoms: 20,
            max_latent_atoms: 10,
            generator: GeneratorKind::Affine,
        }
    }
}

pub fn random_point(rng: &mut impl Rng, dim: usize, scale: f64) -> Point {
    pt(&(0..dim).map(|_| rng.gen_range(-scale..scale)).collect::<Vec<_>>())
}

pub fn random_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

/// `n` random atoms in `[-1, 1]^dim` with random positive weights.
pub fn random_measure(rng: &mut impl Rng, dim: usize, n: usize) -> DiscreteMeasure {
    let atoms = (0..n).map(|_| random_point(rng, dim, 1.0)).collect();
    DiscreteMeasure::new(atoms, random_weights(rng, n)).expect("valid random measure")
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_rows((0..rows).map(|_| (0..cols).map(|_| rng.gen_range(-scale..scale)).collect()).collect())
        .expect("finite entries")
}

pub fn random_affine(rng: &mut impl Rng, dim_x: usize, dim_z: usize, dim_y: usize) -> GeneratorSpec {
    let a = random_matrix(rng, dim_x, dim_z, 1.0);
    let b = random_matrix(rng, dim_x, dim_y, 1.5);
    let c = (0..dim_x).map(|_| rng.gen_range(-0.5..0.5)).collect();
    GeneratorSpec::affine(a, b, c).expect("consistent shapes")
}

/// Two-layer network `(z, y) → hidden → x`.
pub fn random_mlp(rng: &mut impl Rng, dim_x: usize, dim_z: usize, dim_y: usize, hidden: usize, activation: Activation) -> GeneratorSpec {
    let l1 = Layer::new(
        random_matrix(rng, hidden, dim_z + dim_y, 1.0),
        (0..hidden).map(|_| rng.gen_range(-0.5..0.5)).collect(),
    )
    .expect("bias length");
    let l2 = Layer::new(random_matrix(rng, dim_x, hidden, 1.0), (0..dim_x).map(|_| rng.gen_range(-0.5..0.5)).collect())
        .expect("bias length");
    GeneratorSpec::mlp(dim_z, dim_y, vec![l1, l2], activation).expect("consistent shapes")
}

/// A random joint law with up to `max_y_atoms` conditions, each with up to
/// `max_x_atoms` x-atoms, a random generator of the requested kind and a
/// discrete latent law with up to `max_latent_atoms` atoms.
pub fn random_conditional_instance(rng: &mut impl Rng, shape: &InstanceShape) -> Triple {
    let n_y = rng.gen_range(1..=shape.max_y_atoms);
    let y_weights = random_weights(rng, n_y);
    let mut atoms = Vec::new();
    let mut weights = Vec::new();
    for wy in y_weights {
        let y = random_point(rng, shape.dim_y, 1.0);
        let n_x = rng.gen_range(1..=shape.max_x_atoms);
        let cond = random_measure(rng, shape.dim_x, n_x);
        for (x, wx) in cond.iter() {
            atoms.push((x.clone(), y.clone()));
            weights.push(wy * wx);
        }
    }
    let joint = JointMeasure::new(atoms, weights).expect("valid random joint");
    let g = match shape.generator {
        GeneratorKind::Affine => random_affine(rng, shape.dim_x, shape.dim_z, shape.dim_y),
        GeneratorKind::Mlp => {
            let activation = if rng.gen_bool(0.5) { Activation::Relu } else { Activation::Tanh };
            random_mlp(rng, shape.dim_x, shape.dim_z, shape.dim_y, 4, activation)
        }
    };
    let n_z = rng.gen_range(1..=shape.max_latent_atoms);
    let eta = LatentSpec::discrete(random_measure(rng, shape.dim_z, n_z));
    (joint, g, eta)
}
