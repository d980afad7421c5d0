//! Acceptance criteria, one line each. Run with `cargo test --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use rand::Rng;
use serde_json::Value;

use common::cwgan;
use cwgan_core::covering::{convergence_study, epsilon_certificate};
use cwgan_core::duality::{joint_w1, lhs_conditional_objective, rhs_partial_dual, Instance};
use cwgan_core::fixtures::{self, GeneratorKind, InstanceShape, Triple};
use cwgan_core::generator::{assumption3_modulus, lipschitz_bound_y, Activation, GeneratorSpec, LatentSpec};
use cwgan_core::transport::{w1_1d_oracle, w1_certified, w1_exact};
use cwgan_core::{Metric, ProductMetric};

const SEED: u64 = 20_240_601;

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// 100 conditional instances shared by criteria 3 and 4.
fn conditional_instances() -> Vec<Triple> {
    let mut rng = fixtures::rng(SEED + 3);
    (0..100)
        .map(|i| {
            let shape = InstanceShape {
                dim_x: 1 + i % 2,
                dim_y: 1 + (i / 2) % 2,
                dim_z: 1 + i % 3,
                generator: if i % 2 == 0 { GeneratorKind::Affine } else { GeneratorKind::Mlp },
                ..Default::default()
            };
            fixtures::random_conditional_instance(&mut rng, &shape)
        })
        .collect()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = fixtures::rng(SEED + 1);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (n, m) = (rng.gen_range(1..=50), rng.gen_range(1..=50));
        let mu = fixtures::random_measure(&mut rng, 1, n);
        let nu = fixtures::random_measure(&mut rng, 1, m);
        let exact = w1_exact(&mu, &nu, Metric::Euclidean).unwrap().0;
        worst = worst.max((exact - w1_1d_oracle(&mu, &nu).unwrap()).abs());
    }
    outcome(worst <= 1e-9, format!("200 instances, max |exact - oracle| = {worst:.2e} (tol 1e-9)"))
}

fn strong_duality() -> Outcome {
    let mut rng = fixtures::rng(SEED + 2);
    let (mut gap, mut excess): (f64, f64) = (0.0, 0.0);
    let mut failures = 0;
    for i in 0..100 {
        let dim = 1 + i % 3;
        let (n, m) = (rng.gen_range(1..=30), rng.gen_range(1..=30));
        let mu = fixtures::random_measure(&mut rng, dim, n);
        let nu = fixtures::random_measure(&mut rng, dim, m);
        match w1_certified(&mu, &nu, Metric::Euclidean) {
            Ok((_, w)) => {
                gap = gap.max(w.gap());
                excess = excess.max(w.lipschitz_excess);
            }
            Err(_) => failures += 1,
        }
    }
    outcome(
        failures == 0 && gap <= 1e-7 && excess <= 1e-9,
        format!("100 instances, {failures} rejected, max gap {gap:.2e} (tol 1e-7), max Lipschitz excess {excess:.2e} (tol 1e-9)"),
    )
}

fn finite_duality(instances: &[Triple]) -> Outcome {
    let mut worst: f64 = 0.0;
    for (joint, g, eta) in instances {
        let (lhs, _) = lhs_conditional_objective(joint, g, eta, Metric::Euclidean).unwrap();
        let (rhs, _) = rhs_partial_dual(joint, g, eta, Metric::Euclidean).unwrap();
        worst = worst.max((lhs - rhs).abs());
    }
    outcome(worst <= 1e-7, format!("100 instances, max |lhs - rhs| = {worst:.2e} (tol 1e-7)"))
}

fn domination_and_gap(instances: &[Triple]) -> Outcome {
    let mut worst_excess = f64::NEG_INFINITY;
    for (joint, g, eta) in instances {
        let inst = Instance::new(joint, g, eta, Metric::Euclidean).unwrap();
        let (lhs, _) = lhs_conditional_objective(joint, g, eta, Metric::Euclidean).unwrap();
        let joint_value = joint_w1(joint, &inst.generated_joint().unwrap(), Metric::Euclidean, ProductMetric::Sum).unwrap();
        worst_excess = worst_excess.max(joint_value - lhs);
    }
    let (joint, g, eta) = fixtures::swap_instance(0.1);
    let inst = Instance::new(&joint, &g, &eta, Metric::Euclidean).unwrap();
    let (lhs, _) = lhs_conditional_objective(&joint, &g, &eta, Metric::Euclidean).unwrap();
    let jv = joint_w1(&joint, &inst.generated_joint().unwrap(), Metric::Euclidean, ProductMetric::Sum).unwrap();
    let swap_ok = (lhs - 1.0).abs() <= 1e-9 && (jv - 0.1).abs() <= 1e-9;
    outcome(
        worst_excess <= 1e-9 && swap_ok,
        format!("max joint - lhs = {worst_excess:.2e} (tol 1e-9); swap rho=0.1: lhs {lhs}, joint {jv}, gap {:.12}", lhs - jv),
    )
}

fn proof_chain() -> Outcome {
    let (joint, g, eta) = fixtures::delta_family(200);
    let mut pass = true;
    let mut parts = Vec::new();
    for eps in [0.5, 0.2, 0.1] {
        let start = Instant::now();
        match epsilon_certificate(&joint, &g, &eta, Metric::Euclidean, eps) {
            Ok(c) => {
                let elapsed = start.elapsed();
                let strict = eps != 0.5 || c.v_deps < c.lhs;
                let ok = c.pass && c.lhs <= c.v_deps + eps && c.v_deps <= c.rhs + 1e-9 && strict && elapsed < Duration::from_secs(60);
                pass &= ok;
                parts.push(format!("eps {eps}: {} boxes, gap {:.3e}, {:.2}s", c.boxes, c.gap, elapsed.as_secs_f64()));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("eps {eps}: {e}"));
            }
        }
    }
    outcome(pass, parts.join("; "))
}

fn convergence() -> Outcome {
    let (joint, g, eta) = fixtures::delta_family(200);
    let inst = Instance::new(&joint, &g, &eta, Metric::Euclidean).unwrap();
    match convergence_study(&inst, &[0.5, 0.2, 0.1]) {
        Ok(rows) => {
            let rowwise = rows.iter().all(|r| r.gap <= r.epsilon);
            let last = rows.last().unwrap().gap;
            let gaps: Vec<String> = rows.iter().map(|r| format!("{:.3e}", r.gap)).collect();
            outcome(rowwise && last <= 0.1, format!("gaps [{}], final {last:.3e} (<= 0.1)", gaps.join(", ")))
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn lemma_inequality() -> Outcome {
    let mut rng = fixtures::rng(SEED + 7);
    let mut worst = f64::INFINITY;
    let mut pairs = 0;
    while pairs < 100 {
        let shape = InstanceShape { dim_y: 2, max_x_atoms: 10, ..Default::default() };
        let (joint, g, eta) = fixtures::random_conditional_instance(&mut rng, &shape);
        let inst = Instance::new(&joint, &g, &eta, Metric::Euclidean).unwrap();
        if inst.len() < 2 {
            continue;
        }
        let f = |k: usize| w1_exact(inst.real(k), inst.generated(k), Metric::Euclidean).unwrap().0;
        for _ in 0..10 {
            let i = rng.gen_range(0..inst.len());
            let j = (i + rng.gen_range(1..inst.len())) % inst.len();
            let cond = w1_exact(inst.real(i), inst.real(j), Metric::Euclidean).unwrap().0;
            let gen = assumption3_modulus(&g, &eta, &inst.y_atoms()[i], &inst.y_atoms()[j]).unwrap();
            worst = worst.min(cond + gen - (f(i) - f(j)).abs());
            pairs += 1;
        }
    }
    outcome(worst >= -1e-9, format!("{pairs} pairs over 10 instances, min slack {worst:.3e} (tol -1e-9)"))
}

fn generator_modulus() -> Outcome {
    let mut rng = fixtures::rng(SEED + 8);
    let mut affine_err: f64 = 0.0;
    for _ in 0..50 {
        let (dx, dy, dz) = (rng.gen_range(1..4), rng.gen_range(1..4), rng.gen_range(1..4));
        let g = fixtures::random_affine(&mut rng, dx, dz, dy);
        let eta = LatentSpec::discrete(fixtures::random_measure(&mut rng, dz, 8));
        let (y, y2) = (fixtures::random_point(&mut rng, dy, 2.0), fixtures::random_point(&mut rng, dy, 2.0));
        let GeneratorSpec::Affine { b, .. } = &g else { unreachable!() };
        let diff: Vec<f64> = y.coords().iter().zip(y2.coords()).map(|(p, q)| p - q).collect();
        let direct = b.apply(&diff).iter().map(|v| v * v).sum::<f64>().sqrt();
        affine_err = affine_err.max((assumption3_modulus(&g, &eta, &y, &y2).unwrap() - direct).abs());
    }
    let mut mlp_excess = f64::NEG_INFINITY;
    for i in 0..50 {
        let act = if i % 2 == 0 { Activation::Relu } else { Activation::Tanh };
        let g = fixtures::random_mlp(&mut rng, 2, 2, 2, 6, act);
        let eta = LatentSpec::discrete(fixtures::random_measure(&mut rng, 2, 8));
        let bound = lipschitz_bound_y(&g);
        for _ in 0..20 {
            let (y, y2) = (fixtures::random_point(&mut rng, 2, 2.0), fixtures::random_point(&mut rng, 2, 2.0));
            let m = assumption3_modulus(&g, &eta, &y, &y2).unwrap();
            mlp_excess = mlp_excess.max(m - bound * Metric::Euclidean.dist(&y, &y2));
        }
    }
    outcome(
        affine_err <= 1e-12 && mlp_excess <= 1e-9,
        format!("affine max error {affine_err:.2e} (tol 1e-12); mlp max modulus - bound {mlp_excess:.3e} (tol 1e-9)"),
    )
}

fn run_cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = cwgan().args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(out.stdout)
    } else {
        Err(String::from_utf8_lossy(&out.stderr).into_owned())
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let latent = dir.path().join("latent.json");
    let joint = dir.path().join("joint.json");
    let generator = dir.path().join("generator.json");
    let (j, g, _) = fixtures::random_conditional_instance(&mut fixtures::rng(SEED + 9), &InstanceShape::default());
    std::fs::write(&joint, cwgan_core::measures::joint_to_json(&j)).unwrap();
    std::fs::write(&generator, cwgan_core::generator::generator_to_json(&g)).unwrap();
    std::fs::write(&latent, r#"{"kind": "gaussian", "mean": [0], "std": [1], "samples": 64}"#).unwrap();
    let files = ["--joint", joint.to_str().unwrap(), "--generator", generator.to_str().unwrap(), "--latent", latent.to_str().unwrap()];

    let commands: Vec<Vec<&str>> = vec![
        [&["objectives", "--seed", "11"][..], &files[..]].concat(),
        [&["certify", "--epsilon", "0.2", "--seed", "11"][..], &files[..]].concat(),
        vec!["certify", "--fixture", "delta-family", "--epsilon", "0.5"],
    ];
    let mut notes = Vec::new();
    let mut pass = true;
    for cmd in &commands {
        let runs: Result<Vec<Vec<u8>>, String> = ["1", "1", "4"]
            .iter()
            .map(|jobs| run_cli(&[&cmd[..], &["--jobs", jobs][..]].concat()))
            .collect();
        match runs {
            Ok(r) => {
                let identical = r[0] == r[1];
                let value = |bytes: &[u8]| serde_json::from_slice::<Value>(bytes).map(|v| v["result"].clone()).ok();
                let same_values = value(&r[0]).is_some() && value(&r[0]) == value(&r[2]);
                pass &= identical && same_values;
                notes.push(format!("{}: repeat identical {identical}, jobs 1 vs 4 identical {same_values}", cmd[0]));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("{}: {e}", cmd[0]));
            }
        }
    }
    outcome(pass, notes.join("; "))
}

fn main() {
    let instances = conditional_instances();
    let criteria: Vec<Criterion> = vec![
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("strong duality certificates", Box::new(strong_duality)),
        ("conditional objective equals partial dual", Box::new(|| finite_duality(&instances))),
        ("joint domination and strict gap", Box::new(|| domination_and_gap(&instances))),
        ("proof-chain certificate", Box::new(proof_chain)),
        ("convergence", Box::new(convergence)),
        ("modulus inequality for F", Box::new(lemma_inequality)),
        ("generator modulus in y", Box::new(generator_modulus)),
        ("determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!("criterion {} [{verdict}] {name}: {} ({:.2}s)", i + 1, o.detail, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
