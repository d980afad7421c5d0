use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use cwgan_core::covering::{empirical_moduli, epsilon_certificate_unchecked};
use cwgan_core::duality::Instance;
use cwgan_core::fixtures::{self, InstanceShape};
use cwgan_core::{par, Metric};

fn family(n: usize) -> Instance {
    let (joint, g, eta) = fixtures::delta_family(n);
    Instance::new(&joint, &g, &eta, Metric::Euclidean).unwrap()
}

fn random(seed: u64) -> Instance {
    let shape = InstanceShape { max_x_atoms: 30, max_y_atoms: 10, max_latent_atoms: 30, ..Default::default() };
    let (joint, g, eta) = fixtures::random_conditional_instance(&mut fixtures::rng(seed), &shape);
    Instance::new(&joint, &g, &eta, Metric::Euclidean).unwrap()
}

/// Runs `f` once per mode so both timings land in the same group.
fn both(c: &mut Criterion, group: &str, label: &str, f: impl Fn() + Copy) {
    let mut g = c.benchmark_group(group);
    g.sample_size(20);
    g.bench_function(BenchmarkId::new("sequential", label), |b| b.iter(|| par::sequential(f)));
    g.bench_function(BenchmarkId::new("parallel", label), |b| b.iter(f));
    g.finish();
}

fn conditional_solves(c: &mut Criterion) {
    let inst = random(1);
    both(c, "conditional_solves", "random", || {
        inst.solve_conditions().unwrap();
    });
}

fn moduli(c: &mut Criterion) {
    for n in [50, 200] {
        let inst = family(n);
        both(c, "moduli", &n.to_string(), || {
            empirical_moduli(&inst).unwrap();
        });
    }
}

fn certificate(c: &mut Criterion) {
    let inst = family(200);
    both(c, "certificate", "eps_0.1", || {
        epsilon_certificate_unchecked(&inst, 0.1).unwrap();
    });
}

criterion_group!(benches, conditional_solves, moduli, certificate);
criterion_main!(benches);
