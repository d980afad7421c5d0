mod common;

use common::point;
use cwgan_core::covering::{
    build_cover, build_piecewise_discriminator, convergence_study, discriminator_value, empirical_moduli,
    epsilon_certificate_unchecked, lemma1_check, select_delta,
};
use cwgan_core::duality::{lhs_conditional_objective, Instance};
use cwgan_core::fixtures::{self, GeneratorKind, InstanceShape};
use cwgan_core::{Metric, Point};
use proptest::prelude::*;

fn instance(triple: fixtures::Triple) -> Instance {
    let (joint, g, eta) = triple;
    Instance::new(&joint, &g, &eta, Metric::Euclidean).unwrap()
}

fn random_instance(seed: u64, generator: GeneratorKind, dim_y: usize) -> Instance {
    let shape = InstanceShape { dim_y, generator, max_x_atoms: 8, ..Default::default() };
    instance(fixtures::random_conditional_instance(&mut fixtures::rng(seed), &shape))
}

fn kind() -> impl Strategy<Value = GeneratorKind> {
    prop_oneof![Just(GeneratorKind::Affine), Just(GeneratorKind::Mlp)]
}

/// Largest `|f(p) - f(q)| - d(p, q)` over distinct pairs.
fn excess(points: &[Point], values: &[f64], metric: Metric) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for a in 0..points.len() {
        for b in a + 1..points.len() {
            worst = worst.max((values[a] - values[b]).abs() - metric.dist(&points[a], &points[b]));
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cover_is_a_partition(coords in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 1..80),
                            delta in 0.05f64..5.0) {
        let support: Vec<Point> = coords.iter().map(|c| point(c)).collect();
        let cover = build_cover(&support, delta).unwrap();
        prop_assert!(cover.box_diameter() < delta);
        for (i, y) in support.iter().enumerate() {
            let holders: Vec<usize> = (0..cover.len()).filter(|&k| cover.boxes[k].grid_index == cover.grid_index(y)).collect();
            prop_assert_eq!(holders.len(), 1);
            prop_assert_eq!(holders[0], cover.assignment[i]);
            prop_assert_eq!(cover.locate(y), Some(holders[0]));
        }
        for b in &cover.boxes {
            prop_assert!(!b.members.is_empty());
            prop_assert_eq!(b.representative, *b.members.iter().min().unwrap());
        }
    }

    #[test]
    fn lemma_holds_on_random_instances(seed in any::<u64>(), k in kind(), dim_y in 1usize..3) {
        let inst = random_instance(seed, k, dim_y);
        let table = empirical_moduli(&inst).unwrap();
        for s in lemma1_check(&table).unwrap() {
            prop_assert!(s.slack >= -1e-9);
        }
    }

    #[test]
    fn certificates_hold_on_random_instances(seed in any::<u64>(), k in kind(), eps in prop_oneof![Just(2.0), Just(0.5), Just(0.1)]) {
        let inst = random_instance(seed, k, 1);
        let (cert, d) = epsilon_certificate_unchecked(&inst, eps).unwrap();
        prop_assert!(cert.check().is_ok(), "{:?}", cert);
        prop_assert!(cert.chain.per_k_slacks.iter().all(|&s| s >= -1e-7));
        prop_assert!(cert.steps.lhs_to_bound >= -1e-7);
        prop_assert!(cert.steps.bound_to_total >= -1e-7);
        prop_assert!(cert.steps.total_to_final >= -1e-7);
        // Sandwich.
        prop_assert!(cert.v_deps <= cert.rhs + 1e-9);
        prop_assert!(cert.rhs <= cert.lhs + 1e-7);
        prop_assert!(cert.lhs <= cert.v_deps + eps + 1e-7);
        // Membership in the class: Lipschitz-1 in x for each fixed y.
        for k in 0..inst.len() {
            let y = &inst.y_atoms()[k];
            let mut pts: Vec<Point> = inst.real(k).atoms().to_vec();
            pts.extend(inst.generated(k).atoms().iter().cloned());
            pts.sort_by(|a, b| a.coords().partial_cmp(b.coords()).unwrap());
            pts.dedup();
            let values: Vec<f64> = pts.iter().map(|x| d.evaluate(x, y)).collect();
            prop_assert!(excess(&pts, &values, Metric::Euclidean) <= 1e-9);
        }
    }

    #[test]
    fn refinement_does_not_lose_value_on_delta_family(n in 3usize..60, delta in 0.05f64..1.5) {
        let inst = instance(fixtures::delta_family(n));
        let coarse = build_cover(inst.y_atoms(), delta).unwrap();
        let fine = coarse.refine(inst.y_atoms());
        let v = |c| discriminator_value(&inst, &build_piecewise_discriminator(&inst, c, 0.0).unwrap());
        prop_assert!(v(&fine) >= v(&coarse) - 1e-9);
    }
}

#[test]
fn scale_follows_the_generator_modulus_on_a_grid() {
    // π(x|y) = δ_y, G(z, y) = z + 2y on a grid of spacing s: the binding
    // modulus is the generator's, 2|y - y'|, so the first violating distance
    // is the smallest grid multiple above ε/8.
    let n = 41;
    let s = 1.0 / (n - 1) as f64;
    let table = empirical_moduli(&instance(fixtures::delta_family(n))).unwrap();
    let mut last = f64::INFINITY;
    for eps in [0.9, 0.7, 0.45, 0.33, 0.21, 0.13, 0.07, 0.03, 0.01] {
        let delta = select_delta(&table, eps).unwrap();
        let first_bad = s * ((eps / 8.0 / s).floor() + 1.0);
        // Scan: the smallest pairwise distance with some modulus above ε/4.
        let mut scan = f64::INFINITY;
        for i in 0..n {
            for j in i + 1..n {
                let b = eps / 4.0;
                if table.conditional_modulus(i, j) > b
                    || table.generator_modulus(i, j) > b
                    || (table.f_values[i] - table.f_values[j]).abs() > b
                {
                    scan = scan.min(table.distance(i, j));
                }
            }
        }
        assert!((scan - first_bad).abs() <= 1e-12, "eps {eps}: scan {scan} vs {first_bad}");
        assert!(delta <= scan && delta >= scan * (1.0 - 1e-6), "eps {eps}: {delta} vs {scan}");
        assert!(delta >= s * (1.0 - 1e-6));
        assert!(delta <= last);
        last = delta;
    }
}

#[test]
fn huge_epsilon_uses_one_box() {
    let inst = instance(fixtures::delta_family(30));
    let (cert, d) = epsilon_certificate_unchecked(&inst, 100.0).unwrap();
    assert_eq!(cert.delta, 1.0);
    assert_eq!(cert.boxes, 1);
    // Direct evaluation of the representative's potential on every condition.
    let f = &d.pieces[0];
    let v: f64 = (0..inst.len())
        .map(|k| inst.y_weights()[k] * (inst.real(k).expectation(|x| f.evaluate(x)) - inst.generated(k).expectation(|x| f.evaluate(x))))
        .sum();
    let (lhs, _) = lhs_conditional_objective(&inst.joint, &inst.generator, &inst.latent, Metric::Euclidean).unwrap();
    assert!((cert.gap - (lhs - v)).abs() <= 1e-12);
    assert!(cert.gap <= 100.0);
}

#[test]
fn copy_generator_gaps_vanish() {
    let inst = instance(fixtures::copy_instance());
    for row in convergence_study(&inst, &[1.0, 0.3, 0.05]).unwrap() {
        assert!(row.gap.abs() <= 1e-7);
        assert_eq!(row.lhs, 0.0);
    }
}

#[test]
fn swap_with_fine_cover_is_within_epsilon() {
    let inst = instance(fixtures::swap_instance(0.1));
    let (cert, _) = epsilon_certificate_unchecked(&inst, 0.2).unwrap();
    assert_eq!(cert.boxes, 2);
    assert!((cert.lhs - 1.0).abs() <= 1e-9);
    assert!(cert.gap <= 0.2 + 1e-7);
}

#[test]
fn hand_computed_lemma_slacks() {
    // π(x|y) = δ_y and G ≡ y + 1: F ≡ 1, so |F(y) - F(y')| = 0 while the
    // bound is |y - y'| + |y - y'|.
    let inst = instance(fixtures::shifted_delta_instance());
    let slacks = lemma1_check(&empirical_moduli(&inst).unwrap()).unwrap();
    assert_eq!(slacks.len(), 1);
    assert_eq!(slacks[0].lhs, 0.0);
    assert!((slacks[0].rhs - 2.0).abs() <= 1e-12);
    // Identical conditionals and a y-independent generator: everything is 0.
    let copy = instance(fixtures::copy_instance());
    for s in lemma1_check(&empirical_moduli(&copy).unwrap()).unwrap() {
        assert!(s.lhs.abs() <= 1e-12 && s.rhs.abs() <= 1e-12);
    }
}
