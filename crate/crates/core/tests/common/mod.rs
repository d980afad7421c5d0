//! Oracles written independently of the library's solvers, plus proptest
//! strategies for measures.
#![allow(dead_code)]

use cwgan_core::{DiscreteMeasure, Metric, Point};
use proptest::prelude::*;

/// 1-D W1 as `∫_0^1 |F_μ^{-1}(t) - F_ν^{-1}(t)| dt`, walking both quantile
/// functions over the merged weight breakpoints.
pub fn quantile_w1(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let sorted = |m: &DiscreteMeasure| {
        let mut v: Vec<(f64, f64)> = m.iter().map(|(p, w)| (p.coords()[0], w)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (a, b) = (sorted(mu), sorted(nu));
    let (mut i, mut j) = (0, 0);
    let (mut ra, mut rb) = (a[0].1, b[0].1);
    let mut total = 0.0;
    loop {
        let step = ra.min(rb);
        total += step * (a[i].0 - b[j].0).abs();
        ra -= step;
        rb -= step;
        if ra <= 1e-15 {
            i += 1;
            if i == a.len() {
                break;
            }
            ra += a[i].1;
        }
        if rb <= 1e-15 {
            j += 1;
            if j == b.len() {
                break;
            }
            rb += b[j].1;
        }
    }
    total
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

/// W1 between two uniform measures on `n` points each: by Birkhoff the
/// optimum is a permutation, found by enumeration.
pub fn assignment_w1(xs: &[Point], ys: &[Point], metric: Metric) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    permutations(n)
        .iter()
        .map(|p| p.iter().enumerate().map(|(i, &j)| metric.dist(&xs[i], &ys[j])).sum::<f64>() / n as f64)
        .fold(f64::INFINITY, f64::min)
}

pub fn point(c: &[f64]) -> Point {
    Point::new(c.to_vec()).unwrap()
}

/// Random measure in `[-5, 5]^dim` with 1..=max_atoms atoms; coordinates are
/// multiples of 1/8 so that duplicate atoms occur.
pub fn measure(dim: usize, max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((prop::collection::vec(-40i32..=40, dim), 1u32..=100), 1..=max_atoms).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.1 as f64).sum();
        let (pts, ws): (Vec<Point>, Vec<f64>) = atoms
            .into_iter()
            .map(|(c, w)| (Point::new(c.iter().map(|&v| v as f64 / 8.0).collect()).unwrap(), w as f64 / total))
            .unzip();
        DiscreteMeasure::new(pts, ws).unwrap()
    })
}

/// Measure with continuous coordinates in `[-5, 5]^dim`.
pub fn continuous_measure(dim: usize, max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((prop::collection::vec(-5.0f64..5.0, dim), 0.01f64..1.0), 1..=max_atoms).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let (pts, ws): (Vec<Point>, Vec<f64>) =
            atoms.into_iter().map(|(c, w)| (Point::new(c).unwrap(), w / total)).unzip();
        DiscreteMeasure::new(pts, ws).unwrap()
    })
}

pub fn metric() -> impl Strategy<Value = Metric> {
    prop_oneof![Just(Metric::Euclidean), Just(Metric::L1)]
}

pub fn cwgan() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_cwgan"))
}
