//! Shared helpers for the integration suites: seeded graph and signal
//! generators, dense oracles, and the finite-difference gradient checker.

#![allow(dead_code)]

use ndarray::Array2;

use qufg::cheb::FastTransformPlan;
use qufg::graph::{Graph, NormalizedLaplacian};
use qufg::neural::{loss_and_grads, NetworkParams};
use qufg::rng::Stream;
use qufg::spectral::EigenSystem;

/// Seeded Erdos-Renyi-plus-ring graph; the ring keeps it connected.
pub fn random_graph(n: usize, edge_prob: f64, seed: u64) -> Graph {
    let s = Stream::new(seed, "it-graph");
    let mut edges: Vec<(usize, usize)> = if n > 1 {
        (0..n).map(|i| (i, (i + 1) % n)).collect()
    } else {
        Vec::new()
    };
    for i in 0..n {
        for j in (i + 2)..n {
            if s.uniform(&[i as u64, j as u64]) < edge_prob {
                edges.push((i, j));
            }
        }
    }
    Graph::build(n, &edges).expect("generated edges are valid")
}

pub fn random_signal(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let s = Stream::new(seed, "it-signal");
    Array2::from_shape_fn((n, d), |(i, j)| s.normal(&[i as u64, j as u64]))
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn frob(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn laplacian_of(g: &Graph) -> NormalizedLaplacian {
    NormalizedLaplacian::new(g)
}

/// Dense transform blocks with the plan's fitted polynomials substituted
/// for the modulation functions; the independent oracle for the fast
/// recursions.
pub fn dense_polynomial_blocks(es: &EigenSystem, plan: &FastTransformPlan) -> Vec<Array2<f64>> {
    plan.spec()
        .block_labels()
        .iter()
        .map(|&(band, level)| {
            es.spectral_operator(|l| plan.polynomial_block_multiplier(band, level, l))
        })
        .collect()
}

/// Central finite differences over every parameter entry of the network.
/// Returns the largest relative error against the analytic gradients.
#[allow(clippy::needless_range_loop)]
pub fn gradient_max_rel_err(
    net: &mut NetworkParams,
    plan: &FastTransformPlan,
    x: &Array2<f64>,
    labels: &[usize],
    mask: &[usize],
    weight_decay: f64,
) -> f64 {
    let (_, grads) = loss_and_grads(net, plan, x, labels, mask, weight_decay, None)
        .expect("gradient evaluation");
    let analytic: Vec<Vec<f64>> = grads.tensor_slices().iter().map(|s| s.to_vec()).collect();

    let step = 1e-5;
    let mut worst = 0.0f64;
    for t in 0..analytic.len() {
        for i in 0..analytic[t].len() {
            let loss_at = |net: &mut NetworkParams, delta: f64| -> f64 {
                net.tensor_slices_mut()[t][i] += delta;
                let (loss, _) = loss_and_grads(net, plan, x, labels, mask, weight_decay, None)
                    .expect("loss evaluation");
                net.tensor_slices_mut()[t][i] -= delta;
                loss
            };
            let plus = loss_at(net, step);
            let minus = loss_at(net, -step);
            let fd = (plus - minus) / (2.0 * step);
            let a = analytic[t][i];
            let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    worst
}
