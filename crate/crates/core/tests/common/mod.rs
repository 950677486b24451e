//! Independent oracles shared by the integration tests and the acceptance
//! target. Nothing here calls the engine's update or the library's
//! eigensolver.

#![allow(dead_code)]

use std::path::PathBuf;

use dpac::topology::{build_topology, Edge, Topology};
use dpac::ExperimentConfig;
use rand::{Rng, RngCore};

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn reference_config() -> ExperimentConfig {
    ExperimentConfig::load(&config_path("reference.toml")).expect("shipped reference config loads")
}

/// Dense row-major `L` rebuilt from the edge list.
pub fn dense_laplacian(m: usize, edges: &[Edge]) -> Vec<f64> {
    let mut l = vec![0.0; m * m];
    for e in edges {
        let (a, b) = (e.i - 1, e.j - 1);
        l[a * m + b] += e.weight;
        l[b * m + a] += e.weight;
        l[a * m + a] -= e.weight;
        l[b * m + b] -= e.weight;
    }
    l
}

/// Random connected graph on `m` nodes whose weighted degrees stay below
/// 0.95, so every eigenvalue of `L` lies in `(-1.9, 0]`.
pub fn random_connected(rng: &mut impl RngCore, m: usize) -> (Vec<Edge>, Topology) {
    let mut pairs = Vec::new();
    for j in 1..m {
        let i = rng.random_range(0..j);
        pairs.push((i, j));
    }
    for i in 0..m {
        for j in i + 1..m {
            if !pairs.contains(&(i, j)) && rng.random_bool(0.3) {
                pairs.push((i, j));
            }
        }
    }
    let mut degree = vec![0usize; m];
    for &(i, j) in &pairs {
        degree[i] += 1;
        degree[j] += 1;
    }
    let edges: Vec<Edge> = pairs
        .iter()
        .map(|&(i, j)| {
            let cap = 0.95 / degree[i].max(degree[j]) as f64;
            Edge::new(i + 1, j + 1, rng.random_range(0.05 * cap..cap))
        })
        .collect();
    let topology = build_topology(m, &edges).expect("random graph satisfies the graph assumption");
    (edges, topology)
}

/// One round in per-coordinate matrix form:
/// `x' = (1-α)x + χLx + χL⁰ζ + w(r' - (1-α)r)` for each coordinate column.
#[allow(clippy::too_many_arguments)]
pub fn dense_step(
    l: &[f64],
    m: usize,
    d: usize,
    x: &[f64],
    zeta: &[f64],
    r: &[f64],
    r_next: &[f64],
    alpha: f64,
    chi: f64,
    w: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; m * d];
    for coord in 0..d {
        let col = |v: &[f64], i: usize| v[i * d + coord];
        for i in 0..m {
            let mut lx = 0.0;
            let mut l0z = 0.0;
            for j in 0..m {
                lx += l[i * m + j] * col(x, j);
                if j != i {
                    l0z += l[i * m + j] * col(zeta, j);
                }
            }
            out[i * d + coord] = (1.0 - alpha) * col(x, i)
                + chi * lx
                + chi * l0z
                + w * (col(r_next, i) - (1.0 - alpha) * col(r, i));
        }
    }
    out
}

/// Spectral norm of a symmetric matrix by power iteration.
pub fn power_norm(a: &[f64], n: usize) -> f64 {
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * i as f64 + 0.01 * (i * i) as f64).collect();
    let mut estimate = 0.0;
    for _ in 0..100_000 {
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= len);
        let av = matvec(a, &v, n);
        let next = av.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (next - estimate).abs() < 1e-15 {
            return next;
        }
        estimate = next;
        v = av;
    }
    estimate
}

fn matvec(a: &[f64], v: &[f64], n: usize) -> Vec<f64> {
    (0..n).map(|i| (0..n).map(|j| a[i * n + j] * v[j]).sum()).collect()
}

/// `(1-α)I + χL - (1-α)11ᵀ/m`, whose norm is `‖W^k‖` on the disagreement space.
pub fn dense_contraction(l: &[f64], m: usize, alpha: f64, chi: f64) -> Vec<f64> {
    let mut w = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            let id = if i == j { 1.0 } else { 0.0 };
            w[i * m + j] = (1.0 - alpha) * (id - 1.0 / m as f64) + chi * l[i * m + j];
        }
    }
    w
}

/// Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Independent Laplace CDF.
pub fn laplace_cdf(x: f64, b: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / b).exp()
    } else {
        1.0 - 0.5 * (-x / b).exp()
    }
}
