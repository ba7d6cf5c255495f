//! Independent oracles: explicit-loop value and gradient contractions and
//! finite-difference evaluations of the composed update expressions. None
//! of this goes through the library's contraction or dual numbers.
#![allow(dead_code)]

use anticipation::{JointPolicy, PayoffTensor, PolicyMode};
use rand::Rng;

pub type Blocks = Vec<Vec<f64>>;

pub const FD_STEP: f64 = 1e-3;

/// `|a − b| ≤ tol · max(|a|, |b|, 1)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn all_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| close(*x, *y, tol))
}

pub fn probs(mode: PolicyMode, block: &[f64]) -> Vec<f64> {
    match mode {
        PolicyMode::Reduced => vec![block[0], 1.0 - block[0]],
        PolicyMode::Simplex => block.to_vec(),
    }
}

/// All joint action profiles in row-major order, last agent fastest.
pub fn joint_profiles(shape: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for &m in shape {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..m).map(move |a| {
                    let mut p = prefix.clone();
                    p.push(a);
                    p
                })
            })
            .collect();
    }
    out
}

pub fn value(game: &PayoffTensor, mode: PolicyMode, blocks: &[Vec<f64>]) -> f64 {
    let p: Vec<Vec<f64>> = blocks.iter().map(|b| probs(mode, b)).collect();
    joint_profiles(game.shape())
        .iter()
        .zip(game.entries())
        .map(|(joint, r)| {
            r * joint
                .iter()
                .enumerate()
                .map(|(i, &a)| p[i][a])
                .product::<f64>()
        })
        .sum()
}

/// Exact `∂V/∂θ_agent` from the multilinear contraction.
pub fn gradient(
    game: &PayoffTensor,
    mode: PolicyMode,
    blocks: &[Vec<f64>],
    agent: usize,
) -> Vec<f64> {
    let p: Vec<Vec<f64>> = blocks.iter().map(|b| probs(mode, b)).collect();
    let mut dp = vec![0.0; game.shape()[agent]];
    for (joint, r) in joint_profiles(game.shape()).iter().zip(game.entries()) {
        let others: f64 = joint
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != agent)
            .map(|(i, &a)| p[i][a])
            .product();
        dp[joint[agent]] += r * others;
    }
    match mode {
        PolicyMode::Reduced => vec![dp[0] - dp[1]],
        PolicyMode::Simplex => dp,
    }
}

/// Five-point central-difference gradient; exact for polynomials of
/// degree at most four up to rounding.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|c| {
            let at = |s: f64| {
                let mut y = x.to_vec();
                y[c] += s * h;
                f(&y)
            };
            (-at(2.0) + 8.0 * at(1.0) - 8.0 * at(-1.0) + at(-2.0)) / (12.0 * h)
        })
        .collect()
}

/// Central-difference mixed second derivatives `∂²V/∂θ_i[r]∂θ_j[c]`.
pub fn fd_cross_hessian(
    game: &PayoffTensor,
    mode: PolicyMode,
    blocks: &[Vec<f64>],
    i: usize,
    j: usize,
    h: f64,
) -> Vec<Vec<f64>> {
    let n_i = blocks[i].len();
    let n_j = blocks[j].len();
    let eval = |r: usize, si: f64, c: usize, sj: f64| {
        let mut b = blocks.to_vec();
        b[i][r] += si * h;
        b[j][c] += sj * h;
        value(game, mode, &b)
    };
    (0..n_i)
        .map(|r| {
            (0..n_j)
                .map(|c| {
                    (eval(r, 1.0, c, 1.0) - eval(r, 1.0, c, -1.0) - eval(r, -1.0, c, 1.0)
                        + eval(r, -1.0, c, -1.0))
                        / (4.0 * h * h)
                })
                .collect()
        })
        .collect()
}

/// Exact cross-Hessian from the contraction (the gradient is linear in
/// every other agent's parameters, so one difference of exact gradients
/// with a unit step is exact).
pub fn cross_hessian(
    game: &PayoffTensor,
    mode: PolicyMode,
    blocks: &[Vec<f64>],
    i: usize,
    j: usize,
) -> Vec<Vec<f64>> {
    if i == j {
        return vec![vec![0.0; blocks[j].len()]; blocks[i].len()];
    }
    let base = gradient(game, mode, blocks, i);
    let mut h = vec![vec![0.0; blocks[j].len()]; blocks[i].len()];
    for c in 0..blocks[j].len() {
        let mut b = blocks.to_vec();
        b[j][c] += 1.0;
        let moved = gradient(game, mode, &b, i);
        for r in 0..blocks[i].len() {
            h[r][c] = moved[r] - base[r];
        }
    }
    h
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(p, q)| p + a * q).collect()
}

pub fn naive(game: &PayoffTensor, mode: PolicyMode, blocks: &[Vec<f64>], eta: f64) -> Blocks {
    (0..blocks.len())
        .map(|i| {
            gradient(game, mode, blocks, i)
                .iter()
                .map(|g| eta * g)
                .collect()
        })
        .collect()
}

/// Two-agent look-ahead step by finite differences of the composed value:
/// the opponent's step is frozen at the current point for LA and follows
/// the differentiated parameters for LOLA.
pub fn look_ahead(
    game: &PayoffTensor,
    mode: PolicyMode,
    blocks: &[Vec<f64>],
    eta: f64,
    shaping: bool,
) -> Blocks {
    (0..2)
        .map(|i| {
            let j = 1 - i;
            let frozen = gradient(game, mode, blocks, j);
            let f = |x: &[f64]| {
                let mut b = blocks.to_vec();
                b[i] = x.to_vec();
                let step = if shaping {
                    gradient(game, mode, &b, j)
                } else {
                    frozen.clone()
                };
                b[j] = axpy(&blocks[j], eta, &step);
                value(game, mode, &b)
            };
            fd_gradient(f, &blocks[i], FD_STEP)
                .iter()
                .map(|g| eta * g)
                .collect()
        })
        .collect()
}

/// Second-order expansion of the LOLA step, exact because the value is
/// linear in each agent's parameters:
/// `η∇_iV + η² H_ij ∇_jV + η² ∇_i(∇_jV)ᵀ∇_jV`; the last term is the
/// shaping term LA drops.
pub fn lola_taylor(
    game: &PayoffTensor,
    mode: PolicyMode,
    blocks: &[Vec<f64>],
    eta: f64,
) -> (Blocks, Blocks) {
    let mut full = Vec::new();
    let mut shaping_terms = Vec::new();
    for i in 0..2 {
        let j = 1 - i;
        let gi = gradient(game, mode, blocks, i);
        let gj = gradient(game, mode, blocks, j);
        let h = cross_hessian(game, mode, blocks, i, j);
        let hv: Vec<f64> = h
            .iter()
            .map(|row| row.iter().zip(&gj).map(|(a, b)| a * b).sum())
            .collect();
        // differentiating through the opponent's step adds the same H·∇_jV product
        let shaping: Vec<f64> = hv.iter().map(|x| eta * eta * x).collect();
        full.push(
            gi.iter()
                .zip(&hv)
                .zip(&shaping)
                .map(|((g, v), s)| eta * g + eta * eta * v + s)
                .collect(),
        );
        shaping_terms.push(shaping);
    }
    (full, shaping_terms)
}

/// Hierarchical step by nested finite differences of the composed value.
/// `hierarchy` lists agents from the lowest level to the highest.
pub fn hla(
    game: &PayoffTensor,
    mode: PolicyMode,
    blocks: &[Vec<f64>],
    eta: f64,
    hierarchy: &[usize],
) -> Blocks {
    let n = blocks.len();
    let theta: Blocks = hierarchy.iter().map(|&a| blocks[a].clone()).collect();
    let mut planned: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut out = vec![Vec::new(); n];
    for level in (0..n).rev() {
        let d = hla_level(game, mode, eta, hierarchy, &theta, level, level, &planned);
        planned[level] = Some(axpy(&theta[level], 1.0, &d));
        out[hierarchy[level]] = d;
    }
    out
}

fn by_agent(hierarchy: &[usize], by_level: Blocks) -> Blocks {
    let mut out = vec![Vec::new(); by_level.len()];
    for (level, b) in by_level.into_iter().enumerate() {
        out[hierarchy[level]] = b;
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn hla_level(
    game: &PayoffTensor,
    mode: PolicyMode,
    eta: f64,
    hierarchy: &[usize],
    theta: &[Vec<f64>],
    j: usize,
    top: usize,
    planned: &[Option<Vec<f64>>],
) -> Vec<f64> {
    let args_at = |t: &[Vec<f64>]| -> Blocks {
        let mut args = Vec::with_capacity(t.len());
        for k in 0..j {
            let dk = hla_level(game, mode, eta, hierarchy, t, k, top, planned);
            args.push(axpy(&t[k], 1.0, &dk));
        }
        args.extend(t[j..=top].iter().cloned());
        args.extend(
            planned[top + 1..]
                .iter()
                .map(|p| p.clone().expect("planned above top")),
        );
        by_agent(hierarchy, args)
    };
    if j == 0 {
        let args = args_at(theta);
        return gradient(game, mode, &args, hierarchy[0])
            .iter()
            .map(|g| eta * g)
            .collect();
    }
    let f = |x: &[f64]| {
        let mut t = theta.to_vec();
        t[j] = x.to_vec();
        value(game, mode, &args_at(&t))
    };
    fd_gradient(f, &theta[j], FD_STEP)
        .iter()
        .map(|g| eta * g)
        .collect()
}

pub fn random_game<R: Rng>(rng: &mut R, agents: usize, actions: usize) -> PayoffTensor {
    let len = actions.pow(agents as u32);
    let entries = (0..len).map(|_| rng.random_range(-5.0..5.0)).collect();
    PayoffTensor::new(vec![actions; agents], entries).unwrap()
}

/// Interior random parameters for `game` under `mode`.
pub fn random_blocks<R: Rng>(rng: &mut R, game: &PayoffTensor, mode: PolicyMode) -> Blocks {
    game.shape()
        .iter()
        .map(|&m| match mode {
            PolicyMode::Reduced => vec![rng.random_range(0.05..0.95)],
            PolicyMode::Simplex => {
                let w: Vec<f64> = (0..m).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = w.iter().sum();
                w.iter().map(|x| x / s).collect()
            }
        })
        .collect()
}

pub fn policy(mode: PolicyMode, blocks: &[Vec<f64>]) -> JointPolicy {
    JointPolicy::new(mode, blocks.to_vec()).unwrap()
}

/// Mode used for a game: reduced when every agent has two actions.
pub fn natural_mode(game: &PayoffTensor) -> PolicyMode {
    if game.shape().iter().all(|&m| m == 2) {
        PolicyMode::Reduced
    } else {
        PolicyMode::Simplex
    }
}

/// Parity game on three binary agents: payoff 1 when the actions' XOR is 0.
pub fn xor_game() -> PayoffTensor {
    let entries = joint_profiles(&[2, 2, 2])
        .iter()
        .map(|j| if (j[0] ^ j[1] ^ j[2]) == 0 { 1.0 } else { 0.0 })
        .collect();
    PayoffTensor::new(vec![2, 2, 2], entries).unwrap()
}
