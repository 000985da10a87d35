//! l2-regularised linear classification, one-vs-rest.
//!
//! Each binary problem minimises
//! `λ/2 ‖w‖² + (1/M) Σ_m l(y_m (⟨w, x_m⟩ + b))` with the bias unregularised.
//! Hinge loss is solved exactly through its dual by sequential minimal
//! optimisation; logistic loss by accelerated gradient descent with restarts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, norm};
use crate::representation::{average_over_group, Representation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Hinge,
    Logistic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lambda: f64,
    pub loss: Loss,
    /// Iteration cap per binary problem.
    pub max_iter: usize,
    /// Hinge: KKT-gap tolerance. Logistic: relative gradient tolerance.
    pub tol: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1e-3,
            loss: Loss::Hinge,
            max_iter: 200_000,
            tol: 1e-9,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn logistic(lambda: f64) -> Self {
        TrainConfig {
            lambda,
            loss: Loss::Logistic,
            tol: 1e-6,
            ..Self::default()
        }
    }

    pub fn hinge(lambda: f64) -> Self {
        TrainConfig {
            lambda,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub config: TrainConfig,
    /// Final objective per class.
    pub objective: Vec<f64>,
    /// Final stationarity measure per class: KKT gap for hinge, gradient norm for logistic.
    pub gradient_norm: Vec<f64>,
    pub iterations: Vec<usize>,
}

impl LinearModel {
    pub fn classes(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }
}

fn loss_value(loss: Loss, margin: f64) -> f64 {
    match loss {
        Loss::Hinge => (1.0 - margin).max(0.0),
        Loss::Logistic => {
            // log(1 + exp(-m)) without overflow
            if margin > 0.0 {
                (-margin).exp().ln_1p()
            } else {
                -margin + margin.exp().ln_1p()
            }
        }
    }
}

/// `λ/2 ‖w‖² + (1/M) Σ l(y (⟨w, x⟩ + b))` for targets `y ∈ {−1, +1}`.
pub fn objective(
    w: &[f64],
    b: f64,
    features: &[Vec<f64>],
    targets: &[f64],
    lambda: f64,
    loss: Loss,
) -> f64 {
    let m = features.len() as f64;
    let data: f64 = features
        .iter()
        .zip(targets)
        .map(|(x, &y)| loss_value(loss, y * (dot(w, x) + b)))
        .sum();
    0.5 * lambda * dot(w, w) + data / m
}

/// `±1` targets of the one-vs-rest problem for `class`.
pub fn one_vs_rest_targets(labels: &[usize], class: usize) -> Vec<f64> {
    labels
        .iter()
        .map(|&l| if l == class { 1.0 } else { -1.0 })
        .collect()
}

fn validate(
    features: &[Vec<f64>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<(usize, usize)> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            actual: labels.len(),
        });
    }
    if features.len() < 2 {
        return Err(Error::invalid("training needs at least 2 samples"));
    }
    if !(config.lambda > 0.0 && config.lambda.is_finite()) {
        return Err(Error::invalid("lambda must be positive"));
    }
    let d = features[0].len();
    for x in features {
        check_dim(d, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("training features"));
        }
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    let distinct = (0..classes).filter(|c| labels.contains(c)).count();
    if distinct < 2 {
        return Err(Error::invalid("training needs at least 2 classes"));
    }
    Ok((classes, d))
}

struct Binary {
    w: Vec<f64>,
    b: f64,
    stationarity: f64,
    iterations: usize,
}

/// Train `K` one-vs-rest classifiers, `K = max(label) + 1`.
pub fn train_linear(
    features: &[Vec<f64>],
    labels: &[usize],
    config: &TrainConfig,
) -> Result<LinearModel> {
    let (classes, _) = validate(features, labels, config)?;
    let gram = match config.loss {
        Loss::Hinge => Some(gram_matrix(features)),
        Loss::Logistic => None,
    };
    let fits: Vec<Binary> = (0..classes)
        .into_par_iter()
        .map(|c| {
            let y = one_vs_rest_targets(labels, c);
            match &gram {
                Some(k) => smo_hinge(features, &y, k, config),
                None => nesterov_logistic(features, &y, config),
            }
        })
        .collect();
    let objective = fits
        .iter()
        .enumerate()
        .map(|(c, f)| {
            objective(
                &f.w,
                f.b,
                features,
                &one_vs_rest_targets(labels, c),
                config.lambda,
                config.loss,
            )
        })
        .collect();
    Ok(LinearModel {
        objective,
        gradient_norm: fits.iter().map(|f| f.stationarity).collect(),
        iterations: fits.iter().map(|f| f.iterations).collect(),
        bias: fits.iter().map(|f| f.b).collect(),
        weights: fits.into_iter().map(|f| f.w).collect(),
        config: *config,
    })
}

#[allow(clippy::needless_range_loop)]
fn gram_matrix(x: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = x.len();
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|j| if j < i { 0.0 } else { dot(&x[i], &x[j]) })
                .collect()
        })
        .collect();
    let mut k = rows;
    for i in 0..m {
        for j in 0..i {
            k[i][j] = k[j][i];
        }
    }
    k
}

/// Dual of the hinge problem with `C = 1/(λM)`:
/// `min ½ αᵀQα − Σα`, `0 ≤ α ≤ C`, `Σ y α = 0`, `Q_ij = y_i y_j ⟨x_i, x_j⟩`,
/// solved with second-order working-set selection.
fn smo_hinge(x: &[Vec<f64>], y: &[f64], k: &[Vec<f64>], config: &TrainConfig) -> Binary {
    let m = x.len();
    let c = 1.0 / (config.lambda * m as f64);
    let tau = 1e-12;
    let mut alpha = vec![0.0; m];
    let mut grad = vec![-1.0; m];
    let up = |a: f64, yi: f64| (yi > 0.0 && a < c) || (yi < 0.0 && a > 0.0);
    let low = |a: f64, yi: f64| (yi > 0.0 && a > 0.0) || (yi < 0.0 && a < c);
    let mut gap = f64::INFINITY;
    let mut iterations = 0;

    while iterations < config.max_iter {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        for t in 0..m {
            if up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..m {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i != usize::MAX && v < gmax {
                let b = gmax - v;
                let a = (k[i][i] + k[t][t] - 2.0 * k[i][t]).max(tau);
                let score = -(b * b) / a;
                if score < best {
                    best = score;
                    j = t;
                }
            }
        }
        gap = gmax - gmin;
        if i == usize::MAX || j == usize::MAX || gap <= config.tol {
            break;
        }
        iterations += 1;

        let (oi, oj) = (alpha[i], alpha[j]);
        let quad = (k[i][i] + k[j][j] - 2.0 * k[i][j]).max(tau);
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - oi, alpha[j] - oj);
        for t in 0..m {
            grad[t] += y[t] * (y[i] * di * k[i][t] + y[j] * dj * k[j][t]);
        }
    }

    // ρ from free vectors, else midpoint of the feasible interval
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..m {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            free += 1;
        } else if (alpha[t] <= 0.0 && y[t] > 0.0) || (alpha[t] >= c && y[t] < 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else {
        0.5 * (ub + lb)
    };
    let d = x[0].len();
    let mut w = vec![0.0; d];
    for t in 0..m {
        if alpha[t] != 0.0 {
            let s = alpha[t] * y[t];
            w.iter_mut().zip(&x[t]).for_each(|(wi, xi)| *wi += s * xi);
        }
    }
    Binary {
        w,
        b: -rho,
        stationarity: gap.max(0.0),
        iterations,
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Largest eigenvalue of `[X 1]ᵀ[X 1]` by power iteration.
fn spectral_bound(x: &[Vec<f64>]) -> f64 {
    let d = x[0].len();
    let mut v = vec![1.0 / ((d + 1) as f64).sqrt(); d + 1];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut out = vec![0.0; d + 1];
        for row in x {
            let z = dot(&v[..d], row) + v[d];
            out[..d].iter_mut().zip(row).for_each(|(o, r)| *o += z * r);
            out[d] += z;
        }
        let n = norm(&out);
        if n == 0.0 {
            return 1.0;
        }
        let converged = (n - lambda).abs() <= 1e-9 * n;
        lambda = n;
        v = out.into_iter().map(|o| o / n).collect();
        if converged {
            break;
        }
    }
    lambda * 1.01
}

/// Full gradient of the logistic objective in `(w, b)`.
fn logistic_gradient(x: &[Vec<f64>], y: &[f64], theta: &[f64], lambda: f64) -> Vec<f64> {
    let d = x[0].len();
    let m = x.len() as f64;
    let mut g = vec![0.0; d + 1];
    for (row, &yi) in x.iter().zip(y) {
        let z = dot(&theta[..d], row) + theta[d];
        let coeff = -yi * sigmoid(-yi * z) / m;
        g[..d]
            .iter_mut()
            .zip(row)
            .for_each(|(gi, r)| *gi += coeff * r);
        g[d] += coeff;
    }
    g[..d]
        .iter_mut()
        .zip(&theta[..d])
        .for_each(|(gi, t)| *gi += lambda * t);
    g
}

fn nesterov_logistic(x: &[Vec<f64>], y: &[f64], config: &TrainConfig) -> Binary {
    let d = x[0].len();
    let lip = config.lambda + 0.25 * spectral_bound(x) / x.len() as f64;
    let step = 1.0 / lip;
    let mut theta = vec![0.0; d + 1];
    let mut prev = theta.clone();
    let mut t_k = 1.0f64;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    while iterations < config.max_iter {
        let g_here = logistic_gradient(x, y, &theta, config.lambda);
        grad_norm = norm(&g_here);
        if grad_norm <= config.tol * (1.0 + norm(&theta[..d])) {
            break;
        }
        iterations += 1;
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
        let beta = (t_k - 1.0) / t_next;
        let look: Vec<f64> = theta
            .iter()
            .zip(&prev)
            .map(|(a, b)| a + beta * (a - b))
            .collect();
        let g = logistic_gradient(x, y, &look, config.lambda);
        let next: Vec<f64> = look.iter().zip(&g).map(|(a, gi)| a - step * gi).collect();
        // restart momentum when it points uphill
        let uphill: f64 = g
            .iter()
            .zip(next.iter().zip(&theta))
            .map(|(gi, (n, o))| gi * (n - o))
            .sum();
        prev = std::mem::replace(&mut theta, next);
        t_k = if uphill > 0.0 { 1.0 } else { t_next };
    }
    Binary {
        b: theta[d],
        w: theta[..d].to_vec(),
        stationarity: grad_norm,
        iterations,
    }
}

/// Class scores and predicted labels; ties go to the smallest class index.
pub fn predict(model: &LinearModel, features: &[Vec<f64>]) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let d = model.dim();
    for x in features {
        check_dim(d, x.len())?;
    }
    let scores: Vec<Vec<f64>> = features.iter().map(|x| model.scores(x)).collect();
    let labels = scores
        .iter()
        .map(|s| {
            let mut best = 0;
            for (c, &v) in s.iter().enumerate() {
                if v > s[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Ok((labels, scores))
}

pub fn accuracy(predicted: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64
}

/// `‖w − P_1 w‖ / ‖w‖` per class; the bias is excluded.
pub fn invariance_residual(model: &LinearModel, rep: &Representation) -> Result<Vec<f64>> {
    check_dim(rep.dim(), model.dim())?;
    Ok(model
        .weights
        .iter()
        .map(|w| {
            let p = average_over_group(rep, w);
            let diff: Vec<f64> = w.iter().zip(&p).map(|(a, b)| a - b).collect();
            norm(&diff) / norm(w).max(f64::MIN_POSITIVE)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Vec<f64>>, Vec<usize>) {
        (vec![vec![1.0, 2.0], vec![-1.0, -1.5]], vec![1, 0])
    }

    #[test]
    fn separable_pair_is_learned_by_both_losses() {
        let (x, y) = separable();
        for cfg in [TrainConfig::hinge(1e-3), TrainConfig::logistic(1e-3)] {
            let model = train_linear(&x, &y, &cfg).unwrap();
            let (pred, _) = predict(&model, &x).unwrap();
            assert_eq!(pred, y);
            for c in 0..2 {
                let t = one_vs_rest_targets(&y, c);
                let zero = objective(&[0.0, 0.0], 0.0, &x, &t, cfg.lambda, cfg.loss);
                assert!(model.objective[c] <= zero);
            }
        }
    }

    #[test]
    fn logistic_on_symmetric_data_is_parallel() {
        let dir = [0.6, 0.8];
        let x: Vec<Vec<f64>> = (1..=4)
            .flat_map(|k| {
                let s = k as f64;
                [vec![s * dir[0], s * dir[1]], vec![-s * dir[0], -s * dir[1]]]
            })
            .collect();
        let y: Vec<usize> = (0..8).map(|i| usize::from(i % 2 == 0)).collect();
        let model = train_linear(&x, &y, &TrainConfig::logistic(1e-2)).unwrap();
        let w = &model.weights[1];
        let cross = w[0] * dir[1] - w[1] * dir[0];
        assert!(cross.abs() < 1e-6 * norm(w));
        assert!(model.bias[1].abs() < 1e-6);
        assert!(model.gradient_norm[1] <= 1e-6 * (1.0 + norm(w)));
    }

    #[test]
    fn hinge_dual_matches_subgradient_optimality() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64 * 0.37;
                vec![t.sin() * 2.0, t.cos(), (t * 1.7).sin()]
            })
            .collect();
        let y: Vec<usize> = x
            .iter()
            .map(|r| usize::from(r[0] + 0.3 * r[2] > 0.1))
            .collect();
        let cfg = TrainConfig::hinge(0.05);
        let model = train_linear(&x, &y, &cfg).unwrap();
        let t = one_vs_rest_targets(&y, 1);
        let best = model.objective[1];
        // no random perturbation improves on the solution
        for k in 0..50 {
            let mut w = model.weights[1].clone();
            let j = k % 3;
            w[j] += if k % 2 == 0 { 1e-3 } else { -1e-3 };
            assert!(objective(&w, model.bias[1], &x, &t, cfg.lambda, cfg.loss) >= best - 1e-9);
        }
        assert!(model.gradient_norm[1] <= 1e-9);
    }

    #[test]
    fn zero_model_predicts_class_zero() {
        let model = LinearModel {
            weights: vec![vec![0.0; 3]; 3],
            bias: vec![0.0; 3],
            config: TrainConfig::default(),
            objective: vec![],
            gradient_norm: vec![],
            iterations: vec![],
        };
        let (pred, _) = predict(&model, &[vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(pred, vec![0]);
        assert!(predict(&model, &[vec![1.0]]).is_err());
    }

    #[test]
    fn rejects_degenerate_problems() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(train_linear(&x, &[0, 0], &TrainConfig::default()).is_err());
        assert!(train_linear(&x, &[0, 1], &TrainConfig::hinge(0.0)).is_err());
        assert!(train_linear(
            &[vec![f64::NAN], vec![1.0]],
            &[0, 1],
            &TrainConfig::default()
        )
        .is_err());
    }
}
