use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{log_logistic, logistic, IrtError, ResponseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitPolicy {
    /// `b` from the logit of the clamped proportion incorrect, `a = 1`,
    /// `theta` from standardized raw scores.
    Empirical,
    /// `a = 1`, `b = 0`, `theta` from standardized raw scores.
    Flat,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub init: InitPolicy,
    /// `a` is kept in `[-a_bound, a_bound]`.
    pub a_bound: f64,
    /// `b` is kept in `[-b_bound, b_bound]` so items nobody (or everybody)
    /// answers stay finite.
    pub b_bound: f64,
    /// Stop early once the largest gradient component falls below this.
    pub tolerance: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epochs: 2000,
            learning_rate: 0.1,
            lr_decay: 0.9999,
            init: InitPolicy::Empirical,
            a_bound: 5.0,
            b_bound: 10.0,
            tolerance: 1e-6,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), IrtError> {
        let ok = self.epochs > 0
            && self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && self.lr_decay > 0.0
            && self.lr_decay <= 1.0
            && self.a_bound > 0.0
            && self.b_bound > 0.0
            && self.tolerance >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(IrtError::Config(alloc::format!("{self:?}")))
        }
    }
}

/// Fitted 2PL parameters. `a`/`b` follow the matrix item order and `theta`
/// its candidate order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrtFit {
    pub items: Vec<String>,
    pub candidates: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub theta: Vec<f64>,
    pub log_likelihood: f64,
    pub initial_log_likelihood: f64,
    pub converged: bool,
    pub epochs_run: usize,
    /// Items every candidate answered the same way; their difficulty is
    /// only bounded by `b_bound`.
    pub flagged_items: Vec<usize>,
    /// Log-likelihood after each epoch.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<f64>,
    pub config: FitConfig,
}

impl IrtFit {
    pub fn mean_a(&self) -> f64 {
        crate::stats::mean(&self.a)
    }

    pub fn mean_b(&self) -> f64 {
        crate::stats::mean(&self.b)
    }
}

/// Bernoulli log-likelihood of `r[item][candidate]`.
pub fn log_likelihood(r: &[Vec<u8>], a: &[f64], b: &[f64], theta: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, row) in r.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let z = a[i] * (theta[j] - b[i]);
            total += if v == 1 { log_logistic(z) } else { log_logistic(-z) };
        }
    }
    total
}

struct Params {
    a: Vec<f64>,
    b: Vec<f64>,
    theta: Vec<f64>,
}

impl Params {
    /// Rescales theta to mean 0 / variance 1, compensating a and b so the
    /// likelihood is unchanged, then applies the bounds.
    fn normalize(&mut self, config: &FitConfig) {
        let n = self.theta.len() as f64;
        let m = self.theta.iter().sum::<f64>() / n;
        let var = self.theta.iter().map(|t| (t - m) * (t - m)).sum::<f64>() / n;
        let s = libm::sqrt(var);
        if s > 1e-12 {
            for t in &mut self.theta {
                *t = (*t - m) / s;
            }
            for (a, b) in self.a.iter_mut().zip(&mut self.b) {
                *a *= s;
                *b = (*b - m) / s;
            }
        }
        for a in &mut self.a {
            *a = a.clamp(-config.a_bound, config.a_bound);
        }
        for b in &mut self.b {
            *b = b.clamp(-config.b_bound, config.b_bound);
        }
    }
}

fn logit(p: f64) -> f64 {
    libm::log(p / (1.0 - p))
}

/// Maximum-likelihood 2PL fit by full-batch gradient ascent.
///
/// Each epoch takes a step of `learning_rate * lr_decay^epoch` along the
/// mean-normalized gradient, renormalizes theta and clamps; a step that
/// would lower the likelihood is halved until it does not, so the tracked
/// likelihood never decreases. Candidates are processed in id order, which
/// makes the result independent of column order.
pub fn fit_2pl(responses: &ResponseMatrix, config: &FitConfig) -> Result<IrtFit, IrtError> {
    config.validate()?;
    let n_items = responses.n_items();
    let n_cand = responses.n_candidates();
    if n_items < 2 || n_cand < 2 {
        return Err(IrtError::TooSmall { items: n_items, candidates: n_cand });
    }
    let total: usize = responses.rows().iter().flatten().map(|&v| v as usize).sum();
    if total == 0 || total == n_items * n_cand {
        return Err(IrtError::Constant);
    }

    let mut order: Vec<usize> = (0..n_cand).collect();
    order.sort_by(|&x, &y| responses.candidates()[x].cmp(&responses.candidates()[y]));
    let r: Vec<Vec<u8>> = responses.rows().iter().map(|row| order.iter().map(|&j| row[j]).collect()).collect();

    let mut p = Params {
        a: vec![1.0; n_items],
        b: r.iter()
            .map(|row| match config.init {
                InitPolicy::Empirical => {
                    let wrong = row.iter().filter(|&&v| v == 0).count() as f64 / n_cand as f64;
                    logit(wrong.clamp(0.05, 0.95))
                }
                InitPolicy::Flat => 0.0,
            })
            .collect(),
        theta: (0..n_cand).map(|j| r.iter().map(|row| row[j] as f64).sum::<f64>()).collect(),
    };
    p.normalize(config);

    let mut ll = log_likelihood(&r, &p.a, &p.b, &p.theta);
    let initial = ll;
    let mut trace = Vec::with_capacity(config.epochs);
    let mut multiplier = 1.0f64;
    let mut converged = false;
    let mut epochs_run = 0;
    let mut ga = vec![0.0; n_items];
    let mut gb = vec![0.0; n_items];
    let mut gt = vec![0.0; n_cand];
    let mut lr = config.learning_rate;

    for _ in 0..config.epochs {
        ga.iter_mut().for_each(|g| *g = 0.0);
        gb.iter_mut().for_each(|g| *g = 0.0);
        gt.iter_mut().for_each(|g| *g = 0.0);
        for (i, row) in r.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let resid = v as f64 - logistic(p.a[i] * (p.theta[j] - p.b[i]));
                ga[i] += resid * (p.theta[j] - p.b[i]);
                gb[i] -= resid * p.a[i];
                gt[j] += resid * p.a[i];
            }
        }
        ga.iter_mut().chain(gb.iter_mut()).for_each(|g| *g /= n_cand as f64);
        gt.iter_mut().for_each(|g| *g /= n_items as f64);
        let norm = ga.iter().chain(&gb).chain(&gt).fold(0.0f64, |m, g| m.max(libm::fabs(*g)));
        epochs_run += 1;
        if norm < config.tolerance {
            converged = true;
            trace.push(ll);
            break;
        }

        let mut accepted = false;
        for _ in 0..40 {
            let step = lr * multiplier;
            let mut next = Params {
                a: p.a.iter().zip(&ga).map(|(x, g)| x + step * g).collect(),
                b: p.b.iter().zip(&gb).map(|(x, g)| x + step * g).collect(),
                theta: p.theta.iter().zip(&gt).map(|(x, g)| x + step * g).collect(),
            };
            next.normalize(config);
            let next_ll = log_likelihood(&r, &next.a, &next.b, &next.theta);
            if next_ll.is_finite() && next_ll >= ll {
                p = next;
                ll = next_ll;
                multiplier = (multiplier * 2.0).min(1.0);
                accepted = true;
                break;
            }
            multiplier *= 0.5;
        }
        trace.push(ll);
        if !accepted {
            // No ascent direction survives the bounds.
            converged = true;
            break;
        }
        lr *= config.lr_decay;
    }

    let mut theta = vec![0.0; n_cand];
    for (k, &j) in order.iter().enumerate() {
        theta[j] = p.theta[k];
    }
    Ok(IrtFit {
        items: responses.items().to_vec(),
        candidates: responses.candidates().to_vec(),
        a: p.a,
        b: p.b,
        theta,
        log_likelihood: ll,
        initial_log_likelihood: initial,
        converged,
        epochs_run,
        flagged_items: responses.constant_items(),
        trace,
        config: config.clone(),
    })
}
