//! Exact multi-output GP inference: negative log marginal likelihood,
//! gradients in unconstrained coordinates, hyperparameter optimization, and
//! posterior prediction over stacked multi-channel data.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::MultiChannelDataset;
use crate::error::{Error, Result};
use crate::kernels::{
    gram_matrix, gram_upper_triangle, BaseKernelParams, CsmShared, FamilyParams, KernelDocument,
    KernelFamily, LmcBase, MogpKernelParams, SpectralComponent,
};
use crate::numerics::{self, SymMatrix};
use crate::scalar::{Dual, Scalar};

/// Kernel parameters, per-channel noise variances, and training data.
#[derive(Clone, Debug)]
pub struct MogpModel {
    pub kernel: MogpKernelParams<f64>,
    pub noise: Vec<f64>,
    pub train: MultiChannelDataset,
}

impl MogpModel {
    pub fn new(
        kernel: MogpKernelParams<f64>,
        noise: Vec<f64>,
        train: MultiChannelDataset,
    ) -> Result<Self> {
        kernel.validate()?;
        if kernel.m != train.m() {
            return Err(Error::DimensionMismatch {
                expected: kernel.m,
                got: train.m(),
            });
        }
        if kernel.p != train.p {
            return Err(Error::DimensionMismatch {
                expected: kernel.p,
                got: train.p,
            });
        }
        if noise.len() != kernel.m {
            return Err(Error::DimensionMismatch {
                expected: kernel.m,
                got: noise.len(),
            });
        }
        if noise.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParams(
                "noise variances must be positive and finite".into(),
            ));
        }
        Ok(MogpModel {
            kernel,
            noise,
            train,
        })
    }
}

/// Posterior means and (clamped) variances at query points.
#[derive(Clone, Debug)]
pub struct GpPosterior {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    /// Number of variances that had to be clamped up to zero.
    pub clamped: usize,
}

/// Optimization settings. `tolerance` is on the change of the best-so-far
/// NLML; the run stops early once no improvement beyond it is seen for a
/// stall window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub algorithm: String,
    pub step_size: f64,
    pub max_iters: usize,
    pub tolerance: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            algorithm: "adam".into(),
            step_size: 0.01,
            max_iters: 1500,
            tolerance: 1e-6,
            restarts: 3,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || self.max_iters == 0 || !(self.tolerance > 0.0) {
            return Err(Error::InvalidParams(
                "optimizer needs positive step size, iterations, tolerance".into(),
            ));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidParams("need at least one restart".into()));
        }
        match self.algorithm.as_str() {
            "adam" | "gd" => Ok(()),
            other => Err(Error::InvalidParams(format!(
                "unknown optimizer algorithm '{other}'"
            ))),
        }
    }
}

/// Fit outcome; the trace reports the best-so-far NLML per iteration of the
/// winning restart.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FitReport {
    pub nlml_trace: Vec<f64>,
    pub final_params: KernelDocument,
    pub final_noise: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub restarts_used: usize,
}

impl FitReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Two-column CSV of the NLML trace.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,nlml\n");
        for (i, v) in self.nlml_trace.iter().enumerate() {
            out.push_str(&format!("{i},{v}\n"));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Unconstrained parameterization
//
// Positives (weights, variances, scales, noise) are optimized as logs;
// frequency means, delays, phases, and mixing factors stay raw. Pinned
// entries (channel-1 delays, CSM channel-1 phases, MOSM phase entries past
// the first) are excluded from the vector.

fn pack_component(c: &SpectralComponent<f64>, out: &mut Vec<f64>, with_delays: bool, phi_len: usize) {
    out.push(c.w.ln());
    out.extend_from_slice(&c.mu);
    out.extend(c.sigma2.iter().map(|v| v.ln()));
    if with_delays {
        out.extend_from_slice(&c.theta);
        out.extend_from_slice(&c.phi[..phi_len]);
    }
}

/// Flatten kernel parameters and noise into optimizer coordinates.
pub fn pack_model(params: &MogpKernelParams<f64>, noise: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    match &params.payload {
        FamilyParams::Sm(comps) => {
            for c in comps {
                pack_component(c, &mut out, false, 0);
            }
        }
        FamilyParams::Spectral(table) => {
            let phi_len = if params.family == KernelFamily::Mosm {
                1
            } else {
                params.p
            };
            for row in table {
                for (m, c) in row.iter().enumerate() {
                    pack_component(c, &mut out, m > 0, phi_len);
                }
            }
        }
        FamilyParams::Csm {
            shared,
            weights,
            phases,
        } => {
            for q in 0..shared.len() {
                out.push(shared[q].mu);
                out.push(shared[q].sigma2.ln());
                out.extend(weights[q].iter().map(|w| w.ln()));
                out.extend_from_slice(&phases[q][1..]);
            }
        }
        FamilyParams::Lmc { bases, factors } => {
            for (base, factor) in bases.iter().zip(factors) {
                match base {
                    LmcBase::Sm(c) => pack_component(c, &mut out, false, 0),
                    LmcBase::Classic(b) => {
                        out.push(b.scale.ln());
                        out.extend(b.lengthscale.iter().map(|v| v.ln()));
                    }
                }
                out.extend_from_slice(factor);
            }
        }
    }
    out.extend(noise.iter().map(|v| v.ln()));
    out
}

struct Cursor<'a, S> {
    theta: &'a [S],
    pos: usize,
}

impl<'a, S: Scalar> Cursor<'a, S> {
    fn next(&mut self) -> S {
        let v = self.theta[self.pos].clone();
        self.pos += 1;
        v
    }

    fn take(&mut self, k: usize) -> Vec<S> {
        (0..k).map(|_| self.next()).collect()
    }

    fn take_exp(&mut self, k: usize) -> Vec<S> {
        (0..k).map(|_| self.next().exp()).collect()
    }
}

fn unpack_component<S: Scalar>(
    cur: &mut Cursor<S>,
    p: usize,
    with_delays: bool,
    phi_len: usize,
) -> SpectralComponent<S> {
    let w = cur.next().exp();
    let mu = cur.take(p);
    let sigma2 = cur.take_exp(p);
    let (theta, phi) = if with_delays {
        let theta = cur.take(p);
        let mut phi = cur.take(phi_len);
        phi.resize(p, S::constant(0.0));
        (theta, phi)
    } else {
        (
            vec![S::constant(0.0); p],
            vec![S::constant(0.0); p],
        )
    };
    SpectralComponent {
        w,
        mu,
        sigma2,
        theta,
        phi,
    }
}

/// Rebuild kernel parameters and noise from optimizer coordinates. The
/// template supplies the family and shape; values come from `theta`.
pub fn unpack_model<S: Scalar>(
    template: &MogpKernelParams<f64>,
    theta: &[S],
) -> (MogpKernelParams<S>, Vec<S>) {
    let (q, m, p) = (template.q, template.m, template.p);
    let mut cur = Cursor { theta, pos: 0 };
    let payload = match &template.payload {
        FamilyParams::Sm(_) => {
            FamilyParams::Sm((0..q).map(|_| unpack_component(&mut cur, p, false, 0)).collect())
        }
        FamilyParams::Spectral(_) => {
            let phi_len = if template.family == KernelFamily::Mosm { 1 } else { p };
            FamilyParams::Spectral(
                (0..q)
                    .map(|_| {
                        (0..m)
                            .map(|ch| unpack_component(&mut cur, p, ch > 0, phi_len))
                            .collect()
                    })
                    .collect(),
            )
        }
        FamilyParams::Csm { .. } => {
            let mut shared = Vec::with_capacity(q);
            let mut weights = Vec::with_capacity(q);
            let mut phases = Vec::with_capacity(q);
            for _ in 0..q {
                shared.push(CsmShared {
                    mu: cur.next(),
                    sigma2: cur.next().exp(),
                });
                weights.push(cur.take_exp(m));
                let mut ph = vec![S::constant(0.0)];
                ph.extend(cur.take(m - 1));
                phases.push(ph);
            }
            FamilyParams::Csm {
                shared,
                weights,
                phases,
            }
        }
        FamilyParams::Lmc { bases, .. } => {
            let tri = m * (m + 1) / 2;
            let mut new_bases = Vec::with_capacity(q);
            let mut factors = Vec::with_capacity(q);
            for base in bases {
                new_bases.push(match base {
                    LmcBase::Sm(_) => LmcBase::Sm(unpack_component(&mut cur, p, false, 0)),
                    LmcBase::Classic(b) => LmcBase::Classic(BaseKernelParams {
                        kind: b.kind,
                        scale: cur.next().exp(),
                        lengthscale: cur.take_exp(p),
                    }),
                });
                factors.push(cur.take(tri));
            }
            FamilyParams::Lmc {
                bases: new_bases,
                factors,
            }
        }
    };
    let noise = cur.take_exp(m);
    debug_assert_eq!(cur.pos, theta.len());
    (
        MogpKernelParams {
            family: template.family,
            q,
            m,
            p,
            payload,
        },
        noise,
    )
}

// ---------------------------------------------------------------------------
// NLML and gradient

fn stacked_train(model: &MogpModel) -> Result<(Vec<(usize, Vec<f64>)>, Vec<f64>)> {
    let (inputs, y) = model.train.stacked();
    if inputs.is_empty() {
        return Err(Error::TooFewPoints { need: 1, got: 0 });
    }
    Ok((inputs, y))
}

fn noisy_gram(
    kernel: &MogpKernelParams<f64>,
    noise: &[f64],
    inputs: &[(usize, Vec<f64>)],
) -> Result<SymMatrix> {
    let mut k = gram_matrix(kernel, inputs)?;
    for (i, (ch, _)) in inputs.iter().enumerate() {
        let v = k.get(i, i) + noise[ch - 1];
        k.set(i, i, v);
    }
    Ok(k)
}

fn nlml_from_gram(k: &SymMatrix, y: &[f64]) -> Result<f64> {
    let factor = numerics::cholesky(k, f64::INFINITY)?;
    let alpha = numerics::solve_psd(&factor, y)?;
    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let n = y.len() as f64;
    Ok(0.5 * fit + 0.5 * numerics::log_det(&factor) + 0.5 * n * (2.0 * PI).ln())
}

/// Negative log marginal likelihood,
/// ½yᵀ(K+D)⁻¹y + ½log|K+D| + (N/2)log 2π.
pub fn nlml(model: &MogpModel) -> Result<f64> {
    let (inputs, y) = stacked_train(model)?;
    let k = noisy_gram(&model.kernel, &model.noise, &inputs)?;
    nlml_from_gram(&k, &y)
}

/// NLML at the given unconstrained coordinates for the model's template.
pub fn nlml_at(model: &MogpModel, theta: &[f64]) -> Result<f64> {
    let (kernel, noise) = unpack_model::<f64>(&model.kernel, theta);
    let (inputs, y) = stacked_train(model)?;
    let k = noisy_gram(&kernel, &noise, &inputs)?;
    nlml_from_gram(&k, &y)
}

fn triangle_index(n: usize, a: usize, b: usize) -> usize {
    // row-major upper triangle, a ≤ b
    a * n - a * (a + 1) / 2 + b
}

fn nlml_value_grad_at(
    template: &MogpKernelParams<f64>,
    inputs: &[(usize, Vec<f64>)],
    y: &[f64],
    theta: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = inputs.len();
    let dim = theta.len();
    let seeds: Vec<Dual> = theta
        .iter()
        .enumerate()
        .map(|(i, &v)| Dual::var(v, i, dim))
        .collect();
    let (kernel_d, noise_d) = unpack_model::<Dual>(template, &seeds);
    let mut upper = gram_upper_triangle(&kernel_d, inputs);
    for (i, (ch, _)) in inputs.iter().enumerate() {
        let idx = triangle_index(n, i, i);
        let entry = std::mem::replace(&mut upper[idx], Dual::constant(0.0));
        upper[idx] = entry + noise_d[ch - 1].clone();
    }

    let k = SymMatrix::from_fn(n, |a, b| upper[triangle_index(n, a, b)].v);
    let factor = numerics::cholesky(&k, f64::INFINITY)?;
    let alpha = numerics::solve_psd(&factor, y)?;
    let kinv = numerics::inverse_psd(&factor)?;
    let fit: f64 = y.iter().zip(&alpha).map(|(a, b)| a * b).sum();
    let value = 0.5 * fit + 0.5 * numerics::log_det(&factor) + 0.5 * n as f64 * (2.0 * PI).ln();

    // ∂NLML/∂θₖ = ½·tr((K̃⁻¹ − ααᵀ)·∂K̃/∂θₖ)
    let mut grad = vec![0.0; dim];
    for a in 0..n {
        for b in a..n {
            let weight = if a == b { 0.5 } else { 1.0 };
            let coeff = weight * (kinv.get(a, b) - alpha[a] * alpha[b]);
            let dk = &upper[triangle_index(n, a, b)].d;
            if dk.is_empty() {
                continue;
            }
            for (g, d) in grad.iter_mut().zip(dk) {
                *g += coeff * d;
            }
        }
    }
    Ok((value, grad))
}

/// Gradient of the NLML in the optimizer's unconstrained coordinates (log
/// for positives, raw for means and delays), flattened as in [`pack_model`].
pub fn nlml_grad(model: &MogpModel) -> Result<Vec<f64>> {
    let (inputs, y) = stacked_train(model)?;
    let theta = pack_model(&model.kernel, &model.noise);
    let (_, grad) = nlml_value_grad_at(&model.kernel, &inputs, &y, &theta)?;
    Ok(grad)
}

// ---------------------------------------------------------------------------
// Fit

struct RestartOutcome {
    theta: Vec<f64>,
    best_nlml: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
}

fn run_restart(
    template: &MogpKernelParams<f64>,
    inputs: &[(usize, Vec<f64>)],
    y: &[f64],
    theta0: Vec<f64>,
    cfg: &OptimizerConfig,
) -> Option<RestartOutcome> {
    let initial = match nlml_value_grad_at(template, inputs, y, &theta0) {
        Ok((v, _)) if v.is_finite() => v,
        _ => return None,
    };
    let dim = theta0.len();
    let mut theta = theta0.clone();
    let mut best_theta = theta0;
    let mut best = initial;
    let mut trace = vec![initial];
    let mut m1 = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    let adam = cfg.algorithm == "adam";
    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let stall_window = 50;
    let mut stall = 0;
    let mut iterations = 0;
    let mut converged = false;
    for iter in 1..=cfg.max_iters {
        let (value, grad) = match nlml_value_grad_at(template, inputs, y, &theta) {
            Ok(r) => r,
            Err(_) => break,
        };
        if value.is_finite() && value < best {
            if value < best - cfg.tolerance {
                stall = 0;
            } else {
                stall += 1;
            }
            best = value;
            best_theta.copy_from_slice(&theta);
        } else {
            stall += 1;
        }
        trace.push(best);
        iterations = iter;
        if stall >= stall_window {
            converged = true;
            break;
        }
        // geometric step decay: ends two orders of magnitude below the
        // starting step so late iterations polish rather than oscillate
        let step = cfg.step_size * 0.01f64.powf(iter as f64 / cfg.max_iters as f64);
        if adam {
            let t = iter as f64;
            for i in 0..dim {
                m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad[i];
                m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad[i] * grad[i];
                let mhat = m1[i] / (1.0 - beta1.powf(t));
                let vhat = m2[i] / (1.0 - beta2.powf(t));
                theta[i] -= step * mhat / (vhat.sqrt() + eps);
            }
        } else {
            for i in 0..dim {
                theta[i] -= step * grad[i];
            }
        }
    }
    Some(RestartOutcome {
        theta: best_theta,
        best_nlml: best,
        trace,
        iterations,
        converged,
    })
}

/// Optimize hyperparameters by first-order descent in unconstrained
/// coordinates, best-of-restarts by final NLML.
pub fn fit(model: &MogpModel, cfg: &OptimizerConfig) -> Result<FitReport> {
    cfg.validate()?;
    let (inputs, y) = stacked_train(model)?;
    let theta0 = pack_model(&model.kernel, &model.noise);
    let mut best: Option<RestartOutcome> = None;
    let mut restarts_used = 0;
    for r in 0..cfg.restarts {
        let start = if r == 0 {
            theta0.clone()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(r as u64));
            theta0
                .iter()
                .map(|v| v + 0.3 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        if let Some(outcome) = run_restart(&model.kernel, &inputs, &y, start, cfg) {
            restarts_used += 1;
            // deterministic argmin with earlier-restart tie-breaking
            let better = best
                .as_ref()
                .map(|b| outcome.best_nlml < b.best_nlml)
                .unwrap_or(true);
            if better {
                best = Some(outcome);
            }
        }
    }
    let best = best.ok_or(Error::AllRestartsFailed)?;
    let (kernel, noise) = unpack_model::<f64>(&model.kernel, &best.theta);
    Ok(FitReport {
        nlml_trace: best.trace,
        final_params: KernelDocument::new(&kernel, &noise),
        final_noise: noise,
        iterations: best.iterations,
        converged: best.converged,
        restarts_used,
    })
}

// ---------------------------------------------------------------------------
// Prediction

/// Posterior mean and variance at the query points (Eq.-2/3-style exact
/// inference via Cholesky).
pub fn predict(
    model: &MogpModel,
    x_star: &[(usize, Vec<f64>)],
    include_noise: bool,
) -> Result<GpPosterior> {
    for (ch, x) in x_star {
        model.kernel.check_channel(*ch)?;
        if x.len() != model.kernel.p {
            return Err(Error::DimensionMismatch {
                expected: model.kernel.p,
                got: x.len(),
            });
        }
    }
    let (inputs, y) = stacked_train(model)?;
    let k = noisy_gram(&model.kernel, &model.noise, &inputs)?;
    let factor = numerics::cholesky(&k, f64::INFINITY)?;
    let alpha = numerics::solve_psd(&factor, &y)?;

    let n = inputs.len();
    let mut mean = Vec::with_capacity(x_star.len());
    let mut variance = Vec::with_capacity(x_star.len());
    let mut clamped = 0;
    let mut kstar = vec![0.0; n];
    let mut tau = vec![0.0; model.kernel.p];
    for (ch, x) in x_star {
        for (i, (ci, xi)) in inputs.iter().enumerate() {
            for d in 0..model.kernel.p {
                tau[d] = x[d] - xi[d];
            }
            kstar[i] =
                crate::kernels::cross_kernel_eval_generic(&model.kernel, ch - 1, ci - 1, &tau);
        }
        mean.push(kstar.iter().zip(&alpha).map(|(a, b)| a * b).sum());
        let v = numerics::solve_lower(&factor, &kstar)?;
        let zero = vec![0.0; model.kernel.p];
        let prior =
            crate::kernels::cross_kernel_eval_generic(&model.kernel, ch - 1, ch - 1, &zero);
        let mut var = prior - v.iter().map(|z| z * z).sum::<f64>();
        if include_noise {
            var += model.noise[ch - 1];
        }
        if var < 0.0 {
            clamped += 1;
            var = 0.0;
        }
        variance.push(var);
    }
    Ok(GpPosterior {
        mean,
        variance,
        clamped,
    })
}
