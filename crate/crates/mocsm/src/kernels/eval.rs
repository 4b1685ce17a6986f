//! Kernel evaluations, generic over the scalar type so the same code path
//! serves plain evaluation and forward-mode NLML gradients.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::SymMatrix;
use crate::scalar::Scalar;

use super::{
    mixing_entry, BaseKernelParams, BaseKind, CrossSpectralParams, CsmShared, FamilyParams,
    KernelFamily, LmcBase, MogpKernelParams, SpectralComponent,
};

/// Cross weight, amplitude, mean, covariance, and delays of the convolution
/// of two spectral components (diagonal covariances, handled per dimension).
pub fn cross_params_generic<S: Scalar>(
    ci: &SpectralComponent<S>,
    cj: &SpectralComponent<S>,
) -> CrossSpectralParams<S> {
    let p = ci.mu.len();
    debug_assert_eq!(p, cj.mu.len());
    let w_ij = (ci.w.clone() * cj.w.clone()).sqrt();
    let mut a_ij = S::constant(1.0);
    let mut mu_ij = Vec::with_capacity(p);
    let mut sigma2_ij = Vec::with_capacity(p);
    let mut theta_ij = Vec::with_capacity(p);
    let mut phi_ij = Vec::with_capacity(p);
    for k in 0..p {
        let si = ci.sigma2[k].clone();
        let sj = cj.sigma2[k].clone();
        let sum = si.clone() + sj.clone();
        let prod = si.clone() * sj.clone();
        // |√(4ΣᵢΣⱼ)/(Σᵢ+Σⱼ)|^{1/2}
        let pref = (prod.clone().scale(4.0).sqrt() / sum.clone()).abs().sqrt();
        let dmu = ci.mu[k].clone() - cj.mu[k].clone();
        let gauss = (-(dmu.clone() * dmu / sum.clone()).scale(0.25)).exp();
        a_ij = a_ij * pref * gauss;
        mu_ij.push((si.clone() * cj.mu[k].clone() + sj.clone() * ci.mu[k].clone()) / sum.clone());
        sigma2_ij.push(prod.scale(2.0) / sum);
        theta_ij.push(ci.theta[k].clone() - cj.theta[k].clone());
        phi_ij.push(ci.phi[k].clone() - cj.phi[k].clone());
    }
    CrossSpectralParams {
        w_ij,
        a_ij,
        mu_ij,
        sigma2_ij,
        theta_ij,
        phi_ij,
    }
}

/// Checked f64 entry point for the cross-parameter algebra.
pub fn cross_params(
    ci: &SpectralComponent<f64>,
    cj: &SpectralComponent<f64>,
) -> Result<CrossSpectralParams<f64>> {
    if ci.p() != cj.p() {
        return Err(Error::DimensionMismatch {
            expected: ci.p(),
            got: cj.p(),
        });
    }
    Ok(cross_params_generic(ci, cj))
}

/// Shared exp·cos factor of the MOCSM/MOSM cross term:
/// exp(−½π²(2τ−θ)ᵀΣ(2τ−θ))·cos(π((2τ−θ)ᵀμ − Σₚφₚ)).
fn exp_cos_factor<S: Scalar>(cp: &CrossSpectralParams<S>, tau: &[f64]) -> S {
    let mut quad = S::constant(0.0);
    let mut freq = S::constant(0.0);
    let mut phase = S::constant(0.0);
    for k in 0..tau.len() {
        let u = S::constant(2.0 * tau[k]) - cp.theta_ij[k].clone();
        quad = quad + u.clone() * u.clone() * cp.sigma2_ij[k].clone();
        freq = freq + u * cp.mu_ij[k].clone();
        phase = phase + cp.phi_ij[k].clone();
    }
    let envelope = (-quad.scale(0.5 * PI * PI)).exp();
    let carrier = ((freq - phase).scale(PI)).cos();
    envelope * carrier
}

fn mocsm_term<S: Scalar>(
    ci: &SpectralComponent<S>,
    cj: &SpectralComponent<S>,
    tau: &[f64],
) -> S {
    let cp = cross_params_generic(ci, cj);
    let c = cp.w_ij.clone() * cp.a_ij.clone();
    c * exp_cos_factor(&cp, tau)
}

fn mosm_term<S: Scalar>(ci: &SpectralComponent<S>, cj: &SpectralComponent<S>, tau: &[f64]) -> S {
    let p = ci.mu.len();
    let cp = cross_params_generic(ci, cj);
    // √(2π)^P · w_ij² · ∏ₚ(σᵢ²σⱼ²)^{1/4} · a_ij; w_ij² = wᵢwⱼ
    let mut pref = (ci.w.clone() * cj.w.clone()).scale((2.0 * PI).powi(p as i32).sqrt());
    for k in 0..p {
        pref = pref * (ci.sigma2[k].clone() * cj.sigma2[k].clone()).powf_const(0.25);
    }
    pref * cp.a_ij.clone() * exp_cos_factor(&cp, tau)
}

/// Single-output spectral mixture kernel:
/// Σᵢ wᵢ cos(2πτᵀμᵢ)·∏ₚ exp(−2π²τₚ²Σᵢ⁽ᵖ⁾).
pub fn sm_eval<S: Scalar>(components: &[SpectralComponent<S>], tau: &[f64]) -> S {
    let mut acc = S::constant(0.0);
    for c in components {
        let mut freq = S::constant(0.0);
        let mut quad = S::constant(0.0);
        for k in 0..tau.len() {
            freq = freq + c.mu[k].clone().scale(2.0 * PI * tau[k]);
            quad = quad + c.sigma2[k].clone().scale(2.0 * PI * PI * tau[k] * tau[k]);
        }
        acc = acc + c.w.clone() * freq.cos() * (-quad).exp();
    }
    acc
}

fn csm_term<S: Scalar>(
    shared: &CsmShared<S>,
    wi: &S,
    wj: &S,
    phi_i: &S,
    phi_j: &S,
    tau: f64,
) -> S {
    let envelope = (-shared.sigma2.clone().scale(2.0 * PI * PI * tau * tau)).exp();
    let angle = shared.mu.clone().scale(2.0 * PI * tau)
        + (phi_i.clone() - phi_j.clone()).scale(PI);
    wi.clone() * wj.clone() * envelope * angle.cos()
}

/// Generic family dispatch on zero-based channel indices. Channels must be
/// pre-validated; CSM requires P = 1.
pub fn cross_kernel_eval_generic<S: Scalar>(
    params: &MogpKernelParams<S>,
    i0: usize,
    j0: usize,
    tau: &[f64],
) -> S {
    match &params.payload {
        FamilyParams::Sm(comps) => sm_eval(comps, tau),
        FamilyParams::Spectral(table) => {
            let mut acc = S::constant(0.0);
            for row in table {
                let term = match params.family {
                    KernelFamily::Mosm => mosm_term(&row[i0], &row[j0], tau),
                    _ => mocsm_term(&row[i0], &row[j0], tau),
                };
                acc = acc + term;
            }
            acc
        }
        FamilyParams::Csm {
            shared,
            weights,
            phases,
        } => {
            let mut acc = S::constant(0.0);
            for q in 0..shared.len() {
                acc = acc
                    + csm_term(
                        &shared[q],
                        &weights[q][i0],
                        &weights[q][j0],
                        &phases[q][i0],
                        &phases[q][j0],
                        tau[0],
                    );
            }
            acc
        }
        FamilyParams::Lmc { bases, factors } => {
            let mut acc = S::constant(0.0);
            for (base, factor) in bases.iter().zip(factors) {
                let b_ij = mixing_entry(factor, i0, j0);
                let k = match base {
                    LmcBase::Sm(c) => sm_eval(std::slice::from_ref(c), tau),
                    LmcBase::Classic(b) => base_kernel_eval_generic(b, tau),
                };
                acc = acc + b_ij * k;
            }
            acc
        }
    }
}

fn checked_eval(
    params: &MogpKernelParams<f64>,
    i: usize,
    j: usize,
    tau: &[f64],
) -> Result<f64> {
    let i0 = params.check_channel(i)?;
    let j0 = params.check_channel(j)?;
    if tau.len() != params.p {
        return Err(Error::DimensionMismatch {
            expected: params.p,
            got: tau.len(),
        });
    }
    if params.family == KernelFamily::Csm && params.p != 1 {
        return Err(Error::UnsupportedDimension { p: params.p });
    }
    Ok(cross_kernel_eval_generic(params, i0, j0, tau))
}

/// Cross-covariance of the parameterized family between channels `i` and
/// `j` (one-based) at lag `tau`.
pub fn cross_kernel_eval(
    params: &MogpKernelParams<f64>,
    i: usize,
    j: usize,
    tau: &[f64],
) -> Result<f64> {
    checked_eval(params, i, j, tau)
}

/// MOCSM cross-covariance (one-based channels).
pub fn mocsm_eval(params: &MogpKernelParams<f64>, i: usize, j: usize, tau: &[f64]) -> Result<f64> {
    debug_assert_eq!(params.family, KernelFamily::Mocsm);
    checked_eval(params, i, j, tau)
}

/// MOSM cross-covariance (one-based channels).
pub fn mosm_eval(params: &MogpKernelParams<f64>, i: usize, j: usize, tau: &[f64]) -> Result<f64> {
    debug_assert_eq!(params.family, KernelFamily::Mosm);
    checked_eval(params, i, j, tau)
}

/// CSM cross-covariance (one-based channels, one-dimensional inputs).
pub fn csm_eval(params: &MogpKernelParams<f64>, i: usize, j: usize, tau: &[f64]) -> Result<f64> {
    debug_assert_eq!(params.family, KernelFamily::Csm);
    checked_eval(params, i, j, tau)
}

/// SM-LMC cross-covariance (one-based channels).
pub fn smlmc_eval(params: &MogpKernelParams<f64>, i: usize, j: usize, tau: &[f64]) -> Result<f64> {
    debug_assert_eq!(params.family, KernelFamily::SmLmc);
    checked_eval(params, i, j, tau)
}

/// SE or Matérn-3/2 base kernel.
pub fn base_kernel_eval(p: &BaseKernelParams<f64>, tau: &[f64]) -> f64 {
    base_kernel_eval_generic(p, tau)
}

pub(crate) fn base_kernel_eval_generic<S: Scalar>(p: &BaseKernelParams<S>, tau: &[f64]) -> S {
    match p.kind {
        BaseKind::SquaredExponential => {
            let mut quad = S::constant(0.0);
            for k in 0..tau.len() {
                let inv = S::constant(1.0) / (p.lengthscale[k].clone() * p.lengthscale[k].clone());
                quad = quad + inv.scale(tau[k] * tau[k]);
            }
            p.scale.clone() * (-quad.scale(0.5)).exp()
        }
        BaseKind::Matern32 => {
            let mut quad = S::constant(0.0);
            for k in 0..tau.len() {
                let r = S::constant(tau[k]) / p.lengthscale[k].clone();
                quad = quad + r.clone() * r;
            }
            let r = quad.sqrt().scale(3f64.sqrt());
            p.scale.clone() * (S::constant(1.0) + r.clone()) * (-r).exp()
        }
    }
}

/// Gram matrix over stacked (channel, input) pairs; each entry is computed
/// once per unordered pair and mirrored.
pub fn gram_matrix(
    params: &MogpKernelParams<f64>,
    inputs: &[(usize, Vec<f64>)],
) -> Result<SymMatrix> {
    for (ch, x) in inputs {
        params.check_channel(*ch)?;
        if x.len() != params.p {
            return Err(Error::DimensionMismatch {
                expected: params.p,
                got: x.len(),
            });
        }
    }
    if params.family == KernelFamily::Csm && params.p != 1 {
        return Err(Error::UnsupportedDimension { p: params.p });
    }
    let n = inputs.len();
    let mut tau = vec![0.0; params.p];
    Ok(SymMatrix::from_fn(n, |a, b| {
        let (ca, xa) = &inputs[a];
        let (cb, xb) = &inputs[b];
        for k in 0..params.p {
            tau[k] = xa[k] - xb[k];
        }
        cross_kernel_eval_generic(params, ca - 1, cb - 1, &tau)
    }))
}

/// Upper triangle of the Gram matrix (row-major over pairs a ≤ b), generic
/// over the scalar type. Channels must already be valid one-based ids.
pub fn gram_upper_triangle<S: Scalar>(
    params: &MogpKernelParams<S>,
    inputs: &[(usize, Vec<f64>)],
) -> Vec<S> {
    let n = inputs.len();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    let mut tau = vec![0.0; params.p];
    for a in 0..n {
        for b in a..n {
            let (ca, xa) = &inputs[a];
            let (cb, xb) = &inputs[b];
            for k in 0..params.p {
                tau[k] = xa[k] - xb[k];
            }
            out.push(cross_kernel_eval_generic(params, ca - 1, cb - 1, &tau));
        }
    }
    out
}
