//! Kernel families for multi-output GPs: the convolution spectral mixture
//! kernel (MOCSM), the spectral mixture baselines (SM, MOSM, CSM, SM-LMC),
//! and the classic LMC kernels over SE / Matérn-3/2 bases.

mod eval;

pub use eval::{
    base_kernel_eval, cross_kernel_eval, cross_kernel_eval_generic, cross_params, csm_eval,
    gram_matrix, gram_upper_triangle, mocsm_eval, mosm_eval, sm_eval, smlmc_eval,
};

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One Gaussian spectral component of one channel.
///
/// `w` is the signal-variance contribution, `mu` the frequency mean in
/// cycles per input unit, `sigma2` the frequency variance, `theta` a time
/// delay in input units, and `phi` a dimensionless phase delay (the phase
/// enters the kernel as π·φ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Serialize",
    deserialize = "S: serde::de::DeserializeOwned"
))]
pub struct SpectralComponent<S = f64> {
    pub w: S,
    pub mu: Vec<S>,
    pub sigma2: Vec<S>,
    pub theta: Vec<S>,
    pub phi: Vec<S>,
}

impl SpectralComponent<f64> {
    pub fn new(w: f64, mu: Vec<f64>, sigma2: Vec<f64>, theta: Vec<f64>, phi: Vec<f64>) -> Self {
        SpectralComponent {
            w,
            mu,
            sigma2,
            theta,
            phi,
        }
    }

    /// Component with zero delays.
    pub fn undelayed(w: f64, mu: Vec<f64>, sigma2: Vec<f64>) -> Self {
        let p = mu.len();
        SpectralComponent {
            w,
            mu,
            sigma2,
            theta: vec![0.0; p],
            phi: vec![0.0; p],
        }
    }
}

impl<S: Scalar> SpectralComponent<S> {
    pub fn p(&self) -> usize {
        self.mu.len()
    }
}

/// Cross parameters between two spectral components (the convolution
/// algebra behind the MOCSM/MOSM cross terms).
#[derive(Clone, Debug)]
pub struct CrossSpectralParams<S = f64> {
    pub w_ij: S,
    pub a_ij: S,
    pub mu_ij: Vec<S>,
    pub sigma2_ij: Vec<S>,
    pub theta_ij: Vec<S>,
    pub phi_ij: Vec<S>,
}

/// Base kernel for the LMC families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Serialize",
    deserialize = "S: serde::de::DeserializeOwned"
))]
pub struct BaseKernelParams<S = f64> {
    pub kind: BaseKind,
    pub scale: S,
    pub lengthscale: Vec<S>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseKind {
    #[serde(rename = "SE")]
    SquaredExponential,
    #[serde(rename = "MATERN32")]
    Matern32,
}

/// Shared spectral Gaussian of one CSM component (one-dimensional inputs).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Serialize",
    deserialize = "S: serde::de::DeserializeOwned"
))]
pub struct CsmShared<S = f64> {
    pub mu: S,
    pub sigma2: S,
}

/// Base of one LMC component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Serialize",
    deserialize = "S: serde::de::DeserializeOwned"
))]
pub enum LmcBase<S = f64> {
    /// SM-LMC: one spectral Gaussian (delays unused).
    #[serde(rename = "sm")]
    Sm(SpectralComponent<S>),
    /// SE-LMC / Matérn-LMC base.
    #[serde(rename = "base")]
    Classic(BaseKernelParams<S>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    #[serde(rename = "SM")]
    Sm,
    #[serde(rename = "MOCSM")]
    Mocsm,
    #[serde(rename = "MOSM")]
    Mosm,
    #[serde(rename = "CSM")]
    Csm,
    #[serde(rename = "SM_LMC")]
    SmLmc,
    #[serde(rename = "SE_LMC")]
    SeLmc,
    #[serde(rename = "MATERN_LMC")]
    MaternLmc,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 7] = [
        KernelFamily::Sm,
        KernelFamily::Mocsm,
        KernelFamily::Mosm,
        KernelFamily::Csm,
        KernelFamily::SmLmc,
        KernelFamily::SeLmc,
        KernelFamily::MaternLmc,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Sm => "SM",
            KernelFamily::Mocsm => "MOCSM",
            KernelFamily::Mosm => "MOSM",
            KernelFamily::Csm => "CSM",
            KernelFamily::SmLmc => "SM_LMC",
            KernelFamily::SeLmc => "SE_LMC",
            KernelFamily::MaternLmc => "MATERN_LMC",
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let up = s.to_ascii_uppercase().replace('-', "_");
        KernelFamily::ALL
            .iter()
            .copied()
            .find(|f| f.name() == up)
            .ok_or_else(|| Error::InvalidParams(format!("unknown kernel family '{s}'")))
    }
}

/// Family-specific parameter payload.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "S: Serialize",
    deserialize = "S: serde::de::DeserializeOwned"
))]
#[serde(untagged)]
pub enum FamilyParams<S = f64> {
    /// Single-output SM: Q components.
    Sm(Vec<SpectralComponent<S>>),
    /// MOCSM / MOSM: Q×M table of components (outer index q, inner m).
    Spectral(Vec<Vec<SpectralComponent<S>>>),
    /// CSM: Q shared spectral Gaussians plus per-channel weights and phases
    /// (`weights[q][m]`, `phases[q][m]`; channel-1 phases pinned at 0).
    Csm {
        shared: Vec<CsmShared<S>>,
        weights: Vec<Vec<S>>,
        phases: Vec<Vec<S>>,
    },
    /// LMC families: Q bases with M×M mixing matrices B_q = A_q·A_qᵀ,
    /// A_q stored as a lower-triangular factor (row-major, M(M+1)/2 entries).
    Lmc {
        bases: Vec<LmcBase<S>>,
        factors: Vec<Vec<S>>,
    },
}

/// Full parameter set of one kernel family over Q components × M channels.
#[derive(Clone, Debug, PartialEq)]
pub struct MogpKernelParams<S = f64> {
    pub family: KernelFamily,
    pub q: usize,
    pub m: usize,
    pub p: usize,
    pub payload: FamilyParams<S>,
}

/// Lower-triangular index into an M(M+1)/2 factor buffer, row i ≥ col j.
pub(crate) fn tri_index(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

/// Entry (i, j) of B = A·Aᵀ for a lower-triangular factor.
pub(crate) fn mixing_entry<S: Scalar>(factor: &[S], i: usize, j: usize) -> S {
    let upto = i.min(j);
    let mut acc = S::constant(0.0);
    for k in 0..=upto {
        acc = acc + factor[tri_index(i, k)].clone() * factor[tri_index(j, k)].clone();
    }
    acc
}

impl MogpKernelParams<f64> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if self.q < 1 || self.m < 1 || self.p < 1 {
            return bad("Q, M, P must all be at least 1".into());
        }
        match (&self.payload, self.family) {
            (FamilyParams::Sm(comps), KernelFamily::Sm) => {
                if self.m != 1 {
                    return bad("SM family is single-channel (M must be 1)".into());
                }
                if comps.len() != self.q {
                    return bad(format!("expected {} components, got {}", self.q, comps.len()));
                }
                for c in comps {
                    validate_component(c, self.p, false)?;
                }
            }
            (FamilyParams::Spectral(table), KernelFamily::Mocsm | KernelFamily::Mosm) => {
                if table.len() != self.q || table.iter().any(|row| row.len() != self.m) {
                    return bad("component table must be Q×M".into());
                }
                for row in table {
                    for (m, c) in row.iter().enumerate() {
                        validate_component(c, self.p, false)?;
                        // identifiability: reference-channel delays pinned at zero
                        if m == 0
                            && (c.theta.iter().any(|v| *v != 0.0)
                                || c.phi.iter().any(|v| *v != 0.0))
                        {
                            return bad("channel-1 time and phase delays must be zero".into());
                        }
                    }
                }
            }
            (
                FamilyParams::Csm {
                    shared,
                    weights,
                    phases,
                },
                KernelFamily::Csm,
            ) => {
                if self.p != 1 {
                    return Err(Error::UnsupportedDimension { p: self.p });
                }
                if shared.len() != self.q || weights.len() != self.q || phases.len() != self.q {
                    return bad("CSM payload must have Q shared Gaussians, weights, phases".into());
                }
                for q in 0..self.q {
                    if !(shared[q].sigma2 > 0.0) || !shared[q].mu.is_finite() {
                        return bad("CSM shared variances must be positive and finite".into());
                    }
                    if weights[q].len() != self.m || phases[q].len() != self.m {
                        return bad("CSM weights and phases must have M entries".into());
                    }
                    if weights[q].iter().any(|w| !(*w >= 0.0)) {
                        return bad("CSM weights must be nonnegative".into());
                    }
                    if phases[q][0] != 0.0 {
                        return bad("CSM channel-1 phase must be zero".into());
                    }
                }
            }
            (FamilyParams::Lmc { bases, factors }, family) => {
                let expect_sm = matches!(family, KernelFamily::SmLmc);
                if !matches!(
                    family,
                    KernelFamily::SmLmc | KernelFamily::SeLmc | KernelFamily::MaternLmc
                ) {
                    return bad("LMC payload under a non-LMC family".into());
                }
                if bases.len() != self.q || factors.len() != self.q {
                    return bad("LMC payload must have Q bases and Q factors".into());
                }
                let tri = self.m * (self.m + 1) / 2;
                for (base, factor) in bases.iter().zip(factors) {
                    if factor.len() != tri {
                        return bad("LMC factor must be lower-triangular with M(M+1)/2 entries".into());
                    }
                    match base {
                        LmcBase::Sm(c) if expect_sm => validate_component(c, self.p, true)?,
                        LmcBase::Classic(b) if !expect_sm => {
                            if !(b.scale > 0.0)
                                || b.lengthscale.len() != self.p
                                || b.lengthscale.iter().any(|v| !(*v > 0.0))
                            {
                                return bad("base kernel needs positive scale and lengthscales".into());
                            }
                            let want = matches!(family, KernelFamily::SeLmc);
                            let got = matches!(b.kind, BaseKind::SquaredExponential);
                            if want != got {
                                return bad("base kernel kind does not match family".into());
                            }
                        }
                        _ => return bad("LMC base type does not match family".into()),
                    }
                }
            }
            _ => return bad(format!("payload does not match family {}", self.family)),
        }
        Ok(())
    }

    pub(crate) fn check_channel(&self, ch: usize) -> Result<usize> {
        if ch >= 1 && ch <= self.m {
            Ok(ch - 1)
        } else {
            Err(Error::ChannelOutOfRange {
                channel: ch,
                channels: self.m,
            })
        }
    }
}

fn validate_component(c: &SpectralComponent<f64>, p: usize, allow_empty_delays: bool) -> Result<()> {
    let dims_ok = c.mu.len() == p
        && c.sigma2.len() == p
        && ((c.theta.len() == p && c.phi.len() == p)
            || (allow_empty_delays && c.theta.is_empty() && c.phi.is_empty()));
    if !dims_ok {
        return Err(Error::InvalidParams(format!(
            "component vectors must have length P={p}"
        )));
    }
    let finite = c.w.is_finite()
        && c.mu.iter().all(|v| v.is_finite())
        && c.theta.iter().all(|v| v.is_finite())
        && c.phi.iter().all(|v| v.is_finite());
    if !finite || !(c.w >= 0.0) || c.sigma2.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParams(
            "component needs w ≥ 0, sigma2 > 0, finite entries".into(),
        ));
    }
    Ok(())
}

/// Degrees of freedom per family (full-rank R = M mixing for the LMC rows).
pub fn param_count(family: KernelFamily, q: usize, m: usize, p: usize) -> usize {
    match family {
        KernelFamily::Sm => q * (2 * p + 1),
        KernelFamily::Mocsm => q * m * (4 * p + 1),
        KernelFamily::Mosm => q * m * (3 * p + 2),
        KernelFamily::Csm => 2 * q + m * (2 * q - 1),
        KernelFamily::SmLmc => q * ((m * m + m) / 2 + 2 * p + 1),
        KernelFamily::SeLmc | KernelFamily::MaternLmc => (m * m + m) / 2 + p + 1,
    }
}

/// Random parameter draw for a family, for tests, demos, and optimizer
/// restarts. Respects the identifiability pinning (channel-1 delays zero,
/// CSM channel-1 phases zero).
pub fn random_params(
    family: KernelFamily,
    q: usize,
    m: usize,
    p: usize,
    rng: &mut impl rand::Rng,
) -> MogpKernelParams<f64> {
    let vecp = |rng: &mut dyn FnMut() -> f64| -> Vec<f64> { (0..p).map(|_| rng()).collect() };
    let payload = match family {
        KernelFamily::Sm => FamilyParams::Sm(
            (0..q)
                .map(|_| {
                    SpectralComponent::undelayed(
                        rng.gen_range(0.2..2.0),
                        vecp(&mut || rng.gen_range(0.05..1.0)),
                        vecp(&mut || rng.gen_range(0.005..0.5)),
                    )
                })
                .collect(),
        ),
        KernelFamily::Mocsm | KernelFamily::Mosm => FamilyParams::Spectral(
            (0..q)
                .map(|_| {
                    (0..m)
                        .map(|ch| {
                            let mut c = SpectralComponent::new(
                                rng.gen_range(0.2..2.0),
                                vecp(&mut || rng.gen_range(0.05..1.0)),
                                vecp(&mut || rng.gen_range(0.005..0.5)),
                                vecp(&mut || rng.gen_range(-1.0..1.0)),
                                vecp(&mut || rng.gen_range(-0.5..0.5)),
                            );
                            if ch == 0 {
                                c.theta = vec![0.0; p];
                                c.phi = vec![0.0; p];
                            } else if family == KernelFamily::Mosm {
                                // MOSM's phase delay is scalar
                                for k in 1..p {
                                    c.phi[k] = 0.0;
                                }
                            }
                            c
                        })
                        .collect()
                })
                .collect(),
        ),
        KernelFamily::Csm => FamilyParams::Csm {
            shared: (0..q)
                .map(|_| CsmShared {
                    mu: rng.gen_range(0.05..1.0),
                    sigma2: rng.gen_range(0.005..0.5),
                })
                .collect(),
            weights: (0..q)
                .map(|_| (0..m).map(|_| rng.gen_range(0.2..2.0)).collect())
                .collect(),
            phases: (0..q)
                .map(|_| {
                    (0..m)
                        .map(|ch| if ch == 0 { 0.0 } else { rng.gen_range(-0.5..0.5) })
                        .collect()
                })
                .collect(),
        },
        KernelFamily::SmLmc | KernelFamily::SeLmc | KernelFamily::MaternLmc => {
            let tri = m * (m + 1) / 2;
            FamilyParams::Lmc {
                bases: (0..q)
                    .map(|_| match family {
                        KernelFamily::SmLmc => LmcBase::Sm(SpectralComponent::undelayed(
                            rng.gen_range(0.2..2.0),
                            vecp(&mut || rng.gen_range(0.05..1.0)),
                            vecp(&mut || rng.gen_range(0.005..0.5)),
                        )),
                        _ => LmcBase::Classic(BaseKernelParams {
                            kind: if family == KernelFamily::SeLmc {
                                BaseKind::SquaredExponential
                            } else {
                                BaseKind::Matern32
                            },
                            scale: rng.gen_range(0.3..2.0),
                            lengthscale: vecp(&mut || rng.gen_range(0.3..3.0)),
                        }),
                    })
                    .collect(),
                factors: (0..q)
                    .map(|_| (0..tri).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect(),
            }
        }
    };
    let params = MogpKernelParams {
        family,
        q,
        m,
        p,
        payload,
    };
    params.validate().expect("random draw is valid by construction");
    params
}

/// On-disk kernel parameter document (JSON).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelDocument {
    pub family: KernelFamily,
    #[serde(rename = "Q")]
    pub q: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub components: FamilyParams<f64>,
    pub noise: Vec<f64>,
}

impl KernelDocument {
    pub fn new(params: &MogpKernelParams<f64>, noise: &[f64]) -> Self {
        KernelDocument {
            family: params.family,
            q: params.q,
            m: params.m,
            p: params.p,
            components: params.payload.clone(),
            noise: noise.to_vec(),
        }
    }

    pub fn into_params(self) -> Result<(MogpKernelParams<f64>, Vec<f64>)> {
        let params = MogpKernelParams {
            family: self.family,
            q: self.q,
            m: self.m,
            p: self.p,
            payload: self.components,
        };
        params.validate()?;
        if self.noise.len() != params.m {
            return Err(Error::InvalidParams(format!(
                "noise vector must have M={} entries",
                params.m
            )));
        }
        if self.noise.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParams("noise variances must be positive".into()));
        }
        Ok((params, self.noise))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
