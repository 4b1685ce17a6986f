//! Hyperparameter initialization from the empirical spectral density:
//! periodogram per channel, weighted Gaussian-mixture EM over the spectral
//! samples, and the mapping from mixture components onto each kernel family.
//!
//! Spectral initialization is one-dimensional (P = 1); higher-dimensional
//! inputs report `UnsupportedDimension`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{ChannelSeries, MultiChannelDataset};
use crate::error::{Error, Result};
use crate::kernels::{
    tri_index, BaseKernelParams, BaseKind, CsmShared, FamilyParams, KernelFamily, LmcBase,
    MogpKernelParams, SpectralComponent,
};
use crate::numerics::{periodogram, SpectralSampleSet};

/// Weighted Gaussian mixture fitted to spectral samples (one-dimensional).
#[derive(Clone, Debug)]
pub struct GmmResult {
    /// Mixture weights, simplex-normalized.
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Weighted log-likelihood per EM iteration (non-decreasing).
    pub log_likelihood: Vec<f64>,
    pub iterations: usize,
}

/// Periodogram of one channel. Non-uniform grids are linearly resampled onto
/// a uniform grid of the same length first.
pub fn empirical_spectral_density(channel: &ChannelSeries) -> Result<SpectralSampleSet> {
    let n = channel.y.len();
    if n < 8 {
        return Err(Error::TooFewPoints { need: 8, got: n });
    }
    if channel.x.iter().any(|x| x.len() != 1) {
        return Err(Error::UnsupportedDimension {
            p: channel.x.first().map(|x| x.len()).unwrap_or(0),
        });
    }
    let xs: Vec<f64> = channel.x.iter().map(|x| x[0]).collect();
    match periodogram(&xs, &channel.y) {
        Err(Error::NonUniformGrid { .. }) => {
            let (xu, yu) = resample_uniform(&xs, &channel.y)?;
            periodogram(&xu, &yu)
        }
        other => other,
    }
}

fn resample_uniform(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let span = xs[n - 1] - xs[0];
    if !(span > 0.0) {
        return Err(Error::DegenerateInput(
            "all input locations coincide".into(),
        ));
    }
    let dx = span / (n - 1) as f64;
    let mut xu = Vec::with_capacity(n);
    let mut yu = Vec::with_capacity(n);
    let mut seg = 0;
    for k in 0..n {
        let t = xs[0] + k as f64 * dx;
        while seg + 2 < n && xs[seg + 1] <= t {
            seg += 1;
        }
        let (x0, x1) = (xs[seg], xs[seg + 1]);
        let frac = if x1 > x0 { ((t - x0) / (x1 - x0)).clamp(0.0, 1.0) } else { 0.0 };
        xu.push(t);
        yu.push(ys[seg] + frac * (ys[seg + 1] - ys[seg]));
    }
    Ok((xu, yu))
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (d * d / var + var.ln() + (2.0 * std::f64::consts::PI).ln())
}

/// Weighted EM over spectral samples, using powers as sample weights.
/// K-means++-style seeding on the weighted points; variances floored at
/// 1e-6·(frequency range)²; stops when the weighted log-likelihood changes
/// by less than 1e-8 or after 500 iterations.
pub fn gmm_em(samples: &SpectralSampleSet, q: usize, seed: u64) -> Result<GmmResult> {
    if q < 1 {
        return Err(Error::InvalidParams("Q must be at least 1".into()));
    }
    let mut pts: Vec<(f64, f64)> = samples
        .freqs
        .iter()
        .zip(&samples.powers)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&f, &p)| (f, p))
        .collect();
    let mut distinct: Vec<f64> = pts.iter().map(|(f, _)| *f).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    if distinct.len() < q {
        return Err(Error::DegenerateInput(format!(
            "need {} distinct positive-power frequencies, found {}",
            q,
            distinct.len()
        )));
    }
    let total: f64 = pts.iter().map(|(_, p)| p).sum();
    for (_, p) in &mut pts {
        *p /= total;
    }
    let range = distinct[distinct.len() - 1] - distinct[0];
    let floor = 1e-6 * (range * range).max(f64::MIN_POSITIVE);

    // k-means++ seeding on the weighted points
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<f64> = Vec::with_capacity(q);
    centers.push(weighted_pick(&pts, |_| 1.0, &mut rng));
    while centers.len() < q {
        let next = weighted_pick(
            &pts,
            |f| {
                centers
                    .iter()
                    .map(|c| (f - c) * (f - c))
                    .fold(f64::INFINITY, f64::min)
            },
            &mut rng,
        );
        // avoid duplicate centers from zero-distance draws
        if centers.iter().all(|c| (c - next).abs() > 0.0) {
            centers.push(next);
        } else if let Some(&f) = distinct.iter().find(|f| {
            centers.iter().all(|c| (*f - c).abs() > 0.0)
        }) {
            centers.push(f);
        }
    }

    let global_mean: f64 = pts.iter().map(|(f, p)| f * p).sum();
    let global_var: f64 = pts
        .iter()
        .map(|(f, p)| p * (f - global_mean) * (f - global_mean))
        .sum::<f64>()
        .max(floor);
    let mut weights = vec![1.0 / q as f64; q];
    let mut means = centers;
    let mut variances = vec![(global_var / q as f64).max(floor); q];

    let mut trace = Vec::new();
    let mut resp = vec![0.0; q];
    let mut iterations = 0;
    for iter in 1..=500 {
        iterations = iter;
        // E-step and weighted log-likelihood
        let mut ll = 0.0;
        let mut acc_w = vec![0.0; q];
        let mut acc_m = vec![0.0; q];
        let mut acc_v = vec![0.0; q];
        for &(f, p) in &pts {
            let mut max_log = f64::NEG_INFINITY;
            for k in 0..q {
                resp[k] = weights[k].ln() + log_normal_pdf(f, means[k], variances[k]);
                max_log = max_log.max(resp[k]);
            }
            let mut denom = 0.0;
            for r in resp.iter_mut() {
                *r = (*r - max_log).exp();
                denom += *r;
            }
            ll += p * (denom.ln() + max_log);
            for k in 0..q {
                let r = p * resp[k] / denom;
                acc_w[k] += r;
                acc_m[k] += r * f;
            }
            for k in 0..q {
                let r = p * resp[k] / denom;
                let d = f - means[k];
                acc_v[k] += r * d * d;
            }
        }
        trace.push(ll);
        // M-step
        for k in 0..q {
            if acc_w[k] > 0.0 {
                means[k] = acc_m[k] / acc_w[k];
                variances[k] = (acc_v[k] / acc_w[k]).max(floor);
                weights[k] = acc_w[k];
            } else {
                weights[k] = 0.0;
                variances[k] = floor;
            }
        }
        let wsum: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= wsum;
        }
        if trace.len() >= 2 {
            let prev = trace[trace.len() - 2];
            if (ll - prev).abs() < 1e-8 {
                break;
            }
        }
    }
    Ok(GmmResult {
        weights,
        means,
        variances,
        log_likelihood: trace,
        iterations,
    })
}

fn weighted_pick(pts: &[(f64, f64)], score: impl Fn(f64) -> f64, rng: &mut ChaCha8Rng) -> f64 {
    let scores: Vec<f64> = pts.iter().map(|&(f, p)| p * score(f)).collect();
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) {
        return pts[0].0;
    }
    let mut u = rng.gen_range(0.0..total);
    for (i, s) in scores.iter().enumerate() {
        u -= s;
        if u <= 0.0 {
            return pts[i].0;
        }
    }
    pts[pts.len() - 1].0
}

fn pooled_samples(dataset: &MultiChannelDataset) -> Result<SpectralSampleSet> {
    let mut freqs = Vec::new();
    let mut powers = Vec::new();
    for ch in &dataset.channels {
        let s = empirical_spectral_density(ch)?;
        freqs.extend(s.freqs);
        powers.extend(s.powers);
    }
    Ok(SpectralSampleSet { freqs, powers })
}

/// Spectral initialization of a kernel family (§-5 style): per-channel GMMs
/// drive the spectral components, with mixture weights rescaled so each
/// channel's total kernel weight equals its sample variance; delays start at
/// zero. CSM and the LMC families pool all channels' spectral samples into
/// one GMM for their shared components.
pub fn init_params(
    dataset: &MultiChannelDataset,
    q: usize,
    family: KernelFamily,
    seed: u64,
) -> Result<MogpKernelParams<f64>> {
    if dataset.p != 1 {
        return Err(Error::UnsupportedDimension { p: dataset.p });
    }
    let m = dataset.m();
    if family == KernelFamily::Sm && m != 1 {
        return Err(Error::InvalidParams(
            "SM family is single-channel (M must be 1)".into(),
        ));
    }
    let vars: Vec<f64> = dataset.channels.iter().map(|c| c.variance_y()).collect();

    let payload = match family {
        KernelFamily::Sm => {
            let g = gmm_em(&empirical_spectral_density(&dataset.channels[0])?, q, seed)?;
            FamilyParams::Sm(
                (0..q)
                    .map(|k| {
                        SpectralComponent::undelayed(
                            g.weights[k] * vars[0],
                            vec![g.means[k]],
                            vec![g.variances[k]],
                        )
                    })
                    .collect(),
            )
        }
        KernelFamily::Mocsm | KernelFamily::Mosm => {
            let fits: Vec<GmmResult> = dataset
                .channels
                .iter()
                .enumerate()
                .map(|(i, ch)| {
                    gmm_em(
                        &empirical_spectral_density(ch)?,
                        q,
                        seed.wrapping_add(i as u64),
                    )
                })
                .collect::<Result<_>>()?;
            FamilyParams::Spectral(
                (0..q)
                    .map(|k| {
                        (0..m)
                            .map(|ch| {
                                SpectralComponent::undelayed(
                                    fits[ch].weights[k] * vars[ch],
                                    vec![fits[ch].means[k]],
                                    vec![fits[ch].variances[k]],
                                )
                            })
                            .collect()
                    })
                    .collect(),
            )
        }
        KernelFamily::Csm => {
            let g = gmm_em(&pooled_samples(dataset)?, q, seed)?;
            FamilyParams::Csm {
                shared: (0..q)
                    .map(|k| CsmShared {
                        mu: g.means[k],
                        sigma2: g.variances[k],
                    })
                    .collect(),
                weights: (0..q)
                    .map(|k| (0..m).map(|ch| g.weights[k] * vars[ch]).collect())
                    .collect(),
                phases: vec![vec![0.0; m]; q],
            }
        }
        KernelFamily::SmLmc => {
            let g = gmm_em(&pooled_samples(dataset)?, q, seed)?;
            lmc_payload(q, m, &vars, &g.weights, |k| {
                LmcBase::Sm(SpectralComponent::undelayed(
                    1.0,
                    vec![g.means[k]],
                    vec![g.variances[k]],
                ))
            })
        }
        KernelFamily::SeLmc | KernelFamily::MaternLmc => {
            // classic bases use a data-scale lengthscale, no spectral fit
            let span = dataset
                .channels
                .iter()
                .flat_map(|c| c.x.iter().map(|x| x[0]))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            let ell = ((span.1 - span.0) / 10.0).max(1e-6);
            let kind = if family == KernelFamily::SeLmc {
                BaseKind::SquaredExponential
            } else {
                BaseKind::Matern32
            };
            let uniform = vec![1.0 / q as f64; q];
            lmc_payload(q, m, &vars, &uniform, |_| {
                LmcBase::Classic(BaseKernelParams {
                    kind,
                    scale: 1.0,
                    lengthscale: vec![ell],
                })
            })
        }
    };

    let params = MogpKernelParams {
        family,
        q,
        m,
        p: 1,
        payload,
    };
    params.validate()?;
    Ok(params)
}

/// Diagonal mixing factors carrying channel variance: B_q[m,m] = w̃_q·var_m,
/// so the prior marginal variance of each channel matches its sample
/// variance when each base has unit value at τ = 0.
fn lmc_payload(
    q: usize,
    m: usize,
    vars: &[f64],
    comp_weights: &[f64],
    mut base: impl FnMut(usize) -> LmcBase<f64>,
) -> FamilyParams<f64> {
    let tri = m * (m + 1) / 2;
    FamilyParams::Lmc {
        bases: (0..q).map(&mut base).collect(),
        factors: (0..q)
            .map(|k| {
                let mut f = vec![0.0; tri];
                for ch in 0..m {
                    f[tri_index(ch, ch)] = (comp_weights[k] * vars[ch]).max(1e-12).sqrt();
                }
                f
            })
            .collect(),
    }
}

/// Default per-channel noise-variance initialization: a tenth of the sample
/// variance, floored to stay positive.
pub fn init_noise(dataset: &MultiChannelDataset) -> Vec<f64> {
    dataset
        .channels
        .iter()
        .map(|c| (0.1 * c.variance_y()).max(1e-6))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{nlml, MogpModel};
    use std::f64::consts::PI;

    fn cosine_channel(freq: f64, n: usize, dx: f64, noise_seed: Option<u64>) -> ChannelSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed.unwrap_or(0));
        ChannelSeries {
            channel_id: 1,
            x: (0..n).map(|i| vec![i as f64 * dx]).collect(),
            y: (0..n)
                .map(|i| {
                    let t = i as f64 * dx;
                    (2.0 * PI * freq * t).cos()
                        + if noise_seed.is_some() {
                            0.05 * rng.gen_range(-1.0..1.0)
                        } else {
                            0.0
                        }
                })
                .collect(),
        }
    }

    #[test]
    fn esd_cosine_peak_within_one_bin() {
        let ch = cosine_channel(0.5, 200, 0.1, None);
        let s = empirical_spectral_density(&ch).unwrap();
        let argmax = s
            .powers
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let bin = s.freqs[1] - s.freqs[0];
        assert!((s.freqs[argmax] - 0.5).abs() <= bin + 1e-12);
    }

    #[test]
    fn esd_constant_series_is_flat() {
        let ch = ChannelSeries {
            channel_id: 1,
            x: (0..32).map(|i| vec![i as f64]).collect(),
            y: vec![4.2; 32],
        };
        let s = empirical_spectral_density(&ch).unwrap();
        assert!(s.powers.iter().all(|&p| p <= 1e-12));
    }

    #[test]
    fn esd_too_few_points() {
        let ch = ChannelSeries {
            channel_id: 1,
            x: (0..7).map(|i| vec![i as f64]).collect(),
            y: vec![0.0; 7],
        };
        assert!(matches!(
            empirical_spectral_density(&ch),
            Err(Error::TooFewPoints { need: 8, got: 7 })
        ));
    }

    #[test]
    fn esd_resamples_nonuniform_grid() {
        // jittered grid still localizes the tone
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut xs: Vec<f64> = (0..256)
            .map(|i| i as f64 * 0.1 + rng.gen_range(-0.02..0.02))
            .collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ch = ChannelSeries {
            channel_id: 1,
            x: xs.iter().map(|&v| vec![v]).collect(),
            y: xs.iter().map(|&t| (2.0 * PI * 0.5 * t).cos()).collect(),
        };
        let s = empirical_spectral_density(&ch).unwrap();
        let argmax = s
            .powers
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((s.freqs[argmax] - 0.5).abs() < 0.05);
    }

    #[test]
    fn gmm_single_component_closed_form() {
        let samples = SpectralSampleSet {
            freqs: vec![0.1, 0.2, 0.3, 0.4],
            powers: vec![1.0, 2.0, 3.0, 4.0],
        };
        let g = gmm_em(&samples, 1, 0).unwrap();
        assert!((g.weights[0] - 1.0).abs() < 1e-12);
        let mean = (0.1 + 0.4 + 0.9 + 1.6) / 10.0;
        assert!((g.means[0] - mean).abs() < 1e-9, "{}", g.means[0]);
        let var: f64 = [0.1, 0.2, 0.3, 0.4]
            .iter()
            .zip([1.0, 2.0, 3.0, 4.0])
            .map(|(&f, p)| p / 10.0 * (f - mean) * (f - mean))
            .sum();
        assert!((g.variances[0] - var).abs() < 1e-9);
    }

    #[test]
    fn gmm_two_spikes() {
        let mut freqs = Vec::new();
        let mut powers = Vec::new();
        for k in 0..40 {
            let f = k as f64 * 0.03;
            freqs.push(f);
            let p = (-((f - 0.2) / 0.01).powi(2)).exp() + (-((f - 1.0) / 0.01).powi(2)).exp();
            powers.push(p.max(1e-12));
        }
        let g = gmm_em(&SpectralSampleSet { freqs, powers }, 2, 3).unwrap();
        let mut means = g.means.clone();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((means[0] - 0.2).abs() < 0.02, "{means:?}");
        assert!((means[1] - 1.0).abs() < 0.02, "{means:?}");
    }

    #[test]
    fn gmm_degenerate_single_frequency() {
        let samples = SpectralSampleSet {
            freqs: vec![0.5, 0.5, 0.5],
            powers: vec![1.0, 2.0, 0.5],
        };
        assert!(matches!(
            gmm_em(&samples, 2, 0),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn gmm_log_likelihood_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let freqs: Vec<f64> = (0..60).map(|i| i as f64 * 0.02).collect();
        let powers: Vec<f64> = freqs.iter().map(|_| rng.gen_range(0.01..1.0)).collect();
        let g = gmm_em(&SpectralSampleSet { freqs, powers }, 3, 1).unwrap();
        for w in g.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "{:?}", g.log_likelihood);
        }
        assert_eq!(g.iterations, g.log_likelihood.len());
    }

    fn synthetic_two_channel(seed: u64, n: usize) -> MultiChannelDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let channels = (1..=2)
            .map(|cid| {
                let f = 0.2 + 0.3 * cid as f64;
                ChannelSeries {
                    channel_id: cid,
                    x: (0..n).map(|i| vec![i as f64 * 0.15]).collect(),
                    y: (0..n)
                        .map(|i| {
                            let t = i as f64 * 0.15;
                            (2.0 * PI * f * t).sin() + 0.1 * rng.gen_range(-1.0..1.0)
                        })
                        .collect(),
                }
            })
            .collect();
        MultiChannelDataset::new(channels, 1).unwrap()
    }

    #[test]
    fn init_recovers_cosine_frequency() {
        let ds = MultiChannelDataset::new(vec![cosine_channel(0.5, 256, 0.1, Some(4))], 1).unwrap();
        let params = init_params(&ds, 1, KernelFamily::Sm, 0).unwrap();
        if let FamilyParams::Sm(comps) = &params.payload {
            assert!((comps[0].mu[0] - 0.5).abs() < 0.05, "{}", comps[0].mu[0]);
        } else {
            panic!("wrong payload");
        }
    }

    #[test]
    fn init_weights_sum_to_channel_variance() {
        let ds = synthetic_two_channel(1, 120);
        for family in [KernelFamily::Mocsm, KernelFamily::Mosm] {
            let params = init_params(&ds, 3, family, 7).unwrap();
            if let FamilyParams::Spectral(table) = &params.payload {
                for ch in 0..2 {
                    let total: f64 = table.iter().map(|row| row[ch].w).sum();
                    let var = ds.channels[ch].variance_y();
                    assert!((total - var).abs() <= 1e-9 * var.max(1.0), "{family}");
                    for row in table {
                        assert!(row[ch].theta.iter().all(|&v| v == 0.0));
                        assert!(row[ch].phi.iter().all(|&v| v == 0.0));
                        assert!(row[ch].w > 0.0);
                    }
                }
            } else {
                panic!("wrong payload");
            }
        }
    }

    #[test]
    fn init_deterministic() {
        let ds = synthetic_two_channel(2, 100);
        for family in KernelFamily::ALL {
            if family == KernelFamily::Sm {
                continue;
            }
            let a = init_params(&ds, 2, family, 11).unwrap();
            let b = init_params(&ds, 2, family, 11).unwrap();
            assert_eq!(a, b, "{family}");
        }
    }

    #[test]
    fn init_gives_finite_nlml() {
        for seed in 0..20u64 {
            let ds = synthetic_two_channel(seed, 64);
            let family = KernelFamily::ALL[(seed % 7) as usize];
            let ds = if family == KernelFamily::Sm {
                MultiChannelDataset::new(vec![ds.channels[0].clone()], 1).unwrap()
            } else {
                ds
            };
            let params = init_params(&ds, 2, family, seed).unwrap();
            let noise = init_noise(&ds);
            let model = MogpModel::new(params, noise, ds).unwrap();
            let v = nlml(&model).unwrap();
            assert!(v.is_finite(), "seed {seed} family {family}: {v}");
        }
    }

    #[test]
    fn init_rejects_multidimensional_inputs() {
        let ds = MultiChannelDataset::new(
            vec![ChannelSeries {
                channel_id: 1,
                x: (0..16).map(|i| vec![i as f64, 0.0]).collect(),
                y: vec![0.0; 16],
            }],
            2,
        )
        .unwrap();
        assert!(matches!(
            init_params(&ds, 1, KernelFamily::Mocsm, 0),
            Err(Error::UnsupportedDimension { p: 2 })
        ));
    }
}
