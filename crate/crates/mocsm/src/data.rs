//! Multi-channel datasets: synthetic experiment generation, numerical
//! calculus helpers, CSV ingestion, and train/test split schemes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::{self, KernelFamily};
use crate::numerics;

/// Observations of one output channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSeries {
    /// One-based channel id, contiguous within a dataset.
    pub channel_id: usize,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl ChannelSeries {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn mean_y(&self) -> f64 {
        self.y.iter().sum::<f64>() / self.y.len() as f64
    }

    /// Population variance of the outputs.
    pub fn variance_y(&self) -> f64 {
        let mean = self.mean_y();
        self.y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / self.y.len() as f64
    }
}

/// Per-channel observations with P-dimensional inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiChannelDataset {
    pub channels: Vec<ChannelSeries>,
    pub p: usize,
}

impl MultiChannelDataset {
    pub fn new(channels: Vec<ChannelSeries>, p: usize) -> Result<Self> {
        for (idx, ch) in channels.iter().enumerate() {
            if ch.channel_id != idx + 1 {
                return Err(Error::InvalidParams(format!(
                    "channel ids must be contiguous from 1, got {} at position {}",
                    ch.channel_id, idx
                )));
            }
            if ch.x.len() != ch.y.len() || ch.y.is_empty() {
                return Err(Error::InvalidParams(format!(
                    "channel {}: |X| must equal |y| and be nonzero",
                    ch.channel_id
                )));
            }
            for xi in &ch.x {
                if xi.len() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        got: xi.len(),
                    });
                }
            }
            let finite = ch.y.iter().all(|v| v.is_finite())
                && ch.x.iter().flatten().all(|v| v.is_finite());
            if !finite {
                return Err(Error::InvalidParams(format!(
                    "channel {}: non-finite values",
                    ch.channel_id
                )));
            }
        }
        Ok(MultiChannelDataset { channels, p })
    }

    pub fn m(&self) -> usize {
        self.channels.len()
    }

    pub fn n_total(&self) -> usize {
        self.channels.iter().map(|c| c.len()).sum()
    }

    /// Stacked (channel, x) list in channel order, plus stacked outputs.
    pub fn stacked(&self) -> (Vec<(usize, Vec<f64>)>, Vec<f64>) {
        let mut inputs = Vec::with_capacity(self.n_total());
        let mut y = Vec::with_capacity(self.n_total());
        for ch in &self.channels {
            for (xi, yi) in ch.x.iter().zip(&ch.y) {
                inputs.push((ch.channel_id, xi.clone()));
                y.push(*yi);
            }
        }
        (inputs, y)
    }
}

/// How to split one channel into train/test halves.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SplitScheme {
    /// Seeded shuffle, first ⌈n/2⌉ to train.
    RandomHalf(u64),
    /// First ⌈n/2⌉ points sorted by the first input coordinate to train.
    FirstHalf,
    /// Last ⌈n/2⌉ points sorted by the first input coordinate to train.
    LastHalf,
    /// Everything to train, empty test side (training-only channel).
    TrainOnly,
}

impl std::str::FromStr for SplitScheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        if lower == "first" {
            Ok(SplitScheme::FirstHalf)
        } else if lower == "last" {
            Ok(SplitScheme::LastHalf)
        } else if lower == "all" {
            Ok(SplitScheme::TrainOnly)
        } else if let Some(seed) = lower.strip_prefix("random") {
            let seed = seed.trim_start_matches([':', '=']);
            let seed = if seed.is_empty() {
                0
            } else {
                seed.parse::<u64>().map_err(|_| {
                    Error::InvalidParams(format!("bad random split seed in '{s}'"))
                })?
            };
            Ok(SplitScheme::RandomHalf(seed))
        } else {
            Err(Error::InvalidParams(format!(
                "unknown split scheme '{s}' (expected first, last, all, or random[:seed])"
            )))
        }
    }
}

/// Generate the three-channel synthetic experiment: channel 1 is a draw
/// from a zero-mean GP with an SM kernel (Q components randomized from the
/// seed), channel 2 its cumulative trapezoidal integral, channel 3 its
/// central-difference derivative.
pub fn generate_synthetic(
    seed: u64,
    q: usize,
    n: usize,
    interval: (f64, f64),
) -> Result<MultiChannelDataset> {
    if n < 16 {
        return Err(Error::TooFewPoints { need: 16, got: n });
    }
    if q < 1 || !(interval.1 > interval.0) {
        return Err(Error::InvalidParams(
            "need Q ≥ 1 and a nonempty interval".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = kernels::random_params(KernelFamily::Sm, q, 1, 1, &mut rng);
    let dx = (interval.1 - interval.0) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| interval.0 + i as f64 * dx).collect();
    let inputs: Vec<(usize, Vec<f64>)> = xs.iter().map(|&x| (1, vec![x])).collect();
    let mut gram = kernels::gram_matrix(&params, &inputs)?;
    for i in 0..n {
        let v = gram.get(i, i) + 1e-6;
        gram.set(i, i, v);
    }
    let factor = numerics::cholesky(&gram, 0.0)?;
    let z: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut signal = vec![0.0; n];
    for i in 0..n {
        for k in 0..=i {
            signal[i] += factor.lower(i, k) * z[k];
        }
    }
    let integral = numerical_integral(&signal, dx)?;
    let derivative = numerical_derivative(&signal, dx)?;
    let x_col: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    MultiChannelDataset::new(
        vec![
            ChannelSeries {
                channel_id: 1,
                x: x_col.clone(),
                y: signal,
            },
            ChannelSeries {
                channel_id: 2,
                x: x_col.clone(),
                y: integral,
            },
            ChannelSeries {
                channel_id: 3,
                x: x_col,
                y: derivative,
            },
        ],
        1,
    )
}

/// Cumulative trapezoidal integral starting at 0.
pub fn numerical_integral(y: &[f64], dx: f64) -> Result<Vec<f64>> {
    if y.len() < 3 {
        return Err(Error::TooFewPoints {
            need: 3,
            got: y.len(),
        });
    }
    assert!(dx > 0.0);
    let mut out = Vec::with_capacity(y.len());
    out.push(0.0);
    for i in 1..y.len() {
        out.push(out[i - 1] + dx * 0.5 * (y[i - 1] + y[i]));
    }
    Ok(out)
}

/// Central differences in the interior, first-order one-sided at the ends.
pub fn numerical_derivative(y: &[f64], dx: f64) -> Result<Vec<f64>> {
    if y.len() < 3 {
        return Err(Error::TooFewPoints {
            need: 3,
            got: y.len(),
        });
    }
    assert!(dx > 0.0);
    let n = y.len();
    let mut out = Vec::with_capacity(n);
    out.push((y[1] - y[0]) / dx);
    for i in 1..n - 1 {
        out.push((y[i + 1] - y[i - 1]) / (2.0 * dx));
    }
    out.push((y[n - 1] - y[n - 2]) / dx);
    Ok(out)
}

fn expected_header(p: usize) -> Vec<String> {
    let mut h = vec!["channel".to_string()];
    for k in 1..=p {
        h.push(format!("x{k}"));
    }
    h.push("y".to_string());
    h
}

/// Load a dataset from CSV with header `channel,x1,...,xP,y`. Channel
/// labels are remapped to contiguous 1..M in first-appearance order;
/// duplicate (channel, x) rows are retained.
pub fn load_csv(path: impl AsRef<Path>, p: usize) -> Result<MultiChannelDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path.as_ref())?;
    let header = expected_header(p);
    {
        let got: Vec<String> = reader.headers()?.iter().map(|s| s.to_string()).collect();
        if got != header {
            return Err(Error::MalformedRow {
                line: 1,
                reason: format!("expected header '{}', got '{}'", header.join(","), got.join(",")),
            });
        }
    }
    let mut labels: Vec<i64> = Vec::new();
    let mut channels: Vec<ChannelSeries> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        if record.len() != p + 2 {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, got {}", p + 2, record.len()),
            });
        }
        let parse = |field: &str, name: &str| -> Result<f64> {
            field.parse::<f64>().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("non-numeric {name} '{field}'"),
            })
        };
        let label = record[0].parse::<i64>().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("non-integer channel '{}'", &record[0]),
        })?;
        let x: Vec<f64> = (0..p)
            .map(|k| parse(&record[k + 1], &format!("x{}", k + 1)))
            .collect::<Result<_>>()?;
        let y = parse(&record[p + 1], "y")?;
        let ch_idx = match labels.iter().position(|&l| l == label) {
            Some(i) => i,
            None => {
                labels.push(label);
                channels.push(ChannelSeries {
                    channel_id: labels.len(),
                    x: Vec::new(),
                    y: Vec::new(),
                });
                labels.len() - 1
            }
        };
        channels[ch_idx].x.push(x);
        channels[ch_idx].y.push(y);
    }
    if channels.is_empty() {
        return Err(Error::EmptyFile);
    }
    MultiChannelDataset::new(channels, p)
}

/// Write a dataset as CSV in the `load_csv` schema.
pub fn save_csv(dataset: &MultiChannelDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    writer.write_record(expected_header(dataset.p))?;
    for ch in &dataset.channels {
        for (x, y) in ch.x.iter().zip(&ch.y) {
            let mut row = vec![ch.channel_id.to_string()];
            row.extend(x.iter().map(|v| format!("{v}")));
            row.push(format!("{y}"));
            writer.write_record(&row)?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Write predictions as CSV with header `channel,x1,...,xP,mean,variance`.
pub fn save_predictions(
    points: &[(usize, Vec<f64>)],
    mean: &[f64],
    variance: &[f64],
    p: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut writer = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["channel".to_string()];
    for k in 1..=p {
        header.push(format!("x{k}"));
    }
    header.push("mean".into());
    header.push("variance".into());
    writer.write_record(&header)?;
    for (i, (ch, x)) in points.iter().enumerate() {
        let mut row = vec![ch.to_string()];
        row.extend(x.iter().map(|v| format!("{v}")));
        row.push(format!("{}", mean[i]));
        row.push(format!("{}", variance[i]));
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Split each channel into train/test according to its scheme. Train gets
/// ⌈n/2⌉ points; channels may end up with an empty test side.
pub fn split(
    dataset: &MultiChannelDataset,
    schemes: &[SplitScheme],
) -> Result<(MultiChannelDataset, MultiChannelDataset)> {
    if schemes.len() != dataset.m() {
        return Err(Error::DimensionMismatch {
            expected: dataset.m(),
            got: schemes.len(),
        });
    }
    let mut train_channels = Vec::with_capacity(dataset.m());
    let mut test_channels = Vec::with_capacity(dataset.m());
    for (ch, scheme) in dataset.channels.iter().zip(schemes) {
        let n = ch.len();
        let k = n.div_ceil(2);
        let (train_idx, test_idx): (Vec<usize>, Vec<usize>) = match scheme {
            SplitScheme::RandomHalf(seed) => {
                let mut order: Vec<usize> = (0..n).collect();
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                for i in (1..n).rev() {
                    let j = rng.gen_range(0..=i);
                    order.swap(i, j);
                }
                let mut train: Vec<usize> = order[..k].to_vec();
                let mut test: Vec<usize> = order[k..].to_vec();
                train.sort_unstable();
                test.sort_unstable();
                (train, test)
            }
            SplitScheme::FirstHalf | SplitScheme::LastHalf => {
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&a, &b| {
                    ch.x[a][0]
                        .partial_cmp(&ch.x[b][0])
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
                if matches!(scheme, SplitScheme::FirstHalf) {
                    (order[..k].to_vec(), order[k..].to_vec())
                } else {
                    (order[n - k..].to_vec(), order[..n - k].to_vec())
                }
            }
            SplitScheme::TrainOnly => ((0..n).collect(), Vec::new()),
        };
        let take = |idx: &[usize]| ChannelSeries {
            channel_id: ch.channel_id,
            x: idx.iter().map(|&i| ch.x[i].clone()).collect(),
            y: idx.iter().map(|&i| ch.y[i]).collect(),
        };
        train_channels.push(take(&train_idx));
        test_channels.push(take(&test_idx));
    }
    // Test sides may be empty per channel; bypass the nonempty check.
    let train = MultiChannelDataset {
        channels: train_channels,
        p: dataset.p,
    };
    let test = MultiChannelDataset {
        channels: test_channels,
        p: dataset.p,
    };
    Ok((train, test))
}
