//! Synthetic wind data: forecasts drawn from a pool, Beta-distributed
//! realizations around them, scaled to MW.

use std::io::Read;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::uncertainty::JointSampleSet;

/// Per-unit forecasts are clipped to this range before fitting.
pub const FORECAST_CLIP: (f64, f64) = (0.05, 0.95);

/// Standard deviation of the per-unit forecast error at six hours lead time.
pub fn sigma_of_forecast(f: f64) -> f64 {
    0.2 * f + 0.02
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaParams {
    pub a: f64,
    pub b: f64,
}

impl BetaParams {
    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    pub fn variance(&self) -> f64 {
        let s = self.a + self.b;
        self.a * self.b / (s * s * (s + 1.0))
    }
}

/// Beta shape parameters with the given mean and standard deviation.
pub fn fit_beta(mean: f64, sigma: f64) -> Result<BetaParams> {
    let var = sigma * sigma;
    if !(mean > 0.0 && mean < 1.0) || !(sigma > 0.0) || !(var < mean * (1.0 - mean)) {
        return Err(Error::BetaFit { mean, sigma });
    }
    let s = mean * (1.0 - mean) / var - 1.0;
    Ok(BetaParams { a: mean * s, b: (1.0 - mean) * s })
}

/// Per-unit point forecasts. A single column is shared by all farms (each
/// farm draws independently); with `|W|` or more columns a whole row is
/// drawn so the farms keep the pool's cross-correlation, farm m reading
/// column m.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastPool {
    rows: Vec<Vec<f64>>,
}

impl ForecastPool {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).ok_or_else(|| Error::InvalidParameter("forecast pool is empty".into()))?;
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::Parse("forecast pool rows must have the same non-zero width".into()));
        }
        if rows.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("forecast pool values must lie in [0, 1]".into()));
        }
        Ok(ForecastPool { rows })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        Self::new(values.into_iter().map(|v| vec![v]).collect())
    }

    /// Comma- or whitespace-separated values, one observation per line; `#`
    /// starts a comment.
    pub fn read<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("pool line {}: bad value {t:?}", n + 1))))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::new(rows)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.rows[0].len()
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream for `(seed, a, b)`.
pub fn stream_rng(seed: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(splitmix(seed) ^ a) ^ b))
}

/// Child seed for a run of a larger experiment.
pub fn derive_seed(master: u64, run: u64) -> u64 {
    splitmix(master ^ splitmix(run.wrapping_add(0x5EED)))
}

/// Draws a per-unit realization around per-unit forecast `f` (already clipped).
fn draw_beta(rng: &mut ChaCha8Rng, f: f64) -> Result<f64> {
    let p = fit_beta(f, sigma_of_forecast(f))?;
    let beta = Beta::new(p.a, p.b).map_err(|e| Error::InvalidParameter(format!("beta({}, {}): {e}", p.a, p.b)))?;
    Ok(beta.sample(rng))
}

fn clip_forecast(f: f64) -> f64 {
    f.clamp(FORECAST_CLIP.0, FORECAST_CLIP.1)
}

/// N joint samples `(z, ω)` in MW, deterministic in `seed`.
pub fn generate_joint_samples(
    pool: &ForecastPool,
    farm_ids: &[u32],
    capacities: &[f64],
    n: usize,
    seed: u64,
) -> Result<JointSampleSet> {
    let n_w = capacities.len();
    if farm_ids.len() != n_w {
        return Err(Error::DimensionMismatch { expected: n_w, got: farm_ids.len() });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be positive".into()));
    }
    let joint = match pool.width() {
        1 => false,
        w if w >= n_w => true,
        w => return Err(Error::DimensionMismatch { expected: n_w, got: w }),
    };
    let mut z = Vec::with_capacity(n * n_w);
    let mut w = Vec::with_capacity(n * n_w);
    for i in 0..n {
        let row = joint.then(|| stream_rng(seed, i as u64, u64::MAX).gen_range(0..pool.len()));
        for (m, &cap) in capacities.iter().enumerate() {
            let mut rng = stream_rng(seed, i as u64, m as u64);
            let raw = match row {
                Some(r) => pool.rows[r][m],
                None => pool.rows[rng.gen_range(0..pool.len())][0],
            };
            let f = clip_forecast(raw);
            let realized = draw_beta(&mut rng, f)?;
            z.push(cap * f);
            w.push(cap * (realized - f));
        }
    }
    JointSampleSet::from_flat(farm_ids.to_vec(), z, w)
}

/// `m` error vectors conditional on the MW forecast `f`: `ω = C̄·Ŵ − f`
/// with `Ŵ` Beta-distributed around `f/C̄`.
pub fn generate_test_set(f: &[f64], capacities: &[f64], m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if m == 0 {
        return Err(Error::InvalidParameter("test set size must be positive".into()));
    }
    if f.len() != capacities.len() {
        return Err(Error::DimensionMismatch { expected: capacities.len(), got: f.len() });
    }
    (0..m)
        .map(|s| {
            f.iter()
                .zip(capacities)
                .enumerate()
                .map(|(k, (&fm, &cap))| {
                    let mut rng = stream_rng(seed ^ 0x7E57, s as u64, k as u64);
                    Ok(cap * draw_beta(&mut rng, clip_forecast(fm / cap))? - fm)
                })
                .collect()
        })
        .collect()
}
