//! Samples, context, conditional supports, probability trimmings and the
//! minimum transportation budget.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// N joint observations `(ẑ_i, ω̂_i)` stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSampleSet {
    farm_ids: Vec<u32>,
    z: Vec<f64>,
    w: Vec<f64>,
    omega: Vec<f64>,
}

impl JointSampleSet {
    pub fn new(farm_ids: Vec<u32>, z_rows: &[Vec<f64>], w_rows: &[Vec<f64>]) -> Result<Self> {
        let n_w = farm_ids.len();
        if z_rows.len() != w_rows.len() {
            return Err(Error::DimensionMismatch { expected: z_rows.len(), got: w_rows.len() });
        }
        let mut z = Vec::with_capacity(z_rows.len() * n_w);
        let mut w = Vec::with_capacity(z.capacity());
        for (zr, wr) in z_rows.iter().zip(w_rows) {
            for r in [zr, wr] {
                if r.len() != n_w {
                    return Err(Error::DimensionMismatch { expected: n_w, got: r.len() });
                }
            }
            z.extend_from_slice(zr);
            w.extend_from_slice(wr);
        }
        Self::from_flat(farm_ids, z, w)
    }

    pub fn from_flat(farm_ids: Vec<u32>, z: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let n_w = farm_ids.len();
        if n_w == 0 {
            return Err(Error::InvalidParameter("sample set needs at least one farm".into()));
        }
        if z.len() != w.len() || !z.len().is_multiple_of(n_w) {
            return Err(Error::DimensionMismatch { expected: z.len(), got: w.len() });
        }
        if z.iter().chain(&w).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("sample values must be finite".into()));
        }
        let omega = w.chunks(n_w).map(|r| r.iter().sum()).collect();
        Ok(JointSampleSet { farm_ids, z, w, omega })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn n_farms(&self) -> usize {
        self.farm_ids.len()
    }

    pub fn farm_ids(&self) -> &[u32] {
        &self.farm_ids
    }

    pub fn z(&self, i: usize) -> &[f64] {
        let n = self.n_farms();
        &self.z[i * n..(i + 1) * n]
    }

    pub fn w(&self, i: usize) -> &[f64] {
        let n = self.n_farms();
        &self.w[i * n..(i + 1) * n]
    }

    /// Aggregate errors `Ω̂_i = Σ_m ω̂_im`.
    pub fn omega_hat(&self) -> &[f64] {
        &self.omega
    }

    /// Sub-sample with the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let z = rows.iter().flat_map(|&i| self.z(i).iter().copied()).collect();
        let w = rows.iter().flat_map(|&i| self.w(i).iter().copied()).collect();
        Self::from_flat(self.farm_ids.clone(), z, w).expect("rows of a valid set")
    }

    /// CSV with header `z_<id>…,w_<id>…`, one sample per row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(out);
        let header: Vec<String> = self
            .farm_ids
            .iter()
            .map(|id| format!("z_{id}"))
            .chain(self.farm_ids.iter().map(|id| format!("w_{id}")))
            .collect();
        wr.write_record(&header)?;
        for i in 0..self.len() {
            let rec: Vec<String> = self.z(i).iter().chain(self.w(i)).map(|v| format!("{v:?}")).collect();
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let table = read_table(input)?;
        let z_cols = table.columns_with_prefix("z_")?;
        let w_cols = table.columns_with_prefix("w_")?;
        let ids: Vec<u32> = z_cols.iter().map(|c| c.0).collect();
        if ids != w_cols.iter().map(|c| c.0).collect::<Vec<_>>() {
            return Err(Error::Parse("z_ and w_ columns must name the same farms in the same order".into()));
        }
        let mut z = Vec::new();
        let mut w = Vec::new();
        for row in &table.rows {
            z.extend(z_cols.iter().map(|c| row[c.1]));
            w.extend(w_cols.iter().map(|c| row[c.1]));
        }
        Self::from_flat(ids, z, w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    /// `(farm id, column index)` for every column named `<prefix><id>`.
    fn columns_with_prefix(&self, prefix: &str) -> Result<Vec<(u32, usize)>> {
        self.header
            .iter()
            .enumerate()
            .filter_map(|(j, h)| h.strip_prefix(prefix).map(|id| (id, j)))
            .map(|(id, j)| {
                id.trim()
                    .parse::<u32>()
                    .map(|id| (id, j))
                    .map_err(|_| Error::Parse(format!("bad farm id in column {:?}", self.header[j])))
            })
            .collect()
    }
}

fn read_table<R: Read>(input: R) -> Result<Table> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (n, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| Error::Parse(format!("row {}: bad number {s:?}", n + 1))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Error scenarios stored in the sample format; only the `w_` block is read.
pub fn read_error_scenarios<R: Read>(input: R) -> Result<(Vec<u32>, Vec<Vec<f64>>)> {
    let table = read_table(input)?;
    let cols = table.columns_with_prefix("w_")?;
    if cols.is_empty() {
        return Err(Error::Parse("no w_ columns".into()));
    }
    let rows = table.rows.iter().map(|r| cols.iter().map(|c| r[c.1]).collect()).collect();
    Ok((cols.iter().map(|c| c.0).collect(), rows))
}

pub fn write_error_scenarios<W: Write>(out: W, farm_ids: &[u32], scenarios: &[Vec<f64>]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(farm_ids.iter().map(|id| format!("w_{id}")))?;
    for s in scenarios {
        wr.write_record(s.iter().map(|v| format!("{v:?}")))?;
    }
    wr.flush()?;
    Ok(())
}

/// Axis-aligned box `Π [lo_m, hi_m]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch { expected: lo.len(), got: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h) || l.is_nan()) {
            return Err(Error::InvalidParameter("box requires lo <= hi".into()));
        }
        Ok(BoxSet { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter().zip(self.lo.iter().zip(&self.hi)).all(|(x, (l, h))| l <= x && x <= h)
    }

    pub fn clip(&self, p: &[f64]) -> Vec<f64> {
        p.iter().zip(self.lo.iter().zip(&self.hi)).map(|(x, (l, h))| x.clamp(*l, *h)).collect()
    }

    /// ℓ1 norm of the clip residual.
    pub fn dist_l1(&self, p: &[f64]) -> f64 {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(x, (l, h))| (l - x).max(0.0) + (x - h).max(0.0))
            .sum()
    }
}

/// Support function of a box: `S(v) = Σ_m max(v_m·lo_m, v_m·hi_m)`.
pub fn box_support_function(v: &[f64], b: &BoxSet) -> f64 {
    v.iter()
        .zip(b.lo.iter().zip(&b.hi))
        .map(|(v, (l, h))| {
            if *v == 0.0 {
                0.0
            } else {
                (v * l).max(v * h)
            }
        })
        .sum()
}

/// Today's forecast and the conditional supports it induces.
#[derive(Clone, Debug, PartialEq)]
pub struct Context {
    pub f: Vec<f64>,
    pub capacity: Vec<f64>,
    /// `Ξ̃_ω = Π [−f_m, C̄_m − f_m]`
    pub error_box: BoxSet,
}

impl Context {
    pub fn new(f: Vec<f64>, capacity: Vec<f64>) -> Result<Self> {
        if f.len() != capacity.len() {
            return Err(Error::DimensionMismatch { expected: capacity.len(), got: f.len() });
        }
        if f.iter().zip(&capacity).any(|(f, c)| !(0.0..=*c).contains(f) || !c.is_finite()) {
            return Err(Error::InvalidParameter("context forecasts must lie in [0, capacity]".into()));
        }
        let lo = f.iter().map(|f| -f).collect();
        let hi = f.iter().zip(&capacity).map(|(f, c)| c - f).collect();
        Ok(Context { f, capacity, error_box: BoxSet::new(lo, hi)? })
    }

    pub fn omega_lo(&self) -> f64 {
        self.error_box.lo.iter().sum()
    }

    pub fn omega_hi(&self) -> f64 {
        self.error_box.hi.iter().sum()
    }

    /// Distance of `x` to `[Ω_lo, Ω_hi]`.
    pub fn omega_dist(&self, x: f64) -> f64 {
        (self.omega_lo() - x).max(0.0) + (x - self.omega_hi()).max(0.0)
    }
}

/// `‖a − b‖_1`
pub fn ground_distance_z(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
}

fn check_dims(samples: &JointSampleSet, ctx: &Context) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if samples.n_farms() != ctx.f.len() {
        return Err(Error::DimensionMismatch { expected: ctx.f.len(), got: samples.n_farms() });
    }
    Ok(())
}

/// `scale·‖f − ẑ_i‖_1 + dist_1(ω̂_i, Ξ̃_ω)` for every sample.
pub fn joint_distances(samples: &JointSampleSet, ctx: &Context, context_scale: f64) -> Result<Vec<f64>> {
    check_dims(samples, ctx)?;
    (0..samples.len())
        .map(|i| Ok(context_scale * ground_distance_z(&ctx.f, samples.z(i))? + ctx.error_box.dist_l1(samples.w(i))))
        .collect()
}

/// `scale·‖f − ẑ_i‖_1 + dist(Ω̂_i, [Ω_lo, Ω_hi])` for every sample.
pub fn aggregate_distances(samples: &JointSampleSet, ctx: &Context, context_scale: f64) -> Result<Vec<f64>> {
    check_dims(samples, ctx)?;
    (0..samples.len())
        .map(|i| {
            Ok(context_scale * ground_distance_z(&ctx.f, samples.z(i))? + ctx.omega_dist(samples.omega_hat()[i]))
        })
        .collect()
}

/// `scale·‖f − ẑ_i‖_1` for every sample.
pub fn context_distances(samples: &JointSampleSet, ctx: &Context, context_scale: f64) -> Result<Vec<f64>> {
    check_dims(samples, ctx)?;
    (0..samples.len()).map(|i| Ok(context_scale * ground_distance_z(&ctx.f, samples.z(i))?)).collect()
}

/// Indices sorted by ascending distance, ties by index.
pub fn nearest_order(dist: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..dist.len()).collect();
    idx.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    idx
}

/// `Nα`, snapped to the nearest integer when within rounding noise.
pub fn trimmed_mass(n: usize, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("trimming level must be positive, got {alpha}")));
    }
    let na = n as f64 * alpha;
    let na = if (na - na.round()).abs() < 1e-9 { na.round() } else { na };
    if na > n as f64 {
        return Err(Error::InvalidParameter(format!("trimming level {alpha} exceeds 1")));
    }
    Ok(na)
}

/// Membership in the (1−α)-trimming set of an N-point empirical measure.
pub fn is_trimming(b: &[f64], alpha: f64) -> Result<bool> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("trimming level must be positive, got {alpha}")));
    }
    const TOL: f64 = 1e-12;
    let cap = 1.0 / (b.len() as f64 * alpha);
    let in_range = b.iter().all(|&x| x >= -TOL && x <= cap + TOL);
    Ok(in_range && (b.iter().sum::<f64>() - 1.0).abs() <= TOL)
}

/// Minimum transportation budget from per-sample distances to the target set:
/// the cheapest (1−α)-trimming fills the nearest ⌊Nα⌋ samples to the cap
/// 1/(Nα) and puts the remainder on the next one.
pub fn min_transport_budget(dist: &[f64], alpha: f64) -> Result<f64> {
    if dist.is_empty() {
        return Err(Error::EmptySamples);
    }
    let na = trimmed_mass(dist.len(), alpha)?;
    let order = nearest_order(dist);
    let full = na.floor() as usize;
    let mut rho: f64 = order[..full].iter().map(|&i| dist[i]).sum::<f64>() / na;
    let rest = 1.0 - full as f64 / na;
    if rest > 0.0 {
        rho += rest * dist[order[full]];
    }
    Ok(rho.max(0.0))
}

/// `K_N = ⌊N^0.9⌋`, `α_N = K_N / N`.
pub fn alpha_schedule(n: usize) -> (usize, f64) {
    assert!(n >= 1, "sample size must be positive");
    let mut k = (n as f64).powf(0.9).floor() as u128;
    // Integer check of k^10 ≤ N^9 < (k+1)^10 where it fits.
    if let Some(n9) = (n as u128).checked_pow(9) {
        while k > 1 && k.pow(10) > n9 {
            k -= 1;
        }
        while (k + 1).checked_pow(10).is_some_and(|p| p <= n9) {
            k += 1;
        }
    }
    let k = (k as usize).clamp(1, n);
    (k, k as f64 / n as f64)
}
