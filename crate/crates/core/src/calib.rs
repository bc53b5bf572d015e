//! Estimators for binned client-flow data.
//!
//! Input is a CSV with header `timestamp,dt,dz[,q]`: bin start time in days,
//! bin length in days, normalized inflow over the bin and, optionally, the
//! desk's hedge rate during the bin. Days are `floor(timestamp)`.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FlowRecord {
    pub timestamp: f64,
    pub dt: f64,
    pub dz: f64,
    pub q: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowSeries {
    pub records: Vec<FlowRecord>,
    /// `(day, first index, one past last index)`.
    pub days: Vec<(i64, usize, usize)>,
    pub has_q: bool,
}

impl FlowSeries {
    pub fn new(records: Vec<FlowRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::invalid("empty file"));
        }
        for (i, r) in records.iter().enumerate() {
            let finite = r.timestamp.is_finite() && r.dt.is_finite() && r.dz.is_finite() && r.q.is_none_or(f64::is_finite);
            if !finite {
                return Err(Error::invalid(format!("row {}: non-finite value", i + 1)));
            }
            if r.dt <= 0.0 {
                return Err(Error::invalid(format!("row {}: bin duration must be positive", i + 1)));
            }
            if i > 0 && r.timestamp <= records[i - 1].timestamp {
                return Err(Error::invalid(format!("row {}: timestamps must increase strictly", i + 1)));
            }
        }
        let has_q = records.iter().all(|r| r.q.is_some());
        let mut days: Vec<(i64, usize, usize)> = Vec::new();
        for (i, r) in records.iter().enumerate() {
            let day = (r.timestamp + 1e-9).floor() as i64;
            match days.last_mut() {
                Some((d, _, end)) if *d == day => *end = i + 1,
                _ => days.push((day, i, i + 1)),
            }
        }
        Ok(FlowSeries { records, days, has_q })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Merge every `factor` consecutive bins of a day into one. Inflows add
    /// up, hedge rates are averaged by duration. A short final group per
    /// day is kept.
    pub fn rebin(&self, factor: usize) -> Result<FlowSeries> {
        if factor == 0 {
            return Err(Error::invalid("rebin factor must be positive"));
        }
        let mut out = Vec::new();
        for &(_, start, end) in &self.days {
            for chunk in self.records[start..end].chunks(factor) {
                let dt: f64 = chunk.iter().map(|r| r.dt).sum();
                let q = if self.has_q {
                    Some(chunk.iter().map(|r| r.q.unwrap_or(0.0) * r.dt).sum::<f64>() / dt)
                } else {
                    None
                };
                out.push(FlowRecord { timestamp: chunk[0].timestamp, dt, dz: chunk.iter().map(|r| r.dz).sum(), q });
            }
        }
        FlowSeries::new(out)
    }
}

pub fn load_flow_csv(path: &Path) -> Result<FlowSeries> {
    let wrap = |message: String| Error::Data { path: path.display().to_string(), message };
    let text = std::fs::read_to_string(path)?;
    if text.trim().is_empty() {
        return Err(wrap("empty file".into()));
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let has_q = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["timestamp", "dt", "dz"] => false,
        ["timestamp", "dt", "dz", "q"] => true,
        _ => return Err(wrap(format!("malformed header '{}', expected timestamp,dt,dz[,q]", header.join(",")))),
    };
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let field = |j: usize| -> Result<f64> {
            row.get(j)
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| wrap(format!("row {}: bad value in column '{}'", i + 1, header[j])))
        };
        records.push(FlowRecord {
            timestamp: field(0)?,
            dt: field(1)?,
            dz: field(2)?,
            q: if has_q { Some(field(3)?) } else { None },
        });
    }
    if records.is_empty() {
        return Err(wrap("empty file".into()));
    }
    FlowSeries::new(records).map_err(|e| match e {
        Error::Invalid(m) => wrap(m),
        other => other,
    })
}

/// Volatility per square-root day: the sample standard deviation of
/// `dz / √dt`.
pub fn estimate_sigma(series: &FlowSeries) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::invalid("need at least two bins to estimate sigma"));
    }
    let xs: Vec<f64> = series.records.iter().map(|r| r.dz / r.dt.sqrt()).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    Ok((xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DailyTheta {
    pub day: i64,
    /// Total inflow over total time.
    pub theta_hat: f64,
    /// Time covered by the day's bins.
    pub duration: f64,
    /// `σ̂ / √duration`, with `σ̂` estimated over the whole series.
    pub se: f64,
}

/// Per-day constant-drift estimate `Σdz / Σdt`.
pub fn estimate_theta_daily(series: &FlowSeries) -> Result<Vec<DailyTheta>> {
    let sigma = if series.len() >= 2 { estimate_sigma(series)? } else { f64::NAN };
    series
        .days
        .iter()
        .map(|&(day, start, end)| {
            let recs = &series.records[start..end];
            if recs.is_empty() {
                return Err(Error::invalid(format!("day {day} is empty")));
            }
            let duration: f64 = recs.iter().map(|r| r.dt).sum();
            let dz: f64 = recs.iter().map(|r| r.dz).sum();
            Ok(DailyTheta { day, theta_hat: dz / duration, duration, se: sigma / duration.sqrt() })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BProxy {
    /// Pearson correlation between flow acceleration and hedge rate.
    pub correlation: f64,
    /// Large-sample standard error `(1 - ρ²)/√(n - 1)`.
    pub se: f64,
    pub n_pairs: usize,
}

/// Correlation between the flow's second difference per unit time squared
/// and the hedge rate.
///
/// Within each day, the second difference centred on the boundary between
/// bins `i-1` and `i` is `(dz_i/dt_i - dz_{i-1}/dt_{i-1}) / ((dt_{i-1} + dt_i)/2)`,
/// and it is paired with the rate `q_{i-1}` traded over the earlier bin.
pub fn estimate_b_proxy(series: &FlowSeries) -> Result<BProxy> {
    if !series.has_q {
        return Err(Error::invalid("b proxy needs the 'q' column"));
    }
    let mut acc = Vec::new();
    let mut rate = Vec::new();
    for &(_, start, end) in &series.days {
        let recs = &series.records[start..end];
        for w in recs.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            acc.push((b.dz / b.dt - a.dz / a.dt) / (0.5 * (a.dt + b.dt)));
            rate.push(a.q.unwrap_or(0.0));
        }
    }
    if acc.len() < 2 {
        return Err(Error::invalid("need at least three bins in a day for the b proxy"));
    }
    let rho = pearson(&acc, &rate).ok_or_else(|| Error::invalid("degenerate hedge series"))?;
    let n = acc.len();
    Ok(BProxy { correlation: rho, se: (1.0 - rho * rho) / ((n - 1) as f64).sqrt(), n_pairs: n })
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Calibration {
    pub sigma_hat: f64,
    pub theta_daily: Vec<DailyTheta>,
    pub b_proxy: Option<BProxy>,
}

impl Calibration {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Sorted daily estimates with their empirical CDF, as CSV
/// (`theta_hat,cdf`).
pub fn write_theta_cdf(path: &Path, daily: &[DailyTheta]) -> Result<()> {
    let mut v: Vec<f64> = daily.iter().map(|d| d.theta_hat).collect();
    v.sort_by(f64::total_cmp);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["theta_hat", "cdf"])?;
    let n = v.len() as f64;
    for (i, x) in v.iter().enumerate() {
        w.write_record([format!("{x:e}"), format!("{:e}", (i + 1) as f64 / n)])?;
    }
    w.flush()?;
    Ok(())
}
