use serde::Serialize;

/// A Monte Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Estimate { mean, se: (var / n).sqrt() }
    }

    /// Mean of `a - b` over paired samples.
    pub fn paired(a: &[f64], b: &[f64]) -> Self {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        Self::of(&d)
    }

    /// Mean in units of its standard error.
    pub fn z(&self) -> f64 {
        if self.se == 0.0 {
            if self.mean == 0.0 { 0.0 } else { self.mean.signum() * f64::INFINITY }
        } else {
            self.mean / self.se
        }
    }
}

/// Sample moments of a P&L distribution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub se: f64,
    pub variance: f64,
    pub skew: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
        let variance = m2 * n / (n - 1.0);
        let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
        Moments { mean, se: (variance / n).sqrt(), variance, skew }
    }
}

/// `var(a) - var(b)` with a delta-method standard error that accounts for
/// the pairing of samples.
pub fn variance_gap(a: &[f64], b: &[f64]) -> Estimate {
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    let infl: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma).powi(2) - (y - mb).powi(2)).collect();
    let mut e = Estimate::of(&infl);
    let n = a.len() as f64;
    // unbiased variances differ from the mean of squared deviations by n/(n-1)
    e.mean *= n / (n - 1.0);
    e
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: u64,
}

/// Equal-width histogram spanning the sample range.
pub fn histogram(xs: &[f64], n_bins: usize) -> Vec<Bin> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if xs.is_empty() || n_bins == 0 {
        return Vec::new();
    }
    let width = if hi > lo { (hi - lo) / n_bins as f64 } else { 1.0 };
    let mut counts = vec![0u64; n_bins];
    for x in xs {
        let i = (((x - lo) / width) as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, count)| Bin {
            bin_left: lo + i as f64 * width,
            bin_right: if i + 1 == n_bins && hi > lo { hi } else { lo + (i + 1) as f64 * width },
            count,
        })
        .collect()
}
