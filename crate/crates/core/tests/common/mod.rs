use toxflow::control::Mat8;

/// exp(M) by scaling and squaring with a degree-18 Taylor polynomial.
pub fn expm(m: &Mat8) -> Mat8 {
    let norm: f64 = (0..8).map(|i| m.row(i).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.25 { (norm / 0.25).log2().ceil() as i32 } else { 0 };
    let a = m / 2f64.powi(squarings);
    let mut term = Mat8::identity();
    let mut sum = Mat8::identity();
    for k in 1..=18 {
        term = term * a / k as f64;
        sum += term;
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    sum
}

/// Largest entrywise gap relative to the largest entry of `reference`.
pub fn max_rel(a: &Mat8, reference: &Mat8) -> f64 {
    (a - reference).amax() / reference.amax()
}
