use std::collections::HashMap;

use crate::corpus::is_special;
use crate::error::{Error, Result};

/// Clipped unigram precision of `hyp` against `reference`, ignoring special
/// tokens on both sides.
pub fn unigram_precision(hyp: &[usize], reference: &[usize]) -> Result<f64> {
    let content = |s: &[usize]| -> Vec<usize> { s.iter().copied().filter(|&t| !is_special(t)).collect() };
    let hyp = content(hyp);
    if hyp.is_empty() {
        return Err(Error::EmptyHypothesis);
    }
    let mut ref_counts: HashMap<usize, usize> = HashMap::new();
    for t in content(reference) {
        *ref_counts.entry(t).or_default() += 1;
    }
    let mut hyp_counts: HashMap<usize, usize> = HashMap::new();
    for &t in &hyp {
        *hyp_counts.entry(t).or_default() += 1;
    }
    let matched: usize = hyp_counts
        .iter()
        .map(|(t, &c)| c.min(ref_counts.get(t).copied().unwrap_or(0)))
        .sum();
    Ok(matched as f64 / hyp.len() as f64)
}

/// Average ranks (1-based), ties sharing the mean of their positions.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut out = vec![0.0; xs.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && xs[order[end + 1]] == xs[order[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &k in &order[start..=end] {
            out[k] = avg;
        }
        start = end + 1;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Correlation {
    pub rho: f64,
    /// Set when one series is constant and `rho` was defined as 0.
    pub degenerate: bool,
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("series lengths {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::Invalid("rank correlation needs at least two points".into()));
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Correlation {
            rho: 0.0,
            degenerate: true,
        });
    }
    Ok(Correlation {
        rho: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MonotonicityScore {
    /// Correlation of precision against `x^a` with α; positive when faithful.
    pub a: Correlation,
    /// Correlation of precision against `x^b` with α; negative when faithful.
    pub b: Correlation,
}

pub fn monotonicity_score(curve: &super::PrecisionCurve) -> Result<MonotonicityScore> {
    if curve.alphas.len() < 3 {
        return Err(Error::Invalid(format!(
            "monotonicity needs at least 3 grid points, got {}",
            curve.alphas.len()
        )));
    }
    Ok(MonotonicityScore {
        a: spearman(&curve.alphas, &curve.mean_a)?,
        b: spearman(&curve.alphas, &curve.mean_b)?,
    })
}
