//! Length interpolation and the location-based attention resampler.

use linda_autograd::{Graph, Matrix, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mixing ratio in `[0, 1]`; weight on the first ("a") input.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MixRatio(f64);

impl MixRatio {
    pub fn new(alpha: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&alpha) {
            Ok(Self(alpha))
        } else {
            Err(Error::InvalidAlpha(alpha))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 - alpha`, the weight on the second input.
    pub fn complement(self) -> f64 {
        1.0 - self.0
    }
}

impl TryFrom<f64> for MixRatio {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MixRatio> for f64 {
    fn from(m: MixRatio) -> f64 {
        m.0
    }
}

/// Interpolated target length `ceil(alpha * la + (1 - alpha) * lb)`.
///
/// Values within `1e-9` of an integer are treated as that integer, so decimal
/// ratios such as `0.1` do not pick up a spurious extra position from binary
/// rounding (e.g. `0.1 * 11 + 0.9 * 1` evaluates to `2.0000000000000004`).
pub fn interp_length(la: usize, lb: usize, alpha: MixRatio) -> usize {
    assert!(la >= 1 && lb >= 1, "sequence lengths must be positive");
    let a = alpha.value();
    let exact = a * la as f64 + (1.0 - a) * lb as f64;
    let nearest = exact.round();
    let len = if (exact - nearest).abs() < 1e-9 {
        nearest
    } else {
        exact.ceil()
    };
    (len as usize).clamp(la.min(lb), la.max(lb))
}

/// Squared offsets `(k - (L / L̃) j)^2` with 1-based `k` (source) and `j`
/// (target) positions; rows index targets.
pub(crate) fn squared_offsets(source_len: usize, target_len: usize) -> Matrix {
    let ratio = source_len as f64 / target_len as f64;
    Matrix::from_shape_fn((target_len, source_len), |(j, k)| {
        let center = ratio * (j + 1) as f64;
        let diff = (k + 1) as f64 - center;
        diff * diff
    })
}

/// Attention weights `w[j][k] = softmax_k(-(k - (L/L̃) j)^2 / (2 sigma^2))`.
pub fn length_weights(source_len: usize, target_len: usize, sigma: f64) -> Matrix {
    assert!(source_len >= 1 && target_len >= 1, "lengths must be positive");
    assert!(sigma > 0.0, "sigma must be positive");
    let coef = -1.0 / (2.0 * sigma * sigma);
    let mut w = squared_offsets(source_len, target_len).mapv(|d| d * coef);
    for mut row in w.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    w
}

/// Resamples the rows of `hidden` to `target_len` rows.
pub fn convert_length(hidden: &Matrix, target_len: usize, sigma: f64) -> Matrix {
    assert!(hidden.nrows() >= 1, "cannot resample an empty sequence");
    length_weights(hidden.nrows(), target_len, sigma).dot(hidden)
}

/// Differentiable form of [`convert_length`]; `sigma` is a 1x1 node.
pub fn convert_length_graph(g: &mut Graph<'_>, hidden: Var, target_len: usize, sigma: Var) -> Var {
    let source_len = g.shape(hidden).0;
    let offsets = g.constant(squared_offsets(source_len, target_len));
    let sq = g.square(sigma);
    let inv = g.recip(sq);
    let coef = g.scale(inv, -0.5);
    let logits = g.scale_by(offsets, coef);
    let weights = g.softmax_rows(logits);
    g.matmul(weights, hidden)
}

/// Encoder output for one sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSequence {
    pub vectors: Matrix,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }
}

/// Mixed, length-matched decoder memory.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolatedState {
    pub vectors: Matrix,
    pub target_length: usize,
    pub alpha: MixRatio,
    pub source_lengths: (usize, usize),
}

/// `alpha * a + (1 - alpha) * b`, passing inputs through untouched at the
/// endpoints.
pub fn interpolate_states(
    a: &Matrix,
    b: &Matrix,
    alpha: MixRatio,
    source_lengths: (usize, usize),
) -> Result<InterpolatedState> {
    if a.dim() != b.dim() {
        return Err(Error::Shape(format!(
            "interpolate_states: {:?} vs {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let vectors = match alpha.value() {
        x if x == 1.0 => a.clone(),
        x if x == 0.0 => b.clone(),
        x => a * x + b * (1.0 - x),
    };
    Ok(InterpolatedState {
        target_length: vectors.nrows(),
        vectors,
        alpha,
        source_lengths,
    })
}

/// Graph form of [`interpolate_states`].
pub fn interpolate_graph(g: &mut Graph<'_>, a: Var, b: Var, alpha: MixRatio) -> Var {
    match alpha.value() {
        x if x == 1.0 => a,
        x if x == 0.0 => b,
        x => {
            let sa = g.scale(a, x);
            let sb = g.scale(b, 1.0 - x);
            g.add(sa, sb)
        }
    }
}
