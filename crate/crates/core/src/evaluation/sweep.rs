use std::fmt::Write as _;

use crate::corpus::TokenSequence;
use crate::decoding::{interpolate_text, DecodeConfig};
use crate::error::{Error, Result};
use crate::model::{InterpModel, MixRatio};

use super::metrics::unigram_precision;

/// Mean unigram precision of decodes against each source, per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecisionCurve {
    /// Ascending.
    pub alphas: Vec<f64>,
    pub mean_a: Vec<f64>,
    pub std_a: Vec<f64>,
    pub mean_b: Vec<f64>,
    pub std_b: Vec<f64>,
    pub n_pairs: usize,
}

/// Population mean and standard deviation.
fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn sorted_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.is_empty() {
        return Err(Error::Invalid("alpha grid is empty".into()));
    }
    let mut alphas = grid
        .iter()
        .map(|&a| MixRatio::new(a).map(MixRatio::value))
        .collect::<Result<Vec<_>>>()?;
    alphas.sort_by(f64::total_cmp);
    alphas.dedup();
    Ok(alphas)
}

/// Precision of one decode against both sources. An empty decode scores 0
/// against each.
fn score(
    model: &InterpModel,
    a: &TokenSequence,
    b: &TokenSequence,
    alpha: f64,
    cfg: &DecodeConfig,
) -> Result<(f64, f64)> {
    let out = interpolate_text(model, a, b, MixRatio::new(alpha)?, cfg)?;
    let prec = |r: &TokenSequence| match unigram_precision(&out.tokens, r.ids()) {
        Ok(p) => Ok(p),
        Err(Error::EmptyHypothesis) => Ok(0.0),
        Err(e) => Err(e),
    };
    Ok((prec(a)?, prec(b)?))
}

/// Decodes every pair at every grid point and averages precision against
/// `x^a` and `x^b`.
pub fn alpha_sweep(
    model: &InterpModel,
    pairs: &[(TokenSequence, TokenSequence)],
    grid: &[f64],
    cfg: &DecodeConfig,
) -> Result<PrecisionCurve> {
    alpha_sweep_parallel(model, pairs, grid, cfg, 1)
}

/// [`alpha_sweep`] spread over `workers` threads. Results are identical for
/// any worker count.
pub fn alpha_sweep_parallel(
    model: &InterpModel,
    pairs: &[(TokenSequence, TokenSequence)],
    grid: &[f64],
    cfg: &DecodeConfig,
    workers: usize,
) -> Result<PrecisionCurve> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    cfg.validate()?;
    let alphas = sorted_grid(grid)?;
    let jobs: Vec<(usize, usize)> = (0..alphas.len())
        .flat_map(|g| (0..pairs.len()).map(move |p| (g, p)))
        .collect();
    let workers = workers.clamp(1, jobs.len());
    let chunk = jobs.len().div_ceil(workers);
    let results: Vec<Result<(f64, f64)>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                let alphas = &alphas;
                s.spawn(move || {
                    part.iter()
                        .map(|&(g, p)| score(model, &pairs[p].0, &pairs[p].1, alphas[g], cfg))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    });

    let mut curve = PrecisionCurve {
        alphas: alphas.clone(),
        mean_a: Vec::new(),
        std_a: Vec::new(),
        mean_b: Vec::new(),
        std_b: Vec::new(),
        n_pairs: pairs.len(),
    };
    let mut iter = results.into_iter();
    for _ in &alphas {
        let mut pa = Vec::with_capacity(pairs.len());
        let mut pb = Vec::with_capacity(pairs.len());
        for r in iter.by_ref().take(pairs.len()) {
            let (a, b) = r?;
            pa.push(a);
            pb.push(b);
        }
        let (ma, sa) = mean_std(&pa);
        let (mb, sb) = mean_std(&pb);
        curve.mean_a.push(ma);
        curve.std_a.push(sa);
        curve.mean_b.push(mb);
        curve.std_b.push(sb);
    }
    Ok(curve)
}

impl PrecisionCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,mean_prec_a,std_a,mean_prec_b,std_b,n_pairs\n");
        for i in 0..self.alphas.len() {
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{}",
                self.alphas[i], self.mean_a[i], self.std_a[i], self.mean_b[i], self.std_b[i], self.n_pairs
            );
        }
        out
    }

    /// Line plot of both precision series against α.
    pub fn to_svg(&self) -> String {
        let (w, h, m) = (480.0, 320.0, 48.0);
        let x = |a: f64| m + a * (w - 2.0 * m);
        let y = |p: f64| h - m - p * (h - 2.0 * m);
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
             <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n",
            b = h - m,
            r = w - m
        );
        for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let _ = writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{t}</text>\n<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{t}</text>",
                x(t),
                h - m + 16.0,
                m - 6.0,
                y(t) + 4.0
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">alpha</text>\n<text x=\"14\" y=\"{:.1}\" transform=\"rotate(-90 14 {:.1})\" text-anchor=\"middle\">unigram precision</text>",
            w / 2.0,
            h - 10.0,
            h / 2.0,
            h / 2.0
        );
        for (series, color, label, row) in [
            (&self.mean_a, "#1f77b4", "vs x_a", 0.0),
            (&self.mean_b, "#d62728", "vs x_b", 1.0),
        ] {
            let points: Vec<String> = self
                .alphas
                .iter()
                .zip(series.iter())
                .map(|(&a, &p)| format!("{:.1},{:.1}", x(a), y(p)))
                .collect();
            let _ = writeln!(
                svg,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
                points.join(" ")
            );
            for (&a, &p) in self.alphas.iter().zip(series.iter()) {
                let _ = writeln!(
                    svg,
                    "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\" fill=\"{color}\"/>",
                    x(a),
                    y(p)
                );
            }
            let ly = m - 24.0 + row * 14.0;
            let _ = writeln!(
                svg,
                "<line x1=\"{:.1}\" y1=\"{ly:.1}\" x2=\"{:.1}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n<text x=\"{:.1}\" y=\"{:.1}\">{label}</text>",
                w - m - 80.0,
                w - m - 60.0,
                w - m - 54.0,
                ly + 4.0
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}
