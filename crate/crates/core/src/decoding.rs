//! Generating interpolated text: beam search, greedy decoding and ancestral
//! sampling.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{TokenSequence, EOS};
use crate::error::{Error, Result};
use crate::model::{InterpModel, MemoryCache, MixRatio};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    Beam,
    Greedy,
    Sample,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "beam" => Ok(Self::Beam),
            "greedy" => Ok(Self::Greedy),
            "sample" => Ok(Self::Sample),
            other => Err(Error::Config(format!(
                "decode strategy must be beam, greedy or sample, got `{other}`"
            ))),
        }
    }
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Beam => "beam",
            Strategy::Greedy => "greedy",
            Strategy::Sample => "sample",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeConfig {
    pub strategy: Strategy,
    pub beam_size: usize,
    /// Upper bound on generated tokens (EOS included); `None` means
    /// `2 * max(La, Lb) + 2`.
    pub max_decode_length: Option<usize>,
    /// Exponent of the length normalization applied to beam scores
    /// (0 scores by raw summed log-probability).
    pub length_penalty: f64,
    pub seed: u64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Beam,
            beam_size: 4,
            max_decode_length: None,
            length_penalty: 0.0,
            seed: 0,
        }
    }
}

impl DecodeConfig {
    pub fn greedy() -> Self {
        Self {
            strategy: Strategy::Greedy,
            beam_size: 1,
            ..Self::default()
        }
    }

    pub fn beam(beam_size: usize) -> Self {
        Self {
            beam_size,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(Error::Config("beam_size must be at least 1".into()));
        }
        if self.max_decode_length == Some(0) {
            return Err(Error::Config("max_decode_length must be at least 1".into()));
        }
        if !self.length_penalty.is_finite() {
            return Err(Error::Config("length_penalty must be finite".into()));
        }
        Ok(())
    }

    fn max_len(&self, la: usize, lb: usize) -> usize {
        self.max_decode_length.unwrap_or(2 * la.max(lb) + 2)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    /// Generated content tokens (EOS excluded); may be empty.
    pub tokens: Vec<usize>,
    /// Summed log-probability of the generated stream, EOS included when
    /// the sequence finished.
    pub total_logprob: f64,
    pub alpha: MixRatio,
    /// True when EOS was produced; false when cut at the length bound.
    pub finished: bool,
    pub source_ids: Option<(usize, usize)>,
}

#[derive(Clone, Debug)]
struct Hypothesis {
    tokens: Vec<usize>,
    score: f64,
    finished: bool,
}

impl Hypothesis {
    /// Generated stream length, counting EOS.
    fn stream_len(&self) -> usize {
        self.tokens.len() + usize::from(self.finished)
    }

    fn normalized(&self, length_penalty: f64) -> f64 {
        if length_penalty == 0.0 {
            self.score
        } else {
            self.score / (self.stream_len().max(1) as f64).powf(length_penalty)
        }
    }
}

/// Higher score first; equal scores prefer the lexicographically smaller
/// token stream (lower ids win).
fn rank(a: &Hypothesis, b: &Hypothesis, length_penalty: f64) -> Ordering {
    b.normalized(length_penalty)
        .partial_cmp(&a.normalized(length_penalty))
        .unwrap_or(Ordering::Equal)
        .then_with(|| stream(a).cmp(stream(b)))
}

fn stream(h: &Hypothesis) -> impl Iterator<Item = usize> + '_ {
    h.tokens
        .iter()
        .copied()
        .chain(h.finished.then_some(EOS))
}

/// Argmax with ties broken by the lower token id.
fn argmax(logprobs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logprobs.iter().enumerate() {
        if v > logprobs[best] {
            best = i;
        }
    }
    best
}

fn greedy(model: &InterpModel, memory: &MemoryCache, max_len: usize) -> Hypothesis {
    let mut h = Hypothesis {
        tokens: Vec::new(),
        score: 0.0,
        finished: false,
    };
    while h.stream_len() < max_len {
        let lp = model.next_token_logprobs(memory, &h.tokens);
        let next = argmax(&lp);
        h.score += lp[next];
        if next == EOS {
            h.finished = true;
            break;
        }
        h.tokens.push(next);
    }
    h
}

fn beam(
    model: &InterpModel,
    memory: &MemoryCache,
    max_len: usize,
    beam_size: usize,
    length_penalty: f64,
) -> Hypothesis {
    let mut alive = vec![Hypothesis {
        tokens: Vec::new(),
        score: 0.0,
        finished: false,
    }];
    let mut done: Vec<Hypothesis> = Vec::new();
    for _ in 0..max_len {
        if alive.is_empty() {
            break;
        }
        let prefixes: Vec<&[usize]> = alive.iter().map(|h| h.tokens.as_slice()).collect();
        let dists = model.next_token_logprobs_batch(memory, &prefixes);
        let mut candidates = Vec::with_capacity(alive.len() * beam_size);
        for (h, lp) in alive.iter().zip(&dists) {
            // Only each parent's top `beam_size` extensions can survive.
            let mut order: Vec<usize> = (0..lp.len()).collect();
            order.sort_by(|&x, &y| lp[y].partial_cmp(&lp[x]).unwrap_or(Ordering::Equal).then(x.cmp(&y)));
            for &t in order.iter().take(beam_size) {
                let mut tokens = h.tokens.clone();
                let finished = t == EOS;
                if !finished {
                    tokens.push(t);
                }
                candidates.push(Hypothesis {
                    tokens,
                    score: h.score + lp[t],
                    finished,
                });
            }
        }
        candidates.sort_by(|a, b| rank(a, b, length_penalty));
        candidates.truncate(beam_size);
        alive.clear();
        for c in candidates {
            if c.finished {
                done.push(c);
            } else {
                alive.push(c);
            }
        }
        // With raw log-probability scores, extending a prefix can only lower
        // its score, so nothing alive can overtake the best finished one.
        if length_penalty == 0.0 {
            if let (Some(best_done), Some(best_alive)) = (
                done.iter().map(|h| h.score).reduce(f64::max),
                alive.iter().map(|h| h.score).reduce(f64::max),
            ) {
                if best_done >= best_alive {
                    break;
                }
            }
        }
    }
    // Prefixes still open at the bound are returned truncated.
    done.extend(alive);
    done.sort_by(|a, b| rank(a, b, length_penalty));
    done.into_iter().next().expect("at least one hypothesis")
}

fn sample(model: &InterpModel, memory: &MemoryCache, max_len: usize, seed: u64) -> Hypothesis {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = Hypothesis {
        tokens: Vec::new(),
        score: 0.0,
        finished: false,
    };
    while h.stream_len() < max_len {
        let lp = model.next_token_logprobs(memory, &h.tokens);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut next = lp.len() - 1;
        for (i, v) in lp.iter().enumerate() {
            acc += v.exp();
            if u < acc {
                next = i;
                break;
            }
        }
        h.score += lp[next];
        if next == EOS {
            h.finished = true;
            break;
        }
        h.tokens.push(next);
    }
    h
}

/// Encodes both inputs, mixes them at `alpha` and decodes.
///
/// Beam search also runs the greedy path and returns whichever scores
/// higher, so its result never scores below greedy decoding.
pub fn interpolate_text(
    model: &InterpModel,
    a: &TokenSequence,
    b: &TokenSequence,
    alpha: MixRatio,
    cfg: &DecodeConfig,
) -> Result<DecodeResult> {
    cfg.validate()?;
    let state = model.interpolated_state(a, b, alpha)?;
    let memory = model.memory_cache(&state);
    let max_len = cfg.max_len(a.len(), b.len());
    let best = match cfg.strategy {
        Strategy::Greedy => greedy(model, &memory, max_len),
        Strategy::Sample => sample(model, &memory, max_len, cfg.seed),
        Strategy::Beam if cfg.beam_size == 1 => greedy(model, &memory, max_len),
        Strategy::Beam => {
            let from_beam = beam(model, &memory, max_len, cfg.beam_size, cfg.length_penalty);
            let from_greedy = greedy(model, &memory, max_len);
            if rank(&from_greedy, &from_beam, cfg.length_penalty) == Ordering::Less {
                from_greedy
            } else {
                from_beam
            }
        }
    };
    Ok(DecodeResult {
        tokens: best.tokens,
        total_logprob: best.score,
        alpha,
        finished: best.finished,
        source_ids: None,
    })
}

/// One decode request for [`batch_interpolate`].
#[derive(Clone, Debug)]
pub struct InterpolationRequest {
    pub a: TokenSequence,
    pub b: TokenSequence,
    pub alpha: MixRatio,
    pub source_ids: Option<(usize, usize)>,
}

/// [`interpolate_text`] over a list, preserving order. Errors carry the
/// index of the failing element.
pub fn batch_interpolate(
    model: &InterpModel,
    requests: &[InterpolationRequest],
    cfg: &DecodeConfig,
) -> Result<Vec<DecodeResult>> {
    if requests.is_empty() {
        return Err(Error::EmptyInput);
    }
    requests
        .iter()
        .enumerate()
        .map(|(index, r)| {
            interpolate_text(model, &r.a, &r.b, r.alpha, cfg)
                .map(|mut res| {
                    res.source_ids = r.source_ids;
                    res
                })
                .map_err(|e| Error::Item {
                    index,
                    source: Box::new(e),
                })
        })
        .collect()
}
