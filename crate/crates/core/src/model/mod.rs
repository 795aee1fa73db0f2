//! The interpolation network.
//!
//! Each input is encoded independently by a pre-norm transformer encoder.
//! The two encodings are resampled to a shared length by the location-based
//! attention in [`length`], mixed linearly with the ratio α, and used as the
//! cross-attention memory of a causal transformer decoder. Token embeddings
//! are shared by the encoder input, the decoder input and the output layer.

pub mod checkpoint;
pub mod length;

use linda_autograd::{Graph, Matrix, ParamId, ParamStore, Var};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::corpus::{TokenSequence, BOS, EOS};
use crate::error::{Error, Result};
pub use length::{
    convert_length, interp_length, interpolate_states, length_weights, EncodedSequence,
    InterpolatedState, MixRatio,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub ffn_dim: usize,
    /// Initial value of the length-converter spread.
    pub init_sigma: f64,
}

impl ModelConfig {
    /// Desk-scale default: d=128, 4 heads, 2+2 layers.
    pub fn toy(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            d_model: 128,
            n_heads: 4,
            encoder_layers: 2,
            decoder_layers: 2,
            ffn_dim: 256,
            init_sigma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.vocab_size < crate::corpus::NUM_SPECIAL + 1 {
            return bad("vocab_size too small");
        }
        if self.d_model == 0 || self.n_heads == 0 || self.d_model % self.n_heads != 0 {
            return bad("d_model must be a positive multiple of n_heads");
        }
        if self.ffn_dim == 0 {
            return bad("ffn_dim must be positive");
        }
        if !(self.init_sigma > 0.0 && self.init_sigma.is_finite()) {
            return bad("init_sigma must be positive");
        }
        Ok(())
    }
}

/// Unconstrained value whose softplus equals `sigma`.
pub fn sigma_to_raw(sigma: f64) -> f64 {
    // softplus^-1(s) = ln(e^s - 1)
    if sigma > 30.0 {
        sigma
    } else {
        sigma.exp_m1().ln()
    }
}

pub fn raw_to_sigma(raw: f64) -> f64 {
    if raw > 30.0 {
        raw
    } else {
        raw.exp().ln_1p()
    }
}

#[derive(Clone, Debug)]
struct Linear {
    weight: ParamId,
    bias: ParamId,
}

#[derive(Clone, Debug)]
struct Norm {
    gain: ParamId,
    bias: ParamId,
}

#[derive(Clone, Debug)]
struct Attention {
    query: Linear,
    key: Linear,
    value: Linear,
    out: Linear,
}

#[derive(Clone, Debug)]
struct FeedForward {
    up: Linear,
    down: Linear,
}

#[derive(Clone, Debug)]
struct EncoderLayer {
    norm_attn: Norm,
    attn: Attention,
    norm_ffn: Norm,
    ffn: FeedForward,
}

#[derive(Clone, Debug)]
struct DecoderLayer {
    norm_self: Norm,
    self_attn: Attention,
    norm_cross: Norm,
    cross_attn: Attention,
    norm_ffn: Norm,
    ffn: FeedForward,
}

#[derive(Clone, Debug)]
struct Layout {
    embedding: ParamId,
    encoder: Vec<EncoderLayer>,
    encoder_norm: Norm,
    decoder: Vec<DecoderLayer>,
    decoder_norm: Norm,
    output_bias: ParamId,
    sigma_raw: ParamId,
}

/// Parameters are either freshly initialized or resolved by name from a store.
trait Builder {
    fn tensor(&mut self, name: String, rows: usize, cols: usize, init: Init) -> Result<ParamId>;
}

#[derive(Clone, Copy)]
enum Init {
    Zeros,
    Ones,
    Normal(f64),
    Xavier,
    Constant(f64),
}

struct Fresh<'a, R: Rng> {
    store: ParamStore,
    rng: &'a mut R,
}

impl<R: Rng> Builder for Fresh<'_, R> {
    fn tensor(&mut self, name: String, rows: usize, cols: usize, init: Init) -> Result<ParamId> {
        let value = match init {
            Init::Zeros => Matrix::zeros((rows, cols)),
            Init::Ones => Matrix::ones((rows, cols)),
            Init::Constant(c) => Matrix::from_elem((rows, cols), c),
            Init::Normal(std) => {
                let dist = Normal::new(0.0, std).expect("valid std");
                Matrix::from_shape_simple_fn((rows, cols), || dist.sample(self.rng))
            }
            Init::Xavier => {
                let a = (6.0 / (rows + cols) as f64).sqrt();
                let dist = Uniform::new_inclusive(-a, a).expect("valid bound");
                Matrix::from_shape_simple_fn((rows, cols), || dist.sample(self.rng))
            }
        };
        Ok(self.store.add(name, value))
    }
}

struct Resolve<'a> {
    store: &'a ParamStore,
}

impl Builder for Resolve<'_> {
    fn tensor(&mut self, name: String, rows: usize, cols: usize, _: Init) -> Result<ParamId> {
        let id = self
            .store
            .find(&name)
            .ok_or_else(|| Error::Checkpoint(format!("missing parameter `{name}`")))?;
        let dim = self.store.get(id).dim();
        if dim != (rows, cols) {
            return Err(Error::Checkpoint(format!(
                "parameter `{name}` has shape {dim:?}, expected {:?}",
                (rows, cols)
            )));
        }
        Ok(id)
    }
}

fn build_layout(config: &ModelConfig, b: &mut dyn Builder) -> Result<Layout> {
    let d = config.d_model;
    let linear = |b: &mut dyn Builder, name: &str, i: usize, o: usize| -> Result<Linear> {
        Ok(Linear {
            weight: b.tensor(format!("{name}.weight"), i, o, Init::Xavier)?,
            bias: b.tensor(format!("{name}.bias"), 1, o, Init::Zeros)?,
        })
    };
    let norm = |b: &mut dyn Builder, name: &str| -> Result<Norm> {
        Ok(Norm {
            gain: b.tensor(format!("{name}.gain"), 1, d, Init::Ones)?,
            bias: b.tensor(format!("{name}.bias"), 1, d, Init::Zeros)?,
        })
    };
    let attention = |b: &mut dyn Builder, name: &str| -> Result<Attention> {
        Ok(Attention {
            query: linear(b, &format!("{name}.query"), d, d)?,
            key: linear(b, &format!("{name}.key"), d, d)?,
            value: linear(b, &format!("{name}.value"), d, d)?,
            out: linear(b, &format!("{name}.out"), d, d)?,
        })
    };
    let ffn = |b: &mut dyn Builder, name: &str| -> Result<FeedForward> {
        Ok(FeedForward {
            up: linear(b, &format!("{name}.up"), d, config.ffn_dim)?,
            down: linear(b, &format!("{name}.down"), config.ffn_dim, d)?,
        })
    };

    let embedding = b.tensor(
        "embedding".into(),
        config.vocab_size,
        d,
        Init::Normal(1.0 / (d as f64).sqrt()),
    )?;
    let mut encoder = Vec::with_capacity(config.encoder_layers);
    for i in 0..config.encoder_layers {
        let p = format!("encoder.{i}");
        encoder.push(EncoderLayer {
            norm_attn: norm(b, &format!("{p}.norm_attn"))?,
            attn: attention(b, &format!("{p}.attn"))?,
            norm_ffn: norm(b, &format!("{p}.norm_ffn"))?,
            ffn: ffn(b, &format!("{p}.ffn"))?,
        });
    }
    let encoder_norm = norm(b, "encoder.norm")?;
    let mut decoder = Vec::with_capacity(config.decoder_layers);
    for i in 0..config.decoder_layers {
        let p = format!("decoder.{i}");
        decoder.push(DecoderLayer {
            norm_self: norm(b, &format!("{p}.norm_self"))?,
            self_attn: attention(b, &format!("{p}.self_attn"))?,
            norm_cross: norm(b, &format!("{p}.norm_cross"))?,
            cross_attn: attention(b, &format!("{p}.cross_attn"))?,
            norm_ffn: norm(b, &format!("{p}.norm_ffn"))?,
            ffn: ffn(b, &format!("{p}.ffn"))?,
        });
    }
    let decoder_norm = norm(b, "decoder.norm")?;
    let output_bias = b.tensor("output.bias".into(), 1, config.vocab_size, Init::Zeros)?;
    let sigma_raw = b.tensor(
        "length.sigma_raw".into(),
        1,
        1,
        Init::Constant(sigma_to_raw(config.init_sigma)),
    )?;
    Ok(Layout {
        embedding,
        encoder,
        encoder_norm,
        decoder,
        decoder_norm,
        output_bias,
        sigma_raw,
    })
}

/// Sinusoidal position table, `rows x d`.
fn positions(rows: usize, d: usize) -> Matrix {
    Matrix::from_shape_fn((rows, d), |(pos, i)| {
        let pair = (i / 2) as f64;
        let angle = pos as f64 / 10_000f64.powf(2.0 * pair / d as f64);
        if i % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

fn causal_mask(n: usize) -> Matrix {
    Matrix::from_shape_fn((n, n), |(r, c)| {
        if c > r {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    })
}

/// Cross-attention keys and values of the decoder memory, one pair per layer.
#[derive(Clone, Debug)]
pub struct MemoryCache {
    pub(crate) layers: Vec<(Matrix, Matrix)>,
}

/// Graph nodes produced by [`InterpModel::forward_pair`].
#[derive(Clone, Copy, Debug)]
pub struct PairNodes {
    /// Pre-noise encoder outputs.
    pub hidden_a: Var,
    pub hidden_b: Var,
    /// Interpolated decoder memory.
    pub state: Var,
    pub target_length: usize,
}

/// The interpolation model: configuration plus all trainable parameters,
/// including the raw (pre-softplus) length-converter spread.
#[derive(Clone, Debug)]
pub struct InterpModel {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
    position_table: Matrix,
}

const POSITION_ROWS: usize = 512;

impl InterpModel {
    pub fn new<R: Rng>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut fresh = Fresh {
            store: ParamStore::new(),
            rng,
        };
        let layout = build_layout(&config, &mut fresh)?;
        Ok(Self {
            position_table: positions(POSITION_ROWS, config.d_model),
            params: fresh.store,
            layout,
            config,
        })
    }

    /// Rebuilds a model around stored parameters, checking names and shapes.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let layout = build_layout(&config, &mut Resolve { store: &params })?;
        if params.len() != count_params(&config) {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter arrays, found {}",
                count_params(&config),
                params.len()
            )));
        }
        Ok(Self {
            position_table: positions(POSITION_ROWS, config.d_model),
            params,
            layout,
            config,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Current length-converter spread (always positive).
    pub fn sigma(&self) -> f64 {
        raw_to_sigma(self.params.get(self.layout.sigma_raw)[[0, 0]])
    }

    pub fn sigma_raw_param(&self) -> ParamId {
        self.layout.sigma_raw
    }

    fn check_ids(&self, ids: &[usize]) -> Result<()> {
        match ids.iter().find(|&&id| id >= self.config.vocab_size) {
            Some(&id) => Err(Error::TokenOutOfRange {
                id,
                size: self.config.vocab_size,
            }),
            None => Ok(()),
        }
    }

    fn position_rows(&self, n: usize) -> Matrix {
        if n <= POSITION_ROWS {
            self.position_table
                .slice(linda_autograd::ndarray::s![..n, ..])
                .to_owned()
        } else {
            positions(n, self.config.d_model)
        }
    }

    fn embed(&self, g: &mut Graph<'_>, ids: &[usize]) -> Var {
        let table = g.param(self.layout.embedding);
        let rows = g.gather(table, ids);
        let scaled = g.scale(rows, (self.config.d_model as f64).sqrt());
        let pos = g.constant(self.position_rows(ids.len()));
        g.add(scaled, pos)
    }

    fn linear(&self, g: &mut Graph<'_>, x: Var, p: &Linear) -> Var {
        let w = g.param(p.weight);
        let b = g.param(p.bias);
        let y = g.matmul(x, w);
        g.add_row(y, b)
    }

    fn norm(&self, g: &mut Graph<'_>, x: Var, p: &Norm) -> Var {
        let gain = g.param(p.gain);
        let bias = g.param(p.bias);
        g.layer_norm(x, gain, bias)
    }

    fn ffn(&self, g: &mut Graph<'_>, x: Var, p: &FeedForward) -> Var {
        let h = self.linear(g, x, &p.up);
        let h = g.gelu(h);
        self.linear(g, h, &p.down)
    }

    /// Multi-head attention of `queries` over precomputed `keys`/`values`.
    fn attend(
        &self,
        g: &mut Graph<'_>,
        queries: Var,
        keys: Var,
        values: Var,
        p: &Attention,
        causal: bool,
    ) -> Var {
        let heads = self.config.n_heads;
        let dh = self.config.d_model / heads;
        let q = self.linear(g, queries, &p.query);
        let q = g.scale(q, 1.0 / (dh as f64).sqrt());
        let mask = causal.then(|| {
            let n = g.shape(q).0;
            g.constant(causal_mask(n))
        });
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = g.slice_cols(q, h * dh, dh);
            let kh = g.slice_cols(keys, h * dh, dh);
            let vh = g.slice_cols(values, h * dh, dh);
            let mut scores = g.matmul_nt(qh, kh);
            if let Some(m) = mask {
                scores = g.add(scores, m);
            }
            let weights = g.softmax_rows(scores);
            outs.push(g.matmul(weights, vh));
        }
        let joined = if heads == 1 {
            outs[0]
        } else {
            g.concat_cols(&outs)
        };
        self.linear(g, joined, &p.out)
    }

    fn self_attention(&self, g: &mut Graph<'_>, x: Var, p: &Attention, causal: bool) -> Var {
        let k = self.linear(g, x, &p.key);
        let v = self.linear(g, x, &p.value);
        self.attend(g, x, k, v, p, causal)
    }

    /// Encoder forward pass on the tape; one output row per input token.
    pub fn encode_graph(&self, g: &mut Graph<'_>, ids: &[usize]) -> Var {
        let mut x = self.embed(g, ids);
        for layer in &self.layout.encoder {
            let h = self.norm(g, x, &layer.norm_attn);
            let h = self.self_attention(g, h, &layer.attn, false);
            x = g.add(x, h);
            let h = self.norm(g, x, &layer.norm_ffn);
            let h = self.ffn(g, h, &layer.ffn);
            x = g.add(x, h);
        }
        self.norm(g, x, &self.layout.encoder_norm)
    }

    /// Softplus of the raw spread parameter, as a 1x1 node.
    pub fn sigma_graph(&self, g: &mut Graph<'_>) -> Var {
        let raw = g.param(self.layout.sigma_raw);
        g.softplus(raw)
    }

    /// Encode both inputs, optionally perturb them, resample to the
    /// interpolated length and mix. The returned hidden nodes are the
    /// pre-noise encoder outputs.
    pub fn forward_pair(
        &self,
        g: &mut Graph<'_>,
        a: &[usize],
        b: &[usize],
        alpha: MixRatio,
        noise: Option<(&Matrix, &Matrix)>,
    ) -> PairNodes {
        let hidden_a = self.encode_graph(g, a);
        let hidden_b = self.encode_graph(g, b);
        let (na, nb) = match noise {
            Some((ea, eb)) => {
                let ea = g.constant(ea.clone());
                let eb = g.constant(eb.clone());
                (g.add(hidden_a, ea), g.add(hidden_b, eb))
            }
            None => (hidden_a, hidden_b),
        };
        let target_length = interp_length(a.len(), b.len(), alpha);
        let sigma = self.sigma_graph(g);
        let ca = length::convert_length_graph(g, na, target_length, sigma);
        let cb = length::convert_length_graph(g, nb, target_length, sigma);
        let state = length::interpolate_graph(g, ca, cb, alpha);
        PairNodes {
            hidden_a,
            hidden_b,
            state,
            target_length,
        }
    }

    /// Per-layer cross-attention keys and values of `memory`.
    pub fn memory_graph(&self, g: &mut Graph<'_>, memory: Var) -> Vec<(Var, Var)> {
        self.layout
            .decoder
            .iter()
            .map(|layer| {
                let k = self.linear(g, memory, &layer.cross_attn.key);
                let v = self.linear(g, memory, &layer.cross_attn.value);
                (k, v)
            })
            .collect()
    }

    /// Decoder logits (`inputs.len() x vocab`) given decoder input ids.
    pub fn decoder_logits_graph(
        &self,
        g: &mut Graph<'_>,
        inputs: &[usize],
        memory: &[(Var, Var)],
    ) -> Var {
        let mut x = self.embed(g, inputs);
        for (layer, &(mk, mv)) in self.layout.decoder.iter().zip(memory) {
            let h = self.norm(g, x, &layer.norm_self);
            let h = self.self_attention(g, h, &layer.self_attn, true);
            x = g.add(x, h);
            let h = self.norm(g, x, &layer.norm_cross);
            let h = self.attend(g, h, mk, mv, &layer.cross_attn, false);
            x = g.add(x, h);
            let h = self.norm(g, x, &layer.norm_ffn);
            let h = self.ffn(g, h, &layer.ffn);
            x = g.add(x, h);
        }
        let x = self.norm(g, x, &self.layout.decoder_norm);
        let table = g.param(self.layout.embedding);
        let logits = g.matmul_nt(x, table);
        let bias = g.param(self.layout.output_bias);
        g.add_row(logits, bias)
    }

    /// `Σ_t log p(targets[t] | targets[..t], memory)` with BOS as the first
    /// decoder input, as a 1x1 node.
    pub fn target_logprob_graph(
        &self,
        g: &mut Graph<'_>,
        memory: &[(Var, Var)],
        targets: &[usize],
    ) -> Var {
        let mut inputs = Vec::with_capacity(targets.len());
        inputs.push(BOS);
        inputs.extend_from_slice(&targets[..targets.len() - 1]);
        let logits = self.decoder_logits_graph(g, &inputs, memory);
        g.pick_log_softmax(logits, targets)
    }

    /// Encoder output for `x` (inference mode).
    pub fn encode(&self, x: &TokenSequence) -> Result<EncodedSequence> {
        self.check_ids(x.ids())?;
        let mut g = Graph::new(&self.params);
        let h = self.encode_graph(&mut g, x.ids());
        Ok(EncodedSequence {
            vectors: g.value(h).clone(),
        })
    }

    /// Noise-free interpolated decoder memory for a pair.
    pub fn interpolated_state(
        &self,
        a: &TokenSequence,
        b: &TokenSequence,
        alpha: MixRatio,
    ) -> Result<InterpolatedState> {
        let ha = self.encode(a)?;
        let hb = self.encode(b)?;
        let target = interp_length(a.len(), b.len(), alpha);
        let sigma = self.sigma();
        let ca = convert_length(&ha.vectors, target, sigma);
        let cb = convert_length(&hb.vectors, target, sigma);
        interpolate_states(&ca, &cb, alpha, (a.len(), b.len()))
    }

    pub fn memory_cache(&self, state: &InterpolatedState) -> MemoryCache {
        let mut g = Graph::new(&self.params);
        let mem = g.constant(state.vectors.clone());
        let kv = self.memory_graph(&mut g, mem);
        MemoryCache {
            layers: kv
                .into_iter()
                .map(|(k, v)| (g.value(k).clone(), g.value(v).clone()))
                .collect(),
        }
    }

    /// Log-probabilities over the vocabulary for the token after `prefix`
    /// (content tokens generated so far; BOS is implicit).
    pub fn next_token_logprobs(&self, memory: &MemoryCache, prefix: &[usize]) -> Vec<f64> {
        self.next_token_logprobs_batch(memory, &[prefix]).remove(0)
    }

    /// [`Self::next_token_logprobs`] for several prefixes sharing one memory.
    pub fn next_token_logprobs_batch(
        &self,
        memory: &MemoryCache,
        prefixes: &[&[usize]],
    ) -> Vec<Vec<f64>> {
        let mut g = Graph::new(&self.params);
        let mem: Vec<(Var, Var)> = memory
            .layers
            .iter()
            .map(|(k, v)| (g.constant(k.clone()), g.constant(v.clone())))
            .collect();
        prefixes
            .iter()
            .map(|prefix| {
                let mut inputs = Vec::with_capacity(prefix.len() + 1);
                inputs.push(BOS);
                inputs.extend_from_slice(prefix);
                let logits = self.decoder_logits_graph(&mut g, &inputs, &mem);
                let last = g.value(logits).row(inputs.len() - 1).to_owned();
                let max = last.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + last.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                last.iter().map(|v| v - lse).collect()
            })
            .collect()
    }

    /// `Σ_t log p(y_t | y_<t, state)` over the content of `y` followed by EOS.
    pub fn decoder_logprob(&self, state: &InterpolatedState, y: &TokenSequence) -> Result<f64> {
        self.check_ids(y.ids())?;
        let mut targets = y.ids().to_vec();
        targets.push(EOS);
        self.target_stream_logprob(state, &targets)
    }

    /// Log-probability of an explicit decoder target stream (no EOS added).
    pub fn target_stream_logprob(&self, state: &InterpolatedState, targets: &[usize]) -> Result<f64> {
        if targets.is_empty() {
            return Err(Error::EmptyText);
        }
        self.check_ids(targets)?;
        let mut g = Graph::new(&self.params);
        let mem = g.constant(state.vectors.clone());
        let kv = self.memory_graph(&mut g, mem);
        let lp = self.target_logprob_graph(&mut g, &kv, targets);
        Ok(g.scalar(lp))
    }
}

/// Number of parameter arrays for a configuration.
fn count_params(config: &ModelConfig) -> usize {
    // embedding + encoder.norm(2) + decoder.norm(2) + output.bias + sigma
    let fixed = 1 + 2 + 2 + 1 + 1;
    // norms: 2 each; attention: 8; ffn: 4
    let enc = 2 + 8 + 2 + 4;
    let dec = 2 + 8 + 2 + 8 + 2 + 4;
    fixed + enc * config.encoder_layers + dec * config.decoder_layers
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(vocab: usize) -> InterpModel {
        let config = ModelConfig {
            vocab_size: vocab,
            d_model: 8,
            n_heads: 2,
            encoder_layers: 1,
            decoder_layers: 1,
            ffn_dim: 16,
            init_sigma: 1.0,
        };
        InterpModel::new(config, &mut ChaCha8Rng::seed_from_u64(7)).unwrap()
    }

    fn seq(ids: &[usize]) -> TokenSequence {
        TokenSequence::new(ids.to_vec()).unwrap()
    }

    #[test]
    fn encode_shapes_and_determinism() {
        let m = tiny(12);
        let x = seq(&[5, 6, 7, 8, 9]);
        let h = m.encode(&x).unwrap();
        assert_eq!(h.vectors.dim(), (5, 8));
        assert_eq!(m.encode(&seq(&[5])).unwrap().vectors.dim(), (1, 8));
        assert_eq!(h, m.encode(&x).unwrap());
        assert!(matches!(
            m.encode(&seq(&[5, 12])),
            Err(Error::TokenOutOfRange { id: 12, size: 12 })
        ));
    }

    #[test]
    fn pair_inputs_are_encoded_independently() {
        let m = tiny(12);
        let a = seq(&[5, 6, 7]);
        let b1 = seq(&[8, 9]);
        let b2 = seq(&[10, 11, 9, 8]);
        let mut g = Graph::new(m.params());
        let n1 = m.forward_pair(&mut g, a.ids(), b1.ids(), MixRatio::new(0.5).unwrap(), None);
        let n2 = m.forward_pair(&mut g, a.ids(), b2.ids(), MixRatio::new(0.5).unwrap(), None);
        assert_eq!(g.value(n1.hidden_a), g.value(n2.hidden_a));
    }

    #[test]
    fn sigma_starts_at_one_and_round_trips() {
        let m = tiny(10);
        assert!((m.sigma() - 1.0).abs() < 1e-12);
        for s in [0.05, 0.5, 3.0, 40.0] {
            assert!((raw_to_sigma(sigma_to_raw(s)) - s).abs() < 1e-9 * s.max(1.0));
        }
    }

    #[test]
    fn step_distributions_are_normalized() {
        let m = tiny(12);
        let st = m
            .interpolated_state(&seq(&[5, 6, 7]), &seq(&[8, 9]), MixRatio::new(0.3).unwrap())
            .unwrap();
        assert_eq!(st.target_length, 3);
        let mem = m.memory_cache(&st);
        for prefix in [&[][..], &[5], &[5, 9, 11]] {
            let lp = m.next_token_logprobs(&mem, prefix);
            let total: f64 = lp.iter().map(|v| v.exp()).sum();
            assert!((total - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn single_target_is_one_term() {
        let m = tiny(12);
        let st = m
            .interpolated_state(&seq(&[5, 6]), &seq(&[7]), MixRatio::new(0.5).unwrap())
            .unwrap();
        let mem = m.memory_cache(&st);
        let step = m.next_token_logprobs(&mem, &[]);
        let lp = m.target_stream_logprob(&st, &[9]).unwrap();
        assert!((lp - step[9]).abs() < 1e-12);

        // content + EOS is a two-term sum
        let two = m.decoder_logprob(&st, &seq(&[9])).unwrap();
        let after = m.next_token_logprobs(&mem, &[9]);
        assert!((two - (step[9] + after[EOS])).abs() < 1e-12);
        assert!(two <= 0.0);
    }

    #[test]
    fn resolving_from_params_checks_layout() {
        let m = tiny(12);
        let again = InterpModel::from_params(m.config().clone(), m.params().clone()).unwrap();
        assert_eq!(again.params(), m.params());
        let mut bigger = m.config().clone();
        bigger.d_model = 16;
        assert!(InterpModel::from_params(bigger, m.params().clone()).is_err());
        assert_eq!(count_params(m.config()), m.params().len());
    }
}
