//! The style networks: reference encoder, token attention, text predictor.
//!
//! One [`StyleModel`] owns every trainable parameter as a named tensor in
//! a sorted map, which gives checkpointing, gradient application, and
//! finite-difference checks a single flat view of the model. The three
//! forward paths share parameters where the architecture says they should
//! (the token bank serves both audio-driven attention and, via the L1
//! target, the text predictor's training signal):
//!
//! - **Reference encoder** — the mel frame matrix enters as a one-channel
//!   image, passes through a stack of strided valid convolutions with tanh
//!   activations, is re-laid-out time-major, and is summarized by a tanh
//!   recurrence whose final state projects to a `d_query` vector.
//! - **Token attention** — the query attends over a learnable token bank
//!   with multi-head scaled dot-product attention; the style embedding is
//!   the concatenation of the per-head weighted value sums.
//! - **Text predictor** — bytes embed through a lookup table and a tanh
//!   recurrence; mean-pooled states map through a small feed-forward net
//!   to a style embedding. When an encoding covers two sentences the
//!   recurrence restarts at the boundary and the map is applied to each
//!   half independently, so the split predictions are bit-identical to
//!   predicting each sentence on its own.
//!
//! Initialization is seeded per parameter name, so adding or removing a
//! parameter never shifts the initial values of the others.

use std::collections::BTreeMap;

use super::mel::MelSpectrogram;
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use super::{EmbeddingSource, StyleEmbedding, StyleError};
use crate::seed;

/// Architecture and training hyperparameters.
///
/// The defaults are desk-scale: small enough that exhaustive gradient
/// checks and multi-step training runs fit in a test suite, while keeping
/// every structural element (conv stack, recurrence, multi-head attention,
/// byte-level text path) of the full-size design.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleConfig {
    /// Mel bands expected in reference-encoder input.
    pub n_mels: usize,
    /// Output channels of each convolution layer, in order.
    pub conv_channels: Vec<usize>,
    /// Square kernel side length.
    pub conv_kernel: usize,
    /// Stride in both time and frequency.
    pub conv_stride: usize,
    /// Hidden width of the reference-encoder recurrence.
    pub rnn_hidden: usize,
    /// Dimension of the query produced by the reference encoder.
    pub d_query: usize,
    /// Number of learnable style tokens.
    pub n_tokens: usize,
    /// Dimension of each style token.
    pub d_token: usize,
    /// Attention heads; must divide both `d_style` and `d_token`.
    pub n_heads: usize,
    /// Style embedding dimension shared by both networks.
    pub d_style: usize,
    /// Byte embedding width of the text encoder.
    pub text_embed: usize,
    /// Hidden width of the text recurrence (the text-state dimension).
    pub text_hidden: usize,
    /// Hidden width of the text predictor's feed-forward map.
    pub tpgst_hidden: usize,
    /// Softmax temperature of the contrastive loss.
    pub temperature: f64,
    /// Weight of the contrastive term in the training loss.
    pub simclr_scale: f64,
    /// Probability that a sample records the audio-driven embedding as its
    /// conditioning source during training.
    pub conditioning_prob: f64,
    /// Gradient-descent step size.
    pub learning_rate: f64,
}

impl Default for StyleConfig {
    fn default() -> Self {
        Self {
            n_mels: 40,
            conv_channels: vec![4, 4, 8],
            conv_kernel: 3,
            conv_stride: 2,
            rnn_hidden: 32,
            d_query: 32,
            n_tokens: 10,
            d_token: 32,
            n_heads: 4,
            d_style: 64,
            text_embed: 16,
            text_hidden: 32,
            tpgst_hidden: 32,
            temperature: 0.5,
            simclr_scale: 0.1,
            conditioning_prob: 0.5,
            learning_rate: 0.05,
        }
    }
}

impl StyleConfig {
    /// Validates internal consistency.
    pub fn validate(&self) -> Result<(), StyleError> {
        let bad = |message: String| Err(StyleError::BadConfig { message });
        let dims = [
            ("n_mels", self.n_mels),
            ("conv_kernel", self.conv_kernel),
            ("conv_stride", self.conv_stride),
            ("rnn_hidden", self.rnn_hidden),
            ("d_query", self.d_query),
            ("n_tokens", self.n_tokens),
            ("d_token", self.d_token),
            ("n_heads", self.n_heads),
            ("d_style", self.d_style),
            ("text_embed", self.text_embed),
            ("text_hidden", self.text_hidden),
            ("tpgst_hidden", self.tpgst_hidden),
        ];
        for (name, v) in dims {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return bad("conv_channels must be a non-empty list of positive counts".into());
        }
        if self.d_style % self.n_heads != 0 {
            return bad(format!(
                "d_style {} must be divisible by n_heads {}",
                self.d_style, self.n_heads
            ));
        }
        if self.d_token % self.n_heads != 0 {
            return bad(format!(
                "d_token {} must be divisible by n_heads {}",
                self.d_token, self.n_heads
            ));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return bad(format!("temperature must be positive, got {}", self.temperature));
        }
        if !(self.simclr_scale.is_finite() && self.simclr_scale >= 0.0) {
            return bad(format!("simclr_scale must be non-negative, got {}", self.simclr_scale));
        }
        if !(self.conditioning_prob.is_finite()
            && (0.0..=1.0).contains(&self.conditioning_prob))
        {
            return bad(format!(
                "conditioning_prob must lie in [0, 1], got {}",
                self.conditioning_prob
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        // The frequency axis must survive every convolution.
        let mut width = self.n_mels;
        for (i, _) in self.conv_channels.iter().enumerate() {
            if width < self.conv_kernel {
                return bad(format!(
                    "n_mels {} shrinks below the {}-wide kernel at conv layer {i}",
                    self.n_mels, self.conv_kernel
                ));
            }
            width = (width - self.conv_kernel) / self.conv_stride + 1;
        }
        Ok(())
    }

    /// Fewest input frames the convolution stack can accept.
    pub fn min_frames(&self) -> usize {
        let mut need = 1;
        for _ in &self.conv_channels {
            need = (need - 1) * self.conv_stride + self.conv_kernel;
        }
        need
    }

    /// Mel-band count after the full convolution stack.
    fn final_width(&self) -> usize {
        let mut width = self.n_mels;
        for _ in &self.conv_channels {
            width = (width - self.conv_kernel) / self.conv_stride + 1;
        }
        width
    }

    /// Feature width fed to the reference-encoder recurrence.
    fn conv_feature_dim(&self) -> usize {
        self.conv_channels.last().unwrap() * self.final_width()
    }
}

struct ParamSpec {
    name: String,
    shape: Vec<usize>,
    fan_in: usize,
    bias: bool,
}

fn param_specs(cfg: &StyleConfig) -> Vec<ParamSpec> {
    let k = cfg.conv_kernel;
    let mut specs = Vec::new();
    let weight = |name: String, shape: Vec<usize>, fan_in: usize| ParamSpec {
        name,
        shape,
        fan_in,
        bias: false,
    };
    let bias = |name: String, shape: Vec<usize>| ParamSpec {
        name,
        shape,
        fan_in: 1,
        bias: true,
    };

    let mut c_in = 1;
    for (i, &c_out) in cfg.conv_channels.iter().enumerate() {
        specs.push(weight(format!("conv{i}.weight"), vec![c_out, c_in, k, k], c_in * k * k));
        specs.push(bias(format!("conv{i}.bias"), vec![c_out]));
        c_in = c_out;
    }
    let feat = cfg.conv_feature_dim();
    specs.push(weight("enc_rnn.wx".into(), vec![feat, cfg.rnn_hidden], feat));
    specs.push(weight("enc_rnn.wh".into(), vec![cfg.rnn_hidden, cfg.rnn_hidden], cfg.rnn_hidden));
    specs.push(bias("enc_rnn.b".into(), vec![1, cfg.rnn_hidden]));
    specs.push(weight("enc_proj.weight".into(), vec![cfg.rnn_hidden, cfg.d_query], cfg.rnn_hidden));
    specs.push(bias("enc_proj.bias".into(), vec![1, cfg.d_query]));

    specs.push(weight("gst.tokens".into(), vec![cfg.n_tokens, cfg.d_token], cfg.d_token));
    specs.push(weight("gst.wq".into(), vec![cfg.d_query, cfg.d_style], cfg.d_query));
    specs.push(weight("gst.wk".into(), vec![cfg.d_token, cfg.d_style], cfg.d_token));
    specs.push(weight("gst.wv".into(), vec![cfg.d_token, cfg.d_style], cfg.d_token));

    specs.push(weight("text.embed".into(), vec![256, cfg.text_embed], cfg.text_embed));
    specs.push(weight("text_rnn.wx".into(), vec![cfg.text_embed, cfg.text_hidden], cfg.text_embed));
    specs.push(weight(
        "text_rnn.wh".into(),
        vec![cfg.text_hidden, cfg.text_hidden],
        cfg.text_hidden,
    ));
    specs.push(bias("text_rnn.b".into(), vec![1, cfg.text_hidden]));
    specs.push(weight("tpgst.w1".into(), vec![cfg.text_hidden, cfg.tpgst_hidden], cfg.text_hidden));
    specs.push(bias("tpgst.b1".into(), vec![1, cfg.tpgst_hidden]));
    specs.push(weight("tpgst.w2".into(), vec![cfg.tpgst_hidden, cfg.d_style], cfg.tpgst_hidden));
    specs.push(bias("tpgst.b2".into(), vec![1, cfg.d_style]));
    specs
}

/// Byte-level text states ready for style prediction.
///
/// Produced by [`StyleModel::encode_text`] and valid for the parameters
/// that produced it. The boundary is present exactly when the encoding
/// covers two sentences; the recurrence restarted there, so rows at and
/// after the boundary are the standalone encoding of the second sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoding {
    bytes: Vec<u8>,
    states: Tensor,
    sentence_boundary: Option<usize>,
}

impl TextEncoding {
    /// Recurrence states, `[L × text_hidden]`, one row per input byte.
    pub fn states(&self) -> &Tensor {
        &self.states
    }

    /// Byte index where the second sentence starts, if there is one.
    pub fn sentence_boundary(&self) -> Option<usize> {
        self.sentence_boundary
    }

    /// The encoded bytes.
    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Number of encoded positions.
    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    /// True when nothing was encoded (never produced by `encode_text`).
    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }
}

/// Attention weights and the embedding they produced.
#[derive(Debug, Clone, PartialEq)]
pub struct GstAttention {
    /// Per-head token weights, `n_heads` rows of `n_tokens` entries; each
    /// row is a softmax (non-negative, sums to 1).
    pub weights: Vec<Vec<f64>>,
    /// The concatenated per-head weighted value sums.
    pub embedding: StyleEmbedding,
}

/// The full set of trainable parameters plus the configuration.
#[derive(Debug, Clone)]
pub struct StyleModel {
    cfg: StyleConfig,
    params: BTreeMap<String, Tensor>,
}

impl StyleModel {
    /// Creates a model with seeded initialization.
    ///
    /// Weights draw uniformly from `±sqrt(1/fan_in)` using a stream
    /// derived from the master seed and the parameter's name; biases start
    /// at zero. Zero biases make a fresh model map zero input to a zero
    /// query, which the tests rely on.
    pub fn new(cfg: StyleConfig, master_seed: u64) -> Result<Self, StyleError> {
        cfg.validate()?;
        let mut params = BTreeMap::new();
        for spec in param_specs(&cfg) {
            let tensor = if spec.bias {
                Tensor::zeros(&spec.shape)
            } else {
                let limit = (1.0 / spec.fan_in as f64).sqrt();
                let mut rng = seed::rng(master_seed, &format!("init/{}", spec.name));
                Tensor::uniform(&spec.shape, limit, &mut rng)
            };
            params.insert(spec.name, tensor);
        }
        Ok(Self { cfg, params })
    }

    /// Assembles a model from already-validated parts (checkpoint loading).
    pub(crate) fn from_parts(cfg: StyleConfig, params: BTreeMap<String, Tensor>) -> Self {
        Self { cfg, params }
    }

    /// The configuration this model was built with.
    pub fn cfg(&self) -> &StyleConfig {
        &self.cfg
    }

    /// All parameters, keyed by name.
    pub fn params(&self) -> &BTreeMap<String, Tensor> {
        &self.params
    }

    /// One parameter by name.
    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.params.get(name)
    }

    /// Mutable access for the optimizer update.
    pub(crate) fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.params.get_mut(name)
    }

    /// Replaces a parameter, keeping its shape contract.
    pub fn set_param(&mut self, name: &str, value: Tensor) -> Result<(), StyleError> {
        let Some(existing) = self.params.get_mut(name) else {
            return Err(StyleError::UnknownParam { name: name.into() });
        };
        if existing.shape() != value.shape() {
            return Err(StyleError::ShapeMismatch {
                name: name.into(),
                expected: existing.shape().to_vec(),
                got: value.shape().to_vec(),
            });
        }
        if !value.is_finite() {
            return Err(StyleError::NonFinite { what: format!("parameter {name}") });
        }
        *existing = value;
        Ok(())
    }

    /// Expected shape of every parameter for this configuration.
    pub(crate) fn expected_shapes(cfg: &StyleConfig) -> BTreeMap<String, Vec<usize>> {
        param_specs(cfg).into_iter().map(|s| (s.name, s.shape)).collect()
    }

    /// Records every parameter as a tape leaf.
    pub(crate) fn leaf_params(&self, tape: &mut Tape) -> BTreeMap<String, Var> {
        self.params
            .iter()
            .map(|(name, tensor)| (name.clone(), tape.leaf(tensor.clone())))
            .collect()
    }

    // ---- Reference encoder ------------------------------------------------

    /// Reference-encoder forward pass on an existing tape.
    pub(crate) fn reference_encode_on(
        &self,
        tape: &mut Tape,
        params: &BTreeMap<String, Var>,
        frames: &Tensor,
    ) -> Result<Var, StyleError> {
        let cfg = &self.cfg;
        if frames.cols() != cfg.n_mels {
            return Err(StyleError::DimensionMismatch {
                expected: cfg.n_mels,
                got: frames.cols(),
            });
        }
        if frames.rows() < cfg.min_frames() {
            return Err(StyleError::TooShortInput {
                needed: cfg.min_frames(),
                got: frames.rows(),
            });
        }
        if !frames.is_finite() {
            return Err(StyleError::NonFinite { what: "mel input".into() });
        }

        let image = Tensor::new(&[1, frames.rows(), frames.cols()], frames.data().to_vec());
        let mut x = tape.leaf(image);
        for i in 0..cfg.conv_channels.len() {
            let conv = tape.conv2d(x, params[&format!("conv{i}.weight")], cfg.conv_stride);
            let biased = tape.add_channel_bias(conv, params[&format!("conv{i}.bias")]);
            x = tape.tanh(biased);
            check_finite(tape, x, || format!("conv{i} activations"))?;
        }
        let seq = tape.chw_to_seq(x);
        let states = rnn_forward(
            tape,
            seq,
            params["enc_rnn.wx"],
            params["enc_rnn.wh"],
            params["enc_rnn.b"],
        );
        check_finite(tape, states, || "enc_rnn activations".into())?;
        let steps = tape.value(states).rows();
        let last = tape.slice_rows(states, steps - 1, steps);
        let proj = tape.matmul(last, params["enc_proj.weight"]);
        let query = tape.add(proj, params["enc_proj.bias"]);
        check_finite(tape, query, || "enc_proj output".into())?;
        Ok(query)
    }

    /// Extracts the query vector for a spectrogram.
    pub fn reference_encode(&self, mel: &MelSpectrogram) -> Result<Vec<f64>, StyleError> {
        let mut tape = Tape::new();
        let params = self.leaf_params(&mut tape);
        let query = self.reference_encode_on(&mut tape, &params, mel.data())?;
        Ok(tape.value(query).data().to_vec())
    }

    // ---- Token attention --------------------------------------------------

    /// Multi-head attention over the token bank on an existing tape.
    ///
    /// Returns one weight row per head plus the `[1 × d_style]` embedding.
    pub(crate) fn gst_attend_on(
        &self,
        tape: &mut Tape,
        params: &BTreeMap<String, Var>,
        query: Var,
    ) -> Result<(Vec<Var>, Var), StyleError> {
        let cfg = &self.cfg;
        let d_head = cfg.d_style / cfg.n_heads;
        let q = tape.matmul(query, params["gst.wq"]);
        let k = tape.matmul(params["gst.tokens"], params["gst.wk"]);
        let v = tape.matmul(params["gst.tokens"], params["gst.wv"]);
        let scale = 1.0 / (d_head as f64).sqrt();

        let mut weight_rows = Vec::with_capacity(cfg.n_heads);
        let mut head_outputs = Vec::with_capacity(cfg.n_heads);
        for h in 0..cfg.n_heads {
            let (c0, c1) = (h * d_head, (h + 1) * d_head);
            let qh = tape.slice_cols(q, c0, c1);
            let kh = tape.slice_cols(k, c0, c1);
            let vh = tape.slice_cols(v, c0, c1);
            let kht = tape.transpose(kh);
            let logits = tape.matmul(qh, kht);
            let scaled = tape.scale(logits, scale);
            let weights = tape.softmax_rows(scaled);
            head_outputs.push(tape.matmul(weights, vh));
            weight_rows.push(weights);
        }
        let embedding = tape.concat_cols(&head_outputs);
        check_finite(tape, embedding, || "gst embedding".into())?;
        Ok((weight_rows, embedding))
    }

    /// Attends a query over the token bank.
    pub fn gst_attend(&self, query: &[f64]) -> Result<GstAttention, StyleError> {
        if query.len() != self.cfg.d_query {
            return Err(StyleError::DimensionMismatch {
                expected: self.cfg.d_query,
                got: query.len(),
            });
        }
        if !query.iter().all(|v| v.is_finite()) {
            return Err(StyleError::NonFinite { what: "attention query".into() });
        }
        let mut tape = Tape::new();
        let params = self.leaf_params(&mut tape);
        let q = tape.leaf(Tensor::new(&[1, query.len()], query.to_vec()));
        let (weight_vars, emb) = self.gst_attend_on(&mut tape, &params, q)?;
        let weights = weight_vars
            .iter()
            .map(|&w| tape.value(w).data().to_vec())
            .collect();
        let embedding =
            StyleEmbedding::new(tape.value(emb).data().to_vec(), EmbeddingSource::Gst)?;
        Ok(GstAttention { weights, embedding })
    }

    /// Full audio path: reference encoder then token attention.
    pub fn gst_embedding(&self, mel: &MelSpectrogram) -> Result<StyleEmbedding, StyleError> {
        let mut tape = Tape::new();
        let params = self.leaf_params(&mut tape);
        let query = self.reference_encode_on(&mut tape, &params, mel.data())?;
        let (_, emb) = self.gst_attend_on(&mut tape, &params, query)?;
        StyleEmbedding::new(tape.value(emb).data().to_vec(), EmbeddingSource::Gst)
    }

    // ---- Text predictor ---------------------------------------------------

    /// Text-encoder states on an existing tape, `[L × text_hidden]`.
    ///
    /// With a boundary, the recurrence runs independently over each half,
    /// so each half's states equal its standalone encoding.
    pub(crate) fn text_states_on(
        &self,
        tape: &mut Tape,
        params: &BTreeMap<String, Var>,
        bytes: &[u8],
        boundary: Option<usize>,
    ) -> Result<Var, StyleError> {
        if bytes.is_empty() {
            return Err(StyleError::TooShortInput { needed: 1, got: 0 });
        }
        if let Some(b) = boundary {
            if b == 0 || b >= bytes.len() {
                return Err(StyleError::BoundaryOutOfRange { boundary: b, len: bytes.len() });
            }
        }
        let indices: Vec<usize> = bytes.iter().map(|&b| b as usize).collect();
        let embedded = tape.gather_rows(params["text.embed"], &indices);
        let run = |tape: &mut Tape, segment: Var| {
            rnn_forward(tape, segment, params["text_rnn.wx"], params["text_rnn.wh"], params["text_rnn.b"])
        };
        let states = match boundary {
            None => run(tape, embedded),
            Some(b) => {
                let first = tape.slice_rows(embedded, 0, b);
                let second = tape.slice_rows(embedded, b, bytes.len());
                let s1 = run(tape, first);
                let s2 = run(tape, second);
                tape.concat_rows(&[s1, s2])
            }
        };
        check_finite(tape, states, || "text_rnn activations".into())?;
        Ok(states)
    }

    /// Pools state segments and maps them to style embeddings on a tape.
    ///
    /// Returns one `[1 × d_style]` row without a boundary, two with one.
    pub(crate) fn tpgst_heads_on(
        &self,
        tape: &mut Tape,
        params: &BTreeMap<String, Var>,
        states: Var,
        boundary: Option<usize>,
    ) -> Result<Vec<Var>, StyleError> {
        let len = tape.value(states).rows();
        if let Some(b) = boundary {
            if b == 0 || b >= len {
                return Err(StyleError::BoundaryOutOfRange { boundary: b, len });
            }
        }
        let segments: Vec<(usize, usize)> = match boundary {
            None => vec![(0, len)],
            Some(b) => vec![(0, b), (b, len)],
        };
        let pooled_rows: Vec<Var> = segments
            .iter()
            .map(|&(s0, s1)| {
                let span = tape.slice_rows(states, s0, s1);
                tape.mean_rows(span)
            })
            .collect();
        let pooled = tape.concat_rows(&pooled_rows);
        let a1 = tape.matmul(pooled, params["tpgst.w1"]);
        let a1b = tape.add_row(a1, params["tpgst.b1"]);
        let h1 = tape.tanh(a1b);
        let a2 = tape.matmul(h1, params["tpgst.w2"]);
        let out = tape.add_row(a2, params["tpgst.b2"]);
        check_finite(tape, out, || "tpgst output".into())?;
        Ok((0..segments.len()).map(|i| tape.slice_rows(out, i, i + 1)).collect())
    }

    /// Encodes text into recurrence states.
    ///
    /// `sentence_boundary`, when present, is the byte index where the
    /// second sentence begins and must leave both halves non-empty.
    pub fn encode_text(
        &self,
        text: &str,
        sentence_boundary: Option<usize>,
    ) -> Result<TextEncoding, StyleError> {
        let bytes = text.as_bytes().to_vec();
        let mut tape = Tape::new();
        let params = self.leaf_params(&mut tape);
        let states = self.text_states_on(&mut tape, &params, &bytes, sentence_boundary)?;
        Ok(TextEncoding {
            bytes,
            states: tape.value(states).clone(),
            sentence_boundary,
        })
    }

    /// Predicts style embeddings from pooled text states.
    ///
    /// One embedding for a single-sentence encoding; two (one per half,
    /// each mapped independently) when the boundary is present.
    pub fn tpgst_predict(&self, enc: &TextEncoding) -> Result<Vec<StyleEmbedding>, StyleError> {
        if enc.states.cols() != self.cfg.text_hidden {
            return Err(StyleError::DimensionMismatch {
                expected: self.cfg.text_hidden,
                got: enc.states.cols(),
            });
        }
        let mut tape = Tape::new();
        let params = self.leaf_params(&mut tape);
        let states = tape.leaf(enc.states.clone());
        let heads = self.tpgst_heads_on(&mut tape, &params, states, enc.sentence_boundary)?;
        heads
            .into_iter()
            .map(|h| StyleEmbedding::new(tape.value(h).data().to_vec(), EmbeddingSource::Tpgst))
            .collect()
    }
}

/// Tanh recurrence over the rows of `seq`; returns all hidden states.
fn rnn_forward(tape: &mut Tape, seq: Var, wx: Var, wh: Var, b: Var) -> Var {
    let steps = tape.value(seq).rows();
    let hidden = tape.value(wx).cols();
    let mut h = tape.leaf(Tensor::zeros(&[1, hidden]));
    let mut states = Vec::with_capacity(steps);
    for t in 0..steps {
        let x_t = tape.slice_rows(seq, t, t + 1);
        let from_input = tape.matmul(x_t, wx);
        let from_state = tape.matmul(h, wh);
        let summed = tape.add(from_input, from_state);
        let pre = tape.add(summed, b);
        h = tape.tanh(pre);
        states.push(h);
    }
    tape.concat_rows(&states)
}

fn check_finite(
    tape: &Tape,
    var: Var,
    what: impl FnOnce() -> String,
) -> Result<(), StyleError> {
    if tape.value(var).is_finite() {
        Ok(())
    } else {
        Err(StyleError::NonFinite { what: what() })
    }
}
