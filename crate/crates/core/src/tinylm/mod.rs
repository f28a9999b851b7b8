//! A small decoder-only transformer with an explicit KV cache: dense batched
//! prefill, single-token decode with injected efficiency knobs, periodic KV
//! refresh, and plain cross-entropy pretraining. After pretraining the
//! parameters are frozen and shared read-only.

mod cache;
mod forward;
mod train;

pub use cache::KvCache;
pub use forward::StepOutput;
pub use train::{pretrain_base, sequence_nll, PretrainOpts, TrainReport};

use crate::math::Param;
use crate::rng::stream_rng;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Positional encoding variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Positions {
    Rope,
    Learned,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub head_dim: usize,
    pub mlp_hidden: usize,
    pub max_seq_len: usize,
    pub positions: Positions,
    /// Quest page size for the KV cache.
    pub page_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            vocab_size: 256,
            d_model: 192,
            n_layers: 4,
            n_heads: 4,
            head_dim: 48,
            mlp_hidden: 768,
            max_seq_len: 256,
            positions: Positions::Rope,
            page_size: 8,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_model != self.n_heads * self.head_dim {
            return Err(Error::Config(format!(
                "d_model {} != n_heads {} * head_dim {}",
                self.d_model, self.n_heads, self.head_dim
            )));
        }
        if self.head_dim % 2 != 0 && self.positions == Positions::Rope {
            return Err(Error::Config("rope needs an even head_dim".into()));
        }
        if self.vocab_size == 0
            || self.n_layers == 0
            || self.max_seq_len == 0
            || self.mlp_hidden == 0
            || self.page_size == 0
        {
            return Err(Error::Config("all model dimensions must be positive".into()));
        }
        Ok(())
    }

    /// Checks that one configured episode fits the context.
    pub fn check_episode(&self, prefill_len: usize, horizon: usize) -> Result<()> {
        if prefill_len + horizon > self.max_seq_len {
            return Err(Error::Config(format!(
                "prefill {} + horizon {} exceeds max_seq_len {}",
                prefill_len, horizon, self.max_seq_len
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LayerParams {
    pub attn_norm: Param,
    pub wq: Param,
    pub wk: Param,
    pub wv: Param,
    pub wo: Param,
    pub mlp_norm: Param,
    pub w_up: Param,
    pub w_down: Param,
}

/// The base language model. Weight matrices are row-major `[out][in]`.
#[derive(Debug, Clone)]
pub struct TinyLm {
    pub cfg: ModelConfig,
    pub embed: Param,
    pub pos_emb: Option<Param>,
    pub layers: Vec<LayerParams>,
    pub final_norm: Param,
    pub lm_head: Param,
    /// RoPE tables, `[pos][pair]`, pair count = head_dim / 2.
    rope_cos: Vec<f32>,
    rope_sin: Vec<f32>,
}

pub(crate) const RMS_EPS: f32 = 1e-5;

impl TinyLm {
    pub fn new_random(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = stream_rng(seed, "model-init", 0);
        let d = cfg.d_model;
        // Box-Muller normals; residual-side projections get the usual
        // depth-scaled std.
        let mut normal = move |n: usize, std: f32| -> Vec<f32> {
            (0..n)
                .map(|_| {
                    let u1: f32 = rng.gen_range(f32::EPSILON..1.0);
                    let u2: f32 = rng.gen();
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f32::consts::PI * u2).cos() * std
                })
                .collect()
        };
        let res_std = 0.02 / ((2 * cfg.n_layers) as f32).sqrt();
        let layers = (0..cfg.n_layers)
            .map(|_| LayerParams {
                attn_norm: Param::new(vec![1.0; d]),
                wq: Param::new(normal(d * d, 0.02)),
                wk: Param::new(normal(d * d, 0.02)),
                wv: Param::new(normal(d * d, 0.02)),
                wo: Param::new(normal(d * d, res_std)),
                mlp_norm: Param::new(vec![1.0; d]),
                w_up: Param::new(normal(cfg.mlp_hidden * d, 0.02)),
                w_down: Param::new(normal(d * cfg.mlp_hidden, res_std)),
            })
            .collect();
        let pairs = cfg.head_dim / 2;
        let mut rope_cos = vec![0.0; cfg.max_seq_len * pairs];
        let mut rope_sin = vec![0.0; cfg.max_seq_len * pairs];
        for pos in 0..cfg.max_seq_len {
            for j in 0..pairs {
                let theta = (pos as f64)
                    * (10_000f64).powf(-2.0 * j as f64 / cfg.head_dim as f64);
                rope_cos[pos * pairs + j] = theta.cos() as f32;
                rope_sin[pos * pairs + j] = theta.sin() as f32;
            }
        }
        Ok(TinyLm {
            embed: Param::new(normal(cfg.vocab_size * d, 0.02)),
            pos_emb: match cfg.positions {
                Positions::Learned => Some(Param::new(normal(cfg.max_seq_len * d, 0.02))),
                Positions::Rope => None,
            },
            layers,
            final_norm: Param::new(vec![1.0; d]),
            lm_head: Param::new(normal(cfg.vocab_size * d, 0.02)),
            cfg,
            rope_cos,
            rope_sin,
        })
    }

    pub(crate) fn rope_pair(&self, pos: usize, pair: usize) -> (f32, f32) {
        let pairs = self.cfg.head_dim / 2;
        (self.rope_cos[pos * pairs + pair], self.rope_sin[pos * pairs + pair])
    }

    pub fn embed_row(&self, token: u16) -> &[f32] {
        let d = self.cfg.d_model;
        let t = token as usize;
        &self.embed.w[t * d..(t + 1) * d]
    }

    /// Named tensors in checkpoint block order.
    pub fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out: Vec<(String, &Param)> = vec![("embed".into(), &self.embed)];
        if let Some(p) = &self.pos_emb {
            out.push(("pos_emb".into(), p));
        }
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.attn_norm"), &l.attn_norm));
            out.push((format!("layer{i}.wq"), &l.wq));
            out.push((format!("layer{i}.wk"), &l.wk));
            out.push((format!("layer{i}.wv"), &l.wv));
            out.push((format!("layer{i}.wo"), &l.wo));
            out.push((format!("layer{i}.mlp_norm"), &l.mlp_norm));
            out.push((format!("layer{i}.w_up"), &l.w_up));
            out.push((format!("layer{i}.w_down"), &l.w_down));
        }
        out.push(("final_norm".into(), &self.final_norm));
        out.push(("lm_head".into(), &self.lm_head));
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = vec![&mut self.embed];
        if let Some(p) = &mut self.pos_emb {
            out.push(p);
        }
        for l in &mut self.layers {
            out.push(&mut l.attn_norm);
            out.push(&mut l.wq);
            out.push(&mut l.wk);
            out.push(&mut l.wv);
            out.push(&mut l.wo);
            out.push(&mut l.mlp_norm);
            out.push(&mut l.w_up);
            out.push(&mut l.w_down);
        }
        out.push(&mut self.final_norm);
        out.push(&mut self.lm_head);
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, p)| p.w.len()).sum()
    }

    /// FNV-1a over the exact bit patterns of every parameter; used to assert
    /// the base stays frozen.
    pub fn params_checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (_, p) in self.named_params() {
            for &w in &p.w {
                for b in w.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }

    pub fn fresh_cache(&self) -> KvCache {
        KvCache::new(
            self.cfg.n_layers,
            self.cfg.n_heads,
            self.cfg.head_dim,
            self.cfg.page_size,
            self.cfg.max_seq_len,
        )
    }
}
