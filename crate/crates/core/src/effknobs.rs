//! The three inference-time efficiency operators: query-aware page-sparse
//! token selection for attention, magnitude-based MLP channel gating, and
//! per-token symmetric fake quantization. All pure functions.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// One discrete efficiency action: attention keep fraction, MLP channel keep
/// fraction, and activation bit-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionTuple {
    pub kappa: f32,
    pub rho: f32,
    pub q_bits: u8,
}

impl ActionTuple {
    pub const DENSE: ActionTuple = ActionTuple {
        kappa: 1.0,
        rho: 1.0,
        q_bits: 16,
    };

    pub fn new(kappa: f32, rho: f32, q_bits: u8) -> Self {
        ActionTuple { kappa, rho, q_bits }
    }

    /// Normalized precision ratio; exact because 16 is a power of two.
    pub fn eta(&self) -> f32 {
        self.q_bits as f32 / 16.0
    }

    pub fn is_dense(&self) -> bool {
        self.kappa >= 1.0 && self.rho >= 1.0 && self.q_bits >= 16
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.kappa) || !self.kappa.is_finite() {
            return Err(Error::Invalid(format!("kappa {} outside [0,1]", self.kappa)));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Invalid(format!("rho {} outside (0,1]", self.rho)));
        }
        if !(4..=16).contains(&self.q_bits) {
            return Err(Error::Invalid(format!("q_bits {} outside 4..=16", self.q_bits)));
        }
        Ok(())
    }
}

/// Always-dense sink and window token counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkWindowPolicy {
    pub sink: usize,
    pub window: usize,
}

impl Default for SinkWindowPolicy {
    fn default() -> Self {
        SinkWindowPolicy { sink: 4, window: 2 }
    }
}

impl SinkWindowPolicy {
    /// Forced-keep keys: the first `sink` positions and the last `window`
    /// positions of an `n`-key cache.
    pub fn is_forced(&self, pos: usize, n_keys: usize) -> bool {
        pos < self.sink || pos + self.window >= n_keys
    }

    pub fn forced_mask(&self, n_keys: usize) -> Vec<bool> {
        (0..n_keys).map(|p| self.is_forced(p, n_keys)).collect()
    }

    /// A step is effective when the controllable region beyond the forced
    /// keys is non-empty.
    pub fn step_is_effective(&self, n_keys: usize) -> bool {
        n_keys > self.sink + self.window
    }
}

/// ceil(frac * n) with a tiny downward snap so exact rational products
/// (0.1 * 80, 0.4 * 160, ...) do not spill over to the next integer through
/// binary rounding.
pub fn ceil_frac(frac: f64, n: usize) -> usize {
    let x = frac * n as f64 - 1e-9;
    if x <= 0.0 {
        0
    } else {
        (x.ceil() as usize).min(n)
    }
}

/// Per-sequence token budget for keep fraction `kappa` over `kv_len` keys.
pub fn token_budget(kappa: f64, kv_len: usize) -> usize {
    ceil_frac(kappa.clamp(0.0, 1.0), kv_len)
}

/// Upper bound on max_{k in page} q . k from per-dimension page extrema
/// (`max` = elementwise max, `neg_min` = elementwise -min). Accumulated in
/// f64 so the bound is not blurred by summation order.
pub fn page_score(query: &[f32], max: &[f32], neg_min: &[f32]) -> f64 {
    debug_assert_eq!(query.len(), max.len());
    debug_assert_eq!(query.len(), neg_min.len());
    let mut s = 0.0f64;
    for i in 0..query.len() {
        let q = query[i] as f64;
        if q >= 0.0 {
            s += q * max[i] as f64;
        } else {
            s += -q * neg_min[i] as f64;
        }
    }
    s
}

/// `page_score` over a list of page summaries.
pub fn quest_page_scores<'a, I>(query: &[f32], pages: I) -> Vec<f64>
where
    I: IntoIterator<Item = (&'a [f32], &'a [f32])>,
{
    pages
        .into_iter()
        .map(|(mx, nm)| page_score(query, mx, nm))
        .collect()
}

/// Additive attention bias pattern for one head at one decode step: kept keys
/// get bias 0, dropped keys get -inf. `dense_bypass` means no masking at all.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMaskDelta {
    pub dense_bypass: bool,
    pub keep: Vec<bool>,
}

/// Budgeted page selection. Keeps forced-and-visible keys unconditionally,
/// plus the members of the top ceil(budget / page_size) pages by score
/// (score ties go to the lower page index). If the budget already covers
/// every visible key, masking is bypassed entirely.
pub fn select_tokens(
    page_scores: &[f64],
    budget: usize,
    page_size: usize,
    forced: &[bool],
    visible: &[bool],
) -> AttentionMaskDelta {
    let n_keys = visible.len();
    debug_assert_eq!(forced.len(), n_keys);
    debug_assert!(page_size > 0);
    debug_assert_eq!(page_scores.len(), n_keys.div_ceil(page_size));

    let visible_count = visible.iter().filter(|&&v| v).count();
    if budget >= visible_count {
        return AttentionMaskDelta {
            dense_bypass: true,
            keep: visible.to_vec(),
        };
    }

    let mut keep: Vec<bool> = forced
        .iter()
        .zip(visible)
        .map(|(&f, &v)| f && v)
        .collect();

    let n_pages_keep = budget.div_ceil(page_size);
    if n_pages_keep > 0 {
        let mut order: Vec<usize> = (0..page_scores.len()).collect();
        order.sort_by(|&a, &b| {
            page_scores[b]
                .total_cmp(&page_scores[a])
                .then(a.cmp(&b))
        });
        for &p in order.iter().take(n_pages_keep) {
            let lo = p * page_size;
            let hi = (lo + page_size).min(n_keys);
            for j in lo..hi {
                if visible[j] {
                    keep[j] = true;
                }
            }
        }
    }

    AttentionMaskDelta {
        dense_bypass: false,
        keep,
    }
}

/// Zeroes all but the top ceil(rho * d) channels of `x` by |x|, ties to the
/// lower index. rho = 1 is an exact bypass.
pub fn prune_channels(x: &[f32], rho: f64) -> Result<Vec<f32>> {
    let mut out = x.to_vec();
    prune_channels_in_place(&mut out, rho)?;
    Ok(out)
}

/// In-place variant used on the decode hot path.
pub fn prune_channels_in_place(x: &mut [f32], rho: f64) -> Result<()> {
    if rho <= 0.0 || !rho.is_finite() {
        return Err(Error::Invalid(format!("prune keep fraction {rho} must be in (0,1]")));
    }
    if rho >= 1.0 {
        return Ok(());
    }
    let d = x.len();
    let m = ceil_frac(rho, d);
    if m >= d {
        return Ok(());
    }
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_unstable_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut keep = vec![false; d];
    for &i in order.iter().take(m) {
        keep[i] = true;
    }
    for (i, v) in x.iter_mut().enumerate() {
        if !keep[i] {
            *v = 0.0;
        }
    }
    Ok(())
}

/// Symmetric per-token fake quantization of `z` at `q_bits` with dynamic
/// range max|z|. q_bits >= 16 and all-zero inputs return `z` unchanged.
pub fn fake_quantize(z: &[f32], q_bits: u8) -> Vec<f32> {
    let mut out = z.to_vec();
    fake_quantize_in_place(&mut out, q_bits);
    out
}

/// In-place variant used on the decode hot path.
pub fn fake_quantize_in_place(z: &mut [f32], q_bits: u8) {
    if q_bits >= 16 {
        return;
    }
    let q_max = ((1i32 << (q_bits - 1)) - 1) as f32;
    let a = z.iter().fold(0.0f32, |m, &v| m.max(v.abs()));
    if a == 0.0 {
        return;
    }
    let s = a / q_max;
    for v in z.iter_mut() {
        // Scale as v * q_max / a (equal to v / s in exact arithmetic) so
        // exact ties like -0.5 * 7 = -3.5 land on the round-half-to-even
        // boundary instead of drifting off it through the rounded s.
        let r = (*v * q_max / a).round_ties_even().clamp(-q_max, q_max);
        *v = r * s;
    }
}
