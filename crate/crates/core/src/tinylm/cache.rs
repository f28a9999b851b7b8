//! Per-layer, per-head key/value history with Quest page summaries.
//!
//! Layout: keys and values are `[pos][head][dim]` per layer; page summaries
//! are `[page][head][dim]` per layer, holding the elementwise max over member
//! keys and the elementwise negated min. Summaries update incrementally on
//! append and are rebuilt from raw keys on refresh.

use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct KvCache {
    n_layers: usize,
    n_heads: usize,
    head_dim: usize,
    page_size: usize,
    max_len: usize,
    /// Committed entries; every layer holds exactly this many positions.
    kv_len: usize,
    k: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    page_max: Vec<Vec<f32>>,
    page_neg_min: Vec<Vec<f32>>,
}

impl KvCache {
    pub fn new(n_layers: usize, n_heads: usize, head_dim: usize, page_size: usize, max_len: usize) -> Self {
        let stride = n_heads * head_dim;
        KvCache {
            n_layers,
            n_heads,
            head_dim,
            page_size,
            max_len,
            kv_len: 0,
            k: (0..n_layers).map(|_| Vec::with_capacity(stride * max_len.min(32))).collect(),
            v: (0..n_layers).map(|_| Vec::with_capacity(stride * max_len.min(32))).collect(),
            page_max: vec![Vec::new(); n_layers],
            page_neg_min: vec![Vec::new(); n_layers],
        }
    }

    fn stride(&self) -> usize {
        self.n_heads * self.head_dim
    }

    pub fn kv_len(&self) -> usize {
        self.kv_len
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn page_size(&self) -> usize {
        self.page_size
    }

    /// Pages covering the committed entries; the last one may be partial.
    pub fn n_pages(&self) -> usize {
        self.kv_len.div_ceil(self.page_size)
    }

    /// Positions a given layer has data for, committed or staged.
    pub fn written(&self, layer: usize) -> usize {
        self.k[layer].len() / self.stride()
    }

    /// Stages the KV row for `pos` in one layer and folds it into that page's
    /// summary. Rows must be written in position order; `advance` commits.
    pub fn write_slot(&mut self, layer: usize, pos: usize, k_row: &[f32], v_row: &[f32]) {
        let stride = self.stride();
        debug_assert_eq!(k_row.len(), stride);
        debug_assert_eq!(v_row.len(), stride);
        debug_assert_eq!(self.written(layer), pos, "slots must be written in order");
        self.k[layer].extend_from_slice(k_row);
        self.v[layer].extend_from_slice(v_row);

        let pmax = &mut self.page_max[layer];
        let pneg = &mut self.page_neg_min[layer];
        if pos % self.page_size == 0 {
            pmax.extend_from_slice(k_row);
            pneg.extend(k_row.iter().map(|&x| -x));
        } else {
            let page = pos / self.page_size;
            let base = page * stride;
            for i in 0..stride {
                pmax[base + i] = pmax[base + i].max(k_row[i]);
                pneg[base + i] = pneg[base + i].max(-k_row[i]);
            }
        }
    }

    /// Commits `by` staged positions across all layers.
    pub fn advance(&mut self, by: usize) -> Result<()> {
        let target = self.kv_len + by;
        if target > self.max_len {
            return Err(Error::Invalid(format!(
                "cache full: {} entries exceed max_seq_len {}",
                target, self.max_len
            )));
        }
        for layer in 0..self.n_layers {
            assert_eq!(self.written(layer), target, "layer {layer} missing staged rows");
        }
        self.kv_len = target;
        Ok(())
    }

    /// Drops entries beyond `new_len` and restores the invariant that the
    /// (possibly partial) last page summarizes exactly its member keys.
    pub fn truncate(&mut self, new_len: usize) {
        assert!(new_len <= self.kv_len);
        let stride = self.stride();
        let n_pages = new_len.div_ceil(self.page_size);
        for layer in 0..self.n_layers {
            self.k[layer].truncate(new_len * stride);
            self.v[layer].truncate(new_len * stride);
            self.page_max[layer].truncate(n_pages * stride);
            self.page_neg_min[layer].truncate(n_pages * stride);
        }
        self.kv_len = new_len;
        if new_len % self.page_size != 0 {
            let last = n_pages - 1;
            for layer in 0..self.n_layers {
                self.rebuild_page(layer, last);
            }
        }
    }

    fn rebuild_page(&mut self, layer: usize, page: usize) {
        let stride = self.stride();
        let lo = page * self.page_size;
        let hi = (lo + self.page_size).min(self.kv_len);
        let base = page * stride;
        for i in 0..stride {
            let mut mx = f32::NEG_INFINITY;
            let mut nm = f32::NEG_INFINITY;
            for pos in lo..hi {
                let x = self.k[layer][pos * stride + i];
                mx = mx.max(x);
                nm = nm.max(-x);
            }
            self.page_max[layer][base + i] = mx;
            self.page_neg_min[layer][base + i] = nm;
        }
    }

    /// Full summary rebuild from raw keys (used after a KV refresh).
    pub fn recompute_summaries(&mut self) {
        for layer in 0..self.n_layers {
            for page in 0..self.n_pages() {
                self.rebuild_page(layer, page);
            }
        }
    }

    pub fn key(&self, layer: usize, pos: usize, head: usize) -> &[f32] {
        let stride = self.stride();
        let base = pos * stride + head * self.head_dim;
        &self.k[layer][base..base + self.head_dim]
    }

    pub fn value(&self, layer: usize, pos: usize, head: usize) -> &[f32] {
        let stride = self.stride();
        let base = pos * stride + head * self.head_dim;
        &self.v[layer][base..base + self.head_dim]
    }

    /// (elementwise max, elementwise -min) of one page for one head.
    pub fn page_summary(&self, layer: usize, page: usize, head: usize) -> (&[f32], &[f32]) {
        let stride = self.stride();
        let base = page * stride + head * self.head_dim;
        (
            &self.page_max[layer][base..base + self.head_dim],
            &self.page_neg_min[layer][base..base + self.head_dim],
        )
    }

    /// Private copy for one counterfactual schedule, with room for `extra`
    /// appended steps so decoding does not reallocate.
    pub fn fork(&self, extra: usize) -> KvCache {
        let stride = self.stride();
        let cap = (self.kv_len + extra).min(self.max_len) * stride;
        let grow = |src: &Vec<f32>| {
            let mut out = Vec::with_capacity(cap.max(src.len()));
            out.extend_from_slice(src);
            out
        };
        KvCache {
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            head_dim: self.head_dim,
            page_size: self.page_size,
            max_len: self.max_len,
            kv_len: self.kv_len,
            k: self.k.iter().map(&grow).collect(),
            v: self.v.iter().map(&grow).collect(),
            page_max: self.page_max.clone(),
            page_neg_min: self.page_neg_min.clone(),
        }
    }

    /// True when every stored page summary equals the extrema recomputed from
    /// raw keys, bit for bit.
    pub fn summaries_consistent(&self) -> bool {
        let stride = self.stride();
        for layer in 0..self.n_layers {
            if self.page_max[layer].len() != self.n_pages() * stride {
                return false;
            }
            for page in 0..self.n_pages() {
                let lo = page * self.page_size;
                let hi = (lo + self.page_size).min(self.kv_len);
                for i in 0..stride {
                    let mut mx = f32::NEG_INFINITY;
                    let mut nm = f32::NEG_INFINITY;
                    for pos in lo..hi {
                        let x = self.k[layer][pos * stride + i];
                        mx = mx.max(x);
                        nm = nm.max(-x);
                    }
                    let base = page * stride + i;
                    if self.page_max[layer][base].to_bits() != mx.to_bits()
                        || self.page_neg_min[layer][base].to_bits() != nm.to_bits()
                    {
                        return false;
                    }
                }
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn fill(cache: &mut KvCache, n: usize, seed: u64) {
        let stride = 2 * 3; // matches new(1, 2, 3, ..) below
        let mut rng = crate::rng::stream_rng(seed, "cache-fill", 0);
        for pos in 0..n {
            let k: Vec<f32> = (0..stride).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v: Vec<f32> = (0..stride).map(|_| rng.gen_range(-1.0..1.0)).collect();
            cache.write_slot(0, pos, &k, &v);
        }
        cache.advance(n).unwrap();
    }

    #[test]
    fn page_counts_follow_ceiling() {
        let mut c = KvCache::new(1, 2, 3, 8, 256);
        assert_eq!(c.n_pages(), 0);
        fill(&mut c, 1, 1);
        assert_eq!(c.n_pages(), 1); // one partial page
        let mut c = KvCache::new(1, 2, 3, 8, 256);
        fill(&mut c, 128, 2);
        assert_eq!(c.n_pages(), 16);
        assert!(c.summaries_consistent());
    }

    #[test]
    fn summaries_track_appends_and_truncation() {
        let mut c = KvCache::new(1, 2, 3, 4, 256);
        fill(&mut c, 19, 3);
        assert_eq!(c.n_pages(), 5);
        assert!(c.summaries_consistent());
        c.truncate(10);
        assert_eq!(c.kv_len(), 10);
        assert_eq!(c.n_pages(), 3);
        assert!(c.summaries_consistent());
        c.truncate(8); // exact page boundary
        assert_eq!(c.n_pages(), 2);
        assert!(c.summaries_consistent());
    }

    #[test]
    fn cache_full_rejected() {
        let mut c = KvCache::new(1, 2, 3, 4, 3);
        fill(&mut c, 3, 4);
        let row = vec![0.0; 6];
        c.write_slot(0, 3, &row, &row);
        assert!(c.advance(1).is_err());
    }

    #[test]
    fn fork_is_independent() {
        let mut c = KvCache::new(1, 2, 3, 4, 64);
        fill(&mut c, 9, 5);
        let mut f = c.fork(8);
        assert_eq!(f.kv_len(), 9);
        let row = vec![1.0; 6];
        f.write_slot(0, 9, &row, &row);
        f.advance(1).unwrap();
        assert_eq!(f.kv_len(), 10);
        assert_eq!(c.kv_len(), 9);
        assert!(c.summaries_consistent());
        assert!(f.summaries_consistent());
    }
}
