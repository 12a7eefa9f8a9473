//! Layers with explicit forward and backward passes.
//!
//! Activations are row-major `f64` buffers; a batch of `b` vectors of width
//! `w` is a `b * w` slice. Backward functions accumulate parameter gradients
//! into the layer's tensors and return (or accumulate) input gradients.

use rand::Rng;

use super::linalg::{add_col_sums, add_row_bias, gemm_nn, gemm_nt, gemm_tn, sigmoid};
use super::{Module, Tensor};
use crate::error::{ensure, Result};

/// Parameter initialization range.
pub const INIT_SCALE: f64 = 0.08;

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub table: Tensor,
}

impl Embedding {
    pub fn new(vocab: usize, dim: usize, rng: &mut impl Rng) -> Self {
        Embedding {
            table: Tensor::param_uniform(&[vocab, dim], INIT_SCALE, rng),
        }
    }

    pub fn vocab(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    /// Looks up `ids` into an `ids.len() x dim` matrix.
    pub fn forward(&self, ids: &[u32]) -> Result<Vec<f64>> {
        let d = self.dim();
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            ensure!(
                (id as usize) < self.vocab(),
                "embedding: id {id} outside vocabulary of {}",
                self.vocab()
            );
            out.extend_from_slice(self.table.row(id as usize));
        }
        Ok(out)
    }

    pub fn backward(&mut self, ids: &[u32], dy: &[f64]) {
        let d = self.dim();
        let grad = self.table.grad_mut();
        for (i, &id) in ids.iter().enumerate() {
            let row = &mut grad[id as usize * d..(id as usize + 1) * d];
            for (g, v) in row.iter_mut().zip(&dy[i * d..(i + 1) * d]) {
                *g += v;
            }
        }
    }
}

impl Module for Embedding {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("table", &self.table);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("table", &mut self.table);
    }
}

/// Affine map `y = x W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    pub fn new(input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Dense {
            weight: Tensor::param_uniform(&[input, output], INIT_SCALE, rng),
            bias: Tensor::param_uniform(&[output], INIT_SCALE, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, x: &[f64], rows: usize) -> Result<Vec<f64>> {
        let (i, o) = (self.input_dim(), self.output_dim());
        ensure!(
            x.len() == rows * i,
            "dense: input has {} values, expected {rows} x {i}",
            x.len()
        );
        let mut y = vec![0.0; rows * o];
        gemm_nn(rows, i, o, x, self.weight.values(), &mut y, false);
        add_row_bias(&mut y, self.bias.values());
        Ok(y)
    }

    /// Accumulates weight and bias gradients; adds `dy W^T` into `dx` when given.
    pub fn backward(&mut self, x: &[f64], dy: &[f64], rows: usize, dx: Option<&mut [f64]>) {
        let (i, o) = (self.input_dim(), self.output_dim());
        gemm_tn(i, rows, o, x, dy, self.weight.grad_mut(), true);
        add_col_sums(dy, self.bias.grad_mut());
        if let Some(dx) = dx {
            gemm_nt(rows, o, i, dy, self.weight.values(), dx, true);
        }
    }
}

impl Module for Dense {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("weight", &self.weight);
        f("bias", &self.bias);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("weight", &mut self.weight);
        f("bias", &mut self.bias);
    }
}

/// Row-wise softmax in place.
pub fn softmax_rows(x: &mut [f64], cols: usize) {
    for row in x.chunks_exact_mut(cols) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

/// Mean negative log-likelihood of `targets` under row distributions `probs`.
pub fn cross_entropy(probs: &[f64], cols: usize, targets: &[u32]) -> f64 {
    let total: f64 = probs
        .chunks_exact(cols)
        .zip(targets)
        .map(|(row, &t)| -row[t as usize].ln())
        .sum();
    total / targets.len() as f64
}

/// Fused softmax and cross-entropy over the rows whose target is `Some`.
///
/// Returns the summed loss and the gradient of `scale * summed loss` with
/// respect to the logits (`scale * (p - onehot)` on counted rows, zero
/// elsewhere).
pub fn softmax_cross_entropy(
    logits: &[f64],
    cols: usize,
    targets: &[Option<u32>],
    scale: f64,
) -> (f64, Vec<f64>) {
    let mut probs = logits.to_vec();
    softmax_rows(&mut probs, cols);
    let mut loss = 0.0;
    for (row, t) in probs.chunks_exact_mut(cols).zip(targets) {
        match t {
            Some(t) => {
                let t = *t as usize;
                loss -= row[t].max(f64::MIN_POSITIVE).ln();
                row[t] -= 1.0;
                row.iter_mut().for_each(|v| *v *= scale);
            }
            None => row.iter_mut().for_each(|v| *v = 0.0),
        }
    }
    (loss, probs)
}

/// Inverted dropout mask: each entry is `0` with probability `p`, otherwise
/// `1 / (1 - p)`.
pub fn dropout_mask(n: usize, p: f64, rng: &mut impl Rng) -> Vec<f64> {
    if p <= 0.0 {
        return vec![1.0; n];
    }
    let keep = 1.0 / (1.0 - p);
    (0..n)
        .map(|_| if rng.gen_bool(p) { 0.0 } else { keep })
        .collect()
}

pub fn apply_mask(x: &mut [f64], mask: &[f64]) {
    for (v, m) in x.iter_mut().zip(mask) {
        *v *= m;
    }
}

/// Gated recurrent unit with gates ordered `[reset, update, candidate]`:
///
/// ```text
/// r = s(x Wr + h Ur + b)      z = s(x Wz + h Uz + b)
/// n = tanh(x Wn + bn + r * (h Un + bhn))
/// h' = (1 - z) * n + z * h
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub b_x: Tensor,
    pub b_h: Tensor,
}

/// Activations saved by [`GruCell::step`] for the backward pass.
#[derive(Debug, Clone)]
pub struct GruCache {
    h: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    gh_n: Vec<f64>,
}

impl GruCell {
    pub fn new(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        GruCell {
            w_x: Tensor::param_uniform(&[input, 3 * hidden], INIT_SCALE, rng),
            w_h: Tensor::param_uniform(&[hidden, 3 * hidden], INIT_SCALE, rng),
            b_x: Tensor::param_uniform(&[3 * hidden], INIT_SCALE, rng),
            b_h: Tensor::param_uniform(&[3 * hidden], INIT_SCALE, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.rows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_h.rows()
    }

    /// Input projections `x W_x + b_x` for many rows at once.
    pub fn project_inputs(&self, x: &[f64], rows: usize) -> Result<Vec<f64>> {
        let (i, g) = (self.input_dim(), 3 * self.hidden_dim());
        ensure!(
            x.len() == rows * i,
            "gru: input has {} values, expected {rows} x {i}",
            x.len()
        );
        let mut gx = vec![0.0; rows * g];
        gemm_nn(rows, i, g, x, self.w_x.values(), &mut gx, false);
        add_row_bias(&mut gx, self.b_x.values());
        Ok(gx)
    }

    /// One recurrence step from precomputed input projections `gx` (`batch x 3H`).
    pub fn step(&self, gx: &[f64], h: &[f64], batch: usize) -> (Vec<f64>, GruCache) {
        let hd = self.hidden_dim();
        let g = 3 * hd;
        let mut gh = vec![0.0; batch * g];
        gemm_nn(batch, hd, g, h, self.w_h.values(), &mut gh, false);
        add_row_bias(&mut gh, self.b_h.values());

        let mut r = vec![0.0; batch * hd];
        let mut z = vec![0.0; batch * hd];
        let mut n = vec![0.0; batch * hd];
        let mut gh_n = vec![0.0; batch * hd];
        let mut h_new = vec![0.0; batch * hd];
        for b in 0..batch {
            let gxr = &gx[b * g..(b + 1) * g];
            let ghr = &gh[b * g..(b + 1) * g];
            for j in 0..hd {
                let k = b * hd + j;
                let rj = sigmoid(gxr[j] + ghr[j]);
                let zj = sigmoid(gxr[hd + j] + ghr[hd + j]);
                let ghn = ghr[2 * hd + j];
                let nj = (gxr[2 * hd + j] + rj * ghn).tanh();
                r[k] = rj;
                z[k] = zj;
                n[k] = nj;
                gh_n[k] = ghn;
                h_new[k] = (1.0 - zj) * nj + zj * h[k];
            }
        }
        let cache = GruCache {
            h: h.to_vec(),
            r,
            z,
            n,
            gh_n,
        };
        (h_new, cache)
    }

    pub fn forward(&self, x: &[f64], h: &[f64], batch: usize) -> Result<(Vec<f64>, GruCache)> {
        ensure!(
            h.len() == batch * self.hidden_dim(),
            "gru: state has {} values, expected {batch} x {}",
            h.len(),
            self.hidden_dim()
        );
        let gx = self.project_inputs(x, batch)?;
        Ok(self.step(&gx, h, batch))
    }

    /// Backward through [`GruCell::step`]. Writes the gradient of the input
    /// projections into `dgx` (overwriting) and accumulates the gradient of
    /// the previous state into `dh_prev`.
    pub fn backward_step(
        &mut self,
        cache: &GruCache,
        dh_new: &[f64],
        batch: usize,
        dgx: &mut [f64],
        dh_prev: &mut [f64],
    ) {
        let hd = self.hidden_dim();
        let g = 3 * hd;
        let mut dgh = vec![0.0; batch * g];
        for b in 0..batch {
            for j in 0..hd {
                let k = b * hd + j;
                let (r, z, n) = (cache.r[k], cache.z[k], cache.n[k]);
                let dh = dh_new[k];
                let dn = dh * (1.0 - z);
                let dz = dh * (cache.h[k] - n);
                dh_prev[k] += dh * z;
                let dan = dn * (1.0 - n * n);
                let dr = dan * cache.gh_n[k];
                let daz = dz * z * (1.0 - z);
                let dar = dr * r * (1.0 - r);
                let row = b * g;
                dgx[row + j] = dar;
                dgx[row + hd + j] = daz;
                dgx[row + 2 * hd + j] = dan;
                dgh[row + j] = dar;
                dgh[row + hd + j] = daz;
                dgh[row + 2 * hd + j] = dan * r;
            }
        }
        gemm_tn(hd, batch, g, &cache.h, &dgh, self.w_h.grad_mut(), true);
        add_col_sums(&dgh, self.b_h.grad_mut());
        gemm_nt(batch, g, hd, &dgh, self.w_h.values(), dh_prev, true);
    }

    /// Backward for input projections of `rows` inputs: accumulates `W_x`
    /// and `b_x` gradients and, when given, adds the input gradient to `dx`.
    pub fn backward_inputs(&mut self, x: &[f64], dgx: &[f64], rows: usize, dx: Option<&mut [f64]>) {
        let (i, g) = (self.input_dim(), 3 * self.hidden_dim());
        gemm_tn(i, rows, g, x, dgx, self.w_x.grad_mut(), true);
        add_col_sums(dgx, self.b_x.grad_mut());
        if let Some(dx) = dx {
            gemm_nt(rows, g, i, dgx, self.w_x.values(), dx, true);
        }
    }

    /// Full single-step backward: returns `(dx, dh_prev)`.
    pub fn backward(
        &mut self,
        x: &[f64],
        cache: &GruCache,
        dh_new: &[f64],
        batch: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut dgx = vec![0.0; batch * 3 * self.hidden_dim()];
        let mut dh = vec![0.0; batch * self.hidden_dim()];
        self.backward_step(cache, dh_new, batch, &mut dgx, &mut dh);
        let mut dx = vec![0.0; x.len()];
        self.backward_inputs(x, &dgx, batch, Some(&mut dx));
        (dx, dh)
    }
}

impl Module for GruCell {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("w_x", &self.w_x);
        f("w_h", &self.w_h);
        f("b_x", &self.b_x);
        f("b_h", &self.b_h);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("w_x", &mut self.w_x);
        f("w_h", &mut self.w_h);
        f("b_x", &mut self.b_x);
        f("b_h", &mut self.b_h);
    }
}

/// Additive (Bahdanau) attention: `e_t = v . tanh(q W_q + k_t W_k)`,
/// weights are the masked softmax of `e`, context is the weighted sum of keys.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveAttention {
    pub w_q: Tensor,
    pub w_k: Tensor,
    pub v: Tensor,
}

#[derive(Debug, Clone)]
pub struct AttentionCache {
    query: Vec<f64>,
    weights: Vec<f64>,
    /// tanh activations, `batch x len x attn`.
    u: Vec<f64>,
}

impl AttentionCache {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl AdditiveAttention {
    pub fn new(query_dim: usize, key_dim: usize, attn_dim: usize, rng: &mut impl Rng) -> Self {
        AdditiveAttention {
            w_q: Tensor::param_uniform(&[query_dim, attn_dim], INIT_SCALE, rng),
            w_k: Tensor::param_uniform(&[key_dim, attn_dim], INIT_SCALE, rng),
            v: Tensor::param_uniform(&[attn_dim], INIT_SCALE, rng),
        }
    }

    pub fn query_dim(&self) -> usize {
        self.w_q.rows()
    }

    pub fn key_dim(&self) -> usize {
        self.w_k.rows()
    }

    pub fn attn_dim(&self) -> usize {
        self.w_q.cols()
    }

    /// `keys (rows x key_dim) W_k`, computed once per source batch.
    pub fn project_keys(&self, keys: &[f64], rows: usize) -> Vec<f64> {
        let mut pk = vec![0.0; rows * self.attn_dim()];
        gemm_nn(rows, self.key_dim(), self.attn_dim(), keys, self.w_k.values(), &mut pk, false);
        pk
    }

    /// Attends `batch` queries over `len` keys each. `mask[b * len + t]`
    /// marks valid positions; every row needs at least one.
    pub fn forward(
        &self,
        query: &[f64],
        keys: &[f64],
        proj_keys: &[f64],
        mask: &[bool],
        batch: usize,
        len: usize,
    ) -> Result<(Vec<f64>, AttentionCache)> {
        let (qd, kd, a) = (self.query_dim(), self.key_dim(), self.attn_dim());
        ensure!(
            query.len() == batch * qd && keys.len() == batch * len * kd && mask.len() == batch * len,
            "attention: shapes do not match batch {batch} x len {len}"
        );
        let mut pq = vec![0.0; batch * a];
        gemm_nn(batch, qd, a, query, self.w_q.values(), &mut pq, false);
        let v = self.v.values();
        let mut u = vec![0.0; batch * len * a];
        let mut weights = vec![0.0; batch * len];
        let mut context = vec![0.0; batch * kd];
        for b in 0..batch {
            let q = &pq[b * a..(b + 1) * a];
            let mut max = f64::NEG_INFINITY;
            for t in 0..len {
                let bt = b * len + t;
                if !mask[bt] {
                    continue;
                }
                let pk = &proj_keys[bt * a..(bt + 1) * a];
                let ut = &mut u[bt * a..(bt + 1) * a];
                let mut e = 0.0;
                for j in 0..a {
                    let x = (q[j] + pk[j]).tanh();
                    ut[j] = x;
                    e += v[j] * x;
                }
                weights[bt] = e;
                max = max.max(e);
            }
            ensure!(max.is_finite(), "attention: row {b} has no valid position");
            let mut sum = 0.0;
            for t in 0..len {
                let bt = b * len + t;
                weights[bt] = if mask[bt] { (weights[bt] - max).exp() } else { 0.0 };
                sum += weights[bt];
            }
            let ctx = &mut context[b * kd..(b + 1) * kd];
            for t in 0..len {
                let bt = b * len + t;
                weights[bt] /= sum;
                let w = weights[bt];
                if w != 0.0 {
                    for (c, k) in ctx.iter_mut().zip(&keys[bt * kd..(bt + 1) * kd]) {
                        *c += w * k;
                    }
                }
            }
        }
        Ok((
            context,
            AttentionCache {
                query: query.to_vec(),
                weights,
                u,
            },
        ))
    }

    /// Backward for one [`AdditiveAttention::forward`] call. Adds into
    /// `dquery`, `dkeys` and `dproj_keys`; the caller finishes the key
    /// projection with [`AdditiveAttention::backward_keys`].
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &mut self,
        cache: &AttentionCache,
        keys: &[f64],
        dcontext: &[f64],
        batch: usize,
        len: usize,
        dquery: &mut [f64],
        dkeys: &mut [f64],
        dproj_keys: &mut [f64],
    ) {
        let (qd, kd, a) = (self.query_dim(), self.key_dim(), self.attn_dim());
        let mut dpq = vec![0.0; batch * a];
        let v = self.v.values().to_vec();
        let dv = self.v.grad_mut();
        for b in 0..batch {
            let dc = &dcontext[b * kd..(b + 1) * kd];
            // d weights, then through the softmax
            let mut dw = vec![0.0; len];
            let mut dot = 0.0;
            for t in 0..len {
                let bt = b * len + t;
                let w = cache.weights[bt];
                if w == 0.0 {
                    continue;
                }
                let k = &keys[bt * kd..(bt + 1) * kd];
                let dk = &mut dkeys[bt * kd..(bt + 1) * kd];
                let mut s = 0.0;
                for j in 0..kd {
                    s += dc[j] * k[j];
                    dk[j] += w * dc[j];
                }
                dw[t] = s;
                dot += w * s;
            }
            let dq = &mut dpq[b * a..(b + 1) * a];
            for t in 0..len {
                let bt = b * len + t;
                let w = cache.weights[bt];
                if w == 0.0 {
                    continue;
                }
                let de = w * (dw[t] - dot);
                let ut = &cache.u[bt * a..(bt + 1) * a];
                let dpk = &mut dproj_keys[bt * a..(bt + 1) * a];
                for j in 0..a {
                    dv[j] += de * ut[j];
                    let dpre = de * v[j] * (1.0 - ut[j] * ut[j]);
                    dpk[j] += dpre;
                    dq[j] += dpre;
                }
            }
        }
        gemm_tn(qd, batch, a, &cache.query, &dpq, self.w_q.grad_mut(), true);
        gemm_nt(batch, a, qd, &dpq, self.w_q.values(), dquery, true);
    }

    /// Completes the gradient of [`AdditiveAttention::project_keys`].
    pub fn backward_keys(&mut self, keys: &[f64], dproj_keys: &[f64], rows: usize, dkeys: &mut [f64]) {
        let (kd, a) = (self.key_dim(), self.attn_dim());
        gemm_tn(kd, rows, a, keys, dproj_keys, self.w_k.grad_mut(), true);
        gemm_nt(rows, a, kd, dproj_keys, self.w_k.values(), dkeys, true);
    }
}

impl Module for AdditiveAttention {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        f("w_q", &self.w_q);
        f("w_k", &self.w_k);
        f("v", &self.v);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        f("w_q", &mut self.w_q);
        f("w_k", &mut self.w_k);
        f("v", &mut self.v);
    }
}

/// Unrolls the width-`width` windows of a `len x dim` sequence into rows of
/// a `positions x (width * dim)` matrix. Sequences shorter than `width` are
/// zero-padded at the end so there is always at least one position.
pub fn im2col(x: &[f64], len: usize, dim: usize, width: usize) -> (Vec<f64>, usize) {
    let positions = if len >= width { len - width + 1 } else { 1 };
    let mut cols = vec![0.0; positions * width * dim];
    for p in 0..positions {
        let avail = width.min(len - p.min(len));
        let src = &x[p * dim..(p + avail) * dim];
        cols[p * width * dim..p * width * dim + avail * dim].copy_from_slice(src);
    }
    (cols, positions)
}

/// Max over positions of a `positions x maps` matrix; returns the pooled
/// values and the winning position per map (first on ties).
pub fn max_pool_over_time(x: &[f64], positions: usize, maps: usize) -> (Vec<f64>, Vec<usize>) {
    let mut pooled = x[..maps].to_vec();
    let mut argmax = vec![0; maps];
    for p in 1..positions {
        for m in 0..maps {
            let v = x[p * maps + m];
            if v > pooled[m] {
                pooled[m] = v;
                argmax[m] = p;
            }
        }
    }
    (pooled, argmax)
}

/// Bank of 1-d convolutions (ReLU) over a sentence, each max-pooled over time
/// and concatenated: `widths.len() * maps` features per sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBank {
    widths: Vec<usize>,
    pub filters: Vec<Dense>,
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    len: usize,
    per_width: Vec<(Vec<f64>, Vec<f64>, usize, Vec<usize>)>,
}

impl ConvBank {
    pub fn new(dim: usize, widths: &[usize], maps: usize, rng: &mut impl Rng) -> Self {
        ConvBank {
            widths: widths.to_vec(),
            filters: widths.iter().map(|&w| Dense::new(w * dim, maps, rng)).collect(),
        }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn maps(&self) -> usize {
        self.filters[0].output_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.widths.len() * self.maps()
    }

    pub fn forward(&self, x: &[f64], len: usize, dim: usize) -> Result<(Vec<f64>, ConvCache)> {
        ensure!(len >= 1 && x.len() == len * dim, "conv1d_bank: expected a {len} x {dim} input");
        let maps = self.maps();
        let mut features = Vec::with_capacity(self.output_dim());
        let mut per_width = Vec::with_capacity(self.widths.len());
        for (filter, &w) in self.filters.iter().zip(&self.widths) {
            ensure!(
                filter.input_dim() == w * dim,
                "conv1d_bank: filter of width {w} expects dim {}",
                filter.input_dim() / w
            );
            let (cols, positions) = im2col(x, len, dim, w);
            let mut act = filter.forward(&cols, positions)?;
            act.iter_mut().for_each(|v| *v = v.max(0.0));
            let (pooled, argmax) = max_pool_over_time(&act, positions, maps);
            features.extend_from_slice(&pooled);
            per_width.push((cols, act, positions, argmax));
        }
        Ok((features, ConvCache { len, per_width }))
    }

    /// Returns the gradient with respect to the `len x dim` input.
    pub fn backward(&mut self, cache: &ConvCache, dfeatures: &[f64], dim: usize) -> Vec<f64> {
        let maps = self.maps();
        let mut dx = vec![0.0; cache.len * dim];
        for (i, (filter, &w)) in self.filters.iter_mut().zip(&self.widths).enumerate() {
            let (cols, act, positions, argmax) = &cache.per_width[i];
            let mut dact = vec![0.0; positions * maps];
            for m in 0..maps {
                let p = argmax[m];
                if act[p * maps + m] > 0.0 {
                    dact[p * maps + m] = dfeatures[i * maps + m];
                }
            }
            let mut dcols = vec![0.0; cols.len()];
            filter.backward(cols, &dact, *positions, Some(&mut dcols));
            for p in 0..*positions {
                let avail = w.min(cache.len - p.min(cache.len));
                for q in 0..avail * dim {
                    dx[p * dim + q] += dcols[p * w * dim + q];
                }
            }
        }
        dx
    }
}

impl Module for ConvBank {
    fn visit(&self, f: &mut dyn FnMut(&str, &Tensor)) {
        for (filter, w) in self.filters.iter().zip(&self.widths) {
            super::visit_child(filter, &format!("width{w}"), f);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Tensor)) {
        for (filter, w) in self.filters.iter_mut().zip(&self.widths) {
            super::visit_child_mut(filter, &format!("width{w}"), f);
        }
    }
}
