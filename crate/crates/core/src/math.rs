//! f32 kernels shared by the base model and the policy network: GEMM on
//! row-major slices, softmax/log-softmax, and a plain Adam optimizer.

/// C = alpha * op(A) @ op(B) + beta * C, all row-major slices.
///
/// `m`, `k`, `n` are the logical shapes after transposition: op(A) is m x k,
/// op(B) is k x n, C is m x n. `ta`/`tb` select whether the stored buffer is
/// the transpose of the logical operand.
pub fn gemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f32,
    a: &[f32],
    ta: bool,
    b: &[f32],
    tb: bool,
    beta: f32,
    c: &mut [f32],
) {
    assert_eq!(a.len(), m * k, "A shape mismatch");
    assert_eq!(b.len(), k * n, "B shape mismatch");
    assert_eq!(c.len(), m * n, "C shape mismatch");
    if m == 0 || n == 0 || k == 0 {
        if beta == 0.0 {
            c.fill(0.0);
        } else if beta != 1.0 {
            c.iter_mut().for_each(|x| *x *= beta);
        }
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    // Eight independent accumulators combined in a fixed order: gives the
    // compiler ILP/SIMD headroom while staying deterministic.
    let n = a.len();
    let chunks = n / 8;
    let mut s = [0.0f32; 8];
    for c in 0..chunks {
        let base = c * 8;
        for lane in 0..8 {
            s[lane] += a[base + lane] * b[base + lane];
        }
    }
    let mut tail = 0.0f32;
    for i in chunks * 8..n {
        tail += a[i] * b[i];
    }
    (((s[0] + s[4]) + (s[1] + s[5])) + ((s[2] + s[6]) + (s[3] + s[7]))) + tail
}

/// y = W @ x for row-major W of shape (y.len() x x.len()).
pub fn gemv(y: &mut [f32], w: &[f32], x: &[f32]) {
    let n = x.len();
    debug_assert_eq!(w.len(), y.len() * n);
    for (r, out) in y.iter_mut().enumerate() {
        *out = dot(&w[r * n..(r + 1) * n], x);
    }
}

pub fn add_assign(acc: &mut [f32], x: &[f32]) {
    debug_assert_eq!(acc.len(), x.len());
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

pub fn axpy(acc: &mut [f32], alpha: f32, x: &[f32]) {
    debug_assert_eq!(acc.len(), x.len());
    for (a, b) in acc.iter_mut().zip(x) {
        *a += alpha * b;
    }
}

/// In-place max-subtracted softmax. Returns the pre-subtraction max.
pub fn softmax_in_place(x: &mut [f32]) -> f32 {
    let max = x.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut sum = 0.0f32;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    let inv = 1.0 / sum;
    for v in x.iter_mut() {
        *v *= inv;
    }
    max
}

/// log softmax(x)[target] computed in f64 for a stable NLL.
pub fn log_softmax_at(x: &[f32], target: usize) -> f64 {
    let max = x.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let mut sum = 0.0f64;
    for &v in x {
        sum += (v as f64 - max).exp();
    }
    x[target] as f64 - max - sum.ln()
}

/// Shannon entropy (nats) of softmax(x).
pub fn softmax_entropy(x: &[f32]) -> f64 {
    let max = x.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let mut sum = 0.0f64;
    for &v in x {
        sum += (v as f64 - max).exp();
    }
    let ln_sum = sum.ln();
    let mut h = 0.0f64;
    for &v in x {
        let logp = v as f64 - max - ln_sum;
        h -= logp.exp() * logp;
    }
    h
}

/// Argmax with lowest-index tie-break.
pub fn argmax(x: &[f32]) -> usize {
    let mut best = 0;
    let mut best_v = f32::NEG_INFINITY;
    for (i, &v) in x.iter().enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// A named parameter tensor paired with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub w: Vec<f32>,
    pub g: Vec<f32>,
}

impl Param {
    pub fn new(w: Vec<f32>) -> Self {
        let g = vec![0.0; w.len()];
        Param { w, g }
    }

    pub fn zero_grad(&mut self) {
        self.g.fill(0.0);
    }
}

/// Plain Adam with bias correction and global-norm gradient clipping.
pub struct Adam {
    pub lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    pub eps: f32,
    pub max_grad_norm: f32,
    step: u64,
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
}

impl Adam {
    pub fn new(lr: f32, max_grad_norm: f32) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            max_grad_norm,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// Applies one update to every param; returns the pre-clip gradient norm.
    pub fn step(&mut self, params: &mut [&mut Param]) -> f32 {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.w.len()]).collect();
            self.v = params.iter().map(|p| vec![0.0; p.w.len()]).collect();
        }
        let mut sq = 0.0f64;
        for p in params.iter() {
            for &g in &p.g {
                sq += (g as f64) * (g as f64);
            }
        }
        let norm = sq.sqrt() as f32;
        let scale = if self.max_grad_norm > 0.0 && norm > self.max_grad_norm {
            self.max_grad_norm / norm
        } else {
            1.0
        };
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.w.len() {
                let g = p.g[j] * scale;
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let mhat = m[j] / bc1;
                let vhat = v[j] / bc2;
                p.w[j] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        norm
    }
}
