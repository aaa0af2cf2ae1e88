//! Raw forward/backward kernels over flat slices.
//!
//! These are shared by the autodiff tape and by the attribution engines,
//! which need the same linear maps with modified multipliers. Convolutions
//! lower to im2col + sgemm; per-sample work runs on the rayon pool while
//! every cross-sample reduction is accumulated in fixed sample order, so
//! results are bitwise independent of the worker count.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Geometry of a 2-D convolution over an NCHW batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl ConvGeometry {
    pub fn new(input: &[usize], kernel: &[usize], stride: usize, pad: usize) -> Result<Self> {
        if input.len() != 4 || kernel.len() != 4 {
            return Err(Error::shape(
                "conv2d",
                format!("expected 4-D input and kernel, got {input:?} and {kernel:?}"),
            ));
        }
        if stride == 0 {
            return Err(Error::InvalidArgument("conv2d stride must be positive".into()));
        }
        let [n, c, h, w] = [input[0], input[1], input[2], input[3]];
        let [k, kc, kh, kw] = [kernel[0], kernel[1], kernel[2], kernel[3]];
        if kc != c {
            return Err(Error::shape(
                "conv2d",
                format!("input has {c} channels but kernel expects {kc}"),
            ));
        }
        let span_h = h + 2 * pad;
        let span_w = w + 2 * pad;
        if span_h < kh || span_w < kw {
            return Err(Error::shape(
                "conv2d",
                format!("kernel {kh}x{kw} larger than padded input {span_h}x{span_w}"),
            ));
        }
        if (span_h - kh) % stride != 0 || (span_w - kw) % stride != 0 {
            return Err(Error::shape(
                "conv2d",
                format!(
                    "non-integral output extent: ({span_h}-{kh})/{stride}, ({span_w}-{kw})/{stride}"
                ),
            ));
        }
        Ok(ConvGeometry {
            batch: n,
            in_channels: c,
            height: h,
            width: w,
            out_channels: k,
            kernel_h: kh,
            kernel_w: kw,
            stride,
            pad,
            out_h: (span_h - kh) / stride + 1,
            out_w: (span_w - kw) / stride + 1,
        })
    }

    pub fn out_shape(&self) -> [usize; 4] {
        [self.batch, self.out_channels, self.out_h, self.out_w]
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    fn in_sample(&self) -> usize {
        self.in_channels * self.height * self.width
    }

    fn out_sample(&self) -> usize {
        self.out_channels * self.out_plane()
    }
}

/// C = alpha * A(m x k) * B(k x n) + beta * C, with C row-major.
#[allow(clippy::too_many_arguments)]
fn sgemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    rsa: usize,
    csa: usize,
    b: &[f32],
    rsb: usize,
    csb: usize,
    c: &mut [f32],
    beta: f32,
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: callers pass slices sized for the given strides; matrixmultiply
    // only reads within (m-1)*rs + (k-1)*cs of each operand.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

const BLOCK: usize = 256;
/// Kernel gradients at most this large use direct dot products.
const SMALL_PARAMS: usize = 1024;
/// `C (m x n) = A (m x len) * B (n x len)^T`, row-major, for small `m * n`.
fn gemm_dots(m: usize, n: usize, len: usize, a: &[f32], b: &[f32]) -> Vec<f32> {
    #[cfg(target_arch = "x86_64")]
    if std::is_x86_feature_detected!("avx2") && std::is_x86_feature_detected!("fma") {
        // SAFETY: the required CPU features were just detected.
        return unsafe { gemm_dots_fma(m, n, len, a, b) };
    }
    gemm_dots_body(m, n, len, a, b, |acc, x, y| acc + x * y)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn gemm_dots_fma(m: usize, n: usize, len: usize, a: &[f32], b: &[f32]) -> Vec<f32> {
    gemm_dots_body(m, n, len, a, b, |acc, x, y| x.mul_add(y, acc))
}

#[inline(always)]
fn gemm_dots_body(
    m: usize,
    n: usize,
    len: usize,
    a: &[f32],
    b: &[f32],
    fma: impl Fn(f32, f32, f32) -> f32,
) -> Vec<f32> {
    let mut c = vec![0.0f32; m * n];
    for start in (0..len).step_by(BLOCK) {
        let end = (start + BLOCK).min(len);
        for i in 0..m {
            let x = &a[i * len + start..i * len + end];
            for j in 0..n {
                let y = &b[j * len + start..j * len + end];
                let mut lanes = [0.0f32; 16];
                let mut xc = x.chunks_exact(16);
                let mut yc = y.chunks_exact(16);
                for (xs, ys) in (&mut xc).zip(&mut yc) {
                    for l in 0..16 {
                        lanes[l] = fma(lanes[l], xs[l], ys[l]);
                    }
                }
                let tail: f32 = xc.remainder().iter().zip(yc.remainder()).map(|(p, q)| p * q).sum();
                c[i * n + j] += lanes.iter().sum::<f32>() + tail;
            }
        }
    }
    c
}

/// Samples lowered together; fixed by geometry so reductions never depend
/// on the worker count.
fn chunk_samples(g: &ConvGeometry) -> usize {
    const TARGET_WIDTH: usize = 4096;
    TARGET_WIDTH.div_ceil(g.out_plane()).clamp(1, g.batch.max(1))
}

/// Lower one sample into columns `offset..offset + plane` of a patch-major
/// matrix with row stride `stride`.
fn im2col(g: &ConvGeometry, input: &[f32], cols: &mut [f32], stride: usize, offset: usize) {
    let plane = g.out_plane();
    let (h, w) = (g.height as isize, g.width as isize);
    for c in 0..g.in_channels {
        let chan = &input[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let row = (c * g.kernel_h + ki) * g.kernel_w + kj;
                let dst = &mut cols[row * stride + offset..row * stride + offset + plane];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    let line = &mut dst[oy * g.out_w..(oy + 1) * g.out_w];
                    if iy < 0 || iy >= h {
                        line.fill(0.0);
                        continue;
                    }
                    let src = &chan[iy as usize * g.width..(iy as usize + 1) * g.width];
                    if g.stride == 1 && kj >= g.pad && g.width + g.pad >= g.out_w + kj {
                        let x0 = kj - g.pad;
                        line.copy_from_slice(&src[x0..x0 + g.out_w]);
                        continue;
                    }
                    for (ox, out) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        *out = if ix < 0 || ix >= w { 0.0 } else { src[ix as usize] };
                    }
                }
            }
        }
    }
}

fn col2im(g: &ConvGeometry, cols: &[f32], out: &mut [f32], stride: usize, offset: usize) {
    let plane = g.out_plane();
    let (h, w) = (g.height as isize, g.width as isize);
    for c in 0..g.in_channels {
        let chan = &mut out[c * g.height * g.width..(c + 1) * g.height * g.width];
        for ki in 0..g.kernel_h {
            for kj in 0..g.kernel_w {
                let row = (c * g.kernel_h + ki) * g.kernel_w + kj;
                let src = &cols[row * stride + offset..row * stride + offset + plane];
                for oy in 0..g.out_h {
                    let iy = (oy * g.stride + ki) as isize - g.pad as isize;
                    if iy < 0 || iy >= h {
                        continue;
                    }
                    let dst = &mut chan[iy as usize * g.width..(iy as usize + 1) * g.width];
                    for ox in 0..g.out_w {
                        let ix = (ox * g.stride + kj) as isize - g.pad as isize;
                        if ix >= 0 && ix < w {
                            dst[ix as usize] += src[oy * g.out_w + ox];
                        }
                    }
                }
            }
        }
    }
}

/// Copy NCHW output-gradient samples into a `K x (S * plane)` matrix.
fn gather_channels(g: &ConvGeometry, dout: &[f32], dst: &mut [f32]) {
    let plane = g.out_plane();
    let s = dout.len() / g.out_sample();
    for (i, sample) in dout.chunks(g.out_sample()).enumerate() {
        for (k, row) in sample.chunks(plane).enumerate() {
            dst[k * s * plane + i * plane..k * s * plane + (i + 1) * plane].copy_from_slice(row);
        }
    }
}

/// Cross-correlation forward pass. Returns the NCHW output.
pub fn conv2d_forward(g: &ConvGeometry, input: &[f32], kernel: &[f32], bias: &[f32]) -> Vec<f32> {
    let plane = g.out_plane();
    let patch = g.patch_len();
    let chunk = chunk_samples(g);
    let mut out = vec![0.0f32; g.batch * g.out_sample()];
    out.par_chunks_mut(chunk * g.out_sample())
        .zip(input.par_chunks(chunk * g.in_sample()))
        .for_each(|(dst, src)| {
            let s = src.len() / g.in_sample();
            let width = s * plane;
            let mut cols = vec![0.0f32; patch * width];
            for (i, sample) in src.chunks(g.in_sample()).enumerate() {
                im2col(g, sample, &mut cols, width, i * plane);
            }
            let mut tmp = vec![0.0f32; g.out_channels * width];
            for (k, row) in tmp.chunks_mut(width).enumerate() {
                row.fill(bias[k]);
            }
            sgemm(g.out_channels, patch, width, kernel, patch, 1, &cols, width, 1, &mut tmp, 1.0);
            for (i, sample) in dst.chunks_mut(g.out_sample()).enumerate() {
                for (k, row) in sample.chunks_mut(plane).enumerate() {
                    row.copy_from_slice(&tmp[k * width + i * plane..k * width + (i + 1) * plane]);
                }
            }
        });
    out
}

/// Gradient of a convolution with respect to its input.
pub fn conv2d_backward_input(g: &ConvGeometry, kernel: &[f32], grad_out: &[f32]) -> Vec<f32> {
    let plane = g.out_plane();
    let patch = g.patch_len();
    let chunk = chunk_samples(g);
    let mut grad_in = vec![0.0f32; g.batch * g.in_sample()];
    grad_in
        .par_chunks_mut(chunk * g.in_sample())
        .zip(grad_out.par_chunks(chunk * g.out_sample()))
        .for_each(|(dst, dout)| {
            let s = dout.len() / g.out_sample();
            let width = s * plane;
            let mut gathered = vec![0.0f32; g.out_channels * width];
            gather_channels(g, dout, &mut gathered);
            // dcols = kernel^T (patch x K) * dout (K x S*plane)
            let mut dcols = vec![0.0f32; patch * width];
            sgemm(patch, g.out_channels, width, kernel, 1, patch, &gathered, width, 1, &mut dcols, 0.0);
            for (i, sample) in dst.chunks_mut(g.in_sample()).enumerate() {
                col2im(g, &dcols, sample, width, i * plane);
            }
        });
    grad_in
}

/// Gradients of a convolution with respect to kernel and bias.
pub fn conv2d_backward_params(
    g: &ConvGeometry,
    input: &[f32],
    grad_out: &[f32],
) -> (Vec<f32>, Vec<f32>) {
    let plane = g.out_plane();
    let patch = g.patch_len();
    let chunk = chunk_samples(g);
    let partials: Vec<Vec<f32>> = input
        .par_chunks(chunk * g.in_sample())
        .zip(grad_out.par_chunks(chunk * g.out_sample()))
        .map(|(src, dout)| {
            let s = src.len() / g.in_sample();
            let width = s * plane;
            let mut cols = vec![0.0f32; patch * width];
            for (i, sample) in src.chunks(g.in_sample()).enumerate() {
                im2col(g, sample, &mut cols, width, i * plane);
            }
            let mut gathered = vec![0.0f32; g.out_channels * width];
            gather_channels(g, dout, &mut gathered);
            // dout (K x S*plane) * cols^T (S*plane x patch)
            if g.out_channels * patch <= SMALL_PARAMS {
                return gemm_dots(g.out_channels, patch, width, &gathered, &cols);
            }
            let mut gk = vec![0.0f32; g.out_channels * patch];
            sgemm(g.out_channels, width, patch, &gathered, width, 1, &cols, 1, width, &mut gk, 0.0);
            gk
        })
        .collect();
    let mut grad_k = vec![0.0f32; g.out_channels * patch];
    for part in &partials {
        for (acc, v) in grad_k.iter_mut().zip(part) {
            *acc += v;
        }
    }
    let mut grad_b = vec![0.0f64; g.out_channels];
    for n in 0..g.batch {
        let dout = &grad_out[n * g.out_sample()..(n + 1) * g.out_sample()];
        for (k, row) in dout.chunks(plane).enumerate() {
            grad_b[k] += row.iter().map(|&v| v as f64).sum::<f64>();
        }
    }
    (grad_k, grad_b.into_iter().map(|v| v as f32).collect())
}

/// Geometry of a max-pool over an NCHW batch (floor semantics).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolGeometry {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub size: usize,
    pub stride: usize,
    pub out_h: usize,
    pub out_w: usize,
}

impl PoolGeometry {
    pub fn new(input: &[usize], size: usize, stride: usize) -> Result<Self> {
        if input.len() != 4 {
            return Err(Error::shape("maxpool2d", format!("expected 4-D input, got {input:?}")));
        }
        if size == 0 || stride == 0 {
            return Err(Error::InvalidArgument("maxpool2d size and stride must be positive".into()));
        }
        let (h, w) = (input[2], input[3]);
        if h < size || w < size {
            return Err(Error::shape(
                "maxpool2d",
                format!("input {h}x{w} smaller than window {size}"),
            ));
        }
        Ok(PoolGeometry {
            batch: input[0],
            channels: input[1],
            height: h,
            width: w,
            size,
            stride,
            out_h: (h - size) / stride + 1,
            out_w: (w - size) / stride + 1,
        })
    }

    pub fn out_shape(&self) -> [usize; 4] {
        [self.batch, self.channels, self.out_h, self.out_w]
    }
}

/// Max-pool forward. `switches[i]` is the flat input index that produced
/// output `i`; ties resolve to the smallest row-major index.
pub fn maxpool_forward(g: &PoolGeometry, input: &[f32]) -> (Vec<f32>, Vec<usize>) {
    let planes = g.batch * g.channels;
    let in_plane = g.height * g.width;
    let out_plane = g.out_h * g.out_w;
    let mut out = vec![0.0f32; planes * out_plane];
    let mut switches = vec![0usize; planes * out_plane];
    if out_plane == 0 {
        return (out, switches);
    }
    out.par_chunks_mut(out_plane)
        .zip(switches.par_chunks_mut(out_plane))
        .enumerate()
        .for_each(|(p, (o, s))| {
            let base = p * in_plane;
            let plane = &input[base..base + in_plane];
            if g.size == 2 && g.stride == 2 {
                pool2_plane(g, plane, base, o, s);
            } else {
                pool_plane(g, plane, base, o, s);
            }
        });
    (out, switches)
}

fn pool_plane(g: &PoolGeometry, plane: &[f32], base: usize, out: &mut [f32], sw: &mut [usize]) {
    for oy in 0..g.out_h {
        for ox in 0..g.out_w {
            let mut best = f32::NEG_INFINITY;
            let mut best_idx = usize::MAX;
            for dy in 0..g.size {
                let row = (oy * g.stride + dy) * g.width + ox * g.stride;
                for dx in 0..g.size {
                    let v = plane[row + dx];
                    if best_idx == usize::MAX || v > best {
                        best = v;
                        best_idx = row + dx;
                    }
                }
            }
            out[oy * g.out_w + ox] = best;
            sw[oy * g.out_w + ox] = base + best_idx;
        }
    }
}

fn pool2_plane(g: &PoolGeometry, plane: &[f32], base: usize, out: &mut [f32], sw: &mut [usize]) {
    let w = g.width;
    for oy in 0..g.out_h {
        let top = &plane[2 * oy * w..2 * oy * w + w];
        let bot = &plane[(2 * oy + 1) * w..(2 * oy + 2) * w];
        let o = &mut out[oy * g.out_w..(oy + 1) * g.out_w];
        let s = &mut sw[oy * g.out_w..(oy + 1) * g.out_w];
        let row0 = base + 2 * oy * w;
        for (ox, ((t, b), (ov, sv))) in top
            .chunks_exact(2)
            .zip(bot.chunks_exact(2))
            .zip(o.iter_mut().zip(s.iter_mut()))
            .enumerate()
        {
            let (mut best, mut idx) = (t[0], 0);
            if t[1] > best {
                best = t[1];
                idx = 1;
            }
            if b[0] > best {
                best = b[0];
                idx = w;
            }
            if b[1] > best {
                best = b[1];
                idx = w + 1;
            }
            *ov = best;
            *sv = row0 + 2 * ox + idx;
        }
    }
}

pub fn maxpool_backward(input_len: usize, switches: &[usize], grad_out: &[f32]) -> Vec<f32> {
    let mut grad_in = vec![0.0f32; input_len];
    for (&s, &g) in switches.iter().zip(grad_out) {
        grad_in[s] += g;
    }
    grad_in
}

/// `x (n x f) * w^T (f x o) + b`.
pub fn linear_forward(
    x: &[f32],
    w: &[f32],
    b: &[f32],
    n: usize,
    f: usize,
    o: usize,
) -> Vec<f32> {
    let mut out = Vec::with_capacity(n * o);
    for _ in 0..n {
        out.extend_from_slice(b);
    }
    sgemm(n, f, o, x, f, 1, w, 1, f, &mut out, 1.0);
    out
}

/// `grad_out (n x o) * w (o x f)`.
pub fn linear_backward_input(w: &[f32], grad_out: &[f32], n: usize, f: usize, o: usize) -> Vec<f32> {
    let mut grad_x = vec![0.0f32; n * f];
    sgemm(n, o, f, grad_out, o, 1, w, f, 1, &mut grad_x, 0.0);
    grad_x
}

/// Weight gradient `grad_out^T (o x n) * x (n x f)` and bias gradient.
pub fn linear_backward_params(
    x: &[f32],
    grad_out: &[f32],
    n: usize,
    f: usize,
    o: usize,
) -> (Vec<f32>, Vec<f32>) {
    let mut grad_w = vec![0.0f32; o * f];
    sgemm(o, n, f, grad_out, 1, o, x, f, 1, &mut grad_w, 0.0);
    let mut grad_b = vec![0.0f64; o];
    for row in grad_out.chunks(o) {
        for (acc, &g) in grad_b.iter_mut().zip(row) {
            *acc += g as f64;
        }
    }
    (grad_w, grad_b.into_iter().map(|v| v as f32).collect())
}
