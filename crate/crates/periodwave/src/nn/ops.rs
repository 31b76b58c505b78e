//! Differentiable operations over [`Tensor`] values on a [`Tape`].
//!
//! Layout conventions: conv features are [B, C, H, W]; 1-D feature maps are
//! [B, C, L]; vectors are [B, D]. Backward closures recompute cheap
//! intermediates instead of caching them.

use super::tape::{Tape, Val};
use super::tensor::Tensor;

// ---------------------------------------------------------------------------
// matmul kernels
// ---------------------------------------------------------------------------

/// out[m,n] += a[m,k] * b[k,n]
pub fn matmul_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (kk, &aik) in arow.iter().enumerate() {
            if aik == 0.0 {
                continue;
            }
            let brow = &b[kk * n..(kk + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aik * bv;
            }
        }
    }
}

/// out[m,n] += a[k,m]^T * b[k,n]
pub fn matmul_at_b_acc(a: &[f64], b: &[f64], k: usize, m: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), k * m);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    for kk in 0..k {
        let arow = &a[kk * m..(kk + 1) * m];
        let brow = &b[kk * n..(kk + 1) * n];
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let orow = &mut out[i * n..(i + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
}

/// out[m,n] += a[m,k] * b[n,k]^T
pub fn matmul_a_bt_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    debug_assert_eq!(out.len(), m * n);
    for i in 0..m {
        let arow = &a[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (j, o) in orow.iter_mut().enumerate() {
            let brow = &b[j * k..(j + 1) * k];
            let mut acc = 0.0;
            for (&av, &bv) in arow.iter().zip(brow) {
                acc += av * bv;
            }
            *o += acc;
        }
    }
}

// ---------------------------------------------------------------------------
// convolution geometry
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub pad: (usize, usize),
    pub dilation: (usize, usize),
}

impl ConvSpec {
    pub fn out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let oh = (h + 2 * self.pad.0 - self.dilation.0 * (self.kernel.0 - 1) - 1) / self.stride.0 + 1;
        let ow = (w + 2 * self.pad.1 - self.dilation.1 * (self.kernel.1 - 1) - 1) / self.stride.1 + 1;
        (oh, ow)
    }

    /// Output size when used as a transposed convolution.
    pub fn transpose_out_hw(&self, h: usize, w: usize) -> (usize, usize) {
        let oh = (h - 1) * self.stride.0 + self.dilation.0 * (self.kernel.0 - 1) + 1 - 2 * self.pad.0;
        let ow = (w - 1) * self.stride.1 + self.dilation.1 * (self.kernel.1 - 1) + 1 - 2 * self.pad.1;
        (oh, ow)
    }
}

/// Expand one [C, H, W] image into a [C*kh*kw, oh*ow] patch matrix.
fn im2col(
    x: &[f64],
    c: usize,
    h: usize,
    w: usize,
    spec: &ConvSpec,
    oh: usize,
    ow: usize,
    col: &mut [f64],
) {
    let (kh, kw) = spec.kernel;
    debug_assert_eq!(col.len(), c * kh * kw * oh * ow);
    col.fill(0.0);
    for ch in 0..c {
        let img = &x[ch * h * w..(ch + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = ((ch * kh + ki) * kw + kj) * oh * ow;
                for oy in 0..oh {
                    let iy = (oy * spec.stride.0 + ki * spec.dilation.0) as isize - spec.pad.0 as isize;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    let iy = iy as usize;
                    for ox in 0..ow {
                        let ix =
                            (ox * spec.stride.1 + kj * spec.dilation.1) as isize - spec.pad.1 as isize;
                        if ix < 0 || ix as usize >= w {
                            continue;
                        }
                        col[row + oy * ow + ox] = img[iy * w + ix as usize];
                    }
                }
            }
        }
    }
}

/// Scatter-add the inverse of [`im2col`]: col is [C*kh*kw, oh*ow], x is [C, H, W].
fn col2im(
    col: &[f64],
    c: usize,
    h: usize,
    w: usize,
    spec: &ConvSpec,
    oh: usize,
    ow: usize,
    x: &mut [f64],
) {
    let (kh, kw) = spec.kernel;
    for ch in 0..c {
        let img = &mut x[ch * h * w..(ch + 1) * h * w];
        for ki in 0..kh {
            for kj in 0..kw {
                let row = ((ch * kh + ki) * kw + kj) * oh * ow;
                for oy in 0..oh {
                    let iy = (oy * spec.stride.0 + ki * spec.dilation.0) as isize - spec.pad.0 as isize;
                    if iy < 0 || iy as usize >= h {
                        continue;
                    }
                    let iy = iy as usize;
                    for ox in 0..ow {
                        let ix =
                            (ox * spec.stride.1 + kj * spec.dilation.1) as isize - spec.pad.1 as isize;
                        if ix < 0 || ix as usize >= w {
                            continue;
                        }
                        img[iy * w + ix as usize] += col[row + oy * ow + ox];
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// conv2d / conv_transpose2d
// ---------------------------------------------------------------------------

/// x: [B, Cin, H, W], w: [Cout, Cin, kh, kw], b: [Cout] -> [B, Cout, oh, ow]
pub fn conv2d(tape: &mut Tape, x: &Val, w: &Val, b: &Val, spec: ConvSpec) -> Val {
    let (bs, cin, h, wd) = (x.t.dim(0), x.t.dim(1), x.t.dim(2), x.t.dim(3));
    let cout = w.t.dim(0);
    debug_assert_eq!(w.t.dim(1), cin);
    let (kh, kw) = spec.kernel;
    let (oh, ow) = spec.out_hw(h, wd);
    let ck = cin * kh * kw;
    let hw = oh * ow;

    let mut out = vec![0.0; bs * cout * hw];
    let mut col = vec![0.0; ck * hw];
    for bi in 0..bs {
        im2col(&x.t.data()[bi * cin * h * wd..], cin, h, wd, &spec, oh, ow, &mut col);
        matmul_acc(w.t.data(), &col, cout, ck, hw, &mut out[bi * cout * hw..(bi + 1) * cout * hw]);
    }
    for bi in 0..bs {
        for c in 0..cout {
            let bias = b.t.data()[c];
            for v in &mut out[(bi * cout + c) * hw..(bi * cout + c + 1) * hw] {
                *v += bias;
            }
        }
    }
    let out = Tensor::new(vec![bs, cout, oh, ow], out);

    let (xi, wi, bi_id) = (x.id, w.id, b.id);
    let (xt, wt) = (x.t.clone(), w.t.clone());
    tape.push(out, move |gy| {
        let mut grads = Vec::new();
        let gyd = gy.data();
        if let Some(id) = bi_id {
            let mut gb = vec![0.0; cout];
            for bb in 0..bs {
                for c in 0..cout {
                    gb[c] += gyd[(bb * cout + c) * hw..(bb * cout + c + 1) * hw]
                        .iter()
                        .sum::<f64>();
                }
            }
            grads.push((id, Tensor::new(vec![cout], gb)));
        }
        let mut col = vec![0.0; ck * hw];
        if let Some(id) = wi {
            let mut gw = vec![0.0; cout * ck];
            for bb in 0..bs {
                im2col(&xt.data()[bb * cin * h * wd..], cin, h, wd, &spec, oh, ow, &mut col);
                matmul_a_bt_acc(&gyd[bb * cout * hw..(bb + 1) * cout * hw], &col, cout, hw, ck, &mut gw);
            }
            grads.push((id, Tensor::new(vec![cout, cin, kh, kw], gw)));
        }
        if let Some(id) = xi {
            let mut gx = vec![0.0; bs * cin * h * wd];
            let mut gcol = vec![0.0; ck * hw];
            for bb in 0..bs {
                gcol.fill(0.0);
                matmul_at_b_acc(
                    wt.data(),
                    &gyd[bb * cout * hw..(bb + 1) * cout * hw],
                    cout,
                    ck,
                    hw,
                    &mut gcol,
                );
                col2im(&gcol, cin, h, wd, &spec, oh, ow, &mut gx[bb * cin * h * wd..(bb + 1) * cin * h * wd]);
            }
            grads.push((id, Tensor::new(vec![bs, cin, h, wd], gx)));
        }
        grads
    })
}

/// x: [B, Cin, H, W], w: [Cin, Cout, kh, kw], b: [Cout] -> upsampled output.
pub fn conv_transpose2d(tape: &mut Tape, x: &Val, w: &Val, b: &Val, spec: ConvSpec) -> Val {
    let (bs, cin, h, wd) = (x.t.dim(0), x.t.dim(1), x.t.dim(2), x.t.dim(3));
    debug_assert_eq!(w.t.dim(0), cin);
    let cout = w.t.dim(1);
    let (kh, kw) = spec.kernel;
    let (oh, ow) = spec.transpose_out_hw(h, wd);
    let ck = cout * kh * kw;
    let hw = h * wd;

    let mut out = vec![0.0; bs * cout * oh * ow];
    let mut col = vec![0.0; ck * hw];
    for bi in 0..bs {
        col.fill(0.0);
        matmul_at_b_acc(w.t.data(), &x.t.data()[bi * cin * hw..(bi + 1) * cin * hw], cin, ck, hw, &mut col);
        col2im(&col, cout, oh, ow, &spec, h, wd, &mut out[bi * cout * oh * ow..(bi + 1) * cout * oh * ow]);
    }
    for bi in 0..bs {
        for c in 0..cout {
            let bias = b.t.data()[c];
            for v in &mut out[(bi * cout + c) * oh * ow..(bi * cout + c + 1) * oh * ow] {
                *v += bias;
            }
        }
    }
    let out = Tensor::new(vec![bs, cout, oh, ow], out);

    let (xi, wi, bi_id) = (x.id, w.id, b.id);
    let (xt, wt) = (x.t.clone(), w.t.clone());
    tape.push(out, move |gy| {
        let mut grads = Vec::new();
        let gyd = gy.data();
        let ohw = oh * ow;
        if let Some(id) = bi_id {
            let mut gb = vec![0.0; cout];
            for bb in 0..bs {
                for c in 0..cout {
                    gb[c] += gyd[(bb * cout + c) * ohw..(bb * cout + c + 1) * ohw]
                        .iter()
                        .sum::<f64>();
                }
            }
            grads.push((id, Tensor::new(vec![cout], gb)));
        }
        let mut gycol = vec![0.0; ck * hw];
        if let Some(id) = wi {
            let mut gw = vec![0.0; cin * ck];
            for bb in 0..bs {
                im2col(&gyd[bb * cout * ohw..], cout, oh, ow, &spec, h, wd, &mut gycol);
                matmul_a_bt_acc(
                    &xt.data()[bb * cin * hw..(bb + 1) * cin * hw],
                    &gycol,
                    cin,
                    hw,
                    ck,
                    &mut gw,
                );
            }
            grads.push((id, Tensor::new(vec![cin, cout, kh, kw], gw)));
        }
        if let Some(id) = xi {
            let mut gx = vec![0.0; bs * cin * hw];
            for bb in 0..bs {
                im2col(&gyd[bb * cout * ohw..], cout, oh, ow, &spec, h, wd, &mut gycol);
                matmul_acc(
                    wt.data(),
                    &gycol,
                    cin,
                    ck,
                    hw,
                    &mut gx[bb * cin * hw..(bb + 1) * cin * hw],
                );
            }
            grads.push((id, Tensor::new(vec![bs, cin, h, wd], gx)));
        }
        grads
    })
}

// ---------------------------------------------------------------------------
// pointwise / linear / depthwise
// ---------------------------------------------------------------------------

/// 1x1 convolution over [B, C, L]: w [O, C], b [O] -> [B, O, L]
pub fn pointwise1d(tape: &mut Tape, x: &Val, w: &Val, b: &Val) -> Val {
    let (bs, c, l) = (x.t.dim(0), x.t.dim(1), x.t.dim(2));
    let o = w.t.dim(0);
    let mut out = vec![0.0; bs * o * l];
    for bi in 0..bs {
        matmul_acc(
            w.t.data(),
            &x.t.data()[bi * c * l..(bi + 1) * c * l],
            o,
            c,
            l,
            &mut out[bi * o * l..(bi + 1) * o * l],
        );
    }
    for bi in 0..bs {
        for ch in 0..o {
            let bias = b.t.data()[ch];
            for v in &mut out[(bi * o + ch) * l..(bi * o + ch + 1) * l] {
                *v += bias;
            }
        }
    }
    let out = Tensor::new(vec![bs, o, l], out);
    let (xi, wi, bi_id) = (x.id, w.id, b.id);
    let (xt, wt) = (x.t.clone(), w.t.clone());
    tape.push(out, move |gy| {
        let gyd = gy.data();
        let mut grads = Vec::new();
        if let Some(id) = bi_id {
            let mut gb = vec![0.0; o];
            for bb in 0..bs {
                for ch in 0..o {
                    gb[ch] += gyd[(bb * o + ch) * l..(bb * o + ch + 1) * l].iter().sum::<f64>();
                }
            }
            grads.push((id, Tensor::new(vec![o], gb)));
        }
        if let Some(id) = wi {
            let mut gw = vec![0.0; o * c];
            for bb in 0..bs {
                matmul_a_bt_acc(
                    &gyd[bb * o * l..(bb + 1) * o * l],
                    &xt.data()[bb * c * l..(bb + 1) * c * l],
                    o,
                    l,
                    c,
                    &mut gw,
                );
            }
            grads.push((id, Tensor::new(vec![o, c], gw)));
        }
        if let Some(id) = xi {
            let mut gx = vec![0.0; bs * c * l];
            for bb in 0..bs {
                matmul_at_b_acc(
                    wt.data(),
                    &gyd[bb * o * l..(bb + 1) * o * l],
                    o,
                    c,
                    l,
                    &mut gx[bb * c * l..(bb + 1) * c * l],
                );
            }
            grads.push((id, Tensor::new(vec![bs, c, l], gx)));
        }
        grads
    })
}

/// x [B, Din], w [Dout, Din], b [Dout] -> [B, Dout]
pub fn linear(tape: &mut Tape, x: &Val, w: &Val, b: &Val) -> Val {
    let (bs, din) = (x.t.dim(0), x.t.dim(1));
    let dout = w.t.dim(0);
    let mut out = vec![0.0; bs * dout];
    matmul_a_bt_acc(x.t.data(), w.t.data(), bs, din, dout, &mut out);
    for bi in 0..bs {
        for (v, bb) in out[bi * dout..(bi + 1) * dout].iter_mut().zip(b.t.data()) {
            *v += bb;
        }
    }
    let out = Tensor::new(vec![bs, dout], out);
    let (xi, wi, bi_id) = (x.id, w.id, b.id);
    let (xt, wt) = (x.t.clone(), w.t.clone());
    tape.push(out, move |gy| {
        let gyd = gy.data();
        let mut grads = Vec::new();
        if let Some(id) = bi_id {
            let mut gb = vec![0.0; dout];
            for bb in 0..bs {
                for (g, &v) in gb.iter_mut().zip(&gyd[bb * dout..(bb + 1) * dout]) {
                    *g += v;
                }
            }
            grads.push((id, Tensor::new(vec![dout], gb)));
        }
        if let Some(id) = wi {
            let mut gw = vec![0.0; dout * din];
            matmul_at_b_acc(gyd, xt.data(), bs, dout, din, &mut gw);
            grads.push((id, Tensor::new(vec![dout, din], gw)));
        }
        if let Some(id) = xi {
            let mut gx = vec![0.0; bs * din];
            matmul_acc(gyd, wt.data(), bs, dout, din, &mut gx);
            grads.push((id, Tensor::new(vec![bs, din], gx)));
        }
        grads
    })
}

/// Depthwise conv over [B, C, L]: w [C, k], b [C], stride 1, pad `pad`.
pub fn dwconv1d(tape: &mut Tape, x: &Val, w: &Val, b: &Val, pad: usize) -> Val {
    let (bs, c, l) = (x.t.dim(0), x.t.dim(1), x.t.dim(2));
    let k = w.t.dim(1);
    let ol = l + 2 * pad + 1 - k;
    let xd = x.t.data();
    let wd = w.t.data();
    let mut out = vec![0.0; bs * c * ol];
    for bi in 0..bs {
        for ch in 0..c {
            let xrow = &xd[(bi * c + ch) * l..(bi * c + ch + 1) * l];
            let wrow = &wd[ch * k..(ch + 1) * k];
            let bias = b.t.data()[ch];
            let orow = &mut out[(bi * c + ch) * ol..(bi * c + ch + 1) * ol];
            for (oi, o) in orow.iter_mut().enumerate() {
                let mut acc = bias;
                for (ki, &wv) in wrow.iter().enumerate() {
                    let idx = oi + ki;
                    if idx >= pad && idx - pad < l {
                        acc += wv * xrow[idx - pad];
                    }
                }
                *o = acc;
            }
        }
    }
    let out = Tensor::new(vec![bs, c, ol], out);
    let (xi, wi, bi_id) = (x.id, w.id, b.id);
    let (xt, wt) = (x.t.clone(), w.t.clone());
    tape.push(out, move |gy| {
        let gyd = gy.data();
        let mut grads = Vec::new();
        if let Some(id) = bi_id {
            let mut gb = vec![0.0; c];
            for bb in 0..bs {
                for ch in 0..c {
                    gb[ch] += gyd[(bb * c + ch) * ol..(bb * c + ch + 1) * ol].iter().sum::<f64>();
                }
            }
            grads.push((id, Tensor::new(vec![c], gb)));
        }
        if let Some(id) = wi {
            let mut gw = vec![0.0; c * k];
            for bb in 0..bs {
                for ch in 0..c {
                    let xrow = &xt.data()[(bb * c + ch) * l..(bb * c + ch + 1) * l];
                    let grow = &gyd[(bb * c + ch) * ol..(bb * c + ch + 1) * ol];
                    for ki in 0..k {
                        let mut acc = 0.0;
                        for (oi, &g) in grow.iter().enumerate() {
                            let idx = oi + ki;
                            if idx >= pad && idx - pad < l {
                                acc += g * xrow[idx - pad];
                            }
                        }
                        gw[ch * k + ki] += acc;
                    }
                }
            }
            grads.push((id, Tensor::new(vec![c, k], gw)));
        }
        if let Some(id) = xi {
            let mut gx = vec![0.0; bs * c * l];
            for bb in 0..bs {
                for ch in 0..c {
                    let wrow = &wt.data()[ch * k..(ch + 1) * k];
                    let grow = &gyd[(bb * c + ch) * ol..(bb * c + ch + 1) * ol];
                    let gxrow = &mut gx[(bb * c + ch) * l..(bb * c + ch + 1) * l];
                    for (oi, &g) in grow.iter().enumerate() {
                        for (ki, &wv) in wrow.iter().enumerate() {
                            let idx = oi + ki;
                            if idx >= pad && idx - pad < l {
                                gxrow[idx - pad] += g * wv;
                            }
                        }
                    }
                }
            }
            grads.push((id, Tensor::new(vec![bs, c, l], gx)));
        }
        grads
    })
}

// ---------------------------------------------------------------------------
// normalization
// ---------------------------------------------------------------------------

const NORM_EPS: f64 = 1e-6;

/// LayerNorm over the channel axis of [B, C, L] with per-channel affine.
pub fn layer_norm_chan(tape: &mut Tape, x: &Val, g: &Val, b: &Val) -> Val {
    let (bs, c, l) = (x.t.dim(0), x.t.dim(1), x.t.dim(2));
    let xd = x.t.data();
    let gd = g.t.data();
    let bd = b.t.data();
    let mut out = vec![0.0; bs * c * l];
    for bi in 0..bs {
        for li in 0..l {
            let mut mu = 0.0;
            for ch in 0..c {
                mu += xd[(bi * c + ch) * l + li];
            }
            mu /= c as f64;
            let mut var = 0.0;
            for ch in 0..c {
                let d = xd[(bi * c + ch) * l + li] - mu;
                var += d * d;
            }
            var /= c as f64;
            let inv = 1.0 / (var + NORM_EPS).sqrt();
            for ch in 0..c {
                let xhat = (xd[(bi * c + ch) * l + li] - mu) * inv;
                out[(bi * c + ch) * l + li] = gd[ch] * xhat + bd[ch];
            }
        }
    }
    let out = Tensor::new(vec![bs, c, l], out);
    let (xi, gi, bi_id) = (x.id, g.id, b.id);
    let (xt, gt) = (x.t.clone(), g.t.clone());
    tape.push(out, move |gy| {
        let gyd = gy.data();
        let xd = xt.data();
        let gd = gt.data();
        let mut gx = vec![0.0; bs * c * l];
        let mut gg = vec![0.0; c];
        let mut gb = vec![0.0; c];
        for bb in 0..bs {
            for li in 0..l {
                let mut mu = 0.0;
                for ch in 0..c {
                    mu += xd[(bb * c + ch) * l + li];
                }
                mu /= c as f64;
                let mut var = 0.0;
                for ch in 0..c {
                    let d = xd[(bb * c + ch) * l + li] - mu;
                    var += d * d;
                }
                var /= c as f64;
                let inv = 1.0 / (var + NORM_EPS).sqrt();
                // dxhat = gy * gamma; dx via the standard layernorm identity
                let mut mean_dxhat = 0.0;
                let mut mean_dxhat_xhat = 0.0;
                for ch in 0..c {
                    let xhat = (xd[(bb * c + ch) * l + li] - mu) * inv;
                    let dxh = gyd[(bb * c + ch) * l + li] * gd[ch];
                    mean_dxhat += dxh;
                    mean_dxhat_xhat += dxh * xhat;
                }
                mean_dxhat /= c as f64;
                mean_dxhat_xhat /= c as f64;
                for ch in 0..c {
                    let idx = (bb * c + ch) * l + li;
                    let xhat = (xd[idx] - mu) * inv;
                    let dxh = gyd[idx] * gd[ch];
                    gx[idx] = inv * (dxh - mean_dxhat - xhat * mean_dxhat_xhat);
                    gg[ch] += gyd[idx] * xhat;
                    gb[ch] += gyd[idx];
                }
            }
        }
        let mut grads = Vec::new();
        if let Some(id) = xi {
            grads.push((id, Tensor::new(vec![bs, c, l], gx)));
        }
        if let Some(id) = gi {
            grads.push((id, Tensor::new(vec![c], gg)));
        }
        if let Some(id) = bi_id {
            grads.push((id, Tensor::new(vec![c], gb)));
        }
        grads
    })
}

/// Global response normalization over [B, C, L] (channels-first layout):
/// gx = ||x||_2 over L, nx = gx / mean_c(gx), y = g*(x*nx) + b + x.
pub fn grn_chan(tape: &mut Tape, x: &Val, g: &Val, b: &Val) -> Val {
    let (bs, c, l) = (x.t.dim(0), x.t.dim(1), x.t.dim(2));
    let xd = x.t.data();
    let gd = g.t.data();
    let bd = b.t.data();
    let mut gxn = vec![0.0; bs * c]; // L2 norms
    let mut nx = vec![0.0; bs * c];
    for bi in 0..bs {
        let mut mean = 0.0;
        for ch in 0..c {
            let row = &xd[(bi * c + ch) * l..(bi * c + ch + 1) * l];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            gxn[bi * c + ch] = norm;
            mean += norm;
        }
        mean /= c as f64;
        for ch in 0..c {
            nx[bi * c + ch] = gxn[bi * c + ch] / (mean + NORM_EPS);
        }
    }
    let mut out = vec![0.0; bs * c * l];
    for bi in 0..bs {
        for ch in 0..c {
            let scale = gd[ch] * nx[bi * c + ch];
            let row = &xd[(bi * c + ch) * l..(bi * c + ch + 1) * l];
            let orow = &mut out[(bi * c + ch) * l..(bi * c + ch + 1) * l];
            for (o, &v) in orow.iter_mut().zip(row) {
                *o = scale * v + bd[ch] + v;
            }
        }
    }
    let out = Tensor::new(vec![bs, c, l], out);
    let (xi, gi, bi_id) = (x.id, g.id, b.id);
    let (xt, gt) = (x.t.clone(), g.t.clone());
    tape.push(out, move |gy| {
        let gyd = gy.data();
        let xd = xt.data();
        let gd = gt.data();
        // recompute norms
        let mut gxn = vec![0.0; bs * c];
        let mut means = vec![0.0; bs];
        for bb in 0..bs {
            for ch in 0..c {
                let row = &xd[(bb * c + ch) * l..(bb * c + ch + 1) * l];
                gxn[bb * c + ch] = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                means[bb] += gxn[bb * c + ch];
            }
            means[bb] /= c as f64;
        }
        let mut gx = vec![0.0; bs * c * l];
        let mut gg = vec![0.0; c];
        let mut gb = vec![0.0; c];
        for bb in 0..bs {
            let denom = means[bb] + NORM_EPS;
            // s[ch] = dL/d nx[ch] = sum_l gy * g * x
            let mut s = vec![0.0; c];
            for ch in 0..c {
                let row = &xd[(bb * c + ch) * l..(bb * c + ch + 1) * l];
                let grow = &gyd[(bb * c + ch) * l..(bb * c + ch + 1) * l];
                let mut acc = 0.0;
                for (&xv, &gv) in row.iter().zip(grow) {
                    acc += gv * xv;
                }
                s[ch] = acc * gd[ch];
                let nxv = gxn[bb * c + ch] / denom;
                gg[ch] += acc * nxv;
                gb[ch] += grow.iter().sum::<f64>();
            }
            // dL/dgx[ch'] = s[ch']/denom - (sum_ch s*gx)/ (denom^2 * C)
            let sum_s_gx: f64 = (0..c).map(|ch| s[ch] * gxn[bb * c + ch]).sum();
            for ch in 0..c {
                let dgx = s[ch] / denom - sum_s_gx / (denom * denom * c as f64);
                let norm = gxn[bb * c + ch];
                let nxv = norm / denom;
                let row = &xd[(bb * c + ch) * l..(bb * c + ch + 1) * l];
                let grow = &gyd[(bb * c + ch) * l..(bb * c + ch + 1) * l];
                let gxrow = &mut gx[(bb * c + ch) * l..(bb * c + ch + 1) * l];
                let norm_inv = if norm > 1e-12 { 1.0 / norm } else { 0.0 };
                for ((o, &xv), &gv) in gxrow.iter_mut().zip(row).zip(grow) {
                    *o = gv * (gd[ch] * nxv + 1.0) + dgx * xv * norm_inv;
                }
            }
        }
        let mut grads = Vec::new();
        if let Some(id) = xi {
            grads.push((id, Tensor::new(vec![bs, c, l], gx)));
        }
        if let Some(id) = gi {
            grads.push((id, Tensor::new(vec![c], gg)));
        }
        if let Some(id) = bi_id {
            grads.push((id, Tensor::new(vec![c], gb)));
        }
        grads
    })
}

// ---------------------------------------------------------------------------
// activations and elementwise
// ---------------------------------------------------------------------------

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn silu(tape: &mut Tape, x: &Val) -> Val {
    let out: Vec<f64> = x.t.data().iter().map(|&v| v * sigmoid(v)).collect();
    let out = Tensor::new(x.t.shape().to_vec(), out);
    let xi = x.id;
    let xt = x.t.clone();
    tape.push(out, move |gy| {
        let Some(id) = xi else { return vec![] };
        let g: Vec<f64> = xt
            .data()
            .iter()
            .zip(gy.data())
            .map(|(&v, &gv)| {
                let s = sigmoid(v);
                gv * s * (1.0 + v * (1.0 - s))
            })
            .collect();
        vec![(id, Tensor::new(xt.shape().to_vec(), g))]
    })
}

pub fn gelu(tape: &mut Tape, x: &Val) -> Val {
    let out: Vec<f64> = x
        .t
        .data()
        .iter()
        .map(|&v| 0.5 * v * (1.0 + libm::erf(v / std::f64::consts::SQRT_2)))
        .collect();
    let out = Tensor::new(x.t.shape().to_vec(), out);
    let xi = x.id;
    let xt = x.t.clone();
    tape.push(out, move |gy| {
        let Some(id) = xi else { return vec![] };
        let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        let g: Vec<f64> = xt
            .data()
            .iter()
            .zip(gy.data())
            .map(|(&v, &gv)| {
                let cdf = 0.5 * (1.0 + libm::erf(v / std::f64::consts::SQRT_2));
                let pdf = inv_sqrt_2pi * (-0.5 * v * v).exp();
                gv * (cdf + v * pdf)
            })
            .collect();
        vec![(id, Tensor::new(xt.shape().to_vec(), g))]
    })
}

pub fn leaky_relu(tape: &mut Tape, x: &Val, slope: f64) -> Val {
    let out: Vec<f64> = x
        .t
        .data()
        .iter()
        .map(|&v| if v >= 0.0 { v } else { slope * v })
        .collect();
    let out = Tensor::new(x.t.shape().to_vec(), out);
    let xi = x.id;
    let xt = x.t.clone();
    tape.push(out, move |gy| {
        let Some(id) = xi else { return vec![] };
        let g: Vec<f64> = xt
            .data()
            .iter()
            .zip(gy.data())
            .map(|(&v, &gv)| if v >= 0.0 { gv } else { slope * gv })
            .collect();
        vec![(id, Tensor::new(xt.shape().to_vec(), g))]
    })
}

pub fn add(tape: &mut Tape, x: &Val, y: &Val) -> Val {
    debug_assert_eq!(x.t.shape(), y.t.shape());
    let out: Vec<f64> = x
        .t
        .data()
        .iter()
        .zip(y.t.data())
        .map(|(&a, &b)| a + b)
        .collect();
    let out = Tensor::new(x.t.shape().to_vec(), out);
    let (xi, yi) = (x.id, y.id);
    tape.push(out, move |gy| {
        let mut grads = Vec::new();
        if let Some(id) = xi {
            grads.push((id, gy.clone()));
        }
        if let Some(id) = yi {
            grads.push((id, gy.clone()));
        }
        grads
    })
}

pub fn scale(tape: &mut Tape, x: &Val, s: f64) -> Val {
    let out: Vec<f64> = x.t.data().iter().map(|&v| s * v).collect();
    let out = Tensor::new(x.t.shape().to_vec(), out);
    let xi = x.id;
    tape.push(out, move |gy| {
        let Some(id) = xi else { return vec![] };
        let g: Vec<f64> = gy.data().iter().map(|&v| s * v).collect();
        vec![(id, Tensor::new(gy.shape().to_vec(), g))]
    })
}

/// Sum a non-empty list of same-shape values.
pub fn sum_vals(tape: &mut Tape, xs: &[Val]) -> Val {
    debug_assert!(!xs.is_empty());
    let shape = xs[0].t.shape().to_vec();
    let mut out = xs[0].t.data().to_vec();
    for x in &xs[1..] {
        for (o, &v) in out.iter_mut().zip(x.t.data()) {
            *o += v;
        }
    }
    let out = Tensor::new(shape, out);
    let ids: Vec<Option<usize>> = xs.iter().map(|x| x.id).collect();
    tape.push(out, move |gy| {
        ids.iter()
            .filter_map(|id| id.map(|i| (i, gy.clone())))
            .collect()
    })
}

/// x [B, C, H, W] + v [B, C] broadcast over H, W.
pub fn add_chan_vec(tape: &mut Tape, x: &Val, v: &Val) -> Val {
    let (bs, c, h, w) = (x.t.dim(0), x.t.dim(1), x.t.dim(2), x.t.dim(3));
    let hw = h * w;
    let mut out = x.t.data().to_vec();
    for bi in 0..bs {
        for ch in 0..c {
            let add = v.t.data()[bi * c + ch];
            for o in &mut out[(bi * c + ch) * hw..(bi * c + ch + 1) * hw] {
                *o += add;
            }
        }
    }
    let out = Tensor::new(vec![bs, c, h, w], out);
    let (xi, vi) = (x.id, v.id);
    tape.push(out, move |gy| {
        let mut grads = Vec::new();
        if let Some(id) = xi {
            grads.push((id, gy.clone()));
        }
        if let Some(id) = vi {
            let gyd = gy.data();
            let mut gv = vec![0.0; bs * c];
            for bi in 0..bs {
                for ch in 0..c {
                    gv[bi * c + ch] = gyd[(bi * c + ch) * hw..(bi * c + ch + 1) * hw]
                        .iter()
                        .sum();
                }
            }
            grads.push((id, Tensor::new(vec![bs, c], gv)));
        }
        grads
    })
}

/// x [B, C, H, W] + f [B, C, H] broadcast over W.
pub fn add_time_feat(tape: &mut Tape, x: &Val, f: &Val) -> Val {
    let (bs, c, h, w) = (x.t.dim(0), x.t.dim(1), x.t.dim(2), x.t.dim(3));
    debug_assert_eq!(f.t.shape(), &[bs, c, h]);
    let mut out = x.t.data().to_vec();
    let fd = f.t.data();
    for i in 0..bs * c * h {
        let add = fd[i];
        for o in &mut out[i * w..(i + 1) * w] {
            *o += add;
        }
    }
    let out = Tensor::new(vec![bs, c, h, w], out);
    let (xi, fi) = (x.id, f.id);
    tape.push(out, move |gy| {
        let mut grads = Vec::new();
        if let Some(id) = xi {
            grads.push((id, gy.clone()));
        }
        if let Some(id) = fi {
            let gyd = gy.data();
            let mut gf = vec![0.0; bs * c * h];
            for (i, g) in gf.iter_mut().enumerate() {
                *g = gyd[i * w..(i + 1) * w].iter().sum();
            }
            grads.push((id, Tensor::new(vec![bs, c, h], gf)));
        }
        grads
    })
}

/// x [B, D] + r [D] broadcast over the batch.
pub fn add_row(tape: &mut Tape, x: &Val, r: &Val) -> Val {
    let (bs, d) = (x.t.dim(0), x.t.dim(1));
    debug_assert_eq!(r.t.numel(), d);
    let mut out = x.t.data().to_vec();
    for bi in 0..bs {
        for (o, &v) in out[bi * d..(bi + 1) * d].iter_mut().zip(r.t.data()) {
            *o += v;
        }
    }
    let out = Tensor::new(vec![bs, d], out);
    let (xi, ri) = (x.id, r.id);
    tape.push(out, move |gy| {
        let mut grads = Vec::new();
        if let Some(id) = xi {
            grads.push((id, gy.clone()));
        }
        if let Some(id) = ri {
            let gyd = gy.data();
            let mut gr = vec![0.0; d];
            for bi in 0..bs {
                for (g, &v) in gr.iter_mut().zip(&gyd[bi * d..(bi + 1) * d]) {
                    *g += v;
                }
            }
            grads.push((id, Tensor::new(vec![d], gr)));
        }
        grads
    })
}

/// Select row `idx` of an embedding table [N, D] -> [D].
pub fn embed_row(tape: &mut Tape, table: &Val, idx: usize) -> Val {
    let (n, d) = (table.t.dim(0), table.t.dim(1));
    debug_assert!(idx < n);
    let out = Tensor::new(vec![d], table.t.data()[idx * d..(idx + 1) * d].to_vec());
    let ti = table.id;
    tape.push(out, move |gy| {
        let Some(id) = ti else { return vec![] };
        let mut g = vec![0.0; n * d];
        g[idx * d..(idx + 1) * d].copy_from_slice(gy.data());
        vec![(id, Tensor::new(vec![n, d], g))]
    })
}

// ---------------------------------------------------------------------------
// shape plumbing
// ---------------------------------------------------------------------------

pub fn reshape(tape: &mut Tape, x: &Val, shape: Vec<usize>) -> Val {
    let from = x.t.shape().to_vec();
    let out = x.t.reshape(shape);
    let xi = x.id;
    tape.push(out, move |gy| {
        let Some(id) = xi else { return vec![] };
        vec![(id, gy.reshape(from.clone()))]
    })
}

fn reflect_index(i: usize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let j = i % period;
    if j < n {
        j
    } else {
        period - j
    }
}

/// Reflect-pad [B, C, L] on the right to `target` samples.
pub fn reflect_pad1d(tape: &mut Tape, x: &Val, target: usize) -> Val {
    let (bs, c, l) = (x.t.dim(0), x.t.dim(1), x.t.dim(2));
    debug_assert!(target >= l);
    let xd = x.t.data();
    let mut out = vec![0.0; bs * c * target];
    for row in 0..bs * c {
        let src = &xd[row * l..(row + 1) * l];
        let dst = &mut out[row * target..(row + 1) * target];
        dst[..l].copy_from_slice(src);
        for i in l..target {
            dst[i] = src[reflect_index(i, l)];
        }
    }
    let out = Tensor::new(vec![bs, c, target], out);
    let xi = x.id;
    tape.push(out, move |gy| {
        let Some(id) = xi else { return vec![] };
        let gyd = gy.data();
        let mut gx = vec![0.0; bs * c * l];
        for row in 0..bs * c {
            let src = &gyd[row * target..(row + 1) * target];
            let dst = &mut gx[row * l..(row + 1) * l];
            for (d, &s) in dst.iter_mut().zip(&src[..l]) {
                *d += s;
            }
            for i in l..target {
                dst[reflect_index(i, l)] += src[i];
            }
        }
        vec![(id, Tensor::new(vec![bs, c, l], gx))]
    })
}

/// Truncate [B, C, L] to the first `keep` samples.
pub fn crop1d(tape: &mut Tape, x: &Val, keep: usize) -> Val {
    let (bs, c, l) = (x.t.dim(0), x.t.dim(1), x.t.dim(2));
    debug_assert!(keep <= l);
    let xd = x.t.data();
    let mut out = vec![0.0; bs * c * keep];
    for row in 0..bs * c {
        out[row * keep..(row + 1) * keep].copy_from_slice(&xd[row * l..row * l + keep]);
    }
    let out = Tensor::new(vec![bs, c, keep], out);
    let xi = x.id;
    tape.push(out, move |gy| {
        let Some(id) = xi else { return vec![] };
        let gyd = gy.data();
        let mut gx = vec![0.0; bs * c * l];
        for row in 0..bs * c {
            gx[row * l..row * l + keep].copy_from_slice(&gyd[row * keep..(row + 1) * keep]);
        }
        vec![(id, Tensor::new(vec![bs, c, l], gx))]
    })
}

/// Concatenate along the channel axis of [B, C_i, L].
pub fn concat_chan(tape: &mut Tape, xs: &[Val]) -> Val {
    debug_assert!(!xs.is_empty());
    let bs = xs[0].t.dim(0);
    let l = xs[0].t.dim(2);
    let cs: Vec<usize> = xs.iter().map(|x| x.t.dim(1)).collect();
    let ctot: usize = cs.iter().sum();
    let mut out = vec![0.0; bs * ctot * l];
    for bi in 0..bs {
        let mut off = 0;
        for (x, &ci) in xs.iter().zip(&cs) {
            let src = &x.t.data()[bi * ci * l..(bi + 1) * ci * l];
            out[(bi * ctot + off) * l..(bi * ctot + off + ci) * l].copy_from_slice(src);
            off += ci;
        }
    }
    let out = Tensor::new(vec![bs, ctot, l], out);
    let ids: Vec<Option<usize>> = xs.iter().map(|x| x.id).collect();
    let cs2 = cs.clone();
    tape.push(out, move |gy| {
        let gyd = gy.data();
        let mut grads = Vec::new();
        let mut off = 0;
        for (&id, &ci) in ids.iter().zip(&cs2) {
            if let Some(id) = id {
                let mut g = vec![0.0; bs * ci * l];
                for bi in 0..bs {
                    g[bi * ci * l..(bi + 1) * ci * l].copy_from_slice(
                        &gyd[(bi * ctot + off) * l..(bi * ctot + off + ci) * l],
                    );
                }
                grads.push((id, Tensor::new(vec![bs, ci, l], g)));
            }
            off += ci;
        }
        grads
    })
}

// ---------------------------------------------------------------------------
// Haar analysis/synthesis along the height axis
// ---------------------------------------------------------------------------

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// [B, C, H, W] -> [B, 2C, H/2, W]; channels [0,C) hold the approximation,
/// [C,2C) the detail. Orthonormal, so backward is the synthesis map.
pub fn dwt_h(tape: &mut Tape, x: &Val) -> Val {
    let (bs, c, h, w) = (x.t.dim(0), x.t.dim(1), x.t.dim(2), x.t.dim(3));
    debug_assert_eq!(h % 2, 0);
    let oh = h / 2;
    let xd = x.t.data();
    let mut out = vec![0.0; bs * 2 * c * oh * w];
    for bi in 0..bs {
        for ch in 0..c {
            let src = &xd[(bi * c + ch) * h * w..(bi * c + ch + 1) * h * w];
            for oy in 0..oh {
                for wx in 0..w {
                    let x0 = src[(2 * oy) * w + wx];
                    let x1 = src[(2 * oy + 1) * w + wx];
                    out[((bi * 2 * c + ch) * oh + oy) * w + wx] = (x0 + x1) * INV_SQRT2;
                    out[((bi * 2 * c + c + ch) * oh + oy) * w + wx] = (x0 - x1) * INV_SQRT2;
                }
            }
        }
    }
    let out = Tensor::new(vec![bs, 2 * c, oh, w], out);
    let xi = x.id;
    tape.push(out, move |gy| {
        let Some(id) = xi else { return vec![] };
        let gyd = gy.data();
        let mut gx = vec![0.0; bs * c * h * w];
        for bi in 0..bs {
            for ch in 0..c {
                let dst = &mut gx[(bi * c + ch) * h * w..(bi * c + ch + 1) * h * w];
                for oy in 0..oh {
                    for wx in 0..w {
                        let ga = gyd[((bi * 2 * c + ch) * oh + oy) * w + wx];
                        let gd = gyd[((bi * 2 * c + c + ch) * oh + oy) * w + wx];
                        dst[(2 * oy) * w + wx] = (ga + gd) * INV_SQRT2;
                        dst[(2 * oy + 1) * w + wx] = (ga - gd) * INV_SQRT2;
                    }
                }
            }
        }
        vec![(id, Tensor::new(vec![bs, c, h, w], gx))]
    })
}

/// Inverse of [`dwt_h`]: [B, 2C, H, W] -> [B, C, 2H, W].
pub fn idwt_h(tape: &mut Tape, x: &Val) -> Val {
    let (bs, c2, h, w) = (x.t.dim(0), x.t.dim(1), x.t.dim(2), x.t.dim(3));
    debug_assert_eq!(c2 % 2, 0);
    let c = c2 / 2;
    let xd = x.t.data();
    let mut out = vec![0.0; bs * c * 2 * h * w];
    for bi in 0..bs {
        for ch in 0..c {
            let dst = &mut out[(bi * c + ch) * 2 * h * w..(bi * c + ch + 1) * 2 * h * w];
            for hy in 0..h {
                for wx in 0..w {
                    let a = xd[((bi * c2 + ch) * h + hy) * w + wx];
                    let d = xd[((bi * c2 + c + ch) * h + hy) * w + wx];
                    dst[(2 * hy) * w + wx] = (a + d) * INV_SQRT2;
                    dst[(2 * hy + 1) * w + wx] = (a - d) * INV_SQRT2;
                }
            }
        }
    }
    let out = Tensor::new(vec![bs, c, 2 * h, w], out);
    let xi = x.id;
    tape.push(out, move |gy| {
        let Some(id) = xi else { return vec![] };
        let gyd = gy.data();
        let mut gx = vec![0.0; bs * c2 * h * w];
        for bi in 0..bs {
            for ch in 0..c {
                let src = &gyd[(bi * c + ch) * 2 * h * w..(bi * c + ch + 1) * 2 * h * w];
                for hy in 0..h {
                    for wx in 0..w {
                        let g0 = src[(2 * hy) * w + wx];
                        let g1 = src[(2 * hy + 1) * w + wx];
                        gx[((bi * c2 + ch) * h + hy) * w + wx] = (g0 + g1) * INV_SQRT2;
                        gx[((bi * c2 + c + ch) * h + hy) * w + wx] = (g0 - g1) * INV_SQRT2;
                    }
                }
            }
        }
        vec![(id, Tensor::new(vec![bs, c2, h, w], gx))]
    })
}

/// Linear interpolation along L: [B, C, L] -> [B, C, target], endpoints aligned.
pub fn lerp_time(tape: &mut Tape, x: &Val, target: usize) -> Val {
    let (bs, c, l) = (x.t.dim(0), x.t.dim(1), x.t.dim(2));
    let xd = x.t.data();
    let positions: Vec<(usize, usize, f64)> = (0..target)
        .map(|i| {
            if target == 1 || l == 1 {
                return (0, 0, 0.0);
            }
            let src = i as f64 * (l - 1) as f64 / (target - 1) as f64;
            let i0 = (src.floor() as usize).min(l - 1);
            let i1 = (i0 + 1).min(l - 1);
            (i0, i1, src - i0 as f64)
        })
        .collect();
    let mut out = vec![0.0; bs * c * target];
    for row in 0..bs * c {
        let src = &xd[row * l..(row + 1) * l];
        let dst = &mut out[row * target..(row + 1) * target];
        for (o, &(i0, i1, f)) in dst.iter_mut().zip(&positions) {
            *o = (1.0 - f) * src[i0] + f * src[i1];
        }
    }
    let out = Tensor::new(vec![bs, c, target], out);
    let xi = x.id;
    tape.push(out, move |gy| {
        let Some(id) = xi else { return vec![] };
        let gyd = gy.data();
        let mut gx = vec![0.0; bs * c * l];
        for row in 0..bs * c {
            let src = &gyd[row * target..(row + 1) * target];
            let dst = &mut gx[row * l..(row + 1) * l];
            for (&g, &(i0, i1, f)) in src.iter().zip(&positions) {
                dst[i0] += (1.0 - f) * g;
                dst[i1] += f * g;
            }
        }
        vec![(id, Tensor::new(vec![bs, c, l], gx))]
    })
}

/// Scale each batch item by its own factor (stochastic depth / drop path).
pub fn scale_items(tape: &mut Tape, x: &Val, factors: &[f64]) -> Val {
    let bs = x.t.dim(0);
    debug_assert_eq!(factors.len(), bs);
    let per = x.t.numel() / bs;
    let mut out = x.t.data().to_vec();
    for (bi, &f) in factors.iter().enumerate() {
        for v in &mut out[bi * per..(bi + 1) * per] {
            *v *= f;
        }
    }
    let out = Tensor::new(x.t.shape().to_vec(), out);
    let xi = x.id;
    let fs = factors.to_vec();
    tape.push(out, move |gy| {
        let Some(id) = xi else { return vec![] };
        let mut g = gy.data().to_vec();
        for (bi, &f) in fs.iter().enumerate() {
            for v in &mut g[bi * per..(bi + 1) * per] {
                *v *= f;
            }
        }
        vec![(id, Tensor::new(gy.shape().to_vec(), g))]
    })
}

/// Mean squared error against a constant target; returns a scalar value.
pub fn mse_against(tape: &mut Tape, x: &Val, target: &Tensor) -> Val {
    debug_assert_eq!(x.t.shape(), target.shape());
    let n = x.t.numel() as f64;
    let mut acc = 0.0;
    for (&a, &b) in x.t.data().iter().zip(target.data()) {
        acc += (a - b) * (a - b);
    }
    let out = Tensor::scalar(acc / n);
    let xi = x.id;
    let xt = x.t.clone();
    let tt = target.clone();
    tape.push(out, move |gy| {
        let Some(id) = xi else { return vec![] };
        let g0 = gy.item();
        let g: Vec<f64> = xt
            .data()
            .iter()
            .zip(tt.data())
            .map(|(&a, &b)| 2.0 * (a - b) / n * g0)
            .collect();
        vec![(id, Tensor::new(xt.shape().to_vec(), g))]
    })
}
