//! Period-conditional vector-field estimator.
//!
//! A time-conditional 2-D UNet runs over period-reshaped views of the signal
//! (one path per period, shared weights, period embedding selects the path
//! identity). A ConvNeXt-V2 encoder turns the mel spectrogram into per-period
//! conditioning injected at the middle block. Path outputs are flattened back
//! to 1-D, summed, and refined by a dilated final stack that emits the field.

mod checkpoint;
mod config;

pub use checkpoint::{fnv1a64, load_checkpoint, save_checkpoint, CheckpointManifest};
pub use config::{Activation, EstimatorConfig, FreeUParams, MelEncoderConfig};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mel::MelSpec;
use crate::nn::ops::{self, ConvSpec};
use crate::nn::{kaiming_uniform, ParamStore, Session, Tensor, Val};
use crate::rng::Rng;

// Layer descriptors: parameter indices plus geometry.
#[derive(Debug, Clone, Copy)]
struct Conv {
    w: usize,
    b: usize,
    spec: ConvSpec,
}

#[derive(Debug, Clone, Copy)]
struct ConvT {
    w: usize,
    b: usize,
    spec: ConvSpec,
}

#[derive(Debug, Clone, Copy)]
struct Pw {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Lin {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Dw {
    w: usize,
    b: usize,
    pad: usize,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    g: usize,
    b: usize,
}

#[derive(Debug, Clone)]
struct ResBlock2d {
    convs: Vec<Conv>,
    emb: Lin,
}

#[derive(Debug, Clone)]
struct EncStage {
    dwt: bool,
    conv: Conv,
    res: ResBlock2d,
}

#[derive(Debug, Clone)]
enum Up {
    Strided(ConvT),
    Plain(Conv),
}

#[derive(Debug, Clone)]
struct DecStage {
    up: Up,
    idwt: bool,
    res: ResBlock2d,
}

#[derive(Debug, Clone)]
struct CnxBlock {
    dw: Dw,
    ln: Norm,
    pw1: Pw,
    grn: Norm,
    pw2: Pw,
}

#[derive(Debug, Clone)]
struct MelArch {
    embed: Conv,
    stage1: Vec<CnxBlock>,
    up: ConvT,
    stage2: Vec<CnxBlock>,
    ln: Norm,
    per_period: Vec<Conv>,
}

#[derive(Debug, Clone)]
struct Arch {
    temb: [Lin; 3],
    pemb: usize,
    in_conv: Conv,
    enc: Vec<EncStage>,
    mid_cond: Pw,
    dec: Vec<DecStage>,
    final_convs: Vec<Conv>,
    final_out: Pw,
    mel: MelArch,
}

/// Per-period conditioning features, computed once and reused across ODE steps.
#[derive(Debug, Clone)]
pub struct CondFeatures {
    /// (period, [B, out_dim, ceil(up_frames / period)]) in period order.
    pub per_period: Vec<(usize, Tensor)>,
    pub frames: usize,
}

/// Middle-block geometry per period, for shape-contract checks.
#[derive(Debug, Clone, Default)]
pub struct ShapeTrace {
    pub per_period: Vec<PeriodShape>,
}

#[derive(Debug, Clone)]
pub struct PeriodShape {
    pub period: usize,
    pub padded_len: usize,
    pub mid_height: usize,
    pub cond_len: usize,
}

/// How the per-period paths are evaluated at inference time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodExec {
    Sequential,
    /// All period paths feed forward in parallel.
    Batched,
}

#[derive(Clone)]
pub struct Estimator {
    pub cfg: EstimatorConfig,
    pub mel_cfg: MelEncoderConfig,
    pub store: ParamStore,
    pub seed: u64,
    pub step: u64,
    arch: Arch,
}

struct Builder<'r> {
    ps: ParamStore,
    rng: &'r mut Rng,
}

impl<'r> Builder<'r> {
    fn conv(&mut self, name: &str, cout: usize, cin: usize, spec: ConvSpec) -> Conv {
        let (kh, kw) = spec.kernel;
        let fan = cin * kh * kw;
        let w = self.ps.add(
            format!("{name}.w"),
            kaiming_uniform(vec![cout, cin, kh, kw], fan, self.rng),
        );
        let b = self.ps.add(format!("{name}.b"), kaiming_uniform(vec![cout], fan, self.rng));
        Conv { w, b, spec }
    }

    fn conv_t(&mut self, name: &str, cin: usize, cout: usize, spec: ConvSpec) -> ConvT {
        let (kh, kw) = spec.kernel;
        let fan = cin * kh * kw;
        let w = self.ps.add(
            format!("{name}.w"),
            kaiming_uniform(vec![cin, cout, kh, kw], fan, self.rng),
        );
        let b = self.ps.add(format!("{name}.b"), kaiming_uniform(vec![cout], fan, self.rng));
        ConvT { w, b, spec }
    }

    fn pw(&mut self, name: &str, cout: usize, cin: usize) -> Pw {
        let w = self.ps.add(
            format!("{name}.w"),
            kaiming_uniform(vec![cout, cin], cin, self.rng),
        );
        let b = self.ps.add(format!("{name}.b"), kaiming_uniform(vec![cout], cin, self.rng));
        Pw { w, b }
    }

    fn lin(&mut self, name: &str, dout: usize, din: usize) -> Lin {
        let w = self.ps.add(
            format!("{name}.w"),
            kaiming_uniform(vec![dout, din], din, self.rng),
        );
        let b = self.ps.add(format!("{name}.b"), kaiming_uniform(vec![dout], din, self.rng));
        Lin { w, b }
    }

    fn dw(&mut self, name: &str, c: usize, k: usize) -> Dw {
        let w = self.ps.add(format!("{name}.w"), kaiming_uniform(vec![c, k], k, self.rng));
        let b = self.ps.add(format!("{name}.b"), kaiming_uniform(vec![c], k, self.rng));
        Dw { w, b, pad: (k - 1) / 2 }
    }

    fn norm(&mut self, name: &str, c: usize, gamma: f64) -> Norm {
        let g = self.ps.add(format!("{name}.g"), Tensor::full(vec![c], gamma));
        let b = self.ps.add(format!("{name}.b"), Tensor::zeros(vec![c]));
        Norm { g, b }
    }

    fn resblock(&mut self, name: &str, c: usize, kernel: usize, dils: &[usize], cond_dim: usize) -> ResBlock2d {
        let convs = dils
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let spec = ConvSpec {
                    kernel: (kernel, kernel),
                    stride: (1, 1),
                    pad: (d * (kernel - 1) / 2, (kernel - 1) / 2),
                    dilation: (d, 1),
                };
                self.conv(&format!("{name}.c{i}"), c, c, spec)
            })
            .collect();
        let emb = self.lin(&format!("{name}.emb"), c, cond_dim);
        ResBlock2d { convs, emb }
    }
}

fn plain_spec(kernel: usize, stride_h: usize) -> ConvSpec {
    ConvSpec {
        kernel: (kernel, kernel),
        stride: (stride_h, 1),
        pad: ((kernel - 1) / 2, (kernel - 1) / 2),
        dilation: (1, 1),
    }
}

fn conv1d_spec(kernel: usize, stride: usize) -> ConvSpec {
    ConvSpec {
        kernel: (kernel, 1),
        stride: (stride, 1),
        pad: ((kernel - 1) / 2, 0),
        dilation: (1, 1),
    }
}

impl Estimator {
    /// Deterministically initialize all parameters from `seed`.
    pub fn init(cfg: EstimatorConfig, mel_cfg: MelEncoderConfig, seed: u64) -> Result<Estimator> {
        cfg.validate()?;
        mel_cfg.validate(&cfg)?;
        if cfg.time_embed_dim % 2 != 0 || cfg.time_embed_dim < 4 {
            return Err(Error::Config("time_embed_dim must be even and >= 4".into()));
        }
        let mut rng = Rng::seed_from(seed);
        let mut b = Builder {
            ps: ParamStore::new(),
            rng: &mut rng,
        };

        let cond_dim = cfg.mlp_dims[2];
        let temb = [
            b.lin("temb.mlp0", cfg.mlp_dims[0], cfg.time_embed_dim),
            b.lin("temb.mlp1", cfg.mlp_dims[1], cfg.mlp_dims[0]),
            b.lin("temb.mlp2", cfg.mlp_dims[2], cfg.mlp_dims[1]),
        ];
        let pemb_init: Vec<f64> = (0..cfg.periods.len() * cfg.period_embed_dim)
            .map(|_| b.rng.normal() * 0.02)
            .collect();
        let pemb = b.ps.add(
            "pemb.table",
            Tensor::new(vec![cfg.periods.len(), cfg.period_embed_dim], pemb_init),
        );

        let chain = cfg.chain();
        let n = chain.len() - 1;
        let in_conv = b.conv("unet.in", chain[0], cfg.input_channels(), plain_spec(cfg.res_kernel, 1));
        let mut enc = Vec::with_capacity(n);
        for k in 1..=n {
            let dwt = cfg.multiband && k == 1;
            let cin = chain[k - 1] * if dwt { 2 } else { 1 };
            let conv = b.conv(
                &format!("unet.enc{k}.conv"),
                chain[k],
                cin,
                plain_spec(cfg.res_kernel, cfg.down_ratios[k]),
            );
            let res = b.resblock(
                &format!("unet.enc{k}.res"),
                chain[k],
                cfg.res_kernel,
                &cfg.res_dilations,
                cond_dim,
            );
            enc.push(EncStage { dwt, conv, res });
        }
        let mid_cond = b.pw("unet.mid.cond", cfg.mblock_dim, mel_cfg.out_dim);

        let mut dec = Vec::with_capacity(n);
        for j in 0..n {
            let cin = if j == 0 { cfg.mblock_dim } else { cfg.ublock_dims[j - 1] };
            let idwt = cfg.multiband && j == n - 1;
            let cout = cfg.ublock_dims[j] * if idwt { 2 } else { 1 };
            let r = cfg.up_ratios[j];
            let up = if r == 1 {
                Up::Plain(b.conv(&format!("unet.dec{j}.up"), cout, cin, plain_spec(cfg.res_kernel, 1)))
            } else {
                let spec = ConvSpec {
                    kernel: (2 * r, cfg.res_kernel),
                    stride: (r, 1),
                    pad: (r / 2, (cfg.res_kernel - 1) / 2),
                    dilation: (1, 1),
                };
                Up::Strided(b.conv_t(&format!("unet.dec{j}.up"), cin, cout, spec))
            };
            let res = b.resblock(
                &format!("unet.dec{j}.res"),
                cfg.ublock_dims[j],
                cfg.res_kernel,
                &cfg.res_dilations,
                cond_dim,
            );
            dec.push(DecStage { up, idwt, res });
        }

        let c_last = *cfg.ublock_dims.last().unwrap();
        let final_convs = cfg
            .final_res_dilations
            .iter()
            .enumerate()
            .map(|(i, &d)| {
                let spec = ConvSpec {
                    kernel: (cfg.final_res_kernel, 1),
                    stride: (1, 1),
                    pad: (d * (cfg.final_res_kernel - 1) / 2, 0),
                    dilation: (d, 1),
                };
                b.conv(&format!("unet.final.c{i}"), c_last, c_last, spec)
            })
            .collect();
        let final_out = b.pw("unet.final.out", 1, c_last);

        // mel encoder
        let embed = b.conv("mel.embed", mel_cfg.mel_embed_dim, mel_cfg.n_mels, conv1d_spec(7, 1));
        let stage1 = (0..mel_cfg.n_blocks_stage1)
            .map(|i| cnx_block(&mut b, &format!("mel.s1.{i}"), mel_cfg.mel_embed_dim, mel_cfg.hidden_dim_stage1))
            .collect();
        let r = mel_cfg.upsample_ratio;
        let up = b.conv_t(
            "mel.up",
            mel_cfg.mel_embed_dim,
            mel_cfg.upsample_dim,
            ConvSpec {
                kernel: (2 * r, 1),
                stride: (r, 1),
                pad: (r / 2, 0),
                dilation: (1, 1),
            },
        );
        let stage2 = (0..mel_cfg.n_blocks_stage2)
            .map(|i| cnx_block(&mut b, &format!("mel.s2.{i}"), mel_cfg.upsample_dim, mel_cfg.hidden_dim_stage2))
            .collect();
        let ln = b.norm("mel.ln", mel_cfg.upsample_dim, 1.0);
        let per_period = cfg
            .periods
            .iter()
            .map(|&p| b.conv(&format!("mel.period{p}"), mel_cfg.out_dim, mel_cfg.upsample_dim, conv1d_spec(3, p)))
            .collect();

        let arch = Arch {
            temb,
            pemb,
            in_conv,
            enc,
            mid_cond,
            dec,
            final_convs,
            final_out,
            mel: MelArch {
                embed,
                stage1,
                up,
                stage2,
                ln,
                per_period,
            },
        };
        Ok(Estimator {
            cfg,
            mel_cfg,
            store: b.ps,
            seed,
            step: 0,
            arch,
        })
    }

    pub fn param_count(&self) -> usize {
        self.store.param_count()
    }

    // -- forward pieces ----------------------------------------------------

    fn act(&self, s: &mut Session, x: &Val) -> Val {
        match self.cfg.activation {
            Activation::Silu => ops::silu(&mut s.tape, x),
            Activation::Gelu => ops::gelu(&mut s.tape, x),
            Activation::LeakyRelu => ops::leaky_relu(&mut s.tape, x, 0.1),
        }
    }

    fn conv(&self, s: &mut Session, l: &Conv, x: &Val) -> Val {
        let w = s.params[l.w].clone();
        let b = s.params[l.b].clone();
        ops::conv2d(&mut s.tape, x, &w, &b, l.spec)
    }

    fn conv_t(&self, s: &mut Session, l: &ConvT, x: &Val) -> Val {
        let w = s.params[l.w].clone();
        let b = s.params[l.b].clone();
        ops::conv_transpose2d(&mut s.tape, x, &w, &b, l.spec)
    }

    /// Run a conv with (k,1) geometry over a [B, C, L] map.
    fn conv1d(&self, s: &mut Session, l: &Conv, x: &Val) -> Val {
        let (bs, c, len) = (x.t.dim(0), x.t.dim(1), x.t.dim(2));
        let x4 = ops::reshape(&mut s.tape, x, vec![bs, c, len, 1]);
        let y = self.conv(s, l, &x4);
        let (ob, oc, ol) = (y.t.dim(0), y.t.dim(1), y.t.dim(2));
        ops::reshape(&mut s.tape, &y, vec![ob, oc, ol])
    }

    fn conv_t1d(&self, s: &mut Session, l: &ConvT, x: &Val) -> Val {
        let (bs, c, len) = (x.t.dim(0), x.t.dim(1), x.t.dim(2));
        let x4 = ops::reshape(&mut s.tape, x, vec![bs, c, len, 1]);
        let y = self.conv_t(s, l, &x4);
        let (ob, oc, ol) = (y.t.dim(0), y.t.dim(1), y.t.dim(2));
        ops::reshape(&mut s.tape, &y, vec![ob, oc, ol])
    }

    fn pw(&self, s: &mut Session, l: &Pw, x: &Val) -> Val {
        let w = s.params[l.w].clone();
        let b = s.params[l.b].clone();
        ops::pointwise1d(&mut s.tape, x, &w, &b)
    }

    fn lin(&self, s: &mut Session, l: &Lin, x: &Val) -> Val {
        let w = s.params[l.w].clone();
        let b = s.params[l.b].clone();
        ops::linear(&mut s.tape, x, &w, &b)
    }

    fn resblock(&self, s: &mut Session, rb: &ResBlock2d, x: &Val, emb: &Val) -> Val {
        let mut h = self.act(s, x);
        h = self.conv(s, &rb.convs[0], &h);
        let ev = self.lin(s, &rb.emb, emb);
        h = ops::add_chan_vec(&mut s.tape, &h, &ev);
        for c in &rb.convs[1..] {
            h = self.act(s, &h);
            h = self.conv(s, c, &h);
        }
        ops::add(&mut s.tape, x, &h)
    }

    /// Time + period conditioning vector: MLP(sinusoid(t) + period row).
    fn cond_vector(&self, s: &mut Session, sin_t: &Val, period_idx: usize) -> Val {
        let table = s.params[self.arch.pemb].clone();
        let row = ops::embed_row(&mut s.tape, &table, period_idx);
        let mut h = ops::add_row(&mut s.tape, sin_t, &row);
        h = self.lin(s, &self.arch.temb[0], &h);
        h = self.act(s, &h);
        h = self.lin(s, &self.arch.temb[1], &h);
        h = self.act(s, &h);
        self.lin(s, &self.arch.temb[2], &h)
    }

    /// One period path: periodify, UNet, flatten back. Returns [B, C_last, L].
    fn period_path(
        &self,
        s: &mut Session,
        x: &Val,
        cond_p: &Val,
        emb: &Val,
        p: usize,
        freeu: &FreeUParams,
    ) -> Result<(Val, PeriodShape)> {
        let (bs, cin, l) = (x.t.dim(0), x.t.dim(1), x.t.dim(2));
        let align = self.cfg.align(p);
        let padded = l.div_ceil(align) * align;
        let mid_height = padded / align;
        let xp = if padded > l {
            ops::reflect_pad1d(&mut s.tape, x, padded)
        } else {
            x.clone()
        };
        let grid = ops::reshape(&mut s.tape, &xp, vec![bs, cin, padded / p, p]);

        let mut h = self.conv(s, &self.arch.in_conv, &grid);
        let mut skips = vec![h.clone()];
        let n = self.arch.enc.len();
        let cond_len = cond_p.t.dim(2);
        for (k, stage) in self.arch.enc.iter().enumerate() {
            if stage.dwt {
                h = ops::dwt_h(&mut s.tape, &h);
            }
            h = self.conv(s, &stage.conv, &h);
            if k == n - 1 {
                // middle block: inject the mel conditioning
                if h.t.dim(2) != mid_height {
                    return Err(Error::Shape(format!(
                        "period {p}: middle height {} != expected {mid_height}",
                        h.t.dim(2)
                    )));
                }
                let aligned = if cond_len == mid_height {
                    cond_p.clone()
                } else if self.cfg.multiband {
                    ops::lerp_time(&mut s.tape, cond_p, mid_height)
                } else {
                    return Err(Error::Shape(format!(
                        "period {p}: conditioning length {cond_len} != middle height {mid_height}"
                    )));
                };
                let proj = self.pw(s, &self.arch.mid_cond, &aligned);
                h = ops::add_time_feat(&mut s.tape, &h, &proj);
            }
            h = self.resblock(s, &stage.res, &h, emb);
            if k < n - 1 {
                skips.push(h.clone());
            }
        }

        for stage in &self.arch.dec {
            h = match &stage.up {
                Up::Strided(ct) => self.conv_t(s, ct, &h),
                Up::Plain(c) => self.conv(s, c, &h),
            };
            if stage.idwt {
                h = ops::idwt_h(&mut s.tape, &h);
            }
            let skip = skips.pop().expect("skip stack underflow");
            let (a, bsc) = if freeu.enabled {
                (freeu.skip_scale, freeu.backbone_scale)
            } else {
                (1.0, 1.0)
            };
            h = if a == 1.0 && bsc == 1.0 {
                ops::add(&mut s.tape, &h, &skip)
            } else {
                let hb = ops::scale(&mut s.tape, &h, bsc);
                let sk = ops::scale(&mut s.tape, &skip, a);
                ops::add(&mut s.tape, &hb, &sk)
            };
            h = self.resblock(s, &stage.res, &h, emb);
        }

        let c_last = h.t.dim(1);
        let flat = ops::reshape(&mut s.tape, &h, vec![bs, c_last, padded]);
        let out = ops::crop1d(&mut s.tape, &flat, l);
        Ok((
            out,
            PeriodShape {
                period: p,
                padded_len: padded,
                mid_height,
                cond_len,
            },
        ))
    }

    fn final_stack(&self, s: &mut Session, x: &Val) -> Val {
        let mut h = self.act(s, x);
        h = self.conv1d(s, &self.arch.final_convs[0], &h);
        for c in &self.arch.final_convs[1..] {
            h = self.act(s, &h);
            h = self.conv1d(s, c, &h);
        }
        let xr = ops::add(&mut s.tape, x, &h);
        self.pw(s, &self.arch.final_out, &xr)
    }

    /// Full forward on an existing session: x is [B, 1 + cond_channels, L],
    /// `ts` one time per batch item, `cond` per-period features as values.
    pub fn field_on(
        &self,
        s: &mut Session,
        x: &Tensor,
        ts: &[f64],
        cond: &[Val],
        freeu: &FreeUParams,
        mut trace: Option<&mut ShapeTrace>,
    ) -> Result<Val> {
        freeu.validate()?;
        if x.ndim() != 3 || x.dim(1) != self.cfg.input_channels() {
            return Err(Error::Shape(format!(
                "estimator input must be [B, {}, L], got {:?}",
                self.cfg.input_channels(),
                x.shape()
            )));
        }
        if ts.len() != x.dim(0) {
            return Err(Error::Shape("one t per batch item required".into()));
        }
        if ts.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::Config("t must lie in [0, 1]".into()));
        }
        if !x.is_finite() {
            return Err(Error::NonFinite("estimator input contains NaN/Inf".into()));
        }
        if cond.len() != self.cfg.periods.len() {
            return Err(Error::Shape("one conditioning map per period required".into()));
        }
        let sin = Val::constant(sinusoidal_embedding(ts, self.cfg.time_embed_dim));
        let xv = Val::constant(x.clone());
        let mut outs = Vec::with_capacity(self.cfg.periods.len());
        for (pi, &p) in self.cfg.periods.iter().enumerate() {
            let emb = self.cond_vector(s, &sin, pi);
            let (out, shape) = self.period_path(s, &xv, &cond[pi], &emb, p, freeu)?;
            if let Some(tr) = trace.as_deref_mut() {
                tr.per_period.push(shape);
            }
            outs.push(out);
        }
        let mix = ops::sum_vals(&mut s.tape, &outs);
        Ok(self.final_stack(s, &mix))
    }

    /// Inference-time vector field for a single sequence.
    ///
    /// `lower_bands` carries the already-generated lower wavelet bands for
    /// the multi-band variant (must match `cond_channels`).
    pub fn vector_field(
        &self,
        x: &[f64],
        lower_bands: &[Vec<f64>],
        t: f64,
        cond: &CondFeatures,
        freeu: &FreeUParams,
        exec: PeriodExec,
    ) -> Result<Vec<f64>> {
        let out = self.vector_field_traced(x, lower_bands, t, cond, freeu, exec, None)?;
        Ok(out)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn vector_field_traced(
        &self,
        x: &[f64],
        lower_bands: &[Vec<f64>],
        t: f64,
        cond: &CondFeatures,
        freeu: &FreeUParams,
        exec: PeriodExec,
        mut trace: Option<&mut ShapeTrace>,
    ) -> Result<Vec<f64>> {
        freeu.validate()?;
        if lower_bands.len() != self.cfg.cond_channels {
            return Err(Error::Shape(format!(
                "expected {} lower-band signals, got {}",
                self.cfg.cond_channels,
                lower_bands.len()
            )));
        }
        if lower_bands.iter().any(|b| b.len() != x.len()) {
            return Err(Error::Shape("lower band length mismatch".into()));
        }
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Config(format!("t = {t} outside [0, 1]")));
        }
        let l = x.len();
        let cin = self.cfg.input_channels();
        let mut data = Vec::with_capacity(cin * l);
        data.extend_from_slice(x);
        for band in lower_bands {
            data.extend_from_slice(band);
        }
        let xt = Tensor::new(vec![1, cin, l], data);
        if !xt.is_finite() {
            return Err(Error::NonFinite("estimator input contains NaN/Inf".into()));
        }
        if cond.per_period.len() != self.cfg.periods.len() {
            return Err(Error::Shape("conditioning period count mismatch".into()));
        }
        let sin = sinusoidal_embedding(&[t], self.cfg.time_embed_dim);

        let path = |pi: usize| -> Result<(Tensor, PeriodShape)> {
            let mut s = Session::new(&self.store, false);
            let sin_v = Val::constant(sin.clone());
            let emb = self.cond_vector(&mut s, &sin_v, pi);
            let xv = Val::constant(xt.clone());
            let cp = Val::constant(cond.per_period[pi].1.clone());
            let (out, shape) =
                self.period_path(&mut s, &xv, &cp, &emb, self.cfg.periods[pi], freeu)?;
            Ok((out.t, shape))
        };

        let results: Vec<(Tensor, PeriodShape)> = match exec {
            PeriodExec::Sequential => {
                let mut acc = Vec::with_capacity(self.cfg.periods.len());
                for pi in 0..self.cfg.periods.len() {
                    acc.push(path(pi)?);
                }
                acc
            }
            PeriodExec::Batched => (0..self.cfg.periods.len())
                .into_par_iter()
                .map(path)
                .collect::<Result<Vec<_>>>()?,
        };

        let mut s = Session::new(&self.store, false);
        let outs: Vec<Val> = results
            .iter()
            .map(|(t, _)| Val::constant(t.clone()))
            .collect();
        if let Some(tr) = trace.as_deref_mut() {
            for (_, shape) in &results {
                tr.per_period.push(shape.clone());
            }
        }
        let mix = ops::sum_vals(&mut s.tape, &outs);
        let out = self.final_stack(&mut s, &mix);
        Ok(out.t.data().to_vec())
    }

    // -- mel encoder ---------------------------------------------------------

    fn cnx_forward(
        &self,
        s: &mut Session,
        blk: &CnxBlock,
        x: &Val,
        drop_path: f64,
        drop_rng: Option<&mut Rng>,
    ) -> Val {
        let w = s.params[blk.dw.w].clone();
        let b = s.params[blk.dw.b].clone();
        let mut h = ops::dwconv1d(&mut s.tape, x, &w, &b, blk.dw.pad);
        let g = s.params[blk.ln.g].clone();
        let bb = s.params[blk.ln.b].clone();
        h = ops::layer_norm_chan(&mut s.tape, &h, &g, &bb);
        h = self.pw(s, &blk.pw1, &h);
        h = ops::gelu(&mut s.tape, &h);
        let g2 = s.params[blk.grn.g].clone();
        let b2 = s.params[blk.grn.b].clone();
        h = ops::grn_chan(&mut s.tape, &h, &g2, &b2);
        h = self.pw(s, &blk.pw2, &h);
        if drop_path > 0.0 {
            if let Some(rng) = drop_rng {
                let bs = h.t.dim(0);
                let keep = 1.0 - drop_path;
                let factors: Vec<f64> = (0..bs)
                    .map(|_| if rng.uniform() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                h = ops::scale_items(&mut s.tape, &h, &factors);
            }
        }
        ops::add(&mut s.tape, x, &h)
    }

    /// Mel encoder forward on an existing session. `mel` is [B, n_mels, F];
    /// returns one [B, out_dim, ceil(r*F/p)] value per period.
    pub fn mel_encode_on(
        &self,
        s: &mut Session,
        mel: &Tensor,
        mut drop_rng: Option<&mut Rng>,
    ) -> Result<Vec<Val>> {
        if mel.ndim() != 3 || mel.dim(1) != self.mel_cfg.n_mels {
            return Err(Error::Shape(format!(
                "mel input must be [B, {}, F], got {:?}",
                self.mel_cfg.n_mels,
                mel.shape()
            )));
        }
        let x = Val::constant(mel.clone());
        let mut h = self.conv1d(s, &self.arch.mel.embed, &x);
        for blk in &self.arch.mel.stage1 {
            h = self.cnx_forward(s, blk, &h, self.mel_cfg.drop_path, drop_rng.as_deref_mut());
        }
        h = self.conv_t1d(s, &self.arch.mel.up, &h);
        for blk in &self.arch.mel.stage2 {
            h = self.cnx_forward(s, blk, &h, self.mel_cfg.drop_path, drop_rng.as_deref_mut());
        }
        let g = s.params[self.arch.mel.ln.g].clone();
        let b = s.params[self.arch.mel.ln.b].clone();
        h = ops::layer_norm_chan(&mut s.tape, &h, &g, &b);
        Ok(self
            .arch
            .mel
            .per_period
            .iter()
            .map(|c| self.conv1d(s, c, &h))
            .collect())
    }

    /// Compute the time-shared conditioning once for a spectrogram.
    pub fn mel_encode(&self, mel: &MelSpec) -> Result<CondFeatures> {
        let t = mel_to_tensor(mel);
        let mut s = Session::new(&self.store, false);
        let vals = self.mel_encode_on(&mut s, &t, None)?;
        Ok(CondFeatures {
            per_period: self
                .cfg
                .periods
                .iter()
                .copied()
                .zip(vals.into_iter().map(|v| v.t))
                .collect(),
            frames: mel.frames,
        })
    }
}

fn cnx_block(b: &mut Builder, name: &str, dim: usize, hidden: usize) -> CnxBlock {
    CnxBlock {
        dw: b.dw(&format!("{name}.dw"), dim, 7),
        ln: b.norm(&format!("{name}.ln"), dim, 1.0),
        pw1: b.pw(&format!("{name}.pw1"), hidden, dim),
        grn: b.norm(&format!("{name}.grn"), hidden, 0.0),
        pw2: b.pw(&format!("{name}.pw2"), dim, hidden),
    }
}

/// [B, dim] sinusoidal embedding of t scaled by 1000.
pub fn sinusoidal_embedding(ts: &[f64], dim: usize) -> Tensor {
    let half = dim / 2;
    let mut out = vec![0.0; ts.len() * dim];
    for (bi, &t) in ts.iter().enumerate() {
        for j in 0..half {
            let freq = (-(10_000f64).ln() * j as f64 / (half - 1).max(1) as f64).exp();
            let angle = t * 1000.0 * freq;
            out[bi * dim + j] = angle.sin();
            out[bi * dim + half + j] = angle.cos();
        }
    }
    Tensor::new(vec![ts.len(), dim], out)
}

/// Frame-major MelSpec -> [1, n_mels, frames] tensor.
pub fn mel_to_tensor(mel: &MelSpec) -> Tensor {
    let (f, m) = (mel.frames, mel.n_mels());
    let mut data = vec![0.0; m * f];
    for t in 0..f {
        for b in 0..m {
            data[b * f + t] = mel.values[t * m + b];
        }
    }
    Tensor::new(vec![1, m, f], data)
}

/// Batch of mel spectrograms -> [B, n_mels, frames].
pub fn mels_to_tensor(mels: &[&MelSpec]) -> Result<Tensor> {
    if mels.is_empty() {
        return Err(Error::Shape("empty mel batch".into()));
    }
    let f = mels[0].frames;
    let m = mels[0].n_mels();
    if mels.iter().any(|x| x.frames != f || x.n_mels() != m) {
        return Err(Error::Shape("mel batch shapes differ".into()));
    }
    let mut data = vec![0.0; mels.len() * m * f];
    for (bi, mel) in mels.iter().enumerate() {
        for t in 0..f {
            for b in 0..m {
                data[(bi * m + b) * f + t] = mel.values[t * m + b];
            }
        }
    }
    Ok(Tensor::new(vec![mels.len(), m, f], data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::Waveform;
    use crate::flow;
    use crate::mel::{mel_spectrogram, MelConfig};
    use crate::nn::ops;

    fn toy_wave(len: usize) -> Waveform {
        Waveform::new(
            (0..len)
                .map(|i| {
                    let t = i as f64 / 24000.0;
                    0.6 * (std::f64::consts::TAU * 220.0 * t).sin()
                        + 0.2 * (std::f64::consts::TAU * 660.0 * t).sin()
                })
                .collect(),
            24000,
        )
        .unwrap()
    }

    fn tiny_estimator(periods: Vec<usize>) -> Estimator {
        let mel_cfg = MelEncoderConfig::tiny(periods.clone(), 100, 32);
        Estimator::init(EstimatorConfig::tiny(periods, 0, false), mel_cfg, 11).unwrap()
    }

    #[test]
    fn full_band_param_count_near_published() {
        let est = Estimator::init(
            EstimatorConfig::full_band(),
            MelEncoderConfig::full_band(),
            0,
        )
        .unwrap();
        let count = est.param_count() as f64;
        let published = 29.73e6;
        let ratio = count / published;
        assert!(
            (0.9..=1.1).contains(&ratio),
            "{count} params vs published {published} (ratio {ratio:.4})"
        );
    }

    #[test]
    fn same_seed_same_parameters() {
        let a = tiny_estimator(vec![1, 2, 3]);
        let b = tiny_estimator(vec![1, 2, 3]);
        for i in 0..a.store.len() {
            assert_eq!(a.store.tensor(i).data(), b.store.tensor(i).data());
        }
    }

    #[test]
    fn tiny_forward_smoke() {
        let est = tiny_estimator(vec![1, 2, 3]);
        let w = toy_wave(1024);
        let mel = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        let cond = est.mel_encode(&mel).unwrap();
        let out = est
            .vector_field(
                &w.samples,
                &[],
                0.5,
                &cond,
                &FreeUParams::default(),
                PeriodExec::Sequential,
            )
            .unwrap();
        assert_eq!(out.len(), 1024);
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn shape_contract_full_ratios_at_training_length() {
        // reduced widths, full stride layout, all five periods, T = 32768
        let periods = vec![1usize, 2, 3, 5, 7];
        let est = Estimator::init(
            EstimatorConfig::tiny(periods.clone(), 0, false),
            MelEncoderConfig::tiny(periods.clone(), 100, 32),
            3,
        )
        .unwrap();
        let w = toy_wave(32768);
        let mel = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        assert_eq!(mel.frames, 128);
        let cond = est.mel_encode(&mel).unwrap();
        let mut trace = ShapeTrace::default();
        let out = est
            .vector_field_traced(
                &w.samples,
                &[],
                0.3,
                &cond,
                &FreeUParams::default(),
                PeriodExec::Batched,
                Some(&mut trace),
            )
            .unwrap();
        assert_eq!(out.len(), 32768);
        assert_eq!(trace.per_period.len(), 5);
        for shape in &trace.per_period {
            let p = shape.period;
            let align = p * 64;
            let padded = 32768usize.div_ceil(align) * align;
            assert_eq!(shape.padded_len, padded, "period {p}");
            assert_eq!(shape.mid_height, padded / (p * 64), "period {p}");
            assert_eq!(shape.cond_len, shape.mid_height, "period {p}");
        }
        // the published arithmetic: p=7 pads to 33152 rows of height 4736
        let s7 = trace.per_period.iter().find(|s| s.period == 7).unwrap();
        assert_eq!(s7.padded_len, 33152);
        assert_eq!(s7.mid_height, 74);
    }

    #[test]
    fn freeu_identity_and_tuned_point() {
        let est = tiny_estimator(vec![1, 2]);
        let w = toy_wave(1024);
        let mel = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        let cond = est.mel_encode(&mel).unwrap();
        let run = |freeu: FreeUParams| {
            est.vector_field(&w.samples, &[], 0.4, &cond, &freeu, PeriodExec::Sequential)
                .unwrap()
        };
        let disabled = run(FreeUParams::default());
        let identity = run(FreeUParams {
            skip_scale: 1.0,
            backbone_scale: 1.0,
            enabled: true,
        });
        let tuned = run(FreeUParams::tuned());
        let max_id: f64 = disabled
            .iter()
            .zip(&identity)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_id < 1e-6, "identity deviation {max_id}");
        let max_tuned: f64 = disabled
            .iter()
            .zip(&tuned)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(max_tuned > 1e-9, "tuned point must differ from identity");
    }

    #[test]
    fn period_batch_matches_sequential() {
        let est = tiny_estimator(vec![1, 2, 3, 5, 7]);
        let w = toy_wave(2048);
        let mel = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        let cond = est.mel_encode(&mel).unwrap();
        let seq = est
            .vector_field(&w.samples, &[], 0.7, &cond, &FreeUParams::default(), PeriodExec::Sequential)
            .unwrap();
        let par = est
            .vector_field(&w.samples, &[], 0.7, &cond, &FreeUParams::default(), PeriodExec::Batched)
            .unwrap();
        let denom: f64 = seq.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let diff: f64 = seq
            .iter()
            .zip(&par)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(diff / denom < 1e-5, "relative deviation {}", diff / denom);
    }

    #[test]
    fn time_conditioning_is_effective() {
        let est = tiny_estimator(vec![1, 2]);
        let w = toy_wave(1024);
        let mel = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        let cond = est.mel_encode(&mel).unwrap();
        let run = |t: f64| {
            est.vector_field(&w.samples, &[], t, &cond, &FreeUParams::default(), PeriodExec::Sequential)
                .unwrap()
        };
        let a = run(0.1);
        let b = run(0.9);
        let denom: f64 = a.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        let diff: f64 = a
            .iter()
            .zip(&b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(diff / denom > 1e-6, "outputs at t=0.1 and t=0.9 too close");
    }

    #[test]
    fn multiband_forward_and_cond_interp() {
        let periods = vec![1usize, 2, 3];
        let est = Estimator::init(
            EstimatorConfig::tiny(periods.clone(), 2, true),
            MelEncoderConfig::tiny(periods, 100, 32),
            5,
        )
        .unwrap();
        let w = toy_wave(4096);
        let mel = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        let cond = est.mel_encode(&mel).unwrap();
        let band_len = 1024;
        let x = vec![0.01; band_len];
        let lower = vec![vec![0.02; band_len], vec![-0.01; band_len]];
        let mut trace = ShapeTrace::default();
        let out = est
            .vector_field_traced(
                &x,
                &lower,
                0.5,
                &cond,
                &FreeUParams::default(),
                PeriodExec::Sequential,
                Some(&mut trace),
            )
            .unwrap();
        assert_eq!(out.len(), band_len);
        for shape in &trace.per_period {
            // multi-band reduction is 32x: Haar halving plus two stride-4 stages
            assert_eq!(shape.mid_height, shape.padded_len / (shape.period * 32));
        }
    }

    fn flat_param_count(est: &Estimator) -> usize {
        est.store.param_count()
    }

    /// CFM loss as a pure function of parameters for finite differencing.
    fn loss_value(est: &Estimator, x: &Tensor, ts: &[f64], mel_t: &Tensor, u: &Tensor) -> f64 {
        let mut s = Session::new(&est.store, false);
        let cond = est.mel_encode_on(&mut s, mel_t, None).unwrap();
        let v = est
            .field_on(&mut s, x, ts, &cond, &FreeUParams::default(), None)
            .unwrap();
        ops::mse_against(&mut s.tape, &v, u).t.item()
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let periods = vec![1usize, 2, 3];
        let mut est = Estimator::init(
            EstimatorConfig::tiny(periods.clone(), 0, false),
            MelEncoderConfig::tiny(periods, 100, 16),
            21,
        )
        .unwrap();
        let w = toy_wave(1024);
        let mel = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        let mel_t = mels_to_tensor(&[&mel]).unwrap();
        let mut rng = Rng::seed_from(77);
        let x0: Vec<f64> = (0..1024).map(|_| 0.3 * rng.normal()).collect();
        let x_t = flow::ot_path(&x0, &w.samples, 0.37, flow::SIGMA_MIN).unwrap();
        let u = flow::ot_target(&x0, &w.samples, flow::SIGMA_MIN).unwrap();
        let x = Tensor::new(vec![1, 1, 1024], x_t);
        let u = Tensor::new(vec![1, 1, 1024], u);
        let ts = [0.37];

        // analytic gradients
        let mut s = Session::new(&est.store, true);
        let cond = est.mel_encode_on(&mut s, &mel_t, None).unwrap();
        let v = est
            .field_on(&mut s, &x, &ts, &cond, &FreeUParams::default(), None)
            .unwrap();
        let loss = ops::mse_against(&mut s.tape, &v, &u);
        let grads = s.grads(&loss);
        drop(s);

        let total = flat_param_count(&est);
        let n_params = est.store.len();
        let h = 1e-5;
        let mut checked = 0;
        let mut attempts = 0;
        while checked < 20 && attempts < 200 {
            attempts += 1;
            let flat = rng.below(total);
            // map flat index to (tensor, element)
            let mut idx = flat;
            let mut pi = 0;
            for i in 0..n_params {
                let n = est.store.tensor(i).numel();
                if idx < n {
                    pi = i;
                    break;
                }
                idx -= n;
            }
            let analytic = match &grads[pi] {
                Some(g) => g.data()[idx],
                None => 0.0,
            };
            let orig = est.store.tensor(pi).data()[idx];
            est.store.tensor_mut(pi).data_mut()[idx] = orig + h;
            let up = loss_value(&est, &x, &ts, &mel_t, &u);
            est.store.tensor_mut(pi).data_mut()[idx] = orig - h;
            let down = loss_value(&est, &x, &ts, &mel_t, &u);
            est.store.tensor_mut(pi).data_mut()[idx] = orig;
            let fd = (up - down) / (2.0 * h);
            let denom = analytic.abs().max(fd.abs());
            if denom < 1e-8 {
                continue; // both effectively zero at this point
            }
            let rel = (analytic - fd).abs() / denom;
            assert!(
                rel < 1e-3,
                "param {} [{idx}]: analytic {analytic:.3e} vs fd {fd:.3e} (rel {rel:.3e})",
                est.store.name(pi)
            );
            checked += 1;
        }
        assert!(checked >= 20, "only {checked} informative parameters checked");
    }

    #[test]
    fn checkpoint_roundtrip_bit_exact() {
        let est = tiny_estimator(vec![1, 2]);
        let dir = tempfile::tempdir().unwrap();
        let c1 = dir.path().join("ck1");
        let c2 = dir.path().join("ck2");
        save_checkpoint(&est, &MelConfig::default(), 0, &c1).unwrap();
        let (loaded, mel_cfg, band) = load_checkpoint(&c1).unwrap();
        assert_eq!(band, 0);
        assert_eq!(mel_cfg, MelConfig::default());
        save_checkpoint(&loaded, &mel_cfg, band, &c2).unwrap();
        for entry in std::fs::read_dir(c1.join("params")).unwrap() {
            let p1 = entry.unwrap().path();
            let p2 = c2.join("params").join(p1.file_name().unwrap());
            let b1 = std::fs::read(&p1).unwrap();
            let b2 = std::fs::read(&p2).unwrap();
            assert_eq!(b1, b2, "bytes differ for {}", p1.display());
        }
        // loading the second copy reproduces the first exactly
        let (again, _, _) = load_checkpoint(&c2).unwrap();
        for i in 0..loaded.store.len() {
            assert_eq!(loaded.store.tensor(i).data(), again.store.tensor(i).data());
        }
    }

    #[test]
    fn sinusoidal_embedding_shape_and_range() {
        let e = sinusoidal_embedding(&[0.0, 0.5, 1.0], 32);
        assert_eq!(e.shape(), &[3, 32]);
        assert!(e.data().iter().all(|v| v.abs() <= 1.0));
        // t=0 gives sin=0, cos=1 halves
        assert!(e.data()[..16].iter().all(|&v| v == 0.0));
        assert!(e.data()[16..32].iter().all(|&v| v == 1.0));
    }

    #[test]
    fn rejects_out_of_range_t() {
        let est = tiny_estimator(vec![1]);
        let w = toy_wave(1024);
        let mel = mel_spectrogram(&w, &MelConfig::default()).unwrap();
        let cond = est.mel_encode(&mel).unwrap();
        let err = est.vector_field(
            &w.samples,
            &[],
            1.5,
            &cond,
            &FreeUParams::default(),
            PeriodExec::Sequential,
        );
        assert!(err.is_err());
        let nan_input = vec![f64::NAN; 1024];
        assert!(est
            .vector_field(&nan_input, &[], 0.5, &cond, &FreeUParams::default(), PeriodExec::Sequential)
            .is_err());
    }
}
