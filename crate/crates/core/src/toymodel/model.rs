//! A small mel-input convolutional classifier with hand-written gradients.
//!
//! Feature extractor: 1-D convolution over frames (mel bins as input
//! channels, no bias) → batch norm → ReLU → mean over time → linear to the
//! embedding. Classifier: linear → ReLU → linear → softmax. Weights are
//! stored row-major in the two flat parameter groups.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::audio::{MelConfig, MelExtractor, Waveform};
use crate::tta::{AdaptableModel, Forward, Mode, ParamGroups, TtaError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyArch {
    pub sample_rate: u32,
    pub n_mels: usize,
    pub filters: usize,
    pub kernel: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub n_classes: usize,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    /// Multiplier applied to log-mel values before the convolution.
    pub input_scale: f64,
}

impl Default for ToyArch {
    fn default() -> Self {
        Self {
            sample_rate: 16000,
            n_mels: 64,
            filters: 32,
            kernel: 3,
            embed_dim: 64,
            hidden: 32,
            n_classes: 4,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
            input_scale: 0.1,
        }
    }
}

/// Parameter ranges inside the two flat groups.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Layout {
    pub conv_w: Range<usize>,
    pub gamma: Range<usize>,
    pub beta: Range<usize>,
    pub proj_w: Range<usize>,
    pub proj_b: Range<usize>,
    pub fc1_w: Range<usize>,
    pub fc1_b: Range<usize>,
    pub fc2_w: Range<usize>,
    pub fc2_b: Range<usize>,
}

impl Layout {
    fn new(a: &ToyArch) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let conv_w = take(a.filters * a.n_mels * a.kernel);
        let gamma = take(a.filters);
        let beta = take(a.filters);
        let proj_w = take(a.embed_dim * a.filters);
        let proj_b = take(a.embed_dim);
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        Self {
            conv_w,
            gamma,
            beta,
            proj_w,
            proj_b,
            fc1_w: take(a.hidden * a.embed_dim),
            fc1_b: take(a.hidden),
            fc2_w: take(a.n_classes * a.hidden),
            fc2_b: take(a.n_classes),
        }
    }

    fn fe_len(&self) -> usize {
        self.proj_b.end
    }

    fn cls_len(&self) -> usize {
        self.fc2_b.end
    }
}

#[derive(Debug, Clone)]
pub struct ToyModel {
    arch: ToyArch,
    layout: Layout,
    params: ParamGroups,
    pub(crate) running_mean: Vec<f64>,
    pub(crate) running_var: Vec<f64>,
    mel: MelExtractor,
}

/// Values saved by [`ToyModel::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ToyTape {
    cols: Vec<DMatrix<f64>>,
    xhat: Vec<DMatrix<f64>>,
    pre_relu: Vec<DMatrix<f64>>,
    inv_std: Vec<f64>,
    batch_stats: bool,
    pooled: DMatrix<f64>,
    emb: DMatrix<f64>,
    z3: DMatrix<f64>,
    a3: DMatrix<f64>,
    probs: DMatrix<f64>,
}

fn mat(v: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, v)
}

fn write_row_major(dst: &mut [f64], m: &DMatrix<f64>) {
    for (i, row) in m.row_iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            dst[i * m.ncols() + j] = *v;
        }
    }
}

fn relu_mask(z: &DMatrix<f64>, g: &DMatrix<f64>) -> DMatrix<f64> {
    g.zip_map(z, |g, z| if z > 0.0 { g } else { 0.0 })
}

fn add_row_bias(m: &mut DMatrix<f64>, b: &[f64]) {
    for mut row in m.row_iter_mut() {
        for (v, b) in row.iter_mut().zip(b) {
            *v += b;
        }
    }
}

fn softmax_rows(z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut p = z.clone();
    for mut row in p.row_iter_mut() {
        let m = row.max();
        row.apply(|v| *v = (*v - m).exp());
        let s = row.sum();
        row /= s;
    }
    p
}

impl ToyModel {
    /// He-style normal initialization from `seed`.
    pub fn new(arch: ToyArch, seed: u64) -> Result<Self, TtaError> {
        if arch.kernel == 0 || arch.filters == 0 || arch.embed_dim == 0 || arch.hidden == 0 || arch.n_classes < 2 {
            return Err(TtaError::Config("toy architecture has a zero-sized layer".into()));
        }
        let mut cfg = MelConfig::for_rate(arch.sample_rate);
        cfg.n_mels = arch.n_mels;
        let mel = MelExtractor::new(cfg, arch.sample_rate)?;
        let layout = Layout::new(&arch);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamGroups {
            feature_extractor: vec![0.0; layout.fe_len()],
            classifier: vec![0.0; layout.cls_len()],
        };
        let mut fill = |dst: &mut [f64], fan_in: usize, gain: f64| {
            let n = Normal::new(0.0, (gain / fan_in as f64).sqrt()).expect("positive std");
            dst.iter_mut().for_each(|v| *v = n.sample(&mut rng));
        };
        fill(&mut params.feature_extractor[layout.conv_w.clone()], arch.n_mels * arch.kernel, 2.0);
        params.feature_extractor[layout.gamma.clone()].fill(1.0);
        fill(&mut params.feature_extractor[layout.proj_w.clone()], arch.filters, 1.0);
        fill(&mut params.classifier[layout.fc1_w.clone()], arch.embed_dim, 2.0);
        fill(&mut params.classifier[layout.fc2_w.clone()], arch.hidden, 1.0);
        Ok(Self {
            arch,
            layout,
            params,
            running_mean: vec![0.0; arch.filters],
            running_var: vec![1.0; arch.filters],
            mel,
        })
    }

    pub fn arch(&self) -> &ToyArch {
        &self.arch
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn running_stats(&self) -> (&[f64], &[f64]) {
        (&self.running_mean, &self.running_var)
    }

    pub(crate) fn set_state(&mut self, params: ParamGroups, mean: Vec<f64>, var: Vec<f64>) -> Result<(), TtaError> {
        if params.feature_extractor.len() != self.layout.fe_len()
            || params.classifier.len() != self.layout.cls_len()
            || mean.len() != self.arch.filters
            || var.len() != self.arch.filters
        {
            return Err(TtaError::Shape("state does not match the architecture".into()));
        }
        self.params = params;
        self.running_mean = mean;
        self.running_var = var;
        Ok(())
    }

    /// Named groups with shapes, in checkpoint order.
    pub(crate) fn named_tensors(&self) -> Vec<(&'static str, Vec<usize>, Vec<f64>)> {
        let a = &self.arch;
        let l = &self.layout;
        let fe = &self.params.feature_extractor;
        let c = &self.params.classifier;
        vec![
            ("fe.conv.weight", vec![a.filters, a.n_mels, a.kernel], fe[l.conv_w.clone()].to_vec()),
            ("fe.bn.gamma", vec![a.filters], fe[l.gamma.clone()].to_vec()),
            ("fe.bn.beta", vec![a.filters], fe[l.beta.clone()].to_vec()),
            ("fe.proj.weight", vec![a.embed_dim, a.filters], fe[l.proj_w.clone()].to_vec()),
            ("fe.proj.bias", vec![a.embed_dim], fe[l.proj_b.clone()].to_vec()),
            ("cls.fc1.weight", vec![a.hidden, a.embed_dim], c[l.fc1_w.clone()].to_vec()),
            ("cls.fc1.bias", vec![a.hidden], c[l.fc1_b.clone()].to_vec()),
            ("cls.fc2.weight", vec![a.n_classes, a.hidden], c[l.fc2_w.clone()].to_vec()),
            ("cls.fc2.bias", vec![a.n_classes], c[l.fc2_b.clone()].to_vec()),
            ("state.bn.running_mean", vec![a.filters], self.running_mean.clone()),
            ("state.bn.running_var", vec![a.filters], self.running_var.clone()),
        ]
    }

    /// Column matrix of `kernel`-frame windows: row `m*kernel + j`, column `t`
    /// holds mel bin `m` at frame `t + j`, scaled.
    fn im2col(&self, w: &Waveform) -> Result<DMatrix<f64>, TtaError> {
        let f = self.mel.extract(w)?;
        let k = self.arch.kernel;
        if f.n_frames < k {
            return Err(TtaError::Shape(format!("clip yields {} frames; kernel needs {k}", f.n_frames)));
        }
        let t_out = f.n_frames - k + 1;
        let s = self.arch.input_scale;
        Ok(DMatrix::from_fn(f.n_mels * k, t_out, |r, t| s * f.get(r / k, t + r % k)))
    }

    /// Forward pass from precomputed column matrices.
    pub(crate) fn forward_cols(&mut self, cols: Vec<DMatrix<f64>>, mode: Mode) -> Result<(Forward, ToyTape), TtaError> {
        if cols.is_empty() {
            return Err(TtaError::Shape("empty batch".into()));
        }
        let a = self.arch;
        let l = &self.layout;
        let fe = &self.params.feature_extractor;
        let cl = &self.params.classifier;
        let wc = mat(&fe[l.conv_w.clone()], a.filters, a.n_mels * a.kernel);
        let conv: Vec<DMatrix<f64>> = cols.iter().map(|c| &wc * c).collect();

        let batch_stats = mode != Mode::Inference;
        let (mean, var) = if batch_stats {
            let n: usize = conv.iter().map(|c| c.ncols()).sum();
            if n < 2 {
                return Err(TtaError::Shape("batch statistics need at least two positions".into()));
            }
            let mut mean = vec![0.0; a.filters];
            for c in &conv {
                for (k, m) in mean.iter_mut().enumerate() {
                    *m += c.row(k).sum();
                }
            }
            mean.iter_mut().for_each(|m| *m /= n as f64);
            let mut var = vec![0.0; a.filters];
            for c in &conv {
                for (k, v) in var.iter_mut().enumerate() {
                    *v += c.row(k).iter().map(|x| (x - mean[k]).powi(2)).sum::<f64>();
                }
            }
            var.iter_mut().for_each(|v| *v /= n as f64);
            if mode == Mode::Train {
                let mom = a.bn_momentum;
                let unbias = n as f64 / (n - 1) as f64;
                for k in 0..a.filters {
                    self.running_mean[k] = (1.0 - mom) * self.running_mean[k] + mom * mean[k];
                    self.running_var[k] = (1.0 - mom) * self.running_var[k] + mom * var[k] * unbias;
                }
            }
            (mean, var)
        } else {
            (self.running_mean.clone(), self.running_var.clone())
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + a.bn_eps).sqrt()).collect();
        let gamma = &fe[l.gamma.clone()];
        let beta = &fe[l.beta.clone()];

        let b = conv.len();
        let mut pooled = DMatrix::zeros(b, a.filters);
        let mut xhat = Vec::with_capacity(b);
        let mut pre_relu = Vec::with_capacity(b);
        for (i, c) in conv.into_iter().enumerate() {
            let xh = DMatrix::from_fn(c.nrows(), c.ncols(), |k, t| (c[(k, t)] - mean[k]) * inv_std[k]);
            let y = DMatrix::from_fn(c.nrows(), c.ncols(), |k, t| gamma[k] * xh[(k, t)] + beta[k]);
            for k in 0..a.filters {
                pooled[(i, k)] = y.row(k).iter().map(|v| v.max(0.0)).sum::<f64>() / y.ncols() as f64;
            }
            xhat.push(xh);
            pre_relu.push(y);
        }

        let mut emb = &pooled * mat(&fe[l.proj_w.clone()], a.embed_dim, a.filters).transpose();
        add_row_bias(&mut emb, &fe[l.proj_b.clone()]);
        let mut z3 = &emb * mat(&cl[l.fc1_w.clone()], a.hidden, a.embed_dim).transpose();
        add_row_bias(&mut z3, &cl[l.fc1_b.clone()]);
        let a3 = z3.map(|v| v.max(0.0));
        let mut z4 = &a3 * mat(&cl[l.fc2_w.clone()], a.n_classes, a.hidden).transpose();
        add_row_bias(&mut z4, &cl[l.fc2_b.clone()]);
        let probs = softmax_rows(&z4);

        let fwd = Forward {
            probs: probs.clone(),
            embeddings: emb.clone(),
        };
        Ok((
            fwd,
            ToyTape {
                cols,
                xhat,
                pre_relu,
                inv_std,
                batch_stats,
                pooled,
                emb,
                z3,
                a3,
                probs,
            },
        ))
    }

    pub(crate) fn batch_cols(&self, batch: &[Waveform]) -> Result<Vec<DMatrix<f64>>, TtaError> {
        if let Some(w) = batch.iter().find(|w| w.sample_rate() != self.arch.sample_rate) {
            return Err(TtaError::Shape(format!(
                "model expects {} Hz audio, got {} Hz",
                self.arch.sample_rate,
                w.sample_rate()
            )));
        }
        batch.iter().map(|w| self.im2col(w)).collect()
    }

    /// Parameter gradients given the loss gradient with respect to the
    /// pre-softmax logits.
    pub fn backward_logits(&self, tape: &ToyTape, dz4: &DMatrix<f64>) -> Result<ParamGroups, TtaError> {
        let a = self.arch;
        let l = &self.layout;
        if dz4.shape() != tape.probs.shape() {
            return Err(TtaError::Shape(format!("gradient shape {:?} vs {:?}", dz4.shape(), tape.probs.shape())));
        }
        let fe = &self.params.feature_extractor;
        let cl = &self.params.classifier;
        let mut g = ParamGroups::zeros_like(&self.params);

        let col_sums = |m: &DMatrix<f64>| -> Vec<f64> { m.column_iter().map(|c| c.sum()).collect() };

        write_row_major(&mut g.classifier[l.fc2_w.clone()], &(dz4.transpose() * &tape.a3));
        g.classifier[l.fc2_b.clone()].copy_from_slice(&col_sums(dz4));
        let da3 = dz4 * mat(&cl[l.fc2_w.clone()], a.n_classes, a.hidden);
        let dz3 = relu_mask(&tape.z3, &da3);
        write_row_major(&mut g.classifier[l.fc1_w.clone()], &(dz3.transpose() * &tape.emb));
        g.classifier[l.fc1_b.clone()].copy_from_slice(&col_sums(&dz3));
        let demb = &dz3 * mat(&cl[l.fc1_w.clone()], a.hidden, a.embed_dim);
        write_row_major(&mut g.feature_extractor[l.proj_w.clone()], &(demb.transpose() * &tape.pooled));
        g.feature_extractor[l.proj_b.clone()].copy_from_slice(&col_sums(&demb));
        let dpool = &demb * mat(&fe[l.proj_w.clone()], a.embed_dim, a.filters);

        let gamma = &fe[l.gamma.clone()];
        let mut dgamma = vec![0.0; a.filters];
        let mut dbeta = vec![0.0; a.filters];
        let mut dxhat = Vec::with_capacity(tape.xhat.len());
        for (i, (y, xh)) in tape.pre_relu.iter().zip(&tape.xhat).enumerate() {
            let t = y.ncols() as f64;
            let dy = DMatrix::from_fn(y.nrows(), y.ncols(), |k, j| if y[(k, j)] > 0.0 { dpool[(i, k)] / t } else { 0.0 });
            for k in 0..a.filters {
                dgamma[k] += dy.row(k).dot(&xh.row(k));
                dbeta[k] += dy.row(k).sum();
            }
            dxhat.push(DMatrix::from_fn(dy.nrows(), dy.ncols(), |k, j| dy[(k, j)] * gamma[k]));
        }
        g.feature_extractor[l.gamma.clone()].copy_from_slice(&dgamma);
        g.feature_extractor[l.beta.clone()].copy_from_slice(&dbeta);

        let (mut s1, mut s2) = (vec![0.0; a.filters], vec![0.0; a.filters]);
        let n: usize = tape.xhat.iter().map(|x| x.ncols()).sum();
        if tape.batch_stats {
            for (dx, xh) in dxhat.iter().zip(&tape.xhat) {
                for k in 0..a.filters {
                    s1[k] += dx.row(k).sum();
                    s2[k] += dx.row(k).dot(&xh.row(k));
                }
            }
        }
        let mut dwc = DMatrix::zeros(a.filters, a.n_mels * a.kernel);
        for ((dx, xh), cols) in dxhat.iter().zip(&tape.xhat).zip(&tape.cols) {
            let dc = if tape.batch_stats {
                let n = n as f64;
                DMatrix::from_fn(dx.nrows(), dx.ncols(), |k, j| {
                    tape.inv_std[k] / n * (n * dx[(k, j)] - s1[k] - xh[(k, j)] * s2[k])
                })
            } else {
                DMatrix::from_fn(dx.nrows(), dx.ncols(), |k, j| dx[(k, j)] * tape.inv_std[k])
            };
            dwc += dc * cols.transpose();
        }
        write_row_major(&mut g.feature_extractor[l.conv_w.clone()], &dwc);
        Ok(g)
    }
}

impl AdaptableModel for ToyModel {
    type Tape = ToyTape;

    fn n_classes(&self) -> usize {
        self.arch.n_classes
    }

    fn params(&self) -> &ParamGroups {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamGroups {
        &mut self.params
    }

    fn forward(&mut self, batch: &[Waveform], mode: Mode) -> Result<(Forward, ToyTape), TtaError> {
        let cols = self.batch_cols(batch)?;
        self.forward_cols(cols, mode)
    }

    fn backward(&self, tape: &ToyTape, grad_probs: &DMatrix<f64>) -> Result<ParamGroups, TtaError> {
        if grad_probs.shape() != tape.probs.shape() {
            return Err(TtaError::Shape("gradient and probabilities differ in shape".into()));
        }
        // Softmax Jacobian, row by row: p ⊙ (g − ⟨g, p⟩).
        let mut dz = tape.probs.component_mul(grad_probs);
        for (i, mut row) in dz.row_iter_mut().enumerate() {
            let dot = grad_probs.row(i).dot(&tape.probs.row(i));
            for (j, v) in row.iter_mut().enumerate() {
                *v -= tape.probs[(i, j)] * dot;
            }
        }
        self.backward_logits(tape, &dz)
    }
}
