//! Single-convolution network over 257x59 spectrogram images.
//!
//! Stack: conv (stride 1, valid) -> batch norm -> ReLU -> max pool (stride 1)
//! -> dropout -> fc1 -> dropout -> fc2 -> softmax. Class index 1 is wheeze.

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{N_BINS, N_FRAMES};
use crate::error::{Error, Result};
use crate::rng::{mix, rng_from_seed};

pub trait Real: Float + Send + Sync + Default + std::fmt::Debug + std::iter::Sum + 'static {}
impl Real for f32 {}
impl Real for f64 {}

#[inline]
fn cast<T: Real>(v: f64) -> T {
    T::from(v).unwrap()
}

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;
pub const GRAD_CHECK_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared on an absolute scale.
pub const REL_ERROR_FLOOR: f64 = 1e-6;
pub const PARAM_NAMES: [&str; 8] = ["conv_w", "conv_b", "bn_gamma", "bn_beta", "fc1_w", "fc1_b", "fc2_w", "fc2_b"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CnnArchitecture {
    pub conv_size: usize,
    pub conv_filters: usize,
    pub pool_size: usize,
    pub fc1_size: usize,
    pub dropout_rate: f64,
    pub input_rows: usize,
    pub input_cols: usize,
}

impl CnnArchitecture {
    pub fn new(conv_size: usize, conv_filters: usize, pool_size: usize, fc1_size: usize) -> Self {
        CnnArchitecture {
            conv_size,
            conv_filters,
            pool_size,
            fc1_size,
            dropout_rate: 0.5,
            input_rows: N_BINS,
            input_cols: N_FRAMES,
        }
    }

    pub fn fd_best() -> Self {
        Self::new(7, 64, 2, 10)
    }

    pub fn vd_best() -> Self {
        Self::new(5, 32, 4, 20)
    }

    /// The 24 grid-search candidates.
    pub fn search_grid() -> Vec<Self> {
        let mut grid = Vec::new();
        for conv in [3, 5, 7] {
            for filters in [32, 64] {
                for pool in [2, 4] {
                    for fc1 in [10, 20] {
                        grid.push(Self::new(conv, filters, pool, fc1));
                    }
                }
            }
        }
        grid
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Architecture(m));
        if self.conv_size == 0 || self.conv_filters == 0 || self.pool_size == 0 || self.fc1_size == 0 {
            return bad(format!("all layer sizes must be positive: {self:?}"));
        }
        if self.conv_size > self.input_rows || self.conv_size > self.input_cols {
            return bad(format!(
                "kernel {} does not fit a {}x{} input",
                self.conv_size, self.input_rows, self.input_cols
            ));
        }
        let [h, w, _] = self.conv_shape();
        if self.pool_size > h || self.pool_size > w {
            return bad(format!("pool {} does not fit a {h}x{w} map", self.pool_size));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout rate must lie in [0, 1), got {}", self.dropout_rate));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.input_rows * self.input_cols
    }

    pub fn conv_shape(&self) -> [usize; 3] {
        [
            self.input_rows + 1 - self.conv_size,
            self.input_cols + 1 - self.conv_size,
            self.conv_filters,
        ]
    }

    pub fn pool_shape(&self) -> [usize; 3] {
        let [h, w, f] = self.conv_shape();
        [h + 1 - self.pool_size, w + 1 - self.pool_size, f]
    }

    pub fn fc_inputs(&self) -> usize {
        self.pool_shape().iter().product()
    }

    /// Activation shape after each layer as (rows, cols, channels).
    pub fn layer_shapes(&self) -> Vec<(&'static str, [usize; 3])> {
        let conv = self.conv_shape();
        let pool = self.pool_shape();
        vec![
            ("input", [self.input_rows, self.input_cols, 1]),
            ("conv", conv),
            ("batchnorm", conv),
            ("relu", conv),
            ("maxpool", pool),
            ("dropout", pool),
            ("fc1", [1, 1, self.fc1_size]),
            ("dropout", [1, 1, self.fc1_size]),
            ("fc2", [1, 1, 2]),
            ("softmax", [1, 1, 2]),
        ]
    }

    fn tensor_lens(&self) -> [usize; 8] {
        let k2 = self.conv_size * self.conv_size;
        let f = self.conv_filters;
        [
            k2 * f,
            f,
            f,
            f,
            self.fc1_size * self.fc_inputs(),
            self.fc1_size,
            2 * self.fc1_size,
            2,
        ]
    }

    pub fn n_parameters(&self) -> usize {
        self.tensor_lens().iter().sum()
    }
}

/// Trainable tensors, also used to hold gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnParams<T> {
    /// [filter][row][col]
    pub conv_w: Vec<T>,
    pub conv_b: Vec<T>,
    pub bn_gamma: Vec<T>,
    pub bn_beta: Vec<T>,
    /// [unit][input], input flattened as [channel][row][col]
    pub fc1_w: Vec<T>,
    pub fc1_b: Vec<T>,
    /// [class][unit]
    pub fc2_w: Vec<T>,
    pub fc2_b: Vec<T>,
}

impl<T: Real> CnnParams<T> {
    pub fn zeros(arch: &CnnArchitecture) -> Self {
        let l = arch.tensor_lens();
        let z = |n: usize| vec![T::zero(); n];
        CnnParams {
            conv_w: z(l[0]),
            conv_b: z(l[1]),
            bn_gamma: z(l[2]),
            bn_beta: z(l[3]),
            fc1_w: z(l[4]),
            fc1_b: z(l[5]),
            fc2_w: z(l[6]),
            fc2_b: z(l[7]),
        }
    }

    pub fn tensors(&self) -> [&Vec<T>; 8] {
        [
            &self.conv_w,
            &self.conv_b,
            &self.bn_gamma,
            &self.bn_beta,
            &self.fc1_w,
            &self.fc1_b,
            &self.fc2_w,
            &self.fc2_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<T>; 8] {
        let CnnParams {
            conv_w,
            conv_b,
            bn_gamma,
            bn_beta,
            fc1_w,
            fc1_b,
            fc2_w,
            fc2_b,
        } = self;
        [conv_w, conv_b, bn_gamma, bn_beta, fc1_w, fc1_b, fc2_w, fc2_b]
    }

    fn cast<U: Real>(&self) -> CnnParams<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::from(*x).unwrap()).collect();
        CnnParams {
            conv_w: c(&self.conv_w),
            conv_b: c(&self.conv_b),
            bn_gamma: c(&self.bn_gamma),
            bn_beta: c(&self.bn_beta),
            fc1_w: c(&self.fc1_w),
            fc1_b: c(&self.fc1_b),
            fc2_w: c(&self.fc2_w),
            fc2_b: c(&self.fc2_b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Normalize with statistics of the current batch.
    Batch,
    /// Normalize with the stored running statistics.
    Running,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CnnWeights<T> {
    pub arch: CnnArchitecture,
    pub params: CnnParams<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

#[derive(Clone)]
struct BnStats<T> {
    mean: Vec<T>,
    inv_std: Vec<T>,
}

struct Masks {
    pool: Vec<bool>,
    hidden: Vec<bool>,
}

struct Head<T> {
    /// fc1 input after dropout
    pooled: Vec<T>,
    /// fc2 input after dropout
    hidden: Vec<T>,
    logits: [T; 2],
    probs: [T; 2],
}

pub struct BatchGradients<T> {
    pub loss: f64,
    pub grads: CnnParams<T>,
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

fn softmax<T: Real>(z: [T; 2]) -> [T; 2] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

fn cross_entropy<T: Real>(z: [T; 2], label: bool) -> f64 {
    let (a, b) = (z[0].to_f64().unwrap(), z[1].to_f64().unwrap());
    let m = a.max(b);
    let lse = m + ((a - m).exp() + (b - m).exp()).ln();
    lse - if label { b } else { a }
}

/// Symmetric relative difference with an absolute floor.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    if d == 0.0 {
        0.0
    } else {
        d / a.abs().max(b.abs()).max(REL_ERROR_FLOOR)
    }
}

impl<T: Real> CnnWeights<T> {
    pub fn zeros(arch: CnnArchitecture) -> Result<Self> {
        arch.validate()?;
        let f = arch.conv_filters;
        Ok(CnnWeights {
            arch,
            params: CnnParams::zeros(&arch),
            running_mean: vec![T::zero(); f],
            running_var: vec![T::one(); f],
        })
    }

    /// He-normal convolution, Glorot-normal fc1, near-zero fc2 so the
    /// untrained network outputs roughly [0.5, 0.5].
    pub fn init(arch: CnnArchitecture, seed: u64) -> Result<Self> {
        let mut w = Self::zeros(arch)?;
        let mut rng = rng_from_seed(seed);
        let k2 = (arch.conv_size * arch.conv_size) as f64;
        let fill = |v: &mut Vec<T>, std: f64, rng: &mut crate::rng::PipelineRng| {
            let dist = Normal::new(0.0, std).unwrap();
            v.iter_mut().for_each(|x| *x = cast(dist.sample(rng)));
        };
        fill(&mut w.params.conv_w, (2.0 / k2).sqrt(), &mut rng);
        fill(
            &mut w.params.fc1_w,
            (2.0 / (arch.fc_inputs() + arch.fc1_size) as f64).sqrt(),
            &mut rng,
        );
        fill(&mut w.params.fc2_w, 0.01, &mut rng);
        w.params.bn_gamma.iter_mut().for_each(|g| *g = T::one());
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        let lens = self.arch.tensor_lens();
        for ((name, t), want) in PARAM_NAMES.iter().zip(self.params.tensors()).zip(lens) {
            if t.len() != want {
                return Err(Error::Architecture(format!(
                    "{name} has {} values, architecture needs {want}",
                    t.len()
                )));
            }
        }
        let f = self.arch.conv_filters;
        if self.running_mean.len() != f || self.running_var.len() != f {
            return Err(Error::Architecture("running statistics do not match filter count".into()));
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> CnnWeights<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::from(*x).unwrap()).collect();
        CnnWeights {
            arch: self.arch,
            params: self.params.cast(),
            running_mean: c(&self.running_mean),
            running_var: c(&self.running_var),
        }
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.arch.input_len() {
            return Err(Error::Architecture(format!(
                "input has {} values, expected {}x{}",
                x.len(),
                self.arch.input_rows,
                self.arch.input_cols
            )));
        }
        Ok(())
    }

    fn conv_channel(&self, x: &[T], w: &[T], b: T, out: &mut [T]) {
        let k = self.arch.conv_size;
        let cols = self.arch.input_cols;
        let [hc, wc, _] = self.arch.conv_shape();
        out.iter_mut().for_each(|o| *o = b);
        for a in 0..k {
            for bb in 0..k {
                let wv = w[a * k + bb];
                for i in 0..hc {
                    let src = &x[(i + a) * cols + bb..(i + a) * cols + bb + wc];
                    let dst = &mut out[i * wc..(i + 1) * wc];
                    for (o, v) in dst.iter_mut().zip(src) {
                        *o = *o + wv * *v;
                    }
                }
            }
        }
    }

    fn conv_sample(&self, x: &[T]) -> Vec<T> {
        let k2 = self.arch.conv_size * self.arch.conv_size;
        let [hc, wc, nf] = self.arch.conv_shape();
        let plane = hc * wc;
        let mut out = vec![T::zero(); plane * nf];
        for f in 0..nf {
            self.conv_channel(
                x,
                &self.params.conv_w[f * k2..(f + 1) * k2],
                self.params.conv_b[f],
                &mut out[f * plane..(f + 1) * plane],
            );
        }
        out
    }

    fn running_stats(&self) -> BnStats<T> {
        BnStats {
            mean: self.running_mean.clone(),
            inv_std: self.running_var.iter().map(|v| T::one() / (*v + cast(BN_EPSILON)).sqrt()).collect(),
        }
    }

    /// Per-channel mean and biased variance over every sample and position.
    fn batch_stats(&self, convs: &[Vec<T>]) -> (BnStats<T>, Vec<f64>, Vec<f64>) {
        let [hc, wc, nf] = self.arch.conv_shape();
        let plane = hc * wc;
        let n = (plane * convs.len()) as f64;
        let mut means = vec![0.0; nf];
        let mut vars = vec![0.0; nf];
        for f in 0..nf {
            let s: f64 = convs
                .iter()
                .map(|c| c[f * plane..(f + 1) * plane].iter().map(|v| v.to_f64().unwrap()).sum::<f64>())
                .sum();
            let m = s / n;
            let ss: f64 = convs
                .iter()
                .map(|c| {
                    c[f * plane..(f + 1) * plane]
                        .iter()
                        .map(|v| (v.to_f64().unwrap() - m).powi(2))
                        .sum::<f64>()
                })
                .sum();
            means[f] = m;
            vars[f] = ss / n;
        }
        let stats = BnStats {
            mean: means.iter().map(|&m| cast(m)).collect(),
            inv_std: vars.iter().map(|&v| cast(1.0 / (v + BN_EPSILON).sqrt())).collect(),
        };
        (stats, means, vars)
    }

    /// Batch-norm output for one channel, before the ReLU.
    fn normalize_channel(&self, conv_f: &[T], f: usize, stats: &BnStats<T>, out: &mut [T]) {
        let g = self.params.bn_gamma[f] * stats.inv_std[f];
        let (m, b) = (stats.mean[f], self.params.bn_beta[f]);
        for (o, c) in out.iter_mut().zip(conv_f) {
            *o = g * (*c - m) + b;
        }
    }

    /// Max over each pool window of the pre-ReLU map; relu(max) equals
    /// max(relu). Returns the window argmax as a flat offset in the map.
    fn pool_channel(&self, a: &[T], out: &mut [T], argmax: &mut [u32]) {
        let [_, wc, _] = self.arch.conv_shape();
        let [hp, wp, _] = self.arch.pool_shape();
        let p = self.arch.pool_size;
        for i in 0..hp {
            for j in 0..wp {
                let mut best = a[i * wc + j];
                let mut at = i * wc + j;
                for di in 0..p {
                    let row = (i + di) * wc + j;
                    for dj in 0..p {
                        let v = a[row + dj];
                        if v > best {
                            best = v;
                            at = row + dj;
                        }
                    }
                }
                out[i * wp + j] = best.max(T::zero());
                argmax[i * wp + j] = at as u32;
            }
        }
    }

    /// Forward pass above the convolution. When `pattern` names a channel, the
    /// pooling routes of that channel are returned (u32::MAX where the ReLU is
    /// closed), so callers can tell when a perturbation crosses a kink.
    fn head_forward(&self, conv: &[T], stats: &BnStats<T>, masks: Option<&Masks>, pattern: Option<usize>) -> (Head<T>, Vec<u32>) {
        let [hc, wc, nf] = self.arch.conv_shape();
        let [hp, wp, _] = self.arch.pool_shape();
        let (plane, pplane) = (hc * wc, hp * wp);
        let d = self.arch.fc_inputs();
        let keep_scale: T = cast(1.0 / (1.0 - self.arch.dropout_rate));
        let mut pooled = vec![T::zero(); d];
        let mut a = vec![T::zero(); plane];
        let mut argmax = vec![0u32; pplane];
        let mut routes = Vec::new();
        for f in 0..nf {
            self.normalize_channel(&conv[f * plane..(f + 1) * plane], f, stats, &mut a);
            let dst = &mut pooled[f * pplane..(f + 1) * pplane];
            self.pool_channel(&a, dst, &mut argmax);
            if pattern == Some(f) {
                routes = argmax
                    .iter()
                    .zip(dst.iter())
                    .map(|(&r, &v)| if v > T::zero() { r } else { u32::MAX })
                    .collect();
            }
        }
        if let Some(m) = masks {
            for (v, &keep) in pooled.iter_mut().zip(&m.pool) {
                *v = if keep { *v * keep_scale } else { T::zero() };
            }
        }
        let h = self.arch.fc1_size;
        let mut hidden: Vec<T> = (0..h)
            .map(|o| {
                let row = &self.params.fc1_w[o * d..(o + 1) * d];
                self.params.fc1_b[o] + row.iter().zip(&pooled).map(|(w, x)| *w * *x).sum::<T>()
            })
            .collect();
        if let Some(m) = masks {
            for (v, &keep) in hidden.iter_mut().zip(&m.hidden) {
                *v = if keep { *v * keep_scale } else { T::zero() };
            }
        }
        let mut logits = [T::zero(); 2];
        for (c, z) in logits.iter_mut().enumerate() {
            let row = &self.params.fc2_w[c * h..(c + 1) * h];
            *z = self.params.fc2_b[c] + row.iter().zip(&hidden).map(|(w, x)| *w * *x).sum::<T>();
        }
        let probs = softmax(logits);
        (
            Head {
                pooled,
                hidden,
                logits,
                probs,
            },
            routes,
        )
    }

    /// Backpropagates from the logits to the batch-norm output, accumulating
    /// fully-connected gradients. Returns d loss / d (pre-ReLU BN output).
    fn head_backward(
        &self,
        conv: &[T],
        stats: &BnStats<T>,
        masks: Option<&Masks>,
        head: &Head<T>,
        dlogits: [T; 2],
        grads: &mut CnnParams<T>,
    ) -> Vec<T> {
        let [hc, wc, nf] = self.arch.conv_shape();
        let [hp, wp, _] = self.arch.pool_shape();
        let (plane, pplane) = (hc * wc, hp * wp);
        let d = self.arch.fc_inputs();
        let h = self.arch.fc1_size;
        let keep_scale: T = cast(1.0 / (1.0 - self.arch.dropout_rate));

        let mut dhidden = vec![T::zero(); h];
        for c in 0..2 {
            grads.fc2_b[c] = grads.fc2_b[c] + dlogits[c];
            for u in 0..h {
                grads.fc2_w[c * h + u] = grads.fc2_w[c * h + u] + dlogits[c] * head.hidden[u];
                dhidden[u] = dhidden[u] + self.params.fc2_w[c * h + u] * dlogits[c];
            }
        }
        if let Some(m) = masks {
            for (g, &keep) in dhidden.iter_mut().zip(&m.hidden) {
                *g = if keep { *g * keep_scale } else { T::zero() };
            }
        }
        let mut dpooled = vec![T::zero(); d];
        for o in 0..h {
            let g = dhidden[o];
            grads.fc1_b[o] = grads.fc1_b[o] + g;
            if g == T::zero() {
                continue;
            }
            let wrow = &self.params.fc1_w[o * d..(o + 1) * d];
            let grow = &mut grads.fc1_w[o * d..(o + 1) * d];
            for ((gw, x), (dp, w)) in grow.iter_mut().zip(&head.pooled).zip(dpooled.iter_mut().zip(wrow)) {
                *gw = *gw + g * *x;
                *dp = *dp + *w * g;
            }
        }
        if let Some(m) = masks {
            for (g, &keep) in dpooled.iter_mut().zip(&m.pool) {
                *g = if keep { *g * keep_scale } else { T::zero() };
            }
        }

        let mut da = vec![T::zero(); plane * nf];
        let mut a = vec![T::zero(); plane];
        let mut pooled = vec![T::zero(); pplane];
        let mut argmax = vec![0u32; pplane];
        for f in 0..nf {
            self.normalize_channel(&conv[f * plane..(f + 1) * plane], f, stats, &mut a);
            self.pool_channel(&a, &mut pooled, &mut argmax);
            let dst = &mut da[f * plane..(f + 1) * plane];
            for q in 0..pplane {
                if pooled[q] > T::zero() {
                    let at = argmax[q] as usize;
                    dst[at] = dst[at] + dpooled[f * pplane + q];
                }
            }
        }
        da
    }

    fn conv_weight_grad(&self, x: &[T], dc: &[T], f: usize, grads: &mut CnnParams<T>) {
        let k = self.arch.conv_size;
        let cols = self.arch.input_cols;
        let [hc, wc, _] = self.arch.conv_shape();
        grads.conv_b[f] = grads.conv_b[f] + dc.iter().copied().sum::<T>();
        for a in 0..k {
            for bb in 0..k {
                let mut s = T::zero();
                for i in 0..hc {
                    let src = &x[(i + a) * cols + bb..(i + a) * cols + bb + wc];
                    let g = &dc[i * wc..(i + 1) * wc];
                    s = s + src.iter().zip(g).map(|(u, v)| *u * *v).sum::<T>();
                }
                let slot = f * k * k + a * k + bb;
                grads.conv_w[slot] = grads.conv_w[slot] + s;
            }
        }
    }

    fn make_masks(&self, seed: u64) -> Masks {
        let mut rng = rng_from_seed(seed);
        let p = self.arch.dropout_rate;
        Masks {
            pool: (0..self.arch.fc_inputs()).map(|_| rng.gen::<f64>() >= p).collect(),
            hidden: (0..self.arch.fc1_size).map(|_| rng.gen::<f64>() >= p).collect(),
        }
    }

    /// Mean cross-entropy over the batch and its gradient. Dropout is applied
    /// when `dropout_seed` is given.
    pub fn gradients(&self, inputs: &[&[T]], labels: &[bool], mode: BnMode, dropout_seed: Option<u64>) -> Result<BatchGradients<T>> {
        self.validate()?;
        if inputs.is_empty() || inputs.len() != labels.len() {
            return Err(Error::Argument("batch is empty or labels do not match inputs".into()));
        }
        for x in inputs {
            self.check_input(x)?;
        }
        let b = inputs.len();
        let [hc, wc, nf] = self.arch.conv_shape();
        let plane = hc * wc;
        let convs: Vec<Vec<T>> = inputs.par_iter().map(|x| self.conv_sample(x)).collect();
        let (stats, batch_mean, batch_var) = match mode {
            BnMode::Batch => self.batch_stats(&convs),
            BnMode::Running => (self.running_stats(), Vec::new(), Vec::new()),
        };
        let masks: Vec<Option<Masks>> = (0..b)
            .map(|i| {
                dropout_seed
                    .filter(|_| self.arch.dropout_rate > 0.0)
                    .map(|s| self.make_masks(mix(&[s, i as u64])))
            })
            .collect();

        let mut grads = CnnParams::zeros(&self.arch);
        let mut loss = 0.0;
        let inv_b: T = cast(1.0 / b as f64);
        let mut das = Vec::with_capacity(b);
        for i in 0..b {
            let (head, _) = self.head_forward(&convs[i], &stats, masks[i].as_ref(), None);
            loss += cross_entropy(head.logits, labels[i]);
            let target = if labels[i] { [T::zero(), T::one()] } else { [T::one(), T::zero()] };
            let dlogits = [(head.probs[0] - target[0]) * inv_b, (head.probs[1] - target[1]) * inv_b];
            das.push(self.head_backward(&convs[i], &stats, masks[i].as_ref(), &head, dlogits, &mut grads));
        }
        loss /= b as f64;

        // batch-norm parameter gradients
        let mut sum_da = vec![0.0f64; nf];
        let mut sum_da_xhat = vec![0.0f64; nf];
        for (conv, da) in convs.iter().zip(&das) {
            for f in 0..nf {
                let (m, inv) = (stats.mean[f], stats.inv_std[f]);
                for (c, g) in conv[f * plane..(f + 1) * plane].iter().zip(&da[f * plane..(f + 1) * plane]) {
                    let g = g.to_f64().unwrap();
                    sum_da[f] += g;
                    sum_da_xhat[f] += g * ((*c - m) * inv).to_f64().unwrap();
                }
            }
        }
        for f in 0..nf {
            grads.bn_beta[f] = cast(sum_da[f]);
            grads.bn_gamma[f] = cast(sum_da_xhat[f]);
        }

        let n = (plane * b) as f64;
        let mut dc = vec![T::zero(); plane];
        for ((x, conv), da) in inputs.iter().zip(&convs).zip(&das) {
            for f in 0..nf {
                let (m, inv, gamma) = (stats.mean[f], stats.inv_std[f], self.params.bn_gamma[f]);
                let src = &da[f * plane..(f + 1) * plane];
                match mode {
                    BnMode::Running => {
                        for (o, g) in dc.iter_mut().zip(src) {
                            *o = *g * gamma * inv;
                        }
                    }
                    BnMode::Batch => {
                        let mean_dxhat: T = cast(gamma.to_f64().unwrap() * sum_da[f] / n);
                        let mean_dxhat_xhat: T = cast(gamma.to_f64().unwrap() * sum_da_xhat[f] / n);
                        for ((o, g), c) in dc.iter_mut().zip(src).zip(&conv[f * plane..(f + 1) * plane]) {
                            let xhat = (*c - m) * inv;
                            *o = inv * (*g * gamma - mean_dxhat - xhat * mean_dxhat_xhat);
                        }
                    }
                }
                self.conv_weight_grad(x, &dc, f, &mut grads);
            }
        }
        Ok(BatchGradients {
            loss,
            grads,
            batch_mean,
            batch_var,
        })
    }

    /// Inference: running statistics, no dropout. Returns [p(other), p(wheeze)].
    pub fn forward(&self, batch: &[&[T]]) -> Result<Vec<[T; 2]>> {
        self.validate()?;
        for x in batch {
            self.check_input(x)?;
        }
        let stats = self.running_stats();
        Ok(batch
            .par_iter()
            .map(|x| {
                let conv = self.conv_sample(x);
                self.head_forward(&conv, &stats, None, None).0.probs
            })
            .collect())
    }

    pub fn logits(&self, x: &[T]) -> Result<[T; 2]> {
        self.validate()?;
        self.check_input(x)?;
        let conv = self.conv_sample(x);
        Ok(self.head_forward(&conv, &self.running_stats(), None, None).0.logits)
    }

    /// Mean cross-entropy in inference mode.
    pub fn eval_loss(&self, inputs: &[&[T]], labels: &[bool]) -> Result<f64> {
        let probs = self.forward(inputs)?;
        let logits: Vec<[T; 2]> = probs
            .iter()
            .map(|p| [p[0].max(cast(1e-300)).ln(), p[1].max(cast(1e-300)).ln()])
            .collect();
        Ok(logits.iter().zip(labels).map(|(z, &l)| cross_entropy(*z, l)).sum::<f64>() / labels.len().max(1) as f64)
    }
}

/// Inference-mode forward pass; rows are [p(other), p(wheeze)].
pub fn cnn_forward<T: Real>(weights: &CnnWeights<T>, batch: &[&[T]]) -> Result<Vec<[T; 2]>> {
    weights.forward(batch)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 15,
            batch_size: 128,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            val_fraction: 0.10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Argument("epochs and batch size must be at least 1".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Argument(format!(
                "validation fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Argument("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub first_batch_loss: f64,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub batch_size: usize,
}

struct Adam<T> {
    m: CnnParams<T>,
    v: CnnParams<T>,
    step: i32,
}

impl<T: Real> Adam<T> {
    fn new(arch: &CnnArchitecture) -> Self {
        Adam {
            m: CnnParams::zeros(arch),
            v: CnnParams::zeros(arch),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut CnnParams<T>, grads: &CnnParams<T>, cfg: &TrainConfig) {
        self.step += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let lr_t = cfg.learning_rate * (1.0 - b2.powi(self.step)).sqrt() / (1.0 - b1.powi(self.step));
        let (b1t, b2t, lr, eps): (T, T, T, T) = (cast(b1), cast(b2), cast(lr_t), cast(cfg.epsilon));
        let one = T::one();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(ms).zip(vs) {
            for i in 0..p.len() {
                m[i] = b1t * m[i] + (one - b1t) * g[i];
                v[i] = b2t * v[i] + (one - b2t) * g[i] * g[i];
                p[i] = p[i] - lr * m[i] / (v[i].sqrt() + eps);
            }
        }
    }
}

/// Trains with Adam on mini-batches and keeps the weights of the epoch with
/// the lowest held-out loss.
pub fn train_cnn<T: Real>(
    arch: CnnArchitecture,
    inputs: &[Vec<T>],
    labels: &[bool],
    cfg: &TrainConfig,
) -> Result<(CnnWeights<T>, TrainReport)> {
    arch.validate()?;
    cfg.validate()?;
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::EmptyInput("CNN training set is empty or mislabeled".into()));
    }
    for x in inputs {
        if x.len() != arch.input_len() {
            return Err(Error::Architecture(format!(
                "training image has {} values, expected {}",
                x.len(),
                arch.input_len()
            )));
        }
    }
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    order.shuffle(&mut rng_from_seed(mix(&[cfg.seed, 1])));
    let n_val = ((inputs.len() as f64) * cfg.val_fraction).floor() as usize;
    let n_val = if inputs.len() - n_val == 0 { 0 } else { n_val };
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();

    let mut batch_size = cfg.batch_size;
    if batch_size > train_idx.len() {
        log::warn!(
            "batch size {} exceeds the {} training images; clamping",
            batch_size,
            train_idx.len()
        );
        batch_size = train_idx.len();
    }

    let mut weights = CnnWeights::<T>::init(arch, mix(&[cfg.seed, 2]))?;
    let mut adam = Adam::new(&arch);
    let val_inputs: Vec<&[T]> = val_idx.iter().map(|&i| inputs[i].as_slice()).collect();
    let val_labels: Vec<bool> = val_idx.iter().map(|&i| labels[i]).collect();
    let mut best: Option<(f64, CnnWeights<T>, usize)> = None;
    let mut report = TrainReport {
        first_batch_loss: f64::NAN,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        batch_size,
    };
    let momentum = BN_MOMENTUM;

    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut rng_from_seed(mix(&[cfg.seed, 3, epoch as u64])));
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for (bi, chunk) in train_idx.chunks(batch_size).enumerate() {
            let xs: Vec<&[T]> = chunk.iter().map(|&i| inputs[i].as_slice()).collect();
            let ys: Vec<bool> = chunk.iter().map(|&i| labels[i]).collect();
            let drop_seed = mix(&[cfg.seed, 4, epoch as u64, bi as u64]);
            let g = weights.gradients(&xs, &ys, BnMode::Batch, Some(drop_seed))?;
            if report.first_batch_loss.is_nan() {
                report.first_batch_loss = g.loss;
            }
            epoch_loss += g.loss;
            batches += 1;
            adam.update(&mut weights.params, &g.grads, cfg);
            let count = (chunk.len() * arch.conv_shape()[0] * arch.conv_shape()[1]) as f64;
            let unbias = if count > 1.0 { count / (count - 1.0) } else { 1.0 };
            for f in 0..arch.conv_filters {
                let rm = weights.running_mean[f].to_f64().unwrap();
                let rv = weights.running_var[f].to_f64().unwrap();
                weights.running_mean[f] = cast((1.0 - momentum) * rm + momentum * g.batch_mean[f]);
                weights.running_var[f] = cast((1.0 - momentum) * rv + momentum * g.batch_var[f] * unbias);
            }
        }
        let train_loss = epoch_loss / batches as f64;
        report.train_loss.push(train_loss);
        let monitored = if val_inputs.is_empty() {
            train_loss
        } else {
            weights.eval_loss(&val_inputs, &val_labels)?
        };
        report.val_loss.push(monitored);
        log::debug!("epoch {epoch}: train loss {train_loss:.4}, held-out loss {monitored:.4}");
        if best.as_ref().is_none_or(|b| monitored < b.0) {
            best = Some((monitored, weights.clone(), epoch));
        }
    }
    let (_, weights, best_epoch) = best.expect("at least one epoch");
    report.best_epoch = best_epoch;
    Ok((weights, report))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: &'static str,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tensors: Vec<TensorCheck>,
    /// Parameters replaced because the finite-difference step crossed a ReLU
    /// or pooling switch, where the loss is not differentiable.
    pub kinks_skipped: usize,
}

/// Compares backpropagated gradients with central differences on up to
/// `per_tensor` random parameters of every tensor. Dropout is off; batch norm
/// uses `mode`.
pub fn cnn_grad_check(
    weights: &CnnWeights<f64>,
    input: &[f64],
    label: bool,
    mode: BnMode,
    per_tensor: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    weights.validate()?;
    weights.check_input(input)?;
    let analytic = weights.gradients(&[input], &[label], mode, None)?.grads;
    let base_conv = weights.conv_sample(input);
    let [hc, wc, _] = weights.arch.conv_shape();
    let plane = hc * wc;
    let k2 = weights.arch.conv_size * weights.arch.conv_size;

    let [hp, wp, _] = weights.arch.pool_shape();
    let pplane = hp * wp;
    let d = weights.arch.fc_inputs();
    let nh = weights.arch.fc1_size;
    let base_stats = match mode {
        BnMode::Batch => weights.batch_stats(std::slice::from_ref(&base_conv)).0,
        BnMode::Running => weights.running_stats(),
    };
    let base = weights.head_forward(&base_conv, &base_stats, None, None).0;

    // Only the perturbed channel of the pooled map or the perturbed fc1 unit
    // changes, so everything else comes from the unperturbed pass.
    let fc2_loss = |w: &CnnWeights<f64>, hidden: &[f64]| -> f64 {
        let mut logits = [0.0; 2];
        for (c, z) in logits.iter_mut().enumerate() {
            let row = &w.params.fc2_w[c * nh..(c + 1) * nh];
            *z = w.params.fc2_b[c] + row.iter().zip(hidden).map(|(a, b)| a * b).sum::<f64>();
        }
        cross_entropy(logits, label)
    };
    let channel_eval = |w: &CnnWeights<f64>, conv_f: &[f64], f: usize| -> (f64, Vec<u32>) {
        let mut stats = base_stats.clone();
        if mode == BnMode::Batch {
            let m = conv_f.iter().sum::<f64>() / plane as f64;
            let var = conv_f.iter().map(|v| (v - m).powi(2)).sum::<f64>() / plane as f64;
            stats.mean[f] = m;
            stats.inv_std[f] = 1.0 / (var + BN_EPSILON).sqrt();
        }
        let mut a = vec![0.0; plane];
        let mut pooled_f = vec![0.0; pplane];
        let mut argmax = vec![0u32; pplane];
        w.normalize_channel(conv_f, f, &stats, &mut a);
        w.pool_channel(&a, &mut pooled_f, &mut argmax);
        let routes = argmax
            .iter()
            .zip(&pooled_f)
            .map(|(&r, &v)| if v > 0.0 { r } else { u32::MAX })
            .collect();
        let old = &base.pooled[f * pplane..(f + 1) * pplane];
        let hidden: Vec<f64> = (0..nh)
            .map(|o| {
                let row = &w.params.fc1_w[o * d + f * pplane..o * d + (f + 1) * pplane];
                base.hidden[o]
                    + row
                        .iter()
                        .zip(pooled_f.iter().zip(old))
                        .map(|(wv, (n, p))| wv * (n - p))
                        .sum::<f64>()
            })
            .collect();
        (fc2_loss(w, &hidden), routes)
    };
    let fc_eval = |w: &CnnWeights<f64>, unit: Option<usize>| -> f64 {
        let mut hidden = base.hidden.clone();
        if let Some(o) = unit {
            let row = &w.params.fc1_w[o * d..(o + 1) * d];
            hidden[o] = w.params.fc1_b[o] + row.iter().zip(&base.pooled).map(|(a, b)| a * b).sum::<f64>();
        }
        fc2_loss(w, &hidden)
    };

    let mut work = weights.clone();
    let mut conv_f = vec![0.0; plane];
    let mut rng = rng_from_seed(seed);
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        tensors: Vec::new(),
        kinks_skipped: 0,
    };
    let h = GRAD_CHECK_STEP;
    for t in 0..8 {
        let len = analytic.tensors()[t].len();
        let mut candidates: Vec<usize> = (0..len).collect();
        candidates.shuffle(&mut rng);
        let mut check = TensorCheck {
            name: PARAM_NAMES[t],
            checked: 0,
            max_rel_error: 0.0,
        };
        for idx in candidates {
            if check.checked >= per_tensor {
                break;
            }
            // channel whose activations this parameter touches
            let channel = match t {
                0 => Some(idx / k2),
                1..=3 => Some(idx),
                _ => None,
            };
            let unit = match t {
                4 => Some(idx / d),
                5 => Some(idx),
                _ => None,
            };
            let original = work.params.tensors()[t][idx];
            let mut eval_at = |value: f64, work: &mut CnnWeights<f64>| -> (f64, Vec<u32>) {
                work.params.tensors_mut()[t][idx] = value;
                let out = match channel {
                    Some(f) => {
                        if t <= 1 {
                            let w = work.params.conv_w[f * k2..(f + 1) * k2].to_vec();
                            work.conv_channel(input, &w, work.params.conv_b[f], &mut conv_f);
                        } else {
                            conv_f.copy_from_slice(&base_conv[f * plane..(f + 1) * plane]);
                        }
                        channel_eval(work, &conv_f, f)
                    }
                    None => (fc_eval(work, unit), Vec::new()),
                };
                work.params.tensors_mut()[t][idx] = original;
                out
            };
            let (_, base_routes) = eval_at(original, &mut work);
            let (up, up_routes) = eval_at(original + h, &mut work);
            let (down, down_routes) = eval_at(original - h, &mut work);
            if up_routes != base_routes || down_routes != base_routes {
                report.kinks_skipped += 1;
                continue;
            }
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(analytic.tensors()[t][idx], numeric);
            check.max_rel_error = check.max_rel_error.max(err);
            check.checked += 1;
        }
        report.max_rel_error = report.max_rel_error.max(check.max_rel_error);
        report.tensors.push(check);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> CnnArchitecture {
        CnnArchitecture {
            conv_size: 3,
            conv_filters: 4,
            pool_size: 2,
            fc1_size: 5,
            dropout_rate: 0.5,
            input_rows: 10,
            input_cols: 8,
        }
    }

    fn random_image(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..len).map(|_| rng.gen::<f64>()).collect()
    }

    fn perturbed(arch: CnnArchitecture, seed: u64) -> CnnWeights<f64> {
        let mut w = CnnWeights::<f64>::init(arch, seed).unwrap();
        let mut rng = rng_from_seed(seed ^ 0xff);
        for v in w.params.conv_b.iter_mut().chain(w.params.bn_beta.iter_mut()) {
            *v = rng.gen_range(-0.3..0.3);
        }
        for v in w.params.bn_gamma.iter_mut() {
            *v = rng.gen_range(0.5..1.5);
        }
        for v in w.params.fc2_w.iter_mut() {
            *v = rng.gen_range(-0.5..0.5);
        }
        for v in w.params.fc1_b.iter_mut().chain(w.params.fc2_b.iter_mut()) {
            *v = rng.gen_range(-0.1..0.1);
        }
        for (m, v) in w.running_mean.iter_mut().zip(w.running_var.iter_mut()) {
            *m = rng.gen_range(-0.2..0.2);
            *v = rng.gen_range(0.5..2.0);
        }
        w
    }

    #[test]
    fn fd_and_vd_shapes() {
        let fd = CnnArchitecture::fd_best();
        assert_eq!(fd.conv_shape(), [251, 53, 64]);
        assert_eq!(fd.pool_shape(), [250, 52, 64]);
        let vd = CnnArchitecture::vd_best();
        assert_eq!(vd.conv_shape(), [253, 55, 32]);
        assert_eq!(vd.pool_shape(), [250, 52, 32]);
        assert_eq!(CnnArchitecture::search_grid().len(), 24);
        assert!(CnnArchitecture::search_grid().contains(&fd));
        assert!(CnnArchitecture::search_grid().contains(&vd));
    }

    #[test]
    fn zero_weights_give_uniform_output() {
        let w = CnnWeights::<f64>::zeros(tiny()).unwrap();
        let x = random_image(80, 1);
        let p = cnn_forward(&w, &[&x]).unwrap();
        assert_eq!(p[0], [0.5, 0.5]);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let w = perturbed(tiny(), 2);
        let xs: Vec<Vec<f64>> = (0..5).map(|s| random_image(80, s)).collect();
        let refs: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        for p in cnn_forward(&w, &refs).unwrap() {
            assert!((p[0] + p[1] - 1.0).abs() < 1e-12);
        }
        let w32 = w.cast::<f32>();
        let xs32: Vec<Vec<f32>> = xs.iter().map(|v| v.iter().map(|&a| a as f32).collect()).collect();
        let refs32: Vec<&[f32]> = xs32.iter().map(|v| v.as_slice()).collect();
        for p in cnn_forward(&w32, &refs32).unwrap() {
            assert!((p[0] + p[1] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let a = softmax([0.3f64, -1.2]);
        let b = softmax([100.3f64, 98.8]);
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch_is_an_architecture_error() {
        let w = CnnWeights::<f64>::zeros(tiny()).unwrap();
        let x = vec![0.0; 79];
        assert!(matches!(cnn_forward(&w, &[&x]), Err(Error::Architecture(_))));
        let mut broken = w.clone();
        broken.params.fc1_w.pop();
        assert!(matches!(cnn_forward(&broken, &[&vec![0.0; 80]]), Err(Error::Architecture(_))));
        assert!(CnnArchitecture { conv_size: 11, ..tiny() }.validate().is_err());
    }

    #[test]
    fn gradients_match_finite_differences_in_both_bn_modes() {
        let w = perturbed(tiny(), 3);
        let x = random_image(80, 4);
        for mode in [BnMode::Running, BnMode::Batch] {
            let r = cnn_grad_check(&w, &x, true, mode, 200, 5).unwrap();
            assert!(r.max_rel_error < 1e-4, "{mode:?}: {r:?}");
            assert!(r.tensors.iter().all(|t| t.checked > 0));
        }
    }

    #[test]
    fn batch_gradients_match_finite_differences() {
        // several samples share batch statistics
        let arch = tiny();
        let w = perturbed(arch, 6);
        let xs: Vec<Vec<f64>> = (0..3).map(|s| random_image(80, 10 + s)).collect();
        let refs: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let labels = [true, false, true];
        let g = w.gradients(&refs, &labels, BnMode::Batch, None).unwrap();
        let loss = |w: &CnnWeights<f64>| w.gradients(&refs, &labels, BnMode::Batch, None).unwrap().loss;
        let mut checked = 0;
        for t in 0..8 {
            for idx in [0, 1, 7] {
                if idx >= g.grads.tensors()[t].len() {
                    continue;
                }
                let mut wp = w.clone();
                wp.params.tensors_mut()[t][idx] += 1e-6;
                let mut wm = w.clone();
                wm.params.tensors_mut()[t][idx] -= 1e-6;
                let numeric = (loss(&wp) - loss(&wm)) / 2e-6;
                let err = relative_error(g.grads.tensors()[t][idx], numeric);
                assert!(err < 1e-4, "{} {idx}: {} vs {numeric}", PARAM_NAMES[t], g.grads.tensors()[t][idx]);
                checked += 1;
            }
        }
        assert!(checked > 15);
    }

    #[test]
    fn dead_input_gives_zero_conv_weight_gradients() {
        let w = perturbed(tiny(), 7);
        let x = vec![0.0; 80];
        let g = w.gradients(&[&x], &[true], BnMode::Running, None).unwrap().grads;
        assert!(g.conv_w.iter().all(|&v| v == 0.0));
        assert!(g.conv_b.iter().any(|&v| v != 0.0));
    }

    #[test]
    fn relative_error_is_symmetric() {
        for (a, b) in [(1.0, 1.1), (-3e-3, 2e-3), (0.0, 1e-9), (5.0, 5.0)] {
            assert_eq!(relative_error(a, b), relative_error(b, a));
        }
        assert_eq!(relative_error(2.0, 2.0), 0.0);
    }

    fn toy_set(n: usize, arch: &CnnArchitecture, seed: u64) -> (Vec<Vec<f32>>, Vec<bool>) {
        let mut rng = rng_from_seed(seed);
        (0..n)
            .map(|i| {
                let pos = i % 2 == 0;
                let img: Vec<f32> = (0..arch.input_len())
                    .map(|p| {
                        // wheeze-like images carry a horizontal ridge
                        let ridge = if pos && p / arch.input_cols == arch.input_rows / 2 {
                            0.8
                        } else {
                            0.0
                        };
                        ridge + 0.2 * rng.gen::<f32>()
                    })
                    .collect();
                (img, pos)
            })
            .unzip()
    }

    #[test]
    fn learns_a_toy_problem() {
        let arch = CnnArchitecture {
            dropout_rate: 0.5,
            ..tiny()
        };
        let (x, y) = toy_set(200, &arch, 11);
        let cfg = TrainConfig {
            learning_rate: 1e-2,
            batch_size: 32,
            seed: 5,
            ..TrainConfig::default()
        };
        let (w, report) = train_cnn(arch, &x, &y, &cfg).unwrap();
        assert!((report.first_batch_loss - 2f64.ln()).abs() < 0.05, "{}", report.first_batch_loss);
        let refs: Vec<&[f32]> = x.iter().map(|v| v.as_slice()).collect();
        let probs = cnn_forward(&w, &refs).unwrap();
        let acc = probs.iter().zip(&y).filter(|(p, &l)| (p[1] > p[0]) == l).count() as f64 / 200.0;
        assert!(acc >= 0.95, "{acc}");
    }

    #[test]
    fn training_is_deterministic() {
        let arch = tiny();
        let (x, y) = toy_set(40, &arch, 12);
        let cfg = TrainConfig {
            max_epochs: 2,
            batch_size: 16,
            seed: 9,
            ..TrainConfig::default()
        };
        let (a, _) = train_cnn(arch, &x, &y, &cfg).unwrap();
        let (b, _) = train_cnn(arch, &x, &y, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_batch_is_clamped() {
        let arch = tiny();
        let (x, y) = toy_set(20, &arch, 13);
        let cfg = TrainConfig {
            max_epochs: 1,
            ..TrainConfig::default()
        };
        let (_, report) = train_cnn(arch, &x, &y, &cfg).unwrap();
        assert_eq!(report.batch_size, 18);
    }
}
