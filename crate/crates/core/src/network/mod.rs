//! The shared-parameter stream.
//!
//! One stream maps a `(3, H, W)` image through `N` blocks of
//! `3x3 conv -> ReLU -> 2x2 average pool`, a global average pool, a ReLU
//! fully-connected embedding layer (`fc7`, 256 wide by default) and two heads
//! reading that embedding: `fc8_1` (class logits, or one regression output)
//! and `fc8_2` (a scalar rank score). A pair is two calls of the same stream
//! with the same parameters, so gradients from both members add up in one
//! parameter buffer.
//!
//! All parameters live in one flat buffer; [`ParamGroup`] records the name,
//! shape and offset of each tensor inside it.

mod backprop;
pub mod checkpoint;
mod gradcheck;
pub(crate) mod ops;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, tags};
use crate::tensor::Tensor;

pub use backprop::{backward, evaluate_loss, Batch, LossSpec, PairSample, SingleSample, Target};
pub use gradcheck::{grad_check, GradCheckReport, GradCheckSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadKind {
    /// `fc8_1` emits two class logits.
    Classifier,
    /// `fc8_1` emits one real-valued prediction.
    Regressor,
}

impl HeadKind {
    pub fn width(self) -> usize {
        match self {
            HeadKind::Classifier => 2,
            HeadKind::Regressor => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub in_channels: usize,
    pub height: usize,
    pub width: usize,
    pub conv_channels: Vec<usize>,
    pub embed_dim: usize,
    pub head: HeadKind,
}

impl Default for ArchConfig {
    fn default() -> Self {
        ArchConfig {
            in_channels: 3,
            height: 64,
            width: 64,
            conv_channels: vec![8, 16, 32, 64],
            embed_dim: 256,
            head: HeadKind::Classifier,
        }
    }
}

impl ArchConfig {
    pub fn with_input(height: usize, width: usize) -> Self {
        ArchConfig {
            height,
            width,
            ..ArchConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.in_channels == 0 || self.embed_dim == 0 {
            return bad("in_channels and embed_dim must be positive".into());
        }
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) {
            return bad(format!("invalid conv channels {:?}", self.conv_channels));
        }
        let factor = 1usize << self.conv_channels.len();
        if self.height == 0 || self.width == 0 || self.height % factor != 0 || self.width % factor != 0 {
            return bad(format!(
                "input {}x{} is not divisible by {factor} ({} pooling stages)",
                self.height,
                self.width,
                self.conv_channels.len()
            ));
        }
        Ok(())
    }

    pub fn input_shape(&self) -> [usize; 3] {
        [self.in_channels, self.height, self.width]
    }

    /// Spatial size `(h, w)` entering block `b`.
    pub(crate) fn block_input_hw(&self, b: usize) -> (usize, usize) {
        (self.height >> b, self.width >> b)
    }

    pub(crate) fn block_in_channels(&self, b: usize) -> usize {
        if b == 0 {
            self.in_channels
        } else {
            self.conv_channels[b - 1]
        }
    }

    pub fn last_channels(&self) -> usize {
        *self.conv_channels.last().expect("validated non-empty")
    }

    /// Parameter tensors in buffer order.
    pub fn layout(&self) -> Vec<ParamGroup> {
        let mut shapes: Vec<(String, Vec<usize>)> = Vec::new();
        for (b, &out) in self.conv_channels.iter().enumerate() {
            let inp = self.block_in_channels(b);
            shapes.push((format!("conv{}.weight", b + 1), vec![out, inp, 3, 3]));
            shapes.push((format!("conv{}.bias", b + 1), vec![out]));
        }
        let e = self.embed_dim;
        shapes.push(("fc7.weight".into(), vec![e, self.last_channels()]));
        shapes.push(("fc7.bias".into(), vec![e]));
        shapes.push(("fc8_1.weight".into(), vec![self.head.width(), e]));
        shapes.push(("fc8_1.bias".into(), vec![self.head.width()]));
        shapes.push(("fc8_2.weight".into(), vec![1, e]));
        shapes.push(("fc8_2.bias".into(), vec![1]));
        let mut offset = 0;
        shapes
            .into_iter()
            .map(|(name, shape)| {
                let len = shape.iter().product();
                let g = ParamGroup {
                    name,
                    shape,
                    offset,
                    len,
                };
                offset += len;
                g
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

impl ParamGroup {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len
    }

    fn fan_in(&self) -> usize {
        self.shape[1..].iter().product()
    }

    fn is_bias(&self) -> bool {
        self.shape.len() == 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Init {
    /// Gaussian weights scaled by fan-in (He for ReLU layers, LeCun for the
    /// heads), zero biases.
    FanIn,
    Zero,
}

/// All learnable weights of one stream, or a gradient with the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    arch: ArchConfig,
    groups: Vec<ParamGroup>,
    values: Vec<f64>,
}

/// Gradients share the parameter layout.
pub type Gradients = NetParams;

impl NetParams {
    pub fn zeros(arch: &ArchConfig) -> Result<Self> {
        arch.validate()?;
        let groups = arch.layout();
        let n = groups.last().map(|g| g.offset + g.len).unwrap_or(0);
        Ok(NetParams {
            arch: arch.clone(),
            groups,
            values: vec![0.0; n],
        })
    }

    pub fn from_values(arch: &ArchConfig, values: Vec<f64>) -> Result<Self> {
        let mut p = NetParams::zeros(arch)?;
        if values.len() != p.values.len() {
            return Err(Error::Shape {
                expected: vec![p.values.len()],
                got: vec![values.len()],
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("parameter buffer".into()));
        }
        p.values = values;
        Ok(p)
    }

    pub fn arch(&self) -> &ArchConfig {
        &self.arch
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn group(&self, name: &str) -> Option<&ParamGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Values of the named tensor; panics on an unknown name.
    pub fn get(&self, name: &str) -> &[f64] {
        let g = self.group(name).unwrap_or_else(|| panic!("no parameter group {name}"));
        &self.values[g.range()]
    }

    pub fn get_mut(&mut self, name: &str) -> &mut [f64] {
        let r = self
            .group(name)
            .unwrap_or_else(|| panic!("no parameter group {name}"))
            .range();
        &mut self.values[r]
    }

    pub(crate) fn conv_weight(&self, b: usize) -> &[f64] {
        &self.values[self.groups[2 * b].range()]
    }

    pub(crate) fn conv_bias(&self, b: usize) -> &[f64] {
        &self.values[self.groups[2 * b + 1].range()]
    }

    /// Head tensors in order fc7.w, fc7.b, fc8_1.w, fc8_1.b, fc8_2.w, fc8_2.b.
    pub(crate) fn head(&self, i: usize) -> &[f64] {
        let base = 2 * self.arch.conv_channels.len();
        &self.values[self.groups[base + i].range()]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &NetParams) {
        assert_eq!(self.values.len(), other.values.len(), "layout mismatch");
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for v in &mut self.values {
            *v *= alpha;
        }
    }

    pub fn max_abs_diff(&self, other: &NetParams) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn init_params(arch: &ArchConfig, init: Init, seed: u64) -> Result<NetParams> {
    let mut params = NetParams::zeros(arch)?;
    if init == Init::Zero {
        return Ok(params);
    }
    let groups = params.groups.clone();
    let n_heads = 2;
    for (gi, g) in groups.iter().enumerate() {
        if g.is_bias() {
            continue;
        }
        let is_head = gi >= groups.len() - 2 * n_heads;
        let gain = if is_head { 1.0 } else { 2.0 };
        let std = (gain / g.fan_in() as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let mut rng = seed::stream(seed, tags::INIT, gi as u64);
        for v in &mut params.values[g.range()] {
            *v = normal.sample(&mut rng);
        }
    }
    Ok(params)
}

/// Per-image outputs of one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutput {
    /// `fc8_1`: two class logits, or one regression value.
    pub logits: Vec<f64>,
    /// `fc8_2`.
    pub rank_score: f64,
    /// Post-ReLU `fc7` activation.
    pub embedding: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureLayer {
    /// The `fc7` embedding (`embed_dim` values).
    Embedding,
    /// Spatial mean of the output of conv block `k` (0-based), `conv_channels[k]` values.
    Block(usize),
}

impl FeatureLayer {
    pub fn dim(&self, arch: &ArchConfig) -> usize {
        match *self {
            FeatureLayer::Embedding => arch.embed_dim,
            FeatureLayer::Block(k) => arch.conv_channels[k],
        }
    }
}

impl std::str::FromStr for FeatureLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "embedding" {
            return Ok(FeatureLayer::Embedding);
        }
        s.strip_prefix("block")
            .and_then(|k| k.parse::<usize>().ok())
            .filter(|&k| k >= 1)
            .map(|k| FeatureLayer::Block(k - 1))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown feature layer `{s}` (expected embedding or blockN)")))
    }
}

impl std::fmt::Display for FeatureLayer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FeatureLayer::Embedding => f.write_str("embedding"),
            FeatureLayer::Block(k) => write!(f, "block{}", k + 1),
        }
    }
}

fn check_input(params: &NetParams, image: &Tensor) -> Result<()> {
    let expected = params.arch.input_shape();
    if image.shape() != expected {
        return Err(Error::Shape {
            expected: expected.to_vec(),
            got: image.shape().to_vec(),
        });
    }
    Ok(())
}

pub fn forward(params: &NetParams, image: &Tensor) -> Result<StreamOutput> {
    check_input(params, image)?;
    let trace = backprop::Trace::run(params, image.data(), false);
    let out = trace.output();
    if !(out.logits.iter().all(|v| v.is_finite()) && out.rank_score.is_finite()) {
        return Err(Error::NonFinite("stream output".into()));
    }
    Ok(out)
}

/// Runs the shared stream on both members; each output equals a standalone
/// [`forward`] call bit for bit.
pub fn forward_pair(params: &NetParams, pair: (&Tensor, &Tensor)) -> Result<(StreamOutput, StreamOutput)> {
    Ok((forward(params, pair.0)?, forward(params, pair.1)?))
}

pub fn extract_features(params: &NetParams, image: &Tensor, layer: FeatureLayer) -> Result<Vec<f64>> {
    check_input(params, image)?;
    if let FeatureLayer::Block(k) = layer {
        if k >= params.arch.conv_channels.len() {
            return Err(Error::InvalidArgument(format!(
                "network has {} conv blocks, no block{}",
                params.arch.conv_channels.len(),
                k + 1
            )));
        }
    }
    let trace = backprop::Trace::run(params, image.data(), false);
    Ok(trace.features(layer))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(arch: &ArchConfig, salt: f64) -> Tensor {
        let n = arch.in_channels * arch.height * arch.width;
        let data = (0..n).map(|i| (i as f64 * 0.754_877_666 + salt).fract()).collect();
        Tensor::new(arch.input_shape().to_vec(), data).unwrap()
    }

    /// Straightforward loop-nest reimplementation of the stream.
    fn reference_forward(p: &NetParams, img: &Tensor) -> StreamOutput {
        let arch = p.arch();
        let (mut h, mut w) = (arch.height, arch.width);
        let mut c = arch.in_channels;
        let mut x = img.data().to_vec();
        for (b, &oc) in arch.conv_channels.iter().enumerate() {
            let wts = p.get(&format!("conv{}.weight", b + 1));
            let bias = p.get(&format!("conv{}.bias", b + 1));
            let mut y = vec![0.0; oc * h * w];
            for o in 0..oc {
                for i in 0..h {
                    for j in 0..w {
                        let mut acc = bias[o];
                        for ci in 0..c {
                            for ky in 0..3 {
                                for kx in 0..3 {
                                    let (si, sj) = (i as isize + ky - 1, j as isize + kx - 1);
                                    if si >= 0 && sj >= 0 && (si as usize) < h && (sj as usize) < w {
                                        acc += wts[((o * c + ci) * 3 + ky as usize) * 3 + kx as usize]
                                            * x[(ci * h + si as usize) * w + sj as usize];
                                    }
                                }
                            }
                        }
                        y[(o * h + i) * w + j] = acc.max(0.0);
                    }
                }
            }
            let (oh, ow) = (h / 2, w / 2);
            let mut pooled = vec![0.0; oc * oh * ow];
            for o in 0..oc {
                for i in 0..oh {
                    for j in 0..ow {
                        let at = |a: usize, b: usize| y[(o * h + a) * w + b];
                        pooled[(o * oh + i) * ow + j] =
                            (at(2 * i, 2 * j) + at(2 * i, 2 * j + 1) + at(2 * i + 1, 2 * j) + at(2 * i + 1, 2 * j + 1)) / 4.0;
                    }
                }
            }
            x = pooled;
            c = oc;
            h = oh;
            w = ow;
        }
        let gap: Vec<f64> = (0..c).map(|ci| x[ci * h * w..(ci + 1) * h * w].iter().sum::<f64>() / (h * w) as f64).collect();
        let affine = |wname: &str, bname: &str, v: &[f64]| -> Vec<f64> {
            let wts = p.get(wname);
            let bias = p.get(bname);
            bias.iter()
                .enumerate()
                .map(|(o, b)| b + v.iter().enumerate().map(|(i, x)| wts[o * v.len() + i] * x).sum::<f64>())
                .collect()
        };
        let embedding: Vec<f64> = affine("fc7.weight", "fc7.bias", &gap).into_iter().map(|v| v.max(0.0)).collect();
        StreamOutput {
            logits: affine("fc8_1.weight", "fc8_1.bias", &embedding),
            rank_score: affine("fc8_2.weight", "fc8_2.bias", &embedding)[0],
            embedding,
        }
    }

    #[test]
    fn default_shape_chain_ends_at_256() {
        let arch = ArchConfig::default();
        arch.validate().unwrap();
        let hw: Vec<_> = (0..=4).map(|b| arch.block_input_hw(b)).collect();
        assert_eq!(hw, vec![(64, 64), (32, 32), (16, 16), (8, 8), (4, 4)]);
        let p = init_params(&arch, Init::FanIn, 0).unwrap();
        let shapes: Vec<Vec<usize>> = p.groups().iter().map(|g| g.shape.clone()).collect();
        assert_eq!(shapes[0], vec![8, 3, 3, 3]);
        assert_eq!(shapes[6], vec![64, 32, 3, 3]);
        assert_eq!(p.group("fc7.weight").unwrap().shape, vec![256, 64]);
        assert_eq!(p.group("fc8_1.weight").unwrap().shape, vec![2, 256]);
        assert_eq!(p.group("fc8_2.weight").unwrap().shape, vec![1, 256]);
        let out = forward(&p, &image(&arch, 0.1)).unwrap();
        assert_eq!((out.logits.len(), out.embedding.len()), (2, 256));
    }

    #[test]
    fn inconsistent_architectures_are_rejected() {
        assert!(ArchConfig::with_input(60, 64).validate().is_err());
        let mut arch = ArchConfig::default();
        arch.conv_channels = vec![];
        assert!(init_params(&arch, Init::FanIn, 0).is_err());
    }

    #[test]
    fn init_is_seeded() {
        let arch = ArchConfig::with_input(16, 16);
        let a = init_params(&arch, Init::FanIn, 3).unwrap();
        let b = init_params(&arch, Init::FanIn, 3).unwrap();
        let c = init_params(&arch, Init::FanIn, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn zero_weights_give_bias_only_outputs() {
        let arch = ArchConfig::with_input(16, 16);
        let mut p = init_params(&arch, Init::Zero, 0).unwrap();
        p.get_mut("fc8_1.bias").copy_from_slice(&[0.25, -1.5]);
        p.get_mut("fc8_2.bias")[0] = 0.7;
        p.get_mut("fc7.bias")[3] = 2.0;
        p.get_mut("fc7.bias")[4] = -2.0;
        for img in [Tensor::zeros(vec![3, 16, 16]), image(&arch, 0.4)] {
            let out = forward(&p, &img).unwrap();
            assert_eq!(out.logits, vec![0.25, -1.5]);
            assert_eq!(out.rank_score, 0.7);
            let mut expect = vec![0.0; 256];
            expect[3] = 2.0;
            assert_eq!(out.embedding, expect);
            assert_eq!(extract_features(&p, &img, FeatureLayer::Embedding).unwrap(), expect);
        }
    }

    #[test]
    fn matches_loop_nest_reference() {
        for (h, seed) in [(16, 1), (32, 2)] {
            let arch = ArchConfig::with_input(h, h);
            let p = init_params(&arch, Init::FanIn, seed).unwrap();
            let img = image(&arch, 0.37);
            let fast = forward(&p, &img).unwrap();
            let slow = reference_forward(&p, &img);
            for (a, b) in fast.logits.iter().zip(&slow.logits) {
                assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
            }
            assert!((fast.rank_score - slow.rank_score).abs() < 1e-10 * (1.0 + slow.rank_score.abs()));
            for (a, b) in fast.embedding.iter().zip(&slow.embedding) {
                assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn pair_forward_shares_weights_exactly() {
        let arch = ArchConfig::with_input(16, 16);
        let p = init_params(&arch, Init::FanIn, 5).unwrap();
        let (a, b) = (image(&arch, 0.1), image(&arch, 0.6));
        let (oa, ob) = forward_pair(&p, (&a, &b)).unwrap();
        assert_eq!(oa, forward(&p, &a).unwrap());
        assert_eq!(ob, forward(&p, &b).unwrap());
        let (sa, sb) = forward_pair(&p, (&b, &a)).unwrap();
        assert_eq!((sa, sb), (ob.clone(), oa.clone()));
        let (x, y) = forward_pair(&p, (&a, &a)).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn forward_rejects_wrong_shape() {
        let arch = ArchConfig::with_input(16, 16);
        let p = init_params(&arch, Init::FanIn, 0).unwrap();
        assert!(matches!(forward(&p, &Tensor::zeros(vec![3, 8, 8])), Err(Error::Shape { .. })));
    }

    #[test]
    fn block_features_have_documented_dimension() {
        let arch = ArchConfig::with_input(16, 16);
        let p = init_params(&arch, Init::FanIn, 0).unwrap();
        let img = image(&arch, 0.2);
        for k in 0..4 {
            let f = extract_features(&p, &img, FeatureLayer::Block(k)).unwrap();
            assert_eq!(f.len(), arch.conv_channels[k]);
        }
        assert!(extract_features(&p, &img, FeatureLayer::Block(4)).is_err());
        assert_eq!("block3".parse::<FeatureLayer>().unwrap(), FeatureLayer::Block(2));
        assert_eq!(FeatureLayer::Block(2).to_string(), "block3");
    }
}
