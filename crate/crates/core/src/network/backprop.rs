//! Forward traces, batch losses and reverse-mode gradients.

use serde::{Deserialize, Serialize};

use super::ops::{avg_pool2, avg_pool2_backward, col2im3x3, gemm, im2col3x3};
use super::{check_input, FeatureLayer, HeadKind, NetParams, StreamOutput};
use crate::error::{Error, Result};
use crate::losses::{self, LossValue};
use crate::tensor::Tensor;

/// Objective evaluated on a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LossSpec {
    /// Pairs `(sunrise, sunset)`: `ce(R) + ce(S) + lambda * ranking(R, S)`.
    Combined { lambda: f64 },
    /// Pairs: contrastive loss on the embeddings.
    Contrast { margin: f64 },
    /// Pairs: `ce(a) + ce(b) + lambda * contrast(a, b)`.
    SoftmaxContrast { lambda: f64, margin: f64 },
    /// Single images: cross-entropy.
    SoftmaxOnly,
    /// Single images: square loss on the regression output.
    Square,
    /// Pairs: `sq(a) + sq(b) + lambda * ranking`, ranked by target order.
    SquareRanking { lambda: f64 },
}

impl LossSpec {
    pub fn uses_pairs(&self) -> bool {
        !matches!(self, LossSpec::SoftmaxOnly | LossSpec::Square)
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossSpec::Combined { .. } => "combined",
            LossSpec::Contrast { .. } => "contrast",
            LossSpec::SoftmaxContrast { .. } => "softmax-contrast",
            LossSpec::SoftmaxOnly => "softmax",
            LossSpec::Square => "square",
            LossSpec::SquareRanking { .. } => "square-ranking",
        }
    }

    fn required_head(&self) -> Option<HeadKind> {
        match self {
            LossSpec::Combined { .. } | LossSpec::SoftmaxContrast { .. } | LossSpec::SoftmaxOnly => {
                Some(HeadKind::Classifier)
            }
            LossSpec::Square | LossSpec::SquareRanking { .. } => Some(HeadKind::Regressor),
            LossSpec::Contrast { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")))
            }
        };
        match *self {
            LossSpec::Combined { lambda } | LossSpec::SquareRanking { lambda } => check("lambda", lambda),
            LossSpec::Contrast { margin } => check("margin", margin),
            LossSpec::SoftmaxContrast { lambda, margin } => {
                check("lambda", lambda)?;
                check("margin", margin)
            }
            LossSpec::SoftmaxOnly | LossSpec::Square => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Class(usize),
    Value(f64),
}

impl Target {
    fn class(self) -> Result<usize> {
        match self {
            Target::Class(c) => Ok(c),
            Target::Value(_) => Err(Error::InvalidArgument("loss needs class targets".into())),
        }
    }

    fn value(self) -> Result<f64> {
        match self {
            Target::Value(v) => Ok(v),
            Target::Class(_) => Err(Error::InvalidArgument("loss needs real-valued targets".into())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PairSample<'a> {
    pub a: &'a Tensor,
    pub b: &'a Tensor,
    pub target_a: Target,
    pub target_b: Target,
}

#[derive(Debug, Clone, Copy)]
pub struct SingleSample<'a> {
    pub x: &'a Tensor,
    pub target: Target,
}

#[derive(Debug, Clone)]
pub enum Batch<'a> {
    Pairs(Vec<PairSample<'a>>),
    Singles(Vec<SingleSample<'a>>),
}

impl Batch<'_> {
    pub fn len(&self) -> usize {
        match self {
            Batch::Pairs(p) => p.len(),
            Batch::Singles(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) struct BlockTrace {
    cols: Vec<f64>,
    pre: Vec<f64>,
    out: Vec<f64>,
    c_in: usize,
    c_out: usize,
    h: usize,
    w: usize,
}

pub(crate) struct Trace {
    blocks: Vec<BlockTrace>,
    gap: Vec<f64>,
    fc7_pre: Vec<f64>,
    embedding: Vec<f64>,
    logits: Vec<f64>,
    score: f64,
}

fn affine(weights: &[f64], bias: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    bias.iter()
        .enumerate()
        .map(|(o, &b)| b + weights[o * n..(o + 1) * n].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect()
}

impl Trace {
    /// Runs the stream on a planar input. With `keep_cols` false the im2col
    /// buffers are dropped after use.
    pub(crate) fn run(params: &NetParams, input: &[f64], keep_cols: bool) -> Trace {
        let arch = params.arch();
        let mut blocks = Vec::with_capacity(arch.conv_channels.len());
        let mut x: Vec<f64> = input.to_vec();
        for (b, &c_out) in arch.conv_channels.iter().enumerate() {
            let c_in = arch.block_in_channels(b);
            let (h, w) = arch.block_input_hw(b);
            let hw = h * w;
            let mut cols = vec![0.0; c_in * 9 * hw];
            im2col3x3(&x, c_in, h, w, &mut cols);
            let mut pre = vec![0.0; c_out * hw];
            for (o, &bias) in params.conv_bias(b).iter().enumerate() {
                pre[o * hw..(o + 1) * hw].fill(bias);
            }
            gemm(c_out, c_in * 9, hw, params.conv_weight(b), false, &cols, false, 1.0, &mut pre);
            let act: Vec<f64> = pre.iter().map(|&v| v.max(0.0)).collect();
            let mut out = vec![0.0; c_out * hw / 4];
            avg_pool2(&act, c_out, h, w, &mut out);
            if !keep_cols {
                cols = Vec::new();
            }
            x = out.clone();
            blocks.push(BlockTrace {
                cols,
                pre,
                out,
                c_in,
                c_out,
                h,
                w,
            });
        }
        let last = blocks.last().expect("at least one block");
        let area = (last.h / 2) * (last.w / 2);
        let gap: Vec<f64> = last
            .out
            .chunks_exact(area)
            .map(|plane| plane.iter().sum::<f64>() / area as f64)
            .collect();
        let fc7_pre = affine(params.head(0), params.head(1), &gap);
        let embedding: Vec<f64> = fc7_pre.iter().map(|&v| v.max(0.0)).collect();
        let logits = affine(params.head(2), params.head(3), &embedding);
        let score = affine(params.head(4), params.head(5), &embedding)[0];
        Trace {
            blocks,
            gap,
            fc7_pre,
            embedding,
            logits,
            score,
        }
    }

    pub(crate) fn output(&self) -> StreamOutput {
        StreamOutput {
            logits: self.logits.clone(),
            rank_score: self.score,
            embedding: self.embedding.clone(),
        }
    }

    pub(crate) fn features(&self, layer: FeatureLayer) -> Vec<f64> {
        match layer {
            FeatureLayer::Embedding => self.embedding.clone(),
            FeatureLayer::Block(k) => {
                let bt = &self.blocks[k];
                let area = (bt.h / 2) * (bt.w / 2);
                bt.out
                    .chunks_exact(area)
                    .map(|plane| plane.iter().sum::<f64>() / area as f64)
                    .collect()
            }
        }
    }

    /// Sign pattern of every ReLU input; finite differences are only valid
    /// when it does not change across the perturbation.
    fn relu_pattern(&self, out: &mut Vec<bool>) {
        for bt in &self.blocks {
            out.extend(bt.pre.iter().map(|&v| v > 0.0));
        }
        out.extend(self.fc7_pre.iter().map(|&v| v > 0.0));
    }

    /// Accumulates `d loss / d params` into `grad` given the loss gradient
    /// with respect to this trace's outputs.
    fn backward_into(&self, params: &NetParams, grad: &mut NetParams, up: &OutputGrad) {
        let arch = params.arch();
        let n_blocks = arch.conv_channels.len();
        let base = 2 * n_blocks;
        let e = self.embedding.len();
        let ranges: Vec<_> = grad.groups.iter().map(|g| g.range()).collect();
        let g = &mut grad.values;

        let mut d_emb = up.embedding.clone().unwrap_or_else(|| vec![0.0; e]);
        // fc8_1
        let w81 = params.head(2);
        for (k, &dl) in up.logits.iter().enumerate() {
            if dl == 0.0 {
                continue;
            }
            let gw = &mut g[ranges[base + 2].clone()][k * e..(k + 1) * e];
            for (gi, &x) in gw.iter_mut().zip(&self.embedding) {
                *gi += dl * x;
            }
            g[ranges[base + 3].start + k] += dl;
            for (d, &w) in d_emb.iter_mut().zip(&w81[k * e..(k + 1) * e]) {
                *d += dl * w;
            }
        }
        // fc8_2
        if up.score != 0.0 {
            let w82 = params.head(4);
            let gw = &mut g[ranges[base + 4].clone()];
            for (gi, &x) in gw.iter_mut().zip(&self.embedding) {
                *gi += up.score * x;
            }
            g[ranges[base + 5].start] += up.score;
            for (d, &w) in d_emb.iter_mut().zip(w82) {
                *d += up.score * w;
            }
        }
        // fc7 + ReLU
        let c_last = self.gap.len();
        let w7 = params.head(0);
        let mut d_gap = vec![0.0; c_last];
        for (o, (&d, &pre)) in d_emb.iter().zip(&self.fc7_pre).enumerate() {
            if pre <= 0.0 || d == 0.0 {
                continue;
            }
            let gw = &mut g[ranges[base].clone()][o * c_last..(o + 1) * c_last];
            for (gi, &x) in gw.iter_mut().zip(&self.gap) {
                *gi += d * x;
            }
            g[ranges[base + 1].start + o] += d;
            for (dg, &w) in d_gap.iter_mut().zip(&w7[o * c_last..(o + 1) * c_last]) {
                *dg += d * w;
            }
        }
        // global average pool
        let last = self.blocks.last().expect("at least one block");
        let area = (last.h / 2) * (last.w / 2);
        let mut d_out: Vec<f64> = d_gap
            .iter()
            .flat_map(|&d| std::iter::repeat_n(d / area as f64, area))
            .collect();
        // conv blocks
        for b in (0..n_blocks).rev() {
            let bt = &self.blocks[b];
            let hw = bt.h * bt.w;
            let mut d_pre = vec![0.0; bt.c_out * hw];
            avg_pool2_backward(&d_out, bt.c_out, bt.h, bt.w, &mut d_pre);
            for (d, &p) in d_pre.iter_mut().zip(&bt.pre) {
                if p <= 0.0 {
                    *d = 0.0;
                }
            }
            let k = bt.c_in * 9;
            gemm(bt.c_out, hw, k, &d_pre, false, &bt.cols, true, 1.0, &mut g[ranges[2 * b].clone()]);
            let gb = &mut g[ranges[2 * b + 1].clone()];
            for (o, gbo) in gb.iter_mut().enumerate() {
                *gbo += d_pre[o * hw..(o + 1) * hw].iter().sum::<f64>();
            }
            if b > 0 {
                let mut d_cols = vec![0.0; k * hw];
                gemm(k, bt.c_out, hw, params.conv_weight(b), true, &d_pre, false, 0.0, &mut d_cols);
                let mut d_in = vec![0.0; bt.c_in * hw];
                col2im3x3(&d_cols, bt.c_in, bt.h, bt.w, &mut d_in);
                d_out = d_in;
            }
        }
    }
}

/// Gradient of the loss with respect to one stream's outputs.
struct OutputGrad {
    logits: Vec<f64>,
    score: f64,
    embedding: Option<Vec<f64>>,
}

impl OutputGrad {
    fn zero(width: usize) -> Self {
        OutputGrad {
            logits: vec![0.0; width],
            score: 0.0,
            embedding: None,
        }
    }

    fn scaled(mut self, s: f64) -> Self {
        for v in &mut self.logits {
            *v *= s;
        }
        self.score *= s;
        if let Some(e) = &mut self.embedding {
            for v in e {
                *v *= s;
            }
        }
        self
    }
}

#[derive(Default)]
struct Sums {
    names: Vec<&'static str>,
    values: Vec<f64>,
}

impl Sums {
    fn add(&mut self, name: &'static str, v: f64) {
        match self.names.iter().position(|n| *n == name) {
            Some(i) => self.values[i] += v,
            None => {
                self.names.push(name);
                self.values.push(v);
            }
        }
    }

    fn mean(&self, name: &str, n: f64) -> f64 {
        self.names
            .iter()
            .position(|x| *x == name)
            .map(|i| self.values[i] / n)
            .unwrap_or(0.0)
    }
}

/// Per-pair loss terms and output gradients (unscaled by batch size).
fn pair_terms(
    spec: &LossSpec,
    ta: &Trace,
    tb: &Trace,
    sample: &PairSample<'_>,
    sums: &mut Sums,
    hinges: &mut Vec<bool>,
) -> Result<(OutputGrad, OutputGrad)> {
    let width = ta.logits.len();
    let mut ga = OutputGrad::zero(width);
    let mut gb = OutputGrad::zero(width);
    match *spec {
        LossSpec::Combined { lambda } => {
            let (ya, yb) = (sample.target_a.class()?, sample.target_b.class()?);
            if (ya, yb) != (0, 1) {
                return Err(Error::InvalidArgument(format!(
                    "combined loss expects (sunrise, sunset) oriented pairs, got classes ({ya}, {yb})"
                )));
            }
            let (la, da) = losses::softmax_ce_grad(&ta.logits, ya)?;
            let (lb, db) = losses::softmax_ce_grad(&tb.logits, yb)?;
            let (lr, dr) = losses::ranking_loss_grad(ta.score, tb.score);
            sums.add("softmax_r", la);
            sums.add("softmax_s", lb);
            sums.add("ranking", lr);
            ga.logits = da;
            gb.logits = db;
            ga.score = lambda * dr;
            gb.score = -lambda * dr;
        }
        LossSpec::Contrast { margin } => {
            let same = sample.target_a.class()? == sample.target_b.class()?;
            let (l, d, active) = losses::contrast_loss_grad(&ta.embedding, &tb.embedding, same, margin)?;
            sums.add("contrast", l);
            hinges.push(active);
            gb.embedding = Some(d.iter().map(|v| -v).collect());
            ga.embedding = Some(d);
        }
        LossSpec::SoftmaxContrast { lambda, margin } => {
            let (ya, yb) = (sample.target_a.class()?, sample.target_b.class()?);
            let (la, da) = losses::softmax_ce_grad(&ta.logits, ya)?;
            let (lb, db) = losses::softmax_ce_grad(&tb.logits, yb)?;
            let (lc, dc, active) = losses::contrast_loss_grad(&ta.embedding, &tb.embedding, ya == yb, margin)?;
            sums.add("softmax_a", la);
            sums.add("softmax_b", lb);
            sums.add("contrast", lc);
            hinges.push(active);
            ga.logits = da;
            gb.logits = db;
            gb.embedding = Some(dc.iter().map(|v| -lambda * v).collect());
            ga.embedding = Some(dc.iter().map(|v| lambda * v).collect());
        }
        LossSpec::SquareRanking { lambda } => {
            let (ya, yb) = (sample.target_a.value()?, sample.target_b.value()?);
            let (pa, pb) = (ta.logits[0], tb.logits[0]);
            sums.add("square_a", losses::square_loss(pa, ya));
            sums.add("square_b", losses::square_loss(pb, yb));
            ga.logits = vec![2.0 * (pa - ya)];
            gb.logits = vec![2.0 * (pb - yb)];
            if ya != yb {
                let a_higher = ya > yb;
                let (hi, lo) = if a_higher { (ta.score, tb.score) } else { (tb.score, ta.score) };
                let (lr, dr) = losses::ranking_loss_grad(hi, lo);
                sums.add("ranking", lr);
                let (d_hi, d_lo) = (lambda * dr, -lambda * dr);
                if a_higher {
                    ga.score = d_hi;
                    gb.score = d_lo;
                } else {
                    ga.score = d_lo;
                    gb.score = d_hi;
                }
            }
        }
        LossSpec::SoftmaxOnly | LossSpec::Square => unreachable!("single-image loss on a pair batch"),
    }
    Ok((ga, gb))
}

fn finish(spec: &LossSpec, sums: &Sums, n: f64) -> LossValue {
    let m = |name| sums.mean(name, n);
    match *spec {
        LossSpec::Combined { lambda } => losses::combine(m("softmax_r"), m("softmax_s"), m("ranking"), lambda),
        LossSpec::Contrast { .. } => LossValue {
            total: m("contrast"),
            components: vec![("contrast", m("contrast"))],
        },
        LossSpec::SoftmaxContrast { lambda, .. } => LossValue {
            total: m("softmax_a") + m("softmax_b") + lambda * m("contrast"),
            components: vec![("softmax_a", m("softmax_a")), ("softmax_b", m("softmax_b")), ("contrast", m("contrast"))],
        },
        LossSpec::SoftmaxOnly => LossValue {
            total: m("softmax"),
            components: vec![("softmax", m("softmax"))],
        },
        LossSpec::Square => LossValue {
            total: m("square"),
            components: vec![("square", m("square"))],
        },
        LossSpec::SquareRanking { lambda } => LossValue {
            total: m("square_a") + m("square_b") + lambda * m("ranking"),
            components: vec![("square_a", m("square_a")), ("square_b", m("square_b")), ("ranking", m("ranking"))],
        },
    }
}

/// Shared driver for loss evaluation and backpropagation.
fn process(
    params: &NetParams,
    batch: &Batch<'_>,
    spec: &LossSpec,
    mut grad: Option<&mut NetParams>,
    mut pattern: Option<&mut Vec<bool>>,
) -> Result<LossValue> {
    spec.validate()?;
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if let Some(head) = spec.required_head() {
        if params.arch().head != head {
            return Err(Error::InvalidArgument(format!(
                "{} loss needs a {head:?} head, network has {:?}",
                spec.name(),
                params.arch().head
            )));
        }
    }
    let keep = grad.is_some();
    let n = batch.len() as f64;
    let mut sums = Sums::default();
    let mut hinges = Vec::new();
    match (batch, spec.uses_pairs()) {
        (Batch::Pairs(pairs), true) => {
            for p in pairs {
                check_input(params, p.a)?;
                check_input(params, p.b)?;
                let ta = Trace::run(params, p.a.data(), keep);
                let tb = Trace::run(params, p.b.data(), keep);
                let (ga, gb) = pair_terms(spec, &ta, &tb, p, &mut sums, &mut hinges)?;
                if let Some(g) = grad.as_deref_mut() {
                    ta.backward_into(params, g, &ga.scaled(1.0 / n));
                    tb.backward_into(params, g, &gb.scaled(1.0 / n));
                }
                if let Some(pat) = pattern.as_deref_mut() {
                    ta.relu_pattern(pat);
                    tb.relu_pattern(pat);
                }
            }
        }
        (Batch::Singles(singles), false) => {
            for s in singles {
                check_input(params, s.x)?;
                let t = Trace::run(params, s.x.data(), keep);
                let mut og = OutputGrad::zero(t.logits.len());
                match spec {
                    LossSpec::SoftmaxOnly => {
                        let (l, d) = losses::softmax_ce_grad(&t.logits, s.target.class()?)?;
                        sums.add("softmax", l);
                        og.logits = d;
                    }
                    LossSpec::Square => {
                        let y = s.target.value()?;
                        sums.add("square", losses::square_loss(t.logits[0], y));
                        og.logits = vec![2.0 * (t.logits[0] - y)];
                    }
                    _ => unreachable!("pair loss on a single-image batch"),
                }
                if let Some(g) = grad.as_deref_mut() {
                    t.backward_into(params, g, &og.scaled(1.0 / n));
                }
                if let Some(pat) = pattern.as_deref_mut() {
                    t.relu_pattern(pat);
                }
            }
        }
        (_, true) => {
            return Err(Error::InvalidArgument(format!("{} loss needs a pair batch", spec.name())));
        }
        (_, false) => {
            return Err(Error::InvalidArgument(format!("{} loss needs a single-image batch", spec.name())));
        }
    }
    if let Some(pat) = pattern {
        pat.extend(hinges);
    }
    let value = finish(spec, &sums, n);
    if !value.total.is_finite() {
        return Err(Error::NonFinite(format!("{} loss: {:?}", spec.name(), value.components)));
    }
    Ok(value)
}

/// Batch-mean loss. With `pattern` set, also collects the ReLU sign pattern
/// and hinge activity of every evaluation.
pub fn evaluate_loss(params: &NetParams, batch: &Batch<'_>, spec: &LossSpec, pattern: Option<&mut Vec<bool>>) -> Result<LossValue> {
    process(params, batch, spec, None, pattern)
}

/// Batch-mean loss and its gradient with respect to every parameter. Both
/// members of a pair backpropagate into the same buffer.
pub fn backward(params: &NetParams, batch: &Batch<'_>, spec: &LossSpec) -> Result<(LossValue, NetParams)> {
    let mut grad = NetParams::zeros(params.arch())?;
    let value = process(params, batch, spec, Some(&mut grad), None)?;
    if !grad.is_finite() {
        return Err(Error::NonFinite(format!("{} gradient", spec.name())));
    }
    Ok((value, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{init_params, ArchConfig, Init};

    fn img(seed: u64, shape: [usize; 3]) -> Tensor {
        use rand::Rng;
        let mut rng = crate::seed::rng(seed);
        let n = shape.iter().product();
        Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn combined_value_matches_losses_module() {
        let arch = ArchConfig::with_input(16, 16);
        let p = init_params(&arch, Init::FanIn, 1).unwrap();
        let imgs: Vec<Tensor> = (0..6).map(|s| img(s, arch.input_shape())).collect();
        let batch = Batch::Pairs(
            (0..3)
                .map(|i| PairSample {
                    a: &imgs[2 * i],
                    b: &imgs[2 * i + 1],
                    target_a: Target::Class(0),
                    target_b: Target::Class(1),
                })
                .collect(),
        );
        let v = evaluate_loss(&p, &batch, &LossSpec::Combined { lambda: 0.8 }, None).unwrap();
        let outs: Vec<_> = (0..3)
            .map(|i| super::super::forward_pair(&p, (&imgs[2 * i], &imgs[2 * i + 1])).unwrap())
            .collect();
        let reference = losses::combined_loss(&outs, &[(0, 1); 3], 0.8).unwrap();
        assert!((v.total - reference.total).abs() < 1e-12);
    }

    #[test]
    fn wrong_batch_kind_or_head_is_rejected() {
        let arch = ArchConfig::with_input(16, 16);
        let p = init_params(&arch, Init::FanIn, 1).unwrap();
        let x = img(0, arch.input_shape());
        let singles = Batch::Singles(vec![SingleSample {
            x: &x,
            target: Target::Class(0),
        }]);
        assert!(backward(&p, &singles, &LossSpec::Combined { lambda: 1.0 }).is_err());
        assert!(backward(&p, &singles, &LossSpec::Square).is_err());
        assert!(backward(&p, &Batch::Singles(vec![]), &LossSpec::SoftmaxOnly).is_err());
        let flipped = Batch::Pairs(vec![PairSample {
            a: &x,
            b: &x,
            target_a: Target::Class(1),
            target_b: Target::Class(0),
        }]);
        assert!(backward(&p, &flipped, &LossSpec::Combined { lambda: 1.0 }).is_err());
    }

    #[test]
    fn zero_network_is_stationary_for_symmetric_batches() {
        // With every weight zero the logits are equal, the softmax gradients of
        // a balanced batch cancel and the ranking gradient cancels between the
        // two members, so the full gradient vanishes.
        let arch = ArchConfig::with_input(16, 16);
        let p = init_params(&arch, Init::Zero, 0).unwrap();
        let a = img(1, arch.input_shape());
        let b = img(2, arch.input_shape());
        let batch = Batch::Pairs(vec![PairSample {
            a: &a,
            b: &b,
            target_a: Target::Class(0),
            target_b: Target::Class(1),
        }]);
        let (v, g) = backward(&p, &batch, &LossSpec::Combined { lambda: 1.0 }).unwrap();
        assert!((v.total - (2.0 * std::f64::consts::LN_2 + 0.5)).abs() < 1e-12);
        assert!(g.values().iter().all(|&x| x == 0.0), "max {}", g.values().iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
}
