use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::eval::evaluate_classification;
use super::linear::LinearModel;
use crate::catalog::Dataset;
use crate::config::{self, KvConfig};
use crate::error::{Error, Result};
use crate::losses::LossValue;
use crate::network::{
    backward, extract_features, init_params, ArchConfig, Batch, FeatureLayer, HeadKind, Init, LossSpec, NetParams,
    PairSample, SingleSample, Target,
};
use crate::pairing::{enumerate_pairs, sample_epoch, EnumerateOptions, PairConstraint};
use crate::seed::{self, tags};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Combined softmax + ranking loss on selective pairs.
    SoSNet,
    /// Softmax + contrast loss on random pairs.
    SoSNetRand,
    /// Contrast loss only on random pairs, then a linear readout of the embedding.
    Siamese,
    /// Softmax on single images.
    SingleStream,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SoSNet, Method::SoSNetRand, Method::Siamese, Method::SingleStream];

    pub fn default_loss(self) -> LossSpec {
        match self {
            Method::SoSNet => LossSpec::Combined { lambda: 1.0 },
            Method::SoSNetRand => LossSpec::SoftmaxContrast { lambda: 1.0, margin: 1.0 },
            Method::Siamese => LossSpec::Contrast { margin: 1.0 },
            Method::SingleStream => LossSpec::SoftmaxOnly,
        }
    }

    pub fn default_constraint(self) -> PairConstraint {
        match self {
            Method::SoSNet => PairConstraint::SELECTIVE,
            _ => PairConstraint::RANDOM,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::SoSNet => "sosnet",
            Method::SoSNetRand => "sosnet-rand",
            Method::Siamese => "siamese",
            Method::SingleStream => "single-stream",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}` (expected sosnet, sosnet-rand, siamese or single-stream)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub method: Method,
    pub loss_spec: LossSpec,
    pub pair_constraint: PairConstraint,
    pub batch_pairs: usize,
    /// Pairs drawn per epoch; `None` means half the training images, so an
    /// epoch touches as many images as a single-stream epoch. When every
    /// candidate pair fits the budget, all of them are used.
    pub pairs_per_epoch: Option<usize>,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub momentum: f64,
    pub seed: u64,
    pub arch: ArchConfig,
    /// Ridge strength of the siamese readout.
    pub readout_reg: f64,
    /// Record training-set mAcc after every epoch.
    pub track_accuracy: bool,
}

impl TrainConfig {
    pub fn new(method: Method) -> Self {
        TrainConfig {
            method,
            loss_spec: method.default_loss(),
            pair_constraint: method.default_constraint(),
            batch_pairs: 16,
            pairs_per_epoch: None,
            epochs: 20,
            lr_start: 1e-3,
            lr_end: 1e-5,
            momentum: 0.0,
            seed: 0,
            arch: ArchConfig::default(),
            readout_reg: 1e-3,
            track_accuracy: true,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match self.loss_spec {
            LossSpec::Combined { lambda } | LossSpec::SquareRanking { lambda } => Some(lambda),
            LossSpec::SoftmaxContrast { lambda, .. } => Some(lambda),
            _ => None,
        }
    }

    pub fn margin(&self) -> Option<f64> {
        match self.loss_spec {
            LossSpec::Contrast { margin } | LossSpec::SoftmaxContrast { margin, .. } => Some(margin),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end && self.lr_start.is_finite()) {
            return bad(format!(
                "learning rates must satisfy lr_start >= lr_end > 0, got {} and {}",
                self.lr_start, self.lr_end
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.batch_pairs == 0 || self.pairs_per_epoch == Some(0) {
            return bad("batch_pairs and pairs_per_epoch must be positive".into());
        }
        if !(self.readout_reg > 0.0 && self.readout_reg.is_finite()) {
            return bad(format!("readout_reg must be > 0, got {}", self.readout_reg));
        }
        if matches!(self.loss_spec, LossSpec::Combined { .. }) && !self.pair_constraint.require_ss {
            return bad("the combined loss needs sunrise/sunset pairs (pair_constraint must include ss)".into());
        }
        if let Some(l) = self.lambda() {
            if !(l >= 0.0 && l.is_finite()) {
                return bad(format!("lambda must be >= 0, got {l}"));
            }
        }
        if let Some(m) = self.margin() {
            if !(m >= 0.0 && m.is_finite()) {
                return bad(format!("margin must be >= 0, got {m}"));
            }
        }
        self.arch.validate().map_err(|e| Error::Config(e.to_string()))
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::new(Method::SoSNet)
    }
}

fn loss_from_name(name: &str, lambda: f64, margin: f64) -> Result<LossSpec> {
    Ok(match name {
        "combined" => LossSpec::Combined { lambda },
        "contrast" => LossSpec::Contrast { margin },
        "softmax-contrast" => LossSpec::SoftmaxContrast { lambda, margin },
        "softmax" => LossSpec::SoftmaxOnly,
        "square" => LossSpec::Square,
        "square-ranking" => LossSpec::SquareRanking { lambda },
        other => return Err(Error::Config(format!("unknown loss `{other}`"))),
    })
}

impl KvConfig for TrainConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let lambda = self.lambda().unwrap_or(1.0);
        let margin = self.margin().unwrap_or(1.0);
        match key {
            "method" => {
                self.method = config::parse(key, value)?;
                self.loss_spec = loss_from_name(self.method.default_loss().name(), lambda, margin)?;
                self.pair_constraint = self.method.default_constraint();
            }
            "loss" => self.loss_spec = loss_from_name(value, lambda, margin)?,
            "lambda" => {
                let l: f64 = config::parse(key, value)?;
                match &mut self.loss_spec {
                    LossSpec::Combined { lambda } | LossSpec::SquareRanking { lambda } => *lambda = l,
                    LossSpec::SoftmaxContrast { lambda, .. } => *lambda = l,
                    other => return Err(Error::Config(format!("loss `{}` has no lambda", other.name()))),
                }
            }
            "margin" => {
                let m: f64 = config::parse(key, value)?;
                match &mut self.loss_spec {
                    LossSpec::Contrast { margin } | LossSpec::SoftmaxContrast { margin, .. } => *margin = m,
                    other => return Err(Error::Config(format!("loss `{}` has no margin", other.name()))),
                }
            }
            "pair_constraint" => self.pair_constraint = config::parse(key, value)?,
            "batch_pairs" => self.batch_pairs = config::parse(key, value)?,
            "pairs_per_epoch" => {
                self.pairs_per_epoch = match value {
                    "auto" => None,
                    v => Some(config::parse(key, v)?),
                }
            }
            "epochs" => self.epochs = config::parse(key, value)?,
            "lr_start" => self.lr_start = config::parse(key, value)?,
            "lr_end" => self.lr_end = config::parse(key, value)?,
            "momentum" => self.momentum = config::parse(key, value)?,
            "seed" => self.seed = config::parse(key, value)?,
            "height" => self.arch.height = config::parse(key, value)?,
            "width" => self.arch.width = config::parse(key, value)?,
            "readout_reg" => self.readout_reg = config::parse(key, value)?,
            "track_accuracy" => self.track_accuracy = config::parse(key, value)?,
            _ => return Err(config::unknown(key)),
        }
        Ok(())
    }

    /// `method` is applied first since it resets the loss and pair constraint.
    fn apply_text(&mut self, text: &str) -> Result<()> {
        let kv = config::parse_kv(text)?;
        for (k, v) in kv.iter().filter(|(k, _)| k == "method") {
            self.set(k, v)?;
        }
        for (k, v) in kv.iter().filter(|(k, _)| k != "method") {
            self.set(k, v)?;
        }
        Ok(())
    }

    fn to_kv(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("method".to_string(), self.method.to_string()),
            ("loss".to_string(), self.loss_spec.name().to_string()),
        ];
        if let Some(l) = self.lambda() {
            kv.push(("lambda".into(), l.to_string()));
        }
        if let Some(m) = self.margin() {
            kv.push(("margin".into(), m.to_string()));
        }
        kv.extend([
            ("pair_constraint".into(), self.pair_constraint.to_string()),
            ("batch_pairs".into(), self.batch_pairs.to_string()),
            (
                "pairs_per_epoch".into(),
                self.pairs_per_epoch.map_or("auto".to_string(), |n| n.to_string()),
            ),
            ("epochs".into(), self.epochs.to_string()),
            ("lr_start".into(), self.lr_start.to_string()),
            ("lr_end".into(), self.lr_end.to_string()),
            ("momentum".into(), self.momentum.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("height".into(), self.arch.height.to_string()),
            ("width".into(), self.arch.width.to_string()),
            ("readout_reg".into(), self.readout_reg.to_string()),
            ("track_accuracy".into(), self.track_accuracy.to_string()),
        ]);
        kv
    }
}

/// Log-spaced learning rate; the endpoints are returned exactly.
pub fn lr_at(config: &TrainConfig, epoch: usize) -> Result<f64> {
    if epoch >= config.epochs {
        return Err(Error::InvalidArgument(format!(
            "epoch {epoch} is outside a {}-epoch schedule",
            config.epochs
        )));
    }
    if epoch == 0 {
        return Ok(config.lr_start);
    }
    let last = config.epochs - 1;
    if epoch == last {
        return Ok(config.lr_end);
    }
    let t = epoch as f64 / last as f64;
    Ok(config.lr_start * (config.lr_end / config.lr_start).powf(t))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    pub loss: LossValue,
    pub n_batches: usize,
    /// Pairs, or single images for single-image losses.
    pub n_examples: usize,
    pub train_macc: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: NetParams,
    pub history: Vec<EpochRecord>,
}

/// Loss-weighted running mean of batch losses over an epoch.
#[derive(Default)]
struct EpochLoss {
    total: f64,
    components: Vec<(&'static str, f64)>,
    n: usize,
}

impl EpochLoss {
    fn add(&mut self, v: &LossValue, n: usize) {
        let w = n as f64;
        self.total += w * v.total;
        if self.components.is_empty() {
            self.components = v.components.iter().map(|&(k, _)| (k, 0.0)).collect();
        }
        for ((_, acc), (_, c)) in self.components.iter_mut().zip(&v.components) {
            *acc += w * c;
        }
        self.n += n;
    }

    fn mean(&self) -> LossValue {
        let n = self.n.max(1) as f64;
        LossValue {
            total: self.total / n,
            components: self.components.iter().map(|&(k, v)| (k, v / n)).collect(),
        }
    }
}

/// Runs plain (optionally momentum) SGD on `data` with per-record targets.
pub(crate) fn fit_network(config: &TrainConfig, data: &Dataset, targets: &[Target]) -> Result<TrainOutcome> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let spec = config.loss_spec;
    let mut params = init_params(&config.arch, Init::FanIn, config.seed)?;
    let mut velocity = (config.momentum > 0.0).then(|| NetParams::zeros(&config.arch)).transpose()?;
    let mut history = Vec::with_capacity(config.epochs);
    let budget = config.pairs_per_epoch.unwrap_or(data.len().div_ceil(2));
    for epoch in 0..config.epochs {
        let lr = lr_at(config, epoch)?;
        let e = epoch as u64;
        let mut acc = EpochLoss::default();
        let mut step = |batch: Batch<'_>, b: usize, params: &mut NetParams| -> Result<()> {
            let n = batch.len();
            let (value, grad) = backward(params, &batch, &spec).map_err(|err| match err {
                Error::NonFinite(detail) => Error::Diverged { epoch, batch: b, detail },
                other => other,
            })?;
            match velocity.as_mut() {
                Some(v) => {
                    v.scale(config.momentum);
                    v.axpy(-lr, &grad);
                    params.axpy(1.0, v);
                }
                None => params.axpy(-lr, &grad),
            }
            if !params.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    detail: "parameters became non-finite".into(),
                });
            }
            acc.add(&value, n);
            Ok(())
        };
        let n_batches = if spec.uses_pairs() {
            let pairs = enumerate_pairs(
                &data.records,
                &config.pair_constraint,
                EnumerateOptions {
                    max_pairs: Some(budget),
                    seed: seed::derive(config.seed, tags::RANDOM_PAIRS, e),
                },
            )?;
            let batches = sample_epoch(&pairs, config.batch_pairs, seed::derive(config.seed, tags::EPOCH, e))?;
            for (b, pb) in batches.iter().enumerate() {
                let samples = pb
                    .iter()
                    .map(|p| PairSample {
                        a: &data.images[p.r],
                        b: &data.images[p.s],
                        target_a: targets[p.r],
                        target_b: targets[p.s],
                    })
                    .collect();
                step(Batch::Pairs(samples), b, &mut params)?;
            }
            batches.len()
        } else {
            let mut order: Vec<usize> = (0..data.len()).collect();
            order.shuffle(&mut seed::stream(config.seed, tags::EPOCH, e));
            let chunks: Vec<&[usize]> = order.chunks(2 * config.batch_pairs).collect();
            for (b, chunk) in chunks.iter().enumerate() {
                let samples = chunk
                    .iter()
                    .map(|&i| SingleSample {
                        x: &data.images[i],
                        target: targets[i],
                    })
                    .collect();
                step(Batch::Singles(samples), b, &mut params)?;
            }
            chunks.len()
        };
        let train_macc = if config.track_accuracy
            && config.arch.head == HeadKind::Classifier
            && config.method != Method::Siamese
        {
            Some(evaluate_classification(&params, data)?.m_acc)
        } else {
            None
        };
        history.push(EpochRecord {
            epoch,
            lr,
            loss: acc.mean(),
            n_batches,
            n_examples: acc.n,
            train_macc,
        });
    }
    Ok(TrainOutcome { params, history })
}

fn class_targets(data: &Dataset) -> Result<Vec<Target>> {
    data.records
        .iter()
        .map(|r| {
            r.label
                .map(|l| Target::Class(l.class_index()))
                .ok_or_else(|| Error::Catalog(format!("record `{}` has no label", r.id)))
        })
        .collect()
}

/// Trains a classifier with `config.method` on `data` (the training split).
pub fn train(config: &TrainConfig, data: &Dataset) -> Result<TrainOutcome> {
    if config.arch.head != HeadKind::Classifier {
        return Err(Error::Config("classification training needs a classifier head".into()));
    }
    let targets = class_targets(data)?;
    let mut outcome = fit_network(config, data, &targets)?;
    if config.method == Method::Siamese {
        siamese_readout(&mut outcome.params, data, &targets, config.readout_reg)?;
        if config.track_accuracy {
            let m = evaluate_classification(&outcome.params, data)?.m_acc;
            if let Some(last) = outcome.history.last_mut() {
                last.train_macc = Some(m);
            }
        }
    }
    Ok(outcome)
}

/// Fits a ridge model of `+1` (sunrise) / `-1` (sunset) on the embedding and
/// writes it into the classifier head so that `logit_0 - logit_1` equals the
/// ridge score.
fn siamese_readout(params: &mut NetParams, data: &Dataset, targets: &[Target], reg: f64) -> Result<()> {
    let features = data
        .images
        .iter()
        .map(|x| extract_features(params, x, FeatureLayer::Embedding))
        .collect::<Result<Vec<_>>>()?;
    let y: Vec<f64> = targets
        .iter()
        .map(|t| match t {
            Target::Class(0) => 1.0,
            _ => -1.0,
        })
        .collect();
    let model = LinearModel::fit_ridge(&features, &y, reg)?;
    let e = model.weights.len();
    let w = params.get_mut("fc8_1.weight");
    for k in 0..e {
        w[k] = 0.5 * model.weights[k];
        w[e + k] = -0.5 * model.weights[k];
    }
    let b = params.get_mut("fc8_1.bias");
    b[0] = 0.5 * model.bias;
    b[1] = -0.5 * model.bias;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints_are_exact() {
        let c = TrainConfig::default();
        assert_eq!(lr_at(&c, 0).unwrap(), 1e-3);
        assert_eq!(lr_at(&c, 19).unwrap(), 1e-5);
        assert!(lr_at(&c, 20).is_err());
        let r = lr_at(&c, 10).unwrap() / lr_at(&c, 9).unwrap();
        assert!((r - 10f64.powf(-2.0 / 19.0)).abs() < 1e-12);
    }

    #[test]
    fn single_epoch_schedule_uses_the_start_rate() {
        let c = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        assert_eq!(lr_at(&c, 0).unwrap(), 1e-3);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut c = TrainConfig::default();
        c.lr_end = 1e-2;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.epochs = 0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.pair_constraint = PairConstraint::RANDOM;
        assert!(c.validate().is_err());
    }

    #[test]
    fn key_value_round_trip() {
        let mut c = TrainConfig::new(Method::SoSNetRand);
        c.set("margin", "2").unwrap();
        c.set("epochs", "7").unwrap();
        c.set("pairs_per_epoch", "40").unwrap();
        let mut d = TrainConfig::default();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
        assert!(d.set("lambda", "x").is_err());
        assert!(d.set("nope", "1").is_err());
        let mut s = TrainConfig::new(Method::SingleStream);
        assert!(s.set("lambda", "1").is_err());
        s.apply_text("lambda = 0.5\nmethod = sosnet\n").unwrap();
        assert_eq!(s.loss_spec, LossSpec::Combined { lambda: 0.5 });
    }
}
