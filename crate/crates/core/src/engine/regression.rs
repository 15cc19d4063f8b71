use serde::{Deserialize, Serialize};

use super::eval::{evaluate_regression, RegressionReport};
use super::linear::{fit_eps_insensitive, LinearModel};
use super::train::{fit_network, EpochRecord, Method, TrainConfig};
use crate::catalog::{split_chronological, Dataset};
use crate::config::{self, KvConfig};
use crate::error::{Error, Result};
use crate::network::{extract_features, ArchConfig, FeatureLayer, HeadKind, LossSpec, NetParams, Target};
use crate::pairing::PairConstraint;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinearHeadKind {
    Ridge { reg: f64 },
    /// Linear SVR; `c` weighs the hinge term against `0.5 |w|^2`.
    EpsInsensitive { eps: f64, c: f64 },
}

/// The SVR settings reported for the original experiments. They are kept
/// for reference only; no code path reads them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSvrParams {
    pub c: f64,
    pub nu: f64,
    pub g: f64,
}

impl Default for ReferenceSvrParams {
    fn default() -> Self {
        ReferenceSvrParams { c: 100.0, nu: 0.5, g: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionConfig {
    pub head: LinearHeadKind,
    pub feature_layer: FeatureLayer,
    pub lambda: f64,
    pub batch_pairs: usize,
    pub pairs_per_epoch: Option<usize>,
    pub epochs: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub momentum: f64,
    /// Latest fraction of the frames (by time) held out for testing.
    pub test_fraction: f64,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub reference_svr: ReferenceSvrParams,
}

impl Default for RegressionConfig {
    fn default() -> Self {
        RegressionConfig {
            head: LinearHeadKind::Ridge { reg: 1e-3 },
            feature_layer: FeatureLayer::Embedding,
            lambda: 1.0,
            batch_pairs: 16,
            pairs_per_epoch: None,
            epochs: 10,
            lr_start: 1e-3,
            lr_end: 1e-5,
            momentum: 0.0,
            test_fraction: 0.5,
            seed: 0,
            height: 64,
            width: 64,
            reference_svr: ReferenceSvrParams::default(),
        }
    }
}

impl RegressionConfig {
    /// Stage-one network training settings.
    pub fn train_config(&self) -> TrainConfig {
        let mut arch = ArchConfig::with_input(self.height, self.width);
        arch.head = HeadKind::Regressor;
        TrainConfig {
            method: Method::SoSNet,
            loss_spec: LossSpec::SquareRanking { lambda: self.lambda },
            pair_constraint: PairConstraint::new(false, true, false),
            batch_pairs: self.batch_pairs,
            pairs_per_epoch: self.pairs_per_epoch,
            epochs: self.epochs,
            lr_start: self.lr_start,
            lr_end: self.lr_end,
            momentum: self.momentum,
            seed: self.seed,
            arch,
            readout_reg: 1.0,
            track_accuracy: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.head {
            LinearHeadKind::Ridge { reg } if !(reg > 0.0 && reg.is_finite()) => {
                return Err(Error::Config(format!("ridge reg_strength must be > 0, got {reg}")));
            }
            LinearHeadKind::EpsInsensitive { eps, c } if !(eps >= 0.0 && c > 0.0 && c.is_finite()) => {
                return Err(Error::Config(format!("svr needs eps >= 0 and c > 0, got {eps} and {c}")));
            }
            _ => {}
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction must lie in (0, 1), got {}", self.test_fraction)));
        }
        let tc = self.train_config();
        tc.validate()?;
        if let FeatureLayer::Block(k) = self.feature_layer {
            if k >= tc.arch.conv_channels.len() {
                return Err(Error::Config(format!("no conv block {}", k + 1)));
            }
        }
        Ok(())
    }
}

impl KvConfig for RegressionConfig {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "head" => {
                self.head = match value {
                    "ridge" => LinearHeadKind::Ridge { reg: 1e-3 },
                    "eps-insensitive" => LinearHeadKind::EpsInsensitive { eps: 0.1, c: 1.0 },
                    other => return Err(Error::Config(format!("unknown head `{other}` (expected ridge or eps-insensitive)"))),
                }
            }
            "reg" => match &mut self.head {
                LinearHeadKind::Ridge { reg } => *reg = config::parse(key, value)?,
                _ => return Err(Error::Config("`reg` applies to the ridge head".into())),
            },
            "eps" | "c" => match &mut self.head {
                LinearHeadKind::EpsInsensitive { eps, c } => {
                    let v = config::parse(key, value)?;
                    if key == "eps" {
                        *eps = v;
                    } else {
                        *c = v;
                    }
                }
                _ => return Err(Error::Config(format!("`{key}` applies to the eps-insensitive head"))),
            },
            "feature_layer" => self.feature_layer = config::parse(key, value)?,
            "lambda" => self.lambda = config::parse(key, value)?,
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
            "test_fraction" => self.test_fraction = config::parse(key, value)?,
            "seed" => self.seed = config::parse(key, value)?,
            "height" => self.height = config::parse(key, value)?,
            "width" => self.width = config::parse(key, value)?,
            _ => return Err(config::unknown(key)),
        }
        Ok(())
    }

    /// `head` is applied first since it resets the head parameters.
    fn apply_text(&mut self, text: &str) -> Result<()> {
        let kv = config::parse_kv(text)?;
        for (k, v) in kv.iter().filter(|(k, _)| k == "head") {
            self.set(k, v)?;
        }
        for (k, v) in kv.iter().filter(|(k, _)| k != "head") {
            self.set(k, v)?;
        }
        Ok(())
    }

    fn to_kv(&self) -> Vec<(String, String)> {
        let mut kv: Vec<(String, String)> = match self.head {
            LinearHeadKind::Ridge { reg } => vec![("head".into(), "ridge".into()), ("reg".into(), reg.to_string())],
            LinearHeadKind::EpsInsensitive { eps, c } => vec![
                ("head".into(), "eps-insensitive".into()),
                ("eps".into(), eps.to_string()),
                ("c".into(), c.to_string()),
            ],
        };
        kv.extend([
            ("feature_layer".into(), self.feature_layer.to_string()),
            ("lambda".into(), self.lambda.to_string()),
            ("batch_pairs".into(), self.batch_pairs.to_string()),
            (
                "pairs_per_epoch".into(),
                self.pairs_per_epoch.map_or("auto".to_string(), |n| n.to_string()),
            ),
            ("epochs".into(), self.epochs.to_string()),
            ("lr_start".into(), self.lr_start.to_string()),
            ("lr_end".into(), self.lr_end.to_string()),
            ("momentum".into(), self.momentum.to_string()),
            ("test_fraction".into(), self.test_fraction.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("height".into(), self.height.to_string()),
            ("width".into(), self.width.to_string()),
        ]);
        kv
    }
}

#[derive(Debug, Clone)]
pub struct RegressionOutcome {
    pub params: NetParams,
    pub model: LinearModel,
    pub feature_layer: FeatureLayer,
    pub train_report: RegressionReport,
    pub test_report: RegressionReport,
    pub history: Vec<EpochRecord>,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

fn temperatures(data: &Dataset) -> Result<Vec<f64>> {
    data.records
        .iter()
        .map(|r| {
            r.temperature_c
                .ok_or_else(|| Error::Data(format!("record `{}` has no temperature", r.id)))
        })
        .collect()
}

pub fn predict_regression(
    params: &NetParams,
    model: &LinearModel,
    layer: FeatureLayer,
    images: &[Tensor],
) -> Result<Vec<f64>> {
    images
        .iter()
        .map(|x| Ok(model.predict(&extract_features(params, x, layer)?)))
        .collect()
}

/// Two-stage temperature regression for one scene: pair training with a
/// scalar head and square + ranking loss, then a linear model on features
/// of the trained stream, evaluated on the chronologically later frames.
pub fn train_regression(config: &RegressionConfig, data: &Dataset) -> Result<RegressionOutcome> {
    config.validate()?;
    let all = temperatures(data)?;
    let mut distinct = all.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Data(format!("need at least 2 distinct temperatures, found {}", distinct.len())));
    }
    let split = split_chronological(&data.records, config.test_fraction)?;
    let train = data.select(&split.train);
    let test = data.select(&split.test);
    let y_train = temperatures(&train)?;
    let y_test = temperatures(&test)?;
    let n = y_train.len() as f64;
    let mean = y_train.iter().sum::<f64>() / n;
    let std = (y_train.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std == 0.0 {
        return Err(Error::Data("training temperatures are constant".into()));
    }
    let targets: Vec<Target> = y_train.iter().map(|y| Target::Value((y - mean) / std)).collect();
    let fitted = fit_network(&config.train_config(), &train, &targets)?;

    let layer = config.feature_layer;
    let features = train
        .images
        .iter()
        .map(|x| extract_features(&fitted.params, x, layer))
        .collect::<Result<Vec<_>>>()?;
    let model = match config.head {
        LinearHeadKind::Ridge { reg } => LinearModel::fit_ridge(&features, &y_train, reg)?,
        LinearHeadKind::EpsInsensitive { eps, c } => fit_eps_insensitive(&features, &y_train, eps, c)?,
    };
    let fit_preds: Vec<f64> = features.iter().map(|f| model.predict(f)).collect();
    let test_preds = predict_regression(&fitted.params, &model, layer, &test.images)?;
    Ok(RegressionOutcome {
        train_report: evaluate_regression(&fit_preds, &y_train)?,
        test_report: evaluate_regression(&test_preds, &y_test)?,
        params: fitted.params,
        model,
        feature_layer: layer,
        history: fitted.history,
        train_ids: train.records.iter().map(|r| r.id.clone()).collect(),
        test_ids: test.records.iter().map(|r| r.id.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_validation() {
        let mut c = RegressionConfig::default();
        c.apply_text("head = eps-insensitive\neps = 0.5\nc = 100\nfeature_layer = block3\n").unwrap();
        assert_eq!(c.head, LinearHeadKind::EpsInsensitive { eps: 0.5, c: 100.0 });
        assert_eq!(c.feature_layer, FeatureLayer::Block(2));
        let mut d = RegressionConfig::default();
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
        assert!(d.set("reg", "1").is_err());
        c.feature_layer = FeatureLayer::Block(7);
        assert!(c.validate().is_err());
        let r = RegressionConfig {
            head: LinearHeadKind::Ridge { reg: 0.0 },
            ..RegressionConfig::default()
        };
        assert!(r.validate().is_err());
    }
}
