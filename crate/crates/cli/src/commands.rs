use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::path::Path;
use std::process::ExitCode;

use chrono::NaiveDate;
use serde_json::json;
use sosnet::catalog::{
    generate, load_catalog, load_image, split_chronological, split_easy, split_hard, Dataset, HardSelection,
    ImageRecord, SplitMode, SynthConfig, SynthTask,
};
use sosnet::config::KvConfig;
use sosnet::engine::{
    evaluate_classification, evaluate_regression, history_text, predict_regression, summary_json, train_regression, LinearModel, RegressionConfig, TrainConfig,
};
use sosnet::network::{
    checkpoint, grad_check, init_params, ArchConfig, Batch, FeatureLayer, GradCheckSettings, HeadKind, Init,
    LossSpec, PairSample, SingleSample, Target,
};
use sosnet::pairing::{enumerate_pairs, pair_counts_per_camera, EnumerateOptions, PairConstraint};
use sosnet::solar::{solar_event, EventKind, GeoPoint};
use sosnet::{Error, Result};

use crate::{
    EvalArgs, GradcheckArgs, PairsArgs, PredictArgs, SolarArgs, SplitArgs, SynthArgs, TempEvalArgs, TempTrainArgs,
    TrainArgs, TrainFlags,
};

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn log_config(what: &str, kv: &[(String, String)]) {
    eprintln!("# {what} config");
    for (k, v) in kv {
        eprintln!("#   {k}={v}");
    }
}

fn read_ids(path: &Path) -> Result<HashSet<String>> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

/// Loads a catalog (reporting rejected rows) and keeps the listed ids.
fn load_records(catalog: &Path, ids: Option<&Path>) -> Result<Vec<ImageRecord>> {
    let loaded = load_catalog(catalog)?;
    for r in &loaded.rejections {
        eprintln!("warning: {}: rejected {r}", catalog.display());
    }
    let records = match ids {
        Some(path) => {
            let wanted = read_ids(path)?;
            let known: HashSet<&str> = loaded.records.iter().map(|r| r.id.as_str()).collect();
            if let Some(missing) = wanted.iter().find(|id| !known.contains(id.as_str())) {
                return Err(Error::Catalog(format!(
                    "id `{missing}` from {} is not in the catalog",
                    path.display()
                )));
            }
            loaded.records.into_iter().filter(|r| wanted.contains(&r.id)).collect()
        }
        None => loaded.records,
    };
    if records.is_empty() {
        return Err(Error::Catalog("no records selected".into()));
    }
    Ok(records)
}

pub fn solar(a: SolarArgs) -> Result<ExitCode> {
    let date = NaiveDate::parse_from_str(&a.date, "%Y-%m-%d")
        .map_err(|e| Error::InvalidArgument(format!("date `{}`: {e}", a.date)))?;
    let geo = GeoPoint::new(a.lat, a.lon)?;
    let kind: EventKind = a.kind.parse()?;
    println!("{}", solar_event(geo, date, kind, a.zenith));
    Ok(ExitCode::SUCCESS)
}

pub fn synth(a: SynthArgs) -> Result<ExitCode> {
    let mut config = SynthConfig::default();
    if let Some(path) = &a.config {
        config.apply_text(&read_text(path)?)?;
    }
    for o in &a.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate()?;
    log_config("synth", &config.to_kv());
    let records = sosnet::catalog::gen_synthetic(&config, &a.out)?;
    println!("wrote {} records to {}", records.len(), a.out.join("catalog.csv").display());
    Ok(ExitCode::SUCCESS)
}

pub fn split(a: SplitArgs) -> Result<ExitCode> {
    let records = load_records(&a.catalog, None)?;
    let mode: SplitMode = a.mode.parse()?;
    eprintln!("# split mode={mode} seed={} fraction={}", a.seed, a.fraction);
    let split = match mode {
        SplitMode::Easy => split_easy(&records, a.fraction, a.seed)?,
        SplitMode::Chronological => split_chronological(&records, a.fraction)?,
        SplitMode::Hard => {
            let selection = match (a.test_cameras.is_empty(), a.n_test_cameras) {
                (false, None) => HardSelection::Explicit(a.test_cameras.iter().cloned().collect::<BTreeSet<_>>()),
                (true, Some(n)) => HardSelection::Random {
                    n_test_cameras: n,
                    seed: a.seed,
                },
                _ => {
                    return Err(Error::InvalidArgument(
                        "hard mode needs exactly one of --test-cameras or --n-test-cameras".into(),
                    ))
                }
            };
            split_hard(&records, &selection)?
        }
    };
    create_dir(&a.out)?;
    let lines = |ids: Vec<&str>| ids.iter().map(|id| format!("{id}\n")).collect::<String>();
    write_text(&a.out.join("train_ids.txt"), &lines(split.train_ids()))?;
    write_text(&a.out.join("test_ids.txt"), &lines(split.test_ids()))?;
    let cams = |rs: &[ImageRecord]| rs.iter().map(|r| r.camera_id.as_str()).collect::<BTreeSet<_>>().len();
    println!("train={} test={} train_cameras={} test_cameras={}", split.train.len(), split.test.len(), cams(&split.train), cams(&split.test));
    Ok(ExitCode::SUCCESS)
}

pub fn pairs(a: PairsArgs) -> Result<ExitCode> {
    let records = load_records(&a.catalog, a.ids.as_deref())?;
    let constraint: PairConstraint = a.constraint.parse()?;
    eprintln!("# pairs constraint={constraint} max_pairs={:?} seed={}", a.max_pairs, a.seed);
    if a.counts {
        let counts = pair_counts_per_camera(&records, &constraint);
        for (camera, n) in &counts {
            println!("{camera} {n}");
        }
        println!("total {}", counts.values().sum::<usize>());
        return Ok(ExitCode::SUCCESS);
    }
    let pairs = enumerate_pairs(
        &records,
        &constraint,
        EnumerateOptions {
            max_pairs: a.max_pairs,
            seed: a.seed,
        },
    )?;
    for p in &pairs {
        println!("{},{}", p.x_r(&records).id, p.x_s(&records).id);
    }
    Ok(ExitCode::SUCCESS)
}

fn train_config(flags: &TrainFlags) -> Result<TrainConfig> {
    let mut config = TrainConfig::default();
    if let Some(path) = &flags.config {
        config.apply_text(&read_text(path)?)?;
    }
    if let Some(m) = &flags.method {
        config.set("method", m)?;
    }
    let entries: [(&str, Option<String>); 15] = [
        ("loss", flags.loss.clone()),
        ("lambda", flags.lambda.map(|v| v.to_string())),
        ("margin", flags.margin.map(|v| v.to_string())),
        ("pair_constraint", flags.pair_constraint.clone()),
        ("batch_pairs", flags.batch_pairs.map(|v| v.to_string())),
        ("pairs_per_epoch", flags.pairs_per_epoch.clone()),
        ("epochs", flags.epochs.map(|v| v.to_string())),
        ("lr_start", flags.lr_start.map(|v| v.to_string())),
        ("lr_end", flags.lr_end.map(|v| v.to_string())),
        ("momentum", flags.momentum.map(|v| v.to_string())),
        ("seed", flags.seed.map(|v| v.to_string())),
        ("height", flags.height.map(|v| v.to_string())),
        ("width", flags.width.map(|v| v.to_string())),
        ("readout_reg", flags.readout_reg.map(|v| v.to_string())),
        ("track_accuracy", flags.track_accuracy.map(|v| v.to_string())),
    ];
    for (k, v) in entries {
        if let Some(v) = v {
            config.set(k, &v)?;
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn train(a: TrainArgs) -> Result<ExitCode> {
    let config = train_config(&a.flags)?;
    log_config("train", &config.to_kv());
    let records = load_records(&a.catalog, a.train_ids.as_deref())?;
    let data = Dataset::load(records)?;
    let outcome = sosnet::engine::train(&config, &data)?;
    create_dir(&a.out)?;
    checkpoint::save(&a.out.join("model.ckpt"), &outcome.params)?;
    write_text(&a.out.join("history.txt"), &history_text(&outcome.history))?;
    let last = outcome.history.last().expect("at least one epoch");
    let summary = json!({
        "method": config.method.to_string(),
        "config": config,
        "n_train": data.len(),
        "final_loss": last.loss.total,
        "final_train_macc": last.train_macc,
        "history": outcome.history,
    });
    write_text(&a.out.join("summary.json"), &summary_json(&summary)?)?;
    match last.train_macc {
        Some(m) => println!("epochs={} final_loss={} train_macc={m}", outcome.history.len(), last.loss.total),
        None => println!("epochs={} final_loss={}", outcome.history.len(), last.loss.total),
    }
    Ok(ExitCode::SUCCESS)
}

pub fn eval(a: EvalArgs) -> Result<ExitCode> {
    let params = checkpoint::load(&a.checkpoint)?;
    let records: Vec<ImageRecord> = load_records(&a.catalog, a.ids.as_deref())?
        .into_iter()
        .filter(|r| r.label.is_some())
        .collect();
    eprintln!("# eval checkpoint={} records={}", a.checkpoint.display(), records.len());
    let data = Dataset::load(records)?;
    let report = evaluate_classification(&params, &data)?;
    for c in &report.per_class {
        println!("{} acc={:.2} ({}/{})", c.label, c.acc, c.correct, c.total);
    }
    println!("mAcc={:.2}", report.m_acc);
    if let Some(path) = &a.report {
        write_text(path, &summary_json(&report)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn predict(a: PredictArgs) -> Result<ExitCode> {
    let params = checkpoint::load(&a.checkpoint)?;
    for path in &a.images {
        let p = sosnet::engine::predict(&params, &load_image(path)?)?;
        println!("{}\t{}\t{:.6}", path.display(), p.label(), p.prob);
    }
    Ok(ExitCode::SUCCESS)
}

fn regression_config(a: &TempTrainArgs) -> Result<RegressionConfig> {
    let mut config = RegressionConfig::default();
    if let Some(path) = &a.config {
        config.apply_text(&read_text(path)?)?;
    }
    if let Some(h) = &a.head {
        config.set("head", h)?;
    }
    let entries: [(&str, Option<String>); 15] = [
        ("reg", a.reg.map(|v| v.to_string())),
        ("eps", a.eps.map(|v| v.to_string())),
        ("c", a.c.map(|v| v.to_string())),
        ("feature_layer", a.feature_layer.clone()),
        ("lambda", a.lambda.map(|v| v.to_string())),
        ("batch_pairs", a.batch_pairs.map(|v| v.to_string())),
        ("pairs_per_epoch", a.pairs_per_epoch.clone()),
        ("epochs", a.epochs.map(|v| v.to_string())),
        ("lr_start", a.lr_start.map(|v| v.to_string())),
        ("lr_end", a.lr_end.map(|v| v.to_string())),
        ("momentum", a.momentum.map(|v| v.to_string())),
        ("test_fraction", a.test_fraction.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("height", a.height.map(|v| v.to_string())),
        ("width", a.width.map(|v| v.to_string())),
    ];
    for (k, v) in entries {
        if let Some(v) = v {
            config.set(k, &v)?;
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn temp_train(a: TempTrainArgs) -> Result<ExitCode> {
    let config = regression_config(&a)?;
    log_config("temp-train", &config.to_kv());
    let records = load_records(&a.catalog, None)?;
    let cameras: BTreeSet<&str> = records.iter().map(|r| r.camera_id.as_str()).collect();
    if cameras.len() != 1 {
        return Err(Error::Data(format!(
            "temp-train fits one scene per run; the catalog holds {} cameras",
            cameras.len()
        )));
    }
    let data = Dataset::load(records)?;
    let outcome = train_regression(&config, &data)?;
    create_dir(&a.out)?;
    checkpoint::save(&a.out.join("model.ckpt"), &outcome.params)?;
    let head = json!({
        "feature_layer": outcome.feature_layer.to_string(),
        "model": outcome.model,
    });
    write_text(&a.out.join("head.json"), &summary_json(&head)?)?;
    write_text(&a.out.join("history.txt"), &history_text(&outcome.history))?;
    let summary = json!({
        "config": config,
        "train": outcome.train_report,
        "test": outcome.test_report,
        "train_ids": outcome.train_ids,
        "test_ids": outcome.test_ids,
    });
    write_text(&a.out.join("summary.json"), &summary_json(&summary)?)?;
    let t = outcome.test_report;
    println!("test r2={:.4} rmse={:.4} n={}", t.r2, t.rmse, t.n);
    Ok(ExitCode::SUCCESS)
}

pub fn temp_eval(a: TempEvalArgs) -> Result<ExitCode> {
    let params = checkpoint::load(&a.checkpoint)?;
    let bad_head = |reason: String| Error::Checkpoint {
        path: a.head.clone(),
        reason,
    };
    let head: serde_json::Value = serde_json::from_str(&read_text(&a.head)?).map_err(|e| bad_head(e.to_string()))?;
    let layer: FeatureLayer = head["feature_layer"]
        .as_str()
        .ok_or_else(|| bad_head("missing feature_layer".into()))?
        .parse()?;
    let model: LinearModel = serde_json::from_value(head["model"].clone()).map_err(|e| bad_head(e.to_string()))?;
    let records = load_records(&a.catalog, a.ids.as_deref())?;
    let targets = records
        .iter()
        .map(|r| {
            r.temperature_c
                .ok_or_else(|| Error::Data(format!("record `{}` has no temperature", r.id)))
        })
        .collect::<Result<Vec<f64>>>()?;
    eprintln!("# temp-eval checkpoint={} records={}", a.checkpoint.display(), records.len());
    let data = Dataset::load(records)?;
    let preds = predict_regression(&params, &model, layer, &data.images)?;
    let r = evaluate_regression(&preds, &targets)?;
    println!("r2={:.4} rmse={:.4} n={}", r.r2, r.rmse, r.n);
    Ok(ExitCode::SUCCESS)
}

/// A small synthetic batch for `loss`: paired sunrise/sunset frames, or
/// temperature frames for the square loss.
fn gradcheck_case(loss: &str, a: &GradcheckArgs) -> Result<(ArchConfig, LossSpec, Vec<sosnet::Tensor>, Vec<Target>)> {
    let n_pairs = a.batch_pairs.max(1);
    let mut synth = SynthConfig {
        n_cameras: 1,
        days_per_camera: n_pairs,
        height: a.size,
        width: a.size,
        cue_strength: 0.2,
        seed: a.seed,
        ..SynthConfig::default()
    };
    let mut arch = ArchConfig::with_input(a.size, a.size);
    let spec = match loss {
        "combined" => LossSpec::Combined { lambda: 1.0 },
        "contrast" => LossSpec::Contrast { margin: 1.0 },
        "softmax" => LossSpec::SoftmaxOnly,
        "square" => {
            arch.head = HeadKind::Regressor;
            synth.task = SynthTask::Temperature;
            synth.days_per_camera = 2 * n_pairs;
            LossSpec::Square
        }
        other => return Err(Error::InvalidArgument(format!("unknown loss `{other}`"))),
    };
    let ds = generate(&synth)?.to_dataset();
    let targets = ds
        .records
        .iter()
        .map(|r| match (r.label, r.temperature_c) {
            (Some(l), _) => Target::Class(l.class_index()),
            (None, Some(t)) => Target::Value(t / 10.0),
            (None, None) => Target::Value(0.0),
        })
        .collect();
    Ok((arch, spec, ds.images, targets))
}

pub fn gradcheck(a: GradcheckArgs) -> Result<ExitCode> {
    let losses: Vec<&str> = match a.loss.as_str() {
        "all" => vec!["combined", "contrast", "softmax", "square"],
        one => vec![one],
    };
    let settings = GradCheckSettings {
        eps: a.eps,
        n_coords: a.coords,
        seed: a.seed,
    };
    if !(1e-6..=1e-3).contains(&a.eps) || a.coords < 200 {
        return Err(Error::InvalidArgument("gradcheck needs eps in [1e-6, 1e-3] and at least 200 coordinates".into()));
    }
    eprintln!("# gradcheck eps={} coords={} size={} seed={}", a.eps, a.coords, a.size, a.seed);
    let mut worst = 0.0f64;
    for loss in losses {
        let (arch, spec, images, targets) = gradcheck_case(loss, &a)?;
        let params = init_params(&arch, Init::FanIn, a.seed)?;
        let batch = match spec {
            LossSpec::Combined { .. } => Batch::Pairs(
                images
                    .chunks_exact(2)
                    .zip(targets.chunks_exact(2))
                    .map(|(x, t)| PairSample {
                        a: &x[0],
                        b: &x[1],
                        target_a: t[0],
                        target_b: t[1],
                    })
                    .collect(),
            ),
            // Alternate different-label (same day) and same-label (next day) pairs.
            LossSpec::Contrast { .. } => Batch::Pairs(
                (0..images.len() / 2)
                    .map(|k| {
                        let i = 2 * k;
                        let j = if k % 2 == 0 { i + 1 } else { (i + 2) % images.len() };
                        PairSample {
                            a: &images[i],
                            b: &images[j],
                            target_a: targets[i],
                            target_b: targets[j],
                        }
                    })
                    .collect(),
            ),
            _ => Batch::Singles(
                images
                    .iter()
                    .zip(&targets)
                    .map(|(x, &t)| SingleSample { x, target: t })
                    .collect(),
            ),
        };
        let r = grad_check(&params, &batch, &spec, &settings)?;
        println!(
            "{loss} max_rel_error={:.3e} checked={} skipped_kinks={}",
            r.max_rel_error, r.checked, r.skipped_kinks
        );
        worst = worst.max(r.max_rel_error);
    }
    if worst < 1e-4 {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: max relative error {worst:.3e} exceeds 1e-4");
        Ok(ExitCode::from(3))
    }
}
