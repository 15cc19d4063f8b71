use serde::Serialize;

use super::train::EpochRecord;
use crate::error::{Error, Result};

/// One `key=value` line per epoch, e.g.
/// `epoch=0 lr=0.001 loss=1.89 softmax_r=0.69 softmax_s=0.69 ranking=0.5 batches=10 examples=160`.
pub fn history_text(history: &[EpochRecord]) -> String {
    let mut out = String::new();
    for r in history {
        out.push_str(&format!("epoch={} lr={} loss={}", r.epoch, r.lr, r.loss.total));
        for (name, v) in &r.loss.components {
            out.push_str(&format!(" {name}={v}"));
        }
        out.push_str(&format!(" batches={} examples={}", r.n_batches, r.n_examples));
        if let Some(m) = r.train_macc {
            out.push_str(&format!(" train_macc={m}"));
        }
        out.push('\n');
    }
    out
}

/// Pretty-printed JSON summary with a trailing newline.
pub fn summary_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::InvalidArgument(format!("cannot serialise summary: {e}")))
}
