//! TSV output helpers. Every file gets a header row and a trailing
//! newline, floats print in shortest-roundtrip form, and empty cells are
//! spelled "n/a", so all reports are parseable and byte-reproducible.

use std::path::Path;

pub fn write_tsv(path: &Path, header: &str, rows: &[String]) -> std::io::Result<()> {
    let mut out = String::with_capacity(header.len() + rows.iter().map(|r| r.len() + 1).sum::<usize>() + 1);
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(r);
        out.push('\n');
    }
    std::fs::write(path, out)
}

pub fn fmt_opt(x: Option<f64>) -> String {
    match x {
        Some(v) => v.to_string(),
        None => "n/a".to_string(),
    }
}

/// Epoch logs as written to disk. Wall-clock time is deliberately not a
/// column: log files must be identical across reruns of the same seed.
pub const EPOCH_HEADER: &str = "epoch\tlr\ttrain_loss\tdev_ppl";

pub fn epoch_rows(logs: &[cslm_core::training::EpochLog]) -> Vec<String> {
    logs.iter()
        .map(|l| format!("{}\t{}\t{}\t{}", l.epoch, l.lr, l.train_loss, l.dev_ppl))
        .collect()
}

pub const ROUND_HEADER: &str = "round\tmean_reward\tbaseline\tdisc_accuracy";

pub fn round_rows(rounds: &[cslm_core::seqgan::GanRoundLog]) -> Vec<String> {
    rounds
        .iter()
        .map(|r| {
            format!(
                "{}\t{}\t{}\t{}",
                r.round,
                r.mean_reward,
                r.baseline,
                fmt_opt(r.disc_accuracy)
            )
        })
        .collect()
}
