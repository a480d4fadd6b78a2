//! CSV report emitters, one file per figure or table.
//!
//! Every file starts with a `# config_hash=…` comment so a table can be
//! traced back to the exact configuration that produced it, followed by a
//! regular CSV header and rows. All emitters are deterministic: given the
//! same inputs they produce byte-identical files, which the pipeline's
//! idempotence guarantee (and its tests) rely on.

use std::io::Write as _;
use std::path::Path;

use crate::analysis::{CrossTables, MetricCorrelation};
use crate::corpus::{Corpus, SpeakerId};
use crate::error::{Error, Result};
use crate::fightin_words::{top_n, OverlapScore, SpeakerFw};
use crate::lexicon::FrequencyRow;
use crate::stats::Ci;
use crate::tagging::MentionRate;
use crate::uniqueness::AggregateRow;

/// Creates the file (and parents), writes the provenance comment, and
/// hands back a CSV writer positioned at the header row.
fn start_csv(path: &Path, config_hash: &str) -> Result<csv::Writer<std::fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(Error::write(path))?;
        }
    }
    let mut file = std::fs::File::create(path).map_err(Error::write(path))?;
    writeln!(file, "# config_hash={config_hash}").map_err(Error::write(path))?;
    Ok(csv::Writer::from_writer(file))
}

/// Shortest-roundtrip decimal form; deterministic for a given value.
fn num(x: f64) -> String {
    format!("{x}")
}

fn finish(mut writer: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    writer.flush().map_err(Error::write(path))?;
    Ok(())
}

/// Per-speaker sentence-length histogram: `speaker,words,sentences`.
pub fn write_sentence_lengths(path: &Path, config_hash: &str, corpus: &Corpus) -> Result<()> {
    let mut counts: std::collections::BTreeMap<(String, usize), usize> =
        std::collections::BTreeMap::new();
    for sentence in corpus.sentences() {
        *counts
            .entry((sentence.speaker.to_string(), sentence.word_count))
            .or_insert(0) += 1;
    }
    let mut w = start_csv(path, config_hash)?;
    w.write_record(["speaker", "words", "sentences"])?;
    for ((speaker, words), sentences) in counts {
        w.write_record([speaker, words.to_string(), sentences.to_string()])?;
    }
    finish(w, path)
}

fn write_ci_fields(w: &mut csv::Writer<std::fs::File>, prefix: &[String], ci: &Ci) -> Result<()> {
    let mut record: Vec<String> = prefix.to_vec();
    record.extend([ci.n.to_string(), num(ci.mean), num(ci.lo), num(ci.hi)]);
    w.write_record(&record)?;
    Ok(())
}

/// Aggregated uniqueness rows: `group,n,mean,lo,hi`.
pub fn write_aggregate(path: &Path, config_hash: &str, rows: &[AggregateRow]) -> Result<()> {
    let mut w = start_csv(path, config_hash)?;
    w.write_record(["group", "n", "mean", "lo", "hi"])?;
    for row in rows {
        write_ci_fields(&mut w, &[row.group.clone()], &row.ci)?;
    }
    finish(w, path)
}

/// Divisive-term frequency rows: `group,matches,tokens,frequency`.
pub fn write_frequency(path: &Path, config_hash: &str, rows: &[FrequencyRow]) -> Result<()> {
    let mut w = start_csv(path, config_hash)?;
    w.write_record(["group", "matches", "tokens", "frequency"])?;
    for row in rows {
        w.write_record([
            row.group.clone(),
            row.matches.to_string(),
            row.tokens.to_string(),
            num(row.frequency),
        ])?;
    }
    finish(w, path)
}

/// Per-speaker top divisive terms: `speaker,term,count`, most frequent
/// first within each speaker.
pub fn write_top_divisive(
    path: &Path,
    config_hash: &str,
    rows: &[(SpeakerId, Vec<(String, usize)>)],
) -> Result<()> {
    let mut w = start_csv(path, config_hash)?;
    w.write_record(["speaker", "term", "count"])?;
    for (speaker, terms) in rows {
        for (term, count) in terms {
            w.write_record([speaker.to_string(), term.clone(), count.to_string()])?;
        }
    }
    finish(w, path)
}

/// Mention rates: `group,mentions,total,rate`.
pub fn write_mention_rates(path: &Path, config_hash: &str, rows: &[MentionRate]) -> Result<()> {
    let mut w = start_csv(path, config_hash)?;
    w.write_record(["group", "mentions", "total", "rate"])?;
    for row in rows {
        w.write_record([
            row.group.clone(),
            row.mentions.to_string(),
            row.total.to_string(),
            num(row.rate),
        ])?;
    }
    finish(w, path)
}

/// Top association words per speaker and side: `speaker,side,word,zscore`,
/// strongest first within each (speaker, side).
pub fn write_fw_scores(
    path: &Path,
    config_hash: &str,
    results: &[SpeakerFw],
    n: usize,
) -> Result<()> {
    let mut w = start_csv(path, config_hash)?;
    w.write_record(["speaker", "side", "word", "zscore"])?;
    for fw in results {
        for result in [&fw.y, &fw.n] {
            for word in top_n(result, n).words {
                let z = result.zscores[&word];
                w.write_record([
                    result.speaker.to_string(),
                    result.side.to_string(),
                    word,
                    num(z),
                ])?;
            }
        }
    }
    finish(w, path)
}

/// Overlap-metric rows: `speaker,side,n,score`.
pub fn write_fw_overlap(path: &Path, config_hash: &str, rows: &[OverlapScore]) -> Result<()> {
    let mut w = start_csv(path, config_hash)?;
    w.write_record(["speaker", "side", "n", "score"])?;
    for row in rows {
        w.write_record([
            row.speaker.to_string(),
            row.side.to_string(),
            row.n.to_string(),
            num(row.score),
        ])?;
    }
    finish(w, path)
}

/// Pairwise metric correlations: `metric_a,metric_b,n,rho,p`; undefined
/// correlations render as `NA`.
pub fn write_correlations(
    path: &Path,
    config_hash: &str,
    rows: &[MetricCorrelation],
) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), num);
    let mut w = start_csv(path, config_hash)?;
    w.write_record(["metric_a", "metric_b", "n", "rho", "p"])?;
    for row in rows {
        w.write_record([
            row.metric_a.clone(),
            row.metric_b.clone(),
            row.n.to_string(),
            opt(row.rho),
            opt(row.p),
        ])?;
    }
    finish(w, path)
}

/// Stratified uniqueness means: `dimension,group,n,mean,lo,hi`.
pub fn write_group_means(path: &Path, config_hash: &str, tables: &CrossTables) -> Result<()> {
    let mut w = start_csv(path, config_hash)?;
    w.write_record(["dimension", "group", "n", "mean", "lo", "hi"])?;
    for row in &tables.group_means {
        write_ci_fields(&mut w, &[row.dimension.clone(), row.group.clone()], &row.ci)?;
    }
    finish(w, path)
}

/// Sentences queued for manual mention review: `sentence_id,text`.
pub fn write_review_queue(
    path: &Path,
    config_hash: &str,
    rows: &[(String, String)],
) -> Result<()> {
    let mut w = start_csv(path, config_hash)?;
    w.write_record(["sentence_id", "text"])?;
    for (sentence_id, text) in rows {
        w.write_record([sentence_id, text])?;
    }
    finish(w, path)
}
