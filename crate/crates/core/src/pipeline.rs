//! Staged workflow: ingest → tag → train → score → fw → report.
//!
//! Every stage writes its artifacts under `<output_dir>/<genre>/` together
//! with a `.meta.json` sidecar carrying the configuration hash. Later
//! stages refuse prerequisites whose sidecar hash differs from the current
//! configuration, so artifacts can never silently mix runs. No artifact
//! embeds timestamps or machine state: rerunning a stage with unchanged
//! inputs rewrites byte-identical files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::relate_metrics;
use crate::config::{BackendConfig, RunConfig};
use crate::corpus::{
    filter_campaign_windows, ingest_with, Corpus, Genre, IngestOptions, SpeakerId,
};
use crate::error::{Error, Result};
use crate::fightin_words::{corpus_fw, overlap_scores, Side};
use crate::lexicon::{divisive_frequency, top_divisive_terms, FrequencyGroupBy, Lexicon};
use crate::lm::{NgramModel, RemoteBackend, UniformBackend};
use crate::report;
use crate::tagging::{mention_rate, review_queue, tag_mentions, MentionPolicy, MentionRuleSet, RateGroupBy};
use crate::uniqueness::{
    aggregate, read_records, score_corpus, write_records, AggregateDim, PoolPolicy, ScoreOptions,
    UniquenessRecord,
};

/// How many top divisive terms the report lists per speaker.
const TOP_DIVISIVE_TERMS: usize = 10;

/// Sidecar written next to every artifact.
#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    stage: String,
    config_hash: String,
    /// Full canonical configuration, for provenance.
    config: serde_json::Value,
}

/// A validated configuration bound to its output directory.
pub struct Pipeline {
    config: RunConfig,
    hash: String,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Pipeline> {
        config.validate()?;
        let hash = config.config_hash();
        Ok(Pipeline { config, hash })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn config_hash(&self) -> &str {
        &self.hash
    }

    fn genre_dir(&self, genre: Genre) -> PathBuf {
        self.config.output_dir.join(genre.as_str())
    }

    fn corpus_path(&self, genre: Genre) -> PathBuf {
        self.genre_dir(genre).join("corpus.jsonl")
    }

    fn tagged_path(&self, genre: Genre) -> PathBuf {
        self.genre_dir(genre).join("tagged.jsonl")
    }

    fn model_path(&self, genre: Genre) -> PathBuf {
        self.genre_dir(genre).join("model.bin")
    }

    fn records_path(&self, genre: Genre) -> PathBuf {
        self.genre_dir(genre).join("records.jsonl")
    }

    fn reports_dir(&self, genre: Genre) -> PathBuf {
        self.genre_dir(genre).join("reports")
    }

    // ---------- sidecars ----------

    fn meta_path(artifact: &Path) -> PathBuf {
        let mut name = artifact
            .file_name()
            .expect("artifacts have file names")
            .to_os_string();
        name.push(".meta.json");
        artifact.with_file_name(name)
    }

    fn write_meta(&self, artifact: &Path, stage: &str) -> Result<()> {
        let meta = Meta {
            stage: stage.to_string(),
            config_hash: self.hash.clone(),
            config: serde_json::to_value(&self.config)?,
        };
        let path = Self::meta_path(artifact);
        let json = serde_json::to_string_pretty(&meta)?;
        std::fs::write(&path, json + "\n").map_err(Error::write(&path))
    }

    /// Verifies that a prerequisite exists and was produced under the
    /// current configuration.
    fn check_prereq(
        &self,
        stage: &'static str,
        artifact: &Path,
        hint: &'static str,
    ) -> Result<()> {
        let missing = |path: &Path| Error::MissingPrerequisite {
            stage,
            path: path.to_path_buf(),
            hint,
        };
        if !artifact.is_file() {
            return Err(missing(artifact));
        }
        let meta_path = Self::meta_path(artifact);
        if !meta_path.is_file() {
            return Err(missing(&meta_path));
        }
        let text = std::fs::read_to_string(&meta_path).map_err(Error::read(&meta_path))?;
        let meta: Meta = serde_json::from_str(&text)?;
        if meta.config_hash != self.hash {
            return Err(Error::ConfigHashMismatch {
                path: meta_path,
                found: meta.config_hash,
                expected: self.hash.clone(),
            });
        }
        Ok(())
    }

    // ---------- shared loading ----------

    /// The configured pool restricted to speakers present in this corpus
    /// (a speaker can be absent from one genre); fewer than two left is an
    /// error.
    fn genre_pool(&self, corpus: &Corpus) -> Result<Vec<SpeakerId>> {
        let pool: Vec<SpeakerId> = self
            .config
            .pool
            .iter()
            .filter(|id| corpus.speaker(id).is_some())
            .cloned()
            .collect();
        if pool.len() < 2 {
            return Err(Error::PoolTooSmall(pool.len()));
        }
        Ok(pool)
    }

    fn load_artifact(&self, genre: Genre, path: &Path) -> Result<Corpus> {
        let (mut corpus, _) = ingest_with(path, genre, &IngestOptions::default())?;
        let pool = self.genre_pool(&corpus)?;
        corpus.set_pool(&pool)?;
        Ok(corpus)
    }

    fn mention_policy(&self) -> Result<MentionPolicy> {
        let mut confirmed = BTreeSet::new();
        if let Some(path) = &self.config.mention.confirmed_path {
            let file = std::fs::File::open(path).map_err(Error::read(path))?;
            let mut reader = csv::ReaderBuilder::new()
                .comment(Some(b'#'))
                .from_reader(file);
            let headers = reader.headers()?.clone();
            let column = headers.iter().position(|h| h == "sentence_id").ok_or_else(|| {
                Error::BadConfig(format!(
                    "mention.confirmed_path: `{}` has no `sentence_id` column",
                    path.display()
                ))
            })?;
            for row in reader.records() {
                let row = row?;
                if let Some(id) = row.get(column) {
                    confirmed.insert(id.to_string());
                }
            }
        }
        Ok(MentionPolicy { count_possible: self.config.mention.count_possible, confirmed })
    }

    fn genres(&self) -> impl Iterator<Item = Genre> + '_ {
        self.config.corpus.keys().copied()
    }

    // ---------- stages ----------

    /// Reads the raw transcripts, applies the campaign window, fixes the
    /// pool, and writes `corpus.jsonl` per genre.
    pub fn ingest(&self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for (&genre, source) in &self.config.corpus {
            let (mut corpus, _report) = ingest_with(source, genre, &IngestOptions::default())?;
            if genre == Genre::Campaign {
                if let Some(window) = &self.config.campaign_window {
                    corpus = filter_campaign_windows(
                        &corpus,
                        &window.election_days,
                        window.window_days,
                        window.min_cycle_year,
                    )?;
                }
            }
            let pool = self.genre_pool(&corpus)?;
            corpus.set_pool(&pool)?;

            let path = self.corpus_path(genre);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(Error::write(parent))?;
            }
            corpus.emit_to_path(&path)?;
            self.write_meta(&path, "ingest")?;
            written.push(path);
        }
        Ok(written)
    }

    /// Applies the mention rules and writes `tagged.jsonl` plus the manual
    /// review queue per genre.
    pub fn tag(&self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for genre in self.genres() {
            let source = self.corpus_path(genre);
            self.check_prereq("tag", &source, "ingest")?;
            let corpus = self.load_artifact(genre, &source)?;
            let rules = match self.config.rules.get(&genre) {
                Some(path) => MentionRuleSet::load(path)?,
                None => {
                    return Err(Error::BadConfig(format!(
                        "rules.{genre}: no mention rule file configured for this genre"
                    )));
                }
            };
            let tagged = tag_mentions(&corpus, &rules)?;

            let path = self.tagged_path(genre);
            tagged.emit_to_path(&path)?;
            self.write_meta(&path, "tag")?;

            let review_path = self.genre_dir(genre).join("review").join("possible_sentences.csv");
            report::write_review_queue(&review_path, &self.hash, &review_queue(&tagged))?;
            written.push(path);
            written.push(review_path);
        }
        Ok(written)
    }

    /// Trains the n-gram backend on each tagged corpus and writes
    /// `model.bin`. Other backends have nothing to train.
    pub fn train(&self) -> Result<Vec<PathBuf>> {
        let Some(ngram_config) = self.config.backend.ngram_config() else {
            return Err(Error::BadConfig(
                "backend.kind: the train stage applies only to the ngram backend".to_string(),
            ));
        };
        let mut written = Vec::new();
        for genre in self.genres() {
            let source = self.tagged_path(genre);
            self.check_prereq("train", &source, "tag")?;
            let corpus = self.load_artifact(genre, &source)?;
            let mut model = NgramModel::train(&corpus, &ngram_config)?;
            model.set_config_hash(Some(self.hash.clone()));

            let path = self.model_path(genre);
            model.save(&path)?;
            self.write_meta(&path, "train")?;
            written.push(path);
        }
        Ok(written)
    }

    /// Scores every pool sentence with the configured backend and writes
    /// `records.jsonl` per genre.
    pub fn score(&self) -> Result<Vec<PathBuf>> {
        let mut written = Vec::new();
        for genre in self.genres() {
            let source = self.tagged_path(genre);
            self.check_prereq("score", &source, "tag")?;
            let corpus = self.load_artifact(genre, &source)?;
            let pool = self.genre_pool(&corpus)?;
            let policy = PoolPolicy::new(pool)?.with_debate_exclusions(&corpus);
            let options = ScoreOptions {
                window_tokens: self.config.window_tokens,
                jobs: self.config.jobs,
            };

            let records = match &self.config.backend {
                BackendConfig::Ngram { .. } => {
                    let model_path = self.model_path(genre);
                    self.check_prereq("score", &model_path, "train")?;
                    let model = NgramModel::load(&model_path)?;
                    if model.config_hash() != Some(self.hash.as_str()) {
                        return Err(Error::ConfigHashMismatch {
                            path: model_path,
                            found: model.config_hash().unwrap_or("<none>").to_string(),
                            expected: self.hash.clone(),
                        });
                    }
                    score_corpus(&corpus, &model, &policy, &options)?
                }
                BackendConfig::Remote { .. } => {
                    let remote = RemoteBackend::new(
                        self.config.backend.remote_config().expect("remote backend"),
                    );
                    score_corpus(&corpus, &remote, &policy, &options)?
                }
                BackendConfig::Uniform { vocab_size } => {
                    let uniform = UniformBackend::new(*vocab_size);
                    score_corpus(&corpus, &uniform, &policy, &options)?
                }
            };

            let path = self.records_path(genre);
            let file = std::fs::File::create(&path).map_err(Error::write(&path))?;
            write_records(std::io::BufWriter::new(file), &records)?;
            self.write_meta(&path, "score")?;
            written.push(path);
        }
        Ok(written)
    }

    /// Computes mention-association scores and the overlap metric, writing
    /// `reports/fw_scores.csv` and `reports/fw_overlap.csv` per genre.
    pub fn fw(&self) -> Result<Vec<PathBuf>> {
        let policy = self.mention_policy()?;
        let filter = self.config.fw.token_filter();
        let mut written = Vec::new();
        for genre in self.genres() {
            let source = self.tagged_path(genre);
            self.check_prereq("fw", &source, "tag")?;
            let corpus = self.load_artifact(genre, &source)?;
            let results = corpus_fw(
                &corpus,
                &policy,
                &filter,
                self.config.fw.prior_scale,
                self.config.jobs,
            )?;

            let scores_path = self.reports_dir(genre).join("fw_scores.csv");
            report::write_fw_scores(&scores_path, &self.hash, &results, self.config.fw.top_n)?;

            let mut overlap = overlap_scores(&results, Side::Y, self.config.fw.top_n)?;
            overlap.extend(overlap_scores(&results, Side::N, self.config.fw.top_n)?);
            let overlap_path = self.reports_dir(genre).join("fw_overlap.csv");
            report::write_fw_overlap(&overlap_path, &self.hash, &overlap)?;

            written.push(scores_path);
            written.push(overlap_path);
        }
        Ok(written)
    }

    /// Emits every remaining per-figure CSV from the tagged corpus and the
    /// scored records.
    pub fn report(&self) -> Result<Vec<PathBuf>> {
        let policy = self.mention_policy()?;
        let loaded_lexicon;
        let lexicon: &Lexicon = match &self.config.lexicon_path {
            Some(path) => {
                loaded_lexicon = Lexicon::load(path)?;
                &loaded_lexicon
            }
            None => Lexicon::bundled(),
        };
        let ci = self.config.ci.to_method(self.config.seed);

        let mut written = Vec::new();
        for genre in self.genres() {
            let tagged = self.tagged_path(genre);
            self.check_prereq("report", &tagged, "tag")?;
            let corpus = self.load_artifact(genre, &tagged)?;

            let records_path = self.records_path(genre);
            self.check_prereq("report", &records_path, "score")?;
            let file = std::fs::File::open(&records_path).map_err(Error::read(&records_path))?;
            let records = read_records(
                std::io::BufReader::new(file),
                &records_path.display().to_string(),
            )?;

            let dir = self.reports_dir(genre);
            let mut emit = |name: &str, write: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
                let path = dir.join(name);
                write(&path)?;
                written.push(path);
                Ok(())
            };

            emit("sent_lens.csv", &|p| {
                report::write_sentence_lengths(p, &self.hash, &corpus)
            })?;

            let dims: [(&str, AggregateDim); 6] = [
                ("uniq_by_speaker.csv", AggregateDim::Speaker),
                (
                    "uniq_by_party.csv",
                    AggregateDim::Party { focal: self.config.focal_speaker.clone() },
                ),
                ("uniq_by_length.csv", AggregateDim::LengthBin),
                ("uniq_by_year.csv", AggregateDim::Year),
                ("uniq_by_term.csv", AggregateDim::Term),
                ("uniq_by_decile.csv", AggregateDim::Decile),
            ];
            for (name, dim) in &dims {
                let rows = aggregate(&records, &corpus, dim, ci)?;
                emit(name, &|p| report::write_aggregate(p, &self.hash, &rows))?;
            }

            let freq_tables = [
                ("divisive_freq.csv", FrequencyGroupBy::Speaker),
                ("divisive_by_year.csv", FrequencyGroupBy::Year),
                ("divisive_heatmap.csv", FrequencyGroupBy::Term),
            ];
            for (name, group_by) in freq_tables {
                let rows = divisive_frequency(&corpus, lexicon, group_by);
                emit(name, &|p| report::write_frequency(p, &self.hash, &rows))?;
            }

            let top_terms: Vec<(SpeakerId, Vec<(String, usize)>)> = corpus
                .pool_speakers()
                .map(|sp| {
                    (
                        sp.id.clone(),
                        top_divisive_terms(&corpus, lexicon, &sp.id, TOP_DIVISIVE_TERMS),
                    )
                })
                .collect();
            emit("top_divisive.csv", &|p| {
                report::write_top_divisive(p, &self.hash, &top_terms)
            })?;

            let rates = mention_rate(&corpus, RateGroupBy::Speaker, &policy);
            emit("mention_rates.csv", &|p| {
                report::write_mention_rates(p, &self.hash, &rates)
            })?;

            let sent_uniq: std::collections::HashMap<String, f64> = records
                .iter()
                .map(|r: &UniquenessRecord| (r.sentence_id.clone(), r.sent_uniq))
                .collect();
            let tables = relate_metrics(&corpus, lexicon, &sent_uniq, &policy, ci);
            emit("corr_matrix.csv", &|p| {
                report::write_correlations(p, &self.hash, &tables.correlations)
            })?;
            emit("cross_metrics.csv", &|p| {
                report::write_group_means(p, &self.hash, &tables)
            })?;
        }
        Ok(written)
    }

    /// Runs every stage in order (skipping `train` for backends with
    /// nothing to train) and returns all written artifacts.
    pub fn run_all(&self) -> Result<Vec<PathBuf>> {
        let mut written = self.ingest()?;
        written.extend(self.tag()?);
        if self.config.backend.ngram_config().is_some() {
            written.extend(self.train()?);
        }
        written.extend(self.score()?);
        written.extend(self.fw()?);
        written.extend(self.report()?);
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CiConfig, FwSettings, MentionConfig};
    use std::collections::BTreeMap;

    fn write_fixture_corpus(path: &Path) {
        let rows = [
            r#"{"doc_id":"d1","genre":"debate","date":"2020-09-29","title":"First debate","speaker":"Alice Smith","party":"D","seq":0,"text":"You are dishonest and everyone knows it. Our hopeful plan funds schools."}"#,
            r#"{"doc_id":"d1","genre":"debate","date":"2020-09-29","title":"First debate","speaker":"Bob Jones","party":"R","seq":1,"text":"Alice is wrong again. We will cut taxes for families."}"#,
            r#"{"doc_id":"d1","genre":"debate","date":"2020-09-29","title":"First debate","speaker":"Alice Smith","party":"D","seq":2,"text":"That tax plan is a stupid giveaway. Voters deserve honest answers."}"#,
            r#"{"doc_id":"d1","genre":"debate","date":"2020-09-29","title":"First debate","speaker":"Bob Jones","party":"R","seq":3,"text":"You call everything stupid. Families want lower taxes now."}"#,
            r#"{"doc_id":"d2","genre":"debate","date":"2020-10-22","title":"Second debate","speaker":"Alice Smith","party":"D","seq":0,"text":"Schools need funding and honest budgets. You dodge every question."}"#,
            r#"{"doc_id":"d2","genre":"debate","date":"2020-10-22","title":"Second debate","speaker":"Bob Jones","party":"R","seq":1,"text":"Alice dodges her own record. Lower taxes help every family."}"#,
            r#"{"doc_id":"d3","genre":"debate","date":"2020-10-07","title":"Running mates","speaker":"Carol White","party":"R","seq":0,"text":"You twist every number, Bob. Honest budgets demand honest math."}"#,
            r#"{"doc_id":"d3","genre":"debate","date":"2020-10-07","title":"Running mates","speaker":"Bob Jones","party":"R","seq":1,"text":"Carol exaggerates the gap. Our plan adds up for families."}"#,
        ];
        std::fs::write(path, rows.join("\n")).unwrap();
    }

    fn write_fixture_rules(path: &Path) {
        let rules = serde_json::json!({
            "genre": "debate",
            "party_keywords": [],
            "ambiguity_triggers": ["you", "your"],
            "opponent_patterns": {
                "alice_smith": ["bob", "jones"],
                "bob_jones": ["alice", "smith", "carol", "white"],
                "carol_white": ["bob", "jones"]
            }
        });
        std::fs::write(path, serde_json::to_string_pretty(&rules).unwrap()).unwrap();
    }

    fn fixture_config(dir: &Path) -> RunConfig {
        let corpus_path = dir.join("debates.jsonl");
        let rules_path = dir.join("debate_rules.json");
        write_fixture_corpus(&corpus_path);
        write_fixture_rules(&rules_path);
        RunConfig {
            corpus: BTreeMap::from([(Genre::Debate, corpus_path)]),
            rules: BTreeMap::from([(Genre::Debate, rules_path)]),
            pool: vec![
                SpeakerId::new("alice_smith"),
                SpeakerId::new("bob_jones"),
                SpeakerId::new("carol_white"),
            ],
            focal_speaker: None,
            backend: BackendConfig::Ngram { order: 2, add_k: 0.01, lambdas: Some(vec![0.4, 0.6]) },
            window_tokens: 64,
            lexicon_path: None,
            output_dir: dir.join("out"),
            seed: 1,
            jobs: 2,
            campaign_window: None,
            mention: MentionConfig { count_possible: true, confirmed_path: None },
            fw: FwSettings { prior_scale: 500.0, top_n: 5, pos_tags: Vec::new() },
            ci: CiConfig::Normal,
        }
    }

    fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
        let mut files = BTreeMap::new();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    let bytes = std::fs::read(&path).unwrap();
                    files.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
                }
            }
        }
        files
    }

    #[test]
    fn full_pipeline_writes_all_artifacts_and_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let config = fixture_config(dir.path());
        let pipeline = Pipeline::new(config).unwrap();

        let written = pipeline.run_all().unwrap();
        assert!(!written.is_empty());
        let out = dir.path().join("out").join("debate");
        for name in ["corpus.jsonl", "tagged.jsonl", "model.bin", "records.jsonl"] {
            assert!(out.join(name).is_file(), "missing {name}");
            assert!(
                out.join(format!("{name}.meta.json")).is_file(),
                "missing sidecar for {name}"
            );
        }
        for name in [
            "fw_scores.csv",
            "fw_overlap.csv",
            "sent_lens.csv",
            "uniq_by_speaker.csv",
            "uniq_by_party.csv",
            "uniq_by_length.csv",
            "uniq_by_year.csv",
            "uniq_by_term.csv",
            "uniq_by_decile.csv",
            "divisive_freq.csv",
            "divisive_by_year.csv",
            "divisive_heatmap.csv",
            "top_divisive.csv",
            "mention_rates.csv",
            "corr_matrix.csv",
            "cross_metrics.csv",
        ] {
            assert!(out.join("reports").join(name).is_file(), "missing report {name}");
        }

        let first = snapshot(&dir.path().join("out"));
        pipeline.run_all().unwrap();
        let second = snapshot(&dir.path().join("out"));
        assert_eq!(first, second, "rerun changed artifacts");
    }

    #[test]
    fn stages_refuse_missing_prerequisites() {
        let dir = tempfile::tempdir().unwrap();
        let pipeline = Pipeline::new(fixture_config(dir.path())).unwrap();
        let err = pipeline.tag().unwrap_err();
        assert!(
            matches!(err, Error::MissingPrerequisite { stage: "tag", .. }),
            "got {err:?}"
        );
        let err = pipeline.score().unwrap_err();
        assert!(matches!(err, Error::MissingPrerequisite { stage: "score", .. }));
    }

    #[test]
    fn stages_refuse_other_configs_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let config = fixture_config(dir.path());
        let pipeline = Pipeline::new(config.clone()).unwrap();
        pipeline.ingest().unwrap();

        let mut other = config;
        other.seed += 1;
        let other_pipeline = Pipeline::new(other).unwrap();
        let err = other_pipeline.tag().unwrap_err();
        assert!(matches!(err, Error::ConfigHashMismatch { .. }), "got {err:?}");
    }

    #[test]
    fn train_rejects_untrainable_backends() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fixture_config(dir.path());
        config.backend = BackendConfig::Uniform { vocab_size: 64 };
        let pipeline = Pipeline::new(config).unwrap();
        let err = pipeline.train().unwrap_err();
        assert!(matches!(err, Error::BadConfig(_)));
    }

    #[test]
    fn uniform_backend_pipeline_needs_no_model() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = fixture_config(dir.path());
        config.backend = BackendConfig::Uniform { vocab_size: 64 };
        let pipeline = Pipeline::new(config).unwrap();
        pipeline.run_all().unwrap();
        let out = dir.path().join("out").join("debate");
        assert!(!out.join("model.bin").exists());
        assert!(out.join("records.jsonl").is_file());
    }
}
