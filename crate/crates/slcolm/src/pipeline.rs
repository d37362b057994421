//! End-to-end orchestration: load inputs, select demonstrations and
//! candidate relations per test sample, assemble prompts, query the backend,
//! parse, merge under every configured mode, and score.
//!
//! Every intermediate artifact lands under the output directory:
//!
//! ```text
//! out/
//!   prompts/<sample>.txt        assembled prompt, exact bytes sent
//!   responses/<sample>.json     raw completion plus parsed answer
//!   merged/mode<K>/<sample>.json  fused triples with per-triple source
//!   reports/…                   eval / coverage / long-tail / improvement
//!   manifest.json               config hash, seeds, prompt hashes
//!   stats.json                  volatile counters (cache hits, requests)
//! ```
//!
//! Outputs are a pure function of (config, seeds, cache): a rerun with a
//! warm cache is byte-identical except for the counters in `stats.json`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::candidates::{self, CandidateMode, CandidateSet};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, ImprovementRow, LongTailReport};
use crate::fixture;
use crate::ingest::{self, DatasetStats, DEFAULT_TAIL_THRESHOLD};
use crate::llm::{
    complete_all, prompt_hash, CachedBackend, HttpBackend, HttpBackendConfig, LlmBackend,
    MockScript, ResponseCache, ScriptedBackend,
};
use crate::merge::{merge, worst_relations, MergeMode, MergePolicy, TripleSource};
use crate::parse::parse_llm_output;
use crate::prompt::{assemble, PromptBundle, PromptConfig};
use crate::retrieval::{random_demos, top_n_similar, DemonstrationSet, SimilarityIndex};
use crate::types::{Corpus, Entity, LlmResponse, RelationSchema, Sample, SlmPrediction, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemoSelection {
    Similarity,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    #[serde(default = "default_demo_selection")]
    pub selection: DemoSelection,
    #[serde(default = "default_demo_n")]
    pub n: usize,
    #[serde(default = "default_demo_seed")]
    pub seed: u64,
}

fn default_demo_selection() -> DemoSelection {
    DemoSelection::Similarity
}
fn default_demo_n() -> usize {
    3
}
fn default_demo_seed() -> u64 {
    17
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            selection: default_demo_selection(),
            n: default_demo_n(),
            seed: default_demo_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateConfig {
    #[serde(default = "default_candidate_mode")]
    pub mode: CandidateMode,
}

fn default_candidate_mode() -> CandidateMode {
    CandidateMode::Both
}

impl Default for CandidateConfig {
    fn default() -> Self {
        CandidateConfig {
            mode: default_candidate_mode(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeConfig {
    #[serde(default = "default_merge_modes")]
    pub modes: Vec<MergeMode>,
    #[serde(default = "default_prob_threshold")]
    pub prob_threshold: f64,
    #[serde(default = "default_worst_k")]
    pub worst_k: usize,
}

fn default_merge_modes() -> Vec<MergeMode> {
    vec![MergeMode::WorstSwap]
}
fn default_prob_threshold() -> f64 {
    crate::merge::DEFAULT_PROB_THRESHOLD
}
fn default_worst_k() -> usize {
    crate::merge::DEFAULT_WORST_K
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            modes: default_merge_modes(),
            prob_threshold: default_prob_threshold(),
            worst_k: default_worst_k(),
        }
    }
}

/// Scripted-mock settings: an explicit script file, or a behavior profile
/// that answers gold for the listed relations and garbles the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockSpec {
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub script_path: Option<PathBuf>,
    #[serde(default)]
    pub correct_relations: Option<Vec<String>>,
    #[serde(default)]
    pub max_concurrent: Option<usize>,
}

/// Exactly one backend; mock and HTTP are mutually exclusive by
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Http {
        #[serde(flatten)]
        http: HttpBackendConfig,
        #[serde(default)]
        cache_dir: Option<PathBuf>,
    },
    Mock {
        #[serde(flatten)]
        mock: MockSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus_dir: PathBuf,
    pub predictions_dir: PathBuf,
    pub schema_path: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub prompt: PromptConfig,
    #[serde(default)]
    pub demos: DemoConfig,
    #[serde(default)]
    pub candidates: CandidateConfig,
    #[serde(default)]
    pub merge: MergeConfig,
    pub backend: BackendConfig,
    #[serde(default = "default_tail_threshold")]
    pub tail_threshold: usize,
}

fn default_tail_threshold() -> usize {
    DEFAULT_TAIL_THRESHOLD
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=10).contains(&self.demos.n) {
            return Err(Error::Config(format!(
                "demos.n must be in 1..=10, got {}",
                self.demos.n
            )));
        }
        if self.merge.modes.is_empty() {
            return Err(Error::Config("merge.modes must not be empty".into()));
        }
        if !(0.0..=1.0).contains(&self.merge.prob_threshold) {
            return Err(Error::Config("merge.prob_threshold out of [0, 1]".into()));
        }
        if let BackendConfig::Mock { mock } = &self.backend {
            if mock.script_path.is_some() && mock.correct_relations.is_some() {
                return Err(Error::Config(
                    "mock backend takes script_path or correct_relations, not both".into(),
                ));
            }
            if mock.script_path.is_none() && mock.correct_relations.is_none() {
                return Err(Error::Config(
                    "mock backend needs script_path or correct_relations".into(),
                ));
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

/// Everything loaded and precomputed before the backend is consulted.
pub struct RunContext {
    pub config: RunConfig,
    pub schema: RelationSchema,
    pub corpus: Corpus,
    pub dev_predictions: BTreeMap<String, SlmPrediction>,
    pub test_predictions: BTreeMap<String, SlmPrediction>,
    pub worst: Vec<String>,
    pub worst_warning: Option<String>,
    pub prompts: Vec<PromptBundle>,
    pub candidate_sets: BTreeMap<String, CandidateSet>,
}

fn subset_for(
    all: BTreeMap<String, SlmPrediction>,
    split: &[Sample],
) -> BTreeMap<String, SlmPrediction> {
    let ids: BTreeSet<&str> = split.iter().map(|s| s.id.as_str()).collect();
    all.into_iter()
        .filter(|(id, _)| ids.contains(id.as_str()))
        .collect()
}

/// Load inputs and assemble one prompt per test sample (Algorithm steps
/// before the model call).
pub fn prepare(config: RunConfig) -> Result<RunContext> {
    config.validate()?;
    let schema = ingest::load_schema(&config.schema_path)?;
    let corpus = ingest::load_corpus(&config.corpus_dir, &schema)?;

    let dev_predictions = subset_for(
        ingest::load_slm_predictions(
            config.predictions_dir.join("dev.jsonl"),
            &corpus,
            &schema,
        )?,
        &corpus.dev,
    );
    let test_predictions = subset_for(
        ingest::load_slm_predictions(
            config.predictions_dir.join("test.jsonl"),
            &corpus,
            &schema,
        )?,
        &corpus.test,
    );

    let dev_index = if corpus.dev.is_empty() {
        None
    } else {
        Some(SimilarityIndex::build(&corpus.dev)?)
    };
    let needs_train_index = matches!(
        config.candidates.mode,
        CandidateMode::Similarity | CandidateMode::Both
    );
    let train_index = if needs_train_index && !corpus.train.is_empty() {
        Some(SimilarityIndex::build(&corpus.train)?)
    } else {
        None
    };

    let (worst, worst_warning) = if config.merge.modes.contains(&MergeMode::WorstSwap) {
        let ranked = worst_relations(&dev_predictions, &corpus.dev, config.merge.worst_k)?;
        (ranked.relations, ranked.warning)
    } else {
        (Vec::new(), None)
    };

    let mut prompts = Vec::with_capacity(corpus.test.len());
    let mut candidate_sets = BTreeMap::new();
    for sample in &corpus.test {
        let mut demos = if config.prompt.effective_demos() {
            match (&config.demos.selection, &dev_index) {
                (DemoSelection::Similarity, Some(index)) => {
                    top_n_similar(sample, index, config.demos.n)
                }
                (DemoSelection::Random, _) => {
                    random_demos(sample, &corpus.dev, config.demos.n, config.demos.seed)
                }
                (_, None) => DemonstrationSet {
                    demos: Vec::new(),
                    n: config.demos.n,
                },
            }
        } else {
            DemonstrationSet {
                demos: Vec::new(),
                n: config.demos.n,
            }
        };
        demos.attach_predictions(&dev_predictions);

        let cands = match config.candidates.mode {
            CandidateMode::None => CandidateSet {
                sample_id: sample.id.clone(),
                relations: Vec::new(),
                provenance: BTreeMap::new(),
            },
            mode => candidates::candidate_set(sample, train_index.as_ref(), &schema, mode),
        };

        let slm = test_predictions
            .get(&sample.id)
            .cloned()
            .unwrap_or_else(|| SlmPrediction::empty(&sample.id));
        let bundle = assemble(sample, &demos, &cands, &slm, &config.prompt, &schema)?;
        prompts.push(bundle);
        candidate_sets.insert(sample.id.clone(), cands);
    }

    Ok(RunContext {
        config,
        schema,
        corpus,
        dev_predictions,
        test_predictions,
        worst,
        worst_warning,
        prompts,
        candidate_sets,
    })
}

/// Counting adapter so run stats do not depend on the backend flavor.
struct CountingBackend<'a> {
    inner: &'a dyn LlmBackend,
    calls: AtomicU64,
}

impl LlmBackend for CountingBackend<'_> {
    fn model_name(&self) -> &str {
        self.inner.model_name()
    }
    fn complete(&self, prompt: &PromptBundle) -> Result<String> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(prompt)
    }
    fn network_requests(&self) -> u64 {
        self.inner.network_requests()
    }
}

enum BuiltBackend {
    Mock(ScriptedBackend, usize),
    Http(CachedBackend<HttpBackend>, usize),
    PlainHttp(HttpBackend, usize),
}

impl BuiltBackend {
    fn backend(&self) -> &dyn LlmBackend {
        match self {
            BuiltBackend::Mock(b, _) => b,
            BuiltBackend::Http(b, _) => b,
            BuiltBackend::PlainHttp(b, _) => b,
        }
    }
    fn max_concurrent(&self) -> usize {
        match self {
            BuiltBackend::Mock(_, c) | BuiltBackend::Http(_, c) | BuiltBackend::PlainHttp(_, c) => {
                *c
            }
        }
    }
    fn cache_counts(&self) -> (u64, u64) {
        match self {
            BuiltBackend::Http(b, _) => (b.cache().hits(), b.cache().misses()),
            _ => (0, 0),
        }
    }
}

fn build_backend(ctx: &RunContext) -> Result<BuiltBackend> {
    match &ctx.config.backend {
        BackendConfig::Mock { mock } => {
            let model = mock.model.clone().unwrap_or_else(|| "scripted-mock".into());
            let backend = if let Some(path) = &mock.script_path {
                let script: MockScript = serde_json::from_str(&std::fs::read_to_string(path)?)?;
                ScriptedBackend::new(model, script)
            } else {
                let correct: BTreeSet<String> = mock
                    .correct_relations
                    .clone()
                    .unwrap_or_default()
                    .into_iter()
                    .collect();
                ScriptedBackend::from_profile(model, &ctx.corpus.test, &ctx.schema, &correct)
            };
            Ok(BuiltBackend::Mock(backend, mock.max_concurrent.unwrap_or(4)))
        }
        BackendConfig::Http { http, cache_dir } => {
            let concurrent = http.max_concurrent;
            let backend = HttpBackend::new(http.clone())?;
            match cache_dir {
                Some(dir) => Ok(BuiltBackend::Http(
                    CachedBackend::new(backend, ResponseCache::open(dir)?),
                    concurrent,
                )),
                None => Ok(BuiltBackend::PlainHttp(backend, concurrent)),
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunStats {
    pub llm_calls: u64,
    pub network_requests: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub demo_seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub merge_modes: Vec<MergeMode>,
    pub worst_set: Vec<String>,
    #[serde(default)]
    pub worst_warning: Option<String>,
    /// sample id → SHA-256 of the prompt text.
    pub prompt_hashes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModeOutcome {
    pub mode: MergeMode,
    pub report: EvalReport,
    pub improvement_vs_slm: Vec<ImprovementRow>,
    pub long_tail: LongTailReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub manifest: Manifest,
    pub slm_report: EvalReport,
    pub llm_raw_report: EvalReport,
    pub mode_outcomes: Vec<ModeOutcome>,
    pub coverage: Option<candidates::CoverageReport>,
    pub stats: RunStats,
}

fn safe_file_name(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct MergedTripleRow {
    head: String,
    relation: String,
    tail: String,
    source: TripleSource,
}

#[derive(Debug, Serialize, Deserialize)]
struct MergedArtifact {
    sample_id: String,
    mode: MergeMode,
    triples: Vec<MergedTripleRow>,
}

fn slm_triple_map(
    predictions: &BTreeMap<String, SlmPrediction>,
    split: &[Sample],
) -> BTreeMap<String, BTreeSet<Triple>> {
    split
        .iter()
        .map(|s| {
            let triples = predictions
                .get(&s.id)
                .map(|p| p.plain_triples().into_iter().collect())
                .unwrap_or_default();
            (s.id.clone(), triples)
        })
        .collect()
}

fn slm_entity_map(
    predictions: &BTreeMap<String, SlmPrediction>,
    split: &[Sample],
) -> BTreeMap<String, BTreeSet<Entity>> {
    split
        .iter()
        .map(|s| {
            let entities = predictions
                .get(&s.id)
                .map(|p| p.entities.iter().map(|se| se.entity.clone()).collect())
                .unwrap_or_default();
            (s.id.clone(), entities)
        })
        .collect()
}

/// Score, merge, and write every artifact derived from the responses.
pub fn finalize(ctx: &RunContext, responses: &[LlmResponse], stats: RunStats) -> Result<RunSummary> {
    let out = &ctx.config.output_dir;
    let test = &ctx.corpus.test;

    for response in responses {
        write_json(
            &out.join("responses")
                .join(format!("{}.json", safe_file_name(&response.sample_id))),
            response,
        )?;
    }

    // SLM-only baseline
    let slm_triples = slm_triple_map(&ctx.test_predictions, test);
    let slm_entities = slm_entity_map(&ctx.test_predictions, test);
    let mut slm_report = eval::score_triples(&slm_triples, test)?;
    slm_report.entity_micro = Some(eval::score_entities(&slm_entities, test)?);
    write_json(&out.join("reports/eval_slm.json"), &slm_report)?;
    std::fs::write(out.join("reports/eval_slm.txt"), slm_report.to_table())?;

    // raw LLM output (unmerged)
    let llm_triples: BTreeMap<String, BTreeSet<Triple>> = responses
        .iter()
        .map(|r| (r.sample_id.clone(), r.triples.iter().cloned().collect()))
        .collect();
    let llm_entities: BTreeMap<String, BTreeSet<Entity>> = responses
        .iter()
        .map(|r| (r.sample_id.clone(), r.entities.iter().cloned().collect()))
        .collect();
    let mut llm_raw_report = eval::score_triples(&llm_triples, test)?;
    llm_raw_report.entity_micro = Some(eval::score_entities(&llm_entities, test)?);
    write_json(&out.join("reports/eval_llm_raw.json"), &llm_raw_report)?;

    let stats_for_tail = ingest::compute_stats(&ctx.corpus, ctx.config.tail_threshold);
    let by_id: BTreeMap<&str, &LlmResponse> = responses
        .iter()
        .map(|r| (r.sample_id.as_str(), r))
        .collect();

    let mut mode_outcomes = Vec::new();
    for &mode in &ctx.config.merge.modes {
        let policy = MergePolicy {
            mode,
            prob_threshold: ctx.config.merge.prob_threshold,
            worst_k: ctx.config.merge.worst_k,
            worst_set: ctx.worst.clone(),
        };
        if mode == MergeMode::WorstSwap {
            policy.validate()?;
        }

        let mut merged_map: BTreeMap<String, BTreeSet<Triple>> = BTreeMap::new();
        for sample in test {
            let slm = ctx
                .test_predictions
                .get(&sample.id)
                .cloned()
                .unwrap_or_else(|| SlmPrediction::empty(&sample.id));
            let y_prime: Vec<Triple> = by_id
                .get(sample.id.as_str())
                .map(|r| r.triples.clone())
                .unwrap_or_default();
            let merged = merge(&slm.triples, &y_prime, &policy);

            let artifact = MergedArtifact {
                sample_id: sample.id.clone(),
                mode,
                triples: merged
                    .triples
                    .iter()
                    .map(|t| MergedTripleRow {
                        head: t.head.clone(),
                        relation: t.relation.clone(),
                        tail: t.tail.clone(),
                        source: merged.provenance[t],
                    })
                    .collect(),
            };
            write_json(
                &out.join(format!("merged/mode{}", mode.index()))
                    .join(format!("{}.json", safe_file_name(&sample.id))),
                &artifact,
            )?;
            merged_map.insert(sample.id.clone(), merged.triples);
        }

        // merged predictions carry the SLM's entity set unchanged
        let mut report = eval::score_triples(&merged_map, test)?;
        report.entity_micro = Some(eval::score_entities(&slm_entities, test)?);
        write_json(
            &out.join(format!("reports/eval_mode{}.json", mode.index())),
            &report,
        )?;
        std::fs::write(
            out.join(format!("reports/eval_mode{}.txt", mode.index())),
            report.to_table(),
        )?;

        let improvement = eval::improvement_report(&slm_report, &report, 10);
        write_json(
            &out.join(format!("reports/improvement_mode{}.json", mode.index())),
            &improvement,
        )?;
        let long_tail = eval::long_tail_report(&report, &stats_for_tail);
        write_json(
            &out.join(format!("reports/long_tail_mode{}.json", mode.index())),
            &long_tail,
        )?;

        mode_outcomes.push(ModeOutcome {
            mode,
            report,
            improvement_vs_slm: improvement,
            long_tail,
        });
    }

    // candidate coverage over the test split
    let coverage = if ctx.config.candidates.mode == CandidateMode::None {
        None
    } else if ctx.corpus.train.is_empty() {
        None
    } else {
        let train_index = SimilarityIndex::build(&ctx.corpus.train)?;
        let report = candidates::coverage_report(test, &train_index, &ctx.schema)?;
        write_json(&out.join("reports/coverage.json"), &report)?;
        Some(report)
    };

    let manifest = Manifest {
        config_hash: ctx.config.hash(),
        demo_seed: ctx.config.demos.seed,
        n_train: ctx.corpus.train.len(),
        n_dev: ctx.corpus.dev.len(),
        n_test: ctx.corpus.test.len(),
        merge_modes: ctx.config.merge.modes.clone(),
        worst_set: ctx.worst.clone(),
        worst_warning: ctx.worst_warning.clone(),
        prompt_hashes: ctx
            .prompts
            .iter()
            .map(|p| (p.sample_id.clone(), prompt_hash(&p.text)))
            .collect(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    write_json(&out.join("stats.json"), &stats)?;

    Ok(RunSummary {
        manifest,
        slm_report,
        llm_raw_report,
        mode_outcomes,
        coverage,
        stats,
    })
}

fn write_prompts(ctx: &RunContext) -> Result<()> {
    let dir = ctx.config.output_dir.join("prompts");
    std::fs::create_dir_all(&dir)?;
    for prompt in &ctx.prompts {
        std::fs::write(
            dir.join(format!("{}.txt", safe_file_name(&prompt.sample_id))),
            &prompt.text,
        )?;
    }
    Ok(())
}

/// Full pipeline: prepare, query the backend, parse, merge, score.
pub fn run(config: RunConfig) -> Result<RunSummary> {
    let ctx = prepare(config)?;
    write_prompts(&ctx)?;

    let built = build_backend(&ctx)?;
    let counting = CountingBackend {
        inner: built.backend(),
        calls: AtomicU64::new(0),
    };
    let raw = complete_all(&counting, &ctx.prompts, built.max_concurrent())?;
    let responses: Vec<LlmResponse> = ctx
        .prompts
        .iter()
        .zip(raw.iter())
        .map(|(prompt, text)| parse_llm_output(&prompt.sample_id, text, &ctx.schema))
        .collect();

    let (cache_hits, cache_misses) = built.cache_counts();
    let stats = RunStats {
        llm_calls: counting.calls.load(Ordering::SeqCst),
        network_requests: built.backend().network_requests(),
        cache_hits,
        cache_misses,
    };
    finalize(&ctx, &responses, stats)
}

/// Rebuild merged predictions and reports from the response artifacts of a
/// previous run; no backend is consulted.
pub fn regenerate(config: RunConfig) -> Result<RunSummary> {
    let ctx = prepare(config)?;
    let dir = ctx.config.output_dir.join("responses");
    let mut responses = Vec::with_capacity(ctx.corpus.test.len());
    for sample in &ctx.corpus.test {
        let path = dir.join(format!("{}.json", safe_file_name(&sample.id)));
        let text = std::fs::read_to_string(&path).map_err(|e| {
            Error::Config(format!(
                "missing response artifact {} ({e}); run the pipeline first",
                path.display()
            ))
        })?;
        responses.push(serde_json::from_str::<LlmResponse>(&text)?);
    }
    let stats = RunStats {
        llm_calls: 0,
        network_requests: 0,
        cache_hits: 0,
        cache_misses: 0,
    };
    finalize(&ctx, &responses, stats)
}

/// The four prompt-component combinations of the ablation grid, in order:
/// none, demos only, demos+ref, demos+ref+defs.
pub const ABLATION_GRID: [(bool, bool, bool); 4] = [
    (false, false, false),
    (true, false, false),
    (true, true, false),
    (true, true, true),
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationCell {
    pub id: usize,
    pub demos: bool,
    pub slm_ref: bool,
    pub defs: bool,
    pub llm_raw_report: EvalReport,
    pub prompt_hashes: BTreeMap<String, String>,
}

/// Run the ablation grid over prompt components. Raw LLM outputs are scored
/// without merging. Distinct combinations must produce distinct prompts for
/// every sample; that is asserted here.
pub fn ablate(base: RunConfig) -> Result<Vec<AblationCell>> {
    let mut cells = Vec::new();
    for (i, &(demos, slm_ref, defs)) in ABLATION_GRID.iter().enumerate() {
        let mut config = base.clone();
        config.prompt.include_demos = demos;
        config.prompt.zero_shot = !demos;
        config.prompt.include_slm_ref = slm_ref;
        config.prompt.include_defs = defs;
        config.output_dir = base.output_dir.join(format!("ablate-id{}", i + 1));
        let summary = run(config)?;
        cells.push(AblationCell {
            id: i + 1,
            demos,
            slm_ref,
            defs,
            llm_raw_report: summary.llm_raw_report,
            prompt_hashes: summary.manifest.prompt_hashes,
        });
    }

    // distinct components ⇒ distinct prompts, per sample
    if let Some(first) = cells.first() {
        for sample_id in first.prompt_hashes.keys() {
            let hashes: BTreeSet<&String> = cells
                .iter()
                .filter_map(|c| c.prompt_hashes.get(sample_id))
                .collect();
            if hashes.len() != cells.len() {
                return Err(Error::Config(format!(
                    "ablation produced colliding prompts for sample {sample_id}"
                )));
            }
        }
    }
    write_json(&base.output_dir.join("ablate.json"), &cells)?;
    Ok(cells)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsSummary {
    pub stats: DatasetStats,
    pub coverage: Option<candidates::CoverageReport>,
}

/// Dataset statistics plus candidate coverage per selection mode.
pub fn dataset_stats(config: &RunConfig) -> Result<StatsSummary> {
    let schema = ingest::load_schema(&config.schema_path)?;
    let corpus = ingest::load_corpus(&config.corpus_dir, &schema)?;
    let stats = ingest::compute_stats(&corpus, config.tail_threshold);
    let coverage = if config.candidates.mode == CandidateMode::None || corpus.train.is_empty() {
        None
    } else {
        let train_index = SimilarityIndex::build(&corpus.train)?;
        Some(candidates::coverage_report(
            &corpus.test,
            &train_index,
            &schema,
        )?)
    };
    Ok(StatsSummary { stats, coverage })
}

/// Convenience used by tests and the CLI: a mock-backed config over a
/// generated fixture directory.
pub fn mock_config(fixture_dir: &Path, output_dir: &Path, correct: Vec<String>) -> RunConfig {
    RunConfig {
        corpus_dir: fixture_dir.join("corpus"),
        predictions_dir: fixture_dir.join("predictions"),
        schema_path: fixture_dir.join("schema.json"),
        output_dir: output_dir.to_path_buf(),
        prompt: PromptConfig::default(),
        demos: DemoConfig::default(),
        candidates: CandidateConfig::default(),
        merge: MergeConfig::default(),
        backend: BackendConfig::Mock {
            mock: MockSpec {
                model: None,
                script_path: None,
                correct_relations: Some(correct),
                max_concurrent: None,
            },
        },
        tail_threshold: DEFAULT_TAIL_THRESHOLD,
    }
}

/// Generate the built-in long-tail fixture under `dir`.
pub fn generate_demo_fixture(dir: &Path, seed: u64) -> Result<()> {
    let schema = fixture::demo_schema();
    let spec = fixture::demo_fixture_spec();
    fixture::write_fixture(dir, &spec, &schema, seed)?;
    Ok(())
}
