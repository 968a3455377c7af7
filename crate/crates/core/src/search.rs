//! The generational search loop: initialization, fitness evaluation with
//! parameter inheritance, NSGA-II selection, the archive and statistics.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arch::{Architecture, Block, SeedKind};
use crate::cell::{CellDims, CellProgram, Model, ParamStore, TrainConfig, DEFAULT_LEAKY_SLOPE};
use crate::evo::{
    fast_nondominated_sort, max_parents_cap, survivor_selection, tournament_selection, EvoError, Individual,
    ObjectiveVector,
};
use crate::morphism::{generate_offspring, random_initial_architecture, Lineage, MorphismRecord};
use crate::tasks::{evaluate_sequence_mse, Dataset, DatasetManifest, EvalMode, SequenceTask, TaskError, ALPHABET_SIZE};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Evo(#[from] EvoError),
    #[error("observer failed: {0}")]
    Observer(#[from] std::io::Error),
}

/// Objectives that can be selected, all minimized.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    TestLoss,
    BlockCount,
    ParamCount,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochBudget {
    pub full_epochs: usize,
    pub reduced_epochs: usize,
    /// In units of the task loss.
    pub divergence_threshold: f64,
}

impl Default for EpochBudget {
    fn default() -> Self {
        EpochBudget { full_epochs: 30, reduced_epochs: 5, divergence_threshold: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub clip_norm: Option<f64>,
    pub leaky_slope: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig { learning_rate: 0.01, clip_norm: Some(5.0), leaky_slope: DEFAULT_LEAKY_SLOPE }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub hidden_dim: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub n_min: usize,
    pub n_max: usize,
    #[serde(default)]
    pub eval_mode: EvalMode,
}

impl Default for TaskConfig {
    fn default() -> Self {
        TaskConfig { hidden_dim: 32, train_count: 500, test_count: 100, n_min: 1, n_max: 10, eval_mode: EvalMode::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub schema_version: u32,
    pub population_size: usize,
    pub offspring: usize,
    pub max_parents: usize,
    pub max_transforms: usize,
    pub generations: usize,
    pub objectives: Vec<Objective>,
    pub seeds: Vec<SeedKind>,
    pub seed: u64,
    /// `None`: ten times the worst finite loss of the initial population.
    #[serde(default)]
    pub penalty_loss: Option<f64>,
    #[serde(default)]
    pub epochs: EpochBudget,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub task: TaskConfig,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            schema_version: CONFIG_SCHEMA_VERSION,
            population_size: 20,
            offspring: 20,
            max_parents: 20,
            max_transforms: 3,
            generations: 10,
            objectives: vec![Objective::TestLoss, Objective::BlockCount],
            seeds: vec![SeedKind::BasicRnn],
            seed: 0,
            penalty_loss: None,
            epochs: EpochBudget::default(),
            training: TrainingConfig::default(),
            task: TaskConfig::default(),
        }
    }
}

impl SearchConfig {
    pub fn from_json(text: &str) -> Result<Self, SearchError> {
        let config: SearchConfig = serde_json::from_str(text).map_err(|e| SearchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs always serialize") + "\n"
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let fail = |m: String| Err(SearchError::Config(m));
        if self.schema_version != CONFIG_SCHEMA_VERSION {
            return fail(format!("unsupported schema_version {}", self.schema_version));
        }
        if self.population_size < 2 {
            return fail("population_size must be at least 2".into());
        }
        if self.offspring < 1 {
            return fail("offspring must be at least 1".into());
        }
        if self.max_parents < 1 || self.max_parents > self.population_size {
            return fail("max_parents must lie in [1, population_size]".into());
        }
        if self.max_transforms < 1 {
            return fail("max_transforms must be at least 1".into());
        }
        if self.seeds.len() > self.population_size {
            return fail(format!("{} seeds exceed population_size {}", self.seeds.len(), self.population_size));
        }
        let mut seen = self.seeds.clone();
        seen.sort_by_key(|s| s.prefix());
        seen.dedup();
        if seen.len() != self.seeds.len() {
            return fail("seeds must be distinct".into());
        }
        if self.objectives.is_empty() {
            return fail("at least one objective is required".into());
        }
        if self.training.learning_rate.is_nan() || self.training.learning_rate <= 0.0 {
            return fail("learning_rate must be positive".into());
        }
        if self.training.clip_norm.is_some_and(|c| c.is_nan() || c <= 0.0) {
            return fail("clip_norm must be positive".into());
        }
        if self.penalty_loss.is_some_and(|p| !p.is_finite()) {
            return fail("penalty_loss must be finite".into());
        }
        if self.task.hidden_dim < 1 || self.task.train_count < 1 || self.task.test_count < 1 {
            return fail("task sizes must be positive".into());
        }
        if self.task.n_min < 1 || self.task.n_min > self.task.n_max {
            return fail("task range must satisfy 1 <= n_min <= n_max".into());
        }
        if self.epochs.divergence_threshold.is_nan() || self.epochs.divergence_threshold < 0.0 {
            return fail("divergence_threshold must be non-negative".into());
        }
        Ok(())
    }

    pub fn dims(&self) -> CellDims {
        CellDims::new(ALPHABET_SIZE, self.task.hidden_dim)
    }
}

/// Stream seed for `label` under the run seed.
pub fn derive_seed(run_seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(run_seed.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest is 32 bytes"))
}

/// The datasets and fixed test cuts a run uses, all derived from the run seed.
pub fn build_task(config: &SearchConfig) -> Result<SequenceTask, SearchError> {
    let t = &config.task;
    let train = Dataset::generate(DatasetManifest {
        seed: derive_seed(config.seed, "train-data"),
        count: t.train_count,
        n_min: t.n_min,
        n_max: t.n_max,
    })?;
    let test = Dataset::generate(DatasetManifest {
        seed: derive_seed(config.seed, "test-data"),
        count: t.test_count,
        n_min: t.n_min,
        n_max: t.n_max,
    })?;
    Ok(SequenceTask::new(&train, &test, derive_seed(config.seed, "test-cuts"))?)
}

/// Epochs to train an individual for.
pub fn epoch_budget(parent_metric: Option<f64>, offspring_initial_metric: Option<f64>, budget: &EpochBudget) -> usize {
    match (parent_metric, offspring_initial_metric) {
        (None, _) => budget.full_epochs,
        (Some(p), Some(o)) if (o - p).abs() <= budget.divergence_threshold => budget.reduced_epochs,
        _ => budget.full_epochs,
    }
}

/// Seeds first (`LSTM_0`, `GRU_0`, `BASIC_0`), then random architectures.
pub fn initialize_population(
    config: &SearchConfig,
    lineage: &mut Lineage,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Architecture>, SearchError> {
    if config.seeds.len() > config.population_size {
        return Err(SearchError::Config("more seeds than population slots".into()));
    }
    let mut pop: Vec<Architecture> = config.seeds.iter().map(|s| s.encode()).collect();
    for a in &pop {
        lineage.register(&a.identifier);
    }
    while pop.len() < config.population_size {
        pop.push(random_initial_architecture(lineage, rng));
    }
    Ok(pop)
}

/// A member of the current population or offspring set.
#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub arch: Architecture,
    pub params: ParamStore,
    /// Test loss, `None` when training or evaluation failed.
    pub loss: Option<f64>,
    pub param_count: usize,
    pub record: Option<MorphismRecord>,
}

/// One line of the archive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub generation: usize,
    pub identifier: String,
    pub parent: Option<String>,
    pub structural_hash: String,
    pub objectives: ObjectiveVector,
    pub test_loss: Option<f64>,
    pub block_count: usize,
    pub param_count: usize,
    pub initial_loss: Option<f64>,
    pub epochs: usize,
    pub cached: bool,
    pub record: Option<MorphismRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub population: usize,
    pub mean_block_count: f64,
    pub mean_loss: f64,
    pub best_loss: f64,
    pub mean_param_count: f64,
    pub front_sizes: Vec<usize>,
    pub evaluated: usize,
    pub cache_hits: usize,
    pub penalized: usize,
    /// Identifiers of the first front.
    pub pareto: Vec<String>,
}

/// Wall-clock of one evaluation. Kept apart from the archive so that archives
/// of repeated runs compare equal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub generation: usize,
    pub identifier: String,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RunState {
    pub config: SearchConfig,
    pub generation: usize,
    /// Ranked population; `members` holds the matching genotypes and weights.
    pub population: Vec<Individual>,
    pub members: BTreeMap<String, Member>,
    /// Identifiers of the most recent offspring set.
    pub offspring: Vec<String>,
    /// Genotypes evaluated in the current generation, in archive order.
    pub evaluated: Vec<Architecture>,
    pub archive: Vec<ArchiveEntry>,
    pub stats: Vec<GenerationStats>,
    pub timings: Vec<Timing>,
    pub penalty_loss: f64,
    pub lineage: Lineage,
    cache: BTreeMap<String, CacheEntry>,
}

#[derive(Clone, Debug)]
struct CacheEntry {
    blocks: Vec<Block>,
    params: ParamStore,
    loss: Option<f64>,
    param_count: usize,
}

impl RunState {
    /// Members of the first front.
    pub fn pareto_front(&self) -> Vec<&Individual> {
        self.population.iter().filter(|i| i.rank == 1).collect()
    }

    pub fn member(&self, id: &str) -> Option<&Member> {
        self.members.get(id)
    }

    pub fn archive_entry(&self, id: &str) -> Option<&ArchiveEntry> {
        self.archive.iter().find(|e| e.identifier == id)
    }

    fn objectives_of(&self, m: &Member) -> ObjectiveVector {
        objective_vector(&self.config.objectives, m, self.penalty_loss)
    }
}

fn objective_vector(objectives: &[Objective], m: &Member, penalty: f64) -> ObjectiveVector {
    objectives
        .iter()
        .map(|o| match o {
            Objective::TestLoss => m.loss.unwrap_or(penalty),
            Objective::BlockCount => m.arch.block_count() as f64,
            Objective::ParamCount => m.param_count as f64,
        })
        .collect::<Vec<f64>>()
        .into()
}

struct Evaluated {
    member: Member,
    initial_loss: Option<f64>,
    epochs: usize,
    seconds: f64,
}

struct Job<'a> {
    arch: Architecture,
    parent: Option<(&'a Member, MorphismRecord)>,
}

fn train_config(config: &SearchConfig, epochs: usize, id: &str) -> TrainConfig {
    TrainConfig {
        learning_rate: config.training.learning_rate,
        epochs,
        clip_norm: config.training.clip_norm,
        seed: derive_seed(config.seed, &format!("train/{id}")),
    }
}

fn failed(arch: Architecture, record: Option<MorphismRecord>, params: ParamStore, start: Instant, epochs: usize) -> Evaluated {
    let param_count = params.len();
    Evaluated {
        member: Member { arch, params, loss: None, param_count, record },
        initial_loss: None,
        epochs,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Builds, (re)trains and scores one individual. Failures yield a `None` loss.
fn evaluate(job: Job<'_>, config: &SearchConfig, task: &SequenceTask) -> Evaluated {
    let start = Instant::now();
    let id = job.arch.identifier.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &format!("init/{id}")));
    let record = job.parent.as_ref().map(|(_, r)| r.clone());
    let program = match CellProgram::compile(&job.arch, config.dims()) {
        Ok(p) => p.with_leaky_slope(config.training.leaky_slope),
        Err(e) => {
            log::warn!("{id}: compile failed: {e}");
            return failed(job.arch, record, ParamStore::new(), start, 0);
        }
    };
    let built = match &job.parent {
        None => Model::fresh(program, ALPHABET_SIZE, &mut rng),
        Some((parent, record)) => Model::inherit(program, ALPHABET_SIZE, &parent.params, record, &mut rng),
    };
    let mut model = match built {
        Ok(m) => m,
        Err(e) => {
            log::warn!("{id}: parameter initialization failed: {e}");
            return failed(job.arch, record, ParamStore::new(), start, 0);
        }
    };
    let mode = config.task.eval_mode;
    let initial_loss = match &job.parent {
        Some(_) => evaluate_sequence_mse(&model, &task.test, mode).ok(),
        None => None,
    };
    let epochs = epoch_budget(job.parent.as_ref().and_then(|(p, _)| p.loss), initial_loss, &config.epochs);
    let before = model.params.clone();
    let loss = match crate::cell::train(&mut model, &task.train, &train_config(config, epochs, &id)) {
        Ok(_) => evaluate_sequence_mse(&model, &task.test, mode).ok().filter(|l| l.is_finite()),
        Err(e) => {
            log::info!("{id}: {e}");
            None
        }
    };
    // Diverged weights are useless to descendants; keep the starting point instead.
    let params = if loss.is_some() { model.params } else { before };
    let param_count = model.program.param_count();
    Evaluated {
        member: Member { arch: job.arch, params, loss, param_count, record },
        initial_loss,
        epochs,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Evaluates `jobs` in parallel, consulting and filling the structural cache.
/// Output order follows input order.
fn evaluate_batch(state: &mut RunState, jobs: Vec<Job<'_>>, task: &SequenceTask) -> Vec<(Evaluated, bool)> {
    let hashes: Vec<String> = jobs.iter().map(|j| j.arch.structural_hash()).collect();
    // First occurrence of an uncached hash is trained; everything else is a hit.
    let mut fresh_hashes = std::collections::BTreeSet::new();
    let mut to_train = Vec::new();
    let mut slots: Vec<Option<(Evaluated, bool)>> = Vec::with_capacity(jobs.len());
    let mut deferred = Vec::new();
    for (i, (job, hash)) in jobs.into_iter().zip(&hashes).enumerate() {
        slots.push(None);
        if state.cache.contains_key(hash) || !fresh_hashes.insert(hash.clone()) {
            deferred.push((i, job));
        } else {
            to_train.push((i, job));
        }
    }
    let config = &state.config;
    let results: Vec<(usize, Evaluated)> =
        to_train.into_par_iter().map(|(i, job)| (i, evaluate(job, config, task))).collect();
    for (i, ev) in results {
        let m = &ev.member;
        state.cache.insert(
            hashes[i].clone(),
            CacheEntry {
                blocks: m.arch.blocks().cloned().collect(),
                params: m.params.clone(),
                loss: m.loss,
                param_count: m.param_count,
            },
        );
        slots[i] = Some((ev, false));
    }
    for (i, job) in deferred {
        let start = Instant::now();
        let hit = &state.cache[&hashes[i]];
        let same_ids = job.arch.blocks().eq(hit.blocks.iter());
        let record = job.parent.as_ref().map(|(_, r)| r.clone());
        let params = if same_ids {
            hit.params.clone()
        } else {
            inherited_params(&job, &state.config).unwrap_or_else(|| hit.params.clone())
        };
        let member = Member { arch: job.arch, params, loss: hit.loss, param_count: hit.param_count, record };
        slots[i] = Some((Evaluated { member, initial_loss: None, epochs: 0, seconds: start.elapsed().as_secs_f64() }, true));
    }
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

/// Untrained inherited (or fresh) weights for a cache hit whose block ids differ.
fn inherited_params(job: &Job<'_>, config: &SearchConfig) -> Option<ParamStore> {
    let id = job.arch.identifier.to_string();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &format!("init/{id}")));
    let program = CellProgram::compile(&job.arch, config.dims()).ok()?;
    let model = match &job.parent {
        None => Model::fresh(program, ALPHABET_SIZE, &mut rng),
        Some((p, r)) => Model::inherit(program, ALPHABET_SIZE, &p.params, r, &mut rng),
    };
    model.ok().map(|m| m.params)
}

fn record_results(state: &mut RunState, generation: usize, results: Vec<(Evaluated, bool)>) -> Vec<String> {
    let mut ids = Vec::with_capacity(results.len());
    state.evaluated.clear();
    for (ev, cached) in results {
        let m = ev.member;
        let id = m.arch.identifier.to_string();
        state.archive.push(ArchiveEntry {
            generation,
            identifier: id.clone(),
            parent: m.record.as_ref().map(|r| r.parent.to_string()),
            structural_hash: m.arch.structural_hash(),
            objectives: state.objectives_of(&m),
            test_loss: m.loss,
            block_count: m.arch.block_count(),
            param_count: m.param_count,
            initial_loss: ev.initial_loss,
            epochs: ev.epochs,
            cached,
            record: m.record.clone(),
        });
        state.timings.push(Timing { generation, identifier: id.clone(), seconds: ev.seconds });
        state.evaluated.push(m.arch.clone());
        state.members.insert(id.clone(), m);
        ids.push(id);
    }
    ids
}

fn individual(state: &RunState, id: &str) -> Individual {
    let m = &state.members[id];
    let mut ind = Individual::new(id, state.objectives_of(m));
    ind.parent = m.record.as_ref().map(|r| r.parent.to_string());
    ind
}

/// Statistics over an evaluated, ranked population.
pub fn generation_stats(state: &RunState) -> GenerationStats {
    let pop = &state.population;
    let n = pop.len().max(1) as f64;
    let members: Vec<&Member> = pop.iter().map(|i| &state.members[&i.id]).collect();
    let losses: Vec<f64> = members.iter().map(|m| m.loss.unwrap_or(state.penalty_loss)).collect();
    let max_rank = pop.iter().map(|i| i.rank).max().unwrap_or(0);
    let mut pareto: Vec<String> = pop.iter().filter(|i| i.rank == 1).map(|i| i.id.clone()).collect();
    pareto.sort();
    let this_gen = state.archive.iter().filter(|e| e.generation == state.generation);
    let (mut evaluated, mut cache_hits, mut penalized) = (0, 0, 0);
    for e in this_gen {
        evaluated += 1;
        cache_hits += usize::from(e.cached);
        penalized += usize::from(e.test_loss.is_none());
    }
    GenerationStats {
        generation: state.generation,
        population: pop.len(),
        mean_block_count: members.iter().map(|m| m.arch.block_count() as f64).sum::<f64>() / n,
        mean_loss: losses.iter().sum::<f64>() / n,
        best_loss: losses.iter().copied().fold(f64::INFINITY, f64::min),
        mean_param_count: members.iter().map(|m| m.param_count as f64).sum::<f64>() / n,
        front_sizes: (1..=max_rank).map(|r| pop.iter().filter(|i| i.rank == r).count()).collect(),
        evaluated,
        cache_hits,
        penalized,
        pareto,
    }
}

/// Runs the search without observing intermediate generations.
pub fn run_search(config: &SearchConfig, task: &SequenceTask) -> Result<RunState, SearchError> {
    run_search_with(config, task, |_| Ok(()))
}

/// Runs the search, calling `observer` after the initial population and after
/// every generation.
pub fn run_search_with(
    config: &SearchConfig,
    task: &SequenceTask,
    mut observer: impl FnMut(&RunState) -> std::io::Result<()>,
) -> Result<RunState, SearchError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "search"));
    let mut lineage = Lineage::new();
    let initial = initialize_population(config, &mut lineage, &mut rng)?;
    let mut state = RunState {
        config: config.clone(),
        generation: 0,
        population: Vec::new(),
        members: BTreeMap::new(),
        offspring: Vec::new(),
        evaluated: Vec::new(),
        archive: Vec::new(),
        stats: Vec::new(),
        timings: Vec::new(),
        penalty_loss: config.penalty_loss.unwrap_or(f64::NAN),
        lineage,
        cache: BTreeMap::new(),
    };

    let jobs = initial.into_iter().map(|arch| Job { arch, parent: None }).collect();
    let results = evaluate_batch(&mut state, jobs, task);
    if config.penalty_loss.is_none() {
        let worst = results.iter().filter_map(|(e, _)| e.member.loss).fold(f64::NAN, f64::max);
        // Sigmoid readouts bound the MSE by 1.
        state.penalty_loss = 10.0 * if worst.is_nan() { 1.0 } else { worst };
    }
    let ids = record_results(&mut state, 0, results);
    let mut pop: Vec<Individual> = ids.iter().map(|id| individual(&state, id)).collect();
    fast_nondominated_sort(&mut pop)?;
    state.population = pop;
    state.stats.push(generation_stats(&state));
    log_generation(&state);
    observer(&state)?;

    for g in 1..=config.generations {
        state.generation = g;
        let pool_idx = max_parents_cap(&state.population, config.max_parents);
        let pool: Vec<Individual> = pool_idx.iter().map(|&i| state.population[i].clone()).collect();
        let winners = tournament_selection(&pool, config.max_parents.min(config.offspring), &mut rng)?;
        let mut children = Vec::with_capacity(config.offspring);
        for k in 0..config.offspring {
            let parent_id = &pool[winners[k % winners.len()]].id;
            let parent = &state.members[parent_id];
            let (child, record) = generate_offspring(&parent.arch, config.max_transforms, &mut state.lineage, &mut rng);
            children.push((child, record, parent_id.clone()));
        }
        let members_snapshot = state.members.clone();
        let jobs = children
            .into_iter()
            .map(|(arch, record, pid)| Job { arch, parent: Some((&members_snapshot[&pid], record)) })
            .collect();
        let results = evaluate_batch(&mut state, jobs, task);
        let q = record_results(&mut state, g, results);

        let mut combined = state.population.clone();
        combined.extend(q.iter().map(|id| individual(&state, id)));
        let survivors = survivor_selection(combined, config.population_size)?;
        let keep: std::collections::BTreeSet<&str> = survivors.iter().map(|i| i.id.as_str()).collect();
        state.members.retain(|id, _| keep.contains(id.as_str()));
        state.population = survivors;
        state.offspring = q;
        state.stats.push(generation_stats(&state));
        log_generation(&state);
        observer(&state)?;
    }
    Ok(state)
}

fn log_generation(state: &RunState) {
    if let Some(s) = state.stats.last() {
        log::info!(
            "generation {}: mean blocks {:.2}, mean loss {:.5}, best loss {:.5}, fronts {:?}",
            s.generation,
            s.mean_block_count,
            s.mean_loss,
            s.best_loss,
            s.front_sizes
        );
    }
}

/// Trains and scores one seed encoding exactly as the initial population does.
pub fn evaluate_seed(config: &SearchConfig, task: &SequenceTask, kind: SeedKind) -> (Member, ObjectiveVector) {
    let ev = evaluate(Job { arch: kind.encode(), parent: None }, config, task);
    let penalty = config.penalty_loss.unwrap_or(10.0);
    let obj = objective_vector(&config.objectives, &ev.member, penalty);
    (ev.member, obj)
}
