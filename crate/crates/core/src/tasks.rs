//! The aⁿbⁿcⁿ sequence task, its evaluation protocols and metrics.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cell::{mse_loss, CellError, Model, StepState, TrainingSequence};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("invalid range: need 1 <= n_min <= n_max, got [{n_min}, {n_max}]")]
    InvalidRange { n_min: usize, n_max: usize },
    #[error("count must be at least 1")]
    InvalidCount,
    #[error("string of length {0} is too short to split")]
    StringTooShort(usize),
    #[error("symbol {0:?} is not in the alphabet")]
    InvalidSymbol(char),
    #[error("line {line} is not of the form a^n b^n c^n: {text:?}")]
    NotInLanguage { line: usize, text: String },
    #[error("non-finite value")]
    NonFiniteValue,
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
}

/// `a`, `b`, `c` and an end-of-string marker, one-hot encoded in that order.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Symbol {
    A,
    B,
    C,
    End,
}

pub const ALPHABET_SIZE: usize = 4;

impl Symbol {
    pub const ALL: [Symbol; ALPHABET_SIZE] = [Symbol::A, Symbol::B, Symbol::C, Symbol::End];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Symbol {
        Symbol::ALL[i]
    }

    pub fn from_char(ch: char) -> Result<Symbol, TaskError> {
        match ch {
            'a' => Ok(Symbol::A),
            'b' => Ok(Symbol::B),
            'c' => Ok(Symbol::C),
            other => Err(TaskError::InvalidSymbol(other)),
        }
    }

    pub fn one_hot(self) -> Vec<f64> {
        let mut v = vec![0.0; ALPHABET_SIZE];
        v[self.index()] = 1.0;
        v
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Symbol::A => "a",
            Symbol::B => "b",
            Symbol::C => "c",
            Symbol::End => "$",
        })
    }
}

fn symbols(s: &str) -> Result<Vec<Symbol>, TaskError> {
    s.chars().map(Symbol::from_char).collect()
}

pub fn anbncn(n: usize) -> String {
    format!("{}{}{}", "a".repeat(n), "b".repeat(n), "c".repeat(n))
}

/// True when `s` is `aⁿbⁿcⁿ` for some `n >= 1`.
pub fn is_anbncn(s: &str) -> bool {
    let n = s.len() / 3;
    n >= 1 && s.len() == 3 * n && s == anbncn(n)
}

pub fn generate_anbncn<R: Rng + ?Sized>(
    count: usize,
    n_min: usize,
    n_max: usize,
    rng: &mut R,
) -> Result<Vec<String>, TaskError> {
    if n_min < 1 || n_min > n_max {
        return Err(TaskError::InvalidRange { n_min, n_max });
    }
    if count < 1 {
        return Err(TaskError::InvalidCount);
    }
    Ok((0..count).map(|_| anbncn(rng.gen_range(n_min..=n_max))).collect())
}

/// A string split into a shown prefix and the suffix to be predicted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub full: String,
    pub cut: usize,
}

impl SequenceSample {
    pub fn new(full: impl Into<String>, cut: usize) -> Result<Self, TaskError> {
        let full = full.into();
        symbols(&full)?;
        if full.len() < 2 {
            return Err(TaskError::StringTooShort(full.len()));
        }
        if cut < 1 || cut >= full.len() {
            return Err(TaskError::InvalidRange { n_min: cut, n_max: full.len() - 1 });
        }
        Ok(SequenceSample { full, cut })
    }

    pub fn prefix(&self) -> &str {
        &self.full[..self.cut]
    }

    pub fn suffix(&self) -> &str {
        &self.full[self.cut..]
    }

    /// Symbols to predict after the prefix: the suffix followed by the end marker.
    pub fn targets(&self) -> Vec<Symbol> {
        let mut t = symbols(self.suffix()).expect("validated at construction");
        t.push(Symbol::End);
        t
    }
}

/// Cut uniform in `[1, len - 1]`.
pub fn make_sample<R: Rng + ?Sized>(string: &str, rng: &mut R) -> Result<SequenceSample, TaskError> {
    if string.len() < 2 {
        return Err(TaskError::StringTooShort(string.len()));
    }
    let cut = rng.gen_range(1..string.len());
    SequenceSample::new(string, cut)
}

/// Teacher-forced training pair: every symbol is fed in turn and the next
/// symbol (the end marker after the last) is the target.
pub fn training_sequence(string: &str) -> Result<TrainingSequence, TaskError> {
    let syms = symbols(string)?;
    if syms.is_empty() {
        return Err(TaskError::Empty);
    }
    let inputs = syms.iter().map(|s| s.one_hot()).collect();
    let targets = syms.iter().skip(1).copied().chain([Symbol::End]).map(|s| Some(s.one_hot())).collect();
    Ok(TrainingSequence { inputs, targets })
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// The true suffix symbol is fed at every step.
    #[default]
    TeacherForced,
    /// After the prefix, the argmax of each prediction is fed back as input.
    Autoregressive,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Readout vectors for every position of `sample.targets()`.
pub fn predict_suffix(model: &Model, sample: &SequenceSample, mode: EvalMode) -> Result<Vec<Vec<f64>>, CellError> {
    let syms = symbols(&sample.full).expect("validated at construction");
    let n_targets = syms.len() - sample.cut + 1;
    let mut state = StepState::zeros(model.program.dims);
    let mut out = Vec::with_capacity(n_targets);
    let mut y = Vec::new();
    for (t, s) in syms[..sample.cut].iter().enumerate() {
        (state, y) = model.step(&s.one_hot(), &state).map_err(|e| with_step(e, t))?;
    }
    out.push(y);
    for k in 0..n_targets - 1 {
        let input = match mode {
            EvalMode::TeacherForced => syms[sample.cut + k].one_hot(),
            EvalMode::Autoregressive => Symbol::from_index(argmax(&out[k])).one_hot(),
        };
        let (next, y) = model.step(&input, &state).map_err(|e| with_step(e, sample.cut + k))?;
        state = next;
        out.push(y);
    }
    Ok(out)
}

fn with_step(e: CellError, step: usize) -> CellError {
    match e {
        CellError::NonFiniteValue { .. } => CellError::NonFiniteValue { step },
        other => other,
    }
}

/// MSE between readout vectors and one-hot targets, averaged over every
/// predicted position of every sample.
pub fn evaluate_sequence_mse(model: &Model, samples: &[SequenceSample], mode: EvalMode) -> Result<f64, CellError> {
    let mut total = 0.0;
    let mut positions = 0usize;
    for s in samples {
        let ys = predict_suffix(model, s, mode)?;
        for (y, t) in ys.iter().zip(s.targets()) {
            total += mse_loss(y, &t.one_hot())?.0;
            positions += 1;
        }
    }
    if positions == 0 {
        return Err(CellError::LengthMismatch { expected: 1, found: 0 });
    }
    Ok(total / positions as f64)
}

/// Fraction of predicted positions whose argmax is the target symbol.
pub fn sequence_accuracy(model: &Model, samples: &[SequenceSample], mode: EvalMode) -> Result<f64, CellError> {
    let mut hits = 0usize;
    let mut positions = 0usize;
    for s in samples {
        let ys = predict_suffix(model, s, mode)?;
        for (y, t) in ys.iter().zip(s.targets()) {
            hits += usize::from(argmax(y) == t.index());
            positions += 1;
        }
    }
    Ok(if positions == 0 { 0.0 } else { hits as f64 / positions as f64 })
}

/// Neumaier summation; keeps long runs of equal entries from drifting.
fn compensated_sum(values: &[f64]) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for &v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

/// `exp` of the mean per-token negative log probability.
pub fn perplexity(cross_entropies: &[f64]) -> Result<f64, TaskError> {
    if cross_entropies.is_empty() {
        return Err(TaskError::Empty);
    }
    if cross_entropies.iter().any(|v| !v.is_finite()) {
        return Err(TaskError::NonFiniteValue);
    }
    let pp = (compensated_sum(cross_entropies) / cross_entropies.len() as f64).exp();
    if pp.is_finite() {
        Ok(pp)
    } else {
        Err(TaskError::NonFiniteValue)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub seed: u64,
    pub count: usize,
    pub n_min: usize,
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub strings: Vec<String>,
}

impl Dataset {
    pub fn generate(manifest: DatasetManifest) -> Result<Self, TaskError> {
        let mut rng = ChaCha8Rng::seed_from_u64(manifest.seed);
        let strings = generate_anbncn(manifest.count, manifest.n_min, manifest.n_max, &mut rng)?;
        Ok(Dataset { manifest, strings })
    }

    /// Path of the manifest written next to `text_path`.
    pub fn manifest_path(text_path: &Path) -> PathBuf {
        let mut name = text_path.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        text_path.with_file_name(name)
    }

    /// One string per line, plus a JSON manifest alongside.
    pub fn write(&self, text_path: &Path) -> Result<(), TaskError> {
        let mut text = self.strings.join("\n");
        text.push('\n');
        std::fs::write(text_path, text)?;
        let manifest = serde_json::to_string_pretty(&self.manifest)? + "\n";
        std::fs::write(Self::manifest_path(text_path), manifest)?;
        Ok(())
    }

    pub fn read(text_path: &Path) -> Result<Self, TaskError> {
        let manifest: DatasetManifest =
            serde_json::from_str(&std::fs::read_to_string(Self::manifest_path(text_path))?)?;
        let mut strings = Vec::new();
        for (i, line) in std::fs::read_to_string(text_path)?.lines().enumerate() {
            if !is_anbncn(line) {
                return Err(TaskError::NotInLanguage { line: i + 1, text: line.to_string() });
            }
            strings.push(line.to_string());
        }
        Ok(Dataset { manifest, strings })
    }
}

/// Training sequences and fixed-cut test samples for one run.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceTask {
    pub train: Vec<TrainingSequence>,
    pub test: Vec<SequenceSample>,
}

impl SequenceTask {
    /// Builds the task from two datasets. Test cuts are drawn once from `cut_seed`.
    pub fn new(train: &Dataset, test: &Dataset, cut_seed: u64) -> Result<Self, TaskError> {
        let mut rng = ChaCha8Rng::seed_from_u64(cut_seed);
        Ok(SequenceTask {
            train: train.strings.iter().map(|s| training_sequence(s)).collect::<Result<_, _>>()?,
            test: test.strings.iter().map(|s| make_sample(s, &mut rng)).collect::<Result<_, _>>()?,
        })
    }

    /// A copy with the training order shuffled; useful for subsetting.
    pub fn shuffled<R: Rng + ?Sized>(&self, rng: &mut R) -> Self {
        let mut t = self.clone();
        t.train.shuffle(rng);
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::{encode_basic_rnn, encode_lstm, BlockId};
    use crate::cell::{CellDims, CellProgram, LinearParams, TrainConfig};

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Cell with zero readout weights: every output equals `sigmoid(bias)`.
    fn constant_model(bias: [f64; 4]) -> Model {
        let dims = CellDims::new(ALPHABET_SIZE, 3);
        let mut m = Model::fresh(CellProgram::compile(&encode_basic_rnn(), dims).unwrap(), 4, &mut rng(0)).unwrap();
        let r = m.params.get_mut(BlockId::READOUT).unwrap();
        *r = LinearParams { rows: 4, cols: 3, weight: vec![0.0; 12], bias: Some(bias.to_vec()) };
        m
    }

    #[test]
    fn strings_and_ranges() {
        assert_eq!(anbncn(3), "aaabbbccc");
        assert_eq!(anbncn(1), "abc");
        let s = generate_anbncn(500, 1, 10, &mut rng(1)).unwrap();
        assert_eq!(s.len(), 500);
        assert!(s.iter().all(|x| is_anbncn(x)));
        for n in 1..=10 {
            assert!(s.iter().any(|x| x.len() == 3 * n), "n={n} never drawn");
        }
        assert!(matches!(generate_anbncn(5, 0, 3, &mut rng(1)), Err(TaskError::InvalidRange { .. })));
        assert!(matches!(generate_anbncn(5, 4, 3, &mut rng(1)), Err(TaskError::InvalidRange { .. })));
        assert!(matches!(generate_anbncn(0, 1, 3, &mut rng(1)), Err(TaskError::InvalidCount)));
        assert_eq!(generate_anbncn(50, 1, 10, &mut rng(7)).unwrap(), generate_anbncn(50, 1, 10, &mut rng(7)).unwrap());
        assert!(!is_anbncn("aabbc") && !is_anbncn("") && !is_anbncn("abcabc"));
    }

    #[test]
    fn samples() {
        let s = SequenceSample::new("abc", 1).unwrap();
        assert_eq!((s.prefix(), s.suffix()), ("a", "bc"));
        assert_eq!(s.targets(), vec![Symbol::B, Symbol::C, Symbol::End]);
        assert!(matches!(make_sample("a", &mut rng(0)), Err(TaskError::StringTooShort(1))));
        let mut r = rng(3);
        for _ in 0..200 {
            let s = make_sample("aaabbbccc", &mut r).unwrap();
            assert!(!s.prefix().is_empty() && !s.suffix().is_empty());
            assert_eq!(format!("{}{}", s.prefix(), s.suffix()), "aaabbbccc");
        }
        let a: Vec<usize> = (0..20).map(|_| make_sample("aabbcc", &mut rng(4)).unwrap().cut).collect();
        let b: Vec<usize> = (0..20).map(|_| make_sample("aabbcc", &mut rng(4)).unwrap().cut).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn training_pairs_shift_by_one() {
        let t = training_sequence("abc").unwrap();
        assert_eq!(t.inputs, vec![Symbol::A.one_hot(), Symbol::B.one_hot(), Symbol::C.one_hot()]);
        assert_eq!(t.targets[2], Some(Symbol::End.one_hot()));
        assert_eq!(t.targets[0], Some(Symbol::B.one_hot()));
    }

    #[test]
    fn uniform_model_mse() {
        // sigmoid(ln(1/3)) = 0.25 on every symbol.
        let m = constant_model([(1.0f64 / 3.0).ln(); 4]);
        let samples: Vec<SequenceSample> =
            ["abc", "aabbcc", "aaabbbccc"].iter().map(|s| make_sample(s, &mut rng(2)).unwrap()).collect();
        let expected = (0.75f64.powi(2) + 3.0 * 0.25f64.powi(2)) / 4.0;
        for mode in [EvalMode::TeacherForced, EvalMode::Autoregressive] {
            let mse = evaluate_sequence_mse(&m, &samples, mode).unwrap();
            assert!((mse - expected).abs() < 1e-15, "{mse}");
        }
        assert_eq!(expected, 0.1875);
    }

    #[test]
    fn accuracy_of_constant_model() {
        let big = 40.0;
        let m = constant_model([big, -big, -big, -big]);
        let s = SequenceSample::new("abc", 1).unwrap();
        assert_eq!(sequence_accuracy(&m, &[s], EvalMode::TeacherForced).unwrap(), 0.0);
    }

    #[test]
    fn evaluation_is_order_invariant() {
        let dims = CellDims::new(ALPHABET_SIZE, 4);
        let m = Model::fresh(CellProgram::compile(&encode_lstm(), dims).unwrap(), 4, &mut rng(5)).unwrap();
        let mut r = rng(6);
        let mut samples: Vec<SequenceSample> = generate_anbncn(30, 1, 6, &mut r)
            .unwrap()
            .iter()
            .map(|s| make_sample(s, &mut r).unwrap())
            .collect();
        let a = evaluate_sequence_mse(&m, &samples, EvalMode::TeacherForced).unwrap();
        samples.reverse();
        let b = evaluate_sequence_mse(&m, &samples, EvalMode::TeacherForced).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn random_model_accuracy_near_quarter() {
        // Zero readout weights and random biases: each model always predicts one random symbol.
        let mut r = rng(12);
        let s = SequenceSample::new("aabbcc", 2).unwrap();
        let positions = s.targets().len();
        let mut hits = 0.0;
        let trials = 1000 / positions + 1;
        for _ in 0..trials {
            let m = constant_model([r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]);
            hits += sequence_accuracy(&m, std::slice::from_ref(&s), EvalMode::TeacherForced).unwrap() * positions as f64;
        }
        let frac = hits / (trials * positions) as f64;
        assert!((frac - 0.25).abs() < 0.05, "{frac}");
    }

    #[test]
    fn perplexity_examples() {
        assert_eq!(perplexity(&[10000f64.ln(); 7]).unwrap().round(), 10000.0);
        assert_eq!(perplexity(&[0.0, 0.0]).unwrap(), 1.0);
        assert!((perplexity(&[2f64.ln(), 8f64.ln()]).unwrap() - 4.0).abs() < 1e-12);
        assert!(perplexity(&[]).is_err());
        assert!(matches!(perplexity(&[f64::INFINITY]), Err(TaskError::NonFiniteValue)));
    }

    #[test]
    fn dataset_round_trip() {
        let dir = std::env::temp_dir().join(format!("rnas-ds-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("train.txt");
        let d = Dataset::generate(DatasetManifest { seed: 9, count: 25, n_min: 1, n_max: 10 }).unwrap();
        d.write(&path).unwrap();
        assert_eq!(Dataset::read(&path).unwrap(), d);
        std::fs::write(&path, "abc\naabc\n").unwrap();
        assert!(matches!(Dataset::read(&path), Err(TaskError::NotInLanguage { line: 2, .. })));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn lstm_learns_the_language_in_teacher_forced_mode() {
        let train = Dataset::generate(DatasetManifest { seed: 1, count: 60, n_min: 1, n_max: 4 }).unwrap();
        let test = Dataset::generate(DatasetManifest { seed: 2, count: 20, n_min: 1, n_max: 4 }).unwrap();
        let task = SequenceTask::new(&train, &test, 3).unwrap();
        let dims = CellDims::new(ALPHABET_SIZE, 8);
        let mut m = Model::fresh(CellProgram::compile(&encode_lstm(), dims).unwrap(), 4, &mut rng(4)).unwrap();
        let before = evaluate_sequence_mse(&m, &task.test, EvalMode::TeacherForced).unwrap();
        let cfg = TrainConfig { learning_rate: 0.1, epochs: 20, clip_norm: Some(5.0), seed: 5 };
        crate::cell::train(&mut m, &task.train, &cfg).unwrap();
        let after = evaluate_sequence_mse(&m, &task.test, EvalMode::TeacherForced).unwrap();
        assert!(after < before, "{before} -> {after}");
    }
}
