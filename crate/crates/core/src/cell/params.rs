use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::program::{CellProgram, ParamShape};
use super::CellError;
use crate::arch::BlockId;
use crate::morphism::{MorphismRecord, Transform};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Row-major `rows x cols` weight matrix with an optional bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<f64>>,
}

impl LinearParams {
    pub fn zeros(shape: ParamShape) -> Self {
        LinearParams {
            rows: shape.rows,
            cols: shape.cols,
            weight: vec![0.0; shape.rows * shape.cols],
            bias: shape.bias.then(|| vec![0.0; shape.rows]),
        }
    }

    /// Identity weight (requires a square shape) and zero bias.
    pub fn identity(shape: ParamShape) -> Self {
        debug_assert_eq!(shape.rows, shape.cols);
        let mut p = LinearParams::zeros(shape);
        for i in 0..shape.rows {
            p.weight[i * shape.cols + i] = 1.0;
        }
        p
    }

    pub fn uniform<R: Rng + ?Sized>(shape: ParamShape, scale: f64, rng: &mut R) -> Self {
        let mut p = LinearParams::zeros(shape);
        for w in &mut p.weight {
            *w = rng.gen_range(-scale..=scale);
        }
        p
    }

    pub fn shape(&self) -> ParamShape {
        ParamShape { rows: self.rows, cols: self.cols, bias: self.bias.is_some() }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.bias.clone().unwrap_or_else(|| vec![0.0; self.rows]);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weight[r * self.cols..(r + 1) * self.cols];
            *o += row.iter().zip(v).map(|(w, x)| w * x).sum::<f64>();
        }
        out
    }

    pub fn transpose_apply(&self, g: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, gr) in g.iter().enumerate() {
            let row = &self.weight[r * self.cols..(r + 1) * self.cols];
            for (o, w) in out.iter_mut().zip(row) {
                *o += w * gr;
            }
        }
        out
    }

    /// `W += g ⊗ input`, `b += g`.
    pub fn accumulate_outer(&mut self, g: &[f64], input: &[f64]) {
        for (r, gr) in g.iter().enumerate() {
            let row = &mut self.weight[r * self.cols..(r + 1) * self.cols];
            for (w, x) in row.iter_mut().zip(input) {
                *w += gr * x;
            }
        }
        if let Some(b) = &mut self.bias {
            for (b, gr) in b.iter_mut().zip(g) {
                *b += gr;
            }
        }
    }

    fn values(&self) -> impl Iterator<Item = &f64> {
        self.weight.iter().chain(self.bias.iter().flatten())
    }

    fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.iter_mut().chain(self.bias.iter_mut().flatten())
    }

    pub fn len(&self) -> usize {
        self.shape().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Trainable tensors keyed by block identity. Also used for gradients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: BTreeMap<BlockId, LinearParams>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointEntry {
    block: BlockId,
    #[serde(flatten)]
    params: LinearParams,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    schema_version: u32,
    entries: Vec<CheckpointEntry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros_for(program: &CellProgram) -> Self {
        ParamStore {
            entries: program.param_shapes().iter().map(|(b, s)| (*b, LinearParams::zeros(*s))).collect(),
        }
    }

    pub fn get(&self, block: BlockId) -> Option<&LinearParams> {
        self.entries.get(&block)
    }

    pub fn get_mut(&mut self, block: BlockId) -> Option<&mut LinearParams> {
        self.entries.get_mut(&block)
    }

    pub fn insert(&mut self, block: BlockId, params: LinearParams) {
        self.entries.insert(block, params);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BlockId, &LinearParams)> {
        self.entries.iter()
    }

    pub fn blocks(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.entries.keys().copied()
    }

    /// Total scalar count across entries.
    pub fn len(&self) -> usize {
        self.entries.values().map(LinearParams::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.entries.values().flat_map(LinearParams::values)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.entries.values_mut().flat_map(LinearParams::values_mut)
    }

    pub fn norm(&self) -> f64 {
        self.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, k: f64) {
        for v in self.values_mut() {
            *v *= k;
        }
    }

    /// `self += other` entrywise over shared blocks.
    pub fn add_assign(&mut self, other: &ParamStore) {
        for (b, p) in &mut self.entries {
            if let Some(q) = other.entries.get(b) {
                for (x, y) in p.values_mut().zip(q.values()) {
                    *x += y;
                }
            }
        }
    }

    pub fn to_checkpoint(&self) -> String {
        let doc = Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            entries: self.entries.iter().map(|(b, p)| CheckpointEntry { block: *b, params: p.clone() }).collect(),
        };
        serde_json::to_string(&doc).expect("checkpoints always serialize")
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, CellError> {
        let doc: Checkpoint = serde_json::from_str(text).map_err(|e| CellError::Checkpoint(e.to_string()))?;
        if doc.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(CellError::Checkpoint(format!("unsupported schema_version {}", doc.schema_version)));
        }
        let mut store = ParamStore::new();
        for e in doc.entries {
            if e.params.weight.len() != e.params.rows * e.params.cols
                || e.params.bias.as_ref().is_some_and(|b| b.len() != e.params.rows)
            {
                return Err(CellError::Checkpoint(format!("entry {} has inconsistent shape", e.block)));
            }
            store.insert(e.block, e.params);
        }
        Ok(store)
    }
}

/// Fresh weights are uniform in `±1/sqrt(hidden_dim)`; biases start at zero.
pub fn init_scale(hidden_dim: usize) -> f64 {
    1.0 / (hidden_dim as f64).sqrt()
}

/// Parameters for `program`, fresh or inherited from a parent.
///
/// With inheritance, every weighted block that survived with an unchanged
/// shape copies the parent's tensors; a `linear`/`linear_b` switch keeps the
/// weight and adds or drops the bias. Blocks without a usable parent tensor
/// start as identity maps when square and uniform otherwise. Weighted blocks
/// created by `add_unit` must be square. Entries of the parent that are not
/// cell blocks (such as a task readout) are carried over unchanged.
pub fn init_params<R: Rng + ?Sized>(
    program: &CellProgram,
    rng: &mut R,
    inherited: Option<(&ParamStore, &MorphismRecord)>,
) -> Result<ParamStore, CellError> {
    let scale = init_scale(program.dims.hidden_dim);
    let mut store = ParamStore::new();
    let Some((parent, record)) = inherited else {
        for (b, s) in program.param_shapes() {
            store.insert(*b, LinearParams::uniform(*s, scale, rng));
        }
        return Ok(store);
    };

    for t in record.applied() {
        if let Transform::AddUnit { new_block, .. } = t {
            if let Some(s) = program.param_shapes().get(new_block) {
                if s.rows != s.cols {
                    return Err(CellError::Shape(format!("inserted weighted block {new_block} is not square")));
                }
            }
        }
    }

    for (b, s) in program.param_shapes() {
        let p = match parent.get(*b) {
            Some(p) if p.rows == s.rows && p.cols == s.cols => {
                let mut p = p.clone();
                match (s.bias, &p.bias) {
                    (true, None) => p.bias = Some(vec![0.0; s.rows]),
                    (false, Some(_)) => p.bias = None,
                    _ => {}
                }
                p
            }
            _ if s.rows == s.cols => LinearParams::identity(*s),
            _ => LinearParams::uniform(*s, scale, rng),
        };
        store.insert(*b, p);
    }
    for (b, p) in parent.iter() {
        if !program.param_shapes().contains_key(b) && *b == BlockId::READOUT {
            store.insert(*b, p.clone());
        }
    }
    Ok(store)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Global-norm clipping threshold.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 0.01, epochs: 30, clip_norm: Some(5.0), seed: 0 }
    }
}

/// `p -= lr * g` after optional global-norm clipping. Returns the pre-clip norm.
pub fn sgd_step(params: &mut ParamStore, grads: &ParamStore, config: &TrainConfig) -> f64 {
    let norm = grads.norm();
    let k = match config.clip_norm {
        Some(c) if norm > c => c / norm,
        _ => 1.0,
    };
    let step = config.learning_rate * k;
    for (b, p) in params.entries.iter_mut() {
        if let Some(g) = grads.entries.get(b) {
            for (x, d) in p.values_mut().zip(g.values()) {
                *x -= step * d;
            }
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert(BlockId(0), LinearParams { rows: 1, cols: 1, weight: vec![v], bias: None });
        s
    }

    #[test]
    fn sgd_scalar_and_zero_rate() {
        let mut p = scalar(1.0);
        let g = scalar(2.0);
        let cfg = TrainConfig { learning_rate: 0.1, clip_norm: None, ..Default::default() };
        sgd_step(&mut p, &g, &cfg);
        assert!((p.get(BlockId(0)).unwrap().weight[0] - 0.8).abs() < 1e-15);
        let before = p.clone();
        sgd_step(&mut p, &g, &TrainConfig { learning_rate: 0.0, ..cfg });
        assert_eq!(p, before);
    }

    #[test]
    fn clipping_scales_gradient() {
        let mut p = ParamStore::new();
        p.insert(BlockId(0), LinearParams { rows: 2, cols: 1, weight: vec![0.0, 0.0], bias: None });
        let mut g = ParamStore::new();
        g.insert(BlockId(0), LinearParams { rows: 2, cols: 1, weight: vec![6.0, 8.0], bias: None });
        let norm = sgd_step(&mut p, &g, &TrainConfig { learning_rate: 1.0, clip_norm: Some(1.0), ..Default::default() });
        assert_eq!(norm, 10.0);
        let w = &p.get(BlockId(0)).unwrap().weight;
        assert!((w[0] + 0.6).abs() < 1e-15 && (w[1] + 0.8).abs() < 1e-15);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut s = scalar(0.25);
        s.insert(BlockId(7), LinearParams { rows: 2, cols: 3, weight: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], bias: Some(vec![0.5, -0.5]) });
        let back = ParamStore::from_checkpoint(&s.to_checkpoint()).unwrap();
        assert_eq!(back, s);
        assert!(ParamStore::from_checkpoint("{\"schema_version\":1,\"entries\":[{\"block\":1,\"rows\":2,\"cols\":2,\"weight\":[1.0]}]}").is_err());
    }

    #[test]
    fn matvec_and_transpose() {
        let p = LinearParams { rows: 2, cols: 3, weight: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], bias: Some(vec![1.0, -1.0]) };
        assert_eq!(p.apply(&[1.0, 0.0, -1.0]), vec![-1.0, -3.0]);
        assert_eq!(p.transpose_apply(&[1.0, 1.0]), vec![5.0, 7.0, 9.0]);
    }
}
