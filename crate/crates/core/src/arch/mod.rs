//! Block-encoded recurrent cell genotypes.
//!
//! A cell is a DAG of [`Block`]s. Three source blocks carry `x_t`, `h_{t-1}` and
//! `c_{t-1}` into the cell, two sink blocks emit `h_t` and `c_t`, and everything
//! in between (the hidden layer) is either a single-input activation or a
//! two-input combination. Recurrence only exists across time steps through the
//! h/c source and sink pairs, so the intra-cell graph must stay acyclic.

mod document;
mod dot;
mod seeds;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use document::{deserialize, serialize, DocumentError, SCHEMA_VERSION};
pub use dot::{to_dot, DOT_SCHEMA};
pub use seeds::{encode_basic_rnn, encode_gru, encode_lstm, new_base_architecture, SeedKind};

/// Stable identity of a block inside one architecture lineage.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlockId(pub u32);

impl BlockId {
    /// Pseudo-block used by task models to key their readout projection.
    pub const READOUT: BlockId = BlockId(u32::MAX);
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationFn {
    LinearB,
    Linear,
    Identity,
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu,
}

impl ActivationFn {
    pub const ALL: [ActivationFn; 7] = [
        ActivationFn::LinearB,
        ActivationFn::Linear,
        ActivationFn::Identity,
        ActivationFn::Sigmoid,
        ActivationFn::Tanh,
        ActivationFn::Relu,
        ActivationFn::LeakyRelu,
    ];

    /// Weighted activations own a trainable matrix (and `LinearB` a bias).
    pub fn is_parametric(self) -> bool {
        matches!(self, ActivationFn::LinearB | ActivationFn::Linear)
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationFn::LinearB => "linear_b",
            ActivationFn::Linear => "linear",
            ActivationFn::Identity => "identity",
            ActivationFn::Sigmoid => "sigmoid",
            ActivationFn::Tanh => "tanh",
            ActivationFn::Relu => "relu",
            ActivationFn::LeakyRelu => "leaky_relu",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinationFn {
    Add,
    Sub,
    ElemMul,
}

impl CombinationFn {
    pub const ALL: [CombinationFn; 3] = [CombinationFn::Add, CombinationFn::Sub, CombinationFn::ElemMul];

    pub fn name(self) -> &'static str {
        match self {
            CombinationFn::Add => "add",
            CombinationFn::Sub => "sub",
            CombinationFn::ElemMul => "elem_mul",
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockKind {
    InputX,
    InputH,
    InputC,
    OutputH,
    OutputC,
    Activation(ActivationFn),
    Combination(CombinationFn),
}

impl BlockKind {
    /// Number of inputs a block of this kind must have.
    pub fn arity(self) -> usize {
        match self {
            BlockKind::InputX | BlockKind::InputH | BlockKind::InputC => 0,
            BlockKind::OutputH | BlockKind::OutputC | BlockKind::Activation(_) => 1,
            BlockKind::Combination(_) => 2,
        }
    }

    pub fn is_input(self) -> bool {
        matches!(self, BlockKind::InputX | BlockKind::InputH | BlockKind::InputC)
    }

    pub fn is_output(self) -> bool {
        matches!(self, BlockKind::OutputH | BlockKind::OutputC)
    }

    pub fn is_hidden(self) -> bool {
        !self.is_input() && !self.is_output()
    }

    pub fn label(self) -> &'static str {
        match self {
            BlockKind::InputX => "x",
            BlockKind::InputH => "h",
            BlockKind::InputC => "c",
            BlockKind::OutputH => "h_next",
            BlockKind::OutputC => "c_next",
            BlockKind::Activation(f) => f.name(),
            BlockKind::Combination(f) => f.name(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub id: BlockId,
    pub kind: BlockKind,
    pub inputs: Vec<BlockId>,
}

/// Lineage identifier of the form `X_c`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Identifier {
    pub prefix: String,
    pub counter: u64,
}

impl Identifier {
    pub fn new(prefix: impl Into<String>, counter: u64) -> Self {
        Identifier { prefix: prefix.into(), counter }
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.prefix, self.counter)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed identifier `{0}` (expected PREFIX_COUNTER)")]
pub struct IdentifierParseError(pub String);

impl FromStr for Identifier {
    type Err = IdentifierParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (prefix, counter) = s
            .rsplit_once('_')
            .ok_or_else(|| IdentifierParseError(s.to_string()))?;
        if prefix.is_empty() {
            return Err(IdentifierParseError(s.to_string()));
        }
        let counter = counter.parse().map_err(|_| IdentifierParseError(s.to_string()))?;
        Ok(Identifier::new(prefix, counter))
    }
}

impl Serialize for Identifier {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Identifier {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ArchError {
    #[error("intra-cell edges contain a cycle")]
    CycleDetected,
    #[error("block {0} referenced but not present")]
    UnknownBlock(BlockId),
}

/// Which of the two slot widths a block's output carries.
///
/// Only blocks fed (transitively, through non-weighted blocks) by `x` have the
/// input width; weighted activations always project to the hidden width.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum WidthClass {
    Input,
    Hidden,
}

/// The genotype: a keyed collection of blocks plus its lineage identifier.
///
/// Architectures are treated as values; morphisms clone and return new ones.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub identifier: Identifier,
    blocks: BTreeMap<BlockId, Block>,
    next_id: u32,
}

impl Architecture {
    pub fn new(identifier: Identifier) -> Self {
        Architecture { identifier, blocks: BTreeMap::new(), next_id: 0 }
    }

    /// Builds an architecture from explicit blocks. `next_id` is raised past the
    /// largest id present so fresh ids never collide.
    pub fn from_blocks(identifier: Identifier, blocks: Vec<Block>, next_id: u32) -> Self {
        let mut arch = Architecture::new(identifier);
        for b in blocks {
            arch.next_id = arch.next_id.max(b.id.0 + 1);
            arch.blocks.insert(b.id, b);
        }
        arch.next_id = arch.next_id.max(next_id);
        arch
    }

    /// Appends a block under a fresh id and returns that id.
    pub fn push(&mut self, kind: BlockKind, inputs: Vec<BlockId>) -> BlockId {
        let id = BlockId(self.next_id);
        self.next_id += 1;
        self.blocks.insert(id, Block { id, kind, inputs });
        id
    }

    /// Id the next pushed block will receive.
    pub fn next_id(&self) -> BlockId {
        BlockId(self.next_id)
    }

    pub fn block(&self, id: BlockId) -> Option<&Block> {
        self.blocks.get(&id)
    }

    pub(crate) fn block_mut(&mut self, id: BlockId) -> Option<&mut Block> {
        self.blocks.get_mut(&id)
    }

    pub(crate) fn remove(&mut self, id: BlockId) -> Option<Block> {
        self.blocks.remove(&id)
    }

    pub fn blocks(&self) -> impl Iterator<Item = &Block> {
        self.blocks.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.blocks.keys().copied()
    }

    pub fn contains(&self, id: BlockId) -> bool {
        self.blocks.contains_key(&id)
    }

    /// Count of every block, input and output layer blocks included.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    /// First block of the given kind, by id order.
    pub fn find_kind(&self, kind: BlockKind) -> Option<BlockId> {
        self.blocks.values().find(|b| b.kind == kind).map(|b| b.id)
    }

    pub fn hidden_blocks(&self) -> Vec<BlockId> {
        self.blocks.values().filter(|b| b.kind.is_hidden()).map(|b| b.id).collect()
    }

    pub fn count_where(&self, pred: impl Fn(BlockKind) -> bool) -> usize {
        self.blocks.values().filter(|b| pred(b.kind)).count()
    }

    /// Blocks that list `id` among their inputs, in id order.
    pub fn consumers(&self, id: BlockId) -> Vec<BlockId> {
        self.blocks
            .values()
            .filter(|b| b.inputs.contains(&id))
            .map(|b| b.id)
            .collect()
    }

    /// Replaces every reference to `from` with `to` in the inputs of `consumers`.
    pub(crate) fn rewire(&mut self, consumers: &[BlockId], from: BlockId, to: BlockId) {
        for c in consumers {
            if let Some(b) = self.blocks.get_mut(c) {
                for input in b.inputs.iter_mut().filter(|i| **i == from) {
                    *input = to;
                }
            }
        }
    }

    /// True if `target` is reachable from `source` following data flow.
    pub fn reaches(&self, source: BlockId, target: BlockId) -> bool {
        let mut seen = BTreeSet::new();
        let mut stack = vec![source];
        while let Some(b) = stack.pop() {
            if b == target {
                return true;
            }
            if seen.insert(b) {
                stack.extend(self.consumers(b));
            }
        }
        false
    }

    /// Deterministic topological order; ties are broken by ascending block id.
    pub fn topological_order(&self) -> Result<Vec<BlockId>, ArchError> {
        let mut indegree: BTreeMap<BlockId, usize> = BTreeMap::new();
        let mut successors: BTreeMap<BlockId, Vec<BlockId>> = BTreeMap::new();
        for b in self.blocks.values() {
            indegree.entry(b.id).or_insert(0);
            for input in &b.inputs {
                if !self.blocks.contains_key(input) {
                    return Err(ArchError::UnknownBlock(*input));
                }
                *indegree.entry(b.id).or_insert(0) += 1;
                successors.entry(*input).or_default().push(b.id);
            }
        }
        let mut ready: BTreeSet<BlockId> =
            indegree.iter().filter(|(_, d)| **d == 0).map(|(id, _)| *id).collect();
        let mut order = Vec::with_capacity(self.blocks.len());
        while let Some(id) = ready.pop_first() {
            order.push(id);
            for s in successors.get(&id).map(Vec::as_slice).unwrap_or(&[]) {
                let d = indegree.get_mut(s).expect("successor registered");
                *d -= 1;
                if *d == 0 {
                    ready.insert(*s);
                }
            }
        }
        if order.len() != self.blocks.len() {
            return Err(ArchError::CycleDetected);
        }
        Ok(order)
    }

    /// Output width class per block. Mismatched combinations fall back to
    /// `Hidden`; [`Architecture::validate`] reports them.
    pub fn width_classes(&self) -> Result<BTreeMap<BlockId, WidthClass>, ArchError> {
        let mut classes = BTreeMap::new();
        for id in self.topological_order()? {
            let b = &self.blocks[&id];
            let class = match b.kind {
                BlockKind::InputX => WidthClass::Input,
                BlockKind::InputH | BlockKind::InputC => WidthClass::Hidden,
                BlockKind::Activation(f) if f.is_parametric() => WidthClass::Hidden,
                BlockKind::Combination(_) => {
                    let mut it = b.inputs.iter().map(|i| classes[i]);
                    match (it.next(), it.next()) {
                        (Some(a), Some(c)) if a == c => a,
                        _ => WidthClass::Hidden,
                    }
                }
                _ => b.inputs.first().map(|i| classes[i]).unwrap_or(WidthClass::Hidden),
            };
            classes.insert(id, class);
        }
        Ok(classes)
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_valid()
    }

    /// Hash of the graph structure that ignores block ids and the identifier.
    ///
    /// Each block is hashed together with the hashes of its inputs; the
    /// architecture hash covers the sorted multiset of block hashes.
    pub fn structural_hash(&self) -> String {
        let Ok(order) = self.topological_order() else {
            return "cyclic".to_string();
        };
        let mut node_hash: BTreeMap<BlockId, [u8; 32]> = BTreeMap::new();
        for id in order {
            let b = &self.blocks[&id];
            let mut h = Sha256::new();
            h.update(b.kind.label().as_bytes());
            h.update([b.kind.arity() as u8]);
            for i in &b.inputs {
                h.update(node_hash[i]);
            }
            node_hash.insert(id, h.finalize().into());
        }
        let mut all: Vec<[u8; 32]> = node_hash.into_values().collect();
        all.sort_unstable();
        let mut h = Sha256::new();
        for n in &all {
            h.update(n);
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Which validity rule a violation breaks.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    IoBlockCount,
    ArityMismatch,
    OutputWithoutInput,
    UnknownInput,
    SelfReference,
    OutputConsumed,
    Cycle,
    DanglingBlock,
    HiddenStateUnused,
    WidthMismatch,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::IoBlockCount => "io-block-count",
            Rule::ArityMismatch => "arity-mismatch",
            Rule::OutputWithoutInput => "output-without-input",
            Rule::UnknownInput => "unknown-input",
            Rule::SelfReference => "self-reference",
            Rule::OutputConsumed => "output-consumed",
            Rule::Cycle => "cycle",
            Rule::DanglingBlock => "dangling-block",
            Rule::HiddenStateUnused => "hidden-state-unused",
            Rule::WidthMismatch => "width-mismatch",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub block: Option<BlockId>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.block {
            Some(b) => write!(f, "{} at {}", self.rule.as_str(), b),
            None => f.write_str(self.rule.as_str()),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, block: Option<BlockId>, rule: Rule) {
        self.violations.push(Violation { block, rule });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(Violation::to_string).collect();
        f.write_str(&parts.join(", "))
    }
}

fn validate(arch: &Architecture) -> ValidationReport {
    let mut report = ValidationReport::default();

    for kind in [
        BlockKind::InputX,
        BlockKind::InputH,
        BlockKind::InputC,
        BlockKind::OutputH,
        BlockKind::OutputC,
    ] {
        if arch.count_where(|k| k == kind) != 1 {
            report.push(None, Rule::IoBlockCount);
        }
    }

    let mut structurally_sound = true;
    for b in arch.blocks() {
        if b.kind.is_output() && b.inputs.is_empty() {
            report.push(Some(b.id), Rule::OutputWithoutInput);
            structurally_sound = false;
        } else if b.inputs.len() != b.kind.arity() {
            report.push(Some(b.id), Rule::ArityMismatch);
            structurally_sound = false;
        }
        for i in &b.inputs {
            if *i == b.id {
                report.push(Some(b.id), Rule::SelfReference);
                structurally_sound = false;
            } else if let Some(src) = arch.block(*i) {
                if src.kind.is_output() {
                    report.push(Some(b.id), Rule::OutputConsumed);
                }
            } else {
                report.push(Some(b.id), Rule::UnknownInput);
                structurally_sound = false;
            }
        }
    }

    if structurally_sound && arch.topological_order().is_err() {
        report.push(None, Rule::Cycle);
        structurally_sound = false;
    }

    // Every hidden block must feed some output.
    let mut live: BTreeSet<BlockId> = BTreeSet::new();
    let mut queue: VecDeque<BlockId> =
        arch.blocks().filter(|b| b.kind.is_output()).map(|b| b.id).collect();
    while let Some(id) = queue.pop_front() {
        if !live.insert(id) {
            continue;
        }
        if let Some(b) = arch.block(id) {
            queue.extend(b.inputs.iter().copied());
        }
    }
    for b in arch.blocks().filter(|b| b.kind.is_hidden()) {
        if !live.contains(&b.id) {
            report.push(Some(b.id), Rule::DanglingBlock);
        }
    }

    if let Some(h) = arch.find_kind(BlockKind::InputH) {
        if arch.consumers(h).is_empty() {
            report.push(Some(h), Rule::HiddenStateUnused);
        }
    }

    if structurally_sound {
        if let Ok(classes) = arch.width_classes() {
            for b in arch.blocks() {
                let bad = match b.kind {
                    BlockKind::Combination(_) => classes[&b.inputs[0]] != classes[&b.inputs[1]],
                    BlockKind::OutputH | BlockKind::OutputC => {
                        classes[&b.inputs[0]] != WidthClass::Hidden
                    }
                    _ => false,
                };
                if bad {
                    report.push(Some(b.id), Rule::WidthMismatch);
                }
            }
        }
    }

    report
}
