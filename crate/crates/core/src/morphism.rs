//! Approximate network morphisms over cell genotypes.
//!
//! Each random operator picks a concrete [`Transform`] and applies it. A
//! transform records every choice it made (target blocks, drawn functions and
//! the id of any block it creates), so [`Transform::apply`] replays it exactly
//! and parameter inheritance can key on the new block ids.
//!
//! Operators that cannot find an admissible target return [`NotApplicable`].
//! Candidate pairs that would introduce an intra-cell cycle or join slots of
//! different widths are rejected and resampled up to [`MAX_RESAMPLES`] times.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arch::{
    new_base_architecture, ActivationFn, Architecture, BlockId, BlockKind, CombinationFn, Identifier,
    ValidationReport, WidthClass,
};

pub const MAX_RESAMPLES: usize = 32;

/// Upper bound of the number of constructive transforms applied to a base
/// architecture when sampling the initial population.
pub const INITIAL_MAX_TRANSFORMS: usize = 10;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    AddUnit,
    RemoveUnit,
    AddConnection,
    RemoveConnection,
    AddRecurrentConnection,
    ChangeActivation,
    ChangeCombination,
}

impl TransformKind {
    pub const ALL: [TransformKind; 7] = [
        TransformKind::AddUnit,
        TransformKind::RemoveUnit,
        TransformKind::AddConnection,
        TransformKind::RemoveConnection,
        TransformKind::AddRecurrentConnection,
        TransformKind::ChangeActivation,
        TransformKind::ChangeCombination,
    ];

    /// Kinds allowed while growing initial architectures.
    pub const CONSTRUCTIVE: [TransformKind; 5] = [
        TransformKind::AddUnit,
        TransformKind::AddConnection,
        TransformKind::AddRecurrentConnection,
        TransformKind::ChangeActivation,
        TransformKind::ChangeCombination,
    ];

    pub fn is_destructive(self) -> bool {
        matches!(self, TransformKind::RemoveUnit | TransformKind::RemoveConnection)
    }

    /// Exact change in block count when the transform applies.
    pub fn block_delta(self) -> isize {
        match self {
            TransformKind::AddUnit | TransformKind::AddConnection | TransformKind::AddRecurrentConnection => 1,
            TransformKind::RemoveUnit | TransformKind::RemoveConnection => -1,
            TransformKind::ChangeActivation | TransformKind::ChangeCombination => 0,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Error)]
#[error("{0:?} is not applicable to this architecture")]
pub struct NotApplicable(pub TransformKind);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReplayError {
    #[error("transform references missing or mismatched block {0}")]
    BadReference(BlockId),
    #[error("recorded new block id {recorded} but architecture would assign {actual}")]
    IdMismatch { recorded: BlockId, actual: BlockId },
    #[error("replayed architecture is invalid: {0}")]
    Invalid(ValidationReport),
}

/// One fully determined structural edit.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    AddUnit { target: BlockId, slot: usize, new_block: BlockId, activation: ActivationFn },
    RemoveUnit { removed: BlockId },
    AddConnection { first: BlockId, second: BlockId, new_block: BlockId },
    RemoveConnection { removed: BlockId },
    AddRecurrentConnection { output: BlockId, source: BlockId, new_block: BlockId },
    ChangeActivation { block: BlockId, from: ActivationFn, to: ActivationFn },
    ChangeCombination { block: BlockId, from: CombinationFn, to: CombinationFn },
}

impl Transform {
    pub fn kind(&self) -> TransformKind {
        match self {
            Transform::AddUnit { .. } => TransformKind::AddUnit,
            Transform::RemoveUnit { .. } => TransformKind::RemoveUnit,
            Transform::AddConnection { .. } => TransformKind::AddConnection,
            Transform::RemoveConnection { .. } => TransformKind::RemoveConnection,
            Transform::AddRecurrentConnection { .. } => TransformKind::AddRecurrentConnection,
            Transform::ChangeActivation { .. } => TransformKind::ChangeActivation,
            Transform::ChangeCombination { .. } => TransformKind::ChangeCombination,
        }
    }

    pub fn affected(&self) -> Vec<BlockId> {
        match *self {
            Transform::AddUnit { target, new_block, .. } => vec![new_block, target],
            Transform::RemoveUnit { removed } | Transform::RemoveConnection { removed } => vec![removed],
            Transform::AddConnection { first, second, new_block } => vec![new_block, first, second],
            Transform::AddRecurrentConnection { output, source, new_block } => vec![new_block, output, source],
            Transform::ChangeActivation { block, .. } | Transform::ChangeCombination { block, .. } => vec![block],
        }
    }

    /// Block created by this transform, if any.
    pub fn new_block(&self) -> Option<BlockId> {
        match *self {
            Transform::AddUnit { new_block, .. }
            | Transform::AddConnection { new_block, .. }
            | Transform::AddRecurrentConnection { new_block, .. } => Some(new_block),
            _ => None,
        }
    }

    /// Applies the edit without validating the result.
    fn apply_unchecked(&self, arch: &Architecture) -> Result<Architecture, ReplayError> {
        let mut a = arch.clone();
        let expect_fresh = |a: &Architecture, recorded: BlockId| {
            if a.next_id() == recorded {
                Ok(())
            } else {
                Err(ReplayError::IdMismatch { recorded, actual: a.next_id() })
            }
        };
        match *self {
            Transform::AddUnit { target, slot, new_block, activation } => {
                expect_fresh(&a, new_block)?;
                let src = *a
                    .block(target)
                    .and_then(|b| b.inputs.get(slot))
                    .ok_or(ReplayError::BadReference(target))?;
                let id = a.push(BlockKind::Activation(activation), vec![src]);
                a.block_mut(target).expect("checked").inputs[slot] = id;
            }
            Transform::RemoveUnit { removed } | Transform::RemoveConnection { removed } => {
                let b = a.block(removed).ok_or(ReplayError::BadReference(removed))?;
                let ok = matches!(
                    (self, b.kind),
                    (Transform::RemoveUnit { .. }, BlockKind::Activation(_))
                        | (Transform::RemoveConnection { .. }, BlockKind::Combination(CombinationFn::Add))
                );
                if !ok {
                    return Err(ReplayError::BadReference(removed));
                }
                let replacement = b.inputs[0];
                let consumers = a.consumers(removed);
                a.rewire(&consumers, removed, replacement);
                a.remove(removed);
            }
            Transform::AddConnection { first, second, new_block } => {
                expect_fresh(&a, new_block)?;
                for id in [first, second] {
                    if !a.contains(id) {
                        return Err(ReplayError::BadReference(id));
                    }
                }
                let consumers = a.consumers(first);
                let id = a.push(BlockKind::Combination(CombinationFn::Add), vec![first, second]);
                a.rewire(&consumers, first, id);
            }
            Transform::AddRecurrentConnection { output, source, new_block } => {
                expect_fresh(&a, new_block)?;
                if !a.contains(source) {
                    return Err(ReplayError::BadReference(source));
                }
                let old = *a
                    .block(output)
                    .filter(|b| b.kind.is_output())
                    .and_then(|b| b.inputs.first())
                    .ok_or(ReplayError::BadReference(output))?;
                let id = a.push(BlockKind::Combination(CombinationFn::Add), vec![old, source]);
                a.block_mut(output).expect("checked").inputs = vec![id];
            }
            Transform::ChangeActivation { block, from, to } => {
                let b = a.block_mut(block).ok_or(ReplayError::BadReference(block))?;
                if b.kind != BlockKind::Activation(from) {
                    return Err(ReplayError::BadReference(block));
                }
                b.kind = BlockKind::Activation(to);
            }
            Transform::ChangeCombination { block, from, to } => {
                let b = a.block_mut(block).ok_or(ReplayError::BadReference(block))?;
                if b.kind != BlockKind::Combination(from) {
                    return Err(ReplayError::BadReference(block));
                }
                b.kind = BlockKind::Combination(to);
            }
        }
        Ok(a)
    }

    /// Applies the edit and checks that the result is a valid architecture.
    pub fn apply(&self, arch: &Architecture) -> Result<Architecture, ReplayError> {
        let a = self.apply_unchecked(arch)?;
        let report = a.validate();
        if report.is_valid() {
            Ok(a)
        } else {
            Err(ReplayError::Invalid(report))
        }
    }
}

fn try_apply(t: Transform, arch: &Architecture) -> Option<(Architecture, Transform)> {
    t.apply(arch).ok().map(|a| (a, t))
}

fn hidden_where(arch: &Architecture, pred: impl Fn(BlockKind) -> bool) -> Vec<BlockId> {
    arch.blocks().filter(|b| b.kind.is_hidden() && pred(b.kind)).map(|b| b.id).collect()
}

/// Splices a fresh activation block between a block and one of its inputs.
pub fn add_unit<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<(Architecture, Transform), NotApplicable> {
    let targets: Vec<BlockId> = arch.blocks().filter(|b| !b.kind.is_input()).map(|b| b.id).collect();
    let classes = arch.width_classes().map_err(|_| NotApplicable(TransformKind::AddUnit))?;
    for _ in 0..MAX_RESAMPLES {
        let Some(&target) = targets.choose(rng) else { break };
        let inputs = &arch.block(target).expect("listed").inputs;
        let slot = rng.gen_range(0..inputs.len());
        let activation = *ActivationFn::ALL.choose(rng).expect("non-empty");
        // Weighted units only go between hidden-width slots so they can start as identity maps.
        if activation.is_parametric() && classes[&inputs[slot]] == WidthClass::Input {
            continue;
        }
        let t = Transform::AddUnit { target, slot, new_block: arch.next_id(), activation };
        if let Some(ok) = try_apply(t, arch) {
            return Ok(ok);
        }
    }
    Err(NotApplicable(TransformKind::AddUnit))
}

/// Deletes a hidden activation block, handing its input to its consumers.
pub fn remove_unit<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<(Architecture, Transform), NotApplicable> {
    let candidates: Vec<(Architecture, Transform)> = hidden_where(arch, |k| matches!(k, BlockKind::Activation(_)))
        .into_iter()
        .filter_map(|removed| try_apply(Transform::RemoveUnit { removed }, arch))
        .collect();
    candidates
        .choose(rng)
        .cloned()
        .ok_or(NotApplicable(TransformKind::RemoveUnit))
}

fn already_combined(arch: &Architecture, a: BlockId, b: BlockId) -> bool {
    arch.blocks().any(|blk| {
        matches!(blk.kind, BlockKind::Combination(_)) && blk.inputs.contains(&a) && blk.inputs.contains(&b)
    })
}

fn directly_connected(arch: &Architecture, a: BlockId, b: BlockId) -> bool {
    let feeds = |from: BlockId, to: BlockId| arch.block(to).is_some_and(|blk| blk.inputs.contains(&from));
    feeds(a, b) || feeds(b, a)
}

/// Joins two unconnected hidden blocks with a new addition block that replaces
/// the first block as input of all its consumers.
pub fn add_connection<R: Rng + ?Sized>(
    arch: &Architecture,
    rng: &mut R,
) -> Result<(Architecture, Transform), NotApplicable> {
    let hidden = arch.hidden_blocks();
    if hidden.len() >= 2 {
        for _ in 0..MAX_RESAMPLES {
            let pair: Vec<BlockId> = hidden.choose_multiple(rng, 2).copied().collect();
            let (first, second) = (pair[0], pair[1]);
            if directly_connected(arch, first, second) || already_combined(arch, first, second) {
                continue;
            }
            let t = Transform::AddConnection { first, second, new_block: arch.next_id() };
            if let Some(ok) = try_apply(t, arch) {
                return Ok(ok);
            }
        }
    }
    Err(NotApplicable(TransformKind::AddConnection))
}

/// Deletes a hidden addition block; its consumers take its first input
/// instead. Only blocks whose removal leaves no input unused qualify: the
/// first input inherits the consumers, so the second must be consumed
/// elsewhere.
pub fn remove_connection<R: Rng + ?Sized>(
    arch: &Architecture,
    rng: &mut R,
) -> Result<(Architecture, Transform), NotApplicable> {
    let candidates: Vec<(Architecture, Transform)> =
        hidden_where(arch, |k| k == BlockKind::Combination(CombinationFn::Add))
            .into_iter()
            .filter(|id| {
                let b = arch.block(*id).expect("listed");
                arch.consumers(b.inputs[1]).iter().any(|c| c != id)
            })
            .filter_map(|removed| try_apply(Transform::RemoveConnection { removed }, arch))
            .collect();
    candidates
        .choose(rng)
        .cloned()
        .ok_or(NotApplicable(TransformKind::RemoveConnection))
}

/// Adds a hidden block into `h_next` or `c_next` through a new addition block.
pub fn add_recurrent_connection<R: Rng + ?Sized>(
    arch: &Architecture,
    rng: &mut R,
) -> Result<(Architecture, Transform), NotApplicable> {
    let outputs: Vec<BlockId> = arch.blocks().filter(|b| b.kind.is_output()).map(|b| b.id).collect();
    let hidden = arch.hidden_blocks();
    if !hidden.is_empty() && !outputs.is_empty() {
        for _ in 0..MAX_RESAMPLES {
            let output = *outputs.choose(rng).expect("non-empty");
            let source = *hidden.choose(rng).expect("non-empty");
            if arch.block(output).expect("listed").inputs.contains(&source) {
                continue;
            }
            let t = Transform::AddRecurrentConnection { output, source, new_block: arch.next_id() };
            if let Some(ok) = try_apply(t, arch) {
                return Ok(ok);
            }
        }
    }
    Err(NotApplicable(TransformKind::AddRecurrentConnection))
}

/// Swaps one hidden activation for a different function.
pub fn change_activation<R: Rng + ?Sized>(
    arch: &Architecture,
    rng: &mut R,
) -> Result<(Architecture, Transform), NotApplicable> {
    let candidates = hidden_where(arch, |k| matches!(k, BlockKind::Activation(_)));
    if !candidates.is_empty() {
        for _ in 0..MAX_RESAMPLES {
            let block = *candidates.choose(rng).expect("non-empty");
            let BlockKind::Activation(from) = arch.block(block).expect("listed").kind else { unreachable!() };
            let others: Vec<ActivationFn> = ActivationFn::ALL.into_iter().filter(|f| *f != from).collect();
            let to = *others.choose(rng).expect("six alternatives");
            if let Some(ok) = try_apply(Transform::ChangeActivation { block, from, to }, arch) {
                return Ok(ok);
            }
        }
    }
    Err(NotApplicable(TransformKind::ChangeActivation))
}

/// Swaps one hidden combination for a different method.
pub fn change_combination<R: Rng + ?Sized>(
    arch: &Architecture,
    rng: &mut R,
) -> Result<(Architecture, Transform), NotApplicable> {
    let candidates = hidden_where(arch, |k| matches!(k, BlockKind::Combination(_)));
    let Some(&block) = candidates.choose(rng) else {
        return Err(NotApplicable(TransformKind::ChangeCombination));
    };
    let BlockKind::Combination(from) = arch.block(block).expect("listed").kind else { unreachable!() };
    let others: Vec<CombinationFn> = CombinationFn::ALL.into_iter().filter(|f| *f != from).collect();
    let to = *others.choose(rng).expect("two alternatives");
    try_apply(Transform::ChangeCombination { block, from, to }, arch)
        .ok_or(NotApplicable(TransformKind::ChangeCombination))
}

/// Draws and applies one transform of the given kind.
pub fn apply_random<R: Rng + ?Sized>(
    kind: TransformKind,
    arch: &Architecture,
    rng: &mut R,
) -> Result<(Architecture, Transform), NotApplicable> {
    match kind {
        TransformKind::AddUnit => add_unit(arch, rng),
        TransformKind::RemoveUnit => remove_unit(arch, rng),
        TransformKind::AddConnection => add_connection(arch, rng),
        TransformKind::RemoveConnection => remove_connection(arch, rng),
        TransformKind::AddRecurrentConnection => add_recurrent_connection(arch, rng),
        TransformKind::ChangeActivation => change_activation(arch, rng),
        TransformKind::ChangeCombination => change_combination(arch, rng),
    }
}

/// One slot of an offspring's transform sequence. `applied` is `None` when the
/// drawn kind turned out not to be applicable; the slot is still consumed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub kind: TransformKind,
    pub applied: Option<Transform>,
}

impl Step {
    pub fn affected(&self) -> Vec<BlockId> {
        self.applied.as_ref().map(Transform::affected).unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MorphismRecord {
    pub parent: Identifier,
    pub offspring: Identifier,
    pub steps: Vec<Step>,
}

impl MorphismRecord {
    pub fn applied(&self) -> impl Iterator<Item = &Transform> {
        self.steps.iter().filter_map(|s| s.applied.as_ref())
    }

    /// Re-applies the recorded steps to `parent`.
    pub fn replay(&self, parent: &Architecture) -> Result<Architecture, ReplayError> {
        let mut a = parent.clone();
        for t in self.applied() {
            a = t.apply(&a)?;
        }
        a.identifier = self.offspring.clone();
        Ok(a)
    }
}

/// Hands out lineage identifiers.
///
/// Offspring keep their parent's prefix and receive the next unused counter
/// for that prefix; random architectures get `rdmY_0` with a fresh `Y`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    counters: BTreeMap<String, u64>,
    next_random: u64,
}

impl Lineage {
    pub fn new() -> Self {
        Self::default()
    }

    /// Marks an identifier as taken.
    pub fn register(&mut self, id: &Identifier) {
        let c = self.counters.entry(id.prefix.clone()).or_insert(id.counter);
        *c = (*c).max(id.counter);
    }

    pub fn next_offspring(&mut self, parent: &Identifier) -> Identifier {
        let c = self.counters.entry(parent.prefix.clone()).or_insert(parent.counter);
        *c = (*c).max(parent.counter) + 1;
        Identifier::new(parent.prefix.clone(), *c)
    }

    pub fn next_random(&mut self) -> Identifier {
        loop {
            let prefix = format!("rdm{}", self.next_random);
            self.next_random += 1;
            if !self.counters.contains_key(&prefix) {
                let id = Identifier::new(prefix, 0);
                self.register(&id);
                return id;
            }
        }
    }
}

/// Produces one offspring by applying between 1 and `max_transforms`
/// uniformly drawn transforms.
pub fn generate_offspring<R: Rng + ?Sized>(
    parent: &Architecture,
    max_transforms: usize,
    lineage: &mut Lineage,
    rng: &mut R,
) -> (Architecture, MorphismRecord) {
    assert!(max_transforms >= 1, "max_transforms must be at least 1");
    let k = rng.gen_range(1..=max_transforms);
    let (mut child, steps) = apply_chain(parent, k, &TransformKind::ALL, rng);
    child.identifier = lineage.next_offspring(&parent.identifier);
    let record = MorphismRecord { parent: parent.identifier.clone(), offspring: child.identifier.clone(), steps };
    (child, record)
}

fn apply_chain<R: Rng + ?Sized>(
    start: &Architecture,
    k: usize,
    kinds: &[TransformKind],
    rng: &mut R,
) -> (Architecture, Vec<Step>) {
    let mut arch = start.clone();
    let mut steps = Vec::with_capacity(k);
    for _ in 0..k {
        let kind = *kinds.choose(rng).expect("non-empty kind list");
        match apply_random(kind, &arch, rng) {
            Ok((next, t)) => {
                arch = next;
                steps.push(Step { kind, applied: Some(t) });
            }
            Err(NotApplicable(_)) => steps.push(Step { kind, applied: None }),
        }
    }
    (arch, steps)
}

/// A base architecture grown by 1 to 10 constructive transforms.
pub fn random_initial_architecture<R: Rng + ?Sized>(lineage: &mut Lineage, rng: &mut R) -> Architecture {
    let base = new_base_architecture(rng);
    let k = rng.gen_range(1..=INITIAL_MAX_TRANSFORMS);
    let (mut arch, _) = apply_chain(&base, k, &TransformKind::CONSTRUCTIVE, rng);
    arch.identifier = lineage.next_random();
    arch
}
