//! JSON architecture documents.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ActivationFn, Architecture, Block, BlockId, BlockKind, CombinationFn, Identifier, ValidationReport};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("unsupported schema_version {0} (expected {SCHEMA_VERSION})")]
    Schema(u32),
    #[error("invalid architecture: {0}")]
    Validation(ValidationReport),
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindTag {
    InputX,
    InputH,
    InputC,
    OutputH,
    OutputC,
    Activation,
    Combination,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockDoc {
    id: BlockId,
    kind: KindTag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    activation: Option<ActivationFn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    combination: Option<CombinationFn>,
    inputs: Vec<BlockId>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchitectureDoc {
    schema_version: u32,
    identifier: Identifier,
    #[serde(default)]
    next_block_id: u32,
    blocks: Vec<BlockDoc>,
}

pub fn serialize(arch: &Architecture) -> String {
    let doc = ArchitectureDoc {
        schema_version: SCHEMA_VERSION,
        identifier: arch.identifier.clone(),
        next_block_id: arch.next_id().0,
        blocks: arch
            .blocks()
            .map(|b| {
                let (kind, activation, combination) = match b.kind {
                    BlockKind::InputX => (KindTag::InputX, None, None),
                    BlockKind::InputH => (KindTag::InputH, None, None),
                    BlockKind::InputC => (KindTag::InputC, None, None),
                    BlockKind::OutputH => (KindTag::OutputH, None, None),
                    BlockKind::OutputC => (KindTag::OutputC, None, None),
                    BlockKind::Activation(f) => (KindTag::Activation, Some(f), None),
                    BlockKind::Combination(f) => (KindTag::Combination, None, Some(f)),
                };
                BlockDoc { id: b.id, kind, activation, combination, inputs: b.inputs.clone() }
            })
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("architecture documents always serialize")
}

fn parse_err(e: serde_json::Error) -> DocumentError {
    DocumentError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

pub fn deserialize(text: &str) -> Result<Architecture, DocumentError> {
    let doc: ArchitectureDoc = serde_json::from_str(text).map_err(parse_err)?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(DocumentError::Schema(doc.schema_version));
    }
    let mut blocks = Vec::with_capacity(doc.blocks.len());
    let mut seen = std::collections::BTreeSet::new();
    for b in doc.blocks {
        let kind = match (b.kind, b.activation, b.combination) {
            (KindTag::InputX, None, None) => BlockKind::InputX,
            (KindTag::InputH, None, None) => BlockKind::InputH,
            (KindTag::InputC, None, None) => BlockKind::InputC,
            (KindTag::OutputH, None, None) => BlockKind::OutputH,
            (KindTag::OutputC, None, None) => BlockKind::OutputC,
            (KindTag::Activation, Some(f), None) => BlockKind::Activation(f),
            (KindTag::Combination, None, Some(f)) => BlockKind::Combination(f),
            _ => {
                return Err(DocumentError::Parse {
                    line: 0,
                    column: 0,
                    message: format!("block {}: kind does not match activation/combination fields", b.id),
                })
            }
        };
        if !seen.insert(b.id) {
            return Err(DocumentError::Parse {
                line: 0,
                column: 0,
                message: format!("duplicate block id {}", b.id),
            });
        }
        blocks.push(Block { id: b.id, kind, inputs: b.inputs });
    }
    let arch = Architecture::from_blocks(doc.identifier, blocks, doc.next_block_id);
    let report = arch.validate();
    if !report.is_valid() {
        return Err(DocumentError::Validation(report));
    }
    Ok(arch)
}
