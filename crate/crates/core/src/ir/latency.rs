use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Block, OpKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatencyError {
    #[error("line {line}: expected `kind = cycles`")]
    Malformed { line: usize },
    #[error("line {line}: unknown instruction kind `{kind}`")]
    UnknownKind { line: usize, kind: String },
    #[error("line {line}: latency must be a positive integer, got `{value}`")]
    BadValue { line: usize, value: String },
}

/// Cycle cost per instruction kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyModel {
    table: BTreeMap<OpKind, u32>,
}

impl Default for LatencyModel {
    fn default() -> Self {
        let table = OpKind::ALL
            .iter()
            .map(|&k| {
                let c = match k {
                    OpKind::LoadShared | OpKind::StoreShared => 20,
                    OpKind::LoadGlobal | OpKind::StoreGlobal => 100,
                    _ => 1,
                };
                (k, c)
            })
            .collect();
        LatencyModel { table }
    }
}

impl LatencyModel {
    /// A model where every kind costs one cycle.
    pub fn unit() -> Self {
        LatencyModel {
            table: OpKind::ALL.iter().map(|&k| (k, 1)).collect(),
        }
    }

    pub fn get(&self, k: OpKind) -> u32 {
        self.table.get(&k).copied().unwrap_or(1)
    }

    pub fn set(&mut self, k: OpKind, cycles: u32) {
        self.table.insert(k, cycles);
    }

    /// Overlay `kind = cycles` lines onto the default model. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, LatencyError> {
        let mut m = LatencyModel::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (k, v) = body
                .split_once('=')
                .ok_or(LatencyError::Malformed { line })?;
            let (k, v) = (k.trim(), v.trim());
            let kind = OpKind::from_name(k).ok_or_else(|| LatencyError::UnknownKind {
                line,
                kind: k.to_string(),
            })?;
            let cycles: u32 =
                v.parse()
                    .ok()
                    .filter(|&c| c > 0)
                    .ok_or_else(|| LatencyError::BadValue {
                        line,
                        value: v.to_string(),
                    })?;
            m.set(kind, cycles);
        }
        Ok(m)
    }
}

/// Issue cost of a block: its instructions plus its terminator. Phis are free.
pub fn block_latency(b: &Block, model: &LatencyModel) -> u64 {
    b.insts
        .iter()
        .map(|i| u64::from(model.get(i.opcode.kind())))
        .sum::<u64>()
        + u64::from(model.get(b.term.kind()))
}
