//! Hand-written seed encodings and the random base architecture.
//!
//! Block ids are assigned in construction order, so the layouts below are
//! stable and documented:
//!
//! * basic RNN (10 blocks): `x=0 h=1 c=2`, `linear_b(x)=3`, `linear_b(h)=4`,
//!   `add=5`, `tanh=6`, `identity(c)=7`, `h_next=8`, `c_next=9`.
//! * LSTM (26 blocks): `x=0 h=1 c=2`; gates f, i, o, g occupy ids 3..=18 as
//!   `[linear_b(x), linear(h), add, act]` quadruples (sigmoid, sigmoid, sigmoid,
//!   tanh); `f*c=19`, `i*g=20`, `c_t=21`, `tanh(c_t)=22`, `o*tanh(c_t)=23`,
//!   `h_next=24`, `c_next=25`.
//! * GRU (23 blocks): `x=0 h=1 c=2`; z gate 3..=6 and r gate 7..=10 as above;
//!   `linear(x)=11`, `r*h=12`, `linear(r*h)=13`, `add=14`, `n=tanh=15`,
//!   `z*h=16`, `z*n=17`, `sub=18`, `h_t=add(18,15)=19`, `identity(c)=20`,
//!   `h_next=21`, `c_next=22`. The `(1-z)*n` term is expanded as
//!   `z*h - z*n + n`, which needs no constant block.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ActivationFn, Architecture, BlockId, BlockKind, CombinationFn, Identifier};

use ActivationFn::*;
use BlockKind::{Activation as Act, Combination as Comb};

/// Architectures that can be supplied as seeds of the initial population.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedKind {
    BasicRnn,
    Lstm,
    Gru,
}

impl SeedKind {
    pub const ALL: [SeedKind; 3] = [SeedKind::BasicRnn, SeedKind::Lstm, SeedKind::Gru];

    /// Identifier prefix (`X` of `X_c`).
    pub fn prefix(self) -> &'static str {
        match self {
            SeedKind::BasicRnn => "BASIC",
            SeedKind::Lstm => "LSTM",
            SeedKind::Gru => "GRU",
        }
    }

    pub fn encode(self) -> Architecture {
        match self {
            SeedKind::BasicRnn => encode_basic_rnn(),
            SeedKind::Lstm => encode_lstm(),
            SeedKind::Gru => encode_gru(),
        }
    }
}

fn io(arch: &mut Architecture) -> (BlockId, BlockId, BlockId) {
    let x = arch.push(BlockKind::InputX, vec![]);
    let h = arch.push(BlockKind::InputH, vec![]);
    let c = arch.push(BlockKind::InputC, vec![]);
    (x, h, c)
}

/// `act(W_x x + b + W_h h)`: returns the activation block id.
fn gate(arch: &mut Architecture, x: BlockId, h: BlockId, act: ActivationFn) -> BlockId {
    let wx = arch.push(Act(LinearB), vec![x]);
    let wh = arch.push(Act(Linear), vec![h]);
    let sum = arch.push(Comb(CombinationFn::Add), vec![wx, wh]);
    arch.push(Act(act), vec![sum])
}

/// The 10-block starting point for random architectures.
pub fn new_base_architecture<R: Rng + ?Sized>(rng: &mut R) -> Architecture {
    let combination = *CombinationFn::ALL.choose(rng).expect("non-empty");
    let activation = *ActivationFn::ALL.choose(rng).expect("non-empty");
    let mut a = Architecture::new(Identifier::new("base", 0));
    let (x, h, c) = io(&mut a);
    let lx = a.push(Act(Linear), vec![x]);
    let lh = a.push(Act(Linear), vec![h]);
    let lc = a.push(Act(Linear), vec![c]);
    let comb = a.push(Comb(combination), vec![lx, lh]);
    let act = a.push(Act(activation), vec![comb]);
    a.push(BlockKind::OutputH, vec![act]);
    a.push(BlockKind::OutputC, vec![lc]);
    a
}

/// `h_t = tanh(W x + b_x + U h + b_h)` with an inert identity cell path.
pub fn encode_basic_rnn() -> Architecture {
    let mut a = Architecture::new(Identifier::new(SeedKind::BasicRnn.prefix(), 0));
    let (x, h, c) = io(&mut a);
    let wx = a.push(Act(LinearB), vec![x]);
    let wh = a.push(Act(LinearB), vec![h]);
    let sum = a.push(Comb(CombinationFn::Add), vec![wx, wh]);
    let t = a.push(Act(Tanh), vec![sum]);
    let pass = a.push(Act(Identity), vec![c]);
    a.push(BlockKind::OutputH, vec![t]);
    a.push(BlockKind::OutputC, vec![pass]);
    a
}

pub fn encode_lstm() -> Architecture {
    let mut a = Architecture::new(Identifier::new(SeedKind::Lstm.prefix(), 0));
    let (x, h, c) = io(&mut a);
    let f = gate(&mut a, x, h, Sigmoid);
    let i = gate(&mut a, x, h, Sigmoid);
    let o = gate(&mut a, x, h, Sigmoid);
    let g = gate(&mut a, x, h, Tanh);
    let fc = a.push(Comb(CombinationFn::ElemMul), vec![f, c]);
    let ig = a.push(Comb(CombinationFn::ElemMul), vec![i, g]);
    let c_t = a.push(Comb(CombinationFn::Add), vec![fc, ig]);
    let tc = a.push(Act(Tanh), vec![c_t]);
    let h_t = a.push(Comb(CombinationFn::ElemMul), vec![o, tc]);
    a.push(BlockKind::OutputH, vec![h_t]);
    a.push(BlockKind::OutputC, vec![c_t]);
    a
}

pub fn encode_gru() -> Architecture {
    let mut a = Architecture::new(Identifier::new(SeedKind::Gru.prefix(), 0));
    let (x, h, c) = io(&mut a);
    let z = gate(&mut a, x, h, Sigmoid);
    let r = gate(&mut a, x, h, Sigmoid);
    let wx = a.push(Act(Linear), vec![x]);
    let rh = a.push(Comb(CombinationFn::ElemMul), vec![r, h]);
    let wrh = a.push(Act(Linear), vec![rh]);
    let sum = a.push(Comb(CombinationFn::Add), vec![wx, wrh]);
    let n = a.push(Act(Tanh), vec![sum]);
    let zh = a.push(Comb(CombinationFn::ElemMul), vec![z, h]);
    let zn = a.push(Comb(CombinationFn::ElemMul), vec![z, n]);
    let diff = a.push(Comb(CombinationFn::Sub), vec![zh, zn]);
    let h_t = a.push(Comb(CombinationFn::Add), vec![diff, n]);
    let pass = a.push(Act(Identity), vec![c]);
    a.push(BlockKind::OutputH, vec![h_t]);
    a.push(BlockKind::OutputC, vec![pass]);
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn block_count_anchors() {
        assert_eq!(encode_lstm().block_count(), 26);
        assert_eq!(encode_gru().block_count(), 23);
        assert_eq!(encode_basic_rnn().block_count(), 10);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(new_base_architecture(&mut rng).block_count(), 10);
        }
    }

    #[test]
    fn seeds_validate() {
        for kind in SeedKind::ALL {
            let a = kind.encode();
            assert!(a.is_valid(), "{kind:?}: {}", a.validate());
        }
    }

    #[test]
    fn base_architecture_shape() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = new_base_architecture(&mut rng);
            assert!(a.is_valid());
            assert_eq!(a.count_where(|k| matches!(k, BlockKind::Combination(_))), 1);
            assert_eq!(a.count_where(|k| matches!(k, BlockKind::Activation(_))), 4);
            let h_next = a.block(a.find_kind(BlockKind::OutputH).unwrap()).unwrap();
            let c_next = a.block(a.find_kind(BlockKind::OutputC).unwrap()).unwrap();
            // b8 and b6 in one-based numbering.
            assert_eq!(h_next.inputs, vec![BlockId(7)]);
            assert_eq!(c_next.inputs, vec![BlockId(5)]);
        }
    }

    #[test]
    fn base_draws_cover_all_functions() {
        let mut combos = std::collections::BTreeSet::new();
        let mut acts = std::collections::BTreeSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..400 {
            let a = new_base_architecture(&mut rng);
            for b in a.blocks() {
                match b.kind {
                    BlockKind::Combination(f) => {
                        combos.insert(f);
                    }
                    BlockKind::Activation(f) if b.id == BlockId(7) => {
                        acts.insert(f);
                    }
                    _ => {}
                }
            }
        }
        assert_eq!(combos.len(), 3);
        assert_eq!(acts.len(), 7);
    }

    #[test]
    fn basic_rnn_topology() {
        let a = encode_basic_rnn();
        assert_eq!(a.count_where(|k| matches!(k, BlockKind::Combination(_))), 1);
        assert_eq!(a.block(BlockId(5)).unwrap().kind, Comb(CombinationFn::Add));
        let h_next = a.block(a.find_kind(BlockKind::OutputH).unwrap()).unwrap();
        assert_eq!(a.block(h_next.inputs[0]).unwrap().kind, Act(Tanh));
        let order = a.topological_order().unwrap();
        let pos = |id: u32| order.iter().position(|b| *b == BlockId(id)).unwrap();
        assert!(pos(3) < pos(5) && pos(4) < pos(5) && pos(5) < pos(6));
    }

    #[test]
    fn lstm_uses_cell_state_gru_does_not() {
        let lstm = encode_lstm();
        let c = lstm.find_kind(BlockKind::InputC).unwrap();
        assert!(lstm
            .consumers(c)
            .iter()
            .any(|b| matches!(lstm.block(*b).unwrap().kind, Comb(CombinationFn::ElemMul))));

        let gru = encode_gru();
        let c = gru.find_kind(BlockKind::InputC).unwrap();
        let h_next = gru.find_kind(BlockKind::OutputH).unwrap();
        assert!(!gru.reaches(c, h_next));
        assert_eq!(gru.consumers(c), vec![BlockId(20)]);
    }
}
