use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::params::{LinearParams, ParamStore};
use super::CellError;
use crate::arch::{ActivationFn, ArchError, Architecture, BlockId, BlockKind, CombinationFn, WidthClass};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellDims {
    pub input_dim: usize,
    pub hidden_dim: usize,
}

impl CellDims {
    pub fn new(input_dim: usize, hidden_dim: usize) -> Self {
        assert!(input_dim >= 1 && hidden_dim >= 1, "cell dimensions must be positive");
        CellDims { input_dim, hidden_dim }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Op {
    InputX,
    InputH,
    InputC,
    /// `W v (+ b)`, parameters keyed by the owning block.
    Weighted { bias: bool },
    Identity,
    Sigmoid,
    Tanh,
    Relu,
    LeakyRelu,
    Add,
    Sub,
    Mul,
    OutputH,
    OutputC,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instruction {
    pub block: BlockId,
    pub op: Op,
    /// Slot indices of the operands; slot `i` is written by instruction `i`.
    pub inputs: Vec<usize>,
    pub width: usize,
}

/// Shape of one weighted block's parameters.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct ParamShape {
    pub rows: usize,
    pub cols: usize,
    pub bias: bool,
}

impl ParamShape {
    pub fn count(&self) -> usize {
        self.rows * self.cols + if self.bias { self.rows } else { 0 }
    }
}

/// Straight-line program realizing one step of a cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellProgram {
    pub dims: CellDims,
    pub leaky_slope: f64,
    instructions: Vec<Instruction>,
    shapes: BTreeMap<BlockId, ParamShape>,
    h_out: usize,
    c_out: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepState {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl StepState {
    pub fn zeros(dims: CellDims) -> Self {
        StepState { h: vec![0.0; dims.hidden_dim], c: vec![0.0; dims.hidden_dim] }
    }
}

/// Values of every slot at one step, recorded for the reverse pass.
#[derive(Clone, Debug, PartialEq)]
pub struct StepTrace {
    pub slots: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tape {
    pub steps: Vec<StepTrace>,
}

/// Loss gradient arriving at the `h_t` and `c_t` outputs of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepGrad {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
}

impl StepGrad {
    pub fn zeros(dims: CellDims) -> Self {
        StepGrad { h: vec![0.0; dims.hidden_dim], c: vec![0.0; dims.hidden_dim] }
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl CellProgram {
    pub fn compile(arch: &Architecture, dims: CellDims) -> Result<Self, CellError> {
        let order = arch.topological_order().map_err(|e| match e {
            ArchError::CycleDetected => CellError::CycleDetected,
            ArchError::UnknownBlock(b) => CellError::Shape(format!("unknown block {b}")),
        })?;
        let classes = arch.width_classes().map_err(|_| CellError::CycleDetected)?;
        let slot_of: BTreeMap<BlockId, usize> = order.iter().enumerate().map(|(i, b)| (*b, i)).collect();
        let width = |class: WidthClass| match class {
            WidthClass::Input => dims.input_dim,
            WidthClass::Hidden => dims.hidden_dim,
        };

        let mut instructions = Vec::with_capacity(order.len());
        let mut shapes = BTreeMap::new();
        let (mut h_out, mut c_out) = (None, None);
        for (slot, id) in order.iter().enumerate() {
            let b = arch.block(*id).expect("ordered ids exist");
            let inputs: Vec<usize> = b.inputs.iter().map(|i| slot_of[i]).collect();
            let in_widths: Vec<usize> = inputs.iter().map(|s| instructions_width(&instructions, *s)).collect();
            let op = match b.kind {
                BlockKind::InputX => Op::InputX,
                BlockKind::InputH => Op::InputH,
                BlockKind::InputC => Op::InputC,
                BlockKind::OutputH => {
                    h_out = Some(slot);
                    Op::OutputH
                }
                BlockKind::OutputC => {
                    c_out = Some(slot);
                    Op::OutputC
                }
                BlockKind::Activation(f) => match f {
                    ActivationFn::LinearB | ActivationFn::Linear => {
                        let bias = f == ActivationFn::LinearB;
                        shapes.insert(*id, ParamShape { rows: dims.hidden_dim, cols: in_widths[0], bias });
                        Op::Weighted { bias }
                    }
                    ActivationFn::Identity => Op::Identity,
                    ActivationFn::Sigmoid => Op::Sigmoid,
                    ActivationFn::Tanh => Op::Tanh,
                    ActivationFn::Relu => Op::Relu,
                    ActivationFn::LeakyRelu => Op::LeakyRelu,
                },
                BlockKind::Combination(f) => {
                    if in_widths[0] != in_widths[1] {
                        return Err(CellError::Shape(format!(
                            "combination {id} joins widths {} and {}",
                            in_widths[0], in_widths[1]
                        )));
                    }
                    match f {
                        CombinationFn::Add => Op::Add,
                        CombinationFn::Sub => Op::Sub,
                        CombinationFn::ElemMul => Op::Mul,
                    }
                }
            };
            let w = match op {
                Op::Weighted { .. } => dims.hidden_dim,
                _ => width(classes[id]),
            };
            if matches!(op, Op::OutputH | Op::OutputC) && in_widths[0] != dims.hidden_dim {
                return Err(CellError::Shape(format!("output {id} fed with width {}", in_widths[0])));
            }
            instructions.push(Instruction { block: *id, op, inputs, width: w });
        }
        let h_out = h_out.ok_or_else(|| CellError::Shape("no h_next block".into()))?;
        let c_out = c_out.ok_or_else(|| CellError::Shape("no c_next block".into()))?;
        Ok(CellProgram { dims, leaky_slope: DEFAULT_LEAKY_SLOPE, instructions, shapes, h_out, c_out })
    }

    pub fn with_leaky_slope(mut self, slope: f64) -> Self {
        self.leaky_slope = slope;
        self
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    /// Parameter shapes of every weighted block.
    pub fn param_shapes(&self) -> &BTreeMap<BlockId, ParamShape> {
        &self.shapes
    }

    /// Total number of trainable scalars in the cell (readout excluded).
    pub fn param_count(&self) -> usize {
        self.shapes.values().map(ParamShape::count).sum()
    }

    fn param<'p>(&self, params: &'p ParamStore, block: BlockId) -> Result<&'p LinearParams, CellError> {
        let p = params.get(block).ok_or_else(|| CellError::Shape(format!("no parameters for {block}")))?;
        let s = self.shapes[&block];
        if p.rows != s.rows || p.cols != s.cols || p.bias.is_some() != s.bias {
            return Err(CellError::Shape(format!(
                "{block}: expected {}x{} (bias {}), found {}x{} (bias {})",
                s.rows,
                s.cols,
                s.bias,
                p.rows,
                p.cols,
                p.bias.is_some()
            )));
        }
        Ok(p)
    }

    /// Checks that `params` holds a correctly shaped entry for every weighted block.
    pub fn check_params(&self, params: &ParamStore) -> Result<(), CellError> {
        for block in self.shapes.keys() {
            self.param(params, *block)?;
        }
        Ok(())
    }

    /// One cell step. Fails with `NonFiniteValue` (step 0) if any slot is not finite.
    pub fn forward_step(
        &self,
        params: &ParamStore,
        x: &[f64],
        state: &StepState,
    ) -> Result<(StepState, StepTrace), CellError> {
        if x.len() != self.dims.input_dim {
            return Err(CellError::LengthMismatch { expected: self.dims.input_dim, found: x.len() });
        }
        let mut slots: Vec<Vec<f64>> = Vec::with_capacity(self.instructions.len());
        for ins in &self.instructions {
            let arg = |k: usize| &slots[ins.inputs[k]];
            let v: Vec<f64> = match ins.op {
                Op::InputX => x.to_vec(),
                Op::InputH => state.h.clone(),
                Op::InputC => state.c.clone(),
                Op::OutputH | Op::OutputC | Op::Identity => arg(0).clone(),
                Op::Weighted { .. } => self.param(params, ins.block)?.apply(arg(0)),
                Op::Sigmoid => arg(0).iter().map(|v| sigmoid(*v)).collect(),
                Op::Tanh => arg(0).iter().map(|v| v.tanh()).collect(),
                Op::Relu => arg(0).iter().map(|v| v.max(0.0)).collect(),
                Op::LeakyRelu => arg(0).iter().map(|v| if *v > 0.0 { *v } else { self.leaky_slope * v }).collect(),
                Op::Add => arg(0).iter().zip(arg(1)).map(|(a, b)| a + b).collect(),
                Op::Sub => arg(0).iter().zip(arg(1)).map(|(a, b)| a - b).collect(),
                Op::Mul => arg(0).iter().zip(arg(1)).map(|(a, b)| a * b).collect(),
            };
            if v.iter().any(|e| !e.is_finite()) {
                return Err(CellError::NonFiniteValue { step: 0 });
            }
            slots.push(v);
        }
        let next = StepState { h: slots[self.h_out].clone(), c: slots[self.c_out].clone() };
        Ok((next, StepTrace { slots }))
    }

    /// Threads the state through every element of `sequence`.
    pub fn unroll(
        &self,
        params: &ParamStore,
        sequence: &[Vec<f64>],
        initial: &StepState,
    ) -> Result<(Vec<StepState>, Tape), CellError> {
        let mut state = initial.clone();
        let mut outputs = Vec::with_capacity(sequence.len());
        let mut tape = Tape { steps: Vec::with_capacity(sequence.len()) };
        for (t, x) in sequence.iter().enumerate() {
            let (next, trace) = self.forward_step(params, x, &state).map_err(|e| match e {
                CellError::NonFiniteValue { .. } => CellError::NonFiniteValue { step: t },
                other => other,
            })?;
            outputs.push(next.clone());
            tape.steps.push(trace);
            state = next;
        }
        Ok((outputs, tape))
    }

    /// Reverse-mode gradient of the loss through every recorded step.
    ///
    /// `output_grads[t]` is the direct loss gradient on `(h_t, c_t)`; gradient
    /// flowing back through the recurrence is accumulated internally.
    pub fn backward(
        &self,
        params: &ParamStore,
        tape: &Tape,
        output_grads: &[StepGrad],
    ) -> Result<ParamStore, CellError> {
        if output_grads.len() != tape.steps.len() {
            return Err(CellError::LengthMismatch { expected: tape.steps.len(), found: output_grads.len() });
        }
        let mut grads = ParamStore::zeros_for(self);
        let hid = self.dims.hidden_dim;
        let mut carry_h = vec![0.0; hid];
        let mut carry_c = vec![0.0; hid];
        for (trace, ext) in tape.steps.iter().zip(output_grads).rev() {
            let v = &trace.slots;
            let mut g: Vec<Vec<f64>> = self.instructions.iter().map(|i| vec![0.0; i.width]).collect();
            for k in 0..hid {
                g[self.h_out][k] += ext.h[k] + carry_h[k];
                g[self.c_out][k] += ext.c[k] + carry_c[k];
            }
            for (i, ins) in self.instructions.iter().enumerate().rev() {
                let gi = std::mem::take(&mut g[i]);
                let src = |k: usize| ins.inputs[k];
                match ins.op {
                    Op::InputX => {}
                    Op::InputH => carry_h = gi,
                    Op::InputC => carry_c = gi,
                    Op::OutputH | Op::OutputC | Op::Identity => add_into(&mut g[src(0)], &gi),
                    Op::Weighted { .. } => {
                        let p = self.param(params, ins.block)?;
                        let input = &v[src(0)];
                        grads.get_mut(ins.block).expect("zeros_for covers shapes").accumulate_outer(&gi, input);
                        let back = p.transpose_apply(&gi);
                        add_into(&mut g[src(0)], &back);
                    }
                    Op::Sigmoid => {
                        let y = &v[i];
                        let d: Vec<f64> = gi.iter().zip(y).map(|(g, y)| g * y * (1.0 - y)).collect();
                        add_into(&mut g[src(0)], &d);
                    }
                    Op::Tanh => {
                        let y = &v[i];
                        let d: Vec<f64> = gi.iter().zip(y).map(|(g, y)| g * (1.0 - y * y)).collect();
                        add_into(&mut g[src(0)], &d);
                    }
                    Op::Relu | Op::LeakyRelu => {
                        let neg = if ins.op == Op::Relu { 0.0 } else { self.leaky_slope };
                        let x = &v[src(0)];
                        let d: Vec<f64> = gi.iter().zip(x).map(|(g, x)| if *x > 0.0 { *g } else { neg * g }).collect();
                        add_into(&mut g[src(0)], &d);
                    }
                    Op::Add => {
                        add_into(&mut g[src(0)], &gi);
                        add_into(&mut g[src(1)], &gi);
                    }
                    Op::Sub => {
                        add_into(&mut g[src(0)], &gi);
                        let neg: Vec<f64> = gi.iter().map(|g| -g).collect();
                        add_into(&mut g[src(1)], &neg);
                    }
                    Op::Mul => {
                        let d0: Vec<f64> = gi.iter().zip(&v[src(1)]).map(|(g, b)| g * b).collect();
                        let d1: Vec<f64> = gi.iter().zip(&v[src(0)]).map(|(g, a)| g * a).collect();
                        add_into(&mut g[src(0)], &d0);
                        add_into(&mut g[src(1)], &d1);
                    }
                }
            }
        }
        Ok(grads)
    }
}

fn instructions_width(instructions: &[Instruction], slot: usize) -> usize {
    instructions[slot].width
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}
