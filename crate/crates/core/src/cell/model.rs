use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::params::{init_params, init_scale, sgd_step, LinearParams, ParamStore, TrainConfig};
use super::program::{CellProgram, ParamShape, StepGrad, StepState};
use super::CellError;
use crate::arch::BlockId;
use crate::morphism::MorphismRecord;

/// Mean squared error and its gradient `2(p - t)/n`.
pub fn mse_loss(prediction: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>), CellError> {
    if prediction.len() != target.len() {
        return Err(CellError::LengthMismatch { expected: target.len(), found: prediction.len() });
    }
    let n = prediction.len() as f64;
    let loss = prediction.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = prediction.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// One input sequence with an optional target per step. Steps without a
/// target contribute nothing to the loss.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSequence {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Option<Vec<f64>>>,
}

/// A compiled cell followed by a sigmoid readout `sigmoid(V h + b)`.
///
/// The readout lives in the parameter store under [`BlockId::READOUT`].
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub program: CellProgram,
    pub params: ParamStore,
    pub output_dim: usize,
}

impl Model {
    fn readout_shape(program: &CellProgram, output_dim: usize) -> ParamShape {
        ParamShape { rows: output_dim, cols: program.dims.hidden_dim, bias: true }
    }

    pub fn new(program: CellProgram, params: ParamStore, output_dim: usize) -> Result<Self, CellError> {
        program.check_params(&params)?;
        let shape = Self::readout_shape(&program, output_dim);
        match params.get(BlockId::READOUT) {
            Some(p) if p.shape() == shape => Ok(Model { program, params, output_dim }),
            _ => Err(CellError::Shape(format!("readout must be {}x{} with bias", shape.rows, shape.cols))),
        }
    }

    pub fn fresh<R: Rng + ?Sized>(program: CellProgram, output_dim: usize, rng: &mut R) -> Result<Self, CellError> {
        let mut params = init_params(&program, rng, None)?;
        let shape = Self::readout_shape(&program, output_dim);
        params.insert(BlockId::READOUT, LinearParams::uniform(shape, init_scale(program.dims.hidden_dim), rng));
        Model::new(program, params, output_dim)
    }

    /// Offspring model initialized from its parent's parameters.
    pub fn inherit<R: Rng + ?Sized>(
        program: CellProgram,
        output_dim: usize,
        parent: &ParamStore,
        record: &MorphismRecord,
        rng: &mut R,
    ) -> Result<Self, CellError> {
        let mut params = init_params(&program, rng, Some((parent, record)))?;
        let shape = Self::readout_shape(&program, output_dim);
        if params.get(BlockId::READOUT).map(LinearParams::shape) != Some(shape) {
            params.insert(BlockId::READOUT, LinearParams::uniform(shape, init_scale(program.dims.hidden_dim), rng));
        }
        Model::new(program, params, output_dim)
    }

    /// Cell parameters plus readout.
    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn readout_params(&self) -> &LinearParams {
        self.params.get(BlockId::READOUT).expect("checked at construction")
    }

    pub fn readout(&self, h: &[f64]) -> Vec<f64> {
        self.readout_params().apply(h).into_iter().map(sigmoid).collect()
    }

    pub fn step(&self, x: &[f64], state: &StepState) -> Result<(StepState, Vec<f64>), CellError> {
        let (next, _) = self.program.forward_step(&self.params, x, state)?;
        let y = self.readout(&next.h);
        Ok((next, y))
    }

    /// Readout at every step, starting from the zero state.
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, CellError> {
        let (states, _) = self.program.unroll(&self.params, inputs, &StepState::zeros(self.program.dims))?;
        Ok(states.iter().map(|s| self.readout(&s.h)).collect())
    }

    fn check_targets(seq: &TrainingSequence) -> Result<(), CellError> {
        if seq.inputs.len() != seq.targets.len() {
            return Err(CellError::LengthMismatch { expected: seq.inputs.len(), found: seq.targets.len() });
        }
        Ok(())
    }

    /// Sum over targeted steps of the per-step MSE.
    pub fn loss(&self, seq: &TrainingSequence) -> Result<f64, CellError> {
        Self::check_targets(seq)?;
        let outputs = self.predict(&seq.inputs)?;
        let mut total = 0.0;
        for (y, t) in outputs.iter().zip(&seq.targets) {
            if let Some(t) = t {
                total += mse_loss(y, t)?.0;
            }
        }
        Ok(total)
    }

    /// Loss as in [`Model::loss`] and its gradient with respect to every parameter.
    pub fn loss_and_grads(&self, seq: &TrainingSequence) -> Result<(f64, ParamStore), CellError> {
        Self::check_targets(seq)?;
        let dims = self.program.dims;
        let (states, tape) = self.program.unroll(&self.params, &seq.inputs, &StepState::zeros(dims))?;
        let readout = self.readout_params();
        let mut readout_grad = LinearParams::zeros(readout.shape());
        let mut step_grads = Vec::with_capacity(states.len());
        let mut total = 0.0;
        for (s, t) in states.iter().zip(&seq.targets) {
            let mut sg = StepGrad::zeros(dims);
            if let Some(t) = t {
                let y = self.readout(&s.h);
                let (l, dy) = mse_loss(&y, t)?;
                total += l;
                let dz: Vec<f64> = dy.iter().zip(&y).map(|(g, y)| g * y * (1.0 - y)).collect();
                readout_grad.accumulate_outer(&dz, &s.h);
                sg.h = readout.transpose_apply(&dz);
            }
            step_grads.push(sg);
        }
        let mut grads = self.program.backward(&self.params, &tape, &step_grads)?;
        grads.insert(BlockId::READOUT, readout_grad);
        Ok((total, grads))
    }
}

/// Per-sequence SGD with teacher forcing over seeded shuffles of `data`.
///
/// Returns the mean training loss of each epoch. A non-finite value anywhere
/// aborts with `Diverged`.
pub fn train(model: &mut Model, data: &[TrainingSequence], config: &TrainConfig) -> Result<Vec<f64>, CellError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for &i in &order {
            let (loss, grads) = model.loss_and_grads(&data[i]).map_err(|e| match e {
                CellError::NonFiniteValue { .. } => CellError::Diverged { epoch },
                other => other,
            })?;
            let norm = sgd_step(&mut model.params, &grads, config);
            if !loss.is_finite() || !norm.is_finite() {
                return Err(CellError::Diverged { epoch });
            }
            sum += loss;
        }
        curve.push(sum / data.len().max(1) as f64);
    }
    Ok(curve)
}
