use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::arch::{encode_basic_rnn, encode_gru, encode_lstm, ActivationFn, Architecture, BlockId};
use crate::morphism::{generate_offspring, Lineage, MorphismRecord, Step, Transform};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_vec(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

/// Every weight and bias uniform in [-1, 1].
fn random_params(program: &CellProgram, r: &mut impl Rng) -> ParamStore {
    let mut store = ParamStore::new();
    for (b, s) in program.param_shapes() {
        let mut p = LinearParams::uniform(*s, 1.0, r);
        if let Some(bias) = &mut p.bias {
            *bias = random_vec(r, s.rows);
        }
        store.insert(*b, p);
    }
    store
}

fn matvec(p: &LinearParams, v: &[f64]) -> Vec<f64> {
    (0..p.rows)
        .map(|i| {
            let s: f64 = (0..p.cols).map(|j| p.weight[i * p.cols + j] * v[j]).sum();
            s + p.bias.as_ref().map_or(0.0, |b| b[i])
        })
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn basic_rnn_matches_closed_form() {
    let dims = CellDims::new(4, 8);
    let prog = CellProgram::compile(&encode_basic_rnn(), dims).unwrap();
    let mut r = rng(1);
    for _ in 0..100 {
        let params = random_params(&prog, &mut r);
        let x = random_vec(&mut r, 4);
        let state = StepState { h: random_vec(&mut r, 8), c: random_vec(&mut r, 8) };
        let (next, _) = prog.forward_step(&params, &x, &state).unwrap();
        let wx = matvec(params.get(BlockId(3)).unwrap(), &x);
        let wh = matvec(params.get(BlockId(4)).unwrap(), &state.h);
        let h: Vec<f64> = wx.iter().zip(&wh).map(|(a, b)| (a + b).tanh()).collect();
        assert!(max_diff(&next.h, &h) < 1e-12);
        assert_eq!(next.c, state.c);
    }
}

#[test]
fn shapes_and_counts() {
    let dims = CellDims::new(4, 8);
    let lstm = CellProgram::compile(&encode_lstm(), dims).unwrap();
    assert_eq!(lstm.param_shapes().len(), 8);
    let (d, h) = (4, 8);
    assert_eq!(lstm.param_count(), 4 * (h * d + h * h + h));
    for (b, s) in lstm.param_shapes() {
        let expected_cols = if lstm.instructions().iter().any(|i| i.block == *b && i.inputs == vec![0]) { 4 } else { 8 };
        assert_eq!((s.rows, s.cols), (8, expected_cols), "{b}");
    }
    let basic = CellProgram::compile(&encode_basic_rnn(), dims).unwrap();
    assert_eq!(basic.param_count(), 8 * 4 + 8 + 8 * 8 + 8);
    assert_eq!(CellProgram::compile(&encode_basic_rnn(), dims).unwrap(), basic);
    let gru = CellProgram::compile(&encode_gru(), dims).unwrap();
    assert_eq!(gru.param_count(), 2 * (8 * 4 + 8 + 8 * 8) + 8 * 4 + 8 * 8);
}

#[test]
fn identity_only_cell_has_no_parameters() {
    let mut a = Architecture::new(crate::arch::Identifier::new("t", 0));
    let x = a.push(crate::arch::BlockKind::InputX, vec![]);
    let h = a.push(crate::arch::BlockKind::InputH, vec![]);
    let c = a.push(crate::arch::BlockKind::InputC, vec![]);
    let s = a.push(crate::arch::BlockKind::Combination(crate::arch::CombinationFn::Add), vec![h, c]);
    let i = a.push(crate::arch::BlockKind::Activation(ActivationFn::Identity), vec![s]);
    a.push(crate::arch::BlockKind::OutputH, vec![i]);
    a.push(crate::arch::BlockKind::OutputC, vec![c]);
    let _ = x;
    let prog = CellProgram::compile(&a, CellDims::new(2, 3)).unwrap();
    assert_eq!(prog.param_count(), 0);
}

#[test]
fn sigmoid_of_zero_is_half() {
    let dims = CellDims::new(2, 3);
    let prog = CellProgram::compile(&encode_lstm(), dims).unwrap();
    let params = ParamStore::zeros_for(&prog);
    let (_, trace) = prog.forward_step(&params, &[0.0, 0.0], &StepState::zeros(dims)).unwrap();
    for ins in prog.instructions().iter().enumerate().filter(|(_, i)| i.op == Op::Sigmoid) {
        assert!(trace.slots[ins.0].iter().all(|v| *v == 0.5));
    }
}

#[test]
fn zero_weights_give_zero_tanh_path() {
    let dims = CellDims::new(2, 3);
    let prog = CellProgram::compile(&encode_basic_rnn(), dims).unwrap();
    let params = ParamStore::zeros_for(&prog);
    let seq = vec![vec![1.0, -1.0]; 4];
    let (out, tape) = prog.unroll(&params, &seq, &StepState::zeros(dims)).unwrap();
    assert_eq!(tape.steps.len(), 4);
    assert!(out.iter().all(|s| s.h.iter().all(|v| *v == 0.0)));
    let (one, _) = prog.forward_step(&params, &seq[0], &StepState::zeros(dims)).unwrap();
    assert_eq!(out[0], one);
}

#[test]
fn non_finite_reports_step() {
    let dims = CellDims::new(1, 1);
    let prog = CellProgram::compile(&encode_basic_rnn(), dims).unwrap();
    let mut params = ParamStore::zeros_for(&prog);
    params.get_mut(BlockId(3)).unwrap().weight[0] = 1.0;
    let seq = vec![vec![0.0], vec![f64::INFINITY]];
    let err = prog.unroll(&params, &seq, &StepState::zeros(dims)).unwrap_err();
    assert_eq!(err, CellError::NonFiniteValue { step: 1 });
    assert!(matches!(prog.forward_step(&params, &[0.0, 1.0], &StepState::zeros(dims)), Err(CellError::LengthMismatch { .. })));
}

#[test]
fn mse_examples() {
    assert_eq!(mse_loss(&[0.3, 0.7], &[0.3, 0.7]).unwrap().0, 0.0);
    assert_eq!(mse_loss(&[1.0, 0.0], &[0.0, 0.0]).unwrap().0, 0.5);
    assert!(mse_loss(&[1.0], &[0.0, 0.0]).is_err());
    let p = [0.2, -0.4, 0.9];
    let t = [0.0, 1.0, 0.5];
    let (_, g) = mse_loss(&p, &t).unwrap();
    for k in 0..3 {
        let mut a = p;
        let mut b = p;
        a[k] += 1e-6;
        b[k] -= 1e-6;
        let fd = (mse_loss(&a, &t).unwrap().0 - mse_loss(&b, &t).unwrap().0) / 2e-6;
        assert!((fd - g[k]).abs() < 1e-8);
    }
}

fn random_sequence(r: &mut impl Rng, dims: CellDims, out: usize, len: usize) -> TrainingSequence {
    TrainingSequence {
        inputs: (0..len).map(|_| random_vec(r, dims.input_dim)).collect(),
        targets: (0..len).map(|_| r.gen_bool(0.7).then(|| (0..out).map(|_| r.gen_range(0.0..1.0)).collect())).collect(),
    }
}

/// Central differences on every coordinate, relative error with a 1e-6 floor.
fn gradient_check(model: &Model, seq: &TrainingSequence) -> f64 {
    let (_, grads) = model.loss_and_grads(seq).unwrap();
    let analytic: Vec<f64> = grads.values().copied().collect();
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (k, a) in analytic.iter().enumerate() {
        let mut plus = model.clone();
        *plus.params.values_mut().nth(k).unwrap() += eps;
        let mut minus = model.clone();
        *minus.params.values_mut().nth(k).unwrap() -= eps;
        let fd = (plus.loss(seq).unwrap() - minus.loss(seq).unwrap()) / (2.0 * eps);
        worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-6));
    }
    worst
}

#[test]
fn gradients_match_finite_differences_on_seeds() {
    let dims = CellDims::new(3, 4);
    let mut r = rng(5);
    for arch in [encode_basic_rnn(), encode_lstm(), encode_gru()] {
        let prog = CellProgram::compile(&arch, dims).unwrap();
        let model = Model::fresh(prog, 4, &mut r).unwrap();
        let seq = random_sequence(&mut r, dims, 4, 6);
        let err = gradient_check(&model, &seq);
        assert!(err < 1e-4, "{}: {err}", arch.identifier);
    }
}

#[test]
fn unreachable_and_linear_gradients() {
    let dims = CellDims::new(2, 3);
    let mut r = rng(8);
    let model = Model::fresh(CellProgram::compile(&encode_lstm(), dims).unwrap(), 4, &mut r).unwrap();
    let seq = random_sequence(&mut r, dims, 4, 3);
    let (_, g) = model.loss_and_grads(&seq).unwrap();
    let tape = model.program.unroll(&model.params, &seq.inputs, &StepState::zeros(dims)).unwrap().1;
    // Gradient on c only, doubled: parameter gradients double.
    let ext: Vec<StepGrad> = (0..3).map(|_| StepGrad { h: vec![0.0; 3], c: random_vec(&mut r, 3) }).collect();
    let twice: Vec<StepGrad> =
        ext.iter().map(|s| StepGrad { h: s.h.clone(), c: s.c.iter().map(|v| 2.0 * v).collect() }).collect();
    let g1 = model.program.backward(&model.params, &tape, &ext).unwrap();
    let g2 = model.program.backward(&model.params, &tape, &twice).unwrap();
    for (a, b) in g1.values().zip(g2.values()) {
        assert!((2.0 * a - b).abs() < 1e-12);
    }
    assert!(g.norm() > 0.0);

    // Basic RNN: the c path is inert, so nothing upstream of c_next owns weights,
    // and an all-None target sequence produces zero gradients everywhere.
    let basic = Model::fresh(CellProgram::compile(&encode_basic_rnn(), dims).unwrap(), 4, &mut r).unwrap();
    let silent = TrainingSequence { inputs: seq.inputs.clone(), targets: vec![None; 3] };
    let (l, g) = basic.loss_and_grads(&silent).unwrap();
    assert_eq!(l, 0.0);
    assert!(g.values().all(|v| *v == 0.0));
}

#[test]
fn random_architecture_gradients() {
    let mut r = rng(11);
    let mut lineage = Lineage::new();
    let dims = CellDims::new(2, 3);
    for _ in 0..5 {
        let arch = crate::morphism::random_initial_architecture(&mut lineage, &mut r);
        let model = Model::fresh(CellProgram::compile(&arch, dims).unwrap(), 4, &mut r).unwrap();
        let seq = random_sequence(&mut r, dims, 4, 5);
        let err = gradient_check(&model, &seq);
        assert!(err < 1e-4, "{}: {err}", arch.identifier);
    }
}

fn record_of(parent: &Architecture, t: Transform) -> (Architecture, MorphismRecord) {
    let mut child = t.apply(parent).unwrap();
    child.identifier = crate::arch::Identifier::new(parent.identifier.prefix.clone(), parent.identifier.counter + 1);
    let record = MorphismRecord {
        parent: parent.identifier.clone(),
        offspring: child.identifier.clone(),
        steps: vec![Step { kind: t.kind(), applied: Some(t) }],
    };
    (child, record)
}

#[test]
fn identity_and_linear_units_preserve_function() {
    let dims = CellDims::new(4, 8);
    let mut r = rng(21);
    let parent = encode_basic_rnn();
    let model = Model::fresh(CellProgram::compile(&parent, dims).unwrap(), 4, &mut r).unwrap();
    let seq: Vec<Vec<f64>> = (0..6).map(|_| random_vec(&mut r, 4)).collect();
    let before = model.predict(&seq).unwrap();
    for activation in [ActivationFn::Identity, ActivationFn::Linear, ActivationFn::LinearB] {
        let t = Transform::AddUnit { target: BlockId(6), slot: 0, new_block: parent.next_id(), activation };
        let (child, record) = record_of(&parent, t);
        let prog = CellProgram::compile(&child, dims).unwrap();
        let offspring = Model::inherit(prog, 4, &model.params, &record, &mut r).unwrap();
        assert_eq!(offspring.predict(&seq).unwrap(), before, "{activation:?}");
        if activation == ActivationFn::Identity {
            assert_eq!(offspring.param_count(), model.param_count());
        }
    }
}

#[test]
fn change_combination_keeps_params() {
    let dims = CellDims::new(2, 3);
    let mut r = rng(3);
    let parent = encode_lstm();
    let model = Model::fresh(CellProgram::compile(&parent, dims).unwrap(), 4, &mut r).unwrap();
    let t = Transform::ChangeCombination {
        block: BlockId(21),
        from: crate::arch::CombinationFn::Add,
        to: crate::arch::CombinationFn::Sub,
    };
    let (child, record) = record_of(&parent, t);
    let offspring = Model::inherit(CellProgram::compile(&child, dims).unwrap(), 4, &model.params, &record, &mut r).unwrap();
    assert_eq!(offspring.params, model.params);
}

#[test]
fn offspring_inheritance_never_fails_on_valid_children() {
    let dims = CellDims::new(4, 5);
    let mut r = rng(4);
    let mut lineage = Lineage::new();
    for _ in 0..50 {
        let parent = crate::morphism::random_initial_architecture(&mut lineage, &mut r);
        let model = Model::fresh(CellProgram::compile(&parent, dims).unwrap(), 4, &mut r).unwrap();
        let (child, record) = generate_offspring(&parent, 3, &mut lineage, &mut r);
        let prog = CellProgram::compile(&child, dims).unwrap();
        Model::inherit(prog, 4, &model.params, &record, &mut r).unwrap();
    }
}

#[test]
fn fresh_init_is_replayable_and_bounded() {
    let dims = CellDims::new(4, 16);
    let prog = CellProgram::compile(&encode_gru(), dims).unwrap();
    let a = init_params(&prog, &mut rng(9), None).unwrap();
    let b = init_params(&prog, &mut rng(9), None).unwrap();
    assert_eq!(a, b);
    assert!(a.values().all(|v| v.abs() <= 0.25));
    assert!(a.iter().all(|(_, p)| p.bias.iter().flatten().all(|v| *v == 0.0)));
}

fn toy_data(r: &mut impl Rng, dims: CellDims) -> Vec<TrainingSequence> {
    (0..20)
        .map(|_| {
            let inputs: Vec<Vec<f64>> = (0..5).map(|_| random_vec(r, dims.input_dim)).collect();
            // Target: the sign pattern of the current input.
            let targets = inputs.iter().map(|x| Some(x.iter().take(2).map(|v| f64::from(u8::from(*v > 0.0))).collect())).collect();
            TrainingSequence { inputs, targets }
        })
        .collect()
}

#[test]
fn training_reduces_loss_and_is_deterministic() {
    let dims = CellDims::new(3, 6);
    let mut r = rng(2);
    let data = toy_data(&mut r, dims);
    let prog = CellProgram::compile(&encode_basic_rnn(), dims).unwrap();
    let model = Model::fresh(prog, 2, &mut rng(7)).unwrap();
    let config = TrainConfig { learning_rate: 0.1, epochs: 30, clip_norm: Some(5.0), seed: 1 };
    let mut m1 = model.clone();
    let c1 = train(&mut m1, &data, &config).unwrap();
    let mut m2 = model.clone();
    let c2 = train(&mut m2, &data, &config).unwrap();
    assert_eq!(c1, c2);
    assert_eq!(m1.params, m2.params);
    assert_eq!(c1.len(), 30);
    assert!(c1[29] < c1[0], "{c1:?}");

    let mut m3 = model.clone();
    let none = train(&mut m3, &data, &TrainConfig { epochs: 0, ..config }).unwrap();
    assert!(none.is_empty());
    assert_eq!(m3.params, model.params);
}

#[test]
fn divergence_is_reported() {
    let dims = CellDims::new(1, 1);
    let prog = CellProgram::compile(&encode_basic_rnn(), dims).unwrap();
    let mut model = Model::fresh(prog, 1, &mut rng(0)).unwrap();
    let data = vec![TrainingSequence { inputs: vec![vec![f64::NAN]], targets: vec![Some(vec![1.0])] }];
    let err = train(&mut model, &data, &TrainConfig::default()).unwrap_err();
    assert_eq!(err, CellError::Diverged { epoch: 0 });
}
