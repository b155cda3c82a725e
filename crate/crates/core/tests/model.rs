use coguide::loss::slot_loss;
use coguide::model::{CoGuidingNet, ModelConfig, Selections};
use coguide_autodiff::{ParamStore, Session, Tensor};

fn config() -> ModelConfig {
    ModelConfig {
        vocab_size: 12,
        intents: 3,
        slots: 5,
        word_dim: 8,
        lstm_dim: 8,
        attn_dim: 6,
        hidden_dim: 8,
        heads: 2,
        layers: 2,
        window: 1,
        leaky_slope: 0.2,
        vote_threshold: 0.5,
        dropout: 0.0,
        collapse_relations: false,
        no_s2i_guidance: false,
        no_i2s_guidance: false,
    }
}

fn net(c: ModelConfig) -> (CoGuidingNet, ParamStore<f64>) {
    CoGuidingNet::init::<f64>(c, 4).unwrap()
}

const IDS: [usize; 8] = [2, 5, 3, 7, 11, 4, 2, 9];

fn stage2_intents(model: &CoGuidingNet, p: &ParamStore<f64>, sel: &Selections) -> Tensor<f64> {
    let mut s = Session::new(p);
    let out = model.forward_full(&mut s, &IDS, Some(sel)).unwrap();
    s.tape.value(out.stage2.intent_probs).clone()
}

fn stage2_slots(model: &CoGuidingNet, p: &ParamStore<f64>, sel: &Selections) -> Tensor<f64> {
    let mut s = Session::new(p);
    let out = model.forward_full(&mut s, &IDS, Some(sel)).unwrap();
    s.tape.value(out.stage2.slot_probs).clone()
}

fn base_selection() -> Selections {
    Selections { intents: vec![0, 2], slots: vec![0, 1, 2, 0, 3, 4, 0, 1] }
}

#[test]
fn encoder_width_attention_and_global_dependency() {
    let (model, p) = net(config());
    let run = |ids: &[usize]| {
        let mut s = Session::new(&p);
        let e = model.encoder.encode(&mut s, ids).unwrap();
        (s.tape.value(e.states).clone(), s.tape.value(e.attention).clone())
    };
    let (h, a) = run(&[3, 4, 5]);
    assert_eq!(h.shape(), (3, 14));
    for i in 0..3 {
        assert!((a.row_slice(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
    let (h2, _) = run(&[3, 8, 5]);
    for i in [0, 2] {
        assert_ne!(h.row_slice(i), h2.row_slice(i), "row {i} should see token 1");
    }
    let (single, a1) = run(&[6]);
    assert_eq!(single.rows(), 1);
    assert_eq!(a1.data(), &[1.0]);
    assert_eq!(run(&[3, 4, 5]).0, h);
}

#[test]
fn slot_label_perturbation_stays_within_two_positions() {
    let (model, p) = net(config());
    let base = base_selection();
    let before = stage2_intents(&model, &p, &base);
    let j = 3;
    let mut changed = base.clone();
    changed.slots[j] = 2;
    let after = stage2_intents(&model, &p, &changed);
    for i in 0..IDS.len() {
        let same = before.row_slice(i) == after.row_slice(i);
        if i.abs_diff(j) > 2 {
            assert!(same, "row {i} is outside the receptive field but changed");
        } else {
            assert!(!same, "row {i} is inside the receptive field but did not change");
        }
    }
}

#[test]
fn intent_labels_reach_every_slot_row() {
    let (model, p) = net(config());
    let base = base_selection();
    let a = stage2_slots(&model, &p, &base);
    let b = stage2_slots(&model, &p, &Selections { intents: vec![1], ..base });
    for i in 0..IDS.len() {
        assert_ne!(a.row_slice(i), b.row_slice(i));
        assert!((a.row_slice(i).iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn stage_two_slot_loss_reaches_first_pass_intent_distribution() {
    let (model, p) = net(config());
    let mut s = Session::new(&p);
    let out = model.forward_full(&mut s, &IDS, None).unwrap();
    let gold = [0, 1, 2, 0, 3, 4, 0, 1];
    // Feed stage 2 twice so `slot_loss` sees both arguments from the second pass.
    let loss = slot_loss(&mut s.tape, out.stage2.slot_probs, out.stage2.slot_probs, &gold).unwrap();
    s.tape.backward(loss).unwrap();
    let g = s.tape.grad(out.stage1.intent_probs).expect("gradient reaches first-pass intents");
    assert!(g.iter().any(|&v| v != 0.0));
}

#[test]
fn disabled_guidance_ignores_the_other_task_labels() {
    let base = base_selection();
    let other = Selections { intents: vec![1], slots: vec![4; IDS.len()] };

    let (model, p) = net(ModelConfig { no_s2i_guidance: true, ..config() });
    assert_eq!(stage2_intents(&model, &p, &base), stage2_intents(&model, &p, &other));
    assert_ne!(stage2_slots(&model, &p, &base), stage2_slots(&model, &p, &other));

    let (model, p) = net(ModelConfig { no_i2s_guidance: true, ..config() });
    assert_eq!(stage2_slots(&model, &p, &base), stage2_slots(&model, &p, &other));
    assert_ne!(stage2_intents(&model, &p, &base), stage2_intents(&model, &p, &other));
}

#[test]
fn collapsed_relations_use_fewer_parameters() {
    let (_, full) = net(config());
    let (_, collapsed) = net(ModelConfig { collapse_relations: true, ..config() });
    assert!(collapsed.num_elements() < full.num_elements());
}

#[test]
fn prediction_is_deterministic_and_complete() {
    let (model, p) = net(config());
    let a = model.predict(&p, &IDS).unwrap();
    assert_eq!(a, model.predict(&p, &IDS).unwrap());
    assert_eq!(a.slots.len(), IDS.len());
    assert_eq!(a.slots0.len(), IDS.len());
    assert!(!a.intents.is_empty() && !a.intents0.is_empty());
}

#[test]
fn bad_inputs_are_rejected() {
    let (model, p) = net(config());
    assert!(model.predict(&p, &[]).is_err());
    assert!(model.predict(&p, &[1, 99]).is_err());
    let mut s = Session::new(&p);
    let short = Selections { intents: vec![0], slots: vec![0] };
    assert!(model.forward_full(&mut s, &IDS, Some(&short)).is_err());
}
