use std::ops::ControlFlow;

use coguide::checkpoint::{self, from_bytes, to_bytes};
use coguide::config::TrainConfig;
use coguide::synth::{generate_synthetic, SynthSpec};
use coguide::training::{evaluate, train, train_with};

fn short_config(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, batch_size: 4, ..TrainConfig::desk() }
}

#[test]
fn mean_loss_falls_over_ten_epochs() {
    let c = generate_synthetic(&SynthSpec::default()).unwrap();
    let t = train(&short_config(10), &c.train, &c.dev).unwrap();
    assert_eq!(t.history.len(), 10);
    assert!(t.history[9].mean_loss < t.history[0].mean_loss, "{:?}", t.history);
}

#[test]
fn same_seed_same_history_and_weights() {
    let c = generate_synthetic(&SynthSpec::default()).unwrap();
    let a = train(&short_config(3), &c.train, &c.dev).unwrap();
    let b = train(&short_config(3), &c.train, &c.dev).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.params, b.params);
    let other = train(&TrainConfig { seed: 1, ..short_config(3) }, &c.train, &c.dev).unwrap();
    assert_ne!(a.params, other.params);
}

#[test]
fn best_epoch_is_the_first_maximum() {
    let c = generate_synthetic(&SynthSpec::default()).unwrap();
    let t = train(&short_config(6), &c.train, &c.dev).unwrap();
    let best = t.history.iter().map(|r| r.dev.overall_accuracy).fold(f64::MIN, f64::max);
    let first = t.history.iter().position(|r| r.dev.overall_accuracy == best).unwrap() + 1;
    assert_eq!(t.best_epoch, first);
}

#[test]
fn observer_can_stop_training() {
    let c = generate_synthetic(&SynthSpec::default()).unwrap();
    let t = train_with(&short_config(50), &c.train, &c.dev, |r| {
        if r.epoch == 2 {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })
    .unwrap();
    assert_eq!(t.history.len(), 2);
}

#[test]
fn worker_count_does_not_change_scores() {
    let c = generate_synthetic(&SynthSpec::default()).unwrap();
    let t = train(&short_config(2), &c.train, &c.dev).unwrap();
    let one = evaluate(&t.model, &t.params, &t.vocab, &c.test, 1).unwrap();
    let three = evaluate(&t.model, &t.params, &t.vocab, &c.test, 3).unwrap();
    assert_eq!(one.report, three.report);
    assert_eq!(one.predictions, three.predictions);
}

#[test]
fn reloaded_checkpoint_scores_identically() {
    let c = generate_synthetic(&SynthSpec::default()).unwrap();
    let t = train(&short_config(3), &c.train, &c.dev).unwrap();
    let before = evaluate(&t.model, &t.params, &t.vocab, &c.test, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    checkpoint::save_trained(&path, &t).unwrap();
    let ck = checkpoint::load(&path).unwrap();
    let after = evaluate(&ck.model, &ck.params, &ck.vocab, &c.test, 0).unwrap();
    assert_eq!(before.report, after.report);
    assert_eq!(before.predictions, after.predictions);
    assert_eq!(ck.best_epoch, t.best_epoch);
    let bytes = to_bytes(&ck.config, &ck.vocab, &ck.params, ck.best_epoch).unwrap();
    assert_eq!(from_bytes(&bytes).unwrap().params, t.params);
}

#[test]
fn empty_dev_set_is_rejected() {
    let c = generate_synthetic(&SynthSpec::default()).unwrap();
    assert!(train(&short_config(1), &c.train, &[]).is_err());
}
