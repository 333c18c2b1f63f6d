use lggan::autodiff::Tensor;
use lggan::baselines::*;
use lggan::checkpoint::*;
use lggan::graph::planted_partition;
use lggan::rng;
use lggan::training::{TrainConfig, Trainer};
use proptest::prelude::*;

fn trained_state() -> lggan::training::TrainState {
    let data = planted_partition(8, 4..=7, 1);
    let config = TrainConfig {
        batch_size: 4,
        steps: 3,
        latent_dim: 3,
        gen_hidden: vec![5],
        disc_layers: 2,
        disc_hidden: 4,
        ..Default::default()
    };
    let mut t = Trainer::new(config, &data).unwrap();
    for _ in 0..3 {
        t.step().unwrap();
    }
    t.state
}

#[test]
fn train_state_round_trips_bit_for_bit() {
    let state = trained_state();
    let text = from_train_state(&state).to_text();
    let back = to_train_state(&Checkpoint::parse(&text).unwrap()).unwrap();
    assert_eq!(back, state);
    assert_eq!(from_train_state(&back).to_text(), text);
}

#[test]
fn baseline_params_round_trip() {
    let data = planted_partition(10, 5..=9, 2);
    let er = er_fit(&data).unwrap();
    assert_eq!(
        to_er(&Checkpoint::parse(&from_er(&er).to_text()).unwrap()).unwrap(),
        er
    );
    let ba = ba_fit(&data).unwrap();
    assert_eq!(
        to_ba(&Checkpoint::parse(&from_ba(&ba).to_text()).unwrap()).unwrap(),
        ba
    );
    let mmsb = mmsb_fit(&data, 3, MMSB_ALPHA, 10, &mut rng::stream(1, "ck")).unwrap();
    let ck = Checkpoint::parse(&from_mmsb(&mmsb).to_text()).unwrap();
    assert_eq!(ck.kind().unwrap(), "mmsb");
    assert_eq!(to_mmsb(&ck).unwrap(), mmsb);
    assert!(matches!(to_er(&ck), Err(CheckpointError::Kind { .. })));
    assert!(matches!(
        to_train_state(&ck),
        Err(CheckpointError::Kind { .. })
    ));
}

#[test]
fn file_round_trip() {
    let dir = std::env::temp_dir().join(format!("lggan-ck-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("er.ck");
    let ck = from_er(&ErParams {
        sizes: vec![3, 5],
        p: 0.1 + 0.2,
        num_labels: 2,
        num_classes: 1,
    });
    ck.write(&path).unwrap();
    assert_eq!(Checkpoint::read(&path).unwrap().unwrap(), ck);
    assert_eq!(to_er(&ck).unwrap().p, 0.1 + 0.2);
}

#[test]
fn parse_errors_carry_line_numbers() {
    let cases = [
        ("", 1),
        ("format lggan-checkpoint 2\ntensors 0\n", 1),
        ("format lggan-checkpoint 1\nmeta kind er\n", 3),
        ("format lggan-checkpoint 1\nbogus\n", 2),
        ("format lggan-checkpoint 1\ntensors x\n", 2),
        ("format lggan-checkpoint 1\ntensors 1\np 2\n1\n", 4),
        ("format lggan-checkpoint 1\ntensors 1\np 2\n1 nan\n", 4),
        ("format lggan-checkpoint 1\ntensors 1\np x\n1\n", 3),
        ("format lggan-checkpoint 1\ntensors 0\nextra\n", 3),
        (
            "format lggan-checkpoint 1\n# note\n\ntensors 1\np 99999999999 99999999999\n1\n",
            5,
        ),
    ];
    for (text, line) in cases {
        match Checkpoint::parse(text) {
            Err(CheckpointError::Syntax { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
    let ok =
        Checkpoint::parse("format lggan-checkpoint 1\nmeta note two words\ntensors 1\ns\n2.5\n")
            .unwrap();
    assert_eq!(ok.meta("note").unwrap(), "two words");
    assert_eq!(ok.tensor("s").unwrap(), &Tensor::scalar(2.5));
    assert!(matches!(
        ok.meta("kind"),
        Err(CheckpointError::MissingMeta(_))
    ));
    assert!(matches!(
        ok.tensor("t"),
        Err(CheckpointError::MissingTensor(_))
    ));
}

#[test]
fn semantic_errors_are_rejected() {
    let state = trained_state();
    let mut ck = from_train_state(&state);
    ck.set("disc_hidden", 5);
    assert!(matches!(
        to_train_state(&ck),
        Err(CheckpointError::Architecture(_))
    ));

    let mut ck = from_train_state(&state);
    ck.set("variant", "nope");
    assert!(matches!(
        to_train_state(&ck),
        Err(CheckpointError::BadMeta { .. })
    ));

    let mut ck = from_er(&ErParams {
        sizes: vec![3],
        p: 0.5,
        num_labels: 1,
        num_classes: 1,
    });
    ck.tensors[1].1 = Tensor::row(vec![2.5]);
    assert!(matches!(to_er(&ck), Err(CheckpointError::Architecture(_))));

    let mut mmsb = from_mmsb(&MmsbParams {
        k: 1,
        alpha: vec![0.1],
        b: vec![0.4],
        label_dist: vec![1.0],
        sizes: vec![4],
        num_labels: 1,
        num_classes: 1,
    });
    mmsb.tensors[1].1 = Tensor::new(vec![1, 1], vec![1.4]).unwrap();
    assert!(matches!(
        to_mmsb(&mmsb),
        Err(CheckpointError::Architecture(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn values_round_trip_exactly(values in prop::collection::vec(-1e300f64..1e300, 0..20), tiny in prop::num::f64::NORMAL) {
        let mut ck = Checkpoint::default();
        ck.set("kind", "test");
        ck.push("v", Tensor::row(values.clone()));
        ck.push("tiny", Tensor::scalar(tiny));
        let back = Checkpoint::parse(&ck.to_text()).unwrap();
        prop_assert_eq!(back, ck);
    }

    #[test]
    fn parser_never_panics(text in "(format lggan-checkpoint 1\n)?((meta|tensors|[a-z]+) [0-9a-z .-]*\n){0,6}") {
        let _ = Checkpoint::parse(&text);
    }
}
