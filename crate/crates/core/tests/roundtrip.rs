use laplacegnn::augment::{AugmentConfig, AugmentationPlan};
use laplacegnn::centrality::CentralityConfig;
use laplacegnn::data::{generate_graph_set, generate_sbm, load_edgelist, save_bundle, DatasetPaths, SbmConfig};
use laplacegnn::encoders::ModelSpec;
use laplacegnn::pipeline::{prepare_bundle, prepare_graph};
use laplacegnn::train::{GraphItem, TrainConfig, TrainState};

fn small_item(seed: u64) -> GraphItem {
    let bundle = generate_sbm(&SbmConfig {
        n: 40,
        d_feat: 6,
        p_in: 0.3,
        p_out: 0.03,
        seed,
        ..Default::default()
    })
    .unwrap();
    let acfg = AugmentConfig {
        iterations: 5,
        k: 4,
        seed,
        ..Default::default()
    };
    prepare_graph(&bundle.graphs[0], &CentralityConfig::default(), &acfg).unwrap()
}

fn small_spec() -> ModelSpec {
    ModelSpec {
        hidden: vec![8, 4],
        proj_hidden: 8,
        ..ModelSpec::gcn(6)
    }
}

fn small_cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        lr: 1e-2,
        seed: 5,
        ..Default::default()
    }
}

#[test]
fn bundle_save_load_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let bundle = generate_sbm(&SbmConfig {
        n: 30,
        d_feat: 3,
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let paths = save_bundle(&bundle, dir.path()).unwrap();
    let back = load_edgelist(&paths).unwrap();
    assert_eq!(back, bundle);

    let set = generate_graph_set(6, 2, 5, 8, 2, 1).unwrap();
    let sub = dir.path().join("set");
    std::fs::create_dir(&sub).unwrap();
    save_bundle(&set, &sub).unwrap();
    assert_eq!(load_edgelist(&DatasetPaths::in_dir(&sub)).unwrap(), set);
}

#[test]
fn plan_file_roundtrip_is_exact() {
    let item = small_item(3);
    let mut buf = Vec::new();
    item.plan.write_to(&mut buf).unwrap();
    let back = AugmentationPlan::read_from(&buf[..], "mem").unwrap();
    let mut again = Vec::new();
    back.write_to(&mut again).unwrap();
    assert_eq!(buf, again);
    assert_eq!(back.final_loss_max, item.plan.final_loss_max);
}

#[test]
fn checkpoint_roundtrip_and_resume() {
    let data = vec![small_item(1)];
    let mut straight = TrainState::new(small_spec(), small_cfg(4)).unwrap();
    straight.fit(&data, |_, _| Ok(())).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ckpt.bin");
    let mut first = TrainState::new(small_spec(), small_cfg(4)).unwrap();
    // odd epoch count leaves a half-filled accumulation buffer behind
    for _ in 0..3 {
        first.train_epoch(&data).unwrap();
    }
    first.save(&path).unwrap();
    let mut resumed = TrainState::load(&path).unwrap();
    assert_eq!(resumed, first);
    resumed.fit(&data, |_, _| Ok(())).unwrap();
    assert_eq!(resumed.teacher, straight.teacher);
    assert_eq!(resumed.student, straight.student);
}

#[test]
fn corrupted_checkpoint_is_rejected() {
    let data = vec![small_item(1)];
    let mut st = TrainState::new(small_spec(), small_cfg(1)).unwrap();
    st.train_epoch(&data).unwrap();
    let mut bytes = Vec::new();
    st.write_checkpoint(&mut bytes).unwrap();
    assert!(TrainState::read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(TrainState::read_checkpoint(&bad[..]).is_err());
}

#[test]
fn student_moves_only_through_ema() {
    let data = vec![small_item(2)];
    let mut st = TrainState::new(small_spec(), small_cfg(10)).unwrap();
    // with accum_steps = 2 the first epoch only fills the buffer
    let before = st.student.clone();
    let m = st.train_epoch(&data).unwrap();
    assert!(!m.teacher_updated);
    assert_eq!(st.student, before);
    let m = st.train_epoch(&data).unwrap();
    assert!(m.teacher_updated);
    assert_ne!(st.student, before);
}

#[test]
fn identical_seeds_give_identical_runs() {
    let run = || {
        let data = vec![small_item(4)];
        let mut st = TrainState::new(small_spec(), small_cfg(3)).unwrap();
        let losses: Vec<f64> = st.fit(&data, |_, _| Ok(())).unwrap().iter().map(|m| m.loss).collect();
        let mut ckpt = Vec::new();
        st.write_checkpoint(&mut ckpt).unwrap();
        let mut plan = Vec::new();
        data[0].plan.write_to(&mut plan).unwrap();
        (plan, losses, ckpt)
    };
    assert_eq!(run(), run());
}

#[test]
fn graph_set_trains_with_gin() {
    let set = generate_graph_set(6, 2, 6, 9, 3, 0).unwrap();
    let acfg = AugmentConfig {
        iterations: 3,
        k: 2,
        ..Default::default()
    };
    let one = prepare_bundle(&set, &CentralityConfig::default(), &acfg, 1).unwrap();
    let many = prepare_bundle(&set, &CentralityConfig::default(), &acfg, 3).unwrap();
    for (a, b) in one.iter().zip(&many) {
        assert_eq!(a.plan, b.plan);
    }
    let spec = ModelSpec {
        hidden: vec![6, 6],
        proj_hidden: 6,
        ..ModelSpec::gin(3)
    };
    let mut st = TrainState::new(spec, small_cfg(2)).unwrap();
    let metrics = st.fit(&one, |_, _| Ok(())).unwrap();
    assert!(metrics.iter().all(|m| (-2.0..=2.0).contains(&m.loss)));
    assert_eq!(st.embed(&one).unwrap().shape(), (6, 6));
}
