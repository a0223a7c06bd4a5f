use doanet::acoustics::{BankPlan, RirBank, RoomConfig};
use doanet::baselines::{Band, BaselineMethod};
use doanet::dataset::{build_training_set, make_doa_grid, TrainingPlan};
use doanet::eval::{
    dynamic_scenario, results_csv, run_experiment, simulated_block, BaselineDoa, CnnMethod, DoaMethod, DynamicConfig,
    ExperimentConfig, NoiseType, OracleMethod, Segment, SourceKind, RESULTS_HEADER,
};
use doanet::nnet::{train, ModelSpec, Network, TrainConfig};
use doanet::{DoaGrid, StftParams};

fn grid() -> DoaGrid {
    make_doa_grid(30.0).unwrap()
}

fn params() -> StftParams {
    StftParams::half_overlap(128)
}

fn bank() -> RirBank {
    RirBank::generate(&BankPlan {
        rooms: vec![
            RoomConfig::new("small", [4.0, 3.5, 2.5], 0.15).unwrap(),
            RoomConfig::new("large", [6.0, 5.0, 2.7], 0.3).unwrap(),
        ],
        mics: 3,
        spacing: 0.06,
        positions_per_room: 2,
        array_height: 1.4,
        distances: vec![1.0],
        doas: grid().angles().to_vec(),
        sample_rate: 8000,
        max_len: Some(1200),
        seed: 21,
    })
    .unwrap()
}

fn config() -> ExperimentConfig {
    ExperimentConfig {
        rooms: vec!["small".into(), "large".into()],
        positions: 2,
        distances: vec![1.0],
        snrs_db: vec![0.0, 20.0],
        noise_types: vec![NoiseType::White, NoiseType::Diffuse],
        sources: 2,
        min_separation: 60.0,
        doas: None,
        max_combinations: Some(3),
        signals_per_combination: 2,
        block_frames: 12,
        threshold_deg: 30.0,
        source: SourceKind::Bursts,
        band: Band::default(),
        seed: 5,
    }
}

#[test]
fn oracle_scores_perfectly_and_counts_match_the_design() {
    let bank = bank();
    let oracle = OracleMethod;
    let srp = BaselineDoa { method: BaselineMethod::SrpPhat, band: Band::default() };
    let methods: [&dyn DoaMethod; 2] = [&oracle, &srp];
    let cfg = config();
    let (rows, trials) = run_experiment(&bank, &cfg, &grid(), params(), &methods).unwrap();
    // 2 rooms × 2 SNRs × 2 noise types × 1 distance
    assert_eq!(rows.len(), 2 * 8);
    let per_condition = cfg.trials_per_condition(&grid());
    assert_eq!(per_condition, 2 * 3 * 2);
    assert_eq!(trials.len(), 2 * 8 * per_condition);
    for r in rows.iter().filter(|r| r.method == "oracle") {
        assert_eq!(r.mae_deg, 0.0);
        assert_eq!(r.acc_pct, 100.0);
        assert_eq!(r.trials, per_condition);
    }
    for r in &rows {
        assert_eq!(r.trials, per_condition);
    }
    let csv = results_csv(&rows);
    assert!(csv.starts_with(RESULTS_HEADER));
    assert_eq!(csv.lines().count(), rows.len() + 1);
}

#[test]
fn experiments_are_deterministic() {
    let bank = bank();
    let srp = BaselineDoa { method: BaselineMethod::SrpPhat, band: Band::default() };
    let music = BaselineDoa { method: BaselineMethod::Music, band: Band::default() };
    let methods: [&dyn DoaMethod; 2] = [&srp, &music];
    let mut cfg = config();
    cfg.noise_types = vec![NoiseType::Babble];
    let a = run_experiment(&bank, &cfg, &grid(), params(), &methods).unwrap();
    let b = run_experiment(&bank, &cfg, &grid(), params(), &methods).unwrap();
    assert_eq!(a, b);
    cfg.seed += 1;
    let c = run_experiment(&bank, &cfg, &grid(), params(), &methods).unwrap();
    assert_ne!(a.1, c.1);
}

#[test]
fn missing_rirs_are_reported_before_work() {
    let bank = bank();
    let mut cfg = config();
    cfg.rooms.push("absent".into());
    let err = run_experiment(&bank, &cfg, &grid(), params(), &[&OracleMethod]).unwrap_err();
    assert!(matches!(err, doanet::Error::MissingRirs(ref keys) if !keys.is_empty()));
}

#[test]
fn simulated_block_has_lead_frames_and_requested_length() {
    let bank = bank();
    let (spec, frames, geometry) = simulated_block(
        &bank,
        "large",
        1,
        1.0,
        &[30.0, 120.0],
        NoiseType::White,
        20.0,
        &SourceKind::Bursts,
        params(),
        25,
        9,
    )
    .unwrap();
    assert_eq!(frames.len(), 25);
    assert_eq!(frames.end, spec.num_frames());
    assert!(frames.start > 0);
    assert_eq!(geometry.num_mics(), 3);
    assert!(simulated_block(
        &bank,
        "large",
        1,
        1.0,
        &[31.0],
        NoiseType::White,
        20.0,
        &SourceKind::Bursts,
        params(),
        5,
        9
    )
    .is_err());
}

#[test]
fn trained_model_plugs_into_harness_and_dynamic_scenario() {
    let bank = bank();
    let plan = TrainingPlan {
        rooms: vec!["small".into()],
        positions: 2,
        distances: vec![1.0],
        doas: None,
        min_separation: 60.0,
        snr_range_db: [10.0, 30.0],
        frames_per_source: 16,
    };
    let data = build_training_set(&bank, &plan, &grid(), params(), 3).unwrap();
    let spec = ModelSpec { mics: 3, bins: 65, conv_filters: vec![8, 8], dense: vec![32], classes: 7, dropout: 0.2 };
    let mut model = Network::<f32>::new(spec, 4).unwrap();
    let mut cfg = TrainConfig::new(3, 5);
    cfg.batch_size = 64;
    train(&mut model, &data, &cfg, |_| {}).unwrap();

    let cnn = CnnMethod { name: "cnn".into(), model: model.clone() };
    let mut exp = config();
    exp.rooms = vec!["large".into()];
    exp.noise_types = vec![NoiseType::White];
    exp.snrs_db = vec![20.0];
    let (rows, _) = run_experiment(&bank, &exp, &grid(), params(), &[&cnn]).unwrap();
    assert_eq!(rows.len(), 1);
    assert!((0.0..=100.0).contains(&rows[0].acc_pct));

    let dyn_cfg = DynamicConfig {
        room: "large".into(),
        position: 0,
        distance: 1.0,
        segments: vec![
            Segment { start_s: 0.0, end_s: 0.3, doas: vec![60.0] },
            Segment { start_s: 0.4, end_s: 0.8, doas: vec![0.0, 90.0, 150.0] },
        ],
        snr_db: 20.0,
        noise: NoiseType::White,
        source: SourceKind::Bursts,
        band: Band::default(),
        seed: 2,
    };
    let result = dynamic_scenario(&bank, &dyn_cfg, &grid(), params(), &model).unwrap();
    assert_eq!(result.classes, grid().angles().to_vec());
    assert_eq!(result.traces.len(), 2);
    let frames = result.traces[0].1.len();
    assert!(result.traces.iter().all(|(_, rows)| rows.len() == frames && rows.iter().all(|r| r.len() == 7)));
    // one profile per segment and method
    assert_eq!(result.profiles.len(), 4);
    for p in &result.profiles {
        assert_eq!(p.top.len(), p.true_doas.len());
        assert!(p.profile.iter().all(|v| (0.0..=1.0 + 1e-12).contains(v)));
        assert!(p.hits() <= p.true_doas.len());
    }
    let csv = result.trace_csv();
    assert_eq!(csv.lines().count(), 1 + 2 * frames * 7);
    assert!(result.svg_heatmap("cnn").unwrap().starts_with("<svg"));
    assert!(result.svg_heatmap("nope").is_none());
}
