//! Metrics, test-mixture synthesis and the experiment harness: condition
//! sweeps, the convolution-depth ablation and the dynamic scenario.

mod ablation;
mod dynamic;
mod experiment;
mod metrics;
mod sources;

pub use ablation::{ablate_conv_depth, ablation_csv, AblationConfig, AblationRow, ABLATION_HEADER};
pub use dynamic::{default_schedule, dynamic_scenario, DynamicConfig, DynamicResult, Segment, SegmentProfile};
pub use experiment::{
    run_experiment, simulated_block, BaselineDoa, CnnMethod, DoaMethod, ExperimentConfig, OracleMethod, TrialInput,
};
pub use metrics::{
    accuracy, assigned_errors, mae, mae_identity, results_csv, Condition, MetricsRow, TrialResult, MAX_ASSIGNMENT,
    RESULTS_HEADER,
};
pub use sources::{speech_like_bursts, synth_mixture, NoiseType, SourceBank, SourceKind, NOISE_PLANE_WAVES};
