use serde::{Deserialize, Serialize};

use super::experiment::{run_experiment, CnnMethod, DoaMethod, ExperimentConfig};
use super::metrics::{accuracy, TrialResult};
use crate::acoustics::RirBank;
use crate::dataset::{build_training_set, DoaGrid, TrainingPlan};
use crate::nnet::{train, ModelSpec, Network, TrainConfig};
use crate::rng::derive_seed;
use crate::signal::StftParams;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    /// Sub-array sizes, each taken from the middle of the bank's array.
    pub array_sizes: Vec<usize>,
    /// Convolution depths; `2..=M-1` when absent.
    #[serde(default)]
    pub depths: Option<Vec<usize>>,
    pub conv_filters: usize,
    pub dense: Vec<usize>,
    pub dropout: f64,
    pub training: TrainingPlan,
    pub train: TrainConfig,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub mics: usize,
    pub conv_layers: usize,
    pub mae_deg: f64,
    pub acc_pct: f64,
    pub params: usize,
    pub trials: usize,
}

pub const ABLATION_HEADER: &str = "mics,conv_layers,mae_deg,acc_pct,params,trials";

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("{ABLATION_HEADER}\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{:.4},{:.2},{},{}\n",
            r.mics, r.conv_layers, r.mae_deg, r.acc_pct, r.params, r.trials
        ));
    }
    s
}

impl AblationConfig {
    pub fn depths_for(&self, mics: usize) -> Result<Vec<usize>> {
        let depths = self.depths.clone().unwrap_or_else(|| (2..mics).collect());
        if let Some(&c) = depths.iter().find(|&&c| c == 0 || c + 1 > mics) {
            return Err(Error::invalid(format!("{c} convolution layers on {mics} mics; at most {} fit", mics - 1)));
        }
        Ok(depths)
    }

    pub fn model_spec(&self, mics: usize, conv_layers: usize, bins: usize, classes: usize) -> ModelSpec {
        ModelSpec {
            mics,
            bins,
            conv_filters: vec![self.conv_filters; conv_layers],
            dense: self.dense.clone(),
            classes,
            dropout: self.dropout,
        }
    }
}

fn bank_mics(bank: &RirBank) -> Result<usize> {
    bank.entries().next().map(|e| e.rir.num_mics()).ok_or_else(|| Error::invalid("empty RIR bank"))
}

/// Trains one network per (array size, depth) on middle-mic sub-arrays and
/// scores each on the test design. `pretrained` entries `(M, C, model)` skip
/// training for that pair.
pub fn ablate_conv_depth(
    train_bank: &RirBank,
    test_bank: &RirBank,
    config: &AblationConfig,
    grid: &DoaGrid,
    params: StftParams,
    pretrained: &[(usize, usize, Network<f32>)],
    mut progress: impl FnMut(&str),
) -> Result<Vec<AblationRow>> {
    let full = bank_mics(train_bank)?;
    if bank_mics(test_bank)? != full {
        return Err(Error::shape("training and test banks use different arrays"));
    }
    let full_geom = &train_bank.entries().next().expect("non-empty").meta.geometry;
    let mut rows = Vec::new();
    for &mics in &config.array_sizes {
        let depths = config.depths_for(mics)?;
        let idx = full_geom.middle_indices(mics)?;
        let train_sub = train_bank.select_mics(&idx)?;
        let test_sub = test_bank.select_mics(&idx)?;
        let needs_training = depths.iter().any(|&c| !pretrained.iter().any(|(m, d, _)| *m == mics && *d == c));
        let data = if needs_training {
            progress(&format!("M={mics}: building training set"));
            Some(build_training_set(
                &train_sub,
                &config.training,
                grid,
                params,
                derive_seed(config.train.seed, &[mics as u64]),
            )?)
        } else {
            None
        };
        for c in depths {
            let model = match pretrained.iter().find(|(m, d, _)| *m == mics && *d == c) {
                Some((_, _, net)) => net.clone(),
                None => {
                    let spec = config.model_spec(mics, c, params.num_bins(), grid.len());
                    let mut net = Network::<f32>::new(spec, derive_seed(config.train.seed, &[mics as u64, c as u64]))?;
                    let data = data.as_ref().expect("built when training is needed");
                    train(&mut net, data, &config.train, |e| {
                        progress(&format!("M={mics} C={c} epoch {} loss {:.4}", e.epoch, e.train_loss))
                    })?;
                    net
                }
            };
            if model.spec().mics != mics || model.spec().conv_layers() != c {
                return Err(Error::shape(format!("pretrained model does not match M={mics}, C={c}")));
            }
            let params_count = model.param_count();
            let method = CnnMethod { name: format!("cnn-m{mics}-c{c}"), model };
            let methods: [&dyn DoaMethod; 1] = [&method];
            let (_, trials) = run_experiment(&test_sub, &config.experiment, grid, params, &methods)?;
            rows.push(summarize(mics, c, params_count, &trials, config.experiment.threshold_deg)?);
            progress(&format!("M={mics} C={c}: done"));
        }
    }
    Ok(rows)
}

fn summarize(
    mics: usize,
    conv_layers: usize,
    params: usize,
    trials: &[TrialResult],
    threshold: f64,
) -> Result<AblationRow> {
    let mut sum = 0.0;
    for t in trials {
        sum += t.mae()?;
    }
    Ok(AblationRow {
        mics,
        conv_layers,
        mae_deg: sum / trials.len().max(1) as f64,
        acc_pct: accuracy(trials, threshold)?,
        params,
        trials: trials.len(),
    })
}
