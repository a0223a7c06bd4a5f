//! One function per subcommand. Each validates its inputs, does the work and
//! returns the artifacts it wrote, relative to the output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use doanet::acoustics::RirBank;
use doanet::baselines::Band;
use doanet::dataset::build_training_set;
use doanet::estimator::{estimate_block, BlockEstimate};
use doanet::eval::{
    ablate_conv_depth, ablation_csv, dynamic_scenario, results_csv, run_experiment, simulated_block, BaselineDoa,
    CnnMethod, DoaMethod,
};
use doanet::nnet::{load_model, save_model, train};
use doanet::rng::derive_seed;
use doanet::signal::{read_wav, stft};
use doanet::{Dataset, DoaGrid, ModelSpec, Network};

use crate::config::{RunConfig, SYNTH_TAG};
use crate::failure::Failure;

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub out: &'a Path,
    /// Progress messages go to stderr unless quiet.
    pub quiet: bool,
}

impl Context<'_> {
    fn progress(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
        fs::write(self.out.join(name), contents)?;
        Ok(PathBuf::from(name))
    }
}

/// Fails before any work when an input path is missing.
fn require(paths: &[&Path]) -> Result<(), Failure> {
    for p in paths {
        if !p.exists() {
            return Err(Failure::input(p, "input does not exist"));
        }
    }
    Ok(())
}

fn load_bank(path: &Path) -> Result<RirBank, Failure> {
    RirBank::load(path).map_err(|e| Failure::input(path, format!("cannot load RIR bank: {e}")))
}

fn load_net(path: &Path) -> Result<Network<f32>, Failure> {
    load_model(path).map_err(|e| Failure::input(path, format!("cannot load model: {e}")))
}

fn check_model(net: &Network<f32>, grid: &DoaGrid, config: &RunConfig, path: &Path) -> Result<(), Failure> {
    let spec = net.spec();
    if spec.classes != grid.len() {
        return Err(Failure::config(
            "grid.resolution",
            format!("{} has {} classes but the grid has {}", path.display(), spec.classes, grid.len()),
        ));
    }
    if spec.bins != config.stft.num_bins() {
        return Err(Failure::config(
            "stft.frame_len",
            format!("{} expects {} bins but the STFT gives {}", path.display(), spec.bins, config.stft.num_bins()),
        ));
    }
    Ok(())
}

pub fn simulate(ctx: &Context) -> Result<Vec<PathBuf>, Failure> {
    let plan = RunConfig::section(&ctx.config.simulate, "simulate")?;
    ctx.progress(&format!("simulating {} RIR sets", plan.num_tuples()));
    let bank = RirBank::generate(plan)?;
    let dir = ctx.out.join("bank");
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    bank.save(&dir)?;
    ctx.progress(&format!("wrote {} entries to {}", bank.len(), dir.display()));
    Ok(vec!["bank".into()])
}

pub fn synth(ctx: &Context) -> Result<Vec<PathBuf>, Failure> {
    let section = RunConfig::section(&ctx.config.synth, "synth")?;
    let grid = ctx.config.grid()?;
    require(&[&section.bank])?;
    let bank = load_bank(&section.bank)?;
    ctx.progress(&format!("synthesizing {} frames", section.plan.record_count(&grid)));
    let data =
        build_training_set(&bank, &section.plan, &grid, ctx.config.stft, derive_seed(ctx.config.seed, &[SYNTH_TAG]))?;
    data.write(ctx.out.join("dataset.dset"))?;
    Ok(vec!["dataset.dset".into()])
}

pub fn train_cmd(ctx: &Context) -> Result<Vec<PathBuf>, Failure> {
    let section = RunConfig::section(&ctx.config.train, "train")?;
    require(&[&section.dataset])?;
    let data = Dataset::read(&section.dataset)
        .map_err(|e| Failure::input(&section.dataset, format!("cannot read dataset: {e}")))?;
    let spec = ModelSpec {
        mics: data.mics(),
        bins: data.bins(),
        conv_filters: section.model.conv_filters.clone(),
        dense: section.model.dense.clone(),
        classes: data.classes(),
        dropout: section.model.dropout,
    };
    let mut net = Network::<f32>::new(spec, derive_seed(section.schedule.seed, &[0]))?;
    ctx.progress(&format!("training {} parameters on {} frames", net.param_count(), data.len()));
    let report = train(&mut net, &data, &section.schedule, |e| {
        let val = e.val_loss.map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into());
        ctx.progress(&format!("epoch {} train {:.5} val {val} ({:.1} s)", e.epoch, e.train_loss, e.seconds));
    })?;
    save_model(&net, ctx.out.join("model.dnet"))?;
    let log = ctx.write("training_log.csv", report.to_csv())?;
    Ok(vec!["model.dnet".into(), log])
}

fn estimate_csv(est: &BlockEstimate, grid: &DoaGrid) -> String {
    let mut s = String::from("doa_deg,probability,selected\n");
    for (angle, p) in grid.angles().iter().zip(&est.averaged_probs) {
        let _ = writeln!(s, "{angle},{p:.6},{}", est.doas.contains(angle) as u8);
    }
    s
}

pub fn infer(ctx: &Context) -> Result<(Vec<PathBuf>, String), Failure> {
    let section = RunConfig::section(&ctx.config.infer, "infer")?;
    let grid = ctx.config.grid()?;
    let mut inputs: Vec<&Path> = vec![&section.model];
    match (&section.wav, &section.mixture) {
        (Some(w), None) => inputs.push(w),
        (None, Some(m)) => inputs.push(&m.bank),
        _ => return Err(Failure::config("infer", "set exactly one of `wav` and `mixture`")),
    }
    require(&inputs)?;
    let net = load_net(&section.model)?;
    check_model(&net, &grid, ctx.config, &section.model)?;
    let (spec, frames) = if let Some(path) = &section.wav {
        let sig = read_wav(path).map_err(|e| Failure::input(path, format!("cannot read WAV: {e}")))?;
        if sig.num_channels() != net.spec().mics {
            return Err(Failure::input(
                path,
                format!("{} channels but the model expects {}", sig.num_channels(), net.spec().mics),
            ));
        }
        let spec = stft(&sig, ctx.config.stft)?;
        let end = match section.block_frames {
            Some(n) => section.start_frame + n,
            None => spec.num_frames(),
        };
        (spec, section.start_frame..end)
    } else {
        let m = section.mixture.as_ref().expect("checked above");
        let bank = load_bank(&m.bank)?;
        let (spec, frames, _) = simulated_block(
            &bank,
            &m.room,
            m.position,
            m.distance,
            &m.doas,
            m.noise,
            m.snr_db,
            &m.source,
            ctx.config.stft,
            section.block_frames.unwrap_or(50),
            m.seed,
        )?;
        (spec, frames)
    };
    let est = estimate_block(&net, &spec, frames, section.sources, &grid)?;
    let csv = estimate_csv(&est, &grid);
    let doas: Vec<String> = est.doas.iter().map(|d| d.to_string()).collect();
    let printed = format!("doas_deg: {}\n{csv}", doas.join(" "));
    let path = ctx.write("estimate.csv", csv)?;
    Ok((vec![path], printed))
}

pub fn eval(ctx: &Context) -> Result<(Vec<PathBuf>, String), Failure> {
    let section = RunConfig::section(&ctx.config.eval, "eval")?;
    let grid = ctx.config.grid()?;
    if section.models.is_empty() && section.baselines.is_empty() {
        return Err(Failure::config("eval.models", "no models or baselines to evaluate"));
    }
    let mut inputs: Vec<&Path> = vec![&section.bank];
    inputs.extend(section.models.values().map(|p| p.as_path()));
    require(&inputs)?;
    let bank = load_bank(&section.bank)?;
    let mut methods: Vec<Box<dyn DoaMethod>> = Vec::new();
    for (name, path) in &section.models {
        let model = load_net(path)?;
        check_model(&model, &grid, ctx.config, path)?;
        methods.push(Box::new(CnnMethod { name: name.clone(), model }));
    }
    let band: Band = section.experiment.band;
    for &method in &section.baselines {
        methods.push(Box::new(BaselineDoa { method, band }));
    }
    let refs: Vec<&dyn DoaMethod> = methods.iter().map(|m| m.as_ref()).collect();
    ctx.progress(&format!(
        "evaluating {} methods on {} trials per condition",
        refs.len(),
        section.experiment.trials_per_condition(&grid)
    ));
    let (rows, trials) = run_experiment(&bank, &section.experiment, &grid, ctx.config.stft, &refs)?;
    let csv = results_csv(&rows);
    let mut trial_csv = String::from("method,room,snr_db,noise_type,distance_m,true_doas,estimated_doas\n");
    for t in &trials {
        let join = |v: &[f64]| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
        let c = &t.condition;
        let _ = writeln!(
            trial_csv,
            "{},{},{},{},{},{},{}",
            t.method,
            c.room,
            c.snr_db,
            c.noise_type,
            c.distance_m,
            join(&t.true_doas),
            join(&t.estimated_doas)
        );
    }
    let a = ctx.write("results.csv", &csv)?;
    let b = ctx.write("trials.csv", trial_csv)?;
    Ok((vec![a, b], csv))
}

pub fn ablate(ctx: &Context) -> Result<(Vec<PathBuf>, String), Failure> {
    let section = RunConfig::section(&ctx.config.ablate, "ablate")?;
    let grid = ctx.config.grid()?;
    let mut inputs: Vec<&Path> = vec![&section.train_bank, &section.test_bank];
    inputs.extend(section.pretrained.iter().map(|p| p.model.as_path()));
    require(&inputs)?;
    let train_bank = load_bank(&section.train_bank)?;
    let test_bank = load_bank(&section.test_bank)?;
    let pretrained = section
        .pretrained
        .iter()
        .map(|p| Ok((p.mics, p.conv_layers, load_net(&p.model)?)))
        .collect::<Result<Vec<_>, Failure>>()?;
    let rows = ablate_conv_depth(&train_bank, &test_bank, &section.config, &grid, ctx.config.stft, &pretrained, |m| {
        ctx.progress(m)
    })?;
    let csv = ablation_csv(&rows);
    let path = ctx.write("ablation.csv", &csv)?;
    Ok((vec![path], csv))
}

pub fn dynamic(ctx: &Context) -> Result<Vec<PathBuf>, Failure> {
    let section = RunConfig::section(&ctx.config.dynamic, "dynamic")?;
    let grid = ctx.config.grid()?;
    require(&[&section.bank, &section.model])?;
    let bank = load_bank(&section.bank)?;
    let model = load_net(&section.model)?;
    check_model(&model, &grid, ctx.config, &section.model)?;
    let result = dynamic_scenario(&bank, &section.scenario, &grid, ctx.config.stft, &model)?;
    let mut out = vec![ctx.write("dynamic_trace.csv", result.trace_csv())?];
    let mut profiles = String::from("segment,method,true_doas,top_doas,argmax_deg,hits\n");
    for p in &result.profiles {
        let join = |v: &[f64]| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ");
        let _ = writeln!(
            profiles,
            "{},{},{},{},{},{}",
            p.segment + 1,
            p.method,
            join(&p.true_doas),
            join(&p.top),
            grid.angle(p.argmax()),
            p.hits()
        );
    }
    out.push(ctx.write("dynamic_profiles.csv", profiles)?);
    for (method, _) in &result.traces {
        if let Some(svg) = result.svg_heatmap(method) {
            out.push(ctx.write(&format!("dynamic_{method}.svg"), svg)?);
        }
    }
    Ok(out)
}
