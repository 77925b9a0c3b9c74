//! Subcommand implementations.

use std::path::Path;

use twoseg_core::benchmark::{
    benchmark_json, compute_metrics, error_log_csv, lissajous, nested_rectangle,
    orientation_cone, run_trials, task_table_csv, BenchmarkReport, ConePoint, LatencyEntry,
    ReferenceTrajectory, TrialOptions,
};
use twoseg_core::config::RunConfig;
use twoseg_core::controllers::{
    measure_inference_latency, Controller, FnnController, JacobianController, MpcController,
    RnnController,
};
use twoseg_core::datagen::{self, Dataset};
use twoseg_core::nn::{
    self, ablation_grid, io as nn_io, AblationSpec, Arch, ModelParams, WindowSet,
};
use twoseg_core::plant::calibration;
use twoseg_core::seed::derive;
use twoseg_core::{Error, Result};

pub fn load_config(path: Option<&Path>, seed_override: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    Ok(())
}

pub fn collect(cfg: &RunConfig, duration: f64, rate: f64, out: &Path) -> Result<()> {
    if duration <= 0.0 {
        return Err(Error::invalid_argument("--duration must be positive"));
    }
    if rate <= 0.0 {
        return Err(Error::invalid_argument("--rate must be positive"));
    }
    let mut plant = cfg.build_plant(derive(cfg.seed, 0xC0));
    let dataset = datagen::monte_carlo_collect(duration, rate, &mut plant, cfg.seed)?;
    ensure_parent(out)?;
    datagen::save(&dataset, out, &cfg.hash())?;
    println!(
        "collected {} samples ({} train / {} val / {} test), {} rejected excursions",
        dataset.len(),
        dataset.train().len(),
        dataset.val().len(),
        dataset.test().len(),
        dataset.meta.rejected_excursions
    );
    println!("wrote {}", out.display());
    Ok(())
}

/// Recurrent windows or FNN error windows, depending on the architecture.
fn windows_for(arch: Arch, cfg: &RunConfig, dataset: &Dataset) -> Result<(WindowSet, WindowSet)> {
    match arch {
        Arch::Fnn => {
            let (train, val, _) = datagen::build_error_windows(dataset, cfg.controller.fnn_window)?;
            Ok((train, val))
        }
        _ => {
            let (train, val, _) = datagen::build_windows(dataset, cfg.train.window)?;
            Ok((train, val))
        }
    }
}

fn init_model(arch: Arch, cfg: &RunConfig, layers: usize, hidden: usize, seed: u64) -> ModelParams {
    match arch {
        Arch::Fnn => ModelParams::init(
            arch,
            layers,
            hidden,
            6 * cfg.controller.fnn_window,
            4,
            1,
            seed,
        ),
        _ => ModelParams::init(arch, layers, hidden, 12, 6, cfg.train.window, seed),
    }
}

#[allow(clippy::too_many_arguments)]
pub fn train(
    cfg: &RunConfig,
    arch: &str,
    layers: Option<usize>,
    hidden: Option<usize>,
    epochs: Option<usize>,
    dataset_path: &Path,
    out: Option<&Path>,
    grid: bool,
) -> Result<()> {
    let dataset = datagen::load(dataset_path)?;
    let mut schedule = cfg.train.schedule();
    if let Some(e) = epochs {
        schedule.max_epochs = e;
    }

    if grid {
        let (train_set, val_set) = windows_for(Arch::Gru, cfg, &dataset)?;
        let specs = [
            AblationSpec { arch: Arch::Gru, layers: 3, hidden: 64 },
            AblationSpec { arch: Arch::Lstm, layers: 3, hidden: 64 },
            AblationSpec { arch: Arch::Gru, layers: 4, hidden: 128 },
            AblationSpec { arch: Arch::Lstm, layers: 4, hidden: 128 },
            AblationSpec { arch: Arch::Gru, layers: 5, hidden: 256 },
            AblationSpec { arch: Arch::Lstm, layers: 5, hidden: 256 },
        ];
        let rows = ablation_grid(&specs, &train_set, &val_set, &schedule, cfg.seed)?;
        let out = out.unwrap_or(Path::new("ablation.csv"));
        ensure_parent(out)?;
        std::fs::write(out, nn_io::ablation_csv(&rows))?;
        for r in &rows {
            println!(
                "{} {}x{}: val loss {:.6}, {:.3} s/epoch, {} params",
                r.arch, r.layers, r.hidden, r.val_loss, r.secs_per_epoch, r.parameter_count
            );
        }
        println!("wrote {}", out.display());
        return Ok(());
    }

    let arch: Arch = arch.parse()?;
    let layers = layers.unwrap_or(cfg.train.layers);
    let hidden = hidden.unwrap_or(cfg.train.hidden);
    let (train_set, val_set) = windows_for(arch, cfg, &dataset)?;
    let model = init_model(arch, cfg, layers, hidden, derive(cfg.seed, 0x11));
    if schedule.max_epochs == 0 {
        eprintln!("warning: --epochs 0 saves the initialized weights unchanged");
    }
    let (trained, history) = nn::train(model, &train_set, &val_set, &schedule, cfg.seed)?;

    let default_out = std::path::PathBuf::from(format!("models/{}.json", arch.as_str()));
    let out = out.unwrap_or(&default_out);
    ensure_parent(out)?;
    nn_io::save_model(&trained, out)?;
    let loss_path = out.with_file_name(format!(
        "{}_loss.csv",
        out.file_stem().and_then(|s| s.to_str()).unwrap_or("model")
    ));
    std::fs::write(&loss_path, nn_io::loss_history_csv(&history))?;
    println!(
        "trained {} {}x{}: {} epochs, best epoch {}, val loss {:.6}, val MAE {:.6}",
        arch.as_str(),
        layers,
        hidden,
        trained.meta.epochs_run,
        trained.meta.best_epoch,
        trained.meta.final_val_loss,
        trained.meta.final_val_mae
    );
    println!("wrote {} and {}", out.display(), loss_path.display());
    Ok(())
}

fn build_controller(name: &str, cfg: &RunConfig, models_dir: &Path) -> Result<Box<dyn Controller>> {
    let load = |file: &str| -> Result<ModelParams> {
        let path = models_dir.join(file);
        nn_io::load_model(&path).map_err(|e| match e {
            Error::Io(io) => Error::InvalidState(format!(
                "controller '{name}' needs weights at {} ({io})",
                path.display()
            )),
            other => other,
        })
    };
    match name {
        "jacobian" => Ok(Box::new(JacobianController::new(
            cfg.controller.jacobian,
            cfg.limits,
            cfg.plant,
            cfg.geometry,
        ))),
        "mpc" => Ok(Box::new(MpcController::new(
            cfg.controller.mpc,
            cfg.limits,
            cfg.plant,
            cfg.geometry,
        ))),
        "fnn" => Ok(Box::new(FnnController::new(load("fnn.json")?, cfg.limits))),
        "lstm" => {
            let model = load("lstm.json")?;
            if model.arch != Arch::Lstm {
                return Err(Error::invalid_argument("lstm.json does not hold an lstm model"));
            }
            Ok(Box::new(RnnController::new(model, cfg.limits)))
        }
        "gru" => {
            let model = load("gru.json")?;
            if model.arch != Arch::Gru {
                return Err(Error::invalid_argument("gru.json does not hold a gru model"));
            }
            Ok(Box::new(RnnController::new(model, cfg.limits)))
        }
        other => Err(Error::invalid_argument(format!("unknown controller '{other}'"))),
    }
}

pub fn benchmark(
    cfg: &RunConfig,
    task: &str,
    controllers: &str,
    trials: Option<usize>,
    models_dir: &Path,
    out_dir: &Path,
) -> Result<()> {
    let task = task.to_ascii_lowercase();
    if !matches!(task.as_str(), "a" | "b" | "all") {
        return Err(Error::invalid_argument("--task must be a, b or all"));
    }
    let names: Vec<&str> = controllers
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if names.is_empty() {
        return Err(Error::invalid_argument("no controllers selected"));
    }

    let opts = TrialOptions {
        trials: trials.unwrap_or(cfg.benchmark.trials),
        jitter_position_mm: cfg.benchmark.jitter_position_mm,
        jitter_orientation_deg: cfg.benchmark.jitter_orientation_deg,
    };
    std::fs::create_dir_all(out_dir)?;

    let mut task_a_trajs: Vec<ReferenceTrajectory> = Vec::new();
    let mut task_b_trajs: Vec<ReferenceTrajectory> = Vec::new();
    if task == "a" || task == "all" {
        task_a_trajs.push(nested_rectangle(&cfg.geometry));
        task_a_trajs.push(lissajous(&cfg.geometry));
    }
    if task == "b" || task == "all" {
        for point in ConePoint::ALL {
            task_b_trajs.push(orientation_cone(point, &cfg.geometry));
        }
    }

    let mut report = BenchmarkReport::new(cfg.hash(), cfg.seed);
    let plant = cfg.build_plant(0);
    for name in &names {
        let mut controller = build_controller(name, cfg, models_dir)?;
        for (is_a, traj) in task_a_trajs
            .iter()
            .map(|t| (true, t))
            .chain(task_b_trajs.iter().map(|t| (false, t)))
        {
            let seed = derive(cfg.seed, hash_name(name) ^ hash_name(&traj.name));
            let runs = run_trials(traj, controller.as_mut(), &plant, &opts, seed)?;
            for run in &runs {
                let path = out_dir.join(format!(
                    "errors_{}_{}_{}.csv",
                    run.controller, run.trajectory, run.trial
                ));
                std::fs::write(&path, error_log_csv(&run.samples))?;
            }
            let metrics = compute_metrics(&runs)?;
            println!(
                "{} / {}: rmse_pos {:.3} mm, rmse_ori {:.3} deg ({} trials)",
                metrics.controller, metrics.trajectory, metrics.rmse_pos, metrics.rmse_ori, metrics.trials
            );
            if is_a {
                report.task_a.push(metrics);
            } else {
                report.task_b.push(metrics);
            }
        }
        let mean_ms = measure_inference_latency(controller.as_mut(), 200)?;
        report.timing.push(LatencyEntry {
            controller: name.to_string(),
            mean_ms,
        });
    }

    if !report.task_a.is_empty() {
        std::fs::write(out_dir.join("taskA.csv"), task_table_csv(&report.task_a))?;
    }
    if !report.task_b.is_empty() {
        std::fs::write(out_dir.join("taskB.csv"), task_table_csv(&report.task_b))?;
    }
    let json = benchmark_json(&report);
    twoseg_core::benchmark::validate_benchmark_json(&json)?;
    std::fs::write(out_dir.join("benchmark.json"), json)?;
    println!("wrote report files to {}", out_dir.display());
    Ok(())
}

fn hash_name(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |acc, b| {
        (acc ^ b as u64).wrapping_mul(0x1000_0000_01b3)
    })
}

pub fn calibrate_plant(out: &Path) -> Result<()> {
    let outcome = calibration::fit_default_params()?;
    ensure_parent(out)?;
    let mut csv = String::from("load_g,mean_drift_mm,norm_area,mean_stroke_mm\n");
    for row in &outcome.achieved {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.load_g, row.mean_drift_mm, row.norm_area, row.mean_stroke_mm
        ));
    }
    std::fs::write(out, csv)?;
    let meta = serde_json::json!({
        "cycles": calibration::CALIBRATION_CYCLES,
        "amplitude_mm": twoseg_core::plant::CHARACTERIZATION_AMPLITUDE,
        "worst_relative_error": outcome.worst_relative_error,
        "fitted": outcome.params,
    });
    std::fs::write(
        out.with_extension("json"),
        serde_json::to_string_pretty(&meta).expect("meta serializes"),
    )?;
    println!(
        "fitted transmission parameters (worst relative error {:.3}):",
        outcome.worst_relative_error
    );
    for row in &outcome.achieved {
        println!(
            "  load {:>5.1} g: drift {:.4} mm, norm area {:.5}, stroke {:.3} mm",
            row.load_g, row.mean_drift_mm, row.norm_area, row.mean_stroke_mm
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
