use nalgebra::DVector;
use twoseg_core::datagen;
use twoseg_core::nn::{infer, load_model};

fn main() {
    let ds = datagen::load(std::path::Path::new("/tmp/smoke/dataset.csv")).unwrap();
    let model = load_model(std::path::Path::new("/tmp/smoke/models/gru.json")).unwrap();
    let (_, _, test) = datagen::build_windows(&ds, 5).unwrap();
    let mut abs = 0.0;
    let mut count = 0;
    let mut max_cmd: f64 = 0.0;
    for (w, target) in test.inputs.iter().zip(test.targets.iter()) {
        let out = infer(&model, w).unwrap();
        let diff: DVector<f64> = out - target;
        abs += diff.iter().map(|x| x.abs()).sum::<f64>();
        count += diff.len();
        max_cmd = max_cmd.max(target.iter().fold(0.0f64, |a, b| a.max(b.abs())));
    }
    println!("teacher-forced test MAE: {:.1} counts (max |target| {:.0})", abs / count as f64, max_cmd);

    // Command stats of the dataset
    let mut cmax = [0.0f64; 6];
    for s in &ds.samples {
        for c in 0..6 {
            cmax[c] = cmax[c].max(s.command.counts[c].abs());
        }
    }
    println!("per-channel max |command|: {:?}", cmax.map(|x| x.round()));
}
