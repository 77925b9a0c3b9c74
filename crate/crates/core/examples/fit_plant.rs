fn main() {
    let out = twoseg_core::plant::calibration::fit_default_params().unwrap();
    println!("{:#?}", out.params);
    println!("worst rel err {:.4}", out.worst_relative_error);
    for r in &out.achieved {
        println!(
            "load {:>5.1}  drift {:.4}  area {:.5}  stroke {:.3}",
            r.load_g, r.mean_drift_mm, r.norm_area, r.mean_stroke_mm
        );
    }
}
