//! Round-trip the CSV data formats: generate a dataset, save it, reload it,
//! split it with per-channel schemes, and write predictions back out.

use mocsm::data::{
    generate_synthetic, load_csv, save_csv, save_predictions, split, SplitScheme,
};
use mocsm::gp::{predict, MogpModel};
use mocsm::init::{init_noise, init_params};
use mocsm::kernels::KernelFamily;

fn main() -> mocsm::Result<()> {
    let ds = generate_synthetic(11, 2, 64, (-8.0, 8.0))?;
    save_csv(&ds, "workflow_data.csv")?;
    let loaded = load_csv("workflow_data.csv", 1)?;
    assert_eq!(loaded, ds);
    println!(
        "saved and reloaded {} points across {} channels",
        loaded.n_total(),
        loaded.m()
    );

    // channel 1 fully observed; channel 2 interpolation; channel 3 extrapolation
    let schemes = vec![
        SplitScheme::TrainOnly,
        SplitScheme::RandomHalf(11),
        SplitScheme::FirstHalf,
    ];
    let (train, test) = split(&loaded, &schemes)?;
    println!(
        "split into {} train / {} test points",
        train.n_total(),
        test.n_total()
    );

    // quick un-optimized model purely to exercise the prediction format
    let params = init_params(&train, 2, KernelFamily::Mocsm, 0)?;
    let model = MogpModel::new(params, init_noise(&train), train)?;
    let points: Vec<(usize, Vec<f64>)> = test
        .channels
        .iter()
        .flat_map(|ch| ch.x.iter().map(|x| (ch.channel_id, x.clone())))
        .collect();
    let post = predict(&model, &points, true)?;
    save_predictions(&points, &post.mean, &post.variance, 1, "workflow_predictions.csv")?;
    println!(
        "wrote {} predictions ({} variances clamped) to workflow_predictions.csv",
        points.len(),
        post.clamped
    );
    Ok(())
}
