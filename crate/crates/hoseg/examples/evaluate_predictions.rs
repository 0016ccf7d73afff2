//! The evaluation protocol on synthetic predictions: dataset-summed
//! confusion counts, per-class IoU/Prec/Rec/F1, means over classes present
//! in the ground truth, and all-background scoring for missing predictions.
//!
//! ```text
//! cargo run --example evaluate_predictions
//! ```

use hoseg::eval::{evaluate_run, Prediction, RunMetadata};
use hoseg::mask::{ClassId, LabelMap};
use hoseg::toydata::{generate_set, write_dataset, ToyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let scenes = generate_set(&ToyConfig {
        n_images: 8,
        seed: 21,
        ..Default::default()
    });
    let manifest = write_dataset(&scenes, dir.path(), 0, 0)?; // all test

    // Imperfect predictions: ground truth eroded by dropping every label
    // pixel in odd columns of odd rows, and the last image left missing.
    let mut predictions = Vec::new();
    for (i, scene) in scenes.iter().enumerate().take(scenes.len() - 1) {
        let mut labels = LabelMap::new(scene.labels.width(), scene.labels.height())?;
        for y in 0..labels.height() {
            for x in 0..labels.width() {
                let id = scene.labels.class_at(x, y);
                if id != 0 && !(x % 2 == 1 && y % 2 == 1) {
                    labels.set_class(x, y, ClassId::from_u8(id)?);
                }
            }
        }
        predictions.push(Prediction {
            basename: format!("toy_{i:05}"),
            labels,
            boundary: None,
        });
    }

    let report = evaluate_run(
        &predictions,
        &manifest,
        hoseg::dataio::Split::Test,
        3,
        RunMetadata {
            config_hash: "demo".into(),
            seed: 0,
            dataset_id: "toy".into(),
        },
    )?;
    print!("{}", report.metrics.render_table());
    println!(
        "missing predictions scored all-background: {:?}",
        report.missing_predictions
    );
    let out = report.write_under(dir.path())?;
    println!(
        "report files: {:?}",
        std::fs::read_dir(out)?
            .filter_map(|e| e.ok().map(|e| e.file_name()))
            .collect::<Vec<_>>()
    );
    Ok(())
}
