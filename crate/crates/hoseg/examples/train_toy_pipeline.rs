//! Train the sequential hand -> boundary -> object pipeline on a generated
//! shapes dataset and report test-split IoU.
//!
//! ```text
//! cargo run --release --example train_toy_pipeline -- [n_train] [n_test] [iterations] [seed] [lr_x1000] [teacher_forcing]
//! ```

use hoseg::eval::{run_cell, AblationCell, AblationDataset, DecodeMode};
use hoseg::pipeline::TrainConfig;
use hoseg::toydata::{generate_set, write_dataset, ToyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, default: usize| -> usize {
        args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default)
    };
    let n_train = arg(1, 500);
    let n_test = arg(2, 100);
    let iterations = arg(3, 2000) as u64;
    let seed = arg(4, 0) as u64;
    let learning_rate = arg(5, 20) as f64 / 1000.0;
    let teacher_forcing = arg(6, 1) == 1;
    let cb_radius = 3;

    let dir = std::env::temp_dir().join(format!("hoseg_toy_{n_train}_{n_test}_{seed}"));
    std::fs::create_dir_all(&dir)?;
    println!("generating {} scenes under {}", n_train + n_test, dir.display());
    let scenes = generate_set(&ToyConfig {
        n_images: n_train + n_test,
        seed,
        ..Default::default()
    });
    let manifest = write_dataset(&scenes, &dir, n_train, 0)?;

    let data = AblationDataset::from_manifest(&manifest, cb_radius)?;
    let config = TrainConfig {
        iterations,
        batch_size: 8,
        learning_rate,
        teacher_forcing,
        seed,
        ..Default::default()
    };
    println!("lr {learning_rate} teacher_forcing {teacher_forcing}");

    let started = std::time::Instant::now();
    let (_, report) = run_cell(
        &AblationCell {
            decode: DecodeMode::Sequential { with_cb: true },
            ccda: false,
        },
        &data,
        &config,
        cb_radius,
        0.5,
    )?;
    println!(
        "trained 3 stages x {iterations} iterations in {:.1}s",
        started.elapsed().as_secs_f64()
    );
    println!("{}", report.metrics.render_table());
    println!(
        "hand mIoU {:.4} | object mIoU {:.4}",
        report.hand_miou(),
        report.object_miou()
    );
    Ok(())
}
