//! The decode/CB/CCDA ablation at toy scale: parallel decode against the
//! boundary-conditioned sequential cascade, with and without compositional
//! augmentation. The toy train split uses a narrow background palette while
//! the test split draws from the full one, so augmentation onto retrieved
//! wide-palette backgrounds has an out-of-distribution gap to close.
//!
//! ```text
//! cargo run --release --example ablation_table -- [n_train] [n_test] [iterations] [seed] [n_aug]
//! ```

use hoseg::ccda::reference::{DiffusionInpainter, HistogramEmbedder};
use hoseg::ccda::{build_background_pool, generate_augmented_set, AugmentConfig};
use hoseg::eval::{run_ablation, AblationCell, AblationDataset, AblationPlan, DecodeMode};
use hoseg::pipeline::TrainConfig;
use hoseg::toydata::{generate_clean_backgrounds, generate_set, write_dataset, ToyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, default: usize| -> usize {
        args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default)
    };
    let n_train = arg(1, 140);
    let n_test = arg(2, 60);
    let iterations = arg(3, 500) as u64;
    let seed = arg(4, 0) as u64;
    let n_aug = arg(5, 240);
    let cb_radius = 3;

    let dir = std::env::temp_dir().join(format!("hoseg_ablate_{n_train}_{n_test}_{seed}"));
    std::fs::create_dir_all(&dir)?;

    // Train scenes from a narrow background slice, test from the full one.
    let train_config = ToyConfig {
        n_images: n_train,
        seed: 1000,
        background_range: (0.0, 0.35),
        ..Default::default()
    };
    let test_config = ToyConfig {
        n_images: n_test,
        seed: 2000,
        background_range: (0.0, 1.0),
        ..Default::default()
    };
    let mut scenes = generate_set(&train_config);
    scenes.extend(generate_set(&test_config));
    let mut manifest = write_dataset(&scenes, &dir, n_train, 0)?;

    // Wide-palette pool and the composites sampled from it.
    let inpainter = DiffusionInpainter::default();
    let embedder = HistogramEmbedder;
    let frames: Vec<(String, image::RgbImage)> =
        generate_clean_backgrounds(&test_config, 80, 3000)
            .into_iter()
            .enumerate()
            .map(|(i, img)| (format!("clean_{i}"), img))
            .collect();
    let pool = build_background_pool(
        &frames,
        &(|_: &image::RgbImage| false),
        &inpainter,
        None,
        &embedder,
    )?;
    let outcome = generate_augmented_set(
        &manifest,
        &pool,
        &embedder,
        &inpainter,
        &AugmentConfig {
            topk: 10,
            n_total: n_aug,
            seed: 4000,
            options: Default::default(),
        },
    )?;
    manifest.extend_from(&outcome.manifest);
    println!(
        "dataset: {n_train} train + {} composites, {n_test} test",
        outcome.manifest.entries.len()
    );

    let data = AblationDataset::from_manifest(&manifest, cb_radius)?;
    let config = TrainConfig {
        iterations,
        batch_size: 8,
        learning_rate: 0.04,
        seed,
        ..Default::default()
    };
    let plan = AblationPlan {
        cells: vec![
            AblationCell {
                decode: DecodeMode::Parallel,
                ccda: false,
            },
            AblationCell {
                decode: DecodeMode::Sequential { with_cb: true },
                ccda: false,
            },
            AblationCell {
                decode: DecodeMode::Sequential { with_cb: true },
                ccda: true,
            },
        ],
    };
    let started = std::time::Instant::now();
    let table = run_ablation(&plan, &data, &config, cb_radius, 0.5)?;
    println!(
        "ran {} cells in {:.1}s\n{}",
        plan.cells.len(),
        started.elapsed().as_secs_f64(),
        table.render_table()
    );
    for (cell, outcome) in &table.rows {
        if let hoseg::eval::CellOutcome::Report(r) = outcome {
            println!(
                "{:<22} hand mIoU {:.4} | object mIoU {:.4}",
                cell.name(),
                r.hand_miou(),
                r.object_miou()
            );
        }
    }
    Ok(())
}
