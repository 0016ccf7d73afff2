//! Context-aware compositional augmentation end to end: build a clean
//! background pool, inpaint each foreground's own scene as the retrieval
//! query, and composite onto backgrounds sampled from the top-K matches.
//!
//! ```text
//! cargo run --release --example augment_dataset -- [out_dir] [n_train] [n_aug] [seed]
//! ```

use hoseg::ccda::reference::{DiffusionInpainter, HistogramEmbedder};
use hoseg::ccda::{
    build_background_pool, generate_augmented_set, make_query_background, retrieve_topk,
    AugmentConfig, Embedder,
};
use hoseg::toydata::{generate_clean_backgrounds, generate_set, write_dataset, ToyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let out = std::path::PathBuf::from(args.get(1).map(String::as_str).unwrap_or("aug_demo"));
    let n_train: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(24);
    let n_aug: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(48);
    let seed: u64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0);

    let config = ToyConfig {
        n_images: n_train,
        seed,
        ..Default::default()
    };
    let scenes = generate_set(&config);
    let manifest = write_dataset(&scenes, &out, n_train, 0)?;

    let inpainter = DiffusionInpainter::default();
    let embedder = HistogramEmbedder;
    let frames: Vec<(String, image::RgbImage)> = generate_clean_backgrounds(&config, 40, seed ^ 1)
        .into_iter()
        .enumerate()
        .map(|(i, img)| (format!("clean_{i}"), img))
        .collect();
    let pool = build_background_pool(&frames, &(|_: &image::RgbImage| false), &inpainter, None, &embedder)?;
    println!("pool: {} clean backgrounds", pool.len());

    // Show one retrieval: the first foreground's inpainted query against the pool.
    let (image, labels) = manifest.load_entry(&manifest.entries[0])?;
    let query = make_query_background(&image, &labels, &inpainter)?;
    let ranked = retrieve_topk(&pool, &embedder.embed(&query), 5)?;
    println!("top-5 backgrounds for foreground 0:");
    for r in &ranked {
        println!("  item {:>3} similarity {:.4}", r.item, r.similarity);
    }

    let outcome = generate_augmented_set(
        &manifest,
        &pool,
        &embedder,
        &inpainter,
        &AugmentConfig {
            topk: 10,
            n_total: n_aug,
            seed,
            options: Default::default(),
        },
    )?;
    println!(
        "wrote {} composites under {} ({} skipped foregrounds)",
        outcome.manifest.entries.len(),
        out.join("aug").display(),
        outcome.failures.len()
    );
    for entry in outcome.manifest.entries.iter().take(3) {
        let p = entry.aug.unwrap();
        println!(
            "  {} <- foreground {} on background {} (rank {})",
            entry.image.display(),
            p.foreground,
            p.background,
            p.rank
        );
    }
    Ok(())
}
