//! Generate a synthetic shapes dataset in the on-disk layout the CLI
//! consumes: images, label maps, a manifest, hand-state annotations, and a
//! directory of clean frames for pool building.
//!
//! ```text
//! cargo run --release --example make_toy_dataset -- <out_dir> [n_images] [seed]
//! ```

use hoseg::dataio::save_rgb;
use hoseg::toydata::{
    generate_clean_backgrounds, generate_set, write_dataset, write_state_annotations, ToyConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let out = std::path::PathBuf::from(args.get(1).map(String::as_str).unwrap_or("toy_dataset"));
    let n_images: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(120);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);

    let config = ToyConfig {
        n_images,
        seed,
        self_contact_prob: 0.08,
        ..Default::default()
    };
    let scenes = generate_set(&config);
    // 8:1:1 split over the generated order.
    let n_train = n_images * 8 / 10;
    let n_val = n_images / 10;
    let manifest = write_dataset(&scenes, &out, n_train, n_val)?;
    write_state_annotations(&scenes, &out.join("states.tsv"))?;

    let frames_dir = out.join("frames");
    std::fs::create_dir_all(&frames_dir)?;
    for (i, frame) in generate_clean_backgrounds(&config, n_images / 2, seed ^ 0xbac4)
        .iter()
        .enumerate()
    {
        save_rgb(frame, &frames_dir.join(format!("frame_{i:05}.png")))?;
    }

    println!(
        "wrote {} scenes ({} train / {} val / {} test), states.tsv, and {} clean frames under {}",
        scenes.len(),
        n_train,
        n_val,
        n_images - n_train - n_val,
        n_images / 2,
        out.display()
    );
    println!("manifest: {}", manifest.root.join("manifest.tsv").display());
    Ok(())
}
