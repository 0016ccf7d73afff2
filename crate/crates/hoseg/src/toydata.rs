//! Synthetic shapes scenes: colored "hands" holding colored "objects" on
//! textured backgrounds, with exact labels, derived hand states, and clean
//! background frames. Small enough to train the reference pipeline on a
//! laptop CPU, structured so the cascade's conditioning actually matters:
//! interacting objects share one color family while distractor blobs of the
//! same family sit away from any hand, so objectness is decided by hand
//! contact rather than appearance.

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataio::{
    save_rgb, DatasetLayout, DatasetManifest, ManifestEntry, SourceTag, Split,
};
use crate::error::Result;
use crate::handstate::{HandState, HandStatePair};
use crate::mask::{io as maskio, ClassId, LabelMap};

#[derive(Debug, Clone)]
pub struct ToyConfig {
    pub width: u32,
    pub height: u32,
    pub n_images: usize,
    pub seed: u64,
    /// Background palette slice [lo, hi] within [0, 1]; narrow the range to
    /// simulate a low-variety training domain.
    pub background_range: (f64, f64),
    pub distractor_prob: f64,
    pub two_hand_prob: f64,
    pub hand_absent_prob: f64,
    /// Probability that a present hand holds an object.
    pub object_prob: f64,
    /// Probability of a hands-touching scene (no objects); used by the
    /// hand-state application.
    pub self_contact_prob: f64,
    /// Draw short wrist strips recorded in the arm layer.
    pub with_arm: bool,
    /// Render hands/objects at background-like colors so only the mask
    /// channels carry their geometry.
    pub camouflage: bool,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            width: 32,
            height: 32,
            n_images: 100,
            seed: 0,
            background_range: (0.0, 1.0),
            distractor_prob: 0.7,
            two_hand_prob: 0.2,
            hand_absent_prob: 0.08,
            object_prob: 0.85,
            self_contact_prob: 0.0,
            with_arm: false,
            camouflage: false,
        }
    }
}

/// One generated scene.
pub struct ToyScene {
    pub image: RgbImage,
    pub labels: LabelMap,
    pub states: HandStatePair,
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let c = v * s;
    let hp = (h.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [
        ((r + m) * 255.0).round() as u8,
        ((g + m) * 255.0).round() as u8,
        ((b + m) * 255.0).round() as u8,
    ]
}

fn jitter(rng: &mut ChaCha8Rng, base: [u8; 3], amount: i32) -> [u8; 3] {
    let mut out = [0u8; 3];
    for c in 0..3 {
        let d = rng.gen_range(-amount..=amount);
        out[c] = (base[c] as i32 + d).clamp(0, 255) as u8;
    }
    out
}

#[derive(Clone, Copy)]
enum Blob {
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
    Rect { x0: i64, y0: i64, x1: i64, y1: i64 },
    Triangle { ax: f64, ay: f64, w: f64, h: f64 },
}

impl Blob {
    fn contains(&self, x: u32, y: u32) -> bool {
        let (fx, fy) = (x as f64, y as f64);
        match *self {
            Blob::Ellipse { cx, cy, rx, ry } => {
                let dx = (fx - cx) / rx;
                let dy = (fy - cy) / ry;
                dx * dx + dy * dy <= 1.0
            }
            Blob::Rect { x0, y0, x1, y1 } => {
                (x as i64) >= x0 && (x as i64) <= x1 && (y as i64) >= y0 && (y as i64) <= y1
            }
            Blob::Triangle { ax, ay, w, h } => {
                // Upright isoceles triangle with apex (ax, ay).
                let dy = fy - ay;
                if dy < 0.0 || dy > h {
                    return false;
                }
                let half = w / 2.0 * dy / h;
                (fx - ax).abs() <= half
            }
        }
    }

    fn center(&self) -> (f64, f64) {
        match *self {
            Blob::Ellipse { cx, cy, .. } => (cx, cy),
            Blob::Rect { x0, y0, x1, y1 } => (((x0 + x1) as f64) / 2.0, ((y0 + y1) as f64) / 2.0),
            Blob::Triangle { ax, ay, w: _, h } => (ax, ay + h * 0.66),
        }
    }
}

struct Painter {
    image: RgbImage,
    labels: LabelMap,
}

impl Painter {
    fn paint(&mut self, blob: &Blob, color: [u8; 3], class: Option<ClassId>, rng: &mut ChaCha8Rng) {
        let (w, h) = (self.image.width(), self.image.height());
        for y in 0..h {
            for x in 0..w {
                if blob.contains(x, y) {
                    self.image.put_pixel(x, y, image::Rgb(jitter(rng, color, 8)));
                    if let Some(c) = class {
                        self.labels.set_class(x, y, c);
                    }
                }
            }
        }
    }
}

struct SceneColors {
    left_hand: [u8; 3],
    right_hand: [u8; 3],
    object: [u8; 3],
}

fn scene_colors(rng: &mut ChaCha8Rng, background: [u8; 3], camouflage: bool) -> SceneColors {
    if camouflage {
        // Barely distinguishable from the background; geometry lives in the
        // mask channels only.
        SceneColors {
            left_hand: jitter(rng, background, 10),
            right_hand: jitter(rng, background, 10),
            object: jitter(rng, background, 10),
        }
    } else {
        SceneColors {
            left_hand: [
                rng.gen_range(185..=245),
                rng.gen_range(25..=70),
                rng.gen_range(25..=70),
            ],
            right_hand: [
                rng.gen_range(25..=70),
                rng.gen_range(25..=70),
                rng.gen_range(185..=245),
            ],
            object: [
                rng.gen_range(25..=80),
                rng.gen_range(170..=235),
                rng.gen_range(25..=80),
            ],
        }
    }
}

fn textured_background(rng: &mut ChaCha8Rng, config: &ToyConfig) -> (RgbImage, [u8; 3]) {
    let (lo, hi) = config.background_range;
    let t = rng.gen_range(lo..=hi);
    let base = hsv_to_rgb(t * 360.0, rng.gen_range(0.18..0.40), rng.gen_range(0.30..0.62));
    let mut image = RgbImage::new(config.width, config.height);
    for y in 0..config.height {
        for x in 0..config.width {
            image.put_pixel(x, y, image::Rgb(jitter(rng, base, 10)));
        }
    }
    (image, base)
}

fn object_blob(rng: &mut ChaCha8Rng, cx: f64, cy: f64, big: bool, w: u32, h: u32) -> Blob {
    // Radii stay small enough that every object pixel lies within the
    // reference predictor's conditioning reach of the hand it touches.
    let r = if big {
        rng.gen_range(2.8..3.3)
    } else {
        rng.gen_range(1.9..2.3)
    };
    let cx = cx.clamp(r + 1.0, w as f64 - r - 2.0);
    let cy = cy.clamp(r + 1.0, h as f64 - r - 2.0);
    match rng.gen_range(0..3) {
        0 => Blob::Ellipse {
            cx,
            cy,
            rx: r,
            ry: r * rng.gen_range(0.8..1.2),
        },
        1 => Blob::Rect {
            x0: (cx - r) as i64,
            y0: (cy - r * 0.8) as i64,
            x1: (cx + r) as i64,
            y1: (cy + r * 0.8) as i64,
        },
        _ => Blob::Triangle {
            ax: cx,
            ay: cy - r,
            w: 2.0 * r,
            h: 2.0 * r,
        },
    }
}

fn generate_scene(rng: &mut ChaCha8Rng, config: &ToyConfig) -> ToyScene {
    let (w, h) = (config.width, config.height);
    let (image, base) = textured_background(rng, config);
    let colors = scene_colors(rng, base, config.camouflage);
    let mut painter = Painter {
        image,
        labels: LabelMap::new(w, h).unwrap(),
    };

    let self_contact = rng.gen_bool(config.self_contact_prob);
    let left_present = self_contact || !rng.gen_bool(config.hand_absent_prob);
    let right_present = self_contact || !rng.gen_bool(config.hand_absent_prob);
    let bridged =
        !self_contact && left_present && right_present && rng.gen_bool(config.two_hand_prob);

    // Hand geometry. Self-contact scenes park both hands side by side.
    let hand_ry = |rng: &mut ChaCha8Rng| rng.gen_range(4.2..6.2);
    let hand_rx = |rng: &mut ChaCha8Rng| rng.gen_range(3.2..4.6);
    let (left_blob, right_blob) = if self_contact {
        let cy = rng.gen_range(h as f64 * 0.35..h as f64 * 0.7);
        let cx = rng.gen_range(w as f64 * 0.3..w as f64 * 0.6);
        let (lrx, lry) = (hand_rx(rng), hand_ry(rng));
        let (rrx, rry) = (hand_rx(rng), hand_ry(rng));
        (
            Some(Blob::Ellipse {
                cx,
                cy,
                rx: lrx,
                ry: lry,
            }),
            Some(Blob::Ellipse {
                cx: cx + lrx + rrx - 1.0,
                cy: cy + rng.gen_range(-1.5..1.5),
                rx: rrx,
                ry: rry,
            }),
        )
    } else {
        // Bridged scenes keep the hands close enough that every slab pixel
        // sits within conditioning reach.
        if bridged {
            let lcx = rng.gen_range(w as f64 * 0.26..w as f64 * 0.36);
            let gap = rng.gen_range(8.0..12.0);
            let lcy = rng.gen_range(h as f64 * 0.35..h as f64 * 0.72);
            (
                Some(Blob::Ellipse {
                    cx: lcx,
                    cy: lcy,
                    rx: hand_rx(rng),
                    ry: hand_ry(rng),
                }),
                Some(Blob::Ellipse {
                    cx: lcx + gap,
                    cy: lcy + rng.gen_range(-1.5..1.5),
                    rx: hand_rx(rng),
                    ry: hand_ry(rng),
                }),
            )
        } else {
            let make = |rng: &mut ChaCha8Rng, present: bool, lo: f64, hi: f64| {
                if !present {
                    return None;
                }
                Some(Blob::Ellipse {
                    cx: rng.gen_range(w as f64 * lo..w as f64 * hi),
                    cy: rng.gen_range(h as f64 * 0.3..h as f64 * 0.8),
                    rx: hand_rx(rng),
                    ry: hand_ry(rng),
                })
            };
            (
                make(rng, left_present, 0.12, 0.38),
                make(rng, right_present, 0.62, 0.88),
            )
        }
    };

    // Interacting objects. A two-hand object bridges both hands; otherwise
    // each hand may hold its own, touching the hand edge.
    let mut left_state = if left_present {
        if self_contact {
            HandState::SelfContact
        } else {
            HandState::NoContact
        }
    } else {
        HandState::NotExist
    };
    let mut right_state = if right_present {
        if self_contact {
            HandState::SelfContact
        } else {
            HandState::NotExist
        }
    } else {
        HandState::NotExist
    };
    if right_present && !self_contact {
        right_state = HandState::NoContact;
    }

    let mut object_blobs: Vec<(Blob, ClassId)> = Vec::new();
    if !self_contact {
        if bridged {
            let (Some(lb), Some(rb)) = (&left_blob, &right_blob) else {
                unreachable!()
            };
            let (lcx, lcy) = lb.center();
            let (rcx, rcy) = rb.center();
            let big = rng.gen_bool(0.5);
            let half_h = if big { 3.0 } else { 1.5 };
            let cy = (lcy + rcy) / 2.0;
            let blob = Blob::Rect {
                x0: (lcx + 1.0) as i64,
                y0: (cy - half_h) as i64,
                x1: (rcx - 1.0) as i64,
                y1: (cy + half_h) as i64,
            };
            object_blobs.push((blob, ClassId::TwoHandObject));
            let state = if big {
                HandState::Stationary
            } else {
                HandState::Portable
            };
            left_state = state;
            right_state = state;
        } else {
            // Objects extend away from the frame midline so an attached blob
            // is never closer to the other hand than to its own.
            let mut attach = |rng: &mut ChaCha8Rng,
                              hand: &Blob,
                              class: ClassId,
                              away: f64|
             -> HandState {
                let Blob::Ellipse { cx, cy, rx, ry } = *hand else {
                    unreachable!()
                };
                let big = rng.gen_bool(0.5);
                let obj_r = if big { 3.0 } else { 2.1 };
                let angle: f64 = away + rng.gen_range(-0.45..0.45) * std::f64::consts::PI;
                // Touch the hand edge with ~1px overlap.
                let dist_x = (rx + obj_r - 1.2) * angle.cos();
                let dist_y = (ry + obj_r - 1.2) * angle.sin();
                let blob = object_blob(rng, cx + dist_x, cy + dist_y, big, w, h);
                object_blobs.push((blob, class));
                if big {
                    HandState::Stationary
                } else {
                    HandState::Portable
                }
            };
            if let Some(lb) = &left_blob {
                if rng.gen_bool(config.object_prob) {
                    left_state = attach(rng, lb, ClassId::LeftObject, std::f64::consts::PI);
                }
            }
            if let Some(rb) = &right_blob {
                if rng.gen_bool(config.object_prob) {
                    right_state = attach(rng, rb, ClassId::RightObject, 0.0);
                }
            }
        }
    }

    // Distractor: an object-colored blob away from any hand; stays
    // background in the labels. Always small and round-ish, so wide slabs
    // remain unambiguous two-hand objects.
    if rng.gen_bool(config.distractor_prob) {
        for _try in 0..20 {
            let r = rng.gen_range(2.0..2.9);
            let cx = rng.gen_range(4.0..w as f64 - 4.0);
            let cy = rng.gen_range(4.0..h as f64 - 4.0);
            let blob = if rng.gen_bool(0.5) {
                Blob::Ellipse {
                    cx,
                    cy,
                    rx: r,
                    ry: r,
                }
            } else {
                Blob::Triangle {
                    ax: cx,
                    ay: cy - r,
                    w: 2.0 * r,
                    h: 2.0 * r,
                }
            };
            let (bx, by) = blob.center();
            let far_enough = [&left_blob, &right_blob].iter().all(|hb| match hb {
                Some(Blob::Ellipse { cx, cy, rx, ry }) => {
                    let d = ((bx - cx).powi(2) + (by - cy).powi(2)).sqrt();
                    d > rx.max(*ry) + 10.0
                }
                _ => true,
            });
            if far_enough {
                painter.paint(&blob, colors.object, None, rng);
                break;
            }
        }
    }

    for (blob, class) in &object_blobs {
        painter.paint(blob, colors.object, Some(*class), rng);
    }

    let mut arm_bits = vec![false; (w * h) as usize];
    let paint_hand = |painter: &mut Painter,
                          rng: &mut ChaCha8Rng,
                          blob: &Option<Blob>,
                          color: [u8; 3],
                          class: ClassId,
                          arm_bits: &mut Vec<bool>| {
        if let Some(b) = blob {
            painter.paint(b, color, Some(class), rng);
            if config.with_arm {
                let (cx, cy) = b.center();
                let x0 = (cx - 1.0).max(0.0) as u32;
                let x1 = (cx + 1.0).min(w as f64 - 1.0) as u32;
                let y0 = (cy + 4.0).min(h as f64 - 1.0) as u32;
                for y in y0..h {
                    for x in x0..=x1 {
                        if painter.labels.class_at(x, y) == 0 {
                            painter
                                .image
                                .put_pixel(x, y, image::Rgb(jitter(rng, color, 20)));
                            arm_bits[(y * w + x) as usize] = true;
                        }
                    }
                }
            }
        }
    };
    paint_hand(
        &mut painter,
        rng,
        &left_blob,
        colors.left_hand,
        ClassId::LeftHand,
        &mut arm_bits,
    );
    paint_hand(
        &mut painter,
        rng,
        &right_blob,
        colors.right_hand,
        ClassId::RightHand,
        &mut arm_bits,
    );

    let mut labels = painter.labels;
    if config.with_arm {
        labels
            .set_arm_layer(crate::mask::BinaryMask::from_bits(w, h, arm_bits).unwrap())
            .unwrap();
    }

    // Hands are painted last and can fully occlude a clamped object blob;
    // contact states only stand when the object survived in the labels.
    let counts = labels.class_counts();
    let fix = |state: HandState, own_class: usize| -> HandState {
        match state {
            HandState::Portable | HandState::Stationary
                if counts[own_class] == 0 && counts[5] == 0 =>
            {
                HandState::NoContact
            }
            s => s,
        }
    };
    ToyScene {
        image: painter.image,
        labels,
        states: HandStatePair {
            left: fix(left_state, 3),
            right: fix(right_state, 4),
        },
    }
}

/// Generate `config.n_images` scenes, deterministic under the seed.
pub fn generate_set(config: &ToyConfig) -> Vec<ToyScene> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.n_images)
        .map(|_| generate_scene(&mut rng, config))
        .collect()
}

/// Clean frames (no hands, no interacting objects; distractors allowed)
/// drawn from the same background distribution — pool material.
pub fn generate_clean_backgrounds(config: &ToyConfig, n: usize, seed: u64) -> Vec<RgbImage> {
    let clean_config = ToyConfig {
        n_images: n,
        seed,
        hand_absent_prob: 1.0,
        two_hand_prob: 0.0,
        object_prob: 0.0,
        self_contact_prob: 0.0,
        with_arm: false,
        ..config.clone()
    };
    generate_set(&clean_config)
        .into_iter()
        .map(|s| s.image)
        .collect()
}

/// Write scenes into the dataset layout under `root` with the first
/// `n_train` as train, the next `n_val` as val, and the rest as test.
/// Returns the manifest (also saved as `<root>/manifest.tsv`).
pub fn write_dataset(
    scenes: &[ToyScene],
    root: &std::path::Path,
    n_train: usize,
    n_val: usize,
) -> Result<DatasetManifest> {
    let layout = DatasetLayout::new(root);
    layout.ensure_dirs()?;
    let mut manifest = DatasetManifest::new(root);
    for (i, scene) in scenes.iter().enumerate() {
        let paths = layout.relative_paths(&format!("toy_{i:05}"));
        save_rgb(&scene.image, &root.join(&paths.image))?;
        maskio::save_label_map_at(
            &scene.labels,
            &root.join(&paths.label),
            &root.join(&paths.arm),
            &root.join(&paths.indirect),
        )?;
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        manifest.entries.push(ManifestEntry {
            image: paths.image,
            label: paths.label,
            arm: scene.labels.has_arm_layer().then_some(paths.arm),
            indirect: None,
            source: SourceTag::Synthetic,
            split,
            aug: None,
        });
    }
    manifest.save(&root.join("manifest.tsv"))?;
    Ok(manifest)
}

/// Dump the scenes' hand states in the annotation format.
pub fn write_state_annotations(
    scenes: &[ToyScene],
    path: &std::path::Path,
) -> Result<Vec<(String, HandStatePair)>> {
    let records: Vec<(String, HandStatePair)> = scenes
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("toy_{i:05}"), s.states))
        .collect();
    crate::handstate::save_state_annotations(&records, path)?;
    Ok(records)
}
