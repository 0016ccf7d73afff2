//! Hand-state classification with mask-channel inputs. The toy scenes here
//! render hands and objects camouflaged into the background, so an RGB-only
//! classifier has almost nothing to work with while the mask channels carry
//! the full geometry.
//!
//! ```text
//! cargo run --release --example hand_state -- [n_train] [n_test] [epochs] [seed]
//! ```

use hoseg::handstate::{
    build_state_input, state_metrics, train_state_classifier, StateExample, StateInputMode,
    StateTrainConfig,
};
use hoseg::pipeline::Tensor;
use hoseg::toydata::{generate_set, ToyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    let arg = |i: usize, default: usize| -> usize {
        args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default)
    };
    let n_train = arg(1, 240);
    let n_test = arg(2, 80);
    let epochs = arg(3, 25);
    let seed = arg(4, 0) as u64;

    let scenes = generate_set(&ToyConfig {
        n_images: n_train + n_test,
        seed,
        camouflage: true,
        self_contact_prob: 0.15,
        hand_absent_prob: 0.15,
        two_hand_prob: 0.0,
        ..Default::default()
    });
    let examples: Vec<StateExample> = scenes
        .iter()
        .map(|s| StateExample {
            image: Tensor::from_rgb(&s.image),
            labels: Some(s.labels.clone()),
            truth: s.states,
        })
        .collect();
    let (train, test) = examples.split_at(n_train);

    for mode in [StateInputMode::Rgb, StateInputMode::RgbHand, StateInputMode::RgbHandObject] {
        // The RGB-only mode trains without label maps at all.
        let train_set: Vec<StateExample> = train
            .iter()
            .map(|e| StateExample {
                image: e.image.clone(),
                labels: (mode != StateInputMode::Rgb).then(|| e.labels.clone().unwrap()),
                truth: e.truth,
            })
            .collect();
        let config = StateTrainConfig {
            epochs,
            seed,
            ..Default::default()
        };
        let (net, logs) = train_state_classifier(&train_set, mode, &config)?;

        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for e in test {
            let labels = (mode != StateInputMode::Rgb).then_some(e.labels.as_ref().unwrap());
            let input = build_state_input(&e.image, mode, labels)?;
            pred.push(net.predict(&input)?);
            truth.push(e.truth);
        }
        let report = state_metrics(&pred, &truth)?;
        println!(
            "{:<16} train acc L {:.3} R {:.3} | test acc L {:.3} R {:.3} | test macro-F1 L {:.3} R {:.3}",
            mode.as_str(),
            logs.last().map(|l| l.left_accuracy).unwrap_or(0.0),
            logs.last().map(|l| l.right_accuracy).unwrap_or(0.0),
            report.left.accuracy,
            report.right.accuracy,
            report.left.macro_f1,
            report.right.macro_f1,
        );
    }
    Ok(())
}
