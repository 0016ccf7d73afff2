//! Contact-boundary pseudo-labels from a label map: dilate the hand and
//! object masks, intersect, and take the union over hand-object pairs.
//!
//! ```text
//! cargo run --example generate_contact_boundaries
//! ```

use hoseg::mask::{generate_contact_boundary, ClassId, LabelMap, PairingPolicy};

fn render(labels: &LabelMap, boundary: &hoseg::mask::ContactBoundaryMap) -> String {
    let mut out = String::new();
    for y in 0..labels.height() {
        for x in 0..labels.width() {
            let c = match labels.class_at(x, y) {
                1 => 'L',
                2 => 'R',
                3 => 'l',
                4 => 'r',
                5 => 'B',
                _ if boundary.mask().get(x, y) => '+',
                _ => '.',
            };
            out.push(c);
        }
        out.push('\n');
    }
    out
}

fn main() -> hoseg::Result<()> {
    // A left hand holding an object, a right hand holding nothing, and the
    // band the dilations carve out between hand and object.
    let mut labels = LabelMap::new(24, 12)?;
    for y in 3..9 {
        for x in 2..6 {
            labels.set_class(x, y, ClassId::LeftHand);
        }
        for x in 17..21 {
            labels.set_class(x, y, ClassId::RightHand);
        }
    }
    for y in 4..8 {
        for x in 7..11 {
            labels.set_class(x, y, ClassId::LeftObject);
        }
    }

    for radius in [1u32, 2, 3] {
        let cb = generate_contact_boundary(&labels, radius, PairingPolicy::HandSpecific)?;
        println!(
            "radius {radius}: {} boundary pixels\n{}",
            cb.mask().area(),
            render(&labels, &cb)
        );
    }

    // The right hand touches nothing, so the side-matched policy leaves it
    // boundary-free; the all-pairs policy would bridge it to the left
    // object if the dilations ever met.
    let all = generate_contact_boundary(&labels, 3, PairingPolicy::AllPairs)?;
    println!("all-pairs at radius 3: {} boundary pixels", all.mask().area());
    Ok(())
}
