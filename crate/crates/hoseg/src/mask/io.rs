//! Label-map and binary-mask image files.
//!
//! Label maps are 8-bit indexed PNGs whose palette index IS the class id;
//! arm and indirect layers live in sibling files named with the `_arm` /
//! `_indirect` suffixes; contact boundaries and arm layers are 8-bit
//! binary (0/255) grayscale PNGs.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mask::{BinaryMask, ContactBoundaryMap, LabelMap};

/// Display palette for the class ids: background, left hand (red), right
/// hand (blue), left-hand object (pink), right-hand object (cyan),
/// two-hand object (green).
pub const CLASS_PALETTE: [[u8; 3]; 6] = [
    [0, 0, 0],
    [255, 0, 0],
    [0, 0, 255],
    [255, 128, 192],
    [0, 255, 255],
    [0, 255, 0],
];

/// `foo.png` + `_arm` -> `foo_arm.png` in the same directory.
pub fn sibling_path(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("png");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

fn write_indexed(path: &Path, width: u32, height: u32, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width, height);
    enc.set_color(png::ColorType::Indexed);
    enc.set_depth(png::BitDepth::Eight);
    enc.set_palette(CLASS_PALETTE.concat());
    let mut writer = enc
        .write_header()
        .map_err(|e| Error::format(path, e.to_string()))?;
    writer
        .write_image_data(data)
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(())
}

fn write_gray(path: &Path, width: u32, height: u32, data: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width, height);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc
        .write_header()
        .map_err(|e| Error::format(path, e.to_string()))?;
    writer
        .write_image_data(data)
        .map_err(|e| Error::format(path, e.to_string()))?;
    Ok(())
}

/// Read an 8-bit single-channel PNG (indexed or grayscale) as raw bytes.
fn read_single_channel(path: &Path) -> Result<(u32, u32, Vec<u8>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = png::Decoder::new(BufReader::new(file));
    dec.set_transformations(png::Transformations::IDENTITY);
    let mut reader = dec
        .read_info()
        .map_err(|e| Error::format(path, e.to_string()))?;
    let mut buf = vec![0u8; reader.output_buffer_size()];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::format(path, e.to_string()))?;
    if info.bit_depth != png::BitDepth::Eight
        || !matches!(
            info.color_type,
            png::ColorType::Indexed | png::ColorType::Grayscale
        )
    {
        return Err(Error::format(
            path,
            format!(
                "expected 8-bit indexed or grayscale PNG, got {:?}/{:?}",
                info.color_type, info.bit_depth
            ),
        ));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width, info.height, buf))
}

/// Write the class map plus any arm/indirect layers next to it.
pub fn save_label_map(labels: &LabelMap, label_path: &Path) -> Result<()> {
    save_label_map_at(
        labels,
        label_path,
        &sibling_path(label_path, "_arm"),
        &sibling_path(label_path, "_indirect"),
    )
}

/// Write the class map with the layer files at explicit paths (layer files
/// are only written when the corresponding layer is present).
pub fn save_label_map_at(
    labels: &LabelMap,
    label_path: &Path,
    arm_path: &Path,
    indirect_path: &Path,
) -> Result<()> {
    write_indexed(label_path, labels.width(), labels.height(), labels.classes())?;
    if let Some(arm) = labels.arm_layer() {
        save_binary_mask(&arm, arm_path)?;
    }
    if let Some(indirect) = labels.indirect_layer() {
        write_indexed(indirect_path, labels.width(), labels.height(), indirect)?;
    }
    Ok(())
}

/// Load a label map; arm and indirect layers are read from the given sibling
/// paths when present.
pub fn load_label_map(
    label_path: &Path,
    arm_path: Option<&Path>,
    indirect_path: Option<&Path>,
) -> Result<LabelMap> {
    let (w, h, classes) = read_single_channel(label_path)?;
    let mut labels = LabelMap::from_classes(w, h, classes)?;
    if let Some(p) = arm_path {
        labels.set_arm_layer(load_binary_mask(p)?)?;
    }
    if let Some(p) = indirect_path {
        let (iw, ih, ids) = read_single_channel(p)?;
        labels.set_indirect_layer(iw, ih, ids)?;
    }
    Ok(labels)
}

pub fn save_binary_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    let data: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_gray(path, mask.width(), mask.height(), &data)
}

pub fn load_binary_mask(path: &Path) -> Result<BinaryMask> {
    let (w, h, data) = read_single_channel(path)?;
    BinaryMask::from_bits(w, h, data.iter().map(|&v| v >= 128).collect())
}

pub fn save_boundary(cb: &ContactBoundaryMap, path: &Path) -> Result<()> {
    save_binary_mask(cb.mask(), path)
}

pub fn load_boundary(path: &Path) -> Result<ContactBoundaryMap> {
    Ok(ContactBoundaryMap::from_mask(load_binary_mask(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::ClassId;

    #[test]
    fn label_map_round_trip_with_layers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("frame.png");

        let mut labels = LabelMap::new(7, 5).unwrap();
        labels.set_class(1, 1, ClassId::LeftHand);
        labels.set_class(2, 1, ClassId::RightObject);
        let mut arm = BinaryMask::new(7, 5).unwrap();
        arm.set(0, 4, true);
        labels.set_arm_layer(arm).unwrap();
        let mut indirect = vec![0u8; 35];
        indirect[20] = 5;
        labels.set_indirect_layer(7, 5, indirect).unwrap();

        save_label_map(&labels, &path).unwrap();
        let loaded = load_label_map(
            &path,
            Some(&sibling_path(&path, "_arm")),
            Some(&sibling_path(&path, "_indirect")),
        )
        .unwrap();
        assert_eq!(loaded, labels);
    }

    #[test]
    fn boundary_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cb.png");
        let mut m = BinaryMask::new(4, 3).unwrap();
        m.set(2, 1, true);
        let cb = ContactBoundaryMap::from_mask(m);
        save_boundary(&cb, &path).unwrap();
        assert_eq!(load_boundary(&path).unwrap(), cb);
    }

    #[test]
    fn sibling_path_inserts_suffix() {
        assert_eq!(
            sibling_path(Path::new("a/b/frame.png"), "_arm"),
            PathBuf::from("a/b/frame_arm.png")
        );
    }
}
