//! Dataset container with a little-endian binary file format, a
//! synthetic event generator, stratified splits, and human-diffable
//! model checkpoints.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encode::{
    crop_downsample, fit_scaler, flip_to_top_right, select_pixels, standardize, JetImage,
    PixelSelection, Scaler,
};
use crate::error::{Error, Result};
use crate::train::{FeatureSet, Model, ModelArch, ModelOptions, TrainConfig};

const MAGIC: &[u8; 4] = b"TNQC";
pub const DATASET_VERSION: u32 = 1;
pub const CHECKPOINT_VERSION: u32 = 1;

/// Events as fixed-size images with binary labels (0 background,
/// 1 signal). Pixels are stored in the file's 32-bit precision so
/// memory and disk contents round-trip bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    height: usize,
    width: usize,
    pixels: Vec<f32>,
    labels: Vec<u8>,
    pub scaler: Option<Scaler>,
}

impl LabeledImageSet {
    pub fn new(
        height: usize,
        width: usize,
        pixels: Vec<f32>,
        labels: Vec<u8>,
    ) -> Result<LabeledImageSet> {
        if height == 0 || width == 0 {
            return Err(Error::Shape(format!("degenerate image size {height}x{width}")));
        }
        if pixels.len() != height * width * labels.len() {
            return Err(Error::Shape(format!(
                "{} pixels cannot hold {} events of {height}x{width}",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} is not binary"
            )));
        }
        Ok(LabeledImageSet {
            height,
            width,
            pixels,
            labels,
            scaler: None,
        })
    }

    pub fn n_events(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn label(&self, event: usize) -> usize {
        self.labels[event] as usize
    }

    /// The event's pixels widened to an f64 image.
    pub fn image(&self, event: usize) -> JetImage {
        let stride = self.height * self.width;
        let start = event * stride;
        let pixels = self.pixels[start..start + stride]
            .iter()
            .map(|&p| p as f64)
            .collect();
        JetImage::new(self.height, self.width, pixels)
            .expect("stored events are always well-shaped")
    }

    /// Builds a set from f64 images, narrowing pixels to f32.
    pub fn from_images(images: &[JetImage], labels: Vec<u8>) -> Result<LabeledImageSet> {
        let (height, width) = match images.first() {
            Some(im) => (im.height(), im.width()),
            None => (1, 1),
        };
        let mut pixels = Vec::with_capacity(height * width * images.len());
        for (k, im) in images.iter().enumerate() {
            if im.height() != height || im.width() != width {
                return Err(Error::Shape(format!(
                    "event {k} is {}x{}, expected {height}x{width}",
                    im.height(),
                    im.width()
                )));
            }
            pixels.extend(im.pixels().iter().map(|&p| p as f32));
        }
        LabeledImageSet::new(height, width, pixels, labels)
    }

    /// Serializes to the on-disk byte layout.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(21 + self.pixels.len() * 4 + self.labels.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.n_events() as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        match self.scaler {
            Some(s) => {
                out.push(1);
                out.extend_from_slice(&s.lo.to_le_bytes());
                out.extend_from_slice(&s.hi.to_le_bytes());
            }
            None => out.push(0),
        }
        let stride = self.height * self.width;
        for (k, &label) in self.labels.iter().enumerate() {
            for &p in &self.pixels[k * stride..(k + 1) * stride] {
                out.extend_from_slice(&p.to_le_bytes());
            }
            out.push(label);
        }
        out
    }

    /// Parses the on-disk byte layout, reporting the byte offset of
    /// the first malformed field.
    pub fn from_bytes(data: &[u8]) -> Result<LabeledImageSet> {
        let mut cur = Cursor { data, pos: 0 };
        let magic = cur.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: format!("bad magic {magic:?}, expected {MAGIC:?}"),
            });
        }
        let version = cur.u32("version")?;
        if version != DATASET_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: DATASET_VERSION,
            });
        }
        let n_events = cur.u32("event count")? as usize;
        let height = cur.u32("height")? as usize;
        let width = cur.u32("width")? as usize;
        if height == 0 || width == 0 {
            return Err(Error::Format {
                offset: 12,
                message: format!("degenerate image size {height}x{width}"),
            });
        }
        let flag_offset = cur.pos;
        let flag = cur.take(1, "scaler flag")?[0];
        let scaler = match flag {
            0 => None,
            1 => Some(Scaler {
                lo: cur.f64("scaler low")?,
                hi: cur.f64("scaler high")?,
            }),
            other => {
                return Err(Error::Format {
                    offset: flag_offset as u64,
                    message: format!("scaler flag must be 0 or 1, found {other}"),
                })
            }
        };
        let stride = height * width;
        let mut pixels = Vec::with_capacity(n_events * stride);
        let mut labels = Vec::with_capacity(n_events);
        for _ in 0..n_events {
            for _ in 0..stride {
                pixels.push(f32::from_le_bytes(
                    cur.take(4, "pixel")?.try_into().expect("4 bytes"),
                ));
            }
            let at = cur.pos;
            let label = cur.take(1, "label")?[0];
            if label > 1 {
                return Err(Error::Format {
                    offset: at as u64,
                    message: format!("label must be 0 or 1, found {label}"),
                });
            }
            labels.push(label);
        }
        if cur.pos != data.len() {
            return Err(Error::Format {
                offset: cur.pos as u64,
                message: format!("{} trailing bytes after the last event", data.len() - cur.pos),
            });
        }
        let mut set = LabeledImageSet::new(height, width, pixels, labels)?;
        set.scaler = scaler;
        Ok(set)
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!(
                    "truncated while reading {what}: need {n} bytes, {} left",
                    self.data.len() - self.pos
                ),
            });
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4, what)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }
}

fn with_path(err: std::io::Error, path: &Path) -> Error {
    Error::Io(std::io::Error::new(
        err.kind(),
        format!("{}: {err}", path.display()),
    ))
}

pub fn write_dataset(path: impl AsRef<Path>, set: &LabeledImageSet) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, set.to_bytes()).map_err(|e| with_path(e, path))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<LabeledImageSet> {
    let path = path.as_ref();
    LabeledImageSet::from_bytes(&fs::read(path).map_err(|e| with_path(e, path))?)
}

/// Generates balanced synthetic events: signal events are two or
/// three Gaussian deposits pushed away from the image center,
/// background events a single tight central deposit. Deterministic
/// per seed; labels alternate so even counts are exactly balanced.
pub fn synth_generate(
    n_events: usize,
    seed: u64,
    height: usize,
    width: usize,
) -> Result<LabeledImageSet> {
    if height == 0 || width == 0 {
        return Err(Error::Shape(format!("degenerate image size {height}x{width}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cy, cx) = ((height as f64 - 1.0) / 2.0, (width as f64 - 1.0) / 2.0);
    let scale = height.min(width) as f64;
    let mut pixels = Vec::with_capacity(n_events * height * width);
    let mut labels = Vec::with_capacity(n_events);
    for k in 0..n_events {
        let label = (k % 2) as u8;
        // (amplitude, center y, center x, sigma) per deposit.
        let mut blobs: Vec<(f64, f64, f64, f64)> = Vec::new();
        if label == 1 {
            let n_blobs = rng.random_range(2..=3usize);
            for _ in 0..n_blobs {
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let radius = scale * rng.random_range(0.24..0.36);
                let amp = rng.random_range(0.6..1.0);
                let sigma = scale * rng.random_range(0.13..0.18);
                blobs.push((
                    amp,
                    cy + radius * angle.sin(),
                    cx + radius * angle.cos(),
                    sigma,
                ));
            }
        } else {
            let amp = rng.random_range(0.8..1.2);
            let sigma = scale * rng.random_range(0.10..0.13);
            blobs.push((amp, cy, cx, sigma));
        }
        for r in 0..height {
            for c in 0..width {
                let mut v = 0.0;
                for &(amp, by, bx, sigma) in &blobs {
                    let dy = r as f64 - by;
                    let dx = c as f64 - bx;
                    v += amp * (-(dy * dy + dx * dx) / (2.0 * sigma * sigma)).exp();
                }
                pixels.push(v as f32);
            }
        }
        labels.push(label);
    }
    LabeledImageSet::new(height, width, pixels, labels)
}

fn take_events(set: &LabeledImageSet, indices: &[usize]) -> LabeledImageSet {
    let stride = set.height * set.width;
    let mut pixels = Vec::with_capacity(indices.len() * stride);
    let mut labels = Vec::with_capacity(indices.len());
    for &i in indices {
        pixels.extend_from_slice(&set.pixels[i * stride..(i + 1) * stride]);
        labels.push(set.labels[i]);
    }
    LabeledImageSet {
        height: set.height,
        width: set.width,
        pixels,
        labels,
        scaler: set.scaler,
    }
}

/// Splits into train/validation/test parts: disjoint, exhaustive,
/// seeded, and stratified so each part's label ratio stays within one
/// event of the global ratio.
pub fn split(
    set: &LabeledImageSet,
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<(LabeledImageSet, LabeledImageSet, LabeledImageSet)> {
    let (ft, fv, fs) = fractions;
    if !(ft >= 0.0 && fv >= 0.0 && fs >= 0.0) {
        return Err(Error::InvalidArgument(
            "split fractions must be non-negative".into(),
        ));
    }
    if (ft + fv + fs - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions sum to {}, expected 1",
            ft + fv + fs
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = (0..set.n_events())
            .filter(|&i| set.labels[i] == class)
            .collect();
        idx.shuffle(&mut rng);
        let n = idx.len() as f64;
        let c1 = (ft * n).round() as usize;
        let c2 = ((ft + fv) * n).round() as usize;
        let c1 = c1.min(idx.len());
        let c2 = c2.clamp(c1, idx.len());
        train.extend_from_slice(&idx[..c1]);
        val.extend_from_slice(&idx[c1..c2]);
        test.extend_from_slice(&idx[c2..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok((
        take_events(set, &train),
        take_events(set, &val),
        take_events(set, &test),
    ))
}

/// Standard image pipeline: flip the brightest quadrant to the top
/// right, fit a global scaler on the first `n_fit` flipped images,
/// standardize everything onto `[0, pi]`, then crop and average-pool.
/// The fitted scaler is attached to the returned set.
pub fn preprocess(
    set: &LabeledImageSet,
    crop: usize,
    pool: usize,
    n_fit: usize,
) -> Result<LabeledImageSet> {
    if set.is_empty() {
        return Err(Error::DegenerateData("cannot preprocess an empty set".into()));
    }
    let flipped: Vec<JetImage> = (0..set.n_events())
        .map(|k| flip_to_top_right(&set.image(k)))
        .collect();
    let scaler = fit_scaler(flipped.iter(), n_fit)?;
    let processed: Vec<JetImage> = flipped
        .iter()
        .map(|im| crop_downsample(&standardize(im, &scaler), crop, pool))
        .collect::<Result<_>>()?;
    let mut out = LabeledImageSet::from_images(&processed, set.labels.clone())?;
    out.scaler = Some(scaler);
    Ok(out)
}

/// Extracts per-event feature angles for training. The set should
/// already be standardized onto `[0, pi]`.
pub fn features_from_set(set: &LabeledImageSet, selection: PixelSelection) -> Result<FeatureSet> {
    let mut features = Vec::with_capacity(set.n_events());
    for k in 0..set.n_events() {
        features.push(select_pixels(&set.image(k), selection)?);
    }
    let labels = set.labels.iter().map(|&l| l as usize).collect();
    FeatureSet::new(features, labels)
}

/// Converts a whitespace-separated text dump (one event per line:
/// `height * width` floats then an integer label) into a set.
pub fn parse_column_dump(text: &str, height: usize, width: usize) -> Result<LabeledImageSet> {
    let stride = height * width;
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    let mut offset = 0u64;
    for (line_no, line) in text.lines().enumerate() {
        let bad = |message: String| Error::Format { offset, message };
        if !line.trim().is_empty() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != stride + 1 {
                return Err(bad(format!(
                    "line {}: expected {} fields ({stride} pixels + label), found {}",
                    line_no + 1,
                    stride + 1,
                    fields.len()
                )));
            }
            for f in &fields[..stride] {
                pixels.push(f.parse::<f32>().map_err(|e| {
                    bad(format!("line {}: bad pixel {f:?}: {e}", line_no + 1))
                })?);
            }
            let label: i64 = fields[stride].parse().map_err(|e| {
                bad(format!("line {}: bad label {:?}: {e}", line_no + 1, fields[stride]))
            })?;
            if !(0..=1).contains(&label) {
                return Err(bad(format!(
                    "line {}: label must be 0 or 1, found {label}",
                    line_no + 1
                )));
            }
            labels.push(label as u8);
        }
        offset += line.len() as u64 + 1;
    }
    LabeledImageSet::new(height, width, pixels, labels)
}

/// Reads a column-dump text file and writes it as a binary dataset.
/// Returns the number of converted events.
pub fn convert_column_dump(
    input: impl AsRef<Path>,
    output: impl AsRef<Path>,
    height: usize,
    width: usize,
) -> Result<usize> {
    let input = input.as_ref();
    let text = fs::read_to_string(input).map_err(|e| with_path(e, input))?;
    let set = parse_column_dump(&text, height, width)?;
    write_dataset(output, &set)?;
    Ok(set.n_events())
}

/// Tag describing how computational basis states are ordered in the
/// simulator: wire 0 owns the most significant bit.
pub const BASIS_ORDERING: &str = "wire0-most-significant";

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct CheckpointDescriptor {
    arch: ModelArch,
    options: ModelOptions,
    label_classes: usize,
    basis_ordering: String,
    n_classical_params: usize,
    n_quantum_params: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct CheckpointParams {
    classical: Vec<f64>,
    quantum: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct CheckpointFile {
    format_version: u32,
    model: CheckpointDescriptor,
    params: CheckpointParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train: Option<TrainConfig>,
}

/// Serializes a model (and optionally the config it was trained
/// with) as human-diffable structured text.
pub fn checkpoint_to_string(model: &Model, train: Option<&TrainConfig>) -> Result<String> {
    let file = CheckpointFile {
        format_version: CHECKPOINT_VERSION,
        model: CheckpointDescriptor {
            arch: model.arch(),
            options: model.options().clone(),
            label_classes: crate::train::LABEL_CLASSES,
            basis_ordering: BASIS_ORDERING.to_string(),
            n_classical_params: model.n_classical_params(),
            n_quantum_params: model.n_quantum_params(),
        },
        params: CheckpointParams {
            classical: model.classical_params().to_vec(),
            quantum: model.quantum_params().to_vec(),
        },
        train: train.cloned(),
    };
    toml::to_string(&file).map_err(|e| Error::InvalidArgument(format!("cannot serialize: {e}")))
}

/// Parses checkpoint text, rebuilds the architecture, and validates
/// every parameter length against the descriptor.
pub fn checkpoint_from_string(text: &str) -> Result<(Model, Option<TrainConfig>)> {
    let file: CheckpointFile = toml::from_str(text).map_err(|e| Error::Format {
        offset: 0,
        message: format!("malformed checkpoint: {e}"),
    })?;
    if file.format_version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: file.format_version,
            expected: CHECKPOINT_VERSION,
        });
    }
    if file.model.basis_ordering != BASIS_ORDERING {
        return Err(Error::InvalidArgument(format!(
            "unknown basis ordering {:?}, expected {BASIS_ORDERING:?}",
            file.model.basis_ordering
        )));
    }
    if file.model.label_classes != crate::train::LABEL_CLASSES {
        return Err(Error::InvalidArgument(format!(
            "{}-class checkpoints are not supported",
            file.model.label_classes
        )));
    }
    let mut model = Model::build(file.model.arch, &file.model.options)?;
    for (what, declared, actual, found) in [
        (
            "classical",
            file.model.n_classical_params,
            model.n_classical_params(),
            file.params.classical.len(),
        ),
        (
            "quantum",
            file.model.n_quantum_params,
            model.n_quantum_params(),
            file.params.quantum.len(),
        ),
    ] {
        if declared != actual || found != actual {
            return Err(Error::Shape(format!(
                "checkpoint declares {declared} {what} parameters and carries {found}, \
                 but the architecture has {actual}"
            )));
        }
    }
    model.set_classical_params(&file.params.classical)?;
    model.set_quantum_params(&file.params.quantum)?;
    Ok((model, file.train))
}

pub fn save_checkpoint(
    path: impl AsRef<Path>,
    model: &Model,
    train: Option<&TrainConfig>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, checkpoint_to_string(model, train)?).map_err(|e| with_path(e, path))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(Model, Option<TrainConfig>)> {
    let path = path.as_ref();
    checkpoint_from_string(&fs::read_to_string(path).map_err(|e| with_path(e, path))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn demo_set() -> LabeledImageSet {
        let mut set = LabeledImageSet::new(
            2,
            3,
            vec![
                0.0, 0.5, 1.0, 1.5, 2.0, 2.5, // event 0
                9.0, 8.0, 7.0, 6.0, 5.0, 4.0, // event 1
                0.25, 0.5, 0.75, 1.0, 1.25, 1.5, // event 2
            ],
            vec![0, 1, 1],
        )
        .unwrap();
        set.scaler = Some(Scaler { lo: -1.0, hi: 9.5 });
        set
    }

    #[test]
    fn dataset_roundtrip_is_bit_exact() {
        let set = demo_set();
        let bytes = set.to_bytes();
        let back = LabeledImageSet::from_bytes(&bytes).unwrap();
        assert_eq!(set, back);
        assert_eq!(bytes, back.to_bytes());
        // Without a scaler too.
        let mut bare = demo_set();
        bare.scaler = None;
        assert_eq!(bare, LabeledImageSet::from_bytes(&bare.to_bytes()).unwrap());
    }

    #[test]
    fn dataset_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.tnqc");
        let set = demo_set();
        write_dataset(&path, &set).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), set);
    }

    #[test]
    fn empty_set_is_a_header_only_file() {
        let set = LabeledImageSet::new(4, 4, vec![], vec![]).unwrap();
        let bytes = set.to_bytes();
        assert_eq!(bytes.len(), 21);
        assert_eq!(LabeledImageSet::from_bytes(&bytes).unwrap(), set);
    }

    #[test]
    fn truncated_file_reports_offset() {
        let bytes = demo_set().to_bytes();
        // Header is 21 + 16 bytes (scaler present); cut inside event 1.
        let cut = 37 + 25 + 10;
        let err = LabeledImageSet::from_bytes(&bytes[..cut]).unwrap_err();
        match err {
            Error::Format { offset, message } => {
                assert_eq!(offset, 37 + 25 + 8);
                assert!(message.contains("truncated"), "{message}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn bad_magic_version_flag_and_label_are_rejected() {
        let good = demo_set().to_bytes();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            LabeledImageSet::from_bytes(&bad_magic),
            Err(Error::Format { offset: 0, .. })
        ));
        let mut bad_version = good.clone();
        bad_version[4..8].copy_from_slice(&7u32.to_le_bytes());
        assert!(matches!(
            LabeledImageSet::from_bytes(&bad_version),
            Err(Error::UnsupportedVersion { found: 7, expected: 1 })
        ));
        let mut bad_flag = good.clone();
        bad_flag[20] = 3;
        assert!(matches!(
            LabeledImageSet::from_bytes(&bad_flag),
            Err(Error::Format { offset: 20, .. })
        ));
        let mut bad_label = good.clone();
        let first_label = 37 + 24;
        bad_label[first_label] = 2;
        assert!(matches!(
            LabeledImageSet::from_bytes(&bad_label),
            Err(Error::Format { offset, .. }) if offset == first_label as u64
        ));
        let mut trailing = good.clone();
        trailing.push(0);
        assert!(matches!(
            LabeledImageSet::from_bytes(&trailing),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn generator_is_deterministic_and_balanced() {
        let a = synth_generate(101, 7, 12, 12).unwrap();
        let b = synth_generate(101, 7, 12, 12).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_ne!(
            a.to_bytes(),
            synth_generate(101, 8, 12, 12).unwrap().to_bytes()
        );
        let n_signal = a.labels().iter().filter(|&&l| l == 1).count() as i64;
        let n_background = a.n_events() as i64 - n_signal;
        assert!((n_signal - n_background).abs() <= 1);
        let even = synth_generate(100, 7, 6, 6).unwrap();
        let n_signal = even.labels().iter().filter(|&&l| l == 1).count();
        assert_eq!(n_signal, 50);
    }

    #[test]
    fn signal_images_are_spatially_broader() {
        // Second spatial moment of the mean image about the center.
        let set = synth_generate(1000, 3, 12, 12).unwrap();
        let (h, w) = (set.height(), set.width());
        let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
        let mut moment = [0.0f64; 2];
        let mut mass = [0.0f64; 2];
        for k in 0..set.n_events() {
            let im = set.image(k);
            let class = set.label(k);
            for r in 0..h {
                for c in 0..w {
                    let r2 = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2);
                    moment[class] += im.get(r, c) * r2;
                    mass[class] += im.get(r, c);
                }
            }
        }
        let second = |c: usize| moment[c] / mass[c];
        assert!(
            second(1) > 1.5 * second(0),
            "signal {} vs background {}",
            second(1),
            second(0)
        );
        for p in set.image(0).pixels() {
            assert!(*p >= 0.0);
        }
    }

    #[test]
    fn split_is_stratified_disjoint_exhaustive() {
        let set = synth_generate(250, 11, 4, 4).unwrap();
        let (train, val, test) = split(&set, (0.6, 0.2, 0.2), 5).unwrap();
        assert_eq!(train.n_events() + val.n_events() + test.n_events(), 250);
        let ratio = |s: &LabeledImageSet| {
            s.labels().iter().filter(|&&l| l == 1).count() as f64 / s.n_events() as f64
        };
        for part in [&train, &val, &test] {
            let expect = 0.5 * part.n_events() as f64;
            let got = ratio(part) * part.n_events() as f64;
            assert!((got - expect).abs() <= 1.0, "{got} signal of {}", part.n_events());
        }
        // Same seed reproduces the split exactly.
        let (train2, _, _) = split(&set, (0.6, 0.2, 0.2), 5).unwrap();
        assert_eq!(train.to_bytes(), train2.to_bytes());
        // Disjointness: pixel blocks of train+val+test are a permutation
        // of the originals; compare event multisets via sorted bytes.
        let event_bytes = |s: &LabeledImageSet| {
            (0..s.n_events())
                .map(|k| {
                    let im = s.image(k);
                    (
                        im.pixels().iter().map(|p| p.to_bits()).collect::<Vec<_>>(),
                        s.label(k),
                    )
                })
                .map(|(p, l)| format!("{p:?}/{l}"))
                .collect::<Vec<String>>()
        };
        let mut all: Vec<String> = event_bytes(&train);
        all.extend(event_bytes(&val));
        all.extend(event_bytes(&test));
        all.sort();
        let mut orig = event_bytes(&set);
        orig.sort();
        assert_eq!(all, orig);
        let (all_train, v, t) = split(&set, (1.0, 0.0, 0.0), 1).unwrap();
        assert_eq!(all_train.n_events(), 250);
        assert!(v.is_empty() && t.is_empty());
        assert!(split(&set, (0.5, 0.2, 0.2), 1).is_err());
        assert!(split(&set, (1.2, -0.1, -0.1), 1).is_err());
    }

    #[test]
    fn preprocess_pipeline_standardizes_and_pools() {
        let set = synth_generate(40, 2, 37, 37).unwrap();
        let six = preprocess(&set, 0, 6, 40).unwrap();
        assert_eq!((six.height(), six.width()), (6, 6));
        let four = preprocess(&set, 0, 9, 40).unwrap();
        assert_eq!((four.height(), four.width()), (4, 4));
        assert!(six.scaler.is_some());
        for k in 0..six.n_events() {
            for p in six.image(k).pixels() {
                assert!(*p >= 0.0 && *p <= std::f64::consts::PI + 1e-6);
            }
        }
        let feats = features_from_set(&six, PixelSelection::Central4Top2).unwrap();
        assert_eq!(feats.len(), 40);
        assert_eq!(feats.features[0].len(), 6);
        assert!(preprocess(&LabeledImageSet::new(2, 2, vec![], vec![]).unwrap(), 0, 1, 1).is_err());
    }

    #[test]
    fn column_dump_converts() {
        let text = "0.0 1.0 2.0 3.0 1\n\n4 5 6 7 0\n";
        let set = parse_column_dump(text, 2, 2).unwrap();
        assert_eq!(set.n_events(), 2);
        assert_eq!(set.labels(), &[1, 0]);
        assert_abs_diff_eq!(set.image(1).get(0, 1), 5.0);
        let err = parse_column_dump("0 1 2 3\n", 2, 2).unwrap_err().to_string();
        assert!(err.contains("expected 5 fields"), "{err}");
        let err = parse_column_dump("0 1 2 x 1\n", 2, 2).unwrap_err().to_string();
        assert!(err.contains("bad pixel"), "{err}");
        let err = parse_column_dump("0 1 2 3 5\n", 2, 2).unwrap_err().to_string();
        assert!(err.contains("label"), "{err}");
        // Byte offsets point at the offending line.
        let two_line = parse_column_dump("0 1 2 3 1\n0 1 2 3 9\n", 2, 2).unwrap_err();
        assert!(matches!(two_line, Error::Format { offset: 10, .. }));
        let dir = tempfile::tempdir().unwrap();
        let txt_path = dir.path().join("dump.txt");
        let bin_path = dir.path().join("dump.tnqc");
        std::fs::write(&txt_path, text).unwrap();
        let n = convert_column_dump(&txt_path, &bin_path, 2, 2).unwrap();
        assert_eq!(n, 2);
        assert_eq!(read_dataset(&bin_path).unwrap().labels(), &[1, 0]);
    }

    #[test]
    fn checkpoint_roundtrips_model_outputs() {
        let opts = ModelOptions {
            n_sites: 4,
            ..ModelOptions::default()
        };
        let mut model = Model::build(ModelArch::Qmera, &opts).unwrap();
        model.init_params(19);
        let config = TrainConfig::default();
        let text = checkpoint_to_string(&model, Some(&config)).unwrap();
        let (loaded, echoed) = checkpoint_from_string(&text).unwrap();
        assert_eq!(echoed.as_ref(), Some(&config));
        assert_eq!(loaded.quantum_params(), model.quantum_params());
        let x = [0.3, 1.1, 2.2, 0.7];
        assert_eq!(
            model.predict(&x).unwrap(),
            loaded.predict(&x).unwrap(),
            "outputs must match bit-exactly"
        );
        // Classical and hybrid paths too.
        for arch in [ModelArch::Mps, ModelArch::HybridTtn] {
            let opts = ModelOptions {
                n_sites: 4,
                phys_dim: 2,
                bond_dim: 2,
                ..ModelOptions::default()
            };
            let mut m = Model::build(arch, &opts).unwrap();
            m.init_params(23);
            let text = checkpoint_to_string(&m, None).unwrap();
            let (l, none) = checkpoint_from_string(&text).unwrap();
            assert!(none.is_none());
            assert_eq!(l.stacked_params(), m.stacked_params());
        }
    }

    #[test]
    fn checkpoint_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.toml");
        let opts = ModelOptions {
            n_sites: 4,
            ..ModelOptions::default()
        };
        let mut model = Model::build(ModelArch::Qmps, &opts).unwrap();
        model.init_params(3);
        save_checkpoint(&path, &model, None).unwrap();
        let (loaded, _) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded.quantum_params(), model.quantum_params());
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let opts = ModelOptions {
            n_sites: 4,
            ..ModelOptions::default()
        };
        let model = Model::build(ModelArch::Qmps, &opts).unwrap();
        let text = checkpoint_to_string(&model, None).unwrap();
        // Wrong parameter count.
        let short = text.replace("n-quantum-params = 6", "n-quantum-params = 5");
        let err = checkpoint_from_string(&short).unwrap_err().to_string();
        assert!(err.contains("parameters"), "{err}");
        // Unsupported version.
        let versioned = text.replace("format-version = 1", "format-version = 9");
        assert!(matches!(
            checkpoint_from_string(&versioned),
            Err(Error::UnsupportedVersion { found: 9, expected: 1 })
        ));
        // Unknown basis ordering.
        let basis = text.replace(BASIS_ORDERING, "wire0-least-significant");
        assert!(checkpoint_from_string(&basis).is_err());
        // Garbage text.
        assert!(matches!(
            checkpoint_from_string("not = [valid"),
            Err(Error::Format { .. })
        ));
    }
}
