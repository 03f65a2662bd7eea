//! Image preprocessing and local feature maps.
//!
//! Raw events are small single-channel intensity images. The pipeline
//! standardizes pixels into `[0, pi]` with a globally fitted min-max
//! scaler, optionally flips each image so its most energetic quadrant
//! sits top-right, crops and average-pools, and finally selects the
//! pixels that become model inputs. Classical networks additionally
//! map each selected angle onto a `dim`-dimensional hypersphere
//! feature vector; quantum circuits consume the angles directly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Single-channel intensity image stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JetImage {
    height: usize,
    width: usize,
    pixels: Vec<f64>,
}

impl JetImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Shape("image dimensions must be positive".into()));
        }
        if pixels.len() != height * width {
            return Err(Error::Shape(format!(
                "{height}x{width} image needs {} pixels, got {}",
                height * width,
                pixels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }
}

/// Global min-max scaler mapping pixel intensities onto `[0, pi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub lo: f64,
    pub hi: f64,
}

/// Fits a scaler on the pixels of (up to) the first `n_fit` images.
///
/// Errors when `n_fit` is zero, no image is available, or every pixel
/// has the same value.
pub fn fit_scaler<'a, I>(images: I, n_fit: usize) -> Result<Scaler>
where
    I: IntoIterator<Item = &'a JetImage>,
{
    if n_fit == 0 {
        return Err(Error::InvalidArgument("scaler fit over zero events".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut seen = 0usize;
    for img in images.into_iter().take(n_fit) {
        seen += 1;
        for &p in img.pixels() {
            lo = lo.min(p);
            hi = hi.max(p);
        }
    }
    if seen == 0 {
        return Err(Error::DegenerateData("no events to fit scaler on".into()));
    }
    if !(hi > lo) {
        return Err(Error::DegenerateData(format!(
            "constant pixel value {lo}; scaler undefined"
        )));
    }
    Ok(Scaler { lo, hi })
}

/// Maps every pixel to `pi * clamp((x - lo) / (hi - lo), 0, 1)`.
/// Out-of-range pixels (possible when the scaler was fitted on a
/// subset) saturate at the boundaries.
pub fn standardize(image: &JetImage, scaler: &Scaler) -> JetImage {
    let span = scaler.hi - scaler.lo;
    let pixels = image
        .pixels
        .iter()
        .map(|&x| std::f64::consts::PI * ((x - scaler.lo) / span).clamp(0.0, 1.0))
        .collect();
    JetImage {
        height: image.height,
        width: image.width,
        pixels,
    }
}

/// Flips the image horizontally and/or vertically so the quadrant with
/// maximal summed intensity ends up top-right.
///
/// Quadrants are the four corner blocks of `floor(h/2) x floor(w/2)`
/// pixels; for odd sides the central row/column belongs to none. Ties
/// prefer no flip, then a horizontal flip, then a vertical one.
pub fn flip_to_top_right(image: &JetImage) -> JetImage {
    let (h, w) = (image.height, image.width);
    let (qh, qw) = (h / 2, w / 2);
    let block = |r0: usize, c0: usize| -> f64 {
        let mut s = 0.0;
        for r in r0..r0 + qh {
            for c in c0..c0 + qw {
                s += image.get(r, c);
            }
        }
        s
    };
    let tr = block(0, w - qw);
    let tl = block(0, 0);
    let br = block(h - qh, w - qw);
    let bl = block(h - qh, 0);
    // Candidate flips in preference order with the quadrant each one
    // moves into the top-right corner.
    let candidates = [(tr, false, false), (tl, true, false), (br, false, true), (bl, true, true)];
    let best = candidates
        .iter()
        .fold(f64::NEG_INFINITY, |m, &(s, _, _)| m.max(s));
    let &(_, fh, fv) = candidates.iter().find(|&&(s, _, _)| s == best).unwrap();
    let mut pixels = Vec::with_capacity(h * w);
    for r in 0..h {
        let src_r = if fv { h - 1 - r } else { r };
        for c in 0..w {
            let src_c = if fh { w - 1 - c } else { c };
            pixels.push(image.get(src_r, src_c));
        }
    }
    JetImage {
        height: h,
        width: w,
        pixels,
    }
}

/// Crops `crop` pixels off every side, truncates trailing rows/columns
/// until both sides are multiples of `pool`, and average-pools
/// `pool x pool` windows.
pub fn crop_downsample(image: &JetImage, crop: usize, pool: usize) -> Result<JetImage> {
    if pool == 0 {
        return Err(Error::InvalidArgument("pool window must be positive".into()));
    }
    let (h, w) = (image.height, image.width);
    if h < 2 * crop + pool || w < 2 * crop + pool {
        return Err(Error::Shape(format!(
            "cannot crop {crop} and pool {pool} on a {h}x{w} image"
        )));
    }
    let ch = h - 2 * crop;
    let cw = w - 2 * crop;
    let oh = ch / pool;
    let ow = cw / pool;
    let mut pixels = Vec::with_capacity(oh * ow);
    let norm = (pool * pool) as f64;
    for r in 0..oh {
        for c in 0..ow {
            let mut s = 0.0;
            for dr in 0..pool {
                for dc in 0..pool {
                    s += image.get(crop + r * pool + dr, crop + c * pool + dc);
                }
            }
            pixels.push(s / norm);
        }
    }
    JetImage {
        height: oh,
        width: ow,
        pixels,
    }
    .validate()
}

impl JetImage {
    fn validate(self) -> Result<Self> {
        JetImage::new(self.height, self.width, self.pixels)
    }
}

/// Which pixels of a processed image feed the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PixelSelection {
    /// The central 2x2 block, row-major (4 features).
    Central4,
    /// The two pixels directly above the central block, then the
    /// central block, row-major (6 features).
    Central4Top2,
    /// Every pixel, row-major.
    Full,
    /// Every pixel in serpentine order along rows.
    SOrder,
}

/// Extracts the selected pixels as a flat feature vector.
pub fn select_pixels(image: &JetImage, selection: PixelSelection) -> Result<Vec<f64>> {
    let (h, w) = (image.height, image.width);
    let central = |img: &JetImage| -> Result<Vec<(usize, usize)>> {
        if h % 2 != 0 || w % 2 != 0 || h < 2 || w < 2 {
            return Err(Error::Shape(format!(
                "central selection needs even sides, image is {h}x{w}"
            )));
        }
        let _ = img;
        Ok(vec![
            (h / 2 - 1, w / 2 - 1),
            (h / 2 - 1, w / 2),
            (h / 2, w / 2 - 1),
            (h / 2, w / 2),
        ])
    };
    match selection {
        PixelSelection::Central4 => {
            let pos = central(image)?;
            Ok(pos.into_iter().map(|(r, c)| image.get(r, c)).collect())
        }
        PixelSelection::Central4Top2 => {
            let mut pos = central(image)?;
            if h < 4 {
                return Err(Error::Shape(format!(
                    "central+top selection needs height >= 4, image is {h}x{w}"
                )));
            }
            pos.insert(0, (h / 2 - 2, w / 2 - 1));
            pos.insert(1, (h / 2 - 2, w / 2));
            Ok(pos.into_iter().map(|(r, c)| image.get(r, c)).collect())
        }
        PixelSelection::Full => Ok(image.pixels.clone()),
        PixelSelection::SOrder => Ok(s_order(image)),
    }
}

/// Serpentine scan: even rows left-to-right, odd rows right-to-left.
pub fn s_order(image: &JetImage) -> Vec<f64> {
    let mut out = Vec::with_capacity(image.pixels.len());
    for r in 0..image.height {
        if r % 2 == 0 {
            for c in 0..image.width {
                out.push(image.get(r, c));
            }
        } else {
            for c in (0..image.width).rev() {
                out.push(image.get(r, c));
            }
        }
    }
    out
}

/// Rotation angles for qubit encodings: standardized pixels are used
/// as-is.
pub fn angle_encode(features: &[f64]) -> Vec<f64> {
    features.to_vec()
}

/// Maps an angle `x` in `[0, pi]` to a unit vector on the
/// `dim`-dimensional hypersphere.
///
/// Component `j` (1-based) is
/// `sqrt(C(dim-1, j-1)) * cos(x/2)^(dim-j) * sin(x/2)^(j-1)`,
/// which has unit norm for every `x`; `dim = 2` reduces to
/// `[cos(x/2), sin(x/2)]`.
pub fn hypersphere_map(x: f64, dim: usize) -> Result<Vec<f64>> {
    if dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "hypersphere map needs dim >= 2, got {dim}"
        )));
    }
    if !(x.is_finite()) || x < -1e-12 || x > std::f64::consts::PI + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "angle {x} outside [0, pi]"
        )));
    }
    let half = x.clamp(0.0, std::f64::consts::PI) / 2.0;
    // The dim = 2 components must equal plain cos(x/2) and sin(x/2)
    // bit for bit, so keep these as two separate libm calls: a fused
    // sincos() can differ from them by one ulp.
    let c = half.cos();
    let s = std::hint::black_box(half).sin();
    let mut out = Vec::with_capacity(dim);
    for j in 1..=dim {
        out.push(binomial(dim - 1, j - 1).sqrt() * c.powi((dim - j) as i32) * s.powi((j - 1) as i32));
    }
    Ok(out)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut res = 1.0;
    for i in 1..=k {
        res *= (n - k + i) as f64 / i as f64;
    }
    res
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn img(h: usize, w: usize, px: &[f64]) -> JetImage {
        JetImage::new(h, w, px.to_vec()).unwrap()
    }

    #[test]
    fn scaler_fit_and_standardize() {
        let a = img(1, 3, &[1.0, 3.0, 2.0]);
        let b = img(1, 3, &[5.0, 0.0, 2.0]);
        let s = fit_scaler([&a, &b], 2).unwrap();
        assert_eq!(s.lo, 0.0);
        assert_eq!(s.hi, 5.0);
        let std = standardize(&a, &s);
        assert_abs_diff_eq!(std.get(0, 0), PI / 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(std.get(0, 1), 3.0 * PI / 5.0, epsilon = 1e-12);
        // Fitting on the first image only clamps the second.
        let s1 = fit_scaler(std::iter::once(&a), 1).unwrap();
        assert_eq!((s1.lo, s1.hi), (1.0, 3.0));
        let clamped = standardize(&b, &s1);
        assert_eq!(clamped.get(0, 0), PI);
        assert_eq!(clamped.get(0, 1), 0.0);
    }

    #[test]
    fn scaler_rejects_degenerate_input() {
        let flat = img(2, 2, &[4.0; 4]);
        assert!(matches!(
            fit_scaler(std::iter::once(&flat), 1),
            Err(Error::DegenerateData(_))
        ));
        assert!(fit_scaler(std::iter::empty(), 3).is_err());
        assert!(fit_scaler(std::iter::once(&flat), 0).is_err());
    }

    #[test]
    fn flip_moves_hot_quadrant_top_right() {
        // Hot pixel bottom-left of a 4x4: needs both flips.
        let mut px = vec![0.0; 16];
        px[3 * 4] = 9.0;
        let f = flip_to_top_right(&img(4, 4, &px));
        assert_eq!(f.get(0, 3), 9.0);
        // Hot pixel top-left: horizontal flip only.
        let mut px = vec![0.0; 16];
        px[0] = 9.0;
        px[15] = 1.0;
        let f = flip_to_top_right(&img(4, 4, &px));
        assert_eq!(f.get(0, 3), 9.0);
        assert_eq!(f.get(3, 0), 1.0);
        // Already top-right: untouched.
        let mut px = vec![0.0; 16];
        px[3] = 9.0;
        let i = img(4, 4, &px);
        assert_eq!(flip_to_top_right(&i), i);
    }

    #[test]
    fn flip_ties_prefer_identity_then_horizontal() {
        let flat = img(3, 3, &[2.0; 9]);
        assert_eq!(flip_to_top_right(&flat), flat);
        // Top-left and top-right equal and maximal: horizontal beats
        // vertical, but identity wins outright.
        let mut px = vec![0.0; 16];
        px[0] = 5.0;
        px[3] = 5.0;
        let i = img(4, 4, &px);
        assert_eq!(flip_to_top_right(&i), i);
        // Only top-left and bottom-left equal and maximal: horizontal
        // flip preferred over the horizontal+vertical one.
        let mut px = vec![0.0; 16];
        px[0] = 5.0;
        px[12] = 5.0;
        let f = flip_to_top_right(&img(4, 4, &px));
        assert_eq!(f.get(0, 3), 5.0);
        assert_eq!(f.get(3, 3), 5.0);
    }

    #[test]
    fn flip_is_idempotent() {
        let px: Vec<f64> = (0..35).map(|i| ((i * 37) % 11) as f64).collect();
        let i = img(5, 7, &px);
        let once = flip_to_top_right(&i);
        assert_eq!(flip_to_top_right(&once), once);
    }

    #[test]
    fn crop_downsample_shapes_match_pipeline() {
        let big = img(37, 37, &vec![1.0; 37 * 37]);
        let six = crop_downsample(&big, 12, 2).unwrap();
        assert_eq!((six.height(), six.width()), (6, 6));
        let four = crop_downsample(&big, 14, 2).unwrap();
        assert_eq!((four.height(), four.width()), (4, 4));
        assert!(crop_downsample(&big, 18, 2).is_err());
        assert!(crop_downsample(&big, 1, 0).is_err());
    }

    #[test]
    fn crop_downsample_averages_windows() {
        let i = img(4, 4, &(0..16).map(|x| x as f64).collect::<Vec<_>>());
        let p = crop_downsample(&i, 0, 2).unwrap();
        assert_eq!(p.pixels(), &[2.5, 4.5, 10.5, 12.5]);
        // Odd leftover rows/columns are truncated before pooling.
        let i = img(5, 5, &(0..25).map(|x| x as f64).collect::<Vec<_>>());
        let p = crop_downsample(&i, 1, 2).unwrap();
        assert_eq!((p.height(), p.width()), (1, 1));
        assert_eq!(p.pixels(), &[(6.0 + 7.0 + 11.0 + 12.0) / 4.0]);
    }

    #[test]
    fn pixel_selection_matches_hand_enumeration() {
        let i = img(4, 4, &(0..16).map(|x| x as f64).collect::<Vec<_>>());
        assert_eq!(
            select_pixels(&i, PixelSelection::Central4).unwrap(),
            vec![5.0, 6.0, 9.0, 10.0]
        );
        assert_eq!(
            select_pixels(&i, PixelSelection::Central4Top2).unwrap(),
            vec![1.0, 2.0, 5.0, 6.0, 9.0, 10.0]
        );
        assert_eq!(select_pixels(&i, PixelSelection::Full).unwrap().len(), 16);
        let i6 = img(6, 6, &(0..36).map(|x| x as f64).collect::<Vec<_>>());
        assert_eq!(
            select_pixels(&i6, PixelSelection::Central4Top2).unwrap(),
            vec![8.0, 9.0, 14.0, 15.0, 20.0, 21.0]
        );
        let odd = img(3, 3, &[0.0; 9]);
        assert!(select_pixels(&odd, PixelSelection::Central4).is_err());
    }

    #[test]
    fn s_order_serpentines_rows() {
        let i = img(3, 3, &(0..9).map(|x| x as f64).collect::<Vec<_>>());
        assert_eq!(
            s_order(&i),
            vec![0.0, 1.0, 2.0, 5.0, 4.0, 3.0, 6.0, 7.0, 8.0]
        );
    }

    #[test]
    fn hypersphere_map_is_unit_norm() {
        for dim in 2..=16 {
            for k in 0..=20 {
                let x = PI * k as f64 / 20.0;
                let v = hypersphere_map(x, dim).unwrap();
                let norm: f64 = v.iter().map(|c| c * c).sum();
                assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn hypersphere_map_small_dims() {
        let x = 1.1;
        let v = hypersphere_map(x, 2).unwrap();
        assert_abs_diff_eq!(v[0], (x / 2.0).cos(), epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], (x / 2.0).sin(), epsilon = 1e-15);
        // Endpoints hit basis vectors.
        let v0 = hypersphere_map(0.0, 5).unwrap();
        assert_eq!(v0[0], 1.0);
        assert!(v0[1..].iter().all(|&c| c == 0.0));
        let vp = hypersphere_map(PI, 5).unwrap();
        assert_abs_diff_eq!(vp[4], 1.0, epsilon = 1e-12);
        // Component formula spot-check at dim 4, j = 2:
        // sqrt(3) cos^2 sin.
        let v = hypersphere_map(x, 4).unwrap();
        let (c, s) = ((x / 2.0).cos(), (x / 2.0).sin());
        assert_abs_diff_eq!(v[1], 3.0f64.sqrt() * c * c * s, epsilon = 1e-14);
    }

    #[test]
    fn hypersphere_rejects_bad_domain() {
        assert!(hypersphere_map(0.5, 1).is_err());
        assert!(hypersphere_map(-0.1, 2).is_err());
        assert!(hypersphere_map(PI + 0.1, 2).is_err());
    }
}
