//! Text color choice by CIELAB contrast against the background.

use image::RgbImage;
use rand::Rng;

/// Minimum CIE76 colour difference between text and background mean.
pub const MIN_DELTA_E: f64 = 25.0;

/// Number of highest-contrast entries the choice is drawn from.
pub const CANDIDATES: usize = 8;

/// 64 colours: 8 lightness rows (L* 6..97) times 8 hues at chroma 28, so
/// every background has both light and dark entries far away from it.
pub const PALETTE: [[u8; 3]; 64] = [
    [50, 0, 20],
    [49, 4, 0],
    [35, 18, 0],
    [0, 27, 0],
    [0, 30, 18],
    [0, 29, 45],
    [0, 22, 57],
    [31, 8, 46],
    [82, 26, 47],
    [78, 33, 18],
    [57, 45, 0],
    [23, 53, 15],
    [0, 56, 46],
    [0, 55, 75],
    [0, 48, 87],
    [60, 36, 75],
    [115, 57, 76],
    [112, 62, 45],
    [88, 74, 30],
    [53, 83, 43],
    [0, 86, 75],
    [0, 85, 106],
    [35, 78, 119],
    [91, 65, 107],
    [150, 88, 107],
    [147, 93, 75],
    [122, 105, 59],
    [84, 115, 73],
    [35, 119, 106],
    [0, 117, 139],
    [72, 109, 153],
    [124, 96, 140],
    [186, 121, 140],
    [183, 126, 106],
    [156, 138, 90],
    [116, 148, 104],
    [73, 153, 139],
    [59, 151, 173],
    [106, 142, 188],
    [158, 129, 174],
    [223, 155, 175],
    [220, 160, 139],
    [192, 172, 123],
    [150, 183, 137],
    [109, 188, 173],
    [99, 186, 209],
    [141, 176, 224],
    [193, 163, 210],
    [255, 191, 210],
    [255, 195, 173],
    [229, 208, 157],
    [185, 219, 172],
    [144, 224, 209],
    [136, 222, 246],
    [177, 212, 255],
    [230, 198, 247],
    [255, 227, 247],
    [255, 232, 209],
    [255, 244, 192],
    [222, 255, 207],
    [181, 255, 245],
    [174, 255, 255],
    [214, 249, 255],
    [255, 235, 255],
];

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// CIELAB (D65) of an sRGB colour given as floats in [0, 255].
pub fn srgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb.map(|c| srgb_to_linear(c / 255.0));
    let x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
    let f = |t: f64| {
        if t > (6.0f64 / 29.0).powi(3) {
            t.cbrt()
        } else {
            t / (3.0 * (6.0f64 / 29.0).powi(2)) + 4.0 / 29.0
        }
    };
    let (fx, fy, fz) = (f(x), f(y), f(z));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

pub fn delta_e(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Mean colour of a crop in sRGB byte units.
pub fn mean_color(crop: &RgbImage) -> [f64; 3] {
    let n = (crop.width() as f64 * crop.height() as f64).max(1.0);
    let mut sum = [0.0; 3];
    for p in crop.pixels() {
        for (s, &c) in sum.iter_mut().zip(&p.0) {
            *s += c as f64;
        }
    }
    sum.map(|s| s / n)
}

/// Picks uniformly among the highest-contrast palette entries that clear
/// [`MIN_DELTA_E`] against the mean colour of `crop`.
pub fn pick_text_color<R: Rng + ?Sized>(crop: &RgbImage, rng: &mut R) -> [u8; 3] {
    pick_for_mean(mean_color(crop), rng)
}

pub fn pick_for_mean<R: Rng + ?Sized>(mean: [f64; 3], rng: &mut R) -> [u8; 3] {
    let bg = srgb_to_lab(mean);
    let mut scored: Vec<(f64, [u8; 3])> = PALETTE
        .iter()
        .map(|&c| (delta_e(srgb_to_lab(c.map(f64::from)), bg), c))
        .filter(|(d, _)| *d >= MIN_DELTA_E)
        .collect();
    // Stable sort keeps palette order among equal scores.
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.truncate(CANDIDATES);
    scored[rng.gen_range(0..scored.len())].1
}
