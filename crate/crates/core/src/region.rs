//! Text region proposal on the normal boundary map.
//!
//! A pixel is a boundary pixel when the L1 distance between its 8-bit encoded
//! normal and any of its 4-neighbours exceeds the threshold. Regions grow from
//! a grid of minimal boxes by randomized per-side bisection, then overlapping
//! results are rejected greedily in random order.

use image::GrayImage;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gbuffer::GBuffer;

#[derive(Debug, Error, PartialEq)]
pub enum RegionError {
    #[error("boundary threshold must be positive")]
    ZeroThreshold,
    #[error("normal map has {got} pixels, expected {expected}")]
    SizeMismatch { got: usize, expected: usize },
    #[error("invalid proposal config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProposalConfig {
    /// L1 threshold on 8-bit encoded normals.
    pub threshold: u32,
    pub min_width: u32,
    pub min_height: u32,
    /// Grid stride choices; one is drawn per proposal run.
    pub strides: Vec<u32>,
}

impl Default for ProposalConfig {
    fn default() -> Self {
        ProposalConfig {
            threshold: 100,
            min_width: 96,
            min_height: 64,
            strides: vec![12, 24, 36],
        }
    }
}

impl ProposalConfig {
    pub fn validate(&self) -> Result<(), RegionError> {
        if self.threshold == 0 {
            return Err(RegionError::ZeroThreshold);
        }
        if self.min_width < 2 || self.min_height < 2 {
            return Err(RegionError::Config("minimal box must be at least 2x2".into()));
        }
        if self.strides.is_empty() || self.strides.contains(&0) {
            return Err(RegionError::Config(
                "strides must be a non-empty list of positive values".into(),
            ));
        }
        Ok(())
    }
}

/// Axis-aligned pixel rectangle `[x1, x2) x [y1, y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextRegion2D {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

impl TextRegion2D {
    pub fn width(&self) -> u32 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> u32 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    /// True when the intersection has positive area.
    pub fn overlaps(&self, other: &TextRegion2D) -> bool {
        self.x1 < other.x2 && other.x1 < self.x2 && self.y1 < other.y2 && other.y1 < self.y2
    }

    pub fn contains(&self, other: &TextRegion2D) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && other.x2 <= self.x2 && other.y2 <= self.y2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalBoundaryMap {
    pub width: u32,
    pub height: u32,
    /// Row-major 0/1 values.
    pub bits: Vec<u8>,
    pub threshold: u32,
}

impl NormalBoundaryMap {
    pub fn from_bits(width: u32, height: u32, bits: Vec<u8>) -> Self {
        assert_eq!(bits.len(), width as usize * height as usize);
        assert!(bits.iter().all(|&b| b <= 1));
        NormalBoundaryMap {
            width,
            height,
            bits,
            threshold: 0,
        }
    }

    pub fn from_gbuffer(g: &GBuffer, threshold: u32) -> Result<Self, RegionError> {
        compute_boundary_map(&g.normal_8, &g.hit_mask, g.width, g.height, threshold)
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    /// 255 for boundary pixels, 0 elsewhere.
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_raw(self.width, self.height, self.bits.iter().map(|&b| b * 255).collect()).expect("buffer size")
    }
}

pub fn compute_boundary_map(
    normal_8: &[[u8; 3]],
    hit_mask: &[bool],
    width: u32,
    height: u32,
    threshold: u32,
) -> Result<NormalBoundaryMap, RegionError> {
    if threshold == 0 {
        return Err(RegionError::ZeroThreshold);
    }
    let expected = width as usize * height as usize;
    for got in [normal_8.len(), hit_mask.len()] {
        if got != expected {
            return Err(RegionError::SizeMismatch { got, expected });
        }
    }
    let (w, h) = (width as usize, height as usize);
    let l1 = |a: &[u8; 3], b: &[u8; 3]| -> u32 { (0..3).map(|k| (a[k] as i32 - b[k] as i32).unsigned_abs()).sum() };
    let mut bits = vec![0u8; expected];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !hit_mask[i] {
                bits[i] = 1;
                continue;
            }
            let n = &normal_8[i];
            let mut max = 0;
            if x > 0 {
                max = max.max(l1(n, &normal_8[i - 1]));
            }
            if x + 1 < w {
                max = max.max(l1(n, &normal_8[i + 1]));
            }
            if y > 0 {
                max = max.max(l1(n, &normal_8[i - w]));
            }
            if y + 1 < h {
                max = max.max(l1(n, &normal_8[i + w]));
            }
            bits[i] = (max > threshold) as u8;
        }
    }
    Ok(NormalBoundaryMap {
        width,
        height,
        bits,
        threshold,
    })
}

/// Summed-area table for O(1) boundary counts over rectangles.
pub struct BoundaryCounter {
    width: usize,
    table: Vec<u32>,
}

impl BoundaryCounter {
    pub fn new(map: &NormalBoundaryMap) -> Self {
        let (w, h) = (map.width as usize, map.height as usize);
        let stride = w + 1;
        let mut table = vec![0u32; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0u32;
            for x in 0..w {
                row += map.bits[y * w + x] as u32;
                table[(y + 1) * stride + x + 1] = table[y * stride + x + 1] + row;
            }
        }
        BoundaryCounter { width: w, table }
    }

    /// Boundary pixels in `[x1, x2) x [y1, y2)`.
    pub fn count(&self, x1: i64, y1: i64, x2: i64, y2: i64) -> u32 {
        let stride = self.width + 1;
        let at = |x: i64, y: i64| self.table[y as usize * stride + x as usize];
        at(x2, y2) + at(x1, y1) - at(x1, y2) - at(x2, y1)
    }
}

#[derive(Debug, Clone, Copy)]
struct SideBounds {
    /// Current box edge; always a clean position.
    lower: i64,
    /// Nearest position known to be blocked, or one past the image border.
    upper: i64,
}

impl SideBounds {
    fn expandable(&self) -> bool {
        (self.lower - self.upper).abs() > 1
    }

    fn mid(&self) -> i64 {
        (self.lower + self.upper).div_euclid(2)
    }
}

/// Grows the minimal box centred at `center` until no side can move.
///
/// Returns `None` when the minimal box leaves the image or already contains
/// a boundary pixel.
pub fn stochastic_binary_search<R: Rng + ?Sized>(
    counter: &BoundaryCounter,
    map_size: (u32, u32),
    center: (u32, u32),
    min_size: (u32, u32),
    rng: &mut R,
) -> Option<TextRegion2D> {
    let (w, h) = (map_size.0 as i64, map_size.1 as i64);
    let (x0, y0) = (center.0 as i64, center.1 as i64);
    let (sw, sh) = (min_size.0 as i64, min_size.1 as i64);
    let (bx1, by1) = (x0 - sw / 2, y0 - sh / 2);
    let (bx2, by2) = (bx1 + sw, by1 + sh);
    if bx1 < 0 || by1 < 0 || bx2 > w || by2 > h {
        return None;
    }
    if counter.count(bx1, by1, bx2, by2) > 0 {
        return None;
    }
    // Outer bounds sit one past the border so an unobstructed side can still
    // reach the border itself.
    let mut sides = [
        SideBounds { lower: bx1, upper: -1 },
        SideBounds { lower: by1, upper: -1 },
        SideBounds {
            lower: bx2,
            upper: w + 1,
        },
        SideBounds {
            lower: by2,
            upper: h + 1,
        },
    ];
    const LEFT: usize = 0;
    const TOP: usize = 1;
    const RIGHT: usize = 2;
    const BOTTOM: usize = 3;
    let mut open = Vec::with_capacity(4);
    loop {
        open.clear();
        open.extend((0..4).filter(|&s| sides[s].expandable()));
        let Some(&side) = open.choose(rng) else {
            break;
        };
        let mid = sides[side].mid();
        let (x1, y1, x2, y2) = (
            sides[LEFT].lower,
            sides[TOP].lower,
            sides[RIGHT].lower,
            sides[BOTTOM].lower,
        );
        // The strip runs from `mid` to the opposite edge: the whole
        // candidate box.
        let blocked = match side {
            LEFT => counter.count(mid, y1, x2, y2),
            TOP => counter.count(x1, mid, x2, y2),
            RIGHT => counter.count(x1, y1, mid, y2),
            _ => counter.count(x1, y1, x2, mid),
        } >= 1;
        if blocked {
            sides[side].upper = mid;
        } else {
            sides[side].lower = mid;
        }
    }
    Some(TextRegion2D {
        x1: sides[LEFT].lower as u32,
        y1: sides[TOP].lower as u32,
        x2: sides[RIGHT].lower as u32,
        y2: sides[BOTTOM].lower as u32,
    })
}

/// Grid centres whose minimal box fits inside the image.
pub fn grid_centers(size: (u32, u32), min_size: (u32, u32), stride: u32) -> Vec<(u32, u32)> {
    let (w, h) = size;
    let (sw, sh) = min_size;
    let mut out = Vec::new();
    let mut y = sh / 2;
    while y - sh / 2 + sh <= h {
        let mut x = sw / 2;
        while x - sw / 2 + sw <= w {
            out.push((x, y));
            x += stride;
        }
        y += stride;
    }
    out
}

/// Runs the search at every grid centre and keeps a pairwise-disjoint
/// subset, visiting candidates in random order.
pub fn propose_regions<R: Rng + ?Sized>(
    map: &NormalBoundaryMap,
    config: &ProposalConfig,
    rng: &mut R,
) -> Result<Vec<TextRegion2D>, RegionError> {
    config.validate()?;
    let min_size = (config.min_width, config.min_height);
    if map.width < min_size.0 || map.height < min_size.1 {
        return Ok(Vec::new());
    }
    let stride = *config.strides.choose(rng).expect("validated non-empty");
    let counter = BoundaryCounter::new(map);
    let mut candidates: Vec<TextRegion2D> = grid_centers((map.width, map.height), min_size, stride)
        .into_iter()
        .filter_map(|c| stochastic_binary_search(&counter, (map.width, map.height), c, min_size, rng))
        .collect();
    candidates.shuffle(rng);
    let mut kept: Vec<TextRegion2D> = Vec::new();
    for c in candidates {
        if kept.iter().all(|k| !k.overlaps(&c)) {
            kept.push(c);
        }
    }
    Ok(kept)
}
